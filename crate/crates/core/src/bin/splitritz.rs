fn main() {
    std::process::exit(splitritz::cli::run(std::env::args_os()));
}
