//! Text checkpoint of trained network parameters.
//!
//! ```text
//! splitritz-checkpoint 1
//! arch 3-10-10-10-1
//! seed 0
//! formulation split
//! sigma 2e1 3e1 4.5e1
//! params 281
//! -1.2345678901234567e-1
//! ...
//! ```
//!
//! Floats use Rust's shortest round-trip formatting, so loading a saved
//! checkpoint reproduces every parameter bit for bit.

use std::fmt::Write as _;
use std::path::Path;

use super::{write_atomic, CliError};
use crate::net::{parse_arch, MlpParams};
use crate::train::Formulation;

const MAGIC: &str = "splitritz-checkpoint";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: MlpParams,
    pub seed: u64,
    pub formulation: Formulation,
    /// Penalty values of the stages that produced `params`.
    pub sigmas: Vec<f64>,
}

fn formulation_text(f: Formulation) -> &'static str {
    match f {
        Formulation::Split => "split",
        Formulation::NaiveDrm => "naive_drm",
    }
}

impl Checkpoint {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let sigmas: Vec<String> = self.sigmas.iter().map(|s| format!("{s:e}")).collect();
        writeln!(out, "{MAGIC} {VERSION}").unwrap();
        writeln!(out, "arch {}", self.params.arch()).unwrap();
        writeln!(out, "seed {}", self.seed).unwrap();
        writeln!(out, "formulation {}", formulation_text(self.formulation)).unwrap();
        writeln!(out, "sigma {}", sigmas.join(" ")).unwrap();
        writeln!(out, "params {}", self.params.len()).unwrap();
        for w in self.params.theta() {
            writeln!(out, "{w:e}").unwrap();
        }
        out
    }

    pub fn parse(text: &str) -> Result<Checkpoint, CliError> {
        let bad = |m: String| CliError::Checkpoint(m);
        let mut lines = text.lines();
        let mut header = |key: &str| -> Result<String, CliError> {
            let line = lines
                .next()
                .ok_or_else(|| bad(format!("missing `{key}` line")))?;
            line.strip_prefix(key)
                .and_then(|rest| rest.strip_prefix(' ').or((rest.is_empty()).then_some("")))
                .map(str::to_string)
                .ok_or_else(|| bad(format!("expected `{key}`, found `{line}`")))
        };
        let version = header(MAGIC)?;
        if version != VERSION.to_string() {
            return Err(bad(format!("unsupported format version `{version}`")));
        }
        let dims = parse_arch(&header("arch")?).map_err(|e| bad(e.to_string()))?;
        let seed = header("seed")?
            .parse()
            .map_err(|e| bad(format!("seed: {e}")))?;
        let formulation = match header("formulation")?.as_str() {
            "split" => Formulation::Split,
            "naive_drm" => Formulation::NaiveDrm,
            other => return Err(bad(format!("unknown formulation `{other}`"))),
        };
        let sigmas = header("sigma")?
            .split_whitespace()
            .map(|s| s.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| bad(format!("sigma: {e}")))?;
        let count: usize = header("params")?
            .parse()
            .map_err(|e| bad(format!("params: {e}")))?;
        let theta = lines
            .filter(|l| !l.trim().is_empty())
            .map(|l| l.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| bad(format!("parameter value: {e}")))?;
        if theta.len() != count {
            return Err(bad(format!(
                "header declares {count} parameters, file holds {}",
                theta.len()
            )));
        }
        let params = MlpParams::new(dims, theta).map_err(|e| bad(e.to_string()))?;
        Ok(Checkpoint {
            params,
            seed,
            formulation,
            sigmas,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        write_atomic(path, self.to_text().as_bytes())
    }

    pub fn load(path: &Path) -> Result<Checkpoint, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Checkpoint::parse(&text)
            .map_err(|e| CliError::Checkpoint(format!("{}: {e}", path.display())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::init_mlp;

    #[test]
    fn text_round_trip_is_bit_exact() {
        let params = init_mlp(&[3, 5, 5, 5, 1], 9).unwrap();
        let theta: Vec<f64> = params
            .theta()
            .iter()
            .enumerate()
            .map(|(i, w)| w * 1e-7_f64.powi(i as i32 % 3) + f64::EPSILON * i as f64)
            .collect();
        let ck = Checkpoint {
            params: params.with_theta(theta).unwrap(),
            seed: u64::MAX,
            formulation: Formulation::NaiveDrm,
            sigmas: vec![20.0, 30.0, 45.0, 0.1 + 0.2],
        };
        let back = Checkpoint::parse(&ck.to_text()).unwrap();
        assert_eq!(back.params.dims(), ck.params.dims());
        assert!(back
            .params
            .theta()
            .iter()
            .zip(ck.params.theta())
            .all(|(a, b)| a.to_bits() == b.to_bits()));
        assert_eq!(back.sigmas[3].to_bits(), (0.1f64 + 0.2).to_bits());
        assert_eq!(back.seed, u64::MAX);
        assert_eq!(back.formulation, Formulation::NaiveDrm);
    }

    #[test]
    fn rejects_corrupt_files() {
        let ck = Checkpoint {
            params: init_mlp(&[2, 3, 1], 1).unwrap(),
            seed: 1,
            formulation: Formulation::Split,
            sigmas: vec![20.0],
        };
        let text = ck.to_text();
        assert!(Checkpoint::parse(&text.replace("checkpoint 1", "checkpoint 7")).is_err());
        assert!(Checkpoint::parse(&text.replace("params 13", "params 12")).is_err());
        assert!(Checkpoint::parse(&text.replace("arch 2-3-1", "arch 2-4-1")).is_err());
        let truncated: String = text.lines().take(8).map(|l| format!("{l}\n")).collect();
        assert!(Checkpoint::parse(&truncated).is_err());
        assert!(Checkpoint::parse("").is_err());
    }
}
