//! The six benchmark problems and the settings used to reproduce them.

use super::{BoundaryCondition, BoxDomain, EllipticProblem, ProblemError, Singularity};
use crate::fields::Expr;
use crate::singular::Segment;

pub const EXAMPLE_COUNT: usize = 6;

/// Network and sampling settings reported for each benchmark.
#[derive(Debug, Clone, PartialEq)]
pub struct ExampleSettings {
    pub hidden: Vec<usize>,
    pub n_interior: usize,
    pub n_boundary: usize,
    pub sigma_max: f64,
    /// Relative error of the regular part reported for the original runs.
    pub reference_error: f64,
}

impl ExampleSettings {
    /// Full layer list `[d, hidden.., 1]`.
    pub fn dims(&self, d: usize) -> Vec<usize> {
        let mut dims = Vec::with_capacity(self.hidden.len() + 2);
        dims.push(d);
        dims.extend_from_slice(&self.hidden);
        dims.push(1);
        dims
    }
}

pub fn example_settings(n: usize) -> Result<ExampleSettings, ProblemError> {
    let (hidden, n_boundary, sigma_max, reference_error) = match n {
        1 => (vec![20, 20, 20], 400, 1200.0, 4.85e-3),
        2 => (vec![8, 8, 8], 400, 1200.0, 3.18e-2),
        3 => (vec![5, 5, 5], 400, 1200.0, 8.14e-3),
        4 => (vec![10, 10, 10, 10], 400, 8000.0, 2.03e-2),
        5 => (vec![6, 6], 400, 1730.0, 4.37e-3),
        6 => (vec![10, 10], 400, 1922.0, 8.14e-3),
        _ => return Err(ProblemError::UnknownExample(n)),
    };
    Ok(ExampleSettings {
        hidden,
        n_interior: 10_000,
        n_boundary,
        sigma_max,
        reference_error,
    })
}

/// Built-in benchmark `n` (1..=6) with both reference parts attached.
pub fn builtin_example(n: usize) -> Result<EllipticProblem, ProblemError> {
    let problem = match n {
        1 => example1(),
        2 => example2(),
        3 => example3(),
        4 => example4(),
        5 => example5(),
        6 => example6(),
        _ => return Err(ProblemError::UnknownExample(n)),
    }?;
    Ok(problem.with_name(format!("example-{n}")))
}

fn parse(src: &str, d: usize) -> Result<Expr, ProblemError> {
    Ok(Expr::parse(src, d)?)
}

fn dirichlet(
    domain: BoxDomain,
    kappa: &str,
    g: &str,
    singularities: Vec<Singularity>,
    u: &str,
    v: &str,
    floor: f64,
) -> Result<EllipticProblem, ProblemError> {
    let d = domain.dim();
    EllipticProblem::new(
        domain,
        parse(kappa, d)?,
        parse(g, d)?,
        singularities,
        BoundaryCondition::Dirichlet { h: parse(u, d)? },
        floor,
    )?
    .with_reference_solution(parse(u, d)?)?
    .with_reference_regular(parse(v, d)?)
}

/// 2D Dirichlet, point source at the origin with strength `2κ`.
fn example1() -> Result<EllipticProblem, ProblemError> {
    let kappa = "norm(x1,x2)^2+1";
    let g = "(norm(x1,x2)^2+1)*(2*x2*sin(x1)*exp(x1*x2)+(1-x1^2-x2^2)*exp(x1*x2)*cos(x1))\
             +2/pi-4*x1*x2*cos(x1)*exp(x1*x2)+2*x1*sin(x1)*exp(x1*x2)";
    let strength = parse("2*(norm(x1,x2)^2+1)", 2)?;
    dirichlet(
        BoxDomain::cube(2, -1.0, 1.0),
        kappa,
        g,
        vec![Singularity::point(vec![0.0, 0.0], strength)],
        "-ln(norm(x1,x2))/pi+exp(x1*x2)*cos(x1)",
        "exp(x1*x2)*cos(x1)",
        1.0,
    )
}

/// 2D Neumann Poisson problem, unit point source, anchored at `(1, 0)`.
fn example2() -> Result<EllipticProblem, ProblemError> {
    let d = 2;
    let u = "-ln(norm(x1,x2))/(2*pi)+cos(pi*x1)+cos(pi*x2)";
    EllipticProblem::new(
        BoxDomain::cube(d, -1.0, 1.0),
        parse("1", d)?,
        parse("pi^2*(cos(pi*x1)+cos(pi*x2))", d)?,
        vec![Singularity::point(vec![0.0, 0.0], parse("1", d)?)],
        // κ∂ₙΦ on the square boundary, where x·n = 1 on every edge.
        BoundaryCondition::Neumann {
            h: parse("-1/(2*pi*norm(x1,x2)^2)", d)?,
            anchor_point: vec![1.0, 0.0],
            anchor_value: 0.0,
        },
        1.0,
    )?
    .with_reference_solution(parse(u, d)?)?
    .with_reference_regular(parse("cos(pi*x1)+cos(pi*x2)", d)?)
}

/// 3D Dirichlet, point source at the origin with strength `κ`.
fn example3() -> Result<EllipticProblem, ProblemError> {
    let kappa = "norm(x1,x2,x3)^2+1";
    let g = "(norm(x1,x2,x3)^2+1)*(x1^2+x2^2+1)*sin(x1*x2+x3)\
             -(4*x1*x2+2*x3)*cos(x1*x2+x3)+1/(2*pi*norm(x1,x2,x3))";
    dirichlet(
        BoxDomain::cube(3, -1.0, 1.0),
        kappa,
        g,
        vec![Singularity::point(vec![0.0; 3], parse(kappa, 3)?)],
        "1/(4*pi*norm(x1,x2,x3))+sin(x1*x2+x3)",
        "sin(x1*x2+x3)",
        1.0,
    )
}

/// 3D line source with density `x3` on an edge of the unit cube.
fn example4() -> Result<EllipticProblem, ProblemError> {
    let d = 3;
    let ra = "sqrt(x1^2+x2^2+(x3-0.2)^2)";
    let rb = "sqrt(x1^2+x2^2+(x3-0.8)^2)";
    let v = format!("({rb}-{ra})/(4*pi)");
    let u = format!("x3/(4*pi)*ln(({rb}-(x3-0.8))/({ra}-(x3-0.2)))+{v}");
    let seg = Segment::new(vec![0.0, 0.0, 0.2], vec![0.0, 0.0, 0.8])?;
    // The segment lies on the boundary, so the regular trace is supplied
    // directly instead of as the difference of two singular quantities.
    dirichlet(
        BoxDomain::cube(d, 0.0, 1.0),
        "1",
        "0",
        vec![Singularity::segment(seg, parse("x3", d)?)],
        &u,
        &v,
        1.0,
    )?
    .with_boundary_override(parse(&v, d)?)
}

/// 3D line source through the cube plus two point sources, `κ = e^{x3}`.
fn example5() -> Result<EllipticProblem, ProblemError> {
    let d = 3;
    let ra = "sqrt(x1^2+x2^2+(x3+1)^2)";
    let rb = "sqrt(x1^2+x2^2+(x3-1)^2)";
    let r3 = "sqrt(x1^2+(x2-0.5)^2+x3^2)";
    let r4 = "sqrt(x1^2+(x2+0.5)^2+x3^2)";
    let g = format!(
        "-(x1*x2+x1^2*x2^2+x2^2*x3^2+x3^2*x1^2)*exp(x1*x2*x3+x3)\
         +x3*exp(x3)/(4*pi*{r3}^3)+x3*exp(x3)/(4*pi*{r4}^3)\
         +exp(x3)/(4*pi)*(1/{rb}-1/{ra})"
    );
    let u =
        format!("ln(({rb}-(x3-1))/({ra}-(x3+1)))/(4*pi)+1/(4*pi*{r3})+1/(4*pi*{r4})+exp(x1*x2*x3)");
    let f = || parse("exp(x3)", d);
    let seg = Segment::new(vec![0.0, 0.0, -1.0], vec![0.0, 0.0, 1.0])?;
    dirichlet(
        BoxDomain::cube(d, -1.0, 1.0),
        "exp(x3)",
        &g,
        vec![
            Singularity::segment(seg, f()?),
            Singularity::point(vec![0.0, 0.5, 0.0], f()?),
            Singularity::point(vec![0.0, -0.5, 0.0], f()?),
        ],
        &u,
        "exp(x1*x2*x3)",
        0.25,
    )
}

/// 5D Poisson problem with nine sources on 3D subspaces `{x' = aᵢ}`, where
/// `x' = (x1, x2)`.
fn example6() -> Result<EllipticProblem, ProblemError> {
    let d = 5;
    let anchors = [
        [0.5, 0.5],
        [0.0, 0.5],
        [-0.5, 0.5],
        [0.5, 0.0],
        [0.0, 0.0],
        [-0.5, 0.0],
        [0.5, -0.5],
        [0.0, -0.5],
        [-0.5, -0.5],
    ];
    let mut terms = Vec::new();
    let mut singularities = Vec::new();
    for a in anchors {
        terms.push(format!(
            "-ln(({})^2+({})^2)/(4*pi)",
            shifted("x1", a[0]),
            shifted("x2", a[1])
        ));
        singularities.push(Singularity::subspace(
            vec![0, 1],
            a.to_vec(),
            parse("1", d)?,
        ));
    }
    let v = "norm(x1,x2,x3,x4,x5)^2";
    let u = format!("{}+{v}", terms.join(""));
    dirichlet(
        BoxDomain::cube(d, -1.0, 1.0),
        "1",
        "-10",
        singularities,
        &u,
        v,
        1.0,
    )
}

fn shifted(var: &str, by: f64) -> String {
    if by == 0.0 {
        var.to_string()
    } else if by > 0.0 {
        format!("{var}-{by}")
    } else {
        format!("{var}+{}", -by)
    }
}
