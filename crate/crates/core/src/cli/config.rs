//! TOML run configuration.
//!
//! ```toml
//! [problem]
//! example = 1            # or a custom problem, see `CustomProblem`
//!
//! [train]
//! seed = 7
//! arch = "2-20-20-20-1"  # alternative to `hidden = [20, 20, 20]`
//!
//! [output]
//! report = "run.json"
//! checkpoint = "run.ckpt"
//! eval_resolution = 101
//! [[output.slices]]
//! path = "slice.csv"
//! fixed = { x3 = 0.0 }
//! ```

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::Deserialize;

use super::CliError;
use crate::fields::Expr;
use crate::net::parse_arch;
use crate::problem::{builtin_example, BoundaryCondition, BoxDomain, EllipticProblem, Singularity};
use crate::singular::Segment;
use crate::train::TrainConfig;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    problem: toml::Table,
    #[serde(default)]
    train: Option<toml::Table>,
    #[serde(default)]
    output: OutputConfig,
}

/// A user-defined problem. Expressions use variables `x1..xd`; subspace
/// coordinates are one-based like the variables.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomProblem {
    #[serde(default)]
    pub name: Option<String>,
    pub dim: usize,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub kappa: String,
    pub source: String,
    #[serde(default = "default_floor")]
    pub ellipticity_floor: f64,
    pub bc: BcConfig,
    #[serde(default)]
    pub singularities: Vec<SingularityConfig>,
    #[serde(default)]
    pub reference_regular: Option<String>,
    #[serde(default)]
    pub reference_solution: Option<String>,
    #[serde(default)]
    pub boundary_override: Option<String>,
}

fn default_floor() -> f64 {
    1e-6
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BcConfig {
    Dirichlet {
        h: String,
    },
    Neumann {
        h: String,
        anchor_point: Vec<f64>,
        anchor_value: f64,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SingularityConfig {
    Point {
        at: Vec<f64>,
        strength: String,
    },
    Segment {
        a: Vec<f64>,
        b: Vec<f64>,
        density: String,
    },
    Subspace {
        coords: Vec<usize>,
        anchor: Vec<f64>,
        strength: String,
    },
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub report: Option<PathBuf>,
    #[serde(default)]
    pub checkpoint: Option<PathBuf>,
    #[serde(default)]
    pub eval_resolution: Option<usize>,
    #[serde(default)]
    pub slices: Vec<SliceConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SliceConfig {
    pub path: PathBuf,
    /// Fixed coordinates keyed by variable name, e.g. `{ x3 = 0.0 }`.
    #[serde(default)]
    pub fixed: BTreeMap<String, f64>,
    #[serde(default)]
    pub resolution: Option<usize>,
}

pub const DEFAULT_RESOLUTION: usize = 101;

/// A fully resolved configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub problem: EllipticProblem,
    pub example: Option<usize>,
    pub train: TrainConfig,
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<RunConfig, CliError> {
        let raw: RawConfig =
            toml::from_str(text).map_err(|e| CliError::Config(format!("config: {e}")))?;
        let (problem, example, base) = match raw.problem.get("example") {
            Some(value) => {
                if raw.problem.len() != 1 {
                    return Err(CliError::Config(
                        "problem: `example` cannot be combined with custom problem keys".into(),
                    ));
                }
                let example = value
                    .as_integer()
                    .and_then(|n| usize::try_from(n).ok())
                    .ok_or_else(|| CliError::Config("problem.example must be 1..=6".into()))?;
                let p = builtin_example(example)
                    .map_err(|e| CliError::Config(format!("problem.example: {e}")))?;
                let t = TrainConfig::for_example(example)
                    .map_err(|e| CliError::Config(e.to_string()))?;
                (p, Some(example), t)
            }
            None => {
                let custom: CustomProblem = toml::Value::Table(raw.problem)
                    .try_into()
                    .map_err(|e| CliError::Config(format!("problem: {e}")))?;
                (custom.build()?, None, TrainConfig::default())
            }
        };
        let train = overlay_train(base, raw.train, problem.dim())?;
        for slice in &raw.output.slices {
            slice_axes(&slice.fixed, problem.dim())?;
        }
        Ok(RunConfig {
            problem,
            example,
            train,
            output: raw.output,
        })
    }
}

/// Applies the `[train]` table on top of `base`, key by key.
fn overlay_train(
    base: TrainConfig,
    table: Option<toml::Table>,
    dim: usize,
) -> Result<TrainConfig, CliError> {
    let Some(mut table) = table else {
        return Ok(base);
    };
    let arch = table.remove("arch");
    let mut merged =
        toml::Table::try_from(&base).map_err(|e| CliError::Config(format!("train: {e}")))?;
    merge(&mut merged, table);
    let mut cfg: TrainConfig = toml::Value::Table(merged)
        .try_into()
        .map_err(|e| CliError::Config(format!("train: {e}")))?;
    if let Some(arch) = arch {
        let text = arch.as_str().ok_or_else(|| {
            CliError::Config("train.arch must be a string like \"2-20-1\"".into())
        })?;
        let dims = parse_arch(text).map_err(|e| CliError::Config(format!("train.arch: {e}")))?;
        if dims[0] != dim {
            return Err(CliError::Config(format!(
                "train.arch input width {} does not match problem dimension {dim}",
                dims[0]
            )));
        }
        cfg.hidden = dims[1..dims.len() - 1].to_vec();
    }
    cfg.validate()
        .map_err(|e| CliError::Config(format!("train: {e}")))?;
    Ok(cfg)
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Converts `{ x3 = 0.0 }` into zero-based `(axis, value)` pairs.
pub fn slice_axes(
    fixed: &BTreeMap<String, f64>,
    dim: usize,
) -> Result<Vec<(usize, f64)>, CliError> {
    fixed
        .iter()
        .map(|(name, &value)| {
            let axis = name
                .strip_prefix('x')
                .and_then(|i| i.parse::<usize>().ok())
                .filter(|&i| (1..=dim).contains(&i))
                .ok_or_else(|| {
                    CliError::Config(format!("slice key `{name}` is not one of x1..x{dim}"))
                })?;
            Ok((axis - 1, value))
        })
        .collect()
}

impl CustomProblem {
    pub fn build(&self) -> Result<EllipticProblem, CliError> {
        let d = self.dim;
        let expr = |field: &str, src: &str| {
            Expr::parse(src, d).map_err(|e| CliError::Config(format!("problem.{field}: {e}")))
        };
        let invalid = |e: crate::problem::ProblemError| CliError::Config(format!("problem: {e}"));
        if self.lower.len() != d || self.upper.len() != d {
            return Err(CliError::Config(format!(
                "problem.lower/upper must have {d} entries"
            )));
        }
        let domain = BoxDomain::new(self.lower.clone(), self.upper.clone()).map_err(invalid)?;
        let bc = match &self.bc {
            BcConfig::Dirichlet { h } => BoundaryCondition::Dirichlet {
                h: expr("bc.h", h)?,
            },
            BcConfig::Neumann {
                h,
                anchor_point,
                anchor_value,
            } => BoundaryCondition::Neumann {
                h: expr("bc.h", h)?,
                anchor_point: anchor_point.clone(),
                anchor_value: *anchor_value,
            },
        };
        let mut singularities = Vec::with_capacity(self.singularities.len());
        for (i, s) in self.singularities.iter().enumerate() {
            let field = format!("singularities[{i}]");
            singularities.push(match s {
                SingularityConfig::Point { at, strength } => {
                    Singularity::point(at.clone(), expr(&field, strength)?)
                }
                SingularityConfig::Segment { a, b, density } => {
                    let seg = Segment::new(a.clone(), b.clone())
                        .map_err(|e| CliError::Config(format!("problem.{field}: {e}")))?;
                    Singularity::segment(seg, expr(&field, density)?)
                }
                SingularityConfig::Subspace {
                    coords,
                    anchor,
                    strength,
                } => {
                    if coords.contains(&0) {
                        return Err(CliError::Config(format!(
                            "problem.{field}: subspace coords are one-based"
                        )));
                    }
                    let coords = coords.iter().map(|c| c - 1).collect();
                    Singularity::subspace(coords, anchor.clone(), expr(&field, strength)?)
                }
            });
        }
        let mut p = EllipticProblem::new(
            domain,
            expr("kappa", &self.kappa)?,
            expr("source", &self.source)?,
            singularities,
            bc,
            self.ellipticity_floor,
        )
        .map_err(invalid)?;
        if let Some(name) = &self.name {
            p = p.with_name(name.clone());
        }
        if let Some(v) = &self.reference_regular {
            p = p
                .with_reference_regular(expr("reference_regular", v)?)
                .map_err(invalid)?;
        }
        if let Some(u) = &self.reference_solution {
            p = p
                .with_reference_solution(expr("reference_solution", u)?)
                .map_err(invalid)?;
        }
        if let Some(t) = &self.boundary_override {
            p = p
                .with_boundary_override(expr("boundary_override", t)?)
                .map_err(invalid)?;
        }
        Ok(p)
    }
}
