//! CSV slices of a trained solution.

use std::fmt::Write as _;

use super::CliError;
use crate::net::{mlp_forward, MlpParams};
use crate::problem::{EllipticProblem, ProblemError};
use crate::sampling::eval_grid;
use crate::singular::SingularError;
use crate::train::Formulation;

/// Exact solution at `x`: `u*` when given, otherwise `w + v*`. `None` when
/// the problem has no reference or `x` lies on a support.
fn exact_value(problem: &EllipticProblem, x: &[f64]) -> Result<Option<f64>, CliError> {
    if let Some(u) = problem.reference_solution() {
        if problem.support_distance(x) == 0.0 {
            return Ok(None);
        }
        let v = u.eval(x).map_err(ProblemError::from).map_err(numerical)?;
        return Ok(v.is_finite().then_some(v));
    }
    match problem.reference_regular() {
        Some(v) => {
            let Some(w) = singular_part(problem, x)? else {
                return Ok(None);
            };
            let r = v.eval(x).map_err(ProblemError::from).map_err(numerical)?;
            Ok(Some(w + r))
        }
        None => Ok(None),
    }
}

fn numerical(e: ProblemError) -> CliError {
    CliError::Numerical(e.to_string())
}

fn singular_part(problem: &EllipticProblem, x: &[f64]) -> Result<Option<f64>, CliError> {
    match problem.singular_field(x) {
        Ok((w, _)) if w.is_finite() => Ok(Some(w)),
        Ok(_) | Err(ProblemError::Singular(SingularError::OnSupport)) => Ok(None),
        Err(e) => Err(numerical(e)),
    }
}

fn has_exact(problem: &EllipticProblem) -> bool {
    problem.reference_solution().is_some() || problem.reference_regular().is_some()
}

fn cell(out: &mut String, v: Option<f64>) {
    out.push(',');
    if let Some(v) = v {
        write!(out, "{v:.16e}").unwrap();
    }
}

/// CSV text with header `x1..xd,u_pred[,u_exact,abs_err]`.
///
/// `network` holds the network output at each row of `points`. For the split
/// formulation `u_pred = w + v̂`; rows on a singular support, where `w` is
/// unbounded, get empty prediction, exact and error cells.
pub fn slice_csv(
    problem: &EllipticProblem,
    formulation: Formulation,
    points: &[f64],
    network: &[f64],
) -> Result<String, CliError> {
    let d = problem.dim();
    let exact_cols = has_exact(problem);
    let mut out = String::new();
    let names: Vec<String> = (1..=d).map(|i| format!("x{i}")).collect();
    out.push_str(&names.join(","));
    out.push_str(",u_pred");
    if exact_cols {
        out.push_str(",u_exact,abs_err");
    }
    out.push('\n');
    for (x, &net) in points.chunks(d).zip(network) {
        for (i, xi) in x.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            write!(out, "{xi:.16e}").unwrap();
        }
        let pred = match formulation {
            Formulation::Split => singular_part(problem, x)?.map(|w| w + net),
            Formulation::NaiveDrm => Some(net),
        };
        cell(&mut out, pred);
        if exact_cols {
            let exact = match pred {
                Some(_) => exact_value(problem, x)?,
                None => None,
            };
            cell(&mut out, exact);
            cell(&mut out, pred.zip(exact).map(|(p, e)| (p - e).abs()));
        }
        out.push('\n');
    }
    Ok(out)
}

/// Evaluates `params` on the slice grid and renders it as CSV.
pub fn export_slice(
    problem: &EllipticProblem,
    formulation: Formulation,
    params: &MlpParams,
    fixed: &[(usize, f64)],
    resolution: usize,
) -> Result<String, CliError> {
    if params.input_dim() != problem.dim() {
        return Err(CliError::Checkpoint(format!(
            "network input width {} does not match problem dimension {}",
            params.input_dim(),
            problem.dim()
        )));
    }
    let points = eval_grid(problem.domain(), resolution, fixed)
        .map_err(|e| CliError::Config(format!("slice: {e}")))?;
    let network = mlp_forward(params, &points).map_err(|e| CliError::Numerical(e.to_string()))?;
    slice_csv(problem, formulation, &points, &network)
}
