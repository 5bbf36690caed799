//! Limited-memory BFGS with a strong-Wolfe line search.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LbfgsOptions {
    pub max_iters: usize,
    /// Stop once `max|∇f| ≤ grad_tol`.
    pub grad_tol: f64,
    /// Stop once `(f_k − f_{k+1}) / max(|f_k|, |f_{k+1}|, 1) ≤ ftol`.
    pub ftol: f64,
    pub memory: usize,
    pub c1: f64,
    pub c2: f64,
    /// Objective evaluations allowed per line search.
    pub max_line_search: usize,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        LbfgsOptions {
            max_iters: 2500,
            grad_tol: 1e-9,
            ftol: 1e-15,
            memory: 10,
            c1: 1e-4,
            c2: 0.9,
            max_line_search: 25,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LbfgsStop {
    GradientTolerance,
    RelativeDecrease,
    MaxIterations,
    LineSearchFailure,
    /// The caller's monitor asked to stop.
    Halted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LbfgsStats {
    pub iterations: usize,
    pub evaluations: usize,
    pub initial_value: f64,
    pub final_value: f64,
    /// Max-norm of the gradient at the returned point.
    pub grad_norm: f64,
    pub stop: LbfgsStop,
    pub line_search_failed: bool,
    /// Objective after every accepted step, starting with the initial value.
    pub history: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LbfgsError {
    #[error("objective is not finite at the starting point (value {value})")]
    NonFiniteStart { value: f64 },
    #[error("objective returned a gradient of length {got}, expected {expected}")]
    GradientLength { expected: usize, got: usize },
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

struct Point {
    x: Vec<f64>,
    f: f64,
    g: Vec<f64>,
}

struct Search<'a, F> {
    objective: &'a mut F,
    evaluations: usize,
    best: Option<Point>,
}

impl<F> Search<'_, F>
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    fn eval(&mut self, x: Vec<f64>) -> Point {
        let (f, g) = (self.objective)(&x);
        self.evaluations += 1;
        let finite = f.is_finite() && g.iter().all(|v| v.is_finite());
        let f = if finite { f } else { f64::INFINITY };
        if finite && self.best.as_ref().is_none_or(|b| f < b.f) {
            self.best = Some(Point {
                x: x.clone(),
                f,
                g: g.clone(),
            });
        }
        Point { x, f, g }
    }
}

/// Outcome of one line search along `d` from `p`.
enum Step {
    Wolfe(Point),
    /// Budget exhausted; carries the best point that satisfied sufficient
    /// decrease, if any.
    Exhausted(Option<Point>),
}

fn trial(p: &Point, d: &[f64], alpha: f64) -> Vec<f64> {
    p.x.iter().zip(d).map(|(x, di)| x + alpha * di).collect()
}

/// Minimizer of the cubic interpolating `(a, fa, ga)` and `(b, fb, gb)`,
/// safeguarded to the inner 80% of the bracket.
fn cubic_step(a: f64, fa: f64, ga: f64, b: f64, fb: f64, gb: f64) -> f64 {
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    let margin = 0.1 * (hi - lo);
    let fallback = 0.5 * (a + b);
    if !fb.is_finite() {
        return fallback;
    }
    let d1 = ga + gb - 3.0 * (fa - fb) / (a - b);
    let disc = d1 * d1 - ga * gb;
    if disc < 0.0 {
        return fallback;
    }
    let d2 = (b - a).signum() * disc.sqrt();
    let t = b - (b - a) * (gb + d2 - d1) / (gb - ga + 2.0 * d2);
    if t.is_finite() && t >= lo + margin && t <= hi - margin {
        t
    } else {
        fallback
    }
}

fn line_search<F>(
    search: &mut Search<'_, F>,
    p: &Point,
    d: &[f64],
    alpha0: f64,
    opts: &LbfgsOptions,
) -> Step
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let f0 = p.f;
    let dg0 = dot(&p.g, d);
    let armijo = |alpha: f64, f: f64| f <= f0 + opts.c1 * alpha * dg0;
    let curvature = |dg: f64| dg.abs() <= -opts.c2 * dg0;
    let mut budget = opts.max_line_search;

    // Bracketing phase.
    let (mut a_prev, mut f_prev, mut dg_prev) = (0.0, f0, dg0);
    let mut alpha = alpha0;
    let mut best_armijo: Option<(f64, Point)> = None;
    let (mut lo, mut hi);
    let mut first = true;
    loop {
        if budget == 0 {
            return Step::Exhausted(best_armijo.map(|b| b.1));
        }
        budget -= 1;
        let q = search.eval(trial(p, d, alpha));
        let dg = if q.f.is_finite() {
            dot(&q.g, d)
        } else {
            f64::NAN
        };
        if !q.f.is_finite() || !armijo(alpha, q.f) || (!first && q.f >= f_prev) {
            lo = (a_prev, f_prev, dg_prev);
            hi = (alpha, q.f, dg);
            break;
        }
        if curvature(dg) {
            return Step::Wolfe(q);
        }
        if best_armijo.as_ref().is_none_or(|b| q.f < b.1.f) {
            best_armijo = Some((alpha, q));
        }
        if dg >= 0.0 {
            lo = (alpha, best_armijo.as_ref().unwrap().1.f, dg);
            hi = (a_prev, f_prev, dg_prev);
            break;
        }
        a_prev = alpha;
        f_prev = best_armijo.as_ref().unwrap().1.f;
        dg_prev = dg;
        alpha *= 4.0;
        first = false;
    }

    // Zoom phase: `lo` satisfies sufficient decrease with the lowest value.
    loop {
        if budget == 0 || (hi.0 - lo.0).abs() <= 1e-16 * lo.0.abs().max(1e-16) {
            return Step::Exhausted(best_armijo.map(|b| b.1));
        }
        budget -= 1;
        let alpha = cubic_step(lo.0, lo.1, lo.2, hi.0, hi.1, hi.2);
        let q = search.eval(trial(p, d, alpha));
        let dg = if q.f.is_finite() {
            dot(&q.g, d)
        } else {
            f64::NAN
        };
        if !q.f.is_finite() || !armijo(alpha, q.f) || q.f >= lo.1 {
            hi = (alpha, q.f, dg);
            continue;
        }
        if curvature(dg) {
            return Step::Wolfe(q);
        }
        if dg * (hi.0 - lo.0) >= 0.0 {
            hi = lo;
        }
        lo = (alpha, q.f, dg);
        if best_armijo.as_ref().is_none_or(|b| q.f < b.1.f) {
            best_armijo = Some((alpha, q));
        }
    }
}

/// Minimizes `objective` from `x0`. The returned point is the lowest one
/// evaluated, so it is never worse than `x0`.
pub fn lbfgs_minimize<F>(
    objective: F,
    x0: Vec<f64>,
    opts: &LbfgsOptions,
) -> Result<(Vec<f64>, LbfgsStats), LbfgsError>
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    lbfgs_minimize_monitored(objective, x0, opts, |_| true)
}

/// An accepted iterate as seen by a monitor. Iteration 0 is the start.
#[derive(Debug, Clone, Copy)]
pub struct Iterate<'a> {
    pub iteration: usize,
    pub x: &'a [f64],
    pub f: f64,
    pub g: &'a [f64],
}

/// [`lbfgs_minimize`] that shows every accepted iterate to `monitor`, which
/// returns `false` to stop the run with [`LbfgsStop::Halted`].
pub fn lbfgs_minimize_monitored<F, M>(
    mut objective: F,
    x0: Vec<f64>,
    opts: &LbfgsOptions,
    mut monitor: M,
) -> Result<(Vec<f64>, LbfgsStats), LbfgsError>
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
    M: FnMut(Iterate<'_>) -> bool,
{
    let n = x0.len();
    let mut search = Search {
        objective: &mut objective,
        evaluations: 0,
        best: None,
    };
    let mut p = search.eval(x0);
    if p.g.len() != n {
        return Err(LbfgsError::GradientLength {
            expected: n,
            got: p.g.len(),
        });
    }
    if !p.f.is_finite() {
        return Err(LbfgsError::NonFiniteStart { value: p.f });
    }
    let initial_value = p.f;
    let mut history = vec![p.f];
    let mut mem: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(opts.memory);
    let mut iterations = 0;
    let mut line_search_failed = false;
    let mut stop = LbfgsStop::Halted;
    let mut watching = monitor(Iterate {
        iteration: 0,
        x: &p.x,
        f: p.f,
        g: &p.g,
    });
    while watching {
        if max_abs(&p.g) <= opts.grad_tol {
            stop = LbfgsStop::GradientTolerance;
            break;
        }
        if iterations >= opts.max_iters {
            stop = LbfgsStop::MaxIterations;
            break;
        }
        let mut d = direction(&p.g, &mem);
        if dot(&d, &p.g) >= 0.0 {
            mem.clear();
            d = p.g.iter().map(|v| -v).collect();
        }
        let alpha0 = if mem.is_empty() {
            (1.0 / dot(&d, &d).sqrt()).min(1.0)
        } else {
            1.0
        };
        let next = match line_search(&mut search, &p, &d, alpha0, opts) {
            Step::Wolfe(q) => q,
            Step::Exhausted(Some(q)) => q,
            Step::Exhausted(None) if !mem.is_empty() => {
                // Retry once along steepest descent before giving up.
                mem.clear();
                continue;
            }
            Step::Exhausted(None) => {
                line_search_failed = true;
                stop = LbfgsStop::LineSearchFailure;
                break;
            }
        };
        iterations += 1;
        let s: Vec<f64> = next.x.iter().zip(&p.x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = next.g.iter().zip(&p.g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        let yy = dot(&y, &y);
        if sy > f64::EPSILON * yy {
            if mem.len() == opts.memory {
                mem.pop_front();
            }
            mem.push_back((s, y, 1.0 / sy));
        }
        let decrease = (p.f - next.f) / p.f.abs().max(next.f.abs()).max(1.0);
        p = next;
        history.push(p.f);
        if decrease <= opts.ftol {
            stop = LbfgsStop::RelativeDecrease;
            break;
        }
        watching = monitor(Iterate {
            iteration: iterations,
            x: &p.x,
            f: p.f,
            g: &p.g,
        });
    }
    let evaluations = search.evaluations;
    let best = search.best.take().unwrap_or(p);
    let stats = LbfgsStats {
        iterations,
        evaluations,
        initial_value,
        final_value: best.f,
        grad_norm: max_abs(&best.g),
        stop,
        line_search_failed,
        history,
    };
    Ok((best.x, stats))
}

/// Two-loop recursion for `−H∇f` with `H₀ = (s·y / y·y) I`.
fn direction(g: &[f64], mem: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q: Vec<f64> = g.iter().map(|v| -v).collect();
    let mut alphas = Vec::with_capacity(mem.len());
    for (s, y, rho) in mem.iter().rev() {
        let a = rho * dot(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    if let Some((_, y, rho)) = mem.back() {
        let gamma = 1.0 / (rho * dot(y, y));
        q.iter_mut().for_each(|v| *v *= gamma);
    }
    for ((s, y, rho), a) in mem.iter().zip(alphas.iter().rev()) {
        let b = rho * dot(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (a - b) * si;
        }
    }
    q
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64]) -> (f64, Vec<f64>) {
        let (a, b) = (x[0], x[1]);
        let f = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
        let g = vec![
            -2.0 * (1.0 - a) - 400.0 * a * (b - a * a),
            200.0 * (b - a * a),
        ];
        (f, g)
    }

    #[test]
    fn quadratic_converges_quickly() {
        let target = vec![1.0, -2.0, 3.5, 0.25];
        let t = target.clone();
        let quad = move |x: &[f64]| {
            let g: Vec<f64> = x.iter().zip(&t).map(|(a, b)| a - b).collect();
            (0.5 * dot(&g, &g), g)
        };
        let (x, stats) = lbfgs_minimize(quad, vec![0.0; 4], &LbfgsOptions::default()).unwrap();
        assert!(stats.iterations <= 3, "{stats:?}");
        assert!(stats.grad_norm < 1e-9);
        assert!(x.iter().zip(&target).all(|(a, b)| (a - b).abs() < 1e-9));
    }

    #[test]
    fn rosenbrock_from_standard_start() {
        let (x, stats) =
            lbfgs_minimize(rosenbrock, vec![-1.2, 1.0], &LbfgsOptions::default()).unwrap();
        assert!(stats.final_value < 1e-12, "{stats:?}");
        assert!(stats.iterations <= 100);
        assert!((x[0] - 1.0).abs() < 1e-5 && (x[1] - 1.0).abs() < 1e-5);
        assert!(stats.history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn stationary_start_returns_immediately() {
        let f = |x: &[f64]| (x[0] * x[0], vec![2.0 * x[0]]);
        let (x, stats) = lbfgs_minimize(f, vec![0.0], &LbfgsOptions::default()).unwrap();
        assert_eq!(x, vec![0.0]);
        assert_eq!(stats.iterations, 0);
        assert_eq!(stats.evaluations, 1);
        assert_eq!(stats.stop, LbfgsStop::GradientTolerance);
    }

    #[test]
    fn monitor_sees_each_iterate_and_can_halt() {
        let mut seen = Vec::new();
        let (x, stats) = lbfgs_minimize_monitored(
            rosenbrock,
            vec![-1.2, 1.0],
            &LbfgsOptions::default(),
            |it| {
                seen.push((it.iteration, it.f));
                it.iteration < 5
            },
        )
        .unwrap();
        assert_eq!(stats.stop, LbfgsStop::Halted);
        assert_eq!(stats.iterations, 5);
        let iters: Vec<usize> = seen.iter().map(|s| s.0).collect();
        assert_eq!(iters, vec![0, 1, 2, 3, 4, 5]);
        let values: Vec<f64> = seen.iter().map(|s| s.1).collect();
        assert_eq!(values, stats.history);
        assert_eq!(rosenbrock(&x).0, stats.final_value);
    }

    #[test]
    fn nan_start_is_an_error() {
        let f = |_: &[f64]| (f64::NAN, vec![0.0]);
        assert!(matches!(
            lbfgs_minimize(f, vec![1.0], &LbfgsOptions::default()),
            Err(LbfgsError::NonFiniteStart { .. })
        ));
    }

    #[test]
    fn overflow_region_is_backed_away_from() {
        // exp grows fast; early huge steps produce inf and must be rejected.
        let f = |x: &[f64]| {
            let e = (3.0 * x[0]).exp();
            (
                e + x[0] * x[0] - 10.0 * x[0],
                vec![3.0 * e + 2.0 * x[0] - 10.0],
            )
        };
        let (x, stats) = lbfgs_minimize(f, vec![-50.0], &LbfgsOptions::default()).unwrap();
        assert!(stats.final_value.is_finite());
        assert!(stats.grad_norm < 1e-6, "{stats:?} {x:?}");
    }

    #[test]
    fn max_iterations_respected() {
        let opts = LbfgsOptions {
            max_iters: 3,
            ..LbfgsOptions::default()
        };
        let (_, stats) = lbfgs_minimize(rosenbrock, vec![-1.2, 1.0], &opts).unwrap();
        assert_eq!(stats.iterations, 3);
        assert_eq!(stats.stop, LbfgsStop::MaxIterations);
    }
}
