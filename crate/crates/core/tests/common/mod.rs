//! Oracles shared by the integration tests and the acceptance suite.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use splitritz::fields::Expr;
use splitritz::net::{
    init_mlp, loss, loss_and_grad, mlp_forward_grad, InteriorTerms, MlpParams, RitzData,
};
use splitritz::problem::{builtin_example, BcKind, EllipticProblem};
use splitritz::singular::Segment;

// Singular potentials.

pub fn random_point(rng: &mut ChaCha8Rng, d: usize, scale: f64) -> Vec<f64> {
    (0..d).map(|_| rng.gen_range(-scale..scale)).collect()
}

/// Random segment and a point at distance >= 0.05 from it.
pub fn random_pair(rng: &mut ChaCha8Rng, d: usize) -> (Segment, Vec<f64>) {
    loop {
        let a = random_point(rng, d, 1.0);
        let b = random_point(rng, d, 1.0);
        let Ok(seg) = Segment::new(a, b) else {
            continue;
        };
        if seg.length() < 0.05 {
            continue;
        }
        let x = random_point(rng, d, 1.5);
        if seg.distance(&x) >= 0.05 {
            return (seg, x);
        }
    }
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

// Manufactured solutions.

/// Points used for finite differences stay this far from every support so
/// the stencil never straddles a singularity.
pub const FD_CLEARANCE: f64 = 0.05;
pub const FD_STEP: f64 = 1e-3;

pub fn interior_points(p: &EllipticProblem, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dom = p.domain();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let x: Vec<f64> = (0..dom.dim())
            .map(|i| {
                let lo = dom.lower()[i] + FD_STEP;
                let hi = dom.upper()[i] - FD_STEP;
                rng.gen_range(lo..hi)
            })
            .collect();
        if p.support_distance(&x) >= FD_CLEARANCE {
            out.push(x);
        }
    }
    out
}

pub fn boundary_points(p: &EllipticProblem, n: usize, seed: u64) -> Vec<(Vec<f64>, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dom = p.domain();
    let d = dom.dim();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let axis = rng.gen_range(0..d);
        let upper = rng.gen_bool(0.5);
        let mut y: Vec<f64> = (0..d)
            .map(|i| rng.gen_range(dom.lower()[i]..dom.upper()[i]))
            .collect();
        y[axis] = if upper {
            dom.upper()[axis]
        } else {
            dom.lower()[axis]
        };
        let mut normal = vec![0.0; d];
        normal[axis] = if upper { 1.0 } else { -1.0 };
        if p.boundary_override().is_some() || p.support_distance(&y) >= 1e-3 {
            out.push((y, normal));
        }
    }
    out
}

/// Conservative second-order stencil for `-∇·(κ∇v)`.
pub fn fd_divergence(kappa: &Expr, v: &Expr, x: &[f64]) -> f64 {
    let h = FD_STEP;
    let v0 = v.eval(x).unwrap();
    let mut acc = 0.0;
    let mut y = x.to_vec();
    for i in 0..x.len() {
        y[i] = x[i] + h;
        let vp = v.eval(&y).unwrap();
        y[i] = x[i] - h;
        let vm = v.eval(&y).unwrap();
        y[i] = x[i] + 0.5 * h;
        let kp = kappa.eval(&y).unwrap();
        y[i] = x[i] - 0.5 * h;
        let km = kappa.eval(&y).unwrap();
        y[i] = x[i];
        acc += kp * (vp - v0) - km * (v0 - vm);
    }
    -acc / (h * h)
}

pub fn normal_flux(kappa: &Expr, v: &Expr, y: &[f64], normal: &[f64]) -> f64 {
    // The normal is ±e_axis, so a one-axis analytic derivative suffices.
    let axis = normal.iter().position(|n| *n != 0.0).unwrap();
    kappa.eval(y).unwrap() * v.diff(axis).eval(y).unwrap() * normal[axis]
}

/// Worst relative mismatch of the modified source against an FD divergence
/// of `v*` over `count` interior points.
pub fn worst_source_mismatch(n: usize, count: usize, seed: u64) -> f64 {
    let p = builtin_example(n).unwrap();
    let v = p.reference_regular().unwrap();
    let mut worst = 0.0f64;
    for x in interior_points(&p, count, seed) {
        let f = p.modified_source(&x).unwrap();
        let fd = fd_divergence(p.kappa(), v, &x);
        worst = worst.max((f - fd).abs() / f.abs().max(1.0));
    }
    worst
}

/// Worst relative mismatch of the modified boundary data against the trace
/// (Dirichlet) or conormal flux (Neumann) of `v*`.
pub fn worst_trace_mismatch(n: usize, count: usize, seed: u64) -> f64 {
    let p = builtin_example(n).unwrap();
    let v = p.reference_regular().unwrap();
    let mut worst = 0.0f64;
    for (y, normal) in boundary_points(&p, count, seed) {
        let got = p.modified_boundary(&y, &normal).unwrap();
        let want = match p.bc_kind() {
            BcKind::Dirichlet => v.eval(&y).unwrap(),
            BcKind::Neumann => normal_flux(p.kappa(), v, &y, &normal),
        };
        worst = worst.max((got - want).abs() / want.abs().max(1.0));
    }
    worst
}

// Network gradients.

pub fn random_points(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Vec<f64> {
    (0..n * d).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// Random parameters with nonzero biases so every code path is exercised.
pub fn random_params(rng: &mut ChaCha8Rng, dims: &[usize]) -> MlpParams {
    let base = init_mlp(dims, rng.gen()).unwrap();
    let theta = base
        .theta()
        .iter()
        .map(|w| w + rng.gen_range(-0.3..0.3))
        .collect();
    base.with_theta(theta).unwrap()
}

pub fn random_data(
    rng: &mut ChaCha8Rng,
    d: usize,
    n_r: usize,
    n_b: usize,
    neumann: bool,
) -> RitzData {
    let interior = InteriorTerms {
        points: random_points(rng, n_r, d),
        kappa: (0..n_r).map(|_| rng.gen_range(0.5..2.0)).collect(),
        source: (0..n_r).map(|_| rng.gen_range(-3.0..3.0)).collect(),
        weight: 4.0 / n_r as f64,
    };
    let bpts = random_points(rng, n_b, d);
    let target: Vec<f64> = (0..n_b).map(|_| rng.gen_range(-1.0..1.0)).collect();
    if neumann {
        let anchor: Vec<f64> = random_points(rng, 1, d);
        RitzData::neumann(d, interior, &bpts, &target, 8.0, (&anchor, 0.3)).unwrap()
    } else {
        RitzData::dirichlet(d, interior, &bpts, &target, 8.0).unwrap()
    }
}

pub fn check_param_gradient(p: &MlpParams, data: &RitzData, sigma: f64) -> f64 {
    let (_, g) = loss_and_grad(p, data, sigma).unwrap();
    let h = 1e-6;
    let scale = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut worst = 0.0f64;
    for j in 0..p.len() {
        let mut tp = p.theta().to_vec();
        let mut tm = p.theta().to_vec();
        tp[j] += h;
        tm[j] -= h;
        let lp = loss(&p.with_theta(tp).unwrap(), data, sigma).unwrap();
        let lm = loss(&p.with_theta(tm).unwrap(), data, sigma).unwrap();
        let fd = (lp - lm) / (2.0 * h);
        worst = worst.max((g[j] - fd).abs() / scale);
    }
    worst
}

/// Worst spatial-gradient error against central differences of the scalar
/// evaluator, relative to the largest gradient component at each point.
pub fn spatial_gradient_error(rng: &mut ChaCha8Rng, cfg: usize) -> f64 {
    let h = 1e-5;
    let d = 1 + cfg % 4;
    let dims = vec![d, 3 + cfg % 5, 4, 1];
    let p = random_params(rng, &dims);
    let x = random_points(rng, 8, d);
    let (_, grads) = mlp_forward_grad(&p, &x).unwrap();
    let mut worst = 0.0f64;
    for i in 0..8 {
        let xi = &x[i * d..(i + 1) * d];
        let scale = grads[i * d..(i + 1) * d]
            .iter()
            .fold(1e-3f64, |m, g| m.max(g.abs()));
        for k in 0..d {
            let mut xp = xi.to_vec();
            let mut xm = xi.to_vec();
            xp[k] += h;
            xm[k] -= h;
            let fd = (p.eval(&xp).unwrap() - p.eval(&xm).unwrap()) / (2.0 * h);
            worst = worst.max((grads[i * d + k] - fd).abs() / scale);
        }
    }
    worst
}
