//! Closed-form singular potentials.
//!
//! * [`phi`]: fundamental solution of `-Δ` in `R^d`, `d >= 2`.
//! * [`line_potential`]: the fundamental solution convolved with the unit
//!   line measure on a segment, `d >= 3`.
//! * [`mollified_delta`]: the compactly supported polynomial bump
//!   `δ_H(z) = 12/(π H^d) (5(|z|/H)^2 - 8|z|/H + 3)` for `|z| <= H`.
//!
//! The segment integral `∫_s^{s+L} (t^2 + α^2)^{-m/2} dt` is evaluated with
//! the substitution `t = α tan θ`, which turns it into `α^{1-m} ∫ cos^{m-2}θ dθ`
//! and then into finite trigonometric sums. When the evaluation point sits
//! beyond an end of the segment and close to its supporting line, those sums
//! cancel catastrophically, so a binomial series in `(α/t)^2` is used instead.

use std::f64::consts::PI;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SingularError {
    #[error("evaluation point coincides with the singular support")]
    OnSupport,
    #[error("degenerate segment: endpoints coincide")]
    DegenerateSegment,
    #[error("dimension {0} not supported here")]
    Dimension(usize),
}

/// Volume of the unit ball in `R^d`, `π^{d/2} / Γ(d/2 + 1)`.
pub fn unit_ball_volume(d: usize) -> f64 {
    assert!(d >= 1);
    // Γ(d/2 + 1) by the integer / half-integer recursion.
    let gamma = if d.is_multiple_of(2) {
        (1..=d / 2).map(|k| k as f64).product::<f64>()
    } else {
        let mut g = PI.sqrt();
        let mut x = 0.5;
        while x < d as f64 / 2.0 + 0.5 {
            g *= x;
            x += 1.0;
        }
        g
    };
    PI.powf(d as f64 / 2.0) / gamma
}

/// Normalisation `d (d-2) α(d)` of the `d >= 3` kernel.
fn kernel_constant(d: usize) -> f64 {
    (d * (d - 2)) as f64 * unit_ball_volume(d)
}

fn norm(z: &[f64]) -> f64 {
    z.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Fundamental solution `Φ(z)`.
pub fn phi(d: usize, z: &[f64]) -> Result<f64, SingularError> {
    debug_assert_eq!(z.len(), d);
    if d < 2 {
        return Err(SingularError::Dimension(d));
    }
    let r = norm(z);
    if r == 0.0 {
        return Err(SingularError::OnSupport);
    }
    Ok(if d == 2 {
        -r.ln() / (2.0 * PI)
    } else {
        1.0 / (kernel_constant(d) * r.powi(d as i32 - 2))
    })
}

/// Gradient of [`phi`], written into `out`.
pub fn grad_phi_into(d: usize, z: &[f64], out: &mut [f64]) -> Result<(), SingularError> {
    if d < 2 {
        return Err(SingularError::Dimension(d));
    }
    let r = norm(z);
    if r == 0.0 {
        return Err(SingularError::OnSupport);
    }
    let scale = if d == 2 {
        -1.0 / (2.0 * PI * r * r)
    } else {
        -1.0 / (d as f64 * unit_ball_volume(d) * r.powi(d as i32))
    };
    for (o, zi) in out.iter_mut().zip(z) {
        *o = scale * zi;
    }
    Ok(())
}

pub fn grad_phi(d: usize, z: &[f64]) -> Result<Vec<f64>, SingularError> {
    let mut out = vec![0.0; z.len()];
    grad_phi_into(d, z, &mut out)?;
    Ok(out)
}

/// Line segment from `a` to `b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    a: Vec<f64>,
    b: Vec<f64>,
    length: f64,
    tangent: Vec<f64>,
}

impl Segment {
    pub fn new(a: Vec<f64>, b: Vec<f64>) -> Result<Segment, SingularError> {
        assert_eq!(a.len(), b.len(), "segment endpoints differ in dimension");
        let diff: Vec<f64> = b.iter().zip(&a).map(|(bi, ai)| bi - ai).collect();
        let length = norm(&diff);
        if !(length > 0.0) {
            return Err(SingularError::DegenerateSegment);
        }
        let tangent = diff.iter().map(|v| v / length).collect();
        Ok(Segment {
            a,
            b,
            length,
            tangent,
        })
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn tangent(&self) -> &[f64] {
        &self.tangent
    }

    pub fn dim(&self) -> usize {
        self.a.len()
    }

    pub fn translated(&self, shift: &[f64]) -> Segment {
        let a = self.a.iter().zip(shift).map(|(p, c)| p + c).collect();
        let b = self.b.iter().zip(shift).map(|(p, c)| p + c).collect();
        Segment::new(a, b).expect("translation preserves length")
    }

    /// Euclidean distance from `x` to the closed segment.
    pub fn distance(&self, x: &[f64]) -> f64 {
        let g = self.geometry(x);
        let t = (-g.s).clamp(0.0, self.length);
        if t == 0.0 {
            g.r_a
        } else if t == self.length {
            g.r_b
        } else {
            g.alpha
        }
    }

    fn geometry(&self, x: &[f64]) -> SegmentGeometry {
        let d = self.dim();
        let mut rel = vec![0.0; d];
        for i in 0..d {
            rel[i] = x[i] - self.a[i];
        }
        let along = dot(&rel, &self.tangent);
        let mut perp = rel.clone();
        for i in 0..d {
            perp[i] -= along * self.tangent[i];
        }
        let alpha = norm(&perp);
        let r_a = norm(&rel);
        let r_b = x
            .iter()
            .zip(&self.b)
            .map(|(xi, bi)| (xi - bi) * (xi - bi))
            .sum::<f64>()
            .sqrt();
        SegmentGeometry {
            s: -along,
            alpha,
            perp,
            r_a,
            r_b,
        }
    }
}

/// Quantities describing `x` relative to a segment. The integration variable
/// runs over `[s, s + L]` with `s = τ·(a - x)`, and `α` is the distance to the
/// supporting line.
struct SegmentGeometry {
    s: f64,
    alpha: f64,
    perp: Vec<f64>,
    r_a: f64,
    r_b: f64,
}

impl SegmentGeometry {
    fn on_segment(&self, length: f64) -> bool {
        self.alpha == 0.0 && self.s <= 0.0 && self.s + length >= 0.0
    }
}

/// Compensated summation.
#[derive(Default)]
struct Kahan {
    sum: f64,
    c: f64,
}

impl Kahan {
    fn add(&mut self, v: f64) {
        let y = v - self.c;
        let t = self.sum + y;
        self.c = (t - self.sum) - y;
        self.sum = t;
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    let mut r = 1.0;
    for i in 0..k {
        r = r * (n - i) as f64 / (i + 1) as f64;
    }
    r
}

/// `∫_{θ0}^{θ1} cos^n θ dθ` via the power-reduction sums.
fn cos_power_integral(n: usize, theta0: f64, theta1: f64) -> f64 {
    let mut acc = Kahan::default();
    if n.is_multiple_of(2) {
        let q = n / 2;
        let scale = 1.0 / 2f64.powi(n as i32 - 1);
        for k in 0..q {
            let j = (n - 2 * k) as f64;
            acc.add(scale * binomial(n, k) * ((j * theta1).sin() - (j * theta0).sin()) / j);
        }
        acc.add(binomial(n, q) / 2f64.powi(n as i32) * (theta1 - theta0));
    } else {
        let q = (n - 1) / 2;
        let scale = 1.0 / 2f64.powi(n as i32 - 1);
        for k in 0..=q {
            let j = (n - 2 * k) as f64;
            acc.add(scale * binomial(n, k) * ((j * theta1).sin() - (j * theta0).sin()) / j);
        }
    }
    acc.sum
}

/// `∫_{u0}^{u1} (u^2 + α^2)^{-m/2} du` for `0 < u0 < u1` and `α` small
/// relative to `u0`, by expanding `(1 + α²/u²)^{-m/2}` binomially.
fn far_field_series(m: usize, u0: f64, u1: f64, alpha: f64) -> f64 {
    debug_assert!(m >= 2);
    let a2 = alpha * alpha;
    let half = m as f64 / 2.0;
    let mut coeff = 1.0;
    let mut a_pow = 1.0;
    let mut acc = Kahan::default();
    for j in 0..400 {
        let p = 1.0 - m as f64 - 2.0 * j as f64;
        let term = coeff * a_pow * (u1.powf(p) - u0.powf(p)) / p;
        acc.add(term);
        if term.abs() <= 1e-18 * acc.sum.abs() {
            break;
        }
        coeff *= (-half - j as f64) / (j as f64 + 1.0);
        a_pow *= a2;
    }
    acc.sum
}

/// `J_m = ∫_{t0}^{t0+L} (t^2 + α^2)^{-m/2} dt`; `r0`, `r1` are the distances
/// `sqrt(t^2 + α^2)` at the two ends.
fn segment_integral(m: usize, g: &SegmentGeometry, length: f64) -> f64 {
    let t0 = g.s;
    let t1 = g.s + length;
    let alpha = g.alpha;
    if m == 1 {
        // ln((t1 + r1) / (t0 + r0)), rearranged so no sum cancels.
        let (r0, r1) = (g.r_a, g.r_b);
        return if t0 >= 0.0 {
            ((t1 + r1) / (t0 + r0)).ln()
        } else if t1 <= 0.0 {
            ((r0 - t0) / (r1 - t1)).ln()
        } else {
            ((t1 + r1) * (r0 - t0) / (alpha * alpha)).ln()
        };
    }
    let outside = t0 > 0.0 || t1 < 0.0;
    if outside {
        let (u0, u1) = if t0 > 0.0 { (t0, t1) } else { (-t1, -t0) };
        if alpha < 0.5 * u0 {
            return far_field_series(m, u0, u1, alpha);
        }
    }
    if m == 2 {
        // θ1 - θ0 without subtracting two nearly equal angles.
        return (alpha * length).atan2(alpha * alpha + t0 * t1) / alpha;
    }
    let theta0 = t0.atan2(alpha);
    let theta1 = t1.atan2(alpha);
    alpha.powi(1 - m as i32) * cos_power_integral(m - 2, theta0, theta1)
}

/// Potential of a unit line density on `seg`, evaluated at `x`:
/// `Φ_L(x) = ∫_0^L Φ(x - a - τt) dt`.
pub fn line_potential(d: usize, seg: &Segment, x: &[f64]) -> Result<f64, SingularError> {
    if d < 3 {
        return Err(SingularError::Dimension(d));
    }
    debug_assert_eq!(seg.dim(), d);
    let g = seg.geometry(x);
    if g.on_segment(seg.length) {
        return Err(SingularError::OnSupport);
    }
    Ok(segment_integral(d - 2, &g, seg.length) / kernel_constant(d))
}

/// Analytic gradient of [`line_potential`].
///
/// The tangential part is `Φ(x-a) - Φ(x-b)`; the normal part is
/// `(2-d) J_d p / (d(d-2)α(d))` with `p` the offset from the supporting line.
pub fn grad_line_potential_into(
    d: usize,
    seg: &Segment,
    x: &[f64],
    out: &mut [f64],
) -> Result<(), SingularError> {
    if d < 3 {
        return Err(SingularError::Dimension(d));
    }
    let g = seg.geometry(x);
    if g.on_segment(seg.length) {
        return Err(SingularError::OnSupport);
    }
    let c = kernel_constant(d);
    let exponent = 2 - d as i32;
    let along = (g.r_a.powi(exponent) - g.r_b.powi(exponent)) / c;
    let normal = if g.alpha > 0.0 {
        (2.0 - d as f64) * segment_integral(d, &g, seg.length) / c
    } else {
        0.0
    };
    for i in 0..d {
        out[i] = along * seg.tangent[i] + normal * g.perp[i];
    }
    Ok(())
}

pub fn grad_line_potential(d: usize, seg: &Segment, x: &[f64]) -> Result<Vec<f64>, SingularError> {
    let mut out = vec![0.0; d];
    grad_line_potential_into(d, seg, x, &mut out)?;
    Ok(out)
}

const GAUSS5_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683_1,
    0.0,
    0.538_469_310_105_683_1,
    0.906_179_845_938_664,
];
const GAUSS5_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189_08,
    0.478_628_670_499_366_47,
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_47,
    0.236_926_885_056_189_08,
];

/// Composite 5-point Gauss–Legendre rule over `[0, L]` with `n` panels,
/// applied to `t -> f(a + τ t)`.
pub fn gauss_legendre_along<F>(seg: &Segment, n: usize, mut f: F) -> Result<f64, SingularError>
where
    F: FnMut(&[f64]) -> Result<f64, SingularError>,
{
    assert!(n >= 1);
    let h = seg.length / n as f64;
    let mut y = vec![0.0; seg.dim()];
    let mut acc = Kahan::default();
    for panel in 0..n {
        let mid = (panel as f64 + 0.5) * h;
        for (node, w) in GAUSS5_NODES.iter().zip(GAUSS5_WEIGHTS) {
            let t = mid + 0.5 * h * node;
            for i in 0..y.len() {
                y[i] = seg.a[i] + seg.tangent[i] * t;
            }
            acc.add(0.5 * h * w * f(&y)?);
        }
    }
    Ok(acc.sum)
}

/// Brute-force evaluation of the line potential by quadrature of `Φ` along
/// the segment.
pub fn quadrature_line_potential(
    d: usize,
    seg: &Segment,
    x: &[f64],
    n: usize,
) -> Result<f64, SingularError> {
    if d < 3 {
        return Err(SingularError::Dimension(d));
    }
    if seg.distance(x) == 0.0 {
        return Err(SingularError::OnSupport);
    }
    let mut z = vec![0.0; d];
    gauss_legendre_along(seg, n, |y| {
        for i in 0..d {
            z[i] = x[i] - y[i];
        }
        phi(d, &z)
    })
}

/// Polynomial bump approximation of the point mass with radius `h`.
///
/// Its integral over `R^d` is not one: the radial integral gives total mass
/// 2 for `d = 2` and 0 for `d = 3`. Use it only where the formula itself is
/// wanted.
pub fn mollified_delta(d: usize, h: f64, z: &[f64]) -> f64 {
    assert!(h > 0.0);
    let rho = norm(z) / h;
    if rho > 1.0 {
        return 0.0;
    }
    12.0 / (PI * h.powi(d as i32)) * (5.0 * rho * rho - 8.0 * rho + 3.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1e-300)
    }

    #[test]
    fn ball_volumes() {
        assert!(close(unit_ball_volume(1), 2.0, 1e-15));
        assert!(close(unit_ball_volume(2), PI, 1e-15));
        assert!(close(unit_ball_volume(3), 4.0 * PI / 3.0, 1e-15));
        assert!(close(unit_ball_volume(4), PI * PI / 2.0, 1e-15));
        assert!(close(unit_ball_volume(5), 8.0 * PI * PI / 15.0, 1e-15));
    }

    #[test]
    fn phi_values() {
        assert_eq!(phi(2, &[1.0, 0.0]).unwrap(), 0.0);
        assert!(close(
            phi(3, &[0.5, 0.0, 0.0]).unwrap(),
            0.159_154_943_091_895_35,
            1e-14
        ));
        assert!(close(
            phi(4, &[0.0, 1.0, 0.0, 0.0]).unwrap(),
            1.0 / (4.0 * PI * PI),
            1e-14
        ));
        assert_eq!(phi(3, &[0.0; 3]), Err(SingularError::OnSupport));
    }

    #[test]
    fn grad_phi_values() {
        let g = grad_phi(3, &[1.0, 0.0, 0.0]).unwrap();
        assert!(close(g[0], -1.0 / (4.0 * PI), 1e-14));
        assert_eq!(&g[1..], &[0.0, 0.0]);
        let g = grad_phi(2, &[0.0, 1.0]).unwrap();
        assert_eq!(g[0], 0.0);
        assert!(close(g[1], -1.0 / (2.0 * PI), 1e-14));
        assert!(grad_phi(2, &[0.0, 0.0]).is_err());
    }

    #[test]
    fn line_potential_3d_reference() {
        let seg = Segment::new(vec![0.0, 0.0, 0.2], vec![0.0, 0.0, 0.8]).unwrap();
        let x = [1.0, 0.0, 0.0];
        let v = line_potential(3, &seg, &x).unwrap();
        // Direct transcription of the log formula.
        let r_a: f64 = (1.0f64 + 0.04).sqrt();
        let r_b: f64 = (1.0f64 + 0.64).sqrt();
        let s = 0.2;
        let direct = ((r_b + 0.6 + s) / (r_a + s)).ln() / (4.0 * PI);
        assert!(close(v, direct, 1e-14));
        assert!((v - 0.042_492_630_695).abs() < 1e-11);
    }

    #[test]
    fn line_potential_rejects_points_on_segment() {
        let seg = Segment::new(vec![0.0, 0.0, 0.0], vec![0.0, 0.0, 1.0]).unwrap();
        assert_eq!(
            line_potential(3, &seg, &[0.0, 0.0, 0.5]),
            Err(SingularError::OnSupport)
        );
        assert_eq!(
            line_potential(3, &seg, &[0.0, 0.0, 1.0]),
            Err(SingularError::OnSupport)
        );
        assert!(line_potential(3, &seg, &[0.0, 0.0, 1.5]).is_ok());
        assert!(Segment::new(vec![1.0, 1.0], vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn collinear_points_use_limit() {
        // Beyond the end, on the supporting line: ∫ t^{2-d} dt in closed form.
        for d in 3..=7usize {
            let seg = Segment::new(vec![0.0; d], {
                let mut b = vec![0.0; d];
                b[0] = 1.0;
                b
            })
            .unwrap();
            let mut x = vec![0.0; d];
            x[0] = 3.0;
            let v = line_potential(d, &seg, &x).unwrap();
            let exact = if d == 3 {
                (3.0f64 / 2.0).ln()
            } else {
                let p = 3.0 - d as f64;
                (3.0f64.powf(p) - 2.0f64.powf(p)) / p
            } / kernel_constant(d);
            assert!(close(v, exact, 1e-13), "d={d}: {v} vs {exact}");
        }
    }

    #[test]
    fn cos_power_matches_low_orders() {
        let (a, b) = (-0.3, 1.1);
        assert!(close(cos_power_integral(0, a, b), b - a, 1e-15));
        assert!(close(cos_power_integral(1, a, b), b.sin() - a.sin(), 1e-15));
        let c2 = |t: f64| t / 2.0 + (2.0 * t).sin() / 4.0;
        assert!(close(cos_power_integral(2, a, b), c2(b) - c2(a), 1e-14));
        let c3 = |t: f64| t.sin() - t.sin().powi(3) / 3.0;
        assert!(close(cos_power_integral(3, a, b), c3(b) - c3(a), 1e-14));
    }

    #[test]
    fn mollifier_values() {
        assert_eq!(mollified_delta(2, 0.5, &[0.5, 0.0]), 0.0);
        assert_eq!(mollified_delta(2, 0.5, &[0.6, 0.0]), 0.0);
        assert!(close(
            mollified_delta(2, 1.0, &[0.0, 0.0]),
            36.0 / PI,
            1e-15
        ));
        assert!(close(mollified_delta(2, 1.0, &[0.0, 0.0]), 11.459_16, 1e-6));
    }

    #[test]
    fn mollifier_mass_is_not_one() {
        // Radial quadrature: ∫ δ_H = |S^{d-1}| ∫_0^H δ_H(r) r^{d-1} dr.
        let h = 0.3;
        let mass = |d: usize, surface: f64| {
            let n = 20_000;
            let dr = h / n as f64;
            (0..n)
                .map(|k| {
                    let r = (k as f64 + 0.5) * dr;
                    let mut z = vec![0.0; d];
                    z[0] = r;
                    mollified_delta(d, h, &z) * r.powi(d as i32 - 1) * dr
                })
                .sum::<f64>()
                * surface
        };
        assert!((mass(2, 2.0 * PI) - 2.0).abs() < 1e-6);
        assert!(mass(3, 4.0 * PI).abs() < 1e-6);
    }
}
