//! Problem definition and the singularity-splitting transformation.
//!
//! For `-∇·(κ∇u) = Σ_i f_i δ_i + g` the solution is written `u = w + v` with
//! the analytic singular field `w = κ⁻¹ Σ_i f_i Φ_i`, where `Φ_i` is the point,
//! segment or subspace potential of singularity `i`. The regular part `v`
//! solves `-∇·(κ∇v) = F` with
//!
//! ```text
//! F = g + Σ_i [ Δf Φ + 2∇f·∇Φ − κ⁻¹(Δκ fΦ + f∇κ·∇Φ + Φ∇κ·∇f) + κ⁻²|∇κ|² fΦ ]
//! ```
//!
//! and modified boundary data `h̃ = h − w` (Dirichlet) or `h̃ = h − κ ∂ₙw`
//! (Neumann).

mod examples;

pub use examples::{builtin_example, example_settings, ExampleSettings, EXAMPLE_COUNT};

use thiserror::Error;

use crate::fields::{DiffField, Expr, ExprError};
use crate::singular::{self, Segment, SingularError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProblemError {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Singular(#[from] SingularError),
    #[error("invalid problem: {0}")]
    Invalid(String),
    #[error("coefficient {value} at {at:?} is below the ellipticity floor {floor}")]
    Ellipticity {
        at: Vec<f64>,
        value: f64,
        floor: f64,
    },
    #[error("problem has no {0} reference")]
    MissingReference(&'static str),
    #[error("no built-in example {0}; valid indices are 1..=6")]
    UnknownExample(usize),
}

/// Axis-aligned box `Π (lowerᵢ, upperᵢ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxDomain {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<BoxDomain, ProblemError> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(ProblemError::Invalid(
                "box bounds must have equal, nonzero length".into(),
            ));
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l < u)) {
            return Err(ProblemError::Invalid(
                "box requires lower < upper on every axis".into(),
            ));
        }
        Ok(BoxDomain { lower, upper })
    }

    pub fn cube(dim: usize, lo: f64, hi: f64) -> BoxDomain {
        BoxDomain::new(vec![lo; dim], vec![hi; dim]).expect("valid cube")
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn width(&self, axis: usize) -> f64 {
        self.upper[axis] - self.lower[axis]
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim()).map(|i| self.width(i)).product()
    }

    /// Measure of one of the two faces orthogonal to `axis`.
    pub fn face_measure(&self, axis: usize) -> f64 {
        (0..self.dim())
            .filter(|&i| i != axis)
            .map(|i| self.width(i))
            .product()
    }

    pub fn boundary_measure(&self) -> f64 {
        (0..self.dim()).map(|i| 2.0 * self.face_measure(i)).sum()
    }

    pub fn contains_closed(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (l, u))| *l <= *v && *v <= *u)
    }
}

/// Geometric support of a singular source.
#[derive(Debug, Clone, PartialEq)]
pub enum Support {
    Point(Vec<f64>),
    Segment(Segment),
    /// Axis-aligned affine subspace `{x : x[coords] = anchor}` of codimension
    /// `coords.len()`; its potential is the `k`-dimensional fundamental solution
    /// of the projected offset.
    Subspace {
        coords: Vec<usize>,
        anchor: Vec<f64>,
    },
}

impl Support {
    pub fn distance(&self, x: &[f64]) -> f64 {
        match self {
            Support::Point(p) => dist(x, p),
            Support::Segment(seg) => seg.distance(x),
            Support::Subspace { coords, anchor } => coords
                .iter()
                .zip(anchor)
                .map(|(&c, a)| (x[c] - a) * (x[c] - a))
                .sum::<f64>()
                .sqrt(),
        }
    }

    /// Potential value; its gradient is written to `grad`.
    pub fn potential(&self, x: &[f64], grad: &mut [f64]) -> Result<f64, SingularError> {
        let d = x.len();
        match self {
            Support::Point(p) => {
                let z: Vec<f64> = x.iter().zip(p).map(|(a, b)| a - b).collect();
                singular::grad_phi_into(d, &z, grad)?;
                singular::phi(d, &z)
            }
            Support::Segment(seg) => {
                singular::grad_line_potential_into(d, seg, x, grad)?;
                singular::line_potential(d, seg, x)
            }
            Support::Subspace { coords, anchor } => {
                let k = coords.len();
                let z: Vec<f64> = coords.iter().zip(anchor).map(|(&c, a)| x[c] - a).collect();
                let mut gz = vec![0.0; k];
                singular::grad_phi_into(k, &z, &mut gz)?;
                grad.iter_mut().for_each(|g| *g = 0.0);
                for (&c, g) in coords.iter().zip(&gz) {
                    grad[c] = *g;
                }
                singular::phi(k, &z)
            }
        }
    }

    fn validate(&self, domain: &BoxDomain) -> Result<(), ProblemError> {
        let d = domain.dim();
        match self {
            Support::Point(p) => {
                if !domain.contains_closed(p) {
                    return Err(ProblemError::Invalid(format!(
                        "point source {p:?} outside domain"
                    )));
                }
                if d < 2 {
                    return Err(ProblemError::Invalid("point sources need d >= 2".into()));
                }
            }
            Support::Segment(seg) => {
                if seg.dim() != d || d < 3 {
                    return Err(ProblemError::Invalid(
                        "segment sources need matching dimension d >= 3".into(),
                    ));
                }
                // The box is convex, so checking the endpoints suffices.
                if !domain.contains_closed(seg.a()) || !domain.contains_closed(seg.b()) {
                    return Err(ProblemError::Invalid("segment leaves the domain".into()));
                }
            }
            Support::Subspace { coords, anchor } => {
                if !(2..=3).contains(&coords.len()) || coords.len() != anchor.len() {
                    return Err(ProblemError::Invalid(
                        "subspace sources take 2 or 3 coordinates with a matching anchor".into(),
                    ));
                }
                let mut seen = coords.clone();
                seen.sort_unstable();
                seen.dedup();
                if seen.len() != coords.len() || seen.iter().any(|&c| c >= d) {
                    return Err(ProblemError::Invalid("bad subspace coordinate list".into()));
                }
                for (&c, a) in coords.iter().zip(anchor) {
                    if *a < domain.lower()[c] || *a > domain.upper()[c] {
                        return Err(ProblemError::Invalid(
                            "subspace anchor outside domain".into(),
                        ));
                    }
                }
            }
        }
        Ok(())
    }
}

/// A singular source: support plus strength (points, subspaces) or density
/// (segments) field.
#[derive(Debug, Clone)]
pub struct Singularity {
    pub support: Support,
    strength: DiffField,
}

impl Singularity {
    pub fn new(support: Support, strength: Expr) -> Singularity {
        Singularity {
            support,
            strength: DiffField::new(strength),
        }
    }

    pub fn point(at: Vec<f64>, strength: Expr) -> Singularity {
        Singularity::new(Support::Point(at), strength)
    }

    pub fn segment(seg: Segment, density: Expr) -> Singularity {
        Singularity::new(Support::Segment(seg), density)
    }

    pub fn subspace(coords: Vec<usize>, anchor: Vec<f64>, strength: Expr) -> Singularity {
        Singularity::new(Support::Subspace { coords, anchor }, strength)
    }

    pub fn strength(&self) -> &Expr {
        &self.strength.value
    }
}

#[derive(Debug, Clone)]
pub enum BoundaryCondition {
    Dirichlet {
        h: Expr,
    },
    /// `κ ∂ₙu = h`, made unique by `u(anchor_point) = anchor_value`.
    Neumann {
        h: Expr,
        anchor_point: Vec<f64>,
        anchor_value: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BcKind {
    Dirichlet,
    Neumann,
}

impl BoundaryCondition {
    pub fn kind(&self) -> BcKind {
        match self {
            BoundaryCondition::Dirichlet { .. } => BcKind::Dirichlet,
            BoundaryCondition::Neumann { .. } => BcKind::Neumann,
        }
    }

    fn data(&self) -> &Expr {
        match self {
            BoundaryCondition::Dirichlet { h } | BoundaryCondition::Neumann { h, .. } => h,
        }
    }
}

/// `-∇·(κ∇u) = S + g` on a box, with the singular source `S` given as a list
/// of [`Singularity`] values.
#[derive(Debug, Clone)]
pub struct EllipticProblem {
    pub name: String,
    domain: BoxDomain,
    kappa: DiffField,
    source: Expr,
    singularities: Vec<Singularity>,
    bc: BoundaryCondition,
    ellipticity_floor: f64,
    reference_regular: Option<Expr>,
    reference_solution: Option<Expr>,
    boundary_override: Option<Expr>,
}

impl EllipticProblem {
    pub fn new(
        domain: BoxDomain,
        kappa: Expr,
        source: Expr,
        singularities: Vec<Singularity>,
        bc: BoundaryCondition,
        ellipticity_floor: f64,
    ) -> Result<EllipticProblem, ProblemError> {
        let d = domain.dim();
        let check_dim = |e: &Expr, what: &str| {
            if e.dim() != d {
                Err(ProblemError::Invalid(format!(
                    "{what} is declared in dimension {}, domain has {d}",
                    e.dim()
                )))
            } else {
                Ok(())
            }
        };
        check_dim(&kappa, "kappa")?;
        check_dim(&source, "source")?;
        check_dim(bc.data(), "boundary data")?;
        for s in &singularities {
            check_dim(s.strength(), "singularity strength")?;
            s.support.validate(&domain)?;
        }
        if let BoundaryCondition::Neumann { anchor_point, .. } = &bc {
            if !domain.contains_closed(anchor_point) {
                return Err(ProblemError::Invalid(
                    "Neumann anchor outside the domain".into(),
                ));
            }
        }
        if !(ellipticity_floor > 0.0) {
            return Err(ProblemError::Invalid(
                "ellipticity floor must be positive".into(),
            ));
        }
        let problem = EllipticProblem {
            name: String::from("custom"),
            domain,
            kappa: DiffField::new(kappa),
            source,
            singularities,
            bc,
            ellipticity_floor,
            reference_regular: None,
            reference_solution: None,
            boundary_override: None,
        };
        problem.check_ellipticity()?;
        Ok(problem)
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn with_reference_regular(mut self, v: Expr) -> Result<Self, ProblemError> {
        self.expect_dim(&v)?;
        self.reference_regular = Some(v);
        Ok(self)
    }

    pub fn with_reference_solution(mut self, u: Expr) -> Result<Self, ProblemError> {
        self.expect_dim(&u)?;
        self.reference_solution = Some(u);
        Ok(self)
    }

    /// Supply the regular boundary trace `h̃` directly instead of `h − w`.
    pub fn with_boundary_override(mut self, trace: Expr) -> Result<Self, ProblemError> {
        self.expect_dim(&trace)?;
        self.boundary_override = Some(trace);
        Ok(self)
    }

    fn expect_dim(&self, e: &Expr) -> Result<(), ProblemError> {
        if e.dim() != self.dim() {
            return Err(ProblemError::Invalid(
                "expression dimension mismatch".into(),
            ));
        }
        Ok(())
    }

    /// Samples κ on a tensor grid (17 points per axis, at most 1e5 in total).
    fn check_ellipticity(&self) -> Result<(), ProblemError> {
        let d = self.dim();
        let mut per_axis = 17usize;
        while per_axis > 2 && (per_axis as f64).powi(d as i32) > 1e5 {
            per_axis -= 1;
        }
        let total = per_axis.pow(d as u32);
        let mut x = vec![0.0; d];
        for flat in 0..total {
            let mut rem = flat;
            for i in 0..d {
                let k = rem % per_axis;
                rem /= per_axis;
                let t = k as f64 / (per_axis - 1) as f64;
                x[i] = self.domain.lower[i] + t * self.domain.width(i);
            }
            let value = self.kappa.value.eval(&x)?;
            if !(value >= self.ellipticity_floor) {
                return Err(ProblemError::Ellipticity {
                    at: x,
                    value,
                    floor: self.ellipticity_floor,
                });
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn kappa(&self) -> &Expr {
        &self.kappa.value
    }

    pub fn source(&self) -> &Expr {
        &self.source
    }

    pub fn singularities(&self) -> &[Singularity] {
        &self.singularities
    }

    pub fn boundary_condition(&self) -> &BoundaryCondition {
        &self.bc
    }

    pub fn bc_kind(&self) -> BcKind {
        self.bc.kind()
    }

    pub fn ellipticity_floor(&self) -> f64 {
        self.ellipticity_floor
    }

    pub fn reference_regular(&self) -> Option<&Expr> {
        self.reference_regular.as_ref()
    }

    pub fn reference_solution(&self) -> Option<&Expr> {
        self.reference_solution.as_ref()
    }

    pub fn boundary_override(&self) -> Option<&Expr> {
        self.boundary_override.as_ref()
    }

    /// Distance from `x` to the nearest singular support (infinite if none).
    pub fn support_distance(&self, x: &[f64]) -> f64 {
        self.singularities
            .iter()
            .map(|s| s.support.distance(x))
            .fold(f64::INFINITY, f64::min)
    }

    /// Singular field `w = κ⁻¹ Σ fᵢΦᵢ` and its gradient.
    pub fn singular_field(&self, x: &[f64]) -> Result<(f64, Vec<f64>), ProblemError> {
        let d = self.dim();
        let mut grad = vec![0.0; d];
        if self.singularities.is_empty() {
            return Ok((0.0, grad));
        }
        let mut sum = 0.0;
        let mut sum_grad = vec![0.0; d];
        let mut gphi = vec![0.0; d];
        let mut gf = vec![0.0; d];
        for s in &self.singularities {
            let phi = s.support.potential(x, &mut gphi)?;
            let f = s.strength.value.eval(x)?;
            s.strength.eval_grad(x, &mut gf)?;
            sum += f * phi;
            for i in 0..d {
                sum_grad[i] += gf[i] * phi + f * gphi[i];
            }
        }
        let kappa = self.kappa.value.eval(x)?;
        let mut gk = vec![0.0; d];
        self.kappa.eval_grad(x, &mut gk)?;
        for i in 0..d {
            grad[i] = sum_grad[i] / kappa - sum * gk[i] / (kappa * kappa);
        }
        Ok((sum / kappa, grad))
    }

    /// Modified source `F` of the regular-part problem.
    pub fn modified_source(&self, x: &[f64]) -> Result<f64, ProblemError> {
        let g = self.source.eval(x)?;
        if self.singularities.is_empty() {
            return Ok(g);
        }
        let d = self.dim();
        let kappa_const = self.kappa.is_constant();
        let kappa = self.kappa.value.eval(x)?;
        let mut gk = vec![0.0; d];
        let mut lap_k = 0.0;
        let mut gk2 = 0.0;
        if !kappa_const {
            self.kappa.eval_grad(x, &mut gk)?;
            lap_k = self.kappa.laplacian.eval(x)?;
            gk2 = gk.iter().map(|v| v * v).sum::<f64>();
        }
        let mut correction = 0.0;
        let mut gphi = vec![0.0; d];
        let mut gf = vec![0.0; d];
        for s in &self.singularities {
            let f_const = s.strength.is_constant();
            if kappa_const && f_const {
                continue;
            }
            let phi = s.support.potential(x, &mut gphi)?;
            let f = s.strength.value.eval(x)?;
            let mut term = 0.0;
            if !f_const {
                s.strength.eval_grad(x, &mut gf)?;
                let lap_f = s.strength.laplacian.eval(x)?;
                term += lap_f * phi + 2.0 * dot(&gf, &gphi);
            }
            if !kappa_const {
                let mut bracket = lap_k * f * phi + f * dot(&gk, &gphi);
                if !f_const {
                    bracket += phi * dot(&gk, &gf);
                }
                term += -bracket / kappa + gk2 * f * phi / (kappa * kappa);
            }
            correction += term;
        }
        Ok(g + correction)
    }

    /// Modified boundary data `h̃` at boundary point `y` with outward normal `n`.
    pub fn modified_boundary(&self, y: &[f64], normal: &[f64]) -> Result<f64, ProblemError> {
        if let Some(trace) = &self.boundary_override {
            return Ok(trace.eval(y)?);
        }
        let h = self.bc.data().eval(y)?;
        if self.singularities.is_empty() {
            return Ok(h);
        }
        let (w, gw) = self.singular_field(y)?;
        Ok(match self.bc {
            BoundaryCondition::Dirichlet { .. } => h - w,
            BoundaryCondition::Neumann { .. } => {
                let kappa = self.kappa.value.eval(y)?;
                h - kappa * dot(&gw, normal)
            }
        })
    }

    /// Neumann anchor `(x*, ã)` for the regular part, `ã = a − w(x*)`.
    pub fn modified_anchor(&self) -> Result<Option<(Vec<f64>, f64)>, ProblemError> {
        match &self.bc {
            BoundaryCondition::Dirichlet { .. } => Ok(None),
            BoundaryCondition::Neumann {
                anchor_point,
                anchor_value,
                ..
            } => {
                let (w, _) = self.singular_field(anchor_point)?;
                Ok(Some((anchor_point.clone(), anchor_value - w)))
            }
        }
    }

    /// `u(x) = w(x) + v̂(x)`.
    pub fn reconstruct_solution<V>(&self, regular: V, x: &[f64]) -> Result<f64, ProblemError>
    where
        V: Fn(&[f64]) -> f64,
    {
        let (w, _) = self.singular_field(x)?;
        Ok(w + regular(x))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}
