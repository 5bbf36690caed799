//! Penalty path following, error evaluation and the naive deep Ritz baseline.

mod lbfgs;

pub use lbfgs::{
    lbfgs_minimize, lbfgs_minimize_monitored, Iterate, LbfgsError, LbfgsOptions, LbfgsStats,
    LbfgsStop,
};

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::net::{self, init_mlp, mlp_forward, InteriorTerms, MlpParams, NetError, RitzData};
use crate::problem::{
    builtin_example, example_settings, BcKind, BoundaryCondition, EllipticProblem, ProblemError,
    Support,
};
use crate::sampling::{
    sample_boundary_excluding, sample_interior, stream_rng, Exclusion, SampleBatch, SamplingError,
    Stream, RNG_NAME,
};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Sampling(#[from] SamplingError),
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("numerical failure at stage {stage} (sigma = {sigma}): {source}")]
    Numerical {
        stage: usize,
        sigma: f64,
        source: LbfgsError,
    },
    #[error("non-finite value while evaluating {0}")]
    NonFinite(&'static str),
    #[error("problem has no {0} reference for error evaluation")]
    MissingReference(&'static str),
    #[error("evaluation point set is empty")]
    EmptyEval,
    #[error("naive deep Ritz needs a Dirichlet problem with exactly one point source")]
    UnsupportedBaseline,
}

/// What the network approximates and which loss trains it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Formulation {
    /// Regular part `v` of the split problem.
    Split,
    /// The full solution `u`, with the point source entering as `−f(x₀)u(x₀)`.
    NaiveDrm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorTarget {
    /// Network output against `v*`.
    Regular,
    /// Reconstruction `w + v̂` (or the raw output for the baseline) against `u*`.
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub sigma_1: f64,
    pub eta: f64,
    pub sigma_max: f64,
    pub e_target: f64,
    pub n_interior: usize,
    pub n_boundary: usize,
    pub lbfgs: LbfgsOptions,
    pub seed: u64,
    pub resample_per_stage: bool,
    /// Hidden widths; the input and output widths come from the problem.
    pub hidden: Vec<usize>,
    pub interior_exclusion: f64,
    /// Boundary draws this close to a support are rejected unless the
    /// problem supplies a regular boundary trace.
    pub boundary_exclusion: f64,
    pub eval_points: usize,
    pub error_target: ErrorTarget,
    /// Relative stage-to-stage loss change that ends a run without a reference.
    pub loss_change_tol: f64,
    pub formulation: Formulation,
    pub holdout: HoldoutConfig,
}

/// Early stopping on an independent sample set. When enabled, each stage
/// keeps the iterate with the lowest loss on a second, equally sized sample
/// set and ends once that loss has not improved for `patience` iterations.
/// Checks run every `every` iterations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HoldoutConfig {
    pub enabled: bool,
    pub every: usize,
    pub patience: usize,
}

impl Default for HoldoutConfig {
    fn default() -> Self {
        HoldoutConfig {
            enabled: false,
            every: 25,
            patience: 250,
        }
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            sigma_1: 20.0,
            eta: 1.5,
            sigma_max: 1200.0,
            e_target: 1e-3,
            n_interior: 10_000,
            n_boundary: 400,
            // The reference optimizer's single `tol = 1e-9` sets both the
            // gradient and the relative-decrease tolerance.
            lbfgs: LbfgsOptions {
                ftol: 1e-9,
                ..LbfgsOptions::default()
            },
            seed: 0,
            resample_per_stage: false,
            hidden: vec![20, 20, 20],
            interior_exclusion: 1e-8,
            boundary_exclusion: 1e-3,
            eval_points: 10_000,
            error_target: ErrorTarget::Regular,
            loss_change_tol: 1e-12,
            formulation: Formulation::Split,
            holdout: HoldoutConfig::default(),
        }
    }
}

impl TrainConfig {
    /// Settings recorded for built-in example `n`. Neumann examples also
    /// enable held-out early stopping: their loss is linear in the boundary
    /// values, which a thin layer between samples can exploit.
    pub fn for_example(n: usize) -> Result<TrainConfig, TrainError> {
        let s = example_settings(n)?;
        let neumann = builtin_example(n)?.bc_kind() == BcKind::Neumann;
        Ok(TrainConfig {
            hidden: s.hidden,
            n_interior: s.n_interior,
            n_boundary: s.n_boundary,
            sigma_max: s.sigma_max,
            holdout: HoldoutConfig {
                enabled: neumann,
                ..HoldoutConfig::default()
            },
            ..TrainConfig::default()
        })
    }

    pub fn dims(&self, d: usize) -> Vec<usize> {
        let mut dims = vec![d];
        dims.extend_from_slice(&self.hidden);
        dims.push(1);
        dims
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::Config(m.to_string()));
        if !(self.sigma_1 > 0.0) {
            return bad("sigma_1 must be positive");
        }
        if !(self.eta > 1.0) {
            return bad("eta must exceed 1");
        }
        if !(self.sigma_max >= self.sigma_1) {
            return bad("sigma_max must be at least sigma_1");
        }
        if self.n_interior == 0 || self.n_boundary == 0 || self.eval_points == 0 {
            return bad("sample counts must be at least 1");
        }
        if self.hidden.contains(&0) {
            return bad("hidden widths must be at least 1");
        }
        if self.lbfgs.memory == 0 || self.lbfgs.max_line_search == 0 {
            return bad("L-BFGS memory and line-search budget must be at least 1");
        }
        if !(0.0 < self.lbfgs.c1 && self.lbfgs.c1 < self.lbfgs.c2 && self.lbfgs.c2 < 1.0) {
            return bad("line-search constants need 0 < c1 < c2 < 1");
        }
        if self.holdout.every == 0 || self.holdout.patience < self.holdout.every {
            return bad("holdout needs every >= 1 and patience >= every");
        }
        if self.interior_exclusion < 0.0 || self.boundary_exclusion < 0.0 {
            return bad("exclusion radii must be nonnegative");
        }
        Ok(())
    }

    /// The penalty values the default loop visits, `σ_{k+1} = ησ_k ≤ σ_max`.
    pub fn sigma_schedule(&self) -> Vec<f64> {
        let mut out = vec![self.sigma_1];
        loop {
            let next = out.last().unwrap() * self.eta;
            if next > self.sigma_max {
                return out;
            }
            out.push(next);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub stage: usize,
    pub sigma: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub loss_history: Vec<f64>,
    pub grad_norm: f64,
    pub optimizer_stop: LbfgsStop,
    pub line_search_failed: bool,
    /// Held-out loss of the returned parameters when early stopping is on.
    pub holdout_loss: Option<f64>,
    pub error: Option<f64>,
    pub seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStop {
    ErrorTarget,
    SigmaCap,
    LossStalled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub problem: String,
    pub formulation: Formulation,
    pub arch: String,
    pub param_count: usize,
    pub seed: u64,
    pub rng: String,
    pub n_interior: usize,
    pub n_boundary: usize,
    pub resample_per_stage: bool,
    pub holdout: HoldoutConfig,
    pub error_target: ErrorTarget,
    pub eval_points: usize,
    pub sigma_schedule: Vec<f64>,
    pub stages: Vec<StageReport>,
    pub final_error: Option<f64>,
    pub stop_reason: RunStop,
    pub total_seconds: f64,
}

/// Precomputed reference values on a fixed point set.
pub struct ErrorProbe {
    points: Vec<f64>,
    reference: Vec<f64>,
    /// Singular field added to the network output before comparing.
    offset: Option<Vec<f64>>,
}

impl ErrorProbe {
    pub fn new(
        problem: &EllipticProblem,
        points: Vec<f64>,
        target: ErrorTarget,
        formulation: Formulation,
    ) -> Result<ErrorProbe, TrainError> {
        let d = problem.dim();
        if points.is_empty() {
            return Err(TrainError::EmptyEval);
        }
        let (reference, name) = match target {
            ErrorTarget::Regular => (problem.reference_regular(), "regular-part"),
            ErrorTarget::Full => (problem.reference_solution(), "full-solution"),
        };
        let reference = reference.ok_or(TrainError::MissingReference(name))?;
        let values = points
            .chunks(d)
            .map(|x| reference.eval(x))
            .collect::<Result<Vec<_>, _>>()
            .map_err(ProblemError::from)?;
        let offset = match (target, formulation) {
            (ErrorTarget::Full, Formulation::Split) => Some(
                points
                    .chunks(d)
                    .map(|x| problem.singular_field(x).map(|(w, _)| w))
                    .collect::<Result<Vec<_>, _>>()?,
            ),
            _ => None,
        };
        Ok(ErrorProbe {
            points,
            reference: values,
            offset,
        })
    }

    pub fn len(&self) -> usize {
        self.reference.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reference.is_empty()
    }

    pub fn error(&self, params: &MlpParams) -> Result<f64, TrainError> {
        let pred = mlp_forward(params, &self.points)?;
        let mut num = 0.0;
        let mut den = 0.0;
        for (i, (p, r)) in pred.iter().zip(&self.reference).enumerate() {
            let p = p + self.offset.as_ref().map_or(0.0, |o| o[i]);
            num += (p - r) * (p - r);
            den += r * r;
        }
        let e = (num / den).sqrt();
        if !e.is_finite() {
            return Err(TrainError::NonFinite("relative error"));
        }
        Ok(e)
    }
}

/// Discrete relative L2 error `‖pred − ref‖ / ‖ref‖` over `points`
/// (row-major), where `pred` is the network output (`Regular`) or the
/// reconstruction `w + v̂` (`Full`).
pub fn relative_l2_error(
    params: &MlpParams,
    problem: &EllipticProblem,
    points: &[f64],
    target: ErrorTarget,
) -> Result<f64, TrainError> {
    ErrorProbe::new(problem, points.to_vec(), target, Formulation::Split)?.error(params)
}

fn supports(problem: &EllipticProblem) -> Vec<Support> {
    problem
        .singularities()
        .iter()
        .map(|s| s.support.clone())
        .collect()
}

/// Interior and boundary draws for one training batch.
pub struct Batches {
    pub interior: SampleBatch,
    pub boundary: SampleBatch,
}

struct Sampler {
    seed: u64,
    interior: rand_chacha::ChaCha20Rng,
    boundary: rand_chacha::ChaCha20Rng,
    draws: usize,
}

impl Sampler {
    fn new(seed: u64) -> Sampler {
        Sampler::with_streams(seed, Stream::Interior, Stream::Boundary)
    }

    fn holdout(seed: u64) -> Sampler {
        Sampler::with_streams(seed, Stream::HoldoutInterior, Stream::HoldoutBoundary)
    }

    fn with_streams(seed: u64, interior: Stream, boundary: Stream) -> Sampler {
        Sampler {
            seed,
            interior: stream_rng(seed, interior),
            boundary: stream_rng(seed, boundary),
            draws: 0,
        }
    }

    fn draw(
        &mut self,
        problem: &EllipticProblem,
        cfg: &TrainConfig,
    ) -> Result<Batches, TrainError> {
        let sup = supports(problem);
        let interior = sample_interior(
            problem.domain(),
            cfg.n_interior,
            &mut self.interior,
            Some(Exclusion {
                supports: &sup,
                radius: cfg.interior_exclusion,
            }),
        )?
        .with_provenance(self.seed, self.draws);
        let radius = if problem.boundary_override().is_some() {
            0.0
        } else {
            cfg.boundary_exclusion
        };
        let boundary = sample_boundary_excluding(
            problem.domain(),
            cfg.n_boundary,
            &mut self.boundary,
            Some(Exclusion {
                supports: &sup,
                radius,
            }),
        )?
        .with_provenance(self.seed, self.draws);
        self.draws += 1;
        Ok(Batches { interior, boundary })
    }
}

/// Evaluates `κ`, `F` and `h̃` at the batch points for the split loss.
pub fn build_ritz_data(
    problem: &EllipticProblem,
    batches: &Batches,
) -> Result<RitzData, TrainError> {
    let d = problem.dim();
    let int = &batches.interior;
    let n = int.len();
    let mut kappa = Vec::with_capacity(n);
    let mut source = Vec::with_capacity(n);
    for i in 0..n {
        let x = int.point(i);
        kappa.push(problem.kappa().eval(x).map_err(ProblemError::from)?);
        source.push(problem.modified_source(x)?);
    }
    let interior = InteriorTerms {
        points: int.points.clone(),
        kappa,
        source,
        weight: problem.domain().volume() / n as f64,
    };
    let bd = &batches.boundary;
    let target = (0..bd.len())
        .map(|j| problem.modified_boundary(bd.point(j), bd.normal(j).expect("boundary normals")))
        .collect::<Result<Vec<_>, _>>()?;
    let measure = problem.domain().boundary_measure();
    let data = match problem.bc_kind() {
        BcKind::Dirichlet => RitzData::dirichlet(d, interior, &bd.points, &target, measure)?,
        BcKind::Neumann => {
            let (x, a) = problem.modified_anchor()?.expect("Neumann anchor");
            RitzData::neumann(d, interior, &bd.points, &target, measure, (&x, a))?
        }
    };
    check_finite(&data)?;
    Ok(data)
}

/// Loss data of the unsplit baseline: source `g`, original boundary data and
/// the point evaluation `−f(x₀)u(x₀)`.
pub fn naive_drm_data(
    problem: &EllipticProblem,
    batches: &Batches,
) -> Result<RitzData, TrainError> {
    let [single] = problem.singularities() else {
        return Err(TrainError::UnsupportedBaseline);
    };
    let (Support::Point(x0), BoundaryCondition::Dirichlet { h }) =
        (&single.support, problem.boundary_condition())
    else {
        return Err(TrainError::UnsupportedBaseline);
    };
    let d = problem.dim();
    let int = &batches.interior;
    let n = int.len();
    let mut kappa = Vec::with_capacity(n);
    let mut source = Vec::with_capacity(n);
    for i in 0..n {
        let x = int.point(i);
        kappa.push(problem.kappa().eval(x).map_err(ProblemError::from)?);
        source.push(problem.source().eval(x).map_err(ProblemError::from)?);
    }
    let interior = InteriorTerms {
        points: int.points.clone(),
        kappa,
        source,
        weight: problem.domain().volume() / n as f64,
    };
    let bd = &batches.boundary;
    let target = (0..bd.len())
        .map(|j| h.eval(bd.point(j)))
        .collect::<Result<Vec<_>, _>>()
        .map_err(ProblemError::from)?;
    let mut data = RitzData::dirichlet(
        d,
        interior,
        &bd.points,
        &target,
        problem.domain().boundary_measure(),
    )?;
    let f0 = single.strength().eval(x0).map_err(ProblemError::from)?;
    data.add_point_term(x0, -f0)?;
    check_finite(&data)?;
    Ok(data)
}

/// Baseline loss and gradient (the network represents `u` directly).
pub fn naive_drm_loss_and_grad(
    params: &MlpParams,
    problem: &EllipticProblem,
    batches: &Batches,
    sigma: f64,
) -> Result<(f64, Vec<f64>), TrainError> {
    let data = naive_drm_data(problem, batches)?;
    Ok(net::loss_and_grad(params, &data, sigma)?)
}

fn check_finite(data: &RitzData) -> Result<(), TrainError> {
    let i = &data.interior;
    if !i.kappa.iter().chain(&i.source).all(|v| v.is_finite()) {
        return Err(TrainError::NonFinite("interior coefficients"));
    }
    if !data
        .values
        .target
        .iter()
        .chain(&data.values.linear)
        .all(|v| v.is_finite())
    {
        return Err(TrainError::NonFinite("boundary data"));
    }
    Ok(())
}

fn build_data(
    problem: &EllipticProblem,
    cfg: &TrainConfig,
    batches: &Batches,
) -> Result<RitzData, TrainError> {
    match cfg.formulation {
        Formulation::Split => build_ritz_data(problem, batches),
        Formulation::NaiveDrm => naive_drm_data(problem, batches),
    }
}

fn error_probe(
    problem: &EllipticProblem,
    cfg: &TrainConfig,
) -> Result<Option<ErrorProbe>, TrainError> {
    let target = match cfg.formulation {
        Formulation::Split => cfg.error_target,
        Formulation::NaiveDrm => ErrorTarget::Full,
    };
    let has_ref = match target {
        ErrorTarget::Regular => problem.reference_regular().is_some(),
        ErrorTarget::Full => problem.reference_solution().is_some(),
    };
    if !has_ref {
        return Ok(None);
    }
    let sup = supports(problem);
    let mut rng = stream_rng(cfg.seed, Stream::Eval);
    let batch = sample_interior(
        problem.domain(),
        cfg.eval_points,
        &mut rng,
        Some(Exclusion {
            supports: &sup,
            radius: cfg.interior_exclusion,
        }),
    )?;
    Ok(Some(ErrorProbe::new(
        problem,
        batch.points,
        target,
        cfg.formulation,
    )?))
}

/// Runs the penalty path: stage `k` minimizes the empirical loss at `σ_k`,
/// warm-started from stage `k − 1`.
pub fn path_follow(
    problem: &EllipticProblem,
    cfg: &TrainConfig,
) -> Result<(MlpParams, RunReport), TrainError> {
    path_follow_with(problem, cfg, |_| {})
}

/// As [`path_follow`], calling `observer` after every stage.
/// An iterate scored on the held-out set.
struct Checked {
    value: f64,
    iteration: usize,
    theta: Vec<f64>,
    grad_norm: f64,
}

pub fn path_follow_with<O>(
    problem: &EllipticProblem,
    cfg: &TrainConfig,
    mut observer: O,
) -> Result<(MlpParams, RunReport), TrainError>
where
    O: FnMut(&StageReport),
{
    cfg.validate()?;
    let started = Instant::now();
    let dims = cfg.dims(problem.dim());
    let mut params = init_mlp(&dims, cfg.seed)?;
    let mut sampler = Sampler::new(cfg.seed);
    let mut data = build_data(problem, cfg, &sampler.draw(problem, cfg)?)?;
    let probe = error_probe(problem, cfg)?;
    let holdout = if cfg.holdout.enabled {
        let batches = Sampler::holdout(cfg.seed).draw(problem, cfg)?;
        Some((cfg.holdout, build_data(problem, cfg, &batches)?))
    } else {
        None
    };

    let mut stages: Vec<StageReport> = Vec::new();
    let mut sigma = cfg.sigma_1;
    let stop_reason = loop {
        let stage = stages.len() + 1;
        let stage_start = Instant::now();
        if cfg.resample_per_stage && stage > 1 {
            data = build_data(problem, cfg, &sampler.draw(problem, cfg)?)?;
        }
        let objective = |theta: &[f64]| {
            let p = params
                .with_theta(theta.to_vec())
                .expect("fixed architecture");
            net::loss_and_grad(&p, &data, sigma).expect("validated batch shapes")
        };
        let mut best: Option<Checked> = None;
        let monitor = |it: Iterate<'_>| {
            let Some((h, held)) = &holdout else {
                return true;
            };
            if !it.iteration.is_multiple_of(h.every) {
                return true;
            }
            let p = params
                .with_theta(it.x.to_vec())
                .expect("fixed architecture");
            let value = net::loss(&p, held, sigma).expect("validated batch shapes");
            match &best {
                Some(b) if !(value < b.value) => it.iteration - b.iteration < h.patience,
                _ => {
                    best = Some(Checked {
                        value,
                        iteration: it.iteration,
                        theta: it.x.to_vec(),
                        grad_norm: it.g.iter().fold(0.0, |m: f64, v| m.max(v.abs())),
                    });
                    true
                }
            }
        };
        let (mut theta, mut stats) =
            lbfgs_minimize_monitored(objective, params.theta().to_vec(), &cfg.lbfgs, monitor)
                .map_err(|source| TrainError::Numerical {
                    stage,
                    sigma,
                    source,
                })?;
        if let Some(b) = &best {
            theta = b.theta.clone();
            stats.history.truncate(b.iteration + 1);
            stats.final_value = stats.history[b.iteration];
            stats.grad_norm = b.grad_norm;
        }
        params = params.with_theta(theta)?;
        let error = probe.as_ref().map(|p| p.error(&params)).transpose()?;
        let report = StageReport {
            stage,
            sigma,
            iterations: stats.iterations,
            evaluations: stats.evaluations,
            initial_loss: stats.initial_value,
            final_loss: stats.final_value,
            loss_history: stats.history,
            grad_norm: stats.grad_norm,
            optimizer_stop: stats.stop,
            line_search_failed: stats.line_search_failed,
            holdout_loss: best.map(|b| b.value),
            error,
            seconds: stage_start.elapsed().as_secs_f64(),
        };
        observer(&report);
        let prev_loss = stages.last().map(|s| s.final_loss);
        stages.push(report);
        if let Some(e) = error {
            if e < cfg.e_target {
                break RunStop::ErrorTarget;
            }
        } else if let Some(prev) = prev_loss {
            let cur = stages.last().unwrap().final_loss;
            if (cur - prev).abs() <= cfg.loss_change_tol * prev.abs().max(f64::MIN_POSITIVE) {
                break RunStop::LossStalled;
            }
        }
        let next = sigma * cfg.eta;
        if next > cfg.sigma_max {
            break RunStop::SigmaCap;
        }
        sigma = next;
    };

    let report = RunReport {
        problem: problem.name.clone(),
        formulation: cfg.formulation,
        arch: params.arch(),
        param_count: params.len(),
        seed: cfg.seed,
        rng: RNG_NAME.to_string(),
        n_interior: cfg.n_interior,
        n_boundary: cfg.n_boundary,
        resample_per_stage: cfg.resample_per_stage,
        holdout: cfg.holdout,
        error_target: match cfg.formulation {
            Formulation::Split => cfg.error_target,
            Formulation::NaiveDrm => ErrorTarget::Full,
        },
        eval_points: probe.as_ref().map_or(0, |p| p.len()),
        sigma_schedule: stages.iter().map(|s| s.sigma).collect(),
        final_error: stages.last().and_then(|s| s.error),
        stop_reason,
        stages,
        total_seconds: started.elapsed().as_secs_f64(),
    };
    Ok((params, report))
}
