//! Contracts of the path-following driver, the error metric and the naive
//! deep Ritz baseline.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use splitritz::fields::Expr;
use splitritz::net::{self, init_mlp, MlpParams};
use splitritz::problem::{builtin_example, BoundaryCondition, BoxDomain, EllipticProblem, Support};
use splitritz::sampling::{
    sample_boundary_excluding, sample_interior, stream_rng, Exclusion, Stream,
};
use splitritz::train::{
    build_ritz_data, naive_drm_loss_and_grad, path_follow, relative_l2_error, Batches, ErrorTarget,
    Formulation, RunStop, TrainConfig, TrainError,
};

fn small_config(hidden: Vec<usize>) -> TrainConfig {
    let mut cfg = TrainConfig {
        n_interior: 200,
        n_boundary: 40,
        eval_points: 200,
        hidden,
        ..TrainConfig::default()
    };
    cfg.lbfgs.max_iters = 40;
    cfg
}

/// The batches a run with `cfg` trains on, drawn independently of the
/// driver from the documented streams.
fn batches_for(problem: &EllipticProblem, cfg: &TrainConfig) -> Batches {
    batches_from(problem, cfg, Stream::Interior, Stream::Boundary)
}

fn batches_from(
    problem: &EllipticProblem,
    cfg: &TrainConfig,
    interior: Stream,
    boundary: Stream,
) -> Batches {
    let sup: Vec<Support> = problem
        .singularities()
        .iter()
        .map(|s| s.support.clone())
        .collect();
    let interior = sample_interior(
        problem.domain(),
        cfg.n_interior,
        &mut stream_rng(cfg.seed, interior),
        Some(Exclusion {
            supports: &sup,
            radius: cfg.interior_exclusion,
        }),
    )
    .unwrap();
    let radius = if problem.boundary_override().is_some() {
        0.0
    } else {
        cfg.boundary_exclusion
    };
    let boundary = sample_boundary_excluding(
        problem.domain(),
        cfg.n_boundary,
        &mut stream_rng(cfg.seed, boundary),
        Some(Exclusion {
            supports: &sup,
            radius,
        }),
    )
    .unwrap();
    Batches { interior, boundary }
}

#[test]
fn each_stage_starts_from_the_previous_minimizer() {
    let problem = builtin_example(1).unwrap();
    let mut cfg = small_config(vec![6, 6]);
    cfg.sigma_max = 20.0;
    let (first, one) = path_follow(&problem, &cfg).unwrap();
    assert_eq!(one.stages.len(), 1);
    cfg.sigma_max = 30.0;
    let (_, two) = path_follow(&problem, &cfg).unwrap();
    assert_eq!(two.stages.len(), 2);
    assert_eq!(
        two.stages[0].final_loss.to_bits(),
        one.stages[0].final_loss.to_bits()
    );
    let data = build_ritz_data(&problem, &batches_for(&problem, &cfg)).unwrap();
    let want = net::loss(&first, &data, 30.0).unwrap();
    let got = two.stages[1].initial_loss;
    assert!(
        (got - want).abs() <= 1e-12 * want.abs().max(1.0),
        "{got} vs {want}"
    );
    // A larger penalty can only raise a Dirichlet loss at fixed parameters.
    assert!(got >= one.stages[0].final_loss);
}

#[test]
fn loss_history_never_increases() {
    for n in [1, 2, 5] {
        let problem = builtin_example(n).unwrap();
        let mut cfg = small_config(vec![5, 5]);
        cfg.sigma_max = 70.0;
        let (_, report) = path_follow(&problem, &cfg).unwrap();
        assert_eq!(report.stages.len(), 4);
        for s in &report.stages {
            assert_eq!(s.loss_history[0], s.initial_loss);
            assert_eq!(*s.loss_history.last().unwrap(), s.final_loss);
            assert!(
                s.loss_history.windows(2).all(|w| w[1] <= w[0]),
                "example {n}"
            );
            assert!(s.error.is_some());
        }
        assert_eq!(report.stop_reason, RunStop::SigmaCap);
        assert_eq!(report.final_error, report.stages.last().unwrap().error);
    }
}

#[test]
fn holdout_selects_and_reports_the_best_checked_iterate() {
    let problem = builtin_example(2).unwrap();
    let mut cfg = small_config(vec![5, 5]);
    cfg.lbfgs.max_iters = 60;
    cfg.sigma_max = 30.0;
    cfg.holdout.enabled = true;
    cfg.holdout.every = 5;
    cfg.holdout.patience = 10;
    let (params, report) = path_follow(&problem, &cfg).unwrap();
    let held = build_ritz_data(
        &problem,
        &batches_from(
            &problem,
            &cfg,
            Stream::HoldoutInterior,
            Stream::HoldoutBoundary,
        ),
    )
    .unwrap();
    let train = build_ritz_data(&problem, &batches_for(&problem, &cfg)).unwrap();
    let last = report.stages.last().unwrap();
    let want = net::loss(&params, &held, last.sigma).unwrap();
    let got = last.holdout_loss.unwrap();
    assert!(
        (got - want).abs() <= 1e-12 * want.abs().max(1.0),
        "{got} vs {want}"
    );
    let train_loss = net::loss(&params, &train, last.sigma).unwrap();
    assert!((last.final_loss - train_loss).abs() <= 1e-12 * train_loss.abs().max(1.0));
    for s in &report.stages {
        assert_eq!(*s.loss_history.last().unwrap(), s.final_loss);
        assert_eq!((s.loss_history.len() - 1) % cfg.holdout.every, 0);
        assert!(s.loss_history.windows(2).all(|w| w[1] <= w[0]));
    }
    cfg.holdout.enabled = false;
    let (_, plain) = path_follow(&problem, &cfg).unwrap();
    assert!(plain.stages.iter().all(|s| s.holdout_loss.is_none()));
}

#[test]
fn error_target_stops_the_run() {
    let problem = builtin_example(3).unwrap();
    let mut cfg = small_config(vec![4]);
    cfg.e_target = 10.0;
    let (_, report) = path_follow(&problem, &cfg).unwrap();
    assert_eq!(report.stages.len(), 1);
    assert_eq!(report.stop_reason, RunStop::ErrorTarget);
}

fn constant_problem(value: f64) -> EllipticProblem {
    let c = Expr::constant(value, 2);
    EllipticProblem::new(
        BoxDomain::cube(2, -1.0, 1.0),
        Expr::constant(1.0, 2),
        Expr::constant(0.0, 2),
        vec![],
        BoundaryCondition::Dirichlet { h: c.clone() },
        1e-6,
    )
    .unwrap()
    .with_reference_regular(c.clone())
    .unwrap()
    .with_reference_solution(c)
    .unwrap()
}

/// Network with all weights zero and output bias `b`, i.e. the constant `b`.
fn constant_net(dims: Vec<usize>, b: f64) -> MlpParams {
    let p = MlpParams::zeros(dims).unwrap();
    let mut theta = p.theta().to_vec();
    *theta.last_mut().unwrap() = b;
    p.with_theta(theta).unwrap()
}

#[test]
fn relative_error_of_scaled_reference() {
    let problem = constant_problem(2.0);
    let pts: Vec<f64> = (0..100).map(|i| (i as f64 * 0.37).sin()).collect();
    let net = constant_net(vec![2, 3, 1], 2.02);
    for target in [ErrorTarget::Regular, ErrorTarget::Full] {
        let e = relative_l2_error(&net, &problem, &pts, target).unwrap();
        assert!((e - 0.01).abs() < 1e-14, "{e}");
    }
    let exact = constant_net(vec![2, 3, 1], 2.0);
    assert_eq!(
        relative_l2_error(&exact, &problem, &pts, ErrorTarget::Regular).unwrap(),
        0.0
    );
    assert!(matches!(
        relative_l2_error(&exact, &problem, &[], ErrorTarget::Regular),
        Err(TrainError::EmptyEval)
    ));
}

#[test]
fn naive_drm_loss_of_zero_network_is_the_boundary_penalty() {
    let problem = builtin_example(1).unwrap();
    let cfg = small_config(vec![4]);
    let batches = batches_for(&problem, &cfg);
    let zero = MlpParams::zeros(vec![2, 4, 1]).unwrap();
    let sigma = 37.0;
    let (loss, _) = naive_drm_loss_and_grad(&zero, &problem, &batches, sigma).unwrap();
    let BoundaryCondition::Dirichlet { h } = problem.boundary_condition() else {
        panic!("example 1 is Dirichlet");
    };
    let bd = &batches.boundary;
    let sum: f64 = (0..bd.len())
        .map(|j| h.eval(bd.point(j)).unwrap().powi(2))
        .sum();
    let want = 0.5 * sigma * problem.domain().boundary_measure() / bd.len() as f64 * sum;
    assert!((loss - want).abs() <= 1e-12 * want, "{loss} vs {want}");
}

#[test]
fn naive_drm_gradient_matches_fd() {
    let problem = builtin_example(1).unwrap();
    let mut cfg = small_config(vec![4, 4]);
    cfg.n_interior = 60;
    cfg.n_boundary = 20;
    let batches = batches_for(&problem, &cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let base = init_mlp(&[2, 4, 4, 1], 3).unwrap();
    let theta: Vec<f64> = base
        .theta()
        .iter()
        .map(|w| w + rng.gen_range(-0.2..0.2))
        .collect();
    let p = base.with_theta(theta).unwrap();
    let sigma = 50.0;
    let (_, g) = naive_drm_loss_and_grad(&p, &problem, &batches, sigma).unwrap();
    let scale = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let h = 1e-6;
    for j in 0..p.len() {
        let mut tp = p.theta().to_vec();
        let mut tm = p.theta().to_vec();
        tp[j] += h;
        tm[j] -= h;
        let lp = naive_drm_loss_and_grad(&p.with_theta(tp).unwrap(), &problem, &batches, sigma)
            .unwrap()
            .0;
        let lm = naive_drm_loss_and_grad(&p.with_theta(tm).unwrap(), &problem, &batches, sigma)
            .unwrap()
            .0;
        let fd = (lp - lm) / (2.0 * h);
        assert!(
            (g[j] - fd).abs() / scale < 1e-5,
            "param {j}: {} vs {fd}",
            g[j]
        );
    }
}

#[test]
fn naive_drm_rejects_unsupported_problems() {
    let cfg = small_config(vec![4]);
    for n in [2, 4, 5] {
        let problem = builtin_example(n).unwrap();
        let batches = batches_for(&problem, &cfg);
        let p = MlpParams::zeros(cfg.dims(problem.dim())).unwrap();
        assert!(matches!(
            naive_drm_loss_and_grad(&p, &problem, &batches, 20.0),
            Err(TrainError::UnsupportedBaseline)
        ));
    }
    let mut naive = small_config(vec![4]);
    naive.formulation = Formulation::NaiveDrm;
    naive.sigma_max = 20.0;
    let (_, report) = path_follow(&builtin_example(1).unwrap(), &naive).unwrap();
    assert_eq!(report.error_target, ErrorTarget::Full);
}
