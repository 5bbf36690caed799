//! Statistical and structural checks of the samplers.

use proptest::prelude::*;
use splitritz::problem::{BoxDomain, Support};
use splitritz::sampling::{
    eval_grid, sample_boundary, sample_interior, stream_rng, Exclusion, Stream,
};

#[test]
fn interior_mean_is_centred() {
    let dom = BoxDomain::cube(2, 0.0, 1.0);
    let mut rng = stream_rng(2024, Stream::Interior);
    let batch = sample_interior(&dom, 100_000, &mut rng, None).unwrap();
    assert_eq!(batch.len(), 100_000);
    assert_eq!(batch.rejected, 0);
    for k in 0..2 {
        let mean = (0..batch.len()).map(|i| batch.point(i)[k]).sum::<f64>() / 1e5;
        assert!((mean - 0.5).abs() < 0.01, "axis {k}: {mean}");
    }
}

#[test]
fn boundary_faces_balanced() {
    let dom = BoxDomain::cube(2, 0.0, 1.0);
    let mut rng = stream_rng(7, Stream::Boundary);
    let n = 10_000;
    let batch = sample_boundary(&dom, n, &mut rng).unwrap();
    let mut counts = [0usize; 4];
    for i in 0..n {
        let nrm = batch.normal(i).unwrap();
        let face = match (nrm[0], nrm[1]) {
            (x, _) if x < 0.0 => 0,
            (x, _) if x > 0.0 => 1,
            (_, y) if y < 0.0 => 2,
            _ => 3,
        };
        counts[face] += 1;
    }
    let expect = n as f64 / 4.0;
    let band = 3.0 * (n as f64 * 0.25 * 0.75).sqrt();
    for c in counts {
        assert!((c as f64 - expect).abs() <= band, "{counts:?}");
    }
}

#[test]
fn boundary_faces_follow_measure() {
    // Faces orthogonal to x1 have measure 4, those orthogonal to x2 measure 1.
    let dom = BoxDomain::new(vec![0.0, 0.0], vec![1.0, 4.0]).unwrap();
    let mut rng = stream_rng(8, Stream::Boundary);
    let batch = sample_boundary(&dom, 20_000, &mut rng).unwrap();
    let on_x1 = (0..batch.len())
        .filter(|&i| batch.normal(i).unwrap()[0] != 0.0)
        .count() as f64;
    let p = on_x1 / 20_000.0;
    assert!(
        (p - 0.8).abs() < 3.0 * (0.8f64 * 0.2 / 20_000.0).sqrt() + 1e-3,
        "{p}"
    );
}

#[test]
fn exclusion_radius_respected() {
    let dom = BoxDomain::cube(3, -1.0, 1.0);
    let sup = [Support::Point(vec![0.0; 3])];
    let ex = Exclusion {
        supports: &sup,
        radius: 0.3,
    };
    let mut rng = stream_rng(3, Stream::Interior);
    let batch = sample_interior(&dom, 5000, &mut rng, Some(ex)).unwrap();
    assert_eq!(batch.len(), 5000);
    assert!(batch.rejected > 0);
    assert!((0..batch.len()).all(|i| sup[0].distance(batch.point(i)) >= 0.3));
}

#[test]
fn same_seed_same_batch() {
    let dom = BoxDomain::cube(4, -1.0, 1.0);
    let a = sample_interior(&dom, 300, &mut stream_rng(9, Stream::Interior), None).unwrap();
    let b = sample_interior(&dom, 300, &mut stream_rng(9, Stream::Interior), None).unwrap();
    assert_eq!(a, b);
    let grid_a = eval_grid(&dom, 4, &[(1, 0.25)]).unwrap();
    let _ = sample_interior(&dom, 10, &mut stream_rng(1, Stream::Eval), None).unwrap();
    assert_eq!(grid_a, eval_grid(&dom, 4, &[(1, 0.25)]).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn boundary_points_lie_on_one_face(
        seed in any::<u64>(),
        d in 1usize..6,
        lo in -2.0f64..0.0,
        width in 0.1f64..3.0,
    ) {
        let dom = BoxDomain::cube(d, lo, lo + width);
        let batch = sample_boundary(&dom, 50, &mut stream_rng(seed, Stream::Boundary)).unwrap();
        for i in 0..batch.len() {
            let y = batch.point(i);
            let n = batch.normal(i).unwrap();
            let on_bound = (0..d)
                .filter(|&k| y[k] == dom.lower()[k] || y[k] == dom.upper()[k])
                .count();
            prop_assert_eq!(on_bound, 1);
            let nonzero: Vec<usize> = (0..d).filter(|&k| n[k] != 0.0).collect();
            prop_assert_eq!(nonzero.len(), 1);
            let k = nonzero[0];
            prop_assert_eq!(n[k].abs(), 1.0);
            let expected = if n[k] > 0.0 { dom.upper()[k] } else { dom.lower()[k] };
            prop_assert_eq!(y[k], expected);
        }
    }

    #[test]
    fn interior_points_strictly_inside(seed in any::<u64>(), d in 1usize..6) {
        let dom = BoxDomain::cube(d, -1.0, 1.0);
        let batch = sample_interior(&dom, 200, &mut stream_rng(seed, Stream::Interior), None).unwrap();
        prop_assert_eq!(batch.len(), 200);
        prop_assert!(batch.points.iter().all(|v| *v > -1.0 && *v < 1.0));
    }
}
