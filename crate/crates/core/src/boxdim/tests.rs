use proptest::prelude::*;

use super::*;
use crate::history::{GridSpec, ValueNorm};
use crate::sim::{DelayTerm, RfdeNonlinearity, RfdeParams, Simulator};

fn feedback(dt: f64) -> Simulator<crate::sim::RfdeSystem> {
    // u' = -2 tanh(u(t - 1)) has a stable periodic orbit.
    let p = RfdeParams {
        dim: 1,
        r: 1.0,
        terms: vec![],
        kernel: None,
        nonlinearity: RfdeNonlinearity { kappa: -2.0, offset: vec![], lag: 1.0 },
        dichotomy: None,
    };
    Simulator::rfde(p, dt).unwrap()
}

fn constant(value: f64, nodes: usize) -> HistorySegment {
    HistorySegment::constant(GridSpec::new(1.0, nodes, 1).unwrap(), ValueNorm::Euclidean, &[value]).unwrap()
}

#[test]
fn single_point_has_dimension_zero() {
    let rep = box_counting_dim(&synthetic::point(64), &geometric_eps(1.0, 0.01, 6), None).unwrap();
    assert_eq!(rep.estimate, 0.0);
    assert!(rep.counts.iter().all(|c| c.count == 1));
}

#[test]
fn segment_has_dimension_one() {
    let s = synthetic::segment(100_000, 64, 1.0, 3);
    let rep = box_counting_dim(&s, &geometric_eps(0.1, 0.001, 9), None).unwrap();
    assert!((rep.estimate - 1.0).abs() <= 0.1, "{rep:?}");
    assert!(rep.r_squared >= MIN_R_SQUARED);
}

#[test]
fn square_has_dimension_two() {
    let s = synthetic::square(100_000, 64, 1.0, 5);
    let rep = box_counting_dim(&s, &geometric_eps(0.3, 0.009, 9), None).unwrap();
    assert!((rep.estimate - 2.0).abs() <= 0.15, "{rep:?}");
}

#[test]
fn counts_never_increase_with_eps() {
    let s = synthetic::square(20_000, 8, 1.0, 1);
    let rep = box_counting_dim(&s, &geometric_eps(0.5, 0.01, 12), None).unwrap();
    for w in rep.counts.windows(2) {
        assert!(w[0].count <= w[1].count);
        assert!(w[0].count <= w[0].occupied);
    }
}

#[test]
fn diameter_examples() {
    let two = AttractorSample::from_points(vec![vec![0.0, 1.0], vec![3.0, -1.0]], 0.0, "two").unwrap();
    assert_eq!(two.diameter, 3.0);
    let s = synthetic::segment(5_000, 16, 2.5, 9);
    assert!((s.diameter - 2.5).abs() <= 0.02 * 2.5, "{}", s.diameter);
    let doubled = AttractorSample::from_points(s.points().map(|p| p.iter().map(|x| 2.0 * x).collect()).collect(), 0.0, "x2").unwrap();
    assert!((doubled.diameter - 2.0 * s.diameter).abs() <= 1e-12 * s.diameter);
}

#[test]
fn duplicates_collapse() {
    let s = AttractorSample::from_points(vec![vec![1.0], vec![1.0 + 1e-12], vec![2.0]], 0.0, "dup").unwrap();
    assert_eq!(s.len(), 2);
}

#[test]
fn contracting_system_collapses_to_a_point() {
    let p = RfdeParams {
        dim: 1,
        r: 1.0,
        terms: vec![DelayTerm { matrix: vec![vec![-1.0]], lag: 0.0 }],
        kernel: None,
        nonlinearity: RfdeNonlinearity { kappa: 0.0, offset: vec![], lag: 0.0 },
        dichotomy: None,
    };
    let flow = Simulator::rfde(p, 0.01).unwrap();
    let s = sample_attractor(&flow, &[constant(1.0, 11), constant(-2.0, 11)], 40.0, 60.0, 0.1, 11, None).unwrap();
    assert!(s.max_norm() < 1e-6);
    assert_eq!(s.len(), 1);
}

#[test]
fn periodic_orbit_diameter_matches_a_fine_run() {
    let sample = |dt: f64| sample_attractor(&feedback(dt), &[constant(0.5, 21)], 60.0, 100.0, 0.05, 21, None).unwrap();
    let coarse = sample(0.01);
    let fine = sample(0.0025);
    assert!(coarse.diameter > 1.0);
    assert!((coarse.diameter - fine.diameter).abs() <= 0.02 * fine.diameter, "{} vs {}", coarse.diameter, fine.diameter);
    assert!(coarse.source.contains("dt=0.01"));

    let pooled = sample_attractor(&feedback(0.01), &[constant(0.5, 21), constant(-3.0, 21)], 60.0, 100.0, 0.05, 21, None).unwrap();
    assert!(pooled.diameter >= coarse.diameter);
    // A closed loop: dimension near one.
    let rep = box_counting_dim(&pooled, &geometric_eps(0.2, 0.005, 8), None).unwrap();
    assert!(rep.estimate < 1.3, "{rep:?}");
}

#[test]
fn sampling_checks_its_inputs() {
    let flow = feedback(0.01);
    assert!(sample_attractor(&flow, &[], 1.0, 2.0, 0.1, 21, None).is_err());
    assert!(sample_attractor(&flow, &[constant(0.5, 21)], 1.0, 2.0, 0.01, 21, None).is_err());
    let err = sample_attractor(&flow, &[constant(0.5, 21)], 10.0, 20.0, 0.1, 21, Some(0.1)).unwrap_err();
    assert!(matches!(err, Error::Numerical(_)));
}

#[test]
fn rejects_bad_eps_lists_and_flat_counts() {
    let s = synthetic::segment(1_000, 4, 1.0, 0);
    assert!(box_counting_dim(&s, &[1.0, 0.5, 0.1], None).is_err());
    assert!(box_counting_dim(&s, &[1.0, 0.5, 0.2, 0.1], None).is_err());
    assert!(box_counting_dim(&s, &[1.0, 0.1, 0.2, 0.01], None).is_err());
    let far = AttractorSample::from_points(vec![vec![0.0], vec![100.0]], 0.0, "far").unwrap();
    let err = box_counting_dim(&far, &geometric_eps(10.0, 0.1, 5), None).unwrap_err();
    assert!(matches!(err, Error::DegenerateSample(_)));
    let near = AttractorSample::from_points(vec![vec![0.0], vec![1e-6]], 0.0, "near").unwrap();
    assert_eq!(box_counting_dim(&near, &geometric_eps(10.0, 0.1, 5), None).unwrap().estimate, 0.0);
}

#[test]
fn user_window_is_respected() {
    let s = synthetic::segment(20_000, 8, 1.0, 2);
    let rep = box_counting_dim(&s, &geometric_eps(0.1, 0.002, 8), Some((1, 4))).unwrap();
    assert_eq!(rep.window, (1, 4));
    assert!(box_counting_dim(&s, &geometric_eps(0.1, 0.002, 8), Some((4, 4))).is_err());
}

#[test]
fn counts_csv_has_one_row_per_eps() {
    let s = synthetic::segment(2_000, 4, 1.0, 0);
    let rep = box_counting_dim(&s, &geometric_eps(0.2, 0.005, 5), None).unwrap();
    let mut buf = Vec::new();
    rep.write_counts_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().count(), 6);
    assert!(text.starts_with("eps,occupied,n_eps"));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn occupied_cells_follow_nested_grids(seed in 0u64..1000, eps in 0.01..0.5f64) {
        // Halving eps refines every cell, so counts cannot drop.
        let s = synthetic::square(2_000, 3, 1.0, seed);
        prop_assert!(occupied_cells(&s, eps / 2.0) >= occupied_cells(&s, eps));
    }
}
