use super::*;
use crate::charroots::{coverage_floor, ordered_spectrum, CharRoot, Truncation};
use crate::sim::{decay_rate, RdeNonlinearity, Simulator};

fn params(a: f64, b: f64, modes: usize) -> RdeParams {
    RdeParams { a, b, r: 1.0, num_modes: modes, nonlinearity: RdeNonlinearity::Zero }
}

fn setup(a: f64, b: f64, modes: usize, m: usize) -> (RdeParams, SpectralDecomposition) {
    let p = params(a, b, modes);
    let spectrum = ordered_spectrum(a, b, 1.0, modes, coverage_floor(a, b, 1.0, modes)).unwrap();
    let grid = GridSpec::new(1.0, 101, modes).unwrap();
    let d = build_decomposition(&spectrum, m, &DelayModes::from_rde(&p), grid).unwrap();
    (p, d)
}

fn max_diff(a: &HistorySegment, b: &HistorySegment) -> f64 {
    a.values().iter().zip(b.values()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn sample(d: &SpectralDecomposition, seed: u64) -> HistorySegment {
    random_segment(d.grid(), d.value_norm(), &mut trial_rng(seed, 0))
}

#[test]
fn rank_matches_cumulative_multiplicity() {
    let (_, d) = setup(1.0, 0.3, 3, 2);
    assert_eq!(d.rank(), d.spectrum().k(2).unwrap());
    assert_eq!(d.basis().len(), d.rank());
    let s = d.summary();
    assert_eq!((s.m, s.rank, s.k_fit), (2, d.rank(), None));
    assert!(s.rho_1 > s.rho_m && s.rho_m_plus_1.unwrap() < s.rho_m);
}

#[test]
fn projections_are_idempotent_and_complementary() {
    let (_, d) = setup(1.0, 0.3, 3, 2);
    for seed in 0..10 {
        let h = sample(&d, seed);
        let p = d.project(&h, Part::P).unwrap();
        let q = d.project(&h, Part::Q).unwrap();
        let scale = h.sup_norm();
        assert!(max_diff(&d.project(&p, Part::P).unwrap(), &p) < 1e-10 * scale);
        assert!(max_diff(&d.project(&q, Part::Q).unwrap(), &q) < 1e-10 * scale);
        assert!(d.project(&q, Part::P).unwrap().sup_norm() < 1e-10 * scale);
        let sum = p.axpy(1.0, &q).unwrap();
        assert!(max_diff(&sum, &h) < 1e-12 * scale);
    }
    for e in d.basis() {
        assert!(max_diff(&d.project(e, Part::P).unwrap(), e) < 1e-10);
        assert!(d.project(e, Part::Q).unwrap().sup_norm() < 1e-10);
    }
}

#[test]
fn undelayed_projection_reads_the_head() {
    let (p, d) = setup(1.0, 0.0, 3, 1);
    let c = p.mode_constants()[0];
    let mut e1 = HistorySegment::zeros(*d.grid(), ValueNorm::SineModal);
    for node in 0..d.grid().num_nodes() {
        e1.values_mut()[node * 3] = 1.0;
    }
    // With b = 0 the pairing only sees the value at 0, so the constant
    // segment projects onto exp(-c theta) with unit head.
    let proj = d.project(&e1, Part::P).unwrap();
    for node in 0..d.grid().num_nodes() {
        let theta = d.grid().node(node);
        assert!((proj.node_value(node)[0] - (-c * theta).exp()).abs() < 1e-10 * c.exp());
    }
    let q = d.project(&e1, Part::Q).unwrap();
    assert!(q.head()[0].abs() < 1e-12);
    assert!(max_diff(&d.project(&d.basis()[0].clone(), Part::P).unwrap(), &d.basis()[0]) < 1e-12);
}

#[test]
fn stable_part_decays_at_the_next_rate() {
    let (p, d) = setup(1.0, 0.3, 3, 1);
    let rho2 = d.rho(2).unwrap();
    let flow = Simulator::rde(p.linear(), 0.01).unwrap();
    for seed in 0..3 {
        let q = d.project(&sample(&d, seed), Part::Q).unwrap();
        let traj = flow.evolve(&q, 10.0).unwrap();
        let slope = decay_rate(&traj, 2.0, 10.0, 10).unwrap();
        assert!(slope <= rho2 + 0.05, "seed {seed}: slope {slope} vs rho2 {rho2}");
    }
}

#[test]
fn projection_norm_is_at_least_one() {
    let (_, d) = setup(1.0, 0.3, 3, 2);
    let est = d.projection_norm_estimate(1000, 7).unwrap();
    assert!(est >= 1.0 - 1e-12, "{est}");
}

#[test]
fn projection_commutes_with_the_linear_flow() {
    let (p, d) = setup(1.0, 0.3, 2, 1);
    let flow = Simulator::rde(p.linear(), 0.01).unwrap();
    let h = sample(&d, 3);
    let ph = d.project(&h, Part::P).unwrap();
    let u = flow.evolve(&h, 5.0).unwrap();
    let v = flow.evolve(&ph, 5.0).unwrap();
    let nodes = d.grid().num_nodes();
    for k in (0..=u.steps()).step_by(50) {
        let lhs = d.project(&u.state(k, nodes).unwrap(), Part::P).unwrap();
        let rhs = v.state(k, nodes).unwrap();
        let err = max_diff(&lhs, &rhs);
        assert!(err <= 1e-6 * h.sup_norm(), "t={}: {err}", u.time(k));
    }
}

#[test]
fn dichotomy_fit_properties() {
    let (p, d) = setup(1.0, 0.3, 3, 1);
    let flow = Simulator::rde(p.linear(), 0.01).unwrap();
    let small = fit_dichotomy_k(&d, &flow, 8, 6.0, 11).unwrap();
    let large = fit_dichotomy_k(&d, &flow, 200, 6.0, 11).unwrap();
    assert!(large.k_fit >= small.k_fit);
    assert!((small.k_fit - K_SAFETY * small.max_ratio).abs() < 1e-15);
    assert_eq!(small.max_ratio, small.random_ratio.max(small.probe_ratio));
    assert_eq!(small.probe_ratio, large.probe_ratio);
    assert!(small.k_margin > 0.0);
    let again = fit_dichotomy_k(&d, &flow, 8, 6.0, 11).unwrap();
    assert_eq!(small, again);
    let held_out = validate_dichotomy(&d, &flow, large.k_fit, 100, 6.0, 99).unwrap();
    assert_eq!(held_out.violations, 0, "{held_out:?}");
    assert!(held_out.worst_fraction <= 1.0);
}

#[test]
fn dichotomy_ratio_is_scale_free() {
    let (p, d) = setup(1.0, 0.3, 2, 1);
    let flow = Simulator::rde(p.linear(), 0.01).unwrap();
    let rate = d.rho(1).unwrap();
    let ratio = |x: &HistorySegment| {
        let traj = flow.evolve(x, 3.0).unwrap();
        (0..=traj.steps())
            .step_by(2)
            .map(|k| traj.state(k, 101).unwrap().sup_norm() * (-rate * traj.time(k)).exp() / x.sup_norm())
            .fold(0.0, f64::max)
    };
    let x = d.project(&sample(&d, 5), Part::Q).unwrap();
    let (r1, r2) = (ratio(&x), ratio(&x.scaled(1e3)));
    assert!((r1 - r2).abs() < 1e-12 * r1);
}

#[test]
fn undelayed_fit_is_bounded_by_the_window() {
    // Without delay the ratio is at most ||Q|| e^{|rho_m| r} and ||Q|| <= 2.
    let (p, d) = setup(1.0, 0.0, 3, 1);
    let flow = Simulator::rde(p.linear(), 0.01).unwrap();
    let fit = fit_dichotomy_k(&d, &flow, 20, 5.0, 1).unwrap();
    let bound = 2.0 * (d.rho(1).unwrap().abs() * 1.0).exp();
    assert!(fit.k_fit / K_SAFETY <= bound, "{} vs {bound}", fit.k_fit);
}

#[test]
fn rejects_defective_and_mismatched_inputs() {
    // c = 3, b = e^{-4}, r = 1 has a double root at -4.
    let b = (-4.0f64).exp();
    let p = params(2.0, b, 1);
    let double = CharRoot { value: Complex64::new(-4.0, 0.0), mode: 1, multiplicity: 2, conjugate_pair: false };
    let spectrum = SpectrumTable::from_roots(
        vec![double],
        Truncation { max_mode: 1, floor: -4.3, complete: true },
        crate::charroots::SignConvention::Physical,
    );
    let grid = GridSpec::new(1.0, 21, 1).unwrap();
    let res = build_decomposition(&spectrum, 1, &DelayModes::from_rde(&p), grid);
    assert!(matches!(res, Err(Error::DegenerateRoot { .. })), "{res:?}");

    let (p, d) = setup(1.0, 0.3, 2, 1);
    let wrong = GridSpec::new(1.0, 21, 3).unwrap();
    assert!(matches!(
        build_decomposition(d.spectrum(), 1, &DelayModes::from_rde(&p), wrong),
        Err(Error::Mismatch(_))
    ));
    assert!(build_decomposition(d.spectrum(), 99, &DelayModes::from_rde(&p), *d.grid()).is_err());
    let other = HistorySegment::zeros(GridSpec::new(1.0, 21, 2).unwrap(), ValueNorm::SineModal);
    assert!(d.project(&other, Part::P).is_err());
    let rfde_flow = Simulator::rfde(
        crate::sim::RfdeParams {
            dim: 2,
            r: 1.0,
            terms: vec![],
            kernel: None,
            nonlinearity: crate::sim::RfdeNonlinearity { kappa: 0.0, offset: vec![], lag: 0.0 },
            dichotomy: None,
        },
        0.01,
    )
    .unwrap();
    assert!(matches!(fit_dichotomy_k(&d, &rfde_flow, 2, 1.0, 0), Err(Error::Mismatch(_))));
}

#[test]
fn scalar_rfde_modes() {
    let p = crate::sim::RfdeParams {
        dim: 1,
        r: 1.0,
        terms: vec![
            crate::sim::DelayTerm { matrix: vec![vec![-2.0]], lag: 0.0 },
            crate::sim::DelayTerm { matrix: vec![vec![-0.5]], lag: 1.0 },
        ],
        kernel: None,
        nonlinearity: crate::sim::RfdeNonlinearity { kappa: 0.1, offset: vec![], lag: 0.0 },
        dichotomy: None,
    };
    let modes = DelayModes::from_rfde(&p).unwrap();
    assert_eq!((modes.b, modes.constants.clone()), (0.5, vec![2.0]));
    let spectrum = crate::charroots::scalar_spectrum(2.0, 0.5, 1.0, -4.0).unwrap();
    let d = build_decomposition(&spectrum, 1, &modes, GridSpec::new(1.0, 21, 1).unwrap()).unwrap();
    assert_eq!(d.rank(), 2);
}


#[test]
fn growth_bound_of_an_undelayed_decay() {
    // u' = -2u: the history window still holds the initial segment for
    // t < r, so sup_t ||U(t)|| e^{2t} lies in [1, e^{2r}].
    let p = crate::sim::RfdeParams {
        dim: 1,
        r: 1.0,
        terms: vec![crate::sim::DelayTerm { matrix: vec![vec![-2.0]], lag: 0.0 }],
        kernel: None,
        nonlinearity: crate::sim::RfdeNonlinearity { kappa: 0.0, offset: vec![], lag: 0.0 },
        dichotomy: None,
    };
    let modes = DelayModes::from_rfde(&p).unwrap();
    let spectrum = crate::charroots::scalar_spectrum(2.0, 0.0, 1.0, -4.0).unwrap();
    let d = build_decomposition(&spectrum, 1, &modes, GridSpec::new(1.0, 21, 1).unwrap()).unwrap();
    let flow = Simulator::rfde(p, 0.01).unwrap();
    let fit = fit_growth_bound(&d, &flow, -2.0, 20, 5.0, 3).unwrap();
    assert!(fit.max_ratio >= 1.0 - 1e-12, "{fit:?}");
    assert!(fit.max_ratio <= 2f64.exp() * (1.0 + 1e-6), "{fit:?}");
    assert!(fit_growth_bound(&d, &flow, f64::NAN, 20, 5.0, 3).is_err());
}
