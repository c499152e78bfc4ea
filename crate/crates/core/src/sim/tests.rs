use super::*;
use crate::bounds::{rde_absorbing_envelope, EnvelopeParams};
use crate::charroots::real_rightmost_root;
use crate::error::Error;
use crate::history::{GridSpec, HistorySegment, ValueNorm};

fn rde(a: f64, b: f64, r: f64, n: usize, f: RdeNonlinearity) -> RdeParams {
    RdeParams { a, b, r, num_modes: n, nonlinearity: f }
}

fn first_mode_history(grid: GridSpec, f: impl Fn(f64) -> f64) -> HistorySegment {
    HistorySegment::from_fn(grid, ValueNorm::SineModal, |theta, out| {
        out.iter_mut().for_each(|o| *o = 0.0);
        out[0] = f(theta);
    })
    .unwrap()
}

fn scalar_rfde(c: f64, b: f64, r: f64, kappa: f64, offset: f64) -> RfdeParams {
    let mut terms = vec![DelayTerm { matrix: vec![vec![-c]], lag: 0.0 }];
    if b != 0.0 {
        terms.push(DelayTerm { matrix: vec![vec![-b]], lag: r });
    }
    RfdeParams {
        dim: 1,
        r,
        terms,
        kernel: None,
        nonlinearity: RfdeNonlinearity { kappa, offset: if offset == 0.0 { vec![] } else { vec![offset] }, lag: 0.0 },
        dichotomy: None,
    }
}

#[test]
fn decoupled_linear_mode_decays_exactly() {
    let p = rde(2.0, 0.0, 1.0, 3, RdeNonlinearity::Zero);
    let phi = first_mode_history(GridSpec::new(1.0, 11, 3).unwrap(), |_| 1.5);
    let traj = simulate_rde(&p, &phi, 5.0, 0.01).unwrap();
    let end = traj.steps();
    assert!((traj.time(end) - 5.0).abs() < 1e-12);
    assert!((traj.value(end)[0] - 1.5 * (-15.0f64).exp()).abs() < 1e-8);
    assert_eq!(traj.value(end)[1], 0.0);
}

#[test]
fn rk4_is_fourth_order() {
    let p = rde(1.0, 0.0, 1.0, 1, RdeNonlinearity::Zero);
    let phi = first_mode_history(GridSpec::new(1.0, 3, 1).unwrap(), |_| 1.0);
    let err = |dt: f64| {
        let traj = simulate_rde(&p, &phi, 2.0, dt).unwrap();
        (traj.value(traj.steps())[0] - (-4.0f64).exp()).abs()
    };
    let ratio = err(0.1) / err(0.05);
    assert!((12.0..20.0).contains(&ratio), "ratio {ratio}");
}

#[test]
fn eigen_history_stays_on_its_ray() {
    let (a, b, r) = (1.0, 0.02, 1.0);
    let lambda = real_rightmost_root(1.0 + a, b, r).unwrap();
    let p = rde(a, b, r, 2, RdeNonlinearity::Zero);
    let phi = first_mode_history(GridSpec::new(r, 101, 2).unwrap(), |theta| (lambda * theta).exp());
    let traj = simulate_rde(&p, &phi, 3.0 * r, 0.01).unwrap();
    for k in 0..=traj.steps() {
        let expect = (lambda * traj.time(k)).exp();
        assert!((traj.value(k)[0] - expect).abs() < 1e-6, "t={} {} vs {expect}", traj.time(k), traj.value(k)[0]);
    }
}

#[test]
fn rfde_first_interval_is_one_minus_t() {
    let p = RfdeParams {
        dim: 1,
        r: 1.0,
        terms: vec![DelayTerm { matrix: vec![vec![-1.0]], lag: 1.0 }],
        kernel: None,
        nonlinearity: RfdeNonlinearity { kappa: 0.0, offset: vec![], lag: 0.0 },
        dichotomy: None,
    };
    let phi = HistorySegment::constant(GridSpec::new(1.0, 5, 1).unwrap(), ValueNorm::Euclidean, &[1.0]).unwrap();
    let traj = simulate_rfde(&p, &phi, 0.0, 1.0, 0.05).unwrap();
    for k in 0..=traj.steps() {
        assert!((traj.value(k)[0] - (1.0 - traj.time(k))).abs() < 1e-13);
    }
}

#[test]
fn rfde_linear_decay_rate() {
    // u' = -2 u(t) - 0.5 u(t - 1) has its rightmost pair at -1.3799 +- 1.8881i,
    // so gamma = 1.3 satisfies the exponential bound asymptotically.
    let gamma = 1.3;
    let p = scalar_rfde(2.0, 0.5, 1.0, 0.0, 0.0);
    let phi = HistorySegment::constant(GridSpec::new(1.0, 11, 1).unwrap(), ValueNorm::Euclidean, &[1.0]).unwrap();
    let traj = simulate_rfde(&p, &phi, 0.0, 10.0, 0.01).unwrap();
    let rate = decay_rate(&traj, 2.0, 10.0, 10).unwrap();
    let root = crate::charroots::scalar_spectrum(2.0, 0.5, 1.0, -4.0).unwrap().rho(1).unwrap();
    assert!(rate <= -gamma + 0.05, "{rate}");
    assert!((rate - root).abs() < 0.05, "{rate} vs {root}");
}

#[test]
fn rfde_kernel_and_time_dependence() {
    let mut p = scalar_rfde(1.0, 0.0, 1.0, 0.0, 0.0);
    p.kernel = Some(Kernel { matrix: vec![vec![-0.5]], decay: 0.0, amplitude: 0.0, frequency: 0.0 });
    assert!(p.is_autonomous());
    // Constant history 1: u'(0) = -1 - 0.5 * int_{-1}^0 1 = -1.5.
    let phi = HistorySegment::constant(GridSpec::new(1.0, 11, 1).unwrap(), ValueNorm::Euclidean, &[1.0]).unwrap();
    let traj = simulate_rfde(&p, &phi, 0.0, 0.01, 0.001).unwrap();
    let slope = (traj.value(traj.steps())[0] - 1.0) / 0.01;
    assert!((slope + 1.5).abs() < 0.02, "{slope}");
    p.kernel.as_mut().unwrap().amplitude = 0.5;
    p.kernel.as_mut().unwrap().frequency = 1.0;
    assert!(!p.is_autonomous());
    let a = simulate_rfde(&p, &phi, 0.0, 3.0, 0.01).unwrap();
    let b = simulate_rfde(&p, &phi, 1.0, 3.0, 0.01).unwrap();
    assert!((a.value(a.steps())[0] - b.value(b.steps())[0]).abs() > 1e-6);
}

#[test]
fn superposition_and_semigroup() {
    let p = rde(1.0, 0.6, 1.0, 3, RdeNonlinearity::Tanh { kappa: 0.4 });
    let grid = GridSpec::new(1.0, 101, 3).unwrap();
    let phi = HistorySegment::from_fn(grid, ValueNorm::SineModal, |t, o| {
        o[0] = (2.0 * t).cos();
        o[1] = 0.3 * t;
        o[2] = -0.1;
    })
    .unwrap();
    let psi = HistorySegment::from_fn(grid, ValueNorm::SineModal, |t, o| {
        o[0] = 0.5;
        o[1] = (t * 3.0).sin();
        o[2] = t * t;
    })
    .unwrap();
    let combo = phi.scaled(1.5).axpy(-0.7, &psi).unwrap();
    let u = linear_semigroup(&p, &phi, 4.0, 0.01).unwrap();
    let v = linear_semigroup(&p, &psi, 4.0, 0.01).unwrap();
    let w = linear_semigroup(&p, &combo, 4.0, 0.01).unwrap();
    for k in (0..=w.steps()).step_by(7) {
        for j in 0..3 {
            let lin = 1.5 * u.value(k)[j] - 0.7 * v.value(k)[j];
            assert!((w.value(k)[j] - lin).abs() < 1e-9);
        }
    }
    // U(2 + 1.5) phi = U(1.5) U(2) phi, restarting from the full-resolution state.
    let mid = u.state(200, 101).unwrap();
    let again = linear_semigroup(&p, &mid, 1.5, 0.01).unwrap();
    for j in 0..3 {
        let diff = (again.value(150)[j] - u.value(350)[j]).abs();
        assert!(diff < 1e-7, "component {j}: {diff}");
    }
}

#[test]
fn modal_truncation_converges() {
    let run = |n: usize| {
        let p = rde(1.0, 0.3, 1.0, n, RdeNonlinearity::Tanh { kappa: 0.5 });
        let phi = first_mode_history(GridSpec::new(1.0, 11, n).unwrap(), |t| 0.5 + 0.1 * t);
        let traj = simulate_rde(&p, &phi, 5.0, 0.01).unwrap();
        (0..=traj.steps()).step_by(10).map(|k| traj.state_norm(k)).collect::<Vec<_>>()
    };
    let (coarse, fine) = (run(8), run(16));
    let worst = coarse.iter().zip(&fine).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(worst < 1e-6, "{worst}");
}

#[test]
fn galerkin_projection_of_constant_offset() {
    let p = rde(1.0, 0.0, 1.0, 5, RdeNonlinearity::AffineTanh { kappa: 0.0, offset: 1.0 });
    let sys = RdeSystem::new(p).unwrap();
    let mut out = vec![0.0; 5];
    sys.project_nonlinearity(&[0.0; 5], &mut out);
    // Sine coefficients of 1 on (0, pi): 4/(n pi) for odd n.
    for (n, c) in out.iter().enumerate() {
        let n = n + 1;
        let expect = if n % 2 == 1 { 4.0 / (n as f64 * std::f64::consts::PI) } else { 0.0 };
        assert!((c - expect).abs() < 0.05, "mode {n}: {c} vs {expect}");
    }
}

#[test]
fn envelope_holds_along_a_run() {
    let (a, b, r, kappa, offset, delta) = (2.0, 0.5, 0.5, 0.1, 0.3, 2.1);
    let p = rde(a, b, r, 8, RdeNonlinearity::AffineTanh { kappa, offset });
    let phi = first_mode_history(GridSpec::new(r, 11, 8).unwrap(), |t| 3.0 + t);
    let traj = simulate_rde(&p, &phi, 8.0, 0.01).unwrap();
    let env = EnvelopeParams { a, lipschitz: p.lipschitz(), delta, c1: p.c1(), r };
    assert!(env.gap() > 0.0);
    let phi_norm = traj.state_norm(0);
    let report = check_envelope(&traj, |t| rde_absorbing_envelope(t, phi_norm, &env).unwrap(), 5);
    assert!(report.violations.is_empty(), "{:?}", report.violations.first());
    assert!(report.min_relative_slack > 0.0);
}

#[test]
fn absorbing_checks() {
    let inside = HistorySegment::constant(GridSpec::new(0.1, 11, 1).unwrap(), ValueNorm::Euclidean, &[0.5]).unwrap();
    let p = scalar_rfde(1.0, 0.0, 0.1, 0.0, 0.0);
    let traj = simulate_rfde(&p, &inside, 0.0, 3.0, 0.01).unwrap();
    let rep = check_absorbing(&traj, 1.0, 1).unwrap();
    assert_eq!(rep.first_entry, Some(0.0));
    assert!(!rep.exits_after_entry);

    let outside = HistorySegment::constant(GridSpec::new(0.1, 11, 1).unwrap(), ValueNorm::Euclidean, &[10.0]).unwrap();
    let traj = simulate_rfde(&p, &outside, 0.0, 6.0, 0.01).unwrap();
    let entry = check_absorbing(&traj, 1.0, 1).unwrap().first_entry.unwrap();
    let predicted = 10f64.ln();
    assert!((entry - predicted).abs() < 0.2 * predicted, "{entry} vs {predicted}");

    // u' = -u + 2 tanh(u) settles near 1.9 and never enters the unit ball.
    let p = scalar_rfde(1.0, 0.0, 0.1, 2.0, 0.0);
    let traj = simulate_rfde(&p, &HistorySegment::constant(*outside.grid(), ValueNorm::Euclidean, &[5.0]).unwrap(), 0.0, 20.0, 0.01)
        .unwrap();
    let rep = check_absorbing(&traj, 1.0, 10).unwrap();
    assert!(rep.first_entry.is_none());
    assert!((rep.final_norm - 1.915).abs() < 0.01, "{}", rep.final_norm);
    assert!(check_absorbing(&traj, 0.0, 1).is_err());
}

#[test]
fn rejects_bad_configurations() {
    let p = rde(1.0, 0.5, 1.0, 2, RdeNonlinearity::Zero);
    let phi = first_mode_history(GridSpec::new(1.0, 11, 2).unwrap(), |_| 1.0);
    assert!(matches!(simulate_rde(&p, &phi, 1.0, 0.3), Err(Error::Config(_))));
    let wrong_dim = first_mode_history(GridSpec::new(1.0, 11, 3).unwrap(), |_| 1.0);
    assert!(matches!(simulate_rde(&p, &wrong_dim, 1.0, 0.1), Err(Error::Mismatch(_))));
    assert!(rde(1.0, 2.5, 1.0, 2, RdeNonlinearity::Zero).validate().is_err());
    assert!(rde(-1.0, 0.0, 1.0, 2, RdeNonlinearity::Zero).validate().is_err());
    assert!(rde(1.0, 0.0, 1.0, 2, RdeNonlinearity::Zero).validate().is_ok());
    let blow = scalar_rfde(-5.0, 0.0, 1.0, 0.0, 0.0);
    let phi = HistorySegment::constant(GridSpec::new(1.0, 11, 1).unwrap(), ValueNorm::Euclidean, &[1.0]).unwrap();
    assert!(matches!(simulate_rfde(&blow, &phi, 0.0, 10.0, 0.1), Err(Error::BlowUp { .. })));
    let mut bad = scalar_rfde(1.0, 0.5, 1.0, 0.0, 0.0);
    bad.terms.swap(0, 1);
    assert!(bad.validate().is_err());
    let d = DichotomyInputs { k0: 0.5, gamma: 1.0, beta: -0.5, k: 1.0, m: 1 };
    assert!(d.validate().is_err());
}

#[test]
fn squeeze_check_on_linear_eigen_direction() {
    use crate::bounds::SqueezeConstants;
    use crate::charroots::{coverage_floor, ordered_spectrum};
    use crate::spectral::{build_decomposition, DelayModes};

    let p = rde(1.0, 0.02, 1.0, 2, RdeNonlinearity::Zero);
    let spectrum = ordered_spectrum(1.0, 0.02, 1.0, 2, coverage_floor(1.0, 0.02, 1.0, 2)).unwrap();
    let grid = GridSpec::new(1.0, 21, 2).unwrap();
    let decomp = build_decomposition(&spectrum, 1, &DelayModes::from_rde(&p), grid).unwrap();
    let lambda = spectrum.rho(1).unwrap();
    let phi = first_mode_history(grid, |t| (lambda * t).exp());
    let zero = HistorySegment::zeros(grid, ValueNorm::SineModal);
    let u = linear_semigroup(&p, &phi, 4.0, 0.01).unwrap();
    let v = linear_semigroup(&p, &zero, 4.0, 0.01).unwrap();
    let sc = SqueezeConstants { m1: 1.01, m2: 1.0, m3: 0.0, lambda0: lambda, lambda1: spectrum.rho(2).unwrap(), rank: 1, t0: 1.0 };
    let rep = check_squeeze(&u, &v, &decomp, &sc, 5).unwrap();
    assert!(rep.passed(), "{:?}", rep.violations.first());
    assert!(rep.min_slack_p > 0.0 && rep.min_slack_p < 0.02);
    assert!(matches!(check_squeeze(&u, &u, &decomp, &sc, 5), Err(Error::DegenerateSample(_))));
}

#[test]
fn trajectory_csv_has_header_and_rows() {
    let p = rde(1.0, 0.2, 1.0, 4, RdeNonlinearity::Zero);
    let phi = first_mode_history(GridSpec::new(1.0, 11, 4).unwrap(), |_| 1.0);
    let traj = simulate_rde(&p, &phi, 1.0, 0.1).unwrap();
    let mut buf = Vec::new();
    traj.write_csv(&mut buf, 2, 2).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "time,norm,u1,u2");
    assert_eq!(lines.count(), 6);
}
