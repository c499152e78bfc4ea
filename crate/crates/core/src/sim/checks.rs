use serde::Serialize;

use super::integrator::Trajectory;
use crate::bounds::SqueezeConstants;
use crate::error::{Error, Result};
use crate::spectral::{Part, SpectralDecomposition};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Violation {
    pub t: f64,
    pub part: &'static str,
    pub lhs: f64,
    pub rhs: f64,
}

/// Outcome of checking the two squeezing inequalities along a pair of
/// trajectories. Slacks are `(rhs - lhs) / ||phi - psi||`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SqueezeReport {
    pub samples: usize,
    pub initial_separation: f64,
    pub min_slack_p: f64,
    pub mean_slack_p: f64,
    pub min_slack_q: f64,
    pub mean_slack_q: f64,
    pub violations: Vec<Violation>,
}

impl SqueezeReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks `||P w_t|| <= M1 e^{l0 t} ||w_0||` and
/// `||Q w_t|| <= (M2 e^{l1 t} + M3 e^{l0 t}) ||w_0||` for `w = u - v`,
/// every `every` steps; `t` is measured from the trajectories' start.
pub fn check_squeeze(
    u: &Trajectory,
    v: &Trajectory,
    decomp: &SpectralDecomposition,
    sc: &SqueezeConstants,
    every: usize,
) -> Result<SqueezeReport> {
    if u.steps() != v.steps() || u.dt() != v.dt() || u.sigma() != v.sigma() || u.dim() != v.dim() {
        return Err(Error::Mismatch("trajectories are not sampled alike".into()));
    }
    let nodes = decomp.grid().num_nodes();
    let w0 = u.state(0, nodes)?.sub(&v.state(0, nodes)?)?;
    let sep = w0.sup_norm();
    if sep == 0.0 {
        return Err(Error::DegenerateSample("the two initial histories coincide".into()));
    }
    let mut report = SqueezeReport {
        samples: 0,
        initial_separation: sep,
        min_slack_p: f64::INFINITY,
        mean_slack_p: 0.0,
        min_slack_q: f64::INFINITY,
        mean_slack_q: 0.0,
        violations: Vec::new(),
    };
    for k in u.sample_steps(every) {
        let t = k as f64 * u.dt();
        let w = u.state(k, nodes)?.sub(&v.state(k, nodes)?)?;
        let p = decomp.project(&w, Part::P)?.sup_norm();
        let q = decomp.project(&w, Part::Q)?.sup_norm();
        let rhs_p = sc.m1 * (sc.lambda0 * t).exp() * sep;
        let rhs_q = (sc.m2 * (sc.lambda1 * t).exp() + sc.m3 * (sc.lambda0 * t).exp()) * sep;
        let (sp, sq) = ((rhs_p - p) / sep, (rhs_q - q) / sep);
        report.min_slack_p = report.min_slack_p.min(sp);
        report.min_slack_q = report.min_slack_q.min(sq);
        report.mean_slack_p += sp;
        report.mean_slack_q += sq;
        report.samples += 1;
        if sp <= 0.0 {
            report.violations.push(Violation { t, part: "P", lhs: p, rhs: rhs_p });
        }
        if sq <= 0.0 {
            report.violations.push(Violation { t, part: "Q", lhs: q, rhs: rhs_q });
        }
    }
    let n = report.samples.max(1) as f64;
    report.mean_slack_p /= n;
    report.mean_slack_q /= n;
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AbsorbingReport {
    pub radius: f64,
    pub samples: usize,
    /// First sampled time (from the start) with `||u_t|| <= radius`.
    pub first_entry: Option<f64>,
    pub exits_after_entry: bool,
    pub max_norm_after_entry: Option<f64>,
    pub final_norm: f64,
}

/// First entry into the ball of `radius` and whether the trajectory leaves
/// it again, sampled every `every` steps.
pub fn check_absorbing(traj: &Trajectory, radius: f64, every: usize) -> Result<AbsorbingReport> {
    if !(radius > 0.0) {
        return Err(Error::Precondition(format!("radius must be positive, got {radius}")));
    }
    let mut first_entry = None;
    let mut exits = false;
    let mut max_after: Option<f64> = None;
    let mut samples = 0;
    let mut last = 0.0;
    for k in traj.sample_steps(every) {
        let norm = traj.state_norm(k);
        last = norm;
        samples += 1;
        match first_entry {
            None if norm <= radius => {
                first_entry = Some(k as f64 * traj.dt());
                max_after = Some(norm);
            }
            Some(_) => {
                max_after = Some(max_after.unwrap_or(0.0).max(norm));
                if norm > radius {
                    exits = true;
                }
            }
            None => {}
        }
    }
    Ok(AbsorbingReport {
        radius,
        samples,
        first_entry,
        exits_after_entry: exits,
        max_norm_after_entry: max_after,
        final_norm: last,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnvelopeReport {
    pub samples: usize,
    /// Smallest `(envelope - ||u_t||) / envelope`.
    pub min_relative_slack: f64,
    pub violations: Vec<Violation>,
}

/// Checks `||u_t|| <= envelope(t)` every `every` steps.
pub fn check_envelope(traj: &Trajectory, envelope: impl Fn(f64) -> f64, every: usize) -> EnvelopeReport {
    let mut report = EnvelopeReport { samples: 0, min_relative_slack: f64::INFINITY, violations: Vec::new() };
    for k in traj.sample_steps(every) {
        let t = k as f64 * traj.dt();
        let norm = traj.state_norm(k);
        let env = envelope(t);
        report.samples += 1;
        report.min_relative_slack = report.min_relative_slack.min((env - norm) / env);
        if norm > env {
            report.violations.push(Violation { t, part: "envelope", lhs: norm, rhs: env });
        }
    }
    report
}

/// Least-squares slope of `ln ||u_t||` over sampled `t` in `[t_start, t_end]`.
pub fn decay_rate(traj: &Trajectory, t_start: f64, t_end: f64, every: usize) -> Result<f64> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for k in traj.sample_steps(every) {
        let t = k as f64 * traj.dt();
        if t >= t_start - 1e-12 && t <= t_end + 1e-12 {
            let n = traj.state_norm(k);
            if n > 0.0 {
                xs.push(t);
                ys.push(n.ln());
            }
        }
    }
    crate::stats::linear_fit(&xs, &ys)
        .map(|fit| fit.slope)
        .ok_or_else(|| Error::Numerical("too few samples to fit a decay rate".into()))
}
