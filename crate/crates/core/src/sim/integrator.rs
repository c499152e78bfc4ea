//! Fixed-step RK4 method of steps with dense history lookups.

use std::io::Write;

use crate::error::{Error, Result};
use crate::history::{GridSpec, HistorySegment, ValueNorm};

/// Solutions larger than this abort the run.
pub const BLOW_UP_NORM: f64 = 1e6;

/// A delay system `u'(t) = F(t, u(t), u_t)` with all delays in `[0, delay]`.
pub trait DelaySystem: Sync {
    fn dim(&self) -> usize;
    fn delay(&self) -> f64;
    fn value_norm(&self) -> ValueNorm;
    /// Smallest positive lag the right-hand side reads; must be a multiple
    /// of nothing in particular but at least `dt`.
    fn min_positive_lag(&self) -> f64;
    fn rhs(&self, t: f64, current: &[f64], past: &Past<'_>, out: &mut [f64]);
    /// Short description of the parameters, used in reports.
    fn fingerprint(&self) -> String;
}

/// Read access to the solution before the step being taken.
pub struct Past<'a> {
    initial: &'a HistorySegment,
    values: &'a [f64],
    derivs: &'a [f64],
    dim: usize,
    dt: f64,
    sigma: f64,
}

impl Past<'_> {
    /// Writes `u(s)` into `out`. `s` must not exceed the newest stored time.
    pub fn at(&self, s: f64, out: &mut [f64]) {
        let u = (s - self.sigma) / self.dt;
        if u <= 1e-9 {
            if u > -1e-9 {
                out.copy_from_slice(&self.values[..self.dim]);
            } else {
                let theta = (s - self.sigma).max(-self.initial.grid().delay());
                self.initial
                    .interpolate_into(theta, out)
                    .expect("lookup inside the initial history");
            }
            return;
        }
        let newest = self.values.len() / self.dim - 1;
        let k = u.round();
        if (u - k).abs() < 1e-9 && (k as usize) <= newest {
            let k = k as usize;
            out.copy_from_slice(&self.values[k * self.dim..(k + 1) * self.dim]);
            return;
        }
        let i = (u.floor() as usize).min(newest.saturating_sub(1));
        let s_loc = u - i as f64;
        let (s2, s3) = (s_loc * s_loc, s_loc * s_loc * s_loc);
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s_loc;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        let d = self.dim;
        let (y0, y1) = (&self.values[i * d..(i + 1) * d], &self.values[(i + 1) * d..(i + 2) * d]);
        let (m0, m1) = (&self.derivs[i * d..(i + 1) * d], &self.derivs[(i + 1) * d..(i + 2) * d]);
        for j in 0..d {
            out[j] = h00 * y0[j] + h10 * self.dt * m0[j] + h01 * y1[j] + h11 * self.dt * m1[j];
        }
    }
}

/// Number of steps per delay interval, checking that `dt` divides `delay`.
pub fn steps_per_delay(delay: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::Config(format!("time step must be positive, got {dt}")));
    }
    let s = (delay / dt).round();
    if s < 1.0 || (s * dt - delay).abs() > 1e-9 * delay {
        return Err(Error::Config(format!("time step {dt} does not divide the delay {delay}")));
    }
    Ok(s as usize)
}

/// Integrates from `sigma` over `[sigma, sigma + horizon]` starting from the
/// history `phi`, whose grid must span the system delay.
pub fn integrate<S: DelaySystem + ?Sized>(
    system: &S,
    phi: &HistorySegment,
    sigma: f64,
    horizon: f64,
    dt: f64,
) -> Result<Trajectory> {
    let dim = system.dim();
    let delay = system.delay();
    let spd = steps_per_delay(delay, dt)?;
    if phi.grid().value_dim() != dim {
        return Err(Error::Mismatch(format!(
            "initial history has {} components, system has {dim}",
            phi.grid().value_dim()
        )));
    }
    if (phi.grid().delay() - delay).abs() > 1e-9 * delay {
        return Err(Error::Mismatch(format!(
            "initial history spans {}, system delay is {delay}",
            phi.grid().delay()
        )));
    }
    if phi.value_norm() != system.value_norm() {
        return Err(Error::Mismatch("initial history uses a different value norm".into()));
    }
    let lag = system.min_positive_lag();
    if lag < dt * (1.0 - 1e-9) {
        return Err(Error::Config(format!("time step {dt} exceeds the smallest positive lag {lag}")));
    }
    if !(horizon >= 0.0) || !horizon.is_finite() {
        return Err(Error::Config(format!("horizon must be nonnegative, got {horizon}")));
    }
    let steps = (horizon / dt - 1e-9).ceil().max(0.0) as usize;
    let norm = system.value_norm();

    let mut values = Vec::with_capacity((steps + 1) * dim);
    let mut derivs = Vec::with_capacity((steps + 1) * dim);
    values.extend_from_slice(phi.head());

    let mut k1 = vec![0.0; dim];
    let mut k2 = vec![0.0; dim];
    let mut k3 = vec![0.0; dim];
    let mut k4 = vec![0.0; dim];
    let mut stage = vec![0.0; dim];
    for n in 0..steps {
        let t = sigma + n as f64 * dt;
        let y: Vec<f64> = values[n * dim..(n + 1) * dim].to_vec();
        {
            let past = Past { initial: phi, values: &values, derivs: &derivs, dim, dt, sigma };
            system.rhs(t, &y, &past, &mut k1);
        }
        derivs.extend_from_slice(&k1);
        let past = Past { initial: phi, values: &values, derivs: &derivs, dim, dt, sigma };
        for j in 0..dim {
            stage[j] = y[j] + 0.5 * dt * k1[j];
        }
        system.rhs(t + 0.5 * dt, &stage, &past, &mut k2);
        for j in 0..dim {
            stage[j] = y[j] + 0.5 * dt * k2[j];
        }
        system.rhs(t + 0.5 * dt, &stage, &past, &mut k3);
        for j in 0..dim {
            stage[j] = y[j] + dt * k3[j];
        }
        system.rhs(t + dt, &stage, &past, &mut k4);
        for j in 0..dim {
            stage[j] = y[j] + dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
        let size = norm.norm(&stage);
        if !(size <= BLOW_UP_NORM) {
            return Err(Error::BlowUp { t: t + dt, norm: size });
        }
        values.extend_from_slice(&stage);
    }
    Ok(Trajectory { sigma, dt, dim, delay, steps_per_delay: spd, norm, initial: phi.clone(), values })
}

/// A computed solution on `[sigma - delay, sigma + steps * dt]`.
#[derive(Clone, Debug)]
pub struct Trajectory {
    sigma: f64,
    dt: f64,
    dim: usize,
    delay: f64,
    steps_per_delay: usize,
    norm: ValueNorm,
    initial: HistorySegment,
    values: Vec<f64>,
}

impl Trajectory {
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn delay(&self) -> f64 {
        self.delay
    }

    pub fn steps_per_delay(&self) -> usize {
        self.steps_per_delay
    }

    pub fn value_norm(&self) -> ValueNorm {
        self.norm
    }

    pub fn initial(&self) -> &HistorySegment {
        &self.initial
    }

    /// Number of steps taken.
    pub fn steps(&self) -> usize {
        self.values.len() / self.dim - 1
    }

    pub fn time(&self, k: usize) -> f64 {
        self.sigma + k as f64 * self.dt
    }

    /// `u(sigma + k dt)`.
    pub fn value(&self, k: usize) -> &[f64] {
        &self.values[k * self.dim..(k + 1) * self.dim]
    }

    /// `u(sigma + j dt)` for any `j >= -steps_per_delay`.
    fn value_at_offset(&self, j: isize, out: &mut [f64]) -> Result<()> {
        if j >= 0 {
            out.copy_from_slice(self.value(j as usize));
            Ok(())
        } else {
            self.initial.interpolate_into(j as f64 * self.dt, out)
        }
    }

    /// Sampling stride (in steps) for segments with `nodes` nodes.
    pub fn node_stride(&self, nodes: usize) -> Result<usize> {
        if nodes < 2 || self.steps_per_delay % (nodes - 1) != 0 {
            return Err(Error::Config(format!(
                "{nodes} history nodes do not divide the {} steps per delay",
                self.steps_per_delay
            )));
        }
        Ok(self.steps_per_delay / (nodes - 1))
    }

    /// The segment `u_t` at `t = sigma + k dt`, sampled on `nodes` nodes.
    pub fn state(&self, k: usize, nodes: usize) -> Result<HistorySegment> {
        let stride = self.node_stride(nodes)?;
        if k > self.steps() {
            return Err(Error::Domain { theta: self.time(k), delay: self.delay });
        }
        let grid = GridSpec::new(self.delay, nodes, self.dim)?;
        let mut values = vec![0.0; nodes * self.dim];
        for (i, chunk) in values.chunks_mut(self.dim).enumerate() {
            let j = k as isize - ((nodes - 1 - i) * stride) as isize;
            self.value_at_offset(j, chunk)?;
        }
        HistorySegment::new(grid, self.norm, values)
    }

    /// Step indices at which a full `nodes`-node segment can be taken, every
    /// `every` steps, starting at step 0.
    pub fn sample_steps(&self, every: usize) -> Vec<usize> {
        (0..=self.steps()).step_by(every.max(1)).collect()
    }

    /// Sup norm of `u_t` over the stored nodes in `[t - delay, t]`.
    pub fn state_norm(&self, k: usize) -> f64 {
        let mut buf = vec![0.0; self.dim];
        let mut best: f64 = 0.0;
        for j in (k as isize - self.steps_per_delay as isize)..=k as isize {
            if self.value_at_offset(j, &mut buf).is_ok() {
                best = best.max(self.norm.norm(&buf));
            }
        }
        best
    }

    /// Writes `time, norm, u1..ud` (the first `max_coeffs` components) for
    /// every `every`-th step.
    pub fn write_csv<W: Write>(&self, w: W, every: usize, max_coeffs: usize) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let shown = self.dim.min(max_coeffs);
        let mut header = vec!["time".to_string(), "norm".to_string()];
        header.extend((1..=shown).map(|j| format!("u{j}")));
        wtr.write_record(&header)?;
        for k in self.sample_steps(every) {
            let mut row = vec![format!("{:.10e}", self.time(k)), format!("{:.10e}", self.state_norm(k))];
            row.extend(self.value(k)[..shown].iter().map(|x| format!("{x:.10e}")));
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }
}
