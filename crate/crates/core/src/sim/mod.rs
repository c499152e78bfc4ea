//! Simulation of the two model systems and trajectory-level checks of the
//! absorbing and squeezing estimates.

mod checks;
mod integrator;
mod rde;
mod rfde;

pub use checks::{
    check_absorbing, check_envelope, check_squeeze, decay_rate, AbsorbingReport, EnvelopeReport, SqueezeReport,
    Violation,
};
pub use integrator::{integrate, steps_per_delay, DelaySystem, Past, Trajectory, BLOW_UP_NORM};
pub use rde::{RdeNonlinearity, RdeParams, RdeSystem};
pub use rfde::{DelayTerm, DichotomyInputs, Kernel, RfdeNonlinearity, RfdeParams, RfdeSystem};

use crate::error::Result;
use crate::history::{GridSpec, HistorySegment, ValueNorm};

/// Something that maps an initial history to a trajectory.
pub trait Flow: Sync {
    fn evolve(&self, phi: &HistorySegment, horizon: f64) -> Result<Trajectory>;
    fn delay(&self) -> f64;
    fn dt(&self) -> f64;
    fn value_dim(&self) -> usize;
    fn value_norm(&self) -> ValueNorm;
    fn fingerprint(&self) -> String;

    /// Grid of segments with `nodes` nodes in this flow's phase space.
    fn grid(&self, nodes: usize) -> Result<GridSpec> {
        GridSpec::new(self.delay(), nodes, self.value_dim())
    }
}

/// A delay system paired with a step size and start time.
pub struct Simulator<S> {
    system: S,
    dt: f64,
    sigma: f64,
}

impl<S: DelaySystem> Simulator<S> {
    pub fn system(&self) -> &S {
        &self.system
    }

    pub fn starting_at(mut self, sigma: f64) -> Self {
        self.sigma = sigma;
        self
    }
}

impl Simulator<RdeSystem> {
    pub fn rde(params: RdeParams, dt: f64) -> Result<Self> {
        steps_per_delay(params.r, dt)?;
        Ok(Self { system: RdeSystem::new(params)?, dt, sigma: 0.0 })
    }
}

impl Simulator<RfdeSystem> {
    pub fn rfde(params: RfdeParams, dt: f64) -> Result<Self> {
        Ok(Self { system: RfdeSystem::new(params)?.with_step(dt)?, dt, sigma: 0.0 })
    }
}

impl<S: DelaySystem> Flow for Simulator<S> {
    fn evolve(&self, phi: &HistorySegment, horizon: f64) -> Result<Trajectory> {
        integrate(&self.system, phi, self.sigma, horizon, self.dt)
    }

    fn delay(&self) -> f64 {
        self.system.delay()
    }

    fn dt(&self) -> f64 {
        self.dt
    }

    fn value_dim(&self) -> usize {
        self.system.dim()
    }

    fn value_norm(&self) -> ValueNorm {
        self.system.value_norm()
    }

    fn fingerprint(&self) -> String {
        format!("{} dt={} sigma={}", self.system.fingerprint(), self.dt, self.sigma)
    }
}

/// Simulates the reaction-diffusion system.
pub fn simulate_rde(params: &RdeParams, phi: &HistorySegment, horizon: f64, dt: f64) -> Result<Trajectory> {
    Simulator::rde(params.clone(), dt)?.evolve(phi, horizon)
}

/// Simulates the RFDE from time `sigma`.
pub fn simulate_rfde(
    params: &RfdeParams,
    phi: &HistorySegment,
    sigma: f64,
    horizon: f64,
    dt: f64,
) -> Result<Trajectory> {
    Simulator::rfde(params.clone(), dt)?.starting_at(sigma).evolve(phi, horizon)
}

/// The RDE linear semigroup `U(t)` applied to `phi`.
pub fn linear_semigroup(params: &RdeParams, phi: &HistorySegment, horizon: f64, dt: f64) -> Result<Trajectory> {
    simulate_rde(&params.linear(), phi, horizon, dt)
}

#[cfg(test)]
mod tests;
