//! Sine-Galerkin form of the delayed reaction-diffusion equation
//! `u_t = u_xx - a u - b u(t - r) + f(u(t - r))` on `(0, pi)` with Dirichlet
//! boundary conditions.

use serde::{Deserialize, Serialize};

use super::integrator::{DelaySystem, Past};
use crate::error::{ensure_finite, Error, Result};
use crate::history::ValueNorm;

/// Pointwise nonlinearity `f(u) = kappa tanh(u) + offset`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RdeNonlinearity {
    #[default]
    Zero,
    Tanh { kappa: f64 },
    AffineTanh { kappa: f64, offset: f64 },
}

impl RdeNonlinearity {
    fn parts(&self) -> (f64, f64) {
        match *self {
            RdeNonlinearity::Zero => (0.0, 0.0),
            RdeNonlinearity::Tanh { kappa } => (kappa, 0.0),
            RdeNonlinearity::AffineTanh { kappa, offset } => (kappa, offset),
        }
    }

    pub fn eval(&self, u: f64) -> f64 {
        let (k, o) = self.parts();
        k * u.tanh() + o
    }

    /// Lipschitz constant of the induced map on L²(0, π).
    pub fn lipschitz(&self) -> f64 {
        self.parts().0.abs()
    }

    /// `||f(0)||` in L²(0, π).
    pub fn c1(&self) -> f64 {
        self.parts().1.abs() * std::f64::consts::PI.sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.parts() == (0.0, 0.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RdeParams {
    pub a: f64,
    pub b: f64,
    pub r: f64,
    #[serde(default = "default_modes")]
    pub num_modes: usize,
    #[serde(default)]
    pub nonlinearity: RdeNonlinearity,
}

fn default_modes() -> usize {
    8
}

impl RdeParams {
    /// Checks `a > 0`, `b >= 0`, `b - a < 1`, `r > 0`, at least one mode.
    ///
    /// `b = 0` is admitted so the undelayed limit can be run through the
    /// same code path.
    pub fn validate(&self) -> Result<()> {
        for (name, x) in [("a", self.a), ("b", self.b), ("r", self.r)] {
            ensure_finite(name, x)?;
        }
        let fail = |m: String| Err(Error::Config(m));
        if self.a <= 0.0 {
            return fail(format!("rde.a must be positive, got {}", self.a));
        }
        if self.b < 0.0 {
            return fail(format!("rde.b must be nonnegative, got {}", self.b));
        }
        if self.b - self.a >= 1.0 {
            return fail(format!("rde requires b - a < 1, got b - a = {}", self.b - self.a));
        }
        if self.r <= 0.0 {
            return fail(format!("rde.r must be positive, got {}", self.r));
        }
        if self.num_modes == 0 {
            return fail("rde.num_modes must be at least 1".into());
        }
        Ok(())
    }

    pub fn lipschitz(&self) -> f64 {
        self.nonlinearity.lipschitz()
    }

    pub fn c1(&self) -> f64 {
        self.nonlinearity.c1()
    }

    /// The same equation with `f = 0`.
    pub fn linear(&self) -> RdeParams {
        RdeParams { nonlinearity: RdeNonlinearity::Zero, ..self.clone() }
    }

    /// Per-mode constants `a + n^2`.
    pub fn mode_constants(&self) -> Vec<f64> {
        (1..=self.num_modes).map(|n| self.a + (n * n) as f64).collect()
    }
}

/// Right-hand side of the modal system.
pub struct RdeSystem {
    params: RdeParams,
    c: Vec<f64>,
    /// `sin(n x_j)` on the interior collocation points, point-major.
    sines: Vec<f64>,
    points: usize,
}

impl RdeSystem {
    pub fn new(params: RdeParams) -> Result<Self> {
        params.validate()?;
        let n = params.num_modes;
        let m = 2 * n + 1;
        let mut sines = vec![0.0; m * n];
        for j in 0..m {
            let x = (j + 1) as f64 * std::f64::consts::PI / (m + 1) as f64;
            for k in 0..n {
                sines[j * n + k] = ((k + 1) as f64 * x).sin();
            }
        }
        let c = params.mode_constants();
        Ok(Self { params, c, sines, points: m })
    }

    pub fn params(&self) -> &RdeParams {
        &self.params
    }

    /// Galerkin projection of `f(u)` where `u` has sine coefficients `y`.
    pub fn project_nonlinearity(&self, y: &[f64], out: &mut [f64]) {
        let n = self.params.num_modes;
        out.iter_mut().for_each(|o| *o = 0.0);
        let scale = 2.0 / (self.points + 1) as f64;
        for j in 0..self.points {
            let row = &self.sines[j * n..(j + 1) * n];
            let u: f64 = row.iter().zip(y).map(|(s, c)| s * c).sum();
            let g = self.params.nonlinearity.eval(u) * scale;
            for k in 0..n {
                out[k] += g * row[k];
            }
        }
    }
}

impl DelaySystem for RdeSystem {
    fn dim(&self) -> usize {
        self.params.num_modes
    }

    fn delay(&self) -> f64 {
        self.params.r
    }

    fn value_norm(&self) -> ValueNorm {
        ValueNorm::SineModal
    }

    fn min_positive_lag(&self) -> f64 {
        self.params.r
    }

    fn rhs(&self, t: f64, current: &[f64], past: &Past<'_>, out: &mut [f64]) {
        let n = self.params.num_modes;
        let mut delayed = vec![0.0; n];
        past.at(t - self.params.r, &mut delayed);
        for k in 0..n {
            out[k] = -self.c[k] * current[k] - self.params.b * delayed[k];
        }
        if !self.params.nonlinearity.is_zero() {
            let mut f = vec![0.0; n];
            self.project_nonlinearity(&delayed, &mut f);
            for k in 0..n {
                out[k] += f[k];
            }
        }
    }

    fn fingerprint(&self) -> String {
        let p = &self.params;
        format!("rde(a={}, b={}, r={}, modes={}, f={:?})", p.a, p.b, p.r, p.num_modes, p.nonlinearity)
    }
}
