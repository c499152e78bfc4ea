//! Linear retarded functional differential equations with discrete delays,
//! a distributed kernel and a saturating nonlinearity:
//! `u'(t) = sum_k A_k u(t - w_k) + int_{-r}^0 A(t, s) u(t + s) ds + f(u_t)`.

use serde::{Deserialize, Serialize};

use super::integrator::{DelaySystem, Past};
use crate::error::{ensure_finite, Error, Result};
use crate::history::{quadrature_weights, ValueNorm};

/// `A_k u(t - lag)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DelayTerm {
    /// Row-major `n x n` matrix.
    pub matrix: Vec<Vec<f64>>,
    pub lag: f64,
}

/// `A(t, s) = matrix * (1 + amplitude cos(frequency t)) * exp(decay s)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Kernel {
    pub matrix: Vec<Vec<f64>>,
    #[serde(default)]
    pub decay: f64,
    #[serde(default)]
    pub amplitude: f64,
    #[serde(default)]
    pub frequency: f64,
}

/// `f(u_t) = kappa tanh(u(t - lag)) + offset`, componentwise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RfdeNonlinearity {
    pub kappa: f64,
    #[serde(default)]
    pub offset: Vec<f64>,
    #[serde(default)]
    pub lag: f64,
}

/// User-supplied dichotomy data: `||S(t, s)|| <= K0 e^{-gamma (t-s)}` and
/// `||S(t, s) Q(s)|| <= K e^{beta (t-s)}` with a rank-`m` projection.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DichotomyInputs {
    pub k0: f64,
    pub gamma: f64,
    pub beta: f64,
    pub k: f64,
    pub m: usize,
}

impl DichotomyInputs {
    pub fn validate(&self) -> Result<()> {
        for (name, x) in [("k0", self.k0), ("gamma", self.gamma), ("beta", self.beta), ("k", self.k)] {
            ensure_finite(name, x)?;
        }
        if !(self.k0 > 0.0 && self.k > 0.0) {
            return Err(Error::Config("dichotomy constants k0 and k must be positive".into()));
        }
        if !(self.gamma > 0.0) {
            return Err(Error::Config(format!("gamma must be positive, got {}", self.gamma)));
        }
        if !(self.beta < -self.gamma) {
            return Err(Error::Config(format!("need beta < -gamma, got beta={} gamma={}", self.beta, self.gamma)));
        }
        if self.m == 0 {
            return Err(Error::Config("projection dimension m must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RfdeParams {
    pub dim: usize,
    /// Length of the history interval.
    pub r: f64,
    #[serde(default)]
    pub terms: Vec<DelayTerm>,
    #[serde(default)]
    pub kernel: Option<Kernel>,
    pub nonlinearity: RfdeNonlinearity,
    #[serde(default)]
    pub dichotomy: Option<DichotomyInputs>,
}

fn check_matrix(name: &str, m: &[Vec<f64>], n: usize) -> Result<()> {
    if m.len() != n || m.iter().any(|row| row.len() != n) {
        return Err(Error::Config(format!("{name} must be {n}x{n}")));
    }
    if m.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::Config(format!("{name} has non-finite entries")));
    }
    Ok(())
}

impl RfdeParams {
    pub fn validate(&self) -> Result<()> {
        ensure_finite("r", self.r)?;
        if self.dim == 0 {
            return Err(Error::Config("rfde.dim must be at least 1".into()));
        }
        if !(self.r > 0.0) {
            return Err(Error::Config(format!("rfde.r must be positive, got {}", self.r)));
        }
        let mut prev = -1.0;
        for (k, term) in self.terms.iter().enumerate() {
            check_matrix(&format!("terms[{k}].matrix"), &term.matrix, self.dim)?;
            if !(term.lag >= 0.0 && term.lag <= self.r * (1.0 + 1e-12)) {
                return Err(Error::Config(format!("terms[{k}].lag must lie in [0, r], got {}", term.lag)));
            }
            if term.lag <= prev {
                return Err(Error::Config("delays must be strictly increasing".into()));
            }
            prev = term.lag;
        }
        if let Some(kernel) = &self.kernel {
            check_matrix("kernel.matrix", &kernel.matrix, self.dim)?;
            for (name, x) in [("decay", kernel.decay), ("amplitude", kernel.amplitude), ("frequency", kernel.frequency)] {
                ensure_finite(name, x)?;
            }
        }
        let f = &self.nonlinearity;
        ensure_finite("kappa", f.kappa)?;
        if !f.offset.is_empty() && f.offset.len() != self.dim {
            return Err(Error::Config(format!("nonlinearity.offset must have {} entries", self.dim)));
        }
        if !(f.lag >= 0.0 && f.lag <= self.r * (1.0 + 1e-12)) {
            return Err(Error::Config(format!("nonlinearity.lag must lie in [0, r], got {}", f.lag)));
        }
        if let Some(d) = &self.dichotomy {
            d.validate()?;
        }
        Ok(())
    }

    pub fn lipschitz(&self) -> f64 {
        self.nonlinearity.kappa.abs()
    }

    /// `||f(0)||`.
    pub fn f0(&self) -> f64 {
        self.nonlinearity.offset.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn linear(&self) -> RfdeParams {
        RfdeParams {
            nonlinearity: RfdeNonlinearity { kappa: 0.0, offset: Vec::new(), lag: self.nonlinearity.lag },
            ..self.clone()
        }
    }

    /// True when no coefficient depends on time.
    pub fn is_autonomous(&self) -> bool {
        self.kernel.as_ref().is_none_or(|k| k.amplitude == 0.0 || k.frequency == 0.0)
    }

    /// For a scalar equation `u' = -c u(t) - b u(t - r) + f`, returns `(c, b)`.
    pub fn scalar_modes(&self) -> Option<(f64, f64)> {
        if self.dim != 1 || self.kernel.is_some() {
            return None;
        }
        let (mut c, mut b) = (0.0, 0.0);
        for term in &self.terms {
            if term.lag == 0.0 {
                c = -term.matrix[0][0];
            } else if (term.lag - self.r).abs() <= 1e-12 * self.r {
                b = -term.matrix[0][0];
            } else {
                return None;
            }
        }
        Some((c, b))
    }
}

pub struct RfdeSystem {
    params: RfdeParams,
    /// Quadrature for the kernel on the step grid, set by `with_step`.
    kernel_nodes: usize,
}

impl RfdeSystem {
    pub fn new(params: RfdeParams) -> Result<Self> {
        params.validate()?;
        Ok(Self { params, kernel_nodes: 0 })
    }

    /// Aligns the kernel quadrature with the integration step.
    pub fn with_step(mut self, dt: f64) -> Result<Self> {
        let spd = super::integrator::steps_per_delay(self.params.r, dt)?;
        self.kernel_nodes = spd + 1;
        Ok(self)
    }

    pub fn params(&self) -> &RfdeParams {
        &self.params
    }
}

fn matvec_add(m: &[Vec<f64>], x: &[f64], scale: f64, out: &mut [f64]) {
    for (row, o) in m.iter().zip(out.iter_mut()) {
        *o += scale * row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
}

impl DelaySystem for RfdeSystem {
    fn dim(&self) -> usize {
        self.params.dim
    }

    fn delay(&self) -> f64 {
        self.params.r
    }

    fn value_norm(&self) -> ValueNorm {
        ValueNorm::Euclidean
    }

    fn min_positive_lag(&self) -> f64 {
        let mut lag = f64::INFINITY;
        for term in &self.params.terms {
            if term.lag > 0.0 {
                lag = lag.min(term.lag);
            }
        }
        if self.params.nonlinearity.lag > 0.0 {
            lag = lag.min(self.params.nonlinearity.lag);
        }
        if self.params.kernel.is_some() && self.kernel_nodes > 1 {
            lag = lag.min(self.params.r / (self.kernel_nodes - 1) as f64);
        }
        lag
    }

    fn rhs(&self, t: f64, current: &[f64], past: &Past<'_>, out: &mut [f64]) {
        let n = self.params.dim;
        out.iter_mut().for_each(|o| *o = 0.0);
        let mut buf = vec![0.0; n];
        for term in &self.params.terms {
            if term.lag == 0.0 {
                matvec_add(&term.matrix, current, 1.0, out);
            } else {
                past.at(t - term.lag, &mut buf);
                matvec_add(&term.matrix, &buf, 1.0, out);
            }
        }
        if let Some(kernel) = &self.params.kernel {
            let q = self.kernel_nodes.max(3);
            let h = self.params.r / (q - 1) as f64;
            let weights = quadrature_weights(q, h);
            let amp = 1.0 + kernel.amplitude * (kernel.frequency * t).cos();
            let mut acc = vec![0.0; n];
            for (j, w) in weights.iter().enumerate() {
                let s = -self.params.r + j as f64 * h;
                let scale = w * (kernel.decay * s).exp();
                if j + 1 == q {
                    acc.iter_mut().zip(current).for_each(|(a, c)| *a += scale * c);
                } else {
                    past.at(t + s, &mut buf);
                    acc.iter_mut().zip(&buf).for_each(|(a, c)| *a += scale * c);
                }
            }
            matvec_add(&kernel.matrix, &acc, amp, out);
        }
        let f = &self.params.nonlinearity;
        if f.kappa != 0.0 || !f.offset.is_empty() {
            let arg: &[f64] = if f.lag == 0.0 {
                current
            } else {
                past.at(t - f.lag, &mut buf);
                &buf
            };
            for i in 0..n {
                out[i] += f.kappa * arg[i].tanh() + f.offset.get(i).copied().unwrap_or(0.0);
            }
        }
    }

    fn fingerprint(&self) -> String {
        let p = &self.params;
        let lags: Vec<f64> = p.terms.iter().map(|t| t.lag).collect();
        format!(
            "rfde(dim={}, r={}, lags={:?}, kernel={}, kappa={}, f0={})",
            p.dim,
            p.r,
            lags,
            p.kernel.is_some(),
            p.nonlinearity.kappa,
            p.f0()
        )
    }
}
