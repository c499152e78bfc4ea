//! Squeezing constants and absorbing-set estimates for the two model
//! equations, and the closed forms of their `m = 1` bounds.

use serde::{Deserialize, Serialize};

use super::formulas::SqueezeConstants;
use crate::error::{ensure, ensure_finite, Error, Result};
use crate::sim::DichotomyInputs;
use crate::spectral::SpectralDecomposition;

/// Which value of `M1` to use. The derivation supports the spectral-gap
/// ratio (RDE) or `K0 + K` (RFDE); `Statement` uses the constant 2.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum M1Choice {
    #[default]
    Derived,
    Statement,
}

/// Constants for the reaction-diffusion equation at the decomposition's cut.
///
/// Needs a fitted dichotomy constant and `rho_{m+1}` in the spectrum.
pub fn rde_constants(
    decomp: &SpectralDecomposition,
    lipschitz: f64,
    t0: f64,
    m1: M1Choice,
) -> Result<SqueezeConstants> {
    ensure_finite("lipschitz", lipschitz)?;
    ensure(lipschitz >= 0.0, || format!("lipschitz constant must be nonnegative, got {lipschitz}"))?;
    let m = decomp.m();
    let spectrum = decomp.spectrum();
    let rho1 = spectrum.rho(1).ok_or_else(|| Error::Precondition("empty spectrum".into()))?;
    let rho_m = spectrum.rho(m).ok_or_else(|| Error::Precondition(format!("spectrum has no level {m}")))?;
    let k_m = spectrum.k(m).unwrap_or(0);
    let k = decomp
        .dichotomy()
        .ok_or_else(|| Error::Precondition("dichotomy constant K has not been fitted".into()))?
        .k_fit;
    let m1 = match m1 {
        M1Choice::Statement => 2.0,
        M1Choice::Derived => {
            let rho_next = spectrum.rho(m + 1).ok_or_else(|| {
                Error::Precondition(format!("spectrum must contain level {} for the gap ratio", m + 1))
            })?;
            rho_m.abs() / rho_next.abs()
        }
    };
    Ok(SqueezeConstants {
        m1,
        m2: k,
        m3: rde_m3(k, lipschitz, rho1, rho_m)?,
        lambda0: lipschitz + rho1,
        lambda1: rho_m,
        rank: k_m,
        t0,
    })
}

/// `K L_f / (rho_1 + L_f - rho_m)`, zero when `L_f = 0`.
pub fn rde_m3(k: f64, lipschitz: f64, rho1: f64, rho_m: f64) -> Result<f64> {
    if lipschitz == 0.0 {
        return Ok(0.0);
    }
    let den = rho1 + lipschitz - rho_m;
    if !(den > 0.0) {
        return Err(Error::Precondition(format!("M3 denominator rho_1 + L_f - rho_m = {den} must be positive")));
    }
    Ok(k * lipschitz / den)
}

/// Constants for the RFDE from user-supplied dichotomy data.
pub fn rfde_constants(d: &DichotomyInputs, lipschitz: f64, t0: f64, m1: M1Choice) -> Result<SqueezeConstants> {
    d.validate().map_err(|e| Error::Precondition(e.to_string()))?;
    ensure_finite("lipschitz", lipschitz)?;
    ensure(lipschitz >= 0.0, || format!("lipschitz constant must be nonnegative, got {lipschitz}"))?;
    let m3 = if lipschitz == 0.0 {
        0.0
    } else {
        let den = -d.beta - d.gamma + lipschitz * d.k0;
        ensure(den > 0.0, || format!("M3 denominator -beta - gamma + L_f K0 = {den} must be positive"))?;
        d.k * lipschitz * d.k0 / den
    };
    Ok(SqueezeConstants {
        m1: match m1 {
            M1Choice::Derived => d.k0 + d.k,
            M1Choice::Statement => 2.0,
        },
        m2: d.k,
        m3,
        lambda0: lipschitz * d.k0 - d.gamma,
        lambda1: d.beta,
        rank: d.m,
        t0,
    })
}

fn check_absorbing(k0: f64, gamma: f64, lipschitz: f64, f0: f64) -> Result<()> {
    for (name, x) in [("k0", k0), ("gamma", gamma), ("lipschitz", lipschitz), ("f0", f0)] {
        ensure_finite(name, x)?;
    }
    ensure(k0 > 0.0 && k0 < 1.0, || format!("need 0 < K0 < 1, got {k0}"))?;
    ensure(gamma > 0.0, || format!("gamma must be positive, got {gamma}"))?;
    ensure(lipschitz >= 0.0 && f0 >= 0.0, || "L_f and ||f(0)|| must be nonnegative".into())?;
    ensure(k0 * lipschitz < gamma, || format!("need K0 L_f < gamma, got {} >= {gamma}", k0 * lipschitz))
}

/// Radius `(K0 f0 / gamma + 1 / (gamma - K0 L_f)) / (1 - K0)` of the RFDE
/// absorbing ball.
pub fn absorbing_radius(k0: f64, gamma: f64, lipschitz: f64, f0: f64) -> Result<f64> {
    check_absorbing(k0, gamma, lipschitz, f0)?;
    Ok((k0 * f0 / gamma + 1.0 / (gamma - k0 * lipschitz)) / (1.0 - k0))
}

/// Time after which a ball of radius `r_d` has entered the absorbing ball:
/// `ln(r_d gamma (1 - K0)(gamma - K0 L_f) / (K0 f0 (gamma - K0 L_f) + gamma)) / gamma`,
/// clamped at zero.
pub fn absorbing_time(r_d: f64, k0: f64, gamma: f64, lipschitz: f64, f0: f64) -> Result<f64> {
    check_absorbing(k0, gamma, lipschitz, f0)?;
    ensure(r_d > 0.0, || format!("bounded-set radius must be positive, got {r_d}"))?;
    let g = gamma - k0 * lipschitz;
    let arg = r_d * gamma * (1.0 - k0) * g / (k0 * f0 * g + gamma);
    Ok((arg.ln() / gamma).max(0.0))
}

/// Parameters of the RDE norm envelope.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvelopeParams {
    pub a: f64,
    pub lipschitz: f64,
    pub delta: f64,
    pub c1: f64,
    pub r: f64,
}

impl EnvelopeParams {
    pub fn validate(&self) -> Result<()> {
        for (name, x) in [("a", self.a), ("lipschitz", self.lipschitz), ("delta", self.delta), ("c1", self.c1), ("r", self.r)]
        {
            ensure_finite(name, x)?;
        }
        ensure(self.delta > self.a, || format!("need delta > a, got delta={} a={}", self.delta, self.a))?;
        let d = self.a - self.lipschitz * (self.delta * self.r).exp();
        ensure(d != 0.0, || "a must differ from L_f e^{delta r}".into())
    }

    /// `a - L_f e^{delta r}`; positive means the envelope decays.
    pub fn gap(&self) -> f64 {
        self.a - self.lipschitz * (self.delta * self.r).exp()
    }

    /// Limit of the envelope as `t -> inf` when the gap is positive.
    pub fn limit(&self) -> Option<f64> {
        let g = self.gap();
        (g > 0.0).then(|| self.c1 * (self.delta * self.r).exp() / g)
    }
}

/// `c1 e^{dr}/g + e^{dr} (||phi|| - c1/g) e^{-g t}` with
/// `g = a - L_f e^{dr}`.
pub fn rde_absorbing_envelope(t: f64, phi_norm: f64, p: &EnvelopeParams) -> Result<f64> {
    p.validate()?;
    ensure_finite("t", t)?;
    ensure_finite("phi_norm", phi_norm)?;
    let e = (p.delta * p.r).exp();
    let g = p.gap();
    Ok(p.c1 * e / g + e * (phi_norm - p.c1 / g) * (-g * t).exp())
}

/// The `m = 1`, `k_1 = 1` Hausdorff bound for the RDE:
/// `-ln(2 + 4/alpha) / ln(alpha |rho1|/|rho2| e^{(L_f+rho1) t0} + 2K e^{rho1 t0} + 2K e^{(L_f+rho1) t0})`.
///
/// The last term is `2 M3 e^{lambda0 t0}` with `M3 = K L_f / L_f`, so `L_f`
/// must be positive. `None` when the contraction constraint fails.
pub fn rde_hausdorff_m1(alpha: f64, rho1: f64, rho2: f64, lipschitz: f64, k: f64, t0: f64) -> Option<f64> {
    let e0 = ((lipschitz + rho1) * t0).exp();
    let den = alpha * (rho1.abs() / rho2.abs()) * e0 + 2.0 * k * (rho1 * t0).exp() + 2.0 * k * e0;
    (alpha > 0.0 && alpha < 2.0 && den < 1.0).then(|| -(2.0 + 4.0 / alpha).ln() / den.ln())
}

/// The `m = 1`, `k_1 = 1` fractal bound for the RDE:
/// `ln(2 + 2|rho1|/(alpha |rho2|)) / -ln((alpha + K) e^{(L_f+rho1) t0} + K e^{rho1 t0})`.
pub fn rde_fractal_m1(alpha: f64, rho1: f64, rho2: f64, lipschitz: f64, k: f64, t0: f64) -> Option<f64> {
    let zeta = (alpha + k) * ((lipschitz + rho1) * t0).exp() + k * (rho1 * t0).exp();
    let admissible = alpha > 0.0 && alpha < rho1.abs() / rho2.abs();
    (admissible && zeta < 1.0).then(|| (2.0 + 2.0 * rho1.abs() / (alpha * rho2.abs())).ln() / -zeta.ln())
}

/// The `m = 1` Hausdorff bound for the RFDE with `M3 = K L_f K0 / (L_f K0 - gamma - beta)`.
pub fn rfde_hausdorff_m1(alpha: f64, d: &DichotomyInputs, lipschitz: f64, t0: f64) -> Option<f64> {
    let l0 = lipschitz * d.k0 - d.gamma;
    let m3 = d.k * lipschitz * d.k0 / (lipschitz * d.k0 - d.gamma - d.beta);
    let den = alpha * (d.k0 + d.k) * (l0 * t0).exp() + 2.0 * d.k * (d.beta * t0).exp() + 2.0 * m3 * (l0 * t0).exp();
    (alpha > 0.0 && alpha < 2.0 && den < 1.0).then(|| -(2.0 + 4.0 / alpha).ln() / den.ln())
}

/// The `m = 1` fractal bound for the RFDE:
/// `ln(2 + 2(K0 + K)/alpha) / -ln zeta`.
pub fn rfde_fractal_m1(alpha: f64, d: &DichotomyInputs, lipschitz: f64, t0: f64) -> Option<f64> {
    let l0 = lipschitz * d.k0 - d.gamma;
    let m3 = d.k * lipschitz * d.k0 / (lipschitz * d.k0 - d.gamma - d.beta);
    let zeta = alpha * (l0 * t0).exp() + d.k * (d.beta * t0).exp() + m3 * (l0 * t0).exp();
    let admissible = alpha > 0.0 && alpha < d.k0 + d.k;
    (admissible && zeta < 1.0).then(|| (2.0 + 2.0 * (d.k0 + d.k) / alpha).ln() / -zeta.ln())
}
