use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The constants of the squeezing property and the projection rank.
///
/// `||P w_t|| <= m1 e^{lambda0 t} ||w_0||` and
/// `||Q w_t|| <= (m2 e^{lambda1 t} + m3 e^{lambda0 t}) ||w_0||` at `t = t0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SqueezeConstants {
    pub m1: f64,
    pub m2: f64,
    pub m3: f64,
    pub lambda0: f64,
    pub lambda1: f64,
    /// Rank of the projection, written Λ in the bounds.
    #[serde(alias = "Lambda")]
    pub rank: usize,
    pub t0: f64,
}

impl SqueezeConstants {
    /// `m1, m2 > 0`, `m3 >= 0` (zero for a linear equation), `rank >= 1`,
    /// `t0 > 0`, everything finite.
    pub fn validate(&self) -> Result<()> {
        let vals = [self.m1, self.m2, self.m3, self.lambda0, self.lambda1, self.t0];
        if vals.iter().any(|x| !x.is_finite()) {
            return Err(Error::Malformed(format!("non-finite squeeze constant in {self:?}")));
        }
        if !(self.m1 > 0.0 && self.m2 > 0.0 && self.m3 >= 0.0) {
            return Err(Error::Precondition(format!(
                "need m1, m2 > 0 and m3 >= 0, got {}, {}, {}",
                self.m1, self.m2, self.m3
            )));
        }
        if self.rank == 0 {
            return Err(Error::Precondition("projection rank must be at least 1".into()));
        }
        if !(self.t0 > 0.0) {
            return Err(Error::Precondition(format!("t0 must be positive, got {}", self.t0)));
        }
        Ok(())
    }

    pub fn with_t0(self, t0: f64) -> Self {
        Self { t0, ..self }
    }

    /// Whether `lambda1 < lambda0`; reported, never required.
    pub fn rates_ordered(&self) -> bool {
        self.lambda1 < self.lambda0
    }

    fn e0(&self) -> f64 {
        (self.lambda0 * self.t0).exp()
    }

    fn e1(&self) -> f64 {
        (self.lambda1 * self.t0).exp()
    }
}

/// Why a bound could not be evaluated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Infeasibility {
    pub constraint: String,
    pub value: f64,
    /// `value - 1`: how far the contraction condition misses.
    pub excess: f64,
}

/// A dimension bound or the reason there is none.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bound {
    Feasible(f64),
    Infeasible(Infeasibility),
}

impl Bound {
    pub fn value(&self) -> Option<f64> {
        match self {
            Bound::Feasible(v) => Some(*v),
            Bound::Infeasible(_) => None,
        }
    }

    fn from_ratio(constraint: &str, contraction: f64, numerator: f64, denominator: f64) -> Bound {
        if contraction < 1.0 {
            Bound::Feasible(numerator / denominator)
        } else {
            Bound::Infeasible(Infeasibility {
                constraint: constraint.to_string(),
                value: contraction,
                excess: contraction - 1.0,
            })
        }
    }
}

/// `eta = alpha M1 e^{l0 t0} + 2 M2 e^{l1 t0} + 2 M3 e^{l0 t0}`.
pub fn eta(sc: &SqueezeConstants, alpha: f64) -> f64 {
    alpha * sc.m1 * sc.e0() + 2.0 * sc.m2 * sc.e1() + 2.0 * sc.m3 * sc.e0()
}

/// `zeta = alpha e^{l0 t0} + M2 e^{l1 t0} + M3 e^{l0 t0}`.
pub fn zeta(sc: &SqueezeConstants, alpha: f64) -> f64 {
    alpha * sc.e0() + sc.m2 * sc.e1() + sc.m3 * sc.e0()
}

fn check_alpha_hausdorff(alpha: f64) -> Result<()> {
    // The closed endpoint reproduces the alpha-free form exactly.
    if alpha > 0.0 && alpha <= 2.0 {
        Ok(())
    } else {
        Err(Error::Precondition(format!("alpha must lie in (0, 2], got {alpha}")))
    }
}

fn check_alpha_fractal(sc: &SqueezeConstants, alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < sc.m1 {
        Ok(())
    } else {
        Err(Error::Precondition(format!("alpha must lie in (0, M1) = (0, {}), got {alpha}", sc.m1)))
    }
}

/// Hausdorff bound `(-ln L - L ln(2 + 4/alpha)) / ln eta`, feasible when
/// `eta < 1`.
pub fn hausdorff_bound(sc: &SqueezeConstants, alpha: f64) -> Result<Bound> {
    sc.validate()?;
    check_alpha_hausdorff(alpha)?;
    let lam = sc.rank as f64;
    let e = eta(sc, alpha);
    Ok(Bound::from_ratio("eta < 1", e, -lam.ln() - lam * (2.0 + 4.0 / alpha).ln(), e.ln()))
}

/// Fractal bound `(ln L + L ln(2 + 2 M1/alpha)) / (-ln zeta)`, feasible
/// when `zeta < 1`.
pub fn fractal_bound(sc: &SqueezeConstants, alpha: f64) -> Result<Bound> {
    sc.validate()?;
    check_alpha_fractal(sc, alpha)?;
    let lam = sc.rank as f64;
    let z = zeta(sc, alpha);
    Ok(Bound::from_ratio("zeta < 1", z, lam.ln() + lam * (2.0 + 2.0 * sc.m1 / alpha).ln(), -z.ln()))
}

/// The alpha-free Hausdorff form obtained as `alpha -> 2`:
/// `(-ln L - L ln 4) / ln(2 M1 e^{l0 t0} + 2 M2 e^{l1 t0} + 2 M3 e^{l0 t0})`.
pub fn hausdorff_alpha_free(sc: &SqueezeConstants) -> Result<Bound> {
    sc.validate()?;
    let lam = sc.rank as f64;
    let d = 2.0 * sc.m1 * sc.e0() + 2.0 * sc.m2 * sc.e1() + 2.0 * sc.m3 * sc.e0();
    Ok(Bound::from_ratio("eta(2) < 1", d, -lam.ln() - lam * 4f64.ln(), d.ln()))
}

/// The alpha-free fractal form obtained as `alpha -> M1`:
/// `(ln L + L ln 4) / -ln(M1 e^{l0 t0} + M2 e^{l1 t0} + M3 e^{l0 t0})`.
pub fn fractal_alpha_free(sc: &SqueezeConstants) -> Result<Bound> {
    sc.validate()?;
    let lam = sc.rank as f64;
    let d = sc.m1 * sc.e0() + sc.m2 * sc.e1() + sc.m3 * sc.e0();
    Ok(Bound::from_ratio("zeta(M1) < 1", d, lam.ln() + lam * 4f64.ln(), -d.ln()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    #[default]
    Autonomous,
    Nonautonomous,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub eta: f64,
    pub zeta: f64,
    pub hausdorff: Option<f64>,
    pub fractal: Option<f64>,
    pub alpha_used: f64,
    pub hausdorff_feasible: bool,
    pub fractal_feasible: bool,
    /// One entry per bound that could not be evaluated.
    pub reasons: Vec<String>,
    pub rates_ordered: bool,
    pub variant: Variant,
}

impl BoundReport {
    pub fn any_feasible(&self) -> bool {
        self.hausdorff_feasible || self.fractal_feasible
    }
}

/// Evaluates both bounds at one `alpha`. An `alpha` outside a bound's
/// admissible interval makes that bound infeasible rather than an error.
pub fn bound_report(sc: &SqueezeConstants, alpha: f64, variant: Variant) -> Result<BoundReport> {
    sc.validate()?;
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::Precondition(format!("alpha must be positive, got {alpha}")));
    }
    let mut reasons = Vec::new();
    let mut eval = |name: &str, r: Result<Bound>| match r {
        Ok(Bound::Feasible(v)) => Some(v),
        Ok(Bound::Infeasible(i)) => {
            reasons.push(format!("{name}: {} fails, value {:.6e} (excess {:.3e})", i.constraint, i.value, i.excess));
            None
        }
        Err(e) => {
            reasons.push(format!("{name}: {e}"));
            None
        }
    };
    let hausdorff = eval("hausdorff", hausdorff_bound(sc, alpha));
    let fractal = eval("fractal", fractal_bound(sc, alpha));
    Ok(BoundReport {
        eta: eta(sc, alpha),
        zeta: zeta(sc, alpha),
        hausdorff,
        fractal,
        alpha_used: alpha,
        hausdorff_feasible: hausdorff.is_some(),
        fractal_feasible: fractal.is_some(),
        reasons,
        rates_ordered: sc.rates_ordered(),
        variant,
    })
}

/// Bounds for an autonomous semigroup.
pub fn autonomous_bounds(sc: &SqueezeConstants, alpha: f64) -> Result<BoundReport> {
    bound_report(sc, alpha, Variant::Autonomous)
}

/// Bounds for an evolution process; `t0` plays the role of the uniform
/// squeezing time. The formulas coincide with the autonomous ones.
pub fn nonautonomous_bounds(sc: &SqueezeConstants, alpha: f64) -> Result<BoundReport> {
    bound_report(sc, alpha, Variant::Nonautonomous)
}
