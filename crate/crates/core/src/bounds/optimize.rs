//! Search over `(alpha, t0)` for the smallest dimension bound.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::formulas::{eta, fractal_bound, hausdorff_bound, zeta, Bound, SqueezeConstants};
use crate::error::{ensure, Error, Result};

pub const GRID_POINTS: usize = 64;
pub const REFINE_TOL: f64 = 1e-6;
const REFINE_ROUNDS: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    #[default]
    Hausdorff,
    Fractal,
}

impl Target {
    fn constraint(&self) -> &'static str {
        match self {
            Target::Hausdorff => "eta",
            Target::Fractal => "zeta",
        }
    }

    fn contraction(&self, sc: &SqueezeConstants, alpha: f64) -> f64 {
        match self {
            Target::Hausdorff => eta(sc, alpha),
            Target::Fractal => zeta(sc, alpha),
        }
    }

    fn bound(&self, sc: &SqueezeConstants, alpha: f64) -> Result<Bound> {
        match self {
            Target::Hausdorff => hausdorff_bound(sc, alpha),
            Target::Fractal => fractal_bound(sc, alpha),
        }
    }
}

/// One evaluation of the objective.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GridCell {
    pub alpha: f64,
    pub t0: f64,
    /// `eta` or `zeta` at this point; NaN if the constants were unavailable.
    pub constraint: f64,
    pub bound: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Optimum {
    pub alpha: f64,
    pub t0: f64,
    pub bound: f64,
    pub constraint: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OptimizeReport {
    pub target: Target,
    pub optimum: Option<Optimum>,
    /// Smallest `eta` or `zeta` seen on the grid, and where.
    pub min_constraint: f64,
    pub min_constraint_at: (f64, f64),
    pub grid: Vec<GridCell>,
}

impl OptimizeReport {
    /// Infeasibility summary when no grid point satisfied the constraint.
    pub fn infeasibility(&self) -> Option<String> {
        self.optimum.is_none().then(|| {
            format!(
                "no feasible (alpha, t0): minimum {} = {:.6e} at alpha = {:.6}, t0 = {:.6}",
                self.target.constraint(),
                self.min_constraint,
                self.min_constraint_at.0,
                self.min_constraint_at.1
            )
        })
    }

    /// Rows `alpha, t0, constraint, bound` (bound empty where infeasible).
    pub fn write_grid_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["alpha", "t0", "constraint", "bound"])?;
        for c in &self.grid {
            wtr.write_record(&[
                format!("{:.10e}", c.alpha),
                format!("{:.10e}", c.t0),
                format!("{:.10e}", c.constraint),
                c.bound.map(|b| format!("{b:.10e}")).unwrap_or_default(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

fn check_range(name: &str, (lo, hi): (f64, f64)) -> Result<()> {
    ensure(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo < hi, || {
        format!("{name} range must satisfy 0 < lo < hi, got [{lo}, {hi}]")
    })
}

/// Cell-centred points of `[lo, hi]`.
fn axis((lo, hi): (f64, f64), n: usize) -> Vec<f64> {
    let h = (hi - lo) / n as f64;
    (0..n).map(|i| lo + (i as f64 + 0.5) * h).collect()
}

fn evaluate<F>(constants: &F, target: Target, alpha: f64, t0: f64) -> GridCell
where
    F: Fn(f64) -> Result<SqueezeConstants> + Sync,
{
    let mut cell = GridCell { alpha, t0, constraint: f64::NAN, bound: None };
    if let Ok(sc) = constants(t0) {
        let sc = sc.with_t0(t0);
        cell.constraint = target.contraction(&sc, alpha);
        if let Ok(Bound::Feasible(v)) = target.bound(&sc, alpha) {
            cell.bound = Some(v);
        }
    }
    cell
}

fn objective(cell: &GridCell) -> f64 {
    cell.bound.unwrap_or(f64::INFINITY)
}

/// Golden-section minimisation of `f` on `[lo, hi]` down to width `tol`.
/// Returns NaN for the location if `f` is infinite throughout.
fn golden(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    let (lo0, hi0) = (lo, hi);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        }
    }
    // Optima on the range edge are common; golden section only approaches them.
    [(x1, f1), (x2, f2), (lo0, f(lo0)), (hi0, f(hi0))]
        .into_iter()
        .fold((f64::NAN, f64::INFINITY), |best, c| if c.1 < best.1 { c } else { best })
}

fn pick_finite((x, fx): (f64, f64), fallback: f64) -> f64 {
    if fx.is_finite() {
        x
    } else {
        fallback
    }
}

/// Minimises the chosen bound over `alpha` in `alpha_range` and `t0` in
/// `t0_range`. `constants(t0)` supplies the squeeze constants at each `t0`
/// (its `t0` field is overwritten); an error there marks the point
/// inadmissible.
///
/// A 64 x 64 grid is evaluated in parallel, then the best cell is refined by
/// alternating golden-section searches within one grid cell in each
/// coordinate. The refined point replaces the grid point only if it is
/// better.
pub fn optimize_bound<F>(
    constants: F,
    alpha_range: (f64, f64),
    t0_range: (f64, f64),
    target: Target,
) -> Result<OptimizeReport>
where
    F: Fn(f64) -> Result<SqueezeConstants> + Sync,
{
    check_range("alpha", alpha_range)?;
    check_range("t0", t0_range)?;
    let alphas = axis(alpha_range, GRID_POINTS);
    let t0s = axis(t0_range, GRID_POINTS);
    let grid: Vec<GridCell> = (0..GRID_POINTS * GRID_POINTS)
        .into_par_iter()
        .map(|idx| evaluate(&constants, target, alphas[idx % GRID_POINTS], t0s[idx / GRID_POINTS]))
        .collect();

    let mut min_constraint = f64::INFINITY;
    let mut min_constraint_at = (f64::NAN, f64::NAN);
    let mut best: Option<GridCell> = None;
    for cell in &grid {
        if cell.constraint < min_constraint {
            min_constraint = cell.constraint;
            min_constraint_at = (cell.alpha, cell.t0);
        }
        if cell.bound.is_some() && best.is_none_or(|b| objective(cell) < objective(&b)) {
            best = Some(*cell);
        }
    }
    if grid.iter().all(|c| c.constraint.is_nan()) {
        return Err(Error::Precondition("squeeze constants unavailable on the whole t0 range".into()));
    }

    let optimum = best.map(|start| {
        let ha = (alpha_range.1 - alpha_range.0) / GRID_POINTS as f64;
        let ht = (t0_range.1 - t0_range.0) / GRID_POINTS as f64;
        let (mut a, mut t) = (start.alpha, start.t0);
        for _ in 0..REFINE_ROUNDS {
            let lo = (a - ha).max(alpha_range.0);
            let hi = (a + ha).min(alpha_range.1);
            a = pick_finite(golden(|x| objective(&evaluate(&constants, target, x, t)), lo, hi, REFINE_TOL), a);
            let lo = (t - ht).max(t0_range.0);
            let hi = (t + ht).min(t0_range.1);
            t = pick_finite(golden(|x| objective(&evaluate(&constants, target, a, x)), lo, hi, REFINE_TOL), t);
        }
        let refined = evaluate(&constants, target, a, t);
        let pick = if objective(&refined) < objective(&start) { refined } else { start };
        Optimum { alpha: pick.alpha, t0: pick.t0, bound: objective(&pick), constraint: pick.constraint }
    });
    Ok(OptimizeReport { target, optimum, min_constraint, min_constraint_at, grid })
}

/// Constants that do not depend on `t0`.
pub fn fixed(sc: SqueezeConstants) -> impl Fn(f64) -> Result<SqueezeConstants> + Sync {
    move |t0| Ok(sc.with_t0(t0))
}
