//! Spectral splitting of the linear delay semigroup: eigenbasis of the
//! leading levels, the projections `P` and `Q = I - P`, and an empirically
//! fitted dichotomy constant.
//!
//! Each value component evolves by its own scalar equation
//! `x' = -c x(t) - b x(t - r)`, so the projection is assembled mode by mode
//! from the bilinear form
//! `<psi, phi> = psi(0) phi(0) - b int_{-r}^0 psi(s + r) phi(s) ds`
//! with `psi(s) = exp(-lambda s)` dual to `phi(s) = exp(lambda s)`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::charroots::{characteristic, characteristic_derivative, SpectrumTable};
use crate::error::{Error, Result};
use crate::history::{quadrature_weights, GridSpec, HistorySegment, ValueNorm};
use crate::sim::{Flow, RdeParams, RfdeParams};

/// Roots with `|1 - b r exp(-lambda r)|` below this are treated as defective.
pub const DEFECT_TOL: f64 = 1e-8;
/// Factor applied to the largest observed ratio when fitting K.
pub const K_SAFETY: f64 = 1.1;
const PROBE_BLOCK: usize = 8;

/// The decoupled linear part: component `j` obeys
/// `x' = -constants[j] x(t) - b x(t - delay)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DelayModes {
    pub delay: f64,
    pub b: f64,
    pub constants: Vec<f64>,
    pub norm: ValueNorm,
}

impl DelayModes {
    pub fn from_rde(p: &RdeParams) -> Self {
        Self { delay: p.r, b: p.b, constants: p.mode_constants(), norm: ValueNorm::SineModal }
    }

    /// Scalar RFDE `u' = -c u(t) - b u(t - r) + f`; `None` for other shapes.
    pub fn from_rfde(p: &RfdeParams) -> Option<Self> {
        let (c, b) = p.scalar_modes()?;
        Some(Self { delay: p.r, b, constants: vec![c], norm: ValueNorm::Euclidean })
    }

    /// Component index holding roots tagged with `mode`.
    fn component(mode: usize) -> usize {
        mode.saturating_sub(1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Part {
    P,
    Q,
}

/// Projection data for one value component.
#[derive(Clone, Debug)]
struct ModeBlock {
    component: usize,
    /// Real basis functions sampled on the grid.
    functions: Vec<Vec<f64>>,
    /// Rows mapping node values to basis coefficients.
    coefficients: Vec<Vec<f64>>,
}

/// Result of fitting `||U(t) Q x|| <= K e^{rho_m t} ||x||`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DichotomyFit {
    pub k_fit: f64,
    /// Headroom added by the safety factor.
    pub k_margin: f64,
    /// Larger of `random_ratio` and `probe_ratio`; `k_fit` is this times the
    /// safety factor.
    pub max_ratio: f64,
    /// Largest ratio over the random trials.
    pub random_ratio: f64,
    /// Largest ratio attainable by a sign segment in one component.
    pub probe_ratio: f64,
    pub rate: f64,
    pub trials: usize,
    pub horizon: f64,
}

#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    spectrum: SpectrumTable,
    m: usize,
    grid: GridSpec,
    modes: DelayModes,
    basis: Vec<HistorySegment>,
    blocks: Vec<ModeBlock>,
    dichotomy: Option<DichotomyFit>,
}

fn real_parts(z: Complex64, pair: bool) -> Vec<f64> {
    if pair {
        vec![z.re, z.im]
    } else {
        vec![z.re]
    }
}

/// Builds the splitting at cut `m` (the first `m` distinct real parts).
pub fn build_decomposition(
    spectrum: &SpectrumTable,
    m: usize,
    modes: &DelayModes,
    grid: GridSpec,
) -> Result<SpectralDecomposition> {
    let k_m = spectrum
        .k(m)
        .ok_or_else(|| Error::Precondition(format!("cut m={m} exceeds the {} spectral levels", spectrum.len())))?;
    if m == 0 {
        return Err(Error::Precondition("cut index m starts at 1".into()));
    }
    if (grid.delay() - modes.delay).abs() > 1e-12 * modes.delay {
        return Err(Error::Mismatch("grid delay differs from the equation delay".into()));
    }
    if grid.value_dim() != modes.constants.len() {
        return Err(Error::Mismatch(format!(
            "grid has {} components, equation has {}",
            grid.value_dim(),
            modes.constants.len()
        )));
    }
    let (r, b) = (modes.delay, modes.b);
    let nodes = grid.num_nodes();
    let h = grid.spacing();
    let weights = quadrature_weights(nodes, h);

    // Group leading roots by component, preserving table order.
    let mut per_component: Vec<Vec<(Complex64, bool)>> = vec![Vec::new(); grid.value_dim()];
    for root in spectrum.leading_roots(m) {
        let comp = DelayModes::component(root.mode);
        let c = *modes.constants.get(comp).ok_or_else(|| {
            Error::Mismatch(format!("root of mode {} has no matching component", root.mode))
        })?;
        let lambda = root.value;
        if characteristic(c, b, r, lambda).norm() > 1e-8 * (1.0 + lambda.norm()) {
            return Err(Error::Mismatch(format!("root {lambda} does not solve mode {}'s equation", root.mode)));
        }
        let deriv = characteristic_derivative(b, r, lambda);
        if root.multiplicity > 1 || deriv.norm() < DEFECT_TOL {
            return Err(Error::DegenerateRoot { re: lambda.re, im: lambda.im, derivative: deriv.norm() });
        }
        per_component[comp].push((lambda, root.conjugate_pair));
    }

    let mut blocks = Vec::new();
    let mut basis = Vec::new();
    for (comp, roots) in per_component.iter().enumerate() {
        if roots.is_empty() {
            continue;
        }
        let mut functions: Vec<Vec<f64>> = Vec::new();
        let mut duals: Vec<Vec<f64>> = Vec::new();
        for &(lambda, pair) in roots {
            let count = if pair { 2 } else { 1 };
            let mut f_rows = vec![vec![0.0; nodes]; count];
            let mut d_rows = vec![vec![0.0; nodes]; count];
            for k in 0..nodes {
                let theta = grid.node(k);
                let phi = (lambda * theta).exp();
                for (row, v) in f_rows.iter_mut().zip(real_parts(phi, pair)) {
                    row[k] = v;
                }
                let psi = (-lambda * (theta + r)).exp();
                for (row, v) in d_rows.iter_mut().zip(real_parts(psi, pair)) {
                    row[k] -= b * weights[k] * v;
                }
            }
            // psi(0) = 1: only the real part picks up the point term.
            d_rows[0][nodes - 1] += 1.0;
            for row in &mut f_rows {
                let s = row.iter().fold(0.0f64, |a, x| a.max(x.abs()));
                row.iter_mut().for_each(|x| *x /= s);
            }
            functions.extend(f_rows);
            duals.extend(d_rows);
        }
        let k = functions.len();
        let gram = DMatrix::from_fn(k, k, |i, j| duals[i].iter().zip(&functions[j]).map(|(a, b)| a * b).sum());
        let d = DMatrix::from_fn(k, nodes, |i, j| duals[i][j]);
        let lu = gram.clone().lu();
        let solved = lu.solve(&d).ok_or_else(|| Error::DegenerateRoot {
            re: roots[0].0.re,
            im: roots[0].0.im,
            derivative: 0.0,
        })?;
        let coefficients = (0..k).map(|i| solved.row(i).iter().copied().collect()).collect();
        for f in &functions {
            let mut seg = HistorySegment::zeros(grid, modes.norm);
            let dim = grid.value_dim();
            for (node, v) in f.iter().enumerate() {
                seg.values_mut()[node * dim + comp] = *v;
            }
            basis.push(seg);
        }
        blocks.push(ModeBlock { component: comp, functions, coefficients });
    }
    if basis.len() != k_m {
        return Err(Error::Numerical(format!("basis has {} elements, expected k_m = {k_m}", basis.len())));
    }
    Ok(SpectralDecomposition {
        spectrum: spectrum.clone(),
        m,
        grid,
        modes: modes.clone(),
        basis,
        blocks,
        dichotomy: None,
    })
}

impl SpectralDecomposition {
    pub fn spectrum(&self) -> &SpectrumTable {
        &self.spectrum
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn modes(&self) -> &DelayModes {
        &self.modes
    }

    pub fn value_norm(&self) -> ValueNorm {
        self.modes.norm
    }

    pub fn basis(&self) -> &[HistorySegment] {
        &self.basis
    }

    /// Rank of `P`.
    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    pub fn rho(&self, i: usize) -> Option<f64> {
        self.spectrum.rho(i)
    }

    pub fn dichotomy(&self) -> Option<&DichotomyFit> {
        self.dichotomy.as_ref()
    }

    pub fn with_dichotomy(mut self, fit: DichotomyFit) -> Self {
        self.dichotomy = Some(fit);
        self
    }

    /// `P h` or `Q h = h - P h`.
    pub fn project(&self, h: &HistorySegment, which: Part) -> Result<HistorySegment> {
        if *h.grid() != self.grid || h.value_norm() != self.modes.norm {
            return Err(Error::Mismatch(format!(
                "segment grid {:?} does not match decomposition grid {:?}",
                h.grid(),
                self.grid
            )));
        }
        let dim = self.grid.value_dim();
        let nodes = self.grid.num_nodes();
        let mut p = HistorySegment::zeros(self.grid, self.modes.norm);
        for block in &self.blocks {
            let comp: Vec<f64> = (0..nodes).map(|k| h.values()[k * dim + block.component]).collect();
            for (row, f) in block.coefficients.iter().zip(&block.functions) {
                let a: f64 = row.iter().zip(&comp).map(|(x, y)| x * y).sum();
                let out = p.values_mut();
                for k in 0..nodes {
                    out[k * dim + block.component] += a * f[k];
                }
            }
        }
        match which {
            Part::P => Ok(p),
            Part::Q => h.sub(&p),
        }
    }

    /// Lower estimate of `||P||` from the basis and `samples` random
    /// segments.
    pub fn projection_norm_estimate(&self, samples: usize, seed: u64) -> Result<f64> {
        let mut best: f64 = 0.0;
        for e in &self.basis {
            best = best.max(self.project(e, Part::P)?.sup_norm() / e.sup_norm());
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..samples {
            let h = random_segment(&self.grid, self.modes.norm, &mut rng);
            let n = h.sup_norm();
            if n > 0.0 {
                best = best.max(self.project(&h, Part::P)?.sup_norm() / n);
            }
        }
        Ok(best)
    }

    /// Summary consumed by the bound formulas.
    pub fn summary(&self) -> DecompositionSummary {
        DecompositionSummary {
            m: self.m,
            rank: self.rank(),
            rho_1: self.rho(1).unwrap_or(f64::NAN),
            rho_m: self.rho(self.m).unwrap_or(f64::NAN),
            rho_m_plus_1: self.rho(self.m + 1),
            k_fit: self.dichotomy.map(|d| d.k_fit),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecompositionSummary {
    pub m: usize,
    pub rank: usize,
    pub rho_1: f64,
    pub rho_m: f64,
    pub rho_m_plus_1: Option<f64>,
    pub k_fit: Option<f64>,
}

/// Smooth random segment: a few low Fourier modes in `theta` per
/// component, with amplitudes decaying in the component index.
pub fn random_segment(grid: &GridSpec, norm: ValueNorm, rng: &mut impl Rng) -> HistorySegment {
    let dim = grid.value_dim();
    let r = grid.delay();
    let terms = 4;
    let coeffs: Vec<(f64, f64)> = (0..dim * terms)
        .map(|_| (rng.random_range(-1.0..1.0), rng.random_range(0.0..std::f64::consts::TAU)))
        .collect();
    HistorySegment::from_fn(*grid, norm, |theta, out| {
        for (j, o) in out.iter_mut().enumerate() {
            let amp = 1.0 / ((j + 1) * (j + 1)) as f64;
            *o = (0..terms)
                .map(|k| {
                    let (g, ph) = coeffs[j * terms + k];
                    amp * g / (1 + k) as f64 * (k as f64 * std::f64::consts::PI * (theta + r) / r + ph).cos()
                })
                .sum();
        }
    })
    .expect("finite values")
}

/// Per-trial generator; the stream index makes trials independent of
/// scheduling and of how many trials run.
pub fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

fn check_flow(decomp: &SpectralDecomposition, flow: &dyn Flow) -> Result<()> {
    let g = decomp.grid();
    if flow.value_dim() != g.value_dim() || (flow.delay() - g.delay()).abs() > 1e-12 * g.delay() {
        return Err(Error::Mismatch("flow and decomposition describe different phase spaces".into()));
    }
    if flow.value_norm() != decomp.value_norm() {
        return Err(Error::Mismatch("flow and decomposition use different value norms".into()));
    }
    Ok(())
}

fn restrict(decomp: &SpectralDecomposition, h: HistorySegment, part: Option<Part>) -> Result<HistorySegment> {
    match part {
        Some(p) => decomp.project(&h, p),
        None => Ok(h),
    }
}

/// Largest `||U(t) x|| e^{-rate t} / ||x||` over sampled times for
/// `x = h` or its projection, `h` one random segment.
fn trial_ratio(
    decomp: &SpectralDecomposition,
    flow: &dyn Flow,
    part: Option<Part>,
    rate: f64,
    horizon: f64,
    seed: u64,
    trial: usize,
) -> Result<f64> {
    let mut rng = trial_rng(seed, trial);
    let h = random_segment(decomp.grid(), decomp.value_norm(), &mut rng);
    let x = restrict(decomp, h, part)?;
    let nx = x.sup_norm();
    if nx == 0.0 {
        return Ok(0.0);
    }
    let traj = flow.evolve(&x, horizon)?;
    let nodes = decomp.grid().num_nodes();
    let stride = traj.node_stride(nodes)?;
    let mut worst: f64 = 0.0;
    for k in traj.sample_steps(stride) {
        let t = k as f64 * traj.dt();
        let y = traj.state(k, nodes)?;
        worst = worst.max(y.sup_norm() * (-rate * t).exp() / nx);
    }
    Ok(worst)
}

/// Entrywise sup-to-abs norm of `U(t) Q` (or `U(t)` when `part` is `None`)
/// at each sampled time: entry `(s, i * dim + j)` sums
/// `|(U(t_s) Q e)(node i, component j)|` over all unit node vectors `e`.
/// Each entry is attained by a sign segment.
fn probe_row_sums(
    decomp: &SpectralDecomposition,
    flow: &dyn Flow,
    part: Option<Part>,
    horizon: f64,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let grid = *decomp.grid();
    let (nodes, dim) = (grid.num_nodes(), grid.value_dim());
    let unit = |idx: usize| -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        let mut e = HistorySegment::zeros(grid, decomp.value_norm());
        e.values_mut()[idx] = 1.0;
        let x = restrict(decomp, e, part)?;
        let traj = flow.evolve(&x, horizon)?;
        let stride = traj.node_stride(nodes)?;
        let steps = traj.sample_steps(stride);
        let times = steps.iter().map(|k| *k as f64 * traj.dt()).collect();
        let rows = steps
            .iter()
            .map(|k| Ok(traj.state(*k, nodes)?.values().iter().map(|v| v.abs()).collect()))
            .collect::<Result<_>>()?;
        Ok((times, rows))
    };
    let add = |(t, mut acc): (Vec<f64>, Vec<Vec<f64>>), (_, rows): (Vec<f64>, Vec<Vec<f64>>)| {
        for (a, r) in acc.iter_mut().zip(rows) {
            a.iter_mut().zip(r).for_each(|(x, y)| *x += y);
        }
        (t, acc)
    };
    // Fixed blocks summed in order keep the result independent of scheduling.
    let total = nodes * dim;
    let blocks = (0..total.div_ceil(PROBE_BLOCK))
        .into_par_iter()
        .map(|b| {
            let mut acc = unit(b * PROBE_BLOCK)?;
            for idx in b * PROBE_BLOCK + 1..((b + 1) * PROBE_BLOCK).min(total) {
                acc = add(acc, unit(idx)?);
            }
            Ok(acc)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(blocks.into_iter().reduce(add).expect("grid has nodes"))
}

/// Fits `K` in `||U(t) Q x|| <= K e^{rho_m t} ||x||` over `trials` random
/// stable-part segments, sampled at every grid spacing up to `horizon`.
///
/// Random smooth segments rarely come close to the worst case, so the fit
/// also takes the largest ratio reachable by a sign segment in a single
/// component, computed exactly from the response to every unit node vector.
pub fn fit_dichotomy_k(
    decomp: &SpectralDecomposition,
    flow: &dyn Flow,
    trials: usize,
    horizon: f64,
    seed: u64,
) -> Result<DichotomyFit> {
    let rate = decomp.rho(decomp.m()).expect("cut validated at build");
    fit_ratio(decomp, flow, Some(Part::Q), rate, trials, horizon, seed)
}

/// Fits `K0` in `||U(t) x|| <= K0 e^{rate t} ||x||` over all segments, with
/// the same random and extremal probes as [`fit_dichotomy_k`]. Only the
/// decomposition's grid and norm are used.
pub fn fit_growth_bound(
    decomp: &SpectralDecomposition,
    flow: &dyn Flow,
    rate: f64,
    trials: usize,
    horizon: f64,
    seed: u64,
) -> Result<DichotomyFit> {
    crate::error::ensure_finite("rate", rate)?;
    fit_ratio(decomp, flow, None, rate, trials, horizon, seed)
}

fn fit_ratio(
    decomp: &SpectralDecomposition,
    flow: &dyn Flow,
    part: Option<Part>,
    rate: f64,
    trials: usize,
    horizon: f64,
    seed: u64,
) -> Result<DichotomyFit> {
    check_flow(decomp, flow)?;
    if trials == 0 {
        return Err(Error::Precondition("need at least one trial".into()));
    }
    let ratios: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|i| trial_ratio(decomp, flow, part, rate, horizon, seed, i))
        .collect::<Result<_>>()?;
    let random_ratio = ratios.into_iter().fold(0.0, f64::max);
    let (times, sums) = probe_row_sums(decomp, flow, part, horizon)?;
    let probe_ratio = times
        .iter()
        .zip(&sums)
        .map(|(t, row)| row.iter().fold(0.0f64, |a, v| a.max(*v)) * (-rate * t).exp())
        .fold(0.0, f64::max);
    let max_ratio = random_ratio.max(probe_ratio);
    let k_fit = K_SAFETY * max_ratio;
    Ok(DichotomyFit { k_fit, k_margin: k_fit - max_ratio, max_ratio, random_ratio, probe_ratio, rate, trials, horizon })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DichotomyValidation {
    pub trials: usize,
    pub violations: usize,
    /// Largest observed ratio divided by `K`.
    pub worst_fraction: f64,
}

/// Re-checks a fitted `K` on fresh trials drawn from `seed`.
pub fn validate_dichotomy(
    decomp: &SpectralDecomposition,
    flow: &dyn Flow,
    k: f64,
    trials: usize,
    horizon: f64,
    seed: u64,
) -> Result<DichotomyValidation> {
    check_flow(decomp, flow)?;
    let rate = decomp.rho(decomp.m()).expect("cut validated at build");
    let ratios: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|i| trial_ratio(decomp, flow, Some(Part::Q), rate, horizon, seed, i))
        .collect::<Result<_>>()?;
    let violations = ratios.iter().filter(|x| **x > k).count();
    let worst = ratios.iter().fold(0.0f64, |a, x| a.max(*x));
    Ok(DichotomyValidation { trials, violations, worst_fraction: worst / k })
}

#[cfg(test)]
mod tests;
