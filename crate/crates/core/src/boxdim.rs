//! Empirical box-counting dimension of sampled attractors.

use std::collections::HashSet;
use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{ensure, Error, Result};
use crate::history::HistorySegment;
use crate::sim::Flow;
use crate::spectral::trial_rng;
use crate::stats::linear_fit;

/// Points closer than this in every coordinate are merged.
pub const DEDUP_RESOLUTION: f64 = 1e-9;
pub const DIAMETER_SUBSAMPLE: usize = 1000;
pub const MIN_R_SQUARED: f64 = 0.98;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AttractorSample {
    /// Row-major, `dim` coordinates per point.
    points: Vec<f64>,
    dim: usize,
    pub transient_dropped: f64,
    pub diameter: f64,
    pub source: String,
}

impl AttractorSample {
    /// Collapses duplicates and computes the diameter.
    pub fn from_points(points: Vec<Vec<f64>>, transient_dropped: f64, source: impl Into<String>) -> Result<Self> {
        ensure(!points.is_empty(), || "an attractor sample needs at least one point".to_string())?;
        let dim = points[0].len();
        ensure(dim > 0 && points.iter().all(|p| p.len() == dim), || "points must share one positive dimension".to_string())?;
        ensure(points.iter().flatten().all(|x| x.is_finite()), || "points must be finite".to_string())?;
        let mut seen = HashSet::new();
        let mut flat = Vec::with_capacity(points.len() * dim);
        for p in points {
            let key: Vec<i64> = p.iter().map(|x| (x / DEDUP_RESOLUTION).round() as i64).collect();
            if seen.insert(key) {
                flat.extend(p);
            }
        }
        let mut s = Self { points: flat, dim, transient_dropped, diameter: 0.0, source: source.into() };
        s.diameter = diameter(&s);
        Ok(s)
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.points.chunks(self.dim)
    }

    /// Largest sup norm over the points.
    pub fn max_norm(&self) -> f64 {
        self.points.iter().fold(0.0, |a, x| a.max(x.abs()))
    }
}

fn sup_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Largest pairwise sup distance over an evenly strided subsample of at most
/// 1000 points; exact for smaller samples.
pub fn diameter(sample: &AttractorSample) -> f64 {
    let n = sample.len();
    let idx: Vec<usize> = if n <= DIAMETER_SUBSAMPLE {
        (0..n).collect()
    } else {
        (0..DIAMETER_SUBSAMPLE).map(|k| k * (n - 1) / (DIAMETER_SUBSAMPLE - 1)).collect()
    };
    idx.par_iter()
        .enumerate()
        .map(|(a, &i)| idx[a + 1..].iter().map(|&j| sup_dist(sample.point(i), sample.point(j))).fold(0.0, f64::max))
        .reduce(|| 0.0, f64::max)
}

/// Pools the segments `u_t` (flattened over `nodes` history nodes) for
/// `t` in `[transient, horizon]`, every `stride` time units, from every
/// initial history. With `radius`, every point must lie within it.
pub fn sample_attractor(
    flow: &dyn Flow,
    initial: &[HistorySegment],
    transient: f64,
    horizon: f64,
    stride: f64,
    nodes: usize,
    radius: Option<f64>,
) -> Result<AttractorSample> {
    ensure(!initial.is_empty(), || "need at least one initial condition".to_string())?;
    ensure(transient >= 0.0 && horizon > transient, || format!("need 0 <= transient < horizon, got {transient}, {horizon}"))?;
    let trajs = initial.par_iter().map(|phi| flow.evolve(phi, horizon)).collect::<Result<Vec<_>>>()?;
    let mut points = Vec::new();
    for traj in &trajs {
        let node_stride = traj.node_stride(nodes)?;
        let spacing = node_stride as f64 * traj.dt();
        ensure(stride >= spacing * (1.0 - 1e-9), || format!("stride {stride} is finer than the node spacing {spacing}"))?;
        let every = ((stride / traj.dt()).round() as usize).max(1);
        let first = (transient / traj.dt()).ceil() as usize;
        for k in (first..=traj.steps()).step_by(every) {
            points.push(traj.state(k, nodes)?.values().to_vec());
        }
    }
    let sample = AttractorSample::from_points(points, transient, flow.fingerprint())?;
    if let Some(r) = radius {
        let worst = sample.max_norm();
        if worst > r {
            return Err(Error::Numerical(format!("sampled point of norm {worst} lies outside the radius {r}")));
        }
    }
    Ok(sample)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoxCount {
    pub eps: f64,
    /// Occupied cells of side `2 eps`.
    pub occupied: usize,
    /// Running minimum of `occupied` over this and all smaller `eps`; a
    /// cover at a smaller radius is also one at a larger radius.
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoxDimReport {
    pub estimate: f64,
    pub r_squared: f64,
    /// Inclusive index range into `counts` used for the fit.
    pub window: (usize, usize),
    /// Largest window with `R^2 >= 0.98`, if any.
    pub suggested_window: Option<(usize, usize)>,
    pub counts: Vec<BoxCount>,
    pub points: usize,
}

impl BoxDimReport {
    pub fn write_counts_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["eps", "occupied", "n_eps"])?;
        for c in &self.counts {
            wtr.write_record(&[format!("{:.10e}", c.eps), c.occupied.to_string(), c.count.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Number of occupied cells of side `2 eps`; each lies in a sup ball of
/// radius `eps`.
pub fn occupied_cells(sample: &AttractorSample, eps: f64) -> usize {
    let side = 2.0 * eps;
    sample
        .points
        .par_chunks(sample.dim)
        .fold(HashSet::new, |mut set, p| {
            set.insert(p.iter().map(|x| (x / side).floor() as i64).collect::<Vec<_>>());
            set
        })
        .reduce(HashSet::new, |mut a, b| {
            if a.len() < b.len() {
                return b.into_iter().fold(a, |mut s, k| {
                    s.insert(k);
                    s
                });
            }
            a.extend(b);
            a
        })
        .len()
}

fn fit(counts: &[BoxCount], (lo, hi): (usize, usize)) -> Option<(f64, f64)> {
    let xs: Vec<f64> = counts[lo..=hi].iter().map(|c| -c.eps.ln()).collect();
    let ys: Vec<f64> = counts[lo..=hi].iter().map(|c| (c.count as f64).ln()).collect();
    linear_fit(&xs, &ys).map(|f| (f.slope, f.r_squared))
}

/// Largest window of at least three consecutive `eps` with `R^2 >= 0.98`;
/// among equally long ones, the one reaching the smallest `eps`.
pub fn suggest_window(counts: &[BoxCount]) -> Option<(usize, usize)> {
    let n = counts.len();
    (3..=n).rev().find_map(|len| {
        (0..=n - len).rev().map(|lo| (lo, lo + len - 1)).find(|w| fit(counts, *w).is_some_and(|(_, r2)| r2 >= MIN_R_SQUARED))
    })
}

/// Box-counting dimension: slope of `ln N_eps` against `-ln eps` over
/// `window` (indices into `eps_list`), or over the suggested window.
///
/// `eps_list` must be decreasing, with at least four values spanning at
/// least 1.5 decades.
pub fn box_counting_dim(sample: &AttractorSample, eps_list: &[f64], window: Option<(usize, usize)>) -> Result<BoxDimReport> {
    ensure(eps_list.len() >= 4, || format!("need at least 4 eps values, got {}", eps_list.len()))?;
    ensure(eps_list.iter().all(|e| e.is_finite() && *e > 0.0), || "eps values must be positive".to_string())?;
    ensure(eps_list.windows(2).all(|w| w[1] < w[0]), || "eps values must be strictly decreasing".to_string())?;
    let span = (eps_list[0] / eps_list[eps_list.len() - 1]).log10();
    ensure(span >= 1.5 - 1e-12, || format!("eps values span {span:.3} decades, need at least 1.5"))?;

    let occupied: Vec<usize> = eps_list.iter().map(|e| occupied_cells(sample, *e)).collect();
    let mut counts: Vec<BoxCount> = eps_list.iter().zip(&occupied).map(|(&eps, &o)| BoxCount { eps, occupied: o, count: o }).collect();
    for i in (0..counts.len() - 1).rev() {
        counts[i].count = counts[i].count.min(counts[i + 1].count);
    }

    let base = BoxDimReport { estimate: 0.0, r_squared: 1.0, window: (0, counts.len() - 1), suggested_window: None, counts, points: sample.len() };
    // One occupied cell at every scale: a point as far as these eps can tell.
    if base.counts.iter().all(|c| c.count == 1) {
        return Ok(base);
    }
    let distinct: HashSet<usize> = base.counts.iter().map(|c| c.count).collect();
    if distinct.len() < 2 {
        return Err(Error::DegenerateSample(format!(
            "{} points give the same count {} at every eps",
            sample.len(),
            base.counts[0].count
        )));
    }
    let suggested_window = suggest_window(&base.counts);
    let window = match window {
        Some((lo, hi)) => {
            ensure(lo < hi && hi < base.counts.len(), || format!("window ({lo}, {hi}) is not a range of at least two eps indices"))?;
            (lo, hi)
        }
        None => suggested_window.unwrap_or(base.window),
    };
    let (estimate, r_squared) = fit(&base.counts, window).expect("window has at least two points");
    Ok(BoxDimReport { estimate, r_squared, window, suggested_window, ..base })
}

/// `count` values from `hi` down to `lo`, evenly spaced in `ln eps`.
pub fn geometric_eps(hi: f64, lo: f64, count: usize) -> Vec<f64> {
    let (a, b) = (hi.ln(), lo.ln());
    (0..count).map(|i| (a + (b - a) * i as f64 / (count - 1).max(1) as f64).exp()).collect()
}

/// Sets of known dimension in `R^dim`.
pub mod synthetic {
    use super::*;

    fn direction(dim: usize, seed: u64, salt: usize) -> Vec<f64> {
        let mut rng = trial_rng(seed, salt);
        let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let n = v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        v.iter().map(|x| x / n).collect()
    }

    pub fn point(dim: usize) -> AttractorSample {
        AttractorSample::from_points(vec![vec![0.0; dim]], 0.0, "point").expect("valid point")
    }

    /// `n` uniform points on a segment of sup length `length` through the
    /// origin in a random direction.
    pub fn segment(n: usize, dim: usize, length: f64, seed: u64) -> AttractorSample {
        let v = direction(dim, seed, 0);
        let mut rng = trial_rng(seed, 1);
        let pts = (0..n)
            .map(|_| {
                let s = rng.random_range(0.0..length);
                v.iter().map(|x| s * x).collect()
            })
            .collect();
        AttractorSample::from_points(pts, 0.0, format!("segment n={n} dim={dim} length={length}")).expect("valid points")
    }

    /// `n` uniform points on the square `[0, side]^2` in the first two
    /// coordinates. A square spanned by generic directions cuts through so
    /// many grid cells per unit area that 10^5 points cannot resolve it.
    pub fn square(n: usize, dim: usize, side: f64, seed: u64) -> AttractorSample {
        assert!(dim >= 2, "a square needs two dimensions");
        let mut rng = trial_rng(seed, 1);
        let pts = (0..n)
            .map(|_| {
                let mut p = vec![0.0; dim];
                p[0] = rng.random_range(0.0..side);
                p[1] = rng.random_range(0.0..side);
                p
            })
            .collect();
        AttractorSample::from_points(pts, 0.0, format!("square n={n} dim={dim} side={side}")).expect("valid points")
    }
}

#[cfg(test)]
mod tests;
