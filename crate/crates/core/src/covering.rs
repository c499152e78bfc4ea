//! Explicit coverings of balls in finite-dimensional normed spaces, checked
//! against the count `m 2^m (1 + r1/r2)^m`.
//!
//! All work happens in unit coordinates `y_i = w_i x_i / r2`, where the
//! norm is the plain sup or Euclidean norm and the covering radius is 1.

use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::spectral::trial_rng;

pub const MAX_DIM: usize = 6;
/// Lattice probe spacing as a fraction of `r2`.
pub const PROBE_SPACING: f64 = 0.25;
/// Centers allowed before net construction gives up, relative to the bound.
pub const GUARD_FACTOR: f64 = 10.0;
const CSV_LIMIT: u64 = 10_000_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    Sup,
    Euclidean,
    WeightedSup(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormSpec {
    pub dim: usize,
    pub kind: NormKind,
}

impl NormSpec {
    pub fn new(dim: usize, kind: NormKind) -> Result<Self> {
        let n = Self { dim, kind };
        n.validate()?;
        Ok(n)
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.dim >= 1, || "norm dimension must be at least 1".to_string())?;
        if let NormKind::WeightedSup(w) = &self.kind {
            ensure(w.len() == self.dim, || format!("{} weights for dimension {}", w.len(), self.dim))?;
            ensure(w.iter().all(|x| x.is_finite() && *x > 0.0), || "weights must be positive".to_string())?;
        }
        Ok(())
    }

    pub fn norm(&self, x: &[f64]) -> f64 {
        match &self.kind {
            NormKind::Sup => x.iter().fold(0.0, |a, v| a.max(v.abs())),
            NormKind::Euclidean => x.iter().map(|v| v * v).sum::<f64>().sqrt(),
            NormKind::WeightedSup(w) => x.iter().zip(w).fold(0.0, |a, (v, w)| a.max(w * v.abs())),
        }
    }

    fn euclidean(&self) -> bool {
        matches!(self.kind, NormKind::Euclidean)
    }

    fn weight(&self, i: usize) -> f64 {
        match &self.kind {
            NormKind::WeightedSup(w) => w[i],
            _ => 1.0,
        }
    }

    fn unit_norm(&self, y: &[f64]) -> f64 {
        if self.euclidean() {
            y.iter().map(|v| v * v).sum::<f64>().sqrt()
        } else {
            y.iter().fold(0.0, |a, v| a.max(v.abs()))
        }
    }

    fn to_unit(&self, x: &[f64], r2: f64) -> Vec<f64> {
        x.iter().enumerate().map(|(i, v)| v * self.weight(i) / r2).collect()
    }

    fn from_unit(&self, y: &[f64], r2: f64) -> Vec<f64> {
        y.iter().enumerate().map(|(i, v)| v * r2 / self.weight(i)).collect()
    }

    /// Distance from any point to its nearest probe on a lattice of spacing `h`.
    fn lattice_radius(&self, h: f64) -> f64 {
        if self.euclidean() {
            0.5 * h * (self.dim as f64).sqrt()
        } else {
            0.5 * h
        }
    }
}

/// `m 2^m (1 + r1/r2)^m`.
pub fn covering_bound(m: usize, r1: f64, r2: f64) -> Result<f64> {
    ensure(m >= 1, || "dimension must be at least 1".to_string())?;
    check_radii(r1, r2)?;
    Ok(m as f64 * 2f64.powi(m as i32) * (1.0 + r1 / r2).powi(m as i32))
}

fn check_radii(r1: f64, r2: f64) -> Result<()> {
    ensure(r2.is_finite() && r2 > 0.0 && r1.is_finite() && r1 > r2, || {
        format!("radii must satisfy r1 > r2 > 0, got r1 = {r1}, r2 = {r2}")
    })
}

/// `r1 / r2` rounded to 12 significant digits, so that rescaling both radii
/// does not change the construction through last-bit noise.
fn unit_radius(r1: f64, r2: f64) -> f64 {
    let rho = r1 / r2;
    let scale = 10f64.powi(11 - rho.log10().floor() as i32);
    (rho * scale).round() / scale
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetOptions {
    pub random_probes: usize,
    pub seed: u64,
    /// Largest probe lattice the greedy construction will scan; beyond it
    /// the net is a lattice net.
    pub max_lattice_probes: usize,
}

impl Default for NetOptions {
    fn default() -> Self {
        Self { random_probes: 100_000, seed: 0, max_lattice_probes: 60_000 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum NetKind {
    /// Centers listed one by one, in unit coordinates.
    Explicit { centers: Vec<Vec<f64>> },
    /// Product lattice with `per_axis` points of spacing `2 half_width`
    /// along each unit axis, clipped to the ball.
    Lattice { per_axis: u64, half_width: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Net {
    pub norm: NormSpec,
    pub r1: f64,
    pub r2: f64,
    pub net: NetKind,
}

impl Net {
    /// Wraps user-supplied centers.
    pub fn explicit(norm: NormSpec, r1: f64, r2: f64, centers: &[Vec<f64>]) -> Result<Self> {
        norm.validate()?;
        check_radii(r1, r2)?;
        ensure(!centers.is_empty(), || "a net needs at least one center".to_string())?;
        ensure(centers.iter().all(|c| c.len() == norm.dim && c.iter().all(|v| v.is_finite())), || {
            format!("centers must be finite {}-vectors", norm.dim)
        })?;
        let centers = centers.iter().map(|c| norm.to_unit(c, r2)).collect();
        Ok(Self { norm, r1, r2, net: NetKind::Explicit { centers } })
    }

    pub fn len(&self) -> u64 {
        match &self.net {
            NetKind::Explicit { centers } => centers.len() as u64,
            NetKind::Lattice { per_axis, .. } => per_axis.saturating_pow(self.norm.dim as u32),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_lattice(&self) -> bool {
        matches!(self.net, NetKind::Lattice { .. })
    }

    /// Center `index` in unit coordinates.
    fn unit_center(&self, index: u64) -> Vec<f64> {
        match &self.net {
            NetKind::Explicit { centers } => centers[index as usize].clone(),
            NetKind::Lattice { per_axis, half_width } => {
                let mut rest = index;
                let mut y: Vec<f64> = (0..self.norm.dim)
                    .map(|_| {
                        let k = rest % per_axis;
                        rest /= per_axis;
                        lattice_coord(k, *per_axis, *half_width)
                    })
                    .collect();
                clip(&self.norm, &mut y, unit_radius(self.r1, self.r2));
                y
            }
        }
    }

    /// Centers in the original coordinates.
    pub fn centers(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        (0..self.len()).map(|i| self.norm.from_unit(&self.unit_center(i), self.r2))
    }

    /// Unit distance from `y` to the nearest center (explicit nets) or to
    /// the lattice center of its cell (lattice nets, an upper bound).
    fn unit_distance(&self, y: &[f64]) -> f64 {
        match &self.net {
            NetKind::Explicit { centers } => centers
                .iter()
                .map(|c| unit_dist(&self.norm, y, c))
                .fold(f64::INFINITY, f64::min),
            NetKind::Lattice { per_axis, half_width } => {
                let mut c: Vec<f64> = y
                    .iter()
                    .map(|v| {
                        let k = ((v / (2.0 * half_width)) + 0.5 * (*per_axis as f64 - 1.0)).round();
                        lattice_coord(k.clamp(0.0, *per_axis as f64 - 1.0) as u64, *per_axis, *half_width)
                    })
                    .collect();
                clip(&self.norm, &mut c, unit_radius(self.r1, self.r2));
                unit_dist(&self.norm, y, &c)
            }
        }
    }

    /// One center per row, columns `x1..xm`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        ensure(self.len() <= CSV_LIMIT, || format!("net has {} centers, too many to export", self.len()))?;
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record((1..=self.norm.dim).map(|i| format!("x{i}")))?;
        for c in self.centers() {
            wtr.write_record(c.iter().map(|v| format!("{v:.12e}")))?;
        }
        wtr.flush()?;
        Ok(())
    }
}

fn lattice_coord(k: u64, n: u64, half_width: f64) -> f64 {
    (2.0 * k as f64 - (n as f64 - 1.0)) * half_width
}

fn unit_dist(norm: &NormSpec, a: &[f64], b: &[f64]) -> f64 {
    if norm.euclidean() {
        a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
    } else {
        a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
    }
}

/// Euclidean metric projection onto the ball; a no-op for the sup norm,
/// whose lattice centers already lie inside the cube.
fn clip(norm: &NormSpec, y: &mut [f64], rho: f64) {
    if norm.euclidean() {
        let n = norm.unit_norm(y);
        if n > rho {
            y.iter_mut().for_each(|v| *v *= rho / n);
        }
    }
}

/// Per-axis count of lattice probes of spacing `h` within `radius`.
fn probe_axis(radius: f64, h: f64) -> i64 {
    (radius / h + 1e-9).floor() as i64
}

fn probe_lattice_size(dim: usize, radius: f64, h: f64) -> f64 {
    (2.0 * probe_axis(radius, h) as f64 + 1.0).powi(dim as i32)
}

/// Lattice points of spacing `h` whose unit norm is at most `radius`,
/// flattened.
fn lattice_probes(norm: &NormSpec, radius: f64, h: f64) -> Vec<f64> {
    let k = probe_axis(radius, h);
    let side = (2 * k + 1) as u64;
    let total = side.pow(norm.dim as u32);
    let mut out = Vec::new();
    let mut y = vec![0.0; norm.dim];
    for idx in 0..total {
        let mut rest = idx;
        for v in y.iter_mut() {
            *v = ((rest % side) as i64 - k) as f64 * h;
            rest /= side;
        }
        if norm.unit_norm(&y) <= radius * (1.0 + 1e-12) {
            out.extend_from_slice(&y);
        }
    }
    out
}

/// Uniform points in the unit-coordinate ball of radius `rho`.
fn random_probes(norm: &NormSpec, rho: f64, count: usize, seed: u64) -> Vec<f64> {
    let mut rng = trial_rng(seed, 0);
    let m = norm.dim;
    let mut out = Vec::with_capacity(count * m);
    for _ in 0..count {
        if norm.euclidean() {
            let g: Vec<f64> = (0..m).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let gn = g.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
            let radius = rho * rng.random::<f64>().powf(1.0 / m as f64);
            out.extend(g.iter().map(|v| v / gn * radius));
        } else {
            out.extend((0..m).map(|_| rng.random_range(-rho..=rho)));
        }
    }
    out
}

/// Relative slack on `r2` in every coverage comparison.
pub const COVER_TOL: f64 = 1e-8;

/// Bound on the distance from center `c` to any point of the ball lying
/// within `delta` of probe `p`.
fn cell_reach(norm: &NormSpec, p: &[f64], c: &[f64], delta: f64, rho: f64) -> f64 {
    (unit_dist(norm, p, c) + delta).min(rho + norm.unit_norm(c))
}

/// Builds a covering of the `r1`-ball by `r2`-balls.
///
/// When the probe lattice (spacing `r2/4`) has at most
/// `opts.max_lattice_probes` points, centers are added greedily at the
/// farthest probe, starting from the origin. A lattice probe only counts as
/// covered once every point of the ball within the lattice's covering
/// radius of it is, so the result covers the whole ball and not just the
/// probes; random probes must simply be within `r2`.
///
/// Larger cases get a product lattice net, which covers exactly: cubes of
/// half-width `r2` (sup) or `r2 / sqrt(m)` (Euclidean) tile the ball, and
/// projecting Euclidean centers onto the ball does not move them away from
/// any point of it.
pub fn build_net(norm: &NormSpec, r1: f64, r2: f64, opts: &NetOptions) -> Result<Net> {
    norm.validate()?;
    check_radii(r1, r2)?;
    ensure(norm.dim <= MAX_DIM, || format!("dimension {} exceeds {MAX_DIM}", norm.dim))?;
    let rho = unit_radius(r1, r2);
    let bound = covering_bound(norm.dim, r1, r2)?;
    let delta = norm.lattice_radius(PROBE_SPACING);
    let net = if probe_lattice_size(norm.dim, rho + delta, PROBE_SPACING) <= opts.max_lattice_probes as f64 {
        greedy(norm, rho, bound, opts)?
    } else {
        lattice_net(norm, rho)
    };
    Ok(Net { norm: norm.clone(), r1, r2, net })
}

fn lattice_net(norm: &NormSpec, rho: f64) -> NetKind {
    let half_width = if norm.euclidean() { 1.0 / (norm.dim as f64).sqrt() } else { 1.0 };
    let per_axis = ((rho / half_width) * (1.0 - 1e-12)).ceil().max(1.0) as u64;
    NetKind::Lattice { per_axis, half_width }
}

fn argmax(v: &[f64]) -> (usize, f64) {
    v.par_iter()
        .enumerate()
        .map(|(i, d)| (i, *d))
        .reduce(|| (usize::MAX, f64::NEG_INFINITY), |a, b| if b.1 > a.1 || (b.1 == a.1 && b.0 < a.0) { b } else { a })
}

fn greedy(norm: &NormSpec, rho: f64, bound: f64, opts: &NetOptions) -> Result<NetKind> {
    let m = norm.dim;
    let delta = norm.lattice_radius(PROBE_SPACING);
    let lattice = lattice_probes(norm, rho + delta, PROBE_SPACING);
    let randoms = random_probes(norm, rho, opts.random_probes, opts.seed);
    let origin = vec![0.0; m];
    let mut reach: Vec<f64> = lattice.par_chunks(m).map(|p| cell_reach(norm, p, &origin, delta, rho)).collect();
    let mut dist: Vec<f64> = randoms.par_chunks(m).map(|p| norm.unit_norm(p)).collect();
    let mut centers = vec![origin];
    let guard = (GUARD_FACTOR * bound).ceil() as usize;
    loop {
        let (li, ld) = argmax(&reach);
        let (ri, rd) = argmax(&dist);
        if ld.max(rd) <= 1.0 + COVER_TOL {
            break;
        }
        if centers.len() >= guard {
            return Err(Error::NetConstruction(format!("greedy insertion exceeded {guard} centers")));
        }
        let mut c = if ld >= rd { lattice[li * m..(li + 1) * m].to_vec() } else { randoms[ri * m..(ri + 1) * m].to_vec() };
        // Lattice probes may sit just outside the ball.
        clip(norm, &mut c, rho);
        if !norm.euclidean() {
            c.iter_mut().for_each(|v| *v = v.clamp(-rho, rho));
        }
        reach.par_iter_mut().zip(lattice.par_chunks(m)).for_each(|(d, p)| *d = d.min(cell_reach(norm, p, &c, delta, rho)));
        dist.par_iter_mut().zip(randoms.par_chunks(m)).for_each(|(d, p)| *d = d.min(unit_dist(norm, p, &c)));
        centers.push(c);
    }
    Ok(NetKind::Explicit { centers })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoverReport {
    pub passed: bool,
    /// True when every point of the ball, not only the probes, is covered:
    /// by construction for lattice nets, otherwise because every point near
    /// each lattice probe is provably within `r2` of a center.
    pub certified: bool,
    pub centers: u64,
    pub bound: f64,
    pub lattice_probes: usize,
    pub random_probes: usize,
    /// Largest probe-to-center distance, in the original units.
    pub max_distance: f64,
    /// `r2 - max_distance`.
    pub slack: f64,
    /// A probe farther than `r2` from every center, if any.
    pub witness: Option<Vec<f64>>,
}

/// Checks that lattice probes (spacing `r2/4`, skipped if there would be
/// more than `opts.max_lattice_probes`) and `opts.random_probes` random
/// probes in the `r1`-ball are all within `r2` of some center.
pub fn verify_covering(net: &Net, opts: &NetOptions) -> Result<CoverReport> {
    ensure(!net.is_empty(), || "a net needs at least one center".to_string())?;
    let norm = &net.norm;
    let m = norm.dim;
    let rho = unit_radius(net.r1, net.r2);
    let delta = norm.lattice_radius(PROBE_SPACING);

    let scan = |probes: &[f64]| -> (f64, usize) {
        probes
            .par_chunks(m)
            .enumerate()
            .map(|(i, p)| (net.unit_distance(p), i))
            .reduce(|| (0.0, usize::MAX), |a, b| if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a })
    };

    let use_lattice = probe_lattice_size(m, rho + delta, PROBE_SPACING) <= opts.max_lattice_probes as f64;
    let (lattice, lmax, lat, certified_probes) = if use_lattice {
        let outer = lattice_probes(norm, rho + delta, PROBE_SPACING);
        let inner: Vec<f64> =
            outer.chunks(m).filter(|p| norm.unit_norm(p) <= rho * (1.0 + 1e-12)).flatten().copied().collect();
        let (dmax, at) = scan(&inner);
        let cert = match &net.net {
            NetKind::Explicit { centers } => outer.par_chunks(m).all(|p| {
                centers.iter().any(|c| cell_reach(norm, p, c, delta, rho) <= 1.0 + COVER_TOL)
            }),
            NetKind::Lattice { .. } => true,
        };
        (inner, dmax, at, cert)
    } else {
        (Vec::new(), 0.0, usize::MAX, false)
    };
    let randoms = random_probes(norm, rho, opts.random_probes, opts.seed ^ 0x5eed_c0de);
    let (rmax, rat) = scan(&randoms);

    let (max_unit, src, at) = if rmax > lmax { (rmax, &randoms, rat) } else { (lmax, &lattice, lat) };
    let passed = max_unit <= 1.0 + COVER_TOL;
    let witness = (!passed).then(|| norm.from_unit(&src[at * m..(at + 1) * m], net.r2));
    let certified = passed && (net.is_lattice() || certified_probes);
    Ok(CoverReport {
        passed,
        certified,
        centers: net.len(),
        bound: covering_bound(m, net.r1, net.r2)?,
        lattice_probes: lattice.len() / m,
        random_probes: randoms.len() / m,
        max_distance: max_unit * net.r2,
        slack: net.r2 * (1.0 - max_unit),
        witness,
    })
}
