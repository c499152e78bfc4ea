//! Phase-space points: functions on `[-r, 0]` sampled on a uniform grid.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};

/// Uniform grid on `[-delay, 0]` with both endpoints included.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    delay: f64,
    num_nodes: usize,
    value_dim: usize,
}

impl GridSpec {
    pub fn new(delay: f64, num_nodes: usize, value_dim: usize) -> Result<Self> {
        ensure_finite("delay", delay)?;
        if delay <= 0.0 {
            return Err(Error::Malformed(format!("delay must be positive, got {delay}")));
        }
        if num_nodes < 2 {
            return Err(Error::Malformed(format!("need at least 2 nodes, got {num_nodes}")));
        }
        if value_dim == 0 {
            return Err(Error::Malformed("value dimension must be at least 1".into()));
        }
        Ok(Self { delay, num_nodes, value_dim })
    }

    pub fn delay(&self) -> f64 {
        self.delay
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn value_dim(&self) -> usize {
        self.value_dim
    }

    pub fn spacing(&self) -> f64 {
        self.delay / (self.num_nodes - 1) as f64
    }

    /// Location of node `i`; node 0 is `-delay`, the last node is 0.
    pub fn node(&self, i: usize) -> f64 {
        if i + 1 == self.num_nodes {
            0.0
        } else {
            -self.delay + i as f64 * self.spacing()
        }
    }

    pub fn with_value_dim(&self, value_dim: usize) -> Result<Self> {
        Self::new(self.delay, self.num_nodes, value_dim)
    }
}

/// Norm on the value space of a segment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ValueNorm {
    /// Plain Euclidean norm of an n-vector.
    #[default]
    Euclidean,
    /// Sine-series coefficients; the norm is the L²(0, π) norm of the
    /// reconstructed function, `sqrt(pi/2) * |coeffs|`.
    SineModal,
}

impl ValueNorm {
    pub fn norm(&self, v: &[f64]) -> f64 {
        let l2 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        match self {
            ValueNorm::Euclidean => l2,
            ValueNorm::SineModal => (std::f64::consts::FRAC_PI_2).sqrt() * l2,
        }
    }
}

/// A function on `[-r, 0]` stored at grid nodes, with sup-norm semantics.
///
/// Values are stored node-major: node `i`, component `j` lives at
/// `i * value_dim + j`.
#[derive(Clone, Debug, PartialEq)]
pub struct HistorySegment {
    grid: GridSpec,
    norm: ValueNorm,
    values: Vec<f64>,
}

impl HistorySegment {
    pub fn new(grid: GridSpec, norm: ValueNorm, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Malformed("segment has no values".into()));
        }
        let expected = grid.num_nodes * grid.value_dim;
        if values.len() != expected {
            return Err(Error::Malformed(format!(
                "expected {expected} values ({} nodes x {}), got {}",
                grid.num_nodes,
                grid.value_dim,
                values.len()
            )));
        }
        if let Some(x) = values.iter().find(|x| !x.is_finite()) {
            return Err(Error::Malformed(format!("non-finite value {x}")));
        }
        Ok(Self { grid, norm, values })
    }

    pub fn zeros(grid: GridSpec, norm: ValueNorm) -> Self {
        Self { grid, norm, values: vec![0.0; grid.num_nodes * grid.value_dim] }
    }

    /// Samples `f(theta, out)` at every node.
    pub fn from_fn(grid: GridSpec, norm: ValueNorm, mut f: impl FnMut(f64, &mut [f64])) -> Result<Self> {
        let d = grid.value_dim;
        let mut values = vec![0.0; grid.num_nodes * d];
        for (i, chunk) in values.chunks_mut(d).enumerate() {
            f(grid.node(i), chunk);
        }
        Self::new(grid, norm, values)
    }

    /// A constant function equal to `v`.
    pub fn constant(grid: GridSpec, norm: ValueNorm, v: &[f64]) -> Result<Self> {
        if v.len() != grid.value_dim {
            return Err(Error::Malformed(format!(
                "constant has {} components, grid expects {}",
                v.len(),
                grid.value_dim
            )));
        }
        Self::from_fn(grid, norm, |_, out| out.copy_from_slice(v))
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn value_norm(&self) -> ValueNorm {
        self.norm
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn node_value(&self, i: usize) -> &[f64] {
        let d = self.grid.value_dim;
        &self.values[i * d..(i + 1) * d]
    }

    /// The value at θ = 0.
    pub fn head(&self) -> &[f64] {
        self.node_value(self.grid.num_nodes - 1)
    }

    /// Component `j` at every node.
    pub fn component(&self, j: usize) -> Vec<f64> {
        self.values.chunks(self.grid.value_dim).map(|v| v[j]).collect()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values
            .chunks(self.grid.value_dim)
            .map(|v| self.norm.norm(v))
            .fold(0.0, f64::max)
    }

    pub fn is_compatible(&self, other: &HistorySegment) -> bool {
        self.grid == other.grid && self.norm == other.norm
    }

    fn check_compatible(&self, other: &HistorySegment) -> Result<()> {
        if self.is_compatible(other) {
            Ok(())
        } else {
            Err(Error::Mismatch(format!(
                "segments live on different grids or norms: {:?}/{:?} vs {:?}/{:?}",
                self.grid, self.norm, other.grid, other.norm
            )))
        }
    }

    /// `self + s * other`.
    pub fn axpy(&self, s: f64, other: &HistorySegment) -> Result<HistorySegment> {
        self.check_compatible(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + s * b).collect();
        Ok(HistorySegment { grid: self.grid, norm: self.norm, values })
    }

    pub fn sub(&self, other: &HistorySegment) -> Result<HistorySegment> {
        self.axpy(-1.0, other)
    }

    pub fn scaled(&self, s: f64) -> HistorySegment {
        HistorySegment {
            grid: self.grid,
            norm: self.norm,
            values: self.values.iter().map(|x| s * x).collect(),
        }
    }

    /// Evaluates the piecewise-cubic Hermite interpolant at `theta`.
    ///
    /// Node slopes come from fourth-order finite differences (fewer nodes
    /// fall back to second order, two nodes to the secant), so the
    /// interpolant is exact at nodes and on affine data.
    pub fn interpolate(&self, theta: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.grid.value_dim];
        self.interpolate_into(theta, &mut out)?;
        Ok(out)
    }

    pub fn interpolate_into(&self, theta: f64, out: &mut [f64]) -> Result<()> {
        let r = self.grid.delay;
        let tol = 1e-12 * r.max(1.0);
        if !(theta >= -r - tol && theta <= tol) {
            return Err(Error::Domain { theta, delay: r });
        }
        let theta = theta.clamp(-r, 0.0);
        let n = self.grid.num_nodes;
        let h = self.grid.spacing();
        let u = (theta + r) / h;
        let i = (u.floor() as usize).min(n - 2);
        let s = u - i as f64;
        let d = self.grid.value_dim;
        if s.abs() < 1e-13 {
            out.copy_from_slice(&self.values[i * d..(i + 1) * d]);
            return Ok(());
        }
        if (1.0 - s).abs() < 1e-13 {
            out.copy_from_slice(&self.values[(i + 1) * d..(i + 2) * d]);
            return Ok(());
        }
        let (s2, s3) = (s * s, s * s * s);
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        for (j, o) in out.iter_mut().enumerate() {
            let f = |k: usize| self.values[k * d + j];
            let m0 = node_slope(&f, n, i, h);
            let m1 = node_slope(&f, n, i + 1, h);
            *o = h00 * f(i) + h10 * h * m0 + h01 * f(i + 1) + h11 * h * m1;
        }
        Ok(())
    }

    /// Resamples onto another grid with the same delay and value dimension.
    pub fn resample(&self, grid: GridSpec) -> Result<HistorySegment> {
        if (grid.delay - self.grid.delay).abs() > 1e-12 * self.grid.delay
            || grid.value_dim != self.grid.value_dim
        {
            return Err(Error::Mismatch("resample target has a different delay or dimension".into()));
        }
        let mut values = vec![0.0; grid.num_nodes * grid.value_dim];
        for (i, chunk) in values.chunks_mut(grid.value_dim).enumerate() {
            self.interpolate_into(grid.node(i), chunk)?;
        }
        HistorySegment::new(grid, self.norm, values)
    }

    /// Writes one row per node: `theta, v1, ..., vd`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = vec!["theta".to_string()];
        header.extend((1..=self.grid.value_dim).map(|j| format!("v{j}")));
        wtr.write_record(&header)?;
        for i in 0..self.grid.num_nodes {
            let mut row = vec![format!("{:.17e}", self.grid.node(i))];
            row.extend(self.node_value(i).iter().map(|x| format!("{x:.17e}")));
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Reads the format produced by [`HistorySegment::write_csv`].
    pub fn read_csv<R: std::io::Read>(r: R, norm: ValueNorm) -> Result<HistorySegment> {
        let mut rdr = csv::Reader::from_reader(r);
        let mut thetas = Vec::new();
        let mut values = Vec::new();
        let mut dim = None;
        for rec in rdr.records() {
            let rec = rec?;
            let row: Vec<f64> = rec
                .iter()
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Malformed(format!("bad number in history CSV: {e}")))?;
            if row.len() < 2 {
                return Err(Error::Malformed("history CSV rows need theta and at least one value".into()));
            }
            match dim {
                None => dim = Some(row.len() - 1),
                Some(d) if d != row.len() - 1 => {
                    return Err(Error::Malformed("ragged history CSV".into()));
                }
                _ => {}
            }
            thetas.push(row[0]);
            values.extend_from_slice(&row[1..]);
        }
        let dim = dim.ok_or_else(|| Error::Malformed("empty history CSV".into()))?;
        if thetas.len() < 2 {
            return Err(Error::Malformed("history CSV needs at least two nodes".into()));
        }
        let delay = -thetas[0];
        let grid = GridSpec::new(delay, thetas.len(), dim)?;
        for (i, t) in thetas.iter().enumerate() {
            if (t - grid.node(i)).abs() > 1e-9 * delay.max(1.0) {
                return Err(Error::Malformed(format!("node {i} at {t} is not on a uniform grid ending at 0")));
            }
        }
        HistorySegment::new(grid, norm, values)
    }
}

/// Weights of composite Simpson's rule on `num_nodes` equally spaced nodes.
///
/// An odd number of intervals closes with a Simpson 3/8 panel; a single
/// interval falls back to the trapezoid rule.
pub fn quadrature_weights(num_nodes: usize, h: f64) -> Vec<f64> {
    let intervals = num_nodes.saturating_sub(1);
    let mut w = vec![0.0; num_nodes];
    if intervals == 0 {
        return w;
    }
    if intervals == 1 {
        w[0] = 0.5 * h;
        w[1] = 0.5 * h;
        return w;
    }
    let simpson = if intervals % 2 == 0 { intervals } else { intervals - 3 };
    for p in (0..simpson).step_by(2) {
        w[p] += h / 3.0;
        w[p + 1] += 4.0 * h / 3.0;
        w[p + 2] += h / 3.0;
    }
    if simpson < intervals {
        let s = simpson;
        let c = 3.0 * h / 8.0;
        w[s] += c;
        w[s + 1] += 3.0 * c;
        w[s + 2] += 3.0 * c;
        w[s + 3] += c;
    }
    w
}

/// Finite-difference slope at node `i` of `n` equally spaced samples.
fn node_slope(f: &impl Fn(usize) -> f64, n: usize, i: usize, h: f64) -> f64 {
    if n >= 5 {
        let d = if i >= 2 && i + 2 < n {
            f(i - 2) - 8.0 * f(i - 1) + 8.0 * f(i + 1) - f(i + 2)
        } else if i == 0 {
            -25.0 * f(0) + 48.0 * f(1) - 36.0 * f(2) + 16.0 * f(3) - 3.0 * f(4)
        } else if i == 1 {
            -3.0 * f(0) - 10.0 * f(1) + 18.0 * f(2) - 6.0 * f(3) + f(4)
        } else if i == n - 1 {
            25.0 * f(n - 1) - 48.0 * f(n - 2) + 36.0 * f(n - 3) - 16.0 * f(n - 4) + 3.0 * f(n - 5)
        } else {
            3.0 * f(n - 1) + 10.0 * f(n - 2) - 18.0 * f(n - 3) + 6.0 * f(n - 4) - f(n - 5)
        };
        d / (12.0 * h)
    } else if n >= 3 {
        let d = if i == 0 {
            -3.0 * f(0) + 4.0 * f(1) - f(2)
        } else if i == n - 1 {
            3.0 * f(n - 1) - 4.0 * f(n - 2) + f(n - 3)
        } else {
            f(i + 1) - f(i - 1)
        };
        d / (2.0 * h)
    } else {
        (f(1) - f(0)) / h
    }
}
