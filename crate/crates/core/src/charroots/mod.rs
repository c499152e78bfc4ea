//! Roots of the scalar delay characteristic equation
//! `lambda + c + b exp(-lambda r) = 0` and the ordered spectrum of the
//! diagonalized reaction-diffusion operator.

mod contour;
pub mod lambert;

use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use contour::Rect;
use contour::{count_with_perturbation, isolate, newton, CharFn, Located};
pub use lambert::{lambert_w0, lambert_w0_exp};

use crate::error::{ensure_finite, Error, Result};

const PERTURB_ATTEMPTS: usize = 5;
/// Real parts closer than this are merged into one spectral level.
pub const DEDUP_TOL: f64 = 1e-8;

/// How the Laplacian eigenvalue enters the per-mode equation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SignConvention {
    /// `lambda + a + n^2 + b exp(-lambda r) = 0`, the linearization of the
    /// reaction-diffusion equation with Dirichlet Laplacian.
    #[default]
    Physical,
    /// `n^2 - (lambda + a + b exp(-lambda r)) = 0` taken literally.
    Paper,
}

impl SignConvention {
    /// The constant `c` of mode `n`.
    pub fn mode_constant(&self, a: f64, n: usize) -> f64 {
        let n2 = (n * n) as f64;
        match self {
            SignConvention::Physical => a + n2,
            SignConvention::Paper => a - n2,
        }
    }
}

/// A characteristic root. Conjugate pairs are stored once, with `im >= 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CharRoot {
    pub value: Complex64,
    /// Fourier mode, or 0 for a mode-free scalar equation.
    pub mode: usize,
    pub multiplicity: usize,
    /// True when `value.conj()` is also a root that this entry stands for.
    pub conjugate_pair: bool,
}

impl CharRoot {
    /// Real dimension of the generalized eigenspace this entry accounts for.
    pub fn real_dim(&self) -> usize {
        self.multiplicity * if self.conjugate_pair { 2 } else { 1 }
    }
}

/// `lambda + c + b exp(-lambda r)`.
pub fn characteristic(c: f64, b: f64, r: f64, lambda: Complex64) -> Complex64 {
    CharFn { c, b, r }.eval(lambda)
}

/// Derivative of [`characteristic`] in `lambda`.
pub fn characteristic_derivative(b: f64, r: f64, lambda: Complex64) -> Complex64 {
    CharFn { c: 0.0, b, r }.deriv(lambda)
}

/// Largest real root of `lambda + c + b exp(-lambda r) = 0`, if any.
///
/// Closed form `-c + W0(-b r exp(c r)) / r`, evaluated in log space so large
/// `c r` does not overflow.
pub fn real_rightmost_root(c: f64, b: f64, r: f64) -> Option<f64> {
    if !(r > 0.0) || !c.is_finite() || !b.is_finite() {
        return None;
    }
    if b == 0.0 {
        return Some(-c);
    }
    let log_mag = (b.abs() * r).ln() + c * r;
    let w = if b > 0.0 {
        // Argument is -exp(log_mag); needs to stay above -1/e.
        if log_mag > -1.0 + 1e-15 {
            return None;
        }
        lambert_w0(-log_mag.exp())?
    } else {
        lambert_w0_exp(log_mag)
    };
    Some(-c + w / r)
}

/// Upper bound on the real part of any root: the real solution of
/// `x = -c + |b| exp(-x r)`.
pub fn real_part_bound(c: f64, b: f64, r: f64) -> f64 {
    if b == 0.0 {
        return -c;
    }
    -c + lambert_w0_exp((b.abs() * r).ln() + c * r) / r
}

fn validate(c: f64, b: f64, r: f64) -> Result<()> {
    ensure_finite("c", c)?;
    ensure_finite("b", b)?;
    ensure_finite("r", r)?;
    if r <= 0.0 {
        return Err(Error::Precondition(format!("delay must be positive, got {r}")));
    }
    Ok(())
}

fn located_to_roots(found: Vec<Located>, mode: usize) -> Vec<CharRoot> {
    found
        .into_iter()
        .map(|l| {
            let mut z = l.z;
            if z.im.abs() < 1e-12 * (1.0 + z.re.abs()) {
                z.im = 0.0;
            }
            CharRoot { value: z, mode, multiplicity: l.mult, conjugate_pair: false }
        })
        .collect()
}

/// Every root inside `rect` (both members of a conjugate pair if both lie
/// inside). The rectangle is enlarged slightly if its boundary runs too
/// close to a root.
pub fn roots_in_box(c: f64, b: f64, r: f64, rect: Rect) -> Result<Vec<CharRoot>> {
    validate(c, b, r)?;
    if !(rect.width() > 0.0 && rect.height() > 0.0) {
        return Err(Error::Malformed(format!("degenerate box {rect:?}")));
    }
    let f = CharFn { c, b, r };
    let (rect, count) =
        count_with_perturbation(&f, &rect, PERTURB_ATTEMPTS).map_err(|attempts| Error::Contour { attempts })?;
    let mut found = Vec::new();
    isolate(&f, &rect, count, 0, &mut found).map_err(|_| Error::Contour { attempts: PERTURB_ATTEMPTS })?;
    let mut roots = located_to_roots(found, 0);
    sort_desc(&mut roots);
    Ok(roots)
}

/// Winding number of the characteristic function around `rect`, sampled
/// with `base` points per edge. Exposed for cross-checking root counts.
pub fn winding_number(c: f64, b: f64, r: f64, rect: Rect, base: usize) -> Result<i64> {
    validate(c, b, r)?;
    contour::winding_number(&CharFn { c, b, r }, &rect, base.max(1)).map_err(|_| Error::Contour { attempts: 0 })
}

fn sort_desc(roots: &mut [CharRoot]) {
    roots.sort_by(|x, y| {
        y.value.re.total_cmp(&x.value.re).then(y.value.im.total_cmp(&x.value.im))
    });
}

/// All roots of `lambda + c + b exp(-lambda r)` with real part at least
/// `floor`, conjugate pairs folded to their upper member, tagged `mode`.
pub fn roots_above(c: f64, b: f64, r: f64, floor: f64, mode: usize) -> Result<Vec<CharRoot>> {
    validate(c, b, r)?;
    ensure_finite("floor", floor)?;
    let top = real_part_bound(c, b, r);
    if top < floor {
        return Ok(Vec::new());
    }
    let im_max = b.abs() * (-floor * r).exp() + 1.0;
    let rect = Rect::new(floor, top + 1.0, -im_max, im_max);
    let all = roots_in_box(c, b, r, rect)?;
    let f = CharFn { c, b, r };
    let mut upper = Vec::new();
    let mut lower = 0usize;
    for mut root in all {
        if root.value.re < floor {
            continue;
        }
        let tol = 1e-9 * (1.0 + root.value.norm());
        if root.value.im > tol {
            root.conjugate_pair = true;
            upper.push(root);
        } else if root.value.im < -tol {
            lower += root.multiplicity;
        } else {
            // Polish on the real line.
            let z = newton(&f, Complex64::new(root.value.re, 0.0), root.multiplicity as f64)
                .map(|z| Complex64::new(z.re, 0.0))
                .unwrap_or(Complex64::new(root.value.re, 0.0));
            root.value = z;
            upper.push(root);
        }
    }
    let paired: usize = upper.iter().filter(|r| r.conjugate_pair).map(|r| r.multiplicity).sum();
    if paired != lower {
        return Err(Error::Numerical(format!(
            "conjugate roots unbalanced ({paired} upper vs {lower} lower) for c={c}, b={b}, r={r}"
        )));
    }
    for root in &mut upper {
        root.mode = mode;
    }
    sort_desc(&mut upper);
    Ok(upper)
}

/// Roots of Fourier mode `n` with real part at least `floor`.
pub fn mode_roots(a: f64, b: f64, r: f64, n: usize, floor: f64, convention: SignConvention) -> Result<Vec<CharRoot>> {
    if n == 0 {
        return Err(Error::Precondition("Fourier modes start at 1".into()));
    }
    roots_above(convention.mode_constant(a, n), b, r, floor, n)
}

/// How a spectrum was truncated.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Truncation {
    pub max_mode: usize,
    pub floor: f64,
    /// False when modes beyond `max_mode` may still have roots above `floor`.
    pub complete: bool,
}

/// Distinct real parts in decreasing order with real multiplicities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumTable {
    pub rhos: Vec<f64>,
    pub multiplicities: Vec<usize>,
    pub cumulative: Vec<usize>,
    /// Every root behind the table, ordered by decreasing real part.
    pub roots: Vec<CharRoot>,
    pub truncation: Truncation,
    pub convention: SignConvention,
}

impl SpectrumTable {
    /// Merges roots into levels of equal real part.
    pub fn from_roots(mut roots: Vec<CharRoot>, truncation: Truncation, convention: SignConvention) -> Self {
        sort_desc(&mut roots);
        let mut rhos: Vec<f64> = Vec::new();
        let mut multiplicities = Vec::new();
        let mut anchor = f64::NAN;
        for root in &roots {
            if rhos.is_empty() || (anchor - root.value.re).abs() > DEDUP_TOL {
                anchor = root.value.re;
                rhos.push(root.value.re);
                multiplicities.push(root.real_dim());
            } else {
                *multiplicities.last_mut().unwrap() += root.real_dim();
            }
        }
        let cumulative = multiplicities
            .iter()
            .scan(0, |acc, n| {
                *acc += n;
                Some(*acc)
            })
            .collect();
        Self { rhos, multiplicities, cumulative, roots, truncation, convention }
    }

    pub fn len(&self) -> usize {
        self.rhos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rhos.is_empty()
    }

    /// `rho_m`, 1-based.
    pub fn rho(&self, m: usize) -> Option<f64> {
        m.checked_sub(1).and_then(|i| self.rhos.get(i).copied())
    }

    /// `k_m`, 1-based.
    pub fn k(&self, m: usize) -> Option<usize> {
        m.checked_sub(1).and_then(|i| self.cumulative.get(i).copied())
    }

    /// Roots whose real part belongs to one of the first `m` levels.
    pub fn leading_roots(&self, m: usize) -> Vec<CharRoot> {
        match self.rho(m) {
            None => Vec::new(),
            Some(rho_m) => self.roots.iter().filter(|r| r.value.re >= rho_m - DEDUP_TOL).copied().collect(),
        }
    }

    /// Rows `rho, multiplicity, k_cumulative`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["rho", "multiplicity", "k_cumulative"])?;
        for i in 0..self.len() {
            wtr.write_record(&[
                format!("{:.17e}", self.rhos[i]),
                self.multiplicities[i].to_string(),
                self.cumulative[i].to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// The lowest floor for which every mode above `max_mode` is provably free
/// of roots, plus a hair so the strict inequality holds.
pub fn coverage_floor(a: f64, b: f64, r: f64, max_mode: usize) -> f64 {
    let x = real_part_bound(SignConvention::Physical.mode_constant(a, max_mode + 1), b, r);
    x + 1e-9 * (1.0 + x.abs())
}

/// Merged spectrum of modes `1..=max_mode` above `floor`, physical sign.
pub fn ordered_spectrum(a: f64, b: f64, r: f64, max_mode: usize, floor: f64) -> Result<SpectrumTable> {
    ordered_spectrum_with(a, b, r, max_mode, floor, SignConvention::Physical)
}

/// Merged spectrum under either sign convention.
///
/// Under the physical convention every root of mode `n` satisfies
/// `Re <= -c_n + |b| exp(-Re r)`, so the table is complete once mode
/// `max_mode + 1` violates that at `floor`; otherwise a truncation error is
/// returned. Under the `Paper` convention the leading real parts grow like
/// `n^2` and no floor covers all modes, so the table is returned with
/// `complete = false`.
pub fn ordered_spectrum_with(
    a: f64,
    b: f64,
    r: f64,
    max_mode: usize,
    floor: f64,
    convention: SignConvention,
) -> Result<SpectrumTable> {
    validate(a, b, r)?;
    ensure_finite("floor", floor)?;
    if max_mode == 0 {
        return Err(Error::Precondition("max_mode must be at least 1".into()));
    }
    let next = max_mode + 1;
    let c_next = convention.mode_constant(a, next);
    let covered = -c_next + b.abs() * (-floor * r).exp() < floor;
    if !covered && convention == SignConvention::Physical {
        return Err(Error::Truncation { mode: next, floor });
    }
    let mut roots = Vec::new();
    for n in 1..=max_mode {
        roots.extend(mode_roots(a, b, r, n, floor, convention)?);
    }
    Ok(SpectrumTable::from_roots(roots, Truncation { max_mode, floor, complete: covered }, convention))
}

/// Spectrum of the scalar equation `lambda + c + b exp(-lambda r) = 0`
/// (mode tag 0) above `floor`.
pub fn scalar_spectrum(c: f64, b: f64, r: f64, floor: f64) -> Result<SpectrumTable> {
    let roots = roots_above(c, b, r, floor, 0)?;
    Ok(SpectrumTable::from_roots(
        roots,
        Truncation { max_mode: 0, floor, complete: true },
        SignConvention::Physical,
    ))
}
