//! Argument-principle root isolation for `F(z) = z + c + b exp(-z r)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Closed axis-aligned rectangle in the complex plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

impl Rect {
    pub fn new(re_min: f64, re_max: f64, im_min: f64, im_max: f64) -> Self {
        Self { re_min, re_max, im_min, im_max }
    }

    pub fn width(&self) -> f64 {
        self.re_max - self.re_min
    }

    pub fn height(&self) -> f64 {
        self.im_max - self.im_min
    }

    pub fn center(&self) -> Complex64 {
        Complex64::new(0.5 * (self.re_min + self.re_max), 0.5 * (self.im_min + self.im_max))
    }

    pub fn contains(&self, z: Complex64, slack: f64) -> bool {
        z.re >= self.re_min - slack
            && z.re <= self.re_max + slack
            && z.im >= self.im_min - slack
            && z.im <= self.im_max + slack
    }

    fn expanded(&self, dx: f64, dy: f64) -> Self {
        Self::new(self.re_min - dx, self.re_max + dx, self.im_min - dy, self.im_max + dy)
    }

    fn corners(&self) -> [Complex64; 4] {
        [
            Complex64::new(self.re_min, self.im_min),
            Complex64::new(self.re_max, self.im_min),
            Complex64::new(self.re_max, self.im_max),
            Complex64::new(self.re_min, self.im_max),
        ]
    }
}

/// The characteristic function of a scalar delay mode.
#[derive(Clone, Copy, Debug)]
pub(crate) struct CharFn {
    pub c: f64,
    pub b: f64,
    pub r: f64,
}

impl CharFn {
    pub fn eval(&self, z: Complex64) -> Complex64 {
        z + self.c + self.b * (-z * self.r).exp()
    }

    pub fn deriv(&self, z: Complex64) -> Complex64 {
        1.0 - self.b * self.r * (-z * self.r).exp()
    }

    /// Size of the terms making up `F(z)`, for relative tolerances.
    fn scale(&self, z: Complex64) -> f64 {
        1.0 + z.norm() + self.c.abs() + self.b.abs() * (-z.re * self.r).exp()
    }

    fn near_root(&self, z: Complex64, fz: Complex64) -> bool {
        fz.norm() < 1e-9 * self.scale(z)
    }
}

#[derive(Debug)]
pub(crate) struct NearRoot;

const MAX_DEPTH: u32 = 48;

fn arg_step(f0: Complex64, f1: Complex64) -> f64 {
    (f1 * f0.conj()).arg()
}

fn edge_increment(
    f: &CharFn,
    z0: Complex64,
    f0: Complex64,
    z1: Complex64,
    f1: Complex64,
    depth: u32,
) -> Result<f64, NearRoot> {
    let zm = 0.5 * (z0 + z1);
    let fm = f.eval(zm);
    if f.near_root(zm, fm) {
        return Err(NearRoot);
    }
    let whole = arg_step(f0, f1);
    let a = arg_step(f0, fm);
    let b = arg_step(fm, f1);
    if (a + b - whole).abs() < 1e-9 && whole.abs() < 0.8 {
        return Ok(whole);
    }
    if depth >= MAX_DEPTH {
        return Err(NearRoot);
    }
    Ok(edge_increment(f, z0, f0, zm, fm, depth + 1)? + edge_increment(f, zm, fm, z1, f1, depth + 1)?)
}

/// Number of zeros of `f` inside `rect`, counted with multiplicity.
///
/// `base` is the number of initial samples per edge; the arg is then
/// unwrapped adaptively between samples.
pub(crate) fn winding_number(f: &CharFn, rect: &Rect, base: usize) -> Result<i64, NearRoot> {
    let corners = rect.corners();
    let mut total = 0.0;
    for e in 0..4 {
        let (za, zb) = (corners[e], corners[(e + 1) % 4]);
        let mut z0 = za;
        let mut f0 = f.eval(z0);
        if f.near_root(z0, f0) {
            return Err(NearRoot);
        }
        for k in 1..=base {
            let z1 = za + (zb - za) * (k as f64 / base as f64);
            let f1 = f.eval(z1);
            if f.near_root(z1, f1) {
                return Err(NearRoot);
            }
            total += edge_increment(f, z0, f0, z1, f1, 0)?;
            z0 = z1;
            f0 = f1;
        }
    }
    let turns = total / std::f64::consts::TAU;
    let n = turns.round();
    if (turns - n).abs() > 0.05 {
        return Err(NearRoot);
    }
    Ok(n as i64)
}

/// Base samples per edge: enough to follow the oscillation of `exp(-z r)`.
pub(crate) fn base_samples(f: &CharFn, rect: &Rect) -> usize {
    let osc = (rect.width().max(rect.height()) * f.r / 0.5).ceil() as usize;
    (32 + osc).min(1 << 16)
}

/// Newton polishing; `mult` is the assumed multiplicity.
pub(crate) fn newton(f: &CharFn, z0: Complex64, mult: f64) -> Option<Complex64> {
    let mut z = z0;
    for _ in 0..100 {
        let fz = f.eval(z);
        let dz = f.deriv(z);
        if dz.norm() == 0.0 || !fz.is_finite() {
            return None;
        }
        let step = mult * fz / dz;
        z -= step;
        if !z.is_finite() {
            return None;
        }
        if step.norm() <= 1e-15 * (1.0 + z.norm()) {
            break;
        }
    }
    // One more step after convergence keeps the last-bit noise minimal.
    let fz = f.eval(z);
    let dz = f.deriv(z);
    if dz.norm() > 0.0 {
        let z2 = z - mult * fz / dz;
        if f.eval(z2).norm() <= fz.norm() {
            z = z2;
        }
    }
    Some(z)
}

/// A located zero and its multiplicity.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Located {
    pub z: Complex64,
    pub mult: usize,
}

const SPLITS: [f64; 6] = [0.513_7, 0.461_3, 0.552_1, 0.429_1, 0.589_3, 0.371_9];

pub(crate) fn count_with_perturbation(f: &CharFn, rect: &Rect, attempts: usize) -> Result<(Rect, i64), usize> {
    for k in 0..=attempts {
        let bump = 1e-3 * k as f64;
        let r = rect.expanded(bump * rect.width().max(1e-3), bump * rect.height().max(1e-3));
        if let Ok(n) = winding_number(f, &r, base_samples(f, &r)) {
            return Ok((r, n));
        }
    }
    Err(attempts)
}

/// Locates every zero inside `rect`, whose winding number is `count`.
pub(crate) fn isolate(f: &CharFn, rect: &Rect, count: i64, depth: u32, out: &mut Vec<Located>) -> Result<(), ()> {
    if count <= 0 {
        return Ok(());
    }
    let c = rect.center();
    let diam = rect.width().hypot(rect.height());
    let slack = 1e-9 * (1.0 + c.norm());
    if count == 1 {
        if let Some(z) = newton(f, c, 1.0) {
            if rect.contains(z, slack) && f.eval(z).norm() < 1e-10 * (1.0 + z.norm()) {
                out.push(Located { z, mult: 1 });
                return Ok(());
            }
        }
    }
    if diam < 1e-7 * (1.0 + c.norm()) {
        let z = newton(f, c, count as f64).unwrap_or(c);
        out.push(Located { z, mult: count as usize });
        return Ok(());
    }
    if depth > 80 {
        return Err(());
    }
    let split_re = rect.width() >= rect.height();
    for frac in SPLITS {
        let (r1, r2) = if split_re {
            let x = rect.re_min + frac * rect.width();
            (Rect::new(rect.re_min, x, rect.im_min, rect.im_max), Rect::new(x, rect.re_max, rect.im_min, rect.im_max))
        } else {
            let y = rect.im_min + frac * rect.height();
            (Rect::new(rect.re_min, rect.re_max, rect.im_min, y), Rect::new(rect.re_min, rect.re_max, y, rect.im_max))
        };
        let n1 = winding_number(f, &r1, base_samples(f, &r1));
        let n2 = winding_number(f, &r2, base_samples(f, &r2));
        if let (Ok(n1), Ok(n2)) = (n1, n2) {
            if n1 + n2 == count && n1 >= 0 && n2 >= 0 {
                isolate(f, &r1, n1, depth + 1, out)?;
                isolate(f, &r2, n2, depth + 1, out)?;
                return Ok(());
            }
        }
    }
    Err(())
}
