//! Principal branch of the Lambert W function.

const INV_E: f64 = 0.367_879_441_171_442_33;

/// `W0(x)` for `x >= -1/e`; `None` below the branch point.
///
/// Halley iteration from a branch-point series, a rational guess near zero or
/// the asymptotic `ln x - ln ln x` form.
pub fn lambert_w0(x: f64) -> Option<f64> {
    if x.is_nan() || x < -INV_E - 1e-16 {
        return None;
    }
    if x == 0.0 {
        return Some(0.0);
    }
    if x.is_infinite() {
        return Some(f64::INFINITY);
    }
    // Distance to the branch point, computed with a split 1/e to keep digits.
    let q = x + INV_E + 1.2428753672788363e-17;
    if q <= 0.0 {
        return Some(-1.0);
    }
    let mut w = if x < -0.25 {
        let p = (2.0 * std::f64::consts::E * q).sqrt();
        -1.0 + p * (1.0 + p * (-1.0 / 3.0 + p * (11.0 / 72.0 + p * (-43.0 / 540.0))))
    } else if x < 3.0 {
        x * (1.0 + 4.0 / 3.0 * x) / (1.0 + x * (7.0 / 3.0 + 5.0 / 6.0 * x))
    } else {
        let l1 = x.ln();
        let l2 = l1.ln();
        l1 - l2 + l2 / l1
    };
    if q < 1e-10 {
        return Some(w);
    }
    for _ in 0..64 {
        let ew = w.exp();
        let f = w * ew - x;
        let wp1 = w + 1.0;
        let denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1);
        let step = f / denom;
        w -= step;
        if step.abs() <= 2e-16 * (1.0 + w.abs()) {
            break;
        }
    }
    Some(w)
}

/// `W0(exp(l))`, usable when `exp(l)` overflows.
pub fn lambert_w0_exp(l: f64) -> f64 {
    if l < 500.0 {
        return lambert_w0(l.exp()).expect("exp is positive");
    }
    // Solve w + ln w = l.
    let mut w = l - l.ln();
    for _ in 0..64 {
        let f = w + w.ln() - l;
        let step = f / (1.0 + 1.0 / w);
        w -= step;
        if step.abs() <= 1e-16 * w {
            break;
        }
    }
    w
}
