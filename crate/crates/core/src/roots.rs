//! Scalar root finding: bisection with an optional Newton polish.

use crate::error::{Error, Result};

/// Bisection on `[lo, hi]` until the bracket is shorter than `tol`.
///
/// Returns early on an exact zero, so symmetric problems land on the exact root.
pub fn bisect<F>(what: &'static str, mut f: F, lo: f64, hi: f64, tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let (mut a, mut b) = (lo, hi);
    let mut fa = f(a)?;
    let fb = f(b)?;
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() || !fa.is_finite() || !fb.is_finite() {
        return Err(Error::Bracket { what, lo, hi });
    }
    for _ in 0..400 {
        let m = 0.5 * (a + b);
        if (b - a) <= tol || m <= a || m >= b {
            break;
        }
        let fm = f(m)?;
        if fm == 0.0 {
            return Ok(m);
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

/// A few Newton steps from `x`, each accepted only if it stays in `[lo, hi]`
/// and does not increase `|f|`.
pub fn newton_polish<F>(mut fdf: F, mut x: f64, lo: f64, hi: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<(f64, f64)>,
{
    let (mut fx, mut dfx) = fdf(x)?;
    for _ in 0..8 {
        if fx == 0.0 || dfx == 0.0 {
            break;
        }
        let next = x - fx / dfx;
        if !(lo..=hi).contains(&next) {
            break;
        }
        let (fn_, dfn) = fdf(next)?;
        if fn_.abs() >= fx.abs() {
            break;
        }
        x = next;
        fx = fn_;
        dfx = dfn;
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bisection_finds_sqrt2() {
        let r = bisect("sqrt2", |x| Ok(x * x - 2.0), 0.0, 2.0, 1e-15).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-15);
        let r = newton_polish(|x| Ok((x * x - 2.0, 2.0 * x)), 1.4, 0.0, 2.0).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn bisection_reports_bad_bracket() {
        let e = bisect("none", |x| Ok(x * x + 1.0), -1.0, 1.0, 1e-12).unwrap_err();
        assert!(matches!(e, Error::Bracket { lo, hi, .. } if lo == -1.0 && hi == 1.0));
    }

    #[test]
    fn exact_midpoint_root() {
        let r = bisect("mid", |x| Ok(x - 0.5), 0.25, 0.75, 1e-15).unwrap();
        assert_eq!(r, 0.5);
    }
}
