//! Starshapedness of the regularized Kepler levels `Σ_k` in the fibers of `T*S²`.

use std::f64::consts::{PI, TAU};

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::moser::{kepler_regularized_q, CotangentSpherePoint};

const LEVEL_TOLERANCE: f64 = 1e-10;

/// `g_a(θ) = (1 + (1 - cosθ) a)² / (4 sinθ (1 - cosθ))` for `θ ∈ (0, π)`.
pub fn g_a(theta: f64, a: f64) -> Result<f64> {
    if !(theta > 0.0 && theta < PI) {
        return Err(Error::Domain {
            what: "g_a",
            value: theta,
            domain: "(0, pi)",
        });
    }
    let s = 1.0 - theta.cos();
    Ok((1.0 + s * a).powi(2) / (4.0 * theta.sin() * s))
}

fn check_t(t: f64, what: &'static str) -> Result<()> {
    if t > -1.0 && t < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain {
            what,
            value: t,
            domain: "(-1, 1)",
        })
    }
}

/// `h(t) = (2 - t)⁴ / (16 (1 - t²)(1 - t)²)`, so that `h(cosθ) = g_1(θ)²`.
pub fn h(t: f64) -> Result<f64> {
    check_t(t, "h")?;
    Ok((2.0 - t).powi(4) / (16.0 * (1.0 - t * t) * (1.0 - t).powi(2)))
}

/// `h'(t) = -3t (t - 2)³ / (8 (t + 1)² (t - 1)⁴)`.
pub fn h_prime(t: f64) -> Result<f64> {
    check_t(t, "h'")?;
    Ok(-3.0 * t * (t - 2.0).powi(3) / (8.0 * (t + 1.0).powi(2) * (t - 1.0).powi(4)))
}

/// Derivative at `λ = 1` of `λ ↦ |λη| f(ξ, λη)` for a point of `Σ_k` on the
/// slice `ξ1 = 0`, in the reduced form
/// `[1 + s(a + 2η1ξ2)] / [1 + s(a + η1ξ2)]`, `s = 1 - ξ0`, `a = -½ - k`.
pub fn kepler_starshaped_fprime(pt: &CotangentSpherePoint, k: f64) -> Result<f64> {
    if pt.xi[1].abs() > LEVEL_TOLERANCE {
        return Err(Error::Domain {
            what: "starshaped slice",
            value: pt.xi[1],
            domain: "xi1 = 0",
        });
    }
    if pt.xi[0] >= 1.0 {
        return Err(Error::Pole);
    }
    let defect = kepler_regularized_q(pt, k) - 0.5;
    if defect.abs() > LEVEL_TOLERANCE {
        return Err(Error::OffLevel(defect));
    }
    Ok(fprime(pt, k))
}

fn fprime(pt: &CotangentSpherePoint, k: f64) -> f64 {
    let s = 1.0 - pt.xi[0];
    let a = -0.5 - k;
    let l = pt.eta[1] * pt.xi[2];
    (1.0 + s * (a + 2.0 * l)) / (1.0 + s * (a + l))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StarshapedReport {
    pub k: f64,
    pub a: f64,
    /// Rays `t ↦ (ξ, t e)` examined.
    pub rays: usize,
    /// Rays meeting `Σ_k`; each contributes its first crossing.
    pub crossings: usize,
    pub min_fprime: f64,
    /// `(θ, ψ)` of the minimum.
    pub argmin: [f64; 2],
    /// Rays that meet `{Q = ½}` a second time. Such crossings lie on another
    /// component, with `f'(1) < 0`; they are counted, not certified.
    pub outer_crossings: usize,
    pub max_outer_fprime: Option<f64>,
    /// Minimum over the slice of `g_a(θ)`; `> 1` means every ray with a
    /// negative rotation term still has real crossings.
    pub min_g_a: f64,
    pub certified: bool,
}

/// Slice point `ξ = (cosθ, 0, sinθ)`, `η = t (cosψ e1 + sinψ e2)` with
/// `e1 = (0,1,0)`, `e2 = (-sinθ, 0, cosθ)`.
fn slice_point(theta: f64, psi: f64, t: f64) -> CotangentSpherePoint {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = psi.sin_cos();
    CotangentSpherePoint::new(
        Vector3::new(ct, 0.0, st),
        Vector3::new(-st * sp, cp, ct * sp) * t,
    )
}

/// Sweeps an `n × n` grid of `(θ, ψ)` on the slice `ξ1 = 0`, `θ ∈ (0, 2π)`.
///
/// On a ray the level equation is `A t² + B t - 1 = 0` with
/// `A = s cosψ sinθ`, `B = 1 + s a`.
pub fn starshaped_slice(k: f64, n: usize) -> Result<StarshapedReport> {
    let a = -0.5 - k;
    let n = n.max(2);
    let rows: Vec<_> = (0..n)
        .into_par_iter()
        .map(|i| -> Result<_> {
            // θ = 0 is the pole, where there is nothing to check
            let theta = TAU * (i as f64 + 0.5) / n as f64;
            let s = 1.0 - theta.cos();
            let b = 1.0 + s * a;
            let mut out = Vec::with_capacity(n);
            for j in 0..n {
                let psi = TAU * j as f64 / n as f64;
                let big_a = s * psi.cos() * theta.sin();
                let disc = b * b + 4.0 * big_a;
                if disc < 0.0 || (big_a <= 0.0 && b <= 0.0) {
                    out.push((theta, psi, None, None));
                    continue;
                }
                let t1 = 2.0 / (b + disc.sqrt());
                let f1 = kepler_starshaped_fprime(&slice_point(theta, psi, t1), k)?;
                let outer = if big_a < 0.0 {
                    // far out on the ray; only the sign is of interest
                    let t2 = -(b + disc.sqrt()) / (2.0 * big_a);
                    Some(fprime(&slice_point(theta, psi, t2), k))
                } else {
                    None
                };
                out.push((theta, psi, Some(f1), outer));
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;

    let mut report = StarshapedReport {
        k,
        a,
        rays: n * n,
        crossings: 0,
        min_fprime: f64::INFINITY,
        argmin: [f64::NAN; 2],
        outer_crossings: 0,
        max_outer_fprime: None,
        min_g_a: f64::INFINITY,
        certified: false,
    };
    for (theta, psi, f1, f2) in rows.into_iter().flatten() {
        if let Some(f) = f1 {
            report.crossings += 1;
            if f < report.min_fprime {
                report.min_fprime = f;
                report.argmin = [theta, psi];
            }
        }
        if let Some(f) = f2 {
            report.outer_crossings += 1;
            report.max_outer_fprime = Some(report.max_outer_fprime.map_or(f, |m: f64| m.max(f)));
        }
    }
    for i in 0..n {
        let theta = PI * (i as f64 + 0.5) / n as f64;
        report.min_g_a = report.min_g_a.min(g_a(theta, a)?);
    }
    report.certified = report.crossings == report.rays && report.min_fprime > 0.0;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn h_and_g_examples() {
        assert_eq!(h(0.0).unwrap(), 1.0);
        assert!((h(0.5).unwrap() - 1.6875).abs() < 1e-15);
        assert!((g_a(PI / 2.0, 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!(h(1.0).is_err() && g_a(0.0, 1.0).is_err() && h_prime(-1.0).is_err());
    }

    #[test]
    fn h_prime_matches_finite_difference() {
        for t in [-0.9, -0.5, -0.1, 0.2, 0.7, 0.95] {
            let e = 1e-6;
            let fd = (h(t + e).unwrap() - h(t - e).unwrap()) / (2.0 * e);
            let an = h_prime(t).unwrap();
            assert!((fd - an).abs() < 1e-6 * an.abs().max(1.0), "{t}: {fd} vs {an}");
        }
    }

    #[test]
    fn h_of_cos_is_g1_squared() {
        for i in 1..200 {
            let th = PI * i as f64 / 200.0;
            let lhs = h(th.cos()).unwrap();
            let rhs = g_a(th, 1.0).unwrap().powi(2);
            assert!((lhs - rhs).abs() < 1e-12 * rhs, "{th}");
        }
    }

    #[test]
    fn geodesic_case_is_one() {
        // k = -1/2 and |η| = 1 force sη1ξ2 = 0 on the level
        for th in [0.3, 1.0, 2.0, 4.5] {
            for psi in [PI / 2.0, 3.0 * PI / 2.0] {
                let pt = slice_point(th, psi, 1.0);
                assert!((kepler_starshaped_fprime(&pt, -0.5).unwrap() - 1.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn fprime_matches_numerical_derivative() {
        let k = -2.0;
        for (th, psi) in [(0.7, 0.4), (2.5, 3.3), (5.0, 2.0)] {
            let r = starshaped_slice_point(th, psi, k);
            let g = |l: f64| {
                let p = CotangentSpherePoint::new(r.xi, r.eta * l);
                (2.0 * kepler_regularized_q(&p, k)).sqrt()
            };
            let e = 1e-6;
            let fd = (g(1.0 + e) - g(1.0 - e)) / (2.0 * e);
            let an = kepler_starshaped_fprime(&r, k).unwrap();
            assert!((fd - an).abs() < 1e-6, "{fd} vs {an}");
        }
    }

    fn starshaped_slice_point(th: f64, psi: f64, k: f64) -> CotangentSpherePoint {
        let s = 1.0 - th.cos();
        let b = 1.0 + s * (-0.5 - k);
        let a = s * psi.cos() * th.sin();
        let t = 2.0 / (b + (b * b + 4.0 * a).sqrt());
        slice_point(th, psi, t)
    }

    #[test]
    fn off_slice_and_off_level_rejected() {
        let mut pt = starshaped_slice_point(1.0, 0.5, -2.0);
        assert!(kepler_starshaped_fprime(&pt, -2.0).is_ok());
        pt.eta *= 1.01;
        assert!(matches!(kepler_starshaped_fprime(&pt, -2.0), Err(Error::OffLevel(_))));
        let pt = CotangentSpherePoint::new(Vector3::new(0.0, 1.0, 0.0), Vector3::new(1.0, 0.0, 0.0));
        assert!(kepler_starshaped_fprime(&pt, -2.0).is_err());
    }

    #[test]
    fn slices_below_minus_three_halves_are_starshaped() {
        for k in [-1.6, -2.0, -5.0] {
            let r = starshaped_slice(k, 200).unwrap();
            assert!(r.certified, "{r:?}");
            assert!(r.min_g_a > 1.0);
        }
    }
}
