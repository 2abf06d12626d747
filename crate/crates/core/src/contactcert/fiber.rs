//! The fiberwise Liouville field `η∂η` on the regularized level near the moon.

use nalgebra::{Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Primary, SystemConfig};
use crate::moser::{CotangentSpherePoint, RegularizedHamiltonian};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FiberMargin {
    /// `X(Q) = |η|² f² + |η|² f (η·∂η f)`.
    pub x_of_q: f64,
    pub eta_norm: f64,
    pub f: f64,
    /// `η·∂η f`.
    pub eta_dfeta: f64,
    /// `|η|(1 - ξ0)`, the distance to the moon in the plane.
    pub collision_distance: f64,
    /// `|∂(1/|v|)|` along `η/|η|`; the constant `C` is the sup of this.
    pub c_local: f64,
}

fn regularized(k: f64, cfg: &SystemConfig) -> RegularizedHamiltonian {
    RegularizedHamiltonian::three_body(k, cfg, Primary::Moon)
}

/// Evaluates `X(Q)` for `X = η∂η` at a point of `{Q = ½μ²}` regularized at
/// the moon, with `|η|(1 - ξ0) < ε`.
pub fn regularized_fiber_margin(
    pt: &CotangentSpherePoint,
    k: f64,
    cfg: &SystemConfig,
    epsilon: f64,
) -> Result<FiberMargin> {
    let q = regularized(k, cfg);
    let defect = q.value(pt)? - q.level();
    if defect.abs() > 1e-10 {
        return Err(Error::OffLevel(defect));
    }
    let s = 1.0 - pt.xi[0];
    let n = pt.eta.norm();
    if s * n >= epsilon {
        return Err(Error::Domain {
            what: "fiber margin",
            value: s * n,
            domain: "|eta|(1 - xi0) < epsilon",
        });
    }
    let f = q.factor(pt)?;
    let (_, ge) = q.factor_gradient(pt)?;
    let eta_dfeta = pt.eta.dot(&ge);
    let n2 = n * n;

    let v = Vector2::new(pt.eta[1], pt.eta[2]) * s
        + Vector2::new(pt.xi[1], pt.xi[2]) * pt.eta[0]
        + q.center
        - q.other;
    let y = v - (q.center - q.other);
    let c_local = if n > 0.0 {
        (v.dot(&y) / v.norm().powi(3)).abs() / n
    } else {
        0.0
    };
    Ok(FiberMargin {
        x_of_q: n2 * f * f + n2 * f * eta_dfeta,
        eta_norm: n,
        f,
        eta_dfeta,
        collision_distance: s * n,
        c_local,
    })
}

/// Draws `n` points of `{Q = ½μ²}` inside the collision zone.
///
/// `ξ` is area-uniform on the cap `1 - ξ0 < 0.2` (uniform in `ξ0`), the fiber
/// direction is uniform, and the length is the first crossing of
/// `t f(ξ, t e) = μ` on `(0, ε/(1 - ξ0))`. Rays without a crossing are redrawn.
pub fn sample_collision_zone(
    k: f64,
    cfg: &SystemConfig,
    epsilon: f64,
    n: usize,
    seed: u64,
) -> Result<Vec<CotangentSpherePoint>> {
    let q = regularized(k, cfg);
    let mu = cfg.mu();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    let mut attempts = 0usize;
    while out.len() < n {
        attempts += 1;
        if attempts > 100 * n + 1000 {
            return Err(Error::NotFound(format!(
                "only {} of {n} collision-zone samples found",
                out.len()
            )));
        }
        let s: f64 = rng.random_range(1e-6..0.2);
        let alpha: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let beta: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let r = (s * (2.0 - s)).sqrt();
        let xi = Vector3::new(1.0 - s, r * alpha.cos(), r * alpha.sin());
        let e1 = Vector3::new(-r, (1.0 - s) * alpha.cos(), (1.0 - s) * alpha.sin());
        let e2 = Vector3::new(0.0, -alpha.sin(), alpha.cos());
        let e = e1 * beta.cos() + e2 * beta.sin();

        let g = |t: f64| -> Option<f64> {
            let pt = CotangentSpherePoint::new(xi, e * t);
            q.factor(&pt).ok().map(|f| t * f - mu)
        };
        let t_max = epsilon / s;
        let steps = 200;
        let mut lo = 0.0;
        let mut found = None;
        for i in 1..=steps {
            let hi = t_max * i as f64 / steps as f64;
            match g(hi) {
                Some(v) if v >= 0.0 => {
                    found = Some((lo, hi));
                    break;
                }
                Some(_) => lo = hi,
                None => break,
            }
        }
        let Some((mut a, mut b)) = found else { continue };
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if m <= a || m >= b {
                break;
            }
            match g(m) {
                Some(v) if v < 0.0 => a = m,
                _ => b = m,
            }
        }
        let t = if g(b).map_or(f64::INFINITY, f64::abs) < g(a).map_or(f64::INFINITY, f64::abs) {
            b
        } else {
            a
        };
        if t * s < epsilon {
            out.push(CotangentSpherePoint::new(xi, e * t));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FiberZoneReport {
    pub mu: f64,
    pub k: f64,
    pub epsilon: f64,
    pub samples: usize,
    pub seed: u64,
    pub min_x_of_q: f64,
    /// `(ξ, η)` at the minimum.
    pub argmin: [f64; 6],
    pub max_eta_norm: f64,
    pub min_abs_f: f64,
    /// Largest `c_local` seen, used as the constant `C`.
    pub c_estimate: f64,
    /// `μ² - 2με(1 + (1-μ)C)` with the sampled `C`; informational.
    pub bound: f64,
    pub eta_bound_holds: bool,
    pub f_bound_holds: bool,
    pub positive: bool,
}

pub fn fiber_zone_report(
    k: f64,
    cfg: &SystemConfig,
    epsilon: f64,
    n: usize,
    seed: u64,
) -> Result<FiberZoneReport> {
    let pts = sample_collision_zone(k, cfg, epsilon, n, seed)?;
    let mu = cfg.mu();
    let mut r = FiberZoneReport {
        mu,
        k,
        epsilon,
        samples: pts.len(),
        seed,
        min_x_of_q: f64::INFINITY,
        argmin: [f64::NAN; 6],
        max_eta_norm: 0.0,
        min_abs_f: f64::INFINITY,
        c_estimate: 0.0,
        bound: 0.0,
        eta_bound_holds: false,
        f_bound_holds: false,
        positive: false,
    };
    for pt in &pts {
        let m = regularized_fiber_margin(pt, k, cfg, epsilon)?;
        if m.x_of_q < r.min_x_of_q {
            r.min_x_of_q = m.x_of_q;
            r.argmin = pt.as_array();
        }
        r.max_eta_norm = r.max_eta_norm.max(m.eta_norm);
        r.min_abs_f = r.min_abs_f.min(m.f.abs());
        r.c_estimate = r.c_estimate.max(m.c_local);
    }
    r.bound = mu * mu - 2.0 * mu * epsilon * (1.0 + (1.0 - mu) * r.c_estimate);
    r.eta_bound_holds = r.max_eta_norm <= 2.0;
    r.f_bound_holds = r.min_abs_f >= 0.5 * mu;
    r.positive = r.samples > 0 && r.min_x_of_q > 0.0;
    Ok(r)
}
