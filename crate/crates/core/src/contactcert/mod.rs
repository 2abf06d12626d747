//! Liouville vector fields and their transversality to energy surfaces.
//!
//! Below the first critical value the moon component of `{H = c}` is
//! certified with `X = (q - M)∂q`. The Cauchy–Schwarz reduction turns the
//! fiberwise statement into the planar margin `U_ρ - sqrt(2(c - U))`.

mod fiber;
mod starshaped;
mod sweep;

pub use fiber::{regularized_fiber_margin, sample_collision_zone, FiberMargin, FiberZoneReport, fiber_zone_report};
pub use starshaped::{g_a, h, h_prime, kepler_starshaped_fprime, starshaped_slice, StarshapedReport};
pub use sweep::{certify_earth_component, certify_moon_component, SweepOptions};

use nalgebra::Vector2;

use crate::error::{Error, Result};
use crate::model::{
    effective_potential_lunar, hamiltonian_gradient, potential_partials, LunarPolar, PhasePoint,
    Primary, SystemConfig,
};

/// `dH(X)` for `X = (q - M)∂q`.
pub fn liouville_x_of_h(x: &PhasePoint, cfg: &SystemConfig) -> Result<f64> {
    liouville_x_of_h_about(x, cfg, Primary::Moon)
}

/// `dH(X)` for the radial field `(q - P)∂q` centred at either primary.
pub fn liouville_x_of_h_about(x: &PhasePoint, cfg: &SystemConfig, primary: Primary) -> Result<f64> {
    let rel = x.q - cfg.position(primary);
    if rel.norm() < cfg.singularity_threshold() {
        return Err(Error::Singularity {
            primary,
            distance: rel.norm(),
        });
    }
    let g = hamiltonian_gradient(x, cfg)?;
    Ok(rel[0] * g[0] + rel[1] * g[1])
}

/// The same quantity in lunar polar position coordinates:
/// `ρ sinθ (p1 + ρ sinθ) - ρ cosθ (p2 - ρ cosθ + 1 - μ) + ρ U_ρ`.
pub fn liouville_x_of_h_polar(pt: &LunarPolar, p: &Vector2<f64>, cfg: &SystemConfig) -> Result<f64> {
    let d = potential_partials(pt, cfg)?;
    let (s, c) = pt.theta.sin_cos();
    let rho = pt.rho;
    let mu = cfg.mu();
    Ok(rho * s * (p[0] + rho * s) - rho * c * (p[1] - rho * c + 1.0 - mu) + rho * d.d_rho)
}

/// `U_ρ - sqrt(2(c - U))`; positive values make `X` transverse on the whole fiber.
pub fn moon_sufficient_margin(pt: &LunarPolar, c: f64, cfg: &SystemConfig) -> Result<f64> {
    let u = effective_potential_lunar(pt, cfg)?;
    if u > c {
        return Err(Error::OutsideHillRegion {
            potential: u,
            energy: c,
        });
    }
    let d = potential_partials(pt, cfg)?;
    Ok(d.d_rho - (2.0 * (c - u)).sqrt())
}

/// `U(r, s)` in coordinates centred at the primary of mass `m` with the other
/// primary at `(1, 0)`.
pub fn appendix_potential(r: f64, s: f64, m: f64) -> f64 {
    -m / (r * r + s * s).sqrt()
        - (1.0 - m) / ((1.0 - r).powi(2) + s * s).sqrt()
        - 0.5 * (r - 1.0 + m).powi(2)
        - 0.5 * s * s
}

/// `r U_r + s U_s` in its simplified closed form.
pub fn appendix_radial_derivative(r: f64, s: f64, m: f64) -> f64 {
    let d = (1.0 - r).powi(2) + s * s;
    m / (r * r + s * s).sqrt() + (1.0 - m) * (r * r + s * s - r) / d.powf(1.5) + r * (1.0 - r - m)
        - s * s
}

/// `dH(X)` for the radial field at the origin of the same chart:
/// `m/|q| - p2 r + p1 s + (1-m)(r² + s² - r)/|q - (1,0)|³`.
pub fn appendix_x_of_h(r: f64, s: f64, p1: f64, p2: f64, m: f64) -> f64 {
    let d = (1.0 - r).powi(2) + s * s;
    m / (r * r + s * s).sqrt() - p2 * r + p1 * s + (1.0 - m) * (r * r + s * s - r) / d.powf(1.5)
}

fn check_chart(r: f64, s: f64, cfg: &SystemConfig) -> Result<()> {
    let t = cfg.singularity_threshold();
    let (d0, d1) = ((r * r + s * s).sqrt(), ((1.0 - r).powi(2) + s * s).sqrt());
    if d0 < t {
        return Err(Error::Singularity { primary: Primary::Earth, distance: d0 });
    }
    if d1 < t && cfg.mu() > 0.0 {
        return Err(Error::Singularity { primary: Primary::Moon, distance: d1 });
    }
    Ok(())
}

/// The earth-side margin `r U_r + s U_s - |(r,s)| sqrt(2(k - U))` in
/// earth-centred coordinates `(r, s) = (μ - q1, q2)`, pointing at the moon.
pub fn earth_cartesian_margin(r: f64, s: f64, k: f64, cfg: &SystemConfig) -> Result<f64> {
    check_chart(r, s, cfg)?;
    let m = 1.0 - cfg.mu();
    let u = appendix_potential(r, s, m);
    if u > k {
        return Err(Error::OutsideHillRegion { potential: u, energy: k });
    }
    Ok(appendix_radial_derivative(r, s, m) - (r * r + s * s).sqrt() * (2.0 * (k - u)).sqrt())
}

/// Earth-centred chart coordinates of a rotating-frame position.
pub fn earth_chart(q: &Vector2<f64>, cfg: &SystemConfig) -> (f64, f64) {
    (cfg.mu() - q[0], q[1])
}

/// Momenta in the earth-centred chart; the chart is the anti-symplectic
/// reflection `(q1, p2) -> (-q1, -p2)` composed with a shift, which keeps `H`.
pub fn earth_chart_momentum(p: &Vector2<f64>) -> (f64, f64) {
    (p[0], -p[1])
}
