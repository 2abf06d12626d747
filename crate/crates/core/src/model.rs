//! The rotating-frame Hamiltonian of the planar circular restricted
//! three-body problem and its effective potential.
//!
//! Units are normalised so that the primaries have total mass one, unit
//! separation and unit angular velocity. The earth sits at `(mu, 0)` and the
//! moon at `(-(1 - mu), 0)`; `mu` is the mass carried by the moon term.

use std::fmt;

use nalgebra::{Matrix2, Vector2, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Distance to a massive primary below which evaluation is refused.
pub const DEFAULT_SINGULARITY_THRESHOLD: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Primary {
    Earth,
    Moon,
}

impl fmt::Display for Primary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Primary::Earth => f.write_str("earth"),
            Primary::Moon => f.write_str("moon"),
        }
    }
}

impl Primary {
    pub fn other(self) -> Primary {
        match self {
            Primary::Earth => Primary::Moon,
            Primary::Moon => Primary::Earth,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    mu: f64,
    singularity_threshold: f64,
}

impl SystemConfig {
    pub fn new(mu: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&mu) {
            return Err(Error::InvalidMass(mu));
        }
        Ok(Self {
            mu,
            singularity_threshold: DEFAULT_SINGULARITY_THRESHOLD,
        })
    }

    pub fn with_singularity_threshold(mut self, threshold: f64) -> Self {
        self.singularity_threshold = threshold;
        self
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn singularity_threshold(&self) -> f64 {
        self.singularity_threshold
    }

    pub fn earth_pos(&self) -> Vector2<f64> {
        Vector2::new(self.mu, 0.0)
    }

    pub fn moon_pos(&self) -> Vector2<f64> {
        Vector2::new(-(1.0 - self.mu), 0.0)
    }

    pub fn position(&self, primary: Primary) -> Vector2<f64> {
        match primary {
            Primary::Earth => self.earth_pos(),
            Primary::Moon => self.moon_pos(),
        }
    }

    pub fn mass(&self, primary: Primary) -> f64 {
        match primary {
            Primary::Earth => 1.0 - self.mu,
            Primary::Moon => self.mu,
        }
    }

    /// The same system with the two primaries relabelled (`mu -> 1 - mu`).
    ///
    /// The relabelled system is the reflection `q1 -> -q1` of the original one,
    /// so the earth of `self` becomes the moon of the mirror.
    pub fn mirrored(&self) -> SystemConfig {
        SystemConfig {
            mu: 1.0 - self.mu,
            singularity_threshold: self.singularity_threshold,
        }
    }

    /// Fails when `q` is closer than the threshold to a primary with positive mass.
    pub fn check_regular(&self, q: &Vector2<f64>) -> Result<()> {
        for primary in [Primary::Earth, Primary::Moon] {
            if self.mass(primary) == 0.0 {
                continue;
            }
            let distance = (q - self.position(primary)).norm();
            if distance < self.singularity_threshold {
                return Err(Error::Singularity { primary, distance });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub q: Vector2<f64>,
    pub p: Vector2<f64>,
}

impl PhasePoint {
    pub fn new(q1: f64, q2: f64, p1: f64, p2: f64) -> Self {
        Self {
            q: Vector2::new(q1, q2),
            p: Vector2::new(p1, p2),
        }
    }

    pub fn from_vector(v: &Vector4<f64>) -> Self {
        Self::new(v[0], v[1], v[2], v[3])
    }

    pub fn to_vector(&self) -> Vector4<f64> {
        Vector4::new(self.q[0], self.q[1], self.p[0], self.p[1])
    }
}

/// Polar coordinates centred at the moon; `theta = 0` points at the earth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LunarPolar {
    pub rho: f64,
    pub theta: f64,
}

impl LunarPolar {
    pub fn new(rho: f64, theta: f64) -> Self {
        Self { rho, theta }
    }

    pub fn to_cartesian(&self, cfg: &SystemConfig) -> Vector2<f64> {
        cfg.moon_pos() + self.rho * Vector2::new(self.theta.cos(), self.theta.sin())
    }

    pub fn from_cartesian(q: &Vector2<f64>, cfg: &SystemConfig) -> Self {
        let rel = q - cfg.moon_pos();
        let theta = rel[1].atan2(rel[0]).rem_euclid(std::f64::consts::TAU);
        Self {
            rho: rel.norm(),
            theta,
        }
    }
}

pub fn effective_potential(q: &Vector2<f64>, cfg: &SystemConfig) -> Result<f64> {
    cfg.check_regular(q)?;
    Ok(effective_potential_unchecked(q, cfg))
}

pub(crate) fn effective_potential_unchecked(q: &Vector2<f64>, cfg: &SystemConfig) -> f64 {
    let mu = cfg.mu();
    let mut u = -0.5 * q.norm_squared();
    if mu < 1.0 {
        u -= (1.0 - mu) / (q - cfg.earth_pos()).norm();
    }
    if mu > 0.0 {
        u -= mu / (q - cfg.moon_pos()).norm();
    }
    u
}

/// Gradient of the effective potential.
pub fn potential_gradient(q: &Vector2<f64>, cfg: &SystemConfig) -> Result<Vector2<f64>> {
    cfg.check_regular(q)?;
    let mut g = -q;
    for primary in [Primary::Earth, Primary::Moon] {
        let m = cfg.mass(primary);
        if m == 0.0 {
            continue;
        }
        let d = q - cfg.position(primary);
        g += m * d / d.norm().powi(3);
    }
    Ok(g)
}

pub fn potential_hessian(q: &Vector2<f64>, cfg: &SystemConfig) -> Result<Matrix2<f64>> {
    cfg.check_regular(q)?;
    let mut h = -Matrix2::identity();
    for primary in [Primary::Earth, Primary::Moon] {
        let m = cfg.mass(primary);
        if m == 0.0 {
            continue;
        }
        let d = q - cfg.position(primary);
        let r = d.norm();
        h += m * (Matrix2::identity() / r.powi(3) - 3.0 * d * d.transpose() / r.powi(5));
    }
    Ok(h)
}

/// `1/2 |p|^2 - (1-mu)/|q-E| - mu/|q-M| + p1 q2 - p2 q1`.
pub fn hamiltonian(x: &PhasePoint, cfg: &SystemConfig) -> Result<f64> {
    cfg.check_regular(&x.q)?;
    let mu = cfg.mu();
    let (q, p) = (&x.q, &x.p);
    let mut h = 0.5 * p.norm_squared() + p[0] * q[1] - p[1] * q[0];
    if mu < 1.0 {
        h -= (1.0 - mu) / (q - cfg.earth_pos()).norm();
    }
    if mu > 0.0 {
        h -= mu / (q - cfg.moon_pos()).norm();
    }
    Ok(h)
}

/// The completed-square form `1/2 ((p1+q2)^2 + (p2-q1)^2) + U(q)`.
pub fn hamiltonian_completed(x: &PhasePoint, cfg: &SystemConfig) -> Result<f64> {
    let u = effective_potential(&x.q, cfg)?;
    Ok(0.5 * kinetic_velocity(x).norm_squared() + u)
}

/// `(p1 + q2, p2 - q1)`, the rotating-frame velocity.
pub fn kinetic_velocity(x: &PhasePoint) -> Vector2<f64> {
    Vector2::new(x.p[0] + x.q[1], x.p[1] - x.q[0])
}

/// `(dH/dq, dH/dp)` stacked as a 4-vector.
pub fn hamiltonian_gradient(x: &PhasePoint, cfg: &SystemConfig) -> Result<Vector4<f64>> {
    let gu = potential_gradient(&x.q, cfg)?;
    let v = kinetic_velocity(x);
    Ok(Vector4::new(-v[1] + gu[0], v[0] + gu[1], v[0], v[1]))
}

/// Hamilton's equations `(dH/dp, -dH/dq)`.
pub fn hamiltonian_vector_field(x: &PhasePoint, cfg: &SystemConfig) -> Result<Vector4<f64>> {
    let g = hamiltonian_gradient(x, cfg)?;
    Ok(Vector4::new(g[2], g[3], -g[0], -g[1]))
}

fn lunar_kappa(pt: &LunarPolar) -> f64 {
    pt.rho * pt.rho - 2.0 * pt.rho * pt.theta.cos() + 1.0
}

fn check_lunar(pt: &LunarPolar, cfg: &SystemConfig) -> Result<f64> {
    if pt.rho <= 0.0 || (cfg.mu() > 0.0 && pt.rho < cfg.singularity_threshold()) {
        return Err(Error::Singularity {
            primary: Primary::Moon,
            distance: pt.rho,
        });
    }
    let kappa = lunar_kappa(pt);
    let dist = kappa.max(0.0).sqrt();
    if cfg.mu() < 1.0 && dist < cfg.singularity_threshold() {
        return Err(Error::Singularity {
            primary: Primary::Earth,
            distance: dist,
        });
    }
    Ok(kappa)
}

/// The effective potential written in lunar polar coordinates.
pub fn effective_potential_lunar(pt: &LunarPolar, cfg: &SystemConfig) -> Result<f64> {
    let kappa = check_lunar(pt, cfg)?;
    let mu = cfg.mu();
    let (rho, c) = (pt.rho, pt.theta.cos());
    Ok(-mu / rho - (1.0 - mu) / kappa.sqrt() - 0.5 * rho * rho + rho * c * (1.0 - mu)
        - 0.5 * (1.0 - mu) * (1.0 - mu))
}

/// Closed-form partial derivatives of `U(rho, theta)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LunarPartials {
    pub d_rho: f64,
    pub d_theta: f64,
    pub d_rho_rho: f64,
    pub d_rho_theta: f64,
    pub d_rho3: f64,
}

pub fn potential_partials(pt: &LunarPolar, cfg: &SystemConfig) -> Result<LunarPartials> {
    let kappa = check_lunar(pt, cfg)?;
    let mu = cfg.mu();
    let nu = 1.0 - mu;
    let rho = pt.rho;
    let (s, c) = pt.theta.sin_cos();
    let k12 = kappa.sqrt();
    let k32 = kappa * k12;
    let k52 = k32 * kappa;
    let k72 = k52 * kappa;

    let d_rho = mu / (rho * rho) + nu * (rho - c) / k32 - rho + c * nu;
    let d_theta = nu * rho * s * (1.0 / k32 - 1.0);
    let d_rho_rho = -2.0 * mu / rho.powi(3)
        - nu / k52 * (2.0 * rho * rho - 4.0 * rho * c - 1.0 + 3.0 * c * c)
        - 1.0;
    let d_rho_theta = nu * s * ((-2.0 * rho * rho + rho * c + 1.0) / k52 - 1.0);
    let d_rho3 = 6.0 * mu / rho.powi(4)
        - 3.0 * nu * (rho - c) * (3.0 + 4.0 * rho * c - 2.0 * rho * rho - 5.0 * c * c) / k72;

    Ok(LunarPartials {
        d_rho,
        d_theta,
        d_rho_rho,
        d_rho_theta,
        d_rho3,
    })
}
