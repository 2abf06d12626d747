//! Lagrange points, critical values and the Kepler Hill radius.

mod hill;

pub use hill::{hill_components, hill_membership, CellLabel, HillGrid, HillRegion};

use nalgebra::Vector2;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{effective_potential, potential_gradient, PhasePoint, Primary, SystemConfig};
use crate::roots::{bisect, newton_polish};

/// `u(rho) = U(rho, 0)`, the potential on the segment from the moon to the earth.
pub fn axis_potential_u(rho: f64, cfg: &SystemConfig) -> Result<(f64, f64)> {
    check_unit_interval("axis_potential_u", rho)?;
    let mu = cfg.mu();
    let u = -mu / rho - (1.0 - mu) / (1.0 - rho) - 0.5 * (rho - 1.0 + mu).powi(2);
    Ok((u, axis_du(rho, mu)))
}

pub fn axis_potential_u2(rho: f64, cfg: &SystemConfig) -> Result<f64> {
    check_unit_interval("axis_potential_u2", rho)?;
    let mu = cfg.mu();
    Ok(-2.0 * mu / rho.powi(3) - 2.0 * (1.0 - mu) / (1.0 - rho).powi(3) - 1.0)
}

fn axis_du(rho: f64, mu: f64) -> f64 {
    mu / (rho * rho) - (1.0 - mu) / ((1.0 - rho) * (1.0 - rho)) + 1.0 - rho - mu
}

fn check_unit_interval(what: &'static str, x: f64) -> Result<()> {
    if x > 0.0 && x < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain {
            what,
            value: x,
            domain: "(0, 1)",
        })
    }
}

/// Distance `d` from the moon to the first Lagrange point.
pub fn find_l1_distance(cfg: &SystemConfig) -> Result<f64> {
    let mu = cfg.mu();
    if mu <= 0.0 || mu >= 1.0 {
        return Err(Error::DegenerateMass(mu));
    }
    let (lo, hi) = (1e-6, 1.0 - 1e-6);
    let d = bisect("u'(rho) = 0", |r| Ok(axis_du(r, mu)), lo, hi, 1e-13)?;
    newton_polish(
        |r| {
            let u2 = -2.0 * mu / r.powi(3) - 2.0 * (1.0 - mu) / (1.0 - r).powi(3) - 1.0;
            Ok((axis_du(r, mu), u2))
        },
        d,
        lo,
        hi,
    )
}

/// The mass ratio whose first Lagrange point sits at distance `d` from the moon.
pub fn mu_from_d(d: f64) -> Result<f64> {
    check_unit_interval("mu_from_d", d)?;
    let num = d.powi(5) - 3.0 * d.powi(4) + 3.0 * d.powi(3);
    let den = d.powi(4) - 2.0 * d.powi(3) - d * d + 2.0 * d - 1.0;
    // den = (d - 1/2)^4 - 5/2 (d - 1/2)^2 - 7/16 < 0 on (0, 1)
    debug_assert!(den < 0.0);
    Ok(-num / den)
}

/// `rho^5 - (3 - mu) rho^4 + (3 - 2 mu) rho^3 - mu rho^2 + 2 mu rho - mu`.
pub fn l1_quintic(rho: f64, mu: f64) -> f64 {
    ((((rho - (3.0 - mu)) * rho + (3.0 - 2.0 * mu)) * rho - mu) * rho + 2.0 * mu) * rho - mu
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LagrangePoint {
    pub index: usize,
    pub position: Vector2<f64>,
    pub lift: PhasePoint,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LagrangeSet {
    pub points: [LagrangePoint; 5],
    /// Distance from the moon to the first Lagrange point.
    pub d: f64,
}

impl LagrangeSet {
    pub fn get(&self, index: usize) -> &LagrangePoint {
        &self.points[index - 1]
    }

    pub fn values(&self) -> [f64; 5] {
        self.points.map(|p| p.value)
    }
}

fn lift(index: usize, position: Vector2<f64>, cfg: &SystemConfig) -> Result<LagrangePoint> {
    let lift = PhasePoint {
        q: position,
        p: Vector2::new(-position[1], position[0]),
    };
    Ok(LagrangePoint {
        index,
        position,
        lift,
        value: effective_potential(&position, cfg)?,
    })
}

fn axis_root(cfg: &SystemConfig, what: &'static str, lo: f64, hi: f64) -> Result<f64> {
    let grad = |x: f64| Ok(potential_gradient(&Vector2::new(x, 0.0), cfg)?[0]);
    let x = bisect(what, grad, lo, hi, 1e-14)?;
    newton_polish(
        |x| {
            let q = Vector2::new(x, 0.0);
            let g = potential_gradient(&q, cfg)?[0];
            let h = crate::model::potential_hessian(&q, cfg)?[(0, 0)];
            Ok((g, h))
        },
        x,
        lo,
        hi,
    )
}

pub fn find_lagrange_points(cfg: &SystemConfig) -> Result<LagrangeSet> {
    let mu = cfg.mu();
    let d = find_l1_distance(cfg)?;
    let l1 = cfg.moon_pos() + Vector2::new(d, 0.0);
    let l2 = axis_root(cfg, "dU/dx on the far side of the moon", -3.0, -(1.0 - mu) - 1e-6)?;
    let l3 = axis_root(cfg, "dU/dx on the far side of the earth", mu + 1e-6, 3.0)?;
    let h = 3f64.sqrt() / 2.0;
    Ok(LagrangeSet {
        points: [
            lift(1, l1, cfg)?,
            lift(2, Vector2::new(l2, 0.0), cfg)?,
            lift(3, Vector2::new(l3, 0.0), cfg)?,
            lift(4, Vector2::new(mu - 0.5, h), cfg)?,
            lift(5, Vector2::new(mu - 0.5, -h), cfg)?,
        ],
        d,
    })
}

/// The critical value `H(L1)`.
pub fn first_critical_value(cfg: &SystemConfig) -> Result<f64> {
    let d = find_l1_distance(cfg)?;
    Ok(axis_potential_u(d, cfg)?.0)
}

/// `mu / |q - q0|^3 + (1 - mu) / |q - q1|^3` with `q0` the moon and `q1` the earth.
pub fn rho_hessian(q: &Vector2<f64>, cfg: &SystemConfig) -> Result<f64> {
    cfg.check_regular(q)?;
    let mut rho = 0.0;
    for primary in [Primary::Moon, Primary::Earth] {
        let m = cfg.mass(primary);
        if m > 0.0 {
            rho += m / (q - cfg.position(primary)).norm().powi(3);
        }
    }
    Ok(rho)
}

/// Smallest positive root of `r^3 + 2 k r + 2 = 0`.
///
/// `k = -3/2` is accepted as the limiting case with the double root `r = 1`.
pub fn kepler_hill_radius(k: f64) -> Result<f64> {
    if !(k <= -1.5) {
        return Err(Error::Domain {
            what: "kepler_hill_radius",
            value: k,
            domain: "k <= -3/2 (compact Hill region)",
        });
    }
    let cubic = |r: f64| Ok(r * r * r + 2.0 * k * r + 2.0);
    let r = bisect("r^3 + 2kr + 2", cubic, 0.0, 1.0, 1e-15)?;
    newton_polish(|r| Ok((r * r * r + 2.0 * k * r + 2.0, 3.0 * r * r + 2.0 * k)), r, 0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::hamiltonian_gradient;
    use proptest::prelude::*;

    // independent oracle: a uniform scan for the sign change of u' followed
    // by plain halving, with no shared code path
    fn l1_oracle(mu: f64) -> f64 {
        let up = |r: f64| mu / (r * r) - (1.0 - mu) / ((1.0 - r) * (1.0 - r)) + 1.0 - r - mu;
        let n = 1_000_000;
        let mut lo = 0.0;
        for i in 1..n {
            let r = i as f64 / n as f64;
            if up(r) <= 0.0 {
                lo = r - 1.0 / n as f64;
                break;
            }
        }
        let mut hi = lo + 1.0 / n as f64;
        for _ in 0..60 {
            let m = 0.5 * (lo + hi);
            if up(m) > 0.0 {
                lo = m;
            } else {
                hi = m;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn earth_moon_l1_distance() {
        let cfg = SystemConfig::new(0.0121505).unwrap();
        let d = find_l1_distance(&cfg).unwrap();
        assert!((d - l1_oracle(0.0121505)).abs() < 1e-12);
        assert!((d - 0.150933952982659).abs() < 1e-12);
    }

    #[test]
    fn l1_symmetric_and_degenerate() {
        let cfg = SystemConfig::new(0.5).unwrap();
        assert_eq!(find_l1_distance(&cfg).unwrap(), 0.5);
        for mu in [0.0, 1.0] {
            let e = find_l1_distance(&SystemConfig::new(mu).unwrap()).unwrap_err();
            assert!(matches!(e, Error::DegenerateMass(_)));
        }
    }

    #[test]
    fn axis_function_values() {
        let cfg = SystemConfig::new(0.5).unwrap();
        assert!((axis_potential_u(0.5, &cfg).unwrap().0 + 2.0).abs() < 1e-15);
        for mu in [0.05, 0.3, 0.5] {
            let cfg = SystemConfig::new(mu).unwrap();
            for i in 1..1000 {
                assert!(axis_potential_u2(i as f64 / 1000.0, &cfg).unwrap() < 0.0);
            }
            let d = find_l1_distance(&cfg).unwrap();
            assert!(axis_potential_u(d, &cfg).unwrap().1.abs() < 1e-10);
            assert!((d - l1_oracle(mu)).abs() < 1e-11);
        }
        assert!(axis_potential_u(1.0, &cfg).is_err());
    }

    #[test]
    fn mu_from_d_values() {
        assert_eq!(mu_from_d(0.5).unwrap(), 0.5);
        assert!(mu_from_d(1e-4).unwrap() < 1e-11);
        for i in 1..1000 {
            let d = i as f64 / 1000.0;
            let mu = mu_from_d(d).unwrap();
            assert!(l1_quintic(d, mu).abs() < 1e-14, "{d}");
        }
    }

    #[test]
    fn lagrange_points_are_critical_and_ordered() {
        for mu in [0.05, 0.1, 0.2, 0.3, 0.4, 0.45] {
            let cfg = SystemConfig::new(mu).unwrap();
            let set = find_lagrange_points(&cfg).unwrap();
            for p in &set.points {
                assert!(potential_gradient(&p.position, &cfg).unwrap().norm() < 1e-10);
                assert!(hamiltonian_gradient(&p.lift, &cfg).unwrap().norm() < 1e-10);
                assert!(crate::model::hamiltonian_vector_field(&p.lift, &cfg).unwrap().norm() < 1e-10);
            }
            let v = set.values();
            assert!(v[0] < v[1] && v[1] < v[2] && v[2] < v[3], "{v:?}");
            assert!((v[3] - v[4]).abs() < 1e-14);
            assert!(set.d > 0.0 && set.d < 1.0);
        }
    }

    #[test]
    fn rho_hessian_at_l1() {
        let cfg = SystemConfig::new(0.5).unwrap();
        assert_eq!(rho_hessian(&Vector2::zeros(), &cfg).unwrap(), 8.0);
        for i in 1..50 {
            let cfg = SystemConfig::new(i as f64 / 50.0).unwrap();
            let set = find_lagrange_points(&cfg).unwrap();
            assert!(rho_hessian(&set.get(1).position, &cfg).unwrap() >= 4.0);
        }
        // rho_h -> 4 from above like mu^(1/3)
        let mut last = f64::INFINITY;
        for mu in [1e-4, 1e-6, 1e-8, 1e-10] {
            let cfg = SystemConfig::new(mu).unwrap();
            let set = find_lagrange_points(&cfg).unwrap();
            let r = rho_hessian(&set.get(1).position, &cfg).unwrap();
            assert!(r > 4.0 && r < last, "{r}");
            last = r;
        }
        assert!(last < 4.005, "{last}");
    }

    #[test]
    fn kepler_radius() {
        assert!((kepler_hill_radius(-1.5).unwrap() - 1.0).abs() < 1e-12);
        let r = kepler_hill_radius(-2.0).unwrap();
        // trigonometric solution of the depressed cubic r^3 - 4 r + 2
        let m = 2.0 * (4.0f64 / 3.0).sqrt();
        let phi = ((3.0 * 2.0) / (2.0 * -4.0) * (3.0f64 / 4.0).sqrt()).acos() / 3.0;
        let roots: Vec<f64> = (0..3)
            .map(|j| m * (phi - 2.0 * std::f64::consts::PI * j as f64 / 3.0).cos())
            .collect();
        let smallest = roots.into_iter().filter(|&x| x > 0.0).fold(f64::INFINITY, f64::min);
        assert!((r - smallest).abs() < 1e-13);
        assert!((r - 0.539188872810889).abs() < 1e-13);
        assert!(kepler_hill_radius(-1.0).is_err());
        for k in [-1.6, -2.5, -10.0] {
            let r = kepler_hill_radius(k).unwrap();
            assert!((r * r * r + 2.0 * k * r + 2.0).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn l1_round_trip(mu in 0.001f64..0.999) {
            let cfg = SystemConfig::new(mu).unwrap();
            let d = find_l1_distance(&cfg).unwrap();
            prop_assert!((mu_from_d(d).unwrap() - mu).abs() < 1e-10);
            prop_assert!(l1_quintic(d, mu).abs() < 1e-12);
        }

        #[test]
        fn d_round_trip(d in 0.01f64..0.99) {
            let mu = mu_from_d(d).unwrap();
            let cfg = SystemConfig::new(mu).unwrap();
            prop_assert!((find_l1_distance(&cfg).unwrap() - d).abs() < 1e-10);
        }
    }
}
