//! Moser regularization: the switch `p = -x, q - c = y`, the stereographic
//! lift to `T*S^2` and the regularized Hamiltonians.
//!
//! On `T*S^2 ⊂ R^3 x R^3` the positions are `xi` (unit vector) and the
//! momenta are `eta` (tangent covector); the lift pulls `Σ dη∧dξ` back to
//! `Σ dy∧dx`, so `x` plays the role of position after the switch.

use std::io::Write;

use nalgebra::{Matrix4, SMatrix, Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{hamiltonian, PhasePoint, Primary, SystemConfig};

/// A point `(xi, eta)` of `T*S^2` in ambient coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CotangentSpherePoint {
    pub xi: Vector3<f64>,
    pub eta: Vector3<f64>,
}

impl CotangentSpherePoint {
    pub fn new(xi: Vector3<f64>, eta: Vector3<f64>) -> Self {
        Self { xi, eta }
    }

    /// `max(| |xi| - 1 |, |<xi, eta>|)`.
    pub fn constraint_defect(&self) -> f64 {
        (self.xi.norm() - 1.0).abs().max(self.xi.dot(&self.eta).abs())
    }

    /// Nearest point on the constraint set: normalise `xi`, drop the normal part of `eta`.
    pub fn projected(&self) -> Self {
        let xi = self.xi.normalize();
        let eta = self.eta - xi * xi.dot(&self.eta);
        Self { xi, eta }
    }

    pub fn as_array(&self) -> [f64; 6] {
        [
            self.xi[0], self.xi[1], self.xi[2], self.eta[0], self.eta[1], self.eta[2],
        ]
    }

    pub fn from_array(a: &[f64; 6]) -> Self {
        Self {
            xi: Vector3::new(a[0], a[1], a[2]),
            eta: Vector3::new(a[3], a[4], a[5]),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StereoPoint {
    /// The former momentum, negated.
    pub x: Vector2<f64>,
    /// The former position relative to the chosen primary.
    pub y: Vector2<f64>,
}

pub fn switch_coordinates(x: &PhasePoint, center: &Vector2<f64>) -> StereoPoint {
    StereoPoint {
        x: -x.p,
        y: x.q - center,
    }
}

pub fn unswitch_coordinates(s: &StereoPoint, center: &Vector2<f64>) -> PhasePoint {
    PhasePoint {
        q: s.y + center,
        p: -s.x,
    }
}

/// Jacobian of the switch in `(q, p) -> (x, y)` ordering.
pub fn switch_jacobian() -> Matrix4<f64> {
    let mut j = Matrix4::zeros();
    j[(0, 2)] = -1.0;
    j[(1, 3)] = -1.0;
    j[(2, 0)] = 1.0;
    j[(3, 1)] = 1.0;
    j
}

/// `ω(u, v) = uᵀ Ω v` for `ω = Σ dmom∧dpos` in `(pos, mom)` ordering.
fn canonical_form<const N: usize, const H: usize>() -> SMatrix<f64, N, N> {
    let mut om = SMatrix::<f64, N, N>::zeros();
    for i in 0..H {
        om[(i, H + i)] = -1.0;
        om[(H + i, i)] = 1.0;
    }
    om
}

/// `max |JᵀΩJ - Ω|` for the linear switch; zero in exact arithmetic and in floating point.
pub fn switch_symplecticity_defect() -> f64 {
    let j = switch_jacobian();
    let om = canonical_form::<4, 2>();
    (j.transpose() * om * j - om).abs().max()
}

/// The inverse of stereographic projection, extended to covectors.
pub fn stereo_lift(s: &StereoPoint) -> CotangentSpherePoint {
    let r2 = s.x.norm_squared();
    let sfac = 2.0 / (1.0 + r2);
    let xy = s.x.dot(&s.y);
    let xi = Vector3::new((r2 - 1.0) / (r2 + 1.0), s.x[0] * sfac, s.x[1] * sfac);
    let eta_v = s.y * (0.5 * (1.0 + r2)) - s.x * xy;
    CotangentSpherePoint {
        xi,
        eta: Vector3::new(xy, eta_v[0], eta_v[1]),
    }
}

/// `x_k = ξ_k / (1 - ξ0)`, `y_k = η_k (1 - ξ0) + ξ_k η0`.
pub fn stereo_project(pt: &CotangentSpherePoint) -> Result<StereoPoint> {
    let s = 1.0 - pt.xi[0];
    if s <= 1e-300 {
        return Err(Error::Pole);
    }
    Ok(StereoPoint {
        x: Vector2::new(pt.xi[1] / s, pt.xi[2] / s),
        y: Vector2::new(
            pt.eta[1] * s + pt.xi[1] * pt.eta[0],
            pt.eta[2] * s + pt.xi[2] * pt.eta[0],
        ),
    })
}

/// Max entry of `JᵀΩ₆J - Ω₄` with `J` the central-difference Jacobian of the lift.
pub fn symplecticity_check(points: &[StereoPoint], h: f64) -> f64 {
    let om4 = canonical_form::<4, 2>();
    let om6 = canonical_form::<6, 3>();
    let mut worst = 0.0f64;
    for s in points {
        let base = [s.x[0], s.x[1], s.y[0], s.y[1]];
        let mut jac = SMatrix::<f64, 6, 4>::zeros();
        for k in 0..4 {
            let eval = |delta: f64| {
                let mut v = base;
                v[k] += delta;
                stereo_lift(&StereoPoint {
                    x: Vector2::new(v[0], v[1]),
                    y: Vector2::new(v[2], v[3]),
                })
                .as_array()
            };
            let (a, b) = (eval(h), eval(-h));
            for r in 0..6 {
                jac[(r, k)] = (a[r] - b[r]) / (2.0 * h);
            }
        }
        worst = worst.max((jac.transpose() * om6 * jac - om4).abs().max());
    }
    worst
}

/// `|η|` against `(|x|^2 + 1)|y| / 2` and `|y| / (1 - ξ0)`.
pub fn norm_relation_defect(s: &StereoPoint, pt: &CotangentSpherePoint) -> f64 {
    let n = pt.eta.norm();
    let a = (s.x.norm_squared() + 1.0) * s.y.norm() / 2.0;
    let b = s.y.norm() / (1.0 - pt.xi[0]);
    (n - a).abs().max((n - b).abs())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KeplerFrame {
    /// The rotating Kepler problem, keeping `η1ξ2 - η2ξ1`.
    Rotating,
    /// Without the rotation term: the Delaunay/geodesic Hamiltonian.
    Inertial,
}

/// `Q = ½|η|² f²`, regularizing at a centre `c` of mass `m_c` with a second
/// attracting mass `m_o` at `o`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegularizedHamiltonian {
    pub k: f64,
    pub center: Vector2<f64>,
    pub other: Vector2<f64>,
    pub m_center: f64,
    pub m_other: f64,
    pub rotating: bool,
}

impl RegularizedHamiltonian {
    pub fn kepler(k: f64, frame: KeplerFrame) -> Self {
        Self {
            k,
            center: Vector2::zeros(),
            other: Vector2::zeros(),
            m_center: 1.0,
            m_other: 0.0,
            rotating: frame == KeplerFrame::Rotating,
        }
    }

    pub fn three_body(k: f64, cfg: &SystemConfig, primary: Primary) -> Self {
        Self {
            k,
            center: cfg.position(primary),
            other: cfg.position(primary.other()),
            m_center: cfg.mass(primary),
            m_other: cfg.mass(primary.other()),
            rotating: true,
        }
    }

    /// The energy surface of interest, `Q = ½ m_c²`.
    pub fn level(&self) -> f64 {
        0.5 * self.m_center * self.m_center
    }

    fn v(&self, pt: &CotangentSpherePoint) -> Vector2<f64> {
        let s = 1.0 - pt.xi[0];
        Vector2::new(pt.eta[1], pt.eta[2]) * s
            + Vector2::new(pt.xi[1], pt.xi[2]) * pt.eta[0]
            + self.center
            - self.other
    }

    fn check_other(&self, pt: &CotangentSpherePoint) -> Result<f64> {
        if self.m_other == 0.0 {
            return Ok(f64::INFINITY);
        }
        let r = self.v(pt).norm();
        if r < crate::model::DEFAULT_SINGULARITY_THRESHOLD {
            return Err(Error::Singularity {
                primary: if self.center[0] > self.other[0] {
                    Primary::Moon
                } else {
                    Primary::Earth
                },
                distance: r,
            });
        }
        Ok(r)
    }

    /// The factor `f(ξ, η)` with `Q = ½|η|² f²`.
    pub fn factor(&self, pt: &CotangentSpherePoint) -> Result<f64> {
        let r = self.check_other(pt)?;
        let (xi, eta) = (&pt.xi, &pt.eta);
        let s = 1.0 - xi[0];
        let mut f = 1.0 - (self.k + 0.5) * s;
        if self.rotating {
            f += s * (xi[2] * eta[1] - xi[1] * eta[2]) + xi[2] * self.center[0]
                - xi[1] * self.center[1];
        }
        if self.m_other != 0.0 {
            f -= self.m_other * s / r;
        }
        Ok(f)
    }

    pub fn value(&self, pt: &CotangentSpherePoint) -> Result<f64> {
        let f = self.factor(pt)?;
        Ok(0.5 * pt.eta.norm_squared() * f * f)
    }

    /// `(∂f/∂ξ, ∂f/∂η)` in ambient coordinates.
    pub fn factor_gradient(&self, pt: &CotangentSpherePoint) -> Result<(Vector3<f64>, Vector3<f64>)> {
        let r = self.check_other(pt)?;
        let (xi, eta) = (&pt.xi, &pt.eta);
        let s = 1.0 - xi[0];
        let mut gx = Vector3::new(self.k + 0.5, 0.0, 0.0);
        let mut ge = Vector3::zeros();
        if self.rotating {
            let l = xi[2] * eta[1] - xi[1] * eta[2];
            gx += Vector3::new(-l, -s * eta[2] - self.center[1], s * eta[1] + self.center[0]);
            ge += Vector3::new(0.0, s * xi[2], -s * xi[1]);
        }
        if self.m_other != 0.0 {
            let m = self.m_other;
            let v = self.v(pt);
            let r3 = r * r * r;
            let eta_v = Vector2::new(eta[1], eta[2]);
            let xi_v = Vector2::new(xi[1], xi[2]);
            gx += Vector3::new(
                m / r - m * s * v.dot(&eta_v) / r3,
                m * s * v[0] * eta[0] / r3,
                m * s * v[1] * eta[0] / r3,
            );
            ge += Vector3::new(
                m * s * v.dot(&xi_v) / r3,
                m * s * s * v[0] / r3,
                m * s * s * v[1] / r3,
            );
        }
        Ok((gx, ge))
    }

    /// `(∂Q/∂ξ, ∂Q/∂η)` in ambient coordinates.
    pub fn gradient(&self, pt: &CotangentSpherePoint) -> Result<(Vector3<f64>, Vector3<f64>)> {
        let f = self.factor(pt)?;
        let (gx, ge) = self.factor_gradient(pt)?;
        let n2 = pt.eta.norm_squared();
        Ok((gx * (n2 * f), pt.eta * (f * f) + ge * (n2 * f)))
    }

    /// Lifts a rotating-frame state relative to this centre.
    pub fn lift(&self, x: &PhasePoint) -> CotangentSpherePoint {
        stereo_lift(&switch_coordinates(x, &self.center))
    }

    pub fn project(&self, pt: &CotangentSpherePoint) -> Result<PhasePoint> {
        Ok(unswitch_coordinates(&stereo_project(pt)?, &self.center))
    }
}

/// `½|η|² [1 + (1-ξ0)(-k - ½ + η1ξ2 - η2ξ1)]²`.
pub fn kepler_regularized_q(pt: &CotangentSpherePoint, k: f64) -> f64 {
    let s = 1.0 - pt.xi[0];
    let f = 1.0 + s * (-k - 0.5 + pt.eta[1] * pt.xi[2] - pt.eta[2] * pt.xi[1]);
    0.5 * pt.eta.norm_squared() * f * f
}

/// The regularized Hamiltonian at `primary` and its factor `f`.
pub fn r3bp_regularized_q(
    pt: &CotangentSpherePoint,
    k: f64,
    cfg: &SystemConfig,
    primary: Primary,
) -> Result<(f64, f64)> {
    let q = RegularizedHamiltonian::three_body(k, cfg, primary);
    let f = q.factor(pt)?;
    Ok((0.5 * pt.eta.norm_squared() * f * f, f))
}

/// The time-changed Hamiltonian `K = |q - c| (H - k)`, whose zero level is `H = k`.
pub fn time_changed_k(x: &PhasePoint, k: f64, cfg: &SystemConfig, primary: Primary) -> Result<f64> {
    let h = hamiltonian(x, cfg)?;
    Ok((x.q - cfg.position(primary)).norm() * (h - k))
}

/// Gaussian curvature of `g_k = g_st / [1 + (1-ξ0)(-k-½)]²` at each sample,
/// from central differences of the conformal factor in the stereographic chart.
pub fn conformal_metric_curvature(k: f64, samples: &[Vector3<f64>]) -> Result<Vec<f64>> {
    if !(k < 0.0) {
        return Err(Error::Domain {
            what: "conformal_metric_curvature",
            value: k,
            domain: "k < 0",
        });
    }
    let a = -k - 0.5;
    // g = λ |dx|²
    let log_lambda = |x: f64, y: f64| {
        let r2 = x * x + y * y;
        let s = 2.0 / (1.0 + r2);
        let phi = 1.0 + s * a;
        (s / phi).powi(2).ln()
    };
    let mut out = Vec::with_capacity(samples.len());
    for xi in samples {
        let s = 1.0 - xi[0];
        if s < 1e-3 {
            return Err(Error::Pole);
        }
        let (x, y) = (xi[1] / s, xi[2] / s);
        let h = 1e-3 * (1.0 + (x * x + y * y).sqrt());
        let c = log_lambda(x, y);
        let lap = (log_lambda(x + h, y) + log_lambda(x - h, y) + log_lambda(x, y + h)
            + log_lambda(x, y - h)
            - 4.0 * c)
            / (h * h);
        out.push(-0.5 * lap / c.exp());
    }
    Ok(out)
}

/// `n` seeded uniform points on `S²` with `ξ0 ≤ max_xi0`, keeping clear of
/// the pole where the stereographic chart degenerates.
pub fn sphere_samples(n: usize, seed: u64, max_xi0: f64) -> Vec<Vector3<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| loop {
            let v = Vector3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            if v.norm() > 0.1 && v.norm() < 1.0 && v.normalize()[0] <= max_xi0 {
                break v.normalize();
            }
        })
        .collect()
}

pub fn write_curvature_csv<W: Write>(out: W, samples: &[Vector3<f64>], curvature: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["xi0", "xi1", "xi2", "curvature"])?;
    for (xi, k) in samples.iter().zip(curvature) {
        w.write_record([
            xi[0].to_string(),
            xi[1].to_string(),
            xi[2].to_string(),
            k.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_stereo(rng: &mut ChaCha8Rng, r: f64) -> StereoPoint {
        StereoPoint {
            x: Vector2::new(rng.random_range(-r..r), rng.random_range(-r..r)),
            y: Vector2::new(rng.random_range(-r..r), rng.random_range(-r..r)),
        }
    }

    #[test]
    fn switch_example_and_round_trip() {
        let cfg = SystemConfig::new(0.5).unwrap();
        let x = PhasePoint::new(-0.5 + 0.1, 0.0, 0.0, 2.0);
        let s = switch_coordinates(&x, &cfg.moon_pos());
        assert_eq!(s.x, Vector2::new(0.0, -2.0));
        assert!((s.y - Vector2::new(0.1, 0.0)).norm() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10_000 {
            let s = random_stereo(&mut rng, 3.0);
            let x = unswitch_coordinates(&s, &cfg.moon_pos());
            let back = switch_coordinates(&x, &cfg.moon_pos());
            assert!((back.x - s.x).norm() < 1e-15 && (back.y - s.y).norm() < 1e-15);
        }
        assert_eq!(switch_symplecticity_defect(), 0.0);
    }

    #[test]
    fn stereographic_example() {
        let pt = CotangentSpherePoint::new(Vector3::new(0.0, 1.0, 0.0), Vector3::new(0.0, 0.0, 1.0));
        let s = stereo_project(&pt).unwrap();
        assert_eq!(s.x, Vector2::new(1.0, 0.0));
        assert_eq!(s.y, Vector2::new(0.0, 1.0));
        assert!(norm_relation_defect(&s, &pt) < 1e-15);
        let lifted = stereo_lift(&s);
        assert!((lifted.xi - pt.xi).norm() < 1e-15 && (lifted.eta - pt.eta).norm() < 1e-15);
        let pole = CotangentSpherePoint::new(Vector3::new(1.0, 0.0, 0.0), Vector3::new(0.0, 1.0, 0.0));
        assert!(matches!(stereo_project(&pole), Err(Error::Pole)));
    }

    #[test]
    fn lift_round_trip_and_constraints() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10_000 {
            let s = random_stereo(&mut rng, 3.0);
            let pt = stereo_lift(&s);
            assert!(pt.constraint_defect() < 1e-12);
            assert!(norm_relation_defect(&s, &pt) < 1e-12);
            let back = stereo_project(&pt).unwrap();
            assert!((back.x - s.x).norm() < 1e-12 && (back.y - s.y).norm() < 1e-12);
        }
    }

    #[test]
    fn lift_is_symplectic() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts: Vec<_> = (0..1000).map(|_| random_stereo(&mut rng, 2.0)).collect();
        assert!(symplecticity_check(&pts, 1e-5) < 1e-7);
    }

    #[test]
    fn kepler_q_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..1000 {
            let pt = stereo_lift(&random_stereo(&mut rng, 2.0));
            let zero = CotangentSpherePoint::new(pt.xi, Vector3::zeros());
            assert_eq!(kepler_regularized_q(&zero, -2.0), 0.0);
            // the inertial variant at k = -1/2 is the round cometric
            let inertial = RegularizedHamiltonian::kepler(-0.5, KeplerFrame::Inertial);
            assert!((inertial.value(&pt).unwrap() - 0.5 * pt.eta.norm_squared()).abs() < 1e-12);
            let rot = RegularizedHamiltonian::kepler(-1.3, KeplerFrame::Rotating);
            assert!((rot.value(&pt).unwrap() - kepler_regularized_q(&pt, -1.3)).abs() < 1e-12);
        }
        // over the pole the level Q = 1/2 is the unit fiber
        let pole = CotangentSpherePoint::new(Vector3::new(1.0, 0.0, 0.0), Vector3::new(0.0, 0.6, 0.8));
        assert!((kepler_regularized_q(&pole, -3.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cfg = SystemConfig::new(0.3).unwrap();
        let hams = [
            RegularizedHamiltonian::kepler(-1.7, KeplerFrame::Rotating),
            RegularizedHamiltonian::kepler(-1.7, KeplerFrame::Inertial),
            RegularizedHamiltonian::three_body(-1.8, &cfg, Primary::Moon),
            RegularizedHamiltonian::three_body(-1.8, &cfg, Primary::Earth),
        ];
        let h = 1e-6;
        for ham in hams {
            for _ in 0..300 {
                let pt = stereo_lift(&random_stereo(&mut rng, 1.0));
                let (gx, ge) = ham.gradient(&pt).unwrap();
                let base = pt.as_array();
                for i in 0..6 {
                    let mut a = base;
                    let mut b = base;
                    a[i] += h;
                    b[i] -= h;
                    let fd = (ham.value(&CotangentSpherePoint::from_array(&a)).unwrap()
                        - ham.value(&CotangentSpherePoint::from_array(&b)).unwrap())
                        / (2.0 * h);
                    let an = if i < 3 { gx[i] } else { ge[i - 3] };
                    assert!((an - fd).abs() < 1e-6 * an.abs().max(1.0), "{i}: {an} vs {fd}");
                }
            }
        }
    }

    #[test]
    fn level_correspondence() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for mu in [0.1, 0.3, 0.5] {
            let cfg = SystemConfig::new(mu).unwrap();
            for primary in [Primary::Moon, Primary::Earth] {
                for _ in 0..2000 {
                    let q = cfg.position(primary)
                        + Vector2::new(rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3));
                    if (q - cfg.position(primary)).norm() < 1e-3 {
                        continue;
                    }
                    let x = PhasePoint {
                        q,
                        p: Vector2::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)),
                    };
                    let k = hamiltonian(&x, &cfg).unwrap();
                    assert!(time_changed_k(&x, k, &cfg, primary).unwrap().abs() < 1e-12);
                    let ham = RegularizedHamiltonian::three_body(k, &cfg, primary);
                    let pt = ham.lift(&x);
                    let (qv, f) = r3bp_regularized_q(&pt, k, &cfg, primary).unwrap();
                    assert!((qv - ham.level()).abs() < 1e-10 * ham.level().max(1.0), "{qv}");
                    // K = |η| f - m_c
                    assert!((pt.eta.norm() * f - cfg.mass(primary)).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn smooth_through_the_pole() {
        let cfg = SystemConfig::new(0.3).unwrap();
        let ham = RegularizedHamiltonian::three_body(-1.9, &cfg, Primary::Moon);
        let at = |t: f64| {
            let xi = Vector3::new(t.cos(), t.sin(), 0.0);
            let eta = Vector3::new(-t.sin(), t.cos(), 0.5) * 0.7;
            CotangentSpherePoint::new(xi, eta)
        };
        for delta in [1e-12, 1e-13] {
            let q0 = ham.value(&at(0.0)).unwrap();
            assert!((ham.value(&at(delta)).unwrap() - q0).abs() < 1e-10);
            assert!((ham.value(&at(-delta)).unwrap() - q0).abs() < 1e-10);
            let k0 = kepler_regularized_q(&at(0.0), -2.0);
            assert!((kepler_regularized_q(&at(delta), -2.0) - k0).abs() < 1e-10);
        }
    }

    #[test]
    fn massless_moon_limit() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..1000 {
            let pt = stereo_lift(&random_stereo(&mut rng, 1.5));
            let kep = kepler_regularized_q(&pt, -1.7);
            let at = |mu: f64| {
                let cfg = SystemConfig::new(mu).unwrap();
                r3bp_regularized_q(&pt, -1.7, &cfg, Primary::Earth).unwrap().0
            };
            assert!((at(1e-12) - kep).abs() < 1e-10);
            // first order in mu
            let slope = (at(1e-6) - kep) / 1e-6;
            let slope2 = (at(1e-8) - kep) / 1e-8;
            assert!((slope - slope2).abs() < 1e-3 * slope.abs().max(1.0));
        }
    }

    #[test]
    fn curvature_is_minus_two_k() {
        let samples = sphere_samples(20, 9, 0.8);
        for k in [-0.5, -1.0, -2.0] {
            for c in conformal_metric_curvature(k, &samples).unwrap() {
                assert!((c + 2.0 * k).abs() < 1e-4, "{k}: {c}");
            }
        }
        let mut buf = Vec::new();
        write_curvature_csv(&mut buf, &samples, &vec![1.0; 20]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 21);
    }

    proptest! {
        #[test]
        fn lift_preserves_constraints(x1 in -5.0f64..5.0, x2 in -5.0f64..5.0,
                                      y1 in -5.0f64..5.0, y2 in -5.0f64..5.0) {
            let s = StereoPoint { x: Vector2::new(x1, x2), y: Vector2::new(y1, y2) };
            let pt = stereo_lift(&s);
            prop_assert!(pt.constraint_defect() < 1e-12);
            let scale = 1.0 + s.y.norm() * (1.0 + s.x.norm_squared());
            prop_assert!(norm_relation_defect(&s, &pt) < 1e-12 * scale);
        }
    }
}
