//! Trajectories of the rotating-frame flow and of the regularized flow on `T*S²`.
//!
//! The regularized flow is integrated in ambient `R⁶` as the Dirac-constrained
//! Hamiltonian flow of `Q` restricted to `{|ξ| = 1, ⟨ξ, η⟩ = 0}`, with a
//! projection back onto the constraints after every step.

mod gbs;
mod orbits;

use std::io::Write;

use nalgebra::{SVector, Vector2, Vector4, Vector6};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{hamiltonian, hamiltonian_vector_field, PhasePoint, Primary, SystemConfig};
use crate::moser::{CotangentSpherePoint, RegularizedHamiltonian};

pub use gbs::{Flow, Gbs};
pub use orbits::{
    collision_passage_demo, correspondence_check, find_symmetric_periodic_orbit,
    kepler_geodesic_period, CollisionPassage, Correspondence, GeodesicPeriod, OrbitFamily,
    PeriodicOrbit,
};

/// Unregularized integration stops this close to a massive primary.
pub const CLOSE_APPROACH: f64 = 0.01;

/// Default per-step tolerance.
pub const DEFAULT_TOLERANCE: f64 = 1e-12;

/// Constraint defect above which a step is treated as diverged rather than projected.
const PROJECTION_LIMIT: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FrameTag {
    /// `(q1, q2, p1, p2)` against time `t`, conserving `H`.
    Rotating,
    /// `(ξ, η) ∈ R⁶` against the regularized time `s`, conserving `Q`.
    Regularized,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectorySample {
    pub time: f64,
    pub state: Vec<f64>,
    pub conserved: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub frame: FrameTag,
    pub samples: Vec<TrajectorySample>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectorySummary {
    pub frame: FrameTag,
    pub samples: usize,
    pub start: f64,
    pub end: f64,
    pub initial: Vec<f64>,
    pub last: Vec<f64>,
    pub conserved: f64,
    pub relative_drift: f64,
    /// Only for regularized trajectories.
    pub constraint_defect: Option<f64>,
}

impl Trajectory {
    fn new(frame: FrameTag) -> Self {
        Self {
            frame,
            samples: Vec::new(),
        }
    }

    fn push(&mut self, time: f64, state: &[f64], conserved: f64) {
        self.samples.push(TrajectorySample {
            time,
            state: state.to_vec(),
            conserved,
        });
    }

    pub fn first(&self) -> &TrajectorySample {
        &self.samples[0]
    }

    pub fn last(&self) -> &TrajectorySample {
        &self.samples[self.samples.len() - 1]
    }

    /// `max |c_i - c_0| / |c_0|` over the conserved-quantity log.
    pub fn relative_drift(&self) -> f64 {
        let c0 = self.first().conserved;
        let scale = c0.abs().max(f64::MIN_POSITIVE);
        self.samples
            .iter()
            .map(|s| (s.conserved - c0).abs() / scale)
            .fold(0.0, f64::max)
    }

    pub fn max_constraint_defect(&self) -> Option<f64> {
        if self.frame != FrameTag::Regularized {
            return None;
        }
        Some(
            self.samples
                .iter()
                .map(|s| sphere_point(&s.state).constraint_defect())
                .fold(0.0, f64::max),
        )
    }

    /// Samples as phase points; only meaningful in the rotating frame.
    pub fn phase_points(&self) -> Vec<PhasePoint> {
        self.samples
            .iter()
            .map(|s| PhasePoint::new(s.state[0], s.state[1], s.state[2], s.state[3]))
            .collect()
    }

    pub fn sphere_points(&self) -> Vec<CotangentSpherePoint> {
        self.samples.iter().map(|s| sphere_point(&s.state)).collect()
    }

    pub fn summary(&self) -> TrajectorySummary {
        TrajectorySummary {
            frame: self.frame,
            samples: self.samples.len(),
            start: self.first().time,
            end: self.last().time,
            initial: self.first().state.clone(),
            last: self.last().state.clone(),
            conserved: self.first().conserved,
            relative_drift: self.relative_drift(),
            constraint_defect: self.max_constraint_defect(),
        }
    }

    /// One row per sample: time, full state, conserved value.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let header: &[&str] = match self.frame {
            FrameTag::Rotating => &["t", "q1", "q2", "p1", "p2", "H"],
            FrameTag::Regularized => &["s", "xi0", "xi1", "xi2", "eta0", "eta1", "eta2", "Q"],
        };
        w.write_record(header)?;
        for s in &self.samples {
            let mut row = Vec::with_capacity(s.state.len() + 2);
            row.push(format!("{:.17e}", s.time));
            row.extend(s.state.iter().map(|v| format!("{v:.17e}")));
            row.push(format!("{:.17e}", s.conserved));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn sphere_point(state: &[f64]) -> CotangentSpherePoint {
    CotangentSpherePoint::from_array(&[state[0], state[1], state[2], state[3], state[4], state[5]])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntegratorOptions {
    pub tolerance: f64,
    /// Record a sample at every multiple of this step (besides the endpoints)
    /// instead of at every accepted step.
    pub output_step: Option<f64>,
    pub close_approach: f64,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self {
            tolerance: DEFAULT_TOLERANCE,
            output_step: None,
            close_approach: CLOSE_APPROACH,
        }
    }
}

impl IntegratorOptions {
    pub fn with_tolerance(tolerance: f64) -> Self {
        Self {
            tolerance,
            ..Self::default()
        }
    }

    fn stops(&self, t0: f64, t_end: f64) -> Vec<f64> {
        match self.output_step {
            Some(dt) if dt > 0.0 => {
                let n = ((t_end - t0).abs() / dt).floor() as usize;
                let dir = (t_end - t0).signum();
                (1..=n).map(|i| t0 + dir * dt * i as f64).collect()
            }
            _ => Vec::new(),
        }
    }
}

/// Distance to the nearest primary with positive mass.
fn nearest_primary(q: &Vector2<f64>, cfg: &SystemConfig) -> (Primary, f64) {
    [Primary::Earth, Primary::Moon]
        .into_iter()
        .filter(|&p| cfg.mass(p) > 0.0)
        .map(|p| (p, (q - cfg.position(p)).norm()))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap_or((Primary::Earth, f64::INFINITY))
}

pub(crate) fn rotating_field(y: &Vector4<f64>, cfg: &SystemConfig) -> Result<Vector4<f64>> {
    hamiltonian_vector_field(&PhasePoint::from_vector(y), cfg)
}

/// The rotating-frame flow from `x0` over `[0, t_end]` (`t_end < 0` runs
/// backwards), sampled at every accepted step.
pub fn integrate_rotating(x0: &PhasePoint, cfg: &SystemConfig, t_end: f64, tolerance: f64) -> Result<Trajectory> {
    integrate_rotating_with(x0, cfg, t_end, &IntegratorOptions::with_tolerance(tolerance))
}

pub fn integrate_rotating_with(
    x0: &PhasePoint,
    cfg: &SystemConfig,
    t_end: f64,
    opts: &IntegratorOptions,
) -> Result<Trajectory> {
    let check = |t: f64, q: &Vector2<f64>| -> Result<()> {
        let (primary, distance) = nearest_primary(q, cfg);
        if distance < opts.close_approach {
            return Err(Error::CloseApproach {
                primary,
                distance,
                time: t,
            });
        }
        Ok(())
    };
    check(0.0, &x0.q)?;
    let mut traj = Trajectory::new(FrameTag::Rotating);
    let y0 = x0.to_vector();
    traj.push(0.0, y0.as_slice(), hamiltonian(x0, cfg)?);
    let every_step = opts.output_step.is_none();
    let stops = opts.stops(0.0, t_end);
    Gbs::new(opts.tolerance).solve(
        |_, y| rotating_field(y, cfg),
        0.0,
        y0,
        t_end,
        &stops,
        |t, y, at_stop| {
            let x = PhasePoint::from_vector(y);
            check(t, &x.q)?;
            if every_step || at_stop || t == t_end {
                traj.push(t, y.as_slice(), hamiltonian(&x, cfg)?);
            }
            Ok(Flow::Continue)
        },
    )?;
    Ok(traj)
}

/// The Dirac-constrained vector field of `Q` on `{|ξ|² = 1, ⟨ξ, η⟩ = 0} ⊂ R⁶`:
/// `ξ' = Q_η + bξ`, `η' = -Q_ξ - aξ - bη` with multipliers chosen so that
/// both constraints are preserved.
pub fn regularized_field(y: &Vector6<f64>, q: &RegularizedHamiltonian) -> Result<Vector6<f64>> {
    let pt = CotangentSpherePoint::from_array(&[y[0], y[1], y[2], y[3], y[4], y[5]]);
    let (qx, qe) = q.gradient(&pt)?;
    let (xi, eta) = (pt.xi, pt.eta);
    let n2 = xi.norm_squared();
    let b = -xi.dot(&qe) / n2;
    let a = (eta.dot(&qe) - xi.dot(&qx)) / n2;
    let dxi = qe + xi * b;
    let deta = -qx - xi * a - eta * b;
    Ok(Vector6::new(dxi[0], dxi[1], dxi[2], deta[0], deta[1], deta[2]))
}

fn check_start(pt: &CotangentSpherePoint, q: &RegularizedHamiltonian) -> Result<CotangentSpherePoint> {
    let defect = pt.constraint_defect();
    if defect > 1e-10 {
        return Err(Error::ConstraintDrift(defect));
    }
    let off = q.value(pt)? - q.level();
    if off.abs() > 1e-10 {
        return Err(Error::OffLevel(off));
    }
    Ok(pt.projected())
}

/// The regularized flow from `pt0` on `{Q = level}` over `[0, s_end]`.
pub fn integrate_regularized(
    pt0: &CotangentSpherePoint,
    q: &RegularizedHamiltonian,
    s_end: f64,
    tolerance: f64,
) -> Result<Trajectory> {
    integrate_regularized_with(pt0, q, s_end, &IntegratorOptions::with_tolerance(tolerance), &[])
}

/// As [`integrate_regularized`], also sampling at the times in `extra_stops`.
pub fn integrate_regularized_with(
    pt0: &CotangentSpherePoint,
    q: &RegularizedHamiltonian,
    s_end: f64,
    opts: &IntegratorOptions,
    extra_stops: &[f64],
) -> Result<Trajectory> {
    let start = check_start(pt0, q)?;
    let mut traj = Trajectory::new(FrameTag::Regularized);
    traj.push(0.0, &start.as_array(), q.value(&start)?);
    let every_step = opts.output_step.is_none() && extra_stops.is_empty();
    let mut stops = opts.stops(0.0, s_end);
    stops.extend_from_slice(extra_stops);
    let y0 = SVector::<f64, 6>::from_row_slice(&start.as_array());
    Gbs::new(opts.tolerance).solve(
        |_, y| regularized_field(y, q),
        0.0,
        y0,
        s_end,
        &stops,
        |s, y, at_stop| {
            let pt = sphere_point(y.as_slice());
            let defect = pt.constraint_defect();
            if defect > PROJECTION_LIMIT {
                return Err(Error::ConstraintDrift(defect));
            }
            let pt = pt.projected();
            y.copy_from_slice(&pt.as_array());
            if every_step || at_stop || s == s_end {
                traj.push(s, &pt.as_array(), q.value(&pt)?);
            }
            Ok(Flow::Continue)
        },
    )?;
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moser::KeplerFrame;
    use nalgebra::Vector3;
    use std::f64::consts::TAU;

    #[test]
    fn circular_kepler_orbit_keeps_radius() {
        let cfg = SystemConfig::new(0.0).unwrap();
        let x0 = PhasePoint::new(1.0, 0.0, 0.0, 1.0);
        let traj = integrate_rotating(&x0, &cfg, 100.0, 1e-12).unwrap();
        for x in traj.phase_points() {
            assert!((x.q.norm() - 1.0).abs() < 1e-9, "{x:?}");
        }
        assert!(traj.relative_drift() < 1e-9);
    }

    #[test]
    fn energy_drift_over_long_horizon() {
        let cfg = SystemConfig::new(0.3).unwrap();
        // a loop around the earth, well away from both primaries
        let x0 = PhasePoint::new(0.3 + 0.35, 0.0, 0.0, 0.35 + (0.7 / 0.35f64).sqrt());
        let traj = integrate_rotating(&x0, &cfg, 100.0, 1e-12).unwrap();
        let closest = traj
            .phase_points()
            .iter()
            .map(|x| nearest_primary(&x.q, &cfg).1)
            .fold(f64::INFINITY, f64::min);
        assert!(closest >= 0.05, "{closest}");
        assert!(traj.relative_drift() <= 1e-9, "{}", traj.relative_drift());
    }

    #[test]
    fn reflection_reverses_time() {
        let cfg = SystemConfig::new(0.2).unwrap();
        let x0 = PhasePoint::new(0.5, 0.1, -0.2, 1.3);
        let refl = |x: &PhasePoint| PhasePoint::new(x.q[0], -x.q[1], -x.p[0], x.p[1]);
        let fwd = integrate_rotating(&x0, &cfg, 3.0, 1e-13).unwrap();
        let end = PhasePoint::from_vector(&Vector4::from_row_slice(&fwd.last().state));
        let back = integrate_rotating(&refl(&end), &cfg, 3.0, 1e-13).unwrap();
        let got = PhasePoint::from_vector(&Vector4::from_row_slice(&back.last().state));
        let defect = (refl(&got).to_vector() - x0.to_vector()).amax();
        assert!(defect < 1e-8, "{defect}");
    }

    #[test]
    fn close_approach_aborts() {
        let cfg = SystemConfig::new(0.3).unwrap();
        let m = cfg.moon_pos();
        // fall straight at the moon from rest in the inertial sense
        let x0 = PhasePoint::new(m[0] + 0.05, 0.0, 0.0, m[0] + 0.05);
        match integrate_rotating(&x0, &cfg, 5.0, 1e-12) {
            Err(Error::CloseApproach { primary, distance, .. }) => {
                assert_eq!(primary, Primary::Moon);
                assert!(distance < CLOSE_APPROACH);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn output_grid_is_hit_exactly() {
        let cfg = SystemConfig::new(0.1).unwrap();
        let x0 = PhasePoint::new(0.6, 0.0, 0.0, 1.9);
        let opts = IntegratorOptions {
            output_step: Some(0.25),
            ..IntegratorOptions::default()
        };
        let traj = integrate_rotating_with(&x0, &cfg, 2.0, &opts).unwrap();
        let times: Vec<f64> = traj.samples.iter().map(|s| s.time).collect();
        assert_eq!(times, (0..=8).map(|i| 0.25 * i as f64).collect::<Vec<_>>());
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,q1,q2,p1,p2,H\n"));
        assert_eq!(text.lines().count(), 10);
    }

    #[test]
    fn geodesic_great_circle() {
        let q = RegularizedHamiltonian::kepler(-0.5, KeplerFrame::Inertial);
        let pt = CotangentSpherePoint::new(Vector3::new(0.0, 0.6, 0.8), Vector3::new(0.0, 0.8, -0.6));
        let traj = integrate_regularized(&pt, &q, TAU, 1e-13).unwrap();
        let normal = pt.xi.cross(&pt.eta);
        for p in traj.sphere_points() {
            assert!(p.xi.dot(&normal).abs() < 1e-10);
        }
        let end = traj.last();
        let back: f64 = end.state.iter().zip(pt.as_array()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(back < 1e-10, "{back}");
        assert!(traj.max_constraint_defect().unwrap() <= 1e-10);
        assert!(traj.relative_drift() <= 1e-9);
    }

    #[test]
    fn rotating_kepler_crosses_the_pole_smoothly() {
        let k = -2.0;
        let q = RegularizedHamiltonian::kepler(k, KeplerFrame::Rotating);
        // collision state: ξ at the pole, |η| = 1 puts it on {Q = ½}
        let pt = CotangentSpherePoint::new(Vector3::new(1.0, 0.0, 0.0), Vector3::new(0.0, 1.0, 0.0));
        let back = integrate_regularized(&pt, &q, -1.0, 1e-12).unwrap();
        let start = back.last().state.clone();
        let start = sphere_point(&start);
        let opts = IntegratorOptions::with_tolerance(1e-12);
        let traj = integrate_regularized_with(&start, &q, 2.0, &opts, &[1.0]).unwrap();
        let max_xi0 = traj.samples.iter().map(|s| s.state[0]).fold(f64::MIN, f64::max);
        assert!(max_xi0 > 1.0 - 1e-9, "{max_xi0}");
        assert!(traj.relative_drift() < 1e-9, "{}", traj.relative_drift());
        assert!(traj.max_constraint_defect().unwrap() <= 1e-10);
    }

    #[test]
    fn off_level_start_rejected() {
        let q = RegularizedHamiltonian::kepler(-0.5, KeplerFrame::Inertial);
        let pt = CotangentSpherePoint::new(Vector3::new(0.0, 1.0, 0.0), Vector3::new(0.0, 0.0, 1.1));
        assert!(matches!(integrate_regularized(&pt, &q, 1.0, 1e-12), Err(Error::OffLevel(_))));
        let pt = CotangentSpherePoint::new(Vector3::new(0.0, 1.0, 0.0), Vector3::new(0.0, 0.1, 1.0));
        assert!(matches!(integrate_regularized(&pt, &q, 1.0, 1e-12), Err(Error::ConstraintDrift(_))));
    }
}
