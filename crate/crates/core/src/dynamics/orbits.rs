//! Runs built on the two flows: the geodesic period, the correspondence
//! between the rotating and regularized flows, a collision passage and a
//! shooting search for symmetric periodic orbits.

use std::f64::consts::TAU;

use nalgebra::{SVector, Vector2, Vector3, Vector4, Vector5, Vector6};
use rayon::prelude::*;
use serde::Serialize;

use super::{
    integrate_regularized_with, integrate_rotating_with, nearest_primary, regularized_field,
    rotating_field, Flow, Gbs, IntegratorOptions, Trajectory, FrameTag, CLOSE_APPROACH,
};
use crate::equilibria::first_critical_value;
use crate::error::{Error, Result};
use crate::model::{effective_potential, hamiltonian, PhasePoint, Primary, SystemConfig};
use crate::moser::{CotangentSpherePoint, KeplerFrame, RegularizedHamiltonian};
use crate::roots::bisect;

/// Newton on `g(y(t)) = 0`, each iterate integrated afresh from `(t_a, y_a)`.
fn refine_event<const N: usize, F, G, D>(
    gbs: &Gbs,
    field: F,
    t_a: f64,
    y_a: SVector<f64, N>,
    t_guess: f64,
    g: G,
    dg: D,
) -> Result<(f64, SVector<f64, N>)>
where
    F: Fn(&SVector<f64, N>) -> Result<SVector<f64, N>>,
    G: Fn(&SVector<f64, N>) -> f64,
    D: Fn(&SVector<f64, N>, &SVector<f64, N>) -> f64,
{
    let advance = |t: f64| -> Result<SVector<f64, N>> {
        if t == t_a {
            return Ok(y_a);
        }
        let (_, y) = gbs.solve(|_, y| field(y), t_a, y_a, t, &[], |_, _, _| Ok(Flow::Continue))?;
        Ok(y)
    };
    let mut t = t_guess;
    let mut y = advance(t)?;
    for _ in 0..12 {
        let slope = dg(&y, &field(&y)?);
        if slope == 0.0 {
            break;
        }
        let dt = -g(&y) / slope;
        t += dt;
        y = advance(t)?;
        if dt.abs() <= 1e-15 * t.abs().max(1.0) {
            break;
        }
    }
    Ok((t, y))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeodesicPeriod {
    /// First return time to the starting great-circle position.
    pub period: f64,
    pub period_error: f64,
    /// `max |state(2π) - state(0)|`.
    pub closure_defect: f64,
    /// Largest distance of `ξ` from the plane of the initial great circle.
    pub plane_defect: f64,
    pub max_xi0: f64,
    pub q_drift: f64,
    pub constraint_defect: f64,
    pub trajectory: Trajectory,
}

/// The regularized Kepler flow at `k = -½` without rotation is the geodesic
/// flow of the round sphere; from a unit covector through the pole its orbit is
/// a great circle of `s`-period `2π`.
pub fn kepler_geodesic_period(tolerance: f64) -> Result<GeodesicPeriod> {
    let q = RegularizedHamiltonian::kepler(-0.5, KeplerFrame::Inertial);
    let pt = CotangentSpherePoint::new(Vector3::new(0.0, 0.6, 0.8), Vector3::new(1.0, 0.0, 0.0));
    let opts = IntegratorOptions {
        tolerance,
        output_step: Some(TAU / 64.0),
        ..IntegratorOptions::default()
    };
    let traj = integrate_regularized_with(&pt, &q, 1.25 * TAU, &opts, &[TAU])?;
    let g = |y: &Vector6<f64>| y[0] * pt.eta[0] + y[1] * pt.eta[1] + y[2] * pt.eta[2];
    let dg = |_: &Vector6<f64>, f: &Vector6<f64>| f[0] * pt.eta[0] + f[1] * pt.eta[1] + f[2] * pt.eta[2];
    let states: Vec<Vector6<f64>> = traj.samples.iter().map(|s| Vector6::from_row_slice(&s.state)).collect();
    let i = (2..states.len())
        .find(|&i| g(&states[i - 1]) < 0.0 && g(&states[i]) >= 0.0)
        .ok_or_else(|| Error::NotFound("no return of the geodesic".into()))?;
    let (ta, tb) = (traj.samples[i - 1].time, traj.samples[i].time);
    let (ga, gb) = (g(&states[i - 1]), g(&states[i]));
    let guess = ta + (tb - ta) * ga / (ga - gb);
    let (period, _) = refine_event(
        &Gbs::new(tolerance),
        |y| regularized_field(y, &q),
        ta,
        states[i - 1],
        guess,
        g,
        dg,
    )?;
    let at_tau = traj
        .samples
        .iter()
        .find(|s| s.time == TAU)
        .ok_or_else(|| Error::NotFound("missing sample at 2π".into()))?;
    let closure_defect = at_tau
        .state
        .iter()
        .zip(pt.as_array())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let normal = pt.xi.cross(&pt.eta).normalize();
    let points = traj.sphere_points();
    Ok(GeodesicPeriod {
        period,
        period_error: (period - TAU).abs(),
        closure_defect,
        plane_defect: points.iter().map(|p| p.xi.dot(&normal).abs()).fold(0.0, f64::max),
        max_xi0: points.iter().map(|p| p.xi[0]).fold(f64::MIN, f64::max),
        q_drift: traj.relative_drift(),
        constraint_defect: traj.max_constraint_defect().unwrap_or(0.0),
        trajectory: traj,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Correspondence {
    pub k: f64,
    pub primary: Primary,
    pub t_end: f64,
    /// Regularized time reached, `∫ dt / (m_c |q - c|)`.
    pub s_end: f64,
    pub samples: usize,
    /// Max over matched samples of the sup-norm gap in `(q, p)`.
    pub max_deviation: f64,
    pub max_position_deviation: f64,
    pub h_drift: f64,
    pub q_drift: f64,
}

/// Integrates the rotating flow from `x0` for time `t_end` together with the
/// regularized time, integrates the regularized flow from the lift of `x0`,
/// and compares the two at matching times after projecting back.
///
/// On `{Q = ½m_c²}` the vector field of `Q` is `m_c |q - c|` times that of `H`,
/// so `ds = dt / (m_c |q - c|)`.
pub fn correspondence_check(
    x0: &PhasePoint,
    cfg: &SystemConfig,
    primary: Primary,
    t_end: f64,
    samples: usize,
) -> Result<Correspondence> {
    let tolerance = 1e-13;
    let k = hamiltonian(x0, cfg)?;
    let q = RegularizedHamiltonian::three_body(k, cfg, primary);
    if q.m_center <= 0.0 {
        return Err(Error::Domain {
            what: "correspondence centre mass",
            value: q.m_center,
            domain: "(0, 1]",
        });
    }
    let samples = samples.max(1);
    let dt = t_end / samples as f64;
    let stops: Vec<f64> = (1..samples).map(|i| dt * i as f64).collect();
    let center = q.center;
    let m_c = q.m_center;

    let mut rows: Vec<(f64, Vector5<f64>)> = Vec::with_capacity(samples + 1);
    let y0 = Vector5::new(x0.q[0], x0.q[1], x0.p[0], x0.p[1], 0.0);
    rows.push((0.0, y0));
    Gbs::new(tolerance).solve(
        |_, y| {
            let x = Vector4::new(y[0], y[1], y[2], y[3]);
            let f = rotating_field(&x, cfg)?;
            let r = (Vector2::new(y[0], y[1]) - center).norm();
            Ok(Vector5::new(f[0], f[1], f[2], f[3], 1.0 / (m_c * r)))
        },
        0.0,
        y0,
        t_end,
        &stops,
        |t, y, at_stop| {
            let (p, distance) = nearest_primary(&Vector2::new(y[0], y[1]), cfg);
            if distance < CLOSE_APPROACH {
                return Err(Error::CloseApproach {
                    primary: p,
                    distance,
                    time: t,
                });
            }
            if at_stop || t == t_end {
                rows.push((t, *y));
            }
            Ok(Flow::Continue)
        },
    )?;
    let sigma: Vec<f64> = rows.iter().map(|r| r.1[4]).collect();
    let s_end = sigma[sigma.len() - 1];
    let opts = IntegratorOptions {
        tolerance,
        ..IntegratorOptions::default()
    };
    let pt0 = q.lift(x0);
    let reg = integrate_regularized_with(&pt0, &q, s_end, &opts, &sigma[1..sigma.len() - 1])?;
    if reg.samples.len() != rows.len() {
        return Err(Error::NotFound(format!(
            "regularized run produced {} samples for {} rotating ones",
            reg.samples.len(),
            rows.len()
        )));
    }
    let mut max_deviation = 0.0f64;
    let mut max_position_deviation = 0.0f64;
    let mut h_log = Vec::with_capacity(rows.len());
    for ((_, y), s) in rows.iter().zip(&reg.samples) {
        let back = q.project(&CotangentSpherePoint::from_array(&[
            s.state[0], s.state[1], s.state[2], s.state[3], s.state[4], s.state[5],
        ]))?;
        let x = PhasePoint::new(y[0], y[1], y[2], y[3]);
        max_deviation = max_deviation.max((back.to_vector() - x.to_vector()).amax());
        max_position_deviation = max_position_deviation.max((back.q - x.q).norm());
        h_log.push(hamiltonian(&x, cfg)?);
    }
    let h_drift = h_log
        .iter()
        .map(|h| (h - k).abs() / k.abs().max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max);
    Ok(Correspondence {
        k,
        primary,
        t_end,
        s_end,
        samples: rows.len(),
        max_deviation,
        max_position_deviation,
        h_drift,
        q_drift: reg.relative_drift(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CollisionPassage {
    pub k: f64,
    pub primary: Primary,
    /// The run covers `s ∈ [-s_span, s_span]` with the collision at `s = 0`.
    pub s_span: f64,
    /// Largest pulled-back rotating-frame momentum `|p|` among the samples.
    pub max_momentum: f64,
    pub q_drift: f64,
    pub constraint_defect: f64,
    /// `max |H - k|` over samples at distance at least `far` from the centre.
    pub energy_defect: f64,
    pub far: f64,
    /// `max |R(γ(s)) - γ(-s)|` for the reversing reflection `R`.
    pub symmetry_defect: f64,
    pub trajectory: Trajectory,
}

/// The reversing symmetry `(q1, q2, p1, p2) ↦ (q1, -q2, -p1, p2)` seen on `T*S²`.
fn reflect(y: &[f64]) -> [f64; 6] {
    [y[0], -y[1], y[2], -y[3], y[4], -y[5]]
}

/// Starts on the collision locus `ξ = (1, 0, 0)` with `η` along the line of the
/// primaries, so the orbit is ejected from and falls back into the centre along
/// a symmetric arc, and integrates both ways through the collision.
pub fn collision_passage_demo(cfg: &SystemConfig, k: f64, primary: Primary) -> Result<CollisionPassage> {
    let tolerance = 1e-13;
    if cfg.mu() > 0.0 && cfg.mu() < 1.0 {
        let critical = first_critical_value(cfg)?;
        if k >= critical {
            return Err(Error::NotBelowCritical { energy: k, critical });
        }
    }
    let q = RegularizedHamiltonian::three_body(k, cfg, primary);
    let m_c = q.m_center;
    if m_c <= 0.0 {
        return Err(Error::Domain {
            what: "collision centre mass",
            value: m_c,
            domain: "(0, 1]",
        });
    }
    let pt = CotangentSpherePoint::new(Vector3::new(1.0, 0.0, 0.0), Vector3::new(0.0, m_c, 0.0));
    let s_span = 2.0 / m_c;
    let mut stops: Vec<f64> = (1..=6).map(|j| 10f64.powi(-j)).collect();
    stops.extend((1..200).map(|i| s_span * i as f64 / 200.0));
    let opts = IntegratorOptions {
        tolerance,
        ..IntegratorOptions::default()
    };
    let fwd = integrate_regularized_with(&pt, &q, s_span, &opts, &stops)?;
    let neg: Vec<f64> = stops.iter().map(|s| -s).collect();
    let bwd = integrate_regularized_with(&pt, &q, -s_span, &opts, &neg)?;

    let mut symmetry_defect = 0.0f64;
    for (a, b) in fwd.samples.iter().zip(&bwd.samples) {
        debug_assert_eq!(a.time, -b.time);
        let r = reflect(&a.state);
        let d = r.iter().zip(&b.state).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        symmetry_defect = symmetry_defect.max(d);
    }

    let mut samples = bwd.samples;
    samples.reverse();
    samples.extend(fwd.samples.into_iter().skip(1));
    let trajectory = Trajectory {
        frame: FrameTag::Regularized,
        samples,
    };

    let far = 0.05;
    let mut max_momentum = 0.0f64;
    let mut energy_defect = 0.0f64;
    for p in trajectory.sphere_points() {
        if p.xi[0] >= 1.0 {
            continue;
        }
        let x = q.project(&p)?;
        max_momentum = max_momentum.max(x.p.norm());
        if (x.q - q.center).norm() >= far {
            energy_defect = energy_defect.max((hamiltonian(&x, cfg)? - k).abs());
        }
    }
    Ok(CollisionPassage {
        k,
        primary,
        s_span,
        max_momentum,
        q_drift: trajectory.relative_drift(),
        constraint_defect: trajectory.max_constraint_defect().unwrap_or(0.0),
        energy_defect,
        far,
        symmetry_defect,
        trajectory,
    })
}

/// Where to look for a symmetric periodic orbit: starts at `c + ρu` with `u`
/// the unit vector from the chosen primary `c` towards the other one and the
/// velocity perpendicular to the axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OrbitFamily {
    pub primary: Primary,
    /// Clockwise about the primary in the rotating frame.
    pub retrograde: bool,
    pub rho_min: f64,
    pub rho_max: f64,
    /// Among several orbits the one closest to this is returned.
    pub rho_guess: f64,
    pub grid: usize,
    pub max_half_period: f64,
}

impl OrbitFamily {
    pub fn retrograde(primary: Primary, rho_min: f64, rho_max: f64) -> Self {
        Self {
            primary,
            retrograde: true,
            rho_min,
            rho_max,
            rho_guess: 0.5 * (rho_min + rho_max),
            grid: 40,
            max_half_period: 20.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeriodicOrbit {
    pub rho: f64,
    pub start: PhasePoint,
    pub period: f64,
    /// `max |x(T) - x(0)|`.
    pub closure_defect: f64,
    /// `max |H - c|` along the samples.
    pub energy_defect: f64,
    /// Roots of the symmetry defect examined, including rejected ones.
    pub candidates: usize,
    pub trajectory: Trajectory,
}

struct Shot {
    defect: f64,
    half_period: f64,
}

fn launch(cfg: &SystemConfig, c: f64, fam: &OrbitFamily, rho: f64) -> Result<Option<PhasePoint>> {
    let center = cfg.position(fam.primary);
    let u = (cfg.position(fam.primary.other()) - center).normalize();
    let q = center + u * rho;
    let excess = c - effective_potential(&q, cfg)?;
    if excess < 0.0 {
        return Ok(None);
    }
    let sense = if fam.retrograde { -u[0].signum() } else { u[0].signum() };
    let v2 = sense * (2.0 * excess).sqrt();
    // p = v + (-q2, q1) with q2 = 0
    Ok(Some(PhasePoint::new(q[0], 0.0, 0.0, v2 + q[0])))
}

/// Integrates to the next crossing of the axis `q2 = 0`; the defect is the
/// velocity along the axis there, which vanishes for a perpendicular crossing.
fn shoot(cfg: &SystemConfig, c: f64, fam: &OrbitFamily, rho: f64) -> Result<Option<Shot>> {
    let x0 = match launch(cfg, c, fam, rho)? {
        Some(x) => x,
        None => return Ok(None),
    };
    let gbs = Gbs::new(1e-13);
    let mut prev = (0.0, x0.to_vector());
    let mut side = 0.0;
    let mut bracket = None;
    let run = gbs.solve(
        |_, y| rotating_field(y, cfg),
        0.0,
        x0.to_vector(),
        fam.max_half_period,
        &[],
        |t, y, _| {
            let (_, distance) = nearest_primary(&Vector2::new(y[0], y[1]), cfg);
            if distance < CLOSE_APPROACH {
                return Err(Error::CloseApproach {
                    primary: fam.primary,
                    distance,
                    time: t,
                });
            }
            if side == 0.0 {
                side = y[1].signum();
            } else if y[1].signum() != side {
                bracket = Some((prev, (t, *y)));
                return Ok(Flow::Stop);
            }
            prev = (t, *y);
            Ok(Flow::Continue)
        },
    );
    if run.is_err() {
        return Ok(None);
    }
    let Some(((ta, ya), (tb, yb))) = bracket else {
        return Ok(None);
    };
    let guess = ta + (tb - ta) * ya[1] / (ya[1] - yb[1]);
    let (t, y) = refine_event(&gbs, |y| rotating_field(y, cfg), ta, ya, guess, |y| y[1], |_, f| f[1])?;
    Ok(Some(Shot {
        defect: y[2] + y[1],
        half_period: t,
    }))
}

/// Shooting on `ρ` for orbits leaving the axis perpendicularly and crossing it
/// again perpendicularly; by the reflection symmetry such an orbit is closed
/// with twice the half period. The grid of launch points is scanned in parallel.
pub fn find_symmetric_periodic_orbit(cfg: &SystemConfig, c: f64, family: &OrbitFamily) -> Result<PeriodicOrbit> {
    if cfg.mu() > 0.0 && cfg.mu() < 1.0 {
        let critical = first_critical_value(cfg)?;
        if c >= critical {
            return Err(Error::NotBelowCritical { energy: c, critical });
        }
    }
    let n = family.grid.max(2);
    let rhos: Vec<f64> = (0..n)
        .map(|i| family.rho_min + (family.rho_max - family.rho_min) * i as f64 / (n - 1) as f64)
        .collect();
    let shots: Vec<Option<Shot>> = rhos
        .par_iter()
        .map(|&r| shoot(cfg, c, family, r))
        .collect::<Result<_>>()?;

    let mut candidates = 0;
    let mut best: Option<PeriodicOrbit> = None;
    for i in 1..n {
        let (Some(a), Some(b)) = (&shots[i - 1], &shots[i]) else {
            continue;
        };
        if a.defect.signum() == b.defect.signum() {
            continue;
        }
        // a jump in the crossing time means a different crossing, not a root
        if (a.half_period - b.half_period).abs() > 0.25 * a.half_period.max(b.half_period) {
            continue;
        }
        candidates += 1;
        let root = bisect(
            "symmetric orbit",
            |r| {
                shoot(cfg, c, family, r)?
                    .map(|s| s.defect)
                    .ok_or_else(|| Error::NotFound("shot lost inside bracket".into()))
            },
            rhos[i - 1],
            rhos[i],
            1e-15,
        );
        let Ok(rho) = root else { continue };
        let Some(orbit) = close_orbit(cfg, c, family, rho, candidates)? else {
            continue;
        };
        let better = best
            .as_ref()
            .map_or(true, |b| (orbit.rho - family.rho_guess).abs() < (b.rho - family.rho_guess).abs());
        if better {
            best = Some(orbit);
        }
    }
    match best {
        Some(mut orbit) => {
            orbit.candidates = candidates;
            Ok(orbit)
        }
        None => Err(Error::NotFound(format!(
            "no symmetric periodic orbit at energy {c} for rho in [{}, {}] ({candidates} brackets)",
            family.rho_min, family.rho_max
        ))),
    }
}

fn close_orbit(
    cfg: &SystemConfig,
    c: f64,
    family: &OrbitFamily,
    rho: f64,
    candidates: usize,
) -> Result<Option<PeriodicOrbit>> {
    let Some(shot) = shoot(cfg, c, family, rho)? else {
        return Ok(None);
    };
    let Some(start) = launch(cfg, c, family, rho)? else {
        return Ok(None);
    };
    let period = 2.0 * shot.half_period;
    let opts = IntegratorOptions {
        tolerance: 1e-13,
        output_step: Some(period / 256.0),
        ..IntegratorOptions::default()
    };
    let trajectory = integrate_rotating_with(&start, cfg, period, &opts)?;
    let end = PhasePoint::from_vector(&Vector4::from_row_slice(&trajectory.last().state));
    let closure_defect = (end.to_vector() - start.to_vector()).amax();
    if closure_defect >= 1e-8 {
        return Ok(None);
    }
    let energy_defect = trajectory
        .samples
        .iter()
        .map(|s| (s.conserved - c).abs())
        .fold(0.0, f64::max);
    Ok(Some(PeriodicOrbit {
        rho,
        start,
        period,
        closure_defect,
        energy_defect,
        candidates,
        trajectory,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geodesic_period_is_two_pi() {
        let g = kepler_geodesic_period(1e-13).unwrap();
        assert!(g.period_error < 1e-6, "{}", g.period);
        assert!(g.closure_defect < 1e-9, "{}", g.closure_defect);
        assert!(g.plane_defect < 1e-10);
        assert!(g.max_xi0 > 0.99);
        assert!(g.q_drift <= 1e-9 && g.constraint_defect <= 1e-10);
    }

    fn moon_start(cfg: &SystemConfig) -> PhasePoint {
        // a loop around the moon at distance 0.15
        let m = cfg.moon_pos();
        let r: f64 = 0.15;
        let v = (cfg.mu() / r).sqrt() - r;
        PhasePoint::new(m[0] + r, 0.0, 0.0, v + m[0] + r)
    }

    #[test]
    fn correspondence_on_a_short_arc() {
        let cfg = SystemConfig::new(0.3).unwrap();
        let x0 = moon_start(&cfg);
        let a = correspondence_check(&x0, &cfg, Primary::Moon, 1.0, 64).unwrap();
        assert!(a.max_deviation < 1e-6, "{a:?}");
        let b = correspondence_check(&x0, &cfg, Primary::Moon, 1.0, 128).unwrap();
        assert!(b.max_deviation < 1e-6, "{b:?}");
        assert!((a.s_end - b.s_end).abs() < 1e-10);
        assert!(a.q_drift < 1e-9 && a.h_drift < 1e-9);
    }

    #[test]
    fn kepler_correspondence_uses_the_rotating_kepler_q() {
        let cfg = SystemConfig::new(0.0).unwrap();
        let x0 = PhasePoint::new(0.4, 0.0, 0.0, 1.9);
        let r = correspondence_check(&x0, &cfg, Primary::Earth, 1.0, 32).unwrap();
        assert!(r.max_deviation < 1e-6, "{r:?}");
        let q3 = RegularizedHamiltonian::three_body(r.k, &cfg, Primary::Earth);
        let qk = RegularizedHamiltonian::kepler(r.k, KeplerFrame::Rotating);
        let pt = q3.lift(&x0);
        assert!((q3.value(&pt).unwrap() - qk.value(&pt).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn collision_passage() {
        let cfg = SystemConfig::new(0.3).unwrap();
        let k = first_critical_value(&cfg).unwrap() - 0.05;
        let demo = collision_passage_demo(&cfg, k, Primary::Moon).unwrap();
        assert!(demo.max_momentum > 1e3, "{}", demo.max_momentum);
        assert!(demo.q_drift < 1e-9, "{}", demo.q_drift);
        assert!(demo.constraint_defect <= 1e-10);
        assert!(demo.energy_defect < 1e-8, "{}", demo.energy_defect);
        assert!(demo.symmetry_defect < 1e-8, "{}", demo.symmetry_defect);
    }

    #[test]
    fn collision_demo_needs_an_energy_below_critical() {
        let cfg = SystemConfig::new(0.3).unwrap();
        let k = first_critical_value(&cfg).unwrap() + 0.01;
        assert!(matches!(
            collision_passage_demo(&cfg, k, Primary::Moon),
            Err(Error::NotBelowCritical { .. })
        ));
    }

    #[test]
    fn retrograde_circular_kepler_orbit() {
        let cfg = SystemConfig::new(0.0).unwrap();
        let r: f64 = 0.5;
        let c = -1.0 / (2.0 * r) + r.sqrt();
        let mut fam = OrbitFamily::retrograde(Primary::Earth, 0.3, 0.7);
        fam.grid = 20;
        let orbit = find_symmetric_periodic_orbit(&cfg, c, &fam).unwrap();
        assert!((orbit.rho - r).abs() < 1e-8, "{}", orbit.rho);
        let period = TAU / (1.0 + r.powf(-1.5));
        assert!((orbit.period - period).abs() < 1e-8, "{} vs {period}", orbit.period);
        assert!(orbit.closure_defect < 1e-8 && orbit.energy_defect < 1e-8);
        fam.grid = 40;
        let again = find_symmetric_periodic_orbit(&cfg, c, &fam).unwrap();
        assert!((again.rho - orbit.rho).abs() < 1e-8);
    }

    #[test]
    fn moon_orbit_survives_grid_doubling() {
        let cfg = SystemConfig::new(0.3).unwrap();
        let c = first_critical_value(&cfg).unwrap() - 0.1;
        let mut fam = OrbitFamily::retrograde(Primary::Moon, 0.05, 0.4);
        fam.rho_guess = 0.15;
        let a = find_symmetric_periodic_orbit(&cfg, c, &fam).unwrap();
        fam.grid *= 2;
        let b = find_symmetric_periodic_orbit(&cfg, c, &fam).unwrap();
        assert!((a.rho - b.rho).abs() < 1e-8, "{} vs {}", a.rho, b.rho);
        assert!(a.closure_defect < 1e-8 && a.energy_defect < 1e-8);
    }
}
