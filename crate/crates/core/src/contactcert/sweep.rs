//! Polar grid certification of the moon and earth components below `H(L1)`.

use std::f64::consts::TAU;
use std::time::Instant;

use nalgebra::Vector2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{appendix_potential, earth_cartesian_margin, liouville_x_of_h_about, moon_sufficient_margin};
use crate::equilibria::{find_l1_distance, first_critical_value};
use crate::error::{Error, Result};
use crate::model::{
    effective_potential, effective_potential_lunar, potential_partials, LunarPolar, PhasePoint,
    Primary, SystemConfig,
};
use crate::parallel::{par_sweep, Sample, SweepStats};
use crate::report::{params, Axis, CertificationReport, GridSpec, SpotCheck, StrictCheck, Verdict};
use crate::roots::bisect;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepOptions {
    pub n_theta: usize,
    /// Uniform samples per ray, boundary included.
    pub n_rho: usize,
    /// Geometric refinement rings toward the Hill boundary.
    pub rings: usize,
    pub ring_points: usize,
    /// Inner cut-off `ρ_min = rho_min_fraction · d`.
    pub rho_min_fraction: f64,
    pub spot_fibers: usize,
    pub spot_momenta: usize,
    pub seed: u64,
    pub margin_tolerance: f64,
    pub strict: bool,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            n_theta: 1000,
            n_rho: 1000,
            rings: 10,
            ring_points: 4,
            rho_min_fraction: 1e-3,
            spot_fibers: 1000,
            spot_momenta: 32,
            seed: 0,
            margin_tolerance: crate::report::DEFAULT_MARGIN_TOLERANCE,
            strict: false,
        }
    }
}

impl SweepOptions {
    /// The same sweep with every grid resolution multiplied by `factor`.
    pub fn refined(&self, factor: usize) -> Self {
        Self {
            n_theta: self.n_theta * factor,
            n_rho: self.n_rho * factor,
            ..*self
        }
    }
}

/// The component around `primary`, described in the chart where that
/// primary is the "moon" (for the earth this is the relabelled system).
struct Component<'a> {
    cfg: &'a SystemConfig,
    primary: Primary,
    chart: SystemConfig,
    c: f64,
    d: f64,
    rho_min: f64,
}

impl Component<'_> {
    fn potential(&self, rho: f64, theta: f64) -> Result<f64> {
        effective_potential_lunar(&LunarPolar::new(rho, theta), &self.chart)
    }

    /// Position in the original rotating frame.
    fn position(&self, rho: f64, theta: f64) -> Vector2<f64> {
        let q = LunarPolar::new(rho, theta).to_cartesian(&self.chart);
        match self.primary {
            Primary::Moon => q,
            Primary::Earth => Vector2::new(-q[0], q[1]),
        }
    }

    /// Radius where the ray at `theta` leaves `{U <= c}`.
    fn boundary(&self, theta: f64) -> Result<f64> {
        bisect(
            "Hill boundary along a ray",
            |r| Ok(self.potential(r, theta)? - self.c),
            self.rho_min,
            self.d,
            1e-15,
        )
    }

    /// Whether the ray re-enters `{U <= c}` between its boundary and `d`.
    fn escapes(&self, theta: f64, rb: f64) -> Result<bool> {
        for k in 1..64 {
            let r = rb + (self.d - rb) * k as f64 / 64.0;
            if self.potential(r, theta)? <= self.c {
                return Ok(true);
            }
        }
        Ok(false)
    }

    fn margin(&self, rho: f64, theta: f64) -> Result<Option<f64>> {
        let u = self.potential(rho, theta)?;
        let slack = self.c - u;
        if slack < -1e-12 * u.abs().max(1.0) {
            return Ok(None);
        }
        // points produced by the boundary bisection may overshoot by rounding
        let c = self.c.max(u);
        let pt = LunarPolar::new(rho, theta);
        Ok(Some(match self.primary {
            Primary::Moon => moon_sufficient_margin(&pt, c, &self.chart)?,
            Primary::Earth => {
                let (r, s) = (rho * theta.cos(), rho * theta.sin());
                let k = c.max(appendix_potential(r, s, 1.0 - self.cfg.mu()));
                earth_cartesian_margin(r, s, k, self.cfg)?
            }
        }))
    }

    fn ray_samples(&self, rb: f64, opts: &SweepOptions) -> Vec<f64> {
        let n = opts.n_rho.max(2);
        let h = (rb - self.rho_min) / (n - 1) as f64;
        let mut rs: Vec<f64> = (0..n).map(|j| self.rho_min + h * j as f64).collect();
        rs[n - 1] = rb;
        for m in 1..=opts.rings {
            let w = h * 0.5f64.powi(m as i32);
            for t in 0..opts.ring_points {
                rs.push(rb - w * (1.0 + t as f64 / opts.ring_points as f64));
            }
        }
        rs
    }

    /// Full phase-space check `dH(X) > 0` on a momentum circle of the level set.
    fn fiber_values(&self, rho: f64, theta: f64, offset: f64, n: usize) -> Result<Vec<f64>> {
        let q = self.position(rho, theta);
        let u = effective_potential(&q, self.cfg)?;
        let v = (2.0 * (self.c - u).max(0.0)).sqrt();
        (0..n)
            .map(|k| {
                let phi = offset + TAU * k as f64 / n as f64;
                let vel = Vector2::new(v * phi.cos(), v * phi.sin());
                let x = PhasePoint {
                    q,
                    p: Vector2::new(vel[0] - q[1], vel[1] + q[0]),
                };
                liouville_x_of_h_about(&x, self.cfg, self.primary)
            })
            .collect()
    }
}

pub fn certify_moon_component(c: f64, cfg: &SystemConfig, opts: &SweepOptions) -> Result<CertificationReport> {
    certify_component(c, cfg, Primary::Moon, opts)
}

pub fn certify_earth_component(c: f64, cfg: &SystemConfig, opts: &SweepOptions) -> Result<CertificationReport> {
    certify_component(c, cfg, Primary::Earth, opts)
}

fn certify_component(
    c: f64,
    cfg: &SystemConfig,
    primary: Primary,
    opts: &SweepOptions,
) -> Result<CertificationReport> {
    let start = Instant::now();
    let critical = first_critical_value(cfg)?;
    if c >= critical {
        return Err(Error::NotBelowCritical { energy: c, critical });
    }
    let chart = match primary {
        Primary::Moon => *cfg,
        Primary::Earth => cfg.mirrored(),
    };
    let d = find_l1_distance(&chart)?;
    let comp = Component {
        cfg,
        primary,
        chart,
        c,
        d,
        rho_min: opts.rho_min_fraction * d,
    };

    let n_theta = opts.n_theta.max(1);
    let thetas: Vec<f64> = (0..n_theta).map(|i| TAU * i as f64 / n_theta as f64).collect();
    let boundaries: Vec<f64> = thetas
        .par_iter()
        .map(|&t| comp.boundary(t))
        .collect::<Result<_>>()?;
    let escaped: usize = thetas
        .par_iter()
        .zip(&boundaries)
        .map(|(&t, &rb)| comp.escapes(t, rb).map(usize::from))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .sum();

    let failures = std::sync::Mutex::new(Vec::new());
    let stats = par_sweep(n_theta, |i, s| {
        let theta = thetas[i];
        for (j, rho) in comp.ray_samples(boundaries[i], opts).into_iter().enumerate() {
            match comp.margin(rho, theta) {
                Ok(Some(m)) => {
                    let q = comp.position(rho, theta);
                    s.push(Sample {
                        value: m,
                        index: [i, j, 0],
                        location: [rho, theta, q[0], q[1]],
                    })
                }
                Ok(None) => {}
                Err(e) => failures.lock().unwrap().push((i, j, e.to_string())),
            }
        }
    });

    let (quantity, center) = match primary {
        Primary::Moon => ("U_rho - sqrt(2(c - U))", "moon"),
        Primary::Earth => ("r U_r + s U_s - |(r,s)| sqrt(2(c - U))", "earth"),
    };
    let grid = GridSpec {
        axes: vec![
            Axis::new("rho", comp.rho_min, d, opts.n_rho),
            Axis::new("theta", 0.0, TAU, n_theta),
        ],
        refinement_rings: opts.rings,
        note: Some(format!(
            "polar rays about the {center}, uniform up to the Hill boundary plus {} points per ring",
            opts.ring_points
        )),
    };
    let mut report = CertificationReport::from_stats(
        quantity,
        params(&[("mu", cfg.mu()), ("c", c), ("critical_value", critical), ("d", d)]),
        grid,
        &stats,
        &["rho", "theta", "q1", "q2"],
        opts.margin_tolerance,
    );
    let mut failures = failures.into_inner().unwrap();
    failures.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    if let Some((i, j, e)) = failures.first() {
        report.verdict = report.verdict.and(Verdict::Inconclusive);
        report
            .diagnostics
            .push(format!("{} evaluation failures, first at cell ({i}, {j}): {e}", failures.len()));
    }
    if escaped > 0 {
        report.verdict = report.verdict.and(Verdict::Inconclusive);
        report
            .diagnostics
            .push(format!("{escaped} rays re-enter the Hill region before the ball boundary"));
    }

    if opts.spot_fibers > 0 {
        let spot = spot_check(&comp, opts)?;
        if spot.violations > 0 {
            report.verdict = Verdict::Violated;
        }
        report.spot_check = Some(spot);
    }
    if opts.strict {
        let strict = strict_check(&comp)?;
        if !strict.certified {
            report.verdict = report.verdict.and(Verdict::Inconclusive);
            report
                .diagnostics
                .push("strict mode left unresolved cells".to_string());
        }
        report.strict = Some(strict);
    }
    report.wall_clock_seconds = Some(start.elapsed().as_secs_f64());
    Ok(report)
}

fn spot_check(comp: &Component, opts: &SweepOptions) -> Result<SpotCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let fibers: Vec<(f64, f64, f64)> = (0..opts.spot_fibers)
        .map(|_| {
            (
                rng.random_range(0.0..TAU),
                rng.random_range(0.0..1.0),
                rng.random_range(0.0..TAU),
            )
        })
        .collect();
    let n = opts.spot_momenta.max(1);
    let stats = fibers
        .par_iter()
        .enumerate()
        .map(|(i, &(theta, frac, offset))| -> Result<SweepStats> {
            let rb = comp.boundary(theta)?;
            let rho = comp.rho_min + frac * (rb - comp.rho_min);
            let mut s = SweepStats::default();
            for (k, v) in comp.fiber_values(rho, theta, offset, n)?.into_iter().enumerate() {
                s.push(Sample {
                    value: v,
                    index: [i, k, 0],
                    location: [rho, theta, 0.0, 0.0],
                });
            }
            Ok(s)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(SweepStats::default(), SweepStats::merge);
    Ok(SpotCheck {
        fibers: opts.spot_fibers,
        momenta_per_fiber: n,
        seed: opts.seed,
        min_value: stats.min_value(),
        violations: stats.negatives,
    })
}

/// Cell-wise lower bound of `U_ρ - sqrt(2(c - U))` from first-order Taylor
/// bounds, subdividing until positive or the depth limit is hit.
fn strict_check(comp: &Component) -> Result<StrictCheck> {
    const MAX_DEPTH: usize = 10;
    const SAFETY: f64 = 1.5;
    let (n_r, n_t) = (32, 64);
    let r_hi = comp.d * (1.0 - 1e-9);
    let dr = (r_hi - comp.rho_min) / n_r as f64;
    let dt = TAU / n_t as f64;

    // returns (cells examined, deepest level, unresolved)
    fn cell(comp: &Component, r0: f64, r1: f64, t0: f64, t1: f64, depth: usize) -> Result<(usize, usize, usize)> {
        let pts = [(r0, t0), (r0, t1), (r1, t0), (r1, t1), (0.5 * (r0 + r1), 0.5 * (t0 + t1))];
        let (hr, ht) = (0.5 * (r1 - r0), 0.5 * (t1 - t0));
        let (mut gu, mut gur, mut urr, mut urt) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
        for &(r, t) in &pts {
            let d = potential_partials(&LunarPolar::new(r, t), &comp.chart)?;
            gu = gu.max(d.d_rho.abs() * hr + d.d_theta.abs() * ht);
            gur = gur.max(d.d_rho_rho.abs() * hr + d.d_rho_theta.abs() * ht);
            urr = urr.max(d.d_rho_rho.abs());
            urt = urt.max(d.d_rho_theta.abs());
        }
        let (rc, tc) = pts[4];
        let u_lo = comp.potential(rc, tc)? - SAFETY * gu;
        if u_lo > comp.c {
            return Ok((1, depth, 0));
        }
        let urho_lo = potential_partials(&LunarPolar::new(rc, tc), &comp.chart)?.d_rho - SAFETY * gur;
        let bound = urho_lo - (2.0 * (comp.c - u_lo).max(0.0)).sqrt();
        if bound > 0.0 {
            return Ok((1, depth, 0));
        }
        if depth >= MAX_DEPTH {
            return Ok((1, depth, 1));
        }
        let (rm, tm) = (0.5 * (r0 + r1), 0.5 * (t0 + t1));
        let mut acc = (1, depth, 0);
        for (a, b, c, d) in [(r0, rm, t0, tm), (rm, r1, t0, tm), (r0, rm, tm, t1), (rm, r1, tm, t1)] {
            let (n, dep, un) = cell(comp, a, b, c, d, depth + 1)?;
            acc = (acc.0 + n, acc.1.max(dep), acc.2 + un);
        }
        Ok(acc)
    }

    let parts = (0..n_r * n_t)
        .into_par_iter()
        .map(|k| {
            let (i, j) = (k % n_r, k / n_r);
            let r0 = comp.rho_min + dr * i as f64;
            let t0 = dt * j as f64;
            cell(comp, r0, r0 + dr, t0, t0 + dt, 0)
        })
        .collect::<Result<Vec<_>>>()?;
    let (cells, max_depth, unresolved) = parts
        .into_iter()
        .fold((0, 0, 0), |a, b| (a.0 + b.0, a.1.max(b.1), a.2 + b.2));
    Ok(StrictCheck {
        cells,
        max_depth,
        unresolved,
        certified: unresolved == 0,
    })
}
