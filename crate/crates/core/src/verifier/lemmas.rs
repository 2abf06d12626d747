//! Grid checks of the lemmas behind transversality below the first critical level.

use std::collections::{BTreeMap, VecDeque};
use std::f64::consts::{PI, TAU};

use nalgebra::Vector2;
use num_traits::ToPrimitive;
use serde::Serialize;

use super::poly::{h_prime_exact, rational};
use crate::contactcert::{appendix_potential, appendix_radial_derivative, g_a, h, h_prime};
use crate::equilibria::{
    axis_potential_u, axis_potential_u2, find_l1_distance, first_critical_value, hill_components,
    mu_from_d, CellLabel, HillGrid,
};
use crate::error::Result;
use crate::model::{
    effective_potential_lunar, potential_gradient, potential_hessian, potential_partials, LunarPolar,
    SystemConfig,
};
use crate::parallel::{par_sweep, Sample, SweepStats};
use crate::report::{Axis, GridSpec, Verdict};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VerifierOptions {
    /// Points per one-dimensional sweep.
    pub n_1d: usize,
    /// Points per axis of a two-dimensional sweep.
    pub n_2d: usize,
    /// Points of the `d`-grid for the value of `W` at its maximum.
    pub n_w: usize,
    /// Distance kept from removable singularities at interval ends.
    pub clip: f64,
    /// Radius of the balls removed around the moon and `ℓ¹`.
    pub exclusion: f64,
}

impl Default for VerifierOptions {
    fn default() -> Self {
        Self {
            n_1d: 2000,
            n_2d: 500,
            n_w: 10_000,
            clip: 1e-4,
            exclusion: 1e-3,
        }
    }
}

impl VerifierOptions {
    pub fn refined(&self, factor: usize) -> Self {
        Self {
            n_1d: self.n_1d * factor,
            n_2d: self.n_2d * factor,
            n_w: self.n_w * factor,
            ..*self
        }
    }
}

/// A secondary check inside a lemma: `worst` is the worst value seen of the
/// quantity named, compared against `bound`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LemmaCheck {
    pub name: String,
    pub worst: f64,
    pub bound: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LemmaReport {
    pub lemma: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    pub grid: GridSpec,
    pub samples: usize,
    /// Worst normalized margin; the lemma's inequality is `margin > 0`.
    pub min_margin: f64,
    pub witness: BTreeMap<String, f64>,
    pub checks: Vec<LemmaCheck>,
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl LemmaReport {
    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Certified
    }

    pub fn failed_checks(&self) -> impl Iterator<Item = &LemmaCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

struct Builder {
    lemma: &'static str,
    mu: Option<f64>,
    grid: GridSpec,
    checks: Vec<LemmaCheck>,
    notes: Vec<String>,
}

impl Builder {
    fn new(lemma: &'static str, mu: Option<f64>) -> Self {
        Self {
            lemma,
            mu,
            grid: GridSpec::default(),
            checks: Vec::new(),
            notes: Vec::new(),
        }
    }

    fn axis(&mut self, name: &str, lo: f64, hi: f64, n: usize) {
        self.grid.axes.push(Axis::new(name, lo, hi, n));
    }

    /// Passes when `worst <= bound`.
    fn at_most(&mut self, name: &str, worst: f64, bound: f64) {
        self.checks.push(LemmaCheck {
            name: name.to_string(),
            worst,
            bound,
            passed: worst <= bound,
        });
    }

    /// Passes when `worst > bound`.
    fn above(&mut self, name: &str, worst: f64, bound: f64) {
        self.checks.push(LemmaCheck {
            name: name.to_string(),
            worst,
            bound,
            passed: worst > bound,
        });
    }

    fn flag(&mut self, name: &str, ok: bool) {
        self.checks.push(LemmaCheck {
            name: name.to_string(),
            worst: if ok { 1.0 } else { 0.0 },
            bound: 1.0,
            passed: ok,
        });
    }

    fn finish(self, stats: &SweepStats, names: &[&str]) -> LemmaReport {
        let min_margin = stats.min_value();
        let witness = stats
            .min
            .map(|s| names.iter().zip(s.location).map(|(n, v)| (n.to_string(), v)).collect())
            .unwrap_or_default();
        let verdict = if stats.count == 0 {
            Verdict::Inconclusive
        } else if stats.negatives > 0 || !(min_margin > 0.0) || self.checks.iter().any(|c| !c.passed) {
            Verdict::Violated
        } else {
            Verdict::Certified
        };
        LemmaReport {
            lemma: self.lemma.to_string(),
            mu: self.mu,
            grid: self.grid,
            samples: stats.count,
            min_margin,
            witness,
            checks: self.checks,
            verdict,
            notes: self.notes,
        }
    }
}

fn sample(value: f64, i: usize, j: usize, loc: [f64; 4]) -> Sample {
    Sample {
        value,
        index: [i, j, 0],
        location: loc,
    }
}

/// `n` points spread evenly over `[lo, hi]`, endpoints included.
fn linspace(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> + Clone {
    let n = n.max(2);
    (0..n).map(move |i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
}

fn max_over<I: Iterator<Item = f64>>(it: I) -> f64 {
    it.fold(f64::NEG_INFINITY, |a, b| if b.is_nan() || b > a { b } else { a })
}

fn min_over<I: Iterator<Item = f64>>(it: I) -> f64 {
    it.fold(f64::INFINITY, |a, b| if b.is_nan() || b < a { b } else { a })
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

fn central<F: Fn(f64) -> f64>(f: F, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

fn kappa(rho: f64, c: f64) -> f64 {
    rho * rho - 2.0 * rho * c + 1.0
}

fn u_at(cfg: &SystemConfig, rho: f64, theta: f64) -> f64 {
    effective_potential_lunar(&LunarPolar::new(rho, theta), cfg).unwrap_or(f64::NAN)
}

fn partials(cfg: &SystemConfig, rho: f64, theta: f64) -> crate::model::LunarPartials {
    potential_partials(&LunarPolar::new(rho, theta), cfg).unwrap_or(crate::model::LunarPartials {
        d_rho: f64::NAN,
        d_theta: f64::NAN,
        d_rho_rho: f64::NAN,
        d_rho_theta: f64::NAN,
        d_rho3: f64::NAN,
    })
}

/// `U_ρ(θ) - U_ρ(0) = (1-μ) ρ (1 - cosθ) (2/S - 1)` with
/// `S = (1-ρ) √κ (√κ + 1 - ρ)`; the `μ/ρ` terms cancel exactly.
fn u_rise(nu: f64, rho: f64, theta: f64) -> f64 {
    let c = theta.cos();
    let sk = kappa(rho, c).sqrt();
    let s = (1.0 - rho) * sk * (sk + 1.0 - rho);
    nu * rho * (1.0 - c) * (2.0 - s) / s
}

/// `V_ρ(θ) - V_ρ(0)` with the `μ/ρ²` terms cancelled.
fn v_rise(nu: f64, rho: f64, theta: f64) -> f64 {
    let c = theta.cos();
    nu * ((rho - c) / kappa(rho, c).powf(1.5) + 1.0 / (1.0 - rho).powi(2) + c - 1.0)
}

/// `U_θθ` at lunar polar `(ρ, θ)` from the Cartesian Hessian and gradient.
fn u_theta_theta_cartesian(cfg: &SystemConfig, rho: f64, theta: f64) -> Option<(f64, f64)> {
    let q = LunarPolar::new(rho, theta).to_cartesian(cfg);
    let hess = potential_hessian(&q, cfg).ok()?;
    let grad = potential_gradient(&q, cfg).ok()?;
    let (s, c) = theta.sin_cos();
    let t = Vector2::new(-s, c);
    let r = Vector2::new(c, s);
    let a = rho * rho * t.dot(&(hess * t));
    let b = rho * r.dot(&grad);
    // the distance to the earth, 1 - rho at theta = 0, is formed with cancellation
    Some((a - b, (a.abs() + b.abs() + 1.0) / (1.0 - rho)))
}

/// For every `ρ ∈ (0, 1)` the restriction `U_ρ = U(ρ, ·)` is minimal at `θ = 0`.
///
/// Margin: `(U_ρ(θ) - U_ρ(0)) / ((1 - cosθ)(U_ρ(π) - U_ρ(0))/2)`, which is `1`
/// at `θ = π` and stays bounded away from zero as the grids are refined.
pub fn verify_tra1(cfg: &SystemConfig, opts: &VerifierOptions) -> Result<LemmaReport> {
    let mu = cfg.mu();
    let nu = 1.0 - mu;
    let n = opts.n_2d.max(4);
    let (lo, hi) = (opts.clip, 1.0 - opts.clip);
    let rhos: Vec<f64> = linspace(lo, hi, n).collect();
    let mut b = Builder::new("tra1", Some(mu));
    b.axis("rho", lo, hi, n);
    b.axis("theta", TAU / n as f64, TAU * (n - 1) as f64 / n as f64, n - 1);

    let stats = par_sweep(n, |i, st| {
        let rho = rhos[i];
        let half_drop = nu * rho.powi(3) / (1.0 - rho * rho);
        for j in 1..n {
            let th = TAU * j as f64 / n as f64;
            let m = u_rise(nu, rho, th) / ((1.0 - th.cos()) * half_drop);
            st.push(sample(m, i, j, [rho, th, 0.0, 0.0]));
        }
    });

    // the cancellation-free rise against raw differences of U where those are well conditioned
    let consistency = par_sweep(n, |i, st| {
        let rho = rhos[i];
        if rho < 0.05 {
            return;
        }
        let u0 = u_at(cfg, rho, 0.0);
        for j in 1..n {
            let th = TAU * j as f64 / n as f64;
            let raw = u_at(cfg, rho, th) - u0;
            // kappa = (1 - rho)^2 at theta = 0 is formed with cancellation
            let scale = u0.abs().max(1.0) / (1.0 - rho).powi(2);
            st.push(sample(1e-12 - (raw - u_rise(nu, rho, th)).abs() / scale, i, j, [rho, th, 0.0, 0.0]));
        }
    });
    b.above("rise formula agrees with raw U differences (1e-12 minus scaled error)", consistency.min_value(), -f64::EPSILON);

    // critical point structure along a fine rho grid
    let fine: Vec<f64> = linspace(lo, hi, opts.n_1d).collect();
    let crit = max_over(fine.iter().flat_map(|&r| {
        let p0 = partials(cfg, r, 0.0).d_theta.abs();
        let pp = partials(cfg, r, PI).d_theta.abs();
        [p0, pp]
    }));
    b.at_most("|U'(0)|, |U'(pi)|", crit, 1e-12);

    let mut worst_d2 = 0.0f64;
    let mut min_d2 = f64::INFINITY;
    let mut min_display = f64::INFINITY;
    for &r in &fine {
        let u2_0 = nu * r * (1.0 / (1.0 - r).powi(3) - 1.0);
        let u2_pi = -nu * r * (1.0 / (1.0 + r).powi(3) - 1.0);
        for (th, closed) in [(0.0, u2_0), (PI, u2_pi)] {
            if let Some((oracle, scale)) = u_theta_theta_cartesian(cfg, r, th) {
                worst_d2 = worst_d2.max((closed - oracle).abs() / scale);
            }
            min_d2 = min_d2.min(closed);
        }
        min_display = min_display.min(nu * (1.0 / (1.0 - r).powi(3) - 1.0));
    }
    b.at_most("U''(0), U''(pi) closed forms vs Cartesian Hessian (scaled)", worst_d2, 1e-12);
    b.above("U''(0), U''(pi) > 0", min_d2, 0.0);
    b.above("short form of U''(0) without the factor rho is positive", min_display, 0.0);
    b.notes.push(
        "U''_rho(0) = (1-mu) rho (1/(1-rho)^3 - 1); the short form omits the factor rho, which does not change its sign"
            .to_string(),
    );

    let drop = max_over(fine.iter().map(|&r| {
        let closed = -2.0 * nu * r.powi(3) / ((1.0 - r) * (1.0 + r));
        let direct = u_at(cfg, r, 0.0) - u_at(cfg, r, PI);
        (closed - direct).abs() * (1.0 - r).powi(2) / (1.0 + u_at(cfg, r, 0.0).abs())
    }));
    b.at_most("U(0) - U(pi) closed form (scaled)", drop, 1e-12);
    b.above(
        "U(0) - U(pi) < 0",
        -max_over(fine.iter().map(|&r| -2.0 * nu * r.powi(3) / ((1.0 - r) * (1.0 + r)))),
        0.0,
    );

    // interior maxima at cos = rho/2, located on the cancellation-free rise
    let m = opts.n_1d.max(4);
    let dth = PI / m as f64;
    let cos_gap = max_over(linspace(lo, hi, opts.n_2d).map(|r| {
        let (best, _) = (1..m)
            .map(|j| {
                let th = PI * j as f64 / m as f64;
                (th, u_rise(nu, r, th))
            })
            .fold((f64::NAN, f64::NEG_INFINITY), |a, x| if x.1 > a.1 { x } else { a });
        (best.cos() - r / 2.0).abs()
    }));
    b.at_most("|cos(argmax) - rho/2| (one theta step allowed)", cos_gap, dth);

    Ok(b.finish(&stats, &["rho", "theta"]))
}

/// `∂U/∂ρ > 0` on the ball of radius `d` about the moon, away from the moon and `ℓ¹`.
///
/// Margin: `∂U/∂ρ / |q - ℓ¹|²`, positive and bounded below up to `ℓ¹`.
pub fn verify_tra2(cfg: &SystemConfig, opts: &VerifierOptions) -> Result<LemmaReport> {
    let mu = cfg.mu();
    let nu = 1.0 - mu;
    let d = find_l1_distance(cfg)?;
    let n = opts.n_2d.max(4);
    let ex = opts.exclusion;
    let rhos: Vec<f64> = linspace(ex, d, n).collect();
    let mut b = Builder::new("tra2", Some(mu));
    b.axis("rho", ex, d, n);
    b.axis("theta", 0.0, TAU * (n - 1) as f64 / n as f64, n);

    let stats = par_sweep(n, |i, st| {
        let rho = rhos[i];
        for j in 0..n {
            let th = TAU * j as f64 / n as f64;
            let dist2 = rho * rho + d * d - 2.0 * rho * d * th.cos();
            if dist2 < ex * ex {
                continue;
            }
            let v = partials(cfg, rho, th).d_rho;
            st.push(sample(v / dist2, i, j, [rho, th, v, 0.0]));
        }
    });

    // u is concave and critical at d
    let (lo, hi) = (opts.clip, 1.0 - opts.clip);
    let u2 = max_over(linspace(lo, hi, opts.n_1d).map(|r| axis_potential_u2(r, cfg).unwrap_or(f64::NAN)));
    b.above("u'' < 0 on (0, 1) (negated max)", -u2, 0.0);
    b.at_most("|u'(d)|", axis_potential_u(d, cfg)?.1.abs(), 1e-10);

    // V_rho minimal at 0 and only there
    let rhos2: Vec<f64> = linspace(lo, hi, n).collect();
    let step2 = par_sweep(n, |i, st| {
        let rho = rhos2[i];
        let half = rho * rho * (3.0 - rho * rho) / (1.0 - rho * rho).powi(2);
        for j in 1..n {
            let th = TAU * j as f64 / n as f64;
            let m = v_rise(1.0, rho, th) / ((1.0 - th.cos()) * half);
            st.push(sample(m, i, j, [rho, th, 0.0, 0.0]));
        }
    });
    b.above("V_rho(theta) > V_rho(0), normalized", step2.min_value(), 0.0);

    let fine: Vec<f64> = linspace(lo, hi, opts.n_1d).collect();
    let mut worst_factor = 0.0f64;
    let mut worst_fd = 0.0f64;
    let mut min_v2 = f64::INFINITY;
    let mut worst_diff = 0.0f64;
    for &r in &fine {
        let raw = nu * ((-2.0 * r * r + r + 1.0) / (1.0 - r).powi(5) - 1.0);
        let factored = nu * ((2.0 * r + 1.0) / (1.0 - r).powi(4) - 1.0);
        worst_factor = worst_factor.max(rel_err(raw, factored));
        let v2_pi = -nu * ((-2.0 * r * r - r + 1.0) / (1.0 + r).powi(5) - 1.0);
        min_v2 = min_v2.min(factored).min(v2_pi);
        if r < 0.95 {
            let h = 1e-6;
            for (th, closed) in [(0.0, factored), (PI, v2_pi)] {
                let fd = central(|t| partials(cfg, r, t).d_rho_theta, th, h);
                worst_fd = worst_fd.max(rel_err(closed, fd));
            }
        }
        let closed = 2.0 * nu * (r.powi(4) - 3.0 * r * r) / ((1.0 - r).powi(2) * (1.0 + r).powi(2));
        let direct = partials(cfg, r, 0.0).d_rho - partials(cfg, r, PI).d_rho;
        let scale = (1.0 + partials(cfg, r, 0.0).d_rho.abs() + partials(cfg, r, PI).d_rho.abs())
            / (1.0 - r).powi(2);
        worst_diff = worst_diff.max((closed - direct).abs() / scale);
    }
    b.at_most("V''(0) two closed forms agree", worst_factor, 1e-12);
    b.at_most("V''(0), V''(pi) vs finite differences", worst_fd, 1e-6);
    b.above("V''(0), V''(pi) > 0", min_v2, 0.0);
    b.at_most("V(0) - V(pi) closed form (scaled)", worst_diff, 1e-12);

    // The auxiliary f(tau) has f(-1) < 0 < f(1) and exactly one zero. Its
    // derivative is a positive multiple of 6 - 9 rho^2 + 3 rho tau, so f is
    // increasing for rho <= 2/3 only; beyond that it dips first and the zero
    // is still unique.
    let taus: Vec<f64> = linspace(-1.0, 1.0, opts.n_1d).collect();
    let mut monotone = true;
    let mut single_zero = true;
    for r in linspace(lo, hi, n) {
        let f = |t: f64| (-2.0 * r * r + r * t + 1.0) / kappa(r, t).powf(2.5) - 1.0;
        let vals: Vec<f64> = taus.iter().map(|&t| f(t)).collect();
        let crossings = vals.windows(2).filter(|w| (w[0] < 0.0) != (w[1] < 0.0)).count();
        single_zero &= vals[0] < 0.0 && vals[vals.len() - 1] > 0.0 && crossings == 1;
        if r <= 2.0 / 3.0 {
            monotone &= vals.windows(2).all(|w| w[1] > w[0]);
        }
    }
    b.flag("f(tau) has exactly one zero on [-1, 1]", single_zero);
    b.flag("f(tau) strictly increasing for rho <= 2/3", monotone);
    b.notes.push(
        "f(tau) is not monotone for rho > 2/3 (f'(-1) has the sign of 2 - 3 rho); uniqueness of its zero, which is what the argument needs, holds on the whole interval"
            .to_string(),
    );

    Ok(b.finish(&stats, &["rho", "theta", "dU_drho"]))
}

/// Maximizer of `W_ρ`: `cosϑ = (ρ² - 1 + √(-ρ⁴ + ρ² + 1)) / ρ`.
pub fn w_maximizer_cos(rho: f64) -> f64 {
    (rho * rho - 1.0 + (-rho.powi(4) + rho * rho + 1.0).sqrt()) / rho
}

fn w_value(mu: f64, rho: f64, c: f64) -> f64 {
    -2.0 * mu / rho.powi(3)
        - (1.0 - mu) * (2.0 * rho * rho - 4.0 * rho * c - 1.0 + 3.0 * c * c) / kappa(rho, c).powf(2.5)
}

fn w_prime(nu: f64, rho: f64, theta: f64) -> f64 {
    let (s, c) = theta.sin_cos();
    3.0 * nu * s / kappa(rho, c).powf(3.5)
        * (rho * c * c + 2.0 * (1.0 - rho * rho) * c + rho * (2.0 * rho * rho - 3.0))
}

/// `∂²U/∂ρ² ≤ -1` on the ball of radius `d` about the moon; equivalently `W ≤ 0`.
///
/// Margin: `-W`.
pub fn verify_tra3(cfg: &SystemConfig, opts: &VerifierOptions) -> Result<LemmaReport> {
    let mu = cfg.mu();
    let nu = 1.0 - mu;
    let d = find_l1_distance(cfg)?;
    let n = opts.n_2d.max(4);
    let ex = opts.exclusion;
    let rhos: Vec<f64> = linspace(ex, d, n).collect();
    let drho = (d - ex) / (n - 1) as f64;
    let mut b = Builder::new("tra3", Some(mu));
    b.axis("rho", ex, d, n);
    b.axis("theta", 0.0, TAU * (n - 1) as f64 / n as f64, n);

    let stats = par_sweep(n, |i, st| {
        let rho = rhos[i];
        for j in 0..n {
            let th = TAU * j as f64 / n as f64;
            let w = partials(cfg, rho, th).d_rho_rho + 1.0;
            st.push(sample(-w, i, j, [rho, th, w, 0.0]));
        }
    });
    let argmax_rho = stats.min.map_or(f64::NAN, |s| s.location[0]);
    b.at_most("grid argmax of W within one step of the boundary", (argmax_rho - d).abs(), drho);

    // the maximizer formula against a bisection root of the quadratic
    let (lo, hi) = (opts.clip, 1.0 - opts.clip);
    let fine: Vec<f64> = linspace(lo, hi, opts.n_1d).collect();
    let mut worst_root = 0.0f64;
    let mut other_root = f64::NEG_INFINITY;
    for &r in &fine {
        let q = |c: f64| r * c * c + 2.0 * (1.0 - r * r) * c + r * (2.0 * r * r - 3.0);
        let (mut a, mut bb) = (-1.0, 1.0);
        for _ in 0..200 {
            let m = 0.5 * (a + bb);
            if q(m) < 0.0 {
                a = m
            } else {
                bb = m
            }
        }
        worst_root = worst_root.max((w_maximizer_cos(r) - 0.5 * (a + bb)).abs());
        other_root = other_root.max((r * r - 1.0 - (-r.powi(4) + r * r + 1.0).sqrt()) / r);
    }
    b.at_most("maximizer formula vs bisection root", worst_root, 1e-10);
    b.above("second root below -1 (negated, shifted)", -1.0 - other_root, 0.0);

    let m = opts.n_1d.max(4);
    let dth = PI / m as f64;
    let theta_gap = max_over(linspace(ex, d, opts.n_2d).map(|r| {
        let (best, _) = (0..=m)
            .map(|j| {
                let th = PI * j as f64 / m as f64;
                (th, w_value(mu, r, th.cos()))
            })
            .fold((f64::NAN, f64::NEG_INFINITY), |a, x| if x.1 > a.1 { x } else { a });
        (best - w_maximizer_cos(r).acos()).abs()
    }));
    b.at_most("grid argmax of W_rho vs maximizer formula", theta_gap, dth);

    // second derivatives at 0 and pi
    let mut worst_fd = 0.0f64;
    let mut min_w2 = f64::INFINITY;
    for &r in fine.iter().filter(|&&r| r < 0.95) {
        let w2_0 = 6.0 * nu * (r + 1.0) / (1.0 - r).powi(5);
        let w2_0_raw = 6.0 * nu * (r.powi(3) - r * r - r + 1.0) / (1.0 - r).powi(7);
        let w2_pi = 6.0 * nu * (1.0 - r) / (1.0 + r).powi(5);
        let h = 1e-5;
        worst_fd = worst_fd
            .max(rel_err(w2_0, central(|t| w_prime(nu, r, t), 0.0, h)))
            .max(rel_err(w2_0_raw, w2_0))
            .max(rel_err(w2_pi, central(|t| w_prime(nu, r, t), PI, h)));
        min_w2 = min_w2.min(w2_0).min(w2_pi);
    }
    b.at_most("W''(0), W''(pi) closed forms vs finite differences", worst_fd, 1e-6);
    b.above("W''(0), W''(pi) > 0", min_w2, 0.0);
    b.notes.push(
        "W''_rho(pi) = 6(1-mu)(1-rho)/(1+rho)^5; the short-form denominators (1-rho)^7 and (1-rho)^6 should read (1+rho)^7 and the simplification differs, while the sign is unaffected"
            .to_string(),
    );

    // along the maximizer curve inside the ball
    let mut min_gap = f64::INFINITY;
    let mut min_e3 = f64::INFINITY;
    let mut worst_chain = 0.0f64;
    let mut min_dw = f64::INFINITY;
    for r in linspace(lo, d, opts.n_1d) {
        let c = w_maximizer_cos(r);
        let sq = (-r.powi(4) + r * r + 1.0).sqrt();
        let e3 = 3.0 + 4.0 * r * c - 2.0 * r * r - 5.0 * c * c;
        let line1 = (2.0 * r.powi(4) + 4.0 * r * r - 10.0 + (10.0 - 6.0 * r * r) * sq) / (r * r);
        let den = 10.0 - 2.0 * r.powi(4) - 4.0 * r * r + (10.0 - 6.0 * r * r) * sq;
        let line3 = 20.0 * (3.0 - 8.0 * r * r + 7.0 * r.powi(4) - 2.0 * r.powi(6)) / den;
        let line4 = 40.0 * (r - 1.0).powi(2) * (r + 1.0).powi(2) * (1.5 - r * r) / den;
        worst_chain = worst_chain
            .max(rel_err(line1, e3))
            .max(rel_err(line3, e3))
            .max(rel_err(line4, e3));
        min_gap = min_gap.min(c - r);
        min_e3 = min_e3.min(e3);
        let th = c.clamp(-1.0, 1.0).acos();
        min_dw = min_dw.min(partials(cfg, r, th).d_rho3);
    }
    b.above("cos(theta0) - rho0 > 0", min_gap, 0.0);
    b.above("3 + 4 rho c - 2 rho^2 - 5 c^2 > 0", min_e3, 0.0);
    b.at_most("rewritings of 3 + 4 rho c - 2 rho^2 - 5 c^2 agree", worst_chain, 1e-6);
    b.above("dW/drho > 0 along the maximizer curve", min_dw, 0.0);
    b.notes.push(
        "the numerator factors as 40(rho-1)^2(rho+1)^2(3/2-rho^2); the short form drops (rho+1)^2".to_string(),
    );

    Ok(b.finish(&stats, &["rho", "theta", "W"]))
}

/// The value of `W` at its maximum as a function of `d` alone, as displayed.
pub fn w_final_display(d: f64) -> f64 {
    let r = (-d.powi(4) + d * d + 1.0).sqrt();
    let den4 = d.powi(4) - 2.0 * d.powi(3) - d * d + 2.0 * d - 1.0;
    let x = 3.0 - d * d - 2.0 * r;
    let x52 = x.powf(2.5);
    let t1 = 2.0 * d * d * (d * d - 3.0 * d + 3.0) * x52 / (den4 * x52 * d * d);
    let t2 = (d.powi(5) - 2.0 * d.powi(4) + d.powi(3) - d * d + 2.0 * d - 1.0)
        * (6.0 - 2.0 * d.powi(4) - (6.0 - 2.0 * d * d) * r)
        / (den4 * x52 * d * d);
    t1 - t2
}

/// The same value after the `a - √b` rewrites, as a quotient with the
/// `(1 - d)⁵` factors cancelled. Returns `(value, numerator, denominator)`.
pub fn w_final_simplified(d: f64) -> (f64, f64, f64) {
    let r = (1.0 + d * d - d.powi(4)).sqrt();
    let den4 = (d - 0.5).powi(4) - 2.5 * (d - 0.5).powi(2) - 7.0 / 16.0;
    let y52 = (3.0 - d * d + 2.0 * r).powf(2.5);
    let five = 5f64.powf(2.5);
    let cubic = d * d + d + 1.0;
    let num = five * (1.0 + d).powi(3) * (d * d - 3.0 * d + 3.0) / y52 + cubic * d * d / (1.0 + r).powi(2)
        - cubic / (1.0 + r);
    let den = den4 * (1.0 + d).powi(3) * five / y52;
    (2.0 * num / den, num, den)
}

/// `W(d, ϑ)` evaluated directly with `μ = μ(d)`.
fn w_final_direct(d: f64) -> f64 {
    let mu = mu_from_d(d).unwrap_or(f64::NAN);
    w_value(mu, d, w_maximizer_cos(d))
}

/// `W(ρ₀, θ₀) < 0` for `d ∈ (0, 1)`, and the elementary estimates used to show it.
///
/// Margin: `-W(ρ₀, θ₀)` from the displayed closed form.
pub fn verify_w_final(opts: &VerifierOptions) -> Result<LemmaReport> {
    let n = opts.n_w.max(4);
    let (lo, hi) = (opts.clip, 1.0 - opts.clip);
    let ds: Vec<f64> = linspace(lo, hi, n).collect();
    let mut b = Builder::new("W_final", None);
    b.axis("d", lo, hi, n);

    let stats = par_sweep(n, |i, st| {
        let d = ds[i];
        st.push(sample(-w_final_display(d), i, 0, [d, 0.0, 0.0, 0.0]));
    });

    let agree = max_over(ds.iter().map(|&d| {
        let a = w_final_display(d);
        rel_err(w_final_direct(d), a).max(rel_err(w_final_simplified(d).0, a))
    }));
    b.at_most("display, direct and simplified forms agree", agree, 1e-5);

    let half = mu_from_d(0.5)?;
    b.at_most("|mu(1/2) - 1/2|", (half - 0.5).abs(), 0.0);
    b.above("-W at d = 1/2", -w_final_display(0.5), 0.0);

    let sq = |d: f64| (1.0 + d * d - d.powi(4)).sqrt();
    b.above(
        "(1+d)^3 - (d^2+d+1) >= 0",
        min_over(ds.iter().map(|&d| (1.0 + d).powi(3) - (d * d + d + 1.0))),
        0.0,
    );
    b.above("d^2 - 3d + 3 - 1 >= 0", min_over(ds.iter().map(|&d| d * d - 3.0 * d + 2.0)), -1e-15);
    b.above(
        "5^(5/2)/(3-d^2+2sqrt(1+d^2-d^4))^(5/2) - 1 >= 0",
        min_over(ds.iter().map(|&d| 5f64.powf(2.5) / (3.0 - d * d + 2.0 * sq(d)).powf(2.5) - 1.0)),
        -1e-15,
    );
    b.above(
        "1 - 1/(1+sqrt(1+d^2-d^4)) > 0",
        min_over(ds.iter().map(|&d| 1.0 - 1.0 / (1.0 + sq(d)))),
        0.0,
    );
    let y = |d: f64| 3.0 - d * d + 2.0 * sq(d);
    let y_prime = |d: f64| -2.0 * d * (1.0 - (1.0 - 2.0 * d * d) / sq(d));
    b.at_most(
        "derivative of 3-d^2+2sqrt(1+d^2-d^4) vs finite differences",
        max_over(ds.iter().map(|&d| rel_err(y_prime(d), central(y, d, 1e-6)))),
        1e-6,
    );
    b.at_most(
        "that derivative minus its bound -4d^3/sqrt(1+d^2-d^4) (max, <= 0)",
        max_over(ds.iter().map(|&d| y_prime(d) + 4.0 * d.powi(3) / sq(d))),
        1e-15,
    );
    b.above("simplified numerator > 0", min_over(ds.iter().map(|&d| w_final_simplified(d).1)), 0.0);
    b.above("simplified denominator < 0 (negated)", min_over(ds.iter().map(|&d| -w_final_simplified(d).2)), 0.0);

    Ok(b.finish(&stats, &["d"]))
}

/// `h ≥ 1` on `(-1, 1)` with its only critical point at `t = 0`, plus the
/// comparisons `h(cosθ) = g₁(θ)²` and `g_a > g₁` for `a > 1`.
///
/// Margin: `(h(t) - 1) / t²` over `t ≠ 0`.
pub fn verify_h_claim(opts: &VerifierOptions) -> Result<LemmaReport> {
    let half = opts.n_1d.max(2);
    let edge = 1.0 - opts.clip;
    let ts: Vec<f64> = (0..=2 * half).map(|i| edge * (i as f64 - half as f64) / half as f64).collect();
    let mut b = Builder::new("h_claim", None);
    b.axis("t", -edge, edge, ts.len());

    let mut stats = SweepStats::default();
    for (i, &t) in ts.iter().enumerate() {
        if t != 0.0 {
            stats.push(sample((h(t)? - 1.0) / (t * t), i, 0, [t, 0.0, 0.0, 0.0]));
        }
    }

    let (argmin, min_h) = ts
        .iter()
        .map(|&t| (t, h(t).unwrap_or(f64::NAN)))
        .fold((f64::NAN, f64::INFINITY), |a, x| if x.1 < a.1 { x } else { a });
    b.at_most("|min h - 1|", (min_h - 1.0).abs(), 1e-10);
    b.at_most("|argmin h|", argmin.abs(), 0.0);

    let signs: Vec<f64> = ts.iter().map(|&t| h_prime(t).unwrap_or(f64::NAN)).collect();
    let changes = signs
        .windows(2)
        .filter(|w| (w[0] < 0.0 && w[1] >= 0.0) || (w[0] > 0.0 && w[1] <= 0.0))
        .count();
    let zero_ok = h_prime(0.0)? == 0.0
        && ts.iter().zip(&signs).all(|(&t, &s)| t == 0.0 || (t < 0.0) == (s < 0.0));
    b.flag("h' changes sign once, at t = 0", changes == 1 && zero_ok);

    let thetas: Vec<f64> = linspace(opts.clip, PI - opts.clip, opts.n_1d).collect();
    // 1 - cos and 1 + cos lose digits near the ends; sin^2 is their product
    let hg = max_over(thetas.iter().map(|&th| {
        let g = g_a(th, 1.0).unwrap_or(f64::NAN);
        (h(th.cos()).unwrap_or(f64::NAN) - g * g).abs() / (g * g) * th.sin().powi(2)
    }));
    b.at_most("h(cos) = g_1^2 (relative, times sin^2)", hg, 1e-12);
    let mut cmp = f64::INFINITY;
    for a in [1.5, 2.0, 3.0] {
        for &th in &thetas {
            cmp = cmp.min(g_a(th, a)? - g_a(th, 1.0)?);
        }
    }
    b.above("g_a - g_1 for a in {1.5, 2, 3}", cmp, 0.0);

    let exact = h_prime_exact(&rational(1, 2)).to_f64().unwrap_or(f64::NAN);
    b.at_most("h'(1/2) closed form vs exact rational", (h_prime(0.5)? - exact).abs(), 1e-12);
    let fd = central(|t| h(t).unwrap_or(f64::NAN), 0.5, 1e-6);
    b.at_most("h'(1/2) closed form vs finite differences", rel_err(h_prime(0.5)?, fd), 1e-6);

    Ok(b.finish(&stats, &["t"]))
}

/// Default energies below `H(L₁)` for [`verify_cortra`]: `H(L₁) - δ`.
pub const CORTRA_OFFSETS: [f64; 4] = [1e-1, 1e-2, 1e-3, 1e-6];

/// The moon's component of `{U ≤ c}` lies inside the open ball of radius `d`.
///
/// Margin: `U(d, θ) - c` over the boundary circle and the requested offsets.
pub fn verify_cortra(cfg: &SystemConfig, offsets: &[f64], opts: &VerifierOptions) -> Result<LemmaReport> {
    let mu = cfg.mu();
    let d = find_l1_distance(cfg)?;
    let crit = first_critical_value(cfg)?;
    let n = opts.n_1d.max(4);
    let mut b = Builder::new("cortra", Some(mu));
    b.axis("theta", 0.0, TAU * (n - 1) as f64 / n as f64, n);
    b.axis("offset", min_over(offsets.iter().copied()), max_over(offsets.iter().copied()), offsets.len());

    let boundary: Vec<f64> = (0..n).map(|j| u_at(cfg, d, TAU * j as f64 / n as f64)).collect();
    let (amin, umin) = boundary
        .iter()
        .enumerate()
        .fold((usize::MAX, f64::INFINITY), |a, (j, &u)| if u < a.1 { (j, u) } else { a });
    b.at_most("|min_theta U(d, theta) - H(L1)|", (umin - crit).abs(), 1e-10);
    b.at_most("boundary argmin index (0 is theta = 0)", amin as f64, 0.0);

    let mut stats = SweepStats::default();
    for (k, &off) in offsets.iter().enumerate() {
        let c = crit - off;
        for (j, &u) in boundary.iter().enumerate() {
            stats.push(sample(u - c, j, k, [TAU * j as f64 / n as f64, off, 0.0, 0.0]));
        }
    }

    // flood fill on a polar grid with a ring exactly at rho = d
    let m = opts.n_2d.max(8);
    let rings = m + m / 4;
    let mut worst_reach = f64::NEG_INFINITY;
    for &off in offsets {
        let c = crit - off;
        let inside = |i: usize, j: usize| {
            let rho = d * i as f64 / m as f64;
            u_at(cfg, rho, TAU * j as f64 / m as f64) <= c
        };
        let mut seen = vec![false; (rings + 1) * m];
        let mut queue = VecDeque::new();
        for j in 0..m {
            if inside(1, j) {
                seen[m + j] = true;
                queue.push_back((1usize, j));
            }
        }
        let mut reach = 0usize;
        while let Some((i, j)) = queue.pop_front() {
            reach = reach.max(i);
            let mut next = vec![(i, (j + 1) % m), (i, (j + m - 1) % m)];
            if i > 1 {
                next.push((i - 1, j));
            }
            if i < rings {
                next.push((i + 1, j));
            }
            for (a, bb) in next {
                if !seen[a * m + bb] && inside(a, bb) {
                    seen[a * m + bb] = true;
                    queue.push_back((a, bb));
                }
            }
        }
        worst_reach = worst_reach.max(d * reach as f64 / m as f64 - d);
    }
    b.above("flood fill stays inside rho < d (d - max reach)", -worst_reach, 0.0);

    // Cartesian labels where the grid resolves the neck
    let grid = HillGrid {
        half_width: 1.6,
        n: 800,
    };
    let moon = cfg.moon_pos();
    let mut worst_cell = f64::NEG_INFINITY;
    let mut resolved = true;
    for &off in offsets.iter().filter(|&&o| o >= 1e-3) {
        let region = hill_components(crit - off, cfg, grid)?;
        if region.count(CellLabel::Moon) == 0 {
            resolved = false;
            continue;
        }
        for q in region.cells(CellLabel::Moon) {
            worst_cell = worst_cell.max((q - moon).norm() - d);
        }
    }
    b.flag("moon component resolved on the Cartesian grid", resolved);
    b.above("Cartesian moon cells inside the ball (d - max distance)", -worst_cell, 0.0);

    Ok(b.finish(&stats, &["theta", "offset"]))
}

/// Closed-form derivatives of the lunar polar potential and the auxiliary
/// functions against central differences of the functions they differentiate.
///
/// Margin: `1 - (worst relative error) / 1e-6`.
pub fn verify_appendix(cfg: &SystemConfig) -> Result<LemmaReport> {
    let mu = cfg.mu();
    let nu = 1.0 - mu;
    let n = 60;
    let h = 1e-5;
    let tol = 1e-6;
    let mut b = Builder::new("appendix", Some(mu));
    b.axis("rho", 0.05, 0.95, n);
    b.axis("theta", 0.0, TAU * (n - 1) as f64 / n as f64, n);
    let g = |r: f64, t: f64| {
        let c = t.cos();
        (2.0 * r * r - 4.0 * r * c - 1.0 + 3.0 * c * c) / kappa(r, c).powf(2.5)
    };
    let dg = |r: f64, t: f64| {
        let (s, c) = t.sin_cos();
        -3.0 * s / kappa(r, c).powf(3.5) * (r * c * c + 2.0 * (1.0 - r * r) * c + r * (2.0 * r * r - 3.0))
    };
    let mut worst: BTreeMap<&str, f64> = BTreeMap::new();
    let mut stats = SweepStats::default();
    let mut bump = |k: &'static str, e: f64| {
        let w = worst.entry(k).or_insert(0.0);
        *w = w.max(e);
    };
    for (i, r) in linspace(0.05, 0.95, n).enumerate() {
        for j in 0..n {
            let t = TAU * j as f64 / n as f64;
            if kappa(r, t.cos()) < 0.01 {
                continue;
            }
            let p = partials(cfg, r, t);
            let errs = [
                ("dU/drho", rel_err(p.d_rho, central(|x| u_at(cfg, x, t), r, h))),
                ("dU/dtheta", rel_err(p.d_theta, central(|x| u_at(cfg, r, x), t, h))),
                ("d2U/drho2", rel_err(p.d_rho_rho, central(|x| partials(cfg, x, t).d_rho, r, h))),
                ("d2U/drho dtheta", rel_err(p.d_rho_theta, central(|x| partials(cfg, r, x).d_rho, t, h))),
                ("d3U/drho3", rel_err(p.d_rho3, central(|x| partials(cfg, x, t).d_rho_rho, r, h))),
                ("dg/dtheta", rel_err(dg(r, t), central(|x| g(r, x), t, h))),
                ("dW/dtheta", rel_err(w_prime(nu, r, t), central(|x| w_value(mu, r, x.cos()), t, h))),
                ("W = d2U/drho2 + 1", rel_err(p.d_rho_rho + 1.0, w_value(mu, r, t.cos()))),
            ];
            let mut e_max = 0.0f64;
            for (k, e) in errs {
                bump(k, e);
                e_max = e_max.max(e);
            }
            stats.push(sample(1.0 - e_max / tol, i, j, [r, t, e_max, 0.0]));
        }
    }
    // the earth-centred chart of the appendix
    for (i, r) in linspace(-0.6, 0.6, n).enumerate() {
        for (j, s) in linspace(-0.6, 0.6, n).enumerate() {
            if r * r + s * s < 0.01 || (1.0 - r).powi(2) + s * s < 0.01 {
                continue;
            }
            let fr = central(|x| appendix_potential(x, s, mu), r, h);
            let fs = central(|x| appendix_potential(r, x, mu), s, h);
            let e = rel_err(appendix_radial_derivative(r, s, mu), r * fr + s * fs);
            bump("r dU/dr + s dU/ds", e);
            stats.push(sample(1.0 - e / tol, n + i, j, [r, s, e, 1.0]));
        }
    }
    for (k, e) in worst {
        b.at_most(k, e, tol);
    }
    Ok(b.finish(&stats, &["x", "y", "rel_error", "chart"]))
}

/// Every lemma check for one mass ratio, with the exact identities.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationLedger {
    pub mu: f64,
    pub options: VerifierOptions,
    pub lemmas: Vec<LemmaReport>,
    pub identities: Vec<super::poly::IdentityCheck>,
    /// Maximum of `d⁴ - 2d³ - d² + 2d - 1` on `[0, 1]` and where it is attained.
    pub quartic_max: [f64; 2],
    pub all_passed: bool,
}

impl VerificationLedger {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("ledger serialization")
    }

    pub fn first_failure(&self) -> Option<&LemmaReport> {
        self.lemmas.iter().find(|l| !l.passed())
    }
}

/// Names accepted by [`verify_one`].
pub const LEMMA_IDS: [&str; 7] = ["tra1", "tra2", "tra3", "W_final", "h_claim", "cortra", "appendix"];

pub fn verify_one(id: &str, cfg: &SystemConfig, opts: &VerifierOptions) -> Result<LemmaReport> {
    match id {
        "tra1" => verify_tra1(cfg, opts),
        "tra2" => verify_tra2(cfg, opts),
        "tra3" => verify_tra3(cfg, opts),
        "W_final" => verify_w_final(opts),
        "h_claim" => verify_h_claim(opts),
        "cortra" => verify_cortra(cfg, &CORTRA_OFFSETS, opts),
        "appendix" => verify_appendix(cfg),
        other => Err(crate::Error::NotFound(format!("unknown lemma id {other}"))),
    }
}

/// Runs all lemma checks concurrently; the result does not depend on scheduling.
pub fn verify_all(cfg: &SystemConfig, opts: &VerifierOptions) -> Result<VerificationLedger> {
    use rayon::prelude::*;
    let lemmas = LEMMA_IDS
        .par_iter()
        .map(|id| verify_one(id, cfg, opts))
        .collect::<Result<Vec<_>>>()?;
    let identities = super::poly::polynomial_identities();
    let (qmax, qat) = super::poly::shifted_quartic_max(opts.n_1d);
    let ids_ok = identities
        .iter()
        .all(|c| c.holds || super::poly::DISPLAY_ONLY.contains(&c.id.as_str()));
    let all_passed = lemmas.iter().all(LemmaReport::passed) && ids_ok && qmax < 0.0;
    Ok(VerificationLedger {
        mu: cfg.mu(),
        options: *opts,
        lemmas,
        identities,
        quartic_max: [qmax, qat],
        all_passed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityRow {
    pub lemma: String,
    pub margin: f64,
    pub refined_margin: f64,
    pub relative_change: f64,
}

/// Worst margins on the given grids and on grids refined by `factor`.
pub fn refinement_stability(cfg: &SystemConfig, opts: &VerifierOptions, factor: usize) -> Result<Vec<StabilityRow>> {
    use rayon::prelude::*;
    let fine = opts.refined(factor);
    LEMMA_IDS
        .par_iter()
        .filter(|id| **id != "appendix")
        .map(|id| {
            let a = verify_one(id, cfg, opts)?.min_margin;
            let b = verify_one(id, cfg, &fine)?.min_margin;
            Ok(StabilityRow {
                lemma: id.to_string(),
                margin: a,
                refined_margin: b,
                relative_change: (a - b).abs() / a.abs(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(mu: f64) -> SystemConfig {
        SystemConfig::new(mu).unwrap()
    }

    fn assert_pass(r: &LemmaReport) {
        assert!(r.passed(), "{}", serde_json::to_string_pretty(r).unwrap());
        assert!(r.min_margin > 0.0);
    }

    #[test]
    fn tra1_passes() {
        for mu in [0.1, 0.3, 0.5] {
            assert_pass(&verify_tra1(&cfg(mu), &VerifierOptions::default()).unwrap());
        }
    }

    #[test]
    fn tra2_and_tra3_pass() {
        for mu in [0.1, 0.3, 0.5] {
            assert_pass(&verify_tra2(&cfg(mu), &VerifierOptions::default()).unwrap());
            assert_pass(&verify_tra3(&cfg(mu), &VerifierOptions::default()).unwrap());
        }
    }

    #[test]
    fn w_final_and_h_claim_pass() {
        let o = VerifierOptions::default();
        let w = verify_w_final(&o).unwrap();
        assert_pass(&w);
        assert_eq!(w.samples, 10_000);
        assert_pass(&verify_h_claim(&o).unwrap());
    }

    #[test]
    fn w_final_at_half() {
        assert_eq!(mu_from_d(0.5).unwrap(), 0.5);
        let direct = w_final_direct(0.5);
        assert!(direct < 0.0);
        assert!((w_final_display(0.5) - direct).abs() < 1e-12);
        // the same value from the lunar polar second derivative at mu = 1/2
        let c = w_maximizer_cos(0.5);
        let p = partials(&cfg(0.5), 0.5, c.acos());
        assert!((p.d_rho_rho + 1.0 - direct).abs() < 1e-12);
    }

    #[test]
    fn cortra_passes_including_tight_case() {
        for mu in [0.1, 0.5] {
            let r = verify_cortra(&cfg(mu), &CORTRA_OFFSETS, &VerifierOptions::default()).unwrap();
            assert_pass(&r);
            assert!((r.min_margin - 1e-6).abs() < 1e-9);
        }
    }

    #[test]
    fn appendix_derivatives_match() {
        assert_pass(&verify_appendix(&cfg(0.3)).unwrap());
    }

    #[test]
    fn ledger_is_deterministic_and_passes() {
        let o = VerifierOptions::default();
        let a = verify_all(&cfg(0.3), &o).unwrap();
        assert!(a.all_passed);
        let b = crate::parallel::with_workers(Some(2), || verify_all(&cfg(0.3), &o)).unwrap().unwrap();
        assert_eq!(a.to_json(), b.to_json());
    }

    #[test]
    fn maximizer_formula_solves_the_quadratic() {
        for r in [0.1, 0.4, 0.7, 0.95] {
            let c = w_maximizer_cos(r);
            let q = r * c * c + 2.0 * (1.0 - r * r) * c + r * (2.0 * r * r - 3.0);
            assert!(q.abs() < 1e-13 && c.abs() <= 1.0, "{r}: {q}");
        }
    }
}
