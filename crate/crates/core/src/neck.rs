//! The connected-sum neck at `L1`: Conley's quadratic model, the Weinstein
//! field `Y_{a,b}`, and the cut-off interpolation between `Y` and the radial
//! fields centred at the primaries.
//!
//! Local coordinates are `z = (Q1, Q2, P1, P2) = (q1 - ℓ1, -q2, p1, ℓ1 - p2)`
//! with `ℓ1` the abscissa of `L1`. The reflection of `(q2, p2)` keeps
//! `ω = dP∧dQ` and is what makes the quadratic part of `H` equal the usual
//! matrix `½[[-2ρ,0,0,1],[0,ρ,-1,0],[0,-1,1,0],[1,0,0,1]]`.

use std::f64::consts::TAU;
use std::time::Instant;

use nalgebra::{Matrix2, Matrix4, SymmetricEigen, Vector2, Vector4};
use serde::{Deserialize, Serialize};

use crate::equilibria::{hill_components, CellLabel, HillGrid};
use crate::equilibria::{find_lagrange_points, rho_hessian};
use crate::error::{Error, Result};
use crate::model::{effective_potential, hamiltonian, hamiltonian_gradient, potential_gradient, PhasePoint, Primary, SystemConfig};
use crate::parallel::{par_sweep, Sample};
use crate::report::{params, Axis, CertificationReport, GridSpec, Verdict};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConleyFrame {
    pub mu: f64,
    /// Abscissa of `L1`.
    pub l1: f64,
    pub rho_h: f64,
    pub critical_value: f64,
    pub qtilde: Matrix2<f64>,
    /// Quadratic part of `H` in local coordinates, `H ≈ H(L1) + zᵀ Q z`.
    pub qform: Matrix4<f64>,
    /// Max deviation of the finite-difference Hessian of `H` from `2 Q`.
    pub hessian_defect: f64,
}

pub fn qform_matrix(rho: f64) -> Matrix4<f64> {
    Matrix4::new(
        -2.0 * rho, 0.0, 0.0, 1.0,
        0.0, rho, -1.0, 0.0,
        0.0, -1.0, 1.0, 0.0,
        1.0, 0.0, 0.0, 1.0,
    ) * 0.5
}

pub fn conley_frame(cfg: &SystemConfig) -> Result<ConleyFrame> {
    let l = *find_lagrange_points(cfg)?.get(1);
    let rho_h = rho_hessian(&l.position, cfg)?;
    let mut frame = ConleyFrame {
        mu: cfg.mu(),
        l1: l.position[0],
        rho_h,
        critical_value: l.value,
        qtilde: Matrix2::new(-2.0 * rho_h, 0.0, 0.0, rho_h) * 0.5,
        qform: qform_matrix(rho_h),
        hessian_defect: 0.0,
    };
    // central differences of the analytic gradient
    let h = 1e-5;
    let mut defect = 0.0f64;
    for j in 0..4 {
        let e = Vector4::ith(j, h);
        let col = (frame.gradient_local(&e, cfg)? - frame.gradient_local(&-e, cfg)?) / (2.0 * h);
        for i in 0..4 {
            defect = defect.max((col[i] - 2.0 * frame.qform[(i, j)]).abs());
        }
    }
    frame.hessian_defect = defect;
    Ok(frame)
}

/// Which primary the radial field `X0` is centred on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Earth,
    Moon,
}

impl Side {
    pub fn primary(self) -> Primary {
        match self {
            Side::Earth => Primary::Earth,
            Side::Moon => Primary::Moon,
        }
    }
}

impl ConleyFrame {
    pub fn to_local(&self, x: &PhasePoint) -> Vector4<f64> {
        Vector4::new(x.q[0] - self.l1, -x.q[1], x.p[0], self.l1 - x.p[1])
    }

    pub fn from_local(&self, z: &Vector4<f64>) -> PhasePoint {
        PhasePoint::new(z[0] + self.l1, -z[1], z[2], self.l1 - z[3])
    }

    pub fn hamiltonian_local(&self, z: &Vector4<f64>, cfg: &SystemConfig) -> Result<f64> {
        hamiltonian(&self.from_local(z), cfg)
    }

    /// `dH` in local coordinates.
    pub fn gradient_local(&self, z: &Vector4<f64>, cfg: &SystemConfig) -> Result<Vector4<f64>> {
        let g = hamiltonian_gradient(&self.from_local(z), cfg)?;
        Ok(Vector4::new(g[0], -g[1], g[2], -g[3]))
    }

    pub fn quadratic(&self, z: &Vector4<f64>) -> f64 {
        z.dot(&(self.qform * z))
    }

    /// `R = H - H(L1) - zᵀQz`, evaluated rather than expanded.
    pub fn rest(&self, z: &Vector4<f64>, cfg: &SystemConfig) -> Result<f64> {
        Ok(self.hamiltonian_local(z, cfg)? - self.critical_value - self.quadratic(z))
    }

    /// The cut-off variable `w = Q1 - P2/ρ_h`.
    pub fn w(&self, z: &Vector4<f64>) -> f64 {
        z[0] - z[3] / self.rho_h
    }

    /// `q1^L - q1^P`: the constant term of `X0` and of `G`. Negative on the earth side.
    pub fn coefficient(&self, side: Side) -> f64 {
        match side {
            Side::Earth => self.l1 - self.mu,
            Side::Moon => self.l1 + 1.0 - self.mu,
        }
    }

    /// `μ/|q - q⁰|³ + (1-μ)/|q - q¹|³` at an arbitrary position.
    pub fn kappa(&self, q: &Vector2<f64>, cfg: &SystemConfig) -> f64 {
        let r0 = (q - cfg.moon_pos()).norm();
        let r1 = (q - cfg.earth_pos()).norm();
        cfg.mu() / r0.powi(3) + (1.0 - cfg.mu()) / r1.powi(3)
    }
}

/// `Y_{a,b} = (a Q1, b Q2, (1-a) P1, (1-b) P2)`.
pub fn weinstein_y(z: &Vector4<f64>, a: f64, b: f64) -> Vector4<f64> {
    Vector4::new(a * z[0], b * z[1], (1.0 - a) * z[2], (1.0 - b) * z[3])
}

/// `ω(u, v) = uᵀ Ω v` for `ω = dP∧dQ` in the ordering `(Q1, Q2, P1, P2)`.
fn omega() -> Matrix4<f64> {
    let mut o = Matrix4::zeros();
    for i in 0..2 {
        o[(i + 2, i)] = 1.0;
        o[(i, i + 2)] = -1.0;
    }
    o
}

/// `max |L_Y ω - ω|` for the linear field `Y_{a,b}`, i.e. of `AᵀΩ + ΩA - Ω`.
pub fn weinstein_liouville_defect(a: f64, b: f64) -> f64 {
    let m = Matrix4::from_diagonal(&Vector4::new(a, b, 1.0 - a, 1.0 - b));
    let o = omega();
    (m.transpose() * o + o * m - o).abs().max()
}

/// Eigenvalues (ascending) of the symmetric matrix of `z ↦ dQ(Y_{a,b})(z)`.
pub fn yq_definiteness(a: f64, b: f64, rho_h: f64) -> [f64; 4] {
    let q = qform_matrix(rho_h);
    let d = Matrix4::from_diagonal(&Vector4::new(a, b, 1.0 - a, 1.0 - b));
    let s = q * d + d * q;
    let mut ev: Vec<f64> = SymmetricEigen::new(s).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    [ev[0], ev[1], ev[2], ev[3]]
}

/// `G = (1-a) Q1 P1 + c P1 + (1-b) P2 Q2` with `c = q1^L - q1^P`.
pub fn primitive_g(z: &Vector4<f64>, a: f64, b: f64, frame: &ConleyFrame, side: Side) -> f64 {
    (1.0 - a) * z[0] * z[2] + frame.coefficient(side) * z[2] + (1.0 - b) * z[3] * z[1]
}

/// `dG` as `(∂Q1, ∂Q2, ∂P1, ∂P2)`.
pub fn primitive_g_differential(z: &Vector4<f64>, a: f64, b: f64, frame: &ConleyFrame, side: Side) -> Vector4<f64> {
    Vector4::new(
        (1.0 - a) * z[2],
        (1.0 - b) * z[3],
        (1.0 - a) * z[0] + frame.coefficient(side),
        (1.0 - b) * z[1],
    )
}

/// `α0 = i_{X0} ω` for `X0 = (q - q^P)∂q`.
pub fn alpha0(z: &Vector4<f64>, frame: &ConleyFrame, side: Side) -> Vector4<f64> {
    Vector4::new(0.0, 0.0, -(z[0] + frame.coefficient(side)), -z[1])
}

/// `α1 = i_Y ω`.
pub fn alpha1(z: &Vector4<f64>, a: f64, b: f64) -> Vector4<f64> {
    Vector4::new((1.0 - a) * z[2], (1.0 - b) * z[3], -a * z[0], -b * z[1])
}

/// The field `X` with `i_X ω = α`.
pub fn field_of_form(alpha: &Vector4<f64>) -> Vector4<f64> {
    Vector4::new(-alpha[2], -alpha[3], alpha[0], alpha[1])
}

/// The field `X_F` with `i_{X_F} ω = dF`.
pub fn hamiltonian_field(d: &Vector4<f64>) -> Vector4<f64> {
    field_of_form(d)
}

/// `X0 = (q - q^P)∂q` in local coordinates.
pub fn radial_field(z: &Vector4<f64>, frame: &ConleyFrame, side: Side) -> Vector4<f64> {
    Vector4::new(z[0] + frame.coefficient(side), z[1], 0.0, 0.0)
}

fn smoothstep(t: f64) -> (f64, f64) {
    if t <= 0.0 {
        (0.0, 0.0)
    } else if t >= 1.0 {
        (1.0, 0.0)
    } else {
        (t * t * t * (10.0 - 15.0 * t + 6.0 * t * t), 30.0 * t * t * (1.0 - t) * (1.0 - t))
    }
}

/// Even profile equal to 1 on `|w| <= eps1` and 0 on `|w| >= eps2`, quintic in between.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutoffProfile {
    pub eps1: f64,
    pub eps2: f64,
}

impl Default for CutoffProfile {
    fn default() -> Self {
        Self { eps1: 0.01, eps2: 0.05 }
    }
}

impl CutoffProfile {
    pub fn new(eps1: f64, eps2: f64) -> Result<Self> {
        if !(eps1 > 0.0 && eps2 > eps1) {
            return Err(Error::Domain {
                what: "cut-off radii",
                value: eps1,
                domain: "0 < eps1 < eps2",
            });
        }
        Ok(Self { eps1, eps2 })
    }

    /// `(f(w), f'(w))`.
    pub fn eval(&self, w: f64) -> (f64, f64) {
        let width = self.eps2 - self.eps1;
        let (s, ds) = smoothstep((w.abs() - self.eps1) / width);
        (1.0 - s, -ds / width * w.signum())
    }

    pub fn value(&self, w: f64) -> f64 {
        self.eval(w).0
    }

    pub fn derivative(&self, w: f64) -> f64 {
        self.eval(w).1
    }
}

/// Everything needed to evaluate the interpolated Liouville field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeckField {
    pub a: f64,
    pub b: f64,
    pub cutoff: CutoffProfile,
    /// Position cut-off in `|(Q1, Q2)|`: 1 inside `r_inner`, 0 outside `r_outer`.
    pub localization: CutoffProfile,
}

impl NeckField {
    /// Defaults scaled to the distance from `L1` to the nearer primary.
    pub fn for_frame(frame: &ConleyFrame) -> Self {
        let m = frame.coefficient(Side::Moon).min(-frame.coefficient(Side::Earth));
        Self {
            a: -1.0,
            b: 0.5,
            cutoff: CutoffProfile { eps1: 0.02 * m, eps2: 0.06 * m },
            localization: CutoffProfile { eps1: 0.2 * m, eps2: 0.3 * m },
        }
    }

    /// Earth side for `w > 0` near `L1`, and for `Q1 > 0` away from it.
    pub fn side(&self, frame: &ConleyFrame, z: &Vector4<f64>) -> Side {
        let r = z[0].hypot(z[1]);
        let s = if r < self.localization.eps2 { frame.w(z) } else { z[0] };
        if s >= 0.0 {
            Side::Earth
        } else {
            Side::Moon
        }
    }

    /// `χ = f(w) g(|Q|)` and `dχ`.
    pub fn chi(&self, frame: &ConleyFrame, z: &Vector4<f64>) -> (f64, Vector4<f64>) {
        let (f, df) = self.cutoff.eval(frame.w(z));
        let r = z[0].hypot(z[1]);
        let (g, dg) = self.localization.eval(r);
        let (gx, gy) = if r > 0.0 { (dg * z[0] / r, dg * z[1] / r) } else { (0.0, 0.0) };
        (
            f * g,
            Vector4::new(df * g + f * gx, f * gy, 0.0, -df * g / frame.rho_h),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NeckEvaluation {
    pub side: Side,
    pub chi: f64,
    /// `X = X0 + X_{χG}` in local coordinates.
    pub field: Vector4<f64>,
    pub x_of_h: f64,
    pub x0_of_h: f64,
    /// `dH(X0 + X_G) = dH(Y)`.
    pub y_of_h: f64,
    pub g: f64,
    pub dh_xchi: f64,
    /// `(1-χ) dH(X0) + χ dH(Y) + G dH(X_χ)`.
    pub decomposition: f64,
}

pub fn interpolated_field(
    z: &Vector4<f64>,
    field: &NeckField,
    frame: &ConleyFrame,
    cfg: &SystemConfig,
) -> Result<NeckEvaluation> {
    let side = field.side(frame, z);
    let dh = frame.gradient_local(z, cfg)?;
    let x0 = radial_field(z, frame, side);
    let g = primitive_g(z, field.a, field.b, frame, side);
    let xg = hamiltonian_field(&primitive_g_differential(z, field.a, field.b, frame, side));
    let (chi, dchi) = field.chi(frame, z);
    let xchi = hamiltonian_field(&dchi);
    let x = x0 + xg * chi + xchi * g;
    let (x0h, yh, dxc) = (dh.dot(&x0), dh.dot(&(x0 + xg)), dh.dot(&xchi));
    Ok(NeckEvaluation {
        side,
        chi,
        field: x,
        x_of_h: dh.dot(&x),
        x0_of_h: x0h,
        y_of_h: yh,
        g,
        dh_xchi: dxc,
        decomposition: (1.0 - chi) * x0h + chi * yh + g * dxc,
    })
}

/// `f'((1 - 1/ρ) P1 + (Q2/ρ)(μ/|q-q⁰|³ + (1-μ)/|q-q¹|³ - ρ))`.
pub fn dh_xf_closed_form(
    z: &Vector4<f64>,
    cutoff: &CutoffProfile,
    frame: &ConleyFrame,
    cfg: &SystemConfig,
) -> f64 {
    let rho = frame.rho_h;
    let q = frame.from_local(z).q;
    cutoff.derivative(frame.w(z))
        * ((1.0 - 1.0 / rho) * z[2] + z[1] / rho * (frame.kappa(&q, cfg) - rho))
}

/// `dH(X_f)` from components, `X_f = f'(∂P1 + ρ⁻¹∂Q2)`.
pub fn dh_xf(z: &Vector4<f64>, cutoff: &CutoffProfile, frame: &ConleyFrame, cfg: &SystemConfig) -> Result<f64> {
    let df = cutoff.derivative(frame.w(z));
    let xf = hamiltonian_field(&Vector4::new(df, 0.0, 0.0, -df / frame.rho_h));
    Ok(frame.gradient_local(z, cfg)?.dot(&xf))
}

/// `(P1 - Q2)² + (ρQ1 - (ρ+1)δ)² + (ρ-1)Q2² - (2ρ+1)δ²`.
pub fn neck_sphere_residual(delta: f64, rho: f64, z: &Vector4<f64>) -> f64 {
    (z[2] - z[1]).powi(2) + (rho * z[0] - (rho + 1.0) * delta).powi(2) + (rho - 1.0) * z[1] * z[1]
        - (2.0 * rho + 1.0) * delta * delta
}

/// A point of `{w = δ} ∩ {zᵀQz = 0}` at sphere angles `(α, β)`.
pub fn neck_sphere_point(delta: f64, rho: f64, alpha: f64, beta: f64) -> Result<Vector4<f64>> {
    if rho <= 1.0 {
        return Err(Error::Domain {
            what: "neck sphere",
            value: rho,
            domain: "rho > 1",
        });
    }
    let r = (2.0 * rho + 1.0).sqrt() * delta.abs();
    let (sa, ca) = alpha.sin_cos();
    let (sb, cb) = beta.sin_cos();
    let q2 = r * sa * sb / (rho - 1.0).sqrt();
    let p1 = r * sa * cb + q2;
    let q1 = (r * ca + (rho + 1.0) * delta) / rho;
    Ok(Vector4::new(q1, q2, p1, rho * (q1 - delta)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeckOptions {
    /// Overrides the frame-scaled field when set.
    pub field: Option<NeckField>,
    /// Cartesian grid for the part of the Hill region away from `L1`.
    pub far_grid: HillGrid,
    /// Points per side of the local grid covering `|Q| < r_outer`.
    pub ball_n: usize,
    /// Momenta per fiber circle in the local grid.
    pub ball_momenta: usize,
    pub margin_tolerance: f64,
}

impl Default for NeckOptions {
    fn default() -> Self {
        Self {
            field: None,
            far_grid: HillGrid {
                half_width: 1.6,
                n: 800,
            },
            ball_n: 160,
            ball_momenta: 48,
            margin_tolerance: crate::report::DEFAULT_MARGIN_TOLERANCE,
        }
    }
}

pub const DEFAULT_EPSILON_LADDER: [f64; 7] = [1e-4, 3e-4, 1e-3, 3e-3, 1e-2, 3e-2, 1e-1];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpsilonRow {
    pub epsilon: f64,
    pub energy: f64,
    pub verdict: Verdict,
    pub min_margin: f64,
    pub far_min_margin: f64,
    pub ball_min_margin: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NeckCertification {
    pub mu: f64,
    pub rho_h: f64,
    pub field: NeckField,
    pub table: Vec<EpsilonRow>,
    pub largest_certified: Option<f64>,
    /// Report at the largest certified `ε`, or at the last candidate tried.
    pub report: CertificationReport,
}

/// Certifies `dH(X) > 0` on the bounded component of `{H = H(L1) + ε}` for
/// each candidate `ε`.
///
/// Away from `L1` (`|Q| >= r_outer`) the field is `X0` and the fiberwise
/// sufficient margin `U_r - sqrt(2(E - U))` about the side's primary is
/// checked on a Cartesian grid. Inside the ball the full `dH(X)` of the
/// interpolated field is sampled on momentum circles.
pub fn certify_above_critical(
    cfg: &SystemConfig,
    eps_candidates: &[f64],
    opts: &NeckOptions,
) -> Result<NeckCertification> {
    if !(cfg.mu() > 0.0 && cfg.mu() < 1.0) {
        return Err(Error::DegenerateMass(cfg.mu()));
    }
    let frame = conley_frame(cfg)?;
    let field = opts.field.unwrap_or_else(|| NeckField::for_frame(&frame));
    let mut table = Vec::new();
    let mut best: Option<(f64, CertificationReport)> = None;
    let mut last = None;
    for &eps in eps_candidates {
        let report = certify_level(cfg, &frame, &field, frame.critical_value + eps, opts)?;
        table.push(EpsilonRow {
            epsilon: eps,
            energy: frame.critical_value + eps,
            verdict: report.verdict,
            min_margin: report.min_margin,
            far_min_margin: report.parameters["far_min_margin"],
            ball_min_margin: report.parameters["ball_min_margin"],
            samples: report.samples,
        });
        if report.verdict == Verdict::Certified && best.as_ref().is_none_or(|(e, _)| eps > *e) {
            best = Some((eps, report.clone()));
        }
        last = Some(report);
    }
    let largest_certified = best.as_ref().map(|(e, _)| *e);
    let mut report = match best {
        Some((_, r)) => r,
        None => last.ok_or_else(|| Error::NotFound("no epsilon candidates".into()))?,
    };
    if largest_certified.is_none() {
        report.verdict = report.verdict.and(Verdict::Inconclusive);
        report
            .diagnostics
            .push("no candidate epsilon certified".to_string());
    }
    Ok(NeckCertification {
        mu: cfg.mu(),
        rho_h: frame.rho_h,
        field,
        table,
        largest_certified,
        report,
    })
}

/// `(q - c)·∇U/|q - c| - sqrt(2(E - U))` about the primary `c` of `side`;
/// positive values make `X0` transverse on the whole fiber over `q`.
pub fn far_margin(q: &Vector2<f64>, energy: f64, side: Side, cfg: &SystemConfig) -> Result<f64> {
    let rel = q - cfg.position(side.primary());
    let u = effective_potential(q, cfg)?;
    let gu = potential_gradient(q, cfg)?;
    Ok(rel.dot(&gu) / rel.norm() - (2.0 * (energy - u).max(0.0)).sqrt())
}

/// One energy level, which may lie on either side of `H(L1)`.
pub fn certify_level(
    cfg: &SystemConfig,
    frame: &ConleyFrame,
    field: &NeckField,
    energy: f64,
    opts: &NeckOptions,
) -> Result<CertificationReport> {
    let start = Instant::now();
    let r_out = field.localization.eps2;
    let lpos = Vector2::new(frame.l1, 0.0);
    let region = hill_components(energy, cfg, opts.far_grid)?;
    let grid = opts.far_grid;
    let n = grid.n;
    let thr = 1e-6;

    // far region: fiberwise sufficient margin about the side's primary
    let far_errors = std::sync::Mutex::new(0usize);
    let seam = std::sync::atomic::AtomicUsize::new(0);
    let far = par_sweep(n, |i, s| {
        for j in 0..n {
            if !matches!(region.label(i, j), CellLabel::Moon | CellLabel::Earth | CellLabel::Merged) {
                continue;
            }
            let q = grid.center(i, j);
            if (q - lpos).norm() < r_out {
                continue;
            }
            if (q[0] - frame.l1).abs() < grid.step() {
                seam.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
            }
            let side = if q[0] >= frame.l1 { Side::Earth } else { Side::Moon };
            if (q - cfg.position(side.primary())).norm() < thr {
                continue;
            }
            let margin = far_margin(&q, energy, side, cfg);
            match margin {
                Ok(m) => s.push(Sample {
                    value: m,
                    index: [0, i, j],
                    location: [q[0], q[1], 0.0, 0.0],
                }),
                Err(_) => *far_errors.lock().unwrap() += 1,
            }
        }
    });

    // ball: full dH(X) over momentum circles
    let nb = opts.ball_n.max(2);
    let nm = opts.ball_momenta.max(1);
    let hb = 2.0 * r_out / nb as f64;
    let mismatched = std::sync::atomic::AtomicUsize::new(0);
    let decomposition_defect = std::sync::Mutex::new(0.0f64);
    let ball_errors = std::sync::Mutex::new(0usize);
    let ball = par_sweep(nb, |i, s| {
        for j in 0..nb {
            let (x, y) = (-r_out + (i as f64 + 0.5) * hb, -r_out + (j as f64 + 0.5) * hb);
            if x.hypot(y) >= r_out {
                continue;
            }
            let q = Vector2::new(frame.l1 + x, -y);
            let Ok(u) = effective_potential(&q, cfg) else {
                *ball_errors.lock().unwrap() += 1;
                continue;
            };
            if u > energy {
                continue;
            }
            let v = (2.0 * (energy - u)).sqrt();
            for k in 0..nm {
                let phi = TAU * k as f64 / nm as f64;
                let vel = Vector2::new(v * phi.cos(), v * phi.sin());
                let x4 = PhasePoint {
                    q,
                    p: Vector2::new(vel[0] - q[1], vel[1] + q[0]),
                };
                let z = frame.to_local(&x4);
                match interpolated_field(&z, field, frame, cfg) {
                    Ok(e) => {
                        if field.localization.value(x.hypot(y)) < 1.0 && e.chi > 0.0 {
                            mismatched.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                        }
                        let mut d = decomposition_defect.lock().unwrap();
                        *d = d.max((e.x_of_h - e.decomposition).abs());
                        s.push(Sample {
                            value: e.x_of_h,
                            index: [1, i, j * nm + k],
                            location: [q[0], q[1], x4.p[0], x4.p[1]],
                        });
                    }
                    Err(_) => *ball_errors.lock().unwrap() += 1,
                }
            }
        }
    });

    let bounded = [CellLabel::Moon, CellLabel::Earth, CellLabel::Merged]
        .iter()
        .map(|l| region.count(*l))
        .sum::<usize>();
    let stats = far.merge(ball);
    let mut report = CertificationReport::from_stats(
        "dH(X) for the interpolated Liouville field (far: per unit radius, fiberwise bound)",
        params(&[
            ("mu", cfg.mu()),
            ("energy", energy),
            ("critical_value", frame.critical_value),
            ("rho_h", frame.rho_h),
            ("a", field.a),
            ("b", field.b),
            ("eps1", field.cutoff.eps1),
            ("eps2", field.cutoff.eps2),
            ("r_inner", field.localization.eps1),
            ("r_outer", field.localization.eps2),
            ("far_min_margin", far.min_value()),
            ("ball_min_margin", ball.min_value()),
            ("far_samples", far.count as f64),
            ("ball_samples", ball.count as f64),
        ]),
        GridSpec {
            axes: vec![
                Axis::new("q1", -grid.half_width, grid.half_width, n),
                Axis::new("q2", -grid.half_width, grid.half_width, n),
                Axis::new("ball_Q1", -r_out, r_out, nb),
                Axis::new("ball_Q2", -r_out, r_out, nb),
                Axis::new("ball_phi", 0.0, TAU, nm),
            ],
            refinement_rings: 0,
            note: Some("far Cartesian grid outside |q - L1| < r_outer plus a local grid with momentum circles inside".into()),
        },
        &stats,
        &["q1", "q2", "p1", "p2"],
        opts.margin_tolerance,
    );
    if bounded == 0 {
        report.verdict = report.verdict.and(Verdict::Inconclusive);
        report
            .diagnostics
            .push("no bounded component around the primaries on the far grid".to_string());
    }
    let mismatched = mismatched.into_inner();
    if mismatched > 0 {
        report.verdict = report.verdict.and(Verdict::Inconclusive);
        report.diagnostics.push(format!(
            "{mismatched} level points see the position cut-off; the field may depend on the side rule there"
        ));
    }
    let seam = seam.into_inner();
    if seam > 0 {
        report.verdict = report.verdict.and(Verdict::Inconclusive);
        report
            .diagnostics
            .push(format!("{seam} far cells lie on the side seam q1 = l1"));
    }
    let errors = far_errors.into_inner().unwrap() + ball_errors.into_inner().unwrap();
    if errors > 0 {
        report.verdict = report.verdict.and(Verdict::Inconclusive);
        report.diagnostics.push(format!("{errors} evaluation failures"));
    }
    let defect = decomposition_defect.into_inner().unwrap();
    report
        .parameters
        .insert("decomposition_defect".into(), defect);
    report.wall_clock_seconds = Some(start.elapsed().as_secs_f64());
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup(mu: f64) -> (SystemConfig, ConleyFrame) {
        let cfg = SystemConfig::new(mu).unwrap();
        let f = conley_frame(&cfg).unwrap();
        (cfg, f)
    }

    fn random_z(rng: &mut ChaCha8Rng, r: f64) -> Vector4<f64> {
        Vector4::from_fn(|_, _| rng.random_range(-r..r))
    }

    #[test]
    fn frame_at_equal_masses() {
        let (_, f) = setup(0.5);
        assert!((f.rho_h - 8.0).abs() < 1e-12);
        assert!((f.qtilde[(0, 0)] + 8.0).abs() < 1e-12 && (f.qtilde[(1, 1)] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn hessian_matches_qform() {
        for mu in [0.1, 0.3, 0.5, 0.9] {
            let (_, f) = setup(mu);
            assert!(f.hessian_defect < 1e-6, "{mu}: {}", f.hessian_defect);
            assert!(f.rho_h >= 4.0);
        }
    }

    #[test]
    fn qform_is_a_saddle_centre() {
        let (_, f) = setup(0.3);
        let ev = SymmetricEigen::new(f.qform).eigenvalues;
        assert_eq!(ev.iter().filter(|e| **e < 0.0).count(), 1);
    }

    #[test]
    fn rest_term_is_cubic() {
        let (cfg, f) = setup(0.3);
        let z = Vector4::new(0.3, -0.2, 0.5, 0.1);
        let r1 = f.rest(&(z * 1e-2), &cfg).unwrap().abs();
        let r2 = f.rest(&(z * 5e-3), &cfg).unwrap().abs();
        assert!((r1 / r2 - 8.0).abs() < 0.2, "{}", r1 / r2);
    }

    #[test]
    fn local_coordinates_round_trip() {
        let (_, f) = setup(0.2);
        let x = PhasePoint::new(0.1, -0.3, 0.7, 0.2);
        let y = f.from_local(&f.to_local(&x));
        assert!((x.to_vector() - y.to_vector()).norm() < 1e-15);
        let l = f.from_local(&Vector4::zeros());
        assert!((l.p[1] - f.l1).abs() < 1e-15 && l.p[0] == 0.0);
    }

    #[test]
    fn weinstein_field_basics() {
        for (a, b) in [(-1.0, 0.5), (0.5, 0.5), (2.0, -3.0)] {
            assert!(weinstein_liouville_defect(a, b) < 1e-12);
        }
        let z = Vector4::new(1.0, 2.0, 3.0, 4.0);
        assert_eq!(weinstein_y(&z, 0.5, 0.5), z * 0.5);
        assert_eq!(weinstein_y(&Vector4::zeros(), -1.0, 0.5), Vector4::zeros());
    }

    #[test]
    fn liouville_defect_by_finite_differences() {
        // L_Y ω = d(i_Y ω); for a linear one-form α = Bz, dα has matrix Bᵀ - B
        let (a, b) = (-1.0, 0.5);
        let h = 1e-6;
        let mut jac = Matrix4::zeros();
        let z0 = Vector4::new(0.2, -0.1, 0.3, 0.4);
        for j in 0..4 {
            let e = Vector4::ith(j, h);
            let d = (alpha1(&(z0 + e), a, b) - alpha1(&(z0 - e), a, b)) / (2.0 * h);
            jac.set_column(j, &d);
        }
        // dα(u, v) = uᵀ(Jᵀ - J)v must equal ω(u, v)
        let d_alpha = jac.transpose() - jac;
        assert!((d_alpha - omega()).abs().max() < 1e-7);
    }

    #[test]
    fn yq_positive_for_default_parameters() {
        let mut prev: Option<[f64; 4]> = None;
        for i in 0..=960 {
            let rho = 4.0 + 0.1 * i as f64;
            let ev = yq_definiteness(-1.0, 0.5, rho);
            assert!(ev[0] > 0.0, "rho {rho}: {ev:?}");
            if let Some(p) = prev {
                assert!((p[0] - ev[0]).abs() < 0.1);
            }
            prev = Some(ev);
        }
        let ev = yq_definiteness(0.5, 0.5, 8.0);
        assert!(ev[0] < 0.0);
    }

    #[test]
    fn g_is_a_primitive() {
        let (_, f) = setup(0.3);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = 1e-6;
        for side in [Side::Earth, Side::Moon] {
            for _ in 0..100 {
                let z = random_z(&mut rng, 0.2);
                let fd = Vector4::from_fn(|i, _| {
                    let e = Vector4::ith(i, h);
                    (primitive_g(&(z + e), -1.0, 0.5, &f, side) - primitive_g(&(z - e), -1.0, 0.5, &f, side)) / (2.0 * h)
                });
                let target = alpha1(&z, -1.0, 0.5) - alpha0(&z, &f, side);
                assert!((fd - target).norm() < 1e-7);
                let x1 = field_of_form(&alpha1(&z, -1.0, 0.5));
                let x0 = field_of_form(&alpha0(&z, &f, side));
                let xg = hamiltonian_field(&primitive_g_differential(&z, -1.0, 0.5, &f, side));
                assert!((x1 - x0 - xg).norm() < 1e-10);
                assert!((x1 - weinstein_y(&z, -1.0, 0.5)).norm() < 1e-15);
                assert!((x0 - radial_field(&z, &f, side)).norm() < 1e-15);
            }
        }
        assert!(f.coefficient(Side::Earth) < 0.0 && f.coefficient(Side::Moon) > 0.0);
    }

    #[test]
    fn cutoff_profile_shape() {
        let c = CutoffProfile::default();
        assert_eq!(c.value(0.0), 1.0);
        assert_eq!(c.value(0.01), 1.0);
        assert_eq!(c.value(0.05), 0.0);
        assert_eq!(c.value(1.0), 0.0);
        for i in 0..1000 {
            let w = 0.06 * i as f64 / 1000.0;
            let (f, df) = c.eval(w);
            assert!((0.0..=1.0).contains(&f) && df <= 0.0);
            assert_eq!(c.value(-w), f);
            let h = 1e-7;
            if w > h {
                let fd = (c.value(w + h) - c.value(w - h)) / (2.0 * h);
                assert!((fd - df).abs() < 1e-4);
            }
        }
        assert!(CutoffProfile::new(0.05, 0.01).is_err());
    }

    #[test]
    fn interpolation_limits_and_decomposition() {
        let (cfg, f) = setup(0.3);
        let field = NeckField::for_frame(&f);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut inner = 0;
        let mut outer = 0;
        for _ in 0..1000 {
            let z = random_z(&mut rng, 0.1);
            let e = interpolated_field(&z, &field, &f, &cfg).unwrap();
            assert!((e.x_of_h - e.decomposition).abs() < 1e-10);
            if e.chi == 0.0 {
                outer += 1;
                assert!((e.field - radial_field(&z, &f, e.side)).norm() < 1e-12);
            }
            if e.chi == 1.0 && f.w(&z).abs() <= field.cutoff.eps1 {
                inner += 1;
                assert!((e.field - weinstein_y(&z, -1.0, 0.5)).norm() < 1e-12);
            }
        }
        assert!(inner > 0 && outer > 0);
    }

    #[test]
    fn dh_xf_closed_form_matches_components() {
        let (cfg, f) = setup(0.3);
        let c = CutoffProfile::new(0.02, 0.08).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut checked = 0;
        for _ in 0..2000 {
            let z = random_z(&mut rng, 0.1);
            if c.derivative(f.w(&z)) == 0.0 {
                continue;
            }
            checked += 1;
            let direct = dh_xf(&z, &c, &f, &cfg).unwrap();
            assert!((direct - dh_xf_closed_form(&z, &c, &f, &cfg)).abs() < 1e-10);
        }
        assert!(checked > 100);
        // second summand vanishes at q = q^L
        let q = Vector2::new(f.l1, 0.0);
        assert!((f.kappa(&q, &cfg) - f.rho_h).abs() < 1e-12);
    }

    #[test]
    fn leading_term_sign() {
        let (_, f) = setup(0.3);
        let c = CutoffProfile::default();
        for i in 0..200 {
            let w = -0.06 + 0.12 * i as f64 / 200.0;
            let side = if w >= 0.0 { Side::Earth } else { Side::Moon };
            let lead = c.derivative(w) * f.coefficient(side) * (1.0 - 1.0 / f.rho_h);
            assert!(lead >= 0.0);
        }
    }

    #[test]
    fn neck_sphere() {
        for rho in [4.0, 8.0, 20.0] {
            for delta in [1e-3, 0.02, -0.05] {
                for (a, b) in [(0.3, 1.0), (2.0, 4.0), (1.0, 0.0)] {
                    let z = neck_sphere_point(delta, rho, a, b).unwrap();
                    assert!(neck_sphere_residual(delta, rho, &z).abs() < 1e-12);
                    assert!((qform_matrix(rho) * z).dot(&z).abs() < 1e-12);
                    assert!((z[0] - z[3] / rho - delta).abs() < 1e-15);
                }
            }
            let z = neck_sphere_point(0.0, rho, 0.7, 0.2).unwrap();
            assert_eq!(z, Vector4::zeros());
            let r = |d: f64| neck_sphere_point(d, rho, 0.4, 1.1).unwrap().norm();
            assert!((r(0.02) / r(0.01) - 2.0).abs() < 1e-12);
        }
        assert!(neck_sphere_point(0.1, 1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn below_critical_agrees_with_moon_certifier() {
        use crate::contactcert::moon_sufficient_margin;
        use crate::model::LunarPolar;
        let (cfg, f) = setup(0.3);
        let c = f.critical_value - 0.05;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut n = 0;
        while n < 200 {
            let pt = LunarPolar::new(rng.random_range(0.02..0.3), rng.random_range(0.0..TAU));
            let q = pt.to_cartesian(&cfg);
            if effective_potential(&q, &cfg).unwrap() > c {
                continue;
            }
            n += 1;
            let a = far_margin(&q, c, Side::Moon, &cfg).unwrap();
            let b = moon_sufficient_margin(&pt, c, &cfg).unwrap();
            assert!((a - b).abs() < 1e-9 * b.abs().max(1.0), "{a} vs {b}");
        }
        let opts = NeckOptions {
            far_grid: HillGrid { half_width: 1.6, n: 300 },
            ball_n: 60,
            ball_momenta: 24,
            ..NeckOptions::default()
        };
        let r = certify_level(&cfg, &f, &NeckField::for_frame(&f), c, &opts).unwrap();
        assert_eq!(r.verdict, Verdict::Certified, "{}", r.to_json());
    }

    #[test]
    fn neck_margin_is_order_epsilon() {
        let (cfg, f) = setup(0.5);
        let opts = NeckOptions {
            far_grid: HillGrid { half_width: 1.6, n: 200 },
            ball_n: 80,
            ball_momenta: 32,
            ..NeckOptions::default()
        };
        let field = NeckField::for_frame(&f);
        for eps in [1e-4, 1e-3] {
            let r = certify_level(&cfg, &f, &field, f.critical_value + eps, &opts).unwrap();
            let ratio = r.parameters["ball_min_margin"] / eps;
            assert!(ratio > 0.3 && ratio < 3.0, "{eps}: {ratio}");
        }
    }

    #[test]
    fn above_critical_some_epsilon() {
        let cfg = SystemConfig::new(0.3).unwrap();
        let opts = NeckOptions {
            far_grid: HillGrid { half_width: 1.6, n: 300 },
            ball_n: 60,
            ball_momenta: 24,
            ..NeckOptions::default()
        };
        let r = certify_above_critical(&cfg, &DEFAULT_EPSILON_LADDER, &opts).unwrap();
        assert!(r.largest_certified.is_some(), "{}", serde_json::to_string_pretty(&r.table).unwrap());
    }
}
