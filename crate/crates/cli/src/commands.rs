use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};

use r3bp_core::contactcert::{certify_earth_component, certify_moon_component, SweepOptions};
use r3bp_core::dynamics::{
    collision_passage_demo, correspondence_check, find_symmetric_periodic_orbit, integrate_rotating,
    kepler_geodesic_period, OrbitFamily, Trajectory,
};
use r3bp_core::equilibria::{
    find_lagrange_points, first_critical_value, hill_components, rho_hessian, CellLabel, HillGrid,
};
use r3bp_core::moser::{conformal_metric_curvature, sphere_samples, write_curvature_csv};
use r3bp_core::neck::{certify_above_critical, NeckOptions, DEFAULT_EPSILON_LADDER};
use r3bp_core::report::Verdict;
use r3bp_core::verifier::{
    polynomial_identities, refinement_stability, shifted_quartic_max, verify_all, verify_one,
    VerifierOptions, DISPLAY_ONLY,
};
use r3bp_core::{PhasePoint, Primary, SystemConfig};

use crate::{
    CertifyArgs, Command, CurvatureArgs, Failure, HillArgs, LagrangeArgs, LemmaId, Outcome, SimMode,
    SimulateArgs, VerifyArgs,
};

type Run = Result<Outcome, Failure>;

pub fn run(cmd: &Command) -> Run {
    match cmd {
        Command::Lagrange(a) => lagrange(a),
        Command::Certify(a) => certify(a),
        Command::Verify(a) => verify(a),
        Command::Simulate(a) => simulate(a),
        Command::Hill(a) => hill(a),
        Command::Curvature(a) => curvature(a),
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report serialization")
}

fn outcome(report: Value, exit: u8, summary: Vec<String>) -> Run {
    Ok(Outcome { report, exit, summary })
}

fn verdict_exit(v: Verdict) -> u8 {
    v.exit_code() as u8
}

/// Fails for the degenerate mass ratios as well as out-of-range ones.
fn interior_config(mu: f64) -> Result<SystemConfig, Failure> {
    let cfg = SystemConfig::new(mu)?;
    if !(mu > 0.0 && mu < 1.0) {
        return Err(r3bp_core::Error::DegenerateMass(mu).into());
    }
    Ok(cfg)
}

fn lagrange(a: &LagrangeArgs) -> Run {
    let cfg = interior_config(a.mu)?;
    let set = find_lagrange_points(&cfg)?;
    let rho_h = rho_hessian(&set.get(1).position, &cfg)?;
    let v = set.values();
    let rel = |x: f64, y: f64| {
        if (x - y).abs() <= 1e-14 {
            "="
        } else if x < y {
            "<"
        } else {
            ">"
        }
    };
    let ordering = format!(
        "H(L1) {} H(L2) {} H(L3) {} H(L4) {} H(L5)",
        rel(v[0], v[1]),
        rel(v[1], v[2]),
        rel(v[2], v[3]),
        rel(v[3], v[4])
    );
    let mut summary = vec![format!("mu = {}   d = {:.15}   rho_h(L1) = {:.12}", a.mu, set.d, rho_h)];
    for p in &set.points {
        summary.push(format!(
            "L{}  q = ({:+.15}, {:+.15})  H = {:.15}",
            p.index, p.position[0], p.position[1], p.value
        ));
    }
    summary.push(ordering.clone());
    outcome(
        json!({ "lagrange": to_value(&set), "rho_h_l1": rho_h, "ordering": ordering }),
        0,
        summary,
    )
}

fn certify(a: &CertifyArgs) -> Run {
    let cfg = interior_config(a.mu)?;
    let critical = first_critical_value(&cfg)?;
    if a.above {
        let opts = NeckOptions {
            far_grid: HillGrid {
                half_width: 1.6,
                n: a.far_grid,
            },
            ..NeckOptions::default()
        };
        let ladder = a.eps.clone().unwrap_or_else(|| DEFAULT_EPSILON_LADDER.to_vec());
        if ladder.is_empty() || ladder.iter().any(|e| !(*e > 0.0)) {
            return Err(Failure("--eps values must be positive".into()));
        }
        let neck = certify_above_critical(&cfg, &ladder, &opts)?;
        let verdict = neck.report.verdict;
        let mut summary = vec![format!("H(L1) = {critical:.15}   rho_h = {:.6}", neck.rho_h)];
        for row in &neck.table {
            summary.push(format!(
                "eps = {:<8e} {:?}  min margin {:+.3e}",
                row.epsilon, row.verdict, row.min_margin
            ));
        }
        summary.push(match neck.largest_certified {
            Some(e) => format!("largest certified eps = {e:e}"),
            None => "no eps certified".to_string(),
        });
        return outcome(
            json!({ "critical_value": critical, "neck": to_value(&neck), "verdict": verdict }),
            verdict_exit(verdict),
            summary,
        );
    }
    let delta = a.below.unwrap_or(f64::NAN);
    if !(delta > 0.0) {
        return Err(Failure(format!("--below must be positive, got {delta}")));
    }
    let c = critical - delta;
    let opts = SweepOptions {
        n_theta: a.n_theta,
        n_rho: a.n_rho,
        spot_fibers: a.spot_fibers,
        spot_momenta: a.spot_momenta,
        seed: a.seed,
        strict: a.strict,
        ..SweepOptions::default()
    };
    let moon = certify_moon_component(c, &cfg, &opts)?;
    let earth = certify_earth_component(c, &cfg, &opts)?;
    let verdict = moon.verdict.and(earth.verdict);
    let summary = vec![
        format!("c = H(L1) - {delta} = {c:.15}"),
        format!("moon:  {:?}  min margin {:+.6e}", moon.verdict, moon.min_margin),
        format!("earth: {:?}  min margin {:+.6e}", earth.verdict, earth.min_margin),
    ];
    outcome(
        json!({
            "critical_value": critical,
            "energy": c,
            "options": to_value(&opts),
            "moon": to_value(&moon),
            "earth": to_value(&earth),
            "verdict": verdict,
        }),
        verdict_exit(verdict),
        summary,
    )
}

fn poly_ledger() -> (Value, bool, Vec<String>) {
    let ids = polynomial_identities();
    let (max, at) = shifted_quartic_max(10_000);
    let mut ok = max < 0.0;
    let mut summary = Vec::new();
    for id in &ids {
        let expected = !DISPLAY_ONLY.contains(&id.id.as_str());
        ok &= id.holds == expected;
        summary.push(format!(
            "identity {:<12} {}",
            id.id,
            match (id.holds, expected) {
                (true, _) => "holds".to_string(),
                (false, false) => "does not hold as displayed (recorded, expected)".to_string(),
                (false, true) => format!("FAILS: remainder {}", id.remainder),
            }
        ));
    }
    summary.push(format!("shifted quartic max {max:.6} at {at:.6}"));
    (
        json!({ "identities": to_value(&ids), "quartic_max": [max, at], "passed": ok }),
        ok,
        summary,
    )
}

fn verify(a: &VerifyArgs) -> Run {
    if a.only == Some(LemmaId::Poly) {
        let (report, ok, summary) = poly_ledger();
        return outcome(report, if ok { 0 } else { 1 }, summary);
    }
    let cfg = interior_config(a.mu)?;
    let opts = VerifierOptions {
        n_1d: a.n_1d,
        n_2d: a.n_2d,
        ..VerifierOptions::default()
    };
    let mut summary = Vec::new();
    let (mut report, mut ok) = match a.only {
        Some(id) => {
            let name = to_value(&id).as_str().unwrap_or_default().to_string();
            let r = verify_one(&name, &cfg, &opts)?;
            summary.push(lemma_line(&r));
            let ok = r.passed();
            (json!({ "lemma": to_value(&r) }), ok)
        }
        None => {
            let ledger = verify_all(&cfg, &opts)?;
            for r in &ledger.lemmas {
                summary.push(lemma_line(r));
            }
            if let Some(f) = ledger.first_failure() {
                summary.push(format!("first failure: {} at {:?}", f.lemma, f.witness));
            }
            let ok = ledger.all_passed;
            (json!({ "ledger": to_value(&ledger) }), ok)
        }
    };
    if let Some(factor) = a.refine {
        let rows = refinement_stability(&cfg, &opts, factor.max(2))?;
        let rows: Vec<_> = match a.only {
            Some(id) => {
                let name = to_value(&id);
                rows.into_iter().filter(|r| Value::from(r.lemma.clone()) == name).collect()
            }
            None => rows,
        };
        let stable = rows.iter().all(|r| r.relative_change < 0.1);
        for r in &rows {
            summary.push(format!(
                "refinement {:<9} {:.6e} -> {:.6e} ({:.2e})",
                r.lemma, r.margin, r.refined_margin, r.relative_change
            ));
        }
        report["refinement"] = json!({ "factor": factor.max(2), "rows": to_value(&rows), "stable": stable });
        ok &= stable;
    }
    report["options"] = to_value(&opts);
    report["passed"] = Value::from(ok);
    outcome(report, if ok { 0 } else { 1 }, summary)
}

fn lemma_line(r: &r3bp_core::verifier::LemmaReport) -> String {
    let mut line = format!("{:<9} {:?}  min margin {:+.6e}", r.lemma, r.verdict, r.min_margin);
    if !r.passed() {
        line.push_str(&format!("  witness {:?}", r.witness));
        for c in r.failed_checks() {
            line.push_str(&format!("  [{}: {:e} vs {:e}]", c.name, c.worst, c.bound));
        }
    }
    line
}

fn write_trajectory(path: Option<&Path>, traj: &Trajectory) -> Result<(), Failure> {
    if let Some(p) = path {
        traj.write_csv(BufWriter::new(File::create(p)?))?;
    }
    Ok(())
}

/// The report without the sample list, which goes to the CSV instead.
fn without_trajectory<T: Serialize>(v: &T, traj: &Trajectory) -> Value {
    let mut value = to_value(v);
    if let Value::Object(m) = &mut value {
        m.remove("trajectory");
        m.insert("trajectory_summary".into(), to_value(&traj.summary()));
    }
    value
}

fn state(a: &SimulateArgs) -> Result<PhasePoint, Failure> {
    match a.state.as_deref() {
        Some([q1, q2, p1, p2]) => Ok(PhasePoint::new(*q1, *q2, *p1, *p2)),
        _ => Err(Failure("this mode needs --state q1,q2,p1,p2".into())),
    }
}

fn simulate(a: &SimulateArgs) -> Run {
    let mode = if a.kepler_geodesic { SimMode::KeplerGeodesic } else { a.mode };
    let csv = a.csv.as_deref();
    match mode {
        SimMode::KeplerGeodesic => {
            let g = kepler_geodesic_period(a.tolerance.min(1e-12))?;
            write_trajectory(csv, &g.trajectory)?;
            let ok = g.period_error < 1e-6 && g.q_drift <= 1e-9 && g.constraint_defect <= 1e-10;
            let summary = vec![format!(
                "s-period {:.12} (2π error {:.2e}), Q drift {:.2e}, constraints {:.2e}",
                g.period, g.period_error, g.q_drift, g.constraint_defect
            )];
            outcome(without_trajectory(&g, &g.trajectory), if ok { 0 } else { 1 }, summary)
        }
        SimMode::Rotating => {
            let cfg = SystemConfig::new(a.mu)?;
            let x0 = state(a)?;
            let traj = integrate_rotating(&x0, &cfg, a.time, a.tolerance)?;
            write_trajectory(csv, &traj)?;
            let s = traj.summary();
            let summary = vec![format!(
                "t = {}  {} samples  relative H drift {:.2e}",
                s.end, s.samples, s.relative_drift
            )];
            outcome(json!({ "trajectory_summary": to_value(&s) }), 0, summary)
        }
        SimMode::Correspondence => {
            let cfg = interior_config(a.mu)?;
            let x0 = state(a)?;
            let r = correspondence_check(&x0, &cfg, Primary::Moon, a.time, 64)?;
            let ok = r.max_deviation < 1e-6;
            let summary = vec![format!(
                "k = {:.12}  s_end = {:.9}  max deviation {:.2e}",
                r.k, r.s_end, r.max_deviation
            )];
            outcome(to_value(&r), if ok { 0 } else { 1 }, summary)
        }
        SimMode::Collision => {
            let cfg = interior_config(a.mu)?;
            if !(a.below > 0.0) {
                return Err(Failure(format!("--below must be positive, got {}", a.below)));
            }
            let k = first_critical_value(&cfg)? - a.below;
            let d = collision_passage_demo(&cfg, k, Primary::Moon)?;
            write_trajectory(csv, &d.trajectory)?;
            let ok = d.max_momentum > 1e3
                && d.q_drift < 1e-9
                && d.energy_defect < 1e-8
                && d.symmetry_defect < 1e-8;
            let summary = vec![format!(
                "max |p| {:.3e}  Q drift {:.2e}  |H - k| {:.2e}  symmetry {:.2e}",
                d.max_momentum, d.q_drift, d.energy_defect, d.symmetry_defect
            )];
            outcome(without_trajectory(&d, &d.trajectory), if ok { 0 } else { 1 }, summary)
        }
        SimMode::Periodic => {
            let cfg = interior_config(a.mu)?;
            if !(a.below > 0.0) {
                return Err(Failure(format!("--below must be positive, got {}", a.below)));
            }
            let c = first_critical_value(&cfg)? - a.below;
            let mut fam = OrbitFamily::retrograde(Primary::Moon, a.rho_min, a.rho_max);
            fam.retrograde = !a.prograde;
            fam.grid = a.grid;
            let orbit = find_symmetric_periodic_orbit(&cfg, c, &fam)?;
            write_trajectory(csv, &orbit.trajectory)?;
            let summary = vec![format!(
                "rho = {:.12}  period = {:.12}  closure {:.2e}  |H - c| {:.2e}",
                orbit.rho, orbit.period, orbit.closure_defect, orbit.energy_defect
            )];
            let mut report = without_trajectory(&orbit, &orbit.trajectory);
            report["family"] = to_value(&fam);
            report["energy"] = Value::from(c);
            outcome(report, 0, summary)
        }
    }
}

fn hill(a: &HillArgs) -> Run {
    let cfg = SystemConfig::new(a.mu)?;
    let c = match (a.offset, a.energy) {
        (_, Some(e)) => e,
        (Some(off), None) => first_critical_value(&cfg)? + off,
        (None, None) => return Err(Failure("give --offset or --energy".into())),
    };
    if a.grid < 2 || !(a.half_width > 0.0) {
        return Err(Failure("--grid must be at least 2 and --half-width positive".into()));
    }
    let region = hill_components(
        c,
        &cfg,
        HillGrid {
            half_width: a.half_width,
            n: a.grid,
        },
    )?;
    if let Some(p) = &a.svg {
        region.write_svg(BufWriter::new(File::create(p)?))?;
    }
    if let Some(p) = &a.csv {
        region.write_csv(BufWriter::new(File::create(p)?))?;
    }
    let labels = [
        CellLabel::Earth,
        CellLabel::Moon,
        CellLabel::Merged,
        CellLabel::Unbounded,
        CellLabel::Bounded,
        CellLabel::Forbidden,
    ];
    let cells: serde_json::Map<String, Value> = labels
        .iter()
        .map(|l| (l.as_str().to_string(), Value::from(region.count(*l))))
        .collect();
    let summary = vec![format!(
        "c = {c:.15}: {} components of {{U <= c}} on a {}x{} grid",
        region.component_count(),
        a.grid,
        a.grid
    )];
    outcome(
        json!({ "energy": c, "components": region.component_count(), "cells": cells }),
        0,
        summary,
    )
}

fn curvature(a: &CurvatureArgs) -> Run {
    let samples = sphere_samples(a.samples, a.seed, 0.8);
    let values = conformal_metric_curvature(a.k, &samples)?;
    if let Some(p) = &a.csv {
        write_curvature_csv(BufWriter::new(File::create(p)?), &samples, &values)?;
    }
    let expected = -2.0 * a.k;
    let worst = values.iter().map(|v| (v - expected).abs()).fold(0.0, f64::max);
    let ok = worst < 1e-4;
    let summary = vec![format!(
        "curvature at {} points: expected {expected}, max deviation {worst:.2e}",
        values.len()
    )];
    outcome(
        json!({ "expected": expected, "max_deviation": worst, "curvature": values, "points": to_value(&samples) }),
        if ok { 0 } else { 1 },
        summary,
    )
}
