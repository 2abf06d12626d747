use std::process::{Command, Output};

use serde_json::Value;

fn r3bp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_r3bp"))
        .args(args)
        .env_remove("R3BP_WORKERS")
        .output()
        .expect("run r3bp")
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "bad json ({e}): {}\n{}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn temp_path(name: &str) -> std::path::PathBuf {
    std::env::temp_dir().join(format!("r3bp-cli-{}-{name}", std::process::id()))
}

#[test]
fn lagrange_symmetric_case() {
    let out = r3bp(&["lagrange", "--mu", "0.5"]);
    assert_eq!(code(&out), 0);
    let r = report(&out);
    let rep = &r["report"];
    assert_eq!(rep["lagrange"]["d"].as_f64().unwrap(), 0.5);
    let h1 = rep["lagrange"]["points"][0]["value"].as_f64().unwrap();
    assert!((h1 + 2.0).abs() < 1e-14);
    assert!((rep["rho_h_l1"].as_f64().unwrap() - 8.0).abs() < 1e-12);
    assert_eq!(r["command"], "lagrange");
    assert_eq!(r["config"]["mu"], 0.5);
}

#[test]
fn lagrange_ordering_line() {
    let out = r3bp(&["lagrange", "--mu", "0.3"]);
    assert_eq!(code(&out), 0);
    assert_eq!(report(&out)["report"]["ordering"], "H(L1) < H(L2) < H(L3) < H(L4) = H(L5)");
    assert!(String::from_utf8_lossy(&out.stderr).contains("H(L1) < H(L2)"));
}

#[test]
fn degenerate_and_invalid_masses_exit_two() {
    let out = r3bp(&["lagrange", "--mu", "0"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("degenerate"));
    assert_eq!(code(&r3bp(&["verify", "--all", "--mu", "1.5"])), 2);
    assert_eq!(code(&r3bp(&["lagrange"])), 2);
}

#[test]
fn certify_below_critical() {
    let out = r3bp(&["certify", "--mu", "0.3", "--below", "0.05"]);
    assert_eq!(code(&out), 0);
    let r = report(&out);
    assert_eq!(r["report"]["verdict"], "certified");
    for side in ["moon", "earth"] {
        assert!(r["report"][side]["min_margin"].as_f64().unwrap() > 0.0);
    }
    // defaults are echoed for reproducibility
    assert_eq!(r["config"]["n_theta"], 1000);
    assert_eq!(r["report"]["options"]["spot_momenta"], 32);
}

#[test]
fn certify_below_must_be_positive() {
    assert_eq!(code(&r3bp(&["certify", "--mu", "0.3", "--below", "-0.05"])), 2);
    assert_eq!(code(&r3bp(&["certify", "--mu", "0.3"])), 2);
}

#[test]
fn certify_above_critical() {
    let out = r3bp(&["certify", "--mu", "0.3", "--above"]);
    assert_eq!(code(&out), 0);
    let r = report(&out);
    let eps = r["report"]["neck"]["largest_certified"].as_f64().unwrap();
    assert!(eps > 0.0);
    assert!(String::from_utf8_lossy(&out.stderr).contains("largest certified eps"));
}

#[test]
fn verify_all_and_poly() {
    let out = r3bp(&["verify", "--all", "--mu", "0.3"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(report(&out)["report"]["ledger"]["all_passed"], true);
    let out = r3bp(&["verify", "--only", "poly"]);
    assert_eq!(code(&out), 0);
    let ids = report(&out)["report"]["identities"].as_array().unwrap().clone();
    assert!(ids.len() >= 5);
    let out = r3bp(&["verify", "--only", "tra2", "--mu", "0.1", "--refine", "2"]);
    assert_eq!(code(&out), 0);
    assert_eq!(report(&out)["report"]["refinement"]["stable"], true);
}

#[test]
fn simulate_geodesic_period() {
    let csv = temp_path("geodesic.csv");
    let out = r3bp(&["simulate", "--kepler-geodesic", "--csv", csv.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let p = report(&out)["report"]["period"].as_f64().unwrap();
    assert!((p - std::f64::consts::TAU).abs() < 1e-6);
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("s,xi0,xi1,xi2,eta0,eta1,eta2,Q"));
    std::fs::remove_file(csv).ok();
}

#[test]
fn simulate_rotating_needs_a_state() {
    assert_eq!(code(&r3bp(&["simulate", "--mode", "rotating"])), 2);
    let out = r3bp(&["simulate", "--state=0.65,0,0,2.74", "--time", "5"]);
    assert_eq!(code(&out), 0);
    let drift = report(&out)["report"]["trajectory_summary"]["relative_drift"].as_f64().unwrap();
    assert!(drift <= 1e-9);
}

#[test]
fn hill_three_components() {
    let svg = temp_path("hill.svg");
    let out = r3bp(&["hill", "--mu", "0.3", "--offset", "-0.05", "--svg", svg.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    assert_eq!(report(&out)["report"]["components"], 3);
    assert!(std::fs::read_to_string(&svg).unwrap().starts_with("<svg"));
    std::fs::remove_file(svg).ok();
    assert_eq!(code(&r3bp(&["hill", "--mu", "0.3", "--offset", "0"])), 2);
}

#[test]
fn curvature_is_two_at_minus_one() {
    let out = r3bp(&["curvature", "--k", "-1"]);
    assert_eq!(code(&out), 0);
    let r = report(&out);
    for v in r["report"]["curvature"].as_array().unwrap() {
        assert!((v.as_f64().unwrap() - 2.0).abs() < 1e-4);
    }
    assert_eq!(code(&r3bp(&["curvature", "--k", "0.5"])), 2);
}

#[test]
fn reports_are_deterministic() {
    let args = ["certify", "--mu", "0.1", "--below", "0.01", "--n-theta", "300", "--n-rho", "300"];
    let run = |workers: &str| {
        let mut a = args.to_vec();
        a.extend(["--workers", workers]);
        r3bp(&a)
    };
    let (a, b) = (run("3"), run("3"));
    assert_eq!(a.stdout, b.stdout);
    let (mut x, mut y) = (report(&a), report(&run("1")));
    assert_eq!(x["workers"], 3);
    x["workers"] = Value::Null;
    y["workers"] = Value::Null;
    assert_eq!(x, y);
}

#[test]
fn workers_from_the_environment() {
    let out = Command::new(env!("CARGO_BIN_EXE_r3bp"))
        .args(["lagrange", "--mu", "0.2"])
        .env("R3BP_WORKERS", "2")
        .output()
        .unwrap();
    assert_eq!(report(&out)["workers"], 2);
}

#[test]
fn timing_and_output_file() {
    let path = temp_path("report.json");
    let out = r3bp(&["lagrange", "--mu", "0.2", "--timing", "--output", path.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    assert!(out.stdout.is_empty());
    let r: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert!(r["wall_clock_seconds"].as_f64().unwrap() >= 0.0);
    std::fs::remove_file(path).ok();
}

#[test]
fn help_describes_each_subcommand() {
    for (cmd, needle) in [
        ("lagrange", "equilibria"),
        ("certify", "Liouville"),
        ("verify", "exact arithmetic"),
        ("simulate", "collision"),
        ("hill", "components"),
        ("curvature", "-2k"),
    ] {
        let out = r3bp(&[cmd, "--help"]);
        assert_eq!(code(&out), 0);
        let text = String::from_utf8_lossy(&out.stdout);
        assert!(text.contains(needle), "{cmd}: {text}");
    }
}
