//! `r3bp`: batch runs of the certifications, the lemma verifier and the
//! trajectory tools. Every run writes one JSON report (stdout or `--output`)
//! echoing its full configuration; human-readable lines go to stderr.

mod commands;

use std::io::Write;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::Value;

use r3bp_core::parallel::with_workers;

#[derive(Debug, Parser)]
#[command(
    name = "r3bp",
    version,
    about = "Planar circular restricted three-body problem: Lagrange points, contact-type \
             certification of energy levels, lemma verification and regularized trajectories",
    long_about = None,
    after_help = "Exit status: 0 certified / all checks passed, 1 violated / a check failed, \
                  2 inconclusive or bad input."
)]
pub struct Cli {
    /// Worker threads for the parallel sweeps (default: all cores).
    #[arg(long, global = true, env = "R3BP_WORKERS")]
    pub workers: Option<usize>,

    /// Add wall-clock time to the report (breaks byte-for-byte reproducibility).
    #[arg(long, global = true)]
    pub timing: bool,

    /// Write the JSON report here instead of stdout.
    #[arg(long, global = true, value_name = "PATH")]
    pub output: Option<std::path::PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    /// Locate the five equilibria, the distance d from the moon to L1, their
    /// critical values and their ordering, and the Hessian parameter at L1.
    Lagrange(LagrangeArgs),
    /// Certify that the Liouville field is transverse to an energy level:
    /// below the first critical value on the moon and earth components (radial
    /// field about each primary), or just above it through the neck at L1.
    Certify(CertifyArgs),
    /// Re-check the potential-theoretic inequalities behind the transversality
    /// argument on grids, and the polynomial identities in exact arithmetic.
    Verify(VerifyArgs),
    /// Integrate trajectories: the rotating-frame flow, the geodesic case of the
    /// regularized Kepler problem, the rotating/regularized correspondence, a
    /// collision passage, or a symmetric periodic orbit.
    Simulate(SimulateArgs),
    /// Hill region {U <= c}: connected components on a grid, as CSV and SVG.
    Hill(HillArgs),
    /// Gaussian curvature of the conformal metric whose geodesic flow is the
    /// regularized Kepler flow at energy k; it is constant, equal to -2k.
    Curvature(CurvatureArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct LagrangeArgs {
    /// Mass ratio of the moon, in (0, 1).
    #[arg(long)]
    pub mu: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct CertifyArgs {
    #[arg(long)]
    pub mu: f64,
    /// Certify the level c = H(L1) - DELTA (DELTA > 0) on both components.
    #[arg(long, value_name = "DELTA", conflicts_with = "above", required_unless_present = "above", allow_hyphen_values = true)]
    pub below: Option<f64>,
    /// Certify levels c = H(L1) + eps over a ladder of eps through the neck.
    #[arg(long)]
    pub above: bool,
    /// Angular samples of the polar sweep.
    #[arg(long, default_value_t = 1000)]
    pub n_theta: usize,
    /// Radial samples per ray of the polar sweep.
    #[arg(long, default_value_t = 1000)]
    pub n_rho: usize,
    /// Random fibers for the full phase-space spot check.
    #[arg(long, default_value_t = 1000)]
    pub spot_fibers: usize,
    #[arg(long, default_value_t = 32)]
    pub spot_momenta: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also run the strict interval-refinement pass.
    #[arg(long)]
    pub strict: bool,
    /// Candidate eps values for --above (default ladder 1e-4 .. 1e-1).
    #[arg(long, value_delimiter = ',')]
    pub eps: Option<Vec<f64>>,
    /// Cartesian grid points per side away from L1 for --above.
    #[arg(long, default_value_t = 800)]
    pub far_grid: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LemmaId {
    Tra1,
    Tra2,
    Tra3,
    #[value(name = "W_final")]
    #[serde(rename = "W_final")]
    WFinal,
    #[value(name = "h_claim")]
    #[serde(rename = "h_claim")]
    HClaim,
    Cortra,
    Appendix,
    /// The exact polynomial identities only.
    Poly,
}

#[derive(Debug, Args, Serialize)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = 0.3)]
    pub mu: f64,
    /// Run every lemma and the exact identities (the default).
    #[arg(long, conflicts_with = "only")]
    pub all: bool,
    /// Run a single check.
    #[arg(long, value_enum)]
    pub only: Option<LemmaId>,
    /// Points per one-dimensional sweep.
    #[arg(long, default_value_t = 2000)]
    pub n_1d: usize,
    /// Points per axis of two-dimensional sweeps.
    #[arg(long, default_value_t = 500)]
    pub n_2d: usize,
    /// Also rerun on grids refined by this factor and report the margin changes.
    #[arg(long, value_name = "FACTOR")]
    pub refine: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SimMode {
    /// Rotating-frame flow from --state for --time.
    Rotating,
    /// Regularized Kepler flow at k = -1/2 without rotation: period 2π.
    KeplerGeodesic,
    /// Rotating flow against regularized flow from --state, about the moon.
    Correspondence,
    /// Orbit through collision with the moon at c = H(L1) - DELTA.
    Collision,
    /// Symmetric periodic orbit about the moon at c = H(L1) - DELTA.
    Periodic,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    #[arg(long, value_enum, default_value = "rotating")]
    pub mode: SimMode,
    /// Shorthand for --mode kepler-geodesic.
    #[arg(long)]
    pub kepler_geodesic: bool,
    #[arg(long, default_value_t = 0.3)]
    pub mu: f64,
    /// Initial state q1,q2,p1,p2 for the rotating and correspondence modes.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub state: Option<Vec<f64>>,
    #[arg(long, default_value_t = 10.0)]
    pub time: f64,
    /// Energy below H(L1) for the collision and periodic modes.
    #[arg(long, value_name = "DELTA", default_value_t = 0.1)]
    pub below: f64,
    #[arg(long, default_value_t = 1e-12)]
    pub tolerance: f64,
    /// Launch distances from the moon scanned by the periodic mode.
    #[arg(long, default_value_t = 0.05)]
    pub rho_min: f64,
    #[arg(long, default_value_t = 0.4)]
    pub rho_max: f64,
    #[arg(long, default_value_t = 40)]
    pub grid: usize,
    /// Prograde instead of retrograde orbits in the periodic mode.
    #[arg(long)]
    pub prograde: bool,
    /// Trajectory CSV (time, full state, conserved quantity).
    #[arg(long, value_name = "PATH")]
    pub csv: Option<std::path::PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct HillArgs {
    #[arg(long)]
    pub mu: f64,
    /// Energy relative to H(L1).
    #[arg(long, allow_hyphen_values = true, conflicts_with = "energy", required_unless_present = "energy")]
    pub offset: Option<f64>,
    /// Absolute energy.
    #[arg(long, allow_hyphen_values = true)]
    pub energy: Option<f64>,
    #[arg(long, default_value_t = 400)]
    pub grid: usize,
    /// The grid covers [-W, W]²; it must reach past the outer forbidden ring
    /// for the unbounded region to show up as one piece.
    #[arg(long, value_name = "W", default_value_t = 3.0)]
    pub half_width: f64,
    #[arg(long, value_name = "PATH")]
    pub svg: Option<std::path::PathBuf>,
    #[arg(long, value_name = "PATH")]
    pub csv: Option<std::path::PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct CurvatureArgs {
    /// Energy k < 0.
    #[arg(long, allow_hyphen_values = true)]
    pub k: f64,
    #[arg(long, default_value_t = 20)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_name = "PATH")]
    pub csv: Option<std::path::PathBuf>,
}

/// A finished run: the report body and the exit status it implies.
pub struct Outcome {
    pub report: Value,
    pub exit: u8,
    pub summary: Vec<String>,
}

/// Input rejected before or during the computation: exit 2.
#[derive(Debug)]
pub struct Failure(pub String);

impl From<r3bp_core::Error> for Failure {
    fn from(e: r3bp_core::Error) -> Self {
        Failure(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let start = Instant::now();
    let result = with_workers(cli.workers, || commands::run(&cli.command))
        .map_err(Failure::from)
        .and_then(|r| r);
    let outcome = match result {
        Ok(o) => o,
        Err(Failure(msg)) => {
            eprintln!("error: {msg}");
            return ExitCode::from(2);
        }
    };
    for line in &outcome.summary {
        eprintln!("{line}");
    }
    let name = match serde_json::to_value(&cli.command) {
        Ok(Value::Object(m)) => m.keys().next().cloned().unwrap_or_default(),
        _ => String::new(),
    };
    let mut config = serde_json::to_value(&cli.command).unwrap_or(Value::Null);
    if let Value::Object(m) = &mut config {
        if let Some(inner) = m.remove(&name) {
            config = inner;
        }
    }
    let mut report = outcome.report;
    if !cli.timing {
        strip_timing(&mut report);
    }
    let mut envelope = serde_json::json!({
        "command": name,
        "config": config,
        "workers": cli.workers,
        "report": report,
        "exit_code": outcome.exit,
    });
    if cli.timing {
        let secs = start.elapsed().as_secs_f64();
        envelope["wall_clock_seconds"] = Value::from(secs);
        eprintln!("wall clock: {secs:.3} s");
    }
    let text = serde_json::to_string_pretty(&envelope).expect("report serialization") + "\n";
    let written = match &cli.output {
        Some(path) => std::fs::write(path, text),
        None => std::io::stdout().write_all(text.as_bytes()),
    };
    if let Err(e) = written {
        eprintln!("error: cannot write report: {e}");
        return ExitCode::from(2);
    }
    ExitCode::from(outcome.exit)
}

/// Drops the per-report wall-clock fields so that reruns compare byte for byte.
fn strip_timing(v: &mut Value) {
    match v {
        Value::Object(m) => {
            m.remove("wall_clock_seconds");
            m.values_mut().for_each(strip_timing);
        }
        Value::Array(a) => a.iter_mut().for_each(strip_timing),
        _ => {}
    }
}
