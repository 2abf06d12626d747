//! Certification reports shared by the grid certifiers.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::parallel::SweepStats;

pub const DEFAULT_MARGIN_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Certified,
    Violated,
    Inconclusive,
}

impl Verdict {
    pub fn from_stats(min_margin: f64, negatives: usize, tolerance: f64) -> Verdict {
        if negatives > 0 {
            Verdict::Violated
        } else if min_margin > tolerance {
            Verdict::Certified
        } else {
            Verdict::Inconclusive
        }
    }

    /// CLI exit status: 0 certified, 1 violated, 2 inconclusive.
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::Certified => 0,
            Verdict::Violated => 1,
            Verdict::Inconclusive => 2,
        }
    }

    /// The worse of two verdicts.
    pub fn and(self, other: Verdict) -> Verdict {
        use Verdict::*;
        match (self, other) {
            (Violated, _) | (_, Violated) => Violated,
            (Inconclusive, _) | (_, Inconclusive) => Inconclusive,
            _ => Certified,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl Axis {
    pub fn new(name: &str, lo: f64, hi: f64, n: usize) -> Self {
        Self {
            name: name.to_string(),
            lo,
            hi,
            n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GridSpec {
    pub axes: Vec<Axis>,
    #[serde(default)]
    pub refinement_rings: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Independent full phase-space checks on random fibers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpotCheck {
    pub fibers: usize,
    pub momenta_per_fiber: usize,
    pub seed: u64,
    pub min_value: f64,
    pub violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrictCheck {
    pub cells: usize,
    pub max_depth: usize,
    pub unresolved: usize,
    pub certified: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificationReport {
    pub quantity: String,
    pub parameters: BTreeMap<String, f64>,
    pub grid: GridSpec,
    pub samples: usize,
    pub min_margin: f64,
    pub argmin: BTreeMap<String, f64>,
    pub margin_tolerance: f64,
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spot_check: Option<SpotCheck>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strict: Option<StrictCheck>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<String>,
    /// Omitted from serialized output unless set, so repeated runs compare byte for byte.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_clock_seconds: Option<f64>,
}

impl CertificationReport {
    /// Builds a report from sweep statistics; `names` label the sample location slots.
    pub fn from_stats(
        quantity: &str,
        parameters: BTreeMap<String, f64>,
        grid: GridSpec,
        stats: &SweepStats,
        names: &[&str],
        tolerance: f64,
    ) -> Self {
        let min_margin = stats.min_value();
        let argmin = stats
            .min
            .map(|s| {
                names
                    .iter()
                    .zip(s.location.iter())
                    .map(|(n, v)| (n.to_string(), *v))
                    .collect()
            })
            .unwrap_or_default();
        let mut verdict = Verdict::from_stats(min_margin, stats.negatives, tolerance);
        let mut diagnostics = Vec::new();
        if stats.count == 0 {
            verdict = Verdict::Inconclusive;
            diagnostics.push("no samples in the certified region".to_string());
        }
        Self {
            quantity: quantity.to_string(),
            parameters,
            grid,
            samples: stats.count,
            min_margin,
            argmin,
            margin_tolerance: tolerance,
            verdict,
            spot_check: None,
            strict: None,
            diagnostics,
            wall_clock_seconds: None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization")
    }
}

pub(crate) fn params(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}
