use thiserror::Error;

use crate::model::Primary;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("distance {distance:e} to the {primary} is below the singularity threshold")]
    Singularity { primary: Primary, distance: f64 },

    #[error("mass ratio {0} is outside [0, 1]")]
    InvalidMass(f64),

    #[error("mass ratio {0} is degenerate: no interior first Lagrange point")]
    DegenerateMass(f64),

    #[error("{what}: argument {value} outside {domain}")]
    Domain {
        what: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("root bracketing failed for {what} on [{lo}, {hi}]")]
    Bracket { what: &'static str, lo: f64, hi: f64 },

    #[error("energy {energy} is within {tolerance:e} of the critical value {critical}")]
    DegenerateLevel {
        energy: f64,
        critical: f64,
        tolerance: f64,
    },

    #[error("point outside the Hill region: U = {potential} > {energy}")]
    OutsideHillRegion { potential: f64, energy: f64 },

    #[error("energy {energy} is not below the first critical value {critical}; use the neck certification")]
    NotBelowCritical { energy: f64, critical: f64 },

    #[error("point is off the level set (residual {0:e})")]
    OffLevel(f64),

    #[error("stereographic projection is undefined at the pole xi0 = 1")]
    Pole,

    #[error("close approach to the {primary} (distance {distance:e}) at t = {time}; use the regularized flow")]
    CloseApproach {
        primary: Primary,
        distance: f64,
        time: f64,
    },

    #[error("step size underflow at t = {time} (h = {step:e})")]
    StepUnderflow { time: f64, step: f64 },

    #[error("constraint projection diverged (defect {0:e})")]
    ConstraintDrift(f64),

    #[error("{0}")]
    NotFound(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
