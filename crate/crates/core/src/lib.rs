//! Planar circular restricted three-body problem: Lagrange points and Hill
//! regions, Moser regularization, Liouville fields and grid certification of
//! contact type, a lemma verifier and trajectory tools.

pub mod error;
pub mod model;
pub mod roots;
pub mod equilibria;
pub mod moser;
pub mod parallel;
pub mod report;
pub mod contactcert;
pub mod neck;
pub mod verifier;
pub mod dynamics;

pub use error::{Error, Result};
pub use model::{LunarPolar, PhasePoint, Primary, SystemConfig};
