//! Fixtures shared by the criterion benchmarks under `benches/`.

use r3bp_core::SystemConfig;

/// The mass ratios used across the benchmarks.
pub const MASS_RATIOS: [f64; 3] = [0.1, 0.3, 0.5];

pub fn config(mu: f64) -> SystemConfig {
    SystemConfig::new(mu).expect("benchmark mass ratio")
}
