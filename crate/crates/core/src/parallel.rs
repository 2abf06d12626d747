//! Data-parallel sweeps with an order-independent reduction.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};

/// One evaluated sample: the certified value, its lexicographic cell index
/// and up to four coordinates locating it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Sample {
    pub value: f64,
    pub index: [usize; 3],
    pub location: [f64; 4],
}

impl Sample {
    fn key(&self) -> f64 {
        if self.value.is_nan() {
            f64::NEG_INFINITY
        } else {
            self.value
        }
    }

    fn precedes(&self, other: &Sample) -> bool {
        let (a, b) = (self.key(), other.key());
        a < b || (a == b && self.index < other.index)
    }
}

/// Running minimum plus counts. Merging is associative and commutative, so
/// the result does not depend on how the work was split.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct SweepStats {
    pub min: Option<Sample>,
    pub count: usize,
    /// Samples with a negative (or NaN) value.
    pub negatives: usize,
}

impl SweepStats {
    pub fn push(&mut self, s: Sample) {
        self.count += 1;
        if !(s.value >= 0.0) {
            self.negatives += 1;
        }
        match &self.min {
            Some(m) if !s.precedes(m) => {}
            _ => self.min = Some(s),
        }
    }

    pub fn merge(mut self, other: SweepStats) -> SweepStats {
        self.count += other.count;
        self.negatives += other.negatives;
        if let Some(o) = other.min {
            match &self.min {
                Some(m) if !o.precedes(m) => {}
                _ => self.min = Some(o),
            }
        }
        self
    }

    pub fn min_value(&self) -> f64 {
        self.min.map_or(f64::INFINITY, |s| s.value)
    }
}

/// Runs `body(i, stats)` for every `i < n` in parallel and reduces.
pub fn par_sweep<F>(n: usize, body: F) -> SweepStats
where
    F: Fn(usize, &mut SweepStats) + Sync,
{
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut s = SweepStats::default();
            body(i, &mut s);
            s
        })
        .reduce(SweepStats::default, SweepStats::merge)
}

/// Fallible variant: the first error in index order wins.
pub fn try_par_sweep<F>(n: usize, body: F) -> Result<SweepStats>
where
    F: Fn(usize, &mut SweepStats) -> Result<()> + Sync,
{
    let parts: Vec<Result<SweepStats>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut s = SweepStats::default();
            body(i, &mut s).map(|_| s)
        })
        .collect();
    let mut acc = SweepStats::default();
    for p in parts {
        acc = acc.merge(p?);
    }
    Ok(acc)
}

/// Runs `f` on a dedicated pool with `workers` threads, or on the global pool for `None`.
pub fn with_workers<R, F>(workers: Option<usize>, f: F) -> Result<R>
where
    R: Send,
    F: FnOnce() -> R + Send,
{
    match workers {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::NotFound(format!("cannot build worker pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}
