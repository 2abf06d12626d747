//! Gragg–Bulirsch–Stoer: modified midpoint steps with the sequence 2, 4, ..., 16
//! and polynomial extrapolation in `h²`, under an adaptive step controller.

use nalgebra::SVector;

use crate::error::{Error, Result};

const SEQUENCE: [usize; 8] = [2, 4, 6, 8, 10, 12, 14, 16];

/// What to do after an accepted step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flow {
    Continue,
    Stop,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gbs {
    /// Per-step error bound, mixed absolute/relative: `|e_i| ≤ tol (1 + |y_i|)`.
    pub tol: f64,
    pub h_init: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Gbs {
    pub fn new(tol: f64) -> Self {
        Self {
            tol,
            h_init: 1e-2,
            h_max: 0.5,
            max_steps: 2_000_000,
        }
    }

    /// One extrapolated step of size `h` (of either sign). Returns the state and
    /// the scaled error estimate, `≤ 1` meaning acceptable.
    pub fn step<const N: usize, F>(
        &self,
        f: &mut F,
        t: f64,
        y: &SVector<f64, N>,
        h: f64,
    ) -> Result<(SVector<f64, N>, f64)>
    where
        F: FnMut(f64, &SVector<f64, N>) -> Result<SVector<f64, N>>,
    {
        let f0 = f(t, y)?;
        let mut prev: Vec<SVector<f64, N>> = Vec::new();
        let mut err = f64::INFINITY;
        for (j, &n) in SEQUENCE.iter().enumerate() {
            let mut row = Vec::with_capacity(j + 1);
            row.push(midpoint(f, t, y, &f0, h, n)?);
            for k in 1..=j {
                let ratio = (n as f64 / SEQUENCE[j - k] as f64).powi(2) - 1.0;
                row.push(row[k - 1] + (row[k - 1] - prev[k - 1]) / ratio);
            }
            if j > 0 {
                let diff = row[j] - row[j - 1];
                err = diff
                    .iter()
                    .zip(row[j].iter())
                    .map(|(d, v)| d.abs() / (self.tol * (1.0 + v.abs())))
                    .fold(0.0, f64::max);
            }
            prev = row;
        }
        let y1 = prev[SEQUENCE.len() - 1];
        if !y1.iter().all(|v| v.is_finite()) || !err.is_finite() {
            return Ok((y1, f64::INFINITY));
        }
        Ok((y1, err))
    }

    /// Integrates from `t0` to `t_end` (either direction), landing exactly on
    /// every time in `stops` that lies strictly inside the span. After each
    /// accepted step `after(t, &mut y, at_stop)` may adjust the state and decide
    /// whether to go on. Trial steps that fail inside `f` are retried shorter.
    pub fn solve<const N: usize, F, G>(
        &self,
        mut f: F,
        t0: f64,
        y0: SVector<f64, N>,
        t_end: f64,
        stops: &[f64],
        mut after: G,
    ) -> Result<(f64, SVector<f64, N>)>
    where
        F: FnMut(f64, &SVector<f64, N>) -> Result<SVector<f64, N>>,
        G: FnMut(f64, &mut SVector<f64, N>, bool) -> Result<Flow>,
    {
        let dir = if t_end >= t0 { 1.0 } else { -1.0 };
        let mut targets: Vec<f64> = stops
            .iter()
            .copied()
            .filter(|s| (s - t0) * dir > 0.0 && (t_end - s) * dir > 0.0)
            .collect();
        targets.sort_by(|a, b| (a * dir).total_cmp(&(b * dir)));
        targets.dedup();
        targets.push(t_end);

        let (mut t, mut y) = (t0, y0);
        let mut h = self.h_init.min(self.h_max).min((t_end - t0).abs().max(f64::MIN_POSITIVE));
        let mut next = 0;
        let mut steps = 0;
        while next < targets.len() && (targets[next] - t) * dir > 0.0 {
            steps += 1;
            if steps > self.max_steps {
                return Err(Error::StepUnderflow { time: t, step: h });
            }
            let remaining = (targets[next] - t).abs();
            let hit = h >= remaining;
            let trial = if hit { remaining } else { h };
            let h_floor = 1e-14 * t.abs().max(1.0);
            let (y1, err) = match self.step(&mut f, t, &y, dir * trial) {
                Ok(r) => r,
                Err(e) => {
                    if trial <= h_floor {
                        return Err(e);
                    }
                    h = trial * 0.25;
                    continue;
                }
            };
            if err > 1.0 {
                if trial <= h_floor {
                    return Err(Error::StepUnderflow { time: t, step: trial });
                }
                h = trial * (0.9 * err.powf(-1.0 / 15.0)).clamp(0.2, 0.9);
                continue;
            }
            t = if hit { targets[next] } else { t + dir * trial };
            y = y1;
            let grow = if err == 0.0 { 3.0 } else { (0.9 * err.powf(-1.0 / 15.0)).clamp(0.2, 3.0) };
            // a step clipped to a stop says nothing about the natural size
            h = if hit { h.max(trial * grow) } else { trial * grow }.min(self.h_max);
            let at_stop = hit && next + 1 < targets.len();
            if hit {
                next += 1;
            }
            if after(t, &mut y, at_stop)? == Flow::Stop {
                break;
            }
        }
        Ok((t, y))
    }
}

fn midpoint<const N: usize, F>(
    f: &mut F,
    t: f64,
    y: &SVector<f64, N>,
    f0: &SVector<f64, N>,
    big_h: f64,
    n: usize,
) -> Result<SVector<f64, N>>
where
    F: FnMut(f64, &SVector<f64, N>) -> Result<SVector<f64, N>>,
{
    let h = big_h / n as f64;
    let mut z0 = *y;
    let mut z1 = y + f0 * h;
    for m in 1..n {
        let z2 = z0 + f(t + m as f64 * h, &z1)? * (2.0 * h);
        z0 = z1;
        z1 = z2;
    }
    Ok((z0 + z1 + f(t + big_h, &z1)? * h) * 0.5)
}
