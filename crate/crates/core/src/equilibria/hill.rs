//! Hill regions `{U <= c}` and their connected components on a grid.

use std::collections::VecDeque;
use std::io::Write;

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use super::first_critical_value;
use crate::error::{Error, Result};
use crate::model::{effective_potential, effective_potential_unchecked, Primary, SystemConfig};

pub fn hill_membership(q: &Vector2<f64>, c: f64, cfg: &SystemConfig) -> Result<bool> {
    Ok(effective_potential(q, cfg)? <= c)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HillGrid {
    /// The box is `[-half_width, half_width]^2`.
    pub half_width: f64,
    pub n: usize,
}

impl Default for HillGrid {
    fn default() -> Self {
        Self {
            half_width: 3.0,
            n: 800,
        }
    }
}

impl HillGrid {
    pub fn step(&self) -> f64 {
        2.0 * self.half_width / self.n as f64
    }

    pub fn center(&self, i: usize, j: usize) -> Vector2<f64> {
        let h = self.step();
        Vector2::new(
            -self.half_width + (i as f64 + 0.5) * h,
            -self.half_width + (j as f64 + 0.5) * h,
        )
    }

    pub fn cell_of(&self, q: &Vector2<f64>) -> Option<(usize, usize)> {
        let h = self.step();
        let i = ((q[0] + self.half_width) / h).floor();
        let j = ((q[1] + self.half_width) / h).floor();
        let n = self.n as f64;
        if i < 0.0 || j < 0.0 || i >= n || j >= n {
            return None;
        }
        Some((i as usize, j as usize))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellLabel {
    Forbidden,
    Earth,
    Moon,
    Merged,
    Unbounded,
    /// A bounded component around neither primary.
    Bounded,
}

impl CellLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            CellLabel::Forbidden => "forbidden",
            CellLabel::Earth => "earth",
            CellLabel::Moon => "moon",
            CellLabel::Merged => "merged",
            CellLabel::Unbounded => "unbounded",
            CellLabel::Bounded => "bounded",
        }
    }

    fn color(self) -> &'static str {
        match self {
            CellLabel::Forbidden => "#d9d9d9",
            CellLabel::Earth => "#3b7dd8",
            CellLabel::Moon => "#9a9a40",
            CellLabel::Merged => "#6a4fb3",
            CellLabel::Unbounded => "#f4f1e8",
            CellLabel::Bounded => "#c0504d",
        }
    }
}

#[derive(Debug, Clone)]
pub struct HillRegion {
    pub energy: f64,
    pub grid: HillGrid,
    pub mu: f64,
    potential: Vec<f64>,
    labels: Vec<CellLabel>,
    component_count: usize,
}

/// Labels every grid cell by the connected component of `{U <= c}` containing it.
pub fn hill_components(c: f64, cfg: &SystemConfig, grid: HillGrid) -> Result<HillRegion> {
    let mu = cfg.mu();
    if mu > 0.0 && mu < 1.0 {
        let critical = first_critical_value(cfg)?;
        if (c - critical).abs() < 1e-9 {
            return Err(Error::DegenerateLevel {
                energy: c,
                critical,
                tolerance: 1e-9,
            });
        }
    }
    let n = grid.n;
    let idx = |i: usize, j: usize| j * n + i;
    let mut potential = vec![0.0; n * n];
    for j in 0..n {
        for i in 0..n {
            let q = grid.center(i, j);
            // a cell centre sitting on a primary is deep inside the well
            potential[idx(i, j)] = match cfg.check_regular(&q) {
                Ok(()) => effective_potential_unchecked(&q, cfg),
                Err(_) => f64::NEG_INFINITY,
            };
        }
    }

    let mut comp = vec![usize::MAX; n * n];
    let mut count = 0;
    let mut queue = VecDeque::new();
    let mut touches_border = Vec::new();
    for start in 0..n * n {
        if comp[start] != usize::MAX || potential[start] > c {
            continue;
        }
        let id = count;
        count += 1;
        let mut border = false;
        comp[start] = id;
        queue.push_back(start);
        while let Some(cell) = queue.pop_front() {
            let (i, j) = (cell % n, cell / n);
            if i == 0 || j == 0 || i == n - 1 || j == n - 1 {
                border = true;
            }
            for dj in -1i64..=1 {
                for di in -1i64..=1 {
                    let (ni, nj) = (i as i64 + di, j as i64 + dj);
                    if ni < 0 || nj < 0 || ni >= n as i64 || nj >= n as i64 {
                        continue;
                    }
                    let nb = idx(ni as usize, nj as usize);
                    if comp[nb] == usize::MAX && potential[nb] <= c {
                        comp[nb] = id;
                        queue.push_back(nb);
                    }
                }
            }
        }
        touches_border.push(border);
    }

    let seed = |primary: Primary| -> Option<usize> {
        if cfg.mass(primary) == 0.0 {
            return None;
        }
        let (i, j) = grid.cell_of(&cfg.position(primary))?;
        let cell = idx(i, j);
        (comp[cell] != usize::MAX).then_some(comp[cell])
    };
    let earth = seed(Primary::Earth);
    let moon = seed(Primary::Moon);
    let component_label = |id: usize| {
        if touches_border[id] {
            CellLabel::Unbounded
        } else if Some(id) == earth && Some(id) == moon {
            CellLabel::Merged
        } else if Some(id) == earth {
            CellLabel::Earth
        } else if Some(id) == moon {
            CellLabel::Moon
        } else {
            CellLabel::Bounded
        }
    };
    let labels = comp
        .iter()
        .map(|&id| {
            if id == usize::MAX {
                CellLabel::Forbidden
            } else {
                component_label(id)
            }
        })
        .collect();

    Ok(HillRegion {
        energy: c,
        grid,
        mu,
        potential,
        labels,
        component_count: count,
    })
}

impl HillRegion {
    pub fn component_count(&self) -> usize {
        self.component_count
    }

    pub fn label(&self, i: usize, j: usize) -> CellLabel {
        self.labels[j * self.grid.n + i]
    }

    pub fn label_at(&self, q: &Vector2<f64>) -> Option<CellLabel> {
        self.grid.cell_of(q).map(|(i, j)| self.label(i, j))
    }

    pub fn count(&self, label: CellLabel) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }

    /// Centres of all cells carrying `label`.
    pub fn cells(&self, label: CellLabel) -> impl Iterator<Item = Vector2<f64>> + '_ {
        let n = self.grid.n;
        self.labels
            .iter()
            .enumerate()
            .filter(move |(_, &l)| l == label)
            .map(move |(k, _)| self.grid.center(k % n, k / n))
    }

    /// Largest distance from `point` to a cell centre carrying `label`.
    pub fn max_distance(&self, label: CellLabel, point: &Vector2<f64>) -> Option<f64> {
        self.cells(label).map(|q| (q - point).norm()).reduce(f64::max)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "y", "U", "label"])?;
        let n = self.grid.n;
        for (k, label) in self.labels.iter().enumerate() {
            let q = self.grid.center(k % n, k / n);
            w.write_record([
                q[0].to_string(),
                q[1].to_string(),
                self.potential[k].to_string(),
                label.as_str().to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// A flat rendering of the labels, one rectangle per horizontal run.
    pub fn write_svg<W: Write>(&self, mut out: W) -> Result<()> {
        let n = self.grid.n;
        writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {n} {n}" width="{n}" height="{n}" shape-rendering="crispEdges">"#
        )?;
        writeln!(out, "<title>Hill region mu={} c={}</title>", self.mu, self.energy)?;
        for j in 0..n {
            // svg y grows downwards
            let y = n - 1 - j;
            let mut i = 0;
            while i < n {
                let label = self.label(i, j);
                let start = i;
                while i < n && self.label(i, j) == label {
                    i += 1;
                }
                writeln!(
                    out,
                    r#"<rect x="{start}" y="{y}" width="{}" height="1" fill="{}"/>"#,
                    i - start,
                    label.color()
                )?;
            }
        }
        writeln!(out, "</svg>")?;
        Ok(())
    }
}
