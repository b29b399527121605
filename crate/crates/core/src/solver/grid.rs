use serde::{Deserialize, Serialize};

use crate::error::{Result, ValidationReport};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Boundary {
    Dirichlet { value: f64 },
    NeumannZero,
}

/// Cell-centred tensor grid on an interval or rectangle; `dim = 0` is a
/// single cell with no transport (ODE mode).
///
/// `boundary` lists faces as [x_low, x_high, y_low, y_high].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialGrid {
    pub dim: usize,
    #[serde(default)]
    pub extents: Vec<(f64, f64)>,
    #[serde(default)]
    pub n_cells: Vec<usize>,
    #[serde(default)]
    pub boundary: Vec<Boundary>,
}

impl SpatialGrid {
    pub fn ode() -> Self {
        Self {
            dim: 0,
            extents: Vec::new(),
            n_cells: Vec::new(),
            boundary: Vec::new(),
        }
    }

    pub fn interval(lo: f64, hi: f64, n: usize, left: Boundary, right: Boundary) -> Self {
        Self {
            dim: 1,
            extents: vec![(lo, hi)],
            n_cells: vec![n],
            boundary: vec![left, right],
        }
    }

    pub fn rectangle(x: (f64, f64), y: (f64, f64), n: (usize, usize), boundary: [Boundary; 4]) -> Self {
        Self {
            dim: 2,
            extents: vec![x, y],
            n_cells: vec![n.0, n.1],
            boundary: boundary.to_vec(),
        }
    }

    /// Same geometry and boundary data with a different cell count per axis.
    pub fn with_cells(&self, n: usize) -> Self {
        Self {
            n_cells: vec![n; self.dim],
            ..self.clone()
        }
    }

    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::default();
        if self.dim > 2 {
            report.push("/dim", format!("dimension {} not in {{0,1,2}}", self.dim));
            return report;
        }
        if self.extents.len() != self.dim {
            report.push("/extents", format!("expected {} extents, got {}", self.dim, self.extents.len()));
        }
        if self.n_cells.len() != self.dim {
            report.push("/n_cells", format!("expected {} cell counts, got {}", self.dim, self.n_cells.len()));
        }
        if self.boundary.len() != 2 * self.dim {
            report.push("/boundary", format!("expected {} faces, got {}", 2 * self.dim, self.boundary.len()));
        }
        for (i, (lo, hi)) in self.extents.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && hi > lo) {
                report.push(format!("/extents/{i}"), format!("empty or non-finite extent ({lo}, {hi})"));
            }
        }
        for (i, n) in self.n_cells.iter().enumerate() {
            if *n < 3 {
                report.push(format!("/n_cells/{i}"), format!("need at least 3 cells per axis, got {n}"));
            }
        }
        for (i, b) in self.boundary.iter().enumerate() {
            if let Boundary::Dirichlet { value } = b {
                if !value.is_finite() {
                    report.push(format!("/boundary/{i}/value"), "non-finite boundary value");
                }
            }
        }
        report
    }

    pub fn checked(self) -> Result<Self> {
        self.validate().into_result()?;
        Ok(self)
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        let (lo, hi) = self.extents[axis];
        (hi - lo) / self.n_cells[axis] as f64
    }

    pub fn total_cells(&self) -> usize {
        self.n_cells.iter().product()
    }

    /// Row-major index: x varies fastest.
    pub fn index(&self, ix: usize, iy: usize) -> usize {
        ix + iy * self.n_cells.first().copied().unwrap_or(1)
    }

    /// Per-axis indices of a flat cell index.
    pub fn multi_index(&self, cell: usize) -> Vec<usize> {
        match self.dim {
            0 => Vec::new(),
            1 => vec![cell],
            _ => vec![cell % self.n_cells[0], cell / self.n_cells[0]],
        }
    }

    pub fn center(&self, cell: usize) -> Vec<f64> {
        self.multi_index(cell)
            .into_iter()
            .enumerate()
            .map(|(axis, i)| self.extents[axis].0 + (i as f64 + 0.5) * self.spacing(axis))
            .collect()
    }

    pub fn centers(&self) -> Vec<Vec<f64>> {
        (0..self.total_cells()).map(|c| self.center(c)).collect()
    }
}
