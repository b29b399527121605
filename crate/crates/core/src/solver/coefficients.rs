use serde::{Deserialize, Serialize};

use super::grid::SpatialGrid;
use crate::error::{Result, ValidationReport};

/// Diagonal diffusion tensors. Off-diagonal entries are not supported: the
/// five-point flux stencil stays an M-matrix only for diagonal A.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum CoefficientDescriptor {
    /// The same diagonal everywhere.
    Constant { diag: Vec<f64> },
    /// Scalar multiples of the identity alternating on blocks of `block` cells per axis.
    Checkerboard { low: f64, high: f64, block: usize },
    /// One diagonal per cell, in flat cell order.
    Table { diag: Vec<Vec<f64>> },
}

/// A(x) with declared bounds: ‖A‖_F ≤ Λ and ξᵀAξ ≥ ν|ξ|².
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientField {
    #[serde(flatten)]
    pub descriptor: CoefficientDescriptor,
    pub lambda: f64,
    pub nu: f64,
}

impl CoefficientField {
    pub fn identity(dim: usize) -> Self {
        Self {
            descriptor: CoefficientDescriptor::Constant { diag: vec![1.0; dim] },
            lambda: (dim.max(1) as f64).sqrt(),
            nu: 1.0,
        }
    }

    pub fn constant(diag: Vec<f64>, lambda: f64, nu: f64) -> Self {
        Self {
            descriptor: CoefficientDescriptor::Constant { diag },
            lambda,
            nu,
        }
    }

    /// Diagonal of A at `cell`.
    pub fn diag(&self, grid: &SpatialGrid, cell: usize) -> Vec<f64> {
        match &self.descriptor {
            CoefficientDescriptor::Constant { diag } => diag.clone(),
            CoefficientDescriptor::Checkerboard { low, high, block } => {
                let parity: usize = grid.multi_index(cell).iter().map(|i| i / (*block).max(1)).sum();
                let v = if parity.is_multiple_of(2) { *low } else { *high };
                vec![v; grid.dim]
            }
            CoefficientDescriptor::Table { diag } => diag[cell].clone(),
        }
    }

    /// Checks shapes and the bounds at every cell centre with axis and
    /// diagonal probe directions.
    pub fn validate(&self, grid: &SpatialGrid) -> ValidationReport {
        let mut report = ValidationReport::default();
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            report.push("/lambda", format!("bound Λ must be positive, got {}", self.lambda));
        }
        if !(self.nu > 0.0 && self.nu.is_finite()) {
            report.push("/nu", format!("ellipticity ν must be positive, got {}", self.nu));
        }
        if grid.dim == 0 {
            return report;
        }
        match &self.descriptor {
            CoefficientDescriptor::Constant { diag } if diag.len() != grid.dim => {
                report.push("/diag", format!("expected {} entries, got {}", grid.dim, diag.len()));
                return report;
            }
            CoefficientDescriptor::Checkerboard { block, .. } if *block == 0 => {
                report.push("/block", "block size must be positive");
                return report;
            }
            CoefficientDescriptor::Table { diag } => {
                if diag.len() != grid.total_cells() {
                    report.push("/diag", format!("expected {} cells, got {}", grid.total_cells(), diag.len()));
                    return report;
                }
                if let Some(i) = diag.iter().position(|d| d.len() != grid.dim) {
                    report.push(format!("/diag/{i}"), format!("expected {} entries", grid.dim));
                    return report;
                }
            }
            _ => {}
        }
        for cell in 0..grid.total_cells() {
            let d = self.diag(grid, cell);
            let frob = d.iter().map(|a| a * a).sum::<f64>().sqrt();
            if !(frob <= self.lambda * (1.0 + 1e-12)) {
                report.push("/lambda", format!("‖A‖_F = {frob} exceeds Λ = {} at cell {cell}", self.lambda));
                break;
            }
            let axis_min = d.iter().copied().fold(f64::INFINITY, f64::min);
            let diagonal_probe = d.iter().sum::<f64>() / d.len() as f64;
            if !(axis_min.min(diagonal_probe) >= self.nu * (1.0 - 1e-12)) {
                report.push("/nu", format!("ellipticity {axis_min} below ν = {} at cell {cell}", self.nu));
                break;
            }
        }
        report
    }

    pub fn checked(self, grid: &SpatialGrid) -> Result<Self> {
        self.validate(grid).into_result()?;
        Ok(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::grid::Boundary;

    #[test]
    fn checkerboard_alternates() {
        let g = SpatialGrid::rectangle((0.0, 1.0), (0.0, 1.0), (4, 4), [Boundary::NeumannZero; 4]);
        let c = CoefficientField {
            descriptor: CoefficientDescriptor::Checkerboard {
                low: 1.0,
                high: 3.0,
                block: 2,
            },
            lambda: 5.0,
            nu: 1.0,
        };
        assert_eq!(c.diag(&g, g.index(0, 0)), vec![1.0, 1.0]);
        assert_eq!(c.diag(&g, g.index(2, 0)), vec![3.0, 3.0]);
        assert_eq!(c.diag(&g, g.index(2, 2)), vec![1.0, 1.0]);
        assert!(c.validate(&g).is_valid());
    }

    #[test]
    fn bounds_are_enforced() {
        let g = SpatialGrid::interval(0.0, 1.0, 4, Boundary::NeumannZero, Boundary::NeumannZero);
        let too_big = CoefficientField::constant(vec![2.0], 1.0, 0.5);
        assert_eq!(too_big.validate(&g).violations[0].path, "/lambda");
        let degenerate = CoefficientField::constant(vec![0.1], 1.0, 0.5);
        assert_eq!(degenerate.validate(&g).violations[0].path, "/nu");
        assert!(CoefficientField::identity(1).validate(&g).is_valid());
    }
}
