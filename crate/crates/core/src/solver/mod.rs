//! Implicit L1-type time stepping for ∂ₜ[k∗(u−u₀)] + c·u − div(A Du) = f on
//! a cell-centred grid, with c·u the ODE-mode relaxation term.
//!
//! Slice m solves (β_{m,m} + c + L) u_m = β_{m,m}u_{m−1} − Σ_{i<m} β_{m,i}(u_i − u_{i−1}) + f,
//! β_{m,i} = [K(t_m − t_{i−1}) − K(t_m − t_i)]/τ with K = 1∗k, so β_{m,i}
//! depends on m − i only.

pub mod coefficients;
pub mod grid;
pub mod linalg;
pub mod mittag_leffler;

use std::f64::consts::PI;
use std::io::Write;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use coefficients::{CoefficientDescriptor, CoefficientField};
pub use grid::{Boundary, SpatialGrid};
pub use mittag_leffler::mittag_leffler;

use crate::error::{Error, Result, ValidationReport};
use crate::kernels::one_star_k_eval;
use crate::measure::Measure;
use crate::volterra::yosida_kernels;
use linalg::CsrMatrix;

/// Relative residual target for every linear solve.
pub const LINEAR_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum InitialData {
    Constant {
        value: f64,
    },
    /// offset + slope·x.
    Linear {
        offset: f64,
        slope: Vec<f64>,
    },
    /// offset + amplitude·Π sin(mode·π·(x − lo)/length).
    Sine {
        amplitude: f64,
        modes: Vec<u32>,
        #[serde(default)]
        offset: f64,
    },
    /// max(0, offset + Σ_k (a_k cos 2πkξ + b_k sin 2πkξ)/k) per axis, with
    /// a_k, b_k uniform in [−amplitude, amplitude] drawn from `seed`.
    RandomFourier {
        seed: u64,
        modes: u32,
        amplitude: f64,
        offset: f64,
    },
    Table {
        values: Vec<f64>,
    },
}

impl InitialData {
    pub fn sample(&self, grid: &SpatialGrid) -> Result<Vec<f64>> {
        let n = grid.total_cells();
        let centers = grid.centers();
        let unit = |x: &[f64], axis: usize| {
            let (lo, hi) = grid.extents[axis];
            (x[axis] - lo) / (hi - lo)
        };
        let values = match self {
            InitialData::Constant { value } => vec![*value; n],
            InitialData::Linear { offset, slope } => centers
                .iter()
                .map(|x| offset + x.iter().zip(slope).map(|(a, b)| a * b).sum::<f64>())
                .collect(),
            InitialData::Sine {
                amplitude,
                modes,
                offset,
            } => centers
                .iter()
                .map(|x| {
                    let prod: f64 = (0..grid.dim)
                        .map(|a| (modes.get(a).copied().unwrap_or(1) as f64 * PI * unit(x, a)).sin())
                        .product();
                    offset + amplitude * prod
                })
                .collect(),
            InitialData::RandomFourier {
                seed,
                modes,
                amplitude,
                offset,
            } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let coeffs: Vec<Vec<(f64, f64)>> = (0..grid.dim.max(1))
                    .map(|_| {
                        (0..*modes)
                            .map(|_| {
                                (
                                    rng.random_range(-*amplitude..=*amplitude),
                                    rng.random_range(-*amplitude..=*amplitude),
                                )
                            })
                            .collect()
                    })
                    .collect();
                centers
                    .iter()
                    .map(|x| {
                        let mut v = *offset;
                        for (axis, axis_coeffs) in coeffs.iter().enumerate().take(grid.dim) {
                            let xi = unit(x, axis);
                            for (k, (a, b)) in axis_coeffs.iter().enumerate() {
                                let kf = (k + 1) as f64;
                                let phase = 2.0 * PI * kf * xi;
                                v += (a * phase.cos() + b * phase.sin()) / kf;
                            }
                        }
                        v.max(0.0)
                    })
                    .collect()
            }
            InitialData::Table { values } => {
                if values.len() != n {
                    return Err(Error::GridMismatch(format!("initial table has {} values for {n} cells", values.len())));
                }
                values.clone()
            }
        };
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("initial data".into()));
        }
        Ok(values)
    }
}

/// Time-independent source term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Forcing {
    Constant { value: f64 },
    Table { values: Vec<f64> },
}

impl Default for Forcing {
    fn default() -> Self {
        Forcing::Constant { value: 0.0 }
    }
}

impl Forcing {
    pub fn sample(&self, grid: &SpatialGrid) -> Result<Vec<f64>> {
        let n = grid.total_cells();
        match self {
            Forcing::Constant { value } => Ok(vec![*value; n]),
            Forcing::Table { values } if values.len() == n => Ok(values.clone()),
            Forcing::Table { values } => Err(Error::GridMismatch(format!(
                "forcing table has {} values for {n} cells",
                values.len()
            ))),
        }
    }
}

/// Which memory kernel drives the time derivative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Memory {
    #[default]
    Exact,
    /// k replaced by the Yosida kernel k_n.
    Yosida { n: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub measure: Measure,
    pub grid: SpatialGrid,
    pub coefficients: CoefficientField,
    pub horizon: f64,
    pub n_steps: usize,
    pub initial: InitialData,
    pub forcing: Forcing,
    /// Coefficient c of the zeroth-order term c·u.
    pub reaction: f64,
    pub memory: Memory,
}

impl Problem {
    /// dim 0: D u + λu = 0, u(0) = u₀.
    pub fn relaxation(measure: Measure, lambda: f64, u0: f64, horizon: f64, n_steps: usize) -> Self {
        Self {
            measure,
            grid: SpatialGrid::ode(),
            coefficients: CoefficientField::identity(0),
            horizon,
            n_steps,
            initial: InitialData::Constant { value: u0 },
            forcing: Forcing::default(),
            reaction: lambda,
            memory: Memory::Exact,
        }
    }

    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::default();
        report.extend_prefixed("/grid", self.grid.validate());
        if self.grid.validate().is_valid() {
            report.extend_prefixed("/coefficients", self.coefficients.validate(&self.grid));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            report.push("/horizon", format!("horizon must be positive, got {}", self.horizon));
        }
        if self.n_steps < 1 {
            report.push("/n_steps", "need at least one step");
        }
        if !(self.reaction >= 0.0 && self.reaction.is_finite()) {
            report.push("/reaction", format!("reaction must be nonnegative, got {}", self.reaction));
        }
        if let Memory::Yosida { n } = self.memory {
            if !(n > 0.0 && n.is_finite()) {
                report.push("/memory/n", format!("Yosida index must be positive, got {n}"));
            }
        }
        report
    }
}

/// β_{m,1..m} for the exact kernel: [K(t_m − t_{i−1}) − K(t_m − t_i)]/τ.
pub fn conv_weights(m: &Measure, step_index: usize, tau: f64) -> Result<Vec<f64>> {
    if step_index == 0 || !(tau > 0.0) {
        return Err(Error::Domain(format!("need m ≥ 1 and τ > 0, got m = {step_index}, τ = {tau}")));
    }
    let t_m = step_index as f64 * tau;
    (1..=step_index)
        .map(|i| {
            let hi = one_star_k_eval(m, t_m - (i - 1) as f64 * tau)?;
            let lo = one_star_k_eval(m, (t_m - i as f64 * tau).max(0.0))?;
            Ok((hi - lo) / tau)
        })
        .collect()
}

/// Cell masses M_d = ∫_{(d−1)τ}^{dτ} k, d = 1..n, so that β_{m,i} = M_{m−i+1}/τ.
fn memory_masses(problem: &Problem, tau: f64) -> Result<Vec<f64>> {
    let n = problem.n_steps;
    match problem.memory {
        Memory::Exact => {
            let cumulative = (0..=n)
                .into_par_iter()
                .map(|d| one_star_k_eval(&problem.measure, d as f64 * tau))
                .collect::<Result<Vec<_>>>()?;
            Ok(cumulative.windows(2).map(|w| w[1] - w[0]).collect())
        }
        Memory::Yosida { n: index } => {
            let y = yosida_kernels(&problem.measure, index, tau, n.max(2))?;
            Ok(y.k.masses()[..n].to_vec())
        }
    }
}

/// Flux-form operator L and the Dirichlet boundary load.
fn assemble_operator(grid: &SpatialGrid, coefficients: &CoefficientField) -> (Vec<Vec<(usize, f64)>>, Vec<f64>) {
    let n = grid.total_cells();
    let mut rows: Vec<Vec<(usize, f64)>> = (0..n).map(|c| vec![(c, 0.0)]).collect();
    let mut load = vec![0.0; n];
    if grid.dim == 0 {
        return (rows, load);
    }
    let diags: Vec<Vec<f64>> = (0..n).map(|c| coefficients.diag(grid, c)).collect();
    for c in 0..n {
        let idx = grid.multi_index(c);
        for axis in 0..grid.dim {
            let h2 = grid.spacing(axis).powi(2);
            for (side, face) in [(-1i64, 2 * axis), (1, 2 * axis + 1)] {
                let j = idx[axis] as i64 + side;
                if j < 0 || j >= grid.n_cells[axis] as i64 {
                    if let Boundary::Dirichlet { value } = grid.boundary[face] {
                        let w = 2.0 * diags[c][axis] / h2;
                        rows[c][0].1 += w;
                        load[c] += w * value;
                    }
                    continue;
                }
                let mut nidx = idx.clone();
                nidx[axis] = j as usize;
                let nb = if grid.dim == 1 { nidx[0] } else { grid.index(nidx[0], nidx[1]) };
                let w = 0.5 * (diags[c][axis] + diags[nb][axis]) / h2;
                rows[c][0].1 += w;
                rows[c].push((nb, -w));
            }
        }
    }
    (rows, load)
}

#[derive(Debug, Clone, Serialize)]
pub struct SolutionField {
    pub grid: SpatialGrid,
    pub step: f64,
    pub times: Vec<f64>,
    /// values[m][cell], m = 0 is the initial slice.
    pub values: Vec<Vec<f64>>,
    pub u0: Vec<f64>,
    pub forcing: Vec<f64>,
    /// Relative linear residual per step.
    pub residuals: Vec<f64>,
    /// Whether the step matrix passed the M-matrix check.
    pub m_matrix: bool,
    pub wall_time_s: f64,
}

impl SolutionField {
    /// Wraps externally computed slices; `values[0]` is taken as u₀.
    pub fn from_slices(grid: SpatialGrid, step: f64, values: Vec<Vec<f64>>, forcing: Vec<f64>) -> Result<Self> {
        let grid = grid.checked()?;
        let n = grid.total_cells();
        if values.is_empty() || values.iter().any(|v| v.len() != n) || forcing.len() != n {
            return Err(Error::GridMismatch(format!("every slice and the forcing need {n} cells")));
        }
        if !(step > 0.0) || values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("slices must be finite with a positive step".into()));
        }
        Ok(Self {
            times: (0..values.len()).map(|m| m as f64 * step).collect(),
            u0: values[0].clone(),
            residuals: vec![0.0; values.len() - 1],
            grid,
            step,
            values,
            forcing,
            m_matrix: true,
            wall_time_s: 0.0,
        })
    }

    pub fn n_steps(&self) -> usize {
        self.values.len() - 1
    }

    pub fn last(&self) -> &[f64] {
        self.values.last().expect("solution has the initial slice")
    }

    pub fn min(&self) -> f64 {
        self.values.iter().flatten().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }

    /// Largest |self − other| over all slices and cells.
    pub fn sup_distance(&self, other: &SolutionField) -> Result<f64> {
        if self.values.len() != other.values.len() || self.u0.len() != other.u0.len() {
            return Err(Error::GridMismatch("solution shapes differ".into()));
        }
        Ok(self
            .values
            .iter()
            .flatten()
            .zip(other.values.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// CSV with columns t, i[, j], value; numbers in shortest round-trip form.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        header.extend(["i", "j"].iter().take(self.grid.dim).map(|s| s.to_string()));
        header.push("value".into());
        w.write_record(&header)?;
        for (t, slice) in self.times.iter().zip(&self.values) {
            for (c, v) in slice.iter().enumerate() {
                let mut rec = vec![format!("{t:?}")];
                rec.extend(self.grid.multi_index(c).iter().map(|i| i.to_string()));
                rec.push(format!("{v:?}"));
                w.write_record(&rec)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Advances a problem one slice at a time.
pub struct Stepper {
    grid: SpatialGrid,
    tau: f64,
    masses: Vec<f64>,
    matrix: CsrMatrix,
    tridiagonal: Option<(Vec<f64>, Vec<f64>, Vec<f64>)>,
    load: Vec<f64>,
    forcing: Vec<f64>,
    u0: Vec<f64>,
    slices: Vec<Vec<f64>>,
    increments: Vec<Vec<f64>>,
    residuals: Vec<f64>,
    m_matrix: bool,
    max_steps: usize,
}

impl Stepper {
    pub fn new(problem: &Problem) -> Result<Self> {
        problem.validate().into_result()?;
        let tau = problem.horizon / problem.n_steps as f64;
        let masses = memory_masses(problem, tau)?;
        let (mut rows, load) = assemble_operator(&problem.grid, &problem.coefficients);
        let diag_shift = masses[0] / tau + problem.reaction;
        for row in rows.iter_mut() {
            row[0].1 += diag_shift;
        }
        let matrix = CsrMatrix::from_rows(rows);
        let m_matrix = matrix.is_m_matrix();
        let tridiagonal = (problem.grid.dim <= 1).then(|| {
            let n = matrix.n;
            let (mut a, mut b, mut c) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
            for i in 0..n {
                for (j, v) in matrix.row(i) {
                    if j == i {
                        b[i] = v;
                    } else if j + 1 == i {
                        a[i] = v;
                    } else {
                        c[i] = v;
                    }
                }
            }
            (a, b, c)
        });
        let u0 = problem.initial.sample(&problem.grid)?;
        let forcing = problem.forcing.sample(&problem.grid)?;
        Ok(Self {
            grid: problem.grid.clone(),
            tau,
            masses,
            matrix,
            tridiagonal,
            load,
            forcing,
            slices: vec![u0.clone()],
            u0,
            increments: Vec::new(),
            residuals: Vec::new(),
            m_matrix,
            max_steps: problem.n_steps,
        })
    }

    /// Index of the most recent slice.
    pub fn current(&self) -> usize {
        self.slices.len() - 1
    }

    pub fn weights_are_positive(&self) -> bool {
        self.masses.iter().all(|m| *m > 0.0)
    }

    /// Computes slice m = current + 1.
    pub fn step(&mut self) -> Result<&[f64]> {
        let m = self.slices.len();
        if m > self.max_steps {
            return Err(Error::Domain(format!("horizon reached after {} steps", self.max_steps)));
        }
        let n = self.u0.len();
        let tau = self.tau;
        let prev = &self.slices[m - 1];
        let mut rhs: Vec<f64> = (0..n)
            .map(|c| self.masses[0] / tau * prev[c] + self.forcing[c] + self.load[c])
            .collect();
        // History: Σ_{i=1}^{m−1} β_{m,i}(u_i − u_{i−1}) with β_{m,i} = M_{m−i+1}/τ.
        let history = |c: usize| -> f64 {
            let mut s = 0.0;
            for (i, d) in self.increments.iter().enumerate() {
                s += self.masses[m - 1 - i] * d[c];
            }
            s / tau
        };
        if n >= 256 {
            rhs.par_iter_mut().enumerate().for_each(|(c, r)| *r -= history(c));
        } else {
            rhs.iter_mut().enumerate().for_each(|(c, r)| *r -= history(c));
        }
        let next = match &self.tridiagonal {
            Some((a, b, c)) => linalg::thomas(a, b, c, &rhs)?,
            None => {
                let mut x = prev.clone();
                linalg::conjugate_gradient(&self.matrix, &rhs, &mut x, LINEAR_TOL, 10 * n)?;
                x
            }
        };
        let residual = self.matrix.relative_residual(&next, &rhs);
        if !(residual <= LINEAR_TOL) {
            return Err(Error::LinearSolver {
                iterations: 0,
                residual,
            });
        }
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("solution at step {m}")));
        }
        self.residuals.push(residual);
        self.increments.push(next.iter().zip(prev).map(|(a, b)| a - b).collect());
        self.slices.push(next);
        Ok(self.slices.last().expect("just pushed"))
    }

    pub fn finish(self, wall_time_s: f64) -> SolutionField {
        let times = (0..self.slices.len()).map(|m| m as f64 * self.tau).collect();
        SolutionField {
            grid: self.grid,
            step: self.tau,
            times,
            values: self.slices,
            u0: self.u0,
            forcing: self.forcing,
            residuals: self.residuals,
            m_matrix: self.m_matrix,
            wall_time_s,
        }
    }
}

/// Runs the full trajectory on (0, T].
pub fn solve(problem: &Problem) -> Result<SolutionField> {
    let start = Instant::now();
    let mut stepper = Stepper::new(problem)?;
    for _ in 0..problem.n_steps {
        stepper.step()?;
    }
    Ok(stepper.finish(start.elapsed().as_secs_f64()))
}
