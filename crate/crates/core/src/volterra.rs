//! Discrete convolution algebra on the node grid t_j = jτ.
//!
//! A [`DiscreteKernel`] carries node samples and, separately, the mass of every
//! cell ((j−1)τ, jτ]. Convolutions pair cell averages, so a weakly singular
//! kernel only needs its exact cell masses to be integrated correctly; node
//! samples are never evaluated at the origin.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernels::{KernelGrid, KernelKind};
use crate::measure::Measure;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscreteKernel {
    step: f64,
    values: Vec<f64>,
    masses: Vec<f64>,
    origin: Option<f64>,
}

impl DiscreteKernel {
    /// Node samples at t_j = jτ, j = 1..N. Interior cell masses come from the
    /// trapezoid rule; the first cell assumes a power law fitted through the
    /// first two samples when they decrease, and linear extrapolation otherwise.
    pub fn new(step: f64, values: Vec<f64>) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::Domain(format!("step must be positive, got {step}")));
        }
        if values.len() < 2 {
            return Err(Error::Domain(format!("need at least 2 samples, got {}", values.len())));
        }
        if let Some(j) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("sample {} = {}", j + 1, values[j])));
        }
        let mut masses = Vec::with_capacity(values.len());
        masses.push(first_cell_mass(step, values[0], values[1]));
        masses.extend(values.windows(2).map(|w| 0.5 * step * (w[0] + w[1])));
        Ok(Self {
            step,
            values,
            masses,
            origin: None,
        })
    }

    pub fn from_fn<F: Fn(f64) -> f64>(step: f64, n: usize, f: F) -> Result<Self> {
        Self::new(step, (1..=n).map(|j| f(j as f64 * step)).collect())
    }

    pub fn constant(step: f64, n: usize, c: f64) -> Result<Self> {
        Ok(Self::new(step, vec![c; n])?.with_origin(c))
    }

    /// Builds a kernel from cell averages; node values are the mean of the two
    /// neighbouring cells, linearly extrapolated at the last node.
    pub fn from_averages(step: f64, averages: Vec<f64>) -> Result<Self> {
        let n = averages.len();
        if n < 2 {
            return Err(Error::Domain(format!("need at least 2 cells, got {n}")));
        }
        let mut values: Vec<f64> = averages.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        values.push(1.5 * averages[n - 1] - 0.5 * averages[n - 2]);
        let masses = averages.iter().map(|a| a * step).collect();
        let k = Self {
            step,
            values,
            masses,
            origin: None,
        };
        k.check_finite()?;
        Ok(k)
    }

    /// Replaces the cell masses, e.g. with exact antiderivative differences.
    pub fn with_masses(mut self, masses: Vec<f64>) -> Result<Self> {
        if masses.len() != self.values.len() {
            return Err(Error::GridMismatch(format!(
                "{} masses for {} samples",
                masses.len(),
                self.values.len()
            )));
        }
        self.masses = masses;
        self.check_finite()?;
        Ok(self)
    }

    /// Sets the finite value at t = 0 and integrates the first cell by the trapezoid rule.
    pub fn with_origin(mut self, origin: f64) -> Self {
        self.masses[0] = 0.5 * self.step * (origin + self.values[0]);
        self.origin = Some(origin);
        self
    }

    /// Keeps the masses but records a value at t = 0.
    pub fn with_origin_value(mut self, origin: f64) -> Self {
        self.origin = Some(origin);
        self
    }

    fn check_finite(&self) -> Result<()> {
        if let Some(j) = self.values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("sample {} = {}", j + 1, self.values[j])));
        }
        if let Some(j) = self.masses.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("cell {} mass = {}", j + 1, self.masses[j])));
        }
        Ok(())
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn horizon(&self) -> f64 {
        self.step * self.values.len() as f64
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn origin(&self) -> Option<f64> {
        self.origin
    }

    /// Node time of sample index `j` (0-based), i.e. (j+1)τ.
    pub fn time(&self, j: usize) -> f64 {
        (j + 1) as f64 * self.step
    }

    pub fn averages(&self) -> Vec<f64> {
        self.masses.iter().map(|m| m / self.step).collect()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            step: self.step,
            values: self.values.iter().map(|v| c * v).collect(),
            masses: self.masses.iter().map(|v| c * v).collect(),
            origin: self.origin.map(|v| c * v),
        }
    }

    /// The first `n` cells.
    pub fn truncated(&self, n: usize) -> Self {
        let n = n.min(self.len());
        Self {
            step: self.step,
            values: self.values[..n].to_vec(),
            masses: self.masses[..n].to_vec(),
            origin: self.origin,
        }
    }

    /// ∫₀ᵀ |x| approximated by the absolute cell masses.
    pub fn l1_norm(&self) -> f64 {
        self.masses.iter().map(|m| m.abs()).sum()
    }

    /// Cellwise L¹ distance Σ|∫_cell (a − b)|.
    pub fn l1_distance(&self, other: &Self) -> Result<f64> {
        self.check_grid(other)?;
        Ok(self.masses.iter().zip(&other.masses).map(|(a, b)| (a - b).abs()).sum())
    }

    fn check_grid(&self, other: &Self) -> Result<()> {
        if self.len() != other.len() || (self.step - other.step).abs() > 1e-14 * self.step {
            return Err(Error::GridMismatch(format!(
                "({} samples, step {}) vs ({} samples, step {})",
                self.len(),
                self.step,
                other.len(),
                other.step
            )));
        }
        Ok(())
    }
}

fn first_cell_mass(step: f64, v1: f64, v2: f64) -> f64 {
    if v1 > 0.0 && v2 > 0.0 && v2 < v1 {
        let e = (v2 / v1).log2().max(-0.999);
        v1 * step / (1.0 + e)
    } else {
        0.5 * step * ((2.0 * v1 - v2) + v1)
    }
}

impl KernelGrid {
    /// Converts to the convolution representation with exact cell masses
    /// taken from the antiderivative of the kernel.
    pub fn to_discrete(&self, m: &Measure) -> Result<DiscreteKernel> {
        let tau = self.step;
        let kernel = DiscreteKernel::new(tau, self.values.clone())?;
        let n = self.len();
        if self.kind == KernelKind::OneStarK {
            return Ok(kernel.with_origin(0.0));
        }
        let cumulative = (0..=n)
            .into_par_iter()
            .map(|j| antiderivative(m, self.kind, j as f64 * tau))
            .collect::<Result<Vec<_>>>()?;
        let masses = cumulative.windows(2).map(|w| w[1] - w[0]).collect();
        kernel.with_masses(masses)
    }
}

/// Node values of the convolution of the two cell-average step functions:
/// c_j = Σ_{i=1}^{j} A_i B_{j+1−i} / τ.
fn conv_nodes(a: &[f64], b: &[f64], tau: f64) -> Vec<f64> {
    (0..a.len())
        .into_par_iter()
        .map(|j| {
            let mut s = 0.0;
            for i in 0..=j {
                s += a[i] * b[j - i];
            }
            s / tau
        })
        .collect()
}

/// (a∗b)(t_j) = ∫₀^{t_j} a(t_j − s) b(s) ds on the shared grid.
///
/// The result is exact for the step functions built from the cell masses of
/// `a` and `b`; that convolution is piecewise linear and vanishes at 0, so its
/// own cell masses are trapezoidal.
pub fn conv(a: &DiscreteKernel, b: &DiscreteKernel) -> Result<DiscreteKernel> {
    a.check_grid(b)?;
    let tau = a.step;
    let values = conv_nodes(&a.masses, &b.masses, tau);
    Ok(DiscreteKernel::new(tau, values)?.with_origin(0.0))
}

/// Residual of the discrete equations solved by [`solve_volterra_second_kind`],
/// max_j |x̄_j + λ(x∗kernel)(t_j) − ḡ_j| relative to max|ḡ|.
pub fn volterra_residual(x: &DiscreteKernel, g: &DiscreteKernel, kernel: &DiscreteKernel, lambda: f64) -> Result<f64> {
    let c = conv(x, kernel)?;
    let gbar = g.averages();
    let scale = gbar.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let worst = x
        .averages()
        .iter()
        .zip(&c.values)
        .zip(&gbar)
        .map(|((xa, cv), ga)| (xa + lambda * cv - ga).abs())
        .fold(0.0f64, f64::max);
    Ok(worst / scale)
}

/// Solves x + λ(x∗kernel) = g for the cell averages of x.
///
/// Cell j carries x̄_j + λ(x∗kernel)(t_j) = ḡ_j, with the convolution taken
/// exactly for step-function x and evaluated at the right end of the cell.
/// The one-sided rule keeps the discrete resolvent positive and monotone when
/// λK₁ ≫ 1; a two-sided average oscillates there. Forward substitution with
/// diagonal 1 + λK₁, K₁ the first cell mass of the kernel.
pub fn solve_volterra_second_kind(g: &DiscreteKernel, kernel: &DiscreteKernel, lambda: f64) -> Result<DiscreteKernel> {
    g.check_grid(kernel)?;
    let tau = g.step;
    let k = &kernel.masses;
    let diag = 1.0 + lambda * k[0];
    if !(diag.abs() > 1e-14) || !diag.is_finite() {
        return Err(Error::DegenerateVolterra { node: 1, diagonal: diag });
    }
    let n = g.len();
    let gbar = g.averages();
    let mut x = vec![0.0; n];
    for j in 0..n {
        let mut s = 0.0;
        for i in 1..=j {
            s += k[i] * x[j - i];
        }
        x[j] = (gbar[j] - lambda * s) / diag;
        if !x[j].is_finite() {
            return Err(Error::NonFinite(format!("Volterra solution at cell {}", j + 1)));
        }
    }
    DiscreteKernel::from_averages(tau, x)
}

/// Solves the first-kind equation (kernel∗x)(t_j) = g(t_j) by collocation at
/// the nodes, for the cell averages of x.
pub fn solve_volterra_first_kind(g: &DiscreteKernel, kernel: &DiscreteKernel) -> Result<DiscreteKernel> {
    g.check_grid(kernel)?;
    let tau = g.step;
    let k = &kernel.masses;
    if !(k[0].abs() > 0.0) {
        return Err(Error::DegenerateVolterra { node: 1, diagonal: k[0] });
    }
    let n = g.len();
    let mut x = vec![0.0; n];
    for j in 0..n {
        let mut s = 0.0;
        for i in 1..=j {
            s += k[i] * x[j - i];
        }
        x[j] = (g.values[j] - s) / k[0];
    }
    DiscreteKernel::from_averages(tau, x)
}

/// The discrete partner of k: cell averages of l from k∗l = 1 at every node.
pub fn sonine_partner_oracle(k: &DiscreteKernel) -> Result<DiscreteKernel> {
    let one = DiscreteKernel::constant(k.step, k.len(), 1.0)?;
    solve_volterra_first_kind(&one, k)
}

/// Cell averages of the partner l of μ's kernel k on t_j = jτ, j = 1..n.
///
/// The step-function solution of k∗l = 1 carries an O(τ/t) error from the
/// singular first cell; solving on τ, τ/2 and τ/4 and extrapolating twice
/// (orders 1 and 2) removes it.
pub fn sonine_oracle(m: &Measure, step: f64, n: usize) -> Result<DiscreteKernel> {
    let solve = |refine: usize| -> Result<Vec<f64>> {
        let tau = step / refine as f64;
        let k = KernelGrid::sample(m, KernelKind::K, tau, n * refine)?.to_discrete(m)?;
        let fine = sonine_partner_oracle(&k)?.averages();
        Ok(fine.chunks(refine).map(|c| c.iter().sum::<f64>() / refine as f64).collect())
    };
    let (x1, x2, x4) = (solve(1)?, solve(2)?, solve(4)?);
    let averages = (0..n)
        .map(|j| {
            let r1 = 2.0 * x2[j] - x1[j];
            let r2 = 2.0 * x4[j] - x2[j];
            (4.0 * r2 - r1) / 3.0
        })
        .collect();
    DiscreteKernel::from_averages(step, averages)
}

/// (k∗l)(t_j), j = 1..n, for μ's kernel pair.
pub fn sonine_product(m: &Measure, step: f64, n: usize) -> Result<Vec<f64>> {
    kernel_product(m, KernelKind::K, KernelKind::L, step, n)
}

/// (a∗b)(t_j), j = 1..n, for two kernels of μ.
///
/// Cell-mass products carry an O(τ/t) error, so the convolution is formed
/// from exact masses on τ, τ/2 and τ/4 and extrapolated twice. Antiderivatives
/// are evaluated once on the finest grid. 1∗k has no closed antiderivative
/// and is rejected.
pub fn kernel_product(m: &Measure, a: KernelKind, b: KernelKind, step: f64, n: usize) -> Result<Vec<f64>> {
    if n == 0 || !(step > 0.0 && step.is_finite()) {
        return Err(Error::Domain(format!("need n ≥ 1 and a positive step, got n = {n}, step = {step}")));
    }
    let fine = step / 4.0;
    let nodes = 4 * n;
    let cumulative = |kind: KernelKind| {
        (0..=nodes)
            .into_par_iter()
            .map(|j| antiderivative(m, kind, j as f64 * fine))
            .collect::<Result<Vec<_>>>()
    };
    let (big_a, big_b) = (cumulative(a)?, cumulative(b)?);
    let level = |refine: usize| -> Vec<f64> {
        let stride = 4 / refine;
        let masses = |cum: &[f64]| -> Vec<f64> {
            (0..n * refine).map(|i| cum[(i + 1) * stride] - cum[i * stride]).collect()
        };
        let c = conv_nodes(&masses(&big_a), &masses(&big_b), step / refine as f64);
        (0..n).map(|j| c[(j + 1) * refine - 1]).collect()
    };
    let (x1, x2, x4) = (level(1), level(2), level(4));
    Ok((0..n)
        .map(|j| {
            let r1 = 2.0 * x2[j] - x1[j];
            let r2 = 2.0 * x4[j] - x2[j];
            (4.0 * r2 - r1) / 3.0
        })
        .collect())
}

/// ∫₀ᵗ of the kernel, 0 at t = 0.
fn antiderivative(m: &Measure, kind: KernelKind, t: f64) -> Result<f64> {
    if t == 0.0 {
        return Ok(0.0);
    }
    match kind {
        KernelKind::K => crate::kernels::one_star_k_eval(m, t),
        KernelKind::K1 => {
            let log_t = t.ln();
            m.mu_integral(|alpha| ((1.0 - alpha) * log_t).exp() / (1.0 - alpha))
        }
        KernelKind::OneStarK => Err(Error::Domain("1∗k has no closed antiderivative".into())),
        KernelKind::L => crate::kernels::one_star_r_theta_eval(m, t, 0.0),
        KernelKind::RTheta { theta } => crate::kernels::one_star_r_theta_eval(m, t, theta),
    }
}

/// The Yosida family for one n: h_n solves h_n + n(h_n∗l) = n·l, s_n solves
/// s_n + n(s_n∗l) = 1, and k_n = n·s_n.
#[derive(Debug, Clone, Serialize)]
pub struct YosidaKernels {
    pub n: f64,
    pub h: DiscreteKernel,
    pub s: DiscreteKernel,
    pub k: DiscreteKernel,
}

impl YosidaKernels {
    /// max_j |(k∗h_n)(t_j) − k_n(t_j)| relative to k_n(t_1), with `k` the
    /// discretized kernel on the same grid.
    pub fn consistency(&self, k: &DiscreteKernel) -> Result<f64> {
        let kh = conv(k, &self.h)?;
        let scale = self.k.values[0].abs().max(f64::MIN_POSITIVE);
        Ok(kh
            .values
            .iter()
            .zip(&self.k.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
            / scale)
    }
}

/// Builds h_n, s_n and k_n from the discretized partner l.
pub fn yosida_from_partner(l: &DiscreteKernel, n: f64) -> Result<YosidaKernels> {
    if !(n > 0.0 && n.is_finite()) {
        return Err(Error::Domain(format!("Yosida index must be positive, got {n}")));
    }
    let one = DiscreteKernel::constant(l.step, l.len(), 1.0)?;
    let h = solve_volterra_second_kind(&l.scaled(n), l, n)?;
    let s = solve_volterra_second_kind(&one, l, n)?.with_origin_value(1.0);
    let k = s.scaled(n);
    Ok(YosidaKernels { n, h, s, k })
}

/// Yosida kernels of μ for index n on t_j = jτ, j = 1..len.
pub fn yosida_kernels(m: &Measure, n: f64, step: f64, len: usize) -> Result<YosidaKernels> {
    let l = KernelGrid::sample(m, KernelKind::L, step, len)?.to_discrete(m)?;
    yosida_from_partner(&l, n)
}

#[derive(Debug, Clone, Serialize)]
pub struct IdentityReport {
    /// Interior nodes t_1..t_{N−1}.
    pub times: Vec<f64>,
    pub lhs: Vec<f64>,
    pub rhs: Vec<f64>,
    pub remainder: Vec<f64>,
    /// max |lhs − rhs| over interior nodes.
    pub residual: f64,
    pub remainder_min: f64,
    /// Nodes where the remainder falls below −1e-10.
    pub negative_remainders: usize,
}

/// Checks the identity
/// H′(u)·(k∗u)′ = (k∗H(u))′ + (−H(u) + H′(u)u)·k + ∫₀ᵗ G_t(u(t−s))(−k̇(s)) ds,
/// G_t(v) = H(v) − H(u(t)) − H′(u(t))(v − u(t)), for a kernel bounded at 0.
///
/// `u` holds u(t_0..t_N). Convolutions use the node trapezoid rule,
/// derivatives centered differences, and k in the middle term is the centered
/// difference of 1∗k so that constant u balances exactly.
pub fn fundamental_identity_residual<H, D>(kernel: &DiscreteKernel, u: &[f64], h: H, dh: D) -> Result<IdentityReport>
where
    H: Fn(f64) -> f64,
    D: Fn(f64) -> f64 + Sync,
{
    let n = kernel.len();
    if u.len() != n + 1 {
        return Err(Error::GridMismatch(format!("u has {} samples, expected {}", u.len(), n + 1)));
    }
    let k0 = kernel
        .origin
        .ok_or_else(|| Error::Domain("kernel needs a finite value at t = 0".into()))?;
    let tau = kernel.step;
    let mut k = Vec::with_capacity(n + 1);
    k.push(k0);
    k.extend_from_slice(&kernel.values);

    let hu: Vec<f64> = u.iter().map(|&v| h(v)).collect();
    if let Some(j) = hu.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("H(u) at node {j}")));
    }
    let trap_conv = |f: &[f64]| -> Vec<f64> {
        (0..=n)
            .into_par_iter()
            .map(|j| {
                if j == 0 {
                    return 0.0;
                }
                let mut s = 0.5 * (k[0] * f[j] + k[j] * f[0]);
                for i in 1..j {
                    s += k[i] * f[j - i];
                }
                s * tau
            })
            .collect()
    };
    let cu = trap_conv(u);
    let chu = trap_conv(&hu);
    let mut kdot = vec![0.0; n + 1];
    kdot[0] = (k[1] - k[0]) / tau;
    kdot[n] = (k[n] - k[n - 1]) / tau;
    for i in 1..n {
        kdot[i] = (k[i + 1] - k[i - 1]) / (2.0 * tau);
    }

    let rows: Vec<(f64, f64, f64)> = (1..n)
        .into_par_iter()
        .map(|j| {
            let (uj, hj, dhj) = (u[j], hu[j], dh(u[j]));
            let k_mid = 0.25 * (k[j - 1] + 2.0 * k[j] + k[j + 1]);
            let d_u = (cu[j + 1] - cu[j - 1]) / (2.0 * tau);
            let d_hu = (chu[j + 1] - chu[j - 1]) / (2.0 * tau);
            let g = |i: usize| (hu[j - i] - hj - dhj * (u[j - i] - uj)) * (-kdot[i]);
            let mut rem = 0.5 * (g(0) + g(j));
            for i in 1..j {
                rem += g(i);
            }
            rem *= tau;
            let lhs = dhj * d_u;
            let rhs = d_hu + (-hj + dhj * uj) * k_mid + rem;
            (lhs, rhs, rem)
        })
        .collect();

    let times = (1..n).map(|j| j as f64 * tau).collect();
    let lhs: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let rhs: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let remainder: Vec<f64> = rows.iter().map(|r| r.2).collect();
    let residual = lhs.iter().zip(&rhs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let remainder_min = remainder.iter().copied().fold(f64::INFINITY, f64::min);
    let negative_remainders = remainder.iter().filter(|&&r| r < -1e-10).count();
    Ok(IdentityReport {
        times,
        lhs,
        rhs,
        remainder,
        residual,
        remainder_min,
        negative_remainders,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::MeasureSpec;

    #[test]
    fn one_star_one_is_t() {
        let one = DiscreteKernel::constant(0.1, 10, 1.0).unwrap();
        let c = conv(&one, &one).unwrap();
        for (j, v) in c.values().iter().enumerate() {
            assert!((v - c.time(j)).abs() < 1e-14);
        }
    }

    #[test]
    fn conv_is_commutative() {
        let a = DiscreteKernel::from_fn(0.01, 100, |t| t.powf(-0.3)).unwrap();
        let b = DiscreteKernel::from_fn(0.01, 100, |t| (1.0 + t).ln()).unwrap();
        let ab = conv(&a, &b).unwrap();
        let ba = conv(&b, &a).unwrap();
        for (x, y) in ab.values().iter().zip(ba.values()) {
            assert!((x - y).abs() <= 1e-12 * x.abs());
        }
    }

    #[test]
    fn grid_mismatch_is_an_error() {
        let a = DiscreteKernel::constant(0.1, 10, 1.0).unwrap();
        let b = DiscreteKernel::constant(0.1, 11, 1.0).unwrap();
        assert!(matches!(conv(&a, &b), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn k_against_one_gives_one_star_k() {
        let m = Measure::new(MeasureSpec::dirac(0.5)).unwrap();
        let k = KernelGrid::sample(&m, KernelKind::K, 1.0 / 256.0, 256).unwrap().to_discrete(&m).unwrap();
        let one = DiscreteKernel::constant(k.step(), k.len(), 1.0).unwrap();
        let c = conv(&k, &one).unwrap();
        for (j, v) in c.values().iter().enumerate() {
            let exact = crate::kernels::one_star_k_eval(&m, c.time(j)).unwrap();
            assert!((v - exact).abs() < 1e-12, "node {j}: {v} vs {exact}");
        }
    }

    #[test]
    fn zero_lambda_returns_forcing() {
        let g = DiscreteKernel::from_fn(0.05, 20, |t| (-t).exp()).unwrap();
        let kern = DiscreteKernel::from_fn(0.05, 20, |t| t.powf(-0.5)).unwrap();
        let x = solve_volterra_second_kind(&g, &kern, 0.0).unwrap();
        for (a, b) in x.masses().iter().zip(g.masses()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn second_kind_with_constant_kernel_is_exponential() {
        // x + λ(1∗x) = 1 has x = e^{−λt}.
        let tau = 1.0 / 512.0;
        let one = DiscreteKernel::constant(tau, 512, 1.0).unwrap();
        let x = solve_volterra_second_kind(&one, &one, 2.0).unwrap();
        for (j, v) in x.values().iter().enumerate().skip(1) {
            let exact = (-2.0 * x.time(j)).exp();
            assert!((v - exact).abs() < 5e-3, "{v} vs {exact}");
        }
        assert!(volterra_residual(&x, &one, &one, 2.0).unwrap() < 1e-13);
    }

    #[test]
    fn degenerate_diagonal() {
        let one = DiscreteKernel::constant(1.0, 4, 1.0).unwrap();
        assert!(matches!(
            solve_volterra_second_kind(&one, &one, -1.0),
            Err(Error::DegenerateVolterra { .. })
        ));
    }

    #[test]
    fn first_kind_step_solution_is_first_order() {
        let m = Measure::new(MeasureSpec::dirac(0.5)).unwrap();
        let tau = 1.0 / 256.0;
        let k = KernelGrid::sample(&m, KernelKind::K, tau, 256).unwrap().to_discrete(&m).unwrap();
        let l = sonine_partner_oracle(&k).unwrap();
        let exact = |t: f64| t.sqrt() * 2.0 / std::f64::consts::PI.sqrt();
        let cell = |j: usize| (exact((j + 1) as f64 * tau) - exact(j as f64 * tau)) / tau;
        let err = |j: usize| (l.averages()[j] / cell(j) - 1.0).abs();
        assert!(err(200) < err(20) && err(20) < err(2));
        assert!(err(200) < 2e-3);
    }

    #[test]
    fn sonine_product_is_one() {
        let m = Measure::new(MeasureSpec::atoms(&[(0.3, 0.5), (0.7, 0.5)])).unwrap();
        let c = sonine_product(&m, 1.0 / 256.0, 256).unwrap();
        let worst = c.iter().skip(9).map(|v| (v - 1.0).abs()).fold(0.0, f64::max);
        assert!(worst < 1e-3, "{worst}");
    }

    #[test]
    fn half_order_partner_squares_to_one() {
        // For δ_{1/2}, l∗l = t^0/Γ(1).
        let m = Measure::new(MeasureSpec::dirac(0.5)).unwrap();
        let c = kernel_product(&m, KernelKind::L, KernelKind::L, 1.0 / 128.0, 128).unwrap();
        assert!(c.iter().skip(9).all(|v| (v - 1.0).abs() < 1e-3));
        assert!(kernel_product(&m, KernelKind::OneStarK, KernelKind::L, 0.1, 4).is_err());
    }

    #[test]
    fn extrapolated_oracle_matches_single_order_partner() {
        let m = Measure::new(MeasureSpec::dirac(0.5)).unwrap();
        let tau = 1.0 / 256.0;
        let l = sonine_oracle(&m, tau, 256).unwrap();
        let exact = |t: f64| t.sqrt() * 2.0 / std::f64::consts::PI.sqrt();
        for (j, avg) in l.averages().iter().enumerate().skip(9) {
            let cell = (exact((j + 1) as f64 * tau) - exact(j as f64 * tau)) / tau;
            assert!((avg - cell).abs() < 1e-3 * cell, "cell {j}: {avg} vs {cell}");
        }
    }

    #[test]
    fn constant_u_balances_identity() {
        let k = DiscreteKernel::from_fn(0.01, 100, |t| 1.0 / (1.0 + t)).unwrap().with_origin(1.0);
        let u = vec![2.0; 101];
        let r = fundamental_identity_residual(&k, &u, |y| y * y, |y| 2.0 * y).unwrap();
        assert!(r.residual < 1e-12, "{}", r.residual);
    }

    #[test]
    fn linear_h_collapses_identity() {
        let k = DiscreteKernel::from_fn(0.01, 100, |t| (-3.0 * t).exp()).unwrap().with_origin(1.0);
        let u: Vec<f64> = (0..=100).map(|j| (j as f64 * 0.01).sin()).collect();
        let r = fundamental_identity_residual(&k, &u, |y| y, |_| 1.0).unwrap();
        assert!(r.residual < 1e-10);
        assert_eq!(r.negative_remainders, 0);
    }
}
