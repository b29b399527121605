//! The kernel k and its relatives: k₁, K = 1∗k, the Laplace-plane function
//! H_θ, the Sonine partner l and the resolvent r_θ, plus the pointwise bound
//! certificates for l.
//!
//! l and r_θ are recovered on the real axis from
//! `f(t) = (1/π) ∫₀^∞ e^{−pt} H_θ(p) dp`, substituted as `u = pt` and summed
//! on dyadic Gauss–Legendre panels in both directions from `u = 1`.

use std::f64::consts::PI;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::measure::Measure;
use crate::quad;

/// Relative tolerance for the dyadic Laplace-inversion panels.
const INVERSION_REL_TOL: f64 = 1e-15;

/// Relative slack allowed on the hard bound l(t) ≤ 1/∫t^{1−α}dμ.
pub const HARD_BOUND_SLACK: f64 = 1e-12;

fn check_positive_time(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("time must be positive and finite, got {t}")))
    }
}

/// k(t) = ∫ t^{−α}/Γ(1−α) dμ.
pub fn k_eval(m: &Measure, t: f64) -> Result<f64> {
    check_positive_time(t)?;
    let log_t = t.ln();
    m.mu_integral(|alpha| (-alpha * log_t).exp() / gamma(1.0 - alpha))
}

/// k₁(t) = ∫ t^{−α} dμ.
pub fn k1_eval(m: &Measure, t: f64) -> Result<f64> {
    check_positive_time(t)?;
    Ok(m.power_moment(t, 0.0))
}

/// (1∗k)(t) = ∫ t^{1−α}/Γ(2−α) dμ.
pub fn one_star_k_eval(m: &Measure, t: f64) -> Result<f64> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("time must be nonnegative, got {t}")));
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    let log_t = t.ln();
    m.mu_integral(|alpha| ((1.0 - alpha) * log_t).exp() / gamma(2.0 - alpha))
}

/// H_θ(p) together with the sine and cosine moments it is built from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LaplaceValue {
    pub h: f64,
    pub s: f64,
    pub c: f64,
}

/// H_θ(p) = S / (S² + (θ + C)²) with S = ∫p^α sin(πα)dμ, C = ∫p^α cos(πα)dμ.
pub fn h_laplace_eval(m: &Measure, p: f64, theta: f64) -> Result<LaplaceValue> {
    if !(p > 0.0 && p.is_finite()) {
        return Err(Error::Domain(format!("Laplace variable must be positive, got {p}")));
    }
    if !(theta >= 0.0 && theta.is_finite()) {
        return Err(Error::Domain(format!("theta must be nonnegative, got {theta}")));
    }
    Ok(h_theta(m, p, theta))
}

#[inline]
fn h_theta(m: &Measure, p: f64, theta: f64) -> LaplaceValue {
    let z = m.oscillatory_moment(p);
    let (s, c) = (z.im, z.re);
    let shifted = theta + c;
    LaplaceValue {
        h: s / (s * s + shifted * shifted),
        s,
        c,
    }
}

/// (1/(πt)) ∫₀^∞ e^{−u} H(u/t) du.
fn invert<H: Fn(f64) -> f64>(h: H, t: f64) -> Result<f64> {
    let integrand = |u: f64| (-u).exp() * h(u / t);
    let near = quad::integrate_from_origin(&integrand, 1.0, INVERSION_REL_TOL)?;
    let far = quad::integrate_to_infinity(&integrand, 1.0, INVERSION_REL_TOL)?;
    Ok((near + far) / (PI * t))
}

/// (1/π) ∫₀^∞ (1 − e^{−u}) H(u/t) / u du, the antiderivative of [`invert`].
fn invert_integrated<H: Fn(f64) -> f64>(h: H, t: f64) -> Result<f64> {
    let integrand = |u: f64| -(-u).exp_m1() * h(u / t) / u;
    let near = quad::integrate_from_origin(&integrand, 1.0, INVERSION_REL_TOL)?;
    let far = quad::integrate_to_infinity(&integrand, 1.0, 1e-13)?;
    Ok((near + far) / PI)
}

/// The Sonine partner l of k, with k ∗ l = 1.
pub fn l_eval(m: &Measure, t: f64) -> Result<f64> {
    r_theta_eval(m, t, 0.0)
}

/// The resolvent r_θ solving r_θ + θ (r_θ ∗ l) = l.
pub fn r_theta_eval(m: &Measure, t: f64, theta: f64) -> Result<f64> {
    check_positive_time(t)?;
    if !(theta >= 0.0 && theta.is_finite()) {
        return Err(Error::Domain(format!("theta must be nonnegative, got {theta}")));
    }
    let v = invert(|p| h_theta(m, p, theta).h, t)?;
    Ok(v.max(0.0))
}

/// (1 ∗ r_θ)(t) = ∫₀ᵗ r_θ(s) ds.
pub fn one_star_r_theta_eval(m: &Measure, t: f64, theta: f64) -> Result<f64> {
    check_positive_time(t)?;
    invert_integrated(|p| h_theta(m, p, theta).h, t)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelKind {
    K,
    K1,
    OneStarK,
    L,
    RTheta { theta: f64 },
}

impl KernelKind {
    pub fn name(&self) -> String {
        match self {
            KernelKind::K => "k".into(),
            KernelKind::K1 => "k1".into(),
            KernelKind::OneStarK => "one_star_k".into(),
            KernelKind::L => "l".into(),
            KernelKind::RTheta { theta } => format!("r_theta_{theta}"),
        }
    }

    fn nondecreasing(&self) -> bool {
        matches!(self, KernelKind::OneStarK)
    }

    pub fn eval(&self, m: &Measure, t: f64) -> Result<f64> {
        match *self {
            KernelKind::K => k_eval(m, t),
            KernelKind::K1 => k1_eval(m, t),
            KernelKind::OneStarK => one_star_k_eval(m, t),
            KernelKind::L => l_eval(m, t),
            KernelKind::RTheta { theta } => r_theta_eval(m, t, theta),
        }
    }
}

/// A kernel sampled at t_j = jτ, j = 1..N (the origin is excluded).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelGrid {
    pub kind: KernelKind,
    pub step: f64,
    pub values: Vec<f64>,
}

impl KernelGrid {
    pub fn sample(m: &Measure, kind: KernelKind, step: f64, n: usize) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) || n == 0 {
            return Err(Error::Domain(format!("invalid grid: step {step}, {n} samples")));
        }
        let values = (1..=n)
            .into_par_iter()
            .map(|j| kind.eval(m, j as f64 * step))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { kind, step, values })
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

    pub fn time(&self, j: usize) -> f64 {
        (j + 1) as f64 * self.step
    }

    /// Lists broken invariants: non-finite or negative samples and wrong-way steps.
    pub fn invariant_violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (j, v) in self.values.iter().enumerate() {
            if !(v.is_finite() && *v >= 0.0) {
                out.push(format!("sample {} = {v} is not finite and nonnegative", j + 1));
            }
        }
        for (j, w) in self.values.windows(2).enumerate() {
            let bad = if self.kind.nondecreasing() { w[1] < w[0] } else { w[1] > w[0] };
            if bad {
                out.push(format!("monotonicity broken between samples {} and {}", j + 1, j + 2));
            }
        }
        out
    }

    /// CSV with columns `t,value`, 17 significant digits.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "value"])?;
        for (j, v) in self.values.iter().enumerate() {
            w.write_record([format!("{:.16e}", self.time(j)), format!("{v:.16e}")])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Parameters for the resolvent lower-bound chain r_θ ≥ c₁(1∗r_θ)/t ≥ c₂ l ≥ c₃/(1∗k)
/// with θ = C₁/r², probed on t ∈ (0, C̄ Φ(r)).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolventProbe {
    pub c1: f64,
    pub c_bar: f64,
    pub r: f64,
    pub points: usize,
}

impl Default for ResolventProbe {
    fn default() -> Self {
        Self {
            c1: 1.0,
            c_bar: 1.0,
            r: 0.5,
            points: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificateSample {
    pub t: f64,
    pub l: f64,
    pub upper: f64,
    /// (upper − l)/upper; negative means the hard bound is violated.
    pub slack: f64,
    pub c_low: f64,
    pub c_hold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainSample {
    pub t: f64,
    pub r_theta: f64,
    pub mean_r_theta: f64,
    pub l: f64,
    pub inv_one_star_k: f64,
}

impl ChainSample {
    /// The three successive ratios of the chain; each should stay bounded below.
    pub fn ratios(&self) -> [f64; 3] {
        [
            self.r_theta / self.mean_r_theta,
            self.mean_r_theta / self.l,
            self.l / self.inv_one_star_k,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolventChain {
    pub theta: f64,
    pub window: f64,
    pub samples: Vec<ChainSample>,
    pub ratio_min: [f64; 3],
    pub ratio_max: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificateReport {
    pub gamma_bar: f64,
    pub samples: Vec<CertificateSample>,
    pub violations: usize,
    pub min_slack: f64,
    pub c_low_min: f64,
    pub c_low_max: f64,
    pub c_hold_min: f64,
    pub c_hold_max: f64,
    pub chain: ResolventChain,
}

fn min_max(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

/// Certifies the pointwise bounds on l over the grid t_j = jτ, j = 1..n, and
/// samples the resolvent chain.
pub fn bound_certificates(m: &Measure, step: f64, n: usize, probe: ResolventProbe) -> Result<CertificateReport> {
    let gamma_bar = m.gamma_bar();
    let l_grid = KernelGrid::sample(m, KernelKind::L, step, n)?;
    let samples: Vec<CertificateSample> = l_grid
        .values
        .iter()
        .enumerate()
        .map(|(j, &l)| {
            let t = l_grid.time(j);
            let moment = m.power_moment(t, 1.0);
            let upper = 1.0 / moment;
            CertificateSample {
                t,
                l,
                upper,
                slack: (upper - l) / upper,
                c_low: l * moment,
                c_hold: l * t.powf(1.0 - gamma_bar),
            }
        })
        .collect();
    let violations = samples.iter().filter(|s| s.slack < -HARD_BOUND_SLACK).count();
    let min_slack = samples.iter().map(|s| s.slack).fold(f64::INFINITY, f64::min);
    let (c_low_min, c_low_max) = min_max(samples.iter().map(|s| s.c_low));
    let (c_hold_min, c_hold_max) = min_max(samples.iter().map(|s| s.c_hold));
    let chain = resolvent_chain(m, probe)?;
    Ok(CertificateReport {
        gamma_bar,
        samples,
        violations,
        min_slack,
        c_low_min,
        c_low_max,
        c_hold_min,
        c_hold_max,
        chain,
    })
}

/// Samples the chain on log-spaced points of (10⁻³ C̄Φ(r), C̄Φ(r)).
pub fn resolvent_chain(m: &Measure, probe: ResolventProbe) -> Result<ResolventChain> {
    if !(probe.r > 0.0 && probe.c1 > 0.0 && probe.c_bar > 0.0) || probe.points < 2 {
        return Err(Error::Domain(format!("invalid resolvent probe {probe:?}")));
    }
    let theta = probe.c1 / (probe.r * probe.r);
    let window = probe.c_bar * crate::geometry::phi(m, probe.r)?;
    let samples = (0..probe.points)
        .into_par_iter()
        .map(|i| {
            let frac = i as f64 / probe.points as f64;
            let t = window * 10f64.powf(-3.0 * (1.0 - frac));
            Ok(ChainSample {
                t,
                r_theta: r_theta_eval(m, t, theta)?,
                mean_r_theta: one_star_r_theta_eval(m, t, theta)? / t,
                l: l_eval(m, t)?,
                inv_one_star_k: 1.0 / one_star_k_eval(m, t)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut ratio_min = [f64::INFINITY; 3];
    let mut ratio_max = [f64::NEG_INFINITY; 3];
    for s in &samples {
        for (i, r) in s.ratios().into_iter().enumerate() {
            ratio_min[i] = ratio_min[i].min(r);
            ratio_max[i] = ratio_max[i].max(r);
        }
    }
    Ok(ResolventChain {
        theta,
        window,
        samples,
        ratio_min,
        ratio_max,
    })
}
