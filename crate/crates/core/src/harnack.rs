//! Measured counterparts of the regularity theorems: weak Harnack ratios,
//! dyadic oscillation decay and the strong maximum principle.
//!
//! Essential infima and suprema become min/max over cell centres whose slice
//! time and centre fall in the cylinder.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{build_cylinders, phi, Cylinder, CylinderKind, CylinderParams};
use crate::measure::Measure;
use crate::solver::{solve, InitialData, Problem, SolutionField};

/// A Harnack cylinder must cover at least this many space-time cells.
pub const MIN_CYLINDER_CELLS: usize = 8;

/// Values this far below zero are treated as round-off and clipped.
const NEGATIVITY_TOL: f64 = 1e-12;

/// κ̃ = (2 + Nγ̄)/(2 + Nγ̄ − 2γ̄), the supremum of admissible p.
pub fn critical_exponent(gamma_bar: f64, dim: usize) -> Result<f64> {
    if !(gamma_bar > 0.0 && gamma_bar <= 1.0) {
        return Err(Error::Domain(format!("gamma_bar must lie in (0,1], got {gamma_bar}")));
    }
    if dim == 0 {
        return Err(Error::Domain("spatial dimension must be at least 1".into()));
    }
    let ng = dim as f64 * gamma_bar;
    Ok((2.0 + ng) / (2.0 + ng - 2.0 * gamma_bar))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarnackConfig {
    pub t0: f64,
    pub x0: Vec<f64>,
    pub r: f64,
    pub delta: f64,
    pub tau: f64,
    pub p: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RatioStatus {
    Finite,
    /// Zero denominator with a positive mean.
    Unbounded,
    /// 0/0.
    Degenerate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarnackReport {
    pub config: HarnackConfig,
    pub critical_exponent: f64,
    /// (mean over Q₋ of uᵖ)^{1/p}.
    pub mean_p: f64,
    /// min over Q₊.
    pub inf_plus: f64,
    /// r²·sup f⁻.
    pub correction: f64,
    /// None unless status is finite.
    pub ratio: Option<f64>,
    pub status: RatioStatus,
    pub cells_minus: usize,
    pub cells_plus: usize,
}

/// Slice indices with time inside `cyl` and cell indices with centre inside it.
fn discrete_cylinder(u: &SolutionField, cyl: &Cylinder) -> (Vec<usize>, Vec<usize>) {
    let slices = u
        .times
        .iter()
        .enumerate()
        .filter(|(_, t)| cyl.contains_time(**t))
        .map(|(m, _)| m)
        .collect();
    let cells = (0..u.u0.len())
        .filter(|c| cyl.contains_point(&u.grid.center(*c)))
        .collect();
    (slices, cells)
}

fn check_covered(u: &SolutionField, cyl: &Cylinder, slices: &[usize], cells: &[usize]) -> Result<()> {
    let horizon = *u.times.last().expect("solution has the initial slice");
    if cyl.t_end > horizon * (1.0 + 1e-12) {
        return Err(Error::Domain(format!(
            "{:?} ends at {} beyond the computed horizon {horizon}",
            cyl.kind, cyl.t_end
        )));
    }
    let count = slices.len() * cells.len();
    if count < MIN_CYLINDER_CELLS {
        return Err(Error::EmptyCylinder(format!(
            "{:?} covers {} slices x {} cells; need {MIN_CYLINDER_CELLS} space-time cells",
            cyl.kind,
            slices.len(),
            cells.len()
        )));
    }
    Ok(())
}

pub fn weak_harnack_ratio(u: &SolutionField, m: &Measure, cfg: &HarnackConfig) -> Result<HarnackReport> {
    if u.grid.dim == 0 {
        return Err(Error::Domain("the Harnack ratio needs a spatial grid".into()));
    }
    if cfg.x0.len() != u.grid.dim {
        return Err(Error::GridMismatch(format!("x0 has {} coordinates for a {}-d grid", cfg.x0.len(), u.grid.dim)));
    }
    let kappa = critical_exponent(m.gamma_bar(), u.grid.dim)?;
    if !(cfg.p > 0.0 && cfg.p < kappa) {
        return Err(Error::Domain(format!("p = {} must lie in (0, {kappa})", cfg.p)));
    }
    let (minus, plus) = build_cylinders(
        m,
        &cfg.x0,
        CylinderParams {
            t0: cfg.t0,
            r: cfg.r,
            delta: cfg.delta,
            tau: cfg.tau,
        },
    )?;
    let (sm, cm) = discrete_cylinder(u, &minus);
    let (sp, cp) = discrete_cylinder(u, &plus);
    check_covered(u, &minus, &sm, &cm)?;
    check_covered(u, &plus, &sp, &cp)?;

    let value = |s: usize, c: usize| -> Result<f64> {
        let v = u.values[s][c];
        if v < -NEGATIVITY_TOL {
            return Err(Error::Domain(format!("u = {v} < 0 at slice {s}, cell {c}")));
        }
        Ok(v.max(0.0))
    };
    // Normalising by the max keeps a constant field's mean exact.
    let mut top = 0.0f64;
    for &s in &sm {
        for &c in &cm {
            top = top.max(value(s, c)?);
        }
    }
    let mean_p = if top > 0.0 {
        let mut sum = 0.0;
        for &s in &sm {
            for &c in &cm {
                sum += (value(s, c)? / top).powf(cfg.p);
            }
        }
        top * (sum / (sm.len() * cm.len()) as f64).powf(1.0 / cfg.p)
    } else {
        0.0
    };
    let mut inf_plus = f64::INFINITY;
    for &s in &sp {
        for &c in &cp {
            inf_plus = inf_plus.min(value(s, c)?);
        }
    }
    let f_minus = u.forcing.iter().map(|f| (-f).max(0.0)).fold(0.0, f64::max);
    let correction = cfg.r * cfg.r * f_minus;
    let denominator = inf_plus + correction;
    let (ratio, status) = if denominator > 0.0 {
        (Some(mean_p / denominator), RatioStatus::Finite)
    } else if mean_p > 0.0 {
        (None, RatioStatus::Unbounded)
    } else {
        (None, RatioStatus::Degenerate)
    };
    Ok(HarnackReport {
        config: cfg.clone(),
        critical_exponent: kappa,
        mean_p,
        inf_plus,
        correction,
        ratio,
        status,
        cells_minus: sm.len() * cm.len(),
        cells_plus: sp.len() * cp.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleMember {
    pub seed: u64,
    pub report: HarnackReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleReport {
    pub members: Vec<EnsembleMember>,
    /// Over finite ratios; None when there are none.
    pub max_ratio: Option<f64>,
    pub median_ratio: Option<f64>,
    pub all_finite: bool,
}

impl EnsembleReport {
    /// CSV with columns seed, ratio, p, cells, measure_hash.
    pub fn write_csv<W: Write>(&self, out: W, cells: usize, measure_hash: &str) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["seed", "ratio", "p", "cells", "measure_hash"])?;
        for member in &self.members {
            let ratio = member.report.ratio.map_or_else(
                || format!("{:?}", member.report.status).to_lowercase(),
                |r| format!("{r:?}"),
            );
            w.write_record([
                member.seed.to_string(),
                ratio,
                format!("{:?}", member.report.config.p),
                cells.to_string(),
                measure_hash.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// u₀ for ensemble member `seed`: a clipped random Fourier field.
pub fn ensemble_initial_data(seed: u64) -> InitialData {
    InitialData::RandomFourier {
        seed,
        modes: 6,
        amplitude: 1.0,
        offset: 0.5,
    }
}

/// Solves `template` once per seed with u₀ = `ensemble_initial_data(seed)`,
/// members in parallel, and measures each Harnack ratio.
pub fn harnack_ensemble(template: &Problem, cfg: &HarnackConfig, seeds: &[u64]) -> Result<EnsembleReport> {
    let members = seeds
        .par_iter()
        .map(|&seed| {
            let mut problem = template.clone();
            problem.initial = ensemble_initial_data(seed);
            let u = solve(&problem)?;
            let report = weak_harnack_ratio(&u, &problem.measure, cfg)?;
            Ok(EnsembleMember { seed, report })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut ratios: Vec<f64> = members.iter().filter_map(|m| m.report.ratio).collect();
    ratios.sort_by(f64::total_cmp);
    let median_ratio = (!ratios.is_empty()).then(|| {
        let n = ratios.len();
        if n % 2 == 1 {
            ratios[n / 2]
        } else {
            0.5 * (ratios[n / 2 - 1] + ratios[n / 2])
        }
    });
    Ok(EnsembleReport {
        all_finite: ratios.len() == members.len(),
        max_ratio: ratios.last().copied(),
        median_ratio,
        members,
    })
}

fn default_theta() -> f64 {
    1.0
}

fn default_eta() -> f64 {
    0.25
}

/// Nested cylinders Q(2^{−j}) = (t₁ − θΦ(2^{−j}r), t₁) × B(x₁, 2^{−j}r),
/// intersected with Q_dom = (0, 2ηΦ(r)) × B(x₀, 2r).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OscillationConfig {
    pub t1: f64,
    pub x1: Vec<f64>,
    pub x0: Vec<f64>,
    pub r: f64,
    #[serde(default = "default_theta")]
    pub theta: f64,
    #[serde(default = "default_eta")]
    pub eta: f64,
    /// First level; defaults to the first cylinder properly inside Q_dom.
    #[serde(default)]
    pub j0: Option<u32>,
    pub j1: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OscillationStatus {
    Fitted,
    /// Every oscillation is at the noise floor.
    Flat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OscillationLevel {
    pub j: u32,
    pub oscillation: f64,
    pub cells: usize,
    pub usable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OscillationProfile {
    pub config: OscillationConfig,
    pub levels: Vec<OscillationLevel>,
    pub noise_floor: f64,
    pub status: OscillationStatus,
    /// Minus the least-squares slope of log₂ osc_j against j.
    pub kappa: Option<f64>,
    /// Root-mean-square residual of that fit, in log₂ units.
    pub fit_residual: Option<f64>,
}

impl OscillationProfile {
    /// CSV with columns j, oscillation, cells, usable.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["j", "oscillation", "cells", "usable"])?;
        for level in &self.levels {
            w.write_record([
                level.j.to_string(),
                format!("{:?}", level.oscillation),
                level.cells.to_string(),
                level.usable.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn in_ball(x: &[f64], center: &[f64], radius: f64) -> bool {
    let d2: f64 = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
    d2.sqrt() <= radius * (1.0 + 1e-12)
}

/// Smallest l ≥ 0 with |x₁ − x₀| + 2^{−l}r < 2r and t₁ − θΦ(2^{−l}r) > 0.
pub fn first_contained_level(m: &Measure, cfg: &OscillationConfig) -> Result<u32> {
    let offset: f64 = cfg.x1.iter().zip(&cfg.x0).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    for l in 0..64 {
        let rho_r = cfg.r * 0.5f64.powi(l);
        if offset + rho_r < 2.0 * cfg.r && cfg.t1 - cfg.theta * phi(m, rho_r)? > 0.0 {
            return Ok(l as u32);
        }
    }
    Err(Error::TooFewLevels("no dyadic cylinder fits inside Q_dom".into()))
}

pub fn oscillation_profile(u: &SolutionField, m: &Measure, cfg: &OscillationConfig) -> Result<OscillationProfile> {
    let dim = u.grid.dim;
    if dim == 0 || cfg.x0.len() != dim || cfg.x1.len() != dim {
        return Err(Error::GridMismatch(format!("x0 and x1 need {dim} coordinates on a spatial grid")));
    }
    if !(cfg.r > 0.0 && cfg.theta > 0.0 && cfg.eta > 0.0) {
        return Err(Error::Domain("need r, theta, eta > 0".into()));
    }
    let phi_r = phi(m, cfg.r)?;
    let dom_end = 2.0 * cfg.eta * phi_r;
    if !(cfg.t1 > cfg.eta * phi_r && cfg.t1 < dom_end) {
        return Err(Error::Domain(format!(
            "t1 = {} must lie in ({}, {dom_end})",
            cfg.t1,
            cfg.eta * phi_r
        )));
    }
    if !in_ball(&cfg.x1, &cfg.x0, cfg.r) {
        return Err(Error::Domain("x1 must lie in B(x0, r)".into()));
    }
    let j0 = match cfg.j0 {
        Some(j) => j,
        None => first_contained_level(m, cfg)?,
    };
    if cfg.j1 < j0 {
        return Err(Error::Domain(format!("j1 = {} below j0 = {j0}", cfg.j1)));
    }
    let horizon = *u.times.last().expect("solution has the initial slice");
    if cfg.t1 > horizon * (1.0 + 1e-12) {
        return Err(Error::Domain(format!("t1 = {} beyond the computed horizon {horizon}", cfg.t1)));
    }

    let dom = Cylinder::new(0.0, dom_end, cfg.x0.clone(), 2.0 * cfg.r, CylinderKind::Dyadic)?;
    let (dom_slices, dom_cells) = discrete_cylinder(u, &dom);
    let scale = dom_slices
        .iter()
        .flat_map(|&s| dom_cells.iter().map(move |&c| u.values[s][c].abs()))
        .fold(0.0, f64::max);
    let noise_floor = 10.0 * f64::EPSILON * scale.max(f64::MIN_POSITIVE);

    let mut levels = Vec::new();
    for j in j0..=cfg.j1 {
        let rho_r = cfg.r * 0.5f64.powi(j as i32);
        let start = (cfg.t1 - cfg.theta * phi(m, rho_r)?).max(0.0);
        let q = Cylinder::new(start, cfg.t1, cfg.x1.clone(), rho_r, CylinderKind::Dyadic)?;
        let slices: Vec<usize> = dom_slices.iter().copied().filter(|&s| q.contains_time(u.times[s])).collect();
        let cells: Vec<usize> = dom_cells
            .iter()
            .copied()
            .filter(|&c| q.contains_point(&u.grid.center(c)))
            .collect();
        let count = slices.len() * cells.len();
        if count == 0 {
            break;
        }
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &s in &slices {
            for &c in &cells {
                lo = lo.min(u.values[s][c]);
                hi = hi.max(u.values[s][c]);
            }
        }
        let oscillation = hi - lo;
        levels.push(OscillationLevel {
            j,
            oscillation,
            cells: count,
            usable: oscillation > noise_floor,
        });
    }

    let usable: Vec<(f64, f64)> = levels
        .iter()
        .filter(|l| l.usable)
        .map(|l| (l.j as f64, l.oscillation.log2()))
        .collect();
    if usable.is_empty() && !levels.is_empty() {
        return Ok(OscillationProfile {
            config: cfg.clone(),
            levels,
            noise_floor,
            status: OscillationStatus::Flat,
            kappa: None,
            fit_residual: None,
        });
    }
    if usable.len() < 3 {
        return Err(Error::TooFewLevels(format!(
            "{} usable levels of {} computed; need 3",
            usable.len(),
            levels.len()
        )));
    }
    let n = usable.len() as f64;
    let mx = usable.iter().map(|p| p.0).sum::<f64>() / n;
    let my = usable.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = usable.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = usable.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    let rms = (usable
        .iter()
        .map(|(x, y)| (y - my - slope * (x - mx)).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(OscillationProfile {
        config: cfg.clone(),
        levels,
        noise_floor,
        status: OscillationStatus::Fitted,
        kappa: Some(-slope),
        fit_residual: Some(rms),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Consistent,
    Violated,
    NotApplicable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrongMaxReport {
    pub verdict: Verdict,
    pub global_sup: f64,
    pub cylinder_sup: Option<f64>,
    /// max − min over slices in (0, t_start] of the cylinder.
    pub earlier_oscillation: Option<f64>,
}

/// Cylinder (t₀, t₀ + τΦ(2r)) × B(x₀, r/2) used by the strong maximum principle.
pub fn strong_max_cylinder(m: &Measure, t0: f64, x0: &[f64], r: f64, tau: f64) -> Result<Cylinder> {
    Cylinder::new(t0, t0 + tau * phi(m, 2.0 * r)?, x0.to_vec(), 0.5 * r, CylinderKind::Dyadic)
}

/// If the sup over `q` reaches the sup over (0, T] × Ω, u must be constant on
/// every earlier slice. Not applicable when f ≢ 0, when sup u₀ exceeds sup u,
/// when the sups differ or when no earlier slice exists.
pub fn strong_max_check(u: &SolutionField, q: &Cylinder, tol: f64) -> StrongMaxReport {
    let global_sup = u.values[1..].iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
    let (slices, cells) = discrete_cylinder(u, q);
    let cylinder_sup = slices
        .iter()
        .filter(|&&s| s > 0)
        .flat_map(|&s| cells.iter().map(move |&c| u.values[s][c]))
        .reduce(f64::max);
    let mut report = StrongMaxReport {
        verdict: Verdict::NotApplicable,
        global_sup,
        cylinder_sup,
        earlier_oscillation: None,
    };
    let u0_sup = u.u0.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let hypotheses = u.forcing.iter().all(|f| *f == 0.0)
        && u0_sup <= global_sup + tol
        && cylinder_sup.is_some_and(|s| (global_sup - s).abs() <= tol);
    let earlier: Vec<&Vec<f64>> = u
        .times
        .iter()
        .zip(&u.values)
        .skip(1)
        .filter(|(t, _)| !q.contains_time(**t) && **t <= q.t_start * (1.0 + 1e-12))
        .map(|(_, v)| v)
        .collect();
    if !hypotheses || earlier.is_empty() {
        return report;
    }
    let (lo, hi) = earlier
        .iter()
        .flat_map(|v| v.iter())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
    let spread = hi - lo;
    report.earlier_oscillation = Some(spread);
    report.verdict = if spread <= tol { Verdict::Consistent } else { Verdict::Violated };
    report
}
