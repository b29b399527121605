//! The scaling function Φ, kernel-adapted cylinders and the scaling certificates.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{k1_eval, l_eval};
use crate::measure::Measure;
use crate::quad;

const LOG10_BRACKET: f64 = 300.0;

/// Φ(r): the time with k₁(Φ(r)) = r⁻².
///
/// Bisection on log₁₀Φ over [−300, 300], then Newton polish in log t using
/// k₁′(t) = −∫α t^{−α−1} dμ.
pub fn phi(m: &Measure, r: f64) -> Result<f64> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::Domain(format!("radius must be positive, got {r}")));
    }
    let target = -2.0 * r.ln();
    // g(y) = ln k₁(e^y) − ln r⁻² is strictly decreasing in y.
    let g = |y: f64| m.exp_moment(-y).ln() - target;
    let ln10 = std::f64::consts::LN_10;
    let (mut lo, mut hi) = (-LOG10_BRACKET * ln10, LOG10_BRACKET * ln10);
    let (g_lo, g_hi) = (g(lo), g(hi));
    if !(g_lo >= 0.0 && g_hi <= 0.0) {
        return Err(Error::Bracket(format!(
            "k1(t) r^2 - 1 does not change sign on t in [1e-300, 1e300] for r = {r}"
        )));
    }
    while hi - lo > 1e-13 * hi.abs().max(1.0) {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut y = 0.5 * (lo + hi);
    for _ in 0..3 {
        let t = y.exp();
        let k1 = m.exp_moment(-y);
        let slope = -m.weighted_power_moment(t)? / k1;
        let gy = k1.ln() - target;
        if slope != 0.0 && gy != 0.0 {
            let next = y - gy / slope;
            if next.is_finite() {
                y = next;
            }
        }
    }
    Ok(y.exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CylinderKind {
    QMinus,
    QPlus,
    Dyadic,
}

/// (t_start, t_end) × B(center, radius).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cylinder {
    pub t_start: f64,
    pub t_end: f64,
    pub center: Vec<f64>,
    pub radius: f64,
    pub kind: CylinderKind,
}

impl Cylinder {
    pub fn new(t_start: f64, t_end: f64, center: Vec<f64>, radius: f64, kind: CylinderKind) -> Result<Self> {
        if !(t_start < t_end) || !(radius > 0.0) {
            return Err(Error::Domain(format!(
                "cylinder needs t_start < t_end and radius > 0, got ({t_start}, {t_end}), radius {radius}"
            )));
        }
        Ok(Self {
            t_start,
            t_end,
            center,
            radius,
            kind,
        })
    }

    /// Time membership is (t_start, t_end], space membership the closed ball;
    /// the tolerance absorbs round-off in grid coordinates.
    pub fn contains_time(&self, t: f64) -> bool {
        let eps = 1e-12 * self.t_end.abs().max(1.0);
        t > self.t_start + eps && t <= self.t_end + eps
    }

    pub fn contains_point(&self, x: &[f64]) -> bool {
        let d2: f64 = x.iter().zip(&self.center).map(|(a, b)| (a - b) * (a - b)).sum();
        d2.sqrt() <= self.radius * (1.0 + 1e-12)
    }

    pub fn contains(&self, t: f64, x: &[f64]) -> bool {
        self.contains_time(t) && self.contains_point(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CylinderParams {
    pub t0: f64,
    pub r: f64,
    pub delta: f64,
    pub tau: f64,
}

/// Q₋ = (t₀, t₀ + δτΦ(2r)) × B(x₀, δr) and
/// Q₊ = (t₀ + (2−δ)τΦ(2r), t₀ + 2τΦ(2r)) × B(x₀, δr).
pub fn build_cylinders(m: &Measure, x0: &[f64], p: CylinderParams) -> Result<(Cylinder, Cylinder)> {
    if !(p.delta > 0.0 && p.delta < 1.0) {
        return Err(Error::Domain(format!("delta must lie in (0,1), got {}", p.delta)));
    }
    if !(p.tau > 0.0 && p.tau.is_finite()) {
        return Err(Error::Domain(format!("tau must be positive, got {}", p.tau)));
    }
    if !(p.r > 0.0 && p.r.is_finite()) {
        return Err(Error::Domain(format!("r must be positive, got {}", p.r)));
    }
    if !p.t0.is_finite() {
        return Err(Error::Domain(format!("t0 must be finite, got {}", p.t0)));
    }
    let height = p.tau * phi(m, 2.0 * p.r)?;
    let radius = p.delta * p.r;
    let minus = Cylinder::new(p.t0, p.t0 + p.delta * height, x0.to_vec(), radius, CylinderKind::QMinus)?;
    let plus = Cylinder::new(
        p.t0 + (2.0 - p.delta) * height,
        p.t0 + 2.0 * height,
        x0.to_vec(),
        radius,
        CylinderKind::QPlus,
    )?;
    Ok((minus, plus))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingRow {
    pub r: f64,
    pub phi_2r: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingReport {
    pub p: f64,
    pub rows: Vec<ScalingRow>,
    /// Ratio at the smallest grid radius.
    pub plateau: f64,
    /// Largest ratio over rows with Φ(2r) ≤ 1.
    pub c_emp: f64,
    /// Largest grid r with Φ(2r) ≤ 1 whose ratio, and that of every smaller
    /// grid r, stays within 2× of the plateau.
    pub r_admissible: Option<f64>,
}

impl ScalingReport {
    /// Largest ratio/plateau (or its inverse) over rows with r ≤ r_admissible.
    pub fn plateau_spread(&self) -> f64 {
        let Some(r_adm) = self.r_admissible else {
            return f64::INFINITY;
        };
        self.rows
            .iter()
            .filter(|row| row.r <= r_adm)
            .map(|row| (row.ratio / self.plateau).max(self.plateau / row.ratio))
            .fold(1.0, f64::max)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["r", "phi_2r", "lhs", "rhs", "ratio"])?;
        for row in &self.rows {
            w.write_record([row.r, row.phi_2r, row.lhs, row.rhs, row.ratio].map(|v| format!("{v:.16e}")))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Largest exponent admitted by the scaling lemma, 1/(1−γ̄).
pub fn scaling_exponent_limit(m: &Measure) -> f64 {
    1.0 / (1.0 - m.gamma_bar())
}

/// ∫₀ᵀ l(s)^p ds.
pub fn l_power_integral(m: &Measure, p: f64, horizon: f64) -> Result<f64> {
    let f = |s: f64| l_eval(m, s).map(|v| v.powf(p)).unwrap_or(f64::NAN);
    quad::integrate_from_origin(&f, horizon, 1e-10)
}

/// Ratio ‖l‖ᵖ_{Lp(0,Φ(2r))}·Φ(2r)^{p−1} / r^{2p} over `r_grid` (ascending).
pub fn scaling_certificate(m: &Measure, p: f64, r_grid: &[f64]) -> Result<ScalingReport> {
    let limit = scaling_exponent_limit(m);
    if !(p >= 1.0 && p < limit) {
        return Err(Error::Domain(format!("p = {p} outside [1, {limit})")));
    }
    if r_grid.is_empty() || r_grid.iter().any(|r| !(*r > 0.0)) {
        return Err(Error::Domain("radius grid must be nonempty and positive".into()));
    }
    let mut grid = r_grid.to_vec();
    grid.sort_by(f64::total_cmp);
    let rows = grid
        .par_iter()
        .map(|&r| {
            let phi_2r = phi(m, 2.0 * r)?;
            // Work in logs: both sides can leave the f64 range for large p.
            let ln_lhs = l_power_integral(m, p, phi_2r)?.ln() + (p - 1.0) * phi_2r.ln();
            let ln_rhs = 2.0 * p * r.ln();
            Ok(ScalingRow {
                r,
                phi_2r,
                lhs: ln_lhs.exp(),
                rhs: ln_rhs.exp(),
                ratio: (ln_lhs - ln_rhs).exp(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let plateau = rows[0].ratio;
    let c_emp = rows
        .iter()
        .filter(|row| row.phi_2r <= 1.0)
        .map(|row| row.ratio)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut r_admissible = None;
    for row in &rows {
        let within = row.ratio <= 2.0 * plateau && row.ratio >= 0.5 * plateau;
        if row.phi_2r <= 1.0 && within && row.ratio.is_finite() {
            r_admissible = Some(row.r);
        } else {
            break;
        }
    }
    Ok(ScalingReport {
        p,
        rows,
        plateau,
        c_emp,
        r_admissible,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InequalityReport {
    pub checked: usize,
    pub violations: usize,
    /// Smallest (rhs − lhs)/rhs; negative means violated.
    pub worst_slack: f64,
}

impl InequalityReport {
    fn from_pairs(pairs: impl Iterator<Item = (f64, f64)>, tol: f64) -> Self {
        let mut report = Self {
            checked: 0,
            violations: 0,
            worst_slack: f64::INFINITY,
        };
        for (lhs, rhs) in pairs {
            let slack = (rhs - lhs) / rhs.abs().max(f64::MIN_POSITIVE);
            report.checked += 1;
            report.worst_slack = report.worst_slack.min(slack);
            if slack < -tol {
                report.violations += 1;
            }
        }
        report
    }
}

/// Relative tolerance on Φ comparisons; Φ itself is accurate to ~1e-13.
const PHI_CHECK_TOL: f64 = 1e-10;

/// Φ(λr) ≤ λ²Φ(r) for every pair.
pub fn phi_lambda_check(m: &Measure, r_grid: &[f64], lambda_grid: &[f64]) -> Result<InequalityReport> {
    if r_grid.is_empty() || lambda_grid.is_empty() {
        return Err(Error::Domain("grids must be nonempty".into()));
    }
    if let Some(l) = lambda_grid.iter().find(|l| !(**l > 0.0 && **l <= 1.0)) {
        return Err(Error::Domain(format!("lambda {l} outside (0,1]")));
    }
    let mut pairs = Vec::new();
    for &r in r_grid {
        let phi_r = phi(m, r)?;
        for &lambda in lambda_grid {
            pairs.push((phi(m, lambda * r)?, lambda * lambda * phi_r));
        }
    }
    Ok(InequalityReport::from_pairs(pairs.into_iter(), PHI_CHECK_TOL))
}

/// c_μ = min{(∫_{γ̄}¹dμ)^{1/γ̄}, 1}.
pub fn phi_lower_constant(m: &Measure) -> f64 {
    let gamma = m.gamma_bar();
    let (_, above) = m.split_mass(gamma);
    above.powf(1.0 / gamma).min(1.0)
}

/// c_μ r^{2/γ̄} ≤ Φ(r) for r in (0,1).
pub fn phi_lower_bound_check(m: &Measure, r_grid: &[f64]) -> Result<InequalityReport> {
    if let Some(r) = r_grid.iter().find(|r| !(**r > 0.0 && **r < 1.0)) {
        return Err(Error::Domain(format!("radius {r} outside (0,1)")));
    }
    let c = phi_lower_constant(m);
    let gamma = m.gamma_bar();
    let pairs = r_grid
        .iter()
        .map(|&r| Ok((c * r.powf(2.0 / gamma), phi(m, r)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(InequalityReport::from_pairs(pairs.into_iter(), PHI_CHECK_TOL))
}

/// k₁(Φ(r))·r² − 1, the root-finder defect.
pub fn phi_defect(m: &Measure, r: f64) -> Result<f64> {
    Ok(k1_eval(m, phi(m, r)?)? * r * r - 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::MeasureSpec;

    fn dirac(a: f64) -> Measure {
        Measure::new(MeasureSpec::dirac(a)).unwrap()
    }

    #[test]
    fn phi_single_order() {
        let m = dirac(0.5);
        assert!((phi(&m, 2.0).unwrap() - 16.0).abs() < 1e-11);
        assert!((phi(&m, 1.0).unwrap() - 1.0).abs() < 1e-13);
        assert!((phi(&m, 0.5).unwrap() - 0.0625).abs() < 1e-14);
    }

    #[test]
    fn phi_unit_mass_at_one() {
        let m = Measure::new(MeasureSpec::atoms(&[(0.2, 0.3), (0.6, 0.7)])).unwrap();
        assert!((phi(&m, 1.0).unwrap() - 1.0).abs() < 1e-12);
        let w = Measure::new(MeasureSpec::uniform_weight(1.0)).unwrap();
        assert!((phi(&w, 1.0).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn phi_defect_over_decades() {
        let m = Measure::new(MeasureSpec::atoms(&[(0.3, 0.5), (0.7, 0.5)])).unwrap();
        for e in -6..=6 {
            let r = 10f64.powi(e);
            assert!(phi_defect(&m, r).unwrap().abs() < 1e-12, "r = {r}");
        }
        // k₁ decays only like 1/ln t for the uniform weight, so Φ explodes past r ≈ 10.
        let w = Measure::new(MeasureSpec::uniform_weight(1.0)).unwrap();
        for e in -6..=1 {
            let r = 10f64.powi(e);
            assert!(phi_defect(&w, r).unwrap().abs() < 1e-12, "r = {r}");
        }
    }

    #[test]
    fn cylinders_single_order() {
        let m = dirac(0.5);
        let p = CylinderParams {
            t0: 0.0,
            r: 0.5,
            delta: 0.5,
            tau: 1.0,
        };
        let (minus, plus) = build_cylinders(&m, &[0.0], p).unwrap();
        assert!((minus.t_end - 0.5).abs() < 1e-13);
        assert!((plus.t_start - 1.5).abs() < 1e-13 && (plus.t_end - 2.0).abs() < 1e-13);
        assert_eq!(minus.radius, 0.25);
        assert_eq!(minus.kind, CylinderKind::QMinus);
    }

    #[test]
    fn cylinder_parameter_errors() {
        let m = dirac(0.5);
        let base = CylinderParams {
            t0: 0.0,
            r: 0.5,
            delta: 0.5,
            tau: 1.0,
        };
        for bad in [
            CylinderParams { delta: 1.0, ..base },
            CylinderParams { tau: 0.0, ..base },
            CylinderParams { r: -1.0, ..base },
        ] {
            assert!(build_cylinders(&m, &[0.0], bad).is_err());
        }
    }

    #[test]
    fn scaling_ratio_single_order_p1() {
        let m = dirac(0.5);
        let report = scaling_certificate(&m, 1.0, &[0.01, 0.1, 0.25]).unwrap();
        let expected = 4.0 / statrs::function::gamma::gamma(1.5);
        for row in &report.rows {
            assert!((row.ratio - expected).abs() < 1e-6 * expected, "{row:?}");
        }
        assert_eq!(report.r_admissible, Some(0.25));
    }

    #[test]
    fn scaling_exponent_range() {
        let m = dirac(0.5);
        assert!(scaling_certificate(&m, 2.0, &[0.1]).is_err());
        assert!(scaling_certificate(&m, 0.5, &[0.1]).is_err());
    }

    #[test]
    fn lambda_check_single_order() {
        let m = dirac(0.5);
        let report = phi_lambda_check(&m, &[1.0], &[1.0, 0.5]).unwrap();
        assert_eq!(report.violations, 0);
        assert!(report.worst_slack.abs() < 1e-12);
        assert!((phi(&m, 0.5).unwrap() - 1.0 / 16.0).abs() < 1e-15);
    }

    #[test]
    fn lower_bound_single_order_is_tight() {
        let m = dirac(0.5);
        assert_eq!(phi_lower_constant(&m), 1.0);
        let report = phi_lower_bound_check(&m, &[0.1, 0.5, 0.999]).unwrap();
        assert_eq!(report.violations, 0);
        assert!(report.worst_slack.abs() < 1e-10);
    }
}
