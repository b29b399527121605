//! Quadrature building blocks: Gauss–Legendre rules, adaptive panel
//! integration and dyadic integration toward an integrable endpoint singularity.

use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Gauss–Legendre nodes and weights on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Builds the `n`-point rule by Newton iteration on P_n.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    /// Integrates `f` over [a, b].
    #[inline]
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut sum = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            sum += w * f(mid + half * x);
        }
        sum * half
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

pub fn gl8() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(8))
}

pub fn gl16() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(16))
}

pub fn gl24() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(24))
}

/// Adaptive panel quadrature: each panel is estimated with 16- and 8-point
/// Gauss rules and bisected until the difference meets `rel_tol`.
pub fn adaptive<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, rel_tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let coarse = gl16().integrate(a, b, f);
    if !coarse.is_finite() {
        return Err(Error::NonFinite(format!("integrand on [{a}, {b}]")));
    }
    let scale = coarse.abs().max(f64::MIN_POSITIVE);
    let value = refine(f, a, b, coarse, rel_tol * scale, 0)?;
    if !value.is_finite() {
        return Err(Error::NonFinite(format!("integrand on [{a}, {b}]")));
    }
    Ok(value)
}

fn refine<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, whole: f64, abs_tol: f64, depth: u32) -> Result<f64> {
    let low = gl8().integrate(a, b, f);
    if (whole - low).abs() <= abs_tol || (b - a).abs() < 1e-15 * (a.abs() + b.abs()) {
        return Ok(whole);
    }
    if depth > 48 {
        return Err(Error::Quadrature(format!("adaptive bisection depth exceeded on [{a}, {b}]")));
    }
    let mid = 0.5 * (a + b);
    let left = gl16().integrate(a, mid, f);
    let right = gl16().integrate(mid, b, f);
    Ok(refine(f, a, mid, left, 0.5 * abs_tol, depth + 1)?
        + refine(f, mid, b, right, 0.5 * abs_tol, depth + 1)?)
}

/// Integrates `f` over (0, x] when `f` may carry an integrable singularity at
/// the origin. Panels [x/2^{j+1}, x/2^j] are summed until the geometric tail
/// estimate from the last two panels falls below `rel_tol` of the total; the
/// tail estimate is then added.
pub fn integrate_from_origin<F: Fn(f64) -> f64>(f: &F, x: f64, rel_tol: f64) -> Result<f64> {
    if x <= 0.0 {
        return Ok(0.0);
    }
    let rule = gl16();
    let mut total = 0.0;
    let mut prev = f64::NAN;
    let mut hi = x;
    for j in 0..1000 {
        let lo = 0.5 * hi;
        let c = rule.integrate(lo, hi, f);
        if !c.is_finite() {
            return Err(Error::NonFinite(format!("integrand near origin on [{lo}, {hi}]")));
        }
        total += c;
        if j >= 3 {
            let ratio = c / prev;
            if c == 0.0 {
                return Ok(total);
            }
            if ratio > 0.0 && ratio < 1.0 {
                let tail = c * ratio / (1.0 - ratio);
                if tail.abs() <= rel_tol * total.abs() {
                    return Ok(total + tail);
                }
            }
        }
        prev = c;
        hi = lo;
    }
    Err(Error::Quadrature(format!(
        "tail near origin did not decay on (0, {x}]"
    )))
}

/// Integrates `f` over [x, ∞) on dyadic panels [x 2^j, x 2^{j+1}], adding a
/// geometric tail estimate once it falls below `rel_tol` of the total.
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(f: &F, x: f64, rel_tol: f64) -> Result<f64> {
    let rule = gl24();
    let mut total = 0.0;
    let mut prev = f64::NAN;
    let mut lo = x;
    for j in 0..1000 {
        let hi = 2.0 * lo;
        let c = rule.integrate(lo, hi, f);
        if !c.is_finite() {
            return Err(Error::NonFinite(format!("integrand on [{lo}, {hi}]")));
        }
        total += c;
        if c == 0.0 && j > 0 {
            return Ok(total);
        }
        if j >= 2 {
            let ratio = c / prev;
            if ratio.abs() < 1.0 {
                let tail = c * ratio / (1.0 - ratio);
                if tail.abs() <= rel_tol * total.abs() {
                    return Ok(total + tail);
                }
            }
        }
        prev = c;
        lo = hi;
        if !lo.is_finite() {
            break;
        }
    }
    Err(Error::Quadrature(format!("tail toward infinity did not decay from {x}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let rule = GaussLegendre::new(8);
        let v = rule.integrate(0.0, 2.0, |x| x.powi(15));
        assert!((v - 2f64.powi(16) / 16.0).abs() < 1e-9);
        let s: f64 = rule.weights.iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
    }

    #[test]
    fn adaptive_handles_peaked_integrand() {
        let f = |x: f64| 1.0 / (1e-4 + x * x);
        let v = adaptive(&f, -1.0, 1.0, 1e-12).unwrap();
        let exact = 2.0 * (1.0f64 / 1e-2).atan() / 1e-2;
        assert!((v - exact).abs() < 1e-9 * exact);
    }

    #[test]
    fn origin_integration_of_power_singularity() {
        for beta in [0.2, 0.5, 0.8] {
            let f = |s: f64| s.powf(-beta);
            let v = integrate_from_origin(&f, 2.0, 1e-14).unwrap();
            let exact = 2f64.powf(1.0 - beta) / (1.0 - beta);
            assert!((v - exact).abs() < 1e-12 * exact, "beta={beta}: {v} vs {exact}");
        }
    }

    #[test]
    fn infinite_integration_of_power_tail() {
        let f = |s: f64| s.powf(-1.3);
        let v = integrate_to_infinity(&f, 1.0, 1e-14).unwrap();
        assert!((v - 1.0 / 0.3).abs() < 1e-11);
        let g = |s: f64| (-s).exp();
        let v = integrate_to_infinity(&g, 1.0, 1e-15).unwrap();
        assert!((v - (-1f64).exp()).abs() < 1e-15);
    }
}
