//! E_α(z) on the closed negative real axis, used only as a validation oracle.

use std::f64::consts::PI;

use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::quad;

/// Below this |z| the power series is summed directly; its largest term
/// stays O(1), so cancellation costs no digits.
pub const SERIES_RADIUS: f64 = 1.0;

/// E_α(z) = Σ z^j / Γ(αj + 1) for α ∈ (0,1], z ≤ 0.
///
/// |z| ≤ 1: compensated series. Beyond, the Laplace representation
/// E_α(−t^α) = (1/π) ∫₀^∞ e^{−rt} r^{α−1} sin(απ) / (r^{2α} + 2r^α cos(απ) + 1) dr.
pub fn mittag_leffler(alpha: f64, z: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Domain(format!("alpha must lie in (0,1], got {alpha}")));
    }
    if !(z <= 0.0 && z.is_finite()) {
        return Err(Error::Domain(format!("argument must be finite and nonpositive, got {z}")));
    }
    if z == 0.0 {
        return Ok(1.0);
    }
    if alpha == 1.0 {
        return Ok(z.exp());
    }
    if -z <= SERIES_RADIUS {
        Ok(series(alpha, z))
    } else {
        laplace_branch(alpha, -z)
    }
}

fn series(alpha: f64, z: f64) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    let mut power = 1.0;
    for j in 0..160 {
        let mag = power / gamma(alpha * j as f64 + 1.0);
        power *= z.abs();
        let term = if j % 2 == 0 { mag } else { -mag };
        let y = term - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
        if j > 2 && mag < 1e-18 * sum.abs() {
            break;
        }
    }
    sum
}

fn laplace_branch(alpha: f64, x: f64) -> Result<f64> {
    let t = x.powf(1.0 / alpha);
    let (s, c) = (alpha * PI).sin_cos();
    let density = |r: f64| {
        let ra = r.powf(alpha);
        s * ra / r / (ra * ra + 2.0 * ra * c + 1.0)
    };
    let integrand = |u: f64| (-u).exp() * density(u / t);
    let near = quad::integrate_from_origin(&integrand, 1.0, 1e-15)?;
    let far = quad::integrate_to_infinity(&integrand, 1.0, 1e-15)?;
    Ok((near + far) / (PI * t))
}

/// The leading asymptotic term −1/(zΓ(1−α)) for large |z|.
pub fn mittag_leffler_asymptotic(alpha: f64, z: f64) -> f64 {
    -1.0 / (z * gamma(1.0 - alpha))
}
