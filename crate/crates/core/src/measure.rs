//! The order measure μ on (0,1): finitely many atoms plus a piecewise-constant
//! weight density. Every kernel in the crate is a μ-average of power laws, so
//! the moment integrals here sit in the innermost loops.

use std::ops::Deref;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, ValidationReport};
use crate::quad;

/// Relative tolerance for adaptive moment quadrature on weight pieces.
pub const MOMENT_REL_TOL: f64 = 1e-10;

const LOG_ONE_THRESHOLD: f64 = 1e-12;

fn default_gamma_slack() -> f64 {
    0.01
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub alpha: f64,
    pub q: f64,
}

/// Piecewise-constant density: `values[i]` holds on `(breaks[i], breaks[i+1])`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WeightDensity {
    pub breaks: Vec<f64>,
    pub values: Vec<f64>,
}

impl WeightDensity {
    pub fn uniform(value: f64) -> Self {
        Self {
            breaks: vec![0.0, 1.0],
            values: vec![value],
        }
    }

    /// Pieces `(a, b, w)` with `w > 0`.
    pub fn pieces(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.breaks
            .windows(2)
            .zip(&self.values)
            .filter(|(_, &w)| w > 0.0)
            .map(|(ab, &w)| (ab[0], ab[1], w))
    }

    pub fn is_empty(&self) -> bool {
        self.pieces().next().is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureSpec {
    #[serde(default)]
    pub atoms: Vec<Atom>,
    #[serde(default)]
    pub weight: WeightDensity,
    #[serde(default = "default_gamma_slack")]
    pub gamma_slack: f64,
}

impl Default for MeasureSpec {
    fn default() -> Self {
        Self {
            atoms: Vec::new(),
            weight: WeightDensity::default(),
            gamma_slack: default_gamma_slack(),
        }
    }
}

impl MeasureSpec {
    pub fn dirac(alpha: f64) -> Self {
        Self::atoms(&[(alpha, 1.0)])
    }

    pub fn atoms(atoms: &[(f64, f64)]) -> Self {
        Self {
            atoms: atoms.iter().map(|&(alpha, q)| Atom { alpha, q }).collect(),
            ..Self::default()
        }
    }

    pub fn uniform_weight(value: f64) -> Self {
        Self {
            weight: WeightDensity::uniform(value),
            ..Self::default()
        }
    }

    pub fn with_weight(mut self, weight: WeightDensity) -> Self {
        self.weight = weight;
        self
    }

    /// Checks every invariant and lists each violation with a JSON pointer.
    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::default();
        for (i, atom) in self.atoms.iter().enumerate() {
            if !(atom.alpha > 0.0 && atom.alpha < 1.0) {
                report.push(format!("/atoms/{i}/alpha"), format!("order {} not in (0,1)", atom.alpha));
            }
            if !(atom.q >= 0.0 && atom.q.is_finite()) {
                report.push(format!("/atoms/{i}/q"), format!("negative weight {}", atom.q));
            }
            if i > 0 && !(atom.alpha > self.atoms[i - 1].alpha) {
                report.push(format!("/atoms/{i}/alpha"), "non-monotone orders: atoms must be strictly increasing");
            }
        }
        let w = &self.weight;
        if !(w.breaks.is_empty() && w.values.is_empty()) {
            if w.breaks.len() != w.values.len() + 1 {
                report.push(
                    "/weight",
                    format!("expected {} breaks for {} values, got {}", w.values.len() + 1, w.values.len(), w.breaks.len()),
                );
            }
            for (i, b) in w.breaks.iter().enumerate() {
                if !(0.0..=1.0).contains(b) {
                    report.push(format!("/weight/breaks/{i}"), format!("breakpoint {b} outside [0,1]"));
                }
                if i > 0 && !(*b > w.breaks[i - 1]) {
                    report.push(format!("/weight/breaks/{i}"), "breakpoints must be strictly increasing");
                }
            }
            for (i, v) in w.values.iter().enumerate() {
                if !(*v >= 0.0 && v.is_finite()) {
                    report.push(format!("/weight/values/{i}"), format!("negative weight {v}"));
                }
            }
        }
        if !(self.gamma_slack > 0.0 && self.gamma_slack < 1.0) {
            report.push("/gamma_slack", format!("gamma_slack {} not in (0,1)", self.gamma_slack));
        }
        if report.is_valid() && !(self.total_mass() > 0.0) {
            report.push("", "zero measure");
        }
        report
    }

    pub fn total_mass(&self) -> f64 {
        let atoms: f64 = self.atoms.iter().map(|a| a.q).sum();
        let weight: f64 = self.weight.pieces().map(|(a, b, w)| (b - a) * w).sum();
        atoms + weight
    }

    /// The part of μ on `[lo, 1)` (atoms at `lo` included).
    pub fn restricted_above(&self, lo: f64) -> MeasureSpec {
        self.restricted(|alpha| alpha >= lo, lo, 1.0)
    }

    /// The part of μ on `(0, hi)`.
    pub fn restricted_below(&self, hi: f64) -> MeasureSpec {
        self.restricted(|alpha| alpha < hi, 0.0, hi)
    }

    fn restricted(&self, keep_atom: impl Fn(f64) -> bool, lo: f64, hi: f64) -> MeasureSpec {
        let atoms = self.atoms.iter().copied().filter(|a| keep_atom(a.alpha)).collect();
        let mut weight = WeightDensity::default();
        for (a, b, w) in self.weight.pieces() {
            let (a, b) = (a.max(lo), b.min(hi));
            if b <= a {
                continue;
            }
            match weight.breaks.last() {
                Some(&last) if last == a => {}
                Some(_) => {
                    weight.values.push(0.0);
                    weight.breaks.push(a);
                }
                None => weight.breaks.push(a),
            }
            weight.breaks.push(b);
            weight.values.push(w);
        }
        MeasureSpec {
            atoms,
            weight,
            gamma_slack: self.gamma_slack,
        }
    }

    /// ∫₀¹ g(α) dμ(α): exact on atoms, adaptive panel quadrature on weight pieces.
    pub fn mu_integral<G: Fn(f64) -> f64>(&self, g: G) -> Result<f64> {
        let mut sum = 0.0;
        for atom in &self.atoms {
            let v = g(atom.alpha);
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("integrand at atom alpha = {}", atom.alpha)));
            }
            sum += atom.q * v;
        }
        for (a, b, w) in self.weight.pieces() {
            sum += w * quad::adaptive(&g, a, b, MOMENT_REL_TOL)?;
        }
        Ok(sum)
    }

    /// ∫ e^{λα} dμ(α), in closed form on every piece.
    pub fn exp_moment(&self, lambda: f64) -> f64 {
        let mut sum: f64 = self.atoms.iter().map(|a| a.q * (lambda * a.alpha).exp()).sum();
        for (a, b, w) in self.weight.pieces() {
            let piece = if lambda.abs() < LOG_ONE_THRESHOLD {
                b - a
            } else {
                (lambda * a).exp() * (lambda * (b - a)).exp_m1() / lambda
            };
            sum += w * piece;
        }
        sum
    }

    /// ∫ x^{shift−α} dμ(α) for x > 0.
    pub fn power_moment(&self, x: f64, shift: f64) -> f64 {
        x.powf(shift) * self.exp_moment(-x.ln())
    }

    /// ∫ p^α e^{iπα} dμ(α); real part is the cosine moment, imaginary part the sine moment.
    pub fn oscillatory_moment(&self, p: f64) -> Complex64 {
        let log_p = p.ln();
        let z = Complex64::new(log_p, std::f64::consts::PI);
        let mut sum = Complex64::new(0.0, 0.0);
        for atom in &self.atoms {
            sum += atom.q * (z * atom.alpha).exp();
        }
        for (a, b, w) in self.weight.pieces() {
            sum += w * ((z * b).exp() - (z * a).exp()) / z;
        }
        sum
    }

    /// ∫ α x^{−α} dμ(α).
    pub fn weighted_power_moment(&self, x: f64) -> Result<f64> {
        let log_x = x.ln();
        self.mu_integral(|alpha| alpha * (-alpha * log_x).exp())
    }

    /// Largest atom order, if any atom carries mass.
    pub fn top_atom(&self) -> Option<f64> {
        self.atoms.iter().rev().find(|a| a.q > 0.0).map(|a| a.alpha)
    }

    /// Supremum of the support of the weight density and the start of the last piece.
    fn weight_top_piece(&self) -> Option<(f64, f64)> {
        self.weight.pieces().last().map(|(a, b, _)| (a, b))
    }
}

/// A measure whose invariants have been checked. All kernel operations take
/// this type, so downstream code never sees an invalid μ.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Measure(MeasureSpec);

impl Measure {
    pub fn new(spec: MeasureSpec) -> Result<Self> {
        spec.validate().into_result()?;
        Ok(Self(spec))
    }

    pub fn spec(&self) -> &MeasureSpec {
        &self.0
    }

    pub fn into_spec(self) -> MeasureSpec {
        self.0
    }

    /// The order level γ̄: the top atom when no weight mass lies above it,
    /// otherwise the top of the weight support minus `gamma_slack`, clipped
    /// below by the top atom. Always leaves positive mass on [γ̄, 1).
    pub fn gamma_bar(&self) -> f64 {
        let atom = self.top_atom();
        match (atom, self.weight_top_piece()) {
            (Some(a), None) => a,
            (Some(a), Some((_, top))) if top <= a => a,
            (atom, Some((start, top))) => {
                let mut g = top - self.gamma_slack;
                if g <= start {
                    g = 0.5 * (start + top);
                }
                match atom {
                    Some(a) => g.max(a),
                    None => g,
                }
            }
            (None, None) => unreachable!("validated measure has positive mass"),
        }
    }

    /// Mass of μ on [γ̄, 1) and on (0, γ̄).
    pub fn split_mass(&self, gamma: f64) -> (f64, f64) {
        (
            self.restricted_below(gamma).total_mass(),
            self.restricted_above(gamma).total_mass(),
        )
    }

    /// c = 1 + μ((0,γ̄)) / μ([γ̄,1)), the constant with
    /// ∫₀¹ x^{−α} dμ ≤ c ∫_{γ̄}¹ x^{−α} dμ for x in (0, 1].
    pub fn domination_constant(&self) -> f64 {
        let (below, above) = self.split_mass(self.gamma_bar());
        1.0 + below / above
    }
}

impl Deref for Measure {
    type Target = MeasureSpec;
    fn deref(&self) -> &MeasureSpec {
        &self.0
    }
}

impl TryFrom<MeasureSpec> for Measure {
    type Error = Error;
    fn try_from(spec: MeasureSpec) -> Result<Self> {
        Measure::new(spec)
    }
}

/// Free-function form of [`MeasureSpec::validate`].
pub fn validate_measure(spec: &MeasureSpec) -> ValidationReport {
    spec.validate()
}

/// Free-function form of [`MeasureSpec::mu_integral`].
pub fn mu_integral<G: Fn(f64) -> f64>(measure: &Measure, g: G) -> Result<f64> {
    measure.mu_integral(g)
}

/// Free-function form of [`Measure::gamma_bar`].
pub fn gamma_bar(measure: &Measure) -> f64 {
    measure.gamma_bar()
}
