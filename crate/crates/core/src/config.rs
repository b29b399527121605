//! Experiment configuration: JSON in, validated config out, every problem
//! reported with a JSON pointer.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result, ValidationReport};
use crate::geometry::phi;
use crate::harnack::{critical_exponent, HarnackConfig, OscillationConfig};
use crate::measure::{Measure, MeasureSpec};
use crate::solver::{CoefficientField, Forcing, InitialData, Memory, Problem, SpatialGrid};

pub const MIN_STEPS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Kernels,
    Verify,
    Solve,
    Harnack,
    Holder,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Kernels => "kernels",
            Experiment::Verify => "verify",
            Experiment::Solve => "solve",
            Experiment::Harnack => "harnack",
            Experiment::Holder => "holder",
        }
    }
}

/// Experiment-specific parameters; which ones are required depends on the experiment.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    /// Resolvent parameter for kernels and verify; cylinder height factor for holder.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x1: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub j0: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub j1: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_yosida: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Harnack ensemble size.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ensemble: Option<usize>,
}

fn default_horizon() -> f64 {
    1.0
}

fn default_steps() -> usize {
    1024
}

fn default_initial() -> InitialData {
    InitialData::Constant { value: 1.0 }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// May be left out when the CLI subcommand supplies it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<Experiment>,
    pub measure: MeasureSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<SpatialGrid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<CoefficientField>,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_steps")]
    pub n_steps: usize,
    #[serde(default = "default_initial")]
    pub initial: InitialData,
    #[serde(default)]
    pub forcing: Forcing,
    #[serde(default)]
    pub reaction: f64,
    #[serde(default)]
    pub params: Params,
}

impl ExperimentConfig {
    pub fn minimal(measure: MeasureSpec, experiment: Experiment) -> Self {
        Self {
            experiment: Some(experiment),
            measure,
            grid: None,
            coefficients: None,
            horizon: default_horizon(),
            n_steps: default_steps(),
            initial: default_initial(),
            forcing: Forcing::default(),
            reaction: 0.0,
            params: Params::default(),
        }
    }

    pub fn experiment(&self) -> Result<Experiment> {
        self.experiment.ok_or_else(|| {
            let mut report = ValidationReport::default();
            report.push("/experiment", "experiment not given in the config or on the command line");
            Error::Validation(report)
        })
    }

    pub fn grid(&self) -> SpatialGrid {
        self.grid.clone().unwrap_or_else(SpatialGrid::ode)
    }

    pub fn coefficients(&self) -> CoefficientField {
        self.coefficients
            .clone()
            .unwrap_or_else(|| CoefficientField::identity(self.grid().dim))
    }

    pub fn problem(&self) -> Result<Problem> {
        let mut initial = self.initial.clone();
        if let (InitialData::RandomFourier { seed, .. }, Some(s)) = (&mut initial, self.params.seed) {
            *seed = s;
        }
        Ok(Problem {
            measure: Measure::new(self.measure.clone())?,
            grid: self.grid(),
            coefficients: self.coefficients(),
            horizon: self.horizon,
            n_steps: self.n_steps,
            initial,
            forcing: self.forcing.clone(),
            reaction: self.reaction,
            memory: Memory::Exact,
        })
    }

    pub fn harnack(&self) -> Result<HarnackConfig> {
        let p = &self.params;
        Ok(HarnackConfig {
            t0: p.t0.unwrap_or(0.0),
            x0: required(&p.x0, "x0")?,
            r: required(&p.r, "r")?,
            delta: p.delta.unwrap_or(0.5),
            tau: p.tau.unwrap_or(1.0),
            p: p.p.unwrap_or(1.0),
        })
    }

    pub fn oscillation(&self) -> Result<OscillationConfig> {
        let p = &self.params;
        Ok(OscillationConfig {
            t1: required(&p.t1, "t1")?,
            x1: required(&p.x1, "x1")?,
            x0: required(&p.x0, "x0")?,
            r: required(&p.r, "r")?,
            theta: p.theta.unwrap_or(1.0),
            eta: p.eta.unwrap_or(0.25),
            j0: p.j0,
            j1: p.j1.unwrap_or(6),
        })
    }

    /// Every invariant of the config and its parts; paths are JSON pointers.
    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::default();
        let measure_report = self.measure.validate();
        let measure_ok = measure_report.is_valid();
        report.extend_prefixed("/measure", measure_report);
        let Some(experiment) = self.experiment else {
            report.push("/experiment", "experiment not given in the config or on the command line");
            return report;
        };
        if self.n_steps < MIN_STEPS {
            report.push("/n_steps", format!("n_steps must be at least {MIN_STEPS}, got {}", self.n_steps));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            report.push("/horizon", format!("horizon must be positive, got {}", self.horizon));
        }
        if let Some(n) = self.params.n_yosida {
            if !(n > 0.0 && n.is_finite()) {
                report.push("/params/n_yosida", format!("Yosida index must be positive, got {n}"));
            }
        }
        if let Some(theta) = self.params.theta {
            if !(theta >= 0.0 && theta.is_finite()) {
                report.push("/params/theta", format!("theta must be nonnegative, got {theta}"));
            }
        }
        if matches!(experiment, Experiment::Kernels | Experiment::Verify) {
            return report;
        }

        let spatial = matches!(experiment, Experiment::Harnack | Experiment::Holder);
        match &self.grid {
            None if spatial => report.push("/grid", format!("{} needs a spatial grid", experiment.name())),
            Some(g) => {
                let grid_report = g.validate();
                if grid_report.is_valid() {
                    if spatial && g.dim == 0 {
                        report.push("/grid/dim", format!("{} needs dim 1 or 2", experiment.name()));
                    }
                    if let Some(c) = &self.coefficients {
                        report.extend_prefixed("/coefficients", c.validate(g));
                    }
                    if let Err(e) = self.initial.sample(g) {
                        report.push("/initial", e.to_string());
                    }
                    if let Err(e) = self.forcing.sample(g) {
                        report.push("/forcing", e.to_string());
                    }
                }
                report.extend_prefixed("/grid", grid_report);
            }
            None => {}
        }
        if !(self.reaction >= 0.0 && self.reaction.is_finite()) {
            report.push("/reaction", format!("reaction must be nonnegative, got {}", self.reaction));
        }
        if !measure_ok {
            return report;
        }
        let Ok(measure) = Measure::new(self.measure.clone()) else {
            return report;
        };
        let dim = self.grid().dim;
        match experiment {
            Experiment::Harnack => self.validate_harnack(&measure, dim, &mut report),
            Experiment::Holder => self.validate_holder(&measure, dim, &mut report),
            _ => {}
        }
        report
    }

    fn validate_harnack(&self, m: &Measure, dim: usize, report: &mut ValidationReport) {
        let p = &self.params;
        require(report, p.x0.is_some(), "/params/x0");
        require(report, p.r.is_some(), "/params/r");
        if let Some(x0) = &p.x0 {
            if dim > 0 && x0.len() != dim {
                report.push("/params/x0", format!("x0 needs {dim} coordinates"));
            }
        }
        let exponent = p.p.unwrap_or(1.0);
        if dim > 0 {
            if let Ok(kappa) = critical_exponent(m.gamma_bar(), dim) {
                if !(exponent > 0.0 && exponent < kappa) {
                    report.push(
                        "/params/p",
                        format!("p exceeds κ̃ bound: p = {exponent} must lie in (0, {kappa})"),
                    );
                }
            }
        }
        let delta = p.delta.unwrap_or(0.5);
        if !(delta > 0.0 && delta < 1.0) {
            report.push("/params/delta", format!("delta must lie in (0,1), got {delta}"));
        }
        let tau = p.tau.unwrap_or(1.0);
        if !(tau > 0.0) {
            report.push("/params/tau", format!("tau must be positive, got {tau}"));
        }
        let t0 = p.t0.unwrap_or(0.0);
        if !(t0 >= 0.0) {
            report.push("/params/t0", format!("t0 must be nonnegative, got {t0}"));
        }
        if let Some(r) = p.r {
            if !(r > 0.0) {
                report.push("/params/r", format!("r must be positive, got {r}"));
            } else if let Ok(phi_2r) = phi(m, 2.0 * r) {
                let end = t0 + 2.0 * tau * phi_2r;
                if end > self.horizon * (1.0 + 1e-12) {
                    report.push("/horizon", format!("horizon must reach t0 + 2τΦ(2r) = {end}"));
                }
            }
        }
        if p.ensemble == Some(0) {
            report.push("/params/ensemble", "ensemble must have at least one member");
        }
    }

    fn validate_holder(&self, m: &Measure, dim: usize, report: &mut ValidationReport) {
        let p = &self.params;
        for (present, path) in [
            (p.t1.is_some(), "/params/t1"),
            (p.x1.is_some(), "/params/x1"),
            (p.x0.is_some(), "/params/x0"),
            (p.r.is_some(), "/params/r"),
        ] {
            require(report, present, path);
        }
        for (value, path) in [(&p.x0, "/params/x0"), (&p.x1, "/params/x1")] {
            if let Some(x) = value {
                if dim > 0 && x.len() != dim {
                    report.push(path, format!("needs {dim} coordinates"));
                }
            }
        }
        let eta = p.eta.unwrap_or(0.25);
        if let (Some(r), Some(t1)) = (p.r, p.t1) {
            if r > 0.0 && eta > 0.0 {
                if let Ok(phi_r) = phi(m, r) {
                    let (lo, hi) = (eta * phi_r, 2.0 * eta * phi_r);
                    if !(t1 > lo && t1 < hi) {
                        report.push("/params/t1", format!("t1 must lie in (ηΦ(r), 2ηΦ(r)) = ({lo}, {hi})"));
                    }
                    if t1 > self.horizon * (1.0 + 1e-12) {
                        report.push("/horizon", format!("horizon must reach t1 = {t1}"));
                    }
                }
            } else {
                report.push("/params/r", "r and eta must be positive");
            }
        }
    }
}

fn required<T: Clone>(value: &Option<T>, name: &str) -> Result<T> {
    value.clone().ok_or_else(|| {
        let mut report = ValidationReport::default();
        report.push(format!("/params/{name}"), "required parameter missing");
        Error::Validation(report)
    })
}

fn require(report: &mut ValidationReport, present: bool, path: &str) {
    if !present {
        report.push(path, "required parameter missing");
    }
}

/// Parses and validates a JSON config.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let config: ExperimentConfig = serde_json::from_str(text)?;
    config.validate().into_result()?;
    Ok(config)
}

/// Hex SHA-256 of the compact JSON serialization.
pub fn content_hash<T: Serialize>(value: &T) -> Result<String> {
    let bytes = serde_json::to_vec(value)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}
