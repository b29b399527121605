//! Experiment orchestration: one results directory per run with a manifest,
//! CSV tables and a JSON report.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{content_hash, Experiment, ExperimentConfig};
use crate::error::Result;
use crate::geometry::{phi_lambda_check, phi_lower_bound_check, scaling_certificate, scaling_exponent_limit};
use crate::harnack::{harnack_ensemble, oscillation_profile, strong_max_check, strong_max_cylinder, Verdict};
use crate::kernels::{bound_certificates, KernelGrid, KernelKind, ResolventProbe};
use crate::measure::Measure;
use crate::solver::{solve, Memory};
use crate::volterra::{sonine_product, yosida_kernels};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_VIOLATION: i32 = 2;

/// First node included in the Sonine residual; earlier nodes feel the
/// singular first cell.
pub const SONINE_SKIP: usize = 9;

#[derive(Debug, Clone, Serialize)]
pub struct RunOutcome {
    pub exit_code: i32,
    /// Hard-inequality violations counted across all certificates.
    pub violations: usize,
    pub files: Vec<String>,
    pub report: Value,
}

struct Outputs {
    dir: PathBuf,
    files: Vec<String>,
}

impl Outputs {
    fn create(&mut self, name: &str) -> Result<BufWriter<File>> {
        self.files.push(name.to_string());
        Ok(BufWriter::new(File::create(self.dir.join(name))?))
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.files.push(name.to_string());
        fs::write(self.dir.join(name), text)?;
        Ok(())
    }
}

/// Runs a validated config and writes its artifacts under `out`.
pub fn run(config: &ExperimentConfig, out: &Path) -> Result<RunOutcome> {
    config.validate().into_result()?;
    let experiment = config.experiment()?;
    fs::create_dir_all(out)?;
    let mut outputs = Outputs {
        dir: out.to_path_buf(),
        files: Vec::new(),
    };
    let measure = Measure::new(config.measure.clone())?;
    let (violations, report) = match experiment {
        Experiment::Kernels => run_kernels(config, &measure, &mut outputs)?,
        Experiment::Verify => run_verify(config, &measure, &mut outputs)?,
        Experiment::Solve => run_solve(config, &mut outputs)?,
        Experiment::Harnack => run_harnack(config, &mut outputs)?,
        Experiment::Holder => run_holder(config, &measure, &mut outputs)?,
    };
    outputs.json("report.json", &report)?;
    let manifest = json!({
        "experiment": experiment.name(),
        "version": env!("CARGO_PKG_VERSION"),
        "config_hash": content_hash(config)?,
        "measure_hash": content_hash(&config.measure)?,
        "seed": config.params.seed,
        "config": config,
        "files": outputs.files,
    });
    outputs.json("manifest.json", &manifest)?;
    Ok(RunOutcome {
        exit_code: if violations > 0 { EXIT_VIOLATION } else { EXIT_OK },
        violations,
        files: outputs.files,
        report,
    })
}

fn run_kernels(config: &ExperimentConfig, m: &Measure, out: &mut Outputs) -> Result<(usize, Value)> {
    let step = config.horizon / config.n_steps as f64;
    let theta = config.params.theta.unwrap_or(1.0);
    let kinds = [
        KernelKind::K,
        KernelKind::K1,
        KernelKind::OneStarK,
        KernelKind::L,
        KernelKind::RTheta { theta },
    ];
    let mut summary = serde_json::Map::new();
    let mut violations = 0;
    let mut l_values = Vec::new();
    for kind in kinds {
        let grid = KernelGrid::sample(m, kind, step, config.n_steps)?;
        let mut broken = grid.invariant_violations();
        match kind {
            KernelKind::L => l_values = grid.values.clone(),
            KernelKind::RTheta { .. } => {
                for (j, (r, l)) in grid.values.iter().zip(&l_values).enumerate() {
                    if r > l {
                        broken.push(format!("r_theta exceeds l at sample {}", j + 1));
                    }
                }
            }
            _ => {}
        }
        violations += broken.len();
        let name = if matches!(kind, KernelKind::RTheta { .. }) { "r_theta".to_string() } else { kind.name() };
        grid.write_csv(out.create(&format!("kernel_{name}.csv"))?)?;
        summary.insert(name, json!({ "samples": grid.len(), "invariant_violations": broken }));
    }
    Ok((violations, json!({ "step": step, "theta": theta, "kernels": summary })))
}

fn run_verify(config: &ExperimentConfig, m: &Measure, out: &mut Outputs) -> Result<(usize, Value)> {
    let n = config.n_steps;
    let step = config.horizon / n as f64;
    let probe = ResolventProbe {
        r: config.params.r.unwrap_or(ResolventProbe::default().r),
        ..ResolventProbe::default()
    };
    let certificates = bound_certificates(m, step, n, probe)?;
    {
        let mut w = csv::Writer::from_writer(out.create("certificates.csv")?);
        w.write_record(["t", "l", "upper", "slack", "c_low", "c_hold", "violated"])?;
        for s in &certificates.samples {
            let violated = s.slack < -crate::kernels::HARD_BOUND_SLACK;
            w.write_record([
                format!("{:?}", s.t),
                format!("{:?}", s.l),
                format!("{:?}", s.upper),
                format!("{:?}", s.slack),
                format!("{:?}", s.c_low),
                format!("{:?}", s.c_hold),
                violated.to_string(),
            ])?;
        }
        w.flush()?;
    }
    {
        let mut w = csv::Writer::from_writer(out.create("resolvent_chain.csv")?);
        w.write_record(["t", "r_theta", "mean_r_theta", "l", "inv_one_star_k"])?;
        for s in &certificates.chain.samples {
            w.write_record([s.t, s.r_theta, s.mean_r_theta, s.l, s.inv_one_star_k].map(|v| format!("{v:?}")))?;
        }
        w.flush()?;
    }

    let r_phi: Vec<f64> = (0..=12).map(|i| 1e-3 * 10f64.powf(i as f64 * 0.25)).collect();
    let lambdas = [0.1, 0.25, 0.5, 0.75, 1.0];
    let phi_lambda = phi_lambda_check(m, &r_phi, &lambdas)?;
    let r_lower: Vec<f64> = r_phi.iter().copied().filter(|r| *r < 1.0).collect();
    let phi_lower = phi_lower_bound_check(m, &r_lower)?;

    let sonine = sonine_product(m, step, n)?;
    let sonine_residual = sonine.iter().skip(SONINE_SKIP).map(|v| (v - 1.0).abs()).fold(0.0, f64::max);

    let p = 0.5 * (1.0 + scaling_exponent_limit(m));
    let scaling = scaling_certificate(m, p, &r_phi)?;
    scaling.write_csv(out.create("scaling.csv")?)?;

    let yosida = match config.params.n_yosida {
        Some(index) => {
            let k = KernelGrid::sample(m, KernelKind::K, step, n)?.to_discrete(m)?;
            let y = yosida_kernels(m, index, step, n)?;
            Some(json!({
                "n": index,
                "l1_distance": y.k.l1_distance(&k)?,
                "l1_norm_k": k.l1_norm(),
            }))
        }
        None => None,
    };

    let violations = certificates.violations + phi_lambda.violations + phi_lower.violations;
    let report = json!({
        "step": step,
        "gamma_bar": certificates.gamma_bar,
        "hard_violations": violations,
        "kernel_bound": {
            "violations": certificates.violations,
            "min_slack": certificates.min_slack,
            "c_low": [certificates.c_low_min, certificates.c_low_max],
            "c_hold": [certificates.c_hold_min, certificates.c_hold_max],
        },
        "resolvent_chain": {
            "theta": certificates.chain.theta,
            "window": certificates.chain.window,
            "ratio_min": certificates.chain.ratio_min,
            "ratio_max": certificates.chain.ratio_max,
        },
        "phi_lambda": phi_lambda,
        "phi_lower_bound": phi_lower,
        "sonine_residual": sonine_residual,
        "scaling": {
            "p": scaling.p,
            "plateau": scaling.plateau,
            "c_emp": scaling.c_emp,
            "r_admissible": scaling.r_admissible,
            "plateau_spread": scaling.plateau_spread(),
        },
        "yosida": yosida,
    });
    Ok((violations, report))
}

fn run_solve(config: &ExperimentConfig, out: &mut Outputs) -> Result<(usize, Value)> {
    let problem = config.problem()?;
    let u = solve(&problem)?;
    u.write_csv(out.create("solution.csv")?)?;
    let yosida = match config.params.n_yosida {
        Some(n) => {
            let mut regularized = problem.clone();
            regularized.memory = Memory::Yosida { n };
            Some(json!({ "n": n, "sup_distance": u.sup_distance(&solve(&regularized)?)? }))
        }
        None => None,
    };
    let mut violations = 0;
    let strong_max = match (&config.params.x0, config.params.r, config.params.t0) {
        (Some(x0), Some(r), Some(t0)) if problem.grid.dim > 0 => {
            let q = strong_max_cylinder(&problem.measure, t0, x0, r, config.params.tau.unwrap_or(1.0))?;
            let check = strong_max_check(&u, &q, 1e-10);
            if check.verdict == Verdict::Violated {
                violations += 1;
            }
            Some(check)
        }
        _ => None,
    };
    let report = json!({
        "step": u.step,
        "n_steps": u.n_steps(),
        "cells": u.u0.len(),
        "min": u.min(),
        "max": u.max(),
        "final": u.last(),
        "max_residual": u.max_residual(),
        "m_matrix": u.m_matrix,
        "wall_time_s": u.wall_time_s,
        "yosida": yosida,
        "strong_max": strong_max,
    });
    Ok((violations, report))
}

fn run_harnack(config: &ExperimentConfig, out: &mut Outputs) -> Result<(usize, Value)> {
    let problem = config.problem()?;
    let cfg = config.harnack()?;
    let base = config.params.seed.unwrap_or(0);
    let size = config.params.ensemble.unwrap_or(20) as u64;
    let seeds: Vec<u64> = (base..base + size).collect();
    let ensemble = harnack_ensemble(&problem, &cfg, &seeds)?;
    ensemble.write_csv(
        out.create("harnack.csv")?,
        problem.grid.total_cells(),
        &content_hash(&config.measure)?,
    )?;
    Ok((0, serde_json::to_value(&ensemble)?))
}

fn run_holder(config: &ExperimentConfig, m: &Measure, out: &mut Outputs) -> Result<(usize, Value)> {
    let problem = config.problem()?;
    let cfg = config.oscillation()?;
    let u = solve(&problem)?;
    let profile = oscillation_profile(&u, m, &cfg)?;
    profile.write_csv(out.create("oscillation.csv")?)?;
    Ok((0, serde_json::to_value(&profile)?))
}
