//! The twelve acceptance criteria at their pinned tolerances, one PASS/FAIL
//! line each. Runs without the libtest harness so the lines always print.

use std::time::Instant;

use memkern::geometry::{phi, scaling_certificate, scaling_exponent_limit};
use memkern::harnack::{
    ensemble_initial_data, harnack_ensemble, oscillation_profile, strong_max_check, strong_max_cylinder,
    weak_harnack_ratio, HarnackConfig, OscillationConfig, OscillationStatus, Verdict,
};
use memkern::kernels::{bound_certificates, l_eval, r_theta_eval, ResolventProbe};
use memkern::solver::{Boundary, CoefficientField, Forcing, InitialData, Memory, SpatialGrid};
use memkern::volterra::{fundamental_identity_residual, kernel_product, sonine_product, yosida_kernels};
use memkern::{solve, KernelGrid, KernelKind, Measure, MeasureSpec, Problem, SolutionField};

/// Nodes t < 10τ feel the singular first cell and are excluded.
const SKIP: usize = 9;

fn test_measures() -> Vec<(&'static str, Measure)> {
    [
        ("delta_0.3", MeasureSpec::dirac(0.3)),
        ("delta_0.5", MeasureSpec::dirac(0.5)),
        ("delta_0.8", MeasureSpec::dirac(0.8)),
        ("two_atom", MeasureSpec::atoms(&[(0.3, 0.5), (0.7, 0.5)])),
        ("w=1", MeasureSpec::uniform_weight(1.0)),
    ]
    .into_iter()
    .map(|(name, spec)| (name, Measure::new(spec).unwrap()))
    .collect()
}

fn half() -> Measure {
    Measure::new(MeasureSpec::dirac(0.5)).unwrap()
}

fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64))
        .collect()
}

/// E_{α,β}(z) by its power series with compensated summation.
fn mittag_leffler_oracle(alpha: f64, beta: f64, z: f64) -> f64 {
    let (mut sum, mut carry) = (0.0f64, 0.0f64);
    for j in 0..200 {
        let term = z.powi(j) / libm::tgamma(alpha * j as f64 + beta);
        let y = term - carry;
        let t = sum + y;
        carry = (t - sum) - y;
        sum = t;
    }
    sum
}

fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>()
}

fn dirichlet_interval(cells: usize, value: f64) -> SpatialGrid {
    SpatialGrid::interval(
        0.0,
        1.0,
        cells,
        Boundary::Dirichlet { value },
        Boundary::Dirichlet { value },
    )
}

fn pde(grid: SpatialGrid, horizon: f64, n_steps: usize, initial: InitialData) -> Problem {
    let dim = grid.dim;
    Problem {
        measure: half(),
        grid,
        coefficients: CoefficientField::identity(dim),
        horizon,
        n_steps,
        initial,
        forcing: Forcing::default(),
        reaction: 0.0,
        memory: Memory::Exact,
    }
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn sonine_identity() -> Outcome {
    let n = 2048;
    let start = Instant::now();
    let mut worst = (0.0f64, "");
    for (name, m) in test_measures() {
        let c = sonine_product(&m, 1.0 / n as f64, n).unwrap();
        let err = c.iter().skip(SKIP).map(|v| (v - 1.0).abs()).fold(0.0, f64::max);
        if err > worst.0 {
            worst = (err, name);
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    outcome(
        worst.0 <= 1e-3 && elapsed <= 10.0,
        format!("max |k*l - 1| = {:.2e} ({}), {elapsed:.1} s", worst.0, worst.1),
    )
}

fn single_order_closed_forms() -> Outcome {
    let (mut l_err, mut phi_err) = (0.0f64, 0.0f64);
    for alpha in [0.3, 0.5, 0.8] {
        let m = Measure::new(MeasureSpec::dirac(alpha)).unwrap();
        for t in log_space(0.01, 10.0, 20) {
            let l = l_eval(&m, t).unwrap();
            let exact = t.powf(alpha - 1.0) / libm::tgamma(alpha);
            l_err = l_err.max((l - exact).abs() / l);
        }
        for r in log_space(0.01, 10.0, 20) {
            let p = phi(&m, r).unwrap();
            phi_err = phi_err.max((p - r.powf(2.0 / alpha)).abs() / p);
        }
    }
    outcome(
        l_err <= 1e-6 && phi_err <= 1e-8,
        format!("l rel err {l_err:.2e}, Phi rel err {phi_err:.2e}"),
    )
}

fn hard_kernel_bound() -> Outcome {
    let n = 2048;
    let mut worst = (f64::INFINITY, "");
    for (name, m) in test_measures() {
        let rep = bound_certificates(&m, 1.0 / n as f64, n, ResolventProbe::default()).unwrap();
        if rep.min_slack < worst.0 {
            worst = (rep.min_slack, name);
        }
    }
    outcome(worst.0 >= -1e-12, format!("min slack {:.3e} ({})", worst.0, worst.1))
}

/// The absolute residual is pinned for δ_{0.5}. Near t = 10τ it scales with
/// l(10τ), which grows without bound as τ → 0 for strongly singular l, so the
/// other measures are held to the same bound relative to l.
fn resolvent() -> Outcome {
    let (n, theta) = (2048, 1.0);
    let tau = 1.0 / n as f64;
    let (mut absolute, mut relative, mut ordered) = (Vec::new(), 0.0f64, true);
    for (name, m) in test_measures() {
        let l = KernelGrid::sample(&m, KernelKind::L, tau, n).unwrap();
        let r = KernelGrid::sample(&m, KernelKind::RTheta { theta }, tau, n).unwrap();
        ordered &= r.values.iter().zip(&l.values).all(|(r, l)| *r >= 0.0 && r <= l);
        let c = kernel_product(&m, KernelKind::RTheta { theta }, KernelKind::L, tau, n).unwrap();
        let mut worst = 0.0f64;
        for ((rv, cv), lv) in r.values.iter().zip(&c).zip(&l.values).skip(SKIP) {
            let e = (rv + theta * cv - lv).abs();
            worst = worst.max(e);
            relative = relative.max(e / lv);
        }
        absolute.push((name, worst));
    }
    let half_residual = absolute.iter().find(|(name, _)| *name == "delta_0.5").unwrap().1;
    let value = r_theta_eval(&half(), 1.0, 1.0).unwrap();
    let oracle = mittag_leffler_oracle(0.5, 0.5, -1.0);
    let pass = half_residual <= 1e-3 && relative <= 1e-3 && (value - oracle).abs() <= 1e-3 && ordered;
    let listed: Vec<String> = absolute.iter().map(|(name, e)| format!("{name} {e:.1e}")).collect();
    outcome(
        pass,
        format!(
            "residual delta_0.5 {half_residual:.2e}, max relative {relative:.2e} (absolute: {}), r_1(1) = {value:.7} vs E_(1/2,1/2)(-1) = {oracle:.7} (printed reference 0.3368), 0 <= r <= l: {ordered}",
            listed.join(", ")
        ),
    )
}

fn yosida() -> Outcome {
    let n = 2048;
    let tau = 1.0 / n as f64;
    let m = half();
    let k = KernelGrid::sample(&m, KernelKind::K, tau, n).unwrap().to_discrete(&m).unwrap();
    let distances: Vec<f64> = [4.0, 16.0, 64.0, 256.0]
        .iter()
        .map(|&index| yosida_kernels(&m, index, tau, n).unwrap().k.l1_distance(&k).unwrap())
        .collect();
    let decreasing = distances.windows(2).all(|w| w[1] < w[0]);
    let relative = distances[3] / k.l1_norm();
    outcome(
        decreasing && relative <= 0.05,
        format!(
            "L1 distances {}, n=256 relative {relative:.3e}",
            distances.iter().map(|d| format!("{d:.3e}")).collect::<Vec<_>>().join(" > ")
        ),
    )
}

fn fundamental_identity() -> Outcome {
    let m = half();
    let run = |n: usize| {
        let tau = 1.0 / n as f64;
        let k = yosida_kernels(&m, 64.0, tau, n).unwrap().k;
        let u: Vec<f64> = (0..=n).map(|j| 1.0 + j as f64 * tau).collect();
        let rep = fundamental_identity_residual(&k, &u, |y| y * y, |y| 2.0 * y).unwrap();
        // Direct expansion of the left side: 2u(t)·(k(t)u(0) + (k∗u′)(t)).
        let mut k_nodes = vec![k.origin().unwrap()];
        k_nodes.extend_from_slice(k.values());
        let mut oracle_gap = 0.0f64;
        for j in [n / 4, n / 2, 3 * n / 4] {
            let one_star_k: f64 = (0..j).map(|i| 0.5 * (k_nodes[i] + k_nodes[i + 1]) * tau).sum();
            let exact = 2.0 * u[j] * (k_nodes[j] + one_star_k);
            oracle_gap = oracle_gap.max((rep.lhs[j - 1] - exact).abs());
        }
        (rep.residual, rep.negative_remainders, oracle_gap)
    };
    let (r1, neg1, gap1) = run(1024);
    let (r2, neg2, gap2) = run(2048);
    let ratio = r2 / r1;
    let pass = r1 <= 1e-2 && ratio <= 0.55 && neg1 + neg2 == 0 && gap1.max(gap2) <= 1e-2;
    outcome(
        pass,
        format!(
            "residual {r1:.2e} -> {r2:.2e} (ratio {ratio:.3}), negative remainders {}, lhs vs expansion {:.1e}",
            neg1 + neg2,
            gap1.max(gap2)
        ),
    )
}

fn ode_mode() -> Outcome {
    let relax = |alpha: f64, n: usize| {
        let m = Measure::new(MeasureSpec::dirac(alpha)).unwrap();
        solve(&Problem::relaxation(m, 1.0, 1.0, 1.0, n)).unwrap().last()[0]
    };
    let exact = std::f64::consts::E * libm::erfc(1.0);
    let err_half = (relax(0.5, 4096) - exact).abs();
    let err_classical = (relax(0.999, 4096) - (-1f64).exp()).abs();
    let ns = [256usize, 512, 1024, 2048];
    let xs: Vec<f64> = ns.iter().map(|n| (1.0 / *n as f64).ln()).collect();
    let ys: Vec<f64> = ns.iter().map(|&n| (relax(0.5, n) - exact).abs().ln()).collect();
    let order = least_squares_slope(&xs, &ys);
    outcome(
        err_half <= 1e-3 && err_classical <= 2e-2 && order >= 1.0,
        format!("|u(1) - e erfc(1)| = {err_half:.2e}, delta_0.999 err {err_classical:.2e}, order {order:.3}"),
    )
}

fn pde_sanity() -> Outcome {
    let constant = InitialData::Constant { value: 0.7 };
    let neumann_1d = SpatialGrid::interval(0.0, 1.0, 64, Boundary::NeumannZero, Boundary::NeumannZero);
    let neumann_2d = SpatialGrid::rectangle((0.0, 1.0), (0.0, 1.0), (16, 16), [Boundary::NeumannZero; 4]);
    let mut drift = 0.0f64;
    for grid in [neumann_1d, neumann_2d] {
        let u = solve(&pde(grid, 0.5, 64, constant.clone())).unwrap();
        drift = drift.max(u.values.iter().flatten().map(|v| (v - 0.7).abs()).fold(0.0, f64::max));
    }
    let mut minimum = f64::INFINITY;
    for seed in 0..10 {
        let u = solve(&pde(dirichlet_interval(64, 0.0), 0.5, 64, ensemble_initial_data(seed))).unwrap();
        assert!(u.u0.iter().all(|v| *v >= 0.0));
        minimum = minimum.min(u.min());
    }
    outcome(
        drift <= 1e-12 && minimum >= -1e-12,
        format!("constant drift {drift:.1e}, min over 10 random runs {minimum:.2e}"),
    )
}

fn scaling() -> Outcome {
    let r_grid: Vec<f64> = (0..=60).map(|i| 1e-3 * 10f64.powf(i as f64 * 0.05)).collect();
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, m) in test_measures() {
        let p = 0.5 * (1.0 + scaling_exponent_limit(&m));
        let rep = scaling_certificate(&m, p, &r_grid).unwrap();
        let finite = rep.rows.iter().all(|row| row.ratio.is_finite() && row.ratio > 0.0);
        let spread = rep.plateau_spread();
        pass &= finite && rep.r_admissible.is_some() && spread <= 4.0;
        parts.push(format!(
            "{name}: p={p:.2} r_adm={:.2e} spread={spread:.2}",
            rep.r_admissible.unwrap_or(f64::NAN)
        ));
    }
    outcome(pass, parts.join("; "))
}

fn harnack_config() -> HarnackConfig {
    HarnackConfig {
        t0: 0.0,
        x0: vec![0.5],
        r: 0.25,
        delta: 0.5,
        tau: 1.0,
        p: 1.0,
    }
}

fn weak_harnack() -> Outcome {
    let cfg = harnack_config();
    let seeds: Vec<u64> = (0..20).collect();
    let ensemble = |cells: usize| {
        let template = pde(dirichlet_interval(cells, 0.0), 0.125, 64, InitialData::Constant { value: 1.0 });
        harnack_ensemble(&template, &cfg, &seeds).unwrap()
    };
    let (coarse, fine) = (ensemble(64), ensemble(128));
    let all_finite = coarse.all_finite && fine.all_finite;
    let (a, b) = (coarse.max_ratio.unwrap_or(f64::NAN), fine.max_ratio.unwrap_or(f64::NAN));
    let change = (b - a).abs() / a;
    let grid = SpatialGrid::interval(0.0, 1.0, 64, Boundary::NeumannZero, Boundary::NeumannZero);
    let constant = SolutionField::from_slices(grid, 0.125 / 64.0, vec![vec![2.0; 64]; 65], vec![0.0; 64]).unwrap();
    let constant_ratio = weak_harnack_ratio(&constant, &half(), &cfg).unwrap().ratio;
    outcome(
        all_finite && change <= 0.2 && constant_ratio == Some(1.0),
        format!("all finite: {all_finite}, max ratio {a:.4} (64) vs {b:.4} (128), change {change:.3}, constant ratio {constant_ratio:?}"),
    )
}

fn holder() -> Outcome {
    let m = half();
    let horizon = 1.5 * 0.25 * phi(&m, 0.25).unwrap();
    let cfg = |j0: Option<u32>| OscillationConfig {
        t1: horizon,
        x1: vec![640.5 / 1024.0],
        x0: vec![0.5],
        r: 0.25,
        theta: 1.0,
        eta: 0.25,
        j0,
        j1: 6,
    };
    let sine = InitialData::Sine {
        amplitude: 1.0,
        modes: vec![1],
        offset: 0.0,
    };
    let smooth_u = solve(&pde(dirichlet_interval(1024, 0.0), horizon, 16, sine)).unwrap();
    let smooth = oscillation_profile(&smooth_u, &m, &cfg(None)).unwrap();
    let (kappa, residual) = (smooth.kappa.unwrap_or(f64::NAN), smooth.fit_residual.unwrap_or(f64::NAN));

    let linear = InitialData::Linear {
        offset: 0.0,
        slope: vec![1.0],
    };
    let mut p = pde(dirichlet_interval(1024, 0.0), horizon, 16, linear);
    p.grid.boundary = vec![Boundary::Dirichlet { value: 0.0 }, Boundary::Dirichlet { value: 1.0 }];
    let linear = oscillation_profile(&solve(&p).unwrap(), &m, &cfg(Some(0))).unwrap();
    let linear_kappa = linear.kappa.unwrap_or(f64::NAN);

    let flat_grid = SpatialGrid::interval(0.0, 1.0, 64, Boundary::NeumannZero, Boundary::NeumannZero);
    let flat_u = SolutionField::from_slices(flat_grid, 1e-4, vec![vec![1.5; 64]; 33], vec![0.0; 64]).unwrap();
    let flat_cfg = OscillationConfig {
        t1: 0.0015,
        x1: vec![0.5],
        j1: 4,
        ..cfg(None)
    };
    let flat = oscillation_profile(&flat_u, &m, &flat_cfg).unwrap();
    outcome(
        kappa > 0.0 && residual <= 0.2 && (linear_kappa - 1.0).abs() <= 0.05 && flat.status == OscillationStatus::Flat,
        format!(
            "smooth kappa {kappa:.3} (residual {residual:.3}), linear kappa {linear_kappa:.6}, constant {:?}",
            flat.status
        ),
    )
}

fn strong_max() -> Outcome {
    let m = half();
    let q = strong_max_cylinder(&m, 0.05, &[0.5], 0.25, 1.0).unwrap();
    let constant = solve(&pde(dirichlet_interval(32, 3.0), 0.125, 64, InitialData::Constant { value: 3.0 })).unwrap();
    let sine = InitialData::Sine {
        amplitude: 1.0,
        modes: vec![1],
        offset: 0.0,
    };
    let heat = solve(&pde(dirichlet_interval(32, 0.0), 0.125, 64, sine)).unwrap();
    let constant_verdict = strong_max_check(&constant, &q, 1e-10).verdict;
    let heat_verdict = strong_max_check(&heat, &q, 1e-10).verdict;
    let mut verdicts = vec![constant_verdict, heat_verdict];
    for seed in 0..10 {
        let u = solve(&pde(dirichlet_interval(32, 0.0), 0.125, 64, ensemble_initial_data(seed))).unwrap();
        verdicts.push(strong_max_check(&u, &q, 1e-10).verdict);
    }
    let violated = verdicts.iter().filter(|v| **v == Verdict::Violated).count();
    outcome(
        constant_verdict == Verdict::Consistent && heat_verdict == Verdict::NotApplicable && violated == 0,
        format!(
            "constant {constant_verdict:?}, heat-like {heat_verdict:?}, violated {violated}/{}",
            verdicts.len()
        ),
    )
}

fn main() {
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: [Criterion; 12] = [
        ("sonine identity", sonine_identity),
        ("single-order closed forms", single_order_closed_forms),
        ("hard kernel bound", hard_kernel_bound),
        ("resolvent", resolvent),
        ("yosida", yosida),
        ("fundamental identity", fundamental_identity),
        ("ode mode", ode_mode),
        ("pde sanity", pde_sanity),
        ("scaling certificate", scaling),
        ("weak harnack", weak_harnack),
        ("holder", holder),
        ("strong maximum principle", strong_max),
    ];
    let mut failed = Vec::new();
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = check();
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        println!(
            "[{verdict}] {:>2}. {name}: {} [{:.1} s]",
            i + 1,
            o.detail,
            start.elapsed().as_secs_f64()
        );
        if !o.pass {
            failed.push(i + 1);
        }
    }
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
    println!("all 12 criteria passed");
}
