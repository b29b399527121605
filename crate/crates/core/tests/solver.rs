use memkern::solver::{
    conv_weights, mittag_leffler, solve, Boundary, CoefficientField, Forcing, InitialData, Memory, Problem, SpatialGrid,
};
use memkern::{Measure, MeasureSpec};

fn dirac(alpha: f64) -> Measure {
    Measure::new(MeasureSpec::dirac(alpha)).unwrap()
}

fn interval_problem(initial: InitialData, forcing: Forcing) -> Problem {
    Problem {
        measure: Measure::new(MeasureSpec::atoms(&[(0.3, 0.5), (0.7, 0.5)])).unwrap(),
        grid: SpatialGrid::interval(0.0, 1.0, 40, Boundary::Dirichlet { value: 0.0 }, Boundary::NeumannZero),
        coefficients: CoefficientField::identity(1),
        horizon: 0.2,
        n_steps: 40,
        initial,
        forcing,
        reaction: 0.0,
        memory: Memory::Exact,
    }
}

#[test]
fn relaxation_converges_at_first_order() {
    let exact = std::f64::consts::E * libm::erfc(1.0);
    let ns = [256usize, 512, 1024, 2048];
    let errors: Vec<f64> = ns
        .iter()
        .map(|&n| (solve(&Problem::relaxation(dirac(0.5), 1.0, 1.0, 1.0, n)).unwrap().last()[0] - exact).abs())
        .collect();
    let xs: Vec<f64> = ns.iter().map(|n| (1.0 / *n as f64).ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / 4.0, ys.iter().sum::<f64>() / 4.0);
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    assert!(slope >= 1.0, "order {slope}, errors {errors:?}");
}

#[test]
fn relaxation_matches_mittag_leffler_over_time() {
    let u = solve(&Problem::relaxation(dirac(0.3), 2.0, 1.0, 1.0, 2048)).unwrap();
    for m in [256, 1024, 2048] {
        let t = u.times[m];
        let exact = mittag_leffler(0.3, -2.0 * t.powf(0.3)).unwrap();
        assert!((u.values[m][0] - exact).abs() < 5e-3, "t={t}: {} vs {exact}", u.values[m][0]);
    }
}

#[test]
fn near_classical_order_relaxes_exponentially() {
    let u = solve(&Problem::relaxation(dirac(0.999), 1.0, 1.0, 1.0, 1024)).unwrap();
    assert!((u.last()[0] - (-1f64).exp()).abs() < 2e-2);
}

#[test]
fn yosida_memory_stays_close() {
    let mut p = Problem::relaxation(dirac(0.5), 1.0, 1.0, 1.0, 1024);
    let exact = solve(&p).unwrap();
    p.memory = Memory::Yosida { n: 256.0 };
    let regularized = solve(&p).unwrap();
    assert!(exact.sup_distance(&regularized).unwrap() <= 5e-2);
}

#[test]
fn solution_is_linear_in_data() {
    let u1 = InitialData::Sine {
        amplitude: 1.0,
        modes: vec![1],
        offset: 0.0,
    };
    let u2 = InitialData::Linear {
        offset: 0.0,
        slope: vec![2.0],
    };
    let grid = interval_problem(u1.clone(), Forcing::default()).grid;
    let sum: Vec<f64> = u1
        .sample(&grid)
        .unwrap()
        .iter()
        .zip(u2.sample(&grid).unwrap())
        .map(|(a, b)| a + b)
        .collect();
    let f1 = Forcing::Constant { value: 1.5 };
    let f2 = Forcing::Table {
        values: (0..40).map(|i| (i as f64 * 0.3).cos()).collect(),
    };
    let f_sum = Forcing::Table {
        values: (0..40).map(|i| 1.5 + (i as f64 * 0.3).cos()).collect(),
    };
    let a = solve(&interval_problem(u1, f1)).unwrap();
    let b = solve(&interval_problem(u2, f2)).unwrap();
    let c = solve(&interval_problem(InitialData::Table { values: sum }, f_sum)).unwrap();
    for m in 0..=40 {
        for i in 0..40 {
            assert!((a.values[m][i] + b.values[m][i] - c.values[m][i]).abs() < 1e-10);
        }
    }
}

#[test]
fn step_matrix_is_m_matrix_for_rough_coefficients() {
    let p = Problem {
        measure: dirac(0.5),
        grid: SpatialGrid::rectangle((0.0, 1.0), (0.0, 2.0), (10, 20), [Boundary::Dirichlet { value: 0.0 }; 4]),
        coefficients: CoefficientField {
            descriptor: memkern::solver::CoefficientDescriptor::Checkerboard {
                low: 0.1,
                high: 10.0,
                block: 1,
            },
            lambda: 15.0,
            nu: 0.1,
        },
        horizon: 0.1,
        n_steps: 16,
        initial: InitialData::RandomFourier {
            seed: 3,
            modes: 5,
            amplitude: 1.0,
            offset: 0.2,
        },
        forcing: Forcing::default(),
        reaction: 0.0,
        memory: Memory::Exact,
    };
    let u = solve(&p).unwrap();
    assert!(u.m_matrix);
    assert!(u.min() >= -1e-12);
    assert!(u.max_residual() <= 1e-10);
}

#[test]
fn first_weight_is_independent_of_step_index() {
    let m = Measure::new(MeasureSpec::uniform_weight(1.0)).unwrap();
    let tau = 0.01;
    let single = conv_weights(&m, 1, tau).unwrap()[0];
    for step in [2, 7, 30] {
        let w = conv_weights(&m, step, tau).unwrap();
        assert!((w[step - 1] - single).abs() < 1e-12 * single);
        assert!(w.iter().all(|b| *b > 0.0));
        assert!(w.windows(2).all(|p| p[0] < p[1]));
    }
}

#[test]
fn csv_export_lists_every_cell() {
    let p = Problem {
        measure: dirac(0.5),
        grid: SpatialGrid::rectangle((0.0, 1.0), (0.0, 1.0), (3, 4), [Boundary::NeumannZero; 4]),
        coefficients: CoefficientField::identity(2),
        horizon: 0.1,
        n_steps: 2,
        initial: InitialData::Constant { value: 0.1 },
        forcing: Forcing::default(),
        reaction: 0.0,
        memory: Memory::Exact,
    };
    let u = solve(&p).unwrap();
    let mut buf = Vec::new();
    u.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,i,j,value"));
    assert_eq!(lines.clone().count(), 3 * 12);
    assert_eq!(lines.next(), Some("0.0,0,0,0.1"));
}
