use nalgebra::{DMatrix, DVector};
use sro_core::reg::{FusedTransform, Regularizer};
use sro_core::rng::{derive_seed, gaussian_matrix, gaussian_vector, seeded};
use sro_core::solve::SolverConfig;
use sro_core::sro::{direct_solve, iterative_sro, iterative_sro_ihs, measure_contraction, reference_config, sro_solve, Problem, SroConfig};

fn tight() -> SolverConfig {
    SolverConfig {
        max_iters: 200_000,
        rel_tol: 1e-13,
        abs_tol: 1e-14,
        ..SolverConfig::default()
    }
}

fn low_rank_problem(n: usize, d: usize, r: usize, seed: u64, reg: Regularizer) -> Problem {
    let mut rng = seeded(seed);
    let x = gaussian_matrix(n, r, &mut rng) * gaussian_matrix(r, d, &mut rng) / (n as f64).sqrt();
    let beta = gaussian_vector(d, &mut rng) / (d as f64).sqrt();
    let y = &x * &beta + gaussian_vector(n, &mut rng) * 0.1;
    Problem::new(x, y, reg).unwrap()
}

fn seminorm(x: &DMatrix<f64>, v: &DVector<f64>) -> f64 {
    (x * v).norm()
}

#[test]
fn one_shot_unregularized_square_system_meets_bound() {
    let n = 10;
    let config = |seed| SroConfig {
        rho: 0.25,
        iterations: 1,
        solver: tight(),
        seed,
        ..SroConfig::default()
    };
    assert!((config(0).epsilon() - 0.2).abs() < 1e-15);
    let good = (0..50u64)
        .filter(|&k| {
            let mut rng = seeded(derive_seed(3, &[k]));
            let x = gaussian_matrix(n, n, &mut rng);
            let y = gaussian_vector(n, &mut rng);
            let problem = Problem::new(x.clone(), y.clone(), Regularizer::none()).unwrap();
            let star = x.clone().lu().solve(&y).unwrap();
            let run = sro_solve(&problem, &config(k)).unwrap();
            seminorm(&x, &(run.last() - &star)) <= 0.25 * seminorm(&x, &star)
        })
        .count();
    assert!(good >= 45, "{good}/50");
}

fn decay_fraction(ihs: bool, reg: Regularizer) -> usize {
    (0..20u64)
        .filter(|&k| {
            let problem = low_rank_problem(1500, 40, 5, 40 + k, reg.clone());
            let cfg = SroConfig {
                rank: Some(5),
                iterations: 5,
                solver: tight(),
                seed: k,
                ..SroConfig::default()
            };
            let star = direct_solve(&problem, &reference_config(&tight())).unwrap().beta;
            let run = if ihs { iterative_sro_ihs(&problem, &cfg) } else { iterative_sro(&problem, &cfg) }.unwrap();
            let report = measure_contraction(&run, problem.x(), &star).unwrap();
            report.errors.windows(2).all(|w| w[1] <= 0.6 * w[0] + 1e-12)
        })
        .count()
}

#[test]
fn iterative_error_contracts_geometrically() {
    for reg in [Regularizer::l1(0.01).unwrap(), Regularizer::ridge(0.01).unwrap()] {
        let fixed = decay_fraction(false, reg.clone());
        let fresh = decay_fraction(true, reg.clone());
        assert!(fixed >= 18, "{}: fixed sketch {fixed}/20", reg.penalty());
        assert!(fresh >= 18, "{}: fresh sketches {fresh}/20", reg.penalty());
    }
}

#[test]
fn iterative_ridge_approaches_closed_form() {
    let lambda = 0.05;
    for k in 0..5u64 {
        let problem = low_rank_problem(800, 60, 6, 70 + k, Regularizer::ridge(lambda).unwrap());
        let x = problem.x();
        let d = problem.d();
        let star = (x.transpose() * x + DMatrix::identity(d, d) * (2.0 * lambda))
            .cholesky()
            .unwrap()
            .solve(&(x.transpose() * problem.y()));
        let cfg = SroConfig {
            rank: Some(6),
            iterations: 6,
            solver: tight(),
            seed: k,
            ..SroConfig::default()
        };
        let run = iterative_sro(&problem, &cfg).unwrap();
        let rel = seminorm(x, &(run.last() - &star)) / seminorm(x, &star);
        assert!(rel <= cfg.rho.powi(cfg.iterations as i32) + 1e-8, "instance {k}: {rel}");
    }
}

#[test]
fn fused_iterative_beats_one_shot() {
    let (n, d) = (1000, 30);
    let mut rng = seeded(5);
    let x = gaussian_matrix(n, d, &mut rng) / (n as f64).sqrt();
    let y = gaussian_vector(n, &mut rng) / (n as f64).sqrt();
    let lambda = ((d as f64).ln() / n as f64).sqrt();
    let f = FusedTransform::new(d).unwrap();
    let problem = Problem::new(f.transform_design(&x).unwrap(), y, f.regularizer(lambda).unwrap()).unwrap();
    let cfg = SroConfig {
        sketch_rows: Some(4 * d),
        iterations: 10,
        solver: tight(),
        seed: 9,
        ..SroConfig::default()
    };
    let star = direct_solve(&problem, &reference_config(&tight())).unwrap().beta;
    let report = measure_contraction(&iterative_sro(&problem, &cfg).unwrap(), problem.x(), &star).unwrap();
    let e = &report.errors;
    assert!(report.log_slope.unwrap() < 0.0);
    assert!(e[e.len() - 1] <= e[1] / 2.0, "errors {e:?}");
}

#[test]
fn runs_are_bit_reproducible() {
    let problem = low_rank_problem(300, 30, 5, 1, Regularizer::mcp(0.02, 2.0).unwrap());
    let cfg = SroConfig {
        rank: Some(5),
        iterations: 3,
        seed: 17,
        ..SroConfig::default()
    };
    let a = iterative_sro(&problem, &cfg).unwrap();
    let b = iterative_sro(&problem, &cfg).unwrap();
    assert_eq!(a.iterates, b.iterates);
    assert_eq!(a.steps.iter().map(|s| s.solver_iterations).collect::<Vec<_>>(), b.steps.iter().map(|s| s.solver_iterations).collect::<Vec<_>>());
    let c = iterative_sro(&problem, &SroConfig { seed: 18, ..cfg }).unwrap();
    assert_ne!(a.iterates, c.iterates);
}

#[test]
fn fresh_sketches_cost_more_wall_clock() {
    let problem = low_rank_problem(10_000, 20, 5, 2, Regularizer::l1(0.01).unwrap());
    let cfg = SroConfig {
        sketch_rows: Some(200),
        iterations: 4,
        seed: 3,
        ..SroConfig::default()
    };
    let best = |ihs: bool| {
        (0..3)
            .map(|_| if ihs { iterative_sro_ihs(&problem, &cfg) } else { iterative_sro(&problem, &cfg) }.unwrap().total_ms)
            .fold(f64::INFINITY, f64::min)
    };
    let (fixed, fresh) = (best(false), best(true));
    assert!(fresh >= fixed, "fresh {fresh}ms < fixed {fixed}ms");
}
