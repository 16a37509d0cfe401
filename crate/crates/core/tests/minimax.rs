mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stratdesign::optimizer::{
    allocation_from_sigmas, maximize_worst_case, objective_value, worst_case_regret, Problem,
};
use stratdesign::pipeline::design;
use stratdesign::regions::{Point, VarianceRegion, MAX_VARIANCE};
use stratdesign::sim::{generate_observational, SyntheticSpec, SyntheticStratum, Weighting};
use stratdesign::{default_allocation, risk, ArmPair, DefaultRule, DesignConfig, SolverConfig};

fn solve(regions: &[VarianceRegion], weights: &[f64], n_r: u64) -> (Problem, stratdesign::optimizer::SolveReport) {
    let default = default_allocation(DefaultRule::Equal, n_r, weights).unwrap();
    let problem = Problem::new(weights.to_vec(), n_r, &default, common::FLOOR).unwrap();
    let report = maximize_worst_case(regions, &problem, &SolverConfig::default()).unwrap();
    (problem, report)
}

/// Regret of allocation `n` maximized over sampled region points.
fn sampled_worst(n: &[ArmPair<f64>], samples: &[Vec<Point>], problem: &Problem) -> f64 {
    n.iter()
        .zip(samples)
        .zip(problem.weights.iter().zip(&problem.default))
        .map(|((a, pts), (w, d))| {
            let g = [w * (1.0 / a.control - 1.0 / d.control), w * (1.0 / a.treated - 1.0 / d.treated)];
            pts.iter().map(|p| g[0] * p[0] + g[1] * p[1]).fold(f64::NEG_INFINITY, f64::max)
        })
        .sum()
}

#[test]
fn two_strata_saddle_matches_brute_force() {
    let regions = [
        VarianceRegion::new(common::rotated([0.05, 0.2], 0.03, 0.06, 0.4), common::FLOOR, MAX_VARIANCE),
        VarianceRegion::new(common::rotated([0.2, 0.06], 0.05, 0.025, -0.3), common::FLOOR, MAX_VARIANCE),
    ];
    let weights = [0.5, 0.5];
    let n_r = 1000;
    let (problem, report) = solve(&regions, &weights, n_r);
    let samples: Vec<Vec<Point>> = regions.iter().map(|r| common::region_samples(r, 50, 400)).collect();

    // Allocations as shares of the budget (a, b, c, 1 - a - b - c), refined
    // around the incumbent on successively finer lattices.
    let total = n_r as f64;
    let eval = |x: [f64; 3]| -> f64 {
        let last = 1.0 - x.iter().sum::<f64>();
        if x.iter().any(|v| *v <= 0.0) || last <= 0.0 {
            return f64::INFINITY;
        }
        let n = [ArmPair::new(x[0] * total, x[1] * total), ArmPair::new(x[2] * total, last * total)];
        sampled_worst(&n, &samples, &problem)
    };
    let mut best = ([0.25; 3], eval([0.25; 3]));
    let mut span = 0.25;
    for _ in 0..8 {
        let center = best.0;
        let steps = 10;
        for i in -steps..=steps {
            for j in -steps..=steps {
                for k in -steps..=steps {
                    let s = span / steps as f64;
                    let x = [center[0] + i as f64 * s, center[1] + j as f64 * s, center[2] + k as f64 * s];
                    let v = eval(x);
                    if v < best.1 {
                        best = (x, v);
                    }
                }
            }
        }
        span /= 4.0;
    }
    let brute = best.1;
    assert!(brute < 0.0);
    let rel = (report.objective - brute).abs() / brute.abs();
    assert!(rel < 0.02, "solver {} vs brute force {}", report.objective, brute);
}

#[test]
fn saddle_value_equals_worst_case_regret() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..40 {
        let k = rng.gen_range(2..6);
        let weights = common::random_weights(&mut rng, k);
        let regions: Vec<VarianceRegion> = (0..k).map(|_| common::random_region(&mut rng, 0.005, 0.08)).collect();
        let (problem, report) = solve(&regions, &weights, 2000);
        let alloc = allocation_from_sigmas(&report.sigmas, &weights, 2000).unwrap();
        let wc = worst_case_regret(&alloc.continuous, &regions, &problem.default, &weights).unwrap();
        let f = objective_value(&report.sigmas, &problem).unwrap();
        assert!((f - wc).abs() < 1e-6, "{f} vs {wc}");
        assert!(report.objective <= 1e-12);
    }
}

#[test]
fn rounding_costs_little_at_large_budgets() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..100 {
        let k = rng.gen_range(2..8);
        let weights = common::random_weights(&mut rng, k);
        let regions: Vec<VarianceRegion> = (0..k).map(|_| common::random_region(&mut rng, 0.005, 0.08)).collect();
        let n_r = rng.gen_range(20_000..60_000);
        let (_, report) = solve(&regions, &weights, n_r);
        let var = report.sigmas.variances();
        let cont = risk(&report.allocation.continuous, &var, &weights).unwrap();
        let int = risk(&report.allocation.integer_as_f64(), &var, &weights).unwrap();
        assert!(int <= cont * 1.02, "{int} vs {cont}");
        let placed: u64 = report.allocation.integer.iter().map(|a| a.treated + a.control).sum();
        assert_eq!(placed, n_r);
    }
}

fn random_spec(rng: &mut ChaCha8Rng) -> SyntheticSpec {
    let k = rng.gen_range(2..7);
    SyntheticSpec {
        strata: (0..k)
            .map(|i| SyntheticStratum {
                id: format!("k{i}"),
                mu0: rng.gen_range(0.15..0.85),
                mu1: rng.gen_range(0.15..0.85),
                n_obs: rng.gen_range(200..800),
                propensity: rng.gen_range(0.2..0.8),
                weight: None,
            })
            .collect(),
        confounding_gamma: rng.gen_range(1.0..2.0),
        outcome_tilt: 0.1,
        weighting: Weighting::Population,
        seed: rng.gen(),
    }
}

#[test]
fn never_worse_than_default() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..50 {
        let spec = random_spec(&mut rng);
        let data = generate_observational(&spec).unwrap();
        let config = DesignConfig {
            gamma: rng.gen_range(1.0..3.0),
            bootstrap_reps: 50,
            n_r: rng.gen_range(20_000..40_000),
            default_rule: if rng.gen_bool(0.5) { DefaultRule::Equal } else { DefaultRule::Weighted },
            seed: rng.gen(),
            ..Default::default()
        };
        let out = design(&data, &config).unwrap();
        let r = &out.report;
        assert!(r.continuous_regret <= 1e-8, "regret {}", r.continuous_regret);
        let problem = Problem::new(out.weights.clone(), config.n_r, &out.default, config.sigma_floor).unwrap();
        let scale = problem.default_risk(&r.sigmas);
        assert!(r.rounding_excess < 0.05 * scale, "excess {} vs default risk {scale}", r.rounding_excess);
    }
}

#[test]
fn homogeneous_strata_keep_equal_allocation() {
    let spec = SyntheticSpec {
        strata: (0..4)
            .map(|i| SyntheticStratum {
                id: format!("h{i}"),
                mu0: 0.4,
                mu1: 0.5,
                n_obs: 1000,
                propensity: 0.5,
                weight: None,
            })
            .collect(),
        confounding_gamma: 1.0,
        outcome_tilt: 0.1,
        weighting: Weighting::Population,
        seed: 5,
    };
    let data = generate_observational(&spec).unwrap();
    let config = DesignConfig { gamma: 2.0, n_r: 1000, ..Default::default() };
    let out = design(&data, &config).unwrap();
    assert_eq!(out.report.allocation.integer, out.default.integer);
}
