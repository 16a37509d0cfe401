mod common;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stratdesign::optimizer::{naive_allocation, objective_gradient, objective_value, Problem, SigmaPoint};
use stratdesign::{default_allocation, risk, ArmPair, DefaultRule};

fn random_problem(rng: &mut ChaCha8Rng) -> (Problem, SigmaPoint) {
    let k = rng.gen_range(2..6);
    let weights = common::random_weights(rng, k);
    let rule = if rng.gen_bool(0.5) { DefaultRule::Equal } else { DefaultRule::Weighted };
    let n_r = rng.gen_range(200..5000);
    let default = default_allocation(rule, n_r, &weights).unwrap();
    let problem = Problem::new(weights, n_r, &default, common::FLOOR).unwrap();
    let s = SigmaPoint((0..k).map(|_| [rng.gen_range(0.02..0.25), rng.gen_range(0.02..0.25)]).collect());
    (problem, s)
}

fn at(problem: &Problem, x: &[f64]) -> f64 {
    objective_value(&SigmaPoint::from_flat(x), problem).unwrap()
}

#[test]
fn gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let h = 1e-6;
    for _ in 0..100 {
        let (problem, s) = random_problem(&mut rng);
        let g = objective_gradient(&s, &problem).unwrap();
        let x = s.flatten();
        let fd: Vec<f64> = (0..x.len())
            .map(|i| {
                let (mut up, mut down) = (x.clone(), x.clone());
                up[i] += h;
                down[i] -= h;
                (at(&problem, &up) - at(&problem, &down)) / (2.0 * h)
            })
            .collect();
        let err = g.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let norm = g.iter().map(|a| a * a).sum::<f64>().sqrt();
        assert!(err / norm < 1e-5, "relative error {}", err / norm);
    }
}

#[test]
fn hessian_is_negative_semidefinite() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let h = 1e-5;
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..100 {
        let (problem, s) = random_problem(&mut rng);
        let x = s.flatten();
        let n = x.len();
        let f = |dx: &[(usize, f64)]| {
            let mut y = x.clone();
            for &(i, d) in dx {
                y[i] += d;
            }
            at(&problem, &y)
        };
        let mut hess = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = if i == j {
                    (f(&[(i, h)]) - 2.0 * f(&[]) + f(&[(i, -h)])) / (h * h)
                } else {
                    (f(&[(i, h), (j, h)]) - f(&[(i, h), (j, -h)]) - f(&[(i, -h), (j, h)])
                        + f(&[(i, -h), (j, -h)]))
                        / (4.0 * h * h)
                };
                hess[(i, j)] = v;
                hess[(j, i)] = v;
            }
        }
        let top = hess.symmetric_eigenvalues().max();
        worst = worst.max(top);
    }
    assert!(worst <= 1e-6, "max eigenvalue {worst}");
}

#[test]
fn closed_form_allocation_beats_random_allocations() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..100 {
        let k = rng.gen_range(1..7);
        let weights = common::random_weights(&mut rng, k);
        let n_r = 1000;
        let sd: Vec<ArmPair<f64>> = (0..k)
            .map(|_| ArmPair::new(rng.gen_range(0.05..0.5), rng.gen_range(0.05..0.5)))
            .collect();
        let var: Vec<ArmPair<f64>> = sd.iter().map(|s| ArmPair::new(s.treated.powi(2), s.control.powi(2))).collect();
        let best = risk(&naive_allocation(&sd, &weights, n_r).unwrap().continuous, &var, &weights).unwrap();
        for _ in 0..10_000 {
            let raw: Vec<f64> = (0..2 * k).map(|_| -rng.gen_range(1e-9f64..1.0).ln()).collect();
            let total: f64 = raw.iter().sum();
            let alloc: Vec<ArmPair<f64>> = raw
                .chunks(2)
                .map(|c| ArmPair::new(c[0] / total * n_r as f64, c[1] / total * n_r as f64))
                .collect();
            assert!(best <= risk(&alloc, &var, &weights).unwrap() * (1.0 + 1e-12));
        }
    }
}
