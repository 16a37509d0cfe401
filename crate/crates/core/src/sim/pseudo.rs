use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::SyntheticSpec;
use crate::data::{check_len, l2_loss, ArmPair};
use crate::error::{Error, Result};
use crate::seed;

const PSEUDO_TAG: u64 = 0x7073_6575;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PseudoResult {
    pub avg_loss: f64,
    /// Monte Carlo standard error of `avg_loss`.
    pub std_err: f64,
    pub reps: usize,
}

/// Simulates `reps` randomized experiments with the given integer arm sizes and
/// averages the weighted squared error of the difference-in-means estimates
/// against the true effects.
///
/// Repetition `r` draws from the stream keyed by `(seed, r)` regardless of the
/// plan, so designs evaluated with the same seed share their random numbers.
pub fn run_pseudo_experiments(
    spec: &SyntheticSpec,
    plan: &[ArmPair<u64>],
    weights: &[f64],
    reps: usize,
    seed: u64,
) -> Result<PseudoResult> {
    check_len(spec.strata.len(), plan.len())?;
    check_len(spec.strata.len(), weights.len())?;
    if reps == 0 {
        return Err(Error::InvalidConfig("reps must be positive".into()));
    }
    for (k, a) in plan.iter().enumerate() {
        if a.treated == 0 || a.control == 0 {
            return Err(Error::NonPositiveArmCount { stratum: k });
        }
    }
    let truth = spec.true_effects();
    let dists = spec
        .strata
        .iter()
        .zip(plan)
        .map(|(s, a)| {
            let t = Binomial::new(a.treated, s.mu1)
                .map_err(|e| Error::InvalidSpec(e.to_string()))?;
            let c = Binomial::new(a.control, s.mu0)
                .map_err(|e| Error::InvalidSpec(e.to_string()))?;
            Ok((t, c))
        })
        .collect::<Result<Vec<_>>>()?;
    let losses: Vec<f64> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = seed::stream(seed, &[PSEUDO_TAG, r as u64]);
            let est: Vec<f64> = dists
                .iter()
                .zip(plan)
                .map(|((t, c), a)| {
                    let yt = t.sample(&mut rng) as f64 / a.treated as f64;
                    let yc = c.sample(&mut rng) as f64 / a.control as f64;
                    yt - yc
                })
                .collect();
            l2_loss(&est, &truth, weights)
        })
        .collect::<Result<_>>()?;
    let n = reps as f64;
    let mean = losses.iter().sum::<f64>() / n;
    let var = if reps > 1 {
        losses.iter().map(|l| (l - mean) * (l - mean)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Ok(PseudoResult {
        avg_loss: mean,
        std_err: (var / n).sqrt(),
        reps,
    })
}
