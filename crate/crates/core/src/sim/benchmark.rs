use serde::{Deserialize, Serialize};

use super::{generate_observational, run_pseudo_experiments, SyntheticSpec};
use crate::data::{default_allocation, risk, AllocationPlan, DefaultRule, DesignConfig};
use crate::error::{Error, Result};
use crate::pipeline::{build_regions, naive_from_regions, solve_with_regions};
use crate::sim::true_sigmas;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Design {
    Equal,
    Weighted,
    Naive,
    RegretMin,
}

impl Design {
    pub fn name(self) -> &'static str {
        match self {
            Design::Equal => "Equal",
            Design::Weighted => "Weighted",
            Design::Naive => "Naive",
            Design::RegretMin => "RegretMin",
        }
    }
}

/// Γ grid and repetition count for [`benchmark`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkPlan {
    pub gammas: Vec<f64>,
    pub reps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub design: Design,
    pub gamma: f64,
    pub avg_loss: f64,
    pub std_err: f64,
    pub rel_to_equal: f64,
    pub rel_to_naive: f64,
    /// Exact risk of the integer plan at the true variances.
    pub analytic_risk: f64,
    pub allocation: AllocationPlan,
    pub reps: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub rows: Vec<BenchmarkRow>,
    /// True stratum effects the losses are scored against.
    pub gold_tau: Vec<f64>,
    pub weights: Vec<f64>,
    pub reps: usize,
}

impl BenchmarkReport {
    pub fn row(&self, design: Design, gamma: f64) -> Option<&BenchmarkRow> {
        self.rows
            .iter()
            .find(|r| r.design == design && r.gamma == gamma)
    }
}

/// Generates the observational study, builds every design and scores each
/// with pseudo-experiments. Emits Equal, Weighted, Naive and RegretMin rows for
/// every Γ in the grid; only RegretMin depends on Γ.
pub fn benchmark(spec: &SyntheticSpec, config: &DesignConfig, plan: &BenchmarkPlan) -> Result<BenchmarkReport> {
    if plan.gammas.is_empty() {
        return Err(Error::InvalidConfig("gamma grid is empty".into()));
    }
    if plan.reps == 0 {
        return Err(Error::InvalidConfig("reps must be positive".into()));
    }
    if let Some(g) = plan.gammas.iter().find(|g| !(**g >= 1.0)) {
        return Err(Error::InvalidConfig(format!("gamma {g} must be >= 1")));
    }
    config.validate_for(spec.strata.len())?;
    let dataset = generate_observational(spec)?;
    let weights = dataset.weights();
    let truth = true_sigmas(spec);

    let equal = default_allocation(DefaultRule::Equal, config.n_r, &weights)?;
    let weighted = default_allocation(DefaultRule::Weighted, config.n_r, &weights)?;
    let point_regions = build_regions(&dataset, &DesignConfig { gamma: 1.0, ..*config })?;
    let naive = naive_from_regions(&point_regions, &weights, config.n_r)?
        .unwrap_or_else(|| equal.clone());

    let score = |alloc: &AllocationPlan| -> Result<(f64, f64, f64)> {
        let res = run_pseudo_experiments(spec, &alloc.integer, &weights, plan.reps, config.seed)?;
        let exact = risk(&alloc.integer_as_f64(), &truth, &weights)?;
        Ok((res.avg_loss, res.std_err, exact))
    };
    let fixed = [
        (Design::Equal, score(&equal)?, &equal),
        (Design::Weighted, score(&weighted)?, &weighted),
        (Design::Naive, score(&naive)?, &naive),
    ];
    let (equal_loss, naive_loss) = (fixed[0].1 .0, fixed[2].1 .0);
    let rel = |x: f64, base: f64| if base > 0.0 { x / base - 1.0 } else { 0.0 };

    let mut rows = Vec::new();
    for &gamma in &plan.gammas {
        let cfg = DesignConfig { gamma, ..*config };
        let regions = build_regions(&dataset, &cfg)?;
        let (_, report) = solve_with_regions(&regions, &weights, &cfg)?;
        let regret = report.allocation;
        let scored = score(&regret)?;
        for (design, (loss, se, exact), alloc) in fixed
            .iter()
            .map(|(d, s, a)| (*d, *s, (*a).clone()))
            .chain(std::iter::once((Design::RegretMin, scored, regret)))
        {
            rows.push(BenchmarkRow {
                design,
                gamma,
                avg_loss: loss,
                std_err: se,
                rel_to_equal: rel(loss, equal_loss),
                rel_to_naive: rel(loss, naive_loss),
                analytic_risk: exact,
                allocation: alloc,
                reps: plan.reps,
                seed: config.seed,
            });
        }
    }
    Ok(BenchmarkReport {
        rows,
        gold_tau: spec.true_effects(),
        weights,
        reps: plan.reps,
    })
}
