//! End-to-end design: regions for every stratum, then the regret solve.

use serde::{Deserialize, Serialize};

use crate::data::{default_allocation, AllocationPlan, ArmPair, Dataset, DesignConfig};
use crate::error::{Error, Result};
use crate::optimizer::{maximize_worst_case, naive_allocation, Problem, SolveReport};
use crate::regions::{build_stratum_region, StratumRegion, VarianceRegion};

pub fn build_regions(dataset: &Dataset, config: &DesignConfig) -> Result<Vec<StratumRegion>> {
    config.validate()?;
    dataset
        .strata()
        .iter()
        .map(|s| build_stratum_region(s, config))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignOutcome {
    pub strata: Vec<String>,
    pub weights: Vec<f64>,
    pub regions: Vec<StratumRegion>,
    pub default: AllocationPlan,
    /// Closed-form allocation at the plug-in variance estimates; `None` when
    /// every estimated variance is zero.
    pub naive: Option<AllocationPlan>,
    pub report: SolveReport,
}

/// Plug-in allocation from the SIPW point estimates.
pub fn naive_from_regions(regions: &[StratumRegion], weights: &[f64], n_r: u64) -> Result<Option<AllocationPlan>> {
    let sd: Vec<ArmPair<f64>> = regions
        .iter()
        .map(|r| ArmPair::new(r.point_estimate[1].sqrt(), r.point_estimate[0].sqrt()))
        .collect();
    match naive_allocation(&sd, weights, n_r) {
        Ok(plan) => Ok(Some(plan)),
        Err(Error::AllSigmasZero) => Ok(None),
        Err(e) => Err(e),
    }
}

pub fn solve_with_regions(
    regions: &[StratumRegion],
    weights: &[f64],
    config: &DesignConfig,
) -> Result<(AllocationPlan, SolveReport)> {
    config.validate_for(regions.len())?;
    let default = default_allocation(config.default_rule, config.n_r, weights)?;
    let problem = Problem::new(weights.to_vec(), config.n_r, &default, config.sigma_floor)?;
    let bare: Vec<VarianceRegion> = regions.iter().map(|r| r.region).collect();
    let report = maximize_worst_case(&bare, &problem, &config.solver)?;
    Ok((default, report))
}

pub fn design(dataset: &Dataset, config: &DesignConfig) -> Result<DesignOutcome> {
    config.validate_for(dataset.len())?;
    let regions = build_regions(dataset, config)?;
    let weights = dataset.weights();
    let (default, report) = solve_with_regions(&regions, &weights, config)?;
    let naive = naive_from_regions(&regions, &weights, config.n_r)?;
    Ok(DesignOutcome {
        strata: dataset.ids(),
        weights,
        regions,
        default,
        naive,
        report,
    })
}
