//! Domain types, dataset validation, default allocations and the risk
//! functionals.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One observational unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitRecord {
    pub treated: bool,
    /// Binary outcome, stored as 0.0 or 1.0.
    pub outcome: f64,
    /// Fitted propensity score, strictly inside (0, 1).
    pub propensity: f64,
}

impl UnitRecord {
    pub fn new(treated: bool, outcome: f64, propensity: f64) -> Result<Self> {
        let unit = UnitRecord {
            treated,
            outcome,
            propensity,
        };
        unit.check()?;
        Ok(unit)
    }

    pub fn check(&self) -> Result<()> {
        if self.outcome != 0.0 && self.outcome != 1.0 {
            return Err(Error::NonBinaryOutcome(self.outcome));
        }
        if !(self.propensity > 0.0 && self.propensity < 1.0) {
            return Err(Error::PropensityOutOfRange {
                value: self.propensity,
            });
        }
        Ok(())
    }
}

/// Units of one stratum together with its population weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumSample {
    pub id: String,
    pub weight: f64,
    pub units: Vec<UnitRecord>,
}

impl StratumSample {
    pub fn new(id: impl Into<String>, weight: f64, units: Vec<UnitRecord>) -> Self {
        StratumSample {
            id: id.into(),
            weight,
            units,
        }
    }

    pub fn n_treated(&self) -> usize {
        self.units.iter().filter(|u| u.treated).count()
    }

    pub fn n_control(&self) -> usize {
        self.units.len() - self.n_treated()
    }
}

/// A validated collection of strata whose weights sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    strata: Vec<StratumSample>,
    warnings: Vec<String>,
}

impl Dataset {
    pub fn strata(&self) -> &[StratumSample] {
        &self.strata
    }

    pub fn len(&self) -> usize {
        self.strata.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strata.is_empty()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.strata.iter().map(|s| s.weight).collect()
    }

    pub fn ids(&self) -> Vec<String> {
        self.strata.iter().map(|s| s.id.clone()).collect()
    }

    /// Non-fatal issues found during validation (e.g. weight renormalization).
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }
}

/// Checks every stratum and normalizes weights to sum to one.
pub fn validate_dataset(strata: Vec<StratumSample>) -> Result<Dataset> {
    if strata.is_empty() {
        return Err(Error::NoStrata);
    }
    let mut seen = HashSet::new();
    for s in &strata {
        if !seen.insert(s.id.as_str()) {
            return Err(Error::DuplicateStratum(s.id.clone()));
        }
        if s.units.is_empty() {
            return Err(Error::EmptyStratum(s.id.clone()));
        }
        for u in &s.units {
            u.check()?;
        }
        if s.n_treated() == 0 {
            return Err(Error::NoTreatedUnits(s.id.clone()));
        }
        if s.n_control() == 0 {
            return Err(Error::NoControlUnits(s.id.clone()));
        }
        if !(s.weight.is_finite() && s.weight >= 0.0) {
            return Err(Error::InvalidWeight {
                stratum: s.id.clone(),
                weight: s.weight,
            });
        }
    }
    let total: f64 = strata.iter().map(|s| s.weight).sum();
    if total <= 0.0 {
        return Err(Error::InvalidWeight {
            stratum: strata[0].id.clone(),
            weight: total,
        });
    }
    let mut warnings = Vec::new();
    if (total - 1.0).abs() > 1e-9 {
        warnings.push(format!(
            "stratum weights sum to {total}; normalized to 1"
        ));
    }
    let strata = strata
        .into_iter()
        .map(|mut s| {
            s.weight /= total;
            s
        })
        .collect();
    Ok(Dataset { strata, warnings })
}

/// A (treated, control) pair. Used for arm counts and for per-arm variances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ArmPair<T> {
    pub treated: T,
    pub control: T,
}

impl<T> ArmPair<T> {
    pub fn new(treated: T, control: T) -> Self {
        ArmPair { treated, control }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DefaultRule {
    #[default]
    Equal,
    Weighted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub max_iters: usize,
    pub rel_tol: f64,
    pub mve_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iters: 10_000,
            rel_tol: 1e-10,
            mve_tol: 1e-7,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesignConfig {
    pub gamma: f64,
    pub alpha: f64,
    pub bootstrap_reps: usize,
    pub n_r: u64,
    pub default_rule: DefaultRule,
    pub seed: u64,
    pub sigma_floor: f64,
    pub solver: SolverConfig,
}

impl Default for DesignConfig {
    fn default() -> Self {
        DesignConfig {
            gamma: 1.0,
            alpha: 0.1,
            bootstrap_reps: 200,
            n_r: 1000,
            default_rule: DefaultRule::Equal,
            seed: 0,
            sigma_floor: 1e-8,
            solver: SolverConfig::default(),
        }
    }
}

impl DesignConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if !(self.gamma >= 1.0 && self.gamma.is_finite()) {
            return bad("gamma must be a finite number >= 1");
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad("alpha must lie in (0, 1)");
        }
        if self.bootstrap_reps == 0 {
            return bad("bootstrap_reps must be positive");
        }
        if self.n_r == 0 {
            return bad("n_r must be positive");
        }
        if !(self.sigma_floor > 0.0 && self.sigma_floor < 0.25) {
            return bad("sigma_floor must lie in (0, 0.25)");
        }
        if self.solver.max_iters == 0 {
            return bad("max_iters must be positive");
        }
        if !(self.solver.rel_tol > 0.0) || !(self.solver.mve_tol > 0.0) {
            return bad("solver tolerances must be positive");
        }
        Ok(())
    }

    /// Validates the config and checks that the budget covers every arm.
    pub fn validate_for(&self, strata: usize) -> Result<()> {
        self.validate()?;
        check_budget(self.n_r, strata)
    }
}

pub(crate) fn check_budget(n_r: u64, strata: usize) -> Result<()> {
    let min = 2 * strata as u64;
    if n_r < min {
        return Err(Error::BudgetTooSmall { n_r, strata, min });
    }
    Ok(())
}

/// Per-stratum arm sizes, both continuous and rounded to integers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationPlan {
    pub n_r: u64,
    pub continuous: Vec<ArmPair<f64>>,
    pub integer: Vec<ArmPair<u64>>,
}

impl AllocationPlan {
    /// Wraps a continuous allocation and derives its integer form.
    pub fn from_continuous(continuous: Vec<ArmPair<f64>>, n_r: u64) -> Result<Self> {
        let integer = round_allocation(&continuous, n_r)?;
        Ok(AllocationPlan {
            n_r,
            continuous,
            integer,
        })
    }

    pub fn len(&self) -> usize {
        self.continuous.len()
    }

    pub fn is_empty(&self) -> bool {
        self.continuous.is_empty()
    }

    /// The integer plan viewed as reals, for risk and regret evaluation.
    pub fn integer_as_f64(&self) -> Vec<ArmPair<f64>> {
        self.integer
            .iter()
            .map(|a| ArmPair::new(a.treated as f64, a.control as f64))
            .collect()
    }
}

/// Largest-remainder rounding to a total of `n_r`, with every arm at least 1.
///
/// Arms are ordered (treated, control) per stratum; ties go to the lower
/// index. If flooring leaves arms at zero, the deficit is taken one unit at a
/// time from the currently largest arm.
pub fn round_allocation(continuous: &[ArmPair<f64>], n_r: u64) -> Result<Vec<ArmPair<u64>>> {
    check_budget(n_r, continuous.len())?;
    let flat: Vec<f64> = continuous
        .iter()
        .flat_map(|a| [a.treated, a.control])
        .collect();
    if flat.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::InvalidConfig(
            "allocation contains negative or non-finite counts".into(),
        ));
    }
    let mut counts = largest_remainder(&flat, n_r);
    for i in 0..counts.len() {
        while counts[i] == 0 {
            let donor = (0..counts.len())
                .max_by(|&a, &b| counts[a].cmp(&counts[b]).then(b.cmp(&a)))
                .expect("nonempty");
            counts[donor] -= 1;
            counts[i] += 1;
        }
    }
    Ok(counts
        .chunks(2)
        .map(|c| ArmPair::new(c[0], c[1]))
        .collect())
}

/// Hamilton apportionment: scales `values` to sum to `total`, floors, and hands
/// out the leftover units by descending fractional part (ties to lower index).
pub fn largest_remainder(values: &[f64], total: u64) -> Vec<u64> {
    let sum: f64 = values.iter().sum();
    let scaled: Vec<f64> = if sum > 0.0 {
        values.iter().map(|x| x * total as f64 / sum).collect()
    } else {
        vec![total as f64 / values.len() as f64; values.len()]
    };
    let mut counts: Vec<u64> = scaled.iter().map(|x| x.floor() as u64).collect();
    let assigned: u64 = counts.iter().sum();
    let mut remaining = total.saturating_sub(assigned);
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = scaled[a] - scaled[a].floor();
        let rb = scaled[b] - scaled[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().cycle() {
        if remaining == 0 {
            break;
        }
        counts[i] += 1;
        remaining -= 1;
    }
    counts
}

/// Default allocation used as the regret baseline.
pub fn default_allocation(rule: DefaultRule, n_r: u64, weights: &[f64]) -> Result<AllocationPlan> {
    let k = weights.len();
    check_budget(n_r, k)?;
    let continuous = match rule {
        DefaultRule::Equal => {
            let per_arm = n_r as f64 / (2 * k) as f64;
            vec![ArmPair::new(per_arm, per_arm); k]
        }
        DefaultRule::Weighted => {
            let total: f64 = weights.iter().sum();
            weights
                .iter()
                .map(|w| {
                    let per_arm = w / total * n_r as f64 / 2.0;
                    ArmPair::new(per_arm, per_arm)
                })
                .collect()
        }
    };
    AllocationPlan::from_continuous(continuous, n_r)
}

/// Expected weighted squared error of the stratum difference-in-means:
/// `sum_k w_k (var_k(1) / n_kt + var_k(0) / n_kc)`.
pub fn risk(allocation: &[ArmPair<f64>], variances: &[ArmPair<f64>], weights: &[f64]) -> Result<f64> {
    check_len(allocation.len(), variances.len())?;
    check_len(allocation.len(), weights.len())?;
    let mut total = 0.0;
    for (k, ((n, v), w)) in allocation.iter().zip(variances).zip(weights).enumerate() {
        if !(n.treated > 0.0 && n.control > 0.0) {
            return Err(Error::NonPositiveArmCount { stratum: k });
        }
        total += w * (v.treated / n.treated + v.control / n.control);
    }
    Ok(total)
}

pub fn l2_loss(estimates: &[f64], truth: &[f64], weights: &[f64]) -> Result<f64> {
    check_len(estimates.len(), truth.len())?;
    check_len(estimates.len(), weights.len())?;
    Ok(estimates
        .iter()
        .zip(truth)
        .zip(weights)
        .map(|((e, t), w)| w * (e - t) * (e - t))
        .sum())
}

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::LengthMismatch { expected, got });
    }
    Ok(())
}
