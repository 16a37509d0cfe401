//! Minimax-regret allocation.
//!
//! Regret is linear in the variances and convex in the arm sizes, so the
//! min-max can be swapped. For fixed variances the inner minimization over
//! allocations has the Neyman closed form, which leaves a concave maximization
//! over the product of the per-stratum variance regions:
//!
//! ```text
//! f(s) = (1/n_r) (sum_k sqrt(w_k) (sigma_k1 + sigma_k0))^2
//!        - sum_k w_k (s_k1 / d_kt + s_k0 / d_kc),     sigma = sqrt(s)
//! ```
//!
//! where `d` is the default allocation. `f` is solved by projected gradient
//! ascent with Armijo backtracking.

use serde::{Deserialize, Serialize};

use crate::data::{check_len, risk, AllocationPlan, ArmPair, SolverConfig};
use crate::error::{Error, Result};
pub use crate::regions::project_onto_region;
use crate::regions::{Point, VarianceRegion};

/// Candidate `(sigma^2(0), sigma^2(1))` for every stratum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaPoint(pub Vec<Point>);

impl SigmaPoint {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Flattened as `[s_00, s_01, s_10, s_11, ...]`.
    pub fn flatten(&self) -> Vec<f64> {
        self.0.iter().flat_map(|p| *p).collect()
    }

    pub fn from_flat(v: &[f64]) -> Self {
        SigmaPoint(v.chunks(2).map(|c| [c[0], c[1]]).collect())
    }

    /// Per-arm variances.
    pub fn variances(&self) -> Vec<ArmPair<f64>> {
        self.0.iter().map(|p| ArmPair::new(p[1], p[0])).collect()
    }
}

/// Fixed data of one design problem.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub weights: Vec<f64>,
    pub n_r: u64,
    /// Continuous default allocation the regret is measured against.
    pub default: Vec<ArmPair<f64>>,
    pub sigma_floor: f64,
}

impl Problem {
    pub fn new(weights: Vec<f64>, n_r: u64, default: &AllocationPlan, sigma_floor: f64) -> Result<Self> {
        check_len(weights.len(), default.len())?;
        for (k, d) in default.continuous.iter().enumerate() {
            if !(d.treated > 0.0 && d.control > 0.0) {
                return Err(Error::NonPositiveArmCount { stratum: k });
            }
        }
        Ok(Problem {
            weights,
            n_r,
            default: default.continuous.clone(),
            sigma_floor,
        })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    fn check(&self, s: &SigmaPoint) -> Result<()> {
        check_len(self.len(), s.len())?;
        for p in &s.0 {
            for &v in p {
                // Tiny slack for values that sit on the floor after projection.
                if !(v >= self.sigma_floor * (1.0 - 1e-12)) {
                    return Err(Error::BelowFloor {
                        value: v,
                        floor: self.sigma_floor,
                    });
                }
            }
        }
        Ok(())
    }

    /// `sum_k sqrt(w_k) (sigma_k1 + sigma_k0)`.
    fn neyman_sum(&self, s: &SigmaPoint) -> f64 {
        s.0.iter()
            .zip(&self.weights)
            .map(|(p, w)| w.sqrt() * (p[0].sqrt() + p[1].sqrt()))
            .sum()
    }

    /// Risk of the default allocation at variances `s`.
    pub fn default_risk(&self, s: &SigmaPoint) -> f64 {
        s.0.iter()
            .zip(&self.weights)
            .zip(&self.default)
            .map(|((p, w), d)| w * (p[1] / d.treated + p[0] / d.control))
            .sum()
    }
}

/// Minimum over allocations of the regret at variances `s`.
pub fn objective_value(s: &SigmaPoint, problem: &Problem) -> Result<f64> {
    problem.check(s)?;
    let sum = problem.neyman_sum(s);
    let f = sum * sum / problem.n_r as f64 - problem.default_risk(s);
    if !f.is_finite() {
        return Err(Error::NonFiniteObjective);
    }
    Ok(f)
}

/// Gradient of [`objective_value`] in the flattened order of [`SigmaPoint`].
pub fn objective_gradient(s: &SigmaPoint, problem: &Problem) -> Result<Vec<f64>> {
    problem.check(s)?;
    let sum = problem.neyman_sum(s);
    let n_r = problem.n_r as f64;
    let mut g = Vec::with_capacity(2 * s.len());
    for ((p, w), d) in s.0.iter().zip(&problem.weights).zip(&problem.default) {
        let lead = w.sqrt() / n_r * sum;
        g.push(lead / p[0].sqrt() - w / d.control);
        g.push(lead / p[1].sqrt() - w / d.treated);
    }
    Ok(g)
}

/// Closed-form risk-minimizing allocation for known standard deviations:
/// arm sizes proportional to `sqrt(w_k) sigma_k(e)`.
pub fn naive_allocation(sigmas: &[ArmPair<f64>], weights: &[f64], n_r: u64) -> Result<AllocationPlan> {
    check_len(sigmas.len(), weights.len())?;
    if sigmas
        .iter()
        .any(|s| !(s.treated >= 0.0 && s.control >= 0.0))
    {
        return Err(Error::InvalidConfig("standard deviations must be nonnegative".into()));
    }
    let total: f64 = sigmas
        .iter()
        .zip(weights)
        .map(|(s, w)| w.sqrt() * (s.treated + s.control))
        .sum();
    if total <= 0.0 {
        return Err(Error::AllSigmasZero);
    }
    let scale = n_r as f64 / total;
    let continuous = sigmas
        .iter()
        .zip(weights)
        .map(|(s, w)| {
            let c = scale * w.sqrt();
            ArmPair::new(c * s.treated, c * s.control)
        })
        .collect();
    AllocationPlan::from_continuous(continuous, n_r)
}

/// Inner minimizer of the regret at variances `s`.
pub fn allocation_from_sigmas(s: &SigmaPoint, weights: &[f64], n_r: u64) -> Result<AllocationPlan> {
    let sd: Vec<ArmPair<f64>> = s
        .variances()
        .iter()
        .map(|v| ArmPair::new(v.treated.max(0.0).sqrt(), v.control.max(0.0).sqrt()))
        .collect();
    naive_allocation(&sd, weights, n_r)
}

/// Maximizes `g . x` over a region by projected ascent from the four box
/// corners, returning the best value found and its maximizer.
pub fn linear_max(region: &VarianceRegion, g: Point) -> Result<(f64, Point)> {
    let norm = g[0].hypot(g[1]);
    if norm == 0.0 {
        return Ok((0.0, region.anchor()?));
    }
    let dir = [g[0] / norm, g[1] / norm];
    let (lo, hi) = (region.box_lo, region.box_hi);
    // Steps longer than the box diagonal gain nothing and slow the projection.
    let reach = 2.0 * (hi - lo);
    let mut best: Option<(f64, Point)> = None;
    for corner in [[lo, lo], [hi, lo], [lo, hi], [hi, hi]] {
        let mut x = project_onto_region(corner, region)?;
        let mut t = 1e-3 * reach;
        for _ in 0..64 {
            let y = project_onto_region([x[0] + t * dir[0], x[1] + t * dir[1]], region)?;
            let moved = (y[0] - x[0]).hypot(y[1] - x[1]);
            x = y;
            if moved < 1e-15 && t >= reach {
                break;
            }
            t = (t * 2.0).min(reach);
        }
        let v = g[0] * x[0] + g[1] * x[1];
        if best.is_none_or(|(b, _)| v > b) {
            best = Some((v, x));
        }
    }
    Ok(best.expect("four starts"))
}

/// Worst case over the regions of the regret of `allocation` relative to the
/// default allocation. Separable by stratum.
pub fn worst_case_regret(
    allocation: &[ArmPair<f64>],
    regions: &[VarianceRegion],
    default: &[ArmPair<f64>],
    weights: &[f64],
) -> Result<f64> {
    check_len(allocation.len(), regions.len())?;
    check_len(allocation.len(), default.len())?;
    check_len(allocation.len(), weights.len())?;
    let mut total = 0.0;
    for (k, (((n, region), d), w)) in allocation
        .iter()
        .zip(regions)
        .zip(default)
        .zip(weights)
        .enumerate()
    {
        if !(n.treated > 0.0 && n.control > 0.0) || !(d.treated > 0.0 && d.control > 0.0) {
            return Err(Error::NonPositiveArmCount { stratum: k });
        }
        let g = [
            w * (1.0 / n.control - 1.0 / d.control),
            w * (1.0 / n.treated - 1.0 / d.treated),
        ];
        if g == [0.0, 0.0] {
            continue;
        }
        total += linear_max(region, g)?.0;
    }
    Ok(total)
}

/// Result of [`maximize_worst_case`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub sigmas: SigmaPoint,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective after each accepted step, starting from the initial point.
    pub trace: Vec<f64>,
    pub allocation: AllocationPlan,
    /// Worst-case regret of the continuous allocation.
    pub continuous_regret: f64,
    /// Worst-case regret of the integer allocation.
    pub worst_case_regret: f64,
    /// `worst_case_regret - continuous_regret`: the cost of rounding.
    pub rounding_excess: f64,
    /// The allocation implied by `sigmas` had positive worst-case regret and
    /// was replaced by the default, whose regret is zero.
    pub defaulted: bool,
}

const ARMIJO: f64 = 1e-4;
const MAX_STEP: f64 = 1e12;
const MIN_STEP: f64 = 1e-30;

/// Projected gradient ascent on [`objective_value`] over the product of the
/// regions, started from the projected region centers.
///
/// Each iteration backtracks by halving from twice the last accepted step
/// (1.0 on the first iteration) until the Armijo condition holds. Stops when
/// the objective gains less than `rel_tol` times the default risk at the
/// current point, or when the projected step vanishes. An allocation left with
/// positive worst-case regret by early stopping is swapped for the default.
pub fn maximize_worst_case(
    regions: &[VarianceRegion],
    problem: &Problem,
    solver: &SolverConfig,
) -> Result<SolveReport> {
    check_len(problem.len(), regions.len())?;
    if regions.is_empty() {
        return Err(Error::NoStrata);
    }
    let project_all = |v: &[f64]| -> Result<SigmaPoint> {
        let pts = v
            .chunks(2)
            .zip(regions)
            .map(|(c, r)| project_onto_region([c[0], c[1]], r))
            .collect::<Result<Vec<_>>>()?;
        Ok(SigmaPoint(pts))
    };
    let width = regions
        .iter()
        .map(|r| r.box_hi - r.box_lo)
        .fold(0.0, f64::max);
    let mut s = SigmaPoint(regions.iter().map(|r| r.anchor()).collect::<Result<Vec<_>>>()?);
    let mut f = objective_value(&s, problem)?;
    let mut trace = vec![f];
    let mut step: f64 = 0.5;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < solver.max_iters {
        iterations += 1;
        let g = objective_gradient(&s, problem)?;
        let x = s.flatten();
        // No stratum needs to move farther than twice the box width per step.
        let widest = g
            .chunks(2)
            .map(|c| c[0].hypot(c[1]))
            .fold(0.0, f64::max);
        let t_cap = if widest > 0.0 { 2.0 * width / widest } else { MAX_STEP };
        let mut t = (2.0 * step).min(MAX_STEP).min(t_cap);
        let accepted = loop {
            let trial: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a + t * b).collect();
            let cand = project_all(&trial)?;
            let d: Vec<f64> = cand.flatten().iter().zip(&x).map(|(a, b)| a - b).collect();
            if d.iter().all(|v| *v == 0.0) {
                break None;
            }
            let fc = objective_value(&cand, problem)?;
            let gain: f64 = g.iter().zip(&d).map(|(a, b)| a * b).sum();
            if fc >= f + ARMIJO * gain {
                break Some((cand, fc));
            }
            t *= 0.5;
            if t < MIN_STEP {
                break None;
            }
        };
        let Some((cand, fc)) = accepted else {
            converged = true;
            break;
        };
        step = t;
        let change = fc - f;
        s = cand;
        f = fc;
        trace.push(f);
        let scale = f.abs().max(problem.default_risk(&s));
        if change <= solver.rel_tol * scale {
            converged = true;
            break;
        }
    }

    let mut allocation = allocation_from_sigmas(&s, &problem.weights, problem.n_r)?;
    let mut continuous_regret =
        worst_case_regret(&allocation.continuous, regions, &problem.default, &problem.weights)?;
    let defaulted = continuous_regret > 0.0;
    if defaulted {
        allocation = AllocationPlan::from_continuous(problem.default.clone(), problem.n_r)?;
        continuous_regret = 0.0;
    }
    let worst = worst_case_regret(
        &allocation.integer_as_f64(),
        regions,
        &problem.default,
        &problem.weights,
    )?;
    Ok(SolveReport {
        sigmas: s,
        objective: f,
        iterations,
        converged,
        trace,
        allocation,
        continuous_regret,
        worst_case_regret: worst,
        rounding_excess: worst - continuous_regret,
        defaulted,
    })
}

/// Regret of `allocation` against the default at known variances.
pub fn regret_at(
    allocation: &[ArmPair<f64>],
    variances: &[ArmPair<f64>],
    problem: &Problem,
) -> Result<f64> {
    Ok(risk(allocation, variances, &problem.weights)?
        - risk(&problem.default, variances, &problem.weights)?)
}
