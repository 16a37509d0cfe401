//! Confounding-robust confidence regions for a stratum's pair of arm variances.
//!
//! Each bootstrap replicate yields a rectangle of variance extrema. The region
//! is the minimum-volume ellipse around all rectangle corners, shrunk about its
//! center until the requested share of rectangles remains fully inside, then
//! intersected with the feasible box `[floor, 0.25]^2`.
//!
//! Coordinates are `(sigma^2(0), sigma^2(1))`: control first, treated second.

mod bootstrap;
mod ellipse;
mod projection;

use serde::{Deserialize, Serialize};

pub use bootstrap::{bootstrap_rectangles, ReplicateRectangle, MAX_REDRAWS};
pub use ellipse::{convex_hull, inverse2, min_volume_ellipse, sym_eigen, Ellipse, Mat2, Point};
pub use projection::{project_by_edges, project_onto_region, MAX_DYKSTRA_ROUNDS};

use crate::data::{DesignConfig, StratumSample};
use crate::error::{Error, Result};
use crate::sipw::{sipw_mean, Arm};
use crate::variance::bernoulli_variance;

/// Upper bound of a Bernoulli variance.
pub const MAX_VARIANCE: f64 = 0.25;
/// Tolerance on the ellipse inequality in membership tests.
pub const CONTAINS_TOL: f64 = 1e-9;

/// Ellipse intersected with the square `[box_lo, box_hi]^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceRegion {
    pub ellipse: Ellipse,
    pub box_lo: f64,
    pub box_hi: f64,
}

impl VarianceRegion {
    pub fn new(ellipse: Ellipse, box_lo: f64, box_hi: f64) -> Self {
        VarianceRegion {
            ellipse,
            box_lo,
            box_hi,
        }
    }

    pub fn in_box(&self, p: Point) -> bool {
        p.iter().all(|&x| x >= self.box_lo && x <= self.box_hi)
    }

    pub fn contains(&self, p: Point) -> bool {
        self.in_box(p) && self.ellipse.radius2(p) <= 1.0 + CONTAINS_TOL
    }

    pub fn clamp(&self, p: Point) -> Point {
        [
            p[0].clamp(self.box_lo, self.box_hi),
            p[1].clamp(self.box_lo, self.box_hi),
        ]
    }

    /// Ellipse center pulled into the region.
    pub fn anchor(&self) -> Result<Point> {
        project_onto_region(self.clamp(self.ellipse.center), self)
    }
}

pub fn contains(region: &VarianceRegion, point: Point) -> bool {
    region.contains(point)
}

/// Number of rectangles a `1 - alpha` region must cover.
pub fn coverage_count(alpha: f64, b: usize) -> usize {
    // The small offset keeps e.g. 0.9 * 200 from rounding up to 181.
    (((1.0 - alpha) * b as f64) - 1e-9).ceil().clamp(1.0, b as f64) as usize
}

/// Rescales `ellipse` about its center so that exactly the
/// `ceil((1 - alpha) B)` rectangles with the smallest worst-corner radius
/// remain inside. Ties between equal radii are broken by replicate index.
pub fn shrink_to_coverage(
    ellipse: &Ellipse,
    rectangles: &[ReplicateRectangle],
    alpha: f64,
) -> Result<Ellipse> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidConfig("alpha must lie in (0, 1)".into()));
    }
    if rectangles.is_empty() {
        return Err(Error::NoPoints);
    }
    let mut radii: Vec<(f64, usize)> = rectangles
        .iter()
        .map(|r| {
            let worst = r
                .vertices()
                .iter()
                .map(|&v| ellipse.radius(v))
                .fold(0.0, f64::max);
            (worst, r.replicate)
        })
        .collect();
    radii.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let keep = coverage_count(alpha, rectangles.len());
    let r = radii[keep - 1].0.max(1e-6);
    Ok(ellipse.scaled(r))
}

/// Everything computed for one stratum's region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumRegion {
    pub stratum: String,
    pub region: VarianceRegion,
    /// Unshrunk minimum-volume ellipse around all corners.
    pub enclosing: Ellipse,
    pub rectangles: Vec<ReplicateRectangle>,
    /// Plug-in `(sigma^2(0), sigma^2(1))` from the SIPW means.
    pub point_estimate: Point,
}

pub fn point_estimate(sample: &StratumSample) -> Result<Point> {
    Ok([
        bernoulli_variance(sipw_mean(sample, Arm::Control)?),
        bernoulli_variance(sipw_mean(sample, Arm::Treated)?),
    ])
}

/// Bootstrap, enclose, shrink, and clip.
pub fn build_stratum_region(sample: &StratumSample, config: &DesignConfig) -> Result<StratumRegion> {
    config.validate()?;
    let rectangles = bootstrap_rectangles(sample, config.gamma, config.bootstrap_reps, config.seed)?;
    let (lo, hi) = (config.sigma_floor, MAX_VARIANCE);
    // Corners are clamped into the box first so every kept rectangle lies in the
    // final intersection, which is therefore nonempty.
    let clamped: Vec<ReplicateRectangle> = rectangles
        .iter()
        .map(|r| {
            let mut c = *r;
            c.sigma0.var_lower = c.sigma0.var_lower.clamp(lo, hi);
            c.sigma0.var_upper = c.sigma0.var_upper.clamp(lo, hi);
            c.sigma1.var_lower = c.sigma1.var_lower.clamp(lo, hi);
            c.sigma1.var_upper = c.sigma1.var_upper.clamp(lo, hi);
            c
        })
        .collect();
    let vertices: Vec<Point> = clamped
        .iter()
        .flat_map(|r| r.vertices())
        .collect();
    let enclosing = min_volume_ellipse(&vertices, config.solver.mve_tol)?;
    let shrunk = shrink_to_coverage(&enclosing, &clamped, config.alpha)?;
    let region = VarianceRegion::new(shrunk, lo, hi);
    Ok(StratumRegion {
        stratum: sample.id.clone(),
        region,
        enclosing,
        rectangles,
        point_estimate: point_estimate(sample)?,
    })
}

pub fn build_region(sample: &StratumSample, config: &DesignConfig) -> Result<VarianceRegion> {
    Ok(build_stratum_region(sample, config)?.region)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::UnitRecord;
    use crate::variance::VarBounds;

    fn point_rect(rep: usize, p: Point) -> ReplicateRectangle {
        ReplicateRectangle {
            replicate: rep,
            sigma0: VarBounds { var_lower: p[0], var_upper: p[0] },
            sigma1: VarBounds { var_lower: p[1], var_upper: p[1] },
        }
    }

    #[test]
    fn shrink_is_an_order_statistic() {
        let e = Ellipse::circle([0.0, 0.0], 1.0);
        let rects: Vec<_> = (1..=10).map(|i| point_rect(i, [i as f64 / 10.0, 0.0])).collect();
        let s = shrink_to_coverage(&e, &rects, 0.2).unwrap();
        assert!((s.shape[0][0] - 1.0 / 0.64).abs() < 1e-9);
        let kept = rects.iter().filter(|r| r.vertices().iter().all(|&v| s.radius2(v) <= 1.0 + 1e-9)).count();
        assert_eq!(kept, 8);
        let same = shrink_to_coverage(&e, &rects, 1e-6).unwrap();
        assert!((same.shape[0][0] - 1.0).abs() < 1e-9);
        assert!(shrink_to_coverage(&e, &rects, 1.0).is_err());
        assert!(shrink_to_coverage(&e, &rects, 0.0).is_err());
    }

    #[test]
    fn coverage_count_rounding() {
        assert_eq!(coverage_count(0.1, 200), 180);
        assert_eq!(coverage_count(0.2, 10), 8);
        assert_eq!(coverage_count(0.05, 30), 29);
        assert_eq!(coverage_count(0.999, 10), 1);
    }

    #[test]
    fn contains_examples() {
        let region = VarianceRegion::new(Ellipse::circle([0.2, 0.2], 0.1), 1e-8, 0.25);
        assert!(region.contains([0.2, 0.2]));
        assert!(!region.contains([0.26, 0.2]));
        assert!(region.contains([0.2, 0.1]));
    }

    #[test]
    fn all_zero_outcomes_give_floor_neighborhood() {
        let units = (0..20)
            .map(|i| UnitRecord::new(i % 2 == 0, 0.0, 0.5).unwrap())
            .collect();
        let s = StratumSample::new("zero", 1.0, units);
        let cfg = DesignConfig { gamma: 1.5, bootstrap_reps: 20, ..Default::default() };
        let r = build_region(&s, &cfg).unwrap();
        assert!(r.contains([1e-8, 1e-8]));
        assert!(!r.contains([0.01, 0.01]));
    }
}
