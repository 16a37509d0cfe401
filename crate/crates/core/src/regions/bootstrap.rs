use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ellipse::Point;
use crate::data::StratumSample;
use crate::error::{Error, Result};
use crate::seed;
use crate::sipw::{mean_extrema_units, Arm};
use crate::variance::{variance_bounds, VarBounds};

pub const MAX_REDRAWS: u64 = 1000;

/// Variance extrema of one bootstrap replicate, an axis-aligned rectangle in
/// the (control variance, treated variance) plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRectangle {
    pub replicate: usize,
    pub sigma0: VarBounds,
    pub sigma1: VarBounds,
}

impl ReplicateRectangle {
    /// Corners as (sigma0^2, sigma1^2) points.
    pub fn vertices(&self) -> [Point; 4] {
        let (a, b) = (self.sigma0.var_lower, self.sigma0.var_upper);
        let (c, d) = (self.sigma1.var_lower, self.sigma1.var_upper);
        [[a, c], [b, c], [a, d], [b, d]]
    }

    pub fn contains(&self, other: &ReplicateRectangle) -> bool {
        self.sigma0.contains(&other.sigma0) && self.sigma1.contains(&other.sigma1)
    }
}

/// Resamples the stratum `b` times and records each replicate's variance
/// rectangle at sensitivity level `gamma`.
///
/// Replicate `b` uses the stream keyed by `(seed, stratum id, b, attempt)`, so
/// the output does not depend on thread count. Draws lacking an arm are
/// redrawn with the next attempt index.
pub fn bootstrap_rectangles(
    sample: &StratumSample,
    gamma: f64,
    b: usize,
    seed: u64,
) -> Result<Vec<ReplicateRectangle>> {
    if b == 0 {
        return Err(Error::InvalidConfig("bootstrap_reps must be positive".into()));
    }
    if sample.units.is_empty() {
        return Err(Error::EmptyStratum(sample.id.clone()));
    }
    let label = seed::hash_label(&sample.id);
    (0..b)
        .into_par_iter()
        .map(|rep| replicate(sample, gamma, seed, label, rep))
        .collect()
}

fn replicate(
    sample: &StratumSample,
    gamma: f64,
    seed: u64,
    label: u64,
    rep: usize,
) -> Result<ReplicateRectangle> {
    let n = sample.units.len();
    let mut idx = vec![0usize; n];
    for attempt in 0..MAX_REDRAWS {
        let mut rng = seed::stream(seed, &[label, rep as u64, attempt]);
        for i in idx.iter_mut() {
            *i = rng.gen_range(0..n);
        }
        let treated = idx.iter().filter(|&&i| sample.units[i].treated).count();
        if treated == 0 || treated == n {
            continue;
        }
        let units = || idx.iter().map(|&i| &sample.units[i]);
        let m1 = mean_extrema_units(units().filter(|u| u.treated), Arm::Treated, gamma)?;
        let m0 = mean_extrema_units(units().filter(|u| !u.treated), Arm::Control, gamma)?;
        return Ok(ReplicateRectangle {
            replicate: rep,
            sigma0: variance_bounds(m0)?,
            sigma1: variance_bounds(m1)?,
        });
    }
    Err(Error::RedrawsExhausted(sample.id.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::UnitRecord;

    fn tiny() -> StratumSample {
        StratumSample::new(
            "tiny",
            1.0,
            vec![
                UnitRecord::new(true, 1.0, 0.4).unwrap(),
                UnitRecord::new(false, 0.0, 0.4).unwrap(),
            ],
        )
    }

    #[test]
    fn reproducible() {
        let a = bootstrap_rectangles(&tiny(), 1.5, 5, 42).unwrap();
        let b = bootstrap_rectangles(&tiny(), 1.5, 5, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 5);
        assert!(a.iter().enumerate().all(|(i, r)| r.replicate == i));
    }

    #[test]
    fn gamma_one_gives_points() {
        let mut s = tiny();
        for i in 0..40 {
            s.units.push(UnitRecord::new(i % 3 == 0, (i % 2) as f64, 0.3 + 0.01 * i as f64).unwrap());
        }
        for r in bootstrap_rectangles(&s, 1.0, 20, 1).unwrap() {
            assert!((r.sigma0.var_upper - r.sigma0.var_lower).abs() < 1e-15);
            assert!((r.sigma1.var_upper - r.sigma1.var_lower).abs() < 1e-15);
        }
    }

    #[test]
    fn rectangles_nest_in_gamma() {
        let mut s = tiny();
        for i in 0..60 {
            s.units.push(UnitRecord::new(i % 4 != 0, ((i * 7) % 3 == 0) as u8 as f64, 0.2 + 0.01 * i as f64).unwrap());
        }
        let a = bootstrap_rectangles(&s, 1.2, 30, 9).unwrap();
        let b = bootstrap_rectangles(&s, 2.0, 30, 9).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!(y.contains(x));
        }
    }

    #[test]
    fn exhausted_redraws() {
        // A single unit can never produce both arms.
        let s = StratumSample::new("one", 1.0, vec![UnitRecord::new(true, 1.0, 0.5).unwrap()]);
        assert_eq!(
            bootstrap_rectangles(&s, 1.0, 1, 0),
            Err(Error::RedrawsExhausted("one".into()))
        );
    }
}
