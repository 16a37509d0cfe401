//! Mapping mean intervals to Bernoulli variance intervals.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sipw::MeanBounds;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarBounds {
    pub var_lower: f64,
    pub var_upper: f64,
}

impl VarBounds {
    pub fn contains(&self, other: &VarBounds) -> bool {
        self.var_lower <= other.var_lower && other.var_upper <= self.var_upper
    }
}

pub fn bernoulli_variance(mu: f64) -> f64 {
    mu * (1.0 - mu)
}

/// Image of `[mu_lower, mu_upper]` under `x(1-x)`.
pub fn variance_bounds(bounds: MeanBounds) -> Result<VarBounds> {
    let MeanBounds { mu_lower, mu_upper } = bounds;
    if !(mu_lower <= mu_upper) || mu_lower < 0.0 || mu_upper > 1.0 {
        return Err(Error::InvalidMeanBounds {
            lower: mu_lower,
            upper: mu_upper,
        });
    }
    let (fl, fu) = (bernoulli_variance(mu_lower), bernoulli_variance(mu_upper));
    Ok(if mu_upper <= 0.5 {
        VarBounds {
            var_lower: fl,
            var_upper: fu,
        }
    } else if mu_lower >= 0.5 {
        VarBounds {
            var_lower: fu,
            var_upper: fl,
        }
    } else {
        VarBounds {
            var_lower: fl.min(fu),
            var_upper: 0.25,
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn vb(lo: f64, hi: f64) -> VarBounds {
        variance_bounds(MeanBounds { mu_lower: lo, mu_upper: hi }).unwrap()
    }

    fn close(a: VarBounds, lo: f64, hi: f64) -> bool {
        (a.var_lower - lo).abs() < 1e-15 && (a.var_upper - hi).abs() < 1e-15
    }

    #[test]
    fn branches() {
        assert!(close(vb(0.2, 0.3), 0.16, 0.21));
        assert!(close(vb(0.6, 0.7), 0.21, 0.24));
        assert!(close(vb(0.4, 0.6), 0.24, 0.25));
        assert!(close(vb(0.5, 0.5), 0.25, 0.25));
        assert!(close(vb(0.0, 0.0), 0.0, 0.0));
        assert!(variance_bounds(MeanBounds { mu_lower: 0.6, mu_upper: 0.4 }).is_err());
    }

    proptest! {
        #[test]
        fn symmetric(a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let x = vb(lo, hi);
            let y = vb(1.0 - hi, 1.0 - lo);
            prop_assert!((x.var_lower - y.var_lower).abs() < 1e-15);
            prop_assert!((x.var_upper - y.var_upper).abs() < 1e-15);
        }

        #[test]
        fn widening_never_shrinks(a in 0.0f64..1.0, b in 0.0f64..1.0, da in 0.0f64..0.5, db in 0.0f64..0.5) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let inner = vb(lo, hi);
            let outer = vb((lo - da).max(0.0), (hi + db).min(1.0));
            prop_assert!(outer.contains(&inner));
        }
    }
}
