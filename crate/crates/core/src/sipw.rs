//! Stabilized inverse-probability-weighted means and their extrema under
//! Γ-level unmeasured confounding (marginal sensitivity model).

use serde::{Deserialize, Serialize};

use crate::data::{StratumSample, UnitRecord};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arm {
    Treated,
    Control,
}

impl Arm {
    pub fn contains(self, unit: &UnitRecord) -> bool {
        unit.treated == (self == Arm::Treated)
    }
}

/// Admissible range of a unit's inverse-probability weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightInterval {
    pub lower: f64,
    pub upper: f64,
}

/// Extrema of the SIPW mean over all admissible weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanBounds {
    pub mu_lower: f64,
    pub mu_upper: f64,
}

/// If the selection odds may differ from the fitted odds by a factor in
/// `[1/Γ, Γ]`, the inverse probability `1/p` of the unit's own arm ranges over
/// `1 + odds_against * [1/Γ, Γ]`, where `odds_against` is `(1-π)/π` for treated
/// units and `π/(1-π)` for controls.
pub fn weight_interval(unit: &UnitRecord, gamma: f64, arm: Arm) -> Result<WeightInterval> {
    let p = unit.propensity;
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::PropensityOutOfRange { value: p });
    }
    if !(gamma >= 1.0) {
        return Err(Error::InvalidConfig("gamma must be >= 1".into()));
    }
    let odds_against = match arm {
        Arm::Treated => (1.0 - p) / p,
        Arm::Control => p / (1.0 - p),
    };
    Ok(WeightInterval {
        lower: 1.0 + odds_against / gamma,
        upper: 1.0 + odds_against * gamma,
    })
}

fn arm_units(sample: &StratumSample, arm: Arm) -> impl Iterator<Item = &UnitRecord> {
    sample.units.iter().filter(move |u| arm.contains(u))
}

/// Point estimate `sum Y v / sum v` with `v` the fitted inverse probability.
pub fn sipw_mean(sample: &StratumSample, arm: Arm) -> Result<f64> {
    sipw_mean_units(arm_units(sample, arm), arm)
}

pub(crate) fn sipw_mean_units<'a>(
    units: impl Iterator<Item = &'a UnitRecord>,
    arm: Arm,
) -> Result<f64> {
    let (mut num, mut den) = (0.0, 0.0);
    for u in units {
        let v = match arm {
            Arm::Treated => 1.0 / u.propensity,
            Arm::Control => 1.0 / (1.0 - u.propensity),
        };
        num += u.outcome * v;
        den += v;
    }
    if den == 0.0 {
        return Err(Error::EmptyArm);
    }
    Ok(num / den)
}

/// For binary outcomes the ratio `sum Y v / sum v` increases in `v_i` when
/// `Y_i = 1` and decreases when `Y_i = 0`, so both extrema sit at the vertex
/// that pushes every weight to the end of its interval matching its outcome.
pub fn mean_extrema(sample: &StratumSample, arm: Arm, gamma: f64) -> Result<MeanBounds> {
    mean_extrema_units(arm_units(sample, arm), arm, gamma)
}

pub(crate) fn mean_extrema_units<'a>(
    units: impl Iterator<Item = &'a UnitRecord>,
    arm: Arm,
    gamma: f64,
) -> Result<MeanBounds> {
    // Sums of lower/upper weights split by outcome.
    let (mut lo1, mut hi1, mut lo0, mut hi0) = (0.0, 0.0, 0.0, 0.0);
    let mut n = 0usize;
    for u in units {
        let w = weight_interval(u, gamma, arm)?;
        if u.outcome == 1.0 {
            lo1 += w.lower;
            hi1 += w.upper;
        } else {
            lo0 += w.lower;
            hi0 += w.upper;
        }
        n += 1;
    }
    if n == 0 {
        return Err(Error::EmptyArm);
    }
    let ratio = |ones: f64, zeros: f64| {
        if ones == 0.0 {
            0.0
        } else if zeros == 0.0 {
            1.0
        } else {
            ones / (ones + zeros)
        }
    };
    let mu_lower = ratio(lo1, hi0);
    let mu_upper = ratio(hi1, lo0).max(mu_lower);
    Ok(MeanBounds { mu_lower, mu_upper })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample(units: &[(bool, f64, f64)]) -> StratumSample {
        StratumSample::new(
            "s",
            1.0,
            units
                .iter()
                .map(|&(t, y, p)| UnitRecord::new(t, y, p).unwrap())
                .collect(),
        )
    }

    /// Exhaustive search over every vertex of the weight box.
    fn vertex_oracle(sample: &StratumSample, arm: Arm, gamma: f64) -> (f64, f64) {
        let units: Vec<_> = arm_units(sample, arm).collect();
        let ivs: Vec<_> = units
            .iter()
            .map(|u| weight_interval(u, gamma, arm).unwrap())
            .collect();
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for mask in 0u32..(1 << units.len()) {
            let (mut num, mut den) = (0.0, 0.0);
            for (i, (u, iv)) in units.iter().zip(&ivs).enumerate() {
                let v = if mask >> i & 1 == 1 { iv.upper } else { iv.lower };
                num += u.outcome * v;
                den += v;
            }
            lo = lo.min(num / den);
            hi = hi.max(num / den);
        }
        (lo, hi)
    }

    #[test]
    fn weight_interval_examples() {
        let u = UnitRecord::new(true, 1.0, 0.5).unwrap();
        assert_eq!(
            weight_interval(&u, 1.0, Arm::Treated).unwrap(),
            WeightInterval { lower: 2.0, upper: 2.0 }
        );
        assert_eq!(
            weight_interval(&u, 2.0, Arm::Treated).unwrap(),
            WeightInterval { lower: 1.5, upper: 3.0 }
        );
        let u = UnitRecord::new(false, 0.0, 0.8).unwrap();
        let w = weight_interval(&u, 2.0, Arm::Control).unwrap();
        assert!((w.lower - 3.0).abs() < 1e-12 && (w.upper - 9.0).abs() < 1e-12);
        let bad = UnitRecord { treated: true, outcome: 1.0, propensity: 1.0 };
        assert!(weight_interval(&bad, 2.0, Arm::Treated).is_err());
    }

    #[test]
    fn sipw_mean_examples() {
        let s = sample(&[(true, 1.0, 0.5), (true, 0.0, 0.5), (true, 1.0, 0.5), (false, 0.0, 0.5)]);
        assert!((sipw_mean(&s, Arm::Treated).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        let s = sample(&[(true, 1.0, 0.3), (true, 1.0, 0.9), (false, 0.0, 0.5)]);
        assert_eq!(sipw_mean(&s, Arm::Treated).unwrap(), 1.0);
        let s = sample(&[(true, 1.0, 0.25), (true, 0.0, 0.75), (false, 0.0, 0.5)]);
        assert!((sipw_mean(&s, Arm::Treated).unwrap() - 0.75).abs() < 1e-15);
        let s = sample(&[(true, 1.0, 0.25)]);
        assert_eq!(sipw_mean(&s, Arm::Control), Err(Error::EmptyArm));
    }

    #[test]
    fn extrema_examples() {
        let s = sample(&[(true, 1.0, 0.5), (true, 0.0, 0.5), (true, 1.0, 0.5)]);
        let b = mean_extrema(&s, Arm::Treated, 1.0).unwrap();
        assert!((b.mu_lower - 2.0 / 3.0).abs() < 1e-15 && (b.mu_upper - 2.0 / 3.0).abs() < 1e-15);
        // Frozen from vertex enumeration: min 3/6, max 6/7.5.
        let b = mean_extrema(&s, Arm::Treated, 2.0).unwrap();
        let (lo, hi) = vertex_oracle(&s, Arm::Treated, 2.0);
        assert!((lo - 0.5).abs() < 1e-15 && (hi - 0.8).abs() < 1e-15);
        assert!((b.mu_lower - 0.5).abs() < 1e-15 && (b.mu_upper - 0.8).abs() < 1e-15);
        let s = sample(&[(true, 0.0, 0.2), (true, 0.0, 0.7)]);
        let b = mean_extrema(&s, Arm::Treated, 3.0).unwrap();
        assert_eq!((b.mu_lower, b.mu_upper), (0.0, 0.0));
        assert_eq!(mean_extrema(&s, Arm::Control, 3.0), Err(Error::EmptyArm));
    }

    fn arb_units() -> impl Strategy<Value = Vec<(bool, f64, f64)>> {
        proptest::collection::vec(
            (any::<bool>(), prop_oneof![Just(0.0), Just(1.0)], 0.02f64..0.98),
            1..12,
        )
    }

    proptest! {
        #[test]
        fn closed_form_matches_vertex_enumeration(units in arb_units(), gamma in 1.0f64..6.0) {
            let mut units = units;
            units.push((true, 1.0, 0.4));
            units.push((false, 0.0, 0.4));
            let s = sample(&units);
            for arm in [Arm::Treated, Arm::Control] {
                let b = mean_extrema(&s, arm, gamma).unwrap();
                let (lo, hi) = vertex_oracle(&s, arm, gamma);
                prop_assert!((b.mu_lower - lo).abs() < 1e-12);
                prop_assert!((b.mu_upper - hi).abs() < 1e-12);
            }
        }

        #[test]
        fn nesting_in_gamma(units in arb_units(), g1 in 1.0f64..3.0, dg in 0.0f64..3.0) {
            let mut units = units;
            units.push((true, 1.0, 0.6));
            let s = sample(&units);
            let a = mean_extrema(&s, Arm::Treated, g1).unwrap();
            let b = mean_extrema(&s, Arm::Treated, g1 + dg).unwrap();
            prop_assert!(b.mu_lower <= a.mu_lower + 1e-15 && b.mu_upper >= a.mu_upper - 1e-15);
        }

        #[test]
        fn gamma_one_collapses_to_point_estimate(units in arb_units()) {
            let mut units = units;
            units.push((false, 1.0, 0.3));
            let s = sample(&units);
            let b = mean_extrema(&s, Arm::Control, 1.0).unwrap();
            let m = sipw_mean(&s, Arm::Control).unwrap();
            prop_assert!((b.mu_lower - m).abs() < 1e-12 && (b.mu_upper - m).abs() < 1e-12);
        }

        #[test]
        fn order_invariant(units in arb_units(), gamma in 1.0f64..4.0) {
            let mut units = units;
            units.push((true, 0.0, 0.5));
            let a = mean_extrema(&sample(&units), Arm::Treated, gamma).unwrap();
            units.reverse();
            let b = mean_extrema(&sample(&units), Arm::Treated, gamma).unwrap();
            prop_assert!((a.mu_lower - b.mu_lower).abs() < 1e-12);
            prop_assert!((a.mu_upper - b.mu_upper).abs() < 1e-12);
        }
    }
}
