//! Regret-minimizing allocation of a stratified randomized experiment with
//! binary outcomes, using a pilot observational study whose variance
//! estimates are made robust to Γ-level unmeasured confounding.
//!
//! Pipeline: [`data::validate_dataset`] → [`regions::build_stratum_region`]
//! per stratum → [`optimizer::maximize_worst_case`].

pub mod data;
pub mod error;
pub mod optimizer;
pub mod pipeline;
pub mod regions;
pub mod seed;
pub mod sim;
pub mod sipw;
pub mod variance;

pub use data::{
    default_allocation, l2_loss, risk, validate_dataset, AllocationPlan, ArmPair, Dataset,
    DefaultRule, DesignConfig, SolverConfig, StratumSample, UnitRecord,
};
pub use error::{Error, Result};
pub use regions::{build_region, build_stratum_region, Ellipse, StratumRegion, VarianceRegion};
