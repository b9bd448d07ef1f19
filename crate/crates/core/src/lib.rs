//! Discrete chain factor graphs and their fitting by generalized iterative
//! proportional fitting (IPF).
//!
//! * [`model`]: graph representation, validation and exact probabilities.
//! * [`inference`]: enumeration-based posteriors and objectives.
//! * [`ml_ipf`]: maximum likelihood with incomplete data.
//! * [`cml_ipf`]: maximum conditional likelihood (clamped and joint parents).
//! * [`sbn`]: sigmoid belief networks and gradient-based baselines.
//! * [`io`]: model, dataset and trace file formats.
//! * [`experiments`]: the two benchmark experiments driven by the CLI.

pub mod cml_ipf;
pub mod error;
pub mod experiments;
pub mod inference;
pub mod io;
pub mod ml_ipf;
pub mod model;
pub mod sbn;
pub mod table;

pub use error::{Error, Result};
pub use inference::{
    completed_marginal, conditional_log_likelihood, divergence_to_target, log_likelihood,
    posterior_marginal, ConditionalTarget, Dataset, Evidence, EvidenceKind, MarginalTable,
};
pub use ml_ipf::{fit_ml, FitConfig, FitTrace, Schedule, Termination};
pub use model::{
    component_conditional, component_normalizer, joint_probability, rescale_potential,
    validate_graph, ChainFactorGraph, Cluster, ClusterId, ComponentSet, Potential, PotentialTable,
    ValidationReport, Variable, VariableSpace,
};
