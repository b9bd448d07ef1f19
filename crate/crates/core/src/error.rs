use thiserror::Error;

use crate::model::ValidationReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("component `{component}` has a zero normalizer at parent configuration {parent_config:?}")]
    ZeroNormalizer {
        component: String,
        parent_config: Vec<usize>,
    },

    #[error("rescaling factor must be positive and finite, got {0}")]
    NonPositiveFactor(f64),

    #[error("evidence has zero probability under the model{}", record_suffix(*.record))]
    ImpossibleEvidence { record: Option<usize> },

    #[error("model assigns zero probability to response {response:?} in context {context:?} where the target is positive")]
    ZeroModelProbability {
        context: Vec<usize>,
        response: Vec<usize>,
    },

    #[error("zero denominator in update of cluster `{cluster}` at entry {entry}")]
    ZeroDenominator { cluster: String, entry: usize },

    #[error("non-positive denominator at entry {entry} (lambda = {lambda}) is below the admissible range")]
    NonPositiveDenominator { entry: usize, lambda: f64 },

    #[error("could not bracket the Lagrange multiplier for parent configuration {parent_config}")]
    BracketFailure { parent_config: usize },

    #[error("bisection did not reach |Z - 1| < {epsilon} for parent configuration {parent_config} (residual {residual:e})")]
    NonConvergence {
        parent_config: usize,
        epsilon: f64,
        residual: f64,
    },

    #[error("model/dataset combination is not supported for conditional fitting: {0}")]
    UnsupportedRegime(String),

    #[error("graph is not a two-layer sigmoid network: {0}")]
    NonSigmoidShape(String),

    #[error("line search failed: {0}")]
    LineSearchFailure(String),

    #[error("schema error at {location}: {message}")]
    Schema { location: String, message: String },

    #[error("graph failed validation:\n{0}")]
    Validation(ValidationReport),

    #[error("row {row}: unknown state `{state}` for variable `{variable}`")]
    UnknownState {
        row: usize,
        variable: String,
        state: String,
    },

    #[error("row {row}: unknown variable `{name}`")]
    UnknownVariable { row: usize, name: String },

    #[error("row {row}: weight must be positive, got `{value}`")]
    NonPositiveWeight { row: usize, value: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("cycle {cycle}, cluster `{cluster}`: {source}")]
    AtStep {
        cycle: usize,
        cluster: String,
        #[source]
        source: Box<Error>,
    },
}

fn record_suffix(record: Option<usize>) -> String {
    match record {
        Some(r) => format!(" (record {r})"),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn at_step(self, cycle: usize, cluster: &str) -> Self {
        Error::AtStep {
            cycle,
            cluster: cluster.to_string(),
            source: Box::new(self),
        }
    }

    pub(crate) fn with_record(self, index: usize) -> Self {
        match self {
            Error::ImpossibleEvidence { record: None } => Error::ImpossibleEvidence {
                record: Some(index),
            },
            other => other,
        }
    }

    /// Innermost error, stripping step annotations.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtStep { source, .. } => source.root(),
            other => other,
        }
    }
}
