//! Synthetic cohort simulator and the static vs adaptive experiment.

mod cohort;
mod experiment;
mod output;
mod scenario;
mod synthetic;

pub use cohort::{generate_cohort, origin, Cohort, SimUser};
pub use experiment::{
    compare_arms, run_experiment, Delivery, Experiment, RunOutput, RunStats, ANALYST_ID, DELIVERY_PURPOSE,
};
pub use output::{write_run_dir, RunManifest, OUTPUT_FILES};
pub use scenario::{AssistantSettings, Behavior, Effects, Policy, Scenario};
pub use synthetic::synthetic_identity;

use thiserror::Error;

use crate::assignment::AssignmentError;
use crate::assistant::AssistantError;
use crate::features::FeatureError;
use crate::metrics::MetricsError;
use crate::redaction::RedactionError;
use crate::vault::VaultError;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    Validation(String),
    #[error("capacity constraint violated: {0}")]
    Capacity(String),
    #[error("constraint violated during run: {0}")]
    ConstraintViolation(String),
    #[error(transparent)]
    Vault(#[from] VaultError),
    #[error(transparent)]
    Assignment(#[from] AssignmentError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Assistant(#[from] AssistantError),
    #[error(transparent)]
    Redaction(#[from] RedactionError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("internal error: {0}")]
    Internal(String),
}
