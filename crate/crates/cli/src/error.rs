//! Error type of the binary and its exit-code mapping.

use prism_core::assignment::AssignmentError;
use prism_core::assistant::AssistantError;
use prism_core::simulator::SimError;
use prism_core::vault::VaultError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, config or inputs.
    #[error("{0}")]
    Validation(String),
    /// Anything the caller could not have caused.
    #[error("{0}")]
    Internal(String),
    /// A privacy or constraint guard fired.
    #[error("{0}")]
    Privacy(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Internal(_) => 2,
            CliError::Privacy(_) => 3,
        }
    }
}

pub fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        let msg = e.to_string();
        match e {
            SimError::Validation(_)
            | SimError::Capacity(_)
            | SimError::Feature(_)
            | SimError::Metrics(_)
            | SimError::Redaction(_) => CliError::Validation(msg),
            SimError::ConstraintViolation(_) => CliError::Privacy(msg),
            SimError::Assignment(a) => a.into(),
            SimError::Assistant(a) => a.into(),
            SimError::Vault(v) => v.into(),
            SimError::Io(_) | SimError::Internal(_) => CliError::Internal(msg),
        }
    }
}

impl From<AssignmentError> for CliError {
    fn from(e: AssignmentError) -> Self {
        let msg = e.to_string();
        match e {
            AssignmentError::Violation(_) => CliError::Privacy(msg),
            AssignmentError::Internal(_) => CliError::Internal(msg),
            _ => CliError::Validation(msg),
        }
    }
}

impl From<AssistantError> for CliError {
    fn from(e: AssistantError) -> Self {
        let msg = e.to_string();
        match e {
            AssistantError::Leakage(_) | AssistantError::ProhibitedLanguage => CliError::Privacy(msg),
            AssistantError::Io(_) => CliError::Internal(msg),
            _ => CliError::Validation(msg),
        }
    }
}

impl From<VaultError> for CliError {
    fn from(e: VaultError) -> Self {
        let msg = e.to_string();
        match e {
            VaultError::Config(_) | VaultError::Validation(_) | VaultError::NotFound => CliError::Validation(msg),
            _ => CliError::Internal(msg),
        }
    }
}

impl From<prism_core::redaction::RedactionError> for CliError {
    fn from(e: prism_core::redaction::RedactionError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<prism_core::metrics::MetricsError> for CliError {
    fn from(e: prism_core::metrics::MetricsError) -> Self {
        CliError::Validation(e.to_string())
    }
}
