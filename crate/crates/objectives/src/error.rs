use crate::engine::DerivEngine;
use ad_core::AdError;
use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum ObjectiveError {
    /// Engine or kernel failure.
    Ad(AdError),
    /// Instance data violates a structural invariant.
    Invalid(String),
    /// A bundle-adjustment block failed; carries the observation index.
    BaBlock { obs: usize, source: AdError },
    /// The requested derivative route does not exist for this objective.
    UnsupportedEngine {
        objective: &'static str,
        engine: DerivEngine,
    },
    /// Random generation could not satisfy the feasibility constraints
    /// within the retry budget.
    Generation(String),
}

impl fmt::Display for ObjectiveError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ObjectiveError::Ad(e) => write!(f, "{e}"),
            ObjectiveError::Invalid(msg) => write!(f, "invalid instance: {msg}"),
            ObjectiveError::BaBlock { obs, source } => {
                write!(f, "observation {obs}: {source}")
            }
            ObjectiveError::UnsupportedEngine { objective, engine } => {
                write!(f, "{objective} has no {engine} derivative route")
            }
            ObjectiveError::Generation(msg) => write!(f, "generation failed: {msg}"),
        }
    }
}

impl std::error::Error for ObjectiveError {}

impl From<AdError> for ObjectiveError {
    fn from(e: AdError) -> Self {
        ObjectiveError::Ad(e)
    }
}

pub type ObjResult<T> = Result<T, ObjectiveError>;
