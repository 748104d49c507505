use std::io;

use smc_chatter::{AnalysisError, HbError, SensitivityError, SimError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid experiment `{name}`: {reason}")]
    InvalidSpec { name: String, reason: String },
    #[error("experiment `{name}`: simulation failed: {source}")]
    Simulation { name: String, source: SimError },
    #[error("experiment `{name}`: trace analysis failed: {source}")]
    Analysis { name: String, source: AnalysisError },
    #[error("experiment `{name}`: chattering prediction failed: {source}")]
    Chattering { name: String, source: HbError },
    #[error("experiment `{name}`: sensitivity prediction failed: {source}")]
    Sensitivity { name: String, source: SensitivityError },
    #[error("config parse error: {0}")]
    ConfigParse(#[from] toml::de::Error),
    #[error("config serialization error: {0}")]
    ConfigWrite(#[from] toml::ser::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl HarnessError {
    pub(crate) fn invalid(name: &str, reason: impl Into<String>) -> Self {
        Self::InvalidSpec {
            name: name.to_owned(),
            reason: reason.into(),
        }
    }
}

/// Attaches the experiment name to errors coming out of the numeric core.
pub(crate) trait Context<T> {
    fn within(self, name: &str) -> Result<T, HarnessError>;
}

macro_rules! context_for {
    ($err:ty, $variant:ident) => {
        impl<T> Context<T> for Result<T, $err> {
            fn within(self, name: &str) -> Result<T, HarnessError> {
                self.map_err(|source| HarnessError::$variant {
                    name: name.to_owned(),
                    source,
                })
            }
        }
    };
}

context_for!(SimError, Simulation);
context_for!(AnalysisError, Analysis);
context_for!(HbError, Chattering);
context_for!(SensitivityError, Sensitivity);
