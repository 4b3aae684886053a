use std::fmt;

use skewchain_core::cocycle::IntegrationError;
use skewchain_core::control_sets::ControlSetError;
use skewchain_core::cover_graph::GraphError;
use skewchain_core::lift::LiftError;

/// Failure classes, each with its own exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Io,
    Validation,
    Numerical,
    Property,
}

#[derive(Debug)]
pub struct CliError {
    pub kind: Kind,
    pub message: String,
}

impl CliError {
    pub fn validation(message: impl Into<String>) -> Self {
        CliError { kind: Kind::Validation, message: message.into() }
    }

    pub fn numerical(message: impl Into<String>) -> Self {
        CliError { kind: Kind::Numerical, message: message.into() }
    }

    pub fn property(message: impl Into<String>) -> Self {
        CliError { kind: Kind::Property, message: message.into() }
    }

    pub fn exit_code(&self) -> u8 {
        match self.kind {
            Kind::Io => 1,
            Kind::Validation => 2,
            Kind::Numerical => 3,
            Kind::Property => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError { kind: Kind::Io, message: e.to_string() }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError { kind: Kind::Io, message: e.to_string() }
    }
}

impl From<IntegrationError> for CliError {
    fn from(e: IntegrationError) -> Self {
        match e {
            IntegrationError::Dimension { .. } | IntegrationError::Config(_) => CliError::validation(e.to_string()),
            _ => CliError::numerical(e.to_string()),
        }
    }
}

impl From<GraphError> for CliError {
    fn from(e: GraphError) -> Self {
        match e {
            GraphError::EmptyGraph | GraphError::NoFiberSet => CliError::numerical(e.to_string()),
            _ => CliError::validation(e.to_string()),
        }
    }
}

impl From<ControlSetError> for CliError {
    fn from(e: ControlSetError) -> Self {
        match e {
            ControlSetError::Integration(i) => i.into(),
            ControlSetError::Graph(g) => g.into(),
            ControlSetError::BadParams(_) | ControlSetError::Unsupported(_) | ControlSetError::Signal(_) => {
                CliError::validation(e.to_string())
            }
            _ => CliError::numerical(e.to_string()),
        }
    }
}

impl From<LiftError> for CliError {
    fn from(e: LiftError) -> Self {
        match e {
            LiftError::Integration(i) => i.into(),
            LiftError::BadParams(_) | LiftError::Signal(_) => CliError::validation(e.to_string()),
            LiftError::ChainTooCoarse { .. } => CliError::property(e.to_string()),
            _ => CliError::numerical(e.to_string()),
        }
    }
}
