use crate::beams::BeamError;
use crate::diffraction::DiffractionError;
use crate::export::ExportError;
use crate::grid::GridError;
use crate::herald::HeraldError;
use crate::scenario::ScenarioError;
use serde::Serialize;
use thiserror::Error;

/// Coarse error class, mapped onto process exit codes by the CLI.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    Config,
    Physics,
    Io,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Config => 2,
            ErrorKind::Physics => 3,
            ErrorKind::Io => 4,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Beam(#[from] BeamError),
    #[error(transparent)]
    Herald(#[from] HeraldError),
    #[error(transparent)]
    Diffraction(#[from] DiffractionError),
    #[error(transparent)]
    Export(#[from] ExportError),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Scenario(_) => ErrorKind::Config,
            Error::Export(ExportError::Io { .. }) => ErrorKind::Io,
            _ => ErrorKind::Physics,
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.kind().exit_code()
    }
}
