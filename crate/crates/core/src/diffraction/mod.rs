//! Apertures, f–f propagation and the triangular-aperture charge diagnostic.

mod aperture;
mod lobes;
mod propagate;

pub use aperture::{apply_aperture, triangular_mask, ApertureMask, ApertureShape, MIN_APERTURE_SAMPLES};
pub use lobes::{count_lobes, Lobe, LobeOptions, LobeReport};
pub use propagate::{far_field, far_field_with, relay_spectrum};

use crate::checks::Warning;
use crate::grid::GridError;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiffractionError {
    #[error("invalid aperture: {0}")]
    InvalidAperture(String),
    #[error("invalid optics: {0}")]
    InvalidOptics(String),
    #[error("aperture grid does not match field grid")]
    GridMismatch,
    #[error("invalid lobe options: {0}")]
    InvalidLobeOptions(String),
    #[error("no lobes above threshold")]
    NoPattern,
    #[error("lobe pattern does not fit a triangular lattice: {reason}")]
    AmbiguousPattern { lobes: Vec<Lobe>, reason: String },
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("{0}")]
    Strict(Warning),
}
