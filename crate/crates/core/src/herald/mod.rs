//! Heralded signal photon: phase matching, detector acceptance, the mixed
//! heralded state and its observable distributions.

mod acceptance;
mod crystal;
mod mixture;
pub mod regime;

pub use acceptance::{AcceptanceShape, DetectorAcceptance, QuadraturePoint};
pub use crystal::{
    conditioning_point, phase_matching, CrystalSpec, PhaseMatchingModel, DEFAULT_N_PUMP,
    DEFAULT_N_SIGNAL,
};
pub use mixture::{
    build_mixture, conditional_angular_spectrum, heralded_amplitude, heralded_amplitude_with,
    heralded_transverse_intensity, normalized_cross_correlation, snap_to_lattice, Displacement,
    HeraldOptions, HeraldedPure, MixtureEnsemble, PreparedPump,
};
pub use regime::{classify, regime_map, BoundaryPoint, BoundaryStatus, RegimeClass, RegimeMap, RegimeSetup};

use crate::checks::Warning;
use crate::grid::GridError;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HeraldError {
    #[error("invalid crystal: {0}")]
    InvalidCrystal(String),
    #[error("invalid acceptance: {0}")]
    InvalidAcceptance(String),
    #[error("evanescent wave: |k_perp| = {k_perp} um^-1 reaches k = {k_mag} um^-1")]
    Evanescent { k_perp: f64, k_mag: f64 },
    #[error("mixture has no members")]
    EmptyMixture,
    #[error("invalid mixture: {0}")]
    InvalidMixture(String),
    #[error("invalid range: {0}")]
    InvalidRange(String),
    #[error(
        "regime boundary not bracketed for any k_t in [{}, {}] over L in [{}, {}] um",
        k_t_range[0], k_t_range[1], length_range[0], length_range[1]
    )]
    BoundaryNotBracketed {
        length_range: [f64; 2],
        k_t_range: [f64; 2],
    },
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("{0}")]
    Strict(Warning),
}
