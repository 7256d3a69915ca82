//! Simulation of vortex-pump transfer to heralded single photons in
//! spontaneous parametric downconversion.
//!
//! * [`grid`]: physically scaled fields and centered continuous FFTs.
//! * [`beams`]: Bessel-Gauss pump synthesis, phase winding, annulus fits.
//! * [`herald`]: phase matching, detector acceptance, heralded mixtures,
//!   conditional angular spectrum, transverse intensity and the regime map.
//! * [`diffraction`]: apertures, f-f propagation and lobe counting.
//! * [`scenario`], [`pipeline`], [`export`]: declarative runs and outputs.
//!
//! Lengths are in µm and wavenumbers in µm⁻¹ throughout.

pub mod beams;
mod checks;
pub mod diffraction;
mod error;
pub mod exec;
pub mod export;
pub mod grid;
pub mod herald;
pub mod pipeline;
pub mod scenario;
pub mod special;

pub use checks::{Checks, Warning, WarningKind};
pub use error::{Error, ErrorKind};
pub use exec::Execution;
