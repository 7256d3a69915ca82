use super::aperture::ApertureMask;
use super::DiffractionError;
use crate::exec::Execution;
use crate::grid::{evaluate_inverse_cropped, fft2_with, Carrier, ComplexField2D, Domain, GridSpec};
use ndarray::{s, Array2};
use num_complex::Complex64;
use std::f64::consts::PI;

/// Field in the back focal plane of an f–f system:
/// `U′(ρ′) = (1/(iλf))·F(k = 2πρ′/(λf))`.
///
/// The output pitch is `λf/(n·pitch_in)` per axis and the prefactor keeps
/// `∫|U|²` unchanged.
pub fn far_field(f: &ComplexField2D, focal: f64) -> Result<ComplexField2D, DiffractionError> {
    far_field_with(f, focal, Execution::default())
}

pub fn far_field_with(
    f: &ComplexField2D,
    focal: f64,
    exec: Execution,
) -> Result<ComplexField2D, DiffractionError> {
    f.expect_domain(Domain::Position)?;
    if !(focal > 0.0 && focal.is_finite()) {
        return Err(DiffractionError::InvalidOptics(format!("focal length {focal}")));
    }
    let lambda = f.wavelength();
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(DiffractionError::InvalidOptics(format!("wavelength {lambda}")));
    }
    let spectrum = fft2_with(f, exec)?;
    let kg = *spectrum.grid();
    let scale = lambda * focal / (2.0 * PI);
    let kp = kg.pitch();
    let kc = kg.center();
    let out_grid = GridSpec::with_pitch(kg.nx(), kg.ny(), [kp[0] * scale, kp[1] * scale])?
        .centered_at([kc[0] * scale, kc[1] * scale]);
    let factor = Complex64::new(0.0, -1.0 / (lambda * focal));
    Ok(spectrum
        .relabeled(out_grid, Domain::Position)?
        .scaled(factor))
}

pub const RELAY_CROP: f64 = 1e-9;

/// Image of a wavevector-domain amplitude through a lens relay of
/// (signed) magnification `m`: `U(ρ) = (1/m)·U_C(ρ/m)`, where `U_C` is the
/// inverse transform measured from the spectrum's grid center (the beam axis).
/// A negative `m` is an inverting relay.
///
/// Only samples inside `window` (when given) are evaluated; the rest are zero.
/// Spectral content below `RELAY_CROP` of the peak (FFT leakage from
/// off-lattice displacements) is skipped.
pub fn relay_spectrum(
    spectrum: &ComplexField2D,
    target: &GridSpec,
    magnification: f64,
    window: Option<&ApertureMask>,
    exec: Execution,
) -> Result<ComplexField2D, DiffractionError> {
    spectrum.expect_domain(Domain::Wavevector)?;
    if !(magnification != 0.0 && magnification.is_finite()) {
        return Err(DiffractionError::InvalidOptics(format!(
            "magnification {magnification}"
        )));
    }
    let ([i0, i1], [j0, j1]) = match window {
        Some(m) => {
            if m.grid != *target {
                return Err(DiffractionError::GridMismatch);
            }
            m.index_bounds()
        }
        None => ([0, target.nx() - 1], [0, target.ny() - 1]),
    };
    let xs: Vec<f64> = (i0..=i1).map(|i| target.x(i) / magnification).collect();
    let ys: Vec<f64> = (j0..=j1).map(|j| target.y(j) / magnification).collect();
    let block = evaluate_inverse_cropped(spectrum, &xs, &ys, Carrier::Remove, RELAY_CROP, exec)?;
    let mut data = Array2::<Complex64>::zeros((target.ny(), target.nx()));
    data.slice_mut(s![j0..=j1, i0..=i1])
        .assign(&block.mapv(|v| v / magnification));
    Ok(ComplexField2D::new(
        *target,
        Domain::Position,
        spectrum.wavelength(),
        data,
    )?)
}
