use super::HeraldError;
use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseMatchingModel {
    /// Short-crystal idealization, `G ≡ 1`.
    UnityG,
    /// Longitudinal mismatch sinc on spherical dispersion shells.
    SincLongitudinal,
}

/// Nonlinear crystal and its phase-matching model. Wavenumbers are inside
/// the crystal, in µm⁻¹; the length is in µm.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CrystalSpec {
    pub length: f64,
    pub k_p_long: f64,
    pub k_s_mag: f64,
    pub k_i_mag: f64,
    pub model: PhaseMatchingModel,
}

pub const DEFAULT_N_PUMP: f64 = 1.652;
pub const DEFAULT_N_SIGNAL: f64 = 1.66;

impl CrystalSpec {
    /// Degenerate type-I-like crystal from refractive indices. Wavelengths in
    /// µm; signal and idler share `signal_wavelength`.
    pub fn from_indices(
        length: f64,
        model: PhaseMatchingModel,
        n_p: f64,
        n_s: f64,
        pump_wavelength: f64,
        signal_wavelength: f64,
    ) -> Result<Self, HeraldError> {
        let k_s = 2.0 * PI * n_s / signal_wavelength;
        let c = Self {
            length,
            k_p_long: 2.0 * PI * n_p / pump_wavelength,
            k_s_mag: k_s,
            k_i_mag: k_s,
            model,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), HeraldError> {
        let ok = |v: f64| v > 0.0 && v.is_finite();
        if !ok(self.length) {
            return Err(HeraldError::InvalidCrystal("length must be > 0".into()));
        }
        if !(ok(self.k_p_long) && ok(self.k_s_mag) && ok(self.k_i_mag)) {
            return Err(HeraldError::InvalidCrystal("wavenumbers must be > 0".into()));
        }
        Ok(())
    }

    pub fn with_length(mut self, length: f64) -> Self {
        self.length = length;
        self
    }

    pub fn with_model(mut self, model: PhaseMatchingModel) -> Self {
        self.model = model;
        self
    }

    fn longitudinal(k_mag: f64, k: [f64; 2]) -> Result<f64, HeraldError> {
        let t2 = k[0] * k[0] + k[1] * k[1];
        if t2 >= k_mag * k_mag {
            return Err(HeraldError::Evanescent {
                k_perp: t2.sqrt(),
                k_mag,
            });
        }
        Ok((k_mag * k_mag - t2).sqrt())
    }

    /// `Δk_z = k_p − k_sz − k_iz`.
    pub fn delta_kz(&self, k_s: [f64; 2], k_i: [f64; 2]) -> Result<f64, HeraldError> {
        Ok(self.k_p_long
            - Self::longitudinal(self.k_s_mag, k_s)?
            - Self::longitudinal(self.k_i_mag, k_i)?)
    }
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// Phase-matching weight `G(k_s, k_i)`.
pub fn phase_matching(
    k_s: [f64; 2],
    k_i: [f64; 2],
    crystal: &CrystalSpec,
) -> Result<Complex64, HeraldError> {
    let dk = crystal.delta_kz(k_s, k_i)?;
    Ok(match crystal.model {
        PhaseMatchingModel::UnityG => Complex64::new(1.0, 0.0),
        PhaseMatchingModel::SincLongitudinal => {
            let half = dk * crystal.length / 2.0;
            Complex64::from_polar(sinc(half), half)
        }
    })
}

/// Idler wavevector `(k_x, 0)` at which the idler and its partner signal
/// mode `−k_i` are exactly phase matched, i.e. the ring of maximal counts.
/// Returns the origin when the crystal is already phase matched (or
/// over-matched) collinearly.
pub fn conditioning_point(crystal: &CrystalSpec) -> [f64; 2] {
    let f = |c: f64| {
        crystal.k_p_long
            - (crystal.k_s_mag.powi(2) - c * c).sqrt()
            - (crystal.k_i_mag.powi(2) - c * c).sqrt()
    };
    if f(0.0) >= 0.0 {
        return [0.0, 0.0];
    }
    let mut lo = 0.0;
    let mut hi = crystal.k_s_mag.min(crystal.k_i_mag);
    if f(hi) < 0.0 {
        return [0.0, 0.0];
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    [0.5 * (lo + hi), 0.0]
}
