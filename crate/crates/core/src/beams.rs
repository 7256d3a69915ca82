//! Vortex Bessel-Gauss pump fields and annulus parameter extraction.

use crate::checks::{Checks, Warning, WarningKind};
use crate::exec::{self, Execution};
use crate::grid::{ComplexField2D, Domain, GridError, GridSpec, RealField2D};
use crate::special::{bessel_i_scaled, bessel_j};
use ndarray::Array2;
use num_complex::Complex64;
use serde::Serialize;
use std::collections::HashMap;
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BeamError {
    #[error("invalid beam: {0}")]
    InvalidSpec(String),
    #[error("propagation distance |z| = {z} um exceeds 5 Rayleigh ranges ({limit} um)")]
    OutOfParaxialRange { z: f64, limit: f64 },
    #[error("radial profile peaks at the origin; no annulus to fit")]
    NotAnAnnulus,
    #[error("phase winding indeterminate: |f| = {amplitude:e} of peak on the circle of radius {radius}")]
    IndeterminateWinding { radius: f64, amplitude: f64 },
    #[error("annulus fit did not converge")]
    FitFailed,
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("{0}")]
    Strict(Warning),
}

/// Order-`l` Bessel-Gauss beam. Lengths in µm, wavenumbers in µm⁻¹.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BGBeamSpec {
    pub l: i32,
    pub k_t: f64,
    pub w0: f64,
    pub k_p: f64,
    /// Peak magnitude of the synthesized field.
    pub amplitude: f64,
}

impl BGBeamSpec {
    pub fn new(l: i32, k_t: f64, w0: f64, wavelength: f64) -> Result<Self, BeamError> {
        let s = Self {
            l,
            k_t,
            w0,
            k_p: 2.0 * PI / wavelength,
            amplitude: 1.0,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), BeamError> {
        let bad = |m: &str| Err(BeamError::InvalidSpec(m.to_string()));
        if !(self.k_t >= 0.0 && self.k_t.is_finite()) {
            return bad("k_t must be finite and >= 0");
        }
        if !(self.w0 > 0.0 && self.w0.is_finite()) {
            return bad("w0 must be finite and > 0");
        }
        if !(self.k_p > self.k_t && self.k_p.is_finite()) {
            return bad("k_p must exceed k_t");
        }
        if !(self.amplitude > 0.0 && self.amplitude.is_finite()) {
            return bad("amplitude must be finite and > 0");
        }
        Ok(())
    }

    pub fn wavelength(&self) -> f64 {
        2.0 * PI / self.k_p
    }

    pub fn rayleigh_range(&self) -> f64 {
        self.k_p * self.w0 * self.w0 / 2.0
    }

    /// Cone half-angle `atan(k_t/k_p)` in radians.
    pub fn cone_half_angle(&self) -> f64 {
        (self.k_t / self.k_p).atan()
    }

    /// Radius in k-space beyond which the spectrum is negligible.
    pub fn spectral_extent(&self) -> f64 {
        self.k_t + 6.0 / self.w0
    }
}

fn normalize_peak(data: &mut Array2<Complex64>, amplitude: f64) {
    let peak = data.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if peak > 0.0 {
        let s = amplitude / peak;
        data.mapv_inplace(|v| v * s);
    }
}

/// Wavevector-domain amplitude
/// `S(k) ∝ exp(−w0²|k|²/4)·I_l(k_t w0²|k|/2)·e^{ilφ}`, scaled so that
/// `max|S| = spec.amplitude`.
///
/// The Gaussian and the exponential growth of `I_l` are combined into
/// `exp(−w0²(|k|−k_t)²/4)·e^{−x}I_l(x)`; the dropped constant
/// `exp(w0²k_t²/4)` is absorbed by the peak normalization.
pub fn synthesize_bg_k(
    spec: &BGBeamSpec,
    grid: &GridSpec,
    checks: &mut Checks,
) -> Result<ComplexField2D, BeamError> {
    synthesize_bg_k_with(spec, grid, Execution::default(), checks)
}

pub fn synthesize_bg_k_with(
    spec: &BGBeamSpec,
    grid: &GridSpec,
    exec: Execution,
    checks: &mut Checks,
) -> Result<ComplexField2D, BeamError> {
    spec.validate()?;
    let ([x0, x1], [y0, y1]) = grid.extent();
    let available = (-x0).min(x1).min(-y0).min(y1);
    let needed = spec.spectral_extent();
    if available < needed {
        checks
            .raise(
                WarningKind::Clipping,
                format!(
                    "k-grid reaches |k| = {available:.4e} um^-1 but the annulus needs {needed:.4e} um^-1"
                ),
            )
            .map_err(BeamError::Strict)?;
    }
    let xs = grid.xs();
    let ys = grid.ys();
    let q = spec.w0 * spec.w0 / 4.0;
    let b = spec.k_t * spec.w0 * spec.w0 / 2.0;
    let l = spec.l;
    let mut buf = vec![Complex64::default(); grid.len()];
    exec::for_each_row(exec, &mut buf, grid.nx(), |j, row| {
        let ky = ys[j];
        for (i, v) in row.iter_mut().enumerate() {
            let kx = xs[i];
            let k = (kx * kx + ky * ky).sqrt();
            let radial = (-q * (k - spec.k_t).powi(2)).exp() * bessel_i_scaled(l, b * k);
            *v = Complex64::from_polar(radial, l as f64 * ky.atan2(kx));
        }
    });
    let mut data = Array2::from_shape_vec((grid.ny(), grid.nx()), buf).expect("shape");
    normalize_peak(&mut data, spec.amplitude);
    Ok(ComplexField2D::new(
        *grid,
        Domain::Wavevector,
        spec.wavelength(),
        data,
    )?)
}

/// Position-domain amplitude at propagation distance `z` from the waist:
/// `(1/µ)·exp(−(1/µ)(i k_t² z/(2k_p) + ρ²/w0²))·J_l(k_t ρ/µ)·e^{ilφ}` with
/// `µ = 1 + iz/z_r`, scaled so that `max|U| = spec.amplitude` on the grid.
/// At `z = 0` this is `i^{−l}` times the inverse transform of
/// [`synthesize_bg_k`], up to a positive constant.
pub fn synthesize_bg_pos(
    spec: &BGBeamSpec,
    z: f64,
    grid: &GridSpec,
) -> Result<ComplexField2D, BeamError> {
    synthesize_bg_pos_with(spec, z, grid, Execution::default())
}

pub fn synthesize_bg_pos_with(
    spec: &BGBeamSpec,
    z: f64,
    grid: &GridSpec,
    exec: Execution,
) -> Result<ComplexField2D, BeamError> {
    spec.validate()?;
    let zr = spec.rayleigh_range();
    if !(z.abs() < 5.0 * zr) {
        return Err(BeamError::OutOfParaxialRange { z, limit: 5.0 * zr });
    }
    let mu = Complex64::new(1.0, z / zr);
    let inv_mu = mu.inv();
    let axial = Complex64::new(0.0, spec.k_t * spec.k_t * z / (2.0 * spec.k_p));
    let xs = grid.xs();
    let ys = grid.ys();

    // The radial factor depends only on ρ², which repeats across the grid.
    let mut radii: Vec<f64> = Vec::new();
    let mut seen: HashMap<u64, ()> = HashMap::new();
    for &y in &ys {
        for &x in &xs {
            let r2 = x * x + y * y;
            if seen.insert(r2.to_bits(), ()).is_none() {
                radii.push(r2);
            }
        }
    }
    let values = exec::map(exec, &radii, |&r2| {
        let envelope = (-(inv_mu * (axial + r2 / (spec.w0 * spec.w0)))).exp() * inv_mu;
        envelope * bessel_j(spec.l, inv_mu * (spec.k_t * r2.sqrt()))
    });
    let table: HashMap<u64, Complex64> = radii
        .iter()
        .zip(values)
        .map(|(r2, v)| (r2.to_bits(), v))
        .collect();

    let l = spec.l as f64;
    let mut data = Array2::from_shape_fn((grid.ny(), grid.nx()), |(j, i)| {
        let (x, y) = (xs[i], ys[j]);
        let radial = table[&(x * x + y * y).to_bits()];
        if spec.l == 0 {
            radial
        } else {
            radial * Complex64::from_polar(1.0, l * y.atan2(x))
        }
    });
    normalize_peak(&mut data, spec.amplitude);
    Ok(ComplexField2D::new(
        *grid,
        Domain::Position,
        spec.wavelength(),
        data,
    )?)
}

/// Result of a phase-winding measurement.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Winding {
    pub winding: i32,
    /// Accumulated phase divided by 2π before rounding.
    pub raw: f64,
}

impl Winding {
    pub fn residual(&self) -> f64 {
        self.raw - self.winding as f64
    }
}

const WINDING_SAMPLES: usize = 512;

/// Net phase winding of `f` around a circle of `radius` about the grid
/// center.
pub fn phase_winding(f: &ComplexField2D, radius: f64) -> Result<Winding, BeamError> {
    phase_winding_about(f, f.grid().center(), radius)
}

/// Net phase winding of `f` around a circle of `radius` about `center`,
/// summing wrapped phase differences between bilinearly interpolated samples.
pub fn phase_winding_about(
    f: &ComplexField2D,
    center: [f64; 2],
    radius: f64,
) -> Result<Winding, BeamError> {
    let peak = f.peak_abs();
    let samples: Vec<Complex64> = (0..WINDING_SAMPLES)
        .map(|s| {
            let t = 2.0 * PI * s as f64 / WINDING_SAMPLES as f64;
            f.sample_bilinear(center[0] + radius * t.cos(), center[1] + radius * t.sin())
        })
        .collect();
    let weakest = samples.iter().map(|v| v.norm()).fold(f64::INFINITY, f64::min);
    if !(peak > 0.0) || weakest <= 1e-6 * peak {
        return Err(BeamError::IndeterminateWinding {
            radius,
            amplitude: if peak > 0.0 { weakest / peak } else { 0.0 },
        });
    }
    let mut total = 0.0;
    for s in 0..WINDING_SAMPLES {
        let a = samples[s];
        let b = samples[(s + 1) % WINDING_SAMPLES];
        total += (b * a.conj()).arg();
    }
    let raw = total / (2.0 * PI);
    Ok(Winding {
        winding: raw.round() as i32,
        raw,
    })
}

/// Gaussian-ridge fit of an azimuthally averaged angular spectrum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AnnulusFit {
    /// Ridge radius (µm⁻¹).
    pub k_t_hat: f64,
    /// 1/e² full width of the ridge, `2σ` (µm⁻¹).
    pub delta_k: f64,
    /// `4/delta_k` (µm).
    pub w0_hat: f64,
    /// RMS residual of the fit relative to the profile peak.
    pub residual: f64,
}

/// Azimuthal average about the grid center in bins one k-pitch wide.
/// Returns (mean radius, mean value) per non-empty bin.
pub fn radial_profile(intensity: &RealField2D) -> Vec<(f64, f64)> {
    let g = intensity.grid();
    let dk = g.pitch()[0].min(g.pitch()[1]);
    let c = g.center();
    let xs = g.xs();
    let ys = g.ys();
    let max_r = {
        let ([x0, x1], [y0, y1]) = g.extent();
        (x1 - c[0]).min(c[0] - x0).min(y1 - c[1]).min(c[1] - y0)
    };
    let nbins = (max_r / dk).floor() as usize + 1;
    let mut sum_r = vec![0.0; nbins];
    let mut sum_v = vec![0.0; nbins];
    let mut count = vec![0usize; nbins];
    for ((j, i), &v) in intensity.data().indexed_iter() {
        let r = ((xs[i] - c[0]).powi(2) + (ys[j] - c[1]).powi(2)).sqrt();
        let b = (r / dk).round() as usize;
        if b < nbins {
            sum_r[b] += r;
            sum_v[b] += v;
            count[b] += 1;
        }
    }
    (0..nbins)
        .filter(|&b| count[b] > 0)
        .map(|b| (sum_r[b] / count[b] as f64, sum_v[b] / count[b] as f64))
        .collect()
}

fn solve3(a: [[f64; 3]; 3], b: [f64; 3]) -> Option<[f64; 3]> {
    let det = |m: [[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(a);
    if d == 0.0 || !d.is_finite() {
        return None;
    }
    let mut x = [0.0; 3];
    for (c, xc) in x.iter_mut().enumerate() {
        let mut m = a;
        for r in 0..3 {
            m[r][c] = b[r];
        }
        *xc = det(m) / d;
    }
    Some(x)
}

/// Levenberg-Marquardt fit of `A·exp(−2(r−r0)²/σ²)`; returns `[A, r0, σ]`.
fn fit_ridge(points: &[(f64, f64)], start: [f64; 3]) -> Option<[f64; 3]> {
    let model = |p: &[f64; 3], r: f64| p[0] * (-2.0 * (r - p[1]).powi(2) / (p[2] * p[2])).exp();
    let cost = |p: &[f64; 3]| points.iter().map(|&(r, v)| (model(p, r) - v).powi(2)).sum::<f64>();
    let mut p = start;
    let mut c = cost(&p);
    let mut lambda = 1e-3;
    for _ in 0..200 {
        let mut jtj = [[0.0; 3]; 3];
        let mut jtr = [0.0; 3];
        for &(r, v) in points {
            let e = (-2.0 * (r - p[1]).powi(2) / (p[2] * p[2])).exp();
            let m = p[0] * e;
            let jac = [
                e,
                m * 4.0 * (r - p[1]) / (p[2] * p[2]),
                m * 4.0 * (r - p[1]).powi(2) / p[2].powi(3),
            ];
            let res = v - m;
            for a in 0..3 {
                jtr[a] += jac[a] * res;
                for b in 0..3 {
                    jtj[a][b] += jac[a] * jac[b];
                }
            }
        }
        let mut improved = false;
        while lambda < 1e12 {
            let mut damped = jtj;
            for (a, row) in damped.iter_mut().enumerate() {
                row[a] *= 1.0 + lambda;
            }
            let Some(step) = solve3(damped, jtr) else {
                lambda *= 10.0;
                continue;
            };
            let trial = [p[0] + step[0], p[1] + step[1], p[2] + step[2]];
            let tc = cost(&trial);
            if trial[2] > 0.0 && tc <= c {
                let done = (c - tc) <= 1e-15 * c.max(1e-300);
                p = trial;
                c = tc;
                lambda = (lambda / 10.0).max(1e-12);
                improved = true;
                if done {
                    return Some(p);
                }
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    p.iter().all(|v| v.is_finite()).then_some(p)
}

/// Fit the ring of an angular spectrum: the ridge radius estimates `k_t` and
/// its 1/e² full width `δk` gives `w0 = 4/δk`.
pub fn fit_annulus(intensity: &RealField2D) -> Result<AnnulusFit, BeamError> {
    if intensity.domain() != Domain::Wavevector {
        return Err(GridError::DomainMismatch {
            expected: Domain::Wavevector,
            found: intensity.domain(),
        }
        .into());
    }
    let profile = radial_profile(intensity);
    let (peak_bin, &(r_peak, v_peak)) = profile
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
        .ok_or(BeamError::NotAnAnnulus)?;
    if peak_bin == 0 || !(v_peak > 0.0) {
        return Err(BeamError::NotAnAnnulus);
    }
    let floor = 0.05 * v_peak;
    let mut lo = peak_bin;
    while lo > 0 && profile[lo - 1].1 >= floor {
        lo -= 1;
    }
    let mut hi = peak_bin;
    while hi + 1 < profile.len() && profile[hi + 1].1 >= floor {
        hi += 1;
    }
    let points = &profile[lo..=hi];
    if points.len() < 3 {
        return Err(BeamError::FitFailed);
    }
    // second moment of the selected bins seeds the width
    let total: f64 = points.iter().map(|p| p.1).sum();
    let var = points.iter().map(|&(r, v)| v * (r - r_peak).powi(2)).sum::<f64>() / total;
    let sigma0 = (4.0 * var).sqrt().max(1e-12);
    let p = fit_ridge(points, [v_peak, r_peak, sigma0]).ok_or(BeamError::FitFailed)?;
    if !(p[1] > 0.0) {
        return Err(BeamError::NotAnAnnulus);
    }
    let delta_k = 2.0 * p[2].abs();
    let residual = (points
        .iter()
        .map(|&(r, v)| (p[0] * (-2.0 * (r - p[1]).powi(2) / (p[2] * p[2])).exp() - v).powi(2))
        .sum::<f64>()
        / points.len() as f64)
        .sqrt()
        / v_peak;
    Ok(AnnulusFit {
        k_t_hat: p[1],
        delta_k,
        w0_hat: 4.0 / delta_k,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{fft2, ifft2};

    fn reference_spec(l: i32) -> BGBeamSpec {
        BGBeamSpec::new(l, 2.2e-2, 1300.0, 0.406).unwrap()
    }

    fn k_grid(n: usize) -> GridSpec {
        GridSpec::square(n, 12800.0 / n as f64).unwrap().conjugate()
    }

    #[test]
    fn spec_validation() {
        assert!(BGBeamSpec::new(1, -1e-3, 1300.0, 0.406).is_err());
        assert!(BGBeamSpec::new(1, 1e-2, 0.0, 0.406).is_err());
        assert!(BGBeamSpec::new(1, 20.0, 1300.0, 0.406).is_err());
        let s = reference_spec(-3);
        assert!((s.cone_half_angle() - (0.022f64 / (2.0 * PI / 0.406)).atan()).abs() < 1e-15);
    }

    #[test]
    fn order_zero_is_real_and_nonnegative() {
        let f = synthesize_bg_k(&reference_spec(0), &k_grid(128), &mut Checks::strict()).unwrap();
        for v in f.data().iter() {
            assert!(v.im == 0.0 && v.re >= 0.0);
        }
        assert!((f.peak_abs() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn annulus_sits_at_k_t() {
        let f = synthesize_bg_k(&reference_spec(1), &k_grid(256), &mut Checks::strict()).unwrap();
        let prof = radial_profile(&f.intensity());
        let peak = prof.iter().max_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
        let dk = f.grid().pitch()[0];
        assert!((peak.0 - 0.022).abs() < dk, "ring at {}", peak.0);
    }

    #[test]
    fn small_grid_raises_clipping() {
        let mut lenient = Checks::lenient();
        let tiny = GridSpec::square(16, 12800.0 / 16.0).unwrap().conjugate();
        synthesize_bg_k(&reference_spec(1), &tiny, &mut lenient).unwrap();
        assert_eq!(lenient.warnings()[0].kind, WarningKind::Clipping);
        assert!(matches!(
            synthesize_bg_k(&reference_spec(1), &tiny, &mut Checks::strict()),
            Err(BeamError::Strict(_))
        ));
    }

    #[test]
    fn winding_of_synthesized_charges() {
        let g = k_grid(256);
        for l in -2..=3 {
            let f = synthesize_bg_k(&reference_spec(l), &g, &mut Checks::strict()).unwrap();
            let w = phase_winding(&f, 0.022).unwrap();
            assert_eq!(w.winding, l);
            assert!(w.residual().abs() < 1e-9);
        }
    }

    #[test]
    fn winding_through_null_is_indeterminate() {
        let f = synthesize_bg_k(&reference_spec(1), &k_grid(128), &mut Checks::strict()).unwrap();
        assert!(matches!(
            phase_winding(&f, 0.2),
            Err(BeamError::IndeterminateWinding { .. })
        ));
    }

    #[test]
    fn vortex_null_on_axis() {
        let g = GridSpec::square(128, 100.0).unwrap();
        let f = synthesize_bg_pos(&reference_spec(1), 0.0, &g).unwrap();
        assert_eq!(f.data()[[64, 64]], Complex64::new(0.0, 0.0));
        let f0 = synthesize_bg_pos(&reference_spec(0), 0.0, &g).unwrap();
        let i = f0.intensity();
        assert_eq!(i.data()[[64, 64]], i.max());
    }

    #[test]
    fn out_of_paraxial_range() {
        let s = reference_spec(1);
        let g = GridSpec::square(16, 100.0).unwrap();
        assert!(matches!(
            synthesize_bg_pos(&s, 6.0 * s.rayleigh_range(), &g),
            Err(BeamError::OutOfParaxialRange { .. })
        ));
    }

    #[test]
    fn position_closed_form_matches_transformed_spectrum() {
        let spec = reference_spec(1);
        let xg = GridSpec::square(256, 50.0).unwrap();
        let s = synthesize_bg_k(&spec, &xg.conjugate(), &mut Checks::strict()).unwrap();
        let via_fft = ifft2(&s).unwrap();
        let closed = synthesize_bg_pos(&spec, 0.0, &xg).unwrap();
        // least-squares global constant
        let num: Complex64 = closed
            .data()
            .iter()
            .zip(via_fft.data().iter())
            .map(|(c, f)| c.conj() * f)
            .sum();
        let den: f64 = closed.data().iter().map(|c| c.norm_sqr()).sum();
        let alpha = num / den;
        let peak = via_fft.peak_abs();
        let worst = closed
            .data()
            .iter()
            .zip(via_fft.data().iter())
            .map(|(c, f)| (c * alpha - f).norm())
            .fold(0.0, f64::max);
        assert!(worst < 1e-3 * peak, "deviation {}", worst / peak);
    }

    #[test]
    fn fit_recovers_reference_parameters() {
        let f = synthesize_bg_k(&reference_spec(1), &k_grid(256), &mut Checks::strict()).unwrap();
        let fit = fit_annulus(&f.intensity()).unwrap();
        assert!((fit.k_t_hat / 0.022 - 1.0).abs() < 0.05, "{fit:?}");
        assert!((fit.w0_hat / 1300.0 - 1.0).abs() < 0.25, "{fit:?}");
        assert_eq!(fit.w0_hat, 4.0 / fit.delta_k);
    }

    #[test]
    fn gaussian_is_not_an_annulus() {
        let g = GridSpec::square(64, 50.0).unwrap();
        let f = ComplexField2D::from_fn(g, Domain::Position, 0.406, |x, y| {
            Complex64::new((-(x * x + y * y) / 400.0f64.powi(2)).exp(), 0.0)
        })
        .unwrap();
        let k = fft2(&f).unwrap();
        assert_eq!(fit_annulus(&k.intensity()), Err(BeamError::NotAnAnnulus));
        assert!(fit_annulus(&f.intensity()).is_err());
    }
}
