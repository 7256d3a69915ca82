//! Physically scaled sample grids and continuous-normalization Fourier
//! transforms between transverse position and transverse wavevector.
//!
//! Sample `i` along an axis sits at `center + (i − n/2)·pitch`, so the zero
//! coordinate of a centered grid is at index `n/2`. Forward transforms
//! approximate `F(k) = ∫ f(ρ) e^{−ik·ρ} dρ` and inverse transforms
//! `f(ρ) = (2π)^{−2} ∫ F(k) e^{ik·ρ} dk`, so Parseval holds in physical
//! units with no hidden constants.

use crate::exec::{self, Execution};
use ndarray::Array2;
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("grid size {nx}x{ny} invalid: each axis must be even and >= 8")]
    InvalidSize { nx: usize, ny: usize },
    #[error("grid pitch must be positive and finite, got ({0}, {1})")]
    InvalidPitch(f64, f64),
    #[error("expected a {expected:?}-domain field, got {found:?}")]
    DomainMismatch { expected: Domain, found: Domain },
    #[error("field contains a non-finite sample at flat index {0}")]
    NonFinite(usize),
    #[error("sample array shape {found:?} does not match grid {expected:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("target grid window lies entirely outside the source grid")]
    EmptyOverlap,
    #[error("grids differ: {0}")]
    GridMismatch(String),
}

/// Which transverse domain a field is sampled in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Position,
    Wavevector,
}

impl Domain {
    pub fn flipped(self) -> Domain {
        match self {
            Domain::Position => Domain::Wavevector,
            Domain::Wavevector => Domain::Position,
        }
    }
}

/// Uniform rectangular sampling of one transverse plane.
///
/// `pitch` and `center` are in the grid's native units (µm for position,
/// µm⁻¹ for wavevector). The conjugate pitch `2π/(n·pitch)` is derived once
/// at construction and carried so that `conjugate().conjugate()` is exact.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    nx: usize,
    ny: usize,
    pitch: [f64; 2],
    conjugate_pitch: [f64; 2],
    center: [f64; 2],
    conjugate_center: [f64; 2],
}

impl GridSpec {
    /// Square-pixel grid centered on the origin in both domains.
    pub fn new(nx: usize, ny: usize, pitch: f64) -> Result<Self, GridError> {
        Self::with_pitch(nx, ny, [pitch, pitch])
    }

    pub fn square(n: usize, pitch: f64) -> Result<Self, GridError> {
        Self::new(n, n, pitch)
    }

    pub fn with_pitch(nx: usize, ny: usize, pitch: [f64; 2]) -> Result<Self, GridError> {
        if nx < 8 || ny < 8 || nx % 2 != 0 || ny % 2 != 0 {
            return Err(GridError::InvalidSize { nx, ny });
        }
        if !(pitch[0] > 0.0 && pitch[1] > 0.0 && pitch[0].is_finite() && pitch[1].is_finite()) {
            return Err(GridError::InvalidPitch(pitch[0], pitch[1]));
        }
        Ok(Self {
            nx,
            ny,
            pitch,
            conjugate_pitch: [
                2.0 * PI / (nx as f64 * pitch[0]),
                2.0 * PI / (ny as f64 * pitch[1]),
            ],
            center: [0.0, 0.0],
            conjugate_center: [0.0, 0.0],
        })
    }

    pub fn centered_at(mut self, center: [f64; 2]) -> Self {
        self.center = center;
        self
    }

    pub fn with_conjugate_center(mut self, center: [f64; 2]) -> Self {
        self.conjugate_center = center;
        self
    }

    /// The grid of the other domain under a discrete Fourier transform.
    pub fn conjugate(&self) -> Self {
        Self {
            nx: self.nx,
            ny: self.ny,
            pitch: self.conjugate_pitch,
            conjugate_pitch: self.pitch,
            center: self.conjugate_center,
            conjugate_center: self.center,
        }
    }

    /// Same shape and center with a new native pitch; the conjugate pitch is
    /// re-derived from the new value.
    pub fn repitched(&self, pitch: [f64; 2]) -> Result<Self, GridError> {
        Ok(Self::with_pitch(self.nx, self.ny, pitch)?
            .centered_at(self.center)
            .with_conjugate_center(self.conjugate_center))
    }

    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn ny(&self) -> usize {
        self.ny
    }
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }
    pub fn is_empty(&self) -> bool {
        false
    }
    pub fn pitch(&self) -> [f64; 2] {
        self.pitch
    }
    pub fn conjugate_pitch(&self) -> [f64; 2] {
        self.conjugate_pitch
    }
    pub fn center(&self) -> [f64; 2] {
        self.center
    }
    pub fn conjugate_center(&self) -> [f64; 2] {
        self.conjugate_center
    }
    pub fn cell_area(&self) -> f64 {
        self.pitch[0] * self.pitch[1]
    }

    pub fn x(&self, i: usize) -> f64 {
        self.center[0] + (i as f64 - (self.nx / 2) as f64) * self.pitch[0]
    }
    pub fn y(&self, j: usize) -> f64 {
        self.center[1] + (j as f64 - (self.ny / 2) as f64) * self.pitch[1]
    }
    pub fn xs(&self) -> Vec<f64> {
        (0..self.nx).map(|i| self.x(i)).collect()
    }
    pub fn ys(&self) -> Vec<f64> {
        (0..self.ny).map(|j| self.y(j)).collect()
    }

    /// Minimum and maximum sample coordinates per axis.
    pub fn extent(&self) -> ([f64; 2], [f64; 2]) {
        (
            [self.x(0), self.x(self.nx - 1)],
            [self.y(0), self.y(self.ny - 1)],
        )
    }

    /// Continuous (column, row) index of a physical coordinate.
    pub fn fractional_index(&self, x: f64, y: f64) -> (f64, f64) {
        (
            (x - self.center[0]) / self.pitch[0] + (self.nx / 2) as f64,
            (y - self.center[1]) / self.pitch[1] + (self.ny / 2) as f64,
        )
    }

    fn shape(&self) -> (usize, usize) {
        (self.ny, self.nx)
    }
}

fn check_finite<'a>(values: impl Iterator<Item = &'a Complex64>) -> Result<(), GridError> {
    for (i, v) in values.enumerate() {
        if !(v.re.is_finite() && v.im.is_finite()) {
            return Err(GridError::NonFinite(i));
        }
    }
    Ok(())
}

/// Complex transverse amplitude sampled on a [`GridSpec`].
///
/// Samples are stored row-major with shape `(ny, nx)`; element `[[j, i]]`
/// sits at `(grid.x(i), grid.y(j))`.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexField2D {
    grid: GridSpec,
    domain: Domain,
    wavelength: f64,
    data: Array2<Complex64>,
}

impl ComplexField2D {
    pub fn new(
        grid: GridSpec,
        domain: Domain,
        wavelength: f64,
        data: Array2<Complex64>,
    ) -> Result<Self, GridError> {
        if data.dim() != grid.shape() {
            return Err(GridError::ShapeMismatch {
                expected: grid.shape(),
                found: data.dim(),
            });
        }
        check_finite(data.iter())?;
        Ok(Self {
            grid,
            domain,
            wavelength,
            data,
        })
    }

    pub fn zeros(grid: GridSpec, domain: Domain, wavelength: f64) -> Self {
        Self {
            grid,
            domain,
            wavelength,
            data: Array2::zeros(grid.shape()),
        }
    }

    /// Sample `f(x, y)` at every grid point.
    pub fn from_fn(
        grid: GridSpec,
        domain: Domain,
        wavelength: f64,
        f: impl Fn(f64, f64) -> Complex64,
    ) -> Result<Self, GridError> {
        let xs = grid.xs();
        let ys = grid.ys();
        let data = Array2::from_shape_fn(grid.shape(), |(j, i)| f(xs[i], ys[j]));
        Self::new(grid, domain, wavelength, data)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }
    pub fn domain(&self) -> Domain {
        self.domain
    }
    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }
    pub fn data(&self) -> &Array2<Complex64> {
        &self.data
    }
    pub fn into_data(self) -> Array2<Complex64> {
        self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut Array2<Complex64> {
        &mut self.data
    }

    pub fn with_wavelength(mut self, wavelength: f64) -> Self {
        self.wavelength = wavelength;
        self
    }

    /// Relabel the sample grid without touching the samples. Shapes must match.
    pub fn relabeled(mut self, grid: GridSpec, domain: Domain) -> Result<Self, GridError> {
        if grid.shape() != self.grid.shape() {
            return Err(GridError::ShapeMismatch {
                expected: self.grid.shape(),
                found: grid.shape(),
            });
        }
        self.grid = grid;
        self.domain = domain;
        Ok(self)
    }

    pub fn expect_domain(&self, expected: Domain) -> Result<(), GridError> {
        if self.domain != expected {
            return Err(GridError::DomainMismatch {
                expected,
                found: self.domain,
            });
        }
        Ok(())
    }

    /// `Σ|f|²·cell area` in the native domain.
    pub fn energy(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.cell_area()
    }

    /// Physical norm, including the `(2π)^{-2}` measure for wavevector grids,
    /// so that a field and its transform report the same value.
    pub fn physical_energy(&self) -> f64 {
        match self.domain {
            Domain::Position => self.energy(),
            Domain::Wavevector => self.energy() / (4.0 * PI * PI),
        }
    }

    pub fn peak_abs(&self) -> f64 {
        self.data.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn scaled(mut self, s: Complex64) -> Self {
        self.data.mapv_inplace(|v| v * s);
        self
    }

    pub fn intensity(&self) -> RealField2D {
        RealField2D {
            grid: self.grid,
            domain: self.domain,
            data: self.data.mapv(|v| v.norm_sqr()),
        }
    }

    /// Bilinear interpolation of real and imaginary parts; zero outside the
    /// sampled window.
    pub fn sample_bilinear(&self, x: f64, y: f64) -> Complex64 {
        let (fx, fy) = self.grid.fractional_index(x, y);
        bilinear(&self.data, fx, fy).unwrap_or_default()
    }
}

pub(crate) fn bilinear<T>(data: &Array2<T>, fx: f64, fy: f64) -> Option<T>
where
    T: Copy + std::ops::Mul<f64, Output = T> + std::ops::Add<Output = T>,
{
    let (ny, nx) = data.dim();
    let snap = |v: f64| {
        let r = v.round();
        if (v - r).abs() < 1e-9 {
            r
        } else {
            v
        }
    };
    let (fx, fy) = (snap(fx), snap(fy));
    if !(fx >= 0.0 && fy >= 0.0 && fx <= (nx - 1) as f64 && fy <= (ny - 1) as f64) {
        return None;
    }
    let i0 = (fx.floor() as usize).min(nx - 1);
    let j0 = (fy.floor() as usize).min(ny - 1);
    let tx = fx - i0 as f64;
    let ty = fy - j0 as f64;
    if tx == 0.0 && ty == 0.0 {
        return Some(data[[j0, i0]]);
    }
    let i1 = (i0 + 1).min(nx - 1);
    let j1 = (j0 + 1).min(ny - 1);
    let top = data[[j0, i0]] * (1.0 - tx) + data[[j0, i1]] * tx;
    let bottom = data[[j1, i0]] * (1.0 - tx) + data[[j1, i1]] * tx;
    Some(top * (1.0 - ty) + bottom * ty)
}

/// Non-negative real quantity (intensity, angular spectrum) on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct RealField2D {
    grid: GridSpec,
    domain: Domain,
    data: Array2<f64>,
}

impl RealField2D {
    pub fn new(grid: GridSpec, domain: Domain, data: Array2<f64>) -> Result<Self, GridError> {
        if data.dim() != grid.shape() {
            return Err(GridError::ShapeMismatch {
                expected: grid.shape(),
                found: data.dim(),
            });
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(GridError::NonFinite(i));
        }
        Ok(Self { grid, domain, data })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }
    pub fn domain(&self) -> Domain {
        self.domain
    }
    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }
    pub fn into_data(self) -> Array2<f64> {
        self.data
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sum(&self) -> f64 {
        self.data.sum()
    }

    /// Rescale so the maximum is one. An all-zero field is returned unchanged.
    pub fn normalized_to_peak(mut self) -> Self {
        let m = self.max();
        if m > 0.0 {
            self.data.mapv_inplace(|v| v / m);
        }
        self
    }

    pub fn scaled(mut self, s: f64) -> Self {
        self.data.mapv_inplace(|v| v * s);
        self
    }

    pub fn sample_bilinear(&self, x: f64, y: f64) -> f64 {
        let (fx, fy) = self.grid.fractional_index(x, y);
        bilinear(&self.data, fx, fy).unwrap_or(0.0)
    }

    /// Intensity-weighted mean coordinate.
    pub fn centroid(&self) -> [f64; 2] {
        let xs = self.grid.xs();
        let ys = self.grid.ys();
        let (mut sx, mut sy, mut s) = (0.0, 0.0, 0.0);
        for ((j, i), &v) in self.data.indexed_iter() {
            sx += v * xs[i];
            sy += v * ys[j];
            s += v;
        }
        if s > 0.0 {
            [sx / s, sy / s]
        } else {
            self.grid.center
        }
    }
}

struct AxisFactors {
    pre: Vec<Complex64>,
    post: Vec<Complex64>,
}

/// Pre/post modulation turning an index-origin DFT into the centered,
/// physically scaled transform along one axis.
///
/// With `u_j = c_in + (j − h)·d_in`, `v_m = c_out + (m − h)·d_out` and
/// `d_in·d_out·n = 2π`, the kernel `e^{iσ v_m u_j}` factors into
/// `(−1)^{j+m+h}·e^{iσ c_out (j−h) d_in}·e^{iσ (m−h) d_out c_in}·e^{iσ c_out c_in}`
/// times the plain DFT kernel. Ramp arguments are always formed as
/// `offset · position_pitch · wavevector_center` (or the mirror pair), so the
/// forward and inverse phases are exact negatives of each other.
fn axis_factors(n: usize, pos: (f64, f64), wav: (f64, f64), forward: bool) -> AxisFactors {
    let (d_pos, c_pos) = pos;
    let (d_k, c_k) = wav;
    let h = n / 2;
    let sigma = if forward { -1.0 } else { 1.0 };
    let parity = |i: usize| if i % 2 == 0 { 1.0 } else { -1.0 };
    let cis = |theta: f64| Complex64::from_polar(1.0, theta);
    // forward: input position, output wavevector
    let (in_rate, out_rate) = if forward {
        (d_pos * c_k, d_k * c_pos)
    } else {
        (d_k * c_pos, d_pos * c_k)
    };
    let scale = if forward { d_pos } else { d_k / (2.0 * PI) };
    let global = cis(sigma * (c_k * c_pos)) * (parity(h) * scale);
    let pre = (0..n)
        .map(|j| cis(sigma * ((j as f64 - h as f64) * in_rate)) * parity(j))
        .collect();
    let post = (0..n)
        .map(|m| cis(sigma * ((m as f64 - h as f64) * out_rate)) * global * parity(m))
        .collect();
    AxisFactors { pre, post }
}

fn transpose(src: &[Complex64], rows: usize, cols: usize, dst: &mut [Complex64]) {
    const B: usize = 32;
    for rb in (0..rows).step_by(B) {
        for cb in (0..cols).step_by(B) {
            for r in rb..(rb + B).min(rows) {
                for c in cb..(cb + B).min(cols) {
                    dst[c * rows + r] = src[r * cols + c];
                }
            }
        }
    }
}

fn fft_rows(exec: Execution, data: &mut [Complex64], row_len: usize, forward: bool) {
    let mut planner = FftPlanner::<f64>::new();
    let fft = if forward {
        planner.plan_fft_forward(row_len)
    } else {
        planner.plan_fft_inverse(row_len)
    };
    exec::for_each_row(exec, data, row_len, |_, row| {
        let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
        fft.process_with_scratch(row, &mut scratch);
    });
}

fn transform(
    f: &ComplexField2D,
    forward: bool,
    exec: Execution,
) -> Result<ComplexField2D, GridError> {
    let expected = if forward {
        Domain::Position
    } else {
        Domain::Wavevector
    };
    f.expect_domain(expected)?;
    let g = f.grid;
    let out_grid = g.conjugate();
    let (pos_grid, wav_grid) = if forward { (g, out_grid) } else { (out_grid, g) };
    let fx = axis_factors(
        g.nx,
        (pos_grid.pitch[0], pos_grid.center[0]),
        (wav_grid.pitch[0], wav_grid.center[0]),
        forward,
    );
    let fy = axis_factors(
        g.ny,
        (pos_grid.pitch[1], pos_grid.center[1]),
        (wav_grid.pitch[1], wav_grid.center[1]),
        forward,
    );
    let (nx, ny) = (g.nx, g.ny);
    let src = f.data.as_slice().expect("standard layout");
    let mut buf: Vec<Complex64> = vec![Complex64::default(); nx * ny];
    exec::for_each_row(exec, &mut buf, nx, |j, row| {
        for (i, v) in row.iter_mut().enumerate() {
            *v = src[j * nx + i] * fx.pre[i] * fy.pre[j];
        }
    });
    fft_rows(exec, &mut buf, nx, forward);
    let mut t = vec![Complex64::default(); nx * ny];
    transpose(&buf, ny, nx, &mut t);
    fft_rows(exec, &mut t, ny, forward);
    transpose(&t, nx, ny, &mut buf);
    exec::for_each_row(exec, &mut buf, nx, |j, row| {
        for (i, v) in row.iter_mut().enumerate() {
            *v *= fx.post[i] * fy.post[j];
        }
    });
    let data = Array2::from_shape_vec((ny, nx), buf).expect("shape");
    Ok(ComplexField2D {
        grid: out_grid,
        domain: f.domain.flipped(),
        wavelength: f.wavelength,
        data,
    })
}

/// Position → wavevector transform with continuous normalization.
pub fn fft2(f: &ComplexField2D) -> Result<ComplexField2D, GridError> {
    transform(f, true, Execution::default())
}

pub fn fft2_with(f: &ComplexField2D, exec: Execution) -> Result<ComplexField2D, GridError> {
    transform(f, true, exec)
}

/// Wavevector → position transform with continuous normalization.
pub fn ifft2(f: &ComplexField2D) -> Result<ComplexField2D, GridError> {
    transform(f, false, Execution::default())
}

pub fn ifft2_with(f: &ComplexField2D, exec: Execution) -> Result<ComplexField2D, GridError> {
    transform(f, false, exec)
}

/// Where the inverse transform is evaluated relative to the spectrum.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Carrier {
    /// Use absolute wavevectors; a spectrum centered at `k_c` keeps its
    /// `e^{ik_c·ρ}` tilt.
    Keep,
    /// Measure wavevectors from the grid center, i.e. evaluate in a frame that
    /// co-moves with the beam axis.
    Remove,
}

/// Evaluate the continuous inverse transform of a sampled spectrum at
/// arbitrary position coordinates (a separable matrix DFT).
///
/// Unlike [`ifft2`] the output spacing is not tied to the spectrum's pitch,
/// so fine aperture-plane grids can be filled from a coarse spectrum without
/// interpolation error. Spectrum rows and columns whose magnitude never
/// exceeds `1e-14` of the peak are skipped. Returns samples with shape
/// `(ys.len(), xs.len())`.
pub fn evaluate_inverse(
    spectrum: &ComplexField2D,
    xs: &[f64],
    ys: &[f64],
    carrier: Carrier,
    exec: Execution,
) -> Result<Array2<Complex64>, GridError> {
    evaluate_inverse_cropped(spectrum, xs, ys, carrier, 1e-14, exec)
}

/// [`evaluate_inverse`] restricted to the bounding box of samples above
/// `rel_tol` of the spectrum peak. The dropped part bounds the absolute
/// error by `rel_tol · peak · (dropped cells) · dk²/4π²`.
pub fn evaluate_inverse_cropped(
    spectrum: &ComplexField2D,
    xs: &[f64],
    ys: &[f64],
    carrier: Carrier,
    rel_tol: f64,
    exec: Execution,
) -> Result<Array2<Complex64>, GridError> {
    spectrum.expect_domain(Domain::Wavevector)?;
    let g = spectrum.grid;
    let peak = spectrum.peak_abs();
    let mut out = Array2::zeros((ys.len(), xs.len()));
    if peak == 0.0 || xs.is_empty() || ys.is_empty() {
        return Ok(out);
    }
    let tol = peak * rel_tol;
    let (mut r0, mut r1, mut c0, mut c1) = (usize::MAX, 0, usize::MAX, 0);
    for ((j, i), v) in spectrum.data.indexed_iter() {
        if v.norm() > tol {
            r0 = r0.min(j);
            r1 = r1.max(j);
            c0 = c0.min(i);
            c1 = c1.max(i);
        }
    }
    let origin = match carrier {
        Carrier::Keep => [0.0, 0.0],
        Carrier::Remove => g.center,
    };
    let kx: Vec<f64> = (c0..=c1).map(|i| g.x(i) - origin[0]).collect();
    let ky: Vec<f64> = (r0..=r1).map(|j| g.y(j) - origin[1]).collect();
    let scale = g.cell_area() / (4.0 * PI * PI);
    let (nkx, nky) = (kx.len(), ky.len());
    let block = spectrum.data.slice(ndarray::s![r0..=r1, c0..=c1]).to_owned();

    // T[n][xi] = Σ_m F[n][m] e^{i kx_m x_xi}
    let ex: Vec<Vec<Complex64>> = exec::map(exec, xs, |&x| {
        kx.iter().map(|&k| Complex64::from_polar(1.0, k * x)).collect()
    });
    let t: Vec<Vec<Complex64>> = exec::map_range(exec, nky, |n| {
        let row = block.row(n);
        ex.iter()
            .map(|e| {
                let mut acc = Complex64::default();
                for m in 0..nkx {
                    acc += row[m] * e[m];
                }
                acc
            })
            .collect()
    });
    let rows: Vec<Vec<Complex64>> = exec::map(exec, ys, |&y| {
        let ey: Vec<Complex64> = ky.iter().map(|&k| Complex64::from_polar(1.0, k * y)).collect();
        let mut acc = vec![Complex64::default(); xs.len()];
        for (n, w) in ey.iter().enumerate() {
            for (a, tv) in acc.iter_mut().zip(&t[n]) {
                *a += *w * *tv;
            }
        }
        acc.iter_mut().for_each(|a| *a *= scale);
        acc
    });
    for (j, row) in rows.into_iter().enumerate() {
        for (i, v) in row.into_iter().enumerate() {
            out[[j, i]] = v;
        }
    }
    Ok(out)
}

/// Energy bookkeeping for [`resample`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ResampleReport {
    pub energy_before: f64,
    pub energy_after: f64,
}

impl ResampleReport {
    pub fn relative_change(&self) -> f64 {
        if self.energy_before == 0.0 {
            0.0
        } else {
            (self.energy_after - self.energy_before) / self.energy_before
        }
    }
}

/// Bilinear resampling onto another grid of the same domain. Target points
/// outside the source window are set to zero.
pub fn resample(
    f: &ComplexField2D,
    new_grid: &GridSpec,
) -> Result<(ComplexField2D, ResampleReport), GridError> {
    let energy_before = f.energy();
    if *new_grid == f.grid {
        return Ok((
            f.clone(),
            ResampleReport {
                energy_before,
                energy_after: energy_before,
            },
        ));
    }
    let xs = new_grid.xs();
    let ys = new_grid.ys();
    let mut any = false;
    let data = Array2::from_shape_fn(new_grid.shape(), |(j, i)| {
        let (fx, fy) = f.grid.fractional_index(xs[i], ys[j]);
        match bilinear(&f.data, fx, fy) {
            Some(v) => {
                any = true;
                v
            }
            None => Complex64::default(),
        }
    });
    if !any {
        return Err(GridError::EmptyOverlap);
    }
    let out = ComplexField2D {
        grid: *new_grid,
        domain: f.domain,
        wavelength: f.wavelength,
        data,
    };
    let energy_after = out.energy();
    Ok((
        out,
        ResampleReport {
            energy_before,
            energy_after,
        },
    ))
}
