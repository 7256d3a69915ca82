use super::DiffractionError;
use crate::checks::{Checks, WarningKind};
use crate::grid::{ComplexField2D, Domain, GridSpec};
use ndarray::Array2;
use serde::Serialize;
use std::f64::consts::PI;

/// Minimum number of samples a hard aperture should span.
pub const MIN_APERTURE_SAMPLES: f64 = 64.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ApertureShape {
    /// Equilateral triangle of the given side length. At zero orientation one
    /// vertex points along +y.
    Triangle { side: f64 },
    Disk { radius: f64 },
    Rect { width: f64, height: f64 },
}

/// Binary transmission mask on a position-domain grid.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ApertureMask {
    pub shape: ApertureShape,
    pub center: [f64; 2],
    pub orientation: f64,
    #[serde(skip)]
    pub grid: GridSpec,
}

pub fn triangular_mask(
    side: f64,
    center: [f64; 2],
    orientation: f64,
    grid: GridSpec,
) -> Result<ApertureMask, DiffractionError> {
    ApertureMask::new(ApertureShape::Triangle { side }, center, orientation, grid)
}

impl ApertureMask {
    pub fn new(
        shape: ApertureShape,
        center: [f64; 2],
        orientation: f64,
        grid: GridSpec,
    ) -> Result<Self, DiffractionError> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        let ok = match shape {
            ApertureShape::Triangle { side } => positive(side),
            ApertureShape::Disk { radius } => positive(radius),
            ApertureShape::Rect { width, height } => positive(width) && positive(height),
        };
        if !ok || !orientation.is_finite() || !center.iter().all(|c| c.is_finite()) {
            return Err(DiffractionError::InvalidAperture(format!("{shape:?}")));
        }
        Ok(Self {
            shape,
            center,
            orientation,
            grid,
        })
    }

    /// Triangle vertices, counter-clockwise.
    pub fn vertices(&self) -> Option<[[f64; 2]; 3]> {
        let ApertureShape::Triangle { side } = self.shape else {
            return None;
        };
        let r = side / 3f64.sqrt();
        let mut v = [[0.0; 2]; 3];
        for (i, p) in v.iter_mut().enumerate() {
            let t = self.orientation + PI / 2.0 + 2.0 * PI * i as f64 / 3.0;
            *p = [self.center[0] + r * t.cos(), self.center[1] + r * t.sin()];
        }
        Some(v)
    }

    /// Smallest characteristic dimension (triangle side, disk diameter,
    /// shorter rectangle edge).
    pub fn feature_size(&self) -> f64 {
        match self.shape {
            ApertureShape::Triangle { side } => side,
            ApertureShape::Disk { radius } => 2.0 * radius,
            ApertureShape::Rect { width, height } => width.min(height),
        }
    }

    /// Radius of a circle about `center` that encloses the aperture.
    pub fn bounding_radius(&self) -> f64 {
        match self.shape {
            ApertureShape::Triangle { side } => side / 3f64.sqrt(),
            ApertureShape::Disk { radius } => radius,
            ApertureShape::Rect { width, height } => 0.5 * width.hypot(height),
        }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        match self.shape {
            ApertureShape::Triangle { .. } => {
                let v = self.vertices().expect("triangle");
                (0..3).all(|i| {
                    let a = v[i];
                    let b = v[(i + 1) % 3];
                    (b[0] - a[0]) * (y - a[1]) - (b[1] - a[1]) * (x - a[0]) >= 0.0
                })
            }
            ApertureShape::Disk { radius } => {
                (x - self.center[0]).hypot(y - self.center[1]) <= radius
            }
            ApertureShape::Rect { width, height } => {
                let (s, c) = self.orientation.sin_cos();
                let dx = x - self.center[0];
                let dy = y - self.center[1];
                let u = c * dx + s * dy;
                let w = -s * dx + c * dy;
                u.abs() <= 0.5 * width && w.abs() <= 0.5 * height
            }
        }
    }

    pub fn transmission(&self) -> Array2<f64> {
        let xs = self.grid.xs();
        let ys = self.grid.ys();
        Array2::from_shape_fn((self.grid.ny(), self.grid.nx()), |(j, i)| {
            if self.contains(xs[i], ys[j]) {
                1.0
            } else {
                0.0
            }
        })
    }

    /// Inclusive (column, row) index ranges covering the aperture, clamped to
    /// the grid.
    pub fn index_bounds(&self) -> ([usize; 2], [usize; 2]) {
        let r = self.bounding_radius();
        let g = &self.grid;
        let (fx0, fy0) = g.fractional_index(self.center[0] - r, self.center[1] - r);
        let (fx1, fy1) = g.fractional_index(self.center[0] + r, self.center[1] + r);
        let clamp = |v: f64, n: usize| v.max(0.0).min((n - 1) as f64);
        (
            [
                clamp(fx0.floor(), g.nx()) as usize,
                clamp(fx1.ceil(), g.nx()) as usize,
            ],
            [
                clamp(fy0.floor(), g.ny()) as usize,
                clamp(fy1.ceil(), g.ny()) as usize,
            ],
        )
    }

    /// Raise a staircase warning when the aperture spans fewer than
    /// [`MIN_APERTURE_SAMPLES`] samples.
    pub fn check_resolution(&self, checks: &mut Checks) -> Result<(), DiffractionError> {
        let pitch = self.grid.pitch()[0].max(self.grid.pitch()[1]);
        let samples = self.feature_size() / pitch;
        if samples < MIN_APERTURE_SAMPLES {
            checks
                .raise(
                    WarningKind::Staircase,
                    format!(
                        "aperture spans {samples:.1} samples (< {MIN_APERTURE_SAMPLES}); edge staircase error is unbounded"
                    ),
                )
                .map_err(DiffractionError::Strict)?;
        }
        Ok(())
    }
}

/// Pointwise product of a position-domain field with the mask transmission.
pub fn apply_aperture(
    f: &ComplexField2D,
    mask: &ApertureMask,
) -> Result<ComplexField2D, DiffractionError> {
    f.expect_domain(Domain::Position)?;
    if *f.grid() != mask.grid {
        return Err(DiffractionError::GridMismatch);
    }
    let t = mask.transmission();
    let mut out = f.clone();
    out.data_mut().zip_mut_with(&t, |v, m| {
        if *m == 0.0 {
            *v = Default::default();
        }
    });
    Ok(out)
}
