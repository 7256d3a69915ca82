use super::HeraldError;
use serde::Serialize;
use std::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AcceptanceShape {
    Delta,
    Disk,
    Gaussian,
}

/// Idler detector acceptance `g(k)` in transverse-wavevector space.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DetectorAcceptance {
    pub center: [f64; 2],
    pub shape: AcceptanceShape,
    /// Disk radius, or the 1/e² radius of the Gaussian (µm⁻¹).
    pub radius: f64,
    pub quadrature_n: usize,
}

/// One quadrature node: absolute idler wavevector and weight.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct QuadraturePoint {
    pub k_i: [f64; 2],
    pub weight: f64,
}

impl DetectorAcceptance {
    pub fn delta(center: [f64; 2]) -> Self {
        Self {
            center,
            shape: AcceptanceShape::Delta,
            radius: 0.0,
            quadrature_n: 1,
        }
    }

    pub fn disk(center: [f64; 2], radius: f64, quadrature_n: usize) -> Result<Self, HeraldError> {
        let a = Self {
            center,
            shape: AcceptanceShape::Disk,
            radius,
            quadrature_n,
        };
        a.validate()?;
        Ok(a)
    }

    pub fn gaussian(center: [f64; 2], radius: f64, quadrature_n: usize) -> Result<Self, HeraldError> {
        let a = Self {
            center,
            shape: AcceptanceShape::Gaussian,
            radius,
            quadrature_n,
        };
        a.validate()?;
        Ok(a)
    }

    /// k-space radius of a fiber tip of `diameter` in the focal plane of a
    /// lens of focal length `focal`: `(2π/λ)·(d/2)/f`.
    pub fn fiber_radius(diameter: f64, focal: f64, wavelength: f64) -> f64 {
        2.0 * PI / wavelength * (0.5 * diameter) / focal
    }

    pub fn validate(&self) -> Result<(), HeraldError> {
        let bad = |m: &str| Err(HeraldError::InvalidAcceptance(m.to_string()));
        if !(self.center[0].is_finite() && self.center[1].is_finite()) {
            return bad("center must be finite");
        }
        match self.shape {
            AcceptanceShape::Delta => {
                if self.radius != 0.0 || self.quadrature_n != 1 {
                    return bad("delta acceptance requires radius 0 and a single quadrature point");
                }
            }
            _ => {
                if !(self.radius > 0.0 && self.radius.is_finite()) {
                    return bad("radius must be > 0");
                }
                if self.quadrature_n == 0 {
                    return bad("quadrature_n must be >= 1");
                }
            }
        }
        Ok(())
    }

    /// Deterministic quadrature nodes over the acceptance. Weights sum to one.
    ///
    /// Disk and Gaussian shapes use a Fibonacci (golden-angle) spiral; the
    /// Gaussian spiral covers twice the 1/e² radius and is weighted by `g`.
    pub fn quadrature(&self) -> Result<Vec<QuadraturePoint>, HeraldError> {
        self.validate()?;
        if self.shape == AcceptanceShape::Delta {
            return Ok(vec![QuadraturePoint {
                k_i: self.center,
                weight: 1.0,
            }]);
        }
        let n = self.quadrature_n;
        let extent = match self.shape {
            AcceptanceShape::Gaussian => 2.0 * self.radius,
            _ => self.radius,
        };
        let golden = PI * (3.0 - 5f64.sqrt());
        let mut pts: Vec<QuadraturePoint> = (0..n)
            .map(|i| {
                let r = extent * ((i as f64 + 0.5) / n as f64).sqrt();
                let t = i as f64 * golden;
                let d = [r * t.cos(), r * t.sin()];
                let w = match self.shape {
                    AcceptanceShape::Gaussian => {
                        (-2.0 * (d[0] * d[0] + d[1] * d[1]) / (self.radius * self.radius)).exp()
                    }
                    _ => 1.0,
                };
                QuadraturePoint {
                    k_i: [self.center[0] + d[0], self.center[1] + d[1]],
                    weight: w,
                }
            })
            .collect();
        let total: f64 = pts.iter().map(|p| p.weight).sum();
        for p in &mut pts {
            p.weight /= total;
        }
        Ok(pts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delta_is_single_point() {
        let q = DetectorAcceptance::delta([1.2, 0.0]).quadrature().unwrap();
        assert_eq!(q, vec![QuadraturePoint { k_i: [1.2, 0.0], weight: 1.0 }]);
    }

    #[test]
    fn disk_weights_uniform() {
        let q = DetectorAcceptance::disk([0.0, 0.0], 7.7e-3, 61).unwrap().quadrature().unwrap();
        assert_eq!(q.len(), 61);
        for p in &q {
            assert!((p.weight - 1.0 / 61.0).abs() < 1e-15);
            assert!(p.k_i[0].hypot(p.k_i[1]) <= 7.7e-3);
        }
        assert!((q.iter().map(|p| p.weight).sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gaussian_weights_decrease_outward() {
        let q = DetectorAcceptance::gaussian([0.5, 0.0], 1e-2, 40).unwrap().quadrature().unwrap();
        assert!((q.iter().map(|p| p.weight).sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(q[0].weight > q[39].weight);
    }

    #[test]
    fn fiber_geometry() {
        let r = DetectorAcceptance::fiber_radius(200.0, 1e5, 0.812);
        assert!((r - 7.738e-3).abs() < 1e-6, "{r}");
    }

    #[test]
    fn invalid_acceptances() {
        let mut d = DetectorAcceptance::delta([0.0, 0.0]);
        d.radius = 1e-3;
        assert!(d.validate().is_err());
        assert!(DetectorAcceptance::disk([0.0, 0.0], 0.0, 61).is_err());
        assert!(DetectorAcceptance::disk([0.0, 0.0], 1e-3, 0).is_err());
    }
}
