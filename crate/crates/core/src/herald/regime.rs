//! Short-crystal regime boundary: where the displaced pump spectrum and the
//! phase-matching function have equal radial widths.

use super::crystal::{phase_matching, CrystalSpec, PhaseMatchingModel};
use super::HeraldError;
use crate::exec::{self, Execution};
use crate::special::bessel_i_scaled;
use serde::Serialize;

/// 1/e² level of an intensity profile.
const E2: f64 = 0.1353352832366127;

/// Beam and crystal geometry held fixed across a regime sweep.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RegimeSetup {
    pub w0: f64,
    pub l: i32,
    pub crystal: CrystalSpec,
    /// Idler conditioning wavevector.
    pub conditioning: [f64; 2],
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RegimeClass {
    pub inside: bool,
    /// 1/e² full width of `|S(k_s + k_i)|²` along the radial line (µm⁻¹).
    pub width_s: f64,
    /// 1/e² full width of the main lobe of `|G|²` along the same line;
    /// infinite when it never falls to 1/e².
    pub width_g: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryStatus {
    Bracketed,
    /// Short-crystal valid over the whole length range.
    InsideAll,
    /// Short-crystal invalid over the whole length range.
    OutsideAll,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoundaryPoint {
    pub k_t: f64,
    /// Crystal length (µm) at which the widths are equal.
    pub l_star: Option<f64>,
    pub status: BoundaryStatus,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegimeMap {
    pub setup: RegimeSetup,
    pub length_range: [f64; 2],
    pub points: Vec<BoundaryPoint>,
}

impl RegimeMap {
    /// Classify an arbitrary (length, k_t) pair with the same width rule used
    /// to trace the boundary.
    pub fn classify(&self, length: f64, k_t: f64) -> Result<RegimeClass, HeraldError> {
        classify(&self.setup, length, k_t)
    }
}

fn radial_direction(c: [f64; 2]) -> [f64; 2] {
    let r = c[0].hypot(c[1]);
    if r > 0.0 {
        [c[0] / r, c[1] / r]
    } else {
        [1.0, 0.0]
    }
}

/// Full 1/e² width of the pump angular spectrum across its outer edge.
pub fn spectrum_width(w0: f64, l: i32, k_t: f64) -> f64 {
    let q = w0 * w0 / 4.0;
    let b = k_t * w0 * w0 / 2.0;
    let profile = |k: f64| {
        let r = (-q * (k - k_t).powi(2)).exp() * bessel_i_scaled(l, b * k);
        r * r
    };
    let far = k_t + 20.0 / w0;
    let n = 4000;
    let step = far / n as f64;
    let peak = (0..=n).map(|i| profile(i as f64 * step)).fold(0.0, f64::max);
    let level = E2 * peak;
    let mut i = n;
    while i > 0 && profile(i as f64 * step) < level {
        i -= 1;
    }
    let (mut lo, mut hi) = (i as f64 * step, (i + 1) as f64 * step);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if profile(mid) >= level {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    2.0 * 0.5 * (lo + hi)
}

/// Full 1/e² width of the `|G|²` lobe containing the conditioning point.
pub fn phase_matching_width(setup: &RegimeSetup, length: f64) -> Result<f64, HeraldError> {
    let crystal = setup.crystal.with_length(length);
    if crystal.model == PhaseMatchingModel::UnityG {
        return Ok(f64::INFINITY);
    }
    let c = setup.conditioning;
    let e = radial_direction(c);
    let g2 = |u: f64| -> Result<f64, HeraldError> {
        let k_s = [-c[0] + u * e[0], -c[1] + u * e[1]];
        Ok(phase_matching(k_s, c, &crystal)?.norm_sqr())
    };
    let reference = g2(0.0)?;
    if reference == 0.0 {
        return Ok(0.0);
    }
    let level = E2 * reference;
    let c_mag = c[0].hypot(c[1]);
    let span = 0.9 * (crystal.k_s_mag - c_mag);
    let step = (0.2 / length).min(span / 100.0);
    let mut edges = [0.0; 2];
    for (side, sign) in [(0usize, -1.0), (1, 1.0)] {
        let mut inside = 0.0;
        let mut u = step;
        loop {
            if u > span {
                return Ok(f64::INFINITY);
            }
            if g2(sign * u)? < level {
                break;
            }
            inside = u;
            u += step;
        }
        let (mut lo, mut hi) = (inside, u);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if g2(sign * mid)? >= level {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        edges[side] = 0.5 * (lo + hi);
    }
    Ok(edges[0] + edges[1])
}

/// Inside the short-crystal region iff the phase-matching lobe is at least as
/// wide as the displaced pump spectrum.
pub fn classify(setup: &RegimeSetup, length: f64, k_t: f64) -> Result<RegimeClass, HeraldError> {
    if !(length > 0.0 && k_t >= 0.0) {
        return Err(HeraldError::InvalidRange(format!(
            "length {length} and k_t {k_t} must be positive"
        )));
    }
    let width_s = spectrum_width(setup.w0, setup.l, k_t);
    let width_g = phase_matching_width(setup, length)?;
    Ok(RegimeClass {
        inside: width_g >= width_s,
        width_s,
        width_g,
    })
}

/// Trace the boundary `L*(k_t)` by bisection in `log L` for each `k_t`.
pub fn regime_map(
    setup: &RegimeSetup,
    length_range: [f64; 2],
    k_ts: &[f64],
    exec: Execution,
) -> Result<RegimeMap, HeraldError> {
    let [l0, l1] = length_range;
    if !(l0 > 0.0 && l1 > l0 && l1.is_finite()) {
        return Err(HeraldError::InvalidRange(format!(
            "length range [{l0}, {l1}] must be positive and increasing"
        )));
    }
    if k_ts.is_empty() || k_ts.iter().any(|k| !(*k > 0.0)) || k_ts.windows(2).any(|w| w[1] <= w[0]) {
        return Err(HeraldError::InvalidRange(
            "k_t values must be positive and strictly increasing".into(),
        ));
    }
    let results = exec::map(exec, k_ts, |&k_t| -> Result<BoundaryPoint, HeraldError> {
        let ws = spectrum_width(setup.w0, setup.l, k_t);
        let d = |l: f64| phase_matching_width(setup, l).map(|wg| wg - ws);
        let point = |l_star, status| BoundaryPoint { k_t, l_star, status };
        if d(l1)? >= 0.0 {
            return Ok(point(None, BoundaryStatus::InsideAll));
        }
        if d(l0)? < 0.0 {
            return Ok(point(None, BoundaryStatus::OutsideAll));
        }
        let (mut lo, mut hi) = (l0.ln(), l1.ln());
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if d(mid.exp())? >= 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(point(Some((0.5 * (lo + hi)).exp()), BoundaryStatus::Bracketed))
    });
    let points = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    if setup.crystal.model != PhaseMatchingModel::UnityG
        && points.iter().all(|p| p.status != BoundaryStatus::Bracketed)
    {
        return Err(HeraldError::BoundaryNotBracketed {
            length_range,
            k_t_range: [k_ts[0], k_ts[k_ts.len() - 1]],
        });
    }
    Ok(RegimeMap {
        setup: *setup,
        length_range,
        points,
    })
}
