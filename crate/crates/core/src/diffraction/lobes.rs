use super::DiffractionError;
use crate::grid::RealField2D;
use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Lobe {
    pub centroid: [f64; 2],
    pub peak: f64,
}

/// Triangular lobe lattice found in a far-field intensity.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LobeReport {
    /// Primary lobes, brightest first.
    pub lobes: Vec<Lobe>,
    pub n_side: usize,
    pub charge_estimate: i64,
    pub secondary_lobes_discarded: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LobeOptions {
    /// Local maxima below this fraction of the global peak are ignored.
    pub threshold_frac: f64,
    /// A maximum must fall by this fraction of its own peak before it joins
    /// a brighter one; shoulders on a ridge are not lobes.
    pub min_prominence: f64,
    /// Lobes with a peak below this fraction of the median are secondary.
    pub secondary_frac: f64,
    /// Maxima closer than this (physical units) are merged; defaults to 2.5
    /// samples.
    pub merge_radius: Option<f64>,
    /// Largest accepted ratio between the longest and shortest corner
    /// separation of the lattice.
    pub max_side_ratio: f64,
    /// Largest accepted distance between a lobe and its lattice site, as a
    /// fraction of the lattice spacing.
    pub site_tolerance: f64,
}

impl Default for LobeOptions {
    fn default() -> Self {
        Self {
            threshold_frac: 0.3,
            min_prominence: 0.1,
            secondary_frac: 0.5,
            merge_radius: None,
            max_side_ratio: 1.35,
            site_tolerance: 0.45,
        }
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Count the lobes of a triangular-aperture diffraction pattern and read the
/// topological charge off the lattice as `n_side − 1`.
pub fn count_lobes(
    intensity: &RealField2D,
    opts: &LobeOptions,
) -> Result<LobeReport, DiffractionError> {
    if !(opts.threshold_frac > 0.0 && opts.threshold_frac < 1.0) {
        return Err(DiffractionError::InvalidLobeOptions(format!(
            "threshold_frac {} must lie in (0, 1)",
            opts.threshold_frac
        )));
    }
    let data = intensity.data();
    if data.iter().any(|v| *v < 0.0) {
        return Err(DiffractionError::InvalidLobeOptions(
            "intensity must be non-negative".into(),
        ));
    }
    let g = intensity.grid();
    let (ny, nx) = data.dim();
    let peak = intensity.max();
    if !(peak > 0.0) {
        return Err(DiffractionError::NoPattern);
    }
    let threshold = opts.threshold_frac * peak;
    let xs = g.xs();
    let ys = g.ys();

    let mut candidates = Vec::new();
    for (k, prom) in prominences(data) {
        let (j, i) = (k / nx, k % nx);
        let v = data[[j, i]];
        if v < threshold || prom < opts.min_prominence * v {
            continue;
        }
        let (mut sx, mut sy, mut s) = (0.0, 0.0, 0.0);
        for jj in j.saturating_sub(1)..=(j + 1).min(ny - 1) {
            for ii in i.saturating_sub(1)..=(i + 1).min(nx - 1) {
                let w = data[[jj, ii]];
                sx += w * xs[ii];
                sy += w * ys[jj];
                s += w;
            }
        }
        candidates.push(Lobe {
            centroid: [sx / s, sy / s],
            peak: v,
        });
    }
    candidates.sort_by(|a, b| b.peak.total_cmp(&a.peak));

    let merge = opts
        .merge_radius
        .unwrap_or(2.5 * g.pitch()[0].max(g.pitch()[1]));
    let mut merged: Vec<Lobe> = Vec::new();
    for c in candidates {
        if merged.iter().all(|m| dist(m.centroid, c.centroid) > merge) {
            merged.push(c);
        }
    }
    if merged.is_empty() {
        return Err(DiffractionError::NoPattern);
    }

    let mut peaks: Vec<f64> = merged.iter().map(|l| l.peak).collect();
    peaks.sort_by(|a, b| a.total_cmp(b));
    let median = if peaks.len() % 2 == 1 {
        peaks[peaks.len() / 2]
    } else {
        0.5 * (peaks[peaks.len() / 2 - 1] + peaks[peaks.len() / 2])
    };
    let before = merged.len();
    merged.retain(|l| l.peak >= opts.secondary_frac * median);
    let discarded = before - merged.len();

    let n_side = fit_triangular_lattice(&merged, opts)?;
    Ok(LobeReport {
        lobes: merged,
        n_side,
        charge_estimate: n_side as i64 - 1,
        secondary_lobes_discarded: discarded,
    })
}

/// Every 8-neighbor local maximum (flat-index, brightest-first order) with its
/// topographic prominence: the drop from the peak to the highest saddle
/// connecting it to a brighter maximum. The global maximum gets its own value.
/// Equal samples rank in raster order, so on a plateau only the first sample
/// is a maximum.
fn prominences(data: &ndarray::Array2<f64>) -> Vec<(usize, f64)> {
    let (ny, nx) = data.dim();
    let flat: Vec<f64> = data.iter().copied().collect();
    let mut order: Vec<usize> = (0..flat.len()).collect();
    order.sort_by(|&a, &b| flat[b].total_cmp(&flat[a]).then(a.cmp(&b)));
    const UNSEEN: usize = usize::MAX;
    let mut parent = vec![UNSEEN; flat.len()];
    // peak sample of each component root
    let mut top = vec![0usize; flat.len()];
    let mut out: Vec<(usize, f64)> = Vec::new();
    let mut slot = vec![usize::MAX; flat.len()];

    fn find(parent: &mut [usize], mut k: usize) -> usize {
        let mut r = k;
        while parent[r] != r {
            r = parent[r];
        }
        while parent[k] != r {
            let next = parent[k];
            parent[k] = r;
            k = next;
        }
        r
    }

    for &k in &order {
        let (j, i) = (k / nx, k % nx);
        let mut roots: Vec<usize> = Vec::with_capacity(8);
        for jj in j.saturating_sub(1)..=(j + 1).min(ny - 1) {
            for ii in i.saturating_sub(1)..=(i + 1).min(nx - 1) {
                let q = jj * nx + ii;
                if q != k && parent[q] != UNSEEN {
                    let r = find(&mut parent, q);
                    if !roots.contains(&r) {
                        roots.push(r);
                    }
                }
            }
        }
        if roots.is_empty() {
            parent[k] = k;
            top[k] = k;
            slot[k] = out.len();
            out.push((k, flat[k]));
            continue;
        }
        // the component whose peak ranks first survives; order[] rank is
        // value-descending then raster, matching the scan above
        let rank = |p: usize| (std::cmp::Reverse(OrdF64(flat[p])), p);
        let survivor = *roots.iter().min_by_key(|&&r| rank(top[r])).expect("non-empty");
        for &r in &roots {
            if r != survivor {
                let p = top[r];
                out[slot[p]].1 = flat[p] - flat[k];
                parent[r] = survivor;
            }
        }
        parent[k] = survivor;
    }
    out
}

#[derive(PartialEq, PartialOrd)]
struct OrdF64(f64);

impl Eq for OrdF64 {}

impl Ord for OrdF64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

fn fit_triangular_lattice(lobes: &[Lobe], opts: &LobeOptions) -> Result<usize, DiffractionError> {
    let ambiguous = |reason: String| DiffractionError::AmbiguousPattern {
        lobes: lobes.to_vec(),
        reason,
    };
    let n = lobes.len();
    // N = n_side (n_side + 1) / 2
    let n_side = ((((8 * n + 1) as f64).sqrt() - 1.0) / 2.0).round() as usize;
    if n_side * (n_side + 1) / 2 != n {
        return Err(ambiguous(format!("{n} lobes is not a triangular number")));
    }
    if n_side == 1 {
        return Ok(1);
    }
    let cx = lobes.iter().map(|l| l.centroid[0]).sum::<f64>() / n as f64;
    let cy = lobes.iter().map(|l| l.centroid[1]).sum::<f64>() / n as f64;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        dist(lobes[b].centroid, [cx, cy]).total_cmp(&dist(lobes[a].centroid, [cx, cy]))
    });
    let corners = [
        lobes[order[0]].centroid,
        lobes[order[1]].centroid,
        lobes[order[2]].centroid,
    ];
    let sides = [
        dist(corners[0], corners[1]),
        dist(corners[1], corners[2]),
        dist(corners[2], corners[0]),
    ];
    let (smin, smax) = sides
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(a, b), &s| (a.min(s), b.max(s)));
    if !(smin > 0.0) || smax / smin > opts.max_side_ratio {
        return Err(ambiguous(format!(
            "corner lobes are not close to equilateral (side ratio {:.2})",
            smax / smin
        )));
    }
    let steps = (n_side - 1) as f64;
    let spacing = sides.iter().sum::<f64>() / 3.0 / steps;
    let e1 = [
        (corners[1][0] - corners[0][0]) / steps,
        (corners[1][1] - corners[0][1]) / steps,
    ];
    let e2 = [
        (corners[2][0] - corners[0][0]) / steps,
        (corners[2][1] - corners[0][1]) / steps,
    ];
    let mut sites = Vec::with_capacity(n);
    for a in 0..n_side {
        for b in 0..(n_side - a) {
            sites.push([
                corners[0][0] + a as f64 * e1[0] + b as f64 * e2[0],
                corners[0][1] + a as f64 * e1[1] + b as f64 * e2[1],
            ]);
        }
    }
    let mut taken = vec![false; sites.len()];
    for l in lobes {
        let (best, d) = sites
            .iter()
            .enumerate()
            .map(|(k, s)| (k, dist(*s, l.centroid)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("sites");
        if d > opts.site_tolerance * spacing {
            return Err(ambiguous(format!(
                "lobe at ({:.1}, {:.1}) is {:.2} spacings from the nearest lattice site",
                l.centroid[0],
                l.centroid[1],
                d / spacing
            )));
        }
        if taken[best] {
            return Err(ambiguous("two lobes share one lattice site".into()));
        }
        taken[best] = true;
    }
    Ok(n_side)
}
