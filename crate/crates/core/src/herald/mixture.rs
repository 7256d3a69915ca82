use super::acceptance::DetectorAcceptance;
use super::crystal::{CrystalSpec, PhaseMatchingModel};
use super::HeraldError;
use crate::checks::{Checks, WarningKind};
use crate::exec::{self, Execution};
use crate::grid::{fft2_with, ifft2_with, ComplexField2D, Domain, GridSpec, RealField2D};
use ndarray::Array2;
use num_complex::Complex64;

/// How the pump spectrum is evaluated at off-lattice wavevectors `k_s + k_i`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Displacement {
    /// Exact band-limited shift: modulate the position-domain pump by
    /// `e^{−iδ·ρ}` and transform back.
    #[default]
    Spectral,
    /// Bilinear interpolation of the sampled spectrum.
    Bilinear,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct HeraldOptions {
    pub displacement: Displacement,
    /// Center of the signal k-grid. Defaults to `−k_i` of the heralding
    /// wavevector (for mixtures: of the acceptance center).
    pub signal_center: Option<[f64; 2]>,
    pub exec: Execution,
}

/// Pump spectrum together with its position-domain transform, reused by
/// every mixture member.
#[derive(Clone, Debug)]
pub struct PreparedPump {
    spectrum: ComplexField2D,
    position: ComplexField2D,
}

impl PreparedPump {
    pub fn new(spectrum: &ComplexField2D, exec: Execution) -> Result<Self, HeraldError> {
        spectrum.expect_domain(Domain::Wavevector)?;
        Ok(Self {
            spectrum: spectrum.clone(),
            position: ifft2_with(spectrum, exec)?,
        })
    }

    pub fn spectrum(&self) -> &ComplexField2D {
        &self.spectrum
    }

    pub fn position(&self) -> &ComplexField2D {
        &self.position
    }
}

/// Heralded signal amplitude for one idler wavevector.
#[derive(Clone, Debug, PartialEq)]
pub struct HeraldedPure {
    pub conditioning_k: [f64; 2],
    /// Wavevector-domain amplitude with `Σ|a|²·dk² = 1` (when nonzero).
    pub amplitude: ComplexField2D,
}

/// Incoherent mixture of heralded pure states over the detector acceptance.
#[derive(Clone, Debug, PartialEq)]
pub struct MixtureEnsemble {
    pub members: Vec<(f64, HeraldedPure)>,
}

impl MixtureEnsemble {
    pub fn new(members: Vec<(f64, HeraldedPure)>) -> Result<Self, HeraldError> {
        let m = Self { members };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), HeraldError> {
        let Some((_, first)) = self.members.first() else {
            return Err(HeraldError::EmptyMixture);
        };
        let grid = first.amplitude.grid();
        let mut total = 0.0;
        for (w, m) in &self.members {
            if !(*w >= 0.0 && w.is_finite()) {
                return Err(HeraldError::InvalidMixture(format!("negative weight {w}")));
            }
            if m.amplitude.grid() != grid {
                return Err(HeraldError::InvalidMixture("member grids differ".into()));
            }
            total += w;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(HeraldError::InvalidMixture(format!("weights sum to {total}")));
        }
        Ok(())
    }

    pub fn grid(&self) -> &GridSpec {
        self.members[0].1.amplitude.grid()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Round a wavevector to the nearest sample of a zero-centered lattice with
/// the grid's pitch.
pub fn snap_to_lattice(k: [f64; 2], grid: &GridSpec) -> [f64; 2] {
    let p = grid.pitch();
    [(k[0] / p[0]).round() * p[0], (k[1] / p[1]).round() * p[1]]
}

fn check_paraxial(grid: &GridSpec, k_i: [f64; 2], crystal: &CrystalSpec) -> Result<(), HeraldError> {
    let ([x0, x1], [y0, y1]) = grid.extent();
    for k_s in [[x0, y0], [x0, y1], [x1, y0], [x1, y1]] {
        crystal.delta_kz(k_s, k_i)?;
    }
    Ok(())
}

/// Heralded signal amplitude `a(k_s) ∝ S(k_s + k_i)·G(k_s, k_i)` on a signal
/// grid with the pump's pitch.
pub fn heralded_amplitude(
    pump: &ComplexField2D,
    k_i: [f64; 2],
    crystal: &CrystalSpec,
    checks: &mut Checks,
) -> Result<HeraldedPure, HeraldError> {
    let opts = HeraldOptions::default();
    heralded_amplitude_with(&PreparedPump::new(pump, opts.exec)?, k_i, crystal, &opts, checks)
}

pub fn heralded_amplitude_with(
    pump: &PreparedPump,
    k_i: [f64; 2],
    crystal: &CrystalSpec,
    opts: &HeraldOptions,
    checks: &mut Checks,
) -> Result<HeraldedPure, HeraldError> {
    crystal.validate()?;
    let pg = *pump.spectrum.grid();
    let sc = opts.signal_center.unwrap_or([-k_i[0], -k_i[1]]);
    let signal_grid = pg.centered_at(sc);
    check_paraxial(&signal_grid, k_i, crystal)?;
    let pc = pg.center();
    let delta = [sc[0] + k_i[0] - pc[0], sc[1] + k_i[1] - pc[1]];
    let dk = pg.pitch();

    // pump energy that lands outside the signal window
    let shift = [delta[0] / dk[0], delta[1] / dk[1]];
    let (nx, ny) = (pg.nx() as f64, pg.ny() as f64);
    let mut clipped = 0.0;
    let mut total = 0.0;
    for ((j, i), v) in pump.spectrum.data().indexed_iter() {
        let e = v.norm_sqr();
        total += e;
        let fi = i as f64 - shift[0];
        let fj = j as f64 - shift[1];
        if fi < 0.0 || fj < 0.0 || fi > nx - 1.0 || fj > ny - 1.0 {
            clipped += e;
        }
    }
    if total > 0.0 && clipped / total > 0.01 {
        checks
            .raise(
                WarningKind::Clipping,
                format!(
                    "displaced pump support loses {:.2}% of its energy at the signal grid edge",
                    100.0 * clipped / total
                ),
            )
            .map_err(HeraldError::Strict)?;
    }

    let mut data = if delta == [0.0, 0.0] {
        pump.spectrum.data().clone()
    } else {
        match opts.displacement {
            Displacement::Spectral => {
                let pos = &pump.position;
                let ex: Vec<Complex64> = pos
                    .grid()
                    .xs()
                    .iter()
                    .map(|x| Complex64::from_polar(1.0, -delta[0] * x))
                    .collect();
                let ey: Vec<Complex64> = pos
                    .grid()
                    .ys()
                    .iter()
                    .map(|y| Complex64::from_polar(1.0, -delta[1] * y))
                    .collect();
                let mut modulated = pos.clone();
                for ((j, i), v) in modulated.data_mut().indexed_iter_mut() {
                    *v *= ex[i] * ey[j];
                }
                fft2_with(&modulated, opts.exec)?.into_data()
            }
            Displacement::Bilinear => {
                let xs = signal_grid.xs();
                let ys = signal_grid.ys();
                Array2::from_shape_fn((signal_grid.ny(), signal_grid.nx()), |(j, i)| {
                    pump.spectrum.sample_bilinear(xs[i] + k_i[0], ys[j] + k_i[1])
                })
            }
        }
    };

    if crystal.model == PhaseMatchingModel::SincLongitudinal {
        let xs = signal_grid.xs();
        let ys = signal_grid.ys();
        let half_l = crystal.length / 2.0;
        let k_iz = (crystal.k_i_mag.powi(2) - k_i[0] * k_i[0] - k_i[1] * k_i[1]).sqrt();
        let ks2 = crystal.k_s_mag.powi(2);
        let slice = data.as_slice_mut().expect("standard layout");
        exec::for_each_row(opts.exec, slice, signal_grid.nx(), |j, row| {
            let y2 = ys[j] * ys[j];
            for (i, v) in row.iter_mut().enumerate() {
                let k_sz = (ks2 - xs[i] * xs[i] - y2).sqrt();
                let x = (crystal.k_p_long - k_sz - k_iz) * half_l;
                let s = if x.abs() < 1e-8 { 1.0 - x * x / 6.0 } else { x.sin() / x };
                *v *= Complex64::from_polar(s, x);
            }
        });
    }

    let norm = data.iter().map(|v| v.norm_sqr()).sum::<f64>() * signal_grid.cell_area();
    if norm > 0.0 {
        let s = 1.0 / norm.sqrt();
        data.mapv_inplace(|v| v * s);
    }
    Ok(HeraldedPure {
        conditioning_k: k_i,
        amplitude: ComplexField2D::new(
            signal_grid,
            Domain::Wavevector,
            pump.spectrum.wavelength(),
            data,
        )?,
    })
}

/// Build the incoherent mixture over the acceptance quadrature. Members are
/// evaluated independently; their order follows the quadrature nodes.
pub fn build_mixture(
    pump: &PreparedPump,
    acceptance: &DetectorAcceptance,
    crystal: &CrystalSpec,
    opts: &HeraldOptions,
    checks: &mut Checks,
) -> Result<MixtureEnsemble, HeraldError> {
    let nodes = acceptance.quadrature()?;
    let member_opts = HeraldOptions {
        signal_center: Some(
            opts.signal_center
                .unwrap_or([-acceptance.center[0], -acceptance.center[1]]),
        ),
        ..*opts
    };
    let strict = checks.is_strict();
    let results = exec::map(opts.exec, &nodes, |node| {
        let mut local = Checks::new(strict);
        heralded_amplitude_with(pump, node.k_i, crystal, &member_opts, &mut local)
            .map(|m| (node.weight, m, local.into_warnings()))
    });
    let mut members = Vec::with_capacity(results.len());
    for r in results {
        let (w, m, warnings) = r?;
        for warning in warnings {
            checks
                .raise(warning.kind, warning.message)
                .map_err(HeraldError::Strict)?;
        }
        members.push((w, m));
    }
    MixtureEnsemble::new(members)
}

/// `Σ w·|a|²`, normalized to unit maximum.
pub fn conditional_angular_spectrum(mixture: &MixtureEnsemble) -> Result<RealField2D, HeraldError> {
    mixture.validate()?;
    let grid = *mixture.grid();
    let mut acc = Array2::<f64>::zeros((grid.ny(), grid.nx()));
    for (w, m) in &mixture.members {
        acc.zip_mut_with(m.amplitude.data(), |a, v| *a += w * v.norm_sqr());
    }
    Ok(RealField2D::new(grid, Domain::Wavevector, acc)?.normalized_to_peak())
}

/// `Σ w·|ifft2(a)|²`, normalized to unit maximum.
pub fn heralded_transverse_intensity(
    mixture: &MixtureEnsemble,
    exec: Execution,
) -> Result<RealField2D, HeraldError> {
    mixture.validate()?;
    let per_member = exec::map(exec, &mixture.members, |(w, m)| {
        ifft2_with(&m.amplitude, Execution::Sequential).map(|f| f.intensity().scaled(*w))
    });
    let mut acc: Option<RealField2D> = None;
    for r in per_member {
        let f = r?;
        acc = Some(match acc {
            None => f,
            Some(a) => {
                let mut d = a.data().clone();
                d += f.data();
                RealField2D::new(*a.grid(), Domain::Position, d)?
            }
        });
    }
    Ok(acc.expect("validated non-empty").normalized_to_peak())
}

/// Uncentered normalized cross-correlation `Σab / √(Σa²·Σb²)`.
pub fn normalized_cross_correlation(a: &RealField2D, b: &RealField2D) -> Result<f64, HeraldError> {
    if a.grid() != b.grid() {
        return Err(HeraldError::InvalidMixture(
            "cross-correlation needs identical grids".into(),
        ));
    }
    let (mut ab, mut aa, mut bb) = (0.0, 0.0, 0.0);
    for (x, y) in a.data().iter().zip(b.data().iter()) {
        ab += x * y;
        aa += x * x;
        bb += y * y;
    }
    if aa == 0.0 || bb == 0.0 {
        return Ok(0.0);
    }
    Ok(ab / (aa * bb).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beams::{phase_winding_about, synthesize_bg_k, BGBeamSpec};
    use crate::herald::crystal::{conditioning_point, DEFAULT_N_PUMP, DEFAULT_N_SIGNAL};

    fn pump(l: i32) -> ComplexField2D {
        let g = GridSpec::square(256, 50.0).unwrap().conjugate();
        let spec = BGBeamSpec::new(l, 2.2e-2, 1300.0, 0.406).unwrap();
        synthesize_bg_k(&spec, &g, &mut Checks::strict()).unwrap()
    }

    fn crystal(model: PhaseMatchingModel, l: f64) -> CrystalSpec {
        CrystalSpec::from_indices(l, model, DEFAULT_N_PUMP, DEFAULT_N_SIGNAL, 0.406, 0.812).unwrap()
    }

    #[test]
    fn unity_amplitude_is_displaced_pump() {
        let p = pump(1);
        let dk = p.grid().pitch()[0];
        let k_i = [1.3, 0.0];
        let c = crystal(PhaseMatchingModel::UnityG, 1000.0);
        let h = heralded_amplitude(&p, k_i, &c, &mut Checks::strict()).unwrap();
        assert_eq!(h.amplitude.grid().center(), [-1.3, 0.0]);
        let scale = h.amplitude.peak_abs() / p.peak_abs();
        let g = *h.amplitude.grid();
        for (j, i) in [(128, 128), (128, 173), (134, 154), (84, 104)] {
            let expected = p.sample_bilinear(g.x(i) + k_i[0], g.y(j) + k_i[1]) * scale;
            // off-lattice shift of 1.3/dk samples: bilinear is only a reference
            assert!((h.amplitude.data()[[j, i]] - expected).norm() < 0.05 * h.amplitude.peak_abs());
        }
        let w = phase_winding_about(&h.amplitude, [-k_i[0], -k_i[1]], 0.022).unwrap();
        assert_eq!(w.winding, 1);
        let _ = dk;
    }

    #[test]
    fn spectral_and_bilinear_agree_on_lattice_shift() {
        let p = pump(2);
        let prepared = PreparedPump::new(&p, Execution::Sequential).unwrap();
        let dk = p.grid().pitch()[0];
        let k_i = [7.0 * dk, -3.0 * dk];
        let c = crystal(PhaseMatchingModel::UnityG, 1000.0);
        let center = Some([0.0, 0.0]);
        let spectral = heralded_amplitude_with(
            &prepared,
            k_i,
            &c,
            &HeraldOptions { signal_center: center, ..Default::default() },
            &mut Checks::strict(),
        )
        .unwrap();
        let bilinear = heralded_amplitude_with(
            &prepared,
            k_i,
            &c,
            &HeraldOptions {
                signal_center: center,
                displacement: Displacement::Bilinear,
                ..Default::default()
            },
            &mut Checks::lenient(),
        )
        .unwrap();
        let peak = spectral.amplitude.peak_abs();
        for (a, b) in spectral.amplitude.data().iter().zip(bilinear.amplitude.data().iter()) {
            assert!((a - b).norm() < 1e-10 * peak);
        }
    }

    #[test]
    fn amplitude_normalized() {
        let c = crystal(PhaseMatchingModel::SincLongitudinal, 3000.0);
        let k = conditioning_point(&c);
        let h = heralded_amplitude(&pump(1), k, &c, &mut Checks::strict()).unwrap();
        let e = h.amplitude.energy();
        assert!((e - 1.0).abs() < 1e-12);
    }

    #[test]
    fn big_displacement_clips() {
        let p = pump(1);
        let prepared = PreparedPump::new(&p, Execution::Sequential).unwrap();
        let c = crystal(PhaseMatchingModel::UnityG, 1000.0);
        let opts = HeraldOptions {
            signal_center: Some([0.0, 0.0]),
            ..Default::default()
        };
        let r = heralded_amplitude_with(&prepared, [0.06, 0.0], &c, &opts, &mut Checks::strict());
        assert!(matches!(r, Err(HeraldError::Strict(_))));
    }

    #[test]
    fn mixture_weights_and_empty_errors() {
        let p = PreparedPump::new(&pump(1), Execution::Sequential).unwrap();
        let c = crystal(PhaseMatchingModel::UnityG, 1000.0);
        let acc = DetectorAcceptance::disk([1.3, 0.0], 7.7e-3, 61).unwrap();
        let m = build_mixture(&p, &acc, &c, &HeraldOptions::default(), &mut Checks::strict()).unwrap();
        assert_eq!(m.len(), 61);
        let s: f64 = m.members.iter().map(|(w, _)| w).sum();
        assert!((s - 1.0).abs() < 1e-12);
        let cas = conditional_angular_spectrum(&m).unwrap();
        assert!(cas.data().iter().all(|v| *v >= 0.0));
        assert_eq!(
            MixtureEnsemble::new(vec![]).unwrap_err(),
            HeraldError::EmptyMixture
        );
    }

    #[test]
    fn vortex_null_survives_heralding() {
        let p = PreparedPump::new(&pump(1), Execution::Sequential).unwrap();
        let c = crystal(PhaseMatchingModel::UnityG, 1000.0);
        let acc = DetectorAcceptance::disk([1.3, 0.0], 7.7e-3, 21).unwrap();
        let m = build_mixture(&p, &acc, &c, &HeraldOptions::default(), &mut Checks::strict()).unwrap();
        let i = heralded_transverse_intensity(&m, Execution::Sequential).unwrap();
        assert!(i.data()[[128, 128]] < 1e-4);
    }

    #[test]
    fn ncc_bounds() {
        let p = pump(1).intensity();
        assert!((normalized_cross_correlation(&p, &p).unwrap() - 1.0).abs() < 1e-15);
    }
}
