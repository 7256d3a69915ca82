//! End-to-end scenario execution.
//!
//! Optical train: the crystal plane C is Fourier transformed onto FP1 by a
//! lens of focal length f1 (the idler fiber tip sits there), imaged onto FP2
//! with magnification f2/f1 (inverted) where the aperture sits, and Fourier
//! transformed onto FP3 by a lens of focal length f3.

use crate::beams::{fit_annulus, synthesize_bg_k_with, AnnulusFit};
use crate::checks::{Checks, Warning, WarningKind};
use crate::diffraction::{
    apply_aperture, count_lobes, far_field_with, relay_spectrum, ApertureMask, LobeReport,
};
use crate::error::Error;
use crate::exec::{self, Execution};
use crate::export::{
    complex_csv, intensity_png, phase_png, real_csv, regime_csv, vhf1_bytes, write_atomic,
};
use crate::grid::{ifft2_with, ComplexField2D, Domain, GridSpec, RealField2D};
use crate::herald::{
    build_mixture, conditional_angular_spectrum, conditioning_point, heralded_amplitude_with,
    heralded_transverse_intensity, normalized_cross_correlation, regime_map, snap_to_lattice,
    AcceptanceShape, BoundaryPoint, CrystalSpec, DetectorAcceptance, HeraldOptions,
    MixtureEnsemble, PhaseMatchingModel, PreparedPump, RegimeClass, RegimeSetup,
};
use crate::scenario::{Format, Pipeline, ScenarioConfig, ScenarioError};
use ndarray::Array2;
use serde::Serialize;
use std::path::Path;
use std::time::Instant;

const MEMBER_CHUNK: usize = 4;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RunOptions {
    pub exec: Execution,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

/// Sample pitch of every plane in the optical train (µm or µm⁻¹).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PlaneGrids {
    pub n_crystal: usize,
    pub crystal_pitch: f64,
    pub crystal_k_pitch: f64,
    /// FP1 pitch, `λ_s f1 · dk / 2π`.
    pub fp1_pitch: f64,
    pub n_fp2: usize,
    pub fp2_pitch: f64,
    /// FP3 pitch, `λ f3 / (n·pitch_FP2)`, for the signal wavelength.
    pub fp3_pitch: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegimeSummary {
    pub points: Vec<BoundaryPoint>,
    /// Classification of the scenario's own crystal length and `k_t`.
    pub scenario_point: RegimeClass,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunSummary {
    pub scenario: String,
    pub pipeline: Pipeline,
    pub stages: Vec<StageTiming>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub annulus_fit: Option<AnnulusFit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cas_fit: Option<AnnulusFit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cas_ncc: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lobe_report: Option<LobeReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub conditioning_k: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub aperture_center: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub regime: Option<RegimeSummary>,
    pub grids: PlaneGrids,
    pub warnings: Vec<Warning>,
    pub outputs: Vec<String>,
    pub resolved_config: ScenarioConfig,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ProductData {
    Real(RealField2D),
    Complex(ComplexField2D),
    Regime(Vec<BoundaryPoint>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Product {
    pub tag: &'static str,
    pub data: ProductData,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub summary: RunSummary,
    pub products: Vec<Product>,
}

impl RunOutput {
    pub fn product(&self, tag: &str) -> Option<&ProductData> {
        self.products.iter().find(|p| p.tag == tag).map(|p| &p.data)
    }
}

struct Timer {
    stages: Vec<StageTiming>,
    last: Instant,
}

impl Timer {
    fn new() -> Self {
        Self {
            stages: Vec::new(),
            last: Instant::now(),
        }
    }

    fn lap(&mut self, stage: &str) {
        let now = Instant::now();
        self.stages.push(StageTiming {
            stage: stage.to_string(),
            seconds: (now - self.last).as_secs_f64(),
        });
        self.last = now;
    }
}

/// Pump spectrum on the wavevector grid conjugate to the crystal plane.
pub fn pump_spectrum(
    cfg: &ScenarioConfig,
    exec: Execution,
    checks: &mut Checks,
) -> Result<ComplexField2D, Error> {
    let grid = cfg.crystal_grid()?.conjugate();
    Ok(synthesize_bg_k_with(&cfg.beam_spec()?, &grid, exec, checks)?)
}

/// Phase-matched conditioning wavevector snapped onto the pump k-lattice so
/// that the central member's displacement is grid-aligned.
pub fn resolve_conditioning(crystal: &CrystalSpec, k_grid: &GridSpec) -> [f64; 2] {
    snap_to_lattice(conditioning_point(crystal), k_grid)
}

/// Warn when the acceptance quadrature nodes are spaced more coarsely than
/// the half-width `2/w0` of the spectral ring they sample.
pub fn check_quadrature(
    acceptance: &DetectorAcceptance,
    w0: f64,
    checks: &mut Checks,
) -> Result<(), Error> {
    let extent = match acceptance.shape {
        AcceptanceShape::Delta => return Ok(()),
        AcceptanceShape::Disk => acceptance.radius,
        AcceptanceShape::Gaussian => 2.0 * acceptance.radius,
    };
    let spacing = extent * (std::f64::consts::PI / acceptance.quadrature_n as f64).sqrt();
    let ring = 2.0 / w0;
    if spacing > ring {
        checks
            .raise(
                WarningKind::Convergence,
                format!(
                    "{} quadrature nodes are {:.3e} um^-1 apart, wider than the ring half-width {:.3e} um^-1; \
                     acceptance averages carry O(spacing/half-width) quadrature error",
                    acceptance.quadrature_n, spacing, ring
                ),
            )
            .map_err(|w| Error::Herald(crate::herald::HeraldError::Strict(w)))?;
    }
    Ok(())
}

/// Far-field intensity at FP3 of the pump imaged 1:1 onto the aperture plane.
pub fn pump_triangle_far_field(
    pump: &ComplexField2D,
    mask: &ApertureMask,
    f3: f64,
    exec: Execution,
) -> Result<RealField2D, Error> {
    let at_fp2 = relay_spectrum(pump, &mask.grid, 1.0, Some(mask), exec)?;
    let ff = far_field_with(&apply_aperture(&at_fp2, mask)?, f3, exec)?;
    Ok(ff.intensity().normalized_to_peak())
}

/// Far-field intensity at FP3 of the heralded mixture imaged onto the
/// aperture with signed magnification `m`; members add incoherently.
pub fn mixture_triangle_far_field(
    mixture: &MixtureEnsemble,
    magnification: f64,
    mask: &ApertureMask,
    f3: f64,
    exec: Execution,
) -> Result<RealField2D, Error> {
    let chunks: Vec<&[(f64, crate::herald::HeraldedPure)]> =
        mixture.members.chunks(MEMBER_CHUNK).collect();
    let partials = exec::map(exec, &chunks, |chunk| -> Result<RealField2D, Error> {
        let mut acc: Option<Array2<f64>> = None;
        let mut grid = None;
        for (w, m) in chunk.iter() {
            let at_fp2 =
                relay_spectrum(&m.amplitude, &mask.grid, magnification, Some(mask), Execution::Sequential)?;
            let ff = far_field_with(&apply_aperture(&at_fp2, mask)?, f3, Execution::Sequential)?;
            grid = Some(*ff.grid());
            let i = ff.intensity().into_data();
            match acc.as_mut() {
                None => acc = Some(i.mapv(|v| v * w)),
                Some(a) => a.zip_mut_with(&i, |a, v| *a += w * v),
            }
        }
        Ok(RealField2D::new(grid.expect("non-empty chunk"), Domain::Position, acc.expect("chunk"))?)
    });
    let mut total: Option<RealField2D> = None;
    for p in partials {
        let p = p?;
        total = Some(match total {
            None => p,
            Some(t) => {
                let mut d = t.data().clone();
                d += p.data();
                RealField2D::new(*t.grid(), Domain::Position, d)?
            }
        });
    }
    Ok(total.expect("validated mixture").normalized_to_peak())
}

fn plane_grids(cfg: &ScenarioConfig) -> Result<PlaneGrids, Error> {
    let c = cfg.crystal_grid()?;
    let fp2 = cfg.fp2_grid()?;
    let dk = c.conjugate_pitch()[0];
    let lambda_s = cfg.signal_wavelength();
    Ok(PlaneGrids {
        n_crystal: c.nx(),
        crystal_pitch: c.pitch()[0],
        crystal_k_pitch: dk,
        fp1_pitch: lambda_s * cfg.optics.f1.0 * dk / (2.0 * std::f64::consts::PI),
        n_fp2: fp2.nx(),
        fp2_pitch: fp2.pitch()[0],
        fp3_pitch: lambda_s * cfg.optics.f3.0 / (fp2.nx() as f64 * fp2.pitch()[0]),
    })
}

fn single_aperture(cfg: &ScenarioConfig) -> Result<&crate::scenario::ApertureConfig, Error> {
    match cfg.apertures.as_slice() {
        [a] => Ok(a),
        [] => Err(ScenarioError::MissingSection {
            pipeline: cfg.pipeline.name(),
            section: "apertures",
        }
        .into()),
        _ => Err(ScenarioError::Constraint(
            "the aperture plane holds a single aperture; list exactly one".into(),
        )
        .into()),
    }
}

struct Heralding {
    conditioning: [f64; 2],
    mixture: MixtureEnsemble,
    prepared: PreparedPump,
    crystal: CrystalSpec,
}

fn herald_stage(
    cfg: &ScenarioConfig,
    pump: &ComplexField2D,
    exec: Execution,
    checks: &mut Checks,
    timer: &mut Timer,
) -> Result<Heralding, Error> {
    let crystal = cfg.crystal_spec()?;
    let conditioning = resolve_conditioning(&crystal, pump.grid());
    let acceptance = cfg.detector_acceptance(conditioning)?;
    let center = snap_to_lattice(acceptance.center, pump.grid());
    check_quadrature(&acceptance, cfg.beam.w0.0, checks)?;
    let prepared = PreparedPump::new(pump, exec)?;
    let opts = HeraldOptions {
        signal_center: Some([-center[0], -center[1]]),
        exec,
        ..Default::default()
    };
    let mixture = build_mixture(&prepared, &acceptance, &crystal, &opts, checks)?;
    timer.lap("mixture");
    Ok(Heralding {
        conditioning: center,
        mixture,
        prepared,
        crystal,
    })
}

/// Run a validated scenario without writing any files.
pub fn execute(cfg: &ScenarioConfig, opts: &RunOptions) -> Result<RunOutput, Error> {
    cfg.validate()?;
    let exec = opts.exec;
    let mut checks = Checks::new(cfg.strict);
    let mut timer = Timer::new();
    let mut products = Vec::new();
    let mut summary = RunSummary {
        scenario: cfg.name.clone(),
        pipeline: cfg.pipeline,
        stages: Vec::new(),
        annulus_fit: None,
        cas_fit: None,
        cas_ncc: None,
        lobe_report: None,
        conditioning_k: None,
        aperture_center: None,
        regime: None,
        grids: plane_grids(cfg)?,
        warnings: Vec::new(),
        outputs: Vec::new(),
        resolved_config: cfg.clone(),
    };

    match cfg.pipeline {
        Pipeline::RegimeMap => {
            let crystal = cfg.crystal_spec()?;
            let rc = cfg.regime.as_ref().expect("validated");
            let setup = RegimeSetup {
                w0: cfg.beam.w0.0,
                l: cfg.beam.l,
                crystal,
                conditioning: conditioning_point(&crystal),
            };
            let n = rc.k_t_steps;
            let (k0, k1) = (rc.k_t[0].0, rc.k_t[1].0);
            let k_ts: Vec<f64> = (0..n)
                .map(|i| k0 + (k1 - k0) * i as f64 / (n - 1) as f64)
                .collect();
            let map = regime_map(&setup, [rc.length[0].0, rc.length[1].0], &k_ts, exec)?;
            let own = map.classify(crystal.length, cfg.beam.k_t.0)?;
            timer.lap("regime_map");
            summary.conditioning_k = Some(setup.conditioning);
            summary.regime = Some(RegimeSummary {
                points: map.points.clone(),
                scenario_point: own,
            });
            products.push(Product {
                tag: "regime",
                data: ProductData::Regime(map.points),
            });
        }
        Pipeline::PumpCharacterize | Pipeline::AngularSpectrum => {
            let pump = pump_spectrum(cfg, exec, &mut checks)?;
            timer.lap("pump");
            let spectrum = pump.intensity().normalized_to_peak();
            summary.annulus_fit = Some(fit_annulus(&spectrum)?);
            timer.lap("annulus_fit");
            if cfg.pipeline == Pipeline::PumpCharacterize {
                let field = ifft2_with(&pump, exec)?;
                let intensity = field.intensity().normalized_to_peak();
                let ap = single_aperture(cfg)?;
                let mask = cfg.aperture_mask(ap, intensity.centroid())?;
                mask.check_resolution(&mut checks)?;
                let ff = pump_triangle_far_field(&pump, &mask, cfg.optics.f3.0, exec)?;
                timer.lap("pump_triangle");
                let lobes = count_lobes(&ff, &cfg.lobe_options(pump.wavelength(), mask.feature_size()))?;
                timer.lap("lobes");
                summary.aperture_center = Some(mask.center);
                summary.lobe_report = Some(lobes);
                products.push(Product {
                    tag: "pump_field",
                    data: ProductData::Complex(field),
                });
                products.push(Product {
                    tag: "pump_intensity",
                    data: ProductData::Real(intensity),
                });
                products.push(Product {
                    tag: "pump_triangle",
                    data: ProductData::Real(ff),
                });
            }
            products.push(Product {
                tag: "pump_spectrum",
                data: ProductData::Real(spectrum),
            });
        }
        Pipeline::Cas | Pipeline::TransverseIntensity | Pipeline::TriangleDiffraction => {
            let pump = pump_spectrum(cfg, exec, &mut checks)?;
            timer.lap("pump");
            let h = herald_stage(cfg, &pump, exec, &mut checks, &mut timer)?;
            summary.conditioning_k = Some(h.conditioning);
            match cfg.pipeline {
                Pipeline::Cas => {
                    let cas = conditional_angular_spectrum(&h.mixture)?;
                    let reference = heralded_amplitude_with(
                        &h.prepared,
                        h.conditioning,
                        &h.crystal.with_model(PhaseMatchingModel::UnityG),
                        &HeraldOptions {
                            signal_center: Some([-h.conditioning[0], -h.conditioning[1]]),
                            exec,
                            ..Default::default()
                        },
                        &mut Checks::lenient(),
                    )?;
                    summary.cas_ncc = Some(normalized_cross_correlation(
                        &cas,
                        &reference.amplitude.intensity(),
                    )?);
                    summary.cas_fit = fit_annulus(&cas).ok();
                    timer.lap("cas");
                    products.push(Product {
                        tag: "cas",
                        data: ProductData::Real(cas),
                    });
                }
                Pipeline::TransverseIntensity => {
                    let i = heralded_transverse_intensity(&h.mixture, exec)?;
                    timer.lap("intensity");
                    products.push(Product {
                        tag: "intensity",
                        data: ProductData::Real(i),
                    });
                }
                _ => {
                    let i = heralded_transverse_intensity(&h.mixture, exec)?;
                    let m = -cfg.magnification();
                    let c = i.centroid();
                    let ap = single_aperture(cfg)?;
                    let mask = cfg.aperture_mask(ap, [m * c[0], m * c[1]])?;
                    mask.check_resolution(&mut checks)?;
                    timer.lap("align");
                    let ff = mixture_triangle_far_field(&h.mixture, m, &mask, cfg.optics.f3.0, exec)?;
                    timer.lap("heralded_triangle");
                    let lobes = count_lobes(
                        &ff,
                        &cfg.lobe_options(cfg.signal_wavelength(), mask.feature_size()),
                    )?;
                    timer.lap("lobes");
                    summary.aperture_center = Some(mask.center);
                    summary.lobe_report = Some(lobes);
                    products.push(Product {
                        tag: "heralded_triangle",
                        data: ProductData::Real(ff),
                    });
                }
            }
        }
    }
    summary.stages = timer.stages;
    summary.warnings = checks.into_warnings();
    Ok(RunOutput { summary, products })
}

/// Run a scenario and write its outputs and `{name}_summary.json` into
/// `out_dir`.
pub fn run_scenario(cfg: &ScenarioConfig, out_dir: &Path, opts: &RunOptions) -> Result<RunSummary, Error> {
    let mut run = execute(cfg, opts)?;
    let mut written = Vec::new();
    for d in cfg.resolved_outputs() {
        let Some(data) = run.product(&d.product) else {
            continue;
        };
        let mut formats = d.formats.clone();
        formats.sort();
        formats.dedup();
        let stem = format!("{}_{}", cfg.name, d.product);
        for f in formats {
            let files: Vec<(String, Vec<u8>)> = match (f, data) {
                (Format::Csv, ProductData::Real(r)) => vec![(format!("{stem}.csv"), real_csv(r).into_bytes())],
                (Format::Csv, ProductData::Complex(c)) => {
                    vec![(format!("{stem}.csv"), complex_csv(c).into_bytes())]
                }
                (Format::Csv, ProductData::Regime(p)) => {
                    vec![(format!("{stem}.csv"), regime_csv(p).into_bytes())]
                }
                (Format::Png, ProductData::Real(r)) => vec![(format!("{stem}.png"), intensity_png(r))],
                (Format::Png, ProductData::Complex(c)) => vec![
                    (format!("{stem}.png"), intensity_png(&c.intensity())),
                    (format!("{stem}_phase.png"), phase_png(c)),
                ],
                (Format::Vhf1, ProductData::Complex(c)) => vec![(format!("{stem}.vhf1"), vhf1_bytes(c))],
                (Format::Vhf1, ProductData::Real(r)) => {
                    let c = ComplexField2D::new(
                        *r.grid(),
                        r.domain(),
                        0.0,
                        r.data().mapv(|v| num_complex::Complex64::new(v, 0.0)),
                    )?;
                    vec![(format!("{stem}.vhf1"), vhf1_bytes(&c))]
                }
                (_, ProductData::Regime(_)) => Vec::new(),
            };
            for (name, bytes) in files {
                write_atomic(&out_dir.join(&name), &bytes)?;
                written.push(name);
            }
        }
    }
    let summary_name = format!("{}_summary.json", cfg.name);
    written.push(summary_name.clone());
    run.summary.outputs = written;
    let json = serde_json::to_string_pretty(&run.summary).expect("summary serializes");
    write_atomic(&out_dir.join(summary_name), json.as_bytes())?;
    Ok(run.summary)
}
