//! Declarative scenario files.
//!
//! Scenarios are TOML documents. Every physical quantity is a string with an
//! explicit unit (`"1.3 mm"`, `"406 nm"`, `"2.2e-2 um^-1"`, `"60 deg"`);
//! bare numbers are rejected for them. Values are normalized to µm, µm⁻¹
//! and radians at parse time, and a parsed config serializes back with
//! those canonical units, so parse → serialize → parse is lossless.

use crate::beams::{BGBeamSpec, BeamError};
use crate::diffraction::{ApertureMask, ApertureShape, DiffractionError, LobeOptions};
use crate::grid::{GridError, GridSpec};
use crate::herald::{
    AcceptanceShape, CrystalSpec, DetectorAcceptance, HeraldError, PhaseMatchingModel,
    DEFAULT_N_PUMP, DEFAULT_N_SIGNAL,
};
use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};
use std::f64::consts::PI;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("could not parse scenario: {0}")]
    Syntax(String),
    #[error("constraint violated: {0}")]
    Constraint(String),
    #[error("pipeline `{pipeline}` requires section `{section}`")]
    MissingSection {
        pipeline: &'static str,
        section: &'static str,
    },
    #[error("output product `{product}` is not produced by pipeline `{pipeline}`")]
    UnknownProduct {
        product: String,
        pipeline: &'static str,
    },
}

impl From<BeamError> for ScenarioError {
    fn from(e: BeamError) -> Self {
        ScenarioError::Constraint(e.to_string())
    }
}
impl From<HeraldError> for ScenarioError {
    fn from(e: HeraldError) -> Self {
        ScenarioError::Constraint(e.to_string())
    }
}
impl From<GridError> for ScenarioError {
    fn from(e: GridError) -> Self {
        ScenarioError::Constraint(e.to_string())
    }
}
impl From<DiffractionError> for ScenarioError {
    fn from(e: DiffractionError) -> Self {
        ScenarioError::Constraint(e.to_string())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Dim {
    Length,
    Wavenumber,
    Angle,
}

fn unit_scale(dim: Dim, unit: &str) -> Option<f64> {
    let u = unit.trim().replace('µ', "u");
    Some(match dim {
        Dim::Length => match u.as_str() {
            "nm" => 1e-3,
            "um" => 1.0,
            "mm" => 1e3,
            "cm" => 1e4,
            "m" => 1e6,
            _ => return None,
        },
        Dim::Wavenumber => match u.as_str() {
            "nm^-1" | "/nm" => 1e3,
            "um^-1" | "/um" => 1.0,
            "mm^-1" | "/mm" => 1e-3,
            "cm^-1" | "/cm" => 1e-4,
            "m^-1" | "/m" => 1e-6,
            _ => return None,
        },
        Dim::Angle => match u.as_str() {
            "rad" => 1.0,
            "deg" => PI / 180.0,
            _ => return None,
        },
    })
}

fn parse_quantity(dim: Dim, s: &str) -> Result<f64, String> {
    let s = s.trim();
    let split = s
        .find(|c: char| !(c.is_ascii_digit() || matches!(c, '.' | '+' | '-' | 'e' | 'E')))
        .ok_or_else(|| format!("`{s}` has no unit"))?;
    let (num, unit) = s.split_at(split);
    let value: f64 = num
        .trim()
        .parse()
        .map_err(|_| format!("`{s}`: `{}` is not a number", num.trim()))?;
    let scale = unit_scale(dim, unit).ok_or_else(|| {
        format!(
            "`{s}`: unit `{}` is not a {} unit",
            unit.trim(),
            match dim {
                Dim::Length => "length",
                Dim::Wavenumber => "wavenumber",
                Dim::Angle => "angle",
            }
        )
    })?;
    if !value.is_finite() {
        return Err(format!("`{s}` is not finite"));
    }
    Ok(value * scale)
}

macro_rules! quantity {
    ($name:ident, $dim:expr, $unit:literal, $example:literal) => {
        #[doc = concat!("Quantity stored in canonical `", $unit, "`.")]
        #[derive(Clone, Copy, Debug, PartialEq)]
        pub struct $name(pub f64);

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(&format!("{} {}", self.0, $unit))
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                struct V;
                impl<'de> Visitor<'de> for V {
                    type Value = $name;
                    fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                        write!(f, concat!("a quantity string with units, e.g. \"", $example, "\""))
                    }
                    fn visit_str<E: de::Error>(self, v: &str) -> Result<$name, E> {
                        parse_quantity($dim, v).map($name).map_err(E::custom)
                    }
                }
                d.deserialize_str(V)
            }
        }

        impl std::str::FromStr for $name {
            type Err = ScenarioError;
            fn from_str(s: &str) -> Result<Self, ScenarioError> {
                parse_quantity($dim, s).map($name).map_err(ScenarioError::Syntax)
            }
        }
    };
}

quantity!(Length, Dim::Length, "um", "1.3 mm");
quantity!(Wavenumber, Dim::Wavenumber, "um^-1", "2.2e-2 um^-1");
quantity!(Angle, Dim::Angle, "rad", "30 deg");

/// `"auto"` or an explicit coordinate pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Center<T> {
    Auto,
    At([T; 2]),
}

impl<T> Default for Center<T> {
    fn default() -> Self {
        Center::Auto
    }
}

impl<T: Serialize> Serialize for Center<T> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Center::Auto => s.serialize_str("auto"),
            Center::At(v) => v.serialize(s),
        }
    }
}

impl<'de, T: Deserialize<'de>> Deserialize<'de> for Center<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw<T> {
            Word(String),
            Pair([T; 2]),
        }
        match Raw::<T>::deserialize(d).map_err(|_| {
            de::Error::custom("expected \"auto\" or a pair of quantities with units")
        })? {
            Raw::Word(w) if w == "auto" => Ok(Center::Auto),
            Raw::Word(w) => Err(de::Error::custom(format!(
                "expected \"auto\" or a pair of quantities, got `{w}`"
            ))),
            Raw::Pair(p) => Ok(Center::At(p)),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pipeline {
    PumpCharacterize,
    AngularSpectrum,
    Cas,
    TransverseIntensity,
    TriangleDiffraction,
    RegimeMap,
}

impl Pipeline {
    pub fn name(self) -> &'static str {
        match self {
            Pipeline::PumpCharacterize => "pump_characterize",
            Pipeline::AngularSpectrum => "angular_spectrum",
            Pipeline::Cas => "cas",
            Pipeline::TransverseIntensity => "transverse_intensity",
            Pipeline::TriangleDiffraction => "triangle_diffraction",
            Pipeline::RegimeMap => "regime_map",
        }
    }

    /// Product tags this pipeline can export.
    pub fn products(self) -> &'static [&'static str] {
        match self {
            Pipeline::PumpCharacterize => &["pump_field", "pump_intensity", "pump_spectrum", "pump_triangle"],
            Pipeline::AngularSpectrum => &["pump_spectrum"],
            Pipeline::Cas => &["cas"],
            Pipeline::TransverseIntensity => &["intensity"],
            Pipeline::TriangleDiffraction => &["heralded_triangle"],
            Pipeline::RegimeMap => &["regime"],
        }
    }

    fn needs_crystal(self) -> bool {
        matches!(
            self,
            Pipeline::Cas | Pipeline::TransverseIntensity | Pipeline::TriangleDiffraction | Pipeline::RegimeMap
        )
    }

    fn needs_aperture(self) -> bool {
        matches!(self, Pipeline::PumpCharacterize | Pipeline::TriangleDiffraction)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeamConfig {
    #[serde(default = "one_i32")]
    pub l: i32,
    pub k_t: Wavenumber,
    pub w0: Length,
    #[serde(default = "default_pump_wavelength")]
    pub wavelength: Length,
    #[serde(default = "one_f64")]
    pub amplitude: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrystalModel {
    Unity,
    Sinc,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrystalConfig {
    #[serde(default = "default_model")]
    pub model: CrystalModel,
    pub length: Length,
    #[serde(default = "default_n_p")]
    pub n_p: f64,
    #[serde(default = "default_n_s")]
    pub n_s: f64,
    /// Degenerate signal/idler wavelength; twice the pump wavelength when
    /// omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signal_wavelength: Option<Length>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AcceptanceShapeConfig {
    Delta,
    Disk,
    Gaussian,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AcceptanceConfig {
    #[serde(default = "default_shape")]
    pub shape: AcceptanceShapeConfig,
    #[serde(default)]
    pub center: Center<Wavenumber>,
    /// k-space radius; alternatively give `fiber_diameter`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<Wavenumber>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fiber_diameter: Option<Length>,
    /// Lens mapping the fiber tip to k-space; `optics.f1` when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub focal: Option<Length>,
    #[serde(default = "default_quadrature_n")]
    pub quadrature_n: usize,
    /// Recorded for reproducibility; the Fibonacci quadrature is deterministic.
    #[serde(default)]
    pub seed: u64,
}

impl Default for AcceptanceConfig {
    fn default() -> Self {
        Self {
            shape: AcceptanceShapeConfig::Delta,
            center: Center::Auto,
            radius: None,
            fiber_diameter: None,
            focal: None,
            quadrature_n: 1,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlaneGrid {
    pub n: usize,
    pub pitch: Length,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridsConfig {
    #[serde(default = "default_crystal_grid")]
    pub crystal: PlaneGrid,
    #[serde(default = "default_fp2_grid")]
    pub fp2: PlaneGrid,
}

impl Default for GridsConfig {
    fn default() -> Self {
        Self {
            crystal: default_crystal_grid(),
            fp2: default_fp2_grid(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpticsConfig {
    /// Crystal → FP1 Fourier lens.
    #[serde(default = "default_f1")]
    pub f1: Length,
    /// FP1 → FP2 lens; the crystal is imaged onto FP2 with magnification f2/f1.
    #[serde(default = "default_f2")]
    pub f2: Length,
    /// FP2 → FP3 Fourier lens behind the aperture.
    #[serde(default = "default_f3")]
    pub f3: Length,
}

impl Default for OpticsConfig {
    fn default() -> Self {
        Self {
            f1: default_f1(),
            f2: default_f2(),
            f3: default_f3(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApertureKind {
    Triangle,
    Disk,
    Rect,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApertureConfig {
    pub shape: ApertureKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub side: Option<Length>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<Length>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<Length>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height: Option<Length>,
    /// FP2 position; `"auto"` centers on the beam (heralded-intensity
    /// centroid for the signal photon, the axis for the pump).
    #[serde(default)]
    pub center: Center<Length>,
    #[serde(default = "zero_angle")]
    pub orientation: Angle,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegimeConfig {
    pub length: [Length; 2],
    pub k_t: [Wavenumber; 2],
    #[serde(default = "default_k_t_steps")]
    pub k_t_steps: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LobesConfig {
    #[serde(default = "default_threshold")]
    pub threshold_frac: f64,
    #[serde(default = "default_prominence")]
    pub min_prominence: f64,
    #[serde(default = "default_secondary")]
    pub secondary_frac: f64,
    /// Merge radius at FP3; `"auto"` uses half the diffraction scale λf₃/D.
    #[serde(default)]
    pub merge_radius: MergeRadius,
}

impl Default for LobesConfig {
    fn default() -> Self {
        Self {
            threshold_frac: default_threshold(),
            min_prominence: default_prominence(),
            secondary_frac: default_secondary(),
            merge_radius: MergeRadius::Auto,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub enum MergeRadius {
    #[default]
    Auto,
    Fixed(Length),
}

impl Serialize for MergeRadius {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            MergeRadius::Auto => s.serialize_str("auto"),
            MergeRadius::Fixed(l) => l.serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for MergeRadius {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        if s == "auto" {
            Ok(MergeRadius::Auto)
        } else {
            parse_quantity(Dim::Length, &s)
                .map(|v| MergeRadius::Fixed(Length(v)))
                .map_err(de::Error::custom)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Png,
    Vhf1,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputDirective {
    pub product: String,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
}

/// Fully resolved scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub pipeline: Pipeline,
    #[serde(default)]
    pub strict: bool,
    pub beam: BeamConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub crystal: Option<CrystalConfig>,
    #[serde(default)]
    pub acceptance: AcceptanceConfig,
    #[serde(default)]
    pub grids: GridsConfig,
    #[serde(default)]
    pub optics: OpticsConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regime: Option<RegimeConfig>,
    #[serde(default)]
    pub lobes: LobesConfig,
    #[serde(default)]
    pub apertures: Vec<ApertureConfig>,
    #[serde(default)]
    pub outputs: Vec<OutputDirective>,
}

fn one_i32() -> i32 {
    1
}
fn one_f64() -> f64 {
    1.0
}
fn default_pump_wavelength() -> Length {
    Length(0.406)
}
fn default_model() -> CrystalModel {
    CrystalModel::Sinc
}
fn default_n_p() -> f64 {
    DEFAULT_N_PUMP
}
fn default_n_s() -> f64 {
    DEFAULT_N_SIGNAL
}
fn default_shape() -> AcceptanceShapeConfig {
    AcceptanceShapeConfig::Delta
}
fn default_quadrature_n() -> usize {
    61
}
fn default_crystal_grid() -> PlaneGrid {
    PlaneGrid {
        n: 512,
        pitch: Length(25.0),
    }
}
fn default_fp2_grid() -> PlaneGrid {
    PlaneGrid {
        n: 512,
        pitch: Length(5.0),
    }
}
fn default_f1() -> Length {
    Length(1e5)
}
fn default_f2() -> Length {
    Length(1.5e5)
}
fn default_f3() -> Length {
    Length(3e4)
}
fn zero_angle() -> Angle {
    Angle(0.0)
}
fn default_k_t_steps() -> usize {
    23
}
fn default_threshold() -> f64 {
    0.3
}
fn default_prominence() -> f64 {
    0.1
}
fn default_secondary() -> f64 {
    0.5
}
fn default_formats() -> Vec<Format> {
    vec![Format::Csv]
}

fn locate(text: &str, e: &toml::de::Error) -> String {
    let Some(span) = e.span() else {
        return e.message().to_string();
    };
    let line = text[..span.start.min(text.len())].matches('\n').count();
    let src = text.lines().nth(line).unwrap_or("").trim();
    format!("line {}: {} (`{src}`)", line + 1, e.message())
}

/// Parse and validate a scenario document.
pub fn parse_scenario(text: &str) -> Result<ScenarioConfig, ScenarioError> {
    let mut cfg: ScenarioConfig =
        toml::from_str(text).map_err(|e| ScenarioError::Syntax(locate(text, &e)))?;
    // a delta acceptance always has exactly one node
    if cfg.acceptance.shape == AcceptanceShapeConfig::Delta {
        cfg.acceptance.quadrature_n = 1;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Canonical TOML text of a config.
pub fn serialize_scenario(cfg: &ScenarioConfig) -> String {
    toml::to_string(cfg).expect("scenario config always serializes")
}

fn positive(name: &str, v: f64) -> Result<(), ScenarioError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(ScenarioError::Constraint(format!("{name} must be positive, got {v}")))
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.name.is_empty()
            || !self
                .name
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
        {
            return Err(ScenarioError::Constraint(
                "name must be non-empty and use only [A-Za-z0-9_-]".into(),
            ));
        }
        let b = &self.beam;
        positive("beam.w0", b.w0.0)?;
        positive("beam.wavelength", b.wavelength.0)?;
        positive("beam.amplitude", b.amplitude)?;
        if !(b.k_t.0 >= 0.0) {
            return Err(ScenarioError::Constraint(format!(
                "beam.k_t must be >= 0, got {}",
                b.k_t.0
            )));
        }
        self.beam_spec()?;
        if let Some(c) = &self.crystal {
            positive("crystal.length", c.length.0)?;
            positive("crystal.n_p", c.n_p)?;
            positive("crystal.n_s", c.n_s)?;
            if let Some(w) = c.signal_wavelength {
                positive("crystal.signal_wavelength", w.0)?;
            }
        }
        let a = &self.acceptance;
        if a.shape != AcceptanceShapeConfig::Delta {
            if a.radius.is_some() == a.fiber_diameter.is_some() {
                return Err(ScenarioError::Constraint(
                    "acceptance needs exactly one of `radius` or `fiber_diameter`".into(),
                ));
            }
            if let Some(r) = a.radius {
                positive("acceptance.radius", r.0)?;
            }
            if let Some(d) = a.fiber_diameter {
                positive("acceptance.fiber_diameter", d.0)?;
            }
            if let Some(f) = a.focal {
                positive("acceptance.focal", f.0)?;
            }
            if a.quadrature_n == 0 {
                return Err(ScenarioError::Constraint("acceptance.quadrature_n must be >= 1".into()));
            }
        } else if a.radius.is_some() || a.fiber_diameter.is_some() {
            return Err(ScenarioError::Constraint(
                "delta acceptance takes no radius or fiber_diameter".into(),
            ));
        }
        for (name, g) in [("grids.crystal", &self.grids.crystal), ("grids.fp2", &self.grids.fp2)] {
            positive(&format!("{name}.pitch"), g.pitch.0)?;
            GridSpec::square(g.n, g.pitch.0)
                .map_err(|e| ScenarioError::Constraint(format!("{name}: {e}")))?;
        }
        positive("optics.f1", self.optics.f1.0)?;
        positive("optics.f2", self.optics.f2.0)?;
        positive("optics.f3", self.optics.f3.0)?;
        let l = &self.lobes;
        if !(l.threshold_frac > 0.0 && l.threshold_frac < 1.0) {
            return Err(ScenarioError::Constraint("lobes.threshold_frac must lie in (0, 1)".into()));
        }
        if !(l.min_prominence >= 0.0 && l.min_prominence < 1.0) {
            return Err(ScenarioError::Constraint("lobes.min_prominence must lie in [0, 1)".into()));
        }
        if !(l.secondary_frac >= 0.0 && l.secondary_frac < 1.0) {
            return Err(ScenarioError::Constraint("lobes.secondary_frac must lie in [0, 1)".into()));
        }
        if let MergeRadius::Fixed(r) = l.merge_radius {
            positive("lobes.merge_radius", r.0)?;
        }
        for ap in &self.apertures {
            self.aperture_shape(ap)?;
        }
        if let Some(r) = &self.regime {
            positive("regime.length[0]", r.length[0].0)?;
            positive("regime.k_t[0]", r.k_t[0].0)?;
            if r.length[1].0 <= r.length[0].0 || r.k_t[1].0 <= r.k_t[0].0 {
                return Err(ScenarioError::Constraint("regime ranges must be increasing".into()));
            }
            if r.k_t_steps < 2 {
                return Err(ScenarioError::Constraint("regime.k_t_steps must be >= 2".into()));
            }
        }

        let p = self.pipeline;
        if p.needs_crystal() && self.crystal.is_none() {
            return Err(ScenarioError::MissingSection {
                pipeline: p.name(),
                section: "crystal",
            });
        }
        if p.needs_aperture() && self.apertures.is_empty() {
            return Err(ScenarioError::MissingSection {
                pipeline: p.name(),
                section: "apertures",
            });
        }
        if p == Pipeline::RegimeMap && self.regime.is_none() {
            return Err(ScenarioError::MissingSection {
                pipeline: p.name(),
                section: "regime",
            });
        }
        for o in &self.outputs {
            if !p.products().contains(&o.product.as_str()) {
                return Err(ScenarioError::UnknownProduct {
                    product: o.product.clone(),
                    pipeline: p.name(),
                });
            }
        }
        Ok(())
    }

    pub fn beam_spec(&self) -> Result<BGBeamSpec, ScenarioError> {
        let mut s = BGBeamSpec::new(self.beam.l, self.beam.k_t.0, self.beam.w0.0, self.beam.wavelength.0)?;
        s.amplitude = self.beam.amplitude;
        s.validate()?;
        Ok(s)
    }

    pub fn signal_wavelength(&self) -> f64 {
        self.crystal
            .as_ref()
            .and_then(|c| c.signal_wavelength)
            .map(|l| l.0)
            .unwrap_or(2.0 * self.beam.wavelength.0)
    }

    pub fn crystal_spec(&self) -> Result<CrystalSpec, ScenarioError> {
        let c = self.crystal.as_ref().ok_or(ScenarioError::MissingSection {
            pipeline: self.pipeline.name(),
            section: "crystal",
        })?;
        let model = match c.model {
            CrystalModel::Unity => PhaseMatchingModel::UnityG,
            CrystalModel::Sinc => PhaseMatchingModel::SincLongitudinal,
        };
        Ok(CrystalSpec::from_indices(
            c.length.0,
            model,
            c.n_p,
            c.n_s,
            self.beam.wavelength.0,
            self.signal_wavelength(),
        )?)
    }

    /// Detector acceptance centered on `center` (the resolved conditioning
    /// wavevector when the config says `"auto"`).
    pub fn detector_acceptance(&self, auto_center: [f64; 2]) -> Result<DetectorAcceptance, ScenarioError> {
        let a = &self.acceptance;
        let center = match a.center {
            Center::Auto => auto_center,
            Center::At([x, y]) => [x.0, y.0],
        };
        let radius = || -> f64 {
            match (a.radius, a.fiber_diameter) {
                (Some(r), _) => r.0,
                (None, Some(d)) => DetectorAcceptance::fiber_radius(
                    d.0,
                    a.focal.unwrap_or(self.optics.f1).0,
                    self.signal_wavelength(),
                ),
                (None, None) => 0.0,
            }
        };
        Ok(match a.shape {
            AcceptanceShapeConfig::Delta => DetectorAcceptance::delta(center),
            AcceptanceShapeConfig::Disk => DetectorAcceptance::disk(center, radius(), a.quadrature_n)?,
            AcceptanceShapeConfig::Gaussian => DetectorAcceptance::gaussian(center, radius(), a.quadrature_n)?,
        })
    }

    pub fn acceptance_shape(&self) -> AcceptanceShape {
        match self.acceptance.shape {
            AcceptanceShapeConfig::Delta => AcceptanceShape::Delta,
            AcceptanceShapeConfig::Disk => AcceptanceShape::Disk,
            AcceptanceShapeConfig::Gaussian => AcceptanceShape::Gaussian,
        }
    }

    /// Position-domain grid of the crystal plane.
    pub fn crystal_grid(&self) -> Result<GridSpec, ScenarioError> {
        Ok(GridSpec::square(self.grids.crystal.n, self.grids.crystal.pitch.0)?)
    }

    pub fn fp2_grid(&self) -> Result<GridSpec, ScenarioError> {
        Ok(GridSpec::square(self.grids.fp2.n, self.grids.fp2.pitch.0)?)
    }

    /// Crystal-to-FP2 imaging magnification `f2/f1` (the image is inverted).
    pub fn magnification(&self) -> f64 {
        self.optics.f2.0 / self.optics.f1.0
    }

    pub fn aperture_shape(&self, ap: &ApertureConfig) -> Result<ApertureShape, ScenarioError> {
        let need = |v: Option<Length>, key: &str| {
            v.map(|l| l.0).ok_or_else(|| {
                ScenarioError::Constraint(format!("{:?} aperture requires `{key}`", ap.shape))
            })
        };
        let shape = match ap.shape {
            ApertureKind::Triangle => ApertureShape::Triangle {
                side: need(ap.side, "side")?,
            },
            ApertureKind::Disk => ApertureShape::Disk {
                radius: need(ap.radius, "radius")?,
            },
            ApertureKind::Rect => ApertureShape::Rect {
                width: need(ap.width, "width")?,
                height: need(ap.height, "height")?,
            },
        };
        let dims: Vec<f64> = [ap.side, ap.radius, ap.width, ap.height]
            .iter()
            .flatten()
            .map(|l| l.0)
            .collect();
        for d in dims {
            positive("aperture dimension", d)?;
        }
        Ok(shape)
    }

    /// Aperture mask on the FP2 grid, centered at `auto_center` when the
    /// config says `"auto"`.
    pub fn aperture_mask(
        &self,
        ap: &ApertureConfig,
        auto_center: [f64; 2],
    ) -> Result<ApertureMask, ScenarioError> {
        let center = match ap.center {
            Center::Auto => auto_center,
            Center::At([x, y]) => [x.0, y.0],
        };
        Ok(ApertureMask::new(
            self.aperture_shape(ap)?,
            center,
            ap.orientation.0,
            self.fp2_grid()?,
        )?)
    }

    pub fn lobe_options(&self, wavelength: f64, aperture_size: f64) -> LobeOptions {
        LobeOptions {
            threshold_frac: self.lobes.threshold_frac,
            min_prominence: self.lobes.min_prominence,
            secondary_frac: self.lobes.secondary_frac,
            merge_radius: Some(match self.lobes.merge_radius {
                MergeRadius::Auto => wavelength * self.optics.f3.0 / (2.0 * aperture_size),
                MergeRadius::Fixed(r) => r.0,
            }),
            ..LobeOptions::default()
        }
    }

    /// Outputs to write: the configured list, or every product as CSV.
    pub fn resolved_outputs(&self) -> Vec<OutputDirective> {
        if self.outputs.is_empty() {
            self.pipeline
                .products()
                .iter()
                .map(|p| OutputDirective {
                    product: p.to_string(),
                    formats: default_formats(),
                })
                .collect()
        } else {
            self.outputs.clone()
        }
    }
}
