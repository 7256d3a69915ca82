//! Command-line front end: run scenario files or the built-in l = 1 setup.
//!
//! Thread count follows `RAYON_NUM_THREADS`.

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use vortex_herald::pipeline::{run_scenario, RunOptions, RunSummary};
use vortex_herald::scenario::{
    parse_scenario, Format, Length, OutputDirective, Pipeline, ScenarioConfig,
};
use vortex_herald::{Error, Execution};

/// Crystal-plane span kept fixed when `--grid` changes the sample count.
const CRYSTAL_SPAN_UM: f64 = 12800.0;

const BUILTIN: &str = r#"
name = "builtin"
pipeline = "triangle_diffraction"

[beam]
l = 1
k_t = "2.2e-2 um^-1"
w0 = "1.3 mm"
wavelength = "406 nm"

[crystal]
model = "sinc"
length = "1 mm"

[acceptance]
shape = "disk"
fiber_diameter = "200 um"
quadrature_n = 61

[regime]
length = ["0.2 mm", "5 mm"]
k_t = ["0.005 um^-1", "0.06 um^-1"]

[[apertures]]
shape = "triangle"
side = "500 um"
"#;

#[derive(Parser)]
#[command(name = "vortex-herald", version, about = "Vortex transfer to heralded SPDC photons")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Pump intensity, angular spectrum and triangle far field
    Pump(Common),
    /// Pump angular spectrum with annulus fit
    Spectrum(Common),
    /// Conditional angular spectrum of the heralded signal photon
    Cas(Common),
    /// Heralded transverse intensity
    Intensity(Common),
    /// Heralded far field behind the triangular aperture
    Diffract(Common),
    /// Short-crystal regime boundary
    Regime(Common),
    /// Run a scenario file as written
    Run {
        file: PathBuf,
        #[command(flatten)]
        flags: Flags,
    },
}

#[derive(Args)]
struct Common {
    /// Base scenario file (defaults to the built-in l = 1 setup)
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Topological charge of the pump
    #[arg(long, allow_hyphen_values = true)]
    charge: Option<i32>,
    /// Crystal length, e.g. "3 mm"
    #[arg(long)]
    length: Option<String>,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Args)]
struct Flags {
    /// Samples per side of the crystal and aperture planes
    #[arg(long)]
    grid: Option<usize>,
    /// Promote warnings to errors
    #[arg(long)]
    strict: bool,
    /// Output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Output format; repeat for several
    #[arg(long, value_enum)]
    format: Vec<FormatArg>,
    /// Run members and rows sequentially
    #[arg(long)]
    sequential: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Png,
    Vhf1,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Png => Format::Png,
            FormatArg::Vhf1 => Format::Vhf1,
        }
    }
}

fn read_scenario(path: &Path) -> Result<ScenarioConfig, Error> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        Error::Export(vortex_herald::export::ExportError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    })?;
    Ok(parse_scenario(&text)?)
}

fn apply_flags(cfg: &mut ScenarioConfig, flags: &Flags) {
    if let Some(n) = flags.grid {
        cfg.grids.crystal.n = n;
        cfg.grids.crystal.pitch = Length(CRYSTAL_SPAN_UM / n as f64);
        cfg.grids.fp2.n = n;
    }
    if flags.strict {
        cfg.strict = true;
    }
    if !flags.format.is_empty() {
        let formats: Vec<Format> = flags.format.iter().map(|&f| f.into()).collect();
        cfg.outputs = cfg
            .resolved_outputs()
            .into_iter()
            .map(|d| OutputDirective {
                product: d.product,
                formats: formats.clone(),
            })
            .collect();
    }
}

fn preset(pipeline: Pipeline, common: &Common) -> Result<ScenarioConfig, Error> {
    let mut cfg = match &common.scenario {
        Some(p) => read_scenario(p)?,
        None => parse_scenario(BUILTIN)?,
    };
    if cfg.pipeline != pipeline {
        cfg.pipeline = pipeline;
        cfg.outputs.clear();
    }
    if common.scenario.is_none() {
        cfg.name = pipeline.name().to_string();
    }
    if let Some(l) = common.charge {
        cfg.beam.l = l;
    }
    if let Some(len) = &common.length {
        let v: Length = len.parse()?;
        let builtin = parse_scenario(BUILTIN)?.crystal;
        match cfg.crystal.as_mut() {
            Some(c) => c.length = v,
            None => {
                let mut c = builtin.expect("built-in scenario has a crystal");
                c.length = v;
                cfg.crystal = Some(c);
            }
        }
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<RunSummary, Error> {
    let (mut cfg, flags) = match cli.command {
        Command::Run { file, flags } => (read_scenario(&file)?, flags),
        Command::Pump(c) => (preset(Pipeline::PumpCharacterize, &c)?, c.flags),
        Command::Spectrum(c) => (preset(Pipeline::AngularSpectrum, &c)?, c.flags),
        Command::Cas(c) => (preset(Pipeline::Cas, &c)?, c.flags),
        Command::Intensity(c) => (preset(Pipeline::TransverseIntensity, &c)?, c.flags),
        Command::Diffract(c) => (preset(Pipeline::TriangleDiffraction, &c)?, c.flags),
        Command::Regime(c) => (preset(Pipeline::RegimeMap, &c)?, c.flags),
    };
    apply_flags(&mut cfg, &flags);
    let opts = RunOptions {
        exec: if flags.sequential {
            Execution::Sequential
        } else {
            Execution::Parallel
        },
    };
    run_scenario(&cfg, &flags.out, &opts)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(summary) => {
            for w in &summary.warnings {
                eprintln!("warning: {w}");
            }
            if let Some(r) = &summary.lobe_report {
                println!("{}: {} lobes, charge estimate {}", summary.scenario, r.lobes.len(), r.charge_estimate);
            }
            for o in &summary.outputs {
                println!("wrote {o}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            let kind = e.kind();
            let record = json!({
                "error": kind,
                "exit_code": kind.exit_code(),
                "message": e.to_string(),
            });
            eprintln!("{record}");
            ExitCode::from(kind.exit_code() as u8)
        }
    }
}
