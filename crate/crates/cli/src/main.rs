//! `lis`: runs the surface-model experiments and writes CSV.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lis_core::experiments::{run_to_csv, Experiment, Spacing, SweepSpec};
use lis_core::LisError;
use thiserror::Error;

#[derive(Debug, Error)]
enum CliError {
    #[error("{path}:{line}: {reason}")]
    Config { path: String, line: usize, reason: String },
    #[error("cannot read {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("cannot write {path}: {source}")]
    Write { path: String, source: std::io::Error },
    #[error(transparent)]
    Model(#[from] LisError),
}

#[derive(Debug, Parser)]
#[command(name = "lis", version, about = "Spherical large intelligent surface experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sphere and disk received power versus radius, with oracle columns.
    RssSweep(Flags),
    /// Sphere-over-disk gain ratio, closed form and numeric.
    GammaSweep(Flags),
    /// Positioning CRLB factors and their log-log slopes versus radius.
    CrlbSweep(Flags),
    /// Noisy boundary-angle and RSS-series distance estimation trials.
    PositionSim(Flags),
    /// Phase-compensated reflector on random geometries.
    ReflectorSim(Flags),
    /// Power density and phase on a (theta, phi) grid.
    FieldMap(Flags),
}

impl Command {
    fn split(self) -> (Experiment, Flags) {
        match self {
            Command::RssSweep(f) => (Experiment::RssSweep, f),
            Command::GammaSweep(f) => (Experiment::GammaSweep, f),
            Command::CrlbSweep(f) => (Experiment::CrlbSweep, f),
            Command::PositionSim(f) => (Experiment::PositionSim, f),
            Command::ReflectorSim(f) => (Experiment::ReflectorSim, f),
            Command::FieldMap(f) => (Experiment::FieldMap, f),
        }
    }
}

#[derive(Debug, Args)]
struct Flags {
    /// key=value file read before the flags; flags win.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Terminal distance from the sphere center (m).
    #[arg(long)]
    zk: Option<f64>,
    #[arg(long)]
    r_min: Option<f64>,
    #[arg(long)]
    r_max: Option<f64>,
    #[arg(long)]
    points: Option<usize>,
    /// Log-spaced radius grid.
    #[arg(long)]
    log: bool,
    #[arg(long)]
    seed: Option<u64>,
    /// AWGN standard deviation of each RSS-series measurement.
    #[arg(long)]
    sigma: Option<f64>,
    /// AWGN standard deviation of each lattice cell in the boundary search.
    #[arg(long)]
    cell_sigma: Option<f64>,
    #[arg(long)]
    elements: Option<usize>,
    /// Equal-area disk by default (sqrt 2).
    #[arg(long)]
    planar_radius_scale: Option<f64>,
    #[arg(long)]
    wavelength: Option<f64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Nested caps in the RSS series.
    #[arg(long)]
    series: Option<usize>,
    #[arg(long)]
    threshold_mult: Option<f64>,
    /// Sphere radius for single-radius experiments (m).
    #[arg(long)]
    radius: Option<f64>,
    #[arg(long)]
    cap_half_angle: Option<f64>,
    /// Relative tolerance of the quadrature oracles.
    #[arg(long)]
    rel_tol: Option<f64>,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_value<T: std::str::FromStr>(value: &str) -> Result<T, String> {
    value.parse().map_err(|_| format!("cannot parse '{value}'"))
}

fn parse_bool(value: &str) -> Result<bool, String> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(format!("expected true or false, got '{value}'")),
    }
}

fn apply_key(spec: &mut SweepSpec, key: &str, value: &str) -> Result<(), String> {
    match key {
        "zk" => spec.zk = parse_value(value)?,
        "r-min" => spec.r_min = parse_value(value)?,
        "r-max" => spec.r_max = parse_value(value)?,
        "points" => spec.points = parse_value(value)?,
        "log" => {
            spec.spacing = if parse_bool(value)? {
                Spacing::Log
            } else {
                Spacing::Linear
            }
        }
        "seed" => spec.seed = parse_value(value)?,
        "sigma" => spec.sigma = parse_value(value)?,
        "cell-sigma" => spec.cell_sigma = parse_value(value)?,
        "elements" => spec.elements = parse_value(value)?,
        "planar-radius-scale" => spec.planar_radius_scale = parse_value(value)?,
        "wavelength" => spec.wavelength = parse_value(value)?,
        "trials" => spec.trials = parse_value(value)?,
        "series" => spec.series_len = parse_value(value)?,
        "threshold-mult" => spec.threshold_mult = parse_value(value)?,
        "radius" => spec.radius = parse_value(value)?,
        "cap-half-angle" => spec.cap_half_angle = Some(parse_value(value)?),
        "rel-tol" => spec.rel_tol = parse_value(value)?,
        _ => return Err(format!("unknown key '{key}'")),
    }
    Ok(())
}

fn load_config(spec: &mut SweepSpec, path: &Path) -> Result<(), CliError> {
    let shown = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Read {
        path: shown.clone(),
        source,
    })?;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |reason: String| CliError::Config {
            path: shown.clone(),
            line: i + 1,
            reason,
        };
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err("expected key=value".to_string()))?;
        apply_key(spec, key.trim(), value.trim()).map_err(err)?;
    }
    Ok(())
}

fn build_spec(experiment: Experiment, f: &Flags) -> Result<SweepSpec, CliError> {
    let mut spec = SweepSpec::new(experiment);
    if let Some(path) = &f.config {
        load_config(&mut spec, path)?;
    }
    macro_rules! set {
        ($flag:ident => $field:ident) => {
            if let Some(v) = f.$flag {
                spec.$field = v;
            }
        };
    }
    set!(zk => zk);
    set!(r_min => r_min);
    set!(r_max => r_max);
    set!(points => points);
    set!(seed => seed);
    set!(sigma => sigma);
    set!(cell_sigma => cell_sigma);
    set!(elements => elements);
    set!(planar_radius_scale => planar_radius_scale);
    set!(wavelength => wavelength);
    set!(trials => trials);
    set!(series => series_len);
    set!(threshold_mult => threshold_mult);
    set!(radius => radius);
    set!(rel_tol => rel_tol);
    if f.log {
        spec.spacing = Spacing::Log;
    }
    if f.cap_half_angle.is_some() {
        spec.cap_half_angle = f.cap_half_angle;
    }
    Ok(spec)
}

fn execute(command: Command) -> Result<(), CliError> {
    let (experiment, flags) = command.split();
    let spec = build_spec(experiment, &flags)?;
    let csv = run_to_csv(&spec)?;
    match &flags.out {
        Some(path) => std::fs::write(path, csv).map_err(|source| CliError::Write {
            path: path.display().to_string(),
            source,
        }),
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments");
            eprintln!("error: usage: {}", first.trim_start_matches("error: "));
            return ExitCode::from(2);
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.to_string().replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}
