//! Command-line front end.
//!
//! Configuration is resolved in layers: built-in defaults for the subcommand,
//! then the JSON file given by `--config` (a plain config or a sidecar written
//! by an earlier run), then dotted overrides such as `--model.alpha 0.3`, then
//! the dedicated flags. The resolved document is stored in every sidecar, so a
//! run can be repeated exactly from its own metadata.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::bipartite::{self, BellState, DeltaSetup, MeasurementModel, PartitionKind};
use crate::oracle;
use crate::output::{self, Plane};
use crate::rcsink::{self, RCParams};
use crate::spectral::{self, DecayRateCache, QuadratureOptions, SpectralParams};
use crate::sweep::{self, Axis, HeatmapGrid, SignMap, Sweep, CODE_VERSION};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_ORACLE: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("oracle check failed: {0} suite(s) did not pass")]
    OracleFailed(usize),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Numerical(_) => EXIT_NUMERICAL,
            CliError::OracleFailed(_) => EXIT_ORACLE,
        }
    }
}

fn config_err(e: impl ToString) -> CliError {
    CliError::Config(e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "zeno", version, about = "Zeno/anti-Zeno and non-Markovianity maps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Effective decay rate and Zeno class at one measurement interval.
    DecayRate(CommonArgs),
    /// γ/γ₀ − 1 over (τ, α).
    ZenoMap(CommonArgs),
    /// Trace-distance difference Δ over (τ₁, τ₂).
    NmMap(CommonArgs),
    /// Relative trace-distance measure of the sink model over (t, λ).
    RcMap(CommonArgs),
    /// Cross-check closed forms against the independent oracles.
    OracleCheck(CommonArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::DecayRate(_) => "decay-rate",
            Command::ZenoMap(_) => "zeno-map",
            Command::NmMap(_) => "nm-map",
            Command::RcMap(_) => "rc-map",
            Command::OracleCheck(_) => "oracle-check",
        }
    }

    fn args(&self) -> &CommonArgs {
        match self {
            Command::DecayRate(a)
            | Command::ZenoMap(a)
            | Command::NmMap(a)
            | Command::RcMap(a)
            | Command::OracleCheck(a) => a,
        }
    }
}

#[derive(Debug, Args)]
#[command(after_help = "Any config field can be set with a dotted flag, e.g. --model.alpha 0.3 \
                        or --grid.x_axis.count 20.")]
struct CommonArgs {
    /// JSON config, or a sidecar from a previous run.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format; repeat for several.
    #[arg(long = "format", value_enum)]
    formats: Vec<Format>,
    #[arg(long)]
    workers: Option<usize>,
    /// Bipartition for nm-map.
    #[arg(long)]
    partition: Option<PartitionKind>,
    /// Seed for the randomized oracle suites.
    #[arg(long)]
    seed: Option<u64>,
    /// Suppress progress lines on stderr.
    #[arg(long)]
    quiet: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Ppm,
    Svg,
}

/// Physical constants of every model; unused ones are ignored by a command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub coupling: f64,
    pub alpha: Option<f64>,
    pub delta_omega: f64,
    pub tunneling: f64,
    /// Second qubit's bath; `null` means identical to the first.
    pub coupling_2: Option<f64>,
    pub alpha_2: Option<f64>,
    pub a: f64,
    pub b: f64,
    pub n_measurements: u32,
    pub donor_acceptor_coupling: f64,
    pub sink_rate: Option<f64>,
    pub tau: Option<f64>,
    pub tau1: Option<f64>,
    pub tau2: Option<f64>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            coupling: 0.01,
            alpha: None,
            delta_omega: 1.0,
            tunneling: 2.0,
            coupling_2: None,
            alpha_2: None,
            a: std::f64::consts::FRAC_1_SQRT_2,
            b: std::f64::consts::FRAC_1_SQRT_2,
            n_measurements: 20,
            donor_acceptor_coupling: 1.0,
            sink_rate: None,
            tau: None,
            tau1: None,
            tau2: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub x_axis: Axis,
    pub y_axis: Axis,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: String,
    pub model: ModelConfig,
    pub grid: Option<GridConfig>,
    pub quadrature: QuadratureOptions,
    pub workers: usize,
    pub out: PathBuf,
    pub formats: Vec<Format>,
    pub partition: PartitionKind,
    pub seed: u64,
}

impl RunConfig {
    /// Defaults for `command`, including its standard grid.
    pub fn defaults_for(command: &str) -> Self {
        let grid = match command {
            "zeno-map" => Some(GridConfig {
                x_axis: Axis::log("tau", 0.02, 5.0, 50),
                y_axis: Axis::log("alpha", 0.05, 1.0, 50),
            }),
            "nm-map" => Some(GridConfig {
                x_axis: Axis::log("tau1", 0.05, 5.0, 40),
                y_axis: Axis::log("tau2", 0.05, 5.0, 40),
            }),
            "rc-map" => Some(GridConfig {
                x_axis: Axis::linear("t", 0.0, 10.0, 40),
                y_axis: Axis::linear("sink_rate", 0.0, 3.0, 40),
            }),
            _ => None,
        };
        Self {
            command: command.to_string(),
            model: ModelConfig::default(),
            grid,
            quadrature: QuadratureOptions::default(),
            workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
            out: PathBuf::from("out"),
            formats: vec![Format::Csv, Format::Json],
            partition: PartitionKind::QubitQubit,
            seed: 42,
        }
    }

    fn require(value: Option<f64>, field: &str) -> Result<f64, CliError> {
        value.ok_or_else(|| CliError::Config(format!("missing required field {field}")))
    }

    fn grid(&self) -> Result<&GridConfig, CliError> {
        self.grid
            .as_ref()
            .ok_or_else(|| CliError::Config("missing required field grid".into()))
    }

    pub fn spectral(&self) -> Result<SpectralParams, CliError> {
        let m = &self.model;
        let p = SpectralParams::new(m.coupling, Self::require(m.alpha, "model.alpha")?)
            .with_delta_omega(m.delta_omega);
        let p = SpectralParams {
            tunneling: m.tunneling,
            ..p
        };
        p.validate().map_err(config_err)?;
        Ok(p)
    }

    /// Spectral constants shared by the α axis of a zeno map; α is a placeholder.
    fn spectral_without_alpha(&self) -> Result<SpectralParams, CliError> {
        let m = &self.model;
        let p = SpectralParams {
            tunneling: m.tunneling,
            ..SpectralParams::new(m.coupling, 1.0).with_delta_omega(m.delta_omega)
        };
        p.validate().map_err(config_err)?;
        Ok(p)
    }

    pub fn measurement_model(&self) -> Result<MeasurementModel, CliError> {
        let first = self.spectral()?;
        let second = SpectralParams {
            coupling: self.model.coupling_2.unwrap_or(first.coupling),
            alpha: self.model.alpha_2.unwrap_or(first.alpha),
            ..first
        };
        let m = MeasurementModel {
            n_measurements: self.model.n_measurements,
            first,
            second,
        };
        m.validate().map_err(config_err)?;
        Ok(m)
    }

    pub fn bell(&self) -> Result<BellState, CliError> {
        BellState::new(self.model.a, self.model.b).map_err(config_err)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.workers == 0 {
            return Err(CliError::Config("workers must be >= 1".into()));
        }
        self.quadrature.validate().map_err(config_err)?;
        if let Some(g) = &self.grid {
            g.x_axis.validate().map_err(config_err)?;
            g.y_axis.validate().map_err(config_err)?;
        }
        Ok(())
    }
}

/// Recursively overlays `patch` onto `base`; objects merge, everything else replaces.
fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, p) => *slot = p,
    }
}

fn set_path(root: &mut Value, path: &str, value: Value) -> Result<(), CliError> {
    let mut node = root;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        if part.is_empty() {
            return Err(CliError::Config(format!("bad override path '{path}'")));
        }
        let obj = match node {
            Value::Object(o) => o,
            Value::Null => {
                *node = Value::Object(Map::new());
                node.as_object_mut().expect("just created")
            }
            _ => {
                return Err(CliError::Config(format!(
                    "override '{path}': '{}' is not an object",
                    parts[..i].join(".")
                )))
            }
        };
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        node = obj.entry(part.to_string()).or_insert(Value::Null);
    }
    Ok(())
}

/// Splits `--a.b value` / `--a.b=value` overrides out of the argument list.
fn extract_overrides(args: Vec<OsString>) -> Result<(Vec<OsString>, Vec<(String, Value)>), CliError> {
    let mut rest = Vec::with_capacity(args.len());
    let mut overrides = Vec::new();
    let mut iter = args.into_iter();
    while let Some(arg) = iter.next() {
        let text = arg.to_string_lossy().into_owned();
        let Some(flag) = text.strip_prefix("--") else {
            rest.push(arg);
            continue;
        };
        let (name, inline) = match flag.split_once('=') {
            Some((n, v)) => (n.to_string(), Some(v.to_string())),
            None => (flag.to_string(), None),
        };
        if !name.contains('.') {
            rest.push(arg);
            continue;
        }
        let raw = match inline {
            Some(v) => v,
            None => iter
                .next()
                .map(|v| v.to_string_lossy().into_owned())
                .ok_or_else(|| CliError::Config(format!("--{name} needs a value")))?,
        };
        let value = serde_json::from_str(&raw).unwrap_or(Value::String(raw));
        overrides.push((name, value));
    }
    Ok((rest, overrides))
}

fn load_config_file(path: &Path) -> Result<Value, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let mut value: Value =
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    // A sidecar carries the resolved config under "config".
    if value.get("version").is_some() {
        if let Some(inner) = value.get_mut("config") {
            return Ok(inner.take());
        }
    }
    Ok(value)
}

fn resolve(command: &str, args: &CommonArgs, overrides: Vec<(String, Value)>) -> Result<RunConfig, CliError> {
    let mut doc = serde_json::to_value(RunConfig::defaults_for(command)).map_err(config_err)?;
    if let Some(path) = &args.config {
        merge(&mut doc, load_config_file(path)?);
    }
    for (path, value) in overrides {
        set_path(&mut doc, &path, value)?;
    }
    let flags = json!({
        "out": args.out,
        "workers": args.workers,
        "partition": args.partition,
        "seed": args.seed,
        "formats": if args.formats.is_empty() { None } else { Some(&args.formats) },
    });
    for (k, v) in flags.as_object().expect("object literal") {
        if !v.is_null() {
            doc[k] = v.clone();
        }
    }
    doc["command"] = Value::String(command.to_string());
    let config: RunConfig = serde_json::from_value(doc).map_err(config_err)?;
    config.validate()?;
    Ok(config)
}

/// Result of one map command, ready to be written.
struct MapRun {
    stem: String,
    heat: HeatmapGrid,
    signs: SignMap,
    /// Whether the image shows signs (diverging) or values (sequential).
    sign_image: bool,
    extra: Map<String, Value>,
    seconds: f64,
}

fn write_outputs(config: &RunConfig, run: &MapRun) -> Result<Vec<PathBuf>, CliError> {
    fs::create_dir_all(&config.out).map_err(|e| CliError::Config(format!("{}: {e}", config.out.display())))?;
    let path = |ext: &str| config.out.join(format!("{}.{ext}", run.stem));
    let write = |p: &Path, bytes: &[u8]| fs::write(p, bytes).map_err(|e| CliError::Config(format!("{}: {e}", p.display())));
    let image_plane = if run.sign_image {
        Plane::Signs(&run.signs)
    } else {
        Plane::Values(&run.heat)
    };
    let mut written = Vec::new();
    let mut wants_json = false;
    for format in &config.formats {
        match format {
            Format::Csv => {
                let p = path("csv");
                write(&p, output::to_csv(Plane::Values(&run.heat)).as_bytes())?;
                written.push(p);
            }
            Format::Ppm => {
                let p = path("ppm");
                write(&p, &output::to_ppm(image_plane, 8))?;
                written.push(p);
            }
            Format::Svg => {
                let p = path("svg");
                write(&p, output::to_svg(image_plane, &run.stem).as_bytes())?;
                written.push(p);
            }
            Format::Json => wants_json = true,
        }
    }
    if wants_json {
        let p = path("json");
        let mut meta = Map::new();
        meta.insert("config".into(), serde_json::to_value(config).map_err(config_err)?);
        meta.insert("version".into(), json!(CODE_VERSION));
        meta.insert("positive_count".into(), json!(run.signs.positive_count));
        meta.insert("cells".into(), json!(run.heat.cells.len()));
        meta.insert("min".into(), json!(run.heat.min));
        meta.insert("max".into(), json!(run.heat.max));
        meta.insert("failed_cells".into(), json!(run.heat.errors.len()));
        meta.insert("errors".into(), serde_json::to_value(&run.heat.errors).map_err(config_err)?);
        meta.insert("timings".into(), json!({ "sweep_seconds": run.seconds }));
        meta.extend(run.extra.clone());
        let text = serde_json::to_string_pretty(&Value::Object(meta)).map_err(config_err)? + "\n";
        write(&p, text.as_bytes())?;
        written.push(p);
    }
    Ok(written)
}

fn runner(config: &RunConfig, quiet: bool) -> Sweep {
    Sweep::new(config.workers).progress(!quiet)
}

fn sweep_err(e: sweep::SweepError) -> CliError {
    match e {
        sweep::SweepError::Pool(m) => CliError::Numerical(m),
        other => config_err(other),
    }
}

fn cmd_decay_rate(config: &RunConfig) -> Result<Value, CliError> {
    let tau = RunConfig::require(config.model.tau, "model.tau")?;
    if !(tau.is_finite() && tau > 0.0) {
        return Err(CliError::Config(format!("model.tau = {tau} must be > 0")));
    }
    let p = config.spectral()?;
    let gamma = spectral::effective_decay_rate(tau, &p, &config.quadrature)
        .map_err(|e| CliError::Numerical(e.to_string()))?;
    let gamma0 = spectral::natural_decay_rate(&p);
    let class = spectral::ZenoClass::from_ratio(gamma / gamma0, spectral::BOUNDARY_BAND);
    Ok(json!({
        "tau": tau,
        "gamma": gamma,
        "gamma0": gamma0,
        "ratio": class.ratio,
        "class": class.kind,
    }))
}

fn cmd_zeno_map(config: &RunConfig, quiet: bool) -> Result<MapRun, CliError> {
    let grid = config.grid()?;
    let p = config.spectral_without_alpha()?;
    let start = Instant::now();
    let heat = spectral::zeno_deviation_map(&grid.x_axis, &grid.y_axis, &p, &config.quadrature, &runner(config, quiet))
        .map_err(sweep_err)?;
    let signs = sweep::to_sign_map(&heat, spectral::BOUNDARY_BAND);
    Ok(MapRun {
        stem: "zeno-map".into(),
        heat,
        signs,
        sign_image: true,
        extra: Map::new(),
        seconds: start.elapsed().as_secs_f64(),
    })
}

fn cmd_nm_map(config: &RunConfig, quiet: bool) -> Result<MapRun, CliError> {
    let grid = config.grid()?;
    let setup = DeltaSetup {
        partition: config.partition,
        bell: config.bell()?,
        model: config.measurement_model()?,
        quadrature: config.quadrature,
    };
    let cache = DecayRateCache::new();
    let start = Instant::now();
    let heat = bipartite::nonmarkov_heatmap(&grid.x_axis, &grid.y_axis, &setup, &cache, &runner(config, quiet))
        .map_err(sweep_err)?;
    let signs = sweep::to_sign_map(&heat, bipartite::SIGN_ZERO_BAND);
    let mut extra = Map::new();
    extra.insert("partition".into(), json!(config.partition));
    extra.insert("cached_decay_rates".into(), json!(cache.len()));
    Ok(MapRun {
        stem: format!("nm-map-{}", config.partition),
        heat,
        signs,
        sign_image: true,
        extra,
        seconds: start.elapsed().as_secs_f64(),
    })
}

fn cmd_rc_map(config: &RunConfig, quiet: bool) -> Result<MapRun, CliError> {
    let grid = config.grid()?;
    let tau = RunConfig::require(config.model.tau, "model.tau")?;
    let p = RCParams {
        coupling: config.model.donor_acceptor_coupling,
        sink_rate: 0.0,
        bell: config.bell()?,
    };
    p.validate().map_err(config_err)?;
    let start = Instant::now();
    let map = rcsink::rc_map(&grid.x_axis, &grid.y_axis, tau, &p, &runner(config, quiet)).map_err(sweep_err)?;
    let signs = sweep::to_sign_map(&map.heat, 0.0);
    let mut extra = Map::new();
    extra.insert("positive_per_rate".into(), json!(map.positive_per_rate));
    Ok(MapRun {
        stem: "rc-map".into(),
        heat: map.heat,
        signs,
        sign_image: false,
        extra,
        seconds: start.elapsed().as_secs_f64(),
    })
}

fn cmd_oracle_check(config: &RunConfig) -> Result<(), CliError> {
    let outcomes = oracle::run_all(config.seed);
    let mut failed = 0;
    for o in &outcomes {
        println!("{} {}: {}", if o.passed { "PASS" } else { "FAIL" }, o.name, o.detail);
        if !o.passed {
            failed += 1;
        }
    }
    println!("{} of {} oracle suites passed (seed {})", outcomes.len() - failed, outcomes.len(), config.seed);
    if failed > 0 {
        return Err(CliError::OracleFailed(failed));
    }
    Ok(())
}

fn dispatch(command: &Command, overrides: Vec<(String, Value)>) -> Result<(), CliError> {
    let args = command.args();
    let config = resolve(command.name(), args, overrides)?;
    let map = match command {
        Command::DecayRate(_) => {
            let report = cmd_decay_rate(&config)?;
            println!("{}", serde_json::to_string(&report).map_err(config_err)?);
            return Ok(());
        }
        Command::OracleCheck(_) => return cmd_oracle_check(&config),
        Command::ZenoMap(_) => cmd_zeno_map(&config, args.quiet)?,
        Command::NmMap(_) => cmd_nm_map(&config, args.quiet)?,
        Command::RcMap(_) => cmd_rc_map(&config, args.quiet)?,
    };
    let written = write_outputs(&config, &map)?;
    if !map.heat.errors.is_empty() {
        eprintln!(
            "warning: {} of {} cells failed; see the JSON sidecar",
            map.heat.errors.len(),
            map.heat.cells.len()
        );
    }
    for p in written {
        eprintln!("wrote {}", p.display());
    }
    println!(
        "{}",
        json!({
            "command": config.command,
            "positive_count": map.signs.positive_count,
            "cells": map.heat.cells.len(),
            "failed_cells": map.heat.errors.len(),
        })
    );
    Ok(())
}

/// Runs the CLI on `args` (including the program name) and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let (args, overrides) = match extract_overrides(args) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(&cli.command, overrides) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
