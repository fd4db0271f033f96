//! Scenario configuration: a TOML document naming the case, parameter files,
//! disturbance, horizons, and output options. Relative paths resolve against
//! the config file's directory so a scenario is reproducible from anywhere.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use gridresp_core::{DeviceKind, DisturbanceSpec, Generator, NetworkCase};
use serde::Deserialize;

use crate::error::{CliError, Stage};
use crate::matpower;
use crate::native;
use crate::params::DeviceTable;

fn default_dt() -> f64 {
    0.1
}

fn default_horizon_freq() -> f64 {
    20.0
}

fn default_horizon_volt() -> f64 {
    2.0
}

#[derive(Debug, Clone, Deserialize)]
struct RawDisturbance {
    bus: usize,
    #[serde(default)]
    dp_mw: f64,
    #[serde(default)]
    dq_mvar: f64,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawFlags {
    #[serde(default)]
    pub dump_matrices: bool,
    #[serde(default)]
    pub run_oracle: bool,
    #[serde(default)]
    pub eigen_report: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    case: PathBuf,
    #[serde(default)]
    params: Vec<PathBuf>,
    #[serde(default)]
    out: Option<PathBuf>,
    #[serde(default = "default_dt")]
    dt: f64,
    #[serde(default = "default_horizon_freq")]
    horizon_freq: f64,
    #[serde(default = "default_horizon_volt")]
    horizon_volt: f64,
    disturbance: RawDisturbance,
    #[serde(default)]
    overrides: BTreeMap<String, DeviceKind>,
    #[serde(default)]
    flags: RawFlags,
}

/// Command-line values that take precedence over the config file; boolean
/// flags are additive (a flag can be forced on, not off).
#[derive(Debug, Clone, Default)]
pub struct CliOverrides {
    pub out: Option<PathBuf>,
    pub dt: Option<f64>,
    pub horizon_freq: Option<f64>,
    pub horizon_volt: Option<f64>,
    pub dump_matrices: bool,
    pub run_oracle: bool,
    pub eigen_report: bool,
}

/// A fully resolved scenario: network with devices bound, disturbance,
/// grids, and output options.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub case: NetworkCase,
    pub disturbance: DisturbanceSpec,
    pub dt: f64,
    pub horizon_freq: f64,
    pub horizon_volt: f64,
    pub out_dir: PathBuf,
    pub dump_matrices: bool,
    pub run_oracle: bool,
    pub eigen_report: bool,
    /// Kind overrides as given; sweeps rebuild devices from these plus the
    /// parameter table.
    pub overrides: BTreeMap<usize, DeviceKind>,
    device_table: std::sync::Arc<DeviceTable>,
}

impl Scenario {
    /// Re-binds devices for a modified kind assignment (sweep machinery):
    /// parameter records still apply wherever the (bus, kind) pair matches.
    pub fn rebind_devices(
        &self,
        kinds: &BTreeMap<usize, DeviceKind>,
    ) -> Result<Vec<Generator>, CliError> {
        self.device_table
            .resolve(&self.case, kinds)
            .map_err(|e| CliError::new(Stage::Params, e))
    }
}

fn read(path: &Path, stage: Stage) -> Result<String, CliError> {
    fs::read_to_string(path)
        .map_err(|e| CliError::new(stage, format!("reading {}: {e}", path.display())))
}

/// Loads a case by extension: `.m` MATPOWER, `.toml` native.
pub fn load_case(path: &Path) -> Result<NetworkCase, CliError> {
    let src = read(path, Stage::Case)?;
    let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("case");
    match path.extension().and_then(|e| e.to_str()) {
        Some("m") => matpower::parse_case(&src, name).map_err(|e| CliError::new(Stage::Case, e)),
        Some("toml") => native::parse_case(&src).map_err(|e| CliError::new(Stage::Case, e)),
        other => Err(CliError::new(
            Stage::Case,
            format!("unsupported case extension {other:?} (expected .m or .toml)"),
        )),
    }
}

pub fn load_scenario(config_path: &Path, cli: &CliOverrides) -> Result<Scenario, CliError> {
    let text = read(config_path, Stage::Config)?;
    let raw: RawConfig =
        toml::from_str(&text).map_err(|e| CliError::new(Stage::Config, e))?;

    let base = config_path.parent().unwrap_or(Path::new("."));
    let resolve = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base.join(p) };

    let dt = cli.dt.unwrap_or(raw.dt);
    let horizon_freq = cli.horizon_freq.unwrap_or(raw.horizon_freq);
    let horizon_volt = cli.horizon_volt.unwrap_or(raw.horizon_volt);
    for (what, v) in [("dt", dt), ("horizon_freq", horizon_freq), ("horizon_volt", horizon_volt)] {
        if !(v > 0.0) {
            return Err(CliError::new(Stage::Config, format!("{what} must be > 0, got {v}")));
        }
    }

    let mut overrides = BTreeMap::new();
    for (bus, kind) in &raw.overrides {
        let bus: usize = bus
            .parse()
            .map_err(|_| CliError::new(Stage::Config, format!("override key {bus:?} is not a bus id")))?;
        overrides.insert(bus, *kind);
    }

    let mut case = load_case(&resolve(&raw.case))?;

    let mut table = DeviceTable::default();
    for p in &raw.params {
        let p = resolve(p);
        let src = read(&p, Stage::Params)?;
        table
            .merge_toml(&src)
            .map_err(|e| CliError::new(Stage::Params, format!("{}: {e}", p.display())))?;
    }
    case.generators = table
        .resolve(&case, &overrides)
        .map_err(|e| CliError::new(Stage::Params, e))?;

    let name = config_path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("scenario")
        .to_string();
    let out_dir = cli
        .out
        .clone()
        .or_else(|| raw.out.as_ref().map(|p| resolve(p)))
        .unwrap_or_else(|| PathBuf::from("out").join(&name));

    Ok(Scenario {
        name,
        case,
        disturbance: DisturbanceSpec {
            bus: raw.disturbance.bus,
            dp_mw: raw.disturbance.dp_mw,
            dq_mvar: raw.disturbance.dq_mvar,
        },
        dt,
        horizon_freq,
        horizon_volt,
        out_dir,
        dump_matrices: cli.dump_matrices || raw.flags.dump_matrices,
        run_oracle: cli.run_oracle || raw.flags.run_oracle,
        eigen_report: cli.eigen_report || raw.flags.eigen_report,
        overrides,
        device_table: std::sync::Arc::new(table),
    })
}
