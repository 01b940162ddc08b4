//! Configuration, dispatch and report writing for the `rosenau-fp` binary.
//!
//! A run is described by an [`ExperimentConfig`]. Values come from an optional
//! TOML file and are overridden by command-line flags. The resolved config is
//! echoed into the metadata of every report so a run can be repeated exactly.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use rosenau_fp::equilibrium::{maxwellian_comparison_table, stationary_law, stationary_table};
use rosenau_fp::evolution::{trajectory, WildConfig};
use rosenau_fp::lattice::{entropy, half_width, InitialData, LatticeDensity};
use rosenau_fp::report::{format_real, Cell, ReportTable};
use rosenau_fp::spectral::{
    decay_report, fourier_distance, stability_report, CharFnEvaluator, XiGrid,
};
use rosenau_fp::stencils::{derivative_stencil, stencil_moments, MAX_HALF_ORDER};

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "ROSENAU_FP_THREADS";

/// Tolerance for the moment-law check in `evolve` reports.
pub const MOMENT_LAW_TOL: f64 = 1e-8;

#[derive(Debug, thiserror::Error)]
pub enum UsageError {
    #[error("invalid value for `{key}`: {message}")]
    Invalid { key: String, message: String },
    #[error("config file {path}: {message}")]
    File { path: PathBuf, message: String },
    #[error(transparent)]
    Args(#[from] clap::Error),
}

fn invalid(key: &str, message: impl Into<String>) -> UsageError {
    UsageError::Invalid {
        key: key.to_string(),
        message: message.into(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Command {
    Evolve,
    Stationary,
    Decay,
    Stability,
    Stencil,
    Metric,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Evolve => "evolve",
            Command::Stationary => "stationary",
            Command::Decay => "decay",
            Command::Stability => "stability",
            Command::Stencil => "stencil",
            Command::Metric => "metric",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(format!("expected csv or json, got '{other}'")),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Csv => "csv",
            Format::Json => "json",
        })
    }
}

/// Initial data as given on the command line, e.g. `three-point:k=8,theta0=1`.
#[derive(Clone, Debug, PartialEq)]
pub enum InitialSpec {
    Recipe(InitialData),
    /// Seeded random density; `width` limits the support to `|j| ≤ width`.
    Random { width: Option<i64> },
    File(PathBuf),
}

fn descriptor_params(body: &str) -> Result<BTreeMap<String, String>, String> {
    let mut out = BTreeMap::new();
    if body.is_empty() {
        return Ok(out);
    }
    for part in body.split(',') {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| format!("expected key=value, got '{part}'"))?;
        if out.insert(k.trim().to_string(), v.trim().to_string()).is_some() {
            return Err(format!("parameter '{k}' given twice"));
        }
    }
    Ok(out)
}

fn take<T: FromStr>(params: &mut BTreeMap<String, String>, key: &str, kind: &str) -> Result<T, String> {
    let raw = params
        .remove(key)
        .ok_or_else(|| format!("{kind} needs parameter '{key}'"))?;
    raw.parse()
        .map_err(|_| format!("cannot parse {key} = '{raw}'"))
}

impl FromStr for InitialSpec {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let (kind, body) = s.split_once(':').unwrap_or((s, ""));
        if kind == "file" {
            if body.is_empty() {
                return Err("file: needs a path".into());
            }
            return Ok(InitialSpec::File(PathBuf::from(body)));
        }
        let mut params = descriptor_params(body)?;
        let spec = match kind {
            "delta" => InitialSpec::Recipe(InitialData::Delta {
                j: if params.contains_key("j") { take(&mut params, "j", kind)? } else { 0 },
            }),
            "three-point" => InitialSpec::Recipe(InitialData::ThreePoint {
                k: take(&mut params, "k", kind)?,
                theta0: take(&mut params, "theta0", kind)?,
            }),
            "gaussian-cells" => InitialSpec::Recipe(InitialData::GaussianCells {
                u0: take(&mut params, "u0", kind)?,
                theta0: take(&mut params, "theta0", kind)?,
            }),
            "random" => InitialSpec::Random {
                width: if params.contains_key("width") {
                    Some(take(&mut params, "width", kind)?)
                } else {
                    None
                },
            },
            other => {
                return Err(format!(
                    "unknown initial kind '{other}' (expected delta, three-point, gaussian-cells, random or file)"
                ))
            }
        };
        if let Some(extra) = params.keys().next() {
            return Err(format!("unknown parameter '{extra}' for {kind}"));
        }
        Ok(spec)
    }
}

impl fmt::Display for InitialSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitialSpec::Recipe(InitialData::Delta { j }) => write!(f, "delta:j={j}"),
            InitialSpec::Recipe(InitialData::ThreePoint { k, theta0 }) => {
                write!(f, "three-point:k={k},theta0={}", format_real(*theta0))
            }
            InitialSpec::Recipe(InitialData::GaussianCells { u0, theta0 }) => write!(
                f,
                "gaussian-cells:u0={},theta0={}",
                format_real(*u0),
                format_real(*theta0)
            ),
            InitialSpec::Random { width: None } => f.write_str("random"),
            InitialSpec::Random { width: Some(w) } => write!(f, "random:width={w}"),
            InitialSpec::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

impl InitialSpec {
    pub fn build(&self, resolution: usize, seed: u64) -> anyhow::Result<LatticeDensity> {
        match self {
            InitialSpec::Recipe(d) => Ok(d.build(resolution)?),
            InitialSpec::Random { width } => Ok(random_density(resolution, *width, seed)?),
            InitialSpec::File(path) => {
                let text = fs::read_to_string(path)
                    .with_context(|| format!("reading density file {}", path.display()))?;
                let g = LatticeDensity::from_json(&text)
                    .with_context(|| format!("parsing density file {}", path.display()))?;
                if g.resolution() != resolution {
                    anyhow::bail!(
                        "density file {} has N = {}, run asks for N = {resolution}",
                        path.display(),
                        g.resolution()
                    );
                }
                Ok(g)
            }
        }
    }
}

/// Uniform random weights on `|j| ≤ width`, seeded by `(seed, N)`.
pub fn random_density(
    resolution: usize,
    width: Option<i64>,
    seed: u64,
) -> rosenau_fp::Result<LatticeDensity> {
    let hw = half_width(resolution)? as i64;
    let width = width.unwrap_or(hw).clamp(0, hw);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(resolution as u64);
    let coeffs = (-hw..=hw)
        .map(|j| if j.abs() <= width { rng.gen::<f64>() } else { 0.0 })
        .collect();
    LatticeDensity::new(resolution, coeffs)
}

/// Entries accepted in a TOML config file; keys match the long flag names.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    #[serde(rename = "N")]
    n: Option<usize>,
    #[serde(rename = "N_list")]
    n_list: Option<Vec<usize>>,
    t: Option<Vec<f64>>,
    initial: Option<String>,
    reference: Option<String>,
    lambda_max: Option<f64>,
    tail_tol: Option<f64>,
    output: Option<PathBuf>,
    density_out: Option<PathBuf>,
    format: Option<Format>,
    seed: Option<u64>,
    order: Option<u32>,
    s: Option<f64>,
    check: Option<bool>,
    compare: Option<bool>,
}

#[derive(Debug, Parser)]
#[command(name = "rosenau-fp", version, about = "Lattice Fokker-Planck experiments")]
struct Cli {
    #[command(subcommand)]
    command: CliCommand,
}

#[derive(Debug, Subcommand)]
enum CliCommand {
    /// Wild-sum evolution with moment-law checks.
    Evolve(Flags),
    /// The discrete equilibrium law, or its distance to the Maxwellian with --compare.
    Stationary(Flags),
    /// Exponential decay toward equilibrium in the d2 metric.
    Decay(Flags),
    /// d3 distance between lattice and continuous solutions under refinement.
    Stability(Flags),
    /// Central-difference stencil of a given even order.
    Stencil(Flags),
    /// Fourier distance d_s between an (evolved) initial law and a reference.
    Metric(Flags),
}

#[derive(Debug, Default, Args)]
struct Flags {
    /// Lattice resolution, eps = 1/N.
    #[arg(long = "N", value_name = "N")]
    n: Option<usize>,
    /// Comma-separated list of resolutions.
    #[arg(long = "N-list", value_name = "N,N,...", value_delimiter = ',')]
    n_list: Option<Vec<usize>>,
    /// Comma-separated list of times.
    #[arg(long = "t", value_name = "T,T,...", value_delimiter = ',', allow_negative_numbers = true)]
    t: Option<Vec<f64>>,
    /// Initial data: delta:j=J | three-point:k=K,theta0=X | gaussian-cells:u0=U,theta0=X | random[:width=W] | file:PATH.
    #[arg(long)]
    initial: Option<String>,
    /// Reference law for `metric`: stationary | maxwellian | an initial-data descriptor.
    #[arg(long)]
    reference: Option<String>,
    #[arg(long = "lambda-max", allow_negative_numbers = true)]
    lambda_max: Option<f64>,
    #[arg(long = "tail-tol", allow_negative_numbers = true)]
    tail_tol: Option<f64>,
    /// Report path; standard output when absent.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Where `stationary` writes the law as density JSON.
    #[arg(long = "density-out")]
    density_out: Option<PathBuf>,
    #[arg(long)]
    format: Option<Format>,
    #[arg(long)]
    seed: Option<u64>,
    /// Stencil order 2n.
    #[arg(long)]
    order: Option<u32>,
    /// Metric exponent s.
    #[arg(long, allow_negative_numbers = true)]
    s: Option<f64>,
    /// Append the moment table to the stencil report.
    #[arg(long)]
    check: bool,
    /// Compare the equilibrium with the Maxwellian over --N-list.
    #[arg(long)]
    compare: bool,
    /// TOML file with defaults for any of the flags above.
    #[arg(long)]
    config: Option<PathBuf>,
}

/// Fully resolved run description.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub command: Command,
    pub resolutions: Vec<usize>,
    pub times: Vec<f64>,
    pub initial: InitialSpec,
    pub reference: Option<String>,
    pub wild: WildConfig,
    pub output: Option<PathBuf>,
    pub density_out: Option<PathBuf>,
    pub format: Format,
    pub seed: u64,
    pub order: u32,
    pub s: f64,
    pub check: bool,
    pub compare: bool,
}

impl ExperimentConfig {
    /// Single resolution of commands that take `--N`.
    pub fn resolution(&self) -> usize {
        self.resolutions[0]
    }

    /// `key = value` pairs of the resolved config, in a fixed order.
    pub fn echo(&self) -> Vec<(String, String)> {
        let list = |v: &[f64]| v.iter().map(|x| format_real(*x)).collect::<Vec<_>>().join(",");
        let mut out = vec![
            ("command".to_string(), self.command.name().to_string()),
            (
                "N".to_string(),
                self.resolutions.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(","),
            ),
            ("t".to_string(), list(&self.times)),
            ("initial".to_string(), self.initial.to_string()),
            ("lambda_max".to_string(), format_real(self.wild.lambda_max)),
            ("tail_tol".to_string(), format_real(self.wild.tail_tol)),
            ("format".to_string(), self.format.to_string()),
            ("seed".to_string(), self.seed.to_string()),
        ];
        match self.command {
            Command::Stencil => {
                out.push(("order".into(), self.order.to_string()));
                out.push(("check".into(), self.check.to_string()));
            }
            Command::Metric => {
                out.push(("s".into(), format_real(self.s)));
                out.push((
                    "reference".into(),
                    self.reference.clone().unwrap_or_default(),
                ));
            }
            Command::Stationary => out.push(("compare".into(), self.compare.to_string())),
            _ => {}
        }
        out
    }
}

fn read_file_config(path: &Path) -> Result<FileConfig, UsageError> {
    let text = fs::read_to_string(path).map_err(|e| UsageError::File {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    toml::from_str(&text).map_err(|e| UsageError::File {
        path: path.to_path_buf(),
        message: e.to_string().trim().to_string(),
    })
}

/// Parses `args` (without the program name) and merges an optional config file.
/// A file passed here takes the place of `--config`. Flags override file values.
pub fn parse_config<I, S>(args: I, file: Option<&Path>) -> Result<ExperimentConfig, UsageError>
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let argv = std::iter::once(std::ffi::OsString::from("rosenau-fp"))
        .chain(args.into_iter().map(Into::into));
    let cli = Cli::try_parse_from(argv)?;
    let (command, flags) = match cli.command {
        CliCommand::Evolve(f) => (Command::Evolve, f),
        CliCommand::Stationary(f) => (Command::Stationary, f),
        CliCommand::Decay(f) => (Command::Decay, f),
        CliCommand::Stability(f) => (Command::Stability, f),
        CliCommand::Stencil(f) => (Command::Stencil, f),
        CliCommand::Metric(f) => (Command::Metric, f),
    };
    let file_path = file.map(Path::to_path_buf).or_else(|| flags.config.clone());
    let fc = match &file_path {
        Some(p) => read_file_config(p)?,
        None => FileConfig::default(),
    };
    resolve(command, flags, fc)
}

fn resolve(command: Command, flags: Flags, fc: FileConfig) -> Result<ExperimentConfig, UsageError> {
    let n = flags.n.or(fc.n);
    let n_list = flags.n_list.or(fc.n_list);
    let defaults = Defaults::for_command(command);
    let n_given = n.is_some() || n_list.is_some();

    let resolutions = match (n, n_list) {
        (Some(_), Some(_)) if !defaults.wants_list => {
            return Err(invalid("N-list", format!("{} takes a single --N", command.name())))
        }
        (Some(n), None) => vec![n],
        (_, Some(list)) => list,
        (None, None) => defaults.resolutions.clone(),
    };
    if resolutions.is_empty() {
        return Err(invalid("N", "at least one resolution is required"));
    }
    let key = if resolutions.len() > 1 { "N-list" } else { "N" };
    if resolutions.len() > 1 && !defaults.wants_list {
        return Err(invalid("N-list", format!("{} takes a single --N", command.name())));
    }
    for &r in &resolutions {
        if r == 0 {
            return Err(invalid(key, "N must be a positive integer"));
        }
        half_width(r).map_err(|e| invalid(key, e.to_string()))?;
    }

    let times = flags.t.or(fc.t).unwrap_or_else(|| defaults.times.clone());
    if times.is_empty() {
        return Err(invalid("t", "at least one time is required"));
    }
    if let Some(bad) = times.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
        return Err(invalid("t", format!("times must be finite and >= 0, got {bad}")));
    }

    let initial_raw = flags.initial.or(fc.initial).unwrap_or_else(|| defaults.initial.to_string());
    let initial: InitialSpec = initial_raw.parse().map_err(|e: String| invalid("initial", e))?;
    if let InitialSpec::Recipe(d) = &initial {
        for &r in &resolutions {
            d.build(r).map_err(|e| invalid("initial", e.to_string()))?;
        }
    }

    let wild = WildConfig {
        lambda_max: flags.lambda_max.or(fc.lambda_max).unwrap_or(WildConfig::default().lambda_max),
        tail_tol: flags.tail_tol.or(fc.tail_tol).unwrap_or(WildConfig::default().tail_tol),
    };
    if let Err(e) = wild.validate() {
        let key = if e.to_string().contains("lambda_max") { "lambda-max" } else { "tail-tol" };
        return Err(invalid(key, e.to_string()));
    }

    let order = flags.order.or(fc.order).unwrap_or(4);
    if order == 0 || order % 2 == 1 || order > 2 * MAX_HALF_ORDER {
        return Err(invalid(
            "order",
            format!("order must be even and in 2..={}, got {order}", 2 * MAX_HALF_ORDER),
        ));
    }
    let s = flags.s.or(fc.s).unwrap_or(2.0);
    if !(s > 0.0 && s.is_finite()) {
        return Err(invalid("s", format!("s must be positive, got {s}")));
    }
    let reference = flags.reference.or(fc.reference);
    if let Some(r) = &reference {
        if r != "stationary" && r != "maxwellian" {
            r.parse::<InitialSpec>().map_err(|e| invalid("reference", e))?;
        }
    }
    let compare = flags.compare || fc.compare.unwrap_or(false);
    let resolutions = if command == Command::Stationary && compare && !n_given {
        vec![2, 4, 8]
    } else {
        resolutions
    };
    if command == Command::Stationary && compare && resolutions.iter().any(|&r| r < 2) {
        return Err(invalid(key, "--compare needs N >= 2"));
    }
    if command == Command::Stationary && !compare && resolutions.len() > 1 {
        return Err(invalid("N-list", "stationary without --compare takes a single --N"));
    }

    Ok(ExperimentConfig {
        command,
        resolutions,
        times,
        initial,
        reference: reference.or_else(|| (command == Command::Metric).then(|| "stationary".to_string())),
        wild,
        output: flags.output.or(fc.output),
        density_out: flags.density_out.or(fc.density_out),
        format: flags.format.or(fc.format).unwrap_or_default(),
        seed: flags.seed.or(fc.seed).unwrap_or(0),
        order,
        s,
        check: flags.check || fc.check.unwrap_or(false),
        compare,
    })
}

struct Defaults {
    resolutions: Vec<usize>,
    wants_list: bool,
    times: Vec<f64>,
    initial: &'static str,
}

impl Defaults {
    fn for_command(c: Command) -> Self {
        match c {
            Command::Evolve => Self {
                resolutions: vec![8],
                wants_list: false,
                times: vec![0.5, 1.0, 2.0],
                initial: "delta:j=0",
            },
            Command::Stationary => Self {
                resolutions: vec![4],
                wants_list: true,
                times: vec![0.0],
                initial: "delta:j=0",
            },
            Command::Decay => Self {
                resolutions: vec![8],
                wants_list: false,
                times: vec![0.5, 1.0, 2.0, 4.0],
                initial: "gaussian-cells:u0=0,theta0=0.5",
            },
            Command::Stability => Self {
                resolutions: vec![4, 8, 16],
                wants_list: true,
                times: vec![0.5, 1.0, 2.0],
                initial: "gaussian-cells:u0=0.5,theta0=0.5",
            },
            Command::Stencil => Self {
                resolutions: vec![1],
                wants_list: false,
                times: vec![0.0],
                initial: "delta:j=0",
            },
            Command::Metric => Self {
                resolutions: vec![8],
                wants_list: false,
                times: vec![0.0],
                initial: "delta:j=0",
            },
        }
    }
}

/// Result of one run. `passed` is `None` when the command embeds no assertion.
#[derive(Debug)]
pub struct Outcome {
    pub table: ReportTable,
    /// Tables written after the main one, e.g. the stencil moment check.
    pub appended: Vec<ReportTable>,
    pub passed: Option<bool>,
    /// Extra files to write next to the report: (path, contents).
    pub side_files: Vec<(PathBuf, String)>,
}

impl Outcome {
    fn single(table: ReportTable, passed: Option<bool>) -> Self {
        Self {
            table,
            appended: vec![],
            passed,
            side_files: vec![],
        }
    }
}

pub fn run_experiment(cfg: &ExperimentConfig) -> anyhow::Result<Outcome> {
    let mut outcome = match cfg.command {
        Command::Evolve => run_evolve(cfg)?,
        Command::Stationary => run_stationary(cfg)?,
        Command::Decay => run_decay(cfg)?,
        Command::Stability => run_stability(cfg)?,
        Command::Stencil => run_stencil(cfg)?,
        Command::Metric => run_metric(cfg)?,
    };
    for (k, v) in cfg.echo() {
        outcome.table.set_meta(format!("config.{k}"), v);
    }
    if let Some(p) = outcome.passed {
        outcome.table.set_meta("passed", p.to_string());
    }
    Ok(outcome)
}

fn run_evolve(cfg: &ExperimentConfig) -> anyhow::Result<Outcome> {
    let n = cfg.resolution();
    let g = cfg.initial.build(n, cfg.seed)?;
    let m0 = g.moments();
    let mut times = cfg.times.clone();
    times.sort_by(f64::total_cmp);
    let states = trajectory(&g, &times, &cfg.wild)?;
    let mut table = ReportTable::new([
        "t",
        "mass",
        "mean",
        "temperature",
        "entropy",
        "mean_law",
        "temperature_law",
        "pass",
    ]);
    let mut all = true;
    for (&t, f) in times.iter().zip(&states) {
        let m = f.moments();
        let mean_law = m0.mean * (-t).exp();
        let temp_law = 1.0 - (1.0 - m0.temperature) * (-2.0 * t).exp();
        let ok = (m.mass - 1.0).abs() <= 1e-12
            && f.coeffs().iter().all(|&c| c >= 0.0)
            && (m.mean - mean_law).abs() <= MOMENT_LAW_TOL
            && (m.temperature - temp_law).abs() <= MOMENT_LAW_TOL;
        all &= ok;
        table.push_row(vec![
            Cell::Real(t),
            Cell::Real(m.mass),
            Cell::Real(m.mean),
            Cell::Real(m.temperature),
            Cell::Real(entropy(f)),
            Cell::Real(mean_law),
            Cell::Real(temp_law),
            Cell::Bool(ok),
        ])?;
    }
    Ok(Outcome::single(table, Some(all)))
}

fn run_stationary(cfg: &ExperimentConfig) -> anyhow::Result<Outcome> {
    if cfg.compare {
        let table = maxwellian_comparison_table(&cfg.resolutions)?;
        let idx = table.column_index("decreasing").expect("column present");
        let passed = table.rows().iter().all(|r| r[idx] != Cell::Bool(false));
        return Ok(Outcome::single(table, Some(passed)));
    }
    let n = cfg.resolution();
    let table = stationary_table(n)?;
    let mut side_files = vec![];
    if let Some(path) = &cfg.density_out {
        side_files.push((path.clone(), stationary_law(n)?.to_json()? + "\n"));
    }
    let mut outcome = Outcome::single(table, None);
    outcome.side_files = side_files;
    Ok(outcome)
}

fn run_decay(cfg: &ExperimentConfig) -> anyhow::Result<Outcome> {
    let n = cfg.resolution();
    let phi = cfg.initial.build(n, cfg.seed)?;
    let rep = decay_report(&phi, &cfg.times, n)?;
    Ok(Outcome::single(rep.table(), Some(rep.passed())))
}

fn run_stability(cfg: &ExperimentConfig) -> anyhow::Result<Outcome> {
    let InitialSpec::Recipe(InitialData::GaussianCells { u0, theta0 }) = cfg.initial else {
        anyhow::bail!("stability needs --initial gaussian-cells:u0=..,theta0=..");
    };
    let rep = stability_report(u0, theta0, &cfg.resolutions, &cfg.times, &cfg.wild)?;
    Ok(Outcome::single(rep.table(), Some(rep.passed())))
}

fn run_stencil(cfg: &ExperimentConfig) -> anyhow::Result<Outcome> {
    let n = cfg.order / 2;
    let stencil = derivative_stencil(n)?;
    let mut outcome = Outcome::single(stencil.table()?, None);
    if cfg.check {
        let fact: i128 = (1..=cfg.order as i128).product();
        let mut moments = ReportTable::new(["m", "sum"]);
        let mut passed = true;
        for (m, s) in stencil_moments(&stencil) {
            passed &= s == if m == cfg.order { fact } else { 0 };
            moments.push_row(vec![Cell::Int(m as i64), Cell::from(s)])?;
        }
        outcome.appended.push(moments);
        outcome.passed = Some(passed);
    }
    Ok(outcome)
}

fn run_metric(cfg: &ExperimentConfig) -> anyhow::Result<Outcome> {
    let n = cfg.resolution();
    let g = cfg.initial.build(n, cfg.seed)?;
    let reference = cfg.reference.as_deref().unwrap_or("stationary");
    let (reference_hat, grid) = match reference {
        "stationary" => (CharFnEvaluator::stationary(n), XiGrid::lattice_default(n)),
        "maxwellian" => (CharFnEvaluator::maxwellian(), XiGrid::continuous_default()),
        other => {
            let spec: InitialSpec = other.parse().map_err(anyhow::Error::msg)?;
            let r = spec.build(n, cfg.seed.wrapping_add(1))?;
            (CharFnEvaluator::from_density(&r), XiGrid::lattice_default(n))
        }
    };
    let mut times = cfg.times.clone();
    times.sort_by(f64::total_cmp);
    let states = trajectory(&g, &times, &cfg.wild)?;
    let mut table = ReportTable::new(["t", "d_s", "argmax_xi", "moments_agree"]);
    table.set_meta("grid", grid.spec());
    for (&t, f) in times.iter().zip(&states) {
        let r = fourier_distance(&CharFnEvaluator::from_density(f), &reference_hat, cfg.s, &grid)?;
        table.push_row(vec![
            Cell::Real(t),
            Cell::Real(r.value),
            Cell::Real(r.argmax_xi),
            Cell::Bool(r.moments_agree),
        ])?;
    }
    Ok(Outcome::single(table, None))
}

/// CSV: the main table, then each appended table after a blank line.
/// JSON: one object, or an array of objects when tables were appended.
pub fn render(outcome: &Outcome, format: Format) -> anyhow::Result<String> {
    let tables: Vec<&ReportTable> = std::iter::once(&outcome.table).chain(&outcome.appended).collect();
    Ok(match format {
        Format::Csv => {
            let parts = tables.iter().map(|t| t.to_csv()).collect::<Result<Vec<_>, _>>()?;
            parts.join("\n")
        }
        Format::Json if tables.len() == 1 => outcome.table.to_json_string()?,
        Format::Json => {
            let values: Vec<_> = tables.iter().map(|t| t.to_json()).collect();
            serde_json::to_string_pretty(&values)? + "\n"
        }
    })
}

/// Writes the report (to `cfg.output` or stdout) and any side files.
pub fn write_outcome(cfg: &ExperimentConfig, outcome: &Outcome) -> anyhow::Result<()> {
    let text = render(outcome, cfg.format)?;
    match &cfg.output {
        Some(path) => fs::write(path, text)
            .with_context(|| format!("writing report {}", path.display()))?,
        None => print!("{text}"),
    }
    for (path, contents) in &outcome.side_files {
        fs::write(path, contents).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

/// Applies [`THREADS_ENV`] to the global rayon pool.
pub fn configure_threads() -> Result<(), UsageError> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| invalid(THREADS_ENV, format!("expected a positive integer, got '{raw}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| invalid(THREADS_ENV, e.to_string()))
}
