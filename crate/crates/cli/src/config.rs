//! Command-line flags, the optional TOML config file, and their resolution
//! into a validated [`RunConfig`]. Precedence: flags, then file, then
//! built-in defaults.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use maglat_core::bands::{DEFAULT_EDGE_TOL, DEFAULT_GRID_DENSITY, DEFAULT_KAPPA_MAX};
use maglat_core::{coprime_fluxes, make_flux, FluxRatio};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "MAGLAT_OUT_DIR";

pub const DEFAULT_KMAX: f64 = 20.0;
pub const DEFAULT_QMAX: u32 = 12;
pub const DEFAULT_ASYMPTOTIC_N: u32 = 80;
pub const DEFAULT_PROB_N: u32 = 50;
/// Largest denominator enumerated without a warning.
pub const SOFT_QMAX: u32 = 12;

#[derive(Debug, Parser)]
#[command(name = "maglat", version, about = "Spectral bands of the magnetic square-lattice quantum graph")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Band edges of a single flux ratio.
    Bands(BandsArgs),
    /// Band edges of every coprime ratio up to a denominator.
    Butterfly(ButterflyArgs),
    /// Probability of a random momentum lying in the spectrum.
    Prob(ProbArgs),
    /// Negative eigenvalues of the star graph.
    Star(StarArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// TOML file with default settings.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Grid points per unit of the spectral parameter.
    #[arg(long)]
    pub grid: Option<f64>,
    /// Band-edge tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Output file; defaults to a file in $MAGLAT_OUT_DIR or the working directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Output format; svg is available for butterfly only.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Worker threads.
    #[arg(long)]
    pub jobs: Option<i64>,
    /// Print the effective configuration as TOML and exit.
    #[arg(long)]
    pub dump_config: bool,
}

#[derive(Debug, Clone, Default, Args)]
pub struct RangeArgs {
    /// Largest momentum k in the positive regime.
    #[arg(long)]
    pub kmax: Option<f64>,
    /// Largest energy, an alternative to --kmax.
    #[arg(long)]
    pub emax: Option<f64>,
    /// Also scan negative energies.
    #[arg(long)]
    pub neg: bool,
    /// Largest κ in the negative regime.
    #[arg(long)]
    pub kappa_max: Option<f64>,
    /// Also scan the period window (nπ, (n+1)π).
    #[arg(long)]
    pub asymptotic: bool,
    /// Period index of the asymptotic window.
    #[arg(long)]
    pub n: Option<i64>,
}

#[derive(Debug, Clone, Args)]
pub struct BandsArgs {
    /// Flux numerator.
    #[arg(long)]
    pub p: Option<i64>,
    /// Flux denominator.
    #[arg(long)]
    pub q: Option<i64>,
    #[command(flatten)]
    pub range: RangeArgs,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ButterflyArgs {
    /// Largest denominator (default 12).
    #[arg(long)]
    pub qmax: Option<i64>,
    /// Include the non-magnetic lattice (flux 0/1).
    #[arg(long)]
    pub baseline: bool,
    /// Also write an SVG rendering next to the data file.
    #[arg(long)]
    pub svg: bool,
    #[command(flatten)]
    pub range: RangeArgs,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ProbArgs {
    /// Flux numerator; needs --q.
    #[arg(long)]
    pub p: Option<i64>,
    /// Denominator; without --p every coprime numerator is used.
    #[arg(long)]
    pub q: Option<i64>,
    /// Largest denominator when no --q is given (default 12).
    #[arg(long)]
    pub qmax: Option<i64>,
    /// Period index of the measured window.
    #[arg(long)]
    pub n: Option<i64>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args)]
pub struct StarArgs {
    /// Number of half-lines; without it degrees 3 to 12 are listed.
    #[arg(long)]
    pub degree: Option<i64>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Svg,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
            Format::Svg => "svg",
        }
    }
}

/// Every setting, each optional. Used for flags, the config file and the
/// `--dump-config` output.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct Settings {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub qmax: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kmax: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub emax: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub neg: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub asymptotic: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub baseline: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub svg: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub degree: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jobs: Option<i64>,
}

macro_rules! merge_fields {
    ($a:expr, $b:expr, $($f:ident),*) => {
        Settings { $($f: $a.$f.or($b.$f),)* }
    };
}

impl Settings {
    /// Field-wise `self` if set, otherwise `fallback`.
    pub fn or(self, fallback: Settings) -> Settings {
        merge_fields!(
            self, fallback, p, q, qmax, kmax, emax, neg, kappa_max, asymptotic, n, baseline, svg, degree, grid,
            tol, out, format, jobs
        )
    }

    pub fn from_file(path: &Path) -> Result<Settings> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("config file {}: {e}", path.display())))
    }
}

fn flag(b: bool) -> Option<bool> {
    b.then_some(true)
}

impl CommonArgs {
    fn settings(&self) -> Settings {
        Settings {
            grid: self.grid,
            tol: self.tol,
            out: self.out.clone(),
            format: self.format,
            jobs: self.jobs,
            ..Default::default()
        }
    }
}

impl RangeArgs {
    fn settings(&self) -> Settings {
        Settings {
            kmax: self.kmax,
            emax: self.emax,
            neg: flag(self.neg),
            kappa_max: self.kappa_max,
            asymptotic: flag(self.asymptotic),
            n: self.n,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CommandKind {
    Bands,
    Butterfly,
    Prob,
    Star,
}

impl CommandKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CommandKind::Bands => "bands",
            CommandKind::Butterfly => "butterfly",
            CommandKind::Prob => "prob",
            CommandKind::Star => "star",
        }
    }
}

impl Command {
    pub fn kind(&self) -> CommandKind {
        match self {
            Command::Bands(_) => CommandKind::Bands,
            Command::Butterfly(_) => CommandKind::Butterfly,
            Command::Prob(_) => CommandKind::Prob,
            Command::Star(_) => CommandKind::Star,
        }
    }

    fn common(&self) -> &CommonArgs {
        match self {
            Command::Bands(a) => &a.common,
            Command::Butterfly(a) => &a.common,
            Command::Prob(a) => &a.common,
            Command::Star(a) => &a.common,
        }
    }

    /// Settings given on the command line.
    pub fn flag_settings(&self) -> Settings {
        let common = self.common().settings();
        let specific = match self {
            Command::Bands(a) => Settings {
                p: a.p,
                q: a.q,
                ..a.range.settings()
            },
            Command::Butterfly(a) => Settings {
                qmax: a.qmax,
                baseline: flag(a.baseline),
                svg: flag(a.svg),
                ..a.range.settings()
            },
            Command::Prob(a) => Settings {
                p: a.p,
                q: a.q,
                qmax: a.qmax,
                n: a.n,
                ..Default::default()
            },
            Command::Star(a) => Settings {
                degree: a.degree,
                ..Default::default()
            },
        };
        specific.or(common)
    }

    pub fn config_path(&self) -> Option<&Path> {
        self.common().config.as_deref()
    }

    pub fn dump_config(&self) -> bool {
        self.common().dump_config
    }
}

/// Validated settings of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: CommandKind,
    pub fluxes: Vec<FluxRatio>,
    pub degrees: Vec<u32>,
    pub kmax: f64,
    pub neg: bool,
    pub kappa_max: f64,
    pub asymptotic: bool,
    pub n: u32,
    pub svg: bool,
    pub grid: f64,
    pub tol: f64,
    pub out: PathBuf,
    pub format: Format,
    pub jobs: usize,
    /// The effective settings, as printed by `--dump-config`.
    pub effective: Settings,
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(CliError::Usage(format!("--{name} must be positive, got {v}")))
    }
}

fn at_least(name: &str, v: i64, min: i64) -> Result<u32> {
    if v >= min && v <= u32::MAX as i64 {
        Ok(v as u32)
    } else {
        Err(CliError::Usage(format!("--{name} must be at least {min}, got {v}")))
    }
}

/// Magnetic ratios with denominator `q`, plus the baseline when asked.
pub fn enumerate_fluxes(qmax: u32, baseline: bool) -> Vec<FluxRatio> {
    let mut v = Vec::new();
    if baseline {
        v.push(FluxRatio::baseline());
    }
    v.extend(coprime_fluxes(qmax));
    sort_fluxes(&mut v);
    v
}

/// Ascending `p/q`, exact.
pub fn sort_fluxes(v: &mut [FluxRatio]) {
    v.sort_by(|a, b| {
        let l = a.p() as u64 * b.q() as u64;
        let r = b.p() as u64 * a.q() as u64;
        l.cmp(&r).then(a.q().cmp(&b.q()))
    });
}

fn default_out(command: CommandKind, s: &Settings, format: Format) -> PathBuf {
    let dir = std::env::var_os(OUT_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("."));
    let stem = match command {
        CommandKind::Bands => format!("bands_{}_{}", s.p.unwrap_or(0), s.q.unwrap_or(0)),
        CommandKind::Butterfly => format!("butterfly_q{}", s.qmax.unwrap_or(DEFAULT_QMAX as i64)),
        CommandKind::Prob => "prob".to_string(),
        CommandKind::Star => "star".to_string(),
    };
    dir.join(format!("{stem}.{}", format.extension()))
}

/// Merge flags over the config file and defaults, and validate.
pub fn resolve(command: &Command) -> Result<RunConfig> {
    let file = match command.config_path() {
        Some(path) => Settings::from_file(path)?,
        None => Settings::default(),
    };
    let kind = command.kind();
    let s = command.flag_settings().or(file);

    let grid = positive("grid", s.grid.unwrap_or(DEFAULT_GRID_DENSITY))?;
    let tol = positive("tol", s.tol.unwrap_or(DEFAULT_EDGE_TOL))?;
    let kappa_max = positive("kappa-max", s.kappa_max.unwrap_or(DEFAULT_KAPPA_MAX))?;
    let kmax = match (s.kmax, s.emax) {
        (Some(k), _) => positive("kmax", k)?,
        (None, Some(e)) => positive("emax", e)?.sqrt(),
        (None, None) => DEFAULT_KMAX,
    };
    let jobs = at_least("jobs", s.jobs.unwrap_or(1), 1)? as usize;
    let format = s.format.unwrap_or(Format::Csv);
    if format == Format::Svg && kind != CommandKind::Butterfly {
        return Err(CliError::Usage("--format svg is only available for butterfly".into()));
    }
    let default_n = if kind == CommandKind::Prob {
        DEFAULT_PROB_N
    } else {
        DEFAULT_ASYMPTOTIC_N
    };
    let n = at_least("n", s.n.unwrap_or(default_n as i64), 1)?;

    let mut effective = Settings {
        grid: Some(grid),
        tol: Some(tol),
        jobs: Some(jobs as i64),
        format: Some(format),
        ..Default::default()
    };
    let mut fluxes = Vec::new();
    let mut degrees = Vec::new();
    let mut asymptotic = false;
    let mut neg = false;
    let mut svg = false;
    match kind {
        CommandKind::Bands | CommandKind::Butterfly => {
            if kind == CommandKind::Bands {
                let (p, q) = match (s.p, s.q) {
                    (Some(p), Some(q)) => (p, q),
                    _ => return Err(CliError::Usage("bands needs --p and --q".into())),
                };
                fluxes.push(make_flux(p, q)?);
                effective.p = Some(p);
                effective.q = Some(q);
            } else {
                let qmax = at_least("qmax", s.qmax.unwrap_or(DEFAULT_QMAX as i64), 2)?;
                if qmax > SOFT_QMAX {
                    eprintln!("maglat: warning: qmax {qmax} is above {SOFT_QMAX}; runtime grows quickly with q");
                }
                let baseline = s.baseline.unwrap_or(false);
                fluxes = enumerate_fluxes(qmax, baseline);
                svg = s.svg.unwrap_or(false);
                effective.qmax = Some(qmax as i64);
                effective.baseline = Some(baseline);
                effective.svg = Some(svg);
            }
            neg = s.neg.unwrap_or(false);
            asymptotic = s.asymptotic.unwrap_or(false);
            effective.kmax = Some(kmax);
            effective.neg = Some(neg);
            effective.kappa_max = Some(kappa_max);
            effective.asymptotic = Some(asymptotic);
            effective.n = Some(n as i64);
        }
        CommandKind::Prob => {
            match (s.p, s.q, s.qmax) {
                (Some(p), Some(q), _) => {
                    fluxes.push(make_flux(p, q)?);
                    effective.p = Some(p);
                    effective.q = Some(q);
                }
                (None, Some(q), _) => {
                    let q = at_least("q", q, 2)?;
                    fluxes = coprime_fluxes(q).into_iter().filter(|f| f.q() == q).collect();
                    effective.q = Some(q as i64);
                }
                (Some(_), None, _) => return Err(CliError::Usage("--p needs --q".into())),
                (None, None, qmax) => {
                    let qmax = at_least("qmax", qmax.unwrap_or(DEFAULT_QMAX as i64), 2)?;
                    fluxes = enumerate_fluxes(qmax, false);
                    effective.qmax = Some(qmax as i64);
                }
            }
            effective.n = Some(n as i64);
        }
        CommandKind::Star => {
            degrees = match s.degree {
                Some(d) => vec![at_least("degree", d, 3)?],
                None => (3..=12).collect(),
            };
            effective.degree = s.degree;
        }
    }
    let out = s.out.clone().unwrap_or_else(|| default_out(kind, &effective, format));
    effective.out = Some(out.clone());

    Ok(RunConfig {
        command: kind,
        fluxes,
        degrees,
        kmax,
        neg,
        kappa_max,
        asymptotic,
        n,
        svg,
        grid,
        tol,
        out,
        format,
        jobs,
        effective,
    })
}
