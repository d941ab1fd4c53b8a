//! Command-line driver: argument parsing, experiment configs and result files.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use anneal_core::spectral::Prefactor;
use anneal_core::Potential;
use clap::{Args, Parser, Subcommand};

use crate::config::{DomainSpec, ExperimentConfig, Kind, PotentialSpec, SpectralCfg, TorusCfg, SCHEMA_VERSION};
use crate::error::{exit, CliError};

#[derive(Debug, Parser)]
#[command(name = "anneal", version, about = "Continuous-time simulated annealing experiments")]
pub struct Cli {
    /// Master seed (overrides the config).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (overrides the config). Results do not depend on it.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Output directory (overrides the config and ANNEAL_OUT_DIR).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the experiment described by a config file.
    Run {
        #[arg(long, visible_alias = "experiment", value_name = "PATH")]
        config: PathBuf,
    },
    /// Critical depth by a sublevel sweep on a grid.
    Barriers(Quick),
    /// Partition function, tail mass and tail bound over a list of β.
    Gibbs(Quick),
    /// Spectral gap of the torus generator and its decay rate.
    Spectral(Quick),
    /// One-dimensional Fokker–Planck evolution.
    Fp1d(Quick),
    /// Success probability across multiples of c*.
    Phase {
        #[arg(long, value_name = "PATH")]
        config: PathBuf,
    },
    /// Explosion fractions for U = −(1+|x|²)^α.
    Explosion {
        #[arg(long, value_name = "PATH")]
        config: PathBuf,
    },
    /// Validate a config and print it with defaults expanded.
    Validate {
        #[arg(value_name = "PATH")]
        config: PathBuf,
    },
}

/// Inline flags for the analytics subcommands. They override `--config`.
#[derive(Debug, Args, Default)]
pub struct Quick {
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub potential: Option<String>,
    /// Potential parameter, repeatable.
    #[arg(long = "param", value_name = "KEY=VALUE", value_parser = parse_param)]
    pub params: Vec<(String, f64)>,
    /// Box `lo,hi` applied to every axis.
    #[arg(long, value_name = "LO,HI", value_delimiter = ',', num_args = 1, allow_hyphen_values = true)]
    pub bounds: Option<Vec<f64>>,
    #[arg(long)]
    pub resolution: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub betas: Option<Vec<f64>>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub alpha0: Option<f64>,
    /// Cap level `K` of the torus potential.
    #[arg(long)]
    pub torus_level: Option<f64>,
    #[arg(long)]
    pub half_width: Option<f64>,
    #[arg(long, value_enum)]
    pub prefactor: Option<PrefactorArg>,
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long)]
    pub beta0: Option<f64>,
    #[arg(long)]
    pub horizon: Option<f64>,
    #[arg(long)]
    pub cells: Option<usize>,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum PrefactorArg {
    Hks,
    Kramers,
    None,
}

impl From<PrefactorArg> for Prefactor {
    fn from(p: PrefactorArg) -> Self {
        match p {
            PrefactorArg::Hks => Prefactor::Hks,
            PrefactorArg::Kramers => Prefactor::Kramers,
            PrefactorArg::None => Prefactor::None,
        }
    }
}

fn parse_param(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or("expected KEY=VALUE")?;
    let v: f64 = v.trim().parse().map_err(|e| format!("{k}: {e}"))?;
    Ok((k.trim().to_string(), v))
}

impl Quick {
    fn into_config(self, kind: Kind) -> Result<ExperimentConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => {
                let cfg = ExperimentConfig::load(path)?;
                if cfg.experiment != kind {
                    return Err(CliError::invalid(format!(
                        "{}: experiment is \"{}\", expected \"{kind}\"",
                        path.display(),
                        cfg.experiment
                    )));
                }
                cfg
            }
            None => {
                let name = self
                    .potential
                    .clone()
                    .ok_or_else(|| CliError::invalid("--potential or --config is required"))?;
                ExperimentConfig {
                    schema_version: SCHEMA_VERSION,
                    experiment: kind,
                    name: None,
                    seed: None,
                    workers: None,
                    out_dir: None,
                    potential: PotentialSpec {
                        name,
                        params: BTreeMap::new(),
                    },
                    schedule: Default::default(),
                    budget: Default::default(),
                    events: Default::default(),
                    domain: None,
                    torus: None,
                    fp: None,
                    spectral: None,
                    checks: Default::default(),
                }
            }
        };
        if let Some(name) = self.potential {
            cfg.potential.name = name;
        }
        cfg.potential.params.extend(self.params);
        if let Some(b) = self.bounds {
            let dim = anneal_core::builtin(&cfg.potential.name, &cfg.potential.params)?.meta().dim;
            cfg.domain = Some(DomainSpec {
                lo: vec![b[0]; dim],
                hi: vec![b[1]; dim],
            });
        }
        if let Some(level) = self.torus_level {
            let t = cfg.torus.get_or_insert(TorusCfg {
                level,
                half_width: None,
                margin: None,
            });
            t.level = level;
        }
        if let Some(hw) = self.half_width {
            match cfg.torus.as_mut() {
                Some(t) => t.half_width = Some(hw),
                None => return Err(CliError::invalid("--half-width needs --torus-level")),
            }
        }
        if kind == Kind::Spectral && cfg.torus.is_none() {
            cfg.torus = Some(TorusCfg {
                level: 5.0,
                half_width: None,
                margin: None,
            });
        }
        if let Some(pf) = self.prefactor {
            cfg.spectral = Some(SpectralCfg {
                prefactor: Some(pf.into()),
            });
        }
        set(&mut cfg.budget.resolution, self.resolution);
        set(&mut cfg.budget.betas, self.betas);
        set(&mut cfg.budget.horizon, self.horizon);
        set(&mut cfg.events.eps, self.eps);
        set(&mut cfg.events.alpha0, self.alpha0);
        set(&mut cfg.schedule.beta0, self.beta0);
        if let Some(c) = self.c {
            cfg.schedule.c = Some(c);
            cfg.schedule.multiplier = None;
        }
        if let Some(cells) = self.cells {
            cfg.fp.get_or_insert_with(|| toml::from_str("").expect("empty fp table")).cells = Some(cells);
        }
        Ok(cfg)
    }
}

fn set<T>(slot: &mut Option<T>, v: Option<T>) {
    if v.is_some() {
        *slot = v;
    }
}

fn load_kind(path: &Path, kind: Option<Kind>) -> Result<ExperimentConfig, CliError> {
    let cfg = ExperimentConfig::load(path)?;
    if let Some(k) = kind {
        if cfg.experiment != k {
            return Err(CliError::invalid(format!(
                "{}: experiment is \"{}\", expected \"{k}\"",
                path.display(),
                cfg.experiment
            )));
        }
    }
    Ok(cfg)
}

/// Parses arguments, runs, and returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { exit::VALIDATION } else { exit::OK };
        }
    };
    match run(cli) {
        Ok(()) => exit::OK,
        Err(e) => {
            let _ = writeln!(io::stderr(), "error ({}): {e}", e.kind());
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = match cli.command {
        Command::Run { config } => load_kind(&config, None)?,
        Command::Phase { config } => load_kind(&config, Some(Kind::Phase))?,
        Command::Explosion { config } => load_kind(&config, Some(Kind::Explosion))?,
        Command::Barriers(q) => q.into_config(Kind::Barriers)?,
        Command::Gibbs(q) => q.into_config(Kind::Gibbs)?,
        Command::Spectral(q) => q.into_config(Kind::Spectral)?,
        Command::Fp1d(q) => q.into_config(Kind::Fp1d)?,
        Command::Validate { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let _ = write!(io::stdout(), "{}", cfg.resolve().to_toml());
            return Ok(());
        }
    };
    set(&mut cfg.seed, cli.seed);
    set(&mut cfg.workers, cli.workers);
    let report = commands::execute(&cfg, cli.out.as_deref())?;
    // a closed stdout (e.g. piped into `head`) is not an error of the run
    let _ = writeln!(io::stdout(), "{}", serde_json::to_string_pretty(&report.summary).expect("serializable"));
    let _ = writeln!(io::stderr(), "wrote {}", report.dir.display());
    Ok(())
}
