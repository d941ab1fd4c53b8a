//! Experiment files: a single TOML schema shared by every subcommand.
//!
//! Parsing collects every violation it can find before giving up, and
//! [`ExperimentConfig::resolve`] expands defaults so the echoed file fully
//! describes the run.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use anneal_core::fokker_planck::Boundary;
use anneal_core::sde::DriftCapMode;
use anneal_core::spectral::Prefactor;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Run,
    Absorption,
    Barriers,
    Gibbs,
    Spectral,
    Fp1d,
    Phase,
    Explosion,
}

impl Kind {
    pub fn as_str(self) -> &'static str {
        match self {
            Kind::Run => "run",
            Kind::Absorption => "absorption",
            Kind::Barriers => "barriers",
            Kind::Gibbs => "gibbs",
            Kind::Spectral => "spectral",
            Kind::Fp1d => "fp1d",
            Kind::Phase => "phase",
            Kind::Explosion => "explosion",
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub experiment: Kind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    pub potential: PotentialSpec,
    #[serde(default)]
    pub schedule: ScheduleSpec,
    #[serde(default)]
    pub budget: Budget,
    #[serde(default)]
    pub events: Events,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<DomainSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub torus: Option<TorusCfg>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fp: Option<FpCfg>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectral: Option<SpectralCfg>,
    #[serde(default)]
    pub checks: Checks,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralCfg {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prefactor: Option<Prefactor>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSpec {
    pub name: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    /// `c = multiplier · c*`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub multiplier: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub multipliers: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta0: Option<f64>,
    /// Fixed inverse temperature instead of annealing.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constant_beta: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Budget {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_paths: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoints: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drift_cap: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drift_mode: Option<DriftCapMode>,
    /// Grid nodes per axis (barriers, gibbs) or ring size (spectral).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub betas: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Events {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a_level: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_levels: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_box: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explosion_radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exit_radii: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alphas: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha0: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TorusCfg {
    pub level: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub half_width: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub margin: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialKind {
    Uniform,
    Gaussian,
    Gibbs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FpCfg {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cells: Option<usize>,
    /// Step size; defaults to 0.9 of the stability bound.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary: Option<Boundary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sd: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chi_square: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub densities: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checks {
    /// `run`: fail when the final `P(U > ε)` exceeds this.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_final_exceed: Option<f64>,
    /// `spectral`: fail when the fitted rate is further than this relative
    /// distance from the torus `c*`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_rel_tol: Option<f64>,
    /// `phase`: allowed drop between neighbouring multipliers, in standard
    /// errors.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub monotone_se: Option<f64>,
    /// `fp1d`: slack allowed in the integrated entropy inequality.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entropy_tol: Option<f64>,
}

const TOP_KEYS: &[&str] = &[
    "schema_version",
    "experiment",
    "name",
    "seed",
    "workers",
    "out_dir",
    "potential",
    "schedule",
    "budget",
    "events",
    "domain",
    "torus",
    "fp",
    "spectral",
    "checks",
];

const TABLE_KEYS: &[(&str, &[&str])] = &[
    ("potential", &["name", "params"]),
    ("schedule", &["c", "multiplier", "multipliers", "beta0", "constant_beta"]),
    (
        "budget",
        &["n_paths", "horizon", "checkpoints", "dt_max", "dt_min", "drift_cap", "drift_mode", "resolution", "betas"],
    ),
    (
        "events",
        &["eps", "x0", "a_level", "k_levels", "sample_box", "explosion_radius", "exit_radii", "alphas", "alpha0"],
    ),
    ("domain", &["lo", "hi"]),
    ("torus", &["level", "half_width", "margin"]),
    (
        "fp",
        &["cells", "dt", "boundary", "initial", "mean", "sd", "initial_beta", "chi_square", "densities"],
    ),
    ("spectral", &["prefactor"]),
    ("checks", &["max_final_exceed", "rate_rel_tol", "monotone_se", "entropy_tol"]),
];

fn unknown_keys(table: &toml::Table) -> Vec<String> {
    let mut out = Vec::new();
    for (k, v) in table {
        if !TOP_KEYS.contains(&k.as_str()) {
            out.push(format!("unknown key `{k}`"));
            continue;
        }
        if let Some((_, allowed)) = TABLE_KEYS.iter().find(|(t, _)| t == k) {
            match v.as_table() {
                Some(sub) => {
                    for sk in sub.keys() {
                        if !allowed.contains(&sk.as_str()) {
                            out.push(format!("unknown key `{k}.{sk}`"));
                        }
                    }
                }
                None => out.push(format!("`{k}` must be a table")),
            }
        }
    }
    out
}

impl ExperimentConfig {
    /// Parses and validates a config file.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text)
    }

    /// Parses and validates TOML text. All violations are reported together.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| CliError::Validation(vec![e.message().to_string()]))?;
        let mut violations = unknown_keys(&table);
        for key in ["schema_version", "experiment", "potential"] {
            if !table.contains_key(key) {
                violations.push(format!("missing required key `{key}`"));
            }
        }
        if !violations.is_empty() {
            return Err(CliError::Validation(violations));
        }
        let cfg: ExperimentConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Validation(vec![e.message().to_string()]))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn name(&self) -> String {
        self.name.clone().unwrap_or_else(|| self.experiment.to_string())
    }

    /// Checks ranges and exclusivity. Collects every violation.
    pub fn validate(&self) -> Result<(), CliError> {
        let mut v = Vec::new();
        if self.schema_version != SCHEMA_VERSION {
            v.push(format!(
                "schema_version: unsupported version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        if let Some(name) = &self.name {
            if name.is_empty() || name.contains(['/', '\\']) || name.starts_with('.') {
                v.push("name: must be a plain, non-empty file name".into());
            }
        }
        if let Some(seed) = self.seed {
            if seed > i64::MAX as u64 {
                v.push("seed: must be < 2^63".into());
            }
        }
        if self.workers == Some(0) {
            v.push("workers: must be >= 1".into());
        }
        let s = &self.schedule;
        if s.c.is_some() && s.multiplier.is_some() {
            v.push("schedule.c and schedule.multiplier are mutually exclusive".into());
        }
        if s.constant_beta.is_some() && (s.c.is_some() || s.multiplier.is_some()) {
            v.push("schedule.constant_beta excludes schedule.c and schedule.multiplier".into());
        }
        positive(&mut v, "schedule.c", s.c);
        positive(&mut v, "schedule.multiplier", s.multiplier);
        positive(&mut v, "schedule.beta0", s.beta0);
        positive(&mut v, "schedule.constant_beta", s.constant_beta);
        if let Some(ms) = &s.multipliers {
            if ms.is_empty() || ms.iter().any(|m| !(*m > 0.0 && m.is_finite())) {
                v.push("schedule.multipliers: must be a non-empty list of positive numbers".into());
            }
        }
        let b = &self.budget;
        positive(&mut v, "budget.horizon", b.horizon);
        positive(&mut v, "budget.dt_max", b.dt_max);
        positive(&mut v, "budget.dt_min", b.dt_min);
        positive(&mut v, "budget.drift_cap", b.drift_cap);
        if let (Some(lo), Some(hi)) = (b.dt_min, b.dt_max) {
            if lo > hi {
                v.push("budget.dt_min: must not exceed budget.dt_max".into());
            }
        }
        if let Some(cp) = &b.checkpoints {
            if cp.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
                v.push("budget.checkpoints: times must be positive".into());
            }
            if let Some(h) = b.horizon {
                if cp.iter().any(|t| *t > h) {
                    v.push("budget.checkpoints: times must not exceed budget.horizon".into());
                }
            }
        }
        if let Some(betas) = &b.betas {
            if betas.is_empty() || betas.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
                v.push("budget.betas: must be a non-empty list of positive numbers".into());
            }
        }
        if b.resolution.is_some_and(|r| r < 2) {
            v.push("budget.resolution: must be >= 2".into());
        }
        let e = &self.events;
        positive(&mut v, "events.eps", e.eps);
        positive(&mut v, "events.sample_box", e.sample_box);
        positive(&mut v, "events.alpha0", e.alpha0);
        if let Some(r) = e.explosion_radius {
            if !(r >= 1e4) {
                v.push("events.explosion_radius: must be >= 1e4".into());
            }
        }
        if let Some(alphas) = &e.alphas {
            if alphas.is_empty() || alphas.iter().any(|a| !(*a > 0.0)) {
                v.push("events.alphas: must be a non-empty list of positive numbers".into());
            }
        }
        if let Some(x0) = &e.x0 {
            if x0.iter().any(|x| !x.is_finite()) {
                v.push("events.x0: must be finite".into());
            }
        }
        if let Some(d) = &self.domain {
            if d.lo.is_empty() || d.lo.len() != d.hi.len() {
                v.push("domain: lo and hi must have the same non-zero length".into());
            } else if d.lo.iter().zip(&d.hi).any(|(l, h)| !(l < h)) {
                v.push("domain: need lo < hi on every axis".into());
            }
        }
        if let Some(t) = &self.torus {
            positive(&mut v, "torus.level", Some(t.level));
            positive(&mut v, "torus.half_width", t.half_width);
            positive(&mut v, "torus.margin", t.margin);
        }
        if let Some(fp) = &self.fp {
            positive(&mut v, "fp.dt", fp.dt);
            positive(&mut v, "fp.sd", fp.sd);
            positive(&mut v, "fp.initial_beta", fp.initial_beta);
            if fp.cells.is_some_and(|c| c < 3) {
                v.push("fp.cells: must be >= 3".into());
            }
        }
        self.validate_kind(&mut v);
        if v.is_empty() {
            Ok(())
        } else {
            Err(CliError::Validation(v))
        }
    }

    fn validate_kind(&self, v: &mut Vec<String>) {
        let s = &self.schedule;
        let annealed = matches!(self.experiment, Kind::Run | Kind::Absorption | Kind::Fp1d);
        if annealed && s.constant_beta.is_none() && s.c.is_none() && s.multiplier.is_none() {
            v.push(format!("{}: set schedule.c, schedule.multiplier or schedule.constant_beta", self.experiment));
        }
        match self.experiment {
            Kind::Phase => {
                if s.multipliers.is_none() {
                    v.push("phase: schedule.multipliers is required".into());
                }
                if s.c.is_some() || s.multiplier.is_some() || s.constant_beta.is_some() {
                    v.push("phase: schedule.c, schedule.multiplier and schedule.constant_beta are not allowed".into());
                }
            }
            Kind::Run => {
                if self.events.x0.is_none() {
                    v.push("run: events.x0 is required".into());
                }
            }
            Kind::Absorption => {
                if self.events.a_level.is_none() {
                    v.push("absorption: events.a_level is required".into());
                }
                if self.events.k_levels.as_ref().is_none_or(|k| k.is_empty()) {
                    v.push("absorption: events.k_levels is required".into());
                }
            }
            Kind::Explosion => {
                if self.events.alphas.is_none() {
                    v.push("explosion: events.alphas is required".into());
                }
                if s.c.is_some() || s.multiplier.is_some() {
                    v.push("explosion: runs at constant_beta; schedule.c and schedule.multiplier are not allowed".into());
                }
            }
            Kind::Spectral => {
                if self.torus.is_none() {
                    v.push("spectral: a [torus] table is required".into());
                }
            }
            Kind::Fp1d => {
                if self.domain.is_none() && self.torus.is_none() {
                    v.push("fp1d: set [domain] (no-flux box) or [torus] (periodic)".into());
                }
            }
            Kind::Barriers | Kind::Gibbs => {}
        }
        if let Some(m) = &s.multipliers {
            if self.experiment != Kind::Phase && !m.is_empty() {
                v.push(format!("{}: schedule.multipliers only applies to phase", self.experiment));
            }
        }
    }

    /// Fills every default the selected experiment uses.
    pub fn resolve(&self) -> Self {
        let mut r = self.clone();
        r.seed.get_or_insert(0);
        r.workers.get_or_insert(1);
        let needs_paths = matches!(self.experiment, Kind::Run | Kind::Absorption | Kind::Phase | Kind::Explosion);
        if needs_paths {
            let b = &mut r.budget;
            let explosion = self.experiment == Kind::Explosion;
            b.n_paths.get_or_insert(if explosion { 1000 } else { 500 });
            let horizon = *b.horizon.get_or_insert(if explosion { 10.0 } else { 1e4 });
            b.dt_max.get_or_insert(if explosion { 1e-2 } else { 5e-3 });
            b.drift_cap.get_or_insert(if explosion { 0.05 } else { 0.1 });
            b.dt_min.get_or_insert(if explosion { 1e-200 } else { 1e-12 });
            b.drift_mode
                .get_or_insert(if explosion { DriftCapMode::Relative } else { DriftCapMode::Absolute });
            if !explosion {
                b.checkpoints
                    .get_or_insert_with(|| anneal_core::sde::log_checkpoints(horizon, 4));
            }
            if matches!(self.experiment, Kind::Run | Kind::Phase) {
                r.events.eps.get_or_insert(0.2);
            }
            if explosion {
                r.events.explosion_radius.get_or_insert(1e60);
                r.schedule.constant_beta.get_or_insert(1.0);
            } else if r.schedule.constant_beta.is_none() {
                r.schedule.beta0.get_or_insert(1.0);
            }
            if self.experiment == Kind::Phase {
                r.checks.monotone_se.get_or_insert(2.0);
            }
            if self.experiment == Kind::Absorption {
                r.events.sample_box.get_or_insert(4.0);
            }
        }
        match self.experiment {
            Kind::Barriers => {
                r.budget.resolution.get_or_insert(401);
            }
            Kind::Gibbs => {
                r.budget.betas.get_or_insert_with(|| vec![1.0, 2.0, 4.0, 8.0, 16.0]);
                r.events.eps.get_or_insert(0.2);
                r.events.alpha0.get_or_insert(0.5);
            }
            Kind::Spectral => {
                r.budget.resolution.get_or_insert(512);
                r.budget
                    .betas
                    .get_or_insert_with(|| (0..9).map(|i| 4.0 + i as f64).collect());
                r.checks.rate_rel_tol.get_or_insert(0.15);
                r.spectral
                    .get_or_insert(SpectralCfg { prefactor: None })
                    .prefactor
                    .get_or_insert(Prefactor::Kramers);
            }
            Kind::Fp1d => {
                if r.schedule.constant_beta.is_none() {
                    r.schedule.beta0.get_or_insert(1.0);
                }
                let horizon = *r.budget.horizon.get_or_insert(10.0);
                r.budget
                    .checkpoints
                    .get_or_insert_with(|| (1..=10).map(|k| horizon * k as f64 / 10.0).collect());
                r.events.alpha0.get_or_insert(0.5);
                r.checks.entropy_tol.get_or_insert(1e-6);
                let periodic = self.torus.is_some();
                let fp = r.fp.get_or_insert(FpCfg {
                    cells: None,
                    dt: None,
                    boundary: None,
                    initial: None,
                    mean: None,
                    sd: None,
                    initial_beta: None,
                    chi_square: None,
                    densities: None,
                });
                fp.cells.get_or_insert(400);
                fp.boundary
                    .get_or_insert(if periodic { Boundary::Periodic } else { Boundary::NoFlux });
                fp.initial.get_or_insert(InitialKind::Uniform);
                fp.chi_square.get_or_insert(periodic);
                fp.densities.get_or_insert(false);
            }
            _ => {}
        }
        if let Some(t) = &mut r.torus {
            t.margin.get_or_insert(0.1);
        }
        r
    }
}

fn positive(v: &mut Vec<String>, key: &str, value: Option<f64>) {
    if let Some(x) = value {
        if !(x > 0.0 && x.is_finite()) {
            v.push(format!("{key}: must be a positive finite number (got {x})"));
        }
    }
}
