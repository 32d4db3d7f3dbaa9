//! Flat key=value run configuration with [section] headers. The schema is
//! strict: unknown sections or keys abort before any compute starts.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use wkam::commute::LadderLevel;

#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputFormat {
    Bin,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AubrySourceCfg {
    Peierls,
    Pairs,
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub profile: Option<String>,
    pub model_g: String,
    pub model_h: Option<String>,
    pub grid_n: usize,
    pub tau: f64,
    pub solver_tol: f64,
    pub max_iter: usize,
    pub n_p: usize,
    pub n_v: usize,
    // alpha sweep
    pub c_min: f64,
    pub c_max: f64,
    pub c_count: usize,
    pub tol_flat: Option<f64>,
    // aubry
    pub aubry_eps: Option<f64>,
    pub aubry_source: AubrySourceCfg,
    // peierls
    pub barrier_tol: f64,
    pub barrier_k_max: usize,
    // commute
    pub horizon: f64,
    pub ladder: Vec<LadderLevel>,
    pub expect: String,
    pub control_h: String,
    pub control_expect: String,
    pub commute_c_count: usize,
    // regularize
    pub rounds: usize,
    pub eps1: f64,
    pub reg_alpha: Option<f64>,
    // io
    pub out_dir: PathBuf,
    pub cache_dir: Option<PathBuf>,
    pub no_cache: bool,
    pub format: OutputFormat,
    pub threads: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            profile: None,
            model_g: "pendulum(1)".into(),
            model_h: Some("composed(pendulum(1), affine:2,1)".into()),
            grid_n: 128,
            tau: 0.05,
            solver_tol: 1e-9,
            max_iter: 50_000,
            n_p: 513,
            n_v: 257,
            c_min: -2.0,
            c_max: 2.0,
            c_count: 33,
            tol_flat: None,
            aubry_eps: None,
            aubry_source: AubrySourceCfg::Peierls,
            barrier_tol: 1e-9,
            barrier_k_max: 1 << 22,
            horizon: 0.2,
            ladder: vec![
                LadderLevel { n: 64, tau: 0.1 },
                LadderLevel { n: 128, tau: 0.05 },
                LadderLevel { n: 256, tau: 0.025 },
            ],
            expect: "pass".into(),
            control_h: "pendulum(1,2)".into(),
            control_expect: "fail".into(),
            commute_c_count: 33,
            rounds: 6,
            eps1: 10.0,
            reg_alpha: None,
            out_dir: PathBuf::from("wkam-out"),
            cache_dir: None,
            no_cache: false,
            format: OutputFormat::Bin,
            threads: 0,
        }
    }
}

fn parse_num<T: std::str::FromStr>(section: &str, key: &str, v: &str) -> Result<T, ConfigError> {
    v.parse::<T>()
        .map_err(|_| ConfigError(format!("bad value '{v}' for {section}.{key}")))
}

fn parse_ladder(v: &str) -> Result<Vec<LadderLevel>, ConfigError> {
    let mut out = Vec::new();
    for part in v.split(',') {
        let (n, tau) = part
            .trim()
            .split_once(':')
            .ok_or_else(|| ConfigError(format!("ladder entry '{part}' is not n:tau")))?;
        out.push(LadderLevel {
            n: parse_num("commute", "ladder", n.trim())?,
            tau: parse_num("commute", "ladder", tau.trim())?,
        });
    }
    if out.is_empty() {
        return Err(ConfigError("empty ladder".into()));
    }
    Ok(out)
}

fn parse_optional(v: &str, section: &str, key: &str) -> Result<Option<f64>, ConfigError> {
    if v == "auto" {
        Ok(None)
    } else {
        Ok(Some(parse_num(section, key, v)?))
    }
}

impl RunConfig {
    /// Parse the file (when given) onto the defaults; strict schema.
    pub fn load(path: Option<&Path>) -> Result<RunConfig, ConfigError> {
        let mut cfg = RunConfig::default();
        let Some(path) = path else {
            return Ok(cfg);
        };
        let text = std::fs::read_to_string(path)
            .map_err(|_| ConfigError(format!("not found ({})", path.display())))?;
        let mut section = String::new();
        let mut seen = BTreeSet::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                section = name.trim().to_string();
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError(format!("line {}: expected key = value", lineno + 1)));
            };
            let key = key.trim();
            let value = value.trim();
            if !seen.insert(format!("{section}.{key}")) {
                return Err(ConfigError(format!("duplicate key {section}.{key}")));
            }
            cfg.apply(&section, key, value)?;
        }
        Ok(cfg)
    }

    fn apply(&mut self, section: &str, key: &str, value: &str) -> Result<(), ConfigError> {
        match (section, key) {
            ("run", "profile") => self.profile = Some(value.to_string()),
            ("model", "g") => self.model_g = value.to_string(),
            ("model", "h") => {
                self.model_h = if value.is_empty() { None } else { Some(value.to_string()) }
            }
            ("grid", "n") => self.grid_n = parse_num(section, key, value)?,
            ("grid", "tau") => self.tau = parse_num(section, key, value)?,
            ("solver", "tol") => self.solver_tol = parse_num(section, key, value)?,
            ("solver", "max_iter") => self.max_iter = parse_num(section, key, value)?,
            ("transform", "n_p") => self.n_p = parse_num(section, key, value)?,
            ("transform", "n_v") => self.n_v = parse_num(section, key, value)?,
            ("alpha", "c_min") => self.c_min = parse_num(section, key, value)?,
            ("alpha", "c_max") => self.c_max = parse_num(section, key, value)?,
            ("alpha", "c_count") => self.c_count = parse_num(section, key, value)?,
            ("alpha", "tol_flat") => self.tol_flat = parse_optional(value, section, key)?,
            ("aubry", "eps") => self.aubry_eps = parse_optional(value, section, key)?,
            ("aubry", "source") => {
                self.aubry_source = match value {
                    "peierls" => AubrySourceCfg::Peierls,
                    "pairs" => AubrySourceCfg::Pairs,
                    _ => return Err(ConfigError(format!("bad aubry.source '{value}'"))),
                }
            }
            ("peierls", "tol") => self.barrier_tol = parse_num(section, key, value)?,
            ("peierls", "k_max") => self.barrier_k_max = parse_num(section, key, value)?,
            ("commute", "horizon") => self.horizon = parse_num(section, key, value)?,
            ("commute", "ladder") => self.ladder = parse_ladder(value)?,
            ("commute", "expect") => self.expect = check_verdict_word(value)?,
            ("commute", "control_h") => self.control_h = value.to_string(),
            ("commute", "control_expect") => self.control_expect = check_verdict_word(value)?,
            ("commute", "c_count") => self.commute_c_count = parse_num(section, key, value)?,
            ("regularize", "rounds") => self.rounds = parse_num(section, key, value)?,
            ("regularize", "eps1") => self.eps1 = parse_num(section, key, value)?,
            ("regularize", "alpha") => self.reg_alpha = parse_optional(value, section, key)?,
            ("io", "out") => self.out_dir = PathBuf::from(value),
            ("io", "cache") => self.cache_dir = Some(PathBuf::from(value)),
            ("io", "no_cache") => {
                self.no_cache = parse_num::<bool>(section, key, value)?;
            }
            ("io", "format") => {
                self.format = match value {
                    "bin" => OutputFormat::Bin,
                    "csv" => OutputFormat::Csv,
                    _ => return Err(ConfigError(format!("bad io.format '{value}'"))),
                }
            }
            ("io", "threads") => self.threads = parse_num(section, key, value)?,
            _ => {
                return Err(ConfigError(format!(
                    "unknown key '{key}' in section '[{section}]'"
                )))
            }
        }
        Ok(())
    }

    /// Validate cross-field constraints after overrides.
    pub fn validate(&self, subcommand: &str) -> Result<(), ConfigError> {
        if let Some(p) = &self.profile {
            if p != subcommand {
                return Err(ConfigError(format!(
                    "profile '{p}' does not match subcommand '{subcommand}'"
                )));
            }
        }
        if !(self.tau > 0.0) {
            return Err(ConfigError("grid.tau must be positive".into()));
        }
        if self.grid_n < 4 {
            return Err(ConfigError("grid.n must be at least 4".into()));
        }
        if !(self.solver_tol > 0.0) {
            return Err(ConfigError("solver.tol must be positive".into()));
        }
        if self.c_count < 2 {
            return Err(ConfigError("alpha.c_count must be at least 2".into()));
        }
        if self.rounds == 0 {
            return Err(ConfigError("regularize.rounds must be positive".into()));
        }
        Ok(())
    }
}

fn check_verdict_word(v: &str) -> Result<String, ConfigError> {
    match v {
        "pass" | "fail" | "inconclusive" => Ok(v.to_string()),
        _ => Err(ConfigError(format!("bad verdict '{v}'"))),
    }
}
