//! Plain-text `key = value` run configuration.

use std::fmt;
use std::path::{Path, PathBuf};

use gmcr::pic::SimConfig;
use gmcr::pipeline::SpeciesParams;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub sim: SimConfig,
    /// Charge and mass given to every species of a standalone particle dump.
    pub species: SpeciesParams,
    pub output_dir: PathBuf,
    /// Diagnostics CSV, relative to `output_dir`.
    pub diagnostics_file: String,
    pub checkpoint_at: Vec<f64>,
    pub checkpoint_prefix: String,
    pub phase_dump_at: Vec<f64>,
    pub phase_dump_prefix: String,
    /// Full particle dumps (`x,v,alpha,species`) for the standalone tools.
    pub particle_dump_at: Vec<f64>,
    pub particle_dump_prefix: String,
    pub lemons: bool,
    /// Implicit steps timed by `bench-em`.
    pub bench_steps: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            sim: SimConfig::default(),
            species: SpeciesParams::default(),
            output_dir: PathBuf::from("."),
            diagnostics_file: "diagnostics.csv".into(),
            checkpoint_at: Vec::new(),
            checkpoint_prefix: "checkpoint".into(),
            phase_dump_at: Vec::new(),
            phase_dump_prefix: "phase".into(),
            particle_dump_at: Vec::new(),
            particle_dump_prefix: "particles".into(),
            lemons: true,
            bench_steps: 5,
        }
    }
}

/// Every accepted key, in documentation order.
pub const KEYS: &[&str] = &[
    "length",
    "nx",
    "dt",
    "particles_per_cell",
    "beam_speed",
    "end_time",
    "picard_tol",
    "picard_max_iters",
    "seed",
    "jitter",
    "perturbation",
    "solver_tol",
    "k_max",
    "fit_tol",
    "max_iters",
    "annihilate",
    "covariance_floor",
    "min_particles",
    "charge",
    "mass",
    "output_dir",
    "diagnostics_file",
    "checkpoint_at",
    "checkpoint_prefix",
    "phase_dump_at",
    "phase_dump_prefix",
    "particle_dump_at",
    "particle_dump_prefix",
    "lemons",
    "bench_steps",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    /// File path, or `--set` for command-line overrides.
    pub source: String,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "{}:{}: {}", self.source, l, self.message),
            None => write!(f, "{}: {}", self.source, self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

fn num<T: std::str::FromStr>(v: &str) -> Result<T, String>
where
    T::Err: fmt::Display,
{
    v.parse::<T>().map_err(|e| format!("{v:?}: {e}"))
}

fn boolean(v: &str) -> Result<bool, String> {
    match v {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(format!("{v:?} is not a boolean")),
    }
}

/// Comma-separated times; empty or `none` gives an empty list.
pub fn times(v: &str) -> Result<Vec<f64>, String> {
    if v.is_empty() || v == "none" {
        return Ok(Vec::new());
    }
    v.split(',')
        .map(|t| {
            let t = t.trim();
            let x: f64 = num(t)?;
            if !(x >= 0.0) || !x.is_finite() {
                return Err(format!("time {t:?} must be finite and nonnegative"));
            }
            Ok(x)
        })
        .collect()
}

fn name(v: &str) -> Result<String, String> {
    if v.is_empty() || v.contains('/') {
        return Err(format!("{v:?} must be a non-empty file name without '/'"));
    }
    Ok(v.to_string())
}

impl RunConfig {
    /// Sets one key. The error message does not include the location.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let v = value.trim();
        let s = &mut self.sim;
        match key {
            "length" => s.length = num(v)?,
            "nx" => s.nx = num(v)?,
            "dt" => s.dt = num(v)?,
            "particles_per_cell" => s.particles_per_cell = num(v)?,
            "beam_speed" => s.beam_speed = num(v)?,
            "end_time" => s.end_time = num(v)?,
            "picard_tol" => s.picard_tol = num(v)?,
            "picard_max_iters" => s.picard_max_iters = num(v)?,
            "seed" => s.seed = num(v)?,
            "jitter" => s.jitter = num(v)?,
            "perturbation" => s.perturbation = num(v)?,
            "solver_tol" => s.solver_tol = num(v)?,
            "k_max" => s.fit.k_max = num(v)?,
            "fit_tol" => s.fit.tol = num(v)?,
            "max_iters" => s.fit.max_iters = num(v)?,
            "annihilate" => s.fit.annihilate = boolean(v)?,
            "covariance_floor" => s.fit.covariance_floor = num(v)?,
            "min_particles" => s.min_particles = num(v)?,
            "charge" => self.species.charge = num(v)?,
            "mass" => self.species.mass = num(v)?,
            "output_dir" => {
                if v.is_empty() {
                    return Err("output_dir must not be empty".into());
                }
                self.output_dir = PathBuf::from(v)
            }
            "diagnostics_file" => self.diagnostics_file = name(v)?,
            "checkpoint_at" => self.checkpoint_at = times(v)?,
            "checkpoint_prefix" => self.checkpoint_prefix = name(v)?,
            "phase_dump_at" => self.phase_dump_at = times(v)?,
            "phase_dump_prefix" => self.phase_dump_prefix = name(v)?,
            "particle_dump_at" => self.particle_dump_at = times(v)?,
            "particle_dump_prefix" => self.particle_dump_prefix = name(v)?,
            "lemons" => self.lemons = boolean(v)?,
            "bench_steps" => self.bench_steps = num(v)?,
            _ => return Err(format!("unknown key {key:?} (known keys: {})", KEYS.join(", "))),
        }
        Ok(())
    }

    /// Applies `key = value` lines. `#` starts a comment.
    pub fn apply_text(&mut self, text: &str, source: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let err = |message: String| ConfigError {
                source: source.to_string(),
                line: Some(i + 1),
                message,
            };
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(err(format!("expected key = value, found {line:?}")));
            };
            self.set(k.trim(), v).map_err(err)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
            source: path.display().to_string(),
            line: None,
            message: format!("cannot read config: {e}"),
        })?;
        self.apply_text(&text, &path.display().to_string())
    }

    /// Applies `key=value` overrides from the command line.
    pub fn apply_overrides(&mut self, pairs: &[String]) -> Result<(), ConfigError> {
        for p in pairs {
            let err = |message: String| ConfigError {
                source: "--set".into(),
                line: None,
                message,
            };
            let (k, v) = p.split_once('=').ok_or_else(|| err(format!("expected key=value, found {p:?}")))?;
            self.set(k.trim(), v).map_err(err)?;
        }
        Ok(())
    }

    pub fn diagnostics_path(&self) -> PathBuf {
        self.output_dir.join(&self.diagnostics_file)
    }

    pub fn checkpoint_path(&self, step: u64) -> PathBuf {
        self.output_dir.join(format!("{}_{step:06}.gmcr", self.checkpoint_prefix))
    }

    pub fn particle_dump_path(&self, step: u64) -> PathBuf {
        self.output_dir.join(format!("{}_{step:06}.csv", self.particle_dump_prefix))
    }

    pub fn phase_dump_path(&self, step: u64) -> PathBuf {
        self.output_dir.join(format!("{}_{step:06}.csv", self.phase_dump_prefix))
    }
}
