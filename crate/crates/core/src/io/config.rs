use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use thiserror::Error;

use crate::experiments::{Engine, EngineSettings, InitialKind, InitialStateSpec, SweepPlan};
use crate::lindblad::{TimeGrid, TrajectoryOptions};
use crate::model::{ModelError, ModelParams};
use crate::Error;

pub const KNOWN_KEYS: &[&str] = &[
    "n_sites",
    "hopping",
    "dimerization",
    "theta",
    "gamma",
    "t_end",
    "dt",
    "samples",
    "n_traj",
    "seed",
    "engine",
    "initial",
    "theta_ref",
    "windows",
    "site_index",
    "bulk_index",
    "theta_points",
    "theta_min",
    "theta_max",
    "recompute_initial",
];

const GAP_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: unknown key '{key}' (known keys: {})", KNOWN_KEYS.join(", "))]
    UnknownKey { key: String, line: usize },
    #[error("unknown key '{key}' (known keys: {})", KNOWN_KEYS.join(", "))]
    UnknownOverride { key: String },
    #[error("line {line}: expected 'key = value', got '{text}'")]
    Syntax { line: usize, text: String },
    #[error("key '{key}': cannot parse '{value}' as {expected}")]
    Value {
        key: &'static str,
        value: String,
        expected: &'static str,
    },
    #[error("key '{key}' = {value} is out of range; valid range: {valid}")]
    Range {
        key: &'static str,
        value: String,
        valid: String,
    },
    #[error("key '{key}' = {value} closes the bulk gap (|t+ - t-| = {gap:e}); the phase is undefined at theta = pi/2, choose theta != pi/2")]
    GapClosed {
        key: &'static str,
        value: f64,
        gap: f64,
    },
}

/// Parses a real number, allowing multiples of π such as `0.1pi`,
/// `0.5*pi`, `pi/2` or `-pi`.
pub fn parse_angle(text: &str) -> Option<f64> {
    let s = text.trim().to_ascii_lowercase();
    if let Some((head, den)) = s.split_once("pi/") {
        let coef = coefficient(head)?;
        let den: f64 = den.trim().parse().ok()?;
        return Some(coef * PI / den);
    }
    if let Some(head) = s.strip_suffix("pi") {
        return Some(coefficient(head)? * PI);
    }
    s.parse().ok()
}

fn coefficient(head: &str) -> Option<f64> {
    let head = head.trim().trim_end_matches('*').trim();
    match head {
        "" | "+" => Some(1.0),
        "-" => Some(-1.0),
        h => h.parse().ok(),
    }
}

/// Raw `key = value` pairs from a file, later overridden by flags.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigSource {
    entries: BTreeMap<String, String>,
}

impl ConfigSource {
    /// Flat `key = value` lines; `#` and `;` start comments and `[section]`
    /// headers are ignored.
    pub fn parse_str(text: &str) -> Result<Self, ConfigError> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split(['#', ';']).next().unwrap_or("").trim();
            if line.is_empty() || (line.starts_with('[') && line.ends_with(']')) {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: i + 1,
                text: raw.to_string(),
            })?;
            let key = key.trim();
            if !KNOWN_KEYS.contains(&key) {
                return Err(ConfigError::UnknownKey {
                    key: key.to_string(),
                    line: i + 1,
                });
            }
            entries.insert(key.to_string(), value.trim().to_string());
        }
        Ok(ConfigSource { entries })
    }

    pub fn from_file(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::parse_str(&text)?)
    }

    /// Sets or replaces a value; later calls take precedence.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        if !KNOWN_KEYS.contains(&key) {
            return Err(ConfigError::UnknownOverride { key: key.to_string() });
        }
        self.entries.insert(key.to_string(), value.trim().to_string());
        Ok(())
    }

    /// Parses a `key=value` override.
    pub fn set_pair(&mut self, pair: &str) -> Result<(), ConfigError> {
        let (key, value) = pair.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line: 0,
            text: pair.to_string(),
        })?;
        self.set(key.trim(), value)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    fn real(&self, key: &'static str, default: f64) -> Result<f64, ConfigError> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => parse_angle(v).ok_or_else(|| ConfigError::Value {
                key,
                value: v.to_string(),
                expected: "a real number (multiples of pi allowed, e.g. 0.1pi)",
            }),
        }
    }

    fn integer<T: std::str::FromStr>(&self, key: &'static str, default: T) -> Result<T, ConfigError> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| ConfigError::Value {
                key,
                value: v.to_string(),
                expected: "a non-negative integer",
            }),
        }
    }

    fn optional_integer(&self, key: &'static str) -> Result<Option<usize>, ConfigError> {
        self.get(key).map(|_| self.integer(key, 0)).transpose()
    }

    /// Applies defaults and validates every value.
    pub fn resolve(&self) -> Result<RunConfig, ConfigError> {
        let n_sites = self.integer("n_sites", 200usize)?;
        let hopping = self.real("hopping", 1.0)?;
        let dimerization = self.real("dimerization", 0.3)?;
        let theta = self.real("theta", 0.1 * PI)?;
        let gamma = self.real("gamma", 0.1)?;
        let params = ModelParams::new(n_sites, hopping, dimerization, theta, gamma).map_err(|e| {
            let (key, value, valid) = match e {
                ModelError::OddSites(n) | ModelError::TooFewSites(n) => {
                    ("n_sites", n.to_string(), "even integer >= 4")
                }
                ModelError::Hopping(x) => ("hopping", x.to_string(), "> 0"),
                ModelError::Dimerization(x) => ("dimerization", x.to_string(), "[0, 1)"),
                ModelError::Theta(x) => ("theta", x.to_string(), "[0, pi]"),
                ModelError::Gamma(x) => ("gamma", x.to_string(), ">= 0"),
                ModelError::SiteOutOfRange { site, .. } => ("n_sites", site.to_string(), "site in range"),
            };
            ConfigError::Range {
                key,
                value,
                valid: valid.to_string(),
            }
        })?;

        let t_end = self.real("t_end", 25_000.0)?;
        let samples = self.integer("samples", 1000usize)?;
        let dt = self.real("dt", 0.05)?;
        if !(t_end.is_finite() && t_end > 0.0) {
            return Err(range("t_end", t_end, "> 0"));
        }
        if samples == 0 {
            return Err(range("samples", 0, ">= 1"));
        }
        let grid = TimeGrid::new(t_end, dt, samples)
            .map_err(|_| range("dt", dt, format!("(0, t_end/samples] = (0, {}]", t_end / samples as f64)))?;

        let n_traj = self.integer("n_traj", 500usize)?;
        if n_traj == 0 {
            return Err(range("n_traj", 0, ">= 1"));
        }
        let seed = self.integer("seed", 0u64)?;
        let engine = match self.get("engine") {
            None => Engine::Auto,
            Some(v) => v.parse().map_err(|_| ConfigError::Value {
                key: "engine",
                value: v.to_string(),
                expected: "one of auto, spectral, trajectories, master",
            })?,
        };

        let kind = match self.get("initial").unwrap_or("edge_right") {
            "edge_right" => InitialKind::EdgeRight,
            "edge_left" => InitialKind::EdgeLeft,
            "bulk" => InitialKind::Bulk,
            "site" => InitialKind::Site,
            "vacuum" => InitialKind::Vacuum,
            other => {
                return Err(ConfigError::Value {
                    key: "initial",
                    value: other.to_string(),
                    expected: "one of edge_right, edge_left, bulk, site, vacuum",
                })
            }
        };
        let theta_ref = self.real("theta_ref", 0.1 * PI)?;
        if !(0.0..=PI).contains(&theta_ref) {
            return Err(range("theta_ref", theta_ref, "[0, pi]"));
        }
        let site_index = self.optional_integer("site_index")?;
        if let Some(s) = site_index {
            if s == 0 || s > n_sites {
                return Err(range("site_index", s, format!("1..={n_sites}")));
            }
        }
        if kind == InitialKind::Site && site_index.is_none() {
            return Err(range("site_index", "(missing)", format!("1..={n_sites} when initial = site")));
        }
        let bulk_index = self.optional_integer("bulk_index")?;
        if let Some(b) = bulk_index {
            if b >= n_sites {
                return Err(range("bulk_index", b, format!("0..{n_sites}")));
            }
        }
        let initial = InitialStateSpec {
            site_index,
            bulk_index,
            theta_ref,
            ..InitialStateSpec::new(kind)
        };

        let windows = match self.get("windows") {
            None => [1, 3, 5, 20].into_iter().filter(|&a| a <= n_sites / 2).collect(),
            Some(v) => v
                .split(',')
                .map(|w| w.trim().parse::<usize>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|_| ConfigError::Value {
                    key: "windows",
                    value: v.to_string(),
                    expected: "a comma-separated list of positive integers",
                })?,
        };
        if windows.is_empty() || windows.iter().any(|&a| a == 0 || a > n_sites / 2) {
            return Err(range("windows", format!("{windows:?}"), format!("each in 1..={}", n_sites / 2)));
        }

        let theta_points = self.integer("theta_points", 41usize)?;
        let theta_min = self.real("theta_min", 0.05 * PI)?;
        let theta_max = self.real("theta_max", 0.95 * PI)?;
        if theta_points == 0 {
            return Err(range("theta_points", 0, ">= 1"));
        }
        if !(0.0..=PI).contains(&theta_min) {
            return Err(range("theta_min", theta_min, "[0, pi]"));
        }
        if !(0.0..=PI).contains(&theta_max) || (theta_points > 1 && theta_max <= theta_min) {
            return Err(range("theta_max", theta_max, format!("({theta_min}, pi]")));
        }
        let recompute_initial = match self.get("recompute_initial").unwrap_or("false") {
            "true" | "1" | "yes" => true,
            "false" | "0" | "no" => false,
            other => {
                return Err(ConfigError::Value {
                    key: "recompute_initial",
                    value: other.to_string(),
                    expected: "true or false",
                })
            }
        };

        Ok(RunConfig {
            params,
            grid,
            engine,
            initial,
            n_traj,
            seed,
            windows,
            thetas: SweepPlan::uniform_thetas(theta_points, theta_min, theta_max),
            recompute_initial,
        })
    }
}

fn range(key: &'static str, value: impl ToString, valid: impl ToString) -> ConfigError {
    ConfigError::Range {
        key,
        value: value.to_string(),
        valid: valid.to_string(),
    }
}

/// Fully validated run description.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: ModelParams,
    pub grid: TimeGrid,
    pub engine: Engine,
    pub initial: InitialStateSpec,
    pub n_traj: usize,
    pub seed: u64,
    pub windows: Vec<usize>,
    pub thetas: Vec<f64>,
    pub recompute_initial: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        ConfigSource::default().resolve().expect("defaults are valid")
    }
}

impl RunConfig {
    pub fn engine_settings(&self, threads: Option<usize>) -> EngineSettings {
        EngineSettings {
            trajectories: TrajectoryOptions {
                threads,
                ..TrajectoryOptions::new(self.n_traj, self.seed)
            },
            ..EngineSettings::default()
        }
    }

    pub fn sweep_plan(&self) -> SweepPlan {
        SweepPlan {
            recompute_initial: self.recompute_initial,
            ..SweepPlan::new(self.thetas.clone(), self.windows.clone())
        }
    }

    /// Rejects an angle at which the bulk gap closes.
    pub fn require_gap(&self, key: &'static str) -> Result<(), ConfigError> {
        let theta = match key {
            "theta_ref" => self.initial.theta_ref,
            _ => self.params.theta(),
        };
        let p = self.params.with_theta(theta).expect("validated angle");
        let gap = 0.5 * p.bulk_gap();
        if gap <= GAP_FLOOR {
            return Err(ConfigError::GapClosed {
                key,
                value: theta,
                gap,
            });
        }
        Ok(())
    }
}
