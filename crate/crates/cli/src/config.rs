//! Experiment configuration: a small TOML file plus command-line overrides.
//!
//! Every run is fully described by a [`Config`]. The seed is mandatory —
//! there is deliberately no wall-clock fallback, so the same file and flags
//! always reproduce the same bytes. A stable 64-bit hash of the resolved
//! configuration (excluding the seed, which is printed separately) is
//! embedded in every output file header.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use dirmix::degrees::{DegreeError, DegreeSequence};
use serde::Deserialize;

/// How walk profiles pick their start vertices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StartPolicy {
    /// Use every vertex when the graph is small, otherwise sample.
    Auto,
    /// Always use every vertex.
    Full,
    /// Always sample `start_sample` uniform starts plus `start_worst`
    /// low-equilibrium-mass starts.
    Sampled,
}

impl StartPolicy {
    fn as_str(self) -> &'static str {
        match self {
            StartPolicy::Auto => "auto",
            StartPolicy::Full => "full",
            StartPolicy::Sampled => "sampled",
        }
    }
}

impl Default for StartPolicy {
    fn default() -> Self {
        StartPolicy::Auto
    }
}

/// On-disk shape of the configuration file. All fields except `groups`
/// are optional; the seed may instead come from `--seed`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    /// Degree groups as `[count, d_minus, d_plus]` rows.
    pub groups: Vec<[u64; 3]>,
    pub seed: Option<u64>,
    #[serde(default = "default_n_env")]
    pub n_env: u64,
    #[serde(default = "default_resample_cap")]
    pub resample_cap: u64,
    #[serde(default)]
    pub start_policy: StartPolicy,
    #[serde(default = "default_start_sample")]
    pub start_sample: u64,
    #[serde(default = "default_start_worst")]
    pub start_worst: u64,
    /// Largest walk time in profiles; 0 means "derive from the cutoff scale".
    #[serde(default)]
    pub t_max: u32,
    /// Half-width of the reported cutoff window, in units of the window scale.
    #[serde(default = "default_window_half_width")]
    pub window_half_width: f64,
    #[serde(default = "default_mc_samples")]
    pub mc_samples: u64,
    #[serde(default = "default_pool_size")]
    pub pool_size: u64,
    #[serde(default = "default_rde_iterations")]
    pub rde_iterations: u32,
    #[serde(default = "default_mart_trees")]
    pub mart_trees: u64,
    #[serde(default = "default_mart_t_max")]
    pub mart_t_max: u32,
    #[serde(default = "default_node_budget")]
    pub node_budget: f64,
    #[serde(default = "default_eq_tol")]
    pub eq_tol: f64,
    #[serde(default = "default_eq_max_iters")]
    pub eq_max_iters: u64,
    #[serde(default = "default_hist_bin_width")]
    pub hist_bin_width: f64,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
}

fn default_n_env() -> u64 {
    20
}
fn default_resample_cap() -> u64 {
    100
}
fn default_start_sample() -> u64 {
    50
}
fn default_start_worst() -> u64 {
    10
}
fn default_window_half_width() -> f64 {
    4.0
}
fn default_mc_samples() -> u64 {
    100_000
}
fn default_pool_size() -> u64 {
    100_000
}
fn default_rde_iterations() -> u32 {
    60
}
fn default_mart_trees() -> u64 {
    100_000
}
fn default_mart_t_max() -> u32 {
    12
}
fn default_node_budget() -> f64 {
    1e8
}
fn default_eq_tol() -> f64 {
    1e-12
}
fn default_eq_max_iters() -> u64 {
    100_000
}
fn default_hist_bin_width() -> f64 {
    0.02
}
fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

/// Fully resolved, validated configuration.
#[derive(Debug, Clone)]
pub struct Config {
    pub groups: Vec<(u64, u32, u32)>,
    pub seed: u64,
    pub n_env: u64,
    pub resample_cap: u64,
    pub start_policy: StartPolicy,
    pub start_sample: u64,
    pub start_worst: u64,
    pub t_max: u32,
    pub window_half_width: f64,
    pub mc_samples: u64,
    pub pool_size: u64,
    pub rde_iterations: u32,
    pub mart_trees: u64,
    pub mart_t_max: u32,
    pub node_budget: f64,
    pub eq_tol: f64,
    pub eq_max_iters: u64,
    pub hist_bin_width: f64,
    pub out_dir: PathBuf,
}

/// Anything that makes a run description unusable. Maps to exit code 2.
#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot parse config file: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("no seed given: set `seed` in the config file or pass --seed")]
    MissingSeed,
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("invalid degree groups: {0}")]
    Degrees(#[from] DegreeError),
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
}

impl RawConfig {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(toml::from_str(&text)?)
    }

    /// Apply overrides and validate every field.
    pub fn resolve(self, over: &Overrides) -> Result<Config, ConfigError> {
        let seed = over.seed.or(self.seed).ok_or(ConfigError::MissingSeed)?;
        let mut groups = Vec::with_capacity(self.groups.len());
        for (idx, row) in self.groups.iter().enumerate() {
            let [count, dm, dp] = *row;
            if count == 0 {
                return Err(ConfigError::Invalid(format!(
                    "groups[{idx}]: count must be at least 1"
                )));
            }
            let dm = u32::try_from(dm).map_err(|_| {
                ConfigError::Invalid(format!("groups[{idx}]: in-degree {dm} out of range"))
            })?;
            let dp = u32::try_from(dp).map_err(|_| {
                ConfigError::Invalid(format!("groups[{idx}]: out-degree {dp} out of range"))
            })?;
            groups.push((count, dm, dp));
        }
        let cfg = Config {
            groups,
            seed,
            n_env: self.n_env,
            resample_cap: self.resample_cap,
            start_policy: self.start_policy,
            start_sample: self.start_sample,
            start_worst: self.start_worst,
            t_max: self.t_max,
            window_half_width: self.window_half_width,
            mc_samples: self.mc_samples,
            pool_size: self.pool_size,
            rde_iterations: self.rde_iterations,
            mart_trees: self.mart_trees,
            mart_t_max: self.mart_t_max,
            node_budget: self.node_budget,
            eq_tol: self.eq_tol,
            eq_max_iters: self.eq_max_iters,
            hist_bin_width: self.hist_bin_width,
            out_dir: over.out_dir.clone().unwrap_or(self.out_dir),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl Config {
    fn validate(&self) -> Result<(), ConfigError> {
        fn at_least_one(name: &str, value: u64) -> Result<(), ConfigError> {
            if value == 0 {
                Err(ConfigError::Invalid(format!(
                    "{name} must be at least 1, got 0"
                )))
            } else {
                Ok(())
            }
        }
        if self.groups.is_empty() {
            return Err(ConfigError::Invalid("groups must be non-empty".into()));
        }
        at_least_one("n_env", self.n_env)?;
        at_least_one("resample_cap", self.resample_cap)?;
        at_least_one("start_sample", self.start_sample)?;
        at_least_one("start_worst", self.start_worst)?;
        at_least_one("mc_samples", self.mc_samples)?;
        at_least_one("pool_size", self.pool_size)?;
        at_least_one("rde_iterations", u64::from(self.rde_iterations))?;
        at_least_one("mart_trees", self.mart_trees)?;
        at_least_one("mart_t_max", u64::from(self.mart_t_max))?;
        at_least_one("eq_max_iters", self.eq_max_iters)?;
        for (name, value) in [
            ("window_half_width", self.window_half_width),
            ("node_budget", self.node_budget),
            ("eq_tol", self.eq_tol),
            ("hist_bin_width", self.hist_bin_width),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(ConfigError::Invalid(format!(
                    "{name} must be a positive finite number, got {value}"
                )));
            }
        }
        Ok(())
    }

    /// Build the validated degree sequence described by `groups`.
    pub fn degree_sequence(&self) -> Result<DegreeSequence, ConfigError> {
        Ok(dirmix::degrees::from_groups(&self.groups)?)
    }

    /// Canonical one-line-per-field rendering; the hash input.
    /// The seed is excluded so runs of the same experiment share a hash.
    pub fn canonical_string(&self) -> String {
        let mut s = String::new();
        let _ = write!(s, "groups=[");
        for (i, &(count, dm, dp)) in self.groups.iter().enumerate() {
            if i > 0 {
                let _ = write!(s, ",");
            }
            let _ = write!(s, "[{count},{dm},{dp}]");
        }
        let _ = writeln!(s, "]");
        let _ = writeln!(s, "n_env={}", self.n_env);
        let _ = writeln!(s, "resample_cap={}", self.resample_cap);
        let _ = writeln!(s, "start_policy={}", self.start_policy.as_str());
        let _ = writeln!(s, "start_sample={}", self.start_sample);
        let _ = writeln!(s, "start_worst={}", self.start_worst);
        let _ = writeln!(s, "t_max={}", self.t_max);
        let _ = writeln!(s, "window_half_width={}", self.window_half_width);
        let _ = writeln!(s, "mc_samples={}", self.mc_samples);
        let _ = writeln!(s, "pool_size={}", self.pool_size);
        let _ = writeln!(s, "rde_iterations={}", self.rde_iterations);
        let _ = writeln!(s, "mart_trees={}", self.mart_trees);
        let _ = writeln!(s, "mart_t_max={}", self.mart_t_max);
        let _ = writeln!(s, "node_budget={}", self.node_budget);
        let _ = writeln!(s, "eq_tol={}", self.eq_tol);
        let _ = writeln!(s, "eq_max_iters={}", self.eq_max_iters);
        let _ = writeln!(s, "hist_bin_width={}", self.hist_bin_width);
        s
    }

    /// FNV-1a over the canonical rendering.
    pub fn hash(&self) -> u64 {
        const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
        const PRIME: u64 = 0x0000_0100_0000_01b3;
        let mut h = OFFSET;
        for byte in self.canonical_string().bytes() {
            h ^= u64::from(byte);
            h = h.wrapping_mul(PRIME);
        }
        h
    }
}
