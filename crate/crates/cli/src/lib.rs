//! Command implementations behind the `dirmix` binary.
//!
//! Everything here is a thin, deterministic orchestration layer over the
//! `dirmix` library: parse a config, derive per-task seeds from the single
//! run seed, call the library, and render CSV files and stdout text. The
//! binary maps [`CliError`] onto the process exit code:
//!
//! * `0` — success,
//! * `2` — unusable configuration or an infeasible request,
//! * `3` — the resample cap was exhausted before a usable graph appeared,
//! * `4` — the verification suite found failing criteria,
//! * `1` — anything else (I/O, internal invariant breaks).

pub mod commands;
pub mod config;
pub mod output;
pub mod verify;

use config::ConfigError;
use dirmix::degrees::DegreeError;
use dirmix::graphmodel::GraphError;
use dirmix::limits::LimitsError;
use dirmix::paths::PathsError;
use dirmix::walk::WalkError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    /// The request is valid TOML but cannot be served as stated
    /// (for example a tree simulation over the node budget).
    #[error("infeasible request: {0}")]
    Infeasible(String),
    #[error(
        "resample cap exceeded: {rejections} draws rejected with cap {cap}; \
         raise resample_cap or change the seed"
    )]
    ResampleCap { cap: u64, rejections: u64 },
    #[error("verification failed: {failed} of {total} checks red")]
    Verification { failed: usize, total: usize },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Infeasible(_) => 2,
            CliError::ResampleCap { .. } => 3,
            CliError::Verification { .. } => 4,
            CliError::Io(_) | CliError::Internal(_) => 1,
        }
    }
}

impl From<DegreeError> for CliError {
    fn from(e: DegreeError) -> Self {
        CliError::Config(ConfigError::Degrees(e))
    }
}

impl From<LimitsError> for CliError {
    fn from(e: LimitsError) -> Self {
        match e {
            LimitsError::ExplosionGuard { .. } | LimitsError::PoolTooSmall { .. } => {
                CliError::Infeasible(e.to_string())
            }
            other => CliError::Internal(other.to_string()),
        }
    }
}

impl From<WalkError> for CliError {
    fn from(e: WalkError) -> Self {
        CliError::Internal(e.to_string())
    }
}

impl From<GraphError> for CliError {
    fn from(e: GraphError) -> Self {
        CliError::Internal(e.to_string())
    }
}

impl From<PathsError> for CliError {
    fn from(e: PathsError) -> Self {
        CliError::Internal(e.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_the_contract() {
        assert_eq!(CliError::Config(ConfigError::MissingSeed).exit_code(), 2);
        assert_eq!(CliError::Infeasible("x".into()).exit_code(), 2);
        assert_eq!(CliError::ResampleCap { cap: 3, rejections: 3 }.exit_code(), 3);
        assert_eq!(CliError::Verification { failed: 1, total: 10 }.exit_code(), 4);
        assert_eq!(CliError::Internal("x".into()).exit_code(), 1);
    }

    #[test]
    fn guard_refusals_map_to_config_exit() {
        let err: CliError =
            LimitsError::ExplosionGuard { expected_nodes: 1e12, budget: 1e8 }.into();
        assert_eq!(err.exit_code(), 2);
        let err: CliError = LimitsError::EmptyPool.into();
        assert_eq!(err.exit_code(), 1);
    }
}
