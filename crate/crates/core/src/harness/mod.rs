//! Command-line driver support: config files, single runs, thread-sweep
//! timing and pairwise method comparison.
//!
//! Config files hold one `<key>,<type>,<value>` entry per line with type
//! `int`, `real`, `bool`, `str` or `vec` (`;`-separated reals). A run
//! needs `function`, `dim` and `method`; `seed`, `budget` and `reps` are
//! optional. Per-method presets (see [`presets`]) apply first and the
//! config's own keys override them.

mod compare;
mod config;
mod methods;
mod run;
mod speedup;

use thiserror::Error;

use crate::error::Error;
use crate::stats::StatsError;

pub use compare::{compare, desk_suite, suite, CompareReport, CompareSpec};
pub use config::{parse_config, read_config, RunConfig};
pub use methods::{hybrid_split, is_method, minimizer, presets, profile, Hybrid, METHODS, PRESETS_TEXT};
pub use run::{build_function, effective_params, run_once, run_reps, run_with, RunReport, ARG_SHOWN};
pub use speedup::{run_speedup, speedup_lines, speedup_rows, speedup_table, SpeedupRow};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("line {line}: duplicate key `{key}`")]
    DuplicateKey { line: usize, key: String },
    #[error("cannot read {path}: {reason}")]
    Io { path: String, reason: String },
    #[error(transparent)]
    Run(#[from] Error),
    #[error("statistics: {0}")]
    Stats(#[from] StatsError),
}

impl HarnessError {
    /// 2 for configuration problems, 3 for failures while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Parse { .. } | Self::DuplicateKey { .. } | Self::Io { .. } => EXIT_CONFIG,
            Self::Run(
                Error::MissingConfig(_)
                | Error::ConfigTypeError { .. }
                | Error::InvalidConfig { .. }
                | Error::UnknownFunction(_)
                | Error::UnknownMethod(_)
                | Error::DimensionMismatch { .. },
            ) => EXIT_CONFIG,
            Self::Run(_) | Self::Stats(_) => EXIT_RUNTIME,
        }
    }
}
