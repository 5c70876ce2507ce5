//! Scenario-driven runs of the full and reduced beam models.

pub mod report;
pub mod runner;
pub mod scenario;
pub mod spectrum;

pub use runner::{prepare, run, simulate_all, Prepared, RunOptions, RunSummary, VariantRun};
pub use scenario::{ProbeSpec, Scenario, Variant};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] nlcb_core::Error),
    #[error("{variant} run failed: {source}")]
    Solver {
        variant: String,
        #[source]
        source: nlcb_core::Error,
    },
    #[error("cannot write {0}")]
    Output(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn solver(variant: &str, source: nlcb_core::Error) -> Self {
        Self::Solver {
            variant: variant.to_string(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
