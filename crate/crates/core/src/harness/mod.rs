//! Command implementations and evaluation harness behind the `star` CLI.

mod commands;
mod dataset;
mod metrics;

pub use commands::{
    cmd_eval_episodes, cmd_eval_menu, cmd_grid, cmd_merge, cmd_plan, cmd_simulate, run_manifest, run_manifests, EpisodeEval,
    GridOutput, MenuEval, MenuOptions, PlanOptions, PlanOutput, SimulateOutput,
};
pub use dataset::{
    dish_slug, Annotation, DetectorSpec, EpisodeDataset, EpisodeManifest, MenuDataset, MenuEntry, TaskCategory,
};
pub use metrics::{DishResult, EpisodeResult, FmCalls, MetricsReport, Ratio};

use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::fm::{CompletionProvider, ScriptedProvider};
use crate::sim::FrameOracle;

/// Failure classes with fixed process exit codes.
#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    /// Unreadable or malformed input (exit 2).
    #[error("{0}")]
    Input(String),
    /// No plan, or an episode that could not finish (exit 3).
    #[error("{0}")]
    Planning(String),
    /// The model provider failed (exit 4).
    #[error("{0}")]
    Provider(String),
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Input(_) => 2,
            HarnessError::Planning(_) => 3,
            HarnessError::Provider(_) => 4,
        }
    }

    pub(crate) fn input(context: impl std::fmt::Display, e: impl std::fmt::Display) -> Self {
        HarnessError::Input(format!("{context}: {e}"))
    }
}

/// `mock:<script.json>`, `oracle` (pixel-reading detector) or `http`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProviderSpec {
    Mock(PathBuf),
    Oracle,
    Http,
}

impl FromStr for ProviderSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "http" => Ok(ProviderSpec::Http),
            "oracle" => Ok(ProviderSpec::Oracle),
            _ => match s.strip_prefix("mock:") {
                Some(p) if !p.is_empty() => Ok(ProviderSpec::Mock(PathBuf::from(p))),
                _ => Err(format!("unknown provider {s:?} (mock:<script>|oracle|http)")),
            },
        }
    }
}

impl ProviderSpec {
    pub fn build(&self) -> Result<Box<dyn CompletionProvider>, HarnessError> {
        match self {
            ProviderSpec::Mock(path) => load_script(path).map(|p| Box::new(p) as Box<dyn CompletionProvider>),
            ProviderSpec::Oracle => Ok(Box::new(FrameOracle::new())),
            ProviderSpec::Http => http_provider(),
        }
    }
}

#[cfg(feature = "http")]
fn http_provider() -> Result<Box<dyn CompletionProvider>, HarnessError> {
    crate::fm::HttpProvider::from_env()
        .map(|p| Box::new(p) as Box<dyn CompletionProvider>)
        .map_err(|e| HarnessError::Provider(e.to_string()))
}

#[cfg(not(feature = "http"))]
fn http_provider() -> Result<Box<dyn CompletionProvider>, HarnessError> {
    Err(HarnessError::Provider("built without the http feature".into()))
}

pub(crate) fn load_script(path: &Path) -> Result<ScriptedProvider, HarnessError> {
    ScriptedProvider::load(path).map_err(|e| HarnessError::input("script", e))
}
