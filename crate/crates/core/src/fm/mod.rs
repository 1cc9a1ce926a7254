//! Foundation-model boundary: prompts, providers, response parsing and
//! tree verification.

mod corpus;
mod generate;
mod goal;
#[cfg(feature = "http")]
mod http;
mod prompt;
mod provider;
mod verify;

pub use corpus::{CorpusError, ExampleCorpus};
pub use generate::{generate_or_repair, parse_tree_response, GenerateConfig, Generated};
pub use goal::{extract_goal, extract_goal_offline};
#[cfg(feature = "http")]
pub use http::HttpProvider;
pub use prompt::{
    build_generation_prompt, build_modification_prompt, PromptText, DEFAULT_EXAMPLE_COUNT, FOON_GRAMMAR,
};
pub use provider::{
    CompletionProvider, CompletionRequest, ImagePayload, ProviderError, ScriptEntry, ScriptedProvider,
};
pub use verify::{verify_tree, verify_tree_with, VerificationReport};

use crate::kg::ParseError;

#[derive(Debug, thiserror::Error)]
pub enum FmError {
    #[error("example corpus has {available} examples, {required} required")]
    CorpusTooSmall { required: usize, available: usize },
    #[error("no FOON-text block found in model output")]
    NoBlockFound,
    #[error("model output: {0}")]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("no verified tree after {attempts} attempts; last report: {last}")]
    RetriesExhausted { attempts: usize, last: VerificationReport },
    #[error("exact matches need no generation")]
    ExactMatchGiven,
    #[error("could not determine a goal from {0:?}")]
    NoGoal(String),
}
