//! Symbolic executor: world state, failure injection, synthetic frames and
//! monitored episodes.

mod episode;
mod execute;
mod inject;
mod render;
mod world;

pub use episode::{
    commit_episode, progress_of, progress_score, run_episode, EmptyGold, EpisodeConfig, EpisodeLog,
    EpisodeProviders, EpisodeStatus, RecoveryOutcome, UnitOrigin, UnitRecord,
};
pub use execute::{execute_unit, Executor, UnitExecution};
pub use inject::{FailureInjection, InjectionEffect, Mutation};
pub use render::{explanation, layout_cols, marker_color, render_scene, render_unit, FrameOracle, RenderConfig, TILE};
pub use world::{WorldConfig, WorldState};

use std::collections::BTreeSet;

use crate::kg::{FailureType, UnitId};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SimError {
    #[error("world file line {line}: {message}")]
    Config { line: usize, message: String },
    #[error("{0}")]
    Io(String),
    #[error("object {0:?} appears twice in the world")]
    DuplicateObject(String),
    #[error("unit {unit_id}: precondition not met, missing {missing:?}")]
    Precondition { unit_id: UnitId, missing: Vec<String> },
    #[error("unsafe action {verb:?}: hazard flags not set: {missing_flags:?}")]
    Unsafe { verb: String, missing_flags: BTreeSet<String> },
    #[error("injection target {0:?} is not in the world")]
    InjectionTarget(String),
    #[error("{0} has no default injection effect; give one explicitly")]
    NoDefaultEffect(FailureType),
    #[error("injection at unit {at_unit} but the tree has {len} units")]
    InjectionOutOfRange { at_unit: usize, len: usize },
    #[error("tree does not verify against the world: {0}")]
    UnverifiedTree(String),
}
