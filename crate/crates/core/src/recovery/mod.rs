//! Failure recovery: re-execute or re-plan, look up FailNet, fall back to
//! generation, splice the repair into the running tree, and commit what
//! worked back into FailNet.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::fm::{
    verify_tree, CompletionProvider, CompletionRequest, ExampleCorpus, FmError, PromptText, ProviderError,
    VerificationReport, FOON_GRAMMAR,
};
use crate::kg::state::StateSet;
use crate::kg::{
    parse_subgraph_at, serialize_subgraph, FailureType, FunctionalUnit, KnowledgeStore, MergeReport,
    StoreError, TaskTree, Trigger, UnitId,
};
use crate::monitor::FailureReport;
use crate::retrieval::chain_to_root;
use crate::sim::WorldState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecoveryKind {
    ReExecute,
    Replan,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecoveryDecision {
    pub kind: RecoveryKind,
    pub rationale: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    FailNet,
    Generated,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provenance::FailNet => "failnet",
            Provenance::Generated => "generated",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecoveryTree {
    pub units: Vec<FunctionalUnit>,
    pub trigger: Trigger,
    pub provenance: Provenance,
}

#[derive(Debug, thiserror::Error)]
pub enum RecoveryError {
    #[error("no verified recovery after {attempts} attempts; last report: {last}")]
    RetriesExhausted { attempts: usize, last: VerificationReport },
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Fm(#[from] FmError),
    #[error("splice position {at} is outside a tree of {len} units")]
    OutOfRange { at: usize, len: usize },
    #[error("spliced tree does not verify: unit {index} ({unit_id}) lacks {missing:?}")]
    BrokenUnit { index: usize, unit_id: UnitId, missing: Vec<String> },
    #[error("spliced tree does not reach the goal {0}")]
    GoalLost(String),
}

/// Re-execute when the failed unit could simply run again from `world`.
///
/// Unsafe actions are never repeated.
pub fn decide_strategy(report: &FailureReport, world: &WorldState, failed_unit: &FunctionalUnit) -> RecoveryDecision {
    if report.failure_type == Some(FailureType::UnsafeAction) {
        return RecoveryDecision {
            kind: RecoveryKind::Replan,
            rationale: "unsafe actions are not retried".into(),
        };
    }
    let missing = world.objects().unsatisfied_inputs(failed_unit);
    if missing.is_empty() {
        RecoveryDecision {
            kind: RecoveryKind::ReExecute,
            rationale: "inputs of the failed unit still hold".into(),
        }
    } else {
        let names: Vec<String> = missing.iter().map(|n| n.canonical_line()).collect();
        RecoveryDecision {
            kind: RecoveryKind::Replan,
            rationale: format!("inputs no longer hold: {}", names.join(", ")),
        }
    }
}

fn report_type(report: &FailureReport) -> FailureType {
    report.failure_type.unwrap_or(FailureType::Other)
}

/// First FailNet strategy (by root unit id) whose trigger matches and whose
/// inputs can be met from `world` by chaining through FailNet.
pub fn search_failnet(store: &KnowledgeStore, report: &FailureReport, world: &WorldState) -> Option<RecoveryTree> {
    let kind = report_type(report);
    for root in store.matching_roots(kind, &report.affected_objects) {
        let Ok(Some(units)) = chain_to_root(store.failnet(), root, world.objects()) else {
            continue;
        };
        let trigger = store
            .triggers()
            .get(root.unit_id())
            .and_then(|ts| ts.iter().find(|t| t.matches(kind, &report.affected_objects)))
            .cloned()
            .expect("matching_roots only returns triggered roots");
        return Some(RecoveryTree {
            units,
            trigger,
            provenance: Provenance::FailNet,
        });
    }
    None
}

/// Where a recovery lands: the failed unit and the plan after it.
#[derive(Debug, Clone, Copy)]
pub struct RepairSite<'a> {
    pub tree: &'a TaskTree,
    pub failed_index: usize,
    pub capabilities: Option<&'a BTreeSet<String>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RecoveryConfig {
    pub examples: usize,
    pub retry_limit: usize,
    pub max_tokens: usize,
    /// Re-executions allowed per unit before re-planning.
    pub reexecute_cap: usize,
    /// A spliced tree may grow to at most this multiple of the original.
    pub growth_cap: usize,
}

impl Default for RecoveryConfig {
    fn default() -> Self {
        RecoveryConfig {
            examples: 3,
            retry_limit: 3,
            max_tokens: 2048,
            reexecute_cap: 2,
            growth_cap: 3,
        }
    }
}

const RECOVERY_SYSTEM: &str = "You repair failures that happen while a robot cooks. \
Reply with functional units in FOON text that bring the kitchen back to a state from which the \
remaining plan can finish.";

pub fn build_recovery_prompt(
    report: &FailureReport,
    world: &WorldState,
    site: RepairSite<'_>,
    corpus: &ExampleCorpus,
    examples: usize,
) -> Result<PromptText, FmError> {
    let mut system = format!("{RECOVERY_SYSTEM}\n{FOON_GRAMMAR}");
    if let Some(caps) = site.capabilities {
        let verbs: Vec<&str> = caps.iter().map(String::as_str).collect();
        system.push_str(&format!("\nAllowed motions: {}", verbs.join(", ")));
    }
    let objects: Vec<&str> = report.affected_objects.iter().map(String::as_str).collect();
    let kitchen: String = world.objects().nodes().map(|n| format!("- {}\n", n.canonical_line())).collect();
    let failed = &site.tree.units[site.failed_index];
    let remaining = serialize_subgraph(&site.tree.units[site.failed_index + 1..]);
    let user = format!(
        "Failure: {}\nWhat happened: {}\nAffected objects: {}\nFailed step:\n```\n{}```\n\
         Kitchen objects:\n{kitchen}Remaining plan:\n```\n{remaining}```\nGoal: {}\n\
         Write the recovery units.",
        report_type(report),
        report.explanation,
        objects.join(", "),
        failed.canonical_text(),
        site.tree.goal.canonical_line(),
    );
    let mut prompt = PromptText::new(&system, &user);
    prompt.few_shot_examples = corpus.take(examples)?.to_vec();
    Ok(prompt)
}

fn capability_violations(units: &[FunctionalUnit], caps: Option<&BTreeSet<String>>) -> Vec<String> {
    let Some(caps) = caps else { return Vec::new() };
    units
        .iter()
        .enumerate()
        .filter(|(_, u)| !caps.contains(&u.motion().verb))
        .map(|(i, u)| format!("unit {}: motion {:?} is not a robot capability", i + 1, u.motion().verb))
        .collect()
}

/// Check `recovery` placed before the failed unit and, failing that, right
/// after it. Returns the report of the later placement when neither works.
fn verify_recovery(units: &[FunctionalUnit], world: &WorldState, site: RepairSite<'_>) -> VerificationReport {
    let caps = capability_violations(units, site.capabilities);
    let kitchen = world.to_kitchen();
    let mut last = VerificationReport::default();
    for at in [site.failed_index, site.failed_index + 1] {
        let mut all = units.to_vec();
        all.extend_from_slice(&site.tree.units[at..]);
        let mut report = verify_tree(&TaskTree::new(all, site.tree.goal.clone()), &kitchen, &site.tree.goal);
        report.syntax_violations.splice(0..0, caps.iter().cloned());
        report.valid &= caps.is_empty();
        if report.valid {
            return report;
        }
        last = report;
    }
    last
}

fn extract_units(answer: &str) -> Result<Vec<FunctionalUnit>, FmError> {
    let start = answer.lines().position(|l| l.trim() == "U").ok_or(FmError::NoBlockFound)?;
    let block: Vec<&str> = answer
        .lines()
        .skip(start)
        .take_while(|l| !l.trim_start().starts_with("```"))
        .collect();
    Ok(parse_subgraph_at(&(block.join("\n") + "\n"), start + 1)?)
}

/// Ask the provider for a repair, verifying each answer against `world` and
/// the rest of the plan; the last verification report is fed back on retry.
pub fn generate_recovery(
    provider: &dyn CompletionProvider,
    report: &FailureReport,
    world: &WorldState,
    site: RepairSite<'_>,
    corpus: &ExampleCorpus,
    config: &RecoveryConfig,
) -> Result<RecoveryTree, RecoveryError> {
    let base = build_recovery_prompt(report, world, site, corpus, config.examples)?;
    let mut last = VerificationReport::default();
    for attempt in 1..=config.retry_limit {
        let prompt = if attempt == 1 { base.clone() } else { base.with_feedback(&last.feedback()) };
        let answer = provider.complete(&CompletionRequest::text(&prompt, config.max_tokens))?;
        last = match extract_units(&answer) {
            Err(e) => VerificationReport {
                syntax_violations: vec![e.to_string()],
                ..VerificationReport::default()
            },
            Ok(units) if units.is_empty() => VerificationReport {
                syntax_violations: vec!["no units".into()],
                ..VerificationReport::default()
            },
            Ok(units) => {
                let r = verify_recovery(&units, world, site);
                if r.valid {
                    return Ok(RecoveryTree {
                        units,
                        trigger: Trigger {
                            failure_type: report_type(report),
                            objects: report.affected_objects.clone(),
                        },
                        provenance: Provenance::Generated,
                    });
                }
                r
            }
        };
    }
    Err(RecoveryError::RetriesExhausted {
        attempts: config.retry_limit,
        last,
    })
}

/// Insert `recovery` at position `at` and check the tail from `world`.
///
/// `at` may equal the tree length (append). Only `spliced[at..]` is
/// checked, since the prefix has already run.
pub fn splice(
    active: &TaskTree,
    recovery: &[FunctionalUnit],
    at: usize,
    world: &WorldState,
) -> Result<TaskTree, RecoveryError> {
    if at > active.len() {
        return Err(RecoveryError::OutOfRange { at, len: active.len() });
    }
    let mut units = active.units[..at].to_vec();
    units.extend_from_slice(recovery);
    units.extend_from_slice(&active.units[at..]);
    let spliced = TaskTree::new(units, active.goal.clone());

    let mut state: StateSet = world.objects().clone();
    for (index, unit) in spliced.units.iter().enumerate().skip(at) {
        let missing = state.unsatisfied_inputs(unit);
        if !missing.is_empty() {
            return Err(RecoveryError::BrokenUnit {
                index,
                unit_id: unit.unit_id().clone(),
                missing: missing.iter().map(|n| n.canonical_line()).collect(),
            });
        }
        state.apply(unit);
    }
    if !state.satisfies(&spliced.goal) {
        return Err(RecoveryError::GoalLost(spliced.goal.canonical_line()));
    }
    Ok(spliced)
}

/// Store a generated recovery that worked. FailNet-sourced and failed
/// recoveries leave the store untouched.
pub fn commit_recovery(
    store: &mut KnowledgeStore,
    recovery: &RecoveryTree,
    succeeded: bool,
) -> Result<MergeReport, StoreError> {
    if !succeeded || recovery.provenance != Provenance::Generated {
        return Ok(MergeReport::default());
    }
    store.merge_recovery(&recovery.units, recovery.trigger.clone())
}
