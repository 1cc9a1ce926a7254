use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Executor, FailureInjection, SimError, WorldConfig, WorldState};
use crate::fm::{verify_tree, CompletionProvider, ExampleCorpus};
use crate::kg::{FailureType, KnowledgeStore, TaskTree, UnitId};
use crate::monitor::{detect, DetectConfig, DetectionContext, FailureReport};
use crate::recovery::{
    decide_strategy, generate_recovery, search_failnet, splice, Provenance, RecoveryConfig, RecoveryDecision,
    RecoveryKind, RecoveryTree, RepairSite,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnitOrigin {
    /// Index of the unit in the original tree.
    Plan(usize),
    Recovery,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RecoveryOutcome {
    Repeated,
    Spliced { provenance: Provenance, units: usize, at: usize },
    Failed { cause: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitRecord {
    pub unit_id: UnitId,
    pub origin: UnitOrigin,
    pub pre_state: Vec<String>,
    pub post_state: Vec<String>,
    pub frames: usize,
    /// The unit was blocked by the safety gate and did not run.
    pub blocked: bool,
    pub detection: Option<FailureReport>,
    pub decision: Option<RecoveryDecision>,
    pub recovery: Option<RecoveryOutcome>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EpisodeStatus {
    Success,
    Failure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub records: Vec<UnitRecord>,
    pub status: EpisodeStatus,
    pub cause: Option<String>,
    /// Recoveries spliced into the plan, in order.
    pub recoveries: Vec<RecoveryTree>,
    pub detector_calls: usize,
    pub generator_calls: usize,
    pub final_state: Vec<String>,
}

impl EpisodeLog {
    pub fn succeeded(&self) -> bool {
        self.status == EpisodeStatus::Success
    }

    /// The first failure report raised during the episode.
    pub fn first_detection(&self) -> Option<&FailureReport> {
        self.records.iter().find_map(|r| r.detection.as_ref())
    }

    /// Unit ids of plan units that ran without a reported failure.
    pub fn nominal_unit_ids(&self) -> Vec<UnitId> {
        self.records
            .iter()
            .filter(|r| matches!(r.origin, UnitOrigin::Plan(_)) && r.detection.is_none() && !r.blocked)
            .map(|r| r.unit_id.clone())
            .collect()
    }

    /// Human-readable summary.
    pub fn summary(&self) -> String {
        let mut s = format!(
            "status: {}\nunits executed: {}\nfailures detected: {}\nrecoveries: {}\n",
            match self.status {
                EpisodeStatus::Success => "success",
                EpisodeStatus::Failure => "failure",
            },
            self.records.iter().filter(|r| !r.blocked).count(),
            self.records.iter().filter(|r| r.detection.is_some()).count(),
            self.recoveries.len()
        );
        for r in &self.recoveries {
            s.push_str(&format!("  {} ({} units, trigger {})\n", r.provenance, r.units.len(), r.trigger.line()));
        }
        if let Some(c) = &self.cause {
            s.push_str(&format!("cause: {c}\n"));
        }
        s
    }
}

#[derive(Clone, Copy, Default)]
pub struct EpisodeProviders<'a> {
    pub detector: Option<&'a dyn CompletionProvider>,
    pub generator: Option<&'a dyn CompletionProvider>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EpisodeConfig {
    pub detect: DetectConfig,
    pub recovery: RecoveryConfig,
}

fn lines(world: &WorldState) -> Vec<String> {
    world.objects().nodes().map(|n| n.canonical_line()).collect()
}

/// Run `tree` from the configured world, monitoring every unit and
/// recovering from detected failures.
///
/// Errors are for invalid inputs only; an episode that cannot finish is an
/// `Ok` log with status failure and a cause.
pub fn run_episode(
    config: &WorldConfig,
    store: &KnowledgeStore,
    tree: &TaskTree,
    injections: &[FailureInjection],
    providers: EpisodeProviders<'_>,
    corpus: &ExampleCorpus,
    episode: &EpisodeConfig,
) -> Result<EpisodeLog, SimError> {
    if let Some(bad) = injections.iter().find(|i| i.at_unit >= tree.len()) {
        return Err(SimError::InjectionOutOfRange {
            at_unit: bad.at_unit,
            len: tree.len(),
        });
    }
    let report = verify_tree(tree, &config.world.to_kitchen(), &tree.goal);
    if !report.valid {
        return Err(SimError::UnverifiedTree(report.to_string()));
    }

    let executor = Executor::from_config(config);
    let rc = &episode.recovery;
    let max_len = tree.len().max(1) * rc.growth_cap;
    let max_runs = max_len + tree.len() * rc.reexecute_cap;

    let mut world = config.world.clone();
    let mut active = tree.clone();
    let mut origins: Vec<UnitOrigin> = (0..tree.len()).map(UnitOrigin::Plan).collect();
    let mut pending: Vec<&FailureInjection> = injections.iter().collect();
    let mut repeats: BTreeMap<usize, usize> = BTreeMap::new();
    let mut log = EpisodeLog {
        records: Vec::new(),
        status: EpisodeStatus::Failure,
        cause: None,
        recoveries: Vec::new(),
        detector_calls: 0,
        generator_calls: 0,
        final_state: Vec::new(),
    };
    let calls = |p: Option<&dyn CompletionProvider>| p.map_or(0, |p| p.call_count());
    let (det0, gen0) = (calls(providers.detector), calls(providers.generator));
    let mut i = 0;
    let mut runs = 0;

    while i < active.len() && log.cause.is_none() {
        runs += 1;
        if runs > max_runs {
            log.cause = Some(format!("execution budget of {max_runs} units exhausted"));
            break;
        }
        let unit = active.units[i].clone();
        let origin = origins[i];
        let injection = match origin {
            UnitOrigin::Plan(k) => pending.iter().position(|inj| inj.at_unit == k).map(|p| pending.remove(p)),
            UnitOrigin::Recovery => None,
        };
        let mut record = UnitRecord {
            unit_id: unit.unit_id().clone(),
            origin,
            pre_state: lines(&world),
            post_state: Vec::new(),
            frames: 0,
            blocked: false,
            detection: None,
            decision: None,
            recovery: None,
        };

        let detection = match executor.execute(&world, &unit, injection) {
            Ok(run) => {
                record.frames = run.frames.len();
                let report = match providers.detector {
                    None => None,
                    Some(d) => {
                        let ctx = DetectionContext {
                            unit: &unit,
                            scene: run.world.registry(),
                        };
                        match detect(d, &run.frames, executor.render.unit_duration, ctx, &episode.detect) {
                            Ok(r) => r,
                            Err(e) => {
                                log.cause = Some(format!("detector: {e}"));
                                None
                            }
                        }
                    }
                };
                world = run.world;
                report
            }
            Err(SimError::Unsafe { verb, missing_flags }) => {
                record.blocked = true;
                let flags: Vec<&str> = missing_flags.iter().map(String::as_str).collect();
                let mut r = FailureReport::failure(
                    FailureType::UnsafeAction,
                    &format!("{verb} blocked: requires {}", flags.join(", ")),
                    &[],
                );
                r.affected_objects = unit.inputs().iter().map(|n| n.name.clone()).collect();
                r.unit_id = Some(unit.unit_id().clone());
                Some(r)
            }
            Err(e) => {
                log.cause = Some(e.to_string());
                None
            }
        };
        record.post_state = lines(&world);

        let Some(report) = detection else {
            log.records.push(record);
            if log.cause.is_none() {
                i += 1;
            }
            continue;
        };

        let mut decision = decide_strategy(&report, &world, &unit);
        let count = repeats.entry(i).or_default();
        if decision.kind == RecoveryKind::ReExecute && *count >= rc.reexecute_cap {
            decision = RecoveryDecision {
                kind: RecoveryKind::Replan,
                rationale: format!("re-execution cap of {} reached", rc.reexecute_cap),
            };
        }
        record.detection = Some(report.clone());
        record.decision = Some(decision.clone());
        if decision.kind == RecoveryKind::ReExecute {
            *count += 1;
            record.recovery = Some(RecoveryOutcome::Repeated);
            log.records.push(record);
            continue;
        }

        // Re-plan: FailNet first, then generation. Each candidate is tried
        // before the failed unit and then right after it.
        let try_splice = |rt: &RecoveryTree| -> Option<(TaskTree, usize)> {
            if active.len() + rt.units.len() > max_len {
                return None;
            }
            [i, i + 1]
                .into_iter()
                .find_map(|at| splice(&active, &rt.units, at, &world).ok().map(|t| (t, at)))
        };
        let mut chosen: Option<(RecoveryTree, TaskTree, usize)> = None;
        let mut cause = String::from("no FailNet strategy matches");
        if let Some(rt) = search_failnet(store, &report, &world) {
            match try_splice(&rt) {
                Some((t, at)) => chosen = Some((rt, t, at)),
                None => cause = "FailNet strategy does not fit the plan".into(),
            }
        }
        if chosen.is_none() {
            match providers.generator {
                None => cause.push_str(" and no generator is configured"),
                Some(g) => {
                    let site = RepairSite {
                        tree: &active,
                        failed_index: i,
                        capabilities: config.capabilities.as_ref(),
                    };
                    match generate_recovery(g, &report, &world, site, corpus, rc) {
                        Ok(rt) => match try_splice(&rt) {
                            Some((t, at)) => chosen = Some((rt, t, at)),
                            None => cause = "generated recovery exceeds the growth cap".into(),
                        },
                        Err(e) => cause = format!("generation failed: {e}"),
                    }
                }
            }
        }
        match chosen {
            Some((rt, spliced, at)) => {
                record.recovery = Some(RecoveryOutcome::Spliced {
                    provenance: rt.provenance,
                    units: rt.units.len(),
                    at,
                });
                origins.splice(at..at, std::iter::repeat_n(UnitOrigin::Recovery, rt.units.len()));
                let shifted: BTreeMap<usize, usize> =
                    repeats.iter().map(|(&k, &v)| (if k >= at { k + rt.units.len() } else { k }, v)).collect();
                repeats = shifted;
                active = spliced;
                log.recoveries.push(rt);
                i = at;
            }
            None => {
                record.recovery = Some(RecoveryOutcome::Failed { cause: cause.clone() });
                log.cause = Some(cause);
            }
        }
        log.records.push(record);
    }

    if log.cause.is_none() {
        if world.satisfies(&tree.goal) {
            log.status = EpisodeStatus::Success;
        } else {
            log.cause = Some(format!("goal {} not reached", tree.goal));
        }
    }
    log.final_state = lines(&world);
    log.detector_calls = calls(providers.detector) - det0;
    log.generator_calls = calls(providers.generator) - gen0;
    Ok(log)
}

/// Commit the generated recoveries of a finished episode.
pub fn commit_episode(store: &mut KnowledgeStore, log: &EpisodeLog) -> Result<usize, crate::kg::StoreError> {
    let mut added = 0;
    for rt in &log.recoveries {
        added += crate::recovery::commit_recovery(store, rt, log.succeeded())?.added;
    }
    Ok(added)
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("the gold tree is empty")]
pub struct EmptyGold;

/// Longest common subsequence of the executed nominal unit ids and the gold
/// ids, divided by the gold length.
pub fn progress_score(log: &EpisodeLog, gold: &TaskTree) -> Result<f64, EmptyGold> {
    progress_of(&log.nominal_unit_ids(), &gold.unit_ids())
}

pub fn progress_of(executed: &[UnitId], gold: &[UnitId]) -> Result<f64, EmptyGold> {
    if gold.is_empty() {
        return Err(EmptyGold);
    }
    let mut prev = vec![0usize; gold.len() + 1];
    for e in executed {
        let mut cur = vec![0usize; gold.len() + 1];
        for (j, g) in gold.iter().enumerate() {
            cur[j + 1] = if e == g { prev[j] + 1 } else { prev[j + 1].max(cur[j]) };
        }
        prev = cur;
    }
    Ok(prev[gold.len()] as f64 / gold.len() as f64)
}
