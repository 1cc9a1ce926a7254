use std::path::{Path, PathBuf};

use super::dataset::read;
use super::metrics::{DishResult, EpisodeResult, MetricsReport};
use super::{load_script, dish_slug, DetectorSpec, EpisodeDataset, EpisodeManifest, HarnessError, MenuDataset};
use crate::fm::{generate_or_repair, CompletionProvider, ExampleCorpus, FmError, GenerateConfig};
use crate::kg::{parse_subgraph, serialize_subgraph, KnowledgeStore, MergeReport, Section, StoreError, TaskTree};
use crate::monitor::{compose_grid, load_frames_dir, DetectConfig, DetectionMode, GridSpec, MonitorError};
use crate::par::{self, Execution};
use crate::pddl::compile_tree;
use crate::retrieval::{retrieve, DishTaxonomy, KitchenState, RetrievalCase, RetrievalOutcome};
use crate::sim::{
    commit_episode, progress_score, run_episode, EpisodeConfig, EpisodeLog, EpisodeProviders, FrameOracle, SimError,
    WorldConfig,
};

fn store_err(e: StoreError) -> HarnessError {
    HarnessError::Input(e.to_string())
}

fn sim_err(e: SimError) -> HarnessError {
    match e {
        SimError::UnverifiedTree(_) => HarnessError::Planning(e.to_string()),
        _ => HarnessError::Input(e.to_string()),
    }
}

fn fm_err(e: FmError) -> HarnessError {
    match e {
        FmError::Provider(p) => HarnessError::Provider(p.to_string()),
        FmError::CorpusTooSmall { .. } | FmError::NoGoal(_) => HarnessError::Input(e.to_string()),
        _ => HarnessError::Planning(e.to_string()),
    }
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), HarnessError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| HarnessError::input(dir.display(), e))?;
    }
    std::fs::write(path, contents).map_err(|e| HarnessError::input(path.display(), e))
}

fn load_world(path: &Path) -> Result<WorldConfig, HarnessError> {
    WorldConfig::parse(&read(path)?).map_err(|e| HarnessError::input(path.display(), e))
}

fn load_tree(path: &Path) -> Result<TaskTree, HarnessError> {
    let units = parse_subgraph(&read(path)?).map_err(|e| HarnessError::input(path.display(), e))?;
    TaskTree::from_units(units).ok_or_else(|| HarnessError::Input(format!("{}: no units", path.display())))
}

fn calls(p: Option<&dyn CompletionProvider>) -> usize {
    p.map_or(0, |p| p.call_count())
}

struct Planned {
    case: RetrievalCase,
    tree: TaskTree,
    calls: usize,
}

/// Retrieve, or generate through the provider on Case 1/2.
fn plan_goal(
    store: &KnowledgeStore,
    goal: &str,
    kitchen: &KitchenState,
    taxonomy: &DishTaxonomy,
    provider: Option<&dyn CompletionProvider>,
    corpus: &ExampleCorpus,
) -> Result<Planned, HarnessError> {
    let before = calls(provider);
    let outcome = retrieve(store, goal, kitchen, taxonomy).map_err(|e| HarnessError::Input(e.to_string()))?;
    let case = outcome.case();
    let tree = match outcome {
        RetrievalOutcome::ExactMatch { tree } => tree,
        _ => {
            let provider = provider
                .ok_or_else(|| HarnessError::Planning(format!("{case}: no stored plan for {goal:?} and no provider")))?;
            generate_or_repair(provider, &outcome, goal, kitchen, corpus, &GenerateConfig::default())
                .map_err(fm_err)?
                .tree
        }
    };
    Ok(Planned { case, tree, calls: calls(provider) - before })
}

pub struct PlanOptions<'a> {
    pub goal: String,
    pub world: PathBuf,
    pub store: PathBuf,
    pub out: PathBuf,
    pub provider: Option<&'a dyn CompletionProvider>,
    pub taxonomy: DishTaxonomy,
    pub corpus: ExampleCorpus,
}

#[derive(Debug, Clone)]
pub struct PlanOutput {
    pub case: RetrievalCase,
    pub tree: TaskTree,
    pub provider_calls: usize,
    pub merged: Option<MergeReport>,
    pub files: Vec<PathBuf>,
}

/// Plan a goal, write the tree and one PDDL domain, problem and plan per
/// unit, and merge generated trees back into the store file.
pub fn cmd_plan(opts: &PlanOptions<'_>) -> Result<PlanOutput, HarnessError> {
    let mut store = KnowledgeStore::load(&opts.store).map_err(store_err)?;
    let kitchen = load_world(&opts.world)?.world.to_kitchen();
    let planned = plan_goal(&store, &opts.goal, &kitchen, &opts.taxonomy, opts.provider, &opts.corpus)?;
    let compiled = compile_tree(&planned.tree, &kitchen).map_err(|e| HarnessError::Planning(e.to_string()))?;

    let mut files = Vec::new();
    let mut emit = |name: String, text: String| -> Result<(), HarnessError> {
        let path = opts.out.join(name);
        write(&path, text)?;
        files.push(path);
        Ok(())
    };
    emit("tree.foon".into(), serialize_subgraph(&planned.tree.units))?;
    for (i, c) in compiled.iter().enumerate() {
        let n = i + 1;
        emit(format!("pddl/unit-{n:02}-domain.pddl"), c.domain.to_string())?;
        emit(format!("pddl/unit-{n:02}-problem.pddl"), c.problem.to_string())?;
        emit(format!("pddl/unit-{n:02}.plan"), c.plan_text())?;
    }

    let merged = if planned.case == RetrievalCase::ExactMatch {
        None
    } else {
        let report = store.merge(&planned.tree.units, Section::Foon).map_err(store_err)?;
        store.save(&opts.store).map_err(store_err)?;
        Some(report)
    };
    Ok(PlanOutput {
        case: planned.case,
        tree: planned.tree,
        provider_calls: planned.calls,
        merged,
        files,
    })
}

/// Providers described by a manifest, owned for the length of one episode.
struct ManifestProviders {
    detector: Option<Box<dyn CompletionProvider>>,
    generator: Option<Box<dyn CompletionProvider>>,
}

impl ManifestProviders {
    fn build(m: &EpisodeManifest) -> Result<Self, HarnessError> {
        let detector: Option<Box<dyn CompletionProvider>> = match &m.detector {
            DetectorSpec::Oracle => Some(Box::new(FrameOracle::new())),
            DetectorSpec::None => None,
            DetectorSpec::Script(p) => Some(Box::new(load_script(p)?)),
        };
        let generator = match &m.generator {
            Some(p) => Some(Box::new(load_script(p)?) as Box<dyn CompletionProvider>),
            None => None,
        };
        Ok(ManifestProviders { detector, generator })
    }

    fn view(&self) -> EpisodeProviders<'_> {
        EpisodeProviders {
            detector: self.detector.as_deref(),
            generator: self.generator.as_deref(),
        }
    }
}

/// Run one manifest against `store` in the given detection mode.
pub fn run_manifest(
    manifest: &EpisodeManifest,
    store: &KnowledgeStore,
    mode: DetectionMode,
) -> Result<EpisodeLog, HarnessError> {
    let world = load_world(&manifest.world)?;
    let tree = load_tree(&manifest.tree)?;
    let providers = ManifestProviders::build(manifest)?;
    let config = EpisodeConfig {
        detect: DetectConfig { mode, ..DetectConfig::default() },
        ..EpisodeConfig::default()
    };
    run_episode(
        &world,
        store,
        &tree,
        &manifest.injections,
        providers.view(),
        &ExampleCorpus::default(),
        &config,
    )
    .map_err(sim_err)
}

/// Run a batch of manifests; the output order matches `manifests`.
/// Each episode sees `store` plus the manifest's own store, if any.
pub fn run_manifests(
    exec: Execution,
    manifests: &[EpisodeManifest],
    store: &KnowledgeStore,
    mode: DetectionMode,
) -> Vec<Result<EpisodeLog, HarnessError>> {
    par::map(exec, manifests, |m| {
        let kg = manifest_store(m, Some(store))?;
        run_manifest(m, &kg, mode)
    })
}

fn manifest_store(m: &EpisodeManifest, fallback: Option<&KnowledgeStore>) -> Result<KnowledgeStore, HarnessError> {
    let mut kg = match &m.store {
        Some(p) => KnowledgeStore::load(p).map_err(store_err)?,
        None => KnowledgeStore::new(),
    };
    if let Some(shared) = fallback {
        kg.absorb(shared);
    }
    Ok(kg)
}

#[derive(Debug, Clone)]
pub struct SimulateOutput {
    pub log: EpisodeLog,
    pub summary: String,
    pub log_path: PathBuf,
    /// Recovery units committed to the store file, if one was given.
    pub committed: Option<usize>,
}

/// Run a manifest and persist its JSON log. The episode also sees `store`,
/// which receives the learned recoveries.
pub fn cmd_simulate(
    manifest: &Path,
    store: Option<&Path>,
    mode: DetectionMode,
    log_path: &Path,
) -> Result<SimulateOutput, HarnessError> {
    let m = EpisodeManifest::load(manifest)?;
    let mut own = match store {
        Some(p) => Some(KnowledgeStore::load(p).map_err(store_err)?),
        None => None,
    };
    let log = run_manifest(&m, &manifest_store(&m, own.as_ref())?, mode)?;
    write(log_path, serde_json::to_string_pretty(&log).expect("log serializes") + "\n")?;
    let committed = match (store, own.as_mut()) {
        (Some(p), Some(kg)) => {
            let n = commit_episode(kg, &log).map_err(store_err)?;
            kg.save(p).map_err(store_err)?;
            Some(n)
        }
        _ => None,
    };
    Ok(SimulateOutput {
        summary: log.summary(),
        log,
        log_path: log_path.to_path_buf(),
        committed,
    })
}

pub struct MenuOptions<'a> {
    pub menu: PathBuf,
    /// Directory holding `<dish-slug>.foon` gold trees.
    pub gold: PathBuf,
    pub world: PathBuf,
    pub store: PathBuf,
    pub provider: Option<&'a dyn CompletionProvider>,
    pub taxonomy: DishTaxonomy,
    pub corpus: ExampleCorpus,
    /// Write merged plans back to the store file.
    pub persist: bool,
}

#[derive(Debug, Clone)]
pub struct MenuEval {
    pub report: MetricsReport,
    pub store: KnowledgeStore,
}

/// Plan every dish in order, execute the plan in the simulator and score it
/// against the gold tree. Generated plans are merged as the run goes.
pub fn cmd_eval_menu(opts: &MenuOptions<'_>) -> Result<MenuEval, HarnessError> {
    let menu = MenuDataset::load(&opts.menu)?;
    let world = load_world(&opts.world)?;
    let kitchen = world.world.to_kitchen();
    let mut store = KnowledgeStore::load(&opts.store).map_err(store_err)?;
    let golds = menu
        .entries
        .iter()
        .map(|e| load_tree(&opts.gold.join(format!("{}.foon", dish_slug(&e.dish)))))
        .collect::<Result<Vec<_>, _>>()?;

    let mut dishes = Vec::with_capacity(menu.entries.len());
    for (entry, gold) in menu.entries.iter().zip(&golds) {
        let mut row = DishResult {
            date: entry.date.to_string(),
            dish: entry.dish.clone(),
            case: 0,
            calls: 0,
            progress: 0.0,
            error: None,
        };
        let before = calls(opts.provider);
        match plan_goal(&store, &entry.dish, &kitchen, &opts.taxonomy, opts.provider, &opts.corpus) {
            Ok(planned) => {
                row.case = planned.case.number();
                if planned.case != RetrievalCase::ExactMatch {
                    store.merge(&planned.tree.units, Section::Foon).map_err(store_err)?;
                }
                match run_episode(
                    &world,
                    &store,
                    &planned.tree,
                    &[],
                    EpisodeProviders::default(),
                    &opts.corpus,
                    &EpisodeConfig::default(),
                ) {
                    Ok(log) => {
                        row.progress = progress_score(&log, gold).map_err(|e| HarnessError::Input(e.to_string()))?;
                        if !log.succeeded() {
                            row.error = log.cause.clone();
                        }
                    }
                    Err(e) => row.error = Some(e.to_string()),
                }
            }
            Err(HarnessError::Input(e)) => return Err(HarnessError::Input(e)),
            Err(e) => row.error = Some(e.to_string()),
        }
        row.calls = calls(opts.provider) - before;
        dishes.push(row);
    }
    if opts.persist {
        store.save(&opts.store).map_err(store_err)?;
    }
    Ok(MenuEval {
        report: MetricsReport::from_dishes(dishes),
        store,
    })
}

#[derive(Debug, Clone)]
pub struct EpisodeEval {
    pub report: MetricsReport,
    pub logs: Vec<EpisodeLog>,
    pub store: KnowledgeStore,
}

fn keyphrases_match(explanation: &str, phrases: &[String]) -> bool {
    let e = explanation.to_lowercase();
    phrases.iter().all(|p| e.contains(&p.to_lowercase()))
}

fn episode_result(m: &EpisodeManifest, log: &EpisodeLog) -> EpisodeResult {
    let report = log.first_detection();
    let a = &m.annotation;
    EpisodeResult {
        name: m.name.clone(),
        category: a.task_category,
        expected: a.true_failure_type,
        detected: report.and_then(|r| r.failure_type),
        explanation: report.map(|r| r.explanation.clone()),
        explanation_match: a
            .true_failure_type
            .map(|_| report.is_some_and(|r| keyphrases_match(&r.explanation, &a.explanation_keyphrases))),
        success: log.succeeded(),
        recoveries: log.recoveries.len(),
        detector_calls: log.detector_calls,
        generator_calls: log.generator_calls,
        error: log.cause.clone(),
    }
}

/// Run every episode of a dataset, up to `jobs` at a time (0 = all cores).
///
/// Each episode sees the store as it was before the run; learned recoveries
/// are committed afterwards in dataset order and saved when `store` is given.
pub fn cmd_eval_episodes(
    dataset: &Path,
    store: Option<&Path>,
    mode: DetectionMode,
    jobs: usize,
) -> Result<EpisodeEval, HarnessError> {
    let data = EpisodeDataset::load(dataset)?;
    let mut shared = match store {
        Some(p) => KnowledgeStore::load(p).map_err(store_err)?,
        None => KnowledgeStore::new(),
    };
    let exec = if jobs == 1 { Execution::Sequential } else { Execution::available() };
    let snapshot = shared.clone();
    let runs = par::with_jobs(jobs, || run_manifests(exec, &data.episodes, &snapshot, mode));
    let logs = runs.into_iter().collect::<Result<Vec<_>, _>>()?;
    for log in &logs {
        commit_episode(&mut shared, log).map_err(store_err)?;
    }
    if let Some(p) = store {
        shared.save(p).map_err(store_err)?;
    }
    let results = data.episodes.iter().zip(&logs).map(|(m, l)| episode_result(m, l)).collect();
    Ok(EpisodeEval {
        report: MetricsReport::from_episodes(results, data.distribution()),
        logs,
        store: shared,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridOutput {
    pub checksum: String,
    pub placed: usize,
    pub width: u32,
    pub height: u32,
}

/// Tile the `t<seconds>.png` frames of `dir`, in time order, into one PNG at `out`.
pub fn cmd_grid(dir: &Path, out: &Path, spec: GridSpec) -> Result<GridOutput, HarnessError> {
    let frames = load_frames_dir(dir).map_err(|e| HarnessError::Input(e.to_string()))?;
    let grid = compose_grid(&frames, spec).map_err(|e| match e {
        MonitorError::NoFrames => HarnessError::Input(format!("{}: no frames", dir.display())),
        other => HarnessError::Input(other.to_string()),
    })?;
    write(out, grid.to_png())?;
    Ok(GridOutput {
        checksum: grid.checksum(),
        placed: grid.placed,
        width: grid.width,
        height: grid.height,
    })
}

/// Merge a FOON-text file into one section of the store, creating the store
/// file if it does not exist yet.
pub fn cmd_merge(store: &Path, subgraph: &Path, section: Section) -> Result<MergeReport, HarnessError> {
    let mut kg = if store.exists() {
        KnowledgeStore::load(store).map_err(store_err)?
    } else {
        KnowledgeStore::new()
    };
    let units = parse_subgraph(&read(subgraph)?).map_err(|e| HarnessError::input(subgraph.display(), e))?;
    let report = kg.merge(&units, section).map_err(store_err)?;
    kg.save(store).map_err(store_err)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fm::{ScriptEntry, ScriptedProvider};
    use crate::monitor::Frame;

    const STORE: &str = "[FOON]\nU\nI potato | raw\nM chop\nO potato | chopped\n";
    const WORLD: &str = "potato | raw\nbowl | clean\n";

    fn files(dir: &Path) -> (PathBuf, PathBuf) {
        let store = dir.join("store.foon");
        let world = dir.join("kitchen.world");
        std::fs::write(&store, STORE).unwrap();
        std::fs::write(&world, WORLD).unwrap();
        (store, world)
    }

    fn plan_opts<'a>(dir: &Path, goal: &str, provider: Option<&'a dyn CompletionProvider>) -> PlanOptions<'a> {
        PlanOptions {
            goal: goal.into(),
            world: dir.join("kitchen.world"),
            store: dir.join("store.foon"),
            out: dir.join("out"),
            provider,
            taxonomy: DishTaxonomy::default(),
            corpus: ExampleCorpus::default(),
        }
    }

    #[test]
    fn plan_exact_match_writes_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        files(dir.path());
        let p = ScriptedProvider::always("unused");
        let out = cmd_plan(&plan_opts(dir.path(), "potato | chopped", Some(&p))).unwrap();
        assert_eq!(out.case, RetrievalCase::ExactMatch);
        assert_eq!((out.provider_calls, p.call_count()), (0, 0));
        assert!(out.merged.is_none());
        assert!(dir.path().join("out/tree.foon").is_file());
        assert!(dir.path().join("out/pddl/unit-01-domain.pddl").is_file());
        assert!(std::fs::read_to_string(dir.path().join("out/pddl/unit-01.plan")).unwrap().contains("chop"));
    }

    #[test]
    fn generated_plan_is_learned() {
        let dir = tempfile::tempdir().unwrap();
        files(dir.path());
        let answer = "```\nU\nI potato | raw\nI bowl | clean\nM mash\nO bowl | filled | potato\n```";
        let p = ScriptedProvider::new(vec![ScriptEntry::new("bowl", answer)]);
        let first = cmd_plan(&plan_opts(dir.path(), "bowl | filled", Some(&p))).unwrap();
        assert_eq!(first.case, RetrievalCase::NoMatch);
        assert_eq!(first.provider_calls, 1);
        assert_eq!(first.merged.unwrap().added, 1);
        let second = cmd_plan(&plan_opts(dir.path(), "bowl | filled", Some(&p))).unwrap();
        assert_eq!(second.case, RetrievalCase::ExactMatch);
        assert_eq!(second.provider_calls, 0);
    }

    #[test]
    fn plan_error_classes() {
        let dir = tempfile::tempdir().unwrap();
        files(dir.path());
        let no_provider = cmd_plan(&plan_opts(dir.path(), "soup", None)).unwrap_err();
        assert_eq!(no_provider.exit_code(), 3);
        let empty = ScriptedProvider::new(vec![]);
        assert_eq!(cmd_plan(&plan_opts(dir.path(), "soup", Some(&empty))).unwrap_err().exit_code(), 4);
        std::fs::write(dir.path().join("store.foon"), "[FOON]\nU\nI\n").unwrap();
        assert_eq!(cmd_plan(&plan_opts(dir.path(), "soup", None)).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn merge_twice_and_malformed() {
        let dir = tempfile::tempdir().unwrap();
        let sub = dir.path().join("sub.foon");
        std::fs::write(&sub, "U\nI a\nM m\nO b\n\nU\nI b\nM n\nO c\n").unwrap();
        let store = dir.path().join("kg.foon");
        assert_eq!(cmd_merge(&store, &sub, Section::Foon).unwrap().added, 2);
        let again = cmd_merge(&store, &sub, Section::Foon).unwrap();
        assert_eq!((again.added, again.skipped_duplicates), (0, 2));
        std::fs::write(&sub, "U\nI a\nX what\n").unwrap();
        let err = cmd_merge(&store, &sub, Section::Foon).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("line 3"), "{err}");
    }

    #[test]
    fn grid_command() {
        let dir = tempfile::tempdir().unwrap();
        let frames = dir.path().join("frames");
        std::fs::create_dir(&frames).unwrap();
        let spec = GridSpec { rows: 2, cols: 2, ..GridSpec::default() };
        assert_eq!(cmd_grid(&frames, &dir.path().join("g.png"), spec).unwrap_err().exit_code(), 2);
        for i in 0..4u8 {
            let f = Frame::solid(8, 8, [i * 60, 0, 0], 0.0);
            std::fs::write(frames.join(format!("t{i}.png")), f.to_png()).unwrap();
        }
        let out = cmd_grid(&frames, &dir.path().join("g.png"), spec).unwrap();
        assert_eq!((out.placed, out.width, out.height), (4, 64, 64));
        let small = GridSpec { rows: 1, cols: 3, ..GridSpec::default() };
        assert_eq!(cmd_grid(&frames, &dir.path().join("g.png"), small).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn keyphrases_are_case_insensitive() {
        assert!(keyphrases_match("The Soup became WATERY", &["watery".into(), "soup".into()]));
        assert!(!keyphrases_match("soup", &["watery".into()]));
        assert!(keyphrases_match("anything", &[]));
    }
}
