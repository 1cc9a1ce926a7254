use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use star_core::fm::{CompletionProvider, ExampleCorpus};
use star_core::harness::{
    cmd_eval_episodes, cmd_eval_menu, cmd_grid, cmd_merge, cmd_plan, cmd_simulate, HarnessError, MenuOptions,
    MetricsReport, PlanOptions, ProviderSpec,
};
use star_core::kg::Section;
use star_core::monitor::{DetectionMode, GridSpec};
use star_core::retrieval::DishTaxonomy;

#[derive(Parser)]
#[command(name = "star", version, about = "Task-tree planning, simulated execution and failure recovery")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Retrieve or generate a task tree for a goal and compile it to PDDL.
    Plan(PlanArgs),
    /// Run one episode manifest in the simulator.
    Simulate(SimulateArgs),
    /// Evaluate a menu (`.csv`) or an episode dataset (`.json`).
    Eval(EvalArgs),
    /// Tile `t<seconds>.png` frames into one grid image.
    Grid(GridArgs),
    /// Merge a subgraph file into a knowledge store.
    Merge(MergeArgs),
}

#[derive(Args)]
struct Knowledge {
    /// Dish taxonomy file; the bundled one otherwise.
    #[arg(long)]
    taxonomy: Option<PathBuf>,
    /// Few-shot example corpus; the bundled one otherwise.
    #[arg(long)]
    corpus: Option<PathBuf>,
}

impl Knowledge {
    fn load(&self) -> Result<(DishTaxonomy, ExampleCorpus), HarnessError> {
        let taxonomy = match &self.taxonomy {
            Some(p) => DishTaxonomy::load(p).map_err(|e| HarnessError::Input(format!("{}: {e}", p.display())))?,
            None => DishTaxonomy::default(),
        };
        let corpus = match &self.corpus {
            Some(p) => ExampleCorpus::load(p).map_err(|e| HarnessError::Input(format!("{}: {e}", p.display())))?,
            None => ExampleCorpus::default(),
        };
        Ok((taxonomy, corpus))
    }
}

#[derive(Args)]
struct PlanArgs {
    /// Goal object, e.g. `"pancake | cooked"` or just `pancake`.
    goal: String,
    #[arg(long)]
    store: PathBuf,
    #[arg(long)]
    world: PathBuf,
    /// Output directory for the tree and PDDL files.
    #[arg(long, default_value = "plan-out")]
    out: PathBuf,
    /// `mock:<script.json>` or `http`.
    #[arg(long)]
    provider: Option<ProviderSpec>,
    #[command(flatten)]
    knowledge: Knowledge,
}

#[derive(Args)]
struct SimulateArgs {
    manifest: PathBuf,
    /// Extra knowledge; learned recoveries are committed here.
    #[arg(long)]
    store: Option<PathBuf>,
    #[arg(long, default_value = "grid")]
    mode: DetectionMode,
    #[arg(long, default_value = "episode-log.json")]
    log: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// `menu.csv` (date,dish) or an episode dataset `.json`.
    dataset: PathBuf,
    /// Store file; merged plans and learned recoveries are saved back to it.
    #[arg(long)]
    store: Option<PathBuf>,
    /// Kitchen world for menu evaluation.
    #[arg(long)]
    world: Option<PathBuf>,
    /// Directory of `<dish-slug>.foon` gold trees for menu evaluation.
    #[arg(long)]
    gold: Option<PathBuf>,
    /// Planner for menu evaluation: `mock:<script.json>` or `http`.
    #[arg(long)]
    provider: Option<ProviderSpec>,
    #[arg(long, default_value = "grid")]
    mode: DetectionMode,
    /// Worker threads for episode evaluation; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Also write the report as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
    #[command(flatten)]
    knowledge: Knowledge,
}

#[derive(Args)]
struct GridArgs {
    frames: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 3)]
    rows: u32,
    #[arg(long, default_value_t = 3)]
    cols: u32,
    #[arg(long, default_value_t = 32)]
    cell_w: u32,
    #[arg(long, default_value_t = 32)]
    cell_h: u32,
}

#[derive(Args)]
struct MergeArgs {
    subgraph: PathBuf,
    #[arg(long)]
    store: PathBuf,
    /// `foon` or `failnet`.
    #[arg(long, default_value = "foon")]
    section: Section,
}

fn provider(spec: Option<&ProviderSpec>) -> Result<Option<Box<dyn CompletionProvider>>, HarnessError> {
    spec.map(ProviderSpec::build).transpose()
}

fn plan(args: PlanArgs) -> Result<ExitCode> {
    let (taxonomy, corpus) = args.knowledge.load()?;
    let provider = provider(args.provider.as_ref())?;
    let out = cmd_plan(&PlanOptions {
        goal: args.goal,
        world: args.world,
        store: args.store,
        out: args.out,
        provider: provider.as_deref(),
        taxonomy,
        corpus,
    })?;
    println!("Case {} ({} units, {} provider calls)", out.case.number(), out.tree.len(), out.provider_calls);
    if let Some(m) = out.merged {
        println!("merged: {m}");
    }
    for f in &out.files {
        println!("wrote {}", f.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn simulate(args: SimulateArgs) -> Result<ExitCode> {
    let out = cmd_simulate(&args.manifest, args.store.as_deref(), args.mode, &args.log)?;
    print!("{}", out.summary);
    if let Some(n) = out.committed {
        println!("committed {n} recovery units");
    }
    println!("log: {}", out.log_path.display());
    Ok(if out.log.succeeded() { ExitCode::SUCCESS } else { ExitCode::from(3) })
}

fn eval(args: EvalArgs) -> Result<ExitCode> {
    let is_menu = args.dataset.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let report = if is_menu {
        eval_menu(&args)?
    } else {
        if args.provider.is_some() {
            eprintln!("note: --provider is ignored for episode datasets; detectors come from the manifests");
        }
        cmd_eval_episodes(&args.dataset, args.store.as_deref(), args.mode, args.jobs)?.report
    };
    print!("{}", report.to_table());
    if let Some(path) = &args.json {
        write_json(path, &report)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn eval_menu(args: &EvalArgs) -> Result<MetricsReport, HarnessError> {
    let need = |v: &Option<PathBuf>, flag: &str| {
        v.clone()
            .ok_or_else(|| HarnessError::Input(format!("menu evaluation needs --{flag}")))
    };
    let (taxonomy, corpus) = args.knowledge.load()?;
    let provider = provider(args.provider.as_ref())?;
    let opts = MenuOptions {
        menu: args.dataset.clone(),
        gold: need(&args.gold, "gold")?,
        world: need(&args.world, "world")?,
        store: need(&args.store, "store")?,
        provider: provider.as_deref(),
        taxonomy,
        corpus,
        persist: true,
    };
    Ok(cmd_eval_menu(&opts)?.report)
}

fn write_json(path: &Path, report: &MetricsReport) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    std::fs::write(path, report.to_json_string()).with_context(|| format!("writing {}", path.display()))
}

fn grid(args: GridArgs) -> Result<ExitCode> {
    let spec = GridSpec {
        rows: args.rows,
        cols: args.cols,
        cell_w: args.cell_w,
        cell_h: args.cell_h,
    };
    let out = cmd_grid(&args.frames, &args.out, spec)?;
    println!("{} frames, {}x{}, sha256 {}", out.placed, out.width, out.height, out.checksum);
    Ok(ExitCode::SUCCESS)
}

fn merge(args: MergeArgs) -> Result<ExitCode> {
    let r = cmd_merge(&args.store, &args.subgraph, args.section)?;
    println!("added {} skipped {}", r.added, r.skipped_duplicates);
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Plan(a) => plan(a),
        Command::Simulate(a) => simulate(a),
        Command::Eval(a) => eval(a),
        Command::Grid(a) => grid(a),
        Command::Merge(a) => merge(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e.downcast_ref::<HarnessError>().map_or(2, HarnessError::exit_code);
            ExitCode::from(code as u8)
        }
    }
}
