//! `tale` command line.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use tale_core::env::{TaskId, TaskSpec};
use tale_core::harness::{check_plan, Algorithm, Clock, ExperimentConfig, Trainer};
use tale_core::planner::{fixture_plan, plan_task, AffordanceSpec, FixtureBackend, PlanContext, PromptSet, TaskPlan};

use crate::backend::HttpBackend;
use crate::checkpoint;
use crate::config::{experiment_to_toml, RunConfig};
use crate::error::{Result, TaleError};
use crate::files::{plan_path, read_plan, read_scene, write_atomic, write_plan};
use crate::records::{write_episodes, write_explore, write_metrics};

pub const EXIT_USAGE: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "tale", version, about = "Plan-guided residual RL in a pick-and-place micro-world")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default)]
struct Common {
    /// pickcube, peginsert or putbox
    #[arg(long)]
    task: Option<String>,
    /// TOML run configuration
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory of cached plans (`<task>.json`)
    #[arg(long)]
    plans: Option<PathBuf>,
    /// Do not contact the LLM backend
    #[arg(long)]
    offline: bool,
    /// Output file or directory
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the planner (or replay a cached plan offline), validate it and write the cache
    Plan {
        #[command(flatten)]
        common: Common,
    },
    /// Train a residual policy
    Train {
        #[command(flatten)]
        common: Common,
        /// td3 or ppo
        #[arg(long)]
        algo: Option<String>,
        /// Run seed, or a comma-separated list for a sweep
        #[arg(long)]
        seed: Option<String>,
        /// Total environment steps
        #[arg(long)]
        steps: Option<u64>,
        /// Continue from the checkpoint in the output directory
        #[arg(long)]
        resume: bool,
    },
    /// Evaluate a trained checkpoint
    Eval {
        #[command(flatten)]
        common: Common,
        /// Evaluation episodes (default: the run's eval_episodes)
        #[arg(long)]
        episodes: Option<u64>,
    },
    /// Pretty-print a cached plan
    InspectPlan {
        #[command(flatten)]
        common: Common,
    },
}

struct WallClock(Instant);

impl Clock for WallClock {
    fn seconds(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}

fn usage(msg: &str) -> i32 {
    eprintln!("error: {msg}\n\nFor more information, try '--help'.");
    EXIT_USAGE
}

/// Runs the tool on `argv` (including the program name) and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Plan { common } => with_task(&common, |run, task| cmd_plan(&common, run, task)),
        Command::InspectPlan { common } => with_task(&common, |run, task| cmd_inspect(&common, run, task)),
        Command::Train { common, algo, seed, steps, resume } => {
            with_task(&common, |run, task| cmd_train(&common, run, task, algo.as_deref(), seed.as_deref(), steps, resume))
        }
        Command::Eval { common, episodes } => cmd_eval(&common, episodes).map(|_| 0),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn load_config(common: &Common) -> Result<RunConfig> {
    match &common.config {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    }
}

/// Loads the configuration and resolves the task; a missing task is a usage error.
fn with_task(common: &Common, f: impl FnOnce(RunConfig, TaskId) -> Result<i32>) -> Result<i32> {
    let mut run = load_config(common)?;
    let task = match &common.task {
        Some(t) => t.parse::<TaskId>().map_err(|e| TaleError::Config(e.to_string()))?,
        None if run.task_given => run.experiment.task,
        None => return Ok(usage("the following required arguments were not provided: --task <TASK>")),
    };
    run.experiment.task = task;
    if let Some(p) = &common.plans {
        run.planner.plans = Some(p.clone());
    }
    run.planner.offline |= common.offline;
    if let Some(o) = &common.out {
        run.output.out = Some(o.clone());
    }
    f(run, task)
}

fn scene(run: &RunConfig, task: TaskId) -> Result<TaskSpec> {
    match &run.scene {
        Some(p) => {
            let s = read_scene(p)?;
            if s.task_id != task {
                return Err(TaleError::Scene(format!("{} describes {}, not {task}", p.display(), s.task_id)));
            }
            Ok(s)
        }
        None => Ok(TaskSpec::builtin(task)),
    }
}

fn cached_plan(run: &RunConfig, task: TaskId) -> Result<Option<(PathBuf, TaskPlan)>> {
    let Some(dir) = &run.planner.plans else { return Ok(None) };
    let p = plan_path(dir, task);
    if !p.exists() {
        return Ok(None);
    }
    let plan = read_plan(&p)?;
    Ok(Some((p, plan)))
}

/// Plan used for training: the cache if present, otherwise the built-in fixture.
fn training_plan(run: &RunConfig, task: TaskId, spec: &TaskSpec) -> Result<TaskPlan> {
    let plan = match cached_plan(run, task)? {
        Some((p, plan)) => {
            log::info!("using cached plan {}", p.display());
            plan
        }
        None => {
            if run.planner.plans.is_some() {
                log::warn!("no cached plan for {task}; using the built-in fixture");
            }
            fixture_plan(task)
        }
    };
    check_plan(&plan, spec)?;
    Ok(plan)
}

fn compact<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string(v).unwrap_or_default()
}

fn describe_affordance(a: &AffordanceSpec) -> String {
    match a {
        AffordanceSpec::Pick(p) => format!(
            "{}  at {}, ee z {}, ee y {}",
            p.description,
            compact(&p.position),
            compact(&p.ee_z_axis),
            compact(&p.ee_y_axis)
        ),
        AffordanceSpec::Transport(t) => {
            let q = t.relative_pose.position;
            format!("{}  relative to {} at [{:.3}, {:.3}, {:.3}]", t.description, t.reference_object, q.x, q.y, q.z)
        }
    }
}

pub fn plan_summary(plan: &TaskPlan, task: TaskId) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{task}: \"{}\" ({:?}, model {}, {} queries)",
        plan.task_description,
        plan.provenance.source,
        plan.provenance.model,
        plan.query_count()
    );
    for (j, step) in plan.steps.iter().enumerate() {
        let _ = writeln!(s, "  {}. {} {}: m = {}", j + 1, step.kind, step.object_id, step.affordances.len());
        for (i, a) in step.affordances.iter().enumerate() {
            let _ = writeln!(s, "       mode {i}: {}", describe_affordance(a));
        }
    }
    s
}

fn cmd_plan(common: &Common, run: RunConfig, task: TaskId) -> Result<i32> {
    let spec = scene(&run, task)?;
    let ctx = PlanContext::from_task(&spec);
    let prompts = PromptSet::default();
    let plan = if run.planner.offline {
        let source = match cached_plan(&run, task)? {
            Some((_, p)) => p,
            None => fixture_plan(task),
        };
        let mut backend = FixtureBackend::new(&source);
        plan_task(&ctx, &mut backend, &prompts)?
    } else {
        let mut backend = HttpBackend::new(run.backend.clone()).map_err(|e| TaleError::Backend(e.0))?;
        plan_task(&ctx, &mut backend, &prompts)?
    };
    check_plan(&plan, &spec)?;
    print!("{}", plan_summary(&plan, task));
    let target = match (&common.out, &run.planner.plans) {
        (Some(o), _) if o.extension().is_some_and(|e| e == "json") => Some(o.clone()),
        (Some(o), _) => Some(plan_path(o, task)),
        (None, Some(d)) if !run.planner.offline => Some(plan_path(d, task)),
        _ => None,
    };
    if let Some(t) = target {
        write_plan(&t, &plan)?;
        println!("wrote {}", t.display());
    }
    Ok(0)
}

fn cmd_inspect(_common: &Common, run: RunConfig, task: TaskId) -> Result<i32> {
    let (path, plan) = match cached_plan(&run, task)? {
        Some(x) => x,
        None => match &run.planner.plans {
            Some(d) => return Err(TaleError::Plan(format!("no plan cache at {}", plan_path(d, task).display()))),
            None => (PathBuf::from("<built-in fixture>"), fixture_plan(task)),
        },
    };
    println!("{}", path.display());
    print!("{}", plan_summary(&plan, task));
    println!("{}", tale_core::planner::plan_to_json(&plan).trim_end());
    Ok(0)
}

fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    s.split(',')
        .map(|x| x.trim().parse::<u64>().map_err(|_| TaleError::Config(format!("bad seed `{x}`"))))
        .collect()
}

fn cmd_train(
    _common: &Common,
    mut run: RunConfig,
    task: TaskId,
    algo: Option<&str>,
    seed: Option<&str>,
    steps: Option<u64>,
    resume: bool,
) -> Result<i32> {
    if let Some(a) = algo {
        run.experiment.algorithm = a.parse::<Algorithm>()?;
    }
    if let Some(n) = steps {
        run.experiment.total_steps = n;
    }
    let seeds = match seed {
        Some(s) => parse_seeds(s)?,
        None => vec![run.experiment.seed],
    };
    run.experiment.validate()?;
    let spec = scene(&run, task)?;
    let plan = training_plan(&run, task, &spec)?;
    let base = run.output.out.clone().unwrap_or_else(|| {
        PathBuf::from("runs").join(format!("{}-{}", task.short_name(), run.experiment.algorithm.as_str()))
    });
    for &s in &seeds {
        experiment_to_toml(&ExperimentConfig { seed: s, ..run.experiment.clone() })?;
    }
    let mut finals = Vec::new();
    for &s in &seeds {
        let mut cfg = run.clone();
        cfg.experiment.seed = s;
        let dir = if seeds.len() > 1 { base.join(format!("seed-{s}")) } else { base.clone() };
        let rate = train_one(&cfg, &spec, &plan, &dir, resume)?;
        println!("{task} {} seed {s}: final success rate {rate:.3} ({})", cfg.experiment.algorithm.as_str(), dir.display());
        finals.push(rate);
    }
    if finals.len() > 1 {
        let mean = finals.iter().sum::<f64>() / finals.len() as f64;
        println!("mean over {} seeds: {mean:.3}", finals.len());
    }
    Ok(0)
}

fn write_outputs(dir: &Path, t: &Trainer) -> Result<()> {
    let modes = t.plan.mode_counts();
    write_metrics(&dir.join("metrics.csv"), &t.metrics, &modes)?;
    write_explore(&dir.join("explore.csv"), &t.explore_log, &modes)
}

fn train_one(run: &RunConfig, spec: &TaskSpec, plan: &TaskPlan, dir: &Path, resume: bool) -> Result<f64> {
    let ckpt = dir.join("checkpoint");
    let mut trainer = if resume && ckpt.exists() {
        let t = checkpoint::load(&ckpt)?;
        let mut stored = t.cfg.clone();
        stored.total_steps = run.experiment.total_steps;
        if stored != run.experiment {
            return Err(TaleError::Config(format!("{} was trained with a different configuration", ckpt.display())));
        }
        if t.partial_episode && t.env_steps < run.experiment.total_steps {
            return Err(TaleError::Checkpoint("the run stopped inside an episode and cannot be extended".into()));
        }
        let mut t = t;
        t.cfg.total_steps = run.experiment.total_steps;
        log::info!("resuming {} from {}", t.describe(), ckpt.display());
        t
    } else {
        Trainer::with_scene(run.experiment.clone(), spec.clone(), plan.clone())?
    };
    std::fs::create_dir_all(dir).map_err(TaleError::io(dir))?;
    write_atomic(&dir.join("config.toml"), experiment_to_toml(&trainer.cfg)?.as_bytes())?;
    write_plan(&dir.join("plan.json"), &trainer.plan)?;

    let clock = WallClock(Instant::now());
    let every = run.output.checkpoint_every;
    let mut rows = trainer.metrics.len();
    let outcome = trainer.run(&clock, &mut |t, _| {
        if t.metrics.len() != rows {
            rows = t.metrics.len();
            if let Some(r) = t.metrics.last() {
                log::info!("step {:>7}  episodes {:>5}  success {:.2}  return {:.2}", r.env_step, t.episodes, r.success_rate, r.mean_return);
            }
        }
        if every > 0 && t.episodes % every == 0 {
            let elapsed = t.elapsed_offset + clock.seconds();
            checkpoint::save(&ckpt, t, elapsed).map_err(|e| tale_core::harness::HarnessError::Callback(e.to_string()))?;
            write_outputs(dir, t).map_err(|e| tale_core::harness::HarnessError::Callback(e.to_string()))?;
        }
        Ok(())
    });
    if let Err(e) = outcome {
        write_outputs(dir, &trainer)?;
        if ckpt.exists() {
            eprintln!("last checkpoint: {}", ckpt.display());
        }
        return Err(e.into());
    }
    let elapsed = trainer.elapsed_offset + clock.seconds();
    checkpoint::save(&ckpt, &trainer, elapsed)?;
    write_outputs(dir, &trainer)?;
    Ok(trainer.metrics.last().map(|r| r.success_rate).unwrap_or(0.0))
}

fn checkpoint_dir(out: &Path) -> PathBuf {
    if out.join("manifest.json").exists() {
        out.to_path_buf()
    } else {
        out.join("checkpoint")
    }
}

fn cmd_eval(common: &Common, episodes: Option<u64>) -> Result<()> {
    let run = load_config(common)?;
    let out = common
        .out
        .clone()
        .or(run.output.out.clone())
        .ok_or_else(|| TaleError::Config("eval needs --out pointing at a run or checkpoint directory".into()))?;
    let t = checkpoint::load(&checkpoint_dir(&out))?;
    let wanted = match &common.task {
        Some(s) => Some(s.parse::<TaskId>().map_err(|e| TaleError::Config(e.to_string()))?),
        None if run.task_given => Some(run.experiment.task),
        None => None,
    };
    if let Some(w) = wanted {
        if w != t.cfg.task {
            return Err(TaleError::Config(format!("checkpoint is for {}, not {w}", t.cfg.task)));
        }
    }
    let n = episodes.unwrap_or(t.cfg.eval_episodes);
    if n == 0 {
        return Err(TaleError::Config("--episodes must be positive".into()));
    }
    let report = t.evaluate(n)?;
    for e in &report.episodes {
        let modes: Vec<String> = e.modes().iter().map(|m| m.to_string()).collect();
        println!(
            "seed {:>20}  {}  return {:>8.3}  length {:>3}  modes {}",
            e.seed,
            if e.success { "success" } else if e.collision { "collision" } else { "failure" },
            e.episode_return,
            e.length,
            modes.join("-")
        );
    }
    let wins = report.episodes.iter().filter(|e| e.success).count();
    println!("success rate {:.3} ({wins}/{n}) for {} at step {}", report.success_rate, t.cfg.task, t.env_steps);
    let dir = if out.join("manifest.json").exists() { out.parent().unwrap_or(&out).to_path_buf() } else { out };
    write_episodes(&dir.join("eval.csv"), &report.episodes)
}
