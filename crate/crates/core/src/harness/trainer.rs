use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{combine_reward, Agent, Clock, Experience, ExperimentConfig, HarnessError};
use crate::control::{intrinsic_reward, Primitive};
use crate::env::{observe, reset, step, Action, EnvState, TaskSpec};
use crate::explore::{greedy_mode, select_mode, selection_distribution, UncertaintyTable};
use crate::geometry::Pose;
use crate::planner::{parse_to_goal, TaskPlan};
use crate::rng::{eval_episode_seed, streams, training_episode_seed, CounterRng};

/// Smoothing factor of the per-mode value average in the exploration log.
pub const VALUE_EMA: f64 = 0.1;

/// Mode choice at the start of one primitive.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionRecord {
    pub primitive: usize,
    pub values: Vec<f64>,
    /// Uncertainties before the choice was applied.
    pub c: Vec<f64>,
    pub probs: Vec<f64>,
    pub chosen: usize,
    pub goal: Pose,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExploreRow {
    pub episode: u64,
    pub selection: SelectionRecord,
    /// Running average of each mode's value at this primitive.
    pub ema: Vec<Option<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub seed: u64,
    pub success: bool,
    pub collision: bool,
    pub episode_return: f64,
    pub length: u32,
    pub selections: Vec<SelectionRecord>,
}

impl EpisodeRecord {
    pub fn modes(&self) -> Vec<usize> {
        self.selections.iter().map(|s| s.chosen).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub success_rate: f64,
    pub mean_return: f64,
    pub mean_length: f64,
    pub episodes: Vec<EpisodeRecord>,
}

impl EvalReport {
    pub fn from_episodes(episodes: Vec<EpisodeRecord>) -> Self {
        let n = episodes.len().max(1) as f64;
        EvalReport {
            success_rate: episodes.iter().filter(|e| e.success).count() as f64 / n,
            mean_return: episodes.iter().map(|e| e.episode_return).sum::<f64>() / n,
            mean_length: episodes.iter().map(|e| e.length as f64).sum::<f64>() / n,
            episodes,
        }
    }

    /// Mean over episodes of `f(selection)` for each (primitive, mode); `None` where no episode got there.
    fn mode_means(&self, modes: &[usize], f: impl Fn(&SelectionRecord) -> &[f64]) -> Vec<Vec<Option<f64>>> {
        modes
            .iter()
            .enumerate()
            .map(|(j, &m)| {
                let rows: Vec<&[f64]> =
                    self.episodes.iter().flat_map(|e| &e.selections).filter(|s| s.primitive == j).map(&f).collect();
                (0..m)
                    .map(|i| (!rows.is_empty()).then(|| rows.iter().map(|r| r[i]).sum::<f64>() / rows.len() as f64))
                    .collect()
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub env_step: u64,
    pub train_episodes: u64,
    pub success_rate: f64,
    pub mean_return: f64,
    pub mean_length: f64,
    /// Mean greedy-time selection probability per (primitive, mode).
    pub mode_probs: Vec<Vec<Option<f64>>>,
    pub mode_values: Vec<Vec<Option<f64>>>,
    pub wall_clock: f64,
}

/// Checks that every plan step names scene objects and parses to a goal on a fresh scene.
pub fn check_plan(plan: &TaskPlan, task: &TaskSpec) -> Result<(), HarnessError> {
    if plan.steps.is_empty() {
        return Err(HarnessError::PlanMismatch("plan has no primitives".into()));
    }
    let state = reset(task, 0);
    for (j, s) in plan.steps.iter().enumerate() {
        if task.object_index(&s.object_id).is_none() {
            return Err(HarnessError::PlanMismatch(format!("primitive {j} targets unknown object `{}`", s.object_id)));
        }
        if s.affordances.is_empty() {
            return Err(HarnessError::PlanMismatch(format!("primitive {j} has no affordance modes")));
        }
        for a in &s.affordances {
            if a.kind() != s.kind {
                return Err(HarnessError::PlanMismatch(format!("primitive {j} mixes {} and {} modes", s.kind, a.kind())));
            }
            parse_to_goal(&state.objects, &s.object_id, a)?;
        }
    }
    Ok(())
}

struct Ctx<'a> {
    cfg: &'a ExperimentConfig,
    task: &'a TaskSpec,
    plan: &'a TaskPlan,
}

impl Ctx<'_> {
    fn base(&self, prim: &Primitive, state: &EnvState) -> [f64; 7] {
        if self.cfg.guidance.base_policy {
            prim.base_action(state, &self.cfg.controller, &self.cfg.termination).to_array()
        } else {
            [0.0; 7]
        }
    }

    /// Goals of every mode of primitive `j`, parsed from the current object poses, and their values.
    fn candidates(
        &self,
        agent: Option<&Agent>,
        state: &EnvState,
        j: usize,
    ) -> Result<(usize, Vec<Primitive>, Vec<f64>), HarnessError> {
        let s = &self.plan.steps[j];
        let obj = state
            .object_index(&s.object_id)
            .ok_or_else(|| HarnessError::PlanMismatch(format!("unknown object `{}`", s.object_id)))?;
        let mut prims = Vec::with_capacity(s.affordances.len());
        let mut values = Vec::with_capacity(s.affordances.len());
        for a in &s.affordances {
            let goal = parse_to_goal(&state.objects, &s.object_id, a)?;
            let p = Primitive::new(s.kind, obj, goal, state);
            let v = match agent {
                Some(ag) => {
                    let o = observe(state, Some(obj), &goal);
                    ag.goal_value(&o, &self.base(&p, state))?
                }
                None => 0.0,
            };
            prims.push(p);
            values.push(v);
        }
        Ok((obj, prims, values))
    }
}

struct StepResult {
    reward: f64,
    terminal: bool,
    truncated: bool,
    /// Index of the primitive that must be selected before the next step.
    next_primitive: Option<usize>,
}

impl StepResult {
    fn ended(&self) -> bool {
        self.terminal || self.truncated
    }
}

/// A single episode in progress.
struct Cursor {
    state: EnvState,
    j: usize,
    prim: Primitive,
    prim_steps: u32,
    rec: EpisodeRecord,
}

impl Cursor {
    fn new(state: EnvState, seed: u64, prim: Primitive, sel: SelectionRecord) -> Self {
        Cursor {
            state,
            j: 0,
            prim,
            prim_steps: 0,
            rec: EpisodeRecord {
                seed,
                success: false,
                collision: false,
                episode_return: 0.0,
                length: 0,
                selections: vec![sel],
            },
        }
    }

    fn begin(&mut self, j: usize, prim: Primitive, sel: SelectionRecord) {
        self.j = j;
        self.prim = prim;
        self.prim_steps = 0;
        self.rec.selections.push(sel);
    }

    fn obs(&self) -> Vec<f64> {
        observe(&self.state, Some(self.prim.object), &self.prim.goal).to_vec()
    }

    fn step(&mut self, ctx: &Ctx<'_>, base: &[f64; 7], residual: &[f64]) -> Result<StepResult, HarnessError> {
        let mut composed = [0.0; 7];
        for k in 0..7 {
            composed[k] = base[k] + residual[k];
        }
        let executed = Action::from_slice(&composed);
        debug_assert!(executed.to_array().iter().zip(base.iter().zip(residual)).all(|(e, (b, r))| *e == b + r));
        let out = step(ctx.task, &mut self.state, &executed)?;
        self.prim_steps += 1;
        let r_in = if ctx.cfg.guidance.intrinsic_reward {
            intrinsic_reward(&self.state, self.prim.ee_target(&self.state, &ctx.cfg.controller).position)
        } else {
            0.0
        };
        let reward = combine_reward(r_in, out.reward);
        self.rec.episode_return += reward;
        self.rec.length += 1;
        self.rec.success |= out.info.success;
        self.rec.collision |= out.info.collision || out.info.tilt_violation;

        let mut res = StepResult { reward, terminal: out.terminal(), truncated: out.info.truncated, next_primitive: None };
        if !out.done {
            if self.prim.done(&self.state, &ctx.cfg.termination) {
                if self.j + 1 == ctx.plan.steps.len() {
                    res.terminal = true;
                } else {
                    res.next_primitive = Some(self.j + 1);
                }
            } else if self.prim_steps >= ctx.cfg.primitive_budget {
                res.terminal = true;
            }
        }
        Ok(res)
    }
}

fn greedy_selection(
    ctx: &Ctx<'_>,
    agent: Option<&Agent>,
    table: &UncertaintyTable,
    state: &EnvState,
    j: usize,
    fixed: Option<&[usize]>,
) -> Result<(Primitive, SelectionRecord), HarnessError> {
    let (_, prims, values) = ctx.candidates(agent, state, j)?;
    let c = table.uncertainties(j)?.to_vec();
    let probs = selection_distribution(&values, &c, ctx.cfg.selection.beta)?;
    let chosen = match fixed {
        Some(m) => m[j].min(prims.len() - 1),
        None if ctx.cfg.guidance.exploration => greedy_mode(&probs)?,
        None => 0,
    };
    Ok((prims[chosen], SelectionRecord { primitive: j, values, c, probs, chosen, goal: prims[chosen].goal }))
}

/// Deterministic rollout: no action noise, greedy or fixed modes.
fn eval_episode(
    ctx: &Ctx<'_>,
    agent: Option<&Agent>,
    table: &UncertaintyTable,
    seed: u64,
    fixed: Option<&[usize]>,
) -> Result<EpisodeRecord, HarnessError> {
    let state = reset(ctx.task, seed);
    let (prim, sel) = greedy_selection(ctx, agent, table, &state, 0, fixed)?;
    let mut cur = Cursor::new(state, seed, prim, sel);
    loop {
        let base = ctx.base(&cur.prim, &cur.state);
        let residual = match agent {
            Some(a) => a.act_eval(&cur.obs())?,
            None => vec![0.0; 7],
        };
        let r = cur.step(ctx, &base, &residual)?;
        if r.ended() {
            return Ok(cur.rec);
        }
        if let Some(j) = r.next_primitive {
            let (prim, sel) = greedy_selection(ctx, agent, table, &cur.state, j, fixed)?;
            cur.begin(j, prim, sel);
        }
    }
}

/// Runs the base policy alone with the given mode per primitive.
pub fn run_fixed_modes(
    cfg: &ExperimentConfig,
    plan: &TaskPlan,
    modes: &[usize],
    episodes: u64,
) -> Result<EvalReport, HarnessError> {
    cfg.validate()?;
    let task = cfg.task_spec();
    check_plan(plan, &task)?;
    if modes.len() != plan.steps.len() {
        return Err(HarnessError::Config(format!("{} modes given for {} primitives", modes.len(), plan.steps.len())));
    }
    let ctx = Ctx { cfg, task: &task, plan };
    let table = UncertaintyTable::new(&plan.mode_counts());
    let eps = (0..episodes)
        .map(|k| eval_episode(&ctx, None, &table, eval_episode_seed(cfg.seed, k), Some(modes)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(EvalReport::from_episodes(eps))
}

/// Complete state of a training run. Everything is public so that callers can
/// checkpoint and restore it.
#[derive(Clone, Debug)]
pub struct Trainer {
    pub cfg: ExperimentConfig,
    pub task: TaskSpec,
    pub plan: TaskPlan,
    pub agent: Agent,
    pub table: UncertaintyTable,
    pub mode_rng: CounterRng,
    pub env_steps: u64,
    /// Completed training episodes.
    pub episodes: u64,
    pub train_successes: u64,
    pub metrics: Vec<MetricsRow>,
    pub explore_log: Vec<ExploreRow>,
    pub ema: Vec<Vec<Option<f64>>>,
    pub last_eval: Option<u64>,
    /// Wall-clock seconds accumulated before this process took over the run.
    pub elapsed_offset: f64,
    /// The run stopped inside an episode, so it cannot be extended.
    pub partial_episode: bool,
}

impl Trainer {
    pub fn new(cfg: ExperimentConfig, plan: TaskPlan) -> Result<Self, HarnessError> {
        let task = TaskSpec::builtin(cfg.task);
        Trainer::with_scene(cfg, task, plan)
    }

    /// Like [`Trainer::new`] with a custom scene for the configured task.
    pub fn with_scene(cfg: ExperimentConfig, mut task: TaskSpec, plan: TaskPlan) -> Result<Self, HarnessError> {
        cfg.validate()?;
        if task.task_id != cfg.task {
            return Err(HarnessError::Config(format!("scene is for {} but the run is for {}", task.task_id, cfg.task)));
        }
        task.validate().map_err(|e| HarnessError::Config(format!("{e}")))?;
        cfg.env.apply(&mut task);
        check_plan(&plan, &task)?;
        let agent = Agent::new(&cfg, &task)?;
        let modes = plan.mode_counts();
        Ok(Trainer {
            table: UncertaintyTable::new(&modes),
            ema: modes.iter().map(|&m| vec![None; m]).collect(),
            mode_rng: CounterRng::new(cfg.seed, streams::MODE_SELECTION),
            agent,
            task,
            plan,
            cfg,
            env_steps: 0,
            episodes: 0,
            train_successes: 0,
            metrics: Vec::new(),
            explore_log: Vec::new(),
            last_eval: None,
            elapsed_offset: 0.0,
            partial_episode: false,
        })
    }

    fn ctx(&self) -> Ctx<'_> {
        Ctx { cfg: &self.cfg, task: &self.task, plan: &self.plan }
    }

    pub fn finished(&self) -> bool {
        self.env_steps >= self.cfg.total_steps
    }

    /// Evaluates the current policy on `episodes` held-out seeds.
    pub fn evaluate(&self, episodes: u64) -> Result<EvalReport, HarnessError> {
        let ctx = self.ctx();
        let eps = (0..episodes)
            .map(|k| eval_episode(&ctx, Some(&self.agent), &self.table, eval_episode_seed(self.cfg.seed, k), None))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(EvalReport::from_episodes(eps))
    }

    fn maybe_eval(&mut self, clock: &dyn Clock) -> Result<(), HarnessError> {
        if !self.env_steps.is_multiple_of(self.cfg.eval_interval) || self.last_eval == Some(self.env_steps) {
            return Ok(());
        }
        let report = self.evaluate(self.cfg.eval_episodes)?;
        let modes = self.plan.mode_counts();
        self.metrics.push(MetricsRow {
            env_step: self.env_steps,
            train_episodes: self.episodes,
            success_rate: report.success_rate,
            mean_return: report.mean_return,
            mean_length: report.mean_length,
            mode_probs: report.mode_means(&modes, |s| &s.probs),
            mode_values: report.mode_means(&modes, |s| &s.values),
            wall_clock: self.elapsed_offset + clock.seconds(),
        });
        self.last_eval = Some(self.env_steps);
        Ok(())
    }

    /// Training-time selection: sampled from the value/uncertainty distribution, then decayed.
    fn train_selection(&mut self, state: &EnvState, j: usize) -> Result<(Primitive, SelectionRecord), HarnessError> {
        let step = self.env_steps;
        let (_, prims, values) = self.ctx().candidates(Some(&self.agent), state, j)?;
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(HarnessError::NonFinite { step, detail: format!("mode value {v} at primitive {j}") });
        }
        let c = self.table.uncertainties(j)?.to_vec();
        let probs = selection_distribution(&values, &c, self.cfg.selection.beta)?;
        let chosen = if self.cfg.guidance.exploration {
            let i = select_mode(&probs, &mut self.mode_rng)?;
            self.table.update(j, i, &self.cfg.selection)?;
            i
        } else {
            0
        };
        for (e, v) in self.ema[j].iter_mut().zip(&values) {
            *e = Some(match *e {
                Some(old) => (1.0 - VALUE_EMA) * old + VALUE_EMA * v,
                None => *v,
            });
        }
        let sel = SelectionRecord { primitive: j, values, c, probs, chosen, goal: prims[chosen].goal };
        self.explore_log.push(ExploreRow { episode: self.episodes, selection: sel.clone(), ema: self.ema[j].clone() });
        Ok((prims[chosen], sel))
    }

    /// Runs one training episode, stopping early at the step budget.
    /// Returns the record if the episode ran to its end.
    pub fn run_episode(&mut self, clock: &dyn Clock) -> Result<Option<EpisodeRecord>, HarnessError> {
        self.maybe_eval(clock)?;
        let seed = training_episode_seed(self.cfg.seed, self.episodes);
        let state = reset(&self.task, seed);
        let (prim, sel) = self.train_selection(&state, 0)?;
        let mut cur = Cursor::new(state, seed, prim, sel);
        loop {
            self.maybe_eval(clock)?;
            if self.finished() {
                self.partial_episode = true;
                return Ok(None);
            }
            let t = self.env_steps;
            let obs = cur.obs();
            let base = self.ctx().base(&cur.prim, &cur.state);
            let decision = self.agent.act_train(&obs, t).map_err(|e| at_step(e.into(), t))?;
            let r = cur.step(&self.ctx(), &base, &decision.residual)?;
            self.env_steps += 1;
            if let Some(j) = r.next_primitive {
                let (prim, sel) = self.train_selection(&cur.state, j)?;
                cur.begin(j, prim, sel);
            }
            let next_base = self.ctx().base(&cur.prim, &cur.state);
            let x = Experience {
                obs,
                base: base.to_vec(),
                decision,
                reward: r.reward,
                next_obs: cur.obs(),
                next_base: next_base.to_vec(),
                done: r.terminal,
                truncated: r.truncated && !r.terminal,
            };
            let losses = self.agent.record(x, t).map_err(|e| at_step(e.into(), t))?;
            if let Some(l) = losses {
                if l.iter().any(|v| !v.is_finite()) {
                    return Err(HarnessError::NonFinite { step: t, detail: format!("losses {l:?}") });
                }
            }
            if r.ended() {
                self.episodes += 1;
                self.train_successes += cur.rec.success as u64;
                return Ok(Some(cur.rec));
            }
        }
    }

    /// Trains until `total_steps`. `on_episode` runs after every completed
    /// episode, which is where checkpoints may be taken.
    pub fn run(
        &mut self,
        clock: &dyn Clock,
        on_episode: &mut dyn FnMut(&Trainer, &EpisodeRecord) -> Result<(), HarnessError>,
    ) -> Result<(), HarnessError> {
        while !self.finished() {
            if let Some(rec) = self.run_episode(clock)? {
                on_episode(self, &rec)?;
            }
        }
        self.maybe_eval(clock)
    }

    /// Fraction of completed training episodes that succeeded.
    pub fn train_success_rate(&self) -> f64 {
        if self.episodes == 0 {
            0.0
        } else {
            self.train_successes as f64 / self.episodes as f64
        }
    }

    pub fn describe(&self) -> String {
        format!(
            "{} {} seed {}: {} / {} steps, {} episodes",
            self.cfg.task,
            self.cfg.algorithm.as_str(),
            self.cfg.seed,
            self.env_steps,
            self.cfg.total_steps,
            self.episodes
        )
    }
}

fn at_step(e: HarnessError, step: u64) -> HarnessError {
    match e {
        HarnessError::NonFinite { detail, .. } => HarnessError::NonFinite { step, detail },
        e => e,
    }
}
