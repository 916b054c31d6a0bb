//! Experiment configs, training runs, success-rate evaluation and the
//! gridworld oracle.

mod grid;
mod plot;

pub use grid::{bfs_ground_truth, tabular_oracle, GridMove, Gridworld, OracleError, OracleResult, ProductIndex};
pub use plot::{export_plot_data, read_metrics_csv, smooth, MetricRow, PlotSeries};

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::automata::{parse_hoa_ldba, translate_fragment, validate_ldba, Ldba};
use crate::env::{CarAction, CarState, Workspace};
use crate::learner::{encode_state, train, write_metrics_csv, LearnerConfig, Mlp};
use crate::ltl::parse_ltl;
use crate::product::{trajectory_rows, write_trajectory_csv, ProductEnv, ProductState, QInit, Termination};
use crate::shaping::{MagnitudePolicy, RewardParams};

pub const CONFIG_SCHEMA_VERSION: u32 = 1;
pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Pipeline stage an error came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    Config,
    Formula,
    Automaton,
    Workspace,
    Reward,
    Train,
    Evaluate,
    Output,
    Oracle,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Config => "config",
            Stage::Formula => "formula",
            Stage::Automaton => "automaton",
            Stage::Workspace => "workspace",
            Stage::Reward => "reward",
            Stage::Train => "train",
            Stage::Evaluate => "evaluate",
            Stage::Output => "output",
            Stage::Oracle => "oracle",
        })
    }
}

/// Whether the inputs were rejected or a valid run failed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FailureKind {
    Validation,
    Runtime,
}

#[derive(Debug, Error)]
#[error("{stage} stage: {source}")]
pub struct HarnessError {
    pub stage: Stage,
    pub kind: FailureKind,
    #[source]
    pub source: Box<dyn std::error::Error + Send + Sync>,
}

impl HarnessError {
    pub fn invalid(stage: Stage, e: impl Into<Box<dyn std::error::Error + Send + Sync>>) -> Self {
        HarnessError { stage, kind: FailureKind::Validation, source: e.into() }
    }

    pub fn runtime(stage: Stage, e: impl Into<Box<dyn std::error::Error + Send + Sync>>) -> Self {
        HarnessError { stage, kind: FailureKind::Runtime, source: e.into() }
    }

    pub fn is_validation(&self) -> bool {
        self.kind == FailureKind::Validation
    }
}

fn io_err(stage: Stage, path: &Path, e: std::io::Error) -> HarnessError {
    HarnessError::runtime(stage, format!("{}: {e}", path.display()))
}

fn default_ratio() -> Option<f64> {
    MagnitudePolicy::default().ratio
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardConfig {
    pub r_g: f64,
    pub r_n: f64,
    pub r_d: f64,
    /// Fallback distance; the workspace diagonal when absent.
    #[serde(default)]
    pub d_max: Option<f64>,
    /// Required factor between `|r_n|`, `|r_d|` and `|r_g|`; `null` only
    /// checks signs and ordering.
    #[serde(default = "default_ratio")]
    pub magnitude_ratio: Option<f64>,
}

/// Episode caps per initialization mode.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeSteps {
    #[serde(rename = "random-q")]
    pub random_q: usize,
    #[serde(rename = "fixed-q0")]
    pub fixed_q0: usize,
}

impl ModeSteps {
    pub fn get(&self, mode: QInit) -> usize {
        match mode {
            QInit::RandomQ => self.random_q,
            QInit::FixedQ0 => self.fixed_q0,
        }
    }
}

/// Evaluation start states, given explicitly as `[x, y, θ]` triples or
/// drawn from a seeded generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EvalStarts {
    Explicit(Vec<[f64; 3]>),
    Seeded { count: usize, seed: u64 },
}

/// Distance kept from the workspace edge when drawing start states.
pub const START_MARGIN: f64 = 0.5;

/// `count` poses uniform over the workspace shrunk by [`START_MARGIN`],
/// rejecting positions inside any region, with uniform heading.
pub fn draw_starts(w: &Workspace, count: usize, seed: u64) -> Vec<CarState> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b = &w.bounds;
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let x = rng.gen_range(b.x[0] + START_MARGIN..b.x[1] - START_MARGIN);
        let y = rng.gen_range(b.y[0] + START_MARGIN..b.y[1] - START_MARGIN);
        let theta = rng.gen_range(b.theta[0]..b.theta[1]);
        if w.regions.iter().all(|r| !r.rect.contains(x, y)) {
            out.push(CarState::new(x, y, theta));
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub name: String,
    /// LTL formula in the translatable fragment. Exactly one of `formula`
    /// and `hoa` is set.
    #[serde(default)]
    pub formula: Option<String>,
    /// HOA automaton file, relative to the config file.
    #[serde(default)]
    pub hoa: Option<PathBuf>,
    /// Workspace JSON file, relative to the config file.
    pub workspace: PathBuf,
    pub reward: RewardConfig,
    #[serde(default)]
    pub learner: LearnerConfig,
    pub steps: usize,
    pub max_episode_steps: ModeSteps,
    pub eval_max_steps: usize,
    pub modes: Vec<QInit>,
    /// One training run per seed and mode; overrides `learner.seed`.
    pub seeds: Vec<u64>,
    pub eval_starts: EvalStarts,
    /// Standard deviation of Gaussian position noise during training.
    #[serde(default)]
    pub transition_noise: f64,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn from_json(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self, HarnessError> {
        let mut cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| HarnessError::invalid(Stage::Config, e))?;
        cfg.base_dir = base_dir.into();
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| HarnessError::invalid(Stage::Config, format!("{}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_json(&text, base)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    fn check(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::invalid(Stage::Config, m));
        if self.schema_version != CONFIG_SCHEMA_VERSION {
            return bad(format!("unsupported schema_version {} (expected {CONFIG_SCHEMA_VERSION})", self.schema_version));
        }
        if self.formula.is_some() == self.hoa.is_some() {
            return bad("exactly one of `formula` and `hoa` must be given".into());
        }
        if self.modes.is_empty() || self.seeds.is_empty() {
            return bad("`modes` and `seeds` must be non-empty".into());
        }
        if self.max_episode_steps.random_q == 0 || self.max_episode_steps.fixed_q0 == 0 || self.eval_max_steps == 0 {
            return bad("episode step caps must be positive".into());
        }
        if !(self.transition_noise >= 0.0 && self.transition_noise.is_finite()) {
            return bad("transition_noise must be finite and non-negative".into());
        }
        match &self.eval_starts {
            EvalStarts::Explicit(v) if v.is_empty() => return bad("eval_starts must be non-empty".into()),
            EvalStarts::Seeded { count: 0, .. } => return bad("eval_starts count must be positive".into()),
            _ => {}
        }
        self.learner.validate().map_err(|e| HarnessError::invalid(Stage::Config, e))
    }

    /// Parses or translates the automaton, loads the workspace and checks
    /// the reward parameters.
    pub fn build(&self) -> Result<Pipeline, HarnessError> {
        let ldba = match (&self.formula, &self.hoa) {
            (Some(f), _) => {
                let phi = parse_ltl(f).map_err(|e| HarnessError::invalid(Stage::Formula, e))?;
                translate_fragment(&phi).map_err(|e| HarnessError::invalid(Stage::Formula, e))?
            }
            (None, Some(p)) => load_ldba(&self.resolve(p))?,
            (None, None) => unreachable!("checked on load"),
        };
        let path = self.resolve(&self.workspace);
        let workspace = Workspace::load(&path).map_err(|e| HarnessError::invalid(Stage::Workspace, format!("{}: {e}", path.display())))?;
        if let Some(p) = ldba.ap().iter().find(|p| workspace.regions.iter().all(|r| &r.name != *p)) {
            return Err(HarnessError::invalid(Stage::Workspace, format!("proposition {p:?} has no region")));
        }
        let params = RewardParams {
            r_g: self.reward.r_g,
            r_n: self.reward.r_n,
            r_d: self.reward.r_d,
            d_max: self.reward.d_max.unwrap_or_else(|| workspace.bounds.diagonal()),
        };
        params
            .validate(MagnitudePolicy { ratio: self.reward.magnitude_ratio })
            .map_err(|e| HarnessError::invalid(Stage::Reward, e))?;
        let starts = match &self.eval_starts {
            EvalStarts::Explicit(v) => v.iter().map(|s| CarState::new(s[0], s[1], s[2])).collect(),
            EvalStarts::Seeded { count, seed } => draw_starts(&workspace, *count, *seed),
        };
        Ok(Pipeline { ldba, workspace, params, starts })
    }
}

/// Reads an LDBA from a HOA file.
pub fn load_ldba(path: &Path) -> Result<Ldba, HarnessError> {
    let text = fs::read_to_string(path).map_err(|e| HarnessError::invalid(Stage::Automaton, format!("{}: {e}", path.display())))?;
    let (tgba, parts, eps) = parse_hoa_ldba(&text).map_err(|e| HarnessError::invalid(Stage::Automaton, e))?;
    validate_ldba(&tgba, &parts, &eps).map_err(|e| HarnessError::invalid(Stage::Automaton, e))
}

/// Validated inputs of an experiment.
#[derive(Clone, Debug)]
pub struct Pipeline {
    pub ldba: Ldba,
    pub workspace: Workspace,
    pub params: RewardParams,
    pub starts: Vec<CarState>,
}

impl Pipeline {
    pub fn env(&self, max_steps: usize) -> ProductEnv {
        ProductEnv::new(self.workspace.clone(), &self.ldba, self.params, max_steps)
    }
}

/// Deterministic policy of an actor network.
pub fn actor_policy<'a>(actor: &'a Mlp, env: &'a ProductEnv) -> impl Fn(&ProductState) -> CarAction + Sync + 'a {
    let bounds = env.workspace().bounds;
    let n = env.num_states();
    move |ps: &ProductState| {
        let out = actor.forward_one(&encode_state(ps, n, &bounds));
        CarAction::new(out[0], out[1]).clipped()
    }
}

/// Noise-free rollout from `(s, q0)` for at most `max_steps` steps.
pub fn eval_rollout(env: &ProductEnv, start: CarState, max_steps: usize, policy: impl Fn(&ProductState) -> CarAction) -> Vec<crate::product::StepOutcome> {
    let mut ps = env.reset_at(start, env.automaton().ldba().initial());
    let mut out = Vec::new();
    for _ in 0..max_steps {
        let o = env.step(&ps, policy(&ps));
        out.push(o);
        if o.terminated.is_terminal() {
            break;
        }
        ps = o.next;
    }
    out
}

/// Fraction of `starts` from which `policy`, started in the initial
/// automaton state, completes an acceptance round within `max_steps`.
pub fn success_rate_with(env: &ProductEnv, starts: &[CarState], max_steps: usize, policy: impl Fn(&ProductState) -> CarAction + Sync) -> f64 {
    assert!(!starts.is_empty(), "no evaluation starts");
    let ok = starts
        .iter()
        .filter(|&&s| {
            eval_rollout(env, s, max_steps, &policy).last().map(|o| o.terminated) == Some(Termination::AcceptedRound)
        })
        .count();
    ok as f64 / starts.len() as f64
}

pub fn success_rate(actor: &Mlp, env: &ProductEnv, starts: &[CarState], max_steps: usize) -> f64 {
    success_rate_with(env, starts, max_steps, actor_policy(actor, env))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub mode: QInit,
    pub seed: u64,
    pub steps: usize,
    pub success_rate: f64,
    pub episodes: usize,
    pub accepted_episodes: usize,
    pub trap_episodes: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeSummary {
    pub mode: QInit,
    pub mean_success_rate: f64,
    pub success_rates: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub name: String,
    pub eval_starts: usize,
    pub eval_max_steps: usize,
    pub runs: Vec<RunReport>,
    pub summary: Vec<ModeSummary>,
}

impl Report {
    pub fn mean_success(&self, mode: QInit) -> Option<f64> {
        self.summary.iter().find(|s| s.mode == mode).map(|s| s.mean_success_rate)
    }
}

/// File stem used for the artifacts of one run.
pub fn run_stem(mode: QInit, seed: u64) -> String {
    format!("{mode}_seed{seed}")
}

fn write_file(path: &Path, f: impl FnOnce(&mut Vec<u8>) -> Result<(), Box<dyn std::error::Error + Send + Sync>>) -> Result<(), HarnessError> {
    let mut buf = Vec::new();
    f(&mut buf).map_err(|e| HarnessError::runtime(Stage::Output, e))?;
    fs::write(path, buf).map_err(|e| io_err(Stage::Output, path, e))
}

/// Trains every (mode, seed) pair, evaluates each actor on the frozen start
/// states and, when `out_dir` is given, writes `report.json`, per-run
/// metrics CSVs and checkpoints, and one trajectory CSV per start under
/// `trajectories/`.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: Option<&Path>) -> Result<Report, HarnessError> {
    let pipe = cfg.build()?;
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir.join("trajectories")).map_err(|e| io_err(Stage::Output, dir, e))?;
    }
    let eval_env = pipe.env(cfg.eval_max_steps);
    let mut runs = Vec::new();
    for &mode in &cfg.modes {
        let env = pipe.env(cfg.max_episode_steps.get(mode)).with_noise(cfg.transition_noise);
        for &seed in &cfg.seeds {
            let lc = LearnerConfig { seed, ..cfg.learner.clone() };
            let trained = train(&env, &lc, mode, cfg.steps).map_err(|e| HarnessError::runtime(Stage::Train, e))?;
            let actor = &trained.agent.actor;
            let rate = success_rate(actor, &eval_env, &pipe.starts, cfg.eval_max_steps);
            let count = |t: Termination| trained.episodes.iter().filter(|e| e.termination == t).count();
            runs.push(RunReport {
                mode,
                seed,
                steps: cfg.steps,
                success_rate: rate,
                episodes: trained.episodes.len(),
                accepted_episodes: count(Termination::AcceptedRound),
                trap_episodes: count(Termination::Trap),
            });
            if let Some(dir) = out_dir {
                let stem = run_stem(mode, seed);
                write_file(&dir.join(format!("{stem}_metrics.csv")), |b| Ok(write_metrics_csv(b, &trained.episodes)?))?;
                let ckpt = trained.agent.checkpoint(env.num_states(), env.num_sets());
                write_file(&dir.join(format!("{stem}_checkpoint.json")), |b| {
                    b.extend_from_slice(ckpt.to_json().as_bytes());
                    Ok(())
                })?;
                let policy = actor_policy(actor, &eval_env);
                for (k, &s) in pipe.starts.iter().enumerate() {
                    let outcomes = eval_rollout(&eval_env, s, cfg.eval_max_steps, &policy);
                    let rows = trajectory_rows(&eval_env.reset_at(s, eval_env.automaton().ldba().initial()), &outcomes);
                    write_file(&dir.join("trajectories").join(format!("{stem}_start{k:02}.csv")), |b| {
                        Ok(write_trajectory_csv(b, &rows)?)
                    })?;
                }
            }
        }
    }
    let summary = cfg
        .modes
        .iter()
        .map(|&mode| {
            let rates: Vec<f64> = runs.iter().filter(|r| r.mode == mode).map(|r| r.success_rate).collect();
            ModeSummary { mode, mean_success_rate: rates.iter().sum::<f64>() / rates.len() as f64, success_rates: rates }
        })
        .collect();
    let report = Report {
        schema_version: REPORT_SCHEMA_VERSION,
        name: cfg.name.clone(),
        eval_starts: pipe.starts.len(),
        eval_max_steps: cfg.eval_max_steps,
        runs,
        summary,
    };
    if let Some(dir) = out_dir {
        let text = serde_json::to_string_pretty(&report).expect("report serializes");
        write_file(&dir.join("report.json"), |b| {
            b.extend_from_slice(text.as_bytes());
            Ok(())
        })?;
    }
    Ok(report)
}

/// Success rate of a stored actor on the config's evaluation starts.
pub fn evaluate_checkpoint(ckpt: &crate::learner::Checkpoint, cfg: &ExperimentConfig) -> Result<(f64, usize), HarnessError> {
    let pipe = cfg.build()?;
    let env = pipe.env(cfg.eval_max_steps);
    let actor = ckpt.actor_for(&env).map_err(|e| HarnessError::invalid(Stage::Evaluate, e))?;
    Ok((success_rate(&actor, &env, &pipe.starts, cfg.eval_max_steps), pipe.starts.len()))
}
