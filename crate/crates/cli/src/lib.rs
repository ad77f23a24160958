//! Command-line front end: train agents, verify their joint policy, compare
//! against monolithic checking, simulate, and time policy queries.
//!
//! Every command funnels its randomness through one `--seed`, which is echoed
//! in every file it writes. Exit codes are stable; see [`CliError::exit_code`].

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::mpsc;
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;
use thiserror::Error;

use tmarl_core::agents::{
    load_policy, save_policy, train_tmarl, AgentPolicy, DqnConfig, Mlp, NeuralPolicy, PolicyError, TrainError,
};
use tmarl_core::checker::{check_dtmc, check_mdp, CheckError, CheckResult, SolverOptions};
use tmarl_core::envs::{self, EnvError, Params};
use tmarl_core::gcl::{parse_program_with, GclError, GuardedProgram, Value};
use tmarl_core::joint::{
    build_induced_dtmc, build_monolithic_mdp, query_sample, time_query, BuildStats, JointError, JointPolicy, TimingProfile,
    DEFAULT_BUDGET,
};
use tmarl_core::model::induce_dtmc_monolithic;
use tmarl_core::pctl::{parse_property, PctlError, Quantifier, StateFormula};
use tmarl_core::simulate::{estimate_path, SimError, DEFAULT_HORIZON};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("state budget of {budget} exceeded after exploring {explored} states")]
    Budget { budget: usize, explored: usize },
    #[error("solver did not converge: {iterations} iterations, residual {residual:e}")]
    NonConvergence { iterations: u64, residual: f64 },
    #[error("timed out after {0} s")]
    Timeout(u64),
    #[error("model error: {0}")]
    Model(String),
    #[error("training failed: {0}")]
    Training(String),
}

impl CliError {
    /// 0 success, 2 configuration or parse error, 3 state budget, 4 solver
    /// non-convergence, 5 timeout, 6 model error, 7 training failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io { .. } => 2,
            CliError::Budget { .. } => 3,
            CliError::NonConvergence { .. } => 4,
            CliError::Timeout(_) => 5,
            CliError::Model(_) => 6,
            CliError::Training(_) => 7,
        }
    }
}

impl From<GclError> for CliError {
    fn from(e: GclError) -> Self {
        if e.position().is_some() || matches!(e, GclError::MissingTurnVariable | GclError::UnknownConstant(_)) {
            CliError::Config(e.to_string())
        } else {
            CliError::Model(e.to_string())
        }
    }
}

impl From<EnvError> for CliError {
    fn from(e: EnvError) -> Self {
        match e {
            EnvError::Program(g) => CliError::Model(g.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<PolicyError> for CliError {
    fn from(e: PolicyError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<PctlError> for CliError {
    fn from(e: PctlError) -> Self {
        CliError::Config(format!("property: {e}"))
    }
}

impl From<CheckError> for CliError {
    fn from(e: CheckError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<JointError> for CliError {
    fn from(e: JointError) -> Self {
        match e {
            JointError::StateBudgetExceeded { budget, explored } => CliError::Budget { budget, explored },
            JointError::Program(g) => g.into(),
            JointError::Model(m) => CliError::Model(m.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Joint(j) => j.into(),
            SimError::Program(g) => g.into(),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Config(m) => CliError::Config(m),
            other => CliError::Training(other.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "tmarl", version, about = "Verify turn-based multi-agent policies by model checking their induced Markov chain")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train one DQN agent per turn value; writes agent_<i>.json and training.csv.
    Train(TrainArgs),
    /// Build the chain induced by the joint policy and check a property on it.
    Verify(VerifyArgs),
    /// Build the full MDP and check Pmax/Pmin, or P restricted to a policy.
    VerifyMonolithic(VerifyArgs),
    /// Estimate a path property by Monte-Carlo simulation of the joint policy.
    Simulate(SimulateArgs),
    /// Time policy queries against the number of agents.
    Stats(StatsArgs),
    /// Write a built-in model and its reference scripted policies.
    Model(ModelCmdArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Model file in the guarded-command language.
    #[arg(long, conflicts_with = "builtin")]
    pub model: Option<PathBuf>,
    /// Built-in benchmark: mabp, tictactoe, pokemon or cc.
    #[arg(long)]
    pub builtin: Option<String>,
    /// Benchmark parameters, or constant overrides for --model, as k=v,...
    #[arg(long, default_value = "")]
    pub params: String,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 10_000)]
    pub episodes: usize,
    #[arg(long, default_value_t = 128)]
    pub seed: u64,
    /// Hidden layer widths.
    #[arg(long, value_delimiter = ',', default_value = "256,256")]
    pub hidden: Vec<usize>,
    #[arg(long, default_value_t = 10_000)]
    pub max_steps: usize,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// One policy file per agent in turn order, or `scripted` for a built-in's reference policies.
    #[arg(long, value_delimiter = ',')]
    pub policies: Vec<String>,
    #[arg(long)]
    pub prop: String,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, default_value_t = 1_000_000)]
    pub max_iter: u64,
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    pub budget: usize,
    /// Wall-clock cap; 0 disables it.
    #[arg(long, default_value_t = 0)]
    pub timeout_seconds: u64,
    #[arg(long, default_value_t = 128)]
    pub seed: u64,
    /// Result JSON path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, value_delimiter = ',')]
    pub policies: Vec<String>,
    #[arg(long)]
    pub prop: String,
    #[arg(long, default_value_t = 100_000)]
    pub episodes: usize,
    #[arg(long, default_value_t = DEFAULT_HORIZON)]
    pub horizon: usize,
    #[arg(long, default_value_t = 128)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct StatsArgs {
    /// Built-in benchmark whose agent count is a parameter.
    #[arg(long, default_value = "mabp")]
    pub builtin: String,
    /// Agent counts to sweep.
    #[arg(long, value_delimiter = ',', default_value = "5,10,25,50,100")]
    pub agents: Vec<i64>,
    /// `neural` (freshly initialised networks) or `scripted`.
    #[arg(long, default_value = "neural")]
    pub policy: String,
    #[arg(long, value_delimiter = ',', default_value = "256,256")]
    pub hidden: Vec<usize>,
    /// States timed per agent count.
    #[arg(long, default_value_t = 200)]
    pub sample: usize,
    /// Timings per state; the fastest is kept.
    #[arg(long, default_value_t = 50)]
    pub repeats: usize,
    #[arg(long, default_value_t = 128)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ModelCmdArgs {
    #[arg(long)]
    pub builtin: String,
    #[arg(long, default_value = "")]
    pub params: String,
    /// Output directory for `<name>.gcl` and `agent_<i>.json`.
    #[arg(long)]
    pub out: PathBuf,
}

/// A loaded model with the number of agents its turn variable ranges over.
pub struct Loaded {
    pub program: GuardedProgram,
    pub agents: usize,
    pub instance: Option<envs::Instance>,
    pub describe: String,
}

pub fn load_model(args: &ModelArgs) -> Result<Loaded, CliError> {
    let params = envs::parse_params(&args.params)?;
    match (&args.model, &args.builtin) {
        (Some(path), None) => {
            let src = fs::read_to_string(path).map_err(|source| CliError::Io { path: path.clone(), source })?;
            let overrides = params.iter().map(|(k, &v)| (k.clone(), Value::Int(v))).collect();
            let program = parse_program_with(&src, &overrides)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            let (lo, hi) = program.schema().turn_bounds();
            if lo != 1 {
                return Err(CliError::Config(format!("{}: turn must range over [1..n], found [{lo}..{hi}]", path.display())));
            }
            Ok(Loaded { program, agents: hi as usize, instance: None, describe: path.display().to_string() })
        }
        (None, Some(name)) => {
            let inst = envs::instantiate(name, &params)?;
            let describe = format!("{name}({})", describe_params(&inst.params));
            Ok(Loaded { program: inst.program.clone(), agents: inst.agents, instance: Some(inst), describe })
        }
        _ => Err(CliError::Config("give exactly one of --model PATH or --builtin NAME".into())),
    }
}

fn describe_params(p: &Params) -> String {
    p.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(",")
}

pub fn load_policies(loaded: &Loaded, specs: &[String]) -> Result<JointPolicy<f64>, CliError> {
    let policies: Vec<AgentPolicy<f64>> = match specs {
        [one] if one == "scripted" => {
            let inst = loaded
                .instance
                .as_ref()
                .ok_or_else(|| CliError::Config("`--policies scripted` needs --builtin".into()))?;
            inst.scripted_policies()?
        }
        _ => {
            if specs.len() != loaded.agents {
                return Err(CliError::Config(format!(
                    "the model has {} agents but {} policy files were given",
                    loaded.agents,
                    specs.len()
                )));
            }
            specs.iter().map(|p| load_policy(Path::new(p), &loaded.program)).collect::<Result<_, _>>()?
        }
    };
    Ok(JointPolicy::new(&loaded.program, policies)?)
}

/// Runs `work` on a worker thread; gives up after `seconds` (0 = never).
/// A timed-out worker keeps running until the process exits.
pub fn with_timeout<R: Send + 'static>(
    seconds: u64,
    work: impl FnOnce() -> Result<R, CliError> + Send + 'static,
) -> Result<R, CliError> {
    if seconds == 0 {
        return work();
    }
    let (tx, rx) = mpsc::channel();
    std::thread::spawn(move || {
        let _ = tx.send(work());
    });
    match rx.recv_timeout(Duration::from_secs(seconds)) {
        Ok(r) => r,
        Err(mpsc::RecvTimeoutError::Timeout) => Err(CliError::Timeout(seconds)),
        Err(mpsc::RecvTimeoutError::Disconnected) => Err(CliError::Model("worker thread panicked".into())),
    }
}

fn write_out(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.to_path_buf(), source })?;
            }
            fs::write(p, text).map_err(|source| CliError::Io { path: p.to_path_buf(), source })
        }
        None => {
            use std::io::Write;
            let mut out = std::io::stdout().lock();
            match writeln!(out, "{text}").and_then(|_| out.flush()) {
                // a closed reader such as `head` is not an error
                Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
                r => r.map_err(|source| CliError::Io { path: PathBuf::from("<stdout>"), source }),
            }
        }
    }
}

fn solver_options(args: &VerifyArgs) -> Result<SolverOptions, CliError> {
    if !(args.tol > 0.0 && args.tol < 1.0) {
        return Err(CliError::Config(format!("--tol must lie in (0, 1), got {}", args.tol)));
    }
    Ok(SolverOptions { tol: args.tol, max_iter: args.max_iter })
}

fn converged<T>(r: &CheckResult<T>) -> Result<(), CliError> {
    if r.stats.converged {
        Ok(())
    } else {
        Err(CliError::NonConvergence { iterations: r.stats.iterations, residual: r.stats.residual })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub value: f64,
    pub iterations: u64,
    pub residual: f64,
    pub converged: bool,
}

fn report<T: tmarl_core::scalar::Scalar>(r: &CheckResult<T>) -> CheckReport {
    CheckReport {
        value: r.value_at_initial(),
        iterations: r.stats.iterations,
        residual: r.stats.residual,
        converged: r.stats.converged,
    }
}

/// Result document of `verify` and `verify-monolithic`.
#[derive(Debug, Clone, Serialize)]
pub struct VerifyResult {
    pub schema_version: u32,
    pub command: String,
    pub seed: u64,
    pub model: String,
    pub property: String,
    pub value: f64,
    pub states: usize,
    pub transitions: usize,
    /// Nondeterministic choices, for monolithic runs.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub choices: Option<usize>,
    pub build: BuildStats,
    pub check: CheckReport,
    pub build_seconds: f64,
    pub check_seconds: f64,
}


/// `Pmax`/`Pmin` anywhere in the formula, which an induced chain cannot answer.
fn first_extremal(f: &StateFormula) -> Option<&'static str> {
    use tmarl_core::pctl::PathFormula as P;
    fn path(p: &P) -> Option<&'static str> {
        match p {
            P::State(s) | P::Next(s) | P::Globally(s) => first_extremal(s),
            P::Until(a, b) | P::BoundedUntil(a, b, _) => path(a).or_else(|| path(b)),
        }
    }
    match f {
        StateFormula::And(a, b) => first_extremal(a).or_else(|| first_extremal(b)),
        StateFormula::Not(a) => first_extremal(a),
        StateFormula::Prob { quantifier: Quantifier::Max, .. } => Some("Pmax"),
        StateFormula::Prob { quantifier: Quantifier::Min, .. } => Some("Pmin"),
        StateFormula::Prob { path: p, .. } => path(p),
        _ => None,
    }
}

fn induced_result(args: &VerifyArgs) -> Result<VerifyResult, CliError> {
    let opts = solver_options(args)?;
    let loaded = load_model(&args.model)?;
    let f = parse_property(&args.prop)?;
    if let Some(q) = first_extremal(&f) {
        return Err(CliError::Config(format!("{} ({q} in `{}`)", CheckError::QuantifierOnDtmc, args.prop)));
    }
    let jp = load_policies(&loaded, &args.policies)?;
    let t = Instant::now();
    let (dtmc, build) = build_induced_dtmc::<f64>(&loaded.program, &jp, args.budget)?;
    let build_seconds = t.elapsed().as_secs_f64();
    let t = Instant::now();
    let r = check_dtmc(&dtmc, &f, &opts)?;
    let check_seconds = t.elapsed().as_secs_f64();
    converged(&r)?;
    Ok(VerifyResult {
        schema_version: SCHEMA_VERSION,
        command: "verify".into(),
        seed: args.seed,
        model: loaded.describe,
        property: args.prop.clone(),
        value: r.value_at_initial(),
        states: dtmc.num_states(),
        transitions: dtmc.num_transitions(),
        choices: None,
        build,
        check: report(&r),
        build_seconds,
        check_seconds,
    })
}

fn monolithic_result(args: &VerifyArgs) -> Result<VerifyResult, CliError> {
    let opts = solver_options(args)?;
    let loaded = load_model(&args.model)?;
    let f = parse_property(&args.prop)?;
    let jp = if args.policies.is_empty() { None } else { Some(load_policies(&loaded, &args.policies)?) };
    let t = Instant::now();
    let (mdp, build) = build_monolithic_mdp::<f64>(&loaded.program, args.budget)?;
    let build_seconds = t.elapsed().as_secs_f64();
    let t = Instant::now();
    let (r, states, transitions) = match jp {
        None => (check_mdp(&mdp, &f, &opts)?, mdp.num_states(), mdp.num_transitions()),
        Some(jp) => {
            // plain P: restrict the full MDP to the joint policy's choices
            let mut failure = None;
            let dtmc = induce_dtmc_monolithic(&mdp, |i, s| {
                let en = mdp.enabled_actions(i);
                match en.as_slice() {
                    [only] if only.is_self_loop() => *only,
                    _ => match jp.select_enabled(s, &en) {
                        Ok((a, _)) => a,
                        Err(e) => {
                            failure.get_or_insert(e);
                            en[0]
                        }
                    },
                }
            })
            .map_err(|e| CliError::Model(e.to_string()))?;
            if let Some(e) = failure {
                return Err(e.into());
            }
            (check_dtmc(&dtmc, &f, &opts)?, dtmc.num_states(), dtmc.num_transitions())
        }
    };
    let check_seconds = t.elapsed().as_secs_f64();
    converged(&r)?;
    Ok(VerifyResult {
        schema_version: SCHEMA_VERSION,
        command: "verify-monolithic".into(),
        seed: args.seed,
        model: loaded.describe,
        property: args.prop.clone(),
        value: r.value_at_initial(),
        states,
        transitions,
        choices: Some(mdp.num_choices()),
        build,
        check: report(&r),
        build_seconds,
        check_seconds,
    })
}

fn finish_verify(args: &VerifyArgs, monolithic: bool) -> Result<VerifyResult, CliError> {
    let owned = args.clone();
    let r = with_timeout(args.timeout_seconds, move || {
        if monolithic {
            monolithic_result(&owned)
        } else {
            induced_result(&owned)
        }
    })?;
    write_out(args.out.as_deref(), &serde_json::to_string_pretty(&r).expect("serialisable"))?;
    Ok(r)
}

/// Builds the chain induced by the joint policy and checks `--prop` on it.
pub fn cmd_verify(args: &VerifyArgs) -> Result<VerifyResult, CliError> {
    finish_verify(args, false)
}

/// Builds the full MDP; checks Pmax/Pmin, or plain P on its restriction to
/// the given policies.
pub fn cmd_verify_monolithic(args: &VerifyArgs) -> Result<VerifyResult, CliError> {
    finish_verify(args, true)
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulateResult {
    pub schema_version: u32,
    pub seed: u64,
    pub model: String,
    pub property: String,
    pub estimate: f64,
    pub stderr: f64,
    pub episodes: usize,
    pub truncated: usize,
    pub horizon: usize,
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<SimulateResult, CliError> {
    if args.episodes == 0 || args.horizon == 0 {
        return Err(CliError::Config("--episodes and --horizon must be positive".into()));
    }
    let loaded = load_model(&args.model)?;
    let f = parse_property(&args.prop)?;
    let StateFormula::Prob { quantifier: Quantifier::Plain, bound: None, path } = &f else {
        return Err(CliError::Config(format!("simulate takes a single P=? [ ... ] query, got `{}`", args.prop)));
    };
    let jp = load_policies(&loaded, &args.policies)?;
    let est = estimate_path(&loaded.program, &jp, path, args.episodes, args.horizon, args.seed)?;
    if est.truncated > 0 {
        log::warn!("{} of {} episodes hit the horizon of {} steps", est.truncated, est.episodes, args.horizon);
    }
    let r = SimulateResult {
        schema_version: SCHEMA_VERSION,
        seed: args.seed,
        model: loaded.describe,
        property: args.prop.clone(),
        estimate: est.estimate,
        stderr: est.stderr,
        episodes: est.episodes,
        truncated: est.truncated,
        horizon: args.horizon,
    };
    write_out(args.out.as_deref(), &serde_json::to_string_pretty(&r).expect("serialisable"))?;
    Ok(r)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatsRow {
    pub n_agents: usize,
    pub mean_query_seconds: f64,
    /// States timed.
    pub states: usize,
}

/// CSV text: a `# seed=` comment line, the header, one row per agent count.
pub fn stats_csv(seed: u64, rows: &[StatsRow]) -> String {
    let mut s = format!("# seed={seed}\nn_agents,mean_query_seconds,states\n");
    for r in rows {
        s.push_str(&format!("{},{:e},{}\n", r.n_agents, r.mean_query_seconds, r.states));
    }
    s
}

/// Mean fastest-of-`repeats` time per state of one policy query plus
/// successor expansion, for each agent count.
/// Timed runs per state and round after one untimed run.
const WARM_RUNS: usize = 3;

pub fn cmd_stats(args: &StatsArgs) -> Result<Vec<StatsRow>, CliError> {
    let bench = envs::benchmark(&args.builtin)?;
    let param = bench
        .agent_param
        .ok_or_else(|| CliError::Config(format!("{} has no agent-count parameter to sweep", bench.name)))?;
    if args.agents.is_empty() || args.sample == 0 || args.repeats == 0 {
        return Err(CliError::Config("--agents, --sample and --repeats must be non-empty and positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let mut setups = Vec::with_capacity(args.agents.len());
    for &n in &args.agents {
        let inst = bench.instantiate(&Params::from([(param.to_string(), n)]))?;
        let policies: Vec<AgentPolicy<f64>> = match args.policy.as_str() {
            "scripted" => inst.scripted_policies()?,
            "neural" => {
                let p = &inst.program;
                let mut sizes = vec![p.schema().len()];
                sizes.extend(&args.hidden);
                sizes.push(p.actions().len());
                (0..inst.agents)
                    .map(|_| {
                        let net = Mlp::random(&sizes, &mut rng);
                        Ok(AgentPolicy::Neural(NeuralPolicy::new(p.schema().clone(), p.actions().to_vec(), net)?))
                    })
                    .collect::<Result<_, PolicyError>>()?
            }
            other => return Err(CliError::Config(format!("--policy must be neural or scripted, got `{other}`"))),
        };
        let jp = JointPolicy::new(&inst.program, policies)?;
        let sample = query_sample(&inst.program, &jp, args.sample)?;
        setups.push((inst, jp, sample));
    }
    // Rounds sweep every instance in turn so that clock drift affects all
    // sizes alike. Within a round each state is timed back to back and the
    // first run is dropped, so the figure is the warm-cache query cost rather
    // than the cost of reloading weights evicted by a larger instance.
    let mut best: Vec<Vec<f64>> = setups.iter().map(|(_, _, s)| vec![f64::INFINITY; s.len()]).collect();
    for _ in 0..args.repeats {
        for ((inst, jp, sample), best) in setups.iter().zip(&mut best) {
            for (b, st) in best.iter_mut().zip(sample) {
                time_query(&inst.program, jp, st)?;
                for _ in 0..WARM_RUNS {
                    *b = b.min(time_query(&inst.program, jp, st)?);
                }
            }
        }
    }
    let rows: Vec<StatsRow> = setups
        .iter()
        .zip(best)
        .map(|((inst, _, _), times)| {
            let prof = TimingProfile::from_times(times);
            log::info!("n={}: {} states, mean {:.3e} s", inst.agents, prof.samples, prof.mean_seconds);
            StatsRow { n_agents: inst.agents, mean_query_seconds: prof.mean_seconds, states: prof.samples }
        })
        .collect();
    write_out(args.out.as_deref(), stats_csv(args.seed, &rows).trim_end())?;
    Ok(rows)
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainResult {
    pub schema_version: u32,
    pub seed: u64,
    pub model: String,
    pub episodes: usize,
    pub steps: u64,
    pub policies: Vec<PathBuf>,
    pub log: PathBuf,
    pub seconds: f64,
}

/// Trains one agent per turn value and writes `agent_<i>.json`,
/// `training.csv` (`episode,agent,reward,epsilon`) and `train.json`.
pub fn cmd_train(args: &TrainArgs) -> Result<TrainResult, CliError> {
    let loaded = load_model(&args.model)?;
    let config = DqnConfig {
        seed: args.seed,
        episodes: args.episodes,
        max_steps: args.max_steps,
        hidden: args.hidden.clone(),
        ..DqnConfig::default()
    };
    config.validate()?;
    let t = Instant::now();
    let trained = train_tmarl::<f64>(&loaded.program, loaded.agents, &config)?;
    let seconds = t.elapsed().as_secs_f64();
    fs::create_dir_all(&args.out).map_err(|source| CliError::Io { path: args.out.clone(), source })?;
    let mut paths = Vec::new();
    for (i, p) in trained.policies.iter().enumerate() {
        let path = args.out.join(format!("agent_{}.json", i + 1));
        save_policy(p, &path)?;
        paths.push(path);
    }
    let mut csv = format!("# seed={}\nepisode,agent,reward,epsilon\n", args.seed);
    for e in &trained.log {
        csv.push_str(&format!("{},{},{},{}\n", e.episode, e.agent, e.reward, e.epsilon));
    }
    let log_path = args.out.join("training.csv");
    write_out(Some(&log_path), &csv)?;
    let r = TrainResult {
        schema_version: SCHEMA_VERSION,
        seed: args.seed,
        model: loaded.describe,
        episodes: args.episodes,
        steps: trained.steps,
        policies: paths,
        log: log_path,
        seconds,
    };
    write_out(Some(&args.out.join("train.json")), &serde_json::to_string_pretty(&r).expect("serialisable"))?;
    Ok(r)
}

/// Writes `<name>.gcl` and the reference scripted policies `agent_<i>.json`.
pub fn cmd_model(args: &ModelCmdArgs) -> Result<Vec<PathBuf>, CliError> {
    let inst = envs::instantiate(&args.builtin, &envs::parse_params(&args.params)?)?;
    fs::create_dir_all(&args.out).map_err(|source| CliError::Io { path: args.out.clone(), source })?;
    let model = args.out.join(format!("{}.gcl", args.builtin));
    write_out(Some(&model), &inst.source)?;
    let mut written = vec![model];
    for (i, p) in inst.scripted_policies::<f64>()?.iter().enumerate() {
        let path = args.out.join(format!("agent_{}.json", i + 1));
        save_policy(p, &path)?;
        written.push(path);
    }
    Ok(written)
}

/// Runs one command; the caller maps an error to its exit code.
pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Train(a) => {
            let r = cmd_train(&a)?;
            write_out(None, &serde_json::to_string_pretty(&r).expect("serialisable"))?;
        }
        Command::Verify(a) => {
            cmd_verify(&a)?;
        }
        Command::VerifyMonolithic(a) => {
            cmd_verify_monolithic(&a)?;
        }
        Command::Simulate(a) => {
            cmd_simulate(&a)?;
        }
        Command::Stats(a) => {
            cmd_stats(&a)?;
        }
        Command::Model(a) => {
            let paths: Vec<String> = cmd_model(&a)?.iter().map(|p| p.display().to_string()).collect();
            write_out(None, &paths.join("\n"))?;
        }
    }
    Ok(())
}

/// The `{"error": ...}` document printed on failure.
pub fn error_json(e: &CliError) -> String {
    json!({ "schema_version": SCHEMA_VERSION, "error": e.to_string(), "exit_code": e.exit_code() }).to_string()
}
