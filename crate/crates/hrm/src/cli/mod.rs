//! The `hrm` command-line front end.
//!
//! # Verbs
//!
//! | verb | input | output |
//! |------|-------|--------|
//! | `validate` | HRM file | JSON report |
//! | `flatten` | HRM file | flat HRM as JSON or DOT |
//! | `equiv` | two HRM files | JSON-lines report |
//! | `size` | HRM file or uniform profile | JSON counts |
//! | `dot` | HRM file | DOT graph |
//! | `eval-trace` | HRM file, trace file | JSON lines, one per trace |
//! | `env-rollout` | environment file, task | JSON lines, one per step |
//! | `train` | environment file, task | CSV training log |
//! | `induce` | trace file | HRM JSON and stats JSON |
//! | `lhrm` | run configuration | run directory |
//!
//! Output goes to `--out` when given and to standard output otherwise;
//! `lhrm` requires `--out` and writes a directory.
//!
//! # Exit codes
//!
//! `0` on success, `1` on a domain finding such as an equivalence mismatch,
//! an invalid hierarchy or a failed induction, and `2` on usage or I/O
//! errors.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::envs::{random_rollout, task_spec, EnvConfig, TaskEnv};
use crate::flattening::{analyze_size, check_equivalence, flatten, SizeProfile, TraceSource};
use crate::induction::{induce_root, minimal_induce, Budget, InductionTask, Outcome};
use crate::lhrm::{lhrm_run, LhrmConfig};
use crate::logic::PropositionSet;
use crate::machines::{load_hrm, load_traces, save_hrm, save_traces, to_dot, DeterminismCheck, Hrm};
use crate::options::{Agent, EpisodeRecord, LearnParams, Mode};
use crate::{Error, Result};

/// Command line.
#[derive(Debug, Parser)]
#[command(name = "hrm", version, about = "Hierarchies of reward machines")]
pub struct Cli {
    /// Master random seed.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Output file, or directory for `lhrm`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

/// Output format of verbs with more than one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Dot,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check structural and determinism rules.
    Validate { hrm: PathBuf },
    /// Write the equivalent flat hierarchy.
    Flatten {
        hrm: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Compare the verdicts of two hierarchies.
    Equiv(EquivArgs),
    /// State and edge counts of a hierarchy and its flattening.
    Size(SizeArgs),
    /// Render a hierarchy in Graphviz DOT.
    Dot { hrm: PathBuf },
    /// Classify every trace of a trace file.
    EvalTrace { hrm: PathBuf, traces: PathBuf },
    /// One episode with random actions.
    EnvRollout {
        #[arg(long)]
        env: PathBuf,
        #[arg(long)]
        task: String,
    },
    /// Learn policies for a task with a given hierarchy.
    Train(TrainArgs),
    /// Learn a root machine from traces.
    Induce(InduceArgs),
    /// Run the interleaved curriculum learner.
    Lhrm(LhrmArgs),
}

#[derive(Debug, Args)]
pub struct EquivArgs {
    pub left: PathBuf,
    pub right: PathBuf,
    /// Test every trace up to `--max-len`.
    #[arg(long, conflicts_with = "random")]
    pub exhaustive: bool,
    /// Number of random traces.
    #[arg(long)]
    pub random: Option<usize>,
    #[arg(long, default_value_t = 6)]
    pub max_len: usize,
}

#[derive(Debug, Args)]
pub struct SizeArgs {
    /// Hierarchy file; otherwise a uniform profile is analyzed.
    pub hrm: Option<PathBuf>,
    #[arg(long, required_unless_present = "hrm")]
    pub height: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub machines: u64,
    #[arg(long, default_value_t = 3)]
    pub states: u64,
    #[arg(long, default_value_t = 1)]
    pub edges: u64,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub env: PathBuf,
    #[arg(long)]
    pub task: String,
    /// Guiding hierarchy; the task's reference by default.
    #[arg(long)]
    pub hrm: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    pub episodes: usize,
    /// Learning parameters as JSON.
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// Write the learned Q-functions as JSON.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InduceArgs {
    /// JSON-lines trace file.
    pub traces: PathBuf,
    /// Comma-separated propositions; taken from the first callable otherwise.
    #[arg(long, value_delimiter = ',')]
    pub props: Vec<String>,
    /// Hierarchies whose roots may be called.
    #[arg(long)]
    pub callable: Vec<PathBuf>,
    #[arg(long, default_value = "M0")]
    pub root: String,
    #[arg(long, default_value_t = 1)]
    pub kappa: usize,
    /// Exact number of root states; the smallest sufficient number otherwise.
    #[arg(long)]
    pub states: Option<usize>,
    /// Largest root size tried when searching for the smallest.
    #[arg(long, default_value_t = 8)]
    pub max_states: usize,
    #[arg(long, default_value_t = 5_000_000)]
    pub nodes: u64,
    #[arg(long)]
    pub timeout_secs: Option<f64>,
    /// Stats JSON file; standard error otherwise.
    #[arg(long)]
    pub stats: Option<PathBuf>,
    /// Include wall-clock times in the stats.
    #[arg(long)]
    pub timings: bool,
}

#[derive(Debug, Args)]
pub struct LhrmArgs {
    /// Run configuration as JSON.
    #[arg(long)]
    pub config: PathBuf,
    /// Include wall-clock times in the manifest.
    #[arg(long)]
    pub timings: bool,
}

/// Exit code of a finished command.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Success = 0,
    Finding = 1,
    Usage = 2,
}

/// Parses the arguments; the error carries clap's message and exit code.
pub fn parse_args<I, T>(args: I) -> std::result::Result<Cli, clap::Error>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    Cli::try_parse_from(args)
}

/// Parses and executes; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match parse_args(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { Exit::Usage as i32 } else { Exit::Success as i32 };
        }
    };
    match execute(&cli) {
        Ok(code) => code as i32,
        Err(e) => {
            eprintln!("error: {e}");
            error_exit(&e) as i32
        }
    }
}

/// Usage and I/O failures map to [`Exit::Usage`], everything else to [`Exit::Finding`].
pub fn error_exit(e: &Error) -> Exit {
    match e {
        Error::Io(_)
        | Error::Json(_)
        | Error::Schema { .. }
        | Error::Csv(_)
        | Error::Config(_)
        | Error::UnknownTask(_) => Exit::Usage,
        _ => Exit::Finding,
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn read_hrm(path: &Path) -> Result<Hrm> {
    load_hrm(&read(path)?)
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn json_line<T: Serialize>(v: &T) -> Result<String> {
    Ok(serde_json::to_string(v)? + "\n")
}

fn drop_timings(v: &mut Value) {
    match v {
        Value::Object(m) => {
            m.remove("elapsed_ms");
            m.values_mut().for_each(drop_timings);
        }
        Value::Array(a) => a.iter_mut().for_each(drop_timings),
        _ => {}
    }
}

/// Runs a parsed command.
pub fn execute(cli: &Cli) -> Result<Exit> {
    match &cli.command {
        Command::Validate { hrm } => validate(cli, hrm),
        Command::Flatten { hrm, format } => {
            let flat = flatten(&read_hrm(hrm)?)?;
            let text = match format {
                Format::Json => save_hrm(&flat) + "\n",
                Format::Dot => to_dot(&flat),
            };
            emit(&cli.out, &text)?;
            Ok(Exit::Success)
        }
        Command::Equiv(a) => equiv(cli, a),
        Command::Size(a) => size(cli, a),
        Command::Dot { hrm } => {
            emit(&cli.out, &to_dot(&read_hrm(hrm)?))?;
            Ok(Exit::Success)
        }
        Command::EvalTrace { hrm, traces } => eval_trace(cli, hrm, traces),
        Command::EnvRollout { env, task } => {
            let cfg: EnvConfig = serde_json::from_str(&read(env)?)?;
            let spec = task_spec(task, cfg.has_deadends())?;
            let mut tenv = TaskEnv::new(cfg.build()?, spec.reference)?;
            let mut rng = ChaCha8Rng::seed_from_u64(cli.seed);
            let mut text = String::new();
            for step in random_rollout(&mut tenv, &mut rng)? {
                text += &json_line(&step)?;
            }
            emit(&cli.out, &text)?;
            Ok(Exit::Success)
        }
        Command::Train(a) => train(cli, a),
        Command::Induce(a) => induce(cli, a),
        Command::Lhrm(a) => lhrm(cli, a),
    }
}

fn validate(cli: &Cli, path: &Path) -> Result<Exit> {
    let h = read_hrm(path)?;
    let report = h.validate();
    let v = json!({
        "valid": report.is_valid(),
        "determinism": match report.determinism {
            DeterminismCheck::Checked => "checked",
            DeterminismCheck::Unchecked => "unchecked",
        },
        "violations": report.violations.iter().map(|x| x.to_string()).collect::<Vec<_>>(),
        "height": h.height().ok(),
    });
    emit(&cli.out, &json_line(&v)?)?;
    Ok(if report.is_valid() { Exit::Success } else { Exit::Finding })
}

fn equiv(cli: &Cli, a: &EquivArgs) -> Result<Exit> {
    let left = read_hrm(&a.left)?;
    let right = read_hrm(&a.right)?;
    let source = match a.random {
        Some(count) => TraceSource::Random { count, max_len: a.max_len, seed: cli.seed },
        None => TraceSource::Exhaustive { max_len: a.max_len },
    };
    let report = check_equivalence(&left, &right, &source)?;
    let mut text = json_line(&json!({
        "traces_tested": report.traces_tested,
        "mismatching_traces": report.mismatching_traces,
        "equivalent": report.is_equivalent(),
    }))?;
    for m in &report.mismatches {
        text += &json_line(m)?;
    }
    emit(&cli.out, &text)?;
    Ok(if report.is_equivalent() { Exit::Success } else { Exit::Finding })
}

fn size(cli: &Cli, a: &SizeArgs) -> Result<Exit> {
    let v = match (&a.hrm, a.height) {
        (Some(path), _) => {
            let h = read_hrm(path)?;
            let flat = flatten(&h)?;
            json!({
                "hrm_states": h.num_states(),
                "hrm_edges": h.num_edges(),
                "flat_states": flat.num_states(),
                "flat_edges": flat.num_edges(),
            })
        }
        (None, Some(height)) => {
            let s = analyze_size(&SizeProfile::uniform(height, a.machines, a.states, a.edges))?;
            json!({
                "hrm_states": s.hrm_states.to_string(),
                "hrm_edges": s.hrm_edges.to_string(),
                "flat_states": s.flat_states.to_string(),
                "flat_edges": s.flat_edges.to_string(),
            })
        }
        (None, None) => return Err(Error::Config("size needs a hierarchy file or --height".into())),
    };
    emit(&cli.out, &json_line(&v)?)?;
    Ok(Exit::Success)
}

fn eval_trace(cli: &Cli, hrm: &Path, traces: &Path) -> Result<Exit> {
    let h = read_hrm(hrm)?;
    let ts = load_traces(&read(traces)?, h.props())?;
    let mut text = String::new();
    let mut all_valid = true;
    for (i, t) in ts.iter().enumerate() {
        let verdict = h.classify(&t.labels)?;
        let valid = verdict == t.kind.expected_verdict();
        all_valid &= valid;
        text += &json_line(&json!({ "index": i, "kind": t.kind, "verdict": verdict, "valid": valid }))?;
    }
    emit(&cli.out, &text)?;
    Ok(if all_valid { Exit::Success } else { Exit::Finding })
}

fn train(cli: &Cli, a: &TrainArgs) -> Result<Exit> {
    let cfg: EnvConfig = serde_json::from_str(&read(&a.env)?)?;
    let spec = task_spec(&a.task, cfg.has_deadends())?;
    let hrm = match &a.hrm {
        Some(p) => read_hrm(p)?,
        None => spec.reference.clone(),
    };
    let params: LearnParams = match &a.params {
        Some(p) => serde_json::from_str(&read(p)?)?,
        None => LearnParams::default(),
    };
    let mut env = TaskEnv::new(cfg.build()?, spec.reference)?;
    let mut agent = Agent::new(params, cli.seed);
    let mut w = csv::Writer::from_writer(Vec::new());
    for episode in 1..=a.episodes {
        let s = agent.run_episode(&mut env, &hrm, Mode::Train)?;
        w.serialize(EpisodeRecord {
            episode,
            task: a.task.clone(),
            instance: 0,
            ret: s.ret,
            steps: s.steps,
            verdict: s.verdict,
        })?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    emit(&cli.out, &String::from_utf8_lossy(&bytes))?;
    if let Some(p) = &a.checkpoint {
        fs::write(p, serde_json::to_string_pretty(&agent.qs.to_json(hrm.props()))? + "\n")?;
    }
    Ok(Exit::Success)
}

fn induce(cli: &Cli, a: &InduceArgs) -> Result<Exit> {
    let callable = a.callable.iter().map(|p| read_hrm(p)).collect::<Result<Vec<_>>>()?;
    let props = if !a.props.is_empty() {
        PropositionSet::new(a.props.iter().map(String::as_str))?
    } else if let Some(h) = callable.first() {
        h.props().clone()
    } else {
        return Err(Error::Config("induce needs --props or a callable hierarchy".into()));
    };
    let examples = load_traces(&read(&a.traces)?, &props)?;
    let mut task = InductionTask::new(a.root.clone(), props, examples).with_callable(callable);
    task.kappa = a.kappa;
    let budget = Budget { max_nodes: a.nodes, time_limit: a.timeout_secs.map(Duration::from_secs_f64) };
    let res = match a.states {
        Some(n) => induce_root(&task.with_states(n), budget)?,
        None => minimal_induce(&task.with_states(a.max_states), 0, budget)?,
    };
    let mut stats = serde_json::to_value(&res.stats)?;
    stats["outcome"] = json!(res.outcome.label());
    if !a.timings {
        drop_timings(&mut stats);
    }
    let stats_text = json_line(&stats)?;
    match &a.stats {
        Some(p) => fs::write(p, &stats_text)?,
        None => eprint!("{stats_text}"),
    }
    match res.outcome {
        Outcome::Solution(h) => {
            emit(&cli.out, &(save_hrm(&h) + "\n"))?;
            Ok(Exit::Success)
        }
        _ => Ok(Exit::Finding),
    }
}

fn lhrm(cli: &Cli, a: &LhrmArgs) -> Result<Exit> {
    let Some(dir) = &cli.out else {
        return Err(Error::Config("lhrm needs --out DIR".into()));
    };
    let mut cfg: LhrmConfig = serde_json::from_str(&read(&a.config)?)?;
    cfg.seed = cli.seed;
    if !a.timings {
        cfg.induction_seconds = None;
    }
    let report = lhrm_run(cfg)?;
    fs::create_dir_all(dir.join("bank"))?;
    let props = PropositionSet::new(report.bank.props.iter().map(String::as_str))?;
    for e in &report.bank.entries {
        fs::write(dir.join("bank").join(format!("{}.json", e.name)), save_hrm(&report.hrm(&e.name)?) + "\n")?;
        fs::write(dir.join("bank").join(format!("{}.traces.jsonl", e.name)), save_traces(&props, &e.examples))?;
    }
    let mut manifest = json!({
        "config": report.config,
        "seed": cli.seed,
        "halted": report.halted,
        "episodes": report.episodes.len(),
        "inductions": report.inductions,
        "levels": report.levels,
        "returns": report.curriculum.returns,
        "learned": report.bank.entries.iter().map(|e| (e.name.clone(), e.learned)).collect::<std::collections::BTreeMap<_, _>>(),
        "bank": "bank",
    });
    if !a.timings {
        drop_timings(&mut manifest);
    }
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
    let mut w = csv::Writer::from_path(dir.join("curves.csv"))?;
    for e in &report.evals {
        w.serialize(e)?;
    }
    w.flush()?;
    let mut w = csv::Writer::from_path(dir.join("episodes.csv"))?;
    for e in &report.episodes {
        w.serialize(e)?;
    }
    w.flush()?;
    Ok(if report.halted.is_some() { Exit::Finding } else { Exit::Success })
}
