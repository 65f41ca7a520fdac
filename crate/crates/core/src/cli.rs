//! Command-line front end. Every subcommand renders its whole output into a
//! string first, so identical flags always yield identical bytes.

use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::analysis::{
    check_p1, check_p2, check_p3, p4_outcome, render_sweep_csv, run_solver, sweep_theta_parallel,
    PropertyReport, SolverConfig,
};
use crate::env::{
    build_cliffworld, build_counter_mdp, CliffworldParams, CounterParams, SlipMode, COUNTER_S1,
};
use crate::error::{Error, Result};
use crate::exact::{closed_form_counter, counter_values_by_evaluation, evaluate_policy};
use crate::format::{read_mdp, write_mdp};
use crate::mdp::{monte_carlo, MdpSpec, Policy, StateId, DEFAULT_MAX_STEPS};
use crate::naive::{naive_policy_iteration, render_trace_tsv, InitP, CONVERGENCE_TOLERANCE};
use crate::numfmt::f9;
use crate::recursive::{recursive_policy_iteration, recursive_value_iteration};

#[derive(Parser, Debug)]
#[command(name = "safevi", version, about = "Reachability-constrained MDP planning")]
#[command(args_override_self = true)]
pub struct Cli {
    /// File of `key = value` lines supplying defaults for any long flag.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Write output here instead of stdout.
    #[arg(long, global = true, value_name = "FILE")]
    pub out: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Environment utilities.
    Env {
        #[command(subcommand)]
        action: EnvCommand,
    },
    /// Compare closed-form counter-MDP values with exact evaluation.
    CounterEval(CounterEvalArgs),
    /// Run naive or recursive value iteration at one threshold.
    Vi(ViArgs),
    /// Policy-iteration trace as TSV rows.
    PiTrace(PiTraceArgs),
    /// Threshold sweep written as CSV.
    Sweep(SweepArgs),
    /// Check properties P1-P4 on a candidate policy.
    Check(CheckArgs),
}

#[derive(Subcommand, Debug)]
pub enum EnvCommand {
    /// Print an environment in the text MDP format.
    Dump(EnvArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum EnvKind {
    Counter,
    Cliff,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SlipArg {
    Include,
    Exclude,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Naive,
    Recursive,
}

#[derive(Args, Debug, Clone)]
pub struct EnvArgs {
    #[arg(long, value_enum, default_value = "counter")]
    pub env: EnvKind,
    /// Load the MDP from a text file instead of a built-in environment.
    #[arg(long, value_name = "FILE")]
    pub mdp: Option<PathBuf>,
    /// Counter-MDP success probability.
    #[arg(long, default_value_t = 0.7)]
    pub p: f64,
    #[arg(long, default_value_t = 0.95)]
    pub gamma: f64,
    #[arg(long, default_value_t = 4)]
    pub width: usize,
    #[arg(long, default_value_t = 3)]
    pub height: usize,
    #[arg(long, default_value_t = 0.5)]
    pub slip: f64,
    #[arg(long, value_enum, default_value = "include")]
    pub slip_mode: SlipArg,
    /// Start state name (defaults to the environment's start).
    #[arg(long)]
    pub start: Option<String>,
}

#[derive(Args, Debug, Clone)]
pub struct SolverArgs {
    #[arg(long, value_enum, default_value = "recursive")]
    pub mode: Mode,
    /// Iterations (default 50 naive, 15 recursive).
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Horizon N of the recursive stack.
    #[arg(long, default_value_t = 15)]
    pub horizon: usize,
    /// Initial reachability for naive VI: a constant in [0, 1] or `uniform`.
    #[arg(long, default_value = "0")]
    pub init_p: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl SolverArgs {
    fn config(&self) -> Result<SolverConfig> {
        match self.mode {
            Mode::Naive => {
                let init = if self.init_p == "uniform" {
                    InitP::SeededUniform { seed: self.seed }
                } else {
                    InitP::Constant(parse_f64("init-p", &self.init_p)?)
                };
                Ok(SolverConfig::Naive { k: self.iterations.unwrap_or(50), init })
            }
            Mode::Recursive => {
                if self.init_p != "0" {
                    return Err(Error::InvalidParameter(
                        "--init-p applies to naive mode only".into(),
                    ));
                }
                Ok(SolverConfig::Recursive {
                    k: self.iterations.unwrap_or(15),
                    horizon: self.horizon,
                })
            }
        }
    }
}

#[derive(Args, Debug)]
pub struct CounterEvalArgs {
    #[arg(long, default_value_t = 0.7)]
    pub p: f64,
    #[arg(long, default_value_t = 0.95)]
    pub gamma: f64,
    /// Also simulate this many episodes of each uniform policy from s1.
    #[arg(long, default_value_t = 0)]
    pub episodes: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct ViArgs {
    #[command(flatten)]
    pub env: EnvArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long, default_value_t = 0.85)]
    pub theta: f64,
}

#[derive(Args, Debug)]
pub struct PiTraceArgs {
    #[command(flatten)]
    pub env: EnvArgs,
    #[arg(long, value_enum, default_value = "naive")]
    pub mode: Mode,
    #[arg(long, default_value_t = 0.85)]
    pub theta: f64,
    /// Initial policy: an action name used everywhere, or `state=action,...`.
    #[arg(long, default_value = "R")]
    pub init_policy: String,
    #[arg(long, default_value_t = 10)]
    pub iterations: usize,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[command(flatten)]
    pub env: EnvArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Threshold grid: comma-separated values and `start:stop:step` ranges.
    #[arg(long, default_value = "0:1:0.01")]
    pub thetas: String,
    /// Worker threads; output order does not depend on it.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Args, Debug)]
pub struct CheckArgs {
    #[command(flatten)]
    pub env: EnvArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long, default_value = "p1,p2,p3,p4")]
    pub props: String,
    #[arg(long, default_value_t = 0.85)]
    pub theta: f64,
    /// Candidate policy; defaults to the solver's output at `--theta`.
    #[arg(long)]
    pub candidate: Option<String>,
    /// Threshold pairs for P3, e.g. `0.5:0.95,0.8:0.9`.
    #[arg(long, default_value = "0.5:0.95")]
    pub pairs: String,
}

fn parse_f64(what: &str, text: &str) -> Result<f64> {
    text.trim()
        .parse()
        .map_err(|_| Error::InvalidParameter(format!("{what}: `{text}` is not a number")))
}

/// Expands `0:1:0.01,0.999`-style grids. Ranges include `start`; `stop` is
/// included when reached, except that thresholds of 1 or more never are.
pub fn parse_theta_grid(text: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let fields: Vec<&str> = part.split(':').collect();
        match fields.as_slice() {
            [v] => out.push(parse_f64("theta", v)?),
            [a, b, c] => {
                let (start, stop, step) =
                    (parse_f64("theta", a)?, parse_f64("theta", b)?, parse_f64("theta", c)?);
                if step.is_nan() || step <= 0.0 {
                    return Err(Error::InvalidParameter(format!("grid step {step} must be positive")));
                }
                let count = ((stop - start) / step + 1e-9).floor() as i64;
                for i in 0..=count.max(-1) {
                    // Round away accumulated binary error: 0.07 not 0.07000000000000001.
                    let t = ((start + i as f64 * step) * 1e9).round() / 1e9;
                    if t < 1.0 {
                        out.push(t);
                    }
                }
            }
            _ => return Err(Error::InvalidParameter(format!("bad grid segment `{part}`"))),
        }
    }
    if out.is_empty() {
        return Err(Error::InvalidParameter("empty threshold grid".into()));
    }
    out.sort_by(f64::total_cmp);
    out.dedup();
    Ok(out)
}

/// Parses `state=action,...` (unlisted states keep their first action) or a
/// single action name applied wherever it is available.
pub fn parse_policy(spec: &MdpSpec, text: &str) -> Result<Policy> {
    let mut choice = Policy::first_available(spec).as_slice().to_vec();
    if text.contains('=') {
        for pair in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (s, a) = pair
                .split_once('=')
                .ok_or_else(|| Error::InvalidPolicy(format!("expected state=action, got `{pair}`")))?;
            choice[spec.state_id(s.trim())?] = spec.action_id(a.trim())?;
        }
    } else {
        let a = spec.action_id(text.trim())?;
        for s in spec.states() {
            if spec.is_available(s, a) {
                choice[s] = a;
            }
        }
    }
    Policy::new(spec, choice)
}

fn build_env(args: &EnvArgs) -> Result<(MdpSpec, StateId)> {
    let (spec, default_start) = if let Some(path) = &args.mdp {
        let spec = read_mdp(&std::fs::read_to_string(path)?)?;
        let start = spec
            .non_terminal_states()
            .next()
            .ok_or_else(|| Error::InvalidParameter("MDP has no non-terminal state".into()))?;
        let name = spec.state_name(start).to_string();
        (spec, name)
    } else {
        match args.env {
            EnvKind::Counter => (
                build_counter_mdp(CounterParams { p: args.p, gamma: args.gamma })?,
                COUNTER_S1.to_string(),
            ),
            EnvKind::Cliff => {
                let mut params = CliffworldParams::with_size(args.width, args.height);
                params.slip = args.slip;
                params.gamma = args.gamma;
                params.slip_mode = match args.slip_mode {
                    SlipArg::Include => SlipMode::Include,
                    SlipArg::Exclude => SlipMode::Exclude,
                };
                let start = params.start_name();
                (build_cliffworld(&params)?, start)
            }
        }
    };
    let start = spec.state_id(args.start.as_deref().unwrap_or(&default_start))?;
    if spec.is_terminal(start) {
        return Err(Error::InvalidParameter(format!(
            "start state {} is terminal",
            spec.state_name(start)
        )));
    }
    Ok((spec, start))
}

fn counter_eval(args: &CounterEvalArgs) -> Result<String> {
    let spec = build_counter_mdp(CounterParams { p: args.p, gamma: args.gamma })?;
    let closed = closed_form_counter(args.p, args.gamma)?;
    let evaluated = counter_values_by_evaluation(&spec)?;
    let mut out = String::from("quantity\tclosed_form\texact_eval\tdeviation\n");
    let mut worst = 0.0f64;
    for ((name, c), (_, e)) in closed.named().into_iter().zip(evaluated.named()) {
        let d = (c - e).abs();
        worst = worst.max(d);
        let _ = writeln!(out, "{name}\t{}\t{}\t{}", f9(c), f9(e), f9(d));
    }
    let _ = writeln!(out, "max_deviation\t{}", f9(worst));
    if args.episodes > 0 {
        let _ = writeln!(out, "policy\tfailure_rate\tstd_error\tmean_return\tstd_error\ttruncated");
        for (label, a) in [("L", crate::env::LEFT), ("R", crate::env::RIGHT)] {
            let pi = Policy::uniform(&spec, a);
            let mc = monte_carlo(&spec, &pi, 0, args.episodes, args.seed, DEFAULT_MAX_STEPS)?;
            let _ = writeln!(
                out,
                "{label}\t{}\t{}\t{}\t{}\t{}",
                f9(mc.failure_rate),
                f9(mc.failure_std_error),
                f9(mc.mean_return),
                f9(mc.return_std_error),
                mc.truncated
            );
        }
    }
    Ok(out)
}

fn vi(args: &ViArgs) -> Result<String> {
    let (spec, start) = build_env(&args.env)?;
    let solver = args.solver.config()?;
    let mut out = String::new();
    let _ = writeln!(out, "mode\t{}", solver.name());
    let _ = writeln!(out, "theta\t{}", f9(args.theta));
    let (policy, p_est, v_est) = match solver {
        SolverConfig::Naive { k, init } => {
            let sol = crate::naive::naive_value_iteration(&spec, args.theta, k, init)?;
            let a = sol.policy.action(start);
            let _ = writeln!(out, "converged\t{}", sol.trace.converged);
            let period = sol.trace.oscillation_period.map_or("none".to_string(), |p| p.to_string());
            let _ = writeln!(out, "oscillation_period\t{period}");
            let last = sol.trace.snapshots.last().expect("k >= 1").value_change;
            let _ = writeln!(out, "last_value_change\t{}", f9(last));
            (sol.policy.clone(), sol.values.p(start, a), sol.values.q(start, a))
        }
        SolverConfig::Recursive { k, horizon } => {
            let sol = recursive_value_iteration(&spec, args.theta, k, horizon)?;
            let a = sol.policy.action(start);
            let last = sol.report.iterations.last().expect("k >= 1");
            let _ = writeln!(out, "converged\t{}", sol.report.converged);
            let _ = writeln!(out, "stabilization_horizon\t{}", sol.report.stabilization_horizon);
            let _ = writeln!(out, "last_p_change\t{}", f9(last.p_change));
            let _ = writeln!(out, "last_q_change\t{}", f9(last.q_change));
            let admissible: Vec<&str> = sol
                .report
                .final_admissible(start)
                .iter()
                .map(|&a| spec.action_name(a))
                .collect();
            let _ = writeln!(out, "admissible_at_start\t{}", admissible.join(","));
            (sol.policy.clone(), sol.stack.p_hat(horizon, start, a), sol.stack.q_hat(horizon, start, a))
        }
    };
    let exact = evaluate_policy(&spec, &policy)?;
    let _ = writeln!(out, "policy\t{}", policy.describe(&spec));
    let _ = writeln!(out, "start\t{}", spec.state_name(start));
    let _ = writeln!(out, "P_est\t{}", f9(p_est));
    let _ = writeln!(out, "P_true\t{}", f9(exact.p[start]));
    let _ = writeln!(out, "V_est\t{}", f9(v_est));
    let _ = writeln!(out, "V_true\t{}", f9(exact.v[start]));
    Ok(out)
}

fn pi_trace(args: &PiTraceArgs) -> Result<String> {
    let (spec, start) = build_env(&args.env)?;
    let initial = parse_policy(&spec, &args.init_policy)?;
    let trace = match args.mode {
        Mode::Naive => naive_policy_iteration(&spec, args.theta, &initial, args.iterations)?,
        Mode::Recursive => recursive_policy_iteration(&spec, args.theta, &initial, args.iterations)?,
    };
    Ok(render_trace_tsv(&spec, &trace, start))
}

fn sweep(args: &SweepArgs) -> Result<String> {
    let (spec, start) = build_env(&args.env)?;
    let thetas = parse_theta_grid(&args.thetas)?;
    let solver = args.solver.config()?;
    let results = sweep_theta_parallel(&spec, solver, &thetas, start, args.jobs)?;
    let records = results.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(render_sweep_csv(&records))
}

fn check(args: &CheckArgs) -> Result<String> {
    let (spec, _) = build_env(&args.env)?;
    let solver = args.solver.config()?;
    let candidate = match &args.candidate {
        Some(text) => parse_policy(&spec, text)?,
        None => run_solver(&spec, solver, args.theta)?.policy,
    };
    let mut report = PropertyReport { theta: args.theta, outcomes: Vec::new() };
    for prop in args.props.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match prop {
            "p1" => report.outcomes.extend(check_p1(&spec, args.theta, &candidate)?),
            "p2" => report.outcomes.push(check_p2(&spec, args.theta, &candidate)?),
            "p3" => {
                let mut pairs = Vec::new();
                for pair in args.pairs.split(',').map(str::trim).filter(|p| !p.is_empty()) {
                    let (lo, hi) = pair.split_once(':').ok_or_else(|| {
                        Error::InvalidParameter(format!("P3 pair `{pair}` is not lo:hi"))
                    })?;
                    pairs.push((parse_f64("pair", lo)?, parse_f64("pair", hi)?));
                }
                report.outcomes.extend(check_p3(&spec, &pairs, solver)?);
            }
            "p4" => {
                let tables = evaluate_policy(&spec, &candidate)?.tables;
                report.outcomes.push(p4_outcome(
                    &spec,
                    args.theta,
                    &tables,
                    &candidate,
                    CONVERGENCE_TOLERANCE,
                )?);
            }
            other => {
                return Err(Error::UnknownName { kind: "property", name: other.to_string() })
            }
        }
    }
    let mut out = format!("candidate\t{}\n", candidate.describe(&spec));
    out.push_str(&report.render(&spec));
    Ok(out)
}

/// Executes a parsed command and returns what it would print.
pub fn execute(cli: &Cli) -> Result<String> {
    match &cli.command {
        Command::Env { action: EnvCommand::Dump(args) } => Ok(write_mdp(&build_env(args)?.0)),
        Command::CounterEval(args) => counter_eval(args),
        Command::Vi(args) => vi(args),
        Command::PiTrace(args) => pi_trace(args),
        Command::Sweep(args) => sweep(args),
        Command::Check(args) => check(args),
    }
}

/// Appends `--key value` for every config entry whose flag is absent from
/// `argv`, so explicit flags win over the file.
pub fn apply_config(argv: &[String], text: &str) -> Result<Vec<String>> {
    let mut args = argv.to_vec();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: i + 1,
            message: format!("expected `key = value`, got `{line}`"),
        })?;
        let flag = format!("--{}", key.trim());
        let given = argv.iter().any(|a| a == &flag || a.starts_with(&format!("{flag}=")));
        if !given {
            args.push(flag);
            args.push(value.trim().to_string());
        }
    }
    Ok(args)
}

fn config_path(argv: &[String]) -> Option<String> {
    argv.iter().enumerate().find_map(|(i, a)| {
        if a == "--config" {
            argv.get(i + 1).cloned()
        } else {
            a.strip_prefix("--config=").map(str::to_string)
        }
    })
}

/// Full process behavior: exit code 0 on success, 2 on usage errors, 1 on
/// domain errors.
pub fn run(argv: Vec<String>) -> i32 {
    let argv = match config_path(&argv) {
        Some(path) => match std::fs::read_to_string(&path)
            .map_err(Error::from)
            .and_then(|text| apply_config(&argv, &text))
        {
            Ok(a) => a,
            Err(e) => {
                eprintln!("error: config {path}: {e}");
                return 2;
            }
        },
        None => argv,
    };
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let output = match execute(&cli) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    let written = match &cli.out {
        Some(path) => std::fs::write(path, output.as_bytes()),
        None => {
            use std::io::Write;
            std::io::stdout().write_all(output.as_bytes())
        }
    };
    match written {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
