use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use smd_core::constrained::{policy_constraint_metrics, solve_constrained, ConstrainedSolveOptions};
use smd_core::experiment::{
    builtin_suite, instance_suite, loglog_slope, median, samples_to_target, LemmaRow, RowStatus,
};
use smd_core::game::{solve_game, solve_linf_regression, GameInstance, GameSolveOptions};
use smd_core::mdp::{
    evaluate_policy, generate_instance, optimal_oracle, GeneratorParams, InstanceKind, MdpInstance, Policy,
};
use smd_core::mdp_smd::{solve_mdp, MdpMode, MdpSaddleConfig, MdpSolveOptions};
use smd_core::report::{write_checkpoints_csv, ConstraintMetrics, SolveReport};
use smd_core::saddle::{Averaging, CheckpointPlan, ScheduleConstants, SmdOptions};
use smd_core::sampling::{RngState, SamplerKind, Stream};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "mdp-smd",
    version,
    about = "Stochastic mirror descent solvers for MDPs, matrix games and l-inf regression"
)]
struct Cli {
    /// Print JSON on stdout instead of human-readable tables.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random instance file.
    Generate(GenerateArgs),
    /// Solve one instance and write a report and checkpoint CSV.
    Solve(SolveArgs),
    /// Samples-to-target over an (eps, seed) grid with a log-log slope fit.
    Sweep(SweepArgs),
    /// Run the lemma-level checks on an instance or the builtin suite.
    Verify(VerifyArgs),
    /// Evaluate a policy against an instance with the exact oracle.
    Eval(EvalArgs),
}

#[derive(Args, Clone)]
struct GeneratorArgs {
    #[arg(long, default_value = "random_mixing")]
    kind: InstanceKind,
    #[arg(long = "S", default_value_t = 5)]
    states: usize,
    /// Actions per state.
    #[arg(long, default_value_t = 3)]
    actions: usize,
    #[arg(long, default_value_t = 0.3)]
    alpha: f64,
    #[arg(long, default_value_t = 0.9)]
    gamma: f64,
    /// Number of constraints.
    #[arg(long = "K", default_value_t = 2)]
    constraints: usize,
    #[arg(long, default_value_t = 1.0)]
    d_max: f64,
    #[arg(long, default_value_t = 0.8)]
    slack: f64,
}

impl GeneratorArgs {
    fn params(&self) -> GeneratorParams {
        GeneratorParams {
            states: self.states,
            actions: self.actions,
            alpha: self.alpha,
            gamma: self.gamma,
            constraints: self.constraints,
            d_max: self.d_max,
            slack: self.slack,
        }
    }

    fn generate(&self, seed: u64) -> smd_core::Result<MdpInstance> {
        let mut rng = RngState::for_role(seed, Stream::Generator);
        generate_instance(self.kind, &self.params(), &mut rng)
    }
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    generator: GeneratorArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Task {
    Amdp,
    Dmdp,
    Camdp,
    Game,
    Regression,
}

#[derive(Clone, Copy, ValueEnum)]
enum AveragingArg {
    Lazy,
    Dense,
}

#[derive(Clone, Copy, ValueEnum)]
enum SamplerArg {
    SumTree,
    LinearScan,
}

#[derive(Args)]
struct RunArgs {
    /// Averaging mode; both give the same iterates up to rounding.
    #[arg(long = "mode", value_enum, default_value = "lazy")]
    averaging: AveragingArg,
    #[arg(long, value_enum, default_value = "sum-tree")]
    sampler: SamplerArg,
    /// Mixing-time bound overriding the one recorded in the instance.
    #[arg(long)]
    t_mix: Option<u32>,
    /// Stop after this many iterations even if the schedule asks for more.
    #[arg(long)]
    cap: Option<u64>,
}

impl RunArgs {
    fn smd(&self) -> SmdOptions {
        SmdOptions {
            averaging: match self.averaging {
                AveragingArg::Lazy => Averaging::Lazy,
                AveragingArg::Dense => Averaging::Dense,
            },
            sampler: match self.sampler {
                SamplerArg::SumTree => SamplerKind::SumTree,
                SamplerArg::LinearScan => SamplerKind::LinearScan,
            },
            record_trace: false,
        }
    }
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    instance: PathBuf,
    /// Defaults to camdp for instances with costs, dmdp with a discount, amdp otherwise.
    #[arg(long, value_enum)]
    task: Option<Task>,
    #[arg(long)]
    eps: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    run: RunArgs,
    /// Number of geometric checkpoints ending at T.
    #[arg(long, default_value_t = 20)]
    checkpoints: usize,
    /// Report JSON path.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Checkpoint CSV path.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Instance file; generated from the generator flags when absent.
    #[arg(long)]
    instance: Option<PathBuf>,
    #[command(flatten)]
    generator: GeneratorArgs,
    /// Generator seed when no instance file is given.
    #[arg(long, default_value_t = 0)]
    instance_seed: u64,
    #[arg(long, value_enum, default_value = "amdp")]
    task: Task,
    /// Comma-separated accuracies, at least three.
    #[arg(long, value_delimiter = ',', required = true)]
    eps: Vec<f64>,
    /// Comma-separated seeds or a range `a..b`, at least ten.
    #[arg(long, default_value = "0..10")]
    seeds: String,
    #[command(flatten)]
    run: RunArgs,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, conflicts_with = "builtin", required_unless_present = "builtin")]
    instance: Option<PathBuf>,
    /// Run the builtin suite on generated instances.
    #[arg(long)]
    builtin: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    instance: PathBuf,
    /// Policy JSON (rows of action probabilities) or a solve report containing one.
    #[arg(long)]
    policy: PathBuf,
}

/// Error categories mapped to exit codes.
#[derive(Debug)]
enum Failure {
    Config(anyhow::Error),
    Numeric(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        let numeric = e.chain().any(|c| {
            matches!(
                c.downcast_ref::<smd_core::Error>(),
                Some(
                    smd_core::Error::NonFiniteIterate(_)
                        | smd_core::Error::StepBoundViolation { .. }
                        | smd_core::Error::SingularMatrix
                )
            )
        });
        if numeric {
            Failure::Numeric(e)
        } else {
            Failure::Config(e)
        }
    }
}

impl From<smd_core::Error> for Failure {
    fn from(e: smd_core::Error) -> Self {
        anyhow::Error::from(e).into()
    }
}

type CmdResult = Result<ExitCode, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Generate(a) => generate(a, cli.json),
        Command::Solve(a) => solve(a, cli.json),
        Command::Sweep(a) => sweep(a, cli.json),
        Command::Verify(a) => verify(a, cli.json),
        Command::Eval(a) => eval(a, cli.json),
    };
    match result {
        Ok(code) => code,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Numeric(e)) => {
            eprintln!("numeric failure: {e:#}");
            ExitCode::from(3)
        }
    }
}

fn print_json<T: Serialize>(value: &T) -> anyhow::Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn load_mdp(path: &Path) -> anyhow::Result<MdpInstance> {
    MdpInstance::load(path).with_context(|| format!("reading instance {}", path.display()))
}

#[derive(Serialize)]
struct GenerateOutput<'a> {
    path: &'a Path,
    t_mix: Option<u32>,
    feasibility: Option<&'a smd_core::mdp::Feasibility>,
}

fn generate(a: &GenerateArgs, json: bool) -> CmdResult {
    let mdp = a.generator.generate(a.seed)?;
    mdp.save(&a.output)
        .with_context(|| format!("writing {}", a.output.display()))?;
    if json {
        print_json(&GenerateOutput {
            path: &a.output,
            t_mix: mdp.t_mix(),
            feasibility: mdp.feasibility(),
        })?;
    } else {
        println!("wrote {}", a.output.display());
        match mdp.t_mix() {
            Some(t) => println!("t_mix = {t}"),
            None => println!("t_mix not recorded"),
        }
        if let Some(f) = mdp.feasibility() {
            match f.max_min_dmu {
                Some(v) => println!("feasibility: max_mu min_k (D^T mu)_k = {v:.6} (strict if > 1)"),
                None => println!("feasibility: unchecked"),
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct RegressionOutput<'a> {
    #[serde(flatten)]
    report: &'a SolveReport,
    x: Vec<f64>,
    value: f64,
    lower_bound: f64,
    certified_gap: f64,
}

fn default_task(mdp: &MdpInstance) -> Task {
    if mdp.costs().is_some() {
        Task::Camdp
    } else if mdp.gamma().is_some() {
        Task::Dmdp
    } else {
        Task::Amdp
    }
}

fn write_text(path: &Path, text: &str) -> anyhow::Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn solve(a: &SolveArgs, json: bool) -> CmdResult {
    let plan = CheckpointPlan::Geometric(a.checkpoints);
    let smd = a.run.smd();
    let (report, report_text, extra) = match a.task {
        Some(Task::Game) | Some(Task::Regression) => {
            let game = GameInstance::load(&a.instance).with_context(|| format!("reading {}", a.instance.display()))?;
            let mut opts = GameSolveOptions::new(a.eps, a.seed);
            opts.iteration_cap = a.run.cap;
            opts.checkpoints = plan;
            opts.smd = smd;
            if a.task == Some(Task::Game) {
                let sol = solve_game(&game, &opts)?;
                let text = sol.report.to_json()?;
                (sol.report, text, None)
            } else {
                let sol = solve_linf_regression(game.matrix(), game.c(), &opts)?;
                let out = RegressionOutput {
                    report: &sol.report,
                    x: sol.x.to_vec(),
                    value: sol.value,
                    lower_bound: sol.lower_bound,
                    certified_gap: sol.certified_gap,
                };
                let text = serde_json::to_string_pretty(&out).context("serializing report")? + "\n";
                let extra = format!("value {:.6}, certified gap {:.6}", sol.value, sol.certified_gap);
                (sol.report, text, Some(extra))
            }
        }
        task => {
            let mdp = load_mdp(&a.instance)?;
            let report = match task.unwrap_or_else(|| default_task(&mdp)) {
                Task::Camdp => {
                    let mut opts = ConstrainedSolveOptions::new(a.eps, a.seed);
                    opts.t_mix = a.run.t_mix;
                    opts.iteration_cap = a.run.cap;
                    opts.checkpoints = plan;
                    opts.smd = smd;
                    solve_constrained(&mdp, &opts)?.report
                }
                task => {
                    let mode = if task == Task::Dmdp {
                        MdpMode::Discounted
                    } else {
                        MdpMode::Mixing
                    };
                    let mut opts = MdpSolveOptions::new(mode, a.eps, a.seed);
                    opts.t_mix = a.run.t_mix;
                    opts.iteration_cap = a.run.cap;
                    opts.checkpoints = plan;
                    opts.smd = smd;
                    solve_mdp(&mdp, &opts)?.report
                }
            };
            let text = report.to_json()?;
            (report, text, None)
        }
    };

    if let Some(path) = &a.output {
        write_text(path, &report_text)?;
    }
    if let Some(path) = &a.csv {
        let mut buf = Vec::new();
        write_checkpoints_csv(&mut buf, &report.checkpoints)?;
        std::fs::write(path, buf).with_context(|| format!("writing {}", path.display()))?;
    }
    if json {
        print!("{report_text}");
    } else {
        println!(
            "{}: T = {}, samples = {}, gap = {:.6}{}",
            report.mode,
            report.iterations,
            report.samples,
            report.gap,
            report.subopt.map_or(String::new(), |s| format!(", subopt = {s:.6}"))
        );
        if let Some(full) = report.full_budget {
            println!("capped: the schedule asked for {full} iterations");
        }
        if let Some(c) = &report.constraints {
            println!(
                "min_k (D^T mu)_k = {:.6}, stationarity = {:.3e}",
                c.min_Dmu, c.stationarity_l1
            );
        }
        if let Some(extra) = extra {
            println!("{extra}");
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn parse_seeds(text: &str) -> anyhow::Result<Vec<u64>> {
    let seeds: Vec<u64> = match text.split_once("..") {
        Some((lo, hi)) => (lo.trim().parse()?..hi.trim().parse()?).collect(),
        None => text.split(',').map(|s| s.trim().parse()).collect::<Result<_, _>>()?,
    };
    let mut sorted = seeds.clone();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != seeds.len() {
        bail!("seeds must be distinct");
    }
    Ok(seeds)
}

#[derive(Debug, Clone, Serialize)]
struct SweepCell {
    eps: f64,
    seed: u64,
    #[serde(rename = "T")]
    iterations: u64,
    samples: u64,
    samples_to_target: Option<u64>,
    subopt: Option<f64>,
}

#[derive(Serialize)]
struct SweepSummary {
    cells: Vec<SweepCell>,
    /// `(eps, median samples-to-target)`; cells that never reached the target count their total samples.
    medians: Vec<(f64, f64)>,
    slope: Option<f64>,
}

fn thread_pool() -> anyhow::Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("MDP_SMD_THREADS") {
        let n: usize = v
            .parse()
            .with_context(|| format!("MDP_SMD_THREADS={v:?} is not a count"))?;
        builder = builder.num_threads(n.max(1));
    }
    Ok(builder.build()?)
}

fn sweep(a: &SweepArgs, json: bool) -> CmdResult {
    if a.eps.len() < 3 || a.eps.iter().any(|e| !(*e > 0.0 && *e < 1.0)) {
        return Err(anyhow::anyhow!("sweep needs at least three accuracies in (0,1)").into());
    }
    let mut distinct = a.eps.clone();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() != a.eps.len() {
        return Err(anyhow::anyhow!("accuracies must be distinct").into());
    }
    let seeds = parse_seeds(&a.seeds)?;
    if seeds.len() < 10 {
        return Err(anyhow::anyhow!("sweep needs at least ten seeds").into());
    }
    let mode = match a.task {
        Task::Amdp => MdpMode::Mixing,
        Task::Dmdp => MdpMode::Discounted,
        _ => return Err(anyhow::anyhow!("sweep supports amdp and dmdp").into()),
    };
    let mdp = match &a.instance {
        Some(path) => load_mdp(path)?,
        None => a.generator.generate(a.instance_seed)?,
    };
    let smd = a.run.smd();
    let cells: Vec<(f64, u64)> = a.eps.iter().flat_map(|&e| seeds.iter().map(move |&s| (e, s))).collect();
    let pool = thread_pool()?;
    let results: Vec<smd_core::Result<SweepCell>> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(eps, seed)| {
                let cfg = MdpSaddleConfig::new(&mdp, mode, eps, a.run.t_mix, &ScheduleConstants::default())?;
                let total = a
                    .run
                    .cap
                    .map_or(cfg.schedule.iterations, |c| c.min(cfg.schedule.iterations));
                // quarter-octave grid over twelve octaves below T
                let grid = (0..=48)
                    .map(|k| (total as f64 * 2f64.powf(-k as f64 / 4.0)) as u64)
                    .collect();
                let mut opts = MdpSolveOptions::new(mode, eps, seed);
                opts.t_mix = a.run.t_mix;
                opts.iteration_cap = a.run.cap;
                opts.checkpoints = CheckpointPlan::At(grid);
                opts.smd = smd;
                let r = solve_mdp(&mdp, &opts)?.report;
                Ok(SweepCell {
                    eps,
                    seed,
                    iterations: r.iterations,
                    samples: r.samples,
                    samples_to_target: samples_to_target(&r.checkpoints, eps),
                    subopt: r.subopt,
                })
            })
            .collect()
    });
    let cells = results.into_iter().collect::<smd_core::Result<Vec<_>>>()?;

    let medians: Vec<(f64, f64)> = a
        .eps
        .iter()
        .map(|&e| {
            let xs: Vec<f64> = cells
                .iter()
                .filter(|c| c.eps == e)
                .map(|c| c.samples_to_target.unwrap_or(c.samples) as f64)
                .collect();
            (e, median(&xs).unwrap_or(f64::NAN))
        })
        .collect();
    let (xs, ys): (Vec<f64>, Vec<f64>) = medians.iter().copied().unzip();
    let slope = loglog_slope(&xs, &ys).ok();

    let mut csv = String::from("kind,eps,seed,T,samples_to_target,subopt,slope\n");
    let opt = |v: Option<String>| v.unwrap_or_default();
    for c in &cells {
        csv += &format!(
            "cell,{},{},{},{},{},\n",
            c.eps,
            c.seed,
            c.iterations,
            opt(c.samples_to_target.map(|s| s.to_string())),
            opt(c.subopt.map(|s| format!("{s:.9e}")))
        );
    }
    for (e, m) in &medians {
        csv += &format!("median,{e},,,{m},,\n");
    }
    csv += &format!("slope,,,,,,{}\n", opt(slope.map(|s| format!("{s:.6}"))));
    match &a.output {
        Some(path) => write_text(path, &csv)?,
        None if !json => print!("{csv}"),
        None => {}
    }
    if json {
        print_json(&SweepSummary { cells, medians, slope })?;
    } else if a.output.is_some() {
        println!("slope = {}", opt(slope.map(|s| format!("{s:.4}"))));
    }
    Ok(ExitCode::SUCCESS)
}

fn fmt_value(v: f64) -> String {
    if v.is_nan() {
        "-".into()
    } else {
        format!("{v:.6}")
    }
}

fn verify(a: &VerifyArgs, json: bool) -> CmdResult {
    let rows: Vec<LemmaRow> = match &a.instance {
        Some(path) => instance_suite(&load_mdp(path)?, a.seed)?,
        None => builtin_suite(a.seed)?,
    };
    if json {
        print_json(&rows)?;
    } else {
        let width = rows.iter().map(|r| r.check.len()).max().unwrap_or(5).max(5);
        println!("{:width$}  status  {:>14}  {:>14}  note", "check", "measured", "bound");
        for r in &rows {
            let status = match r.status {
                RowStatus::Pass => "PASS",
                RowStatus::Fail => "FAIL",
                RowStatus::Skip => "SKIP",
            };
            println!(
                "{:width$}  {status:6}  {:>14}  {:>14}  {}",
                r.check,
                fmt_value(r.measured),
                fmt_value(r.bound),
                r.note
            );
        }
    }
    Ok(if rows.iter().all(LemmaRow::passed) {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

#[derive(Serialize)]
struct EvalOutput {
    v_bar: f64,
    optimal: Option<f64>,
    subopt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    constraints: Option<ConstraintMetrics>,
}

fn load_policy(mdp: &MdpInstance, path: &Path) -> anyhow::Result<Policy> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let value: serde_json::Value = serde_json::from_str(&text).context("policy file is not JSON")?;
    let rows = match value.get("policy") {
        Some(p) => p.clone(),
        None => value,
    };
    let rows: Vec<Vec<f64>> = serde_json::from_value(rows).context("policy must be a list of action distributions")?;
    Ok(Policy::new(mdp, rows)?)
}

fn eval(a: &EvalArgs, json: bool) -> CmdResult {
    let mdp = load_mdp(&a.instance)?;
    let pi = load_policy(&mdp, &a.policy)?;
    let v_bar = evaluate_policy(&mdp, &pi)?.v_bar;
    let optimal = match optimal_oracle(&mdp) {
        Ok(o) => Some(o.v_bar),
        Err(smd_core::Error::OracleTooLarge(_)) => None,
        Err(e) => return Err(e.into()),
    };
    let constraints = match mdp.costs() {
        Some(_) => Some(policy_constraint_metrics(&mdp, &pi)?.1),
        None => None,
    };
    let out = EvalOutput {
        v_bar,
        optimal,
        subopt: optimal.map(|o| o - v_bar),
        constraints,
    };
    if json {
        print_json(&out)?;
    } else {
        println!("v_bar = {v_bar:.9}");
        if let (Some(o), Some(s)) = (out.optimal, out.subopt) {
            println!("optimal = {o:.9}, subopt = {s:.9}");
        }
        if let Some(c) = &out.constraints {
            println!(
                "min_k (D^T mu)_k = {:.6}, stationarity = {:.3e}",
                c.min_Dmu, c.stationarity_l1
            );
        }
    }
    let _ = std::io::stdout().flush();
    Ok(ExitCode::SUCCESS)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numeric_errors_map_to_exit_3() {
        let e: Failure = smd_core::Error::NonFiniteIterate("dual").into();
        assert!(matches!(e, Failure::Numeric(_)));
        let wrapped: Failure = anyhow::Error::from(smd_core::Error::SingularMatrix)
            .context("solving")
            .into();
        assert!(matches!(wrapped, Failure::Numeric(_)));
        let e: Failure = smd_core::Error::Config("bad".into()).into();
        assert!(matches!(e, Failure::Config(_)));
    }

    #[test]
    fn seed_lists_and_ranges() {
        assert_eq!(parse_seeds("0..3").unwrap(), vec![0, 1, 2]);
        assert_eq!(parse_seeds("5, 1,9").unwrap(), vec![5, 1, 9]);
        assert!(parse_seeds("1,1").is_err());
        assert!(parse_seeds("x").is_err());
    }
}
