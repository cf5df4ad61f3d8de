//! Command-line front end: synthetic data generation, single replications,
//! objective evaluation, optimizer runs and strategy comparisons.
//!
//! Exit codes: 0 on success (or a feasible evaluation), 2 when an evaluated
//! policy misses a service target, 1 on usage, configuration or data errors.

pub mod table;

use std::cell::RefCell;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use echelon_core::config::{Config, STRATEGY_NAMES};
use echelon_core::engine::{simulate, SimOptions};
use echelon_core::io::{read_history, write_history, write_trace};
use echelon_core::model::{DemandChoice, FacilityId, FacilityPolicy, HistoryDataset, PolicyVector, Units};
use echelon_core::objective::{InventoryProblem, ObjectiveReport};
use echelon_core::optim::{minimize_observed, EvalRecord, OptimizerRun};
use echelon_core::sampling::generate_synthetic_history;

use table::{ComparisonTable, StrategyColumn};

#[derive(Debug, Parser)]
#[command(name = "echelon", version, about = "Multi-echelon inventory simulation-optimization")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write synthetic history CSVs from the configured generator parameters.
    GenerateData(GenerateArgs),
    /// Run one replication and write its daily trace.
    Simulate(SimulateArgs),
    /// Evaluate a policy; exits 2 when a service target is missed.
    Evaluate(EvaluateArgs),
    /// Run one optimizer and write its log, best policy and summary.
    Optimize(OptimizeArgs),
    /// Run the strategies on identical data and tabulate the results.
    Compare(CompareArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ScenarioArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the configured history directory.
    #[arg(long)]
    pub history_dir: Option<PathBuf>,
    #[arg(long, value_parser = parse_choice)]
    pub choice: Option<DemandChoice>,
    #[arg(long)]
    pub replications: Option<u32>,
    #[arg(long)]
    pub horizon: Option<u32>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Generator seed; defaults to the configured one.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory; defaults to the configured history directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// Base seed of the simulation streams.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Policy JSON (as written by `optimize`); defaults to the initial guess.
    #[arg(long)]
    pub policy: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub replication: u32,
    /// Output directory for `trace.csv` and `outcome.json`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// Base seed of the simulation streams.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub policy: Option<PathBuf>,
    /// Also write `report.json` here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct BudgetArgs {
    #[arg(long)]
    pub max_evals: Option<usize>,
    #[arg(long)]
    pub max_minutes: Option<f64>,
    /// Optimizer seed (the RBF seed, or the GP seed that random states are
    /// combined with).
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[command(flatten)]
    pub budget: BudgetArgs,
    #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(STRATEGY_NAMES))]
    pub strategy: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub history_dir: Option<PathBuf>,
    /// Repeat for one table per demand choice; defaults to the configured one.
    #[arg(long, value_parser = parse_choice)]
    pub choice: Vec<DemandChoice>,
    #[arg(long)]
    pub replications: Option<u32>,
    #[arg(long)]
    pub horizon: Option<u32>,
    #[command(flatten)]
    pub budget: BudgetArgs,
    /// Restrict the comparison to one strategy.
    #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(STRATEGY_NAMES))]
    pub strategy: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_choice(s: &str) -> Result<DemandChoice, String> {
    s.parse()
}

/// How a successful command ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Success,
    Infeasible,
}

impl Outcome {
    pub fn exit_code(self) -> u8 {
        match self {
            Outcome::Success => 0,
            Outcome::Infeasible => 2,
        }
    }
}

/// Provenance written next to every output.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub config: PathBuf,
    pub history_dir: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed_overrides: Vec<(String, u64)>,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
}

impl RunManifest {
    fn new(subcommand: &str, config: &Path, history_dir: Option<&Path>, out: Option<&Path>) -> Self {
        Self {
            subcommand: subcommand.into(),
            config: config.to_path_buf(),
            history_dir: history_dir.map(Path::to_path_buf),
            out: out.map(Path::to_path_buf),
            seed_overrides: Vec::new(),
            timestamp: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        }
    }

    fn write(&self, dir: &Path) -> Result<()> {
        write_json(&dir.join("manifest.json"), self)
    }
}

pub fn run(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::GenerateData(a) => cmd_generate_data(&a, &mut std::io::stdout()),
        Command::Simulate(a) => cmd_simulate(&a, &mut std::io::stdout()),
        Command::Evaluate(a) => cmd_evaluate(&a, &mut std::io::stdout()),
        Command::Optimize(a) => cmd_optimize(&a, &mut std::io::stdout()),
        Command::Compare(a) => cmd_compare(&a, &mut std::io::stdout()),
    }
}

fn load_config(path: &Path) -> Result<Config> {
    Config::load(path).with_context(|| format!("configuration {}", path.display()))
}

fn resolve_history_dir(config_path: &Path, config: &Config, flag: Option<&Path>) -> Result<PathBuf> {
    if let Some(dir) = flag {
        return Ok(dir.to_path_buf());
    }
    match &config.history_dir {
        Some(dir) => Ok(config_path.parent().unwrap_or(Path::new("")).join(dir)),
        None => bail!("no history directory: pass --history-dir or set history_dir in the configuration"),
    }
}

fn apply_scenario(config: &mut Config, choice: Option<DemandChoice>, replications: Option<u32>, horizon: Option<u32>) -> Result<()> {
    if let Some(c) = choice {
        config.scenario.choice = c;
    }
    if let Some(n) = replications {
        config.scenario.replications = n;
    }
    if let Some(h) = horizon {
        config.scenario.horizon = h;
    }
    config.scenario.validate()?;
    Ok(())
}

fn apply_budget(config: &mut Config, budget: &BudgetArgs, manifest: &mut RunManifest) -> Result<()> {
    if let Some(n) = budget.max_evals {
        if n == 0 {
            bail!("--max-evals must be at least 1");
        }
        config.optimizer.max_evaluations = Some(n);
    }
    if let Some(m) = budget.max_minutes {
        if !(m > 0.0 && m.is_finite()) {
            bail!("--max-minutes must be positive");
        }
        config.optimizer.max_minutes = Some(m);
    }
    if let Some(s) = budget.seed {
        config.optimizer.rbf.seed = s;
        config.optimizer.gp.seed = s;
        manifest.seed_overrides.push(("optimizer".into(), s));
    }
    Ok(())
}

/// Loads the configuration and history and builds the problem; every path is
/// checked before any simulation runs.
fn setup(args: &ScenarioArgs) -> Result<(Config, PathBuf, HistoryDataset)> {
    let mut config = load_config(&args.config)?;
    apply_scenario(&mut config, args.choice, args.replications, args.horizon)?;
    let dir = resolve_history_dir(&args.config, &config, args.history_dir.as_deref())?;
    let history = load_history(&config, &dir)?;
    Ok((config, dir, history))
}

fn load_history(config: &Config, dir: &Path) -> Result<HistoryDataset> {
    let network = config.network()?;
    let history = read_history(dir, &network).context("reading history")?;
    history.validate_for(&network)?;
    Ok(history)
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// One facility's entry in policy JSON files.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyEntry {
    pub facility: FacilityId,
    pub reorder_point: Units,
    pub base_stock: Units,
}

#[derive(Debug, Deserialize)]
struct PolicyFile {
    policy: Vec<PolicyEntry>,
}

fn policy_entries(config: &Config, policy: &PolicyVector) -> Vec<PolicyEntry> {
    config
        .facility
        .iter()
        .zip(policy.entries())
        .map(|(f, p)| PolicyEntry {
            facility: f.id,
            reorder_point: p.reorder_point,
            base_stock: p.base_stock,
        })
        .collect()
}

/// Reads a policy JSON file, or falls back to the configured initial guess.
fn load_policy(config: &Config, path: Option<&Path>) -> Result<PolicyVector> {
    let Some(path) = path else {
        return Ok(config.initial_policy()?);
    };
    let text = std::fs::read_to_string(path).with_context(|| format!("reading policy {}", path.display()))?;
    let file: PolicyFile = serde_json::from_str(&text).with_context(|| format!("parsing policy {}", path.display()))?;
    let mut entries = Vec::with_capacity(config.facility.len());
    for f in &config.facility {
        let e = file
            .policy
            .iter()
            .find(|e| e.facility == f.id)
            .with_context(|| format!("policy {} has no entry for facility {}", path.display(), f.id))?;
        entries.push(FacilityPolicy {
            reorder_point: e.reorder_point,
            base_stock: e.base_stock,
        });
    }
    Ok(PolicyVector::for_network(&config.network()?, entries)?)
}

pub fn cmd_generate_data(args: &GenerateArgs, out: &mut dyn Write) -> Result<Outcome> {
    let config = load_config(&args.config)?;
    let seed = args.seed.unwrap_or(config.generator.seed);
    let dir = match &args.out {
        Some(d) => d.clone(),
        None => resolve_history_dir(&args.config, &config, None)?,
    };
    let history = generate_synthetic_history(&config.generator_params(), seed)?;
    create_dir(&dir)?;
    let files = write_history(&dir, &history)?;
    let mut manifest = RunManifest::new("generate-data", &args.config, None, Some(&dir));
    if args.seed.is_some() {
        manifest.seed_overrides.push(("generator".into(), seed));
    }
    manifest.write(&dir)?;

    writeln!(out, "wrote {} files to {} (seed {seed})", files.len(), dir.display())?;
    writeln!(out, "{:>8}  {:<10} {:>6} {:>9} {:>9} {:>6} {:>6}", "facility", "series", "n", "mean", "std", "min", "max")?;
    for (id, h) in &history.facilities {
        for (name, values) in [("demand", &h.demand), ("lead_delta", &h.lead_delta)] {
            if values.is_empty() {
                continue;
            }
            let (mean, std) = mean_std(values);
            writeln!(
                out,
                "{id:>8}  {name:<10} {:>6} {mean:>9.2} {std:>9.2} {:>6} {:>6}",
                values.len(),
                values.iter().min().unwrap(),
                values.iter().max().unwrap()
            )?;
        }
    }
    Ok(Outcome::Success)
}

fn mean_std(values: &[Units]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().map(|&v| v as f64).sum::<f64>() / n;
    let var = values.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn cmd_simulate(args: &SimulateArgs, out: &mut dyn Write) -> Result<Outcome> {
    let (mut config, dir, history) = setup(&args.scenario)?;
    let mut manifest = RunManifest::new("simulate", &args.scenario.config, Some(&dir), Some(&args.out));
    if let Some(s) = args.seed {
        config.scenario.base_seed = s;
        manifest.seed_overrides.push(("simulation".into(), s));
    }
    let policy = load_policy(&config, args.policy.as_deref())?;
    let network = config.network()?;
    let options = SimOptions {
        record_trace: true,
        record_events: false,
    };
    let outcome = simulate(&network, &policy, &history, &config.scenario, args.replication, options)?;
    create_dir(&args.out)?;
    let trace_path = args.out.join("trace.csv");
    let file = File::create(&trace_path).with_context(|| format!("creating {}", trace_path.display()))?;
    write_trace(file, outcome.trace.as_deref().unwrap_or_default())?;
    let summary = SimulationSummary {
        replication: outcome.replication,
        choice: config.scenario.choice,
        horizon: config.scenario.horizon,
        facilities: &outcome.facilities,
    };
    write_json(&args.out.join("outcome.json"), &summary)?;
    manifest.write(&args.out)?;

    writeln!(out, "replication {} ({}, {} days)", outcome.replication, config.scenario.choice, config.scenario.horizon)?;
    writeln!(out, "{:>8} {:>12} {:>8} {:>10} {:>10}", "facility", "avg_on_hand", "beta", "demand", "shipped")?;
    for f in &outcome.facilities {
        writeln!(
            out,
            "{:>8} {:>12.2} {:>8.4} {:>10} {:>10}",
            f.id, f.avg_on_hand, f.beta, f.total_demand, f.total_shipped
        )?;
    }
    writeln!(out, "trace written to {}", trace_path.display())?;
    Ok(Outcome::Success)
}

#[derive(Serialize)]
struct SimulationSummary<'a> {
    replication: u32,
    choice: DemandChoice,
    horizon: u32,
    facilities: &'a [echelon_core::engine::FacilityOutcome],
}

fn write_report_table(out: &mut dyn Write, report: &ObjectiveReport) -> Result<()> {
    writeln!(out, "Z = {:.4}", report.z)?;
    writeln!(out, "AA/N = {:.4}", report.mean_total_on_hand)?;
    writeln!(out, "mean violation = {:.6}", report.mean_violation)?;
    writeln!(
        out,
        "{:>8} {:>8} {:>10} {:>10} {:>10} {:>12}  status",
        "facility", "target", "mean_beta", "min_beta", "max_beta", "avg_on_hand"
    )?;
    for f in &report.facilities {
        writeln!(
            out,
            "{:>8} {:>8.3} {:>10.4} {:>10.4} {:>10.4} {:>12.2}  {}",
            f.id,
            f.target_beta,
            f.mean_beta,
            f.min_beta,
            f.max_beta,
            f.mean_on_hand,
            if f.meets_target() { "PASS" } else { "FAIL" }
        )?;
    }
    Ok(())
}

pub fn cmd_evaluate(args: &EvaluateArgs, out: &mut dyn Write) -> Result<Outcome> {
    let (mut config, dir, history) = setup(&args.scenario)?;
    let mut manifest = RunManifest::new("evaluate", &args.scenario.config, Some(&dir), args.out.as_deref());
    if let Some(s) = args.seed {
        config.scenario.base_seed = s;
        manifest.seed_overrides.push(("simulation".into(), s));
    }
    let policy = load_policy(&config, args.policy.as_deref())?;
    let problem = config.problem(history)?;
    let report = problem.evaluate(&policy)?;
    writeln!(out, "{}", serde_json::to_string_pretty(&report)?)?;
    write_report_table(out, &report)?;
    if let Some(dir) = &args.out {
        create_dir(dir)?;
        write_json(&dir.join("report.json"), &report)?;
        manifest.write(dir)?;
    }
    Ok(if report.all_targets_met() {
        Outcome::Success
    } else {
        Outcome::Infeasible
    })
}

/// Result of one optimizer run on the inventory problem.
#[derive(Debug, Serialize)]
pub struct OptimizeSummary {
    pub strategy: String,
    pub seed: u64,
    pub choice: DemandChoice,
    pub initial_z: f64,
    pub best_z: f64,
    /// `% reduction from the initial guess`.
    pub reduction_percent: f64,
    pub evaluations: usize,
    pub wall_time_seconds: f64,
    pub cycles_completed: usize,
    pub early_restarts: usize,
    pub all_targets_met: bool,
    pub best_policy: Vec<PolicyEntry>,
}

#[derive(Serialize)]
struct BestPolicyFile<'a> {
    strategy: &'a str,
    seed: u64,
    z: f64,
    policy: &'a [PolicyEntry],
    report: &'a ObjectiveReport,
}

pub fn reduction_percent(initial: f64, best: f64) -> f64 {
    if initial > 0.0 && initial.is_finite() {
        100.0 * (initial - best) / initial
    } else {
        0.0
    }
}

/// Runs one strategy, streaming its log to `log_path`, and returns the
/// summary together with the raw run.
pub fn optimize_problem(
    config: &Config,
    problem: &InventoryProblem,
    strategy_name: &str,
    log_path: &Path,
) -> Result<(OptimizeSummary, OptimizerRun, ObjectiveReport)> {
    let run_spec = config.strategy_run(strategy_name)?;
    let initial_policy = config.initial_policy()?;
    let initial = problem.evaluate(&initial_policy)?;
    let space = config.search_space()?;

    let file = File::create(log_path).with_context(|| format!("creating {}", log_path.display()))?;
    let mut writer = csv::Writer::from_writer(file);
    let mut header = vec!["eval".to_string()];
    for f in &config.facility {
        header.push(format!("r_{}", f.id));
        header.push(format!("b_{}", f.id));
    }
    header.extend(["z".to_string(), "best_so_far".to_string()]);
    writer.write_record(&header)?;
    writer.flush()?;
    let writer = RefCell::new(writer);
    let log_error: RefCell<Option<anyhow::Error>> = RefCell::new(None);
    let observer = |rec: &EvalRecord| {
        if log_error.borrow().is_some() {
            return;
        }
        let mut row = vec![rec.index.to_string()];
        row.extend(rec.point.iter().map(|v| format!("{v}")));
        row.push(format!("{}", rec.value));
        row.push(format!("{}", rec.best_so_far));
        let mut w = writer.borrow_mut();
        let result = w.write_record(&row).map_err(anyhow::Error::from).and_then(|_| Ok(w.flush()?));
        if let Err(e) = result {
            *log_error.borrow_mut() = Some(e);
        }
    };
    let run = minimize_observed(
        |x| problem.objective(x),
        &space,
        &run_spec.budget,
        &run_spec.strategy,
        run_spec.seed,
        observer,
    )?;
    if let Some(e) = log_error.into_inner() {
        return Err(e.context(format!("writing {}", log_path.display())));
    }
    let best_policy = problem.policy_at(&run.best_point)?;
    let best_report = problem.evaluate(&best_policy)?;
    let summary = OptimizeSummary {
        strategy: strategy_name.to_string(),
        seed: run_spec.seed,
        choice: config.scenario.choice,
        initial_z: initial.z,
        best_z: best_report.z,
        reduction_percent: reduction_percent(initial.z, best_report.z),
        evaluations: run.evaluations,
        wall_time_seconds: run.wall_time.as_secs_f64(),
        cycles_completed: run.cycles_completed,
        early_restarts: run.early_restarts,
        all_targets_met: best_report.all_targets_met(),
        best_policy: policy_entries(config, &best_policy),
    };
    Ok((summary, run, best_report))
}

fn write_optimize_artifacts(dir: &Path, stem: &str, summary: &OptimizeSummary, report: &ObjectiveReport) -> Result<()> {
    write_json(
        &dir.join(format!("{stem}best_policy.json")),
        &BestPolicyFile {
            strategy: &summary.strategy,
            seed: summary.seed,
            z: summary.best_z,
            policy: &summary.best_policy,
            report,
        },
    )?;
    write_json(&dir.join(format!("{stem}summary.json")), summary)
}

pub fn cmd_optimize(args: &OptimizeArgs, out: &mut dyn Write) -> Result<Outcome> {
    let (mut config, dir, history) = setup(&args.scenario)?;
    let mut manifest = RunManifest::new("optimize", &args.scenario.config, Some(&dir), Some(&args.out));
    apply_budget(&mut config, &args.budget, &mut manifest)?;
    config.validate()?;
    let problem = config.problem(history)?;
    create_dir(&args.out)?;
    manifest.write(&args.out)?;
    let (summary, _, report) = optimize_problem(&config, &problem, &args.strategy, &args.out.join("run_log.csv"))?;
    write_optimize_artifacts(&args.out, "", &summary, &report)?;

    writeln!(out, "strategy: {} (seed {})", summary.strategy, summary.seed)?;
    writeln!(out, "initial Z: {:.4}", summary.initial_z)?;
    writeln!(out, "best Z: {:.4}", summary.best_z)?;
    writeln!(out, "% reduction from the initial guess: {:.2}%", summary.reduction_percent)?;
    writeln!(out, "evaluations: {}", summary.evaluations)?;
    writeln!(out, "wall time: {:.2} s", summary.wall_time_seconds)?;
    writeln!(out, "all targets met: {}", summary.all_targets_met)?;
    for e in &summary.best_policy {
        writeln!(out, "  facility {}: R = {}, B = {}", e.facility, e.reorder_point, e.base_stock)?;
    }
    Ok(Outcome::Success)
}

fn strategy_label(name: &str) -> &'static str {
    match name {
        "nelder-mead" => "Restart Nelder-Mead",
        "gp" => "GP (LCB)",
        _ => "Cubic RBF",
    }
}

fn choice_title(choice: DemandChoice) -> &'static str {
    match choice {
        DemandChoice::Backorder => "Optimal results and solver comparison: unmet demand back ordered",
        DemandChoice::LostSales => "Optimal results and solver comparison: unmet demand lost",
    }
}

/// Runs the selected strategies for one demand choice and builds the table.
/// Per-strategy artifacts go to `out/<choice>/`.
pub fn compare_choice(config: &Config, history: &HistoryDataset, strategies: &[&str], out: &Path) -> Result<(ComparisonTable, Vec<OptimizeSummary>)> {
    let dir = out.join(config.scenario.choice.as_str());
    create_dir(&dir)?;
    let problem = config.problem(history.clone())?;
    let mut columns = Vec::new();
    let mut summaries = Vec::new();
    for &name in strategies {
        let (summary, run, report) = optimize_problem(config, &problem, name, &dir.join(format!("{name}_run_log.csv")))?;
        write_optimize_artifacts(&dir, &format!("{name}_"), &summary, &report)?;
        columns.push(StrategyColumn {
            label: strategy_label(name).to_string(),
            best_z: summary.best_z,
            reduction_percent: summary.reduction_percent,
            policy: report.policy.clone(),
            evaluations: run.evaluations,
            minutes: minutes(run.wall_time),
        });
        summaries.push(summary);
    }
    let table = ComparisonTable {
        title: choice_title(config.scenario.choice).to_string(),
        facilities: config.facility.iter().map(|f| f.id).collect(),
        columns,
    };
    Ok((table, summaries))
}

fn minutes(d: Duration) -> f64 {
    d.as_secs_f64() / 60.0
}

pub fn cmd_compare(args: &CompareArgs, out: &mut dyn Write) -> Result<Outcome> {
    let mut config = load_config(&args.config)?;
    apply_scenario(&mut config, None, args.replications, args.horizon)?;
    let dir = resolve_history_dir(&args.config, &config, args.history_dir.as_deref())?;
    let mut manifest = RunManifest::new("compare", &args.config, Some(&dir), Some(&args.out));
    apply_budget(&mut config, &args.budget, &mut manifest)?;
    config.validate()?;
    let history = load_history(&config, &dir)?;
    let strategies: Vec<&str> = match &args.strategy {
        Some(s) => vec![s.as_str()],
        None => STRATEGY_NAMES.to_vec(),
    };
    let choices = if args.choice.is_empty() {
        vec![config.scenario.choice]
    } else {
        let mut c = args.choice.clone();
        c.dedup();
        c
    };
    create_dir(&args.out)?;
    manifest.write(&args.out)?;
    for choice in choices {
        let mut cfg = config.clone();
        cfg.scenario.choice = choice;
        let (table, _) = compare_choice(&cfg, &history, &strategies, &args.out)?;
        let stem = format!("compare_{}", choice.as_str());
        let csv_path = args.out.join(format!("{stem}.csv"));
        let file = File::create(&csv_path).with_context(|| format!("creating {}", csv_path.display()))?;
        table.write_csv(file)?;
        let text = table.to_text();
        std::fs::write(args.out.join(format!("{stem}.txt")), &text)?;
        writeln!(out, "{text}")?;
    }
    Ok(Outcome::Success)
}
