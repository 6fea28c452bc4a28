//! `vma`: solve, stream, attack and measure virtual machine assignment
//! instances from the shell.
//!
//! Exit codes: 0 success, 1 usage or malformed input, 2 infeasible,
//! 3 search budget exhausted, 4 a demonstrated bound was not met,
//! 5 an online algorithm made an illegal decision.

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use std::fs;
use std::path::{Path, PathBuf};
use vma_core::adversary::{
    adversary_m, adversary_threshold, adversary_two, AdversaryError, AdversaryReport,
};
use vma_core::bounds::{bounds_table, BoundInputs};
use vma_core::exact::{self, ExactError};
use vma_core::experiment::{
    evaluate, run_experiment, to_csv, to_jsonl, AlgorithmError, AlgorithmKind, ExperimentConfig,
};
use vma_core::instance::{
    gen_partition_reduction, gen_three_partition_reduction, gen_uniform, ReductionVariant,
};
use vma_core::offline::SolveError;
use vma_core::online::{
    self, run_stream, OnlineAlgorithm, OnlineError, PowerGreedy, ThresholdAssign, TwoBinBalancer,
};
use vma_core::{Instance, Partition, PowerParams, Resources};

#[derive(Parser)]
#[command(name = "vma", version, about = "Power-minimizing VM assignment toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// The cost model and resource bounds, spelled like the math: power is
/// `mu * load^alpha + b` per active machine.
#[derive(Args)]
struct ModelFlags {
    #[arg(long)]
    alpha: f64,
    #[arg(long)]
    b: f64,
    #[arg(long, default_value_t = 1.0)]
    mu: f64,
    /// Per-machine load cap; omit for unbounded.
    #[arg(long)]
    capacity: Option<f64>,
    /// Machine budget; omit for unbounded.
    #[arg(long)]
    machines: Option<usize>,
}

impl ModelFlags {
    fn params(&self) -> Result<PowerParams> {
        Ok(PowerParams::with_mu(self.mu, self.alpha, self.b)?)
    }

    fn resources(&self) -> Resources {
        Resources {
            capacity: self.capacity,
            machines: self.machines,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum OfflineAlg {
    Capacity,
    Optload,
    Balanced,
    Local,
}

#[derive(Clone, Copy, ValueEnum)]
enum OnlineAlg {
    Alg1,
    Alg2,
    Greedy,
}

impl OnlineAlg {
    fn algorithm(&self) -> &'static dyn OnlineAlgorithm {
        match self {
            OnlineAlg::Alg1 => &ThresholdAssign,
            OnlineAlg::Alg2 => &TwoBinBalancer,
            OnlineAlg::Greedy => &PowerGreedy,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Construction {
    /// Small equal loads until a second machine opens.
    Threshold,
    /// Two waves against a machine budget.
    M,
    /// Two coarse loads against exactly two machines.
    Two,
}

#[derive(Clone, Copy, ValueEnum)]
enum Variant {
    Unbounded,
    Capacity,
    Machines,
}

#[derive(Subcommand)]
enum Command {
    /// Optimal assignment by exhaustive search over set partitions.
    Exact {
        /// Instance file (JSON).
        file: PathBuf,
        /// Search node budget before giving up.
        #[arg(long, default_value_t = exact::DEFAULT_NODE_BUDGET)]
        budget: u64,
    },
    /// Offline heuristics with oracle comparison on small instances.
    Solve {
        file: PathBuf,
        #[arg(long, value_enum)]
        algorithm: OfflineAlg,
        /// Skip the oracle ratio row even when the instance is small.
        #[arg(long)]
        no_ratio: bool,
    },
    /// Feed a load stream to an online algorithm, printing the trace.
    Stream {
        /// Stream file: {"loads": [...]}.
        file: PathBuf,
        #[arg(long, value_enum)]
        algorithm: OnlineAlg,
        #[command(flatten)]
        model: ModelFlags,
    },
    /// Run an adversarial construction against an online algorithm.
    Adversary {
        #[arg(long, value_enum)]
        construction: Construction,
        #[arg(long, value_enum)]
        algorithm: OnlineAlg,
        #[command(flatten)]
        model: ModelFlags,
        /// Load granularity for the threshold construction.
        #[arg(long, default_value_t = 0.01)]
        eps: f64,
        /// First-wave scale for the machine-budget construction.
        #[arg(long, default_value_t = 2.0)]
        beta: f64,
    },
    /// Print every applicable closed-form bound, as text and CSV.
    Bounds {
        #[command(flatten)]
        model: ModelFlags,
        /// Fewest bins (size x*, or the capacity when it is tighter).
        #[arg(long)]
        m_bar: Option<usize>,
        /// Machines used by an optimal assignment.
        #[arg(long)]
        m_star: Option<usize>,
        #[arg(long)]
        total_load: Option<f64>,
        /// Total load of the VMs strictly below x*.
        #[arg(long)]
        small_load: Option<f64>,
        /// Packing overshoot fraction; defaults to first fit decreasing's 2/9.
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        beta: Option<f64>,
    },
    /// Write an instance file from one of the generators.
    Gen {
        /// n lo hi: n loads uniform on [lo, hi].
        #[arg(long, num_args = 3, value_names = ["N", "LO", "HI"])]
        uniform: Option<Vec<String>>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Element sizes for the half-sum split construction.
        #[arg(long, num_args = 1.., value_name = "SIZE")]
        partition_reduction: Option<Vec<f64>>,
        /// 3k integer sizes for the triple-grouping construction.
        #[arg(long, num_args = 3.., value_name = "SIZE")]
        three_partition_reduction: Option<Vec<u64>>,
        /// Group target B for the triple-grouping construction.
        #[arg(long)]
        target_sum: Option<u64>,
        #[arg(long, value_enum, default_value_t = Variant::Unbounded)]
        variant: Variant,
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        b: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        mu: f64,
        #[arg(long)]
        capacity: Option<f64>,
        #[arg(long)]
        machines: Option<usize>,
        /// Output file; stdout when omitted.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Batch runs over seeded instances with oracle ratios and bounds.
    Experiment {
        #[command(flatten)]
        model: ModelFlags,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Instance sizes cycle through 1..=n-max.
        #[arg(long, default_value_t = 8)]
        n_max: usize,
        #[arg(long, default_value_t = 0.05)]
        lo: f64,
        #[arg(long)]
        hi: Option<f64>,
        /// Comma-separated list; defaults to every algorithm.
        #[arg(long, value_delimiter = ',')]
        algorithms: Option<Vec<String>>,
        #[arg(long, default_value_t = exact::DEFAULT_NODE_BUDGET)]
        budget: u64,
        /// Emit JSON lines instead of CSV.
        #[arg(long)]
        jsonl: bool,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    match run(cli.command) {
        Ok(code) => std::process::exit(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            std::process::exit(exit_code(&err));
        }
    }
}

/// Maps a failure to the documented exit code; anything unrecognized is a
/// usage-class error.
fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<ExactError>() {
            return match e {
                ExactError::Infeasible => 2,
                ExactError::BudgetExceeded { .. } => 3,
            };
        }
        if let Some(e) = cause.downcast_ref::<SolveError>() {
            return solve_code(e);
        }
        if let Some(e) = cause.downcast_ref::<OnlineError>() {
            return online_code(e);
        }
        if let Some(e) = cause.downcast_ref::<AlgorithmError>() {
            return match e {
                AlgorithmError::Offline(inner) => solve_code(inner),
                AlgorithmError::Online(inner) => online_code(inner),
            };
        }
        if let Some(e) = cause.downcast_ref::<AdversaryError>() {
            return match e {
                AdversaryError::Online(inner) => online_code(inner),
                _ => 1,
            };
        }
    }
    1
}

fn solve_code(e: &SolveError) -> i32 {
    match e {
        SolveError::WrongRegime(_) => 1,
        SolveError::Infeasible
        | SolveError::MachinesExceeded { .. }
        | SolveError::OversizedItem { .. } => 2,
    }
}

fn online_code(e: &OnlineError) -> i32 {
    match e {
        OnlineError::BadLoad { .. } | OnlineError::Unsupported(_) => 1,
        OnlineError::Stuck { .. } | OnlineError::OversizedLoad { .. } => 2,
        OnlineError::IllegalDecision { .. } => 5,
    }
}

fn run(command: Command) -> Result<i32> {
    match command {
        Command::Exact { file, budget } => cmd_exact(&file, budget),
        Command::Solve {
            file,
            algorithm,
            no_ratio,
        } => cmd_solve(&file, algorithm, no_ratio),
        Command::Stream {
            file,
            algorithm,
            model,
        } => cmd_stream(&file, algorithm, &model),
        Command::Adversary {
            construction,
            algorithm,
            model,
            eps,
            beta,
        } => cmd_adversary(construction, algorithm, &model, eps, beta),
        Command::Bounds {
            model,
            m_bar,
            m_star,
            total_load,
            small_load,
            eps,
            beta,
        } => cmd_bounds(
            &model,
            BoundInputs {
                m_bar,
                m_star,
                total_load,
                small_load,
                eps,
                beta,
            },
        ),
        Command::Gen {
            uniform,
            seed,
            partition_reduction,
            three_partition_reduction,
            target_sum,
            variant,
            alpha,
            b,
            mu,
            capacity,
            machines,
            output,
        } => cmd_gen(GenArgs {
            uniform,
            seed,
            partition_reduction,
            three_partition_reduction,
            target_sum,
            variant,
            alpha,
            b,
            mu,
            capacity,
            machines,
            output,
        }),
        Command::Experiment {
            model,
            trials,
            seed,
            n_max,
            lo,
            hi,
            algorithms,
            budget,
            jsonl,
            output,
        } => cmd_experiment(
            &model, trials, seed, n_max, lo, hi, algorithms, budget, jsonl, output,
        ),
    }
}

fn load_instance(path: &Path) -> Result<Instance> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading instance file {}", path.display()))?;
    Ok(Instance::parse(&text)?)
}

fn partition_json(partition: &Partition, power: f64) -> serde_json::Value {
    let mut value = serde_json::to_value(partition).expect("partition serializes");
    value["power"] = power.into();
    value
}

fn cmd_exact(file: &Path, budget: u64) -> Result<i32> {
    let instance = load_instance(file)?;
    let solution = exact::solve_with_budget(&instance, budget)?;
    let mut value = partition_json(&solution.partition, solution.power);
    value["nodes"] = solution.nodes.into();
    println!("{value}");
    Ok(0)
}

/// Instances small enough that the oracle in a ratio row is effortless.
const ORACLE_SIZE: usize = 12;

fn cmd_solve(file: &Path, algorithm: OfflineAlg, no_ratio: bool) -> Result<i32> {
    let instance = load_instance(file)?;
    let kind = match algorithm {
        OfflineAlg::Capacity => AlgorithmKind::Capacity,
        OfflineAlg::Optload => AlgorithmKind::OptLoad,
        OfflineAlg::Balanced => AlgorithmKind::Balanced,
        OfflineAlg::Local => AlgorithmKind::Local,
    };
    let partition = vma_core::experiment::run_algorithm(kind, &instance)?;
    println!("{}", partition_json(&partition, partition.power(&instance)));
    if !no_ratio && instance.n() <= ORACLE_SIZE {
        let opt = exact::solve(&instance);
        let row = evaluate(kind, &instance, &opt);
        println!("{}", serde_json::to_string(&row)?);
    }
    Ok(0)
}

fn cmd_stream(file: &Path, algorithm: OnlineAlg, model: &ModelFlags) -> Result<i32> {
    let text = fs::read_to_string(file)
        .with_context(|| format!("reading stream file {}", file.display()))?;
    let loads = online::parse_stream(&text)?;
    let run = run_stream(
        &loads,
        model.params()?,
        model.resources(),
        algorithm.algorithm(),
    )?;
    for step in &run.trace {
        println!("{}", serde_json::to_string(step)?);
    }
    let summary = partition_json(&run.partition, run.power);
    println!("{summary}");
    Ok(0)
}

fn cmd_adversary(
    construction: Construction,
    algorithm: OnlineAlg,
    model: &ModelFlags,
    eps: f64,
    beta: f64,
) -> Result<i32> {
    let params = model.params()?;
    let alg = algorithm.algorithm();
    let report: AdversaryReport = match construction {
        Construction::Threshold => {
            if model.machines.is_some() {
                bail!("the threshold construction runs without a machine budget");
            }
            adversary_threshold(params, model.capacity, eps, alg)?
        }
        Construction::M => {
            if model.capacity.is_some() {
                bail!("the machine-budget construction runs without a capacity");
            }
            let m = model
                .machines
                .ok_or_else(|| anyhow!("--machines is required for the m construction"))?;
            adversary_m(params, m, beta, alg)?
        }
        Construction::Two => {
            if model.capacity.is_some() {
                bail!("the two-machine construction runs without a capacity");
            }
            if model.machines.is_some_and(|m| m != 2) {
                bail!("the two-machine construction fixes --machines at 2");
            }
            adversary_two(params, alg)?
        }
    };
    println!("{}", serde_json::to_string_pretty(&report)?);
    if report.bound_met {
        Ok(0)
    } else {
        eprintln!(
            "bound not met: demonstrated ratio {} fell short of {} ({})",
            report.ratio, report.bound_value, report.bound_name
        );
        Ok(4)
    }
}

fn cmd_bounds(model: &ModelFlags, inputs: BoundInputs) -> Result<i32> {
    let params = model.params()?;
    let table = bounds_table(&params, model.capacity, &inputs);
    let name_width = table.iter().map(|e| e.name.len()).max().unwrap_or(4);
    let kind_width = table
        .iter()
        .map(|e| e.kind.as_str().len())
        .max()
        .unwrap_or(4);
    for entry in &table {
        let note = entry
            .note
            .as_deref()
            .map(|n| format!("  ({n})"))
            .unwrap_or_default();
        println!(
            "{:name_width$}  {:kind_width$}  {:<12}  {}{note}",
            entry.name,
            entry.kind.as_str(),
            format!("{:.9}", entry.value),
            entry.regime,
        );
    }
    println!();
    println!("name,kind,value,regime,note");
    for entry in &table {
        println!(
            "{},{},{},{},{}",
            entry.name,
            entry.kind.as_str(),
            entry.value,
            csv_field(&entry.regime),
            csv_field(entry.note.as_deref().unwrap_or_default())
        );
    }
    Ok(0)
}

/// Quotes a CSV field when its text demands it.
fn csv_field(text: &str) -> String {
    if text.contains([',', '"', '\n']) {
        format!("\"{}\"", text.replace('"', "\"\""))
    } else {
        text.to_string()
    }
}

struct GenArgs {
    uniform: Option<Vec<String>>,
    seed: u64,
    partition_reduction: Option<Vec<f64>>,
    three_partition_reduction: Option<Vec<u64>>,
    target_sum: Option<u64>,
    variant: Variant,
    alpha: f64,
    b: Option<f64>,
    mu: f64,
    capacity: Option<f64>,
    machines: Option<usize>,
    output: Option<PathBuf>,
}

fn cmd_gen(args: GenArgs) -> Result<i32> {
    let chosen = [
        args.uniform.is_some(),
        args.partition_reduction.is_some(),
        args.three_partition_reduction.is_some(),
    ]
    .iter()
    .filter(|&&x| x)
    .count();
    if chosen != 1 {
        bail!(
            "choose exactly one generator: --uniform, --partition-reduction \
             or --three-partition-reduction"
        );
    }

    let instance = if let Some(raw) = args.uniform {
        let n: usize = raw[0].parse().context("--uniform N must be an integer")?;
        let lo: f64 = raw[1].parse().context("--uniform LO must be a number")?;
        let hi: f64 = raw[2].parse().context("--uniform HI must be a number")?;
        let b = args
            .b
            .ok_or_else(|| anyhow!("--b is required for the uniform generator"))?;
        let params = PowerParams::with_mu(args.mu, args.alpha, b)?;
        let resources = Resources {
            capacity: args.capacity,
            machines: args.machines,
        };
        gen_uniform(n, lo, hi, args.seed, params, resources)?
    } else if let Some(sizes) = args.partition_reduction {
        // b and the capacity are determined by the construction.
        if args.b.is_some() || args.capacity.is_some() {
            bail!("the half-sum construction derives --b and --capacity from the sizes");
        }
        gen_partition_reduction(&sizes, args.alpha)?
    } else {
        let sizes = args.three_partition_reduction.unwrap();
        if args.b.is_some() || args.capacity.is_some() || args.machines.is_some() {
            bail!("the triple-grouping construction derives its bounds from the sizes");
        }
        let target = args
            .target_sum
            .ok_or_else(|| anyhow!("--target-sum is required with --three-partition-reduction"))?;
        let variant = match args.variant {
            Variant::Unbounded => ReductionVariant::Unbounded,
            Variant::Capacity => ReductionVariant::CapacityBounded,
            Variant::Machines => ReductionVariant::MachineBounded,
        };
        let built = gen_three_partition_reduction(&sizes, target, args.alpha, variant)?;
        for warning in &built.warnings {
            eprintln!("warning: {warning}");
        }
        built.instance
    };

    let text = instance.to_json();
    match args.output {
        Some(path) => fs::write(&path, text + "\n")
            .with_context(|| format!("writing {}", path.display()))?,
        None => println!("{text}"),
    }
    Ok(0)
}

#[allow(clippy::too_many_arguments)]
fn cmd_experiment(
    model: &ModelFlags,
    trials: usize,
    seed: u64,
    n_max: usize,
    lo: f64,
    hi: Option<f64>,
    algorithms: Option<Vec<String>>,
    budget: u64,
    jsonl: bool,
    output: Option<PathBuf>,
) -> Result<i32> {
    let params = model.params()?;
    let algorithms = match algorithms {
        Some(names) => names
            .iter()
            .map(|s| s.trim().parse::<AlgorithmKind>())
            .collect::<Result<Vec<_>, _>>()?,
        None => AlgorithmKind::all().to_vec(),
    };
    let hi = hi.unwrap_or_else(|| match model.capacity {
        Some(c) => c,
        None => 2.0 * params.optimal_load(),
    });
    let config = ExperimentConfig {
        trials,
        seed,
        n_max,
        lo,
        hi,
        params,
        resources: model.resources(),
        algorithms,
        node_budget: budget,
    };
    let rows = run_experiment(&config)?;
    let text = if jsonl { to_jsonl(&rows) } else { to_csv(&rows) };
    match output {
        Some(path) => {
            fs::write(&path, &text).with_context(|| format!("writing {}", path.display()))?
        }
        None => print!("{text}"),
    }
    Ok(0)
}
