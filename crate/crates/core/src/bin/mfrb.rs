use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use mfrb_core::baselines::{greedy_mc, proximity, random_baseline};
use mfrb_core::experiment::{self, Algorithm, ExperimentConfig, Instance};
use mfrb_core::{evaluate_f_exact, evaluate_f_mc, rng, revised_imm, Error, NodeId, Result, SolverParams};

#[derive(Parser)]
#[command(name = "mfrb", version, about = "Multi-feature rumor blocking")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Select protector seeds for one budget.
    Solve {
        #[command(flatten)]
        common: Common,
        /// Budget.
        #[arg(long)]
        k: Option<usize>,
        /// Algorithm: revised-imm, greedy, proximity or random.
        #[arg(long, default_value = "revised-imm")]
        algo: String,
    },
    /// Run every algorithm over a range of budgets and write CSV output.
    Experiment {
        #[command(flatten)]
        common: Common,
        /// Budgets, e.g. `1-20` or `5,10,20`.
        #[arg(long, visible_alias = "k")]
        budgets: Option<String>,
        /// Comma-separated algorithms.
        #[arg(long)]
        algo: Option<String>,
        /// Results CSV; `.plot.csv` and `.seeds.csv` files are written beside it.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads for independent algorithms.
        #[arg(long)]
        jobs: Option<usize>,
        /// Write 0 for wall_time_ms so reruns are byte-identical.
        #[arg(long)]
        no_timings: bool,
    },
    /// Evaluate the objective for a given protector set.
    Oracle {
        #[command(flatten)]
        common: Common,
        /// Comma-separated protector labels as they appear in the dataset.
        #[arg(long, default_value = "")]
        positive: String,
        /// Exact enumeration instead of Monte-Carlo (tiny instances only).
        #[arg(long)]
        exact: bool,
    },
}

#[derive(Args)]
struct Common {
    /// Flat `key = value` config file; command-line flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Edge-list file.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Add the reverse of every edge.
    #[arg(long)]
    symmetrize: bool,
    /// Edge probability scheme: cp or wc.
    #[arg(long)]
    scheme: Option<String>,
    /// Per-feature constant probabilities, e.g. `0.4,0.5`.
    #[arg(long)]
    probs: Option<String>,
    /// Per-feature weights summing to 1.
    #[arg(long)]
    weights: Option<String>,
    #[arg(long)]
    rumor_size: Option<usize>,
    /// Per-layer rumor acceptance probability.
    #[arg(long)]
    rumor_prob: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    ell: Option<f64>,
    /// Monte-Carlo simulations per evaluation.
    #[arg(long)]
    mc_num: Option<usize>,
    /// Master RNG seed.
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn overrides(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        let mut put = |k, v: Option<String>| {
            if let Some(v) = v {
                out.push((k, v));
            }
        };
        put("dataset", self.dataset.as_ref().map(|p| p.display().to_string()));
        put("symmetrize", self.symmetrize.then(|| "true".to_string()));
        put("scheme", self.scheme.clone());
        put("probs", self.probs.clone());
        put("weights", self.weights.clone());
        put("rumor-size", self.rumor_size.map(|v| v.to_string()));
        put("rumor-prob", self.rumor_prob.map(|v| v.to_string()));
        put("eps", self.eps.map(|v| v.to_string()));
        put("ell", self.ell.map(|v| v.to_string()));
        put("mc-num", self.mc_num.map(|v| v.to_string()));
        put("seed", self.seed.map(|v| v.to_string()));
        out
    }

    fn build(&self, extra: Vec<(&'static str, String)>) -> Result<ExperimentConfig> {
        let mut config = ExperimentConfig::default();
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            config.apply_file_text(&text)?;
        }
        for (k, v) in self.overrides().into_iter().chain(extra) {
            config.set(k, &v)?;
        }
        if config.dataset.as_os_str().is_empty() {
            return Err(Error::Config("no dataset given".into()));
        }
        config.validate()?;
        Ok(config)
    }
}

fn labels(inst: &Instance, seeds: &[NodeId]) -> String {
    seeds.iter().map(|&u| inst.graph.label(u).to_string()).collect::<Vec<_>>().join(" ")
}

fn solve(common: &Common, k: Option<usize>, algo: &str) -> Result<()> {
    let algorithm: Algorithm = algo.parse()?;
    let mut extra = vec![];
    if let Some(k) = k {
        extra.push(("k", k.to_string()));
    }
    let config = common.build(extra)?;
    let &[k] = config.budgets.as_slice() else {
        return Err(Error::Config("solve takes exactly one budget (--k)".into()));
    };
    let inst = Instance::load(&config)?;
    let tag = rng::derive_label(config.seed, algorithm.name());
    let start = Instant::now();
    let mut estimate = None;
    let seeds = match algorithm {
        Algorithm::RevisedImm => {
            let sol = revised_imm(&inst.graph, &inst.fm, &inst.seeds, &SolverParams::new(k, config.eps, config.ell), tag)?;
            estimate = Some((sol.scaled_estimate, sol.pool_size));
            sol.seeds
        }
        Algorithm::Greedy => greedy_mc(&inst.graph, &inst.fm, &inst.seeds, k, config.mc_num, tag)?,
        Algorithm::Proximity => proximity(&inst.graph, &inst.seeds, k)?,
        Algorithm::Random => random_baseline(&inst.graph, &inst.seeds, k, &mut rng::stream(tag, k as u64))?,
    };
    let elapsed = start.elapsed();
    let positive = inst.seeds.with_positive(seeds.clone())?;
    let f = evaluate_f_mc(&inst.graph, &inst.fm, &positive, config.mc_num, rng::derive_label(config.seed, "evaluation"))?;
    println!("algorithm: {algorithm}");
    println!("k: {k}");
    println!("seeds: {}", labels(&inst, &seeds));
    println!("f_estimate: {} (std err {})", f.mean, f.std_err);
    if let Some((est, pool)) = estimate {
        println!("estimator_value: {est}");
        println!("pool_size: {pool}");
    }
    println!("wall_time_ms: {:.3}", elapsed.as_secs_f64() * 1e3);
    Ok(())
}

fn run_experiment(
    common: &Common,
    budgets: Option<String>,
    algo: Option<String>,
    out: Option<PathBuf>,
    jobs: Option<usize>,
    no_timings: bool,
) -> Result<()> {
    let mut extra = vec![];
    extra.extend(budgets.map(|v| ("budgets", v)));
    extra.extend(algo.map(|v| ("algo", v)));
    extra.extend(out.map(|v| ("out", v.display().to_string())));
    extra.extend(jobs.map(|v| ("jobs", v.to_string())));
    if no_timings {
        extra.push(("timings", "false".into()));
    }
    let config = common.build(extra)?;
    let rows = experiment::run_experiment(&config)?;
    eprintln!("wrote {} rows to {}", rows.len(), config.out.display());
    Ok(())
}

fn oracle(common: &Common, positive: &str, exact: bool) -> Result<()> {
    let config = common.build(vec![("budgets", String::new())])?;
    let inst = Instance::load(&config)?;
    let mut users = Vec::new();
    for tok in positive.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let label: u64 = tok.parse().map_err(|_| Error::Config(format!("bad label {tok:?}")))?;
        let u = inst
            .graph
            .node_of_label(label)
            .ok_or_else(|| Error::Config(format!("label {label} not in dataset")))?;
        users.push(u);
    }
    users.sort_unstable();
    users.dedup();
    let seeds = inst.seeds.with_positive(users)?;
    if exact {
        println!("f: {}", evaluate_f_exact(&inst.graph, &inst.fm, &seeds)?);
    } else {
        let est = evaluate_f_mc(&inst.graph, &inst.fm, &seeds, config.mc_num, rng::derive_label(config.seed, "evaluation"))?;
        println!("f: {} (std err {}, {} runs)", est.mean, est.std_err, est.runs);
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve { common, k, algo } => solve(&common, k, &algo),
        Command::Experiment {
            common,
            budgets,
            algo,
            out,
            jobs,
            no_timings,
        } => run_experiment(&common, budgets, algo, out, jobs, no_timings),
        Command::Oracle { common, positive, exact } => oracle(&common, &positive, exact),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config_error() { 2 } else { 1 })
        }
    }
}
