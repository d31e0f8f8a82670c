//! Experiment harness: rumor placement, per-budget runs of every selector,
//! Monte-Carlo evaluation on shared realizations, CSV and plot-data output.

use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;

use crate::baselines::{greedy_mc_trace, proximity, random_baseline};
use crate::diffusion::{evaluate_f_mc, CascadeSeeds};
use crate::error::{Error, Result};
use crate::graph::{FeatureModel, Graph, NodeId, ProbabilityScheme};
use crate::rng;
use crate::solver::{revised_imm, SolverParams};

/// Seed selection algorithm.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Algorithm {
    RevisedImm,
    Greedy,
    Proximity,
    Random,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [
        Algorithm::RevisedImm,
        Algorithm::Greedy,
        Algorithm::Proximity,
        Algorithm::Random,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::RevisedImm => "revised-imm",
            Algorithm::Greedy => "greedy",
            Algorithm::Proximity => "proximity",
            Algorithm::Random => "random",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "revised-imm" | "imm" => Ok(Algorithm::RevisedImm),
            "greedy" => Ok(Algorithm::Greedy),
            "proximity" => Ok(Algorithm::Proximity),
            "random" => Ok(Algorithm::Random),
            other => Err(Error::Config(format!("unknown algorithm {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SchemeKind {
    Cp,
    Wc,
}

/// Everything that determines an experiment's output.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub dataset: PathBuf,
    pub symmetrize: bool,
    pub scheme: SchemeKind,
    pub probs: Vec<f64>,
    pub weights: Vec<f64>,
    pub rumor_size: usize,
    pub rumor_prob: f64,
    pub budgets: Vec<usize>,
    pub algorithms: Vec<Algorithm>,
    pub eps: f64,
    pub ell: f64,
    pub mc_num: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub jobs: usize,
    /// When false, `wall_time_ms` is written as 0 so output is byte-stable.
    pub timings: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dataset: PathBuf::new(),
            symmetrize: false,
            scheme: SchemeKind::Cp,
            probs: vec![0.4, 0.5],
            weights: vec![0.3, 0.7],
            rumor_size: 20,
            rumor_prob: 0.8,
            budgets: (1..=20).collect(),
            algorithms: Algorithm::ALL.to_vec(),
            eps: 0.1,
            ell: 1.0,
            mc_num: 2000,
            seed: 0,
            out: PathBuf::from("results.csv"),
            jobs: 1,
            timings: true,
        }
    }
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| Error::Config(format!("{key}: cannot parse {s:?}"))))
        .collect()
}

fn parse_one<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim().to_ascii_lowercase().as_str() {
        "" | "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected a boolean, got {value:?}"))),
    }
}

/// Budget list: comma-separated integers and inclusive ranges `a-b` or `a..b`.
pub fn parse_budgets(value: &str) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for part in value.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let range = part.split_once("..").or_else(|| part.split_once('-'));
        match range {
            Some((a, b)) => {
                let a: usize = parse_one("budgets", a)?;
                let b: usize = parse_one("budgets", b.trim_start_matches('='))?;
                out.extend(a..=b);
            }
            None => out.push(parse_one("budgets", part)?),
        }
    }
    Ok(out)
}

impl ExperimentConfig {
    /// Set one option by its flag name (without leading dashes).
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key.trim().replace('_', "-").as_str() {
            "dataset" => self.dataset = PathBuf::from(value.trim()),
            "symmetrize" => self.symmetrize = parse_bool(key, value)?,
            "scheme" => {
                self.scheme = match value.trim().to_ascii_lowercase().as_str() {
                    "cp" => SchemeKind::Cp,
                    "wc" => SchemeKind::Wc,
                    _ => return Err(Error::Config(format!("scheme must be cp or wc, got {value:?}"))),
                }
            }
            "probs" => self.probs = parse_list(key, value)?,
            "weights" => self.weights = parse_list(key, value)?,
            "rumor-size" => self.rumor_size = parse_one(key, value)?,
            "rumor-prob" => self.rumor_prob = parse_one(key, value)?,
            "k" | "budgets" => self.budgets = parse_budgets(value)?,
            "algo" | "algorithms" => self.algorithms = parse_list(key, value)?,
            "eps" => self.eps = parse_one(key, value)?,
            "ell" => self.ell = parse_one(key, value)?,
            "mc-num" => self.mc_num = parse_one(key, value)?,
            "seed" => self.seed = parse_one(key, value)?,
            "out" => self.out = PathBuf::from(value.trim()),
            "jobs" => self.jobs = parse_one(key, value)?,
            "timings" => self.timings = parse_bool(key, value)?,
            other => return Err(Error::Config(format!("unknown option {other:?}"))),
        }
        Ok(())
    }

    /// Apply a flat `key = value` file. `#` starts a comment.
    pub fn apply_file_text(&mut self, text: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn feature_model(&self) -> Result<FeatureModel> {
        let scheme = match self.scheme {
            SchemeKind::Cp => ProbabilityScheme::Constant(self.probs.clone()),
            SchemeKind::Wc => ProbabilityScheme::WeightedCascade,
        };
        FeatureModel::new(self.weights.clone(), scheme)
    }

    /// Checks that need no graph.
    pub fn validate(&self) -> Result<()> {
        self.feature_model().map_err(|e| Error::Config(e.to_string()))?;
        if !(0.0..=1.0).contains(&self.rumor_prob) {
            return Err(Error::Config(format!("rumor-prob {} outside [0, 1]", self.rumor_prob)));
        }
        if self.algorithms.is_empty() {
            return Err(Error::Config("no algorithms selected".into()));
        }
        if !(self.eps > 0.0 && self.eps < 1.0) || !(self.ell > 0.0) {
            return Err(Error::Config("eps must lie in (0, 1) and ell be positive".into()));
        }
        if self.mc_num == 0 || self.jobs == 0 {
            return Err(Error::Config("mc-num and jobs must be at least 1".into()));
        }
        Ok(())
    }

    /// Checks against the loaded graph.
    pub fn validate_for(&self, graph: &Graph) -> Result<()> {
        self.validate()?;
        let n = graph.n();
        if self.rumor_size >= n {
            return Err(Error::Config(format!("rumor-size {} must be below n = {n}", self.rumor_size)));
        }
        if let Some(&k) = self.budgets.iter().find(|&&k| k == 0 || k > n - self.rumor_size) {
            return Err(Error::Config(format!(
                "budget {k} outside [1, {}]",
                n - self.rumor_size
            )));
        }
        Ok(())
    }

    /// Short dataset name used in reports.
    pub fn dataset_name(&self) -> String {
        self.dataset
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    }
}

/// The `size` users of largest out-degree, ties to the lowest id.
pub fn select_rumor_seeds(graph: &Graph, size: usize) -> Result<Vec<NodeId>> {
    if size >= graph.n() {
        return Err(Error::Config(format!(
            "rumor seed count {size} must be below n = {}",
            graph.n()
        )));
    }
    let mut users: Vec<NodeId> = (0..graph.n() as NodeId).collect();
    users.sort_by_key(|&u| (std::cmp::Reverse(graph.out_degree(u)), u));
    users.truncate(size);
    Ok(users)
}

/// Per-layer rumor acceptance: each (user, layer) pair independently with
/// probability `prob`. Layers are drawn in order, users in input order.
pub fn partial_activate<R: Rng + ?Sized>(rumor_users: &[NodeId], r: usize, prob: f64, rng: &mut R) -> Vec<Vec<NodeId>> {
    (0..r)
        .map(|_| {
            rumor_users
                .iter()
                .copied()
                .filter(|_| rng.random_bool(prob.clamp(0.0, 1.0)))
                .collect()
        })
        .collect()
}

/// Graph, feature model and rumor placement shared by all cells of a run.
#[derive(Clone, Debug)]
pub struct Instance {
    pub graph: Graph,
    pub fm: FeatureModel,
    pub seeds: CascadeSeeds,
}

impl Instance {
    /// Rumor seeds and their partial activation, fixed once per experiment.
    pub fn prepare(graph: Graph, config: &ExperimentConfig) -> Result<Instance> {
        config.validate_for(&graph)?;
        let fm = config.feature_model()?;
        let rumor = select_rumor_seeds(&graph, config.rumor_size)?;
        let mut rng = rng::stream(rng::derive_label(config.seed, "rumor-activation"), 0);
        let layers = partial_activate(&rumor, fm.r(), config.rumor_prob, &mut rng);
        let seeds = CascadeSeeds::new(graph.n(), rumor, layers, vec![])?;
        Ok(Instance { graph, fm, seeds })
    }

    /// Load (and optionally symmetrize) the dataset, then [`Self::prepare`].
    pub fn load(config: &ExperimentConfig) -> Result<Instance> {
        config.validate()?;
        let graph = load_graph(&config.dataset, config.symmetrize)?;
        Self::prepare(graph, config)
    }
}

/// Read an edge-list file.
pub fn load_graph(path: &Path, symmetrize: bool) -> Result<Graph> {
    let file = File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let (graph, _) = Graph::parse_edge_list(BufReader::new(file)).map_err(|e| match e {
        Error::Parse { line, message } => Error::Parse {
            line,
            message: format!("{}: {message}", path.display()),
        },
        other => other,
    })?;
    Ok(if symmetrize { graph.symmetrized() } else { graph })
}

/// One (algorithm, budget) cell.
#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub dataset: String,
    pub scheme: String,
    pub r: usize,
    pub algorithm: Algorithm,
    pub k: usize,
    /// Monte-Carlo objective of the selected seeds.
    pub f_estimate: f64,
    /// `n * r * W` for sampling-based selectors.
    pub estimator_value: Option<f64>,
    pub relative_error: Option<f64>,
    pub pool_size: Option<usize>,
    pub wall_time_ms: f64,
    pub rng_seed: u64,
    /// Selected seeds as dataset labels; not part of the CSV.
    pub seeds: Vec<u64>,
}

pub const CSV_HEADER: [&str; 11] = [
    "dataset",
    "scheme",
    "r",
    "algorithm",
    "k",
    "f_estimate",
    "estimator_value",
    "relative_error",
    "pool_size",
    "wall_time_ms",
    "rng_seed",
];

struct Cell {
    algorithm: Algorithm,
    k: usize,
    seeds: Vec<NodeId>,
    estimator_value: Option<f64>,
    pool_size: Option<usize>,
    wall_ms: f64,
}

fn run_algorithm(inst: &Instance, config: &ExperimentConfig, algorithm: Algorithm) -> Result<Vec<Cell>> {
    let tag = rng::derive_label(config.seed, algorithm.name());
    let mut cells = Vec::new();
    match algorithm {
        Algorithm::RevisedImm => {
            let params = |k| SolverParams::new(k, config.eps, config.ell);
            for &k in &config.budgets {
                let sol = revised_imm(&inst.graph, &inst.fm, &inst.seeds, &params(k), rng::derive(tag, k as u64))?;
                cells.push(Cell {
                    algorithm,
                    k,
                    seeds: sol.seeds,
                    estimator_value: Some(sol.scaled_estimate),
                    pool_size: Some(sol.pool_size),
                    wall_ms: sol.timings.total().as_secs_f64() * 1e3,
                });
            }
        }
        Algorithm::Greedy => {
            // Greedy is incremental: one run to the largest budget yields
            // every smaller budget as a prefix.
            let Some(&max_k) = config.budgets.iter().max() else {
                return Ok(cells);
            };
            let trace = greedy_mc_trace(&inst.graph, &inst.fm, &inst.seeds, max_k, config.mc_num, tag)?;
            for &k in &config.budgets {
                cells.push(Cell {
                    algorithm,
                    k,
                    seeds: trace.seeds[..k].to_vec(),
                    estimator_value: None,
                    pool_size: None,
                    wall_ms: trace.elapsed[k - 1].as_secs_f64() * 1e3,
                });
            }
        }
        Algorithm::Proximity | Algorithm::Random => {
            for &k in &config.budgets {
                let start = Instant::now();
                let seeds = if algorithm == Algorithm::Proximity {
                    proximity(&inst.graph, &inst.seeds, k)?
                } else {
                    random_baseline(&inst.graph, &inst.seeds, k, &mut rng::stream(tag, k as u64))?
                };
                cells.push(Cell {
                    algorithm,
                    k,
                    seeds,
                    estimator_value: None,
                    pool_size: None,
                    wall_ms: start.elapsed().as_secs_f64() * 1e3,
                });
            }
        }
    }
    Ok(cells)
}

/// Run every configured algorithm on every budget and evaluate the chosen
/// seeds on one shared set of Monte-Carlo realizations. Rows are sorted by
/// (algorithm name, k).
pub fn run_cells(inst: &Instance, config: &ExperimentConfig) -> Result<Vec<ReportRow>> {
    let mut algorithms = config.algorithms.clone();
    algorithms.sort_by_key(|a| a.name());
    algorithms.dedup();

    let run = || -> Result<Vec<Vec<Cell>>> {
        if config.jobs > 1 {
            algorithms.par_iter().map(|&a| run_algorithm(inst, config, a)).collect()
        } else {
            algorithms.iter().map(|&a| run_algorithm(inst, config, a)).collect()
        }
    };
    let per_algo = if config.jobs > 1 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(config.jobs)
            .build()
            .map_err(|e| Error::Config(format!("jobs: {e}")))?
            .install(run)?
    } else {
        run()?
    };

    let eval_seed = rng::derive_label(config.seed, "evaluation");
    let mut rows = Vec::new();
    for cell in per_algo.into_iter().flatten() {
        let positive = inst.seeds.with_positive(cell.seeds.clone())?;
        let f = evaluate_f_mc(&inst.graph, &inst.fm, &positive, config.mc_num, eval_seed)?.mean;
        let relative_error = cell.estimator_value.map(|est| (f - est).abs() / f);
        rows.push(ReportRow {
            dataset: config.dataset_name(),
            scheme: inst.fm.scheme().name().to_string(),
            r: inst.fm.r(),
            algorithm: cell.algorithm,
            k: cell.k,
            f_estimate: f,
            estimator_value: cell.estimator_value,
            relative_error,
            pool_size: cell.pool_size,
            wall_time_ms: if config.timings { cell.wall_ms } else { 0.0 },
            rng_seed: config.seed,
            seeds: cell.seeds.iter().map(|&u| inst.graph.label(u)).collect(),
        });
    }
    rows.sort_by(|a, b| (a.algorithm.name(), a.k).cmp(&(b.algorithm.name(), b.k)));
    Ok(rows)
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Results table in [`CSV_HEADER`] column order.
pub fn write_csv<W: Write>(rows: &[ReportRow], out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for row in rows {
        w.write_record([
            row.dataset.clone(),
            row.scheme.clone(),
            row.r.to_string(),
            row.algorithm.name().to_string(),
            row.k.to_string(),
            row.f_estimate.to_string(),
            opt(row.estimator_value),
            opt(row.relative_error),
            opt(row.pool_size),
            format!("{:.3}", row.wall_time_ms),
            row.rng_seed.to_string(),
        ])?;
    }
    w.flush()
}

/// Long-format plot data: `series,algorithm,k,value` with series `f`,
/// `pool_size` and `relative_error`.
pub fn write_plot_data<W: Write>(rows: &[ReportRow], out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["series", "algorithm", "k", "value"])?;
    type Series = (&'static str, fn(&ReportRow) -> Option<String>);
    let series: [Series; 3] = [
        ("f", |r| Some(r.f_estimate.to_string())),
        ("pool_size", |r| r.pool_size.map(|p| p.to_string())),
        ("relative_error", |r| r.relative_error.map(|e| e.to_string())),
    ];
    for (name, get) in series {
        for row in rows {
            if let Some(v) = get(row) {
                w.write_record([name, row.algorithm.name(), &row.k.to_string(), &v])?;
            }
        }
    }
    w.flush()
}

/// Chosen seeds per cell: `algorithm,k,seeds` with space-separated labels.
pub fn write_seeds<W: Write>(rows: &[ReportRow], out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["algorithm", "k", "seeds"])?;
    for row in rows {
        let seeds = row.seeds.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(" ");
        w.write_record([row.algorithm.name(), &row.k.to_string(), &seeds])?;
    }
    w.flush()
}

/// Sidecar paths next to the main CSV.
pub fn sidecar_paths(out: &Path) -> (PathBuf, PathBuf) {
    (out.with_extension("plot.csv"), out.with_extension("seeds.csv"))
}

fn write_file(path: &Path, f: impl FnOnce(BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    f(BufWriter::new(file)).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Load, run, and write the results CSV plus its plot-data and seeds files.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<ReportRow>> {
    let inst = Instance::load(config)?;
    let rows = run_cells(&inst, config)?;
    let (plot, seeds) = sidecar_paths(&config.out);
    write_file(&config.out, |w| write_csv(&rows, w))?;
    write_file(&plot, |w| write_plot_data(&rows, w))?;
    write_file(&seeds, |w| write_seeds(&rows, w))?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rumor_seeds_by_out_degree() {
        let star = Graph::from_edges(6, &[(0, 1), (0, 2), (0, 3), (0, 4), (0, 5)]).unwrap().0;
        assert_eq!(select_rumor_seeds(&star, 1).unwrap(), vec![0]);
        let ring = Graph::from_edges(5, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 0)]).unwrap().0;
        assert_eq!(select_rumor_seeds(&ring, 3).unwrap(), vec![0, 1, 2]);
        // Out-degrees 5, 4, 4, 1 on nodes 3, 0, 2, 1.
        let mut edges = vec![];
        edges.extend((4..9).map(|v| (3, v)));
        edges.extend((4..8).map(|v| (0, v)));
        edges.extend((5..9).map(|v| (2, v)));
        edges.push((1, 4));
        let g = Graph::from_edges(9, &edges).unwrap().0;
        assert_eq!(select_rumor_seeds(&g, 2).unwrap(), vec![3, 0]);
        assert!(select_rumor_seeds(&g, 9).is_err());
    }

    #[test]
    fn partial_activation_extremes() {
        let users: Vec<NodeId> = (0..20).collect();
        let mut rng = rng::stream(1, 0);
        assert_eq!(partial_activate(&users, 3, 1.0, &mut rng), vec![users.clone(); 3]);
        assert!(partial_activate(&users, 3, 0.0, &mut rng).iter().all(Vec::is_empty));
    }

    #[test]
    fn partial_activation_rate() {
        let users: Vec<NodeId> = (0..20).collect();
        let mut rng = rng::stream(2, 0);
        let reps = 2000;
        let mut total = [0usize; 3];
        for _ in 0..reps {
            for (i, l) in partial_activate(&users, 3, 0.8, &mut rng).iter().enumerate() {
                total[i] += l.len();
            }
        }
        let trials = (reps * 20) as f64;
        let sd = (trials * 0.8 * 0.2).sqrt();
        for t in total {
            assert!((t as f64 - trials * 0.8).abs() <= 3.0 * sd);
        }
    }

    #[test]
    fn config_parsing_and_precedence() {
        let mut c = ExperimentConfig::default();
        c.apply_file_text("# comment\nscheme = wc\nbudgets = 1-3, 7\nalgo = revised-imm,random\nmc_num=10\n")
            .unwrap();
        c.set("budgets", "2..4").unwrap();
        assert_eq!(c.scheme, SchemeKind::Wc);
        assert_eq!(c.budgets, vec![2, 3, 4]);
        assert_eq!(c.algorithms, vec![Algorithm::RevisedImm, Algorithm::Random]);
        assert_eq!(c.mc_num, 10);
        assert!(c.set("bogus", "1").is_err());
        assert!(c.set("eps", "abc").is_err());
        assert!(c.apply_file_text("no equals sign").is_err());
        assert_eq!(parse_budgets("").unwrap(), Vec::<usize>::new());
    }

    #[test]
    fn config_validation() {
        let g = Graph::from_edges(5, &[(0, 1)]).unwrap().0;
        let mut c = ExperimentConfig {
            rumor_size: 2,
            budgets: vec![1, 3],
            ..Default::default()
        };
        assert!(c.validate_for(&g).is_ok());
        c.budgets = vec![4];
        assert!(c.validate_for(&g).is_err());
        c.budgets = vec![1];
        c.weights = vec![0.5, 0.6];
        assert!(matches!(c.validate_for(&g), Err(Error::Config(_))));
        c.weights = vec![0.3, 0.7];
        c.rumor_size = 5;
        assert!(c.validate_for(&g).is_err());
    }
}
