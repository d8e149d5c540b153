use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, ensure, Context, Result};
use clap::ValueEnum;
use mtsf::dense::hermitian_eigen;
use mtsf::synthetic::{add_noise, gen_bandlimited};
use mtsf::{sync_error, Complex64, ComplexSignal, ConnectionGraph, SmoothingProblem, SparseHermitianOperator};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::io;
use crate::methods::{smooth_once, synchronize, timed, SmoothMethod, SyncMethod, SyncOutcome, SyncRun};
use crate::model::ModelSpec;

pub const M_LADDER: [usize; 10] = [1, 2, 3, 5, 8, 13, 22, 36, 60, 100];
const Q_GRID_POINTS: usize = 60;
const Q_GRID: (f64, f64) = (1e-3, 30.0);

#[derive(clap::Args)]
pub struct Args {
    /// JSON benchmark description.
    config: PathBuf,
    /// Where to write the CSV table (stdout by default).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    #[default]
    Smooth,
    Sync,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorKind {
    /// Distance to the exact smoothing solution.
    #[default]
    Approximation,
    /// Distance to the clean signal.
    Reconstruction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QRule {
    /// Minimizes the reconstruction error of the exact solution on a grid.
    Optimal,
    /// 0.01 times the mean degree.
    Degree,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum QChoice {
    Value(f64),
    Rule(QRule),
}

fn one() -> usize {
    1
}

fn default_snr() -> f64 {
    2.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    #[serde(default)]
    pub task: Task,
    /// Random graph drawn afresh for every trial.
    pub instance: Option<ModelSpec>,
    /// Fixed graph file, as an alternative to `instance`.
    pub graph: Option<PathBuf>,
    /// Ground-truth angles for `graph`, needed for synchronization.
    pub omega: Option<PathBuf>,
    pub arms: Vec<String>,
    /// Forest counts or CG iterations.
    pub m: Option<Vec<usize>>,
    /// Power iterations at which synchronization is measured.
    pub k: Option<Vec<usize>>,
    #[serde(default = "one")]
    pub trials: usize,
    #[serde(default = "one")]
    pub workers: usize,
    #[serde(default)]
    pub seed: u64,
    pub q: Option<QChoice>,
    pub bandlimit: Option<usize>,
    #[serde(default = "default_snr")]
    pub snr: f64,
    #[serde(default)]
    pub error: ErrorKind,
    /// Importance sampling. By default it is used exactly when the
    /// generated connection is not guaranteed weakly inconsistent.
    pub importance: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Arm {
    Smooth(SmoothMethod),
    Sync(SyncMethod),
}

impl Arm {
    fn name(self) -> String {
        let value = match self {
            Arm::Smooth(m) => m.to_possible_value(),
            Arm::Sync(m) => m.to_possible_value(),
        };
        value.expect("no skipped variants").get_name().to_string()
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Row {
    pub arm: String,
    pub m: Option<usize>,
    pub k: Option<usize>,
    pub trials: usize,
    pub mean_wall_ms: f64,
    pub mean_error: f64,
    pub std_error: f64,
}

struct Measurement {
    arm: Arm,
    m: Option<usize>,
    k: Option<usize>,
    wall_ms: f64,
    error: f64,
}

enum Source {
    Model(ModelSpec),
    File {
        graph: ConnectionGraph,
        omega: Option<Vec<f64>>,
    },
}

struct Trial {
    graph: ConnectionGraph,
    truth: Option<ComplexSignal>,
    weakly_inconsistent: Option<bool>,
    bandlimit: usize,
}

struct Plan {
    config: BenchConfig,
    arms: Vec<Arm>,
    m: Vec<usize>,
    k: Vec<usize>,
    source: Source,
}

impl BenchConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let config: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            anyhow::anyhow!("config field `{path}`: {}", e.into_inner())
        })?;
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<()> {
        ensure!(
            self.instance.is_some() != self.graph.is_some(),
            "config field `instance`: exactly one of `instance` and `graph` must be given"
        );
        ensure!(!self.arms.is_empty(), "config field `arms`: need at least one arm");
        ensure!(self.trials > 0, "config field `trials`: must be at least 1");
        ensure!(self.workers > 0, "config field `workers`: must be at least 1");
        ensure!(self.snr > 0.0, "config field `snr`: must be positive");
        for (field, ladder) in [("m", &self.m), ("k", &self.k)] {
            if let Some(values) = ladder {
                ensure!(!values.is_empty(), "config field `{field}`: ladder is empty");
                ensure!(
                    values.iter().all(|&x| x > 0),
                    "config field `{field}`: entries must be positive"
                );
            }
        }
        if let Some(QChoice::Value(q)) = self.q {
            ensure!(q > 0.0, "config field `q`: must be positive");
        }
        if self.task == Task::Sync && self.graph.is_some() {
            ensure!(
                self.omega.is_some(),
                "config field `omega`: required to score synchronization on a graph file"
            );
        }
        Ok(())
    }

    fn arms(&self) -> Result<Vec<Arm>> {
        self.arms
            .iter()
            .enumerate()
            .map(|(i, name)| {
                let arm = match self.task {
                    Task::Smooth => SmoothMethod::from_str(name, false).map(Arm::Smooth),
                    Task::Sync => SyncMethod::from_str(name, false).map(Arm::Sync),
                };
                arm.map_err(|_| anyhow::anyhow!("config field `arms[{i}]`: unknown arm `{name}` for this task"))
            })
            .collect()
    }
}

impl Plan {
    fn new(config: BenchConfig, base: &Path) -> Result<Self> {
        let arms = config.arms()?;
        let m = config.m.clone().unwrap_or_else(|| match config.task {
            Task::Smooth => M_LADDER.to_vec(),
            Task::Sync => vec![3],
        });
        let k = config.k.clone().unwrap_or_else(|| M_LADDER.to_vec());
        let source = match (&config.instance, &config.graph) {
            (Some(spec), _) => Source::Model(spec.clone()),
            (None, Some(path)) => Source::File {
                graph: io::read_graph(&base.join(path))?,
                omega: config
                    .omega
                    .as_ref()
                    .map(|p| io::read_omega(&base.join(p)))
                    .transpose()?,
            },
            (None, None) => unreachable!("validated"),
        };
        Ok(Self {
            config,
            arms,
            m,
            k,
            source,
        })
    }

    fn trial(&self, rng: &mut ChaCha8Rng) -> Result<Trial> {
        match &self.source {
            Source::Model(spec) => {
                let (_, connection) = spec.instance(rng)?;
                Ok(Trial {
                    truth: Some(connection.truth()),
                    weakly_inconsistent: Some(connection.weakly_inconsistent),
                    bandlimit: self.config.bandlimit.unwrap_or(spec.default_bandlimit()),
                    graph: connection.graph,
                })
            }
            Source::File { graph, omega } => {
                let truth = match omega {
                    Some(w) => {
                        ensure!(
                            w.len() == graph.n_nodes(),
                            "omega has {} entries for {} nodes",
                            w.len(),
                            graph.n_nodes()
                        );
                        Some(ComplexSignal::from_phases(w))
                    }
                    None => None,
                };
                Ok(Trial {
                    graph: graph.clone(),
                    truth,
                    weakly_inconsistent: None,
                    bandlimit: self.config.bandlimit.unwrap_or(5),
                })
            }
        }
    }

    fn importance(&self, trial: &Trial) -> bool {
        self.config
            .importance
            .unwrap_or_else(|| trial.weakly_inconsistent.is_some_and(|weak| !weak))
    }

    fn run_trial(&self, t: usize) -> Result<Vec<Measurement>> {
        let seed = self.config.seed.wrapping_add(t as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let trial = self.trial(&mut rng)?;
        match self.config.task {
            Task::Smooth => self.smooth_trial(&trial, seed, &mut rng),
            Task::Sync => self.sync_trial(&trial, seed),
        }
    }

    fn smooth_trial(&self, trial: &Trial, seed: u64, rng: &mut ChaCha8Rng) -> Result<Vec<Measurement>> {
        let graph = &trial.graph;
        let n = graph.n_nodes();
        let clean = gen_bandlimited(graph, trial.bandlimit, rng)?;
        let g = add_noise(&clean, self.config.snr, rng)?;
        let q = match self.config.q.unwrap_or(QChoice::Rule(QRule::Optimal)) {
            QChoice::Value(q) => q,
            QChoice::Rule(QRule::Degree) => 0.01 * graph.mean_degree(),
            QChoice::Rule(QRule::Optimal) => optimal_q(graph, &g, &clean),
        };
        let problem = SmoothingProblem::uniform(graph, q)?;
        let reference = match self.config.error {
            ErrorKind::Approximation => mtsf::solve_exact(&problem, &g)?,
            ErrorKind::Reconstruction => clean,
        };
        let importance = self.importance(trial);
        let mut out = Vec::new();
        for &arm in &self.arms {
            let Arm::Smooth(method) = arm else { unreachable!() };
            let ladder: Vec<Option<usize>> = if method.uses_m() {
                self.m.iter().copied().map(Some).collect()
            } else {
                vec![None]
            };
            for m in ladder {
                let (f, wall) = timed(|| smooth_once(&problem, &g, method, m.unwrap_or(1), seed, importance))?;
                out.push(Measurement {
                    arm,
                    m,
                    k: None,
                    wall_ms: wall.as_secs_f64() * 1e3,
                    error: f.distance(&reference) / n as f64,
                });
            }
        }
        Ok(out)
    }

    fn sync_trial(&self, trial: &Trial, seed: u64) -> Result<Vec<Measurement>> {
        let graph = &trial.graph;
        let truth = trial
            .truth
            .as_ref()
            .context("synchronization needs ground-truth angles")?;
        let q = match self.config.q.unwrap_or(QChoice::Rule(QRule::Degree)) {
            QChoice::Value(q) => q,
            QChoice::Rule(QRule::Degree) => 0.01 * graph.mean_degree(),
            QChoice::Rule(QRule::Optimal) => bail!("config field `q`: `optimal` only applies to smoothing"),
        };
        let problem = SmoothingProblem::uniform(graph, q)?;
        let k_max = *self.k.iter().max().expect("validated nonempty");
        let mut out = Vec::new();
        for &arm in &self.arms {
            let Arm::Sync(method) = arm else { unreachable!() };
            let ladder: Vec<Option<usize>> = if method.uses_m() {
                self.m.iter().copied().map(Some).collect()
            } else {
                vec![None]
            };
            for m in ladder {
                let run = SyncRun {
                    method,
                    m: m.unwrap_or(1),
                    k: k_max,
                    seed,
                    importance: self.importance(trial),
                    componentwise: false,
                    reuse: false,
                };
                let (outcome, wall) = timed(|| synchronize(&problem, &run, Some(truth)))?;
                match outcome {
                    SyncOutcome::Iterated(result) => {
                        for &k in &self.k {
                            let step = &result.history[k - 1];
                            out.push(Measurement {
                                arm,
                                m,
                                k: Some(k),
                                wall_ms: step.elapsed.as_secs_f64() * 1e3,
                                error: step.error.expect("truth supplied"),
                            });
                        }
                    }
                    SyncOutcome::Baseline(f, _) => out.push(Measurement {
                        arm,
                        m: None,
                        k: None,
                        wall_ms: wall.as_secs_f64() * 1e3,
                        error: sync_error(&f, truth)?.value,
                    }),
                }
            }
        }
        Ok(out)
    }
}

/// The `q` on a log grid whose exact smoothing of `g` is closest to `clean`.
pub fn optimal_q(graph: &ConnectionGraph, g: &ComplexSignal, clean: &ComplexSignal) -> f64 {
    let (lambda, u) = hermitian_eigen(&SparseHermitianOperator::connection_laplacian(graph).to_dense());
    let n = graph.n_nodes();
    let project = |f: &ComplexSignal| -> Vec<Complex64> {
        (0..n).map(|k| (0..n).map(|i| u[(i, k)].conj() * f[i]).sum()).collect()
    };
    let (gc, xc) = (project(g), project(clean));
    let (lo, hi) = (Q_GRID.0.ln(), Q_GRID.1.ln());
    (0..Q_GRID_POINTS)
        .map(|i| (lo + (hi - lo) * i as f64 / (Q_GRID_POINTS - 1) as f64).exp())
        .map(|q| {
            let err: f64 = (0..n).map(|k| (gc[k] * (q / (lambda[k] + q)) - xc[k]).norm_sqr()).sum();
            (q, err)
        })
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(q, _)| q)
        .expect("grid is nonempty")
}

fn summarize(trials: Vec<Vec<Measurement>>) -> Vec<Row> {
    let count = trials.len();
    (0..trials[0].len())
        .map(|i| {
            let first = &trials[0][i];
            let walls: Vec<f64> = trials.iter().map(|t| t[i].wall_ms).collect();
            let errors: Vec<f64> = trials.iter().map(|t| t[i].error).collect();
            let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
            let mean_error = mean(&errors);
            let std_error = if count > 1 {
                (errors.iter().map(|e| (e - mean_error).powi(2)).sum::<f64>() / (count - 1) as f64).sqrt()
            } else {
                0.0
            };
            Row {
                arm: first.arm.name(),
                m: first.m,
                k: first.k,
                trials: count,
                mean_wall_ms: mean(&walls),
                mean_error,
                std_error,
            }
        })
        .collect()
}

pub fn run_config(config: BenchConfig, base: &Path) -> Result<Vec<Row>> {
    let workers = config.workers;
    let trials = config.trials;
    let plan = Plan::new(config, base)?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build()?;
    let results: Vec<Vec<Measurement>> = pool.install(|| {
        (0..trials)
            .into_par_iter()
            .map(|t| plan.run_trial(t))
            .collect::<Result<_>>()
    })?;
    Ok(summarize(results))
}

pub fn run(args: Args) -> Result<()> {
    let text = fs::read_to_string(&args.config).with_context(|| format!("reading {}", args.config.display()))?;
    let config = BenchConfig::parse(&text)?;
    let base = args.config.parent().unwrap_or(Path::new("."));
    let start = Instant::now();
    let rows = run_config(config, base)?;
    let mut writer = csv::Writer::from_writer(Vec::new());
    for row in &rows {
        writer.serialize(row)?;
    }
    let table = String::from_utf8(writer.into_inner()?)?;
    match &args.out {
        Some(path) => io::write(path, &table)?,
        None => print!("{table}"),
    }
    eprintln!("{} rows in {:.1} s", rows.len(), start.elapsed().as_secs_f64());
    Ok(())
}
