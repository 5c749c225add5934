//! Scenario runs: train or load, evaluate, and write report files.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baseline::{clique_benchmark, clique_optimal_policies};
use crate::error::{Error, Result};
use crate::harness::config::ExperimentConfig;
use crate::harness::evaluate::{evaluate_policy, Controller, EvalSettings, Evaluation};
use crate::harness::metrics::{MetricsSummary, WindowMetrics};
use crate::harness::occupancy::{occupancy_trace, write_occupancy_csv, Allocation};
use crate::nn::{checkpoint, NetworkParams};
use crate::trainer::{train, IterationMetrics, TrainOptions};

/// Where to write, how many threads, and an optional checkpoint to start from.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub workers: usize,
    /// Skip training and evaluate these parameters instead.
    pub checkpoint: Option<PathBuf>,
    /// Report directory; nothing is written when unset.
    pub out_dir: Option<PathBuf>,
}

/// Scalar results of one master seed, as written to `metrics.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedReport {
    pub config_hash: String,
    pub scenario: String,
    pub seed: u64,
    /// Clique sizes of the evaluation network.
    pub clique_sizes: Vec<usize>,
    pub metrics: WindowMetrics,
    pub allocation: Option<Allocation>,
    pub all_transmit: bool,
    /// Optimal-Aloha throughput for the same clique sizes.
    pub aloha_benchmark: f64,
    pub trained_iterations: usize,
}

/// Everything produced for one seed.
#[derive(Debug, Clone)]
pub struct SeedRun {
    pub report: SeedReport,
    pub params: NetworkParams,
    pub curve: Vec<IterationMetrics>,
    pub evaluation: Evaluation,
}

pub fn eval_settings(config: &ExperimentConfig) -> EvalSettings {
    EvalSettings {
        horizon: config.eval.horizon,
        episodes: config.eval.episodes,
        window: config.eval.window,
    }
}

/// Trains (or loads) and evaluates one master seed, writing its report files
/// into `out_dir/seed_<seed>/` when an output directory is given.
pub fn run_seed(config: &ExperimentConfig, seed: u64, options: &RunOptions) -> Result<SeedRun> {
    let hash = config.config_hash();
    let (params, curve) = match &options.checkpoint {
        Some(path) => (checkpoint::load(path)?.params, Vec::new()),
        None => {
            let train_config = config.train_config(seed)?;
            let outcome = train(
                &train_config,
                &TrainOptions {
                    workers: options.workers,
                    checkpoint_dir: None,
                    checkpoint_every: 0,
                    config_hash: config.config_hash_u64(),
                },
            )?;
            (outcome.params, outcome.curve)
        }
    };
    let env = config.eval_env(seed)?;
    let controller = Controller::Dqn {
        params: &params,
        policy: config.policy.evaluation()?,
    };
    let evaluation = evaluate_policy(
        &controller,
        &env,
        &eval_settings(config),
        &[seed],
        options.workers,
    )?;
    let seed_eval = &evaluation.per_seed[0];
    let report = SeedReport {
        config_hash: hash.clone(),
        scenario: config.scenario.clone(),
        seed,
        clique_sizes: env.clique_partition().iter().map(Vec::len).collect(),
        metrics: seed_eval.metrics.clone(),
        allocation: seed_eval.allocation,
        all_transmit: seed_eval.all_transmit,
        aloha_benchmark: clique_benchmark(&env),
        trained_iterations: curve.len(),
    };
    let run = SeedRun {
        report,
        params,
        curve,
        evaluation,
    };
    if let Some(dir) = &options.out_dir {
        write_seed_files(&dir.join(format!("seed_{seed}")), config, &run)?;
    }
    Ok(run)
}

fn create(path: &Path) -> Result<fs::File> {
    fs::File::create(path).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("reports always serialize") + "\n"
}

/// Training curve as CSV, preceded by a `# config_hash=...` line.
pub fn curve_csv(curve: &[IterationMetrics], config_hash: &str) -> String {
    let mut out = format!(
        "# config_hash={config_hash}\n{}\n",
        IterationMetrics::CSV_HEADER
    );
    for row in curve {
        out.push_str(&row.csv_row());
        out.push('\n');
    }
    out
}

#[derive(Serialize)]
struct CurveJson<'a> {
    config_hash: &'a str,
    curve: &'a [IterationMetrics],
}

/// Writes `config.toml`, `curve.csv`, `curve.json`, `metrics.json`,
/// `occupancy.csv` and `model.ckpt` into `dir`.
pub fn write_seed_files(dir: &Path, config: &ExperimentConfig, run: &SeedRun) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let hash = &run.report.config_hash;
    write_text(&dir.join("config.toml"), &config.to_toml_string())?;
    write_text(&dir.join("curve.csv"), &curve_csv(&run.curve, hash))?;
    write_text(
        &dir.join("curve.json"),
        &to_json(&CurveJson {
            config_hash: hash,
            curve: &run.curve,
        }),
    )?;
    write_text(&dir.join("metrics.json"), &to_json(&run.report))?;
    let path = dir.join("occupancy.csv");
    let mut file = std::io::BufWriter::new(create(&path)?);
    write_occupancy_csv(
        &mut file,
        &occupancy_trace(&run.evaluation.per_seed[0].trace),
        hash,
    )
    .and_then(|_| file.flush())
    .map_err(|e| Error::io(&path, e))?;
    checkpoint::save(
        &dir.join("model.ckpt"),
        &run.params,
        config.config_hash_u64(),
    )
}

/// Results of a Monte-Carlo sweep over master seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub config_hash: String,
    pub scenario: String,
    pub seeds: Vec<u64>,
    pub per_seed: Vec<SeedReport>,
    pub summary: MetricsSummary,
    /// Seeds per allocation label (single-clique scenarios).
    pub allocations: BTreeMap<String, usize>,
    pub mean_aloha_benchmark: f64,
}

pub const SWEEP_HEADER: &str =
    "seed,throughput,idle_frac,collision_frac,sum_rate,sum_log_rate,jain_index,allocation,all_transmit,aloha_benchmark";

impl SweepReport {
    pub fn csv(&self) -> String {
        let mut out = format!("# config_hash={}\n{SWEEP_HEADER}\n", self.config_hash);
        for r in &self.per_seed {
            let m = &r.metrics;
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                r.seed,
                m.throughput,
                m.idle_frac,
                m.collision_frac,
                m.sum_rate,
                m.sum_log_rate,
                m.jain_index,
                r.allocation.map_or("none", Allocation::label),
                r.all_transmit as u8,
                r.aloha_benchmark
            ));
        }
        out
    }

    pub fn count(&self, allocation: Allocation) -> usize {
        self.allocations
            .get(allocation.label())
            .copied()
            .unwrap_or(0)
    }
}

/// Runs `seeds` one after another and writes `sweep.csv` and `sweep.json`
/// next to the per-seed directories.
pub fn sweep(
    config: &ExperimentConfig,
    seeds: &[u64],
    options: &RunOptions,
) -> Result<SweepReport> {
    let mut per_seed = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        per_seed.push(run_seed(config, seed, options)?.report);
    }
    let mut allocations = BTreeMap::new();
    for r in &per_seed {
        if let Some(a) = r.allocation {
            *allocations.entry(a.label().to_string()).or_insert(0) += 1;
        }
    }
    let report = SweepReport {
        config_hash: config.config_hash(),
        scenario: config.scenario.clone(),
        seeds: seeds.to_vec(),
        summary: MetricsSummary::of(
            &per_seed
                .iter()
                .map(|r| r.metrics.clone())
                .collect::<Vec<_>>(),
        ),
        mean_aloha_benchmark: per_seed.iter().map(|r| r.aloha_benchmark).sum::<f64>()
            / per_seed.len().max(1) as f64,
        allocations,
        per_seed,
    };
    if let Some(dir) = &options.out_dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_text(&dir.join("sweep.csv"), &report.csv())?;
        write_text(&dir.join("sweep.json"), &to_json(&report))?;
    }
    Ok(report)
}

/// The seeds `config.seed, config.seed + 1, ...` named by `eval.seeds`.
pub fn sweep_seeds(config: &ExperimentConfig) -> Vec<u64> {
    (0..config.eval.seeds as u64)
        .map(|i| config.seed + i)
        .collect()
}

/// Slotted Aloha on each seed's evaluation network, as written to `baseline.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineReport {
    pub config_hash: String,
    pub seeds: Vec<u64>,
    pub simulated: Vec<WindowMetrics>,
    pub analytic: Vec<f64>,
    pub summary: MetricsSummary,
}

/// Simulates Aloha with the attempt probability that is optimal for each
/// clique of every seed's evaluation network.
pub fn run_baseline(
    config: &ExperimentConfig,
    seeds: &[u64],
    options: &RunOptions,
) -> Result<BaselineReport> {
    let mut simulated = Vec::new();
    let mut analytic = Vec::new();
    for &seed in seeds {
        let env = config.eval_env(seed)?;
        let policies = clique_optimal_policies(&env)?;
        let ev = evaluate_policy(
            &Controller::Aloha(&policies),
            &env,
            &eval_settings(config),
            &[seed],
            options.workers,
        )?;
        simulated.push(ev.per_seed[0].metrics.clone());
        analytic.push(clique_benchmark(&env));
    }
    let report = BaselineReport {
        config_hash: config.config_hash(),
        seeds: seeds.to_vec(),
        summary: MetricsSummary::of(&simulated),
        simulated,
        analytic,
    };
    if let Some(dir) = &options.out_dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_text(&dir.join("baseline.json"), &to_json(&report))?;
    }
    Ok(report)
}
