use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use dqsa::gametheory::{verify_profile, GameSpec, PureProfile, Template, DEFAULT_BUDGET};
use dqsa::harness::run::{run_baseline, run_seed, sweep, sweep_seeds, RunOptions};
use dqsa::harness::{occupancy, ExperimentConfig, SCENARIOS};
use dqsa::rewards::RewardSpec;

/// Deep Q-learning for distributed spectrum access: training, evaluation,
/// baselines and equilibrium checks.
#[derive(Parser)]
#[command(name = "dqsa", version)]
struct Cli {
    /// Experiment config: a TOML file or a built-in scenario name
    /// (cliques, sumrate-4x2, competitive-3x2, lograte-4x2).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<String>,
    /// Master seed; overrides the config's `seed`.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Output directory (default: the config's eval.output_dir, else runs/<scenario>).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads for episode collection and evaluation.
    #[arg(long, global = true, value_name = "N", default_value_t = 1)]
    workers: usize,
    /// Network checkpoint to evaluate instead of training.
    #[arg(long, global = true, value_name = "PATH")]
    checkpoint: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one seed, evaluate it and write its report files.
    Train,
    /// Evaluate a checkpoint (requires --checkpoint).
    Evaluate,
    /// Slotted Aloha at the clique-optimal attempt probability.
    Baseline {
        /// Number of seeds (default: eval.seeds).
        #[arg(long)]
        seeds: Option<usize>,
    },
    /// Check a strategy profile for Nash, subgame-perfect and Pareto properties.
    VerifyEquilibria(VerifyArgs),
    /// Train and evaluate every seed of a Monte-Carlo sweep.
    Sweep {
        /// Number of seeds (default: eval.seeds).
        #[arg(long)]
        seeds: Option<usize>,
    },
    /// Write the per-slot occupancy trace of a checkpoint's evaluation.
    Trace,
}

#[derive(Clone, Copy, ValueEnum)]
enum RewardArg {
    Competitive,
    AlphaFair,
}

#[derive(clap::Args)]
struct VerifyArgs {
    /// thm1.1, thm1.2, thm2, thm3.1, thm3.2, or a profile file (one row of
    /// action indices per user).
    profile: String,
    #[arg(long, short = 'n', default_value_t = 3)]
    users: usize,
    #[arg(long, short = 'k', default_value_t = 2)]
    channels: usize,
    /// Horizon for templates; profile files fix it by their width.
    #[arg(long, short = 't', default_value_t = 3)]
    horizon: usize,
    /// Reward for profile files; templates pick their own.
    #[arg(long, value_enum, default_value_t = RewardArg::Competitive)]
    reward: RewardArg,
    /// Fairness parameter for the alpha-fair reward.
    #[arg(long, default_value_t = 0.0)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    /// Enumeration budget.
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    budget: u128,
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let name = cli
        .config
        .as_deref()
        .context("--config is required (a TOML file or a built-in scenario name)")?;
    let mut config = if Path::new(name).is_file() {
        ExperimentConfig::load(Path::new(name))?
    } else if SCENARIOS.contains(&name) {
        ExperimentConfig::scenario(name)?
    } else {
        bail!(
            "{name:?} is neither a file nor one of {}",
            SCENARIOS.join(", ")
        );
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    config.validate()?;
    Ok(config)
}

fn out_dir(cli: &Cli, config: &ExperimentConfig) -> PathBuf {
    cli.out
        .clone()
        .unwrap_or_else(|| match &config.eval.output_dir {
            Some(dir) => PathBuf::from(dir),
            None => PathBuf::from("runs").join(&config.scenario),
        })
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn seeds(config: &ExperimentConfig, count: Option<usize>) -> Vec<u64> {
    match count {
        Some(n) => (0..n as u64).map(|i| config.seed + i).collect(),
        None => sweep_seeds(config),
    }
}

fn verify(args: &VerifyArgs) -> Result<()> {
    let (profile, reward) = match args.profile.parse::<Template>() {
        Ok(template) => (
            template.profile(args.users, args.channels, args.horizon)?,
            template.reward(args.alpha),
        ),
        Err(_) => {
            let path = Path::new(&args.profile);
            let text = std::fs::read_to_string(path).with_context(|| {
                format!(
                    "{:?} is neither a template name nor a readable profile file",
                    args.profile
                )
            })?;
            let profile: PureProfile = text.parse()?;
            let reward = match args.reward {
                RewardArg::Competitive => RewardSpec::competitive(),
                RewardArg::AlphaFair => RewardSpec::alpha_fair(args.alpha),
            };
            (profile, reward)
        }
    };
    let spec = GameSpec::new(
        profile.num_users(),
        args.channels,
        profile.horizon(),
        reward.with_gamma(args.gamma),
    )
    .with_budget(args.budget);
    let report = verify_profile(&profile, &spec)?;
    print_json(&serde_json::json!({
        "profile": profile.to_string(),
        "num_users": spec.num_users,
        "num_channels": spec.num_channels,
        "horizon": spec.horizon,
        "report": report,
    }))
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    if let Command::VerifyEquilibria(args) = &cli.command {
        return verify(args);
    }
    let config = load_config(&cli)?;
    let out = out_dir(&cli, &config);
    let options = RunOptions {
        workers: cli.workers.max(1),
        checkpoint: cli.checkpoint.clone(),
        out_dir: Some(out.clone()),
    };
    match &cli.command {
        Command::Train => {
            let options = RunOptions {
                checkpoint: None,
                ..options
            };
            print_json(&run_seed(&config, config.seed, &options)?.report)?;
        }
        Command::Evaluate => {
            if cli.checkpoint.is_none() {
                bail!("evaluate needs --checkpoint");
            }
            print_json(&run_seed(&config, config.seed, &options)?.report)?;
        }
        Command::Baseline { seeds: count } => {
            print_json(&run_baseline(&config, &seeds(&config, *count), &options)?)?;
        }
        Command::Sweep { seeds: count } => {
            let report = sweep(&config, &seeds(&config, *count), &options)?;
            print!("{}", report.csv());
        }
        Command::Trace => {
            if cli.checkpoint.is_none() {
                bail!("trace needs --checkpoint");
            }
            let run = run_seed(
                &config,
                config.seed,
                &RunOptions {
                    out_dir: None,
                    ..options
                },
            )?;
            std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            let path = out.join(format!("occupancy_seed_{}.csv", config.seed));
            let mut file = std::io::BufWriter::new(std::fs::File::create(&path)?);
            occupancy::write_occupancy_csv(
                &mut file,
                &occupancy::occupancy_trace(&run.evaluation.per_seed[0].trace),
                &run.report.config_hash,
            )?;
            println!("{}", path.display());
        }
        Command::VerifyEquilibria(_) => unreachable!(),
    }
    Ok(())
}
