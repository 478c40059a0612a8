use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use simground::config::{ExperimentConfig, DEFAULT_DR_SAMPLES, DEFAULT_PROXY_DAMPING, DEFAULT_REAL_DAMPING};
use simground::experiment::{
    collect_results, iplw_config, read_artifact, read_surface, real_env, run_experiment, run_seed,
    summary_csv, surface_for, write_artifact, write_text, SurfaceConfig,
};
use simground::exploration::StrategyKind;
use simground::physics::LatentFactors;
use simground::tasks::{build_tasks, write_manifest, Family, Scale, Split};
use simground::transfer::{
    auccess_with, baseline_domain_randomization, direct_ranker, train_sim_ranker, OutcomeOracle,
    SurfaceGrid,
};
use simground::{parallel, Error, Result};

#[derive(Parser)]
#[command(name = "simground", version, about = "Ground a 2D simulator from real interactions and measure transfer")]
struct Cli {
    /// Worker threads for rollouts.
    #[arg(long, global = true, env = "SIMGROUND_WORKERS")]
    workers: Option<usize>,
    /// Log more (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the task manifest of a family.
    GenTasks {
        #[arg(long)]
        family: Family,
        #[arg(long, default_value = "desk")]
        scale: Scale,
        #[command(flatten)]
        out: Out,
    },
    /// Ground the simulator with one exploration strategy.
    Iplw(IplwArgs),
    /// Build a jump-start performance surface in a proxy environment.
    Surface {
        #[arg(long)]
        family: Family,
        #[arg(long, default_value = "desk")]
        scale: Scale,
        #[arg(long, default_value_t = DEFAULT_PROXY_DAMPING)]
        proxy_damping: f64,
        /// Density held fixed across the grid; defaults to the family's.
        #[arg(long)]
        density: Option<f64>,
        /// Cells per axis.
        #[arg(long, default_value_t = 6)]
        grid: usize,
        #[command(flatten)]
        out: Out,
    },
    /// Evaluate the jump start of a ranker in the real environment.
    Transfer {
        #[arg(long)]
        family: Family,
        #[arg(long, default_value = "desk")]
        scale: Scale,
        /// Latent estimate written by `iplw`.
        #[arg(long, conflicts_with = "ranker")]
        theta: Option<PathBuf>,
        /// Baseline ranker: true (true latents), dr, or direct.
        #[arg(long)]
        ranker: Option<String>,
        #[arg(long, default_value_t = 50)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_REAL_DAMPING)]
        real_damping: f64,
        #[arg(long, default_value = "test")]
        split: Split,
        #[command(flatten)]
        out: Out,
    },
    /// Summarise the per-seed results under a run directory.
    Report {
        /// Directory written by `run`.
        #[arg(long)]
        runs: PathBuf,
        #[command(flatten)]
        out: Out,
    },
    /// Run every strategy and seed of a config file end to end.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        force: bool,
    },
}

#[derive(Args)]
struct Out {
    #[arg(long)]
    out: PathBuf,
    /// Replace existing files.
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct IplwArgs {
    #[arg(long)]
    family: Family,
    #[arg(long)]
    strategy: StrategyKind,
    /// Performance surface, required by the gradient strategy.
    #[arg(long)]
    surface: Option<PathBuf>,
    #[arg(long)]
    rounds: Option<usize>,
    #[arg(long)]
    actions_per_round: Option<usize>,
    #[arg(long, default_value_t = 50)]
    seed: u64,
    #[arg(long, default_value = "desk")]
    scale: Scale,
    #[arg(long, default_value_t = DEFAULT_REAL_DAMPING)]
    real_damping: f64,
    /// Config file supplying the remaining settings; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    out: Out,
}

#[derive(Serialize)]
struct Invocation<'a, T: Serialize> {
    command: &'a str,
    #[serde(flatten)]
    args: T,
}

fn cmd_iplw(a: IplwArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::from_toml(&format!(
            "family = \"{}\"\nstrategies = [\"{}\"]\nout = \"{}\"\n",
            a.family,
            a.strategy,
            a.out.out.display()
        ))?,
    };
    cfg.family = a.family;
    cfg.scale = a.scale;
    cfg.strategies = vec![a.strategy];
    cfg.seeds = vec![a.seed];
    cfg.real_damping = a.real_damping;
    cfg.out = a.out.out.clone();
    if a.surface.is_some() {
        cfg.surface = a.surface.clone();
    }
    if a.rounds.is_some() {
        cfg.iplw.rounds = a.rounds;
    }
    if a.actions_per_round.is_some() {
        cfg.iplw.actions_per_round = a.actions_per_round;
    }
    cfg.validate()?;
    let surface = cfg.surface.as_deref().map(read_surface).transpose()?;
    let icfg = iplw_config(&cfg, a.strategy, surface.as_ref(), a.seed)?;
    let train = build_tasks(cfg.family, cfg.scale, Some(Split::Train))?;
    let eval = build_tasks(cfg.family, cfg.scale, Some(cfg.eval_split))?;
    let oracle = OutcomeOracle::new(real_env(cfg.family, cfg.real_damping)?, &eval);
    let r = run_seed(&icfg, &train, &oracle, &cfg.out, a.out.force)?;
    println!(
        "theta density {:.4} friction {:.4} restitution {:.4}; {} real rollouts; jump-start {:.4}",
        r.theta.density, r.theta.friction, r.theta.restitution, r.real_rollouts, r.auccess
    );
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    parallel::init_workers(cli.workers);
    match cli.command {
        Command::GenTasks { family, scale, out } => {
            let tasks = build_tasks(family, scale, None)?;
            let path = out.out.join("manifest.jsonl");
            if path.exists() && !out.force {
                return Err(Error::WouldOverwrite(path.display().to_string()));
            }
            std::fs::create_dir_all(&out.out)?;
            let mut w = BufWriter::new(File::create(&path)?);
            write_manifest(&mut w, &tasks)?;
            println!("{} tasks -> {}", tasks.len(), path.display());
        }
        Command::Iplw(a) => cmd_iplw(a)?,
        Command::Surface { family, scale, proxy_damping, density, grid, out } => {
            if grid < 2 {
                return Err(Error::HullTooSmall(format!("{grid}x{grid} grid")));
            }
            let sc = SurfaceConfig {
                family,
                scale,
                proxy_damping,
                density: density.unwrap_or(family.true_latents().density),
                grid: SurfaceGrid::uniform((0.1, 1.2), (0.1, 0.95), grid, grid),
            };
            if out.out.exists() && !out.force {
                return Err(Error::WouldOverwrite(out.out.display().to_string()));
            }
            let surface = surface_for(&sc)?;
            let (ve, vf) = surface.axis_variances();
            write_artifact(&out.out, "surface", None, &Invocation { command: "surface", args: &sc }, &surface, out.force)?;
            println!("variance along restitution {ve:.5}, along friction {vf:.5}");
        }
        Command::Transfer { family, scale, theta, ranker, seed, real_damping, split, out } => {
            let tasks = build_tasks(family, scale, Some(split))?;
            if tasks.is_empty() {
                return Err(Error::InvalidConfig(format!("{split} split is empty")));
            }
            let oracle = OutcomeOracle::new(real_env(family, real_damping)?, &tasks);
            let (label, r) = match (theta, ranker.as_deref()) {
                (Some(p), None) => {
                    let th: LatentFactors = read_artifact(&p)?.data;
                    ("theta".to_string(), train_sim_ranker(&th, &tasks))
                }
                (None, Some("true")) => ("true".into(), train_sim_ranker(&family.true_latents(), &tasks)),
                (None, Some("dr")) => ("dr".into(), baseline_domain_randomization(seed, &tasks, DEFAULT_DR_SAMPLES)?),
                (None, Some("direct")) => ("direct".into(), direct_ranker(&tasks, seed)),
                _ => {
                    return Err(Error::InvalidConfig(
                        "pass --theta <file> or --ranker true|dr|direct".into(),
                    ))
                }
            };
            let report = auccess_with(&r, &oracle, &tasks)?;
            let inv = serde_json::json!({
                "command": "transfer", "family": family, "scale": scale, "ranker": label,
                "seed": seed, "real_damping": real_damping, "split": split,
            });
            write_artifact(&out.out, "auccess", Some(seed), &inv, &report, out.force)?;
            write_text(&out.out.with_extension("csv"), &report.to_csv(), out.force)?;
            println!("{label}: jump-start AUCCESS {:.4}", report.auccess);
        }
        Command::Report { runs, out } => {
            let summary = collect_results(&runs)?;
            let csv = summary_csv(&summary);
            let inv = serde_json::json!({ "command": "report", "runs": runs });
            write_artifact(&out.out.join("summary.json"), "summary", None, &inv, &summary, out.force)?;
            write_text(&out.out.join("summary.csv"), &csv, out.force)?;
            print!("{csv}");
        }
        Command::Run { config, force } => {
            let cfg = ExperimentConfig::load(&config)?;
            let summary = run_experiment(&cfg, force)?;
            print!("{}", summary_csv(&summary));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
