//! End-to-end pipelines and the artifact files they write.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::exploration::{StrategyKind, StrategySpec};
use crate::physics::{EnvironmentSpec, LatentFactors};
use crate::tasks::{build_tasks, Family, Scale, Split};
use crate::transfer::{
    auccess_with, build_performance_surface, train_sim_ranker, AuccessReport, OutcomeOracle,
    PerformanceSurface, SurfaceGrid,
};
use crate::workflow::{run_iplw, IplwConfig, IplwLog};

/// Every file written by the tools: the payload plus what produced it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Artifact<T> {
    pub kind: String,
    pub seed: Option<u64>,
    pub config: serde_json::Value,
    pub data: T,
}

/// Writes `data` as pretty JSON, refusing to replace an existing file
/// unless `force`.
pub fn write_artifact<T: Serialize, C: Serialize>(
    path: &Path,
    kind: &str,
    seed: Option<u64>,
    config: &C,
    data: &T,
    force: bool,
) -> Result<()> {
    let artifact = Artifact {
        kind: kind.to_string(),
        seed,
        config: serde_json::to_value(config)?,
        data,
    };
    write_text(path, &(serde_json::to_string_pretty(&artifact)? + "\n"), force)
}

pub fn write_text(path: &Path, text: &str, force: bool) -> Result<()> {
    if path.exists() && !force {
        return Err(Error::WouldOverwrite(path.display().to_string()));
    }
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, text)?;
    Ok(())
}

pub fn read_artifact<T: DeserializeOwned>(path: &Path) -> Result<Artifact<T>> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

/// Reads a surface either as a bare surface or wrapped in an artifact.
pub fn read_surface(path: &Path) -> Result<PerformanceSurface> {
    let text = fs::read_to_string(path)?;
    let surface = match serde_json::from_str::<Artifact<PerformanceSurface>>(&text) {
        Ok(a) => a.data,
        Err(_) => serde_json::from_str::<PerformanceSurface>(&text)?,
    };
    surface.validate()?;
    Ok(surface)
}

/// Jump-start of one strategy and seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub strategy: StrategyKind,
    pub seed: u64,
    pub theta: LatentFactors,
    pub residual: f64,
    pub real_rollouts: usize,
    pub auccess: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrategySummary {
    pub strategy: StrategyKind,
    pub seeds: Vec<u64>,
    pub auccess: Vec<f64>,
    pub mean: f64,
    /// Standard error of the mean; zero for a single seed.
    pub stderr: f64,
}

impl StrategySummary {
    pub fn from_results(strategy: StrategyKind, results: &[SeedResult]) -> Self {
        let mine: Vec<&SeedResult> = results.iter().filter(|r| r.strategy == strategy).collect();
        let auccess: Vec<f64> = mine.iter().map(|r| r.auccess).collect();
        let n = auccess.len() as f64;
        let mean = auccess.iter().sum::<f64>() / n;
        let stderr = if auccess.len() > 1 {
            (auccess.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() / n.sqrt()
        } else {
            0.0
        };
        Self {
            strategy,
            seeds: mine.iter().map(|r| r.seed).collect(),
            auccess,
            mean,
            stderr,
        }
    }
}

/// Comparison table as CSV.
pub fn summary_csv(rows: &[StrategySummary]) -> String {
    let mut s = String::from("strategy,seeds,mean_auccess,stderr\n");
    for r in rows {
        s += &format!("{},{},{:.6},{:.6}\n", r.strategy, r.seeds.len(), r.mean, r.stderr);
    }
    s
}

/// Environment the transferred rankers are judged in.
pub fn real_env(family: Family, damping: f64) -> Result<EnvironmentSpec> {
    EnvironmentSpec::new(family.true_latents(), damping)
}

/// Builds the IPLW config for one strategy and seed of an experiment.
pub fn iplw_config(
    cfg: &ExperimentConfig,
    strategy: StrategyKind,
    surface: Option<&PerformanceSurface>,
    seed: u64,
) -> Result<IplwConfig> {
    let strategy = match strategy {
        StrategyKind::Gradient => StrategySpec::gradient(
            surface
                .cloned()
                .ok_or_else(|| Error::InvalidConfig("the gradient strategy needs a surface".into()))?,
        )?,
        k => StrategySpec::new(k)?,
    };
    let real = real_env(cfg.family, cfg.real_damping)?;
    Ok(IplwConfig {
        strategy,
        actions_per_round: cfg.iplw.actions_per_round(),
        max_rounds: cfg.iplw.rounds(),
        min_residual: cfg.iplw.min_residual(),
        candidate_pool: cfg.iplw.candidate_pool(),
        cem: cfg.cem.resolve(cfg.family, cfg.scale),
        sim_env: EnvironmentSpec::new(cfg.family.true_latents(), cfg.sim_damping)?,
        real_env: real,
        seed,
    })
}

pub fn seed_dir(out: &Path, strategy: StrategyKind, seed: u64) -> PathBuf {
    out.join(strategy.as_str()).join(format!("seed-{seed}"))
}

/// Ground, rank and evaluate every (strategy, seed) pair of `cfg`, writing
/// per-seed artifacts and a summary under `cfg.out`.
pub fn run_experiment(cfg: &ExperimentConfig, force: bool) -> Result<Vec<StrategySummary>> {
    cfg.validate()?;
    let surface = cfg.surface.as_deref().map(read_surface).transpose()?;
    let train = build_tasks(cfg.family, cfg.scale, Some(Split::Train))?;
    let eval = build_tasks(cfg.family, cfg.scale, Some(cfg.eval_split))?;
    let oracle = OutcomeOracle::new(real_env(cfg.family, cfg.real_damping)?, &eval);
    write_text(&cfg.out.join("config.toml"), &cfg.to_toml(), force)?;

    let mut results = Vec::new();
    for &strategy in &cfg.strategies {
        for &seed in &cfg.seeds {
            let icfg = iplw_config(cfg, strategy, surface.as_ref(), seed)?;
            let result = run_seed(&icfg, &train, &oracle, &seed_dir(&cfg.out, strategy, seed), force)?;
            log::info!("{strategy} seed {seed}: jump-start {:.4}", result.auccess);
            results.push(result);
        }
    }
    let summary: Vec<StrategySummary> = cfg
        .strategies
        .iter()
        .map(|&s| StrategySummary::from_results(s, &results))
        .collect();
    write_artifact(&cfg.out.join("results.json"), "results", None, cfg, &results, force)?;
    write_artifact(&cfg.out.join("summary.json"), "summary", None, cfg, &summary, force)?;
    write_text(&cfg.out.join("summary.csv"), &summary_csv(&summary), force)?;
    Ok(summary)
}

/// One IPLW run followed by transfer; writes its log, estimate and report
/// into `dir`.
pub fn run_seed(
    icfg: &IplwConfig,
    train: &[crate::tasks::TaskSpec],
    oracle: &OutcomeOracle,
    dir: &Path,
    force: bool,
) -> Result<SeedResult> {
    let (theta, log) = run_iplw(train, icfg)?;
    let report = auccess_with(&train_sim_ranker(&theta, oracle.tasks()), oracle, oracle.tasks())?;
    let seed = Some(icfg.seed);
    write_artifact(&dir.join("iplw_log.json"), "iplw_log", seed, icfg, &log, force)?;
    write_artifact(&dir.join("theta.json"), "theta", seed, icfg, &theta, force)?;
    write_artifact(&dir.join("auccess.json"), "auccess", seed, icfg, &report, force)?;
    write_text(&dir.join("auccess.csv"), &report.to_csv(), force)?;
    Ok(SeedResult {
        strategy: icfg.strategy.kind,
        seed: icfg.seed,
        theta,
        residual: log.rounds.last().map_or(f64::INFINITY, |r| r.residual),
        real_rollouts: log.real_rollouts,
        auccess: report.auccess,
    })
}

/// What a surface was built from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfaceConfig {
    pub family: Family,
    pub scale: Scale,
    pub proxy_damping: f64,
    pub density: f64,
    pub grid: SurfaceGrid,
}

/// Builds a surface on the validation split in a proxy environment that has
/// the family's true latents and `proxy_damping`.
pub fn surface_for(sc: &SurfaceConfig) -> Result<PerformanceSurface> {
    let tasks = build_tasks(sc.family, sc.scale, Some(Split::Validation))?;
    let proxy = real_env(sc.family, sc.proxy_damping)?;
    build_performance_surface(&sc.grid, &OutcomeOracle::new(proxy, &tasks), sc.density)
}

/// Reads every per-seed `auccess.json` under `dir` and rebuilds the summary.
pub fn collect_results(dir: &Path) -> Result<Vec<StrategySummary>> {
    let mut results = Vec::new();
    for kind in StrategyKind::ALL {
        let sdir = dir.join(kind.as_str());
        if !sdir.is_dir() {
            continue;
        }
        let mut entries: Vec<PathBuf> = fs::read_dir(&sdir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.join("auccess.json").is_file())
            .collect();
        entries.sort();
        for e in entries {
            let report: Artifact<AuccessReport> = read_artifact(&e.join("auccess.json"))?;
            let theta: Artifact<LatentFactors> = read_artifact(&e.join("theta.json"))?;
            let log: Artifact<IplwLog> = read_artifact(&e.join("iplw_log.json"))?;
            results.push(SeedResult {
                strategy: kind,
                seed: report.seed.unwrap_or_default(),
                theta: theta.data,
                residual: log.data.rounds.last().map_or(f64::INFINITY, |r| r.residual),
                real_rollouts: log.data.real_rollouts,
                auccess: report.data.auccess,
            });
        }
    }
    if results.is_empty() {
        return Err(Error::InvalidConfig(format!("no results under {}", dir.display())));
    }
    results.sort_by_key(|r| r.seed);
    Ok(StrategyKind::ALL
        .into_iter()
        .filter(|k| results.iter().any(|r| r.strategy == *k))
        .map(|k| StrategySummary::from_results(k, &results))
        .collect())
}
