//! The iterative loop: simulate candidates under the current estimate, pick
//! real interactions with an exploration strategy, re-ground, repeat.

use std::collections::HashSet;

use rand::seq::index::sample;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exploration::{
    gradient_action_probabilities, rank_and_select, ActionTypeProbabilities, StrategyKind,
    StrategySpec,
};
use crate::grounding::{estimate_latents, CemConfig, CemRound, RealDataset};
use crate::physics::{EnvironmentSpec, LatentFactors, Trajectory};
use crate::rng::{derive_seed, substream};
use crate::tasks::TaskSpec;

/// Candidates simulated per round when the config does not say otherwise.
pub const DEFAULT_CANDIDATE_POOL: usize = 1000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IplwConfig {
    pub strategy: StrategySpec,
    pub actions_per_round: usize,
    pub max_rounds: usize,
    pub min_residual: f64,
    pub candidate_pool: usize,
    pub cem: CemConfig,
    pub real_env: EnvironmentSpec,
    pub sim_env: EnvironmentSpec,
    pub seed: u64,
}

impl IplwConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if self.actions_per_round == 0 {
            return bad("actions per round must be positive");
        }
        if self.max_rounds == 0 {
            return bad("max rounds must be positive");
        }
        if !(self.min_residual > 0.0) {
            return bad("min residual must be positive");
        }
        if self.candidate_pool < self.actions_per_round {
            return Err(Error::SelectionTooLarge {
                requested: self.actions_per_round,
                available: self.candidate_pool,
            });
        }
        self.strategy.validate()?;
        self.cem.validate()?;
        self.real_env.validate()?;
        self.sim_env.validate()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IplwRound {
    pub round: usize,
    /// Latents the candidates were simulated with.
    pub theta_before: LatentFactors,
    /// `(task id, action index)` pairs rolled out in the real environment.
    pub selected: Vec<(usize, usize)>,
    pub probabilities: Option<ActionTypeProbabilities>,
    pub clamped: bool,
    pub dataset_size: usize,
    /// Best residual of this round's estimation, over the dataset so far.
    pub residual: f64,
    pub best_residual: f64,
    pub theta: LatentFactors,
    pub cem: Vec<CemRound>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IplwLog {
    pub initial_theta: LatentFactors,
    pub rounds: Vec<IplwRound>,
    pub real_rollouts: usize,
    pub stopped_early: bool,
}

impl IplwLog {
    pub fn final_theta(&self) -> LatentFactors {
        self.rounds.last().map_or(self.initial_theta, |r| r.theta)
    }
}

/// Draws `θ` from the prior, clipped to the CEM bounds.
fn prior_draw(cem: &CemConfig, seed: u64) -> Result<LatentFactors> {
    let mut rng = substream(seed, "iplw-prior");
    let mut x = [0.0; 3];
    for k in 0..3 {
        let n = Normal::new(cem.mean[k], cem.std[k])
            .map_err(|e| Error::InvalidConfig(format!("prior: {e}")))?;
        x[k] = n.sample(&mut rng).clamp(cem.lower[k], cem.upper[k]);
    }
    LatentFactors::from_array(x)
}

/// Runs the loop on `tasks` (normally the training split).
pub fn run_iplw(tasks: &[TaskSpec], cfg: &IplwConfig) -> Result<(LatentFactors, IplwLog)> {
    cfg.validate()?;
    if tasks.is_empty() {
        return Err(Error::InvalidConfig("IPLW needs at least one task".into()));
    }
    // Flat index over every (task, action) pair.
    let offsets: Vec<usize> = tasks
        .iter()
        .scan(0, |acc, t| {
            let o = *acc;
            *acc += t.action_space_size();
            Some(o)
        })
        .collect();
    let total: usize = tasks.iter().map(|t| t.action_space_size()).sum();
    let locate = |flat: usize| {
        let ti = offsets.partition_point(|&o| o <= flat) - 1;
        (ti, flat - offsets[ti])
    };

    let mut theta = prior_draw(&cfg.cem, cfg.seed)?;
    let mut log = IplwLog {
        initial_theta: theta,
        rounds: Vec::new(),
        real_rollouts: 0,
        stopped_early: false,
    };
    let mut data = RealDataset::new();
    let mut used: HashSet<usize> = HashSet::new();
    let mut cem = cfg.cem.clone();
    let mut best = f64::INFINITY;
    let mut cand_rng = substream(cfg.seed, "candidates");
    let mut select_rng = substream(cfg.seed, "selection");

    for round in 0..cfg.max_rounds {
        let fresh = total - used.len();
        let pool: Vec<usize> = sample(&mut cand_rng, total, total.min(cfg.candidate_pool + used.len()))
            .into_iter()
            .filter(|i| !used.contains(i))
            .take(cfg.candidate_pool.min(fresh))
            .collect();
        if pool.len() < cfg.actions_per_round {
            return Err(Error::SelectionTooLarge {
                requested: cfg.actions_per_round,
                available: pool.len(),
            });
        }
        let sim = cfg.sim_env.with_latents(theta);
        let trajs: Vec<Trajectory> = crate::parallel::map(&pool, |&flat| {
            let (ti, a) = locate(flat);
            match tasks[ti].simulate(a, &sim) {
                Ok(t) => Ok(t),
                // A diverged candidate carries no grouping signal.
                Err(Error::SimulationDiverged { .. }) => Ok(Trajectory::default()),
                Err(e) => Err(e),
            }
        })
        .into_iter()
        .collect::<Result<_>>()?;

        let (probabilities, clamped) = match (&cfg.strategy.kind, &cfg.strategy.surface) {
            (StrategyKind::Gradient, Some(s)) => {
                let (p, c) = gradient_action_probabilities(s, &theta)?;
                (Some(p), c)
            }
            _ => (None, false),
        };
        let picked = rank_and_select(
            &pool,
            &trajs,
            cfg.strategy.kind,
            probabilities.as_ref(),
            cfg.actions_per_round,
            &mut select_rng,
        )?;
        let selected: Vec<(usize, usize)> = picked
            .iter()
            .map(|&flat| {
                used.insert(flat);
                let (ti, a) = locate(flat);
                (tasks[ti].id, a)
            })
            .collect();
        data.collect(tasks, &selected, &cfg.real_env)?;
        log.real_rollouts += selected.len();

        let outcome = estimate_latents(
            &data,
            &cem,
            tasks,
            &cfg.sim_env,
            derive_seed(cfg.seed, &format!("cem-{round}")),
        )?;
        cem.mean = outcome.mean;
        cem.std = outcome.std;
        let theta_before = theta;
        theta = outcome.latents;
        best = best.min(outcome.residual);
        log::info!(
            "round {round}: residual {:.6} theta ({:.4}, {:.4}, {:.4})",
            outcome.residual,
            theta.density,
            theta.friction,
            theta.restitution
        );
        log.rounds.push(IplwRound {
            round,
            theta_before,
            selected,
            probabilities,
            clamped,
            dataset_size: data.len(),
            residual: outcome.residual,
            best_residual: best,
            theta,
            cem: outcome.rounds,
        });
        if outcome.residual < cfg.min_residual {
            log.stopped_early = true;
            break;
        }
    }
    Ok((theta, log))
}
