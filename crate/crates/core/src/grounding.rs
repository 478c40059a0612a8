//! Latent-factor estimation: trajectory residuals and a cross-entropy-method
//! search over (density, friction, restitution).

use rand::seq::index::sample;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::physics::{EnvironmentSpec, LatentFactors, Trajectory};
use crate::rng::substream;
use crate::tasks::{Family, TaskSpec};

/// Lower bounds of the randomisation ranges, in (density, friction, restitution) order.
pub const LATENT_LOWER: [f64; 3] = [0.1, 0.0, 0.0];
/// Upper bounds of the randomisation ranges.
pub const LATENT_UPPER: [f64; 3] = [20.0, 3.0, 1.0];
/// Smallest standard deviation CEM keeps after refitting.
pub const STD_FLOOR: f64 = 1e-4;

/// Mean squared position error per compared frame.
///
/// Frames are paired by index up to the shorter trajectory; every dynamic
/// body contributes its squared position difference.
pub fn trajectory_residual(real: &Trajectory, sim: &Trajectory) -> Result<f64> {
    let frames = real.frames.len().min(sim.frames.len());
    if frames == 0 {
        return Err(Error::InvalidComparison("no common frames".into()));
    }
    if real.bodies.len() != sim.bodies.len() {
        return Err(Error::InvalidComparison(format!(
            "body counts differ ({} vs {})",
            real.bodies.len(),
            sim.bodies.len()
        )));
    }
    let mut total = 0.0;
    for (fr, fs) in real.frames.iter().zip(&sim.frames).take(frames) {
        for (a, b) in fr.states.iter().zip(&fs.states) {
            total += (a.position - b.position).length_squared();
        }
    }
    Ok(total / frames as f64)
}

/// One real interaction: an action on a task and the trajectory it produced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub task: usize,
    pub action: usize,
    pub trajectory: Trajectory,
}

/// Interactions collected in the real environment.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RealDataset {
    pub observations: Vec<Observation>,
}

impl RealDataset {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn push(&mut self, task: usize, action: usize, trajectory: Trajectory) {
        self.observations.push(Observation {
            task,
            action,
            trajectory,
        });
    }

    /// Rolls out `actions` (task id, action index) in `env` and records them.
    pub fn collect(
        &mut self,
        tasks: &[TaskSpec],
        actions: &[(usize, usize)],
        env: &EnvironmentSpec,
    ) -> Result<()> {
        let trajs = crate::parallel::map(actions, |&(task, action)| {
            find_task(tasks, task)?.simulate(action, env)
        });
        for (&(task, action), traj) in actions.iter().zip(trajs) {
            self.push(task, action, traj?);
        }
        Ok(())
    }
}

pub(crate) fn find_task(tasks: &[TaskSpec], id: usize) -> Result<&TaskSpec> {
    tasks.iter().find(|t| t.id == id).ok_or_else(|| {
        Error::InvalidConfig(format!("task {id} is not in the supplied task list"))
    })
}

/// Residual of one observation under `env`. The simulated rollout is capped
/// at the real trajectory's length since later frames are never compared.
pub fn observation_residual(
    obs: &Observation,
    tasks: &[TaskSpec],
    env: &EnvironmentSpec,
) -> Result<f64> {
    let task = find_task(tasks, obs.task)?;
    let sim = task.simulate_with(obs.action, env, false, Some(obs.trajectory.steps as usize))?;
    trajectory_residual(&obs.trajectory, &sim)
}

/// Mean trajectory residual over `data` with the simulator set to `theta`.
pub fn residual(
    theta: &LatentFactors,
    data: &RealDataset,
    tasks: &[TaskSpec],
    sim_env: &EnvironmentSpec,
) -> Result<f64> {
    residual_of(theta, &data.observations.iter().collect::<Vec<_>>(), tasks, sim_env)
}

fn residual_of(
    theta: &LatentFactors,
    observations: &[&Observation],
    tasks: &[TaskSpec],
    sim_env: &EnvironmentSpec,
) -> Result<f64> {
    if observations.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let env = sim_env.with_latents(*theta);
    let mut total = 0.0;
    for obs in observations {
        total += observation_residual(obs, tasks, &env)?;
    }
    Ok(total / observations.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CemConfig {
    pub rounds: usize,
    pub samples_per_round: usize,
    pub elite_count: usize,
    pub mean: [f64; 3],
    pub std: [f64; 3],
    pub lower: [f64; 3],
    pub upper: [f64; 3],
    /// Cap on the observations scored per residual evaluation. Larger
    /// datasets are subsampled once per estimation with the estimation seed.
    #[serde(default)]
    pub max_observations: Option<usize>,
}

impl CemConfig {
    /// Prior shared by both families; Basketball narrows the friction prior.
    fn prior(family: Family) -> ([f64; 3], [f64; 3]) {
        match family {
            Family::Bowling => ([1.0, 1.0, 0.5], [0.5, 0.5, 0.25]),
            Family::Basketball => ([1.0, 0.5, 0.5], [0.5, 0.25, 0.25]),
        }
    }

    /// 10 rounds of 1000 samples with 200 elites.
    pub fn full(family: Family) -> Self {
        let (mean, std) = Self::prior(family);
        Self {
            rounds: 10,
            samples_per_round: 1000,
            elite_count: 200,
            mean,
            std,
            lower: LATENT_LOWER,
            upper: LATENT_UPPER,
            max_observations: None,
        }
    }

    /// Reduced schedule for single-machine runs.
    pub fn desk(family: Family) -> Self {
        Self {
            rounds: 5,
            samples_per_round: 30,
            elite_count: 6,
            max_observations: Some(40),
            ..Self::full(family)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.rounds == 0 || self.samples_per_round == 0 {
            return bad("CEM needs at least one round and one sample".into());
        }
        if self.elite_count == 0 || self.elite_count > self.samples_per_round {
            return bad(format!(
                "elite_count must be in 1..={}, got {}",
                self.samples_per_round, self.elite_count
            ));
        }
        if self.std.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return bad(format!("CEM std must be positive, got {:?}", self.std));
        }
        for k in 0..3 {
            if !(self.lower[k] >= LATENT_LOWER[k]
                && self.upper[k] <= LATENT_UPPER[k]
                && self.lower[k] <= self.upper[k])
            {
                return bad(format!(
                    "CEM bounds {:?}..{:?} exceed the latent ranges",
                    self.lower, self.upper
                ));
            }
        }
        if self.max_observations == Some(0) {
            return bad("max_observations must be positive".into());
        }
        Ok(())
    }
}

/// One CEM round as written to the estimation log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CemRound {
    pub round: usize,
    /// Best residual seen so far, including this round.
    pub best_residual: f64,
    pub round_best_residual: f64,
    /// Sampling distribution after the refit.
    pub mean: [f64; 3],
    pub std: [f64; 3],
    /// Dimensions whose std hit the floor.
    pub std_floored: Vec<usize>,
    pub diverged: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CemOutcome {
    pub latents: LatentFactors,
    pub residual: f64,
    pub mean: [f64; 3],
    pub std: [f64; 3],
    pub rounds: Vec<CemRound>,
}

/// Minimises `objective` over the clipped sampling box. Non-finite objective
/// values rank last. Returns the best sample seen in any round; ties go to
/// the earlier sample.
pub fn cem_minimize<F>(cfg: &CemConfig, seed: u64, objective: F) -> Result<CemOutcome>
where
    F: Fn(&[f64; 3]) -> f64 + Sync,
{
    cfg.validate()?;
    let mut rng = substream(seed, "cem");
    let mut mean = cfg.mean;
    let mut std = cfg.std;
    let mut best: Option<([f64; 3], f64)> = None;
    let mut rounds = Vec::with_capacity(cfg.rounds);
    for round in 0..cfg.rounds {
        let normals: Vec<Normal<f64>> = (0..3)
            .map(|k| Normal::new(mean[k], std[k]).expect("std validated positive"))
            .collect();
        let samples: Vec<[f64; 3]> = (0..cfg.samples_per_round)
            .map(|_| {
                let mut x = [0.0; 3];
                for k in 0..3 {
                    x[k] = normals[k].sample(&mut rng).clamp(cfg.lower[k], cfg.upper[k]);
                }
                x
            })
            .collect();
        let scores = crate::parallel::map(&samples, |x| objective(x));
        let diverged = scores.iter().filter(|s| !s.is_finite()).count();
        if diverged == samples.len() {
            return Err(Error::AllSamplesDiverged(round));
        }
        let mut order: Vec<usize> = (0..samples.len()).collect();
        order.sort_by(|&i, &j| rank_key(scores[i]).total_cmp(&rank_key(scores[j])).then(i.cmp(&j)));
        let (round_best, round_score) = (samples[order[0]], scores[order[0]]);
        if best.is_none_or(|(_, b)| round_score < b) {
            best = Some((round_best, round_score));
        }
        let elites: Vec<&[f64; 3]> = order[..cfg.elite_count].iter().map(|&i| &samples[i]).collect();
        let n = elites.len() as f64;
        let mut floored = Vec::new();
        for k in 0..3 {
            let m = elites.iter().map(|e| e[k]).sum::<f64>() / n;
            let var = elites.iter().map(|e| (e[k] - m).powi(2)).sum::<f64>() / n;
            mean[k] = m;
            std[k] = var.sqrt();
            if std[k] < STD_FLOOR {
                std[k] = STD_FLOOR;
                floored.push(k);
            }
        }
        if !floored.is_empty() {
            log::debug!("CEM round {round}: std floored in dimensions {floored:?}");
        }
        rounds.push(CemRound {
            round,
            best_residual: best.map(|(_, b)| b).unwrap_or(f64::INFINITY),
            round_best_residual: round_score,
            mean,
            std,
            std_floored: floored,
            diverged,
        });
    }
    let (x, residual) = best.expect("at least one round ran");
    Ok(CemOutcome {
        latents: LatentFactors::from_array(x)?,
        residual,
        mean,
        std,
        rounds,
    })
}

fn rank_key(score: f64) -> f64 {
    if score.is_nan() {
        f64::INFINITY
    } else {
        score
    }
}

/// Estimates latents by minimising the dataset residual with CEM.
pub fn estimate_latents(
    data: &RealDataset,
    cfg: &CemConfig,
    tasks: &[TaskSpec],
    sim_env: &EnvironmentSpec,
    seed: u64,
) -> Result<CemOutcome> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    cfg.validate()?;
    let observations: Vec<&Observation> = match cfg.max_observations {
        Some(cap) if cap < data.len() => {
            let mut rng = substream(seed, "cem-subsample");
            let mut picked = sample(&mut rng, data.len(), cap).into_vec();
            picked.sort_unstable();
            picked.into_iter().map(|i| &data.observations[i]).collect()
        }
        _ => data.observations.iter().collect(),
    };
    for obs in &observations {
        find_task(tasks, obs.task)?;
    }
    cem_minimize(cfg, seed, |x| {
        let Ok(theta) = LatentFactors::from_array(*x) else {
            return f64::INFINITY;
        };
        match residual_of(&theta, &observations, tasks, sim_env) {
            Ok(r) => r,
            Err(Error::SimulationDiverged { .. }) => f64::INFINITY,
            Err(e) => {
                log::warn!("residual evaluation failed: {e}");
                f64::INFINITY
            }
        }
    })
}
