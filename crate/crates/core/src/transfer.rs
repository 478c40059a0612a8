//! Simulated action rankers, AUCCESS evaluation in the real environment,
//! baselines, and the jump-start performance surface.

use std::collections::HashMap;
use std::sync::Mutex;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grounding::{LATENT_LOWER, LATENT_UPPER};
use crate::physics::{EnvironmentSpec, LatentFactors};
use crate::rng::substream;
use crate::tasks::{goal_achieved, progress_score, TaskSpec};

/// Attempts per task counted by AUCCESS.
pub const MAX_ATTEMPTS: usize = 100;

/// `w_k = ln(k + 1) - ln(k)` for `k = 1..=100`.
pub fn auccess_weights() -> Vec<f64> {
    (1..=MAX_ATTEMPTS)
        .map(|k| ((k + 1) as f64).ln() - (k as f64).ln())
        .collect()
}

/// Actions of one task in the order they will be attempted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskRanking {
    pub task: usize,
    pub order: Vec<usize>,
    /// Score of `order[i]`.
    pub scores: Vec<f64>,
}

impl TaskRanking {
    /// Sorts actions by score descending, ties by action index. NaN ranks last.
    pub fn from_scores(task: usize, scores: &[f64]) -> Self {
        let key = |s: f64| if s.is_nan() { f64::NEG_INFINITY } else { s };
        let mut order: Vec<usize> = (0..scores.len()).collect();
        order.sort_by(|&i, &j| key(scores[j]).total_cmp(&key(scores[i])).then(i.cmp(&j)));
        Self {
            task,
            scores: order.iter().map(|&i| scores[i]).collect(),
            order,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ActionRanker {
    pub tasks: Vec<TaskRanking>,
}

impl ActionRanker {
    pub fn ranking(&self, task: usize) -> Option<&TaskRanking> {
        self.tasks.iter().find(|r| r.task == task)
    }
}

/// Progress score of every action of `task` under `env`; diverged rollouts
/// score negative infinity.
pub fn score_actions(task: &TaskSpec, env: &EnvironmentSpec) -> Vec<f64> {
    let actions: Vec<usize> = (0..task.action_space_size()).collect();
    crate::parallel::map(&actions, |&a| match task.simulate(a, env) {
        Ok(traj) => progress_score(task, &traj),
        Err(Error::SimulationDiverged { .. }) => f64::NEG_INFINITY,
        Err(e) => panic!("rollout of a decoded action failed: {e}"),
    })
}

/// Ranks every action of every task by its progress in the ideal simulator
/// with latents `theta`.
pub fn train_sim_ranker(theta: &LatentFactors, tasks: &[TaskSpec]) -> ActionRanker {
    ranker_in(&EnvironmentSpec::ideal(*theta), tasks)
}

/// Like [`train_sim_ranker`] for an arbitrary environment.
pub fn ranker_in(env: &EnvironmentSpec, tasks: &[TaskSpec]) -> ActionRanker {
    ActionRanker {
        tasks: tasks
            .iter()
            .map(|t| TaskRanking::from_scores(t.id, &score_actions(t, env)))
            .collect(),
    }
}

/// Domain-randomisation ranker: actions are ranked by their mean progress
/// over `k` environments with latents drawn uniformly from the full ranges.
pub fn baseline_domain_randomization(seed: u64, tasks: &[TaskSpec], k: usize) -> Result<ActionRanker> {
    if k == 0 {
        return Err(Error::InvalidConfig("domain randomisation needs k >= 1".into()));
    }
    let mut rng = substream(seed, "domain-randomization");
    let draws: Vec<LatentFactors> = (0..k)
        .map(|_| {
            let mut x = [0.0; 3];
            for d in 0..3 {
                x[d] = rng.random_range(LATENT_LOWER[d]..=LATENT_UPPER[d]);
            }
            LatentFactors::from_array(x)
        })
        .collect::<Result<_>>()?;
    let mut ranker = ActionRanker::default();
    for t in tasks {
        let mut total = vec![0.0; t.action_space_size()];
        for theta in &draws {
            for (acc, s) in total.iter_mut().zip(score_actions(t, &EnvironmentSpec::ideal(*theta))) {
                *acc += s;
            }
        }
        let mean: Vec<f64> = total.iter().map(|s| s / k as f64).collect();
        ranker.tasks.push(TaskRanking::from_scores(t.id, &mean));
    }
    Ok(ranker)
}

/// Memoised goal outcomes of actions in one environment.
pub struct OutcomeOracle<'a> {
    env: EnvironmentSpec,
    tasks: &'a [TaskSpec],
    cache: Mutex<HashMap<(usize, usize), bool>>,
    rollouts: Mutex<usize>,
}

impl<'a> OutcomeOracle<'a> {
    pub fn new(env: EnvironmentSpec, tasks: &'a [TaskSpec]) -> Self {
        Self {
            env,
            tasks,
            cache: Mutex::new(HashMap::new()),
            rollouts: Mutex::new(0),
        }
    }

    pub fn env(&self) -> &EnvironmentSpec {
        &self.env
    }

    pub fn tasks(&self) -> &'a [TaskSpec] {
        self.tasks
    }

    /// Rollouts actually simulated (cache misses).
    pub fn rollouts(&self) -> usize {
        *self.rollouts.lock().expect("oracle lock")
    }

    pub fn solves(&self, task: &TaskSpec, action: usize) -> Result<bool> {
        if let Some(&hit) = self.cache.lock().expect("oracle lock").get(&(task.id, action)) {
            return Ok(hit);
        }
        let solved = match task.simulate(action, &self.env) {
            Ok(traj) => goal_achieved(task, &traj),
            Err(Error::SimulationDiverged { .. }) => false,
            Err(e) => return Err(e),
        };
        *self.rollouts.lock().expect("oracle lock") += 1;
        self.cache
            .lock()
            .expect("oracle lock")
            .insert((task.id, action), solved);
        Ok(solved)
    }

    /// Attempt number (1-based) of the first solving action within the
    /// attempt budget.
    pub fn first_solve(&self, task: &TaskSpec, order: &[usize]) -> Result<Option<usize>> {
        for (k, &a) in order.iter().take(MAX_ATTEMPTS).enumerate() {
            if self.solves(task, a)? {
                return Ok(Some(k + 1));
            }
        }
        Ok(None)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuccessReport {
    /// Fraction of tasks solved within `k` attempts, `k = 1..=100`.
    pub success: Vec<f64>,
    pub weights: Vec<f64>,
    pub auccess: f64,
    pub tasks: Vec<usize>,
    pub first_solve: Vec<Option<usize>>,
}

impl AuccessReport {
    pub fn from_first_solves(tasks: Vec<usize>, first_solve: Vec<Option<usize>>) -> Result<Self> {
        if first_solve.is_empty() || tasks.len() != first_solve.len() {
            return Err(Error::InvalidConfig(
                "AUCCESS needs one first-solve entry per task and at least one task".into(),
            ));
        }
        let weights = auccess_weights();
        let n = first_solve.len() as f64;
        let success: Vec<f64> = (1..=MAX_ATTEMPTS)
            .map(|k| first_solve.iter().filter(|f| f.is_some_and(|a| a <= k)).count() as f64 / n)
            .collect();
        let z: f64 = weights.iter().sum();
        let auccess = weights.iter().zip(&success).map(|(w, s)| w * s).sum::<f64>() / z;
        Ok(Self {
            success,
            weights,
            auccess,
            tasks,
            first_solve,
        })
    }
}

impl AuccessReport {
    /// `k,w_k,s_k` rows for plotting.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("k,w_k,s_k\n");
        for (k, (w, sk)) in self.weights.iter().zip(&self.success).enumerate() {
            s += &format!("{},{w:.12},{sk:.6}\n", k + 1);
        }
        s
    }
}

/// Follows `ranker` on each task in the oracle's environment.
pub fn auccess_with(ranker: &ActionRanker, oracle: &OutcomeOracle, tasks: &[TaskSpec]) -> Result<AuccessReport> {
    let firsts = crate::parallel::map(tasks, |t| {
        let ranking = ranker.ranking(t.id).ok_or_else(|| {
            Error::InvalidConfig(format!("ranker has no ordering for task {}", t.id))
        })?;
        oracle.first_solve(t, &ranking.order)
    });
    let firsts = firsts.into_iter().collect::<Result<Vec<_>>>()?;
    AuccessReport::from_first_solves(tasks.iter().map(|t| t.id).collect(), firsts)
}

pub fn auccess(ranker: &ActionRanker, real_env: &EnvironmentSpec, tasks: &[TaskSpec]) -> Result<AuccessReport> {
    auccess_with(ranker, &OutcomeOracle::new(*real_env, tasks), tasks)
}

/// Attempts actions in a seeded uniformly random order.
pub fn direct_ranker(tasks: &[TaskSpec], seed: u64) -> ActionRanker {
    let mut rng = substream(seed, "direct");
    ActionRanker {
        tasks: tasks
            .iter()
            .map(|t| {
                let mut order: Vec<usize> = (0..t.action_space_size()).collect();
                order.shuffle(&mut rng);
                TaskRanking {
                    task: t.id,
                    scores: vec![0.0; order.len()],
                    order,
                }
            })
            .collect(),
    }
}

pub fn baseline_direct(real_env: &EnvironmentSpec, tasks: &[TaskSpec], seed: u64) -> Result<AuccessReport> {
    auccess(&direct_ranker(tasks, seed), real_env, tasks)
}

/// Axes of a performance surface.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfaceGrid {
    pub friction: Vec<f64>,
    pub restitution: Vec<f64>,
}

impl SurfaceGrid {
    /// 6x6 over friction [0.1, 1.2] and restitution [0.1, 0.95].
    pub fn standard() -> Self {
        Self::uniform((0.1, 1.2), (0.1, 0.95), 6, 6)
    }

    pub fn uniform(friction: (f64, f64), restitution: (f64, f64), nf: usize, ne: usize) -> Self {
        let axis = |(lo, hi): (f64, f64), n: usize| -> Vec<f64> {
            if n == 1 {
                return vec![lo];
            }
            (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
        };
        Self {
            friction: axis(friction, nf),
            restitution: axis(restitution, ne),
        }
    }
}

/// Jump-start AUCCESS over a (friction, restitution) grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerformanceSurface {
    pub friction: Vec<f64>,
    pub restitution: Vec<f64>,
    /// Row-major by friction: `values[i * restitution.len() + j]`.
    pub values: Vec<f64>,
    pub proxy_damping: f64,
    pub density: f64,
}

fn bracket(axis: &[f64], x: f64) -> (usize, f64) {
    let last = axis.len() - 2;
    let i = axis.partition_point(|&a| a <= x).saturating_sub(1).min(last);
    let t = (x - axis[i]) / (axis[i + 1] - axis[i]);
    (i, t.clamp(0.0, 1.0))
}

impl PerformanceSurface {
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.restitution.len() + j]
    }

    pub fn validate(&self) -> Result<()> {
        let (nf, ne) = (self.friction.len(), self.restitution.len());
        if nf < 2 || ne < 2 {
            return Err(Error::HullTooSmall(format!(
                "surface grid is {nf}x{ne}; gradients need at least 2x2"
            )));
        }
        let increasing = |a: &[f64]| a.windows(2).all(|w| w[1] > w[0]);
        if !increasing(&self.friction) || !increasing(&self.restitution) {
            return Err(Error::InvalidConfig("surface axes must be strictly increasing".into()));
        }
        if self.values.len() != nf * ne {
            return Err(Error::InvalidConfig(format!(
                "surface has {} values for a {nf}x{ne} grid",
                self.values.len()
            )));
        }
        if self.values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidConfig("surface values must lie in [0, 1]".into()));
        }
        Ok(())
    }

    /// Bilinear interpolation; arguments are clamped into the hull.
    pub fn interpolate(&self, friction: f64, restitution: f64) -> f64 {
        let f = friction.clamp(self.friction[0], *self.friction.last().expect("non-empty"));
        let e = restitution.clamp(self.restitution[0], *self.restitution.last().expect("non-empty"));
        let (i, u) = bracket(&self.friction, f);
        let (j, v) = bracket(&self.restitution, e);
        let (a, b) = (self.at(i, j), self.at(i, j + 1));
        let (c, d) = (self.at(i + 1, j), self.at(i + 1, j + 1));
        (1.0 - u) * ((1.0 - v) * a + v * b) + u * ((1.0 - v) * c + v * d)
    }

    /// Central-difference partials `(dJ/dfriction, dJ/drestitution)` with a
    /// step of one grid cell, and whether the point had to be clamped.
    pub fn gradient(&self, friction: f64, restitution: f64) -> Result<(f64, f64, bool)> {
        self.validate()?;
        let (f0, f1) = (self.friction[0], *self.friction.last().expect("validated"));
        let (e0, e1) = (self.restitution[0], *self.restitution.last().expect("validated"));
        let f = friction.clamp(f0, f1);
        let e = restitution.clamp(e0, e1);
        let clamped = f != friction || e != restitution;
        let hf = (f1 - f0) / (self.friction.len() - 1) as f64;
        let he = (e1 - e0) / (self.restitution.len() - 1) as f64;
        let (fl, fh) = ((f - hf).max(f0), (f + hf).min(f1));
        let (el, eh) = ((e - he).max(e0), (e + he).min(e1));
        let df = (self.interpolate(fh, e) - self.interpolate(fl, e)) / (fh - fl);
        let de = (self.interpolate(f, eh) - self.interpolate(f, el)) / (eh - el);
        Ok((df, de, clamped))
    }

    /// Mean variance along restitution (one value per friction row) and along
    /// friction (one per restitution column).
    pub fn axis_variances(&self) -> (f64, f64) {
        let var = |v: &[f64]| {
            let m = v.iter().sum::<f64>() / v.len() as f64;
            v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64
        };
        let (nf, ne) = (self.friction.len(), self.restitution.len());
        let along_e = (0..nf)
            .map(|i| var(&(0..ne).map(|j| self.at(i, j)).collect::<Vec<_>>()))
            .sum::<f64>()
            / nf as f64;
        let along_f = (0..ne)
            .map(|j| var(&(0..nf).map(|i| self.at(i, j)).collect::<Vec<_>>()))
            .sum::<f64>()
            / ne as f64;
        (along_e, along_f)
    }
}

/// Evaluates the jump start of rankers trained at every grid cell, in the
/// oracle's (proxy) environment.
pub fn build_performance_surface(
    grid: &SurfaceGrid,
    oracle: &OutcomeOracle,
    density: f64,
) -> Result<PerformanceSurface> {
    let tasks = oracle.tasks();
    if tasks.is_empty() {
        return Err(Error::InvalidConfig("performance surface needs at least one task".into()));
    }
    let damping = oracle.env().damping;
    if !(damping > 0.0 && damping <= 1.0) {
        return Err(Error::InvalidEnvironment(format!(
            "proxy damping must be in (0, 1], got {damping}"
        )));
    }
    let mut values = Vec::with_capacity(grid.friction.len() * grid.restitution.len());
    for &f in &grid.friction {
        for &e in &grid.restitution {
            let theta = LatentFactors::new(density, f, e)?;
            let ranker = train_sim_ranker(&theta, tasks);
            let j = auccess_with(&ranker, oracle, tasks)?.auccess;
            log::info!("surface cell friction {f:.3} restitution {e:.3}: {j:.4}");
            values.push(j);
        }
    }
    let surface = PerformanceSurface {
        friction: grid.friction.clone(),
        restitution: grid.restitution.clone(),
        values,
        proxy_damping: damping,
        density,
    };
    surface.validate().map(|_| surface)
}
