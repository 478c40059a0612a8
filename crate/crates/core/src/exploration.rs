//! Action grouping and the exploration strategies used to pick which actions
//! to try in the real environment.

use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::physics::{LatentFactors, Trajectory};
use crate::rng::Rng;
use crate::transfer::PerformanceSurface;

/// Floor applied to each sensitivity before normalising.
pub const SENSITIVITY_FLOOR: f64 = 1e-6;

/// New contacts between a ball and another estimated-material body.
pub fn count_ball_collisions(traj: &Trajectory) -> u32 {
    traj.ball_collisions
}

/// Steps each ball spent rolling on a floor, summed over balls.
pub fn rolling_timesteps(traj: &Trajectory) -> u32 {
    traj.total_rolling_steps()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrategyKind {
    Collisions,
    Rolling,
    Random,
    Mixed,
    Gradient,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 5] = [
        StrategyKind::Collisions,
        StrategyKind::Rolling,
        StrategyKind::Random,
        StrategyKind::Mixed,
        StrategyKind::Gradient,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StrategyKind::Collisions => "collisions",
            StrategyKind::Rolling => "rolling",
            StrategyKind::Random => "random",
            StrategyKind::Mixed => "mixed",
            StrategyKind::Gradient => "gradient",
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        StrategyKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "unknown strategy `{s}` (expected collisions|rolling|random|mixed|gradient)"
                ))
            })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrategySpec {
    pub kind: StrategyKind,
    /// Required by, and only used by, the gradient strategy.
    pub surface: Option<PerformanceSurface>,
}

impl StrategySpec {
    pub fn new(kind: StrategyKind) -> Result<Self> {
        if kind == StrategyKind::Gradient {
            return Err(Error::InvalidConfig(
                "the gradient strategy needs a performance surface".into(),
            ));
        }
        Ok(Self {
            kind,
            surface: None,
        })
    }

    pub fn gradient(surface: PerformanceSurface) -> Result<Self> {
        surface.validate()?;
        Ok(Self {
            kind: StrategyKind::Gradient,
            surface: Some(surface),
        })
    }

    pub fn validate(&self) -> Result<()> {
        match (self.kind, &self.surface) {
            (StrategyKind::Gradient, None) => Err(Error::InvalidConfig(
                "the gradient strategy needs a performance surface".into(),
            )),
            (StrategyKind::Gradient, Some(s)) => s.validate(),
            _ => Ok(()),
        }
    }
}

/// Per-latent selection probabilities: rolling actions inform friction,
/// collision actions inform restitution.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionTypeProbabilities {
    pub rolling: f64,
    pub collision: f64,
}

/// `X_k / sum(X)`.
pub fn normalise_sensitivities(x: &[f64]) -> Result<Vec<f64>> {
    if x.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::InvalidConfig(format!(
            "sensitivities must be finite and non-negative, got {x:?}"
        )));
    }
    let z: f64 = x.iter().sum();
    if z <= 0.0 {
        return Err(Error::InvalidConfig("sensitivities sum to zero".into()));
    }
    Ok(x.iter().map(|v| v / z).collect())
}

/// Selection probabilities from the surface's slope at `theta`.
///
/// Returns the probabilities and whether `theta` had to be clamped into the
/// surface's hull.
pub fn gradient_action_probabilities(
    surface: &PerformanceSurface,
    theta: &LatentFactors,
) -> Result<(ActionTypeProbabilities, bool)> {
    let (df, de, clamped) = surface.gradient(theta.friction, theta.restitution)?;
    if clamped {
        log::info!(
            "estimate (friction {:.4}, restitution {:.4}) lies outside the surface; clamped",
            theta.friction,
            theta.restitution
        );
    }
    let x = [
        df.abs().max(SENSITIVITY_FLOOR),
        de.abs().max(SENSITIVITY_FLOOR),
    ];
    let p = normalise_sensitivities(&x)?;
    Ok((
        ActionTypeProbabilities {
            rolling: p[0],
            collision: p[1],
        },
        clamped,
    ))
}

/// Counters used to rank one candidate.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateStats {
    pub collisions: u32,
    pub rolling: u32,
}

impl From<&Trajectory> for CandidateStats {
    fn from(t: &Trajectory) -> Self {
        Self {
            collisions: count_ball_collisions(t),
            rolling: rolling_timesteps(t),
        }
    }
}

/// Candidate positions sorted by `key` descending, ties by position.
fn ranking(stats: &[CandidateStats], key: impl Fn(&CandidateStats) -> u32) -> Vec<usize> {
    let mut order: Vec<usize> = (0..stats.len()).collect();
    order.sort_by(|&i, &j| key(&stats[j]).cmp(&key(&stats[i])).then(i.cmp(&j)));
    order
}

struct Cursor {
    order: Vec<usize>,
    pos: usize,
}

impl Cursor {
    fn next_unused(&mut self, used: &[bool]) -> Option<usize> {
        while self.pos < self.order.len() {
            let i = self.order[self.pos];
            self.pos += 1;
            if !used[i] {
                return Some(i);
            }
        }
        None
    }
}

/// Picks `n` distinct candidate positions according to `strategy`.
///
/// `probabilities` is only read by the gradient strategy; `rng` is used by
/// the random and gradient strategies.
pub fn select_indices(
    stats: &[CandidateStats],
    kind: StrategyKind,
    probabilities: Option<&ActionTypeProbabilities>,
    n: usize,
    rng: &mut Rng,
) -> Result<Vec<usize>> {
    if n > stats.len() {
        return Err(Error::SelectionTooLarge {
            requested: n,
            available: stats.len(),
        });
    }
    let by_collisions = || Cursor {
        order: ranking(stats, |s| s.collisions),
        pos: 0,
    };
    let by_rolling = || Cursor {
        order: ranking(stats, |s| s.rolling),
        pos: 0,
    };
    let mut used = vec![false; stats.len()];
    let mut out = Vec::with_capacity(n);
    let take = |cursor: &mut Cursor, used: &mut Vec<bool>, out: &mut Vec<usize>| {
        let i = cursor.next_unused(used).expect("n <= candidates");
        used[i] = true;
        out.push(i);
    };
    match kind {
        StrategyKind::Collisions => {
            let mut c = by_collisions();
            (0..n).for_each(|_| take(&mut c, &mut used, &mut out));
        }
        StrategyKind::Rolling => {
            let mut r = by_rolling();
            (0..n).for_each(|_| take(&mut r, &mut used, &mut out));
        }
        StrategyKind::Random => {
            out = sample(rng, stats.len(), n).into_vec();
        }
        StrategyKind::Mixed => {
            let (mut c, mut r) = (by_collisions(), by_rolling());
            (0..n.div_ceil(2)).for_each(|_| take(&mut c, &mut used, &mut out));
            (0..n / 2).for_each(|_| take(&mut r, &mut used, &mut out));
        }
        StrategyKind::Gradient => {
            let p = probabilities.ok_or_else(|| {
                Error::InvalidConfig("gradient selection needs type probabilities".into())
            })?;
            let (mut c, mut r) = (by_collisions(), by_rolling());
            for _ in 0..n {
                let rolling = rng.random::<f64>() < p.rolling;
                take(if rolling { &mut r } else { &mut c }, &mut used, &mut out);
            }
        }
    }
    Ok(out)
}

/// Ranks `candidates` by their simulated trajectories and returns the `n`
/// chosen by `strategy`.
pub fn rank_and_select<T: Clone>(
    candidates: &[T],
    sim_trajs: &[Trajectory],
    kind: StrategyKind,
    probabilities: Option<&ActionTypeProbabilities>,
    n: usize,
    rng: &mut Rng,
) -> Result<Vec<T>> {
    if candidates.len() != sim_trajs.len() {
        return Err(Error::InvalidConfig(format!(
            "{} candidates but {} trajectories",
            candidates.len(),
            sim_trajs.len()
        )));
    }
    let stats: Vec<CandidateStats> = sim_trajs.iter().map(CandidateStats::from).collect();
    Ok(select_indices(&stats, kind, probabilities, n, rng)?
        .into_iter()
        .map(|i| candidates[i].clone())
        .collect())
}
