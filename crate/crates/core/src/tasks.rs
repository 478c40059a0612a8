//! Basketball and Bowling task families: scene builders, discretised action
//! spaces, goal predicates and progress scores.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::physics::{
    rollout, Aabb, BodyDef, BodyState, EnvironmentSpec, Goal, LatentFactors, RolloutSpec, Scene,
    Trajectory, Vec2,
};
use crate::rng::substream;

/// Seed from which every task's layout variation is drawn.
pub const TASK_LAYOUT_SEED: u64 = 0x7a5c_0001;

/// Steps of uninterrupted green/blue contact that solve a Bowling task
/// (3 s at 240 Hz).
pub const BOWLING_CONTACT_STEPS: u32 = 720;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Basketball,
    Bowling,
}

impl Family {
    pub fn task_count(self) -> usize {
        match self {
            Family::Basketball => 25,
            Family::Bowling => 100,
        }
    }

    /// (train, validation, test) sizes; ids are assigned in that order.
    pub fn split_sizes(self) -> (usize, usize, usize) {
        match self {
            Family::Basketball => (15, 5, 5),
            Family::Bowling => (60, 20, 20),
        }
    }

    pub fn split_of(self, id: usize) -> Split {
        let (train, val, _) = self.split_sizes();
        if id < train {
            Split::Train
        } else if id < train + val {
            Split::Validation
        } else {
            Split::Test
        }
    }

    /// Latents of the "real" objects.
    pub fn true_latents(self) -> LatentFactors {
        match self {
            Family::Basketball => LatentFactors {
                density: 0.25,
                friction: 0.2,
                restitution: 0.7,
            },
            Family::Bowling => LatentFactors {
                density: 0.25,
                friction: 0.707,
                restitution: 0.447,
            },
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Family::Basketball => "basketball",
            Family::Bowling => "bowling",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "basketball" => Ok(Family::Basketball),
            "bowling" => Ok(Family::Bowling),
            other => Err(Error::UnknownFamily(other.to_string())),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Full,
    Desk,
}

impl FromStr for Scale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Scale::Full),
            "desk" => Ok(Scale::Desk),
            other => Err(Error::InvalidConfig(format!("unknown scale `{other}`"))),
        }
    }
}

impl fmt::Display for Scale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scale::Full => "full",
            Scale::Desk => "desk",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "validation" => Ok(Split::Validation),
            "test" => Ok(Split::Test),
            other => Err(Error::InvalidConfig(format!("unknown split `{other}`"))),
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        })
    }
}

/// Layout constants. None of these are recoverable from task images, so
/// they are fixed here and shared by both scales.
pub mod layout {
    pub const WORLD_WIDTH: f64 = 10.0;
    pub const WALL_HEIGHT: f64 = 12.0;
    pub const SEGMENT_THICKNESS: f64 = 0.1;

    pub const BASKETBALL_FLOOR_FRICTION: f64 = 0.5;
    pub const BASKETBALL_FLOOR_RESTITUTION: f64 = 0.0;
    pub const BASKETBALL_WALL_FRICTION: f64 = 0.5;
    pub const BASKETBALL_WALL_RESTITUTION: f64 = 0.0;
    pub const BASKET_X_RANGE: (f64, f64) = (4.5, 6.5);
    pub const BASKET_HALF_WIDTH: f64 = 0.3;
    pub const BASKET_FLOOR_Y: f64 = 0.0;
    pub const BASKET_HEIGHT: f64 = 0.5;
    pub const BALL_RADIUS: f64 = 0.2;
    pub const SPAWN_HEIGHT: f64 = 9.0;
    pub const SPAWN_X_RANGE: (f64, f64) = (0.5, 4.5);
    pub const PLANK_LENGTH: f64 = 1.6;
    pub const PLANK_ANGLE_DEG: f64 = 40.0;
    pub const PLANK_X_RANGE: (f64, f64) = (0.8, 3.6);
    pub const PLANK_Y_RANGE: (f64, f64) = (1.5, 3.0);

    pub const GROUND_Y: f64 = 1.0;
    pub const PIT_HALF_WIDTH: f64 = 1.0;
    pub const PIT_DEPTH: f64 = 0.15;
    /// Drop of the ground between the pit's right rim and the right wall.
    pub const RUNOFF_DROP: f64 = 0.8;
    pub const PIT_X_RANGE: (f64, f64) = (5.2, 7.5);
    /// Distance from the green ball's center to the pit's left rim.
    pub const GREEN_GAP_RANGE: (f64, f64) = (1.0, 3.5);
    pub const GREEN_RADIUS_RANGE: (f64, f64) = (0.3, 0.5);
    pub const BLUE_RADIUS_RANGE: (f64, f64) = (0.3, 0.5);
    pub const BOWLING_SCENERY_FRICTION: f64 = 0.15;
    pub const BOWLING_SCENERY_RESTITUTION: f64 = 0.5;
    pub const RED_X_RANGE: (f64, f64) = (0.5, 5.5);
    pub const RED_Y_RANGE: (f64, f64) = (4.6, 8.6);
    pub const RED_RADIUS_RANGE: (f64, f64) = (0.2, 0.6);
}


/// Shape of a family's discretised action space.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ActionGrid {
    /// `index = ball * (plank_cols * plank_rows) + plank_col * plank_rows + plank_row`
    Basketball {
        ball_positions: usize,
        plank_cols: usize,
        plank_rows: usize,
    },
    /// Row-major over (x, y, radius).
    Bowling { xs: usize, ys: usize, radii: usize },
}

impl ActionGrid {
    pub fn new(family: Family, scale: Scale) -> Self {
        match (family, scale) {
            (Family::Basketball, Scale::Full) => ActionGrid::Basketball {
                ball_positions: 200,
                plank_cols: 20,
                plank_rows: 10,
            },
            (Family::Basketball, Scale::Desk) => ActionGrid::Basketball {
                ball_positions: 20,
                plank_cols: 5,
                plank_rows: 4,
            },
            (Family::Bowling, Scale::Full) => ActionGrid::Bowling {
                xs: 50,
                ys: 50,
                radii: 20,
            },
            (Family::Bowling, Scale::Desk) => ActionGrid::Bowling {
                xs: 10,
                ys: 10,
                radii: 5,
            },
        }
    }

    pub fn size(&self) -> usize {
        match *self {
            ActionGrid::Basketball {
                ball_positions,
                plank_cols,
                plank_rows,
            } => ball_positions * plank_cols * plank_rows,
            ActionGrid::Bowling { xs, ys, radii } => xs * ys * radii,
        }
    }
}

/// `i`-th of `n` evenly spaced points over `range`, endpoints included.
fn grid_point(range: (f64, f64), i: usize, n: usize) -> f64 {
    if n <= 1 {
        return 0.5 * (range.0 + range.1);
    }
    range.0 + (range.1 - range.0) * i as f64 / (n - 1) as f64
}

fn grid_index(range: (f64, f64), value: f64, n: usize) -> Option<usize> {
    (0..n).find(|&i| (grid_point(range, i, n) - value).abs() <= 1e-9)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum ActionParams {
    Basketball { ball_x: f64, plank_center: Vec2 },
    Bowling { x: f64, y: f64, radius: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub index: usize,
    pub params: ActionParams,
}

/// Per-task layout variation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum TaskParams {
    Basketball {
        basket_x: f64,
    },
    Bowling {
        pit_x: f64,
        green_gap: f64,
        green_radius: f64,
        blue_radius: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub family: Family,
    pub id: usize,
    pub scale: Scale,
    pub split: Split,
    pub params: TaskParams,
    pub grid: ActionGrid,
    /// Scenery plus the pre-placed dynamic objects; the action adds the rest.
    pub scene: Scene,
    pub max_steps: usize,
    pub observe_every: usize,
}

fn scenery(role: &str, p1: Vec2, p2: Vec2, friction: f64, restitution: f64) -> BodyDef {
    BodyDef::static_segment(role, p1, p2, layout::SEGMENT_THICKNESS)
        .with_material(friction, restitution)
}

fn uniform(rng: &mut crate::rng::Rng, range: (f64, f64)) -> f64 {
    range.0 + (range.1 - range.0) * rng.random::<f64>()
}

/// Builds task `id` of `family`. The scene depends only on `(family, id)`;
/// `scale` selects the action-space resolution.
pub fn build_task(family: Family, id: usize, scale: Scale) -> Result<TaskSpec> {
    use layout::*;
    let count = family.task_count();
    if id >= count {
        return Err(Error::TaskOutOfRange {
            family: family.to_string(),
            id,
            count,
        });
    }
    let mut rng = substream(TASK_LAYOUT_SEED, &format!("{family}-{id}"));
    let mut scene = Scene::new();
    let fixed = BodyState::default();
    let (params, max_steps, observe_every) = match family {
        Family::Basketball => {
            let basket_x = uniform(&mut rng, BASKET_X_RANGE);
            let (f, e) = (BASKETBALL_FLOOR_FRICTION, BASKETBALL_FLOOR_RESTITUTION);
            scene.add(
                scenery("floor", Vec2::new(0.0, 0.0), Vec2::new(WORLD_WIDTH, 0.0), f, e),
                fixed,
            );
            let (f, e) = (BASKETBALL_WALL_FRICTION, BASKETBALL_WALL_RESTITUTION);
            for x in [0.0, WORLD_WIDTH] {
                scene.add(
                    scenery("wall", Vec2::new(x, 0.0), Vec2::new(x, WALL_HEIGHT), f, e),
                    fixed,
                );
            }
            let (left, right) = (basket_x - BASKET_HALF_WIDTH, basket_x + BASKET_HALF_WIDTH);
            let top = BASKET_FLOOR_Y + BASKET_HEIGHT;
            scene.add(
                scenery(
                    "basket",
                    Vec2::new(left, BASKET_FLOOR_Y),
                    Vec2::new(right, BASKET_FLOOR_Y),
                    f,
                    e,
                ),
                fixed,
            );
            for x in [left, right] {
                scene.add(
                    scenery("basket", Vec2::new(x, BASKET_FLOOR_Y), Vec2::new(x, top), f, e),
                    fixed,
                );
            }
            (TaskParams::Basketball { basket_x }, 500, 50)
        }
        Family::Bowling => {
            let pit_x = uniform(&mut rng, PIT_X_RANGE);
            let green_gap = uniform(&mut rng, GREEN_GAP_RANGE);
            let green_radius = uniform(&mut rng, GREEN_RADIUS_RANGE);
            let blue_radius = uniform(&mut rng, BLUE_RADIUS_RANGE);
            let (f, e) = (BOWLING_SCENERY_FRICTION, BOWLING_SCENERY_RESTITUTION);
            let rim_l = Vec2::new(pit_x - PIT_HALF_WIDTH, GROUND_Y);
            let rim_r = Vec2::new(pit_x + PIT_HALF_WIDTH, GROUND_Y);
            let bottom = Vec2::new(pit_x, GROUND_Y - PIT_DEPTH);
            for (p1, p2) in [
                (Vec2::new(0.0, GROUND_Y), rim_l),
                (rim_l, bottom),
                (bottom, rim_r),
                (rim_r, Vec2::new(WORLD_WIDTH, GROUND_Y - RUNOFF_DROP)),
            ] {
                scene.add(scenery("floor", p1, p2, f, e), fixed);
            }
            for x in [0.0, WORLD_WIDTH] {
                scene.add(
                    scenery("wall", Vec2::new(x, 0.0), Vec2::new(x, WALL_HEIGHT), f, e),
                    fixed,
                );
            }
            let half = 0.5 * SEGMENT_THICKNESS;
            scene.add(
                BodyDef::dynamic_circle("ball-green", green_radius),
                BodyState::at(Vec2::new(rim_l.x - green_gap, GROUND_Y + half + green_radius)),
            );
            let cos = PIT_HALF_WIDTH / PIT_HALF_WIDTH.hypot(PIT_DEPTH);
            scene.add(
                BodyDef::dynamic_circle("ball-blue", blue_radius),
                BodyState::at(bottom + Vec2::new(0.0, (blue_radius + half) / cos)),
            );
            (
                TaskParams::Bowling {
                    pit_x,
                    green_gap,
                    green_radius,
                    blue_radius,
                },
                4000,
                60,
            )
        }
    };
    Ok(TaskSpec {
        family,
        id,
        scale,
        split: family.split_of(id),
        params,
        grid: ActionGrid::new(family, scale),
        scene,
        max_steps,
        observe_every,
    })
}

/// Every task of `family`, optionally restricted to one split.
pub fn build_tasks(family: Family, scale: Scale, split: Option<Split>) -> Result<Vec<TaskSpec>> {
    (0..family.task_count())
        .filter(|&id| split.is_none_or(|s| family.split_of(id) == s))
        .map(|id| build_task(family, id, scale))
        .collect()
}

impl TaskSpec {
    pub fn action_space_size(&self) -> usize {
        self.grid.size()
    }

    pub fn decode_action(&self, index: usize) -> Result<Action> {
        use layout::*;
        let size = self.action_space_size();
        if index >= size {
            return Err(Error::ActionOutOfRange { index, size });
        }
        let params = match self.grid {
            ActionGrid::Basketball {
                ball_positions,
                plank_cols,
                plank_rows,
            } => {
                let planks = plank_cols * plank_rows;
                let (ball, plank) = (index / planks, index % planks);
                let (col, row) = (plank / plank_rows, plank % plank_rows);
                ActionParams::Basketball {
                    ball_x: grid_point(SPAWN_X_RANGE, ball, ball_positions),
                    plank_center: Vec2::new(
                        grid_point(PLANK_X_RANGE, col, plank_cols),
                        grid_point(PLANK_Y_RANGE, row, plank_rows),
                    ),
                }
            }
            ActionGrid::Bowling { xs, ys, radii } => {
                let (ix, rest) = (index / (ys * radii), index % (ys * radii));
                let (iy, ir) = (rest / radii, rest % radii);
                ActionParams::Bowling {
                    x: grid_point(RED_X_RANGE, ix, xs),
                    y: grid_point(RED_Y_RANGE, iy, ys),
                    radius: grid_point(RED_RADIUS_RANGE, ir, radii),
                }
            }
        };
        Ok(Action { index, params })
    }

    /// Inverse of [`decode_action`](Self::decode_action) on grid points.
    pub fn encode_action(&self, params: &ActionParams) -> Result<usize> {
        use layout::*;
        let off_grid = || Error::InvalidConfig(format!("action {params:?} is not on the grid"));
        match (self.grid, params) {
            (
                ActionGrid::Basketball {
                    ball_positions,
                    plank_cols,
                    plank_rows,
                },
                ActionParams::Basketball {
                    ball_x,
                    plank_center,
                },
            ) => {
                let ball = grid_index(SPAWN_X_RANGE, *ball_x, ball_positions).ok_or_else(off_grid)?;
                let col = grid_index(PLANK_X_RANGE, plank_center.x, plank_cols).ok_or_else(off_grid)?;
                let row = grid_index(PLANK_Y_RANGE, plank_center.y, plank_rows).ok_or_else(off_grid)?;
                Ok(ball * plank_cols * plank_rows + col * plank_rows + row)
            }
            (ActionGrid::Bowling { xs, ys, radii }, ActionParams::Bowling { x, y, radius }) => {
                let ix = grid_index(RED_X_RANGE, *x, xs).ok_or_else(off_grid)?;
                let iy = grid_index(RED_Y_RANGE, *y, ys).ok_or_else(off_grid)?;
                let ir = grid_index(RED_RADIUS_RANGE, *radius, radii).ok_or_else(off_grid)?;
                Ok((ix * ys + iy) * radii + ir)
            }
            _ => Err(off_grid()),
        }
    }

    /// Scene with the action's objects placed.
    pub fn scene_for(&self, action: &Action) -> Scene {
        use layout::*;
        let mut scene = self.scene.clone();
        match action.params {
            ActionParams::Basketball {
                ball_x,
                plank_center,
            } => {
                let (sin, cos) = PLANK_ANGLE_DEG.to_radians().sin_cos();
                let half = Vec2::new(cos, -sin) * (0.5 * PLANK_LENGTH);
                // Falls to the right: a ball dropped on it is lobbed towards the basket.
                scene.add(
                    BodyDef::static_segment(
                        "plank",
                        -half,
                        half,
                        SEGMENT_THICKNESS,
                    ),
                    BodyState::at(plank_center),
                );
                scene.add(
                    BodyDef::dynamic_circle("ball", BALL_RADIUS),
                    BodyState::at(Vec2::new(ball_x, SPAWN_HEIGHT)),
                );
            }
            ActionParams::Bowling { x, y, radius } => {
                scene.add(
                    BodyDef::dynamic_circle("ball-red", radius),
                    BodyState::at(Vec2::new(x, y)),
                );
            }
        }
        scene
    }

    /// Interior of the basket; entering it solves a Basketball task.
    pub fn basket_region(&self) -> Option<Aabb> {
        use layout::*;
        match self.params {
            TaskParams::Basketball { basket_x } => {
                let inner = BASKET_HALF_WIDTH - 0.5 * SEGMENT_THICKNESS;
                Some(Aabb {
                    min: Vec2::new(basket_x - inner, BASKET_FLOOR_Y + 0.5 * SEGMENT_THICKNESS),
                    max: Vec2::new(basket_x + inner, BASKET_FLOOR_Y + BASKET_HEIGHT),
                })
            }
            TaskParams::Bowling { .. } => None,
        }
    }

    fn goal(&self, scene: &Scene) -> Goal {
        match self.family {
            Family::Basketball => Goal::EnterRegion {
                body: scene.find("ball").expect("basketball scene has a ball"),
                region: self.basket_region().expect("basketball task"),
            },
            Family::Bowling => Goal::ContactRun {
                a: scene.find("ball-green").expect("bowling scene has green"),
                b: scene.find("ball-blue").expect("bowling scene has blue"),
                steps: BOWLING_CONTACT_STEPS,
            },
        }
    }

    pub fn rollout_spec(&self, scene: &Scene, record_contacts: bool) -> RolloutSpec {
        RolloutSpec {
            max_steps: self.max_steps,
            observe_every: self.observe_every,
            goal: Some(self.goal(scene)),
            record_contacts,
        }
    }

    /// Rolls out action `index` in `env`.
    pub fn simulate(&self, index: usize, env: &EnvironmentSpec) -> Result<Trajectory> {
        self.simulate_with(index, env, false, None)
    }

    /// Like [`simulate`](Self::simulate), optionally recording contacts and
    /// capping the number of steps (never beyond the task schedule).
    pub fn simulate_with(
        &self,
        index: usize,
        env: &EnvironmentSpec,
        record_contacts: bool,
        max_steps: Option<usize>,
    ) -> Result<Trajectory> {
        let action = self.decode_action(index)?;
        let scene = self.scene_for(&action);
        let mut spec = self.rollout_spec(&scene, record_contacts);
        if let Some(cap) = max_steps {
            spec.max_steps = spec.max_steps.min(cap.max(1));
        }
        rollout(&scene, env, &spec)
    }

    /// Body indices of (green, blue) for Bowling tasks.
    fn bowling_pair(&self) -> Option<(usize, usize)> {
        match self.family {
            Family::Bowling => Some((
                self.scene.find("ball-green")?,
                self.scene.find("ball-blue")?,
            )),
            Family::Basketball => None,
        }
    }

    /// Scene index of the ball whose center must enter the basket. The ball is
    /// the last body added by every basketball action.
    fn basketball_ball(&self) -> usize {
        self.scene.bodies.len() + 1
    }
}

fn longest_goal_run(task: &TaskSpec, traj: &Trajectory) -> u32 {
    let Some((green, blue)) = task.bowling_pair() else {
        return 0;
    };
    match traj.goal_contact_run {
        Some(run) if !traj.contacts_recorded => run,
        Some(run) => run.max(traj.longest_contact_run(green, blue)),
        None => traj.longest_contact_run(green, blue),
    }
}

fn basket_distances<'t>(task: &TaskSpec, traj: &'t Trajectory) -> impl Iterator<Item = (Vec2, f64)> + 't {
    let region = task.basket_region();
    let slot = traj.slot_of(task.basketball_ball());
    traj.frames.iter().filter_map(move |f| {
        let (region, slot) = (region?, slot?);
        let p = f.states[slot].position;
        Some((p, (p - region.center()).length()))
    })
}

/// Whether `traj` (a rollout of this task's scene) solves the task.
pub fn goal_achieved(task: &TaskSpec, traj: &Trajectory) -> bool {
    match task.family {
        Family::Bowling => longest_goal_run(task, traj) >= BOWLING_CONTACT_STEPS,
        Family::Basketball => {
            let region = task.basket_region().expect("basketball task");
            basket_distances(task, traj).any(|(p, _)| region.contains(p))
        }
    }
}

/// Ranking signal in which higher is better and exactly 1.0 means solved.
pub fn progress_score(task: &TaskSpec, traj: &Trajectory) -> f64 {
    if goal_achieved(task, traj) {
        return 1.0;
    }
    match task.family {
        Family::Bowling => {
            longest_goal_run(task, traj) as f64 / BOWLING_CONTACT_STEPS as f64
        }
        Family::Basketball => -basket_distances(task, traj)
            .map(|(_, d)| d)
            .fold(f64::INFINITY, f64::min),
    }
}

/// One line of a task manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub family: Family,
    pub id: usize,
    pub split: Split,
    pub scale: Scale,
    pub action_space_size: usize,
    pub params: TaskParams,
}

impl From<&TaskSpec> for ManifestEntry {
    fn from(t: &TaskSpec) -> Self {
        Self {
            family: t.family,
            id: t.id,
            split: t.split,
            scale: t.scale,
            action_space_size: t.action_space_size(),
            params: t.params,
        }
    }
}

/// Writes one JSON line per task.
pub fn write_manifest<W: Write>(out: &mut W, tasks: &[TaskSpec]) -> Result<()> {
    for t in tasks {
        writeln!(out, "{}", serde_json::to_string(&ManifestEntry::from(t))?)?;
    }
    Ok(())
}

/// Reads a manifest and rebuilds its tasks, checking that every recorded
/// layout still matches the builder.
pub fn read_manifest<R: BufRead>(input: R) -> Result<Vec<TaskSpec>> {
    let mut tasks = Vec::new();
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let entry: ManifestEntry = serde_json::from_str(&line)?;
        let task = build_task(entry.family, entry.id, entry.scale)?;
        if ManifestEntry::from(&task) != entry {
            return Err(Error::Parse(format!(
                "manifest entry for {} task {} does not match its builder",
                entry.family, entry.id
            )));
        }
        tasks.push(task);
    }
    Ok(tasks)
}
