use serde::{Deserialize, Serialize};

use super::{
    is_collision_pair, BodyState, ContactEvent, ContactKind, EnvironmentSpec, Scene, Vec2, World,
    SLEEP_STEPS,
};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Vec2,
    pub max: Vec2,
}

impl Aabb {
    pub fn contains(&self, p: Vec2) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn center(&self) -> Vec2 {
        (self.min + self.max) * 0.5
    }
}

/// Stop predicate evaluated after every step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Goal {
    /// Bodies `a` and `b` touch for `steps` consecutive steps.
    ContactRun { a: usize, b: usize, steps: u32 },
    /// The center of `body` lies inside `region`.
    EnterRegion { body: usize, region: Aabb },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RolloutSpec {
    pub max_steps: usize,
    pub observe_every: usize,
    pub goal: Option<Goal>,
    /// Keep the full per-step contact log (large for long rollouts).
    pub record_contacts: bool,
}

impl RolloutSpec {
    pub fn new(max_steps: usize, observe_every: usize) -> Self {
        Self {
            max_steps,
            observe_every,
            goal: None,
            record_contacts: false,
        }
    }

    pub fn with_goal(mut self, goal: Goal) -> Self {
        self.goal = Some(goal);
        self
    }

    pub fn recording(mut self) -> Self {
        self.record_contacts = true;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub step: u32,
    /// One state per dynamic body, ordered as [`Trajectory::bodies`].
    pub states: Vec<BodyState>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    /// Scene indices of the dynamic bodies observed in each frame.
    pub bodies: Vec<usize>,
    pub frames: Vec<Frame>,
    /// Empty unless the rollout recorded contacts.
    pub contacts: Vec<ContactEvent>,
    pub contacts_recorded: bool,
    /// New contacts between a ball and another body of the estimated
    /// material (see [`is_collision_pair`]).
    pub ball_collisions: u32,
    /// Rolling steps per entry of `bodies` (always zero for non-balls).
    pub rolling_steps: Vec<u32>,
    /// Number of steps simulated.
    pub steps: u32,
    pub terminated_by_goal: bool,
    pub termination_step: Option<u32>,
    /// Longest contiguous run of the goal pair's contact, for contact-run goals.
    pub goal_contact_run: Option<u32>,
}

impl Trajectory {
    pub fn total_rolling_steps(&self) -> u32 {
        self.rolling_steps.iter().sum()
    }

    /// Position of the `slot`-th observed body in frame `frame`.
    pub fn position(&self, frame: usize, slot: usize) -> Vec2 {
        self.frames[frame].states[slot].position
    }

    pub fn slot_of(&self, body: usize) -> Option<usize> {
        self.bodies.iter().position(|&b| b == body)
    }

    /// Recomputes `(ball_collisions, rolling_steps)` from the contact log.
    pub fn recount(&self, scene: &Scene) -> (u32, Vec<u32>) {
        let mut collisions = 0;
        let mut rolling = vec![0u32; self.bodies.len()];
        let mut last_counted = vec![u32::MAX; self.bodies.len()];
        for e in &self.contacts {
            if is_ball_collision(scene, e) {
                collisions += 1;
            }
            for (slot, &body) in self.bodies.iter().enumerate() {
                if scene.bodies[body].is_ball()
                    && last_counted[slot] != e.step
                    && e.is_rolling_support(scene, body)
                {
                    last_counted[slot] = e.step;
                    rolling[slot] += 1;
                }
            }
        }
        (collisions, rolling)
    }

    /// Longest run of consecutive steps in which `a` and `b` touch, from the
    /// contact log.
    pub fn longest_contact_run(&self, a: usize, b: usize) -> u32 {
        let mut best = 0;
        let mut run = 0;
        let mut last: Option<u32> = None;
        for e in self.contacts.iter().filter(|e| e.is_pair(a, b)) {
            run = match last {
                Some(prev) if e.step == prev => run,
                Some(prev) if e.step == prev + 1 => run + 1,
                _ => 1,
            };
            last = Some(e.step);
            best = best.max(run);
        }
        best
    }
}

fn is_ball_collision(scene: &Scene, e: &ContactEvent) -> bool {
    e.kind == ContactKind::NewContact
        && is_collision_pair(&scene.bodies[e.a as usize], &scene.bodies[e.b as usize])
}

/// Runs `scene` forward under `env`, observing every `observe_every` steps.
///
/// Frames are taken at step 0, every multiple of `observe_every`, and at the
/// final step (goal termination or `max_steps`) if that is not already a
/// multiple.
pub fn rollout(scene: &Scene, env: &EnvironmentSpec, spec: &RolloutSpec) -> Result<Trajectory> {
    if spec.max_steps == 0 || spec.observe_every == 0 {
        return Err(Error::InvalidConfig(
            "rollout needs max_steps > 0 and observe_every >= 1".into(),
        ));
    }
    let mut world = World::new(scene, env)?;
    let bodies = scene.dynamic_indices();
    let mut slot_of = vec![usize::MAX; scene.bodies.len()];
    for (slot, &b) in bodies.iter().enumerate() {
        slot_of[b] = slot;
    }
    let is_ball: Vec<bool> = bodies.iter().map(|&b| scene.bodies[b].is_ball()).collect();
    let collider: Vec<bool> = scene.bodies.iter().map(|b| b.is_collider()).collect();
    let ball_body: Vec<bool> = scene.bodies.iter().map(|b| b.is_ball()).collect();
    let floor_body: Vec<bool> = scene.bodies.iter().map(|b| b.is_floor()).collect();
    let min_normal_y = super::rolling_min_normal_y();
    let observe = |w: &World, step: usize| Frame {
        step: step as u32,
        states: bodies.iter().map(|&b| w.states()[b]).collect(),
    };

    let mut traj = Trajectory {
        bodies: bodies.clone(),
        frames: vec![observe(&world, 0)],
        contacts: Vec::new(),
        contacts_recorded: spec.record_contacts,
        ball_collisions: 0,
        rolling_steps: vec![0; bodies.len()],
        steps: 0,
        terminated_by_goal: false,
        termination_step: None,
        goal_contact_run: None,
    };
    let mut run = 0u32;
    let mut best_run = 0u32;
    let mut events: Vec<ContactEvent> = Vec::with_capacity(16);
    let mut rolling_now = vec![false; bodies.len()];

    let mut quiet = 0usize;
    let mut asleep = false;
    for k in 0..spec.max_steps {
        if asleep {
            for e in events.iter_mut() {
                e.step = k as u32;
                e.kind = ContactKind::PersistingContact;
            }
        } else {
            events.clear();
            world.step(&mut events)?;
            quiet = if world.is_idle() { quiet + 1 } else { 0 };
            if quiet >= SLEEP_STEPS {
                world.freeze();
                asleep = true;
            }
        }
        rolling_now.iter_mut().for_each(|r| *r = false);
        let mut pair_touching = false;
        for e in &events {
            let (a, b) = (e.a as usize, e.b as usize);
            if e.kind == ContactKind::NewContact
                && (ball_body[a] || ball_body[b])
                && collider[a]
                && collider[b]
            {
                traj.ball_collisions += 1;
            }
            if e.kind == ContactKind::PersistingContact && e.normal.y.abs() >= min_normal_y {
                for (body, other) in [(a, b), (b, a)] {
                    let slot = slot_of[body];
                    if slot != usize::MAX && is_ball[slot] && floor_body[other] {
                        rolling_now[slot] = true;
                    }
                }
            }
            if let Some(Goal::ContactRun { a, b, .. }) = spec.goal {
                pair_touching |= e.is_pair(a, b);
            }
        }
        for (slot, r) in rolling_now.iter().enumerate() {
            if *r {
                traj.rolling_steps[slot] += 1;
            }
        }
        if spec.record_contacts {
            traj.contacts.extend_from_slice(&events);
        }

        let done = match spec.goal {
            Some(Goal::ContactRun { steps, .. }) => {
                run = if pair_touching { run + 1 } else { 0 };
                best_run = best_run.max(run);
                run >= steps
            }
            Some(Goal::EnterRegion { body, region }) => {
                region.contains(world.states()[body].position)
            }
            None => false,
        };
        let s = k + 1;
        if done || s % spec.observe_every == 0 || s == spec.max_steps {
            traj.frames.push(observe(&world, s));
        }
        traj.steps = s as u32;
        if done {
            traj.terminated_by_goal = true;
            traj.termination_step = Some(s as u32);
            break;
        }
    }
    if matches!(spec.goal, Some(Goal::ContactRun { .. })) {
        traj.goal_contact_run = Some(best_run);
    }
    Ok(traj)
}
