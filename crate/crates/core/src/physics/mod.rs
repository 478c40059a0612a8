//! Deterministic fixed-timestep 2D rigid-body simulation.
//!
//! Circles are the only dynamic shape; segments (capsules with a thickness)
//! make up static scenery. Contacts are resolved with sequential impulses:
//! restitution and Coulomb friction act on the real velocities, while
//! penetration is removed through a separate pseudo-velocity pass so that it
//! never feeds back into the bounce.

mod dump;
mod rollout;
mod vec2;
mod world;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use dump::{read_trajectory_dump, write_trajectory_dump, DumpRecord, DumpSummary};
pub use rollout::{rollout, Aabb, Frame, Goal, RolloutSpec, Trajectory};
pub use vec2::Vec2;
pub use world::{step, World};

/// Fixed timestep used by every task schedule.
pub const DEFAULT_DT: f64 = 1.0 / 240.0;
pub const DEFAULT_GRAVITY: Vec2 = Vec2::new(0.0, -9.8);
/// Fraction of the penetration beyond [`PENETRATION_SLOP`] removed per step.
pub const BAUMGARTE: f64 = 0.2;
pub const PENETRATION_SLOP: f64 = 0.01;
pub const VELOCITY_ITERATIONS: usize = 10;
/// Approach speeds below this are treated as resting contact (no bounce).
pub const RESTITUTION_THRESHOLD: f64 = 0.2;
pub(crate) fn rolling_min_normal_y() -> f64 {
    ROLLING_MAX_TILT_DEG.to_radians().cos()
}

/// Bodies slower than these for [`SLEEP_STEPS`] consecutive steps put the
/// whole world to sleep: states freeze and the last contact set repeats.
pub const SLEEP_LINEAR_SPEED: f64 = 0.005;
pub const SLEEP_ANGULAR_SPEED: f64 = 0.02;
pub const SLEEP_STEPS: usize = 60;

/// A floor contact counts as rolling when its normal is within this many
/// degrees of vertical.
pub const ROLLING_MAX_TILT_DEG: f64 = 30.0;

/// The latent physical factors shared by every estimated object in a scene.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatentFactors {
    pub density: f64,
    pub friction: f64,
    pub restitution: f64,
}

impl LatentFactors {
    pub fn new(density: f64, friction: f64, restitution: f64) -> Result<Self> {
        let l = Self {
            density,
            friction,
            restitution,
        };
        l.validate()?;
        Ok(l)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.density.is_finite() && self.density > 0.0) {
            return Err(Error::InvalidLatents(format!(
                "density must be > 0, got {}",
                self.density
            )));
        }
        if !(self.friction.is_finite() && self.friction >= 0.0) {
            return Err(Error::InvalidLatents(format!(
                "friction must be >= 0, got {}",
                self.friction
            )));
        }
        if !(0.0..=1.0).contains(&self.restitution) {
            return Err(Error::InvalidLatents(format!(
                "restitution must lie in [0, 1], got {}",
                self.restitution
            )));
        }
        Ok(())
    }

    pub fn to_array(&self) -> [f64; 3] {
        [self.density, self.friction, self.restitution]
    }

    pub fn from_array(a: [f64; 3]) -> Result<Self> {
        Self::new(a[0], a[1], a[2])
    }
}

/// Latents plus the unmodelled drag and the fixed world constants.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentSpec {
    pub latents: LatentFactors,
    /// Per-second velocity retention: 1 is no drag, 0.9 loses 10% per second.
    pub damping: f64,
    pub gravity: Vec2,
    pub dt: f64,
}

impl EnvironmentSpec {
    pub fn new(latents: LatentFactors, damping: f64) -> Result<Self> {
        let env = Self {
            latents,
            damping,
            gravity: DEFAULT_GRAVITY,
            dt: DEFAULT_DT,
        };
        env.validate()?;
        Ok(env)
    }

    /// Drag-free simulator with the given latents.
    pub fn ideal(latents: LatentFactors) -> Self {
        Self {
            latents,
            damping: 1.0,
            gravity: DEFAULT_GRAVITY,
            dt: DEFAULT_DT,
        }
    }

    pub fn with_latents(&self, latents: LatentFactors) -> Self {
        Self { latents, ..*self }
    }

    pub fn validate(&self) -> Result<()> {
        self.latents.validate()?;
        if !(0.0..=1.0).contains(&self.damping) {
            return Err(Error::InvalidEnvironment(format!(
                "damping must lie in [0, 1], got {}",
                self.damping
            )));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidEnvironment(format!(
                "dt must be > 0, got {}",
                self.dt
            )));
        }
        if !self.gravity.is_finite() {
            return Err(Error::InvalidEnvironment("gravity must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    Circle { radius: f64 },
    /// Capsule from `p1` to `p2` in world coordinates (relative to the body
    /// position) with full width `thickness`.
    Segment { p1: Vec2, p2: Vec2, thickness: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Motion {
    Static,
    Dynamic,
}

/// Known material for scenery whose factors are not being estimated.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaterialOverride {
    pub friction: f64,
    pub restitution: f64,
    /// Only meaningful for dynamic bodies; falls back to the latent density.
    #[serde(default)]
    pub density: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BodyDef {
    pub shape: Shape,
    pub motion: Motion,
    pub role: String,
    #[serde(default)]
    pub material: Option<MaterialOverride>,
}

impl BodyDef {
    pub fn dynamic_circle(role: &str, radius: f64) -> Self {
        Self {
            shape: Shape::Circle { radius },
            motion: Motion::Dynamic,
            role: role.to_string(),
            material: None,
        }
    }

    pub fn static_segment(role: &str, p1: Vec2, p2: Vec2, thickness: f64) -> Self {
        Self {
            shape: Shape::Segment { p1, p2, thickness },
            motion: Motion::Static,
            role: role.to_string(),
            material: None,
        }
    }

    pub fn with_material(mut self, friction: f64, restitution: f64) -> Self {
        self.material = Some(MaterialOverride {
            friction,
            restitution,
            density: None,
        });
        self
    }

    pub fn is_dynamic(&self) -> bool {
        self.motion == Motion::Dynamic
    }

    pub fn is_ball(&self) -> bool {
        is_ball_role(&self.role)
    }

    pub fn is_floor(&self) -> bool {
        is_floor_role(&self.role)
    }

    /// Non-floor body made of the estimated material (no override). Contacts
    /// between a ball and such a body count as collisions.
    pub fn is_collider(&self) -> bool {
        self.is_ball() || (self.material.is_none() && !self.is_floor())
    }
}

/// Whether a new contact between bodies `a` and `b` counts as a collision.
pub fn is_collision_pair(a: &BodyDef, b: &BodyDef) -> bool {
    (a.is_ball() || b.is_ball()) && a.is_collider() && b.is_collider()
}

pub fn is_ball_role(role: &str) -> bool {
    role.starts_with("ball")
}

pub fn is_floor_role(role: &str) -> bool {
    role.starts_with("floor")
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BodyState {
    pub position: Vec2,
    pub velocity: Vec2,
    pub angle: f64,
    pub angular_velocity: f64,
}

impl BodyState {
    pub fn at(position: Vec2) -> Self {
        Self {
            position,
            ..Self::default()
        }
    }

    pub fn moving(position: Vec2, velocity: Vec2) -> Self {
        Self {
            position,
            velocity,
            ..Self::default()
        }
    }

    pub fn is_finite(&self) -> bool {
        self.position.is_finite()
            && self.velocity.is_finite()
            && self.angle.is_finite()
            && self.angular_velocity.is_finite()
    }
}

/// Body definitions plus one initial state per body (static bodies included).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub bodies: Vec<BodyDef>,
    pub initial: Vec<BodyState>,
}

impl Scene {
    pub fn new() -> Self {
        Self {
            bodies: Vec::new(),
            initial: Vec::new(),
        }
    }

    /// Appends a body and returns its index.
    pub fn add(&mut self, body: BodyDef, state: BodyState) -> usize {
        self.bodies.push(body);
        self.initial.push(state);
        self.bodies.len() - 1
    }

    pub fn find(&self, role: &str) -> Option<usize> {
        self.bodies.iter().position(|b| b.role == role)
    }

    pub fn dynamic_indices(&self) -> Vec<usize> {
        (0..self.bodies.len())
            .filter(|&i| self.bodies[i].is_dynamic())
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.bodies.len() != self.initial.len() {
            return Err(Error::InvalidScene(format!(
                "{} bodies but {} initial states",
                self.bodies.len(),
                self.initial.len()
            )));
        }
        if self.bodies.len() > u16::MAX as usize {
            return Err(Error::InvalidScene("too many bodies".into()));
        }
        for (index, (body, state)) in self.bodies.iter().zip(&self.initial).enumerate() {
            let invalid = |reason: &str| Error::InvalidBody {
                index,
                role: body.role.clone(),
                reason: reason.to_string(),
            };
            match body.shape {
                Shape::Circle { radius } => {
                    if !(radius.is_finite() && radius > 0.0) {
                        return Err(invalid("radius must be > 0"));
                    }
                }
                Shape::Segment { p1, p2, thickness } => {
                    if !(p1.is_finite() && p2.is_finite()) || p1 == p2 {
                        return Err(invalid("segment endpoints must be finite and distinct"));
                    }
                    if !(thickness.is_finite() && thickness >= 0.0) {
                        return Err(invalid("segment thickness must be >= 0"));
                    }
                    if body.is_dynamic() {
                        return Err(invalid("segments must be static"));
                    }
                }
            }
            if !state.is_finite() {
                return Err(invalid("initial state must be finite"));
            }
            if !body.is_dynamic() && (state.velocity != Vec2::ZERO || state.angular_velocity != 0.0)
            {
                return Err(invalid("static bodies cannot move"));
            }
            if let Some(m) = body.material {
                if !(m.friction.is_finite() && m.friction >= 0.0)
                    || !(0.0..=1.0).contains(&m.restitution)
                    || m.density.is_some_and(|d| !(d.is_finite() && d > 0.0))
                {
                    return Err(invalid("material override out of range"));
                }
            }
        }
        Ok(())
    }
}

impl Default for Scene {
    fn default() -> Self {
        Self::new()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContactKind {
    NewContact,
    PersistingContact,
}

/// One resolved contact. `a < b` are body indices into the scene.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContactEvent {
    pub step: u32,
    pub a: u16,
    pub b: u16,
    /// Accumulated normal impulse, always >= 0.
    pub impulse: f64,
    /// Unit normal pointing from `a` to `b`.
    pub normal: Vec2,
    pub kind: ContactKind,
}

impl ContactEvent {
    pub fn involves(&self, body: usize) -> bool {
        self.a as usize == body || self.b as usize == body
    }

    pub fn other(&self, body: usize) -> Option<usize> {
        if self.a as usize == body {
            Some(self.b as usize)
        } else if self.b as usize == body {
            Some(self.a as usize)
        } else {
            None
        }
    }

    pub fn is_pair(&self, x: usize, y: usize) -> bool {
        let (lo, hi) = if x < y { (x, y) } else { (y, x) };
        self.a as usize == lo && self.b as usize == hi
    }

    /// Whether this is a near-vertical floor contact for `body`.
    pub fn is_rolling_support(&self, scene: &Scene, body: usize) -> bool {
        self.kind == ContactKind::PersistingContact
            && self
                .other(body)
                .is_some_and(|o| scene.bodies[o].is_floor())
            && self.normal.y.abs() >= rolling_min_normal_y()
    }
}
