use super::{
    BodyState, ContactEvent, ContactKind, EnvironmentSpec, Scene, Shape, Vec2, BAUMGARTE,
    PENETRATION_SLOP, RESTITUTION_THRESHOLD, SLEEP_ANGULAR_SPEED, SLEEP_LINEAR_SPEED,
    VELOCITY_ITERATIONS,
};
use crate::error::{Error, Result};

/// Sweeps stop early once no impulse changes by more than this.
const SOLVER_CONVERGED: f64 = 1e-9;

#[derive(Clone, Copy, Debug)]
struct MassProps {
    inv_mass: f64,
    inv_inertia: f64,
    friction: f64,
    restitution: f64,
}

/// Candidate colliding pair; at least one side is dynamic.
#[derive(Clone, Copy, Debug)]
struct Pair {
    a: usize,
    b: usize,
}

#[derive(Clone, Copy, Debug)]
struct Contact {
    pair: usize,
    a: usize,
    b: usize,
    normal: Vec2,
    ra: Vec2,
    rb: Vec2,
    normal_mass: f64,
    tangent_mass: f64,
    friction: f64,
    bounce: f64,
    bias: f64,
    jn: f64,
    jt: f64,
    jb: f64,
}

/// Contact geometry: unit normal from `a` to `b`, penetration depth (>= 0
/// when touching) and the contact point.
fn collide(
    sa: &Shape,
    pa: Vec2,
    sb: &Shape,
    pb: Vec2,
) -> Option<(Vec2, f64, Vec2)> {
    match (sa, sb) {
        (Shape::Circle { radius: r1 }, Shape::Circle { radius: r2 }) => {
            let d = pb - pa;
            let reach = r1 + r2;
            let dist2 = d.length_squared();
            if dist2 > reach * reach {
                return None;
            }
            let dist = dist2.sqrt();
            let n = if dist > 0.0 {
                d * (1.0 / dist)
            } else {
                Vec2::new(0.0, 1.0)
            };
            let pen = reach - dist;
            Some((n, pen, pa + n * (r1 - 0.5 * pen)))
        }
        (Shape::Circle { radius }, Shape::Segment { p1, p2, thickness }) => {
            circle_segment(pa, *radius, pb + *p1, pb + *p2, 0.5 * thickness)
                .map(|(n, pen, point)| (-n, pen, point))
        }
        (Shape::Segment { p1, p2, thickness }, Shape::Circle { radius }) => {
            circle_segment(pb, *radius, pa + *p1, pa + *p2, 0.5 * thickness)
        }
        (Shape::Segment { .. }, Shape::Segment { .. }) => None,
    }
}

/// Normal returned points from the segment towards the circle.
fn circle_segment(
    c: Vec2,
    radius: f64,
    p1: Vec2,
    p2: Vec2,
    half_thickness: f64,
) -> Option<(Vec2, f64, Vec2)> {
    let seg = p2 - p1;
    let t = ((c - p1).dot(seg) / seg.length_squared()).clamp(0.0, 1.0);
    let closest = p1 + seg * t;
    let d = c - closest;
    let reach = radius + half_thickness;
    let dist2 = d.length_squared();
    if dist2 > reach * reach {
        return None;
    }
    let dist = dist2.sqrt();
    let n = if dist > 0.0 {
        d * (1.0 / dist)
    } else {
        seg.perp() * (1.0 / seg.length())
    };
    let pen = reach - dist;
    Some((n, pen, c - n * (radius - 0.5 * pen)))
}

/// A running simulation over a borrowed scene.
///
/// The world remembers which pairs touched on the previous step so contacts
/// can be reported as new or persisting. Pairs already touching in the
/// initial configuration count as persisting from the first step on.
pub struct World<'a> {
    scene: &'a Scene,
    env: EnvironmentSpec,
    props: Vec<MassProps>,
    pairs: Vec<Pair>,
    touching: Vec<bool>,
    was_touching: Vec<bool>,
    /// Accumulated (normal, tangent) impulse of each pair on its last contact.
    cached: Vec<(f64, f64)>,
    states: Vec<BodyState>,
    pseudo: Vec<Vec2>,
    contacts: Vec<Contact>,
    step_index: usize,
    drag: f64,
}

impl<'a> World<'a> {
    pub fn new(scene: &'a Scene, env: &EnvironmentSpec) -> Result<Self> {
        Self::with_states(scene, env, scene.initial.clone())
    }

    pub fn with_states(
        scene: &'a Scene,
        env: &EnvironmentSpec,
        states: Vec<BodyState>,
    ) -> Result<Self> {
        scene.validate()?;
        env.validate()?;
        if states.len() != scene.bodies.len() {
            return Err(Error::InvalidScene(format!(
                "expected {} states, got {}",
                scene.bodies.len(),
                states.len()
            )));
        }
        if let Some(i) = states.iter().position(|s| !s.is_finite()) {
            return Err(Error::SimulationDiverged {
                body: i,
                role: scene.bodies[i].role.clone(),
                step: 0,
            });
        }
        let latents = env.latents;
        let props = scene
            .bodies
            .iter()
            .map(|b| {
                let (friction, restitution, density) = match b.material {
                    Some(m) => (
                        m.friction,
                        m.restitution,
                        m.density.unwrap_or(latents.density),
                    ),
                    None => (latents.friction, latents.restitution, latents.density),
                };
                let (inv_mass, inv_inertia) = match (b.is_dynamic(), b.shape) {
                    (true, Shape::Circle { radius }) => {
                        let mass = density * std::f64::consts::PI * radius * radius;
                        let inertia = 0.5 * mass * radius * radius;
                        (1.0 / mass, 1.0 / inertia)
                    }
                    _ => (0.0, 0.0),
                };
                MassProps {
                    inv_mass,
                    inv_inertia,
                    friction,
                    restitution,
                }
            })
            .collect();
        let n = scene.bodies.len();
        let mut pairs = Vec::new();
        for a in 0..n {
            for b in (a + 1)..n {
                if scene.bodies[a].is_dynamic() || scene.bodies[b].is_dynamic() {
                    pairs.push(Pair { a, b });
                }
            }
        }
        let touching: Vec<bool> = pairs
            .iter()
            .map(|p| {
                collide(
                    &scene.bodies[p.a].shape,
                    states[p.a].position,
                    &scene.bodies[p.b].shape,
                    states[p.b].position,
                )
                .is_some()
            })
            .collect();
        Ok(Self {
            scene,
            env: *env,
            props,
            pairs,
            was_touching: vec![false; touching.len()],
            cached: vec![(0.0, 0.0); touching.len()],
            touching,
            pseudo: vec![Vec2::ZERO; n],
            states,
            contacts: Vec::with_capacity(16),
            step_index: 0,
            drag: env.damping.powf(env.dt),
        })
    }

    pub fn scene(&self) -> &Scene {
        self.scene
    }

    pub fn states(&self) -> &[BodyState] {
        &self.states
    }

    /// Number of steps taken so far.
    pub fn step_index(&self) -> usize {
        self.step_index
    }

    /// Whether every dynamic body is below the sleep thresholds.
    pub fn is_idle(&self) -> bool {
        self.states.iter().zip(&self.scene.bodies).all(|(s, b)| {
            !b.is_dynamic()
                || (s.velocity.length_squared() < SLEEP_LINEAR_SPEED * SLEEP_LINEAR_SPEED
                    && s.angular_velocity.abs() < SLEEP_ANGULAR_SPEED)
        })
    }

    /// Zeroes all velocities; used when the world falls asleep.
    pub fn freeze(&mut self) {
        for s in self.states.iter_mut() {
            s.velocity = Vec2::ZERO;
            s.angular_velocity = 0.0;
        }
    }

    /// Advances one fixed step, appending every resolved contact to `events`.
    pub fn step(&mut self, events: &mut Vec<ContactEvent>) -> Result<()> {
        let dt = self.env.dt;
        let bodies = &self.scene.bodies;

        for (i, s) in self.states.iter_mut().enumerate() {
            if bodies[i].is_dynamic() {
                s.velocity += self.env.gravity * dt;
                s.velocity = s.velocity * self.drag;
                s.angular_velocity *= self.drag;
            }
        }

        self.contacts.clear();
        for (pid, p) in self.pairs.iter().enumerate() {
            let (sa, sb) = (&self.states[p.a], &self.states[p.b]);
            let Some((normal, pen, point)) =
                collide(&bodies[p.a].shape, sa.position, &bodies[p.b].shape, sb.position)
            else {
                continue;
            };
            let (ma, mb) = (self.props[p.a], self.props[p.b]);
            let ra = point - sa.position;
            let rb = point - sb.position;
            let tangent = normal.perp();
            let rna = ra.cross(normal);
            let rnb = rb.cross(normal);
            let kn = ma.inv_mass + mb.inv_mass + ma.inv_inertia * rna * rna + mb.inv_inertia * rnb * rnb;
            let rta = ra.cross(tangent);
            let rtb = rb.cross(tangent);
            let kt = ma.inv_mass + mb.inv_mass + ma.inv_inertia * rta * rta + mb.inv_inertia * rtb * rtb;
            let dv = sb.velocity + Vec2::cross_scalar(sb.angular_velocity, rb)
                - sa.velocity
                - Vec2::cross_scalar(sa.angular_velocity, ra);
            let vn = dv.dot(normal);
            let restitution = ma.restitution * mb.restitution;
            let bounce = if vn < -RESTITUTION_THRESHOLD {
                -restitution * vn
            } else {
                0.0
            };
            self.contacts.push(Contact {
                pair: pid,
                a: p.a,
                b: p.b,
                normal,
                ra,
                rb,
                normal_mass: if kn > 0.0 { 1.0 / kn } else { 0.0 },
                tangent_mass: if kt > 0.0 { 1.0 / kt } else { 0.0 },
                friction: ma.friction * mb.friction,
                bounce,
                bias: BAUMGARTE / dt * (pen - PENETRATION_SLOP).max(0.0),
                jn: 0.0,
                jt: 0.0,
                jb: 0.0,
            });
        }

        // Warm start persisting contacts from last step's impulses.
        for c in self.contacts.iter_mut() {
            if self.touching[c.pair] {
                let (jn, jt) = self.cached[c.pair];
                c.jn = jn;
                c.jt = jt;
                let (ma, mb) = (self.props[c.a], self.props[c.b]);
                let impulse = c.normal * jn + c.normal.perp() * jt;
                apply_impulse(&mut self.states, c, &ma, &mb, impulse);
            }
        }

        for p in self.pseudo.iter_mut() {
            *p = Vec2::ZERO;
        }
        for _ in 0..VELOCITY_ITERATIONS {
            let mut largest = 0.0f64;
            for c in self.contacts.iter_mut() {
                let (ma, mb) = (self.props[c.a], self.props[c.b]);
                let tangent = c.normal.perp();

                let (sa, sb) = (self.states[c.a], self.states[c.b]);
                let dv = sb.velocity + Vec2::cross_scalar(sb.angular_velocity, c.rb)
                    - sa.velocity
                    - Vec2::cross_scalar(sa.angular_velocity, c.ra);
                let max_jt = c.friction * c.jn;
                let jt = (c.jt - c.tangent_mass * dv.dot(tangent)).clamp(-max_jt, max_jt);
                let dj = jt - c.jt;
                c.jt = jt;
                largest = largest.max(dj.abs());
                apply_impulse(&mut self.states, c, &ma, &mb, tangent * dj);

                let (sa, sb) = (self.states[c.a], self.states[c.b]);
                let dv = sb.velocity + Vec2::cross_scalar(sb.angular_velocity, c.rb)
                    - sa.velocity
                    - Vec2::cross_scalar(sa.angular_velocity, c.ra);
                let jn = (c.jn - c.normal_mass * (dv.dot(c.normal) - c.bounce)).max(0.0);
                let dj = jn - c.jn;
                c.jn = jn;
                largest = largest.max(dj.abs());
                apply_impulse(&mut self.states, c, &ma, &mb, c.normal * dj);

                let dvb = (self.pseudo[c.b] - self.pseudo[c.a]).dot(c.normal);
                let jb = (c.jb - c.normal_mass * (dvb - c.bias)).max(0.0);
                let dj = jb - c.jb;
                c.jb = jb;
                largest = largest.max(dj.abs());
                let impulse = c.normal * dj;
                self.pseudo[c.a] -= impulse * ma.inv_mass;
                self.pseudo[c.b] += impulse * mb.inv_mass;
            }
            if largest <= SOLVER_CONVERGED {
                break;
            }
        }

        for (i, s) in self.states.iter_mut().enumerate() {
            if bodies[i].is_dynamic() {
                s.position += (s.velocity + self.pseudo[i]) * dt;
                s.angle += s.angular_velocity * dt;
                if !s.is_finite() {
                    return Err(Error::SimulationDiverged {
                        body: i,
                        role: bodies[i].role.clone(),
                        step: self.step_index,
                    });
                }
            }
        }

        let step = self.step_index as u32;
        std::mem::swap(&mut self.touching, &mut self.was_touching);
        self.touching.iter_mut().for_each(|t| *t = false);
        for c in &self.contacts {
            self.touching[c.pair] = true;
            self.cached[c.pair] = (c.jn, c.jt);
            events.push(ContactEvent {
                step,
                a: c.a as u16,
                b: c.b as u16,
                impulse: c.jn,
                normal: c.normal,
                kind: if self.was_touching[c.pair] {
                    ContactKind::PersistingContact
                } else {
                    ContactKind::NewContact
                },
            });
        }
        self.step_index += 1;
        Ok(())
    }
}

#[inline]
fn apply_impulse(
    states: &mut [BodyState],
    c: &Contact,
    ma: &MassProps,
    mb: &MassProps,
    impulse: Vec2,
) {
    let sa = &mut states[c.a];
    sa.velocity -= impulse * ma.inv_mass;
    sa.angular_velocity -= ma.inv_inertia * c.ra.cross(impulse);
    let sb = &mut states[c.b];
    sb.velocity += impulse * mb.inv_mass;
    sb.angular_velocity += mb.inv_inertia * c.rb.cross(impulse);
}

/// Single-step convenience wrapper: advances `states` by one step from a
/// fresh contact history and returns the new states with the step's contacts.
pub fn step(
    states: &[BodyState],
    env: &EnvironmentSpec,
    scene: &Scene,
) -> Result<(Vec<BodyState>, Vec<ContactEvent>)> {
    let mut world = World::with_states(scene, env, states.to_vec())?;
    let mut events = Vec::new();
    world.step(&mut events)?;
    Ok((world.states, events))
}
