//! Closed-form checks of the physics engine.

use approx::assert_abs_diff_eq;
use simground::physics::*;
use simground::tasks::{build_task, Family, Scale};

fn latents(friction: f64, restitution: f64) -> LatentFactors {
    LatentFactors::new(1.0, friction, restitution).unwrap()
}

fn env(l: LatentFactors, damping: f64, gravity: Vec2) -> EnvironmentSpec {
    EnvironmentSpec {
        latents: l,
        damping,
        gravity,
        dt: DEFAULT_DT,
    }
}

fn circle_mass(radius: f64, density: f64) -> f64 {
    std::f64::consts::PI * radius * radius * density
}

#[test]
fn one_step_follows_the_update_order() {
    let mut scene = Scene::new();
    scene.add(BodyDef::dynamic_circle("ball", 0.5), BodyState::at(Vec2::new(0.0, 10.0)));
    let e = EnvironmentSpec {
        latents: latents(0.5, 0.5),
        damping: 1.0,
        gravity: Vec2::new(0.0, -10.0),
        dt: 0.5,
    };
    let (next, events) = step(&scene.initial, &e, &scene).unwrap();
    assert!(events.is_empty());
    assert_eq!(next[0].velocity, Vec2::new(0.0, -5.0));
    assert_eq!(next[0].position, Vec2::new(0.0, 7.5));
}

#[test]
fn damping_point_nine_loses_ten_percent_per_second() {
    let mut scene = Scene::new();
    scene.add(
        BodyDef::dynamic_circle("ball", 0.2),
        BodyState::moving(Vec2::new(0.0, 0.0), Vec2::new(3.0, 4.0)),
    );
    let e = env(latents(0.5, 0.5), 0.9, Vec2::new(0.0, 0.0));
    let mut world = World::new(&scene, &e).unwrap();
    let mut events = Vec::new();
    let mut last = 5.0;
    for _ in 0..240 {
        world.step(&mut events).unwrap();
        let speed = world.states()[0].velocity.length();
        assert!(speed <= last);
        last = speed;
    }
    assert_abs_diff_eq!(last, 0.9 * 5.0, epsilon = 1e-9);
}

/// Drops a ball straight onto a floor at constant speed and returns the
/// vertical velocity just after the bounce.
fn rebound(ball_e: f64, floor_e: Option<f64>, v0: f64) -> f64 {
    let mut scene = Scene::new();
    let mut floor = BodyDef::static_segment("floor", Vec2::new(-5.0, 0.0), Vec2::new(5.0, 0.0), 0.1);
    if let Some(fe) = floor_e {
        floor = floor.with_material(0.0, fe);
    }
    scene.add(floor, BodyState::default());
    scene.add(
        BodyDef::dynamic_circle("ball", 0.25),
        BodyState::moving(Vec2::new(0.0, 0.5), Vec2::new(0.0, -v0)),
    );
    let e = env(latents(0.0, ball_e), 1.0, Vec2::new(0.0, 0.0));
    let traj = rollout(&scene, &e, &RolloutSpec::new(240, 1)).unwrap();
    traj.frames
        .iter()
        .map(|f| f.states[0].velocity.y)
        .find(|&vy| vy > 0.0)
        .expect("ball bounces")
}

#[test]
fn rebound_speed_is_restitution_times_impact_speed() {
    for (ball_e, floor_e, combined) in [
        (0.5, Some(1.0), 0.5),
        (0.8, Some(0.5), 0.4),
        (0.7, None, 0.49),
        (1.0, Some(1.0), 1.0),
    ] {
        let v = rebound(ball_e, floor_e, 3.0);
        assert_abs_diff_eq!(v, combined * 3.0, epsilon = 1e-6);
    }
}

#[test]
fn slow_impacts_do_not_bounce() {
    let v = {
        let mut scene = Scene::new();
        scene.add(
            BodyDef::static_segment("floor", Vec2::new(-5.0, 0.0), Vec2::new(5.0, 0.0), 0.1)
                .with_material(0.0, 1.0),
            BodyState::default(),
        );
        scene.add(
            BodyDef::dynamic_circle("ball", 0.25),
            BodyState::moving(Vec2::new(0.0, 0.32), Vec2::new(0.0, -0.5 * RESTITUTION_THRESHOLD)),
        );
        let e = env(latents(0.0, 1.0), 1.0, Vec2::new(0.0, 0.0));
        let traj = rollout(&scene, &e, &RolloutSpec::new(120, 1)).unwrap();
        traj.frames.last().unwrap().states[0].velocity.y
    };
    assert!(v.abs() < 1e-9, "resting contact should absorb the approach, got {v}");
}

fn two_balls(r1: f64, v1: Vec2, r2: f64, p2: Vec2, v2: Vec2) -> Scene {
    let mut scene = Scene::new();
    scene.add(BodyDef::dynamic_circle("ball-a", r1), BodyState::moving(Vec2::new(0.0, 0.0), v1));
    scene.add(BodyDef::dynamic_circle("ball-b", r2), BodyState::moving(p2, v2));
    scene
}

#[test]
fn equal_masses_exchange_velocities_elastically() {
    let scene = two_balls(0.3, Vec2::new(2.0, 0.0), 0.3, Vec2::new(1.0, 0.0), Vec2::new(-1.0, 0.0));
    let e = env(latents(0.0, 1.0), 1.0, Vec2::new(0.0, 0.0));
    let traj = rollout(&scene, &e, &RolloutSpec::new(240, 240)).unwrap();
    let last = traj.frames.last().unwrap();
    assert_abs_diff_eq!(last.states[0].velocity.x, -1.0, epsilon = 1e-9);
    assert_abs_diff_eq!(last.states[1].velocity.x, 2.0, epsilon = 1e-9);
    assert_abs_diff_eq!(last.states[0].velocity.y, 0.0, epsilon = 1e-12);
    assert_eq!(traj.ball_collisions, 1);
}

#[test]
fn frictionless_collisions_conserve_momentum() {
    let (r1, r2, density) = (0.3, 0.5, 1.7);
    let scene = two_balls(
        r1,
        Vec2::new(2.5, 0.4),
        r2,
        Vec2::new(1.2, 0.35),
        Vec2::new(-0.7, 0.0),
    );
    for e_ in [0.0, 0.3, 1.0] {
        let l = LatentFactors::new(density, 0.0, e_).unwrap();
        let e = env(l, 1.0, Vec2::new(0.0, 0.0));
        let traj = rollout(&scene, &e, &RolloutSpec::new(240, 1)).unwrap();
        let (m1, m2) = (circle_mass(r1, density), circle_mass(r2, density));
        let p = |f: &Frame| f.states[0].velocity * m1 + f.states[1].velocity * m2;
        let ke = |f: &Frame| {
            0.5 * m1 * f.states[0].velocity.length_squared()
                + 0.5 * m2 * f.states[1].velocity.length_squared()
        };
        let p0 = p(&traj.frames[0]);
        let k0 = ke(&traj.frames[0]);
        assert!(traj.ball_collisions >= 1);
        for f in &traj.frames {
            assert!((p(f) - p0).length() <= 1e-6 * p0.length());
            assert!(ke(f) <= k0 * (1.0 + 1e-6));
        }
    }
}

#[test]
fn circle_overlap_stays_within_slop() {
    let scene = two_balls(0.3, Vec2::new(6.0, 0.0), 0.3, Vec2::new(1.0, 0.0), Vec2::new(-6.0, 0.0));
    let e = env(latents(0.0, 0.0), 1.0, Vec2::new(0.0, 0.0));
    let traj = rollout(&scene, &e, &RolloutSpec::new(240, 1)).unwrap();
    for f in &traj.frames {
        let d = (f.states[0].position - f.states[1].position).length();
        assert!(0.6 - d <= PENETRATION_SLOP + 1e-9, "overlap {}", 0.6 - d);
    }
}

#[test]
fn resting_scene_is_a_fixed_point() {
    let mut scene = Scene::new();
    scene.add(
        BodyDef::static_segment("floor", Vec2::new(-5.0, 0.0), Vec2::new(5.0, 0.0), 0.1),
        BodyState::default(),
    );
    scene.add(BodyDef::static_segment("wall", Vec2::new(3.0, 0.0), Vec2::new(3.0, 2.0), 0.1), BodyState::default());
    let e = EnvironmentSpec::ideal(latents(0.5, 0.5));
    let traj = rollout(&scene, &e, &RolloutSpec::new(500, 50)).unwrap();
    assert_eq!(traj.frames.len(), 11);
    assert!(traj.frames.iter().all(|f| f.states == traj.frames[0].states));
}

#[test]
fn divergence_is_reported() {
    let mut scene = Scene::new();
    scene.add(
        BodyDef::dynamic_circle("ball", 0.2),
        BodyState::moving(Vec2::new(0.0, 0.0), Vec2::new(1e308, 0.0)),
    );
    let e = EnvironmentSpec::ideal(latents(0.5, 0.5));
    let r = rollout(&scene, &e, &RolloutSpec::new(1000, 100));
    assert!(matches!(r, Err(simground::Error::SimulationDiverged { body: 0, .. })), "{r:?}");
}

#[test]
fn schedules_bound_the_frame_count() {
    let truth = Family::Bowling.true_latents();
    let bowling = build_task(Family::Bowling, 0, Scale::Desk).unwrap();
    let traj = bowling.simulate(0, &EnvironmentSpec::ideal(truth)).unwrap();
    assert!(traj.frames.len() <= 68);
    assert!(traj.frames.windows(2).all(|w| w[1].step > w[0].step));
    let (last, body) = traj.frames.split_last().unwrap();
    assert!(body.iter().all(|f| f.step % 60 == 0));
    assert!(last.step <= 4000);
    let basketball = build_task(Family::Basketball, 0, Scale::Desk).unwrap();
    let traj = basketball.simulate(0, &EnvironmentSpec::ideal(truth)).unwrap();
    assert!(traj.frames.len() <= 11);
}

#[test]
fn rollouts_are_deterministic_across_reruns() {
    let task = build_task(Family::Bowling, 3, Scale::Desk).unwrap();
    let e = EnvironmentSpec::new(Family::Bowling.true_latents(), 0.8).unwrap();
    let first = task.simulate_with(137, &e, true, None).unwrap();
    for _ in 0..100 {
        assert_eq!(task.simulate_with(137, &e, true, None).unwrap(), first);
    }
}

#[test]
fn counters_match_the_contact_log() {
    let truth = Family::Basketball.true_latents();
    for family in [Family::Basketball, Family::Bowling] {
        let task = build_task(family, 1, Scale::Desk).unwrap();
        for action in (0..task.action_space_size()).step_by(37) {
            let scene = task.scene_for(&task.decode_action(action).unwrap());
            let traj = task
                .simulate_with(action, &EnvironmentSpec::new(truth, 0.8).unwrap(), true, None)
                .unwrap();
            let (collisions, rolling) = traj.recount(&scene);
            assert_eq!(collisions, traj.ball_collisions);
            assert_eq!(rolling, traj.rolling_steps);
        }
    }
}
