#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use racil_core::geometry::Vec2;
use racil_core::sense::{cast_ray, Tag};
use racil_core::sim::{spawn_episode, EnvConfig, WorldState};

/// Point-membership shape, built from raw entity fields only.
enum Solid {
    Disc { c: Vec2, r: f64, tag: Tag },
    Box { c: Vec2, cos: f64, sin: f64, hl: f64, hw: f64 },
    Outside { x0: f64, x1: f64, y0: f64, y1: f64 },
}

impl Solid {
    fn contains(&self, p: Vec2) -> bool {
        match *self {
            Solid::Disc { c, r, .. } => (p.x - c.x).powi(2) + (p.y - c.y).powi(2) <= r * r,
            Solid::Box { c, cos, sin, hl, hw } => {
                let dx = p.x - c.x;
                let dy = p.y - c.y;
                (dx * cos + dy * sin).abs() <= hl && (-dx * sin + dy * cos).abs() <= hw
            }
            Solid::Outside { x0, x1, y0, y1 } => p.x <= x0 || p.x >= x1 || p.y <= y0 || p.y >= y1,
        }
    }

    fn tag(&self) -> Tag {
        match *self {
            Solid::Disc { tag, .. } => tag,
            Solid::Box { .. } => Tag::Obstacle,
            Solid::Outside { .. } => Tag::Wall,
        }
    }
}

fn solids(world: &WorldState, agent: usize) -> Vec<Solid> {
    let mut out = Vec::new();
    for o in &world.obstacles {
        let (s, c) = o.rotation.to_radians().sin_cos();
        out.push(Solid::Box { c: Vec2::new(o.cx, o.cy), cos: c, sin: s, hl: o.half_length, hw: o.half_width });
    }
    for u in world.uavs.iter().filter(|u| u.alive && u.id != agent) {
        out.push(Solid::Disc { c: Vec2::new(u.x, u.y), r: world.arena.uav_radius, tag: Tag::Uav });
    }
    for g in &world.goals {
        if world.uavs[g.owner].alive {
            let tag = if g.owner == agent { Tag::OwnGoal } else { Tag::Goal };
            out.push(Solid::Disc { c: Vec2::new(g.x, g.y), r: world.arena.goal_radius, tag });
        }
    }
    let a = &world.arena;
    out.push(Solid::Outside { x0: a.x_min, x1: a.x_max, y0: a.y_min, y1: a.y_max });
    out
}

fn first_inside(solids: &[Solid], p: Vec2) -> Option<Tag> {
    solids.iter().find(|s| s.contains(p)).map(Solid::tag)
}

/// Brute-force march along the ray; the first sample inside any solid is
/// refined by bisection against the previous (free) sample.
pub fn march(world: &WorldState, agent: usize, origin: Vec2, dir: Vec2, max_range: f64, step: f64) -> Option<(f64, Tag)> {
    march_window(&solids(world, agent), origin, dir, 0.0, max_range, step)
}

fn march_window(solids: &[Solid], origin: Vec2, dir: Vec2, from: f64, to: f64, step: f64) -> Option<(f64, Tag)> {
    let at = |t: f64| Vec2::new(origin.x + dir.x * t, origin.y + dir.y * t);
    if let Some(tag) = first_inside(solids, at(from)) {
        return Some((from, tag));
    }
    let n = ((to - from) / step).ceil() as usize;
    let mut prev = from;
    for k in 1..=n {
        let t = (from + k as f64 * step).min(to);
        if let Some(tag) = first_inside(solids, at(t)) {
            let (mut lo, mut hi) = (prev, t);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if first_inside(solids, at(mid)).is_some() {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            return Some((hi, first_inside(solids, at(hi)).unwrap_or(tag)));
        }
        prev = t;
    }
    None
}

#[derive(Debug, Default)]
pub struct OracleReport {
    pub casts: usize,
    pub max_error: f64,
    pub grazes: usize,
    pub failures: Vec<String>,
}

/// A random scene: spawned world with a random number of UAVs and
/// obstacles, then the casting agent moved to a random free pose.
pub fn random_scene(seed: u64) -> (WorldState, EnvConfig) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let cfg = EnvConfig {
        n_uavs: rng.gen_range(1..=3),
        n_obstacles: rng.gen_range(0..=6),
        uav_radius: rng.gen_range(0.2..1.0),
        goal_radius: rng.gen_range(0.3..1.2),
        obstacle_length: rng.gen_range(1.0..6.0),
        obstacle_width: rng.gen_range(0.2..1.5),
        ..Default::default()
    };
    let mut world = spawn_episode(&cfg, seed).expect("scene spawn");
    world.uavs[0].x = rng.gen_range(-14.0..14.0);
    world.uavs[0].y = rng.gen_range(-14.0..14.0);
    world.uavs[0].heading = rng.gen_range(0.0..360.0);
    if world.uavs.len() > 1 && rng.gen_bool(0.2) {
        world.uavs[1].alive = false;
    }
    (world, cfg)
}

/// Compare the analytic caster with the march on `scenes` random scenes,
/// `rays` casts each. Tangential grazes (the coarse march steps over a
/// sliver the analytic caster reports) are re-marched at 1/1000 of the step
/// and excused only when the fine march confirms the analytic answer.
pub fn oracle_sweep(scenes: u64, rays: usize, max_range: f64, tol: f64) -> OracleReport {
    let step = 1e-4 * max_range;
    let mut report = OracleReport::default();
    for seed in 0..scenes {
        let (world, _) = random_scene(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9_7f4a_7c15));
        let solids = solids(&world, 0);
        let origin = Vec2::new(world.uavs[0].x, world.uavs[0].y);
        for _ in 0..rays {
            let dir = Vec2::from_heading(rng.gen_range(0.0..360.0));
            let hit = cast_ray(origin, dir, &world, 0, max_range).expect("cast");
            let coarse = march_window(&solids, origin, dir, 0.0, max_range, step);
            report.casts += 1;
            let agree = match (hit.hit, coarse) {
                (false, None) => true,
                (true, Some((t, tag))) => {
                    let err = (t - hit.distance).abs();
                    if err <= tol {
                        report.max_error = report.max_error.max(err);
                        tag == hit.tag.unwrap() || coincident(&solids, origin, dir, t)
                    } else {
                        false
                    }
                }
                _ => false,
            };
            if agree {
                continue;
            }
            let graze = hit.hit && {
                let lo = (hit.distance - 2.0 * step).max(0.0);
                let hi = (hit.distance + 2.0 * step).min(max_range);
                march_window(&solids, origin, dir, lo, hi, step * 1e-3)
                    .is_some_and(|(t, _)| (t - hit.distance).abs() <= tol)
            };
            if graze {
                report.grazes += 1;
            } else {
                report.failures.push(format!(
                    "scene {seed}: analytic {:?} at {:.6} vs march {coarse:?}",
                    hit.tag, hit.distance
                ));
            }
        }
    }
    report
}

/// More than one solid occupies the hit point (touching or overlapping
/// entities), so either tag is a valid first hit.
fn coincident(solids: &[Solid], origin: Vec2, dir: Vec2, t: f64) -> bool {
    let p = Vec2::new(origin.x + dir.x * (t + 1e-6), origin.y + dir.y * (t + 1e-6));
    solids.iter().filter(|s| s.contains(p)).count() > 1
}

use racil_core::neural::{forward_logits, gradient, MlpSpec, ParamVector};

#[derive(Debug, Clone, Copy)]
pub struct FdReport {
    pub max_rel: f64,
    pub coords: usize,
    /// Coordinates where both derivatives sit below the floor and only an
    /// absolute check applies.
    pub tiny: usize,
}

/// Below this magnitude a derivative is compared absolutely (|a - n| < 1e-9):
/// central differences at h = 1e-5 cannot resolve relative error there.
pub const FD_FLOOR: f64 = 1e-7;

/// Central finite differences (h = 1e-5) of a logit-space loss against the
/// reverse-mode gradient, coordinate by coordinate.
pub fn fd_check<F>(spec: &MlpSpec, params: &ParamVector, input: &[f64], loss: F) -> FdReport
where
    F: Fn(&[f64]) -> (f64, Vec<f64>),
{
    let h = 1e-5;
    let (_, analytic) = gradient(spec, params, input, &loss).expect("gradient");
    let value_at = |v: &[f64]| {
        let p = ParamVector::from_values(spec, v.to_vec()).unwrap();
        loss(&forward_logits(spec, &p, input).unwrap()).0
    };
    let mut report = FdReport { max_rel: 0.0, coords: analytic.len(), tiny: 0 };
    let mut v = params.values().to_vec();
    for i in 0..v.len() {
        let x = v[i];
        v[i] = x + h;
        let up = value_at(&v);
        v[i] = x - h;
        let down = value_at(&v);
        v[i] = x;
        let numeric = (up - down) / (2.0 * h);
        let a = analytic[i];
        let scale = a.abs().max(numeric.abs());
        if scale < FD_FLOOR {
            report.tiny += 1;
            assert!((a - numeric).abs() < 1e-9, "coord {i}: {a} vs {numeric}");
        } else {
            report.max_rel = report.max_rel.max((a - numeric).abs() / scale);
        }
    }
    report
}

use racil_core::sim::StepEvents;

/// Event combinations that geometry can produce: the two goal flags
/// exclude each other, a capture lies inside the proximity radius and so
/// does a UAV contact.
pub fn valid_event_combinations(env: &EnvConfig) -> Vec<StepEvents> {
    (0u32..128)
        .map(|m| StepEvents {
            reached_own_goal: m & 1 != 0,
            reached_other_goal: m & 2 != 0,
            hit_uav: m & 4 != 0,
            hit_obstacle: m & 8 != 0,
            hit_wall: m & 16 != 0,
            near_own_goal: m & 32 != 0,
            near_other_uav: m & 64 != 0,
        })
        .filter(|e| !(e.reached_own_goal && e.reached_other_goal))
        .filter(|e| !(e.reached_own_goal && !e.near_own_goal) || env.goal_radius >= env.epsilon_proximity)
        .filter(|e| !(e.hit_uav && !e.near_other_uav) || 2.0 * env.uav_radius >= env.epsilon_proximity)
        .collect()
}

/// Reward written out case by case from the event table.
pub fn reward_oracle(e: &StepEvents, r_f: f64, r_p: f64, r_tp: f64) -> f64 {
    let terminal = if e.reached_own_goal {
        r_f
    } else if e.reached_other_goal || e.hit_uav {
        -r_f
    } else if e.hit_obstacle || e.hit_wall {
        -0.5 * r_f
    } else {
        0.0
    };
    let near = if e.near_own_goal { r_p } else { 0.0 } - if e.near_other_uav { r_p } else { 0.0 };
    terminal + near - r_tp
}

/// Every spawn constraint violated by `world`, as text.
pub fn spawn_violations(world: &WorldState, env: &EnvConfig) -> Vec<String> {
    let mut bad = Vec::new();
    let lower = |y: f64| y >= env.y_min && y <= env.y_min + env.r_min;
    let upper = |y: f64| y >= env.y_max - env.r_max && y <= env.y_max;
    let in_x = |x: f64| x >= env.x_min && x <= env.x_max;
    for u in &world.uavs {
        if !in_x(u.x) || !(lower(u.y) || upper(u.y)) {
            bad.push(format!("uav {} at ({}, {}) outside the spawn bands", u.id, u.x, u.y));
        }
        if !(0.0..360.0).contains(&u.heading) {
            bad.push(format!("uav {} heading {}", u.id, u.heading));
        }
        let Some(g) = world.goals.iter().find(|g| g.owner == u.id) else {
            bad.push(format!("uav {} has no goal", u.id));
            continue;
        };
        let opposite = if lower(u.y) { upper(g.y) } else { lower(g.y) };
        if !in_x(g.x) || !opposite {
            bad.push(format!("goal {} at ({}, {}) not in the band opposite its uav", g.owner, g.x, g.y));
        }
    }
    let d = (env.x_max - env.x_min) / env.n_obstacles.max(1) as f64;
    for (i, o) in world.obstacles.iter().enumerate() {
        let (lo, hi) = (env.x_min + d * i as f64, env.x_min + d * (i + 1) as f64);
        if o.cx < lo || o.cx > hi {
            bad.push(format!("obstacle {i} x {} outside column [{lo}, {hi}]", o.cx));
        }
        if o.cy < env.y_min + env.r_min || o.cy > env.y_max - env.r_max {
            bad.push(format!("obstacle {i} y {} outside the middle strip", o.cy));
        }
        if !(0.0..=180.0).contains(&o.rotation) {
            bad.push(format!("obstacle {i} rotation {}", o.rotation));
        }
    }
    if world.uavs.len() != env.n_uavs || world.goals.len() != env.n_uavs || world.obstacles.len() != env.n_obstacles {
        bad.push("entity counts differ from the config".into());
    }
    bad
}

use racil_core::demos::{generate_demos, DemoDataset};
use racil_core::imitation::{bc_objective, BcLossMode};
use racil_core::neural::{adam_step, lr_at, OptimizerState, OutputHead, Schedule};
use racil_core::ppo::argmax;
use racil_core::sense::{ObservationSpec, SensorConfig};

pub struct BcRun {
    pub agreement: f64,
    pub updates: usize,
    pub train_pairs: usize,
    pub held_out_pairs: usize,
}

/// `n` distinct pairs drawn uniformly from the episodes in `range`.
fn pairs_of(file: &racil_core::demos::DemoFile, episodes: std::ops::Range<usize>, n: usize, rng: &mut ChaCha8Rng) -> DemoDataset {
    let pool: Vec<usize> =
        file.records.iter().enumerate().filter(|(_, r)| episodes.contains(&r.episode)).map(|(i, _)| i).collect();
    let idx: Vec<usize> = rand::seq::index::sample(rng, pool.len(), n).into_iter().map(|k| pool[k]).collect();
    let all = file.dataset();
    let b = all.gather(&idx);
    DemoDataset { obs_dim: all.obs_dim, observations: b.observations, actions: b.actions, source: b.source }
}

/// Fit a fresh actor to scripted-expert pairs from an obstacle-free arena
/// and measure argmax agreement on pairs from unseen episodes.
pub fn bc_convergence(seed: u64) -> BcRun {
    let env = EnvConfig { n_obstacles: 0, ..Default::default() };
    let sensor = SensorConfig::default();
    let obs = ObservationSpec::Rays(sensor.clone());
    let file = generate_demos(&env, &sensor, &obs, 100, seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let train = pairs_of(&file, 0..80, 5000, &mut rng);
    let held = pairs_of(&file, 80..100, 1000, &mut rng);

    let spec = MlpSpec::new(obs.dim(), 128, 2, 3, OutputHead::Softmax);
    let mut params = ParamVector::init(&spec, seed);
    let mut opt = OptimizerState::new(params.len());
    let updates = 2000;
    for step in 0..updates {
        let b = train.sample(512, &mut rng);
        let (_, g) = gradient(&spec, &params, &b.observations, |z| bc_objective(z, 3, &b.actions, BcLossMode::Mse, 1.0)).unwrap();
        adam_step(&mut params, &g, &mut opt, lr_at(step as u64, updates as u64, 1e-3, Schedule::Linear)).unwrap();
    }
    let logits = forward_logits(&spec, &params, &held.observations).unwrap();
    let hits = logits.chunks(3).zip(&held.actions).filter(|(z, &a)| argmax(z) == a).count();
    BcRun { agreement: hits as f64 / held.len() as f64, updates, train_pairs: train.len(), held_out_pairs: held.len() }
}
