use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Arena, EnvConfig, Goal, Obstacle, SimError, Uav, WorldState};
use crate::geometry::Vec2;

/// Maximum re-samples per entity before spawning gives up.
pub const SPAWN_RETRIES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EntityClass {
    Uav,
    Goal,
    Obstacle,
}

impl fmt::Display for EntityClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EntityClass::Uav => "uav",
            EntityClass::Goal => "goal",
            EntityClass::Obstacle => "obstacle",
        })
    }
}

fn lower_band(c: &EnvConfig) -> (f64, f64) {
    (c.y_min, c.y_min + c.r_min)
}

fn upper_band(c: &EnvConfig) -> (f64, f64) {
    (c.y_max - c.r_max, c.y_max)
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.gen_range(lo..=hi)
    } else {
        lo
    }
}

fn retry<T>(
    entity: EntityClass,
    rng: &mut ChaCha8Rng,
    mut sample: impl FnMut(&mut ChaCha8Rng) -> T,
    mut accept: impl FnMut(&T) -> bool,
) -> Result<T, SimError> {
    for _ in 0..SPAWN_RETRIES {
        let candidate = sample(rng);
        if accept(&candidate) {
            return Ok(candidate);
        }
    }
    Err(SimError::SpawnExhausted { entity, attempts: SPAWN_RETRIES })
}

/// Draw a fresh episode.
///
/// Each UAV lands in the lower or upper band (fair coin), its goal in the
/// opposite band; obstacle `i` lives in the `i`-th of `n_obstacles` equal
/// x-columns of the middle strip. Entities that would start interpenetrating
/// an earlier one are re-drawn up to [`SPAWN_RETRIES`] times.
pub fn spawn_episode(config: &EnvConfig, seed: u64) -> Result<WorldState, SimError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ur = config.uav_radius;
    let gr = config.goal_radius;
    let xs = (config.x_min, config.x_max);

    let mut uavs: Vec<Uav> = Vec::with_capacity(config.n_uavs);
    let mut goals: Vec<Goal> = Vec::with_capacity(config.n_uavs);
    for id in 0..config.n_uavs {
        let (x, y, lower) = retry(
            EntityClass::Uav,
            &mut rng,
            |rng| {
                let x = uniform(rng, xs);
                let lower = rng.gen_bool(0.5);
                let band = if lower { lower_band(config) } else { upper_band(config) };
                (x, uniform(rng, band), lower)
            },
            |&(x, y, _)| {
                let p = Vec2::new(x, y);
                uavs.iter().all(|u| u.pos().distance(p) >= 2.0 * ur)
                    && goals.iter().all(|g| g.pos().distance(p) >= ur + gr)
            },
        )?;
        let heading = rng.gen_range(0.0..360.0);
        uavs.push(Uav { id, x, y, heading, alive: true, outcome: None });

        let goal_band = if lower { upper_band(config) } else { lower_band(config) };
        let (gx, gy) = retry(
            EntityClass::Goal,
            &mut rng,
            |rng| (uniform(rng, xs), uniform(rng, goal_band)),
            |&(gx, gy)| {
                let p = Vec2::new(gx, gy);
                uavs.iter().all(|u| u.pos().distance(p) >= ur + gr)
                    && goals.iter().all(|g| g.pos().distance(p) >= 2.0 * gr)
            },
        )?;
        goals.push(Goal { owner: id, x: gx, y: gy });
    }

    let mut obstacles = Vec::with_capacity(config.n_obstacles);
    let d = config.obstacle_column_width();
    let ys = (config.y_min + config.r_min, config.y_max - config.r_max);
    for i in 0..config.n_obstacles {
        let column = (config.x_min + d * i as f64, config.x_min + d * (i + 1) as f64);
        let obstacle = retry(
            EntityClass::Obstacle,
            &mut rng,
            |rng| Obstacle {
                cx: uniform(rng, column),
                cy: uniform(rng, ys),
                rotation: rng.gen_range(0.0..=180.0),
                half_length: config.obstacle_length / 2.0,
                half_width: config.obstacle_width / 2.0,
            },
            |o| {
                let shape = o.shape();
                uavs.iter().all(|u| shape.distance_to(u.pos()) >= ur)
                    && goals.iter().all(|g| shape.distance_to(g.pos()) >= gr)
            },
        )?;
        obstacles.push(obstacle);
    }

    Ok(WorldState { tick: 0, arena: Arena::from_config(config), uavs, goals, obstacles })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lower_band_uav_gets_upper_band_goal() {
        let cfg = EnvConfig::default();
        for seed in 0..500 {
            let w = spawn_episode(&cfg, seed).unwrap();
            let u = w.uavs[0];
            let g = w.goals[0];
            if u.y <= cfg.y_min + cfg.r_min {
                assert!(g.y >= cfg.y_max - cfg.r_max && g.y <= cfg.y_max);
            } else {
                assert!(g.y >= cfg.y_min && g.y <= cfg.y_min + cfg.r_min);
            }
        }
    }

    #[test]
    fn same_seed_same_world() {
        let cfg = EnvConfig { n_uavs: 3, ..Default::default() };
        assert_eq!(spawn_episode(&cfg, 9).unwrap(), spawn_episode(&cfg, 9).unwrap());
        assert_ne!(spawn_episode(&cfg, 9).unwrap(), spawn_episode(&cfg, 10).unwrap());
    }

    #[test]
    fn impossible_packing_reports_entity() {
        // An obstacle wider than the arena always swallows a UAV.
        let cfg = EnvConfig { obstacle_length: 100.0, obstacle_width: 100.0, ..Default::default() };
        match spawn_episode(&cfg, 0) {
            Err(SimError::SpawnExhausted { entity, attempts }) => {
                assert_eq!(attempts, SPAWN_RETRIES);
                assert_eq!(entity, EntityClass::Obstacle);
            }
            other => panic!("expected exhaustion, got {other:?}"),
        }
    }

    #[test]
    fn no_initial_interpenetration() {
        let cfg = EnvConfig { n_uavs: 3, ..Default::default() };
        for seed in 0..300 {
            let w = spawn_episode(&cfg, seed).unwrap();
            for o in &w.obstacles {
                for u in &w.uavs {
                    assert!(o.shape().distance_to(u.pos()) >= cfg.uav_radius);
                }
            }
            for (i, a) in w.uavs.iter().enumerate() {
                for b in &w.uavs[i + 1..] {
                    assert!(a.pos().distance(b.pos()) >= 2.0 * cfg.uav_radius);
                }
            }
        }
    }
}
