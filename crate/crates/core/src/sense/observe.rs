use serde::{Deserialize, Serialize};

use super::{cast_ray_tagged, RayHit, SensorConfig, TAG_LAYOUT_VERSION};
use crate::geometry::Vec2;
use crate::sim::{EnvConfig, WorldState};

/// Absolute ray angles (degrees) for an agent facing `heading`.
///
/// Rays are evenly spaced over the arc; a full 360 degree arc does not
/// duplicate its end points, and a single ray points straight ahead.
pub fn ray_angles(heading: f64, sensor: &SensorConfig) -> Vec<f64> {
    let n = sensor.n_rays;
    if n == 1 {
        return vec![heading];
    }
    let full = sensor.arc_degrees >= 360.0;
    let spacing = if full { 360.0 / n as f64 } else { sensor.arc_degrees / (n - 1) as f64 };
    let start = if full { heading - 180.0 } else { heading - sensor.arc_degrees / 2.0 };
    (0..n).map(|k| start + spacing * k as f64).collect()
}

/// Cast every sensor ray of `agent_id`.
pub fn scan(world: &WorldState, agent_id: usize, sensor: &SensorConfig) -> Vec<RayHit> {
    let Some(me) = world.uavs.get(agent_id) else {
        return Vec::new();
    };
    ray_angles(me.heading, sensor)
        .into_iter()
        .map(|a| {
            cast_ray_tagged(me.pos(), Vec2::from_heading(a), world, agent_id, sensor.max_range, &sensor.tags)
                .unwrap_or_else(|_| RayHit::miss(sensor.max_range))
        })
        .collect()
}

fn normalized_position(p: Vec2, env: &EnvConfig) -> [f64; 2] {
    let (cx, cy) = env.center();
    let (hx, hy) = env.half_extents();
    [(p.x - cx) / hx, (p.y - cy) / hy]
}

fn own_pair(world: &WorldState, agent_id: usize, env: &EnvConfig) -> Vec<f64> {
    let mut out = Vec::new();
    if let (Some(me), Ok(goal)) = (world.uavs.get(agent_id), world.goal_of(agent_id)) {
        out.extend(normalized_position(me.pos(), env));
        out.extend(normalized_position(goal.pos(), env));
    } else {
        out.extend([0.0; 4]);
    }
    out
}

/// `[x_a, y_a, x_g, y_g]` followed by one `[one-hot tag, miss flag, distance]`
/// block per ray. Positions are scaled to `[-1, 1]` by the arena half extents.
pub fn observe(world: &WorldState, agent_id: usize, sensor: &SensorConfig, env: &EnvConfig) -> Vec<f64> {
    let mut out = own_pair(world, agent_id, env);
    out.reserve(sensor.n_rays * sensor.block_len());
    for hit in scan(world, agent_id, sensor) {
        let start = out.len();
        out.resize(start + sensor.block_len(), 0.0);
        let block = &mut out[start..];
        match hit.tag.and_then(|t| sensor.tag_index(t)) {
            Some(i) if hit.hit => {
                block[i] = 1.0;
                block[sensor.tags.len() + 1] = (hit.distance / sensor.max_range).clamp(0.0, 1.0);
            }
            _ => {
                block[sensor.tags.len()] = 1.0;
                block[sensor.tags.len() + 1] = 1.0;
            }
        }
    }
    out
}

/// Ray-free encoding: own position and goal, then obstacle centres and peer
/// positions, each nearest-first and zero-padded to a fixed count.
pub fn observe_coordinates(
    world: &WorldState,
    agent_id: usize,
    n_obstacles: usize,
    n_peers: usize,
    env: &EnvConfig,
) -> Vec<f64> {
    let mut out = own_pair(world, agent_id, env);
    let me = world.uavs.get(agent_id).map(|u| u.pos()).unwrap_or(Vec2::ZERO);
    let by_distance = |mut pts: Vec<Vec2>| {
        pts.sort_by(|a, b| a.distance(me).total_cmp(&b.distance(me)));
        pts
    };
    let obstacles = by_distance(world.obstacles.iter().map(|o| Vec2::new(o.cx, o.cy)).collect());
    let peers = by_distance(
        world.uavs.iter().filter(|u| u.alive && u.id != agent_id).map(|u| u.pos()).collect(),
    );
    for (pts, slots) in [(obstacles, n_obstacles), (peers, n_peers)] {
        for k in 0..slots {
            match pts.get(k) {
                Some(&p) => out.extend(normalized_position(p, env)),
                None => out.extend([0.0, 0.0]),
            }
        }
    }
    out
}

/// Which observation encoding a policy consumes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ObservationSpec {
    Rays(SensorConfig),
    Coordinates { n_obstacles: usize, n_peers: usize },
}

impl ObservationSpec {
    pub fn dim(&self) -> usize {
        match self {
            ObservationSpec::Rays(s) => s.observation_len(),
            ObservationSpec::Coordinates { n_obstacles, n_peers } => 4 + 2 * (n_obstacles + n_peers),
        }
    }

    pub fn encode(&self, world: &WorldState, agent_id: usize, env: &EnvConfig) -> Vec<f64> {
        match self {
            ObservationSpec::Rays(s) => observe(world, agent_id, s, env),
            ObservationSpec::Coordinates { n_obstacles, n_peers } => {
                observe_coordinates(world, agent_id, *n_obstacles, *n_peers, env)
            }
        }
    }

    /// Canonical one-line description, the input of the sensor digest.
    pub fn canonical(&self) -> String {
        match self {
            ObservationSpec::Rays(s) => format!(
                "rays layout={} n_rays={} arc_degrees={:?} max_range={:?} tags={}",
                TAG_LAYOUT_VERSION,
                s.n_rays,
                s.arc_degrees,
                s.max_range,
                s.tags.iter().map(|t| t.name()).collect::<Vec<_>>().join(",")
            ),
            ObservationSpec::Coordinates { n_obstacles, n_peers } => {
                format!("coordinates n_obstacles={n_obstacles} n_peers={n_peers}")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sense::Tag;
    use crate::sim::spawn_episode;

    #[test]
    fn nine_rays_five_tags_is_67_wide() {
        let s = SensorConfig { n_rays: 9, ..Default::default() };
        assert_eq!(s.observation_len(), 67);
        let env = EnvConfig::default();
        let w = spawn_episode(&env, 4).unwrap();
        assert_eq!(observe(&w, 0, &s, &env).len(), 67);
    }

    #[test]
    fn full_circle_does_not_repeat_end_ray() {
        let s = SensorConfig { n_rays: 4, arc_degrees: 360.0, ..Default::default() };
        assert_eq!(ray_angles(90.0, &s), vec![-90.0, 0.0, 90.0, 180.0]);
        let s = SensorConfig { n_rays: 3, arc_degrees: 180.0, ..Default::default() };
        assert_eq!(ray_angles(0.0, &s), vec![-90.0, 0.0, 90.0]);
        let s = SensorConfig { n_rays: 1, ..Default::default() };
        assert_eq!(ray_angles(33.0, &s), vec![33.0]);
    }

    #[test]
    fn empty_world_gives_miss_blocks() {
        let env = EnvConfig {
            x_min: -100.0,
            x_max: 100.0,
            y_min: -100.0,
            y_max: 100.0,
            n_obstacles: 0,
            ..Default::default()
        };
        let mut w = spawn_episode(&env, 0).unwrap();
        w.uavs[0].x = 0.0;
        w.uavs[0].y = 0.0;
        w.goals[0].y = 99.0;
        let s = SensorConfig::default();
        let obs = observe(&w, 0, &s, &env);
        assert_eq!(&obs[..2], &[0.0, 0.0]);
        for block in obs[4..].chunks(s.block_len()) {
            assert_eq!(block, &[0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 1.0]);
        }
        assert_eq!(obs, observe(&w, 0, &s, &env));
    }

    #[test]
    fn blocks_are_one_hot_or_miss() {
        let env = EnvConfig { n_uavs: 3, ..Default::default() };
        let s = SensorConfig { n_rays: 31, arc_degrees: 360.0, ..Default::default() };
        for seed in 0..50 {
            let w = spawn_episode(&env, seed).unwrap();
            for id in 0..3 {
                let obs = observe(&w, id, &s, &env);
                assert_eq!(obs.len(), s.observation_len());
                assert!(obs[..4].iter().all(|v| (-1.0..=1.0).contains(v)));
                for block in obs[4..].chunks(s.block_len()) {
                    let set: f64 = block[..=s.tags.len()].iter().sum();
                    assert_eq!(set, 1.0);
                    assert!((0.0..=1.0).contains(&block[s.tags.len() + 1]));
                }
            }
        }
    }

    #[test]
    fn partial_tag_set_changes_layout() {
        let env = EnvConfig::default();
        let s = SensorConfig { tags: vec![Tag::Wall, Tag::Obstacle], ..Default::default() };
        let w = spawn_episode(&env, 1).unwrap();
        let obs = observe(&w, 0, &s, &env);
        assert_eq!(obs.len(), 4 + 15 * 4);
    }

    #[test]
    fn coordinates_are_nearest_first_and_padded() {
        let env = EnvConfig { n_uavs: 2, ..Default::default() };
        let w = spawn_episode(&env, 2).unwrap();
        let spec = ObservationSpec::Coordinates { n_obstacles: 5, n_peers: 2 };
        let obs = spec.encode(&w, 0, &env);
        assert_eq!(obs.len(), spec.dim());
        let me = w.uavs[0].pos();
        let d = |k: usize| {
            let (hx, hy) = env.half_extents();
            Vec2::new(obs[4 + 2 * k] * hx, obs[5 + 2 * k] * hy).distance(me)
        };
        for k in 0..3 {
            assert!(d(k) <= d(k + 1));
        }
        assert_eq!(&obs[12..14], &[0.0, 0.0]);
        assert_eq!(&obs[16..18], &[0.0, 0.0]);
    }
}
