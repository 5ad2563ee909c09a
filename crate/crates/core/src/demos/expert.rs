use serde::{Deserialize, Serialize};

use crate::geometry::{angle_difference, normalize_degrees, Vec2};
use crate::sense::{ray_angles, scan, Collider, SensorConfig, Tag};
use crate::sim::{ActionId, WorldState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpertConfig {
    /// Half-angle of the forward cone watched for blockers (degrees).
    pub cone_degrees: f64,
    /// Blockers closer than this inside the cone trigger avoidance.
    pub avoid_distance: f64,
    /// Half-angle of the side sector checked before turning (degrees).
    pub side_degrees: f64,
    /// Turn dead band (degrees); the environment's turn step by default.
    pub turn_step: f64,
}

impl Default for ExpertConfig {
    fn default() -> Self {
        Self { cone_degrees: 30.0, avoid_distance: 3.0, side_degrees: 90.0, turn_step: 2.0 }
    }
}

fn is_blocker(tag: Option<Tag>) -> bool {
    matches!(tag, Some(Tag::Obstacle | Tag::Uav | Tag::Goal))
}

struct View {
    /// Distance and centre of the nearest blocker inside the cone.
    nearest: Option<(f64, Vec2)>,
    /// Nearest blocker in the left and right side sectors.
    side: [f64; 2],
}

fn collider_center(world: &WorldState, c: Collider) -> Option<Vec2> {
    match c {
        Collider::Obstacle(i) => world.obstacles.get(i).map(|o| Vec2::new(o.cx, o.cy)),
        Collider::Uav(i) => world.uav(i).ok().map(|u| u.pos()),
        Collider::Goal(owner) => world.goal_of(owner).ok().map(|g| g.pos()),
        Collider::Wall(_) => None,
    }
}

fn look(world: &WorldState, agent_id: usize, heading: f64, sensor: &SensorConfig, cfg: &ExpertConfig) -> View {
    let mut probe = world.clone();
    probe.uavs[agent_id].heading = heading;
    let hits = scan(&probe, agent_id, sensor);
    let mut view = View { nearest: None, side: [f64::INFINITY; 2] };
    for (hit, angle) in hits.iter().zip(ray_angles(heading, sensor)) {
        if !hit.hit || !is_blocker(hit.tag) || hit.distance >= cfg.avoid_distance {
            continue;
        }
        let off = angle_difference(heading, angle);
        if off.abs() <= cfg.cone_degrees {
            if view.nearest.is_none_or(|(d, _)| hit.distance < d) {
                view.nearest = hit.collider.and_then(|c| collider_center(world, c)).map(|c| (hit.distance, c));
            }
        } else if off.abs() <= cfg.side_degrees {
            let s = if off > 0.0 { 0 } else { 1 };
            view.side[s] = view.side[s].min(hit.distance);
        }
    }
    view
}

/// Deterministic rule-based pilot.
///
/// A blocker (obstacle, peer UAV or peer goal) inside the forward cone closer
/// than `avoid_distance` makes it turn away from the centre of the nearest
/// such blocker. Otherwise it
/// turns towards its goal when the bearing error exceeds the dead band,
/// unless a blocker sits on that side just outside the cone, or the turn
/// would bring one into the cone, in which case it keeps flying forward.
pub fn scripted_expert_with(world: &WorldState, agent_id: usize, sensor: &SensorConfig, cfg: &ExpertConfig) -> ActionId {
    let (Ok(me), Ok(goal)) = (world.uav(agent_id), world.goal_of(agent_id)) else {
        return ActionId::Fwd;
    };
    let to_goal = goal.pos() - me.pos();
    let bearing = normalize_degrees(to_goal.y.atan2(to_goal.x).to_degrees());
    let error = angle_difference(me.heading, bearing);

    let view = look(world, agent_id, me.heading, sensor, cfg);
    let toward_goal = if error >= 0.0 { ActionId::RotLeft } else { ActionId::RotRight };
    if let Some((_, center)) = view.nearest {
        let side = Vec2::from_heading(me.heading).cross(center - me.pos());
        return if side < 0.0 {
            ActionId::RotLeft
        } else if side > 0.0 {
            ActionId::RotRight
        } else {
            toward_goal
        };
    }
    if error.abs() > cfg.turn_step {
        let blocked = if error >= 0.0 { view.side[0] } else { view.side[1] };
        let turned = me.heading + cfg.turn_step * error.signum();
        if blocked.is_finite() || look(world, agent_id, turned, sensor, cfg).nearest.is_some() {
            return ActionId::Fwd;
        }
        return toward_goal;
    }
    ActionId::Fwd
}

/// [`scripted_expert_with`] under the default thresholds.
pub fn scripted_expert(world: &WorldState, agent_id: usize, sensor: &SensorConfig) -> ActionId {
    scripted_expert_with(world, agent_id, sensor, &ExpertConfig::default())
}
