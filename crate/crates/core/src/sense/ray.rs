use serde::{Deserialize, Serialize};

use super::{SenseError, Tag};
use crate::geometry::{OrientedBox, Vec2};
use crate::sim::WorldState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WallSide {
    Left,
    Right,
    Bottom,
    Top,
}

/// What a ray struck.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Collider {
    Obstacle(usize),
    Uav(usize),
    /// Goal disc, identified by its owner.
    Goal(usize),
    Wall(WallSide),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RayHit {
    pub hit: bool,
    /// World units; `max_range` on a miss.
    pub distance: f64,
    pub tag: Option<Tag>,
    /// Outward unit normal of the struck surface, `(0, 0)` on a miss.
    pub normal: Vec2,
    pub collider: Option<Collider>,
}

impl RayHit {
    pub fn miss(max_range: f64) -> Self {
        Self { hit: false, distance: max_range, tag: None, normal: Vec2::ZERO, collider: None }
    }
}

/// Entry distance of a ray into a disc. An origin inside the disc hits at 0.
pub fn ray_circle(origin: Vec2, dir: Vec2, center: Vec2, radius: f64) -> Option<(f64, Vec2)> {
    let oc = origin - center;
    let b = oc.dot(dir);
    let c = oc.dot(oc) - radius * radius;
    if c <= 0.0 {
        return Some((0.0, -dir));
    }
    // Origin outside and moving away.
    if b >= 0.0 {
        return None;
    }
    let disc = b * b - c;
    if disc < 0.0 {
        return None;
    }
    let t = -b - disc.sqrt();
    let t = t.max(0.0);
    let n = (origin + dir * t - center).normalized().unwrap_or(-dir);
    Some((t, n))
}

/// Slab test in the box frame. An origin inside the box hits at 0.
pub fn ray_box(origin: Vec2, dir: Vec2, shape: &OrientedBox) -> Option<(f64, Vec2)> {
    let o = shape.to_local(origin);
    let d = dir.rotated(-shape.rotation);
    let half = [shape.half_length, shape.half_width];
    let oc = [o.x, o.y];
    let dc = [d.x, d.y];

    let mut t_enter = f64::NEG_INFINITY;
    let mut t_exit = f64::INFINITY;
    let mut enter_axis = 0;
    for axis in 0..2 {
        if dc[axis].abs() < 1e-300 {
            if oc[axis].abs() > half[axis] {
                return None;
            }
            continue;
        }
        let inv = 1.0 / dc[axis];
        let mut t1 = (-half[axis] - oc[axis]) * inv;
        let mut t2 = (half[axis] - oc[axis]) * inv;
        if t1 > t2 {
            std::mem::swap(&mut t1, &mut t2);
        }
        if t1 > t_enter {
            t_enter = t1;
            enter_axis = axis;
        }
        t_exit = t_exit.min(t2);
    }
    if t_enter > t_exit || t_exit < 0.0 {
        return None;
    }
    if t_enter <= 0.0 {
        return Some((0.0, -dir));
    }
    let local_normal = if enter_axis == 0 {
        Vec2::new(-dc[0].signum(), 0.0)
    } else {
        Vec2::new(0.0, -dc[1].signum())
    };
    Some((t_enter, shape.to_world_dir(local_normal)))
}

fn ray_walls(origin: Vec2, dir: Vec2, world: &WorldState) -> Option<(f64, Vec2, WallSide)> {
    let a = &world.arena;
    let mut best: Option<(f64, Vec2, WallSide)> = None;
    let mut consider = |t: f64, n: Vec2, side: WallSide| {
        let t = t.max(0.0);
        if best.is_none_or(|(bt, _, _)| t < bt) {
            best = Some((t, n, side));
        }
    };
    if dir.x > 0.0 {
        consider((a.x_max - origin.x) / dir.x, Vec2::new(-1.0, 0.0), WallSide::Right);
    } else if dir.x < 0.0 {
        consider((a.x_min - origin.x) / dir.x, Vec2::new(1.0, 0.0), WallSide::Left);
    }
    if dir.y > 0.0 {
        consider((a.y_max - origin.y) / dir.y, Vec2::new(0.0, -1.0), WallSide::Top);
    } else if dir.y < 0.0 {
        consider((a.y_min - origin.y) / dir.y, Vec2::new(0.0, 1.0), WallSide::Bottom);
    }
    best
}

/// Cast against every entity class.
pub fn cast_ray(
    origin: Vec2,
    direction: Vec2,
    world: &WorldState,
    agent_id: usize,
    max_range: f64,
) -> Result<RayHit, SenseError> {
    cast_ray_tagged(origin, direction, world, agent_id, max_range, &Tag::ALL)
}

/// Cast a ray, seeing only entities whose tag is in `tags`.
///
/// Peer UAVs and goals only exist while their owner is flying; the casting
/// agent never hits itself. Ties keep the first candidate in the order
/// obstacles, UAVs, goals, walls.
pub fn cast_ray_tagged(
    origin: Vec2,
    direction: Vec2,
    world: &WorldState,
    agent_id: usize,
    max_range: f64,
    tags: &[Tag],
) -> Result<RayHit, SenseError> {
    let dir = direction.normalized().ok_or(SenseError::InvalidDirection)?;
    if !origin.x.is_finite() || !origin.y.is_finite() {
        return Err(SenseError::InvalidOrigin);
    }
    let mut best = RayHit::miss(max_range);
    let mut take = |hit: Option<(f64, Vec2)>, tag: Tag, collider: Collider| {
        if let Some((t, n)) = hit {
            if t <= max_range && (!best.hit || t < best.distance) {
                best = RayHit { hit: true, distance: t, tag: Some(tag), normal: n, collider: Some(collider) };
            }
        }
    };

    if tags.contains(&Tag::Obstacle) {
        for (i, o) in world.obstacles.iter().enumerate() {
            take(ray_box(origin, dir, &o.shape()), Tag::Obstacle, Collider::Obstacle(i));
        }
    }
    if tags.contains(&Tag::Uav) {
        for u in world.uavs.iter().filter(|u| u.alive && u.id != agent_id) {
            take(ray_circle(origin, dir, u.pos(), world.arena.uav_radius), Tag::Uav, Collider::Uav(u.id));
        }
    }
    for g in world.goals.iter().filter(|g| world.goal_active(g)) {
        let tag = if g.owner == agent_id { Tag::OwnGoal } else { Tag::Goal };
        if tags.contains(&tag) {
            take(ray_circle(origin, dir, g.pos(), world.arena.goal_radius), tag, Collider::Goal(g.owner));
        }
    }
    if tags.contains(&Tag::Wall) {
        if let Some((t, n, side)) = ray_walls(origin, dir, world) {
            take(Some((t, n)), Tag::Wall, Collider::Wall(side));
        }
    }
    Ok(best)
}
