//! Deterministic planar multi-UAV arena.
//!
//! UAVs are discs flying at a fixed altitude. Each one owns a goal disc in the
//! spawn band opposite to its own, and must cross a field of rotated
//! rectangular obstacles to reach it. Every agent picks one of three discrete
//! actions per tick; all agents move simultaneously and collisions are checked
//! on the post-move geometry.

mod config;
mod reward;
mod spawn;
mod step;

pub use config::EnvConfig;
pub use reward::{collision_term, compute_reward, proximity_term, time_penalty_term};
pub use spawn::{spawn_episode, EntityClass, SPAWN_RETRIES};
pub use step::{step, step_in_place, StepReport};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{OrientedBox, Vec2};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid environment config: {0}")]
    InvalidConfig(String),
    #[error("could not place {entity} after {attempts} attempts")]
    SpawnExhausted { entity: EntityClass, attempts: usize },
    #[error("agent {0} has not finished its episode")]
    NotFinished(usize),
    #[error("unknown agent {0}")]
    UnknownAgent(usize),
    #[error("expected {expected} actions (one per UAV), got {got}")]
    ActionCount { expected: usize, got: usize },
}

/// The three discrete controls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(u8)]
pub enum ActionId {
    Fwd = 0,
    RotLeft = 1,
    RotRight = 2,
}

impl ActionId {
    pub const COUNT: usize = 3;
    pub const ALL: [ActionId; 3] = [ActionId::Fwd, ActionId::RotLeft, ActionId::RotRight];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<ActionId> {
        Self::ALL.get(i).copied()
    }
}

/// How an agent's episode ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    ReachedOwnGoal,
    ReachedOtherGoal,
    HitUav,
    HitObstacle,
    HitWall,
    Timeout,
}

impl Outcome {
    pub fn is_success(self) -> bool {
        self == Outcome::ReachedOwnGoal
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Uav {
    pub id: usize,
    pub x: f64,
    pub y: f64,
    /// Degrees counter-clockwise from +x, kept in `[0, 360)`.
    pub heading: f64,
    pub alive: bool,
    pub outcome: Option<Outcome>,
}

impl Uav {
    pub fn pos(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Goal {
    pub owner: usize,
    pub x: f64,
    pub y: f64,
}

impl Goal {
    pub fn pos(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub cx: f64,
    pub cy: f64,
    /// Degrees, drawn from `[0, 180]` at spawn.
    pub rotation: f64,
    pub half_length: f64,
    pub half_width: f64,
}

impl Obstacle {
    pub fn shape(&self) -> OrientedBox {
        OrientedBox {
            center: Vec2::new(self.cx, self.cy),
            rotation: self.rotation,
            half_length: self.half_length,
            half_width: self.half_width,
        }
    }
}

/// Static geometry copied from the config so a world is self-describing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Arena {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub uav_radius: f64,
    pub goal_radius: f64,
}

impl Arena {
    pub fn from_config(c: &EnvConfig) -> Self {
        Self {
            x_min: c.x_min,
            x_max: c.x_max,
            y_min: c.y_min,
            y_max: c.y_max,
            uav_radius: c.uav_radius,
            goal_radius: c.goal_radius,
        }
    }

    pub fn contains(&self, p: Vec2) -> bool {
        p.x >= self.x_min && p.x <= self.x_max && p.y >= self.y_min && p.y <= self.y_max
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub tick: u64,
    pub arena: Arena,
    pub uavs: Vec<Uav>,
    pub goals: Vec<Goal>,
    pub obstacles: Vec<Obstacle>,
}

impl WorldState {
    pub fn uav(&self, id: usize) -> Result<&Uav, SimError> {
        self.uavs.get(id).ok_or(SimError::UnknownAgent(id))
    }

    pub fn goal_of(&self, id: usize) -> Result<&Goal, SimError> {
        self.goals.iter().find(|g| g.owner == id).ok_or(SimError::UnknownAgent(id))
    }

    /// A goal stays in the world only while its owner is still flying.
    pub fn goal_active(&self, goal: &Goal) -> bool {
        self.uavs.get(goal.owner).is_some_and(|u| u.alive)
    }

    pub fn all_done(&self) -> bool {
        self.uavs.iter().all(|u| !u.alive)
    }

    pub fn alive_ids(&self) -> impl Iterator<Item = usize> + '_ {
        self.uavs.iter().filter(|u| u.alive).map(|u| u.id)
    }
}

/// Per-agent geometric events of one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct StepEvents {
    pub reached_own_goal: bool,
    pub reached_other_goal: bool,
    pub hit_uav: bool,
    pub hit_obstacle: bool,
    pub hit_wall: bool,
    pub near_own_goal: bool,
    pub near_other_uav: bool,
}

impl StepEvents {
    /// The terminal event that wins under the resolution order
    /// own goal > other goal > UAV collision > obstacle/wall collision.
    pub fn terminal(&self) -> Option<Outcome> {
        if self.reached_own_goal {
            Some(Outcome::ReachedOwnGoal)
        } else if self.reached_other_goal {
            Some(Outcome::ReachedOtherGoal)
        } else if self.hit_uav {
            Some(Outcome::HitUav)
        } else if self.hit_obstacle {
            Some(Outcome::HitObstacle)
        } else if self.hit_wall {
            Some(Outcome::HitWall)
        } else {
            None
        }
    }
}

/// True iff the agent's episode ended on its own goal.
pub fn check_success(state: &WorldState, agent_id: usize) -> Result<bool, SimError> {
    let uav = state.uav(agent_id)?;
    match uav.outcome {
        Some(o) if !uav.alive => Ok(o.is_success()),
        _ => Err(SimError::NotFinished(agent_id)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn finished(outcome: Option<Outcome>) -> WorldState {
        let cfg = EnvConfig { n_obstacles: 0, ..Default::default() };
        let mut s = spawn_episode(&cfg, 1).unwrap();
        s.uavs[0].alive = outcome.is_none();
        s.uavs[0].outcome = outcome;
        s
    }

    #[test]
    fn success_only_on_own_goal() {
        assert!(check_success(&finished(Some(Outcome::ReachedOwnGoal)), 0).unwrap());
        assert!(!check_success(&finished(Some(Outcome::HitObstacle)), 0).unwrap());
        assert!(!check_success(&finished(Some(Outcome::Timeout)), 0).unwrap());
    }

    #[test]
    fn unfinished_agent_is_an_error() {
        assert_eq!(check_success(&finished(None), 0), Err(SimError::NotFinished(0)));
        assert_eq!(check_success(&finished(None), 7), Err(SimError::UnknownAgent(7)));
    }

    #[test]
    fn action_ids_round_trip() {
        for a in ActionId::ALL {
            assert_eq!(ActionId::from_index(a.index()), Some(a));
        }
        assert_eq!(ActionId::from_index(3), None);
    }
}
