use super::{compute_reward, ActionId, EnvConfig, Outcome, SimError, StepEvents, WorldState};
use crate::geometry::{normalize_degrees, Vec2};

/// Per-agent results of one tick, indexed by UAV id.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    /// Zero for agents that were already finished before the tick.
    pub rewards: Vec<f64>,
    pub dones: Vec<bool>,
    pub events: Vec<StepEvents>,
    /// Agents that were flying when the tick started.
    pub active: Vec<bool>,
    /// Ids of finished agents whose action was ignored.
    pub ignored_actions: Vec<usize>,
}

/// Pure step: returns the successor state alongside the report.
pub fn step(
    state: &WorldState,
    actions: &[ActionId],
    config: &EnvConfig,
) -> Result<(WorldState, StepReport), SimError> {
    let mut next = state.clone();
    let report = step_in_place(&mut next, actions, config)?;
    Ok((next, report))
}

fn apply_action(x: &mut f64, y: &mut f64, heading: &mut f64, action: ActionId, c: &EnvConfig) {
    match action {
        ActionId::Fwd => {
            let d = Vec2::from_heading(*heading);
            *x += c.forward_step * d.x;
            *y += c.forward_step * d.y;
        }
        ActionId::RotLeft => *heading = normalize_degrees(*heading + c.turn_step),
        ActionId::RotRight => *heading = normalize_degrees(*heading - c.turn_step),
    }
}

/// Advance `state` by one tick. `actions` holds one entry per UAV id; entries
/// for finished agents are ignored and reported in `ignored_actions`.
pub fn step_in_place(
    state: &mut WorldState,
    actions: &[ActionId],
    config: &EnvConfig,
) -> Result<StepReport, SimError> {
    let n = state.uavs.len();
    if actions.len() != n {
        return Err(SimError::ActionCount { expected: n, got: actions.len() });
    }
    let active: Vec<bool> = state.uavs.iter().map(|u| u.alive).collect();
    let mut ignored_actions = Vec::new();

    for (uav, &action) in state.uavs.iter_mut().zip(actions) {
        if uav.alive {
            apply_action(&mut uav.x, &mut uav.y, &mut uav.heading, action, config);
        } else {
            ignored_actions.push(uav.id);
        }
    }
    state.tick += 1;

    let arena = state.arena;
    let events: Vec<StepEvents> = (0..n)
        .map(|i| {
            if !active[i] {
                return StepEvents::default();
            }
            let me = state.uavs[i].pos();
            let mut ev = StepEvents::default();
            for g in &state.goals {
                if !active.get(g.owner).copied().unwrap_or(false) {
                    continue;
                }
                let d = g.pos().distance(me);
                if g.owner == i {
                    ev.reached_own_goal = d < arena.goal_radius;
                    ev.near_own_goal = d < config.epsilon_proximity;
                } else if d < arena.goal_radius {
                    ev.reached_other_goal = true;
                }
            }
            if ev.reached_own_goal {
                ev.reached_other_goal = false;
            }
            for (j, other) in state.uavs.iter().enumerate() {
                if j == i || !active[j] {
                    continue;
                }
                let d = other.pos().distance(me);
                ev.hit_uav |= d < 2.0 * arena.uav_radius;
                ev.near_other_uav |= d < config.epsilon_proximity;
            }
            ev.hit_obstacle =
                state.obstacles.iter().any(|o| o.shape().distance_to(me) < arena.uav_radius);
            ev.hit_wall = !arena.contains(me);
            ev
        })
        .collect();

    let timed_out = state.tick >= config.max_episode_steps;
    let mut rewards = vec![0.0; n];
    let mut dones = vec![true; n];
    for i in 0..n {
        if !active[i] {
            continue;
        }
        rewards[i] = compute_reward(&events[i], config);
        let outcome = events[i].terminal().or(if timed_out { Some(Outcome::Timeout) } else { None });
        let uav = &mut state.uavs[i];
        uav.outcome = outcome;
        uav.alive = outcome.is_none();
        dones[i] = !uav.alive;
    }

    Ok(StepReport { rewards, dones, events, active, ignored_actions })
}
