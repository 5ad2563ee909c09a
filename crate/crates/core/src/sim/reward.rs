use super::{EnvConfig, Outcome, StepEvents};

/// Terminal term: at most one of `+r_f`, `-r_f`, `-r_f/2` per step.
pub fn collision_term(events: &StepEvents, config: &EnvConfig) -> f64 {
    match events.terminal() {
        Some(Outcome::ReachedOwnGoal) => config.r_f,
        Some(Outcome::ReachedOtherGoal) | Some(Outcome::HitUav) => -config.r_f,
        Some(Outcome::HitObstacle) | Some(Outcome::HitWall) => -config.r_f / 2.0,
        Some(Outcome::Timeout) | None => 0.0,
    }
}

pub fn proximity_term(events: &StepEvents, config: &EnvConfig) -> f64 {
    let mut r = 0.0;
    if events.near_own_goal {
        r += config.r_p;
    }
    if events.near_other_uav {
        r -= config.r_p;
    }
    r
}

pub fn time_penalty_term(config: &EnvConfig) -> f64 {
    -config.r_tp
}

/// Extrinsic reward of one agent for one step.
pub fn compute_reward(events: &StepEvents, config: &EnvConfig) -> f64 {
    collision_term(events, config) + proximity_term(events, config) + time_penalty_term(config)
}
