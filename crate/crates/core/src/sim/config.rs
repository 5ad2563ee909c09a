use serde::{Deserialize, Serialize};

use super::SimError;

/// Arena, spawn, kinematic and reward parameters of one environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    /// Depth of the lower spawn band `[y_min, y_min + r_min]`.
    pub r_min: f64,
    /// Depth of the upper spawn band `[y_max - r_max, y_max]`.
    pub r_max: f64,
    pub n_obstacles: usize,
    pub n_uavs: usize,
    pub uav_radius: f64,
    pub obstacle_length: f64,
    pub obstacle_width: f64,
    pub goal_radius: f64,
    pub forward_step: f64,
    /// Degrees per rotate action.
    pub turn_step: f64,
    pub epsilon_proximity: f64,
    pub r_f: f64,
    pub r_p: f64,
    pub r_tp: f64,
    pub max_episode_steps: u64,
    /// Flight altitude. Inert in the planar dynamics.
    pub z_0: f64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            x_min: -15.0,
            x_max: 15.0,
            y_min: -15.0,
            y_max: 15.0,
            r_min: 3.5,
            r_max: 3.5,
            n_obstacles: 4,
            n_uavs: 1,
            uav_radius: 0.3,
            obstacle_length: 4.0,
            obstacle_width: 0.5,
            goal_radius: 0.5,
            forward_step: 0.04,
            turn_step: 2.0,
            epsilon_proximity: 5.0,
            r_f: 10_000.0,
            r_p: 0.2,
            r_tp: 1.0,
            max_episode_steps: 3000,
            z_0: 1.0,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let fail = |msg: String| Err(SimError::InvalidConfig(msg));
        let finite = [
            self.x_min,
            self.x_max,
            self.y_min,
            self.y_max,
            self.r_min,
            self.r_max,
            self.uav_radius,
            self.obstacle_length,
            self.obstacle_width,
            self.goal_radius,
            self.forward_step,
            self.turn_step,
            self.epsilon_proximity,
            self.r_f,
            self.r_p,
            self.r_tp,
            self.z_0,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return fail("all numeric parameters must be finite".into());
        }
        if self.x_min >= self.x_max {
            return fail(format!("x_min {} must be < x_max {}", self.x_min, self.x_max));
        }
        if self.y_min >= self.y_max {
            return fail(format!("y_min {} must be < y_max {}", self.y_min, self.y_max));
        }
        if self.r_min <= 0.0 || self.r_max <= 0.0 {
            return fail("spawn band depths r_min, r_max must be > 0".into());
        }
        if self.r_min + self.r_max >= self.y_max - self.y_min {
            return fail(format!(
                "spawn bands overlap: r_min + r_max = {} >= arena height {}",
                self.r_min + self.r_max,
                self.y_max - self.y_min
            ));
        }
        if self.n_uavs == 0 {
            return fail("n_uavs must be >= 1".into());
        }
        let positive = [
            ("uav_radius", self.uav_radius),
            ("obstacle_length", self.obstacle_length),
            ("obstacle_width", self.obstacle_width),
            ("goal_radius", self.goal_radius),
            ("forward_step", self.forward_step),
            ("turn_step", self.turn_step),
            ("epsilon_proximity", self.epsilon_proximity),
        ];
        for (name, v) in positive {
            if v <= 0.0 {
                return fail(format!("{name} must be > 0, got {v}"));
            }
        }
        if !(self.r_f > self.r_p && self.r_p >= 0.0) {
            return fail(format!("need r_f > r_p >= 0, got r_f={} r_p={}", self.r_f, self.r_p));
        }
        if self.r_tp < 0.0 {
            return fail("r_tp must be >= 0".into());
        }
        if self.max_episode_steps == 0 {
            return fail("max_episode_steps must be >= 1".into());
        }
        Ok(())
    }

    /// Width of one obstacle spawn column.
    /// Canonical text of the parameters that shape observations and
    /// kinematics; spawn counts and reward magnitudes are left out so one
    /// demonstration set serves every obstacle and reward setting.
    pub fn geometry_canonical(&self) -> String {
        format!(
            "bounds={:?},{:?},{:?},{:?} forward_step={:?} turn_step={:?} uav_radius={:?} goal_radius={:?}",
            self.x_min, self.x_max, self.y_min, self.y_max, self.forward_step, self.turn_step, self.uav_radius,
            self.goal_radius
        )
    }

    pub fn obstacle_column_width(&self) -> f64 {
        (self.x_max - self.x_min) / self.n_obstacles.max(1) as f64
    }

    pub fn half_extents(&self) -> (f64, f64) {
        ((self.x_max - self.x_min) / 2.0, (self.y_max - self.y_min) / 2.0)
    }

    pub fn center(&self) -> (f64, f64) {
        ((self.x_max + self.x_min) / 2.0, (self.y_max + self.y_min) / 2.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        EnvConfig::default().validate().unwrap();
        assert_eq!(EnvConfig::default().obstacle_column_width(), 7.5);
    }

    #[test]
    fn rejects_overlapping_bands() {
        let cfg = EnvConfig { r_min: 15.0, r_max: 15.0, ..Default::default() };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn rejects_bad_reward_order() {
        let cfg = EnvConfig { r_f: 0.1, r_p: 0.2, ..Default::default() };
        assert!(cfg.validate().is_err());
        let cfg = EnvConfig { turn_step: 0.0, ..Default::default() };
        assert!(cfg.validate().is_err());
    }
}
