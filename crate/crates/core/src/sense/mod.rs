//! Ray-cast perception and observation encoding.
//!
//! A sensor fans `n_rays` rays across an arc centred on the agent heading and
//! reports, per ray, the first surface struck: distance, tag, surface normal
//! and collider. The learnable observation keeps only the tag (one-hot), a
//! miss flag and the range-normalised distance.

mod observe;
mod ray;

pub use observe::{observe, observe_coordinates, ray_angles, scan, ObservationSpec};
pub use ray::{cast_ray, cast_ray_tagged, ray_box, ray_circle, Collider, RayHit, WallSide};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Bumped whenever the tag list or per-ray block layout changes.
pub const TAG_LAYOUT_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SenseError {
    #[error("ray direction must be a non-zero finite vector")]
    InvalidDirection,
    #[error("ray origin must be finite")]
    InvalidOrigin,
    #[error("invalid sensor config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Tag {
    Obstacle,
    Goal,
    OwnGoal,
    Uav,
    Wall,
}

impl Tag {
    pub const ALL: [Tag; 5] = [Tag::Obstacle, Tag::Goal, Tag::OwnGoal, Tag::Uav, Tag::Wall];

    pub fn name(self) -> &'static str {
        match self {
            Tag::Obstacle => "Obstacle",
            Tag::Goal => "Goal",
            Tag::OwnGoal => "OwnGoal",
            Tag::Uav => "UAV",
            Tag::Wall => "Wall",
        }
    }

    pub fn parse(s: &str) -> Option<Tag> {
        Tag::ALL.into_iter().find(|t| t.name().eq_ignore_ascii_case(s))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorConfig {
    pub n_rays: usize,
    /// Total angular span in degrees, centred on the heading.
    pub arc_degrees: f64,
    pub max_range: f64,
    /// Detectable tags; their order fixes the one-hot layout.
    pub tags: Vec<Tag>,
}

impl Default for SensorConfig {
    fn default() -> Self {
        Self { n_rays: 15, arc_degrees: 180.0, max_range: 20.0, tags: Tag::ALL.to_vec() }
    }
}

impl SensorConfig {
    pub fn validate(&self) -> Result<(), SenseError> {
        if self.n_rays == 0 {
            return Err(SenseError::InvalidConfig("n_rays must be >= 1".into()));
        }
        if !(self.arc_degrees > 0.0 && self.arc_degrees <= 360.0) {
            return Err(SenseError::InvalidConfig(format!(
                "arc_degrees must be in (0, 360], got {}",
                self.arc_degrees
            )));
        }
        if !(self.max_range > 0.0 && self.max_range.is_finite()) {
            return Err(SenseError::InvalidConfig("max_range must be > 0".into()));
        }
        if self.tags.is_empty() {
            return Err(SenseError::InvalidConfig("tag set must not be empty".into()));
        }
        for (i, t) in self.tags.iter().enumerate() {
            if self.tags[..i].contains(t) {
                return Err(SenseError::InvalidConfig(format!("duplicate tag {}", t.name())));
            }
        }
        Ok(())
    }

    /// Width of one per-ray block: one-hot tags, miss flag, distance.
    pub fn block_len(&self) -> usize {
        self.tags.len() + 2
    }

    pub fn observation_len(&self) -> usize {
        4 + self.n_rays * self.block_len()
    }

    pub fn tag_index(&self, tag: Tag) -> Option<usize> {
        self.tags.iter().position(|&t| t == tag)
    }
}
