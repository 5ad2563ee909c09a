//! JSON messages exchanged over the session socket.

use serde::{Deserialize, Serialize};

use racil_core::sense::{ray_angles, scan, SensorConfig};
use racil_core::sim::WorldState;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Pilot,
    Replay,
    Watch,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Pilot => "pilot",
            Mode::Replay => "replay",
            Mode::Watch => "watch",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UavWire {
    pub id: usize,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub alive: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoalWire {
    pub owner: usize,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObstacleWire {
    pub cx: f64,
    pub cy: f64,
    pub rot: f64,
    pub hl: f64,
    pub hw: f64,
}

/// One ray of a scan; `distance` is `max_range` on a miss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RayWire {
    /// World-frame direction in degrees.
    pub angle: f64,
    pub distance: f64,
    pub hit: bool,
    pub tag: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateFrame {
    pub tick: u64,
    pub uavs: Vec<UavWire>,
    pub goals: Vec<GoalWire>,
    pub obstacles: Vec<ObstacleWire>,
    /// Per-agent scans; empty for finished agents.
    pub rays: Vec<Vec<RayWire>>,
    /// Per-agent reward of the latest step.
    pub last_reward: Vec<f64>,
    pub done: bool,
    pub recording: bool,
}

impl StateFrame {
    pub fn capture(world: &WorldState, sensor: &SensorConfig, last_reward: &[f64], recording: bool) -> Self {
        let rays = world
            .uavs
            .iter()
            .map(|u| {
                if !u.alive {
                    return Vec::new();
                }
                scan(world, u.id, sensor)
                    .into_iter()
                    .zip(ray_angles(u.heading, sensor))
                    .map(|(h, angle)| RayWire { angle, distance: h.distance, hit: h.hit, tag: h.tag.map(|t| t.name().to_string()) })
                    .collect()
            })
            .collect();
        Self {
            tick: world.tick,
            uavs: world.uavs.iter().map(|u| UavWire { id: u.id, x: u.x, y: u.y, heading: u.heading, alive: u.alive }).collect(),
            goals: world.goals.iter().map(|g| GoalWire { owner: g.owner, x: g.x, y: g.y }).collect(),
            obstacles: world
                .obstacles
                .iter()
                .map(|o| ObstacleWire { cx: o.cx, cy: o.cy, rot: o.rotation, hl: o.half_length, hw: o.half_width })
                .collect(),
            rays,
            last_reward: last_reward.to_vec(),
            done: world.all_done(),
            recording,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlCmd {
    Reset,
    RecordStart,
    RecordStop,
    Save,
    Play,
    Pause,
    StepFwd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMsg {
    Hello { schema_version: u32 },
    Action { agent_id: usize, action: u8 },
    Control { cmd: ControlCmd },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMsg {
    Hello { schema_version: u32, mode: Mode, n_uavs: usize },
    State(StateFrame),
    Saved { path: String, episodes: usize },
    Info { message: String },
    Busy { message: String },
    Error { code: String, message: String },
}

impl ServerMsg {
    pub fn error(code: &str, message: impl Into<String>) -> Self {
        ServerMsg::Error { code: code.into(), message: message.into() }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("server messages serialize")
    }
}

/// Parse a client message, mapping failures to the error reply.
pub fn parse_client(text: &str) -> Result<ClientMsg, ServerMsg> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| ServerMsg::error("bad_json", format!("not JSON: {e}")))?;
    match value.get("type").and_then(|t| t.as_str()) {
        Some("hello" | "action" | "control") => {}
        Some(other) => return Err(ServerMsg::error("unknown_type", format!("unknown message type `{other}`"))),
        None => return Err(ServerMsg::error("bad_message", "missing `type` field")),
    }
    serde_json::from_value(value).map_err(|e| ServerMsg::error("bad_message", e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn client_messages_use_the_documented_shapes() {
        assert_eq!(
            parse_client(r#"{"type":"action","agent_id":0,"action":2}"#).unwrap(),
            ClientMsg::Action { agent_id: 0, action: 2 }
        );
        assert_eq!(
            parse_client(r#"{"type":"control","cmd":"record_start"}"#).unwrap(),
            ClientMsg::Control { cmd: ControlCmd::RecordStart }
        );
        assert_eq!(parse_client(r#"{"type":"hello","schema_version":1}"#).unwrap(), ClientMsg::Hello { schema_version: 1 });
        for (bad, code) in [("{", "bad_json"), (r#"{"type":"jump"}"#, "unknown_type"), (r#"{"type":"control","cmd":"fly"}"#, "bad_message")] {
            match parse_client(bad) {
                Err(ServerMsg::Error { code: c, .. }) => assert_eq!(c, code),
                other => panic!("{other:?}"),
            }
        }
    }

    #[test]
    fn state_frame_field_names() {
        let env = racil_core::sim::EnvConfig::default();
        let w = racil_core::sim::spawn_episode(&env, 1).unwrap();
        let f = ServerMsg::State(StateFrame::capture(&w, &SensorConfig::default(), &[0.0], false));
        let v: serde_json::Value = serde_json::from_str(&f.to_json()).unwrap();
        assert_eq!(v["type"], "state");
        for k in ["tick", "uavs", "goals", "obstacles", "rays", "last_reward", "done", "recording"] {
            assert!(v.get(k).is_some(), "{k}");
        }
        for k in ["cx", "cy", "rot", "hl", "hw"] {
            assert!(v["obstacles"][0].get(k).is_some(), "{k}");
        }
        for k in ["id", "x", "y", "heading", "alive"] {
            assert!(v["uavs"][0].get(k).is_some(), "{k}");
        }
        assert_eq!(v["rays"][0].as_array().unwrap().len(), 15);
    }
}
