use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::TrainError;

pub const METRICS_HEADER: &str = "step,mean_reward,mean_episode_length,success_rate,ppo_policy_loss,value_loss,entropy,bc_loss,gail_disc_loss,gail_reward_mean,lr";

/// One row per policy update.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricsRow {
    pub step: u64,
    pub mean_reward: f64,
    pub mean_episode_length: f64,
    /// Over the most recent finished agent-episodes.
    pub success_rate: f64,
    pub ppo_policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub bc_loss: f64,
    pub gail_disc_loss: f64,
    pub gail_reward_mean: f64,
    pub lr: f64,
}

impl MetricsRow {
    fn floats(&self) -> [f64; 10] {
        [
            self.mean_reward,
            self.mean_episode_length,
            self.success_rate,
            self.ppo_policy_loss,
            self.value_loss,
            self.entropy,
            self.bc_loss,
            self.gail_disc_loss,
            self.gail_reward_mean,
            self.lr,
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.floats().iter().all(|v| v.is_finite())
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.step.to_string();
        for v in self.floats() {
            s.push(',');
            s.push_str(&format!("{v:?}"));
        }
        s
    }

    pub fn from_csv(line: &str) -> Option<Self> {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 11 {
            return None;
        }
        let v: Vec<f64> = f[1..].iter().map(|x| x.parse().ok()).collect::<Option<_>>()?;
        Some(Self {
            step: f[0].parse().ok()?,
            mean_reward: v[0],
            mean_episode_length: v[1],
            success_rate: v[2],
            ppo_policy_loss: v[3],
            value_loss: v[4],
            entropy: v[5],
            bc_loss: v[6],
            gail_disc_loss: v[7],
            gail_reward_mean: v[8],
            lr: v[9],
        })
    }
}

/// Append-only CSV log, flushed after every row.
pub struct MetricsWriter {
    out: BufWriter<File>,
}

impl MetricsWriter {
    pub fn create(path: &Path) -> Result<Self, TrainError> {
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "{METRICS_HEADER}")?;
        out.flush()?;
        Ok(Self { out })
    }

    pub fn append_to(path: &Path) -> Result<Self, TrainError> {
        Ok(Self { out: BufWriter::new(OpenOptions::new().append(true).open(path)?) })
    }

    pub fn write(&mut self, row: &MetricsRow) -> Result<(), TrainError> {
        writeln!(self.out, "{}", row.to_csv())?;
        self.out.flush()?;
        Ok(())
    }
}

/// Parse a metrics log. A final line without its newline, as left by an
/// interrupted writer, is dropped; any other malformed row is an error.
pub fn parse_metrics(text: &str) -> Result<Vec<MetricsRow>, TrainError> {
    let mut lines: Vec<&str> = text.split('\n').collect();
    // After the last '\n' is either "" or an unterminated fragment.
    lines.pop();
    let mut it = lines.into_iter().enumerate();
    match it.next() {
        Some((_, h)) if h.trim_end_matches('\r') == METRICS_HEADER => {}
        Some(_) => return Err(TrainError::Metrics { line: 1, reason: "missing header".into() }),
        None => return Ok(Vec::new()),
    }
    let mut rows: Vec<MetricsRow> = Vec::new();
    for (i, line) in it {
        let row = MetricsRow::from_csv(line.trim_end_matches('\r'))
            .ok_or_else(|| TrainError::Metrics { line: i + 1, reason: format!("malformed row `{line}`") })?;
        if rows.last().is_some_and(|p| p.step >= row.step) {
            return Err(TrainError::Metrics { line: i + 1, reason: "step not increasing".into() });
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRow>, TrainError> {
    parse_metrics(&std::fs::read_to_string(path)?)
}
