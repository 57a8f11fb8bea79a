//! End-effector trajectory metrics (speed, path length, spectral arc-length
//! smoothness) and aggregation of episode logs into summary tables.

mod episodes;
mod sparc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Pose, Quat};

pub use episodes::{
    aggregate, failure_counts, parse_episodes, render_table, EpisodeEvent, EpisodeMetrics, EpisodeRecord, EventKind,
    FailureCounts, MetricsSummary, TaskBundle, Variation, EPISODE_SCHEMA_VERSION,
};
pub use sparc::{sparc, sparc_with, SparcConfig, SparcResult};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),
    #[error("speed profile is identically zero")]
    ZeroProfile,
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("episode references unknown task '{0}'")]
    UnknownTask(String),
    #[error("task evaluation failed: {0}")]
    Task(String),
}

/// End-effector pose and gripper opening at time `t` (seconds).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "SampleWire", try_from = "SampleWire")]
pub struct Sample {
    pub t: f64,
    pub pose: Pose,
    pub gripper: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SampleWire {
    t: f64,
    position: [f64; 3],
    orientation: [f64; 4],
    #[serde(default)]
    gripper: f64,
}

impl From<Sample> for SampleWire {
    fn from(s: Sample) -> Self {
        Self { t: s.t, position: s.pose.position.to_array(), orientation: s.pose.orientation().to_array(), gripper: s.gripper }
    }
}

impl TryFrom<SampleWire> for Sample {
    type Error = String;

    fn try_from(w: SampleWire) -> Result<Self, String> {
        let [qw, qx, qy, qz] = w.orientation;
        let pose = Pose::new(w.position.into(), Quat::new(qw, qx, qy, qz)).map_err(|e| e.to_string())?;
        Ok(Self { t: w.t, pose, gripper: w.gripper })
    }
}

/// Time-stamped end-effector samples with strictly increasing times.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Trajectory {
    samples: Vec<Sample>,
}

impl Trajectory {
    pub fn new(samples: Vec<Sample>) -> Result<Self, MetricsError> {
        if samples.len() < 2 {
            return Err(MetricsError::InvalidTrajectory("needs at least two samples".into()));
        }
        for w in samples.windows(2) {
            if !(w[1].t > w[0].t) {
                return Err(MetricsError::InvalidTrajectory(format!(
                    "timestamps must increase strictly ({} then {})",
                    w[0].t, w[1].t
                )));
            }
        }
        if samples.iter().any(|s| !s.t.is_finite()) {
            return Err(MetricsError::InvalidTrajectory("non-finite timestamp".into()));
        }
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn start(&self) -> f64 {
        self.samples[0].t
    }

    pub fn end(&self) -> f64 {
        self.samples[self.samples.len() - 1].t
    }

    pub fn duration(&self) -> f64 {
        self.end() - self.start()
    }
}

impl<'de> Deserialize<'de> for Trajectory {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        Trajectory::new(Vec::<Sample>::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}

/// Speed at each sample time. Interior points use the second-order
/// three-point derivative for uneven spacing; end points are one-sided.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeedProfile {
    pub t: Vec<f64>,
    pub v: Vec<f64>,
}

pub fn speed_profile(traj: &Trajectory) -> SpeedProfile {
    let s = traj.samples();
    let n = s.len();
    let p: Vec<[f64; 3]> = s.iter().map(|x| x.pose.position.to_array()).collect();
    let t: Vec<f64> = s.iter().map(|x| x.t).collect();
    let mut v = Vec::with_capacity(n);
    for i in 0..n {
        let vel: [f64; 3] = if i == 0 || i == n - 1 {
            let (a, b) = if i == 0 { (0, 1) } else { (n - 2, n - 1) };
            let dt = t[b] - t[a];
            std::array::from_fn(|k| (p[b][k] - p[a][k]) / dt)
        } else {
            let hm = t[i] - t[i - 1];
            let hp = t[i + 1] - t[i];
            std::array::from_fn(|k| {
                (hm * hm * p[i + 1][k] - hp * hp * p[i - 1][k] + (hp * hp - hm * hm) * p[i][k]) / (hm * hp * (hm + hp))
            })
        };
        v.push((vel[0] * vel[0] + vel[1] * vel[1] + vel[2] * vel[2]).sqrt());
    }
    SpeedProfile { t, v }
}

impl SpeedProfile {
    /// Linear resampling onto a uniform grid at the median input spacing.
    /// Returns the samples and the grid step.
    pub fn resample_uniform(&self) -> (Vec<f64>, f64) {
        let mut gaps: Vec<f64> = self.t.windows(2).map(|w| w[1] - w[0]).collect();
        gaps.sort_by(f64::total_cmp);
        let dt = gaps[gaps.len() / 2];
        let uniform = gaps.first() == gaps.last();
        if uniform {
            return (self.v.clone(), dt);
        }
        let t0 = self.t[0];
        let span = self.t[self.t.len() - 1] - t0;
        let m = (span / dt + 1e-9).floor() as usize + 1;
        let mut out = Vec::with_capacity(m);
        let mut j = 0;
        for k in 0..m {
            let tk = t0 + k as f64 * dt;
            while j + 2 < self.t.len() && self.t[j + 1] < tk {
                j += 1;
            }
            let (ta, tb) = (self.t[j], self.t[j + 1]);
            let w = ((tk - ta) / (tb - ta)).clamp(0.0, 1.0);
            out.push(self.v[j] * (1.0 - w) + self.v[j + 1] * w);
        }
        (out, dt)
    }

    pub fn mean(&self) -> f64 {
        let (v, _) = self.resample_uniform();
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Sum of distances between consecutive positions.
pub fn path_length(traj: &Trajectory) -> f64 {
    traj.samples().windows(2).map(|w| w[0].pose.position.distance(w[1].pose.position)).sum()
}
