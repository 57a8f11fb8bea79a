use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{path_length, speed_profile, sparc, MetricsError, Trajectory};
use crate::geometry::Pose;
use crate::task_model::{graded_score, EvalContext, SceneState, TaskSpec};

pub const EPISODE_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    WrongObjectGrasped,
    ObjectDropped,
    GripperCollision,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpisodeEvent {
    pub t: f64,
    pub kind: EventKind,
    pub object: String,
}

/// Value of one varied factor for an episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Variation {
    Number(f64),
    Pose(Pose),
    Category(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpisodeRecord {
    #[serde(default = "default_version")]
    pub schema_version: u32,
    pub task_id: String,
    /// 1 for success, 0 for failure.
    pub outcome: u8,
    #[serde(default)]
    pub variation: BTreeMap<String, Variation>,
    pub trajectory: Trajectory,
    #[serde(default)]
    pub events: Vec<EpisodeEvent>,
    /// Optional time-ordered scene snapshots, final state last.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub states: Option<Vec<SceneState>>,
}

fn default_version() -> u32 {
    EPISODE_SCHEMA_VERSION
}

impl EpisodeRecord {
    pub fn check(&self) -> Result<(), String> {
        if self.schema_version != EPISODE_SCHEMA_VERSION {
            return Err(format!("unsupported schema version {}", self.schema_version));
        }
        if self.outcome > 1 {
            return Err(format!("outcome must be 0 or 1, got {}", self.outcome));
        }
        let (a, b) = (self.trajectory.start(), self.trajectory.end());
        if let Some(e) = self.events.iter().find(|e| !(e.t >= a && e.t <= b)) {
            return Err(format!("event at t={} lies outside the trajectory [{a}, {b}]", e.t));
        }
        Ok(())
    }

    pub fn success(&self) -> bool {
        self.outcome == 1
    }
}

/// Parses a JSON-lines episode log; blank lines are skipped.
pub fn parse_episodes(text: &str) -> Result<Vec<EpisodeRecord>, MetricsError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| MetricsError::Parse { line: i + 1, message };
        let de = &mut serde_json::Deserializer::from_str(line);
        let rec: EpisodeRecord = serde_path_to_error::deserialize(de)
            .map_err(|e| parse_err(format!("{}: {}", e.path(), e.inner())))?;
        rec.check().map_err(parse_err)?;
        out.push(rec);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FailureCounts {
    pub wrong_object_grasped: usize,
    pub object_dropped: usize,
    pub gripper_collision: usize,
    /// Wrong-object grasps per object name.
    pub wrong_objects: BTreeMap<String, usize>,
}

pub fn failure_counts(episodes: &[EpisodeRecord]) -> FailureCounts {
    let mut c = FailureCounts::default();
    for e in episodes.iter().flat_map(|ep| &ep.events) {
        match e.kind {
            EventKind::WrongObjectGrasped => {
                c.wrong_object_grasped += 1;
                *c.wrong_objects.entry(e.object.clone()).or_default() += 1;
            }
            EventKind::ObjectDropped => c.object_dropped += 1,
            EventKind::GripperCollision => c.gripper_collision += 1,
        }
    }
    c
}

/// A task together with what is needed to score states against it.
#[derive(Debug, Clone)]
pub struct TaskBundle {
    pub spec: TaskSpec,
    pub ctx: EvalContext,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub task_id: String,
    pub success: bool,
    pub score: f64,
    /// Undefined for an end effector that never moves.
    pub sparc: Option<f64>,
    pub speed_cm_s: f64,
    pub path_length: f64,
    pub duration: f64,
}

impl EpisodeMetrics {
    pub fn compute(ep: &EpisodeRecord, task: &TaskBundle) -> Result<Self, MetricsError> {
        let profile = speed_profile(&ep.trajectory);
        let (uniform, dt) = profile.resample_uniform();
        let sparc = match sparc(&uniform, dt) {
            Ok(v) => Some(v),
            Err(MetricsError::ZeroProfile) => None,
            Err(e) => return Err(e),
        };
        let score = match &ep.states {
            Some(states) if !states.is_empty() => {
                graded_score(&task.spec, states, &task.ctx).map_err(|e| MetricsError::Task(e.to_string()))?
            }
            _ => f64::from(ep.outcome),
        };
        Ok(Self {
            task_id: ep.task_id.clone(),
            success: ep.success(),
            score,
            sparc,
            speed_cm_s: 100.0 * uniform.iter().sum::<f64>() / uniform.len() as f64,
            path_length: path_length(&ep.trajectory),
            duration: ep.trajectory.duration(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub episodes: usize,
    pub success_pct: f64,
    pub mean_score: f64,
    pub sparc_mean: Option<f64>,
    pub sparc_std: Option<f64>,
    pub speed_mean_cm_s: f64,
    pub speed_std_cm_s: f64,
    pub path_length_mean: f64,
    pub path_length_std: f64,
    pub duration_mean_s: f64,
    pub failures: FailureCounts,
}

/// Mean and population standard deviation, summed in sorted order so the
/// result does not depend on input order.
fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let mut sq: Vec<f64> = v.iter().map(|x| (x - mean).powi(2)).collect();
    sq.sort_by(f64::total_cmp);
    (mean, (sq.iter().sum::<f64>() / n).sqrt())
}

fn summarize(episodes: &[EpisodeRecord], metrics: &[EpisodeMetrics]) -> MetricsSummary {
    let n = metrics.len();
    let col = |f: fn(&EpisodeMetrics) -> f64| metrics.iter().map(f).collect::<Vec<f64>>();
    let sparcs: Vec<f64> = metrics.iter().filter_map(|m| m.sparc).collect();
    let (sparc_mean, sparc_std) = mean_std(&sparcs);
    let (speed_mean, speed_std) = mean_std(&col(|m| m.speed_cm_s));
    let (path_mean, path_std) = mean_std(&col(|m| m.path_length));
    let successes = metrics.iter().filter(|m| m.success).count();
    MetricsSummary {
        episodes: n,
        success_pct: if n == 0 { 0.0 } else { 100.0 * successes as f64 / n as f64 },
        mean_score: mean_std(&col(|m| m.score)).0,
        sparc_mean: (!sparcs.is_empty()).then_some(sparc_mean),
        sparc_std: (!sparcs.is_empty()).then_some(sparc_std),
        speed_mean_cm_s: speed_mean,
        speed_std_cm_s: speed_std,
        path_length_mean: path_mean,
        path_length_std: path_std,
        duration_mean_s: mean_std(&col(|m| m.duration)).0,
        failures: failure_counts(episodes),
    }
}

fn per_episode(episodes: &[EpisodeRecord], tasks: &[TaskBundle]) -> Result<Vec<EpisodeMetrics>, MetricsError> {
    let index: BTreeMap<&str, &TaskBundle> = tasks.iter().map(|t| (t.spec.name.as_str(), t)).collect();
    episodes
        .iter()
        .map(|ep| {
            let task = index.get(ep.task_id.as_str()).ok_or_else(|| MetricsError::UnknownTask(ep.task_id.clone()))?;
            EpisodeMetrics::compute(ep, task)
        })
        .collect()
}

/// Summary over all episodes followed by one row per task (sorted by name).
pub fn aggregate(
    episodes: &[EpisodeRecord],
    tasks: &[TaskBundle],
) -> Result<(MetricsSummary, Vec<(String, MetricsSummary)>), MetricsError> {
    let metrics = per_episode(episodes, tasks)?;
    let overall = summarize(episodes, &metrics);
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, m) in metrics.iter().enumerate() {
        groups.entry(m.task_id.as_str()).or_default().push(i);
    }
    let rows = groups
        .into_iter()
        .map(|(name, idx)| {
            let eps: Vec<EpisodeRecord> = idx.iter().map(|&i| episodes[i].clone()).collect();
            let ms: Vec<EpisodeMetrics> = idx.iter().map(|&i| metrics[i].clone()).collect();
            (name.to_owned(), summarize(&eps, &ms))
        })
        .collect();
    Ok((overall, rows))
}

/// Aligned plain-text table, one line per row.
pub fn render_table(rows: &[(String, MetricsSummary)]) -> String {
    let header = ["Task", "N", "Succ%", "Score", "SPARC", "Speed(cm/s)", "PathLen(m)", "WrongObj", "Dropped", "Collisions"];
    let cells: Vec<Vec<String>> = rows
        .iter()
        .map(|(name, s)| {
            vec![
                name.clone(),
                s.episodes.to_string(),
                format!("{:.1}", s.success_pct),
                format!("{:.2}", s.mean_score),
                match (s.sparc_mean, s.sparc_std) {
                    (Some(m), Some(d)) => format!("{m:.2} ± {d:.2}"),
                    _ => "-".into(),
                },
                format!("{:.2} ± {:.2}", s.speed_mean_cm_s, s.speed_std_cm_s),
                format!("{:.2}", s.path_length_mean),
                s.failures.wrong_object_grasped.to_string(),
                s.failures.object_dropped.to_string(),
                s.failures.gripper_collision.to_string(),
            ]
        })
        .collect();
    let widths: Vec<usize> = (0..header.len())
        .map(|c| cells.iter().map(|r| r[c].chars().count()).chain([header[c].len()]).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    let line = |out: &mut String, row: &[String]| {
        let parts: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(c, v)| {
                let pad = widths[c] - v.chars().count();
                if c == 0 { format!("{v}{}", " ".repeat(pad)) } else { format!("{}{v}", " ".repeat(pad)) }
            })
            .collect();
        let _ = writeln!(out, "{}", parts.join("  ").trim_end());
    };
    line(&mut out, &header.map(String::from));
    for r in &cells {
        line(&mut out, r);
    }
    out
}
