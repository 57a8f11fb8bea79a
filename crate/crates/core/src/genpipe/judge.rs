use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::client::{strip_code_fence, ChatClient};
use super::prompts::build_judge_prompt;
use super::GenError;
use crate::scene_model::Scene;
use crate::task_model::{PredicateKind, TaskSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Aligned,
    #[serde(alias = "partially aligned", alias = "partially_aligned")]
    Partial,
    Misaligned,
}

/// Weights over (relation, target, object, quantifier, clarity, feasibility).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JudgeWeights(pub [f64; 6]);

impl Default for JudgeWeights {
    fn default() -> Self {
        Self([1.0 / 6.0; 6])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeScores {
    pub relation: f64,
    pub target: f64,
    pub object: f64,
    pub quantifier: f64,
    pub clarity: f64,
    pub feasibility: f64,
    /// Weighted mean of the six scores, always recomputed locally.
    pub alignment: f64,
    pub verdict: Verdict,
    pub weights: JudgeWeights,
}

impl JudgeScores {
    pub fn new(dims: [f64; 6], verdict: Verdict, weights: JudgeWeights) -> Result<Self, String> {
        if let Some(v) = dims.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(format!("score {v} is outside [0, 1]"));
        }
        let total: f64 = weights.0.iter().sum();
        if weights.0.iter().any(|w| !(*w >= 0.0)) || total <= 0.0 {
            return Err("judge weights must be non-negative with a positive sum".into());
        }
        let alignment = (dims.iter().zip(&weights.0).map(|(s, w)| s * w).sum::<f64>() / total).clamp(0.0, 1.0);
        let [relation, target, object, quantifier, clarity, feasibility] = dims;
        Ok(Self { relation, target, object, quantifier, clarity, feasibility, alignment, verdict, weights })
    }

    pub fn dims(&self) -> [f64; 6] {
        [self.relation, self.target, self.object, self.quantifier, self.clarity, self.feasibility]
    }

    /// Mean of the four semantic match dimensions.
    pub fn semantic_match(&self) -> f64 {
        (self.relation + self.target + self.object + self.quantifier) / 4.0
    }
}

#[derive(Deserialize)]
struct JudgeWire {
    #[serde(alias = "relation")]
    relation_match: f64,
    #[serde(alias = "target")]
    target_match: f64,
    #[serde(alias = "object")]
    object_match: f64,
    #[serde(alias = "quantifier")]
    quantifier_match: f64,
    clarity: f64,
    feasibility: f64,
    verdict: Verdict,
}

pub fn parse_judge_response(text: &str, weights: JudgeWeights) -> Result<JudgeScores, String> {
    let w: JudgeWire = serde_json::from_str(strip_code_fence(text)).map_err(|e| e.to_string())?;
    JudgeScores::new(
        [w.relation_match, w.target_match, w.object_match, w.quantifier_match, w.clarity, w.feasibility],
        w.verdict,
        weights,
    )
}

pub const JUDGE_TEMPERATURE: f64 = 0.0;

/// Scores one task. Unparseable answers are re-requested up to
/// `max_attempts` times in total.
pub fn judge_task(
    task: &TaskSpec,
    client: &ChatClient,
    weights: JudgeWeights,
    max_attempts: usize,
) -> Result<JudgeScores, GenError> {
    let (system, user) = build_judge_prompt(task);
    let mut last = String::new();
    for _ in 0..max_attempts.max(1) {
        let response = client.complete(&system, &user, JUDGE_TEMPERATURE)?;
        match parse_judge_response(&response, weights) {
            Ok(s) => return Ok(s),
            Err(e) => {
                log::warn!("judge answer for '{}' unusable: {e}", task.name);
                last = e;
            }
        }
    }
    Err(GenError::Judge(format!("'{}': {last}", task.name)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeSummary {
    pub tasks: usize,
    pub alignment: f64,
    pub clarity: f64,
    pub feasibility: f64,
    pub semantic_match: f64,
    pub aligned_pct: f64,
    pub partial_pct: f64,
    pub misaligned_pct: f64,
}

pub fn summarize_judgements(scores: &[JudgeScores]) -> JudgeSummary {
    let n = scores.len().max(1) as f64;
    let mean = |f: fn(&JudgeScores) -> f64| scores.iter().map(f).sum::<f64>() / n;
    let pct = |v: Verdict| 100.0 * scores.iter().filter(|s| s.verdict == v).count() as f64 / n;
    JudgeSummary {
        tasks: scores.len(),
        alignment: mean(|s| s.alignment),
        clarity: mean(|s| s.clarity),
        feasibility: mean(|s| s.feasibility),
        semantic_match: mean(JudgeScores::semantic_match),
        aligned_pct: pct(Verdict::Aligned),
        partial_pct: pct(Verdict::Partial),
        misaligned_pct: pct(Verdict::Misaligned),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coverage {
    pub object_coverage: f64,
    pub predicate_coverage: f64,
    pub referenced_objects: usize,
    pub scene_objects: usize,
    pub predicates_used: usize,
    pub library_size: usize,
}

/// Share of scene objects referenced by at least one task and share of the
/// predicate library used. Every scene object counts as manipulable.
pub fn coverage(tasks: &[TaskSpec], scene: &Scene, library: &[PredicateKind]) -> Result<Coverage, GenError> {
    if scene.placements.is_empty() {
        return Err(GenError::InvalidInput("scene has no objects".into()));
    }
    if library.is_empty() {
        return Err(GenError::InvalidInput("predicate library is empty".into()));
    }
    let names: BTreeSet<&str> = scene.names().collect();
    let referenced: BTreeSet<&str> =
        tasks.iter().flat_map(|t| t.conditions()).flat_map(|c| c.objects()).filter(|o| names.contains(o)).collect();
    let lib: BTreeSet<PredicateKind> = library.iter().copied().collect();
    let used: BTreeSet<PredicateKind> =
        tasks.iter().flat_map(|t| t.conditions()).map(|c| c.predicate).filter(|p| lib.contains(p)).collect();
    Ok(Coverage {
        object_coverage: referenced.len() as f64 / names.len() as f64,
        predicate_coverage: used.len() as f64 / lib.len() as f64,
        referenced_objects: referenced.len(),
        scene_objects: names.len(),
        predicates_used: used.len(),
        library_size: lib.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_scores() {
        let s = parse_judge_response(
            r#"{"relation_match": 1, "target_match": 1, "object_match": 1, "quantifier_match": 1, "clarity": 1, "feasibility": 1, "verdict": "aligned"}"#,
            JudgeWeights::default(),
        )
        .unwrap();
        assert_eq!(s.alignment, 1.0);
        assert_eq!(s.verdict, Verdict::Aligned);
    }

    #[test]
    fn mean_of_six() {
        let s = JudgeScores::new([0.8, 1.0, 1.0, 1.0, 0.9, 0.8], Verdict::Partial, JudgeWeights::default()).unwrap();
        assert!((s.alignment - 5.5 / 6.0).abs() < 1e-12);
        assert!((s.alignment - 0.9167).abs() < 5e-5);
    }

    #[test]
    fn rejects_out_of_range_and_accepts_aliases() {
        let bad = r#"{"relation": 1.2, "target": 1, "object": 1, "quantifier": 1, "clarity": 1, "feasibility": 1, "verdict": "aligned"}"#;
        assert!(parse_judge_response(bad, JudgeWeights::default()).is_err());
        let ok = r#"{"relation": 0.5, "target": 1, "object": 1, "quantifier": 1, "clarity": 1, "feasibility": 1, "verdict": "partially aligned"}"#;
        assert_eq!(parse_judge_response(ok, JudgeWeights::default()).unwrap().verdict, Verdict::Partial);
    }

    #[test]
    fn custom_weights() {
        let w = JudgeWeights([1.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        let s = JudgeScores::new([0.2, 0.0, 0.0, 0.0, 0.0, 0.6], Verdict::Misaligned, w).unwrap();
        assert!((s.alignment - 0.4).abs() < 1e-12);
    }

    #[test]
    fn no_tasks_no_coverage() {
        use crate::geometry::{Pose, TableBounds, Vec3};
        use crate::scene_model::Placement;
        let scene = Scene::new(
            vec![Placement {
                name: "lime".into(),
                pose: Pose::from_position_yaw(Vec3::new(0.5, 0.0, 0.025), 0.0),
                dims: Vec3::new(0.05, 0.05, 0.05),
                parent: None,
            }],
            TableBounds::default(),
        )
        .unwrap();
        let c = coverage(&[], &scene, &PredicateKind::ALL).unwrap();
        assert_eq!((c.object_coverage, c.predicate_coverage), (0.0, 0.0));
        assert!(coverage(&[], &Scene::empty(TableBounds::default()), &PredicateKind::ALL).is_err());
    }
}
