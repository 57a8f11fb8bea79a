use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::client::{strip_code_fence, ChatClient};
use super::prompts::{build_task_prompt, task_fix_prompt};
use super::scene_gen::{GenReport, DEFAULT_MAX_ATTEMPTS};
use super::GenError;
use crate::scene_model::Scene;
use crate::task_model::{parse_task_spec, Axis, Difficulty, PredicateKind, Subcategory, TaskSpec, TABLE};

pub const DEFAULT_CLEARANCE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskViolationKind {
    Schema,
    UnknownObject,
    ForbiddenObject,
    ContainerTooSmall,
    Duplicate,
    WrongSubcategory,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskViolation {
    pub kind: TaskViolationKind,
    pub message: String,
}

impl TaskViolation {
    fn new(kind: TaskViolationKind, message: String) -> Self {
        Self { kind, message }
    }
}

/// Asset rules a generated task must obey.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskRules {
    pub forbidden: BTreeSet<String>,
    /// Minimum gap between an object's footprint and a container opening.
    pub clearance: f64,
    /// Instructions already used; compared case-insensitively.
    pub prior_instructions: Vec<String>,
}

impl Default for TaskRules {
    fn default() -> Self {
        Self { forbidden: BTreeSet::new(), clearance: DEFAULT_CLEARANCE, prior_instructions: Vec::new() }
    }
}

fn normalized_instruction(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

/// Object existence, forbidden set, containment fit, and duplicates.
pub fn validate_task(task: &TaskSpec, scene: &Scene, rules: &TaskRules) -> Vec<TaskViolation> {
    use TaskViolationKind as K;
    let mut out = Vec::new();
    if let Err(e) = task.check() {
        out.push(TaskViolation::new(K::Schema, e.to_string()));
    }
    let mut seen = BTreeSet::new();
    for c in task.conditions() {
        for name in c.objects() {
            if !seen.insert(name.to_owned()) {
                continue;
            }
            if scene.get(name).is_none() {
                out.push(TaskViolation::new(K::UnknownObject, format!("'{name}' is not in the scene")));
            } else if rules.forbidden.contains(name) {
                out.push(TaskViolation::new(K::ForbiddenObject, format!("'{name}' may not be used")));
            }
        }
    }
    let mut checked = BTreeSet::new();
    for c in task.conditions() {
        if !matches!(c.predicate, PredicateKind::Inside | PredicateKind::CountIn) {
            continue;
        }
        let Some(container) = c.reference.as_deref().filter(|r| *r != TABLE).and_then(|r| scene.get(r)) else {
            continue;
        };
        for s in &c.subjects {
            let Some(obj) = scene.get(s) else { continue };
            if !checked.insert((s.clone(), container.name.clone())) {
                continue;
            }
            let opening = container.dims.x.min(container.dims.y);
            let width = obj.dims.x.max(obj.dims.y);
            if width + rules.clearance > opening || obj.dims.z > container.dims.z {
                out.push(TaskViolation::new(
                    K::ContainerTooSmall,
                    format!(
                        "'{s}' ({:.3} x {:.3} x {:.3} m) does not fit in '{}' ({:.3} x {:.3} x {:.3} m) with {:.3} m clearance",
                        obj.dims.x, obj.dims.y, obj.dims.z, container.name, container.dims.x, container.dims.y,
                        container.dims.z, rules.clearance
                    ),
                ));
            }
        }
    }
    let me = normalized_instruction(&task.instruction);
    if rules.prior_instructions.iter().any(|p| normalized_instruction(p) == me) {
        out.push(TaskViolation::new(K::Duplicate, format!("instruction \"{}\" was already generated", task.instruction)));
    }
    out
}

/// Parses a task document and validates it; parse failures become schema
/// violations.
pub fn validate_task_json(text: &str, scene: &Scene, rules: &TaskRules) -> Result<TaskSpec, Vec<TaskViolation>> {
    let task = parse_task_spec(strip_code_fence(text))
        .map_err(|e| vec![TaskViolation::new(TaskViolationKind::Schema, e.to_string())])?;
    let v = validate_task(&task, scene, rules);
    if v.is_empty() {
        Ok(task)
    } else {
        Err(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TaskRequest {
    pub axis: Axis,
    pub subcategory: Subcategory,
    pub difficulty: Difficulty,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskGenConfig {
    pub max_attempts: usize,
    pub temperature: f64,
    pub forbidden: BTreeSet<String>,
    pub clearance: f64,
}

impl Default for TaskGenConfig {
    fn default() -> Self {
        Self { max_attempts: DEFAULT_MAX_ATTEMPTS, temperature: 0.7, forbidden: BTreeSet::new(), clearance: DEFAULT_CLEARANCE }
    }
}

/// Generates one task for `scene`, issuing fix prompts on invalid output.
pub fn generate_task(
    scene: &Scene,
    scene_id: &str,
    request: TaskRequest,
    client: &ChatClient,
    prior: &[TaskSpec],
    cfg: &TaskGenConfig,
) -> Result<(TaskSpec, GenReport), GenError> {
    if scene.placements.is_empty() {
        return Err(GenError::InvalidInput("scene has no objects".into()));
    }
    if request.subcategory.axis() != request.axis {
        return Err(GenError::InvalidInput(format!(
            "subcategory '{}' does not belong to the requested axis",
            request.subcategory.name()
        )));
    }
    if cfg.max_attempts == 0 {
        return Err(GenError::InvalidInput("max_attempts must be at least 1".into()));
    }
    let rules = TaskRules {
        forbidden: cfg.forbidden.clone(),
        clearance: cfg.clearance,
        prior_instructions: prior.iter().map(|t| t.instruction.clone()).collect(),
    };
    let (system, base_user) = build_task_prompt(scene, scene_id, request.subcategory, request.difficulty, prior);
    let mut report = GenReport::new(cfg.max_attempts);
    let mut user = base_user.clone();
    while report.attempts < cfg.max_attempts {
        report.attempts += 1;
        let response = client.complete(&system, &user, cfg.temperature)?;
        let result = validate_task_json(&response, scene, &rules).and_then(|mut task| {
            if !task.subcategories.contains(&request.subcategory) {
                return Err(vec![TaskViolation::new(
                    TaskViolationKind::WrongSubcategory,
                    format!("task must list subcategory '{}'", request.subcategory.name()),
                )]);
            }
            if task.scene != scene_id {
                report.notes.push(format!("scene id '{}' replaced by '{scene_id}'", task.scene));
                task.scene = scene_id.to_owned();
            }
            Ok(task)
        });
        match result {
            Ok(task) => {
                report.success = true;
                report.output = serde_json::to_value(&task).ok();
                return Ok((task, report));
            }
            Err(violations) => {
                let errors: Vec<String> = violations.iter().map(|v| v.message.clone()).collect();
                log::info!("task attempt {} failed: {}", report.attempts, errors.join("; "));
                user = task_fix_prompt(&base_user, &response, &errors);
                report.feedback.push(errors.join("\n"));
            }
        }
    }
    Err(GenError::Exhausted(Box::new(report)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Pose, TableBounds, Vec3};
    use crate::scene_model::Placement;
    use crate::task_model::{Subtask, TerminationCondition};

    fn scene() -> Scene {
        let p = |name: &str, x: f64, dims: Vec3| Placement {
            name: name.into(),
            pose: Pose::from_position_yaw(Vec3::new(x, 0.0, dims.z / 2.0), 0.0),
            dims,
            parent: None,
        };
        Scene::new(
            vec![
                p("mug", 0.3, Vec3::new(0.12, 0.09, 0.1)),
                p("large_box", 0.5, Vec3::new(0.22, 0.22, 0.1)),
                p("bowl_0", 0.7, Vec3::new(0.16, 0.16, 0.07)),
                p("lime", 0.8, Vec3::new(0.06, 0.05, 0.05)),
            ],
            TableBounds::default(),
        )
        .unwrap()
    }

    fn task(cond: TerminationCondition, instruction: &str) -> TaskSpec {
        TaskSpec {
            schema_version: 1,
            name: "t".into(),
            instruction: instruction.into(),
            scene: "s".into(),
            subcategories: vec![Subcategory::Recognition],
            difficulty: Difficulty::Simple,
            subtasks: vec![Subtask { label: "a".into(), steps: vec![cond] }],
            metadata: Default::default(),
        }
    }

    #[test]
    fn oversized_containment() {
        let t = task(TerminationCondition::new(PredicateKind::Inside, &["large_box"], Some("mug"), None), "box in mug");
        let v = validate_task(&t, &scene(), &TaskRules::default());
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].kind, TaskViolationKind::ContainerTooSmall);
    }

    #[test]
    fn fitting_task_is_clean() {
        let t = task(TerminationCondition::new(PredicateKind::Inside, &["lime"], Some("bowl_0"), None), "lime in bowl");
        assert!(validate_task(&t, &scene(), &TaskRules::default()).is_empty());
    }

    #[test]
    fn clearance_is_inclusive() {
        // 0.15 + 0.01 == 0.16 exactly fits.
        let mut s = scene();
        s.placements[3].dims = Vec3::new(0.15, 0.05, 0.05);
        let t = task(TerminationCondition::new(PredicateKind::Inside, &["lime"], Some("bowl_0"), None), "x");
        assert!(validate_task(&t, &s, &TaskRules::default()).is_empty());
    }

    #[test]
    fn unknown_and_forbidden_objects() {
        let t = task(TerminationCondition::new(PredicateKind::OnTopOf, &["ghost"], Some("mug"), None), "x");
        let rules = TaskRules { forbidden: ["mug".to_string()].into(), ..Default::default() };
        let kinds: Vec<_> = validate_task(&t, &scene(), &rules).into_iter().map(|v| v.kind).collect();
        assert_eq!(kinds, vec![TaskViolationKind::UnknownObject, TaskViolationKind::ForbiddenObject]);
        let table = task(TerminationCondition::new(PredicateKind::OnTopOf, &["lime"], Some("table"), None), "x");
        assert!(validate_task(&table, &scene(), &TaskRules::default()).is_empty());
    }

    #[test]
    fn unknown_predicate_is_schema_violation() {
        let text = r#"{"name": "t", "instruction": "x", "scene": "s", "subtasks": [
            {"label": "a", "steps": [{"predicate": "levitating", "subjects": ["lime"]}]}]}"#;
        let v = validate_task_json(text, &scene(), &TaskRules::default()).unwrap_err();
        assert_eq!(v[0].kind, TaskViolationKind::Schema);
    }

    #[test]
    fn duplicate_instruction_case_insensitive() {
        let t = task(TerminationCondition::new(PredicateKind::Grasped, &["lime"], None, None), "Pick  up the LIME");
        let rules = TaskRules { prior_instructions: vec!["pick up the lime".into()], ..Default::default() };
        let v = validate_task(&t, &scene(), &rules);
        assert_eq!(v[0].kind, TaskViolationKind::Duplicate);
    }
}
