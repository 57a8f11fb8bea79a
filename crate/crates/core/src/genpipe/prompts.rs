use rand::seq::SliceRandom;
use rand::Rng;

use super::GenError;
use crate::geometry::TableBounds;
use crate::scene_model::{Catalog, Category, Scene};
use crate::task_model::{Axis, Difficulty, PredicateKind, Subcategory, TaskSpec, TerminationCondition};

pub const PROMPT_VERSION: &str = "v1";

pub const SCENE_SYSTEM: &str = include_str!("../../templates/v1/scene_system.txt");
pub const SCENE_USER: &str = include_str!("../../templates/v1/scene_user.txt");
pub const STRATEGY_SPARSE: &str = include_str!("../../templates/v1/strategy_sparse.txt");
pub const STRATEGY_MEDIUM: &str = include_str!("../../templates/v1/strategy_medium.txt");
pub const STRATEGY_DENSE: &str = include_str!("../../templates/v1/strategy_dense.txt");
pub const FEEDBACK: &str = include_str!("../../templates/v1/feedback.txt");
pub const TASK_SYSTEM: &str = include_str!("../../templates/v1/task_system.txt");
pub const TASK_USER: &str = include_str!("../../templates/v1/task_user.txt");
pub const TASK_FIX: &str = include_str!("../../templates/v1/task_fix.txt");
pub const JUDGE_SYSTEM: &str = include_str!("../../templates/v1/judge_system.txt");
pub const JUDGE_USER: &str = include_str!("../../templates/v1/judge_user.txt");

/// Header that opens every retry block.
pub const RETRY_HEADER: &str = "PREVIOUS ATTEMPT FAILED";

/// Footprint above which an object counts as large, in square meters.
pub const LARGE_FOOTPRINT: f64 = 0.08;
const SUGGESTIONS: usize = 5;

/// Replaces each `{key}` with its value.
pub fn fill(template: &str, values: &[(&str, String)]) -> String {
    let mut out = template.trim_end().to_owned();
    for (k, v) in values {
        out = out.replace(&format!("{{{k}}}"), v);
    }
    out
}

/// Two decimals, trailing zeros trimmed down to one.
fn short(v: f64) -> String {
    let s = format!("{v:.2}");
    let s = s.trim_end_matches('0');
    let s = if s.ends_with('.') { format!("{s}0") } else { s.to_owned() };
    if s == "-0.0" {
        "0.0".into()
    } else {
        s
    }
}

fn names_or_none<'a>(names: impl Iterator<Item = &'a str>) -> String {
    let v: Vec<&str> = names.collect();
    if v.is_empty() {
        "none".into()
    } else {
        v.join(", ")
    }
}

pub fn strategy_block(target_count: usize) -> &'static str {
    match target_count {
        0..=9 => STRATEGY_SPARSE,
        10..=14 => STRATEGY_MEDIUM,
        _ => STRATEGY_DENSE,
    }
}

pub fn scene_system_prompt(bounds: &TableBounds) -> String {
    let [cx, cy] = bounds.center();
    fill(
        SCENE_SYSTEM,
        &[
            ("x_min", format!("{:.2}", bounds.x_min)),
            ("x_max", format!("{:.2}", bounds.x_max)),
            ("y_min", format!("{:.2}", bounds.y_min)),
            ("y_max", format!("{:.2}", bounds.y_max)),
            ("center_x", short(cx)),
            ("center_y", short(cy)),
        ],
    )
}

/// System and user prompt for the scene planner. Diversity suggestions are
/// drawn from the catalog with `rng`.
pub fn build_scene_prompt<R: Rng + ?Sized>(
    theme: &str,
    catalog: &Catalog,
    bounds: &TableBounds,
    target_count: usize,
    rng: &mut R,
) -> Result<(String, String), GenError> {
    if catalog.is_empty() {
        return Err(GenError::InvalidInput("catalog is empty".into()));
    }
    if target_count == 0 {
        return Err(GenError::InvalidInput("target object count must be at least 1".into()));
    }
    let bucket = |c: Category| names_or_none(catalog.by_category(c).map(|e| e.name.as_str()));
    let large = names_or_none(
        catalog.entries().iter().filter(|e| e.footprint_area() > LARGE_FOOTPRINT).map(|e| e.name.as_str()),
    );
    let (a, b) = if bounds.width() <= bounds.depth() {
        (bounds.width(), bounds.depth())
    } else {
        (bounds.depth(), bounds.width())
    };
    let table_size = format!("{}m × {}m = {:.2}m²", short(a), short(b), bounds.area());
    let mut names: Vec<&str> = catalog.entries().iter().map(|e| e.name.as_str()).collect();
    names.sort_unstable();
    let suggested: Vec<&str> = names.choose_multiple(rng, SUGGESTIONS.min(names.len())).copied().collect();
    let user = fill(
        SCENE_USER,
        &[
            ("theme", theme.to_owned()),
            ("target", target_count.to_string()),
            ("table_size", table_size),
            ("large_objects", large),
            ("containers", bucket(Category::Container)),
            ("supports", bucket(Category::Support)),
            ("food", bucket(Category::Food)),
            ("tools", bucket(Category::Tool)),
            ("other", bucket(Category::Other)),
            ("strategy", strategy_block(target_count).trim_end().to_owned()),
            ("suggested", suggested.join(", ")),
        ],
    );
    Ok((scene_system_prompt(bounds), user))
}

pub fn feedback_block(feedback: &str) -> String {
    fill(FEEDBACK, &[("feedback", feedback.to_owned())])
}

/// The user prompt with the retry block appended.
pub fn with_feedback(user: &str, feedback: &str) -> String {
    format!("{user}\n\n{}", feedback_block(feedback))
}

fn predicate_library() -> String {
    PredicateKind::ALL
        .iter()
        .map(|p| {
            let usage = match p {
                PredicateKind::Inside => "subject ends up inside the reference container",
                PredicateKind::OnTopOf => "subject rests on top of the reference (or \"table\")",
                PredicateKind::Near => "subject center within threshold meters of the reference",
                PredicateKind::Lifted => "subject raised clear of its resting height",
                PredicateKind::Upright => "subject standing upright",
                PredicateKind::LeftOf => "subject left of the reference (+Y)",
                PredicateKind::RightOf => "subject right of the reference (-Y)",
                PredicateKind::InFrontOf => "subject in front of the reference (+X)",
                PredicateKind::Behind => "subject behind the reference (-X)",
                PredicateKind::CountIn => "at least threshold of the subjects inside the reference",
                PredicateKind::Grasped => "subject held by the gripper",
            };
            format!("- {}: {usage}", p.name())
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn axis_templates() -> String {
    let line = |s: Subcategory| {
        let t = match s {
            Subcategory::Color => "\"put the <color> <object> in the <container>\"",
            Subcategory::Semantics => "\"put the <category, e.g. fruit> in the <container>\"",
            Subcategory::Size => "\"put the <largest|smallest> <object> on the <support>\"",
            Subcategory::Recognition => "\"pick up the <object>\"",
            Subcategory::Affordance => "\"use the <object> that can <function>\"",
            Subcategory::Reorientation => "\"stand the <object> upright\"",
            Subcategory::Stacking => "\"stack the <object> on the <object>\"",
            Subcategory::Conjunction => "\"put the <object> and the <object> in the <container>\"",
            Subcategory::Counting => "\"put <n> <objects> in the <container>\"",
            Subcategory::Spatial => "\"put the <object> <left of|right of|in front of|behind> the <object>\"",
            Subcategory::Sorting => "\"put every <group A> in <container A> and every <group B> in <container B>\"",
        };
        format!("  - {}: {t}", s.name())
    };
    [Axis::Visual, Axis::Procedural, Axis::Relational]
        .iter()
        .map(|&axis| {
            let body: Vec<String> = Subcategory::ALL.iter().filter(|s| s.axis() == axis).map(|&s| line(s)).collect();
            format!("{}:\n{}", axis_name(axis), body.join("\n"))
        })
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn axis_name(axis: Axis) -> &'static str {
    match axis {
        Axis::Visual => "visual",
        Axis::Procedural => "procedural",
        Axis::Relational => "relational",
    }
}

pub fn difficulty_name(d: Difficulty) -> &'static str {
    match d {
        Difficulty::Simple => "simple",
        Difficulty::Moderate => "moderate",
        Difficulty::Complex => "complex",
    }
}

const TASK_EXAMPLE: &str = r#"{
  "name": "LemonAndLimeInBowl",
  "instruction": "put the lemon and the lime in the bowl",
  "scene": "<scene id>",
  "subcategories": ["conjunction"],
  "difficulty": "simple",
  "subtasks": [
    {"label": "lemon", "steps": [{"predicate": "inside", "subjects": ["lemon"], "reference": "bowl_0"}]},
    {"label": "lime", "steps": [{"predicate": "inside", "subjects": ["lime"], "reference": "bowl_0"}]}
  ]
}"#;

pub fn task_system_prompt() -> String {
    fill(
        TASK_SYSTEM,
        &[
            ("predicate_library", predicate_library()),
            ("axis_templates", axis_templates()),
            ("example", TASK_EXAMPLE.to_owned()),
        ],
    )
}

pub fn build_task_prompt(
    scene: &Scene,
    scene_id: &str,
    subcategory: Subcategory,
    difficulty: Difficulty,
    prior: &[TaskSpec],
) -> (String, String) {
    let objects: Vec<String> = scene
        .placements
        .iter()
        .map(|p| {
            let rel = p
                .parent
                .as_ref()
                .map(|pa| format!(", {} {}", if pa.relation == crate::scene_model::Relation::In { "in" } else { "on" }, pa.object))
                .unwrap_or_default();
            format!("- {}: {:.3} x {:.3} x {:.3}{rel}", p.name, p.dims.x, p.dims.y, p.dims.z)
        })
        .collect();
    let prior_list = if prior.is_empty() {
        "none".to_owned()
    } else {
        prior.iter().map(|t| format!("- {}", t.instruction)).collect::<Vec<_>>().join("\n")
    };
    let user = fill(
        TASK_USER,
        &[
            ("scene_id", scene_id.to_owned()),
            ("objects", objects.join("\n")),
            ("axis", axis_name(subcategory.axis()).to_owned()),
            ("subcategory", subcategory.name().to_owned()),
            ("difficulty", difficulty_name(difficulty).to_owned()),
            ("prior_tasks", prior_list),
        ],
    );
    (task_system_prompt(), user)
}

/// Original prompt, invalid output and the errors, per the fix-prompt rule.
pub fn task_fix_prompt(original_user: &str, output: &str, errors: &[String]) -> String {
    let block = fill(
        TASK_FIX,
        &[
            ("output", output.trim().to_owned()),
            ("errors", errors.iter().map(|e| format!("- {e}")).collect::<Vec<_>>().join("\n")),
        ],
    );
    format!("{original_user}\n\n{block}")
}

pub fn render_condition(c: &TerminationCondition) -> String {
    let mut args: Vec<String> = c.subjects.clone();
    if let Some(r) = &c.reference {
        args.push(r.clone());
    }
    if let Some(t) = c.threshold {
        args.push(format!("{t}"));
    }
    format!("{}({})", c.predicate.name(), args.join(", "))
}

pub fn build_judge_prompt(task: &TaskSpec) -> (String, String) {
    let conditions: Vec<String> = task
        .subtasks
        .iter()
        .map(|s| {
            let steps: Vec<String> = s.steps.iter().map(render_condition).collect();
            format!("- {}: {}", s.label, steps.join(" then "))
        })
        .collect();
    let user = fill(JUDGE_USER, &[("instruction", task.instruction.clone()), ("conditions", conditions.join("\n"))]);
    (fill(JUDGE_SYSTEM, &[]), user)
}
