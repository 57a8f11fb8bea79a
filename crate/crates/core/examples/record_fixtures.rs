//! Regenerates the replay transcripts under `fixtures/llm/` from canned
//! model answers. The transcripts store the exact prompts the pipelines
//! build, so they must be re-recorded whenever a template changes.
//!
//!     cargo run --example record_fixtures

use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use scenebench::genpipe::{
    generate_scene, generate_task, judge_task, ChatClient, GenError, JudgeWeights, SceneGenConfig, ScriptedBackend,
    TaskGenConfig, TaskRequest,
};
use scenebench::geometry::TableBounds;
use scenebench::scene_model::{parse_scene, parse_scene_plan, serialize_scene, serialize_scene_plan, Catalog};
use scenebench::task_model::{parse_task_spec, Axis, Difficulty, Subcategory};

const MODEL: &str = "fixture-model";

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn recorder(case: &str, responses: Vec<String>) -> ChatClient {
    let dir = root().join("llm").join(case);
    if dir.exists() {
        fs::remove_dir_all(&dir).unwrap();
    }
    ChatClient::record(Box::new(ScriptedBackend::new(responses)), &dir, MODEL).unwrap()
}

const BREAKFAST: &str = r#"{
  "objects": [
    {"name": "bowl_0"}, {"name": "plate_large"}, {"name": "apple_01"}, {"name": "orange_01"},
    {"name": "banana"}, {"name": "mug"}, {"name": "spoon"}, {"name": "sponge"}
  ],
  "predicates": [
    {"type": "place-on-base", "object": "bowl_0", "x": 0.40, "y": 0.15, "yaw": 23},
    {"type": "place-on-base", "object": "plate_large", "x": 0.65, "y": -0.10, "yaw": 156},
    {"type": "place-in", "objects": ["apple_01"], "container": "bowl_0"},
    {"type": "place-anywhere", "object": "orange_01"},
    {"type": "place-on", "object": "banana", "support": "plate_large", "position": "center"},
    {"type": "cluster-around", "objects": ["mug", "spoon"], "anchor": "bowl_0", "radius": 0.12},
    {"type": "place-anywhere", "object": "sponge"}
  ]
}"#;

const DEEP_BIN: &str = r#"{
  "objects": [{"name": "bin_grey"}, {"name": "apple_01"}, {"name": "pear"}, {"name": "lemon"}],
  "predicates": [
    {"type": "place-on-base", "object": "bin_grey", "x": 0.55, "y": 0.0, "yaw": 0},
    {"type": "place-in", "objects": ["apple_01", "pear", "lemon"], "container": "bin_grey"}
  ]
}"#;

const SHALLOW_BOWL: &str = r#"{
  "objects": [{"name": "bowl_0"}, {"name": "apple_01"}, {"name": "lemon"}, {"name": "pear"}],
  "predicates": [
    {"type": "place-on-base", "object": "bowl_0", "x": 0.55, "y": 0.0, "yaw": 0},
    {"type": "place-in", "objects": ["apple_01", "lemon"], "container": "bowl_0"},
    {"type": "place-anywhere", "object": "pear"}
  ]
}"#;

fn scene_case(case: &str, theme: &str, seed: u64, responses: &[&str]) -> Result<scenebench::scene_model::Scene, GenError> {
    let catalog = Catalog::load(&root().join("catalog.json")).unwrap();
    let client = recorder(case, responses.iter().map(|s| s.to_string()).collect());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = generate_scene(theme, &catalog, &TableBounds::default(), &client, &SceneGenConfig::default(), &mut rng);
    match &r {
        Ok((_, report)) => println!("{case}: ok after {} attempt(s), feedback {:?}", report.attempts, report.feedback),
        Err(GenError::Exhausted(report)) => println!("{case}: exhausted, feedback {:?}", report.feedback),
        Err(e) => println!("{case}: {e}"),
    }
    r.map(|(s, _)| s)
}

fn write(path: &Path, text: &str) {
    fs::create_dir_all(path.parent().unwrap()).unwrap();
    fs::write(path, text).unwrap();
}

/// The planner-output example from the scene prompt, stored in canonical form.
const FIGURE_PLAN: &str = r#"{
  "objects": [
    {"name": "bowl_0"}, {"name": "plate_large"}, {"name": "apple_01"}, {"name": "orange_01"},
    {"name": "banana"}, {"name": "mug"}, {"name": "spoon"}
  ],
  "predicates": [
    {"type": "place-on-base", "object": "bowl_0", "x": 0.40, "y": 0.15, "yaw": 23},
    {"type": "place-on-base", "object": "plate_large", "x": 0.65, "y": -0.10, "yaw": 156},
    {"type": "place-in", "objects": ["apple_01", "orange_01"], "container": "bowl_0"},
    {"type": "place-on", "object": "banana", "support": "plate_large", "position": "center"},
    {"type": "cluster-around", "objects": ["mug", "spoon"], "anchor": "bowl_0", "radius": 0.12}
  ]
}"#;

fn main() {
    write(&root().join("figure_plan.json"), &serialize_scene_plan(&parse_scene_plan(FIGURE_PLAN).unwrap()));

    let scene = scene_case("scene/happy", "breakfast table", 11, &[BREAKFAST]).expect("happy path must succeed");
    write(&root().join("scenes/breakfast.json"), &serialize_scene(&scene));

    scene_case("scene/retry", "fruit storage", 12, &[DEEP_BIN, SHALLOW_BOWL]).expect("retry must succeed");

    let broken = [
        "{\"objects\": [{\"name\": \"bowl_0\"}], \"predicates\": [",
        r#"{"objects": [{"name": "teapot"}], "predicates": [{"type": "place-anywhere", "object": "teapot"}]}"#,
        r#"{"objects": [{"name": "hammer"}, {"name": "spatula"}, {"name": "cutting_board"}, {"name": "tray_wood"}, {"name": "bin_grey"}, {"name": "basket"}],
            "predicates": [
              {"type": "place-on-base", "object": "cutting_board", "x": 0.55, "y": 0.0, "yaw": 0},
              {"type": "place-on-base", "object": "tray_wood", "x": 0.55, "y": 0.0, "yaw": 90},
              {"type": "place-on-base", "object": "bin_grey", "x": 0.55, "y": 0.0, "yaw": 45},
              {"type": "place-on-base", "object": "basket", "x": 0.55, "y": 0.0, "yaw": 0},
              {"type": "place-in", "objects": ["hammer", "spatula"], "container": "basket"}
            ]}"#,
    ];
    assert!(scene_case("scene/exhausted", "cluttered workshop", 13, &broken).is_err());

    let scene = parse_scene(&fs::read_to_string(root().join("scenes/breakfast.json")).unwrap()).unwrap();
    let bad_task = r#"{"name": "FruitToBowl", "instruction": "put the lemon and the banana in the bowl",
      "scene": "breakfast", "subcategories": ["conjunction"], "difficulty": "simple",
      "subtasks": [
        {"label": "lemon", "steps": [{"predicate": "grasped", "subjects": ["lemon"]}, {"predicate": "inside", "subjects": ["lemon"], "reference": "bowl_0"}]},
        {"label": "banana", "steps": [{"predicate": "grasped", "subjects": ["banana"]}, {"predicate": "on_top_of", "subjects": ["banana"], "reference": "plate_large"}]}
      ]}"#;
    let good_task = r#"{"name": "AppleAndOrangeToPlate", "instruction": "put the apple and the orange on the plate",
      "scene": "breakfast", "subcategories": ["conjunction"], "difficulty": "simple",
      "subtasks": [
        {"label": "apple", "steps": [{"predicate": "grasped", "subjects": ["apple_01"]}, {"predicate": "on_top_of", "subjects": ["apple_01"], "reference": "plate_large"}]},
        {"label": "orange", "steps": [{"predicate": "grasped", "subjects": ["orange_01"]}, {"predicate": "on_top_of", "subjects": ["orange_01"], "reference": "plate_large"}]}
      ]}"#;
    let client = recorder("task/fix", vec![bad_task.into(), good_task.into()]);
    let request = TaskRequest { axis: Axis::Relational, subcategory: Subcategory::Conjunction, difficulty: Difficulty::Simple };
    let (_, report) = generate_task(&scene, "breakfast", request, &client, &[], &TaskGenConfig::default()).unwrap();
    println!("task/fix: ok after {} attempt(s), feedback {:?}", report.attempts, report.feedback);

    let mut task_files: Vec<PathBuf> =
        fs::read_dir(root().join("tasks")).unwrap().map(|e| e.unwrap().path()).filter(|p| p.extension().is_some_and(|x| x == "json")).collect();
    task_files.sort();
    let answers: Vec<String> = fs::read_to_string(root().join("judge_answers.jsonl"))
        .unwrap()
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(str::to_owned)
        .collect();
    assert_eq!(answers.len(), task_files.len(), "one judge answer per task");
    let client = recorder("judge/set", answers);
    for p in &task_files {
        let task = parse_task_spec(&fs::read_to_string(p).unwrap()).unwrap();
        let s = judge_task(&task, &client, JudgeWeights::default(), 1).unwrap();
        println!("judge {}: {:.3} {:?}", task.name, s.alignment, s.verdict);
    }
}
