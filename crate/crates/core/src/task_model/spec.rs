use serde::{Deserialize, Serialize};

use super::{TaskError, TerminationCondition};

pub const TASK_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Visual,
    Procedural,
    Relational,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Subcategory {
    Color,
    Semantics,
    Size,
    Recognition,
    Affordance,
    Reorientation,
    Stacking,
    Conjunction,
    Counting,
    Spatial,
    Sorting,
}

impl Subcategory {
    pub const ALL: [Subcategory; 11] = [
        Subcategory::Color,
        Subcategory::Semantics,
        Subcategory::Size,
        Subcategory::Recognition,
        Subcategory::Affordance,
        Subcategory::Reorientation,
        Subcategory::Stacking,
        Subcategory::Conjunction,
        Subcategory::Counting,
        Subcategory::Spatial,
        Subcategory::Sorting,
    ];

    pub fn axis(self) -> Axis {
        match self {
            Subcategory::Color | Subcategory::Semantics | Subcategory::Size | Subcategory::Recognition => Axis::Visual,
            Subcategory::Affordance | Subcategory::Reorientation | Subcategory::Stacking => Axis::Procedural,
            Subcategory::Conjunction | Subcategory::Counting | Subcategory::Spatial | Subcategory::Sorting => {
                Axis::Relational
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Subcategory::Color => "color",
            Subcategory::Semantics => "semantics",
            Subcategory::Size => "size",
            Subcategory::Recognition => "recognition",
            Subcategory::Affordance => "affordance",
            Subcategory::Reorientation => "reorientation",
            Subcategory::Stacking => "stacking",
            Subcategory::Conjunction => "conjunction",
            Subcategory::Counting => "counting",
            Subcategory::Spatial => "spatial",
            Subcategory::Sorting => "sorting",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Difficulty {
    #[default]
    Simple,
    #[serde(alias = "medium")]
    Moderate,
    Complex,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Subtask {
    pub label: String,
    /// Ordered steps; each counts only after all earlier ones.
    pub steps: Vec<TerminationCondition>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSpec {
    #[serde(default = "default_version")]
    pub schema_version: u32,
    pub name: String,
    pub instruction: String,
    /// Path or identifier of the scene the task runs in.
    pub scene: String,
    #[serde(default)]
    pub subcategories: Vec<Subcategory>,
    #[serde(default)]
    pub difficulty: Difficulty,
    pub subtasks: Vec<Subtask>,
    /// Run metadata such as the generation seed; omitted when empty.
    #[serde(default, skip_serializing_if = "std::collections::BTreeMap::is_empty")]
    pub metadata: std::collections::BTreeMap<String, String>,
}

fn default_version() -> u32 {
    TASK_SCHEMA_VERSION
}

impl TaskSpec {
    pub fn axes(&self) -> Vec<Axis> {
        let mut axes: Vec<Axis> = self.subcategories.iter().map(|s| s.axis()).collect();
        axes.sort();
        axes.dedup();
        axes
    }

    pub fn conditions(&self) -> impl Iterator<Item = &TerminationCondition> {
        self.subtasks.iter().flat_map(|s| s.steps.iter())
    }

    pub fn check(&self) -> Result<(), TaskError> {
        if self.schema_version != TASK_SCHEMA_VERSION {
            return Err(TaskError::InvalidTask(format!("unsupported schema version {}", self.schema_version)));
        }
        if self.subtasks.is_empty() {
            return Err(TaskError::InvalidTask("a task needs at least one subtask".into()));
        }
        for s in &self.subtasks {
            if s.steps.is_empty() {
                return Err(TaskError::InvalidTask(format!("subtask '{}' has no steps", s.label)));
            }
            for c in &s.steps {
                c.check()?;
            }
        }
        Ok(())
    }
}

/// Parses and checks a task document.
pub fn parse_task_spec(text: &str) -> Result<TaskSpec, TaskError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let spec: TaskSpec = serde_path_to_error::deserialize(de)
        .map_err(|e| TaskError::Parse { path: e.path().to_string(), message: e.inner().to_string() })?;
    spec.check()?;
    Ok(spec)
}

pub fn serialize_task_spec(spec: &TaskSpec) -> String {
    serde_json::to_string_pretty(spec).expect("task serialization is infallible")
}
