use serde::{Deserialize, Serialize};

use super::SceneModelError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanObject {
    pub name: String,
}

/// Where on a support a stacked object should go.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SupportPosition {
    #[default]
    Center,
    Edge,
    Random,
}

/// Placement predicate as emitted by the planner. `yaw` is carried in degrees
/// exactly as written on the wire; use [`Predicate::yaw_radians`] for math.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Predicate {
    PlaceOnBase { object: String, x: f64, y: f64, yaw: f64 },
    PlaceIn { objects: Vec<String>, container: String },
    PlaceOn {
        object: String,
        support: String,
        #[serde(default)]
        position: SupportPosition,
    },
    ClusterAround { objects: Vec<String>, anchor: String, radius: f64 },
    PlaceAnywhere { object: String },
}

impl Predicate {
    pub fn type_name(&self) -> &'static str {
        match self {
            Predicate::PlaceOnBase { .. } => "place-on-base",
            Predicate::PlaceIn { .. } => "place-in",
            Predicate::PlaceOn { .. } => "place-on",
            Predicate::ClusterAround { .. } => "cluster-around",
            Predicate::PlaceAnywhere { .. } => "place-anywhere",
        }
    }

    /// Objects this predicate positions.
    pub fn subjects(&self) -> Vec<&str> {
        match self {
            Predicate::PlaceOnBase { object, .. }
            | Predicate::PlaceOn { object, .. }
            | Predicate::PlaceAnywhere { object } => vec![object.as_str()],
            Predicate::PlaceIn { objects, .. } | Predicate::ClusterAround { objects, .. } => {
                objects.iter().map(String::as_str).collect()
            }
        }
    }

    /// The container, support or anchor this predicate depends on.
    pub fn reference(&self) -> Option<&str> {
        match self {
            Predicate::PlaceIn { container, .. } => Some(container),
            Predicate::PlaceOn { support, .. } => Some(support),
            Predicate::ClusterAround { anchor, .. } => Some(anchor),
            _ => None,
        }
    }

    pub fn yaw_radians(&self) -> Option<f64> {
        match self {
            Predicate::PlaceOnBase { yaw, .. } => Some(yaw.to_radians()),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenePlan {
    pub objects: Vec<PlanObject>,
    pub predicates: Vec<Predicate>,
}

impl ScenePlan {
    pub fn object_names(&self) -> impl Iterator<Item = &str> {
        self.objects.iter().map(|o| o.name.as_str())
    }

    pub fn has_object(&self, name: &str) -> bool {
        self.objects.iter().any(|o| o.name == name)
    }
}

/// Parses the planner's JSON document. Unknown keys and predicate types are
/// rejected with the JSON path of the offending value.
pub fn parse_scene_plan(text: &str) -> Result<ScenePlan, SceneModelError> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| SceneModelError::Json {
        offset: byte_offset(text, e.line(), e.column()),
        message: e.to_string(),
    })?;
    serde_path_to_error::deserialize(value).map_err(|e| {
        let message = e.inner().to_string();
        let mut path = e.path().to_string();
        if let Some(field) = backticked_field(&message, "unknown field `")
            .or_else(|| backticked_field(&message, "missing field `"))
        {
            if path == "." {
                path = field;
            } else if path != field && !path.ends_with(&format!(".{field}")) {
                path = format!("{path}.{field}");
            }
        }
        SceneModelError::Schema { path, message }
    })
}

fn backticked_field(message: &str, prefix: &str) -> Option<String> {
    let rest = message.strip_prefix(prefix)?;
    rest.split('`').next().map(str::to_owned)
}

/// Converts serde_json's 1-based line/column into a byte offset.
fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let line_start: usize = text.split_inclusive('\n').take(line - 1).map(str::len).sum();
    (line_start + column.saturating_sub(1)).min(text.len())
}

/// Canonical pretty-printed form of a plan.
pub fn serialize_scene_plan(plan: &ScenePlan) -> String {
    serde_json::to_string_pretty(plan).expect("plan serialization is infallible")
}
