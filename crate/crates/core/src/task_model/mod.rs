//! Termination predicates, task specifications and graded scoring of scene
//! states against them.

mod condition;
mod score;
mod spec;

use thiserror::Error;

pub use condition::{TABLE, eval_condition, EvalContext, PredicateKind, SceneState, TerminationCondition};
pub use score::{graded_score, subtask_credit, success};
pub use spec::{parse_task_spec, serialize_task_spec, Axis, Difficulty, Subcategory, Subtask, TaskSpec, TASK_SCHEMA_VERSION};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TaskError {
    #[error("object '{0}' is not present")]
    MissingObject(String),
    #[error("invalid condition: {0}")]
    InvalidCondition(String),
    #[error("invalid task: {0}")]
    InvalidTask(String),
    #[error("malformed task JSON at {path}: {message}")]
    Parse { path: String, message: String },
}
