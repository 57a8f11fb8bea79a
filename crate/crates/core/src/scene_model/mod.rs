//! Object catalog, placement predicates, scene plans and solved scenes, with
//! their JSON formats.

mod catalog;
mod plan;
mod scene;
mod validate;

use thiserror::Error;

pub use catalog::{Catalog, CatalogEntry, Category};
pub use plan::{parse_scene_plan, serialize_scene_plan, PlanObject, Predicate, ScenePlan, SupportPosition};
pub use scene::{parse_scene, quantize, serialize_scene, Parent, Placement, Relation, Scene};
pub use validate::{validate_plan, Violation, ViolationKind, DEFAULT_CLUSTER_RADIUS, MAX_CLUSTER_RADIUS};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SceneModelError {
    #[error("malformed JSON at byte {offset}: {message}")]
    Json { offset: usize, message: String },
    #[error("schema error at {path}: {message}")]
    Schema { path: String, message: String },
    #[error("catalog error: {0}")]
    Catalog(String),
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error("io error: {0}")]
    Io(String),
}
