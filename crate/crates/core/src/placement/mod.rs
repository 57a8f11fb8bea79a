//! Physical placement: stacking onto supports, grid packing into containers,
//! the quasi-static settle check, the grid-layout baseline, and the feedback
//! strings handed back to the planner.

mod assemble;
mod baseline;
mod containment;
mod feedback;
mod stability;
mod stacking;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use assemble::{assemble_scene, Assembly};
pub use baseline::baseline_grid_layout;
pub use containment::{place_in, ContainmentGrid, ContainmentResult};
pub use feedback::{feedback_message, FailureReport};
pub use stability::{settle_and_check, settle_scene, Cause, Instability, StabilityReport, DEFAULT_STABILITY_THRESHOLD};
pub use stacking::place_on;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacementConfig {
    /// Rejection-sampling attempts per stacked object.
    pub attempts: usize,
    /// Fraction of the container floor used by the packing grid.
    pub gamma: f64,
    /// Gap added to the largest object side to get the grid cell size.
    pub cell_margin: f64,
    /// Height above the container mid-plane at which contents are released.
    pub buffer: f64,
    /// Packing is filtered when total footprint exceeds this fraction of the floor.
    pub fill_ratio: f64,
    /// Max offset from the face center for center-hinted stacking.
    pub center_jitter: f64,
    /// Width of the border band used by edge-hinted stacking, as a fraction of the face.
    pub edge_band: f64,
    /// Inset from the face border kept free of centers of mass.
    pub face_inset: f64,
}

impl Default for PlacementConfig {
    fn default() -> Self {
        Self {
            attempts: 20,
            gamma: 0.7,
            cell_margin: 0.005,
            buffer: 0.01,
            fill_ratio: 0.8,
            center_jitter: 0.01,
            edge_band: 0.15,
            face_inset: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum PlacementFailureKind {
    NoFreeSpot { attempts: usize },
    FloorTooSmall,
    MissingReference,
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[error("placement failed on '{support}': {kind:?}")]
pub struct PlacementFailure {
    /// The support or container that could not take the object.
    pub support: String,
    pub object: String,
    pub kind: PlacementFailureKind,
}

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("{objects} objects do not fit in a {rows}x{cols} grid")]
    Capacity { objects: usize, rows: usize, cols: usize },
    #[error("invalid scene: {0}")]
    Scene(String),
}
