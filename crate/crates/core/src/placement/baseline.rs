use rand::Rng;

use super::BaselineError;
use crate::geometry::{Pose, TableBounds, Vec3};
use crate::scene_model::{Placement, Scene};

/// Grid baseline: object `k` goes to cell `k` (row-major), jittered within the
/// central half of the cell, resting on the table with zero yaw.
pub fn baseline_grid_layout<R: Rng>(
    objects: &[(String, Vec3)],
    rows: usize,
    cols: usize,
    bounds: &TableBounds,
    rng: &mut R,
) -> Result<Scene, BaselineError> {
    if objects.len() > rows * cols {
        return Err(BaselineError::Capacity { objects: objects.len(), rows, cols });
    }
    let cell_w = bounds.width() / cols as f64;
    let cell_d = bounds.depth() / rows as f64;
    let placements = objects
        .iter()
        .enumerate()
        .map(|(k, (name, dims))| {
            let (r, c) = (k / cols, k % cols);
            let cx = bounds.x_min + (c as f64 + 0.5) * cell_w;
            let cy = bounds.y_min + (r as f64 + 0.5) * cell_d;
            let x = rng.gen_range(cx - cell_w / 4.0..=cx + cell_w / 4.0);
            let y = rng.gen_range(cy - cell_d / 4.0..=cy + cell_d / 4.0);
            Placement {
                name: name.clone(),
                pose: Pose::from_position_yaw(Vec3::new(x, y, bounds.z_top + dims.z / 2.0), 0.0),
                dims: *dims,
                parent: None,
            }
        })
        .collect();
    Scene::new(placements, *bounds).map_err(|e| BaselineError::Scene(e.to_string()))
}
