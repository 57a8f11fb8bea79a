use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{PlacementConfig, PlacementFailure, PlacementFailureKind};
use crate::geometry::{top_surface_region, Obb, Pose, Quat, Vec3};

/// Packing grid laid over the container floor, in the container's frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContainmentGrid {
    pub rows: usize,
    pub cols: usize,
    pub cell_size: f64,
    /// Half extents of the usable (scaled) floor rectangle.
    pub usable_half: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ContainmentResult {
    pub poses: Vec<(String, Pose)>,
    /// Objects left out, by area filtering or grid capacity, in drop order.
    pub dropped: Vec<String>,
    /// Whether the total-area rule fired.
    pub filtered: bool,
    pub grid: Option<ContainmentGrid>,
}

/// Whether the objects' combined footprint exceeds the allowed share of the floor.
pub fn exceeds_fill(container: &Obb, objects: &[(String, Vec3)], fill_ratio: f64) -> bool {
    let floor = 4.0 * container.half_extents().x * container.half_extents().y;
    let total: f64 = objects.iter().map(|(_, d)| d.x * d.y).sum();
    total > fill_ratio * floor
}

/// Packs objects row-major into a grid over the scaled container floor.
pub fn place_in<R: Rng>(
    container_name: &str,
    container: &Obb,
    objects: &[(String, Vec3)],
    cfg: &PlacementConfig,
    rng: &mut R,
) -> Result<ContainmentResult, PlacementFailure> {
    if objects.is_empty() {
        return Ok(ContainmentResult::default());
    }
    let mut kept: Vec<(String, Vec3)> = objects.to_vec();
    let mut dropped = Vec::new();
    let filtered = exceeds_fill(container, objects, cfg.fill_ratio);
    if filtered {
        kept.sort_by(|a, b| (a.1.x * a.1.y).total_cmp(&(b.1.x * b.1.y)));
        let budget = cfg.fill_ratio * 4.0 * container.half_extents().x * container.half_extents().y;
        let mut used = 0.0;
        let keep = kept
            .iter()
            .take_while(|(_, d)| {
                used += d.x * d.y;
                used <= budget
            })
            .count();
        dropped.extend(kept.drain(keep..).map(|(n, _)| n));
    }

    let floor = top_surface_region(container);
    let usable_half = [cfg.gamma * floor.half_extents[0], cfg.gamma * floor.half_extents[1]];
    let cell = kept.iter().map(|(_, d)| d.x.max(d.y)).fold(0.0, f64::max) + cfg.cell_margin;
    let max_cols = (2.0 * usable_half[0] / cell + 1e-9).floor() as usize;
    let max_rows = (2.0 * usable_half[1] / cell + 1e-9).floor() as usize;
    let first = kept.first().or(objects.first()).map(|(n, _)| n.clone()).unwrap_or_default();
    if max_cols == 0 || max_rows == 0 {
        return Err(PlacementFailure {
            support: container_name.to_owned(),
            object: first,
            kind: PlacementFailureKind::FloorTooSmall,
        });
    }
    let cols = max_cols.min(kept.len().max(1));
    let rows = max_rows.min(kept.len().div_ceil(cols).max(1));
    if kept.len() > rows * cols {
        dropped.extend(kept.drain(rows * cols..).map(|(n, _)| n));
    }

    let height = 2.0 * container.half_extents().z;
    let z = container.bottom() + height / 2.0 + cfg.buffer;
    let orientation = Quat::from_yaw(container.yaw());
    let poses = kept
        .into_iter()
        .enumerate()
        .map(|(i, (name, dims))| {
            let (r, c) = (i / cols, i % cols);
            let lx = -(cols as f64) * cell / 2.0 + cell / 2.0 + c as f64 * cell;
            let ly = -(rows as f64) * cell / 2.0 + cell / 2.0 + r as f64 * cell;
            // Jitter stays inside the object's own cell so neighbors cannot touch.
            let jx = (cell / 8.0).min((cell - dims.x) / 2.0);
            let jy = (cell / 8.0).min((cell - dims.y) / 2.0);
            let lx = lx + if jx > 0.0 { rng.gen_range(-jx..=jx) } else { 0.0 };
            let ly = ly + if jy > 0.0 { rng.gen_range(-jy..=jy) } else { 0.0 };
            let [x, y] = floor.to_world(lx, ly);
            let pose = Pose::new(Vec3::new(x, y, z), orientation).expect("finite pose");
            (name, pose)
        })
        .collect();
    Ok(ContainmentResult {
        poses,
        dropped,
        filtered,
        grid: Some(ContainmentGrid { rows, cols, cell_size: cell, usable_half }),
    })
}
