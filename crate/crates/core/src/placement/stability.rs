//! Quasi-static settle: every object drops straight down onto the highest
//! surface under its footprint, then tips over if its center of mass is not
//! over that surface.

use serde::{Deserialize, Serialize};

use crate::geometry::{obb_overlap, top_surface_region, Obb, Pose, SurfaceRegion, Vec3};
use crate::scene_model::{Relation, Scene};

pub const DEFAULT_STABILITY_THRESHOLD: f64 = 0.02;
const TOPPLE_INSET: f64 = 0.01;
/// Contact tolerance; scenes are stored on a micrometer grid.
const EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cause {
    FellOff,
    Toppled,
    Sank,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instability {
    pub object: String,
    /// Authored parent if any, otherwise the surface the object landed on.
    pub support: String,
    pub displacement: f64,
    pub cause: Cause,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    /// Per-object displacement in scene order.
    pub displacements: Vec<(String, f64)>,
    pub unstable: Vec<Instability>,
    pub stable: bool,
}

impl StabilityReport {
    pub fn max_displacement(&self) -> f64 {
        self.displacements.iter().map(|(_, d)| *d).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Surface {
    Table,
    Top(usize),
    Floor(usize),
}

fn flat(center: Vec3, dims: Vec3, yaw: f64) -> Obb {
    Obb::from_dims(Vec3::new(center.x, center.y, 0.0), Vec3::new(dims.x, dims.y, 1.0), yaw).expect("positive dims")
}

/// Whether a footprint fits through the top opening of a container.
fn fits_opening(container: &Obb, footprint: &Obb) -> bool {
    let region = top_surface_region(container);
    footprint.footprint_corners().iter().all(|&[x, y]| {
        let [lx, ly] = region.to_local(x, y);
        lx.abs() <= region.half_extents[0] + EPS && ly.abs() <= region.half_extents[1] + EPS
    })
}

fn settle(scene: &Scene, threshold: f64) -> (StabilityReport, Vec<Vec3>) {
    let n = scene.placements.len();
    let index_of = |name: &str| scene.placements.iter().position(|p| p.name == name);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scene.placements[a].bottom().total_cmp(&scene.placements[b].bottom()).then(a.cmp(&b)));

    let mut settled: Vec<Option<Obb>> = vec![None; n];
    let mut positions: Vec<Vec3> = scene.placements.iter().map(|p| p.pose.position).collect();
    let mut displacement = vec![0.0; n];
    let mut findings: Vec<Option<Instability>> = vec![None; n];
    let b = &scene.bounds;
    let table = SurfaceRegion {
        center: b.center(),
        half_extents: [b.width() / 2.0, b.depth() / 2.0],
        yaw: 0.0,
        z: b.z_top,
    };

    for &i in &order {
        let p = &scene.placements[i];
        let pos = p.pose.position;
        let yaw = p.yaw();
        let bottom = p.bottom();
        let footprint = flat(pos, p.dims, yaw);
        let container = match &p.parent {
            Some(parent) if parent.relation == Relation::In => index_of(&parent.object).filter(|&c| settled[c].is_some()),
            _ => None,
        };
        let fits = container.is_none_or(|c| fits_opening(settled[c].as_ref().expect("settled"), &footprint));

        // (height, surface, contains footprint center)
        let mut candidates = vec![(b.z_top, Surface::Table, table.contains(pos.x, pos.y, 0.0))];
        for j in 0..n {
            let Some(other) = settled[j] else { continue };
            let other_flat = flat(other.center(), Vec3::new(2.0 * other.half_extents().x, 2.0 * other.half_extents().y, 1.0), other.yaw());
            if !obb_overlap(&footprint, &other_flat, 0.0) {
                continue;
            }
            let region = top_surface_region(&other);
            let over = region.contains(pos.x, pos.y, 0.0);
            if Some(j) == container && fits {
                if other.bottom() <= bottom + EPS {
                    candidates.push((other.bottom(), Surface::Floor(j), over));
                }
            } else if other.top() <= bottom + EPS {
                candidates.push((other.top(), Surface::Top(j), over));
            }
        }
        let best = candidates.iter().map(|c| c.0).fold(f64::NEG_INFINITY, f64::max);
        let (rest, surface, _) = *candidates
            .iter()
            .filter(|c| c.0 == best)
            .max_by_key(|c| c.2)
            .expect("table is always a candidate");

        let mut d = bottom - rest;
        if d < EPS {
            d = 0.0;
        }
        let mut z = rest + p.dims.z / 2.0;
        let face = match surface {
            Surface::Table => Some(table),
            Surface::Top(j) => Some(top_surface_region(settled[j].as_ref().expect("settled"))),
            Surface::Floor(_) => None,
        };
        let toppled = face.is_some_and(|f| !f.contains(pos.x, pos.y, TOPPLE_INSET));
        let support = match (&p.parent, surface) {
            (Some(parent), _) => parent.object.clone(),
            (None, Surface::Table) => "table".to_owned(),
            (None, Surface::Top(j) | Surface::Floor(j)) => scene.placements[j].name.clone(),
        };
        let cause = if toppled {
            d = p.dims.z;
            z = b.z_top + p.dims.z / 2.0;
            Some(Cause::Toppled)
        } else if !fits {
            Some(Cause::Sank)
        } else if d > threshold {
            Some(Cause::FellOff)
        } else {
            None
        };
        findings[i] = cause.map(|cause| Instability { object: p.name.clone(), support, displacement: d, cause });
        displacement[i] = d;
        positions[i] = Vec3::new(pos.x, pos.y, z);
        settled[i] = Some(Obb::from_dims(positions[i], p.dims, yaw).expect("positive dims"));
    }

    let unstable: Vec<Instability> = findings.into_iter().flatten().collect();
    let report = StabilityReport {
        displacements: scene.placements.iter().zip(&displacement).map(|(p, d)| (p.name.clone(), *d)).collect(),
        stable: unstable.is_empty(),
        unstable,
    };
    (report, positions)
}

/// Drops every object onto what lies beneath it and flags objects that move
/// more than `threshold`, tip over, or do not fit their container.
pub fn settle_and_check(scene: &Scene, threshold: f64) -> StabilityReport {
    settle(scene, threshold).0
}

/// The scene after the settle step; toppled objects end up lying on the table.
pub fn settle_scene(scene: &Scene) -> Scene {
    let (_, positions) = settle(scene, DEFAULT_STABILITY_THRESHOLD);
    let placements = scene
        .placements
        .iter()
        .zip(positions)
        .map(|(p, pos)| {
            let mut p = p.clone();
            p.pose = Pose::new(pos, p.pose.orientation()).expect("finite pose");
            p
        })
        .collect();
    let mut out = Scene::new(placements, scene.bounds).expect("settling keeps footprints in place");
    out.metadata = scene.metadata.clone();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::TableBounds;
    use crate::scene_model::{Parent, Placement};
    use proptest::prelude::*;

    fn placed(name: &str, pos: [f64; 3], dims: [f64; 3], parent: Option<(Relation, &str)>) -> Placement {
        Placement {
            name: name.into(),
            pose: Pose::from_position_yaw(pos.into(), 0.0),
            dims: dims.into(),
            parent: parent.map(|(relation, o)| Parent { relation, object: o.into() }),
        }
    }

    fn scene(ps: Vec<Placement>) -> Scene {
        Scene::new(ps, TableBounds::default()).unwrap()
    }

    #[test]
    fn resting_on_table_is_stable() {
        let r = settle_and_check(&scene(vec![placed("box", [0.5, 0.0, 0.05], [0.1, 0.1, 0.1], None)]), 0.02);
        assert!(r.stable);
        assert_eq!(r.displacements[0].1, 0.0);
    }

    #[test]
    fn floating_above_support_is_flagged() {
        let s = scene(vec![
            placed("plate", [0.5, 0.0, 0.01], [0.25, 0.25, 0.02], None),
            placed("apple", [0.5, 0.0, 0.02 + 0.05 + 0.04], [0.08, 0.08, 0.08], Some((Relation::On, "plate"))),
        ]);
        let r = settle_and_check(&s, 0.02);
        assert!(!r.stable);
        assert_eq!(r.unstable.len(), 1);
        assert_eq!(r.unstable[0].cause, Cause::FellOff);
        assert_eq!(r.unstable[0].support, "plate");
        assert!((r.unstable[0].displacement - 0.05).abs() < 1e-9);
    }

    #[test]
    fn small_gap_is_tolerated() {
        let s = scene(vec![placed("box", [0.5, 0.0, 0.05 + 0.015], [0.1, 0.1, 0.1], None)]);
        let r = settle_and_check(&s, 0.02);
        assert!(r.stable);
        assert!((r.max_displacement() - 0.015).abs() < 1e-9);
    }

    #[test]
    fn overhanging_stack_topples() {
        // COM of the top box sits 0.06 beyond the lower box's center; the
        // lower face spans only 0.05 either side.
        let s = scene(vec![
            placed("base", [0.5, 0.0, 0.05], [0.1, 0.1, 0.1], None),
            placed("top", [0.56, 0.0, 0.15], [0.1, 0.1, 0.1], Some((Relation::On, "base"))),
        ]);
        let r = settle_and_check(&s, 0.02);
        assert_eq!(r.unstable.len(), 1);
        assert_eq!(r.unstable[0].cause, Cause::Toppled);
        assert_eq!(r.unstable[0].displacement, 0.1);
    }

    #[test]
    fn contents_rest_on_container_floor() {
        let s = scene(vec![
            placed("bowl", [0.5, 0.0, 0.035], [0.16, 0.16, 0.07], None),
            placed("apple", [0.5, 0.0, 0.035 + 0.01], [0.07, 0.07, 0.07], Some((Relation::In, "bowl"))),
        ]);
        let r = settle_and_check(&s, 0.02);
        assert!(r.stable, "{r:?}");
        assert!((r.displacements[1].1 - 0.01).abs() < 1e-9);
    }

    #[test]
    fn oversized_content_sinks() {
        let s = scene(vec![
            placed("cup", [0.5, 0.0, 0.05], [0.08, 0.08, 0.1], None),
            placed("melon", [0.5, 0.0, 0.16], [0.2, 0.2, 0.12], Some((Relation::In, "cup"))),
        ]);
        let r = settle_and_check(&s, 0.02);
        assert_eq!(r.unstable.len(), 1);
        assert_eq!(r.unstable[0].cause, Cause::Sank);
        assert_eq!(r.unstable[0].support, "cup");
    }

    proptest! {
        #[test]
        fn settling_twice_moves_nothing(
            boxes in prop::collection::vec((0.3..0.8f64, -0.35..0.35f64, 0.0..0.4f64, 0.03..0.15f64, 0.03..0.15f64, 0.02..0.15f64), 1..8)
        ) {
            let ps = boxes.iter().enumerate()
                .map(|(i, &(x, y, z, dx, dy, dz))| placed(&format!("b{i}"), [x, y, z + dz / 2.0], [dx, dy, dz], None))
                .collect();
            let once = settle_scene(&scene(ps));
            let again = settle_and_check(&once, 0.02);
            for (_, d) in &again.displacements {
                prop_assert_eq!(*d, 0.0);
            }
        }
    }
}
