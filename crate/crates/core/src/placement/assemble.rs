use std::collections::BTreeMap;
use std::f64::consts::TAU;

use rand::Rng;

use super::{place_in, place_on, PlacementConfig, PlacementFailure, PlacementFailureKind};
use crate::geometry::{Obb, Pose, TableBounds, Vec3};
use crate::scene_model::{Catalog, Parent, Placement, Predicate, Relation, Scene, ScenePlan};
use crate::spatial_solver::Layout2D;

#[derive(Debug, Clone, PartialEq)]
pub struct Assembly {
    pub scene: Scene,
    /// Objects left out by container packing.
    pub dropped: Vec<String>,
}

struct Placed {
    pose: Pose,
    dims: Vec3,
    parent: Option<Parent>,
}

impl Placed {
    fn obb(&self) -> Obb {
        Obb::from_dims(self.pose.position, self.dims, self.pose.orientation().yaw()).expect("catalog dims are positive")
    }
}

/// Lifts a solved table layout into a full scene: base objects rest on the
/// table, then stacking and containment predicates are applied in dependency
/// order.
pub fn assemble_scene<R: Rng>(
    plan: &ScenePlan,
    catalog: &Catalog,
    layout: &Layout2D,
    bounds: &TableBounds,
    cfg: &PlacementConfig,
    rng: &mut R,
) -> Result<Assembly, PlacementFailure> {
    let dims_of = |name: &str| catalog.get(name).map(|e| e.dims);
    let missing = |object: &str, support: &str| PlacementFailure {
        support: support.to_owned(),
        object: object.to_owned(),
        kind: PlacementFailureKind::MissingReference,
    };
    let mut placed: BTreeMap<String, Placed> = BTreeMap::new();
    for e in &layout.entries {
        let dims = dims_of(&e.name).ok_or_else(|| missing(&e.name, "catalog"))?;
        let pose = Pose::from_position_yaw(Vec3::new(e.x, e.y, bounds.z_top + dims.z / 2.0), e.yaw);
        placed.insert(e.name.clone(), Placed { pose, dims, parent: None });
    }

    let mut pending: Vec<&Predicate> = plan
        .predicates
        .iter()
        .filter(|p| matches!(p, Predicate::PlaceOn { .. } | Predicate::PlaceIn { .. }))
        .collect();
    let mut dropped = Vec::new();
    while !pending.is_empty() {
        let ready = pending.iter().position(|p| p.reference().is_some_and(|r| placed.contains_key(r)));
        let Some(k) = ready else {
            let p = pending[0];
            return Err(missing(p.subjects()[0], p.reference().unwrap_or_default()));
        };
        match pending.remove(k) {
            Predicate::PlaceOn { object, support, position } => {
                let dims = dims_of(object).ok_or_else(|| missing(object, "catalog"))?;
                let base = placed[support.as_str()].obb();
                let peers: Vec<Obb> = placed
                    .values()
                    .filter(|p| p.parent.as_ref().is_some_and(|q| q.relation == Relation::On && &q.object == support))
                    .map(Placed::obb)
                    .collect();
                let yaw = rng.gen_range(0.0..TAU);
                let pose = place_on(support, &base, object, dims, yaw, &peers, *position, cfg, rng)?;
                let parent = Some(Parent { relation: Relation::On, object: support.clone() });
                placed.insert(object.clone(), Placed { pose, dims, parent });
            }
            Predicate::PlaceIn { objects, container } => {
                let items: Vec<(String, Vec3)> = objects
                    .iter()
                    .map(|o| dims_of(o).map(|d| (o.clone(), d)).ok_or_else(|| missing(o, "catalog")))
                    .collect::<Result<_, _>>()?;
                let holder = placed[container.as_str()].obb();
                let res = place_in(container, &holder, &items, cfg, rng)?;
                for (name, pose) in res.poses {
                    let dims = dims_of(&name).expect("checked above");
                    let parent = Some(Parent { relation: Relation::In, object: container.clone() });
                    placed.insert(name, Placed { pose, dims, parent });
                }
                dropped.extend(res.dropped);
            }
            _ => unreachable!("filtered above"),
        }
        // Anything depending on a dropped object can no longer be placed.
        if let Some(p) = pending.iter().find(|p| p.reference().is_some_and(|r| dropped.iter().any(|d| d == r))) {
            return Err(missing(p.subjects()[0], p.reference().unwrap_or_default()));
        }
    }

    let placements: Vec<Placement> = plan
        .object_names()
        .filter_map(|name| {
            placed.remove(name).map(|p| Placement { name: name.to_owned(), pose: p.pose, dims: p.dims, parent: p.parent })
        })
        .collect();
    let scene = Scene::new(placements, *bounds).map_err(|e| PlacementFailure {
        support: "table".into(),
        object: e.to_string(),
        kind: PlacementFailureKind::MissingReference,
    })?;
    Ok(Assembly { scene, dropped })
}
