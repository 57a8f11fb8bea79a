#![allow(dead_code)]

use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::Rng;
use scenebench::geometry::TableBounds;
use scenebench::scene_model::{validate_plan, Catalog, Category, PlanObject, Predicate, ScenePlan, SupportPosition};

pub fn fixture(path: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(path)
}

pub fn catalog() -> Catalog {
    Catalog::load(&fixture("catalog.json")).expect("fixture catalog")
}

/// A validated plan with up to `max_objects` objects drawn from the catalog
/// and a random mix of predicates.
pub fn random_plan<R: Rng>(rng: &mut R, catalog: &Catalog, bounds: &TableBounds, max_objects: usize) -> ScenePlan {
    let n = rng.gen_range(1..=max_objects);
    let mut entries: Vec<_> = catalog.entries().iter().collect();
    entries.shuffle(rng);
    entries.truncate(n);
    let mut objects = Vec::new();
    let mut predicates = Vec::new();
    let mut containers: Vec<String> = Vec::new();
    let mut supports: Vec<String> = Vec::new();
    let mut anchors: Vec<String> = Vec::new();
    for e in entries {
        objects.push(PlanObject { name: e.name.clone() });
        let roll: f64 = rng.gen();
        match e.category {
            Category::Container | Category::Support => {
                if roll < 0.6 {
                    predicates.push(Predicate::PlaceOnBase {
                        object: e.name.clone(),
                        x: rng.gen_range(bounds.x_min..bounds.x_max),
                        y: rng.gen_range(bounds.y_min..bounds.y_max),
                        yaw: rng.gen_range(0.0..360.0f64).round(),
                    });
                } else {
                    predicates.push(Predicate::PlaceAnywhere { object: e.name.clone() });
                }
                if e.category == Category::Container {
                    containers.push(e.name.clone());
                } else {
                    supports.push(e.name.clone());
                }
                anchors.push(e.name.clone());
            }
            _ => {
                if roll < 0.25 && !containers.is_empty() {
                    let c = containers.choose(rng).unwrap().clone();
                    predicates.push(Predicate::PlaceIn { objects: vec![e.name.clone()], container: c });
                } else if roll < 0.5 && !supports.is_empty() {
                    let s = supports.choose(rng).unwrap().clone();
                    let position = *[SupportPosition::Center, SupportPosition::Edge, SupportPosition::Random].choose(rng).unwrap();
                    predicates.push(Predicate::PlaceOn { object: e.name.clone(), support: s, position });
                } else if roll < 0.75 && !anchors.is_empty() {
                    let a = anchors.choose(rng).unwrap().clone();
                    predicates.push(Predicate::ClusterAround {
                        objects: vec![e.name.clone()],
                        anchor: a,
                        radius: rng.gen_range(0.08..0.25),
                    });
                } else {
                    predicates.push(Predicate::PlaceAnywhere { object: e.name.clone() });
                    anchors.push(e.name.clone());
                }
            }
        }
    }
    validate_plan(&ScenePlan { objects, predicates }, catalog, bounds).0
}
