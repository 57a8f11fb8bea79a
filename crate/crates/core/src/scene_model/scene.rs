use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::SceneModelError;
use crate::geometry::{Obb, Pose, Quat, TableBounds, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Relation {
    On,
    In,
}

/// The object a placement was authored to rest on or inside.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Parent {
    pub relation: Relation,
    pub object: String,
}

/// A placed object. `pose.position` is the bounding-box center.
#[derive(Debug, Clone, PartialEq)]
pub struct Placement {
    pub name: String,
    pub pose: Pose,
    pub dims: Vec3,
    pub parent: Option<Parent>,
}

impl Placement {
    pub fn yaw(&self) -> f64 {
        self.pose.orientation().yaw()
    }

    pub fn obb(&self) -> Obb {
        Obb::from_dims(self.pose.position, self.dims, self.yaw()).expect("placement dims validated")
    }

    pub fn bottom(&self) -> f64 {
        self.pose.position.z - self.dims.z / 2.0
    }

    pub fn top(&self) -> f64 {
        self.pose.position.z + self.dims.z / 2.0
    }
}

/// Solved object poses over a table.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub placements: Vec<Placement>,
    pub bounds: TableBounds,
    /// Free-form run metadata (seed, tool version); omitted from JSON when empty.
    pub metadata: BTreeMap<String, String>,
}

/// Rounds to the micrometer grid the JSON format stores.
pub fn quantize(v: f64) -> f64 {
    let q = (v * 1e6).round() / 1e6;
    if q == 0.0 {
        0.0
    } else {
        q
    }
}

fn quantize_vec(v: Vec3) -> Vec3 {
    Vec3::new(quantize(v.x), quantize(v.y), quantize(v.z))
}

impl Scene {
    /// Builds a scene, snapping positions, dims and bounds to the micrometer
    /// grid, then checks invariants.
    pub fn new(placements: Vec<Placement>, bounds: TableBounds) -> Result<Self, SceneModelError> {
        let placements = placements
            .into_iter()
            .map(|mut p| {
                p.pose = Pose::new(quantize_vec(p.pose.position), p.pose.orientation())
                    .expect("finite pose stays finite");
                p.dims = quantize_vec(p.dims);
                p
            })
            .collect();
        let bounds = TableBounds {
            x_min: quantize(bounds.x_min),
            x_max: quantize(bounds.x_max),
            y_min: quantize(bounds.y_min),
            y_max: quantize(bounds.y_max),
            z_top: quantize(bounds.z_top),
        };
        let scene = Self { placements, bounds, metadata: BTreeMap::new() };
        scene.check()?;
        Ok(scene)
    }

    pub fn empty(bounds: TableBounds) -> Self {
        Self { placements: Vec::new(), bounds, metadata: BTreeMap::new() }
    }

    pub fn get(&self, name: &str) -> Option<&Placement> {
        self.placements.iter().find(|p| p.name == name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.placements.iter().map(|p| p.name.as_str())
    }

    pub fn check(&self) -> Result<(), SceneModelError> {
        self.bounds.check().map_err(|e| SceneModelError::InvalidScene(e.to_string()))?;
        let mut seen = BTreeSet::new();
        for p in &self.placements {
            if !seen.insert(p.name.as_str()) {
                return Err(SceneModelError::InvalidScene(format!("duplicate placement '{}'", p.name)));
            }
            if !(p.dims.x > 0.0 && p.dims.y > 0.0 && p.dims.z > 0.0) {
                return Err(SceneModelError::InvalidScene(format!("'{}' has non-positive dims", p.name)));
            }
        }
        for p in &self.placements {
            let pos = p.pose.position;
            if self.bounds.contains(pos.x, pos.y) {
                continue;
            }
            let exempt = match &p.parent {
                Some(Parent { relation: Relation::In, object }) => self
                    .get(object)
                    .is_some_and(|c| self.bounds.contains(c.pose.position.x, c.pose.position.y)),
                _ => false,
            };
            if !exempt {
                return Err(SceneModelError::InvalidScene(format!(
                    "'{}' footprint center ({:.3}, {:.3}) is off the table",
                    p.name, pos.x, pos.y
                )));
            }
        }
        Ok(())
    }
}

fn fmt6(v: f64) -> String {
    format!("{v:.6}")
}

fn fmt_vec6(v: Vec3) -> String {
    format!("[{}, {}, {}]", fmt6(v.x), fmt6(v.y), fmt6(v.z))
}

fn json_str(s: &str) -> String {
    serde_json::to_string(s).expect("string serialization is infallible")
}

/// Deterministic JSON for a scene: fixed key order, lengths with six decimals,
/// quaternions in shortest round-trip form.
pub fn serialize_scene(scene: &Scene) -> String {
    let mut out = String::from("{\n");
    if scene.placements.is_empty() {
        out.push_str("  \"placements\": [],\n");
    } else {
        out.push_str("  \"placements\": [\n");
        for (i, p) in scene.placements.iter().enumerate() {
            let q = p.pose.orientation();
            let _ = write!(
                out,
                "    {{\n      \"name\": {},\n      \"position\": {},\n      \"orientation\": [{}, {}, {}, {}],\n      \"dims\": {}",
                json_str(&p.name),
                fmt_vec6(p.pose.position),
                q.w,
                q.x,
                q.y,
                q.z,
                fmt_vec6(p.dims)
            );
            if let Some(parent) = &p.parent {
                let rel = match parent.relation {
                    Relation::On => "on",
                    Relation::In => "in",
                };
                let _ = write!(
                    out,
                    ",\n      \"parent\": {{\"relation\": \"{rel}\", \"object\": {}}}",
                    json_str(&parent.object)
                );
            }
            out.push_str("\n    }");
            out.push_str(if i + 1 < scene.placements.len() { ",\n" } else { "\n" });
        }
        out.push_str("  ],\n");
    }
    let b = &scene.bounds;
    let _ = write!(
        out,
        "  \"bounds\": {{\"x_min\": {}, \"x_max\": {}, \"y_min\": {}, \"y_max\": {}, \"z_top\": {}}}",
        fmt6(b.x_min),
        fmt6(b.x_max),
        fmt6(b.y_min),
        fmt6(b.y_max),
        fmt6(b.z_top)
    );
    if !scene.metadata.is_empty() {
        out.push_str(",\n  \"metadata\": {");
        let fields: Vec<String> =
            scene.metadata.iter().map(|(k, v)| format!("{}: {}", json_str(k), json_str(v))).collect();
        out.push_str(&fields.join(", "));
        out.push('}');
    }
    out.push_str("\n}\n");
    out
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PlacementWire {
    name: String,
    position: [f64; 3],
    orientation: [f64; 4],
    dims: [f64; 3],
    #[serde(default)]
    parent: Option<Parent>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneWire {
    placements: Vec<PlacementWire>,
    bounds: TableBounds,
    #[serde(default)]
    metadata: BTreeMap<String, String>,
}

pub fn parse_scene(text: &str) -> Result<Scene, SceneModelError> {
    let wire: SceneWire = serde_json::from_str(text).map_err(|e| SceneModelError::Json {
        offset: 0,
        message: e.to_string(),
    })?;
    let mut placements = Vec::with_capacity(wire.placements.len());
    for p in wire.placements {
        let [w, x, y, z] = p.orientation;
        let pose = Pose::new(p.position.into(), Quat::new(w, x, y, z))
            .map_err(|e| SceneModelError::InvalidScene(format!("'{}': {e}", p.name)))?;
        placements.push(Placement { name: p.name, pose, dims: p.dims.into(), parent: p.parent });
    }
    let mut scene = Scene::new(placements, wire.bounds)?;
    scene.metadata = wire.metadata;
    Ok(scene)
}
