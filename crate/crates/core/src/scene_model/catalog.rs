use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::SceneModelError;
use crate::geometry::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Container,
    Support,
    Food,
    Tool,
    Other,
}

impl Category {
    pub const ALL: [Category; 5] =
        [Category::Container, Category::Support, Category::Food, Category::Tool, Category::Other];
}

/// One asset the planner may choose from. `dims` are full bounding-box sizes
/// (x, y, z) in meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CatalogEntry {
    pub name: String,
    pub dims: Vec3,
    pub category: Category,
    #[serde(default)]
    pub description: String,
}

impl CatalogEntry {
    pub fn footprint_area(&self) -> f64 {
        self.dims.x * self.dims.y
    }
}

#[derive(Debug, Clone, Default)]
pub struct Catalog {
    entries: Vec<CatalogEntry>,
    index: BTreeMap<String, usize>,
}

impl Catalog {
    pub fn new(entries: Vec<CatalogEntry>) -> Result<Self, SceneModelError> {
        let mut index = BTreeMap::new();
        for (i, e) in entries.iter().enumerate() {
            if !(e.dims.x > 0.0 && e.dims.y > 0.0 && e.dims.z > 0.0) || !e.dims.is_finite() {
                return Err(SceneModelError::Catalog(format!(
                    "entry '{}' has non-positive dims {:?}",
                    e.name, e.dims
                )));
            }
            if index.insert(e.name.clone(), i).is_some() {
                return Err(SceneModelError::Catalog(format!("duplicate catalog name '{}'", e.name)));
            }
        }
        Ok(Self { entries, index })
    }

    pub fn from_json(text: &str) -> Result<Self, SceneModelError> {
        let entries: Vec<CatalogEntry> =
            serde_json::from_str(text).map_err(|e| SceneModelError::Catalog(e.to_string()))?;
        Self::new(entries)
    }

    pub fn load(path: &Path) -> Result<Self, SceneModelError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SceneModelError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn get(&self, name: &str) -> Option<&CatalogEntry> {
        self.index.get(name).map(|&i| &self.entries[i])
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn entries(&self) -> &[CatalogEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn by_category(&self, category: Category) -> impl Iterator<Item = &CatalogEntry> {
        self.entries.iter().filter(move |e| e.category == category)
    }
}
