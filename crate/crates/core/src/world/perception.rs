//! Read-only perception view that predicate programs evaluate against.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::WorldState;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PerceptionError {
    #[error("object `{0}` not found")]
    ObjectNotFound(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerceivedObject {
    pub name: String,
    pub category: String,
    pub center: [f64; 2],
    pub size: [f64; 2],
    pub has_water: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inside_of: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerceptionSnapshot {
    pub objects: Vec<PerceivedObject>,
    pub gripper_holding: String,
    pub table_height: f64,
}

impl PerceptionSnapshot {
    pub fn from_world(w: &WorldState) -> Self {
        PerceptionSnapshot {
            objects: w
                .objects
                .iter()
                .map(|o| PerceivedObject {
                    name: o.name.clone(),
                    category: o.category.clone(),
                    center: o.center,
                    size: o.size,
                    has_water: o.has_water,
                    inside_of: o.inside_of.clone(),
                })
                .collect(),
            gripper_holding: w.gripper_holding.clone().unwrap_or_default(),
            table_height: w.table_height,
        }
    }

    pub fn object_names(&self) -> impl Iterator<Item = &str> {
        self.objects.iter().map(|o| o.name.as_str())
    }

    fn get(&self, name: &str) -> Result<&PerceivedObject, PerceptionError> {
        self.objects.iter().find(|o| o.name == name).ok_or_else(|| PerceptionError::ObjectNotFound(name.to_string()))
    }

    pub fn get_object_center(&self, name: &str) -> Result<[f64; 2], PerceptionError> {
        Ok(self.get(name)?.center)
    }

    pub fn get_object_size(&self, name: &str) -> Result<[f64; 2], PerceptionError> {
        Ok(self.get(name)?.size)
    }

    pub fn get_object_category(&self, name: &str) -> Result<&str, PerceptionError> {
        Ok(&self.get(name)?.category)
    }

    pub fn has_water(&self, name: &str) -> Result<bool, PerceptionError> {
        Ok(self.get(name)?.has_water)
    }

    /// Name of the enclosing container, or `""`.
    pub fn inside_container(&self, name: &str) -> Result<&str, PerceptionError> {
        Ok(self.get(name)?.inside_of.as_deref().unwrap_or(""))
    }

    pub fn gripper_holding(&self) -> &str {
        &self.gripper_holding
    }

    pub fn table_height(&self) -> f64 {
        self.table_height
    }
}
