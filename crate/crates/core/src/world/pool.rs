//! Object pools: committed per-category geometry and the simulator constants.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::DomainId;

const POOL_JSON: &str = include_str!("../../data/object_pools.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategorySpec {
    pub size: [f64; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graspable_override: Option<bool>,
    #[serde(default)]
    pub container: bool,
    #[serde(default = "default_true")]
    pub movable: bool,
    #[serde(default)]
    pub food: bool,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectPools {
    pub gripper_aperture: f64,
    pub gripper_height: f64,
    pub table_height: f64,
    pub table_width: f64,
    pub support_tolerance: f64,
    pub support_overlap: f64,
    pub nest_offset: f64,
    pub thin_max_height: f64,
    pub large_min_width: f64,
    pub domains: BTreeMap<DomainId, BTreeMap<String, CategorySpec>>,
}

impl ObjectPools {
    pub fn category(&self, domain: DomainId, category: &str) -> Option<&CategorySpec> {
        self.domains.get(&domain).and_then(|d| d.get(category))
    }

    pub fn graspable(&self, spec: &CategorySpec) -> bool {
        spec.graspable_override.unwrap_or(spec.size[0] < self.gripper_aperture)
    }
}

/// The committed pool table. Parsed once.
pub fn pools() -> &'static ObjectPools {
    static POOLS: OnceLock<ObjectPools> = OnceLock::new();
    POOLS.get_or_init(|| serde_json::from_str(POOL_JSON).expect("object_pools.json is valid"))
}
