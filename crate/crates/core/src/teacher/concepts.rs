//! Reference predicate library used by the scripted coder and corrector.
//!
//! Each concept is keyed by its canonical description. Bodies are PredScript
//! over the shared utilities below.

use crate::dsl::{parse_expr, Expr};

pub struct UtilityDef {
    pub name: &'static str,
    pub params: &'static [&'static str],
    pub description: &'static str,
    pub body: &'static str,
}

pub const UTILITIES: &[UtilityDef] = &[
    UtilityDef {
        name: "bottom",
        params: &["a"],
        description: "lowest y coordinate of object a",
        body: "get_object_center(a)[1] - get_object_size(a)[1] / 2",
    },
    UtilityDef {
        name: "top",
        params: &["a"],
        description: "highest y coordinate of object a",
        body: "get_object_center(a)[1] + get_object_size(a)[1] / 2",
    },
    UtilityDef {
        name: "x_overlap",
        params: &["a", "b"],
        description: "length of the overlap of objects a and b along x",
        body: "max(0, min(get_object_center(a)[0] + get_object_size(a)[0] / 2, get_object_center(b)[0] + get_object_size(b)[0] / 2) - max(get_object_center(a)[0] - get_object_size(a)[0] / 2, get_object_center(b)[0] - get_object_size(b)[0] / 2))",
    },
    UtilityDef {
        name: "rests_on",
        params: &["a", "b"],
        description: "object a is supported by the top surface of object b",
        body: "approx(bottom(a), top(b), 0.1) and x_overlap(a, b) >= 0.5 * get_object_size(a)[0]",
    },
];

pub struct Concept {
    pub key: &'static str,
    pub name: &'static str,
    pub params: &'static [&'static str],
    pub description: &'static str,
    pub body: &'static str,
    /// Deliberately miscalibrated first draft.
    pub draft: Option<&'static str>,
    /// Alternative bodies tried by alignment correction, in order.
    pub variants: &'static [&'static str],
}

const CONTAINED_ON: &str = "approx(bottom(a), top(b), 0.1) and get_object_center(a)[0] - get_object_size(a)[0] / 2 >= get_object_center(b)[0] - get_object_size(b)[0] / 2 and get_object_center(a)[0] + get_object_size(a)[0] / 2 <= get_object_center(b)[0] + get_object_size(b)[0] / 2";

pub const CONCEPTS: &[Concept] = &[
    Concept {
        key: "on_obj",
        name: "obj_on_obj",
        params: &["a", "b"],
        description: "check whether object a is on object b",
        body: "rests_on(a, b)",
        draft: Some("x_overlap(a, b) > 0"),
        variants: &["rests_on(a, b)", CONTAINED_ON],
    },
    Concept {
        key: "on_table",
        name: "obj_on_table",
        params: &["a"],
        description: "check whether object a is on the table",
        body: "approx(bottom(a), table_height(), 0.1)",
        draft: None,
        variants: &["approx(bottom(a), table_height(), 0.1)"],
    },
    Concept {
        key: "graspable",
        name: "obj_graspable",
        params: &["a"],
        description: "check whether object a is small enough to be grasped by the gripper",
        body: "get_object_size(a)[0] < 3.0",
        draft: Some("get_object_size(a)[2] < 3.0"),
        variants: &["get_object_size(a)[0] < 3.0", "get_object_size(a)[0] < 2.5", "get_object_size(a)[0] < 5.0"],
    },
    Concept {
        key: "clear",
        name: "obj_clear",
        params: &["a"],
        description: "check whether there is nothing on top of object a",
        body: "not (any v in objects(): v != a and rests_on(v, a))",
        draft: None,
        variants: &["not (any v in objects(): v != a and rests_on(v, a))"],
    },
    Concept {
        key: "gripper_empty",
        name: "gripper_empty",
        params: &[],
        description: "check whether the gripper is empty",
        body: "gripper_holding() == \"\"",
        draft: None,
        variants: &["gripper_holding() == \"\""],
    },
    Concept {
        key: "in_gripper",
        name: "obj_in_gripper",
        params: &["a"],
        description: "check whether object a is held by the gripper",
        body: "gripper_holding() == a",
        draft: None,
        variants: &["gripper_holding() == a"],
    },
    Concept {
        key: "is_plate",
        name: "obj_is_plate",
        params: &["a"],
        description: "check whether object a is a plate",
        body: "get_object_category(a) == \"plate\"",
        draft: None,
        variants: &["get_object_category(a) == \"plate\""],
    },
    Concept {
        key: "thin_enough",
        name: "obj_thin_enough",
        params: &["a"],
        description: "check whether object a is thin enough, with height no greater than 0.5",
        body: "get_object_size(a)[1] <= 0.5",
        draft: None,
        variants: &["get_object_size(a)[1] <= 0.5"],
    },
    Concept {
        key: "is_container",
        name: "obj_is_container",
        params: &["a"],
        description: "check whether object a is a container, i.e. a cup, pot or basket",
        body: "get_object_category(a) == \"cup\" or get_object_category(a) == \"pot\" or get_object_category(a) == \"basket\"",
        draft: None,
        variants: &["get_object_category(a) == \"cup\" or get_object_category(a) == \"pot\" or get_object_category(a) == \"basket\""],
    },
    Concept {
        key: "is_food",
        name: "obj_is_food",
        params: &["a"],
        description: "check whether object a is food",
        body: FOOD_BODY,
        draft: None,
        variants: &[FOOD_BODY],
    },
    Concept {
        key: "large_enough",
        name: "obj_large_enough",
        params: &["a"],
        description: "check whether object a is large enough to contain food, with width at least 10",
        body: "get_object_size(a)[0] >= 10",
        draft: None,
        variants: &["get_object_size(a)[0] >= 10"],
    },
    Concept {
        key: "filled",
        name: "obj_filled_with_water",
        params: &["a"],
        description: "check whether object a is filled with water",
        body: "has_water(a)",
        draft: None,
        variants: &["has_water(a)"],
    },
    Concept {
        key: "inside_obj",
        name: "obj_inside_obj",
        params: &["a", "b"],
        description: "check whether object a is inside object b",
        body: "inside_container(a) == b",
        draft: None,
        variants: &["inside_container(a) == b"],
    },
    Concept {
        key: "in_container",
        name: "obj_in_container",
        params: &["a"],
        description: "check whether object a is inside any container",
        body: "inside_container(a) != \"\"",
        draft: None,
        variants: &["inside_container(a) != \"\""],
    },
];

const FOOD_BODY: &str = "get_object_category(a) == \"sausage\" or get_object_category(a) == \"potato\" or get_object_category(a) == \"carrot\" or get_object_category(a) == \"tomato\" or get_object_category(a) == \"apple\" or get_object_category(a) == \"banana\" or get_object_category(a) == \"onion\" or get_object_category(a) == \"egg\" or get_object_category(a) == \"bread\" or get_object_category(a) == \"fish\" or get_object_category(a) == \"meat\" or get_object_category(a) == \"pepper\"";

/// Pre-registered example predicate.
pub const IN_CONTEXT_EXAMPLE: &str = "in_gripper";

pub fn normalize_description(d: &str) -> String {
    d.to_lowercase().split_whitespace().collect::<Vec<_>>().join(" ").trim_end_matches('.').to_string()
}

pub fn by_key(key: &str) -> Option<&'static Concept> {
    CONCEPTS.iter().find(|c| c.key == key)
}

pub fn by_description(desc: &str) -> Option<&'static Concept> {
    let d = normalize_description(desc);
    CONCEPTS.iter().find(|c| normalize_description(c.description) == d)
}

pub fn utility(name: &str) -> Option<&'static UtilityDef> {
    UTILITIES.iter().find(|u| u.name == name)
}

pub fn parse_body(src: &str) -> Expr {
    parse_expr(src).expect("reference library bodies parse")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{PredicateSource, Registry};

    #[test]
    fn library_type_checks() {
        let mut r = Registry::new();
        for u in UTILITIES {
            r.add_utility(u.name, u.params, u.description, parse_body(u.body)).unwrap();
        }
        for c in CONCEPTS {
            let mut probe = r.clone();
            probe.add_pair(c.name, c.params, c.description, parse_body(c.body), PredicateSource::Scripted).unwrap();
            for v in c.variants.iter().chain(c.draft.iter()) {
                probe.set_body(c.name, parse_body(v)).unwrap();
            }
        }
    }

    #[test]
    fn descriptions_are_unique_keys() {
        for c in CONCEPTS {
            assert_eq!(by_description(&c.description.to_uppercase()).unwrap().key, c.key);
        }
    }
}
