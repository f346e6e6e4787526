//! Operation catalog and type table for Clevr program graphs.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Types flowing along program edges.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueType {
    ObjectSet,
    SingleObject,
    Count,
    Truth,
    Attr,
}

impl fmt::Display for ValueType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ValueType::ObjectSet => "ObjectSet",
            ValueType::SingleObject => "SingleObject",
            ValueType::Count => "Count",
            ValueType::Truth => "Truth",
            ValueType::Attr => "Attr",
        };
        f.write_str(s)
    }
}

/// Vocabulary a parameterized operation draws its parameter from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ParamDomain {
    Color,
    Shape,
    Size,
    Material,
    Relation,
}

pub const COLORS: &[&str] = &["gray", "red", "blue", "green", "brown", "purple", "cyan", "yellow"];
pub const SHAPES: &[&str] = &["cube", "sphere", "cylinder"];
pub const SIZES: &[&str] = &["small", "large"];
pub const MATERIALS: &[&str] = &["rubber", "metal"];
pub const RELATIONS: &[&str] = &["left", "right", "front", "behind"];

impl ParamDomain {
    pub fn values(self) -> &'static [&'static str] {
        match self {
            ParamDomain::Color => COLORS,
            ParamDomain::Shape => SHAPES,
            ParamDomain::Size => SIZES,
            ParamDomain::Material => MATERIALS,
            ParamDomain::Relation => RELATIONS,
        }
    }

    pub fn contains(self, value: &str) -> bool {
        self.values().contains(&value)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OpCatalogEntry {
    pub name: &'static str,
    pub arity: usize,
    pub param: Option<ParamDomain>,
    pub inputs: &'static [ValueType],
    pub output: ValueType,
    pub commutative: bool,
}

impl OpCatalogEntry {
    pub fn parameterized(&self) -> bool {
        self.param.is_some()
    }

    /// Expected input type at argument position `pos`, if the position exists.
    pub fn input_type(&self, pos: usize) -> Option<ValueType> {
        self.inputs.get(pos).copied()
    }
}

use ValueType::*;

const fn entry(
    name: &'static str,
    param: Option<ParamDomain>,
    inputs: &'static [ValueType],
    output: ValueType,
    commutative: bool,
) -> OpCatalogEntry {
    OpCatalogEntry {
        name,
        arity: inputs.len(),
        param,
        inputs,
        output,
        commutative,
    }
}

static CATALOG: &[OpCatalogEntry] = &[
    entry("scene", None, &[], ObjectSet, false),
    entry("filter_color", Some(ParamDomain::Color), &[ObjectSet], ObjectSet, false),
    entry("filter_shape", Some(ParamDomain::Shape), &[ObjectSet], ObjectSet, false),
    entry("filter_size", Some(ParamDomain::Size), &[ObjectSet], ObjectSet, false),
    entry(
        "filter_material",
        Some(ParamDomain::Material),
        &[ObjectSet],
        ObjectSet,
        false,
    ),
    entry("unique", None, &[ObjectSet], SingleObject, false),
    entry("relate", Some(ParamDomain::Relation), &[SingleObject], ObjectSet, false),
    entry("count", None, &[ObjectSet], Count, false),
    entry("exist", None, &[ObjectSet], Truth, false),
    entry("query_color", None, &[SingleObject], Attr, false),
    entry("query_shape", None, &[SingleObject], Attr, false),
    entry("query_size", None, &[SingleObject], Attr, false),
    entry("query_material", None, &[SingleObject], Attr, false),
    entry("same_color", None, &[SingleObject], ObjectSet, false),
    entry("same_shape", None, &[SingleObject], ObjectSet, false),
    entry("same_size", None, &[SingleObject], ObjectSet, false),
    entry("same_material", None, &[SingleObject], ObjectSet, false),
    entry("intersect", None, &[ObjectSet, ObjectSet], ObjectSet, true),
    entry("union", None, &[ObjectSet, ObjectSet], ObjectSet, true),
    entry("equal_integer", None, &[Count, Count], Truth, true),
    entry("less_than", None, &[Count, Count], Truth, false),
    entry("greater_than", None, &[Count, Count], Truth, false),
    entry("equal_color", None, &[Attr, Attr], Truth, true),
    entry("equal_shape", None, &[Attr, Attr], Truth, true),
    entry("equal_size", None, &[Attr, Attr], Truth, true),
    entry("equal_material", None, &[Attr, Attr], Truth, true),
];

/// Argument position carried by a program edge label: a plain decimal index.
pub fn arg_position(label: &str) -> Option<usize> {
    let t = label.trim();
    if t.is_empty() || !t.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    t.parse().ok()
}

/// The full operation catalog, in a fixed order.
pub fn catalog() -> &'static [OpCatalogEntry] {
    CATALOG
}

pub fn lookup(name: &str) -> Option<&'static OpCatalogEntry> {
    CATALOG.iter().find(|e| e.name == name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unique_maps_set_to_single_object() {
        let e = lookup("unique").unwrap();
        assert_eq!(e.arity, 1);
        assert_eq!(e.inputs, &[ObjectSet]);
        assert_eq!(e.output, SingleObject);
    }

    #[test]
    fn scene_is_the_only_nullary_op() {
        assert_eq!(lookup("scene").unwrap().arity, 0);
        let nullary: Vec<_> = catalog().iter().filter(|e| e.arity == 0).collect();
        assert_eq!(nullary.len(), 1);
    }

    #[test]
    fn comparison_commutativity() {
        assert!(!lookup("less_than").unwrap().commutative);
        assert!(!lookup("greater_than").unwrap().commutative);
        assert!(lookup("equal_integer").unwrap().commutative);
        assert!(lookup("union").unwrap().commutative);
    }

    #[test]
    fn parameterized_ops() {
        let params: Vec<_> = catalog().iter().filter(|e| e.parameterized()).map(|e| e.name).collect();
        assert_eq!(
            params,
            [
                "filter_color",
                "filter_shape",
                "filter_size",
                "filter_material",
                "relate"
            ]
        );
        assert!(lookup("nope").is_none());
    }
}
