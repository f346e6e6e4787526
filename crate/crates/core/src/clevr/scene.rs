use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::catalog::{ParamDomain, RELATIONS};

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("invalid scene json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid scene: {0}")]
    Invalid(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneObject {
    pub id: usize,
    pub color: String,
    pub shape: String,
    pub size: String,
    pub material: String,
}

impl SceneObject {
    pub fn attribute(&self, domain: ParamDomain) -> &str {
        match domain {
            ParamDomain::Color => &self.color,
            ParamDomain::Shape => &self.shape,
            ParamDomain::Size => &self.size,
            ParamDomain::Material => &self.material,
            ParamDomain::Relation => unreachable!("relations are not object attributes"),
        }
    }
}

/// Objects plus spatial relations stored as per-object index lists:
/// `relations["left"][i]` lists the objects to the left of object `i`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scene {
    pub objects: Vec<SceneObject>,
    #[serde(default)]
    pub relations: BTreeMap<String, Vec<Vec<usize>>>,
}

fn inverse(relation: &str) -> &'static str {
    match relation {
        "left" => "right",
        "right" => "left",
        "front" => "behind",
        _ => "front",
    }
}

impl Scene {
    pub fn from_json(text: &str) -> Result<Scene, SceneError> {
        let mut scene: Scene = serde_json::from_str(text)?;
        scene.normalize();
        scene.validate()?;
        Ok(scene)
    }

    /// Fills in missing relations as empty lists.
    fn normalize(&mut self) {
        let n = self.objects.len();
        for r in RELATIONS {
            self.relations
                .entry(r.to_string())
                .or_insert_with(|| vec![Vec::new(); n]);
        }
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        let invalid = |m: String| Err(SceneError::Invalid(m));
        let n = self.objects.len();
        for (i, o) in self.objects.iter().enumerate() {
            if o.id != i {
                return invalid(format!("object at index {i} has id {}", o.id));
            }
            for domain in [
                ParamDomain::Color,
                ParamDomain::Shape,
                ParamDomain::Size,
                ParamDomain::Material,
            ] {
                if !domain.contains(o.attribute(domain)) {
                    return invalid(format!(
                        "object {i} has unknown attribute value `{}`",
                        o.attribute(domain)
                    ));
                }
            }
        }
        for (name, lists) in &self.relations {
            if !RELATIONS.contains(&name.as_str()) {
                return invalid(format!("unknown relation `{name}`"));
            }
            if lists.len() != n {
                return invalid(format!("relation `{name}` has {} lists for {n} objects", lists.len()));
            }
            for (i, related) in lists.iter().enumerate() {
                for &j in related {
                    if j >= n {
                        return invalid(format!("relation `{name}` of object {i} refers to {j}"));
                    }
                    if j == i {
                        return invalid(format!("relation `{name}` is reflexive at object {i}"));
                    }
                    let inv = self.related(inverse(name), j);
                    if !inv.contains(&i) {
                        return invalid(format!(
                            "object {j} is {name} of {i} but {i} is not {} of {j}",
                            inverse(name)
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn related(&self, relation: &str, object: usize) -> &[usize] {
        self.relations
            .get(relation)
            .and_then(|l| l.get(object))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }
}
