//! Label and element similarity used by graph matching.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{normalize_label, Edge, Node, NodeId};

pub const BUILTIN_DIMENSION: usize = 256;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("embedding provider failed: {0}")]
pub struct ProviderFailure(pub String);

/// Turns texts into unit-norm vectors of a fixed dimension. The zero vector
/// is allowed for texts with no content.
pub trait EmbeddingProvider: Send + Sync {
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, ProviderFailure>;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimilarityMode {
    Embedding,
    ExactLabel,
}

/// Offline provider: hashed character trigrams and word unigrams.
#[derive(Clone, Copy, Debug, Default)]
pub struct BuiltinEmbedder;

impl EmbeddingProvider for BuiltinEmbedder {
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, ProviderFailure> {
        Ok(builtin_embed(texts))
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn embed_one(text: &str) -> Vec<f64> {
    let mut v = vec![0.0; BUILTIN_DIMENSION];
    let norm = normalize_label(text);
    if norm.is_empty() {
        return v;
    }
    let mut bump = |feature: &str| {
        v[(fnv1a(feature.as_bytes()) % BUILTIN_DIMENSION as u64) as usize] += 1.0;
    };
    for word in norm.split(' ') {
        bump(&format!("w:{word}"));
    }
    let padded: Vec<char> = format!(" {norm} ").chars().collect();
    for tri in padded.windows(3) {
        let s: String = tri.iter().collect();
        bump(&format!("c:{s}"));
    }
    let len = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= len);
    v
}

pub fn builtin_embed(texts: &[String]) -> Vec<Vec<f64>> {
    texts.iter().map(|t| embed_one(t)).collect()
}

/// Cosine similarity clamped to `[0, 1]`; zero vectors score 0.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot / (na * nb)).clamp(0.0, 1.0)
}

pub fn node_similarity(
    a: &Node,
    b: &Node,
    mode: SimilarityMode,
    provider: &dyn EmbeddingProvider,
) -> Result<f64, ProviderFailure> {
    Ok(similarity_matrix(&[a], &[b], mode, provider)?[0][0])
}

/// Pairwise node similarities, embedding every distinct label once.
pub fn similarity_matrix(
    left: &[&Node],
    right: &[&Node],
    mode: SimilarityMode,
    provider: &dyn EmbeddingProvider,
) -> Result<Vec<Vec<f64>>, ProviderFailure> {
    let keys = |nodes: &[&Node]| -> Vec<String> { nodes.iter().map(|n| normalize_label(&n.display_label())).collect() };
    let (lk, rk) = (keys(left), keys(right));
    let mut vectors: HashMap<String, Vec<f64>> = HashMap::new();
    if mode == SimilarityMode::Embedding {
        let mut texts: Vec<String> = lk.iter().chain(&rk).cloned().collect();
        texts.sort();
        texts.dedup();
        let embedded = provider.embed(&texts)?;
        if embedded.len() != texts.len() {
            return Err(ProviderFailure(format!(
                "expected {} vectors, got {}",
                texts.len(),
                embedded.len()
            )));
        }
        vectors.extend(texts.into_iter().zip(embedded));
    }
    let mut out = vec![vec![0.0; right.len()]; left.len()];
    for (i, a) in left.iter().enumerate() {
        for (j, b) in right.iter().enumerate() {
            out[i][j] = if a.kind != b.kind {
                0.0
            } else if lk[i] == rk[j] {
                1.0
            } else {
                match mode {
                    SimilarityMode::ExactLabel => 0.0,
                    SimilarityMode::Embedding => cosine(&vectors[&lk[i]], &vectors[&rk[j]]),
                }
            };
        }
    }
    Ok(out)
}

/// Endpoints map onto `e2`'s endpoints and the normalized labels agree.
pub fn relation_match(e1: &Edge, e2: &Edge, node_map: &HashMap<NodeId, NodeId>) -> bool {
    node_map.get(&e1.source) == Some(&e2.source)
        && node_map.get(&e1.target) == Some(&e2.target)
        && normalize_label(&e1.label) == normalize_label(&e2.label)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::NodeKind;
    use proptest::prelude::*;

    fn node(label: &str, kind: NodeKind) -> Node {
        Node {
            id: NodeId::new(label),
            label: label.into(),
            kind,
        }
    }

    fn sim(a: &str, b: &str) -> f64 {
        let (a, b) = (node(a, NodeKind::Activity), node(b, NodeKind::Activity));
        node_similarity(&a, &b, SimilarityMode::Embedding, &BuiltinEmbedder).unwrap()
    }

    #[test]
    fn exact_and_kind_rules() {
        let s = node("Start", NodeKind::Activity);
        let d = node("Start", NodeKind::Decision);
        let exact = SimilarityMode::ExactLabel;
        assert_eq!(node_similarity(&s, &s, exact, &BuiltinEmbedder).unwrap(), 1.0);
        assert_eq!(node_similarity(&s, &d, exact, &BuiltinEmbedder).unwrap(), 0.0);
        assert_eq!(
            node_similarity(&s, &d, SimilarityMode::Embedding, &BuiltinEmbedder).unwrap(),
            0.0
        );
    }

    #[test]
    fn embedding_range_and_symmetry() {
        let ab = sim("check stock", "verify inventory");
        let ba = sim("verify inventory", "check stock");
        assert!((0.0..1.0).contains(&ab));
        assert_eq!(ab, ba);
        assert!(sim("check stock", "stock check") > sim("check stock", "paint wall"));
    }

    #[test]
    fn builtin_vectors() {
        let v = builtin_embed(&["abc".into(), "abc".into(), "".into()]);
        assert_eq!(v[0], v[1]);
        assert!((v[0].iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(v[2].iter().all(|&x| x == 0.0));
        assert_eq!(cosine(&v[2], &v[0]), 0.0);
    }

    #[test]
    fn relation_matching() {
        let map: HashMap<NodeId, NodeId> = [("a".into(), "x".into()), ("b".into(), "y".into())]
            .into_iter()
            .collect();
        let e = |s: &str, t: &str, l: &str| Edge {
            source: s.into(),
            target: t.into(),
            label: l.into(),
        };
        assert!(relation_match(&e("a", "b", "Yes"), &e("x", "y", "yes"), &map));
        assert!(!relation_match(&e("a", "b", "yes"), &e("x", "y", "no"), &map));
        assert!(!relation_match(&e("c", "b", "yes"), &e("x", "y", "yes"), &map));
    }

    proptest! {
        #[test]
        fn similarity_symmetric_in_unit_range(a in "[a-z ]{0,12}", b in "[a-z ]{0,12}") {
            let ab = sim(&a, &b);
            prop_assert_eq!(ab, sim(&b, &a));
            prop_assert!((0.0..=1.0).contains(&ab));
            prop_assert_eq!(sim(&a, &a), 1.0);
        }
    }
}
