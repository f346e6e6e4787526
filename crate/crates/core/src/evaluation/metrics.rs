use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::graph::{normalize_label, LabeledGraph};

/// A relation identified by normalized source label, target label and edge
/// label.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RelationTriple {
    pub source: String,
    pub target: String,
    pub label: String,
}

impl RelationTriple {
    pub fn new(source: &str, target: &str, label: &str) -> Self {
        RelationTriple {
            source: normalize_label(source),
            target: normalize_label(target),
            label: normalize_label(label),
        }
    }

    /// Source, edge label and target joined by spaces.
    pub fn text(&self) -> String {
        [&self.source, &self.label, &self.target]
            .iter()
            .filter(|s| !s.is_empty())
            .map(|s| s.as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Distinct relation triples of `graph`, in edge order.
pub fn relation_triples(graph: &LabeledGraph) -> Vec<RelationTriple> {
    let label = |id| graph.node(id).expect("endpoint exists").display_label();
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for e in graph.edges() {
        let t = RelationTriple::new(&label(&e.source), &label(&e.target), &e.label);
        if seen.insert(t.clone()) {
            out.push(t);
        }
    }
    out
}

pub trait Tokenizer: Send + Sync {
    fn tokenize(&self, text: &str) -> Vec<String>;
}

/// Lowercases and splits into alphanumeric runs and single punctuation
/// characters; whitespace separates tokens.
#[derive(Clone, Copy, Debug, Default)]
pub struct WordPunctTokenizer;

impl Tokenizer for WordPunctTokenizer {
    fn tokenize(&self, text: &str) -> Vec<String> {
        let mut out = Vec::new();
        let mut word = String::new();
        for c in text.to_lowercase().chars() {
            if c.is_alphanumeric() {
                word.push(c);
                continue;
            }
            if !word.is_empty() {
                out.push(std::mem::take(&mut word));
            }
            if !c.is_whitespace() {
                out.push(c.to_string());
            }
        }
        if !word.is_empty() {
            out.push(word);
        }
        out
    }
}

/// Jaccard index of the token sets of two triples; 1 when both are empty.
pub fn token_overlap_with(tokenizer: &dyn Tokenizer, a: &RelationTriple, b: &RelationTriple) -> f64 {
    let ta: BTreeSet<String> = tokenizer.tokenize(&a.text()).into_iter().collect();
    let tb: BTreeSet<String> = tokenizer.tokenize(&b.text()).into_iter().collect();
    let union = ta.union(&tb).count();
    if union == 0 {
        return 1.0;
    }
    ta.intersection(&tb).count() as f64 / union as f64
}

pub fn token_overlap(a: &RelationTriple, b: &RelationTriple) -> f64 {
    token_overlap_with(&WordPunctTokenizer, a, b)
}

pub fn exact_match(a: &RelationTriple, b: &RelationTriple) -> f64 {
    if a == b {
        1.0
    } else {
        0.0
    }
}

/// `Σ_e 1 / Σ_e' sim(e, e')`; 0 for the empty set.
pub fn soft_cardinality(relations: &[RelationTriple], sim: &dyn Fn(&RelationTriple, &RelationTriple) -> f64) -> f64 {
    relations
        .iter()
        .map(|e| 1.0 / relations.iter().map(|f| sim(e, f)).sum::<f64>())
        .sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    pub fn zero() -> Self {
        Prf {
            precision: 0.0,
            recall: 0.0,
            f1: 0.0,
        }
    }

    pub fn from_pr(precision: f64, recall: f64) -> Self {
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Prf { precision, recall, f1 }
    }
}

/// Soft precision, recall and F1 over relation triples, with the soft
/// intersection `card(E) + card(Er) − card(E ∪ Er)`.
pub fn soft_prf(
    predicted: &LabeledGraph,
    reference: &LabeledGraph,
    sim: &dyn Fn(&RelationTriple, &RelationTriple) -> f64,
) -> Prf {
    soft_prf_triples(&relation_triples(predicted), &relation_triples(reference), sim)
}

pub fn soft_prf_triples(
    predicted: &[RelationTriple],
    reference: &[RelationTriple],
    sim: &dyn Fn(&RelationTriple, &RelationTriple) -> f64,
) -> Prf {
    match (predicted.is_empty(), reference.is_empty()) {
        (true, true) => return Prf::from_pr(1.0, 1.0),
        (true, false) | (false, true) => return Prf::zero(),
        (false, false) => {}
    }
    let mut union: Vec<RelationTriple> = predicted.to_vec();
    for t in reference {
        if !union.contains(t) {
            union.push(t.clone());
        }
    }
    let cp = soft_cardinality(predicted, sim);
    let cr = soft_cardinality(reference, sim);
    let inter = (cp + cr - soft_cardinality(&union, sim)).clamp(0.0, cp.min(cr));
    Prf::from_pr(inter / cp, inter / cr)
}
