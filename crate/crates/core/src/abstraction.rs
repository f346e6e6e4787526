//! Incremental merge of candidate graphs into a probabilistic partial model.

use std::collections::BTreeMap;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{DomainProfile, SeedSelection};
use crate::graph::{normalize_label_with, GraphError, LabeledGraph, NodeId, NodeKind};
use crate::matching::{match_graphs, CostModel, MatchError};
use crate::similarity::EmbeddingProvider;

#[derive(Debug, Error)]
pub enum AbstractionError {
    #[error("abstraction needs at least one candidate")]
    NoCandidates,
    #[error(transparent)]
    Match(#[from] MatchError),
}

#[derive(Debug, Error)]
pub enum PartialModelError {
    #[error("invalid partial model json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid partial model: {0}")]
    Invalid(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartialNode {
    pub kind: NodeKind,
    pub count: usize,
    pub labels: BTreeMap<String, usize>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartialEdge {
    pub count: usize,
    pub labels: BTreeMap<String, usize>,
}

/// Most frequent label; the lexicographically smallest among equals.
pub fn representative(labels: &BTreeMap<String, usize>) -> &str {
    let mut best: Option<(&String, usize)> = None;
    for (label, &c) in labels {
        if best.is_none_or(|(_, b)| c > b) {
            best = Some((label, c));
        }
    }
    best.map(|(l, _)| l.as_str()).unwrap_or("")
}

fn add_label(labels: &mut BTreeMap<String, usize>, label: &str) {
    *labels.entry(label.to_string()).or_insert(0) += 1;
}

type EdgeKey = (NodeId, NodeId, String);

/// Merged candidates: per-element occurrence counts and label histograms.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartialModel {
    n_candidates: usize,
    case_sensitive_labels: bool,
    nodes: IndexMap<NodeId, PartialNode>,
    edges: IndexMap<EdgeKey, PartialEdge>,
}

impl PartialModel {
    pub fn new(n_candidates: usize, case_sensitive_labels: bool) -> Self {
        PartialModel {
            n_candidates,
            case_sensitive_labels,
            nodes: IndexMap::new(),
            edges: IndexMap::new(),
        }
    }

    pub fn n_candidates(&self) -> usize {
        self.n_candidates
    }

    pub fn case_sensitive_labels(&self) -> bool {
        self.case_sensitive_labels
    }

    pub fn nodes(&self) -> impl ExactSizeIterator<Item = (&NodeId, &PartialNode)> + '_ {
        self.nodes.iter()
    }

    /// Edges keyed by (source, target, normalized label).
    pub fn edges(&self) -> impl ExactSizeIterator<Item = (&EdgeKey, &PartialEdge)> + '_ {
        self.edges.iter()
    }

    pub fn node(&self, id: &NodeId) -> Option<&PartialNode> {
        self.nodes.get(id)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn node_probability(&self, id: &NodeId) -> Option<f64> {
        self.nodes.get(id).map(|n| n.count as f64 / self.n_candidates as f64)
    }

    pub fn edge_probability(&self, key: &EdgeKey) -> Option<f64> {
        self.edges.get(key).map(|e| e.count as f64 / self.n_candidates as f64)
    }

    fn fresh_id(&self) -> NodeId {
        (self.nodes.len()..)
            .map(|k| NodeId::new(format!("p{k}")))
            .find(|id| !self.nodes.contains_key(id))
            .expect("unbounded range")
    }

    /// Inserts a node with the given count and label histogram.
    pub fn insert_node(&mut self, kind: NodeKind, labels: BTreeMap<String, usize>) -> NodeId {
        let id = self.fresh_id();
        let count = labels.values().sum();
        self.nodes.insert(id.clone(), PartialNode { kind, count, labels });
        id
    }

    /// Inserts an edge between existing nodes. The key uses the normalized
    /// representative label.
    pub fn insert_edge(
        &mut self,
        source: &NodeId,
        target: &NodeId,
        labels: BTreeMap<String, usize>,
    ) -> Result<(), GraphError> {
        for id in [source, target] {
            if !self.nodes.contains_key(id) {
                return Err(GraphError::UnknownNode(id.clone()));
            }
        }
        let key = (
            source.clone(),
            target.clone(),
            normalize_label_with(representative(&labels), self.case_sensitive_labels),
        );
        if self.edges.contains_key(&key) {
            return Err(GraphError::DuplicateEdge {
                from: key.0,
                to: key.1,
                label: key.2,
            });
        }
        let count = labels.values().sum();
        self.edges.insert(key, PartialEdge { count, labels });
        Ok(())
    }

    /// The partial model as a graph of representative labels, with partial
    /// element ids as node ids.
    pub fn representative_view(&self) -> LabeledGraph {
        let mut g = LabeledGraph::with_case_sensitive_labels(self.case_sensitive_labels);
        for (id, n) in &self.nodes {
            g.add_node_with_id(id.clone(), representative(&n.labels), n.kind.clone())
                .expect("partial ids are unique");
        }
        for ((s, t, _), e) in &self.edges {
            g.add_edge(s, t, representative(&e.labels))
                .expect("edge keys are unique");
        }
        g
    }

    fn seed(graph: &LabeledGraph, n_candidates: usize, case_sensitive: bool) -> Self {
        let mut pm = PartialModel::new(n_candidates, case_sensitive);
        let mut ids = Vec::new();
        for n in graph.nodes() {
            ids.push(pm.add_observation_node(None, &n.label, &n.kind));
        }
        pm.merge_edges(graph, |id| ids[graph.node_index(id).expect("endpoint")].clone());
        pm
    }

    fn add_observation_node(&mut self, matched: Option<&NodeId>, label: &str, kind: &NodeKind) -> NodeId {
        match matched {
            Some(id) => {
                let node = self.nodes.get_mut(id).expect("matched node exists");
                node.count += 1;
                add_label(&mut node.labels, label);
                id.clone()
            }
            None => {
                let mut labels = BTreeMap::new();
                add_label(&mut labels, label);
                self.insert_node(kind.clone(), labels)
            }
        }
    }

    fn merge_edges(&mut self, graph: &LabeledGraph, partial_of: impl Fn(&NodeId) -> NodeId) {
        for e in graph.edges() {
            let key = (
                partial_of(&e.source),
                partial_of(&e.target),
                normalize_label_with(&e.label, self.case_sensitive_labels),
            );
            let entry = self.edges.entry(key).or_insert_with(|| PartialEdge {
                count: 0,
                labels: BTreeMap::new(),
            });
            entry.count += 1;
            add_label(&mut entry.labels, &e.label);
        }
    }

    fn merge(&mut self, graph: &LabeledGraph, cost: &CostModel<'_>, profile: &DomainProfile) -> Result<(), MatchError> {
        let view = self.representative_view();
        let m = match_graphs(graph, &view, cost, profile.match_timeout)?;
        let mut partial_of = std::collections::HashMap::new();
        for n in graph.nodes() {
            let pid = self.add_observation_node(m.node_map.get(&n.id), &n.label, &n.kind);
            partial_of.insert(n.id.clone(), pid);
        }
        self.merge_edges(graph, |id| partial_of[id].clone());
        Ok(())
    }

    /// Maximum-likelihood concretization: every element with P > 0.5, with
    /// edges whose endpoints were dropped removed as well.
    pub fn mlc(&self) -> LabeledGraph {
        let keep = |count: usize| 2 * count > self.n_candidates;
        let mut g = LabeledGraph::with_case_sensitive_labels(self.case_sensitive_labels);
        for (id, n) in &self.nodes {
            if keep(n.count) {
                g.add_node_with_id(id.clone(), representative(&n.labels), n.kind.clone())
                    .expect("partial ids are unique");
            }
        }
        for ((s, t, _), e) in &self.edges {
            if keep(e.count) && g.contains_node(s) && g.contains_node(t) {
                g.add_edge(s, t, representative(&e.labels))
                    .expect("edge keys are unique");
            }
        }
        g
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&PartialModelRepr::from(self)).expect("plain data")
    }

    pub fn from_json(text: &str) -> Result<Self, PartialModelError> {
        let repr: PartialModelRepr = serde_json::from_str(text)?;
        PartialModel::try_from(repr)
    }

    /// Checks the count and histogram invariants.
    pub fn invariant_violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let n = self.n_candidates;
        let mut check = |what: String, count: usize, labels: &BTreeMap<String, usize>| {
            if count == 0 || count > n {
                out.push(format!("{what} has count {count} outside 1..={n}"));
            }
            if labels.values().sum::<usize>() != count {
                out.push(format!("{what} histogram does not sum to its count"));
            }
        };
        for (id, node) in &self.nodes {
            check(format!("node {id}"), node.count, &node.labels);
        }
        for ((s, t, l), e) in &self.edges {
            check(format!("edge {s} -> {t} [{l}]"), e.count, &e.labels);
        }
        out
    }
}

/// Merges `candidates` in order (after the seed) into a partial model.
pub fn abstract_candidates(
    candidates: &[LabeledGraph],
    profile: &DomainProfile,
    provider: &dyn EmbeddingProvider,
) -> Result<PartialModel, AbstractionError> {
    if candidates.is_empty() {
        return Err(AbstractionError::NoCandidates);
    }
    let seed = match profile.seed_selection {
        SeedSelection::First => 0,
        SeedSelection::Largest => {
            let size = |g: &LabeledGraph| g.node_count() + g.edge_count();
            let max = candidates.iter().map(size).max().expect("non-empty");
            candidates.iter().position(|g| size(g) == max).expect("max exists")
        }
    };
    let cost = CostModel::from_profile(profile, provider);
    let mut pm = PartialModel::seed(&candidates[seed], candidates.len(), profile.case_sensitive_labels);
    for (i, g) in candidates.iter().enumerate() {
        if i != seed {
            pm.merge(g, &cost, profile)?;
        }
    }
    Ok(pm)
}

#[derive(Serialize, Deserialize)]
struct NodeRepr {
    id: NodeId,
    kind: NodeKind,
    count: usize,
    labels: BTreeMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct EdgeRepr {
    source: NodeId,
    target: NodeId,
    count: usize,
    labels: BTreeMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct PartialModelRepr {
    n_candidates: usize,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    case_sensitive_labels: bool,
    nodes: Vec<NodeRepr>,
    edges: Vec<EdgeRepr>,
}

impl From<&PartialModel> for PartialModelRepr {
    fn from(pm: &PartialModel) -> Self {
        PartialModelRepr {
            n_candidates: pm.n_candidates,
            case_sensitive_labels: pm.case_sensitive_labels,
            nodes: pm
                .nodes
                .iter()
                .map(|(id, n)| NodeRepr {
                    id: id.clone(),
                    kind: n.kind.clone(),
                    count: n.count,
                    labels: n.labels.clone(),
                })
                .collect(),
            edges: pm
                .edges
                .iter()
                .map(|((s, t, _), e)| EdgeRepr {
                    source: s.clone(),
                    target: t.clone(),
                    count: e.count,
                    labels: e.labels.clone(),
                })
                .collect(),
        }
    }
}

impl TryFrom<PartialModelRepr> for PartialModel {
    type Error = PartialModelError;

    fn try_from(repr: PartialModelRepr) -> Result<Self, Self::Error> {
        let invalid = |m: String| PartialModelError::Invalid(m);
        if repr.n_candidates == 0 {
            return Err(invalid("n_candidates must be positive".into()));
        }
        let mut pm = PartialModel::new(repr.n_candidates, repr.case_sensitive_labels);
        for n in repr.nodes {
            if pm.nodes.contains_key(&n.id) {
                return Err(invalid(format!("duplicate node id `{}`", n.id)));
            }
            pm.nodes.insert(
                n.id,
                PartialNode {
                    kind: n.kind,
                    count: n.count,
                    labels: n.labels,
                },
            );
        }
        for e in repr.edges {
            let keys: std::collections::BTreeSet<String> = e
                .labels
                .keys()
                .map(|l| normalize_label_with(l, pm.case_sensitive_labels))
                .collect();
            if keys.len() > 1 {
                return Err(invalid(format!(
                    "edge {} -> {} mixes labels that normalize differently",
                    e.source, e.target
                )));
            }
            if e.count != e.labels.values().sum::<usize>() {
                return Err(invalid(format!(
                    "edge {} -> {} count {} does not match its histogram",
                    e.source, e.target, e.count
                )));
            }
            pm.insert_edge(&e.source, &e.target, e.labels)
                .map_err(|err| invalid(err.to_string()))?;
        }
        let problems = pm.invariant_violations();
        if let Some(p) = problems.into_iter().next() {
            return Err(invalid(p));
        }
        Ok(pm)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Domain;
    use crate::notation::{parse, Notation};
    use crate::similarity::BuiltinEmbedder;

    fn flow(src: &str) -> LabeledGraph {
        parse(src, Notation::MermaidFlowchart).unwrap().graph
    }

    fn profile() -> DomainProfile {
        DomainProfile::new(Domain::Flowchart)
    }

    const G: &str = "flowchart TD\nA[start] --> B{ok?}\nB -->|yes| C[go]\nB -->|no| D[stop]";

    #[test]
    fn single_candidate_has_unit_probabilities() {
        let pm = abstract_candidates(&[flow(G)], &profile(), &BuiltinEmbedder).unwrap();
        assert!(pm.nodes().all(|(_, n)| n.count == 1));
        assert!(pm.edges().all(|(_, e)| e.count == 1));
        assert_eq!(pm.mlc().node_count(), 4);
        assert_eq!(pm.mlc().edge_count(), 3);
    }

    #[test]
    fn identical_candidates_stack() {
        let gs = vec![flow(G), flow(G), flow(G)];
        let pm = abstract_candidates(&gs, &profile(), &BuiltinEmbedder).unwrap();
        assert_eq!(pm.node_count(), 4);
        assert_eq!(pm.edge_count(), 3);
        assert!(pm.nodes().all(|(_, n)| n.count == 3));
        assert!(pm.edges().all(|(_, e)| e.count == 3));
        assert!(pm.invariant_violations().is_empty());
    }

    #[test]
    fn representative_tie_is_lexicographic() {
        let labels: BTreeMap<String, usize> = [("b".into(), 2), ("a".into(), 2), ("c".into(), 1)].into();
        assert_eq!(representative(&labels), "a");
    }

    #[test]
    fn half_support_is_dropped_by_mlc() {
        let gs = vec![flow("flowchart TD\nA[a] --> B[b]"), flow("flowchart TD\nA[a]")];
        let pm = abstract_candidates(&gs, &profile(), &BuiltinEmbedder).unwrap();
        let m = pm.mlc();
        assert_eq!(m.node_count(), 1);
        assert_eq!(m.edge_count(), 0);
    }

    #[test]
    fn json_round_trip() {
        let gs = vec![flow(G), flow("flowchart TD\nA[Start] --> B{ok?}\nB -->|yes| C[go]")];
        let pm = abstract_candidates(&gs, &profile(), &BuiltinEmbedder).unwrap();
        let text = pm.to_json();
        assert_eq!(PartialModel::from_json(&text).unwrap(), pm);
        assert!(PartialModel::from_json(&text.replace("\"count\": 2", "\"count\": 7")).is_err());
    }

    #[test]
    fn largest_seed() {
        let small = flow("flowchart TD\nA[a]");
        let big = flow(G);
        let mut p = profile();
        p.seed_selection = SeedSelection::Largest;
        let pm = abstract_candidates(&[small, big], &p, &BuiltinEmbedder).unwrap();
        assert_eq!(representative(&pm.node(&NodeId::new("p0")).unwrap().labels), "start");
    }
}
