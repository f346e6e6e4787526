//! Labeled directed graphs: the shared model for candidates, partial-model
//! views and concretized outputs.

use std::collections::HashSet;
use std::fmt;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clevr::catalog;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("unknown node `{0}`")]
    UnknownNode(NodeId),
    #[error("duplicate node id `{0}`")]
    DuplicateNode(NodeId),
    #[error("duplicate edge {from} -> {to} [{label}]")]
    DuplicateEdge { from: NodeId, to: NodeId, label: String },
    #[error("invalid clevr operation: {0}")]
    InvalidOp(String),
}

/// Opaque node identifier, unique within one graph.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(String);

impl NodeId {
    pub fn new(id: impl Into<String>) -> Self {
        NodeId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for NodeId {
    fn from(s: &str) -> Self {
        NodeId(s.to_string())
    }
}

/// A Clevr operation together with its parameter. Always catalog-valid.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "RawClevrOp")]
pub struct ClevrOp {
    op: String,
    param: Option<String>,
}

#[derive(Deserialize)]
struct RawClevrOp {
    op: String,
    #[serde(default)]
    param: Option<String>,
}

impl TryFrom<RawClevrOp> for ClevrOp {
    type Error = GraphError;

    fn try_from(raw: RawClevrOp) -> Result<Self, Self::Error> {
        ClevrOp::new(raw.op, raw.param)
    }
}

impl ClevrOp {
    pub fn new(op: impl Into<String>, param: Option<String>) -> Result<Self, GraphError> {
        let op = op.into();
        let entry =
            catalog::lookup(&op).ok_or_else(|| GraphError::InvalidOp(format!("`{op}` is not in the catalog")))?;
        match (entry.param, &param) {
            (None, None) => {}
            (None, Some(p)) => return Err(GraphError::InvalidOp(format!("`{op}` takes no parameter, got `{p}`"))),
            (Some(_), None) => return Err(GraphError::InvalidOp(format!("`{op}` requires a parameter"))),
            (Some(domain), Some(p)) => {
                if !domain.contains(p) {
                    return Err(GraphError::InvalidOp(format!(
                        "`{p}` is not a valid parameter for `{op}`"
                    )));
                }
            }
        }
        Ok(ClevrOp { op, param })
    }

    pub fn op(&self) -> &str {
        &self.op
    }

    pub fn param(&self) -> Option<&str> {
        self.param.as_deref()
    }

    pub fn entry(&self) -> &'static catalog::OpCatalogEntry {
        catalog::lookup(&self.op).expect("validated at construction")
    }
}

impl fmt::Display for ClevrOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.param {
            Some(p) => write!(f, "{}[{}]", self.op, p),
            None => f.write_str(&self.op),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NodeKind {
    Activity,
    Decision,
    Concept,
    ClevrOp(ClevrOp),
}

impl NodeKind {
    pub fn clevr(op: &str, param: Option<&str>) -> Result<Self, GraphError> {
        ClevrOp::new(op, param.map(str::to_string)).map(NodeKind::ClevrOp)
    }

    /// Variant name, ignoring any operation payload.
    pub fn tag(&self) -> &'static str {
        match self {
            NodeKind::Activity => "activity",
            NodeKind::Decision => "decision",
            NodeKind::Concept => "concept",
            NodeKind::ClevrOp(_) => "clevr_op",
        }
    }

    pub fn as_clevr(&self) -> Option<&ClevrOp> {
        match self {
            NodeKind::ClevrOp(op) => Some(op),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    pub label: String,
    pub kind: NodeKind,
}

impl Node {
    /// The label used for display, comparison and relation triples. Clevr
    /// operations render as `op[param]` regardless of the stored label.
    pub fn display_label(&self) -> String {
        match &self.kind {
            NodeKind::ClevrOp(op) => op.to_string(),
            _ => self.label.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub source: NodeId,
    pub target: NodeId,
    #[serde(default)]
    pub label: String,
}

/// Trim, collapse internal whitespace and case-fold.
pub fn normalize_label(label: &str) -> String {
    normalize_label_with(label, false)
}

pub fn normalize_label_with(label: &str, case_sensitive: bool) -> String {
    let collapsed = label.split_whitespace().collect::<Vec<_>>().join(" ");
    if case_sensitive {
        collapsed
    } else {
        collapsed.to_lowercase()
    }
}

type EdgeKey = (NodeId, NodeId, String);

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(try_from = "GraphRepr", into = "GraphRepr")]
pub struct LabeledGraph {
    nodes: IndexMap<NodeId, Node>,
    edges: Vec<Edge>,
    edge_keys: HashSet<EdgeKey>,
    case_sensitive: bool,
    next_id: usize,
}

#[derive(Serialize, Deserialize)]
struct GraphRepr {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    case_sensitive_labels: bool,
}

impl TryFrom<GraphRepr> for LabeledGraph {
    type Error = GraphError;

    fn try_from(repr: GraphRepr) -> Result<Self, Self::Error> {
        let mut g = LabeledGraph::with_case_sensitive_labels(repr.case_sensitive_labels);
        for n in repr.nodes {
            g.add_node_with_id(n.id, n.label, n.kind)?;
        }
        for e in repr.edges {
            g.add_edge(&e.source, &e.target, e.label)?;
        }
        Ok(g)
    }
}

impl From<LabeledGraph> for GraphRepr {
    fn from(g: LabeledGraph) -> Self {
        GraphRepr {
            nodes: g.nodes.into_values().collect(),
            edges: g.edges,
            case_sensitive_labels: g.case_sensitive,
        }
    }
}

impl PartialEq for LabeledGraph {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes && self.edges == other.edges
    }
}

impl LabeledGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_case_sensitive_labels(case_sensitive: bool) -> Self {
        LabeledGraph {
            case_sensitive,
            ..Self::default()
        }
    }

    pub fn case_sensitive_labels(&self) -> bool {
        self.case_sensitive
    }

    /// Normalize an edge label under this graph's case policy.
    pub fn label_key(&self, label: &str) -> String {
        normalize_label_with(label, self.case_sensitive)
    }

    /// Adds a node under a fresh id and returns that id.
    pub fn add_node(&mut self, label: impl Into<String>, kind: NodeKind) -> NodeId {
        let id = loop {
            let candidate = NodeId(format!("n{}", self.next_id));
            self.next_id += 1;
            if !self.nodes.contains_key(&candidate) {
                break candidate;
            }
        };
        self.insert_node(id.clone(), label.into(), kind);
        id
    }

    pub fn add_node_with_id(
        &mut self,
        id: impl Into<NodeId>,
        label: impl Into<String>,
        kind: NodeKind,
    ) -> Result<NodeId, GraphError> {
        let id = id.into();
        if self.nodes.contains_key(&id) {
            return Err(GraphError::DuplicateNode(id));
        }
        self.insert_node(id.clone(), label.into(), kind);
        Ok(id)
    }

    fn insert_node(&mut self, id: NodeId, label: String, kind: NodeKind) {
        self.nodes.insert(id.clone(), Node { id, label, kind });
    }

    pub fn add_edge(&mut self, source: &NodeId, target: &NodeId, label: impl Into<String>) -> Result<(), GraphError> {
        for id in [source, target] {
            if !self.nodes.contains_key(id) {
                return Err(GraphError::UnknownNode(id.clone()));
            }
        }
        let label = label.into();
        let key = (source.clone(), target.clone(), self.label_key(&label));
        if self.edge_keys.contains(&key) {
            return Err(GraphError::DuplicateEdge {
                from: source.clone(),
                to: target.clone(),
                label,
            });
        }
        self.edge_keys.insert(key);
        self.edges.push(Edge {
            source: source.clone(),
            target: target.clone(),
            label,
        });
        Ok(())
    }

    pub fn node(&self, id: &NodeId) -> Option<&Node> {
        self.nodes.get(id)
    }

    pub fn contains_node(&self, id: &NodeId) -> bool {
        self.nodes.contains_key(id)
    }

    pub fn node_index(&self, id: &NodeId) -> Option<usize> {
        self.nodes.get_index_of(id)
    }

    /// Nodes in insertion order.
    pub fn nodes(&self) -> impl ExactSizeIterator<Item = &Node> + '_ {
        self.nodes.values()
    }

    /// Edges in insertion order.
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn contains_edge(&self, source: &NodeId, target: &NodeId, label: &str) -> bool {
        self.edge_keys
            .contains(&(source.clone(), target.clone(), self.label_key(label)))
    }

    pub fn out_edges<'a>(&'a self, id: &'a NodeId) -> impl Iterator<Item = &'a Edge> + 'a {
        self.edges.iter().filter(move |e| &e.source == id)
    }

    pub fn in_edges<'a>(&'a self, id: &'a NodeId) -> impl Iterator<Item = &'a Edge> + 'a {
        self.edges.iter().filter(move |e| &e.target == id)
    }

    /// Per-node (incoming, outgoing) edge index lists, aligned with node order.
    pub fn adjacency(&self) -> Vec<(Vec<usize>, Vec<usize>)> {
        let mut adj = vec![(Vec::new(), Vec::new()); self.nodes.len()];
        for (i, e) in self.edges.iter().enumerate() {
            let s = self.nodes.get_index_of(&e.source).expect("edge endpoints exist");
            let t = self.nodes.get_index_of(&e.target).expect("edge endpoints exist");
            adj[s].1.push(i);
            adj[t].0.push(i);
        }
        adj
    }

    /// Structural invariants that construction cannot rule out on its own.
    pub fn invariant_violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        for n in self.nodes.values() {
            if n.label.trim().is_empty() && !matches!(n.kind, NodeKind::ClevrOp(_)) {
                out.push(format!("node `{}` has an empty label", n.id));
            }
        }
        out
    }
}

/// Whether a node bijection exists that preserves kinds, labels and labeled
/// edges. Node ids are ignored.
pub fn isomorphic(a: &LabeledGraph, b: &LabeledGraph) -> bool {
    if a.node_count() != b.node_count() || a.edge_count() != b.edge_count() {
        return false;
    }
    let index = |g: &LabeledGraph| -> HashSet<(usize, usize, String)> {
        g.edges
            .iter()
            .map(|e| {
                let s = g.nodes.get_index_of(&e.source).expect("endpoint");
                let t = g.nodes.get_index_of(&e.target).expect("endpoint");
                (s, t, e.label.clone())
            })
            .collect()
    };
    let (ea, eb) = (index(a), index(b));
    let degree = |edges: &HashSet<(usize, usize, String)>, n: usize| {
        let mut d = vec![(0usize, 0usize); n];
        for (s, t, _) in edges {
            d[*s].1 += 1;
            d[*t].0 += 1;
        }
        d
    };
    let (da, db) = (degree(&ea, a.node_count()), degree(&eb, b.node_count()));
    let mut incident: Vec<Vec<&(usize, usize, String)>> = vec![Vec::new(); a.node_count()];
    for e in &ea {
        incident[e.0].push(e);
        if e.1 != e.0 {
            incident[e.1].push(e);
        }
    }
    type LabeledEdge = (usize, usize, String);

    struct Search<'g> {
        na: Vec<&'g Node>,
        nb: Vec<&'g Node>,
        da: Vec<(usize, usize)>,
        db: Vec<(usize, usize)>,
        incident: Vec<Vec<&'g LabeledEdge>>,
        eb: &'g HashSet<LabeledEdge>,
    }

    impl Search<'_> {
        fn extend(&self, i: usize, map: &mut [usize], used: &mut [bool]) -> bool {
            if i == self.na.len() {
                return true;
            }
            let (na, nb) = (&self.na, &self.nb);
            for j in 0..nb.len() {
                if used[j] || nb[j].kind != na[i].kind || nb[j].label != na[i].label || self.da[i] != self.db[j] {
                    continue;
                }
                map[i] = j;
                let fits = self.incident[i].iter().all(|(s, t, l)| {
                    let (ms, mt) = (map[*s], map[*t]);
                    ms == usize::MAX || mt == usize::MAX || self.eb.contains(&(ms, mt, l.clone()))
                });
                if fits {
                    used[j] = true;
                    if self.extend(i + 1, map, used) {
                        return true;
                    }
                    used[j] = false;
                }
                map[i] = usize::MAX;
            }
            false
        }
    }

    let search = Search {
        na: a.nodes().collect(),
        nb: b.nodes().collect(),
        da,
        db,
        incident,
        eb: &eb,
    };
    let mut map = vec![usize::MAX; search.na.len()];
    let mut used = vec![false; search.nb.len()];
    search.extend(0, &mut map, &mut used)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn add_node_to_empty_graph() {
        let mut g = LabeledGraph::new();
        g.add_node("A", NodeKind::Activity);
        assert_eq!(g.node_count(), 1);
    }

    #[test]
    fn identical_labels_get_distinct_ids() {
        let mut g = LabeledGraph::new();
        let a = g.add_node("same", NodeKind::Activity);
        let b = g.add_node("same", NodeKind::Activity);
        assert_ne!(a, b);
        assert_eq!(g.node_count(), 2);
    }

    #[test]
    fn fresh_ids_skip_taken_ones() {
        let mut g = LabeledGraph::new();
        g.add_node_with_id("n0", "x", NodeKind::Concept).unwrap();
        let id = g.add_node("y", NodeKind::Concept);
        assert_eq!(id.as_str(), "n1");
    }

    #[test]
    fn clevr_node_display_label() {
        let mut g = LabeledGraph::new();
        let kind = NodeKind::clevr("filter_color", Some("red")).unwrap();
        let id = g.add_node("filter_color", kind);
        assert_eq!(g.node(&id).unwrap().display_label(), "filter_color[red]");
    }

    #[test]
    fn clevr_op_validation() {
        assert!(NodeKind::clevr("filter_color", None).is_err());
        assert!(NodeKind::clevr("count", Some("red")).is_err());
        assert!(NodeKind::clevr("filter_color", Some("pink")).is_err());
        assert!(NodeKind::clevr("teleport", None).is_err());
        assert!(NodeKind::clevr("relate", Some("behind")).is_ok());
    }

    #[test]
    fn edges() {
        let mut g = LabeledGraph::new();
        let a = g.add_node("A", NodeKind::Decision);
        let b = g.add_node("B", NodeKind::Activity);
        g.add_edge(&a, &b, "yes").unwrap();
        assert_eq!(g.edge_count(), 1);
        assert!(matches!(
            g.add_edge(&a, &b, " YES "),
            Err(GraphError::DuplicateEdge { .. })
        ));
        g.add_edge(&a, &b, "no").unwrap();
        assert!(matches!(
            g.add_edge(&a, &NodeId::new("zz"), ""),
            Err(GraphError::UnknownNode(_))
        ));
        assert_eq!(g.edge_count(), 2);
    }

    #[test]
    fn case_sensitive_policy() {
        let mut g = LabeledGraph::with_case_sensitive_labels(true);
        let a = g.add_node("A", NodeKind::Decision);
        let b = g.add_node("B", NodeKind::Activity);
        g.add_edge(&a, &b, "Yes").unwrap();
        g.add_edge(&a, &b, "yes").unwrap();
        assert!(g.add_edge(&a, &b, "yes ").is_err());
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize_label("  Yes "), "yes");
        assert_eq!(normalize_label("NO"), "no");
        assert_eq!(normalize_label("has  stock"), "has stock");
        assert_eq!(normalize_label_with(" Has\tStock ", true), "Has Stock");
    }

    #[test]
    fn json_round_trip_validates() {
        let mut g = LabeledGraph::new();
        let a = g.add_node("A", NodeKind::Activity);
        let b = g.add_node("B", NodeKind::clevr("count", None).unwrap());
        g.add_edge(&a, &b, "0").unwrap();
        let text = serde_json::to_string(&g).unwrap();
        let back: LabeledGraph = serde_json::from_str(&text).unwrap();
        assert_eq!(back, g);

        let bad = r#"{"nodes":[{"id":"a","label":"A","kind":"Activity"}],
                      "edges":[{"source":"a","target":"b","label":""}]}"#;
        assert!(serde_json::from_str::<LabeledGraph>(bad).is_err());
        let bad_op = r#"{"nodes":[{"id":"a","label":"","kind":{"ClevrOp":{"op":"count","param":"red"}}}],"edges":[]}"#;
        assert!(serde_json::from_str::<LabeledGraph>(bad_op).is_err());
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent(s in "\\PC{0,24}") {
            let once = normalize_label(&s);
            prop_assert_eq!(normalize_label(&once), once);
        }

        #[test]
        fn referential_integrity(ops in proptest::collection::vec((0usize..8, 0usize..8, 0u8..3), 0..40)) {
            let mut g = LabeledGraph::new();
            let ids: Vec<_> = (0..5).map(|i| g.add_node(format!("v{i}"), NodeKind::Activity)).collect();
            for (s, t, l) in ops {
                let src = ids.get(s).cloned().unwrap_or_else(|| NodeId::new(format!("ghost{s}")));
                let tgt = ids.get(t).cloned().unwrap_or_else(|| NodeId::new(format!("ghost{t}")));
                let _ = g.add_edge(&src, &tgt, ["", "yes", "no"][l as usize]);
            }
            for e in g.edges() {
                prop_assert!(g.contains_node(&e.source) && g.contains_node(&e.target));
            }
        }
    }
}
