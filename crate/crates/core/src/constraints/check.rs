use std::collections::{BTreeMap, HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use super::{clevr_edge_defect, kind_allowed};
use crate::clevr::arg_position;
use crate::domain::{Domain, DomainProfile};
use crate::graph::{Edge, LabeledGraph, NodeId, NodeKind};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub constraint: String,
    /// Offending node ids, or `source->target` for edges.
    pub witnesses: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub consistent: bool,
    pub violations: Vec<Violation>,
}

impl ConsistencyReport {
    pub fn violated(&self, constraint: &str) -> bool {
        self.violations.iter().any(|v| v.constraint == constraint)
    }
}

fn edge_name(e: &Edge) -> String {
    if e.label.trim().is_empty() {
        format!("{}->{}", e.source, e.target)
    } else {
        format!("{}->{}[{}]", e.source, e.target, e.label.trim())
    }
}

struct Traversal<'g> {
    graph: &'g LabeledGraph,
    incoming: HashMap<&'g NodeId, Vec<&'g Edge>>,
    outgoing: HashMap<&'g NodeId, Vec<&'g Edge>>,
}

impl<'g> Traversal<'g> {
    fn new(graph: &'g LabeledGraph) -> Self {
        let mut incoming: HashMap<&NodeId, Vec<&Edge>> = HashMap::new();
        let mut outgoing: HashMap<&NodeId, Vec<&Edge>> = HashMap::new();
        for e in graph.edges() {
            incoming.entry(&e.target).or_default().push(e);
            outgoing.entry(&e.source).or_default().push(e);
        }
        Traversal {
            graph,
            incoming,
            outgoing,
        }
    }

    fn ins(&self, id: &NodeId) -> &[&'g Edge] {
        self.incoming.get(id).map(Vec::as_slice).unwrap_or(&[])
    }

    fn outs(&self, id: &NodeId) -> &[&'g Edge] {
        self.outgoing.get(id).map(Vec::as_slice).unwrap_or(&[])
    }

    fn sources(&self) -> Vec<&'g NodeId> {
        self.graph
            .nodes()
            .filter(|n| self.ins(&n.id).is_empty())
            .map(|n| &n.id)
            .collect()
    }

    fn sinks(&self) -> Vec<&'g NodeId> {
        self.graph
            .nodes()
            .filter(|n| self.outs(&n.id).is_empty())
            .map(|n| &n.id)
            .collect()
    }

    /// Nodes not reachable from any source, in node order.
    fn unreachable(&self) -> Vec<&'g NodeId> {
        let mut seen: HashMap<&NodeId, bool> = HashMap::new();
        let mut queue: VecDeque<&NodeId> = self.sources().into_iter().collect();
        for s in &queue {
            seen.insert(s, true);
        }
        while let Some(v) = queue.pop_front() {
            for e in self.outs(v) {
                if seen.insert(&e.target, true).is_none() {
                    queue.push_back(&e.target);
                }
            }
        }
        self.graph
            .nodes()
            .filter(|n| !seen.contains_key(&n.id))
            .map(|n| &n.id)
            .collect()
    }

    /// Nodes on a cycle or downstream of one (left over by Kahn's algorithm).
    fn cyclic(&self) -> Vec<&'g NodeId> {
        let mut indegree: HashMap<&NodeId, usize> =
            self.graph.nodes().map(|n| (&n.id, self.ins(&n.id).len())).collect();
        let mut queue: VecDeque<&NodeId> = self
            .graph
            .nodes()
            .filter(|n| indegree[&n.id] == 0)
            .map(|n| &n.id)
            .collect();
        while let Some(v) = queue.pop_front() {
            for e in self.outs(v) {
                let d = indegree.get_mut(&e.target).expect("endpoint");
                *d -= 1;
                if *d == 0 {
                    queue.push_back(&e.target);
                }
            }
        }
        self.graph
            .nodes()
            .filter(|n| indegree[&n.id] > 0)
            .map(|n| &n.id)
            .collect()
    }
}

struct Report {
    violations: Vec<Violation>,
}

impl Report {
    fn add<S: ToString>(&mut self, constraint: &str, witnesses: impl IntoIterator<Item = S>) {
        self.violations.push(Violation {
            constraint: constraint.to_string(),
            witnesses: witnesses.into_iter().map(|w| w.to_string()).collect(),
        });
    }

    fn add_if_any<S: ToString>(&mut self, constraint: &str, witnesses: impl IntoIterator<Item = S>) {
        let w: Vec<String> = witnesses.into_iter().map(|w| w.to_string()).collect();
        if !w.is_empty() {
            self.add(constraint, w);
        }
    }
}

/// Evaluates every well-formedness rule of the domain directly on `graph`.
/// Violations are listed in a fixed rule order with witnesses in graph order.
pub fn check(graph: &LabeledGraph, profile: &DomainProfile) -> ConsistencyReport {
    let t = Traversal::new(graph);
    let mut r = Report { violations: Vec::new() };
    let domain = profile.domain;
    r.add_if_any(
        "node_kind",
        graph.nodes().filter(|n| !kind_allowed(domain, &n.kind)).map(|n| &n.id),
    );
    let sources = t.sources();
    match domain {
        Domain::Flowchart => {
            if sources.len() != 1 {
                r.add("single_source", &sources);
            }
            r.add_if_any("reachable", t.unreachable());
            r.add_if_any(
                "decision_min_out",
                graph
                    .nodes()
                    .filter(|n| n.kind == NodeKind::Decision && t.outs(&n.id).len() < 2)
                    .map(|n| &n.id),
            );
            let unconditioned = graph.edges().iter().filter(|e| {
                graph.node(&e.source).is_some_and(|n| n.kind == NodeKind::Decision) && e.label.trim().is_empty()
            });
            r.add_if_any("decision_condition", unconditioned.map(edge_name));
            r.add_if_any(
                "no_self_loop",
                graph.edges().iter().filter(|e| e.source == e.target).map(edge_name),
            );
        }
        Domain::Taxonomy => {
            r.add_if_any("acyclic", t.cyclic());
            if sources.len() != 1 {
                r.add("single_root", &sources);
            }
            r.add_if_any(
                "single_parent",
                graph.nodes().filter(|n| t.ins(&n.id).len() > 1).map(|n| &n.id),
            );
            if profile.taxonomy_require_connected {
                r.add_if_any("connected", t.unreachable());
            }
        }
        Domain::Clevr => check_clevr(graph, &t, &sources, &mut r),
    }
    ConsistencyReport {
        consistent: r.violations.is_empty(),
        violations: r.violations,
    }
}

fn check_clevr(graph: &LabeledGraph, t: &Traversal<'_>, sources: &[&NodeId], r: &mut Report) {
    let op_of = |id: &NodeId| graph.node(id).and_then(|n| n.kind.as_clevr());
    r.add_if_any("acyclic", t.cyclic());
    if sources.len() != 1 {
        r.add("single_source", sources);
    }
    r.add_if_any(
        "source_is_scene",
        sources
            .iter()
            .filter(|id| op_of(id).is_none_or(|op| op.op() != "scene")),
    );
    let sinks = t.sinks();
    if sinks.len() != 1 {
        r.add("single_sink", &sinks);
    }
    r.add_if_any("reachable", t.unreachable());

    let mut arity = Vec::new();
    let mut positions = Vec::new();
    for n in graph.nodes() {
        let Some(op) = n.kind.as_clevr() else { continue };
        let entry = op.entry();
        let ins = t.ins(&n.id);
        if ins.len() != entry.arity {
            arity.push(&n.id);
        }
        let mut per_position: BTreeMap<usize, usize> = BTreeMap::new();
        let mut bad = false;
        for e in ins {
            match arg_position(&e.label).filter(|&p| p < entry.arity) {
                Some(p) => *per_position.entry(p).or_insert(0) += 1,
                None => bad = true,
            }
        }
        if entry.arity == 2 && (0..2).any(|p| per_position.get(&p) != Some(&1)) {
            bad = true;
        }
        if bad {
            positions.push(&n.id);
        }
    }
    r.add_if_any("arity", arity);
    r.add_if_any("arg_position", positions);
    let mismatched = graph.edges().iter().filter(|e| {
        let kind = |id: &NodeId| &graph.node(id).expect("endpoint").kind;
        clevr_edge_defect(kind(&e.source), kind(&e.target), &e.label) == Some("type_mismatch")
    });
    r.add_if_any("type_mismatch", mismatched.map(edge_name));
}
