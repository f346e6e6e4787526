//! Well-formedness constraints: selection problems over partial models and a
//! solver-independent consistency checker for concrete graphs.

mod check;
mod global;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::abstraction::PartialModel;
use crate::clevr::{arg_position, ValueType};
use crate::concretize::weights;
use crate::domain::{Domain, DomainProfile};
use crate::graph::{LabeledGraph, NodeKind};

pub use check::{check, ConsistencyReport, Violation};
pub use global::{global_satisfied, GlobalView};

pub type VarId = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        })
    }
}

/// `Σ coefficient·x relation bound` over binary variables.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinearConstraint {
    pub name: String,
    pub terms: Vec<(i64, VarId)>,
    pub relation: Relation,
    pub bound: i64,
}

impl LinearConstraint {
    fn new(name: impl Into<String>, terms: Vec<(i64, VarId)>, relation: Relation, bound: i64) -> Self {
        debug_assert!(!terms.is_empty());
        LinearConstraint {
            name: name.into(),
            terms,
            relation,
            bound,
        }
    }

    pub fn holds(&self, assignment: &[bool]) -> bool {
        let lhs: i64 = self.terms.iter().map(|&(a, v)| if assignment[v] { a } else { 0 }).sum();
        match self.relation {
            Relation::Le => lhs <= self.bound,
            Relation::Eq => lhs == self.bound,
            Relation::Ge => lhs >= self.bound,
        }
    }
}

/// Graph-level constraints over the selected subgraph. A source is a
/// selected node without selected incoming edges; a sink likewise for
/// outgoing edges. Self-loops count as cycles.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GlobalConstraint {
    Acyclic,
    SingleSource,
    SingleSink,
    ReachableFromSource,
    SourceKindIs(NodeKind),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type", content = "index")]
pub enum Variable {
    Node(usize),
    Edge(usize),
}

/// Binary selection problem: one variable per node of `graph` (in node
/// order) followed by one per edge (in edge order).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstraintProblem {
    pub profile: DomainProfile,
    /// Representative-label view of the partial model.
    pub graph: LabeledGraph,
    pub variables: Vec<Variable>,
    pub fixed: BTreeMap<VarId, bool>,
    pub linear: Vec<LinearConstraint>,
    pub global: Vec<GlobalConstraint>,
    pub weights: Vec<f64>,
    /// Existence probability of each variable's element.
    pub probabilities: Vec<f64>,
    pub n_candidates: usize,
}

impl ConstraintProblem {
    pub fn len(&self) -> usize {
        self.variables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variables.is_empty()
    }

    pub fn node_count(&self) -> usize {
        self.graph.node_count()
    }

    pub fn edge_var(&self, edge: usize) -> VarId {
        self.graph.node_count() + edge
    }

    /// Node-index endpoints of every edge, aligned with edge order.
    pub fn endpoints(&self) -> Vec<(usize, usize)> {
        endpoints(&self.graph)
    }

    /// Whether `assignment` meets every fixed, linear and global constraint.
    pub fn satisfies(&self, assignment: &[bool]) -> bool {
        assignment.len() == self.len()
            && self.fixed.iter().all(|(&v, &b)| assignment[v] == b)
            && self.linear.iter().all(|c| c.holds(assignment))
            && global_satisfied(&GlobalView::new(self), assignment)
    }

    /// The selected subgraph, or `None` when a selected edge lacks a selected
    /// endpoint.
    pub fn induced_graph(&self, assignment: &[bool]) -> Option<LabeledGraph> {
        let mut g = LabeledGraph::with_case_sensitive_labels(self.graph.case_sensitive_labels());
        for (i, n) in self.graph.nodes().enumerate() {
            if assignment[i] {
                g.add_node_with_id(n.id.clone(), n.label.clone(), n.kind.clone())
                    .expect("ids unique");
            }
        }
        for (k, e) in self.graph.edges().iter().enumerate() {
            if assignment[self.edge_var(k)] {
                if !g.contains_node(&e.source) || !g.contains_node(&e.target) {
                    return None;
                }
                g.add_edge(&e.source, &e.target, e.label.clone()).expect("edges unique");
            }
        }
        Some(g)
    }

    /// Assignment selecting exactly the elements of `graph` by id (and by
    /// normalized edge label).
    pub fn assignment_of(&self, graph: &LabeledGraph) -> Vec<bool> {
        let mut a: Vec<bool> = self.graph.nodes().map(|n| graph.contains_node(&n.id)).collect();
        a.extend(
            self.graph
                .edges()
                .iter()
                .map(|e| graph.contains_edge(&e.source, &e.target, &e.label)),
        );
        a
    }

    pub fn objective(&self, assignment: &[bool]) -> f64 {
        objective(&self.weights, assignment)
    }
}

/// Σ weight over selected variables, summed in variable order.
pub fn objective(weights: &[f64], assignment: &[bool]) -> f64 {
    weights.iter().zip(assignment).filter(|(_, &x)| x).map(|(w, _)| w).sum()
}

pub(crate) fn endpoints(graph: &LabeledGraph) -> Vec<(usize, usize)> {
    graph
        .edges()
        .iter()
        .map(|e| {
            (
                graph.node_index(&e.source).expect("endpoint"),
                graph.node_index(&e.target).expect("endpoint"),
            )
        })
        .collect()
}

/// Whether `kind` belongs to the domain's metamodel.
pub fn kind_allowed(domain: Domain, kind: &NodeKind) -> bool {
    match domain {
        Domain::Flowchart => matches!(kind, NodeKind::Activity | NodeKind::Decision),
        Domain::Taxonomy => matches!(kind, NodeKind::Concept),
        Domain::Clevr => matches!(kind, NodeKind::ClevrOp(_)),
    }
}

/// Why a Clevr edge can never be selected: its label is not a valid
/// argument position of the target, or the value types disagree.
pub(crate) fn clevr_edge_defect(source: &NodeKind, target: &NodeKind, label: &str) -> Option<&'static str> {
    let (Some(s), Some(t)) = (source.as_clevr(), target.as_clevr()) else {
        return Some("node_kind");
    };
    let entry = t.entry();
    let Some(pos) = arg_position(label).filter(|&p| p < entry.arity) else {
        return Some("arg_position");
    };
    let expected: Option<ValueType> = entry.input_type(pos);
    if expected != Some(s.entry().output) {
        return Some("type_mismatch");
    }
    None
}

/// Builds the selection problem for a partial model under a domain profile.
pub fn build_problem(partial: &PartialModel, profile: &DomainProfile) -> ConstraintProblem {
    build_problem_for_view(
        partial.representative_view(),
        weights(partial),
        probabilities(partial),
        partial.n_candidates(),
        profile,
    )
}

fn probabilities(partial: &PartialModel) -> Vec<f64> {
    let n = partial.n_candidates() as f64;
    partial
        .nodes()
        .map(|(_, e)| e.count as f64 / n)
        .chain(partial.edges().map(|(_, e)| e.count as f64 / n))
        .collect()
}

fn build_problem_for_view(
    graph: LabeledGraph,
    weights: Vec<f64>,
    probabilities: Vec<f64>,
    n_candidates: usize,
    profile: &DomainProfile,
) -> ConstraintProblem {
    let n_nodes = graph.node_count();
    let ends = endpoints(&graph);
    let edge_var = |k: usize| n_nodes + k;
    let nodes: Vec<_> = graph.nodes().collect();
    let edges = graph.edges();

    let mut variables: Vec<Variable> = (0..n_nodes).map(Variable::Node).collect();
    variables.extend((0..edges.len()).map(Variable::Edge));
    let mut fixed = BTreeMap::new();
    let mut linear = Vec::new();
    let mut global = Vec::new();

    for (k, &(s, t)) in ends.iter().enumerate() {
        linear.push(LinearConstraint::new(
            format!("link_source[{k}]"),
            vec![(1, edge_var(k)), (-1, s)],
            Relation::Le,
            0,
        ));
        linear.push(LinearConstraint::new(
            format!("link_target[{k}]"),
            vec![(1, edge_var(k)), (-1, t)],
            Relation::Le,
            0,
        ));
    }
    if n_nodes > 0 {
        linear.push(LinearConstraint::new(
            "at_least_one_node",
            (0..n_nodes).map(|i| (1, i)).collect(),
            Relation::Ge,
            1,
        ));
    }

    let domain = profile.domain;
    for (i, n) in nodes.iter().enumerate() {
        if !kind_allowed(domain, &n.kind) {
            fixed.insert(i, false);
        }
    }
    let ends_ref = &ends;
    let in_edges = move |i: usize| (0..ends_ref.len()).filter(move |&k| ends_ref[k].1 == i);
    let out_edges = move |i: usize| (0..ends_ref.len()).filter(move |&k| ends_ref[k].0 == i);

    match domain {
        Domain::Flowchart => {
            global.push(GlobalConstraint::SingleSource);
            global.push(GlobalConstraint::ReachableFromSource);
            for (k, &(s, t)) in ends.iter().enumerate() {
                let decision_without_condition =
                    nodes[s].kind == NodeKind::Decision && edges[k].label.trim().is_empty();
                if s == t || decision_without_condition {
                    fixed.insert(edge_var(k), false);
                }
            }
            for (i, n) in nodes.iter().enumerate() {
                if n.kind == NodeKind::Decision {
                    let mut terms: Vec<(i64, VarId)> = out_edges(i).map(|k| (1, edge_var(k))).collect();
                    terms.push((-2, i));
                    linear.push(LinearConstraint::new(
                        format!("decision_min_out[{i}]"),
                        terms,
                        Relation::Ge,
                        0,
                    ));
                }
            }
        }
        Domain::Taxonomy => {
            global.push(GlobalConstraint::Acyclic);
            global.push(GlobalConstraint::SingleSource);
            if profile.taxonomy_require_connected {
                global.push(GlobalConstraint::ReachableFromSource);
            }
            for (k, &(s, t)) in ends.iter().enumerate() {
                if s == t {
                    fixed.insert(edge_var(k), false);
                }
            }
            for i in 0..n_nodes {
                let mut terms: Vec<(i64, VarId)> = in_edges(i).map(|k| (1, edge_var(k))).collect();
                if terms.is_empty() {
                    continue;
                }
                terms.push((-1, i));
                linear.push(LinearConstraint::new(
                    format!("single_parent[{i}]"),
                    terms,
                    Relation::Le,
                    0,
                ));
            }
        }
        Domain::Clevr => {
            global.push(GlobalConstraint::Acyclic);
            global.push(GlobalConstraint::SingleSource);
            global.push(GlobalConstraint::SourceKindIs(
                NodeKind::clevr("scene", None).expect("scene is in the catalog"),
            ));
            global.push(GlobalConstraint::SingleSink);
            global.push(GlobalConstraint::ReachableFromSource);
            for (k, &(s, t)) in ends.iter().enumerate() {
                if clevr_edge_defect(&nodes[s].kind, &nodes[t].kind, &edges[k].label).is_some() {
                    fixed.insert(edge_var(k), false);
                }
            }
            for (i, n) in nodes.iter().enumerate() {
                let Some(op) = n.kind.as_clevr() else { continue };
                let arity = op.entry().arity as i64;
                let mut terms: Vec<(i64, VarId)> = in_edges(i).map(|k| (1, edge_var(k))).collect();
                if arity > 0 {
                    terms.push((-arity, i));
                }
                if !terms.is_empty() {
                    linear.push(LinearConstraint::new(format!("arity[{i}]"), terms, Relation::Eq, 0));
                }
                if arity == 2 {
                    for p in 0..2 {
                        let mut terms: Vec<(i64, VarId)> = in_edges(i)
                            .filter(|&k| arg_position(&edges[k].label) == Some(p))
                            .map(|k| (1, edge_var(k)))
                            .collect();
                        terms.push((-1, i));
                        linear.push(LinearConstraint::new(
                            format!("arg_position[{i}][{p}]"),
                            terms,
                            Relation::Eq,
                            0,
                        ));
                    }
                }
            }
        }
    }

    ConstraintProblem {
        profile: profile.clone(),
        graph,
        variables,
        fixed,
        linear,
        global,
        weights,
        probabilities,
        n_candidates,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abstraction::abstract_candidates;
    use crate::notation::parse;
    use crate::similarity::BuiltinEmbedder;

    fn problem(src: &str, domain: Domain) -> ConstraintProblem {
        let profile = DomainProfile::new(domain);
        let g = parse(src, domain.notation()).unwrap().graph;
        let pm = abstract_candidates(&[g], &profile, &BuiltinEmbedder).unwrap();
        build_problem(&pm, &profile)
    }

    #[test]
    fn two_node_flowchart() {
        let p = problem("flowchart TD\nA[a] --> B[b]", Domain::Flowchart);
        assert_eq!(p.len(), 3);
        assert_eq!(p.linear.iter().filter(|c| c.name.starts_with("link")).count(), 2);
        assert_eq!(
            p.global,
            vec![GlobalConstraint::SingleSource, GlobalConstraint::ReachableFromSource]
        );
        assert!(p.satisfies(&[true, true, true]));
        assert!(!p.satisfies(&[true, false, true]));
        assert!(!p.satisfies(&[true, true, false]));
    }

    #[test]
    fn taxonomy_self_loop_fixed() {
        let p = problem("animal -> dog\ndog -> dog", Domain::Taxonomy);
        let self_loop = p.edge_var(1);
        assert_eq!(p.fixed.get(&self_loop), Some(&false));
    }

    #[test]
    fn clevr_type_incompatible_edge_fixed() {
        let p = problem("s: scene()\nc: count(s)\nf: filter_color[red](c)", Domain::Clevr);
        // edges: s->c (ok), c->f (Count into ObjectSet)
        assert_eq!(p.fixed.get(&p.edge_var(0)), None);
        assert_eq!(p.fixed.get(&p.edge_var(1)), Some(&false));
    }

    #[test]
    fn decision_out_without_condition_fixed() {
        let p = problem(
            "flowchart TD\nA[a] --> B{b}\nB -->|yes| C[c]\nB --> D[d]",
            Domain::Flowchart,
        );
        assert_eq!(p.fixed.get(&p.edge_var(2)), Some(&false));
        assert!(p.linear.iter().any(|c| c.name.starts_with("decision_min_out")));
    }
}
