use std::collections::VecDeque;

use super::{ConstraintProblem, GlobalConstraint};
use crate::graph::NodeKind;

/// Index structure for evaluating global constraints on variable vectors.
pub struct GlobalView<'a> {
    pub constraints: &'a [GlobalConstraint],
    kinds: Vec<&'a NodeKind>,
    ends: Vec<(usize, usize)>,
    in_edges: Vec<Vec<usize>>,
    out_edges: Vec<Vec<usize>>,
}

impl<'a> GlobalView<'a> {
    pub fn new(problem: &'a ConstraintProblem) -> Self {
        let n = problem.node_count();
        let ends = problem.endpoints();
        let mut in_edges = vec![Vec::new(); n];
        let mut out_edges = vec![Vec::new(); n];
        for (k, &(s, t)) in ends.iter().enumerate() {
            out_edges[s].push(k);
            in_edges[t].push(k);
        }
        GlobalView {
            constraints: &problem.global,
            kinds: problem.graph.nodes().map(|n| &n.kind).collect(),
            ends,
            in_edges,
            out_edges,
        }
    }

    fn n(&self) -> usize {
        self.kinds.len()
    }

    fn edge(&self, k: usize) -> usize {
        self.n() + k
    }

    /// Whether the edges selected (value 1) under `value` contain a cycle.
    fn has_cycle(&self, selected: impl Fn(usize) -> bool) -> bool {
        let n = self.n();
        let mut indegree = vec![0usize; n];
        for (k, &(_, t)) in self.ends.iter().enumerate() {
            if selected(self.edge(k)) {
                indegree[t] += 1;
            }
        }
        let mut queue: VecDeque<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
        let mut seen = 0;
        while let Some(v) = queue.pop_front() {
            seen += 1;
            for &k in &self.out_edges[v] {
                if selected(self.edge(k)) {
                    let t = self.ends[k].1;
                    indegree[t] -= 1;
                    if indegree[t] == 0 {
                        queue.push_back(t);
                    }
                }
            }
        }
        seen < n
    }

    /// Nodes reachable along `usable` edges from `starts`.
    fn reach(&self, starts: &[usize], usable: impl Fn(usize) -> bool) -> Vec<bool> {
        let mut seen = vec![false; self.n()];
        let mut queue: VecDeque<usize> = starts.iter().copied().collect();
        for &s in starts {
            seen[s] = true;
        }
        while let Some(v) = queue.pop_front() {
            for &k in &self.out_edges[v] {
                let t = self.ends[k].1;
                if usable(self.edge(k)) && !seen[t] {
                    seen[t] = true;
                    queue.push_back(t);
                }
            }
        }
        seen
    }

    /// Checks a complete assignment.
    pub fn satisfied(&self, x: &[bool]) -> bool {
        let n = self.n();
        let selected_nodes: Vec<usize> = (0..n).filter(|&i| x[i]).collect();
        let no_selected = |edges: &[usize]| edges.iter().all(|&k| !x[self.edge(k)]);
        let sources: Vec<usize> = selected_nodes
            .iter()
            .copied()
            .filter(|&i| no_selected(&self.in_edges[i]))
            .collect();
        for c in self.constraints {
            let ok = match c {
                GlobalConstraint::Acyclic => !self.has_cycle(|v| x[v]),
                GlobalConstraint::SingleSource => sources.len() == 1,
                GlobalConstraint::SingleSink => {
                    selected_nodes
                        .iter()
                        .filter(|&&i| no_selected(&self.out_edges[i]))
                        .count()
                        == 1
                }
                GlobalConstraint::ReachableFromSource => {
                    let seen = self.reach(&sources, |v| x[v]);
                    selected_nodes.iter().all(|&i| seen[i])
                }
                GlobalConstraint::SourceKindIs(kind) => sources.iter().all(|&i| self.kinds[i] == kind),
            };
            if !ok {
                return false;
            }
        }
        true
    }

    /// Sound pruning test for a partial assignment (`None` = undecided):
    /// returns true only if no completion can satisfy the global constraints.
    pub fn refuted(&self, x: &[Option<bool>]) -> bool {
        let n = self.n();
        let is = |v: usize, b: bool| x[v] == Some(b);
        let possible = |v: usize| x[v] != Some(false);
        let definite_edge_in = |edges: &[usize]| edges.iter().any(|&k| is(self.edge(k), true));
        let no_possible_edge = |edges: &[usize]| edges.iter().all(|&k| !possible(self.edge(k)));
        // nodes that could still end up as sources / sinks
        let maybe_sources: Vec<usize> = (0..n)
            .filter(|&i| possible(i) && !definite_edge_in(&self.in_edges[i]))
            .collect();
        let definite_sources = || (0..n).filter(|&i| is(i, true) && no_possible_edge(&self.in_edges[i]));
        for c in self.constraints {
            let refuted = match c {
                GlobalConstraint::Acyclic => self.has_cycle(|v| is(v, true)),
                GlobalConstraint::SingleSource => maybe_sources.is_empty() || definite_sources().nth(1).is_some(),
                GlobalConstraint::SingleSink => {
                    let maybe = (0..n).any(|i| possible(i) && !definite_edge_in(&self.out_edges[i]));
                    let definite = (0..n)
                        .filter(|&i| is(i, true) && no_possible_edge(&self.out_edges[i]))
                        .nth(1)
                        .is_some();
                    !maybe || definite
                }
                GlobalConstraint::ReachableFromSource => {
                    let seen = self.reach(&maybe_sources, possible);
                    (0..n).any(|i| is(i, true) && !seen[i])
                }
                GlobalConstraint::SourceKindIs(kind) => definite_sources().any(|i| self.kinds[i] != kind),
            };
            if refuted {
                return true;
            }
        }
        false
    }
}

pub fn global_satisfied(view: &GlobalView<'_>, assignment: &[bool]) -> bool {
    view.satisfied(assignment)
}
