//! Constrained maximum-likelihood selection over a partial model.
//!
//! Maximizing the binary cross-entropy `Σ x·ln P̂ + (1−x)·ln(1−P̂)` is the
//! same as maximizing `Σ x·logit(P̂)`, which is what the solver optimizes.
//! Probabilities are clamped to `[ε, 1−ε]` with `ε = 1/(2n)` for `n`
//! candidates so that unanimous elements stay droppable.

mod solver;

use std::cmp::Ordering;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::abstraction::PartialModel;
use crate::constraints::{build_problem, check, objective, ConsistencyReport, ConstraintProblem};
use crate::domain::DomainProfile;
use crate::graph::LabeledGraph;

pub use solver::solve;

/// Largest problem accepted by [`brute_force`].
pub const BRUTE_FORCE_LIMIT: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    /// Best feasible assignment found before the timeout.
    TimedOutBest,
    /// Timeout before any feasible assignment was found.
    TimedOut,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub assignment: Vec<bool>,
    /// Logit-sum objective; `-inf` when there is no assignment.
    #[serde(with = "objective_repr")]
    pub objective: f64,
    pub status: SolveStatus,
}

impl Solution {
    fn none(n: usize, status: SolveStatus) -> Self {
        Solution {
            assignment: vec![false; n],
            objective: f64::NEG_INFINITY,
            status,
        }
    }

    pub fn has_assignment(&self) -> bool {
        matches!(self.status, SolveStatus::Optimal | SolveStatus::TimedOutBest)
    }
}

mod objective_repr {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_some(v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NEG_INFINITY))
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConcretizeError {
    #[error("no combination of candidate elements yields a consistent graph")]
    InfeasibleModel,
    #[error("solver timed out after {0:?} without finding a consistent graph")]
    TimedOut(Duration),
    #[error("problem has {0} variables; brute force is limited to {BRUTE_FORCE_LIMIT}")]
    TooLarge(usize),
    #[error("solver returned a graph the checker rejects: {0}")]
    CheckerRejected(String),
}

pub fn clamp_epsilon(n_candidates: usize) -> f64 {
    1.0 / (2.0 * n_candidates as f64)
}

/// `ln P̂ − ln(1 − P̂)` with `P̂` clamped to `[ε, 1−ε]`.
pub fn logit_weight(p: f64, n_candidates: usize) -> f64 {
    let eps = clamp_epsilon(n_candidates);
    let p = p.clamp(eps, 1.0 - eps);
    p.ln() - (1.0 - p).ln()
}

/// Objective weight per variable: nodes in partial-model order, then edges.
pub fn weights(partial: &PartialModel) -> Vec<f64> {
    let n = partial.n_candidates();
    let p = |count: usize| count as f64 / n as f64;
    partial
        .nodes()
        .map(|(_, e)| logit_weight(p(e.count), n))
        .chain(partial.edges().map(|(_, e)| logit_weight(p(e.count), n)))
        .collect()
}

/// The clamped binary cross-entropy of an assignment.
pub fn bce_objective(problem: &ConstraintProblem, assignment: &[bool]) -> f64 {
    let eps = clamp_epsilon(problem.n_candidates);
    problem
        .probabilities
        .iter()
        .zip(assignment)
        .map(|(&p, &x)| {
            let p = p.clamp(eps, 1.0 - eps);
            if x {
                p.ln()
            } else {
                (1.0 - p).ln()
            }
        })
        .sum()
}

/// Exhaustive oracle: enumerates node subsets and, for each, subsets of the
/// edges between selected nodes, keeping those whose induced graph passes
/// [`check`]. Other assignments cannot induce a graph at all.
pub fn brute_force(problem: &ConstraintProblem) -> Result<Solution, ConcretizeError> {
    let n = problem.len();
    if n > BRUTE_FORCE_LIMIT {
        return Err(ConcretizeError::TooLarge(n));
    }
    let nodes = problem.node_count();
    let ends = problem.endpoints();
    let mut best: Option<(f64, Vec<bool>)> = None;
    for node_mask in 0u32..(1 << nodes) {
        let inside: Vec<usize> = ends
            .iter()
            .enumerate()
            .filter(|(_, (s, t))| node_mask >> s & 1 == 1 && node_mask >> t & 1 == 1)
            .map(|(k, _)| k)
            .collect();
        for edge_mask in 0u32..(1 << inside.len()) {
            let mut x = vec![false; n];
            for (i, slot) in x.iter_mut().enumerate().take(nodes) {
                *slot = node_mask >> i & 1 == 1;
            }
            for (bit, &k) in inside.iter().enumerate() {
                x[nodes + k] = edge_mask >> bit & 1 == 1;
            }
            let graph = problem.induced_graph(&x).expect("edges lie inside the node subset");
            if !check(&graph, &problem.profile).consistent {
                continue;
            }
            let obj = objective(&problem.weights, &x);
            let improves = match &best {
                None => true,
                Some((bo, b)) => solver::compare(&problem.weights, (obj, &x), (*bo, b)) == Ordering::Greater,
            };
            if improves {
                best = Some((obj, x));
            }
        }
    }
    Ok(match best {
        Some((objective, assignment)) => Solution {
            assignment,
            objective,
            status: SolveStatus::Optimal,
        },
        None => Solution::none(n, SolveStatus::Infeasible),
    })
}

#[derive(Clone, Debug)]
pub struct Concretization {
    pub graph: LabeledGraph,
    pub solution: Solution,
    pub report: ConsistencyReport,
}

/// Builds the selection problem, solves it and materializes the selected
/// elements with their representative labels.
pub fn concretize(partial: &PartialModel, profile: &DomainProfile) -> Result<Concretization, ConcretizeError> {
    let problem = build_problem(partial, profile);
    concretize_problem(&problem, profile.solve_timeout)
}

pub fn concretize_problem(problem: &ConstraintProblem, timeout: Duration) -> Result<Concretization, ConcretizeError> {
    let solution = solve(problem, timeout);
    match solution.status {
        SolveStatus::Infeasible => return Err(ConcretizeError::InfeasibleModel),
        SolveStatus::TimedOut => return Err(ConcretizeError::TimedOut(timeout)),
        SolveStatus::Optimal | SolveStatus::TimedOutBest => {}
    }
    let graph = problem
        .induced_graph(&solution.assignment)
        .expect("solutions satisfy the linking constraints");
    let report = check(&graph, &problem.profile);
    if !report.consistent {
        let names: Vec<&str> = report.violations.iter().map(|v| v.constraint.as_str()).collect();
        return Err(ConcretizeError::CheckerRejected(names.join(", ")));
    }
    Ok(Concretization {
        graph,
        solution,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abstraction::abstract_candidates;
    use crate::domain::Domain;
    use crate::notation::{parse, Notation};
    use crate::similarity::BuiltinEmbedder;

    #[test]
    fn weight_examples() {
        assert!((logit_weight(1.0, 10) - 19f64.ln()).abs() < 1e-12);
        assert!((logit_weight(1.0, 10) - 2.944).abs() < 1e-3);
        assert_eq!(logit_weight(0.5, 4), 0.0);
        assert!((logit_weight(1.0 / 3.0, 3) + 2f64.ln()).abs() < 1e-12);
    }

    fn flow(src: &str) -> LabeledGraph {
        parse(src, Notation::MermaidFlowchart).unwrap().graph
    }

    #[test]
    fn consistent_single_candidate_round_trips() {
        let g = flow("flowchart TD\nA[a] --> B{b}\nB -->|yes| C[c]\nB -->|no| D[d]");
        let profile = DomainProfile::new(Domain::Flowchart);
        let pm = abstract_candidates(std::slice::from_ref(&g), &profile, &BuiltinEmbedder).unwrap();
        let c = concretize(&pm, &profile).unwrap();
        assert_eq!(c.solution.status, SolveStatus::Optimal);
        assert_eq!(c.graph.node_count(), 4);
        assert_eq!(c.graph.edge_count(), 3);
    }

    #[test]
    fn two_cycles_are_infeasible() {
        let g = || {
            parse("a: unique(b)\nb: relate[left](a)", Notation::ClevrProgram)
                .unwrap()
                .graph
        };
        let profile = DomainProfile::new(Domain::Clevr);
        let pm = abstract_candidates(&[g(), g(), g()], &profile, &BuiltinEmbedder).unwrap();
        assert_eq!(concretize(&pm, &profile).unwrap_err(), ConcretizeError::InfeasibleModel);
        let p = build_problem(&pm, &profile);
        assert_eq!(brute_force(&p).unwrap().status, SolveStatus::Infeasible);
    }

    #[test]
    fn self_loop_island_is_infeasible() {
        let profile = DomainProfile::new(Domain::Taxonomy);
        let g = parse("a -> a", Notation::TaxonomyEdges).unwrap().graph;
        let pm = abstract_candidates(&[g], &profile, &BuiltinEmbedder).unwrap();
        let mut p = build_problem(&pm, &profile);
        p.fixed.insert(0, true);
        p.fixed.insert(1, true);
        assert_eq!(solve(&p, Duration::from_secs(1)).status, SolveStatus::Infeasible);
    }

    #[test]
    fn brute_force_limit() {
        let mut g = LabeledGraph::new();
        for i in 0..21 {
            g.add_node(format!("c{i}"), crate::graph::NodeKind::Concept);
        }
        let profile = DomainProfile::new(Domain::Taxonomy);
        let pm = abstract_candidates(&[g], &profile, &BuiltinEmbedder).unwrap();
        let p = build_problem(&pm, &profile);
        assert_eq!(brute_force(&p), Err(ConcretizeError::TooLarge(21)));
    }
}
