//! Approximate graph-edit-distance matching of a candidate graph against a
//! base graph.
//!
//! Cost model: substituting node `a` by `b` costs `1 − sim(a, b)` and is
//! forbidden when the kinds differ or `sim < τ`; node insertion and deletion
//! cost 1; an edge is substituted for free only when both endpoints are
//! mapped onto a base edge with the same normalized label, otherwise it is
//! deleted or inserted at cost 1.

mod hungarian;

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap, HashSet};
use std::time::{Duration, Instant};

use serde::Serialize;
use thiserror::Error;

use crate::domain::DomainProfile;
use crate::graph::{normalize_label_with, LabeledGraph, Node, NodeId};
use crate::similarity::{similarity_matrix, EmbeddingProvider, ProviderFailure, SimilarityMode};

pub use hungarian::solve as solve_assignment;

/// Largest graphs (per side) accepted by [`exhaustive_match`].
pub const EXHAUSTIVE_LIMIT: usize = 8;
/// [`match_graphs`] searches exhaustively when both sides are this small.
pub const EXACT_FALLBACK_LIMIT: usize = 6;

const EPS: f64 = 1e-9;
const FORBIDDEN: f64 = 1e6;

#[derive(Clone, Copy)]
pub struct CostModel<'a> {
    pub tau: f64,
    pub mode: SimilarityMode,
    pub provider: &'a dyn EmbeddingProvider,
    pub case_sensitive_labels: bool,
}

impl<'a> CostModel<'a> {
    pub fn new(mode: SimilarityMode, provider: &'a dyn EmbeddingProvider) -> Self {
        CostModel {
            tau: 0.5,
            mode,
            provider,
            case_sensitive_labels: false,
        }
    }

    pub fn from_profile(profile: &DomainProfile, provider: &'a dyn EmbeddingProvider) -> Self {
        CostModel {
            tau: profile.tau,
            mode: profile.similarity,
            provider,
            case_sensitive_labels: profile.case_sensitive_labels,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MatchResult {
    /// Candidate node → base node; injective.
    pub node_map: BTreeMap<NodeId, NodeId>,
    pub total_cost: f64,
    /// Set only when the search was exhaustive.
    pub optimal: bool,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MatchError {
    #[error("graphs too large for exhaustive matching ({candidate} and {base} nodes, limit {EXHAUSTIVE_LIMIT})")]
    TooLarge { candidate: usize, base: usize },
    #[error(transparent)]
    Provider(#[from] ProviderFailure),
}

type LabeledEdge = (usize, usize, String);

/// Both graphs re-indexed in node-id order so that index order is the
/// tie-breaking order.
struct Instance<'g> {
    cand: Vec<&'g Node>,
    base: Vec<&'g Node>,
    sim: Vec<Vec<f64>>,
    allowed: Vec<Vec<bool>>,
    cand_edges: Vec<LabeledEdge>,
    base_edges: Vec<LabeledEdge>,
    base_edge_set: HashSet<LabeledEdge>,
}

fn sorted_nodes(g: &LabeledGraph) -> Vec<&Node> {
    let mut nodes: Vec<&Node> = g.nodes().collect();
    nodes.sort_by(|a, b| a.id.cmp(&b.id));
    nodes
}

fn indexed_edges(g: &LabeledGraph, nodes: &[&Node], case_sensitive: bool) -> Vec<LabeledEdge> {
    let index: HashMap<&NodeId, usize> = nodes.iter().enumerate().map(|(i, n)| (&n.id, i)).collect();
    g.edges()
        .iter()
        .map(|e| {
            (
                index[&e.source],
                index[&e.target],
                normalize_label_with(&e.label, case_sensitive),
            )
        })
        .collect()
}

impl<'g> Instance<'g> {
    fn new(candidate: &'g LabeledGraph, base: &'g LabeledGraph, cost: &CostModel<'_>) -> Result<Self, ProviderFailure> {
        let cand = sorted_nodes(candidate);
        let base_nodes = sorted_nodes(base);
        let sim = similarity_matrix(&cand, &base_nodes, cost.mode, cost.provider)?;
        let allowed = cand
            .iter()
            .enumerate()
            .map(|(i, a)| {
                base_nodes
                    .iter()
                    .enumerate()
                    .map(|(j, b)| a.kind == b.kind && sim[i][j] >= cost.tau)
                    .collect()
            })
            .collect();
        let cand_edges = indexed_edges(candidate, &cand, cost.case_sensitive_labels);
        let base_edges = indexed_edges(base, &base_nodes, cost.case_sensitive_labels);
        let base_edge_set = base_edges.iter().cloned().collect();
        Ok(Instance {
            cand,
            base: base_nodes,
            sim,
            allowed,
            cand_edges,
            base_edges,
            base_edge_set,
        })
    }

    fn matched_edges(&self, map: &[Option<usize>]) -> usize {
        self.cand_edges
            .iter()
            .filter(|(s, t, l)| match (map[*s], map[*t]) {
                (Some(bs), Some(bt)) => self.base_edge_set.contains(&(bs, bt, l.clone())),
                _ => false,
            })
            .count()
    }

    fn cost(&self, map: &[Option<usize>]) -> f64 {
        let mut total = 0.0;
        let mut k = 0;
        for (i, m) in map.iter().enumerate() {
            if let Some(j) = m {
                total += 1.0 - self.sim[i][*j];
                k += 1;
            }
        }
        let unmatched = (self.cand.len() - k) + (self.base.len() - k);
        let edges = self.cand_edges.len() + self.base_edges.len() - 2 * self.matched_edges(map);
        total + unmatched as f64 + edges as f64
    }

    fn result(&self, map: &[Option<usize>], total_cost: f64, optimal: bool) -> MatchResult {
        let node_map = map
            .iter()
            .enumerate()
            .filter_map(|(i, m)| m.map(|j| (self.cand[i].id.clone(), self.base[j].id.clone())))
            .collect();
        MatchResult {
            node_map,
            total_cost,
            optimal,
        }
    }
}

fn tie_key(map: &[Option<usize>]) -> Vec<(usize, usize)> {
    map.iter().enumerate().filter_map(|(i, m)| m.map(|j| (i, j))).collect()
}

/// Lower cost wins; within `EPS`, the lexicographically smaller pair sequence.
fn better(cost: f64, map: &[Option<usize>], best_cost: f64, best: &[Option<usize>]) -> bool {
    if cost < best_cost - EPS {
        return true;
    }
    if cost > best_cost + EPS {
        return false;
    }
    tie_key(map).cmp(&tie_key(best)) == Ordering::Less
}

struct Exhaustive<'a, 'g> {
    inst: &'a Instance<'g>,
    /// Candidate edges whose later endpoint is node `i`.
    closing: Vec<Vec<usize>>,
    /// Candidate edges not yet decidable after assigning nodes `0..=i`.
    open_after: Vec<usize>,
    map: Vec<Option<usize>>,
    used: Vec<bool>,
    best: Vec<Option<usize>>,
    best_cost: f64,
}

impl Exhaustive<'_, '_> {
    fn run(&mut self, i: usize, node_cost: f64, k: usize, matched: usize) {
        let inst = self.inst;
        let (nc, nb) = (inst.cand.len(), inst.base.len());
        let (ec, eb) = (inst.cand_edges.len(), inst.base_edges.len());
        let open = if i == 0 { ec } else { self.open_after[i - 1] };
        let remaining = nc - i;
        let base_unmatched = nb.saturating_sub(k + remaining);
        let max_matched = (matched + open).min(eb);
        let bound = node_cost + base_unmatched as f64 + (ec + eb - 2 * max_matched) as f64;
        if bound > self.best_cost + EPS {
            return;
        }
        if i == nc {
            let cost = inst.cost(&self.map);
            if better(cost, &self.map, self.best_cost, &self.best) {
                self.best_cost = cost;
                self.best = self.map.clone();
            }
            return;
        }
        for j in 0..nb {
            if self.used[j] || !inst.allowed[i][j] {
                continue;
            }
            self.map[i] = Some(j);
            self.used[j] = true;
            let gained = self.closing[i]
                .iter()
                .filter(|&&e| {
                    let (s, t, l) = &inst.cand_edges[e];
                    match (self.map[*s], self.map[*t]) {
                        (Some(bs), Some(bt)) => inst.base_edge_set.contains(&(bs, bt, l.clone())),
                        _ => false,
                    }
                })
                .count();
            self.run(i + 1, node_cost + 1.0 - inst.sim[i][j], k + 1, matched + gained);
            self.used[j] = false;
        }
        self.map[i] = None;
        self.run(i + 1, node_cost + 1.0, k, matched);
    }
}

fn exhaustive(inst: &Instance<'_>) -> (Vec<Option<usize>>, f64) {
    let nc = inst.cand.len();
    let mut closing = vec![Vec::new(); nc];
    for (e, (s, t, _)) in inst.cand_edges.iter().enumerate() {
        closing[(*s).max(*t)].push(e);
    }
    let mut open_after = vec![0; nc];
    let mut open = inst.cand_edges.len();
    for i in 0..nc {
        open -= closing[i].len();
        open_after[i] = open;
    }
    let all_unmapped = vec![None; nc];
    let start_cost = inst.cost(&all_unmapped);
    let mut search = Exhaustive {
        inst,
        closing,
        open_after,
        map: all_unmapped.clone(),
        used: vec![false; inst.base.len()],
        best: all_unmapped,
        best_cost: start_cost,
    };
    search.run(0, 0.0, 0, 0);
    (search.best, search.best_cost)
}

/// Provably minimal matching by enumerating every partial injection.
pub fn exhaustive_match(
    candidate: &LabeledGraph,
    base: &LabeledGraph,
    cost: &CostModel<'_>,
) -> Result<MatchResult, MatchError> {
    if candidate.node_count() > EXHAUSTIVE_LIMIT || base.node_count() > EXHAUSTIVE_LIMIT {
        return Err(MatchError::TooLarge {
            candidate: candidate.node_count(),
            base: base.node_count(),
        });
    }
    let inst = Instance::new(candidate, base, cost)?;
    let (map, c) = exhaustive(&inst);
    Ok(inst.result(&map, c, true))
}

fn neighbourhood(edges: &[LabeledEdge], n: usize) -> Vec<HashMap<(bool, &str), usize>> {
    let mut out = vec![HashMap::new(); n];
    for (s, t, l) in edges {
        *out[*s].entry((true, l.as_str())).or_insert(0) += 1;
        *out[*t].entry((false, l.as_str())).or_insert(0) += 1;
    }
    out
}

fn assignment_start(inst: &Instance<'_>) -> Vec<Option<usize>> {
    let (nc, nb) = (inst.cand.len(), inst.base.len());
    let nbc = neighbourhood(&inst.cand_edges, nc);
    let nbb = neighbourhood(&inst.base_edges, nb);
    let degree = |h: &HashMap<(bool, &str), usize>| h.values().sum::<usize>();
    let size = nc + nb;
    let mut m = vec![vec![FORBIDDEN; size]; size];
    for i in 0..nc {
        for j in 0..nb {
            if inst.allowed[i][j] {
                let common: usize = nbc[i]
                    .iter()
                    .map(|(k, &c)| c.min(nbb[j].get(k).copied().unwrap_or(0)))
                    .sum();
                let mismatch = degree(&nbc[i]) + degree(&nbb[j]) - 2 * common;
                m[i][j] = 1.0 - inst.sim[i][j] + mismatch as f64 / 2.0;
            }
        }
        m[i][nb + i] = 1.0 + degree(&nbc[i]) as f64 / 2.0;
    }
    for j in 0..nb {
        m[nc + j][j] = 1.0 + degree(&nbb[j]) as f64 / 2.0;
        for i in 0..nc {
            m[nc + j][nb + i] = 0.0;
        }
    }
    let assignment = hungarian::solve(&m);
    (0..nc)
        .map(|i| {
            let j = assignment[i];
            (j < nb && inst.allowed[i][j]).then_some(j)
        })
        .collect()
}

/// Greedy refinement: apply the first improving reassignment, swap or unmap
/// until none remains or the deadline passes. Returns whether it converged.
fn local_search(inst: &Instance<'_>, map: &mut Vec<Option<usize>>, cost: &mut f64, deadline: Instant) -> bool {
    let (nc, nb) = (inst.cand.len(), inst.base.len());
    'outer: loop {
        let mut owner: Vec<Option<usize>> = vec![None; nb];
        for (i, m) in map.iter().enumerate() {
            if let Some(j) = m {
                owner[*j] = Some(i);
            }
        }
        for i in 0..nc {
            if Instant::now() >= deadline {
                return false;
            }
            let options = (0..nb).map(Some).chain(std::iter::once(None));
            for target in options {
                if target == map[i] || target.is_some_and(|j| !inst.allowed[i][j]) {
                    continue;
                }
                let mut trial = map.clone();
                trial[i] = target;
                if let Some(other) = target.and_then(|j| owner[j]) {
                    let back = map[i];
                    if back.is_some_and(|j| !inst.allowed[other][j]) {
                        continue;
                    }
                    trial[other] = back;
                }
                let c = inst.cost(&trial);
                if c < *cost - EPS {
                    *map = trial;
                    *cost = c;
                    continue 'outer;
                }
            }
        }
        return true;
    }
}

/// Lowest-cost matching found within `timeout`. Small inputs are solved
/// exhaustively; larger ones by a bipartite assignment over node costs with
/// local edge-neighbourhood terms, refined by local search.
pub fn match_graphs(
    candidate: &LabeledGraph,
    base: &LabeledGraph,
    cost: &CostModel<'_>,
    timeout: Duration,
) -> Result<MatchResult, MatchError> {
    let deadline = Instant::now() + timeout;
    let inst = Instance::new(candidate, base, cost)?;
    if inst.cand.len() <= EXACT_FALLBACK_LIMIT && inst.base.len() <= EXACT_FALLBACK_LIMIT {
        let (map, c) = exhaustive(&inst);
        return Ok(inst.result(&map, c, true));
    }
    let mut map = assignment_start(&inst);
    let mut c = inst.cost(&map);
    let converged = local_search(&inst, &mut map, &mut c, deadline);
    if !converged {
        log::warn!("graph matching hit its {timeout:?} timeout; using best mapping found");
    }
    Ok(inst.result(&map, c, false))
}
