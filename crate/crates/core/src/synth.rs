//! Seeded generators for graphs, candidate pools and partial models, shared by
//! tests and benchmarks.

use std::collections::{BTreeMap, HashSet};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::abstraction::PartialModel;
use crate::clevr::catalog;
use crate::domain::Domain;
use crate::evaluation::Sample;
use crate::graph::{LabeledGraph, NodeId, NodeKind};
use crate::notation::Notation;

pub type SynthRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SynthRng {
    ChaCha8Rng::seed_from_u64(seed)
}

const VERBS: &[&str] = &[
    "receive", "check", "validate", "ship", "notify", "close", "review", "approve", "reject", "archive", "pack",
    "invoice", "refund", "schedule", "assign", "log",
];
const NOUNS: &[&str] = &[
    "order", "payment", "stock", "customer", "invoice", "ticket", "request", "report", "parcel", "account", "claim",
    "record",
];
const CONCEPTS: &[&str] = &[
    "animal", "mammal", "bird", "dog", "cat", "sparrow", "eagle", "plant", "tree", "oak", "pine", "fungus", "fish",
    "salmon", "trout", "insect", "ant", "bee", "reptile", "lizard",
];
const CONDITIONS: &[&str] = &["yes", "no", "valid", "invalid", "high", "low", "retry"];
const DRIFT: &[&str] = &["now", "again", "manually", "later", "quickly"];
/// Fragments that exercise quoting and escaping in text notations.
const AWKWARD: &[&str] = &[
    "cost > {limit}?",
    "a|b",
    "#1",
    "\"quoted\"",
    "(draft)",
    "x;y",
    "50%",
    "in stock?",
    "naïve",
    "[tag]",
    "a --> b",
    " padded ",
];

fn unique_label(rng: &mut SynthRng, used: &mut HashSet<String>, make: impl Fn(&mut SynthRng) -> String) -> String {
    let base = make(rng);
    let mut label = base.clone();
    let mut k = 2;
    while !used.insert(label.clone()) {
        label = format!("{base} {k}");
        k += 1;
    }
    label
}

fn activity_label(rng: &mut SynthRng) -> String {
    format!("{} {}", VERBS.choose(rng).unwrap(), NOUNS.choose(rng).unwrap())
}

fn concept_label(rng: &mut SynthRng) -> String {
    CONCEPTS.choose(rng).unwrap().to_string()
}

fn random_clevr_kind(rng: &mut SynthRng) -> NodeKind {
    let entry = catalog().choose(rng).unwrap();
    let param = entry.param.map(|d| *d.values().choose(rng).unwrap());
    NodeKind::clevr(entry.name, param).expect("catalog entry")
}

fn clevr_kind(op: &str, param: Option<&str>) -> NodeKind {
    NodeKind::clevr(op, param).expect("catalog entry")
}

fn add_clevr(g: &mut LabeledGraph, kind: NodeKind) -> NodeId {
    let label = kind.as_clevr().expect("clevr kind").to_string();
    g.add_node(label, kind)
}

/// A graph that the notation can represent but that need not satisfy any
/// domain rule. Labels include characters that need quoting.
pub fn random_graph(notation: Notation, rng: &mut SynthRng, max_nodes: usize) -> LabeledGraph {
    let mut g = LabeledGraph::new();
    let n = rng.random_range(1..=max_nodes.max(1));
    match notation {
        Notation::MermaidFlowchart => {
            for _ in 0..n {
                let mut label = activity_label(rng);
                if rng.random_bool(0.4) {
                    label = format!("{label} {}", AWKWARD.choose(rng).unwrap());
                }
                if rng.random_bool(0.1) {
                    label = AWKWARD.choose(rng).unwrap().to_string();
                }
                let kind = if rng.random_bool(0.3) {
                    NodeKind::Decision
                } else {
                    NodeKind::Activity
                };
                g.add_node(label, kind);
            }
            let ids: Vec<NodeId> = g.nodes().map(|x| x.id.clone()).collect();
            for _ in 0..rng.random_range(0..=2 * n) {
                let (s, t) = (ids.choose(rng).unwrap(), ids.choose(rng).unwrap());
                let label = match rng.random_range(0..4) {
                    0 | 1 => String::new(),
                    2 => CONDITIONS.choose(rng).unwrap().to_string(),
                    _ => AWKWARD.choose(rng).unwrap().trim().to_string(),
                };
                let _ = g.add_edge(s, t, label);
            }
        }
        Notation::TaxonomyEdges => {
            let mut used = HashSet::new();
            for _ in 0..n {
                let mut label = unique_label(rng, &mut used, concept_label);
                if rng.random_bool(0.15) {
                    used.remove(&label);
                    // the arrow is the taxonomy delimiter and cannot occur in a name
                    let awkward: Vec<&str> = AWKWARD.iter().copied().filter(|a| !a.contains("->")).collect();
                    label = unique_label(rng, &mut used, |r| {
                        format!("{} {}", concept_label(r), awkward.choose(r).unwrap().trim())
                    });
                }
                g.add_node(label, NodeKind::Concept);
            }
            let ids: Vec<NodeId> = g.nodes().map(|x| x.id.clone()).collect();
            for _ in 0..rng.random_range(0..=2 * n) {
                let (s, t) = (ids.choose(rng).unwrap(), ids.choose(rng).unwrap());
                let _ = g.add_edge(s, t, "");
            }
        }
        Notation::ClevrProgram => {
            for _ in 0..n {
                add_clevr(&mut g, random_clevr_kind(rng));
            }
            let ids: Vec<NodeId> = g.nodes().map(|x| x.id.clone()).collect();
            for t in &ids {
                for pos in 0..rng.random_range(0..=2usize) {
                    if rng.random_bool(0.85) {
                        let s = ids.choose(rng).unwrap();
                        g.add_edge(s, t, pos.to_string()).expect("positions are distinct");
                    }
                }
            }
        }
    }
    g
}

/// A graph satisfying every rule of `domain`, with roughly `size` nodes.
pub fn consistent_graph(domain: Domain, rng: &mut SynthRng, size: usize) -> LabeledGraph {
    match domain {
        Domain::Flowchart => consistent_flowchart(rng, size.max(1)),
        Domain::Taxonomy => consistent_taxonomy(rng, size.max(1)),
        Domain::Clevr => consistent_program(rng, size),
    }
}

fn free_condition(g: &LabeledGraph, rng: &mut SynthRng, source: &NodeId) -> String {
    let taken: HashSet<String> = g.out_edges(source).map(|e| e.label.clone()).collect();
    let free: Vec<&&str> = CONDITIONS.iter().filter(|c| !taken.contains(**c)).collect();
    match free.choose(rng) {
        Some(c) => c.to_string(),
        None => format!("case {}", taken.len()),
    }
}

fn flow_edge(g: &mut LabeledGraph, rng: &mut SynthRng, s: &NodeId, t: &NodeId) -> bool {
    let label = if g.node(s).is_some_and(|n| n.kind == NodeKind::Decision) {
        free_condition(g, rng, s)
    } else {
        String::new()
    };
    g.add_edge(s, t, label).is_ok()
}

fn consistent_flowchart(rng: &mut SynthRng, size: usize) -> LabeledGraph {
    let mut g = LabeledGraph::new();
    let mut used = HashSet::new();
    let mut ids = vec![g.add_node(unique_label(rng, &mut used, activity_label), NodeKind::Activity)];
    for _ in 1..size {
        let kind = if rng.random_bool(0.25) {
            NodeKind::Decision
        } else {
            NodeKind::Activity
        };
        let mut label = unique_label(rng, &mut used, activity_label);
        if kind == NodeKind::Decision {
            label.push('?');
        }
        let parent = ids.choose(rng).unwrap().clone();
        let id = g.add_node(label, kind);
        flow_edge(&mut g, rng, &parent, &id);
        ids.push(id);
    }
    for _ in 0..rng.random_range(0..=size / 3) {
        let (s, t) = (ids.choose(rng).unwrap().clone(), ids.choose(rng).unwrap().clone());
        if s != t && t != ids[0] {
            flow_edge(&mut g, rng, &s, &t);
        }
    }
    for i in 0..ids.len() {
        let d = ids[i].clone();
        if g.node(&d).unwrap().kind != NodeKind::Decision {
            continue;
        }
        while g.out_edges(&d).count() < 2 {
            let others: Vec<NodeId> = ids[1..].iter().filter(|t| **t != d).cloned().collect();
            let target = match others.choose(rng) {
                Some(t) if rng.random_bool(0.7) => t.clone(),
                _ => {
                    let label = unique_label(rng, &mut used, activity_label);
                    let id = g.add_node(label, NodeKind::Activity);
                    ids.push(id.clone());
                    id
                }
            };
            flow_edge(&mut g, rng, &d, &target);
        }
    }
    g
}

fn consistent_taxonomy(rng: &mut SynthRng, size: usize) -> LabeledGraph {
    let mut g = LabeledGraph::new();
    let mut used = HashSet::new();
    let mut ids: Vec<NodeId> = Vec::new();
    for i in 0..size {
        let id = g.add_node(unique_label(rng, &mut used, concept_label), NodeKind::Concept);
        if i > 0 {
            let parent = ids.choose(rng).unwrap().clone();
            g.add_edge(&parent, &id, "").expect("fresh child");
        }
        ids.push(id);
    }
    g
}

/// Builds a filter chain on `input` and returns its last node.
fn filter_chain(g: &mut LabeledGraph, rng: &mut SynthRng, input: &NodeId, max: usize) -> NodeId {
    let filters = ["filter_color", "filter_shape", "filter_size", "filter_material"];
    let mut cur = input.clone();
    for _ in 0..rng.random_range(1..=max.max(1)) {
        let op = *filters.choose(rng).unwrap();
        let domain = catalog::lookup(op).unwrap().param.unwrap();
        let kind = clevr_kind(op, Some(domain.values().choose(rng).unwrap()));
        let id = add_clevr(g, kind);
        g.add_edge(&cur, &id, "0").unwrap();
        cur = id;
    }
    cur
}

fn consistent_program(rng: &mut SynthRng, size: usize) -> LabeledGraph {
    let mut g = LabeledGraph::new();
    let scene = add_clevr(&mut g, clevr_kind("scene", None));
    let depth = (size / 3).max(1);
    let unary = |g: &mut LabeledGraph, op: &str, input: &NodeId| {
        let id = add_clevr(g, clevr_kind(op, None));
        g.add_edge(input, &id, "0").unwrap();
        id
    };
    match rng.random_range(0..5) {
        0 => {
            let f = filter_chain(&mut g, rng, &scene, depth);
            unary(&mut g, "count", &f);
        }
        1 => {
            let f = filter_chain(&mut g, rng, &scene, depth);
            unary(&mut g, "exist", &f);
        }
        2 => {
            let f = filter_chain(&mut g, rng, &scene, depth);
            let u = unary(&mut g, "unique", &f);
            let q = ["query_color", "query_shape", "query_size", "query_material"]
                .choose(rng)
                .unwrap();
            unary(&mut g, q, &u);
        }
        3 => {
            let a = filter_chain(&mut g, rng, &scene, depth);
            let b = filter_chain(&mut g, rng, &scene, depth);
            let ca = unary(&mut g, "count", &a);
            let cb = unary(&mut g, "count", &b);
            let op = ["equal_integer", "less_than", "greater_than"].choose(rng).unwrap();
            let x = add_clevr(&mut g, clevr_kind(op, None));
            g.add_edge(&ca, &x, "0").unwrap();
            g.add_edge(&cb, &x, "1").unwrap();
        }
        _ => {
            let a = filter_chain(&mut g, rng, &scene, depth);
            let u = unary(&mut g, "unique", &a);
            let rel = *catalog::RELATIONS.choose(rng).unwrap();
            let r = add_clevr(&mut g, clevr_kind("relate", Some(rel)));
            g.add_edge(&u, &r, "0").unwrap();
            let b = filter_chain(&mut g, rng, &scene, depth);
            let op = ["intersect", "union"].choose(rng).unwrap();
            let x = add_clevr(&mut g, clevr_kind(op, None));
            g.add_edge(&r, &x, "0").unwrap();
            g.add_edge(&b, &x, "1").unwrap();
            unary(&mut g, "count", &x);
        }
    }
    g
}

/// Per-candidate probabilities of each kind of corruption.
#[derive(Clone, Copy, Debug)]
pub struct Noise {
    pub drop_node: f64,
    pub drop_edge: f64,
    pub hallucinate_node: f64,
    pub spurious_edge: f64,
    pub relabel: f64,
}

impl Default for Noise {
    fn default() -> Self {
        Noise {
            drop_node: 0.2,
            drop_edge: 0.25,
            hallucinate_node: 0.35,
            spurious_edge: 0.3,
            relabel: 0.2,
        }
    }
}

fn hallucinated_kind(domain: Domain, rng: &mut SynthRng) -> (String, NodeKind) {
    match domain {
        Domain::Flowchart => {
            let kind = if rng.random_bool(0.3) {
                NodeKind::Decision
            } else {
                NodeKind::Activity
            };
            (format!("{} {}", activity_label(rng), DRIFT.choose(rng).unwrap()), kind)
        }
        Domain::Taxonomy => (format!("{} {}", concept_label(rng), "hybrid"), NodeKind::Concept),
        Domain::Clevr => {
            let kind = random_clevr_kind(rng);
            (kind.as_clevr().unwrap().to_string(), kind)
        }
    }
}

fn edge_label(domain: Domain, g: &LabeledGraph, rng: &mut SynthRng, source: &NodeId) -> String {
    match domain {
        Domain::Flowchart if g.node(source).is_some_and(|n| n.kind == NodeKind::Decision) => {
            free_condition(g, rng, source)
        }
        Domain::Clevr => ["0", "0", "1"].choose(rng).unwrap().to_string(),
        _ => String::new(),
    }
}

/// A corrupted copy of `graph`: elements dropped, nodes and edges invented,
/// activity labels reworded.
pub fn perturb(graph: &LabeledGraph, domain: Domain, rng: &mut SynthRng, noise: Noise) -> LabeledGraph {
    let nodes: Vec<_> = graph.nodes().cloned().collect();
    let dropped: Option<NodeId> = (nodes.len() > 1 && rng.random_bool(noise.drop_node))
        .then(|| nodes[rng.random_range(1..nodes.len())].id.clone());
    let mut g = LabeledGraph::new();
    for n in &nodes {
        if Some(&n.id) == dropped.as_ref() {
            continue;
        }
        let mut label = n.label.clone();
        if domain == Domain::Flowchart && rng.random_bool(noise.relabel / nodes.len() as f64 * 2.0) {
            label = format!("{label} {}", DRIFT.choose(rng).unwrap());
        }
        g.add_node_with_id(n.id.clone(), label, n.kind.clone()).unwrap();
    }
    let skip =
        (graph.edge_count() > 0 && rng.random_bool(noise.drop_edge)).then(|| rng.random_range(0..graph.edge_count()));
    for (k, e) in graph.edges().iter().enumerate() {
        if Some(k) != skip && g.contains_node(&e.source) && g.contains_node(&e.target) {
            g.add_edge(&e.source, &e.target, e.label.clone()).unwrap();
        }
    }
    let ids: Vec<NodeId> = g.nodes().map(|n| n.id.clone()).collect();
    if rng.random_bool(noise.hallucinate_node) && !ids.is_empty() {
        let (label, kind) = hallucinated_kind(domain, rng);
        let anchor = ids.choose(rng).unwrap().clone();
        let h = g.add_node(label, kind);
        let l = edge_label(domain, &g, rng, &anchor);
        g.add_edge(&anchor, &h, l).unwrap();
        if rng.random_bool(0.5) {
            if let Some(t) = ids.choose(rng) {
                let l = edge_label(domain, &g, rng, &h);
                let _ = g.add_edge(&h, t, l);
            }
        }
    }
    if rng.random_bool(noise.spurious_edge) && ids.len() > 1 {
        let (s, t) = (ids.choose(rng).unwrap(), ids.choose(rng).unwrap());
        let l = edge_label(domain, &g, rng, s);
        let _ = g.add_edge(s, t, l);
    }
    g
}

/// A consistent reference graph and `n` corrupted candidates of it.
pub fn candidate_pool(
    domain: Domain,
    rng: &mut SynthRng,
    n: usize,
    size: usize,
    noise: Noise,
) -> (LabeledGraph, Vec<LabeledGraph>) {
    let reference = consistent_graph(domain, rng, size);
    let pool = (0..n).map(|_| perturb(&reference, domain, rng, noise)).collect();
    (reference, pool)
}

fn histogram(rng: &mut SynthRng, n: usize, choices: &[String]) -> BTreeMap<String, usize> {
    let mut labels = BTreeMap::new();
    let total = rng.random_range(1..=n);
    let first = choices.choose(rng).unwrap().clone();
    if total > 1 && choices.len() > 1 && rng.random_bool(0.3) {
        let split = rng.random_range(1..total);
        let second = choices.choose(rng).unwrap().clone();
        *labels.entry(first).or_insert(0) += split;
        *labels.entry(second).or_insert(0) += total - split;
    } else {
        labels.insert(first, total);
    }
    labels
}

/// A partial model with at most `max_vars` selection variables, including
/// elements the domain forbids, self-loops and conflicting structure.
pub fn random_partial_model(domain: Domain, rng: &mut SynthRng, max_vars: usize) -> PartialModel {
    let n = rng.random_range(1..=6);
    let mut pm = PartialModel::new(n, false);
    let max_vars = max_vars.max(1);
    let node_count = rng.random_range(1..=max_vars.min(7));
    let mut ids = Vec::new();
    for _ in 0..node_count {
        let (kind, label) = match domain {
            Domain::Flowchart => match rng.random_range(0..20) {
                0 => (NodeKind::Concept, "stray".to_string()),
                1..=6 => (NodeKind::Decision, format!("{}?", activity_label(rng))),
                _ => (NodeKind::Activity, activity_label(rng)),
            },
            Domain::Taxonomy => match rng.random_range(0..20) {
                0 => (NodeKind::Activity, "stray".to_string()),
                _ => (NodeKind::Concept, concept_label(rng)),
            },
            Domain::Clevr => {
                let kind = match rng.random_range(0..4) {
                    0 => clevr_kind("scene", None),
                    _ => random_clevr_kind(rng),
                };
                let label = kind.as_clevr().unwrap().to_string();
                (kind, label)
            }
        };
        ids.push(pm.insert_node(kind, histogram(rng, n, &[label])));
    }
    let choices: Vec<String> = match domain {
        Domain::Flowchart => ["", "yes", "no", "retry"].map(String::from).to_vec(),
        Domain::Taxonomy => vec![String::new()],
        Domain::Clevr => ["0", "1", "0", "x"].map(String::from).to_vec(),
    };
    let edge_budget = max_vars - node_count;
    let edge_count = rng.random_range(0..=edge_budget.min(3 * node_count));
    for _ in 0..edge_count * 2 {
        if pm.edge_count() >= edge_count {
            break;
        }
        let (s, t) = (ids.choose(rng).unwrap(), ids.choose(rng).unwrap());
        if s == t && !rng.random_bool(0.15) {
            continue;
        }
        let _ = pm.insert_edge(s, t, histogram(rng, n, &choices));
    }
    pm
}

/// A flowchart partial model over `n` candidates whose backbone is a
/// consistent graph with high support, padded with weakly supported noise
/// edges up to `edges` edges.
pub fn large_partial_model(rng: &mut SynthRng, nodes: usize, edges: usize, n: usize) -> PartialModel {
    let base = consistent_flowchart(rng, nodes);
    let mut pm = PartialModel::new(n, false);
    let mut map = std::collections::HashMap::new();
    let mut ids = Vec::new();
    for node in base.nodes().take(nodes) {
        let count = rng.random_range(n / 2 + 1..=n);
        let id = pm.insert_node(node.kind.clone(), BTreeMap::from([(node.label.clone(), count)]));
        map.insert(node.id.clone(), id.clone());
        ids.push(id);
    }
    for e in base.edges() {
        if pm.edge_count() >= edges {
            break;
        }
        let (Some(s), Some(t)) = (map.get(&e.source), map.get(&e.target)) else {
            continue;
        };
        let count = rng.random_range(n / 2 + 1..=n);
        let _ = pm.insert_edge(s, t, BTreeMap::from([(e.label.clone(), count)]));
    }
    let mut attempts = 0;
    while pm.edge_count() < edges && attempts < 100 * edges {
        attempts += 1;
        let (s, t) = (ids.choose(rng).unwrap(), ids.choose(rng).unwrap());
        let label = if pm.node(s).unwrap().kind == NodeKind::Decision {
            CONDITIONS.choose(rng).unwrap().to_string()
        } else {
            String::new()
        };
        let count = rng.random_range(1..=n / 2);
        let _ = pm.insert_edge(s, t, BTreeMap::from([(label, count)]));
    }
    pm
}

/// Flowchart evaluation samples: each has a consistent reference and
/// `n_candidates` corrupted candidates containing invented nodes, dropped
/// elements and rule violations.
pub fn flowchart_samples(rng: &mut SynthRng, samples: usize, n_candidates: usize) -> Vec<Sample> {
    (0..samples)
        .map(|i| {
            let size = rng.random_range(5..=9);
            let (reference, candidates) = candidate_pool(Domain::Flowchart, rng, n_candidates, size, Noise::default());
            Sample {
                id: format!("flow{i:02}"),
                candidates,
                greedy: None,
                reference: Some(reference),
                scene: None,
                gold: None,
            }
        })
        .collect()
}
