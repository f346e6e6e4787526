//! Quality and consistency metrics and the compared aggregation methods.

mod metrics;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::abstraction::{abstract_candidates, AbstractionError};
use crate::clevr::{answers_equal, execute, Answer, ExecError, Scene, Value};
use crate::concretize::{concretize, ConcretizeError};
use crate::constraints::check;
use crate::domain::{Domain, DomainProfile};
use crate::graph::{normalize_label, LabeledGraph, NodeId, NodeKind};
use crate::similarity::EmbeddingProvider;

pub use metrics::{
    exact_match, relation_triples, soft_cardinality, soft_prf, soft_prf_triples, token_overlap, token_overlap_with,
    Prf, RelationTriple, Tokenizer, WordPunctTokenizer,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Greedy,
    Mv,
    Esc,
    Escf,
    AbsCon,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("unknown method `{0}` (expected greedy, mv, esc, escf or abscon)")]
pub struct UnknownMethod(pub String);

impl Method {
    pub const ALL: [Method; 5] = [Method::Greedy, Method::Mv, Method::Esc, Method::Escf, Method::AbsCon];

    pub fn name(self) -> &'static str {
        match self {
            Method::Greedy => "greedy",
            Method::Mv => "mv",
            Method::Esc => "esc",
            Method::Escf => "escf",
            Method::AbsCon => "abscon",
        }
    }

    /// Whether the method votes on execution results instead of producing a
    /// graph.
    pub fn votes_on_answers(self) -> bool {
        matches!(self, Method::Esc | Method::Escf)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = UnknownMethod;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.trim().to_ascii_lowercase().replace(['+', '-', '_'], "");
        Method::ALL
            .into_iter()
            .find(|m| m.name() == key)
            .ok_or_else(|| UnknownMethod(s.to_string()))
    }
}

#[derive(Debug, Error)]
pub enum MethodError {
    #[error("method needs at least one candidate")]
    NoCandidates,
    #[error("{0} needs a scene to execute candidates on")]
    MissingScene(Method),
    #[error(transparent)]
    Abstraction(#[from] AbstractionError),
    #[error(transparent)]
    Concretize(#[from] ConcretizeError),
}

#[derive(Clone, Debug)]
pub enum MethodOutput {
    Graph(LabeledGraph),
    Answer(Answer),
}

pub struct MethodContext<'a> {
    pub profile: &'a DomainProfile,
    pub provider: &'a dyn EmbeddingProvider,
    pub scene: Option<&'a Scene>,
    /// The designated low-temperature candidate; the first candidate when
    /// absent.
    pub greedy: Option<&'a LabeledGraph>,
}

/// Relations occurring in more than half of the candidates, plus isolated
/// nodes whose label occurs in more than half of them.
pub fn majority_vote(candidates: &[LabeledGraph]) -> LabeledGraph {
    let n = candidates.len();
    let majority = |c: usize| 2 * c > n;
    let mut triple_votes: HashMap<RelationTriple, usize> = HashMap::new();
    let mut triple_order = Vec::new();
    let mut label_votes: HashMap<String, usize> = HashMap::new();
    let mut label_order = Vec::new();
    // per label: first raw label and kind tallies in first-seen order
    let mut label_info: HashMap<String, (String, Vec<(NodeKind, usize)>)> = HashMap::new();
    for g in candidates {
        let mut seen_labels = std::collections::HashSet::new();
        for node in g.nodes() {
            let key = normalize_label(&node.display_label());
            let info = label_info
                .entry(key.clone())
                .or_insert_with(|| (node.label.clone(), Vec::new()));
            match info.1.iter_mut().find(|(k, _)| *k == node.kind) {
                Some((_, c)) => *c += 1,
                None => info.1.push((node.kind.clone(), 1)),
            }
            if seen_labels.insert(key.clone()) {
                let votes = label_votes.entry(key.clone()).or_insert(0);
                if *votes == 0 {
                    label_order.push(key);
                }
                *votes += 1;
            }
        }
        for t in relation_triples(g) {
            let votes = triple_votes.entry(t.clone()).or_insert(0);
            if *votes == 0 {
                triple_order.push(t);
            }
            *votes += 1;
        }
    }
    let mut out = LabeledGraph::new();
    let mut ids: HashMap<String, NodeId> = HashMap::new();
    let mut ensure = |out: &mut LabeledGraph, key: &str| -> NodeId {
        if let Some(id) = ids.get(key) {
            return id.clone();
        }
        let (label, kinds) = &label_info[key];
        let mut best = &kinds[0];
        for k in kinds {
            if k.1 > best.1 {
                best = k;
            }
        }
        let id = out.add_node(label.clone(), best.0.clone());
        ids.insert(key.to_string(), id.clone());
        id
    };
    for t in triple_order.iter().filter(|t| majority(triple_votes[*t])) {
        let s = ensure(&mut out, &t.source);
        let d = ensure(&mut out, &t.target);
        out.add_edge(&s, &d, t.label.clone()).expect("triples are distinct");
    }
    for key in label_order.iter().filter(|k| majority(label_votes[*k])) {
        ensure(&mut out, key);
    }
    out
}

/// Plurality over answers with all execution errors forming one class;
/// the earliest answer wins ties.
pub fn vote_answers(answers: &[Answer]) -> Answer {
    let mut classes: Vec<(&Answer, usize)> = Vec::new();
    for a in answers {
        match classes.iter_mut().find(|(b, _)| answers_equal(a, b)) {
            Some((_, c)) => *c += 1,
            None => classes.push((a, 1)),
        }
    }
    let mut best: Option<(&Answer, usize)> = None;
    for (a, c) in classes {
        if best.is_none_or(|(_, b)| c > b) {
            best = Some((a, c));
        }
    }
    best.map(|(a, _)| a.clone()).unwrap_or_else(|| {
        Err(ExecError {
            reason: "no_candidates".into(),
        })
    })
}

pub fn run_method(
    method: Method,
    candidates: &[LabeledGraph],
    ctx: &MethodContext<'_>,
) -> Result<MethodOutput, MethodError> {
    if candidates.is_empty() {
        return Err(MethodError::NoCandidates);
    }
    let answers = || -> Result<Vec<Answer>, MethodError> {
        let scene = ctx.scene.ok_or(MethodError::MissingScene(method))?;
        Ok(candidates.iter().map(|g| execute(g, scene)).collect())
    };
    Ok(match method {
        Method::Greedy => MethodOutput::Graph(ctx.greedy.unwrap_or(&candidates[0]).clone()),
        Method::Mv => MethodOutput::Graph(majority_vote(candidates)),
        Method::Esc => MethodOutput::Answer(vote_answers(&answers()?)),
        Method::Escf => {
            let ok: Vec<Answer> = answers()?.into_iter().filter(Result::is_ok).collect();
            if ok.is_empty() {
                MethodOutput::Answer(Err(ExecError {
                    reason: "all_candidates_failed".into(),
                }))
            } else {
                MethodOutput::Answer(vote_answers(&ok))
            }
        }
        Method::AbsCon => {
            let pm = abstract_candidates(candidates, ctx.profile, ctx.provider)?;
            MethodOutput::Graph(concretize(&pm, ctx.profile)?.graph)
        }
    })
}

/// One evaluation item: a candidate pool plus whatever ground truth exists.
#[derive(Clone, Debug)]
pub struct Sample {
    pub id: String,
    /// Sampled candidates; the voting and abstraction pool.
    pub candidates: Vec<LabeledGraph>,
    pub greedy: Option<LabeledGraph>,
    pub reference: Option<LabeledGraph>,
    pub scene: Option<Scene>,
    pub gold: Option<Value>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleResult {
    pub id: String,
    pub method: Method,
    /// `None` for methods that output answers rather than graphs.
    pub consistent: Option<bool>,
    pub infeasible: bool,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub executed: Option<bool>,
    pub correct: Option<bool>,
    pub answer: Option<String>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub samples: usize,
    pub cr: Option<f64>,
    pub sr: Option<f64>,
    pub acc: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub method: Method,
    pub aggregate: Aggregate,
    pub samples: Vec<SampleResult>,
}

fn mean(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.flatten().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn rate(values: impl Iterator<Item = Option<bool>>) -> Option<f64> {
    mean(values.map(|b| b.map(|b| if b { 1.0 } else { 0.0 })))
}

impl Aggregate {
    pub fn of(samples: &[SampleResult]) -> Self {
        Aggregate {
            samples: samples.len(),
            cr: rate(samples.iter().map(|s| s.consistent)),
            sr: rate(samples.iter().map(|s| s.executed)),
            acc: rate(samples.iter().map(|s| s.correct)),
            precision: mean(samples.iter().map(|s| s.precision)),
            recall: mean(samples.iter().map(|s| s.recall)),
            f1: mean(samples.iter().map(|s| s.f1)),
        }
    }
}

/// Relation similarity used for quality metrics in each domain: token
/// overlap for free-text flowchart labels, exact match otherwise.
pub fn metric_similarity(domain: Domain) -> fn(&RelationTriple, &RelationTriple) -> f64 {
    match domain {
        Domain::Flowchart => token_overlap,
        Domain::Taxonomy | Domain::Clevr => exact_match,
    }
}

fn executed_ok(answer: &Answer, profile: &DomainProfile) -> bool {
    match answer {
        Ok(_) => true,
        Err(e) => !profile.nonunique_is_error && e.reason == "non_unique",
    }
}

pub fn evaluate_sample(
    sample: &Sample,
    method: Method,
    profile: &DomainProfile,
    provider: &dyn EmbeddingProvider,
) -> SampleResult {
    let ctx = MethodContext {
        profile,
        provider,
        scene: sample.scene.as_ref(),
        greedy: sample.greedy.as_ref(),
    };
    let mut r = SampleResult {
        id: sample.id.clone(),
        method,
        consistent: None,
        infeasible: false,
        precision: None,
        recall: None,
        f1: None,
        executed: None,
        correct: None,
        answer: None,
        error: None,
    };
    let score_answer = |r: &mut SampleResult, answer: &Answer| {
        r.executed = Some(executed_ok(answer, profile));
        r.correct = sample.gold.as_ref().map(|g| answers_equal(answer, &Ok(g.clone())));
        r.answer = Some(match answer {
            Ok(v) => v.to_string(),
            Err(e) => format!("error: {}", e.reason),
        });
    };
    match run_method(method, &sample.candidates, &ctx) {
        Ok(MethodOutput::Graph(g)) => {
            r.consistent = Some(check(&g, profile).consistent);
            if let Some(reference) = &sample.reference {
                let prf = soft_prf(&g, reference, &metric_similarity(profile.domain));
                r.precision = Some(prf.precision);
                r.recall = Some(prf.recall);
                r.f1 = Some(prf.f1);
            }
            if let Some(scene) = &sample.scene {
                score_answer(&mut r, &execute(&g, scene));
            }
        }
        Ok(MethodOutput::Answer(a)) => score_answer(&mut r, &a),
        Err(e) => {
            r.infeasible = matches!(
                e,
                MethodError::Concretize(ConcretizeError::InfeasibleModel | ConcretizeError::TimedOut(_))
            );
            r.consistent = (!method.votes_on_answers()).then_some(false);
            if sample.reference.is_some() {
                r.precision = Some(0.0);
                r.recall = Some(0.0);
                r.f1 = Some(0.0);
            }
            if sample.scene.is_some() {
                r.executed = Some(false);
                r.correct = sample.gold.as_ref().map(|_| false);
            }
            r.error = Some(e.to_string());
        }
    }
    r
}

/// Evaluates every sample in parallel; results keep the sample order.
pub fn evaluate_dataset(
    samples: &[Sample],
    method: Method,
    profile: &DomainProfile,
    provider: &dyn EmbeddingProvider,
) -> MetricReport {
    let results: Vec<SampleResult> = samples
        .par_iter()
        .map(|s| evaluate_sample(s, method, profile, provider))
        .collect();
    MetricReport {
        method,
        aggregate: Aggregate::of(&results),
        samples: results,
    }
}
