//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the test fails if any criterion does.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use abscon_core::clevr::{execute, Scene, Value};
use abscon_core::concretize::{brute_force, solve, SolveStatus};
use abscon_core::evaluation::{
    evaluate_dataset, exact_match, majority_vote, soft_cardinality, soft_prf, Method, RelationTriple,
};
use abscon_core::graph::normalize_label;
use abscon_core::notation::{parse, serialize, Notation};
use abscon_core::synth::{self, Noise};
use abscon_core::{
    abstract_candidates, build_problem, check, concretize, isomorphic, BuiltinEmbedder, ConcretizeError, Domain,
    DomainProfile, LabeledGraph,
};

const DOMAINS: [Domain; 3] = [Domain::Flowchart, Domain::Taxonomy, Domain::Clevr];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(rel)
}

fn read(rel: &str, notation: Notation) -> LabeledGraph {
    parse(&fs::read_to_string(fixture(rel)).unwrap(), notation)
        .unwrap()
        .graph
}

fn soundness() -> Outcome {
    let start = Instant::now();
    let mut rng = synth::rng(1);
    let (mut solved, mut infeasible, mut failures) = (0, 0, Vec::new());
    for i in 0..200 {
        let domain = DOMAINS[i % 3];
        let profile = DomainProfile::new(domain);
        let size = 4 + i % 6;
        let (_, pool) = synth::candidate_pool(domain, &mut rng, 5, size, Noise::default());
        let pm = abstract_candidates(&pool, &profile, &BuiltinEmbedder).unwrap();
        match concretize(&pm, &profile) {
            Ok(c) if check(&c.graph, &profile).consistent => solved += 1,
            Ok(_) => failures.push(format!("pool {i}: output fails check")),
            Err(ConcretizeError::InfeasibleModel) => infeasible += 1,
            Err(e) => failures.push(format!("pool {i}: {e}")),
        }
    }
    let elapsed = start.elapsed();
    let pass = failures.is_empty() && elapsed < Duration::from_secs(60);
    outcome(
        pass,
        format!(
            "{solved} consistent, {infeasible} infeasible, {} unsound in {:.2?}{}",
            failures.len(),
            elapsed,
            failures.first().map(|f| format!(" (first: {f})")).unwrap_or_default()
        ),
    )
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = synth::rng(2);
    let (mut agree, mut total, mut first) = (0, 0, None);
    for domain in DOMAINS {
        let profile = DomainProfile::new(domain);
        for i in 0..100 {
            let pm = synth::random_partial_model(domain, &mut rng, 20);
            let problem = build_problem(&pm, &profile);
            let fast = solve(&problem, Duration::from_secs(30));
            let slow = brute_force(&problem).unwrap();
            total += 1;
            let same = match (fast.status, slow.status) {
                (SolveStatus::Optimal, SolveStatus::Optimal) => (fast.objective - slow.objective).abs() <= 1e-9,
                (SolveStatus::Infeasible, SolveStatus::Infeasible) => true,
                _ => false,
            };
            if same {
                agree += 1;
            } else if first.is_none() {
                first = Some(format!(
                    "{domain} #{i}: solve {:?} {} vs brute force {:?} {}",
                    fast.status, fast.objective, slow.status, slow.objective
                ));
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        agree == total && elapsed < Duration::from_secs(300),
        format!(
            "{agree}/{total} objectives agree within 1e-9 in {elapsed:.2?}{}",
            first.map(|f| format!(" (first: {f})")).unwrap_or_default()
        ),
    )
}

fn checker_agreement() -> Outcome {
    let mut rng = synth::rng(3);
    let (mut assignments, mut disagreements, mut first) = (0u64, 0u64, None);
    for domain in DOMAINS {
        let profile = DomainProfile::new(domain);
        for i in 0..100 {
            let pm = synth::random_partial_model(domain, &mut rng, 14);
            let problem = build_problem(&pm, &profile);
            let n = problem.len();
            for mask in 0u32..(1 << n) {
                let x: Vec<bool> = (0..n).map(|b| mask >> b & 1 == 1).collect();
                let by_problem = problem.satisfies(&x);
                let by_checker = problem
                    .induced_graph(&x)
                    .is_some_and(|g| check(&g, &profile).consistent);
                assignments += 1;
                if by_problem != by_checker {
                    disagreements += 1;
                    first.get_or_insert_with(|| {
                        format!("{domain} #{i} mask {mask:b}: problem {by_problem}, checker {by_checker}")
                    });
                }
            }
        }
    }
    outcome(
        disagreements == 0,
        format!(
            "{disagreements} disagreements over {assignments} assignments{}",
            first.map(|f| format!(" (first: {f})")).unwrap_or_default()
        ),
    )
}

fn order_regression() -> Outcome {
    let profile = DomainProfile::new(Domain::Flowchart);
    let candidates: Vec<LabeledGraph> = (1..=3)
        .map(|i| read(&format!("order/candidates/{i}.mmd"), Notation::MermaidFlowchart))
        .collect();
    let expected = read("order/expected.mmd", Notation::MermaidFlowchart);
    let pm = abstract_candidates(&candidates, &profile, &BuiltinEmbedder).unwrap();
    let c = match concretize(&pm, &profile) {
        Ok(c) => c,
        Err(e) => return outcome(false, format!("concretize failed: {e}")),
    };
    let no_e = !c.graph.nodes().any(|n| n.label == "Apply discount");
    let matches = isomorphic(&c.graph, &expected);
    let consistent = check(&c.graph, &profile).consistent;
    let mv = check(&majority_vote(&candidates), &profile);
    let mv_names: Vec<&str> = mv.violations.iter().map(|v| v.constraint.as_str()).collect();
    outcome(
        no_e && matches && consistent && !mv.consistent,
        format!(
            "discount branch excluded: {no_e}, expected graph: {matches}, consistent: {consistent}, MV violates: [{}]",
            mv_names.join(", ")
        ),
    )
}

/// Classical set-based P/R/F1 over normalized (source, label, target)
/// triples, written independently of the soft metric.
fn classical_prf(predicted: &LabeledGraph, reference: &LabeledGraph) -> (f64, f64, f64) {
    let triples = |g: &LabeledGraph| -> BTreeSet<(String, String, String)> {
        g.edges()
            .iter()
            .map(|e| {
                let name = |id| normalize_label(&g.node(id).unwrap().display_label());
                (name(&e.source), normalize_label(&e.label), name(&e.target))
            })
            .collect()
    };
    let (p, r) = (triples(predicted), triples(reference));
    if p.is_empty() && r.is_empty() {
        return (1.0, 1.0, 1.0);
    }
    if p.is_empty() || r.is_empty() {
        return (0.0, 0.0, 0.0);
    }
    let hits = p.intersection(&r).count() as f64;
    let (precision, recall) = (hits / p.len() as f64, hits / r.len() as f64);
    let f1 = if hits == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    (precision, recall, f1)
}

fn metric_fidelity() -> Outcome {
    let pair = [RelationTriple::new("a", "b", ""), RelationTriple::new("c", "d", "")];
    let half = |x: &RelationTriple, y: &RelationTriple| if x == y { 1.0 } else { 0.5 };
    let card = soft_cardinality(&pair, &half);
    let card_ok = (card - 4.0 / 3.0).abs() <= 1e-12;

    let mut rng = synth::rng(5);
    let (mut bitwise, mut close) = (0, 0);
    let mut first = None;
    for i in 0..1000 {
        let domain = DOMAINS[i % 3];
        let (reference, pool) = synth::candidate_pool(domain, &mut rng, 1, 3 + i % 7, Noise::default());
        let soft = soft_prf(&pool[0], &reference, &exact_match);
        let (p, r, f) = classical_prf(&pool[0], &reference);
        let got = [soft.precision, soft.recall, soft.f1];
        let want = [p, r, f];
        if got.iter().zip(&want).all(|(a, b)| a.to_bits() == b.to_bits()) {
            bitwise += 1;
        }
        if got.iter().zip(&want).all(|(a, b)| (a - b).abs() <= 1e-12) {
            close += 1;
        } else if first.is_none() {
            first = Some(format!("pair {i}: soft {got:?} vs classical {want:?}"));
        }
    }
    outcome(
        card_ok && close == 1000,
        format!(
            "card = {card:.15}, {close}/1000 within 1e-12 ({bitwise} bitwise identical){}",
            first.map(|f| format!(" (first: {f})")).unwrap_or_default()
        ),
    )
}

fn attr(s: &str) -> Value {
    Value::Attr(s.into())
}

/// Rewrites every `1` argument label to `0`, producing duplicate argument
/// positions.
fn duplicate_positions(g: &LabeledGraph) -> LabeledGraph {
    let mut out = LabeledGraph::new();
    for n in g.nodes() {
        out.add_node_with_id(n.id.clone(), n.label.clone(), n.kind.clone())
            .unwrap();
    }
    for e in g.edges() {
        let label = if e.label == "1" {
            "0".to_string()
        } else {
            e.label.clone()
        };
        out.add_edge(&e.source, &e.target, label).unwrap();
    }
    out
}

fn clevr_executor() -> Outcome {
    let scene = Scene::from_json(&fs::read_to_string(fixture("exec/scene.json")).unwrap()).unwrap();
    let program = |text: &str| parse(text, Notation::ClevrProgram).unwrap().graph;
    let answers: Vec<(&str, Value)> = vec![
        ("s: scene()\nf: filter_shape[cube](s)\nu: unique(f)\nq: query_color(u)", attr("red")),
        ("s: scene()\nf: filter_color[blue](s)\nc: count(f)", Value::Count(2)),
        ("s: scene()\nf: filter_shape[sphere](s)\ne: exist(f)", Value::Truth(true)),
        ("s: scene()\nf: filter_color[green](s)\ne: exist(f)", Value::Truth(false)),
        ("s: scene()\nf: filter_color[red](s)\nu: unique(f)\nq: query_shape(u)", attr("cube")),
        ("s: scene()\nf: filter_shape[sphere](s)\nu: unique(f)\nq: query_material(u)", attr("rubber")),
        ("s: scene()\nf: filter_shape[cube](s)\nu: unique(f)\nr: relate[left](u)\nc: count(r)", Value::Count(2)),
        (
            "s: scene()\nf: filter_shape[sphere](s)\nu: unique(f)\nr: relate[left](u)\nv: unique(r)\nq: query_shape(v)",
            attr("cylinder"),
        ),
        ("s: scene()\nf: filter_shape[sphere](s)\nu: unique(f)\nm: same_color(u)\nc: count(m)", Value::Count(1)),
        (
            "s: scene()\na: filter_color[blue](s)\nb: filter_size[large](s)\ni: intersect(a, b)\nc: count(i)",
            Value::Count(1),
        ),
        (
            "s: scene()\na: filter_color[red](s)\nb: filter_shape[sphere](s)\ni: union(a, b)\nc: count(i)",
            Value::Count(2),
        ),
        (
            "s: scene()\na: filter_color[blue](s)\nb: filter_material[rubber](s)\nx: count(a)\ny: count(b)\ne: equal_integer(x, y)",
            Value::Truth(true),
        ),
        (
            "s: scene()\na: filter_color[red](s)\nb: filter_color[blue](s)\nx: count(a)\ny: count(b)\ne: less_than(x, y)",
            Value::Truth(true),
        ),
        (
            "s: scene()\na: filter_size[small](s)\nb: filter_size[large](s)\nx: count(a)\ny: count(b)\ne: greater_than(x, y)",
            Value::Truth(false),
        ),
        (
            "s: scene()\na: filter_shape[sphere](s)\nb: filter_shape[cylinder](s)\nu: unique(a)\nv: unique(b)\nx: query_color(u)\ny: query_color(v)\ne: equal_color(x, y)",
            Value::Truth(true),
        ),
    ];
    let ordered = program(
        "s: scene()\na: filter_color[red](s)\nb: filter_color[blue](s)\nx: count(a)\ny: count(b)\ne: less_than(x, y)",
    );
    let structural: Vec<(LabeledGraph, &str)> = vec![
        (program("a: count(b)\nb: filter_color[red](a)"), "cycle"),
        (program("s: scene()\nc: count(s, s)"), "arity"),
        (
            program("s: scene()\nf: filter_shape[cube](s)\nq: query_color(f)"),
            "type",
        ),
        (program("s: scene()\na: count(s)\nb: exist(s)"), "multiple_outputs"),
        (duplicate_positions(&ordered), "arg_order"),
    ];
    let total = answers.len() + structural.len();
    let mut ok = 0;
    let mut first = None;
    for (i, (text, gold)) in answers.iter().enumerate() {
        let g = program(text);
        match catch_unwind(AssertUnwindSafe(|| execute(&g, &scene))) {
            Ok(Ok(v)) if v == *gold => ok += 1,
            other => {
                first.get_or_insert_with(|| format!("answer #{i}: {other:?}"));
            }
        }
    }
    for (i, (g, reason)) in structural.iter().enumerate() {
        match catch_unwind(AssertUnwindSafe(|| execute(g, &scene))) {
            Ok(Err(e)) if e.is_structural() && e.reason == *reason => ok += 1,
            other => {
                first.get_or_insert_with(|| format!("structural #{i} ({reason}): {other:?}"));
            }
        }
    }
    outcome(
        ok == total,
        format!(
            "{ok}/{total} triples match ({} answers, {} structural errors){}",
            answers.len(),
            structural.len(),
            first.map(|f| format!(" (first: {f})")).unwrap_or_default()
        ),
    )
}

fn baseline_ordering() -> Outcome {
    let mut rng = synth::rng(7);
    let samples = synth::flowchart_samples(&mut rng, 20, 5);
    let profile = DomainProfile::new(Domain::Flowchart);
    let abscon = evaluate_dataset(&samples, Method::AbsCon, &profile, &BuiltinEmbedder).aggregate;
    let mv = evaluate_dataset(&samples, Method::Mv, &profile, &BuiltinEmbedder).aggregate;
    let (cr, f1, mv_cr, mv_f1) = (
        abscon.cr.unwrap_or(0.0),
        abscon.f1.unwrap_or(0.0),
        mv.cr.unwrap_or(0.0),
        mv.f1.unwrap_or(0.0),
    );
    outcome(
        cr == 1.0 && f1 >= mv_f1,
        format!("AbsCon CR {cr:.3} F1 {f1:.4}; MV CR {mv_cr:.3} F1 {mv_f1:.4}"),
    )
}

fn round_trip() -> Outcome {
    let mut rng = synth::rng(8);
    let mut lines = Vec::new();
    let mut pass = true;
    for notation in [
        Notation::MermaidFlowchart,
        Notation::TaxonomyEdges,
        Notation::ClevrProgram,
    ] {
        let mut ok = 0;
        for _ in 0..1000 {
            let g = synth::random_graph(notation, &mut rng, 12);
            let same = serialize(&g, notation)
                .ok()
                .and_then(|text| parse(&text, notation).ok())
                .is_some_and(|p| isomorphic(&p.graph, &g));
            ok += same as usize;
        }
        pass &= ok == 1000;
        lines.push(format!("{notation:?} {ok}/1000"));
    }
    outcome(pass, lines.join(", "))
}

fn performance() -> Outcome {
    let profile = DomainProfile::new(Domain::Flowchart);
    let mut rng = synth::rng(9);
    let mut worst = Duration::ZERO;
    let mut statuses = Vec::new();
    let mut pass = true;
    for _ in 0..5 {
        let pm = synth::large_partial_model(&mut rng, 50, 80, 10);
        let problem = build_problem(&pm, &profile);
        let start = Instant::now();
        let solution = solve(&problem, Duration::from_secs(10));
        let elapsed = start.elapsed();
        worst = worst.max(elapsed);
        pass &= matches!(solution.status, SolveStatus::Optimal | SolveStatus::Infeasible)
            && elapsed < Duration::from_secs(10)
            && pm.node_count() == 50
            && pm.edge_count() == 80;
        statuses.push(format!("{:?}", solution.status));
    }
    outcome(
        pass,
        format!(
            "5 models of 50 nodes/80 edges: [{}], slowest {worst:.2?}",
            statuses.join(", ")
        ),
    )
}

const TRANSCRIPTS: [&str; 3] = [
    "```mermaid\nflowchart TD\nA[Receive order] --> B{In stock?}\nB -->|yes| C[Ship order]\nB -->|no| D[Notify customer]\nC --> G[Close order]\nD --> G\nA --> E[Apply discount]\nE --> G\n```",
    "```mermaid\nflowchart TD\nA[Receive order] --> B{In stock?}\nB -->|yes| C[Ship order]\nB -->|no| D[Notify customer]\nC --> G[Close order]\nE[Apply discount]\n```",
    "```mermaid\nflowchart TD\nA[Receive order] --> B{In stock?}\nB -->|yes| C[Ship order]\nB --> D[Notify customer]\nC --> G[Close order]\nD --> G\n```",
];

fn replay_determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    fs::create_dir_all(run.join("raw")).unwrap();
    for (i, t) in TRANSCRIPTS.iter().enumerate() {
        fs::write(run.join(format!("raw/{i:03}.txt")), t).unwrap();
    }
    let config = dir.path().join("config.json");
    let cfg = serde_json::json!({
        "domain": "flowchart",
        "description": "Handle an incoming order.",
        "sampling": {
            "endpoint": "http://127.0.0.1:9/v1/chat/completions",
            "n_candidates": 3,
            "include_greedy": false,
            "max_retries": 0
        }
    });
    fs::write(&config, cfg.to_string()).unwrap();
    let invoke = || {
        let out = Command::new(env!("CARGO_BIN_EXE_abscon"))
            .args([
                "pipeline",
                "--config",
                config.to_str().unwrap(),
                "--out",
                run.to_str().unwrap(),
            ])
            .output()
            .unwrap();
        let final_model = fs::read(run.join("final.mmd")).unwrap_or_default();
        let report = fs::read(run.join("report.json")).unwrap_or_default();
        (out.status.code(), final_model, report)
    };
    let (code_a, final_a, report_a) = invoke();
    let (code_b, final_b, report_b) = invoke();
    let pass =
        code_a == Some(0) && code_b == Some(0) && !final_a.is_empty() && final_a == final_b && report_a == report_b;
    outcome(
        pass,
        format!(
            "exit codes {code_a:?}/{code_b:?}, final identical: {}, report identical: {}",
            final_a == final_b,
            report_a == report_b
        ),
    )
}

#[test]
fn acceptance() {
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: [Criterion; 10] = [
        ("soundness", soundness),
        ("oracle equivalence", oracle_equivalence),
        ("checker/problem agreement", checker_agreement),
        ("three-candidate flowchart regression", order_regression),
        ("metric fidelity", metric_fidelity),
        ("executor fixtures", clevr_executor),
        ("baseline ordering", baseline_ordering),
        ("round trip", round_trip),
        ("performance envelope", performance),
        ("replay determinism", replay_determinism),
    ];
    let mut failed = Vec::new();
    for (i, (name, run)) in criteria.iter().enumerate() {
        let o = run();
        // written to the stream directly so the lines survive output capture
        let _ = writeln!(
            std::io::stderr(),
            "criterion {:>2} {}: {}: {}",
            i + 1,
            if o.pass { "PASS" } else { "FAIL" },
            name,
            o.detail
        );
        if !o.pass {
            failed.push(i + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
