use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Serialize;

use abscon_core::clevr::execute;
use abscon_core::concretize::{concretize, ConcretizeError};
use abscon_core::constraints::{check, Violation};
use abscon_core::evaluation::{evaluate_dataset, Aggregate, Method, MetricReport};
use abscon_core::notation::{serialize, Notation};
use abscon_core::{abstract_candidates, Domain, DomainProfile, PartialModel};
use abscon_gateway::{load_candidates, sample_candidates, CandidatePool, PromptBundle};

use crate::config::{Overrides, RunConfig};
use crate::manifest::{load_samples, read_graph, read_scene, Manifest};
use crate::{Common, Failure};

fn write(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write(path, &text)
}

fn setup(common: &Common, overrides: &Overrides) -> Result<(RunConfig, DomainProfile)> {
    let cfg = RunConfig::load(common.config.as_deref())?;
    let domain = cfg.domain(common.domain)?;
    let profile = cfg.profile(domain, overrides)?;
    Ok((cfg, profile))
}

#[derive(Serialize)]
struct PartialSummary {
    n_candidates: usize,
    nodes: usize,
    edges: usize,
}

impl From<&PartialModel> for PartialSummary {
    fn from(pm: &PartialModel) -> Self {
        PartialSummary {
            n_candidates: pm.n_candidates(),
            nodes: pm.node_count(),
            edges: pm.edge_count(),
        }
    }
}

#[derive(Serialize, Default)]
struct RunReport {
    domain: String,
    candidates: Vec<String>,
    greedy: Option<String>,
    warnings: Vec<String>,
    partial_model: Option<PartialSummary>,
    status: String,
    objective: Option<f64>,
    consistent: Option<bool>,
    violations: Vec<Violation>,
    final_model: Option<String>,
    error: Option<String>,
}

fn final_name(notation: Notation) -> String {
    format!("final.{}", notation.extension())
}

fn check_pool_notation(pool: &CandidatePool, profile: &DomainProfile) -> Result<()> {
    let expected = profile.notation();
    if let Some(c) = pool.candidates.iter().find(|c| c.notation != expected) {
        bail!("{} is not a {} candidate", c.name, profile.domain);
    }
    Ok(())
}

/// Concretizes `pm` into `out`, writing `final.*` and `report.json`.
fn concretize_into(
    pm: &PartialModel,
    profile: &DomainProfile,
    out: &Path,
    mut report: RunReport,
) -> Result<(), Failure> {
    let notation = profile.notation();
    let final_path = out.join(final_name(notation));
    report.domain = profile.domain.to_string();
    report.partial_model = Some(pm.into());
    let result = concretize(pm, profile);
    let failure = match result {
        Ok(c) => {
            let text = serialize(&c.graph, notation).context("serializing final model")?;
            write(&final_path, &format!("{text}\n"))?;
            report.status = serde_json::to_value(c.solution.status)
                .ok()
                .and_then(|v| v.as_str().map(str::to_string))
                .unwrap_or_default();
            report.objective = Some(c.solution.objective);
            report.consistent = Some(c.report.consistent);
            report.violations = c.report.violations;
            report.final_model = Some(final_name(notation));
            None
        }
        Err(e) => {
            if final_path.exists() {
                fs::remove_file(&final_path).with_context(|| format!("removing {}", final_path.display()))?;
            }
            report.error = Some(e.to_string());
            let (status, failure) = match &e {
                ConcretizeError::InfeasibleModel => ("infeasible", Failure::Infeasible(e.to_string())),
                ConcretizeError::TimedOut(_) => ("timed_out", Failure::Infeasible(e.to_string())),
                ConcretizeError::CheckerRejected(_) => ("rejected", Failure::Inconsistent(e.to_string())),
                ConcretizeError::TooLarge(_) => ("too_large", Failure::Usage(anyhow::anyhow!(e.to_string()))),
            };
            report.status = status.to_string();
            report.consistent = Some(false);
            Some(failure)
        }
    };
    write_json(&out.join("report.json"), &report)?;
    match failure {
        None => {
            println!("{}", final_path.display());
            Ok(())
        }
        Some(f) => Err(f),
    }
}

fn abstract_pool(pool: &CandidatePool, cfg: &RunConfig, profile: &DomainProfile, out: &Path) -> Result<PartialModel> {
    check_pool_notation(pool, profile)?;
    let provider = cfg.provider()?;
    let pm = abstract_candidates(&pool.graphs(), profile, provider.as_ref())?;
    write(&out.join("partial.json"), &format!("{}\n", pm.to_json()))?;
    Ok(pm)
}

fn pool_report(pool: &CandidatePool) -> RunReport {
    RunReport {
        candidates: pool.candidates.iter().map(|c| c.name.clone()).collect(),
        greedy: pool.greedy.as_ref().map(|g| g.name.clone()),
        warnings: pool.warnings.clone(),
        ..RunReport::default()
    }
}

pub fn pipeline(common: &Common, candidates: Option<&Path>, out: &Path, overrides: Overrides) -> Result<(), Failure> {
    let (cfg, profile) = setup(common, &overrides)?;
    let pool = match candidates {
        Some(dir) => load_candidates(dir).map_err(anyhow::Error::from)?,
        None => generate(common, out, None, overrides)?,
    };
    let pm = abstract_pool(&pool, &cfg, &profile, out)?;
    concretize_into(&pm, &profile, out, pool_report(&pool))
}

pub fn abstract_cmd(common: &Common, candidates: &Path, out: &Path) -> Result<(), Failure> {
    let (cfg, profile) = setup(common, &common.overrides(None, None))?;
    let pool = load_candidates(candidates).map_err(anyhow::Error::from)?;
    let pm = abstract_pool(&pool, &cfg, &profile, out)?;
    println!(
        "{}: {} nodes, {} edges from {} candidates",
        out.join("partial.json").display(),
        pm.node_count(),
        pm.edge_count(),
        pm.n_candidates()
    );
    Ok(())
}

pub fn concretize_cmd(common: &Common, partial: &Path, out: &Path) -> Result<(), Failure> {
    let (_, profile) = setup(common, &common.overrides(None, None))?;
    let text = fs::read_to_string(partial).with_context(|| format!("reading {}", partial.display()))?;
    let pm = PartialModel::from_json(&text).with_context(|| format!("loading {}", partial.display()))?;
    concretize_into(&pm, &profile, out, RunReport::default())
}

fn domain_of(notation: Notation) -> Domain {
    match notation {
        Notation::MermaidFlowchart => Domain::Flowchart,
        Notation::TaxonomyEdges => Domain::Taxonomy,
        Notation::ClevrProgram => Domain::Clevr,
    }
}

pub fn check_cmd(common: &Common, graph: &Path) -> Result<(), Failure> {
    let cfg = RunConfig::load(common.config.as_deref())?;
    let (g, notation) = read_graph(graph)?;
    let domain = common.domain.or(cfg.domain).unwrap_or(domain_of(notation));
    let profile = cfg.profile(domain, &common.overrides(None, None))?;
    let report = check(&g, &profile);
    println!("{}", serde_json::to_string_pretty(&report).context("encoding report")?);
    if report.consistent {
        Ok(())
    } else {
        let names: Vec<&str> = report.violations.iter().map(|v| v.constraint.as_str()).collect();
        Err(Failure::Inconsistent(format!("violated: {}", names.join(", "))))
    }
}

#[derive(Serialize)]
struct AggregateRow {
    method: Method,
    samples: usize,
    cr: Option<f64>,
    sr: Option<f64>,
    acc: Option<f64>,
    precision: Option<f64>,
    recall: Option<f64>,
    f1: Option<f64>,
}

impl AggregateRow {
    fn new(method: Method, a: &Aggregate) -> Self {
        AggregateRow {
            method,
            samples: a.samples,
            cr: a.cr,
            sr: a.sr,
            acc: a.acc,
            precision: a.precision,
            recall: a.recall,
            f1: a.f1,
        }
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into())
}

pub fn evaluate(common: &Common, manifest_path: &Path, methods: &[Method], out: Option<&Path>) -> Result<(), Failure> {
    let cfg = RunConfig::load(common.config.as_deref())?;
    let manifest = Manifest::load(manifest_path)?;
    let domain = match common.domain.or(cfg.domain).or(manifest.domain) {
        Some(d) => d,
        None => return Err(anyhow::anyhow!("no domain given in flags, config or manifest").into()),
    };
    let profile = cfg.profile(domain, &common.overrides(None, None))?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let samples = load_samples(&manifest, base)?;
    if let Some(m) = methods.iter().find(|m| m.votes_on_answers()) {
        if let Some(s) = samples.iter().find(|s| s.scene.is_none()) {
            return Err(anyhow::anyhow!("method {m} needs a scene but sample {} has none", s.id).into());
        }
    }
    let provider = cfg.provider()?;
    let reports: Vec<MetricReport> = methods
        .iter()
        .map(|&m| evaluate_dataset(&samples, m, &profile, provider.as_ref()))
        .collect();

    println!("method,samples,cr,sr,acc,precision,recall,f1");
    for r in &reports {
        let a = &r.aggregate;
        println!(
            "{},{},{},{},{},{},{},{}",
            r.method,
            a.samples,
            fmt_opt(a.cr),
            fmt_opt(a.sr),
            fmt_opt(a.acc),
            fmt_opt(a.precision),
            fmt_opt(a.recall),
            fmt_opt(a.f1)
        );
    }
    if let Some(out) = out {
        fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
        write_json(&out.join("report.json"), &reports)?;
        let mut rows = csv::Writer::from_path(out.join("samples.csv")).context("writing samples.csv")?;
        for r in &reports {
            for s in &r.samples {
                rows.serialize(s).context("writing samples.csv")?;
            }
        }
        rows.flush().context("writing samples.csv")?;
        let mut agg = csv::Writer::from_path(out.join("aggregate.csv")).context("writing aggregate.csv")?;
        for r in &reports {
            agg.serialize(AggregateRow::new(r.method, &r.aggregate))
                .context("writing aggregate.csv")?;
        }
        agg.flush().context("writing aggregate.csv")?;
    }
    Ok(())
}

pub fn exec(program: &Path, scene: &Path) -> Result<(), Failure> {
    let (g, notation) = read_graph(program)?;
    if notation != Notation::ClevrProgram {
        return Err(anyhow::anyhow!("{} is not a program file (.clv)", program.display()).into());
    }
    let scene = read_scene(scene)?;
    match execute(&g, &scene) {
        Ok(v) => {
            println!("{v}");
            Ok(())
        }
        Err(e) => {
            println!("error: {}", e.reason);
            Err(Failure::Inconsistent(format!("execution failed: {}", e.reason)))
        }
    }
}

pub fn generate(
    common: &Common,
    out: &Path,
    description: Option<String>,
    overrides: Overrides,
) -> Result<CandidatePool, Failure> {
    let (cfg, profile) = setup(common, &overrides)?;
    let Some(description) = description.or_else(|| cfg.description.clone()) else {
        return Err(anyhow::anyhow!("no candidates given and no description to sample from").into());
    };
    let bundle = PromptBundle::for_domain(profile.domain, &description, &cfg.examples);
    let sampling = cfg.sampling(&overrides);
    let pool = sample_candidates(&bundle, &sampling, profile.notation(), out).map_err(anyhow::Error::from)?;
    for w in &pool.warnings {
        log::warn!("{w}");
    }
    println!(
        "{} candidates in {}",
        pool.candidates.len(),
        out.join("candidates").display()
    );
    Ok(pool)
}
