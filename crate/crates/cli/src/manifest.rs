use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use abscon_core::clevr::{Scene, Value};
use abscon_core::evaluation::Sample;
use abscon_core::notation::{parse, Notation};
use abscon_core::{Domain, LabeledGraph};
use abscon_gateway::load_candidates;

/// Dataset manifest; relative paths resolve against the manifest's
/// directory.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub domain: Option<Domain>,
    pub samples: Vec<ManifestSample>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestSample {
    pub id: String,
    pub candidates: PathBuf,
    pub reference: Option<PathBuf>,
    pub scene: Option<PathBuf>,
    /// Gold answer as plain JSON: a number, boolean or string.
    pub answer: Option<serde_json::Value>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Manifest> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

pub fn read_graph(path: &Path) -> Result<(LabeledGraph, Notation)> {
    let notation = path
        .extension()
        .and_then(|e| e.to_str())
        .and_then(Notation::from_extension)
        .with_context(|| format!("{}: unknown model file extension", path.display()))?;
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let parsed = parse(&text, notation).with_context(|| format!("parsing {}", path.display()))?;
    Ok((parsed.graph, notation))
}

pub fn read_scene(path: &Path) -> Result<Scene> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Scene::from_json(&text).with_context(|| format!("loading scene {}", path.display()))
}

pub fn load_samples(manifest: &Manifest, base: &Path) -> Result<Vec<Sample>> {
    let resolve = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
    manifest
        .samples
        .iter()
        .map(|s| {
            let pool = load_candidates(&resolve(&s.candidates)).with_context(|| format!("sample {}", s.id))?;
            let gold = match &s.answer {
                None => None,
                Some(v) => match Value::from_plain_json(v) {
                    Some(v) => Some(v),
                    None => bail!("sample {}: unsupported answer {v}", s.id),
                },
            };
            Ok(Sample {
                id: s.id.clone(),
                candidates: pool.graphs(),
                greedy: pool.greedy.map(|g| g.parsed.graph),
                reference: s
                    .reference
                    .as_deref()
                    .map(|p| read_graph(&resolve(p)).map(|g| g.0))
                    .transpose()?,
                scene: s.scene.as_deref().map(|p| read_scene(&resolve(p))).transpose()?,
                gold,
            })
        })
        .collect()
}
