use std::path::Path;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use serde::Deserialize;
use serde_json::Value as Json;

use abscon_core::{BuiltinEmbedder, Domain, DomainProfile, EmbeddingProvider};
use abscon_gateway::{FallbackEmbedder, RemoteEmbedder, SamplingConfig};

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddingConfig {
    pub endpoint: String,
    pub model: String,
    #[serde(default = "default_embed_timeout")]
    pub timeout: f64,
}

fn default_embed_timeout() -> f64 {
    30.0
}

/// Run configuration file. Every field is optional; `profile` keys override
/// the domain's defaults.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub domain: Option<Domain>,
    #[serde(default)]
    pub profile: serde_json::Map<String, Json>,
    pub sampling: Option<SamplingConfig>,
    pub embedding: Option<EmbeddingConfig>,
    pub description: Option<String>,
    #[serde(default)]
    pub examples: Vec<String>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<RunConfig> {
        let Some(path) = path else {
            return Ok(RunConfig::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// Domain from the flag, else the config file.
    pub fn domain(&self, flag: Option<Domain>) -> Result<Domain> {
        match flag.or(self.domain) {
            Some(d) => Ok(d),
            None => bail!("no domain given; pass --domain or set it in the config"),
        }
    }

    pub fn profile(&self, domain: Domain, overrides: &Overrides) -> Result<DomainProfile> {
        let mut base = serde_json::to_value(DomainProfile::new(domain))?;
        let obj = base.as_object_mut().expect("profile serializes to an object");
        for (k, v) in &self.profile {
            if !obj.contains_key(k) {
                bail!("unknown profile setting `{k}`");
            }
            if k == "domain" {
                bail!("set the domain with --domain or the top-level `domain` key");
            }
            obj.insert(k.clone(), v.clone());
        }
        let mut profile: DomainProfile = serde_json::from_value(base).context("invalid profile")?;
        if let Some(s) = overrides.timeout_solve {
            profile.solve_timeout = secs(s)?;
        }
        if let Some(s) = overrides.timeout_match {
            profile.match_timeout = secs(s)?;
        }
        Ok(profile)
    }

    pub fn sampling(&self, overrides: &Overrides) -> SamplingConfig {
        let mut cfg = self.sampling.clone().unwrap_or_default();
        if let Some(n) = overrides.n {
            cfg.n_candidates = n;
        }
        if let Some(t) = overrides.temperature {
            cfg.temperature = t;
        }
        cfg
    }

    pub fn provider(&self) -> Result<Box<dyn EmbeddingProvider>> {
        Ok(match &self.embedding {
            None => Box::new(BuiltinEmbedder),
            Some(e) => {
                let remote = RemoteEmbedder::new(&e.endpoint, &e.model, secs(e.timeout)?)?;
                Box::new(FallbackEmbedder::new(remote))
            }
        })
    }
}

fn secs(s: f64) -> Result<Duration> {
    Duration::try_from_secs_f64(s).with_context(|| format!("invalid duration {s}"))
}

/// Command-line values that take precedence over the config file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub timeout_solve: Option<f64>,
    pub timeout_match: Option<f64>,
    pub n: Option<usize>,
    pub temperature: Option<f64>,
}
