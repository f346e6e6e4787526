use std::sync::atomic::{AtomicBool, Ordering};
use std::time::Duration;

use serde_json::json;

use abscon_core::similarity::{builtin_embed, EmbeddingProvider, ProviderFailure};

pub const EMBED_TOKEN_VAR: &str = "ABSCON_EMBED_TOKEN";

/// Embeddings from an OpenAI-style `/embeddings` endpoint. Vectors are
/// rescaled to unit norm.
pub struct RemoteEmbedder {
    client: reqwest::blocking::Client,
    endpoint: String,
    model: String,
    token: Option<String>,
}

impl RemoteEmbedder {
    pub fn new(endpoint: &str, model: &str, timeout: Duration) -> Result<Self, ProviderFailure> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| ProviderFailure(e.to_string()))?;
        Ok(RemoteEmbedder {
            client,
            endpoint: endpoint.to_string(),
            model: model.to_string(),
            token: std::env::var(EMBED_TOKEN_VAR).ok().filter(|t| !t.is_empty()),
        })
    }
}

fn unit(mut v: Vec<f64>) -> Vec<f64> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    v
}

impl EmbeddingProvider for RemoteEmbedder {
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, ProviderFailure> {
        if texts.is_empty() {
            return Ok(Vec::new());
        }
        let fail = |e: String| ProviderFailure(e);
        let mut req = self
            .client
            .post(&self.endpoint)
            .json(&json!({"model": self.model, "input": texts}));
        if let Some(token) = &self.token {
            req = req.bearer_auth(token);
        }
        let resp = req.send().map_err(|e| fail(e.to_string()))?;
        if !resp.status().is_success() {
            return Err(fail(format!("{} returned {}", self.endpoint, resp.status())));
        }
        let value: serde_json::Value = resp.json().map_err(|e| fail(e.to_string()))?;
        let data = value["data"]
            .as_array()
            .ok_or_else(|| fail("response has no data array".into()))?;
        if data.len() != texts.len() {
            return Err(fail(format!(
                "asked for {} embeddings, got {}",
                texts.len(),
                data.len()
            )));
        }
        data.iter()
            .map(|d| {
                d["embedding"]
                    .as_array()
                    .and_then(|xs| xs.iter().map(|x| x.as_f64()).collect::<Option<Vec<f64>>>())
                    .map(unit)
                    .ok_or_else(|| fail("malformed embedding".into()))
            })
            .collect()
    }
}

/// Uses `primary` and falls back to the builtin embedder for the whole
/// batch when it fails.
pub struct FallbackEmbedder<P> {
    primary: P,
    warned: AtomicBool,
}

impl<P: EmbeddingProvider> FallbackEmbedder<P> {
    pub fn new(primary: P) -> Self {
        FallbackEmbedder {
            primary,
            warned: AtomicBool::new(false),
        }
    }
}

impl<P: EmbeddingProvider> EmbeddingProvider for FallbackEmbedder<P> {
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, ProviderFailure> {
        match self.primary.embed(texts) {
            Ok(v) => Ok(v),
            Err(e) => {
                if !self.warned.swap(true, Ordering::Relaxed) {
                    log::warn!("{e}; using builtin embeddings");
                }
                Ok(builtin_embed(texts))
            }
        }
    }
}
