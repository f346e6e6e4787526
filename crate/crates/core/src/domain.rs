//! Per-domain settings shared by abstraction, constraint building and checking.

use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::notation::Notation;
use crate::similarity::SimilarityMode;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Flowchart,
    Taxonomy,
    Clevr,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("unknown domain `{0}` (expected flowchart, taxonomy or clevr)")]
pub struct UnknownDomain(pub String);

impl Domain {
    pub const ALL: [Domain; 3] = [Domain::Flowchart, Domain::Taxonomy, Domain::Clevr];

    pub fn notation(self) -> Notation {
        match self {
            Domain::Flowchart => Notation::MermaidFlowchart,
            Domain::Taxonomy => Notation::TaxonomyEdges,
            Domain::Clevr => Notation::ClevrProgram,
        }
    }

    pub fn default_similarity(self) -> SimilarityMode {
        match self {
            Domain::Flowchart => SimilarityMode::Embedding,
            Domain::Taxonomy | Domain::Clevr => SimilarityMode::ExactLabel,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Domain::Flowchart => "flowchart",
            Domain::Taxonomy => "taxonomy",
            Domain::Clevr => "clevr",
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Domain {
    type Err = UnknownDomain;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Domain::ALL
            .into_iter()
            .find(|d| d.name() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| UnknownDomain(s.to_string()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedSelection {
    #[default]
    First,
    /// The candidate with the most nodes plus edges; earliest wins ties.
    Largest,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DomainProfile {
    pub domain: Domain,
    pub similarity: SimilarityMode,
    /// Minimum node similarity for two nodes to be merged.
    pub tau: f64,
    #[serde(with = "secs")]
    pub match_timeout: Duration,
    #[serde(with = "secs")]
    pub solve_timeout: Duration,
    pub seed_selection: SeedSelection,
    pub taxonomy_require_connected: bool,
    pub case_sensitive_labels: bool,
    pub nonunique_is_error: bool,
}

impl DomainProfile {
    pub fn new(domain: Domain) -> Self {
        DomainProfile {
            domain,
            similarity: domain.default_similarity(),
            tau: 0.5,
            match_timeout: Duration::from_secs(5),
            solve_timeout: Duration::from_secs(60),
            seed_selection: SeedSelection::First,
            taxonomy_require_connected: true,
            case_sensitive_labels: false,
            nonunique_is_error: true,
        }
    }

    pub fn notation(&self) -> Notation {
        self.domain.notation()
    }
}

impl Default for DomainProfile {
    fn default() -> Self {
        DomainProfile::new(Domain::Flowchart)
    }
}

mod secs {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let v = f64::deserialize(d)?;
        Duration::try_from_secs_f64(v).map_err(serde::de::Error::custom)
    }
}
