//! Text notations for candidate models.
//!
//! Three line-oriented formats are supported:
//!
//! - a Mermaid flowchart subset (`flowchart TD|LR`, `id[label]`, `id{label}`,
//!   `a --> b`, `a -->|cond| b`),
//! - taxonomy edge lists (`parent -> child`, one per line),
//! - Clevr program graphs (`name: op[param](arg0, arg1)`, one per line).
//!
//! Parsing never yields a graph that violates the graph invariants. Duplicate
//! edges in the source text are collapsed and reported as warnings.

mod clevr;
mod fence;
mod mermaid;
mod taxonomy;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::LabeledGraph;

pub use fence::extract_code_block;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Notation {
    MermaidFlowchart,
    TaxonomyEdges,
    ClevrProgram,
}

impl Notation {
    pub const ALL: [Notation; 3] = [
        Notation::MermaidFlowchart,
        Notation::TaxonomyEdges,
        Notation::ClevrProgram,
    ];

    /// File extension used for candidate files in this notation.
    pub fn extension(self) -> &'static str {
        match self {
            Notation::MermaidFlowchart => "mmd",
            Notation::TaxonomyEdges => "tax",
            Notation::ClevrProgram => "clv",
        }
    }

    pub fn from_extension(ext: &str) -> Option<Notation> {
        Notation::ALL.into_iter().find(|n| n.extension() == ext)
    }
}

/// 1-based line and column of a syntax problem.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Position {
    pub line: usize,
    pub column: usize,
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NotationError {
    #[error("syntax error at {position}: {message}")]
    Syntax { position: Position, message: String },
    #[error("graph cannot be written in this notation: {0}")]
    IncompatibleNotation(String),
}

impl NotationError {
    pub(crate) fn syntax(line: usize, column: usize, message: impl Into<String>) -> Self {
        NotationError::Syntax {
            position: Position { line, column },
            message: message.into(),
        }
    }

    pub(crate) fn incompatible(message: impl Into<String>) -> Self {
        NotationError::IncompatibleNotation(message.into())
    }
}

#[derive(Clone, Debug)]
pub struct ParsedCandidate {
    pub graph: LabeledGraph,
    pub source_text: String,
    pub warnings: Vec<String>,
}

pub fn parse(text: &str, notation: Notation) -> Result<ParsedCandidate, NotationError> {
    parse_with(text, notation, false)
}

/// Parse with an explicit edge-label case policy for the resulting graph.
pub fn parse_with(
    text: &str,
    notation: Notation,
    case_sensitive_labels: bool,
) -> Result<ParsedCandidate, NotationError> {
    let mut graph = LabeledGraph::with_case_sensitive_labels(case_sensitive_labels);
    let mut warnings = Vec::new();
    match notation {
        Notation::MermaidFlowchart => mermaid::parse(text, &mut graph, &mut warnings)?,
        Notation::TaxonomyEdges => taxonomy::parse(text, &mut graph, &mut warnings)?,
        Notation::ClevrProgram => clevr::parse(text, &mut graph, &mut warnings)?,
    }
    Ok(ParsedCandidate {
        graph,
        source_text: text.to_string(),
        warnings,
    })
}

/// Deterministic text form of `graph`. The same graph always yields
/// byte-identical output.
pub fn serialize(graph: &LabeledGraph, notation: Notation) -> Result<String, NotationError> {
    match notation {
        Notation::MermaidFlowchart => mermaid::serialize(graph),
        Notation::TaxonomyEdges => taxonomy::serialize(graph),
        Notation::ClevrProgram => clevr::serialize(graph),
    }
}

pub(crate) fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

/// Strips a `%%` (Mermaid) or `#` comment line, a trailing `;` and
/// surrounding whitespace. Returns `None` for lines with no content.
pub(crate) fn content_line<'a>(line: &'a str, comment: &str) -> Option<&'a str> {
    let trimmed = line.trim();
    if trimmed.is_empty() || trimmed.starts_with(comment) {
        return None;
    }
    let trimmed = trimmed.strip_suffix(';').unwrap_or(trimmed).trim_end();
    (!trimmed.is_empty()).then_some(trimmed)
}

/// Column (1-based, in chars) of `part` within `line`, where `part` is a
/// subslice of `line`.
pub(crate) fn column_of(line: &str, part: &str) -> usize {
    let offset = (part.as_ptr() as usize).saturating_sub(line.as_ptr() as usize);
    line[..offset.min(line.len())].chars().count() + 1
}
