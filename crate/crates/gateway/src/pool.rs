use std::fs;
use std::path::Path;

use abscon_core::notation::{parse, Notation, ParsedCandidate};
use abscon_core::LabeledGraph;

use crate::{io_error, GatewayError};

#[derive(Clone, Debug)]
pub struct NamedCandidate {
    /// File name within the candidate directory.
    pub name: String,
    pub notation: Notation,
    pub parsed: ParsedCandidate,
}

/// Candidates of one directory in file-name order. Files stemmed `greedy`
/// hold the designated low-temperature candidate and are kept apart from
/// the sampled pool.
#[derive(Clone, Debug)]
pub struct CandidatePool {
    pub candidates: Vec<NamedCandidate>,
    pub greedy: Option<NamedCandidate>,
    /// One line per skipped file.
    pub warnings: Vec<String>,
}

impl CandidatePool {
    pub fn graphs(&self) -> Vec<LabeledGraph> {
        self.candidates.iter().map(|c| c.parsed.graph.clone()).collect()
    }

    /// The greedy file if present, else the first sampled candidate.
    pub fn designated_greedy(&self) -> &NamedCandidate {
        self.greedy.as_ref().unwrap_or(&self.candidates[0])
    }

    pub fn notation(&self) -> Notation {
        self.designated_greedy().notation
    }
}

fn is_greedy(name: &str) -> bool {
    name.split('.').next() == Some("greedy")
}

/// Parses every file whose extension names a notation. Unparsable files are
/// skipped with a warning.
pub fn load_candidates(dir: &Path) -> Result<CandidatePool, GatewayError> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .map_err(io_error(dir))?
        .map(|entry| entry.map(|e| e.file_name().to_string_lossy().into_owned()))
        .collect::<Result<_, _>>()
        .map_err(io_error(dir))?;
    names.sort();
    let mut pool = CandidatePool {
        candidates: Vec::new(),
        greedy: None,
        warnings: Vec::new(),
    };
    for name in names {
        let Some(notation) = Path::new(&name)
            .extension()
            .and_then(|e| e.to_str())
            .and_then(Notation::from_extension)
        else {
            continue;
        };
        let path = dir.join(&name);
        let text = fs::read_to_string(&path).map_err(io_error(&path))?;
        let parsed = match parse(&text, notation) {
            Ok(p) => p,
            Err(e) => {
                log::warn!("skipping {}: {e}", path.display());
                pool.warnings.push(format!("{name}: {e}"));
                continue;
            }
        };
        let candidate = NamedCandidate { name, notation, parsed };
        if is_greedy(&candidate.name) && pool.greedy.is_none() {
            pool.greedy = Some(candidate);
        } else {
            pool.candidates.push(candidate);
        }
    }
    if pool.candidates.is_empty() {
        return Err(GatewayError::EmptyPool(dir.display().to_string()));
    }
    Ok(pool)
}
