//! Merge several candidate graph models into a probabilistic partial model,
//! then select the most likely subset of its elements that satisfies the
//! domain's well-formedness rules.
//!
//! The pipeline is [`abstract_candidates`] followed by [`concretize`]; the
//! result passes [`check`] by construction.

pub mod abstraction;
pub mod clevr;
pub mod concretize;
pub mod constraints;
pub mod domain;
pub mod evaluation;
pub mod graph;
pub mod matching;
pub mod notation;
pub mod similarity;
#[cfg(feature = "synth")]
pub mod synth;

pub use abstraction::{abstract_candidates, AbstractionError, PartialModel};
pub use concretize::{concretize, Concretization, ConcretizeError, SolveStatus};
pub use constraints::{build_problem, check, ConsistencyReport, ConstraintProblem};
pub use domain::{Domain, DomainProfile};
pub use graph::{isomorphic, Edge, LabeledGraph, Node, NodeId, NodeKind};
pub use notation::{parse, serialize, Notation};
pub use similarity::{BuiltinEmbedder, EmbeddingProvider, SimilarityMode};
