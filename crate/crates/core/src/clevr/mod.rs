//! Clevr program graphs: operation catalog, scenes and the executor.

pub mod catalog;
mod exec;
mod scene;

pub use catalog::{arg_position, catalog, lookup, OpCatalogEntry, ParamDomain, ValueType};
pub use exec::{answers_equal, execute, Answer, ExecError, Value};
pub use scene::{Scene, SceneError, SceneObject};
