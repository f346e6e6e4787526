use std::collections::{BTreeSet, HashSet};

use super::{column_of, content_line, NotationError};
use crate::graph::{LabeledGraph, NodeId, NodeKind};

const ARROW: &str = "->";

fn ensure_concept(graph: &mut LabeledGraph, name: &str) -> NodeId {
    let id = NodeId::new(name);
    if !graph.contains_node(&id) {
        graph
            .add_node_with_id(id.clone(), name, NodeKind::Concept)
            .expect("checked absent");
    }
    id
}

pub(super) fn parse(text: &str, graph: &mut LabeledGraph, warnings: &mut Vec<String>) -> Result<(), NotationError> {
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let Some(content) = content_line(raw, "#") else {
            continue;
        };
        let parts: Vec<&str> = content.split(ARROW).collect();
        match parts.as_slice() {
            [single] => {
                ensure_concept(graph, single.trim());
            }
            [parent, child] => {
                let (p, c) = (parent.trim(), child.trim());
                if p.is_empty() {
                    return Err(NotationError::syntax(
                        line_no,
                        column_of(raw, content),
                        "missing parent concept",
                    ));
                }
                if c.is_empty() {
                    return Err(NotationError::syntax(
                        line_no,
                        column_of(raw, child),
                        "missing child concept",
                    ));
                }
                let (p, c) = (ensure_concept(graph, p), ensure_concept(graph, c));
                if graph.contains_edge(&p, &c, "") {
                    warnings.push(format!("line {line_no}: duplicate edge {p} -> {c} collapsed"));
                } else {
                    graph.add_edge(&p, &c, "").expect("endpoints exist");
                }
            }
            _ => {
                return Err(NotationError::syntax(
                    line_no,
                    column_of(raw, content),
                    "expected exactly one `->` per line",
                ))
            }
        }
    }
    Ok(())
}

fn check_name(name: &str) -> Result<(), NotationError> {
    let ok = !name.is_empty()
        && name.trim() == name
        && !name.contains(ARROW)
        && !name.contains(['\n', '\r'])
        && !name.starts_with('#')
        && !name.ends_with(';');
    if ok {
        Ok(())
    } else {
        Err(NotationError::incompatible(format!(
            "`{name}` is not a valid concept name"
        )))
    }
}

pub(super) fn serialize(graph: &LabeledGraph) -> Result<String, NotationError> {
    let mut seen = HashSet::new();
    for n in graph.nodes() {
        if n.kind != NodeKind::Concept {
            return Err(NotationError::incompatible(format!(
                "node `{}` of kind {} is not a concept",
                n.id,
                n.kind.tag()
            )));
        }
        check_name(&n.label)?;
        if !seen.insert(n.label.as_str()) {
            return Err(NotationError::incompatible(format!(
                "concept name `{}` is not unique",
                n.label
            )));
        }
    }
    let label = |id: &NodeId| graph.node(id).expect("endpoint exists").label.as_str();
    let mut lines = BTreeSet::new();
    let mut touched = HashSet::new();
    for e in graph.edges() {
        if !e.label.trim().is_empty() {
            return Err(NotationError::incompatible("taxonomy edges carry no labels"));
        }
        lines.insert((label(&e.source), label(&e.target)));
        touched.insert(&e.source);
        touched.insert(&e.target);
    }
    let mut out: Vec<String> = lines.into_iter().map(|(p, c)| format!("{p} {ARROW} {c}")).collect();
    let isolated: BTreeSet<&str> = graph
        .nodes()
        .filter(|n| !touched.contains(&n.id))
        .map(|n| n.label.as_str())
        .collect();
    out.extend(isolated.into_iter().map(str::to_string));
    Ok(out.join("\n"))
}
