use std::collections::{BTreeMap, HashMap};

use super::{column_of, content_line, is_ident_char, NotationError};
use crate::clevr::arg_position;
use crate::graph::{ClevrOp, LabeledGraph, NodeId, NodeKind};

fn split_ident(s: &str) -> (&str, &str) {
    let len = s
        .char_indices()
        .find(|&(_, c)| !is_ident_char(c))
        .map(|(i, _)| i)
        .unwrap_or(s.len());
    s.split_at(len)
}

struct Statement<'a> {
    line_no: usize,
    raw: &'a str,
    name: &'a str,
    op: ClevrOp,
    args: Vec<Option<&'a str>>,
}

fn parse_statement<'a>(line_no: usize, raw: &'a str, content: &'a str) -> Result<Statement<'a>, NotationError> {
    let err = |at: &str, msg: &str| NotationError::syntax(line_no, column_of(raw, at), msg);

    let (name, rest) = split_ident(content);
    if name.is_empty() {
        return Err(err(content, "expected node name"));
    }
    let rest = rest.trim_start();
    let rest = rest.strip_prefix(':').ok_or_else(|| err(rest, "expected `:`"))?;
    let rest = rest.trim_start();
    let (op, rest) = split_ident(rest);
    if op.is_empty() {
        return Err(err(rest, "expected operation name"));
    }
    let (param, rest) = match rest.strip_prefix('[') {
        Some(r) => {
            let end = r.find(']').ok_or_else(|| err(r, "missing `]`"))?;
            (Some(r[..end].trim().to_string()), &r[end + 1..])
        }
        None => (None, rest),
    };
    let op = ClevrOp::new(op, param).map_err(|e| err(content, &e.to_string()))?;
    let rest = rest.trim_start();
    let inner = rest.strip_prefix('(').ok_or_else(|| err(rest, "expected `(`"))?;
    let close = inner.find(')').ok_or_else(|| err(inner, "missing `)`"))?;
    let tail = &inner[close + 1..];
    if !tail.trim().is_empty() {
        return Err(err(tail, "unexpected text after `)`"));
    }
    let inner = &inner[..close];
    let mut args = Vec::new();
    if !inner.trim().is_empty() {
        for part in inner.split(',') {
            let a = part.trim();
            if a == "_" {
                args.push(None);
            } else if !a.is_empty() && a.chars().all(is_ident_char) {
                args.push(Some(a));
            } else {
                return Err(err(part, "invalid argument"));
            }
        }
    }
    Ok(Statement {
        line_no,
        raw,
        name,
        op,
        args,
    })
}

pub(super) fn parse(text: &str, graph: &mut LabeledGraph, _warnings: &mut Vec<String>) -> Result<(), NotationError> {
    let mut statements = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        if let Some(content) = content_line(raw, "#") {
            statements.push(parse_statement(i + 1, raw, content)?);
        }
    }
    for st in &statements {
        let label = st.op.to_string();
        graph
            .add_node_with_id(st.name, label, NodeKind::ClevrOp(st.op.clone()))
            .map_err(|_| {
                NotationError::syntax(
                    st.line_no,
                    column_of(st.raw, st.name),
                    format!("node `{}` defined twice", st.name),
                )
            })?;
    }
    // arguments may refer forward, so edges are resolved after all names exist
    for st in &statements {
        let target = NodeId::new(st.name);
        for (pos, arg) in st.args.iter().enumerate() {
            let Some(arg) = arg else { continue };
            let source = NodeId::new(*arg);
            if !graph.contains_node(&source) {
                return Err(NotationError::syntax(
                    st.line_no,
                    column_of(st.raw, arg),
                    format!("unknown argument `{arg}`"),
                ));
            }
            graph
                .add_edge(&source, &target, pos.to_string())
                .expect("positions are distinct");
        }
    }
    Ok(())
}

pub(super) fn serialize(graph: &LabeledGraph) -> Result<String, NotationError> {
    let names: HashMap<&NodeId, String> = graph
        .nodes()
        .enumerate()
        .map(|(i, n)| (&n.id, format!("n{i}")))
        .collect();
    let mut args: HashMap<&NodeId, BTreeMap<usize, &str>> = HashMap::new();
    for e in graph.edges() {
        let pos = arg_position(&e.label).ok_or_else(|| {
            NotationError::incompatible(format!(
                "edge {} -> {} has non-positional label `{}`",
                e.source, e.target, e.label
            ))
        })?;
        let slot = args.entry(&e.target).or_default();
        if slot.insert(pos, names[&e.source].as_str()).is_some() {
            return Err(NotationError::incompatible(format!(
                "node {} has two arguments at position {pos}",
                e.target
            )));
        }
    }
    let mut lines = Vec::with_capacity(graph.node_count());
    for n in graph.nodes() {
        let op = n.kind.as_clevr().ok_or_else(|| {
            NotationError::incompatible(format!(
                "node `{}` of kind {} is not a program operation",
                n.id,
                n.kind.tag()
            ))
        })?;
        let arg_text = match args.get(&n.id) {
            Some(slots) => {
                let max = *slots.keys().next_back().expect("non-empty");
                (0..=max)
                    .map(|p| slots.get(&p).copied().unwrap_or("_"))
                    .collect::<Vec<_>>()
                    .join(", ")
            }
            None => String::new(),
        };
        lines.push(format!("{}: {op}({arg_text})", names[&n.id]));
    }
    Ok(lines.join("\n"))
}

#[cfg(test)]
mod tests {
    use super::super::{parse, serialize, Notation};
    use crate::graph::NodeKind;

    #[test]
    fn program_graph() {
        let src = "n1: scene()\nn2: filter_color[red](n1)\nn3: count(n2)";
        let g = parse(src, Notation::ClevrProgram).unwrap().graph;
        assert_eq!(g.node_count(), 3);
        assert_eq!(g.edge_count(), 2);
        let n2 = g.nodes().nth(1).unwrap();
        assert_eq!(n2.kind, NodeKind::clevr("filter_color", Some("red")).unwrap());
        assert_eq!(n2.display_label(), "filter_color[red]");
        assert!(g.edges().iter().all(|e| e.label == "0"));
        assert_eq!(
            serialize(&g, Notation::ClevrProgram).unwrap(),
            "n0: scene()\nn1: filter_color[red](n0)\nn2: count(n1)"
        );
    }

    #[test]
    fn positions_and_forward_refs() {
        let src = "a: less_than(c, b)\nb: count(s)\nc: count(s)\ns: scene()";
        let g = parse(src, Notation::ClevrProgram).unwrap().graph;
        let labels: Vec<_> = g
            .edges()
            .iter()
            .map(|e| (e.source.as_str(), e.label.as_str()))
            .collect();
        assert_eq!(labels, [("c", "0"), ("b", "1"), ("s", "0"), ("s", "0")]);
    }

    #[test]
    fn gaps_round_trip() {
        let src = "s: scene()\nu: union(_, s)";
        let g = parse(src, Notation::ClevrProgram).unwrap().graph;
        assert_eq!(g.edges()[0].label, "1");
        assert_eq!(
            serialize(&g, Notation::ClevrProgram).unwrap(),
            "n0: scene()\nn1: union(_, n0)"
        );
    }

    #[test]
    fn errors() {
        for bad in [
            "a: scene",
            "a scene()",
            "a: teleport()",
            "a: filter_color(b)\nb: scene()",
            "a: filter_color[pink](b)\nb: scene()",
            "a: count(zz)",
            "a: scene()\na: scene()",
            "a: count(b) extra\nb: scene()",
        ] {
            assert!(parse(bad, Notation::ClevrProgram).is_err(), "{bad}");
        }
    }
}
