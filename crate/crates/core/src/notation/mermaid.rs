use indexmap::IndexMap;

use super::{column_of, content_line, is_ident_char, NotationError};
use crate::graph::{LabeledGraph, NodeId, NodeKind};

const DIRECTIONS: &[&str] = &["TD", "TB", "LR", "RL", "BT"];

struct NodeDecl {
    label: String,
    kind: NodeKind,
    explicit: bool,
}

struct Cursor<'a> {
    line: &'a str,
    rest: &'a str,
    line_no: usize,
}

impl<'a> Cursor<'a> {
    fn error(&self, message: impl Into<String>) -> NotationError {
        NotationError::syntax(self.line_no, column_of(self.line, self.rest), message)
    }

    fn skip_ws(&mut self) {
        self.rest = self.rest.trim_start();
    }

    fn at_end(&self) -> bool {
        self.rest.trim().is_empty()
    }

    fn eat(&mut self, token: &str) -> bool {
        match self.rest.strip_prefix(token) {
            Some(r) => {
                self.rest = r;
                true
            }
            None => false,
        }
    }

    fn ident(&mut self) -> Option<&'a str> {
        let len = self
            .rest
            .char_indices()
            .find(|&(_, c)| !is_ident_char(c))
            .map(|(i, _)| i)
            .unwrap_or(self.rest.len());
        if len == 0 {
            return None;
        }
        let (id, rest) = self.rest.split_at(len);
        self.rest = rest;
        Some(id)
    }

    /// Reads label text up to `close`, honoring a quoted form `"..."`.
    fn label(&mut self, close: char) -> Result<String, NotationError> {
        if self.rest.starts_with('"') {
            let body = &self.rest[1..];
            let end = body.find('"').ok_or_else(|| self.error("unterminated quoted label"))?;
            let text = decode_entities(&body[..end]);
            self.rest = &body[end + 1..];
            self.skip_ws();
            if !self.eat(&close.to_string()) {
                return Err(self.error(format!("expected `{close}` after quoted label")));
            }
            return Ok(text);
        }
        let end = self
            .rest
            .find(close)
            .ok_or_else(|| self.error(format!("missing closing `{close}`")))?;
        let text = self.rest[..end].trim().to_string();
        self.rest = &self.rest[end + close.len_utf8()..];
        Ok(text)
    }
}

fn decode_entities(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut rest = s;
    while let Some(i) = rest.find('#') {
        out.push_str(&rest[..i]);
        let tail = &rest[i..];
        if let Some(r) = tail.strip_prefix("#quot;") {
            out.push('"');
            rest = r;
        } else if let Some(r) = tail.strip_prefix("#35;") {
            out.push('#');
            rest = r;
        } else {
            out.push('#');
            rest = &tail[1..];
        }
    }
    out.push_str(rest);
    out
}

fn encode_label(label: &str) -> String {
    let needs_quotes = label.is_empty()
        || label.trim() != label
        || label.contains("-->")
        || label
            .chars()
            .any(|c| matches!(c, '[' | ']' | '{' | '}' | '|' | '"' | '(' | ')' | ';' | '#'));
    if !needs_quotes {
        return label.to_string();
    }
    let mut out = String::from("\"");
    for c in label.chars() {
        match c {
            '"' => out.push_str("#quot;"),
            '#' => out.push_str("#35;"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

/// Parses one node reference (`id`, `id[label]` or `id{label}`) and records it.
fn node_ref(
    cur: &mut Cursor<'_>,
    nodes: &mut IndexMap<String, NodeDecl>,
    warnings: &mut Vec<String>,
) -> Result<String, NotationError> {
    cur.skip_ws();
    let id = cur.ident().ok_or_else(|| cur.error("expected node id"))?.to_string();
    let shape = if cur.eat("[") {
        Some((cur.label(']')?, NodeKind::Activity))
    } else if cur.eat("{") {
        Some((cur.label('}')?, NodeKind::Decision))
    } else if cur.rest.starts_with('(') || cur.rest.starts_with('>') {
        return Err(cur.error("unsupported node shape"));
    } else {
        None
    };
    if let Some((label, _)) = &shape {
        if label.is_empty() {
            return Err(cur.error(format!("node `{id}` has an empty label")));
        }
    }
    match (nodes.get_mut(&id), shape) {
        (None, Some((label, kind))) => {
            nodes.insert(
                id.clone(),
                NodeDecl {
                    label,
                    kind,
                    explicit: true,
                },
            );
        }
        (None, None) => {
            nodes.insert(
                id.clone(),
                NodeDecl {
                    label: id.clone(),
                    kind: NodeKind::Activity,
                    explicit: false,
                },
            );
        }
        (Some(decl), Some((label, kind))) => {
            if !decl.explicit {
                *decl = NodeDecl {
                    label,
                    kind,
                    explicit: true,
                };
            } else if decl.label != label || decl.kind != kind {
                warnings.push(format!(
                    "line {}: node `{id}` redefined; keeping the first definition",
                    cur.line_no
                ));
            }
        }
        (Some(_), None) => {}
    }
    Ok(id)
}

pub(super) fn parse(text: &str, graph: &mut LabeledGraph, warnings: &mut Vec<String>) -> Result<(), NotationError> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter_map(|(i, l)| content_line(l, "%%").map(|c| (i + 1, l, c)));

    let (line_no, raw, header) = lines
        .next()
        .ok_or_else(|| NotationError::syntax(1, 1, "missing `flowchart` header"))?;
    let mut words = header.split_whitespace();
    match words.next() {
        Some("flowchart") | Some("graph") => {}
        _ => {
            return Err(NotationError::syntax(
                line_no,
                column_of(raw, header),
                "expected `flowchart TD` or `flowchart LR` header",
            ))
        }
    }
    if let Some(dir) = words.next() {
        if !DIRECTIONS.contains(&dir) {
            return Err(NotationError::syntax(
                line_no,
                column_of(raw, dir),
                format!("unknown direction `{dir}`"),
            ));
        }
    }
    if let Some(extra) = words.next() {
        return Err(NotationError::syntax(
            line_no,
            column_of(raw, extra),
            "unexpected text after header",
        ));
    }

    let mut nodes: IndexMap<String, NodeDecl> = IndexMap::new();
    let mut edges: Vec<(String, String, String, usize)> = Vec::new();

    for (line_no, raw, content) in lines {
        let mut cur = Cursor {
            line: raw,
            rest: content,
            line_no,
        };
        let mut prev = node_ref(&mut cur, &mut nodes, warnings)?;
        loop {
            cur.skip_ws();
            if cur.at_end() {
                break;
            }
            if !cur.eat("-->") {
                return Err(cur.error("expected `-->` or end of line"));
            }
            cur.skip_ws();
            let label = if cur.eat("|") {
                let l = cur.label('|')?;
                cur.skip_ws();
                l
            } else {
                String::new()
            };
            if cur.at_end() {
                return Err(cur.error("dangling edge: expected target node"));
            }
            let next = node_ref(&mut cur, &mut nodes, warnings)?;
            edges.push((prev, next.clone(), label, line_no));
            prev = next;
        }
    }

    for (id, decl) in nodes {
        graph
            .add_node_with_id(id.as_str(), decl.label, decl.kind)
            .expect("ids are unique keys");
    }
    for (s, t, label, line_no) in edges {
        let (s, t) = (NodeId::new(s), NodeId::new(t));
        if graph.contains_edge(&s, &t, &label) {
            warnings.push(format!("line {line_no}: duplicate edge {s} --> {t} collapsed"));
            continue;
        }
        graph.add_edge(&s, &t, label).expect("endpoints declared");
    }
    Ok(())
}

pub(super) fn serialize(graph: &LabeledGraph) -> Result<String, NotationError> {
    let mut out = String::from("flowchart TD");
    let mut names = std::collections::HashMap::new();
    for (i, node) in graph.nodes().enumerate() {
        if node.label.contains(['\n', '\r']) {
            return Err(NotationError::incompatible(format!(
                "node `{}` label spans lines",
                node.id
            )));
        }
        let name = format!("n{i}");
        let label = encode_label(&node.label);
        let line = match node.kind {
            NodeKind::Activity => format!("\n{name}[{label}]"),
            NodeKind::Decision => format!("\n{name}{{{label}}}"),
            _ => {
                return Err(NotationError::incompatible(format!(
                    "node `{}` of kind {} is not a flowchart node",
                    node.id,
                    node.kind.tag()
                )))
            }
        };
        out.push_str(&line);
        names.insert(&node.id, name);
    }
    for e in graph.edges() {
        let (s, t) = (&names[&e.source], &names[&e.target]);
        if e.label.contains(['\n', '\r']) {
            return Err(NotationError::incompatible("edge label spans lines"));
        }
        if e.label.trim().is_empty() {
            out.push_str(&format!("\n{s} --> {t}"));
        } else {
            out.push_str(&format!("\n{s} -->|{}| {t}", encode_label(e.label.trim())));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::super::{parse, serialize, Notation, NotationError};
    use crate::graph::{LabeledGraph, NodeKind};

    fn mmd(text: &str) -> super::super::ParsedCandidate {
        parse(text, Notation::MermaidFlowchart).unwrap()
    }

    #[test]
    fn decision_example() {
        let p = mmd("flowchart TD\nA[Start] --> B{OK?}\nB -->|yes| C[Done]\nB -->|no| A");
        let g = &p.graph;
        assert_eq!(g.node_count(), 3);
        assert_eq!(g.edge_count(), 3);
        let decisions = g.nodes().filter(|n| n.kind == NodeKind::Decision).count();
        assert_eq!(decisions, 1);
        let b = g.nodes().find(|n| n.label == "OK?").unwrap();
        let labels: Vec<_> = g.out_edges(&b.id).map(|e| e.label.as_str()).collect();
        assert_eq!(labels, ["yes", "no"]);
        assert!(p.warnings.is_empty());
    }

    #[test]
    fn dangling_edge_is_syntax_error() {
        let err = parse("flowchart TD\nA[Start] --> ", Notation::MermaidFlowchart).unwrap_err();
        assert!(matches!(err, NotationError::Syntax { position, .. } if position.line == 2));
    }

    #[test]
    fn header_required() {
        assert!(parse("A --> B", Notation::MermaidFlowchart).is_err());
        assert!(parse("", Notation::MermaidFlowchart).is_err());
        assert!(parse("flowchart XY\nA", Notation::MermaidFlowchart).is_err());
        assert!(parse("graph LR\nA --> B", Notation::MermaidFlowchart).is_ok());
    }

    #[test]
    fn bare_reference_defaults_to_activity() {
        let g = mmd("flowchart LR\nstart --> B{Check}").graph;
        let s = g.nodes().next().unwrap();
        assert_eq!(s.label, "start");
        assert_eq!(s.kind, NodeKind::Activity);
    }

    #[test]
    fn later_declaration_upgrades_bare_reference() {
        let g = mmd("flowchart TD\nA --> B\nA[Begin]\nB{Ok}").graph;
        let labels: Vec<_> = g.nodes().map(|n| (n.label.clone(), n.kind.clone())).collect();
        assert_eq!(
            labels,
            [
                ("Begin".to_string(), NodeKind::Activity),
                ("Ok".to_string(), NodeKind::Decision)
            ]
        );
    }

    #[test]
    fn duplicate_edges_collapse_with_warning() {
        let p = mmd("flowchart TD\nA --> B\nA --> B\nA -->|Yes| B\nA -->|yes | B");
        assert_eq!(p.graph.edge_count(), 2);
        assert_eq!(p.warnings.len(), 2);
    }

    #[test]
    fn chains_comments_and_semicolons() {
        let p = mmd("%% a comment\nflowchart TD\n  A[a] --> B[b] --> C[c];\n%% done");
        assert_eq!(p.graph.edge_count(), 2);
    }

    #[test]
    fn rejects_unsupported_syntax() {
        for bad in [
            "flowchart TD\nA(round)",
            "flowchart TD\nA[x] -- text --> B",
            "flowchart TD\nA[unterminated",
            "flowchart TD\nsubgraph one",
            "flowchart TD\nA[]",
        ] {
            assert!(parse(bad, Notation::MermaidFlowchart).is_err(), "{bad}");
        }
    }

    #[test]
    fn quoted_labels() {
        let g = mmd("flowchart TD\nA[\"x [1] #quot;y#quot;\"] -->|\"a|b\"| B").graph;
        assert_eq!(g.nodes().next().unwrap().label, "x [1] \"y\"");
        assert_eq!(g.edges()[0].label, "a|b");
    }

    #[test]
    fn smallest_form() {
        let mut g = LabeledGraph::new();
        g.add_node("Start", NodeKind::Activity);
        assert_eq!(
            serialize(&g, Notation::MermaidFlowchart).unwrap(),
            "flowchart TD\nn0[Start]"
        );
    }

    #[test]
    fn serialize_rejects_foreign_kinds() {
        let mut g = LabeledGraph::new();
        g.add_node("dog", NodeKind::Concept);
        assert!(matches!(
            serialize(&g, Notation::MermaidFlowchart),
            Err(NotationError::IncompatibleNotation(_))
        ));
    }

    #[test]
    fn special_characters_round_trip() {
        let mut g = LabeledGraph::new();
        let a = g.add_node("cost > {limit}? #1 \"now\"", NodeKind::Decision);
        let b = g.add_node(" padded ", NodeKind::Activity);
        g.add_edge(&a, &b, "a|b").unwrap();
        let text = serialize(&g, Notation::MermaidFlowchart).unwrap();
        let back = mmd(&text).graph;
        let labels: Vec<_> = back.nodes().map(|n| n.label.clone()).collect();
        assert_eq!(labels, ["cost > {limit}? #1 \"now\"", " padded "]);
        assert_eq!(back.edges()[0].label, "a|b");
    }
}
