use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::catalog::{arg_position, ParamDomain, ValueType};
use super::scene::Scene;
use crate::graph::{ClevrOp, LabeledGraph};

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", content = "value", rename_all = "snake_case")]
pub enum Value {
    ObjectSet(Vec<usize>),
    SingleObject(usize),
    Count(u64),
    Truth(bool),
    Attr(String),
}

impl Value {
    pub fn value_type(&self) -> ValueType {
        match self {
            Value::ObjectSet(_) => ValueType::ObjectSet,
            Value::SingleObject(_) => ValueType::SingleObject,
            Value::Count(_) => ValueType::Count,
            Value::Truth(_) => ValueType::Truth,
            Value::Attr(_) => ValueType::Attr,
        }
    }

    /// Reads a plain answer as it appears in question datasets: numbers are
    /// counts, booleans truths, strings attribute values.
    pub fn from_plain_json(v: &serde_json::Value) -> Option<Value> {
        match v {
            serde_json::Value::Bool(b) => Some(Value::Truth(*b)),
            serde_json::Value::Number(n) => n.as_u64().map(Value::Count),
            serde_json::Value::String(s) => match s.as_str() {
                "yes" | "true" => Some(Value::Truth(true)),
                "no" | "false" => Some(Value::Truth(false)),
                s => match s.parse::<u64>() {
                    Ok(n) => Some(Value::Count(n)),
                    Err(_) => Some(Value::Attr(s.to_string())),
                },
            },
            _ => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::ObjectSet(ids) => {
                let parts: Vec<_> = ids.iter().map(usize::to_string).collect();
                write!(f, "{{{}}}", parts.join(", "))
            }
            Value::SingleObject(id) => write!(f, "object {id}"),
            Value::Count(n) => write!(f, "{n}"),
            Value::Truth(b) => write!(f, "{}", if *b { "yes" } else { "no" }),
            Value::Attr(a) => f.write_str(a),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ExecError {
    pub reason: String,
}

impl ExecError {
    fn new(reason: &str) -> Self {
        ExecError {
            reason: reason.to_string(),
        }
    }

    /// Semantic failures depend on the scene; everything else is a defect
    /// of the program graph itself.
    pub fn is_structural(&self) -> bool {
        self.reason != "non_unique"
    }
}

impl fmt::Display for ExecError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "execution error: {}", self.reason)
    }
}

impl std::error::Error for ExecError {}

pub type Answer = Result<Value, ExecError>;

/// Same variant and value. All execution errors compare equal.
pub fn answers_equal(a: &Answer, b: &Answer) -> bool {
    match (a, b) {
        (Ok(x), Ok(y)) => x == y,
        (Err(_), Err(_)) => true,
        _ => false,
    }
}

fn attr_domain(op: &str) -> ParamDomain {
    match op.rsplit('_').next() {
        Some("color") => ParamDomain::Color,
        Some("shape") => ParamDomain::Shape,
        Some("size") => ParamDomain::Size,
        _ => ParamDomain::Material,
    }
}

fn eval(op: &ClevrOp, args: &[Value], scene: &Scene) -> Answer {
    let set = |v: &Value| match v {
        Value::ObjectSet(s) => s.clone(),
        _ => unreachable!("types checked before evaluation"),
    };
    let obj = |v: &Value| match v {
        Value::SingleObject(o) => *o,
        _ => unreachable!("types checked before evaluation"),
    };
    let count = |v: &Value| match v {
        Value::Count(c) => *c,
        _ => unreachable!("types checked before evaluation"),
    };
    let attr = |v: &Value| match v {
        Value::Attr(a) => a.clone(),
        _ => unreachable!("types checked before evaluation"),
    };
    let name = op.op();
    let value = match name {
        "scene" => Value::ObjectSet((0..scene.objects.len()).collect()),
        "filter_color" | "filter_shape" | "filter_size" | "filter_material" => {
            let domain = attr_domain(name);
            let wanted = op.param().expect("filters are parameterized");
            let kept = set(&args[0])
                .into_iter()
                .filter(|&i| scene.objects[i].attribute(domain) == wanted)
                .collect();
            Value::ObjectSet(kept)
        }
        "unique" => match set(&args[0]).as_slice() {
            [only] => Value::SingleObject(*only),
            _ => return Err(ExecError::new("non_unique")),
        },
        "relate" => {
            let relation = op.param().expect("relate is parameterized");
            let related: BTreeSet<usize> = scene.related(relation, obj(&args[0])).iter().copied().collect();
            Value::ObjectSet(related.into_iter().collect())
        }
        "count" => Value::Count(set(&args[0]).len() as u64),
        "exist" => Value::Truth(!set(&args[0]).is_empty()),
        "query_color" | "query_shape" | "query_size" | "query_material" => {
            let o = obj(&args[0]);
            Value::Attr(scene.objects[o].attribute(attr_domain(name)).to_string())
        }
        "same_color" | "same_shape" | "same_size" | "same_material" => {
            let domain = attr_domain(name);
            let o = obj(&args[0]);
            let wanted = scene.objects[o].attribute(domain);
            let same = (0..scene.objects.len())
                .filter(|&i| i != o && scene.objects[i].attribute(domain) == wanted)
                .collect();
            Value::ObjectSet(same)
        }
        "intersect" | "union" => {
            let a: BTreeSet<usize> = set(&args[0]).into_iter().collect();
            let b: BTreeSet<usize> = set(&args[1]).into_iter().collect();
            let out = if name == "intersect" {
                a.intersection(&b).copied().collect()
            } else {
                a.union(&b).copied().collect()
            };
            Value::ObjectSet(out)
        }
        "equal_integer" => Value::Truth(count(&args[0]) == count(&args[1])),
        "less_than" => Value::Truth(count(&args[0]) < count(&args[1])),
        "greater_than" => Value::Truth(count(&args[0]) > count(&args[1])),
        "equal_color" | "equal_shape" | "equal_size" | "equal_material" => {
            Value::Truth(attr(&args[0]) == attr(&args[1]))
        }
        other => unreachable!("catalog op `{other}` has no evaluator"),
    };
    Ok(value)
}

/// Evaluates a program graph in topological order and returns the value of
/// its single output node.
///
/// Any structural problem (cycle, arity, argument order, type mismatch,
/// non-program node) is reported as an [`ExecError`]; this function does not
/// panic on arbitrary graphs.
pub fn execute(program: &LabeledGraph, scene: &Scene) -> Answer {
    let n = program.node_count();
    if n == 0 {
        return Err(ExecError::new("empty_program"));
    }
    let nodes: Vec<_> = program.nodes().collect();
    let mut ops = Vec::with_capacity(n);
    for node in &nodes {
        match node.kind.as_clevr() {
            Some(op) => ops.push(op),
            None => return Err(ExecError::new("node_kind")),
        }
    }
    let adj = program.adjacency();
    let edges = program.edges();
    let index = |id| program.node_index(id).expect("edge endpoints exist");

    let mut indegree: Vec<usize> = adj.iter().map(|(i, _)| i.len()).collect();
    let mut queue: VecDeque<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(v) = queue.pop_front() {
        order.push(v);
        for &e in &adj[v].1 {
            let t = index(&edges[e].target);
            indegree[t] -= 1;
            if indegree[t] == 0 {
                queue.push_back(t);
            }
        }
    }
    if order.len() < n {
        return Err(ExecError::new("cycle"));
    }
    let sinks: Vec<usize> = (0..n).filter(|&i| adj[i].1.is_empty()).collect();
    if sinks.len() != 1 {
        return Err(ExecError::new("multiple_outputs"));
    }

    let mut values: Vec<Option<Value>> = vec![None; n];
    for &v in &order {
        let entry = ops[v].entry();
        let incoming = &adj[v].0;
        if incoming.len() != entry.arity {
            return Err(ExecError::new("arity"));
        }
        let mut slots: Vec<Option<&Value>> = vec![None; entry.arity];
        if entry.arity == 1 {
            slots[0] = values[index(&edges[incoming[0]].source)].as_ref();
        } else if entry.arity == 2 {
            let positions: Vec<Option<usize>> = incoming
                .iter()
                .map(|&e| arg_position(&edges[e].label).filter(|&p| p < 2))
                .collect();
            let ordered = matches!(positions.as_slice(), [Some(0), Some(1)] | [Some(1), Some(0)]);
            if ordered {
                for (&e, p) in incoming.iter().zip(&positions) {
                    slots[p.expect("checked")] = values[index(&edges[e].source)].as_ref();
                }
            } else if entry.commutative {
                for (slot, &e) in slots.iter_mut().zip(incoming) {
                    *slot = values[index(&edges[e].source)].as_ref();
                }
            } else {
                return Err(ExecError::new("arg_order"));
            }
        }
        let mut args = Vec::with_capacity(entry.arity);
        for (pos, slot) in slots.into_iter().enumerate() {
            let value = slot.expect("predecessors evaluated first");
            if Some(value.value_type()) != entry.input_type(pos) {
                return Err(ExecError::new("type"));
            }
            args.push(value.clone());
        }
        values[v] = Some(eval(ops[v], &args, scene)?);
    }
    Ok(values[sinks[0]].take().expect("sink evaluated"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::notation::{parse, Notation};

    fn scene() -> Scene {
        Scene::from_json(
            r#"{"objects":[
            {"id":0,"color":"red","shape":"cube","size":"large","material":"metal"},
            {"id":1,"color":"blue","shape":"sphere","size":"small","material":"rubber"},
            {"id":2,"color":"blue","shape":"cylinder","size":"large","material":"rubber"}],
            "relations":{"left":[[1,2],[2],[]],"right":[[],[0],[0,1]],
                         "front":[[],[],[]],"behind":[[],[],[]]}}"#,
        )
        .unwrap()
    }

    fn run(src: &str) -> Answer {
        let g = parse(src, Notation::ClevrProgram).unwrap().graph;
        execute(&g, &scene())
    }

    #[test]
    fn count_scene() {
        assert_eq!(run("a: scene()\nb: count(a)"), Ok(Value::Count(3)));
    }

    #[test]
    fn exist_on_empty_filter() {
        assert_eq!(
            run("a: scene()\nb: filter_color[green](a)\nc: exist(b)"),
            Ok(Value::Truth(false))
        );
    }

    #[test]
    fn query_unique_cube() {
        assert_eq!(
            run("a: scene()\nb: filter_shape[cube](a)\nc: unique(b)\nd: query_color(c)"),
            Ok(Value::Attr("red".into()))
        );
    }

    #[test]
    fn same_excludes_self_and_relate() {
        let same = "a: scene()\nb: filter_shape[sphere](a)\nc: unique(b)\nd: same_color(c)\ne: count(d)";
        assert_eq!(run(same), Ok(Value::Count(1)));
        let rel = "a: scene()\nb: filter_shape[cube](a)\nc: unique(b)\nd: relate[left](c)\ne: count(d)";
        assert_eq!(run(rel), Ok(Value::Count(2)));
    }

    #[test]
    fn comparison_argument_order() {
        let lt = "s: scene()\nb: filter_color[blue](s)\nr: filter_color[red](s)\n\
                  cb: count(b)\ncr: count(r)\nx: less_than(cr, cb)";
        assert_eq!(run(lt), Ok(Value::Truth(true)));
        let gt = lt.replace("less_than", "greater_than");
        assert_eq!(run(&gt), Ok(Value::Truth(false)));
    }

    #[test]
    fn structural_errors() {
        let reason = |src: &str| run(src).unwrap_err().reason;
        assert_eq!(reason("a: scene()\nb: unique(a)"), "non_unique");
        assert_eq!(reason("a: count(b)\nb: filter_color[red](a)"), "cycle");
        assert_eq!(reason("a: scene()\nb: count(a)\nc: exist(a)"), "multiple_outputs");
        assert_eq!(reason("a: scene()\nb: count(a)\nc: filter_color[red](b)"), "type");
        assert_eq!(reason("a: scene()\nb: count(a, a)"), "arity");
        assert_eq!(reason("b: count()"), "arity");
        assert_eq!(
            reason("s: scene()\na: count(s)\nc: count(s)\nx: less_than(a, _, c)"),
            "arg_order"
        );
        let mut g = LabeledGraph::new();
        g.add_node("x", crate::graph::NodeKind::Activity);
        assert_eq!(execute(&g, &scene()).unwrap_err().reason, "node_kind");
        assert_eq!(
            execute(&LabeledGraph::new(), &scene()).unwrap_err().reason,
            "empty_program"
        );
    }

    #[test]
    fn commutative_ops_tolerate_positions() {
        use crate::graph::NodeKind;
        let mut g = LabeledGraph::new();
        let s = g.add_node("scene", NodeKind::clevr("scene", None).unwrap());
        let a = g.add_node("a", NodeKind::clevr("filter_color", Some("blue")).unwrap());
        let b = g.add_node("b", NodeKind::clevr("filter_size", Some("large")).unwrap());
        let i = g.add_node("i", NodeKind::clevr("intersect", None).unwrap());
        let c = g.add_node("c", NodeKind::clevr("count", None).unwrap());
        g.add_edge(&s, &a, "0").unwrap();
        g.add_edge(&s, &b, "0").unwrap();
        g.add_edge(&a, &i, "0").unwrap();
        g.add_edge(&b, &i, "0").unwrap();
        g.add_edge(&i, &c, "0").unwrap();
        assert_eq!(execute(&g, &scene()), Ok(Value::Count(1)));
    }

    #[test]
    fn answer_equality() {
        assert!(answers_equal(&Ok(Value::Count(2)), &Ok(Value::Count(2))));
        assert!(!answers_equal(&Ok(Value::Truth(false)), &Ok(Value::Count(0))));
        assert!(answers_equal(&Err(ExecError::new("x")), &Err(ExecError::new("y"))));
        assert!(!answers_equal(&Err(ExecError::new("x")), &Ok(Value::Count(0))));
    }

    #[test]
    fn plain_answers() {
        use serde_json::json;
        assert_eq!(Value::from_plain_json(&json!(3)), Some(Value::Count(3)));
        assert_eq!(Value::from_plain_json(&json!("yes")), Some(Value::Truth(true)));
        assert_eq!(Value::from_plain_json(&json!(false)), Some(Value::Truth(false)));
        assert_eq!(Value::from_plain_json(&json!("cube")), Some(Value::Attr("cube".into())));
    }
}
