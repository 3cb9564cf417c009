//! The pure-data document tree.
//!
//! [`Node`] is the only thing that is ever written to disk or sent over the
//! wire. It has no variant that can carry code, an object reference, or an
//! external resource, so anything decoded into it is inert data.

use indexmap::IndexMap;
use serde_json::{Map as JsonMap, Number, Value};

use crate::error::{Error, Result};

pub const NAN_SENTINEL: &str = "nan";
pub const INF_SENTINEL: &str = "inf";
pub const NEG_INF_SENTINEL: &str = "-inf";

pub type NodeMap = IndexMap<String, Node>;

#[derive(Debug, Clone)]
pub enum Node {
    Null,
    Bool(bool),
    Int(i64),
    Float(f64),
    String(String),
    List(Vec<Node>),
    /// Insertion-ordered; order is what the pretty file rendering shows.
    Map(NodeMap),
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Node::Null, Node::Null) => true,
            (Node::Bool(a), Node::Bool(b)) => a == b,
            (Node::Int(a), Node::Int(b)) => a == b,
            (Node::Float(a), Node::Float(b)) => a.to_bits() == b.to_bits(),
            (Node::String(a), Node::String(b)) => a == b,
            (Node::List(a), Node::List(b)) => a == b,
            // order-sensitive: two maps with the same entries in a different
            // order render to different files
            (Node::Map(a), Node::Map(b)) => {
                a.len() == b.len() && a.iter().zip(b.iter()).all(|(x, y)| x == y)
            }
            _ => false,
        }
    }
}

impl Node {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Node::Null => "null",
            Node::Bool(_) => "bool",
            Node::Int(_) => "int",
            Node::Float(_) => "float",
            Node::String(_) => "string",
            Node::List(_) => "list",
            Node::Map(_) => "map",
        }
    }

    pub fn as_map(&self) -> Option<&NodeMap> {
        match self {
            Node::Map(m) => Some(m),
            _ => None,
        }
    }

    pub fn as_list(&self) -> Option<&[Node]> {
        match self {
            Node::List(l) => Some(l),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Node::String(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_i64(&self) -> Option<i64> {
        match self {
            Node::Int(i) => Some(*i),
            _ => None,
        }
    }

    /// Numeric view: ints widen, the non-finite string sentinels decode.
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Node::Float(f) => Some(*f),
            Node::Int(i) => Some(*i as f64),
            Node::String(s) => sentinel_to_f64(s),
            _ => None,
        }
    }

    pub fn get(&self, key: &str) -> Option<&Node> {
        self.as_map().and_then(|m| m.get(key))
    }

    /// Visits every node depth first, passing a dotted path.
    pub fn walk<F: FnMut(&str, &Node)>(&self, root: &str, f: &mut F) {
        f(root, self);
        match self {
            Node::List(items) => {
                for (i, item) in items.iter().enumerate() {
                    item.walk(&format!("{root}[{i}]"), f);
                }
            }
            Node::Map(m) => {
                for (k, v) in m {
                    let path = if root.is_empty() {
                        k.clone()
                    } else {
                        format!("{root}.{k}")
                    };
                    v.walk(&path, f);
                }
            }
            _ => {}
        }
    }

    pub fn parse(text: &str) -> Result<Node> {
        let value: Value =
            serde_json::from_str(text).map_err(|e| Error::ParseFailure(e.to_string()))?;
        Node::from_json(value)
    }

    pub fn parse_bytes(bytes: &[u8]) -> Result<Node> {
        let value: Value =
            serde_json::from_slice(bytes).map_err(|e| Error::ParseFailure(e.to_string()))?;
        Node::from_json(value)
    }

    pub fn from_json(value: Value) -> Result<Node> {
        Ok(match value {
            Value::Null => Node::Null,
            Value::Bool(b) => Node::Bool(b),
            Value::Number(n) => {
                if let Some(i) = n.as_i64() {
                    Node::Int(i)
                } else if n.is_u64() {
                    return Err(Error::ParseFailure(format!(
                        "integer {n} does not fit in 64-bit signed range"
                    )));
                } else {
                    Node::Float(n.as_f64().expect("json number is f64"))
                }
            }
            Value::String(s) => Node::String(s),
            Value::Array(items) => Node::List(
                items
                    .into_iter()
                    .map(Node::from_json)
                    .collect::<Result<_>>()?,
            ),
            Value::Object(obj) => {
                let mut m = NodeMap::with_capacity(obj.len());
                for (k, v) in obj {
                    m.insert(k, Node::from_json(v)?);
                }
                Node::Map(m)
            }
        })
    }

    pub fn to_json(&self) -> Value {
        self.to_json_with(false)
    }

    fn to_json_with(&self, sorted: bool) -> Value {
        match self {
            Node::Null => Value::Null,
            Node::Bool(b) => Value::Bool(*b),
            Node::Int(i) => Value::Number((*i).into()),
            Node::Float(f) => float_to_json(*f),
            Node::String(s) => Value::String(s.clone()),
            Node::List(items) => {
                Value::Array(items.iter().map(|n| n.to_json_with(sorted)).collect())
            }
            Node::Map(m) => {
                let mut obj = JsonMap::with_capacity(m.len());
                if sorted {
                    let mut keys: Vec<&String> = m.keys().collect();
                    keys.sort();
                    for k in keys {
                        obj.insert(k.clone(), m[k].to_json_with(true));
                    }
                } else {
                    for (k, v) in m {
                        obj.insert(k.clone(), v.to_json_with(false));
                    }
                }
                Value::Object(obj)
            }
        }
    }

    /// Human-readable file rendering: 2-space indent, insertion order.
    pub fn to_pretty_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_json()).expect("node renders to json")
    }

    pub fn to_compact_string(&self) -> String {
        serde_json::to_string(&self.to_json()).expect("node renders to json")
    }

    /// Deterministic encoding used for signing and hashing: keys sorted
    /// bytewise at every level, no whitespace, shortest round-trip floats.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        serde_json::to_vec(&self.to_json_with(true)).expect("node renders to json")
    }
}

fn float_to_json(f: f64) -> Value {
    match Number::from_f64(f) {
        Some(n) => Value::Number(n),
        None => Value::String(f64_sentinel(f).to_owned()),
    }
}

pub(crate) fn f64_sentinel(f: f64) -> &'static str {
    if f.is_nan() {
        NAN_SENTINEL
    } else if f > 0.0 {
        INF_SENTINEL
    } else {
        NEG_INF_SENTINEL
    }
}

pub(crate) fn sentinel_to_f64(s: &str) -> Option<f64> {
    match s {
        NAN_SENTINEL => Some(f64::NAN),
        INF_SENTINEL => Some(f64::INFINITY),
        NEG_INF_SENTINEL => Some(f64::NEG_INFINITY),
        _ => None,
    }
}

impl From<bool> for Node {
    fn from(b: bool) -> Self {
        Node::Bool(b)
    }
}

impl From<i64> for Node {
    fn from(i: i64) -> Self {
        Node::Int(i)
    }
}

impl From<f64> for Node {
    fn from(f: f64) -> Self {
        Node::Float(f)
    }
}

impl From<&str> for Node {
    fn from(s: &str) -> Self {
        Node::String(s.to_owned())
    }
}

impl From<String> for Node {
    fn from(s: String) -> Self {
        Node::String(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_sorts_keys_and_drops_whitespace() {
        let mut m = NodeMap::new();
        m.insert("b".into(), Node::Int(1));
        m.insert("a".into(), Node::Int(2));
        assert_eq!(Node::Map(m).canonical_bytes(), br#"{"a":2,"b":1}"#.to_vec());
    }

    #[test]
    fn float_renders_shortest_round_trip() {
        assert_eq!(Node::Float(1.9999999999999993).to_compact_string(), "1.9999999999999993");
        assert_eq!(Node::Float(3.0000000000000018).to_compact_string(), "3.0000000000000018");
        assert_eq!(Node::Float(1.0).to_compact_string(), "1.0");
    }

    #[test]
    fn int_and_float_stay_distinct_through_text() {
        let n = Node::parse("[1, 1.0, -0.0]").unwrap();
        assert_eq!(
            n,
            Node::List(vec![Node::Int(1), Node::Float(1.0), Node::Float(-0.0)])
        );
    }

    #[test]
    fn non_finite_floats_render_as_sentinels() {
        let n = Node::List(vec![Node::Float(f64::NAN), Node::Float(f64::NEG_INFINITY)]);
        assert_eq!(n.to_compact_string(), r#"["nan","-inf"]"#);
    }

    #[test]
    fn oversized_integer_is_a_parse_failure() {
        assert!(matches!(
            Node::parse("18446744073709551615"),
            Err(Error::ParseFailure(_))
        ));
    }

    #[test]
    fn truncated_text_is_a_parse_failure() {
        assert!(matches!(Node::parse(r#"{"a": [1, 2"#), Err(Error::ParseFailure(_))));
    }

    #[test]
    fn pretty_rendering_uses_two_space_indent() {
        let n = Node::parse(r#"{"k":[2]}"#).unwrap();
        assert_eq!(n.to_pretty_string(), "{\n  \"k\": [\n    2\n  ]\n}");
    }
}
