use std::fmt;

use crate::error::Error;
use crate::models::{category_of, Model};
use crate::node::Node;
use crate::state::StateMap;
use crate::transporters::build_chain;

use super::{version_warnings, ModelDocument, ENVELOPE_KEYS, KEY_DATA, KEY_MODEL_TYPE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Severity {
    Warning,
    Error,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Warning => "warning",
            Severity::Error => "error",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Finding {
    pub severity: Severity,
    pub path: String,
    pub message: String,
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}: {}", self.severity, self.path, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub ok: bool,
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn errors(&self) -> impl Iterator<Item = &Finding> {
        self.findings.iter().filter(|f| f.severity == Severity::Error)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &Finding> {
        self.findings.iter().filter(|f| f.severity == Severity::Warning)
    }
}

/// Map keys that serializers for executable formats use to smuggle in
/// object construction or references.
const EXECUTABLE_KEYS: &[&str] = &[
    "py/object",
    "py/reduce",
    "py/function",
    "py/type",
    "py/newargs",
    "py/state",
    "py/id",
    "py/ref",
    "__reduce__",
    "__reduce_ex__",
    "__class__",
    "__import__",
    "__builtins__",
    "$ref",
    "$include",
    "@import",
];

/// String prefixes that name code, a file, or a network resource.
const RESOURCE_PREFIXES: &[&str] = &[
    "!!python/",
    "file:",
    "http:",
    "https:",
    "ftp:",
    "data:",
    "javascript:",
    "jar:",
    "ldap:",
    "\\\\",
];

const MAX_DEPTH: usize = 64;

struct Collector(Vec<Finding>);

impl Collector {
    fn error(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.0.push(Finding {
            severity: Severity::Error,
            path: path.into(),
            message: message.into(),
        });
    }

    fn warn(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.0.push(Finding {
            severity: Severity::Warning,
            path: path.into(),
            message: message.into(),
        });
    }
}

fn depth(node: &Node) -> usize {
    match node {
        Node::List(items) => 1 + items.iter().map(depth).max().unwrap_or(0),
        Node::Map(m) => 1 + m.values().map(depth).max().unwrap_or(0),
        _ => 0,
    }
}

fn scan_inert(node: &Node, out: &mut Collector) {
    if depth(node) > MAX_DEPTH {
        out.error("", format!("nesting deeper than {MAX_DEPTH} levels"));
        return;
    }
    node.walk("", &mut |path, n| match n {
        Node::Map(m) => {
            for k in m.keys() {
                if EXECUTABLE_KEYS.contains(&k.as_str()) {
                    out.error(path, format!("key `{k}` denotes executable content"));
                }
            }
        }
        Node::String(s) => {
            let lower = s.trim_start().to_ascii_lowercase();
            if let Some(p) = RESOURCE_PREFIXES.iter().find(|p| lower.starts_with(*p)) {
                out.error(path, format!("string names an external resource or code (`{p}`)"));
            }
        }
        Node::Float(f) if !f.is_finite() => out.error(path, "non-finite float literal"),
        _ => {}
    });
}

fn field_of(err: &Error) -> Option<&str> {
    match err {
        Error::MissingField(f) => Some(f),
        Error::InvariantViolation { field, .. } => Some(field),
        _ => None,
    }
}

/// Validates an already parsed document.
pub fn validate_document(doc: &ModelDocument) -> ValidationReport {
    validate_node(&doc.to_node())
}

/// Validates a raw document tree; never fails, every problem is a finding.
pub fn validate_node(root: &Node) -> ValidationReport {
    let mut out = Collector(Vec::new());
    scan_inert(root, &mut out);

    let Some(top) = root.as_map() else {
        out.error("", format!("document must be an object, got {}", root.kind_name()));
        return finish(out);
    };
    for key in ENVELOPE_KEYS {
        match top.get(key) {
            None => out.error(key, "missing envelope key"),
            Some(Node::String(_)) if key != KEY_DATA => {}
            Some(Node::Map(_)) if key == KEY_DATA => {}
            Some(other) => out.error(key, format!("unexpected {}", other.kind_name())),
        }
    }
    for k in top.keys().filter(|k| !ENVELOPE_KEYS.contains(&k.as_str())) {
        out.warn(k.as_str(), "unknown envelope key");
    }
    if let (Some(Node::String(v)), Some(Node::String(f))) =
        (top.get(super::KEY_MODEL_LAYER_VERSION), top.get(super::KEY_FORMAT_VERSION))
    {
        for w in version_warnings(v, f) {
            out.warn("", w);
        }
    }

    let model_type = top.get(KEY_MODEL_TYPE).and_then(Node::as_str);
    let data = top.get(KEY_DATA).and_then(Node::as_map);
    let (Some(model_type), Some(data)) = (model_type, data) else {
        return finish(out);
    };
    let category = match category_of(model_type) {
        Ok(c) => c,
        Err(_) => {
            out.error(KEY_MODEL_TYPE, format!("unregistered model type `{model_type}`"));
            return finish(out);
        }
    };
    let required = Model::required_fields(model_type).expect("registered type");
    for field in required.iter().filter(|f| !data.contains_key(**f)) {
        out.error(format!("data.{field}"), "missing required field");
    }
    for field in data.keys().filter(|k| !required.contains(&k.as_str())) {
        out.warn(format!("data.{field}"), "unknown field, ignored on import");
    }

    let chain = build_chain(category);
    let mut state = StateMap::with_capacity(data.len());
    let mut decoded = true;
    for (field, value) in data {
        match chain.deserialize_node(value, field) {
            Ok(v) => {
                state.insert(field.clone(), v);
            }
            Err(e) => {
                decoded = false;
                out.error(format!("data.{field}"), e.to_string());
            }
        }
    }
    let complete = required.iter().all(|f| data.contains_key(*f));
    if decoded && complete {
        if let Err(e) = Model::restore_state(model_type, &state) {
            let path = field_of(&e).map_or_else(|| KEY_DATA.to_owned(), |f| format!("data.{f}"));
            out.error(path, e.to_string());
        }
    }
    finish(out)
}

fn finish(out: Collector) -> ValidationReport {
    let ok = !out.0.iter().any(|f| f.severity == Severity::Error);
    ValidationReport { ok, findings: out.0 }
}
