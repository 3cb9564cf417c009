mod common;

use milo::rng::SeededRng;
use milo::transport::{export_model, validate_document, validate_node, ModelDocument};
use milo::Node;
use serde_json::Value;

/// Counts nodes after checking each one is plain data: null, bool, finite
/// number, string, array or object.
fn count_data_nodes(v: &Value) -> usize {
    match v {
        Value::Null | Value::Bool(_) | Value::String(_) => 1,
        Value::Number(n) => {
            assert!(n.as_f64().is_some_and(f64::is_finite), "{n}");
            1
        }
        Value::Array(items) => 1 + items.iter().map(count_data_nodes).sum::<usize>(),
        Value::Object(m) => 1 + m.values().map(count_data_nodes).sum::<usize>(),
    }
}

#[test]
fn random_exports_are_plain_data_and_validate() {
    let mut rng = SeededRng::new(4);
    for i in 0..1000 {
        let doc = common::random_document(i, &mut rng);
        let text = doc.to_pretty_string();
        let value: Value = serde_json::from_str(&text).unwrap();
        assert!(count_data_nodes(&value) > 4);
        let report = validate_document(&ModelDocument::parse(&text).unwrap());
        assert!(report.ok, "{} {:?}", doc.model_type, report.findings);
    }
}

fn golden_with(data_field: &str, value: &str) -> String {
    let doc = export_model(&common::golden_model()).unwrap();
    let mut node = doc.to_node();
    let Node::Map(top) = &mut node else { unreachable!() };
    let Some(Node::Map(data)) = top.get_mut("data") else { unreachable!() };
    data.insert(data_field.into(), Node::String("__PLACEHOLDER__".into()));
    node.to_pretty_string().replace("\"__PLACEHOLDER__\"", value)
}

fn rejected(text: &str) -> bool {
    match Node::parse(text) {
        Ok(node) => !validate_node(&node).ok,
        Err(_) => true,
    }
}

#[test]
fn injected_executable_constructs_are_rejected() {
    let cases = [
        ("reduce", golden_with("extra", r#"{"py/reduce": [{"py/function": "os.system"}, ["id"]]}"#)),
        ("object", golden_with("coef_", r#"{"py/object": "numpy.ndarray"}"#)),
        ("file url", golden_with("extra", r#""file:///etc/passwd""#)),
        ("remote url", golden_with("extra", r#"["https://example.com/payload.bin"]"#)),
        ("yaml tag", golden_with("extra", r#""!!python/object/apply:os.system""#)),
        ("nan literal", golden_with("extra", "NaN")),
        ("infinity literal", golden_with("extra", "Infinity")),
        ("dunder", golden_with("extra", r#"{"__class__": "x"}"#)),
        ("ref", golden_with("extra", r#"{"$ref": "other.json"}"#)),
        ("deep nesting", golden_with("extra", &format!("{}{}", "[".repeat(100), "]".repeat(100)))),
        ("unknown type", common::golden_text().replace("\"LinearRegression\"", "\"os.system\"")),
        ("wrong tensor", golden_with("coef_", r#"[1.0, "2.0"]"#)),
    ];
    for (name, text) in &cases {
        assert!(rejected(text), "{name} was accepted");
    }
    assert!(!rejected(&common::golden_text()));
}

#[test]
fn findings_name_the_offending_path() {
    let text = golden_with("extra", r#"{"inner": [0, {"py/reduce": []}]}"#);
    let report = validate_node(&Node::parse(&text).unwrap());
    let errors: Vec<_> = report.errors().collect();
    assert_eq!(errors.len(), 1, "{errors:?}");
    assert!(errors[0].path.contains("extra"), "{}", errors[0].path);
}

#[test]
fn unknown_fields_only_warn() {
    let text = golden_with("comment", r#""trained on four points""#);
    let report = validate_node(&Node::parse(&text).unwrap());
    assert!(report.ok);
    assert_eq!(report.warnings().filter(|w| w.path == "data.comment").count(), 1);
}
