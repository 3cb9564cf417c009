//! Export/import API: the versioned document envelope, model files,
//! validation, and publisher signatures.
//!
//! A model file looks like
//!
//! ```json
//! {
//!   "data": { ...serialized model state... },
//!   "sklearn_version": "0.1.0",
//!   "pymilo_version": "1.1",
//!   "model_type": "LinearRegression"
//! }
//! ```
//!
//! The envelope key names are kept for compatibility with existing files;
//! `sklearn_version` carries the version of this crate's modeling layer.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::models::{category_of, Model};
use crate::node::{Node, NodeMap};
use crate::transporters::build_chain;

mod signing;
mod validate;

pub use signing::{
    fingerprint, generate_signing_key, sign_document, signing_key_from_hex, verify_document,
    verifying_key_from_hex, SignedEnvelope, SIGNATURE_SCHEME,
};
pub use validate::{validate_document, validate_node, Finding, Severity, ValidationReport};

/// Version of the file format written into `pymilo_version`.
pub const FORMAT_VERSION: &str = "1.1";
/// Version of the modeling layer written into `sklearn_version`.
pub const MODEL_LAYER_VERSION: &str = env!("CARGO_PKG_VERSION");

pub const KEY_DATA: &str = "data";
pub const KEY_MODEL_LAYER_VERSION: &str = "sklearn_version";
pub const KEY_FORMAT_VERSION: &str = "pymilo_version";
pub const KEY_MODEL_TYPE: &str = "model_type";
pub const ENVELOPE_KEYS: [&str; 4] = [KEY_DATA, KEY_MODEL_LAYER_VERSION, KEY_FORMAT_VERSION, KEY_MODEL_TYPE];

#[derive(Debug, Clone, PartialEq)]
pub struct ModelDocument {
    pub data: Node,
    pub sklearn_version: String,
    pub pymilo_version: String,
    pub model_type: String,
    /// Unrecognised top-level keys, preserved in file order.
    pub extra: NodeMap,
}

impl ModelDocument {
    pub fn to_node(&self) -> Node {
        let mut m = NodeMap::with_capacity(4 + self.extra.len());
        m.insert(KEY_DATA.into(), self.data.clone());
        m.insert(KEY_MODEL_LAYER_VERSION.into(), Node::String(self.sklearn_version.clone()));
        m.insert(KEY_FORMAT_VERSION.into(), Node::String(self.pymilo_version.clone()));
        m.insert(KEY_MODEL_TYPE.into(), Node::String(self.model_type.clone()));
        for (k, v) in &self.extra {
            m.insert(k.clone(), v.clone());
        }
        Node::Map(m)
    }

    pub fn from_node(node: &Node) -> Result<ModelDocument> {
        let m = node
            .as_map()
            .ok_or_else(|| Error::ParseFailure(format!("document must be an object, got {}", node.kind_name())))?;
        let get = |key: &str| m.get(key).ok_or_else(|| Error::MissingEnvelopeKey(key.to_owned()));
        let string = |key: &str| -> Result<String> {
            get(key)?
                .as_str()
                .map(str::to_owned)
                .ok_or_else(|| Error::ParseFailure(format!("`{key}` must be a string")))
        };
        let data = get(KEY_DATA)?.clone();
        if data.as_map().is_none() {
            return Err(Error::ParseFailure("`data` must be an object".into()));
        }
        let extra = m
            .iter()
            .filter(|(k, _)| !ENVELOPE_KEYS.contains(&k.as_str()))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        Ok(ModelDocument {
            data,
            sklearn_version: string(KEY_MODEL_LAYER_VERSION)?,
            pymilo_version: string(KEY_FORMAT_VERSION)?,
            model_type: string(KEY_MODEL_TYPE)?,
            extra,
        })
    }

    pub fn parse(text: &str) -> Result<ModelDocument> {
        ModelDocument::from_node(&Node::parse(text)?)
    }

    /// The on-disk rendering: 2-space indent, envelope keys in file order.
    pub fn to_pretty_string(&self) -> String {
        self.to_node().to_pretty_string()
    }

    pub fn canonical_bytes(&self) -> Vec<u8> {
        self.to_node().canonical_bytes()
    }
}

pub fn export_model(model: &Model) -> Result<ModelDocument> {
    let state = model.extract_state()?;
    let chain = build_chain(model.category());
    Ok(ModelDocument {
        data: chain.serialize_state(&state)?,
        sklearn_version: MODEL_LAYER_VERSION.to_owned(),
        pymilo_version: FORMAT_VERSION.to_owned(),
        model_type: model.model_type().to_owned(),
        extra: NodeMap::new(),
    })
}

pub fn save_document(doc: &ModelDocument, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = doc.to_pretty_string();
    text.push('\n');
    fs::write(path, text).map_err(|source| Error::IoFailure {
        path: path.to_owned(),
        source,
    })
}

pub fn load_document(path: impl AsRef<Path>) -> Result<ModelDocument> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::IoFailure {
        path: path.to_owned(),
        source,
    })?;
    ModelDocument::parse(&text)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ImportOptions {
    /// Treat version mismatches as errors instead of warnings.
    pub strict_versions: bool,
}

#[derive(Debug, Clone)]
pub struct Imported {
    pub model: Model,
    pub warnings: Vec<String>,
}

pub(crate) fn version_warnings(sklearn_version: &str, pymilo_version: &str) -> Vec<String> {
    let mut w = Vec::new();
    if pymilo_version != FORMAT_VERSION {
        w.push(format!(
            "{KEY_FORMAT_VERSION} is `{pymilo_version}`, this reader writes `{FORMAT_VERSION}`"
        ));
    }
    if sklearn_version != MODEL_LAYER_VERSION {
        w.push(format!(
            "{KEY_MODEL_LAYER_VERSION} is `{sklearn_version}`, this reader's modeling layer is `{MODEL_LAYER_VERSION}`"
        ));
    }
    w
}

pub fn import_model_with(doc: &ModelDocument, opts: ImportOptions) -> Result<Imported> {
    let warnings = version_warnings(&doc.sklearn_version, &doc.pymilo_version);
    if opts.strict_versions && !warnings.is_empty() {
        return Err(Error::VersionMismatch(warnings.join("; ")));
    }
    let chain = build_chain(category_of(&doc.model_type)?);
    let state = chain.deserialize_state(&doc.data)?;
    let model = Model::restore_state(&doc.model_type, &state)?;
    Ok(Imported { model, warnings })
}

/// Lenient import: version mismatches are tolerated.
pub fn import_model(doc: &ModelDocument) -> Result<Model> {
    import_model_with(doc, ImportOptions::default()).map(|i| i.model)
}
