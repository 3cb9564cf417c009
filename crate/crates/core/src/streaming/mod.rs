//! Model streaming: an HTTP server hosting one model and a client that
//! forwards calls to it.
//!
//! Every request and response body except `GET /health` is a
//! [`SealedEnvelope`]: the inner JSON document is gzip-compressed (when
//! enabled), then encrypted with ChaCha20-Poly1305 under a pre-shared
//! 32-byte key. The receiver authenticates before it decrypts, decompresses
//! or parses anything.
//!
//! | endpoint        | inner request            | inner response            |
//! |-----------------|--------------------------|---------------------------|
//! | `GET /health`   | (none, plaintext)        | `ok protocol=1`           |
//! | `POST /predict` | `{"X": tensor}`          | `{"y": tensor}`           |
//! | `POST /call`    | `{"attribute", "args"}`  | result or acknowledgment  |
//! | `POST /upload`  | model document           | acknowledgment            |
//! | `GET /download` | (none)                   | model document            |
//!
//! Failures come back sealed as `{"error": {"kind", "message"}}` with status
//! 400 (bad request), 401 (authentication), 404 (unknown attribute or no
//! model) or 413 (payload too large).

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::node::{Node, NodeMap};

mod client;
mod envelope;
mod server;

pub use client::{client_download, client_predict, client_upload, remote_call, StreamClient};
pub use envelope::{open_payload, seal_payload, SealedEnvelope};
pub use server::{serve, serve_document, ServerHandle};

pub const PROTOCOL_VERSION: u64 = 1;
pub const KEY_ENV_VAR: &str = "MILO_STREAM_KEY";
pub const DEFAULT_MAX_PAYLOAD_BYTES: usize = 16 * 1024 * 1024;

/// Attributes a client may invoke through `/call`.
pub const CALLABLE_ATTRIBUTES: [&str; 2] = ["predict", "fit"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Compression {
    None,
    Gzip,
}

impl Compression {
    pub fn as_str(self) -> &'static str {
        match self {
            Compression::None => "none",
            Compression::Gzip => "gzip",
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            Compression::None => 0,
            Compression::Gzip => 1,
        }
    }
}

impl FromStr for Compression {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Compression::None),
            "gzip" => Ok(Compression::Gzip),
            other => Err(Error::MalformedEnvelope(format!("unknown compression `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Encryption {
    None,
    Aead,
}

impl Encryption {
    pub fn as_str(self) -> &'static str {
        match self {
            Encryption::None => "none",
            Encryption::Aead => "aead",
        }
    }
}

impl FromStr for Encryption {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Encryption::None),
            "aead" => Ok(Encryption::Aead),
            other => Err(Error::MalformedEnvelope(format!("unknown encryption `{other}`"))),
        }
    }
}

/// Pre-shared 32-byte channel key.
#[derive(Clone, PartialEq, Eq)]
pub struct StreamKey([u8; 32]);

impl StreamKey {
    pub fn from_bytes(bytes: [u8; 32]) -> Self {
        StreamKey(bytes)
    }

    pub fn from_hex(text: &str) -> Result<Self> {
        let bytes = hex::decode(text.trim()).map_err(|e| Error::InvalidKey(e.to_string()))?;
        let bytes: [u8; 32] = bytes
            .try_into()
            .map_err(|b: Vec<u8>| Error::InvalidKey(format!("stream key must be 32 bytes, got {}", b.len())))?;
        Ok(StreamKey(bytes))
    }

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }
}

impl fmt::Debug for StreamKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("StreamKey(..)")
    }
}

#[derive(Debug, Clone)]
pub struct StreamConfig {
    pub bind: String,
    pub port: u16,
    /// `None` disables encryption.
    pub key: Option<StreamKey>,
    pub compression: Compression,
    pub max_payload_bytes: usize,
    pub model_path: Option<PathBuf>,
}

impl StreamConfig {
    pub fn new(key: Option<StreamKey>) -> Self {
        StreamConfig {
            bind: "127.0.0.1".into(),
            port: 0,
            key,
            compression: Compression::Gzip,
            max_payload_bytes: DEFAULT_MAX_PAYLOAD_BYTES,
            model_path: None,
        }
    }

    pub fn with_compression(mut self, compression: Compression) -> Self {
        self.compression = compression;
        self
    }

    pub fn encryption(&self) -> Encryption {
        if self.key.is_some() {
            Encryption::Aead
        } else {
            Encryption::None
        }
    }
}

/// A forwarded attribute invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct RemoteCall {
    pub attribute: String,
    pub args: NodeMap,
}

impl RemoteCall {
    pub fn new(attribute: impl Into<String>, args: NodeMap) -> Self {
        RemoteCall {
            attribute: attribute.into(),
            args,
        }
    }

    pub fn to_node(&self) -> Node {
        let mut m = NodeMap::with_capacity(2);
        m.insert("attribute".into(), Node::String(self.attribute.clone()));
        m.insert("args".into(), Node::Map(self.args.clone()));
        Node::Map(m)
    }

    pub fn from_node(node: &Node) -> Result<Self> {
        let attribute = node
            .get("attribute")
            .and_then(Node::as_str)
            .ok_or_else(|| Error::InvalidArgs("`attribute` must be a string".into()))?;
        let args = match node.get("args") {
            None => NodeMap::new(),
            Some(Node::Map(m)) => m.clone(),
            Some(other) => {
                return Err(Error::InvalidArgs(format!("`args` must be a map, got {}", other.kind_name())))
            }
        };
        Ok(RemoteCall::new(attribute, args))
    }
}
