use std::time::Duration;

use reqwest::blocking::Client;
use reqwest::StatusCode;

use crate::error::{Error, Result};
use crate::node::{Node, NodeMap};
use crate::tensor::{decode_tensor, encode_tensor, Tensor};
use crate::transport::ModelDocument;

use super::{open_payload, seal_payload, RemoteCall, SealedEnvelope, StreamConfig};

/// Blocking client for a model server. Do not use from inside an async
/// runtime.
#[derive(Debug, Clone)]
pub struct StreamClient {
    base: String,
    cfg: StreamConfig,
    http: Client,
}

impl StreamClient {
    /// `base` is the server root, e.g. `http://127.0.0.1:8000`.
    pub fn new(base: impl Into<String>, cfg: StreamConfig) -> Result<Self> {
        let http = Client::builder()
            .timeout(Duration::from_secs(60))
            .build()
            .map_err(|e| Error::TransportFailure(e.to_string()))?;
        Ok(StreamClient {
            base: base.into().trim_end_matches('/').to_owned(),
            cfg,
            http,
        })
    }

    pub fn config(&self) -> &StreamConfig {
        &self.cfg
    }

    fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }

    pub fn health(&self) -> Result<String> {
        let resp = self
            .http
            .get(self.url("/health"))
            .send()
            .map_err(|e| Error::TransportFailure(e.to_string()))?;
        resp.text().map_err(|e| Error::TransportFailure(e.to_string()))
    }

    fn exchange(&self, req: reqwest::blocking::RequestBuilder) -> Result<Node> {
        let resp = req.send().map_err(|e| Error::TransportFailure(e.to_string()))?;
        let status = resp.status();
        let bytes = resp.bytes().map_err(|e| Error::TransportFailure(e.to_string()))?;
        let env = match SealedEnvelope::parse(&bytes) {
            Ok(env) => env,
            Err(_) if status == StatusCode::PAYLOAD_TOO_LARGE => {
                return Err(Error::PayloadTooLarge {
                    size: 0,
                    limit: self.cfg.max_payload_bytes,
                })
            }
            Err(_) => {
                return Err(Error::TransportFailure(format!(
                    "{status}: {}",
                    String::from_utf8_lossy(&bytes)
                )))
            }
        };
        let body = Node::parse_bytes(&open_payload(&env, &self.cfg)?)?;
        if status.is_success() {
            return Ok(body);
        }
        Err(remote_error(status, &body))
    }

    fn post(&self, path: &str, body: &Node) -> Result<Node> {
        let env = seal_payload(body.to_compact_string().as_bytes(), &self.cfg)?;
        self.exchange(
            self.http
                .post(self.url(path))
                .header("content-type", "application/json")
                .body(env.to_json()),
        )
    }

    pub fn predict(&self, x: &Tensor) -> Result<Tensor> {
        let mut m = NodeMap::with_capacity(1);
        m.insert("X".into(), encode_tensor(x));
        let reply = self.post("/predict", &Node::Map(m))?;
        let y = reply
            .get("y")
            .ok_or_else(|| Error::TransportFailure("response has no `y`".into()))?;
        decode_tensor(y)
    }

    pub fn call(&self, call: &RemoteCall) -> Result<Node> {
        self.post("/call", &call.to_node())
    }

    pub fn upload(&self, doc: &ModelDocument) -> Result<Node> {
        self.post("/upload", &doc.to_node())
    }

    pub fn download(&self) -> Result<ModelDocument> {
        let node = self.exchange(self.http.get(self.url("/download")))?;
        ModelDocument::from_node(&node)
    }
}

fn remote_error(status: StatusCode, body: &Node) -> Error {
    let error = body.get("error");
    let field = |k: &str| {
        error
            .and_then(|e| e.get(k))
            .and_then(Node::as_str)
            .unwrap_or_default()
            .to_owned()
    };
    let (kind, message) = (field("kind"), field("message"));
    let detail = error.and_then(|e| e.get("detail"));
    let detail_text = || detail.and_then(Node::as_str).map_or_else(|| message.clone(), str::to_owned);
    match kind.as_str() {
        "AuthenticationFailure" => Error::AuthenticationFailure,
        "NoHostedModel" => Error::NoHostedModel,
        "UnknownAttribute" => Error::UnknownAttribute(detail_text()),
        "InvalidArgs" => Error::InvalidArgs(detail_text()),
        "ValidationRejected" => Error::ValidationRejected(match detail.and_then(Node::as_list) {
            Some(items) => items.iter().filter_map(Node::as_str).map(str::to_owned).collect(),
            None => vec![message],
        }),
        "" => Error::TransportFailure(format!("{status} without an error body")),
        _ => Error::RemoteError { kind, message },
    }
}

pub fn client_predict(client: &StreamClient, x: &Tensor) -> Result<Tensor> {
    client.predict(x)
}

pub fn remote_call(client: &StreamClient, call: &RemoteCall) -> Result<Node> {
    client.call(call)
}

pub fn client_upload(client: &StreamClient, doc: &ModelDocument) -> Result<Node> {
    client.upload(doc)
}

pub fn client_download(client: &StreamClient) -> Result<ModelDocument> {
    client.download()
}
