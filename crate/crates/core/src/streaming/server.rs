use std::net::{SocketAddr, TcpListener};
use std::sync::{Arc, RwLock};
use std::thread::JoinHandle;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, State};
use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::Router;
use tokio::sync::oneshot;

use crate::error::{Error, Result};
use crate::models::{Dataset, Model};
use crate::node::{Node, NodeMap};
use crate::tensor::{decode_tensor, encode_tensor, is_tensor_node, Tensor};
use crate::transport::{
    export_model, import_model, load_document, validate_document, ModelDocument, FORMAT_VERSION,
};

use super::{open_payload, seal_payload, RemoteCall, SealedEnvelope, StreamConfig, CALLABLE_ATTRIBUTES, PROTOCOL_VERSION};

struct Hosted {
    doc: ModelDocument,
    model: Model,
}

struct AppState {
    cfg: StreamConfig,
    // Readers clone the Arc and drop the lock at once, so a swap never waits
    // on an in-flight prediction and a prediction never sees a torn model.
    hosted: RwLock<Option<Arc<Hosted>>>,
}

impl AppState {
    fn current(&self) -> Result<Arc<Hosted>> {
        self.hosted
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .clone()
            .ok_or(Error::NoHostedModel)
    }

    fn swap(&self, next: Hosted) {
        *self.hosted.write().unwrap_or_else(|e| e.into_inner()) = Some(Arc::new(next));
    }
}

/// A running server. Dropping the handle shuts it down.
pub struct ServerHandle {
    addr: SocketAddr,
    shutdown: Option<oneshot::Sender<()>>,
    thread: Option<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Stops accepting connections, drains in-flight requests and joins the
    /// server thread.
    pub fn shutdown(mut self) {
        self.stop();
    }

    /// Blocks until the server exits.
    pub fn join(mut self) {
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }

    fn stop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        self.stop();
    }
}

fn load_hosted(doc: ModelDocument) -> Result<Hosted> {
    let report = validate_document(&doc);
    if !report.ok {
        let errors = report.errors().map(ToString::to_string).collect::<Vec<_>>();
        return Err(Error::ModelLoadFailure(errors.join("; ")));
    }
    let model = import_model(&doc).map_err(|e| Error::ModelLoadFailure(e.to_string()))?;
    Ok(Hosted { doc, model })
}

/// Starts a server for `cfg`, hosting the model at `cfg.model_path` if set.
pub fn serve(cfg: StreamConfig) -> Result<ServerHandle> {
    let doc = match &cfg.model_path {
        Some(path) => Some(load_document(path).map_err(|e| Error::ModelLoadFailure(e.to_string()))?),
        None => None,
    };
    serve_document(doc, cfg)
}

/// Starts a server hosting `doc` (or nothing, until a client uploads).
pub fn serve_document(doc: Option<ModelDocument>, cfg: StreamConfig) -> Result<ServerHandle> {
    let hosted = doc.map(load_hosted).transpose()?.map(Arc::new);
    let listener = TcpListener::bind((cfg.bind.as_str(), cfg.port))
        .map_err(|e| Error::BindFailure(format!("{}:{}: {e}", cfg.bind, cfg.port)))?;
    let addr = listener
        .local_addr()
        .map_err(|e| Error::BindFailure(e.to_string()))?;
    listener
        .set_nonblocking(true)
        .map_err(|e| Error::BindFailure(e.to_string()))?;

    // Room for base64 expansion of a maximal payload plus the frame itself.
    let body_limit = cfg.max_payload_bytes.saturating_mul(2).saturating_add(4096);
    let state = Arc::new(AppState {
        cfg,
        hosted: RwLock::new(hosted),
    });
    let app = Router::new()
        .route("/health", get(health))
        .route("/predict", post(predict))
        .route("/call", post(call))
        .route("/upload", post(upload))
        .route("/download", get(download))
        .layer(DefaultBodyLimit::max(body_limit))
        .with_state(state);

    let runtime = tokio::runtime::Builder::new_multi_thread()
        .worker_threads(2)
        .enable_all()
        .build()
        .map_err(|e| Error::BindFailure(e.to_string()))?;
    let (tx, rx) = oneshot::channel::<()>();
    let (ready_tx, ready_rx) = std::sync::mpsc::channel::<Result<()>>();
    let thread = std::thread::Builder::new()
        .name("milo-serve".into())
        .spawn(move || {
            runtime.block_on(async move {
                let listener = match tokio::net::TcpListener::from_std(listener) {
                    Ok(l) => l,
                    Err(e) => {
                        let _ = ready_tx.send(Err(Error::BindFailure(e.to_string())));
                        return;
                    }
                };
                let _ = ready_tx.send(Ok(()));
                let _ = axum::serve(listener, app)
                    .with_graceful_shutdown(async {
                        let _ = rx.await;
                    })
                    .await;
            });
        })
        .map_err(|e| Error::BindFailure(e.to_string()))?;
    ready_rx
        .recv()
        .map_err(|_| Error::BindFailure("server thread exited during startup".into()))??;
    Ok(ServerHandle {
        addr,
        shutdown: Some(tx),
        thread: Some(thread),
    })
}

fn status_for(err: &Error) -> StatusCode {
    match err {
        Error::AuthenticationFailure => StatusCode::UNAUTHORIZED,
        Error::UnknownAttribute(_) | Error::NoHostedModel => StatusCode::NOT_FOUND,
        Error::PayloadTooLarge { .. } => StatusCode::PAYLOAD_TOO_LARGE,
        Error::IoFailure { .. } | Error::TransportFailure(_) => StatusCode::INTERNAL_SERVER_ERROR,
        _ => StatusCode::BAD_REQUEST,
    }
}

fn error_body(err: &Error) -> Node {
    let mut inner = NodeMap::with_capacity(3);
    inner.insert("kind".into(), Node::String(err.kind().into()));
    inner.insert("message".into(), Node::String(err.to_string()));
    // The unformatted payload, so the client can rebuild the same error.
    let detail = match err {
        Error::UnknownAttribute(s) | Error::InvalidArgs(s) => Some(Node::String(s.clone())),
        Error::ValidationRejected(findings) => {
            Some(Node::List(findings.iter().cloned().map(Node::String).collect()))
        }
        _ => None,
    };
    if let Some(d) = detail {
        inner.insert("detail".into(), d);
    }
    let mut m = NodeMap::with_capacity(1);
    m.insert("error".into(), Node::Map(inner));
    Node::Map(m)
}

fn seal_response(cfg: &StreamConfig, status: StatusCode, body: &Node) -> (StatusCode, Vec<u8>) {
    match seal_payload(body.to_compact_string().as_bytes(), cfg) {
        Ok(env) => (status, env.to_json().into_bytes()),
        Err(e) => {
            let fallback = seal_payload(error_body(&e).to_compact_string().as_bytes(), cfg)
                .map(|env| env.to_json().into_bytes())
                .unwrap_or_else(|_| e.to_string().into_bytes());
            (status_for(&e), fallback)
        }
    }
}

fn respond(cfg: &StreamConfig, result: Result<Node>) -> (StatusCode, Vec<u8>) {
    match result {
        Ok(body) => seal_response(cfg, StatusCode::OK, &body),
        Err(e) => seal_response(cfg, status_for(&e), &error_body(&e)),
    }
}

fn open_request(cfg: &StreamConfig, body: &[u8]) -> Result<Node> {
    let env = SealedEnvelope::parse(body)?;
    let plain = open_payload(&env, cfg)?;
    Node::parse_bytes(&plain)
}

/// Accepts either an encoded tensor or a list of numeric rows.
fn tensor_arg(args: &NodeMap, name: &str, rows: bool) -> Result<Tensor> {
    let node = args
        .get(name)
        .ok_or_else(|| Error::InvalidArgs(format!("missing argument `{name}`")))?;
    if is_tensor_node(node) {
        return decode_tensor(node);
    }
    let bad = || Error::InvalidArgs(format!("`{name}` must be a tensor or a list of numbers"));
    let items = node.as_list().ok_or_else(bad)?;
    if rows {
        let parsed = items
            .iter()
            .map(|r| {
                r.as_list()
                    .ok_or_else(bad)?
                    .iter()
                    .map(|v| v.as_f64().ok_or_else(bad))
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Tensor::from_rows(&parsed)
    } else {
        let values = items
            .iter()
            .map(|v| v.as_f64().ok_or_else(bad))
            .collect::<Result<Vec<f64>>>()?;
        Ok(Tensor::vector_f64(values))
    }
}

fn predict_result(hosted: &Hosted, args: &NodeMap) -> Result<Node> {
    let x = tensor_arg(args, "X", true)?;
    let y = hosted.model.predict(&x)?;
    let mut m = NodeMap::with_capacity(1);
    m.insert("y".into(), encode_tensor(&y));
    Ok(Node::Map(m))
}

fn ack(hosted: &Hosted) -> Node {
    let mut m = NodeMap::new();
    m.insert("ack".into(), Node::Bool(true));
    m.insert("model_type".into(), Node::String(hosted.doc.model_type.clone()));
    m.insert("pymilo_version".into(), Node::String(FORMAT_VERSION.into()));
    if let Ok(p) = hosted.model.n_features_in() {
        m.insert("n_features_in_".into(), Node::Int(p as i64));
    }
    Node::Map(m)
}

fn handle_predict(state: &AppState, body: &[u8]) -> Result<Node> {
    let req = open_request(&state.cfg, body)?;
    let args = req
        .as_map()
        .ok_or_else(|| Error::InvalidArgs("request must be an object".into()))?;
    let hosted = state.current()?;
    predict_result(&hosted, args)
}

fn handle_call(state: &AppState, body: &[u8]) -> Result<Node> {
    let call = RemoteCall::from_node(&open_request(&state.cfg, body)?)?;
    if !CALLABLE_ATTRIBUTES.contains(&call.attribute.as_str()) {
        return Err(Error::UnknownAttribute(call.attribute));
    }
    let hosted = state.current()?;
    match call.attribute.as_str() {
        "predict" => predict_result(&hosted, &call.args),
        _ => {
            let x = tensor_arg(&call.args, "X", true)?;
            let y = match call.args.get("y") {
                Some(_) => Some(tensor_arg(&call.args, "y", false)?),
                None => None,
            };
            let model = hosted.model.refit(&Dataset::new(x, y)?)?;
            let next = Hosted {
                doc: export_model(&model)?,
                model,
            };
            let reply = ack(&next);
            state.swap(next);
            Ok(reply)
        }
    }
}

fn handle_upload(state: &AppState, body: &[u8]) -> Result<Node> {
    let doc = ModelDocument::from_node(&open_request(&state.cfg, body)?)?;
    let report = validate_document(&doc);
    if !report.ok {
        return Err(Error::ValidationRejected(
            report.errors().map(ToString::to_string).collect(),
        ));
    }
    let model = import_model(&doc)?;
    let next = Hosted { doc, model };
    let reply = ack(&next);
    state.swap(next);
    Ok(reply)
}

async fn blocking(
    state: Arc<AppState>,
    body: Bytes,
    f: fn(&AppState, &[u8]) -> Result<Node>,
) -> (StatusCode, Vec<u8>) {
    let task = tokio::task::spawn_blocking(move || {
        let result = f(&state, &body);
        respond(&state.cfg, result)
    });
    task.await.unwrap_or_else(|e| {
        (
            StatusCode::INTERNAL_SERVER_ERROR,
            format!("handler panicked: {e}").into_bytes(),
        )
    })
}

async fn health() -> String {
    format!("ok protocol={PROTOCOL_VERSION}")
}

async fn predict(State(state): State<Arc<AppState>>, body: Bytes) -> (StatusCode, Vec<u8>) {
    blocking(state, body, handle_predict).await
}

async fn call(State(state): State<Arc<AppState>>, body: Bytes) -> (StatusCode, Vec<u8>) {
    blocking(state, body, handle_call).await
}

async fn upload(State(state): State<Arc<AppState>>, body: Bytes) -> (StatusCode, Vec<u8>) {
    blocking(state, body, handle_upload).await
}

async fn download(State(state): State<Arc<AppState>>) -> (StatusCode, Vec<u8>) {
    let result = state.current().map(|h| h.doc.to_node());
    respond(&state.cfg, result)
}
