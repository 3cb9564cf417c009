use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the library can report.
///
/// The variant name (see [`Error::kind`]) doubles as the `kind` string of
/// streaming error responses and maps onto the FFI status codes.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    // tensor codec
    #[error("missing key `{0}`")]
    MissingKey(String),
    #[error("unknown dtype `{0}`")]
    DTypeUnknown(String),
    #[error("shape {shape:?} implies {expected} elements but the list holds {actual}")]
    ShapeMismatch {
        shape: Vec<usize>,
        expected: usize,
        actual: usize,
    },
    #[error("unknown type tag `{0}`")]
    UnknownTypeTag(String),
    #[error("malformed node at `{path}`: {message}")]
    MalformedNode { path: String, message: String },

    // transporters
    #[error("unknown model category `{0}`")]
    UnknownCategory(String),
    #[error("no transporter handles `{path}` ({kind})")]
    UnsupportedStructure { path: String, kind: String },

    // models
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("expected exactly 2 distinct labels, found {0}")]
    NotBinary(usize),
    #[error("class {0} has no samples")]
    EmptyClass(i64),
    #[error("need at least {k} samples for {k} clusters, got {n}")]
    TooFewSamples { n: usize, k: usize },
    #[error("model expects {expected} features, got {actual}")]
    FeatureCountMismatch { expected: usize, actual: usize },
    #[error("model is not fitted")]
    NotFitted,
    #[error("unknown model type `{0}`")]
    UnknownModelType(String),
    #[error("missing field `{0}`")]
    MissingField(String),
    #[error("invariant violated in `{field}`: {message}")]
    InvariantViolation { field: String, message: String },

    // documents
    #[error("i/o failure on {path}: {source}")]
    IoFailure {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse failure: {0}")]
    ParseFailure(String),
    #[error("missing envelope key `{0}`")]
    MissingEnvelopeKey(String),
    #[error("version mismatch: {0}")]
    VersionMismatch(String),
    #[error("invalid key: {0}")]
    InvalidKey(String),
    #[error("malformed envelope: {0}")]
    MalformedEnvelope(String),

    // streaming
    #[error("payload of {size} bytes exceeds the {limit} byte limit")]
    PayloadTooLarge { size: usize, limit: usize },
    #[error("authentication failed")]
    AuthenticationFailure,
    #[error("decompression failed: {0}")]
    DecompressionFailure(String),
    #[error("unsupported protocol version {0}")]
    UnsupportedVersion(u64),
    #[error("cannot bind {0}")]
    BindFailure(String),
    #[error("cannot load hosted model: {0}")]
    ModelLoadFailure(String),
    #[error("transport failure: {0}")]
    TransportFailure(String),
    #[error("remote error {kind}: {message}")]
    RemoteError { kind: String, message: String },
    #[error("attribute `{0}` is not callable on the hosted model")]
    UnknownAttribute(String),
    #[error("invalid call arguments: {0}")]
    InvalidArgs(String),
    #[error("document rejected by validation: {}", .0.join("; "))]
    ValidationRejected(Vec<String>),
    #[error("server hosts no model")]
    NoHostedModel,
    #[error("configuration error: {0}")]
    Config(String),

    // harness
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("metric undefined: {0}")]
    UndefinedMetric(String),
    #[error("csv error: {0}")]
    Csv(String),
}

impl Error {
    pub fn kind(&self) -> &'static str {
        match self {
            Error::MissingKey(_) => "MissingKey",
            Error::DTypeUnknown(_) => "DTypeUnknown",
            Error::ShapeMismatch { .. } => "ShapeMismatch",
            Error::UnknownTypeTag(_) => "UnknownTypeTag",
            Error::MalformedNode { .. } => "MalformedNode",
            Error::UnknownCategory(_) => "UnknownCategory",
            Error::UnsupportedStructure { .. } => "UnsupportedStructure",
            Error::EmptyDataset => "EmptyDataset",
            Error::DimensionMismatch(_) => "DimensionMismatch",
            Error::NotBinary(_) => "NotBinary",
            Error::EmptyClass(_) => "EmptyClass",
            Error::TooFewSamples { .. } => "TooFewSamples",
            Error::FeatureCountMismatch { .. } => "FeatureCountMismatch",
            Error::NotFitted => "NotFitted",
            Error::UnknownModelType(_) => "UnknownModelType",
            Error::MissingField(_) => "MissingField",
            Error::InvariantViolation { .. } => "InvariantViolation",
            Error::IoFailure { .. } => "IoFailure",
            Error::ParseFailure(_) => "ParseFailure",
            Error::MissingEnvelopeKey(_) => "MissingEnvelopeKey",
            Error::VersionMismatch(_) => "VersionMismatch",
            Error::InvalidKey(_) => "InvalidKey",
            Error::MalformedEnvelope(_) => "MalformedEnvelope",
            Error::PayloadTooLarge { .. } => "PayloadTooLarge",
            Error::AuthenticationFailure => "AuthenticationFailure",
            Error::DecompressionFailure(_) => "DecompressionFailure",
            Error::UnsupportedVersion(_) => "UnsupportedVersion",
            Error::BindFailure(_) => "BindFailure",
            Error::ModelLoadFailure(_) => "ModelLoadFailure",
            Error::TransportFailure(_) => "TransportFailure",
            Error::RemoteError { .. } => "RemoteError",
            Error::UnknownAttribute(_) => "UnknownAttribute",
            Error::InvalidArgs(_) => "InvalidArgs",
            Error::ValidationRejected(_) => "ValidationRejected",
            Error::NoHostedModel => "NoHostedModel",
            Error::Config(_) => "Config",
            Error::LengthMismatch(..) => "LengthMismatch",
            Error::UndefinedMetric(_) => "UndefinedMetric",
            Error::Csv(_) => "Csv",
        }
    }

    pub(crate) fn invariant(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::InvariantViolation {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn malformed(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::MalformedNode {
            path: path.into(),
            message: message.into(),
        }
    }
}
