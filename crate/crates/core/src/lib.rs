//! Transparent, non-executable model files.
//!
//! Models are trained natively ([`models`]), their learned state is turned
//! into a pure-data JSON tree by a chain of transporters ([`transporters`]),
//! wrapped in a versioned document ([`transport`]), and can be served to
//! remote clients over a compressed, authenticated-encrypted channel
//! ([`streaming`]). [`harness`] holds the CSV plumbing, metrics, and the
//! export/import round-trip quality check.

pub mod error;
pub mod harness;
pub mod models;
pub mod node;
pub mod rng;
pub mod state;
pub mod streaming;
pub mod tensor;
pub mod transport;
pub mod transporters;

pub use error::{Error, Result};
pub use models::{Dataset, Model};
pub use node::Node;
pub use tensor::{Tensor, TypedScalar};
pub use transport::ModelDocument;
