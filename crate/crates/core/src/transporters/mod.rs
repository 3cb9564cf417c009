//! Chain-of-responsibility serialization.
//!
//! Each [`Transporter`] claims one family of in-memory structures and
//! converts it to and from [`Node`]. A [`TransporterChain`] offers every
//! value to its members in a fixed order; the first one that claims it does
//! the work, recursing back through the chain for nested values. Chains are
//! fixed per [`ModelCategory`] and always end with the container
//! transporter; a value nobody claims is an `UnsupportedStructure` error.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::node::{Node, NodeMap};
use crate::state::{StateMap, StateValue};

mod container;
mod label_index;
mod ndarray;
mod primitive;
mod scalar;
mod tree;

pub use container::ContainerTransporter;
pub use label_index::{LabelIndexTransporter, LABEL_INDEX_TAG};
pub use ndarray::NdArrayTransporter;
pub use primitive::PrimitiveTransporter;
pub use scalar::ScalarTransporter;
pub use tree::{TreeTransporter, TREE_TAG};

pub trait Transporter: Send + Sync {
    fn name(&self) -> &'static str;

    fn can_handle(&self, value: &StateValue) -> bool;

    /// Only called when `can_handle(value)` is true.
    fn serialize(&self, value: &StateValue, chain: &TransporterChain, path: &str) -> Result<Node>;

    fn can_restore(&self, node: &Node) -> bool;

    /// Only called when `can_restore(node)` is true.
    fn deserialize(&self, node: &Node, chain: &TransporterChain, path: &str) -> Result<StateValue>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelCategory {
    LinearModel,
    DecisionTree,
    Clustering,
    NaiveBayes,
}

impl ModelCategory {
    pub const ALL: [ModelCategory; 4] = [
        ModelCategory::LinearModel,
        ModelCategory::DecisionTree,
        ModelCategory::Clustering,
        ModelCategory::NaiveBayes,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelCategory::LinearModel => "LinearModel",
            ModelCategory::DecisionTree => "DecisionTree",
            ModelCategory::Clustering => "Clustering",
            ModelCategory::NaiveBayes => "NaiveBayes",
        }
    }
}

impl fmt::Display for ModelCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelCategory {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelCategory::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::UnknownCategory(s.to_owned()))
    }
}

pub struct TransporterChain {
    category: ModelCategory,
    transporters: Vec<Box<dyn Transporter>>,
}

impl fmt::Debug for TransporterChain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TransporterChain")
            .field("category", &self.category)
            .field("transporters", &self.names())
            .finish()
    }
}

pub fn build_chain(category: ModelCategory) -> TransporterChain {
    let mut transporters: Vec<Box<dyn Transporter>> = vec![
        Box::new(PrimitiveTransporter),
        Box::new(ScalarTransporter),
        Box::new(NdArrayTransporter),
    ];
    match category {
        ModelCategory::LinearModel | ModelCategory::Clustering => {}
        ModelCategory::DecisionTree => {
            transporters.push(Box::new(TreeTransporter));
            transporters.push(Box::new(LabelIndexTransporter));
        }
        ModelCategory::NaiveBayes => transporters.push(Box::new(LabelIndexTransporter)),
    }
    transporters.push(Box::new(ContainerTransporter));
    TransporterChain {
        category,
        transporters,
    }
}

pub fn chain_serialize(chain: &TransporterChain, state: &StateMap) -> Result<Node> {
    chain.serialize_state(state)
}

pub fn chain_deserialize(chain: &TransporterChain, node: &Node) -> Result<StateMap> {
    chain.deserialize_state(node)
}

impl TransporterChain {
    pub fn category(&self) -> ModelCategory {
        self.category
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.transporters.iter().map(|t| t.name()).collect()
    }

    pub fn len(&self) -> usize {
        self.transporters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transporters.is_empty()
    }

    /// Adds a transporter ahead of the terminal container, leaving the
    /// existing members and their order untouched.
    pub fn with_transporter(mut self, transporter: Box<dyn Transporter>) -> Self {
        let at = self.transporters.len().saturating_sub(1);
        self.transporters.insert(at, transporter);
        self
    }

    /// Names of every member whose `can_handle` fires for `value`.
    pub fn claimants(&self, value: &StateValue) -> Vec<&'static str> {
        self.transporters
            .iter()
            .filter(|t| t.can_handle(value))
            .map(|t| t.name())
            .collect()
    }

    /// Names of every member whose `can_restore` fires for `node`.
    pub fn restorers(&self, node: &Node) -> Vec<&'static str> {
        self.transporters
            .iter()
            .filter(|t| t.can_restore(node))
            .map(|t| t.name())
            .collect()
    }

    pub fn serialize_value(&self, value: &StateValue, path: &str) -> Result<Node> {
        match self.transporters.iter().find(|t| t.can_handle(value)) {
            Some(t) => t.serialize(value, self, path),
            None => Err(Error::UnsupportedStructure {
                path: path.to_owned(),
                kind: value.kind_name().to_owned(),
            }),
        }
    }

    pub fn deserialize_node(&self, node: &Node, path: &str) -> Result<StateValue> {
        match self.transporters.iter().find(|t| t.can_restore(node)) {
            Some(t) => t.deserialize(node, self, path),
            None => Err(Error::UnsupportedStructure {
                path: path.to_owned(),
                kind: describe_node(node),
            }),
        }
    }

    pub fn serialize_state(&self, state: &StateMap) -> Result<Node> {
        let mut out = NodeMap::with_capacity(state.len());
        for (field, value) in state {
            out.insert(field.clone(), self.serialize_value(value, field)?);
        }
        Ok(Node::Map(out))
    }

    pub fn deserialize_state(&self, node: &Node) -> Result<StateMap> {
        let m = node
            .as_map()
            .ok_or_else(|| Error::malformed("data", format!("expected map, got {}", node.kind_name())))?;
        let mut out = StateMap::with_capacity(m.len());
        for (field, value) in m {
            out.insert(field.clone(), self.deserialize_node(value, field)?);
        }
        Ok(out)
    }
}

fn describe_node(node: &Node) -> String {
    match node.get(crate::tensor::KEY_STRUCTURE).and_then(Node::as_str) {
        Some(tag) => format!("{} tagged `{tag}`", node.kind_name()),
        None => node.kind_name().to_owned(),
    }
}

pub(crate) fn join_path(parent: &str, child: &str) -> String {
    if parent.is_empty() {
        child.to_owned()
    } else {
        format!("{parent}.{child}")
    }
}
