use crate::error::{Error, Result};
use crate::node::{Node, NodeMap};
use crate::state::{StateMap, StateValue};
use crate::tensor::{KEY_NP_TYPE, KEY_STRUCTURE, KEY_VALUE};

use super::{join_path, Transporter, TransporterChain};

/// Lists and maps. Terminal member of every chain; elements are handed back
/// to the chain so nested tensors and scalars reach their own transporters.
pub struct ContainerTransporter;

/// Maps that another transporter would claim on the way back in.
fn is_reserved_shape<'a>(mut keys: impl Iterator<Item = &'a str> + Clone) -> bool {
    let n = keys.clone().count();
    keys.clone().any(|k| k == KEY_STRUCTURE)
        || (n == 2 && keys.clone().any(|k| k == KEY_VALUE) && keys.any(|k| k == KEY_NP_TYPE))
}

impl Transporter for ContainerTransporter {
    fn name(&self) -> &'static str {
        "container"
    }

    fn can_handle(&self, value: &StateValue) -> bool {
        matches!(value, StateValue::List(_) | StateValue::Map(_))
    }

    fn serialize(&self, value: &StateValue, chain: &TransporterChain, path: &str) -> Result<Node> {
        match value {
            StateValue::List(items) => items
                .iter()
                .enumerate()
                .map(|(i, v)| chain.serialize_value(v, &format!("{path}[{i}]")))
                .collect::<Result<_>>()
                .map(Node::List),
            StateValue::Map(m) => {
                if is_reserved_shape(m.keys().map(String::as_str)) {
                    return Err(Error::UnsupportedStructure {
                        path: path.to_owned(),
                        kind: "map using reserved encoding keys".into(),
                    });
                }
                let mut out = NodeMap::with_capacity(m.len());
                for (k, v) in m {
                    out.insert(k.clone(), chain.serialize_value(v, &join_path(path, k))?);
                }
                Ok(Node::Map(out))
            }
            _ => unreachable!("container transporter offered {}", value.kind_name()),
        }
    }

    fn can_restore(&self, node: &Node) -> bool {
        match node {
            Node::List(_) => true,
            Node::Map(m) => !is_reserved_shape(m.keys().map(String::as_str)),
            _ => false,
        }
    }

    fn deserialize(&self, node: &Node, chain: &TransporterChain, path: &str) -> Result<StateValue> {
        match node {
            Node::List(items) => items
                .iter()
                .enumerate()
                .map(|(i, n)| chain.deserialize_node(n, &format!("{path}[{i}]")))
                .collect::<Result<_>>()
                .map(StateValue::List),
            Node::Map(m) => {
                let mut out = StateMap::with_capacity(m.len());
                for (k, v) in m {
                    out.insert(k.clone(), chain.deserialize_node(v, &join_path(path, k))?);
                }
                Ok(StateValue::Map(out))
            }
            _ => unreachable!("container transporter offered {}", node.kind_name()),
        }
    }
}
