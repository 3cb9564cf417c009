use crate::error::Result;
use crate::node::Node;
use crate::state::StateValue;
use crate::tensor::{decode_tensor_at, encode_tensor, is_tensor_node};

use super::{Transporter, TransporterChain};

pub struct NdArrayTransporter;

impl Transporter for NdArrayTransporter {
    fn name(&self) -> &'static str {
        "ndarray"
    }

    fn can_handle(&self, value: &StateValue) -> bool {
        matches!(value, StateValue::Tensor(_))
    }

    fn serialize(&self, value: &StateValue, _: &TransporterChain, _: &str) -> Result<Node> {
        match value {
            StateValue::Tensor(t) => Ok(encode_tensor(t)),
            _ => unreachable!("ndarray transporter offered {}", value.kind_name()),
        }
    }

    fn can_restore(&self, node: &Node) -> bool {
        is_tensor_node(node)
    }

    fn deserialize(&self, node: &Node, _: &TransporterChain, path: &str) -> Result<StateValue> {
        decode_tensor_at(node, path).map(StateValue::Tensor)
    }
}
