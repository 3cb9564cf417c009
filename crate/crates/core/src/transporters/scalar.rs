use crate::error::Result;
use crate::node::Node;
use crate::state::StateValue;
use crate::tensor::{decode_scalar_at, encode_scalar, is_scalar_node};

use super::{Transporter, TransporterChain};

/// Wrapped numeric scalars (`{"value": .., "np-type": ..}`).
pub struct ScalarTransporter;

impl Transporter for ScalarTransporter {
    fn name(&self) -> &'static str {
        "scalar"
    }

    fn can_handle(&self, value: &StateValue) -> bool {
        matches!(value, StateValue::Scalar(_))
    }

    fn serialize(&self, value: &StateValue, _: &TransporterChain, _: &str) -> Result<Node> {
        match value {
            StateValue::Scalar(s) => Ok(encode_scalar(s)),
            _ => unreachable!("scalar transporter offered {}", value.kind_name()),
        }
    }

    fn can_restore(&self, node: &Node) -> bool {
        is_scalar_node(node)
    }

    fn deserialize(&self, node: &Node, _: &TransporterChain, path: &str) -> Result<StateValue> {
        decode_scalar_at(node, path).map(StateValue::Scalar)
    }
}
