use crate::error::Result;
use crate::node::Node;
use crate::state::StateValue;

use super::{Transporter, TransporterChain};

/// Plain config values: null, bool, int, string and finite floats.
pub struct PrimitiveTransporter;

impl Transporter for PrimitiveTransporter {
    fn name(&self) -> &'static str {
        "primitive"
    }

    fn can_handle(&self, value: &StateValue) -> bool {
        match value {
            StateValue::Null | StateValue::Bool(_) | StateValue::Int(_) | StateValue::Str(_) => true,
            // non-finite floats have no JSON literal; wrap them in a typed scalar
            StateValue::Float(f) => f.is_finite(),
            _ => false,
        }
    }

    fn serialize(&self, value: &StateValue, _: &TransporterChain, _: &str) -> Result<Node> {
        Ok(match value {
            StateValue::Null => Node::Null,
            StateValue::Bool(b) => Node::Bool(*b),
            StateValue::Int(i) => Node::Int(*i),
            StateValue::Float(f) => Node::Float(*f),
            StateValue::Str(s) => Node::String(s.clone()),
            _ => unreachable!("primitive transporter offered {}", value.kind_name()),
        })
    }

    fn can_restore(&self, node: &Node) -> bool {
        matches!(
            node,
            Node::Null | Node::Bool(_) | Node::Int(_) | Node::Float(_) | Node::String(_)
        )
    }

    fn deserialize(&self, node: &Node, _: &TransporterChain, _: &str) -> Result<StateValue> {
        Ok(match node {
            Node::Null => StateValue::Null,
            Node::Bool(b) => StateValue::Bool(*b),
            Node::Int(i) => StateValue::Int(*i),
            Node::Float(f) => StateValue::Float(*f),
            Node::String(s) => StateValue::Str(s.clone()),
            _ => unreachable!("primitive transporter offered {}", node.kind_name()),
        })
    }
}
