use crate::error::{Error, Result};
use crate::node::{Node, NodeMap};
use crate::state::{StateValue, TreeArrays};
use crate::tensor::{decode_tensor_at, encode_tensor, Tensor, KEY_STRUCTURE};

use super::{join_path, Transporter, TransporterChain};

pub const TREE_TAG: &str = "milo.tree.TreeArrays";

const ARRAY_KEYS: [&str; 5] = ["children_left", "children_right", "feature", "threshold", "value"];

/// Decision trees as five parallel arrays plus a node count.
pub struct TreeTransporter;

impl Transporter for TreeTransporter {
    fn name(&self) -> &'static str {
        "tree"
    }

    fn can_handle(&self, value: &StateValue) -> bool {
        matches!(value, StateValue::Tree(_))
    }

    fn serialize(&self, value: &StateValue, _: &TransporterChain, _: &str) -> Result<Node> {
        let StateValue::Tree(t) = value else {
            unreachable!("tree transporter offered {}", value.kind_name())
        };
        let mut m = NodeMap::with_capacity(7);
        m.insert("node_count".into(), Node::Int(t.node_count() as i64));
        m.insert("children_left".into(), encode_tensor(&Tensor::vector_i64(t.children_left.clone())));
        m.insert("children_right".into(), encode_tensor(&Tensor::vector_i64(t.children_right.clone())));
        m.insert("feature".into(), encode_tensor(&Tensor::vector_i64(t.feature.clone())));
        m.insert("threshold".into(), encode_tensor(&Tensor::vector_f64(t.threshold.clone())));
        m.insert("value".into(), encode_tensor(&t.value));
        m.insert(KEY_STRUCTURE.into(), Node::String(TREE_TAG.into()));
        Ok(Node::Map(m))
    }

    fn can_restore(&self, node: &Node) -> bool {
        node.get(KEY_STRUCTURE).and_then(Node::as_str) == Some(TREE_TAG)
    }

    fn deserialize(&self, node: &Node, _: &TransporterChain, path: &str) -> Result<StateValue> {
        let field = |key: &str| {
            node.get(key)
                .ok_or_else(|| Error::MissingKey(join_path(path, key)))
        };
        let node_count = field("node_count")?
            .as_i64()
            .filter(|n| *n >= 0)
            .ok_or_else(|| Error::malformed(join_path(path, "node_count"), "must be a non-negative integer"))?
            as usize;
        let mut arrays = Vec::with_capacity(ARRAY_KEYS.len());
        for key in ARRAY_KEYS {
            let sub = join_path(path, key);
            let t = decode_tensor_at(field(key)?, &sub)?;
            if t.shape().first() != Some(&node_count) {
                return Err(Error::malformed(sub, format!("expected {node_count} rows")));
            }
            arrays.push(t);
        }
        let ints = |t: &Tensor, key: &str| {
            t.as_i64()
                .filter(|_| t.ndim() == 1)
                .map(<[i64]>::to_vec)
                .ok_or_else(|| Error::malformed(join_path(path, key), "expected a 1-D int64 tensor"))
        };
        let value = arrays.pop().expect("five arrays");
        let threshold = arrays
            .pop()
            .and_then(|t| t.as_f64().filter(|_| t.ndim() == 1).map(<[f64]>::to_vec))
            .ok_or_else(|| Error::malformed(join_path(path, "threshold"), "expected a 1-D float64 tensor"))?;
        Ok(StateValue::Tree(TreeArrays {
            children_left: ints(&arrays[0], "children_left")?,
            children_right: ints(&arrays[1], "children_right")?,
            feature: ints(&arrays[2], "feature")?,
            threshold,
            value,
        }))
    }
}
