use crate::error::{Error, Result};
use crate::node::{Node, NodeMap};
use crate::state::{LabelIndex, StateValue};
use crate::tensor::{decode_tensor_at, encode_tensor, Tensor, KEY_STRUCTURE};

use super::{join_path, Transporter, TransporterChain};

pub const LABEL_INDEX_TAG: &str = "milo.LabelIndex";

/// Class-label arrays together with their label → position map. The map is
/// redundant with the sorted labels and is checked on the way back in.
pub struct LabelIndexTransporter;

impl Transporter for LabelIndexTransporter {
    fn name(&self) -> &'static str {
        "label-index"
    }

    fn can_handle(&self, value: &StateValue) -> bool {
        matches!(value, StateValue::Labels(_))
    }

    fn serialize(&self, value: &StateValue, _: &TransporterChain, _: &str) -> Result<Node> {
        let StateValue::Labels(labels) = value else {
            unreachable!("label-index transporter offered {}", value.kind_name())
        };
        let index = labels
            .classes()
            .iter()
            .enumerate()
            .map(|(i, c)| (c.to_string(), Node::Int(i as i64)))
            .collect::<NodeMap>();
        let mut m = NodeMap::with_capacity(3);
        m.insert("labels".into(), encode_tensor(&Tensor::vector_i64(labels.classes().to_vec())));
        m.insert("index".into(), Node::Map(index));
        m.insert(KEY_STRUCTURE.into(), Node::String(LABEL_INDEX_TAG.into()));
        Ok(Node::Map(m))
    }

    fn can_restore(&self, node: &Node) -> bool {
        node.get(KEY_STRUCTURE).and_then(Node::as_str) == Some(LABEL_INDEX_TAG)
    }

    fn deserialize(&self, node: &Node, _: &TransporterChain, path: &str) -> Result<StateValue> {
        let labels_path = join_path(path, "labels");
        let labels = decode_tensor_at(
            node.get("labels").ok_or_else(|| Error::MissingKey(labels_path.clone()))?,
            &labels_path,
        )?;
        let classes = labels
            .as_i64()
            .filter(|_| labels.ndim() == 1)
            .ok_or_else(|| Error::malformed(&labels_path, "expected a 1-D int64 tensor"))?
            .to_vec();
        let labels = LabelIndex::from_sorted(classes)
            .map_err(|_| Error::malformed(&labels_path, "labels must be strictly increasing"))?;
        let index_path = join_path(path, "index");
        let index = node
            .get("index")
            .ok_or_else(|| Error::MissingKey(index_path.clone()))?
            .as_map()
            .ok_or_else(|| Error::malformed(&index_path, "expected a map"))?;
        let consistent = index.len() == labels.len()
            && labels.classes().iter().enumerate().all(|(i, c)| {
                index.get(&c.to_string()).and_then(Node::as_i64) == Some(i as i64)
            });
        if !consistent {
            return Err(Error::malformed(index_path, "index does not match the label order"));
        }
        Ok(StateValue::Labels(labels))
    }
}
