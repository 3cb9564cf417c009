//! In-memory model state: what models hand to the transporter chain and what
//! they are rebuilt from.

use indexmap::IndexMap;

use crate::error::{Error, Result};
use crate::tensor::{Tensor, TypedScalar};

pub type StateMap = IndexMap<String, StateValue>;

#[derive(Debug, Clone)]
pub enum StateValue {
    Null,
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(String),
    Scalar(TypedScalar),
    Tensor(Tensor),
    Tree(TreeArrays),
    Labels(LabelIndex),
    List(Vec<StateValue>),
    Map(StateMap),
    /// An in-memory object with no data representation (a callable, a
    /// handle). No transporter claims it.
    Opaque(String),
}

impl PartialEq for StateValue {
    fn eq(&self, other: &Self) -> bool {
        use StateValue::*;
        match (self, other) {
            (Null, Null) => true,
            (Bool(a), Bool(b)) => a == b,
            (Int(a), Int(b)) => a == b,
            (Float(a), Float(b)) => a.to_bits() == b.to_bits(),
            (Str(a), Str(b)) => a == b,
            (Scalar(a), Scalar(b)) => a == b,
            (Tensor(a), Tensor(b)) => a == b,
            (Tree(a), Tree(b)) => a == b,
            (Labels(a), Labels(b)) => a == b,
            (List(a), List(b)) => a == b,
            (Map(a), Map(b)) => a.len() == b.len() && a.iter().zip(b.iter()).all(|(x, y)| x == y),
            (Opaque(a), Opaque(b)) => a == b,
            _ => false,
        }
    }
}

impl StateValue {
    pub fn kind_name(&self) -> &'static str {
        match self {
            StateValue::Null => "null",
            StateValue::Bool(_) => "bool",
            StateValue::Int(_) => "int",
            StateValue::Float(_) => "float",
            StateValue::Str(_) => "string",
            StateValue::Scalar(_) => "typed scalar",
            StateValue::Tensor(_) => "tensor",
            StateValue::Tree(_) => "tree arrays",
            StateValue::Labels(_) => "label index",
            StateValue::List(_) => "list",
            StateValue::Map(_) => "map",
            StateValue::Opaque(_) => "opaque object",
        }
    }
}

/// Decision tree in parallel-array form. Node `i` is a leaf when both child
/// entries are `-1`, in which case `feature[i] == -2`.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeArrays {
    pub children_left: Vec<i64>,
    pub children_right: Vec<i64>,
    pub feature: Vec<i64>,
    pub threshold: Vec<f64>,
    /// Per-node class counts, shape `[node_count, n_classes]`.
    pub value: Tensor,
}

pub const TREE_LEAF: i64 = -1;
pub const TREE_UNDEFINED_FEATURE: i64 = -2;

impl TreeArrays {
    pub fn node_count(&self) -> usize {
        self.children_left.len()
    }

    pub fn is_leaf(&self, node: usize) -> bool {
        self.children_left[node] == TREE_LEAF
    }

    /// Checks well-formedness: consistent array lengths, leaf markers,
    /// children after their parent, a single root reaching every node
    /// exactly once, finite thresholds on internal nodes.
    pub fn validate(&self, n_features: usize, n_classes: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::invariant("tree_", msg));
        let n = self.children_left.len();
        if n == 0 {
            return bad("tree has no nodes".into());
        }
        if self.children_right.len() != n || self.feature.len() != n || self.threshold.len() != n {
            return bad("node arrays differ in length".into());
        }
        match self.value.matrix_dims() {
            Some((rows, cols)) if rows == n && cols == n_classes => {}
            _ => {
                return bad(format!(
                    "value must have shape [{n}, {n_classes}], got {:?}",
                    self.value.shape()
                ))
            }
        }
        let counts = self
            .value
            .as_f64()
            .ok_or_else(|| Error::invariant("tree_", "value must be float64"))?;
        if counts.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return bad("class counts must be finite and non-negative".into());
        }
        let mut parents = vec![0usize; n];
        for i in 0..n {
            let (l, r, f) = (self.children_left[i], self.children_right[i], self.feature[i]);
            let leaf_children = l == TREE_LEAF && r == TREE_LEAF;
            let leaf_feature = f == TREE_UNDEFINED_FEATURE;
            if leaf_children != leaf_feature || (l == TREE_LEAF) != (r == TREE_LEAF) {
                return bad(format!("node {i} mixes leaf and split markers"));
            }
            if leaf_children {
                continue;
            }
            if f < 0 || f as usize >= n_features {
                return bad(format!("node {i} splits on feature {f} outside [0, {n_features})"));
            }
            if !self.threshold[i].is_finite() {
                return bad(format!("node {i} has a non-finite threshold"));
            }
            for child in [l, r] {
                if child <= i as i64 || child as usize >= n {
                    return bad(format!("node {i} has child {child} out of order or range"));
                }
                parents[child as usize] += 1;
            }
        }
        if parents[0] != 0 {
            return bad("root has a parent".into());
        }
        if let Some(i) = (1..n).find(|&i| parents[i] != 1) {
            return bad(format!("node {i} is reached {} times", parents[i]));
        }
        Ok(())
    }
}

/// Sorted class labels plus the label → position index used for predictions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelIndex {
    classes: Vec<i64>,
}

impl LabelIndex {
    /// Sorts and de-duplicates the labels.
    pub fn from_labels(labels: &[i64]) -> LabelIndex {
        let mut classes = labels.to_vec();
        classes.sort_unstable();
        classes.dedup();
        LabelIndex { classes }
    }

    /// Accepts an already sorted, strictly increasing label list.
    pub fn from_sorted(classes: Vec<i64>) -> Result<LabelIndex> {
        if classes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invariant("classes_", "labels must be strictly increasing"));
        }
        Ok(LabelIndex { classes })
    }

    pub fn classes(&self) -> &[i64] {
        &self.classes
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn index_of(&self, label: i64) -> Option<usize> {
        self.classes.binary_search(&label).ok()
    }

    pub fn label(&self, index: usize) -> i64 {
        self.classes[index]
    }
}
