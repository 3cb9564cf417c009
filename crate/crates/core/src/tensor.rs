//! Typed tensors and scalars and their transparent JSON encodings.
//!
//! A tensor encodes as a four-key map:
//!
//! ```json
//! {
//!   "pymiloed-ndarray-list": [1.0, 1.9999999999999993],
//!   "pymiloed-ndarray-dtype": "float64",
//!   "pymiloed-ndarray-shape": [2],
//!   "pymiloed-data-structure": "numpy.ndarray"
//! }
//! ```
//!
//! and a typed scalar as `{"value": 3.0000000000000018, "np-type": "numpy.float64"}`.
//! The key names and tags are interop constants shared with existing model
//! files. Non-finite floats are written as the strings `"nan"`, `"inf"`, `"-inf"`.

use std::fmt;

use crate::error::{Error, Result};
use crate::node::{f64_sentinel, Node, NodeMap};

pub const KEY_LIST: &str = "pymiloed-ndarray-list";
pub const KEY_DTYPE: &str = "pymiloed-ndarray-dtype";
pub const KEY_SHAPE: &str = "pymiloed-ndarray-shape";
pub const KEY_STRUCTURE: &str = "pymiloed-data-structure";
pub const NDARRAY_TAG: &str = "numpy.ndarray";
pub const KEY_VALUE: &str = "value";
pub const KEY_NP_TYPE: &str = "np-type";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DType {
    Float64,
    Int64,
    Bool,
}

impl DType {
    pub fn as_str(self) -> &'static str {
        match self {
            DType::Float64 => "float64",
            DType::Int64 => "int64",
            DType::Bool => "bool_",
        }
    }

    pub fn parse(s: &str) -> Result<DType> {
        match s {
            "float64" => Ok(DType::Float64),
            "int64" => Ok(DType::Int64),
            "bool_" => Ok(DType::Bool),
            other => Err(Error::DTypeUnknown(other.to_owned())),
        }
    }

    /// The `np-type` tag used by wrapped scalars.
    pub fn scalar_tag(self) -> &'static str {
        match self {
            DType::Float64 => "numpy.float64",
            DType::Int64 => "numpy.int64",
            DType::Bool => "numpy.bool_",
        }
    }

    pub fn from_scalar_tag(tag: &str) -> Result<DType> {
        match tag {
            "numpy.float64" => Ok(DType::Float64),
            "numpy.int64" => Ok(DType::Int64),
            "numpy.bool_" => Ok(DType::Bool),
            other => Err(Error::UnknownTypeTag(other.to_owned())),
        }
    }
}

impl fmt::Display for DType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone)]
pub enum TensorData {
    Float64(Vec<f64>),
    Int64(Vec<i64>),
    Bool(Vec<bool>),
}

impl TensorData {
    pub fn len(&self) -> usize {
        match self {
            TensorData::Float64(v) => v.len(),
            TensorData::Int64(v) => v.len(),
            TensorData::Bool(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dtype(&self) -> DType {
        match self {
            TensorData::Float64(_) => DType::Float64,
            TensorData::Int64(_) => DType::Int64,
            TensorData::Bool(_) => DType::Bool,
        }
    }
}

impl PartialEq for TensorData {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (TensorData::Float64(a), TensorData::Float64(b)) => {
                a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
            }
            (TensorData::Int64(a), TensorData::Int64(b)) => a == b,
            (TensorData::Bool(a), TensorData::Bool(b)) => a == b,
            _ => false,
        }
    }
}

/// Dense row-major array. Equality is dtype-exact, shape-exact and bitwise
/// on float payloads.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    data: TensorData,
    shape: Vec<usize>,
}

fn element_count(shape: &[usize]) -> Option<usize> {
    shape.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d))
}

impl Tensor {
    pub fn new(data: TensorData, shape: Vec<usize>) -> Result<Tensor> {
        let expected = element_count(&shape).ok_or_else(|| Error::ShapeMismatch {
            shape: shape.clone(),
            expected: usize::MAX,
            actual: data.len(),
        })?;
        if expected != data.len() {
            return Err(Error::ShapeMismatch {
                shape,
                expected,
                actual: data.len(),
            });
        }
        Ok(Tensor { data, shape })
    }

    pub fn from_f64(values: Vec<f64>, shape: Vec<usize>) -> Result<Tensor> {
        Tensor::new(TensorData::Float64(values), shape)
    }

    pub fn from_i64(values: Vec<i64>, shape: Vec<usize>) -> Result<Tensor> {
        Tensor::new(TensorData::Int64(values), shape)
    }

    pub fn vector_f64(values: Vec<f64>) -> Tensor {
        let n = values.len();
        Tensor {
            data: TensorData::Float64(values),
            shape: vec![n],
        }
    }

    pub fn vector_i64(values: Vec<i64>) -> Tensor {
        let n = values.len();
        Tensor {
            data: TensorData::Int64(values),
            shape: vec![n],
        }
    }

    /// Builds a 2-D float tensor from rows. Ragged input is a shape error.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Tensor> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut flat = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            if row.len() != cols {
                return Err(Error::ShapeMismatch {
                    shape: vec![rows.len(), cols],
                    expected: rows.len() * cols,
                    actual: flat.len() + row.len(),
                });
            }
            flat.extend_from_slice(row);
        }
        Tensor::from_f64(flat, vec![rows.len(), cols])
    }

    pub fn dtype(&self) -> DType {
        self.data.dtype()
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn ndim(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &TensorData {
        &self.data
    }

    pub fn as_f64(&self) -> Option<&[f64]> {
        match &self.data {
            TensorData::Float64(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_i64(&self) -> Option<&[i64]> {
        match &self.data {
            TensorData::Int64(v) => Some(v),
            _ => None,
        }
    }

    /// Widening copy to f64 (bools become 0/1).
    pub fn to_f64_vec(&self) -> Vec<f64> {
        match &self.data {
            TensorData::Float64(v) => v.clone(),
            TensorData::Int64(v) => v.iter().map(|&x| x as f64).collect(),
            TensorData::Bool(v) => v.iter().map(|&x| f64::from(u8::from(x))).collect(),
        }
    }

    /// `(rows, cols)` when the tensor is 2-D.
    pub fn matrix_dims(&self) -> Option<(usize, usize)> {
        match self.shape[..] {
            [r, c] => Some((r, c)),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum TypedScalar {
    Float64(f64),
    Int64(i64),
    Bool(bool),
}

impl PartialEq for TypedScalar {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (TypedScalar::Float64(a), TypedScalar::Float64(b)) => a.to_bits() == b.to_bits(),
            (TypedScalar::Int64(a), TypedScalar::Int64(b)) => a == b,
            (TypedScalar::Bool(a), TypedScalar::Bool(b)) => a == b,
            _ => false,
        }
    }
}

impl TypedScalar {
    pub fn dtype(&self) -> DType {
        match self {
            TypedScalar::Float64(_) => DType::Float64,
            TypedScalar::Int64(_) => DType::Int64,
            TypedScalar::Bool(_) => DType::Bool,
        }
    }

    pub fn type_tag(&self) -> &'static str {
        self.dtype().scalar_tag()
    }

    pub fn to_f64(&self) -> f64 {
        match *self {
            TypedScalar::Float64(f) => f,
            TypedScalar::Int64(i) => i as f64,
            TypedScalar::Bool(b) => f64::from(u8::from(b)),
        }
    }
}

fn float_node(f: f64) -> Node {
    if f.is_finite() {
        Node::Float(f)
    } else {
        Node::String(f64_sentinel(f).to_owned())
    }
}

pub fn encode_tensor(t: &Tensor) -> Node {
    let list = match &t.data {
        TensorData::Float64(v) => v.iter().map(|&f| float_node(f)).collect(),
        TensorData::Int64(v) => v.iter().map(|&i| Node::Int(i)).collect(),
        TensorData::Bool(v) => v.iter().map(|&b| Node::Bool(b)).collect(),
    };
    let mut m = NodeMap::with_capacity(4);
    m.insert(KEY_LIST.into(), Node::List(list));
    m.insert(KEY_DTYPE.into(), Node::String(t.dtype().as_str().into()));
    m.insert(
        KEY_SHAPE.into(),
        Node::List(t.shape.iter().map(|&d| Node::Int(d as i64)).collect()),
    );
    m.insert(KEY_STRUCTURE.into(), Node::String(NDARRAY_TAG.into()));
    Node::Map(m)
}

/// True when the node carries the ndarray structure tag.
pub fn is_tensor_node(node: &Node) -> bool {
    node.get(KEY_STRUCTURE).and_then(Node::as_str) == Some(NDARRAY_TAG)
}

pub fn decode_tensor(node: &Node) -> Result<Tensor> {
    decode_tensor_at(node, "")
}

pub(crate) fn decode_tensor_at(node: &Node, path: &str) -> Result<Tensor> {
    let m = node
        .as_map()
        .ok_or_else(|| Error::malformed(path, format!("expected tensor map, got {}", node.kind_name())))?;
    let get = |key: &str| m.get(key).ok_or_else(|| Error::MissingKey(key.to_owned()));
    let list = get(KEY_LIST)?;
    let dtype = get(KEY_DTYPE)?;
    let shape = get(KEY_SHAPE)?;
    let tag = get(KEY_STRUCTURE)?;
    if tag.as_str() != Some(NDARRAY_TAG) {
        return Err(Error::malformed(path, format!("structure tag must be `{NDARRAY_TAG}`")));
    }
    let dtype = DType::parse(
        dtype
            .as_str()
            .ok_or_else(|| Error::malformed(path, "dtype must be a string"))?,
    )?;
    let shape = shape
        .as_list()
        .ok_or_else(|| Error::malformed(path, "shape must be a list"))?
        .iter()
        .map(|d| match d.as_i64() {
            Some(v) if v >= 0 => Ok(v as usize),
            _ => Err(Error::malformed(path, "shape entries must be non-negative integers")),
        })
        .collect::<Result<Vec<usize>>>()?;
    let items = list
        .as_list()
        .ok_or_else(|| Error::malformed(path, "element list must be a list"))?;
    let bad = |i: usize, e: &Node| {
        Error::malformed(
            format!("{path}[{i}]"),
            format!("{} element cannot hold {}", dtype, e.kind_name()),
        )
    };
    let data = match dtype {
        DType::Float64 => TensorData::Float64(
            items
                .iter()
                .enumerate()
                .map(|(i, e)| e.as_f64().ok_or_else(|| bad(i, e)))
                .collect::<Result<_>>()?,
        ),
        DType::Int64 => TensorData::Int64(
            items
                .iter()
                .enumerate()
                .map(|(i, e)| e.as_i64().ok_or_else(|| bad(i, e)))
                .collect::<Result<_>>()?,
        ),
        DType::Bool => TensorData::Bool(
            items
                .iter()
                .enumerate()
                .map(|(i, e)| match e {
                    Node::Bool(b) => Ok(*b),
                    _ => Err(bad(i, e)),
                })
                .collect::<Result<_>>()?,
        ),
    };
    Tensor::new(data, shape)
}

pub fn encode_scalar(s: &TypedScalar) -> Node {
    let value = match *s {
        TypedScalar::Float64(f) => float_node(f),
        TypedScalar::Int64(i) => Node::Int(i),
        TypedScalar::Bool(b) => Node::Bool(b),
    };
    let mut m = NodeMap::with_capacity(2);
    m.insert(KEY_VALUE.into(), value);
    m.insert(KEY_NP_TYPE.into(), Node::String(s.type_tag().into()));
    Node::Map(m)
}

/// True for a map whose keys are exactly `value` and `np-type`.
pub fn is_scalar_node(node: &Node) -> bool {
    node.as_map().is_some_and(|m| {
        m.len() == 2 && m.contains_key(KEY_VALUE) && m.contains_key(KEY_NP_TYPE)
    })
}

pub fn decode_scalar(node: &Node) -> Result<TypedScalar> {
    decode_scalar_at(node, "")
}

pub(crate) fn decode_scalar_at(node: &Node, path: &str) -> Result<TypedScalar> {
    let m = node
        .as_map()
        .ok_or_else(|| Error::malformed(path, format!("expected scalar map, got {}", node.kind_name())))?;
    let value = m.get(KEY_VALUE).ok_or_else(|| Error::MissingKey(KEY_VALUE.into()))?;
    let tag = m
        .get(KEY_NP_TYPE)
        .ok_or_else(|| Error::MissingKey(KEY_NP_TYPE.into()))?
        .as_str()
        .ok_or_else(|| Error::malformed(path, "np-type must be a string"))?;
    let dtype = DType::from_scalar_tag(tag)?;
    let mismatch = || {
        Error::malformed(
            path,
            format!("{tag} scalar cannot hold {}", value.kind_name()),
        )
    };
    Ok(match dtype {
        DType::Float64 => TypedScalar::Float64(value.as_f64().ok_or_else(mismatch)?),
        DType::Int64 => TypedScalar::Int64(value.as_i64().ok_or_else(mismatch)?),
        DType::Bool => match value {
            Node::Bool(b) => TypedScalar::Bool(*b),
            _ => return Err(mismatch()),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn encodes_the_coef_block() {
        let t = Tensor::vector_f64(vec![1.0, 1.9999999999999993]);
        let expected = Node::parse(
            r#"{
              "pymiloed-ndarray-list": [1.0, 1.9999999999999993],
              "pymiloed-ndarray-dtype": "float64",
              "pymiloed-ndarray-shape": [2],
              "pymiloed-data-structure": "numpy.ndarray"
            }"#,
        )
        .unwrap();
        assert_eq!(encode_tensor(&t), expected);
    }

    #[test]
    fn empty_tensor_encodes_empty_list() {
        let t = Tensor::vector_f64(vec![]);
        let n = encode_tensor(&t);
        assert_eq!(n.get(KEY_LIST), Some(&Node::List(vec![])));
        assert_eq!(n.get(KEY_SHAPE), Some(&Node::List(vec![Node::Int(0)])));
        assert_eq!(decode_tensor(&n).unwrap(), t);
    }

    #[test]
    fn int_matrix_round_trips() {
        let t = Tensor::from_i64(vec![1, 2, 3, 4], vec![2, 2]).unwrap();
        let n = encode_tensor(&t);
        assert_eq!(n.get(KEY_DTYPE).and_then(Node::as_str), Some("int64"));
        assert_eq!(decode_tensor(&n).unwrap(), t);
    }

    #[test]
    fn zero_dim_tensor_has_one_element() {
        let t = Tensor::from_f64(vec![2.5], vec![]).unwrap();
        assert_eq!(decode_tensor(&encode_tensor(&t)).unwrap(), t);
        assert!(Tensor::from_f64(vec![], vec![]).is_err());
    }

    #[test]
    fn decodes_the_singular_block() {
        let n = Node::parse(
            r#"{
              "pymiloed-ndarray-list": [1.618033988749895, 0.6180339887498948],
              "pymiloed-ndarray-dtype": "float64",
              "pymiloed-ndarray-shape": [2],
              "pymiloed-data-structure": "numpy.ndarray"
            }"#,
        )
        .unwrap();
        let t = decode_tensor(&n).unwrap();
        assert_eq!(t, Tensor::vector_f64(vec![1.618033988749895, 0.6180339887498948]));
    }

    #[test]
    fn list_length_must_match_shape() {
        let n = Node::parse(
            r#"{"pymiloed-ndarray-list": [1.0, 2.0, 3.0], "pymiloed-ndarray-dtype": "float64",
                "pymiloed-ndarray-shape": [2], "pymiloed-data-structure": "numpy.ndarray"}"#,
        )
        .unwrap();
        assert!(matches!(
            decode_tensor(&n),
            Err(Error::ShapeMismatch { expected: 2, actual: 3, .. })
        ));
    }

    #[test]
    fn decode_errors_are_specific() {
        let mut n = encode_tensor(&Tensor::vector_f64(vec![1.0]));
        if let Node::Map(m) = &mut n {
            m.insert(KEY_DTYPE.into(), Node::String("float16".into()));
        }
        assert!(matches!(decode_tensor(&n), Err(Error::DTypeUnknown(d)) if d == "float16"));
        if let Node::Map(m) = &mut n {
            m.shift_remove(KEY_SHAPE);
        }
        assert!(matches!(decode_tensor(&n), Err(Error::MissingKey(k)) if k == KEY_SHAPE));
    }

    #[test]
    fn non_finite_values_use_string_sentinels() {
        let t = Tensor::vector_f64(vec![f64::NAN, f64::INFINITY, f64::NEG_INFINITY, 0.5]);
        let n = encode_tensor(&t);
        assert_eq!(
            n.get(KEY_LIST).unwrap().to_compact_string(),
            r#"["nan","inf","-inf",0.5]"#
        );
        let back = decode_tensor(&Node::parse(&n.to_pretty_string()).unwrap()).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn scalar_encodings() {
        let s = TypedScalar::Float64(3.0000000000000018);
        assert_eq!(
            encode_scalar(&s).to_compact_string(),
            r#"{"value":3.0000000000000018,"np-type":"numpy.float64"}"#
        );
        assert_eq!(
            encode_scalar(&TypedScalar::Float64(0.0)).to_compact_string(),
            r#"{"value":0.0,"np-type":"numpy.float64"}"#
        );
        let i = TypedScalar::Int64(7);
        assert_eq!(decode_scalar(&encode_scalar(&i)).unwrap(), i);
    }

    #[test]
    fn scalar_decoding() {
        let n = Node::parse(r#"{"value": 3.0000000000000018, "np-type": "numpy.float64"}"#).unwrap();
        assert_eq!(decode_scalar(&n).unwrap(), TypedScalar::Float64(3.0000000000000018));
        let b = Node::parse(r#"{"value": true, "np-type": "numpy.bool_"}"#).unwrap();
        assert_eq!(decode_scalar(&b).unwrap(), TypedScalar::Bool(true));
        let q = Node::parse(r#"{"value": 1, "np-type": "numpy.float128"}"#).unwrap();
        assert!(matches!(decode_scalar(&q), Err(Error::UnknownTypeTag(t)) if t == "numpy.float128"));
    }

    #[test]
    fn scalar_value_must_fit_tag() {
        let n = Node::parse(r#"{"value": 1.5, "np-type": "numpy.int64"}"#).unwrap();
        assert!(matches!(decode_scalar(&n), Err(Error::MalformedNode { .. })));
    }
}
