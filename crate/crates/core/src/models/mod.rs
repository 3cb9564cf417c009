//! Natively trained models whose learned state is laid out field-for-field
//! the way exported model files name it.
//!
//! Tie-breaking is "lowest index wins" everywhere: split selection, nearest
//! center, and argmax over classes.

use std::borrow::Cow;

use crate::error::{Error, Result};
use crate::state::{LabelIndex, StateMap, StateValue, TreeArrays};
use crate::tensor::{Tensor, TypedScalar};
use crate::transporters::ModelCategory;

mod decision_tree;
mod kmeans;
mod linear_regression;
mod logistic_regression;
mod naive_bayes;

pub use decision_tree::{DecisionTreeClassifier, SplitCandidate};
pub use kmeans::KMeans;
pub use linear_regression::{rank_tolerance, LinearRegression};
pub use logistic_regression::{logistic_loss, LogisticRegression};
pub use naive_bayes::GaussianNb;

pub const LINEAR_REGRESSION: &str = "LinearRegression";
pub const LOGISTIC_REGRESSION: &str = "LogisticRegression";
pub const DECISION_TREE: &str = "DecisionTreeClassifier";
pub const KMEANS: &str = "KMeans";
pub const GAUSSIAN_NB: &str = "GaussianNB";

pub const MODEL_TYPES: [&str; 5] = [
    LINEAR_REGRESSION,
    LOGISTIC_REGRESSION,
    DECISION_TREE,
    KMEANS,
    GAUSSIAN_NB,
];

pub fn category_of(model_type: &str) -> Result<ModelCategory> {
    Ok(match model_type {
        LINEAR_REGRESSION | LOGISTIC_REGRESSION => ModelCategory::LinearModel,
        DECISION_TREE => ModelCategory::DecisionTree,
        KMEANS => ModelCategory::Clustering,
        GAUSSIAN_NB => ModelCategory::NaiveBayes,
        other => return Err(Error::UnknownModelType(other.to_owned())),
    })
}

/// Feature matrix plus optional target vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: Tensor,
    y: Option<Tensor>,
}

impl Dataset {
    pub fn new(x: Tensor, y: Option<Tensor>) -> Result<Dataset> {
        let (n, p) = x
            .matrix_dims()
            .ok_or_else(|| Error::DimensionMismatch(format!("X must be 2-D, got shape {:?}", x.shape())))?;
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        if p == 0 {
            return Err(Error::DimensionMismatch("X has no feature columns".into()));
        }
        if let Some(y) = &y {
            if y.shape() != [n] {
                return Err(Error::DimensionMismatch(format!(
                    "y has shape {:?}, expected [{n}]",
                    y.shape()
                )));
            }
        }
        Ok(Dataset { x, y })
    }

    pub fn from_rows(rows: &[Vec<f64>], y: Option<Vec<f64>>) -> Result<Dataset> {
        if rows.is_empty() {
            return Err(Error::EmptyDataset);
        }
        Dataset::new(Tensor::from_rows(rows)?, y.map(Tensor::vector_f64))
    }

    pub fn with_labels(rows: &[Vec<f64>], labels: Vec<i64>) -> Result<Dataset> {
        if rows.is_empty() {
            return Err(Error::EmptyDataset);
        }
        Dataset::new(Tensor::from_rows(rows)?, Some(Tensor::vector_i64(labels)))
    }

    pub fn x(&self) -> &Tensor {
        &self.x
    }

    pub fn y(&self) -> Option<&Tensor> {
        self.y.as_ref()
    }

    pub fn n_samples(&self) -> usize {
        self.x.shape()[0]
    }

    pub fn n_features(&self) -> usize {
        self.x.shape()[1]
    }

    pub(crate) fn features(&self) -> Cow<'_, [f64]> {
        as_f64_cow(&self.x)
    }

    pub fn targets(&self) -> Result<Vec<f64>> {
        let y = self
            .y
            .as_ref()
            .ok_or_else(|| Error::DimensionMismatch("dataset has no target".into()))?;
        Ok(y.to_f64_vec())
    }

    /// Integer class labels; float targets must hold whole numbers.
    pub fn labels(&self) -> Result<Vec<i64>> {
        let y = self
            .y
            .as_ref()
            .ok_or_else(|| Error::DimensionMismatch("dataset has no target".into()))?;
        if let Some(v) = y.as_i64() {
            return Ok(v.to_vec());
        }
        y.to_f64_vec()
            .into_iter()
            .map(|f| {
                if f.fract() == 0.0 && f.abs() < 9.0e15 {
                    Ok(f as i64)
                } else {
                    Err(Error::DimensionMismatch(format!("label {f} is not an integer")))
                }
            })
            .collect()
    }
}

fn as_f64_cow(t: &Tensor) -> Cow<'_, [f64]> {
    match t.as_f64() {
        Some(v) => Cow::Borrowed(v),
        None => Cow::Owned(t.to_f64_vec()),
    }
}

/// Validates a prediction input and returns `(rows, flat values)`.
pub(crate) fn input_matrix(x: &Tensor, n_features: usize) -> Result<(usize, Cow<'_, [f64]>)> {
    let (m, p) = x
        .matrix_dims()
        .ok_or_else(|| Error::DimensionMismatch(format!("X must be 2-D, got shape {:?}", x.shape())))?;
    if p != n_features {
        return Err(Error::FeatureCountMismatch {
            expected: n_features,
            actual: p,
        });
    }
    Ok((m, as_f64_cow(x)))
}

pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Typed field access on a state map with uniform error reporting.
pub(crate) struct Fields<'a>(pub &'a StateMap);

impl<'a> Fields<'a> {
    fn get(&self, name: &str) -> Result<&'a StateValue> {
        self.0.get(name).ok_or_else(|| Error::MissingField(name.to_owned()))
    }

    fn wrong(name: &str, want: &str, got: &StateValue) -> Error {
        Error::invariant(name, format!("expected {want}, got {}", got.kind_name()))
    }

    pub fn bool(&self, name: &str) -> Result<bool> {
        match self.get(name)? {
            StateValue::Bool(b) => Ok(*b),
            other => Err(Self::wrong(name, "bool", other)),
        }
    }

    pub fn int(&self, name: &str) -> Result<i64> {
        match self.get(name)? {
            StateValue::Int(i) => Ok(*i),
            other => Err(Self::wrong(name, "int", other)),
        }
    }

    pub fn count(&self, name: &str) -> Result<usize> {
        let v = self.int(name)?;
        usize::try_from(v).map_err(|_| Error::invariant(name, format!("{v} is negative")))
    }

    pub fn positive_count(&self, name: &str) -> Result<usize> {
        match self.count(name)? {
            0 => Err(Error::invariant(name, "must be at least 1")),
            n => Ok(n),
        }
    }

    pub fn float(&self, name: &str) -> Result<f64> {
        match self.get(name)? {
            StateValue::Float(f) => Ok(*f),
            StateValue::Int(i) => Ok(*i as f64),
            StateValue::Scalar(s @ TypedScalar::Float64(_)) => Ok(s.to_f64()),
            other => Err(Self::wrong(name, "float", other)),
        }
    }

    pub fn str(&self, name: &str) -> Result<&'a str> {
        match self.get(name)? {
            StateValue::Str(s) => Ok(s),
            other => Err(Self::wrong(name, "string", other)),
        }
    }

    pub fn optional_int(&self, name: &str) -> Result<Option<i64>> {
        match self.get(name)? {
            StateValue::Null => Ok(None),
            StateValue::Int(i) => Ok(Some(*i)),
            other => Err(Self::wrong(name, "null or int", other)),
        }
    }

    pub fn scalar_f64(&self, name: &str) -> Result<f64> {
        match self.get(name)? {
            StateValue::Scalar(TypedScalar::Float64(f)) => Ok(*f),
            other => Err(Self::wrong(name, "numpy.float64 scalar", other)),
        }
    }

    pub fn tensor(&self, name: &str) -> Result<&'a Tensor> {
        match self.get(name)? {
            StateValue::Tensor(t) => Ok(t),
            other => Err(Self::wrong(name, "tensor", other)),
        }
    }

    /// A float64 tensor of exactly `shape`, returned as a flat vector.
    pub fn f64_tensor(&self, name: &str, shape: &[usize]) -> Result<Vec<f64>> {
        let t = self.tensor(name)?;
        if t.shape() != shape {
            return Err(Error::invariant(
                name,
                format!("expected shape {shape:?}, got {:?}", t.shape()),
            ));
        }
        let v = t
            .as_f64()
            .ok_or_else(|| Error::invariant(name, format!("expected float64, got {}", t.dtype())))?;
        Ok(v.to_vec())
    }

    pub fn labels(&self, name: &str) -> Result<&'a LabelIndex> {
        match self.get(name)? {
            StateValue::Labels(l) => Ok(l),
            other => Err(Self::wrong(name, "label index", other)),
        }
    }

    pub fn tree(&self, name: &str) -> Result<&'a TreeArrays> {
        match self.get(name)? {
            StateValue::Tree(t) => Ok(t),
            other => Err(Self::wrong(name, "tree arrays", other)),
        }
    }
}

pub(crate) fn require_finite(name: &str, values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::invariant(name, "values must be finite"))
    }
}

/// Any of the five supported models.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    LinearRegression(LinearRegression),
    LogisticRegression(LogisticRegression),
    DecisionTreeClassifier(DecisionTreeClassifier),
    KMeans(KMeans),
    GaussianNb(GaussianNb),
}

macro_rules! dispatch {
    ($self:expr, $m:ident => $body:expr) => {
        match $self {
            Model::LinearRegression($m) => $body,
            Model::LogisticRegression($m) => $body,
            Model::DecisionTreeClassifier($m) => $body,
            Model::KMeans($m) => $body,
            Model::GaussianNb($m) => $body,
        }
    };
}

impl Model {
    /// An unfitted model of the given type with default hyperparameters.
    pub fn unfitted(model_type: &str) -> Result<Model> {
        Ok(match model_type {
            LINEAR_REGRESSION => Model::LinearRegression(LinearRegression::default()),
            LOGISTIC_REGRESSION => Model::LogisticRegression(LogisticRegression::default()),
            DECISION_TREE => Model::DecisionTreeClassifier(DecisionTreeClassifier::default()),
            KMEANS => Model::KMeans(KMeans::default()),
            GAUSSIAN_NB => Model::GaussianNb(GaussianNb::default()),
            other => return Err(Error::UnknownModelType(other.to_owned())),
        })
    }

    pub fn model_type(&self) -> &'static str {
        match self {
            Model::LinearRegression(_) => LINEAR_REGRESSION,
            Model::LogisticRegression(_) => LOGISTIC_REGRESSION,
            Model::DecisionTreeClassifier(_) => DECISION_TREE,
            Model::KMeans(_) => KMEANS,
            Model::GaussianNb(_) => GAUSSIAN_NB,
        }
    }

    pub fn category(&self) -> ModelCategory {
        category_of(self.model_type()).expect("registered model type")
    }

    pub fn is_fitted(&self) -> bool {
        dispatch!(self, m => m.is_fitted())
    }

    pub fn n_features_in(&self) -> Result<usize> {
        dispatch!(self, m => m.n_features_in())
    }

    pub fn fit(&mut self, ds: &Dataset) -> Result<()> {
        dispatch!(self, m => m.fit(ds))
    }

    /// A fresh fit with this model's hyperparameters; `self` is untouched.
    pub fn refit(&self, ds: &Dataset) -> Result<Model> {
        let mut next = self.clone();
        next.fit(ds)?;
        Ok(next)
    }

    pub fn predict(&self, x: &Tensor) -> Result<Tensor> {
        dispatch!(self, m => m.predict(x))
    }

    /// Signed scores for binary classifiers (positive favours the larger
    /// class label); `None` for regression and clustering.
    pub fn decision_scores(&self, x: &Tensor) -> Option<Result<Vec<f64>>> {
        match self {
            Model::LogisticRegression(m) => Some(m.decision_function(x)),
            Model::DecisionTreeClassifier(m) => Some(m.decision_margin(x)),
            Model::GaussianNb(m) => Some(m.decision_margin(x)),
            Model::LinearRegression(_) | Model::KMeans(_) => None,
        }
    }

    pub fn extract_state(&self) -> Result<StateMap> {
        dispatch!(self, m => m.extract_state())
    }

    pub fn restore_state(model_type: &str, state: &StateMap) -> Result<Model> {
        Ok(match model_type {
            LINEAR_REGRESSION => Model::LinearRegression(LinearRegression::restore_state(state)?),
            LOGISTIC_REGRESSION => Model::LogisticRegression(LogisticRegression::restore_state(state)?),
            DECISION_TREE => Model::DecisionTreeClassifier(DecisionTreeClassifier::restore_state(state)?),
            KMEANS => Model::KMeans(KMeans::restore_state(state)?),
            GAUSSIAN_NB => Model::GaussianNb(GaussianNb::restore_state(state)?),
            other => return Err(Error::UnknownModelType(other.to_owned())),
        })
    }

    /// Field names a restorable state of this type must carry.
    pub fn required_fields(model_type: &str) -> Result<&'static [&'static str]> {
        Ok(match model_type {
            LINEAR_REGRESSION => linear_regression::FIELDS,
            LOGISTIC_REGRESSION => logistic_regression::FIELDS,
            DECISION_TREE => decision_tree::FIELDS,
            KMEANS => kmeans::FIELDS,
            GAUSSIAN_NB => naive_bayes::FIELDS,
            other => return Err(Error::UnknownModelType(other.to_owned())),
        })
    }
}

pub fn extract_state(model: &Model) -> Result<StateMap> {
    model.extract_state()
}

pub fn restore_state(model_type: &str, state: &StateMap) -> Result<Model> {
    Model::restore_state(model_type, state)
}

pub fn predict(model: &Model, x: &Tensor) -> Result<Tensor> {
    model.predict(x)
}
