use crate::error::{Error, Result};
use crate::state::{StateMap, StateValue};
use crate::tensor::Tensor;

use super::{input_matrix, require_finite, Dataset, Fields};

pub(super) const FIELDS: &[&str] = &[
    "max_iter",
    "tol",
    "lr",
    "n_features_in_",
    "classes_",
    "coef_",
    "intercept_",
    "n_iter_",
];

/// Binary logistic regression, unregularized, fitted by full-batch gradient
/// descent from a zero start. A step that would raise the loss is halved
/// until it does not, so the loss sequence never increases.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticRegression {
    pub max_iter: usize,
    pub tol: f64,
    pub lr: f64,
    fitted: Option<Fitted>,
}

#[derive(Debug, Clone, PartialEq)]
struct Fitted {
    classes: [i64; 2],
    coef: Vec<f64>,
    intercept: f64,
    n_iter: usize,
}

impl Default for LogisticRegression {
    fn default() -> Self {
        LogisticRegression::new(1000, 1e-6, 0.5)
    }
}

const MAX_STEP_HALVINGS: usize = 60;

fn logit(row: &[f64], coef: &[f64], intercept: f64) -> f64 {
    intercept + row.iter().zip(coef).fold(0.0, |acc, (x, w)| acc + x * w)
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// ln(1 + e^z) without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Mean negative log-likelihood for targets in {0, 1}; `x` is row-major
/// with `coef.len()` columns.
pub fn logistic_loss(x: &[f64], targets: &[f64], coef: &[f64], intercept: f64) -> f64 {
    let p = coef.len();
    let total: f64 = x
        .chunks_exact(p.max(1))
        .zip(targets)
        .map(|(row, t)| {
            let z = logit(row, coef, intercept);
            softplus(z) - t * z
        })
        .sum();
    total / targets.len() as f64
}

impl LogisticRegression {
    pub fn new(max_iter: usize, tol: f64, lr: f64) -> Self {
        LogisticRegression {
            max_iter,
            tol,
            lr,
            fitted: None,
        }
    }

    pub fn is_fitted(&self) -> bool {
        self.fitted.is_some()
    }

    fn fitted(&self) -> Result<&Fitted> {
        self.fitted.as_ref().ok_or(Error::NotFitted)
    }

    pub fn n_features_in(&self) -> Result<usize> {
        Ok(self.fitted()?.coef.len())
    }

    pub fn classes(&self) -> Result<[i64; 2]> {
        Ok(self.fitted()?.classes)
    }

    pub fn coef(&self) -> Result<&[f64]> {
        Ok(&self.fitted()?.coef)
    }

    pub fn intercept(&self) -> Result<f64> {
        Ok(self.fitted()?.intercept)
    }

    pub fn n_iter(&self) -> Result<usize> {
        Ok(self.fitted()?.n_iter)
    }

    pub fn fit(&mut self, ds: &Dataset) -> Result<()> {
        self.fit_traced(ds).map(|_| ())
    }

    /// Fits and returns the `(coef, intercept)` iterate sequence, starting
    /// with the zero initialization.
    pub fn fit_traced(&mut self, ds: &Dataset) -> Result<Vec<(Vec<f64>, f64)>> {
        if !(self.lr > 0.0 && self.lr.is_finite()) || self.tol.is_nan() || self.tol < 0.0 {
            return Err(Error::invariant("lr", "learning rate must be positive and tolerance non-negative"));
        }
        let labels = ds.labels()?;
        let mut distinct = labels.clone();
        distinct.sort_unstable();
        distinct.dedup();
        if distinct.len() != 2 {
            return Err(Error::NotBinary(distinct.len()));
        }
        let classes = [distinct[0], distinct[1]];
        let targets: Vec<f64> = labels
            .iter()
            .map(|&l| if l == classes[1] { 1.0 } else { 0.0 })
            .collect();
        let x = ds.features();
        require_finite("X", &x)?;
        let (n, p) = (ds.n_samples(), ds.n_features());

        let mut coef = vec![0.0; p];
        let mut intercept = 0.0;
        let mut loss = logistic_loss(&x, &targets, &coef, intercept);
        let mut trace = vec![(coef.clone(), intercept)];
        let mut n_iter = 0;
        while n_iter < self.max_iter {
            let mut grad = vec![0.0; p];
            let mut grad_b = 0.0;
            for (row, t) in x.chunks_exact(p).zip(&targets) {
                let r = sigmoid(logit(row, &coef, intercept)) - t;
                for (g, v) in grad.iter_mut().zip(row) {
                    *g += r * v;
                }
                grad_b += r;
            }
            grad.iter_mut().for_each(|g| *g /= n as f64);
            grad_b /= n as f64;
            let norm = grad.iter().fold(grad_b.abs(), |m, g| m.max(g.abs()));
            if norm < self.tol {
                break;
            }

            let mut step = self.lr;
            let mut accepted = None;
            for _ in 0..MAX_STEP_HALVINGS {
                let c: Vec<f64> = coef.iter().zip(&grad).map(|(w, g)| w - step * g).collect();
                let b = intercept - step * grad_b;
                let l = logistic_loss(&x, &targets, &c, b);
                if l <= loss {
                    accepted = Some((c, b, l));
                    break;
                }
                step /= 2.0;
            }
            // no descending step left at machine precision
            let Some((c, b, l)) = accepted else { break };
            coef = c;
            intercept = b;
            loss = l;
            n_iter += 1;
            trace.push((coef.clone(), intercept));
        }

        self.fitted = Some(Fitted {
            classes,
            coef,
            intercept,
            n_iter,
        });
        Ok(trace)
    }

    /// Raw logits `b + x . w`.
    pub fn decision_function(&self, x: &Tensor) -> Result<Vec<f64>> {
        let f = self.fitted()?;
        let (m, values) = input_matrix(x, f.coef.len())?;
        let p = f.coef.len();
        Ok((0..m)
            .map(|i| logit(&values[i * p..(i + 1) * p], &f.coef, f.intercept))
            .collect())
    }

    pub fn predict(&self, x: &Tensor) -> Result<Tensor> {
        let classes = self.fitted()?.classes;
        // sigmoid(z) > 0.5 exactly when z > 0; a tie goes to the lower class
        let labels = self
            .decision_function(x)?
            .into_iter()
            .map(|z| if z > 0.0 { classes[1] } else { classes[0] })
            .collect();
        Ok(Tensor::vector_i64(labels))
    }

    pub fn extract_state(&self) -> Result<StateMap> {
        let f = self.fitted()?;
        let p = f.coef.len();
        let mut s = StateMap::new();
        s.insert("max_iter".into(), StateValue::Int(self.max_iter as i64));
        s.insert("tol".into(), StateValue::Float(self.tol));
        s.insert("lr".into(), StateValue::Float(self.lr));
        s.insert("n_features_in_".into(), StateValue::Int(p as i64));
        s.insert("classes_".into(), StateValue::Tensor(Tensor::vector_i64(f.classes.to_vec())));
        s.insert(
            "coef_".into(),
            StateValue::Tensor(Tensor::from_f64(f.coef.clone(), vec![1, p])?),
        );
        s.insert("intercept_".into(), StateValue::Tensor(Tensor::vector_f64(vec![f.intercept])));
        s.insert("n_iter_".into(), StateValue::Int(f.n_iter as i64));
        Ok(s)
    }

    pub fn restore_state(state: &StateMap) -> Result<Self> {
        let f = Fields(state);
        let max_iter = f.count("max_iter")?;
        let tol = f.float("tol")?;
        let lr = f.float("lr")?;
        if !(tol >= 0.0 && tol.is_finite()) {
            return Err(Error::invariant("tol", "must be finite and non-negative"));
        }
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(Error::invariant("lr", "must be finite and positive"));
        }
        let p = f.positive_count("n_features_in_")?;
        let classes_t = f.tensor("classes_")?;
        let classes = match (classes_t.shape(), classes_t.as_i64()) {
            ([2], Some([a, b])) if a < b => [*a, *b],
            _ => {
                return Err(Error::invariant(
                    "classes_",
                    "expected two ascending int64 labels",
                ))
            }
        };
        let coef = f.f64_tensor("coef_", &[1, p])?;
        require_finite("coef_", &coef)?;
        let intercept = f.f64_tensor("intercept_", &[1])?[0];
        require_finite("intercept_", &[intercept])?;
        let n_iter = f.count("n_iter_")?;
        if n_iter > max_iter {
            return Err(Error::invariant("n_iter_", "exceeds max_iter"));
        }
        Ok(LogisticRegression {
            max_iter,
            tol,
            lr,
            fitted: Some(Fitted {
                classes,
                coef,
                intercept,
                n_iter,
            }),
        })
    }
}
