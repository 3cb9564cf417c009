use crate::error::{Error, Result};
use crate::state::{LabelIndex, StateMap, StateValue};
use crate::tensor::Tensor;

use super::{argmax, input_matrix, require_finite, Dataset, Fields};

pub(super) const FIELDS: &[&str] = &[
    "var_smoothing",
    "n_features_in_",
    "classes_",
    "class_prior_",
    "theta_",
    "var_",
    "epsilon_",
];

/// Gaussian naive Bayes. Per-class variances are floored by
/// `var_smoothing * max(column variance)`; when every column is constant
/// the floor falls back to `var_smoothing` itself so variances stay positive.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianNb {
    pub var_smoothing: f64,
    /// Fix the class set up front; a listed class without samples is an error.
    pub classes: Option<Vec<i64>>,
    fitted: Option<Fitted>,
}

#[derive(Debug, Clone, PartialEq)]
struct Fitted {
    n_features: usize,
    classes: LabelIndex,
    prior: Vec<f64>,
    theta: Vec<f64>,
    var: Vec<f64>,
    epsilon: f64,
}

impl Default for GaussianNb {
    fn default() -> Self {
        GaussianNb::new(1e-9)
    }
}

impl GaussianNb {
    pub fn new(var_smoothing: f64) -> Self {
        GaussianNb {
            var_smoothing,
            classes: None,
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
        Ok(self.fitted()?.n_features)
    }

    pub fn class_prior(&self) -> Result<&[f64]> {
        Ok(&self.fitted()?.prior)
    }

    /// Row-major `[classes, features]` means.
    pub fn theta(&self) -> Result<&[f64]> {
        Ok(&self.fitted()?.theta)
    }

    pub fn var(&self) -> Result<&[f64]> {
        Ok(&self.fitted()?.var)
    }

    pub fn epsilon(&self) -> Result<f64> {
        Ok(self.fitted()?.epsilon)
    }

    pub fn fit(&mut self, ds: &Dataset) -> Result<()> {
        if !(self.var_smoothing > 0.0 && self.var_smoothing.is_finite()) {
            return Err(Error::invariant("var_smoothing", "must be finite and positive"));
        }
        let labels = ds.labels()?;
        let classes = match &self.classes {
            Some(list) => {
                let idx = LabelIndex::from_labels(list);
                if let Some(l) = labels.iter().find(|l| idx.index_of(**l).is_none()) {
                    return Err(Error::invariant("y", format!("label {l} is not a listed class")));
                }
                idx
            }
            None => LabelIndex::from_labels(&labels),
        };
        let x = ds.features();
        require_finite("X", &x)?;
        let (n, p, c) = (ds.n_samples(), ds.n_features(), classes.len());

        let mut counts = vec![0usize; c];
        let mut theta = vec![0.0; c * p];
        for (row, &l) in x.chunks_exact(p).zip(&labels) {
            let k = classes.index_of(l).expect("checked above");
            counts[k] += 1;
            for (t, v) in theta[k * p..(k + 1) * p].iter_mut().zip(row) {
                *t += v;
            }
        }
        if let Some(k) = counts.iter().position(|&n| n == 0) {
            return Err(Error::EmptyClass(classes.label(k)));
        }
        for k in 0..c {
            theta[k * p..(k + 1) * p]
                .iter_mut()
                .for_each(|t| *t /= counts[k] as f64);
        }
        let mut var = vec![0.0; c * p];
        for (row, &l) in x.chunks_exact(p).zip(&labels) {
            let k = classes.index_of(l).expect("checked above");
            for j in 0..p {
                let d = row[j] - theta[k * p + j];
                var[k * p + j] += d * d;
            }
        }
        for k in 0..c {
            var[k * p..(k + 1) * p]
                .iter_mut()
                .for_each(|v| *v /= counts[k] as f64);
        }

        let max_col_var = (0..p)
            .map(|j| {
                let mean = x.chunks_exact(p).map(|r| r[j]).sum::<f64>() / n as f64;
                x.chunks_exact(p).map(|r| (r[j] - mean) * (r[j] - mean)).sum::<f64>() / n as f64
            })
            .fold(0.0, f64::max);
        let epsilon = if max_col_var > 0.0 {
            self.var_smoothing * max_col_var
        } else {
            self.var_smoothing
        };
        var.iter_mut().for_each(|v| *v += epsilon);

        self.fitted = Some(Fitted {
            n_features: p,
            classes,
            prior: counts.iter().map(|&k| k as f64 / n as f64).collect(),
            theta,
            var,
            epsilon,
        });
        Ok(())
    }

    /// Joint log-likelihood per class, row-major `[rows, classes]`.
    pub fn joint_log_likelihood(&self, x: &Tensor) -> Result<Vec<f64>> {
        let f = self.fitted()?;
        let p = f.n_features;
        let (m, values) = input_matrix(x, p)?;
        let c = f.classes.len();
        let two_pi = 2.0 * std::f64::consts::PI;
        let mut out = Vec::with_capacity(m * c);
        for row in values.chunks_exact(p).take(m) {
            for k in 0..c {
                let theta = &f.theta[k * p..(k + 1) * p];
                let var = &f.var[k * p..(k + 1) * p];
                let norm: f64 = var.iter().map(|v| (two_pi * v).ln()).sum();
                let dev: f64 = row
                    .iter()
                    .zip(theta)
                    .zip(var)
                    .map(|((x, t), v)| (x - t) * (x - t) / v)
                    .sum();
                out.push(f.prior[k].ln() - 0.5 * norm - 0.5 * dev);
            }
        }
        Ok(out)
    }

    pub fn predict(&self, x: &Tensor) -> Result<Tensor> {
        let f = self.fitted()?;
        let c = f.classes.len();
        let jll = self.joint_log_likelihood(x)?;
        Ok(Tensor::vector_i64(
            jll.chunks_exact(c)
                .map(|row| f.classes.label(argmax(row)))
                .collect(),
        ))
    }

    /// Log-posterior margin `jll(upper) - jll(lower)`, binary models only.
    pub fn decision_margin(&self, x: &Tensor) -> Result<Vec<f64>> {
        let c = self.fitted()?.classes.len();
        if c != 2 {
            return Err(Error::NotBinary(c));
        }
        Ok(self
            .joint_log_likelihood(x)?
            .chunks_exact(2)
            .map(|r| r[1] - r[0])
            .collect())
    }

    pub fn extract_state(&self) -> Result<StateMap> {
        let f = self.fitted()?;
        let (c, p) = (f.classes.len(), f.n_features);
        let mut s = StateMap::new();
        s.insert("var_smoothing".into(), StateValue::Float(self.var_smoothing));
        s.insert("n_features_in_".into(), StateValue::Int(p as i64));
        s.insert("classes_".into(), StateValue::Labels(f.classes.clone()));
        s.insert("class_prior_".into(), StateValue::Tensor(Tensor::vector_f64(f.prior.clone())));
        s.insert("theta_".into(), StateValue::Tensor(Tensor::from_f64(f.theta.clone(), vec![c, p])?));
        s.insert("var_".into(), StateValue::Tensor(Tensor::from_f64(f.var.clone(), vec![c, p])?));
        s.insert("epsilon_".into(), StateValue::Float(f.epsilon));
        Ok(s)
    }

    pub fn restore_state(state: &StateMap) -> Result<Self> {
        let f = Fields(state);
        let var_smoothing = f.float("var_smoothing")?;
        if !(var_smoothing > 0.0 && var_smoothing.is_finite()) {
            return Err(Error::invariant("var_smoothing", "must be finite and positive"));
        }
        let p = f.positive_count("n_features_in_")?;
        let classes = f.labels("classes_")?.clone();
        let c = classes.len();
        if c == 0 {
            return Err(Error::invariant("classes_", "no classes"));
        }
        let prior = f.f64_tensor("class_prior_", &[c])?;
        if prior.iter().any(|v| !(*v >= 0.0 && v.is_finite()))
            || (prior.iter().sum::<f64>() - 1.0).abs() > 1e-12
        {
            return Err(Error::invariant("class_prior_", "must be non-negative and sum to 1"));
        }
        let theta = f.f64_tensor("theta_", &[c, p])?;
        require_finite("theta_", &theta)?;
        let var = f.f64_tensor("var_", &[c, p])?;
        if var.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::invariant("var_", "variances must be finite and positive"));
        }
        let epsilon = f.float("epsilon_")?;
        Ok(GaussianNb {
            var_smoothing,
            classes: None,
            fitted: Some(Fitted {
                n_features: p,
                classes,
                prior,
                theta,
                var,
                epsilon,
            }),
        })
    }
}
