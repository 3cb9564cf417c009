use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::state::{StateMap, StateValue};
use crate::tensor::{Tensor, TypedScalar};

use super::{input_matrix, require_finite, Dataset, Fields};

pub(super) const FIELDS: &[&str] = &[
    "fit_intercept",
    "copy_X",
    "n_jobs",
    "positive",
    "n_features_in_",
    "coef_",
    "rank_",
    "singular_",
    "intercept_",
];

/// Ordinary least squares solved through the SVD of the centered design
/// matrix, so the rank and singular values are part of the learned state.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearRegression {
    pub fit_intercept: bool,
    // carried for file compatibility only; they never change behaviour
    copy_x: bool,
    n_jobs: Option<i64>,
    fitted: Option<Fitted>,
}

#[derive(Debug, Clone, PartialEq)]
struct Fitted {
    coef: Vec<f64>,
    intercept: f64,
    rank: usize,
    singular: Vec<f64>,
}

impl Default for LinearRegression {
    fn default() -> Self {
        LinearRegression::new(true)
    }
}

/// Singular values at or below this are treated as zero.
pub fn rank_tolerance(n_samples: usize, n_features: usize, max_singular: f64) -> f64 {
    f64::EPSILON * n_samples.max(n_features) as f64 * max_singular
}

impl LinearRegression {
    pub fn new(fit_intercept: bool) -> Self {
        LinearRegression {
            fit_intercept,
            copy_x: true,
            n_jobs: None,
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

    pub fn coef(&self) -> Result<&[f64]> {
        Ok(&self.fitted()?.coef)
    }

    pub fn intercept(&self) -> Result<f64> {
        Ok(self.fitted()?.intercept)
    }

    pub fn rank(&self) -> Result<usize> {
        Ok(self.fitted()?.rank)
    }

    pub fn singular_values(&self) -> Result<&[f64]> {
        Ok(&self.fitted()?.singular)
    }

    pub fn fit(&mut self, ds: &Dataset) -> Result<()> {
        let (n, p) = (ds.n_samples(), ds.n_features());
        let x = ds.features();
        let y = ds.targets()?;
        require_finite("X", &x)?;
        require_finite("y", &y)?;

        let (x_offset, y_offset) = if self.fit_intercept {
            let mut means = vec![0.0; p];
            for row in x.chunks_exact(p) {
                for (m, v) in means.iter_mut().zip(row) {
                    *m += v;
                }
            }
            means.iter_mut().for_each(|m| *m /= n as f64);
            (means, y.iter().sum::<f64>() / n as f64)
        } else {
            (vec![0.0; p], 0.0)
        };

        let a = DMatrix::from_fn(n, p, |i, j| x[i * p + j] - x_offset[j]);
        let b = DVector::from_iterator(n, y.iter().map(|v| v - y_offset));

        let svd = a.svd(true, true);
        let u = svd.u.as_ref().expect("svd computed with U");
        let v_t = svd.v_t.as_ref().expect("svd computed with V^T");
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));

        let singular: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
        let cutoff = rank_tolerance(n, p, singular.first().copied().unwrap_or(0.0));
        let mut coef = vec![0.0; p];
        let mut rank = 0;
        for &k in &order {
            let s = svd.singular_values[k];
            if s <= cutoff {
                continue;
            }
            rank += 1;
            // minimal-norm solution: sum over kept components of (u_k . b / s_k) v_k
            let weight = u.column(k).dot(&b) / s;
            for (j, c) in coef.iter_mut().enumerate() {
                *c += weight * v_t[(k, j)];
            }
        }

        let intercept = if self.fit_intercept {
            y_offset - dot(&x_offset, &coef)
        } else {
            0.0
        };
        self.fitted = Some(Fitted {
            coef,
            intercept,
            rank,
            singular,
        });
        Ok(())
    }

    pub fn predict(&self, x: &Tensor) -> Result<Tensor> {
        let f = self.fitted()?;
        let (m, values) = input_matrix(x, f.coef.len())?;
        let p = f.coef.len();
        let out = (0..m)
            .map(|i| dot(&values[i * p..(i + 1) * p], &f.coef) + f.intercept)
            .collect();
        Ok(Tensor::vector_f64(out))
    }

    pub fn extract_state(&self) -> Result<StateMap> {
        let f = self.fitted()?;
        let mut s = StateMap::new();
        s.insert("fit_intercept".into(), StateValue::Bool(self.fit_intercept));
        s.insert("copy_X".into(), StateValue::Bool(self.copy_x));
        s.insert(
            "n_jobs".into(),
            self.n_jobs.map_or(StateValue::Null, StateValue::Int),
        );
        s.insert("positive".into(), StateValue::Bool(false));
        s.insert("n_features_in_".into(), StateValue::Int(f.coef.len() as i64));
        s.insert("coef_".into(), StateValue::Tensor(Tensor::vector_f64(f.coef.clone())));
        s.insert("rank_".into(), StateValue::Int(f.rank as i64));
        s.insert(
            "singular_".into(),
            StateValue::Tensor(Tensor::vector_f64(f.singular.clone())),
        );
        s.insert(
            "intercept_".into(),
            StateValue::Scalar(TypedScalar::Float64(f.intercept)),
        );
        Ok(s)
    }

    pub fn restore_state(state: &StateMap) -> Result<Self> {
        let f = Fields(state);
        let fit_intercept = f.bool("fit_intercept")?;
        let copy_x = f.bool("copy_X")?;
        let n_jobs = f.optional_int("n_jobs")?;
        if f.bool("positive")? {
            return Err(Error::invariant("positive", "non-negative least squares is not supported"));
        }
        let p = f.positive_count("n_features_in_")?;
        let coef = f.f64_tensor("coef_", &[p])?;
        require_finite("coef_", &coef)?;
        let singular_t = f.tensor("singular_")?;
        if singular_t.ndim() != 1 {
            return Err(Error::invariant("singular_", "must be 1-D"));
        }
        let singular = f.f64_tensor("singular_", singular_t.shape())?;
        if singular.len() > p {
            return Err(Error::invariant("singular_", format!("more than {p} singular values")));
        }
        if singular.iter().any(|s| !s.is_finite() || *s < 0.0)
            || singular.windows(2).any(|w| w[0] < w[1])
        {
            return Err(Error::invariant("singular_", "must be non-negative and non-increasing"));
        }
        let rank = f.count("rank_")?;
        if rank > singular.len() {
            return Err(Error::invariant("rank_", "exceeds the number of singular values"));
        }
        let intercept = f.scalar_f64("intercept_")?;
        if !intercept.is_finite() {
            return Err(Error::invariant("intercept_", "must be finite"));
        }
        Ok(LinearRegression {
            fit_intercept,
            copy_x,
            n_jobs,
            fitted: Some(Fitted {
                coef,
                intercept,
                rank,
                singular,
            }),
        })
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |acc, (x, y)| acc + x * y)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fit(rows: &[Vec<f64>], y: Vec<f64>) -> LinearRegression {
        let mut m = LinearRegression::new(true);
        m.fit(&Dataset::from_rows(rows, Some(y)).unwrap()).unwrap();
        m
    }

    #[test]
    fn reproduces_the_reference_fit() {
        let m = fit(
            &[vec![1.0, 1.0], vec![1.0, 2.0], vec![2.0, 2.0], vec![2.0, 3.0]],
            vec![6.0, 8.0, 9.0, 11.0],
        );
        let coef = m.coef().unwrap();
        assert!((coef[0] - 1.0).abs() < 1e-12);
        assert!((coef[1] - 1.9999999999999993).abs() < 1e-12);
        assert!((m.intercept().unwrap() - 3.0000000000000018).abs() < 1e-12);
        assert_eq!(m.rank().unwrap(), 2);
        let s = m.singular_values().unwrap();
        assert!((s[0] - 1.618033988749895).abs() < 1e-12);
        assert!((s[1] - 0.6180339887498948).abs() < 1e-12);
        let pred = m.predict(&Tensor::from_rows(&[vec![3.0, 5.0]]).unwrap()).unwrap();
        assert!((pred.as_f64().unwrap()[0] - 16.0).abs() < 1e-9);
    }

    #[test]
    fn constant_target_gives_zero_slope() {
        let m = fit(&[vec![0.0], vec![1.0]], vec![5.0, 5.0]);
        assert_eq!(m.coef().unwrap(), [0.0]);
        assert_eq!(m.intercept().unwrap(), 5.0);
    }

    #[test]
    fn exact_line_through_three_points() {
        let m = fit(&[vec![0.0], vec![1.0], vec![2.0]], vec![1.0, 3.0, 5.0]);
        // closed form: slope = cov(x, y) / var(x) = 2, intercept = 3 - 2*1 = 1
        assert!((m.coef().unwrap()[0] - 2.0).abs() < 1e-14);
        assert!((m.intercept().unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn collinear_columns_lower_the_rank() {
        let rows: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64, 2.0 * i as f64]).collect();
        let m = fit(&rows, (0..5).map(|i| 3.0 * i as f64).collect());
        assert_eq!(m.rank().unwrap(), 1);
        // minimal norm split of slope 3 along (1, 2): coef = 3/5 * (1, 2)
        let c = m.coef().unwrap();
        assert!((c[0] - 0.6).abs() < 1e-12 && (c[1] - 1.2).abs() < 1e-12, "{c:?}");
    }

    #[test]
    fn without_intercept() {
        let mut m = LinearRegression::new(false);
        m.fit(&Dataset::from_rows(&[vec![1.0], vec![2.0]], Some(vec![2.0, 4.0])).unwrap())
            .unwrap();
        assert!((m.coef().unwrap()[0] - 2.0).abs() < 1e-14);
        assert_eq!(m.intercept().unwrap(), 0.0);
    }

    #[test]
    fn feature_count_is_checked() {
        let m = fit(&[vec![0.0], vec![1.0]], vec![0.0, 1.0]);
        assert!(matches!(
            m.predict(&Tensor::from_rows(&[vec![1.0, 2.0]]).unwrap()),
            Err(Error::FeatureCountMismatch { expected: 1, actual: 2 })
        ));
    }

    #[test]
    fn state_keys_follow_the_file_order() {
        let m = fit(&[vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]], vec![1.0, 2.0, 3.0]);
        let s = m.extract_state().unwrap();
        assert_eq!(s.keys().map(String::as_str).collect::<Vec<_>>(), FIELDS);
        assert_eq!(LinearRegression::restore_state(&s).unwrap(), m);
    }

    #[test]
    fn missing_coef_is_reported() {
        let m = fit(&[vec![0.0], vec![1.0]], vec![0.0, 1.0]);
        let mut s = m.extract_state().unwrap();
        s.shift_remove("coef_");
        assert!(matches!(
            LinearRegression::restore_state(&s),
            Err(Error::MissingField(f)) if f == "coef_"
        ));
    }
}
