use crate::error::{Error, Result};
use crate::rng::SeededRng;
use crate::state::{StateMap, StateValue};
use crate::tensor::{Tensor, TypedScalar};

use super::{input_matrix, require_finite, squared_distance, Dataset, Fields};

pub(super) const FIELDS: &[&str] = &[
    "n_clusters",
    "max_iter",
    "random_state",
    "n_features_in_",
    "cluster_centers_",
    "labels_",
    "inertia_",
    "n_iter_",
];

/// Lloyd's algorithm from a k-means++ start drawn with [`SeededRng`].
///
/// Iteration stops once an update leaves every assignment unchanged, or at
/// `max_iter`. A cluster left empty by an update is re-seeded with the point
/// farthest from its current center. `labels_` always holds the nearest
/// center for each training point under the final centers.
#[derive(Debug, Clone, PartialEq)]
pub struct KMeans {
    pub n_clusters: usize,
    pub random_state: u64,
    pub max_iter: usize,
    fitted: Option<Fitted>,
}

#[derive(Debug, Clone, PartialEq)]
struct Fitted {
    n_features: usize,
    centers: Vec<f64>,
    labels: Vec<i64>,
    inertia: f64,
    n_iter: usize,
}

impl Default for KMeans {
    fn default() -> Self {
        KMeans::new(2, 0, 300)
    }
}

fn nearest(row: &[f64], centers: &[f64], p: usize) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, center) in centers.chunks_exact(p).enumerate() {
        let d = squared_distance(row, center);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn assign(x: &[f64], centers: &[f64], p: usize) -> Vec<usize> {
    x.chunks_exact(p).map(|row| nearest(row, centers, p).0).collect()
}

fn kmeans_plus_plus(x: &[f64], n: usize, p: usize, k: usize, rng: &mut SeededRng) -> Vec<f64> {
    let row = |i: usize| &x[i * p..(i + 1) * p];
    let mut chosen = vec![rng.next_index(n)];
    let mut dist: Vec<f64> = (0..n).map(|i| squared_distance(row(i), row(chosen[0]))).collect();
    while chosen.len() < k {
        let total: f64 = dist.iter().sum();
        let next = if total > 0.0 {
            let target = rng.next_f64() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, d) in dist.iter().enumerate() {
                acc += d;
                if *d > 0.0 && acc > target {
                    pick = Some(i);
                    break;
                }
            }
            // rounding can leave `target` past the final sum
            pick.unwrap_or_else(|| dist.iter().rposition(|d| *d > 0.0).expect("positive total"))
        } else {
            // every point coincides with a center already
            (0..n).find(|i| !chosen.contains(i)).unwrap_or(0)
        };
        chosen.push(next);
        for (i, d) in dist.iter_mut().enumerate() {
            *d = d.min(squared_distance(row(i), row(next)));
        }
    }
    chosen.iter().flat_map(|&i| row(i).to_vec()).collect()
}

fn update_centers(x: &[f64], p: usize, k: usize, labels: &[usize], old: &[f64]) -> Vec<f64> {
    let mut sums = vec![0.0; k * p];
    let mut counts = vec![0usize; k];
    for (row, &l) in x.chunks_exact(p).zip(labels) {
        counts[l] += 1;
        for (s, v) in sums[l * p..(l + 1) * p].iter_mut().zip(row) {
            *s += v;
        }
    }
    let mut centers = sums;
    for c in 0..k {
        if counts[c] > 0 {
            centers[c * p..(c + 1) * p]
                .iter_mut()
                .for_each(|v| *v /= counts[c] as f64);
        }
    }
    let empty: Vec<usize> = (0..k).filter(|&c| counts[c] == 0).collect();
    if !empty.is_empty() {
        let mut far: Vec<f64> = x
            .chunks_exact(p)
            .zip(labels)
            .map(|(row, &l)| squared_distance(row, &old[l * p..(l + 1) * p]))
            .collect();
        for c in empty {
            let mut pick = 0;
            for (i, d) in far.iter().enumerate() {
                if *d > far[pick] {
                    pick = i;
                }
            }
            centers[c * p..(c + 1) * p].copy_from_slice(&x[pick * p..(pick + 1) * p]);
            far[pick] = f64::NEG_INFINITY;
        }
    }
    centers
}

impl KMeans {
    pub fn new(n_clusters: usize, random_state: u64, max_iter: usize) -> Self {
        KMeans {
            n_clusters,
            random_state,
            max_iter,
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

    /// Row-major `[k, p]` centers.
    pub fn centers(&self) -> Result<&[f64]> {
        Ok(&self.fitted()?.centers)
    }

    pub fn labels(&self) -> Result<&[i64]> {
        Ok(&self.fitted()?.labels)
    }

    pub fn inertia(&self) -> Result<f64> {
        Ok(self.fitted()?.inertia)
    }

    pub fn n_iter(&self) -> Result<usize> {
        Ok(self.fitted()?.n_iter)
    }

    pub fn fit(&mut self, ds: &Dataset) -> Result<()> {
        let (n, p, k) = (ds.n_samples(), ds.n_features(), self.n_clusters);
        if k == 0 || n < k {
            return Err(Error::TooFewSamples { n, k });
        }
        let x = ds.features();
        require_finite("X", &x)?;
        let mut rng = SeededRng::new(self.random_state);
        let mut centers = kmeans_plus_plus(&x, n, p, k, &mut rng);
        let mut labels = assign(&x, &centers, p);
        let mut n_iter = 0;
        while n_iter < self.max_iter {
            centers = update_centers(&x, p, k, &labels, &centers);
            n_iter += 1;
            let next = assign(&x, &centers, p);
            let stable = next == labels;
            labels = next;
            if stable {
                break;
            }
        }
        let inertia = x
            .chunks_exact(p)
            .zip(&labels)
            .map(|(row, &l)| squared_distance(row, &centers[l * p..(l + 1) * p]))
            .sum();
        self.fitted = Some(Fitted {
            n_features: p,
            centers,
            labels: labels.into_iter().map(|l| l as i64).collect(),
            inertia,
            n_iter,
        });
        Ok(())
    }

    pub fn predict(&self, x: &Tensor) -> Result<Tensor> {
        let f = self.fitted()?;
        let (_, values) = input_matrix(x, f.n_features)?;
        Ok(Tensor::vector_i64(
            assign(&values, &f.centers, f.n_features)
                .into_iter()
                .map(|l| l as i64)
                .collect(),
        ))
    }

    pub fn extract_state(&self) -> Result<StateMap> {
        let f = self.fitted()?;
        let k = self.n_clusters;
        let mut s = StateMap::new();
        s.insert("n_clusters".into(), StateValue::Int(k as i64));
        s.insert("max_iter".into(), StateValue::Int(self.max_iter as i64));
        s.insert("random_state".into(), StateValue::Int(self.random_state as i64));
        s.insert("n_features_in_".into(), StateValue::Int(f.n_features as i64));
        s.insert(
            "cluster_centers_".into(),
            StateValue::Tensor(Tensor::from_f64(f.centers.clone(), vec![k, f.n_features])?),
        );
        s.insert("labels_".into(), StateValue::Tensor(Tensor::vector_i64(f.labels.clone())));
        s.insert("inertia_".into(), StateValue::Scalar(TypedScalar::Float64(f.inertia)));
        s.insert("n_iter_".into(), StateValue::Int(f.n_iter as i64));
        Ok(s)
    }

    pub fn restore_state(state: &StateMap) -> Result<Self> {
        let f = Fields(state);
        let k = f.positive_count("n_clusters")?;
        let max_iter = f.count("max_iter")?;
        let random_state = f.int("random_state")? as u64;
        let p = f.positive_count("n_features_in_")?;
        let centers = f.f64_tensor("cluster_centers_", &[k, p])?;
        require_finite("cluster_centers_", &centers)?;
        let labels_t = f.tensor("labels_")?;
        let labels = match (labels_t.ndim(), labels_t.as_i64()) {
            (1, Some(v)) => v.to_vec(),
            _ => return Err(Error::invariant("labels_", "expected a 1-D int64 tensor")),
        };
        if labels.iter().any(|&l| l < 0 || l as usize >= k) {
            return Err(Error::invariant("labels_", format!("labels must lie in [0, {k})")));
        }
        let inertia = f.scalar_f64("inertia_")?;
        if !(inertia >= 0.0 && inertia.is_finite()) {
            return Err(Error::invariant("inertia_", "must be finite and non-negative"));
        }
        let n_iter = f.count("n_iter_")?;
        if n_iter > max_iter {
            return Err(Error::invariant("n_iter_", "exceeds max_iter"));
        }
        Ok(KMeans {
            n_clusters: k,
            random_state,
            max_iter,
            fitted: Some(Fitted {
                n_features: p,
                centers,
                labels,
                inertia,
                n_iter,
            }),
        })
    }
}
