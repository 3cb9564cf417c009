#![allow(dead_code)]

use std::path::PathBuf;

use milo::models::{
    Dataset, DecisionTreeClassifier, GaussianNb, KMeans, LinearRegression, LogisticRegression, Model,
    DECISION_TREE, GAUSSIAN_NB, KMEANS, LINEAR_REGRESSION, LOGISTIC_REGRESSION, MODEL_TYPES,
};
use milo::rng::SeededRng;
use milo::transport::{export_model, ModelDocument};
use milo::Tensor;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests").join("fixtures").join(name)
}

pub fn golden_text() -> String {
    std::fs::read_to_string(fixture("golden_linear_regression.json")).expect("golden fixture")
}

pub const GOLDEN_ROWS: [[f64; 2]; 4] = [[1.0, 1.0], [1.0, 2.0], [2.0, 2.0], [2.0, 3.0]];
pub const GOLDEN_TARGETS: [f64; 4] = [6.0, 8.0, 9.0, 11.0];

pub fn golden_dataset() -> Dataset {
    let rows: Vec<Vec<f64>> = GOLDEN_ROWS.iter().map(|r| r.to_vec()).collect();
    Dataset::from_rows(&rows, Some(GOLDEN_TARGETS.to_vec())).unwrap()
}

pub fn golden_model() -> Model {
    let mut m = Model::LinearRegression(LinearRegression::default());
    m.fit(&golden_dataset()).unwrap();
    m
}

fn random_rows(rng: &mut SeededRng, n: usize, p: usize) -> Vec<Vec<f64>> {
    let scale = 0.1 + 10.0 * rng.next_f64();
    (0..n)
        .map(|_| (0..p).map(|_| scale * rng.next_normal()).collect())
        .collect()
}

/// A model of `model_type` fitted on random data drawn from `rng`, with its
/// training set.
pub fn random_fitted(model_type: &str, rng: &mut SeededRng) -> (Model, Dataset) {
    let n = 6 + rng.next_index(30);
    let p = 1 + rng.next_index(4);
    let rows = random_rows(rng, n, p);
    let (mut model, ds) = match model_type {
        LINEAR_REGRESSION => {
            let w: Vec<f64> = (0..p).map(|_| rng.next_normal()).collect();
            let y = rows
                .iter()
                .map(|r| r.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() + rng.next_normal())
                .collect();
            (
                Model::LinearRegression(LinearRegression::new(rng.next_index(4) != 0)),
                Dataset::from_rows(&rows, Some(y)).unwrap(),
            )
        }
        LOGISTIC_REGRESSION => {
            let labels: Vec<i64> = (0..n).map(|i| 3 + 4 * (i % 2) as i64).collect();
            (
                Model::LogisticRegression(LogisticRegression::new(50 + rng.next_index(200), 1e-6, 0.5)),
                Dataset::with_labels(&rows, labels).unwrap(),
            )
        }
        DECISION_TREE => {
            let k = 2 + rng.next_index(3);
            let labels: Vec<i64> = (0..n).map(|_| rng.next_index(k) as i64 - 1).collect();
            (
                Model::DecisionTreeClassifier(DecisionTreeClassifier::new(1 + rng.next_index(6))),
                Dataset::with_labels(&rows, labels).unwrap(),
            )
        }
        GAUSSIAN_NB => {
            let k = 2 + rng.next_index(2);
            let labels: Vec<i64> = (0..n).map(|i| (i % k) as i64 * 10).collect();
            (
                Model::GaussianNb(GaussianNb::default()),
                Dataset::with_labels(&rows, labels).unwrap(),
            )
        }
        KMEANS => {
            let k = 1 + rng.next_index(3);
            (
                Model::KMeans(KMeans::new(k, rng.next_u64(), 100)),
                Dataset::from_rows(&rows, None).unwrap(),
            )
        }
        other => panic!("unregistered {other}"),
    };
    model.fit(&ds).unwrap();
    (model, ds)
}

/// Exported document of a random model; the type cycles with `i`.
pub fn random_document(i: usize, rng: &mut SeededRng) -> ModelDocument {
    let (model, _) = random_fitted(MODEL_TYPES[i % MODEL_TYPES.len()], rng);
    export_model(&model).unwrap()
}

pub fn random_inputs(rng: &mut SeededRng, rows: usize, p: usize) -> Tensor {
    Tensor::from_rows(&random_rows(rng, rows, p)).unwrap()
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, sorted
/// descending.
pub fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let n = a.len();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |j| *j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q] == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for row in a.iter_mut() {
                    let (akp, akq) = (row[p], row[q]);
                    row[p] = c * akp - s * akq;
                    row[q] = s * akp + c * akq;
                }
                let (top, bottom) = a.split_at_mut(q);
                for (apk, aqk) in top[p].iter_mut().zip(bottom[0].iter_mut()) {
                    let (x, y) = (*apk, *aqk);
                    *apk = c * x - s * y;
                    *aqk = s * x + c * y;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    ev.sort_by(|x, y| y.partial_cmp(x).unwrap());
    ev
}

/// `Xc^T Xc` for the column-centered rows.
pub fn centered_gram(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = rows.len() as f64;
    let p = rows[0].len();
    let means: Vec<f64> = (0..p).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n).collect();
    (0..p)
        .map(|i| {
            (0..p)
                .map(|j| rows.iter().map(|r| (r[i] - means[i]) * (r[j] - means[j])).sum())
                .collect()
        })
        .collect()
}

/// Minimum within-cluster sum of squares over every assignment of `rows` to
/// `k` non-empty clusters, with one optimal assignment.
pub fn exhaustive_kmeans(rows: &[Vec<f64>], k: usize) -> (f64, Vec<usize>) {
    let n = rows.len();
    let mut best = (f64::INFINITY, Vec::new());
    let total = k.pow(n as u32);
    for code in 0..total {
        let assign: Vec<usize> = (0..n).map(|i| (code / k.pow(i as u32)) % k).collect();
        if (0..k).any(|c| !assign.contains(&c)) {
            continue;
        }
        let mut cost = 0.0;
        for c in 0..k {
            let members: Vec<&Vec<f64>> = rows.iter().zip(&assign).filter(|(_, a)| **a == c).map(|(r, _)| r).collect();
            let p = members[0].len();
            for j in 0..p {
                let m = members.iter().map(|r| r[j]).sum::<f64>() / members.len() as f64;
                cost += members.iter().map(|r| (r[j] - m).powi(2)).sum::<f64>();
            }
        }
        if cost < best.0 {
            best = (cost, assign);
        }
    }
    best
}

fn gini(labels: &[i64]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let mut classes = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    let n = labels.len() as f64;
    1.0 - classes
        .iter()
        .map(|c| {
            let f = labels.iter().filter(|l| *l == c).count() as f64 / n;
            f * f
        })
        .sum::<f64>()
}

/// Best Gini split of a single feature by trying every midpoint between
/// distinct sorted values; ties go to the smallest threshold.
pub fn brute_force_threshold(xs: &[f64], labels: &[i64]) -> f64 {
    let mut values = xs.to_vec();
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    values.dedup();
    let n = xs.len() as f64;
    let mut best = (f64::INFINITY, f64::NAN);
    for w in values.windows(2) {
        let t = (w[0] + w[1]) / 2.0;
        let left: Vec<i64> = xs.iter().zip(labels).filter(|(x, _)| **x <= t).map(|(_, l)| *l).collect();
        let right: Vec<i64> = xs.iter().zip(labels).filter(|(x, _)| **x > t).map(|(_, l)| *l).collect();
        let weighted = left.len() as f64 / n * gini(&left) + right.len() as f64 / n * gini(&right);
        if weighted < best.0 {
            best = (weighted, t);
        }
    }
    best.1
}
