use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};
use crate::models::{Dataset, DecisionTreeClassifier, Model, GAUSSIAN_NB, KMEANS, LINEAR_REGRESSION, LOGISTIC_REGRESSION};
use crate::rng::SeededRng;
use crate::transport::{export_model, import_model, load_document, save_document};

use super::metrics::{compute_metric, MetricKind};

/// Pass threshold on the summed absolute metric drift.
pub const QC_THRESHOLD: f64 = 1e-8;

const N_SAMPLES: usize = 200;
const N_CLUSTERS: usize = 3;
// Shallow enough that the tree does not memorize the overlapping blobs.
const QC_TREE_DEPTH: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct QcCase {
    pub model_type: String,
    pub metric: MetricKind,
    pub pre: f64,
    pub post: f64,
    pub difference: f64,
}

/// A model whose pipeline stopped before both metrics were available.
#[derive(Debug, Clone, PartialEq)]
pub struct QcFailure {
    pub model_type: String,
    pub stage: &'static str,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QcReport {
    pub seed: u64,
    pub cases: Vec<QcCase>,
    pub failures: Vec<QcFailure>,
    pub cumulative_difference: f64,
    pub clusters_identical: bool,
    pub passed: bool,
}

impl QcReport {
    /// Model types that failed outright or drifted on some metric.
    pub fn offending(&self) -> Vec<&str> {
        let mut out: Vec<&str> = self.failures.iter().map(|f| f.model_type.as_str()).collect();
        for c in &self.cases {
            if c.difference.partial_cmp(&QC_THRESHOLD) != Some(std::cmp::Ordering::Less) && !out.contains(&c.model_type.as_str()) {
                out.push(&c.model_type);
            }
        }
        out
    }
}

impl fmt::Display for QcReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "qc seed={}", self.seed)?;
        writeln!(f, "{:<24} {:<14} {:<24} {:<24} abs_diff", "model_type", "metric", "pre", "post")?;
        for c in &self.cases {
            writeln!(
                f,
                "{:<24} {:<14} {:<24} {:<24} {:?}",
                c.model_type,
                c.metric.as_str(),
                format!("{:?}", c.pre),
                format!("{:?}", c.post),
                c.difference
            )?;
        }
        for x in &self.failures {
            writeln!(f, "FAILED {} at {}: {}", x.model_type, x.stage, x.message)?;
        }
        writeln!(f, "cumulative_difference={:?}", self.cumulative_difference)?;
        writeln!(f, "clusters_identical={}", self.clusters_identical)?;
        write!(f, "passed={}", self.passed)
    }
}

struct Datasets {
    regression: Dataset,
    classification: Dataset,
    clustering: Dataset,
}

fn blobs(rng: &mut SeededRng, centers: &[[f64; 2]], n: usize, spread: f64) -> (Vec<Vec<f64>>, Vec<i64>) {
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let c = i % centers.len();
        rows.push(
            centers[c]
                .iter()
                .map(|m| m + spread * rng.next_normal())
                .collect(),
        );
        labels.push(c as i64);
    }
    (rows, labels)
}

fn synthetic(seed: u64) -> Result<Datasets> {
    let mut rng = SeededRng::new(seed);

    let weights = [1.5, -2.0, 0.5];
    let mut rows = Vec::with_capacity(N_SAMPLES);
    let mut y = Vec::with_capacity(N_SAMPLES);
    for _ in 0..N_SAMPLES {
        let row: Vec<f64> = (0..weights.len()).map(|_| rng.next_normal()).collect();
        let target = 4.0 + row.iter().zip(weights).map(|(x, w)| x * w).sum::<f64>() + 0.1 * rng.next_normal();
        rows.push(row);
        y.push(target);
    }
    let regression = Dataset::from_rows(&rows, Some(y))?;

    let (rows, labels) = blobs(&mut rng, &[[-1.0, -1.0], [1.0, 1.0]], N_SAMPLES, 1.0);
    let classification = Dataset::with_labels(&rows, labels)?;

    let (rows, _) = blobs(&mut rng, &[[-4.0, 0.0], [0.0, 4.0], [4.0, 0.0]], N_SAMPLES, 0.8);
    let clustering = Dataset::from_rows(&rows, None)?;

    Ok(Datasets {
        regression,
        classification,
        clustering,
    })
}

fn models(seed: u64) -> Vec<Model> {
    let mut kmeans = crate::models::KMeans::default();
    kmeans.n_clusters = N_CLUSTERS;
    kmeans.random_state = seed;
    vec![
        Model::unfitted(LINEAR_REGRESSION).expect("registered"),
        Model::unfitted(LOGISTIC_REGRESSION).expect("registered"),
        Model::DecisionTreeClassifier(DecisionTreeClassifier::new(QC_TREE_DEPTH)),
        Model::unfitted(GAUSSIAN_NB).expect("registered"),
        Model::KMeans(kmeans),
    ]
}

fn metrics_of(model: &Model, ds: &Dataset) -> Result<Vec<(MetricKind, f64)>> {
    let x = ds.x();
    match model.model_type() {
        LINEAR_REGRESSION => {
            let y = ds.targets()?;
            let pred = model.predict(x)?.to_f64_vec();
            Ok(vec![
                (MetricKind::Mse, compute_metric(MetricKind::Mse, &y, &pred)?),
                (MetricKind::R2, compute_metric(MetricKind::R2, &y, &pred)?),
            ])
        }
        KMEANS => Ok(Vec::new()),
        _ => {
            let y: Vec<f64> = ds.labels()?.into_iter().map(|l| l as f64).collect();
            let scores = model
                .decision_scores(x)
                .ok_or_else(|| Error::UndefinedMetric("classifier without decision scores".into()))??;
            let pred = model.predict(x)?.to_f64_vec();
            Ok(vec![
                (MetricKind::Hinge, compute_metric(MetricKind::Hinge, &y, &scores)?),
                (MetricKind::Accuracy, compute_metric(MetricKind::Accuracy, &y, &pred)?),
            ])
        }
    }
}

static RUN_COUNTER: AtomicU64 = AtomicU64::new(0);

fn work_dir() -> Result<PathBuf> {
    let dir = std::env::temp_dir().join(format!(
        "milo-qc-{}-{}",
        std::process::id(),
        RUN_COUNTER.fetch_add(1, Ordering::Relaxed)
    ));
    fs::create_dir_all(&dir).map_err(|source| Error::IoFailure {
        path: dir.clone(),
        source,
    })?;
    Ok(dir)
}

/// Fit, score, export to a file, import and score again, for every model
/// type, on synthetic data drawn from `seed`.
pub fn run_qc_pipeline(seed: u64) -> QcReport {
    run_qc_pipeline_with(seed, |_, _| {})
}

/// As [`run_qc_pipeline`], calling `after_export(model_type, file)` between
/// writing each exported file and reading it back.
pub fn run_qc_pipeline_with(seed: u64, mut after_export: impl FnMut(&str, &Path)) -> QcReport {
    let mut report = QcReport {
        seed,
        cases: Vec::new(),
        failures: Vec::new(),
        cumulative_difference: 0.0,
        clusters_identical: true,
        passed: false,
    };
    let fail = |report: &mut QcReport, model_type: &str, stage, e: Error| {
        report.failures.push(QcFailure {
            model_type: model_type.to_owned(),
            stage,
            message: e.to_string(),
        });
    };

    let data = match synthetic(seed) {
        Ok(d) => d,
        Err(e) => {
            fail(&mut report, "dataset", "generate", e);
            return report;
        }
    };
    let dir = match work_dir() {
        Ok(d) => d,
        Err(e) => {
            fail(&mut report, "workspace", "create", e);
            return report;
        }
    };

    for mut model in models(seed) {
        let name = model.model_type();
        let ds = match name {
            LINEAR_REGRESSION => &data.regression,
            KMEANS => &data.clustering,
            _ => &data.classification,
        };
        if let Err(e) = model.fit(ds) {
            fail(&mut report, name, "fit", e);
            continue;
        }
        let pre = match metrics_of(&model, ds) {
            Ok(m) => m,
            Err(e) => {
                fail(&mut report, name, "score", e);
                continue;
            }
        };
        let pre_pred = model.predict(ds.x());

        let file = dir.join(format!("{name}.json"));
        if let Err(e) = export_model(&model).and_then(|doc| save_document(&doc, &file)) {
            fail(&mut report, name, "export", e);
            continue;
        }
        after_export(name, &file);
        let restored = match load_document(&file).and_then(|doc| import_model(&doc)) {
            Ok(m) => m,
            Err(e) => {
                fail(&mut report, name, "import", e);
                continue;
            }
        };
        let post = match metrics_of(&restored, ds) {
            Ok(m) => m,
            Err(e) => {
                fail(&mut report, name, "rescore", e);
                continue;
            }
        };
        for ((metric, a), (_, b)) in pre.into_iter().zip(post) {
            let difference = (a - b).abs();
            report.cumulative_difference += difference;
            report.cases.push(QcCase {
                model_type: name.to_owned(),
                metric,
                pre: a,
                post: b,
                difference,
            });
        }

        if name == KMEANS {
            let outcome = pre_pred.and_then(|a| restored.predict(ds.x()).map(|b| (a, b)));
            match outcome {
                Ok((a, b)) => {
                    let (a, b): (Vec<f64>, Vec<f64>) = (a.to_f64_vec(), b.to_f64_vec());
                    let matched = compute_metric(MetricKind::ClusterMatch, &a, &b).unwrap_or(0.0);
                    report.clusters_identical &= a == b;
                    report.cases.push(QcCase {
                        model_type: name.to_owned(),
                        metric: MetricKind::ClusterMatch,
                        pre: 1.0,
                        post: matched,
                        difference: (1.0 - matched).abs(),
                    });
                }
                Err(e) => {
                    report.clusters_identical = false;
                    fail(&mut report, name, "predict", e);
                }
            }
        }
    }
    let _ = fs::remove_dir_all(&dir);

    report.passed = report.failures.is_empty()
        && report.cumulative_difference < QC_THRESHOLD
        && report.clusters_identical;
    report
}
