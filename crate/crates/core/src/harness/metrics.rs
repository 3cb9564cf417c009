use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MetricKind {
    Mse,
    R2,
    Accuracy,
    /// Mean of `max(0, 1 - y*f)` over labels in {-1, +1}; {0, 1} labels are
    /// mapped to {-1, +1} first.
    Hinge,
    /// Fraction of identical cluster assignments.
    ClusterMatch,
}

impl MetricKind {
    pub const ALL: [MetricKind; 5] = [
        MetricKind::Mse,
        MetricKind::R2,
        MetricKind::Accuracy,
        MetricKind::Hinge,
        MetricKind::ClusterMatch,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MetricKind::Mse => "mse",
            MetricKind::R2 => "r2",
            MetricKind::Accuracy => "accuracy",
            MetricKind::Hinge => "hinge",
            MetricKind::ClusterMatch => "cluster_match",
        }
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MetricKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MetricKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::UndefinedMetric(format!("unknown metric `{s}`")))
    }
}

fn signed_label(y: f64) -> Result<f64> {
    match y {
        1.0 => Ok(1.0),
        0.0 | -1.0 => Ok(-1.0),
        v => Err(Error::UndefinedMetric(format!("hinge needs labels in {{0, 1}} or {{-1, +1}}, got {v}"))),
    }
}

/// `y_pred` holds predictions, or signed decision scores for `Hinge`.
pub fn compute_metric(kind: MetricKind, y_true: &[f64], y_pred: &[f64]) -> Result<f64> {
    if y_true.len() != y_pred.len() {
        return Err(Error::LengthMismatch(y_true.len(), y_pred.len()));
    }
    if y_true.is_empty() {
        return Err(Error::UndefinedMetric(format!("{kind} of an empty sample")));
    }
    let n = y_true.len() as f64;
    let pairs = || y_true.iter().zip(y_pred);
    Ok(match kind {
        MetricKind::Mse => pairs().map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / n,
        MetricKind::R2 => {
            let mean = y_true.iter().sum::<f64>() / n;
            let ss_tot: f64 = y_true.iter().map(|a| (a - mean) * (a - mean)).sum();
            if ss_tot == 0.0 {
                return Err(Error::UndefinedMetric("r2 of a constant target".into()));
            }
            let ss_res: f64 = pairs().map(|(a, b)| (a - b) * (a - b)).sum();
            1.0 - ss_res / ss_tot
        }
        MetricKind::Accuracy | MetricKind::ClusterMatch => {
            pairs().filter(|(a, b)| a == b).count() as f64 / n
        }
        MetricKind::Hinge => {
            let mut total = 0.0;
            for (a, f) in pairs() {
                total += (1.0 - signed_label(*a)? * f).max(0.0);
            }
            total / n
        }
    })
}
