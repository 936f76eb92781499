//! k-nearest-neighbor classification of embeddings, accuracy bookkeeping,
//! and mean ± sample standard deviation across folds.

use serde::{Deserialize, Serialize};

use crate::error::{invalid_config, invalid_input, Result};
use crate::numerics::{sq_euclidean, Matrix};

pub const DEFAULT_KNN_K: usize = 3;

/// Training indices sorted by `(squared distance, index)`.
pub(crate) fn ranked_neighbors(train: &Matrix, point: &[f64]) -> Vec<(f64, usize)> {
    let mut ranked: Vec<(f64, usize)> = train
        .row_iter()
        .enumerate()
        .map(|(j, row)| (sq_euclidean(row, point), j))
        .collect();
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    ranked
}

/// Majority vote over the `k` nearest training points.
///
/// Distance ties go to the lower training index. Vote ties go to whichever
/// tied class owns the nearest of the `k` neighbors.
pub fn knn_predict(
    z_train: &Matrix,
    y_train: &[usize],
    z_test: &Matrix,
    k: usize,
) -> Result<Vec<usize>> {
    if z_train.rows() == 0 {
        return Err(invalid_input("k-NN needs a nonempty training set"));
    }
    if y_train.len() != z_train.rows() {
        return Err(invalid_input("training labels and embedding differ in length"));
    }
    if z_test.cols() != z_train.cols() {
        return Err(invalid_input("training and test embeddings differ in dimension"));
    }
    if k == 0 || k > z_train.rows() {
        return Err(invalid_config(format!(
            "k = {k} must lie in 1..={}",
            z_train.rows()
        )));
    }
    let classes = y_train.iter().max().map_or(0, |m| m + 1);
    let mut votes = vec![0usize; classes];
    let mut preds = Vec::with_capacity(z_test.rows());
    for point in z_test.row_iter() {
        let ranked = ranked_neighbors(z_train, point);
        votes.iter_mut().for_each(|v| *v = 0);
        for &(_, j) in &ranked[..k] {
            votes[y_train[j]] += 1;
        }
        let top = *votes.iter().max().expect("nonempty");
        // First neighbor in rank order whose class has the top count.
        let label = ranked[..k]
            .iter()
            .map(|&(_, j)| y_train[j])
            .find(|&c| votes[c] == top)
            .expect("some neighbor carries the top vote");
        preds.push(label);
    }
    Ok(preds)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub accuracy: f64,
    /// `None` for classes with no test samples.
    pub per_class_accuracy: Vec<Option<f64>>,
    /// `confusion[true][pred]`
    pub confusion: Vec<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fold: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

impl MetricsRecord {
    pub fn correct(&self) -> usize {
        (0..self.confusion.len()).map(|c| self.confusion[c][c]).sum()
    }

    pub fn total(&self) -> usize {
        self.confusion.iter().flatten().sum()
    }
}

pub fn accuracy(pred: &[usize], truth: &[usize]) -> Result<MetricsRecord> {
    if pred.len() != truth.len() {
        return Err(invalid_input(format!(
            "{} predictions for {} labels",
            pred.len(),
            truth.len()
        )));
    }
    if truth.is_empty() {
        return Err(invalid_input("accuracy of an empty prediction set"));
    }
    let classes = pred.iter().chain(truth).max().map_or(0, |m| m + 1);
    let mut confusion = vec![vec![0usize; classes]; classes];
    for (&p, &t) in pred.iter().zip(truth) {
        confusion[t][p] += 1;
    }
    let per_class_accuracy = confusion
        .iter()
        .enumerate()
        .map(|(c, row)| {
            let n: usize = row.iter().sum();
            (n > 0).then(|| row[c] as f64 / n as f64)
        })
        .collect();
    let correct: usize = (0..classes).map(|c| confusion[c][c]).sum();
    Ok(MetricsRecord {
        accuracy: correct as f64 / truth.len() as f64,
        per_class_accuracy,
        confusion,
        fold: None,
        config_hash: None,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// Sample standard deviation (`n − 1` denominator); 0 for one value.
    pub std: f64,
    pub n: usize,
}

pub fn summarize(values: &[f64]) -> Result<Summary> {
    if values.is_empty() {
        return Err(invalid_input("cannot summarize an empty list"));
    }
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let std = if n > 1 {
        let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
        (ss / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    Ok(Summary { mean, std, n })
}

pub fn aggregate_folds(records: &[MetricsRecord]) -> Result<Summary> {
    let accs: Vec<f64> = records.iter().map(|r| r.accuracy).collect();
    summarize(&accs)
}
