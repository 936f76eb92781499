//! Mini-batch training of the joint objective, stratified holdout, model
//! selection on validation accuracy, and the λ × d sweep.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::affinity::{joint_p, DEFAULT_PERPLEXITY};
use crate::divergence::DivergenceKind;
use crate::encoder::{
    adam_step, embed, loss_and_gradients, one_hot, predict, validate_lambda, AdamConfig,
    EncoderParams, LossParts,
};
use crate::error::{invalid_config, invalid_input, DrenError, Result};
use crate::eval::{accuracy, knn_predict, summarize, Summary, DEFAULT_KNN_K};
use crate::histlayer::{HistMode, HistParams, DEFAULT_BINS};
use crate::numerics::{Matrix, SeededRng};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub lambda: f64,
    pub embed_dim: usize,
    pub divergence: DivergenceKind,
    /// Drop the divergence term from the objective altogether.
    #[serde(default)]
    pub disable_divergence: bool,
    pub perplexity: f64,
    pub batch_size: usize,
    pub epochs: usize,
    #[serde(flatten)]
    pub adam: AdamConfig,
    pub val_fraction: f64,
    pub seed: u64,
    pub histogram: bool,
    pub bins: usize,
    pub hist_mode: HistMode,
    pub folds: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            lambda: 0.5,
            embed_dim: 2,
            divergence: DivergenceKind::Kl,
            disable_divergence: false,
            perplexity: DEFAULT_PERPLEXITY,
            batch_size: 128,
            epochs: 100,
            adam: AdamConfig::default(),
            val_fraction: 0.10,
            seed: 0,
            histogram: false,
            bins: DEFAULT_BINS,
            hist_mode: HistMode::Concat,
            folds: 1,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        validate_lambda(self.lambda)?;
        self.divergence.validate()?;
        self.adam.validate()?;
        if self.embed_dim == 0 {
            return Err(invalid_config("embedding dimension must be positive"));
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return Err(invalid_config(format!(
                "validation fraction must lie in (0, 1), got {}",
                self.val_fraction
            )));
        }
        if !(self.perplexity > 0.0 && self.perplexity < self.batch_size as f64) {
            return Err(invalid_config(format!(
                "perplexity {} must be below the batch size {}",
                self.perplexity, self.batch_size
            )));
        }
        if self.epochs == 0 {
            return Err(invalid_config("epochs must be positive"));
        }
        if self.histogram && self.bins < 2 {
            return Err(invalid_config("histogram needs at least 2 bins"));
        }
        if self.folds == 0 {
            return Err(invalid_config("folds must be positive"));
        }
        Ok(())
    }

    /// Smallest batch that still supports perplexity calibration.
    pub fn min_batch(&self) -> usize {
        (self.perplexity + 2.0).ceil() as usize
    }

    /// Short hex digest of the serialized configuration.
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(&Sha256::digest(&json)[..8])
    }
}

/// Partition of sample indices.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub holdout: Vec<usize>,
}

/// Stratified split: `⌈fraction · n_c⌉` samples of every class go to the
/// holdout, always leaving at least one behind.
pub fn split_train_val(labels: &[usize], fraction: f64, seed: u64) -> Result<Split> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(invalid_config(format!("split fraction must lie in (0, 1), got {fraction}")));
    }
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut by_class = vec![Vec::new(); classes];
    for (i, &c) in labels.iter().enumerate() {
        by_class[c].push(i);
    }
    let mut rng = SeededRng::new(seed);
    let mut split = Split {
        train: Vec::new(),
        holdout: Vec::new(),
    };
    for (c, mut members) in by_class.into_iter().enumerate() {
        if members.is_empty() {
            continue;
        }
        if members.len() < 2 {
            return Err(invalid_input(format!("class {c} has a single sample and cannot be split")));
        }
        rng.shuffle(&mut members);
        // The epsilon absorbs products like 0.1·30 = 3.0000000000000004.
        let take = ((fraction * members.len() as f64 - 1e-9).ceil() as usize).clamp(1, members.len() - 1);
        split.holdout.extend_from_slice(&members[..take]);
        split.train.extend_from_slice(&members[take..]);
    }
    split.train.sort_unstable();
    split.holdout.sort_unstable();
    Ok(split)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: LossParts,
    pub val_accuracy: f64,
    pub batches: usize,
    /// Largest |entry| of the output-layer gradient over the epoch.
    pub head_grad_max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub config_hash: String,
    pub classes: usize,
    pub train_size: usize,
    pub val_size: usize,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_accuracy: f64,
    /// Rows across all batches whose bandwidth search ran out of iterations.
    pub calibration_warnings: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<String>,
    /// Filled in only on request, so reports stay byte-stable by default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time_secs: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub report: TrainReport,
    /// Parameters from the best validation epoch.
    pub params: EncoderParams,
    pub split: Split,
}

fn class_count(labels: &[usize]) -> usize {
    labels.iter().max().map_or(0, |m| m + 1)
}

/// Trains an encoder on `(x, labels)`, holding out a stratified validation
/// set. `P` is rebuilt per mini-batch from the encoder input and treated as
/// a constant.
pub fn train(config: &RunConfig, x: &Matrix, labels: &[usize]) -> Result<TrainOutcome> {
    let classes = class_count(labels);
    train_with_classes(config, x, labels, classes)
}

pub fn train_with_classes(
    config: &RunConfig,
    x: &Matrix,
    labels: &[usize],
    classes: usize,
) -> Result<TrainOutcome> {
    config.validate()?;
    if x.rows() != labels.len() {
        return Err(invalid_input(format!(
            "{} feature rows but {} labels",
            x.rows(),
            labels.len()
        )));
    }
    x.ensure_finite("training features")?;
    if labels.iter().any(|&c| c >= classes) {
        return Err(invalid_input("label outside the class range"));
    }
    let split = split_train_val(labels, config.val_fraction, config.seed)?;
    if split.train.len() < config.min_batch() {
        return Err(invalid_input(format!(
            "{} training samples cannot fill a batch of at least {}",
            split.train.len(),
            config.min_batch()
        )));
    }
    let x_train = x.select_rows(&split.train);
    let x_val = x.select_rows(&split.holdout);
    let y_val: Vec<usize> = split.holdout.iter().map(|&i| labels[i]).collect();

    let mut rng = SeededRng::new(config.seed);
    let hist = if config.histogram {
        Some(HistParams::from_data(&x_train, config.bins, config.hist_mode)?)
    } else {
        None
    };
    let mut params = EncoderParams::init(x.cols(), config.embed_dim, classes, hist, &mut rng)?;
    let divergence = (!config.disable_divergence).then_some(config.divergence);

    let mut order = split.train.clone();
    let mut history = Vec::with_capacity(config.epochs);
    let mut best: Option<(f64, f64, usize, EncoderParams)> = None;
    let mut calibration_warnings = 0;

    for epoch in 0..config.epochs {
        rng.shuffle(&mut order);
        let mut sums = (0.0, 0.0, 0.0);
        let mut batches = 0;
        let mut head_grad_max = 0.0f64;
        for chunk in order.chunks(config.batch_size) {
            if chunk.len() < config.min_batch() {
                continue;
            }
            let xb = x.select_rows(chunk);
            let yb_labels: Vec<usize> = chunk.iter().map(|&i| labels[i]).collect();
            let yb = one_hot(&yb_labels, classes)?;
            let p = match divergence {
                Some(_) => {
                    let input = params.encoder_input(&xb)?;
                    let (p, cond) = joint_p(&input, config.perplexity)?;
                    calibration_warnings += cond.unconverged.len();
                    Some(p)
                }
                None => None,
            };
            let (loss, grads, _) =
                loss_and_gradients(&params, &xb, &yb, p.as_ref(), divergence, config.lambda)?;
            if !(loss.total.is_finite() && loss.class.is_finite() && loss.div.is_finite()) {
                return Err(DrenError::TrainingDiverged {
                    epoch: Some(epoch),
                    reason: "non-finite loss".into(),
                });
            }
            let (hw, hb) = grads.head(&params);
            head_grad_max = hw.iter().chain(hb).fold(head_grad_max, |m, g| m.max(g.abs()));
            adam_step(&mut params, &grads, &config.adam).map_err(|e| match e {
                DrenError::TrainingDiverged { reason, .. } => DrenError::TrainingDiverged {
                    epoch: Some(epoch),
                    reason,
                },
                other => other,
            })?;
            sums.0 += loss.class;
            sums.1 += loss.div;
            batches += 1;
        }
        if batches == 0 {
            return Err(invalid_input("no mini-batch was large enough to train on"));
        }
        let class = sums.0 / batches as f64;
        let div = sums.1 / batches as f64;
        let loss = LossParts::combine(class, div, config.lambda);
        if !params.is_finite() {
            return Err(DrenError::TrainingDiverged {
                epoch: Some(epoch),
                reason: "non-finite parameters".into(),
            });
        }
        let val_accuracy = accuracy(&predict(&params, &x_val)?, &y_val)?.accuracy;
        let better = match &best {
            None => true,
            Some((acc, total, _, _)) => {
                val_accuracy > *acc || (val_accuracy == *acc && loss.total < *total)
            }
        };
        if better {
            best = Some((val_accuracy, loss.total, epoch, params.clone()));
        }
        history.push(EpochRecord {
            epoch,
            loss,
            val_accuracy,
            batches,
            head_grad_max,
        });
    }

    let (best_val_accuracy, _, best_epoch, best_params) = best.expect("at least one epoch");
    Ok(TrainOutcome {
        report: TrainReport {
            config_hash: config.hash(),
            classes,
            train_size: split.train.len(),
            val_size: split.holdout.len(),
            history,
            best_epoch,
            best_val_accuracy,
            calibration_warnings,
            checkpoint: None,
            wall_time_secs: None,
        },
        params: best_params,
        split,
    })
}

/// Labeled samples.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub features: Matrix,
    pub labels: Vec<usize>,
}

impl Dataset {
    pub fn new(features: Matrix, labels: Vec<usize>) -> Result<Self> {
        if features.rows() != labels.len() {
            return Err(invalid_input(format!(
                "{} feature rows but {} labels",
                features.rows(),
                labels.len()
            )));
        }
        Ok(Dataset { features, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn classes(&self) -> usize {
        class_count(&self.labels)
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    /// Stratified `(train, test)` partition.
    pub fn split(&self, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
        let s = split_train_val(&self.labels, test_fraction, seed)?;
        Ok((self.subset(&s.train), self.subset(&s.holdout)))
    }
}

/// One trained-and-evaluated sweep run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRun {
    pub fold: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub knn_accuracy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub lambda: f64,
    pub embed_dim: usize,
    pub runs: Vec<SweepRun>,
    /// Softmax-head test accuracy across folds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<Summary>,
    /// 3-NN test accuracy on the embeddings across folds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub knn_accuracy: Option<Summary>,
    /// λ = 1: the head never trains, so the classifier is unsupervised.
    pub unsupervised_degenerate: bool,
    pub warnings: Vec<String>,
}

impl SweepCell {
    pub fn failed(&self) -> bool {
        self.accuracy.is_none()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub base: RunConfig,
    pub lambdas: Vec<f64>,
    pub dims: Vec<usize>,
    pub folds: usize,
    pub test_fraction: f64,
    pub cells: Vec<SweepCell>,
}

impl SweepReport {
    pub fn all_failed(&self) -> bool {
        self.cells.iter().all(SweepCell::failed)
    }

    /// Accuracy-vs-λ table, one column per embedding dimension.
    pub fn text_table(&self) -> String {
        let mut out = String::from("lambda");
        for d in &self.dims {
            out.push_str(&format!("\td={d}"));
        }
        out.push('\n');
        for &lambda in &self.lambdas {
            out.push_str(&format!("{lambda:.2}"));
            for &d in &self.dims {
                let cell = self
                    .cells
                    .iter()
                    .find(|c| c.lambda == lambda && c.embed_dim == d);
                match cell.and_then(|c| c.accuracy) {
                    Some(s) => out.push_str(&format!("\t{:.2}±{:.2}", 100.0 * s.mean, 100.0 * s.std)),
                    None => out.push_str("\tfailed"),
                }
                if cell.is_some_and(|c| c.unsupervised_degenerate) {
                    out.push('*');
                }
            }
            out.push('\n');
        }
        if self.lambdas.contains(&1.0) {
            out.push_str("* lambda = 1: output layer receives no gradient (unsupervised)\n");
        }
        out
    }
}

fn run_cell(config: &RunConfig, data: &Dataset, test_fraction: f64) -> Result<(f64, f64)> {
    let (train_set, test_set) = data.split(test_fraction, config.seed)?;
    let outcome = train_with_classes(config, &train_set.features, &train_set.labels, data.classes())?;
    let pred = predict(&outcome.params, &test_set.features)?;
    let acc = accuracy(&pred, &test_set.labels)?.accuracy;
    let z_train = embed(&outcome.params, &train_set.features)?;
    let z_test = embed(&outcome.params, &test_set.features)?;
    let knn = knn_predict(&z_train, &train_set.labels, &z_test, DEFAULT_KNN_K)?;
    let knn_acc = accuracy(&knn, &test_set.labels)?.accuracy;
    Ok((acc, knn_acc))
}

/// Trains every `(λ, d, fold)` combination. Run `r` (enumerated λ-major,
/// then d, then fold) uses seed `base.seed ^ r`, which also drives its
/// train/test split. Failed runs are recorded, not propagated.
pub fn sweep(
    base: &RunConfig,
    data: &Dataset,
    lambdas: &[f64],
    dims: &[usize],
    folds: usize,
    test_fraction: f64,
) -> Result<SweepReport> {
    if lambdas.is_empty() || dims.is_empty() {
        return Err(invalid_config("sweep needs at least one lambda and one dimension"));
    }
    if folds == 0 {
        return Err(invalid_config("sweep needs at least one fold"));
    }
    for &l in lambdas {
        validate_lambda(l)?;
    }
    let jobs: Vec<(usize, f64, usize, usize)> = lambdas
        .iter()
        .flat_map(|&l| dims.iter().map(move |&d| (l, d)))
        .flat_map(|(l, d)| (0..folds).map(move |f| (l, d, f)))
        .enumerate()
        .map(|(r, (l, d, f))| (r, l, d, f))
        .collect();
    let runs: Vec<SweepRun> = jobs
        .par_iter()
        .map(|&(r, lambda, dim, fold)| {
            let seed = base.seed ^ r as u64;
            let cfg = RunConfig {
                lambda,
                embed_dim: dim,
                seed,
                ..base.clone()
            };
            match run_cell(&cfg, data, test_fraction) {
                Ok((acc, knn)) => SweepRun {
                    fold,
                    seed,
                    accuracy: Some(acc),
                    knn_accuracy: Some(knn),
                    error: None,
                },
                Err(e) => SweepRun {
                    fold,
                    seed,
                    accuracy: None,
                    knn_accuracy: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();

    let mut cells = Vec::with_capacity(lambdas.len() * dims.len());
    for (cell_runs, chunk_start) in runs.chunks(folds).zip((0..).step_by(folds)) {
        let (_, lambda, dim, _) = jobs[chunk_start];
        let ok_acc: Vec<f64> = cell_runs.iter().filter_map(|r| r.accuracy).collect();
        let ok_knn: Vec<f64> = cell_runs.iter().filter_map(|r| r.knn_accuracy).collect();
        let mut warnings: Vec<String> = cell_runs
            .iter()
            .filter_map(|r| r.error.as_ref().map(|e| format!("fold {}: {e}", r.fold)))
            .collect();
        let degenerate = lambda == 1.0;
        if degenerate {
            warnings.push("unsupervised-degenerate: output layer is never updated at lambda = 1".into());
        }
        cells.push(SweepCell {
            lambda,
            embed_dim: dim,
            runs: cell_runs.to_vec(),
            accuracy: summarize(&ok_acc).ok(),
            knn_accuracy: summarize(&ok_knn).ok(),
            unsupervised_degenerate: degenerate,
            warnings,
        });
    }
    Ok(SweepReport {
        base: base.clone(),
        lambdas: lambdas.to_vec(),
        dims: dims.to_vec(),
        folds,
        test_fraction,
        cells,
    })
}
