//! Side-by-side k-NN evaluation of DREN and classical t-SNE embeddings.
//!
//! DREN places test points with a plain forward pass. t-SNE has no mapping
//! for unseen points, so its test coordinates come from the locally-linear
//! out-of-sample projector.

use serde::{Deserialize, Serialize};

use crate::encoder::{embed, predict, EncoderParams};
use crate::error::Result;
use crate::eval::{accuracy, knn_predict, MetricsRecord, DEFAULT_KNN_K};
use crate::numerics::Matrix;
use crate::trainer::{train_with_classes, Dataset, RunConfig, TrainReport};
use crate::tsne::{lle_weights_batch, oos_embed, tsne_fit, OosConfig, TsneConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareConfig {
    pub run: RunConfig,
    pub tsne: TsneConfig,
    pub oos: OosConfig,
    pub knn_k: usize,
}

impl CompareConfig {
    pub fn new(run: RunConfig) -> Self {
        let tsne = TsneConfig {
            embed_dim: run.embed_dim,
            perplexity: run.perplexity,
            seed: run.seed,
            ..TsneConfig::default()
        };
        CompareConfig {
            run,
            tsne,
            oos: OosConfig::default(),
            knn_k: DEFAULT_KNN_K,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub train_size: usize,
    pub test_size: usize,
    pub knn_k: usize,
    pub dren_knn_accuracy: f64,
    pub tsne_knn_accuracy: f64,
    pub dren_softmax_accuracy: f64,
    pub dren: MetricsRecord,
    pub tsne: MetricsRecord,
    pub dren_best_epoch: usize,
    pub tsne_initial_kl: f64,
    pub tsne_final_kl: f64,
}

#[derive(Clone, Debug)]
pub struct Comparison {
    pub report: CompareReport,
    pub train_report: TrainReport,
    pub params: EncoderParams,
    pub dren_train: Matrix,
    pub dren_test: Matrix,
    pub tsne_train: Matrix,
    pub tsne_test: Matrix,
}

/// Test coordinates for a trained encoder: the forward pass and nothing else.
pub fn dren_embed_test(params: &EncoderParams, x_test: &Matrix) -> Result<Matrix> {
    embed(params, x_test)
}

pub fn compare_tsne(cfg: &CompareConfig, train: &Dataset, test: &Dataset) -> Result<Comparison> {
    let classes = train.classes().max(test.classes());
    let outcome = train_with_classes(&cfg.run, &train.features, &train.labels, classes)?;
    let dren_train = embed(&outcome.params, &train.features)?;
    let dren_test = dren_embed_test(&outcome.params, &test.features)?;
    let dren_pred = knn_predict(&dren_train, &train.labels, &dren_test, cfg.knn_k)?;
    let dren = accuracy(&dren_pred, &test.labels)?;
    let softmax = accuracy(&predict(&outcome.params, &test.features)?, &test.labels)?;

    let fit = tsne_fit(&train.features, &cfg.tsne)?;
    let weights = lle_weights_batch(&test.features, &train.features, &cfg.oos)?;
    let tsne_test = oos_embed(&weights, &fit.embedding)?;
    let tsne_pred = knn_predict(&fit.embedding, &train.labels, &tsne_test, cfg.knn_k)?;
    let tsne = accuracy(&tsne_pred, &test.labels)?;

    Ok(Comparison {
        report: CompareReport {
            train_size: train.len(),
            test_size: test.len(),
            knn_k: cfg.knn_k,
            dren_knn_accuracy: dren.accuracy,
            tsne_knn_accuracy: tsne.accuracy,
            dren_softmax_accuracy: softmax.accuracy,
            dren,
            tsne,
            dren_best_epoch: outcome.report.best_epoch,
            tsne_initial_kl: fit.initial_kl,
            tsne_final_kl: fit.final_kl,
        },
        train_report: outcome.report,
        params: outcome.params,
        dren_train,
        dren_test,
        tsne_train: fit.embedding,
        tsne_test,
    })
}
