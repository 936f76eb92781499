//! Classical t-SNE (gradient descent directly on the coordinates) and the
//! locally-linear out-of-sample projector used to place unseen points in a
//! fixed embedding.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::affinity::{joint_p, student_t, AffinityMatrix};
use crate::divergence::{kl_divergence, kl_grad_wrt_z};
use crate::error::{invalid_config, invalid_input, DrenError, Result};
use crate::eval::ranked_neighbors;
use crate::numerics::{dot, Matrix, SeededRng};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TsneConfig {
    pub embed_dim: usize,
    pub perplexity: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub initial_momentum: f64,
    pub final_momentum: f64,
    pub momentum_switch: usize,
    pub exaggeration: f64,
    pub exaggeration_iters: usize,
    pub init_std: f64,
    pub seed: u64,
}

impl Default for TsneConfig {
    fn default() -> Self {
        TsneConfig {
            embed_dim: 2,
            perplexity: crate::affinity::DEFAULT_PERPLEXITY,
            iterations: 1000,
            learning_rate: 100.0,
            initial_momentum: 0.5,
            final_momentum: 0.8,
            momentum_switch: 250,
            exaggeration: 4.0,
            exaggeration_iters: 50,
            init_std: 1e-4,
            seed: 0,
        }
    }
}

impl TsneConfig {
    pub fn validate(&self, n: usize) -> Result<()> {
        if n < 5 {
            return Err(invalid_input(format!("t-SNE needs at least 5 points, got {n}")));
        }
        if self.embed_dim == 0 {
            return Err(invalid_config("embedding dimension must be positive"));
        }
        if self.iterations <= self.exaggeration_iters {
            return Err(invalid_config(format!(
                "iterations ({}) must exceed the exaggeration window ({})",
                self.iterations, self.exaggeration_iters
            )));
        }
        if !(self.perplexity > 0.0 && self.perplexity < n as f64) {
            return Err(invalid_config(format!(
                "perplexity {} must be below the sample count {n}",
                self.perplexity
            )));
        }
        if !(self.learning_rate > 0.0 && self.init_std > 0.0 && self.exaggeration > 0.0) {
            return Err(invalid_config("learning rate, init std and exaggeration must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TsneFit {
    pub embedding: Matrix,
    /// `KL(P, Q)` at the initial coordinates (unexaggerated `P`).
    pub initial_kl: f64,
    pub final_kl: f64,
    /// `KL(P, Q)` before each update.
    pub kl_history: Vec<f64>,
    /// Rows whose bandwidth search did not converge.
    pub unconverged_rows: usize,
}

pub fn tsne_fit(x: &Matrix, cfg: &TsneConfig) -> Result<TsneFit> {
    let n = x.rows();
    cfg.validate(n)?;
    let (p, cond) = joint_p(x, cfg.perplexity)?;
    let mut rng = SeededRng::new(cfg.seed);
    let mut z = rng.normal_matrix(n, cfg.embed_dim, cfg.init_std);
    let mut velocity = Matrix::zeros(n, cfg.embed_dim);
    let exaggerated = AffinityMatrix::new_unchecked(p.scaled(cfg.exaggeration));
    let mut kl_history = Vec::with_capacity(cfg.iterations + 1);

    for iter in 0..cfg.iterations {
        let q = student_t(&z)?.q;
        kl_history.push(kl_divergence(&p, &q)?);
        let target = if iter < cfg.exaggeration_iters { &exaggerated } else { &p };
        let grad = kl_grad_wrt_z(target, &q, &z)?;
        let momentum = if iter < cfg.momentum_switch {
            cfg.initial_momentum
        } else {
            cfg.final_momentum
        };
        for ((v, g), zz) in velocity
            .as_mut_slice()
            .iter_mut()
            .zip(grad.as_slice())
            .zip(z.as_mut_slice())
        {
            *v = momentum * *v - cfg.learning_rate * g;
            *zz += *v;
        }
        center_columns(&mut z);
        if !z.is_finite() {
            return Err(DrenError::OptimizationFailure {
                iteration: iter,
                reason: "embedding became non-finite".into(),
            });
        }
    }
    let final_kl = kl_divergence(&p, &student_t(&z)?.q)?;
    kl_history.push(final_kl);
    Ok(TsneFit {
        embedding: z,
        initial_kl: kl_history[0],
        final_kl,
        kl_history,
        unconverged_rows: cond.unconverged.len(),
    })
}

fn center_columns(z: &mut Matrix) {
    let (n, d) = z.shape();
    for k in 0..d {
        let mean = (0..n).map(|i| z[(i, k)]).sum::<f64>() / n as f64;
        for i in 0..n {
            z[(i, k)] -= mean;
        }
    }
}

pub const DEFAULT_OOS_K: usize = 5;
pub const DEFAULT_OOS_REG: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OosConfig {
    pub k: usize,
    /// Tikhonov term, relative to `trace(G)/k`.
    pub reg: f64,
    /// Skip training points at distance exactly zero.
    pub exclude_self: bool,
}

impl Default for OosConfig {
    fn default() -> Self {
        OosConfig {
            k: DEFAULT_OOS_K,
            reg: DEFAULT_OOS_REG,
            exclude_self: false,
        }
    }
}

/// Reconstruction of one test point from its training neighbors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OosEntry {
    pub neighbors: Vec<usize>,
    /// Sums to 1.
    pub weights: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OosWeights {
    pub entries: Vec<OosEntry>,
    pub reg: f64,
}

/// Weights minimizing `‖x − Σ wⱼ x_nbrⱼ‖²` subject to `Σ wⱼ = 1`, from the
/// regularized local Gram system `(G + ε·tr(G)/k · I) w = 1`.
pub fn lle_weights(x_test: &[f64], x_train: &Matrix, cfg: &OosConfig) -> Result<OosEntry> {
    let k = cfg.k;
    if k == 0 {
        return Err(invalid_config("out-of-sample k must be at least 1"));
    }
    if x_test.len() != x_train.cols() {
        return Err(invalid_input("test point and training features differ in dimension"));
    }
    let ranked = ranked_neighbors(x_train, x_test);
    let neighbors: Vec<usize> = ranked
        .iter()
        .filter(|(d, _)| !(cfg.exclude_self && *d == 0.0))
        .map(|&(_, j)| j)
        .take(k)
        .collect();
    if neighbors.len() < k {
        return Err(invalid_config(format!(
            "k = {k} exceeds the {} available training points",
            neighbors.len()
        )));
    }

    let diffs: Vec<Vec<f64>> = neighbors
        .iter()
        .map(|&j| x_test.iter().zip(x_train.row(j)).map(|(a, b)| a - b).collect())
        .collect();
    let mut gram = DMatrix::<f64>::zeros(k, k);
    for a in 0..k {
        for b in a..k {
            let v = dot(&diffs[a], &diffs[b]);
            gram[(a, b)] = v;
            gram[(b, a)] = v;
        }
    }
    let trace = gram.trace();
    let shift = if trace > 0.0 { cfg.reg * trace / k as f64 } else { cfg.reg };
    for a in 0..k {
        gram[(a, a)] += shift;
    }
    let raw = gram
        .lu()
        .solve(&DVector::from_element(k, 1.0))
        .ok_or_else(|| invalid_input("local Gram system is singular"))?;
    let total: f64 = raw.iter().sum();
    let weights = raw.iter().map(|w| w / total).collect();
    Ok(OosEntry { neighbors, weights })
}

pub fn lle_weights_batch(x_test: &Matrix, x_train: &Matrix, cfg: &OosConfig) -> Result<OosWeights> {
    let entries = x_test
        .row_iter()
        .map(|row| lle_weights(row, x_train, cfg))
        .collect::<Result<_>>()?;
    Ok(OosWeights {
        entries,
        reg: cfg.reg,
    })
}

/// `z_test = Σⱼ wⱼ z_train[nbrⱼ]`.
pub fn oos_embed(weights: &OosWeights, z_train: &Matrix) -> Result<Matrix> {
    let d = z_train.cols();
    let mut out = Matrix::zeros(weights.entries.len(), d);
    for (i, e) in weights.entries.iter().enumerate() {
        if e.neighbors.len() != e.weights.len() {
            return Err(invalid_input(format!("entry {i} has mismatched neighbors/weights")));
        }
        let row = out.row_mut(i);
        for (&j, &w) in e.neighbors.iter().zip(&e.weights) {
            if j >= z_train.rows() {
                return Err(invalid_input(format!(
                    "neighbor index {j} out of range for {} training points",
                    z_train.rows()
                )));
            }
            for (o, zj) in row.iter_mut().zip(z_train.row(j)) {
                *o += w * zj;
            }
        }
    }
    Ok(out)
}
