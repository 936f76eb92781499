//! Divergences between affinity matrices and their gradients with respect to
//! the embedding coordinates, chained through the Student-t normalization.
//!
//! Natural logarithms throughout. `q` entries are floored at
//! [`PROB_FLOOR`] inside logs and powers; `p` entries that are exactly zero
//! contribute nothing.
//!
//! Wasserstein-1 is evaluated under the discrete 0/1 ground metric over pair
//! cells, where it coincides with total variation distance
//! `½ Σ |p_ij − q_ij|`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::affinity::{student_t, AffinityMatrix, PROB_FLOOR};
use crate::error::{invalid_config, invalid_input, Result};
use crate::numerics::{sq_euclidean, Matrix};

pub const DEFAULT_RENYI_ALPHA: f64 = 0.5;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DivergenceKind {
    #[default]
    Kl,
    Renyi { alpha: f64 },
    #[serde(rename = "wasserstein1_tv")]
    Wasserstein1Tv,
}

impl DivergenceKind {
    pub fn renyi(alpha: f64) -> Result<Self> {
        validate_alpha(alpha)?;
        Ok(DivergenceKind::Renyi { alpha })
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            DivergenceKind::Renyi { alpha } => validate_alpha(alpha),
            _ => Ok(()),
        }
    }

    pub fn evaluate(&self, p: &AffinityMatrix, q: &AffinityMatrix) -> Result<f64> {
        match *self {
            DivergenceKind::Kl => kl_divergence(p, q),
            DivergenceKind::Renyi { alpha } => renyi_divergence(p, q, alpha),
            DivergenceKind::Wasserstein1Tv => wasserstein1_tv(p, q),
        }
    }
}

impl fmt::Display for DivergenceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DivergenceKind::Kl => write!(f, "kl"),
            DivergenceKind::Renyi { alpha } => write!(f, "renyi({alpha})"),
            DivergenceKind::Wasserstein1Tv => write!(f, "w1"),
        }
    }
}

impl FromStr for DivergenceKind {
    type Err = crate::DrenError;

    /// Accepts `kl`, `renyi` (α = 0.5) and `w1`.
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "kl" => Ok(DivergenceKind::Kl),
            "renyi" => Ok(DivergenceKind::Renyi {
                alpha: DEFAULT_RENYI_ALPHA,
            }),
            "w1" | "tv" | "wasserstein1" => Ok(DivergenceKind::Wasserstein1Tv),
            other => Err(invalid_config(format!("unknown divergence {other:?}"))),
        }
    }
}

fn validate_alpha(alpha: f64) -> Result<()> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(invalid_config(format!("Renyi alpha must be positive, got {alpha}")));
    }
    if alpha == 1.0 {
        return Err(invalid_config("Renyi alpha = 1 is the KL limit; use kl"));
    }
    Ok(())
}

fn check_dims(p: &AffinityMatrix, q: &AffinityMatrix) -> Result<()> {
    if p.n() != q.n() {
        return Err(invalid_input(format!(
            "affinity size mismatch: {} vs {}",
            p.n(),
            q.n()
        )));
    }
    Ok(())
}

#[inline]
fn off_diagonal(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
}

/// `Σ p_ij ln(p_ij / q_ij)`, both entries floored inside the log so that
/// `KL(P, P)` is exactly zero.
pub fn kl_divergence(p: &AffinityMatrix, q: &AffinityMatrix) -> Result<f64> {
    check_dims(p, q)?;
    let mut total = 0.0;
    for (i, j) in off_diagonal(p.n()) {
        let pij = p.get(i, j);
        if pij > 0.0 {
            total += pij * (pij.max(PROB_FLOOR) / q.get(i, j).max(PROB_FLOOR)).ln();
        }
    }
    Ok(total)
}

/// `Σ p_ij^α q_ij^{1−α}`, evaluated as `p·(q/p)^{1−α}` with both entries
/// floored inside the power, so equal entries contribute exactly `p`.
fn renyi_sum(p: &AffinityMatrix, q: &AffinityMatrix, alpha: f64) -> f64 {
    let mut s = 0.0;
    for (i, j) in off_diagonal(p.n()) {
        let pij = p.get(i, j);
        if pij > 0.0 {
            s += pij * (q.get(i, j).max(PROB_FLOOR) / pij.max(PROB_FLOOR)).powf(1.0 - alpha);
        }
    }
    s
}

/// `(α − 1)⁻¹ ln Σ p_ij^α q_ij^{1−α}`.
pub fn renyi_divergence(p: &AffinityMatrix, q: &AffinityMatrix, alpha: f64) -> Result<f64> {
    validate_alpha(alpha)?;
    check_dims(p, q)?;
    Ok(renyi_sum(p, q, alpha).ln() / (alpha - 1.0))
}

/// Total variation `½ Σ |p_ij − q_ij|`, which is Wasserstein-1 under the
/// 0/1 ground metric.
pub fn wasserstein1_tv(p: &AffinityMatrix, q: &AffinityMatrix) -> Result<f64> {
    check_dims(p, q)?;
    let total: f64 = off_diagonal(p.n())
        .map(|(i, j)| (p.get(i, j) - q.get(i, j)).abs())
        .sum();
    Ok(0.5 * total)
}

fn check_embedding(q: &AffinityMatrix, z: &Matrix) -> Result<()> {
    if z.rows() != q.n() {
        return Err(invalid_input(format!(
            "embedding has {} rows but Q is {}x{}",
            z.rows(),
            q.n(),
            q.n()
        )));
    }
    Ok(())
}

/// `∂KL/∂zᵢ = 4 Σⱼ (p_ij − q_ij)(zᵢ − zⱼ)(1 + ‖zᵢ − zⱼ‖²)⁻¹`.
pub fn kl_grad_wrt_z(p: &AffinityMatrix, q: &AffinityMatrix, z: &Matrix) -> Result<Matrix> {
    check_dims(p, q)?;
    check_embedding(q, z)?;
    let (n, d) = z.shape();
    let mut grad = Matrix::zeros(n, d);
    for i in 0..n {
        let zi = z.row(i);
        for j in 0..n {
            if i == j {
                continue;
            }
            let zj = z.row(j);
            let w = 1.0 / (1.0 + sq_euclidean(zi, zj));
            let coeff = 4.0 * (p.get(i, j) - q.get(i, j)) * w;
            let gi = grad.row_mut(i);
            for k in 0..d {
                gi[k] += coeff * (zi[k] - zj[k]);
            }
        }
    }
    Ok(grad)
}

/// `∂L/∂q_ij` for the non-KL kinds.
fn q_sensitivity(kind: DivergenceKind, p: &AffinityMatrix, q: &AffinityMatrix) -> Matrix {
    let n = p.n();
    let mut g = Matrix::zeros(n, n);
    match kind {
        DivergenceKind::Kl => {
            for (i, j) in off_diagonal(n) {
                let qij = q.get(i, j);
                if qij >= PROB_FLOOR {
                    g[(i, j)] = -p.get(i, j) / qij;
                }
            }
        }
        DivergenceKind::Renyi { alpha } => {
            let s = renyi_sum(p, q, alpha);
            for (i, j) in off_diagonal(n) {
                let (pij, qij) = (p.get(i, j), q.get(i, j));
                if pij > 0.0 && qij >= PROB_FLOOR {
                    let pf = pij.max(PROB_FLOOR);
                    g[(i, j)] = -(pij / pf) * (pf / qij).powf(alpha) / s;
                }
            }
        }
        DivergenceKind::Wasserstein1Tv => {
            for (i, j) in off_diagonal(n) {
                let diff = q.get(i, j) - p.get(i, j);
                g[(i, j)] = if diff > 0.0 {
                    0.5
                } else if diff < 0.0 {
                    -0.5
                } else {
                    0.0
                };
            }
        }
    }
    g
}

/// Chain-rule gradient `∂L_div/∂Z` for any divergence kind.
///
/// With `q_kl = w_kl / W` and `w_kl = (1 + ‖z_k − z_l‖²)⁻¹`:
/// `∂L/∂w_kl = (G_kl − Σ G∘Q) / W`, `∂w_kl/∂z_k = −2 w_kl² (z_k − z_l)`.
pub fn generic_grad_wrt_z(
    kind: DivergenceKind,
    p: &AffinityMatrix,
    q: &AffinityMatrix,
    z: &Matrix,
) -> Result<Matrix> {
    kind.validate()?;
    check_dims(p, q)?;
    check_embedding(q, z)?;
    if kind == DivergenceKind::Kl {
        return kl_grad_wrt_z(p, q, z);
    }
    let st = student_t(z)?;
    let g = q_sensitivity(kind, p, q);
    let n = p.n();
    let centered: f64 = off_diagonal(n).map(|(i, j)| g[(i, j)] * q.get(i, j)).sum();
    let d = z.cols();
    let mut grad = Matrix::zeros(n, d);
    for i in 0..n {
        let zi = z.row(i);
        for j in 0..n {
            if i == j {
                continue;
            }
            let w = st.weights[(i, j)];
            let dl_dw = (g[(i, j)] + g[(j, i)] - 2.0 * centered) / st.total;
            let coeff = -2.0 * dl_dw * w * w;
            let zj = z.row(j);
            let gi = grad.row_mut(i);
            for k in 0..d {
                gi[k] += coeff * (zi[k] - zj[k]);
            }
        }
    }
    Ok(grad)
}
