//! Joint neighbor distributions: perplexity-calibrated Gaussian conditionals
//! symmetrized into `P`, and the Student-t (one degree of freedom) `Q`.

use crate::error::{invalid_config, invalid_input, Result};
use crate::numerics::{pairwise_sq_dists, Matrix};

/// Probability floor applied wherever an affinity enters a log or power.
pub const PROB_FLOOR: f64 = 1e-12;

pub const DEFAULT_PERPLEXITY: f64 = 15.0;

/// Joint distribution over ordered sample pairs: symmetric, zero diagonal,
/// nonnegative, summing to one.
#[derive(Clone, Debug, PartialEq)]
pub struct AffinityMatrix {
    probs: Matrix,
}

impl AffinityMatrix {
    /// Wraps a matrix after checking the joint-distribution invariants.
    pub fn new(probs: Matrix) -> Result<Self> {
        let n = probs.rows();
        if probs.cols() != n {
            return Err(invalid_input("affinity matrix must be square"));
        }
        probs.ensure_finite("affinity matrix")?;
        for i in 0..n {
            if probs[(i, i)] != 0.0 {
                return Err(invalid_input(format!("affinity diagonal entry {i} is nonzero")));
            }
            for j in 0..n {
                let v = probs[(i, j)];
                if v < 0.0 {
                    return Err(invalid_input(format!("negative affinity at ({i},{j})")));
                }
                if (v - probs[(j, i)]).abs() > 1e-12 {
                    return Err(invalid_input(format!("affinity not symmetric at ({i},{j})")));
                }
            }
        }
        if (probs.sum() - 1.0).abs() > 1e-10 {
            return Err(invalid_input(format!(
                "affinity entries sum to {}, expected 1",
                probs.sum()
            )));
        }
        Ok(AffinityMatrix { probs })
    }

    pub(crate) fn new_unchecked(probs: Matrix) -> Self {
        AffinityMatrix { probs }
    }

    pub fn n(&self) -> usize {
        self.probs.rows()
    }

    pub fn probs(&self) -> &Matrix {
        &self.probs
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.probs[(i, j)]
    }

    /// Multiplies every entry; used for early exaggeration, which
    /// deliberately leaves the unit-sum invariant.
    pub(crate) fn scaled(&self, factor: f64) -> Matrix {
        let mut m = self.probs.clone();
        m.as_mut_slice().iter_mut().for_each(|v| *v *= factor);
        m
    }
}

/// Bandwidth search settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PerplexityCalibration {
    pub target_perplexity: f64,
    pub max_iterations: usize,
    /// Accepted error, in bits on the entropy and in units on `2^H`.
    pub entropy_tolerance: f64,
}

impl PerplexityCalibration {
    pub fn new(target_perplexity: f64) -> Self {
        PerplexityCalibration {
            target_perplexity,
            max_iterations: 64,
            entropy_tolerance: 1e-5,
        }
    }
}

impl Default for PerplexityCalibration {
    fn default() -> Self {
        Self::new(DEFAULT_PERPLEXITY)
    }
}

/// Row-stochastic conditionals `p_{j|i}` with the bandwidth found per row.
#[derive(Clone, Debug)]
pub struct Conditionals {
    pub probs: Matrix,
    pub sigmas: Vec<f64>,
    /// Rows whose search ran out of iterations; they keep the last bandwidth.
    pub unconverged: Vec<usize>,
}

impl Conditionals {
    pub fn converged(&self) -> bool {
        self.unconverged.is_empty()
    }
}

const SIGMA_MIN: f64 = 1e-20;
const SIGMA_MAX: f64 = 1e20;

/// Gaussian conditional distribution for one row at bandwidth `sigma`.
///
/// Distances are shifted by the row minimum before exponentiation so that
/// tiny bandwidths do not underflow every weight. Returns the entropy in bits.
pub fn row_conditional(dists_sq: &[f64], skip: usize, sigma: f64, out: &mut [f64]) -> f64 {
    let beta = 1.0 / (2.0 * sigma * sigma);
    let min = dists_sq
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != skip)
        .map(|(_, &d)| d)
        .fold(f64::INFINITY, f64::min);
    let mut total = 0.0;
    let mut weighted = 0.0;
    for (j, (&d, o)) in dists_sq.iter().zip(out.iter_mut()).enumerate() {
        if j == skip {
            *o = 0.0;
            continue;
        }
        let shifted = d - min;
        let w = (-beta * shifted).exp();
        *o = w;
        total += w;
        weighted += w * shifted;
    }
    for o in out.iter_mut() {
        *o /= total;
    }
    // H = ln Z + β·E[d − d_min], converted to bits.
    let nats = total.ln() + beta * weighted / total;
    nats / std::f64::consts::LN_2
}

/// Calibrates `σᵢ` per row by bisection on `log σ` so that the row
/// perplexity `2^H` matches the target.
pub fn conditional_p(dists_sq: &Matrix, calibration: &PerplexityCalibration) -> Result<Conditionals> {
    let n = dists_sq.rows();
    if dists_sq.cols() != n {
        return Err(invalid_input("distance matrix must be square"));
    }
    dists_sq.ensure_finite("distance matrix")?;
    let target = calibration.target_perplexity;
    if !(target.is_finite() && target > 0.0) {
        return Err(invalid_config(format!("perplexity must be positive, got {target}")));
    }
    if n < 3 || target > (n - 1) as f64 || target >= n as f64 {
        return Err(invalid_config(format!(
            "perplexity {target} needs at least {} samples, got {n}",
            (target.ceil() as usize + 1).max(3)
        )));
    }
    let target_bits = target.log2();
    let tol = calibration.entropy_tolerance;

    let mut probs = Matrix::zeros(n, n);
    let mut sigmas = Vec::with_capacity(n);
    let mut unconverged = Vec::new();
    for i in 0..n {
        let row = dists_sq.row(i);
        let out = probs.row_mut(i);
        let (mut lo, mut hi) = (SIGMA_MIN.ln(), SIGMA_MAX.ln());
        let mut log_sigma: f64 = 0.0;
        let mut converged = false;
        for _ in 0..calibration.max_iterations {
            let h = row_conditional(row, i, log_sigma.exp(), out);
            if (h - target_bits).abs() < tol && (h.exp2() - target).abs() < tol {
                converged = true;
                break;
            }
            // Entropy is nondecreasing in σ.
            if h > target_bits {
                hi = log_sigma;
            } else {
                lo = log_sigma;
            }
            log_sigma = 0.5 * (lo + hi);
        }
        if !converged {
            row_conditional(row, i, log_sigma.exp(), out);
            unconverged.push(i);
        }
        sigmas.push(log_sigma.exp());
    }
    Ok(Conditionals {
        probs,
        sigmas,
        unconverged,
    })
}

/// `p_ij = (p_{j|i} + p_{i|j}) / 2N`.
pub fn symmetrize_p(cond: &Matrix) -> Result<AffinityMatrix> {
    let n = cond.rows();
    if cond.cols() != n || n < 2 {
        return Err(invalid_input("conditionals must be a square matrix with n >= 2"));
    }
    let denom = 2.0 * n as f64;
    let mut p = Matrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = (cond[(i, j)] + cond[(j, i)]) / denom;
            p[(i, j)] = v;
            p[(j, i)] = v;
        }
    }
    Ok(AffinityMatrix::new_unchecked(p))
}

/// Convenience: distances → calibrated conditionals → joint `P`.
pub fn joint_p(features: &Matrix, perplexity: f64) -> Result<(AffinityMatrix, Conditionals)> {
    let d = pairwise_sq_dists(features)?;
    let cond = conditional_p(&d, &PerplexityCalibration::new(perplexity))?;
    let p = symmetrize_p(&cond.probs)?;
    Ok((p, cond))
}

/// Student-t affinities in embedding space together with the unnormalized
/// kernel weights `(1 + ‖zᵢ − zⱼ‖²)⁻¹` and their sum, which the gradients
/// reuse.
#[derive(Clone, Debug)]
pub struct StudentT {
    pub q: AffinityMatrix,
    pub weights: Matrix,
    pub total: f64,
}

pub fn student_t(z: &Matrix) -> Result<StudentT> {
    let n = z.rows();
    let d = pairwise_sq_dists(z)?;
    let mut weights = Matrix::zeros(n, n);
    let mut total = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let w = 1.0 / (1.0 + d[(i, j)]);
            weights[(i, j)] = w;
            weights[(j, i)] = w;
            total += 2.0 * w;
        }
    }
    let mut q = weights.clone();
    q.as_mut_slice().iter_mut().for_each(|v| *v /= total);
    Ok(StudentT {
        q: AffinityMatrix::new_unchecked(q),
        weights,
        total,
    })
}

pub fn student_t_q(z: &Matrix) -> Result<AffinityMatrix> {
    Ok(student_t(z)?.q)
}
