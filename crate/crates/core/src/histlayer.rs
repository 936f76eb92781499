//! Soft histogram over the entries of each feature vector.
//!
//! Bin `b` of sample `i` holds `(1/D) Σ_d exp(−γ_b² (x_id − μ_b)²)`, so each
//! count lies in `(0, 1]`. Centers `μ` and widths `γ` are trainable.

use serde::{Deserialize, Serialize};

use crate::error::{invalid_config, invalid_input, Result};
use crate::numerics::Matrix;

pub const DEFAULT_BINS: usize = 16;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HistMode {
    /// Output is the histogram alone (`N × B`).
    HistogramOnly,
    /// Output is the raw features followed by the histogram (`N × (D + B)`).
    #[default]
    Concat,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistParams {
    pub centers: Vec<f64>,
    pub widths: Vec<f64>,
    pub mode: HistMode,
}

impl HistParams {
    pub fn new(centers: Vec<f64>, widths: Vec<f64>, mode: HistMode) -> Result<Self> {
        let hp = HistParams {
            centers,
            widths,
            mode,
        };
        hp.validate()?;
        Ok(hp)
    }

    /// Centers evenly spaced over the empirical `[min, max]` of `x`, with
    /// `γ = 1 / spacing`.
    pub fn from_data(x: &Matrix, bins: usize, mode: HistMode) -> Result<Self> {
        if bins < 2 {
            return Err(invalid_config(format!("histogram needs at least 2 bins, got {bins}")));
        }
        x.ensure_finite("histogram input")?;
        let (lo, hi) = x
            .as_slice()
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        if !lo.is_finite() {
            return Err(invalid_input("histogram initialization needs data"));
        }
        let span = if hi > lo { hi - lo } else { 1.0 };
        let spacing = span / (bins - 1) as f64;
        let centers = (0..bins).map(|b| lo + spacing * b as f64).collect();
        let widths = vec![1.0 / spacing; bins];
        HistParams::new(centers, widths, mode)
    }

    pub fn bins(&self) -> usize {
        self.centers.len()
    }

    pub fn output_dim(&self, input_dim: usize) -> usize {
        match self.mode {
            HistMode::HistogramOnly => self.bins(),
            HistMode::Concat => input_dim + self.bins(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.centers.len() < 2 {
            return Err(invalid_config("histogram needs at least 2 bins"));
        }
        if self.centers.len() != self.widths.len() {
            return Err(invalid_config("histogram centers and widths differ in length"));
        }
        if let Some(w) = self.widths.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
            return Err(invalid_config(format!("histogram width must be positive, got {w}")));
        }
        if self.centers.iter().any(|c| !c.is_finite()) {
            return Err(invalid_config("histogram centers must be finite"));
        }
        Ok(())
    }
}

/// Gradients of a scalar loss with respect to the histogram inputs and
/// parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct HistGrads {
    pub centers: Vec<f64>,
    pub widths: Vec<f64>,
    pub input: Matrix,
}

pub fn hist_forward(x: &Matrix, hp: &HistParams) -> Result<Matrix> {
    hp.validate()?;
    let (n, d) = x.shape();
    if d == 0 {
        return Err(invalid_input("histogram input needs at least one feature"));
    }
    let bins = hp.bins();
    let mut counts = Matrix::zeros(n, bins);
    let inv_d = 1.0 / d as f64;
    for i in 0..n {
        let xi = x.row(i);
        let ci = counts.row_mut(i);
        for b in 0..bins {
            let (mu, g2) = (hp.centers[b], hp.widths[b] * hp.widths[b]);
            let s: f64 = xi.iter().map(|&v| (-g2 * (v - mu) * (v - mu)).exp()).sum();
            ci[b] = s * inv_d;
        }
    }
    match hp.mode {
        HistMode::HistogramOnly => Ok(counts),
        HistMode::Concat => x.hcat(&counts),
    }
}

/// Backpropagates `upstream` (shaped like the `hist_forward` output) into
/// the centers, widths and inputs.
pub fn hist_backward(x: &Matrix, hp: &HistParams, upstream: &Matrix) -> Result<HistGrads> {
    hp.validate()?;
    let (n, d) = x.shape();
    let bins = hp.bins();
    if upstream.shape() != (n, hp.output_dim(d)) {
        return Err(invalid_input(format!(
            "histogram upstream gradient is {:?}, expected {:?}",
            upstream.shape(),
            (n, hp.output_dim(d))
        )));
    }
    let offset = match hp.mode {
        HistMode::HistogramOnly => 0,
        HistMode::Concat => d,
    };
    let mut centers = vec![0.0; bins];
    let mut widths = vec![0.0; bins];
    let mut input = match hp.mode {
        HistMode::HistogramOnly => Matrix::zeros(n, d),
        HistMode::Concat => upstream.column_range(0, d),
    };
    let inv_d = 1.0 / d as f64;
    for i in 0..n {
        let xi = x.row(i);
        let up = &upstream.row(i)[offset..offset + bins];
        let gi = input.row_mut(i);
        for b in 0..bins {
            let u = up[b] * inv_d;
            if u == 0.0 {
                continue;
            }
            let (mu, g) = (hp.centers[b], hp.widths[b]);
            let g2 = g * g;
            for (k, &v) in xi.iter().enumerate() {
                let diff = v - mu;
                let e = (-g2 * diff * diff).exp();
                // d/dμ: 2γ²(x−μ)e, d/dγ: −2γ(x−μ)²e, d/dx: −2γ²(x−μ)e
                centers[b] += u * 2.0 * g2 * diff * e;
                widths[b] -= u * 2.0 * g * diff * diff * e;
                gi[k] -= u * 2.0 * g2 * diff * e;
            }
        }
    }
    Ok(HistGrads {
        centers,
        widths,
        input,
    })
}
