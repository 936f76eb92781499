//! Seeded synthetic labeled datasets.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid_config, DrenError, Result};
use crate::numerics::{Matrix, SeededRng};
use crate::trainer::Dataset;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Generator {
    /// Isotropic Gaussians around mutually orthogonal centers.
    Blobs,
    /// Concentric annuli in the first two coordinates.
    Rings,
    /// Consecutive segments of a helix in the first three coordinates.
    Helix,
}

impl fmt::Display for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Generator::Blobs => "blobs",
            Generator::Rings => "rings",
            Generator::Helix => "helix",
        })
    }
}

impl FromStr for Generator {
    type Err = DrenError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "blobs" => Ok(Generator::Blobs),
            "rings" => Ok(Generator::Rings),
            "helix" => Ok(Generator::Helix),
            other => Err(invalid_config(format!(
                "unknown generator '{other}' (expected blobs, rings or helix)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub generator: Generator,
    pub classes: usize,
    pub dim: usize,
    pub per_class: usize,
    pub separation: f64,
    pub std: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            generator: Generator::Blobs,
            classes: 3,
            dim: 50,
            per_class: 100,
            separation: 10.0,
            std: 1.0,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.classes == 0 || self.per_class == 0 {
            return Err(invalid_config("classes and samples per class must be positive"));
        }
        if !(self.separation > 0.0 && self.separation.is_finite()) {
            return Err(invalid_config("separation must be positive"));
        }
        if !(self.std > 0.0 && self.std.is_finite()) {
            return Err(invalid_config("std must be positive"));
        }
        let min_dim = match self.generator {
            Generator::Blobs => 1,
            Generator::Rings => 2,
            Generator::Helix => 3,
        };
        if self.dim < min_dim {
            return Err(invalid_config(format!(
                "{} needs at least {min_dim} dimensions",
                self.generator
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Synthetic {
    /// Samples ordered by class.
    pub data: Dataset,
    /// Generator-specific remarks, such as a center fallback.
    pub notes: Vec<String>,
}

/// Centers for the blob generator. Class `c < dim` sits at `separation·e_c`,
/// so every pair is `separation·√2` apart. One extra class fits at
/// `t·separation·(1, …, 1)` with the same spacing; beyond that, centers are
/// random directions scaled to `separation`.
pub fn blob_centers(spec: &SynthSpec, rng: &mut SeededRng) -> (Matrix, Option<String>) {
    let (c, d, s) = (spec.classes, spec.dim, spec.separation);
    let mut centers = Matrix::zeros(c, d);
    if c <= d {
        for k in 0..c {
            centers[(k, k)] = s;
        }
        return (centers, None);
    }
    if c == d + 1 {
        for k in 0..d {
            centers[(k, k)] = s;
        }
        let t = (1.0 + (1.0 + d as f64).sqrt()) / d as f64;
        centers.row_mut(d).iter_mut().for_each(|v| *v = t * s);
        return (centers, None);
    }
    for k in 0..c {
        let row: Vec<f64> = (0..d).map(|_| rng.normal(0.0, 1.0)).collect();
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
        for (o, v) in centers.row_mut(k).iter_mut().zip(&row) {
            *o = s * v / norm;
        }
    }
    let note = format!(
        "{c} classes exceed dim + 1 = {}; blob centers drawn uniformly on the sphere of radius {s}",
        d + 1
    );
    (centers, Some(note))
}

pub fn gen_synthetic(spec: &SynthSpec) -> Result<Synthetic> {
    spec.validate()?;
    let mut rng = SeededRng::new(spec.seed);
    let n = spec.classes * spec.per_class;
    let mut x = Matrix::zeros(n, spec.dim);
    let labels: Vec<usize> = (0..n).map(|i| i / spec.per_class).collect();
    let mut notes = Vec::new();

    match spec.generator {
        Generator::Blobs => {
            let (centers, note) = blob_centers(spec, &mut rng);
            notes.extend(note);
            for (i, &c) in labels.iter().enumerate() {
                for (k, v) in x.row_mut(i).iter_mut().enumerate() {
                    *v = centers[(c, k)] + rng.normal(0.0, spec.std);
                }
            }
        }
        Generator::Rings => {
            for (i, &c) in labels.iter().enumerate() {
                let radius = spec.separation * (c + 1) as f64;
                let angle = 2.0 * PI * rng.uniform(0.0, 1.0);
                let row = x.row_mut(i);
                row[0] = radius * angle.cos();
                row[1] = radius * angle.sin();
                for v in row.iter_mut() {
                    *v += rng.normal(0.0, spec.std);
                }
            }
        }
        Generator::Helix => {
            // Two full turns of radius `separation`; class c owns the
            // parameter range [c/C, (c+1)/C).
            let turns = 2.0;
            let pitch = spec.separation * spec.classes as f64;
            for (i, &c) in labels.iter().enumerate() {
                let t = (c as f64 + rng.uniform(0.0, 1.0)) / spec.classes as f64;
                let angle = 2.0 * PI * turns * t;
                let row = x.row_mut(i);
                row[0] = spec.separation * angle.cos();
                row[1] = spec.separation * angle.sin();
                row[2] = pitch * t;
                for v in row.iter_mut() {
                    *v += rng.normal(0.0, spec.std);
                }
            }
        }
    }
    Ok(Synthetic {
        data: Dataset::new(x, labels)?,
        notes,
    })
}
