pub mod affinity;
pub mod checkpoint;
pub mod cli;
pub mod compare;
pub mod divergence;
pub mod encoder;
pub mod eval;
pub mod error;
pub mod histlayer;
pub mod io;
pub mod numerics;
pub mod svg;
pub mod synth;
pub mod trainer;
pub mod tsne;

pub use error::{DrenError, Result};
