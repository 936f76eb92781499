//! Binary parameter checkpoints.
//!
//! All integers and floats are little-endian:
//!
//! ```text
//! magic        8 bytes  "DRENCKPT"
//! version      u32      1
//! flags        u32      bit 0: histogram layer present
//!                       bit 1: histogram output is concatenated to raw features
//! input_dim    u64
//! adam_step    u64
//! n_tensors    u32
//! shape table  n_tensors × { name_len u16, name utf-8, rows u64, cols u64 }
//! values       every tensor in declaration order, rows·cols f64 each
//! adam m       same layout as values
//! adam v       same layout as values
//! ```
//!
//! Declaration order is `layer1.weight, layer1.bias, …, layer4.bias,
//! head.weight, head.bias[, hist.centers, hist.widths]`. Weight matrices are
//! stored `fan_in × fan_out`, row-major.

use std::fs;
use std::io::{Cursor, Read};
use std::path::Path;

use serde::Serialize;

use crate::encoder::{AdamState, Dense, EncoderParams};
use crate::error::{DrenError, Result};
use crate::histlayer::{HistMode, HistParams};
use crate::numerics::Matrix;

pub const MAGIC: &[u8; 8] = b"DRENCKPT";
pub const VERSION: u32 = 1;

const FLAG_HIST: u32 = 1;
const FLAG_CONCAT: u32 = 2;

fn bad(msg: impl Into<String>) -> DrenError {
    DrenError::Checkpoint(msg.into())
}

pub fn encode(params: &EncoderParams) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    let flags = match &params.hist {
        None => 0,
        Some(hp) if hp.mode == HistMode::Concat => FLAG_HIST | FLAG_CONCAT,
        Some(_) => FLAG_HIST,
    };
    out.extend_from_slice(&flags.to_le_bytes());
    out.extend_from_slice(&(params.input_dim as u64).to_le_bytes());
    out.extend_from_slice(&params.adam.step.to_le_bytes());

    let names = params.tensor_names();
    let shapes = params.tensor_shapes();
    out.extend_from_slice(&(names.len() as u32).to_le_bytes());
    for (name, (rows, cols)) in names.iter().zip(&shapes) {
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(*rows as u64).to_le_bytes());
        out.extend_from_slice(&(*cols as u64).to_le_bytes());
    }
    let sections = [
        params.tensors().into_iter().map(|t| t.to_vec()).collect::<Vec<_>>(),
        params.adam.first.clone(),
        params.adam.second.clone(),
    ];
    for section in &sections {
        for tensor in section {
            for v in tensor {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    out
}

struct Reader<'a>(Cursor<&'a [u8]>);

impl Reader<'_> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut buf = [0u8; N];
        self.0
            .read_exact(&mut buf)
            .map_err(|_| bad("unexpected end of file"))?;
        Ok(buf)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.bytes()?))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes()?))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes()?))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        (0..n).map(|_| Ok(f64::from_le_bytes(self.bytes()?))).collect()
    }

    fn string(&mut self, n: usize) -> Result<String> {
        let mut buf = vec![0u8; n];
        self.0
            .read_exact(&mut buf)
            .map_err(|_| bad("unexpected end of file"))?;
        String::from_utf8(buf).map_err(|_| bad("tensor name is not utf-8"))
    }
}

pub fn decode(bytes: &[u8]) -> Result<EncoderParams> {
    let mut r = Reader(Cursor::new(bytes));
    if &r.bytes::<8>()? != MAGIC {
        return Err(bad("bad magic"));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let flags = r.u32()?;
    let input_dim = r.u64()? as usize;
    let step = r.u64()?;
    let count = r.u32()? as usize;
    let has_hist = flags & FLAG_HIST != 0;
    let expected = 10 + if has_hist { 2 } else { 0 };
    if count != expected {
        return Err(bad(format!("expected {expected} tensors, found {count}")));
    }
    let mut table = Vec::with_capacity(count);
    for _ in 0..count {
        let len = r.u16()? as usize;
        let name = r.string(len)?;
        let rows = r.u64()? as usize;
        let cols = r.u64()? as usize;
        table.push((name, rows, cols));
    }
    let read_section = |r: &mut Reader| -> Result<Vec<Vec<f64>>> {
        table.iter().map(|(_, rows, cols)| r.f64s(rows * cols)).collect()
    };
    let values = read_section(&mut r)?;
    let first = read_section(&mut r)?;
    let second = read_section(&mut r)?;
    if (r.0.position() as usize) != bytes.len() {
        return Err(bad("trailing bytes after tensor data"));
    }

    let mut values = values.into_iter();
    let mut take_dense = |idx: usize| -> Result<Dense> {
        let (_, rows, cols) = &table[2 * idx];
        let weights = Matrix::from_vec(*rows, *cols, values.next().expect("counted"))?;
        let bias = values.next().expect("counted");
        if bias.len() != *cols {
            return Err(bad(format!("bias {} has wrong length", table[2 * idx + 1].0)));
        }
        Ok(Dense { weights, bias })
    };
    let layers = (0..4).map(&mut take_dense).collect::<Result<Vec<_>>>()?;
    let head = take_dense(4)?;
    let hist = if has_hist {
        let centers = values.next().expect("counted");
        let widths = values.next().expect("counted");
        let mode = if flags & FLAG_CONCAT != 0 {
            HistMode::Concat
        } else {
            HistMode::HistogramOnly
        };
        Some(HistParams::new(centers, widths, mode)?)
    } else {
        None
    };
    let params = EncoderParams {
        input_dim,
        layers,
        head,
        hist,
        adam: AdamState {
            step,
            first,
            second,
        },
    };
    // Consistency of the chained layer shapes.
    let first_in = params
        .hist
        .as_ref()
        .map_or(input_dim, |hp| hp.output_dim(input_dim));
    let mut fan_in = first_in;
    for (l, d) in params.layers.iter().chain(std::iter::once(&params.head)).enumerate() {
        if d.weights.rows() != fan_in {
            return Err(bad(format!("layer {} expects input {fan_in}", l + 1)));
        }
        fan_in = d.weights.cols();
    }
    Ok(params)
}

pub fn save(path: &Path, params: &EncoderParams) -> Result<()> {
    fs::write(path, encode(params)).map_err(|e| DrenError::io(path, e))
}

pub fn load(path: &Path) -> Result<EncoderParams> {
    let bytes = fs::read(path).map_err(|e| DrenError::io(path, e))?;
    decode(&bytes)
}

/// Writes `value` as pretty JSON next to the checkpoint (`<path>.json`).
pub fn save_sidecar<T: Serialize>(checkpoint: &Path, value: &T) -> Result<std::path::PathBuf> {
    let mut name = checkpoint.as_os_str().to_owned();
    name.push(".json");
    let path = std::path::PathBuf::from(name);
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(&path, text).map_err(|e| DrenError::io(&path, e))?;
    Ok(path)
}
