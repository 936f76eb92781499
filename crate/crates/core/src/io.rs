//! Text file formats, JSON reports and run manifests.
//!
//! Features are comma-separated decimal rows with an optional single header
//! line. Labels are one non-negative integer per line. Embeddings are rows of
//! `id,z1,…,zd,label` with label `-1` when unknown. Reals are written with 17
//! significant digits, which round-trips every finite double.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{invalid_input, DrenError, Result};
use crate::numerics::Matrix;
use crate::trainer::Dataset;

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| DrenError::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| DrenError::io(path, e))
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> DrenError {
    DrenError::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// `{:.16e}`: one leading digit plus 16 decimals.
pub fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_real(field: &str) -> Option<f64> {
    field.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Nonblank lines with their 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty())
}

pub fn format_features(x: &Matrix) -> String {
    let mut out = String::new();
    for row in x.row_iter() {
        let fields: Vec<String> = row.iter().map(|&v| fmt_real(v)).collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

pub fn parse_features(path: &Path, text: &str) -> Result<Matrix> {
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (idx, (line_no, line)) in content_lines(text).enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        let parsed: Vec<Option<f64>> = fields.iter().map(|f| parse_real(f)).collect();
        if parsed.iter().any(Option::is_none) {
            if idx == 0 {
                // Header line.
                continue;
            }
            let bad = parsed.iter().position(Option::is_none).expect("some field failed");
            return Err(parse_err(
                path,
                line_no,
                format!("field {} ('{}') is not a finite number", bad + 1, fields[bad].trim()),
            ));
        }
        match cols {
            None => cols = Some(fields.len()),
            Some(c) if c != fields.len() => {
                return Err(parse_err(
                    path,
                    line_no,
                    format!("expected {c} fields, found {}", fields.len()),
                ));
            }
            Some(_) => {}
        }
        data.extend(parsed.into_iter().map(|v| v.expect("checked")));
        rows += 1;
    }
    let cols = cols.ok_or_else(|| parse_err(path, 1, "no data rows"))?;
    Matrix::from_vec(rows, cols, data)
}

pub fn read_features(path: &Path) -> Result<Matrix> {
    parse_features(path, &read_text(path)?)
}

pub fn write_features(path: &Path, x: &Matrix) -> Result<()> {
    write_text(path, &format_features(x))
}

pub fn format_labels(labels: &[usize]) -> String {
    labels.iter().fold(String::new(), |mut s, l| {
        let _ = writeln!(s, "{l}");
        s
    })
}

pub fn parse_labels(path: &Path, text: &str) -> Result<Vec<usize>> {
    content_lines(text)
        .map(|(line_no, line)| {
            line.trim()
                .parse::<usize>()
                .map_err(|_| parse_err(path, line_no, format!("'{}' is not a class index", line.trim())))
        })
        .collect()
}

pub fn read_labels(path: &Path) -> Result<Vec<usize>> {
    parse_labels(path, &read_text(path)?)
}

pub fn write_labels(path: &Path, labels: &[usize]) -> Result<()> {
    write_text(path, &format_labels(labels))
}

/// Every class in `0..=max` must occur.
pub fn check_contiguous(labels: &[usize]) -> Result<()> {
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut seen = vec![false; classes];
    labels.iter().for_each(|&l| seen[l] = true);
    match seen.iter().position(|s| !s) {
        Some(missing) => Err(invalid_input(format!(
            "labels must cover 0..{classes} contiguously; class {missing} never occurs"
        ))),
        None => Ok(()),
    }
}

/// Features plus labels, with matching row counts and contiguous classes.
pub fn read_dataset(features: &Path, labels: &Path) -> Result<Dataset> {
    let x = read_features(features)?;
    let y = read_labels(labels)?;
    if x.rows() != y.len() {
        return Err(invalid_input(format!(
            "{} has {} rows but {} has {} labels",
            features.display(),
            x.rows(),
            labels.display(),
            y.len()
        )));
    }
    check_contiguous(&y)?;
    Dataset::new(x, y)
}

/// Optional `id,name` class names.
pub fn read_names(path: &Path) -> Result<BTreeMap<usize, String>> {
    let text = read_text(path)?;
    let mut names = BTreeMap::new();
    for (line_no, line) in content_lines(&text) {
        let (id, name) = line
            .split_once(',')
            .ok_or_else(|| parse_err(path, line_no, "expected 'id,name'"))?;
        let id = id
            .trim()
            .parse::<usize>()
            .map_err(|_| parse_err(path, line_no, format!("'{}' is not a class index", id.trim())))?;
        names.insert(id, name.trim().to_string());
    }
    Ok(names)
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingFile {
    pub ids: Vec<usize>,
    pub z: Matrix,
    /// `None` where the file stores `-1`.
    pub labels: Vec<Option<usize>>,
}

impl EmbeddingFile {
    pub fn new(z: Matrix, labels: Option<&[usize]>) -> Result<Self> {
        let labels = match labels {
            Some(l) if l.len() != z.rows() => {
                return Err(invalid_input("embedding and labels differ in length"));
            }
            Some(l) => l.iter().map(|&c| Some(c)).collect(),
            None => vec![None; z.rows()],
        };
        Ok(EmbeddingFile {
            ids: (0..z.rows()).collect(),
            z,
            labels,
        })
    }

    pub fn known_labels(&self) -> Option<Vec<usize>> {
        self.labels.iter().copied().collect()
    }
}

pub fn format_embedding(e: &EmbeddingFile) -> String {
    let mut out = String::new();
    for ((id, row), label) in e.ids.iter().zip(e.z.row_iter()).zip(&e.labels) {
        let _ = write!(out, "{id}");
        for &v in row {
            out.push(',');
            out.push_str(&fmt_real(v));
        }
        match label {
            Some(l) => {
                let _ = writeln!(out, ",{l}");
            }
            None => out.push_str(",-1\n"),
        }
    }
    out
}

pub fn parse_embedding(path: &Path, text: &str) -> Result<EmbeddingFile> {
    let mut ids = Vec::new();
    let mut labels = Vec::new();
    let mut data = Vec::new();
    let mut dim = None;
    for (line_no, line) in content_lines(text) {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() < 3 {
            return Err(parse_err(path, line_no, "expected id, at least one coordinate and a label"));
        }
        let d = fields.len() - 2;
        match dim {
            None => dim = Some(d),
            Some(expected) if expected != d => {
                return Err(parse_err(
                    path,
                    line_no,
                    format!("expected {} fields, found {}", expected + 2, fields.len()),
                ));
            }
            Some(_) => {}
        }
        ids.push(
            fields[0]
                .parse::<usize>()
                .map_err(|_| parse_err(path, line_no, format!("bad id '{}'", fields[0])))?,
        );
        for (k, f) in fields[1..=d].iter().enumerate() {
            data.push(parse_real(f).ok_or_else(|| {
                parse_err(path, line_no, format!("coordinate {} ('{f}') is not a finite number", k + 1))
            })?);
        }
        let label = fields[d + 1];
        labels.push(match label {
            "-1" => None,
            _ => Some(
                label
                    .parse::<usize>()
                    .map_err(|_| parse_err(path, line_no, format!("bad label '{label}'")))?,
            ),
        });
    }
    let dim = dim.ok_or_else(|| parse_err(path, 1, "no data rows"))?;
    let z = Matrix::from_vec(ids.len(), dim, data)?;
    Ok(EmbeddingFile { ids, z, labels })
}

pub fn read_embedding(path: &Path) -> Result<EmbeddingFile> {
    parse_embedding(path, &read_text(path)?)
}

pub fn write_embedding(path: &Path, e: &EmbeddingFile) -> Result<()> {
    write_text(path, &format_embedding(e))
}

pub fn to_json_text<T: Serialize>(value: &T) -> Result<String> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    Ok(text)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &to_json_text(value)?)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| parse_err(path, e.line(), e.to_string()))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| DrenError::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    /// File name only, so manifests do not depend on the output location.
    pub name: String,
    pub sha256: String,
}

impl FileDigest {
    pub fn of(path: &Path) -> Result<Self> {
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        Ok(FileDigest {
            name,
            sha256: sha256_file(path)?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub config: serde_json::Value,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl Manifest {
    pub fn new<T: Serialize>(command: &str, config: &T) -> Result<Self> {
        Ok(Manifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config: serde_json::to_value(config)?,
            inputs: Vec::new(),
            outputs: Vec::new(),
            notes: Vec::new(),
        })
    }

    pub fn add_inputs<'a>(&mut self, paths: impl IntoIterator<Item = &'a PathBuf>) -> Result<()> {
        for p in paths {
            self.inputs.push(FileDigest::of(p)?);
        }
        Ok(())
    }

    pub fn add_outputs<'a>(&mut self, paths: impl IntoIterator<Item = &'a PathBuf>) -> Result<()> {
        for p in paths {
            self.outputs.push(FileDigest::of(p)?);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::SeededRng;

    fn p() -> &'static Path {
        Path::new("mem.csv")
    }

    #[test]
    fn features_round_trip_bitwise() {
        let mut rng = SeededRng::new(8);
        let mut x = rng.normal_matrix(6, 4, 1e3);
        x[(0, 0)] = 1e-300;
        x[(1, 1)] = -0.0;
        x[(2, 2)] = f64::MAX;
        x[(3, 3)] = 0.1 + 0.2;
        let back = parse_features(p(), &format_features(&x)).unwrap();
        let bits = |m: &Matrix| m.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back), bits(&x));
    }

    #[test]
    fn header_is_skipped_and_errors_carry_line_numbers() {
        let x = parse_features(p(), "a,b\n1,2\n3,4\n").unwrap();
        assert_eq!(x.shape(), (2, 2));
        match parse_features(p(), "1,2\n3,x\n") {
            Err(DrenError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        match parse_features(p(), "1,2\n\n3\n") {
            Err(DrenError::Parse { line, message, .. }) => {
                assert_eq!(line, 3);
                assert!(message.contains("expected 2 fields"));
            }
            other => panic!("{other:?}"),
        }
        assert!(parse_features(p(), "1,NaN\n").is_err());
        assert!(parse_features(p(), "").is_err());
    }

    #[test]
    fn labels_round_trip_and_validate() {
        let y = vec![0, 2, 1, 1, 0];
        assert_eq!(parse_labels(p(), &format_labels(&y)).unwrap(), y);
        check_contiguous(&y).unwrap();
        assert!(check_contiguous(&[0, 2]).is_err());
        match parse_labels(p(), "0\n1\n-3\n") {
            Err(DrenError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn embedding_round_trip() {
        let mut rng = SeededRng::new(2);
        let z = rng.normal_matrix(5, 3, 1.0);
        let e = EmbeddingFile::new(z.clone(), Some(&[0, 1, 2, 1, 0])).unwrap();
        let text = format_embedding(&e);
        assert_eq!(text.lines().count(), 5);
        assert!(text.lines().all(|l| l.split(',').count() == 5));
        assert_eq!(parse_embedding(p(), &text).unwrap(), e);
        let u = EmbeddingFile::new(z, None).unwrap();
        let back = parse_embedding(p(), &format_embedding(&u)).unwrap();
        assert_eq!(back.labels, vec![None; 5]);
        assert!(back.known_labels().is_none());
    }

    #[test]
    fn manifest_uses_file_names() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.txt");
        write_text(&path, "abc").unwrap();
        let d = FileDigest::of(&path).unwrap();
        assert_eq!(d.name, "a.txt");
        assert_eq!(
            d.sha256,
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
