//! C ABI for the `dren` crate.
//!
//! Every fallible function returns a [`DrenStatus`]. On failure the message
//! is available from [`dren_last_error`] on the same thread until the next
//! call into the library. Matrices are dense row-major `double` buffers.
//! Models are opaque handles released with [`dren_model_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use dren::divergence::DivergenceKind;
use dren::encoder::{embed, predict, AdamConfig, EncoderParams};
use dren::eval::knn_predict;
use dren::histlayer::HistMode;
use dren::numerics::Matrix;
use dren::trainer::{train, RunConfig};
use dren::tsne::{lle_weights_batch, oos_embed, tsne_fit, OosConfig, TsneConfig};
use dren::{checkpoint, DrenError};

/// Result of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DrenStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    InvalidConfig = 3,
    TrainingDiverged = 4,
    OptimizationFailure = 5,
    Parse = 6,
    Checkpoint = 7,
    Io = 8,
    BufferTooSmall = 9,
    Panic = 10,
    Internal = 11,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DrenDivergence {
    Kl = 0,
    Renyi = 1,
    Wasserstein1Tv = 2,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DrenHistMode {
    Concat = 0,
    HistogramOnly = 1,
}

/// Training options. Fill with [`dren_train_config_default`] and override.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct DrenTrainConfig {
    pub lambda: f64,
    pub embed_dim: usize,
    pub divergence: DrenDivergence,
    /// Used only with `DREN_DIVERGENCE_RENYI`.
    pub alpha: f64,
    pub perplexity: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub val_fraction: f64,
    pub seed: u64,
    pub histogram: bool,
    pub bins: usize,
    pub hist_mode: DrenHistMode,
}

/// t-SNE options. Fill with [`dren_tsne_config_default`] and override.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct DrenTsneConfig {
    pub embed_dim: usize,
    pub perplexity: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

/// A trained encoder.
pub struct DrenModel {
    params: EncoderParams,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

struct Failure(DrenStatus, String);

impl From<DrenError> for Failure {
    fn from(e: DrenError) -> Self {
        let status = match &e {
            DrenError::InvalidInput(_) => DrenStatus::InvalidInput,
            DrenError::InvalidConfig(_) => DrenStatus::InvalidConfig,
            DrenError::TrainingDiverged { .. } => DrenStatus::TrainingDiverged,
            DrenError::OptimizationFailure { .. } => DrenStatus::OptimizationFailure,
            DrenError::Parse { .. } => DrenStatus::Parse,
            DrenError::Checkpoint(_) => DrenStatus::Checkpoint,
            DrenError::Io { .. } => DrenStatus::Io,
            _ => DrenStatus::Internal,
        };
        Failure(status, e.to_string())
    }
}

type FfiResult<T = ()> = Result<T, Failure>;

fn null(what: &str) -> Failure {
    Failure(DrenStatus::NullPointer, format!("{what} is null"))
}

fn run(f: impl FnOnce() -> FfiResult) -> DrenStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DrenStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            DrenStatus::Panic
        }
    }
}

fn checked_len(rows: usize, cols: usize) -> FfiResult<usize> {
    rows.checked_mul(cols)
        .ok_or_else(|| Failure(DrenStatus::InvalidInput, "matrix size overflows".into()))
}

unsafe fn slice<'a, T>(ptr: *const T, len: usize, what: &str) -> FfiResult<&'a [T]> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

unsafe fn slice_mut<'a, T>(ptr: *mut T, len: usize, what: &str) -> FfiResult<&'a mut [T]> {
    if len == 0 {
        return Ok(&mut []);
    }
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(ptr, len))
}

unsafe fn matrix(ptr: *const f64, rows: usize, cols: usize, what: &str) -> FfiResult<Matrix> {
    let data = slice(ptr, checked_len(rows, cols)?, what)?;
    Ok(Matrix::from_vec(rows, cols, data.to_vec())?)
}

unsafe fn labels(ptr: *const u32, n: usize) -> FfiResult<Vec<usize>> {
    Ok(slice(ptr, n, "labels")?.iter().map(|&c| c as usize).collect())
}

fn copy_out<T: Copy>(src: &[T], dst: &mut [T]) -> FfiResult {
    if dst.len() < src.len() {
        return Err(Failure(
            DrenStatus::BufferTooSmall,
            format!("output buffer holds {} values, {} needed", dst.len(), src.len()),
        ));
    }
    dst[..src.len()].copy_from_slice(src);
    Ok(())
}

fn labels_out(pred: &[usize], dst: &mut [u32]) -> FfiResult {
    let pred: Vec<u32> = pred.iter().map(|&c| c as u32).collect();
    copy_out(&pred, dst)
}

unsafe fn path(ptr: *const c_char) -> FfiResult<PathBuf> {
    if ptr.is_null() {
        return Err(null("path"));
    }
    let s = CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| Failure(DrenStatus::InvalidInput, "path is not valid UTF-8".into()))?;
    Ok(PathBuf::from(s))
}

unsafe fn model<'a>(ptr: *const DrenModel) -> FfiResult<&'a DrenModel> {
    ptr.as_ref().ok_or_else(|| null("model"))
}

impl DrenTrainConfig {
    fn to_run(self) -> RunConfig {
        let divergence = match self.divergence {
            DrenDivergence::Kl => DivergenceKind::Kl,
            DrenDivergence::Renyi => DivergenceKind::Renyi { alpha: self.alpha },
            DrenDivergence::Wasserstein1Tv => DivergenceKind::Wasserstein1Tv,
        };
        let hist_mode = match self.hist_mode {
            DrenHistMode::Concat => HistMode::Concat,
            DrenHistMode::HistogramOnly => HistMode::HistogramOnly,
        };
        RunConfig {
            lambda: self.lambda,
            embed_dim: self.embed_dim,
            divergence,
            perplexity: self.perplexity,
            batch_size: self.batch_size,
            epochs: self.epochs,
            adam: AdamConfig {
                lr: self.learning_rate,
                ..AdamConfig::default()
            },
            val_fraction: self.val_fraction,
            seed: self.seed,
            histogram: self.histogram,
            bins: self.bins,
            hist_mode,
            ..RunConfig::default()
        }
    }
}

impl DrenTsneConfig {
    fn to_tsne(self) -> TsneConfig {
        TsneConfig {
            embed_dim: self.embed_dim,
            perplexity: self.perplexity,
            iterations: self.iterations,
            learning_rate: self.learning_rate,
            seed: self.seed,
            ..TsneConfig::default()
        }
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn dren_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failed call on this thread, or NULL after a success.
/// The pointer stays valid until the next library call on this thread.
#[no_mangle]
pub extern "C" fn dren_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// # Safety
/// `out` must be null or point to writable memory for one config.
#[no_mangle]
pub unsafe extern "C" fn dren_train_config_default(out: *mut DrenTrainConfig) -> DrenStatus {
    run(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let d = RunConfig::default();
        *out = DrenTrainConfig {
            lambda: d.lambda,
            embed_dim: d.embed_dim,
            divergence: DrenDivergence::Kl,
            alpha: 0.5,
            perplexity: d.perplexity,
            batch_size: d.batch_size,
            epochs: d.epochs,
            learning_rate: d.adam.lr,
            val_fraction: d.val_fraction,
            seed: d.seed,
            histogram: d.histogram,
            bins: d.bins,
            hist_mode: DrenHistMode::Concat,
        };
        Ok(())
    })
}

/// # Safety
/// `out` must be null or point to writable memory for one config.
#[no_mangle]
pub unsafe extern "C" fn dren_tsne_config_default(out: *mut DrenTsneConfig) -> DrenStatus {
    run(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let d = TsneConfig::default();
        *out = DrenTsneConfig {
            embed_dim: d.embed_dim,
            perplexity: d.perplexity,
            iterations: d.iterations,
            learning_rate: d.learning_rate,
            seed: d.seed,
        };
        Ok(())
    })
}

/// Train an encoder on `n × dim` features with labels `0..C`. On success
/// `*out_model` owns a new handle.
///
/// # Safety
/// `features` must hold `n * dim` doubles, `labels` must hold `n` values and
/// `out_model` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dren_train(
    config: *const DrenTrainConfig,
    features: *const f64,
    n: usize,
    dim: usize,
    labels_ptr: *const u32,
    out_model: *mut *mut DrenModel,
) -> DrenStatus {
    run(|| {
        let cfg = config.as_ref().ok_or_else(|| null("config"))?.to_run();
        let out = out_model.as_mut().ok_or_else(|| null("out_model"))?;
        let x = matrix(features, n, dim, "features")?;
        let y = labels(labels_ptr, n)?;
        let outcome = train(&cfg, &x, &y)?;
        *out = Box::into_raw(Box::new(DrenModel {
            params: outcome.params,
        }));
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dren_model_input_dim(model: *const DrenModel) -> usize {
    model.as_ref().map_or(0, |m| m.params.input_dim)
}

/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dren_model_embed_dim(model: *const DrenModel) -> usize {
    model.as_ref().map_or(0, |m| m.params.embed_dim())
}

/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dren_model_classes(model: *const DrenModel) -> usize {
    model.as_ref().map_or(0, |m| m.params.classes())
}

/// Embed `n × dim` features into `out` (`out_len ≥ n * embed_dim`).
///
/// # Safety
/// Buffers must hold the stated number of elements.
#[no_mangle]
pub unsafe extern "C" fn dren_model_embed(
    model_ptr: *const DrenModel,
    features: *const f64,
    n: usize,
    dim: usize,
    out: *mut f64,
    out_len: usize,
) -> DrenStatus {
    run(|| {
        let m = model(model_ptr)?;
        let x = matrix(features, n, dim, "features")?;
        let z = embed(&m.params, &x)?;
        copy_out(z.as_slice(), slice_mut(out, out_len, "out")?)
    })
}

/// Softmax class predictions for `n × dim` features into `out` (`out_len ≥ n`).
///
/// # Safety
/// Buffers must hold the stated number of elements.
#[no_mangle]
pub unsafe extern "C" fn dren_model_predict(
    model_ptr: *const DrenModel,
    features: *const f64,
    n: usize,
    dim: usize,
    out: *mut u32,
    out_len: usize,
) -> DrenStatus {
    run(|| {
        let m = model(model_ptr)?;
        let x = matrix(features, n, dim, "features")?;
        let pred = predict(&m.params, &x)?;
        labels_out(&pred, slice_mut(out, out_len, "out")?)
    })
}

/// # Safety
/// `path` must be a NUL-terminated UTF-8 string.
#[no_mangle]
pub unsafe extern "C" fn dren_model_save(
    model_ptr: *const DrenModel,
    path_ptr: *const c_char,
) -> DrenStatus {
    run(|| {
        let m = model(model_ptr)?;
        checkpoint::save(&path(path_ptr)?, &m.params)?;
        Ok(())
    })
}

/// # Safety
/// `path` must be a NUL-terminated UTF-8 string and `out_model` writable.
#[no_mangle]
pub unsafe extern "C" fn dren_model_load(
    path_ptr: *const c_char,
    out_model: *mut *mut DrenModel,
) -> DrenStatus {
    run(|| {
        let out = out_model.as_mut().ok_or_else(|| null("out_model"))?;
        let params = checkpoint::load(&path(path_ptr)?)?;
        *out = Box::into_raw(Box::new(DrenModel { params }));
        Ok(())
    })
}

/// Release a handle. NULL is ignored.
///
/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dren_model_free(model: *mut DrenModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Exact t-SNE of `n × dim` features into `out` (`out_len ≥ n * embed_dim`).
///
/// # Safety
/// Buffers must hold the stated number of elements.
#[no_mangle]
pub unsafe extern "C" fn dren_tsne_fit(
    config: *const DrenTsneConfig,
    features: *const f64,
    n: usize,
    dim: usize,
    out: *mut f64,
    out_len: usize,
) -> DrenStatus {
    run(|| {
        let cfg = config.as_ref().ok_or_else(|| null("config"))?.to_tsne();
        let x = matrix(features, n, dim, "features")?;
        let fit = tsne_fit(&x, &cfg)?;
        copy_out(fit.embedding.as_slice(), slice_mut(out, out_len, "out")?)
    })
}

/// Place test points in an existing embedding by reconstructing each from
/// its `k` nearest training points. `out_len ≥ n_test * embed_dim`.
///
/// # Safety
/// Buffers must hold the stated number of elements.
#[no_mangle]
pub unsafe extern "C" fn dren_oos_embed(
    x_train: *const f64,
    z_train: *const f64,
    n_train: usize,
    dim: usize,
    embed_dim: usize,
    x_test: *const f64,
    n_test: usize,
    k: usize,
    out: *mut f64,
    out_len: usize,
) -> DrenStatus {
    run(|| {
        let xt = matrix(x_train, n_train, dim, "x_train")?;
        let zt = matrix(z_train, n_train, embed_dim, "z_train")?;
        let xs = matrix(x_test, n_test, dim, "x_test")?;
        let cfg = OosConfig {
            k,
            ..OosConfig::default()
        };
        let w = lle_weights_batch(&xs, &xt, &cfg)?;
        let z = oos_embed(&w, &zt)?;
        copy_out(z.as_slice(), slice_mut(out, out_len, "out")?)
    })
}

/// Majority vote of the `k` nearest training embeddings. `out_len ≥ n_test`.
///
/// # Safety
/// Buffers must hold the stated number of elements.
#[no_mangle]
pub unsafe extern "C" fn dren_knn_predict(
    z_train: *const f64,
    y_train: *const u32,
    n_train: usize,
    embed_dim: usize,
    z_test: *const f64,
    n_test: usize,
    k: usize,
    out: *mut u32,
    out_len: usize,
) -> DrenStatus {
    run(|| {
        let zt = matrix(z_train, n_train, embed_dim, "z_train")?;
        let yt = labels(y_train, n_train)?;
        let zs = matrix(z_test, n_test, embed_dim, "z_test")?;
        let pred = knn_predict(&zt, &yt, &zs, k)?;
        labels_out(&pred, slice_mut(out, out_len, "out")?)
    })
}
