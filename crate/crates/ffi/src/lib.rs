//! C interface to the `adgat` library.
//!
//! Datasets and training results cross the boundary as opaque handles that the
//! caller releases with the matching `*_free` function. Every fallible entry point
//! returns an [`AdgatStatus`]; on failure a human-readable message is available
//! from [`adgat_last_error_message`] on the same thread. Configuration is passed
//! as TOML text using the same keys as the command-line tool's config files.
//!
//! Panics never unwind into C: they are caught and reported as
//! [`AdgatStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use adgat::autodiff::Matrix;
use adgat::dataset::{generate_synthetic, load_dataset, Dataset, SyntheticParams};
use adgat::metrics::{self, EpochTrace};
use adgat::model::{adaptive_depth_with_max, ModelConfig};
use adgat::trainer::{train_fresh, HParams, TrainResult};
use adgat::Error;

/// Result code of every fallible call. `ADGAT_STATUS_OK` is zero.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdgatStatus {
    Ok = 0,
    EdgeOutOfRange = 1,
    MissingFile = 2,
    CountMismatch = 3,
    LabelOutOfRange = 4,
    SplitOverlap = 5,
    Parse = 6,
    Infeasible = 7,
    Shape = 8,
    EmptySegment = 9,
    EmptyMask = 10,
    Unknown = 11,
    NonScalarLoss = 12,
    DepthDomain = 13,
    FaTooLarge = 14,
    WidthTooLarge = 15,
    Config = 16,
    Diverged = 17,
    Nondeterministic = 18,
    MissingGradient = 19,
    Io = 20,
    Json = 21,
    Csv = 22,
    /// A required pointer argument was NULL.
    NullPointer = 100,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 101,
    /// An index or size argument was out of range.
    OutOfRange = 102,
    /// The library panicked; this indicates a bug.
    Panic = 103,
}

impl AdgatStatus {
    fn from_error(err: &Error) -> Self {
        match err.tag() {
            "edge_out_of_range" => Self::EdgeOutOfRange,
            "missing_file" => Self::MissingFile,
            "count_mismatch" => Self::CountMismatch,
            "label_out_of_range" => Self::LabelOutOfRange,
            "split_overlap" => Self::SplitOverlap,
            "parse" => Self::Parse,
            "infeasible" => Self::Infeasible,
            "shape" => Self::Shape,
            "empty_segment" => Self::EmptySegment,
            "empty_mask" => Self::EmptyMask,
            "unknown" => Self::Unknown,
            "non_scalar_loss" => Self::NonScalarLoss,
            "depth_domain" => Self::DepthDomain,
            "fa_too_large" => Self::FaTooLarge,
            "width_too_large" => Self::WidthTooLarge,
            "config" => Self::Config,
            "diverged" => Self::Diverged,
            "nondeterministic" => Self::Nondeterministic,
            "missing_gradient" => Self::MissingGradient,
            "io" => Self::Io,
            "json" => Self::Json,
            "csv" => Self::Csv,
            _ => Self::Panic,
        }
    }
}

/// A loaded or generated dataset.
pub struct AdgatDataset(Dataset);

/// The outcome of one training run.
pub struct AdgatTrainResult(TrainResult);

/// One epoch of a training trace. Diagnostics that were not computed for the
/// epoch are NaN.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdgatEpochTrace {
    pub epoch: usize,
    pub loss: f64,
    pub acc_train: f64,
    pub acc_val: f64,
    pub acc_test: f64,
    pub smv: f64,
    pub corr: f64,
    pub grad_l1_mean: f64,
}

impl From<&EpochTrace> for AdgatEpochTrace {
    fn from(t: &EpochTrace) -> Self {
        Self {
            epoch: t.epoch,
            loss: t.loss,
            acc_train: t.acc_train,
            acc_val: t.acc_val,
            acc_test: t.acc_test,
            smv: t.smv.unwrap_or(f64::NAN),
            corr: t.corr.unwrap_or(f64::NAN),
            grad_l1_mean: t.grad_l1_mean,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure {
    status: AdgatStatus,
    message: String,
}

impl From<Error> for Failure {
    fn from(err: Error) -> Self {
        Self {
            status: AdgatStatus::from_error(&err),
            message: err.to_string(),
        }
    }
}

impl Failure {
    fn null(arg: &str) -> Self {
        Self {
            status: AdgatStatus::NullPointer,
            message: format!("argument `{arg}` is NULL"),
        }
    }

    fn range(message: String) -> Self {
        Self {
            status: AdgatStatus::OutOfRange,
            message,
        }
    }
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

/// Runs `body`, converting errors and panics into a status code.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> AdgatStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => AdgatStatus::Ok,
        Ok(Err(f)) => {
            set_last_error(f.message);
            f.status
        }
        Err(payload) => {
            let what = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("internal panic: {what}"));
            AdgatStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::null(name));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Failure {
        status: AdgatStatus::InvalidUtf8,
        message: format!("argument `{name}` is not valid UTF-8"),
    })
}

/// Parses an optional TOML string; NULL yields the type's defaults.
unsafe fn toml_arg<T: serde::de::DeserializeOwned + Default>(p: *const c_char, name: &str) -> Result<T, Failure> {
    if p.is_null() {
        return Ok(T::default());
    }
    let text = str_arg(p, name)?;
    toml::from_str(text).map_err(|e| Error::parse(name, e.message()).into())
}

unsafe fn out_arg<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| Failure::null(name))
}

unsafe fn matrix_arg(data: *const f64, rows: usize, cols: usize) -> Result<Matrix, Failure> {
    let len = rows
        .checked_mul(cols)
        .ok_or_else(|| Failure::range(format!("{rows} x {cols} overflows")))?;
    if data.is_null() && len > 0 {
        return Err(Failure::null("data"));
    }
    let values = if len == 0 {
        Vec::new()
    } else {
        std::slice::from_raw_parts(data, len).to_vec()
    };
    Ok(Matrix::from_vec(rows, cols, values)?)
}

/// Message describing the most recent failure on the calling thread, or NULL if
/// no call has failed yet. The pointer stays valid until the next failing call
/// on the same thread.
#[no_mangle]
pub extern "C" fn adgat_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Stable lowercase name of a status code, e.g. `"depth_domain"`. Never NULL.
#[no_mangle]
pub extern "C" fn adgat_status_name(status: AdgatStatus) -> *const c_char {
    let name: &'static CStr = match status {
        AdgatStatus::Ok => c"ok",
        AdgatStatus::EdgeOutOfRange => c"edge_out_of_range",
        AdgatStatus::MissingFile => c"missing_file",
        AdgatStatus::CountMismatch => c"count_mismatch",
        AdgatStatus::LabelOutOfRange => c"label_out_of_range",
        AdgatStatus::SplitOverlap => c"split_overlap",
        AdgatStatus::Parse => c"parse",
        AdgatStatus::Infeasible => c"infeasible",
        AdgatStatus::Shape => c"shape",
        AdgatStatus::EmptySegment => c"empty_segment",
        AdgatStatus::EmptyMask => c"empty_mask",
        AdgatStatus::Unknown => c"unknown",
        AdgatStatus::NonScalarLoss => c"non_scalar_loss",
        AdgatStatus::DepthDomain => c"depth_domain",
        AdgatStatus::FaTooLarge => c"fa_too_large",
        AdgatStatus::WidthTooLarge => c"width_too_large",
        AdgatStatus::Config => c"config",
        AdgatStatus::Diverged => c"diverged",
        AdgatStatus::Nondeterministic => c"nondeterministic",
        AdgatStatus::MissingGradient => c"missing_gradient",
        AdgatStatus::Io => c"io",
        AdgatStatus::Json => c"json",
        AdgatStatus::Csv => c"csv",
        AdgatStatus::NullPointer => c"null_pointer",
        AdgatStatus::InvalidUtf8 => c"invalid_utf8",
        AdgatStatus::OutOfRange => c"out_of_range",
        AdgatStatus::Panic => c"panic",
    };
    name.as_ptr()
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn adgat_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr().cast()
}

/// Releases a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must be NULL or a pointer returned by an `adgat_*` function documented as
/// returning an owned string, not freed before.
#[no_mangle]
pub unsafe extern "C" fn adgat_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Adaptive depth for a graph with `num_nodes` nodes and `num_edges` undirected
/// edges. Writes the unrounded value to `out_real` (may be NULL) and the selected
/// integer depth, clamped to `[1, max_depth]`, to `out_depth`.
///
/// # Safety
/// `out_real` must be NULL or writable; `out_depth` must be writable.
#[no_mangle]
pub unsafe extern "C" fn adgat_adaptive_depth(
    num_nodes: usize,
    num_edges: usize,
    max_depth: usize,
    out_real: *mut f64,
    out_depth: *mut usize,
) -> AdgatStatus {
    guard(|| {
        let depth = out_arg(out_depth, "out_depth")?;
        let (real, selected) = adaptive_depth_with_max(num_nodes, num_edges, max_depth)?;
        if let Some(r) = out_real.as_mut() {
            *r = real;
        }
        *depth = selected;
        Ok(())
    })
}

/// Mean pairwise normalized Euclidean distance of the rows of a row-major
/// `rows x cols` matrix. Large matrices are estimated from a fixed-seed sample of
/// row pairs.
///
/// # Safety
/// `data` must point to `rows * cols` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn adgat_smv(data: *const f64, rows: usize, cols: usize, out: *mut f64) -> AdgatStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = metrics::smv(&matrix_arg(data, rows, cols)?)?;
        Ok(())
    })
}

/// Mean absolute Pearson correlation between distinct columns of a row-major
/// `rows x cols` matrix. Constant columns count as uncorrelated.
///
/// # Safety
/// `data` must point to `rows * cols` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn adgat_corr(data: *const f64, rows: usize, cols: usize, out: *mut f64) -> AdgatStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = metrics::corr(&matrix_arg(data, rows, cols)?)?;
        Ok(())
    })
}

/// Loads a dataset directory (`meta.json`, `edges.csv`, `features.csv`,
/// `labels.csv`, `splits.json`).
///
/// # Safety
/// `dir` must be a NUL-terminated path; `out` must be writable. On success the
/// caller owns `*out` and must release it with [`adgat_dataset_free`].
#[no_mangle]
pub unsafe extern "C" fn adgat_dataset_load(dir: *const c_char, out: *mut *mut AdgatDataset) -> AdgatStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let ds = load_dataset(Path::new(str_arg(dir, "dir")?))?;
        *out = Box::into_raw(Box::new(AdgatDataset(ds)));
        Ok(())
    })
}

/// Generates a seeded stochastic-block dataset. `params_toml` may be NULL for the
/// Cora-sized defaults; otherwise it overrides any of `num_nodes`, `avg_degree`,
/// `num_classes`, `feat_dim`, `homophily`, `noise`, `train`, `val`, `test`, `seed`.
///
/// # Safety
/// `params_toml` must be NULL or NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn adgat_dataset_synthetic(
    params_toml: *const c_char,
    out: *mut *mut AdgatDataset,
) -> AdgatStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let params: SyntheticParams = toml_arg(params_toml, "params_toml")?;
        *out = Box::into_raw(Box::new(AdgatDataset(generate_synthetic(&params)?)));
        Ok(())
    })
}

/// Writes a dataset to a directory in the on-disk format read by
/// [`adgat_dataset_load`].
///
/// # Safety
/// `ds` must be a live handle; `dir` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn adgat_dataset_save(ds: *const AdgatDataset, dir: *const c_char) -> AdgatStatus {
    guard(|| {
        let ds = ds.as_ref().ok_or_else(|| Failure::null("ds"))?;
        ds.0.save(Path::new(str_arg(dir, "dir")?))?;
        Ok(())
    })
}

/// Number of nodes, or 0 for a NULL handle.
///
/// # Safety
/// `ds` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn adgat_dataset_num_nodes(ds: *const AdgatDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.0.num_nodes())
}

/// Number of undirected edges as recorded in the dataset metadata, or 0 for a
/// NULL handle.
///
/// # Safety
/// `ds` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn adgat_dataset_num_edges(ds: *const AdgatDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.0.meta.num_edges)
}

/// # Safety
/// `ds` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn adgat_dataset_num_classes(ds: *const AdgatDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.0.num_classes())
}

/// # Safety
/// `ds` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn adgat_dataset_feat_dim(ds: *const AdgatDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.0.feat_dim())
}

/// Releases a dataset. NULL is ignored.
///
/// # Safety
/// `ds` must be NULL or a handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn adgat_dataset_free(ds: *mut AdgatDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Trains a freshly initialized model. `model_toml` holds model keys (`variant`,
/// `depth`, `hidden_dim`, `beta`, ...) and `hparams_toml` optimizer keys
/// (`learning_rate`, `weight_decay`, `epochs`, `patience`, `seed`, ...); either
/// may be NULL for defaults. The run is deterministic given its inputs.
///
/// # Safety
/// `ds` must be a live handle; the TOML arguments NULL or NUL-terminated; `out`
/// writable. On success the caller owns `*out` and must release it with
/// [`adgat_result_free`].
#[no_mangle]
pub unsafe extern "C" fn adgat_train(
    ds: *const AdgatDataset,
    model_toml: *const c_char,
    hparams_toml: *const c_char,
    out: *mut *mut AdgatTrainResult,
) -> AdgatStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let ds = ds.as_ref().ok_or_else(|| Failure::null("ds"))?;
        let config: ModelConfig = toml_arg(model_toml, "model_toml")?;
        let hp: HParams = toml_arg(hparams_toml, "hparams_toml")?;
        let result = train_fresh(&config, &ds.0, &hp)?;
        *out = Box::into_raw(Box::new(AdgatTrainResult(result)));
        Ok(())
    })
}

/// Number of recorded epochs, or 0 for a NULL handle.
///
/// # Safety
/// `res` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn adgat_result_num_epochs(res: *const AdgatTrainResult) -> usize {
    res.as_ref().map_or(0, |r| r.0.traces.len())
}

/// Epoch with the highest validation accuracy (earliest on ties).
///
/// # Safety
/// `res` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn adgat_result_best_epoch(res: *const AdgatTrainResult) -> usize {
    res.as_ref().map_or(0, |r| r.0.best_epoch)
}

/// Validation accuracy at the best epoch, or NaN for a NULL handle.
///
/// # Safety
/// `res` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn adgat_result_val_at_best(res: *const AdgatTrainResult) -> f64 {
    res.as_ref().map_or(f64::NAN, |r| r.0.val_at_best)
}

/// Test accuracy at the best epoch, or NaN for a NULL handle.
///
/// # Safety
/// `res` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn adgat_result_test_at_best(res: *const AdgatTrainResult) -> f64 {
    res.as_ref().map_or(f64::NAN, |r| r.0.test_at_best)
}

/// Copies the trace entry for epoch `index` into `out`.
///
/// # Safety
/// `res` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn adgat_result_trace(
    res: *const AdgatTrainResult,
    index: usize,
    out: *mut AdgatEpochTrace,
) -> AdgatStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let res = res.as_ref().ok_or_else(|| Failure::null("res"))?;
        let t = res.0.traces.get(index).ok_or_else(|| {
            Failure::range(format!(
                "epoch {index} out of range for {} recorded epochs",
                res.0.traces.len()
            ))
        })?;
        *out = t.into();
        Ok(())
    })
}

/// Serializes the whole result (traces, best epoch, parameter digest) as JSON.
/// Returns NULL on failure; release the string with [`adgat_string_free`].
///
/// # Safety
/// `res` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn adgat_result_to_json(res: *const AdgatTrainResult) -> *mut c_char {
    let mut json = ptr::null_mut();
    let status = guard(|| {
        let res = res.as_ref().ok_or_else(|| Failure::null("res"))?;
        let text = serde_json::to_string(&res.0).map_err(Error::from)?;
        json = CString::new(text)
            .map_err(|e| Error::parse("result json", e))?
            .into_raw();
        Ok(())
    });
    debug_assert!(status == AdgatStatus::Ok || json.is_null());
    json
}

/// Releases a training result. NULL is ignored.
///
/// # Safety
/// `res` must be NULL or a handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn adgat_result_free(res: *mut AdgatTrainResult) {
    if !res.is_null() {
        drop(Box::from_raw(res));
    }
}
