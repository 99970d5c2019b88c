//! C ABI over the `zsadapt` engine.
//!
//! Every fallible call returns a [`ZsaStatus`]; on failure the message is
//! available from [`zsa_last_error`] on the same thread until the next call.
//! Engines are opaque and must be released with [`zsa_engine_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use zsadapt::{read_dataset, run_stream, AggregationKind, ClassModel, Config, EmbeddingVector, Engine, Error, Mode, NullSink, StreamRecord};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZsaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    Numeric = 4,
    Io = 5,
    Format = 6,
    Panic = 7,
}

#[repr(u32)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZsaMode {
    Te = 0,
    Oc = 1,
    Full = 2,
    Avg = 3,
}

#[repr(u32)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZsaAggregation {
    Uniform = 0,
    MaxProb = 1,
    EntropyThreshold = 2,
    NormEntropy = 3,
    Renyi = 4,
}

/// Engine settings. `mode` holds a `ZsaMode` and `aggregation` a
/// `ZsaAggregation` value; start from [`zsa_config_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct ZsaConfig {
    pub alpha: f64,
    pub beta: f64,
    pub temperature: f64,
    pub warmup_multiplier: f64,
    pub max_projection_rank: u32,
    pub views: u32,
    pub mode: u32,
    pub aggregation: u32,
    pub keep_fraction: f64,
    pub prior_count: f64,
}

/// Opaque engine handle.
pub struct ZsaEngine {
    inner: Engine,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn clear_last_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

struct Failure(ZsaStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e.root() {
            Error::DimensionMismatch { .. } => ZsaStatus::DimensionMismatch,
            Error::ZeroVector
            | Error::NonFiniteValue
            | Error::AllZeroWeights
            | Error::RankDeficient { .. }
            | Error::DegenerateProjection { .. }
            | Error::AllViewsDegenerate => ZsaStatus::Numeric,
            Error::Io(_) => ZsaStatus::Io,
            Error::BadMagic(_)
            | Error::VersionUnsupported(_)
            | Error::Truncated { .. }
            | Error::TrailingBytes { .. }
            | Error::NonFinite { .. }
            | Error::InvalidLabel { .. }
            | Error::BadHeader(_)
            | Error::Json(_)
            | Error::Csv(_) => ZsaStatus::Format,
            _ => ZsaStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(ZsaStatus::InvalidArgument, msg.into())
}

fn null(what: &str) -> Failure {
    Failure(ZsaStatus::NullPointer, format!("{what} is null"))
}

/// Runs `body`, translating errors and panics into a status code.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> ZsaStatus {
    clear_last_error();
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => ZsaStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic".into());
            ZsaStatus::Panic
        }
    }
}

fn to_config(c: &ZsaConfig) -> Result<Config, Failure> {
    let mode = match c.mode {
        0 => Mode::Te,
        1 => Mode::Oc,
        2 => Mode::Full,
        3 => Mode::Avg,
        m => return Err(invalid(format!("unknown mode {m}"))),
    };
    let aggregation = match c.aggregation {
        0 => AggregationKind::Uniform,
        1 => AggregationKind::MaxProb,
        2 => AggregationKind::EntropyThreshold,
        3 => AggregationKind::NormEntropy,
        4 => AggregationKind::Renyi,
        a => return Err(invalid(format!("unknown aggregation {a}"))),
    };
    let config = Config {
        alpha: c.alpha,
        beta: c.beta,
        temperature: c.temperature,
        warmup_multiplier: c.warmup_multiplier,
        max_projection_rank: c.max_projection_rank as usize,
        views: c.views as usize,
        mode,
        aggregation,
        keep_fraction: c.keep_fraction,
        prior_count: c.prior_count,
        ..Config::default()
    };
    config.validate()?;
    Ok(config)
}

fn config_or_default(config: *const ZsaConfig) -> Result<Config, Failure> {
    // SAFETY: a non-null pointer must reference a valid ZsaConfig per the API contract.
    match unsafe { config.as_ref() } {
        Some(c) => to_config(c),
        None => Ok(Config::default()),
    }
}

/// Default settings.
#[no_mangle]
pub extern "C" fn zsa_config_default() -> ZsaConfig {
    let d = Config::default();
    ZsaConfig {
        alpha: d.alpha,
        beta: d.beta,
        temperature: d.temperature,
        warmup_multiplier: d.warmup_multiplier,
        max_projection_rank: d.max_projection_rank as u32,
        views: d.views as u32,
        mode: ZsaMode::Full as u32,
        aggregation: ZsaAggregation::Renyi as u32,
        keep_fraction: d.keep_fraction,
        prior_count: d.prior_count,
    }
}

/// Message for the last failed call on this thread, or null.
///
/// The pointer stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn zsa_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Builds an engine from `classes × dim` row-major text embeddings.
///
/// `config` may be null for defaults. On success `*out` owns a new engine.
///
/// # Safety
/// `text` must point to `classes * dim` floats; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn zsa_engine_new(
    text: *const f32,
    classes: u32,
    dim: u32,
    config: *const ZsaConfig,
    out: *mut *mut ZsaEngine,
) -> ZsaStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if text.is_null() {
            return Err(null("text"));
        }
        let (classes, dim) = (classes as usize, dim as usize);
        let config = config_or_default(config)?;
        // SAFETY: caller guarantees `classes * dim` readable floats.
        let flat = unsafe { std::slice::from_raw_parts(text, classes * dim) };
        let rows = flat
            .chunks_exact(dim.max(1))
            .take(classes)
            .map(EmbeddingVector::from_f32)
            .collect::<zsadapt::Result<Vec<_>>>()?;
        let model = ClassModel::new(rows, None)?;
        let engine = Engine::new(model, config)?;
        // SAFETY: checked non-null above.
        unsafe { *out = Box::into_raw(Box::new(ZsaEngine { inner: engine })) };
        Ok(())
    })
}

/// Releases an engine. Null is ignored.
///
/// # Safety
/// `engine` must come from [`zsa_engine_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn zsa_engine_free(engine: *mut ZsaEngine) {
    if !engine.is_null() {
        // SAFETY: ownership returns to Rust exactly once per the contract.
        drop(unsafe { Box::from_raw(engine) });
    }
}

/// Processes one example of `n_views × dim` row-major view embeddings.
///
/// Writes the fused distribution into `out_probs` (length `classes`) and the
/// predicted class into `out_class`; either may be null.
///
/// # Safety
/// `engine` must be live; `views` must point to `n_views * dim` floats;
/// non-null outputs must be writable for their lengths.
#[no_mangle]
pub unsafe extern "C" fn zsa_engine_process(
    engine: *mut ZsaEngine,
    views: *const f32,
    n_views: u32,
    out_probs: *mut f64,
    out_len: u32,
    out_class: *mut u32,
) -> ZsaStatus {
    guard(|| {
        // SAFETY: caller guarantees a live, exclusively used engine.
        let engine = unsafe { engine.as_mut() }.ok_or_else(|| null("engine"))?;
        if views.is_null() {
            return Err(null("views"));
        }
        if n_views == 0 {
            return Err(invalid("n_views must be at least 1"));
        }
        let dim = engine.inner.class_model().dim();
        let classes = engine.inner.class_model().class_count();
        if !out_probs.is_null() && (out_len as usize) < classes {
            return Err(invalid(format!("out_len {out_len} is smaller than the class count {classes}")));
        }
        // SAFETY: caller guarantees `n_views * dim` readable floats.
        let flat = unsafe { std::slice::from_raw_parts(views, n_views as usize * dim) };
        let views = flat
            .chunks_exact(dim)
            .map(EmbeddingVector::from_f32)
            .collect::<zsadapt::Result<Vec<_>>>()?;
        let record = StreamRecord {
            example_id: engine.inner.examples_seen(),
            label: None,
            views,
        };
        let prediction = engine.inner.process_example(&record)?;
        if !out_probs.is_null() {
            // SAFETY: `out_len >= classes` was checked above.
            let out = unsafe { std::slice::from_raw_parts_mut(out_probs, classes) };
            out.copy_from_slice(prediction.fused.as_slice());
        }
        if !out_class.is_null() {
            // SAFETY: caller guarantees a writable u32.
            unsafe { *out_class = prediction.predicted_class as u32 };
        }
        Ok(())
    })
}

/// Number of examples processed so far; 0 for a null engine.
///
/// # Safety
/// `engine` must be null or live.
#[no_mangle]
pub unsafe extern "C" fn zsa_engine_examples_seen(engine: *const ZsaEngine) -> u64 {
    // SAFETY: null or live per the contract.
    unsafe { engine.as_ref() }.map_or(0, |e| e.inner.examples_seen())
}

/// Class count; 0 for a null engine.
///
/// # Safety
/// `engine` must be null or live.
#[no_mangle]
pub unsafe extern "C" fn zsa_engine_class_count(engine: *const ZsaEngine) -> u32 {
    // SAFETY: null or live per the contract.
    unsafe { engine.as_ref() }.map_or(0, |e| e.inner.class_model().class_count() as u32)
}

/// Embedding dimension; 0 for a null engine.
///
/// # Safety
/// `engine` must be null or live.
#[no_mangle]
pub unsafe extern "C" fn zsa_engine_dim(engine: *const ZsaEngine) -> u32 {
    // SAFETY: null or live per the contract.
    unsafe { engine.as_ref() }.map_or(0, |e| e.inner.class_model().dim() as u32)
}

/// 1 while clustering is still kept out of the fused output, else 0.
///
/// # Safety
/// `engine` must be null or live.
#[no_mangle]
pub unsafe extern "C" fn zsa_engine_warmup_active(engine: *const ZsaEngine) -> i32 {
    // SAFETY: null or live per the contract.
    unsafe { engine.as_ref() }.map_or(0, |e| i32::from(e.inner.warmup_active()))
}

/// Runs a whole dataset file and returns the run report as JSON.
///
/// Timing is omitted so identical inputs give identical strings. Free the
/// result with [`zsa_string_free`].
///
/// # Safety
/// `path` must be a NUL-terminated string; `out_json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn zsa_run_file(path: *const c_char, config: *const ZsaConfig, out_json: *mut *mut c_char) -> ZsaStatus {
    guard(|| {
        if path.is_null() {
            return Err(null("path"));
        }
        if out_json.is_null() {
            return Err(null("out_json"));
        }
        // SAFETY: caller guarantees a NUL-terminated string.
        let path = unsafe { CStr::from_ptr(path) }
            .to_str()
            .map_err(|_| invalid("path is not valid UTF-8"))?;
        let config = config_or_default(config)?;
        let (model, records) = read_dataset(path)?;
        let mut engine = Engine::new(model, config)?;
        let report = run_stream(&mut engine, records, &mut NullSink)?;
        let json = report.without_timing().to_json()?;
        let json = CString::new(json).map_err(|_| invalid("report contains NUL"))?;
        // SAFETY: checked non-null above.
        unsafe { *out_json = json.into_raw() };
        Ok(())
    })
}

/// Frees a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn zsa_string_free(s: *mut c_char) {
    if !s.is_null() {
        // SAFETY: the string was produced by `CString::into_raw`.
        drop(unsafe { CString::from_raw(s) });
    }
}

/// Library version, NUL-terminated and static.
#[no_mangle]
pub extern "C" fn zsa_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
