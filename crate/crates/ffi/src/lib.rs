//! C ABI for the trajectory-analysis pipeline.
//!
//! Every object crosses the boundary as an opaque pointer created and
//! destroyed by this library; every fallible call returns a
//! [`sceneclass_status`] and stores a message retrievable through
//! [`sceneclass_last_error`] on failure. Structured results (classification
//! reports, model-selection output) are returned as JSON strings to keep
//! the surface small; free them with [`sceneclass_string_free`].
//!
//! The generated header lives at `include/sceneclass.h`.

#![allow(non_camel_case_types)]
#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use sceneclass::cluster::ClusterModel;
use sceneclass::config::Thresholds;
use sceneclass::error::Error;
use sceneclass::featmat::{self, FeatureMatrix, IqrScope, FEATURE_COUNT};
use sceneclass::pipeline;
use sceneclass::synthgen::{self, RegimeParams};
use sceneclass::trajstore::{self, DatasetBundle, SceneMeta};

/// Result of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum sceneclass_status {
    /// The call succeeded.
    SCENECLASS_OK = 0,
    /// A computation failed (separation, rank deficiency, divergence).
    SCENECLASS_RUNTIME_ERROR = 1,
    /// The inputs or configuration are at fault (missing file, bad schema).
    SCENECLASS_INPUT_ERROR = 2,
    /// A required pointer argument was null.
    SCENECLASS_NULL_ARGUMENT = 3,
    /// A string argument was not valid UTF-8.
    SCENECLASS_INVALID_UTF8 = 4,
}

use sceneclass_status::*;

/// Trajectory recordings: scene metadata plus per-agent tracks.
pub struct sceneclass_bundle(DatasetBundle);

/// The per-pedestrian feature matrix (13 columns).
pub struct sceneclass_matrix(FeatureMatrix);

/// A fitted two-cluster environment model.
pub struct sceneclass_model(ClusterModel);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let sanitized: String = msg.chars().filter(|&c| c != '\0').collect();
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn fail(err: &Error) -> sceneclass_status {
    set_error(&err.to_string());
    match err.exit_code() {
        2 => SCENECLASS_INPUT_ERROR,
        _ => SCENECLASS_RUNTIME_ERROR,
    }
}

/// Run a closure, converting errors and panics into status codes.
fn guarded(f: impl FnOnce() -> Result<sceneclass_status, Error>) -> sceneclass_status {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(status)) => status,
        Ok(Err(err)) => fail(&err),
        Err(_) => {
            set_error("internal panic");
            SCENECLASS_RUNTIME_ERROR
        }
    }
}

unsafe fn utf8_arg<'a>(ptr: *const c_char) -> Result<&'a str, sceneclass_status> {
    if ptr.is_null() {
        return Err(SCENECLASS_NULL_ARGUMENT);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_error("argument is not valid UTF-8");
        SCENECLASS_INVALID_UTF8
    })
}

fn return_string(text: String, out: *mut *mut c_char) -> Result<sceneclass_status, Error> {
    let c = CString::new(text)
        .map_err(|_| Error::Invalid("result contained an interior NUL byte".into()))?;
    unsafe { *out = c.into_raw() };
    Ok(SCENECLASS_OK)
}

/// Message describing the most recent failure on this thread. Valid until
/// the next failing call on the same thread; never null.
#[no_mangle]
pub extern "C" fn sceneclass_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sceneclass_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Free a string returned by this library. Null is allowed.
#[no_mangle]
pub unsafe extern "C" fn sceneclass_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

// ---------------------------------------------------------------------------
// Bundles
// ---------------------------------------------------------------------------

/// Load a normalized trajectory CSV plus its scene-metadata JSON files.
#[no_mangle]
pub unsafe extern "C" fn sceneclass_bundle_load_normalized(
    csv_path: *const c_char,
    scene_paths: *const *const c_char,
    scene_count: usize,
    out: *mut *mut sceneclass_bundle,
) -> sceneclass_status {
    if out.is_null() || (scene_count > 0 && scene_paths.is_null()) {
        return SCENECLASS_NULL_ARGUMENT;
    }
    let csv_path = match utf8_arg(csv_path) {
        Ok(s) => PathBuf::from(s),
        Err(status) => return status,
    };
    let mut metas = Vec::with_capacity(scene_count);
    for i in 0..scene_count {
        let ptr = *scene_paths.add(i);
        let path = match utf8_arg(ptr) {
            Ok(s) => PathBuf::from(s),
            Err(status) => return status,
        };
        metas.push(path);
    }
    guarded(|| {
        let mut scenes = Vec::with_capacity(metas.len());
        for path in &metas {
            scenes.push(SceneMeta::from_file(path)?);
        }
        let (bundle, _report) = trajstore::load_normalized(&csv_path, scenes)?;
        unsafe { *out = Box::into_raw(Box::new(sceneclass_bundle(bundle))) };
        Ok(SCENECLASS_OK)
    })
}

/// Generate synthetic scenes from a built-in preset ("road" or "campus").
/// Each scene becomes its own dataset; scene `i` uses `seed + i`.
#[no_mangle]
pub unsafe extern "C" fn sceneclass_bundle_synth_preset(
    preset: *const c_char,
    scenes: usize,
    seed: u64,
    out: *mut *mut sceneclass_bundle,
) -> sceneclass_status {
    if out.is_null() {
        return SCENECLASS_NULL_ARGUMENT;
    }
    let preset = match utf8_arg(preset) {
        Ok(s) => s.to_string(),
        Err(status) => return status,
    };
    guarded(|| {
        let mut params = match preset.as_str() {
            "road" => RegimeParams::road(),
            "campus" => RegimeParams::campus(),
            other => {
                return Err(Error::Config(format!(
                    "unknown preset {other:?}; expected \"road\" or \"campus\""
                )))
            }
        };
        params.seed = seed;
        let bundle = synthgen::generate_batch(&params, scenes.max(1))?;
        unsafe { *out = Box::into_raw(Box::new(sceneclass_bundle(bundle))) };
        Ok(SCENECLASS_OK)
    })
}

/// Generate synthetic scenes from regime parameters given as JSON.
#[no_mangle]
pub unsafe extern "C" fn sceneclass_bundle_synth_json(
    params_json: *const c_char,
    scenes: usize,
    out: *mut *mut sceneclass_bundle,
) -> sceneclass_status {
    if out.is_null() {
        return SCENECLASS_NULL_ARGUMENT;
    }
    let json = match utf8_arg(params_json) {
        Ok(s) => s.to_string(),
        Err(status) => return status,
    };
    guarded(|| {
        let params = RegimeParams::from_json(&json)?;
        let bundle = synthgen::generate_batch(&params, scenes.max(1))?;
        unsafe { *out = Box::into_raw(Box::new(sceneclass_bundle(bundle))) };
        Ok(SCENECLASS_OK)
    })
}

/// Number of scenes in the bundle; 0 if `bundle` is null.
#[no_mangle]
pub unsafe extern "C" fn sceneclass_bundle_scene_count(bundle: *const sceneclass_bundle) -> usize {
    bundle.as_ref().map_or(0, |b| b.0.scenes.len())
}

/// Number of tracks in the bundle; 0 if `bundle` is null.
#[no_mangle]
pub unsafe extern "C" fn sceneclass_bundle_track_count(bundle: *const sceneclass_bundle) -> usize {
    bundle.as_ref().map_or(0, |b| b.0.tracks.len())
}

/// Write the bundle in the normalized CSV schema.
#[no_mangle]
pub unsafe extern "C" fn sceneclass_bundle_write_csv(
    bundle: *const sceneclass_bundle,
    path: *const c_char,
) -> sceneclass_status {
    let Some(bundle) = bundle.as_ref() else { return SCENECLASS_NULL_ARGUMENT };
    let path = match utf8_arg(path) {
        Ok(s) => PathBuf::from(s),
        Err(status) => return status,
    };
    guarded(|| {
        trajstore::write_normalized(&bundle.0, &path)?;
        Ok(SCENECLASS_OK)
    })
}

/// Destroy a bundle. Null is allowed.
#[no_mangle]
pub unsafe extern "C" fn sceneclass_bundle_free(bundle: *mut sceneclass_bundle) {
    if !bundle.is_null() {
        drop(Box::from_raw(bundle));
    }
}

// ---------------------------------------------------------------------------
// Feature matrices
// ---------------------------------------------------------------------------

/// Extract the per-pedestrian feature matrix from a bundle.
/// `thresholds_json` overrides analysis thresholds; pass null for defaults.
#[no_mangle]
pub unsafe extern "C" fn sceneclass_matrix_extract(
    bundle: *const sceneclass_bundle,
    thresholds_json: *const c_char,
    out: *mut *mut sceneclass_matrix,
) -> sceneclass_status {
    if out.is_null() {
        return SCENECLASS_NULL_ARGUMENT;
    }
    let Some(bundle) = bundle.as_ref() else { return SCENECLASS_NULL_ARGUMENT };
    let thresholds = if thresholds_json.is_null() {
        Ok(Thresholds::default())
    } else {
        match utf8_arg(thresholds_json) {
            Ok(json) => serde_json::from_str::<Thresholds>(json)
                .map_err(|e| Error::Config(format!("thresholds: {e}"))),
            Err(status) => return status,
        }
    };
    guarded(|| {
        let thresholds = thresholds?;
        thresholds.validate()?;
        let extraction = pipeline::extract_features(&bundle.0, &thresholds)?;
        unsafe { *out = Box::into_raw(Box::new(sceneclass_matrix(extraction.matrix))) };
        Ok(SCENECLASS_OK)
    })
}

/// Number of rows; 0 if `matrix` is null.
#[no_mangle]
pub unsafe extern "C" fn sceneclass_matrix_rows(matrix: *const sceneclass_matrix) -> usize {
    matrix.as_ref().map_or(0, |m| m.0.len())
}

/// Number of feature columns (constant).
#[no_mangle]
pub extern "C" fn sceneclass_matrix_feature_count() -> usize {
    FEATURE_COUNT
}

/// Write the matrix as CSV.
#[no_mangle]
pub unsafe extern "C" fn sceneclass_matrix_write_csv(
    matrix: *const sceneclass_matrix,
    path: *const c_char,
) -> sceneclass_status {
    let Some(matrix) = matrix.as_ref() else { return SCENECLASS_NULL_ARGUMENT };
    let path = match utf8_arg(path) {
        Ok(s) => PathBuf::from(s),
        Err(status) => return status,
    };
    guarded(|| {
        featmat::write_features_csv(&matrix.0, &path)?;
        Ok(SCENECLASS_OK)
    })
}

/// Read a matrix previously written by `sceneclass_matrix_write_csv`.
#[no_mangle]
pub unsafe extern "C" fn sceneclass_matrix_read_csv(
    path: *const c_char,
    out: *mut *mut sceneclass_matrix,
) -> sceneclass_status {
    if out.is_null() {
        return SCENECLASS_NULL_ARGUMENT;
    }
    let path = match utf8_arg(path) {
        Ok(s) => PathBuf::from(s),
        Err(status) => return status,
    };
    guarded(|| {
        let matrix = featmat::read_features_csv(&path)?;
        unsafe { *out = Box::into_raw(Box::new(sceneclass_matrix(matrix))) };
        Ok(SCENECLASS_OK)
    })
}

/// Destroy a matrix. Null is allowed.
#[no_mangle]
pub unsafe extern "C" fn sceneclass_matrix_free(matrix: *mut sceneclass_matrix) {
    if !matrix.is_null() {
        drop(Box::from_raw(matrix));
    }
}

// ---------------------------------------------------------------------------
// Models
// ---------------------------------------------------------------------------

/// Screen outliers, standardize, and fit the two-cluster model.
/// `per_dataset_iqr` selects per-dataset outlier fences instead of pooled.
#[no_mangle]
pub unsafe extern "C" fn sceneclass_model_fit(
    matrix: *const sceneclass_matrix,
    seed: u64,
    restarts: u32,
    per_dataset_iqr: bool,
    out: *mut *mut sceneclass_model,
) -> sceneclass_status {
    if out.is_null() {
        return SCENECLASS_NULL_ARGUMENT;
    }
    let Some(matrix) = matrix.as_ref() else { return SCENECLASS_NULL_ARGUMENT };
    guarded(|| {
        let scope = if per_dataset_iqr { IqrScope::PerDataset } else { IqrScope::Combined };
        let prepared = pipeline::prepare_matrix(&matrix.0, scope)?;
        let artifacts = pipeline::run_cluster(&prepared, seed, restarts)?;
        unsafe { *out = Box::into_raw(Box::new(sceneclass_model(artifacts.model))) };
        Ok(SCENECLASS_OK)
    })
}

/// Save a model as JSON.
#[no_mangle]
pub unsafe extern "C" fn sceneclass_model_save(
    model: *const sceneclass_model,
    path: *const c_char,
) -> sceneclass_status {
    let Some(model) = model.as_ref() else { return SCENECLASS_NULL_ARGUMENT };
    let path = match utf8_arg(path) {
        Ok(s) => PathBuf::from(s),
        Err(status) => return status,
    };
    guarded(|| {
        model.0.save(&path)?;
        Ok(SCENECLASS_OK)
    })
}

/// Load a model saved by `sceneclass_model_save`.
#[no_mangle]
pub unsafe extern "C" fn sceneclass_model_load(
    path: *const c_char,
    out: *mut *mut sceneclass_model,
) -> sceneclass_status {
    if out.is_null() {
        return SCENECLASS_NULL_ARGUMENT;
    }
    let path = match utf8_arg(path) {
        Ok(s) => PathBuf::from(s),
        Err(status) => return status,
    };
    guarded(|| {
        let model = ClusterModel::load(&path)?;
        unsafe { *out = Box::into_raw(Box::new(sceneclass_model(model))) };
        Ok(SCENECLASS_OK)
    })
}

/// Label a matrix with a fitted model. On success `*out_json` holds a JSON
/// report (per-row labels, per-dataset majorities, per-feature diagnostics);
/// free it with `sceneclass_string_free`.
#[no_mangle]
pub unsafe extern "C" fn sceneclass_model_classify_json(
    model: *const sceneclass_model,
    matrix: *const sceneclass_matrix,
    out_json: *mut *mut c_char,
) -> sceneclass_status {
    if out_json.is_null() {
        return SCENECLASS_NULL_ARGUMENT;
    }
    let (Some(model), Some(matrix)) = (model.as_ref(), matrix.as_ref()) else {
        return SCENECLASS_NULL_ARGUMENT;
    };
    guarded(|| {
        let artifacts = pipeline::run_classify(&model.0, &matrix.0)?;
        let json = serde_json::to_string_pretty(&artifacts)
            .map_err(|e| Error::Invalid(format!("serializing classification: {e}")))?;
        return_string(json, out_json)
    })
}

/// Destroy a model. Null is allowed.
#[no_mangle]
pub unsafe extern "C" fn sceneclass_model_free(model: *mut sceneclass_model) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

// ---------------------------------------------------------------------------
// Environment model (GLM)
// ---------------------------------------------------------------------------

/// Cluster the matrix, then fit the binomial model explaining the cluster
/// label from the pedestrian features. On success `*out_json` holds the
/// model-selection report; free it with `sceneclass_string_free`.
#[no_mangle]
pub unsafe extern "C" fn sceneclass_glm_json(
    matrix: *const sceneclass_matrix,
    seed: u64,
    restarts: u32,
    per_dataset_iqr: bool,
    out_json: *mut *mut c_char,
) -> sceneclass_status {
    if out_json.is_null() {
        return SCENECLASS_NULL_ARGUMENT;
    }
    let Some(matrix) = matrix.as_ref() else { return SCENECLASS_NULL_ARGUMENT };
    guarded(|| {
        let scope = if per_dataset_iqr { IqrScope::PerDataset } else { IqrScope::Combined };
        let prepared = pipeline::prepare_matrix(&matrix.0, scope)?;
        let artifacts = pipeline::run_cluster(&prepared, seed, restarts)?;
        let selection = pipeline::run_glm(&prepared, &artifacts.fit.row_labels())?;
        let json = serde_json::to_string_pretty(&selection)
            .map_err(|e| Error::Invalid(format!("serializing selection: {e}")))?;
        return_string(json, out_json)
    })
}
