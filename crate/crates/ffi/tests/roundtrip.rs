//! Exercises the C ABI from Rust: the full synth → extract → fit →
//! save/load → classify cycle, plus the status-code and last-error contract.

use std::ffi::{c_char, CStr, CString};
use std::ptr;

use sceneclass_ffi::sceneclass_status::*;
use sceneclass_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(sceneclass_last_error()) }.to_string_lossy().into_owned()
}

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn path_c(p: &std::path::Path) -> CString {
    CString::new(p.to_str().unwrap()).unwrap()
}

#[test]
fn full_cycle_through_the_c_abi() {
    unsafe {
        let mut bundle: *mut sceneclass_bundle = ptr::null_mut();
        let status = sceneclass_bundle_synth_preset(c("road").as_ptr(), 2, 5, &mut bundle);
        assert_eq!(status, SCENECLASS_OK, "{}", last_error());
        assert_eq!(sceneclass_bundle_scene_count(bundle), 2);
        assert!(sceneclass_bundle_track_count(bundle) > 10);

        let mut matrix: *mut sceneclass_matrix = ptr::null_mut();
        let status = sceneclass_matrix_extract(bundle, ptr::null(), &mut matrix);
        assert_eq!(status, SCENECLASS_OK, "{}", last_error());
        let rows = sceneclass_matrix_rows(matrix);
        assert!(rows > 10, "only {rows} feature rows");
        assert_eq!(sceneclass_matrix_feature_count(), 13);

        let dir = tempfile::tempdir().unwrap();

        // CSV round trip preserves the row count.
        let csv = path_c(&dir.path().join("features.csv"));
        assert_eq!(sceneclass_matrix_write_csv(matrix, csv.as_ptr()), SCENECLASS_OK);
        let mut reread: *mut sceneclass_matrix = ptr::null_mut();
        assert_eq!(sceneclass_matrix_read_csv(csv.as_ptr(), &mut reread), SCENECLASS_OK);
        assert_eq!(sceneclass_matrix_rows(reread), rows);

        let mut model: *mut sceneclass_model = ptr::null_mut();
        let status = sceneclass_model_fit(matrix, 7, 8, false, &mut model);
        assert_eq!(status, SCENECLASS_OK, "{}", last_error());

        let model_path = path_c(&dir.path().join("model.json"));
        assert_eq!(sceneclass_model_save(model, model_path.as_ptr()), SCENECLASS_OK);
        let mut loaded: *mut sceneclass_model = ptr::null_mut();
        assert_eq!(sceneclass_model_load(model_path.as_ptr(), &mut loaded), SCENECLASS_OK);

        // Classifying with the saved-and-reloaded model matches the original.
        let classify = |m: *const sceneclass_model| -> serde_json::Value {
            let mut json: *mut c_char = ptr::null_mut();
            let status = sceneclass_model_classify_json(m, reread, &mut json);
            assert_eq!(status, SCENECLASS_OK, "{}", last_error());
            let parsed = serde_json::from_str(CStr::from_ptr(json).to_str().unwrap()).unwrap();
            sceneclass_string_free(json);
            parsed
        };
        let original = classify(model);
        let roundtripped = classify(loaded);
        assert_eq!(original, roundtripped);
        assert_eq!(original["labels"].as_array().unwrap().len(), rows);
        assert_eq!(original["assignments"].as_array().unwrap().len(), 2);

        let mut glm_json: *mut c_char = ptr::null_mut();
        let status = sceneclass_glm_json(matrix, 7, 8, false, &mut glm_json);
        assert_eq!(status, SCENECLASS_OK, "{}", last_error());
        let selection: serde_json::Value =
            serde_json::from_str(CStr::from_ptr(glm_json).to_str().unwrap()).unwrap();
        assert!(selection["best"]["fit"]["aic"].is_number());
        sceneclass_string_free(glm_json);

        sceneclass_model_free(model);
        sceneclass_model_free(loaded);
        sceneclass_matrix_free(matrix);
        sceneclass_matrix_free(reread);
        sceneclass_bundle_free(bundle);
    }
}

#[test]
fn synth_from_json_params() {
    let params = r#"{
        "name": "tiny",
        "ped_speed_mean": 1.3,
        "stop_rate": 2.0,
        "stop_duration_s": 2.0,
        "heading_dispersion": 1.0,
        "allowed_directions": "free",
        "veh_speed_mean": 4.0,
        "yield_prob": 0.5,
        "ped_count": 12,
        "veh_count": 3,
        "standing_ped_count": 1,
        "area_m2": 900.0,
        "frame_rate_hz": 10.0,
        "duration_s": 30.0,
        "seed": 3
    }"#;
    unsafe {
        let mut bundle: *mut sceneclass_bundle = ptr::null_mut();
        let status = sceneclass_bundle_synth_json(c(params).as_ptr(), 1, &mut bundle);
        assert_eq!(status, SCENECLASS_OK, "{}", last_error());
        assert_eq!(sceneclass_bundle_scene_count(bundle), 1);
        assert_eq!(sceneclass_bundle_track_count(bundle), 16);
        sceneclass_bundle_free(bundle);

        let status = sceneclass_bundle_synth_json(c("{ not json").as_ptr(), 1, &mut bundle);
        assert_eq!(status, SCENECLASS_INPUT_ERROR);
        assert!(!last_error().is_empty());
    }
}

#[test]
fn null_arguments_are_rejected_not_dereferenced() {
    unsafe {
        let mut bundle: *mut sceneclass_bundle = ptr::null_mut();
        assert_eq!(
            sceneclass_bundle_synth_preset(ptr::null(), 1, 0, &mut bundle),
            SCENECLASS_NULL_ARGUMENT
        );
        assert_eq!(
            sceneclass_bundle_synth_preset(c("road").as_ptr(), 1, 0, ptr::null_mut()),
            SCENECLASS_NULL_ARGUMENT
        );

        let mut matrix: *mut sceneclass_matrix = ptr::null_mut();
        assert_eq!(
            sceneclass_matrix_extract(ptr::null(), ptr::null(), &mut matrix),
            SCENECLASS_NULL_ARGUMENT
        );
        assert_eq!(sceneclass_matrix_rows(ptr::null()), 0);
        assert_eq!(sceneclass_bundle_scene_count(ptr::null()), 0);

        let mut model: *mut sceneclass_model = ptr::null_mut();
        assert_eq!(
            sceneclass_model_fit(ptr::null(), 0, 1, false, &mut model),
            SCENECLASS_NULL_ARGUMENT
        );

        // Frees tolerate null.
        sceneclass_bundle_free(ptr::null_mut());
        sceneclass_matrix_free(ptr::null_mut());
        sceneclass_model_free(ptr::null_mut());
        sceneclass_string_free(ptr::null_mut());
    }
}

#[test]
fn failures_set_a_readable_last_error() {
    unsafe {
        let mut bundle: *mut sceneclass_bundle = ptr::null_mut();
        let missing = c("/nonexistent/trajectories.csv");
        let status =
            sceneclass_bundle_load_normalized(missing.as_ptr(), ptr::null(), 0, &mut bundle);
        assert_eq!(status, SCENECLASS_INPUT_ERROR);
        assert!(
            last_error().contains("/nonexistent/trajectories.csv"),
            "error does not name the path: {}",
            last_error()
        );

        let status = sceneclass_bundle_synth_preset(c("motorway").as_ptr(), 1, 0, &mut bundle);
        assert_eq!(status, SCENECLASS_INPUT_ERROR);
        assert!(last_error().contains("motorway"), "{}", last_error());

        let mut model: *mut sceneclass_model = ptr::null_mut();
        let status = sceneclass_model_load(c("/nonexistent/model.json").as_ptr(), &mut model);
        assert_eq!(status, SCENECLASS_INPUT_ERROR);
        assert!(!last_error().is_empty());
    }
}

#[test]
fn invalid_utf8_is_its_own_status() {
    let bad = [0x66u8, 0xff, 0x00]; // "f", invalid continuation, NUL
    unsafe {
        let mut bundle: *mut sceneclass_bundle = ptr::null_mut();
        let status =
            sceneclass_bundle_synth_preset(bad.as_ptr().cast::<c_char>(), 1, 0, &mut bundle);
        assert_eq!(status, SCENECLASS_INVALID_UTF8);
    }
}

#[test]
fn version_is_a_semver_string() {
    let version = unsafe { CStr::from_ptr(sceneclass_version()) }.to_str().unwrap();
    assert_eq!(version.split('.').count(), 3, "unexpected version {version:?}");
}

#[test]
fn generated_header_declares_the_full_surface() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/sceneclass.h"))
        .expect("include/sceneclass.h is generated by the build script");
    for symbol in [
        "sceneclass_status",
        "sceneclass_last_error",
        "sceneclass_version",
        "sceneclass_bundle_load_normalized",
        "sceneclass_bundle_synth_preset",
        "sceneclass_bundle_synth_json",
        "sceneclass_bundle_write_csv",
        "sceneclass_matrix_extract",
        "sceneclass_matrix_read_csv",
        "sceneclass_model_fit",
        "sceneclass_model_save",
        "sceneclass_model_load",
        "sceneclass_model_classify_json",
        "sceneclass_glm_json",
        "sceneclass_string_free",
    ] {
        assert!(header.contains(symbol), "header lacks {symbol}");
    }
}
