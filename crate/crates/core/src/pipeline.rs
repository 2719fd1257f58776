//! End-to-end assembly: trajectory bundles in, analysis artifacts out.
//!
//! This module strings the measurement stages together — per-pedestrian and
//! per-vehicle features, interactions, the 13-column matrix, clustering and
//! the environment model — and owns the report files the CLI writes. A
//! dataset that cannot supply every column (no moving vehicles, no crossing
//! events, ...) is excluded with a recorded reason rather than failing the
//! whole run; the run fails only when no dataset survives.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::cluster::{
    self, ClusterLabel, ClusterModel, ClusterSummary, DatasetAssignment, KMeansFit,
};
use crate::config::Thresholds;
use crate::error::{Error, Result};
use crate::featmat::{
    self, ColumnStats, FeatureMatrix, FeatureRow, IqrScope, OutlierReport, FEATURE_COUNT,
    FEATURE_NAMES, PED_FEATURE_COUNT,
};
use crate::glmfit::{self, Selection};
use crate::interact::{self, InteractionEvent};
use crate::kinematics::{self, Trajlet};
use crate::pedfeat::{self, SceneFrameIndex};
use crate::stats;
use crate::trajstore::{AgentKind, DatasetBundle};
use crate::vehfeat::{self, VehicleFeatures, VehicleStatus};

/// Candidate pairs with |r| at or above this are never fitted together.
pub const CORRELATION_THRESHOLD: f64 = 0.3;

/// Why a dataset contributed no feature rows.
#[derive(Debug, Clone, Serialize)]
pub struct ExcludedDataset {
    pub dataset_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExtractionReport {
    /// Feature rows produced (one per non-stationary pedestrian).
    pub rows: usize,
    /// Datasets that contributed rows.
    pub datasets: Vec<String>,
    pub excluded: Vec<ExcludedDataset>,
    /// Pedestrians dropped for standing more than the stationary threshold
    /// (they still count toward densities).
    pub stationary_pedestrians: usize,
    /// Vehicles dropped from the aggregates for never really moving.
    pub parked_vehicles: usize,
    pub interaction_events: usize,
}

#[derive(Debug)]
pub struct Extraction {
    pub matrix: FeatureMatrix,
    pub events: Vec<InteractionEvent>,
    pub report: ExtractionReport,
}

/// Build the full 13-column feature matrix for every dataset in the bundle.
pub fn extract_features(bundle: &DatasetBundle, thresholds: &Thresholds) -> Result<Extraction> {
    let events = interact::find_interactions(bundle, thresholds.interaction_distance_m)?;
    let mut rows: Vec<FeatureRow> = Vec::new();
    let mut datasets = Vec::new();
    let mut excluded = Vec::new();
    let mut stationary = 0usize;
    let mut parked = 0usize;
    for dataset_id in bundle.dataset_ids() {
        match dataset_rows(bundle, &dataset_id, thresholds, &events) {
            Ok(outcome) => {
                datasets.push(dataset_id);
                stationary += outcome.stationary;
                parked += outcome.parked;
                rows.extend(outcome.rows);
            }
            Err(e) => excluded.push(ExcludedDataset { dataset_id, reason: e.to_string() }),
        }
    }
    if rows.is_empty() {
        let reasons: Vec<String> =
            excluded.iter().map(|e| format!("{}: {}", e.dataset_id, e.reason)).collect();
        return Err(Error::Invalid(format!(
            "no dataset produced feature rows ({})",
            if reasons.is_empty() { "empty input".to_string() } else { reasons.join("; ") }
        )));
    }
    let matrix = FeatureMatrix::new(rows)?;
    let report = ExtractionReport {
        rows: matrix.len(),
        datasets,
        excluded,
        stationary_pedestrians: stationary,
        parked_vehicles: parked,
        interaction_events: events.len(),
    };
    Ok(Extraction { matrix, events, report })
}

struct DatasetRows {
    rows: Vec<FeatureRow>,
    stationary: usize,
    parked: usize,
}

/// One pedestrian's own columns before the dataset-level broadcast.
struct PedColumns {
    scene_id: String,
    agent_id: String,
    mean_speed: f64,
    stop_fraction: f64,
    variability: f64,
    path_efficiency: f64,
    avg_density: f64,
    avg_standing_density: f64,
}

fn dataset_rows(
    bundle: &DatasetBundle,
    dataset_id: &str,
    thresholds: &Thresholds,
    all_events: &[InteractionEvent],
) -> Result<DatasetRows> {
    let mut peds: Vec<PedColumns> = Vec::new();
    let mut trajlets: Vec<Trajlet<'_>> = Vec::new();
    let mut moving: Vec<VehicleFeatures> = Vec::new();
    let mut stationary = 0usize;
    let mut parked = 0usize;

    for meta in bundle.scenes.iter().filter(|s| s.dataset_id == dataset_id) {
        let scene_tracks: Vec<&crate::trajstore::Track> =
            bundle.tracks.iter().filter(|t| t.scene_id == meta.scene_id).collect();
        let index = SceneFrameIndex::build(&scene_tracks, meta, thresholds.ped_stop_speed_ms);
        for track in &scene_tracks {
            match track.kind {
                AgentKind::Pedestrian => {
                    let series = kinematics::speed_series(track)?;
                    if pedfeat::is_stationary(&series, thresholds)? {
                        stationary += 1;
                        continue;
                    }
                    let (avg_density, avg_standing_density) =
                        pedfeat::density_features(track, &index)?;
                    peds.push(PedColumns {
                        scene_id: track.scene_id.clone(),
                        agent_id: track.agent_id.clone(),
                        mean_speed: pedfeat::mean_speed(&series)?,
                        stop_fraction: pedfeat::stop_fraction(
                            &series,
                            thresholds.ped_stop_speed_ms,
                        )?,
                        variability: pedfeat::variability(&series)?,
                        path_efficiency: pedfeat::path_efficiency(
                            track,
                            thresholds.trajlet_window_s,
                        )?,
                        avg_density,
                        avg_standing_density,
                    });
                    trajlets
                        .extend(kinematics::split_trajlets(&track.points, thresholds.trajlet_window_s)?);
                }
                AgentKind::Vehicle => match vehfeat::vehicle_features(track, thresholds)? {
                    VehicleStatus::Parked => parked += 1,
                    VehicleStatus::Moving(f) => moving.push(f),
                },
                AgentKind::Other => {}
            }
        }
    }

    if peds.is_empty() {
        return Err(Error::Invalid("no non-stationary pedestrian tracks".into()));
    }
    let orientation_entropy = pedfeat::orientation_entropy(&trajlets)?;
    let (veh_mean_speed, veh_stop_fraction, veh_variability) =
        vehfeat::dataset_vehicle_means(&moving)?;
    let events: Vec<InteractionEvent> =
        all_events.iter().filter(|e| e.dataset_id == dataset_id).cloned().collect();
    let approach_entropy = interact::approach_entropy(&events)?;
    let priority_ratio = interact::priority_ratio(&events).ok_or_else(|| {
        Error::Invalid("no crossing events: crossing priority undefined".into())
    })?;
    let v2p_ratio = interact::v2p_ratio(bundle, dataset_id)?;

    let rows = peds
        .into_iter()
        .map(|p| FeatureRow {
            dataset_id: dataset_id.to_string(),
            scene_id: p.scene_id,
            agent_id: p.agent_id,
            values: [
                p.mean_speed,
                p.stop_fraction,
                p.variability,
                p.path_efficiency,
                orientation_entropy,
                p.avg_density,
                p.avg_standing_density,
                veh_mean_speed,
                veh_stop_fraction,
                veh_variability,
                approach_entropy,
                priority_ratio,
                v2p_ratio,
            ],
        })
        .collect();
    Ok(DatasetRows { rows, stationary, parked })
}

/// Outlier screening plus standardization: everything clustering needs.
pub struct PreparedMatrix {
    /// Rows that survived the fence check, in original units.
    pub matrix: FeatureMatrix,
    pub outliers: OutlierReport,
    pub standardized: Vec<[f64; FEATURE_COUNT]>,
    pub stats: Vec<ColumnStats>,
}

pub fn prepare_matrix(raw: &FeatureMatrix, scope: IqrScope) -> Result<PreparedMatrix> {
    let (matrix, outliers) = featmat::remove_outliers(raw, scope)?;
    let (standardized, stats) = featmat::standardize(&matrix)?;
    Ok(PreparedMatrix { matrix, outliers, standardized, stats })
}

pub struct ClusterArtifacts {
    pub fit: KMeansFit,
    pub model: ClusterModel,
    pub assignments: Vec<DatasetAssignment>,
    pub summaries: Vec<ClusterSummary>,
}

pub fn run_cluster(prepared: &PreparedMatrix, seed: u64, restarts: u32) -> Result<ClusterArtifacts> {
    let fit = cluster::kmeans_fit(&prepared.standardized, seed, restarts)?;
    let labels = fit.row_labels();
    let assignments = cluster::majority_labels(&prepared.matrix, &labels);
    let summaries = cluster::cluster_summaries(&prepared.matrix, &fit);
    let model = ClusterModel::from_fit(&fit, &prepared.stats, seed);
    Ok(ClusterArtifacts { fit, model, assignments, summaries })
}

/// Response encoding for the environment model: cluster A (the
/// higher-stop-fraction, unstructured side) codes as 1, cluster B as 0.
pub fn glm_response(labels: &[ClusterLabel]) -> Vec<f64> {
    labels.iter().map(|&l| if l == ClusterLabel::A { 1.0 } else { 0.0 }).collect()
}

/// Fit the cluster label from the pedestrian columns: screen correlated
/// pairs, enumerate the rest, keep the lowest-AIC fit.
pub fn run_glm(prepared: &PreparedMatrix, labels: &[ClusterLabel]) -> Result<Selection> {
    let columns: Vec<Vec<f64>> =
        (0..PED_FEATURE_COUNT).map(|j| prepared.matrix.column(j)).collect();
    let names: Vec<&str> = FEATURE_NAMES[..PED_FEATURE_COUNT].to_vec();
    let y = glm_response(labels);
    glmfit::select_model(&columns, &names, &y, CORRELATION_THRESHOLD)
}

/// How one feature of the data being classified sits relative to the two
/// cluster centers (centers reported in original units).
#[derive(Debug, Clone, Serialize)]
pub struct FeatureDiagnostic {
    pub feature: &'static str,
    pub input_mean: f64,
    pub center_a: f64,
    pub center_b: f64,
    pub closer_to: ClusterLabel,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassifyArtifacts {
    pub labels: Vec<ClusterLabel>,
    pub assignments: Vec<DatasetAssignment>,
    pub diagnostics: Vec<FeatureDiagnostic>,
}

pub fn run_classify(model: &ClusterModel, matrix: &FeatureMatrix) -> Result<ClassifyArtifacts> {
    if matrix.is_empty() {
        return Err(Error::Invalid("nothing to classify: the feature matrix is empty".into()));
    }
    model.validate()?;
    let (labels, assignments) = model.classify_matrix(matrix);
    let a = model.a_index;
    let b = 1 - a;
    let diagnostics = (0..FEATURE_COUNT)
        .map(|j| {
            let col = matrix.column(j);
            let input_mean = stats::mean(&col);
            // Centroids live in standardized space; undo that for reporting.
            let ColumnStats { mean, sd, .. } = model.column_stats[j];
            let center_a = mean + sd * model.centroids[a][j];
            let center_b = mean + sd * model.centroids[b][j];
            let closer_to = if (input_mean - center_a).abs() <= (input_mean - center_b).abs() {
                ClusterLabel::A
            } else {
                ClusterLabel::B
            };
            FeatureDiagnostic { feature: FEATURE_NAMES[j], input_mean, center_a, center_b, closer_to }
        })
        .collect();
    Ok(ClassifyArtifacts { labels, assignments, diagnostics })
}

// ---------------------------------------------------------------------------
// Report files
// ---------------------------------------------------------------------------

/// Serialize as pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Invalid(format!("serializing {}: {e}", path.display())))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Per-dataset assignment table: `dataset_id,rows,a_share,label`.
pub fn write_assignments_csv(assignments: &[DatasetAssignment], path: &Path) -> Result<()> {
    let mut out = String::from("dataset_id,rows,a_share,label\n");
    for a in assignments {
        out.push_str(&format!("{},{},{},{}\n", a.dataset_id, a.rows, a.a_share, a.label.as_str()));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Tidy per-cluster feature summary: `feature,cluster,mean,ci_low,ci_high`.
/// Clusters with fewer than two members leave the interval columns empty.
pub fn write_summary_csv(summaries: &[ClusterSummary], path: &Path) -> Result<()> {
    let mut out = String::from("feature,cluster,mean,ci_low,ci_high\n");
    for summary in summaries {
        for f in &summary.features {
            match f.ci95 {
                Some(h) => out.push_str(&format!(
                    "{},{},{},{},{}\n",
                    f.feature,
                    summary.label,
                    f.mean,
                    f.mean - h,
                    f.mean + h
                )),
                None => out.push_str(&format!("{},{},{},,\n", f.feature, summary.label, f.mean)),
            }
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Coefficient table in the usual regression-summary shape.
pub fn format_glm_table(selection: &Selection) -> String {
    let fit = &selection.best.fit;
    let mut names: Vec<String> = vec!["(Intercept)".to_string()];
    names.extend(selection.best.feature_names.iter().cloned());
    let width = names.iter().map(|n| n.len()).max().unwrap_or(0).max(12);

    let mut out = String::new();
    out.push_str("Binomial GLM (logit link), response: cluster label\n");
    out.push_str("Encoding: cluster A (unstructured) = 1, cluster B (structured) = 0.\n");
    out.push_str("Flipping the encoding (structured = 1) negates every coefficient.\n\n");
    out.push_str(&format!(
        "{:<width$}  {:>12}  {:>12}  {:>8}  {:>10}\n",
        "", "Estimate", "Std. Error", "z value", "Pr(>|z|)",
    ));
    for (i, name) in names.iter().enumerate() {
        out.push_str(&format!(
            "{:<width$}  {:>12.5}  {:>12.5}  {:>8.3}  {:>10}\n",
            name,
            fit.coefficients[i],
            fit.std_errors[i],
            fit.z_values[i],
            format_p(fit.p_values[i]),
        ));
    }
    out.push_str(&format!(
        "\nLog-likelihood: {:.5} on {} parameters\nAIC: {:.5}\nConverged in {} iterations.\n",
        fit.log_likelihood,
        fit.coefficients.len(),
        fit.aic,
        fit.iterations,
    ));
    out
}

fn format_p(p: f64) -> String {
    if p < 1e-4 {
        format!("{p:.3e}")
    } else {
        format!("{p:.4}")
    }
}

/// Human-readable classification summary with per-feature diagnostics.
pub fn format_classification(artifacts: &ClassifyArtifacts) -> String {
    let mut out = String::new();
    for a in &artifacts.assignments {
        out.push_str(&format!(
            "dataset {}: {} ({} rows, {:.1}% in cluster A)\n",
            a.dataset_id,
            match a.label {
                cluster::DatasetLabel::A => "cluster A (unstructured)",
                cluster::DatasetLabel::B => "cluster B (structured)",
                cluster::DatasetLabel::Unresolved => "unresolved (exact tie)",
            },
            a.rows,
            100.0 * a.a_share,
        ));
    }
    out.push_str("\nFeature means against the cluster centers (original units):\n");
    let width = FEATURE_NAMES.iter().map(|n| n.len()).max().unwrap_or(0);
    out.push_str(&format!(
        "{:<width$}  {:>12}  {:>12}  {:>12}  closer to\n",
        "feature", "input mean", "center A", "center B",
    ));
    for d in &artifacts.diagnostics {
        out.push_str(&format!(
            "{:<width$}  {:>12.5}  {:>12.5}  {:>12.5}  {}\n",
            d.feature,
            d.input_mean,
            d.center_a,
            d.center_b,
            d.closer_to,
        ));
    }
    out
}

// ---------------------------------------------------------------------------
// Run manifest
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub seed: u64,
    /// SHA-256 of the compact serialization of `config`.
    pub config_sha256: String,
    /// The fully resolved configuration the run used (flag overrides
    /// applied), sufficient to reproduce the outputs byte for byte.
    pub config: serde_json::Value,
}

/// Write `manifest.json` into `out_dir` and return its path. `config` is
/// whatever fully determines the run: the resolved [`crate::config::RunConfig`]
/// for the analysis commands, the regime parameters for generation.
pub fn write_manifest<C: Serialize>(
    out_dir: &Path,
    command: &str,
    seed: u64,
    config: &C,
) -> Result<PathBuf> {
    let config = serde_json::to_value(config)
        .map_err(|e| Error::Invalid(format!("serializing run config: {e}")))?;
    let compact = serde_json::to_string(&config)
        .map_err(|e| Error::Invalid(format!("serializing run config: {e}")))?;
    let digest = Sha256::digest(compact.as_bytes());
    let mut config_sha256 = String::with_capacity(64);
    for byte in digest {
        config_sha256.push_str(&format!("{byte:02x}"));
    }
    let manifest = Manifest {
        tool: "sceneclass",
        version: env!("CARGO_PKG_VERSION"),
        command: command.to_string(),
        seed,
        config_sha256,
        config,
    };
    let path = out_dir.join("manifest.json");
    write_json(&manifest, &path)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::RunConfig;
    use crate::synthgen::{self, Headings, RegimeParams};

    fn mixed_params(name: &str, veh_count: usize) -> RegimeParams {
        RegimeParams {
            name: name.into(),
            ped_speed_mean: 1.4,
            stop_rate: 1.0,
            stop_duration_s: 1.5,
            heading_dispersion: 2.0,
            allowed_directions: Headings::Set(vec![0.0, 90.0, 180.0, 270.0]),
            veh_speed_mean: 7.0,
            yield_prob: 0.3,
            ped_count: 12,
            veh_count,
            standing_ped_count: 1,
            area_m2: 1600.0,
            frame_rate_hz: 10.0,
            duration_s: 40.0,
            seed: 11,
        }
    }

    fn small_bundle() -> DatasetBundle {
        synthgen::generate(&mixed_params("mix", 4)).unwrap()
    }

    #[test]
    fn extraction_produces_thirteen_finite_columns() {
        let bundle = small_bundle();
        let extraction = extract_features(&bundle, &Thresholds::default()).unwrap();
        assert!(extraction.report.excluded.is_empty(), "{:?}", extraction.report.excluded);
        assert!(extraction.matrix.len() >= 8);
        assert_eq!(extraction.report.rows, extraction.matrix.len());
        for row in extraction.matrix.rows() {
            assert!(row.values.iter().all(|v| v.is_finite()));
        }
        // Broadcast columns are constant within the dataset.
        let v2p = extraction.matrix.column(12);
        assert!(v2p.iter().all(|&v| v == v2p[0]));
    }

    #[test]
    fn dataset_without_vehicles_is_excluded_not_fatal() {
        let with = synthgen::generate(&mixed_params("has-veh", 4)).unwrap();
        let without = synthgen::generate(&mixed_params("no-veh", 0)).unwrap();
        let bundle = DatasetBundle::merge(vec![with, without]).unwrap();
        let extraction = extract_features(&bundle, &Thresholds::default()).unwrap();
        assert_eq!(extraction.report.datasets, vec!["has-veh"]);
        assert_eq!(extraction.report.excluded.len(), 1);
        let ex = &extraction.report.excluded[0];
        assert_eq!(ex.dataset_id, "no-veh");
        assert!(ex.reason.contains("vehicle"), "reason: {}", ex.reason);
        assert!(extraction.matrix.rows().iter().all(|r| r.dataset_id == "has-veh"));
    }

    #[test]
    fn all_datasets_excluded_is_an_error() {
        let bundle = synthgen::generate(&mixed_params("no-veh", 0)).unwrap();
        let err = extract_features(&bundle, &Thresholds::default()).unwrap_err();
        assert!(err.to_string().contains("no-veh"));
    }

    #[test]
    fn standing_pedestrians_are_counted_not_rowed() {
        let bundle = small_bundle();
        let extraction = extract_features(&bundle, &Thresholds::default()).unwrap();
        assert!(extraction.report.stationary_pedestrians >= 1);
        assert!(extraction.matrix.rows().iter().all(|r| !r.agent_id.starts_with('s')));
        // The standing density column still sees them.
        let standing = extraction.matrix.column(6);
        assert!(standing.iter().any(|&v| v > 0.0));
    }

    #[test]
    fn cluster_artifacts_round_trip_through_the_model_file() {
        let bundle = small_bundle();
        let extraction = extract_features(&bundle, &Thresholds::default()).unwrap();
        let prepared = prepare_matrix(&extraction.matrix, IqrScope::Combined).unwrap();
        let artifacts = run_cluster(&prepared, 5, 8).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        artifacts.model.save(&path).unwrap();
        let loaded = ClusterModel::load(&path).unwrap();
        let (labels, _) = loaded.classify_matrix(&prepared.matrix);
        assert_eq!(labels, artifacts.fit.row_labels());
    }

    #[test]
    fn glm_response_codes_cluster_a_as_one() {
        let labels = [ClusterLabel::A, ClusterLabel::B, ClusterLabel::A];
        assert_eq!(glm_response(&labels), vec![1.0, 0.0, 1.0]);
    }

    #[test]
    fn summary_csv_is_tidy_and_complete() {
        let bundle = small_bundle();
        let extraction = extract_features(&bundle, &Thresholds::default()).unwrap();
        let prepared = prepare_matrix(&extraction.matrix, IqrScope::Combined).unwrap();
        let artifacts = run_cluster(&prepared, 5, 8).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("summary.csv");
        write_summary_csv(&artifacts.summaries, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "feature,cluster,mean,ci_low,ci_high");
        assert_eq!(lines.len(), 1 + 2 * FEATURE_COUNT);
        assert!(lines[1].starts_with("mean_speed,A,"));
    }

    #[test]
    fn manifest_is_deterministic_and_hashes_the_config() {
        let dir = tempfile::tempdir().unwrap();
        let config = RunConfig { seed: 42, ..RunConfig::default() };
        let path = write_manifest(dir.path(), "cluster", config.seed, &config).unwrap();
        let first = std::fs::read(&path).unwrap();
        write_manifest(dir.path(), "cluster", config.seed, &config).unwrap();
        let second = std::fs::read(&path).unwrap();
        assert_eq!(first, second);
        let text = String::from_utf8(first).unwrap();
        assert!(text.contains("\"config_sha256\""));
        assert!(text.contains("\"seed\": 42"));
        // Different config, different hash.
        let other = RunConfig { seed: 43, ..RunConfig::default() };
        write_manifest(dir.path(), "cluster", other.seed, &other).unwrap();
        let third = std::fs::read_to_string(&path).unwrap();
        assert_ne!(text, third);
    }

    #[test]
    fn classification_report_names_every_feature() {
        let bundle = small_bundle();
        let extraction = extract_features(&bundle, &Thresholds::default()).unwrap();
        let prepared = prepare_matrix(&extraction.matrix, IqrScope::Combined).unwrap();
        let artifacts = run_cluster(&prepared, 5, 8).unwrap();
        let classify = run_classify(&artifacts.model, &prepared.matrix).unwrap();
        assert_eq!(classify.diagnostics.len(), FEATURE_COUNT);
        let text = format_classification(&classify);
        for name in FEATURE_NAMES {
            assert!(text.contains(name), "missing {name}");
        }
        assert!(text.contains("dataset mix"));
    }
}
