//! The per-pedestrian feature matrix: assembly, outlier screening,
//! standardization, and the CSV format the CLI round-trips.
//!
//! Each row describes one pedestrian. The first [`PED_FEATURE_COUNT`]
//! columns are that pedestrian's own statistics (dataset-level orientation
//! entropy and densities broadcast onto every row of the dataset); the rest
//! are dataset-level vehicle and interaction features, likewise broadcast.

use std::fs::File;
use std::io::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::stats;

/// Total feature columns.
pub const FEATURE_COUNT: usize = 13;
/// The leading columns describing pedestrian behavior; these are the
/// candidate regressors for the environment model.
pub const PED_FEATURE_COUNT: usize = 7;

pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "mean_speed",
    "stop_fraction",
    "variability",
    "path_efficiency",
    "orientation_entropy",
    "avg_density",
    "avg_standing_density",
    "veh_mean_speed",
    "veh_stop_fraction",
    "veh_variability",
    "approach_entropy",
    "priority_ratio",
    "v2p_ratio",
];

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub dataset_id: String,
    pub scene_id: String,
    pub agent_id: String,
    pub values: [f64; FEATURE_COUNT],
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    rows: Vec<FeatureRow>,
}

impl FeatureMatrix {
    /// Wrap rows, rejecting non-finite values.
    pub fn new(rows: Vec<FeatureRow>) -> Result<Self> {
        for row in &rows {
            for (j, v) in row.values.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::Invalid(format!(
                        "agent {} in scene {}: feature {} is not finite",
                        row.agent_id, row.scene_id, FEATURE_NAMES[j]
                    )));
                }
            }
        }
        Ok(Self { rows })
    }

    pub fn rows(&self) -> &[FeatureRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r.values[j]).collect()
    }

    /// Distinct dataset ids in row order of first appearance.
    pub fn dataset_ids(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for row in &self.rows {
            if !out.contains(&row.dataset_id) {
                out.push(row.dataset_id.clone());
            }
        }
        out
    }
}

/// How outlier fences are computed: over all rows pooled, or within each
/// dataset separately.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IqrScope {
    Combined,
    PerDataset,
}

/// Fences for one group (the pooled set or one dataset).
#[derive(Debug, Clone, Serialize)]
pub struct GroupFences {
    pub group: String,
    /// Per feature: [lower, upper] of the 1.5 IQR interval.
    pub bounds: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DroppedRow {
    pub dataset_id: String,
    pub scene_id: String,
    pub agent_id: String,
    /// First feature (in column order) that fell outside its fence.
    pub feature: &'static str,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct OutlierReport {
    pub scope: &'static str,
    pub kept: usize,
    pub fences: Vec<GroupFences>,
    pub dropped: Vec<DroppedRow>,
}

/// Drop rows with any feature outside its 1.5 IQR fence. Quantiles use
/// linear interpolation between order statistics; fences come from the input
/// rows only — the pass is not repeated on the survivors. A zero-width IQR
/// keeps exactly the rows at the shared value. Needs at least 4 rows for
/// the quartiles to mean anything.
pub fn remove_outliers(
    matrix: &FeatureMatrix,
    scope: IqrScope,
) -> Result<(FeatureMatrix, OutlierReport)> {
    if matrix.len() < 4 {
        return Err(Error::Invalid(format!(
            "outlier screening needs at least 4 rows, got {}",
            matrix.len()
        )));
    }
    let groups: Vec<(String, Vec<usize>)> = match scope {
        IqrScope::Combined => {
            vec![("combined".to_string(), (0..matrix.len()).collect())]
        }
        IqrScope::PerDataset => matrix
            .dataset_ids()
            .into_iter()
            .map(|id| {
                let idx = matrix
                    .rows
                    .iter()
                    .enumerate()
                    .filter(|(_, r)| r.dataset_id == id)
                    .map(|(i, _)| i)
                    .collect();
                (id, idx)
            })
            .collect(),
    };

    let mut keep = vec![true; matrix.len()];
    let mut fences = Vec::new();
    let mut dropped = Vec::new();
    for (group, indices) in groups {
        if indices.is_empty() {
            continue;
        }
        let mut bounds = Vec::with_capacity(FEATURE_COUNT);
        for j in 0..FEATURE_COUNT {
            let mut col: Vec<f64> = indices.iter().map(|&i| matrix.rows[i].values[j]).collect();
            col.sort_by(|a, b| a.total_cmp(b));
            let q1 = stats::quantile_sorted(&col, 0.25);
            let q3 = stats::quantile_sorted(&col, 0.75);
            let iqr = q3 - q1;
            bounds.push([q1 - 1.5 * iqr, q3 + 1.5 * iqr]);
        }
        for &i in &indices {
            let row = &matrix.rows[i];
            if let Some(j) = (0..FEATURE_COUNT)
                .find(|&j| row.values[j] < bounds[j][0] || row.values[j] > bounds[j][1])
            {
                keep[i] = false;
                dropped.push(DroppedRow {
                    dataset_id: row.dataset_id.clone(),
                    scene_id: row.scene_id.clone(),
                    agent_id: row.agent_id.clone(),
                    feature: FEATURE_NAMES[j],
                    value: row.values[j],
                });
            }
        }
        fences.push(GroupFences { group, bounds });
    }

    let rows: Vec<FeatureRow> = matrix
        .rows
        .iter()
        .zip(&keep)
        .filter(|(_, &k)| k)
        .map(|(r, _)| r.clone())
        .collect();
    if rows.is_empty() {
        return Err(Error::Invalid(
            "outlier screening removed every row".into(),
        ));
    }
    let report = OutlierReport {
        scope: match scope {
            IqrScope::Combined => "combined",
            IqrScope::PerDataset => "per_dataset",
        },
        kept: rows.len(),
        fences,
        dropped,
    };
    Ok((FeatureMatrix { rows }, report))
}

/// Per-column location and spread recorded at fit time: the mean and sample
/// standard deviation drive standardization; the quartiles are kept for
/// audit alongside them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct ColumnStats {
    pub mean: f64,
    pub sd: f64,
    pub q1: f64,
    pub q3: f64,
}

/// Mean, sample sd, and quartiles of every column.
pub fn column_stats(matrix: &FeatureMatrix) -> Result<Vec<ColumnStats>> {
    if matrix.is_empty() {
        return Err(Error::Invalid("cannot summarize an empty matrix".into()));
    }
    Ok((0..FEATURE_COUNT)
        .map(|j| {
            let col = matrix.column(j);
            let mut sorted = col.clone();
            sorted.sort_by(|a, b| a.total_cmp(b));
            ColumnStats {
                mean: stats::mean(&col),
                sd: stats::sample_sd(&col),
                q1: stats::quantile_sorted(&sorted, 0.25),
                q3: stats::quantile_sorted(&sorted, 0.75),
            }
        })
        .collect())
}

/// Z-score every column with its mean and sample standard deviation
/// (a zero-variance column maps to all zeros). Returns the standardized
/// rows and the stats needed to transform new observations the same way.
pub fn standardize(
    matrix: &FeatureMatrix,
) -> Result<(Vec<[f64; FEATURE_COUNT]>, Vec<ColumnStats>)> {
    let stats_per_col = column_stats(matrix)?;
    let rows = matrix
        .rows
        .iter()
        .map(|r| apply_standardization(&r.values, &stats_per_col))
        .collect();
    Ok((rows, stats_per_col))
}

/// Apply stored column stats to one raw feature vector.
pub fn apply_standardization(
    values: &[f64; FEATURE_COUNT],
    stats: &[ColumnStats],
) -> [f64; FEATURE_COUNT] {
    let mut out = [0.0; FEATURE_COUNT];
    for (j, v) in values.iter().enumerate() {
        let ColumnStats { mean, sd, .. } = stats[j];
        out[j] = if sd > 0.0 { (v - mean) / sd } else { 0.0 };
    }
    out
}

/// Subtract each column's mean; returns the centered columns and the means.
pub fn center_columns(cols: &[Vec<f64>]) -> (Vec<Vec<f64>>, Vec<f64>) {
    let means: Vec<f64> = cols.iter().map(|c| stats::mean(c)).collect();
    let centered = cols
        .iter()
        .zip(&means)
        .map(|(c, m)| c.iter().map(|v| v - m).collect())
        .collect();
    (centered, means)
}

/// Write rows as CSV: `dataset_id,scene_id,agent_id` then the 13 features.
pub fn write_features_csv(matrix: &FeatureMatrix, path: &Path) -> Result<()> {
    let mut file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut header = vec!["dataset_id", "scene_id", "agent_id"];
    header.extend(FEATURE_NAMES);
    writeln!(file, "{}", header.join(",")).map_err(|e| Error::io(path, e))?;
    for row in &matrix.rows {
        let mut fields = vec![row.dataset_id.clone(), row.scene_id.clone(), row.agent_id.clone()];
        fields.extend(row.values.iter().map(|v| v.to_string()));
        writeln!(file, "{}", fields.join(",")).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

/// Read a features CSV produced by [`write_features_csv`].
pub fn read_features_csv(path: &Path) -> Result<FeatureMatrix> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let mut expected = vec!["dataset_id", "scene_id", "agent_id"];
    expected.extend(FEATURE_NAMES);
    let header = reader.headers().map_err(|e| Error::parse(path, 1, e.to_string()))?;
    let got: Vec<&str> = header.iter().collect();
    if got != expected {
        return Err(Error::parse(
            path,
            1,
            format!("expected header {:?}, got {:?}", expected.join(","), got.join(",")),
        ));
    }
    let mut rows = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let line = idx as u64 + 2;
        let record = record.map_err(|e| Error::parse(path, line, e.to_string()))?;
        if record.len() != expected.len() {
            return Err(Error::parse(
                path,
                line,
                format!("expected {} fields, got {}", expected.len(), record.len()),
            ));
        }
        let mut values = [0.0; FEATURE_COUNT];
        for (j, v) in values.iter_mut().enumerate() {
            let raw = &record[3 + j];
            *v = raw.parse().map_err(|_| {
                Error::parse(path, line, format!("bad number {:?} for {}", raw, FEATURE_NAMES[j]))
            })?;
        }
        rows.push(FeatureRow {
            dataset_id: record[0].to_string(),
            scene_id: record[1].to_string(),
            agent_id: record[2].to_string(),
            values,
        });
    }
    FeatureMatrix::new(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(dataset: &str, agent: &str, first: f64) -> FeatureRow {
        let mut values = [0.5; FEATURE_COUNT];
        values[0] = first;
        FeatureRow {
            dataset_id: dataset.into(),
            scene_id: format!("{dataset}-s"),
            agent_id: agent.into(),
            values,
        }
    }

    #[test]
    fn fences_match_hand_computed_quantiles() {
        // 1..9 plus 100: Q1 = 3.25, Q3 = 7.75, fences [-3.5, 14.5].
        let mut rows: Vec<FeatureRow> =
            (1..=9).map(|i| row("d", &format!("a{i}"), i as f64)).collect();
        rows.push(row("d", "big", 100.0));
        let m = FeatureMatrix::new(rows).unwrap();
        let (kept, report) = remove_outliers(&m, IqrScope::Combined).unwrap();
        assert_eq!(kept.len(), 9);
        assert_eq!(report.dropped.len(), 1);
        assert_eq!(report.dropped[0].agent_id, "big");
        assert_eq!(report.dropped[0].feature, "mean_speed");
        let b = report.fences[0].bounds[0];
        assert!((b[0] - -3.5).abs() < 1e-12 && (b[1] - 14.5).abs() < 1e-12);
    }

    #[test]
    fn screening_runs_once_not_to_fixpoint() {
        // With 100 present the upper fence is 16.0, so 16 survives; fences
        // recomputed on the survivors would evict it, which must not happen.
        let mut rows: Vec<FeatureRow> =
            (1..=9).map(|i| row("d", &format!("a{i}"), i as f64)).collect();
        rows.push(row("d", "edge", 16.0));
        rows.push(row("d", "big", 100.0));
        let m = FeatureMatrix::new(rows).unwrap();
        let (kept, report) = remove_outliers(&m, IqrScope::Combined).unwrap();
        assert_eq!(kept.len(), 10);
        assert!(kept.rows().iter().any(|r| r.agent_id == "edge"));
        assert_eq!(report.dropped.len(), 1);
    }

    #[test]
    fn constant_column_keeps_all_rows() {
        let rows: Vec<FeatureRow> = (0..5).map(|i| row("d", &format!("a{i}"), 2.0)).collect();
        let m = FeatureMatrix::new(rows).unwrap();
        let (kept, _) = remove_outliers(&m, IqrScope::Combined).unwrap();
        assert_eq!(kept.len(), 5);
    }

    #[test]
    fn per_dataset_scope_fences_each_dataset_alone() {
        let mut rows: Vec<FeatureRow> =
            (1..=9).map(|i| row("a", &format!("a{i}"), i as f64)).collect();
        rows.push(row("a", "big", 100.0));
        rows.extend((0..6).map(|i| row("b", &format!("b{i}"), 500.0)));
        let m = FeatureMatrix::new(rows).unwrap();
        let (kept, report) = remove_outliers(&m, IqrScope::PerDataset).unwrap();
        assert_eq!(kept.len(), 15);
        assert_eq!(report.dropped.len(), 1);
        assert_eq!(report.dropped[0].dataset_id, "a");
        let groups: Vec<&str> = report.fences.iter().map(|f| f.group.as_str()).collect();
        assert_eq!(groups, ["a", "b"]);
    }

    #[test]
    fn standardize_uses_sample_sd_and_zeroes_flat_columns() {
        let m = FeatureMatrix::new(vec![row("d", "a", 1.0), row("d", "b", 3.0)]).unwrap();
        let (z, stats) = standardize(&m).unwrap();
        let inv_sqrt2 = 1.0 / 2.0_f64.sqrt();
        assert!((z[0][0] + inv_sqrt2).abs() < 1e-12);
        assert!((z[1][0] - inv_sqrt2).abs() < 1e-12);
        assert_eq!(z[0][1], 0.0); // constant column
        assert!((stats[0].mean - 2.0).abs() < 1e-12);
        assert!((stats[0].sd - 2.0_f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn too_few_rows_for_outlier_screening_is_an_error() {
        let m = FeatureMatrix::new(vec![row("d", "a", 1.0), row("d", "b", 2.0)]).unwrap();
        assert!(remove_outliers(&m, IqrScope::Combined).is_err());
    }

    #[test]
    fn standardized_columns_have_zero_mean_unit_sd() {
        let m = FeatureMatrix::new(
            (0..7).map(|i| row("d", &format!("a{i}"), (i * i) as f64 * 0.3)).collect(),
        )
        .unwrap();
        let (z, _) = standardize(&m).unwrap();
        let col: Vec<f64> = z.iter().map(|r| r[0]).collect();
        assert!(crate::stats::mean(&col).abs() < 1e-9);
        assert!((crate::stats::sample_sd(&col) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn standardization_is_idempotent() {
        let m = FeatureMatrix::new(
            (0..5).map(|i| row("d", &format!("a{i}"), i as f64 * 1.7 - 2.0)).collect(),
        )
        .unwrap();
        let (z1, _) = standardize(&m).unwrap();
        let rows2 = z1
            .iter()
            .enumerate()
            .map(|(i, v)| FeatureRow {
                dataset_id: "d".into(),
                scene_id: "s".into(),
                agent_id: format!("a{i}"),
                values: *v,
            })
            .collect();
        let (z2, _) = standardize(&FeatureMatrix::new(rows2).unwrap()).unwrap();
        for (a, b) in z1.iter().zip(&z2) {
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn column_stats_record_quartiles() {
        let m = FeatureMatrix::new(vec![row("d", "a", 1.0), row("d", "b", 3.0)]).unwrap();
        let stats = column_stats(&m).unwrap();
        assert!((stats[0].q1 - 1.5).abs() < 1e-12);
        assert!((stats[0].q3 - 2.5).abs() < 1e-12);
    }

    #[test]
    fn stored_stats_reproduce_training_scores() {
        let m = FeatureMatrix::new(vec![row("d", "a", 1.0), row("d", "b", 3.0)]).unwrap();
        let (z, stats) = standardize(&m).unwrap();
        let again = apply_standardization(&m.rows()[0].values, &stats);
        assert_eq!(z[0], again);
    }

    #[test]
    fn centering_subtracts_column_means() {
        let (centered, means) = center_columns(&[vec![1.0, 2.0, 3.0]]);
        assert_eq!(means, vec![2.0]);
        assert_eq!(centered[0], vec![-1.0, 0.0, 1.0]);
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("features.csv");
        let mut values = [0.0; FEATURE_COUNT];
        for (j, v) in values.iter_mut().enumerate() {
            *v = (j as f64 + 1.0) / 3.0;
        }
        let m = FeatureMatrix::new(vec![FeatureRow {
            dataset_id: "d".into(),
            scene_id: "s".into(),
            agent_id: "a".into(),
            values,
        }])
        .unwrap();
        write_features_csv(&m, &path).unwrap();
        let back = read_features_csv(&path).unwrap();
        assert_eq!(back.rows()[0].dataset_id, "d");
        for j in 0..FEATURE_COUNT {
            assert_eq!(back.rows()[0].values[j].to_bits(), values[j].to_bits());
        }
    }

    #[test]
    fn bad_header_is_line_one_parse_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("features.csv");
        std::fs::write(&path, "nope,nope\n").unwrap();
        let err = read_features_csv(&path).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 1),
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn rejects_non_finite_values() {
        let mut r = row("d", "a", 1.0);
        r.values[4] = f64::NAN;
        let err = FeatureMatrix::new(vec![r]).unwrap_err();
        assert!(err.to_string().contains("orientation_entropy"), "{err}");
    }
}
