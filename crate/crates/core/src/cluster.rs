//! Seeded two-cluster k-means over standardized feature rows, dataset
//! labeling by majority vote, and the persisted model used to classify new
//! recordings.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::featmat::{apply_standardization, ColumnStats, FeatureMatrix, FEATURE_COUNT, FEATURE_NAMES};
use crate::stats;

pub const K: usize = 2;
const MAX_ITERS: usize = 300;
/// Column whose centroid coordinate names the clusters.
const STOP_FRACTION_COL: usize = 1;

/// The two clusters. A is the one whose centroid has the higher
/// standardized stop-fraction coordinate — pedestrians there halt more,
/// the signature of mixed, negotiated space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClusterLabel {
    A,
    B,
}

impl ClusterLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            ClusterLabel::A => "A",
            ClusterLabel::B => "B",
        }
    }
}

impl std::fmt::Display for ClusterLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit {
    pub centroids: [[f64; FEATURE_COUNT]; K],
    /// Per input row: index into `centroids`.
    pub assignments: Vec<usize>,
    pub inertia: f64,
    /// Inertia after each assignment step of the winning restart.
    pub inertia_trace: Vec<f64>,
    /// Index of the restart that produced the best inertia.
    pub restart: u32,
    /// Which centroid is cluster A.
    pub a_index: usize,
}

impl KMeansFit {
    pub fn label_of(&self, centroid: usize) -> ClusterLabel {
        if centroid == self.a_index {
            ClusterLabel::A
        } else {
            ClusterLabel::B
        }
    }

    pub fn row_labels(&self) -> Vec<ClusterLabel> {
        self.assignments.iter().map(|&c| self.label_of(c)).collect()
    }
}

fn dist2(a: &[f64; FEATURE_COUNT], b: &[f64; FEATURE_COUNT]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Fit k = 2 means with `restarts` independent k-means++ initializations.
/// Restart `r` draws from a stream-`r + 1` generator seeded with `seed`, so
/// results are reproducible and independent of thread or iteration order.
/// The best restart is the one with the lowest inertia; ties keep the
/// earliest restart.
pub fn kmeans_fit(data: &[[f64; FEATURE_COUNT]], seed: u64, restarts: u32) -> Result<KMeansFit> {
    if data.len() < K {
        return Err(Error::Invalid(format!(
            "k-means with k = {K} needs at least {K} rows, got {}",
            data.len()
        )));
    }
    if restarts == 0 {
        return Err(Error::Invalid("k-means needs at least one restart".into()));
    }
    let mut best: Option<KMeansFit> = None;
    for restart in 0..restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(u64::from(restart) + 1);
        let init = plus_plus_init(data, &mut rng);
        let (centroids, assignments, trace) = lloyd(data, init);
        let inertia = *trace.last().expect("lloyd runs at least one iteration");
        if best.as_ref().map_or(true, |b| inertia < b.inertia) {
            let a_index = name_a(&centroids);
            best = Some(KMeansFit {
                centroids,
                assignments,
                inertia,
                inertia_trace: trace,
                restart,
                a_index,
            });
        }
    }
    Ok(best.expect("at least one restart ran"))
}

/// Cluster A is the centroid with the higher stop-fraction coordinate;
/// on an exact tie, centroid 0.
fn name_a(centroids: &[[f64; FEATURE_COUNT]; K]) -> usize {
    if centroids[1][STOP_FRACTION_COL] > centroids[0][STOP_FRACTION_COL] {
        1
    } else {
        0
    }
}

/// Choose 2 starting centroids: the first uniformly, the second with
/// probability proportional to squared distance from the first.
fn plus_plus_init(data: &[[f64; FEATURE_COUNT]], rng: &mut ChaCha8Rng) -> [[f64; FEATURE_COUNT]; K] {
    let first = data[rng.gen_range(0..data.len())];
    let weights: Vec<f64> = data.iter().map(|p| dist2(p, &first)).collect();
    let total: f64 = weights.iter().sum();
    let second = if total > 0.0 {
        let mut u = rng.gen::<f64>() * total;
        let mut pick = data.len() - 1;
        for (i, w) in weights.iter().enumerate() {
            if u < *w {
                pick = i;
                break;
            }
            u -= w;
        }
        data[pick]
    } else {
        // Every point coincides with the first centroid.
        data[rng.gen_range(0..data.len())]
    };
    [first, second]
}

/// Lloyd iterations until assignments stop changing (at most [`MAX_ITERS`]).
/// Distance ties assign to the lower centroid index. A cluster left empty by
/// an update is reseeded at the point farthest from its assigned centroid.
/// Returns final centroids, assignments, and the inertia after every
/// assignment step.
fn lloyd(
    data: &[[f64; FEATURE_COUNT]],
    mut centroids: [[f64; FEATURE_COUNT]; K],
) -> ([[f64; FEATURE_COUNT]; K], Vec<usize>, Vec<f64>) {
    let mut assignments = vec![usize::MAX; data.len()];
    let mut trace = Vec::new();
    for _ in 0..MAX_ITERS {
        // Assignment step.
        let mut changed = false;
        let mut inertia = 0.0;
        for (i, p) in data.iter().enumerate() {
            let d0 = dist2(p, &centroids[0]);
            let d1 = dist2(p, &centroids[1]);
            let (c, d) = if d1 < d0 { (1, d1) } else { (0, d0) };
            inertia += d;
            if assignments[i] != c {
                assignments[i] = c;
                changed = true;
            }
        }
        trace.push(inertia);
        if !changed {
            break;
        }
        // Update step.
        let mut sums = [[0.0; FEATURE_COUNT]; K];
        let mut counts = [0usize; K];
        for (p, &c) in data.iter().zip(&assignments) {
            counts[c] += 1;
            for (s, v) in sums[c].iter_mut().zip(p) {
                *s += v;
            }
        }
        for c in 0..K {
            if counts[c] > 0 {
                for s in sums[c].iter_mut() {
                    *s /= counts[c] as f64;
                }
                centroids[c] = sums[c];
            } else {
                // Reseed an emptied cluster at the worst-fit point.
                let far = data
                    .iter()
                    .enumerate()
                    .max_by(|(_, p), (_, q)| {
                        dist2(p, &centroids[assignments_for(p, &centroids)])
                            .total_cmp(&dist2(q, &centroids[assignments_for(q, &centroids)]))
                    })
                    .map(|(i, _)| i)
                    .expect("data is non-empty");
                centroids[c] = data[far];
            }
        }
    }
    (centroids, assignments, trace)
}

fn assignments_for(p: &[f64; FEATURE_COUNT], centroids: &[[f64; FEATURE_COUNT]; K]) -> usize {
    if dist2(p, &centroids[1]) < dist2(p, &centroids[0]) {
        1
    } else {
        0
    }
}

/// A dataset's overall label: the cluster holding a strict majority of its
/// pedestrian rows, or unresolved on an exact split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetLabel {
    A,
    B,
    Unresolved,
}

impl DatasetLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            DatasetLabel::A => "A",
            DatasetLabel::B => "B",
            DatasetLabel::Unresolved => "unresolved",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DatasetAssignment {
    pub dataset_id: String,
    pub label: DatasetLabel,
    /// Fraction of the dataset's rows assigned to cluster A.
    pub a_share: f64,
    pub rows: usize,
}

/// Majority-vote each dataset's rows into a label. `labels` must align with
/// `matrix` rows.
pub fn majority_labels(matrix: &FeatureMatrix, labels: &[ClusterLabel]) -> Vec<DatasetAssignment> {
    let mut out = Vec::new();
    for dataset_id in matrix.dataset_ids() {
        let mut rows = 0usize;
        let mut a = 0usize;
        for (row, &label) in matrix.rows().iter().zip(labels) {
            if row.dataset_id == dataset_id {
                rows += 1;
                if label == ClusterLabel::A {
                    a += 1;
                }
            }
        }
        let a_share = a as f64 / rows as f64;
        let label = if 2 * a > rows {
            DatasetLabel::A
        } else if 2 * a < rows {
            DatasetLabel::B
        } else {
            DatasetLabel::Unresolved
        };
        out.push(DatasetAssignment { dataset_id, label, a_share, rows });
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct FeatureSummary {
    pub feature: &'static str,
    pub mean: f64,
    /// Half-width of the normal 95% interval, `1.96 * sd / sqrt(n)`;
    /// absent with fewer than two members.
    pub ci95: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClusterSummary {
    pub label: ClusterLabel,
    pub count: usize,
    pub features: Vec<FeatureSummary>,
}

/// Per-cluster feature means with 95% intervals, in original (raw) units.
/// `matrix` must be the unstandardized rows the fit was built from.
pub fn cluster_summaries(matrix: &FeatureMatrix, fit: &KMeansFit) -> Vec<ClusterSummary> {
    [ClusterLabel::A, ClusterLabel::B]
        .into_iter()
        .map(|label| {
            let members: Vec<&[f64; FEATURE_COUNT]> = matrix
                .rows()
                .iter()
                .zip(&fit.assignments)
                .filter(|(_, &c)| fit.label_of(c) == label)
                .map(|(r, _)| &r.values)
                .collect();
            let features = FEATURE_NAMES
                .iter()
                .enumerate()
                .map(|(j, name)| {
                    let col: Vec<f64> = members.iter().map(|v| v[j]).collect();
                    let mean = if col.is_empty() { f64::NAN } else { stats::mean(&col) };
                    let ci95 = (col.len() >= 2)
                        .then(|| 1.96 * stats::sample_sd(&col) / (col.len() as f64).sqrt());
                    FeatureSummary { feature: name, mean, ci95 }
                })
                .collect();
            ClusterSummary { label, count: members.len(), features }
        })
        .collect()
}

/// Everything needed to label new recordings: the centroids in standardized
/// space, the column stats that define that space, and the fit provenance
/// (seed, inertia).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClusterModel {
    pub centroids: Vec<Vec<f64>>,
    pub a_index: usize,
    pub column_stats: Vec<ColumnStats>,
    pub seed: u64,
    pub inertia: f64,
}

impl ClusterModel {
    pub fn from_fit(fit: &KMeansFit, column_stats: &[ColumnStats], seed: u64) -> Self {
        Self {
            centroids: fit.centroids.iter().map(|c| c.to_vec()).collect(),
            a_index: fit.a_index,
            column_stats: column_stats.to_vec(),
            seed,
            inertia: fit.inertia,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        serde_json::to_writer_pretty(BufWriter::new(file), self)
            .map_err(|e| Error::Invalid(format!("writing {}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let model: Self = serde_json::from_reader(BufReader::new(file))
            .map_err(|e| Error::parse(path, 0, e.to_string()))?;
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if self.centroids.len() != K
            || self.centroids.iter().any(|c| c.len() != FEATURE_COUNT)
            || self.column_stats.len() != FEATURE_COUNT
            || self.a_index >= K
        {
            return Err(Error::Invalid(
                "cluster model must hold 2 centroids and stats over 13 features".into(),
            ));
        }
        Ok(())
    }

    /// Standardize a raw feature vector with the stored stats and assign it
    /// to the nearest centroid; an exact distance tie goes to the lower
    /// centroid index (same rule the fit itself uses).
    pub fn classify_row(&self, values: &[f64; FEATURE_COUNT]) -> ClusterLabel {
        let z = apply_standardization(values, &self.column_stats);
        let d: Vec<f64> = self
            .centroids
            .iter()
            .map(|c| z.iter().zip(c).map(|(x, y)| (x - y) * (x - y)).sum())
            .collect();
        let index = if d[1] < d[0] { 1 } else { 0 };
        if index == self.a_index {
            ClusterLabel::A
        } else {
            ClusterLabel::B
        }
    }

    /// Label every row, then majority-vote the datasets.
    pub fn classify_matrix(
        &self,
        matrix: &FeatureMatrix,
    ) -> (Vec<ClusterLabel>, Vec<DatasetAssignment>) {
        let labels: Vec<ClusterLabel> =
            matrix.rows().iter().map(|r| self.classify_row(&r.values)).collect();
        let datasets = majority_labels(matrix, &labels);
        (labels, datasets)
    }
}
