//! Domain types shared by every module: labels, probability vectors,
//! confusion matrices, prediction sets and datasets.
//!
//! Labels are zero-based everywhere in code and files; `Display` impls
//! print them one-based.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sum tolerance for probability vectors and confusion columns produced in-process.
pub const PROB_TOL: f64 = 1e-9;

/// Sum tolerance for ingested or rounded data.
pub const INGEST_TOL: f64 = 0.02;

/// Sums closer than this to 1 are left untouched, so that validating an
/// already-normalized vector is bit-exact and idempotent.
const EXACT_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LabelId(pub usize);

impl LabelId {
    pub fn index(self) -> usize {
        self.0
    }

    pub fn checked(index: usize, label_count: usize) -> Result<Self> {
        if index < label_count {
            Ok(LabelId(index))
        } else {
            Err(Error::LabelOutOfBounds {
                label: index,
                label_count,
            })
        }
    }
}

impl fmt::Display for LabelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0 + 1)
    }
}

/// Classifier output over `L` labels: entries in `[0, 1]` summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbVector {
    values: Vec<f64>,
}

impl ProbVector {
    /// Validates at [`PROB_TOL`].
    pub fn new(values: Vec<f64>) -> Result<Self> {
        Self::with_tolerance(values, PROB_TOL)
    }

    /// Validates entries and renormalizes when the sum is within `tol` of one.
    pub fn with_tolerance(mut values: Vec<f64>, tol: f64) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidProbVector("no entries".into()));
        }
        for (i, &v) in values.iter().enumerate() {
            if !v.is_finite() || !(0.0..=1.0 + tol).contains(&v) {
                return Err(Error::InvalidProbVector(format!("entry {i} = {v}")));
            }
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > tol {
            return Err(Error::InvalidProbVector(format!("entries sum to {sum}")));
        }
        if (sum - 1.0).abs() > EXACT_SLACK {
            values.iter_mut().for_each(|v| *v /= sum);
        }
        Ok(ProbVector { values })
    }

    pub fn uniform(label_count: usize) -> Self {
        ProbVector {
            values: vec![1.0 / label_count as f64; label_count],
        }
    }

    pub fn point_mass(label: LabelId, label_count: usize) -> Self {
        let mut values = vec![0.0; label_count];
        values[label.0] = 1.0;
        ProbVector { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, label: LabelId) -> f64 {
        self.values[label.0]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    /// Labels sorted by descending probability, ties broken by ascending index.
    pub fn ranking(&self) -> Vec<LabelId> {
        let mut order: Vec<usize> = (0..self.values.len()).collect();
        // stable sort keeps ascending index among ties
        order.sort_by(|&a, &b| self.values[b].total_cmp(&self.values[a]));
        order.into_iter().map(LabelId).collect()
    }

    pub fn argmax(&self) -> LabelId {
        self.ranking()[0]
    }
}

/// Column-stochastic matrix: `entry(pred, truth)` is the probability that the
/// expert, unrestricted, predicts `pred` when the ground truth is `truth`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfusionMatrix {
    n: usize,
    // row-major: entries[pred * n + truth]
    entries: Vec<f64>,
}

impl ConfusionMatrix {
    pub fn label_count(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn entry(&self, pred: LabelId, truth: LabelId) -> f64 {
        self.entries[pred.0 * self.n + truth.0]
    }

    /// Row `pred`, indexed by true label.
    #[inline]
    pub fn row(&self, pred: LabelId) -> &[f64] {
        &self.entries[pred.0 * self.n..(pred.0 + 1) * self.n]
    }

    pub fn column(&self, truth: LabelId) -> Vec<f64> {
        (0..self.n).map(|p| self.entries[p * self.n + truth.0]).collect()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|y| self.entries[y * self.n + y]).collect()
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.entries.chunks(self.n).map(<[f64]>::to_vec).collect()
    }

    pub fn identity(n: usize) -> Self {
        let mut entries = vec![0.0; n * n];
        for y in 0..n {
            entries[y * n + y] = 1.0;
        }
        ConfusionMatrix { n, entries }
    }

    /// The label other than `truth` most often predicted when the truth is
    /// `truth`; ties go to the smallest index. `None` for a single label.
    pub fn most_confused_with(&self, truth: LabelId) -> Option<LabelId> {
        let mut best: Option<(usize, f64)> = None;
        for p in (0..self.n).filter(|&p| p != truth.0) {
            let v = self.entries[p * self.n + truth.0];
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((p, v));
            }
        }
        best.map(|(p, _)| LabelId(p))
    }
}

/// Validates a square matrix of conditional prediction probabilities.
///
/// Columns (true labels) must sum to one within `tol`; a column inside the
/// tolerance is renormalized, anything outside it is rejected.
pub fn validate_confusion(matrix: Vec<Vec<f64>>, tol: f64) -> Result<ConfusionMatrix> {
    let n = matrix.len();
    if n == 0 {
        return Err(Error::TooFewLabels { min: 1, got: 0 });
    }
    for (r, row) in matrix.iter().enumerate() {
        if row.len() != n {
            return Err(Error::NotSquare {
                rows: n,
                row: r,
                cols: row.len(),
            });
        }
        for (c, &v) in row.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFiniteEntry { row: r, col: c });
            }
            if v < 0.0 {
                return Err(Error::NegativeEntry {
                    row: r,
                    col: c,
                    value: v,
                });
            }
        }
    }
    let mut entries: Vec<f64> = matrix.into_iter().flatten().collect();
    for col in 0..n {
        let sum: f64 = (0..n).map(|r| entries[r * n + col]).sum();
        if (sum - 1.0).abs() > tol {
            return Err(Error::ColumnSumOutOfTolerance {
                column: col,
                sum,
                tol,
            });
        }
        if (sum - 1.0).abs() > EXACT_SLACK {
            (0..n).for_each(|r| entries[r * n + col] /= sum);
        }
    }
    Ok(ConfusionMatrix { n, entries })
}

/// Per-column empirical frequencies with additive smoothing:
/// `(counts[pred][truth] + s) / (column total + L * s)`.
pub fn normalize_counts(counts: &[Vec<u64>], smoothing: f64) -> Result<ConfusionMatrix> {
    let n = counts.len();
    if n == 0 {
        return Err(Error::TooFewLabels { min: 1, got: 0 });
    }
    if !(smoothing >= 0.0 && smoothing.is_finite()) {
        return Err(Error::Config(format!("smoothing must be >= 0, got {smoothing}")));
    }
    for (r, row) in counts.iter().enumerate() {
        if row.len() != n {
            return Err(Error::NotSquare {
                rows: n,
                row: r,
                cols: row.len(),
            });
        }
    }
    let mut entries = vec![0.0; n * n];
    for col in 0..n {
        let total: u64 = counts.iter().map(|row| row[col]).sum();
        if total == 0 && smoothing == 0.0 {
            return Err(Error::EmptyColumnWithoutSmoothing { column: col });
        }
        let denom = total as f64 + n as f64 * smoothing;
        for (r, row) in counts.iter().enumerate() {
            entries[r * n + col] = (row[col] as f64 + smoothing) / denom;
        }
    }
    Ok(ConfusionMatrix { n, entries })
}

/// Tallies `(predicted, truth)` pairs into an `L x L` count matrix indexed `[pred][truth]`.
pub fn count_pairs(
    pairs: impl IntoIterator<Item = (LabelId, LabelId)>,
    label_count: usize,
) -> Vec<Vec<u64>> {
    let mut counts = vec![vec![0u64; label_count]; label_count];
    for (pred, truth) in pairs {
        counts[pred.0][truth.0] += 1;
    }
    counts
}

/// A sorted, duplicate-free set of labels.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct PredictionSet {
    members: Vec<LabelId>,
}

impl PredictionSet {
    pub fn new(labels: impl IntoIterator<Item = LabelId>) -> Self {
        let mut members: Vec<LabelId> = labels.into_iter().collect();
        members.sort_unstable();
        members.dedup();
        PredictionSet { members }
    }

    pub fn from_indices(indices: &[usize]) -> Self {
        Self::new(indices.iter().copied().map(LabelId))
    }

    pub fn empty() -> Self {
        PredictionSet::default()
    }

    pub fn singleton(label: LabelId) -> Self {
        PredictionSet {
            members: vec![label],
        }
    }

    pub fn full(label_count: usize) -> Self {
        PredictionSet {
            members: (0..label_count).map(LabelId).collect(),
        }
    }

    pub fn contains(&self, label: LabelId) -> bool {
        self.members.binary_search(&label).is_ok()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn members(&self) -> &[LabelId] {
        &self.members
    }

    pub fn iter(&self) -> impl Iterator<Item = LabelId> + '_ {
        self.members.iter().copied()
    }

    pub fn indices(&self) -> Vec<usize> {
        self.members.iter().map(|l| l.0).collect()
    }

    pub fn without(&self, label: LabelId) -> Self {
        PredictionSet {
            members: self.members.iter().copied().filter(|&l| l != label).collect(),
        }
    }

    pub(crate) fn check_bounds(&self, label_count: usize) -> Result<()> {
        match self.members.last() {
            Some(&LabelId(max)) if max >= label_count => Err(Error::LabelOutOfBounds {
                label: max,
                label_count,
            }),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for PredictionSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, l) in self.members.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{l}")?;
        }
        write!(f, "}}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstanceRecord {
    pub id: String,
    pub scores: ProbVector,
    pub true_label: LabelId,
    pub human_pred: Option<LabelId>,
    /// Free-form grouping metadata, e.g. an image noise level.
    pub noise_tag: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Calib,
    Test,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    label_count: usize,
    records: Vec<InstanceRecord>,
    splits: BTreeMap<String, Split>,
}

impl Dataset {
    pub fn new(label_count: usize, records: Vec<InstanceRecord>) -> Result<Self> {
        if label_count < 2 {
            return Err(Error::TooFewLabels {
                min: 2,
                got: label_count,
            });
        }
        let mut seen = HashSet::with_capacity(records.len());
        for r in &records {
            if r.scores.len() != label_count {
                return Err(Error::DimensionMismatch {
                    expected: label_count,
                    got: r.scores.len(),
                });
            }
            LabelId::checked(r.true_label.0, label_count)?;
            if let Some(h) = r.human_pred {
                LabelId::checked(h.0, label_count)?;
            }
            if !seen.insert(r.id.as_str()) {
                return Err(Error::Config(format!("duplicate record id {:?}", r.id)));
            }
        }
        Ok(Dataset {
            label_count,
            records,
            splits: BTreeMap::new(),
        })
    }

    pub fn label_count(&self) -> usize {
        self.label_count
    }

    pub fn records(&self) -> &[InstanceRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn splits(&self) -> &BTreeMap<String, Split> {
        &self.splits
    }

    pub fn split_of(&self, id: &str) -> Option<Split> {
        self.splits.get(id).copied()
    }

    /// Replaces the split assignment. Every id must belong to a record.
    pub fn with_splits(mut self, splits: BTreeMap<String, Split>) -> Result<Self> {
        let ids: HashSet<&str> = self.records.iter().map(|r| r.id.as_str()).collect();
        if let Some(unknown) = splits.keys().find(|k| !ids.contains(k.as_str())) {
            return Err(Error::Config(format!("split assigned to unknown id {unknown:?}")));
        }
        self.splits = splits;
        Ok(self)
    }

    pub fn records_in(&self, split: Split) -> impl Iterator<Item = &InstanceRecord> + '_ {
        self.records
            .iter()
            .filter(move |r| self.splits.get(&r.id) == Some(&split))
    }

    /// Keeps only the records matching `keep`; split tags of survivors are retained.
    pub fn filtered(&self, keep: impl Fn(&InstanceRecord) -> bool) -> Dataset {
        let records: Vec<InstanceRecord> = self.records.iter().filter(|r| keep(r)).cloned().collect();
        let splits = records
            .iter()
            .filter_map(|r| self.splits.get(&r.id).map(|s| (r.id.clone(), *s)))
            .collect();
        Dataset {
            label_count: self.label_count,
            records,
            splits,
        }
    }

    /// Distinct noise tags in ascending order.
    pub fn noise_tags(&self) -> Vec<f64> {
        let mut tags: Vec<f64> = self.records.iter().filter_map(|r| r.noise_tag).collect();
        tags.sort_by(f64::total_cmp);
        tags.dedup();
        tags
    }
}
