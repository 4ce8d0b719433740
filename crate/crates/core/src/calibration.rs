//! Top-k-label histogram binning.
//!
//! For each rank position `j ≤ k` the rank-`j` score of every calibration
//! sample is binned with equal-frequency bins, and each bin is mapped to the
//! empirical frequency with which the rank-`j` label was the true label.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::types::{LabelId, ProbVector};

/// Bins for a single rank position. `edges` has one more entry than `values`.
#[derive(Debug, Clone, PartialEq)]
pub struct RankBins {
    pub edges: Vec<f64>,
    pub values: Vec<f64>,
}

impl RankBins {
    fn validate(&self) -> Result<()> {
        if self.values.is_empty() || self.edges.len() != self.values.len() + 1 {
            return Err(Error::InvalidCalibrator(format!(
                "{} edges for {} bins",
                self.edges.len(),
                self.values.len()
            )));
        }
        if self.edges.windows(2).any(|w| w[0].partial_cmp(&w[1]) != Some(std::cmp::Ordering::Less)) {
            return Err(Error::InvalidCalibrator("bin edges must be strictly increasing".into()));
        }
        if self.values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidCalibrator("bin values must lie in [0, 1]".into()));
        }
        Ok(())
    }

    /// Index of the bin containing `score`; scores beyond the outer edges
    /// land in the first or last bin.
    pub fn bin_of(&self, score: f64) -> usize {
        let interior = &self.edges[1..self.edges.len() - 1];
        interior.partition_point(|&e| e <= score)
    }

    pub fn value_of(&self, score: f64) -> f64 {
        self.values[self.bin_of(score)]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopKCalibrator {
    k: usize,
    ranks: Vec<RankBins>,
}

impl TopKCalibrator {
    pub fn from_parts(ranks: Vec<RankBins>) -> Result<Self> {
        if ranks.is_empty() {
            return Err(Error::InvalidCalibrator("k must be at least 1".into()));
        }
        for r in &ranks {
            r.validate()?;
        }
        Ok(TopKCalibrator { k: ranks.len(), ranks })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn ranks(&self) -> &[RankBins] {
        &self.ranks
    }

    /// Writes `rank,bin,lower,upper,value` rows (one-based rank, zero-based bin).
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("rank,bin,lower,upper,value\n");
        for (j, r) in self.ranks.iter().enumerate() {
            for (b, v) in r.values.iter().enumerate() {
                out.push_str(&format!("{},{},{},{},{}\n", j + 1, b, r.edges[b], r.edges[b + 1], v));
            }
        }
        std::fs::File::create(path)
            .and_then(|mut f| f.write_all(out.as_bytes()))
            .map_err(|e| Error::io(path, e))
    }
}

/// Fits `k` rank positions with up to `bins` equal-frequency bins each.
///
/// Bins are cut between consecutive groups of sorted scores; groups whose
/// boundary scores coincide are merged, so a rank can end up with fewer than
/// `bins` bins when scores repeat.
pub fn fit_topk(
    calib_scores: &[ProbVector],
    calib_labels: &[LabelId],
    k: usize,
    bins: usize,
) -> Result<TopKCalibrator> {
    if calib_scores.len() != calib_labels.len() {
        return Err(Error::LengthMismatch {
            left: calib_scores.len(),
            right: calib_labels.len(),
        });
    }
    if k == 0 || bins == 0 {
        return Err(Error::InvalidCalibrator("k and bins must be positive".into()));
    }
    let n = calib_scores.len();
    if n < bins {
        return Err(Error::InsufficientCalibrationData(format!(
            "{n} samples for {bins} bins"
        )));
    }
    let label_count = calib_scores[0].len();
    if k > label_count {
        return Err(Error::InsufficientCalibrationData(format!(
            "k = {k} exceeds the {label_count} labels"
        )));
    }

    let rankings: Vec<Vec<LabelId>> = calib_scores.iter().map(ProbVector::ranking).collect();
    let mut ranks = Vec::with_capacity(k);
    for j in 0..k {
        // (score of the rank-j label, whether it is the true label)
        let mut samples: Vec<(f64, bool)> = calib_scores
            .iter()
            .zip(&rankings)
            .zip(calib_labels)
            .map(|((f, order), &y)| (f.get(order[j]), order[j] == y))
            .collect();
        samples.sort_by(|a, b| a.0.total_cmp(&b.0));
        ranks.push(fit_rank(&samples, bins));
    }
    TopKCalibrator::from_parts(ranks)
}

fn fit_rank(sorted: &[(f64, bool)], bins: usize) -> RankBins {
    let n = sorted.len();
    let mut edges = vec![0.0];
    for b in 1..bins {
        let cut = b * n / bins;
        let (lo, hi) = (sorted[cut - 1].0, sorted[cut].0);
        if lo < hi {
            let mid = lo + (hi - lo) / 2.0;
            if mid > *edges.last().expect("nonempty") {
                edges.push(mid);
            }
        }
    }
    edges.push(1.0);
    if edges.len() > 2 && edges[edges.len() - 2] >= 1.0 {
        edges.remove(edges.len() - 2);
    }
    let mut bins_out = RankBins {
        values: vec![0.0; edges.len() - 1],
        edges,
    };
    let mut hits = vec![0usize; bins_out.values.len()];
    let mut totals = vec![0usize; bins_out.values.len()];
    for &(s, correct) in sorted {
        let b = bins_out.bin_of(s);
        totals[b] += 1;
        hits[b] += usize::from(correct);
    }
    for b in 0..totals.len() {
        // midpoint cuts between distinct scores leave no bin empty
        bins_out.values[b] = if totals[b] > 0 {
            hits[b] as f64 / totals[b] as f64
        } else {
            0.0
        };
    }
    bins_out
}

/// Replaces the top-`k` scores by their calibrated values and rescales the
/// remaining labels to restore a probability vector.
///
/// Calibrated values are made nonincreasing in rank by a running maximum
/// from rank `k` upward. The tail keeps its relative proportions and is
/// scaled to the leftover mass, but never above the rank-`k` value; when
/// that cap binds, or the top-`k` mass reaches one, the whole vector is
/// renormalized by a common factor.
pub fn apply_topk(cal: &TopKCalibrator, f: &ProbVector) -> Result<ProbVector> {
    let n = f.len();
    if n < cal.k {
        return Err(Error::DimensionMismatch { expected: cal.k, got: n });
    }
    let order = f.ranking();
    let mut out = vec![0.0; n];

    let mut top: Vec<f64> = (0..cal.k)
        .map(|j| cal.ranks[j].value_of(f.get(order[j])))
        .collect();
    for j in (0..cal.k.saturating_sub(1)).rev() {
        top[j] = top[j].max(top[j + 1]);
    }
    let top_mass: f64 = top.iter().sum();
    if top_mass <= 0.0 {
        // every calibrated value is zero: nothing to rescale, keep the input
        return Ok(f.clone());
    }
    for (j, &v) in top.iter().enumerate() {
        out[order[j].0] = v;
    }

    let tail = &order[cal.k..];
    let tail_mass: f64 = tail.iter().map(|&y| f.get(y)).sum();
    if top_mass < 1.0 && tail_mass > 0.0 {
        let floor = top[cal.k - 1];
        let tail_max = f.get(tail[0]);
        let mut scale = (1.0 - top_mass) / tail_mass;
        if tail_max * scale > floor {
            scale = floor / tail_max;
        }
        for &y in tail {
            out[y.0] = f.get(y) * scale;
        }
    }
    let total: f64 = out.iter().sum();
    if (total - 1.0).abs() > 1e-15 {
        out.iter_mut().for_each(|v| *v /= total);
    }
    ProbVector::new(out)
}
