//! Split conformal prediction over classifier scores.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{LabelId, PredictionSet, ProbVector};

/// Non-conformity score; lower means more plausible.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreKind {
    /// `1 − f_y`.
    Naive,
    /// Total mass of the labels strictly more likely than `y`
    /// (adaptive prediction sets without randomization).
    Aps,
}

impl ScoreKind {
    pub const ALL: [ScoreKind; 2] = [ScoreKind::Naive, ScoreKind::Aps];

    pub fn score(self, f: &ProbVector, y: LabelId) -> f64 {
        match self {
            ScoreKind::Naive => naive_score(f, y),
            ScoreKind::Aps => aps_score(f, y),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ScoreKind::Naive => "naive",
            ScoreKind::Aps => "aps",
        }
    }
}

impl fmt::Display for ScoreKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScoreKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "naive" => Ok(ScoreKind::Naive),
            "aps" => Ok(ScoreKind::Aps),
            other => Err(Error::Config(format!("unknown score kind {other:?}"))),
        }
    }
}

pub fn naive_score(f: &ProbVector, y: LabelId) -> f64 {
    1.0 - f.get(y)
}

pub fn aps_score(f: &ProbVector, y: LabelId) -> f64 {
    let fy = f.get(y);
    f.as_slice().iter().filter(|&&v| v > fy).sum()
}

/// Conformal threshold `q̂`; infinite at the ends of the quantile index range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConformalThreshold {
    pub q_hat: f64,
    pub alpha: f64,
    pub m: usize,
}

/// One-based order-statistic index `⌈(m+1)(1−α)⌉`.
pub fn quantile_index(m: usize, alpha: f64) -> usize {
    // absorb rounding in products like 5 * 0.8 that should be integral
    let raw = (m as f64 + 1.0) * (1.0 - alpha);
    (raw - 1e-9).ceil().max(0.0) as usize
}

/// The `⌈(m+1)(1−α)⌉`-th smallest calibration score; `+∞` when that index
/// exceeds `m`, `−∞` when it is zero.
pub fn calibration_quantile(scores: &[f64], alpha: f64) -> Result<ConformalThreshold> {
    if scores.is_empty() {
        return Err(Error::EmptyCalibration);
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidAlpha(alpha));
    }
    let m = scores.len();
    let j = quantile_index(m, alpha);
    let q_hat = if j == 0 {
        f64::NEG_INFINITY
    } else if j > m {
        f64::INFINITY
    } else {
        let mut sorted = scores.to_vec();
        sorted.sort_by(f64::total_cmp);
        sorted[j - 1]
    };
    Ok(ConformalThreshold { q_hat, alpha, m })
}

/// Calibration scores `s(x_i, y_i)` for labelled samples.
pub fn calibration_scores<'a>(
    samples: impl IntoIterator<Item = (&'a ProbVector, LabelId)>,
    kind: ScoreKind,
) -> Vec<f64> {
    samples.into_iter().map(|(f, y)| kind.score(f, y)).collect()
}

/// Labels with score `≤ q̂`; when none qualify, the single label with the
/// lowest score, ties going to the higher-ranked label.
pub fn conformal_set(f: &ProbVector, threshold: &ConformalThreshold, kind: ScoreKind) -> PredictionSet {
    let scores: Vec<f64> = (0..f.len()).map(|y| kind.score(f, LabelId(y))).collect();
    let members: Vec<LabelId> = scores
        .iter()
        .enumerate()
        .filter(|(_, &s)| s <= threshold.q_hat)
        .map(|(y, _)| LabelId(y))
        .collect();
    if !members.is_empty() {
        return PredictionSet::new(members);
    }
    let order = f.ranking();
    let argmin = order
        .iter()
        .copied()
        .fold(order[0], |best, y| if scores[y.0] < scores[best.0] { y } else { best });
    PredictionSet::singleton(argmin)
}

/// Fraction of sets containing their label.
pub fn coverage(sets: &[PredictionSet], labels: &[LabelId]) -> Result<f64> {
    if sets.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: sets.len(),
            right: labels.len(),
        });
    }
    if sets.is_empty() {
        return Ok(0.0);
    }
    let hits = sets.iter().zip(labels).filter(|(s, &y)| s.contains(y)).count();
    Ok(hits as f64 / sets.len() as f64)
}
