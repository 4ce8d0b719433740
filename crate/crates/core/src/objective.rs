//! The expert-accuracy objective and the multinomial-logit expert.
//!
//! Given a set `S`, an expert whose unrestricted confusion matrix is `C`
//! picks `ŷ ∈ S` with probability `C[ŷ][y] / Σ_{y'∈S} C[y'][y]` when the
//! truth is `y`. Weighting each label's self-choice probability by the label
//! distribution gives the expected accuracy
//!
//! ```text
//! ĝ(S | x) = Σ_{y∈S} f_y · C[y][y] / Σ_{y'∈S} C[y'][y]
//! ```
//!
//! Terms with a zero denominator contribute nothing (their numerator is then
//! zero as well).

use rand::Rng;

use crate::error::{Error, Result};
use crate::types::{ConfusionMatrix, LabelId, PredictionSet, ProbVector};

#[inline]
fn ratio_or_zero(num: f64, denom: f64) -> f64 {
    if denom > 0.0 {
        num / denom
    } else {
        0.0
    }
}

fn accuracy_under(set: &PredictionSet, weights: &[f64], c: &ConfusionMatrix) -> f64 {
    set.iter()
        .map(|y| {
            let denom: f64 = set.iter().map(|yp| c.entry(yp, y)).sum();
            weights[y.0] * ratio_or_zero(c.entry(y, y), denom)
        })
        .sum()
}

/// `ĝ(S | x)` with the classifier's scores standing in for the label distribution.
/// The empty set scores zero.
///
/// Panics if a member of `set` is out of range for `c`.
pub fn expected_accuracy(set: &PredictionSet, f: &ProbVector, c: &ConfusionMatrix) -> f64 {
    accuracy_under(set, f.as_slice(), c)
}

/// Same formula as [`expected_accuracy`] evaluated under the true label
/// distribution rather than a classifier estimate.
pub fn true_expected_accuracy(set: &PredictionSet, p_true: &ProbVector, c: &ConfusionMatrix) -> f64 {
    accuracy_under(set, p_true.as_slice(), c)
}

/// Incremental evaluation of `ĝ` while a set grows one label at a time.
///
/// Keeps `denom[ŷ] = Σ_{y'∈S} C[y'][ŷ]` for every label so a marginal gain
/// costs `O(|S| + 1)`.
#[derive(Debug, Clone)]
pub struct ObjectiveState<'a> {
    f: &'a ProbVector,
    c: &'a ConfusionMatrix,
    members: Vec<LabelId>,
    in_set: Vec<bool>,
    denom: Vec<f64>,
    value: f64,
}

impl<'a> ObjectiveState<'a> {
    pub fn new(f: &'a ProbVector, c: &'a ConfusionMatrix) -> Result<Self> {
        if f.len() != c.label_count() {
            return Err(Error::DimensionMismatch {
                expected: c.label_count(),
                got: f.len(),
            });
        }
        let n = f.len();
        Ok(ObjectiveState {
            f,
            c,
            members: Vec::with_capacity(n),
            in_set: vec![false; n],
            denom: vec![0.0; n],
            value: 0.0,
        })
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn denominators(&self) -> &[f64] {
        &self.denom
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, label: LabelId) -> bool {
        self.in_set[label.0]
    }

    pub fn current_set(&self) -> PredictionSet {
        PredictionSet::new(self.members.iter().copied())
    }

    fn check_candidate(&self, candidate: LabelId) -> Result<()> {
        if candidate.0 >= self.in_set.len() {
            return Err(Error::LabelOutOfBounds {
                label: candidate.0,
                label_count: self.in_set.len(),
            });
        }
        if self.in_set[candidate.0] {
            return Err(Error::CandidateAlreadyInSet(candidate.0));
        }
        Ok(())
    }

    /// `ĝ(S ∪ {candidate})` from the stored denominators.
    fn value_with(&self, candidate: LabelId) -> f64 {
        let add = self.c.row(candidate);
        let f = self.f.as_slice();
        let existing: f64 = self
            .members
            .iter()
            .map(|&y| f[y.0] * ratio_or_zero(self.c.entry(y, y), self.denom[y.0] + add[y.0]))
            .sum();
        let own = f[candidate.0]
            * ratio_or_zero(
                self.c.entry(candidate, candidate),
                self.denom[candidate.0] + add[candidate.0],
            );
        existing + own
    }

    /// `ĝ(S ∪ {candidate}) − ĝ(S)`.
    pub fn marginal_gain(&self, candidate: LabelId) -> Result<f64> {
        self.check_candidate(candidate)?;
        Ok(self.value_with(candidate) - self.value)
    }

    /// Adds `candidate` to the set, updating denominators and the cached value.
    pub fn commit(&mut self, candidate: LabelId) -> Result<()> {
        self.check_candidate(candidate)?;
        self.value = self.value_with(candidate);
        for (d, &a) in self.denom.iter_mut().zip(self.c.row(candidate)) {
            *d += a;
        }
        self.in_set[candidate.0] = true;
        self.members.push(candidate);
        Ok(())
    }
}

/// The expert's choice distribution over a set for a given true label.
#[derive(Debug, Clone, PartialEq)]
pub struct ChoiceDistribution {
    labels: Vec<LabelId>,
    probs: Vec<f64>,
    uniform_fallback: bool,
}

impl ChoiceDistribution {
    pub fn labels(&self) -> &[LabelId] {
        &self.labels
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    /// Probability of choosing `label`; zero for labels outside the set.
    pub fn probability(&self, label: LabelId) -> f64 {
        self.labels
            .binary_search(&label)
            .map(|i| self.probs[i])
            .unwrap_or(0.0)
    }

    /// True when every label in the set had zero weight for this truth and the
    /// choice was made uniform.
    pub fn is_uniform_fallback(&self) -> bool {
        self.uniform_fallback
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> LabelId {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut last_positive = self.labels[0];
        for (&label, &p) in self.labels.iter().zip(&self.probs) {
            if p > 0.0 {
                acc += p;
                last_positive = label;
                if u < acc {
                    return label;
                }
            }
        }
        last_positive
    }
}

/// Choice probabilities proportional to `C[ŷ][truth]` over `ŷ ∈ set`, or
/// uniform over the set when all those weights are zero.
pub fn mnl_choice_distribution(
    set: &PredictionSet,
    true_label: LabelId,
    c: &ConfusionMatrix,
) -> Result<ChoiceDistribution> {
    if set.is_empty() {
        return Err(Error::EmptySet);
    }
    set.check_bounds(c.label_count())?;
    LabelId::checked(true_label.0, c.label_count())?;
    let weights: Vec<f64> = set.iter().map(|p| c.entry(p, true_label)).collect();
    let total: f64 = weights.iter().sum();
    let (probs, uniform_fallback) = if total > 0.0 {
        (weights.iter().map(|w| w / total).collect(), false)
    } else {
        (vec![1.0 / set.len() as f64; set.len()], true)
    };
    Ok(ChoiceDistribution {
        labels: set.members().to_vec(),
        probs,
        uniform_fallback,
    })
}

/// Draws the expert's prediction from [`mnl_choice_distribution`].
pub fn sample_expert_prediction<R: Rng + ?Sized>(
    set: &PredictionSet,
    true_label: LabelId,
    c: &ConfusionMatrix,
    rng: &mut R,
) -> Result<LabelId> {
    Ok(mnl_choice_distribution(set, true_label, c)?.sample(rng))
}

/// Probability that the expert restricted to `set` predicts `truth`.
/// Zero when `set` is empty or misses the truth.
pub fn expert_success_probability(set: &PredictionSet, truth: LabelId, c: &ConfusionMatrix) -> Result<f64> {
    if !set.contains(truth) {
        return Ok(0.0);
    }
    Ok(mnl_choice_distribution(set, truth, c)?.probability(truth))
}
