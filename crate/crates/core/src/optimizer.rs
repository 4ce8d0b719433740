//! Set construction: the greedy search over ranking prefixes and an exact
//! exhaustive oracle.

use crate::error::{Error, Result};
use crate::objective::{expected_accuracy, ObjectiveState};
use crate::types::{ConfusionMatrix, LabelId, PredictionSet, ProbVector};

/// Default cap on the label count accepted by [`brute_force_set`].
pub const BRUTE_FORCE_MAX_LABELS: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct GreedyStep {
    /// One-based round index `k`; the round only considers the top-`k` labels.
    pub round: usize,
    pub set: PredictionSet,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GreedyTrace {
    /// Every intermediate set in the order it was built.
    pub steps: Vec<GreedyStep>,
    /// Number of marginal-gain evaluations, `L(L+1)(L+2)/6` for `L` labels.
    pub evaluations: u64,
}

impl GreedyTrace {
    /// Highest-valued set built during round `k` (first one on ties).
    pub fn round_best(&self, round: usize) -> Option<&GreedyStep> {
        self.steps
            .iter()
            .filter(|s| s.round == round)
            .fold(None, |best: Option<&GreedyStep>, s| match best {
                Some(b) if b.value >= s.value => Some(b),
                _ => Some(s),
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GreedyResult {
    pub set: PredictionSet,
    pub value: f64,
    pub trace: GreedyTrace,
}

pub fn evaluation_count(label_count: usize) -> u64 {
    let l = label_count as u64;
    l * (l + 1) * (l + 2) / 6
}

fn check_dims(f: &ProbVector, c: &ConfusionMatrix) -> Result<()> {
    if f.len() != c.label_count() {
        return Err(Error::DimensionMismatch {
            expected: c.label_count(),
            got: f.len(),
        });
    }
    Ok(())
}

/// Greedy search over ranking prefixes.
///
/// Labels are ranked by descending `f` (ties by ascending index). Round `k`
/// grows a set from empty by the best marginal gain among the top-`k` labels
/// until all `k` are used; candidates are scanned in ranking order and a new
/// incumbent needs a strictly larger gain. Every intermediate set competes
/// for the global best, which is replaced only on a strictly larger value.
/// If nothing beats the empty set, the top-ranked label alone is returned.
pub fn greedy_set(f: &ProbVector, c: &ConfusionMatrix) -> Result<GreedyResult> {
    check_dims(f, c)?;
    let n = f.len();
    let ranking = f.ranking();

    let mut best_set = PredictionSet::empty();
    let mut best_value = 0.0;
    let mut steps = Vec::with_capacity(n * (n + 1) / 2);
    let mut evaluations = 0u64;

    for k in 1..=n {
        let candidates = &ranking[..k];
        let mut state = ObjectiveState::new(f, c)?;
        while state.len() < k {
            let mut best_gain = f64::NEG_INFINITY;
            let mut chosen: Option<LabelId> = None;
            for &y in candidates.iter().filter(|&&y| !state.contains(y)) {
                evaluations += 1;
                let gain = state.marginal_gain(y)?;
                if gain > best_gain {
                    best_gain = gain;
                    chosen = Some(y);
                }
            }
            let chosen = chosen.expect("at least one candidate remains while |S_k| < k");
            state.commit(chosen)?;
            let value = state.value();
            let set = state.current_set();
            if value > best_value {
                best_value = value;
                best_set = set.clone();
            }
            steps.push(GreedyStep { round: k, set, value });
        }
    }

    if best_set.is_empty() {
        best_set = PredictionSet::singleton(ranking[0]);
        best_value = expected_accuracy(&best_set, f, c);
    }

    Ok(GreedyResult {
        set: best_set,
        value: best_value,
        trace: GreedyTrace { steps, evaluations },
    })
}

/// Exhaustive maximum of `ĝ` over all nonempty subsets.
///
/// Ties prefer fewer labels, then the lexicographically smaller member list.
pub fn brute_force_set(
    f: &ProbVector,
    c: &ConfusionMatrix,
    max_labels: usize,
) -> Result<(PredictionSet, f64)> {
    check_dims(f, c)?;
    let n = f.len();
    if n > max_labels {
        return Err(Error::LabelCountExceedsBruteForceLimit {
            label_count: n,
            max: max_labels,
        });
    }
    let mut search = Exhaustive {
        f: f.as_slice(),
        diag: c.diagonal(),
        c,
        members: Vec::with_capacity(n),
        // denominators after adding the first `d` members live at depth `d`
        denoms: vec![vec![0.0; n]; n + 1],
        best: None,
    };
    search.visit(0);
    let (members, value) = search.best.expect("at least one nonempty subset");
    Ok((PredictionSet::new(members.into_iter().map(LabelId)), value))
}

struct Exhaustive<'a> {
    f: &'a [f64],
    diag: Vec<f64>,
    c: &'a ConfusionMatrix,
    members: Vec<usize>,
    denoms: Vec<Vec<f64>>,
    best: Option<(Vec<usize>, f64)>,
}

impl Exhaustive<'_> {
    fn visit(&mut self, next: usize) {
        let n = self.f.len();
        if next == n {
            if !self.members.is_empty() {
                self.score_leaf();
            }
            return;
        }
        let depth = self.members.len();
        let row = self.c.row(LabelId(next));
        let (below, above) = self.denoms.split_at_mut(depth + 1);
        for ((dst, &src), &add) in above[0].iter_mut().zip(&below[depth]).zip(row) {
            *dst = src + add;
        }
        self.members.push(next);
        self.visit(next + 1);
        self.members.pop();
        self.visit(next + 1);
    }

    fn score_leaf(&mut self) {
        let denom = &self.denoms[self.members.len()];
        let value: f64 = self
            .members
            .iter()
            .map(|&y| {
                if denom[y] > 0.0 {
                    self.f[y] * self.diag[y] / denom[y]
                } else {
                    0.0
                }
            })
            .sum();
        let better = match &self.best {
            None => true,
            Some((m, v)) => {
                value > *v
                    || (value == *v
                        && (self.members.len() < m.len()
                            || (self.members.len() == m.len() && self.members < *m)))
            }
        };
        if better {
            self.best = Some((self.members.clone(), value));
        }
    }
}

/// `ĝ` of every ranking prefix `{y_(1)}, {y_(1), y_(2)}, …`, each evaluated from scratch.
pub fn chain_prefix_values(f: &ProbVector, c: &ConfusionMatrix) -> Result<Vec<f64>> {
    check_dims(f, c)?;
    let ranking = f.ranking();
    Ok((1..=ranking.len())
        .map(|k| expected_accuracy(&PredictionSet::new(ranking[..k].iter().copied()), f, c))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{conformal_gap_instance, non_monotone_instance};

    #[test]
    fn greedy_on_conformal_gap_instance() {
        let (f, c) = conformal_gap_instance();
        let r = greedy_set(&f, &c).unwrap();
        assert_eq!(r.set.indices(), vec![0, 1, 2]);
        assert!((r.value - 37.0 / 75.0).abs() < 1e-9);
        assert_eq!(r.trace.evaluations, 10);
        let bests: Vec<f64> = (1..=3).map(|k| r.trace.round_best(k).unwrap().value).collect();
        assert!((bests[0] - 0.4).abs() < 1e-12);
        assert!((bests[1] - 0.41).abs() < 1e-12);
        assert!((bests[2] - 37.0 / 75.0).abs() < 1e-12);
    }

    #[test]
    fn greedy_on_non_monotone_instance() {
        let (f, c) = non_monotone_instance();
        let r = greedy_set(&f, &c).unwrap();
        assert_eq!(r.set.indices(), vec![0, 1, 2]);
        assert!((r.value - 0.44).abs() < 1e-9);
        let values: Vec<f64> = r.trace.steps.iter().map(|s| s.value).collect();
        let expected = [0.4, 0.4, 103.0 / 300.0, 0.4, 103.0 / 300.0, 0.44];
        for (v, e) in values.iter().zip(expected) {
            assert!((v - e).abs() < 1e-12);
        }
    }

    #[test]
    fn single_label() {
        let f = ProbVector::new(vec![1.0]).unwrap();
        let c = ConfusionMatrix::identity(1);
        let r = greedy_set(&f, &c).unwrap();
        assert_eq!(r.set.indices(), vec![0]);
        assert_eq!(r.value, 1.0);
        assert_eq!(r.trace.evaluations, 1);
        let (s, v) = brute_force_set(&f, &c, BRUTE_FORCE_MAX_LABELS).unwrap();
        assert_eq!(s.indices(), vec![0]);
        assert_eq!(v, 1.0);
    }

    #[test]
    fn brute_force_fixtures() {
        let (f, c) = conformal_gap_instance();
        let (s, v) = brute_force_set(&f, &c, 20).unwrap();
        assert_eq!(s.indices(), vec![1, 2]);
        assert!((v - 0.6).abs() < 1e-9);

        let (f, c) = non_monotone_instance();
        let (s, v) = brute_force_set(&f, &c, 20).unwrap();
        assert_eq!(s.indices(), vec![1, 2]);
        assert!((v - 0.6).abs() < 1e-9);
    }

    #[test]
    fn brute_force_refuses_large_instances() {
        let f = ProbVector::uniform(5);
        let c = ConfusionMatrix::identity(5);
        assert!(matches!(
            brute_force_set(&f, &c, 4),
            Err(Error::LabelCountExceedsBruteForceLimit { label_count: 5, max: 4 })
        ));
    }

    #[test]
    fn brute_force_ties_prefer_small_then_lexicographic() {
        // identity expert: any set scores the sum of its probabilities
        let f = ProbVector::new(vec![0.5, 0.5, 0.0]).unwrap();
        let c = ConfusionMatrix::identity(3);
        let (s, v) = brute_force_set(&f, &c, 20).unwrap();
        assert_eq!(v, 1.0);
        assert_eq!(s.indices(), vec![0, 1]);

        let f = ProbVector::uniform(4);
        let c = validate_uniform(4);
        let (s, _) = brute_force_set(&f, &c, 20).unwrap();
        assert_eq!(s.indices(), vec![0]);
    }

    fn validate_uniform(n: usize) -> ConfusionMatrix {
        crate::types::validate_confusion(vec![vec![1.0 / n as f64; n]; n], 1e-9).unwrap()
    }

    #[test]
    fn chain_prefixes() {
        let (f, c) = conformal_gap_instance();
        let v = chain_prefix_values(&f, &c).unwrap();
        assert!((v[0] - 0.4).abs() < 1e-12);
        assert!((v[1] - 0.41).abs() < 1e-12);
        assert!((v[2] - 37.0 / 75.0).abs() < 1e-12);

        let (f, c) = non_monotone_instance();
        let v = chain_prefix_values(&f, &c).unwrap();
        assert!((v[0] - 0.4).abs() < 1e-12);
        assert!((v[1] - 103.0 / 300.0).abs() < 1e-12);
        assert!((v[2] - 0.44).abs() < 1e-12);
    }

    #[test]
    fn chain_prefix_ties_follow_index_order() {
        let f = ProbVector::uniform(3);
        // expert only ever predicts label 0
        let c = crate::types::validate_confusion(
            vec![vec![1.0; 3], vec![0.0; 3], vec![0.0; 3]],
            1e-9,
        )
        .unwrap();
        let v = chain_prefix_values(&f, &c).unwrap();
        // prefixes are {0}, {0,1}, {0,1,2}; only label 0 ever succeeds
        for x in v {
            assert!((x - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn evaluation_counts_match_closed_form() {
        for n in 1..=15 {
            let f = ProbVector::uniform(n);
            let c = ConfusionMatrix::identity(n);
            let r = greedy_set(&f, &c).unwrap();
            assert_eq!(r.trace.evaluations, evaluation_count(n));
        }
        assert_eq!(evaluation_count(3), 10);
        assert_eq!(evaluation_count(10), 220);
    }

    #[test]
    fn all_zero_scores_fall_back_to_top_label() {
        // expert never picks the truth, so no set beats the empty set
        let f = ProbVector::new(vec![0.3, 0.7]).unwrap();
        let c = crate::types::validate_confusion(vec![vec![0.0, 1.0], vec![1.0, 0.0]], 1e-9).unwrap();
        let r = greedy_set(&f, &c).unwrap();
        assert_eq!(r.set.indices(), vec![1]);
        assert_eq!(r.value, 0.0);
    }
}
