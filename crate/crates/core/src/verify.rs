//! Randomized self-checks of the optimizer and the clique reduction, shared
//! by the `verify` command and the test suites.

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::Result;
use crate::hardness::{
    decide_threshold, graph_objective, max_clique_bruteforce, max_graph_objective, rational_to_f64,
    reduction_consistency, Graph, Rational, DEFAULT_CLIQUE_CAP,
};
use crate::objective::{expected_accuracy, ObjectiveState};
use crate::optimizer::{chain_prefix_values, evaluation_count, greedy_set};
use crate::rng::RngStream;
use crate::types::{validate_confusion, ConfusionMatrix, LabelId, PredictionSet, ProbVector, PROB_TOL};

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub name: &'static str,
    pub checked: usize,
    /// First few failures, formatted.
    pub violations: Vec<String>,
    pub violation_count: usize,
}

impl SuiteReport {
    fn new(name: &'static str) -> Self {
        SuiteReport {
            name,
            checked: 0,
            violations: Vec::new(),
            violation_count: 0,
        }
    }

    fn fail(&mut self, msg: String) {
        self.violation_count += 1;
        if self.violations.len() < 5 {
            self.violations.push(msg);
        }
    }

    pub fn passed(&self) -> bool {
        self.violation_count == 0
    }
}

impl std::fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let status = if self.passed() { "PASS" } else { "FAIL" };
        write!(f, "{status} {}: {} checks, {} violations", self.name, self.checked, self.violation_count)?;
        for v in &self.violations {
            write!(f, "\n    {v}")?;
        }
        Ok(())
    }
}

fn random_simplex<R: Rng + ?Sized>(n: usize, zero_prob: f64, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n)
            .map(|_| {
                if rng.random::<f64>() < zero_prob {
                    0.0
                } else {
                    Exp1.sample(rng)
                }
            })
            .collect();
        let total: f64 = v.iter().sum();
        if total > 0.0 {
            return v.into_iter().map(|x| x / total).collect();
        }
    }
}

/// Random scores and a random column-stochastic confusion matrix with a
/// sprinkling of exact zeros.
pub fn random_instance<R: Rng + ?Sized>(label_count: usize, rng: &mut R) -> (ProbVector, ConfusionMatrix) {
    let f = ProbVector::new(random_simplex(label_count, 0.1, rng)).expect("normalized");
    let columns: Vec<Vec<f64>> = (0..label_count).map(|_| random_simplex(label_count, 0.3, rng)).collect();
    let rows = (0..label_count)
        .map(|pred| (0..label_count).map(|truth| columns[truth][pred]).collect())
        .collect();
    let c = validate_confusion(rows, PROB_TOL).expect("normalized columns");
    (f, c)
}

/// Greedy value is at least every ranking-prefix value.
pub fn prefix_dominance_suite(instances: usize, max_labels: usize, seed: u64) -> Result<SuiteReport> {
    let mut report = SuiteReport::new("greedy dominates ranking prefixes");
    let mut rng = RngStream::new(seed, "verify/prefix");
    for i in 0..instances {
        let l = rng.random_range(2..=max_labels);
        let (f, c) = random_instance(l, &mut rng);
        let g = greedy_set(&f, &c)?;
        let best_prefix = chain_prefix_values(&f, &c)?
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max);
        report.checked += 1;
        if g.value + 1e-12 < best_prefix {
            report.fail(format!("instance {i} (L={l}): greedy {} < prefix {best_prefix}", g.value));
        }
    }
    Ok(report)
}

/// Incremental values and gains agree with from-scratch evaluation, and the
/// greedy evaluation count matches `L(L+1)(L+2)/6`.
pub fn incremental_suite(sequences: usize, max_labels: usize, seed: u64) -> Result<SuiteReport> {
    let mut report = SuiteReport::new("incremental objective matches from-scratch");
    let mut rng = RngStream::new(seed, "verify/incremental");
    for s in 0..sequences {
        let l = rng.random_range(1..=max_labels);
        let (f, c) = random_instance(l, &mut rng);
        let mut order: Vec<usize> = (0..l).collect();
        rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng);
        let len = rng.random_range(1..=l);
        let mut state = ObjectiveState::new(&f, &c)?;
        let mut members = Vec::new();
        for &y in &order[..len] {
            let before = expected_accuracy(&PredictionSet::from_indices(&members), &f, &c);
            let gain = state.marginal_gain(LabelId(y))?;
            state.commit(LabelId(y))?;
            members.push(y);
            let scratch = expected_accuracy(&PredictionSet::from_indices(&members), &f, &c);
            report.checked += 1;
            if (state.value() - scratch).abs() > 1e-12 || (gain - (scratch - before)).abs() > 1e-12 {
                report.fail(format!(
                    "sequence {s}: after {members:?} incremental {} (gain {gain}) vs scratch {scratch} (gain {})",
                    state.value(),
                    scratch - before
                ));
            }
        }
    }
    for l in 1..=15 {
        let (f, c) = random_instance(l, &mut rng);
        let g = greedy_set(&f, &c)?;
        report.checked += 1;
        if g.trace.evaluations != evaluation_count(l) {
            report.fail(format!("L={l}: {} evaluations, expected {}", g.trace.evaluations, evaluation_count(l)));
        }
    }
    Ok(report)
}

/// Reduction consistency on all subsets, optimum `ω/n`, threshold decisions
/// against the clique oracle, and monotone peeling, on Erdős–Rényi graphs.
pub fn hardness_suite(graphs: usize, seed: u64) -> Result<SuiteReport> {
    let mut report = SuiteReport::new("clique reduction");
    let mut rng = RngStream::new(seed, "verify/hardness");
    for gi in 0..graphs {
        let n = rng.random_range(4..=10);
        let p = rng.random_range(0.15..0.85);
        let g = Graph::erdos_renyi(n, p, &mut rng);
        let (omega, _) = max_clique_bruteforce(&g, DEFAULT_CLIQUE_CAP)?;
        let (best, _) = max_graph_objective(&g, DEFAULT_CLIQUE_CAP)?;

        report.checked += 1;
        let expected = Rational::new(omega as i128, n as i128);
        if best != expected || (rational_to_f64(&best) - omega as f64 / n as f64).abs() > 1e-12 {
            report.fail(format!("graph {gi}: max objective {best} but omega/n = {expected}"));
        }
        for k in 1..=n {
            report.checked += 1;
            if decide_threshold(&g, k, DEFAULT_CLIQUE_CAP)? != (omega >= k) {
                report.fail(format!("graph {gi}: threshold k={k} disagrees with omega={omega}"));
            }
        }
        for mask in 1u32..(1u32 << n) {
            let set = PredictionSet::new((0..n).filter(|&v| mask >> v & 1 == 1).map(LabelId));
            report.checked += 1;
            if !reduction_consistency(&set, &g)? {
                report.fail(format!("graph {gi}: set {set} inconsistent"));
            }
            if g.is_clique(&set) {
                continue;
            }
            // every maximal-non-neighbour member is a legal peel, not just the tie-broken one
            let value = graph_objective(&set, &g)?;
            let counts: Vec<(LabelId, usize)> = set.iter().map(|y| (y, g.non_adjacent_within(&set, y))).collect();
            let top = counts.iter().map(|&(_, c)| c).max().expect("nonempty");
            for &(y, _) in counts.iter().filter(|&&(_, c)| c == top) {
                report.checked += 1;
                let peeled = graph_objective(&set.without(y), &g)?;
                if peeled < value {
                    report.fail(format!("graph {gi}: peeling {y} from {set} drops {value} to {peeled}"));
                }
            }
        }
    }
    Ok(report)
}
