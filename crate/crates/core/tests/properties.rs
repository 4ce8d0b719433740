use expert_sets::calibration::{apply_topk, fit_topk};
use expert_sets::conformal::{calibration_quantile, conformal_set, ConformalThreshold, ScoreKind};
use expert_sets::ingest::{format_scored_dataset, parse_scored_dataset};
use expert_sets::objective::{expected_accuracy, ObjectiveState};
use expert_sets::optimizer::{brute_force_set, chain_prefix_values, greedy_set};
use expert_sets::types::count_pairs;
use expert_sets::verify::random_instance;
use expert_sets::{normalize_counts, Dataset, InstanceRecord, LabelId, PredictionSet, ProbVector, RngStream};
use proptest::prelude::*;
use std::path::Path;

fn instance(seed: u64, l: usize) -> (ProbVector, expert_sets::ConfusionMatrix) {
    random_instance(l, &mut RngStream::new(seed, "prop"))
}

fn simplex(raw: Vec<f64>) -> ProbVector {
    let total: f64 = raw.iter().sum();
    ProbVector::new(raw.iter().map(|v| v / total).collect()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn greedy_dominates_every_prefix(seed in any::<u64>(), l in 2usize..=12) {
        let (f, c) = instance(seed, l);
        let g = greedy_set(&f, &c).unwrap();
        for v in chain_prefix_values(&f, &c).unwrap() {
            prop_assert!(g.value + 1e-12 >= v);
        }
    }

    #[test]
    fn greedy_never_beats_brute_force(seed in any::<u64>(), l in 1usize..=9) {
        let (f, c) = instance(seed, l);
        let g = greedy_set(&f, &c).unwrap();
        let (set, best) = brute_force_set(&f, &c, 20).unwrap();
        prop_assert!(g.value <= best + 1e-12);
        prop_assert!((expected_accuracy(&set, &f, &c) - best).abs() < 1e-12);
        prop_assert!(!set.is_empty());
    }

    #[test]
    fn incremental_matches_scratch(seed in any::<u64>(), l in 1usize..=12, order in Just(()).prop_perturb(|_, mut rng| {
        let mut v: Vec<usize> = (0..12).collect();
        for i in (1..v.len()).rev() { v.swap(i, rng.random_range(0..=i)); }
        v
    })) {
        let (f, c) = instance(seed, l);
        let mut state = ObjectiveState::new(&f, &c).unwrap();
        let mut members = Vec::new();
        for y in order.into_iter().filter(|&y| y < l) {
            let gain = state.marginal_gain(LabelId(y)).unwrap();
            let before = state.value();
            state.commit(LabelId(y)).unwrap();
            members.push(y);
            let scratch = expected_accuracy(&PredictionSet::from_indices(&members), &f, &c);
            prop_assert!((state.value() - scratch).abs() <= 1e-12);
            prop_assert!((before + gain - scratch).abs() <= 1e-12);
        }
    }

    #[test]
    fn objective_is_bounded(seed in any::<u64>(), l in 1usize..=10, mask in any::<u16>()) {
        let (f, c) = instance(seed, l);
        let set = PredictionSet::new((0..l).filter(|&y| mask >> y & 1 == 1).map(LabelId));
        let v = expected_accuracy(&set, &f, &c);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&v));
    }

    #[test]
    fn conformal_sets_are_nested_prefixes(
        raw in prop::collection::vec(prop_oneof![Just(0.0f64), 0.001f64..1.0], 2..12),
        q1 in 0.0f64..1.2,
        q2 in 0.0f64..1.2,
    ) {
        prop_assume!(raw.iter().any(|&v| v > 0.0));
        let f = simplex(raw);
        let order = f.ranking();
        let (lo, hi) = if q1 <= q2 { (q1, q2) } else { (q2, q1) };
        for kind in ScoreKind::ALL {
            let t = |q| ConformalThreshold { q_hat: q, alpha: 0.1, m: 10 };
            let small = conformal_set(&f, &t(lo), kind);
            let large = conformal_set(&f, &t(hi), kind);
            prop_assert!(small.iter().all(|y| large.contains(y)));
            for s in [&small, &large] {
                let prefix = PredictionSet::new(order[..s.len()].iter().copied());
                prop_assert_eq!(s, &prefix);
            }
            let fallback = conformal_set(&f, &t(f64::NEG_INFINITY), kind);
            prop_assert_eq!(fallback.indices(), vec![order[0].0]);
        }
    }

    #[test]
    fn quantile_is_an_order_statistic(scores in prop::collection::vec(0.0f64..1.0, 1..60), alpha in 0.0f64..=1.0) {
        let t = calibration_quantile(&scores, alpha).unwrap();
        if t.q_hat.is_finite() {
            prop_assert!(scores.contains(&t.q_hat));
            let at_or_below = scores.iter().filter(|&&s| s <= t.q_hat).count() as f64;
            prop_assert!(at_or_below >= ((scores.len() + 1) as f64 * (1.0 - alpha) - 1e-9).ceil());
        }
    }

    #[test]
    fn normalized_counts_are_column_stochastic(
        pairs in prop::collection::vec((0usize..5, 0usize..5), 1..200),
        smoothing in 0.1f64..2.0,
    ) {
        let counts = count_pairs(pairs.iter().map(|&(p, t)| (LabelId(p), LabelId(t))), 5);
        let c = normalize_counts(&counts, smoothing).unwrap();
        for y in 0..5 {
            let col = c.column(LabelId(y));
            prop_assert!((col.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert!(col.iter().all(|&v| v > 0.0));
        }
    }
}

#[test]
fn calibrated_vectors_are_valid_and_rank_preserving() {
    let mut rng = RngStream::new(11, "calibration");
    let l = 8;
    let mut scores = Vec::new();
    let mut labels = Vec::new();
    for _ in 0..2000 {
        let (f, _) = random_instance(l, &mut rng);
        // the true label follows the scores, so the scores are roughly calibrated
        let u: f64 = rand::Rng::random(&mut rng);
        let mut acc = 0.0;
        let mut y = l - 1;
        for (i, &p) in f.as_slice().iter().enumerate() {
            acc += p;
            if u < acc {
                y = i;
                break;
            }
        }
        scores.push(f);
        labels.push(LabelId(y));
    }
    let cal = fit_topk(&scores, &labels, 5, 10).unwrap();
    for _ in 0..1000 {
        let (f, _) = random_instance(l, &mut rng);
        let out = apply_topk(&cal, &f).unwrap();
        let v = out.as_slice();
        assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(v.iter().all(|&p| (0.0..=1.0).contains(&p)));
        let order = f.ranking();
        for w in order[..5].windows(2) {
            assert!(out.get(w[0]) >= out.get(w[1]), "top-k order inverted");
        }
        let kth = out.get(order[4]);
        assert!(order[5..].iter().all(|&y| out.get(y) <= kth + 1e-15));
    }
}

#[test]
fn calibrated_scores_recover_bin_frequencies() {
    // perfectly calibrated binary scores: the top label is right with probability equal to its score
    let mut rng = RngStream::new(12, "bins");
    let mut scores = Vec::new();
    let mut labels = Vec::new();
    for _ in 0..10_000 {
        let p: f64 = rand::Rng::random_range(&mut rng, 0.5..1.0);
        let u: f64 = rand::Rng::random(&mut rng);
        scores.push(ProbVector::new(vec![p, 1.0 - p]).unwrap());
        labels.push(LabelId(if u < p { 0 } else { 1 }));
    }
    let cal = fit_topk(&scores, &labels, 1, 10).unwrap();
    let r = &cal.ranks()[0];
    for b in 0..r.values.len() {
        let members: Vec<f64> = scores
            .iter()
            .map(|f| f.as_slice()[0])
            .filter(|&p| r.bin_of(p) == b)
            .collect();
        let bin_mean = members.iter().sum::<f64>() / members.len() as f64;
        assert!((r.values[b] - bin_mean).abs() < 0.05, "bin {b}: {} vs {bin_mean}", r.values[b]);
    }
}

#[test]
fn dataset_round_trip_is_lossless() {
    let mut rng = RngStream::new(13, "roundtrip");
    for l in [2usize, 3, 7, 10] {
        let records: Vec<InstanceRecord> = (0..50)
            .map(|i| {
                let (f, _) = random_instance(l, &mut rng);
                InstanceRecord {
                    id: format!("r{i}"),
                    scores: f,
                    true_label: LabelId(i % l),
                    human_pred: if i % 3 == 0 { None } else { Some(LabelId((i * 7) % l)) },
                    noise_tag: if i % 2 == 0 { Some(80.0 + i as f64 * 0.1) } else { None },
                }
            })
            .collect();
        let ds = Dataset::new(l, records).unwrap();
        let text = format_scored_dataset(&ds);
        let back = parse_scored_dataset(&text, Path::new("mem")).unwrap();
        assert_eq!(back, ds);
        assert_eq!(format_scored_dataset(&back), text);
    }
}
