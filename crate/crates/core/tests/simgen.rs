use expert_sets::simgen::{
    gen_task, softmax_loss_and_gradient, split_indices, train_softmax, NoisyExpert, TaskConfig, TrainConfig,
};
use expert_sets::{LabelId, RngStream};

fn cfg(label_count: usize, class_sep: f64, sizes: (usize, usize, usize)) -> TaskConfig {
    TaskConfig {
        label_count,
        class_sep,
        train: sizes.0,
        calib: sizes.1,
        test: sizes.2,
        ..TaskConfig::default()
    }
}

/// Nearest empirical class mean over the informative coordinates.
fn nearest_centroid_accuracy(train: (&[Vec<f64>], &[LabelId]), test: (&[Vec<f64>], &[LabelId]), l: usize, d: usize) -> f64 {
    let mut sums = vec![vec![0.0; d]; l];
    let mut counts = vec![0.0; l];
    for (x, y) in train.0.iter().zip(train.1) {
        counts[y.0] += 1.0;
        for j in 0..d {
            sums[y.0][j] += x[j];
        }
    }
    let hits = test
        .0
        .iter()
        .zip(test.1)
        .filter(|(x, y)| {
            let dist = |c: usize| (0..d).map(|j| (x[j] - sums[c][j] / counts[c]).powi(2)).sum::<f64>();
            let best = (0..l).min_by(|&a, &b| dist(a).total_cmp(&dist(b))).unwrap();
            best == y.0
        })
        .count();
    hits as f64 / test.0.len() as f64
}

fn trained_accuracy(task_cfg: &TaskConfig, seed: u64) -> (f64, f64) {
    let mut rng = RngStream::new(seed, "simgen");
    let task = gen_task(task_cfg, &mut rng).unwrap();
    let parts = split_indices(task.len(), (task_cfg.train, task_cfg.calib, task_cfg.test), &mut rng).unwrap();
    let (xa, ya) = task.subset(&parts.train_a);
    let (xt, yt) = task.subset(&parts.test);
    let model = train_softmax(&xa, &ya, task_cfg.label_count, &TrainConfig::default()).unwrap().model;
    let oracle = nearest_centroid_accuracy((&xa, &ya), (&xt, &yt), task_cfg.label_count, task_cfg.d_informative);
    (model.accuracy(&xt, &yt), oracle)
}

#[test]
fn split_sizes_match_the_configuration() {
    let c = cfg(10, 1.0, (16_000, 1_000, 1_000));
    let mut rng = RngStream::new(3, "sizes");
    let task = gen_task(&c, &mut rng).unwrap();
    assert_eq!(task.len(), 18_000);
    assert!(task.features.iter().all(|x| x.len() == 20));
    let parts = split_indices(task.len(), (16_000, 1_000, 1_000), &mut rng).unwrap();
    assert_eq!(parts.train_a.len() + parts.train_b.len(), 16_000);
    assert_eq!((parts.calib.len(), parts.test.len()), (1_000, 1_000));
    let mut all: Vec<usize> = [parts.train_a, parts.train_b, parts.calib, parts.test].concat();
    all.sort_unstable();
    assert_eq!(all, (0..18_000).collect::<Vec<_>>());
}

#[test]
fn well_separated_classes_are_nearly_perfect() {
    let (model, oracle) = trained_accuracy(&cfg(10, 50.0, (2_000, 500, 1_000)), 4);
    assert!(oracle >= 0.99, "nearest centroid {oracle}");
    assert!(model >= 0.99, "softmax {model}");
}

#[test]
fn zero_separation_is_chance() {
    let (model, oracle) = trained_accuracy(&cfg(10, 0.0, (4_000, 500, 2_000)), 5);
    assert!((model - 0.1).abs() <= 0.05, "softmax {model}");
    assert!((oracle - 0.1).abs() <= 0.05, "nearest centroid {oracle}");
}

#[test]
fn difficulty_decreases_with_separation() {
    let accs: Vec<f64> = [0.5, 1.0, 1.5, 2.5]
        .iter()
        .map(|&sep| trained_accuracy(&cfg(10, sep, (4_000, 500, 2_000)), 6).0)
        .collect();
    assert!(accs.windows(2).all(|w| w[0] < w[1]), "{accs:?}");
}

#[test]
fn gradient_matches_central_differences() {
    let l = 4;
    let d = 5;
    let mut rng = RngStream::new(7, "grad");
    let task = gen_task(
        &TaskConfig {
            label_count: l,
            d_total: d,
            d_informative: 2,
            class_sep: 1.0,
            train: 40,
            calib: 5,
            test: 5,
        },
        &mut rng,
    )
    .unwrap();
    let weights: Vec<f64> = (0..l * (d + 1)).map(|i| ((i * 37 % 11) as f64 - 5.0) * 0.07).collect();
    let l2 = 1e-2;
    let (_, grad) = softmax_loss_and_gradient(&weights, &task.features, &task.labels, l, l2);
    let h = 1e-5;
    for k in (0..weights.len()).step_by(weights.len() / 10).take(10) {
        let mut plus = weights.clone();
        let mut minus = weights.clone();
        plus[k] += h;
        minus[k] -= h;
        let lp = softmax_loss_and_gradient(&plus, &task.features, &task.labels, l, l2).0;
        let lm = softmax_loss_and_gradient(&minus, &task.features, &task.labels, l, l2).0;
        let fd = (lp - lm) / (2.0 * h);
        let rel = (fd - grad[k]).abs() / fd.abs().max(grad[k].abs()).max(1e-8);
        assert!(rel <= 1e-4, "coordinate {k}: analytic {} vs numeric {fd}", grad[k]);
    }
}

#[test]
fn fully_noised_expert_is_less_accurate() {
    let c = cfg(10, 1.5, (4_000, 2_000, 500));
    let mut rng = RngStream::new(8, "expert");
    let task = gen_task(&c, &mut rng).unwrap();
    let parts = split_indices(task.len(), (c.train, c.calib, c.test), &mut rng).unwrap();
    let (xb, yb) = task.subset(&parts.train_b);
    let (xc, yc) = task.subset(&parts.calib);
    let diag = |gamma: f64| {
        let mut r = RngStream::new(9, "expert/predict");
        let expert = NoisyExpert::train(&xb, &yb, 10, gamma, &TrainConfig::default(), &mut r).unwrap();
        let hits = xc.iter().zip(&yc).filter(|(x, y)| expert.predict(x, &mut r) == **y).count();
        hits as f64 / xc.len() as f64
    };
    let clean = diag(0.0);
    let noisy = diag(1.0);
    assert!(noisy < clean - 0.05, "gamma 0: {clean}, gamma 1: {noisy}");
}
