//! Synthetic classification tasks, a softmax-regression trainer, and the
//! noised-feature protocol that produces simulated experts of varying skill.
//!
//! Tasks place each class on its own vertex of a hypercube spanning the
//! informative features (side `2 · class_sep`), draw unit-variance Gaussian
//! samples around the vertices, and pad with pure-noise features.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::types::{count_pairs, normalize_counts, ConfusionMatrix, Dataset, LabelId, ProbVector, Split};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskConfig {
    pub label_count: usize,
    #[serde(default = "default_d_total")]
    pub d_total: usize,
    #[serde(default = "default_d_informative")]
    pub d_informative: usize,
    #[serde(default = "default_class_sep")]
    pub class_sep: f64,
    #[serde(default = "default_train")]
    pub train: usize,
    #[serde(default = "default_calib")]
    pub calib: usize,
    #[serde(default = "default_test")]
    pub test: usize,
}

fn default_d_total() -> usize {
    20
}
fn default_d_informative() -> usize {
    4
}
fn default_class_sep() -> f64 {
    1.0
}
fn default_train() -> usize {
    16_000
}
fn default_calib() -> usize {
    1_000
}
fn default_test() -> usize {
    1_000
}

impl Default for TaskConfig {
    fn default() -> Self {
        TaskConfig {
            label_count: 10,
            d_total: default_d_total(),
            d_informative: default_d_informative(),
            class_sep: default_class_sep(),
            train: default_train(),
            calib: default_calib(),
            test: default_test(),
        }
    }
}

impl TaskConfig {
    pub fn total(&self) -> usize {
        self.train + self.calib + self.test
    }

    pub fn validate(&self) -> Result<()> {
        if self.label_count < 2 {
            return Err(Error::TooFewLabels {
                min: 2,
                got: self.label_count,
            });
        }
        if self.d_informative == 0 || self.d_informative > self.d_total {
            return Err(Error::Config(format!(
                "d_informative = {} must lie in 1..={}",
                self.d_informative, self.d_total
            )));
        }
        if self.d_informative < usize::BITS as usize && (1usize << self.d_informative) < self.label_count {
            return Err(Error::TooManyClassesForHypercube {
                classes: self.label_count,
                dims: self.d_informative,
            });
        }
        if !(self.class_sep >= 0.0 && self.class_sep.is_finite()) {
            return Err(Error::Config(format!("class_sep must be >= 0, got {}", self.class_sep)));
        }
        if self.train < 2 || self.calib == 0 || self.test == 0 {
            return Err(Error::Config("train (>= 2), calib and test sizes must be positive".into()));
        }
        Ok(())
    }
}

/// Raw features and labels of a generated task, in shuffled order.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticTask {
    pub label_count: usize,
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<LabelId>,
}

impl SyntheticTask {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn subset(&self, indices: &[usize]) -> (Vec<Vec<f64>>, Vec<LabelId>) {
        (
            indices.iter().map(|&i| self.features[i].clone()).collect(),
            indices.iter().map(|&i| self.labels[i]).collect(),
        )
    }
}

/// Generates `cfg.total()` balanced samples.
///
/// The sequence of random draws does not depend on `class_sep`, so tasks
/// generated from equal streams differ only in how far apart the classes are.
pub fn gen_task(cfg: &TaskConfig, rng: &mut RngStream) -> Result<SyntheticTask> {
    cfg.validate()?;
    let l = cfg.label_count;
    let d_inf = cfg.d_informative;

    // distinct vertices of {-1, +1}^d_inf, chosen at random
    let vertex_count = 1usize << d_inf.min(20);
    let mut vertices: Vec<usize> = (0..vertex_count).collect();
    vertices.shuffle(rng);
    let centroids: Vec<Vec<f64>> = vertices[..l]
        .iter()
        .map(|&v| {
            (0..d_inf)
                .map(|bit| if v >> bit & 1 == 1 { cfg.class_sep } else { -cfg.class_sep })
                .collect()
        })
        .collect();

    let n = cfg.total();
    let mut labels: Vec<LabelId> = (0..n).map(|i| LabelId(i % l)).collect();
    labels.shuffle(rng);
    let features = labels
        .iter()
        .map(|y| {
            (0..cfg.d_total)
                .map(|j| {
                    let noise: f64 = rng.sample(StandardNormal);
                    if j < d_inf {
                        centroids[y.0][j] + noise
                    } else {
                        noise
                    }
                })
                .collect()
        })
        .collect();
    Ok(SyntheticTask {
        label_count: l,
        features,
        labels,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "default_l2")]
    pub l2: f64,
}

fn default_epochs() -> usize {
    500
}
fn default_learning_rate() -> f64 {
    0.5
}
fn default_l2() -> f64 {
    1e-4
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: default_epochs(),
            learning_rate: default_learning_rate(),
            l2: default_l2(),
        }
    }
}

/// Multinomial logistic regression. Row `c` of `weights` holds the feature
/// weights of class `c` followed by its bias.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxModel {
    label_count: usize,
    dim: usize,
    weights: Vec<f64>,
}

impl SoftmaxModel {
    pub fn zeros(label_count: usize, dim: usize) -> Self {
        SoftmaxModel {
            label_count,
            dim,
            weights: vec![0.0; label_count * (dim + 1)],
        }
    }

    pub fn from_weights(label_count: usize, dim: usize, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != label_count * (dim + 1) {
            return Err(Error::DimensionMismatch {
                expected: label_count * (dim + 1),
                got: weights.len(),
            });
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::Config("model weights must be finite".into()));
        }
        Ok(SoftmaxModel {
            label_count,
            dim,
            weights,
        })
    }

    pub fn label_count(&self) -> usize {
        self.label_count
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn scores(&self, x: &[f64]) -> Vec<f64> {
        logits(&self.weights, self.dim, self.label_count, x)
    }

    pub fn predict(&self, x: &[f64]) -> LabelId {
        let z = self.scores(x);
        let best = z
            .iter()
            .enumerate()
            .fold(0, |b, (i, &v)| if v > z[b] { i } else { b });
        LabelId(best)
    }

    pub fn accuracy(&self, features: &[Vec<f64>], labels: &[LabelId]) -> f64 {
        let hits = features
            .iter()
            .zip(labels)
            .filter(|(x, &y)| self.predict(x) == y)
            .count();
        hits as f64 / labels.len().max(1) as f64
    }
}

fn logits(weights: &[f64], dim: usize, label_count: usize, x: &[f64]) -> Vec<f64> {
    (0..label_count)
        .map(|c| {
            let row = &weights[c * (dim + 1)..(c + 1) * (dim + 1)];
            row[..dim].iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + row[dim]
        })
        .collect()
}

fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    z.iter_mut().for_each(|v| *v /= total);
}

pub fn predict_proba(model: &SoftmaxModel, x: &[f64]) -> ProbVector {
    let mut z = model.scores(x);
    softmax_in_place(&mut z);
    ProbVector::new(z).expect("softmax output is a probability vector")
}

/// Mean cross-entropy plus `l2/2 · ‖W‖²` (biases unpenalized), and its
/// gradient with respect to the flattened weights.
pub fn softmax_loss_and_gradient(
    weights: &[f64],
    features: &[Vec<f64>],
    labels: &[LabelId],
    label_count: usize,
    l2: f64,
) -> (f64, Vec<f64>) {
    let dim = weights.len() / label_count - 1;
    let stride = dim + 1;
    let n = features.len() as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; weights.len()];
    for (x, y) in features.iter().zip(labels) {
        let mut p = logits(weights, dim, label_count, x);
        let max = p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let log_norm = max + p.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        loss -= p[y.0] - log_norm;
        p.iter_mut().for_each(|v| *v = (*v - log_norm).exp());
        p[y.0] -= 1.0;
        for (c, &residual) in p.iter().enumerate() {
            let row = &mut grad[c * stride..(c + 1) * stride];
            for (g, v) in row[..dim].iter_mut().zip(x) {
                *g += residual * v;
            }
            row[dim] += residual;
        }
    }
    loss /= n;
    grad.iter_mut().for_each(|g| *g /= n);
    for c in 0..label_count {
        for j in 0..dim {
            let w = weights[c * stride + j];
            loss += 0.5 * l2 * w * w;
            grad[c * stride + j] += l2 * w;
        }
    }
    (loss, grad)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedSoftmax {
    pub model: SoftmaxModel,
    /// Training objective before every epoch and after the last one
    /// (in the standardized feature space the optimizer works in).
    pub losses: Vec<f64>,
}

/// Full-batch gradient descent on the penalized cross-entropy.
///
/// Features are standardized internally with the training mean and standard
/// deviation; the returned model folds that transform back into its weights
/// and consumes raw features.
pub fn train_softmax(
    features: &[Vec<f64>],
    labels: &[LabelId],
    label_count: usize,
    cfg: &TrainConfig,
) -> Result<TrainedSoftmax> {
    if features.is_empty() || features.len() != labels.len() {
        return Err(Error::Config(format!(
            "training needs matching nonempty data, got {} rows and {} labels",
            features.len(),
            labels.len()
        )));
    }
    let dim = features[0].len();
    if let Some(bad) = features.iter().find(|x| x.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: bad.len(),
        });
    }
    if let Some(y) = labels.iter().find(|y| y.0 >= label_count) {
        return Err(Error::LabelOutOfBounds {
            label: y.0,
            label_count,
        });
    }

    let n = features.len() as f64;
    let mean: Vec<f64> = (0..dim)
        .map(|j| features.iter().map(|x| x[j]).sum::<f64>() / n)
        .collect();
    let scale: Vec<f64> = (0..dim)
        .map(|j| {
            let var = features.iter().map(|x| (x[j] - mean[j]).powi(2)).sum::<f64>() / n;
            if var > 0.0 {
                var.sqrt()
            } else {
                1.0
            }
        })
        .collect();
    let standardized: Vec<Vec<f64>> = features
        .iter()
        .map(|x| x.iter().enumerate().map(|(j, v)| (v - mean[j]) / scale[j]).collect())
        .collect();

    let mut w = vec![0.0; label_count * (dim + 1)];
    let mut losses = Vec::with_capacity(cfg.epochs + 1);
    for epoch in 0..=cfg.epochs {
        let (loss, grad) = softmax_loss_and_gradient(&w, &standardized, labels, label_count, cfg.l2);
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { epoch, loss });
        }
        losses.push(loss);
        if epoch == cfg.epochs {
            break;
        }
        for (wi, gi) in w.iter_mut().zip(&grad) {
            *wi -= cfg.learning_rate * gi;
        }
    }

    let stride = dim + 1;
    let mut raw = vec![0.0; w.len()];
    for c in 0..label_count {
        let mut bias = w[c * stride + dim];
        for j in 0..dim {
            let wj = w[c * stride + j] / scale[j];
            raw[c * stride + j] = wj;
            bias -= wj * mean[j];
        }
        raw[c * stride + dim] = bias;
    }
    Ok(TrainedSoftmax {
        model: SoftmaxModel::from_weights(label_count, dim, raw)?,
        losses,
    })
}

/// Index of the informative feature the expert protocol corrupts.
pub const NOISED_FEATURE: usize = 0;

/// A classifier standing in for a human expert: trained on, and queried
/// with, features whose first informative coordinate `a` is replaced by
/// `(1 − γ) a + γ ε`, `ε ~ N(0, 1)` drawn afresh for every sample.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisyExpert {
    pub model: SoftmaxModel,
    pub gamma: f64,
}

fn noised<R: Rng + ?Sized>(x: &[f64], gamma: f64, rng: &mut R) -> Vec<f64> {
    let mut out = x.to_vec();
    let eps: f64 = rng.sample(StandardNormal);
    out[NOISED_FEATURE] = (1.0 - gamma) * out[NOISED_FEATURE] + gamma * eps;
    out
}

impl NoisyExpert {
    pub fn train(
        features: &[Vec<f64>],
        labels: &[LabelId],
        label_count: usize,
        gamma: f64,
        cfg: &TrainConfig,
        rng: &mut RngStream,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::Config(format!("gamma must lie in [0, 1], got {gamma}")));
        }
        let noisy: Vec<Vec<f64>> = features.iter().map(|x| noised(x, gamma, rng)).collect();
        let trained = train_softmax(&noisy, labels, label_count, cfg)?;
        Ok(NoisyExpert {
            model: trained.model,
            gamma,
        })
    }

    pub fn predict<R: Rng + ?Sized>(&self, x: &[f64], rng: &mut R) -> LabelId {
        self.model.predict(&noised(x, self.gamma, rng))
    }
}

/// Trains a noisy expert on `train` and returns the confusion matrix of its
/// (noised) predictions on `calib`.
#[allow(clippy::too_many_arguments)]
pub fn gen_expert_confusion(
    train: (&[Vec<f64>], &[LabelId]),
    calib: (&[Vec<f64>], &[LabelId]),
    label_count: usize,
    gamma: f64,
    smoothing: f64,
    cfg: &TrainConfig,
    rng: &mut RngStream,
) -> Result<ConfusionMatrix> {
    let expert = NoisyExpert::train(train.0, train.1, label_count, gamma, cfg, rng)?;
    let predictions: Vec<LabelId> = calib.0.iter().map(|x| expert.predict(x, rng)).collect();
    let counts = count_pairs(predictions.into_iter().zip(calib.1.iter().copied()), label_count);
    normalize_counts(&counts, smoothing)
}

/// Index partition produced by [`split_indices`]. The training part is
/// further halved: `train_a` fits the classifier, `train_b` the expert.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    pub train_a: Vec<usize>,
    pub train_b: Vec<usize>,
    pub calib: Vec<usize>,
    pub test: Vec<usize>,
}

/// Uniform shuffle of `0..n` cut into `(train, calib, test)` blocks.
pub fn split_indices(n: usize, sizes: (usize, usize, usize), rng: &mut RngStream) -> Result<SplitIndices> {
    let (train, calib, test) = sizes;
    if train + calib + test != n {
        return Err(Error::SizeMismatch {
            sizes: train + calib + test,
            records: n,
        });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let half = train / 2;
    Ok(SplitIndices {
        train_a: order[..half].to_vec(),
        train_b: order[half..train].to_vec(),
        calib: order[train..train + calib].to_vec(),
        test: order[train + calib..].to_vec(),
    })
}

/// Tags every record of `ds` with a split drawn by [`split_indices`].
pub fn split_dataset(ds: Dataset, sizes: (usize, usize, usize), rng: &mut RngStream) -> Result<Dataset> {
    let parts = split_indices(ds.len(), sizes, rng)?;
    let ids: Vec<String> = ds.records().iter().map(|r| r.id.clone()).collect();
    let mut splits = std::collections::BTreeMap::new();
    for (indices, split) in [
        (&parts.train_a, Split::Train),
        (&parts.train_b, Split::Train),
        (&parts.calib, Split::Calib),
        (&parts.test, Split::Test),
    ] {
        for &i in indices {
            splits.insert(ids[i].clone(), split);
        }
    }
    ds.with_splits(splits)
}

/// Finds a `class_sep` whose trained classifier reaches `target` test
/// accuracy, by bisection on `[0, 8]`.
///
/// Every probe regenerates the task from the same stream, so probes differ
/// only in the separation. Stops once a probe lands within `tol / 2`.
pub fn tune_class_sep(
    base: &TaskConfig,
    target: f64,
    tol: f64,
    train_cfg: &TrainConfig,
    stream: &RngStream,
) -> Result<(f64, f64)> {
    if !(0.0..1.0).contains(&target) {
        return Err(Error::Config(format!("target accuracy must lie in [0, 1), got {target}")));
    }
    let probe = |sep: f64| -> Result<f64> {
        let cfg = TaskConfig {
            class_sep: sep,
            ..base.clone()
        };
        let mut rng = stream.clone();
        let task = gen_task(&cfg, &mut rng)?;
        let parts = split_indices(task.len(), (cfg.train, cfg.calib, cfg.test), &mut rng)?;
        let (xa, ya) = task.subset(&parts.train_a);
        let model = train_softmax(&xa, &ya, cfg.label_count, train_cfg)?.model;
        let mut eval = parts.calib.clone();
        eval.extend(&parts.test);
        let (xt, yt) = task.subset(&eval);
        Ok(model.accuracy(&xt, &yt))
    };
    let (mut lo, mut hi) = (0.0f64, 8.0f64);
    let mut best = (hi, probe(hi)?);
    for _ in 0..24 {
        let mid = 0.5 * (lo + hi);
        let acc = probe(mid)?;
        if (acc - target).abs() < (best.1 - target).abs() {
            best = (mid, acc);
        }
        if (acc - target).abs() <= tol / 2.0 {
            break;
        }
        if acc < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg(label_count: usize, class_sep: f64) -> TaskConfig {
        TaskConfig {
            label_count,
            class_sep,
            train: 600,
            calib: 200,
            test: 200,
            ..TaskConfig::default()
        }
    }

    #[test]
    fn same_seed_gives_identical_tasks() {
        let cfg = small_cfg(5, 1.0);
        let a = gen_task(&cfg, &mut RngStream::new(1, "t")).unwrap();
        let b = gen_task(&cfg, &mut RngStream::new(1, "t")).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn classes_are_balanced() {
        let cfg = TaskConfig {
            train: 503,
            ..small_cfg(7, 1.0)
        };
        let task = gen_task(&cfg, &mut RngStream::new(2, "t")).unwrap();
        let mut counts = [0usize; 7];
        task.labels.iter().for_each(|y| counts[y.0] += 1);
        let (min, max) = (counts.iter().min().unwrap(), counts.iter().max().unwrap());
        assert!(max - min <= 1);
    }

    #[test]
    fn too_many_classes_rejected() {
        let cfg = TaskConfig {
            label_count: 17,
            ..TaskConfig::default()
        };
        assert!(matches!(
            gen_task(&cfg, &mut RngStream::new(0, "t")),
            Err(Error::TooManyClassesForHypercube { classes: 17, dims: 4 })
        ));
    }

    #[test]
    fn zero_epochs_gives_uniform_predictions() {
        let cfg = small_cfg(4, 1.0);
        let task = gen_task(&cfg, &mut RngStream::new(3, "t")).unwrap();
        let trained = train_softmax(
            &task.features,
            &task.labels,
            4,
            &TrainConfig {
                epochs: 0,
                ..TrainConfig::default()
            },
        )
        .unwrap();
        assert!(trained.model.weights().iter().all(|&w| w == 0.0));
        assert_eq!(predict_proba(&trained.model, &task.features[0]), ProbVector::uniform(4));
    }

    #[test]
    fn softmax_is_shift_invariant() {
        let dim = 3;
        let mut w: Vec<f64> = (0..3 * (dim + 1)).map(|i| (i as f64 * 0.37).sin()).collect();
        let x = [0.3, -1.2, 2.0];
        let before = predict_proba(&SoftmaxModel::from_weights(3, dim, w.clone()).unwrap(), &x);
        // adding the same bias to every class shifts all scores equally
        for c in 0..3 {
            w[c * (dim + 1) + dim] += 5.0;
        }
        let after = predict_proba(&SoftmaxModel::from_weights(3, dim, w).unwrap(), &x);
        for (a, b) in before.as_slice().iter().zip(after.as_slice()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn scaling_weights_sharpens_prediction() {
        let w = vec![1.0, 0.0, 0.0, -1.0, 0.0, 0.0];
        let x = [0.5, 0.2];
        let m1 = SoftmaxModel::from_weights(2, 2, w.clone()).unwrap();
        let m10 = SoftmaxModel::from_weights(2, 2, w.iter().map(|v| v * 10.0).collect()).unwrap();
        let (p1, p10) = (predict_proba(&m1, &x), predict_proba(&m10, &x));
        assert_eq!(p1.argmax(), p10.argmax());
        assert!(p10.get(p10.argmax()) > p1.get(p1.argmax()));
    }

    #[test]
    fn separable_toy_is_learned_perfectly() {
        let mut rng = RngStream::new(4, "toy");
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for i in 0..200 {
            let y = i % 2;
            let c = if y == 0 { -4.0 } else { 4.0 };
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            features.push(vec![c + a, c + b]);
            labels.push(LabelId(y));
        }
        let trained = train_softmax(&features, &labels, 2, &TrainConfig::default()).unwrap();
        assert_eq!(trained.model.accuracy(&features, &labels), 1.0);
        assert!(trained.losses.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn divergence_is_reported() {
        let features = vec![vec![1.0, -1.0], vec![-1.0, 1.0]];
        let labels = vec![LabelId(0), LabelId(1)];
        let cfg = TrainConfig {
            epochs: 50,
            learning_rate: 1e300,
            l2: 1e300,
        };
        assert!(matches!(
            train_softmax(&features, &labels, 2, &cfg),
            Err(Error::NonFiniteLoss { .. })
        ));
    }

    #[test]
    fn split_partitions() {
        let s = split_indices(10, (6, 2, 2), &mut RngStream::new(5, "s")).unwrap();
        let mut all: Vec<usize> = [&s.train_a, &s.train_b, &s.calib, &s.test]
            .into_iter()
            .flatten()
            .copied()
            .collect();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert_eq!((s.train_a.len(), s.train_b.len()), (3, 3));
        let again = split_indices(10, (6, 2, 2), &mut RngStream::new(5, "s")).unwrap();
        assert_eq!(s, again);
        assert!(split_indices(2, (1, 1, 0), &mut RngStream::new(5, "s")).is_ok());
        assert!(matches!(
            split_indices(10, (6, 2, 1), &mut RngStream::new(5, "s")),
            Err(Error::SizeMismatch { sizes: 9, records: 10 })
        ));
    }

    #[test]
    fn zero_gamma_confusion_diagonal_is_accuracy() {
        let cfg = small_cfg(4, 1.5);
        let mut rng = RngStream::new(6, "expert");
        let task = gen_task(&cfg, &mut rng).unwrap();
        let parts = split_indices(task.len(), (cfg.train, cfg.calib, cfg.test), &mut rng).unwrap();
        let (xb, yb) = task.subset(&parts.train_b);
        let (xc, yc) = task.subset(&parts.calib);
        let train_cfg = TrainConfig {
            epochs: 100,
            ..TrainConfig::default()
        };
        let mut expert_rng = RngStream::new(6, "noise");
        let c = gen_expert_confusion((&xb, &yb), (&xc, &yc), 4, 0.0, 0.0, &train_cfg, &mut expert_rng).unwrap();
        let expert = train_softmax(&xb, &yb, 4, &train_cfg).unwrap().model;
        // per-class recall, weighted by class frequency, is the accuracy
        let mut per_class = vec![0usize; 4];
        yc.iter().for_each(|y| per_class[y.0] += 1);
        let weighted: f64 = c
            .diagonal()
            .iter()
            .zip(&per_class)
            .map(|(d, &k)| d * k as f64)
            .sum::<f64>()
            / yc.len() as f64;
        assert!((weighted - expert.accuracy(&xc, &yc)).abs() < 1e-12);
    }
}
