use std::collections::BTreeMap;

use rayon::prelude::*;

use super::config::{
    calibration_minimum, CalibrationSpec, Evaluation, ExperimentConfig, ExpertSource, GenerateSpec, GridSpec, Method,
    TaskSource,
};
use crate::calibration::{apply_topk, fit_topk};
use crate::conformal::{calibration_quantile, calibration_scores, conformal_set, ConformalThreshold, ScoreKind};
use crate::error::{Error, Result};
use crate::ingest::{load_confusion, load_scored_dataset};
use crate::objective::{expected_accuracy, expert_success_probability, mnl_choice_distribution};
use crate::optimizer::{brute_force_set, greedy_set};
use crate::rng::RngStream;
use crate::simgen::{
    gen_expert_confusion, gen_task, predict_proba, split_indices, train_softmax, tune_class_sep, NoisyExpert,
    SoftmaxModel, SplitIndices, SyntheticTask, TrainConfig,
};
use crate::types::{
    count_pairs, normalize_counts, ConfusionMatrix, Dataset, InstanceRecord, LabelId, PredictionSet, ProbVector, Split,
};

use rand::seq::SliceRandom;

/// Slack allowed when comparing objective values computed along different paths.
pub const AUDIT_SLACK: f64 = 1e-12;

/// Everything one run needs after data preparation: uncalibrated scores and
/// the confusion matrix that both drives the optimizers and simulates the expert.
#[derive(Debug, Clone)]
pub struct RunInputs {
    pub calib_scores: Vec<ProbVector>,
    pub calib_labels: Vec<LabelId>,
    pub test_ids: Vec<String>,
    pub test_scores: Vec<ProbVector>,
    pub test_labels: Vec<LabelId>,
    pub confusion: ConfusionMatrix,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InstanceOutcome {
    pub truth: LabelId,
    /// Expected (analytic) or sampled (Monte Carlo) expert accuracy.
    pub accuracy: f64,
    /// `ĝ` of the set under the calibrated scores.
    pub objective: f64,
    pub size: usize,
    pub covered: bool,
    /// Whether the set holds both the truth and the label most confused with it.
    pub pair_included: bool,
}

/// Per-α means over the test instances of one run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaStats {
    pub accuracy: f64,
    pub objective: f64,
    pub set_size: f64,
    pub coverage: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub run: usize,
    pub test_ids: Vec<String>,
    pub test_labels: Vec<LabelId>,
    pub calibrated_test: Vec<ProbVector>,
    pub confusion: ConfusionMatrix,
    /// Top-1 accuracy of the uncalibrated classifier on the test split.
    pub classifier_accuracy: f64,
    /// Per-instance outcomes; conformal methods appear once a headline α is chosen.
    pub instances: BTreeMap<Method, Vec<InstanceOutcome>>,
    pub alpha_stats: BTreeMap<ScoreKind, Vec<AlphaStats>>,
    pub thresholds: BTreeMap<ScoreKind, Vec<ConformalThreshold>>,
    evaluation: Evaluation,
    stream: RngStream,
}

fn mean(values: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, n) = values.into_iter().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Mean and sample standard deviation (zero for a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let m = mean(values.iter().copied());
    if values.len() < 2 {
        return (m, 0.0);
    }
    let var = values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (values.len() - 1) as f64;
    (m, var.sqrt())
}

fn accuracy_of(
    set: &PredictionSet,
    truth: LabelId,
    c: &ConfusionMatrix,
    evaluation: Evaluation,
    stream: &RngStream,
    key: &str,
) -> Result<f64> {
    match evaluation {
        Evaluation::Analytic => expert_success_probability(set, truth, c),
        Evaluation::MonteCarlo { draws } => {
            let dist = mnl_choice_distribution(set, truth, c)?;
            let mut rng = stream.substream(key);
            let hits = (0..draws).filter(|_| dist.sample(&mut rng) == truth).count();
            Ok(hits as f64 / draws as f64)
        }
    }
}

fn outcome(
    set: &PredictionSet,
    objective: f64,
    truth: LabelId,
    partner: Option<LabelId>,
    accuracy: f64,
) -> InstanceOutcome {
    let covered = set.contains(truth);
    InstanceOutcome {
        truth,
        accuracy,
        objective,
        size: set.len(),
        covered,
        pair_included: covered && partner.is_some_and(|p| set.contains(p)),
    }
}

fn conformal_key(i: usize, kind: ScoreKind, alpha_index: usize) -> String {
    format!("mc/{i}/{kind}/{alpha_index}")
}

struct InstanceResult {
    fixed: Vec<(Method, InstanceOutcome)>,
    /// Per kind, per α: (accuracy, objective, size, covered).
    conformal: Vec<Vec<(f64, f64, usize, bool)>>,
}

/// Calibrates, builds every requested set for every test instance, audits
/// greedy against the conformal sets and scores the simulated expert.
pub fn evaluate_run(cfg: &ExperimentConfig, run: usize, inputs: RunInputs, stream: &RngStream) -> Result<RunOutcome> {
    let RunInputs {
        calib_scores,
        calib_labels,
        test_ids,
        test_scores,
        test_labels,
        confusion,
    } = inputs;
    let label_count = confusion.label_count();
    if let Some(f) = calib_scores.iter().chain(&test_scores).find(|f| f.len() != label_count) {
        return Err(Error::DimensionMismatch {
            expected: label_count,
            got: f.len(),
        });
    }
    let classifier_accuracy = mean(
        test_scores
            .iter()
            .zip(&test_labels)
            .map(|(f, &y)| f64::from(u8::from(f.argmax() == y))),
    );

    let (calib_cal, test_cal) = match cfg.calibration {
        CalibrationSpec::None => (calib_scores, test_scores),
        CalibrationSpec::Topk { k, bins } => {
            let cal = fit_topk(&calib_scores, &calib_labels, k, bins)?;
            let apply = |v: &[ProbVector]| -> Result<Vec<ProbVector>> { v.iter().map(|f| apply_topk(&cal, f)).collect() };
            (apply(&calib_scores)?, apply(&test_scores)?)
        }
    };

    let kinds = cfg.score_kinds();
    let mut thresholds = BTreeMap::new();
    for &kind in &kinds {
        let scores = calibration_scores(calib_cal.iter().zip(calib_labels.iter().copied()), kind);
        let per_alpha = cfg
            .alphas
            .iter()
            .map(|&a| calibration_quantile(&scores, a))
            .collect::<Result<Vec<_>>>()?;
        thresholds.insert(kind, per_alpha);
    }

    let need_greedy = cfg.has_method(Method::Greedy) || !kinds.is_empty();
    let evaluation = cfg.evaluation;
    let per_instance: Vec<Result<InstanceResult>> = (0..test_cal.len())
        .into_par_iter()
        .map(|i| {
            let f = &test_cal[i];
            let truth = test_labels[i];
            let partner = confusion.most_confused_with(truth);
            let mut fixed = Vec::new();
            // every set is scored by the same from-scratch evaluation, so equal
            // sets get bit-identical values whichever search produced them
            let greedy = if need_greedy {
                let set = greedy_set(f, &confusion)?.set;
                let value = expected_accuracy(&set, f, &confusion);
                Some((set, value))
            } else {
                None
            };
            if cfg.has_method(Method::Greedy) {
                let (set, value) = greedy.as_ref().expect("computed above");
                let acc = accuracy_of(set, truth, &confusion, evaluation, stream, &format!("mc/{i}/greedy"))?;
                fixed.push((Method::Greedy, outcome(set, *value, truth, partner, acc)));
            }
            if cfg.has_method(Method::BruteForce) {
                let (set, _) = brute_force_set(f, &confusion, cfg.brute_force_max_labels)?;
                let value = expected_accuracy(&set, f, &confusion);
                let acc = accuracy_of(&set, truth, &confusion, evaluation, stream, &format!("mc/{i}/brute_force"))?;
                fixed.push((Method::BruteForce, outcome(&set, value, truth, partner, acc)));
            }
            if cfg.has_method(Method::None) {
                let set = PredictionSet::full(label_count);
                let value = expected_accuracy(&set, f, &confusion);
                let acc = accuracy_of(&set, truth, &confusion, evaluation, stream, &format!("mc/{i}/none"))?;
                fixed.push((Method::None, outcome(&set, value, truth, partner, acc)));
            }
            let mut conformal = Vec::with_capacity(kinds.len());
            for &kind in &kinds {
                let mut row = Vec::with_capacity(cfg.alphas.len());
                for (a, t) in thresholds[&kind].iter().enumerate() {
                    let set = conformal_set(f, t, kind);
                    let value = expected_accuracy(&set, f, &confusion);
                    let (g_set, g_value) = greedy.as_ref().expect("computed whenever conformal methods run");
                    if g_value + AUDIT_SLACK < value {
                        return Err(Error::InvariantAudit(format!(
                            "run {run}, instance {}: greedy set {g_set} has value {g_value} below the {kind} \
                             conformal set {set} with value {value} at alpha {}",
                            test_ids[i], cfg.alphas[a]
                        )));
                    }
                    let acc = accuracy_of(&set, truth, &confusion, evaluation, stream, &conformal_key(i, kind, a))?;
                    row.push((acc, value, set.len(), set.contains(truth)));
                }
                conformal.push(row);
            }
            Ok(InstanceResult { fixed, conformal })
        })
        .collect();
    let per_instance = per_instance.into_iter().collect::<Result<Vec<_>>>()?;

    let mut instances: BTreeMap<Method, Vec<InstanceOutcome>> = BTreeMap::new();
    for r in &per_instance {
        for &(m, o) in &r.fixed {
            instances.entry(m).or_default().push(o);
        }
    }
    let mut alpha_stats = BTreeMap::new();
    for (ki, &kind) in kinds.iter().enumerate() {
        let stats = (0..cfg.alphas.len())
            .map(|a| {
                let cells = || per_instance.iter().map(|r| r.conformal[ki][a]);
                AlphaStats {
                    accuracy: mean(cells().map(|c| c.0)),
                    objective: mean(cells().map(|c| c.1)),
                    set_size: mean(cells().map(|c| c.2 as f64)),
                    coverage: mean(cells().map(|c| f64::from(u8::from(c.3)))),
                }
            })
            .collect();
        alpha_stats.insert(kind, stats);
    }

    Ok(RunOutcome {
        run,
        test_ids,
        test_labels,
        calibrated_test: test_cal,
        confusion,
        classifier_accuracy,
        instances,
        alpha_stats,
        thresholds,
        evaluation,
        stream: stream.clone(),
    })
}

impl RunOutcome {
    /// Rebuilds per-instance outcomes of one conformal method at grid index
    /// `alpha_index`; Monte Carlo draws reuse the streams of the first pass.
    pub fn conformal_instances(&self, kind: ScoreKind, alpha_index: usize) -> Result<Vec<InstanceOutcome>> {
        let t = self
            .thresholds
            .get(&kind)
            .and_then(|v| v.get(alpha_index))
            .ok_or_else(|| Error::Config(format!("no {kind} threshold at alpha index {alpha_index}")))?;
        (0..self.calibrated_test.len())
            .map(|i| {
                let f = &self.calibrated_test[i];
                let truth = self.test_labels[i];
                let set = conformal_set(f, t, kind);
                let value = expected_accuracy(&set, f, &self.confusion);
                let acc = accuracy_of(
                    &set,
                    truth,
                    &self.confusion,
                    self.evaluation,
                    &self.stream,
                    &conformal_key(i, kind, alpha_index),
                )?;
                Ok(outcome(&set, value, truth, self.confusion.most_confused_with(truth), acc))
            })
            .collect()
    }
}

/// One run of a generated task: the data, its split and the trained classifier.
#[derive(Debug, Clone)]
pub struct GeneratedRun {
    pub task: SyntheticTask,
    pub parts: SplitIndices,
    pub model: SoftmaxModel,
}

pub fn prepare_generated_run(
    spec: &GenerateSpec,
    class_sep: f64,
    training: &TrainConfig,
    stream: &RngStream,
) -> Result<GeneratedRun> {
    let cfg = spec.task_config(class_sep);
    let task = gen_task(&cfg, &mut stream.substream("task"))?;
    let parts = split_indices(task.len(), (cfg.train, cfg.calib, cfg.test), &mut stream.substream("split"))?;
    let (xa, ya) = task.subset(&parts.train_a);
    let model = train_softmax(&xa, &ya, cfg.label_count, training)?.model;
    Ok(GeneratedRun { task, parts, model })
}

impl GeneratedRun {
    pub fn scores(&self, indices: &[usize]) -> Vec<ProbVector> {
        indices
            .iter()
            .map(|&i| predict_proba(&self.model, &self.task.features[i]))
            .collect()
    }

    pub fn expert_confusion(
        &self,
        gamma: f64,
        smoothing: f64,
        training: &TrainConfig,
        stream: &RngStream,
    ) -> Result<ConfusionMatrix> {
        let (xb, yb) = self.task.subset(&self.parts.train_b);
        let (xc, yc) = self.task.subset(&self.parts.calib);
        gen_expert_confusion(
            (&xb, &yb),
            (&xc, &yc),
            self.task.label_count,
            gamma,
            smoothing,
            training,
            &mut stream.substream(format!("expert/gamma={gamma}")),
        )
    }

    pub fn inputs(&self, confusion: ConfusionMatrix) -> RunInputs {
        let labels = |idx: &[usize]| idx.iter().map(|&i| self.task.labels[i]).collect::<Vec<_>>();
        RunInputs {
            calib_scores: self.scores(&self.parts.calib),
            calib_labels: labels(&self.parts.calib),
            test_ids: self.parts.test.iter().map(|i| format!("s{i}")).collect(),
            test_scores: self.scores(&self.parts.test),
            test_labels: labels(&self.parts.test),
            confusion,
        }
    }
}

/// The first run's calibration and test records of a generated task as a
/// scored dataset, with noisy-expert predictions as `human_pred` when the
/// expert follows the gamma protocol.
pub fn export_generated(cfg: &ExperimentConfig) -> Result<Dataset> {
    cfg.validate()?;
    let TaskSource::Generate(spec) = &cfg.task else {
        return Err(Error::Config("only generated tasks can be exported".into()));
    };
    let sep = resolve_class_sep(spec, spec.target_accuracy, &cfg.training, cfg.seed)?;
    let stream = RngStream::new(cfg.seed, "experiment").substream(0);
    let prepared = prepare_generated_run(spec, sep, &cfg.training, &stream)?;
    let mut indices = prepared.parts.calib.clone();
    indices.extend(&prepared.parts.test);
    let human: Vec<Option<LabelId>> = match cfg.expert {
        ExpertSource::Gamma { gamma, .. } => {
            // same stream and draw order as the confusion estimate of run 0
            let mut rng = stream.substream(format!("expert/gamma={gamma}"));
            let (xb, yb) = prepared.task.subset(&prepared.parts.train_b);
            let expert = NoisyExpert::train(&xb, &yb, spec.label_count, gamma, &cfg.training, &mut rng)?;
            indices
                .iter()
                .map(|&i| Some(expert.predict(&prepared.task.features[i], &mut rng)))
                .collect()
        }
        _ => vec![None; indices.len()],
    };
    let records = indices
        .iter()
        .zip(human)
        .map(|(&i, human_pred)| InstanceRecord {
            id: format!("s{i}"),
            scores: predict_proba(&prepared.model, &prepared.task.features[i]),
            true_label: prepared.task.labels[i],
            human_pred,
            noise_tag: None,
        })
        .collect();
    let ds = Dataset::new(spec.label_count, records)?;
    let splits = indices
        .iter()
        .enumerate()
        .map(|(k, &i)| (format!("s{i}"), if k < prepared.parts.calib.len() { Split::Calib } else { Split::Test }))
        .collect();
    ds.with_splits(splits)
}

/// Fixed `class_sep`, or one tuned once per (master seed, target).
pub fn resolve_class_sep(spec: &GenerateSpec, target: Option<f64>, training: &TrainConfig, seed: u64) -> Result<f64> {
    match (spec.class_sep, target) {
        (_, Some(t)) => {
            let stream = RngStream::new(seed, format!("tune/target={t}"));
            let (sep, _) = tune_class_sep(&spec.task_config(1.0), t, spec.tune_tolerance, training, &stream)?;
            Ok(sep)
        }
        (Some(sep), None) => Ok(sep),
        (None, None) => Err(Error::Config("class_sep or target_accuracy is required".into())),
    }
}

fn human_confusion(ds: &Dataset, calib: &[usize], smoothing: f64) -> Result<ConfusionMatrix> {
    let pairs: Vec<(LabelId, LabelId)> = calib
        .iter()
        .filter_map(|&i| {
            let r = &ds.records()[i];
            r.human_pred.map(|h| (h, r.true_label))
        })
        .collect();
    if pairs.is_empty() {
        return Err(Error::MissingHumanPredictions);
    }
    normalize_counts(&count_pairs(pairs, ds.label_count()), smoothing)
}

fn loaded_inputs(
    cfg: &ExperimentConfig,
    ds: &Dataset,
    calib_size: usize,
    fixed_confusion: Option<&ConfusionMatrix>,
    stream: &RngStream,
) -> Result<RunInputs> {
    let mut order: Vec<usize> = (0..ds.len()).collect();
    order.shuffle(&mut stream.substream("split"));
    let (calib, test) = order.split_at(calib_size);
    let confusion = match (&cfg.expert, fixed_confusion) {
        (_, Some(c)) => c.clone(),
        (ExpertSource::HumanPredictions { smoothing }, None) => human_confusion(ds, calib, *smoothing)?,
        _ => return Err(Error::Config("loaded tasks need a confusion file or human predictions".into())),
    };
    let recs = ds.records();
    Ok(RunInputs {
        calib_scores: calib.iter().map(|&i| recs[i].scores.clone()).collect(),
        calib_labels: calib.iter().map(|&i| recs[i].true_label).collect(),
        test_ids: test.iter().map(|&i| recs[i].id.clone()).collect(),
        test_scores: test.iter().map(|&i| recs[i].scores.clone()).collect(),
        test_labels: test.iter().map(|&i| recs[i].true_label).collect(),
        confusion,
    })
}

fn check_loaded_sizes(cfg: &ExperimentConfig, n: usize, calib: usize) -> Result<()> {
    let minimum = calibration_minimum(cfg.calibration).max(usize::from(!cfg.score_kinds().is_empty()));
    if calib < minimum {
        return Err(Error::Config(format!("calib = {calib} is below the {minimum} samples calibration needs")));
    }
    if calib >= n {
        return Err(Error::Config(format!("calib = {calib} leaves no test records out of {n}")));
    }
    Ok(())
}

/// All runs of one configuration, with the headline α of every conformal
/// method chosen as the grid value with the highest mean test accuracy.
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub config_hash: String,
    pub class_sep: Option<f64>,
    pub alphas: Vec<f64>,
    pub methods: Vec<Method>,
    pub runs: Vec<RunOutcome>,
    /// Grid index of the headline α per conformal score.
    pub best_alpha: BTreeMap<ScoreKind, usize>,
}

impl ExperimentOutput {
    pub fn from_runs(
        cfg: &ExperimentConfig,
        class_sep: Option<f64>,
        mut runs: Vec<RunOutcome>,
    ) -> Result<ExperimentOutput> {
        let mut best_alpha = BTreeMap::new();
        for kind in cfg.score_kinds() {
            let curve: Vec<f64> = (0..cfg.alphas.len())
                .map(|a| mean(runs.iter().map(|r| r.alpha_stats[&kind][a].accuracy)))
                .collect();
            // first index on ties
            let best = curve
                .iter()
                .enumerate()
                .fold(0, |b, (i, &v)| if v > curve[b] { i } else { b });
            best_alpha.insert(kind, best);
            for r in &mut runs {
                let inst = r.conformal_instances(kind, best)?;
                r.instances.insert(Method::from_score_kind(kind), inst);
            }
        }
        let methods = Method::ALL.into_iter().filter(|m| cfg.has_method(*m)).collect();
        Ok(ExperimentOutput {
            config_hash: cfg.hash(),
            class_sep,
            alphas: cfg.alphas.clone(),
            methods,
            runs,
            best_alpha,
        })
    }

    pub fn headline_alpha(&self, method: Method) -> Option<f64> {
        method
            .score_kind()
            .and_then(|k| self.best_alpha.get(&k))
            .map(|&i| self.alphas[i])
    }

    /// Per-run mean of `metric` over the test instances of `method`.
    pub fn per_run(&self, method: Method, metric: impl Fn(&InstanceOutcome) -> f64) -> Vec<f64> {
        self.runs
            .iter()
            .map(|r| mean(r.instances.get(&method).into_iter().flatten().map(&metric)))
            .collect()
    }

    /// Mean and standard deviation across runs of the per-run test accuracy.
    pub fn accuracy(&self, method: Method) -> (f64, f64) {
        mean_std(&self.per_run(method, |o| o.accuracy))
    }

    pub fn classifier_accuracy(&self) -> (f64, f64) {
        mean_std(&self.runs.iter().map(|r| r.classifier_accuracy).collect::<Vec<_>>())
    }

    /// All per-instance outcomes of `method`, run after run.
    pub fn pooled(&self, method: Method) -> Vec<InstanceOutcome> {
        self.runs
            .iter()
            .flat_map(|r| r.instances.get(&method).into_iter().flatten().copied())
            .collect()
    }

    pub fn label_count(&self) -> usize {
        self.runs[0].confusion.label_count()
    }
}

/// Runs every configured repetition; repetitions run in parallel on keyed
/// random streams, so results do not depend on the thread count.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let root = RngStream::new(cfg.seed, "experiment");
    match &cfg.task {
        TaskSource::Generate(spec) => {
            let sep = resolve_class_sep(spec, spec.target_accuracy, &cfg.training, cfg.seed)?;
            let fixed = match &cfg.expert {
                ExpertSource::ConfusionFile { path } => Some(load_confusion(path)?),
                _ => None,
            };
            let runs = (0..cfg.runs)
                .into_par_iter()
                .map(|r| {
                    let stream = root.substream(r);
                    let prepared = prepare_generated_run(spec, sep, &cfg.training, &stream)?;
                    let confusion = match (&cfg.expert, &fixed) {
                        (_, Some(c)) => c.clone(),
                        (ExpertSource::Gamma { gamma, smoothing }, None) => {
                            prepared.expert_confusion(*gamma, *smoothing, &cfg.training, &stream)?
                        }
                        _ => return Err(Error::Config("generated tasks need a gamma expert or a confusion file".into())),
                    };
                    evaluate_run(cfg, r, prepared.inputs(confusion), &stream)
                })
                .collect::<Vec<Result<RunOutcome>>>()
                .into_iter()
                .collect::<Result<Vec<_>>>()?;
            ExperimentOutput::from_runs(cfg, Some(sep), runs)
        }
        TaskSource::Load { path, calib } => {
            let ds = load_scored_dataset(path)?;
            check_loaded_sizes(cfg, ds.len(), *calib)?;
            let fixed = match &cfg.expert {
                ExpertSource::ConfusionFile { path } => Some(load_confusion(path)?),
                _ => None,
            };
            let runs = (0..cfg.runs)
                .into_par_iter()
                .map(|r| {
                    let stream = root.substream(r);
                    let inputs = loaded_inputs(cfg, &ds, *calib, fixed.as_ref(), &stream)?;
                    evaluate_run(cfg, r, inputs, &stream)
                })
                .collect::<Vec<Result<RunOutcome>>>()
                .into_iter()
                .collect::<Result<Vec<_>>>()?;
            ExperimentOutput::from_runs(cfg, None, runs)
        }
    }
}

/// The experiment evaluated at every grid α; see [`super::report::sweep_rows`].
pub fn alpha_sweep(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    if cfg.score_kinds().is_empty() {
        return Err(Error::Config("alpha sweep needs naive_cp or aps_cp among the methods".into()));
    }
    run_experiment(cfg)
}

#[derive(Debug, Clone)]
pub struct GridCell {
    pub gamma: f64,
    pub target: f64,
    pub class_sep: f64,
    pub output: ExperimentOutput,
}

/// Every (γ, target accuracy) cell of the grid. `class_sep` is tuned once per
/// target; within a (target, run) the task and classifier are shared by all γ.
pub fn run_grid(cfg: &ExperimentConfig) -> Result<Vec<GridCell>> {
    cfg.validate()?;
    let spec = match &cfg.task {
        TaskSource::Generate(spec) => spec,
        TaskSource::Load { .. } => return Err(Error::Config("the grid needs a generated task".into())),
    };
    let smoothing = match cfg.expert {
        ExpertSource::Gamma { smoothing, .. } => smoothing,
        _ => return Err(Error::Config("the grid needs the gamma expert protocol".into())),
    };
    let grid = cfg.grid.clone().unwrap_or_default();
    let GridSpec { gammas, targets, .. } = &grid;

    let per_target = targets
        .par_iter()
        .map(|&target| -> Result<Vec<GridCell>> {
            let sep = resolve_class_sep(spec, Some(target), &cfg.training, cfg.seed)?;
            let root = RngStream::new(cfg.seed, format!("grid/target={target}"));
            let by_run: Vec<Vec<RunOutcome>> = (0..cfg.runs)
                .into_par_iter()
                .map(|r| -> Result<Vec<RunOutcome>> {
                    let stream = root.substream(r);
                    let prepared = prepare_generated_run(spec, sep, &cfg.training, &stream)?;
                    gammas
                        .iter()
                        .map(|&gamma| {
                            let c = prepared.expert_confusion(gamma, smoothing, &cfg.training, &stream)?;
                            let cell_stream = stream.substream(format!("gamma={gamma}"));
                            evaluate_run(cfg, r, prepared.inputs(c), &cell_stream)
                        })
                        .collect()
                })
                .collect::<Vec<Result<_>>>()
                .into_iter()
                .collect::<Result<_>>()?;
            let mut cells = Vec::with_capacity(gammas.len());
            for (gi, &gamma) in gammas.iter().enumerate() {
                let runs: Vec<RunOutcome> = by_run.iter().map(|v| v[gi].clone()).collect();
                let mut cell_cfg = cfg.clone();
                cell_cfg.expert = ExpertSource::Gamma { gamma, smoothing };
                if let TaskSource::Generate(g) = &mut cell_cfg.task {
                    g.class_sep = None;
                    g.target_accuracy = Some(target);
                }
                cell_cfg.grid = None;
                cells.push(GridCell {
                    gamma,
                    target,
                    class_sep: sep,
                    output: ExperimentOutput::from_runs(&cell_cfg, Some(sep), runs)?,
                });
            }
            Ok(cells)
        })
        .collect::<Vec<Result<Vec<GridCell>>>>();

    let mut cells = Vec::new();
    for r in per_target {
        cells.extend(r?);
    }
    cells.sort_by(|a, b| a.gamma.total_cmp(&b.gamma).then(a.target.total_cmp(&b.target)));
    Ok(cells)
}
