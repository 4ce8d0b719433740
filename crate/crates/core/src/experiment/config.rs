use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::conformal::ScoreKind;
use crate::error::{Error, Result};
use crate::optimizer::BRUTE_FORCE_MAX_LABELS;
use crate::simgen::{TaskConfig, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Greedy,
    BruteForce,
    NaiveCp,
    ApsCp,
    None,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Greedy,
        Method::BruteForce,
        Method::NaiveCp,
        Method::ApsCp,
        Method::None,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Greedy => "greedy",
            Method::BruteForce => "brute_force",
            Method::NaiveCp => "naive_cp",
            Method::ApsCp => "aps_cp",
            Method::None => "none",
        }
    }

    pub fn score_kind(self) -> Option<ScoreKind> {
        match self {
            Method::NaiveCp => Some(ScoreKind::Naive),
            Method::ApsCp => Some(ScoreKind::Aps),
            _ => None,
        }
    }

    pub fn from_score_kind(kind: ScoreKind) -> Method {
        match kind {
            ScoreKind::Naive => Method::NaiveCp,
            ScoreKind::Aps => Method::ApsCp,
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown method {s:?}")))
    }
}

/// Synthetic task settings. Either `class_sep` is given or it is tuned so the
/// classifier reaches `target_accuracy`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateSpec {
    #[serde(default = "default_label_count")]
    pub label_count: usize,
    #[serde(default = "default_d_total")]
    pub d_total: usize,
    #[serde(default = "default_d_informative")]
    pub d_informative: usize,
    #[serde(default)]
    pub class_sep: Option<f64>,
    #[serde(default)]
    pub target_accuracy: Option<f64>,
    #[serde(default = "default_tune_tolerance")]
    pub tune_tolerance: f64,
    #[serde(default = "default_train")]
    pub train: usize,
    #[serde(default = "default_calib")]
    pub calib: usize,
    #[serde(default = "default_test")]
    pub test: usize,
}

fn default_label_count() -> usize {
    10
}
fn default_d_total() -> usize {
    20
}
fn default_d_informative() -> usize {
    4
}
fn default_tune_tolerance() -> f64 {
    0.03
}
fn default_train() -> usize {
    4000
}
fn default_calib() -> usize {
    500
}
fn default_test() -> usize {
    500
}

impl Default for GenerateSpec {
    fn default() -> Self {
        GenerateSpec {
            label_count: default_label_count(),
            d_total: default_d_total(),
            d_informative: default_d_informative(),
            class_sep: None,
            target_accuracy: Some(0.7),
            tune_tolerance: default_tune_tolerance(),
            train: default_train(),
            calib: default_calib(),
            test: default_test(),
        }
    }
}

impl GenerateSpec {
    pub fn task_config(&self, class_sep: f64) -> TaskConfig {
        TaskConfig {
            label_count: self.label_count,
            d_total: self.d_total,
            d_informative: self.d_informative,
            class_sep,
            train: self.train,
            calib: self.calib,
            test: self.test,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum TaskSource {
    Generate(GenerateSpec),
    /// A scored dataset file; every run draws `calib` records for
    /// calibration and tests on the rest.
    Load { path: PathBuf, calib: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum ExpertSource {
    /// Noised-feature expert trained on the second half of the training split.
    Gamma {
        gamma: f64,
        #[serde(default)]
        smoothing: f64,
    },
    ConfusionFile { path: PathBuf },
    /// Estimated from the `human_pred` column of the calibration records.
    HumanPredictions {
        #[serde(default)]
        smoothing: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum CalibrationSpec {
    None,
    Topk {
        #[serde(default = "default_k")]
        k: usize,
        #[serde(default = "default_bins")]
        bins: usize,
    },
}

fn default_k() -> usize {
    5
}
fn default_bins() -> usize {
    10
}

impl Default for CalibrationSpec {
    fn default() -> Self {
        CalibrationSpec::Topk {
            k: default_k(),
            bins: default_bins(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Evaluation {
    /// Exact expected accuracy of the simulated expert.
    #[default]
    Analytic,
    /// Fraction of correct sampled expert predictions.
    MonteCarlo { draws: usize },
}

/// The γ × target-accuracy grid swept by `report`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default = "default_gammas")]
    pub gammas: Vec<f64>,
    #[serde(default = "default_targets")]
    pub targets: Vec<f64>,
    /// `(gamma, target)` cell whose per-label and per-instance data are written.
    #[serde(default = "default_focus")]
    pub focus: (f64, f64),
}

fn default_gammas() -> Vec<f64> {
    vec![0.3, 0.5, 0.7, 1.0]
}
fn default_targets() -> Vec<f64> {
    vec![0.3, 0.5, 0.7, 0.9]
}
fn default_focus() -> (f64, f64) {
    (0.7, 0.7)
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            gammas: default_gammas(),
            targets: default_targets(),
            focus: default_focus(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default = "default_alphas")]
    pub alphas: Vec<f64>,
    #[serde(default = "default_brute_force_max")]
    pub brute_force_max_labels: usize,
    #[serde(default)]
    pub evaluation: Evaluation,
    pub task: TaskSource,
    pub expert: ExpertSource,
    #[serde(default)]
    pub calibration: CalibrationSpec,
    #[serde(default)]
    pub training: TrainConfig,
    #[serde(default)]
    pub grid: Option<GridSpec>,
}

fn default_seed() -> u64 {
    20240601
}
fn default_runs() -> usize {
    5
}
fn default_methods() -> Vec<Method> {
    vec![Method::Greedy, Method::NaiveCp, Method::ApsCp, Method::None]
}
fn default_brute_force_max() -> usize {
    BRUTE_FORCE_MAX_LABELS
}

/// `{0.01, 0.02, …, 0.99}`.
pub fn default_alphas() -> Vec<f64> {
    (1..=99).map(|i| i as f64 / 100.0).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    /// train 4000, calib 500, test 500, 5 runs.
    Desk,
    /// train 16000, calib 1000, test 1000, 10 runs.
    Full,
}

impl std::str::FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Profile::Desk),
            "full" => Ok(Profile::Full),
            other => Err(Error::Config(format!("unknown profile {other:?}"))),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// First 16 hex digits of the SHA-256 of the canonical serialization.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    /// Overrides split sizes and run count with a named profile.
    pub fn apply_profile(&mut self, profile: Profile) {
        let (train, calib, test, runs) = match profile {
            Profile::Desk => (4000, 500, 500, 5),
            Profile::Full => (16000, 1000, 1000, 10),
        };
        self.runs = runs;
        if let TaskSource::Generate(g) = &mut self.task {
            g.train = train;
            g.calib = calib;
            g.test = test;
        }
    }

    pub fn has_method(&self, m: Method) -> bool {
        self.methods.contains(&m)
    }

    pub fn score_kinds(&self) -> Vec<ScoreKind> {
        ScoreKind::ALL
            .into_iter()
            .filter(|k| self.has_method(Method::from_score_kind(*k)))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.methods.is_empty() {
            return bad("at least one method is required".into());
        }
        if self.runs == 0 {
            return bad("runs must be at least 1".into());
        }
        if !self.score_kinds().is_empty() && self.alphas.is_empty() {
            return bad("conformal methods need a nonempty alpha grid".into());
        }
        if let Some(a) = self.alphas.iter().find(|a| !(0.0..=1.0).contains(*a)) {
            return bad(format!("alpha {a} outside [0, 1]"));
        }
        if let Evaluation::MonteCarlo { draws: 0 } = self.evaluation {
            return bad("monte_carlo evaluation needs draws >= 1".into());
        }
        if !(self.training.learning_rate > 0.0 && self.training.l2 >= 0.0) {
            return bad("training needs learning_rate > 0 and l2 >= 0".into());
        }
        let label_count = match &self.task {
            TaskSource::Generate(g) => {
                match (g.class_sep, g.target_accuracy) {
                    (Some(_), Some(_)) => return bad("give either class_sep or target_accuracy, not both".into()),
                    (None, None) if self.grid.is_none() => {
                        return bad("generated tasks need class_sep or target_accuracy".into())
                    }
                    (_, Some(t)) if !(0.0..1.0).contains(&t) => {
                        return bad(format!("target_accuracy {t} outside [0, 1)"))
                    }
                    _ => {}
                }
                g.task_config(g.class_sep.unwrap_or(1.0)).validate()?;
                if g.train < 4 {
                    return bad("generated tasks need at least 4 training samples".into());
                }
                Some(g.label_count)
            }
            TaskSource::Load { .. } => {
                if matches!(self.expert, ExpertSource::Gamma { .. }) {
                    return bad("the gamma expert protocol needs a generated task".into());
                }
                None
            }
        };
        if let ExpertSource::Gamma { gamma, smoothing } = self.expert {
            if !(0.0..=1.0).contains(&gamma) {
                return bad(format!("gamma {gamma} outside [0, 1]"));
            }
            if smoothing < 0.0 {
                return bad("smoothing must be >= 0".into());
            }
        }
        if let CalibrationSpec::Topk { k, bins } = self.calibration {
            if k == 0 || bins == 0 {
                return bad("topk calibration needs k >= 1 and bins >= 1".into());
            }
            if let Some(l) = label_count {
                if k > l {
                    return bad(format!("topk k = {k} exceeds the {l} labels"));
                }
            }
        }
        if let (Some(l), true) = (label_count, self.has_method(Method::BruteForce)) {
            if l > self.brute_force_max_labels {
                return bad(format!(
                    "brute_force over {l} labels exceeds brute_force_max_labels = {}",
                    self.brute_force_max_labels
                ));
            }
        }
        if let Some(grid) = &self.grid {
            if grid.gammas.is_empty() || grid.targets.is_empty() {
                return bad("grid needs at least one gamma and one target".into());
            }
            if let Some(t) = grid.targets.iter().find(|t| !(0.0..1.0).contains(*t)) {
                return bad(format!("grid target {t} outside [0, 1)"));
            }
            if let Some(g) = grid.gammas.iter().find(|g| !(0.0..=1.0).contains(*g)) {
                return bad(format!("grid gamma {g} outside [0, 1]"));
            }
        }
        Ok(())
    }
}

/// Smallest calibration sample size a calibrator spec can be fit on.
pub(crate) fn calibration_minimum(spec: CalibrationSpec) -> usize {
    match spec {
        CalibrationSpec::None => 0,
        CalibrationSpec::Topk { bins, .. } => bins,
    }
}
