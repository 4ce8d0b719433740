use std::path::Path;

use expert_sets::conformal::ScoreKind;
use expert_sets::experiment::{run_experiment, write_experiment, ExperimentConfig, Method};
use expert_sets::fixtures::conformal_gap_instance;
use expert_sets::ingest::{save_scored_dataset, write_confusion};
use expert_sets::{Dataset, Error, InstanceRecord, LabelId};

const GENERATED: &str = r#"
seed = 99
runs = 3
methods = ["greedy", "brute_force", "naive_cp", "aps_cp", "none"]
alphas = [0.05, 0.1, 0.2, 0.4]

[task]
source = "generate"
label_count = 6
class_sep = 1.2
train = 800
calib = 200
test = 150

[expert]
source = "gamma"
gamma = 0.5

[training]
epochs = 100
"#;

fn read_all(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

fn run_in_pool(cfg: &ExperimentConfig, threads: usize, dir: &Path) {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    let out = pool.install(|| run_experiment(cfg)).unwrap();
    write_experiment(dir, &out).unwrap();
}

#[test]
fn outputs_are_byte_identical_across_runs_and_thread_counts() {
    let cfg = ExperimentConfig::from_toml(GENERATED).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let dirs: Vec<_> = ["a", "b", "c"].iter().map(|d| tmp.path().join(d)).collect();
    run_in_pool(&cfg, 1, &dirs[0]);
    run_in_pool(&cfg, 1, &dirs[1]);
    run_in_pool(&cfg, 4, &dirs[2]);
    let first = read_all(&dirs[0]);
    assert!(first.iter().any(|(name, _)| name == "results.csv"));
    assert_eq!(first, read_all(&dirs[1]));
    assert_eq!(first, read_all(&dirs[2]));

    let mut other = cfg.clone();
    other.seed += 1;
    let d = tmp.path().join("d");
    run_in_pool(&other, 1, &d);
    assert_ne!(first, read_all(&d));
}

#[test]
fn greedy_beats_conformal_and_none_on_generated_data() {
    let out = run_experiment(&ExperimentConfig::from_toml(GENERATED).unwrap()).unwrap();
    let g = out.pooled(Method::Greedy);
    let b = out.pooled(Method::BruteForce);
    for m in [Method::NaiveCp, Method::ApsCp, Method::None] {
        for (gi, oi) in g.iter().zip(out.pooled(m)) {
            assert!(gi.objective + 1e-12 >= oi.objective, "{m:?}");
        }
    }
    for (gi, bi) in g.iter().zip(&b) {
        assert!(gi.objective <= bi.objective + 1e-12);
    }
}

fn fixture_files(dir: &Path, human_pred: bool) -> (std::path::PathBuf, std::path::PathBuf) {
    let (f, c) = conformal_gap_instance();
    let records = (0..2)
        .map(|i| InstanceRecord {
            id: format!("x{i}"),
            scores: f.clone(),
            true_label: LabelId(1),
            human_pred: human_pred.then_some(LabelId(1)),
            noise_tag: None,
        })
        .collect();
    let data = dir.join("data.csv");
    let confusion = dir.join("confusion.csv");
    save_scored_dataset(&data, &Dataset::new(3, records).unwrap()).unwrap();
    write_confusion(&confusion, &c).unwrap();
    (data, confusion)
}

fn loaded_config(data: &Path, expert: &str) -> ExperimentConfig {
    ExperimentConfig::from_toml(&format!(
        r#"
runs = 2
methods = ["greedy", "brute_force", "none"]

[task]
source = "load"
path = {data:?}
calib = 1

[expert]
{expert}

[calibration]
method = "none"
"#
    ))
    .unwrap()
}

#[test]
fn loaded_fixture_reproduces_hand_values() {
    let tmp = tempfile::tempdir().unwrap();
    let (data, confusion) = fixture_files(tmp.path(), false);
    let cfg = loaded_config(&data, &format!("source = \"confusion_file\"\npath = {confusion:?}"));
    let out = run_experiment(&cfg).unwrap();
    for o in out.pooled(Method::Greedy) {
        assert!((o.objective - 37.0 / 75.0).abs() < 1e-12);
        assert_eq!(o.size, 3);
    }
    for o in out.pooled(Method::BruteForce) {
        assert!((o.objective - 0.6).abs() < 1e-12);
        assert_eq!(o.size, 2);
        // truth is the second label and the set {2,3} only confuses it with itself
        assert!((o.accuracy - 1.0).abs() < 1e-12);
    }
    // the full label set: weighted diagonal
    let diag = 0.4 * 0.33 / 0.99 + 0.35 * 0.6 + 0.25 * 0.6;
    for o in out.pooled(Method::None) {
        assert!((o.objective - diag).abs() < 1e-12);
        assert_eq!(o.size, 3);
    }
}

#[test]
fn missing_human_predictions_are_reported() {
    let tmp = tempfile::tempdir().unwrap();
    let (data, _) = fixture_files(tmp.path(), false);
    let cfg = loaded_config(&data, "source = \"human_predictions\"");
    assert!(matches!(run_experiment(&cfg), Err(Error::MissingHumanPredictions)));

    let (data, _) = fixture_files(tmp.path(), true);
    let cfg = loaded_config(&data, "source = \"human_predictions\"\nsmoothing = 1.0");
    assert!(run_experiment(&cfg).is_ok());
}

#[test]
fn alpha_extremes_give_the_full_set_and_the_top_label() {
    let mut cfg = ExperimentConfig::from_toml(GENERATED).unwrap();
    cfg.methods = vec![Method::NaiveCp, Method::ApsCp, Method::None];
    cfg.alphas = vec![0.0, 1.0];
    let out = run_experiment(&cfg).unwrap();
    let none = out.per_run(Method::None, |o| o.accuracy);
    for (r, run) in out.runs.iter().enumerate() {
        let top1 = run
            .calibrated_test
            .iter()
            .zip(&run.test_labels)
            .filter(|(f, y)| f.ranking()[0] == **y)
            .count() as f64
            / run.test_labels.len() as f64;
        for kind in ScoreKind::ALL {
            let stats = &run.alpha_stats[&kind];
            assert_eq!(stats[0].set_size, 6.0);
            assert_eq!(stats[0].coverage, 1.0);
            assert!((stats[0].accuracy - none[r]).abs() < 1e-12);
            assert_eq!(stats[1].set_size, 1.0);
            assert!((stats[1].accuracy - top1).abs() < 1e-12, "{kind:?} run {r}: {} vs {top1}", stats[1].accuracy);
        }
    }
}

