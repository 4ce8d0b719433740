use std::path::Path;

use super::config::Method;
use super::pipeline::{mean_std, ExperimentOutput, GridCell, InstanceOutcome, AUDIT_SLACK};
use crate::error::{Error, Result};
use crate::ingest::{write_results, write_table, ResultRecord};
use crate::types::LabelId;

/// Thresholds `0, 0.05, …, 1` of the complementary CDF.
pub fn ccdf_grid() -> Vec<f64> {
    (0..=20).map(|i| i as f64 / 20.0).collect()
}

/// Fraction of `values` at or above each grid threshold.
pub fn ccdf(values: &[f64]) -> Vec<(f64, f64)> {
    ccdf_grid()
        .into_iter()
        .map(|t| {
            let above = values.iter().filter(|&&v| v >= t).count();
            let frac = if values.is_empty() {
                0.0
            } else {
                above as f64 / values.len() as f64
            };
            (t, frac)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairInclusion {
    pub label: LabelId,
    pub count: usize,
    /// Empirical `P({y, ȳ} ⊆ S | Y = y)`; NaN when no instance has label `y`.
    pub probability: f64,
    pub mean_set_size: f64,
}

/// Per true label, how often the set holds both the label and the label the
/// expert most often mistakes it for.
pub fn pair_inclusion_stats(outcomes: &[InstanceOutcome], label_count: usize) -> Vec<PairInclusion> {
    (0..label_count)
        .map(|y| {
            let rows: Vec<&InstanceOutcome> = outcomes.iter().filter(|o| o.truth.0 == y).collect();
            let n = rows.len();
            let (probability, mean_set_size) = if n == 0 {
                (f64::NAN, f64::NAN)
            } else {
                (
                    rows.iter().filter(|o| o.pair_included).count() as f64 / n as f64,
                    rows.iter().map(|o| o.size as f64).sum::<f64>() / n as f64,
                )
            };
            PairInclusion {
                label: LabelId(y),
                count: n,
                probability,
                mean_set_size,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapRow {
    pub run: usize,
    pub instance: String,
    pub greedy: f64,
    pub brute_force: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapSummary {
    pub instances: usize,
    pub max_ratio: f64,
    pub min_ratio: f64,
    pub mean_ratio: f64,
    /// Fraction of instances where greedy reaches the exhaustive optimum.
    pub equality_rate: f64,
}

/// `ĝ(greedy) / ĝ(brute force)` per test instance; a zero optimum counts as ratio 1.
pub fn gap_rows(out: &ExperimentOutput) -> Vec<GapRow> {
    let mut rows = Vec::new();
    for r in &out.runs {
        let (Some(g), Some(b)) = (r.instances.get(&Method::Greedy), r.instances.get(&Method::BruteForce)) else {
            continue;
        };
        for (i, (go, bo)) in g.iter().zip(b).enumerate() {
            let ratio = if bo.objective > 0.0 { go.objective / bo.objective } else { 1.0 };
            rows.push(GapRow {
                run: r.run,
                instance: r.test_ids[i].clone(),
                greedy: go.objective,
                brute_force: bo.objective,
                ratio,
            });
        }
    }
    rows
}

pub fn gap_summary(rows: &[GapRow]) -> Option<GapSummary> {
    if rows.is_empty() {
        return None;
    }
    let n = rows.len() as f64;
    Some(GapSummary {
        instances: rows.len(),
        max_ratio: rows.iter().map(|r| r.ratio).fold(f64::NEG_INFINITY, f64::max),
        min_ratio: rows.iter().map(|r| r.ratio).fold(f64::INFINITY, f64::min),
        mean_ratio: rows.iter().map(|r| r.ratio).sum::<f64>() / n,
        equality_rate: rows
            .iter()
            .filter(|r| r.greedy >= r.brute_force - AUDIT_SLACK)
            .count() as f64
            / n,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub method: Method,
    pub alpha: f64,
    pub accuracy_mean: f64,
    pub accuracy_std: f64,
    pub coverage_mean: f64,
    pub set_size_mean: f64,
    pub best: bool,
}

pub fn sweep_rows(out: &ExperimentOutput) -> Vec<SweepRow> {
    let mut rows = Vec::new();
    for (&kind, &best) in &out.best_alpha {
        for (a, &alpha) in out.alphas.iter().enumerate() {
            let acc: Vec<f64> = out.runs.iter().map(|r| r.alpha_stats[&kind][a].accuracy).collect();
            let (accuracy_mean, accuracy_std) = mean_std(&acc);
            let avg = |get: fn(&super::pipeline::AlphaStats) -> f64| {
                out.runs.iter().map(|r| get(&r.alpha_stats[&kind][a])).sum::<f64>() / out.runs.len() as f64
            };
            rows.push(SweepRow {
                method: Method::from_score_kind(kind),
                alpha,
                accuracy_mean,
                accuracy_std,
                coverage_mean: avg(|s| s.coverage),
                set_size_mean: avg(|s| s.set_size),
                best: a == best,
            });
        }
    }
    rows
}

type Metric = (&'static str, fn(&InstanceOutcome) -> f64);

/// Long-format records: per run and as `mean` / `std` aggregates.
pub fn result_records(out: &ExperimentOutput) -> Vec<ResultRecord> {
    let mut recs = Vec::new();
    let metrics: [Metric; 4] = [
        ("accuracy", |o| o.accuracy),
        ("objective", |o| o.objective),
        ("set_size", |o| o.size as f64),
        ("coverage", |o| f64::from(u8::from(o.covered))),
    ];
    for &m in &out.methods {
        for (name, get) in metrics {
            let per_run = out.per_run(m, get);
            for (r, v) in out.runs.iter().zip(&per_run) {
                recs.push(ResultRecord::new(m.name(), &out.config_hash, r.run, name, *v));
            }
            let (mean, std) = mean_std(&per_run);
            recs.push(ResultRecord::new(m.name(), &out.config_hash, "mean", name, mean));
            recs.push(ResultRecord::new(m.name(), &out.config_hash, "std", name, std));
        }
        if let Some(alpha) = out.headline_alpha(m) {
            recs.push(ResultRecord::new(m.name(), &out.config_hash, "mean", "alpha", alpha));
        }
    }
    let cls: Vec<f64> = out.runs.iter().map(|r| r.classifier_accuracy).collect();
    for (r, v) in out.runs.iter().zip(&cls) {
        recs.push(ResultRecord::new("classifier", &out.config_hash, r.run, "top1_accuracy", *v));
    }
    let (mean, std) = mean_std(&cls);
    recs.push(ResultRecord::new("classifier", &out.config_hash, "mean", "top1_accuracy", mean));
    recs.push(ResultRecord::new("classifier", &out.config_hash, "std", "top1_accuracy", std));
    if let Some(sep) = out.class_sep {
        recs.push(ResultRecord::new("classifier", &out.config_hash, "mean", "class_sep", sep));
    }
    recs
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn table1_rows(out: &ExperimentOutput) -> Vec<Vec<String>> {
    out.methods
        .iter()
        .map(|&m| {
            let (mean, std) = out.accuracy(m);
            vec![m.name().to_string(), mean.to_string(), std.to_string(), fmt_opt(out.headline_alpha(m))]
        })
        .collect()
}

fn pair_rows(out: &ExperimentOutput) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for &m in &out.methods {
        for p in pair_inclusion_stats(&out.pooled(m), out.label_count()) {
            rows.push(vec![
                m.name().to_string(),
                p.label.0.to_string(),
                p.count.to_string(),
                p.probability.to_string(),
                p.mean_set_size.to_string(),
            ]);
        }
    }
    rows
}

fn ccdf_rows(out: &ExperimentOutput) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for &m in &out.methods {
        let acc: Vec<f64> = out.pooled(m).iter().map(|o| o.accuracy).collect();
        for (t, frac) in ccdf(&acc) {
            rows.push(vec![m.name().to_string(), t.to_string(), frac.to_string()]);
        }
    }
    rows
}

fn sweep_table(out: &ExperimentOutput) -> Vec<Vec<String>> {
    sweep_rows(out)
        .into_iter()
        .map(|r| {
            vec![
                r.method.name().to_string(),
                r.alpha.to_string(),
                r.accuracy_mean.to_string(),
                r.accuracy_std.to_string(),
                r.coverage_mean.to_string(),
                r.set_size_mean.to_string(),
                u8::from(r.best).to_string(),
            ]
        })
        .collect()
}

fn gap_table(rows: &[GapRow], prefix: &[String]) -> Vec<Vec<String>> {
    rows.iter()
        .map(|r| {
            let mut row = prefix.to_vec();
            row.extend([
                r.run.to_string(),
                r.instance.clone(),
                r.greedy.to_string(),
                r.brute_force.to_string(),
                r.ratio.to_string(),
            ]);
            row
        })
        .collect()
}

const TABLE1_HEADER: [&str; 4] = ["method", "accuracy_mean", "accuracy_std", "alpha"];
const PAIRS_HEADER: [&str; 5] = ["method", "label", "count", "pair_inclusion", "mean_set_size"];
const CCDF_HEADER: [&str; 3] = ["method", "threshold", "fraction"];
const SWEEP_HEADER: [&str; 7] = [
    "method",
    "alpha",
    "accuracy_mean",
    "accuracy_std",
    "coverage_mean",
    "set_size_mean",
    "best",
];

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Writes `results.csv`, `table1.csv`, `fig2_pairs.csv`, `fig3_ccdf.csv`,
/// `sweep.csv` (with conformal methods) and `gap.csv` (with both optimizers).
pub fn write_experiment(dir: &Path, out: &ExperimentOutput) -> Result<()> {
    ensure_dir(dir)?;
    write_results(&dir.join("results.csv"), &result_records(out))?;
    write_table(&dir.join("table1.csv"), &TABLE1_HEADER, &table1_rows(out))?;
    write_table(&dir.join("fig2_pairs.csv"), &PAIRS_HEADER, &pair_rows(out))?;
    write_table(&dir.join("fig3_ccdf.csv"), &CCDF_HEADER, &ccdf_rows(out))?;
    if !out.best_alpha.is_empty() {
        write_sweep(dir, out)?;
    }
    let gaps = gap_rows(out);
    if !gaps.is_empty() {
        write_table(
            &dir.join("gap.csv"),
            &["run", "instance", "greedy", "brute_force", "ratio"],
            &gap_table(&gaps, &[]),
        )?;
    }
    Ok(())
}

pub fn write_sweep(dir: &Path, out: &ExperimentOutput) -> Result<()> {
    ensure_dir(dir)?;
    write_table(&dir.join("sweep.csv"), &SWEEP_HEADER, &sweep_table(out))
}

/// Finds the cell matching `(gamma, target)` exactly.
pub fn find_cell(cells: &[GridCell], gamma: f64, target: f64) -> Option<&GridCell> {
    cells.iter().find(|c| c.gamma == gamma && c.target == target)
}

/// Grid artifacts: `cells.csv` (long form), `table1.csv` (one row per γ and
/// method, one column per target), `gap.csv`, `results.csv`, and the
/// per-label, per-instance and sweep files of the focus cell.
pub fn write_grid(dir: &Path, cells: &[GridCell], focus: (f64, f64)) -> Result<()> {
    ensure_dir(dir)?;
    let mut long = Vec::new();
    let mut records = Vec::new();
    let mut gaps = Vec::new();
    for cell in cells {
        let (cls_mean, _) = cell.output.classifier_accuracy();
        for &m in &cell.output.methods {
            let (mean, std) = cell.output.accuracy(m);
            long.push(vec![
                cell.gamma.to_string(),
                cell.target.to_string(),
                cell.class_sep.to_string(),
                cls_mean.to_string(),
                m.name().to_string(),
                mean.to_string(),
                std.to_string(),
                fmt_opt(cell.output.headline_alpha(m)),
            ]);
        }
        for mut rec in result_records(&cell.output) {
            rec.method = format!("{}@gamma={},target={}", rec.method, cell.gamma, cell.target);
            records.push(rec);
        }
        gaps.extend(gap_table(
            &gap_rows(&cell.output),
            &[cell.gamma.to_string(), cell.target.to_string()],
        ));
    }
    write_table(
        &dir.join("cells.csv"),
        &[
            "gamma",
            "target",
            "class_sep",
            "classifier_accuracy",
            "method",
            "accuracy_mean",
            "accuracy_std",
            "alpha",
        ],
        &long,
    )?;
    write_results(&dir.join("results.csv"), &records)?;

    let mut gammas: Vec<f64> = cells.iter().map(|c| c.gamma).collect();
    gammas.dedup();
    let mut targets: Vec<f64> = cells.iter().map(|c| c.target).collect();
    targets.sort_by(f64::total_cmp);
    targets.dedup();
    let mut header = vec!["gamma".to_string(), "method".to_string()];
    header.extend(targets.iter().map(|t| format!("target={t}")));
    let mut wide = Vec::new();
    for &gamma in &gammas {
        let methods = cells.iter().find(|c| c.gamma == gamma).map(|c| c.output.methods.clone()).unwrap_or_default();
        for m in methods {
            let mut row = vec![gamma.to_string(), m.name().to_string()];
            for &t in &targets {
                row.push(find_cell(cells, gamma, t).map(|c| c.output.accuracy(m).0.to_string()).unwrap_or_default());
            }
            wide.push(row);
        }
    }
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    write_table(&dir.join("table1.csv"), &header_refs, &wide)?;
    if !gaps.is_empty() {
        write_table(
            &dir.join("gap.csv"),
            &["gamma", "target", "run", "instance", "greedy", "brute_force", "ratio"],
            &gaps,
        )?;
    }

    if let Some(cell) = find_cell(cells, focus.0, focus.1) {
        write_table(&dir.join("fig2_pairs.csv"), &PAIRS_HEADER, &pair_rows(&cell.output))?;
        write_table(&dir.join("fig3_ccdf.csv"), &CCDF_HEADER, &ccdf_rows(&cell.output))?;
        if !cell.output.best_alpha.is_empty() {
            write_sweep(dir, &cell.output)?;
        }
    }
    Ok(())
}

/// Short human-readable summary of one experiment.
pub fn summary_text(out: &ExperimentOutput) -> String {
    let mut s = String::new();
    if let Some(sep) = out.class_sep {
        s.push_str(&format!("class_sep {sep:.4}\n"));
    }
    let (cm, cs) = out.classifier_accuracy();
    s.push_str(&format!("classifier top-1 accuracy {cm:.4} ± {cs:.4}\n"));
    for &m in &out.methods {
        let (mean, std) = out.accuracy(m);
        match out.headline_alpha(m) {
            Some(a) => s.push_str(&format!("{:<12} {mean:.4} ± {std:.4}  (alpha {a})\n", m.name())),
            None => s.push_str(&format!("{:<12} {mean:.4} ± {std:.4}\n", m.name())),
        }
    }
    if let Some(g) = gap_summary(&gap_rows(out)) {
        s.push_str(&format!(
            "greedy/brute-force ratio: min {:.6}, max {:.6}, equality rate {:.4} over {} instances\n",
            g.min_ratio, g.max_ratio, g.equality_rate, g.instances
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn o(truth: usize, size: usize, pair: bool, accuracy: f64) -> InstanceOutcome {
        InstanceOutcome {
            truth: LabelId(truth),
            accuracy,
            objective: accuracy,
            size,
            covered: true,
            pair_included: pair,
        }
    }

    #[test]
    fn ccdf_examples() {
        assert!(ccdf(&[1.0, 1.0]).iter().all(|&(_, v)| v == 1.0));
        let half = ccdf(&[0.0, 1.0]);
        assert_eq!(half[0], (0.0, 1.0));
        assert!(half[1..].iter().all(|&(_, v)| v == 0.5));
        let grid = ccdf_grid();
        assert_eq!(grid.len(), 21);
        assert_eq!(grid[20], 1.0);
    }

    #[test]
    fn ccdf_is_nonincreasing() {
        let values: Vec<f64> = (0..97).map(|i| ((i * 37) % 101) as f64 / 100.0).collect();
        let c = ccdf(&values);
        assert!(c.windows(2).all(|w| w[1].1 <= w[0].1));
    }

    #[test]
    fn pair_inclusion_extremes() {
        let full: Vec<_> = (0..6).map(|i| o(i % 3, 3, true, 1.0)).collect();
        assert!(pair_inclusion_stats(&full, 3).iter().all(|p| p.probability == 1.0 && p.mean_set_size == 3.0));
        let single: Vec<_> = (0..6).map(|i| o(i % 3, 1, false, 1.0)).collect();
        assert!(pair_inclusion_stats(&single, 3).iter().all(|p| p.probability == 0.0));
        let missing = pair_inclusion_stats(&single, 4);
        assert_eq!(missing[3].count, 0);
        assert!(missing[3].probability.is_nan());
    }
}
