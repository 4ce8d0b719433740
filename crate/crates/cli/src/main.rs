use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use expert_sets::experiment::{
    alpha_sweep, export_generated, report, run_experiment, run_grid, write_experiment, write_grid, ExperimentConfig,
    Profile,
};
use expert_sets::hardness::{clique_to_instance, max_clique_bruteforce, DEFAULT_CLIQUE_CAP};
use expert_sets::ingest::{load_graph, save_scored_dataset, write_confusion, write_prob_vector};
use expert_sets::optimizer::{brute_force_set, greedy_set, BRUTE_FORCE_MAX_LABELS};
use expert_sets::verify::{hardness_suite, incremental_suite, prefix_dominance_suite};
use expert_sets::{Error, Result};

/// Prediction sets for human experts: synthetic benchmarks, experiments and
/// hardness checks.
#[derive(Debug, Parser)]
#[command(name = "expert-sets", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic task and export its calibration and test records.
    Gen {
        #[arg(long)]
        config: PathBuf,
        /// Scored dataset CSV to write.
        #[arg(long)]
        out: PathBuf,
        /// Optional CSV for the expert confusion matrix estimated from the
        /// exported calibration records.
        #[arg(long)]
        confusion_out: Option<PathBuf>,
    },
    /// Run an experiment and write results.csv, table1.csv, fig2_pairs.csv,
    /// fig3_ccdf.csv, sweep.csv and gap.csv.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Override split sizes and run count: `desk` or `full`.
        #[arg(long)]
        profile: Option<String>,
    },
    /// Evaluate the conformal methods at every alpha of the grid (sweep.csv).
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        profile: Option<String>,
    },
    /// Turn a graph file into the instance of the clique reduction.
    Reduce {
        #[arg(long)]
        graph: PathBuf,
        /// Directory receiving scores.csv and confusion.csv.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the randomized optimizer and reduction self-checks.
    Verify {
        #[arg(long, default_value_t = 500)]
        instances: usize,
        #[arg(long, default_value_t = 10_000)]
        sequences: usize,
        #[arg(long, default_value_t = 100)]
        graphs: usize,
        #[arg(long, default_value_t = 12)]
        max_labels: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run the gamma x target-accuracy grid and write the table and figure data.
    Report {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        profile: Option<String>,
    },
}

enum Failure {
    Error(Error),
    Verify,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Error(e)
    }
}

fn load_config(path: &Path, profile: Option<&str>) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(p) = profile {
        cfg.apply_profile(p.parse::<Profile>()?);
        cfg.validate()?;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> std::result::Result<(), Failure> {
    match cli.command {
        Command::Gen {
            config,
            out,
            confusion_out,
        } => {
            let cfg = load_config(&config, None)?;
            let ds = export_generated(&cfg)?;
            save_scored_dataset(&out, &ds)?;
            if let Some(path) = confusion_out {
                let pairs: Vec<_> = ds
                    .records_in(expert_sets::Split::Calib)
                    .filter_map(|r| r.human_pred.map(|h| (h, r.true_label)))
                    .collect();
                if pairs.is_empty() {
                    return Err(Error::MissingHumanPredictions.into());
                }
                let smoothing = match cfg.expert {
                    expert_sets::experiment::ExpertSource::Gamma { smoothing, .. } => smoothing,
                    _ => 0.0,
                };
                let c = expert_sets::normalize_counts(
                    &expert_sets::types::count_pairs(pairs, ds.label_count()),
                    smoothing,
                )?;
                write_confusion(&path, &c)?;
            }
            println!("wrote {} records to {}", ds.len(), out.display());
        }
        Command::Run { config, out, profile } => {
            let cfg = load_config(&config, profile.as_deref())?;
            let output = run_experiment(&cfg)?;
            write_experiment(&out, &output)?;
            print!("{}", report::summary_text(&output));
        }
        Command::Sweep { config, out, profile } => {
            let cfg = load_config(&config, profile.as_deref())?;
            let output = alpha_sweep(&cfg)?;
            report::write_sweep(&out, &output)?;
            for row in report::sweep_rows(&output).iter().filter(|r| r.best) {
                println!("{:<10} best alpha {} accuracy {:.4}", row.method.name(), row.alpha, row.accuracy_mean);
            }
        }
        Command::Reduce { graph, out } => {
            let g = load_graph(&graph)?;
            let (f, c) = clique_to_instance(&g);
            std::fs::create_dir_all(&out).map_err(|e| Error::IoFailure {
                path: out.clone(),
                source: e,
            })?;
            write_prob_vector(&out.join("scores.csv"), &f)?;
            write_confusion(&out.join("confusion.csv"), &c)?;
            let n = g.vertex_count();
            println!("{n} labels, {} edges", g.edges().len());
            if n >= 1 {
                let greedy = greedy_set(&f, &c)?;
                println!("greedy      {} value {}", greedy.set, greedy.value);
            }
            if n <= BRUTE_FORCE_MAX_LABELS.min(DEFAULT_CLIQUE_CAP) && n >= 1 {
                let (set, value) = brute_force_set(&f, &c, BRUTE_FORCE_MAX_LABELS)?;
                let (omega, clique) = max_clique_bruteforce(&g, DEFAULT_CLIQUE_CAP)?;
                println!("brute force {set} value {value}");
                println!("max clique  {clique} size {omega} (omega/n = {})", omega as f64 / n as f64);
            }
        }
        Command::Verify {
            instances,
            sequences,
            graphs,
            max_labels,
            seed,
        } => {
            let reports = [
                prefix_dominance_suite(instances, max_labels.max(2), seed)?,
                incremental_suite(sequences, max_labels.max(1), seed)?,
                hardness_suite(graphs, seed)?,
            ];
            for r in &reports {
                println!("{r}");
            }
            if reports.iter().any(|r| !r.passed()) {
                return Err(Failure::Verify);
            }
        }
        Command::Report { config, out, profile } => {
            let cfg = load_config(&config, profile.as_deref())?;
            let cells = run_grid(&cfg)?;
            let focus = cfg.grid.clone().unwrap_or_default().focus;
            write_grid(&out, &cells, focus)?;
            for cell in &cells {
                let accs: Vec<String> = cell
                    .output
                    .methods
                    .iter()
                    .map(|&m| format!("{} {:.3}", m.name(), cell.output.accuracy(m).0))
                    .collect();
                println!("gamma {} target {}: {}", cell.gamma, cell.target, accs.join(", "));
            }
        }
    }
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvariantAudit(_) => 3,
        Error::Config(_)
        | Error::TooManyClassesForHypercube { .. }
        | Error::MalformedHeader { .. }
        | Error::ArityMismatch { .. }
        | Error::ScoreSumOutOfTolerance { .. }
        | Error::Parse { .. }
        | Error::SizeMismatch { .. }
        | Error::MissingHumanPredictions => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Verify) => ExitCode::from(3),
        Err(Failure::Error(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
