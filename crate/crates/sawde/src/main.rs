//! Command-line surface over the library: single runs, manifest sweeps,
//! scenario ranking, report aggregation, and t-tests.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sawde::dataset::{load_dataset, LabelColumn};
use sawde::engine::{run_logged, EngineConfig};
use sawde::harness::{
    emit_convergence, prepare_views, rank_cms_experiment, read_csv_column, read_manifest,
    report_from_logs, run_experiment, welch_t_test, Algorithm, ExperimentSpec,
};
use sawde::Result;

#[derive(Parser)]
#[command(name = "sawde", version, about = "Wrapper feature selection by self-adaptive weighted differential evolution")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct EngineArgs {
    /// Population size N.
    #[arg(long, default_value_t = 100)]
    population_size: usize,
    /// Number of equal sub-populations (2, 4, 5 or 10).
    #[arg(long, default_value_t = 5)]
    sub_populations: usize,
    /// Evaluation budget.
    #[arg(long, default_value_t = 1_000_000)]
    max_fes: u64,
    /// Binarization threshold.
    #[arg(long, default_value_t = 0.6)]
    theta: f64,
    /// Nearest neighbors used by the fitness classifier.
    #[arg(long, default_value_t = 3)]
    k_neighbors: usize,
    /// Cross-validation folds.
    #[arg(long, default_value_t = 3)]
    folds: usize,
    /// Master seed (seed + repeat index per repeat).
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Stop early on perfect training accuracy with a small subset.
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    early_stop: bool,
    /// Fitness-evaluation worker threads.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Train fraction of the stratified split.
    #[arg(long, default_value_t = 0.7)]
    train_fraction: f64,
}

impl EngineArgs {
    fn to_config(&self) -> EngineConfig {
        let mut config = EngineConfig::new(self.seed);
        config.population_size = self.population_size;
        config.sub_populations = self.sub_populations;
        config.max_fes = self.max_fes;
        config.theta = self.theta;
        config.k_neighbors = self.k_neighbors;
        config.folds = self.folds;
        config.early_stop = self.early_stop;
        config.workers = self.workers;
        config
    }
}

#[derive(Subcommand)]
enum Command {
    /// Optimize one dataset with one algorithm.
    Run {
        /// Dataset CSV (headered).
        #[arg(long)]
        data: PathBuf,
        /// Label column: `first`, `last`, or a header name.
        #[arg(long, default_value = "last")]
        label_column: LabelColumn,
        /// `sawde` or `single-cms:1..8`.
        #[arg(long, default_value = "sawde")]
        algorithm: String,
        #[command(flatten)]
        engine: EngineArgs,
        /// Directory for the run log and convergence CSV.
        #[arg(long, default_value = "sawde-out")]
        out_dir: PathBuf,
    },
    /// Sweep a dataset manifest: algorithms x seeded repeats.
    Experiment {
        /// Manifest: one `name,path,label-column` per line.
        #[arg(long)]
        manifest: PathBuf,
        /// Comma-separated algorithm list.
        #[arg(long, default_value = "sawde")]
        algorithms: String,
        #[arg(long, default_value_t = 5)]
        repeats: usize,
        #[command(flatten)]
        engine: EngineArgs,
        #[arg(long, default_value = "sawde-out")]
        out_dir: PathBuf,
    },
    /// Run the eight single-scenario baselines and rank them.
    RankCms {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value_t = 1)]
        repeats: usize,
        #[command(flatten)]
        engine: EngineArgs,
        #[arg(long, default_value = "sawde-out")]
        out_dir: PathBuf,
    },
    /// Rebuild the aggregate report from run logs.
    Report {
        /// Directory holding `.jsonl` run logs.
        #[arg(long)]
        logs: PathBuf,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Export the convergence trace of one run log as CSV.
    Convergence {
        #[arg(long)]
        log: PathBuf,
        /// Output CSV path (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Welch's t-test between two result columns.
    Ttest {
        /// First CSV file.
        #[arg(long)]
        a: PathBuf,
        /// Second CSV file.
        #[arg(long)]
        b: PathBuf,
        /// Column to compare.
        #[arg(long)]
        column: String,
        /// Keep only rows of `a` where `column=value`.
        #[arg(long)]
        filter_a: Option<String>,
        /// Keep only rows of `b` where `column=value`.
        #[arg(long)]
        filter_b: Option<String>,
    },
}

/// `SAWDE_OUT_DIR` overrides any `--out-dir` flag.
fn resolve_out_dir(flag: PathBuf) -> PathBuf {
    std::env::var("SAWDE_OUT_DIR").map(PathBuf::from).unwrap_or(flag)
}

fn parse_filter(raw: &Option<String>) -> Result<Option<(String, String)>> {
    match raw {
        None => Ok(None),
        Some(s) => {
            let (k, v) = s.split_once('=').ok_or_else(|| {
                sawde::Error::InvalidArgument(format!("filter `{s}` must look like column=value"))
            })?;
            Ok(Some((k.to_string(), v.to_string())))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{}", serde_json::json!({ "error": e.to_string() }));
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run {
            data,
            label_column,
            algorithm,
            engine,
            out_dir,
        } => {
            let out_dir = resolve_out_dir(out_dir);
            fs::create_dir_all(&out_dir).map_err(|source| sawde::Error::Io {
                path: out_dir.clone(),
                source,
            })?;
            let algorithm = Algorithm::parse(&algorithm)?;
            let ds = load_dataset(&data, &label_column)?.into_shared();
            let (train, test) =
                prepare_views(&ds, engine.train_fraction, engine.folds, engine.seed)?;
            let mut config = engine.to_config();
            config.label = algorithm.label();
            config.pool = match algorithm {
                Algorithm::Sawde => sawde::strategy::default_pool(),
                Algorithm::SingleCms(cms) => sawde::strategy::single_cms_pool(cms),
            };
            let stem = format!("{}__{}__s{}", ds.name(), algorithm.file_label(), engine.seed);
            let log_path = out_dir.join(format!("{stem}.jsonl"));
            let mut log = Vec::new();
            let result = run_logged(&config, &train, &test, &mut log)?;
            fs::write(&log_path, &log).map_err(|source| sawde::Error::Io {
                path: log_path.clone(),
                source,
            })?;
            let csv_path = out_dir.join(format!("{stem}.convergence.csv"));
            fs::write(&csv_path, emit_convergence(&log_path)?).map_err(|source| {
                sawde::Error::Io {
                    path: csv_path.clone(),
                    source,
                }
            })?;
            println!(
                "dataset={} algorithm={} train_accuracy={:.4} test_accuracy={:.4} \
                 subset_size={} reduction={:.1}% fes={} generations={}{}",
                ds.name(),
                algorithm.label(),
                result.train_accuracy,
                result.test_accuracy,
                result.subset_size,
                100.0 * result.reduction_rate,
                result.fes_used,
                result.generations,
                if result.early_stopped { " (early stop)" } else { "" },
            );
            println!("log: {}", log_path.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Experiment {
            manifest,
            algorithms,
            repeats,
            engine,
            out_dir,
        } => {
            let out_dir = resolve_out_dir(out_dir);
            let algorithms = algorithms
                .split(',')
                .map(|s| Algorithm::parse(s.trim()))
                .collect::<Result<Vec<_>>>()?;
            let spec = ExperimentSpec {
                manifest: read_manifest(&manifest)?,
                algorithms,
                repeats,
                train_fraction: engine.train_fraction,
                base: engine.to_config(),
                out_dir: out_dir.clone(),
            };
            let outcome = run_experiment(&spec)?;
            for row in &outcome.report.rows {
                println!(
                    "{:<24} {:<14} train {:.4} ± {:.4}  test {:.4} ± {:.4}  subset {:.1} \
                     ({:.1}% reduction)  wall {:.1}s",
                    row.dataset,
                    row.algorithm,
                    row.train_mean,
                    row.train_std,
                    row.test_mean,
                    row.test_std,
                    row.subset_mean,
                    row.reduction_pct,
                    row.wall_clock_s,
                );
            }
            println!("report: {}", out_dir.join("report.csv").display());
            if outcome.failures.is_empty() {
                Ok(ExitCode::SUCCESS)
            } else {
                eprintln!(
                    "{}",
                    serde_json::json!({ "failed_cells": outcome.failures })
                );
                Ok(ExitCode::FAILURE)
            }
        }
        Command::RankCms {
            manifest,
            repeats,
            engine,
            out_dir,
        } => {
            let out_dir = resolve_out_dir(out_dir);
            fs::create_dir_all(&out_dir).map_err(|source| sawde::Error::Io {
                path: out_dir.clone(),
                source,
            })?;
            let entries = read_manifest(&manifest)?;
            let (table, names, ranking) =
                rank_cms_experiment(&entries, &engine.to_config(), repeats, engine.train_fraction)?;
            let mut csv = String::from(
                "dataset,cms1,cms2,cms3,cms4,cms5,cms6,cms7,cms8\n",
            );
            for (name, row) in names.iter().zip(table.iter()) {
                csv.push_str(name);
                for v in row {
                    csv.push_str(&format!(",{v:.4}"));
                }
                csv.push('\n');
            }
            let table_path = out_dir.join("cms_accuracy.csv");
            fs::write(&table_path, csv).map_err(|source| sawde::Error::Io {
                path: table_path.clone(),
                source,
            })?;
            println!("worst counts: {:?}", ranking.worst_counts);
            let kept: Vec<String> = ranking
                .selected
                .iter()
                .map(|c| format!("CMS{}", c.id()))
                .collect();
            println!("selected base: {{{}}}", kept.join(", "));
            println!("table: {}", table_path.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Report { logs, out } => {
            let report = report_from_logs(&logs)?;
            sawde::harness::write_report_csv(&out, &report)?;
            println!("{} rows -> {}", report.rows.len(), out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Convergence { log, out } => {
            let csv = emit_convergence(&log)?;
            match out {
                Some(path) => {
                    fs::write(&path, csv).map_err(|source| sawde::Error::Io {
                        path: path.clone(),
                        source,
                    })?;
                    println!("wrote {}", path.display());
                }
                None => print!("{csv}"),
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Ttest {
            a,
            b,
            column,
            filter_a,
            filter_b,
        } => {
            let fa = parse_filter(&filter_a)?;
            let fb = parse_filter(&filter_b)?;
            let sample_a = read_csv_column(&a, &column, fa.as_ref().map(|(k, v)| (k.as_str(), v.as_str())))?;
            let sample_b = read_csv_column(&b, &column, fb.as_ref().map(|(k, v)| (k.as_str(), v.as_str())))?;
            let test = welch_t_test(&sample_a, &sample_b)?;
            println!(
                "n_a={} n_b={} t={:.6} df={:.3} p={:.6}",
                sample_a.len(),
                sample_b.len(),
                test.statistic,
                test.df,
                test.p_value
            );
            Ok(ExitCode::SUCCESS)
        }
    }
}
