//! The experiment protocol: dataset manifests, algorithm sweeps with
//! seeded repeats, aggregate reports, convergence export, the scenario
//! ranking procedure, and Welch's t-test.
//!
//! Every number in a report is a pure function of the run logs: the
//! `report` path recomputes identical tables from the `.jsonl` files
//! alone.

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF, StudentsT};

use crate::dataset::{
    load_dataset, normalize, split_train_test, DatasetView, LabelColumn, SharedDataset,
};
use crate::de_core::CmsId;
use crate::engine::{run_logged, EngineConfig, RunResult};
use crate::error::{Error, Result};
use crate::runlog::{read_log, LogRecord};
use crate::strategy::{default_pool, rank_cms, single_cms_pool, CmsRanking};

/// One line of a dataset manifest: name, CSV path, label column.
#[derive(Debug, Clone)]
pub struct ManifestEntry {
    pub name: String,
    pub path: PathBuf,
    pub label: LabelColumn,
}

/// Reads a manifest: one `name,path,label-column` triple per line,
/// blank lines and `#` comments ignored. Relative paths resolve against
/// the manifest's directory.
pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let mut entries = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(Error::BadManifest {
                path: path.to_path_buf(),
                line: i + 1,
                reason: format!("expected `name,path,label-column`, got {} fields", fields.len()),
            });
        }
        let mut data_path = PathBuf::from(fields[1]);
        if data_path.is_relative() {
            data_path = base.join(data_path);
        }
        entries.push(ManifestEntry {
            name: fields[0].to_string(),
            path: data_path,
            label: fields[2].parse().unwrap(),
        });
    }
    if entries.is_empty() {
        return Err(Error::BadManifest {
            path: path.to_path_buf(),
            line: 0,
            reason: "manifest lists no datasets".into(),
        });
    }
    Ok(entries)
}

/// What to run on each dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Sawde,
    SingleCms(CmsId),
}

impl Algorithm {
    pub fn parse(s: &str) -> Result<Self> {
        if s == "sawde" {
            return Ok(Algorithm::Sawde);
        }
        if let Some(rest) = s.strip_prefix("single-cms:") {
            let id: u8 = rest.parse().map_err(|_| {
                Error::InvalidArgument(format!("bad scenario id in algorithm `{s}`"))
            })?;
            return Ok(Algorithm::SingleCms(CmsId::new(id)?));
        }
        Err(Error::InvalidArgument(format!(
            "unknown algorithm `{s}` (expected `sawde` or `single-cms:1..8`)"
        )))
    }

    pub fn label(&self) -> String {
        match self {
            Algorithm::Sawde => "sawde".into(),
            Algorithm::SingleCms(cms) => format!("single-cms:{}", cms.id()),
        }
    }

    /// Label safe to embed in file names.
    pub fn file_label(&self) -> String {
        self.label().replace(':', "-")
    }

    fn configure(&self, base: &EngineConfig, seed: u64) -> EngineConfig {
        let mut config = base.clone();
        config.seed = seed;
        config.label = self.label();
        config.pool = match self {
            Algorithm::Sawde => default_pool(),
            Algorithm::SingleCms(cms) => single_cms_pool(*cms),
        };
        config
    }
}

/// A full sweep description: datasets x algorithms x seeded repeats.
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub manifest: Vec<ManifestEntry>,
    pub algorithms: Vec<Algorithm>,
    pub repeats: usize,
    pub train_fraction: f64,
    pub base: EngineConfig,
    pub out_dir: PathBuf,
}

/// Summary of one completed run, as written to `runs.csv`.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub dataset: String,
    pub algorithm: String,
    pub repeat: usize,
    pub seed: u64,
    pub feature_count: usize,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub subset_size: usize,
    pub fes_used: u64,
    pub generations: u64,
}

/// Aggregate row over the repeats of one (dataset, algorithm) cell.
#[derive(Debug, Clone)]
pub struct ReportRow {
    pub dataset: String,
    pub algorithm: String,
    pub repeats: usize,
    pub feature_count: usize,
    pub train_mean: f64,
    pub train_std: f64,
    pub test_mean: f64,
    pub test_std: f64,
    pub subset_mean: f64,
    pub subset_std: f64,
    pub reduction_pct: f64,
    pub fes_mean: f64,
    /// Wall-clock seconds; kept out of the report files so identical
    /// sweeps produce identical bytes.
    pub wall_clock_s: f64,
}

#[derive(Debug, Clone, Default)]
pub struct Report {
    pub rows: Vec<ReportRow>,
}

/// A cell that could not run, kept for the machine-readable summary.
#[derive(Debug, Clone, serde::Serialize)]
pub struct CellError {
    pub dataset: String,
    pub algorithm: String,
    pub repeat: usize,
    pub error: String,
}

#[derive(Debug)]
pub struct ExperimentOutcome {
    pub report: Report,
    pub summaries: Vec<RunSummary>,
    pub failures: Vec<CellError>,
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample standard deviation (n - 1 denominator); zero for one repeat.
pub fn std_dev(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    (values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (values.len() - 1) as f64).sqrt()
}

/// Splits, folds, and scales one dataset for a seeded run.
pub fn prepare_views(
    ds: &SharedDataset,
    train_fraction: f64,
    folds: usize,
    seed: u64,
) -> Result<(DatasetView, DatasetView)> {
    let (train, test) = split_train_test(ds, train_fraction, seed)?;
    let train = train.assign_folds(folds, seed)?;
    let (train, test, _) = normalize(&train, &test)?;
    Ok((train, test))
}

struct CellPlan {
    dataset: String,
    data: SharedDataset,
    algorithm: Algorithm,
    repeat: usize,
}

fn run_cell(
    plan: &CellPlan,
    spec: &ExperimentSpec,
) -> std::result::Result<(RunSummary, RunResult, Vec<u8>, f64), CellError> {
    let fail = |e: Error| CellError {
        dataset: plan.dataset.clone(),
        algorithm: plan.algorithm.label(),
        repeat: plan.repeat,
        error: e.to_string(),
    };
    let seed = spec.base.seed + plan.repeat as u64;
    let (train, test) =
        prepare_views(&plan.data, spec.train_fraction, spec.base.folds, seed).map_err(fail)?;
    let config = plan.algorithm.configure(&spec.base, seed);
    let mut log = Vec::new();
    let started = Instant::now();
    let result = run_logged(&config, &train, &test, &mut log).map_err(fail)?;
    let elapsed = started.elapsed().as_secs_f64();
    let summary = RunSummary {
        dataset: plan.dataset.clone(),
        algorithm: plan.algorithm.label(),
        repeat: plan.repeat,
        seed,
        feature_count: plan.data.feature_count(),
        train_accuracy: result.train_accuracy,
        test_accuracy: result.test_accuracy,
        subset_size: result.subset_size,
        fes_used: result.fes_used,
        generations: result.generations,
    };
    Ok((summary, result, log, elapsed))
}

fn aggregate(summaries: &[RunSummary], wall_clock: &[(String, String, f64)]) -> Report {
    let mut keys: Vec<(String, String)> = Vec::new();
    for s in summaries {
        let key = (s.dataset.clone(), s.algorithm.clone());
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    let rows = keys
        .into_iter()
        .map(|(dataset, algorithm)| {
            let cell: Vec<&RunSummary> = summaries
                .iter()
                .filter(|s| s.dataset == dataset && s.algorithm == algorithm)
                .collect();
            let train: Vec<f64> = cell.iter().map(|s| s.train_accuracy).collect();
            let test: Vec<f64> = cell.iter().map(|s| s.test_accuracy).collect();
            let subset: Vec<f64> = cell.iter().map(|s| s.subset_size as f64).collect();
            let fes: Vec<f64> = cell.iter().map(|s| s.fes_used as f64).collect();
            let d = cell[0].feature_count;
            let wall = wall_clock
                .iter()
                .filter(|(ds, alg, _)| *ds == dataset && *alg == algorithm)
                .map(|(_, _, w)| w)
                .sum::<f64>();
            ReportRow {
                dataset,
                algorithm,
                repeats: cell.len(),
                feature_count: d,
                train_mean: mean(&train),
                train_std: std_dev(&train),
                test_mean: mean(&test),
                test_std: std_dev(&test),
                subset_mean: mean(&subset),
                subset_std: std_dev(&subset),
                reduction_pct: 100.0 * (1.0 - mean(&subset) / d as f64),
                fes_mean: mean(&fes),
                wall_clock_s: wall,
            }
        })
        .collect();
    Report { rows }
}

/// Runs every (dataset, algorithm, repeat) cell, writes per-run logs and
/// convergence traces plus `runs.csv` and `report.csv` under the output
/// directory. Load failures mark their cells as failed without aborting
/// the rest of the sweep.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentOutcome> {
    if spec.repeats == 0 {
        return Err(Error::InvalidConfig("repeats must be at least 1".into()));
    }
    fs::create_dir_all(&spec.out_dir).map_err(|source| Error::Io {
        path: spec.out_dir.clone(),
        source,
    })?;

    let mut failures = Vec::new();
    let mut plans = Vec::new();
    for entry in &spec.manifest {
        match load_dataset(&entry.path, &entry.label) {
            Ok(ds) => {
                let data = ds.into_shared();
                for algorithm in &spec.algorithms {
                    for repeat in 0..spec.repeats {
                        plans.push(CellPlan {
                            dataset: entry.name.clone(),
                            data: data.clone(),
                            algorithm: *algorithm,
                            repeat,
                        });
                    }
                }
            }
            Err(e) => {
                for algorithm in &spec.algorithms {
                    for repeat in 0..spec.repeats {
                        failures.push(CellError {
                            dataset: entry.name.clone(),
                            algorithm: algorithm.label(),
                            repeat,
                            error: e.to_string(),
                        });
                    }
                }
            }
        }
    }

    let outcomes: Vec<_> = plans
        .par_iter()
        .map(|plan| (plan, run_cell(plan, spec)))
        .collect();

    let mut summaries = Vec::new();
    let mut wall_clock = Vec::new();
    for (plan, outcome) in outcomes {
        match outcome {
            Ok((summary, result, log, elapsed)) => {
                let stem = format!(
                    "{}__{}__r{}",
                    plan.dataset,
                    plan.algorithm.file_label(),
                    plan.repeat
                );
                let log_path = spec.out_dir.join(format!("{stem}.jsonl"));
                fs::write(&log_path, &log).map_err(|source| Error::Io {
                    path: log_path.clone(),
                    source,
                })?;
                let csv_path = spec.out_dir.join(format!("{stem}.convergence.csv"));
                let csv = convergence_csv_from_result(&result);
                fs::write(&csv_path, csv).map_err(|source| Error::Io {
                    path: csv_path.clone(),
                    source,
                })?;
                wall_clock.push((plan.dataset.clone(), plan.algorithm.label(), elapsed));
                summaries.push(summary);
            }
            Err(cell) => failures.push(cell),
        }
    }

    let report = aggregate(&summaries, &wall_clock);
    write_runs_csv(&spec.out_dir.join("runs.csv"), &summaries)?;
    write_report_csv(&spec.out_dir.join("report.csv"), &report)?;
    Ok(ExperimentOutcome {
        report,
        summaries,
        failures,
    })
}

fn convergence_csv_from_result(result: &RunResult) -> String {
    let mut out = String::from("generation,fes,best_train_accuracy,best_subset_size\n");
    for row in &result.trace {
        out.push_str(&format!(
            "{},{},{},{}\n",
            row.generation, row.fes, row.best_train_accuracy, row.best_subset_size
        ));
    }
    out
}

pub fn write_runs_csv(path: &Path, summaries: &[RunSummary]) -> Result<()> {
    let mut out = String::from(
        "dataset,algorithm,repeat,seed,feature_count,train_accuracy,test_accuracy,\
         subset_size,fes_used,generations\n",
    );
    for s in summaries {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            s.dataset,
            s.algorithm,
            s.repeat,
            s.seed,
            s.feature_count,
            s.train_accuracy,
            s.test_accuracy,
            s.subset_size,
            s.fes_used,
            s.generations
        ));
    }
    fs::write(path, out).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_report_csv(path: &Path, report: &Report) -> Result<()> {
    let mut out = String::from(
        "dataset,algorithm,repeats,feature_count,train_mean,train_std,test_mean,test_std,\
         subset_mean,subset_std,reduction_pct,fes_mean\n",
    );
    for r in &report.rows {
        out.push_str(&format!(
            "{},{},{},{},{:.4},{:.4},{:.4},{:.4},{:.2},{:.2},{:.2},{:.1}\n",
            r.dataset,
            r.algorithm,
            r.repeats,
            r.feature_count,
            r.train_mean,
            r.train_std,
            r.test_mean,
            r.test_std,
            r.subset_mean,
            r.subset_std,
            r.reduction_pct,
            r.fes_mean
        ));
    }
    fs::write(path, out).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Rebuilds the aggregate report from the run logs in a directory —
/// the same numbers `run_experiment` produced, recomputed offline.
pub fn report_from_logs(dir: &Path) -> Result<Report> {
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|source| Error::Io {
            path: dir.to_path_buf(),
            source,
        })?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "jsonl"))
        .collect();
    entries.sort();

    let mut summaries = Vec::new();
    for path in entries {
        let file = fs::File::open(&path).map_err(|source| Error::Io {
            path: path.clone(),
            source,
        })?;
        let records = read_log(BufReader::new(file))?;
        let start = records.iter().find_map(|r| match r {
            LogRecord::RunStart {
                dataset,
                algorithm,
                feature_count,
                seed,
                ..
            } => Some((dataset.clone(), algorithm.clone(), *feature_count, *seed)),
            _ => None,
        });
        let end = records.iter().find_map(|r| match r {
            LogRecord::RunEnd {
                train_accuracy,
                test_accuracy,
                subset_size,
                fes_used,
                generations,
                ..
            } => Some((*train_accuracy, *test_accuracy, *subset_size, *fes_used, *generations)),
            _ => None,
        });
        if let (Some((dataset, algorithm, d, seed)), Some((train, test, subset, fes, gens))) =
            (start, end)
        {
            summaries.push(RunSummary {
                dataset,
                algorithm,
                repeat: 0,
                seed,
                feature_count: d,
                train_accuracy: train,
                test_accuracy: test,
                subset_size: subset,
                fes_used: fes,
                generations: gens,
            });
        }
    }
    Ok(aggregate(&summaries, &[]))
}

/// Exports the per-generation trace of a run log as a CSV.
pub fn emit_convergence(log_path: &Path) -> Result<String> {
    let file = fs::File::open(log_path).map_err(|source| Error::Io {
        path: log_path.to_path_buf(),
        source,
    })?;
    let records = read_log(BufReader::new(file))?;
    let mut out = String::from("generation,fes,best_train_accuracy,best_subset_size\n");
    for record in &records {
        if let LogRecord::Generation {
            generation,
            fes,
            best_train_accuracy,
            best_subset_size,
            ..
        } = record
        {
            out.push_str(&format!(
                "{generation},{fes},{best_train_accuracy},{best_subset_size}\n"
            ));
        }
    }
    Ok(out)
}

/// Runs all eight single-scenario baselines over the manifest and ranks
/// them by the elimination procedure. Returns the mean-training-accuracy
/// table (datasets x scenarios) alongside the ranking.
pub fn rank_cms_experiment(
    manifest: &[ManifestEntry],
    base: &EngineConfig,
    repeats: usize,
    train_fraction: f64,
) -> Result<(Vec<[f64; 8]>, Vec<String>, CmsRanking)> {
    let mut table = Vec::new();
    let mut names = Vec::new();
    for entry in manifest {
        let data = load_dataset(&entry.path, &entry.label)?.into_shared();
        let cells: Vec<(usize, usize)> = (0..8)
            .flat_map(|cms| (0..repeats).map(move |r| (cms, r)))
            .collect();
        let accuracies: Vec<(usize, f64)> = cells
            .par_iter()
            .map(|&(cms, repeat)| {
                let algorithm = Algorithm::SingleCms(CmsId::new(cms as u8 + 1).unwrap());
                let seed = base.seed + repeat as u64;
                let (train, test) = prepare_views(&data, train_fraction, base.folds, seed)?;
                let config = algorithm.configure(base, seed);
                let result = crate::engine::run(&config, &train, &test)?;
                Ok((cms, result.train_accuracy))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut row = [0.0f64; 8];
        for cms in 0..8 {
            let values: Vec<f64> = accuracies
                .iter()
                .filter(|(c, _)| *c == cms)
                .map(|(_, a)| *a)
                .collect();
            row[cms] = mean(&values);
        }
        table.push(row);
        names.push(entry.name.clone());
    }
    let ranking = rank_cms(&table)?;
    Ok((table, names, ranking))
}

/// Result of a two-sided Welch's t-test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WelchTest {
    pub statistic: f64,
    pub df: f64,
    pub p_value: f64,
}

/// Two-sided Welch's (unequal-variance) t-test. Two degenerate samples
/// with zero spread compare as p = 1 when their means agree and p = 0
/// otherwise.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<WelchTest> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::InvalidArgument(
            "welch_t_test needs at least two observations per sample".into(),
        ));
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (ma, mb) = (mean(a), mean(b));
    let va = a.iter().map(|v| (v - ma).powi(2)).sum::<f64>() / (na - 1.0);
    let vb = b.iter().map(|v| (v - mb).powi(2)).sum::<f64>() / (nb - 1.0);

    if va == 0.0 && vb == 0.0 {
        return Ok(if ma == mb {
            WelchTest {
                statistic: 0.0,
                df: na + nb - 2.0,
                p_value: 1.0,
            }
        } else {
            WelchTest {
                statistic: if ma > mb { f64::INFINITY } else { f64::NEG_INFINITY },
                df: na + nb - 2.0,
                p_value: 0.0,
            }
        });
    }

    let se2 = va / na + vb / nb;
    let statistic = (ma - mb) / se2.sqrt();
    let df = se2.powi(2)
        / ((va / na).powi(2) / (na - 1.0) + (vb / nb).powi(2) / (nb - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df)
        .map_err(|e| Error::InvalidArgument(format!("t distribution: {e}")))?;
    let p_value = (2.0 * (1.0 - dist.cdf(statistic.abs()))).clamp(0.0, 1.0);
    Ok(WelchTest {
        statistic,
        df,
        p_value,
    })
}

/// Chi-square goodness-of-fit p-value against a uniform distribution
/// over the bins.
pub fn chi_square_uniform_p(counts: &[u64]) -> Result<f64> {
    if counts.len() < 2 {
        return Err(Error::InvalidArgument(
            "chi-square needs at least two bins".into(),
        ));
    }
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(Error::InvalidArgument("chi-square needs observations".into()));
    }
    let expected = total as f64 / counts.len() as f64;
    let stat: f64 = counts
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum();
    let dist = ChiSquared::new((counts.len() - 1) as f64)
        .map_err(|e| Error::InvalidArgument(format!("chi-square distribution: {e}")))?;
    Ok((1.0 - dist.cdf(stat)).clamp(0.0, 1.0))
}

/// Reads one numeric column from a headered CSV, optionally keeping only
/// rows where `filter` (a `column=value` pair) matches.
pub fn read_csv_column(path: &Path, column: &str, filter: Option<(&str, &str)>) -> Result<Vec<f64>> {
    let file = fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let headers = reader
        .headers()
        .map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))?
        .clone();
    let col = headers
        .iter()
        .position(|h| h == column)
        .ok_or_else(|| Error::InvalidArgument(format!("column `{column}` not found")))?;
    let filter_col = match filter {
        Some((name, _)) => Some(
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::InvalidArgument(format!("filter column `{name}` not found")))?,
        ),
        None => None,
    };
    let mut values = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::InvalidArgument(format!("row {}: {e}", i + 1)))?;
        if let (Some(fc), Some((_, want))) = (filter_col, filter) {
            if record.get(fc) != Some(want) {
                continue;
            }
        }
        let cell = record.get(col).unwrap_or("");
        let value: f64 = cell.parse().map_err(|_| Error::BadCell {
            path: path.to_path_buf(),
            row: i + 1,
            column: col + 1,
            value: cell.to_string(),
        })?;
        values.push(value);
    }
    Ok(values)
}
