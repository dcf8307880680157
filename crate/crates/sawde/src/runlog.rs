//! Line-delimited structured run logs.
//!
//! Every engine run can stream one JSON record per line: a header, one
//! record per generation (with strategy-counter snapshots), selection,
//! reward and injection events, and a closing summary. The encoding is
//! byte-deterministic, so identical runs produce identical logs.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LogRecord {
    RunStart {
        dataset: String,
        algorithm: String,
        feature_count: usize,
        train_rows: usize,
        test_rows: usize,
        population_size: usize,
        sub_populations: usize,
        max_fes: u64,
        theta: f64,
        k_neighbors: usize,
        folds: usize,
        seed: u64,
        early_stop: bool,
        pool: Vec<Vec<u8>>,
    },
    Generation {
        generation: u64,
        fes: u64,
        best_train_accuracy: f64,
        best_subset_size: usize,
        ens_num: Vec<u64>,
        change: Vec<f64>,
        c_fes: Vec<u64>,
        reward: Vec<u64>,
    },
    EnsSelection {
        generation: u64,
        sub_population: usize,
        ens: u8,
        forced: bool,
    },
    Reward {
        generation: u64,
        sub_population: usize,
        ens: u8,
    },
    Injection {
        generation: u64,
        fes: u64,
        fitness: f64,
        subset_size: usize,
        replaced_fitness: f64,
    },
    RunEnd {
        train_accuracy: f64,
        test_accuracy: f64,
        subset_size: usize,
        reduction_rate: f64,
        fes_used: u64,
        generations: u64,
    },
}

pub fn write_record(sink: &mut dyn Write, record: &LogRecord) -> std::io::Result<()> {
    serde_json::to_writer(&mut *sink, record)?;
    sink.write_all(b"\n")
}

/// Parses a whole log. A line that fails to parse aborts with an error
/// naming the last record that was still valid.
pub fn read_log(reader: impl BufRead) -> Result<Vec<LogRecord>> {
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::TruncatedLog {
            last_valid: records.len(),
            detail: format!("line {}: {e}", i + 1),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let record: LogRecord =
            serde_json::from_str(&line).map_err(|e| Error::TruncatedLog {
                last_valid: records.len(),
                detail: format!("line {}: {e}", i + 1),
            })?;
        records.push(record);
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn records_round_trip_bytewise() {
        let records = vec![
            LogRecord::Generation {
                generation: 1,
                fes: 430,
                best_train_accuracy: 0.875,
                best_subset_size: 9,
                ens_num: vec![1, 0],
                change: vec![0.25, 0.0],
                c_fes: vec![120, 0],
                reward: vec![0, 0],
            },
            LogRecord::RunEnd {
                train_accuracy: 0.875,
                test_accuracy: 0.8,
                subset_size: 9,
                reduction_rate: 0.55,
                fes_used: 430,
                generations: 1,
            },
        ];
        let mut a = Vec::new();
        let mut b = Vec::new();
        for r in &records {
            write_record(&mut a, r).unwrap();
            write_record(&mut b, r).unwrap();
        }
        assert_eq!(a, b);
        assert_eq!(read_log(a.as_slice()).unwrap(), records);
    }

    #[test]
    fn truncated_log_names_the_last_valid_record() {
        let mut bytes = Vec::new();
        write_record(
            &mut bytes,
            &LogRecord::Reward {
                generation: 20,
                sub_population: 0,
                ens: 3,
            },
        )
        .unwrap();
        bytes.extend_from_slice(b"{\"type\":\"generation\",\"generatio");
        let err = read_log(bytes.as_slice()).unwrap_err();
        match err {
            Error::TruncatedLog { last_valid, .. } => assert_eq!(last_valid, 1),
            other => panic!("unexpected error {other:?}"),
        }
    }
}
