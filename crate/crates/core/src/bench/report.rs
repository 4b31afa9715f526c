use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use super::ResultRecord;
use crate::error::{Error, Result};

/// Writes records as CSV with the header
/// `dataset,algo,fold,seed,test_accuracy,train_accuracy,time_ms`.
pub fn write_csv<W: Write>(records: &[ResultRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if records.is_empty() {
        w.write_record([
            "dataset",
            "algo",
            "fold",
            "seed",
            "test_accuracy",
            "train_accuracy",
            "time_ms",
        ])?;
    }
    for r in records {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<ResultRecord>> {
    let mut r = csv::Reader::from_reader(input);
    Ok(r.deserialize()
        .collect::<std::result::Result<Vec<_>, _>>()?)
}

/// Test accuracy of one (dataset, algo) pair across all of its cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub dataset: String,
    pub algo: String,
    pub mean: f64,
    /// Sample standard deviation; 0 for a single cell.
    pub std: f64,
    pub n: usize,
}

/// Groups records by (dataset, algo), in sorted order.
pub fn summarize(records: &[ResultRecord]) -> Vec<Summary> {
    let mut groups: BTreeMap<(&str, &str), Vec<f64>> = BTreeMap::new();
    for r in records {
        groups
            .entry((&r.dataset, &r.algo))
            .or_default()
            .push(r.test_accuracy);
    }
    groups
        .into_iter()
        .map(|((dataset, algo), v)| {
            let n = v.len();
            let mean = v.iter().sum::<f64>() / n as f64;
            let std = if n > 1 {
                (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
            } else {
                0.0
            };
            Summary {
                dataset: dataset.to_string(),
                algo: algo.to_string(),
                mean,
                std,
                n,
            }
        })
        .collect()
}

/// Datasets as rows, algorithms as columns, cells `mean ± std` test accuracy
/// in percent. The best mean of each row is bold.
pub fn markdown_table(records: &[ResultRecord]) -> String {
    let summaries = summarize(records);
    let mut algos: Vec<&str> = summaries.iter().map(|s| s.algo.as_str()).collect();
    algos.sort_unstable();
    algos.dedup();
    let mut datasets: Vec<&str> = summaries.iter().map(|s| s.dataset.as_str()).collect();
    datasets.dedup();

    let mut out = format!(
        "| dataset | {} |\n|---|{}\n",
        algos.join(" | "),
        "---|".repeat(algos.len())
    );
    for ds in datasets {
        let row: Vec<&Summary> = summaries.iter().filter(|s| s.dataset == ds).collect();
        let best = row.iter().map(|s| s.mean).fold(f64::NEG_INFINITY, f64::max);
        let cells: Vec<String> = algos
            .iter()
            .map(|a| match row.iter().find(|s| s.algo == *a) {
                Some(s) => {
                    let text = format!("{:.2} ± {:.2}", 100.0 * s.mean, 100.0 * s.std);
                    if s.mean == best {
                        format!("**{text}**")
                    } else {
                        text
                    }
                }
                None => "-".into(),
            })
            .collect();
        out.push_str(&format!("| {ds} | {} |\n", cells.join(" | ")));
    }
    out
}

/// Writes a markdown table for `.md` paths and CSV otherwise.
pub fn write_report(records: &[ResultRecord], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    if path.extension().is_some_and(|e| e == "md") {
        let mut f = file;
        f.write_all(markdown_table(records).as_bytes())
            .map_err(|e| Error::io(path, e))
    } else {
        write_csv(records, file)
    }
}
