//! On-disk experiment artifacts.
//!
//! Layout of an output directory:
//!
//! ```text
//! results.csv          drop_seed,method,utility,mean_rate_mbps,mbs_load,sbs_load_1..,runtime_ms
//! records.jsonl        full per-drop records, one JSON object per line
//! traces/*.jsonl       per-iteration CEAS traces
//! cdf_<method>.csv     rate_bps,cumulative_fraction
//! load_shares.csv      method,mbs_share_pct,sbs_share_pct
//! summary.csv          per-method means
//! aggregates.json      the same, as JSON
//! sweep_curves.csv     sensitivity sweep curves (sweeps only)
//! sweep_summary.csv
//! ```

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::ce::CERunTrace;
use crate::error::{Error, Result};
use crate::harness::{
    load_shares, rate_cdf, slug, trace_file_name, DropRecord, ExperimentResult, SweepCell,
};

pub struct ResultWriter {
    dir: PathBuf,
    n_sbs: usize,
    results: csv::Writer<File>,
    records: BufWriter<File>,
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Io(std::io::Error::other(format!("{other:?}"))),
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

impl ResultWriter {
    pub fn create(dir: impl AsRef<Path>, n_sbs: usize) -> Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(dir.join("traces"))?;
        let mut results = csv::Writer::from_path(dir.join("results.csv")).map_err(csv_err)?;
        let mut header: Vec<String> = [
            "drop_seed",
            "method",
            "utility",
            "mean_rate_mbps",
            "mbs_load",
        ]
        .map(String::from)
        .to_vec();
        header.extend((1..=n_sbs).map(|k| format!("sbs_load_{k}")));
        header.push("runtime_ms".into());
        results.write_record(&header).map_err(csv_err)?;
        let records = BufWriter::new(File::create(dir.join("records.jsonl"))?);
        Ok(Self {
            dir,
            n_sbs,
            results,
            records,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        let text = serde_json::to_string_pretty(value)?;
        fs::write(self.dir.join(name), text + "\n")?;
        Ok(())
    }

    pub fn append_drop(
        &mut self,
        records: &[DropRecord],
        traces: &[(usize, String, CERunTrace)],
    ) -> Result<()> {
        for r in records {
            let mut row = vec![
                r.drop_seed.to_string(),
                r.method.clone(),
                fmt_opt(r.utility),
                if r.is_ok() {
                    (r.mean_rate_bps / 1e6).to_string()
                } else {
                    String::new()
                },
                if r.is_ok() {
                    r.macro_load().to_string()
                } else {
                    String::new()
                },
            ];
            let small = r.small_loads();
            row.extend(
                (0..self.n_sbs).map(|k| small.get(k).map_or_else(String::new, usize::to_string)),
            );
            row.push(format!("{:.3}", r.runtime_ms));
            self.results.write_record(&row).map_err(csv_err)?;
            serde_json::to_writer(&mut self.records, r)?;
            self.records.write_all(b"\n")?;
        }
        for (drop, method, trace) in traces {
            let path = self.dir.join(trace_file_name(method, *drop));
            fs::write(path, trace.to_jsonl())?;
        }
        self.results.flush()?;
        self.records.flush()?;
        Ok(())
    }

    pub fn finish(&mut self, result: &ExperimentResult) -> Result<()> {
        for agg in &result.aggregates {
            let recs: Vec<&DropRecord> = result.records_for(&agg.method).collect();
            if let Ok(cdf) = rate_cdf(&recs) {
                let mut w =
                    csv::Writer::from_path(self.dir.join(format!("cdf_{}.csv", slug(&agg.method))))
                        .map_err(csv_err)?;
                w.write_record(["rate_bps", "cumulative_fraction"])
                    .map_err(csv_err)?;
                for (r, f) in cdf {
                    w.write_record([r.to_string(), f.to_string()])
                        .map_err(csv_err)?;
                }
                w.flush()?;
            }
        }

        let mut w = csv::Writer::from_path(self.dir.join("load_shares.csv")).map_err(csv_err)?;
        w.write_record(["method", "mbs_share_pct", "sbs_share_pct"])
            .map_err(csv_err)?;
        for (m, s) in load_shares(&result.records) {
            w.write_record([m, s.mbs_share_pct.to_string(), s.sbs_share_pct.to_string()])
                .map_err(csv_err)?;
        }
        w.flush()?;

        let mut w = csv::Writer::from_path(self.dir.join("summary.csv")).map_err(csv_err)?;
        w.write_record([
            "method",
            "mean_utility",
            "mean_rate_mbps",
            "mbs_share_pct",
            "n_ok",
            "n_failed",
        ])
        .map_err(csv_err)?;
        for a in &result.aggregates {
            w.write_record([
                a.method.clone(),
                a.mean_utility.to_string(),
                (a.mean_rate_bps / 1e6).to_string(),
                a.load_share.mbs_share_pct.to_string(),
                a.n_ok.to_string(),
                a.n_failed.to_string(),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
        self.write_json("aggregates.json", &result.aggregates)
    }

    pub fn write_sweep(&mut self, cells: &[SweepCell]) -> Result<()> {
        let mut w = csv::Writer::from_path(self.dir.join("sweep_curves.csv")).map_err(csv_err)?;
        w.write_record([
            "n_samples",
            "n_elites",
            "smoothing_alpha",
            "t",
            "mean_best_score",
            "mean_incumbent_score",
        ])
        .map_err(csv_err)?;
        for c in cells {
            for (t, (b, i)) in c
                .mean_best_curve
                .iter()
                .zip(&c.mean_incumbent_curve)
                .enumerate()
            {
                w.write_record([
                    c.n_samples.to_string(),
                    c.n_elites.to_string(),
                    c.smoothing_alpha.to_string(),
                    t.to_string(),
                    b.to_string(),
                    i.to_string(),
                ])
                .map_err(csv_err)?;
            }
        }
        w.flush()?;

        let mut w = csv::Writer::from_path(self.dir.join("sweep_summary.csv")).map_err(csv_err)?;
        w.write_record([
            "n_samples",
            "n_elites",
            "smoothing_alpha",
            "n_drops",
            "mean_final_utility",
            "mean_last_iteration_best",
            "mean_convergence_iteration",
            "curve_convergence_iteration",
        ])
        .map_err(csv_err)?;
        for c in cells {
            w.write_record([
                c.n_samples.to_string(),
                c.n_elites.to_string(),
                c.smoothing_alpha.to_string(),
                c.n_drops.to_string(),
                c.mean_final_utility.to_string(),
                c.mean_last_iteration_best.to_string(),
                c.mean_convergence_iteration.to_string(),
                c.curve_convergence_iteration.to_string(),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Reads back `records.jsonl`.
pub fn read_records(path: impl AsRef<Path>) -> Result<Vec<DropRecord>> {
    let f = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for line in f.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}
