//! `rounds.csv`, `summary.csv` and `manifest.toml`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::RunConfig;
use crate::dataset::csv_error;
use crate::error::{HarnessError, Result};
use crate::harness::{RoundRecord, RunResult, RunSummary};

/// Writes `<dir>/seed_<s>/rounds.csv` per run, plus `<dir>/summary.csv` and
/// `<dir>/manifest.toml`. Returns the files written.
pub fn write_outputs(results: &[RunResult], config: &RunConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let mut written = Vec::new();
    for r in results {
        let sub = dir.join(format!("seed_{}", r.summary.seed));
        fs::create_dir_all(&sub).map_err(|e| HarnessError::io(&sub, e))?;
        let p = sub.join("rounds.csv");
        write_rounds_csv(&p, &r.rounds)?;
        written.push(p);
    }
    let p = dir.join("summary.csv");
    let summaries: Vec<&RunSummary> = results.iter().map(|r| &r.summary).collect();
    write_summary_csv(&p, &summaries)?;
    written.push(p);
    let p = dir.join("manifest.toml");
    write_manifest(&p, config, results)?;
    written.push(p);
    Ok(written)
}

/// `t,instant_error,avg_error,weight_1..weight_N,prior_1..prior_K`; weight
/// columns only when the run has weights.
pub fn write_rounds_csv(path: &Path, rounds: &[RoundRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    let n = rounds.first().map_or(0, |r| r.weights.len());
    let k = rounds.first().map_or(0, |r| r.est_prior.len());
    let mut header = vec!["t".to_string(), "instant_error".into(), "avg_error".into()];
    header.extend((1..=n).map(|i| format!("weight_{i}")));
    header.extend((1..=k).map(|i| format!("prior_{i}")));
    w.write_record(&header).map_err(|e| csv_error(path, e))?;
    for r in rounds {
        let mut row = vec![r.t.to_string(), fmt(r.instant_error), fmt(r.avg_error)];
        row.extend(r.weights.iter().map(|x| fmt(*x)));
        row.extend(r.est_prior.iter().map(|x| fmt(*x)));
        w.write_record(&row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

fn fmt(x: f64) -> String {
    format!("{x:?}")
}

/// Reads back a `rounds.csv`. The digest column is not stored and comes back
/// as zero.
pub fn read_rounds_csv(path: &Path) -> Result<Vec<RoundRecord>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let header = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    let n = header.iter().filter(|h| h.starts_with("weight_")).count();
    let k = header.iter().filter(|h| h.starts_with("prior_")).count();
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let num = |i: usize| -> Result<f64> {
            rec.get(i).and_then(|s| s.parse().ok()).ok_or_else(|| HarnessError::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("bad number in column {}", i + 1),
            })
        };
        out.push(RoundRecord {
            t: num(0)? as usize,
            instant_error: num(1)?,
            avg_error: num(2)?,
            digest: 0.0,
            weights: (3..3 + n).map(&num).collect::<Result<_>>()?,
            est_prior: (3 + n..3 + n + k).map(&num).collect::<Result<_>>()?,
        });
    }
    Ok(out)
}

#[derive(Serialize)]
struct SummaryRow<'a> {
    seed: u64,
    algorithm: &'a str,
    shift: &'a str,
    final_avg_error: f64,
    variation: f64,
    wall_time_secs: f64,
    sigma: f64,
    grad_bound: f64,
    loss_bound: f64,
    radius: f64,
    pool_size: usize,
    regularized: bool,
    transductive: bool,
    meta_regret: Option<f64>,
    meta_regret_bound: Option<f64>,
}

pub fn write_summary_csv(path: &Path, summaries: &[&RunSummary]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    for s in summaries {
        w.serialize(SummaryRow {
            seed: s.seed,
            algorithm: &s.algorithm,
            shift: &s.shift,
            final_avg_error: s.final_avg_error,
            variation: s.variation,
            wall_time_secs: s.wall_time_secs,
            sigma: s.sigma,
            grad_bound: s.grad_bound,
            loss_bound: s.loss_bound,
            radius: s.radius,
            pool_size: s.pool_size,
            regularized: s.regularized,
            transductive: s.transductive,
            meta_regret: s.meta_regret,
            meta_regret_bound: s.meta_regret_bound,
        })
        .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

fn write_manifest(path: &Path, config: &RunConfig, results: &[RunResult]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| HarnessError::io(path, e))?;
    let seeds: Vec<String> = results.iter().map(|r| r.summary.seed.to_string()).collect();
    let transductive = results.iter().any(|r| r.summary.transductive);
    let head = format!(
        "# olas {}\n# seeds run: [{}]\n# transductive hint: {}\n",
        env!("CARGO_PKG_VERSION"),
        seeds.join(", "),
        transductive
    );
    let body = config.to_toml_string()?;
    f.write_all(head.as_bytes())
        .and_then(|_| f.write_all(body.as_bytes()))
        .map_err(|e| HarnessError::io(path, e))
}
