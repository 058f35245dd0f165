//! Chain diagnostics: text table and PGM plots.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use ctcor::sampler::{chain_stats, ChainSummary, ParamSummary};
use ctcor::ChainRecord;

use crate::error::{CliError, CliResult};
use crate::plot;

pub const TRACE_WIDTH: usize = 600;
pub const PLOT_HEIGHT: usize = 150;
pub const HIST_BINS: usize = 40;
pub const BAR_WIDTH: usize = 8;

/// Fixed-width table of the posterior summaries.
pub fn summary_table(s: &ChainSummary, burn_in: usize, total: usize) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "samples {total} burn_in {burn_in} kept {}", s.n_samples);
    let _ = writeln!(
        out,
        "{:<8} {:>16} {:>16} {:>16} {:>16} {:>10}",
        "param", "mean", "sd", "q2.5", "q97.5", "ess"
    );
    for (name, p) in params(s) {
        let _ = writeln!(
            out,
            "{:<8} {:>16.8e} {:>16.8e} {:>16.8e} {:>16.8e} {:>10.1}",
            name, p.mean, p.sd, p.q025, p.q975, p.ess
        );
    }
    let _ = writeln!(out, "mh_acceptance {:.4}", s.acceptance_rate);
    out
}

fn params(s: &ChainSummary) -> [(&'static str, &ParamSummary); 3] {
    [("lambda", &s.lambda), ("delta", &s.delta), ("c", &s.c)]
}

fn column(records: &[ChainRecord], name: &str) -> Vec<f64> {
    records
        .iter()
        .map(|r| match name {
            "lambda" => r.lambda,
            "delta" => r.delta,
            _ => r.c,
        })
        .collect()
}

/// Writes `report.txt` and, per parameter, full and post-burn-in traces, a
/// histogram and an autocorrelation plot. Returns the files written.
pub fn write_report(
    dir: &Path,
    records: &[ChainRecord],
    k_metro: usize,
    burn_in: usize,
    max_lag: usize,
) -> CliResult<Vec<PathBuf>> {
    let summary = chain_stats(records, k_metro, burn_in, max_lag)?;
    let mut written = Vec::new();
    for (name, p) in params(&summary) {
        let all = column(records, name);
        let kept = &all[burn_in..];
        let plots = [
            ("trace", plot::trace(&all, TRACE_WIDTH, PLOT_HEIGHT)),
            ("trace_post", plot::trace(kept, TRACE_WIDTH, PLOT_HEIGHT)),
            ("hist", plot::histogram(kept, HIST_BINS, BAR_WIDTH, PLOT_HEIGHT)),
            ("acf", plot::acf_bars(&p.acf, BAR_WIDTH, PLOT_HEIGHT)),
        ];
        for (kind, canvas) in plots {
            let path = dir.join(format!("{kind}_{name}.pgm"));
            canvas.save(&path)?;
            written.push(path);
        }
    }
    let path = dir.join("report.txt");
    std::fs::write(&path, summary_table(&summary, burn_in, records.len()))
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
    written.push(path);
    Ok(written)
}
