//! Turns a saved experiment into summary tables and figures.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};

use super::stats::{
    compare_to_single_goal, cost_over_time, even_edges, exec_time_regressions, rank_histogram, summarize, Comparison,
    SummaryRow,
};
use super::{traces_by_row, write_csv, SavedResults};

/// Points along the planning-time axis of the cost curves.
const COST_SAMPLES: usize = 40;
const RANK_BUCKETS: usize = 10;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub summary: Vec<SummaryRow>,
    pub comparisons: Vec<Comparison>,
    /// Trace improvements that made execution slower, out of all improvements.
    pub exec_time_regressions: (usize, usize),
    #[serde(skip)]
    pub files: Vec<PathBuf>,
    /// Plots left out because none of their runs found a solution.
    #[serde(skip)]
    pub skipped_plots: Vec<String>,
}

#[derive(Serialize)]
struct CostRow {
    strategy: String,
    k: usize,
    elapsed_ms: f64,
    length_mean: Option<f64>,
    length_ci95: Option<f64>,
    exec_time_mean: Option<f64>,
    exec_time_ci95: Option<f64>,
}

#[derive(Serialize)]
struct RankRow {
    strategy: String,
    k: usize,
    bucket_start_ms: f64,
    bucket_end_ms: f64,
    /// 0 counts runs without a solution yet.
    goal_rank: usize,
    runs: usize,
}

/// Writes `summary.csv`, `comparisons.csv`, `cost_over_time.csv`,
/// `ranks.csv`, `report.json` and the SVG plots into `out_dir`.
pub fn write_report(saved: &SavedResults, out_dir: impl AsRef<Path>) -> Result<Report> {
    let out_dir = out_dir.as_ref();
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let rows = &saved.rows;
    let budget = match &saved.meta {
        Some(m) => m.spec.budget_ms,
        None => rows.iter().filter_map(|r| r.elapsed_ms).fold(0.0, f64::max).max(1.0),
    };
    let traces = traces_by_row(rows, &saved.traces);

    let summary = summarize(rows)?;
    let comparisons = compare_to_single_goal(rows);
    let times = even_edges(budget, COST_SAMPLES);
    let series = cost_over_time(rows, &traces, &times)?;
    let ranks = rank_histogram(rows, &traces, &even_edges(budget, RANK_BUCKETS), budget)?;

    let mut files = Vec::new();
    let mut put = |name: &str| {
        let p = out_dir.join(name);
        files.push(p.clone());
        p
    };
    write_csv(&put("summary.csv"), &summary)?;
    write_csv(&put("comparisons.csv"), &comparisons)?;
    let cost_rows: Vec<CostRow> = series
        .iter()
        .flat_map(|s| {
            (0..s.times_ms.len()).map(move |i| CostRow {
                strategy: s.strategy.to_string(),
                k: s.k,
                elapsed_ms: s.times_ms[i],
                length_mean: s.length_mean[i],
                length_ci95: s.length_ci95[i],
                exec_time_mean: s.exec_time_mean[i],
                exec_time_ci95: s.exec_time_ci95[i],
            })
        })
        .collect();
    write_csv(&put("cost_over_time.csv"), &cost_rows)?;
    let mut rank_rows = Vec::new();
    for t in &ranks {
        for b in 0..t.counts.len() {
            let (lo, hi) = (t.bucket_edges_ms[b], t.bucket_edges_ms[b + 1]);
            let row = |goal_rank, runs| RankRow {
                strategy: t.strategy.to_string(),
                k: t.k,
                bucket_start_ms: lo,
                bucket_end_ms: hi,
                goal_rank,
                runs,
            };
            rank_rows.push(row(0, t.unsolved[b]));
            for (j, &rank) in t.ranks.iter().enumerate() {
                rank_rows.push(row(rank, t.counts[b][j]));
            }
        }
    }
    write_csv(&put("ranks.csv"), &rank_rows)?;

    let report = Report {
        summary,
        comparisons,
        exec_time_regressions: exec_time_regressions(&traces),
        files: Vec::new(),
        skipped_plots: Vec::new(),
    };
    let json_path = put("report.json");
    std::fs::write(&json_path, serde_json::to_string_pretty(&report)? + "\n").map_err(|e| Error::io(&json_path, e))?;
    let plots = super::emit_plots(&series, &ranks, out_dir)?;
    files.extend(plots.paths);
    Ok(Report {
        files,
        skipped_plots: plots.skipped,
        ..report
    })
}
