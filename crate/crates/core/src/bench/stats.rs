use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::ik::SelectionStrategy;
use crate::planner::TraceEntry;

use super::ResultRow;

type CellKey = (SelectionStrategy, usize);

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn sample_variance(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64
}

/// Mean and half-width of the two-sided Student-t interval at `confidence`;
/// `None` for fewer than two values.
pub fn t_interval(values: &[f64], confidence: f64) -> Option<(f64, f64)> {
    let n = values.len();
    if n < 2 {
        return None;
    }
    let t = StudentsT::new(0.0, 1.0, (n - 1) as f64).ok()?;
    let q = t.inverse_cdf(0.5 + confidence / 2.0);
    Some((mean(values), q * (sample_variance(values) / n as f64).sqrt()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WelchTest {
    pub mean_a: f64,
    pub mean_b: f64,
    pub t: f64,
    pub dof: f64,
    /// One-sided p-value for `mean(a) < mean(b)`.
    pub p: f64,
}

/// Welch's unequal-variance t-test of `mean(a) < mean(b)`.
pub fn welch_one_sided(a: &[f64], b: &[f64]) -> Result<WelchTest> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::InvalidArgument(
            "Welch test needs two samples of at least two values".into(),
        ));
    }
    let (ma, mb) = (mean(a), mean(b));
    let (sa, sb) = (sample_variance(a) / a.len() as f64, sample_variance(b) / b.len() as f64);
    let se2 = sa + sb;
    if se2 == 0.0 {
        let p = if ma < mb { 0.0 } else { 1.0 };
        let t = if ma < mb { f64::NEG_INFINITY } else { f64::INFINITY };
        return Ok(WelchTest {
            mean_a: ma,
            mean_b: mb,
            t,
            dof: f64::INFINITY,
            p,
        });
    }
    let t = (ma - mb) / se2.sqrt();
    let dof = se2 * se2 / (sa * sa / (a.len() - 1) as f64 + sb * sb / (b.len() - 1) as f64);
    let dist = StudentsT::new(0.0, 1.0, dof).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok(WelchTest {
        mean_a: ma,
        mean_b: mb,
        t,
        dof,
        p: dist.cdf(t),
    })
}

/// Per-query means of `metric` over successful rows of one cell.
pub(crate) fn per_query_means(rows: &[&ResultRow], metric: impl Fn(&ResultRow) -> Option<f64>) -> Vec<f64> {
    let mut by_query: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for r in rows {
        if let Some(v) = metric(r).filter(|_| r.success) {
            by_query.entry(r.query_id).or_default().push(v);
        }
    }
    by_query.values().map(|v| mean(v)).collect()
}

fn cells(rows: &[ResultRow]) -> BTreeMap<CellKey, Vec<&ResultRow>> {
    let mut out: BTreeMap<CellKey, Vec<&ResultRow>> = BTreeMap::new();
    for r in rows {
        out.entry((r.strategy, r.k)).or_default().push(r);
    }
    out
}

/// Final lengths (per-query means) of one strategy × k cell.
pub fn cell_lengths(rows: &[ResultRow], strategy: SelectionStrategy, k: usize) -> Vec<f64> {
    let cell: Vec<&ResultRow> = rows.iter().filter(|r| r.strategy == strategy && r.k == k).collect();
    per_query_means(&cell, |r| r.length_rad)
}

/// Final lengths of the successful runs of one cell, in row order.
pub fn cell_run_lengths(rows: &[ResultRow], strategy: SelectionStrategy, k: usize) -> Vec<f64> {
    rows.iter()
        .filter(|r| r.strategy == strategy && r.k == k && r.success)
        .filter_map(|r| r.length_rad)
        .collect()
}

/// Which observations a [`Comparison`] treats as the sample.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SampleUnit {
    /// Every successful run's final length.
    Run,
    /// One mean per query over its successful runs.
    QueryMean,
}

/// One-sided Welch test that `k` goals give shorter paths than one goal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub strategy: SelectionStrategy,
    pub k: usize,
    pub unit: SampleUnit,
    pub n_k: usize,
    pub n_one: usize,
    pub mean_k: f64,
    pub mean_one: f64,
    pub improvement_pct: f64,
    pub t: f64,
    pub dof: f64,
    pub p: f64,
}

/// Every `k > 1` cell against the `k = 1` cell of the same strategy, in both
/// sample units. Cells with fewer than two observations are skipped.
pub fn compare_to_single_goal(rows: &[ResultRow]) -> Vec<Comparison> {
    let mut out = Vec::new();
    for (strategy, k) in cells(rows).into_keys() {
        if k == 1 || !rows.iter().any(|r| r.strategy == strategy && r.k == 1) {
            continue;
        }
        for unit in [SampleUnit::Run, SampleUnit::QueryMean] {
            let pick = |k| match unit {
                SampleUnit::Run => cell_run_lengths(rows, strategy, k),
                SampleUnit::QueryMean => cell_lengths(rows, strategy, k),
            };
            let (a, b) = (pick(k), pick(1));
            let Ok(w) = welch_one_sided(&a, &b) else { continue };
            out.push(Comparison {
                strategy,
                k,
                unit,
                n_k: a.len(),
                n_one: b.len(),
                mean_k: w.mean_a,
                mean_one: w.mean_b,
                improvement_pct: 100.0 * (1.0 - w.mean_a / w.mean_b),
                t: w.t,
                dof: w.dof,
                p: w.p,
            });
        }
    }
    out
}

/// Consecutive trace entries where the path got shorter but slower to
/// execute, out of all consecutive pairs. Shortening a path does not always
/// shorten its timed trajectory.
pub fn exec_time_regressions(traces: &[Vec<TraceEntry>]) -> (usize, usize) {
    let mut slower = 0;
    let mut total = 0;
    for t in traces {
        for w in t.windows(2) {
            total += 1;
            if w[1].exec_time > w[0].exec_time {
                slower += 1;
            }
        }
    }
    (slower, total)
}

/// One strategy × k cell. `None` means N/A: no successful run, or too few
/// queries for an interval.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub strategy: SelectionStrategy,
    pub k: usize,
    pub runs: usize,
    pub successes: usize,
    pub queries: usize,
    pub length_mean: Option<f64>,
    pub length_ci95: Option<f64>,
    pub exec_time_mean: Option<f64>,
    pub exec_time_ci95: Option<f64>,
    pub length_improvement_pct: Option<f64>,
    pub exec_time_improvement_pct: Option<f64>,
}

/// Means and 95% intervals over per-query means, and improvement over
/// `k = 1` of the same strategy.
pub fn summarize(rows: &[ResultRow]) -> Result<Vec<SummaryRow>> {
    if rows.is_empty() {
        return Err(Error::Empty("no result rows to summarize".into()));
    }
    let mut out = Vec::new();
    for ((strategy, k), cell) in cells(rows) {
        let lengths = per_query_means(&cell, |r| r.length_rad);
        let execs = per_query_means(&cell, |r| r.exec_time_s);
        let stat = |v: &[f64]| {
            if v.is_empty() {
                (None, None)
            } else {
                (Some(mean(v)), t_interval(v, 0.95).map(|(_, h)| h))
            }
        };
        let (length_mean, length_ci95) = stat(&lengths);
        let (exec_time_mean, exec_time_ci95) = stat(&execs);
        out.push(SummaryRow {
            strategy,
            k,
            runs: cell.len(),
            successes: cell.iter().filter(|r| r.success).count(),
            queries: lengths.len(),
            length_mean,
            length_ci95,
            exec_time_mean,
            exec_time_ci95,
            length_improvement_pct: None,
            exec_time_improvement_pct: None,
        });
    }
    let baselines: BTreeMap<SelectionStrategy, (Option<f64>, Option<f64>)> = out
        .iter()
        .filter(|s| s.k == 1)
        .map(|s| (s.strategy, (s.length_mean, s.exec_time_mean)))
        .collect();
    let improvement = |m: Option<f64>, base: Option<f64>| match (m, base) {
        (Some(m), Some(b)) if b > 0.0 => Some(100.0 * (1.0 - m / b)),
        _ => None,
    };
    for s in &mut out {
        if let Some(&(bl, be)) = baselines.get(&s.strategy) {
            s.length_improvement_pct = improvement(s.length_mean, bl);
            s.exec_time_improvement_pct = improvement(s.exec_time_mean, be);
        }
    }
    Ok(out)
}

fn incumbent_at(trace: &[TraceEntry], t: f64) -> Option<&TraceEntry> {
    trace.iter().take_while(|e| e.elapsed_ms <= t).last()
}

/// Best length and execution time against planning time for one cell:
/// means and 95% intervals over per-query means of the incumbent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostSeries {
    pub strategy: SelectionStrategy,
    pub k: usize,
    pub times_ms: Vec<f64>,
    pub length_mean: Vec<Option<f64>>,
    pub length_ci95: Vec<Option<f64>>,
    pub exec_time_mean: Vec<Option<f64>>,
    pub exec_time_ci95: Vec<Option<f64>>,
}

/// `traces[i]` belongs to `rows[i]`.
pub fn cost_over_time(rows: &[ResultRow], traces: &[Vec<TraceEntry>], times_ms: &[f64]) -> Result<Vec<CostSeries>> {
    if rows.len() != traces.len() {
        return Err(Error::DimensionMismatch {
            expected: rows.len(),
            actual: traces.len(),
        });
    }
    let mut groups: BTreeMap<CellKey, Vec<usize>> = BTreeMap::new();
    for (i, r) in rows.iter().enumerate() {
        groups.entry((r.strategy, r.k)).or_default().push(i);
    }
    let mut out = Vec::new();
    for ((strategy, k), members) in groups {
        let mut s = CostSeries {
            strategy,
            k,
            times_ms: times_ms.to_vec(),
            length_mean: Vec::new(),
            length_ci95: Vec::new(),
            exec_time_mean: Vec::new(),
            exec_time_ci95: Vec::new(),
        };
        for &t in times_ms {
            let mut len_q: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
            let mut exe_q: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
            for &i in &members {
                if let Some(e) = incumbent_at(&traces[i], t) {
                    len_q.entry(rows[i].query_id).or_default().push(e.length);
                    exe_q.entry(rows[i].query_id).or_default().push(e.exec_time);
                }
            }
            let summarize_at = |m: BTreeMap<usize, Vec<f64>>| {
                let v: Vec<f64> = m.values().map(|x| mean(x)).collect();
                if v.is_empty() {
                    (None, None)
                } else {
                    (Some(mean(&v)), t_interval(&v, 0.95).map(|(_, h)| h))
                }
            };
            let (lm, lc) = summarize_at(len_q);
            let (em, ec) = summarize_at(exe_q);
            s.length_mean.push(lm);
            s.length_ci95.push(lc);
            s.exec_time_mean.push(em);
            s.exec_time_ci95.push(ec);
        }
        out.push(s);
    }
    Ok(out)
}

/// Goal ranks of the incumbents of one cell over time.
/// `counts[b][j]` is how many runs held a solution of rank `ranks[j]` at the
/// end of bucket `b`; `unsolved[b]` had none yet.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankTable {
    pub strategy: SelectionStrategy,
    pub k: usize,
    pub bucket_edges_ms: Vec<f64>,
    pub ranks: Vec<usize>,
    pub counts: Vec<Vec<usize>>,
    pub unsolved: Vec<usize>,
}

impl RankTable {
    pub fn total(&self, bucket: usize) -> usize {
        self.counts[bucket].iter().sum::<usize>() + self.unsolved[bucket]
    }
}

/// Buckets are `(edges[b], edges[b + 1]]`; each run is sampled at the end of
/// the bucket, or at `budget_ms` if that comes first. Buckets starting at or
/// after the budget are emitted with zero counts.
pub fn rank_histogram(
    rows: &[ResultRow],
    traces: &[Vec<TraceEntry>],
    bucket_edges_ms: &[f64],
    budget_ms: f64,
) -> Result<Vec<RankTable>> {
    if rows.len() != traces.len() {
        return Err(Error::DimensionMismatch {
            expected: rows.len(),
            actual: traces.len(),
        });
    }
    if bucket_edges_ms.len() < 2 || bucket_edges_ms.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidArgument(
            "bucket edges must be increasing, at least two".into(),
        ));
    }
    let buckets = bucket_edges_ms.len() - 1;
    let mut groups: BTreeMap<CellKey, Vec<usize>> = BTreeMap::new();
    for (i, r) in rows.iter().enumerate() {
        groups.entry((r.strategy, r.k)).or_default().push(i);
    }
    let mut out = Vec::new();
    for ((strategy, k), members) in groups {
        let mut samples: Vec<Vec<Option<usize>>> = vec![Vec::new(); buckets];
        for (b, sample) in samples.iter_mut().enumerate() {
            let (lo, hi) = (bucket_edges_ms[b], bucket_edges_ms[b + 1]);
            if lo >= budget_ms {
                continue;
            }
            let at = hi.min(budget_ms);
            for &i in &members {
                sample.push(incumbent_at(&traces[i], at).map(|e| e.goal_rank));
            }
        }
        let mut ranks: Vec<usize> = samples.iter().flatten().flatten().copied().collect();
        ranks.sort_unstable();
        ranks.dedup();
        let counts = samples
            .iter()
            .map(|s| {
                ranks
                    .iter()
                    .map(|r| s.iter().filter(|x| **x == Some(*r)).count())
                    .collect()
            })
            .collect();
        let unsolved = samples
            .iter()
            .map(|s| s.iter().filter(|x| x.is_none()).count())
            .collect();
        out.push(RankTable {
            strategy,
            k,
            bucket_edges_ms: bucket_edges_ms.to_vec(),
            ranks,
            counts,
            unsolved,
        });
    }
    Ok(out)
}

/// `n + 1` evenly spaced edges over `[0, end]`.
pub fn even_edges(end: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|i| end * i as f64 / n as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn row(query: usize, k: usize, rep: usize, length: Option<f64>) -> ResultRow {
        ResultRow {
            query_id: query,
            target_id: 0,
            strategy: SelectionStrategy::Random,
            k,
            repetition: rep,
            seed: 0,
            elapsed_ms: length.map(|_| 1.0),
            length_rad: length,
            exec_time_s: length.map(|l| 2.0 * l),
            goal_rank: length.map(|_| 1),
            success: length.is_some(),
            trace_ref: format!("q{query}-k{k}-r{rep}"),
        }
    }

    #[test]
    fn interval_matches_hand_computation() {
        // mean 5, s² = 10/4 = 2.5, t(0.975, 4) = 2.7764451051977987
        let v = [3.0, 4.0, 5.0, 6.0, 7.0];
        let (m, h) = t_interval(&v, 0.95).unwrap();
        assert_abs_diff_eq!(m, 5.0, epsilon = 1e-12);
        assert_abs_diff_eq!(h, 2.7764451051977987 * (2.5f64 / 5.0).sqrt(), epsilon = 1e-9);
        assert_eq!(t_interval(&[1.0], 0.95), None);
        assert_eq!(t_interval(&[2.0, 2.0, 2.0], 0.95), Some((2.0, 0.0)));
    }

    #[test]
    fn summary_cells() {
        let rows = vec![
            row(0, 1, 0, Some(4.0)),
            row(0, 1, 1, Some(6.0)),
            row(1, 1, 0, Some(10.0)),
            row(0, 8, 0, Some(2.5)),
            row(1, 8, 0, Some(5.0)),
            row(0, 16, 0, None),
        ];
        let s = summarize(&rows).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s[0].length_mean, Some(7.5));
        assert_eq!(s[0].length_improvement_pct, Some(0.0));
        assert_abs_diff_eq!(s[1].length_improvement_pct.unwrap(), 50.0, epsilon = 1e-12);
        assert_eq!(s[2].length_mean, None);
        assert_eq!(s[2].successes, 0);
        let single = summarize(&rows[..1]).unwrap();
        assert_eq!(single[0].length_ci95, None);
        assert!(summarize(&[]).is_err());
    }

    #[test]
    fn welch_direction() {
        let a = [1.0, 1.2, 0.9, 1.1, 1.0];
        let b = [2.0, 2.1, 1.9, 2.2, 2.0];
        let w = welch_one_sided(&a, &b).unwrap();
        assert!(w.p < 1e-6);
        assert!(welch_one_sided(&b, &a).unwrap().p > 0.99);
        // equal variances and sizes: dof = 2(n - 1)
        let c = [1.0, 2.0, 3.0];
        let d = [2.0, 3.0, 4.0];
        let w = welch_one_sided(&c, &d).unwrap();
        assert_abs_diff_eq!(w.dof, 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(w.t, -1.0 / (2.0f64 / 3.0).sqrt(), epsilon = 1e-12);
    }

    fn entry(t: f64, len: f64, rank: usize) -> TraceEntry {
        TraceEntry {
            elapsed_ms: t,
            length: len,
            exec_time: len,
            goal_rank: rank,
        }
    }

    #[test]
    fn histogram_buckets() {
        let rows = vec![row(0, 4, 0, Some(1.0)), row(1, 4, 0, Some(2.0))];
        let traces = vec![vec![entry(5.0, 3.0, 2), entry(30.0, 1.0, 1)], vec![entry(15.0, 2.0, 1)]];
        let h = rank_histogram(&rows, &traces, &even_edges(60.0, 3), 40.0).unwrap();
        assert_eq!(h.len(), 1);
        let t = &h[0];
        assert_eq!(t.ranks, vec![1, 2]);
        assert_eq!(t.counts, vec![vec![1, 1], vec![2, 0], vec![0, 0]]);
        assert_eq!(t.unsolved, vec![0, 0, 0]);
        assert_eq!(t.total(2), 0);

        let early = rank_histogram(&rows, &traces, &[0.0, 4.0], 40.0).unwrap();
        assert_eq!(early[0].unsolved, vec![2]);
    }

    #[test]
    fn cost_series_follow_incumbents() {
        let rows = vec![row(0, 4, 0, Some(1.0)), row(1, 4, 0, Some(2.0))];
        let traces = vec![vec![entry(5.0, 3.0, 2), entry(30.0, 1.0, 1)], vec![entry(15.0, 2.0, 1)]];
        let s = cost_over_time(&rows, &traces, &[1.0, 10.0, 40.0]).unwrap();
        assert_eq!(s[0].length_mean, vec![None, Some(3.0), Some(1.5)]);
        assert_eq!(s[0].length_ci95[1], None);
    }
}
