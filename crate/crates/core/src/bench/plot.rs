//! Minimal deterministic SVG charts: cost against planning time with error
//! bars, and goal rank against planning time as a bubble chart.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

use super::stats::{CostSeries, RankTable};

const W: f64 = 640.0;
const H: f64 = 400.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 130.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 50.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

/// Data range widened by 5% of its span on each side (or by 5% of the value,
/// or ±1, when the data are constant).
pub fn axis_range(min: f64, max: f64) -> (f64, f64) {
    let span = max - min;
    if span > 0.0 {
        (min - 0.05 * span, max + 0.05 * span)
    } else if min != 0.0 {
        let pad = 0.05 * min.abs();
        (min - pad, max + pad)
    } else {
        (min - 1.0, max + 1.0)
    }
}

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x.0) / (self.x.1 - self.x.0) * (W - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        H - BOTTOM - (y - self.y.0) / (self.y.1 - self.y.0) * (H - TOP - BOTTOM)
    }
}

fn tick(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn open(svg: &mut String, title: &str, frame: &Frame, x_label: &str, y_label: &str) {
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="18" text-anchor="middle" font-size="13">{}</text>"#,
        (LEFT + W - RIGHT) / 2.0,
        escape(title)
    );
    let (x0, x1, y0, y1) = (LEFT, W - RIGHT, TOP, H - BOTTOM);
    let _ = writeln!(
        svg,
        r#"<path d="M{x0:.2},{y0:.2} L{x0:.2},{y1:.2} L{x1:.2},{y1:.2}" fill="none" stroke="black"/>"#
    );
    for i in 0..=4 {
        let xv = frame.x.0 + (frame.x.1 - frame.x.0) * i as f64 / 4.0;
        let yv = frame.y.0 + (frame.y.1 - frame.y.0) * i as f64 / 4.0;
        let (px, py) = (frame.px(xv), frame.py(yv));
        let _ = writeln!(
            svg,
            r#"<line x1="{px:.2}" y1="{y1:.2}" x2="{px:.2}" y2="{:.2}" stroke="black"/><text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            y1 + 4.0,
            y1 + 16.0,
            tick(xv)
        );
        let _ = writeln!(
            svg,
            r#"<line x1="{:.2}" y1="{py:.2}" x2="{x0:.2}" y2="{py:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            x0 - 4.0,
            x0 - 6.0,
            py + 4.0,
            tick(yv)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        (x0 + x1) / 2.0,
        H - 12.0,
        escape(x_label)
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(y_label)
    );
}

fn legend(svg: &mut String, row: usize, color: &str, label: &str) {
    let x = W - RIGHT + 15.0;
    let y = TOP + 10.0 + 16.0 * row as f64;
    let _ = writeln!(
        svg,
        r#"<line x1="{x:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{color}" stroke-width="2"/><text x="{:.2}" y="{:.2}">{}</text>"#,
        x + 18.0,
        x + 24.0,
        y + 4.0,
        escape(label)
    );
}

struct Line<'a> {
    label: String,
    times: &'a [f64],
    mean: &'a [Option<f64>],
    ci: &'a [Option<f64>],
}

fn cost_chart(title: &str, y_label: &str, lines: &[Line<'_>]) -> Result<String> {
    let mut ys = Vec::new();
    let mut xs = Vec::new();
    for l in lines {
        for ((&t, m), c) in l.times.iter().zip(l.mean).zip(l.ci) {
            if let Some(m) = m {
                xs.push(t);
                let h = c.unwrap_or(0.0);
                ys.push(m - h);
                ys.push(m + h);
            }
        }
    }
    if xs.is_empty() {
        return Err(Error::Empty(format!("empty series: {title}")));
    }
    let fold = |v: &[f64]| {
        v.iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)))
    };
    let (x_min, x_max) = fold(&xs);
    let (y_min, y_max) = fold(&ys);
    let frame = Frame {
        x: axis_range(x_min, x_max),
        y: axis_range(y_min, y_max),
    };
    let mut svg = String::new();
    open(&mut svg, title, &frame, "planning time (ms)", y_label);
    for (i, l) in lines.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut d = String::new();
        for (&t, m) in l.times.iter().zip(l.mean) {
            if let Some(m) = m {
                let cmd = if d.is_empty() { 'M' } else { 'L' };
                let _ = write!(d, "{cmd}{:.2},{:.2} ", frame.px(t), frame.py(*m));
            }
        }
        let _ = writeln!(
            svg,
            r#"<path d="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            d.trim_end()
        );
        for ((&t, m), c) in l.times.iter().zip(l.mean).zip(l.ci) {
            if let (Some(m), Some(c)) = (m, c) {
                let x = frame.px(t);
                let _ = writeln!(
                    svg,
                    r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="{color}"/>"#,
                    frame.py(m - c),
                    frame.py(m + c)
                );
            }
        }
        if l.mean.iter().all(Option::is_none) {
            legend(&mut svg, i, color, &format!("{} (no solutions)", l.label));
        } else {
            legend(&mut svg, i, color, &l.label);
        }
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn rank_chart(table: &RankTable) -> Result<String> {
    let title = format!("goal rank over time, {} k={}", table.strategy, table.k);
    let total: usize = table.counts.iter().flatten().sum();
    if total == 0 {
        return Err(Error::Empty(format!("empty series: {title}")));
    }
    let edges = &table.bucket_edges_ms;
    let mids: Vec<f64> = edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    let r_min = *table.ranks.first().unwrap() as f64;
    let r_max = *table.ranks.last().unwrap() as f64;
    let frame = Frame {
        x: axis_range(edges[0], *edges.last().unwrap()),
        y: axis_range(r_min, r_max),
    };
    let mut svg = String::new();
    open(&mut svg, &title, &frame, "planning time (ms)", "goal rank");
    for (b, row) in table.counts.iter().enumerate() {
        let n = table.total(b).max(1) as f64;
        for (j, &c) in row.iter().enumerate() {
            if c == 0 {
                continue;
            }
            let r = 2.0 + 10.0 * (c as f64 / n).sqrt();
            let _ = writeln!(
                svg,
                r##"<circle cx="{:.2}" cy="{:.2}" r="{r:.2}" fill="#1f77b4" fill-opacity="0.5"/>"##,
                frame.px(mids[b]),
                frame.py(table.ranks[j] as f64)
            );
        }
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Paths of the files written by [`emit_plots`].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PlotFiles {
    pub paths: Vec<PathBuf>,
    /// Charts left out because no run in them found a solution.
    pub skipped: Vec<String>,
}

/// Writes a chart, or records it as skipped when it has nothing to show.
fn write_or_skip(out_dir: &Path, name: &str, svg: Result<String>, files: &mut PlotFiles) -> Result<()> {
    match svg {
        Ok(svg) => write(out_dir, name, &svg, files),
        Err(Error::Empty(why)) => {
            files.skipped.push(format!("{name}: {why}"));
            Ok(())
        }
        Err(e) => Err(e),
    }
}

fn write(out_dir: &Path, name: &str, svg: &str, files: &mut PlotFiles) -> Result<()> {
    let path = out_dir.join(name);
    std::fs::write(&path, svg).map_err(|e| Error::io(&path, e))?;
    files.paths.push(path);
    Ok(())
}

/// Length and execution time against planning time, one chart per strategy
/// with a line per k, plus one rank chart per cell.
/// Mean and CI half-width columns of one metric.
type Pick = fn(&CostSeries) -> (&[Option<f64>], &[Option<f64>]);

pub fn emit_plots(series: &[CostSeries], ranks: &[RankTable], out_dir: impl AsRef<Path>) -> Result<PlotFiles> {
    let out_dir = out_dir.as_ref();
    if series.is_empty() && ranks.is_empty() {
        return Err(Error::Empty("nothing to plot".into()));
    }
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut files = PlotFiles::default();
    let mut strategies: Vec<_> = series.iter().map(|s| s.strategy).collect();
    strategies.dedup();
    for strategy in strategies {
        let cells: Vec<&CostSeries> = series.iter().filter(|s| s.strategy == strategy).collect();
        let lines = |pick: Pick| -> Vec<Line<'_>> {
            cells
                .iter()
                .map(|s| {
                    let (mean, ci) = pick(s);
                    Line {
                        label: format!("k={}", s.k),
                        times: &s.times_ms,
                        mean,
                        ci,
                    }
                })
                .collect()
        };
        let length = cost_chart(
            &format!("path length, {strategy} goals"),
            "length (rad)",
            &lines(|s| (&s.length_mean, &s.length_ci95)),
        );
        write_or_skip(out_dir, &format!("length_{strategy}.svg"), length, &mut files)?;
        let exec = cost_chart(
            &format!("execution time, {strategy} goals"),
            "execution time (s)",
            &lines(|s| (&s.exec_time_mean, &s.exec_time_ci95)),
        );
        write_or_skip(out_dir, &format!("exec_time_{strategy}.svg"), exec, &mut files)?;
    }
    for t in ranks {
        let name = format!("ranks_{}_k{}.svg", t.strategy, t.k);
        write_or_skip(out_dir, &name, rank_chart(t), &mut files)?;
    }
    Ok(files)
}
