use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ExperimentError, GapAggregate, PairResult, SeedScore};
use crate::alignment::StrategyKind;

/// Shortest decimal form of `x` rounded to 6 significant digits.
pub fn format_sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{}", if x == 0.0 { 0.0 } else { x });
    }
    let rounded: f64 = format!("{x:.5e}").parse().expect("formatted float parses");
    format!("{rounded}")
}

/// `100 * rpd` rounded half away from zero to one decimal, in brackets.
pub fn format_pct(rpd: f64) -> String {
    let tenths = rpd * 1000.0;
    // Strip representation noise so that e.g. 15.25 is treated as a tie.
    let cleaned = (tenths * 1e6).round() / 1e6;
    let rounded = cleaned.signum() * (cleaned.abs() + 0.5).floor();
    let value = rounded / 10.0;
    let value = if value == 0.0 { 0.0 } else { value };
    format!("({value:.1}%)")
}

#[derive(Serialize, Deserialize)]
struct PairRow {
    strategy: StrategyKind,
    source: i32,
    target: i32,
    gap: i32,
    seed: u64,
    f1: String,
}

#[derive(Serialize, Deserialize)]
struct GapRow {
    strategy: StrategyKind,
    gap: i32,
    mean_f1: String,
    rpd: String,
    pairs: usize,
}

pub fn write_pairs_csv(path: &Path, results: &[PairResult]) -> Result<(), ExperimentError> {
    let mut w = csv::Writer::from_path(path)?;
    for r in results {
        for s in &r.scores {
            w.serialize(PairRow {
                strategy: r.strategy,
                source: r.source_year,
                target: r.target_year,
                gap: r.gap,
                seed: s.seed,
                f1: format_sig6(s.macro_f1),
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_gaps_csv(path: &Path, aggregates: &[GapAggregate]) -> Result<(), ExperimentError> {
    let mut w = csv::Writer::from_path(path)?;
    for a in aggregates {
        w.serialize(GapRow {
            strategy: a.strategy,
            gap: a.gap,
            mean_f1: format_sig6(a.mean_f1),
            rpd: format_sig6(a.rpd),
            pairs: a.pair_count,
        })?;
    }
    w.flush()?;
    Ok(())
}

fn parse_float(path: &Path, line: usize, field: &str, s: &str) -> Result<f64, ExperimentError> {
    s.parse().map_err(|_| ExperimentError::Parse {
        path: path.display().to_string(),
        msg: format!("line {line}: {field} {s:?} is not a number"),
    })
}

/// Reads `pairs.csv` back into pair results, one per (strategy, source, target).
pub fn read_pairs_csv(path: &Path) -> Result<Vec<PairResult>, ExperimentError> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut grouped: BTreeMap<(StrategyKind, i32, i32), Vec<SeedScore>> = BTreeMap::new();
    for (i, row) in reader.deserialize::<PairRow>().enumerate() {
        let row = row?;
        let line = i + 2;
        if row.gap != row.target - row.source || row.gap < 0 {
            return Err(ExperimentError::Parse {
                path: path.display().to_string(),
                msg: format!("line {line}: gap {} does not match {}->{}", row.gap, row.source, row.target),
            });
        }
        let macro_f1 = parse_float(path, line, "f1", &row.f1)?;
        grouped.entry((row.strategy, row.source, row.target)).or_default().push(SeedScore { seed: row.seed, macro_f1 });
    }
    Ok(grouped.into_iter().map(|((k, s, t), sc)| PairResult::from_scores(k, s, t, sc)).collect())
}

pub fn read_gaps_csv(path: &Path) -> Result<Vec<GapAggregate>, ExperimentError> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for (i, row) in reader.deserialize::<GapRow>().enumerate() {
        let row = row?;
        out.push(GapAggregate {
            strategy: row.strategy,
            gap: row.gap,
            mean_f1: parse_float(path, i + 2, "mean_f1", &row.mean_f1)?,
            rpd: parse_float(path, i + 2, "rpd", &row.rpd)?,
            pair_count: row.pairs,
        });
    }
    Ok(out)
}

/// Markdown table with one row per strategy and one column per gap; cells
/// beyond gap 0 carry the RPD in brackets, e.g. `0.554 (-15.2%)`.
pub fn render_table(aggregates: &[GapAggregate]) -> String {
    let max_gap = aggregates.iter().map(|a| a.gap).max().unwrap_or(0);
    let mut rows: BTreeMap<StrategyKind, BTreeMap<i32, &GapAggregate>> = BTreeMap::new();
    for a in aggregates {
        rows.entry(a.strategy).or_default().insert(a.gap, a);
    }
    let mut out = String::from("| Strategy |");
    for g in 0..=max_gap {
        write!(out, " {g} |").unwrap();
    }
    out.push_str("\n|---|");
    for _ in 0..=max_gap {
        out.push_str("---|");
    }
    out.push('\n');
    for (kind, cells) in &rows {
        write!(out, "| {kind} |").unwrap();
        for g in 0..=max_gap {
            match cells.get(&g) {
                Some(a) if g == 0 => write!(out, " {:.3} |", a.mean_f1).unwrap(),
                Some(a) => write!(out, " {:.3} {} |", a.mean_f1, format_pct(a.rpd)).unwrap(),
                None => out.push_str("  |"),
            }
        }
        out.push('\n');
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChartKind {
    F1,
    Rpd,
}

const COLORS: [&str; 5] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd"];
const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 130.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 50.0;

/// Line chart of mean F1 or RPD (in percent) against gap, one line per strategy.
pub fn render_svg(aggregates: &[GapAggregate], kind: ChartKind) -> String {
    let value = |a: &GapAggregate| match kind {
        ChartKind::F1 => a.mean_f1,
        ChartKind::Rpd => 100.0 * a.rpd,
    };
    let mut series: BTreeMap<StrategyKind, Vec<(i32, f64)>> = BTreeMap::new();
    for a in aggregates {
        series.entry(a.strategy).or_default().push((a.gap, value(a)));
    }
    for points in series.values_mut() {
        points.sort_by_key(|p| p.0);
    }
    let max_gap = aggregates.iter().map(|a| a.gap).max().unwrap_or(0).max(1);
    let mut lo = aggregates.iter().map(value).fold(f64::INFINITY, f64::min);
    let mut hi = aggregates.iter().map(value).fold(f64::NEG_INFINITY, f64::max);
    if !lo.is_finite() {
        (lo, hi) = (0.0, 1.0);
    }
    if hi - lo < 1e-9 {
        lo -= 0.5 * lo.abs().max(1e-3);
        hi += 0.5 * hi.abs().max(1e-3);
    }
    let pad = 0.05 * (hi - lo);
    let (lo, hi) = (lo - pad, hi + pad);
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let x = |g: i32| LEFT + plot_w * g as f64 / max_gap as f64;
    let y = |v: f64| TOP + plot_h * (hi - v) / (hi - lo);
    let (title, axis) = match kind {
        ChartKind::F1 => ("Mean macro-F1 by temporal gap", "macro-F1"),
        ChartKind::Rpd => ("Relative performance drop by temporal gap", "RPD (%)"),
    };

    let mut s = String::new();
    writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#).unwrap();
    writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#).unwrap();
    writeln!(s, r#"<text x="{}" y="18" text-anchor="middle" font-size="14">{title}</text>"#, LEFT + plot_w / 2.0).unwrap();
    let (x0, x1, y0, y1) = (LEFT, LEFT + plot_w, TOP, TOP + plot_h);
    writeln!(s, r#"<path d="M{x0:.2} {y0:.2} L{x0:.2} {y1:.2} L{x1:.2} {y1:.2}" fill="none" stroke="black"/>"#).unwrap();
    for g in 0..=max_gap {
        let gx = x(g);
        writeln!(s, r#"<line x1="{gx:.2}" y1="{y1:.2}" x2="{gx:.2}" y2="{:.2}" stroke="black"/>"#, y1 + 5.0).unwrap();
        writeln!(s, r#"<text x="{gx:.2}" y="{:.2}" text-anchor="middle">{g}</text>"#, y1 + 20.0).unwrap();
    }
    for i in 0..=4 {
        let v = lo + (hi - lo) * i as f64 / 4.0;
        let gy = y(v);
        writeln!(s, r#"<line x1="{:.2}" y1="{gy:.2}" x2="{x0:.2}" y2="{gy:.2}" stroke="black"/>"#, x0 - 5.0).unwrap();
        writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{v:.3}</text>"#, x0 - 8.0, gy + 4.0).unwrap();
    }
    writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">temporal gap (years)</text>"#, LEFT + plot_w / 2.0, HEIGHT - 10.0).unwrap();
    writeln!(s, r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{axis}</text>"#, TOP + plot_h / 2.0, TOP + plot_h / 2.0).unwrap();
    for (i, (strategy, points)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let coords: Vec<String> = points.iter().map(|&(g, v)| format!("{:.2},{:.2}", x(g), y(v))).collect();
        writeln!(s, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#, coords.join(" ")).unwrap();
        for &(g, v) in points {
            writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#, x(g), y(v)).unwrap();
        }
        let ly = TOP + 10.0 + 20.0 * i as f64;
        let lx = WIDTH - RIGHT + 20.0;
        writeln!(s, r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/>"#, lx + 25.0).unwrap();
        writeln!(s, r#"<text x="{:.2}" y="{:.2}">{strategy}</text>"#, lx + 32.0, ly + 4.0).unwrap();
    }
    s.push_str("</svg>\n");
    s
}

/// Writes `pairs.csv`, `gaps.csv`, `table3.md`, `f1_vs_gap.svg` and
/// `rpd_vs_gap.svg` into `out_dir`.
pub fn emit_report(aggregates: &[GapAggregate], results: &[PairResult], out_dir: &Path) -> Result<(), ExperimentError> {
    if results.is_empty() {
        return Err(ExperimentError::EmptyResults);
    }
    std::fs::create_dir_all(out_dir)?;
    write_pairs_csv(&out_dir.join("pairs.csv"), results)?;
    write_gaps_csv(&out_dir.join("gaps.csv"), aggregates)?;
    std::fs::write(out_dir.join("table3.md"), render_table(aggregates))?;
    std::fs::write(out_dir.join("f1_vs_gap.svg"), render_svg(aggregates, ChartKind::F1))?;
    std::fs::write(out_dir.join("rpd_vs_gap.svg"), render_svg(aggregates, ChartKind::Rpd))?;
    Ok(())
}
