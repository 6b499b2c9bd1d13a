//! SVG line charts of sweep results.
//!
//! Each panel shows CCR (red, left axis, scaled from `1/K` to 1) and NMI
//! (blue, right axis, 0 to 1) against one CSV column, with mean ± standard
//! deviation bands over trials. The `BT` arm is drawn solid and `NBT`
//! dashed; other arms get further dash patterns.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sweep::{read_results, ResultRow};

const PANEL_W: f64 = 420.0;
const PANEL_H: f64 = 300.0;
const MARGIN_L: f64 = 64.0;
const MARGIN_R: f64 = 56.0;
const MARGIN_T: f64 = 36.0;
const MARGIN_B: f64 = 48.0;
const LEGEND_H: f64 = 40.0;
const COLUMNS: usize = 2;
const CCR_COLOR: &str = "#c0392b";
const NMI_COLOR: &str = "#2e5eaa";
const EXTRA_DASHES: [&str; 3] = ["2 3", "10 3 2 3", "1 5"];

/// Columns usable as the x axis or the panel key.
pub const AXIS_COLUMNS: [&str; 7] = ["n", "k", "c", "lambda", "l", "r", "w"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlotSpec {
    pub title: String,
    pub x: String,
    /// One panel per distinct value of this column.
    pub panel: Option<String>,
    #[serde(default)]
    pub x_log: bool,
}

impl PlotSpec {
    /// Presets: `fig1` (sparsity, by graph size), `fig2` (graph size, by
    /// sparsity), `fig3` (sparsity, by walk length), `fig4` (sparsity, by
    /// cluster count).
    pub fn preset(name: &str) -> Option<PlotSpec> {
        let (title, x, panel, x_log) = match name {
            "fig1" => ("Performance as a function of sparsity", "c", "n", false),
            "fig2" => ("Performance as the number of nodes grows", "n", "c", true),
            "fig3" => ("Performance by random walk length", "c", "l", false),
            "fig4" => ("Performance by number of clusters", "c", "k", false),
            _ => return None,
        };
        Some(PlotSpec {
            title: title.into(),
            x: x.into(),
            panel: Some(panel.into()),
            x_log,
        })
    }
}

fn column(name: &str) -> Result<fn(&ResultRow) -> f64> {
    Ok(match name {
        "n" => |r| r.n as f64,
        "k" => |r| r.k as f64,
        "c" => |r| r.c,
        "lambda" => |r| r.lambda,
        "l" => |r| r.l as f64,
        "r" => |r| r.r as f64,
        "w" => |r| r.w as f64,
        other => return Err(Error::UnknownColumn(other.to_string())),
    })
}

/// Reads `csv`, renders it and writes `out`. Nothing is written on error.
pub fn emit_plot(csv: &Path, spec: &PlotSpec, out: &Path) -> Result<()> {
    let rows = read_results(csv)?;
    let svg = render_svg(&rows, spec)?;
    std::fs::write(out, svg)?;
    Ok(())
}

#[derive(Debug, Clone, Copy)]
struct Stat {
    x: f64,
    mean: f64,
    sd: f64,
}

fn stat(x: f64, values: &[f64]) -> Stat {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Stat {
        x,
        mean,
        sd: var.sqrt(),
    }
}

struct Series {
    label: String,
    arm: String,
    arm_index: usize,
    ccr: Vec<Stat>,
    nmi: Vec<Stat>,
}

struct Panel {
    title: String,
    k: usize,
    series: Vec<Series>,
}

fn ordered_key(v: f64) -> i64 {
    // total order on finite floats, matching numeric order
    let b = v.to_bits() as i64;
    b ^ (((b >> 63) as u64) >> 1) as i64
}

fn build_panels(rows: &[ResultRow], spec: &PlotSpec) -> Result<Vec<Panel>> {
    let xcol = column(&spec.x)?;
    let pcol = spec.panel.as_deref().map(column).transpose()?;
    let mut arm_order: Vec<&str> = Vec::new();
    for r in rows {
        if !arm_order.contains(&r.arm.as_str()) {
            arm_order.push(&r.arm);
        }
    }

    // panel -> (arm, l) -> x -> (ccr, nmi) samples
    type Cells = BTreeMap<i64, (f64, Vec<f64>, Vec<f64>)>;
    let mut grouped: BTreeMap<i64, (f64, usize, BTreeMap<(usize, usize), Cells>)> = BTreeMap::new();
    for r in rows {
        let p = pcol.map_or(0.0, |f| f(r));
        let x = xcol(r);
        if spec.x_log && x <= 0.0 {
            return Err(Error::param(format!("log axis needs positive `{}` values", spec.x)));
        }
        let arm = arm_order.iter().position(|a| *a == r.arm).unwrap();
        let entry = grouped.entry(ordered_key(p)).or_insert((p, 0, BTreeMap::new()));
        entry.1 = entry.1.max(r.k);
        let cell = entry
            .2
            .entry((arm, r.l))
            .or_default()
            .entry(ordered_key(x))
            .or_insert((x, Vec::new(), Vec::new()));
        cell.1.push(r.ccr);
        cell.2.push(r.nmi);
    }

    let mut panels = Vec::new();
    for (_, (p, k, by_series)) in grouped {
        let mut lengths: BTreeMap<usize, usize> = BTreeMap::new();
        for &(arm, _) in by_series.keys() {
            *lengths.entry(arm).or_default() += 1;
        }
        let series = by_series
            .into_iter()
            .map(|((arm, l), cells)| {
                let name = arm_order[arm].to_string();
                let label = if lengths[&arm] > 1 {
                    format!("{name} l={l}")
                } else {
                    name.clone()
                };
                Series {
                    label,
                    arm: name,
                    arm_index: arm,
                    ccr: cells.values().map(|(x, c, _)| stat(*x, c)).collect(),
                    nmi: cells.values().map(|(x, _, m)| stat(*x, m)).collect(),
                }
            })
            .collect();
        let title = match &spec.panel {
            Some(col) => format!("{col} = {}", fmt_num(p)),
            None => String::new(),
        };
        panels.push(Panel { title, k, series });
    }
    Ok(panels)
}

/// Renders rows as an SVG document.
pub fn render_svg(rows: &[ResultRow], spec: &PlotSpec) -> Result<String> {
    let panels = build_panels(rows, spec)?;
    if panels.is_empty() {
        return Err(Error::NoData("results contain no rows".into()));
    }
    let cols = panels.len().min(COLUMNS);
    let grid_rows = panels.len().div_ceil(COLUMNS);
    let width = cols as f64 * PANEL_W;
    let height = MARGIN_T + grid_rows as f64 * PANEL_H + LEGEND_H;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
        width / 2.0,
        escape(&spec.title)
    );
    let xs: Vec<f64> = rows.iter().map(column(&spec.x)?).collect();
    let x_range = padded_range(&xs, spec.x_log);
    for (i, panel) in panels.iter().enumerate() {
        let ox = (i % COLUMNS) as f64 * PANEL_W;
        let oy = MARGIN_T + (i / COLUMNS) as f64 * PANEL_H;
        draw_panel(&mut svg, panel, spec, x_range, ox, oy);
    }
    draw_legend(&mut svg, &panels, height - LEGEND_H + 14.0);
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn padded_range(xs: &[f64], log: bool) -> (f64, f64) {
    let t = |v: f64| if log { v.log10() } else { v };
    let lo = xs.iter().copied().map(t).fold(f64::INFINITY, f64::min);
    let hi = xs.iter().copied().map(t).fold(f64::NEG_INFINITY, f64::max);
    if hi - lo > 0.0 {
        (lo, hi)
    } else {
        (lo - 1.0, hi + 1.0)
    }
}

fn dash_for(s: &Series) -> Option<&'static str> {
    match s.arm.as_str() {
        "BT" => None,
        "NBT" => Some("6 4"),
        _ => Some(EXTRA_DASHES[s.arm_index % EXTRA_DASHES.len()]),
    }
}

fn draw_panel(svg: &mut String, panel: &Panel, spec: &PlotSpec, x_range: (f64, f64), ox: f64, oy: f64) {
    let (x0, y0) = (ox + MARGIN_L, oy + MARGIN_T);
    let (w, h) = (
        PANEL_W - MARGIN_L - MARGIN_R,
        PANEL_H - MARGIN_T - MARGIN_B,
    );
    let tx = |v: f64| if spec.x_log { v.log10() } else { v };
    let px = |v: f64| x0 + (tx(v) - x_range.0) / (x_range.1 - x_range.0) * w;
    // both metrics share the vertical extent: CCR over [1/K, 1], NMI over [0, 1]
    let ccr_floor = 1.0 / panel.k.max(1) as f64;
    let py_ccr = |v: f64| y0 + h - ((v - ccr_floor) / (1.0 - ccr_floor)).clamp(0.0, 1.0) * h;
    let py_nmi = |v: f64| y0 + h - v.clamp(0.0, 1.0) * h;

    let _ = writeln!(svg, "<g>");
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="13">{}</text>"#,
        x0 + w / 2.0,
        y0 - 10.0,
        escape(&panel.title)
    );
    let _ = writeln!(
        svg,
        r##"<rect x="{x0}" y="{y0}" width="{w}" height="{h}" fill="none" stroke="#444"/>"##
    );
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let y = y0 + h - f * h;
        let _ = writeln!(
            svg,
            r##"<line x1="{x0}" y1="{y}" x2="{}" y2="{y}" stroke="#ddd"/>"##,
            x0 + w
        );
        let ccr = ccr_floor + f * (1.0 - ccr_floor);
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="end" fill="{CCR_COLOR}">{:.0}%</text>"#,
            x0 - 6.0,
            y + 4.0,
            ccr * 100.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" fill="{NMI_COLOR}">{}</text>"#,
            x0 + w + 6.0,
            y + 4.0,
            fmt_num(f)
        );
    }
    for i in 0..=4 {
        let t = x_range.0 + (x_range.1 - x_range.0) * i as f64 / 4.0;
        let v = if spec.x_log { 10f64.powf(t) } else { t };
        let x = px(v);
        let _ = writeln!(
            svg,
            r##"<line x1="{x}" y1="{}" x2="{x}" y2="{}" stroke="#444"/>"##,
            y0 + h,
            y0 + h + 4.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{x}" y="{}" text-anchor="middle">{}</text>"#,
            y0 + h + 16.0,
            fmt_num(v)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        x0 + w / 2.0,
        y0 + h + 34.0,
        escape(&spec.x)
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle" fill="{CCR_COLOR}" transform="rotate(-90 {} {})">CCR</text>"#,
        x0 - 44.0,
        y0 + h / 2.0,
        x0 - 44.0,
        y0 + h / 2.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle" fill="{NMI_COLOR}" transform="rotate(90 {} {})">NMI</text>"#,
        x0 + w + 40.0,
        y0 + h / 2.0,
        x0 + w + 40.0,
        y0 + h / 2.0
    );

    for s in &panel.series {
        let dash = dash_for(s);
        for (stats, color, py) in [
            (&s.ccr, CCR_COLOR, &py_ccr as &dyn Fn(f64) -> f64),
            (&s.nmi, NMI_COLOR, &py_nmi as &dyn Fn(f64) -> f64),
        ] {
            draw_series(svg, stats, color, dash, &px, py);
        }
    }
    let _ = writeln!(svg, "</g>");
}

fn draw_series(
    svg: &mut String,
    stats: &[Stat],
    color: &str,
    dash: Option<&str>,
    px: &dyn Fn(f64) -> f64,
    py: &dyn Fn(f64) -> f64,
) {
    let mut band = String::new();
    for s in stats {
        let _ = write!(band, "{:.2},{:.2} ", px(s.x), py(s.mean + s.sd));
    }
    for s in stats.iter().rev() {
        let _ = write!(band, "{:.2},{:.2} ", px(s.x), py(s.mean - s.sd));
    }
    let _ = writeln!(
        svg,
        r#"<polygon points="{}" fill="{color}" fill-opacity="0.12" stroke="none"/>"#,
        band.trim_end()
    );
    let line: Vec<String> = stats
        .iter()
        .map(|s| format!("{:.2},{:.2}", px(s.x), py(s.mean)))
        .collect();
    let dash_attr = dash.map_or(String::new(), |d| format!(r#" stroke-dasharray="{d}""#));
    let _ = writeln!(
        svg,
        r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.8"{dash_attr}/>"#,
        line.join(" ")
    );
    for s in stats {
        let _ = writeln!(
            svg,
            r#"<circle cx="{:.2}" cy="{:.2}" r="2.2" fill="{color}"/>"#,
            px(s.x),
            py(s.mean)
        );
    }
}

fn draw_legend(svg: &mut String, panels: &[Panel], y: f64) {
    let mut seen: Vec<(&str, usize, Option<&str>)> = Vec::new();
    for p in panels {
        for s in &p.series {
            if !seen.iter().any(|(l, _, _)| *l == s.label) {
                seen.push((&s.label, s.arm_index, dash_for(s)));
            }
        }
    }
    let mut x = 16.0;
    for (metric, color) in [("CCR", CCR_COLOR), ("NMI", NMI_COLOR)] {
        for (label, _, dash) in &seen {
            let dash_attr = dash.map_or(String::new(), |d| format!(r#" stroke-dasharray="{d}""#));
            let _ = writeln!(
                svg,
                r#"<line x1="{x}" y1="{y}" x2="{}" y2="{y}" stroke="{color}" stroke-width="1.8"{dash_attr}/>"#,
                x + 28.0
            );
            let text = format!("{label} {metric}");
            let _ = writeln!(
                svg,
                r#"<text x="{}" y="{}">{}</text>"#,
                x + 34.0,
                y + 4.0,
                escape(&text)
            );
            x += 44.0 + 7.0 * text.len() as f64;
        }
    }
}

fn fmt_num(v: f64) -> String {
    if v == v.round() && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else if v.abs() >= 100.0 {
        format!("{v:.0}")
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(arm: &str, n: usize, c: f64, trial: usize, nmi: f64) -> ResultRow {
        ResultRow {
            arm: arm.into(),
            n,
            k: 2,
            c,
            lambda: 0.9,
            l: if arm == "BT" { 60 } else { 10 },
            r: 10,
            w: 5,
            trial,
            ccr: 0.5 + nmi / 2.0,
            nmi,
            wall_time_seconds: 0.0,
        }
    }

    fn fig1_rows() -> Vec<ResultRow> {
        let mut rows = Vec::new();
        for n in [1000, 2000, 5000, 10000] {
            for c in [2.0, 5.0, 10.0] {
                for t in 0..3 {
                    for arm in ["BT", "NBT"] {
                        rows.push(row(arm, n, c, t, (c / 12.0 + t as f64 * 0.01).min(1.0)));
                    }
                }
            }
        }
        rows
    }

    #[test]
    fn fig1_has_four_panels_and_both_styles() {
        let svg = render_svg(&fig1_rows(), &PlotSpec::preset("fig1").unwrap()).unwrap();
        for n in ["n = 1000", "n = 2000", "n = 5000", "n = 10000"] {
            assert!(svg.contains(n), "{n}");
        }
        // 4 panels x 2 arms x 2 metrics
        assert_eq!(svg.matches("<polyline").count(), 16);
        assert_eq!(svg.matches(r#"stroke-dasharray="6 4""#).count(), 8 + 2);
        assert!(svg.contains(CCR_COLOR) && svg.contains(NMI_COLOR));
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn band_reflects_spread() {
        let rows = vec![row("BT", 100, 4.0, 0, 0.2), row("BT", 100, 4.0, 1, 0.6)];
        let s = &build_panels(&rows, &PlotSpec::preset("fig1").unwrap()).unwrap()[0].series[0];
        assert!((s.nmi[0].mean - 0.4).abs() < 1e-12);
        assert!((s.nmi[0].sd - 0.08f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn single_point_is_valid() {
        let svg = render_svg(&[row("NBT", 100, 4.0, 0, 0.3)], &PlotSpec::preset("fig3").unwrap()).unwrap();
        assert_eq!(svg.matches("<circle").count(), 2);
        assert!(!svg.contains("NaN") && !svg.contains("inf"));
    }

    #[test]
    fn errors() {
        let spec = PlotSpec {
            x: "sparsity".into(),
            ..PlotSpec::preset("fig1").unwrap()
        };
        assert!(matches!(render_svg(&fig1_rows(), &spec), Err(Error::UnknownColumn(_))));
        assert!(matches!(
            render_svg(&[], &PlotSpec::preset("fig1").unwrap()),
            Err(Error::NoData(_))
        ));
        assert!(PlotSpec::preset("fig9").is_none());

        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("empty.csv");
        std::fs::write(&csv, crate::sweep::CSV_HEADER.join(",") + "\n").unwrap();
        let out = dir.path().join("out.svg");
        assert!(emit_plot(&csv, &PlotSpec::preset("fig1").unwrap(), &out).is_err());
        assert!(!out.exists());
    }

    #[test]
    fn number_format() {
        assert_eq!(fmt_num(10.0), "10");
        assert_eq!(fmt_num(0.25), "0.25");
        assert_eq!(fmt_num(3162.27), "3162");
        assert!(ordered_key(-2.0) < ordered_key(-1.0));
        assert!(ordered_key(-1.0) < ordered_key(0.5));
    }
}
