//! Standalone SVG rendering of run artifacts.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::config::{ExperimentConfig, Task};
use crate::error::{Error, Result};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 55.0;
const PALETTE: [&str; 5] = ["#222222", "#9e9e9e", "#d62728", "#1f77b4", "#2ca02c"];

/// A CSV artifact read back with its leading `#` metadata lines skipped.
pub(crate) struct Table {
    path: PathBuf,
    headers: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn read(path: &Path) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path)?;
        let headers = r.headers()?.iter().map(str::to_string).collect();
        let rows = r
            .records()
            .map(|rec| rec.map(|r| r.iter().map(str::to_string).collect()))
            .collect::<std::result::Result<_, _>>()?;
        Ok(Self { path: path.to_path_buf(), headers, rows })
    }

    pub fn has(&self, name: &str) -> bool {
        self.headers.iter().any(|h| h == name)
    }

    fn index(&self, name: &str) -> Result<usize> {
        self.headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Format(format!("{}: missing column `{name}`", self.path.display())))
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let i = self.index(name)?;
        self.rows
            .iter()
            .enumerate()
            .map(|(k, row)| {
                row[i].parse::<f64>().map_err(|e| {
                    Error::Format(format!("{}: row {}, column `{name}`: {e}", self.path.display(), k + 1))
                })
            })
            .collect()
    }

    pub fn text_column(&self, name: &str) -> Result<Vec<&str>> {
        let i = self.index(name)?;
        Ok(self.rows.iter().map(|r| r[i].as_str()).collect())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }
}

/// Column name for output `k` of `dim`: `base` when scalar, `base_{k+1}` otherwise.
pub(crate) fn column_name(base: &str, k: usize, dim: usize) -> String {
    if dim == 1 {
        base.to_string()
    } else {
        format!("{base}_{}", k + 1)
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Mark {
    Line,
    Dashed,
    Points,
}

struct Series {
    label: String,
    mark: Mark,
    color: &'static str,
    points: Vec<(f64, f64)>,
    /// Whether the axis ranges cover this series; others are clipped.
    sets_range: bool,
}

impl Series {
    fn new(label: &str, mark: Mark, color: &'static str, points: Vec<(f64, f64)>) -> Self {
        Self { label: label.into(), mark, color, points, sets_range: true }
    }
}

struct Axes {
    x: (f64, f64),
    y: (f64, f64),
    log_y: bool,
}

impl Axes {
    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        let y = if self.log_y { y.log10() } else { y };
        HEIGHT - BOTTOM - (y - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - TOP - BOTTOM)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if !(lo.is_finite() && hi.is_finite()) {
        return (-1.0, 1.0);
    }
    if hi - lo < 1e-12 {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let raw = (hi - lo) / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + 1e-9 * step {
        out.push(if t.abs() < 1e-12 * step { 0.0 } else { t });
        t += step;
    }
    out
}

fn fmt_tick(v: f64) -> String {
    let s = format!("{v:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">
<title>{}</title>
<rect width="100%" height="100%" fill="white"/>
<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        escape(title),
        LEFT + (WIDTH - LEFT - RIGHT) / 2.0,
        escape(title)
    );
}

fn frame(out: &mut String, axes: &Axes, x_label: &str, y_label: &str) {
    let (x0, x1) = (LEFT, WIDTH - RIGHT);
    let (y0, y1) = (TOP, HEIGHT - BOTTOM);
    let _ = writeln!(out, r#"<rect x="{x0}" y="{y0}" width="{}" height="{}" fill="none" stroke="black"/>"#, x1 - x0, y1 - y0);
    for t in ticks(axes.x.0, axes.x.1) {
        let px = axes.px(t);
        let _ = writeln!(
            out,
            r#"<line x1="{px:.2}" y1="{y1}" x2="{px:.2}" y2="{}" stroke="black"/><text x="{px:.2}" y="{}" text-anchor="middle">{}</text>"#,
            y1 + 5.0,
            y1 + 18.0,
            fmt_tick(t)
        );
    }
    for t in ticks(axes.y.0, axes.y.1) {
        let py = HEIGHT - BOTTOM - (t - axes.y.0) / (axes.y.1 - axes.y.0) * (y1 - y0);
        let label = if axes.log_y { format!("1e{}", fmt_tick(t)) } else { fmt_tick(t) };
        let _ = writeln!(
            out,
            r#"<line x1="{}" y1="{py:.2}" x2="{x0}" y2="{py:.2}" stroke="black"/><text x="{}" y="{:.2}" text-anchor="end">{label}</text>"#,
            x0 - 5.0,
            x0 - 8.0,
            py + 4.0
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>
<text x="18" y="{}" text-anchor="middle" transform="rotate(-90 18 {})">{}</text>"#,
        (x0 + x1) / 2.0,
        HEIGHT - 15.0,
        escape(x_label),
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(y_label)
    );
}

fn legend(out: &mut String, entries: &[(String, Mark, &str)]) {
    let x = WIDTH - RIGHT + 15.0;
    for (i, (label, mark, color)) in entries.iter().enumerate() {
        let y = TOP + 10.0 + 20.0 * i as f64;
        match mark {
            Mark::Points => {
                let _ = write!(out, r#"<circle cx="{}" cy="{y}" r="3" fill="{color}"/>"#, x + 10.0);
            }
            Mark::Line | Mark::Dashed => {
                let dash = if *mark == Mark::Dashed { r#" stroke-dasharray="5,3""# } else { "" };
                let _ = write!(
                    out,
                    r#"<line x1="{x}" y1="{y}" x2="{}" y2="{y}" stroke="{color}" stroke-width="2"{dash}/>"#,
                    x + 20.0
                );
            }
        }
        let _ = writeln!(out, r#"<text x="{}" y="{}">{}</text>"#, x + 26.0, y + 4.0, escape(label));
    }
}

fn line_plot(title: &str, x_label: &str, y_label: &str, series: &[Series], log_y: bool) -> Result<String> {
    let finite = |p: &&(f64, f64)| p.0.is_finite() && p.1.is_finite() && (!log_y || p.1 > 0.0);
    let all: Vec<(f64, f64)> =
        series.iter().filter(|s| s.sets_range).flat_map(|s| s.points.iter().filter(finite).copied()).collect();
    if all.is_empty() {
        return Err(Error::Format(format!("nothing to plot for `{title}`")));
    }
    let fy = |y: f64| if log_y { y.log10() } else { y };
    let (xmin, xmax) = all.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |a, p| (a.0.min(p.0), a.1.max(p.0)));
    let (ymin, ymax) = all.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |a, p| (a.0.min(fy(p.1)), a.1.max(fy(p.1))));
    let axes = Axes { x: padded(xmin, xmax), y: padded(ymin, ymax), log_y };
    let mut out = String::new();
    header(&mut out, title);
    frame(&mut out, &axes, x_label, y_label);
    let _ = writeln!(
        out,
        r#"<clipPath id="plot-area"><rect x="{LEFT}" y="{TOP}" width="{}" height="{}"/></clipPath>"#,
        WIDTH - LEFT - RIGHT,
        HEIGHT - TOP - BOTTOM
    );
    for s in series {
        let pts: Vec<(f64, f64)> = s.points.iter().filter(finite).map(|p| (axes.px(p.0), axes.py(p.1))).collect();
        let _ = write!(out, r#"<g class="series" data-label="{}" clip-path="url(#plot-area)">"#, escape(&s.label));
        match s.mark {
            Mark::Points => {
                for (x, y) in pts {
                    let _ = write!(out, r#"<circle cx="{x:.2}" cy="{y:.2}" r="2.5" fill="{}"/>"#, s.color);
                }
            }
            Mark::Line | Mark::Dashed => {
                let path: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
                let dash = if s.mark == Mark::Dashed { r#" stroke-dasharray="5,3""# } else { "" };
                let _ = write!(
                    out,
                    r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="2"{dash}/>"#,
                    path.join(" "),
                    s.color
                );
            }
        }
        let _ = writeln!(out, "</g>");
    }
    let entries: Vec<_> = series.iter().map(|s| (s.label.clone(), s.mark, s.color)).collect();
    legend(&mut out, &entries);
    out.push_str("</svg>\n");
    Ok(out)
}

/// Blue below 0.5, white at 0.5, red above.
fn diverging(p: f64) -> String {
    let p = p.clamp(0.0, 1.0);
    let (r, g, b) = if p >= 0.5 {
        let t = 2.0 * (p - 0.5);
        (255.0, 255.0 * (1.0 - t) + 60.0 * t, 255.0 * (1.0 - t) + 60.0 * t)
    } else {
        let t = 2.0 * (0.5 - p);
        (255.0 * (1.0 - t) + 50.0 * t, 255.0 * (1.0 - t) + 100.0 * t, 255.0)
    };
    format!("#{:02x}{:02x}{:02x}", r.round() as u8, g.round() as u8, b.round() as u8)
}

fn heat_plot(title: &str, grid: &[(f64, f64, f64)], points: &[(f64, f64, usize)]) -> Result<String> {
    if grid.is_empty() {
        return Err(Error::Format(format!("empty probability grid for `{title}`")));
    }
    let mut xs: Vec<f64> = grid.iter().map(|g| g.0).collect();
    let mut ys: Vec<f64> = grid.iter().map(|g| g.1).collect();
    for v in [&mut xs, &mut ys] {
        v.sort_by(f64::total_cmp);
        v.dedup();
    }
    let cell = |v: &[f64]| if v.len() > 1 { (v[v.len() - 1] - v[0]) / (v.len() - 1) as f64 } else { 1.0 };
    let (dx, dy) = (cell(&xs), cell(&ys));
    let axes = Axes {
        x: (xs[0] - dx / 2.0, xs[xs.len() - 1] + dx / 2.0),
        y: (ys[0] - dy / 2.0, ys[ys.len() - 1] + dy / 2.0),
        log_y: false,
    };
    let mut out = String::new();
    header(&mut out, title);
    out.push_str(r#"<g class="grid">"#);
    for &(x, y, p) in grid {
        let (x0, x1) = (axes.px(x - dx / 2.0), axes.px(x + dx / 2.0));
        let (y0, y1) = (axes.py(y + dy / 2.0), axes.py(y - dy / 2.0));
        let _ = write!(
            out,
            r#"<rect x="{x0:.2}" y="{y0:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
            x1 - x0 + 0.3,
            y1 - y0 + 0.3,
            diverging(p)
        );
    }
    out.push_str("</g>\n");
    frame(&mut out, &axes, "x1", "x2");
    let styles = [("class 0", "#b2182b"), ("class 1", "#2166ac")];
    for (class, (label, color)) in styles.iter().enumerate() {
        let _ = write!(out, r#"<g class="series" data-label="{label}">"#);
        for &(x, y, c) in points {
            if c == class {
                let _ = write!(
                    out,
                    r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}" stroke="white" stroke-width="0.8"/>"#,
                    axes.px(x),
                    axes.py(y)
                );
            }
        }
        let _ = writeln!(out, "</g>");
    }
    let mut entries: Vec<(String, Mark, &str)> =
        styles.iter().map(|(l, c)| (l.to_string(), Mark::Points, *c)).collect();
    entries.push(("p(class 0) = 1".into(), Mark::Line, "#ff3c3c"));
    entries.push(("p(class 0) = 0.5".into(), Mark::Line, "#dddddd"));
    entries.push(("p(class 0) = 0".into(), Mark::Line, "#3264ff"));
    legend(&mut out, &entries);
    out.push_str("</svg>\n");
    Ok(out)
}

fn sorted(mut pts: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    pts
}

fn zip(xs: &[f64], ys: &[f64]) -> Vec<(f64, f64)> {
    xs.iter().copied().zip(ys.iter().copied()).collect()
}

fn regression_plots(config: &ExperimentConfig, run_dir: &Path, preds: &Table) -> Result<Vec<(String, String)>> {
    let dim = config.num_outputs();
    let splits = preds.text_column("split")?;
    let x = preds.column("x")?;
    let curve = run_dir.join("curve.csv");
    let curve = if curve.exists() { Some(Table::read(&curve)?) } else { None };
    let title = match config.target {
        Some(t) => format!("{} {}", config.task, t.name()),
        None => config.task.to_string(),
    };
    let mut files = Vec::new();
    for k in 0..dim {
        let name = |base: &str| column_name(base, k, dim);
        let teacher = preds.column(&name("teacher"))?;
        let train: Vec<(f64, f64)> =
            (0..preds.len()).filter(|&i| splits[i] == "train").map(|i| (x[i], teacher[i])).collect();
        let mut series = vec![Series::new("teacher", Mark::Points, PALETTE[0], train)];
        let lines = [("initial", Mark::Dashed, PALETTE[1]), ("final", Mark::Line, PALETTE[2])];
        for (label, mark, color) in lines {
            let points = match &curve {
                Some(c) => zip(&c.column("x")?, &c.column(&name(label))?),
                None => sorted(zip(&x, &preds.column(&name(label))?)),
            };
            series.push(Series::new(label, mark, color, points));
        }
        if let Some(c) = curve.as_ref().filter(|c| c.has("classical")) {
            let points = zip(&c.column("x")?, &c.column("classical")?);
            // Unbounded least-squares curves would swamp the scale.
            series.push(Series { sets_range: false, ..Series::new("classical", Mark::Line, PALETTE[3], points) });
        }
        let (file, panel) = if dim == 1 {
            ("fit.svg".to_string(), title.clone())
        } else {
            (format!("fit_{}.svg", k + 1), format!("{title}, output {}", k + 1))
        };
        files.push((file, line_plot(&panel, "x", "output", &series, false)?));
    }
    Ok(files)
}

fn classification_plot(run_dir: &Path, preds: &Table) -> Result<(String, String)> {
    let grid = Table::read(&run_dir.join("grid.csv"))?;
    let cells: Vec<(f64, f64, f64)> = {
        let (a, b, p) = (grid.column("x_1")?, grid.column("x_2")?, grid.column("p_class0")?);
        (0..grid.len()).map(|i| (a[i], b[i], p[i])).collect()
    };
    let splits = preds.text_column("split")?;
    let (a, b) = (preds.column("x_1")?, preds.column("x_2")?);
    let t0 = preds.column("teacher_1")?;
    let points: Vec<(f64, f64, usize)> = (0..preds.len())
        .filter(|&i| splits[i] == "train")
        .map(|i| (a[i], b[i], if t0[i] > 0.5 { 0 } else { 1 }))
        .collect();
    Ok(("decision.svg".into(), heat_plot("classify2d: p(class 0)", &cells, &points)?))
}

fn trace_plot(run_dir: &Path) -> Result<Option<(String, String)>> {
    let path = run_dir.join("trace.csv");
    if !path.exists() {
        return Ok(None);
    }
    let t = Table::read(&path)?;
    if t.len() == 0 {
        return Ok(None);
    }
    let it = t.column("iteration")?;
    let series = [
        Series::new("cost", Mark::Line, PALETTE[2], zip(&it, &t.column("cost")?)),
        Series::new("gradient max-norm", Mark::Dashed, PALETTE[3], zip(&it, &t.column("grad_norm")?)),
    ];
    match line_plot("training trace", "iteration", "value (log scale)", &series, true) {
        Ok(svg) => Ok(Some(("trace.svg".into(), svg))),
        Err(_) => Ok(None),
    }
}

/// Renders the SVG figures of a run directory and returns the files written.
/// Nothing is written unless every figure renders.
pub fn emit_plots(run_dir: &Path) -> Result<Vec<PathBuf>> {
    let config = ExperimentConfig::from_file(&run_dir.join("config.json"))?;
    let preds = Table::read(&run_dir.join("predictions.csv"))?;
    if preds.len() == 0 {
        return Err(Error::Format(format!("{}: no prediction rows", run_dir.join("predictions.csv").display())));
    }
    let mut figures = match config.task {
        Task::Classify2d => vec![classification_plot(run_dir, &preds)?],
        _ => regression_plots(&config, run_dir, &preds)?,
    };
    figures.extend(trace_plot(run_dir)?);
    let mut written = Vec::with_capacity(figures.len());
    for (name, svg) in figures {
        let path = run_dir.join(name);
        std::fs::write(&path, svg)?;
        written.push(path);
    }
    Ok(written)
}
