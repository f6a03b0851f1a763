use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

struct Series {
    label: String,
    points: Vec<(f64, f64)>,
    step: bool,
}

struct Chart {
    name: String,
    title: String,
    x_label: String,
    log_y: bool,
    series: Vec<Series>,
}

#[derive(Clone, Debug)]
pub enum PlotSummary {
    NothingToPlot,
    Written(Vec<PathBuf>),
}

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let mut lines = text.lines();
        let header = lines.next().unwrap_or_default().split(',').map(str::to_string).collect();
        let rows = lines.filter(|l| !l.is_empty()).map(|l| l.split(',').map(str::to_string).collect()).collect();
        Ok(Table { header, rows })
    }

    fn has(&self, cols: &[&str]) -> bool {
        self.header == cols
    }

    fn col(&self, name: &str) -> usize {
        self.header.iter().position(|h| h == name).expect("header checked")
    }

    /// (x, y) pairs, skipping blank or non-numeric cells.
    fn xy(&self, x: &str, y: &str) -> Vec<(f64, f64)> {
        let (i, j) = (self.col(x), self.col(y));
        self.rows.iter().filter_map(|r| Some((r.get(i)?.parse().ok()?, r.get(j)?.parse().ok()?))).collect()
    }
}

fn series(label: &str, points: Vec<(f64, f64)>) -> Series {
    Series { label: label.into(), points, step: false }
}

fn chart(name: &str, title: &str, x_label: &str, log_y: bool, series: Vec<Series>) -> Chart {
    Chart { name: name.into(), title: title.into(), x_label: x_label.into(), log_y, series }
}

/// Pointwise max of y over rows sharing x, grouped by an optional key column.
fn grouped_max(t: &Table, key: Option<&str>, x: &str, y: &str) -> BTreeMap<String, Vec<(f64, f64)>> {
    let (i, j) = (t.col(x), t.col(y));
    let k = key.map(|k| t.col(k));
    let mut acc: BTreeMap<String, BTreeMap<u64, f64>> = BTreeMap::new();
    for r in &t.rows {
        let (Some(xv), Some(yv)) = (r[i].parse::<f64>().ok(), r[j].parse::<f64>().ok()) else { continue };
        let group = k.map(|k| r[k].clone()).unwrap_or_default();
        let slot = acc.entry(group).or_default().entry(xv.to_bits()).or_insert(f64::NEG_INFINITY);
        *slot = slot.max(yv);
    }
    acc.into_iter()
        .map(|(g, m)| {
            let mut pts: Vec<(f64, f64)> = m.into_iter().map(|(b, y)| (f64::from_bits(b), y)).collect();
            pts.sort_by(|a, b| a.0.total_cmp(&b.0));
            (g, pts)
        })
        .collect()
}

fn recognize(file: &str, t: &Table) -> Option<Vec<Chart>> {
    let charts = match file {
        "tail.csv" if t.has(&["n", "p_tau_gt_n", "stderr", "bound_fit"]) => vec![chart(
            "tail",
            "P(tau > n)",
            "n",
            true,
            vec![series("empirical", t.xy("n", "p_tau_gt_n")), series("c1 exp(-c2 sqrt n)", t.xy("n", "bound_fit"))],
        )],
        "tv.csv" if t.has(&["n", "bound", "bound_se", "tv", "tv_se", "within"]) => vec![chart(
            "tv",
            "TV distance and 2 P(tau > n)",
            "n",
            true,
            vec![series("2 P(tau > n)", t.xy("n", "bound")), series("histogram TV", t.xy("n", "tv"))],
        )],
        "paths.csv" if t.has(&["replica", "t", "B_n"]) => {
            let mut paths: BTreeMap<usize, Vec<(f64, f64)>> = BTreeMap::new();
            for r in &t.rows {
                if let (Ok(k), Ok(x), Ok(y)) = (r[0].parse(), r[1].parse(), r[2].parse()) {
                    paths.entry(k).or_default().push((x, y));
                }
            }
            let series = paths
                .into_iter()
                .take(50)
                .map(|(k, mut p)| {
                    p.insert(0, (0.0, 0.0));
                    Series { label: format!("replica {k}"), points: p, step: true }
                })
                .collect();
            vec![chart("paths", "B_n(t) sample paths", "t", false, series)]
        }
        "variance.csv" if t.has(&["t", "v", "var_b"]) => {
            let ts = t.xy("t", "var_b");
            let diag = ts.iter().map(|(x, _)| (*x, *x)).collect();
            vec![chart("variance", "Var B_n(t)", "t", false, vec![series("Var B_n(t)", ts), series("t", diag)])]
        }
        "felsmann.csv" if t.has(&["n", "a_n", "exact", "mc", "mc_se"]) => vec![chart(
            "felsmann",
            "E prod gamma(Y_k)",
            "n",
            true,
            vec![series("a_n", t.xy("n", "a_n")), series("exact", t.xy("n", "exact")), series("mc", t.xy("n", "mc"))],
        )],
        "lln.csv" if t.has(&["n", "l1_error", "stderr", "scaled_variance", "running_sup"]) => vec![
            chart("lln", "E|S_n / n|", "n", true, vec![series("L1 error", t.xy("n", "l1_error"))]),
            chart("lln_variance", "Var(S_n) / n", "n", false, vec![series("Var(S_n)/n", t.xy("n", "scaled_variance"))]),
        ],
        "borovkov.csv" | "variance_floor.csv" if t.has(&["n", "estimate", "stderr", "bound"]) => {
            let stem = file.trim_end_matches(".csv");
            vec![chart(stem, stem, "n", stem == "borovkov", vec![series("estimate", t.xy("n", "estimate")), series("bound", t.xy("n", "bound"))])]
        }
        "coverage.csv" if t.has(&["a", "empirical", "stderr", "bound", "ok"]) => vec![chart(
            "coverage",
            "P(|S_n| / sqrt n >= a)",
            "a",
            true,
            vec![series("empirical", t.xy("a", "empirical")), series("2(1 - Phi(a / sigma))", t.xy("a", "bound"))],
        )],
        "alpha.csv" if t.has(&["j", "n", "alpha", "provenance"]) => {
            let sup = grouped_max(t, None, "n", "alpha").into_values().next().unwrap_or_default();
            vec![chart("alpha", "sup_j alpha_j(n)", "n", false, vec![series("sup alpha", sup)])]
        }
        "contractivity.csv" if t.has(&["j", "n", "estimate"]) => {
            let sup = grouped_max(t, None, "n", "estimate").into_values().next().unwrap_or_default();
            vec![chart("contractivity", "sup_j n-th root rate", "n", false, vec![series("rate", sup)])]
        }
        "transfer.csv" if t.has(&["n", "r", "alpha_x", "alpha_env", "b", "bound", "holds"]) => {
            let ax = grouped_max(t, None, "n", "alpha_x").into_values().next().unwrap_or_default();
            let mut tight: BTreeMap<u64, f64> = BTreeMap::new();
            for (n, b) in t.xy("n", "bound") {
                let e = tight.entry(n.to_bits()).or_insert(f64::INFINITY);
                *e = e.min(b);
            }
            let tight = tight.into_iter().map(|(k, v)| (f64::from_bits(k), v)).collect();
            vec![chart("transfer", "alpha^X(n) and the best transfer bound", "n", false, vec![series("alpha^X", ax), series("min_r bound", tight)])]
        }
        "drift.csv" if t.has(&["y", "x", "estimate", "stderr", "bound", "violated"]) => {
            let mut s = Vec::new();
            for (y, pts) in grouped_max(t, Some("y"), "x", "estimate") {
                s.push(series(&format!("QV, y={y}"), pts));
            }
            for (y, pts) in grouped_max(t, Some("y"), "x", "bound") {
                s.push(series(&format!("bound, y={y}"), pts));
            }
            vec![chart("drift", "[Q(y)V](x) against gamma(y)V(x) + K(y)", "x", true, s)]
        }
        _ => return None,
    };
    Some(charts)
}

fn write_dat(c: &Chart) -> String {
    let mut out = format!("# {}\n", c.title);
    for (i, s) in c.series.iter().enumerate() {
        if i > 0 {
            out.push_str("\n\n");
        }
        let _ = writeln!(out, "# index {i}: {}", s.label);
        let mut prev: Option<f64> = None;
        for (x, y) in &s.points {
            if s.step {
                if let Some(p) = prev {
                    let _ = writeln!(out, "{x} {p}");
                }
                prev = Some(*y);
            }
            let _ = writeln!(out, "{x} {y}");
        }
    }
    out
}

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

fn write_svg(c: &Chart) -> String {
    let (w, h, left, right, top, bottom) = (720.0, 440.0, 70.0, 20.0, 40.0, 50.0);
    let fy = |y: f64| if c.log_y { y.log10() } else { y };
    let visible = |(_, y): &&(f64, f64)| y.is_finite() && (!c.log_y || *y > 0.0);
    let pts: Vec<(f64, f64)> = c.series.iter().flat_map(|s| s.points.iter().filter(visible).map(|(x, y)| (*x, fy(*y)))).collect();
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" font-family=\"sans-serif\" font-size=\"11\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n<text x=\"{}\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n",
        w / 2.0,
        escape(&c.title)
    );
    if pts.is_empty() {
        svg.push_str("<text x=\"360\" y=\"220\" text-anchor=\"middle\">no finite points</text>\n</svg>\n");
        return svg;
    }
    let span = |v: &mut dyn Iterator<Item = f64>| {
        let (lo, hi) = v.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
        if hi > lo {
            (lo, hi)
        } else {
            (lo - 0.5, hi + 0.5)
        }
    };
    let (x0, x1) = span(&mut pts.iter().map(|p| p.0));
    let (y0, y1) = span(&mut pts.iter().map(|p| p.1));
    let px = |x: f64| left + (x - x0) / (x1 - x0) * (w - left - right);
    let py = |y: f64| h - bottom - (y - y0) / (y1 - y0) * (h - top - bottom);
    let _ = writeln!(
        svg,
        "<polyline fill=\"none\" stroke=\"black\" points=\"{left},{top} {left},{} {},{}\"/>",
        h - bottom,
        w - right,
        h - bottom
    );
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
        let ylab = if c.log_y { format!("1e{yv:.1}") } else { format!("{yv:.3}") };
        let _ = writeln!(svg, "<text x=\"{:.1}\" y=\"{}\" text-anchor=\"middle\">{xv:.3}</text>", px(xv), h - bottom + 16.0);
        let _ = writeln!(svg, "<text x=\"{}\" y=\"{:.1}\" text-anchor=\"end\">{ylab}</text>", left - 6.0, py(yv) + 4.0);
    }
    let _ = writeln!(svg, "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>", w / 2.0, h - 12.0, escape(&c.x_label));
    for (i, s) in c.series.iter().enumerate() {
        let colour = PALETTE[i % PALETTE.len()];
        let mut coords = String::new();
        let mut prev: Option<f64> = None;
        for &(x, y) in s.points.iter().filter(visible) {
            let y = fy(y);
            if let (true, Some(p)) = (s.step, prev) {
                let _ = write!(coords, "{:.2},{:.2} ", px(x), py(p));
            }
            let _ = write!(coords, "{:.2},{:.2} ", px(x), py(y));
            prev = Some(y);
        }
        let width = if s.step && c.series.len() > 8 { 0.6 } else { 1.5 };
        let _ = writeln!(svg, "<polyline fill=\"none\" stroke=\"{colour}\" stroke-width=\"{width}\" points=\"{}\"/>", coords.trim_end());
        if c.series.len() <= 8 {
            let ly = top + 14.0 * i as f64 + 6.0;
            let _ = writeln!(
                svg,
                "<line x1=\"{}\" y1=\"{ly}\" x2=\"{}\" y2=\"{ly}\" stroke=\"{colour}\" stroke-width=\"2\"/><text x=\"{}\" y=\"{}\">{}</text>",
                w - right - 170.0,
                w - right - 150.0,
                w - right - 145.0,
                ly + 4.0,
                escape(&s.label)
            );
        }
    }
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Writes `<name>.dat` (gnuplot blocks, one per series) and `<name>.svg` for every
/// recognized CSV in `dir`. A directory without CSVs has nothing to plot.
pub fn emit_plots(dir: &Path) -> Result<PlotSummary> {
    if !dir.is_dir() {
        return Err(Error::UnrecognizedLayout(format!("{} is not a directory", dir.display())));
    }
    let mut csvs: Vec<PathBuf> =
        fs::read_dir(dir)?.filter_map(|e| e.ok().map(|e| e.path())).filter(|p| p.extension().is_some_and(|e| e == "csv")).collect();
    csvs.sort();
    if csvs.is_empty() {
        return Ok(PlotSummary::NothingToPlot);
    }
    let mut written = Vec::new();
    for path in &csvs {
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        let Some(charts) = recognize(name, &Table::read(path)?) else { continue };
        for c in charts {
            for (ext, body) in [("dat", write_dat(&c)), ("svg", write_svg(&c))] {
                let out = dir.join(format!("{}.{ext}", c.name));
                fs::write(&out, body)?;
                written.push(out);
            }
        }
    }
    if written.is_empty() {
        return Err(Error::UnrecognizedLayout(dir.display().to_string()));
    }
    Ok(PlotSummary::Written(written))
}
