//! Plot-ready output from run CSVs: a long-format table and a static SVG
//! line plot of proxy against epoch.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::harness::record::{format_float, read_run_csv, write_atomic};

pub struct Series {
    pub label: String,
    pub rows: Vec<(usize, f64)>,
}

pub struct PlotOutput {
    pub csv: PathBuf,
    pub svg: PathBuf,
    pub series: Vec<Series>,
}

const COLORS: &[&str] = &["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];
const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const MARGIN: f64 = 60.0;

fn label_for(path: &Path) -> String {
    let name = path.file_name().and_then(|s| s.to_str()).unwrap_or("run");
    name.strip_suffix(".csv").unwrap_or(name).to_string()
}

pub fn long_csv(series: &[Series]) -> String {
    let mut out = String::from("epoch,proxy,label\n");
    for s in series {
        for &(k, v) in &s.rows {
            let _ = writeln!(out, "{k},{},{}", format_float(v), s.label);
        }
    }
    out
}

/// One polyline per series with one vertex per finite proxy value. The
/// vertical axis is log10 when every value is positive.
pub fn svg(series: &[Series]) -> String {
    let finite = || series.iter().flat_map(|s| s.rows.iter()).filter(|r| r.1.is_finite());
    let log = finite().all(|r| r.1 > 0.0);
    let y_of = |v: f64| if log { v.log10() } else { v };
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(k, v) in finite() {
        x0 = x0.min(k as f64);
        x1 = x1.max(k as f64);
        y0 = y0.min(y_of(v));
        y1 = y1.max(y_of(v));
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }
    let px = |k: f64| MARGIN + (k - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let py = |v: f64| HEIGHT - MARGIN - (y_of(v) - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<path d="M{m} {m} V{b} H{r}" fill="none" stroke="black"/>"#,
        m = MARGIN,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" font-size="14" text-anchor="middle">epoch</text>"#,
        WIDTH / 2.0,
        HEIGHT - 20.0
    );
    let _ = writeln!(
        out,
        r#"<text x="16" y="{}" font-size="14" transform="rotate(-90 16 {})" text-anchor="middle">{}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        if log { "log10 proxy" } else { "proxy" }
    );
    for (tick, value) in [(y0, y0), (y1, y1)] {
        let y = HEIGHT - MARGIN - (tick - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);
        let _ = writeln!(out, r#"<text x="{}" y="{y:.2}" font-size="11" text-anchor="end">{value:.3}</text>"#, MARGIN - 4.0);
    }
    for (i, s) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let points: Vec<String> = s
            .rows
            .iter()
            .filter(|r| r.1.is_finite())
            .map(|&(k, v)| format!("{:.2},{:.2}", px(k as f64), py(v)))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline data-label="{}" fill="none" stroke="{color}" stroke-width="1.2" points="{}"/>"#,
            xml_escape(&s.label),
            points.join(" ")
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-size="12" fill="{color}">{}</text>"#,
            WIDTH - MARGIN - 250.0,
            MARGIN + 16.0 * (i as f64 + 1.0),
            xml_escape(&s.label)
        );
    }
    out.push_str("</svg>\n");
    out
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Reads run CSVs and writes `plot.csv` and `plot.svg` into `out_dir`. Each
/// series is labeled by its file name without the `.csv` extension.
pub fn cmd_plotdata(inputs: &[PathBuf], out_dir: &Path) -> Result<PlotOutput> {
    if inputs.is_empty() {
        return Err(Error::config("plotdata needs at least one run CSV"));
    }
    let series = inputs
        .iter()
        .map(|p| {
            Ok(Series {
                label: label_for(p),
                rows: read_run_csv(p)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let csv = out_dir.join("plot.csv");
    let svg_path = out_dir.join("plot.svg");
    write_atomic(&csv, long_csv(&series).as_bytes())?;
    write_atomic(&svg_path, svg(&series).as_bytes())?;
    Ok(PlotOutput {
        csv,
        svg: svg_path,
        series,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svg_has_one_vertex_per_epoch() {
        let series = vec![
            Series {
                label: "a".into(),
                rows: (1..=7).map(|k| (k, 1.0 / k as f64)).collect(),
            },
            Series {
                label: "b<c".into(),
                rows: (1..=7).map(|k| (k, 2.0 / k as f64)).collect(),
            },
        ];
        let text = svg(&series);
        let polylines: Vec<&str> = text.lines().filter(|l| l.starts_with("<polyline")).collect();
        assert_eq!(polylines.len(), 2);
        for l in polylines {
            let pts = l.split("points=\"").nth(1).unwrap().split('"').next().unwrap();
            assert_eq!(pts.split(' ').count(), 7);
        }
        assert!(text.contains("b&lt;c"));
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(cmd_plotdata(&[], Path::new(".")).is_err());
    }
}
