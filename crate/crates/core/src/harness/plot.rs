//! SVG plots of harness CSVs. The output depends only on the CSV bytes.

use std::f64::consts::FRAC_PI_4;
use std::fmt::Write as _;
use std::path::Path;

use super::{format_g17, HarnessError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    Calibrate,
    Value,
    Normal,
    Rate,
    Trace,
    Hardy,
    Summary,
}

const SCHEMAS: [(PlotKind, &[&str]); 7] = [
    (PlotKind::Calibrate, &["h", "c0", "c1"]),
    (PlotKind::Value, &["h", "q0", "c0", "rho"]),
    (PlotKind::Normal, &["h", "q1", "c0", "c1", "sigma"]),
    (PlotKind::Rate, &["point_index", "slope"]),
    (PlotKind::Trace, &["lambda", "ratio"]),
    (PlotKind::Hardy, &["index", "ratio"]),
    (PlotKind::Summary, &["mode", "point", "estimate", "truth", "rel_error"]),
];

fn expected_columns() -> String {
    SCHEMAS
        .iter()
        .map(|(_, cols)| cols.join(","))
        .collect::<Vec<_>>()
        .join(" | ")
}

impl PlotKind {
    pub fn columns(self) -> &'static [&'static str] {
        SCHEMAS.iter().find(|(k, _)| *k == self).map(|(_, c)| *c).expect("every kind has a schema")
    }

    pub fn name(self) -> &'static str {
        match self {
            PlotKind::Calibrate => "calibrate",
            PlotKind::Value => "value",
            PlotKind::Normal => "normal",
            PlotKind::Rate => "rate",
            PlotKind::Trace => "trace",
            PlotKind::Hardy => "hardy",
            PlotKind::Summary => "summary",
        }
    }

    pub fn detect(header: &[String]) -> Option<Self> {
        SCHEMAS
            .iter()
            .find(|(_, cols)| cols.len() == header.len() && cols.iter().zip(header).all(|(a, b)| a == b))
            .map(|(k, _)| *k)
    }
}

impl std::str::FromStr for PlotKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        SCHEMAS
            .iter()
            .map(|(k, _)| *k)
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown plot kind `{s}`"))
    }
}

/// Reads `path` and renders it. `kind` defaults to the one matching the header.
pub fn emit_plot(path: &Path, kind: Option<PlotKind>) -> Result<String, HarnessError> {
    let bytes = std::fs::read(path).map_err(|e| HarnessError::io(path, e))?;
    render_svg(&bytes, kind).map_err(|e| match e {
        HarnessError::Schema(m) => HarnessError::Schema(format!("{}: {m}", path.display())),
        other => other,
    })
}

struct Series {
    label: String,
    points: Vec<(f64, f64)>,
    line: bool,
}

struct Figure {
    title: &'static str,
    xlabel: &'static str,
    ylabel: &'static str,
    log_x: bool,
    log_y: bool,
    series: Vec<Series>,
    references: Vec<(String, f64)>,
}

pub fn render_svg(csv_bytes: &[u8], kind: Option<PlotKind>) -> Result<String, HarnessError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(csv_bytes);
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| HarnessError::Schema(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.iter().all(|h| h.is_empty()) {
        return Err(HarnessError::Schema(format!("empty CSV; expected columns {}", expected_columns())));
    }
    let detected = PlotKind::detect(&header);
    let kind = match (kind, detected) {
        (Some(k), Some(d)) if k == d => k,
        (None, Some(d)) => d,
        (Some(k), _) => {
            return Err(HarnessError::Schema(format!(
                "columns {} do not match {k:?}; expected {}",
                header.join(","),
                k.columns().join(",")
            )))
        }
        (None, None) => {
            return Err(HarnessError::Schema(format!(
                "unknown columns {}; expected one of {}",
                header.join(","),
                expected_columns()
            )))
        }
    };
    let mut rows: Vec<Vec<String>> = Vec::new();
    for r in reader.records() {
        let r = r.map_err(|e| HarnessError::Schema(e.to_string()))?;
        rows.push(r.iter().map(str::to_string).collect());
    }
    if rows.is_empty() {
        return Err(HarnessError::Schema(format!("no data rows under {}", header.join(","))));
    }
    let num = |row: &Vec<String>, j: usize| -> Result<f64, HarnessError> {
        row[j]
            .parse::<f64>()
            .map_err(|_| HarnessError::Schema(format!("column {} value `{}` is not a number", header[j], row[j])))
    };
    let column = |j: usize| -> Result<Vec<f64>, HarnessError> { rows.iter().map(|r| num(r, j)).collect() };
    let pairs = |x: &[f64], y: &[f64]| -> Vec<(f64, f64)> { x.iter().copied().zip(y.iter().copied()).collect() };
    let series = |label: &str, points, line| Series {
        label: label.into(),
        points,
        line,
    };

    let fig = match kind {
        PlotKind::Calibrate => {
            let h = column(0)?;
            Figure {
                title: "calibration constants",
                xlabel: "h",
                ylabel: "c",
                log_x: true,
                log_y: false,
                series: vec![
                    series("c0", pairs(&h, &column(1)?), true),
                    series("c1", pairs(&h, &column(2)?), true),
                ],
                references: vec![("π/4".into(), FRAC_PI_4), ("−π/4".into(), -FRAC_PI_4)],
            }
        }
        PlotKind::Value => {
            let h = column(0)?;
            Figure {
                title: "value recovery",
                xlabel: "h",
                ylabel: "rho",
                log_x: true,
                log_y: false,
                series: vec![series("rho", pairs(&h, &column(3)?), true)],
                references: vec![],
            }
        }
        PlotKind::Normal => {
            let h = column(0)?;
            Figure {
                title: "normal derivative recovery",
                xlabel: "h",
                ylabel: "sigma",
                log_x: true,
                log_y: false,
                series: vec![series("sigma", pairs(&h, &column(4)?), true)],
                references: vec![],
            }
        }
        PlotKind::Rate => Figure {
            title: "boundary rate",
            xlabel: "point",
            ylabel: "slope",
            log_x: false,
            log_y: false,
            series: vec![series("slope", pairs(&column(0)?, &column(1)?), false)],
            references: vec![],
        },
        PlotKind::Trace => Figure {
            title: "trace ratio",
            xlabel: "lambda",
            ylabel: "ratio",
            log_x: true,
            log_y: true,
            series: vec![series("ratio", pairs(&column(0)?, &column(1)?), true)],
            references: vec![],
        },
        PlotKind::Hardy => Figure {
            title: "hardy ratio",
            xlabel: "index",
            ylabel: "ratio",
            log_x: false,
            log_y: false,
            series: vec![series("ratio", pairs(&column(0)?, &column(1)?), false)],
            references: vec![],
        },
        PlotKind::Summary => {
            let idx: Vec<f64> = (0..rows.len()).map(|i| i as f64).collect();
            Figure {
                title: "summary",
                xlabel: "row",
                ylabel: "value",
                log_x: false,
                log_y: false,
                series: vec![
                    series("estimate", pairs(&idx, &column(2)?), false),
                    series("truth", pairs(&idx, &column(3)?), false),
                ],
                references: vec![],
            }
        }
    };
    Ok(draw(&fig))
}

const W: f64 = 640.0;
const H: f64 = 420.0;
const MARGIN: (f64, f64, f64, f64) = (70.0, 20.0, 40.0, 50.0); // left, right, top, bottom
const COLOURS: [&str; 3] = ["#1f77b4", "#d62728", "#2ca02c"];

fn draw(fig: &Figure) -> String {
    let tx = |v: f64| if fig.log_x { v.log10() } else { v };
    let ty = |v: f64| if fig.log_y { v.log10() } else { v };
    let finite: Vec<(f64, f64)> = fig
        .series
        .iter()
        .flat_map(|s| s.points.iter())
        .map(|&(x, y)| (tx(x), ty(y)))
        .filter(|(x, y)| x.is_finite() && y.is_finite())
        .collect();
    let refs: Vec<f64> = fig.references.iter().map(|r| ty(r.1)).collect();
    let range = |vals: &mut dyn Iterator<Item = f64>| {
        let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        if !lo.is_finite() {
            (0.0, 1.0)
        } else if hi - lo < 1e-12 * (1.0 + lo.abs()) {
            (lo - 0.5 * (1.0 + lo.abs()) * 1e-3, hi + 0.5 * (1.0 + hi.abs()) * 1e-3)
        } else {
            let pad = 0.05 * (hi - lo);
            (lo - pad, hi + pad)
        }
    };
    let (x0, x1) = range(&mut finite.iter().map(|p| p.0));
    let (y0, y1) = range(&mut finite.iter().map(|p| p.1).chain(refs.iter().copied()));
    let (ml, mr, mt, mb) = MARGIN;
    let px = |x: f64| ml + (x - x0) / (x1 - x0) * (W - ml - mr);
    let py = |y: f64| H - mb - (y - y0) / (y1 - y0) * (H - mt - mb);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#, W / 2.0, fig.title);
    let _ = writeln!(
        s,
        r#"<rect x="{ml}" y="{mt}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - ml - mr,
        H - mt - mb
    );
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
        let xl = if fig.log_x { 10f64.powf(xv) } else { xv };
        let yl = if fig.log_y { 10f64.powf(yv) } else { yv };
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            px(xv),
            H - mb + 16.0,
            tick(xl)
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
            ml - 6.0,
            py(yv) + 4.0,
            tick(yl)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}{}</text>"#,
        (ml + W - mr) / 2.0,
        H - 12.0,
        fig.xlabel,
        if fig.log_x { " (log)" } else { "" }
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}{}</text>"#,
        (mt + H - mb) / 2.0,
        (mt + H - mb) / 2.0,
        fig.ylabel,
        if fig.log_y { " (log)" } else { "" }
    );
    for ((label, _), y) in fig.references.iter().zip(&refs) {
        let _ = writeln!(
            s,
            r##"<line x1="{ml}" x2="{:.1}" y1="{:.1}" y2="{:.1}" stroke="#888" stroke-dasharray="4 3"/><text x="{:.1}" y="{:.1}" fill="#888">{label}</text>"##,
            W - mr,
            py(*y),
            py(*y),
            W - mr - 30.0,
            py(*y) - 4.0
        );
    }
    for (k, series) in fig.series.iter().enumerate() {
        let colour = COLOURS[k % COLOURS.len()];
        let pts: Vec<(f64, f64)> = series
            .points
            .iter()
            .map(|&(x, y)| (tx(x), ty(y)))
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|(x, y)| (px(x), py(y)))
            .collect();
        if series.line && pts.len() > 1 {
            let path: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.1},{y:.1}")).collect();
            let _ = writeln!(
                s,
                r#"<polyline points="{}" fill="none" stroke="{colour}" stroke-width="1.5"/>"#,
                path.join(" ")
            );
        }
        for (x, y) in &pts {
            let _ = writeln!(s, r#"<circle cx="{x:.1}" cy="{y:.1}" r="3" fill="{colour}"/>"#);
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" fill="{colour}">{}</text>"#,
            ml + 8.0,
            mt + 16.0 + 14.0 * k as f64,
            series.label
        );
    }
    s.push_str("</svg>\n");
    s
}

fn tick(v: f64) -> String {
    let r = format!("{v:.3e}").parse::<f64>().unwrap_or(v);
    let s = format_g17(r);
    if s.len() > 10 {
        format!("{r:.2e}")
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn detects_schemas() {
        let h: Vec<String> = ["h", "c0", "c1"].iter().map(|s| s.to_string()).collect();
        assert_eq!(PlotKind::detect(&h), Some(PlotKind::Calibrate));
        let h: Vec<String> = ["h", "c0"].iter().map(|s| s.to_string()).collect();
        assert_eq!(PlotKind::detect(&h), None);
    }

    #[test]
    fn renders_value_plot() {
        let svg = render_svg(b"h,q0,c0,rho\n0.1,1.6,0.8,2\n0.05,1.58,0.79,2.001\n", None).unwrap();
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains("polyline"));
        assert_eq!(svg, render_svg(b"h,q0,c0,rho\n0.1,1.6,0.8,2\n0.05,1.58,0.79,2.001\n", Some(PlotKind::Value)).unwrap());
    }

    #[test]
    fn rejects_empty_and_unknown() {
        let e = render_svg(b"", None).unwrap_err().to_string();
        assert!(e.contains("h,q0,c0,rho"), "{e}");
        let e = render_svg(b"a,b\n1,2\n", None).unwrap_err().to_string();
        assert!(e.contains("expected"), "{e}");
        let e = render_svg(b"h,c0,c1\n0.1,0.7,-0.8\n", Some(PlotKind::Value)).unwrap_err().to_string();
        assert!(e.contains("h,q0,c0,rho"), "{e}");
    }
}
