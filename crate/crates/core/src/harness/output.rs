//! Result files: CSV, JSON, and plot data with an SVG rendering.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::sweep::BerRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    Csv,
    Json,
    PlotData,
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            "plot-data" => Ok(OutputFormat::PlotData),
            other => Err(Error::Config(vec![format!("unknown output format `{other}`")])),
        }
    }
}

/// A labelled BER curve.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub label: String,
    pub records: Vec<BerRecord>,
}

fn nonempty(records: &[BerRecord]) -> Result<()> {
    if records.is_empty() {
        Err(Error::Parameter("no records to write".into()))
    } else {
        Ok(())
    }
}

pub fn csv_string(records: &[BerRecord]) -> Result<String> {
    nonempty(records)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        w.serialize(r).map_err(|e| Error::Format(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn parse_csv(text: &str) -> Result<Vec<BerRecord>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    r.deserialize().map(|row| row.map_err(|e| Error::Format(e.to_string()))).collect()
}

pub fn write_csv(path: &Path, records: &[BerRecord]) -> Result<()> {
    let text = csv_string(records)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_csv(path: &Path) -> Result<Vec<BerRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

pub fn json_string(records: &[BerRecord]) -> Result<String> {
    nonempty(records)?;
    let mut s = serde_json::to_string_pretty(records).map_err(|e| Error::Format(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn write_json(path: &Path, records: &[BerRecord]) -> Result<()> {
    let text = json_string(records)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// File-name-safe form of a curve label.
pub fn slug(label: &str) -> String {
    let s: String = label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect();
    if s.is_empty() {
        "curve".into()
    } else {
        s
    }
}

/// Writes one `<label>.dat` series per curve (columns `snr_db ber ci95`)
/// and a combined `ber.svg` into `dir`. `reference` is drawn dashed when
/// given.
pub fn write_plot_data(dir: &Path, curves: &[Curve], reference: Option<&[(f64, f64)]>) -> Result<Vec<PathBuf>> {
    if curves.is_empty() || curves.iter().any(|c| c.records.is_empty()) {
        return Err(Error::Parameter("no records to plot".into()));
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    for c in curves {
        let path = dir.join(format!("{}.dat", slug(&c.label)));
        let mut text = format!("# {}\n# snr_db ber ci95\n", c.label);
        for r in &c.records {
            writeln!(text, "{} {} {}", r.snr_db, r.ber, r.ci95).unwrap();
        }
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    if let Some(points) = reference {
        let path = dir.join("siso_awgn.dat");
        let mut text = String::from("# SISO AWGN\n# snr_db ber\n");
        for (s, b) in points {
            writeln!(text, "{s} {b}").unwrap();
        }
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    let path = dir.join("ber.svg");
    fs::write(&path, render_svg(curves, reference)).map_err(|e| Error::io(&path, e))?;
    written.push(path);
    Ok(written)
}

/// Dispatches on `format`; CSV and JSON take exactly one curve and write to
/// `path`, plot data writes into the directory `path`.
pub fn emit_results(curves: &[Curve], format: OutputFormat, path: &Path) -> Result<Vec<PathBuf>> {
    match format {
        OutputFormat::PlotData => write_plot_data(path, curves, None),
        OutputFormat::Csv | OutputFormat::Json => {
            let [curve] = curves else {
                return Err(Error::Parameter(format!("{format:?} output holds one curve, got {}", curves.len())));
            };
            if format == OutputFormat::Csv {
                write_csv(path, &curve.records)?;
            } else {
                write_json(path, &curve.records)?;
            }
            Ok(vec![path.to_path_buf()])
        }
    }
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// BER against SNR on a logarithmic BER axis. Zero-error points are
/// omitted.
pub fn render_svg(curves: &[Curve], reference: Option<&[(f64, f64)]>) -> String {
    let (w, h) = (720.0, 480.0);
    let (left, right, top, bottom) = (80.0, 180.0, 30.0, 60.0);
    let pw = w - left - right;
    let ph = h - top - bottom;

    let mut xs: Vec<f64> = curves.iter().flat_map(|c| c.records.iter().map(|r| r.snr_db)).collect();
    let mut ys: Vec<f64> = curves
        .iter()
        .flat_map(|c| c.records.iter().map(|r| r.ber))
        .filter(|b| *b > 0.0)
        .collect();
    if let Some(points) = reference {
        xs.extend(points.iter().map(|p| p.0));
    }
    let x0 = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let mut x1 = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if ys.is_empty() {
        ys.push(1e-6);
    }
    let ymin = ys.iter().copied().fold(f64::INFINITY, f64::min);
    let ymax = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let d_hi = ymax.log10().ceil().min(0.0) as i32;
    let d_lo = (ymin.log10().floor() as i32).min(d_hi - 1);
    let px = |x: f64| left + (x - x0) / (x1 - x0) * pw;
    let py = |y: f64| top + (d_hi as f64 - y.log10()) / (d_hi - d_lo) as f64 * ph;
    let visible = |y: f64| y > 0.0 && y.log10() >= d_lo as f64;

    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#).unwrap();
    // decade grid and labels
    for d in d_lo..=d_hi {
        let y = py(10f64.powi(d));
        writeln!(
            s,
            r##"<line x1="{left}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ccc"/><text x="{:.2}" y="{:.2}" text-anchor="end">1e{d}</text>"##,
            left + pw,
            left - 6.0,
            y + 4.0
        )
        .unwrap();
    }
    let step = nice_step(x1 - x0);
    let mut tick = (x0 / step).ceil() * step;
    while tick <= x1 + 1e-9 {
        let x = px(tick);
        writeln!(
            s,
            r##"<line x1="{x:.2}" y1="{top}" x2="{x:.2}" y2="{:.2}" stroke="#eee"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"##,
            top + ph,
            top + ph + 18.0,
            trim(tick)
        )
        .unwrap();
        tick += step;
    }
    writeln!(s, r#"<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#).unwrap();
    writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">SNR per receive antenna (dB)</text>"#,
        left + pw / 2.0,
        h - 15.0
    )
    .unwrap();
    writeln!(
        s,
        r#"<text x="20" y="{:.2}" text-anchor="middle" transform="rotate(-90 20 {:.2})">Bit error rate</text>"#,
        top + ph / 2.0,
        top + ph / 2.0
    )
    .unwrap();

    let mut legend: Vec<(String, &str, bool)> = Vec::new();
    for (i, c) in curves.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<(f64, f64)> = c
            .records
            .iter()
            .filter(|r| visible(r.ber))
            .map(|r| (px(r.snr_db), py(r.ber)))
            .collect();
        polyline(&mut s, &pts, color, false);
        for (x, y) in &pts {
            writeln!(s, r#"<circle cx="{x:.2}" cy="{y:.2}" r="3" fill="{color}"/>"#).unwrap();
        }
        legend.push((c.label.clone(), color, false));
    }
    if let Some(points) = reference {
        let pts: Vec<(f64, f64)> = points
            .iter()
            .filter(|p| visible(p.1))
            .map(|p| (px(p.0), py(p.1)))
            .collect();
        polyline(&mut s, &pts, "black", true);
        legend.push(("SISO AWGN".into(), "black", true));
    }
    for (i, (label, color, dashed)) in legend.iter().enumerate() {
        let y = top + 12.0 + 18.0 * i as f64;
        let x = left + pw + 12.0;
        let dash = if *dashed { r#" stroke-dasharray="5,3""# } else { "" };
        writeln!(
            s,
            r#"<line x1="{x:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{color}" stroke-width="2"{dash}/><text x="{:.2}" y="{:.2}">{}</text>"#,
            x + 24.0,
            x + 30.0,
            y + 4.0,
            escape(label)
        )
        .unwrap();
    }
    s.push_str("</svg>\n");
    s
}

fn polyline(s: &mut String, pts: &[(f64, f64)], color: &str, dashed: bool) {
    if pts.is_empty() {
        return;
    }
    let coords: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
    let dash = if dashed { r#" stroke-dasharray="5,3""# } else { "" };
    writeln!(
        s,
        r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>"#,
        coords.join(" ")
    )
    .unwrap();
}

fn nice_step(span: f64) -> f64 {
    let raw = span / 8.0;
    let mag = 10f64.powf(raw.log10().floor());
    [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag)
}

fn trim(v: f64) -> String {
    let s = format!("{v:.2}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(snr: f64, bits: u64, errors: u64) -> BerRecord {
        BerRecord {
            snr_db: snr,
            bits,
            errors,
            ber: errors as f64 / bits as f64,
            ci95: super::super::sweep::binomial_ci95(errors, bits),
            mean_stages: 1.25,
            mean_flips: 3.5,
            wall_ms: 12.0,
        }
    }

    #[test]
    fn csv_header_and_round_trip() {
        let recs = vec![rec(2.0, 1000, 200), rec(4.5, 10_000, 13)];
        let text = csv_string(&recs).unwrap();
        assert_eq!(
            text.lines().next().unwrap(),
            "snr_db,bits,errors,ber,ci95,mean_stages,mean_flips,wall_ms"
        );
        assert_eq!(text.lines().count(), 3);
        assert_eq!(parse_csv(&text).unwrap(), recs);
    }

    #[test]
    fn json_mirrors_fields() {
        let recs = vec![rec(2.0, 1000, 200)];
        let v: serde_json::Value = serde_json::from_str(&json_string(&recs).unwrap()).unwrap();
        let keys: Vec<&str> = v[0].as_object().unwrap().keys().map(|k| k.as_str()).collect();
        for k in ["snr_db", "bits", "errors", "ber", "ci95", "mean_stages", "mean_flips", "wall_ms"] {
            assert!(keys.contains(&k));
        }
    }

    #[test]
    fn empty_refused() {
        assert!(csv_string(&[]).is_err());
        assert!(json_string(&[]).is_err());
    }

    #[test]
    fn svg_is_well_formed_and_escaped() {
        let c = Curve {
            label: "a<b".into(),
            records: vec![rec(0.0, 100, 10), rec(5.0, 1000, 1), rec(10.0, 1000, 0)],
        };
        let svg = render_svg(&[c], Some(&[(0.0, 0.07), (10.0, 1e-5)]));
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("a&lt;b"));
        assert!(svg.contains(">1e-3<") && svg.contains(">1e-1<"));
        assert_eq!(svg.matches("<circle").count(), 2);
    }

    #[test]
    fn slugs() {
        assert_eq!(slug("1-LAS, 8x8"), "1-LAS__8x8");
        assert_eq!(slug(""), "curve");
    }
}
