//! Artifact emission: fixed-format CSV, a flat JSON run manifest, and
//! static SVG plots. All writes go through a temp-file-then-rename so a
//! crashed run never leaves a truncated artifact behind.

use serde_json::{json, Map, Value};
use std::io;
use std::path::Path;

use crate::config::RunConfig;

/// Round-trip-exact decimal form for doubles: 17 significant digits,
/// '.' decimal point, no locale.
pub fn format_real(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes `contents` to `path` atomically (same-directory temp + rename).
pub fn write_atomic(path: &Path, contents: &str) -> io::Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path)
}

/// Writes a CSV with a header row; every cell is already formatted.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> io::Result<()> {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    write_atomic(path, &out)
}

/// A column of (x, value) pairs on the unit-interval grid.
pub fn write_profile_csv(path: &Path, value_name: &str, values: &[f64]) -> io::Result<()> {
    let n = values.len() - 1;
    let rows: Vec<Vec<String>> = values
        .iter()
        .enumerate()
        .map(|(i, &v)| vec![format_real(i as f64 / n as f64), format_real(v)])
        .collect();
    write_csv(path, &["x", value_name], &rows)
}

/// Flat run manifest: config echo, version, and one object per stage.
pub struct Manifest {
    root: Map<String, Value>,
}

/// JSON value for a float; non-finite becomes `null` (JSON has no NaN).
pub fn real(v: f64) -> Value {
    serde_json::Number::from_f64(v).map_or(Value::Null, Value::Number)
}

pub fn reals(vs: &[f64]) -> Value {
    Value::Array(vs.iter().map(|&v| real(v)).collect())
}

impl Manifest {
    pub fn new(config: &RunConfig) -> Self {
        let mut root = Map::new();
        root.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
        root.insert(
            "config".into(),
            json!({
                "family": config.family,
                "epsilon": reals(&config.epsilon),
                "grid_n": config.grid_n,
                "refine_near_ae": config.refine_near_ae,
                "tol_fixed_point": real(config.tol_fixed_point),
                "tol_resolvent": real(config.tol_resolvent),
                "eps_list": reals(&config.eps_list),
                "seed": config.seed,
                "output_dir": config.output_dir.display().to_string(),
            }),
        );
        Manifest { root }
    }

    /// Adds one stage object (certificates, timings, flags).
    pub fn stage(&mut self, name: &str, fields: Value) {
        self.root.insert(name.to_string(), fields);
    }

    pub fn write(&self, dir: &Path) -> io::Result<()> {
        let text = serde_json::to_string_pretty(&Value::Object(self.root.clone()))
            .expect("manifest serialization cannot fail");
        write_atomic(&dir.join("manifest.json"), &(text + "\n"))
    }
}

/// Hand-rolled log-log scatter/line plot of positive (x, y) points.
pub fn write_loglog_svg(
    path: &Path,
    points: &[(f64, f64)],
    title: &str,
    x_label: &str,
    y_label: &str,
) -> io::Result<()> {
    const W: f64 = 640.0;
    const H: f64 = 480.0;
    const ML: f64 = 70.0;
    const MR: f64 = 25.0;
    const MT: f64 = 45.0;
    const MB: f64 = 55.0;

    let usable: Vec<(f64, f64)> = points
        .iter()
        .copied()
        .filter(|&(x, y)| x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite())
        .collect();

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" \
         viewBox=\"0 0 {W} {H}\" font-family=\"sans-serif\" font-size=\"13\">\n"
    ));
    svg.push_str(&format!(
        "<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">{title}</text>\n",
        W / 2.0
    ));
    svg.push_str(&format!(
        "<rect x=\"{ML}\" y=\"{MT}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n",
        W - ML - MR,
        H - MT - MB
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{x_label}</text>\n",
        (ML + W - MR) / 2.0,
        H - 12.0
    ));
    svg.push_str(&format!(
        "<text x=\"18\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 18 {})\">{y_label}</text>\n",
        (MT + H - MB) / 2.0,
        (MT + H - MB) / 2.0
    ));

    if usable.len() < 2 {
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" fill=\"#888\">not enough positive data</text>\n",
            W / 2.0,
            H / 2.0
        ));
        svg.push_str("</svg>\n");
        return write_atomic(path, &svg);
    }

    let (mut x_lo, mut x_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y_lo, mut y_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in &usable {
        x_lo = x_lo.min(x.log10());
        x_hi = x_hi.max(x.log10());
        y_lo = y_lo.min(y.log10());
        y_hi = y_hi.max(y.log10());
    }
    // Pad degenerate ranges so a flat series still renders.
    if x_hi - x_lo < 1e-12 {
        x_lo -= 0.5;
        x_hi += 0.5;
    }
    if y_hi - y_lo < 1e-12 {
        y_lo -= 0.5;
        y_hi += 0.5;
    }
    let to_px = |lx: f64, ly: f64| -> (f64, f64) {
        (
            ML + (lx - x_lo) / (x_hi - x_lo) * (W - ML - MR),
            H - MB - (ly - y_lo) / (y_hi - y_lo) * (H - MT - MB),
        )
    };

    // Decade ticks with power-of-ten labels.
    for d in (x_lo.ceil() as i64)..=(x_hi.floor() as i64) {
        let (px, _) = to_px(d as f64, y_lo);
        svg.push_str(&format!(
            "<line x1=\"{px}\" y1=\"{MT}\" x2=\"{px}\" y2=\"{}\" stroke=\"#ddd\"/>\n\
             <text x=\"{px}\" y=\"{}\" text-anchor=\"middle\">1e{d}</text>\n",
            H - MB,
            H - MB + 20.0
        ));
    }
    for d in (y_lo.ceil() as i64)..=(y_hi.floor() as i64) {
        let (_, py) = to_px(x_lo, d as f64);
        svg.push_str(&format!(
            "<line x1=\"{ML}\" y1=\"{py}\" x2=\"{}\" y2=\"{py}\" stroke=\"#ddd\"/>\n\
             <text x=\"{}\" y=\"{}\" text-anchor=\"end\">1e{d}</text>\n",
            W - MR,
            ML - 6.0,
            py + 4.0
        ));
    }

    let path_points: Vec<String> = usable
        .iter()
        .map(|&(x, y)| {
            let (px, py) = to_px(x.log10(), y.log10());
            format!("{px:.2},{py:.2}")
        })
        .collect();
    svg.push_str(&format!(
        "<polyline points=\"{}\" fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\"/>\n",
        path_points.join(" ")
    ));
    for &(x, y) in &usable {
        let (px, py) = to_px(x.log10(), y.log10());
        svg.push_str(&format!(
            "<circle cx=\"{px:.2}\" cy=\"{py:.2}\" r=\"4\" fill=\"#1f77b4\"/>\n"
        ));
    }
    svg.push_str("</svg>\n");
    write_atomic(path, &svg)
}
