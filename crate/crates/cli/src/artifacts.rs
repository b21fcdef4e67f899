//! Deterministic artifact emission: CSV, JSON, and SVG writers that stamp
//! every file with the config hash and seed that produced it.
//!
//! Numeric formats are pinned for reproducibility:
//!
//! - CSV cells print floats with the shortest decimal that round-trips
//!   (Rust's default `Display`), so identical runs are byte-identical and
//!   re-parsing recovers the exact bit pattern.
//! - JSON floats print with 17 significant digits (`{:.16e}`) and objects
//!   keep insertion order, so the JSON is byte-stable too. Non-finite floats
//!   become `null` (JSON has no NaN).
//! - SVG coordinates round to 0.01 px, which is far below visual resolution
//!   and keeps plots byte-stable across runs.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{Map, Value};

/// Provenance stamped into every artifact.
pub struct ArtifactMeta {
    pub config_sha256: String,
    pub seed: u64,
    pub command: &'static str,
}

/// An output directory plus the naming prefix and the list of files written,
/// reported to stdout at the end of a run.
pub struct ArtifactDir {
    dir: PathBuf,
    prefix: Option<String>,
    written: Vec<String>,
}

impl ArtifactDir {
    pub fn create(dir: &Path, prefix: Option<String>) -> Result<Self, crate::Failure> {
        fs::create_dir_all(dir).map_err(|e| {
            crate::Failure::Config(format!(
                "cannot create output directory {}: {e}",
                dir.display()
            ))
        })?;
        Ok(Self {
            dir: dir.to_path_buf(),
            prefix,
            written: Vec::new(),
        })
    }

    fn path(&self, name: &str) -> PathBuf {
        match &self.prefix {
            Some(prefix) => self.dir.join(format!("{prefix}-{name}")),
            None => self.dir.join(name),
        }
    }

    /// Writes a CSV file: three provenance comment lines, a header row, then
    /// the data rows.
    pub fn write_csv(
        &mut self,
        name: &str,
        meta: &ArtifactMeta,
        header: &[&str],
        rows: &[Vec<String>],
    ) -> Result<(), crate::Failure> {
        let mut out = String::new();
        let _ = writeln!(out, "# command = {}", meta.command);
        let _ = writeln!(out, "# config_sha256 = {}", meta.config_sha256);
        let _ = writeln!(out, "# seed = {}", meta.seed);
        let _ = writeln!(out, "{}", header.join(","));
        for row in rows {
            let _ = writeln!(out, "{}", row.join(","));
        }
        self.put(name, out)
    }

    /// Writes a JSON object with the provenance fields first, then the body's
    /// fields in their insertion order.
    pub fn write_json(
        &mut self,
        name: &str,
        meta: &ArtifactMeta,
        body: Value,
    ) -> Result<(), crate::Failure> {
        let mut root = Map::new();
        root.insert("command".to_owned(), Value::from(meta.command));
        root.insert(
            "config_sha256".to_owned(),
            Value::from(meta.config_sha256.as_str()),
        );
        root.insert("seed".to_owned(), Value::from(meta.seed));
        match body {
            Value::Object(fields) => {
                for (key, value) in fields {
                    root.insert(key, value);
                }
            }
            other => {
                root.insert("value".to_owned(), other);
            }
        }
        let mut text = String::new();
        format_value(&Value::Object(root), 0, &mut text);
        text.push('\n');
        self.put(name, text)
    }

    /// Writes a rendered SVG plot.
    pub fn write_svg(
        &mut self,
        name: &str,
        meta: &ArtifactMeta,
        plot: &PlotSpec,
    ) -> Result<(), crate::Failure> {
        self.put(name, render_svg(meta, plot))
    }

    fn put(&mut self, name: &str, contents: String) -> Result<(), crate::Failure> {
        let path = self.path(name);
        fs::write(&path, contents).map_err(|e| {
            crate::Failure::Config(format!("cannot write {}: {e}", path.display()))
        })?;
        self.written.push(path.display().to_string());
        Ok(())
    }

    pub fn written(&self) -> &[String] {
        &self.written
    }
}

/// Shortest round-trip decimal for a CSV cell.
pub fn csv_f64(x: f64) -> String {
    format!("{x}")
}

/// A float as a JSON value; non-finite becomes `null`.
pub fn json_f64(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
}

/// A float slice as a JSON array (non-finite entries become `null`).
pub fn json_f64_array(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|&x| json_f64(x)).collect())
}

/// Fixed-format serializer: 2-space indentation, insertion field order,
/// integers as integers, floats with 17 significant digits.
fn format_value(value: &Value, indent: usize, out: &mut String) {
    match value {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => {
            let _ = write!(out, "{b}");
        }
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                let _ = write!(out, "{i}");
            } else if let Some(u) = n.as_u64() {
                let _ = write!(out, "{u}");
            } else {
                // as_f64 cannot fail on a Number that is neither i64 nor u64.
                let _ = write!(out, "{:.16e}", n.as_f64().unwrap_or(f64::NAN));
            }
        }
        Value::String(s) => {
            let escaped =
                serde_json::to_string(s).expect("serializing a string cannot fail");
            out.push_str(&escaped);
        }
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push('\n');
                push_indent(out, indent + 1);
                format_value(item, indent + 1, out);
            }
            out.push('\n');
            push_indent(out, indent);
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            out.push('{');
            for (i, (key, item)) in map.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push('\n');
                push_indent(out, indent + 1);
                let escaped =
                    serde_json::to_string(key).expect("serializing a string cannot fail");
                out.push_str(&escaped);
                out.push_str(": ");
                format_value(item, indent + 1, out);
            }
            out.push('\n');
            push_indent(out, indent);
            out.push('}');
        }
    }
}

fn push_indent(out: &mut String, indent: usize) {
    for _ in 0..indent {
        out.push_str("  ");
    }
}

// ---------------------------------------------------------------------------
// SVG plotting
// ---------------------------------------------------------------------------

/// One plotted series: scatter points, optionally joined by a polyline.
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub line: bool,
}

/// A self-contained scatter/line plot. On log axes, non-positive values are
/// dropped; non-finite values are always dropped.
pub struct PlotSpec {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub log_y: bool,
    /// Natural-log slope/intercept of a fitted power law `y = e^b · x^a`,
    /// drawn as a line when both axes are logarithmic.
    pub fit: Option<(f64, f64)>,
    pub series: Vec<Series>,
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 440.0;
const MARGIN_LEFT: f64 = 72.0;
const MARGIN_RIGHT: f64 = 24.0;
const MARGIN_TOP: f64 = 42.0;
const MARGIN_BOTTOM: f64 = 52.0;
const PALETTE: [&str; 4] = ["#39618f", "#b3552e", "#3e7d4f", "#7d4f8f"];

fn render_svg(meta: &ArtifactMeta, plot: &PlotSpec) -> String {
    // Transform every series into axis space (log10 where requested).
    let transform = |value: f64, log: bool| -> Option<f64> {
        if !value.is_finite() {
            return None;
        }
        if log {
            (value > 0.0).then(|| value.log10())
        } else {
            Some(value)
        }
    };
    let series: Vec<(usize, Vec<(f64, f64)>)> = plot
        .series
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let pts = s
                .points
                .iter()
                .filter_map(|&(x, y)| {
                    Some((transform(x, plot.log_x)?, transform(y, plot.log_y)?))
                })
                .collect();
            (i, pts)
        })
        .collect();

    let mut x_lo = f64::INFINITY;
    let mut x_hi = f64::NEG_INFINITY;
    let mut y_lo = f64::INFINITY;
    let mut y_hi = f64::NEG_INFINITY;
    for (_, pts) in &series {
        for &(x, y) in pts {
            x_lo = x_lo.min(x);
            x_hi = x_hi.max(x);
            y_lo = y_lo.min(y);
            y_hi = y_hi.max(y);
        }
    }
    if !x_lo.is_finite() {
        // Nothing plottable; emit an empty frame rather than failing the run.
        x_lo = 0.0;
        x_hi = 1.0;
        y_lo = 0.0;
        y_hi = 1.0;
    }
    if x_hi - x_lo < 1e-12 {
        x_lo -= 0.5;
        x_hi += 0.5;
    }
    if y_hi - y_lo < 1e-12 {
        y_lo -= 0.5;
        y_hi += 0.5;
    }
    let x_pad = 0.06 * (x_hi - x_lo);
    let y_pad = 0.08 * (y_hi - y_lo);
    x_lo -= x_pad;
    x_hi += x_pad;
    y_lo -= y_pad;
    y_hi += y_pad;

    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let to_px = |x: f64, y: f64| -> (f64, f64) {
        (
            MARGIN_LEFT + (x - x_lo) / (x_hi - x_lo) * plot_w,
            MARGIN_TOP + (y_hi - y) / (y_hi - y_lo) * plot_h,
        )
    };

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\">"
    );
    let _ = writeln!(
        svg,
        "<desc>command = {}; config_sha256 = {}; seed = {}</desc>",
        meta.command, meta.config_sha256, meta.seed
    );
    let _ = writeln!(
        svg,
        "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"#ffffff\"/>"
    );
    let _ = writeln!(
        svg,
        "<text x=\"{:.2}\" y=\"24\" text-anchor=\"middle\" font-family=\"monospace\" \
         font-size=\"14\" fill=\"#222222\">{}</text>",
        WIDTH / 2.0,
        escape_text(&plot.title)
    );

    // Gridlines and tick labels.
    for (tick, label) in axis_ticks(x_lo, x_hi, plot.log_x) {
        let (px, _) = to_px(tick, 0.0);
        let _ = writeln!(
            svg,
            "<line x1=\"{px:.2}\" y1=\"{MARGIN_TOP}\" x2=\"{px:.2}\" y2=\"{:.2}\" \
             stroke=\"#dddddd\" stroke-width=\"1\"/>",
            MARGIN_TOP + plot_h
        );
        let _ = writeln!(
            svg,
            "<text x=\"{px:.2}\" y=\"{:.2}\" text-anchor=\"middle\" font-family=\"monospace\" \
             font-size=\"11\" fill=\"#444444\">{label}</text>",
            MARGIN_TOP + plot_h + 18.0
        );
    }
    for (tick, label) in axis_ticks(y_lo, y_hi, plot.log_y) {
        let (_, py) = to_px(x_lo, tick);
        let _ = writeln!(
            svg,
            "<line x1=\"{MARGIN_LEFT}\" y1=\"{py:.2}\" x2=\"{:.2}\" y2=\"{py:.2}\" \
             stroke=\"#dddddd\" stroke-width=\"1\"/>",
            MARGIN_LEFT + plot_w
        );
        let _ = writeln!(
            svg,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\" font-family=\"monospace\" \
             font-size=\"11\" fill=\"#444444\">{label}</text>",
            MARGIN_LEFT - 8.0,
            py + 4.0
        );
    }

    // Axes frame.
    let _ = writeln!(
        svg,
        "<rect x=\"{MARGIN_LEFT}\" y=\"{MARGIN_TOP}\" width=\"{plot_w:.2}\" \
         height=\"{plot_h:.2}\" fill=\"none\" stroke=\"#333333\" stroke-width=\"1\"/>"
    );
    let _ = writeln!(
        svg,
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\" font-family=\"monospace\" \
         font-size=\"12\" fill=\"#222222\">{}</text>",
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 12.0,
        escape_text(&plot.x_label)
    );
    let _ = writeln!(
        svg,
        "<text x=\"18\" y=\"{:.2}\" text-anchor=\"middle\" font-family=\"monospace\" \
         font-size=\"12\" fill=\"#222222\" transform=\"rotate(-90 18 {:.2})\">{}</text>",
        MARGIN_TOP + plot_h / 2.0,
        MARGIN_TOP + plot_h / 2.0,
        escape_text(&plot.y_label)
    );

    // Fitted power law (log-log only): ln y = a·ln x + b becomes the straight
    // line log10 y = a·log10 x + b/ln 10 in axis space.
    if let (Some((slope, intercept)), true, true) = (plot.fit, plot.log_x, plot.log_y) {
        if slope.is_finite() && intercept.is_finite() {
            let y_at = |x: f64| slope * x + intercept / std::f64::consts::LN_10;
            let (x1, y1) = to_px(x_lo, y_at(x_lo));
            let (x2, y2) = to_px(x_hi, y_at(x_hi));
            let _ = writeln!(
                svg,
                "<line x1=\"{x1:.2}\" y1=\"{y1:.2}\" x2=\"{x2:.2}\" y2=\"{y2:.2}\" \
                 stroke=\"#888888\" stroke-width=\"1.5\" stroke-dasharray=\"6 4\"/>"
            );
            let _ = writeln!(
                svg,
                "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\" font-family=\"monospace\" \
                 font-size=\"12\" fill=\"#555555\">slope = {slope:.4}</text>",
                MARGIN_LEFT + plot_w - 10.0,
                MARGIN_TOP + 18.0
            );
        }
    }

    // Series: polylines first, then markers on top.
    for (index, pts) in &series {
        let color = PALETTE[index % PALETTE.len()];
        if plot.series[*index].line && pts.len() > 1 {
            let mut path = String::new();
            for (i, &(x, y)) in pts.iter().enumerate() {
                let (px, py) = to_px(x, y);
                let _ = write!(path, "{}{px:.2},{py:.2}", if i == 0 { "" } else { " " });
            }
            let _ = writeln!(
                svg,
                "<polyline points=\"{path}\" fill=\"none\" stroke=\"{color}\" \
                 stroke-width=\"1.5\"/>"
            );
        }
        for &(x, y) in pts {
            let (px, py) = to_px(x, y);
            let _ = writeln!(
                svg,
                "<circle cx=\"{px:.2}\" cy=\"{py:.2}\" r=\"3\" fill=\"{color}\" \
                 fill-opacity=\"0.75\"/>"
            );
        }
    }

    // Legend (only when there is more than one series to tell apart).
    if series.len() > 1 {
        for (row, (index, _)) in series.iter().enumerate() {
            let color = PALETTE[index % PALETTE.len()];
            let y = MARGIN_TOP + 18.0 + 16.0 * (row as f64 + 1.0);
            let _ = writeln!(
                svg,
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"4\" fill=\"{color}\"/>",
                MARGIN_LEFT + 14.0,
                y - 4.0
            );
            let _ = writeln!(
                svg,
                "<text x=\"{:.2}\" y=\"{y:.2}\" font-family=\"monospace\" font-size=\"11\" \
                 fill=\"#333333\">{}</text>",
                MARGIN_LEFT + 24.0,
                escape_text(&plot.series[*index].label)
            );
        }
    }

    svg.push_str("</svg>\n");
    svg
}

/// Tick positions and labels for one axis, in transformed coordinates.
/// Log axes tick at integer decades; linear axes use a 1/2/5 ladder.
fn axis_ticks(lo: f64, hi: f64, log: bool) -> Vec<(f64, String)> {
    let mut ticks = Vec::new();
    if log {
        let first = lo.ceil() as i64;
        let last = hi.floor() as i64;
        let count = (last - first).max(0) + 1;
        let step = ((count as f64) / 6.0).ceil().max(1.0) as i64;
        let mut k = first;
        while k <= last {
            ticks.push((k as f64, format!("1e{k}")));
            k += step;
        }
    } else {
        let raw = (hi - lo) / 5.0;
        if raw <= 0.0 || !raw.is_finite() {
            return ticks;
        }
        let magnitude = 10f64.powf(raw.log10().floor());
        let normalized = raw / magnitude;
        let step = if normalized <= 1.0 {
            1.0
        } else if normalized <= 2.0 {
            2.0
        } else if normalized <= 5.0 {
            5.0
        } else {
            10.0
        } * magnitude;
        let mut v = (lo / step).ceil() * step;
        while v <= hi + 1e-9 * step {
            ticks.push((v, linear_tick_label(v, step)));
            v += step;
        }
    }
    ticks
}

fn linear_tick_label(v: f64, step: f64) -> String {
    if v.abs() < 1e-12 * step {
        return "0".to_owned();
    }
    if v.abs() >= 1e4 || v.abs() < 1e-3 {
        return format!("{v:.0e}");
    }
    let mut text = format!("{v:.4}");
    while text.contains('.') && (text.ends_with('0') || text.ends_with('.')) {
        text.pop();
    }
    text
}

fn escape_text(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
