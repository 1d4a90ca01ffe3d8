use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};

/// Engine parameters recorded at the top of every artifact.
pub fn provenance(command: &str, parameters: Value) -> Value {
    json!({
        "tool": "ncprob",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "parameters": parameters,
    })
}

pub fn json_document(provenance: Value, body: impl Serialize) -> Result<String, String> {
    let doc = json!({ "provenance": provenance, "result": body });
    serde_json::to_string_pretty(&doc).map(|s| s + "\n").map_err(|e| e.to_string())
}

/// CSV with the provenance as `#` comment lines.
pub fn csv_document(provenance: &Value, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut out = String::new();
    let compact = serde_json::to_string(provenance).expect("json values serialize");
    let _ = writeln!(out, "# {compact}");
    let _ = writeln!(out, "{}", header.join(","));
    for row in rows {
        let _ = writeln!(out, "{}", row.join(","));
    }
    out
}

/// Shortest round-tripping decimal form.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

pub fn emit(text: &str, path: Option<&Path>) -> Result<(), String> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| format!("{}: {e}", p.display())),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(|e| e.to_string()),
    }
}

/// A single-polyline SVG plot of `(x, y)` samples.
pub fn svg_polyline(points: &[(f64, f64)], title: &str) -> String {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const PAD: f64 = 20.0;
    let (x0, x1) = points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.0), b.max(p.0)));
    let y1 = points.iter().map(|p| p.1).fold(0.0, f64::max).max(1e-300);
    let span = (x1 - x0).max(1e-300);
    let coords: Vec<String> = points
        .iter()
        .map(|&(x, y)| {
            let px = PAD + (x - x0) / span * (W - 2.0 * PAD);
            let py = H - PAD - y.max(0.0) / y1 * (H - 2.0 * PAD);
            format!("{px:.2},{py:.2}")
        })
        .collect();
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n\
         <title>{title}</title>\n\
         <polyline fill=\"none\" stroke=\"black\" stroke-width=\"1\" points=\"{}\"/>\n</svg>\n",
        coords.join(" ")
    )
}
