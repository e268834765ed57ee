//! Curve serialization: CSV rows, a JSON run manifest, and optional SVG
//! plots. Files are written atomically (temp file + rename) once all
//! computation is done.

use anyhow::Context;
use cmwf::DelayErrorCurve;
use serde_json::json;
use std::path::{Path, PathBuf};

pub fn write_atomic(path: &Path, contents: &[u8]) -> anyhow::Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, contents).with_context(|| format!("writing {}", tmp.display()))?;
    std::fs::rename(&tmp, path).with_context(|| format!("renaming to {}", path.display()))?;
    Ok(())
}

/// CSV schema: `alpha_ms,mse_linear,mse_db,method,scene_digest`, rows sorted
/// by alpha (curves are constructed sorted).
pub fn curve_csv(curve: &DelayErrorCurve) -> String {
    let mut out = String::from("alpha_ms,mse_linear,mse_db,method,scene_digest\n");
    for p in curve.points() {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            p.alpha_s * 1e3,
            p.mse_linear,
            p.mse_db,
            curve.method(),
            curve.scene_digest()
        ));
    }
    out
}

pub struct RunArtifacts {
    pub files: Vec<PathBuf>,
}

pub fn write_curves(
    out_dir: &Path,
    prefix: &str,
    curves: &[DelayErrorCurve],
    config_echo: serde_json::Value,
    alpha_samples: &[i64],
    padding_samples: usize,
    timings_ms: serde_json::Value,
    svg: bool,
) -> anyhow::Result<RunArtifacts> {
    let mut files = Vec::new();
    for curve in curves {
        let path = out_dir.join(format!("{prefix}-{}.csv", curve.method()));
        write_atomic(&path, curve_csv(curve).as_bytes())?;
        files.push(path);
    }
    if svg && !curves.is_empty() {
        let path = out_dir.join(format!("{prefix}.svg"));
        write_atomic(&path, svg_plot(curves).as_bytes())?;
        files.push(path);
    }
    let manifest = json!({
        "library_version": env!("CARGO_PKG_VERSION"),
        "config": config_echo,
        "alpha_samples": alpha_samples,
        "padding_samples": padding_samples,
        "timings_ms": timings_ms,
        "curves": curves.iter().map(|c| json!({
            "method": c.method().as_str(),
            "target_power": c.target_power(),
            "scene_digest": c.scene_digest(),
        })).collect::<Vec<_>>(),
        "outputs": files.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
    });
    let path = out_dir.join(format!("{prefix}-manifest.json"));
    write_atomic(&path, serde_json::to_string_pretty(&manifest)?.as_bytes())?;
    files.push(path);
    Ok(RunArtifacts { files })
}

/// Minimal static line chart: delay in ms against relative MSE in dB.
pub fn svg_plot(curves: &[DelayErrorCurve]) -> String {
    let (w, h) = (640.0, 420.0);
    let (ml, mr, mt, mb) = (60.0, 20.0, 20.0, 45.0);
    let mut x_min = f64::INFINITY;
    let mut x_max = f64::NEG_INFINITY;
    let mut y_min = f64::INFINITY;
    let mut y_max = f64::NEG_INFINITY;
    for c in curves {
        for p in c.points() {
            x_min = x_min.min(p.alpha_s * 1e3);
            x_max = x_max.max(p.alpha_s * 1e3);
            y_min = y_min.min(p.mse_db);
            y_max = y_max.max(p.mse_db);
        }
    }
    if x_max <= x_min || x_max.is_nan() {
        x_max = x_min + 1.0;
    }
    if y_max <= y_min || y_max.is_nan() {
        y_max = y_min + 1.0;
    }
    let pad = 0.05 * (y_max - y_min);
    y_min -= pad;
    y_max += pad;
    let sx = |x: f64| ml + (x - x_min) / (x_max - x_min) * (w - ml - mr);
    let sy = |y: f64| mt + (y_max - y) / (y_max - y_min) * (h - mt - mb);
    let colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" \
         viewBox=\"0 0 {w} {h}\">\n<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n"
    );
    // Axes
    svg.push_str(&format!(
        "<line x1=\"{ml}\" y1=\"{0}\" x2=\"{1}\" y2=\"{0}\" stroke=\"black\"/>\n\
         <line x1=\"{ml}\" y1=\"{mt}\" x2=\"{ml}\" y2=\"{0}\" stroke=\"black\"/>\n",
        h - mb,
        w - mr
    ));
    for i in 0..=5 {
        let x = x_min + (x_max - x_min) * i as f64 / 5.0;
        let y = y_min + (y_max - y_min) * i as f64 / 5.0;
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\" text-anchor=\"middle\">{:.2}</text>\n",
            sx(x),
            h - mb + 16.0,
            x
        ));
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\" text-anchor=\"end\">{:.1}</text>\n",
            ml - 6.0,
            sy(y) + 4.0,
            y
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"12\" text-anchor=\"middle\">delay (ms)</text>\n",
        (ml + w - mr) / 2.0,
        h - 8.0
    ));
    svg.push_str(&format!(
        "<text x=\"14\" y=\"{:.1}\" font-size=\"12\" text-anchor=\"middle\" \
         transform=\"rotate(-90 14 {:.1})\">relative MSE (dB)</text>\n",
        (mt + h - mb) / 2.0,
        (mt + h - mb) / 2.0
    ));
    for (i, c) in curves.iter().enumerate() {
        let color = colors[i % colors.len()];
        let pts: Vec<String> = c
            .points()
            .iter()
            .map(|p| format!("{:.2},{:.2}", sx(p.alpha_s * 1e3), sy(p.mse_db)))
            .collect();
        svg.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n",
            pts.join(" ")
        ));
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\" fill=\"{color}\">{}</text>\n",
            w - mr - 150.0,
            mt + 16.0 * (i + 1) as f64,
            c.method()
        ));
    }
    svg.push_str("</svg>\n");
    svg
}
