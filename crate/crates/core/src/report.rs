//! CSV and SVG report writers.
//!
//! Every CSV starts with `# key=value` lines echoing the effective
//! configuration, then a single header row.

use std::fmt::Write as _;
use std::io::Write;

use crate::error::{Error, Result};
use crate::metrics::MetricsReport;

/// Formats a metric value; infinite PSNR is written as `inf`.
pub fn fmt_value(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else if v.is_nan() {
        "nan".into()
    } else {
        format!("{v:.6}")
    }
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_value).unwrap_or_default()
}

fn io_err(e: impl std::fmt::Display) -> Error {
    Error::Config(format!("report write failed: {e}"))
}

pub fn write_config_echo<W: Write>(w: &mut W, config: &[(String, String)]) -> Result<()> {
    for (k, v) in config {
        writeln!(w, "# {k}={v}").map_err(io_err)?;
    }
    Ok(())
}

/// `frame,psnr,ms_ssim,roi_psnr,roi_ms_ssim,bpp` rows plus a trailing `mean` row.
pub fn write_metrics_csv<W: Write>(mut w: W, report: &MetricsReport, config: &[(String, String)]) -> Result<W> {
    write_config_echo(&mut w, config)?;
    let mut csv = csv::Writer::from_writer(w);
    let bpp = fmt_opt(report.bpp);
    csv.write_record(["frame", "psnr", "ms_ssim", "roi_psnr", "roi_ms_ssim", "bpp"])
        .map_err(io_err)?;
    for f in &report.frames {
        csv.write_record([
            f.frame.to_string(),
            fmt_value(f.psnr),
            fmt_value(f.ms_ssim),
            fmt_opt(f.roi_psnr),
            fmt_opt(f.roi_ms_ssim),
            bpp.clone(),
        ])
        .map_err(io_err)?;
    }
    csv.write_record([
        "mean".to_string(),
        fmt_opt(report.mean_psnr()),
        fmt_opt(report.mean_ms_ssim()),
        fmt_opt(report.mean_roi_psnr()),
        fmt_opt(report.mean_roi_ms_ssim()),
        bpp,
    ])
    .map_err(io_err)?;
    csv.into_inner().map_err(io_err)
}

/// `x,profile_a,profile_b`; `profile_b` is empty when absent.
pub fn write_column_csv<W: Write>(
    mut w: W,
    profile_a: &[f64],
    profile_b: Option<&[f64]>,
    config: &[(String, String)],
) -> Result<W> {
    write_config_echo(&mut w, config)?;
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(["x", "profile_a", "profile_b"]).map_err(io_err)?;
    for (x, a) in profile_a.iter().enumerate() {
        let b = profile_b.and_then(|p| p.get(x).copied());
        csv.write_record([x.to_string(), fmt_value(*a), fmt_opt(b)])
            .map_err(io_err)?;
    }
    csv.into_inner().map_err(io_err)
}

/// Line plot of one or two column profiles.
pub fn column_profile_svg(series: &[(&str, &[f64])], title: &str) -> String {
    const W: f64 = 960.0;
    const H: f64 = 360.0;
    const LEFT: f64 = 60.0;
    const RIGHT: f64 = 20.0;
    const TOP: f64 = 30.0;
    const BOTTOM: f64 = 40.0;
    const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

    let n = series.iter().map(|(_, s)| s.len()).max().unwrap_or(0).max(2);
    let finite = series.iter().flat_map(|(_, s)| s.iter()).filter(|v| v.is_finite());
    let lo = finite.clone().fold(f64::INFINITY, |a, &b| a.min(b)).min(1.0);
    let lo = if lo.is_finite() { (lo * 20.0).floor() / 20.0 } else { 0.0 };
    let hi = 1.0;
    let span = if hi - lo > 0.0 { hi - lo } else { 1.0 };
    let px = |i: usize| LEFT + (W - LEFT - RIGHT) * i as f64 / (n - 1) as f64;
    let py = |v: f64| TOP + (H - TOP - BOTTOM) * (hi - v.clamp(lo, hi)) / span;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="18" font-family="sans-serif" font-size="14" text-anchor="middle">{}</text>"#,
        W / 2.0,
        escape(title)
    );
    let (x0, x1, y0, y1) = (LEFT, W - RIGHT, TOP, H - BOTTOM);
    let _ = writeln!(
        s,
        r#"<path d="M{x0:.1} {y0:.1} L{x0:.1} {y1:.1} L{x1:.1} {y1:.1}" stroke="black" fill="none"/>"#
    );
    for k in 0..=4 {
        let v = lo + span * k as f64 / 4.0;
        let y = py(v);
        let _ = writeln!(
            s,
            r##"<line x1="{x0:.1}" y1="{y:.1}" x2="{x1:.1}" y2="{y:.1}" stroke="#dddddd"/><text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="11" text-anchor="end">{v:.3}</text>"##,
            x0 - 4.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="12" text-anchor="middle">pixel column</text>"#,
        (x0 + x1) / 2.0,
        H - 8.0
    );
    for (k, (name, values)) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let mut d = String::new();
        for (i, v) in values.iter().enumerate() {
            let _ = write!(d, "{}{:.2} {:.2}", if i == 0 { "M" } else { " L" }, px(i), py(*v));
        }
        let _ = writeln!(s, r#"<path d="{d}" stroke="{color}" stroke-width="1" fill="none"/>"#);
        let ly = TOP + 14.0 * (k as f64 + 1.0);
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{ly:.1}" font-family="sans-serif" font-size="12" fill="{color}" text-anchor="end">{}</text>"#,
            x1 - 4.0,
            escape(name)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
