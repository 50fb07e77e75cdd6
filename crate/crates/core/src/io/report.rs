//! Per-cell CSV report, measured-gap CSV input, and SVG histogram figures.

use std::fmt::Write as _;

use crate::analysis::{DiscontinuityReport, IGFit, TriggerTimeHistogram};

pub const REPORT_HEADER: &str =
    "mu_bin,l_bin,n_samples,gap_start,gap_length,product,ig_mean,ig_shape,ig_mean_gap,ig_shape_gap";

fn fit_fields(fit: Option<&IGFit>) -> (String, String) {
    match fit {
        Some(f) => (f.mean.to_string(), f.shape.to_string()),
        None => ("nan".into(), "nan".into()),
    }
}

pub fn report_csv(report: &DiscontinuityReport) -> String {
    let mut out = String::from(REPORT_HEADER);
    out.push('\n');
    for c in &report.cells {
        let (m, s) = fit_fields(c.ig_raw.as_ref());
        let (mg, sg) = fit_fields(c.ig_gap.as_ref());
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            c.mu_bin, c.l_bin, c.n_samples, c.gap_start, c.gap_length, c.product, m, s, mg, sg
        );
    }
    out
}

/// Reads `(mu, gap)` rows. Accepts either a two-column `mu,gap` file (with
/// or without header) or a report produced by [`report_csv`].
pub fn parse_gap_rows(text: &str) -> Result<Vec<(f64, f64)>, String> {
    let mut rows = Vec::new();
    let mut cols = (0usize, 1usize);
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.trim();
        if content.is_empty() || content.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = content.split(',').map(str::trim).collect();
        if rows.is_empty() && fields.iter().any(|f| f.parse::<f64>().is_err()) {
            let find = |names: &[&str]| fields.iter().position(|f| names.contains(f));
            match (find(&["mu", "mu_bin"]), find(&["gap", "gap_length"])) {
                (Some(m), Some(g)) => {
                    cols = (m, g);
                    continue;
                }
                _ => return Err(format!("line {line}: header needs 'mu' and 'gap' columns")),
            }
        }
        let get = |i: usize| -> Result<f64, String> {
            let f = fields
                .get(i)
                .ok_or_else(|| format!("line {line}: missing column {}", i + 1))?;
            f.parse()
                .map_err(|_| format!("line {line}: cannot parse '{f}' as a number"))
        };
        rows.push((get(cols.0)?, get(cols.1)?));
    }
    if rows.is_empty() {
        return Err("no (mu, gap) rows".into());
    }
    Ok(rows)
}

/// Histogram bars plus the fitted density scaled to counts.
pub fn histogram_svg(hist: &TriggerTimeHistogram, fit: Option<&IGFit>, gap_length: f64) -> String {
    const W: f64 = 480.0;
    const H: f64 = 320.0;
    const MARGIN: f64 = 40.0;
    let plot_w = W - 2.0 * MARGIN;
    let plot_h = H - 2.0 * MARGIN;
    let n = hist.counts.len().max(1);
    let x_max = hist.origin + n as f64 * hist.bin_width;
    let y_max = hist.peak().max(1) as f64 * 1.1;
    let sx = |x: f64| MARGIN + (x - hist.origin) / (x_max - hist.origin) * plot_w;
    let sy = |y: f64| H - MARGIN - (y / y_max).min(1.0) * plot_h;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let title = match (hist.mu_bin, hist.l_bin) {
        (Some(mu), Some(l)) => format!("mu={mu}, L={l}"),
        _ => "event triggering time".to_string(),
    };
    let _ = writeln!(
        s,
        r#"<text x="{}" y="20" text-anchor="middle" font-family="sans-serif" font-size="14">{title}</text>"#,
        W / 2.0
    );
    if gap_length > 0.0 {
        let _ = writeln!(
            s,
            r##"<rect x="{:.2}" y="{MARGIN}" width="{:.2}" height="{plot_h}" fill="#eeeeee"/>"##,
            sx(hist.origin),
            sx(hist.origin + gap_length) - sx(hist.origin)
        );
    }
    let mut path = String::new();
    for (i, &c) in hist.counts.iter().enumerate() {
        let x0 = sx(hist.origin + i as f64 * hist.bin_width);
        let x1 = sx(hist.origin + (i + 1) as f64 * hist.bin_width);
        let y = sy(c as f64);
        let _ = write!(
            path,
            "{}{x0:.2},{y:.2} L{x1:.2},{y:.2} ",
            if i == 0 { "M" } else { "L" }
        );
    }
    let _ = writeln!(
        s,
        r#"<path d="{}" fill="none" stroke="blue" stroke-width="1"/>"#,
        path.trim_end()
    );

    if let Some(f) = fit.filter(|f| !f.is_degenerate()) {
        let scale = hist.total() as f64 * hist.bin_width;
        let steps = 200;
        let mut curve = String::new();
        for k in 0..=steps {
            let x = hist.origin + (x_max - hist.origin) * k as f64 / steps as f64;
            let y = f.pdf(x) * scale;
            let _ = write!(
                curve,
                "{}{:.2},{:.2} ",
                if k == 0 { "M" } else { "L" },
                sx(x),
                sy(y)
            );
        }
        let _ = writeln!(
            s,
            r#"<path d="{}" fill="none" stroke="red" stroke-width="1.5" stroke-dasharray="5,3"/>"#,
            curve.trim_end()
        );
    }
    let _ = writeln!(
        s,
        r#"<line x1="{MARGIN}" y1="{0}" x2="{1}" y2="{0}" stroke="black"/>"#,
        H - MARGIN,
        W - MARGIN
    );
    let _ = writeln!(
        s,
        r#"<line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" y2="{}" stroke="black"/>"#,
        H - MARGIN
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="11">dt (s), 0 .. {x_max:.4}</text>"#,
        W / 2.0,
        H - 10.0
    );
    s.push_str("</svg>\n");
    s
}
