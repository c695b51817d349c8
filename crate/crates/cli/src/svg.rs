//! Minimal static line charts from CSV columns.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use anyhow::{anyhow, bail, Context};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 56.0;
const COLORS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf",
];

/// Reads `x` and `y` (and optionally a grouping column) from a CSV file and
/// draws one polyline per group. Rows with empty or non-numeric values are
/// skipped.
pub fn plot_csv(csv_path: &Path, x: &str, y: &str, group: Option<&str>, log_x: bool) -> anyhow::Result<String> {
    let mut rdr = csv::Reader::from_path(csv_path).with_context(|| format!("opening {}", csv_path.display()))?;
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| anyhow!("column `{name}` not in {}", csv_path.display()))
    };
    let (xi, yi) = (col(x)?, col(y)?);
    let gi = group.map(col).transpose()?;
    let mut series: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let parse = |i: usize| rec.get(i).and_then(|s| s.parse::<f64>().ok()).filter(|v| v.is_finite());
        let (Some(xv), Some(yv)) = (parse(xi), parse(yi)) else {
            continue;
        };
        if log_x && xv <= 0.0 {
            continue;
        }
        let key = gi.and_then(|i| rec.get(i)).unwrap_or("").to_string();
        series.entry(key).or_default().push((if log_x { xv.log10() } else { xv }, yv));
    }
    if series.is_empty() {
        bail!("no plottable rows in {}", csv_path.display());
    }
    Ok(render(&series, x, y, log_x))
}

fn render(series: &BTreeMap<String, Vec<(f64, f64)>>, x: &str, y: &str, log_x: bool) -> String {
    let pts = series.values().flatten();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(a, b) in pts {
        x0 = x0.min(a);
        x1 = x1.max(a);
        y0 = y0.min(b);
        y1 = y1.max(b);
    }
    if x1 == x0 {
        x1 = x0 + 1.0;
    }
    if y1 == y0 {
        y1 = y0 + 1.0;
    }
    let sx = |v: f64| MARGIN + (v - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let sy = |v: f64| HEIGHT - MARGIN - (v - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);
    let xlabel = |v: f64| if log_x { 10f64.powf(v) } else { v };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let (l, r, t, b) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(
        s,
        r#"<path d="M{l} {t} L{l} {b} L{r} {b}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(s, r#"<text x="{l}" y="{}" >{:.4}</text>"#, b + 16.0, xlabel(x0));
    let _ = writeln!(s, r#"<text x="{r}" y="{}" text-anchor="end">{:.4}</text>"#, b + 16.0, xlabel(x1));
    let _ = writeln!(s, r#"<text x="{}" y="{b}" text-anchor="end">{y0:.4}</text>"#, l - 4.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{y1:.4}</text>"#, l - 4.0, t + 4.0);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{x}{}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 12.0,
        if log_x { " (log)" } else { "" }
    );
    let _ = writeln!(s, r#"<text x="14" y="{}" transform="rotate(-90 14 {})" text-anchor="middle">{y}</text>"#, HEIGHT / 2.0, HEIGHT / 2.0);
    for (k, (name, pts)) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let path: Vec<String> = pts.iter().map(|&(a, b)| format!("{:.2},{:.2}", sx(a), sy(b))).collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            path.join(" ")
        );
        if !name.is_empty() {
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}" fill="{color}">{name}</text>"#,
                r - 80.0,
                t + 14.0 * (k as f64 + 1.0)
            );
        }
    }
    s.push_str("</svg>\n");
    s
}
