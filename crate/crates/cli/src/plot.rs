//! Static SVG line charts of summary metrics against the missing rate.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use anyhow::{bail, Result};
use gcmsim::harness::Method;
use gcmsim::report::SummaryRecord;
use gcmsim::{Mechanism, Param};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 72.0;
const RIGHT: f64 = 132.0;
const TOP: f64 = 48.0;
const BOTTOM: f64 = 56.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Bias,
    Coverage,
}

impl Metric {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "bias" => Ok(Metric::Bias),
            "coverage" => Ok(Metric::Coverage),
            _ => bail!("unknown metric {s:?} (expected bias or coverage)"),
        }
    }

    fn value(self, r: &SummaryRecord) -> Option<f64> {
        match self {
            Metric::Bias => r.bias,
            Metric::Coverage => r.coverage,
        }
    }

    fn reference(self, level: f64) -> f64 {
        match self {
            Metric::Bias => 0.0,
            Metric::Coverage => level,
        }
    }
}

/// One chart: a (mechanism, N) panel.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    pub mechanism: Mechanism,
    pub n: usize,
    pub file_stem: String,
    pub svg: String,
}

fn colour(m: Method) -> &'static str {
    match m {
        Method::Fiml => "#1b6ca8",
        Method::Rf => "#c0392b",
        Method::Knn => "#27864a",
        Method::Complete => "#555555",
    }
}

/// Builds every panel for `param`. Rate-0 COMPLETE rows anchor the start of
/// each method's line, since all methods coincide on complete data.
pub fn panels(records: &[SummaryRecord], param: Param, metric: Metric, level: f64) -> Result<Vec<Panel>> {
    let mut groups: BTreeMap<(Mechanism, usize), Vec<&SummaryRecord>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.param == param) {
        groups.entry((r.mechanism, r.n)).or_default().push(r);
    }
    if groups.is_empty() {
        bail!("no summary rows for parameter {}", param.name());
    }
    let mut out = Vec::new();
    for ((mechanism, n), rows) in groups {
        let anchor = rows.iter().find(|r| r.method == Method::Complete && r.rate == 0.0).and_then(|r| metric.value(r));
        let mut series: BTreeMap<Method, Vec<(f64, f64)>> = BTreeMap::new();
        for r in &rows {
            if r.method == Method::Complete && r.rate == 0.0 {
                continue;
            }
            if let Some(v) = metric.value(r) {
                series.entry(r.method).or_default().push((r.rate, v));
            }
        }
        for points in series.values_mut() {
            if let Some(a) = anchor {
                points.push((0.0, a));
            }
            points.sort_by(|a, b| a.0.total_cmp(&b.0));
            points.dedup_by(|a, b| a.0 == b.0);
        }
        if series.is_empty() {
            if let Some(a) = anchor {
                series.insert(Method::Complete, vec![(0.0, a)]);
            }
        }
        let kind = rows[0].bias_kind.name();
        let title = format!("{} {}, N = {n}", mechanism.name(), param.name());
        let y_label = match metric {
            Metric::Bias => format!("{kind} bias"),
            Metric::Coverage => format!("coverage ({}% interval)", fmt_num(level * 100.0)),
        };
        let svg = render(&title, &y_label, &series, metric.reference(level));
        let metric_name = match metric {
            Metric::Bias => "bias",
            Metric::Coverage => "coverage",
        };
        let file_stem = format!("{metric_name}_{}_{}_N{n}", param.name(), mechanism.name());
        out.push(Panel { mechanism, n, file_stem, svg });
    }
    Ok(out)
}

fn fmt_num(v: f64) -> String {
    let s = format!("{v:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.to_string() }
}

fn render(title: &str, y_label: &str, series: &BTreeMap<Method, Vec<(f64, f64)>>, reference: f64) -> String {
    let xs = series.values().flatten().map(|p| p.0);
    let ys = series.values().flatten().map(|p| p.1);
    let x_max = xs.fold(0.0f64, f64::max).max(0.05);
    let (mut y_lo, mut y_hi) = ys.fold((reference, reference), |(lo, hi), v| (lo.min(v), hi.max(v)));
    let span = y_hi - y_lo;
    let pad = if span > 0.0 { span * 0.1 } else { reference.abs().max(1.0) * 0.05 };
    y_lo -= pad;
    y_hi += pad;

    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + x / x_max * plot_w;
    let sy = |y: f64| TOP + (y_hi - y) / (y_hi - y_lo) * plot_h;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{:.2}" y="24" text-anchor="middle" font-size="15">{}</text>"#, LEFT + plot_w / 2.0, escape(title));
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{plot_w:.2}" height="{plot_h:.2}" fill="none" stroke="black"/>"#
    );

    for k in 0..=4 {
        let y = y_lo + (y_hi - y_lo) * k as f64 / 4.0;
        let py = sy(y);
        let _ = writeln!(s, r#"<line x1="{:.2}" y1="{py:.2}" x2="{LEFT}" y2="{py:.2}" stroke="black"/>"#, LEFT - 5.0);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#, LEFT - 8.0, py + 4.0, fmt_num(y));
    }
    let mut ticks: Vec<f64> = series.values().flatten().map(|p| p.0).collect();
    ticks.sort_by(f64::total_cmp);
    ticks.dedup();
    for x in ticks {
        let px = sx(x);
        let _ = writeln!(s, r#"<line x1="{px:.2}" y1="{:.2}" x2="{px:.2}" y2="{:.2}" stroke="black"/>"#, TOP + plot_h, TOP + plot_h + 5.0);
        let _ = writeln!(s, r#"<text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, TOP + plot_h + 19.0, fmt_num(x * 100.0));
    }
    let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">missing rate (%)</text>"#, LEFT + plot_w / 2.0, HEIGHT - 14.0);
    let _ = writeln!(
        s,
        r#"<text x="18" y="{0:.2}" text-anchor="middle" transform="rotate(-90 18 {0:.2})">{1}</text>"#,
        TOP + plot_h / 2.0,
        escape(y_label)
    );

    let ry = sy(reference);
    let _ = writeln!(
        s,
        r##"<line class="reference" x1="{LEFT}" y1="{ry:.2}" x2="{:.2}" y2="{ry:.2}" stroke="#888888" stroke-dasharray="6 4"/>"##,
        LEFT + plot_w
    );

    for (i, (method, points)) in series.iter().enumerate() {
        let c = colour(*method);
        let path: Vec<String> = points.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        let _ = writeln!(
            s,
            r#"<polyline class="series" data-method="{}" points="{}" fill="none" stroke="{c}" stroke-width="2"/>"#,
            method.name(),
            path.join(" ")
        );
        for &(x, y) in points {
            let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3.5" fill="{c}"/>"#, sx(x), sy(y));
        }
        let ly = TOP + 14.0 + 20.0 * i as f64;
        let lx = LEFT + plot_w + 14.0;
        let _ = writeln!(s, r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{c}" stroke-width="2"/>"#, lx + 22.0);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, lx + 28.0, ly + 4.0, method.name());
    }
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
