//! CSV and SVG writers.

use std::fmt::Write as _;
use std::io::{Read, Write};

use robust_online::game::{CurvePoint, RiskSummary};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// One row of `<prefix>_summary.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub run_id: usize,
    pub seed: u64,
    pub predictor: String,
    pub kernel: String,
    #[serde(rename = "T")]
    pub horizon: usize,
    pub cum_errors: usize,
    pub guarantee_event: Option<bool>,
}

pub fn summary_rows(s: &RiskSummary) -> Vec<SummaryRow> {
    s.results
        .iter()
        .map(|r| SummaryRow {
            run_id: r.run_id,
            seed: r.seed,
            predictor: s.predictor.clone(),
            kernel: s.kernel.clone(),
            horizon: s.horizon,
            cum_errors: r.cum_errors,
            guarantee_event: r.guarantee_event,
        })
        .collect()
}

pub fn write_summary<W: Write>(w: W, rows: &[SummaryRow]) -> Result<(), CliError> {
    let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_summary<R: Read>(r: R) -> Result<Vec<SummaryRow>, CliError> {
    csv::Reader::from_reader(r)
        .deserialize()
        .collect::<Result<Vec<SummaryRow>, _>>()
        .map_err(CliError::from)
}

/// Writes curve rows. When `axis` is given, each row starts with its value.
pub fn write_curve<W: Write>(w: W, axis: Option<&str>, rows: &[(Option<f64>, CurvePoint)]) -> Result<(), CliError> {
    let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
    let mut header = Vec::new();
    header.extend(axis);
    header.extend(["T", "median", "q90", "mean"]);
    out.write_record(&header)?;
    for (v, p) in rows {
        let mut rec = Vec::new();
        if axis.is_some() {
            rec.push(v.map_or_else(String::new, |v| v.to_string()));
        }
        rec.extend([p.horizon.to_string(), p.median.to_string(), p.q90.to_string(), p.mean.to_string()]);
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// A static line chart. Non-positive values are dropped on log axes.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[(String, Vec<(f64, f64)>)], log_log: bool) -> String {
    let (w, h, pad) = (640.0, 420.0, 60.0);
    let tf = |v: f64| if log_log { v.log10() } else { v };
    let pts: Vec<(String, Vec<(f64, f64)>)> = series
        .iter()
        .map(|(name, ps)| {
            let kept = ps
                .iter()
                .filter(|(x, y)| !log_log || (*x > 0.0 && *y > 0.0))
                .map(|&(x, y)| (tf(x), tf(y)))
                .filter(|(x, y)| x.is_finite() && y.is_finite())
                .collect();
            (name.clone(), kept)
        })
        .collect();
    let all: Vec<(f64, f64)> = pts.iter().flat_map(|(_, p)| p.iter().copied()).collect();
    let bounds = |f: fn(&(f64, f64)) -> f64| {
        let lo = all.iter().map(f).fold(f64::INFINITY, f64::min);
        let hi = all.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
        match (lo.is_finite(), (hi - lo).abs() > 1e-12) {
            (false, _) => (0.0, 1.0),
            (true, true) => (lo, hi),
            (true, false) => (lo - 0.5, hi + 0.5),
        }
    };
    let (x0, x1) = bounds(|p| p.0);
    let (y0, y1) = bounds(|p| p.1);
    let sx = |x: f64| pad + (x - x0) / (x1 - x0) * (w - 2.0 * pad);
    let sy = |y: f64| h - pad - (y - y0) / (y1 - y0) * (h - 2.0 * pad);
    let label = |v: f64| if log_log { format!("{:.3}", 10f64.powf(v)) } else { format!("{v:.3}") };

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#, w / 2.0, escape(title));
    let _ = writeln!(
        s,
        r#"<path d="M{pad} {pad} L{pad} {b} L{r} {b}" fill="none" stroke="black"/>"#,
        b = h - pad,
        r = w - pad
    );
    let _ = writeln!(s, r#"<text x="{pad}" y="{}" text-anchor="middle">{}</text>"#, h - pad + 18.0, label(x0));
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, w - pad, h - pad + 18.0, label(x1));
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, pad - 6.0, h - pad, label(y0));
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, pad - 6.0, pad + 4.0, label(y1));
    let scale = if log_log { " (log)" } else { "" };
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}{scale}</text>"#, w / 2.0, h - 16.0, escape(x_label));
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}{scale}</text>"#,
        h / 2.0,
        h / 2.0,
        escape(y_label)
    );
    for (i, (name, ps)) in pts.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let coords: Vec<String> = ps.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#, coords.join(" "));
        for &(x, y) in ps {
            let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#, sx(x), sy(y));
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" fill="{color}">{}</text>"#,
            w - pad - 120.0,
            pad + 16.0 * (i as f64 + 1.0),
            escape(name)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_round_trips() {
        let rows = vec![
            SummaryRow {
                run_id: 0,
                seed: 7,
                predictor: "pairwise-meta".into(),
                kernel: "massart(eta=0.25)".into(),
                horizon: 100,
                cum_errors: 3,
                guarantee_event: Some(true),
            },
            SummaryRow {
                run_id: 1,
                seed: 8,
                predictor: "l2-reduction".into(),
                kernel: "a,b \"quoted\"".into(),
                horizon: 100,
                cum_errors: 0,
                guarantee_event: None,
            },
        ];
        let mut buf = Vec::new();
        write_summary(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("run_id,seed,predictor,kernel,T,cum_errors,guarantee_event\n"));
        assert!(!text.contains('\r'));
        assert_eq!(read_summary(&buf[..]).unwrap(), rows);
    }

    #[test]
    fn curve_header() {
        let p = CurvePoint {
            horizon: 256,
            median: 4.0,
            q90: 7.0,
            mean: 4.5,
        };
        let mut buf = Vec::new();
        write_curve(&mut buf, None, &[(None, p)]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "T,median,q90,mean\n256,4,7,4.5\n");
        let mut buf = Vec::new();
        write_curve(&mut buf, Some("alpha"), &[(Some(0.25), p)]).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("alpha,T,median,q90,mean\n0.25,256,"));
    }

    #[test]
    fn chart_is_deterministic_svg() {
        let series = vec![("median".to_string(), vec![(256.0, 3.0), (512.0, 5.0), (1024.0, 0.0)])];
        let a = line_chart("risk", "T", "errors", &series, true);
        assert_eq!(a, line_chart("risk", "T", "errors", &series, true));
        assert!(a.starts_with("<svg") && a.ends_with("</svg>\n"));
        assert_eq!(a.matches("<circle").count(), 2);
    }
}
