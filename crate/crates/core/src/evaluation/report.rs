use std::fmt::Write as _;
use std::path::Path;

use crate::error::{contract, Error, Result};
use crate::evaluation::rouge::{rouge_l, rouge_n, RougeScore};

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ExampleScores {
    pub rouge1: RougeScore,
    pub rouge2: RougeScore,
    pub rouge_l: RougeScore,
}

impl ExampleScores {
    pub fn score<T: AsRef<str>>(hypothesis: &[T], reference: &[T]) -> Self {
        ExampleScores {
            rouge1: rouge_n(hypothesis, reference, 1),
            rouge2: rouge_n(hypothesis, reference, 2),
            rouge_l: rouge_l(hypothesis, reference),
        }
    }
}

/// Per-example scores of one system and their sample-level F1 means.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub system: String,
    pub per_example: Vec<ExampleScores>,
    pub rouge1: f64,
    pub rouge2: f64,
    pub rouge_l: f64,
}

pub fn evaluate_corpus<T: AsRef<str> + Sync>(
    system: &str,
    hypotheses: &[Vec<T>],
    references: &[Vec<T>],
) -> Result<EvalReport> {
    use rayon::prelude::*;
    if hypotheses.len() != references.len() {
        return contract(format!(
            "{} hypotheses for {} references",
            hypotheses.len(),
            references.len()
        ));
    }
    if hypotheses.is_empty() {
        return contract("nothing to evaluate");
    }
    let per_example: Vec<ExampleScores> = hypotheses
        .par_iter()
        .zip(references.par_iter())
        .map(|(h, r)| ExampleScores::score(h, r))
        .collect();
    let n = per_example.len() as f64;
    let mean = |f: fn(&ExampleScores) -> f64| per_example.iter().map(f).sum::<f64>() / n;
    Ok(EvalReport {
        system: system.to_string(),
        rouge1: mean(|s| s.rouge1.f1),
        rouge2: mean(|s| s.rouge2.f1),
        rouge_l: mean(|s| s.rouge_l.f1),
        per_example,
    })
}

/// `system,rouge1,rouge2,rougeL` with F1 scaled by 100 to two decimals.
pub fn report_csv(reports: &[EvalReport]) -> Result<String> {
    if reports.is_empty() {
        return contract("report needs at least one system");
    }
    let mut out = String::from("system,rouge1,rouge2,rougeL\n");
    for r in reports {
        if r.system.contains([',', '\n', '"']) {
            return contract(format!("system name {:?} is not CSV-safe", r.system));
        }
        writeln!(
            out,
            "{},{:.2},{:.2},{:.2}",
            r.system,
            100.0 * r.rouge1,
            100.0 * r.rouge2,
            100.0 * r.rouge_l
        )
        .unwrap();
    }
    Ok(out)
}

pub fn emit_report(reports: &[EvalReport], path: &Path) -> Result<()> {
    let csv = report_csv(reports)?;
    std::fs::write(path, csv).map_err(|e| Error::io(path, e))
}

/// One named line of a chart: `(round, value in [0, 1])` points.
#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

/// Self-contained SVG line chart of scores (×100) against round.
pub fn rouge_chart_svg(title: &str, series: &[Series]) -> String {
    let (w, h, pad) = (640.0, 400.0, 50.0);
    let xmax = series
        .iter()
        .flat_map(|s| s.points.iter().map(|p| p.0))
        .fold(1.0f64, f64::max);
    let ymax = 100.0;
    let sx = |x: f64| pad + (w - 2.0 * pad) * x / xmax;
    let sy = |y: f64| h - pad - (h - 2.0 * pad) * (100.0 * y) / ymax;
    let mut svg = String::new();
    writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">"
    )
    .unwrap();
    writeln!(svg, "<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>").unwrap();
    writeln!(
        svg,
        "<text x=\"{}\" y=\"25\" font-family=\"sans-serif\" font-size=\"16\" text-anchor=\"middle\">{}</text>",
        w / 2.0,
        escape(title)
    )
    .unwrap();
    writeln!(
        svg,
        "<path d=\"M{pad} {pad} V{} H{}\" stroke=\"black\" fill=\"none\"/>",
        h - pad,
        w - pad
    )
    .unwrap();
    for tick in [0.0, 0.25, 0.5, 0.75, 1.0] {
        writeln!(
            svg,
            "<text x=\"{}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">{}</text>",
            pad - 6.0,
            sy(tick) + 4.0,
            (tick * 100.0) as i32
        )
        .unwrap();
    }
    writeln!(
        svg,
        "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">round</text>",
        w / 2.0,
        h - 12.0
    )
    .unwrap();
    for (i, s) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<String> = s
            .points
            .iter()
            .map(|&(x, y)| format!("{:.1},{:.1}", sx(x), sy(y)))
            .collect();
        writeln!(
            svg,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"2\"/>",
            pts.join(" ")
        )
        .unwrap();
        writeln!(
            svg,
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" fill=\"{color}\">{}</text>",
            w - pad - 120.0,
            pad + 16.0 * (i as f64 + 1.0),
            escape(&s.name)
        )
        .unwrap();
    }
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn write_chart(path: &Path, title: &str, series: &[Series]) -> Result<()> {
    std::fs::write(path, rouge_chart_svg(title, series)).map_err(|e| Error::io(path, e))
}
