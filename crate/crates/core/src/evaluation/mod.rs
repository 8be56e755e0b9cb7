//! ROUGE-1/2/L scoring, corpus aggregation and report output.

pub mod report;
pub mod rouge;

pub use report::{
    emit_report, evaluate_corpus, report_csv, rouge_chart_svg, write_chart, EvalReport, ExampleScores, Series,
};
pub use rouge::{lcs_len, rouge_l, rouge_n, RougeScore};
