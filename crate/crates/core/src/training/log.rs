use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

pub const LOG_HEADER: &str = "step,phase,j_ml,j_pg,mean_reward,d_loss,d_acc,rouge1,rouge2,rougeL";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    PretrainG,
    PretrainD,
    AdversarialG,
    AdversarialD,
    Eval,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::PretrainG => "pretrain_g",
            Phase::PretrainD => "pretrain_d",
            Phase::AdversarialG => "adv_g",
            Phase::AdversarialD => "adv_d",
            Phase::Eval => "eval",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LogFields {
    pub j_ml: Option<f64>,
    pub j_pg: Option<f64>,
    pub mean_reward: Option<f64>,
    pub d_loss: Option<f64>,
    pub d_acc: Option<f64>,
    pub rouge1: Option<f64>,
    pub rouge2: Option<f64>,
    pub rouge_l: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LogRecord {
    pub step: usize,
    pub phase: Phase,
    pub fields: LogFields,
}

/// Training records with strictly increasing step indices.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainLog {
    pub records: Vec<LogRecord>,
}

impl TrainLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, phase: Phase, fields: LogFields) {
        let step = self.records.last().map_or(1, |r| r.step + 1);
        self.records.push(LogRecord { step, phase, fields });
    }

    pub fn extend(&mut self, other: TrainLog) {
        for r in other.records {
            self.push(r.phase, r.fields);
        }
    }

    pub fn phase(&self, phase: Phase) -> impl Iterator<Item = &LogRecord> {
        self.records.iter().filter(move |r| r.phase == phase)
    }

    /// CSV with empty cells for fields a phase does not produce. Floats use
    /// the shortest representation that reads back exactly.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(LOG_HEADER);
        out.push('\n');
        let cell = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
        for r in &self.records {
            let f = &r.fields;
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                r.step,
                r.phase.name(),
                cell(f.j_ml),
                cell(f.j_pg),
                cell(f.mean_reward),
                cell(f.d_loss),
                cell(f.d_acc),
                cell(f.rouge1),
                cell(f.rouge2),
                cell(f.rouge_l)
            )
            .unwrap();
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}
