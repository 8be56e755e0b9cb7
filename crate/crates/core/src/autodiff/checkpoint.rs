//! Plain-text parameter checkpoints.
//!
//! ```text
//! advsum-checkpoint v1
//! <name> <rank> <dim_1> ... <dim_rank>
//! <value> <value> ...            (row-major, one line per parameter)
//! ...
//! ```
//!
//! Values are written in scientific notation with enough significant
//! digits (17 for `f64`) that reading them back is value-exact.

use std::fmt::Write as _;
use std::path::Path;

use crate::autodiff::params::ParamSet;
use crate::autodiff::tensor::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const CHECKPOINT_TAG: &str = "advsum-checkpoint v1";

pub fn to_text<S: Scalar>(params: &ParamSet<S>) -> String {
    let mut out = String::new();
    out.push_str(CHECKPOINT_TAG);
    out.push('\n');
    let precision = S::ROUND_TRIP_DIGITS - 1;
    for (name, t) in params.iter() {
        write!(out, "{name} {}", t.shape().len()).unwrap();
        for d in t.shape() {
            write!(out, " {d}").unwrap();
        }
        out.push('\n');
        let mut first = true;
        for v in t.data() {
            if !first {
                out.push(' ');
            }
            first = false;
            write!(out, "{v:.precision$e}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn from_text<S: Scalar>(text: &str, path: &Path) -> Result<ParamSet<S>> {
    let err = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    match lines.next() {
        Some((_, tag)) if tag.trim_end() == CHECKPOINT_TAG => {}
        _ => return Err(err(1, format!("expected header {CHECKPOINT_TAG:?}"))),
    }
    let mut params = ParamSet::new();
    while let Some((ln, header)) = lines.next() {
        if header.trim().is_empty() {
            continue;
        }
        let mut fields = header.split_whitespace();
        let name = fields.next().expect("nonempty line").to_string();
        let parse_usize = |s: Option<&str>, what: &str| -> Result<usize> {
            s.and_then(|s| s.parse().ok())
                .ok_or_else(|| err(ln, format!("parameter {name}: bad {what}")))
        };
        let rank = parse_usize(fields.next(), "rank")?;
        let shape = (0..rank)
            .map(|_| parse_usize(fields.next(), "dimension"))
            .collect::<Result<Vec<_>>>()?;
        if fields.next().is_some() {
            return Err(err(ln, format!("parameter {name}: trailing fields after shape")));
        }
        let (vln, values) = lines
            .next()
            .ok_or_else(|| err(ln + 1, format!("parameter {name}: missing value line")))?;
        let data = values
            .split_whitespace()
            .map(|tok| {
                tok.parse::<S>()
                    .map_err(|_| err(vln, format!("parameter {name}: bad value {tok:?}")))
            })
            .collect::<Result<Vec<S>>>()?;
        let t = Tensor::new(shape, data).map_err(|e| err(vln, format!("parameter {name}: {e}")))?;
        params.insert(name, t.with_grad()).map_err(|e| err(ln, e.to_string()))?;
    }
    Ok(params)
}

pub fn save<S: Scalar>(params: &ParamSet<S>, path: &Path) -> Result<()> {
    std::fs::write(path, to_text(params)).map_err(|e| Error::io(path, e))
}

pub fn load<S: Scalar>(path: &Path) -> Result<ParamSet<S>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_text(&text, path)
}
