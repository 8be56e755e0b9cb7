use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{contract, Error, Result};
use crate::text::tokenize::tokenize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Valid, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Tokenized (source, summary) pair before vocabulary encoding.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TextPair {
    pub source: Vec<String>,
    pub summary: Vec<String>,
}

impl TextPair {
    pub fn truncated(&self, max_src_len: usize, max_tgt_len: usize) -> TextPair {
        TextPair {
            source: self.source.iter().take(max_src_len).cloned().collect(),
            summary: self.summary.iter().take(max_tgt_len).cloned().collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Corpus {
    pub split: Split,
    pub pairs: Vec<TextPair>,
}

#[derive(Serialize, Deserialize)]
struct Record<'a> {
    source: std::borrow::Cow<'a, str>,
    summary: std::borrow::Cow<'a, str>,
}

impl Corpus {
    pub fn new(split: Split, pairs: Vec<TextPair>) -> Result<Self> {
        if pairs.is_empty() {
            return contract(format!("{split} corpus is empty"));
        }
        Ok(Corpus { split, pairs })
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Reads one JSON object per line with string fields `source` and
    /// `summary`; blank lines are skipped.
    pub fn load_jsonl(path: &Path, split: Split) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut pairs = Vec::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let (source, summary) = parse_record(&line).map_err(|msg| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                msg,
            })?;
            pairs.push(TextPair {
                source: tokenize(&source),
                summary: tokenize(&summary),
            });
        }
        if pairs.is_empty() {
            return contract(format!("{}: empty corpus", path.display()));
        }
        Ok(Corpus { split, pairs })
    }

    /// Writes tokens joined by single spaces, one record per line.
    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let mut out = Vec::new();
        for p in &self.pairs {
            let rec = Record {
                source: p.source.join(" ").into(),
                summary: p.summary.join(" ").into(),
            };
            serde_json::to_writer(&mut out, &rec).expect("strings serialize");
            out.push(b'\n');
        }
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&out).map_err(|e| Error::io(path, e))
    }
}

fn parse_record(line: &str) -> std::result::Result<(String, String), String> {
    let value: serde_json::Value = serde_json::from_str(line).map_err(|e| format!("malformed record: {e}"))?;
    let obj = value.as_object().ok_or("record is not a JSON object")?;
    let field = |name: &str| -> std::result::Result<String, String> {
        match obj.get(name) {
            Some(serde_json::Value::String(s)) => Ok(s.clone()),
            Some(_) => Err(format!("field \"{name}\" is not a string")),
            None => Err(format!("missing field \"{name}\"")),
        }
    };
    Ok((field("source")?, field("summary")?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(lines: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(lines.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_valid_file() {
        let f =
            write("{\"source\": \"The cat sat.\", \"summary\": \"cat\"}\n{\"source\": \"a b\", \"summary\": \"b\"}\n");
        let c = Corpus::load_jsonl(f.path(), Split::Train).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.pairs[0].source, ["the", "cat", "sat", "."]);
    }

    #[test]
    fn missing_field_names_line_and_field() {
        let f = write("{\"source\": \"a\", \"summary\": \"b\"}\n{\"summary\": \"only\"}\n");
        let e = Corpus::load_jsonl(f.path(), Split::Train).unwrap_err().to_string();
        assert!(e.contains(":2:"), "{e}");
        assert!(e.contains("\"source\""), "{e}");
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let f = write("{\"source\": \"a\", \"summary\": \"b\"}\n\n{not json\n");
        let e = Corpus::load_jsonl(f.path(), Split::Valid).unwrap_err().to_string();
        assert!(e.contains(":3:"), "{e}");
    }

    #[test]
    fn empty_file_is_a_contract_error() {
        let f = write("");
        assert!(matches!(
            Corpus::load_jsonl(f.path(), Split::Test),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn write_then_load() {
        let c = Corpus::new(
            Split::Train,
            vec![TextPair {
                source: vec!["x".into(), "\"q\"".into()],
                summary: vec!["x".into()],
            }],
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.jsonl");
        c.write_jsonl(&p).unwrap();
        assert_eq!(Corpus::load_jsonl(&p, Split::Train).unwrap(), c);
    }
}
