use std::collections::HashMap;
use std::path::Path;

use crate::error::{contract, Error, Result};

pub const PAD: usize = 0;
pub const UNK: usize = 1;
pub const BOS: usize = 2;
pub const EOS: usize = 3;
pub const RESERVED: [&str; 4] = ["<pad>", "<unk>", "<bos>", "<eos>"];

/// Fixed vocabulary with four reserved ids (PAD, UNK, BOS, EOS).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    /// Keeps the `max_size - 4` most frequent tokens; equal counts are
    /// ordered lexicographically.
    pub fn build<'a, I>(sequences: I, max_size: usize) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [String]>,
    {
        if max_size <= RESERVED.len() {
            return contract(format!("vocabulary size {max_size} must exceed {}", RESERVED.len()));
        }
        let mut counts: HashMap<&str, usize> = HashMap::new();
        let mut any = false;
        for seq in sequences {
            any = true;
            for t in seq {
                if !RESERVED.contains(&t.as_str()) {
                    *counts.entry(t.as_str()).or_insert(0) += 1;
                }
            }
        }
        if !any {
            return contract("cannot build a vocabulary from an empty corpus");
        }
        let mut ranked: Vec<(&str, usize)> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        ranked.truncate(max_size - RESERVED.len());
        Ok(Self::from_tokens(ranked.into_iter().map(|(t, _)| t.to_string())))
    }

    fn from_tokens(extra: impl IntoIterator<Item = String>) -> Self {
        let tokens: Vec<String> = RESERVED.iter().map(|s| s.to_string()).chain(extra).collect();
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Vocabulary { tokens, index }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn id_or_unk(&self, token: &str) -> usize {
        self.id(token).unwrap_or(UNK)
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    /// One token per line in id order, reserved tokens included.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = self.tokens.join("\n");
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let lines: Vec<&str> = text.lines().collect();
        for (i, r) in RESERVED.iter().enumerate() {
            if lines.get(i) != Some(r) {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: i + 1,
                    msg: format!("expected reserved token {r}"),
                });
            }
        }
        let vocab = Self::from_tokens(lines[RESERVED.len()..].iter().map(|s| s.to_string()));
        if vocab.index.len() != vocab.tokens.len() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: 0,
                msg: "duplicate token".into(),
            });
        }
        Ok(vocab)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(s: &[&str]) -> Vec<String> {
        s.iter().map(|t| t.to_string()).collect()
    }

    #[test]
    fn counts_and_caps() {
        let c = [seq(&["a", "a", "b"])];
        let v = Vocabulary::build(c.iter().map(Vec::as_slice), 6).unwrap();
        assert_eq!(v.len(), 6);
        assert_eq!(v.id("a"), Some(4));
        assert_eq!(v.id("b"), Some(5));
        let v5 = Vocabulary::build(c.iter().map(Vec::as_slice), 5).unwrap();
        assert_eq!(v5.len(), 5);
        assert_eq!(v5.id("a"), Some(4));
        assert_eq!(v5.id("b"), None);
    }

    #[test]
    fn ties_break_lexicographically() {
        let c = [seq(&["b", "a"])];
        let v = Vocabulary::build(c.iter().map(Vec::as_slice), 10).unwrap();
        assert!(v.id("a").unwrap() < v.id("b").unwrap());
    }

    #[test]
    fn reserved_ids_are_fixed() {
        let c = [seq(&["<eos>", "x"])];
        let v = Vocabulary::build(c.iter().map(Vec::as_slice), 10).unwrap();
        assert_eq!(v.token(PAD), Some("<pad>"));
        assert_eq!(v.token(UNK), Some("<unk>"));
        assert_eq!(v.id("<bos>"), Some(BOS));
        assert_eq!(v.id("<eos>"), Some(EOS));
        assert_eq!(v.len(), 5);
    }

    #[test]
    fn contract_errors() {
        let empty: [Vec<String>; 0] = [];
        assert!(Vocabulary::build(empty.iter().map(Vec::as_slice), 10).is_err());
        let c = [seq(&["a"])];
        assert!(Vocabulary::build(c.iter().map(Vec::as_slice), 4).is_err());
    }

    #[test]
    fn file_round_trip() {
        let c = [seq(&["z", "y", "y"])];
        let v = Vocabulary::build(c.iter().map(Vec::as_slice), 10).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("vocab.txt");
        v.save(&p).unwrap();
        assert_eq!(Vocabulary::load(&p).unwrap(), v);
    }
}
