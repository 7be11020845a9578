use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::error::{RauError, Result};

pub const PAD_ID: u32 = 0;
pub const CLS_ID: u32 = 1;
pub const SEP_ID: u32 = 2;
pub const UNK_ID: u32 = 3;

pub const RESERVED_TOKENS: [&str; 4] = ["[PAD]", "[CLS]", "[SEP]", "[UNK]"];

/// Frozen token alphabet. Reserved ids 0..3 are PAD, CLS, SEP, UNK in that
/// order so checkpoints stay portable. Safe for concurrent reads once built.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    token_to_id: HashMap<String, u32>,
    id_to_token: Vec<String>,
}

impl Vocab {
    /// Vocabulary holding only the four reserved tokens.
    pub fn new() -> Vocab {
        let mut vocab = Vocab {
            token_to_id: HashMap::new(),
            id_to_token: Vec::new(),
        };
        for tok in RESERVED_TOKENS {
            vocab.push_token(tok);
        }
        vocab
    }

    /// Build from a token stream, assigning ids in first-seen order after the
    /// reserved block.
    pub fn build<I, S>(tokens: I) -> Vocab
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut vocab = Vocab::new();
        for tok in tokens {
            vocab.add(tok.as_ref());
        }
        vocab
    }

    fn push_token(&mut self, token: &str) -> u32 {
        let id = self.id_to_token.len() as u32;
        self.id_to_token.push(token.to_string());
        self.token_to_id.insert(token.to_string(), id);
        id
    }

    /// Insert `token` if absent; returns its id either way.
    pub fn add(&mut self, token: &str) -> u32 {
        match self.token_to_id.get(token) {
            Some(&id) => id,
            None => self.push_token(token),
        }
    }

    /// Id for `token`, falling back to UNK for out-of-vocabulary tokens.
    pub fn lookup(&self, token: &str) -> u32 {
        self.token_to_id.get(token).copied().unwrap_or(UNK_ID)
    }

    /// Token string for `id`, if in range.
    pub fn render(&self, id: u32) -> Option<&str> {
        self.id_to_token.get(id as usize).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn is_empty(&self) -> bool {
        self.id_to_token.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.id_to_token
    }

    /// Rebuild from a full token list (reserved block first). Used when
    /// loading checkpoints and vocabulary files.
    pub fn from_tokens<I, S>(tokens: I) -> Result<Vocab>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut vocab = Vocab {
            token_to_id: HashMap::new(),
            id_to_token: Vec::new(),
        };
        for (idx, tok) in tokens.into_iter().enumerate() {
            let tok = tok.as_ref();
            if idx < RESERVED_TOKENS.len() && tok != RESERVED_TOKENS[idx] {
                return Err(RauError::Config(format!(
                    "vocab line {idx} must be the reserved token {}, got {tok:?}",
                    RESERVED_TOKENS[idx]
                )));
            }
            if vocab.token_to_id.contains_key(tok) {
                return Err(RauError::Config(format!(
                    "duplicate vocab token {tok:?} at line {idx}"
                )));
            }
            vocab.push_token(tok);
        }
        if vocab.len() < RESERVED_TOKENS.len() {
            return Err(RauError::Config(
                "vocab file shorter than the reserved block".into(),
            ));
        }
        Ok(vocab)
    }

    /// Write one token per line; line index equals id.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for tok in &self.id_to_token {
            out.push_str(tok);
            out.push('\n');
        }
        fs::write(path, out)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Vocab> {
        let text = fs::read_to_string(path)?;
        Vocab::from_tokens(text.lines())
    }
}

impl Default for Vocab {
    fn default() -> Vocab {
        Vocab::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reserved_ids_are_fixed() {
        let v = Vocab::new();
        assert_eq!(v.lookup("[PAD]"), PAD_ID);
        assert_eq!(v.lookup("[CLS]"), CLS_ID);
        assert_eq!(v.lookup("[SEP]"), SEP_ID);
        assert_eq!(v.lookup("[UNK]"), UNK_ID);
        assert_eq!(v.len(), 4);
    }

    #[test]
    fn lookup_render_round_trip() {
        let v = Vocab::build(["深", "圳", "的", "深"]);
        assert_eq!(v.len(), 7);
        for id in 0..v.len() as u32 {
            assert_eq!(v.lookup(v.render(id).unwrap()), id);
        }
    }

    #[test]
    fn oov_maps_to_unk() {
        let v = Vocab::build(["a"]);
        assert_eq!(v.lookup("b"), UNK_ID);
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vocab.txt");
        let v = Vocab::build(["天", "气", "alpha"]);
        v.save(&path).unwrap();
        let loaded = Vocab::load(&path).unwrap();
        assert_eq!(v, loaded);
    }

    #[test]
    fn load_rejects_bad_reserved_block() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vocab.txt");
        std::fs::write(&path, "[PAD]\n[CLS]\nwrong\n[UNK]\n").unwrap();
        assert!(Vocab::load(&path).is_err());
    }
}
