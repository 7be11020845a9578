//! Dataset ingestion: tokenization, TSV parsing, and assembly of id
//! sequences with special tokens and row/column masks.
//!
//! A dialogue is a list of context turns plus one incomplete utterance. The
//! turns are concatenated into the M context positions and the incomplete
//! utterance into the N columns; `[CLS]`/`[SEP]` fill the S special slots.

mod synth;
mod vocab;

pub use synth::synth_generate;
pub use vocab::{Vocab, CLS_ID, PAD_ID, RESERVED_TOKENS, SEP_ID, UNK_ID};

use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{RauError, Result};

/// Separator between context turns in the TSV context field. Printable and
/// collision-free with both tokenization modes.
pub const TURN_SEPARATOR: &str = " <eou> ";

/// Default maximum assembled sequence length. Longer examples are rejected
/// rather than truncated: silent truncation would corrupt gold labels.
pub const DEFAULT_MAX_LEN: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TokenizeMode {
    /// Unicode scalar values, with contiguous ASCII-alphanumeric runs kept
    /// whole and whitespace skipped.
    Char,
    /// Split on runs of whitespace.
    Whitespace,
}

impl FromStr for TokenizeMode {
    type Err = RauError;

    fn from_str(s: &str) -> Result<TokenizeMode> {
        match s {
            "char" => Ok(TokenizeMode::Char),
            "whitespace" => Ok(TokenizeMode::Whitespace),
            other => Err(RauError::Config(format!(
                "unknown tokenize mode {other:?} (expected char or whitespace)"
            ))),
        }
    }
}

/// Split an utterance into tokens.
pub fn tokenize(text: &str, mode: TokenizeMode) -> Result<Vec<String>> {
    let trimmed = text.trim();
    if trimmed.is_empty() {
        return Err(RauError::EmptyUtterance);
    }
    let tokens = match mode {
        TokenizeMode::Whitespace => trimmed.split_whitespace().map(str::to_string).collect(),
        TokenizeMode::Char => {
            let mut tokens = Vec::new();
            let mut ascii_run = String::new();
            for ch in trimmed.chars() {
                if ch.is_ascii_alphanumeric() {
                    ascii_run.push(ch);
                    continue;
                }
                if !ascii_run.is_empty() {
                    tokens.push(std::mem::take(&mut ascii_run));
                }
                if !ch.is_whitespace() {
                    tokens.push(ch.to_string());
                }
            }
            if !ascii_run.is_empty() {
                tokens.push(ascii_run);
            }
            tokens
        }
    };
    Ok(tokens)
}

/// One dialogue: context turns, the incomplete utterance, and an optional
/// reference rewrite. The unit of ingestion, training, and evaluation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DialogueExample {
    pub context_turns: Vec<Vec<String>>,
    pub incomplete: Vec<String>,
    pub reference: Option<Vec<String>>,
}

impl DialogueExample {
    pub fn new(
        context_turns: Vec<Vec<String>>,
        incomplete: Vec<String>,
        reference: Option<Vec<String>>,
    ) -> Result<DialogueExample> {
        if context_turns.is_empty()
            || incomplete.is_empty()
            || context_turns.iter().any(Vec::is_empty)
            || reference.as_ref().is_some_and(Vec::is_empty)
        {
            return Err(RauError::EmptyUtterance);
        }
        Ok(DialogueExample {
            context_turns,
            incomplete,
            reference,
        })
    }

    /// Context tokens in turn order; the M-length row sequence.
    pub fn context_tokens(&self) -> Vec<String> {
        self.context_turns.iter().flatten().cloned().collect()
    }
}

/// Parse one TSV line: context turns joined by `" <eou> "`, TAB, incomplete
/// utterance, TAB, optional reference. `line_no` is 1-based.
pub fn parse_tsv_line(
    line: &str,
    line_no: usize,
    mode: TokenizeMode,
) -> Result<DialogueExample> {
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() < 2 || fields.len() > 3 {
        return Err(RauError::MalformedLine(line_no));
    }
    let context_turns = fields[0]
        .split(TURN_SEPARATOR)
        .map(|turn| tokenize(turn, mode))
        .collect::<Result<Vec<_>>>()
        .map_err(|_| RauError::MalformedLine(line_no))?;
    let incomplete =
        tokenize(fields[1], mode).map_err(|_| RauError::MalformedLine(line_no))?;
    let reference = match fields.get(2) {
        Some(field) => {
            Some(tokenize(field, mode).map_err(|_| RauError::MalformedLine(line_no))?)
        }
        None => None,
    };
    DialogueExample::new(context_turns, incomplete, reference)
}

/// Read a whole TSV file, one example per non-empty line, in file order.
pub fn read_tsv(path: &Path, mode: TokenizeMode) -> Result<Vec<DialogueExample>> {
    let text = fs::read_to_string(path)?;
    let mut examples = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        examples.push(parse_tsv_line(line, idx + 1, mode)?);
    }
    Ok(examples)
}

fn format_tsv_line(ex: &DialogueExample) -> String {
    let context = ex
        .context_turns
        .iter()
        .map(|turn| turn.join(" "))
        .collect::<Vec<_>>()
        .join(TURN_SEPARATOR);
    match &ex.reference {
        Some(reference) => format!(
            "{context}\t{}\t{}",
            ex.incomplete.join(" "),
            reference.join(" ")
        ),
        None => format!("{context}\t{}", ex.incomplete.join(" ")),
    }
}

/// Write examples to TSV; inverse of `read_tsv` for well-formed examples.
pub fn write_tsv(path: &Path, examples: &[DialogueExample]) -> Result<()> {
    let mut out = String::new();
    for ex in examples {
        out.push_str(&format_tsv_line(ex));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Id sequence with layout `[CLS] turn_1 [SEP] ... turn_k [SEP] x [SEP]`
/// plus the masks selecting the M context rows and the N incomplete columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedExample {
    pub ids: Vec<u32>,
    pub context_mask: Vec<bool>,
    pub incomplete_mask: Vec<bool>,
    /// 0 for context positions, 1 for incomplete-utterance positions;
    /// each `[SEP]` takes the segment of the span it closes, `[CLS]` takes 0.
    pub segment_ids: Vec<u8>,
}

impl EncodedExample {
    /// Number of context-token positions (relation-matrix rows).
    pub fn m(&self) -> usize {
        self.context_mask.iter().filter(|&&b| b).count()
    }

    /// Number of incomplete-utterance positions (relation-matrix columns).
    pub fn n(&self) -> usize {
        self.incomplete_mask.iter().filter(|&&b| b).count()
    }

    /// Number of special-token positions.
    pub fn s(&self) -> usize {
        self.ids.len() - self.m() - self.n()
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Sequence positions of the context tokens c_1..c_M, in order.
    pub fn context_rows(&self) -> Vec<usize> {
        self.context_mask
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
            .collect()
    }

    /// Sequence positions of the incomplete tokens x_1..x_N, in order.
    pub fn incomplete_cols(&self) -> Vec<usize> {
        self.incomplete_mask
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
            .collect()
    }
}

/// Assemble ids and masks for one example. OOV tokens map to UNK; sequences
/// longer than `max_len` are rejected.
pub fn encode_example(
    ex: &DialogueExample,
    vocab: &Vocab,
    max_len: usize,
) -> Result<EncodedExample> {
    let total = 1
        + ex.context_turns.iter().map(Vec::len).sum::<usize>()
        + ex.context_turns.len()
        + ex.incomplete.len()
        + 1;
    if total > max_len {
        return Err(RauError::TooLong {
            actual: total,
            max: max_len,
        });
    }

    let mut ids = Vec::with_capacity(total);
    let mut context_mask = Vec::with_capacity(total);
    let mut incomplete_mask = Vec::with_capacity(total);
    let mut segment_ids = Vec::with_capacity(total);

    let mut push = |id: u32, ctx: bool, inc: bool, seg: u8| {
        ids.push(id);
        context_mask.push(ctx);
        incomplete_mask.push(inc);
        segment_ids.push(seg);
    };

    push(CLS_ID, false, false, 0);
    for turn in &ex.context_turns {
        for tok in turn {
            push(vocab.lookup(tok), true, false, 0);
        }
        push(SEP_ID, false, false, 0);
    }
    for tok in &ex.incomplete {
        push(vocab.lookup(tok), false, true, 1);
    }
    push(SEP_ID, false, false, 1);

    Ok(EncodedExample {
        ids,
        context_mask,
        incomplete_mask,
        segment_ids,
    })
}

/// Collect the vocabulary over every token of every example, including
/// references, in first-seen order.
pub fn build_vocab(examples: &[DialogueExample]) -> Vocab {
    let mut vocab = Vocab::new();
    for ex in examples {
        for turn in &ex.context_turns {
            for tok in turn {
                vocab.add(tok);
            }
        }
        for tok in &ex.incomplete {
            vocab.add(tok);
        }
        if let Some(reference) = &ex.reference {
            for tok in reference {
                vocab.add(tok);
            }
        }
    }
    vocab
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    #[test]
    fn char_mode_splits_cjk_and_keeps_ascii_runs() {
        let tokens = tokenize("深圳的天气怎么样", TokenizeMode::Char).unwrap();
        assert_eq!(tokens, ["深", "圳", "的", "天", "气", "怎", "么", "样"]);
        let mixed = tokenize("BERT的dim是128维", TokenizeMode::Char).unwrap();
        assert_eq!(mixed, ["BERT", "的", "dim", "是", "128", "维"]);
        assert_eq!(tokenize("a", TokenizeMode::Char).unwrap(), ["a"]);
    }

    #[test]
    fn whitespace_mode_collapses_runs() {
        let tokens = tokenize("why is  this", TokenizeMode::Whitespace).unwrap();
        assert_eq!(tokens, ["why", "is", "this"]);
    }

    #[test]
    fn empty_after_trim_is_rejected() {
        assert!(matches!(
            tokenize("   ", TokenizeMode::Char),
            Err(RauError::EmptyUtterance)
        ));
    }

    #[test]
    fn char_tokenize_is_idempotent_on_rejoined_output() {
        for text in ["深圳的天气怎么样", "mix 了 tokens233", "why is this"] {
            let once = tokenize(text, TokenizeMode::Char).unwrap();
            let again = tokenize(&once.join(" "), TokenizeMode::Char).unwrap();
            assert_eq!(once, again);
        }
    }

    #[test]
    fn parse_line_formats() {
        let ex = parse_tsv_line("u1 <eou> u2\tu3\tu3r", 1, TokenizeMode::Whitespace).unwrap();
        assert_eq!(ex.context_turns.len(), 2);
        assert_eq!(ex.incomplete, toks("u3"));
        assert_eq!(ex.reference, Some(toks("u3r")));

        let ex = parse_tsv_line("u1\tu3", 1, TokenizeMode::Whitespace).unwrap();
        assert!(ex.reference.is_none());

        assert!(matches!(
            parse_tsv_line("u1\t\tu3r", 7, TokenizeMode::Whitespace),
            Err(RauError::MalformedLine(7))
        ));
        assert!(matches!(
            parse_tsv_line("only one field", 3, TokenizeMode::Whitespace),
            Err(RauError::MalformedLine(3))
        ));
    }

    #[test]
    fn tsv_write_read_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.tsv");
        let examples = vec![
            DialogueExample::new(vec![toks("a b"), toks("c")], toks("d e"), Some(toks("a d e")))
                .unwrap(),
            DialogueExample::new(vec![toks("x y z")], toks("w"), None).unwrap(),
        ];
        write_tsv(&path, &examples).unwrap();
        let back = read_tsv(&path, TokenizeMode::Whitespace).unwrap();
        assert_eq!(back, examples);
    }

    #[test]
    fn encode_layout_and_masks() {
        // turns=[ab],[c], incomplete=de -> [CLS,a,b,SEP,c,SEP,d,e,SEP]
        let ex = DialogueExample::new(
            vec![toks("a b"), toks("c")],
            toks("d e"),
            None,
        )
        .unwrap();
        let vocab = build_vocab(std::slice::from_ref(&ex));
        let enc = encode_example(&ex, &vocab, 128).unwrap();
        assert_eq!(enc.len(), 9);
        assert_eq!(enc.m(), 3);
        assert_eq!(enc.n(), 2);
        assert_eq!(enc.s(), 4);
        assert_eq!(enc.ids[0], CLS_ID);
        assert_eq!(enc.ids[3], SEP_ID);
        assert_eq!(enc.ids[5], SEP_ID);
        assert_eq!(enc.ids[8], SEP_ID);
        assert_eq!(enc.context_rows(), vec![1, 2, 4]);
        assert_eq!(enc.incomplete_cols(), vec![6, 7]);
        assert_eq!(enc.segment_ids, vec![0, 0, 0, 0, 0, 0, 1, 1, 1]);
    }

    #[test]
    fn encode_maps_oov_to_unk() {
        let ex = DialogueExample::new(vec![toks("a")], toks("zzz"), None).unwrap();
        let vocab = Vocab::build(["a"]);
        let enc = encode_example(&ex, &vocab, 16).unwrap();
        assert_eq!(enc.ids[3], UNK_ID);
    }

    #[test]
    fn encode_rejects_overflow() {
        let ex = DialogueExample::new(vec![toks("a b c")], toks("d"), None).unwrap();
        assert!(matches!(
            encode_example(&ex, &Vocab::new(), 6),
            Err(RauError::TooLong { actual: 7, max: 6 })
        ));
    }

    #[test]
    fn masks_are_disjoint_and_sum_with_specials() {
        let mut rng_state = 11u64;
        let mut next = move || {
            rng_state = rng_state.wrapping_mul(6364136223846793005).wrapping_add(1);
            (rng_state >> 33) as usize
        };
        for _ in 0..50 {
            let n_turns = 1 + next() % 3;
            let turns: Vec<Vec<String>> = (0..n_turns)
                .map(|t| (0..1 + next() % 5).map(|i| format!("c{t}_{i}")).collect())
                .collect();
            let incomplete: Vec<String> = (0..1 + next() % 5).map(|i| format!("x{i}")).collect();
            let ex = DialogueExample::new(turns, incomplete, None).unwrap();
            let vocab = build_vocab(std::slice::from_ref(&ex));
            let enc = encode_example(&ex, &vocab, 128).unwrap();
            for i in 0..enc.len() {
                assert!(!(enc.context_mask[i] && enc.incomplete_mask[i]));
                if matches!(enc.ids[i], CLS_ID | SEP_ID | PAD_ID) {
                    assert!(!enc.context_mask[i] && !enc.incomplete_mask[i]);
                }
            }
            assert_eq!(enc.m() + enc.n() + enc.s(), enc.len());
        }
    }

    #[test]
    fn table_example_counts_from_char_oracle() {
        let u1 = tokenize("深圳的天气怎么样", TokenizeMode::Char).unwrap();
        let u2 = tokenize("最近一直下暴雨", TokenizeMode::Char).unwrap();
        let u3 = tokenize("为什么这样", TokenizeMode::Char).unwrap();
        let expected_m = u1.len() + u2.len();
        let expected_n = u3.len();
        let ex = DialogueExample::new(vec![u1, u2], u3, None).unwrap();
        let vocab = build_vocab(std::slice::from_ref(&ex));
        let enc = encode_example(&ex, &vocab, 128).unwrap();
        assert_eq!(enc.m(), expected_m);
        assert_eq!(enc.m(), 15);
        assert_eq!(enc.n(), expected_n);
        assert_eq!(enc.n(), 5);
        assert_eq!(enc.s(), 4);
    }
}
