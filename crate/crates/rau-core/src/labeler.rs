//! Gold supervision: turn (context, incomplete, reference) triples into edit
//! matrices by aligning the incomplete utterance against the reference and
//! sourcing the differing spans from the context.

use std::ops::Range;

use crate::edit::{EditClass, EditMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpanKind {
    Insert,
    Substitute,
}

/// One reference-side span that must be sourced from the context.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlignmentSpan {
    pub kind: SpanKind,
    /// Tokens taken from the reference, in order.
    pub ref_tokens: Vec<String>,
    /// Column interval in x. Empty for Insert, where `start` is the
    /// insert-before anchor (`start == N` anchors after the last token).
    pub x_cols: Range<usize>,
    /// Row interval in the context, once resolved.
    pub ctx_rows: Option<Range<usize>>,
}

/// Counters for supervision that could not be represented exactly.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LabelStats {
    /// Spans whose tokens were not found contiguously in the context.
    pub dropped_spans: usize,
    /// Spans discarded because their rectangle overlapped an earlier one.
    pub conflicts: usize,
}

/// Longest-common-subsequence table over suffixes: `dp[i][j]` is the LCS
/// length of `x[i..]` and `reference[j..]`.
fn lcs_table(x: &[String], reference: &[String]) -> Vec<Vec<u32>> {
    let n = x.len();
    let m = reference.len();
    let mut dp = vec![vec![0u32; m + 1]; n + 1];
    for i in (0..n).rev() {
        for j in (0..m).rev() {
            dp[i][j] = if x[i] == reference[j] {
                dp[i + 1][j + 1] + 1
            } else {
                dp[i + 1][j].max(dp[i][j + 1])
            };
        }
    }
    dp
}

/// Align `x` against `reference` and emit the spans of reference tokens that
/// fall outside the LCS. A span adjacent to unmatched x tokens becomes a
/// Substitute over those columns; otherwise it is an Insert anchored before
/// the next aligned x token (or before the virtual end column).
pub fn diff_spans(x: &[String], reference: &[String]) -> Vec<AlignmentSpan> {
    let dp = lcs_table(x, reference);
    let n = x.len();
    let m = reference.len();

    let mut spans = Vec::new();
    let mut gap_x: Range<usize> = 0..0;
    let mut gap_ref: Range<usize> = 0..0;

    let mut flush = |gap_x: &mut Range<usize>,
                     gap_ref: &mut Range<usize>,
                     anchor: usize,
                     spans: &mut Vec<AlignmentSpan>| {
        if !gap_ref.is_empty() {
            let ref_tokens = reference[gap_ref.clone()].to_vec();
            let span = if gap_x.is_empty() {
                AlignmentSpan {
                    kind: SpanKind::Insert,
                    ref_tokens,
                    x_cols: anchor..anchor,
                    ctx_rows: None,
                }
            } else {
                AlignmentSpan {
                    kind: SpanKind::Substitute,
                    ref_tokens,
                    x_cols: gap_x.clone(),
                    ctx_rows: None,
                }
            };
            spans.push(span);
        }
        *gap_x = 0..0;
        *gap_ref = 0..0;
    };

    let mut i = 0;
    let mut j = 0;
    while i < n && j < m {
        if x[i] == reference[j] && dp[i][j] == dp[i + 1][j + 1] + 1 {
            flush(&mut gap_x, &mut gap_ref, i, &mut spans);
            i += 1;
            j += 1;
        } else if dp[i + 1][j] >= dp[i][j + 1] {
            if gap_x.is_empty() {
                gap_x = i..i;
            }
            gap_x.end = i + 1;
            i += 1;
        } else {
            if gap_ref.is_empty() {
                gap_ref = j..j;
            }
            gap_ref.end = j + 1;
            j += 1;
        }
    }
    if i < n {
        if gap_x.is_empty() {
            gap_x = i..i;
        }
        gap_x.end = n;
    }
    if j < m {
        if gap_ref.is_empty() {
            gap_ref = j..j;
        }
        gap_ref.end = m;
    }
    flush(&mut gap_x, &mut gap_ref, n, &mut spans);
    spans
}

/// Locate each span's tokens as a contiguous run in the context, preferring
/// the last (most recent) occurrence. Spans with no contiguous match are
/// dropped and counted.
pub fn resolve_context(
    spans: Vec<AlignmentSpan>,
    context: &[String],
) -> (Vec<AlignmentSpan>, usize) {
    let mut resolved = Vec::with_capacity(spans.len());
    let mut dropped = 0;
    for mut span in spans {
        match find_last_run(context, &span.ref_tokens) {
            Some(start) => {
                span.ctx_rows = Some(start..start + span.ref_tokens.len());
                resolved.push(span);
            }
            None => dropped += 1,
        }
    }
    (resolved, dropped)
}

fn find_last_run(haystack: &[String], needle: &[String]) -> Option<usize> {
    if needle.is_empty() || needle.len() > haystack.len() {
        return None;
    }
    (0..=haystack.len() - needle.len())
        .rev()
        .find(|&start| haystack[start..start + needle.len()] == *needle)
}

/// Paint resolved spans into an M×N edit matrix. Inserts anchored at column
/// N add a virtual column. On rectangle overlap, the earlier span
/// (left-to-right in x) wins and the conflict is counted.
pub fn spans_to_matrix(
    spans: &[AlignmentSpan],
    m: usize,
    n: usize,
) -> (EditMatrix, usize) {
    let needs_virtual = spans
        .iter()
        .any(|s| s.kind == SpanKind::Insert && s.x_cols.start == n && s.ctx_rows.is_some());
    let mut em = if needs_virtual {
        EditMatrix::all_none_with_virtual(m, n)
    } else {
        EditMatrix::all_none(m, n)
    };

    let mut ordered: Vec<&AlignmentSpan> = spans.iter().filter(|s| s.ctx_rows.is_some()).collect();
    ordered.sort_by_key(|s| (s.x_cols.start, s.x_cols.end));

    let mut conflicts = 0;
    for span in ordered {
        let rows = span.ctx_rows.clone().expect("resolved span");
        let (class, cols) = match span.kind {
            SpanKind::Substitute => (EditClass::Substitute, span.x_cols.clone()),
            SpanKind::Insert => (EditClass::Insert, span.x_cols.start..span.x_cols.start + 1),
        };
        let overlap = rows
            .clone()
            .any(|r| cols.clone().any(|c| em.get(r, c) != EditClass::None));
        if overlap {
            conflicts += 1;
            continue;
        }
        for r in rows {
            for c in cols.clone() {
                em.set(r, c, class);
            }
        }
    }
    (em, conflicts)
}

/// Full labeling pipeline for one triple.
pub fn label(
    context: &[String],
    x: &[String],
    reference: &[String],
) -> (EditMatrix, LabelStats) {
    let spans = diff_spans(x, reference);
    let (resolved, dropped_spans) = resolve_context(spans, context);
    let (em, conflicts) = spans_to_matrix(&resolved, context.len(), x.len());
    (
        em,
        LabelStats {
            dropped_spans,
            conflicts,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{tokenize, TokenizeMode};

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    fn chars(s: &str) -> Vec<String> {
        tokenize(s, TokenizeMode::Char).unwrap()
    }

    #[test]
    fn identical_sequences_have_no_spans() {
        let x = toks("a b c");
        assert!(diff_spans(&x, &x).is_empty());
    }

    #[test]
    fn single_replacement_is_substitute() {
        let spans = diff_spans(&toks("a b"), &toks("a c"));
        assert_eq!(spans.len(), 1);
        assert_eq!(spans[0].kind, SpanKind::Substitute);
        assert_eq!(spans[0].ref_tokens, toks("c"));
        assert_eq!(spans[0].x_cols, 1..2);
    }

    #[test]
    fn dialogue_example_spans() {
        // Insert 深圳 before 为 (column 0); substitute 最近一直下暴雨 for 这样.
        let x = chars("为什么这样");
        let reference = chars("深圳为什么最近一直下暴雨");
        let spans = diff_spans(&x, &reference);
        assert_eq!(spans.len(), 2);
        assert_eq!(spans[0].kind, SpanKind::Insert);
        assert_eq!(spans[0].ref_tokens, chars("深圳"));
        assert_eq!(spans[0].x_cols, 0..0);
        assert_eq!(spans[1].kind, SpanKind::Substitute);
        assert_eq!(spans[1].ref_tokens, chars("最近一直下暴雨"));
        assert_eq!(spans[1].x_cols, 3..5);
    }

    #[test]
    fn resolve_finds_last_occurrence_and_drops_missing() {
        let context = toks("p q p q r");
        let spans = vec![
            AlignmentSpan {
                kind: SpanKind::Insert,
                ref_tokens: toks("p q"),
                x_cols: 0..0,
                ctx_rows: None,
            },
            AlignmentSpan {
                kind: SpanKind::Insert,
                ref_tokens: toks("zz"),
                x_cols: 1..1,
                ctx_rows: None,
            },
        ];
        let (resolved, dropped) = resolve_context(spans, &context);
        assert_eq!(dropped, 1);
        assert_eq!(resolved.len(), 1);
        assert_eq!(resolved[0].ctx_rows, Some(2..4));
    }

    #[test]
    fn dialogue_example_matrix_cells() {
        let context = chars("深圳的天气怎么样最近一直下暴雨");
        let x = chars("为什么这样");
        let reference = chars("深圳为什么最近一直下暴雨");
        let (em, stats) = label(&context, &x, &reference);
        assert_eq!(stats, LabelStats::default());
        assert_eq!(em.rows(), 15);
        assert_eq!(em.cols(), 5);
        // Insert rectangle: rows 0..2 x column 0.
        for r in 0..2 {
            assert_eq!(em.get(r, 0), EditClass::Insert);
        }
        // Substitute rectangle: rows 8..15 x columns 3..5.
        for r in 8..15 {
            for c in 3..5 {
                assert_eq!(em.get(r, c), EditClass::Substitute);
            }
        }
        let marked = em.iter().filter(|&c| c != EditClass::None).count();
        assert_eq!(marked, 2 + 14);
    }

    #[test]
    fn no_spans_yields_all_none() {
        let (em, _) = spans_to_matrix(&[], 3, 4);
        assert_eq!(em, EditMatrix::all_none(3, 4));
    }

    #[test]
    fn identical_anchor_conflict_keeps_first() {
        let mk = |rows: Range<usize>| AlignmentSpan {
            kind: SpanKind::Insert,
            ref_tokens: toks("a"),
            x_cols: 1..1,
            ctx_rows: Some(rows),
        };
        let (em, conflicts) = spans_to_matrix(&[mk(0..1), mk(0..2)], 3, 3);
        assert_eq!(conflicts, 1);
        assert_eq!(em.get(0, 1), EditClass::Insert);
        assert_eq!(em.get(1, 1), EditClass::None);
    }

    #[test]
    fn end_insertion_uses_virtual_column() {
        let spans = diff_spans(&toks("a b"), &toks("a b c d"));
        assert_eq!(spans.len(), 1);
        assert_eq!(spans[0].kind, SpanKind::Insert);
        assert_eq!(spans[0].x_cols, 2..2);
        let (resolved, _) = resolve_context(spans, &toks("c d e"));
        let (em, _) = spans_to_matrix(&resolved, 3, 2);
        assert!(em.has_virtual_col());
        assert_eq!(em.get(0, 2), EditClass::Insert);
        assert_eq!(em.get(1, 2), EditClass::Insert);
    }

    #[test]
    fn label_components_are_rectangles() {
        // Spans never overlap in reference coverage, and every painted
        // component must be a full axis-aligned rectangle.
        let context = toks("u v w p q r s");
        let x = toks("k1 zz k2 k3");
        let reference = toks("k1 p q k2 v w k3");
        let (em, stats) = label(&context, &x, &reference);
        assert_eq!(stats.dropped_spans, 0);
        assert_rectangles(&em);
    }

    fn assert_rectangles(em: &EditMatrix) {
        for class in [EditClass::Substitute, EditClass::Insert] {
            let mut seen = vec![vec![false; em.cols()]; em.rows()];
            for r in 0..em.rows() {
                for c in 0..em.cols() {
                    if seen[r][c] || em.get(r, c) != class {
                        continue;
                    }
                    // Flood the component and take its bounding box.
                    let mut stack = vec![(r, c)];
                    let (mut r0, mut r1, mut c0, mut c1) = (r, r, c, c);
                    seen[r][c] = true;
                    while let Some((cr, cc)) = stack.pop() {
                        r0 = r0.min(cr);
                        r1 = r1.max(cr);
                        c0 = c0.min(cc);
                        c1 = c1.max(cc);
                        let mut neighbors = Vec::new();
                        if cr > 0 {
                            neighbors.push((cr - 1, cc));
                        }
                        if cr + 1 < em.rows() {
                            neighbors.push((cr + 1, cc));
                        }
                        if cc > 0 {
                            neighbors.push((cr, cc - 1));
                        }
                        if cc + 1 < em.cols() {
                            neighbors.push((cr, cc + 1));
                        }
                        for (nr, nc) in neighbors {
                            if !seen[nr][nc] && em.get(nr, nc) == class {
                                seen[nr][nc] = true;
                                stack.push((nr, nc));
                            }
                        }
                    }
                    for rr in r0..=r1 {
                        for cc in c0..=c1 {
                            assert_eq!(em.get(rr, cc), class, "hole at ({rr},{cc})");
                        }
                    }
                }
            }
        }
    }
}
