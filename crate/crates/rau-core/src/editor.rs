//! Apply an edit matrix to (context, incomplete) token sequences to produce
//! the rewritten utterance.

use std::ops::Range;

use crate::edit::{EditClass, EditMatrix};
use crate::error::{RauError, Result};

/// A connected component of one edit class, rectangularized to its bounding
/// box. Predicted matrices do not guarantee rectangles; the box is the
/// minimal-assumption completion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EditGroup {
    pub kind: EditClass,
    pub rows: Range<usize>,
    pub cols: Range<usize>,
}

/// Result of applying an edit matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EditOutcome {
    pub tokens: Vec<String>,
    /// Predicted groups skipped because they overlapped an earlier group.
    pub skipped_groups: usize,
}

/// Extract 4-connected components per non-None class as bounding-box groups,
/// sorted by leftmost column then topmost row.
pub fn extract_groups(em: &EditMatrix) -> Vec<EditGroup> {
    let rows = em.rows();
    let cols = em.cols();
    let mut seen = vec![false; rows * cols];
    let mut groups = Vec::new();

    for r in 0..rows {
        for c in 0..cols {
            let class = em.get(r, c);
            if class == EditClass::None || seen[r * cols + c] {
                continue;
            }
            let mut stack = vec![(r, c)];
            seen[r * cols + c] = true;
            let (mut r0, mut r1, mut c0, mut c1) = (r, r, c, c);
            while let Some((cr, cc)) = stack.pop() {
                r0 = r0.min(cr);
                r1 = r1.max(cr);
                c0 = c0.min(cc);
                c1 = c1.max(cc);
                let mut visit = |nr: usize, nc: usize, stack: &mut Vec<(usize, usize)>| {
                    if !seen[nr * cols + nc] && em.get(nr, nc) == class {
                        seen[nr * cols + nc] = true;
                        stack.push((nr, nc));
                    }
                };
                if cr > 0 {
                    visit(cr - 1, cc, &mut stack);
                }
                if cr + 1 < rows {
                    visit(cr + 1, cc, &mut stack);
                }
                if cc > 0 {
                    visit(cr, cc - 1, &mut stack);
                }
                if cc + 1 < cols {
                    visit(cr, cc + 1, &mut stack);
                }
            }
            groups.push(EditGroup {
                kind: class,
                rows: r0..r1 + 1,
                cols: c0..c1 + 1,
            });
        }
    }
    groups.sort_by_key(|g| (g.cols.start, g.rows.start, g.kind.index()));
    groups
}

/// Rewrite `x` by applying the matrix's groups left-to-right: a Substitute
/// group replaces its x columns with its context rows, an Insert group
/// inserts its context rows before its leftmost column (the virtual column N
/// appends after the last token). A group whose columns touch a column
/// already claimed by an earlier group is skipped and counted.
pub fn apply(context: &[String], x: &[String], em: &EditMatrix) -> Result<EditOutcome> {
    if em.rows() != context.len() || em.real_cols() != x.len() {
        return Err(RauError::ShapeError(format!(
            "edit matrix {}x{} does not match |c|={} |x|={}",
            em.rows(),
            em.real_cols(),
            context.len(),
            x.len()
        )));
    }
    let n = x.len();
    let groups = extract_groups(em);

    // Leftmost-first conflict resolution over claimed columns. An Insert
    // claims only its anchor column; a Substitute claims its whole interval.
    let mut claimed = vec![false; n + 1];
    let mut skipped = 0;
    let mut inserts_before: Vec<Option<&EditGroup>> = vec![None; n + 1];
    let mut substitute_at: Vec<Option<&EditGroup>> = vec![None; n];
    for group in &groups {
        let cols: Vec<usize> = match group.kind {
            EditClass::Insert => vec![group.cols.start],
            EditClass::Substitute => group.cols.clone().filter(|&c| c < n).collect(),
            EditClass::None => unreachable!("groups carry non-None classes"),
        };
        if cols.is_empty() || cols.iter().any(|&c| claimed[c]) {
            skipped += 1;
            continue;
        }
        for &c in &cols {
            claimed[c] = true;
        }
        match group.kind {
            EditClass::Insert => inserts_before[group.cols.start] = Some(group),
            EditClass::Substitute => substitute_at[cols[0]] = Some(group),
            EditClass::None => unreachable!(),
        }
    }

    let mut tokens = Vec::with_capacity(n + context.len());
    let mut consumed_until = 0;
    for j in 0..=n {
        if let Some(group) = inserts_before[j] {
            tokens.extend(context[group.rows.clone()].iter().cloned());
        }
        if j == n {
            break;
        }
        if let Some(group) = substitute_at[j] {
            tokens.extend(context[group.rows.clone()].iter().cloned());
            consumed_until = group.cols.end.min(n);
        }
        if j >= consumed_until {
            tokens.push(x[j].clone());
        }
    }

    Ok(EditOutcome {
        tokens,
        skipped_groups: skipped,
    })
}
