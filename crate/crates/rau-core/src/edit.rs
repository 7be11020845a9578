//! The token-level edit grid shared by the segmenter, labeler, and editor.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

/// Edit operation assigned to one (context token, incomplete token) cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum EditClass {
    None = 0,
    Substitute = 1,
    Insert = 2,
}

impl EditClass {
    pub const COUNT: usize = 3;

    pub fn from_index(idx: usize) -> Option<EditClass> {
        match idx {
            0 => Some(EditClass::None),
            1 => Some(EditClass::Substitute),
            2 => Some(EditClass::Insert),
            _ => None,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

/// M×N grid of edit operations. Rows index context tokens, columns index
/// incomplete-utterance tokens. Gold matrices built by the labeler may carry
/// one extra "virtual" column at index N that anchors insertions after the
/// last incomplete-utterance token.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EditMatrix {
    cells: Array2<EditClass>,
    /// Number of real incomplete-utterance columns (excludes the virtual one).
    real_cols: usize,
}

impl EditMatrix {
    /// All-None matrix without a virtual column.
    pub fn all_none(rows: usize, cols: usize) -> EditMatrix {
        EditMatrix {
            cells: Array2::from_elem((rows, cols), EditClass::None),
            real_cols: cols,
        }
    }

    /// All-None matrix with a virtual end-insertion column appended.
    pub fn all_none_with_virtual(rows: usize, cols: usize) -> EditMatrix {
        EditMatrix {
            cells: Array2::from_elem((rows, cols + 1), EditClass::None),
            real_cols: cols,
        }
    }

    pub fn rows(&self) -> usize {
        self.cells.nrows()
    }

    /// Total columns including the virtual one when present.
    pub fn cols(&self) -> usize {
        self.cells.ncols()
    }

    /// Columns excluding the virtual one.
    pub fn real_cols(&self) -> usize {
        self.real_cols
    }

    pub fn has_virtual_col(&self) -> bool {
        self.cells.ncols() > self.real_cols
    }

    pub fn get(&self, row: usize, col: usize) -> EditClass {
        self.cells[[row, col]]
    }

    pub fn set(&mut self, row: usize, col: usize, class: EditClass) {
        self.cells[[row, col]] = class;
    }

    /// Drop the virtual column, if any. Gold matrices are cropped this way
    /// before being compared or used as supervision for an M×N logit map.
    pub fn without_virtual_col(&self) -> EditMatrix {
        if !self.has_virtual_col() {
            return self.clone();
        }
        let mut out = EditMatrix::all_none(self.rows(), self.real_cols);
        for r in 0..self.rows() {
            for c in 0..self.real_cols {
                out.set(r, c, self.get(r, c));
            }
        }
        out
    }

    /// Cells as a flat row-major iterator.
    pub fn iter(&self) -> impl Iterator<Item = EditClass> + '_ {
        self.cells.iter().copied()
    }

    /// Count of cells per class, indexed by `EditClass::index`.
    pub fn class_counts(&self) -> [usize; EditClass::COUNT] {
        let mut counts = [0usize; EditClass::COUNT];
        for class in self.iter() {
            counts[class.index()] += 1;
        }
        counts
    }

    /// Row-major run-length encoding, `class*len` runs joined by commas.
    pub fn to_rle(&self) -> String {
        let mut runs: Vec<(usize, usize)> = Vec::new();
        for class in self.iter() {
            match runs.last_mut() {
                Some((c, len)) if *c == class.index() => *len += 1,
                _ => runs.push((class.index(), 1)),
            }
        }
        runs.iter()
            .map(|(c, len)| format!("{c}*{len}"))
            .collect::<Vec<_>>()
            .join(",")
    }
}
