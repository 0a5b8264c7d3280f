//! Word-level edit alignment with deterministic tie-breaking.
//!
//! The dynamic program is filled over suffixes so that the path can be read
//! off from the left: at every cell the cheapest move is taken, preferring a
//! diagonal move (match or substitution), then a deletion, then an insertion.
//! This fixes one canonical path among the optimal ones, independent of
//! platform or input order.

use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::transcript::TokenSequence;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum EditOp {
    Match { ref_index: usize, hyp_index: usize },
    Substitute { ref_index: usize, hyp_index: usize },
    Insert { hyp_index: usize },
    Delete { ref_index: usize },
}

impl EditOp {
    pub fn ref_index(&self) -> Option<usize> {
        match *self {
            EditOp::Match { ref_index, .. }
            | EditOp::Substitute { ref_index, .. }
            | EditOp::Delete { ref_index } => Some(ref_index),
            EditOp::Insert { .. } => None,
        }
    }

    pub fn hyp_index(&self) -> Option<usize> {
        match *self {
            EditOp::Match { hyp_index, .. }
            | EditOp::Substitute { hyp_index, .. }
            | EditOp::Insert { hyp_index } => Some(hyp_index),
            EditOp::Delete { .. } => None,
        }
    }

    pub fn is_match(&self) -> bool {
        matches!(self, EditOp::Match { .. })
    }

    /// Unit edit cost.
    pub fn cost(&self) -> usize {
        usize::from(!self.is_match())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignmentPath {
    pub ops: Vec<EditOp>,
    pub ref_len: usize,
    pub hyp_len: usize,
}

impl AlignmentPath {
    pub fn cost(&self) -> usize {
        self.ops.iter().map(EditOp::cost).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AlignmentCounts {
    pub substitutions: usize,
    pub deletions: usize,
    pub insertions: usize,
    /// Reference length.
    pub reference_len: usize,
}

impl AlignmentCounts {
    pub fn errors(&self) -> usize {
        self.substitutions + self.deletions + self.insertions
    }
}

/// Aligns two arbitrary sequences under unit costs.
pub fn align<T: PartialEq>(reference: &[T], hypothesis: &[T]) -> AlignmentPath {
    let n = reference.len();
    let m = hypothesis.len();
    let width = m + 1;
    // cost[i * width + j] = edit distance between reference[i..] and hypothesis[j..]
    let mut cost = vec![0u32; (n + 1) * width];
    for j in 0..=m {
        cost[n * width + j] = (m - j) as u32;
    }
    for i in (0..n).rev() {
        cost[i * width + m] = (n - i) as u32;
        for j in (0..m).rev() {
            let diag = cost[(i + 1) * width + j + 1] + u32::from(reference[i] != hypothesis[j]);
            let del = cost[(i + 1) * width + j] + 1;
            let ins = cost[i * width + j + 1] + 1;
            cost[i * width + j] = diag.min(del).min(ins);
        }
    }

    let mut ops = Vec::with_capacity(n.max(m));
    let (mut i, mut j) = (0, 0);
    while i < n || j < m {
        let here = cost[i * width + j];
        if i < n && j < m {
            let same = reference[i] == hypothesis[j];
            if cost[(i + 1) * width + j + 1] + u32::from(!same) == here {
                ops.push(if same {
                    EditOp::Match { ref_index: i, hyp_index: j }
                } else {
                    EditOp::Substitute { ref_index: i, hyp_index: j }
                });
                i += 1;
                j += 1;
                continue;
            }
        }
        if i < n && cost[(i + 1) * width + j] + 1 == here {
            ops.push(EditOp::Delete { ref_index: i });
            i += 1;
        } else {
            ops.push(EditOp::Insert { hyp_index: j });
            j += 1;
        }
    }
    AlignmentPath { ops, ref_len: n, hyp_len: m }
}

pub fn align_words(reference: &TokenSequence, hypothesis: &TokenSequence) -> AlignmentPath {
    align(&reference.tokens, &hypothesis.tokens)
}

pub fn count_ops(path: &AlignmentPath) -> AlignmentCounts {
    let mut counts = AlignmentCounts { reference_len: path.ref_len, ..Default::default() };
    for op in &path.ops {
        match op {
            EditOp::Match { .. } => {}
            EditOp::Substitute { .. } => counts.substitutions += 1,
            EditOp::Insert { .. } => counts.insertions += 1,
            EditOp::Delete { .. } => counts.deletions += 1,
        }
    }
    counts
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AlignError {
    #[error("span {start}..{end} is empty or outside reference of length {ref_len}")]
    Range { start: usize, end: usize, ref_len: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpanProjection {
    /// Hypothesis tokens aligned to the span. Empty (positioned where the span
    /// would have been) when every reference token was deleted.
    pub hyp_range: Range<usize>,
    pub ops: Vec<EditOp>,
    /// Positions of `ops[0]` and `ops[last]` within the path.
    pub path_range: Range<usize>,
}

/// Projects a reference span through an alignment.
///
/// The returned ops are those carrying a reference index inside the span,
/// plus insertions lying strictly between them, which belong to the unit.
pub fn project_span(path: &AlignmentPath, ref_span: Range<usize>) -> Result<SpanProjection, AlignError> {
    if ref_span.start >= ref_span.end || ref_span.end > path.ref_len {
        return Err(AlignError::Range {
            start: ref_span.start,
            end: ref_span.end,
            ref_len: path.ref_len,
        });
    }
    let touches = |op: &EditOp| op.ref_index().is_some_and(|r| ref_span.contains(&r));
    let first = path.ops.iter().position(touches).expect("valid path covers every ref index");
    let last = path.ops.iter().rposition(touches).expect("valid path covers every ref index");
    let ops = path.ops[first..=last].to_vec();

    let hyp_indices: Vec<usize> = ops.iter().filter_map(EditOp::hyp_index).collect();
    let hyp_range = match (hyp_indices.first(), hyp_indices.last()) {
        (Some(&lo), Some(&hi)) => lo..hi + 1,
        _ => {
            let at = hyp_position_before(path, first);
            at..at
        }
    };
    Ok(SpanProjection { hyp_range, ops, path_range: first..last + 1 })
}

/// Number of hypothesis tokens consumed before path position `pos`.
pub(crate) fn hyp_position_before(path: &AlignmentPath, pos: usize) -> usize {
    path.ops[..pos]
        .iter()
        .rev()
        .find_map(EditOp::hyp_index)
        .map_or(0, |h| h + 1)
}
