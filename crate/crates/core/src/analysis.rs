//! Before/after comparisons of concept errors.

use std::collections::BTreeMap;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::concepts::ConceptCategory;
use crate::metrics::{CategoryCounts, ConceptOutcome, McWerResult, McWerVariant, Rate};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AnalysisError {
    #[error("cannot compare {before:?} results with {after:?} results")]
    VariantMismatch { before: McWerVariant, after: McWerVariant },
    #[error("before and after results cover different reference concepts")]
    ConceptMismatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    Substitution,
    Insertion,
    Deletion,
}

impl ErrorKind {
    pub const ALL: [ErrorKind; 3] = [ErrorKind::Substitution, ErrorKind::Insertion, ErrorKind::Deletion];

    pub fn label(self) -> &'static str {
        match self {
            ErrorKind::Substitution => "substitution",
            ErrorKind::Insertion => "insertion",
            ErrorKind::Deletion => "deletion",
        }
    }

    fn of(self, c: &CategoryCounts) -> usize {
        match self {
            ErrorKind::Substitution => c.substitutions,
            ErrorKind::Insertion => c.insertions,
            ErrorKind::Deletion => c.deletions,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryDelta {
    pub category: ConceptCategory,
    pub kind: ErrorKind,
    pub before: usize,
    pub after: usize,
    /// `after - before`; negative means fewer errors after correction.
    pub delta: i64,
}

/// Sums per-category counts over many conversations.
pub fn merge_category_counts<'a>(
    results: impl IntoIterator<Item = &'a McWerResult>,
) -> BTreeMap<ConceptCategory, CategoryCounts> {
    let mut total: BTreeMap<ConceptCategory, CategoryCounts> = BTreeMap::new();
    for result in results {
        for (cat, c) in &result.per_category {
            let t = total.entry(cat.clone()).or_default();
            t.substitutions += c.substitutions;
            t.deletions += c.deletions;
            t.insertions += c.insertions;
        }
    }
    total
}

/// One delta per (category, kind) that has errors before or after,
/// ordered by magnitude of change (largest first).
pub fn deltas_from_counts(
    before: &BTreeMap<ConceptCategory, CategoryCounts>,
    after: &BTreeMap<ConceptCategory, CategoryCounts>,
) -> Vec<CategoryDelta> {
    let zero = CategoryCounts::default();
    let mut cats: Vec<&ConceptCategory> = before.keys().chain(after.keys()).collect();
    cats.sort();
    cats.dedup();

    let mut out = Vec::new();
    for cat in cats {
        let b = before.get(cat).unwrap_or(&zero);
        let a = after.get(cat).unwrap_or(&zero);
        for kind in ErrorKind::ALL {
            let (before, after) = (kind.of(b), kind.of(a));
            if before > 0 || after > 0 {
                out.push(CategoryDelta {
                    category: cat.clone(),
                    kind,
                    before,
                    after,
                    delta: after as i64 - before as i64,
                });
            }
        }
    }
    // Stable sort keeps category/kind order among equal magnitudes.
    out.sort_by_key(|d| std::cmp::Reverse(d.delta.unsigned_abs()));
    out
}

pub fn category_deltas(before: &McWerResult, after: &McWerResult) -> Result<Vec<CategoryDelta>, AnalysisError> {
    if before.variant != after.variant {
        return Err(AnalysisError::VariantMismatch { before: before.variant, after: after.variant });
    }
    Ok(deltas_from_counts(&before.per_category, &after.per_category))
}

/// Character-level Levenshtein distance over Unicode scalar values.
pub fn char_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubstitutionRecord {
    pub ref_surface: String,
    pub hyp_surface: String,
    pub category: ConceptCategory,
    pub char_distance: usize,
    /// The concept is correct after correction (a different wrong surface
    /// does not count).
    pub resolved_by_correction: bool,
}

/// Substitutions present before correction, each flagged with whether the
/// same reference concept is correct afterwards.
pub fn substitution_records(
    before: &McWerResult,
    after: &McWerResult,
) -> Result<Vec<SubstitutionRecord>, AnalysisError> {
    if before.variant != after.variant {
        return Err(AnalysisError::VariantMismatch { before: before.variant, after: after.variant });
    }
    if before.concepts.len() != after.concepts.len()
        || before.concepts.iter().zip(&after.concepts).any(|(b, a)| b.span != a.span)
    {
        return Err(AnalysisError::ConceptMismatch);
    }
    Ok(before
        .concepts
        .iter()
        .zip(&after.concepts)
        .filter_map(|(b, a)| match &b.outcome {
            ConceptOutcome::Substituted { hyp_surface } => Some(SubstitutionRecord {
                ref_surface: b.surface.clone(),
                hyp_surface: hyp_surface.clone(),
                category: b.category.clone(),
                char_distance: char_distance(&b.surface, hyp_surface),
                resolved_by_correction: a.outcome == ConceptOutcome::Correct,
            }),
            _ => None,
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CharDiffReport {
    pub threshold: usize,
    pub total: usize,
    /// Substitutions with `char_distance < threshold`.
    pub low_diff: usize,
    pub low_diff_resolved: usize,
    /// `low_diff / total`, `None` when there are no substitutions.
    #[serde(serialize_with = "ser_fraction")]
    pub low_diff_fraction: Option<Rate>,
    /// `low_diff_resolved / low_diff`, `None` when there are no low-difference substitutions.
    #[serde(serialize_with = "ser_fraction")]
    pub resolved_fraction: Option<Rate>,
}

fn ser_fraction<S: serde::Serializer>(r: &Option<Rate>, s: S) -> Result<S::Ok, S::Error> {
    match r {
        Some(r) => s.serialize_f64(crate::metrics::rate_to_f64(r)),
        None => s.serialize_none(),
    }
}

pub const LOW_DIFF_THRESHOLD: usize = 5;

pub fn char_diff_report(pre_subs: &[SubstitutionRecord], threshold: usize) -> CharDiffReport {
    let total = pre_subs.len();
    let low: Vec<&SubstitutionRecord> = pre_subs.iter().filter(|r| r.char_distance < threshold).collect();
    let low_diff = low.len();
    let low_diff_resolved = low.iter().filter(|r| r.resolved_by_correction).count();
    CharDiffReport {
        threshold,
        total,
        low_diff,
        low_diff_resolved,
        low_diff_fraction: (total > 0).then(|| Ratio::new(low_diff as u64, total as u64)),
        resolved_fraction: (low_diff > 0).then(|| Ratio::new(low_diff_resolved as u64, low_diff as u64)),
    }
}
