//! WER, speaker-attributed WER and medical-concept WER.
//!
//! Rates are kept as exact `Ratio<u64>` values and only converted to `f64`
//! for display and aggregation.

use std::collections::BTreeMap;
use std::ops::Range;

use num_rational::Ratio;
use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

use crate::align::{align, count_ops, project_span, AlignmentCounts, AlignmentPath, EditOp};
use crate::concepts::{lemmatize, ConceptAnnotation, ConceptCategory};
use crate::transcript::{tokenize_lenient, NormalizationConfig, SpeakerRole, TokenSequence, Transcript};

pub type Rate = Ratio<u64>;

pub fn rate_to_f64(rate: &Rate) -> f64 {
    *rate.numer() as f64 / *rate.denom() as f64
}

fn ser_rate<S: Serializer>(rate: &Rate, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64(rate_to_f64(rate))
}

fn ser_opt_rate<S: Serializer>(rate: &Option<Rate>, s: S) -> Result<S::Ok, S::Error> {
    match rate {
        Some(r) => s.serialize_f64(rate_to_f64(r)),
        None => s.serialize_none(),
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricError {
    #[error("reference has no tokens")]
    EmptyReference,
    #[error("hypothesis token {token} (turn {turn}) has no speaker label")]
    UndiarizedHypothesis { token: usize, turn: usize },
    #[error("{side} annotation {index} does not fit a sequence of {len} tokens")]
    AnnotationMismatch { side: &'static str, index: usize, len: usize },
    #[error("no values to summarize")]
    EmptyInput,
    #[error("value {index} is not finite")]
    NonFinite { index: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WerResult {
    pub counts: AlignmentCounts,
    #[serde(serialize_with = "ser_rate")]
    pub wer: Rate,
}

impl WerResult {
    pub fn from_counts(counts: AlignmentCounts) -> Result<Self, MetricError> {
        if counts.reference_len == 0 {
            return Err(MetricError::EmptyReference);
        }
        let wer = Ratio::new(counts.errors() as u64, counts.reference_len as u64);
        Ok(WerResult { counts, wer })
    }

    pub fn value(&self) -> f64 {
        rate_to_f64(&self.wer)
    }
}

pub fn compute_wer(reference: &TokenSequence, hypothesis: &TokenSequence) -> Result<WerResult, MetricError> {
    if reference.is_empty() {
        return Err(MetricError::EmptyReference);
    }
    WerResult::from_counts(count_ops(&align(&reference.tokens, &hypothesis.tokens)))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SpeakerWerResult {
    /// One entry per role present in the reference (Doctor, Patient).
    pub per_role: BTreeMap<SpeakerRole, WerResult>,
    /// Roles with no reference tokens.
    pub absent_roles: Vec<SpeakerRole>,
    /// Words that show up as a deletion in one role's stream and an insertion
    /// of the same word in the other role's stream.
    pub misattributed_words: usize,
    pub attributed_reference_words: usize,
}

impl SpeakerWerResult {
    /// Fraction of attributed reference words assigned to the wrong speaker.
    pub fn diarization_error_rate(&self) -> Option<Rate> {
        (self.attributed_reference_words > 0).then(|| {
            Ratio::new(self.misattributed_words as u64, self.attributed_reference_words as u64)
        })
    }
}

const ROLES: [SpeakerRole; 2] = [SpeakerRole::Doctor, SpeakerRole::Patient];

/// Scores each speaker role's word stream separately. The reference stream
/// for a role is the concatenation of that role's turns; the hypothesis
/// stream is whatever the hypothesis attributes to it. No timestamps are
/// needed: misattributed words surface as deletions in one stream and
/// insertions in the other.
pub fn compute_speaker_wer(
    reference: &Transcript,
    hypothesis: &Transcript,
    cfg: &NormalizationConfig,
) -> Result<SpeakerWerResult, MetricError> {
    let ref_seq = tokenize_lenient(reference, cfg);
    let hyp_seq = tokenize_lenient(hypothesis, cfg);
    if let Some(i) = hyp_seq.origin.iter().position(|o| o.speaker == SpeakerRole::Unknown) {
        return Err(MetricError::UndiarizedHypothesis { token: i, turn: hyp_seq.origin[i].turn });
    }

    let mut per_role = BTreeMap::new();
    let mut absent_roles = Vec::new();
    let mut deleted: BTreeMap<SpeakerRole, Vec<String>> = BTreeMap::new();
    let mut inserted: BTreeMap<SpeakerRole, Vec<String>> = BTreeMap::new();
    let mut attributed = 0;

    for role in ROLES {
        let r = ref_seq.filter_role(role);
        let h = hyp_seq.filter_role(role);
        let path = align(&r.tokens, &h.tokens);
        attributed += r.len();
        let (del, ins) = unmatched_words(&path, &r, &h);
        deleted.insert(role, del);
        inserted.insert(role, ins);
        if r.is_empty() {
            absent_roles.push(role);
        } else {
            per_role.insert(role, WerResult::from_counts(count_ops(&path))?);
        }
    }
    if attributed == 0 {
        return Err(MetricError::EmptyReference);
    }

    let mut misattributed = 0;
    for role in ROLES {
        let other = if role == SpeakerRole::Doctor { SpeakerRole::Patient } else { SpeakerRole::Doctor };
        misattributed += multiset_overlap(&deleted[&role], &inserted[&other]);
    }

    Ok(SpeakerWerResult {
        per_role,
        absent_roles,
        misattributed_words: misattributed,
        attributed_reference_words: attributed,
    })
}

fn unmatched_words(path: &AlignmentPath, r: &TokenSequence, h: &TokenSequence) -> (Vec<String>, Vec<String>) {
    let mut del = Vec::new();
    let mut ins = Vec::new();
    for op in &path.ops {
        match *op {
            EditOp::Delete { ref_index } => del.push(r.tokens[ref_index].clone()),
            EditOp::Insert { hyp_index } => ins.push(h.tokens[hyp_index].clone()),
            _ => {}
        }
    }
    (del, ins)
}

fn multiset_overlap(a: &[String], b: &[String]) -> usize {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for w in a {
        *counts.entry(w).or_default() += 1;
    }
    b.iter()
        .filter(|w| match counts.get_mut(w.as_str()) {
            Some(c) if *c > 0 => {
                *c -= 1;
                true
            }
            _ => false,
        })
        .count()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum McWerVariant {
    Lemmatized,
    NonLemmatized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CategoryCounts {
    pub substitutions: usize,
    pub deletions: usize,
    pub insertions: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct McWerCounts {
    pub substitutions: usize,
    pub deletions: usize,
    pub insertions: usize,
    /// Reference concept count.
    pub concepts: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum ConceptOutcome {
    Correct,
    Substituted { hyp_surface: String },
    Deleted,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConceptResult {
    pub span: Range<usize>,
    pub surface: String,
    pub category: ConceptCategory,
    pub outcome: ConceptOutcome,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InsertedConcept {
    pub span: Range<usize>,
    pub surface: String,
    pub category: ConceptCategory,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct McWerResult {
    pub counts: McWerCounts,
    /// `None` when the reference has no concepts.
    #[serde(serialize_with = "ser_opt_rate")]
    pub mc_wer: Option<Rate>,
    pub variant: McWerVariant,
    pub per_category: BTreeMap<ConceptCategory, CategoryCounts>,
    /// One entry per reference concept, in reference order.
    pub concepts: Vec<ConceptResult>,
    pub insertions: Vec<InsertedConcept>,
}

impl McWerResult {
    pub fn value(&self) -> Option<f64> {
        self.mc_wer.as_ref().map(rate_to_f64)
    }
}

fn check_spans(side: &'static str, anns: &[ConceptAnnotation], len: usize) -> Result<(), MetricError> {
    let mut prev_end = 0;
    for (index, ann) in anns.iter().enumerate() {
        if ann.span.start >= ann.span.end || ann.span.end > len || (index > 0 && ann.span.start < prev_end) {
            return Err(MetricError::AnnotationMismatch { side, index, len });
        }
        prev_end = ann.span.end;
    }
    Ok(())
}

/// Scores medical concepts as indivisible units.
///
/// Each reference concept is projected through the word alignment and ends
/// up in exactly one of three states:
/// - correct, when every aligned op is a match or the aligned hypothesis text
///   equals the concept (after lemmatization for the lemmatized variant);
/// - deleted, when every reference word was deleted and no substituted
///   neighbor could stand in for it;
/// - substituted otherwise, however many word errors that involved.
///
/// A substituted concept's hypothesis window is widened over adjacent
/// unclaimed insertions (so `hypertension` -> `high tension` records the
/// substituting text `high tension`). A concept whose window is empty borrows
/// an adjacent substitution that belongs to no other reference concept.
/// Hypothesis concepts count as insertions only when every token lies on an
/// insertion outside every reference concept's window.
pub fn compute_mc_wer(
    reference: &TokenSequence,
    hypothesis: &TokenSequence,
    ref_ann: &[ConceptAnnotation],
    hyp_ann: &[ConceptAnnotation],
    variant: McWerVariant,
) -> Result<McWerResult, MetricError> {
    check_spans("reference", ref_ann, reference.len())?;
    check_spans("hypothesis", hyp_ann, hypothesis.len())?;

    let path = align(&reference.tokens, &hypothesis.tokens);
    let mut in_ref_concept = vec![false; reference.len()];
    let mut claimed = vec![false; path.ops.len()];
    let mut projections = Vec::with_capacity(ref_ann.len());
    for ann in ref_ann {
        let proj = project_span(&path, ann.span.clone()).expect("spans checked above");
        claimed[proj.path_range.clone()].iter_mut().for_each(|c| *c = true);
        in_ref_concept[ann.span.clone()].iter_mut().for_each(|c| *c = true);
        projections.push(proj);
    }

    let same = |a: &str, b: &str| match variant {
        McWerVariant::NonLemmatized => a == b,
        McWerVariant::Lemmatized => lemmatize(a) == lemmatize(b),
    };

    let mut counts = McWerCounts { concepts: ref_ann.len(), ..Default::default() };
    let mut per_category: BTreeMap<ConceptCategory, CategoryCounts> = BTreeMap::new();
    let mut concepts = Vec::with_capacity(ref_ann.len());

    for (ann, proj) in ref_ann.iter().zip(&projections) {
        let outcome = if proj.ops.iter().all(EditOp::is_match) {
            ConceptOutcome::Correct
        } else if proj.hyp_range.is_empty() {
            let mut borrowed = Vec::new();
            let neighbors = [proj.path_range.start.checked_sub(1), Some(proj.path_range.end)];
            for pos in neighbors.into_iter().flatten() {
                if let Some(EditOp::Substitute { ref_index, hyp_index }) = path.ops.get(pos) {
                    if !in_ref_concept[*ref_index] && !claimed[pos] {
                        claimed[pos] = true;
                        borrowed.push(hypothesis.tokens[*hyp_index].clone());
                    }
                }
            }
            if borrowed.is_empty() {
                ConceptOutcome::Deleted
            } else {
                ConceptOutcome::Substituted { hyp_surface: borrowed.join(" ") }
            }
        } else {
            let mut lo = proj.path_range.start;
            while lo > 0 && !claimed[lo - 1] && matches!(path.ops[lo - 1], EditOp::Insert { .. }) {
                lo -= 1;
                claimed[lo] = true;
            }
            let mut hi = proj.path_range.end;
            while hi < path.ops.len() && !claimed[hi] && matches!(path.ops[hi], EditOp::Insert { .. }) {
                claimed[hi] = true;
                hi += 1;
            }
            let window: Vec<&str> = path.ops[lo..hi]
                .iter()
                .filter_map(EditOp::hyp_index)
                .map(|h| hypothesis.tokens[h].as_str())
                .collect();
            let hyp_text = window.join(" ");
            if same(&ann.surface, &hyp_text) {
                ConceptOutcome::Correct
            } else {
                ConceptOutcome::Substituted { hyp_surface: hyp_text }
            }
        };

        let cat = per_category.entry(ann.category.clone()).or_default();
        match outcome {
            ConceptOutcome::Correct => {}
            ConceptOutcome::Substituted { .. } => {
                counts.substitutions += 1;
                cat.substitutions += 1;
            }
            ConceptOutcome::Deleted => {
                counts.deletions += 1;
                cat.deletions += 1;
            }
        }
        concepts.push(ConceptResult {
            span: ann.span.clone(),
            surface: ann.surface.clone(),
            category: ann.category.clone(),
            outcome,
        });
    }

    let mut hyp_pos = vec![usize::MAX; hypothesis.len()];
    for (pos, op) in path.ops.iter().enumerate() {
        if let Some(h) = op.hyp_index() {
            hyp_pos[h] = pos;
        }
    }
    let mut insertions = Vec::new();
    for ann in hyp_ann {
        let spurious = ann.span.clone().all(|h| {
            let pos = hyp_pos[h];
            matches!(path.ops[pos], EditOp::Insert { .. }) && !claimed[pos]
        });
        if spurious {
            counts.insertions += 1;
            per_category.entry(ann.category.clone()).or_default().insertions += 1;
            insertions.push(InsertedConcept {
                span: ann.span.clone(),
                surface: ann.surface.clone(),
                category: ann.category.clone(),
            });
        }
    }
    per_category.retain(|_, c| c.substitutions + c.deletions + c.insertions > 0);

    let mc_wer = (counts.concepts > 0).then(|| {
        Ratio::new((counts.substitutions + counts.deletions + counts.insertions) as u64, counts.concepts as u64)
    });
    Ok(McWerResult { counts, mc_wer, variant, per_category, concepts, insertions })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistributionSummary {
    pub n: usize,
    pub mean: f64,
    /// Population standard deviation.
    pub std_dev: f64,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

/// Compensated (Neumaier) summation.
fn sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut total = 0.0f64;
    let mut carry = 0.0f64;
    for v in values {
        let t = total + v;
        if total.abs() >= v.abs() {
            carry += (total - t) + v;
        } else {
            carry += (v - t) + total;
        }
        total = t;
    }
    total + carry
}

/// Linear interpolation between closest ranks (`p` in `[0, 1]`).
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = p * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn summarize(values: &[f64]) -> Result<DistributionSummary, MetricError> {
    if values.is_empty() {
        return Err(MetricError::EmptyInput);
    }
    if let Some(index) = values.iter().position(|v| !v.is_finite()) {
        return Err(MetricError::NonFinite { index });
    }
    let n = values.len() as f64;
    let mean = sum(values.iter().copied()) / n;
    let variance = sum(values.iter().map(|v| (v - mean) * (v - mean))) / n;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(DistributionSummary {
        n: values.len(),
        mean,
        std_dev: variance.sqrt(),
        min: sorted[0],
        q1: quantile(&sorted, 0.25),
        median: quantile(&sorted, 0.5),
        q3: quantile(&sorted, 0.75),
        max: sorted[sorted.len() - 1],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(s: &str) -> TokenSequence {
        TokenSequence::from_text(s)
    }

    fn concept(seq: &TokenSequence, span: Range<usize>, cat: ConceptCategory) -> ConceptAnnotation {
        let surface = seq.join(span.clone());
        ConceptAnnotation { span, lemma: lemmatize(&surface), surface, category: cat }
    }

    #[test]
    fn wer_examples() {
        let r = seq("the patient has hypertension");
        assert_eq!(compute_wer(&r, &r).unwrap().wer, Ratio::new(0, 1));
        let w = compute_wer(&r, &seq("the patient has high tension")).unwrap();
        assert_eq!((w.counts.substitutions, w.counts.insertions, w.counts.reference_len), (1, 1, 4));
        assert_eq!(w.wer, Ratio::new(1, 2));
        assert_eq!(compute_wer(&r, &seq("")).unwrap().wer, Ratio::new(1, 1));
        assert_eq!(compute_wer(&seq(""), &r), Err(MetricError::EmptyReference));
    }

    #[test]
    fn wer_can_exceed_one() {
        let w = compute_wer(&seq("a"), &seq("b c d")).unwrap();
        assert_eq!(w.wer, Ratio::new(3, 1));
    }

    #[test]
    fn compound_split_is_one_concept_substitution() {
        let r = seq("the patient has hypertension");
        let h = seq("the patient has high tension");
        let ra = vec![concept(&r, 3..4, ConceptCategory::MedicalProblem)];
        let res = compute_mc_wer(&r, &h, &ra, &[], McWerVariant::NonLemmatized).unwrap();
        assert_eq!(res.counts, McWerCounts { substitutions: 1, deletions: 0, insertions: 0, concepts: 1 });
        assert_eq!(res.mc_wer, Some(Ratio::new(1, 1)));
        assert_eq!(
            res.concepts[0].outcome,
            ConceptOutcome::Substituted { hyp_surface: "high tension".into() }
        );
    }

    #[test]
    fn drug_swap_is_a_substitution() {
        let r = seq("start amoxicillin today");
        let h = seq("start ampicillin today");
        let ra = vec![concept(&r, 1..2, ConceptCategory::Medication)];
        let ha = vec![concept(&h, 1..2, ConceptCategory::Medication)];
        let res = compute_mc_wer(&r, &h, &ra, &ha, McWerVariant::NonLemmatized).unwrap();
        assert_eq!(res.counts.substitutions, 1);
        assert_eq!(res.counts.insertions, 0);
    }

    #[test]
    fn lemmatized_variant_forgives_plurals() {
        let r = seq("antibiotics");
        let h = seq("antibiotic");
        let ra = vec![concept(&r, 0..1, ConceptCategory::Medication)];
        let ha = vec![concept(&h, 0..1, ConceptCategory::Medication)];
        let plain = compute_mc_wer(&r, &h, &ra, &ha, McWerVariant::NonLemmatized).unwrap();
        assert_eq!(plain.mc_wer, Some(Ratio::new(1, 1)));
        let lemma = compute_mc_wer(&r, &h, &ra, &ha, McWerVariant::Lemmatized).unwrap();
        assert_eq!(lemma.mc_wer, Some(Ratio::new(0, 1)));
    }

    #[test]
    fn fully_deleted_concept() {
        let r = seq("you have malaria now");
        let h = seq("you have now");
        let ra = vec![concept(&r, 2..3, ConceptCategory::MedicalProblem)];
        let res = compute_mc_wer(&r, &h, &ra, &[], McWerVariant::NonLemmatized).unwrap();
        assert_eq!(res.counts.deletions, 1);
        assert_eq!(res.concepts[0].outcome, ConceptOutcome::Deleted);
    }

    #[test]
    fn empty_window_borrows_neighbor_substitution() {
        // "a X b" vs "Y": a->Y substituted, X and b deleted. X borrows Y.
        let r = seq("a metformin b");
        let h = seq("y");
        let ra = vec![concept(&r, 1..2, ConceptCategory::Medication)];
        let res = compute_mc_wer(&r, &h, &ra, &[], McWerVariant::NonLemmatized).unwrap();
        assert_eq!(res.concepts[0].outcome, ConceptOutcome::Substituted { hyp_surface: "y".into() });
    }

    #[test]
    fn spurious_hypothesis_concept_is_an_insertion() {
        let r = seq("take it daily");
        let h = seq("take it with aspirin daily");
        let ha = vec![concept(&h, 3..4, ConceptCategory::Medication)];
        let res = compute_mc_wer(&r, &h, &[], &ha, McWerVariant::NonLemmatized).unwrap();
        assert_eq!(res.counts.insertions, 1);
        assert_eq!(res.mc_wer, None);
        assert_eq!(res.per_category[&ConceptCategory::Medication].insertions, 1);
    }

    #[test]
    fn insertions_inside_a_substituted_window_are_folded() {
        let r = seq("has hypertension today");
        let h = seq("has high aspirin today");
        let ra = vec![concept(&r, 1..2, ConceptCategory::MedicalProblem)];
        let ha = vec![concept(&h, 2..3, ConceptCategory::Medication)];
        let res = compute_mc_wer(&r, &h, &ra, &ha, McWerVariant::NonLemmatized).unwrap();
        assert_eq!(res.counts, McWerCounts { substitutions: 1, deletions: 0, insertions: 0, concepts: 1 });
    }

    #[test]
    fn annotation_outside_sequence_is_rejected() {
        let r = seq("a b");
        let bad = ConceptAnnotation {
            span: 1..3,
            surface: "b c".into(),
            category: ConceptCategory::Procedure,
            lemma: "b c".into(),
        };
        assert!(matches!(
            compute_mc_wer(&r, &r, &[bad], &[], McWerVariant::NonLemmatized),
            Err(MetricError::AnnotationMismatch { side: "reference", .. })
        ));
    }

    #[test]
    fn summarize_examples() {
        let s = summarize(&[0.1, 0.2, 0.3]).unwrap();
        assert!((s.mean - 0.2).abs() < 1e-15);
        assert!((s.median - 0.2).abs() < 1e-15);
        let s = summarize(&[0.5]).unwrap();
        assert_eq!((s.mean, s.std_dev, s.q1, s.q3), (0.5, 0.0, 0.5, 0.5));
        assert_eq!(summarize(&[]), Err(MetricError::EmptyInput));
        assert_eq!(summarize(&[1.0, f64::NAN]), Err(MetricError::NonFinite { index: 1 }));
    }

    #[test]
    fn quartiles_interpolate_linearly() {
        let s = summarize(&[4.0, 1.0, 3.0, 2.0]).unwrap();
        assert_eq!((s.q1, s.median, s.q3), (1.75, 2.5, 3.25));
        assert!((s.std_dev - 1.25f64.sqrt()).abs() < 1e-15);
    }
}
