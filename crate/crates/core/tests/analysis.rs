mod common;

use std::collections::BTreeMap;

use proptest::prelude::*;

use medscore::analysis::{
    category_deltas, char_diff_report, char_distance, deltas_from_counts, merge_category_counts, substitution_records,
    ErrorKind, SubstitutionRecord,
};
use medscore::concepts::{lemmatize, ConceptAnnotation, ConceptCategory};
use medscore::metrics::{compute_mc_wer, CategoryCounts, McWerResult, McWerVariant};
use medscore::transcript::TokenSequence;

fn concept(seq: &TokenSequence, span: std::ops::Range<usize>, category: ConceptCategory) -> ConceptAnnotation {
    let surface = seq.join(span.clone());
    ConceptAnnotation { span, lemma: lemmatize(&surface), surface, category }
}

fn scored(reference: &str, r_ann: &[(usize, usize, ConceptCategory)], hyp: &str, h_ann: &[(usize, usize, ConceptCategory)]) -> McWerResult {
    let r = TokenSequence::from_text(reference);
    let h = TokenSequence::from_text(hyp);
    let ra: Vec<_> = r_ann.iter().map(|(a, b, c)| concept(&r, *a..*b, c.clone())).collect();
    let ha: Vec<_> = h_ann.iter().map(|(a, b, c)| concept(&h, *a..*b, c.clone())).collect();
    compute_mc_wer(&r, &h, &ra, &ha, McWerVariant::Lemmatized).unwrap()
}

#[test]
fn correction_that_adds_medications_shows_a_positive_delta() {
    use ConceptCategory::{MedicalProblem, Medication};
    let reference = "she has a cough today";
    let refs = [(3, 4, MedicalProblem)];
    // Before correction: the cough is misheard, nothing else changes.
    let before = scored(reference, &refs, "she has a couch today", &[]);
    // After correction: the cough is fixed but two drugs were invented.
    let after = scored(
        "she has a cough today",
        &refs,
        "she has a cough today aspirin ibuprofen",
        &[(3, 4, MedicalProblem), (5, 6, Medication), (6, 7, Medication)],
    );
    let deltas = category_deltas(&before, &after).unwrap();
    let find = |cat: ConceptCategory, kind| deltas.iter().find(|d| d.category == cat && d.kind == kind).cloned();
    let meds = find(Medication, ErrorKind::Insertion).unwrap();
    assert_eq!((meds.before, meds.after, meds.delta), (0, 2, 2));
    let cough = find(MedicalProblem, ErrorKind::Substitution).unwrap();
    assert_eq!(cough.delta, -1);
    assert_eq!(deltas[0], meds, "largest change first");
}

#[test]
fn identical_counts_give_all_zero_deltas() {
    let result = scored("a cough", &[(1, 2, ConceptCategory::MedicalProblem)], "a couch", &[]);
    let deltas = category_deltas(&result, &result).unwrap();
    assert!(!deltas.is_empty());
    assert!(deltas.iter().all(|d| d.delta == 0));
    let clean = scored("a cough", &[(1, 2, ConceptCategory::MedicalProblem)], "a cough", &[]);
    assert!(category_deltas(&clean, &clean).unwrap().is_empty());
}

#[test]
fn substitutions_are_flagged_when_resolved() {
    use ConceptCategory::Medication;
    let reference = "take fexofenadine and amoxicillin";
    let refs = [(1, 2, Medication), (3, 4, Medication)];
    let before = scored(reference, &refs, "take fexifenadine and ampicillin", &[]);
    let after = scored(reference, &refs, "take fexofenadine and ampicilin", &[]);
    let records = substitution_records(&before, &after).unwrap();
    let summary: Vec<_> = records.iter().map(|r| (r.hyp_surface.as_str(), r.char_distance, r.resolved_by_correction)).collect();
    assert_eq!(summary, vec![("fexifenadine", 1, true), ("ampicillin", 2, false)]);
    let report = char_diff_report(&records, 5);
    assert_eq!((report.total, report.low_diff, report.low_diff_resolved), (2, 2, 1));
}

#[test]
fn mismatched_variants_are_rejected() {
    let r = TokenSequence::from_text("a cough");
    let ann = [concept(&r, 1..2, ConceptCategory::MedicalProblem)];
    let a = compute_mc_wer(&r, &r, &ann, &ann, McWerVariant::Lemmatized).unwrap();
    let b = compute_mc_wer(&r, &r, &ann, &ann, McWerVariant::NonLemmatized).unwrap();
    assert!(category_deltas(&a, &b).is_err());
    assert!(substitution_records(&a, &b).is_err());
}

#[test]
fn merged_counts_sum_per_category() {
    let a = scored("a cough", &[(1, 2, ConceptCategory::MedicalProblem)], "a couch", &[]);
    let merged = merge_category_counts([&a, &a, &a]);
    assert_eq!(merged[&ConceptCategory::MedicalProblem].substitutions, 3);
}

fn counts() -> impl Strategy<Value = BTreeMap<ConceptCategory, CategoryCounts>> {
    let cat = prop::sample::select(ConceptCategory::REPORTED.to_vec());
    let c = (0usize..5, 0usize..5, 0usize..5).prop_map(|(substitutions, deletions, insertions)| CategoryCounts {
        substitutions,
        deletions,
        insertions,
    });
    prop::collection::btree_map(cat, c, 0..5)
}

fn total(m: &BTreeMap<ConceptCategory, CategoryCounts>) -> i64 {
    m.values().map(|c| (c.substitutions + c.deletions + c.insertions) as i64).sum()
}

proptest! {
    #[test]
    fn deltas_conserve_error_totals(before in counts(), after in counts()) {
        let deltas = deltas_from_counts(&before, &after);
        prop_assert_eq!(deltas.iter().map(|d| d.delta).sum::<i64>(), total(&after) - total(&before));
        prop_assert!(deltas.iter().all(|d| d.delta == d.after as i64 - d.before as i64));
        prop_assert!(deltas.windows(2).all(|w| w[0].delta.unsigned_abs() >= w[1].delta.unsigned_abs()));
        prop_assert!(deltas.iter().all(|d| d.before > 0 || d.after > 0));
    }

    #[test]
    fn low_difference_count_grows_with_threshold(
        dists in prop::collection::vec((0usize..12, any::<bool>()), 0..20),
        t in 0usize..12,
    ) {
        let records: Vec<SubstitutionRecord> = dists.iter().map(|&(d, resolved)| SubstitutionRecord {
            ref_surface: "x".into(),
            hyp_surface: "y".into(),
            category: ConceptCategory::Medication,
            char_distance: d,
            resolved_by_correction: resolved,
        }).collect();
        let lo = char_diff_report(&records, t);
        let hi = char_diff_report(&records, t + 1);
        prop_assert!(lo.low_diff <= hi.low_diff);
        prop_assert!(lo.low_diff_resolved <= lo.low_diff && lo.low_diff <= lo.total);
        prop_assert_eq!(lo.total, records.len());
    }

    #[test]
    fn char_distance_is_a_metric(a in "[a-dé]{0,8}", b in "[a-dé]{0,8}", c in "[a-dé]{0,8}") {
        let ac: Vec<char> = a.chars().collect();
        let bc: Vec<char> = b.chars().collect();
        prop_assert_eq!(char_distance(&a, &b), common::edit_distance_recursive(&ac, &bc));
        prop_assert_eq!(char_distance(&a, &b), char_distance(&b, &a));
        prop_assert_eq!(char_distance(&a, &a), 0);
        prop_assert!(char_distance(&a, &c) <= char_distance(&a, &b) + char_distance(&b, &c));
    }
}
