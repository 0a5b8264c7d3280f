mod common;

use proptest::prelude::*;

use medscore::align::{align, count_ops, project_span, EditOp};
use medscore::metrics::compute_wer;
use medscore::transcript::TokenSequence;

fn words() -> impl Strategy<Value = Vec<u8>> {
    prop::collection::vec(0u8..6, 0..10)
}

proptest! {
    #[test]
    fn cost_matches_oracle(r in words(), h in words()) {
        let path = align(&r, &h);
        prop_assert_eq!(path.cost(), common::edit_distance(&r, &h));
        prop_assert_eq!(path.cost(), common::edit_distance_recursive(&r, &h));
    }

    #[test]
    fn counts_are_consistent(r in words(), h in words()) {
        let path = align(&r, &h);
        let c = count_ops(&path);
        let matches = path.ops.iter().filter(|op| op.is_match()).count();
        prop_assert_eq!(c.errors(), path.cost());
        prop_assert_eq!(matches + c.substitutions + c.deletions, r.len());
        prop_assert_eq!(matches + c.substitutions + c.insertions, h.len());
        prop_assert_eq!(c.reference_len, r.len());
    }

    #[test]
    fn identical_sequences_align_perfectly(r in words()) {
        let path = align(&r, &r);
        prop_assert!(path.ops.iter().all(EditOp::is_match));
    }

    #[test]
    fn wer_bounds(r in prop::collection::vec("[a-c]", 1..8), h in prop::collection::vec("[a-c]", 0..8)) {
        let rs = TokenSequence::from_words(r.iter().map(String::as_str), medscore::transcript::SpeakerRole::Unknown);
        let hs = TokenSequence::from_words(h.iter().map(String::as_str), medscore::transcript::SpeakerRole::Unknown);
        let w = compute_wer(&rs, &hs).unwrap();
        prop_assert!(w.value() >= 0.0);
        // Errors never exceed the longer of the two sequences.
        prop_assert!(w.counts.errors() <= r.len().max(h.len()));
        prop_assert_eq!(*w.wer.numer() * r.len() as u64, w.counts.errors() as u64 * *w.wer.denom());
    }

    #[test]
    fn projection_covers_exactly_the_span(r in prop::collection::vec(0u8..4, 1..9), h in words(), a in 0usize..9, b in 0usize..9) {
        let (start, end) = (a.min(b) % r.len(), (a.max(b) % r.len()) + 1);
        prop_assume!(start < end);
        let path = align(&r, &h);
        let p = project_span(&path, start..end).unwrap();
        let refs: Vec<usize> = p.ops.iter().filter_map(EditOp::ref_index).collect();
        prop_assert_eq!(refs, (start..end).collect::<Vec<_>>());
        let hyps: Vec<usize> = p.ops.iter().filter_map(EditOp::hyp_index).collect();
        prop_assert_eq!(hyps, p.hyp_range.clone().collect::<Vec<_>>());
        prop_assert_eq!(&path.ops[p.path_range.clone()], &p.ops[..]);
    }
}

#[test]
fn ties_prefer_substitution_then_deletion() {
    let path = align(&["a", "b"], &["c"]);
    assert_eq!(path.ops, vec![EditOp::Substitute { ref_index: 0, hyp_index: 0 }, EditOp::Delete { ref_index: 1 }]);
    let path = align(&["a"], &["b", "c"]);
    assert_eq!(path.ops, vec![EditOp::Substitute { ref_index: 0, hyp_index: 0 }, EditOp::Insert { hyp_index: 1 }]);
}

#[test]
fn empty_spans_are_rejected() {
    let path = align(&[1, 2], &[1]);
    assert!(project_span(&path, 1..1).is_err());
    assert!(project_span(&path, 0..3).is_err());
}

#[test]
fn empty_reference_has_no_wer() {
    assert!(compute_wer(&TokenSequence::default(), &TokenSequence::from_text("a")).is_err());
}
