mod common;

use std::fs;

use proptest::prelude::*;

use medscore::transcript::{
    load_corpus, normalize_text, render_corpus, tokenize, write_corpus, CorpusError, CorpusFormat,
    NormalizationConfig, SpeakerRole, Transcript,
};

#[test]
fn loads_the_minicorpus() {
    let corpus = load_corpus(&common::fixtures().join("minicorpus/reference.jsonl"), CorpusFormat::TurnsJsonl).unwrap();
    assert_eq!(corpus.len(), 5);
    assert_eq!(corpus[0].conversation_id, "c01");
    assert!(corpus.iter().all(|t| t.dataset_tag == "minicorpus"));
    for t in &corpus {
        assert!(t.turns.iter().enumerate().all(|(i, turn)| turn.index == i));
        assert!(t.turns.iter().all(|turn| turn.speaker != SpeakerRole::Unknown));
    }
}

#[test]
fn empty_file_is_an_empty_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.jsonl");
    fs::write(&path, "").unwrap();
    assert!(load_corpus(&path, CorpusFormat::TurnsJsonl).unwrap().is_empty());
    assert!(load_corpus(&path, CorpusFormat::PlainText).unwrap().is_empty());
}

#[test]
fn unknown_speaker_label_reports_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("visit.txt");
    fs::write(&path, "Doctor: Hello.\nNurse: Blood pressure is fine.\n").unwrap();
    match load_corpus(&path, CorpusFormat::PlainText) {
        Err(CorpusError::Format { line, message, .. }) => {
            assert_eq!(line, 2);
            assert!(message.contains("Nurse"), "{message}");
        }
        other => panic!("expected a format error, got {other:?}"),
    }

    let path = dir.path().join("visit.jsonl");
    fs::write(
        &path,
        "{\"conversation_id\":\"a\",\"dataset_tag\":\"t\",\"turns\":[{\"speaker\":\"Nurse\",\"text\":\"hi\"}]}\n",
    )
    .unwrap();
    assert!(matches!(load_corpus(&path, CorpusFormat::TurnsJsonl), Err(CorpusError::Format { line: 1, .. })));
}

#[test]
fn duplicate_ids_and_blank_turns_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("dup.jsonl");
    let line = "{\"conversation_id\":\"a\",\"dataset_tag\":\"t\",\"turns\":[{\"speaker\":\"Doctor\",\"text\":\"hi\"}]}\n";
    fs::write(&path, format!("{line}{line}")).unwrap();
    assert!(matches!(load_corpus(&path, CorpusFormat::TurnsJsonl), Err(CorpusError::Format { line: 2, .. })));

    fs::write(&path, "{\"conversation_id\":\"a\",\"dataset_tag\":\"t\",\"turns\":[{\"speaker\":\"Doctor\",\"text\":\"  \"}]}\n").unwrap();
    assert!(matches!(load_corpus(&path, CorpusFormat::TurnsJsonl), Err(CorpusError::Format { line: 1, .. })));
}

#[test]
fn plain_text_conversations_are_separated_by_blank_lines() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("visits.txt");
    fs::write(&path, "Doctor: Hello.\nPatient: Hi.\n\n\nDoctor: Next.\n").unwrap();
    let corpus = load_corpus(&path, CorpusFormat::PlainText).unwrap();
    assert_eq!(corpus.len(), 2);
    assert_eq!(corpus[0].conversation_id, "visits-001");
    assert_eq!(corpus[1].turns.len(), 1);
    assert_eq!(corpus[0].dataset_tag, "visits");
}

#[test]
fn punctuation_only_transcript_fails_to_tokenize() {
    let t = Transcript::new("x", "t", [(SpeakerRole::Doctor, "...")]).unwrap();
    assert!(tokenize(&t, &NormalizationConfig::default()).is_err());
}

fn arb_transcript() -> impl Strategy<Value = Transcript> {
    let turn = (
        prop_oneof![Just(SpeakerRole::Doctor), Just(SpeakerRole::Patient)],
        "[A-Za-z][A-Za-z ,.'?-]{0,30}",
    );
    ("[a-z0-9]{1,8}", prop::collection::vec(turn, 1..6))
        .prop_map(|(id, turns)| Transcript::new(id, "prop", turns).unwrap())
}

proptest! {
    #[test]
    fn jsonl_round_trip(corpus in prop::collection::vec(arb_transcript(), 0..4)) {
        let mut corpus = corpus;
        for (i, t) in corpus.iter_mut().enumerate() {
            t.conversation_id = format!("{}-{i}", t.conversation_id);
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        write_corpus(&path, &corpus, CorpusFormat::TurnsJsonl).unwrap();
        prop_assert_eq!(load_corpus(&path, CorpusFormat::TurnsJsonl).unwrap(), corpus.clone());
        prop_assert_eq!(fs::read_to_string(&path).unwrap(), render_corpus(&corpus, CorpusFormat::TurnsJsonl));
    }

    #[test]
    fn plain_text_round_trip_keeps_turns(t in arb_transcript()) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.txt");
        write_corpus(&path, std::slice::from_ref(&t), CorpusFormat::PlainText).unwrap();
        let back = load_corpus(&path, CorpusFormat::PlainText).unwrap();
        prop_assert_eq!(back.len(), 1);
        let got: Vec<_> = back[0].turns.iter().map(|x| (x.speaker, x.text.clone())).collect();
        let want: Vec<_> = t.turns.iter().map(|x| (x.speaker, x.text.trim().to_string())).collect();
        prop_assert_eq!(got, want);
    }

    #[test]
    fn tokens_never_contain_whitespace_or_empty(text in "\\PC{0,40}") {
        let cfg = NormalizationConfig::default();
        let norm = normalize_text(&text, &cfg);
        prop_assert_eq!(normalize_text(&norm, &cfg), norm.clone());
        for w in norm.split(' ') {
            prop_assert!(norm.is_empty() || (!w.is_empty() && !w.chars().any(char::is_whitespace)));
        }
    }
}
