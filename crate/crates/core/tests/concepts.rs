use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread;

use proptest::prelude::*;

use medscore::concepts::{
    check_annotations, lemmatize, Annotator, AnnotatorError, ConceptCategory, ConceptDictionary, DictionaryAnnotator,
    ExternalAnnotator, Secret,
};
use medscore::transcript::{NormalizationConfig, TokenSequence};

/// Serves `replies` (status, body) to successive requests on a local port and
/// records each request's authorization header and body.
fn stub_server(replies: Vec<(u16, String)>) -> (String, Arc<Mutex<Vec<(String, String)>>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/annotate", listener.local_addr().unwrap());
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = Arc::clone(&seen);
    thread::spawn(move || {
        for (status, body) in replies {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream);
            let mut auth = String::new();
            let mut length = 0;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                let line = line.trim_end();
                if line.is_empty() {
                    break;
                }
                let (name, value) = line.split_once(':').unwrap_or((line, ""));
                match name.to_ascii_lowercase().as_str() {
                    "authorization" => auth = value.trim().to_string(),
                    "content-length" => length = value.trim().parse().unwrap(),
                    _ => {}
                }
            }
            let mut request = vec![0; length];
            reader.read_exact(&mut request).unwrap();
            log.lock().unwrap().push((auth, String::from_utf8(request).unwrap()));
            let mut stream = reader.into_inner();
            write!(
                stream,
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            )
            .unwrap();
        }
    });
    (url, seen)
}

fn tokens(text: &str) -> TokenSequence {
    TokenSequence::from_text(text)
}

#[test]
fn external_annotator_maps_offsets_and_caches() {
    let body = r#"{"entityMentions":[
        {"type":"PROBLEM","text":{"content":"high blood pressure","beginOffset":11}},
        {"type":"MEDICINE","text":{"content":"lisinopril","beginOffset":41}}
    ]}"#;
    let (url, seen) = stub_server(vec![(200, body.to_string())]);
    let cache = tempfile::tempdir().unwrap();
    let annotator = ExternalAnnotator::new(url, Secret::new("tok-123"), cache.path());
    let seq = tokens("she denies high blood pressure and takes lisinopril");

    let first = annotator.fetch(&seq).unwrap();
    assert!(!first.from_cache);
    let spans: Vec<_> = first.annotations.iter().map(|a| (a.span.clone(), a.category.clone())).collect();
    assert_eq!(spans, vec![(2..5, ConceptCategory::MedicalProblem), (7..8, ConceptCategory::Medication)]);
    check_annotations(&seq, &first.annotations).unwrap();
    {
        let requests = seen.lock().unwrap();
        assert_eq!(requests.len(), 1);
        assert_eq!(requests[0].0, "Bearer tok-123");
        assert!(requests[0].1.contains("lisinopril"));
    }

    // The server accepts a single request, so this must come from the cache.
    let second = annotator.fetch(&seq).unwrap();
    assert!(second.from_cache);
    assert_eq!(second.annotations, first.annotations);
    assert!(annotator.cache_path("she denies high blood pressure and takes lisinopril").exists());
}

#[test]
fn external_annotator_reports_http_errors() {
    let (url, _) = stub_server(vec![(401, r#"{"error":"bad token"}"#.to_string())]);
    let cache = tempfile::tempdir().unwrap();
    let annotator = ExternalAnnotator::new(url, Secret::new("wrong"), cache.path());
    match annotator.annotate(&tokens("fever")) {
        Err(AnnotatorError::Unavailable(msg)) => assert!(msg.contains("401"), "{msg}"),
        other => panic!("expected an HTTP error, got {other:?}"),
    }
    assert_eq!(std::fs::read_dir(cache.path()).map(|d| d.count()).unwrap_or(0), 0);
}

#[test]
fn offline_external_annotator_needs_a_cache_entry() {
    let cache = tempfile::tempdir().unwrap();
    let mut annotator = ExternalAnnotator::new("http://127.0.0.1:9/none", Secret::new("x"), cache.path());
    annotator.offline = true;
    assert!(matches!(annotator.annotate(&tokens("fever")), Err(AnnotatorError::Unavailable(_))));
}

#[test]
fn secrets_stay_out_of_debug_output() {
    let annotator = ExternalAnnotator::new("http://example.invalid", Secret::new("hunter2"), "/tmp/x");
    assert!(!format!("{annotator:?}").contains("hunter2"));
}

#[test]
fn dictionary_prefers_the_longest_phrase() {
    let annotator = DictionaryAnnotator::bundled();
    let seq = tokens("history of high blood pressure and hay fever");
    let anns = annotator.annotate(&seq).unwrap();
    let surfaces: Vec<&str> = anns.iter().map(|a| a.surface.as_str()).collect();
    assert_eq!(surfaces, vec!["high blood pressure", "hay fever"]);
}

#[test]
fn custom_dictionary_from_csv() {
    let csv = "phrase,category,lemma\nchest pain,medical_problem,chest pain\nchest,body_function,\n";
    let dict = ConceptDictionary::from_csv(csv.as_bytes(), NormalizationConfig::default()).unwrap();
    let annotator = DictionaryAnnotator::new(dict);
    let anns = annotator.annotate(&tokens("chest pain and chest")).unwrap();
    assert_eq!(anns.iter().map(|a| a.span.clone()).collect::<Vec<_>>(), vec![0..2, 3..4]);
    assert_eq!(anns[1].category, ConceptCategory::BodyFunction);
}

#[test]
fn lemmas_fold_plurals() {
    assert_eq!(lemmatize("antibiotics"), lemmatize("antibiotic"));
    assert_eq!(lemmatize("allergies"), lemmatize("allergy"));
    assert_eq!(lemmatize("headaches"), lemmatize("headache"));
    assert_eq!(lemmatize("fever"), "fever");
}

proptest! {
    #[test]
    fn dictionary_output_is_sorted_and_disjoint(words in prop::collection::vec(
        prop_oneof![Just("fever"), Just("hay"), Just("high"), Just("blood"), Just("pressure"), Just("the"), Just("aspirin"), Just("cough")],
        0..20,
    )) {
        let seq = TokenSequence::from_text(&words.join(" "));
        let anns = DictionaryAnnotator::bundled().annotate(&seq).unwrap();
        prop_assert!(check_annotations(&seq, &anns).is_ok());
    }
}
