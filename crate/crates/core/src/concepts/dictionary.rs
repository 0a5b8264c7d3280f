use std::collections::HashMap;
use std::io::Read;
use std::path::{Path, PathBuf};

use thiserror::Error;

use super::{lemmatize, Annotator, AnnotatorError, ConceptAnnotation, ConceptCategory};
use crate::transcript::{normalize_text, NormalizationConfig, TokenSequence};

const BUNDLED_TERMS: &str = include_str!("../../data/medical_terms.csv");

#[derive(Debug, Error)]
pub enum DictionaryError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("dictionary row {row}: {message}")]
    Row { row: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DictionaryEntry {
    pub category: ConceptCategory,
    pub lemma: String,
}

/// Phrase table keyed by normalized token sequences.
#[derive(Debug, Clone, Default)]
pub struct ConceptDictionary {
    entries: HashMap<Vec<String>, DictionaryEntry>,
    max_len: usize,
    cfg: NormalizationConfig,
}

impl ConceptDictionary {
    pub fn new(cfg: NormalizationConfig) -> Self {
        ConceptDictionary { entries: HashMap::new(), max_len: 0, cfg }
    }

    /// The terms shipped with the crate, normalized with the default config.
    pub fn bundled() -> Self {
        Self::from_csv(BUNDLED_TERMS.as_bytes(), NormalizationConfig::default())
            .expect("bundled dictionary is well formed")
    }

    pub fn load(path: &Path, cfg: NormalizationConfig) -> Result<Self, DictionaryError> {
        let file = std::fs::File::open(path)
            .map_err(|source| DictionaryError::Io { path: path.to_path_buf(), source })?;
        Self::from_csv(file, cfg)
    }

    /// Reads `phrase,category,lemma` rows. An empty lemma is derived from the
    /// phrase.
    pub fn from_csv<R: Read>(reader: R, cfg: NormalizationConfig) -> Result<Self, DictionaryError> {
        let mut dict = Self::new(cfg);
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        for (i, record) in rdr.records().enumerate() {
            let row = i + 2;
            let record =
                record.map_err(|e| DictionaryError::Row { row, message: e.to_string() })?;
            let field = |k: usize| record.get(k).unwrap_or("");
            let (phrase, category) = (field(0), field(1));
            if category.is_empty() {
                return Err(DictionaryError::Row { row, message: "missing category".into() });
            }
            let lemma = match field(2) {
                "" => None,
                l => Some(l),
            };
            if !dict.insert(phrase, ConceptCategory::from_label(category), lemma) {
                return Err(DictionaryError::Row { row, message: "phrase normalizes to nothing".into() });
            }
        }
        Ok(dict)
    }

    /// Adds a phrase; returns false if it normalizes to the empty string.
    pub fn insert(&mut self, phrase: &str, category: ConceptCategory, lemma: Option<&str>) -> bool {
        let key: Vec<String> =
            normalize_text(phrase, &self.cfg).split_whitespace().map(str::to_string).collect();
        if key.is_empty() {
            return false;
        }
        let lemma = match lemma {
            Some(l) => normalize_text(l, &self.cfg),
            None => lemmatize(&key.join(" ")),
        };
        self.max_len = self.max_len.max(key.len());
        self.entries.insert(key, DictionaryEntry { category, lemma });
        true
    }

    pub fn get(&self, tokens: &[String]) -> Option<&DictionaryEntry> {
        self.entries.get(tokens)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn max_phrase_len(&self) -> usize {
        self.max_len
    }

    pub fn iter(&self) -> impl Iterator<Item = (String, &DictionaryEntry)> + '_ {
        self.entries.iter().map(|(k, v)| (k.join(" "), v))
    }
}

/// Greedy leftmost-longest dictionary lookup.
#[derive(Debug, Clone)]
pub struct DictionaryAnnotator {
    dictionary: ConceptDictionary,
}

impl DictionaryAnnotator {
    pub fn new(dictionary: ConceptDictionary) -> Self {
        DictionaryAnnotator { dictionary }
    }

    pub fn bundled() -> Self {
        Self::new(ConceptDictionary::bundled())
    }

    pub fn dictionary(&self) -> &ConceptDictionary {
        &self.dictionary
    }

    pub fn annotate_tokens(&self, seq: &TokenSequence) -> Vec<ConceptAnnotation> {
        let tokens = &seq.tokens;
        let mut out = Vec::new();
        let mut start = 0;
        while start < tokens.len() {
            let longest = self.dictionary.max_len.min(tokens.len() - start);
            let hit = (1..=longest).rev().find_map(|len| {
                self.dictionary.get(&tokens[start..start + len]).map(|entry| (len, entry))
            });
            match hit {
                Some((len, entry)) => {
                    out.push(ConceptAnnotation {
                        span: start..start + len,
                        surface: seq.join(start..start + len),
                        category: entry.category.clone(),
                        lemma: entry.lemma.clone(),
                    });
                    start += len;
                }
                None => start += 1,
            }
        }
        out
    }
}

impl Annotator for DictionaryAnnotator {
    fn name(&self) -> &str {
        "dictionary"
    }

    fn annotate(&self, seq: &TokenSequence) -> Result<Vec<ConceptAnnotation>, AnnotatorError> {
        Ok(self.annotate_tokens(seq))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(s: &str) -> TokenSequence {
        TokenSequence::from_text(s)
    }

    fn dict(entries: &[(&str, ConceptCategory)]) -> ConceptDictionary {
        let mut d = ConceptDictionary::new(NormalizationConfig::default());
        for (p, c) in entries {
            d.insert(p, c.clone(), None);
        }
        d
    }

    #[test]
    fn direct_lookup() {
        let ann = DictionaryAnnotator::new(dict(&[("hypertension", ConceptCategory::MedicalProblem)]));
        let out = ann.annotate_tokens(&seq("the patient has hypertension"));
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].span, 3..4);
        assert_eq!(out[0].category, ConceptCategory::MedicalProblem);
    }

    #[test]
    fn longest_match_wins() {
        let ann = DictionaryAnnotator::new(dict(&[
            ("blood pressure", ConceptCategory::BiologicalMeasurementResult),
            ("blood pressure medication", ConceptCategory::Medication),
        ]));
        let out = ann.annotate_tokens(&seq("blood pressure medication"));
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].span, 0..3);
        assert_eq!(out[0].surface, "blood pressure medication");
    }

    #[test]
    fn empty_dictionary_finds_nothing() {
        let ann = DictionaryAnnotator::new(ConceptDictionary::default());
        assert!(ann.annotate_tokens(&seq("hypertension")).is_empty());
    }

    #[test]
    fn keys_are_normalized() {
        let ann = DictionaryAnnotator::new(dict(&[("Co-Codamol.", ConceptCategory::Medication)]));
        assert_eq!(ann.annotate_tokens(&seq("take co-codamol")).len(), 1);
    }

    #[test]
    fn bundled_dictionary_covers_cited_terms() {
        let d = ConceptDictionary::bundled();
        assert!(d.len() >= 200);
        for term in [
            "hypertension", "dioralyte", "diuretics", "amoxicillin", "ampicillin", "fexofenadine",
            "metformin", "warfarin", "antibiotics", "antibiotic",
        ] {
            assert!(d.get(&[term.to_string()]).is_some(), "{term}");
        }
        let cats: std::collections::HashSet<_> = d.iter().map(|(_, e)| e.category.clone()).collect();
        for cat in ConceptCategory::REPORTED {
            assert!(cats.contains(&cat), "{cat}");
        }
    }

    #[test]
    fn bundled_lemmas_agree_with_rules() {
        for (phrase, entry) in ConceptDictionary::bundled().iter() {
            assert_eq!(lemmatize(&phrase), entry.lemma, "{phrase}");
        }
    }

    #[test]
    fn rejects_rows_without_category() {
        let csv = "phrase,category,lemma\naspirin,,\n";
        assert!(matches!(
            ConceptDictionary::from_csv(csv.as_bytes(), NormalizationConfig::default()),
            Err(DictionaryError::Row { row: 2, .. })
        ));
    }
}
