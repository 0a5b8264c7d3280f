//! Rule-based plural reduction, applied word by word.

const KEEP: &[&str] = &[
    "aids", "always", "analysis", "diabetes", "does", "faeces", "feces", "gas", "goes", "herpes",
    "hives", "lens", "measles", "mumps", "news", "pancreas", "perhaps", "rabies", "rickets",
    "scabies", "series", "shingles", "species", "sometimes", "this", "was", "has", "his", "yes",
    "various", "afterwards", "towards", "physics",
];

fn lemmatize_word(word: &str) -> String {
    if KEEP.contains(&word) || !word.chars().all(char::is_alphabetic) || word.chars().count() <= 3 {
        return word.to_string();
    }
    if let Some(stem) = word.strip_suffix("ies") {
        if stem.chars().count() >= 2 {
            return format!("{stem}y");
        }
    }
    if word.ends_with("aches") {
        return word[..word.len() - 1].to_string();
    }
    for suffix in ["sses", "ches", "shes", "xes", "zes"] {
        if word.ends_with(suffix) {
            return word[..word.len() - 2].to_string();
        }
    }
    if word.ends_with("ss") || word.ends_with("us") || word.ends_with("is") {
        return word.to_string();
    }
    match word.strip_suffix('s') {
        Some(stem) => stem.to_string(),
        None => word.to_string(),
    }
}

/// Reduces plural inflections to their base form: `antibiotics` becomes
/// `antibiotic`, `allergies` becomes `allergy`. Idempotent.
pub fn lemmatize(surface: &str) -> String {
    surface.split_whitespace().map(lemmatize_word).collect::<Vec<_>>().join(" ")
}
