use unicode_normalization::UnicodeNormalization;

/// Canonical form used for every label comparison: NFC, lowercased,
/// internal whitespace collapsed to single spaces, trimmed.
pub fn normalize(text: &str) -> String {
    let nfc: String = text.nfc().collect();
    let lower = nfc.to_lowercase();
    let mut out = String::with_capacity(lower.len());
    for word in lower.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

/// Splits text into lowercase word tokens, treating punctuation as separators.
pub fn tokenize(text: &str) -> Vec<String> {
    let nfc: String = text.nfc().collect();
    nfc.to_lowercase()
        .split(|c: char| c.is_whitespace() || (c.is_ascii_punctuation() && c != '\'' && c != '-'))
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}
