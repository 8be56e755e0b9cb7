const SPLIT_PUNCT: [char; 6] = ['.', ',', '!', '?', ';', ':'];

/// Lowercases, splits on whitespace, and peels trailing `. , ! ? ; :`
/// off each word as separate tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for word in text.split_whitespace() {
        let word = word.to_lowercase();
        let stem = word.trim_end_matches(SPLIT_PUNCT);
        if !stem.is_empty() {
            out.push(stem.to_string());
        }
        out.extend(word[stem.len()..].chars().map(String::from));
    }
    out
}
