/// Maximum number of definition tokens fed to the encoder.
pub const DEFAULT_MAX_DEFINITION_LEN: usize = 64;

/// Lowercases and splits on whitespace and underscores.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| c.is_whitespace() || c == '_')
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Tokens of a gloss, falling back to the term's own tokens when the gloss
/// is blank.
pub fn definition_tokens(gloss: &str, term: &str) -> Vec<String> {
    let toks = tokenize(gloss);
    if toks.is_empty() {
        tokenize(term)
    } else {
        toks
    }
}
