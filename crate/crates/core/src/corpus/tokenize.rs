/// Placeholder emitted for any URL.
pub const URL_TOKEN: &str = "<url>";
/// Placeholder emitted for any user mention.
pub const USER_TOKEN: &str = "<user>";

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

/// Splits a post into normalized tokens.
///
/// Text is lowercased and split on Unicode whitespace. URLs become `<url>`,
/// mentions become `<user>`, hashtags keep their `#`. Leading and trailing
/// punctuation is stripped from every other token; tokens that are pure
/// punctuation vanish.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .filter_map(|raw| normalize_token(&raw.to_lowercase()))
        .collect()
}

fn normalize_token(raw: &str) -> Option<String> {
    let start = raw.find(is_word_char)?;
    let end = raw.rfind(is_word_char).map(|i| i + raw[i..].chars().next().unwrap().len_utf8())?;
    let core = &raw[start..end];
    if (core.starts_with("http") && raw[start..].contains("://")) || core.starts_with("www.") {
        return Some(URL_TOKEN.to_string());
    }
    match raw[..start].chars().last() {
        Some('@') => Some(USER_TOKEN.to_string()),
        Some('#') => Some(format!("#{core}")),
        _ => Some(core.to_string()),
    }
}
