//! Shared text normal form: lowercase, no punctuation except apostrophes,
//! single spaces.

use alloc::string::String;
use alloc::vec::Vec;

/// Literal boundary marker accepted in pre-segmented text.
pub const BOUNDARY_TOKEN: &str = "[SEG]";

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '\''
}

fn fold(c: char) -> char {
    match c {
        '\u{2019}' | '\u{2018}' | '`' => '\'',
        _ => c,
    }
}

/// Splits `text` into normalized tokens. Tokens made only of apostrophes
/// are discarded.
pub fn tokens(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for c in text.chars().map(fold) {
        if is_word_char(c) {
            cur.extend(c.to_lowercase());
        } else if !cur.is_empty() {
            push_token(&mut out, &mut cur);
        }
    }
    if !cur.is_empty() {
        push_token(&mut out, &mut cur);
    }
    out
}

fn push_token(out: &mut Vec<String>, cur: &mut String) {
    if cur.chars().any(char::is_alphanumeric) {
        out.push(core::mem::take(cur));
    } else {
        cur.clear();
    }
}

/// Normalized text as a single space-joined string.
pub fn normalize(text: &str) -> String {
    tokens(text).join(" ")
}

/// Removes angle-bracketed spans such as `<laugh>`. An unclosed `<` drops
/// the rest of the text.
pub fn strip_angle_markers(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut depth = 0usize;
    for c in text.chars() {
        match c {
            '<' => depth += 1,
            '>' if depth > 0 => {
                depth -= 1;
                out.push(' ');
            }
            _ if depth == 0 => out.push(c),
            _ => {}
        }
    }
    out
}
