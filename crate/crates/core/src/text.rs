//! Text units shared by candidate matching, n-gram similarity and the toy
//! encoder's feature hashing.
//!
//! A "unit" is a lowercase whitespace-delimited word for segmented scripts
//! and a single character for unsegmented (CJK) scripts. Punctuation is
//! never a unit. Mixed text is handled token by token, so `"明天 finish"`
//! yields `["明", "天", "finish"]`.

/// Returns true for characters of scripts written without spaces.
pub fn is_unsegmented_char(c: char) -> bool {
    matches!(c as u32,
        0x3040..=0x30FF      // hiragana, katakana
        | 0x3400..=0x4DBF    // CJK extension A
        | 0x4E00..=0x9FFF    // CJK unified ideographs
        | 0xAC00..=0xD7AF    // hangul syllables
        | 0xF900..=0xFAFF    // compatibility ideographs
        | 0x20000..=0x2FA1F) // supplementary ideographs
}

fn is_unit_char(c: char) -> bool {
    c.is_alphanumeric() || c == '\'' || c == '_'
}

/// Lowercases and collapses whitespace runs to a single space.
pub fn normalize(text: &str) -> String {
    text.split_whitespace()
        .map(|w| w.to_lowercase())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Splits text into units.
pub fn units(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for token in text.split_whitespace() {
        let mut word = String::new();
        for c in token.chars() {
            if is_unsegmented_char(c) {
                if !word.is_empty() {
                    out.push(std::mem::take(&mut word));
                }
                out.push(c.to_lowercase().collect());
            } else if is_unit_char(c) {
                word.extend(c.to_lowercase());
            } else if !word.is_empty() {
                out.push(std::mem::take(&mut word));
            }
        }
        if !word.is_empty() {
            out.push(word);
        }
    }
    out.retain(|u| u.chars().any(|c| c.is_alphanumeric()));
    out
}

/// True when the string contains at least one unsegmented-script character.
pub fn has_unsegmented(text: &str) -> bool {
    text.chars().any(is_unsegmented_char)
}

/// 64-bit FNV-1a. Used for feature hashing so that checkpoints stay valid
/// across toolchain versions.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        hash ^= u64::from(*b);
        hash = hash.wrapping_mul(0x0100_0000_01b3);
    }
    hash
}
