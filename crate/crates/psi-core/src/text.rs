//! Small text helpers shared by parsers.

/// Folds full-width ASCII variants (U+FF01..U+FF5E) and the ideographic space
/// to their half-width forms. Other characters pass through unchanged.
pub fn fold_width(s: &str) -> String {
    s.chars()
        .map(|c| match c {
            '\u{FF01}'..='\u{FF5E}' => char::from_u32(c as u32 - 0xFEE0).unwrap_or(c),
            '\u{3000}' => ' ',
            _ => c,
        })
        .collect()
}

/// Width-folded, lowercased, with runs of whitespace collapsed to one space.
pub fn normalize_key(s: &str) -> String {
    fold_width(s)
        .to_lowercase()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}
