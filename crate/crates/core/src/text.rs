//! Small text helpers shared by several stages.

/// Whitespace-delimited word count.
pub fn word_count(text: &str) -> u64 {
    text.split_whitespace().count() as u64
}
