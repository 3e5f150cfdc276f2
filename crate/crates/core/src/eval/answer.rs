/// Version tag of the normalization rules, written into sweep CSV files.
pub const NORMALIZATION_VERSION: &str = "v1";

/// Lowercase, drop ASCII punctuation, drop the articles "a", "an", "the" as
/// whole words and collapse whitespace.
pub fn normalize_answer_text(s: &str) -> String {
    let lowered = s.to_lowercase();
    let stripped: String = lowered.chars().filter(|c| !c.is_ascii_punctuation()).collect();
    stripped
        .split_whitespace()
        .filter(|w| !matches!(*w, "a" | "an" | "the"))
        .collect::<Vec<_>>()
        .join(" ")
}

/// True iff some normalized answer occurs in the normalized passage as a run
/// of whole tokens.
pub fn answer_match(passage_text: &str, answers: &[String]) -> bool {
    let passage = normalize_answer_text(passage_text);
    let tokens: Vec<&str> = passage.split(' ').filter(|t| !t.is_empty()).collect();
    answers.iter().any(|a| {
        let a = normalize_answer_text(a);
        let needle: Vec<&str> = a.split(' ').filter(|t| !t.is_empty()).collect();
        !needle.is_empty() && tokens.windows(needle.len()).any(|w| w == needle.as_slice())
    })
}
