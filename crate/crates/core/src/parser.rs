//! Extracts a 1-5 Likert score from free-text completions.
//!
//! Extraction is deliberately conservative. A response naming two different
//! in-range integers is ambiguous, and ambiguity is an error the runner
//! retries rather than a guess; out-of-range integers are never clamped onto
//! the scale, they are simply not candidates. Clamping or guessing would bias
//! population means silently, and the means feed the dimension equations
//! directly.
//!
//! Rules are tried in fixed priority order:
//!
//! 1. score keyword ("score", "分数", "评分") followed closely by an integer;
//!    the last such occurrence wins (a model's final stated score).
//! 2. the whole response, trimmed, is exactly one integer.
//! 3. exactly one distinct standalone integer in range appears anywhere.
//! 4. digit words ("three", "三") in the survey language, again requiring a
//!    single distinct value.
//!
//! Responses that merely quote the scale ("a scale of 1 to 5", "1到5") are
//! stripped before candidate collection so instruction echo does not force
//! spurious ambiguity retries.

use std::collections::BTreeSet;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::Language;

/// Which extraction rule produced a score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExtractionRule {
    ScoreKeyword,
    ExactTrailingInteger,
    SoleInteger,
    DigitWord,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Confidence {
    High,
    Low,
}

/// A successfully extracted score, always in 1..=5.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedScore {
    pub value: u8,
    pub extraction_rule: ExtractionRule,
    pub confidence: Confidence,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("no score found in response")]
    Unparsable,
    #[error("ambiguous response, candidate scores {0:?}")]
    Ambiguous(Vec<u8>),
}

/// The canonical score rendering per language; `parse_likert` must always
/// recover `n` from it.
pub fn canonical_response(value: u8, language: Language) -> String {
    match language {
        Language::English => format!("Your score: {value}"),
        Language::SimplifiedChinese => format!("我的分数是：{value}"),
    }
}

pub fn parse_likert(text: &str, language: Language) -> Result<ParsedScore, ParseError> {
    let normalized = normalize_digits(text);
    let scrubbed = scrub_scale_echo(&normalized);
    let chars: Vec<char> = scrubbed.chars().collect();

    if let Some(value) = keyword_candidates(&chars).last().copied() {
        return Ok(ParsedScore {
            value,
            extraction_rule: ExtractionRule::ScoreKeyword,
            confidence: Confidence::High,
        });
    }

    let trimmed = normalized.trim();
    if !trimmed.is_empty() && trimmed.bytes().all(|b| b.is_ascii_digit()) {
        if let Some(value) = in_range(trimmed) {
            return Ok(ParsedScore {
                value,
                extraction_rule: ExtractionRule::ExactTrailingInteger,
                confidence: Confidence::High,
            });
        }
    }

    match sole_value(integer_tokens(&chars)) {
        Sole::One(value) => {
            return Ok(ParsedScore {
                value,
                extraction_rule: ExtractionRule::SoleInteger,
                confidence: Confidence::Low,
            })
        }
        Sole::Conflict(candidates) => return Err(ParseError::Ambiguous(candidates)),
        Sole::Empty => {}
    }

    match sole_value(digit_words(&scrubbed, &chars, language)) {
        Sole::One(value) => Ok(ParsedScore {
            value,
            extraction_rule: ExtractionRule::DigitWord,
            confidence: Confidence::Low,
        }),
        Sole::Conflict(candidates) => Err(ParseError::Ambiguous(candidates)),
        Sole::Empty => Err(ParseError::Unparsable),
    }
}

enum Sole {
    Empty,
    One(u8),
    Conflict(Vec<u8>),
}

fn sole_value(candidates: Vec<u8>) -> Sole {
    let distinct: BTreeSet<u8> = candidates.into_iter().collect();
    match distinct.len() {
        0 => Sole::Empty,
        1 => Sole::One(*distinct.iter().next().expect("non-empty")),
        _ => Sole::Conflict(distinct.into_iter().collect()),
    }
}

fn in_range(digits: &str) -> Option<u8> {
    if digits.len() > 3 {
        return None;
    }
    digits.parse::<u16>().ok().filter(|v| (1..=5).contains(v)).map(|v| v as u8)
}

fn normalize_digits(text: &str) -> String {
    text.chars()
        .map(|c| match c {
            '\u{ff10}'..='\u{ff19}' => {
                char::from_digit(c as u32 - 0xff10, 10).expect("digit in range")
            }
            _ => c,
        })
        .collect()
}

fn scale_echo_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?i)(?:(?:from|between)\s+)?1\s*(?:to|and|到|至|[-–~—])\s*5").expect("valid regex")
    })
}

fn scrub_scale_echo(text: &str) -> String {
    scale_echo_re().replace_all(text, " ").into_owned()
}

const KEYWORDS: [&[char]; 3] = [
    &['s', 'c', 'o', 'r', 'e'],
    &['分', '数'],
    &['评', '分'],
];

/// How many non-digit characters may separate a keyword from its integer.
const KEYWORD_GAP: usize = 12;

fn keyword_candidates(chars: &[char]) -> Vec<u8> {
    let lower: Vec<char> = chars.iter().map(|c| c.to_ascii_lowercase()).collect();
    let mut found = Vec::new();
    for start in 0..lower.len() {
        for keyword in KEYWORDS {
            if !lower[start..].starts_with(keyword) {
                continue;
            }
            // "score" must stand alone: "scores" or "underscore" do not count.
            let end = start + keyword.len();
            if keyword[0].is_ascii_alphabetic() {
                let embedded = (start > 0 && lower[start - 1].is_ascii_alphabetic())
                    || lower.get(end).is_some_and(|c| c.is_ascii_alphabetic());
                if embedded {
                    continue;
                }
            }
            let mut pos = end;
            let mut gap = 0;
            while pos < chars.len() && gap < KEYWORD_GAP && !chars[pos].is_ascii_digit() {
                pos += 1;
                gap += 1;
            }
            if pos < chars.len() && chars[pos].is_ascii_digit() {
                if let Some(value) = candidate_at(chars, pos, true) {
                    found.push(value);
                }
            }
        }
    }
    found
}

/// Reads the digit run starting at `pos` and returns its value when it looks
/// like a standalone answer in 1..=5. Decimals ("4.5"), negatives, list heads
/// ("4,5" when `reject_lists`), and word-embedded digits are not candidates.
fn candidate_at(chars: &[char], pos: usize, reject_lists: bool) -> Option<u8> {
    let mut end = pos;
    while end < chars.len() && chars[end].is_ascii_digit() {
        end += 1;
    }
    if pos > 0 {
        let prev = chars[pos - 1];
        if prev == '-' || prev == '_' || prev.is_ascii_alphabetic() {
            return None;
        }
        if is_dot(prev) && pos >= 2 && chars[pos - 2].is_ascii_digit() {
            return None;
        }
        if prev == ',' && pos >= 2 && chars[pos - 2].is_ascii_digit() {
            return None;
        }
    }
    if let Some(&next) = chars.get(end) {
        if next.is_ascii_alphabetic() || next == '_' {
            return None;
        }
        let digit_follows = chars.get(end + 1).is_some_and(|c| c.is_ascii_digit());
        if is_dot(next) && digit_follows {
            return None;
        }
        if reject_lists && next == ',' && digit_follows {
            return None;
        }
    }
    let digits: String = chars[pos..end].iter().collect();
    in_range(&digits)
}

fn is_dot(c: char) -> bool {
    c == '.' || c == '\u{ff0e}'
}

fn integer_tokens(chars: &[char]) -> Vec<u8> {
    let mut found = Vec::new();
    for pos in 0..chars.len() {
        if !chars[pos].is_ascii_digit() {
            continue;
        }
        if pos > 0 && chars[pos - 1].is_ascii_digit() {
            continue;
        }
        if let Some(value) = candidate_at(chars, pos, true) {
            found.push(value);
        }
    }
    found
}

fn english_word_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)\b(one|two|three|four|five)\b").expect("valid regex"))
}

const CHINESE_NUMERALS: [(char, u8); 5] = [('一', 1), ('二', 2), ('三', 3), ('四', 4), ('五', 5)];

/// Characters that may precede a bare Chinese numeral answer ("是三", "选三").
const ZH_LEAD: [char; 4] = ['是', '选', '打', '给'];
/// Characters that may follow one ("三分").
const ZH_TAIL: [char; 1] = ['分'];

fn digit_words(scrubbed: &str, chars: &[char], language: Language) -> Vec<u8> {
    match language {
        Language::English => english_word_re()
            .find_iter(scrubbed)
            .map(|m| match m.as_str().to_ascii_lowercase().as_str() {
                "one" => 1,
                "two" => 2,
                "three" => 3,
                "four" => 4,
                _ => 5,
            })
            .collect(),
        Language::SimplifiedChinese => {
            // Bare numerals only: compounds like 一般 or 之一 are function
            // words, not answers, so both neighbors must look like a boundary.
            let mut found = Vec::new();
            for (pos, &c) in chars.iter().enumerate() {
                let Some(&(_, value)) = CHINESE_NUMERALS.iter().find(|(n, _)| *n == c) else {
                    continue;
                };
                let lead_ok = pos == 0 || {
                    let prev = chars[pos - 1];
                    prev.is_whitespace() || prev.is_ascii_punctuation() || is_cjk_punct(prev) || ZH_LEAD.contains(&prev)
                };
                let tail_ok = pos + 1 == chars.len() || {
                    let next = chars[pos + 1];
                    next.is_whitespace() || next.is_ascii_punctuation() || is_cjk_punct(next) || ZH_TAIL.contains(&next)
                };
                if lead_ok && tail_ok {
                    found.push(value);
                }
            }
            found
        }
    }
}

fn is_cjk_punct(c: char) -> bool {
    matches!(c, '：' | '，' | '。' | '！' | '？' | '；' | '、' | '（' | '）' | '“' | '”')
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse_en(text: &str) -> Result<ParsedScore, ParseError> {
        parse_likert(text, Language::English)
    }

    fn parse_zh(text: &str) -> Result<ParsedScore, ParseError> {
        parse_likert(text, Language::SimplifiedChinese)
    }

    #[test]
    fn canonical_english_form() {
        let parsed = parse_en("Your score: 4").unwrap();
        assert_eq!(parsed.value, 4);
        assert_eq!(parsed.extraction_rule, ExtractionRule::ScoreKeyword);
        assert_eq!(parsed.confidence, Confidence::High);
    }

    #[test]
    fn bare_integer() {
        let parsed = parse_en("3").unwrap();
        assert_eq!(parsed.value, 3);
        assert_eq!(parsed.extraction_rule, ExtractionRule::ExactTrailingInteger);
        assert_eq!(parsed.confidence, Confidence::High);
    }

    #[test]
    fn canonical_chinese_form() {
        let parsed = parse_zh("我的分数是：2").unwrap();
        assert_eq!(parsed.value, 2);
        assert_eq!(parsed.extraction_rule, ExtractionRule::ScoreKeyword);
    }

    #[test]
    fn hedged_answer_is_ambiguous() {
        assert_eq!(parse_en("I'd say 2, maybe 4"), Err(ParseError::Ambiguous(vec![2, 4])));
    }

    #[test]
    fn canonical_forms_round_trip_both_languages() {
        for language in Language::ALL {
            for value in 1..=5u8 {
                let parsed = parse_likert(&canonical_response(value, language), language).unwrap();
                assert_eq!(parsed.value, value);
                assert_eq!(parsed.extraction_rule, ExtractionRule::ScoreKeyword);
                assert_eq!(parsed.confidence, Confidence::High);
            }
        }
    }

    #[test]
    fn last_keyword_occurrence_wins() {
        let parsed = parse_en("Initial score 2... on reflection, final score: 5").unwrap();
        assert_eq!(parsed.value, 5);
        assert_eq!(parsed.extraction_rule, ExtractionRule::ScoreKeyword);
    }

    #[test]
    fn keyword_must_stand_alone() {
        // "underscore" and "scores" must not anchor extraction; the bare
        // integer is still found by the sole-integer rule.
        let parsed = parse_en("the underscore_4 variant gets a 2 from me").unwrap();
        assert_eq!(parsed.value, 2);
        assert_eq!(parsed.extraction_rule, ExtractionRule::SoleInteger);
    }

    #[test]
    fn sole_integer_in_prose() {
        let parsed = parse_en("Thinking about it, I would give this a 4 overall.").unwrap();
        assert_eq!(parsed.value, 4);
        assert_eq!(parsed.extraction_rule, ExtractionRule::SoleInteger);
        assert_eq!(parsed.confidence, Confidence::Low);
    }

    #[test]
    fn repeated_same_integer_is_not_ambiguous() {
        let parsed = parse_en("I pick 3. Yes, 3.").unwrap();
        assert_eq!(parsed.value, 3);
        assert_eq!(parsed.extraction_rule, ExtractionRule::SoleInteger);
    }

    #[test]
    fn scale_echo_is_not_a_candidate() {
        let parsed = parse_en("On a scale of 1 to 5, I would answer 4.").unwrap();
        assert_eq!(parsed.value, 4);
        let parsed = parse_zh("在1到5的范围内，我给4。").unwrap();
        assert_eq!(parsed.value, 4);
    }

    #[test]
    fn keyword_with_scale_echo_between() {
        // The echo is scrubbed, so the keyword window still reaches the digit.
        let parsed = parse_en("score (1 to 5): 4").unwrap();
        assert_eq!(parsed.value, 4);
        assert_eq!(parsed.extraction_rule, ExtractionRule::ScoreKeyword);
        // When the keyword sits too far from the digit the integer is still
        // recovered, just at lower confidence.
        let parsed = parse_en("My score, on the 1 to 5 scale given above: 4").unwrap();
        assert_eq!(parsed.value, 4);
        assert_eq!(parsed.extraction_rule, ExtractionRule::SoleInteger);
    }

    #[test]
    fn english_digit_words() {
        let parsed = parse_en("I would say it is four.").unwrap();
        assert_eq!(parsed.value, 4);
        assert_eq!(parsed.extraction_rule, ExtractionRule::DigitWord);
        assert_eq!(parsed.confidence, Confidence::Low);
        assert!(parse_en("someone must decide").is_err());
    }

    #[test]
    fn chinese_digit_words() {
        assert_eq!(parse_zh("三").unwrap().value, 3);
        assert_eq!(parse_zh("我选三。").unwrap().value, 3);
        assert_eq!(parse_zh("三分").unwrap().value, 3);
        // Function-word compounds are not answers.
        assert_eq!(parse_zh("一般来说很重要"), Err(ParseError::Unparsable));
        // The English vocabulary is out of scope for a Chinese survey.
        assert_eq!(parse_zh("three"), Err(ParseError::Unparsable));
    }

    #[test]
    fn out_of_range_integers_are_never_clamped() {
        assert_eq!(parse_en("7"), Err(ParseError::Unparsable));
        assert_eq!(parse_en("Your score: 10"), Err(ParseError::Unparsable));
        assert_eq!(parse_en("I rate it 0"), Err(ParseError::Unparsable));
        // An out-of-range keyword match must not mask an in-range integer.
        let parsed = parse_en("Score: 10 is impossible, I mean 4").unwrap();
        assert_eq!(parsed.value, 4);
        assert_eq!(parsed.extraction_rule, ExtractionRule::SoleInteger);
    }

    #[test]
    fn decimals_and_identifiers_are_not_candidates() {
        assert_eq!(parse_en("It's a 4.5 from me"), Err(ParseError::Unparsable));
        assert_eq!(parse_en("see question m13 above"), Err(ParseError::Unparsable));
        let parsed = parse_en("GPT-5 would answer 3").unwrap();
        assert_eq!(parsed.value, 3);
    }

    #[test]
    fn full_width_digits_normalize() {
        let parsed = parse_zh("您的分数是：４").unwrap();
        assert_eq!(parsed.value, 4);
        assert_eq!(parsed.extraction_rule, ExtractionRule::ScoreKeyword);
    }

    #[test]
    fn refusals_are_unparsable() {
        assert_eq!(parse_en(""), Err(ParseError::Unparsable));
        assert_eq!(parse_en("As a survey respondent I cannot decide."), Err(ParseError::Unparsable));
        assert_eq!(parse_zh("我无法回答这个问题。"), Err(ParseError::Unparsable));
    }

    #[test]
    fn deterministic_over_repeated_calls() {
        let text = "Considering everything, score: 2";
        let first = parse_en(text);
        for _ in 0..100 {
            assert_eq!(parse_en(text), first);
        }
    }

    #[test]
    fn never_out_of_range_on_arbitrary_text() {
        // Deterministic pseudo-random byte soup: whatever happens, a parsed
        // value stays in range and no input panics.
        let mut state = 0x243f6a8885a308d3u64;
        for _ in 0..2000 {
            let mut text = String::new();
            for _ in 0..(state % 60) {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                let c = match state % 7 {
                    0 => char::from_u32(0x30 + (state >> 8) as u32 % 10).unwrap(),
                    1 => ' ',
                    2 => char::from_u32(0x61 + (state >> 8) as u32 % 26).unwrap(),
                    3 => '分',
                    4 => '三',
                    5 => '.',
                    _ => char::from_u32(0x4e00 + (state >> 8) as u32 % 200).unwrap(),
                };
                text.push(c);
            }
            for language in Language::ALL {
                if let Ok(parsed) = parse_likert(&text, language) {
                    assert!((1..=5).contains(&parsed.value), "{text:?} -> {parsed:?}");
                }
            }
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        }
    }
}
