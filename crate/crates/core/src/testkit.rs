//! Seeded generators for parser stress corpora. Shared by unit tests, the
//! acceptance suite, and benchmarks so they all exercise the same shapes.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::parser::canonical_response;
use crate::types::Language;

/// One synthetic model response. `expected` is `Some(n)` when a parser must
/// recover exactly `n`, and `None` when any extracted value would be wrong
/// (ambiguous, refused, or out of range).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusCase {
    pub text: String,
    pub language: Language,
    pub expected: Option<u8>,
}

/// Every 25th case is unanswerable, the rest carry a single recoverable
/// score, so a 500-case corpus is 96% parseable by construction.
const HARD_CASE_PERIOD: usize = 25;

const EN_WORDS: [&str; 5] = ["one", "two", "three", "four", "five"];
const ZH_NUMERALS: [char; 5] = ['一', '二', '三', '四', '五'];

fn fullwidth(value: u8) -> char {
    char::from_u32(0xff10 + value as u32).expect("fullwidth digit")
}

fn english_templates(value: u8) -> Vec<String> {
    vec![
        canonical_response(value, Language::English),
        format!("{value}"),
        format!("I would say my score is {value}."),
        format!("After thinking about it, I land on {value}."),
        format!("On the scale from 1 to 5, I choose {value}."),
        format!("I would go with {}.", EN_WORDS[value as usize - 1]),
    ]
}

fn chinese_templates(value: u8) -> Vec<String> {
    vec![
        canonical_response(value, Language::SimplifiedChinese),
        format!("我的评分是{value}。"),
        format!("{value}分。"),
        format!("我打{value}分。"),
        format!("综合考虑，我选{value}。"),
        format!("我选{}。", ZH_NUMERALS[value as usize - 1]),
        format!("我的评分是{}。", fullwidth(value)),
    ]
}

const EN_HARD: [&str; 6] = [
    "I'd say 2, maybe 4.",
    "3 or 4 depending on the day.",
    "somewhere between 1 and 5",
    "I rate it 7.",
    "0",
    "I cannot commit to a number for this question.",
];

const ZH_HARD: [&str; 4] = [
    "可能是2，也可能是4。",
    "我给7分。",
    "这个问题我无法给出评分。",
    "3或4都说得过去。",
];

/// Deterministic mixed-language corpus: same seed and count always yield the
/// same cases, so accuracy measurements are reproducible.
pub fn noisy_corpus(seed: u64, count: usize) -> Vec<CorpusCase> {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut cases = Vec::with_capacity(count);
    let mut hard_cursor = 0usize;
    for index in 0..count {
        if (index + 1) % HARD_CASE_PERIOD == 0 {
            let (text, language) = if hard_cursor % 2 == 0 {
                (EN_HARD[(hard_cursor / 2) % EN_HARD.len()], Language::English)
            } else {
                (ZH_HARD[(hard_cursor / 2) % ZH_HARD.len()], Language::SimplifiedChinese)
            };
            hard_cursor += 1;
            cases.push(CorpusCase { text: text.to_string(), language, expected: None });
            continue;
        }
        let value = rng.gen_range(1..=5u8);
        let language =
            if rng.gen_bool(0.5) { Language::English } else { Language::SimplifiedChinese };
        let templates = match language {
            Language::English => english_templates(value),
            Language::SimplifiedChinese => chinese_templates(value),
        };
        let text = templates[rng.gen_range(0..templates.len())].clone();
        cases.push(CorpusCase { text, language, expected: Some(value) });
    }
    cases
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_likert;

    #[test]
    fn every_template_parses_to_its_value() {
        for value in 1..=5u8 {
            for text in english_templates(value) {
                let parsed = parse_likert(&text, Language::English)
                    .unwrap_or_else(|e| panic!("{text:?} failed: {e}"));
                assert_eq!(parsed.value, value, "{text:?}");
            }
            for text in chinese_templates(value) {
                let parsed = parse_likert(&text, Language::SimplifiedChinese)
                    .unwrap_or_else(|e| panic!("{text:?} failed: {e}"));
                assert_eq!(parsed.value, value, "{text:?}");
            }
        }
    }

    #[test]
    fn every_hard_case_yields_no_score() {
        for text in EN_HARD {
            assert!(parse_likert(text, Language::English).is_err(), "{text:?}");
        }
        for text in ZH_HARD {
            assert!(parse_likert(text, Language::SimplifiedChinese).is_err(), "{text:?}");
        }
    }

    #[test]
    fn corpus_is_deterministic_with_fixed_proportions() {
        let a = noisy_corpus(9, 500);
        let b = noisy_corpus(9, 500);
        assert_eq!(a, b);
        assert_eq!(a.len(), 500);
        let unanswerable = a.iter().filter(|c| c.expected.is_none()).count();
        assert_eq!(unanswerable, 20);
        assert!(a.iter().any(|c| c.language == Language::English && c.expected.is_some()));
        assert!(
            a.iter().any(|c| c.language == Language::SimplifiedChinese && c.expected.is_some())
        );
    }

    #[test]
    fn parser_is_exact_on_the_generated_corpus() {
        for case in noisy_corpus(4, 1000) {
            match case.expected {
                Some(value) => {
                    let parsed = parse_likert(&case.text, case.language)
                        .unwrap_or_else(|e| panic!("{:?} failed: {e}", case.text));
                    assert_eq!(parsed.value, value, "{:?}", case.text);
                }
                None => assert!(
                    parse_likert(&case.text, case.language).is_err(),
                    "{:?} should not parse",
                    case.text
                ),
            }
        }
    }
}
