//! Identifiers shared across the survey pipeline.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of questions in the instrument.
pub const QUESTION_COUNT: usize = 24;

/// Raised when an identifier string or number is not part of the fixed
/// vocabulary (question ids, style suffixes, population labels).
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{0}")]
pub struct InvalidId(pub String);

/// A question identifier, `m01` through `m24`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct QuestionId(u8);

impl QuestionId {
    pub fn new(number: u8) -> Result<Self, InvalidId> {
        if (1..=QUESTION_COUNT as u8).contains(&number) {
            Ok(QuestionId(number))
        } else {
            Err(InvalidId(format!("question number out of range: {number}")))
        }
    }

    /// 1-based question number.
    pub fn number(self) -> u8 {
        self.0
    }

    /// 0-based position in canonical question order.
    pub fn index(self) -> usize {
        usize::from(self.0) - 1
    }

    /// All 24 ids in ascending order.
    pub fn all() -> impl Iterator<Item = QuestionId> {
        (1..=QUESTION_COUNT as u8).map(QuestionId)
    }
}

impl fmt::Display for QuestionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "m{:02}", self.0)
    }
}

impl FromStr for QuestionId {
    type Err = InvalidId;

    fn from_str(s: &str) -> Result<Self, InvalidId> {
        let bad = || InvalidId(format!("unknown question id: {s}"));
        let digits = s.strip_prefix('m').ok_or_else(bad)?;
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let number: u8 = digits.parse().map_err(|_| bad())?;
        QuestionId::new(number).map_err(|_| bad())
    }
}

impl TryFrom<String> for QuestionId {
    type Error = InvalidId;

    fn try_from(s: String) -> Result<Self, InvalidId> {
        s.parse()
    }
}

impl From<QuestionId> for String {
    fn from(id: QuestionId) -> String {
        id.to_string()
    }
}

/// Survey prompt language.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Language {
    #[serde(rename = "en")]
    English,
    #[serde(rename = "sc")]
    SimplifiedChinese,
}

impl Language {
    pub const ALL: [Language; 2] = [Language::English, Language::SimplifiedChinese];

    /// Population-label code: `en` or `sc`.
    pub fn code(self) -> &'static str {
        match self {
            Language::English => "en",
            Language::SimplifiedChinese => "sc",
        }
    }
}

/// Cultural system-prompt variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Culture {
    #[serde(rename = "none")]
    None,
    #[serde(rename = "us")]
    Us,
    #[serde(rename = "china")]
    China,
}

impl Culture {
    pub const ALL: [Culture; 3] = [Culture::None, Culture::Us, Culture::China];

    /// Population-label suffix part, absent for the unprompted case.
    pub fn suffix(self) -> Option<&'static str> {
        match self {
            Culture::None => None,
            Culture::Us => Some("US"),
            Culture::China => Some("CH"),
        }
    }
}

/// One of the six prompting styles: a language plus an optional cultural prompt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct PromptStyle {
    pub language: Language,
    pub culture: Culture,
}

impl PromptStyle {
    /// All six styles in canonical order (English block first, unprompted first).
    pub const ALL: [PromptStyle; 6] = [
        PromptStyle { language: Language::English, culture: Culture::None },
        PromptStyle { language: Language::English, culture: Culture::Us },
        PromptStyle { language: Language::English, culture: Culture::China },
        PromptStyle { language: Language::SimplifiedChinese, culture: Culture::None },
        PromptStyle { language: Language::SimplifiedChinese, culture: Culture::Us },
        PromptStyle { language: Language::SimplifiedChinese, culture: Culture::China },
    ];

    pub fn new(language: Language, culture: Culture) -> Self {
        PromptStyle { language, culture }
    }

    /// Population-label suffix: `en`, `en_US`, `en_CH`, `sc`, `sc_US`, `sc_CH`.
    pub fn suffix(self) -> String {
        match self.culture.suffix() {
            Some(part) => format!("{}_{}", self.language.code(), part),
            None => self.language.code().to_owned(),
        }
    }

    pub fn from_suffix(s: &str) -> Result<Self, InvalidId> {
        PromptStyle::ALL
            .into_iter()
            .find(|style| style.suffix() == s)
            .ok_or_else(|| InvalidId(format!("unknown style suffix: {s}")))
    }

    /// Human-readable category name used in improvement tables and errors.
    pub fn category_label(self) -> &'static str {
        match (self.language, self.culture) {
            (Language::English, Culture::None) => "English",
            (Language::English, Culture::Us) => "English + US Prompting",
            (Language::English, Culture::China) => "English + Chinese Prompting",
            (Language::SimplifiedChinese, Culture::None) => "Simp. Chinese",
            (Language::SimplifiedChinese, Culture::Us) => "Simp. Chinese + US Prompting",
            (Language::SimplifiedChinese, Culture::China) => "Simp. Chinese + Chinese Prompting",
        }
    }
}

impl fmt::Display for PromptStyle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.suffix())
    }
}

impl TryFrom<String> for PromptStyle {
    type Error = InvalidId;

    fn try_from(s: String) -> Result<Self, InvalidId> {
        PromptStyle::from_suffix(&s)
    }
}

impl From<PromptStyle> for String {
    fn from(style: PromptStyle) -> String {
        style.suffix()
    }
}

/// One population cell: a model crossed with one prompting style.
///
/// The label scheme is `<model>_<en|sc>[_<US|CH>]`, e.g. `GPT-4o_en` or
/// `DSV3_sc_CH`; labels double as journal file stems.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct PopulationId {
    pub model: String,
    pub style: PromptStyle,
}

impl PopulationId {
    pub fn new(model: impl Into<String>, style: PromptStyle) -> Self {
        PopulationId { model: model.into(), style }
    }

    pub fn label(&self) -> String {
        format!("{}_{}", self.model, self.style.suffix())
    }

    /// Parses a label; the style suffix is matched longest-first so model
    /// names may themselves contain underscores.
    pub fn from_label(label: &str) -> Result<Self, InvalidId> {
        let mut suffixes: Vec<(String, PromptStyle)> = PromptStyle::ALL
            .into_iter()
            .map(|style| (format!("_{}", style.suffix()), style))
            .collect();
        suffixes.sort_by_key(|(s, _)| std::cmp::Reverse(s.len()));
        for (suffix, style) in suffixes {
            if let Some(model) = label.strip_suffix(&suffix) {
                if !model.is_empty() {
                    return Ok(PopulationId { model: model.to_owned(), style });
                }
            }
        }
        Err(InvalidId(format!("unknown population label: {label}")))
    }
}

impl fmt::Display for PopulationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl TryFrom<String> for PopulationId {
    type Error = InvalidId;

    fn try_from(s: String) -> Result<Self, InvalidId> {
        PopulationId::from_label(&s)
    }
}

impl From<PopulationId> for String {
    fn from(id: PopulationId) -> String {
        id.label()
    }
}

/// A rendered prompt: one system message plus one user message, no history.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessagePair {
    pub system: String,
    pub user: String,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn question_ids_format_and_parse() {
        let id = QuestionId::new(7).unwrap();
        assert_eq!(id.to_string(), "m07");
        assert_eq!("m07".parse::<QuestionId>().unwrap(), id);
        assert_eq!("m7".parse::<QuestionId>().unwrap(), id);
        assert_eq!(QuestionId::all().count(), QUESTION_COUNT);
        assert!("m00".parse::<QuestionId>().is_err());
        assert!("m25".parse::<QuestionId>().is_err());
        assert!("q07".parse::<QuestionId>().is_err());
        assert!("m".parse::<QuestionId>().is_err());
    }

    #[test]
    fn question_id_serde_uses_labels() {
        let id = QuestionId::new(13).unwrap();
        assert_eq!(serde_json::to_string(&id).unwrap(), "\"m13\"");
        let back: QuestionId = serde_json::from_str("\"m13\"").unwrap();
        assert_eq!(back, id);
    }

    #[test]
    fn style_suffixes_are_the_six_known_forms() {
        let suffixes: Vec<String> = PromptStyle::ALL.iter().map(|s| s.suffix()).collect();
        assert_eq!(suffixes, ["en", "en_US", "en_CH", "sc", "sc_US", "sc_CH"]);
        for style in PromptStyle::ALL {
            assert_eq!(PromptStyle::from_suffix(&style.suffix()).unwrap(), style);
        }
        assert!(PromptStyle::from_suffix("en_GB").is_err());
    }

    #[test]
    fn population_labels_round_trip() {
        for (label, model, suffix) in [
            ("GPT-4o_en", "GPT-4o", "en"),
            ("DSV3_sc_CH", "DSV3", "sc_CH"),
            ("DSV3.1_en_US", "DSV3.1", "en_US"),
            ("my_local_model_sc", "my_local_model", "sc"),
        ] {
            let id = PopulationId::from_label(label).unwrap();
            assert_eq!(id.model, model);
            assert_eq!(id.style.suffix(), suffix);
            assert_eq!(id.label(), label);
        }
        assert!(PopulationId::from_label("GPT-4o").is_err());
        assert!(PopulationId::from_label("_en").is_err());
    }

    #[test]
    fn population_id_serde_uses_labels() {
        let id = PopulationId::from_label("GPT-5_sc_US").unwrap();
        assert_eq!(serde_json::to_string(&id).unwrap(), "\"GPT-5_sc_US\"");
        let back: PopulationId = serde_json::from_str("\"GPT-5_sc_US\"").unwrap();
        assert_eq!(back, id);
    }

    #[test]
    fn category_labels_are_unique() {
        let mut labels: Vec<&str> = PromptStyle::ALL.iter().map(|s| s.category_label()).collect();
        labels.sort();
        labels.dedup();
        assert_eq!(labels.len(), 6);
    }
}
