//! The bilingual survey instrument: 24 question texts, their response scales,
//! and the six cultural system prompts used to frame them.
//!
//! A default instrument is embedded in the library; a file in the same format
//! can be loaded instead, e.g. to administer a translated revision. Loading
//! always validates, so downstream code can index questions without checking.

use std::path::Path;
use std::sync::OnceLock;

use serde::Deserialize;
use thiserror::Error;

use crate::types::{Culture, Language, MessagePair, QuestionId, QUESTION_COUNT};

static EMBEDDED_TOML: &str = include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/data/instrument.toml"));

/// Questions whose wording asks about "the average person" rather than the
/// respondent: the private-life and description items. The ideal-job and
/// agree/disagree items address the respondent directly in both languages.
const AVERAGE_PERSON_RANGE: std::ops::RangeInclusive<u8> = 11..=19;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("failed to read instrument file: {0}")]
    Io(#[from] std::io::Error),
    #[error("failed to parse instrument: {0}")]
    Toml(#[from] Box<toml::de::Error>),
    #[error("missing question: {0}")]
    MissingQuestion(QuestionId),
    #[error("duplicate question: {0}")]
    DuplicateQuestion(QuestionId),
    #[error("question {id}: {problem}")]
    BadQuestion { id: QuestionId, problem: String },
    #[error("system prompts: {0}")]
    BadSystemPrompts(String),
}

/// One survey question in both languages plus scale metadata.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuestionSpec {
    pub id: QuestionId,
    pub text_en: String,
    pub text_zh: String,
    /// Meaning of answering 1.
    pub scale_low_label: String,
    /// Meaning of answering 5.
    pub scale_high_label: String,
    /// Reminder of scale direction; several items run opposite to intuition.
    pub polarity_note: String,
}

impl QuestionSpec {
    pub fn text(&self, language: Language) -> &str {
        match language {
            Language::English => &self.text_en,
            Language::SimplifiedChinese => &self.text_zh,
        }
    }
}

/// One cultural system prompt for one language.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemPromptSpec {
    pub language: Language,
    pub culture: Culture,
    pub text: String,
}

/// A validated instrument: 24 questions in ascending id order and exactly one
/// system prompt per (language, culture) pair.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurveyInstrument {
    version: String,
    #[serde(default)]
    provenance: String,
    #[serde(rename = "question")]
    questions: Vec<QuestionSpec>,
    #[serde(rename = "system_prompt")]
    system_prompts: Vec<SystemPromptSpec>,
}

impl SurveyInstrument {
    /// The instrument shipped with the library.
    pub fn embedded() -> &'static SurveyInstrument {
        static INSTANCE: OnceLock<SurveyInstrument> = OnceLock::new();
        INSTANCE.get_or_init(|| {
            SurveyInstrument::from_toml_str(EMBEDDED_TOML).expect("embedded instrument is valid")
        })
    }

    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        SurveyInstrument::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn from_toml_str(raw: &str) -> Result<Self, CorpusError> {
        let mut instrument: SurveyInstrument =
            toml::from_str(raw).map_err(|e| CorpusError::Toml(Box::new(e)))?;
        instrument.validate()?;
        instrument.questions.sort_by_key(|q| q.id);
        Ok(instrument)
    }

    fn validate(&self) -> Result<(), CorpusError> {
        let mut seen = [false; QUESTION_COUNT];
        for q in &self.questions {
            if seen[q.id.index()] {
                return Err(CorpusError::DuplicateQuestion(q.id));
            }
            seen[q.id.index()] = true;
        }
        for id in QuestionId::all() {
            if !seen[id.index()] {
                return Err(CorpusError::MissingQuestion(id));
            }
        }
        for q in &self.questions {
            validate_question(q)?;
        }

        if self.system_prompts.len() != 6 {
            return Err(CorpusError::BadSystemPrompts(format!(
                "expected 6 entries, found {}",
                self.system_prompts.len()
            )));
        }
        for language in Language::ALL {
            for culture in Culture::ALL {
                let matching = self
                    .system_prompts
                    .iter()
                    .filter(|p| p.language == language && p.culture == culture)
                    .count();
                if matching != 1 {
                    return Err(CorpusError::BadSystemPrompts(format!(
                        "expected exactly one entry for {}/{:?}, found {matching}",
                        language.code(),
                        culture
                    )));
                }
            }
        }
        if let Some(p) = self.system_prompts.iter().find(|p| p.text.trim().is_empty()) {
            return Err(CorpusError::BadSystemPrompts(format!(
                "empty text for {}/{:?}",
                p.language.code(),
                p.culture
            )));
        }
        Ok(())
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    /// All questions in ascending id order.
    pub fn questions(&self) -> &[QuestionSpec] {
        &self.questions
    }

    pub fn question(&self, id: QuestionId) -> &QuestionSpec {
        &self.questions[id.index()]
    }

    pub fn system_prompt(&self, language: Language, culture: Culture) -> &str {
        self.system_prompts
            .iter()
            .find(|p| p.language == language && p.culture == culture)
            .map(|p| p.text.as_str())
            .expect("validated instrument has all six system prompts")
    }

    /// Renders the stateless message pair for one question: the matching
    /// cultural system prompt plus the question text, verbatim.
    pub fn render_prompt(&self, id: QuestionId, language: Language, culture: Culture) -> MessagePair {
        MessagePair {
            system: self.system_prompt(language, culture).to_owned(),
            user: self.question(id).text(language).to_owned(),
        }
    }
}

fn validate_question(q: &QuestionSpec) -> Result<(), CorpusError> {
    let fail = |problem: &str| {
        Err(CorpusError::BadQuestion { id: q.id, problem: problem.to_owned() })
    };
    if q.text_en.trim().is_empty() {
        return fail("English text is empty");
    }
    if q.text_zh.trim().is_empty() {
        return fail("Chinese text is empty");
    }
    // Every item must instruct a bare 1-5 score with no rationale.
    let en = q.text_en.to_lowercase();
    if !en.contains("score") || !en.contains('1') || !en.contains('5') || !en.contains("reason") {
        return fail("English text must instruct a score-only answer on a 1 to 5 scale");
    }
    if !q.text_zh.contains("分数") || !q.text_zh.contains('1') || !q.text_zh.contains('5') || !q.text_zh.contains("请勿") {
        return fail("Chinese text must instruct a score-only answer on a 1 to 5 scale");
    }
    if AVERAGE_PERSON_RANGE.contains(&q.id.number()) {
        if !en.contains("average person") {
            return fail("English text must ask about the average person");
        }
        if !q.text_zh.contains("普通人") {
            return fail("Chinese text must ask about the average person");
        }
    }
    if q.scale_low_label.trim().is_empty() || q.scale_high_label.trim().is_empty() {
        return fail("scale labels are empty");
    }
    if q.polarity_note.trim().is_empty() {
        return fail("polarity note is empty");
    }
    Ok(())
}
