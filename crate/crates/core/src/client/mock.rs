//! Offline respondent: answers every question from a seeded categorical
//! distribution over 1..5, rendered in the instrument's canonical
//! "Your score: N" form. Deterministic per (seed, question, draw index) so
//! runs replay exactly.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use super::{ClientError, CompletionContext, CompletionSource};
use crate::types::{MessagePair, QuestionId};

const WEIGHT_TOLERANCE: f64 = 1e-9;
const GARBAGE_TEXT: &str = "I would rather not commit to any number for this question.";

/// Per-question answer distributions for the mock respondent. Questions fall
/// back to `default_weights`; `garbage_questions` answer with unparsable text
/// to exercise retry and failure paths.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockRespondentSpec {
    pub seed: u64,
    #[serde(default)]
    pub default_weights: Option<[f64; 5]>,
    #[serde(default)]
    pub questions: BTreeMap<QuestionId, [f64; 5]>,
    #[serde(default)]
    pub garbage_questions: BTreeSet<QuestionId>,
}

impl MockRespondentSpec {
    /// Every question uniform over 1..5.
    pub fn uniform(seed: u64) -> MockRespondentSpec {
        MockRespondentSpec {
            seed,
            default_weights: Some([0.2; 5]),
            questions: BTreeMap::new(),
            garbage_questions: BTreeSet::new(),
        }
    }

    /// Every question always answers `score`.
    pub fn degenerate(seed: u64, score: u8) -> MockRespondentSpec {
        let mut weights = [0.0; 5];
        weights[usize::from(score - 1)] = 1.0;
        MockRespondentSpec {
            seed,
            default_weights: Some(weights),
            questions: BTreeMap::new(),
            garbage_questions: BTreeSet::new(),
        }
    }

    pub fn load(path: &Path) -> Result<MockRespondentSpec, ClientError> {
        MockRespondentSpec::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn from_toml_str(raw: &str) -> Result<MockRespondentSpec, ClientError> {
        let spec: MockRespondentSpec =
            toml::from_str(raw).map_err(|e| ClientError::InvalidSpec(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), ClientError> {
        if let Some(weights) = &self.default_weights {
            validate_weights("default_weights", weights)?;
        }
        for (question, weights) in &self.questions {
            validate_weights(&question.to_string(), weights)?;
        }
        Ok(())
    }

    fn weights_for(&self, question_id: QuestionId) -> Result<&[f64; 5], ClientError> {
        self.questions
            .get(&question_id)
            .or(self.default_weights.as_ref())
            .ok_or(ClientError::UnknownQuestion(question_id))
    }

    /// The score a given draw lands on, before rendering.
    pub fn draw_score(&self, question_id: QuestionId, draw_index: u64) -> Result<u8, ClientError> {
        let weights = self.weights_for(question_id)?;
        let mut rng = ChaCha8Rng::from_seed(draw_seed(self.seed, question_id, draw_index));
        let roll: f64 = rng.gen();
        let mut cumulative = 0.0;
        for (i, w) in weights.iter().enumerate() {
            cumulative += w;
            if roll < cumulative {
                return Ok(i as u8 + 1);
            }
        }
        Ok(5)
    }

    /// Deterministic completion text for one (question, draw) pair.
    pub fn complete_mock(&self, question_id: QuestionId, draw_index: u64) -> Result<String, ClientError> {
        if self.garbage_questions.contains(&question_id) {
            // Still consume the question lookup so unknown ids error first.
            self.weights_for(question_id)?;
            return Ok(GARBAGE_TEXT.to_owned());
        }
        Ok(format!("Your score: {}", self.draw_score(question_id, draw_index)?))
    }

    /// Exact dimension-score expectation if question means equalled each
    /// distribution's expected value; end-to-end tests compare sampled runs
    /// against this.
    pub fn expected_means(&self) -> Result<[f64; crate::types::QUESTION_COUNT], ClientError> {
        let mut means = [0.0; crate::types::QUESTION_COUNT];
        for question_id in QuestionId::all() {
            let weights = self.weights_for(question_id)?;
            means[question_id.index()] =
                weights.iter().enumerate().map(|(i, w)| w * (i as f64 + 1.0)).sum();
        }
        Ok(means)
    }
}

fn validate_weights(name: &str, weights: &[f64; 5]) -> Result<(), ClientError> {
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(ClientError::InvalidSpec(format!(
            "distribution for {name} has a negative or non-finite weight"
        )));
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > WEIGHT_TOLERANCE {
        return Err(ClientError::InvalidSpec(format!(
            "distribution for {name} sums to {sum}, expected 1"
        )));
    }
    Ok(())
}

fn draw_seed(seed: u64, question_id: QuestionId, draw_index: u64) -> [u8; 32] {
    let mut bytes = [0u8; 32];
    bytes[0..8].copy_from_slice(&seed.to_le_bytes());
    bytes[8..16].copy_from_slice(&u64::from(question_id.number()).to_le_bytes());
    bytes[16..24].copy_from_slice(&draw_index.to_le_bytes());
    bytes
}

/// FNV-1a over the slot identity; gives each (population, survey, question,
/// attempt) its own draw stream independent of scheduling order.
fn slot_draw_index(ctx: &CompletionContext) -> u64 {
    const OFFSET: u64 = 0xcbf29ce484222325;
    const PRIME: u64 = 0x100000001b3;
    let mut hash = OFFSET;
    let mut eat = |byte: u8| {
        hash ^= u64::from(byte);
        hash = hash.wrapping_mul(PRIME);
    };
    for byte in ctx.population_id.bytes() {
        eat(byte);
    }
    eat(0x1f);
    for byte in ctx.survey_index.to_le_bytes() {
        eat(byte);
    }
    eat(ctx.question_id.number());
    for byte in ctx.attempt.to_le_bytes() {
        eat(byte);
    }
    hash
}

/// [`CompletionSource`] wrapper around a validated spec.
#[derive(Debug, Clone)]
pub struct MockRespondent {
    spec: MockRespondentSpec,
}

impl MockRespondent {
    pub fn new(spec: MockRespondentSpec) -> Result<MockRespondent, ClientError> {
        spec.validate()?;
        Ok(MockRespondent { spec })
    }

    pub fn spec(&self) -> &MockRespondentSpec {
        &self.spec
    }
}

impl CompletionSource for MockRespondent {
    fn complete(&self, _messages: &MessagePair, ctx: &CompletionContext) -> Result<String, ClientError> {
        self.spec.complete_mock(ctx.question_id, slot_draw_index(ctx))
    }
}
