//! Measure how closely chat-completion endpoints align with national cultures
//! using Hofstede's VSM13 survey.
//!
//! The pipeline has five stages, each usable on its own:
//!
//! 1. [`corpus`] holds the bilingual 24-question instrument and the cultural
//!    system prompts, and renders stateless message pairs.
//! 2. [`client`] talks to OpenAI/DeepSeek-style endpoints (or a deterministic
//!    mock respondent) and journals every exchange for replay.
//! 3. [`parser`] extracts a 1-5 Likert score from free-text completions.
//! 4. [`scoring`] turns complete populations into question means and the six
//!    Hofstede dimension scores; [`alignment`] measures L1 distance to country
//!    references and classifies strong/soft alignment.
//! 5. [`runner`] orchestrates the model x language x culture matrix and
//!    [`report`] emits CSV tables, a markdown report, and bar-chart plots.
//!
//! [`published`] embeds the recorded survey results for six public models so
//! the scoring and alignment arithmetic can be regression-tested end to end.

pub mod alignment;
pub mod client;
pub mod corpus;
pub mod parser;
pub mod published;
pub mod report;
pub mod runner;
pub mod scoring;
pub mod testkit;
pub mod types;

pub use types::{Culture, Language, MessagePair, PopulationId, PromptStyle, QuestionId};
