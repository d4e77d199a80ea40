//! Shared fixture builders for the criterion benchmarks.

use vsm13_core::scoring::{AnswerSheet, PopulationSample};
use vsm13_core::{PopulationId, QuestionId};

/// Deterministic 20-sheet population with non-uniform answers, the same
/// closed-form fixture the scoring tests pin down.
pub fn fixture_population() -> PopulationSample {
    let sheets = (0..20u32)
        .map(|s| {
            let mut answers = [0u8; 24];
            for q in 1..=24u16 {
                let s16 = s as u16;
                let mix = 3 * q + 7 * s16 + s16 * s16 + s16 / 3 + q * s16;
                answers[q as usize - 1] = 1 + (mix % 5) as u8;
            }
            AnswerSheet::from_scores(s, answers).expect("scores in range")
        })
        .collect();
    let id = PopulationId::from_label("GPT-4o_en").expect("valid label");
    PopulationSample::new(id, "bench-model", sheets)
}

/// All 24 question ids, handy for iterating prompts in benches.
pub fn question_ids() -> Vec<QuestionId> {
    QuestionId::all().collect()
}
