//! Turns complete answer populations into question means and the six
//! Hofstede dimension scores.
//!
//! All arithmetic is plain double precision with no intermediate rounding;
//! only reports round, to two decimals. Dimension scores are intentionally
//! unclamped: legitimate populations score below 0 and above 100.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::client::PromptRecord;
use crate::types::{PopulationId, QuestionId, QUESTION_COUNT};

/// Hofstede's minimum population size for VSM13 scoring.
pub const MIN_POPULATION: usize = 20;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScoringError {
    #[error("population has {actual} complete sheets, minimum is {minimum}{}", format_incomplete(.incomplete))]
    MinimumPopulation { minimum: usize, actual: usize, incomplete: Vec<u32> },
    #[error("survey {survey_index} is incomplete, missing {}", join_ids(.missing))]
    IncompleteSheet { survey_index: u32, missing: Vec<QuestionId> },
    #[error("survey {survey_index} answers {question} with {value}, outside 1..5")]
    AnswerOutOfRange { survey_index: u32, question: QuestionId, value: u8 },
    #[error("no records for population: {0}")]
    NoRecords(String),
    #[error("question mean for {question} is {value}, outside [1,5]")]
    MeanOutOfRange { question: QuestionId, value: f64 },
}

fn format_incomplete(incomplete: &[u32]) -> String {
    if incomplete.is_empty() {
        String::new()
    } else {
        let list: Vec<String> = incomplete.iter().map(|i| i.to_string()).collect();
        format!(" (incomplete surveys: {})", list.join(", "))
    }
}

fn join_ids(ids: &[QuestionId]) -> String {
    let list: Vec<String> = ids.iter().map(|id| id.to_string()).collect();
    list.join(", ")
}

/// One complete 24-answer survey response.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerSheet {
    survey_index: u32,
    answers: [u8; QUESTION_COUNT],
}

impl AnswerSheet {
    pub fn new(survey_index: u32, answers: &BTreeMap<QuestionId, u8>) -> Result<Self, ScoringError> {
        let missing: Vec<QuestionId> = QuestionId::all().filter(|id| !answers.contains_key(id)).collect();
        if !missing.is_empty() {
            return Err(ScoringError::IncompleteSheet { survey_index, missing });
        }
        let mut flat = [0u8; QUESTION_COUNT];
        for (&id, &value) in answers {
            flat[id.index()] = value;
        }
        AnswerSheet::from_scores(survey_index, flat)
    }

    pub fn from_scores(survey_index: u32, answers: [u8; QUESTION_COUNT]) -> Result<Self, ScoringError> {
        for id in QuestionId::all() {
            let value = answers[id.index()];
            if !(1..=5).contains(&value) {
                return Err(ScoringError::AnswerOutOfRange { survey_index, question: id, value });
            }
        }
        Ok(AnswerSheet { survey_index, answers })
    }

    pub fn survey_index(&self) -> u32 {
        self.survey_index
    }

    pub fn answer(&self, id: QuestionId) -> u8 {
        self.answers[id.index()]
    }
}

/// A population of complete sheets for one (model, style) cell.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PopulationSample {
    pub id: PopulationId,
    /// Provider model name used on the wire (the population label carries the
    /// display name).
    pub model_id: String,
    sheets: Vec<AnswerSheet>,
}

impl PopulationSample {
    pub fn new(id: PopulationId, model_id: impl Into<String>, sheets: Vec<AnswerSheet>) -> Self {
        PopulationSample { id, model_id: model_id.into(), sheets }
    }

    pub fn sheets(&self) -> &[AnswerSheet] {
        &self.sheets
    }

    pub fn len(&self) -> usize {
        self.sheets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sheets.is_empty()
    }
}

/// Per-question arithmetic means over a population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionMeans {
    mean: [f64; QUESTION_COUNT],
    pub n: usize,
}

impl QuestionMeans {
    /// Builds means directly; used by property tests and replay tooling.
    /// Values must already be in [1,5].
    pub fn from_means(mean: [f64; QUESTION_COUNT], n: usize) -> Result<Self, ScoringError> {
        for id in QuestionId::all() {
            let value = mean[id.index()];
            if !(1.0..=5.0).contains(&value) {
                return Err(ScoringError::MeanOutOfRange { question: id, value });
            }
        }
        Ok(QuestionMeans { mean, n })
    }

    pub fn mean(&self, id: QuestionId) -> f64 {
        self.mean[id.index()]
    }
}

/// The six Table 4 range-correction constants. Override as a complete set
/// only; per-constant tweaks would silently skew single dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimensionConstants {
    pub pdi: f64,
    pub idv: f64,
    pub mas: f64,
    pub uai: f64,
    pub lto: f64,
    pub ivr: f64,
}

impl Default for DimensionConstants {
    fn default() -> Self {
        DimensionConstants { pdi: 15.0, idv: 11.5, mas: 67.5, uai: 82.5, lto: 44.0, ivr: 45.5 }
    }
}

/// The six Hofstede dimensions, in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dimension {
    Pdi,
    Idv,
    Mas,
    Uai,
    Lto,
    Ivr,
}

impl Dimension {
    pub const ALL: [Dimension; 6] =
        [Dimension::Pdi, Dimension::Idv, Dimension::Mas, Dimension::Uai, Dimension::Lto, Dimension::Ivr];

    pub fn name(self) -> &'static str {
        match self {
            Dimension::Pdi => "PDI",
            Dimension::Idv => "IDV",
            Dimension::Mas => "MAS",
            Dimension::Uai => "UAI",
            Dimension::Lto => "LTO",
            Dimension::Ivr => "IVR",
        }
    }
}

/// Computed dimension scores in index points; unclamped by design.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimensionScores {
    pub pdi: f64,
    pub idv: f64,
    pub mas: f64,
    pub uai: f64,
    pub lto: f64,
    pub ivr: f64,
}

impl DimensionScores {
    pub fn from_array(values: [f64; 6]) -> Self {
        DimensionScores {
            pdi: values[0],
            idv: values[1],
            mas: values[2],
            uai: values[3],
            lto: values[4],
            ivr: values[5],
        }
    }

    pub fn as_array(&self) -> [f64; 6] {
        [self.pdi, self.idv, self.mas, self.uai, self.lto, self.ivr]
    }

    pub fn get(&self, dimension: Dimension) -> f64 {
        self.as_array()[Dimension::ALL.iter().position(|d| *d == dimension).expect("member")]
    }
}

/// Averages every question over the population; hard-errors below the
/// Hofstede minimum of 20 sheets.
pub fn compute_means(pop: &PopulationSample) -> Result<QuestionMeans, ScoringError> {
    compute_means_with_floor(pop, MIN_POPULATION)
}

/// Like [`compute_means`] but with an explicit floor, for runs that opt into
/// small populations; callers must tag downstream rows as non-conformant.
pub fn compute_means_with_floor(pop: &PopulationSample, floor: usize) -> Result<QuestionMeans, ScoringError> {
    if pop.len() < floor.max(1) {
        return Err(ScoringError::MinimumPopulation {
            minimum: floor.max(1),
            actual: pop.len(),
            incomplete: Vec::new(),
        });
    }
    let mut totals = [0.0f64; QUESTION_COUNT];
    for sheet in pop.sheets() {
        for id in QuestionId::all() {
            totals[id.index()] += f64::from(sheet.answer(id));
        }
    }
    let n = pop.len();
    let mut mean = [0.0f64; QUESTION_COUNT];
    for (slot, total) in mean.iter_mut().zip(totals) {
        *slot = total / n as f64;
    }
    QuestionMeans::from_means(mean, n)
}

/// The six dimension equations over question means.
pub fn compute_dimensions(means: &QuestionMeans, c: &DimensionConstants) -> DimensionScores {
    let m = |number: u8| means.mean(QuestionId::new(number).expect("questions 1..24"));
    DimensionScores {
        pdi: 35.0 * (m(7) - m(2)) + 25.0 * (m(20) - m(23)) + c.pdi,
        idv: 35.0 * (m(4) - m(1)) + 35.0 * (m(9) - m(6)) + c.idv,
        mas: 35.0 * (m(5) - m(3)) + 35.0 * (m(8) - m(10)) + c.mas,
        uai: 40.0 * (m(18) - m(15)) + 25.0 * (m(21) - m(24)) + c.uai,
        lto: 40.0 * (m(13) - m(14)) + 25.0 * (m(19) - m(22)) + c.lto,
        ivr: 35.0 * (m(12) - m(11)) + 40.0 * (m(17) - m(16)) + c.ivr,
    }
}

/// Rebuilds a population from journal records: per survey and question the
/// highest-attempt parsed score wins, only complete 24-answer sheets count,
/// and sheets keep ascending survey order so replays are deterministic.
pub fn assemble_population(records: &[PromptRecord], id: &PopulationId) -> Result<PopulationSample, ScoringError> {
    assemble_population_with_floor(records, id, MIN_POPULATION)
}

pub fn assemble_population_with_floor(
    records: &[PromptRecord],
    id: &PopulationId,
    floor: usize,
) -> Result<PopulationSample, ScoringError> {
    let label = id.label();
    let mut by_survey: BTreeMap<u32, BTreeMap<QuestionId, (u32, u8)>> = BTreeMap::new();
    let mut model_id = None;
    for record in records.iter().filter(|r| r.population_id == label) {
        model_id.get_or_insert_with(|| record.model_id.clone());
        let Some(score) = record.parsed_score else { continue };
        let best = by_survey.entry(record.survey_index).or_default().entry(record.question_id);
        match best {
            std::collections::btree_map::Entry::Occupied(mut slot) => {
                if record.attempt >= slot.get().0 {
                    slot.insert((record.attempt, score));
                }
            }
            std::collections::btree_map::Entry::Vacant(slot) => {
                slot.insert((record.attempt, score));
            }
        }
    }
    let Some(model_id) = model_id else {
        return Err(ScoringError::NoRecords(label));
    };

    let mut sheets = Vec::new();
    let mut incomplete = Vec::new();
    for (survey_index, answers) in by_survey {
        if answers.len() == QUESTION_COUNT {
            let flat: BTreeMap<QuestionId, u8> =
                answers.into_iter().map(|(q, (_, score))| (q, score)).collect();
            sheets.push(AnswerSheet::new(survey_index, &flat)?);
        } else {
            incomplete.push(survey_index);
        }
    }
    if sheets.len() < floor.max(1) {
        return Err(ScoringError::MinimumPopulation {
            minimum: floor.max(1),
            actual: sheets.len(),
            incomplete,
        });
    }
    Ok(PopulationSample::new(id.clone(), model_id, sheets))
}

/// Survey indices with complete sheets in `records` for `id`; resume logic
/// uses this to skip finished work.
pub fn complete_survey_indices(records: &[PromptRecord], id: &PopulationId) -> BTreeSet<u32> {
    let label = id.label();
    let mut answered: BTreeMap<u32, BTreeSet<QuestionId>> = BTreeMap::new();
    for record in records.iter().filter(|r| r.population_id == label) {
        if record.parsed_score.is_some() {
            answered.entry(record.survey_index).or_default().insert(record.question_id);
        }
    }
    answered
        .into_iter()
        .filter(|(_, qs)| qs.len() == QUESTION_COUNT)
        .map(|(survey, _)| survey)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::client::PromptRecord;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn constant_sheet(survey_index: u32, value: u8) -> AnswerSheet {
        AnswerSheet::from_scores(survey_index, [value; QUESTION_COUNT]).unwrap()
    }

    fn population(sheets: Vec<AnswerSheet>) -> PopulationSample {
        let id = PopulationId::from_label("GPT-4o_en").unwrap();
        PopulationSample::new(id, "gpt-4o", sheets)
    }

    fn qid(number: u8) -> QuestionId {
        QuestionId::new(number).unwrap()
    }

    #[test]
    fn constant_population_yields_the_constants() {
        let pop = population((0..20).map(|i| constant_sheet(i, 3)).collect());
        let means = compute_means(&pop).unwrap();
        for id in QuestionId::all() {
            assert_eq!(means.mean(id), 3.0);
        }
        let scores = compute_dimensions(&means, &DimensionConstants::default());
        assert_eq!(scores.as_array(), [15.0, 11.5, 67.5, 82.5, 44.0, 45.5]);
    }

    #[test]
    fn split_answers_average() {
        let sheets: Vec<AnswerSheet> = (0..20)
            .map(|i| {
                let mut answers = [3u8; QUESTION_COUNT];
                answers[qid(7).index()] = if i < 10 { 4 } else { 2 };
                AnswerSheet::from_scores(i, answers).unwrap()
            })
            .collect();
        let means = compute_means(&population(sheets)).unwrap();
        assert_eq!(means.mean(qid(7)), 3.0);
    }

    #[test]
    fn nineteen_sheets_is_too_small() {
        let pop = population((0..19).map(|i| constant_sheet(i, 3)).collect());
        let err = compute_means(&pop).unwrap_err();
        assert_eq!(
            err,
            ScoringError::MinimumPopulation { minimum: 20, actual: 19, incomplete: vec![] }
        );
        assert!(err.to_string().contains("19"));
        assert!(err.to_string().contains("20"));
    }

    #[test]
    fn pdi_formula_arithmetic() {
        let mut mean = [3.0f64; QUESTION_COUNT];
        mean[qid(7).index()] = 3.0;
        mean[qid(2).index()] = 2.0;
        mean[qid(20).index()] = 4.0;
        mean[qid(23).index()] = 2.0;
        let means = QuestionMeans::from_means(mean, 20).unwrap();
        let scores = compute_dimensions(&means, &DimensionConstants::default());
        // 35*(3-2) + 25*(4-2) + 15
        assert_eq!(scores.pdi, 100.0);
    }

    // Fixture population with deterministic skewed answers; expectations were
    // fixed ahead of time by tabulating the same formula by hand.
    fn fixture_answer(question: u8, sheet: u32) -> u8 {
        let q = u32::from(question);
        let s = sheet;
        (1 + (3 * q + 7 * s + s * s + s / 3 + q * s) % 5) as u8
    }

    #[test]
    fn fixture_population_matches_hand_computed_scores() {
        let sheets: Vec<AnswerSheet> = (0..20)
            .map(|s| {
                let mut answers = [0u8; QUESTION_COUNT];
                for id in QuestionId::all() {
                    answers[id.index()] = fixture_answer(id.number(), s);
                }
                AnswerSheet::from_scores(s, answers).unwrap()
            })
            .collect();
        let means = compute_means(&population(sheets)).unwrap();
        let expected_head = [3.1, 3.35, 3.1, 2.85, 2.6];
        for (i, want) in expected_head.iter().enumerate() {
            let got = means.mean(qid(i as u8 + 1));
            assert!((got - want).abs() < 1e-9, "m{:02}: {got} vs {want}", i + 1);
        }
        let scores = compute_dimensions(&means, &DimensionConstants::default());
        let expected = [2.5, -6.0, 67.5, 108.75, 41.5, 64.25];
        for (got, want) in scores.as_array().iter().zip(expected) {
            assert!((got - want).abs() < 1e-9, "{got} vs {want}");
        }
    }

    #[test]
    fn translation_invariance_per_equation() {
        let mut rng = StdRng::seed_from_u64(11);
        let pairs: [(u8, u8); 6] = [(7, 2), (4, 1), (5, 3), (18, 15), (13, 14), (12, 11)];
        for _ in 0..50 {
            let mut mean = [0.0f64; QUESTION_COUNT];
            for slot in mean.iter_mut() {
                *slot = rng.gen_range(2.0..4.0);
            }
            let base = QuestionMeans::from_means(mean, 20).unwrap();
            let scores = compute_dimensions(&base, &DimensionConstants::default());
            for (dim_index, (plus, minus)) in pairs.iter().enumerate() {
                let delta = rng.gen_range(-0.5..0.5);
                let mut shifted = mean;
                shifted[qid(*plus).index()] += delta;
                shifted[qid(*minus).index()] += delta;
                let shifted = QuestionMeans::from_means(shifted, 20).unwrap();
                let moved = compute_dimensions(&shifted, &DimensionConstants::default());
                let got = moved.as_array()[dim_index];
                let want = scores.as_array()[dim_index];
                assert!((got - want).abs() < 1e-9, "dimension {dim_index}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn permutation_invariance() {
        let mut rng = StdRng::seed_from_u64(12);
        let mut sheets: Vec<AnswerSheet> = (0..20)
            .map(|i| {
                let mut answers = [0u8; QUESTION_COUNT];
                for slot in answers.iter_mut() {
                    *slot = rng.gen_range(1..=5);
                }
                AnswerSheet::from_scores(i, answers).unwrap()
            })
            .collect();
        let forward = compute_means(&population(sheets.clone())).unwrap();
        sheets.reverse();
        let backward = compute_means(&population(sheets)).unwrap();
        for id in QuestionId::all() {
            assert_eq!(forward.mean(id), backward.mean(id));
        }
    }

    #[test]
    fn quantization_and_envelope_at_n20() {
        let mut rng = StdRng::seed_from_u64(13);
        let constants = DimensionConstants::default();
        let offsets = constants.as_offsets();
        for _ in 0..100 {
            let sheets: Vec<AnswerSheet> = (0..20)
                .map(|i| {
                    let mut answers = [0u8; QUESTION_COUNT];
                    for slot in answers.iter_mut() {
                        *slot = rng.gen_range(1..=5);
                    }
                    AnswerSheet::from_scores(i, answers).unwrap()
                })
                .collect();
            let means = compute_means(&population(sheets)).unwrap();
            for id in QuestionId::all() {
                let scaled = means.mean(id) * 20.0;
                assert!((scaled - scaled.round()).abs() < 1e-9);
            }
            let scores = compute_dimensions(&means, &constants);
            for (score, offset) in scores.as_array().iter().zip(offsets) {
                let quarters = score * 4.0;
                assert!((quarters - quarters.round()).abs() < 1e-6, "not a quarter point: {score}");
                assert!(*score >= offset - 240.0 - 1e-9 && *score <= offset + 240.0 + 1e-9);
            }
        }
    }

    impl DimensionConstants {
        fn as_offsets(&self) -> [f64; 6] {
            [self.pdi, self.idv, self.mas, self.uai, self.lto, self.ivr]
        }
    }

    fn record(survey_index: u32, question: u8, attempt: u32, score: Option<u8>) -> PromptRecord {
        PromptRecord::for_tests("GPT-4o_en", survey_index, qid(question), attempt, score)
    }

    #[test]
    fn assemble_takes_highest_parsed_attempt() {
        let id = PopulationId::from_label("GPT-4o_en").unwrap();
        let mut records = Vec::new();
        for survey in 0..20 {
            for q in 1..=24u8 {
                records.push(record(survey, q, 1, Some(3)));
            }
        }
        // survey 0, m07: unparsable attempt 2 then parsed attempt 3.
        records.push(record(0, 7, 2, None));
        records.push(record(0, 7, 3, Some(4)));
        let pop = assemble_population(&records, &id).unwrap();
        assert_eq!(pop.len(), 20);
        assert_eq!(pop.sheets()[0].answer(qid(7)), 4);
        assert_eq!(pop.model_id, "mock");
    }

    #[test]
    fn assemble_excludes_incomplete_surveys() {
        let id = PopulationId::from_label("GPT-4o_en").unwrap();
        let mut records = Vec::new();
        for survey in 0..21 {
            for q in 1..=24u8 {
                if survey == 7 && q == 13 {
                    records.push(record(survey, q, 1, None));
                } else {
                    records.push(record(survey, q, 1, Some(2)));
                }
            }
        }
        let pop = assemble_population(&records, &id).unwrap();
        assert_eq!(pop.len(), 20);
        assert!(pop.sheets().iter().all(|s| s.survey_index() != 7));

        // Dropping one more survey takes completeness below the floor.
        let records: Vec<PromptRecord> =
            records.into_iter().filter(|r| r.survey_index != 11).collect();
        let err = assemble_population(&records, &id).unwrap_err();
        match err {
            ScoringError::MinimumPopulation { minimum, actual, incomplete } => {
                assert_eq!(minimum, 20);
                assert_eq!(actual, 19);
                assert_eq!(incomplete, vec![7]);
            }
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn assemble_requires_records() {
        let id = PopulationId::from_label("GPT-4o_en").unwrap();
        let err = assemble_population(&[], &id).unwrap_err();
        assert_eq!(err.to_string(), "no records for population: GPT-4o_en");
    }

    #[test]
    fn complete_indices_track_parsed_coverage() {
        let id = PopulationId::from_label("GPT-4o_en").unwrap();
        let mut records = Vec::new();
        for q in 1..=24u8 {
            records.push(record(3, q, 1, Some(1)));
            if q != 13 {
                records.push(record(4, q, 1, Some(1)));
            }
        }
        let complete = complete_survey_indices(&records, &id);
        assert!(complete.contains(&3));
        assert!(!complete.contains(&4));
    }
}
