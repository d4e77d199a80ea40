//! Campaign orchestration: runs every (model, language, culture) population
//! per the survey protocol, journaling each exchange and summarizing the
//! outcome in a manifest. Surveys go out in batches; unparsable answers are
//! re-asked up to the per-question attempt cap; surveys that cannot complete
//! are replaced with fresh indices under a bounded slot budget.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::client::{
    journal_path, journal_recover, BackoffPolicy, ClientError, CompletionContext,
    CompletionSource, EndpointConfig, HttpEndpoint, JournalWriter, MockRespondent,
    MockRespondentSpec, PromptRecord,
};
use crate::corpus::SurveyInstrument;
use crate::parser::parse_likert;
use crate::scoring::MIN_POPULATION;
use crate::types::{Culture, Language, PopulationId, PromptStyle, QuestionId, QUESTION_COUNT};

/// Survey slots a single invocation may open per population, as a multiple
/// of the population target; bounds cost against hostile endpoints.
pub const SLOT_BUDGET_FACTOR: u32 = 3;

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error("invalid run matrix: {0}")]
    InvalidMatrix(String),
    #[error(transparent)]
    Client(#[from] ClientError),
    #[error("manifest error: {0}")]
    Manifest(String),
}

fn default_surveys() -> u32 {
    20
}
fn default_batch() -> u32 {
    5
}
fn default_runs() -> u32 {
    4
}
fn default_languages() -> Vec<Language> {
    Language::ALL.to_vec()
}
fn default_cultures() -> Vec<Culture> {
    Culture::ALL.to_vec()
}

/// Declarative campaign description. Checked-in examples name credential
/// environment variables only; secrets never live in config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunMatrix {
    #[serde(rename = "model")]
    pub models: Vec<EndpointConfig>,
    #[serde(default = "default_languages")]
    pub languages: Vec<Language>,
    #[serde(default = "default_cultures")]
    pub cultures: Vec<Culture>,
    #[serde(default = "default_surveys")]
    pub surveys_per_population: u32,
    #[serde(default = "default_batch")]
    pub batch_size: u32,
    #[serde(default = "default_runs")]
    pub runs_per_population: u32,
    pub output_dir: PathBuf,
    /// Lifts the 20-survey population floor; downstream reports flag the
    /// population as non-conformant.
    #[serde(default)]
    pub allow_small: bool,
}

impl RunMatrix {
    pub fn load(path: &Path) -> Result<RunMatrix, RunnerError> {
        let raw = std::fs::read_to_string(path)
            .map_err(|e| RunnerError::InvalidMatrix(format!("{}: {e}", path.display())))?;
        RunMatrix::from_toml_str(&raw)
    }

    pub fn from_toml_str(raw: &str) -> Result<RunMatrix, RunnerError> {
        let matrix: RunMatrix =
            toml::from_str(raw).map_err(|e| RunnerError::InvalidMatrix(e.to_string()))?;
        matrix.validate()?;
        Ok(matrix)
    }

    pub fn validate(&self) -> Result<(), RunnerError> {
        let invalid = |msg: String| Err(RunnerError::InvalidMatrix(msg));
        if self.models.is_empty() {
            return invalid("at least one model is required".into());
        }
        let mut labels = BTreeSet::new();
        for model in &self.models {
            model.validate()?;
            if !labels.insert(model.label().to_owned()) {
                return invalid(format!("duplicate model label {:?}", model.label()));
            }
        }
        if self.languages.is_empty() {
            return invalid("at least one language is required".into());
        }
        if self.cultures.is_empty() {
            return invalid("at least one culture is required".into());
        }
        for (name, len, distinct) in [
            ("languages", self.languages.len(), self.languages.iter().collect::<BTreeSet<_>>().len()),
            ("cultures", self.cultures.len(), self.cultures.iter().collect::<BTreeSet<_>>().len()),
        ] {
            if len != distinct {
                return invalid(format!("{name} must not repeat"));
            }
        }
        if self.surveys_per_population < 1 || self.batch_size < 1 || self.runs_per_population < 1 {
            return invalid("surveys_per_population, batch_size and runs_per_population must be ≥ 1".into());
        }
        if self.batch_size * self.runs_per_population != self.surveys_per_population {
            return invalid(format!(
                "batch_size × runs_per_population must equal surveys_per_population ({} × {} ≠ {})",
                self.batch_size, self.runs_per_population, self.surveys_per_population
            ));
        }
        if self.surveys_per_population < MIN_POPULATION as u32 && !self.allow_small {
            return invalid(format!(
                "surveys_per_population {} is below the population floor {}; set allow_small to override",
                self.surveys_per_population, MIN_POPULATION
            ));
        }
        Ok(())
    }

    /// Every population cell, models outer, prompt styles in presentation
    /// order; this is also the manifest order.
    pub fn populations(&self) -> Vec<PopulationId> {
        let mut cells = Vec::new();
        for model in &self.models {
            for style in PromptStyle::ALL {
                if self.languages.contains(&style.language) && self.cultures.contains(&style.culture) {
                    cells.push(PopulationId::new(model.label(), style));
                }
            }
        }
        cells
    }

    pub fn model_config(&self, label: &str) -> Option<&EndpointConfig> {
        self.models.iter().find(|m| m.label() == label)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellStatus {
    Pending,
    Running,
    Complete,
    Failed,
}

/// Per-population outcome summary held in the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationStatus {
    pub population_id: String,
    pub status: CellStatus,
    pub journal: String,
    pub requests: u64,
    pub retries: u64,
    pub unparsable: u64,
    pub transport_failures: u64,
    pub complete_surveys: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature_clamped_to: Option<f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub failure_histogram: BTreeMap<QuestionId, u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl PopulationStatus {
    fn pending(population: &PopulationId) -> PopulationStatus {
        PopulationStatus {
            population_id: population.label(),
            status: CellStatus::Pending,
            journal: format!("{}.journal", population.label()),
            requests: 0,
            retries: 0,
            unparsable: 0,
            transport_failures: 0,
            complete_surveys: 0,
            temperature_clamped_to: None,
            failure_histogram: BTreeMap::new(),
            error: None,
        }
    }
}

/// Campaign summary persisted as `manifest.json` in the output directory and
/// rewritten at every cell boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub matrix: RunMatrix,
    pub instrument_version: String,
    pub started_at: DateTime<Utc>,
    pub finished_at: Option<DateTime<Utc>>,
    pub populations: Vec<PopulationStatus>,
}

impl RunManifest {
    pub fn path(output_dir: &Path) -> PathBuf {
        output_dir.join("manifest.json")
    }

    fn new(matrix: RunMatrix, instrument_version: &str) -> RunManifest {
        let populations = matrix.populations().iter().map(PopulationStatus::pending).collect();
        RunManifest {
            matrix,
            instrument_version: instrument_version.to_owned(),
            started_at: Utc::now(),
            finished_at: None,
            populations,
        }
    }

    pub fn load(output_dir: &Path) -> Result<RunManifest, RunnerError> {
        let path = RunManifest::path(output_dir);
        let raw = std::fs::read_to_string(&path)
            .map_err(|e| RunnerError::Manifest(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&raw).map_err(|e| RunnerError::Manifest(format!("{}: {e}", path.display())))
    }

    /// Atomic rewrite: temp file then rename, so readers never see a torn
    /// manifest.
    pub fn save(&self, output_dir: &Path) -> Result<(), RunnerError> {
        let path = RunManifest::path(output_dir);
        let temp = output_dir.join("manifest.json.tmp");
        let raw = serde_json::to_string_pretty(self)
            .map_err(|e| RunnerError::Manifest(e.to_string()))?;
        std::fs::write(&temp, raw).map_err(|e| RunnerError::Manifest(format!("{}: {e}", temp.display())))?;
        std::fs::rename(&temp, &path)
            .map_err(|e| RunnerError::Manifest(format!("{}: {e}", path.display())))?;
        Ok(())
    }

    pub fn all_complete(&self) -> bool {
        self.populations.iter().all(|p| p.status == CellStatus::Complete)
    }

    fn position(&self, label: &str) -> Option<usize> {
        self.populations.iter().position(|p| p.population_id == label)
    }
}

/// Knobs that are not part of the declarative matrix.
#[derive(Debug, Clone, Copy)]
pub struct RunOptions {
    pub backoff: BackoffPolicy,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { backoff: BackoffPolicy::default() }
    }
}

/// Outcome of one population cell.
#[derive(Debug)]
pub struct PopulationRun {
    pub journal_path: PathBuf,
    pub status: PopulationStatus,
}

struct Task {
    survey_index: u32,
    question_id: QuestionId,
    attempt: u32,
}

#[derive(Default)]
struct Counters {
    requests: AtomicU64,
    retries: AtomicU64,
    unparsable: AtomicU64,
    transport_failures: AtomicU64,
}

struct WaveSlot {
    answered: BTreeSet<QuestionId>,
    dead: bool,
}

struct CellShared<'a> {
    instrument: &'a SurveyInstrument,
    source: &'a dyn CompletionSource,
    writer: &'a JournalWriter,
    config: &'a EndpointConfig,
    label: String,
    language: Language,
    culture: Culture,
    backoff: BackoffPolicy,
    queue: Mutex<VecDeque<Task>>,
    in_flight: AtomicUsize,
    slots: Mutex<BTreeMap<u32, WaveSlot>>,
    counters: &'a Counters,
    histogram: Mutex<BTreeMap<QuestionId, u32>>,
    fatal: Mutex<Option<ClientError>>,
}

/// One survey's resumable state: what is already answered and the next
/// attempt number per outstanding question.
struct SurveySeed {
    index: u32,
    answered: BTreeSet<QuestionId>,
    next_attempt: BTreeMap<QuestionId, u32>,
}

impl SurveySeed {
    fn fresh(index: u32) -> SurveySeed {
        SurveySeed { index, answered: BTreeSet::new(), next_attempt: BTreeMap::new() }
    }
}

/// Runs one population to completion or failure. Resumes from the existing
/// journal: complete surveys are never re-run, partially answered surveys
/// continue from their recorded attempts.
pub fn run_population(
    matrix: &RunMatrix,
    population: &PopulationId,
    source: &dyn CompletionSource,
    instrument: &SurveyInstrument,
    options: &RunOptions,
) -> Result<PopulationRun, RunnerError> {
    let config = matrix.model_config(&population.model).ok_or_else(|| {
        RunnerError::InvalidMatrix(format!("no model config labelled {:?}", population.model))
    })?;
    let label = population.label();
    std::fs::create_dir_all(&matrix.output_dir).map_err(ClientError::Io)?;
    let path = journal_path(&matrix.output_dir, population);
    let (existing, _) = journal_recover(&path)?;
    let writer = JournalWriter::open(&path)?;

    // Reconstruct per-survey state from the journal.
    let mut answered_by_survey: BTreeMap<u32, BTreeSet<QuestionId>> = BTreeMap::new();
    let mut attempts_by_survey: BTreeMap<u32, BTreeMap<QuestionId, u32>> = BTreeMap::new();
    let counters = Counters::default();
    for record in existing.iter().filter(|r| r.population_id == label) {
        counters.requests.fetch_add(1, Ordering::Relaxed);
        if record.attempt > 1 {
            counters.retries.fetch_add(1, Ordering::Relaxed);
        }
        if record.parsed_score.is_none() {
            if record.raw_response.is_empty() {
                counters.transport_failures.fetch_add(1, Ordering::Relaxed);
            } else {
                counters.unparsable.fetch_add(1, Ordering::Relaxed);
            }
        }
        let answered = answered_by_survey.entry(record.survey_index).or_default();
        if record.parsed_score.is_some() {
            answered.insert(record.question_id);
        }
        let attempts = attempts_by_survey.entry(record.survey_index).or_default();
        let best = attempts.entry(record.question_id).or_insert(0);
        *best = (*best).max(record.attempt);
    }

    let mut complete: BTreeSet<u32> = answered_by_survey
        .iter()
        .filter(|(_, answered)| answered.len() == QUESTION_COUNT)
        .map(|(survey, _)| *survey)
        .collect();
    let mut resumable: Vec<SurveySeed> = Vec::new();
    for (survey, attempts) in &attempts_by_survey {
        if complete.contains(survey) {
            continue;
        }
        let answered = answered_by_survey.get(survey).cloned().unwrap_or_default();
        let exhausted = QuestionId::all().any(|q| {
            !answered.contains(&q)
                && attempts.get(&q).copied().unwrap_or(0) >= config.max_attempts_per_question
        });
        if exhausted {
            continue; // dead in a previous invocation; replacements cover it
        }
        let next_attempt = attempts.iter().map(|(q, a)| (*q, a + 1)).collect();
        resumable.push(SurveySeed { index: *survey, answered, next_attempt });
    }
    resumable.reverse(); // pop() takes the lowest survey index first
    let mut next_index = attempts_by_survey.keys().max().map_or(0, |m| m + 1);

    let target = matrix.surveys_per_population as usize;
    let budget = SLOT_BUDGET_FACTOR * matrix.surveys_per_population;
    let mut slots_opened: u32 = 0;
    let mut histogram: BTreeMap<QuestionId, u32> = BTreeMap::new();

    while complete.len() < target {
        let mut wave: Vec<SurveySeed> = Vec::new();
        while wave.len() < matrix.batch_size as usize && complete.len() + wave.len() < target {
            if let Some(seed) = resumable.pop() {
                wave.push(seed);
            } else if slots_opened < budget {
                wave.push(SurveySeed::fresh(next_index));
                next_index += 1;
                slots_opened += 1;
            } else {
                break;
            }
        }
        if wave.is_empty() {
            break; // slot budget exhausted
        }
        let style = population.style;
        let shared = CellShared {
            instrument,
            source,
            writer: &writer,
            config,
            label: label.clone(),
            language: style.language,
            culture: style.culture,
            backoff: options.backoff,
            queue: Mutex::new(VecDeque::new()),
            in_flight: AtomicUsize::new(0),
            slots: Mutex::new(BTreeMap::new()),
            counters: &counters,
            histogram: Mutex::new(BTreeMap::new()),
            fatal: Mutex::new(None),
        };
        {
            let mut slots = shared.slots.lock().expect("slots lock");
            let mut queue = shared.queue.lock().expect("queue lock");
            for seed in wave {
                for question_id in QuestionId::all() {
                    if !seed.answered.contains(&question_id) {
                        queue.push_back(Task {
                            survey_index: seed.index,
                            question_id,
                            attempt: seed.next_attempt.get(&question_id).copied().unwrap_or(1),
                        });
                    }
                }
                slots.insert(seed.index, WaveSlot { answered: seed.answered, dead: false });
            }
        }

        let workers = (config.max_concurrency).max(1);
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| worker_loop(&shared));
            }
        });

        if let Some(fatal) = shared.fatal.lock().expect("fatal lock").take() {
            return Err(fatal.into());
        }
        for (survey, slot) in shared.slots.lock().expect("slots lock").iter() {
            if slot.answered.len() == QUESTION_COUNT {
                complete.insert(*survey);
            }
        }
        for (question, count) in shared.histogram.lock().expect("histogram lock").iter() {
            *histogram.entry(*question).or_insert(0) += count;
        }
    }

    let complete_surveys = complete.len() as u32;
    let succeeded = complete.len() >= target;
    let status = PopulationStatus {
        population_id: label.clone(),
        status: if succeeded { CellStatus::Complete } else { CellStatus::Failed },
        journal: format!("{label}.journal"),
        requests: counters.requests.load(Ordering::Relaxed),
        retries: counters.retries.load(Ordering::Relaxed),
        unparsable: counters.unparsable.load(Ordering::Relaxed),
        transport_failures: counters.transport_failures.load(Ordering::Relaxed),
        complete_surveys,
        temperature_clamped_to: source.clamped_temperature(),
        failure_histogram: histogram,
        error: if succeeded {
            None
        } else {
            Some(format!(
                "attempt budget exhausted: {complete_surveys} of {target} surveys complete after {slots_opened} new survey slots"
            ))
        },
    };
    Ok(PopulationRun { journal_path: path, status })
}

fn worker_loop(shared: &CellShared<'_>) {
    loop {
        if shared.fatal.lock().expect("fatal lock").is_some() {
            return;
        }
        let task = {
            let mut queue = shared.queue.lock().expect("queue lock");
            match queue.pop_front() {
                Some(task) => {
                    // Counted under the queue lock so idle workers never see
                    // (empty queue, zero in-flight) while a retry is pending.
                    shared.in_flight.fetch_add(1, Ordering::SeqCst);
                    Some(task)
                }
                None => None,
            }
        };
        let Some(task) = task else {
            if shared.in_flight.load(Ordering::SeqCst) == 0 {
                return;
            }
            std::thread::sleep(Duration::from_millis(1));
            continue;
        };
        run_task(shared, task);
        shared.in_flight.fetch_sub(1, Ordering::SeqCst);
    }
}

fn run_task(shared: &CellShared<'_>, task: Task) {
    if shared.slots.lock().expect("slots lock")[&task.survey_index].dead {
        return;
    }
    let messages = shared.instrument.render_prompt(task.question_id, shared.language, shared.culture);
    let ctx = CompletionContext {
        population_id: shared.label.clone(),
        survey_index: task.survey_index,
        question_id: task.question_id,
        attempt: task.attempt,
    };
    let outcome = shared.source.complete(&messages, &ctx);
    shared.counters.requests.fetch_add(1, Ordering::Relaxed);
    if task.attempt > 1 {
        shared.counters.retries.fetch_add(1, Ordering::Relaxed);
    }

    let mut backoff_hint = None;
    let mut needs_backoff = false;
    let (raw_response, parsed_score) = match &outcome {
        Ok(text) => {
            let parsed = parse_likert(text, shared.language).ok().map(|p| p.value);
            if parsed.is_none() {
                shared.counters.unparsable.fetch_add(1, Ordering::Relaxed);
            }
            (text.clone(), parsed)
        }
        Err(e) => {
            shared.counters.transport_failures.fetch_add(1, Ordering::Relaxed);
            backoff_hint = e.backoff_hint();
            needs_backoff = e.is_retryable();
            (String::new(), None)
        }
    };

    let record = PromptRecord {
        population_id: shared.label.clone(),
        survey_index: task.survey_index,
        question_id: task.question_id,
        attempt: task.attempt,
        system_text: messages.system,
        user_text: messages.user,
        raw_response,
        parsed_score,
        timestamp: Utc::now(),
        model_id: shared.config.model_id.clone(),
        temperature_clamped_to: shared.source.clamped_temperature(),
    };
    if let Err(e) = shared.writer.append(&record) {
        *shared.fatal.lock().expect("fatal lock") = Some(e);
        return;
    }

    match parsed_score {
        Some(_) => {
            let mut slots = shared.slots.lock().expect("slots lock");
            let slot = slots.get_mut(&task.survey_index).expect("slot exists");
            slot.answered.insert(task.question_id);
        }
        None if task.attempt < shared.config.max_attempts_per_question => {
            if needs_backoff {
                let delay =
                    shared.backoff.delay(task.attempt, backoff_hint, &mut rand::thread_rng());
                std::thread::sleep(delay);
            }
            shared.queue.lock().expect("queue lock").push_back(Task {
                survey_index: task.survey_index,
                question_id: task.question_id,
                attempt: task.attempt + 1,
            });
        }
        None => {
            let mut slots = shared.slots.lock().expect("slots lock");
            let slot = slots.get_mut(&task.survey_index).expect("slot exists");
            slot.dead = true;
            drop(slots);
            *shared
                .histogram
                .lock()
                .expect("histogram lock")
                .entry(task.question_id)
                .or_insert(0) += 1;
        }
    }
}

/// Runs the whole matrix with default sources: the mock respondent when a
/// spec is given, otherwise live HTTP endpoints (credentials resolved up
/// front so configuration errors precede any request).
pub fn run_matrix(matrix: &RunMatrix, mock: Option<&MockRespondentSpec>) -> Result<RunManifest, RunnerError> {
    matrix.validate()?;
    let mut sources: BTreeMap<String, Box<dyn CompletionSource>> = BTreeMap::new();
    for model in &matrix.models {
        let source: Box<dyn CompletionSource> = match mock {
            Some(spec) => Box::new(MockRespondent::new(spec.clone())?),
            None => Box::new(HttpEndpoint::new(model)?),
        };
        sources.insert(model.label().to_owned(), source);
    }
    run_matrix_with(matrix, &sources, SurveyInstrument::embedded(), &RunOptions::default())
}

/// Matrix run with caller-supplied completion sources, keyed by model label.
pub fn run_matrix_with(
    matrix: &RunMatrix,
    sources: &BTreeMap<String, Box<dyn CompletionSource>>,
    instrument: &SurveyInstrument,
    options: &RunOptions,
) -> Result<RunManifest, RunnerError> {
    matrix.validate()?;
    for model in &matrix.models {
        if !sources.contains_key(model.label()) {
            return Err(RunnerError::InvalidMatrix(format!(
                "no completion source for model {:?}",
                model.label()
            )));
        }
    }
    std::fs::create_dir_all(&matrix.output_dir).map_err(ClientError::Io)?;

    let manifest_path = RunManifest::path(&matrix.output_dir);
    let mut manifest = if manifest_path.exists() {
        let loaded = RunManifest::load(&matrix.output_dir)?;
        if loaded.matrix != *matrix {
            return Err(RunnerError::InvalidMatrix(format!(
                "{} belongs to a different run matrix; use a fresh output_dir",
                manifest_path.display()
            )));
        }
        loaded
    } else {
        RunManifest::new(matrix.clone(), instrument.version())
    };
    manifest.finished_at = None;

    for population in matrix.populations() {
        let label = population.label();
        let index = match manifest.position(&label) {
            Some(index) => index,
            None => {
                manifest.populations.push(PopulationStatus::pending(&population));
                manifest.populations.len() - 1
            }
        };
        if manifest.populations[index].status == CellStatus::Complete {
            continue;
        }
        manifest.populations[index].status = CellStatus::Running;
        manifest.save(&matrix.output_dir)?;

        let source = sources.get(&population.model).expect("source presence checked").as_ref();
        match run_population(matrix, &population, source, instrument, options) {
            Ok(run) => manifest.populations[index] = run.status,
            Err(e) => {
                // Cell failures stay local; sibling populations still run.
                log::error!("population {label} failed: {e}");
                manifest.populations[index].status = CellStatus::Failed;
                manifest.populations[index].error = Some(e.to_string());
            }
        }
        manifest.save(&matrix.output_dir)?;
    }

    manifest.finished_at = Some(Utc::now());
    manifest.save(&matrix.output_dir)?;
    Ok(manifest)
}
