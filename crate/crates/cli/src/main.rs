//! `vsm13`: administer the bilingual VSM13 survey against chat endpoints,
//! score journals into Hofstede dimensions, and emit alignment reports.
//!
//! Exit codes: 0 success, 2 run finished with failed cells, 3 invalid
//! configuration, 1 any other error.

use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Parser, Subcommand};
use vsm13_core::alignment::ReferenceSet;
use vsm13_core::client::{journal_load, ClientError, MockRespondentSpec};
use vsm13_core::published::run_golden_checks;
use vsm13_core::report::{emit_all, parse_scores_csv, ReportArtifacts, ReportBundle};
use vsm13_core::runner::{run_matrix, CellStatus, RunManifest, RunMatrix, RunnerError};
use vsm13_core::scoring::{
    assemble_population_with_floor, compute_dimensions, compute_means_with_floor,
    DimensionConstants, DimensionScores, MIN_POPULATION,
};
use vsm13_core::{Culture, Language, PopulationId};

#[derive(Parser)]
#[command(name = "vsm13", version, about = "Cultural alignment survey harness for chat endpoints")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Administer the survey matrix described by a TOML config.
    Run {
        /// Run matrix TOML (models, languages, cultures, output_dir).
        #[arg(long)]
        config: PathBuf,
        /// Answer from a seeded mock respondent spec instead of live endpoints.
        #[arg(long)]
        mock: Option<PathBuf>,
    },
    /// Score a directory of journals and emit the report artifacts.
    Score {
        /// Directory holding `<population>.journal` files.
        #[arg(long)]
        journal_dir: PathBuf,
        /// Artifact directory; defaults to `<journal-dir>/report`.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Score populations below the 20-sheet floor, tagging them in the report.
        #[arg(long)]
        allow_small: bool,
    },
    /// Rebuild report artifacts from an existing scores CSV.
    Report {
        /// A `scores.csv` produced by `score` (or hand-assembled in that shape).
        #[arg(long)]
        scores: PathBuf,
        /// Artifact directory; defaults to `report` next to the CSV.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Re-run the embedded verification suite against the recorded tables.
    VerifyPaper,
    /// Full offline pipeline: mock matrix run, scoring, artifacts.
    MockRun {
        /// Mock respondent spec TOML (seed plus per-question weights).
        #[arg(long)]
        spec: PathBuf,
        /// Working directory; defaults to `mock-run`.
        #[arg(long, default_value = "mock-run")]
        out_dir: PathBuf,
    },
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    let code = match dispatch(cli.command) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            exit_code_for(&err)
        }
    };
    std::process::exit(code);
}

/// Configuration mistakes exit 3 so callers can tell them from runtime
/// failures (1) and partially failed runs (2).
fn exit_code_for(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        let client = if let Some(client) = cause.downcast_ref::<ClientError>() {
            client
        } else if let Some(runner) = cause.downcast_ref::<RunnerError>() {
            match runner {
                RunnerError::InvalidMatrix(_) => return 3,
                RunnerError::Client(client) => client,
                RunnerError::Manifest(_) => continue,
            }
        } else {
            continue;
        };
        if matches!(
            client,
            ClientError::InvalidConfig(_)
                | ClientError::InvalidSpec(_)
                | ClientError::MissingCredential(_)
        ) {
            return 3;
        }
    }
    1
}

fn dispatch(command: Command) -> anyhow::Result<i32> {
    match command {
        Command::Run { config, mock } => {
            let matrix = RunMatrix::load(&config)?;
            let spec = mock
                .map(|path| {
                    MockRespondentSpec::load(&path)
                        .with_context(|| format!("mock spec {}", path.display()))
                })
                .transpose()?;
            let manifest = run_matrix(&matrix, spec.as_ref())?;
            print_manifest(&manifest);
            Ok(if manifest.all_complete() { 0 } else { 2 })
        }
        Command::Score { journal_dir, out_dir, allow_small } => {
            let out_dir = out_dir.unwrap_or_else(|| journal_dir.join("report"));
            let artifacts = score_journals(&journal_dir, &out_dir, allow_small)?;
            print_artifacts(&artifacts);
            Ok(0)
        }
        Command::Report { scores, out_dir } => {
            let out_dir = out_dir
                .unwrap_or_else(|| scores.parent().unwrap_or(Path::new(".")).join("report"));
            let text = std::fs::read_to_string(&scores)
                .with_context(|| format!("reading {}", scores.display()))?;
            let rows = parse_scores_csv(&text)?;
            anyhow::ensure!(!rows.is_empty(), "{} holds no score rows", scores.display());
            let mut caveats = Vec::new();
            let pairs: Vec<(PopulationId, DimensionScores)> = rows
                .iter()
                .map(|row| (row.population.clone(), row.scores))
                .collect();
            let references = ReferenceSet::embedded();
            let us = references.get("US")?;
            for row in &rows {
                let recomputed = vsm13_core::alignment::l1_distance(&row.scores, &us.values);
                if (recomputed - row.us_distance).abs() > 0.01 {
                    caveats.push(format!(
                        "{}: recorded US distance {} disagrees with the recomputed {:.2}",
                        row.population.label(),
                        row.us_distance,
                        recomputed
                    ));
                }
            }
            let bundle = ReportBundle::from_scores(&pairs, references, caveats)?;
            let artifacts = emit_all(&bundle, references, &out_dir)?;
            print_artifacts(&artifacts);
            Ok(0)
        }
        Command::VerifyPaper => {
            let checks = run_golden_checks();
            let mut all_pass = true;
            for check in &checks {
                let status = if check.pass { "PASS" } else { "FAIL" };
                all_pass &= check.pass;
                println!("{status} {}: {}", check.name, check.detail);
            }
            Ok(if all_pass { 0 } else { 1 })
        }
        Command::MockRun { spec, out_dir } => {
            let spec = MockRespondentSpec::load(&spec)
                .with_context(|| format!("mock spec {}", spec.display()))?;
            let matrix = mock_matrix(&out_dir);
            let manifest = run_matrix(&matrix, Some(&spec))?;
            print_manifest(&manifest);
            if !manifest.all_complete() {
                return Ok(2);
            }
            let artifacts =
                score_journals(&matrix.output_dir, &out_dir.join("report"), matrix.allow_small)?;
            print_artifacts(&artifacts);
            Ok(0)
        }
    }
}

/// The offline default: one mock model across all six prompt styles at the
/// published population shape (20 surveys as 4 runs of 5).
fn mock_matrix(out_dir: &Path) -> RunMatrix {
    RunMatrix {
        models: vec![vsm13_core::client::EndpointConfig {
            label: Some("mock".into()),
            model_id: "mock-respondent".into(),
            base_url: "http://offline.invalid".into(),
            credential_env: "VSM13_MOCK_UNUSED".into(),
            temperature: 2.0,
            max_concurrency: 4,
            timeout_s: 60,
            max_attempts_per_question: 5,
        }],
        languages: Language::ALL.to_vec(),
        cultures: Culture::ALL.to_vec(),
        surveys_per_population: 20,
        batch_size: 5,
        runs_per_population: 4,
        output_dir: out_dir.join("journals"),
        allow_small: false,
    }
}

fn print_manifest(manifest: &RunManifest) {
    for population in &manifest.populations {
        let status = match population.status {
            CellStatus::Complete => "complete",
            CellStatus::Failed => "failed",
            CellStatus::Running => "running",
            CellStatus::Pending => "pending",
        };
        let mut line = format!(
            "{}: {status} ({} surveys, {} requests, {} retries, {} unparsable)",
            population.population_id,
            population.complete_surveys,
            population.requests,
            population.retries,
            population.unparsable
        );
        if let Some(t) = population.temperature_clamped_to {
            line.push_str(&format!(", temperature clamped to {t}"));
        }
        if let Some(error) = &population.error {
            line.push_str(&format!(": {error}"));
        }
        println!("{line}");
    }
    println!(
        "manifest: {}",
        RunManifest::path(&manifest.matrix.output_dir).display()
    );
}

fn print_artifacts(artifacts: &ReportArtifacts) {
    println!("scores: {}", artifacts.scores_csv.display());
    match &artifacts.improvements_csv {
        Some(path) => println!("improvements: {}", path.display()),
        None => println!("improvements: not computable for this matrix (see report caveats)"),
    }
    println!("report: {}", artifacts.report_md.display());
    let n = artifacts.plots.len();
    let noun = if n == 1 { "population" } else { "populations" };
    println!("plots: {n} {noun}");
}

/// Scores every `<population>.journal` under `journal_dir` and emits the full
/// artifact set. Caveats record clamped temperatures, undersized populations,
/// and the re-ask protocol whenever unparsable responses exist.
fn score_journals(
    journal_dir: &Path,
    out_dir: &Path,
    allow_small: bool,
) -> anyhow::Result<ReportArtifacts> {
    let mut journals: Vec<PathBuf> = std::fs::read_dir(journal_dir)
        .with_context(|| format!("reading {}", journal_dir.display()))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|path| path.extension().is_some_and(|ext| ext == "journal"))
        .collect();
    journals.sort();
    anyhow::ensure!(
        !journals.is_empty(),
        "no .journal files under {}",
        journal_dir.display()
    );

    let floor = if allow_small { 1 } else { MIN_POPULATION };
    let constants = DimensionConstants::default();
    let mut pairs: Vec<(PopulationId, DimensionScores)> = Vec::new();
    let mut caveats = Vec::new();
    let mut unparsable = 0usize;
    for path in &journals {
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .with_context(|| format!("journal name {} is not unicode", path.display()))?;
        let population = PopulationId::from_label(stem)
            .with_context(|| format!("{} is not named <model>_<style>.journal", path.display()))?;
        let records = journal_load(path)
            .with_context(|| format!("loading journal {}", path.display()))?;
        unparsable += records
            .iter()
            .filter(|r| r.parsed_score.is_none() && !r.raw_response.is_empty())
            .count();
        if let Some(t) = records.iter().find_map(|r| r.temperature_clamped_to) {
            caveats.push(format!(
                "{}: endpoint rejected the configured temperature; answers were sampled at {t}",
                population.label()
            ));
        }
        let sample = assemble_population_with_floor(&records, &population, floor)
            .with_context(|| format!("assembling {}", population.label()))?;
        if sample.len() < MIN_POPULATION {
            caveats.push(format!(
                "{} scored from {} sheets, below the Hofstede minimum of {MIN_POPULATION} (non-conformant)",
                population.label(),
                sample.len()
            ));
        }
        let means = compute_means_with_floor(&sample, floor)?;
        pairs.push((population, compute_dimensions(&means, &constants)));
    }
    if unparsable > 0 {
        caveats.push(format!(
            "{unparsable} responses yielded no score and were re-asked within the attempt budget; population means can be sensitive to this protocol"
        ));
    }
    let references = ReferenceSet::embedded();
    let bundle = ReportBundle::from_scores(&pairs, references, caveats)?;
    Ok(emit_all(&bundle, references, out_dir)?)
}
