//! Emits the measurement artifacts: per-population score CSV, category
//! improvement CSV, a markdown report with classification badges, and
//! grouped-bar plots with sidecar data files carrying the exact numbers.

mod plot;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alignment::{
    alignment_distance, classify, improvement, AlignmentClass, AlignmentError, ImprovementRow,
    ReferenceSet,
};
use crate::published::IMPROVEMENT_LAYOUT;
use crate::scoring::DimensionScores;
use crate::types::{PopulationId, PromptStyle};

pub use plot::{emit_dimension_plot, PlotPaths};

pub const SCORES_CSV_HEADER: &str = "population,us_distance,china_distance,pdi,idv,mas,uai,lto,ivr";
pub const IMPROVEMENTS_CSV_HEADER: &str =
    "country,baseline_category,baseline_total,variant_category,variant_total,improvement_pct";

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("failed to write {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("missing category: {0}")]
    MissingCategory(String),
    #[error("population {0} appears more than once")]
    DuplicatePopulation(String),
    #[error("malformed scores csv at line {line}: {reason}")]
    MalformedCsv { line: usize, reason: String },
    #[error(transparent)]
    Alignment(#[from] AlignmentError),
}

/// One scored population: both alignment totals plus the six dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub population: PopulationId,
    pub us_distance: f64,
    pub china_distance: f64,
    pub scores: DimensionScores,
}

/// Classification badge for one (population, country) pair; `average` is the
/// raw per-dimension mean distance the badge was derived from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub population: PopulationId,
    pub country: String,
    pub class: AlignmentClass,
    pub average: f64,
}

/// Everything the emitters need, in one deterministic structure.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportBundle {
    pub scores_table: Vec<ScoreRow>,
    /// Empty when the data cannot cover all six improvement categories;
    /// [`emit_improvements_csv`] then reports exactly which one is missing.
    pub improvements_table: Vec<ImprovementRow>,
    pub classifications: Vec<Classification>,
    pub caveats: Vec<String>,
}

impl ReportBundle {
    /// Builds rows, classifications and (when the categories allow it) the
    /// improvement table from scored populations, keeping the caller's
    /// population order.
    pub fn from_scores(
        populations: &[(PopulationId, DimensionScores)],
        references: &ReferenceSet,
        caveats: Vec<String>,
    ) -> Result<ReportBundle, ReportError> {
        let us = references.get("US")?;
        let china = references.get("China")?;
        let mut scores_table = Vec::with_capacity(populations.len());
        let mut classifications = Vec::with_capacity(populations.len() * 2);
        let mut seen = std::collections::BTreeSet::new();
        for (population, scores) in populations {
            if !seen.insert(population.label()) {
                return Err(ReportError::DuplicatePopulation(population.label()));
            }
            let to_us = alignment_distance(population, scores, us);
            let to_china = alignment_distance(population, scores, china);
            for distance in [&to_us, &to_china] {
                classifications.push(Classification {
                    population: population.clone(),
                    country: distance.country.clone(),
                    class: classify(distance),
                    average: distance.average,
                });
            }
            scores_table.push(ScoreRow {
                population: population.clone(),
                us_distance: to_us.total,
                china_distance: to_china.total,
                scores: *scores,
            });
        }
        let improvements_table = build_improvements(&scores_table).unwrap_or_default();
        Ok(ReportBundle { scores_table, improvements_table, classifications, caveats })
    }
}

/// The six-row improvement table, or an error naming the first absent
/// category or model.
pub fn build_improvements(rows: &[ScoreRow]) -> Result<Vec<ImprovementRow>, ReportError> {
    let mut models: Vec<String> = Vec::new();
    for row in rows {
        if !models.contains(&row.population.model) {
            models.push(row.population.model.clone());
        }
    }
    let mut table = Vec::with_capacity(IMPROVEMENT_LAYOUT.len());
    for (country, baseline_suffix, variant_suffix) in IMPROVEMENT_LAYOUT {
        let baseline_style = PromptStyle::from_suffix(baseline_suffix).expect("layout suffix");
        let variant_style = PromptStyle::from_suffix(variant_suffix).expect("layout suffix");
        let baseline_total = category_total(rows, country, baseline_style, &models)?;
        let variant_total = category_total(rows, country, variant_style, &models)?;
        table.push(ImprovementRow {
            country: country.to_owned(),
            baseline_label: baseline_style.category_label().to_owned(),
            baseline_total,
            variant_label: variant_style.category_label().to_owned(),
            variant_total,
            improvement_pct: improvement(baseline_total, variant_total).map_err(AlignmentError::from)?,
        });
    }
    Ok(table)
}

fn category_total(
    rows: &[ScoreRow],
    country: &str,
    style: PromptStyle,
    models: &[String],
) -> Result<f64, ReportError> {
    let category = style.category_label();
    if !rows.iter().any(|r| r.population.style == style) {
        return Err(ReportError::MissingCategory(category.to_owned()));
    }
    let mut total = 0.0;
    for model in models {
        let mut matching =
            rows.iter().filter(|r| r.population.model == *model && r.population.style == style);
        let first = matching.next().ok_or_else(|| AlignmentError::MissingModel {
            model: model.clone(),
            category: category.to_owned(),
        })?;
        if matching.next().is_some() {
            return Err(AlignmentError::DuplicateModel {
                model: model.clone(),
                category: category.to_owned(),
            }
            .into());
        }
        total += match country {
            "US" => first.us_distance,
            _ => first.china_distance,
        };
    }
    Ok(total)
}

/// Rounds to 2 decimals and prints the shortest equal form ("86.5", "213",
/// "-6"); normalizes negative zero.
pub(crate) fn fmt2(value: f64) -> String {
    let rounded = (value * 100.0).round() / 100.0;
    let mut s = format!("{rounded:.2}");
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
    }
    if s == "-0" {
        s = "0".to_owned();
    }
    s
}

/// One decimal, as improvement percentages are reported.
pub(crate) fn fmt1(value: f64) -> String {
    let s = format!("{value:.1}");
    if s == "-0.0" {
        "0.0".to_owned()
    } else {
        s
    }
}

fn write_file(path: &Path, content: &str) -> Result<(), ReportError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .map_err(|e| ReportError::Io { path: parent.display().to_string(), source: e })?;
        }
    }
    std::fs::write(path, content)
        .map_err(|e| ReportError::Io { path: path.display().to_string(), source: e })
}

pub fn render_scores_csv(bundle: &ReportBundle) -> String {
    let mut out = String::from(SCORES_CSV_HEADER);
    out.push('\n');
    for row in &bundle.scores_table {
        let d = row.scores.as_array();
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            row.population.label(),
            fmt2(row.us_distance),
            fmt2(row.china_distance),
            fmt2(d[0]),
            fmt2(d[1]),
            fmt2(d[2]),
            fmt2(d[3]),
            fmt2(d[4]),
            fmt2(d[5]),
        ));
    }
    out
}

/// Scores CSV: header then one row per population, 2-decimal rounding,
/// byte-identical across repeat emissions of the same bundle.
pub fn emit_scores_csv(bundle: &ReportBundle, path: &Path) -> Result<(), ReportError> {
    write_file(path, &render_scores_csv(bundle))
}

/// Inverse of [`render_scores_csv`]: accepts the exact header plus one row
/// per population, rejecting anything else with the offending line number.
pub fn parse_scores_csv(text: &str) -> Result<Vec<ScoreRow>, ReportError> {
    let malformed = |line: usize, reason: &str| ReportError::MalformedCsv {
        line,
        reason: reason.to_string(),
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim_end() == SCORES_CSV_HEADER => {}
        _ => return Err(malformed(1, "expected scores header")),
    }
    let mut rows = Vec::new();
    for (index, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let number = index + 1;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 9 {
            return Err(malformed(number, "expected 9 fields"));
        }
        let population = PopulationId::from_label(fields[0])
            .map_err(|e| malformed(number, &e.to_string()))?;
        let mut values = [0.0f64; 8];
        for (slot, field) in values.iter_mut().zip(&fields[1..]) {
            *slot = field
                .trim()
                .parse::<f64>()
                .map_err(|_| malformed(number, &format!("bad number {field:?}")))?;
        }
        rows.push(ScoreRow {
            population,
            us_distance: values[0],
            china_distance: values[1],
            scores: DimensionScores::from_array([
                values[2], values[3], values[4], values[5], values[6], values[7],
            ]),
        });
    }
    Ok(rows)
}

pub fn render_improvements_csv(table: &[ImprovementRow]) -> String {
    let mut out = String::from(IMPROVEMENTS_CSV_HEADER);
    out.push('\n');
    for row in table {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            row.country,
            row.baseline_label,
            fmt2(row.baseline_total),
            row.variant_label,
            fmt2(row.variant_total),
            fmt1(row.improvement_pct),
        ));
    }
    out
}

/// Improvement CSV in presentation order; errors when a category cannot be
/// aggregated from the bundle.
pub fn emit_improvements_csv(bundle: &ReportBundle, path: &Path) -> Result<(), ReportError> {
    let table = if bundle.improvements_table.is_empty() {
        build_improvements(&bundle.scores_table)?
    } else {
        bundle.improvements_table.clone()
    };
    write_file(path, &render_improvements_csv(&table))
}

pub fn render_markdown(bundle: &ReportBundle) -> String {
    let mut out = String::new();
    out.push_str("# Cultural alignment report\n\n");
    out.push_str(&format!("{} population(s) scored.\n\n", bundle.scores_table.len()));

    out.push_str("## Alignment classifications\n\n");
    out.push_str("| Population | vs US | vs China |\n|---|---|---|\n");
    for row in &bundle.scores_table {
        let badge = |country: &str| {
            bundle
                .classifications
                .iter()
                .find(|c| c.population == row.population && c.country == country)
                .map(|c| {
                    let name = c.class.name();
                    let avg = fmt2(c.average);
                    match c.class {
                        AlignmentClass::Strong => format!("**{name}** (avg {avg})"),
                        _ => format!("{name} (avg {avg})"),
                    }
                })
                .unwrap_or_else(|| "-".to_owned())
        };
        out.push_str(&format!("| {} | {} | {} |\n", row.population.label(), badge("US"), badge("China")));
    }
    out.push('\n');

    out.push_str("## Category improvements\n\n");
    if bundle.improvements_table.is_empty() {
        out.push_str("Not computable from this data (a prompt-style category is missing).\n\n");
    } else {
        out.push_str("| Country | Baseline | Total | Variant | Total | Improvement |\n|---|---|---|---|---|---|\n");
        for row in &bundle.improvements_table {
            out.push_str(&format!(
                "| {} | {} | {} | {} | {} | {}% |\n",
                row.country,
                row.baseline_label,
                fmt2(row.baseline_total),
                row.variant_label,
                fmt2(row.variant_total),
                fmt1(row.improvement_pct),
            ));
        }
        out.push('\n');
    }

    out.push_str("## Dimension scores\n\n");
    out.push_str("| Population | US distance | China distance | PDI | IDV | MAS | UAI | LTO | IVR |\n");
    out.push_str("|---|---|---|---|---|---|---|---|---|\n");
    for row in &bundle.scores_table {
        let d = row.scores.as_array();
        out.push_str(&format!(
            "| {} | {} | {} | {} | {} | {} | {} | {} | {} |\n",
            row.population.label(),
            fmt2(row.us_distance),
            fmt2(row.china_distance),
            fmt2(d[0]),
            fmt2(d[1]),
            fmt2(d[2]),
            fmt2(d[3]),
            fmt2(d[4]),
            fmt2(d[5]),
        ));
    }
    out.push('\n');

    out.push_str("## Caveats\n\n");
    if bundle.caveats.is_empty() {
        out.push_str("None recorded.\n");
    } else {
        for caveat in &bundle.caveats {
            out.push_str(&format!("- {caveat}\n"));
        }
    }
    out
}

pub fn emit_markdown(bundle: &ReportBundle, path: &Path) -> Result<(), ReportError> {
    write_file(path, &render_markdown(bundle))
}

/// Paths of everything [`emit_all`] wrote.
#[derive(Debug, Clone)]
pub struct ReportArtifacts {
    pub scores_csv: PathBuf,
    pub improvements_csv: Option<PathBuf>,
    pub report_md: PathBuf,
    pub plots: Vec<PlotPaths>,
}

/// Writes the full artifact set under `out_dir`: `scores.csv`,
/// `improvements.csv` (when computable; a missing category becomes a caveat
/// instead of an error), `report.md`, and `plots/<population>.{svg,data}`.
pub fn emit_all(
    bundle: &ReportBundle,
    references: &ReferenceSet,
    out_dir: &Path,
) -> Result<ReportArtifacts, ReportError> {
    std::fs::create_dir_all(out_dir)
        .map_err(|e| ReportError::Io { path: out_dir.display().to_string(), source: e })?;

    let mut bundle = bundle.clone();
    let scores_csv = out_dir.join("scores.csv");
    emit_scores_csv(&bundle, &scores_csv)?;

    let improvements_csv = out_dir.join("improvements.csv");
    let improvements_csv = match emit_improvements_csv(&bundle, &improvements_csv) {
        Ok(()) => Some(improvements_csv),
        Err(ReportError::MissingCategory(category)) => {
            bundle.caveats.push(format!(
                "improvement table omitted: missing category: {category}"
            ));
            None
        }
        Err(e) => return Err(e),
    };

    let report_md = out_dir.join("report.md");
    emit_markdown(&bundle, &report_md)?;

    let us = references.get("US")?;
    let china = references.get("China")?;
    let plots_dir = out_dir.join("plots");
    let mut plots = Vec::with_capacity(bundle.scores_table.len());
    for row in &bundle.scores_table {
        plots.push(emit_dimension_plot(row, us, china, &plots_dir)?);
    }

    Ok(ReportArtifacts { scores_csv, improvements_csv, report_md, plots })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::published::{published_rows, RECORDED_IMPROVEMENTS};

    fn published_bundle() -> ReportBundle {
        let populations: Vec<(PopulationId, DimensionScores)> = published_rows()
            .iter()
            .map(|r| (r.population.clone(), r.scores))
            .collect();
        ReportBundle::from_scores(&populations, ReferenceSet::embedded(), Vec::new()).unwrap()
    }

    #[test]
    fn scores_csv_round_trips_the_recorded_table() {
        let bundle = published_bundle();
        let rendered = render_scores_csv(&bundle);
        let embedded = include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/data/published_results.csv"));
        assert_eq!(rendered, embedded);
        assert_eq!(rendered, render_scores_csv(&bundle), "re-emission must be byte-identical");
    }

    #[test]
    fn empty_bundle_emits_header_only() {
        let bundle =
            ReportBundle::from_scores(&[], ReferenceSet::embedded(), Vec::new()).unwrap();
        assert_eq!(render_scores_csv(&bundle), format!("{SCORES_CSV_HEADER}\n"));
    }

    #[test]
    fn scores_csv_parses_back_to_the_same_rows() {
        let bundle = published_bundle();
        let rendered = render_scores_csv(&bundle);
        let parsed = parse_scores_csv(&rendered).unwrap();
        assert_eq!(parsed.len(), bundle.scores_table.len());
        for (parsed_row, row) in parsed.iter().zip(&bundle.scores_table) {
            assert_eq!(parsed_row.population, row.population);
            assert_eq!(parsed_row.us_distance, row.us_distance);
            assert_eq!(parsed_row.scores, row.scores);
        }

        let err = parse_scores_csv("population,pdi\nX_en,1\n").unwrap_err();
        assert!(err.to_string().contains("expected scores header"), "{err}");
        let bad_row = format!("{SCORES_CSV_HEADER}\nGPT-4o_en,1,2,3\n");
        let err = parse_scores_csv(&bad_row).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn improvements_match_recorded_percentages() {
        let bundle = published_bundle();
        assert_eq!(bundle.improvements_table.len(), 6);
        for (row, recorded) in bundle.improvements_table.iter().zip(RECORDED_IMPROVEMENTS) {
            assert!(
                (row.improvement_pct - recorded).abs() <= 0.1,
                "{} {}→{}: {} vs {}",
                row.country,
                row.baseline_label,
                row.variant_label,
                row.improvement_pct,
                recorded
            );
        }
        let rendered = render_improvements_csv(&bundle.improvements_table);
        let mut lines = rendered.lines();
        assert_eq!(lines.next(), Some(IMPROVEMENTS_CSV_HEADER));
        assert_eq!(
            lines.next(),
            Some("US,Simp. Chinese,867.75,English,654.75,24.5"),
            "first improvement row"
        );
        assert_eq!(
            lines.next(),
            Some("US,English,654.75,English + US Prompting,682.25,-4.2"),
            "second improvement row"
        );
    }

    #[test]
    fn single_language_data_names_the_missing_category() {
        let populations: Vec<(PopulationId, DimensionScores)> = published_rows()
            .iter()
            .filter(|r| r.population.style.language == crate::types::Language::English)
            .map(|r| (r.population.clone(), r.scores))
            .collect();
        let bundle =
            ReportBundle::from_scores(&populations, ReferenceSet::embedded(), Vec::new()).unwrap();
        assert!(bundle.improvements_table.is_empty());
        let dir = tempfile::tempdir().unwrap();
        let err = emit_improvements_csv(&bundle, &dir.path().join("improvements.csv")).unwrap_err();
        assert_eq!(err.to_string(), "missing category: Simp. Chinese");
    }

    #[test]
    fn duplicate_population_is_rejected() {
        let row = &published_rows()[0];
        let populations = vec![
            (row.population.clone(), row.scores),
            (row.population.clone(), row.scores),
        ];
        let err = ReportBundle::from_scores(&populations, ReferenceSet::embedded(), Vec::new())
            .unwrap_err();
        assert!(matches!(err, ReportError::DuplicatePopulation(_)));
    }

    #[test]
    fn markdown_carries_badges_and_caveats() {
        let mut bundle = published_bundle();
        bundle.caveats.push("population below Hofstede's 20-survey floor".to_owned());
        let markdown = render_markdown(&bundle);
        assert!(markdown.contains("| GPT-4o_en | **Strong** (avg 14.42) |"), "{markdown}");
        assert!(markdown.contains("## Category improvements"));
        assert!(markdown.contains("| US | Simp. Chinese | 867.75 | English | 654.75 | 24.5% |"));
        assert!(markdown.contains("- population below Hofstede's 20-survey floor"));
    }

    #[test]
    fn fmt2_matches_recorded_table_conventions() {
        assert_eq!(fmt2(86.5), "86.5");
        assert_eq!(fmt2(213.0), "213");
        assert_eq!(fmt2(-6.0), "-6");
        assert_eq!(fmt2(-8.75), "-8.75");
        assert_eq!(fmt2(0.0), "0");
        assert_eq!(fmt2(-0.004), "0");
        assert_eq!(fmt2(24.546), "24.55");
        assert_eq!(fmt1(24.546), "24.5");
        assert_eq!(fmt1(-4.2), "-4.2");
        assert_eq!(fmt1(-0.04), "0.0");
    }

    #[test]
    fn emit_all_writes_every_artifact() {
        let bundle = published_bundle();
        let dir = tempfile::tempdir().unwrap();
        let artifacts = emit_all(&bundle, ReferenceSet::embedded(), dir.path()).unwrap();
        assert!(artifacts.scores_csv.exists());
        assert!(artifacts.improvements_csv.as_ref().unwrap().exists());
        assert!(artifacts.report_md.exists());
        assert_eq!(artifacts.plots.len(), 36);
        for plot in &artifacts.plots {
            assert!(plot.image.exists());
            assert!(plot.sidecar.exists());
        }
    }
}
