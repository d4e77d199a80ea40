//! Recorded results for six production chat models, embedded as fixtures:
//! per-population dimension scores, their US/China alignment distances, and
//! the category-level aggregates built from them. `run_golden_checks` replays
//! the whole arithmetic chain and reports any drift.

use std::sync::OnceLock;

use crate::alignment::{
    aggregate_category, alignment_distance, derive_references, improvement, AlignmentClass,
    AlignmentDistance, DerivationRow, ImprovementRow, ReferenceSet,
};
use crate::scoring::DimensionScores;
use crate::types::{PopulationId, PromptStyle};

static EMBEDDED_CSV: &str =
    include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/data/published_results.csv"));

/// One recorded population: label, the two recorded alignment distances, and
/// the six dimension scores they were computed from.
#[derive(Debug, Clone, PartialEq)]
pub struct PublishedRow {
    pub population: PopulationId,
    pub us_distance: f64,
    pub china_distance: f64,
    pub scores: DimensionScores,
}

impl PublishedRow {
    pub fn label(&self) -> String {
        self.population.label()
    }
}

/// All 36 recorded populations (6 models × 6 prompt styles).
pub fn published_rows() -> &'static [PublishedRow] {
    static ROWS: OnceLock<Vec<PublishedRow>> = OnceLock::new();
    ROWS.get_or_init(|| {
        let mut rows = Vec::with_capacity(36);
        for (i, line) in EMBEDDED_CSV.lines().enumerate() {
            if i == 0 || line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            assert_eq!(fields.len(), 9, "embedded results line {} malformed", i + 1);
            let population = PopulationId::from_label(fields[0])
                .unwrap_or_else(|e| panic!("embedded results line {}: {e}", i + 1));
            let num = |j: usize| -> f64 {
                fields[j]
                    .parse()
                    .unwrap_or_else(|e| panic!("embedded results line {} field {}: {e}", i + 1, j))
            };
            rows.push(PublishedRow {
                population,
                us_distance: num(1),
                china_distance: num(2),
                scores: DimensionScores::from_array([num(3), num(4), num(5), num(6), num(7), num(8)]),
            });
        }
        assert_eq!(rows.len(), 36, "embedded results must hold 36 populations");
        rows
    })
}

/// The six model identifiers, in recorded order.
pub fn published_models() -> Vec<String> {
    let mut models = Vec::new();
    for row in published_rows() {
        if !models.contains(&row.population.model) {
            models.push(row.population.model.clone());
        }
    }
    models
}

/// The improvement table layout: (country, baseline style suffix, variant
/// style suffix), in presentation order.
pub const IMPROVEMENT_LAYOUT: [(&str, &str, &str); 6] = [
    ("US", "sc", "en"),
    ("US", "en", "en_US"),
    ("US", "sc", "sc_US"),
    ("China", "en", "sc"),
    ("China", "sc", "sc_CH"),
    ("China", "en", "en_CH"),
];

/// Category totals as recorded: (country, style suffix, total distance).
pub const RECORDED_CATEGORY_TOTALS: [(&str, &str, f64); 8] = [
    ("US", "sc", 867.75),
    ("US", "en", 654.75),
    ("US", "en_US", 682.25),
    ("US", "sc_US", 855.0),
    ("China", "en", 1349.75),
    ("China", "sc", 1145.25),
    ("China", "sc_CH", 1059.0),
    ("China", "en_CH", 947.75),
];

/// Recorded improvement percentages, aligned with [`IMPROVEMENT_LAYOUT`].
pub const RECORDED_IMPROVEMENTS: [f64; 6] = [24.6, -4.2, 1.5, 15.2, 7.5, 29.8];

/// Recomputes both alignment distances for every recorded row against the
/// embedded references.
pub fn recomputed_distances() -> Vec<AlignmentDistance> {
    let refs = ReferenceSet::embedded();
    let us = refs.get("US").expect("embedded US reference");
    let china = refs.get("China").expect("embedded China reference");
    let mut distances = Vec::with_capacity(72);
    for row in published_rows() {
        distances.push(alignment_distance(&row.population, &row.scores, us));
        distances.push(alignment_distance(&row.population, &row.scores, china));
    }
    distances
}

/// Builds the six-row improvement table from a distance set covering all 36
/// populations.
pub fn improvement_table(distances: &[AlignmentDistance]) -> Result<Vec<ImprovementRow>, crate::alignment::AlignmentError> {
    let models = published_models();
    let mut rows = Vec::with_capacity(6);
    for (country, baseline_suffix, variant_suffix) in IMPROVEMENT_LAYOUT {
        let baseline_style = PromptStyle::from_suffix(baseline_suffix).expect("layout suffix");
        let variant_style = PromptStyle::from_suffix(variant_suffix).expect("layout suffix");
        let baseline_total = aggregate_category(distances, country, baseline_style, &models)?;
        let variant_total = aggregate_category(distances, country, variant_style, &models)?;
        rows.push(ImprovementRow {
            country: country.to_owned(),
            baseline_label: baseline_style.category_label().to_owned(),
            baseline_total,
            variant_label: variant_style.category_label().to_owned(),
            variant_total,
            improvement_pct: improvement(baseline_total, variant_total)?,
        });
    }
    Ok(rows)
}

/// Outcome of one golden check.
#[derive(Debug, Clone)]
pub struct GoldenCheck {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

fn check(name: &str, pass: bool, detail: String) -> GoldenCheck {
    GoldenCheck { name: name.to_owned(), pass, detail }
}

/// Replays every recorded result from the embedded fixtures: per-row
/// distances, reference derivation, category totals, improvements, and the
/// strong/soft classification census.
pub fn run_golden_checks() -> Vec<GoldenCheck> {
    let mut checks = Vec::new();
    let rows = published_rows();
    let distances = recomputed_distances();

    // Per-row distance reproduction.
    {
        let mut failures = Vec::new();
        for row in rows {
            for (country, recorded) in [("US", row.us_distance), ("China", row.china_distance)] {
                let recomputed = distances
                    .iter()
                    .find(|d| d.population_id == row.population && d.country == country)
                    .expect("distance recomputed for every row");
                if (recomputed.total - recorded).abs() > 0.01 {
                    failures.push(format!(
                        "{} vs {country}: recorded {recorded}, recomputed {:.2}",
                        row.label(),
                        recomputed.total
                    ));
                }
            }
        }
        let detail = if failures.is_empty() {
            format!("all {} recorded distances reproduced within ±0.01", rows.len() * 2)
        } else {
            failures.join("; ")
        };
        checks.push(check("distance-reproduction", failures.is_empty(), detail));
    }

    // Reference derivation recovers the embedded vectors.
    {
        let derivation_rows: Vec<DerivationRow> = rows
            .iter()
            .map(|r| DerivationRow {
                label: r.label(),
                scores: r.scores,
                us_total: r.us_distance,
                china_total: r.china_distance,
            })
            .collect();
        let refs = ReferenceSet::embedded();
        match derive_references(&derivation_rows) {
            Ok((us, china)) => {
                let us_ok = us.values == refs.get("US").expect("US reference").values;
                let china_ok = china.values == refs.get("China").expect("China reference").values;
                checks.push(check(
                    "reference-derivation",
                    us_ok && china_ok,
                    format!(
                        "derived US {:?}, China {:?}",
                        us.values.as_array(),
                        china.values.as_array()
                    ),
                ));
            }
            Err(e) => checks.push(check("reference-derivation", false, e.to_string())),
        }
    }

    // Category totals.
    {
        let models = published_models();
        let mut failures = Vec::new();
        for (country, suffix, recorded) in RECORDED_CATEGORY_TOTALS {
            let style = PromptStyle::from_suffix(suffix).expect("recorded suffix");
            match aggregate_category(&distances, country, style, &models) {
                Ok(total) if (total - recorded).abs() <= 0.01 => {}
                Ok(total) => failures.push(format!(
                    "{country}/{suffix}: recorded {recorded}, recomputed {total:.2}"
                )),
                Err(e) => failures.push(format!("{country}/{suffix}: {e}")),
            }
        }
        let detail = if failures.is_empty() {
            "all 8 category totals reproduced within ±0.01".to_owned()
        } else {
            failures.join("; ")
        };
        checks.push(check("category-totals", failures.is_empty(), detail));
    }

    // Improvement percentages.
    {
        match improvement_table(&distances) {
            Ok(table) => {
                let mut failures = Vec::new();
                for (row, recorded) in table.iter().zip(RECORDED_IMPROVEMENTS) {
                    if (row.improvement_pct - recorded).abs() > 0.1 {
                        failures.push(format!(
                            "{} {} → {}: recorded {recorded}%, recomputed {:.2}%",
                            row.country, row.baseline_label, row.variant_label, row.improvement_pct
                        ));
                    }
                }
                let detail = if failures.is_empty() {
                    "all 6 improvements reproduced within ±0.1 pp".to_owned()
                } else {
                    failures.join("; ")
                };
                checks.push(check("improvement-table", failures.is_empty(), detail));
            }
            Err(e) => checks.push(check("improvement-table", false, e.to_string())),
        }
    }

    // Classification census.
    {
        let mut failures = Vec::new();
        let class_of = |label: &str, country: &str| -> AlignmentClass {
            let population = PopulationId::from_label(label).expect("census label");
            let d = distances
                .iter()
                .find(|d| d.population_id == population && d.country == country)
                .expect("distance for census label");
            AlignmentClass::from_total(d.total)
        };
        for label in ["DSV3_en", "DSV3.1_en", "GPT-5_en", "GPT-4o_en"] {
            if class_of(label, "US") != AlignmentClass::Strong {
                failures.push(format!("{label} should classify Strong vs US"));
            }
        }
        let soft_us: Vec<String> = distances
            .iter()
            .filter(|d| d.country == "US" && AlignmentClass::from_total(d.total) == AlignmentClass::Soft)
            .map(|d| d.population_id.label())
            .collect();
        if soft_us.len() != 9 {
            failures.push(format!("expected exactly 9 Soft-US populations, found {}: {:?}", soft_us.len(), soft_us));
        }
        if class_of("GPT-4.1_sc", "China") != AlignmentClass::Strong {
            failures.push("GPT-4.1_sc should classify Strong vs China".to_owned());
        }
        let soft_china: Vec<String> = distances
            .iter()
            .filter(|d| d.country == "China" && AlignmentClass::from_total(d.total) == AlignmentClass::Soft)
            .map(|d| d.population_id.label())
            .collect();
        let expected_soft_china = ["GPT-4.1_sc_CH", "GPT-4o_en_CH"];
        if soft_china.len() != 2 || !expected_soft_china.iter().all(|l| soft_china.iter().any(|s| s == l)) {
            failures.push(format!(
                "expected Soft-China populations {:?}, found {:?}",
                expected_soft_china, soft_china
            ));
        }
        let detail = if failures.is_empty() {
            format!("census reproduced: 4 named Strong-US, {} Soft-US, GPT-4.1_sc Strong-China, {:?} Soft-China", soft_us.len(), soft_china)
        } else {
            failures.join("; ")
        };
        checks.push(check("alignment-census", failures.is_empty(), detail));
    }

    checks
}
