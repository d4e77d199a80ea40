//! Alignment of population dimension scores against country references:
//! L1 distance, strong/soft classification, improvement percentages, and
//! derivation of reference vectors from recorded distances.

use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scoring::DimensionScores;
use crate::types::{PopulationId, PromptStyle};

/// Integer grid searched when deriving reference vectors, in index points.
pub const GRID_MIN: i32 = -50;
pub const GRID_MAX: i32 = 150;
/// Tolerance for matching recorded distances; absorbs presentation rounding.
pub const DISTANCE_TOLERANCE: f64 = 0.01;

/// Total-distance thresholds: average of 15 (total 90) bounds strong
/// alignment, average of 20 (total 120) bounds soft. Both edges inclusive.
pub const STRONG_TOTAL: f64 = 90.0;
pub const SOFT_TOTAL: f64 = 120.0;

static EMBEDDED_TOML: &str = include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/data/references.toml"));

#[derive(Debug, Error)]
pub enum AlignmentError {
    #[error("failed to read references file: {0}")]
    Io(#[from] std::io::Error),
    #[error("failed to parse references: {0}")]
    Toml(#[from] Box<toml::de::Error>),
    #[error("unknown reference country: {0}")]
    UnknownCountry(String),
    #[error("improvement baseline must be positive, got {0}")]
    NonPositiveBaseline(f64),
    #[error("no models requested for category {0}")]
    EmptyCategory(String),
    #[error("missing model {model} in category {category}")]
    MissingModel { model: String, category: String },
    #[error("duplicate distance for model {model} in category {category}")]
    DuplicateModel { model: String, category: String },
    #[error("reference derivation is underdetermined: {0}")]
    Underdetermined(String),
    #[error("no {country} reference vector is consistent with the rows; worst row {label}: recorded {recorded}, nearest consistent {computed:.2}")]
    Inconsistent { country: String, label: String, recorded: f64, computed: f64 },
}

/// A country's six published dimension values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountryReference {
    pub country: String,
    pub values: DimensionScores,
    pub provenance: String,
}

#[derive(Debug, Deserialize)]
struct ReferenceRow {
    country: String,
    pdi: f64,
    idv: f64,
    mas: f64,
    uai: f64,
    lto: f64,
    ivr: f64,
    provenance: String,
}

#[derive(Debug, Deserialize)]
struct ReferenceFile {
    #[serde(rename = "reference")]
    references: Vec<ReferenceRow>,
}

/// The reference vectors available for alignment measurement.
#[derive(Debug, Clone)]
pub struct ReferenceSet {
    references: Vec<CountryReference>,
}

impl ReferenceSet {
    /// US and China references shipped with the library.
    pub fn embedded() -> &'static ReferenceSet {
        static INSTANCE: OnceLock<ReferenceSet> = OnceLock::new();
        INSTANCE.get_or_init(|| {
            ReferenceSet::from_toml_str(EMBEDDED_TOML).expect("embedded references are valid")
        })
    }

    pub fn load(path: &Path) -> Result<Self, AlignmentError> {
        ReferenceSet::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn from_toml_str(raw: &str) -> Result<Self, AlignmentError> {
        let file: ReferenceFile = toml::from_str(raw).map_err(|e| AlignmentError::Toml(Box::new(e)))?;
        let references = file
            .references
            .into_iter()
            .map(|row| CountryReference {
                country: row.country,
                values: DimensionScores {
                    pdi: row.pdi,
                    idv: row.idv,
                    mas: row.mas,
                    uai: row.uai,
                    lto: row.lto,
                    ivr: row.ivr,
                },
                provenance: row.provenance,
            })
            .collect();
        Ok(ReferenceSet { references })
    }

    pub fn get(&self, country: &str) -> Result<&CountryReference, AlignmentError> {
        self.references
            .iter()
            .find(|r| r.country == country)
            .ok_or_else(|| AlignmentError::UnknownCountry(country.to_owned()))
    }

    pub fn countries(&self) -> impl Iterator<Item = &str> {
        self.references.iter().map(|r| r.country.as_str())
    }
}

/// L1 distance of one population's scores to one country.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentDistance {
    pub population_id: PopulationId,
    pub country: String,
    pub per_dimension: [f64; 6],
    pub total: f64,
    pub average: f64,
}

pub fn alignment_distance(
    population_id: &PopulationId,
    scores: &DimensionScores,
    reference: &CountryReference,
) -> AlignmentDistance {
    let a = scores.as_array();
    let b = reference.values.as_array();
    let mut per_dimension = [0.0f64; 6];
    for i in 0..6 {
        per_dimension[i] = (a[i] - b[i]).abs();
    }
    let total: f64 = per_dimension.iter().sum();
    AlignmentDistance {
        population_id: population_id.clone(),
        country: reference.country.clone(),
        per_dimension,
        total,
        average: total / 6.0,
    }
}

pub fn l1_distance(a: &DimensionScores, b: &DimensionScores) -> f64 {
    a.as_array().iter().zip(b.as_array()).map(|(x, y)| (x - y).abs()).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AlignmentClass {
    Strong,
    Soft,
    None,
}

impl AlignmentClass {
    pub fn from_total(total: f64) -> Self {
        if total <= STRONG_TOTAL {
            AlignmentClass::Strong
        } else if total <= SOFT_TOTAL {
            AlignmentClass::Soft
        } else {
            AlignmentClass::None
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            AlignmentClass::Strong => "Strong",
            AlignmentClass::Soft => "Soft",
            AlignmentClass::None => "None",
        }
    }
}

impl std::fmt::Display for AlignmentClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

pub fn classify(distance: &AlignmentDistance) -> AlignmentClass {
    AlignmentClass::from_total(distance.total)
}

/// Percentage improvement of a variant total over a baseline total; positive
/// means the distance shrank.
pub fn improvement(baseline_total: f64, variant_total: f64) -> Result<f64, AlignmentError> {
    if baseline_total <= 0.0 {
        return Err(AlignmentError::NonPositiveBaseline(baseline_total));
    }
    Ok(100.0 * (baseline_total - variant_total) / baseline_total)
}

/// One row of the improvement table: one country, one baseline category, one
/// variant category.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImprovementRow {
    pub country: String,
    pub baseline_label: String,
    pub baseline_total: f64,
    pub variant_label: String,
    pub variant_total: f64,
    pub improvement_pct: f64,
}

/// Sums one (country, style) category over a fixed model list; every model
/// must contribute exactly one distance.
pub fn aggregate_category(
    distances: &[AlignmentDistance],
    country: &str,
    style: PromptStyle,
    models: &[String],
) -> Result<f64, AlignmentError> {
    let category = style.category_label().to_owned();
    if models.is_empty() {
        return Err(AlignmentError::EmptyCategory(category));
    }
    let mut total = 0.0;
    for model in models {
        let mut matching = distances.iter().filter(|d| {
            d.country == country && d.population_id.model == *model && d.population_id.style == style
        });
        let first = matching.next().ok_or_else(|| AlignmentError::MissingModel {
            model: model.clone(),
            category: category.clone(),
        })?;
        if matching.next().is_some() {
            return Err(AlignmentError::DuplicateModel { model: model.clone(), category });
        }
        total += first.total;
    }
    Ok(total)
}

/// One row of recorded results used to derive reference vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivationRow {
    pub label: String,
    pub scores: DimensionScores,
    pub us_total: f64,
    pub china_total: f64,
}

/// Recovers the integer-valued US and China reference vectors that reproduce
/// every row's recorded distances within [`DISTANCE_TOLERANCE`].
///
/// The search walks the six dimensions depth-first over the integer grid
/// [[`GRID_MIN`], [`GRID_MAX`]], intersecting per-row feasibility intervals
/// at each depth and pruning with a triangle-inequality band around the
/// minimum-total row. Exactly one consistent vector per country must exist;
/// zero is an inconsistency (the worst row is named), two or more means the
/// rows cannot pin the references down.
pub fn derive_references(rows: &[DerivationRow]) -> Result<(CountryReference, CountryReference), AlignmentError> {
    if rows.len() < 2 {
        return Err(AlignmentError::Underdetermined(format!(
            "need at least 2 rows, got {}",
            rows.len()
        )));
    }
    let us = derive_one(rows, "US", |row| row.us_total)?;
    let china = derive_one(rows, "China", |row| row.china_total)?;
    Ok((us, china))
}

fn derive_one(
    rows: &[DerivationRow],
    country: &str,
    total_of: impl Fn(&DerivationRow) -> f64,
) -> Result<CountryReference, AlignmentError> {
    let scores: Vec<[f64; 6]> = rows.iter().map(|r| r.scores.as_array()).collect();
    let totals: Vec<f64> = rows.iter().map(&total_of).collect();
    let solutions = solve_column(&totals, &scores, DISTANCE_TOLERANCE, 2);
    match solutions.len() {
        1 => {
            let v = solutions[0];
            Ok(CountryReference {
                country: country.to_owned(),
                values: DimensionScores::from_array(v.map(f64::from)),
                provenance: format!(
                    "derived by integer grid search from {} recorded rows (tolerance {DISTANCE_TOLERANCE})",
                    rows.len()
                ),
            })
        }
        0 => Err(diagnose_inconsistency(rows, country, &totals, &scores)),
        _ => Err(AlignmentError::Underdetermined(format!(
            "{} or more {country} vectors are consistent with the rows, e.g. {:?} and {:?}",
            solutions.len(),
            solutions[0],
            solutions[1]
        ))),
    }
}

/// Re-solves at widening tolerances to name the row that blocks consistency.
fn diagnose_inconsistency(
    rows: &[DerivationRow],
    country: &str,
    totals: &[f64],
    scores: &[[f64; 6]],
) -> AlignmentError {
    for tol in [0.5, 1.5, 3.0, 7.5, 15.0, 30.0] {
        let solutions = solve_column(totals, scores, tol, 1);
        let Some(v) = solutions.first() else { continue };
        let vf = v.map(f64::from);
        let worst = (0..rows.len())
            .max_by(|&a, &b| {
                let da = (recomputed(&scores[a], &vf) - totals[a]).abs();
                let db = (recomputed(&scores[b], &vf) - totals[b]).abs();
                da.partial_cmp(&db).expect("finite")
            })
            .expect("rows non-empty");
        return AlignmentError::Inconsistent {
            country: country.to_owned(),
            label: rows[worst].label.clone(),
            recorded: totals[worst],
            computed: recomputed(&scores[worst], &vf),
        };
    }
    AlignmentError::Underdetermined(format!(
        "no {country} vector on the grid comes within 30 index points of the rows"
    ))
}

fn recomputed(scores: &[f64; 6], reference: &[f64; 6]) -> f64 {
    scores.iter().zip(reference).map(|(s, r)| (s - r).abs()).sum()
}

fn solve_column(totals: &[f64], scores: &[[f64; 6]], tol: f64, cap: usize) -> Vec<[i32; 6]> {
    let n = totals.len();
    let anchor = (0..n)
        .min_by(|&a, &b| totals[a].partial_cmp(&totals[b]).expect("finite"))
        .expect("rows non-empty");
    let anchor_scores = scores[anchor];
    // remaining[i][k] = L1 distance of row i to the anchor row over dims k..6;
    // bounds how far row i's remaining contribution can drift from the anchor's.
    let mut remaining = vec![[0.0f64; 7]; n];
    for i in 0..n {
        for k in (0..6).rev() {
            remaining[i][k] = remaining[i][k + 1] + (scores[i][k] - anchor_scores[k]).abs();
        }
    }

    let mut search = Search {
        totals,
        scores,
        remaining,
        anchor,
        tol,
        cap,
        partial: vec![0.0; n],
        chosen: [0; 6],
        solutions: Vec::new(),
    };
    search.descend(0);
    search.solutions
}

struct Search<'a> {
    totals: &'a [f64],
    scores: &'a [[f64; 6]],
    remaining: Vec<[f64; 7]>,
    anchor: usize,
    tol: f64,
    cap: usize,
    partial: Vec<f64>,
    chosen: [i32; 6],
    solutions: Vec<[i32; 6]>,
}

impl Search<'_> {
    fn descend(&mut self, k: usize) {
        if self.solutions.len() >= self.cap {
            return;
        }
        let n = self.totals.len();
        if k == 6 {
            let consistent = (0..n).all(|i| (self.partial[i] - self.totals[i]).abs() <= self.tol);
            if consistent {
                self.solutions.push(self.chosen);
            }
            return;
        }

        // Intersect per-row feasibility: dimension k alone cannot consume
        // more than any row's remaining slack.
        let mut lo = f64::from(GRID_MIN);
        let mut hi = f64::from(GRID_MAX);
        for i in 0..n {
            let slack = self.totals[i] + self.tol - self.partial[i];
            if slack < 0.0 {
                return;
            }
            lo = lo.max(self.scores[i][k] - slack);
            hi = hi.min(self.scores[i][k] + slack);
        }
        if lo > hi {
            return;
        }

        for v in (lo.ceil() as i32)..=(hi.floor() as i32) {
            let vf = f64::from(v);
            let anchor_after =
                self.partial[self.anchor] + (self.scores[self.anchor][k] - vf).abs();
            let anchor_slack = self.totals[self.anchor] + self.tol - anchor_after;
            if anchor_slack < 0.0 {
                continue;
            }
            // Row i's final total lies within anchor_slack of centre, by the
            // triangle inequality through the anchor row.
            let feasible = (0..n).all(|i| {
                let centre =
                    self.partial[i] + (self.scores[i][k] - vf).abs() + self.remaining[i][k + 1];
                centre - anchor_slack <= self.totals[i] + self.tol
                    && centre + anchor_slack >= self.totals[i] - self.tol
            });
            if !feasible {
                continue;
            }
            for i in 0..n {
                self.partial[i] += (self.scores[i][k] - vf).abs();
            }
            self.chosen[k] = v;
            self.descend(k + 1);
            for i in 0..n {
                self.partial[i] -= (self.scores[i][k] - vf).abs();
            }
            if self.solutions.len() >= self.cap {
                return;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn pid(label: &str) -> PopulationId {
        PopulationId::from_label(label).unwrap()
    }

    fn scores(values: [f64; 6]) -> DimensionScores {
        DimensionScores::from_array(values)
    }

    #[test]
    fn embedded_references_exist() {
        let refs = ReferenceSet::embedded();
        let us = refs.get("US").unwrap();
        assert_eq!(us.values.as_array(), [40.0, 91.0, 62.0, 46.0, 26.0, 68.0]);
        let china = refs.get("China").unwrap();
        assert_eq!(china.values.as_array(), [80.0, 20.0, 66.0, 30.0, 87.0, 24.0]);
        assert!(refs.get("Japan").is_err());
    }

    #[test]
    fn recorded_distance_examples() {
        let refs = ReferenceSet::embedded();
        let us = refs.get("US").unwrap();
        let china = refs.get("China").unwrap();

        let d = alignment_distance(&pid("GPT-4o_en"), &scores([36.75, 60.5, 43.0, 40.0, 43.0, 78.75]), us);
        assert!((d.total - 86.5).abs() < 1e-9);
        assert!((d.average - 86.5 / 6.0).abs() < 1e-9);

        let d = alignment_distance(&pid("DSV3_en"), &scores([32.5, 95.5, 32.5, 57.5, 29.0, 80.5]), china);
        assert!((d.total - 298.5).abs() < 1e-9);

        let d = alignment_distance(&pid("GPT-4o_en"), &us.values, us);
        assert_eq!(d.total, 0.0);
        assert_eq!(d.per_dimension, [0.0; 6]);
    }

    #[test]
    fn classify_thresholds() {
        assert_eq!(AlignmentClass::from_total(89.25), AlignmentClass::Strong);
        assert_eq!(AlignmentClass::from_total(90.0), AlignmentClass::Strong);
        assert_eq!(AlignmentClass::from_total(90.01), AlignmentClass::Soft);
        assert_eq!(AlignmentClass::from_total(98.5), AlignmentClass::Soft);
        assert_eq!(AlignmentClass::from_total(120.0), AlignmentClass::Soft);
        assert_eq!(AlignmentClass::from_total(120.25), AlignmentClass::None);
    }

    #[test]
    fn classify_is_monotone() {
        let mut rng = StdRng::seed_from_u64(5);
        fn strength(class: AlignmentClass) -> u8 {
            match class {
                AlignmentClass::Strong => 2,
                AlignmentClass::Soft => 1,
                AlignmentClass::None => 0,
            }
        }
        for _ in 0..1000 {
            let a: f64 = rng.gen_range(0.0..400.0);
            let b: f64 = rng.gen_range(0.0..400.0);
            let (small, large) = if a <= b { (a, b) } else { (b, a) };
            assert!(strength(AlignmentClass::from_total(small)) >= strength(AlignmentClass::from_total(large)));
        }
    }

    #[test]
    fn improvement_matches_recorded_percentages() {
        assert!((improvement(867.75, 654.75).unwrap() - 24.6).abs() < 0.1);
        assert!((improvement(654.75, 682.25).unwrap() - -4.2).abs() < 0.1);
        assert_eq!(improvement(123.0, 123.0).unwrap(), 0.0);
        assert!(matches!(improvement(0.0, 5.0), Err(AlignmentError::NonPositiveBaseline(_))));
        assert!(matches!(improvement(-4.0, 5.0), Err(AlignmentError::NonPositiveBaseline(_))));
    }

    #[test]
    fn l1_metric_properties() {
        let mut rng = StdRng::seed_from_u64(6);
        for _ in 0..500 {
            let mut v = [[0.0f64; 6]; 3];
            for row in v.iter_mut() {
                for slot in row.iter_mut() {
                    *slot = rng.gen_range(-50.0..150.0);
                }
            }
            let (a, b, c) = (scores(v[0]), scores(v[1]), scores(v[2]));
            assert_eq!(l1_distance(&a, &a), 0.0);
            assert!((l1_distance(&a, &b) - l1_distance(&b, &a)).abs() < 1e-9);
            assert!(l1_distance(&a, &c) <= l1_distance(&a, &b) + l1_distance(&b, &c) + 1e-9);
        }
    }

    #[test]
    fn aggregate_requires_every_model_once() {
        let refs = ReferenceSet::embedded();
        let us = refs.get("US").unwrap();
        let style = PromptStyle::from_suffix("en").unwrap();
        let models: Vec<String> = ["A", "B"].iter().map(|s| s.to_string()).collect();
        let mut distances = vec![
            alignment_distance(&pid("A_en"), &scores([40.0, 91.0, 62.0, 46.0, 26.0, 70.0]), us),
            alignment_distance(&pid("B_en"), &scores([40.0, 91.0, 62.0, 46.0, 26.0, 64.0]), us),
        ];
        let total = aggregate_category(&distances, "US", style, &models).unwrap();
        assert!((total - 6.0).abs() < 1e-9);

        let err = aggregate_category(&distances, "US", style, &[]).unwrap_err();
        assert!(matches!(err, AlignmentError::EmptyCategory(_)));

        let err = aggregate_category(&distances[..1], "US", style, &models).unwrap_err();
        assert_eq!(err.to_string(), "missing model B in category English");

        distances.push(distances[0].clone());
        let err = aggregate_category(&distances, "US", style, &models).unwrap_err();
        assert!(matches!(err, AlignmentError::DuplicateModel { .. }));
    }

    #[test]
    fn derivation_needs_two_rows() {
        let row = DerivationRow {
            label: "X_en".into(),
            scores: scores([40.0, 91.0, 62.0, 46.0, 26.0, 68.0]),
            us_total: 0.0,
            china_total: 317.0,
        };
        let err = derive_references(&[row]).unwrap_err();
        assert!(matches!(err, AlignmentError::Underdetermined(_)));
    }
}
