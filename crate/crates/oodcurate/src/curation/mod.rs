//! Noise filtering, uncertainty handling, measurement merging, and adaptive
//! binary labeling.
//!
//! Filtering is two-pass: sample-level screening first (relation, missing
//! values, units, SMILES legality), then assay-level screening over the
//! survivors (measurement type, per-assay distinct-molecule count,
//! confidence score, target type). Censored measurements are offset in
//! linear value space before unit normalization; repeated measurements are
//! merged by averaging pValues (the geometric mean of linear values); the
//! binary threshold is the dataset-wide median clamped to a fixed fallback.

use std::collections::BTreeMap;
use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chem::{canonical_form, heavy_atom_count, parse_smiles};
use crate::ingest::RawActivityRecord;
use crate::{NoiseLevel, Task};

/// Qualifier on a reported activity value. Ordering matches the canonical
/// symbol order `=, ~, >, <, >=, <=` used in serialized relation sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Relation {
    Eq,
    Approx,
    Gt,
    Lt,
    Ge,
    Le,
}

impl Relation {
    pub const ALL: [Relation; 6] = [
        Relation::Eq,
        Relation::Approx,
        Relation::Gt,
        Relation::Lt,
        Relation::Ge,
        Relation::Le,
    ];

    pub fn symbol(&self) -> &'static str {
        match self {
            Relation::Eq => "=",
            Relation::Approx => "~",
            Relation::Gt => ">",
            Relation::Lt => "<",
            Relation::Ge => ">=",
            Relation::Le => "<=",
        }
    }

    pub fn parse(s: &str) -> Option<Relation> {
        match s {
            "=" => Some(Relation::Eq),
            "~" => Some(Relation::Approx),
            ">" => Some(Relation::Gt),
            "<" => Some(Relation::Lt),
            ">=" => Some(Relation::Ge),
            "<=" => Some(Relation::Le),
            _ => None,
        }
    }

    /// Exact and approximate relations take no uncertainty offset.
    pub fn is_exact(&self) -> bool {
        matches!(self, Relation::Eq | Relation::Approx)
    }
}

impl Serialize for Relation {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.symbol())
    }
}

impl<'de> Deserialize<'de> for Relation {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Relation::parse(&s)
            .ok_or_else(|| serde::de::Error::custom(format!("unknown relation symbol '{s}'")))
    }
}

fn default_true() -> bool {
    true
}

/// One noise tier's filter recipe.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseFilterConfig {
    pub measurement_types: BTreeSet<String>,
    /// Inclusive range of distinct molecules per assay; `None` = unrestricted.
    #[serde(default)]
    pub molecules_per_assay: Option<(u32, u32)>,
    pub allowed_units: BTreeSet<String>,
    #[serde(default)]
    pub min_confidence: Option<i64>,
    #[serde(default)]
    pub allowed_target_types: Option<BTreeSet<String>>,
    pub allowed_relations: BTreeSet<Relation>,
    #[serde(default = "default_true")]
    pub require_value: bool,
    #[serde(default = "default_true")]
    pub require_legal_smiles: bool,
}

impl NoiseFilterConfig {
    pub fn validate(&self) -> Result<(), CurationError> {
        if let Some((lo, hi)) = self.molecules_per_assay {
            if lo < 1 || lo > hi {
                return Err(CurationError::InvalidFilter(format!(
                    "molecules_per_assay range [{lo},{hi}] must be positive and ordered"
                )));
            }
        }
        Ok(())
    }
}

fn set_of(items: &[&str]) -> BTreeSet<String> {
    items.iter().map(|s| s.to_string()).collect()
}

/// The built-in filter matrix for the three noise tiers.
pub fn noise_preset(level: NoiseLevel, measurement_types: BTreeSet<String>) -> NoiseFilterConfig {
    let units = set_of(&["nM", "uM"]);
    match level {
        NoiseLevel::Core => NoiseFilterConfig {
            measurement_types,
            molecules_per_assay: Some((50, 3000)),
            allowed_units: units,
            min_confidence: Some(9),
            allowed_target_types: Some(set_of(&["SINGLE PROTEIN"])),
            allowed_relations: [Relation::Eq, Relation::Approx].into_iter().collect(),
            require_value: true,
            require_legal_smiles: true,
        },
        NoiseLevel::Refined => NoiseFilterConfig {
            measurement_types,
            molecules_per_assay: Some((32, 5000)),
            allowed_units: units,
            min_confidence: Some(3),
            allowed_target_types: Some(set_of(&[
                "SINGLE PROTEIN",
                "PROTEIN COMPLEX",
                "PROTEIN FAMILY",
            ])),
            allowed_relations: [Relation::Eq, Relation::Approx, Relation::Ge, Relation::Le]
                .into_iter()
                .collect(),
            require_value: true,
            require_legal_smiles: true,
        },
        NoiseLevel::General => NoiseFilterConfig {
            measurement_types,
            molecules_per_assay: Some((10, 5000)),
            allowed_units: units,
            min_confidence: None,
            allowed_target_types: None,
            allowed_relations: Relation::ALL.into_iter().collect(),
            require_value: true,
            require_legal_smiles: true,
        },
    }
}

#[derive(Debug, Error)]
pub enum CurationError {
    #[error("invalid filter config: {0}")]
    InvalidFilter(String),
    #[error("unknown relation symbol '{0}' (not in the uncertainty delta map)")]
    UnknownRelation(String),
    #[error("unknown unit '{0}' (expected nM or uM)")]
    UnknownUnit(String),
    #[error("non-positive activity value {0}")]
    NonPositiveValue(f64),
    #[error("cannot compute a threshold over an empty sample set")]
    EmptyInput,
}

/// Why a record was dropped. Sample criteria are checked in declaration
/// order; assay criteria likewise, after grouping survivors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DropCriterion {
    MeasurementType,
    Relation,
    MissingValue,
    NonPositiveValue,
    Units,
    IllegalSmiles,
    AssayMoleculeCount,
    AssayConfidence,
    AssayTargetType,
}

impl DropCriterion {
    pub fn as_str(&self) -> &'static str {
        match self {
            DropCriterion::MeasurementType => "measurement_type",
            DropCriterion::Relation => "relation",
            DropCriterion::MissingValue => "missing_value",
            DropCriterion::NonPositiveValue => "non_positive_value",
            DropCriterion::Units => "units",
            DropCriterion::IllegalSmiles => "illegal_smiles",
            DropCriterion::AssayMoleculeCount => "assay_molecule_count",
            DropCriterion::AssayConfidence => "assay_confidence_score",
            DropCriterion::AssayTargetType => "assay_target_type",
        }
    }
}

/// Emitted alongside every filtering run.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterReport {
    pub input_count: u64,
    pub output_count: u64,
    pub dropped: BTreeMap<String, u64>,
}

impl FilterReport {
    fn drop_one(&mut self, criterion: DropCriterion) {
        *self.dropped.entry(criterion.as_str().to_string()).or_insert(0) += 1;
    }
}

/// Per-assay summary over the records surviving sample-level screening.
#[derive(Debug, Clone, PartialEq)]
pub struct AssaySummary {
    pub measurement_type: String,
    /// Distinct molecules among the assay's surviving records.
    pub molecule_count: u64,
    pub confidence_score: Option<i64>,
    pub target_type: Option<String>,
}

/// Assay-level acceptance: every restricted criterion must be met;
/// unrestricted criteria always pass.
pub fn assay_passes(summary: &AssaySummary, cfg: &NoiseFilterConfig) -> bool {
    assay_verdict(summary, cfg).is_none()
}

fn assay_verdict(summary: &AssaySummary, cfg: &NoiseFilterConfig) -> Option<DropCriterion> {
    if !cfg.measurement_types.contains(&summary.measurement_type) {
        return Some(DropCriterion::MeasurementType);
    }
    if let Some((lo, hi)) = cfg.molecules_per_assay {
        if summary.molecule_count < u64::from(lo) || summary.molecule_count > u64::from(hi) {
            return Some(DropCriterion::AssayMoleculeCount);
        }
    }
    if let Some(min) = cfg.min_confidence {
        if summary.confidence_score.is_none_or(|c| c < min) {
            return Some(DropCriterion::AssayConfidence);
        }
    }
    if let Some(allowed) = &cfg.allowed_target_types {
        if summary
            .target_type
            .as_ref()
            .is_none_or(|t| !allowed.contains(t))
        {
            return Some(DropCriterion::AssayTargetType);
        }
    }
    None
}

/// Sample-level acceptance. `smiles_legal` is the externally computed
/// legality verdict for the record's SMILES (parse + valence), so callers
/// that already parsed the molecule do not pay twice.
///
/// For `sbap`, target id and protein sequence count as required values: the
/// task's inputs are (molecule, protein) pairs, so a record without them is
/// an incomplete sample.
pub fn sample_passes(
    record: &RawActivityRecord,
    cfg: &NoiseFilterConfig,
    task: Task,
    smiles_legal: bool,
) -> bool {
    sample_verdict(record, cfg, task, smiles_legal).is_none()
}

fn sample_verdict(
    record: &RawActivityRecord,
    cfg: &NoiseFilterConfig,
    task: Task,
    smiles_legal: bool,
) -> Option<DropCriterion> {
    let relation_ok = record
        .standard_relation
        .as_deref()
        .and_then(Relation::parse)
        .map(|r| cfg.allowed_relations.contains(&r));
    if relation_ok != Some(true) {
        return Some(DropCriterion::Relation);
    }
    if cfg.require_value {
        let missing_target = task == Task::Sbap
            && (record.target_id.is_none() || record.protein_sequence.is_none());
        if record.standard_value.is_none()
            || record.standard_units.is_none()
            || record.smiles.is_none()
            || missing_target
        {
            return Some(DropCriterion::MissingValue);
        }
        if record.standard_value.is_some_and(|v| v <= 0.0) {
            return Some(DropCriterion::NonPositiveValue);
        }
    }
    if let Some(units) = &record.standard_units {
        if !cfg.allowed_units.contains(units) {
            return Some(DropCriterion::Units);
        }
    }
    if cfg.require_legal_smiles && record.smiles.is_some() && !smiles_legal {
        return Some(DropCriterion::IllegalSmiles);
    }
    None
}

/// A record that survived sample screening, with the chemistry derived once.
#[derive(Debug, Clone)]
pub struct ScreenedRecord {
    pub record: RawActivityRecord,
    pub molecule_key: String,
    pub heavy_atoms: u32,
    pub relation: Relation,
}

/// Two-pass filtering: sample screening with per-record chemistry, then
/// whole-assay drops over the survivors. An empty result is not an error
/// here; the pipeline decides.
///
/// Records whose measurement type is not requested are dropped in pass 1
/// (tallied under `measurement_type`), so assay summaries and molecule
/// counts cover exactly the records that could enter the dataset. Survivors
/// always have parseable SMILES because the screened form carries the
/// canonical molecule key.
pub fn apply_filters(
    records: &[RawActivityRecord],
    cfg: &NoiseFilterConfig,
    task: Task,
) -> (Vec<ScreenedRecord>, FilterReport) {
    let mut report = FilterReport {
        input_count: records.len() as u64,
        ..FilterReport::default()
    };

    enum Outcome {
        Kept(Box<ScreenedRecord>),
        Dropped(DropCriterion),
    }

    let outcomes: Vec<Outcome> = records
        .par_iter()
        .map(|record| {
            if !cfg.measurement_types.contains(&record.standard_type) {
                return Outcome::Dropped(DropCriterion::MeasurementType);
            }
            // cheap criteria first; parse only when everything else passed
            if let Some(criterion) = sample_verdict(record, cfg, task, true) {
                return Outcome::Dropped(criterion);
            }
            let Some(smiles) = record.smiles.as_deref() else {
                // only reachable when require_value is off; survivors still
                // need chemistry, so a record without SMILES cannot proceed
                return Outcome::Dropped(DropCriterion::MissingValue);
            };
            let Ok(mol) = parse_smiles(smiles) else {
                return Outcome::Dropped(DropCriterion::IllegalSmiles);
            };
            let relation = record
                .standard_relation
                .as_deref()
                .and_then(Relation::parse)
                .expect("relation validated by the verdict");
            Outcome::Kept(Box::new(ScreenedRecord {
                record: record.clone(),
                molecule_key: canonical_form(&mol),
                heavy_atoms: heavy_atom_count(&mol),
                relation,
            }))
        })
        .collect();

    let mut survivors: Vec<ScreenedRecord> = Vec::new();
    for outcome in outcomes {
        match outcome {
            Outcome::Kept(s) => survivors.push(*s),
            Outcome::Dropped(criterion) => report.drop_one(criterion),
        }
    }

    // pass 2: assay-level screening over sample survivors
    let mut by_assay: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (idx, s) in survivors.iter().enumerate() {
        by_assay.entry(&s.record.assay_id).or_default().push(idx);
    }
    let mut keep = vec![false; survivors.len()];
    for (_, members) in by_assay {
        let first = &survivors[members[0]];
        let molecules: BTreeSet<&str> = members
            .iter()
            .map(|&i| survivors[i].molecule_key.as_str())
            .collect();
        let summary = AssaySummary {
            measurement_type: first.record.standard_type.clone(),
            molecule_count: molecules.len() as u64,
            confidence_score: first.record.confidence_score,
            target_type: first.record.target_type.clone(),
        };
        match assay_verdict(&summary, cfg) {
            None => {
                for &i in &members {
                    keep[i] = true;
                }
            }
            Some(criterion) => {
                for _ in &members {
                    report.drop_one(criterion);
                }
            }
        }
    }

    let mut kept = Vec::with_capacity(survivors.len());
    for (i, s) in survivors.into_iter().enumerate() {
        if keep[i] {
            kept.push(s);
        }
    }
    report.output_count = kept.len() as u64;
    (kept, report)
}

/// Uncertainty handling knobs: whether repeated measurements are averaged,
/// and the per-relation ten-fold offsets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UncertaintyConfig {
    #[serde(default = "default_true")]
    pub average_multiple: bool,
    #[serde(default = "default_delta_map")]
    pub delta_map: BTreeMap<Relation, i32>,
}

impl Default for UncertaintyConfig {
    fn default() -> Self {
        UncertaintyConfig {
            average_multiple: true,
            delta_map: default_delta_map(),
        }
    }
}

pub fn default_delta_map() -> BTreeMap<Relation, i32> {
    [
        (Relation::Lt, -1),
        (Relation::Le, -1),
        (Relation::Gt, 1),
        (Relation::Ge, 1),
    ]
    .into_iter()
    .collect()
}

/// Offset a censored value by the configured power of ten, in linear value
/// space (before unit normalization). Exact and approximate relations pass
/// through unchanged.
pub fn offset_uncertain(
    value: f64,
    relation: Relation,
    delta_map: &BTreeMap<Relation, i32>,
) -> Result<f64, CurationError> {
    if relation.is_exact() {
        return Ok(value);
    }
    match delta_map.get(&relation) {
        Some(&delta) => Ok(value * 10f64.powi(delta)),
        None => Err(CurationError::UnknownRelation(relation.symbol().to_string())),
    }
}

/// Normalize to molar and take the negative base-10 logarithm:
/// pValue = 9 − log10(value in nM). Unit `uM` converts at ×1000.
pub fn to_pvalue(value: f64, units: &str) -> Result<f64, CurationError> {
    let value_nm = match units {
        "nM" => value,
        "uM" => value * 1000.0,
        other => return Err(CurationError::UnknownUnit(other.to_string())),
    };
    if value_nm <= 0.0 {
        return Err(CurationError::NonPositiveValue(value_nm));
    }
    Ok(9.0 - value_nm.log10())
}

/// A screened record with its offset-resolved pValue.
#[derive(Debug, Clone)]
pub struct ValuedRecord {
    pub record: RawActivityRecord,
    pub molecule_key: String,
    pub heavy_atoms: u32,
    pub pvalue: f64,
}

/// Apply relation offsets and compute pValues for every survivor.
pub fn resolve_values(
    records: Vec<ScreenedRecord>,
    cfg: &UncertaintyConfig,
) -> Result<Vec<ValuedRecord>, CurationError> {
    records
        .into_iter()
        .map(|s| {
            let raw = s.record.standard_value.ok_or_else(|| {
                CurationError::InvalidFilter(
                    "record without standard_value reached value resolution".into(),
                )
            })?;
            let units = s.record.standard_units.clone().ok_or_else(|| {
                CurationError::InvalidFilter(
                    "record without standard_units reached value resolution".into(),
                )
            })?;
            let offset = offset_uncertain(raw, s.relation, &cfg.delta_map)?;
            let pvalue = to_pvalue(offset, &units)?;
            Ok(ValuedRecord {
                record: s.record,
                molecule_key: s.molecule_key,
                heavy_atoms: s.heavy_atoms,
                pvalue,
            })
        })
        .collect()
}

/// Grouping key of a curated sample: the canonical molecule key alone for
/// LBAP, the (molecule, target) pair for SBAP.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SampleKey {
    pub molecule: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
}

/// One curated sample after multi-measurement resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct MergedSample {
    pub input_key: SampleKey,
    pub smiles: String,
    pub protein_sequence: Option<String>,
    /// Retained for protein-family domain annotation.
    pub protein_class_path: Option<Vec<String>>,
    /// Mean pValue over the merged measurements.
    pub pvalue: f64,
    pub n_measurements: u32,
    pub assay_ids: BTreeSet<String>,
    /// Heavy-atom count of the molecule, retained for size domains.
    pub heavy_atoms: u32,
    /// Smallest contributing activity_id; deterministic tie-breaker only.
    pub first_activity_id: i64,
}

/// Merge repeated measurements: groups share a [`SampleKey`], the group's
/// pValue is the arithmetic mean of member pValues (members summed in
/// activity_id order for bit-stable results), and assay ids accumulate.
/// With `average_multiple` off, every record becomes its own sample.
pub fn merge_measurements(
    records: Vec<ValuedRecord>,
    task: Task,
    average_multiple: bool,
) -> Vec<MergedSample> {
    let as_sample = |mut members: Vec<&ValuedRecord>| -> MergedSample {
        members.sort_by_key(|m| m.record.activity_id);
        let representative = members[0];
        let sum: f64 = members.iter().map(|m| m.pvalue).sum();
        let target = match task {
            Task::Sbap => representative.record.target_id.clone(),
            Task::Lbap => None,
        };
        MergedSample {
            input_key: SampleKey {
                molecule: representative.molecule_key.clone(),
                target,
            },
            smiles: representative
                .record
                .smiles
                .clone()
                .expect("smiles presence guaranteed by filtering"),
            protein_sequence: representative.record.protein_sequence.clone(),
            protein_class_path: representative.record.protein_class_path.clone(),
            pvalue: sum / members.len() as f64,
            n_measurements: members.len() as u32,
            assay_ids: members.iter().map(|m| m.record.assay_id.clone()).collect(),
            heavy_atoms: representative.heavy_atoms,
            first_activity_id: representative.record.activity_id,
        }
    };

    if !average_multiple {
        let mut singles: Vec<MergedSample> =
            records.iter().map(|r| as_sample(vec![r])).collect();
        singles.sort_by(|a, b| {
            (&a.input_key, a.first_activity_id).cmp(&(&b.input_key, b.first_activity_id))
        });
        return singles;
    }

    let mut groups: BTreeMap<SampleKey, Vec<&ValuedRecord>> = BTreeMap::new();
    for record in &records {
        let key = SampleKey {
            molecule: record.molecule_key.clone(),
            target: match task {
                Task::Sbap => record.record.target_id.clone(),
                Task::Lbap => None,
            },
        };
        groups.entry(key).or_default().push(record);
    }
    groups.into_values().map(as_sample).collect()
}

/// Threshold selection bounds: the dataset median is used when it lies in
/// `[lower, upper]`, otherwise the fixed fallback applies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdConfig {
    #[serde(default = "default_lower")]
    pub lower: f64,
    #[serde(default = "default_upper")]
    pub upper: f64,
    #[serde(default = "default_fix")]
    pub fix: f64,
}

fn default_lower() -> f64 {
    4.0
}
fn default_upper() -> f64 {
    6.0
}
fn default_fix() -> f64 {
    5.0
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        ThresholdConfig {
            lower: default_lower(),
            upper: default_upper(),
            fix: default_fix(),
        }
    }
}

impl ThresholdConfig {
    pub fn validate(&self) -> Result<(), CurationError> {
        if !(self.lower <= self.fix && self.fix <= self.upper) {
            return Err(CurationError::InvalidFilter(format!(
                "threshold bounds must satisfy lower <= fix <= upper, got {} / {} / {}",
                self.lower, self.fix, self.upper
            )));
        }
        Ok(())
    }
}

/// Median of all pValues if it lies within the configured bounds
/// (inclusive), else the fixed fallback. Median of an even-length list is
/// the mean of the two central values. Computed once over the entire merged
/// dataset, before any split.
pub fn compute_threshold(pvalues: &[f64], cfg: &ThresholdConfig) -> Result<f64, CurationError> {
    if pvalues.is_empty() {
        return Err(CurationError::EmptyInput);
    }
    let mut sorted = pvalues.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    };
    Ok(if median >= cfg.lower && median <= cfg.upper {
        median
    } else {
        cfg.fix
    })
}

/// A merged sample with its binary activity label.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub merged: MergedSample,
    /// 1 = active, 0 = inactive.
    pub label: u8,
    pub threshold_used: f64,
}

/// Active iff pValue ≥ threshold; ties go active.
pub fn assign_labels(samples: Vec<MergedSample>, threshold: f64) -> Vec<LabeledSample> {
    samples
        .into_iter()
        .map(|merged| {
            let label = u8::from(merged.pvalue >= threshold);
            LabeledSample {
                merged,
                label,
                threshold_used: threshold,
            }
        })
        .collect()
}
