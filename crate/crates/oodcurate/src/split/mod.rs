//! Domain annotation, descriptor sorting, the sequential OOD split, the
//! per-domain ID split, and the end-to-end [`curate`] driver.
//!
//! Domains are sorted by descriptor (descending by default, ties broken by
//! key ascending) and walked greedily: whole domains flow into the
//! intermediate training set while the cumulative sample count is below
//! `train_fraction · N`, then into OOD-val until the val boundary, then into
//! OOD-test. ID-val and ID-test are then drawn per domain from the
//! intermediate training set with a seeded, hash-keyed shuffle, so the same
//! seed always yields the same membership regardless of worker count.

use std::collections::BTreeMap;
use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::chem::{heavy_atom_count, murcko_scaffold, parse_smiles};
use crate::config::CurationConfig;
use crate::curation::{
    self, CurationError, FilterReport, LabeledSample,
};
use crate::ingest::{self, IngestError, IngestReport, SourceHandle};
use crate::Task;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainKind {
    Assay,
    Scaffold,
    Size,
    Protein,
    ProteinFamily,
}

impl DomainKind {
    pub const ALL: [DomainKind; 5] = [
        DomainKind::Assay,
        DomainKind::Scaffold,
        DomainKind::Size,
        DomainKind::Protein,
        DomainKind::ProteinFamily,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            DomainKind::Assay => "assay",
            DomainKind::Scaffold => "scaffold",
            DomainKind::Size => "size",
            DomainKind::Protein => "protein",
            DomainKind::ProteinFamily => "protein_family",
        }
    }

    pub fn parse(s: &str) -> Option<DomainKind> {
        match s {
            "assay" => Some(DomainKind::Assay),
            "scaffold" => Some(DomainKind::Scaffold),
            "size" => Some(DomainKind::Size),
            "protein" => Some(DomainKind::Protein),
            "protein_family" => Some(DomainKind::ProteinFamily),
            _ => None,
        }
    }

    /// Protein-side domains only exist for SBAP.
    pub fn compatible_with(&self, task: Task) -> bool {
        match self {
            DomainKind::Protein | DomainKind::ProteinFamily => task == Task::Sbap,
            _ => true,
        }
    }

    pub fn default_descriptor(&self) -> DescriptorKind {
        match self {
            DomainKind::Assay | DomainKind::Protein | DomainKind::ProteinFamily => {
                DescriptorKind::DomainCapacity
            }
            DomainKind::Size | DomainKind::Scaffold => DescriptorKind::MolecularSize,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DescriptorKind {
    /// Number of samples in the domain.
    DomainCapacity,
    /// Shared atom count (size domains) or scaffold heavy-atom count
    /// (scaffold domains).
    MolecularSize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SortOrder {
    Descending,
    Ascending,
}

/// How to annotate and order domains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub kind: DomainKind,
    pub descriptor: DescriptorKind,
    pub sort_order: SortOrder,
}

impl DomainSpec {
    /// The conventional spec for a kind: capacity descriptors for
    /// assay/protein kinds, molecular size for size/scaffold, largest first.
    pub fn with_defaults(kind: DomainKind) -> DomainSpec {
        DomainSpec {
            kind,
            descriptor: kind.default_descriptor(),
            sort_order: SortOrder::Descending,
        }
    }

    pub fn validate(&self, task: Task) -> Result<(), SplitError> {
        if !self.kind.compatible_with(task) {
            return Err(SplitError::IncompatibleDomain {
                kind: self.kind,
                task,
            });
        }
        if self.descriptor == DescriptorKind::MolecularSize
            && !matches!(self.kind, DomainKind::Size | DomainKind::Scaffold)
        {
            return Err(SplitError::IncompatibleDescriptor { kind: self.kind });
        }
        Ok(())
    }
}

/// Split fractions and the seed for the ID-split shuffle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitConfig {
    #[serde(default = "default_train_fraction")]
    pub train_fraction_ood: f64,
    #[serde(default = "default_val_fraction")]
    pub val_fraction_ood: f64,
    #[serde(default = "default_train_fraction")]
    pub iid_train_fraction: f64,
    #[serde(default = "default_val_fraction")]
    pub iid_val_fraction: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_train_fraction() -> f64 {
    0.6
}
fn default_val_fraction() -> f64 {
    0.2
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            train_fraction_ood: 0.6,
            val_fraction_ood: 0.2,
            iid_train_fraction: 0.6,
            iid_val_fraction: 0.2,
            seed: 0,
        }
    }
}

impl SplitConfig {
    pub fn validate(&self) -> Result<(), SplitError> {
        let bad = |what: &str| Err(SplitError::InvalidConfig(what.to_string()));
        if !(self.train_fraction_ood > 0.0 && self.train_fraction_ood <= 1.0) {
            return bad("train_fraction_ood must lie in (0, 1]");
        }
        if !(0.0..1.0).contains(&self.val_fraction_ood) {
            return bad("val_fraction_ood must lie in [0, 1)");
        }
        if self.train_fraction_ood + self.val_fraction_ood > 1.0 {
            return bad("train_fraction_ood + val_fraction_ood must not exceed 1");
        }
        if !(self.iid_train_fraction > 0.0 && self.iid_train_fraction <= 1.0) {
            return bad("iid_train_fraction must lie in (0, 1]");
        }
        if !(0.0..1.0).contains(&self.iid_val_fraction) {
            return bad("iid_val_fraction must lie in [0, 1)");
        }
        if self.iid_train_fraction + self.iid_val_fraction > 1.0 {
            return bad("iid_train_fraction + iid_val_fraction must not exceed 1");
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum SplitError {
    #[error("domain kind {kind:?} is incompatible with task {task}")]
    IncompatibleDomain { kind: DomainKind, task: Task },
    #[error("molecular_size descriptor only applies to size and scaffold domains, not {kind:?}")]
    IncompatibleDescriptor { kind: DomainKind },
    #[error("sample is missing the field required by the {kind:?} domain")]
    MissingDomainField { kind: DomainKind },
    #[error("invalid split config: {0}")]
    InvalidConfig(String),
    #[error("scaffold annotation failed to re-parse a filtered SMILES: {0}")]
    Chem(#[from] crate::chem::SmilesError),
}

/// A labeled sample with its domain annotation. `domain_id` is dense and
/// assigned after sorting, so id order equals the split walk order.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainAnnotatedSample {
    pub labeled: LabeledSample,
    pub domain_key: String,
    pub domain_id: u32,
}

impl DomainAnnotatedSample {
    pub fn pvalue(&self) -> f64 {
        self.labeled.merged.pvalue
    }

    pub fn label(&self) -> u8 {
        self.labeled.label
    }

    pub fn smiles(&self) -> &str {
        &self.labeled.merged.smiles
    }

    pub fn input_key(&self) -> &curation::SampleKey {
        &self.labeled.merged.input_key
    }
}

fn domain_key_of(sample: &LabeledSample, kind: DomainKind) -> Result<(String, f64), SplitError> {
    let merged = &sample.merged;
    match kind {
        DomainKind::Assay => {
            // merged samples may span assays; the smallest id is the
            // deterministic representative
            let key = merged
                .assay_ids
                .first()
                .ok_or(SplitError::MissingDomainField { kind })?;
            Ok((key.clone(), 0.0))
        }
        DomainKind::Size => Ok((merged.heavy_atoms.to_string(), f64::from(merged.heavy_atoms))),
        DomainKind::Scaffold => {
            let mol = parse_smiles(&merged.smiles)?;
            let scaffold = murcko_scaffold(&mol);
            let size = f64::from(heavy_atom_count(&scaffold.graph));
            Ok((scaffold.key, size))
        }
        DomainKind::Protein => {
            let key = merged
                .input_key
                .target
                .as_ref()
                .ok_or(SplitError::MissingDomainField { kind })?;
            Ok((key.clone(), 0.0))
        }
        DomainKind::ProteinFamily => {
            let key = merged
                .protein_class_path
                .as_ref()
                .and_then(|p| p.first())
                .ok_or(SplitError::MissingDomainField { kind })?;
            Ok((key.clone(), 0.0))
        }
    }
}

/// Scalar used to order a domain before the sequential split.
pub fn domain_descriptor(
    key: &str,
    samples: &[&LabeledSample],
    spec: &DomainSpec,
) -> Result<f64, SplitError> {
    match spec.descriptor {
        DescriptorKind::DomainCapacity => Ok(samples.len() as f64),
        DescriptorKind::MolecularSize => match spec.kind {
            DomainKind::Size => Ok(f64::from(samples[0].merged.heavy_atoms)),
            DomainKind::Scaffold => {
                if key.is_empty() {
                    return Ok(0.0); // the shared acyclic domain
                }
                let mol = parse_smiles(&samples[0].merged.smiles)?;
                let scaffold = murcko_scaffold(&mol);
                Ok(f64::from(heavy_atom_count(&scaffold.graph)))
            }
            _ => Err(SplitError::IncompatibleDescriptor { kind: spec.kind }),
        },
    }
}

/// Annotate every sample with its domain key and dense, sort-ordered domain
/// id. The returned samples are ordered by (domain_id, input_key).
pub fn assign_domains(
    samples: Vec<LabeledSample>,
    spec: &DomainSpec,
) -> Result<Vec<DomainAnnotatedSample>, SplitError> {
    // per-sample keys (with the size hint scaffold descriptors need),
    // computed in parallel because scaffold keys parse the molecule
    let keyed: Vec<(String, f64)> = samples
        .par_iter()
        .map(|s| domain_key_of(s, spec.kind))
        .collect::<Result<_, _>>()?;

    struct Group {
        size_hint: f64,
        members: Vec<usize>,
    }
    let mut groups: BTreeMap<String, Group> = BTreeMap::new();
    for (idx, (key, size_hint)) in keyed.iter().enumerate() {
        groups
            .entry(key.clone())
            .or_insert(Group {
                size_hint: *size_hint,
                members: Vec::new(),
            })
            .members
            .push(idx);
    }

    // descriptor per group, then sort (descriptor, key) and assign ids
    let mut table: Vec<(String, f64, Vec<usize>)> = groups
        .into_iter()
        .map(|(key, group)| {
            let descriptor = match spec.descriptor {
                DescriptorKind::DomainCapacity => group.members.len() as f64,
                DescriptorKind::MolecularSize => group.size_hint,
            };
            (key, descriptor, group.members)
        })
        .collect();
    table.sort_by(|a, b| {
        let by_descriptor = match spec.sort_order {
            SortOrder::Descending => b.1.total_cmp(&a.1),
            SortOrder::Ascending => a.1.total_cmp(&b.1),
        };
        by_descriptor.then_with(|| a.0.cmp(&b.0))
    });

    let mut out: Vec<DomainAnnotatedSample> = Vec::with_capacity(samples.len());
    let mut slots: Vec<Option<LabeledSample>> = samples.into_iter().map(Some).collect();
    for (id, (key, _, members)) in table.into_iter().enumerate() {
        let mut annotated: Vec<DomainAnnotatedSample> = members
            .into_iter()
            .map(|idx| DomainAnnotatedSample {
                labeled: slots[idx].take().expect("each sample joins one domain"),
                domain_key: key.clone(),
                domain_id: id as u32,
            })
            .collect();
        annotated.sort_by(|a, b| a.input_key().cmp(b.input_key()));
        out.extend(annotated);
    }
    Ok(out)
}

/// One domain with its samples, in split walk order.
#[derive(Debug, Clone)]
pub struct DomainGroup {
    pub id: u32,
    pub key: String,
    pub samples: Vec<DomainAnnotatedSample>,
}

/// Regroup annotated samples by domain id (ids are dense and pre-sorted).
pub fn domain_table(samples: Vec<DomainAnnotatedSample>) -> Vec<DomainGroup> {
    let mut groups: Vec<DomainGroup> = Vec::new();
    for sample in samples {
        match groups.last_mut() {
            Some(g) if g.id == sample.domain_id => g.samples.push(sample),
            _ => groups.push(DomainGroup {
                id: sample.domain_id,
                key: sample.domain_key.clone(),
                samples: vec![sample],
            }),
        }
    }
    groups
}

/// Output of the sequential OOD split: whole domains only, never split.
#[derive(Debug, Clone, Default)]
pub struct OodPartition {
    pub intermediate_train: Vec<DomainGroup>,
    pub ood_val: Vec<DomainGroup>,
    pub ood_test: Vec<DomainGroup>,
    pub warnings: Vec<String>,
}

/// Walk domains in sorted order with a running sample count: into the
/// intermediate training set while `count < train_fraction·N`, then into
/// OOD-val while `count < (train_fraction + val_fraction)·N`, remainder to
/// OOD-test. Empty OOD splits are recorded as warnings, not errors.
pub fn ood_split(domains: Vec<DomainGroup>, cfg: &SplitConfig) -> OodPartition {
    let total: usize = domains.iter().map(|d| d.samples.len()).sum();
    let train_target = cfg.train_fraction_ood * total as f64;
    let val_target = (cfg.train_fraction_ood + cfg.val_fraction_ood) * total as f64;

    let mut partition = OodPartition::default();
    let mut count = 0usize;
    for domain in domains {
        let bucket = if (count as f64) < train_target {
            &mut partition.intermediate_train
        } else if (count as f64) < val_target {
            &mut partition.ood_val
        } else {
            &mut partition.ood_test
        };
        count += domain.samples.len();
        bucket.push(domain);
    }
    if total > 0 {
        if partition.ood_val.is_empty() {
            partition
                .warnings
                .push("degenerate split: OOD validation set is empty".to_string());
        }
        if partition.ood_test.is_empty() {
            partition
                .warnings
                .push("degenerate split: OOD test set is empty".to_string());
        }
    }
    partition
}

/// Floor with a tiny epsilon so fraction arithmetic that lands within one
/// representation error of an integer counts as that integer.
fn floor_frac(fraction: f64, n: usize) -> usize {
    ((fraction * n as f64) + 1e-9).floor() as usize
}

/// Deterministic shuffle token: samples sort by the SHA-256 digest of
/// (seed, domain key, smiles, target), so membership depends only on the
/// seed and the sample identity.
fn shuffle_token(seed: u64, domain_key: &str, sample: &DomainAnnotatedSample) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(domain_key.as_bytes());
    hasher.update([0x1f]);
    hasher.update(sample.labeled.merged.smiles.as_bytes());
    hasher.update([0x1f]);
    if let Some(target) = &sample.labeled.merged.input_key.target {
        hasher.update(target.as_bytes());
    }
    hasher.finalize().into()
}

/// Per-domain ID split of the intermediate training set: `floor` shares for
/// ID-val and ID-test, remainder to train; domains with fewer than three
/// samples contribute entirely to train.
pub fn id_split(
    intermediate: Vec<DomainGroup>,
    cfg: &SplitConfig,
) -> (
    Vec<DomainAnnotatedSample>,
    Vec<DomainAnnotatedSample>,
    Vec<DomainAnnotatedSample>,
) {
    let per_domain: Vec<(Vec<DomainAnnotatedSample>, Vec<DomainAnnotatedSample>, Vec<DomainAnnotatedSample>)> =
        intermediate
            .into_par_iter()
            .map(|domain| {
                let n = domain.samples.len();
                if n < 3 {
                    return (domain.samples, Vec::new(), Vec::new());
                }
                let n_val = floor_frac(cfg.iid_val_fraction, n);
                let n_test = floor_frac(
                    1.0 - cfg.iid_train_fraction - cfg.iid_val_fraction,
                    n,
                );
                let mut shuffled = domain.samples;
                let key = domain.key;
                shuffled.sort_by_cached_key(|s| shuffle_token(cfg.seed, &key, s));
                let mut rest = shuffled.split_off(n_val);
                let val = shuffled;
                let train = rest.split_off(n_test);
                let test = rest;
                (train, val, test)
            })
            .collect();

    let mut train = Vec::new();
    let mut val = Vec::new();
    let mut test = Vec::new();
    for (t, v, s) in per_domain {
        train.extend(t);
        val.extend(v);
        test.extend(s);
    }
    (train, val, test)
}

/// The five split names, in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitId {
    Train,
    IidVal,
    IidTest,
    OodVal,
    OodTest,
}

impl SplitId {
    pub const ALL: [SplitId; 5] = [
        SplitId::Train,
        SplitId::IidVal,
        SplitId::IidTest,
        SplitId::OodVal,
        SplitId::OodTest,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            SplitId::Train => "train",
            SplitId::IidVal => "iid_val",
            SplitId::IidTest => "iid_test",
            SplitId::OodVal => "ood_val",
            SplitId::OodTest => "ood_test",
        }
    }

    pub fn file_name(&self) -> String {
        format!("{}.jsonl", self.as_str())
    }
}

/// A fully curated dataset: five splits plus provenance.
#[derive(Debug, Clone)]
pub struct CuratedDataset {
    pub name: String,
    pub task: Task,
    pub domain_kind: DomainKind,
    pub threshold: f64,
    pub config_digest: String,
    pub seed: u64,
    pub warnings: Vec<String>,
    pub train: Vec<DomainAnnotatedSample>,
    pub iid_val: Vec<DomainAnnotatedSample>,
    pub iid_test: Vec<DomainAnnotatedSample>,
    pub ood_val: Vec<DomainAnnotatedSample>,
    pub ood_test: Vec<DomainAnnotatedSample>,
}

impl CuratedDataset {
    pub fn split(&self, id: SplitId) -> &[DomainAnnotatedSample] {
        match id {
            SplitId::Train => &self.train,
            SplitId::IidVal => &self.iid_val,
            SplitId::IidTest => &self.iid_test,
            SplitId::OodVal => &self.ood_val,
            SplitId::OodTest => &self.ood_test,
        }
    }

    pub fn total_samples(&self) -> usize {
        SplitId::ALL.iter().map(|&s| self.split(s).len()).sum()
    }

    fn domain_keys(&self, splits: &[SplitId]) -> BTreeSet<&str> {
        splits
            .iter()
            .flat_map(|&s| self.split(s).iter().map(|x| x.domain_key.as_str()))
            .collect()
    }

    /// Re-checks every structural invariant of the five-way split.
    pub fn validate(&self) -> Result<(), String> {
        let train_side = self.domain_keys(&[SplitId::Train, SplitId::IidVal, SplitId::IidTest]);
        let ood_val = self.domain_keys(&[SplitId::OodVal]);
        let ood_test = self.domain_keys(&[SplitId::OodTest]);
        if !train_side.is_disjoint(&ood_val) {
            return Err("train-side and OOD-val domain keys overlap".to_string());
        }
        if !train_side.is_disjoint(&ood_test) {
            return Err("train-side and OOD-test domain keys overlap".to_string());
        }
        if !ood_val.is_disjoint(&ood_test) {
            return Err("OOD-val and OOD-test domain keys overlap".to_string());
        }
        let train_only = self.domain_keys(&[SplitId::Train]);
        for id in [SplitId::IidVal, SplitId::IidTest] {
            let keys = self.domain_keys(&[id]);
            if !keys.is_subset(&train_only) {
                return Err(format!(
                    "{} contains domains absent from the train split",
                    id.as_str()
                ));
            }
        }
        // coverage: every sample in exactly one split
        let mut seen: BTreeSet<(&curation::SampleKey, i64)> = BTreeSet::new();
        for id in SplitId::ALL {
            for sample in self.split(id) {
                let token = (sample.input_key(), sample.labeled.merged.first_activity_id);
                if !seen.insert(token) {
                    return Err(format!(
                        "sample {:?} appears in more than one split",
                        sample.input_key()
                    ));
                }
            }
        }
        // label/threshold consistency
        for id in SplitId::ALL {
            for sample in self.split(id) {
                let expected = u8::from(sample.pvalue() >= self.threshold);
                if sample.label() != expected || sample.labeled.threshold_used != self.threshold {
                    return Err("label inconsistent with threshold".to_string());
                }
            }
        }
        Ok(())
    }
}

/// A curation run: the dataset plus its accounting reports.
#[derive(Debug)]
pub struct CurationRun {
    pub dataset: CuratedDataset,
    pub filter_report: FilterReport,
    pub ingest_report: IngestReport,
}

#[derive(Debug, Error)]
pub enum CurateError {
    #[error(transparent)]
    Config(#[from] crate::config::ConfigError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Curation(#[from] CurationError),
    #[error(transparent)]
    Split(#[from] SplitError),
    #[error("no samples survived filtering")]
    EmptyDataset,
}

/// Run the full pipeline: ingest → filters → offsets → merge → threshold →
/// labels → domains → OOD split → ID split. Output is a pure function of
/// `(config, source bytes)`; worker count never changes it.
pub fn curate(config: &CurationConfig, source: &SourceHandle) -> Result<CurationRun, CurateError> {
    config.validate()?;
    let noise = config.resolved_noise();

    let (records, ingest_report) = ingest::read_activity_records(source, config.task)?;
    let (screened, filter_report) = curation::apply_filters(&records, &noise, config.task);
    if screened.is_empty() {
        return Err(CurateError::EmptyDataset);
    }

    let valued = curation::resolve_values(screened, &config.uncertainty)?;
    let merged =
        curation::merge_measurements(valued, config.task, config.uncertainty.average_multiple);
    let pvalues: Vec<f64> = merged.iter().map(|m| m.pvalue).collect();
    let threshold = curation::compute_threshold(&pvalues, &config.threshold)?;
    let labeled = curation::assign_labels(merged, threshold);

    let annotated = assign_domains(labeled, &config.domain)?;
    let domains = domain_table(annotated);
    let partition = ood_split(domains, &config.split);
    let warnings = partition.warnings.clone();
    let ood_val = flatten(partition.ood_val);
    let ood_test = flatten(partition.ood_test);
    let (train, iid_val, iid_test) = id_split(partition.intermediate_train, &config.split);

    let dataset = CuratedDataset {
        name: config.dataset_name(),
        task: config.task,
        domain_kind: config.domain.kind,
        threshold,
        config_digest: config.digest(),
        seed: config.split.seed,
        warnings,
        train: sorted_for_output(train),
        iid_val: sorted_for_output(iid_val),
        iid_test: sorted_for_output(iid_test),
        ood_val: sorted_for_output(ood_val),
        ood_test: sorted_for_output(ood_test),
    };
    Ok(CurationRun {
        dataset,
        filter_report,
        ingest_report,
    })
}

fn flatten(groups: Vec<DomainGroup>) -> Vec<DomainAnnotatedSample> {
    groups.into_iter().flat_map(|g| g.samples).collect()
}

/// Canonical on-disk ordering: (domain_id, input_key, first_activity_id).
fn sorted_for_output(mut samples: Vec<DomainAnnotatedSample>) -> Vec<DomainAnnotatedSample> {
    samples.sort_by(|a, b| {
        (a.domain_id, a.input_key(), a.labeled.merged.first_activity_id).cmp(&(
            b.domain_id,
            b.input_key(),
            b.labeled.merged.first_activity_id,
        ))
    });
    samples
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curation::{MergedSample, SampleKey};

    fn labeled(smiles: &str, assay: &str, target: Option<&str>, activity_id: i64) -> LabeledSample {
        let mol = parse_smiles(smiles).unwrap();
        let merged = MergedSample {
            input_key: SampleKey {
                molecule: crate::chem::canonical_form(&mol),
                target: target.map(|t| t.to_string()),
            },
            smiles: smiles.to_string(),
            protein_sequence: target.map(|_| "MKV".to_string()),
            protein_class_path: Some(vec!["Enzyme".to_string(), "Kinase".to_string()]),
            pvalue: 6.0,
            n_measurements: 1,
            assay_ids: [assay.to_string()].into_iter().collect(),
            heavy_atoms: heavy_atom_count(&mol),
            first_activity_id: activity_id,
        };
        LabeledSample {
            merged,
            label: 1,
            threshold_used: 5.0,
        }
    }

    #[test]
    fn assay_domains_share_keys() {
        let samples = vec![
            labeled("CCO", "A7", None, 1),
            labeled("CCN", "A7", None, 2),
            labeled("CCC", "A2", None, 3),
        ];
        let spec = DomainSpec::with_defaults(DomainKind::Assay);
        let annotated = assign_domains(samples, &spec).unwrap();
        let a7: Vec<&DomainAnnotatedSample> =
            annotated.iter().filter(|s| s.domain_key == "A7").collect();
        assert_eq!(a7.len(), 2);
        assert_eq!(a7[0].domain_id, a7[1].domain_id);
        // capacity sort: A7 (2 samples) precedes A2 (1 sample)
        assert_eq!(a7[0].domain_id, 0);
    }

    #[test]
    fn size_domains_use_atom_counts() {
        let samples = vec![labeled("CCO", "A1", None, 1), labeled("CCN", "A2", None, 2)];
        let spec = DomainSpec::with_defaults(DomainKind::Size);
        let annotated = assign_domains(samples, &spec).unwrap();
        assert!(annotated.iter().all(|s| s.domain_key == "3"));
        assert!(annotated.iter().all(|s| s.domain_id == 0));
    }

    #[test]
    fn protein_family_uses_classification_root() {
        let samples = vec![labeled("CCO", "A1", Some("T1"), 1)];
        let spec = DomainSpec::with_defaults(DomainKind::ProteinFamily);
        let annotated = assign_domains(samples, &spec).unwrap();
        assert_eq!(annotated[0].domain_key, "Enzyme");
    }

    #[test]
    fn missing_domain_fields_error() {
        let samples = vec![labeled("CCO", "A1", None, 1)];
        let spec = DomainSpec::with_defaults(DomainKind::Protein);
        assert!(matches!(
            assign_domains(samples, &spec),
            Err(SplitError::MissingDomainField { .. })
        ));
    }

    #[test]
    fn descriptor_examples() {
        let many: Vec<LabeledSample> = (0..120)
            .map(|i| labeled("CCO", "A1", None, i))
            .collect();
        let refs: Vec<&LabeledSample> = many.iter().collect();
        let spec = DomainSpec::with_defaults(DomainKind::Assay);
        assert_eq!(domain_descriptor("A1", &refs, &spec).unwrap(), 120.0);

        let spec = DomainSpec::with_defaults(DomainKind::Size);
        let sample = labeled("CCO", "A1", None, 1);
        assert_eq!(domain_descriptor("3", &[&sample], &spec).unwrap(), 3.0);

        let spec = DomainSpec::with_defaults(DomainKind::Scaffold);
        let ring = labeled("CCc1ccccc1", "A1", None, 1);
        let key = &assign_domains(vec![ring.clone()], &spec).unwrap()[0].domain_key.clone();
        assert_eq!(domain_descriptor(key, &[&ring], &spec).unwrap(), 6.0);
        // the shared acyclic domain has scaffold size zero
        assert_eq!(domain_descriptor("", &[&sample], &spec).unwrap(), 0.0);
    }

    fn domain_of(id: u32, size: usize) -> DomainGroup {
        DomainGroup {
            id,
            key: format!("D{id}"),
            samples: (0..size)
                .map(|i| {
                    let mut s = labeled("CCO", &format!("A{id}"), None, (id as i64) * 1000 + i as i64);
                    s.merged.input_key.molecule = format!("M{id}-{i}");
                    s.merged.smiles = format!("M{id}-{i}");
                    DomainAnnotatedSample {
                        labeled: s,
                        domain_key: format!("D{id}"),
                        domain_id: id,
                    }
                })
                .collect(),
        }
    }

    #[test]
    fn ood_split_walks_the_sorted_order() {
        let domains: Vec<DomainGroup> = [40, 20, 20, 10, 10]
            .iter()
            .enumerate()
            .map(|(i, &n)| domain_of(i as u32, n))
            .collect();
        let cfg = SplitConfig::default();
        let partition = ood_split(domains, &cfg);
        let sizes = |groups: &[DomainGroup]| -> Vec<usize> {
            groups.iter().map(|g| g.samples.len()).collect()
        };
        assert_eq!(sizes(&partition.intermediate_train), vec![40, 20]);
        assert_eq!(sizes(&partition.ood_val), vec![20]);
        assert_eq!(sizes(&partition.ood_test), vec![10, 10]);
        assert!(partition.warnings.is_empty());
    }

    #[test]
    fn ood_split_degenerate_cases() {
        // a single domain holding everything goes to train, with warnings
        let partition = ood_split(vec![domain_of(0, 50)], &SplitConfig::default());
        assert_eq!(partition.intermediate_train.len(), 1);
        assert!(partition.ood_val.is_empty() && partition.ood_test.is_empty());
        assert_eq!(partition.warnings.len(), 2);

        // fractions 1.0 / 0.0 push everything into train
        let cfg = SplitConfig {
            train_fraction_ood: 1.0,
            val_fraction_ood: 0.0,
            ..SplitConfig::default()
        };
        let domains: Vec<DomainGroup> = (0..5).map(|i| domain_of(i, 10)).collect();
        let partition = ood_split(domains, &cfg);
        assert_eq!(partition.intermediate_train.len(), 5);
        assert!(partition.ood_val.is_empty() && partition.ood_test.is_empty());
    }

    #[test]
    fn id_split_examples() {
        let cfg = SplitConfig::default();
        let (train, val, test) = id_split(vec![domain_of(0, 10)], &cfg);
        assert_eq!((train.len(), val.len(), test.len()), (6, 2, 2));

        // tiny domains contribute entirely to train
        let (train, val, test) = id_split(vec![domain_of(0, 1)], &cfg);
        assert_eq!((train.len(), val.len(), test.len()), (1, 0, 0));
        let (train, val, test) = id_split(vec![domain_of(0, 2)], &cfg);
        assert_eq!((train.len(), val.len(), test.len()), (2, 0, 0));

        // same seed, same membership
        let pick = |seed: u64| -> Vec<String> {
            let cfg = SplitConfig {
                seed,
                ..SplitConfig::default()
            };
            id_split(vec![domain_of(0, 10)], &cfg)
                .1
                .iter()
                .map(|s| s.smiles().to_string())
                .collect()
        };
        assert_eq!(pick(7), pick(7));
        assert_ne!(pick(7), pick(8), "different seeds should reshuffle");
    }

    #[test]
    fn sort_ties_break_by_key_ascending() {
        let samples = vec![
            labeled("CCO", "B", None, 1),
            labeled("CCN", "A", None, 2),
            labeled("CCC", "C", None, 3),
        ];
        let spec = DomainSpec::with_defaults(DomainKind::Assay);
        let annotated = assign_domains(samples, &spec).unwrap();
        // all domains have capacity 1: ids follow key order A, B, C
        let keys: Vec<(&str, u32)> = annotated
            .iter()
            .map(|s| (s.domain_key.as_str(), s.domain_id))
            .collect();
        assert!(keys.contains(&("A", 0)));
        assert!(keys.contains(&("B", 1)));
        assert!(keys.contains(&("C", 2)));
    }

    #[test]
    fn split_config_validation() {
        let mut cfg = SplitConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.train_fraction_ood = 0.0;
        assert!(cfg.validate().is_err());
        cfg.train_fraction_ood = 0.9;
        cfg.val_fraction_ood = 0.2;
        assert!(cfg.validate().is_err());
        cfg.val_fraction_ood = 0.1;
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn domain_spec_validation() {
        assert!(DomainSpec::with_defaults(DomainKind::Protein)
            .validate(Task::Lbap)
            .is_err());
        assert!(DomainSpec::with_defaults(DomainKind::Protein)
            .validate(Task::Sbap)
            .is_ok());
        let spec = DomainSpec {
            kind: DomainKind::Assay,
            descriptor: DescriptorKind::MolecularSize,
            sort_order: SortOrder::Descending,
        };
        assert!(spec.validate(Task::Lbap).is_err());
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn ood_split_covers_and_respects_boundaries(
                sizes in prop::collection::vec(1usize..40, 1..30),
                train_pct in 1u32..=10,
                val_pct in 0u32..=5,
            ) {
                prop_assume!(train_pct + val_pct <= 10);
                let cfg = SplitConfig {
                    train_fraction_ood: f64::from(train_pct) / 10.0,
                    val_fraction_ood: f64::from(val_pct) / 10.0,
                    ..SplitConfig::default()
                };
                let total: usize = sizes.iter().sum();
                let domains: Vec<DomainGroup> = sizes
                    .iter()
                    .enumerate()
                    .map(|(i, &n)| domain_of(i as u32, n))
                    .collect();
                let partition = ood_split(domains, &cfg);
                let count = |gs: &[DomainGroup]| -> usize {
                    gs.iter().map(|g| g.samples.len()).sum()
                };
                let (a, b, c) = (
                    count(&partition.intermediate_train),
                    count(&partition.ood_val),
                    count(&partition.ood_test),
                );
                prop_assert_eq!(a + b + c, total);
                // fraction fidelity: the train boundary error is bounded by
                // the last domain assigned to train
                let last_train = partition
                    .intermediate_train
                    .last()
                    .map(|g| g.samples.len())
                    .unwrap_or(0);
                let target = cfg.train_fraction_ood * total as f64;
                if b + c > 0 {
                    prop_assert!((a as f64 - target).abs() <= last_train as f64 + 1e-9);
                }
                // ids are contiguous across the three buckets
                let ids: Vec<u32> = partition
                    .intermediate_train
                    .iter()
                    .chain(&partition.ood_val)
                    .chain(&partition.ood_test)
                    .map(|g| g.id)
                    .collect();
                let mut sorted = ids.clone();
                sorted.sort_unstable();
                prop_assert_eq!(ids, sorted);
            }

            #[test]
            fn id_split_floors_and_covers(
                n in 1usize..200,
                val_pct in 0u32..=4,
                test_share_pct in 0u32..=4,
            ) {
                let iid_val = f64::from(val_pct) / 10.0;
                let iid_train = 1.0 - iid_val - f64::from(test_share_pct) / 10.0;
                prop_assume!(iid_train > 0.0);
                let cfg = SplitConfig {
                    iid_train_fraction: iid_train,
                    iid_val_fraction: iid_val,
                    ..SplitConfig::default()
                };
                let (train, val, test) = id_split(vec![domain_of(0, n)], &cfg);
                prop_assert_eq!(train.len() + val.len() + test.len(), n);
                if n < 3 {
                    prop_assert_eq!(train.len(), n);
                } else {
                    prop_assert_eq!(val.len(), floor_frac(iid_val, n));
                    prop_assert_eq!(test.len(), floor_frac(1.0 - iid_train - iid_val, n));
                    prop_assert!(!train.is_empty());
                }
            }
        }
    }
}
