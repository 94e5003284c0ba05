//! Dataset persistence and statistics.
//!
//! Output directory layout:
//! `<save_dir>/<dataset_name>/{train,iid_val,iid_test,ood_val,ood_test}.jsonl`
//! plus `metadata.json`, `stats.json`, and `filter_report.json`. Split files
//! hold one sample per line sorted by (domain_id, input_key), so a run's
//! output bytes are a pure function of the dataset.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::IngestReport;
use crate::split::{CuratedDataset, CurationRun, DomainAnnotatedSample, DomainKind, SplitId};
use crate::Task;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum ReportError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("refusing to overwrite {dir}: it holds a dataset with a different config digest (use force)")]
    DigestMismatch { dir: PathBuf },
    #[error("malformed dataset file {path}: {msg}")]
    Malformed { path: PathBuf, msg: String },
}

/// One line of a split file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SampleLine {
    smiles: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    protein_sequence: Option<String>,
    pvalue: f64,
    label: u8,
    domain_key: String,
    domain_id: u32,
    n_measurements: u32,
}

impl SampleLine {
    fn from_sample(sample: &DomainAnnotatedSample, task: Task) -> SampleLine {
        SampleLine {
            smiles: sample.smiles().to_string(),
            protein_sequence: match task {
                Task::Sbap => sample.labeled.merged.protein_sequence.clone(),
                Task::Lbap => None,
            },
            pvalue: sample.pvalue(),
            label: sample.label(),
            domain_key: sample.domain_key.clone(),
            domain_id: sample.domain_id,
            n_measurements: sample.labeled.merged.n_measurements,
        }
    }
}

/// Per-split sample counts persisted in the metadata.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub train: u64,
    pub iid_val: u64,
    pub iid_test: u64,
    pub ood_val: u64,
    pub ood_test: u64,
}

impl SplitCounts {
    fn of(dataset: &CuratedDataset) -> SplitCounts {
        SplitCounts {
            train: dataset.train.len() as u64,
            iid_val: dataset.iid_val.len() as u64,
            iid_test: dataset.iid_test.len() as u64,
            ood_val: dataset.ood_val.len() as u64,
            ood_test: dataset.ood_test.len() as u64,
        }
    }

    pub fn get(&self, id: SplitId) -> u64 {
        match id {
            SplitId::Train => self.train,
            SplitId::IidVal => self.iid_val,
            SplitId::IidTest => self.iid_test,
            SplitId::OodVal => self.ood_val,
            SplitId::OodTest => self.ood_test,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMetadata {
    pub name: String,
    pub task: Task,
    pub domain_kind: DomainKind,
    pub threshold: f64,
    pub seed: u64,
    pub config_digest: String,
    pub tool_version: String,
    pub counts: SplitCounts,
    #[serde(default)]
    pub warnings: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ingest: Option<IngestReport>,
}

/// Write the five split files and `metadata.json` into `dir` (created if
/// needed). A directory already holding a dataset with a different config
/// digest is refused unless `force` is set; rewriting the same digest is
/// idempotent. Returns the paths written.
pub fn write_dataset(
    dataset: &CuratedDataset,
    dir: &Path,
    force: bool,
) -> Result<Vec<PathBuf>, ReportError> {
    write_dataset_with_reports(dataset, None, dir, force)
}

fn write_dataset_with_reports(
    dataset: &CuratedDataset,
    ingest: Option<&IngestReport>,
    dir: &Path,
    force: bool,
) -> Result<Vec<PathBuf>, ReportError> {
    let metadata_path = dir.join("metadata.json");
    if metadata_path.is_file() && !force {
        let existing: Result<DatasetMetadata, _> =
            serde_json::from_str(&fs::read_to_string(&metadata_path)?);
        if let Ok(existing) = existing {
            if existing.config_digest != dataset.config_digest {
                return Err(ReportError::DigestMismatch {
                    dir: dir.to_path_buf(),
                });
            }
        }
    }
    fs::create_dir_all(dir)?;

    let mut written = Vec::new();
    for id in SplitId::ALL {
        let path = dir.join(id.file_name());
        let mut file = std::io::BufWriter::new(fs::File::create(&path)?);
        for sample in dataset.split(id) {
            let line = serde_json::to_string(&SampleLine::from_sample(sample, dataset.task))
                .expect("sample serialization cannot fail");
            file.write_all(line.as_bytes())?;
            file.write_all(b"\n")?;
        }
        file.flush()?;
        written.push(path);
    }

    let metadata = DatasetMetadata {
        name: dataset.name.clone(),
        task: dataset.task,
        domain_kind: dataset.domain_kind,
        threshold: dataset.threshold,
        seed: dataset.seed,
        config_digest: dataset.config_digest.clone(),
        tool_version: TOOL_VERSION.to_string(),
        counts: SplitCounts::of(dataset),
        warnings: dataset.warnings.clone(),
        ingest: ingest.cloned(),
    };
    fs::write(
        &metadata_path,
        serde_json::to_string_pretty(&metadata).expect("metadata serialization cannot fail"),
    )?;
    written.push(metadata_path);
    Ok(written)
}

/// Persist a full run: dataset files, `stats.json`, and `filter_report.json`.
pub fn write_run(run: &CurationRun, dir: &Path, force: bool) -> Result<Vec<PathBuf>, ReportError> {
    let mut written =
        write_dataset_with_reports(&run.dataset, Some(&run.ingest_report), dir, force)?;
    let stats = compute_stats(&run.dataset);
    let stats_path = dir.join("stats.json");
    fs::write(&stats_path, render_stats(&stats, StatsFormat::Json))?;
    written.push(stats_path);
    let report_path = dir.join("filter_report.json");
    fs::write(
        &report_path,
        serde_json::to_string_pretty(&run.filter_report)
            .expect("report serialization cannot fail"),
    )?;
    written.push(report_path);
    Ok(written)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SplitStats {
    pub domain_count: u64,
    pub sample_count: u64,
    pub positive_count: u64,
    pub negative_count: u64,
    pub positive_ratio: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SplitStatsSet {
    pub train: SplitStats,
    pub iid_val: SplitStats,
    pub iid_test: SplitStats,
    pub ood_val: SplitStats,
    pub ood_test: SplitStats,
}

impl SplitStatsSet {
    pub fn get(&self, id: SplitId) -> &SplitStats {
        match id {
            SplitId::Train => &self.train,
            SplitId::IidVal => &self.iid_val,
            SplitId::IidTest => &self.iid_test,
            SplitId::OodVal => &self.ood_val,
            SplitId::OodTest => &self.ood_test,
        }
    }

    fn get_mut(&mut self, id: SplitId) -> &mut SplitStats {
        match id {
            SplitId::Train => &mut self.train,
            SplitId::IidVal => &mut self.iid_val,
            SplitId::IidTest => &mut self.iid_test,
            SplitId::OodVal => &mut self.ood_val,
            SplitId::OodTest => &mut self.ood_test,
        }
    }
}

/// Dataset statistics in the shape of the published dataset tables: domain
/// and sample counts per split, positive/negative totals, and the overall
/// threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub subset: String,
    pub threshold: f64,
    pub total_domains: u64,
    pub total_samples: u64,
    pub splits: SplitStatsSet,
}

pub fn compute_stats(dataset: &CuratedDataset) -> StatsReport {
    let mut splits = SplitStatsSet::default();
    let mut all_domains: BTreeSet<&str> = BTreeSet::new();
    for id in SplitId::ALL {
        let samples = dataset.split(id);
        let domains: BTreeSet<&str> = samples.iter().map(|s| s.domain_key.as_str()).collect();
        all_domains.extend(domains.iter().copied());
        let positives = samples.iter().filter(|s| s.label() == 1).count() as u64;
        let total = samples.len() as u64;
        *splits.get_mut(id) = SplitStats {
            domain_count: domains.len() as u64,
            sample_count: total,
            positive_count: positives,
            negative_count: total - positives,
            positive_ratio: if total == 0 {
                0.0
            } else {
                positives as f64 / total as f64
            },
        };
    }
    StatsReport {
        subset: dataset.name.clone(),
        threshold: dataset.threshold,
        total_domains: all_domains.len() as u64,
        total_samples: dataset.total_samples() as u64,
        splits,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StatsFormat {
    Json,
    TableText,
    Csv,
}

impl StatsFormat {
    pub fn parse(s: &str) -> Option<StatsFormat> {
        match s {
            "json" => Some(StatsFormat::Json),
            "table" | "table-text" => Some(StatsFormat::TableText),
            "csv" => Some(StatsFormat::Csv),
            _ => None,
        }
    }
}

/// Render a stats report. JSON and CSV are lossless; the text table follows
/// the published column layout (data subset, then D# and C# per split).
pub fn render_stats(report: &StatsReport, format: StatsFormat) -> String {
    match format {
        StatsFormat::Json => {
            let mut s = serde_json::to_string_pretty(report).expect("stats serialize");
            s.push('\n');
            s
        }
        StatsFormat::Csv => {
            let mut out = String::from(
                "subset,threshold,total_domains,total_samples,split,domain_count,sample_count,positive_count,negative_count,positive_ratio\n",
            );
            for id in SplitId::ALL {
                let s = report.splits.get(id);
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{},{}\n",
                    report.subset,
                    report.threshold,
                    report.total_domains,
                    report.total_samples,
                    id.as_str(),
                    s.domain_count,
                    s.sample_count,
                    s.positive_count,
                    s.negative_count,
                    s.positive_ratio,
                ));
            }
            out
        }
        StatsFormat::TableText => {
            let pos: u64 = SplitId::ALL
                .iter()
                .map(|&id| report.splits.get(id).positive_count)
                .sum();
            let neg: u64 = SplitId::ALL
                .iter()
                .map(|&id| report.splits.get(id).negative_count)
                .sum();
            let mut header1 = format!("{:<40} {:>9} {:>9}", "Data subset", "Pos#", "Neg#");
            let mut header2 = format!("{:<40} {:>9} {:>9}", "", "", "");
            let mut row = format!("{:<40} {:>9} {:>9}", report.subset, pos, neg);
            for id in SplitId::ALL {
                let s = report.splits.get(id);
                header1.push_str(&format!(" {:>17}", split_title(id)));
                header2.push_str(&format!(" {:>8} {:>8}", "D#", "C#"));
                row.push_str(&format!(" {:>8} {:>8}", s.domain_count, s.sample_count));
            }
            format!(
                "{header1}\n{header2}\n{row}\nthreshold = {}, domains = {}, samples = {}\n",
                report.threshold, report.total_domains, report.total_samples
            )
        }
    }
}

fn split_title(id: SplitId) -> &'static str {
    match id {
        SplitId::Train => "Train",
        SplitId::IidVal => "ID Val",
        SplitId::IidTest => "ID Test",
        SplitId::OodVal => "OOD Val",
        SplitId::OodTest => "OOD Test",
    }
}

pub fn parse_stats_json(text: &str) -> Result<StatsReport, serde_json::Error> {
    serde_json::from_str(text)
}

/// First invariant violation found in an on-disk dataset, if any.
#[derive(Debug, Error)]
pub enum ValidateError {
    #[error("missing or unreadable {0}")]
    MissingFile(PathBuf),
    #[error("invariant violation: {0}")]
    Violation(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Re-check all structural invariants of a written dataset directory:
/// domain disjointness, ID-domain containment, label/threshold consistency,
/// and metadata counts.
pub fn validate_dataset_dir(dir: &Path) -> Result<DatasetMetadata, ValidateError> {
    let metadata_path = dir.join("metadata.json");
    if !metadata_path.is_file() {
        return Err(ValidateError::MissingFile(metadata_path));
    }
    let metadata: DatasetMetadata = serde_json::from_str(&fs::read_to_string(&metadata_path)?)
        .map_err(|e| ValidateError::Violation(format!("metadata.json does not parse: {e}")))?;

    let mut domains_of: Vec<(SplitId, BTreeSet<String>)> = Vec::new();
    for id in SplitId::ALL {
        let path = dir.join(id.file_name());
        if !path.is_file() {
            return Err(ValidateError::MissingFile(path));
        }
        let mut domains = BTreeSet::new();
        let mut count = 0u64;
        for (lineno, line) in fs::read_to_string(&path)?.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let sample: SampleLine = serde_json::from_str(line).map_err(|e| {
                ValidateError::Violation(format!(
                    "{}:{} does not parse: {e}",
                    path.display(),
                    lineno + 1
                ))
            })?;
            let expected = u8::from(sample.pvalue >= metadata.threshold);
            if sample.label != expected {
                return Err(ValidateError::Violation(format!(
                    "{}:{} label {} inconsistent with pvalue {} at threshold {}",
                    path.display(),
                    lineno + 1,
                    sample.label,
                    sample.pvalue,
                    metadata.threshold
                )));
            }
            domains.insert(sample.domain_key);
            count += 1;
        }
        if count != metadata.counts.get(id) {
            return Err(ValidateError::Violation(format!(
                "{} holds {count} samples but metadata says {}",
                path.display(),
                metadata.counts.get(id)
            )));
        }
        domains_of.push((id, domains));
    }

    let keys = |id: SplitId| -> &BTreeSet<String> {
        &domains_of.iter().find(|(s, _)| *s == id).unwrap().1
    };
    let mut train_side: BTreeSet<String> = BTreeSet::new();
    for id in [SplitId::Train, SplitId::IidVal, SplitId::IidTest] {
        train_side.extend(keys(id).iter().cloned());
    }
    for (a, b, what) in [
        (train_side.clone(), keys(SplitId::OodVal).clone(), "train-side vs ood_val"),
        (train_side, keys(SplitId::OodTest).clone(), "train-side vs ood_test"),
        (
            keys(SplitId::OodVal).clone(),
            keys(SplitId::OodTest).clone(),
            "ood_val vs ood_test",
        ),
    ] {
        if !a.is_disjoint(&b) {
            let leaked = a.intersection(&b).next().unwrap().clone();
            return Err(ValidateError::Violation(format!(
                "domain keys overlap ({what}): e.g. '{leaked}'"
            )));
        }
    }
    for id in [SplitId::IidVal, SplitId::IidTest] {
        if !keys(id).is_subset(keys(SplitId::Train)) {
            return Err(ValidateError::Violation(format!(
                "{} contains domains absent from the train split",
                id.as_str()
            )));
        }
    }
    Ok(metadata)
}
