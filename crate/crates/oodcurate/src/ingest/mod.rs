//! Reading raw bioactivity records from relational exports and flat dumps,
//! plus deterministic synthetic sources for desk-scale testing.
//!
//! Both readers yield records in `activity_id` ascending order. Malformed
//! rows are skipped with per-reason accounting in the [`IngestReport`]
//! rather than aborting the read.

mod flat;
mod sqlite;
mod synthetic;

pub use synthetic::{generate_synthetic_source, SynthManifest, SyntheticSpec};

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Task;

/// One activity row joined with its assay / molecule / target context.
///
/// This is also the line schema of the JSON Lines flat dump: one record per
/// line, field names exactly as below, optional fields omitted when absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawActivityRecord {
    pub activity_id: i64,
    pub assay_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub smiles: Option<String>,
    pub standard_type: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub standard_value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub standard_units: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub standard_relation: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence_score: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_type: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub protein_sequence: Option<String>,
    /// Protein classification hierarchy, root first.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub protein_class_path: Option<Vec<String>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    RelationalExport,
    FlatDump,
    Synthetic,
}

impl SourceKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SourceKind::RelationalExport => "relational_export",
            SourceKind::FlatDump => "flat_dump",
            SourceKind::Synthetic => "synthetic",
        }
    }

    pub fn parse(s: &str) -> Option<SourceKind> {
        match s {
            "relational_export" => Some(SourceKind::RelationalExport),
            "flat_dump" => Some(SourceKind::FlatDump),
            "synthetic" => Some(SourceKind::Synthetic),
            _ => None,
        }
    }
}

/// An opened, validated source. Reads stream from the location on demand;
/// nothing is loaded eagerly at open time.
#[derive(Debug, Clone)]
pub struct SourceHandle {
    kind: SourceKind,
    location: PathBuf,
}

impl SourceHandle {
    pub fn kind(&self) -> SourceKind {
        self.kind
    }

    pub fn location(&self) -> &Path {
        &self.location
    }
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("source file not found: {0}")]
    MissingFile(PathBuf),
    #[error("malformed schema in {path}: missing {what}")]
    MalformedSchema { path: PathBuf, what: String },
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
    #[error("sqlite error: {0}")]
    Sqlite(#[from] rusqlite::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Read accounting: how many rows were yielded, how many skipped, and why.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub rows_read: u64,
    pub rows_skipped: u64,
    pub skip_reasons: BTreeMap<String, u64>,
}

impl IngestReport {
    pub(crate) fn skip(&mut self, reason: &str) {
        self.rows_skipped += 1;
        *self.skip_reasons.entry(reason.to_string()).or_insert(0) += 1;
    }
}

/// Validates the location and, for relational exports, the presence of the
/// required tables and columns. Flat dumps are checked for the mandatory
/// fields on their first record line.
pub fn open_source(location: impl AsRef<Path>, kind: SourceKind) -> Result<SourceHandle, IngestError> {
    let location = location.as_ref().to_path_buf();
    if !location.is_file() {
        return Err(IngestError::MissingFile(location));
    }
    match kind {
        SourceKind::FlatDump | SourceKind::Synthetic => flat::check_schema(&location)?,
        SourceKind::RelationalExport => sqlite::check_schema(&location)?,
    }
    Ok(SourceHandle { kind, location })
}

/// Reads every activity row of the source, in `activity_id` ascending order.
/// Rows that fail to decode are skipped and tallied in the report. For
/// `lbap`, protein fields may be left absent; for `sbap` they are populated
/// when the source has them — absence is recorded here, not rejected
/// (filters decide later).
pub fn read_activity_records(
    source: &SourceHandle,
    task: Task,
) -> Result<(Vec<RawActivityRecord>, IngestReport), IngestError> {
    let (mut records, mut report) = match source.kind {
        SourceKind::FlatDump | SourceKind::Synthetic => flat::read(&source.location)?,
        SourceKind::RelationalExport => sqlite::read(&source.location, task)?,
    };
    // stable contract: ascending activity_id, duplicates dropped (first wins)
    records.sort_by_key(|r| r.activity_id);
    let mut deduped: Vec<RawActivityRecord> = Vec::with_capacity(records.len());
    for record in records {
        if deduped.last().is_some_and(|p| p.activity_id == record.activity_id) {
            report.skip("duplicate_activity_id");
            continue;
        }
        deduped.push(record);
    }
    report.rows_read = deduped.len() as u64;
    Ok((deduped, report))
}

/// Shared row-level sanity checks applied by both readers.
pub(crate) fn row_is_sane(record: &RawActivityRecord) -> Result<(), &'static str> {
    if let Some(path) = &record.protein_class_path {
        if path.is_empty() {
            return Err("empty_protein_class_path");
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_lines(lines: &[&str]) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        for line in lines {
            writeln!(f, "{line}").unwrap();
        }
        f.flush().unwrap();
        f
    }

    #[test]
    fn open_missing_file_fails() {
        let err = open_source("/nonexistent/path.jsonl", SourceKind::FlatDump).unwrap_err();
        assert!(matches!(err, IngestError::MissingFile(_)));
    }

    #[test]
    fn open_flat_dump_names_missing_column() {
        let f = write_lines(&[r#"{"activity_id": 1, "assay_id": "A1"}"#]);
        let err = open_source(f.path(), SourceKind::FlatDump).unwrap_err();
        match err {
            IngestError::MalformedSchema { what, .. } => {
                assert!(what.contains("standard_type"), "{what}");
            }
            other => panic!("expected MalformedSchema, got {other:?}"),
        }
    }

    #[test]
    fn open_valid_flat_dump() {
        let f = write_lines(&[
            r#"{"activity_id": 1, "assay_id": "A1", "standard_type": "IC50"}"#,
        ]);
        let handle = open_source(f.path(), SourceKind::FlatDump).unwrap();
        assert_eq!(handle.kind(), SourceKind::FlatDump);
    }

    #[test]
    fn read_skips_bad_rows_with_accounting() {
        let f = write_lines(&[
            r#"{"activity_id": 2, "assay_id": "A1", "standard_type": "IC50", "standard_value": 5.0}"#,
            r#"{"activity_id": 1, "assay_id": "A1", "standard_type": "IC50", "smiles": ""}"#,
            r#"{"activity_id": 3, "assay_id": "A1", "standard_type": "IC50", "standard_value": "oops"}"#,
            r#"not json"#,
            r#"{"activity_id": 1, "assay_id": "A9", "standard_type": "IC50"}"#,
        ]);
        let handle = open_source(f.path(), SourceKind::FlatDump).unwrap();
        let (records, report) = read_activity_records(&handle, Task::Lbap).unwrap();
        // ascending activity_id, duplicate id dropped (first occurrence wins)
        assert_eq!(
            records.iter().map(|r| r.activity_id).collect::<Vec<_>>(),
            vec![1, 2]
        );
        // empty-string smiles passes through as Some(""); it is not dropped here
        assert_eq!(records[0].smiles.as_deref(), Some(""));
        assert_eq!(report.rows_read, 2);
        assert_eq!(report.rows_skipped, 3);
        assert_eq!(report.skip_reasons.get("decode_error"), Some(&2));
        assert_eq!(report.skip_reasons.get("duplicate_activity_id"), Some(&1));
    }
}
