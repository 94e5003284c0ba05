//! JSON Lines flat dump reader: one [`RawActivityRecord`] object per line,
//! UTF-8, LF-terminated. Blank lines are ignored.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use super::{row_is_sane, IngestError, IngestReport, RawActivityRecord};

/// Fields every record line must carry.
const REQUIRED_FIELDS: &[&str] = &["activity_id", "assay_id", "standard_type"];

/// Peek at the first record line and verify the mandatory fields exist, so
/// schema mistakes surface at open time instead of as a fully-skipped read.
pub(super) fn check_schema(path: &Path) -> Result<(), IngestError> {
    let reader = BufReader::new(File::open(path)?);
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value = serde_json::from_str(&line).map_err(|_| {
            IngestError::MalformedSchema {
                path: path.to_path_buf(),
                what: "a JSON object on the first record line".to_string(),
            }
        })?;
        let Some(object) = value.as_object() else {
            return Err(IngestError::MalformedSchema {
                path: path.to_path_buf(),
                what: "a JSON object on the first record line".to_string(),
            });
        };
        for field in REQUIRED_FIELDS {
            if !object.contains_key(*field) {
                return Err(IngestError::MalformedSchema {
                    path: path.to_path_buf(),
                    what: format!("column {field}"),
                });
            }
        }
        return Ok(());
    }
    Ok(()) // an empty dump is schematically fine; it just has no rows
}

pub(super) fn read(path: &Path) -> Result<(Vec<RawActivityRecord>, IngestReport), IngestError> {
    let reader = BufReader::new(File::open(path)?);
    let mut records = Vec::new();
    let mut report = IngestReport::default();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<RawActivityRecord>(&line) {
            Ok(record) => match row_is_sane(&record) {
                Ok(()) => records.push(record),
                Err(reason) => report.skip(reason),
            },
            Err(_) => report.skip("decode_error"),
        }
    }
    Ok((records, report))
}

/// Serialize records to the flat-dump format, one compact JSON object per
/// line. Used by the synthetic generator and tests.
pub(crate) fn write_records(
    records: &[RawActivityRecord],
    out: &mut impl std::io::Write,
) -> std::io::Result<()> {
    for record in records {
        let line = serde_json::to_string(record).expect("record serialization cannot fail");
        out.write_all(line.as_bytes())?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
