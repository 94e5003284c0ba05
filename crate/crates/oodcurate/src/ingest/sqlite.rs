//! ChEMBL-style relational export adapter (SQLite).
//!
//! Expected schema (the ChEMBL 29 core shape; see the README schema
//! reference):
//!
//! - `activities(activity_id, assay_id, molregno, standard_type,
//!   standard_relation, standard_value, standard_units)`
//! - `assays(assay_id, chembl_id, confidence_score, tid)`
//! - `compound_structures(molregno, canonical_smiles)`
//! - `target_dictionary(tid, chembl_id, target_type)`
//! - `target_components(tid, component_id)`
//! - `component_sequences(component_id, sequence)`
//! - `component_class(component_id, protein_class_id)`
//! - `protein_classification(protein_class_id, parent_id, pref_name)`
//!
//! The assay/molecule/target join happens at read time in a single streamed
//! query ordered by `activity_id`; only the small protein-classification
//! tables are materialized in memory. Records expose the standardized value
//! columns (`standard_*`), not the published variants.

use std::collections::HashMap;
use std::path::Path;

use rusqlite::{Connection, OpenFlags};

use super::{row_is_sane, IngestError, IngestReport, RawActivityRecord};
use crate::Task;

const REQUIRED: &[(&str, &[&str])] = &[
    (
        "activities",
        &[
            "activity_id",
            "assay_id",
            "molregno",
            "standard_type",
            "standard_relation",
            "standard_value",
            "standard_units",
        ],
    ),
    ("assays", &["assay_id", "chembl_id", "confidence_score", "tid"]),
    ("compound_structures", &["molregno", "canonical_smiles"]),
    ("target_dictionary", &["tid", "chembl_id", "target_type"]),
    ("target_components", &["tid", "component_id"]),
    ("component_sequences", &["component_id", "sequence"]),
    ("component_class", &["component_id", "protein_class_id"]),
    (
        "protein_classification",
        &["protein_class_id", "parent_id", "pref_name"],
    ),
];

fn open_read_only(path: &Path) -> Result<Connection, IngestError> {
    Ok(Connection::open_with_flags(
        path,
        OpenFlags::SQLITE_OPEN_READ_ONLY | OpenFlags::SQLITE_OPEN_NO_MUTEX,
    )?)
}

pub(super) fn check_schema(path: &Path) -> Result<(), IngestError> {
    let conn = open_read_only(path)?;
    for (table, columns) in REQUIRED {
        let exists: bool = conn
            .query_row(
                "SELECT COUNT(*) FROM sqlite_master WHERE type = 'table' AND name = ?1",
                [table],
                |row| row.get::<_, i64>(0),
            )
            .map(|n| n > 0)?;
        if !exists {
            return Err(IngestError::MalformedSchema {
                path: path.to_path_buf(),
                what: format!("table {table}"),
            });
        }
        let mut stmt = conn.prepare(&format!("PRAGMA table_info({table})"))?;
        let present: Vec<String> = stmt
            .query_map([], |row| row.get::<_, String>(1))?
            .collect::<Result<_, _>>()?;
        for column in *columns {
            if !present.iter().any(|c| c == column) {
                return Err(IngestError::MalformedSchema {
                    path: path.to_path_buf(),
                    what: format!("column {table}.{column}"),
                });
            }
        }
    }
    Ok(())
}

/// tid -> (protein sequence, class path root-first), resolved through the
/// lowest-numbered component of each target.
fn load_protein_maps(
    conn: &Connection,
) -> Result<HashMap<i64, (Option<String>, Option<Vec<String>>)>, IngestError> {
    let mut comp_of_tid: HashMap<i64, i64> = HashMap::new();
    let mut stmt = conn.prepare("SELECT tid, MIN(component_id) FROM target_components GROUP BY tid")?;
    for row in stmt.query_map([], |r| Ok((r.get::<_, i64>(0)?, r.get::<_, i64>(1)?)))? {
        let (tid, comp) = row?;
        comp_of_tid.insert(tid, comp);
    }

    let mut sequences: HashMap<i64, String> = HashMap::new();
    let mut stmt = conn.prepare("SELECT component_id, sequence FROM component_sequences")?;
    for row in stmt.query_map([], |r| {
        Ok((r.get::<_, i64>(0)?, r.get::<_, Option<String>>(1)?))
    })? {
        let (comp, seq) = row?;
        if let Some(seq) = seq {
            sequences.insert(comp, seq);
        }
    }

    let mut class_of_comp: HashMap<i64, i64> = HashMap::new();
    let mut stmt =
        conn.prepare("SELECT component_id, MIN(protein_class_id) FROM component_class GROUP BY component_id")?;
    for row in stmt.query_map([], |r| Ok((r.get::<_, i64>(0)?, r.get::<_, i64>(1)?)))? {
        let (comp, class) = row?;
        class_of_comp.insert(comp, class);
    }

    let mut classes: HashMap<i64, (Option<i64>, String)> = HashMap::new();
    let mut stmt =
        conn.prepare("SELECT protein_class_id, parent_id, pref_name FROM protein_classification")?;
    for row in stmt.query_map([], |r| {
        Ok((
            r.get::<_, i64>(0)?,
            r.get::<_, Option<i64>>(1)?,
            r.get::<_, String>(2)?,
        ))
    })? {
        let (id, parent, name) = row?;
        classes.insert(id, (parent, name));
    }

    let mut result = HashMap::new();
    for (&tid, &comp) in &comp_of_tid {
        let sequence = sequences.get(&comp).cloned();
        let class_path = class_of_comp.get(&comp).map(|&leaf| {
            let mut path = Vec::new();
            let mut cursor = Some(leaf);
            let mut hops = 0;
            while let Some(id) = cursor {
                let Some((parent, name)) = classes.get(&id) else {
                    break;
                };
                path.push(name.clone());
                cursor = *parent;
                hops += 1;
                if hops > 64 {
                    break; // defensive cap on malformed parent cycles
                }
            }
            path.reverse(); // root first
            path
        });
        result.insert(tid, (sequence, class_path));
    }
    Ok(result)
}

pub(super) fn read(
    path: &Path,
    task: Task,
) -> Result<(Vec<RawActivityRecord>, IngestReport), IngestError> {
    let conn = open_read_only(path)?;
    let protein_maps = match task {
        Task::Sbap => Some(load_protein_maps(&conn)?),
        Task::Lbap => None,
    };

    let mut stmt = conn.prepare(
        "SELECT a.activity_id, ass.chembl_id, cs.canonical_smiles, a.standard_type,
                a.standard_value, a.standard_units, a.standard_relation,
                ass.confidence_score, td.target_type, td.chembl_id, td.tid
         FROM activities a
         LEFT JOIN assays ass ON a.assay_id = ass.assay_id
         LEFT JOIN compound_structures cs ON a.molregno = cs.molregno
         LEFT JOIN target_dictionary td ON ass.tid = td.tid
         ORDER BY a.activity_id",
    )?;

    let mut records = Vec::new();
    let mut report = IngestReport::default();
    let mut rows = stmt.query([])?;
    while let Some(row) = rows.next()? {
        let activity_id: i64 = match row.get(0) {
            Ok(id) => id,
            Err(_) => {
                report.skip("decode_error");
                continue;
            }
        };
        let assay_id: Option<String> = row.get(1).unwrap_or(None);
        let Some(assay_id) = assay_id else {
            report.skip("missing_assay");
            continue;
        };
        let standard_type: Option<String> = row.get(3).unwrap_or(None);
        let Some(standard_type) = standard_type else {
            report.skip("null_standard_type");
            continue;
        };
        let standard_value: Option<f64> = match row.get(4) {
            Ok(v) => v,
            Err(_) => {
                // non-numeric value column: skip the row, keep reading
                report.skip("decode_error");
                continue;
            }
        };
        let tid: Option<i64> = row.get(10).unwrap_or(None);
        let (protein_sequence, protein_class_path) = match (&protein_maps, tid) {
            (Some(maps), Some(tid)) => maps.get(&tid).cloned().unwrap_or((None, None)),
            _ => (None, None),
        };
        let record = RawActivityRecord {
            activity_id,
            assay_id,
            smiles: row.get(2).unwrap_or(None),
            standard_type,
            standard_value,
            standard_units: row.get(5).unwrap_or(None),
            standard_relation: row.get(6).unwrap_or(None),
            confidence_score: row.get(7).unwrap_or(None),
            target_type: row.get(8).unwrap_or(None),
            target_id: row.get(9).unwrap_or(None),
            protein_sequence,
            protein_class_path: protein_class_path.filter(|p| !p.is_empty()),
        };
        match row_is_sane(&record) {
            Ok(()) => records.push(record),
            Err(reason) => report.skip(reason),
        }
    }
    Ok((records, report))
}
