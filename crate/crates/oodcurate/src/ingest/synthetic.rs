//! Deterministic synthetic flat-dump generator: a desk-scale stand-in for a
//! full ChEMBL download that exercises every filter branch.
//!
//! Generation is a pure function of `(spec, seed)`: two runs with the same
//! inputs produce byte-identical files. Emitted records span all six value
//! relations (plus occasional unknown symbols), both convertible units and a
//! few foreign ones, confidence scores 0–9, the common target types, and a
//! small protein-classification taxonomy.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use super::flat::write_records;
use super::{IngestError, RawActivityRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub n_assays: u32,
    /// Inclusive range of record counts per assay.
    pub molecules_per_assay: (u32, u32),
    pub measurement_types: Vec<String>,
    /// Fraction of rows with no standard_value.
    #[serde(default)]
    pub missing_value_rate: f64,
    /// Fraction of rows with no SMILES at all.
    #[serde(default)]
    pub missing_smiles_rate: f64,
    /// Fraction of rows with an unparseable or valence-illegal SMILES.
    #[serde(default)]
    pub illegal_smiles_rate: f64,
    /// Fraction of rows in units outside {nM, uM}.
    #[serde(default)]
    pub foreign_unit_rate: f64,
    /// Fraction of assays with no target annotation at all.
    #[serde(default)]
    pub missing_target_rate: f64,
    /// Probability that a row reuses a molecule already emitted elsewhere,
    /// creating multiple measurements.
    #[serde(default)]
    pub shared_molecule_rate: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n_assays: 40,
            molecules_per_assay: (10, 60),
            measurement_types: vec!["IC50".to_string()],
            missing_value_rate: 0.04,
            missing_smiles_rate: 0.03,
            illegal_smiles_rate: 0.05,
            foreign_unit_rate: 0.06,
            missing_target_rate: 0.10,
            shared_molecule_rate: 0.25,
        }
    }
}

impl SyntheticSpec {
    fn validate(&self) -> Result<(), IngestError> {
        if self.n_assays == 0 {
            return Err(IngestError::InvalidSpec("n_assays must be positive".into()));
        }
        let (lo, hi) = self.molecules_per_assay;
        if lo == 0 || lo > hi {
            return Err(IngestError::InvalidSpec(format!(
                "molecules_per_assay range [{lo},{hi}] must be positive and ordered"
            )));
        }
        if self.measurement_types.is_empty() {
            return Err(IngestError::InvalidSpec(
                "measurement_types must be non-empty".into(),
            ));
        }
        for (name, rate) in [
            ("missing_value_rate", self.missing_value_rate),
            ("missing_smiles_rate", self.missing_smiles_rate),
            ("illegal_smiles_rate", self.illegal_smiles_rate),
            ("foreign_unit_rate", self.foreign_unit_rate),
            ("missing_target_rate", self.missing_target_rate),
            ("shared_molecule_rate", self.shared_molecule_rate),
        ] {
            if !(0.0..=1.0).contains(&rate) {
                return Err(IngestError::InvalidSpec(format!(
                    "{name} must lie in [0, 1], got {rate}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthManifest {
    pub rows: u64,
    pub assays: u32,
    pub distinct_molecules: u64,
}

const TARGET_TYPES: &[(&str, u32)] = &[
    ("SINGLE PROTEIN", 55),
    ("PROTEIN COMPLEX", 15),
    ("PROTEIN FAMILY", 10),
    ("ORGANISM", 10),
    ("CELL-LINE", 10),
];

const CLASS_PATHS: &[&[&str]] = &[
    &["Enzyme", "Kinase", "CMGC"],
    &["Enzyme", "Kinase", "TK"],
    &["Enzyme", "Protease", "Serine"],
    &["Membrane receptor", "GPCR", "Family A"],
    &["Ion channel", "Voltage-gated"],
    &["Transporter", "ABC"],
    &["Transcription factor"],
];

const RELATIONS: &[(&str, u32)] = &[
    ("=", 58),
    ("~", 6),
    (">", 9),
    ("<", 9),
    (">=", 6),
    ("<=", 6),
    (">>", 2), // unknown symbols exercise the rejection path
];

const FOREIGN_UNITS: &[&str] = &["%", "ug.mL-1", "mg"];

const ILLEGAL_SMILES: &[&str] = &[
    "C1CC",
    "CC(C",
    "CC)C",
    "CC(C)(C)(C)C",
    "N(C)(C)(C)C",
    "O(O)(O)O",
    "CCX",
    "C..C",
    "C1CC1C2CC",
    "c1ccc2ccccc2c1", // aromatic fusion fails the 1.5-ceil valence rule
    "",
];

/// Ring templates: segments joined with optional `(substituent)` slots.
const RING_TEMPLATES: &[&[&str]] = &[
    &["c1cc", "c", "cc1"],
    &["c1ccc", "cc1"],
    &["c1cc", "ncc1"],
    &["c1cnc", "cn1"],
    &["C1CCC", "CC1"],
    &["C1CCN", "CC1"],
    &["C1CC", "OC1"],
    &["c1ccc(-c2ccc", "cc2)cc1"],
    &["C1=CC2=CC=CC=C2C=C1"],
    &["O=C1CCC", "CC1"],
    &["C1=CC=CO1"],
    &["C1=CC=CN1"],
];

const SUBSTITUENTS: &[&str] = &[
    "C", "CC", "CCC", "CCO", "CO", "CN", "OC", "N", "O", "F", "Cl", "Br", "C(=O)O", "C(=O)N",
    "C#N", "N(C)C", "CC(C)C", "OCC", "C(F)(F)F",
];

const EXOTIC_MOLECULES: &[&str] = &["[NH3+]CC(=O)[O-]", "CS(=O)(=O)N", "C[Se]C", "[13CH4]", "O[2H]"];

const CHAIN_ATOMS: &[(&str, u32)] = &[("C", 60), ("N", 20), ("O", 20)];

const AMINO_ACIDS: &[u8] = b"ACDEFGHIKLMNPQRSTVWY";

fn weighted<'a, T: Copy>(rng: &mut ChaCha12Rng, table: &'a [(T, u32)]) -> T {
    let total: u32 = table.iter().map(|(_, w)| w).sum();
    let mut roll = rng.random_range(0..total);
    for &(item, weight) in table {
        if roll < weight {
            return item;
        }
        roll -= weight;
    }
    table[table.len() - 1].0
}

fn random_chain(rng: &mut ChaCha12Rng) -> String {
    let len = rng.random_range(1..=7);
    let mut out = String::new();
    for i in 0..len {
        let atom = weighted(rng, CHAIN_ATOMS);
        out.push_str(atom);
        // occasional methyl branch; never on O (it would exceed two bonds)
        if atom != "O" && i > 0 && i + 1 < len && rng.random_bool(0.2) {
            out.push_str("(C)");
        }
    }
    out
}

fn random_ring_molecule(rng: &mut ChaCha12Rng) -> String {
    let template = RING_TEMPLATES[rng.random_range(0..RING_TEMPLATES.len())];
    let mut out = String::new();
    for (i, segment) in template.iter().enumerate() {
        out.push_str(segment);
        if i + 1 < template.len() && rng.random_bool(0.7) {
            let sub = SUBSTITUENTS[rng.random_range(0..SUBSTITUENTS.len())];
            out.push('(');
            out.push_str(sub);
            out.push(')');
        }
    }
    out
}

fn random_molecule(rng: &mut ChaCha12Rng) -> String {
    if rng.random_bool(0.03) {
        EXOTIC_MOLECULES[rng.random_range(0..EXOTIC_MOLECULES.len())].to_string()
    } else if rng.random_bool(0.35) {
        random_chain(rng)
    } else {
        random_ring_molecule(rng)
    }
}

struct TargetInfo {
    id: String,
    target_type: &'static str,
    class_path: Vec<String>,
    sequence: String,
}

fn build_targets(rng: &mut ChaCha12Rng, count: usize) -> Vec<TargetInfo> {
    (0..count)
        .map(|i| {
            let target_type = weighted(rng, TARGET_TYPES);
            let class_path = CLASS_PATHS[rng.random_range(0..CLASS_PATHS.len())]
                .iter()
                .map(|s| s.to_string())
                .collect();
            let len = rng.random_range(60..=200);
            let sequence: String = (0..len)
                .map(|_| AMINO_ACIDS[rng.random_range(0..AMINO_ACIDS.len())] as char)
                .collect();
            TargetInfo {
                id: format!("T{:04}", i + 1),
                target_type,
                class_path,
                sequence,
            }
        })
        .collect()
}

fn round4(x: f64) -> f64 {
    (x * 10_000.0).round() / 10_000.0
}

/// Generate a flat dump at `out`. Deterministic for fixed `(spec, seed)`.
pub fn generate_synthetic_source(
    spec: &SyntheticSpec,
    seed: u64,
    out: &Path,
) -> Result<SynthManifest, IngestError> {
    spec.validate()?;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);

    let n_targets = (spec.n_assays as usize / 3).max(3);
    let targets = build_targets(&mut rng, n_targets);

    let mut pool: Vec<String> = Vec::new();
    let mut pool_set: BTreeSet<String> = BTreeSet::new();
    let molecule_of = |rng: &mut ChaCha12Rng, pool: &mut Vec<String>, pool_set: &mut BTreeSet<String>| {
        if !pool.is_empty() && rng.random_bool(spec.shared_molecule_rate) {
            pool[rng.random_range(0..pool.len())].clone()
        } else {
            for _ in 0..8 {
                let candidate = random_molecule(rng);
                if pool_set.insert(candidate.clone()) {
                    pool.push(candidate.clone());
                    return candidate;
                }
            }
            pool[rng.random_range(0..pool.len())].clone()
        }
    };

    let mut records = Vec::new();
    let mut distinct: BTreeSet<String> = BTreeSet::new();
    let mut activity_id: i64 = 0;

    for assay_idx in 0..spec.n_assays {
        let assay_id = format!("A{:05}", assay_idx + 1);
        let measurement = spec.measurement_types
            [rng.random_range(0..spec.measurement_types.len())]
        .clone();
        let confidence = if rng.random_bool(0.9) {
            Some(rng.random_range(0..=9))
        } else {
            None
        };
        let target = if rng.random_bool(spec.missing_target_rate) {
            None
        } else {
            Some(&targets[rng.random_range(0..targets.len())])
        };
        let n_rows = rng.random_range(spec.molecules_per_assay.0..=spec.molecules_per_assay.1);

        for _ in 0..n_rows {
            activity_id += 1;
            let smiles = if rng.random_bool(spec.missing_smiles_rate) {
                None
            } else if rng.random_bool(spec.illegal_smiles_rate) {
                Some(ILLEGAL_SMILES[rng.random_range(0..ILLEGAL_SMILES.len())].to_string())
            } else {
                let molecule = molecule_of(&mut rng, &mut pool, &mut pool_set);
                distinct.insert(molecule.clone());
                Some(molecule)
            };
            let standard_value = if rng.random_bool(spec.missing_value_rate) {
                None
            } else if rng.random_bool(0.02) {
                Some(0.0) // non-positive values exercise the pValue guard
            } else {
                let exponent = rng.random_range(-1.0..5.0);
                Some(round4(10f64.powf(exponent)))
            };
            let standard_units = if rng.random_bool(spec.foreign_unit_rate) {
                Some(FOREIGN_UNITS[rng.random_range(0..FOREIGN_UNITS.len())].to_string())
            } else if rng.random_bool(0.7) {
                Some("nM".to_string())
            } else {
                Some("uM".to_string())
            };
            let standard_relation = if rng.random_bool(0.02) {
                None
            } else {
                Some(weighted(&mut rng, RELATIONS).to_string())
            };
            records.push(RawActivityRecord {
                activity_id,
                assay_id: assay_id.clone(),
                smiles,
                standard_type: measurement.clone(),
                standard_value,
                standard_units,
                standard_relation,
                confidence_score: confidence,
                target_type: target.map(|t| t.target_type.to_string()),
                target_id: target.map(|t| t.id.clone()),
                protein_sequence: target.map(|t| t.sequence.clone()),
                protein_class_path: target.map(|t| t.class_path.clone()),
            });
        }
    }

    let mut file = std::io::BufWriter::new(std::fs::File::create(out)?);
    write_records(&records, &mut file)?;
    file.flush()?;

    Ok(SynthManifest {
        rows: records.len() as u64,
        assays: spec.n_assays,
        distinct_molecules: distinct.len() as u64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{open_source, read_activity_records, SourceKind};
    use crate::Task;

    fn tiny_spec() -> SyntheticSpec {
        SyntheticSpec {
            n_assays: 6,
            molecules_per_assay: (4, 12),
            ..SyntheticSpec::default()
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.jsonl");
        let b = dir.path().join("b.jsonl");
        let ma = generate_synthetic_source(&tiny_spec(), 7, &a).unwrap();
        let mb = generate_synthetic_source(&tiny_spec(), 7, &b).unwrap();
        assert_eq!(ma, mb);
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    }

    #[test]
    fn different_seeds_differ() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.jsonl");
        let b = dir.path().join("b.jsonl");
        generate_synthetic_source(&tiny_spec(), 7, &a).unwrap();
        generate_synthetic_source(&tiny_spec(), 8, &b).unwrap();
        assert_ne!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("x.jsonl");
        let mut spec = tiny_spec();
        spec.n_assays = 0;
        assert!(matches!(
            generate_synthetic_source(&spec, 1, &out),
            Err(IngestError::InvalidSpec(_))
        ));
        let mut spec = tiny_spec();
        spec.molecules_per_assay = (5, 2);
        assert!(generate_synthetic_source(&spec, 1, &out).is_err());
        let mut spec = tiny_spec();
        spec.illegal_smiles_rate = 1.5;
        assert!(generate_synthetic_source(&spec, 1, &out).is_err());
    }

    #[test]
    fn manifest_row_count_matches_the_read() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.jsonl");
        let manifest = generate_synthetic_source(&tiny_spec(), 11, &path).unwrap();
        let handle = open_source(&path, SourceKind::Synthetic).unwrap();
        let (records, report) = read_activity_records(&handle, Task::Sbap).unwrap();
        assert_eq!(records.len() as u64, manifest.rows);
        assert_eq!(report.rows_skipped, 0);
    }

    #[test]
    fn generated_legal_molecules_parse() {
        // every non-noise molecule the generator can emit must be legal
        let mut rng = ChaCha12Rng::seed_from_u64(1234);
        for _ in 0..2000 {
            let smiles = random_molecule(&mut rng);
            crate::chem::parse_smiles(&smiles)
                .unwrap_or_else(|e| panic!("generator emitted illegal SMILES {smiles:?}: {e}"));
        }
        for smiles in ILLEGAL_SMILES {
            assert!(
                crate::chem::parse_smiles(smiles).is_err(),
                "expected {smiles:?} to be illegal"
            );
        }
    }

    #[test]
    fn corpus_spans_filter_branches() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.jsonl");
        let spec = SyntheticSpec {
            n_assays: 40,
            molecules_per_assay: (10, 40),
            ..SyntheticSpec::default()
        };
        generate_synthetic_source(&spec, 3, &path).unwrap();
        let handle = open_source(&path, SourceKind::Synthetic).unwrap();
        let (records, _) = read_activity_records(&handle, Task::Sbap).unwrap();
        let relations: BTreeSet<_> = records
            .iter()
            .filter_map(|r| r.standard_relation.clone())
            .collect();
        for symbol in ["=", "~", ">", "<", ">=", "<="] {
            assert!(relations.contains(symbol), "missing relation {symbol}");
        }
        let units: BTreeSet<_> = records
            .iter()
            .filter_map(|r| r.standard_units.clone())
            .collect();
        assert!(units.contains("nM") && units.contains("uM"));
        assert!(units.iter().any(|u| u != "nM" && u != "uM"));
        let confidences: BTreeSet<_> =
            records.iter().filter_map(|r| r.confidence_score).collect();
        assert!(confidences.len() >= 9, "confidence spread too narrow");
        let types: BTreeSet<_> = records.iter().filter_map(|r| r.target_type.clone()).collect();
        assert!(types.contains("SINGLE PROTEIN"));
        assert!(types.len() >= 3);
        assert!(records.iter().any(|r| r.smiles.is_none()));
        assert!(records.iter().any(|r| r.standard_value.is_none()));
    }
}
