//! Curation engine for out-of-distribution bioactivity benchmark datasets.
//!
//! The pipeline reads raw activity records (ChEMBL-style relational exports,
//! JSON Lines flat dumps, or deterministic synthetic sources), screens them
//! through configurable noise filters, resolves censored and repeated
//! measurements, assigns adaptive binary activity labels, annotates every
//! sample with a domain key, and emits five disjoint splits
//! (train / ID-val / ID-test / OOD-val / OOD-test) plus statistics reports.
//!
//! Modules follow the stages of the pipeline:
//!
//! - [`chem`] — SMILES parsing, valence validation, canonical graph keys,
//!   Bemis–Murcko scaffolds.
//! - [`ingest`] — source handles, record readers, synthetic source generator.
//! - [`curation`] — noise filters, uncertainty offsets, pValue computation,
//!   measurement merging, adaptive threshold, labels.
//! - [`split`] — domain annotation, descriptor sorting, OOD/ID splits, and
//!   the end-to-end [`split::curate`] driver.
//! - [`config`] — curation recipes, built-in presets, config digests.
//! - [`report`] — dataset persistence, statistics, on-disk validation.
//! - [`cli`] — the `oodcurate` command-line front end.

pub mod chem;
pub mod cli;
pub mod config;
pub mod curation;
pub mod ingest;
pub mod report;
pub mod split;

use serde::{Deserialize, Serialize};

/// Prediction task the curated dataset targets.
///
/// `Lbap` (ligand-based) keys samples by molecule alone; `Sbap`
/// (structure-based) keys by (molecule, protein target) pairs and requires
/// target fields on every surviving record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Lbap,
    Sbap,
}

impl Task {
    pub fn as_str(&self) -> &'static str {
        match self {
            Task::Lbap => "lbap",
            Task::Sbap => "sbap",
        }
    }

    pub fn parse(s: &str) -> Option<Task> {
        match s {
            "lbap" => Some(Task::Lbap),
            "sbap" => Some(Task::Sbap),
            _ => None,
        }
    }
}

impl std::fmt::Display for Task {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Filter stringency tier. Core is the strictest (least noisy) tier;
/// general admits the most data and the most noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseLevel {
    Core,
    Refined,
    General,
}

impl NoiseLevel {
    pub const ALL: [NoiseLevel; 3] = [NoiseLevel::Core, NoiseLevel::Refined, NoiseLevel::General];

    pub fn as_str(&self) -> &'static str {
        match self {
            NoiseLevel::Core => "core",
            NoiseLevel::Refined => "refined",
            NoiseLevel::General => "general",
        }
    }

    pub fn parse(s: &str) -> Option<NoiseLevel> {
        match s {
            "core" => Some(NoiseLevel::Core),
            "refined" => Some(NoiseLevel::Refined),
            "general" => Some(NoiseLevel::General),
            _ => None,
        }
    }
}

impl std::fmt::Display for NoiseLevel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}
