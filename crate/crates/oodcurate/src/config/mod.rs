//! Curation recipes: strict JSON parsing with documented defaults, the
//! built-in preset matrix (2 tasks × 3 noise levels × 4 measurement types ×
//! task-compatible domains = 96), and stable config digests.
//!
//! The canonical config format is JSON with snake_case keys. Parsing is
//! strict — unknown keys are rejected by name — and fills defaults, so a
//! parsed config is always fully populated and `parse(serialize(cfg))`
//! round-trips exactly.

use std::collections::BTreeSet;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::curation::{NoiseFilterConfig, ThresholdConfig, UncertaintyConfig};
use crate::ingest::SourceKind;
use crate::split::{DomainKind, DomainSpec, SortOrder, SplitConfig};
use crate::{NoiseLevel, Task};

/// The four measurement types with built-in presets, in enumeration order.
pub const MEASUREMENT_TYPES: [&str; 4] = ["IC50", "EC50", "Ki", "Potency"];

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("config invariant violation: {0}")]
    Invariant(String),
    #[error("incompatible combination: {0}")]
    IncompatibleCombination(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Where the raw records come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSpec {
    pub path: PathBuf,
    pub kind: SourceKind,
}

/// Noise filtering, named tier or fully custom.
#[derive(Debug, Clone, PartialEq)]
pub enum NoiseSpec {
    /// A named tier; measurement types default to the built-in four when
    /// not given.
    Preset {
        level: NoiseLevel,
        measurement_types: Option<BTreeSet<String>>,
    },
    Custom(NoiseFilterConfig),
}

impl NoiseSpec {
    /// Materialize the effective filter config.
    pub fn resolve(&self) -> NoiseFilterConfig {
        match self {
            NoiseSpec::Preset {
                level,
                measurement_types,
            } => {
                let types = measurement_types.clone().unwrap_or_else(|| {
                    MEASUREMENT_TYPES.iter().map(|s| s.to_string()).collect()
                });
                crate::curation::noise_preset(*level, types)
            }
            NoiseSpec::Custom(cfg) => cfg.clone(),
        }
    }
}

impl Serialize for NoiseSpec {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            NoiseSpec::Preset {
                level,
                measurement_types: None,
            } => level.serialize(serializer),
            NoiseSpec::Preset {
                level,
                measurement_types: Some(types),
            } => {
                use serde::ser::SerializeMap;
                let mut map = serializer.serialize_map(Some(2))?;
                map.serialize_entry("preset", level)?;
                map.serialize_entry("measurement_types", types)?;
                map.end()
            }
            NoiseSpec::Custom(cfg) => cfg.serialize(serializer),
        }
    }
}

impl<'de> Deserialize<'de> for NoiseSpec {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let value = serde_json::Value::deserialize(deserializer)?;
        match &value {
            serde_json::Value::String(name) => {
                let level = NoiseLevel::parse(name).ok_or_else(|| {
                    D::Error::custom(format!(
                        "unknown noise preset '{name}' (expected core, refined, or general)"
                    ))
                })?;
                Ok(NoiseSpec::Preset {
                    level,
                    measurement_types: None,
                })
            }
            serde_json::Value::Object(object) if object.contains_key("preset") => {
                #[derive(Deserialize)]
                #[serde(deny_unknown_fields)]
                struct PresetForm {
                    preset: NoiseLevel,
                    #[serde(default)]
                    measurement_types: Option<BTreeSet<String>>,
                }
                let form: PresetForm =
                    serde_json::from_value(value).map_err(D::Error::custom)?;
                Ok(NoiseSpec::Preset {
                    level: form.preset,
                    measurement_types: form.measurement_types,
                })
            }
            _ => {
                let cfg: NoiseFilterConfig =
                    serde_json::from_value(value).map_err(D::Error::custom)?;
                Ok(NoiseSpec::Custom(cfg))
            }
        }
    }
}

/// The full pipeline recipe.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurationConfig {
    pub task: Task,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source: Option<SourceSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub save_dir: Option<PathBuf>,
    pub noise: NoiseSpec,
    pub uncertainty: UncertaintyConfig,
    pub threshold: ThresholdConfig,
    pub domain: DomainSpec,
    pub split: SplitConfig,
}

/// Parse-time mirror with optional sections, so defaults are filled
/// explicitly and unknown keys are rejected by name.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    task: Task,
    #[serde(default)]
    name: Option<String>,
    #[serde(default)]
    source: Option<SourceSpec>,
    #[serde(default)]
    save_dir: Option<PathBuf>,
    noise: NoiseSpec,
    #[serde(default)]
    uncertainty: Option<UncertaintyConfig>,
    #[serde(default)]
    threshold: Option<ThresholdConfig>,
    domain: RawDomain,
    #[serde(default)]
    split: Option<SplitConfig>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDomain {
    kind: DomainKind,
    #[serde(default)]
    descriptor: Option<crate::split::DescriptorKind>,
    #[serde(default)]
    sort_order: Option<SortOrder>,
}

impl CurationConfig {
    /// Strict parse: unknown keys are rejected, defaults documented on the
    /// field types are filled in, and every invariant is checked.
    pub fn parse(text: &str) -> Result<CurationConfig, ConfigError> {
        let raw: RawConfig =
            serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        let config = CurationConfig {
            task: raw.task,
            name: raw.name,
            source: raw.source,
            save_dir: raw.save_dir,
            noise: raw.noise,
            uncertainty: raw.uncertainty.unwrap_or_default(),
            threshold: raw.threshold.unwrap_or_default(),
            domain: DomainSpec {
                kind: raw.domain.kind,
                descriptor: raw
                    .domain
                    .descriptor
                    .unwrap_or_else(|| raw.domain.kind.default_descriptor()),
                sort_order: raw.domain.sort_order.unwrap_or(SortOrder::Descending),
            },
            split: raw.split.unwrap_or_default(),
        };
        config.validate()?;
        Ok(config)
    }

    pub fn parse_file(path: &std::path::Path) -> Result<CurationConfig, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        CurationConfig::parse(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invariant = |msg: String| Err(ConfigError::Invariant(msg));
        self.domain
            .validate(self.task)
            .map_err(|e| ConfigError::Invariant(e.to_string()))?;
        self.split
            .validate()
            .map_err(|e| ConfigError::Invariant(e.to_string()))?;
        self.threshold
            .validate()
            .map_err(|e| ConfigError::Invariant(e.to_string()))?;
        let noise = self.resolved_noise();
        noise
            .validate()
            .map_err(|e| ConfigError::Invariant(e.to_string()))?;
        if !noise.require_value || !noise.require_legal_smiles {
            return invariant(
                "the pipeline derives pValues and molecule keys, so require_value and \
                 require_legal_smiles must stay enabled"
                    .to_string(),
            );
        }
        // every admitted inequality must have an offset delta
        for relation in &noise.allowed_relations {
            if !relation.is_exact() && !self.uncertainty.delta_map.contains_key(relation) {
                return invariant(format!(
                    "relation '{}' is admitted by the filters but has no uncertainty delta",
                    relation.symbol()
                ));
            }
        }
        if noise.measurement_types.is_empty() {
            return invariant("measurement_types must be non-empty".to_string());
        }
        Ok(())
    }

    pub fn resolved_noise(&self) -> NoiseFilterConfig {
        self.noise.resolve()
    }

    /// Canonical serialization of the full, defaults-filled config.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serialization cannot fail")
    }

    /// Hex SHA-256 over the canonical serialization of the *recipe*: the
    /// source location, save directory, and display name are deployment
    /// details and do not change the digest.
    pub fn digest(&self) -> String {
        let mut recipe = self.clone();
        recipe.source = None;
        recipe.save_dir = None;
        recipe.name = None;
        let mut hasher = Sha256::new();
        hasher.update(recipe.canonical_json().as_bytes());
        hex::encode(hasher.finalize())
    }

    /// Directory name for outputs: the explicit name, else the save_dir
    /// basename, else a digest-derived fallback.
    pub fn dataset_name(&self) -> String {
        if let Some(name) = &self.name {
            return name.clone();
        }
        if let Some(dir) = &self.save_dir {
            if let Some(base) = dir.file_name().and_then(|s| s.to_str()) {
                return base.to_string();
            }
        }
        format!("custom-{}", &self.digest()[..12])
    }
}

/// Identifier grammar for the built-in presets, e.g. `lbap-core-ic50-assay`
/// or `sbap-general-ki-protein-family`.
pub fn preset_identifier(
    task: Task,
    level: NoiseLevel,
    measurement: &str,
    domain: DomainKind,
) -> String {
    format!(
        "{}-{}-{}-{}",
        task.as_str(),
        level.as_str(),
        measurement.to_lowercase(),
        domain.as_str().replace('_', "-")
    )
}

/// One entry of the built-in preset matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PresetId {
    pub task: Task,
    pub level: NoiseLevel,
    pub measurement: &'static str,
    pub domain: DomainKind,
}

impl PresetId {
    pub fn identifier(&self) -> String {
        preset_identifier(self.task, self.level, self.measurement, self.domain)
    }

    /// The `task,noise,measurement,domain` flag form accepted by the CLI.
    pub fn flag_form(&self) -> String {
        format!(
            "{},{},{},{}",
            self.task.as_str(),
            self.level.as_str(),
            self.measurement,
            self.domain.as_str()
        )
    }
}

/// All 96 built-in presets in stable enumeration order: task, noise level,
/// measurement type, domain kind.
pub fn all_presets() -> Vec<PresetId> {
    let mut presets = Vec::new();
    for task in [Task::Lbap, Task::Sbap] {
        for level in NoiseLevel::ALL {
            for measurement in MEASUREMENT_TYPES {
                for domain in DomainKind::ALL {
                    if domain.compatible_with(task) {
                        presets.push(PresetId {
                            task,
                            level,
                            measurement,
                            domain,
                        });
                    }
                }
            }
        }
    }
    presets
}

fn canonical_measurement(name: &str) -> Option<&'static str> {
    MEASUREMENT_TYPES
        .iter()
        .find(|m| m.eq_ignore_ascii_case(name))
        .copied()
}

/// Materialize a built-in preset: the Table-driven noise tier for the given
/// measurement type, default uncertainty and threshold rules, and the
/// conventional domain spec and split fractions.
pub fn resolve_preset(
    task: Task,
    level: NoiseLevel,
    measurement: &str,
    domain: DomainKind,
) -> Result<CurationConfig, ConfigError> {
    let Some(measurement) = canonical_measurement(measurement) else {
        return Err(ConfigError::IncompatibleCombination(format!(
            "unknown measurement type '{measurement}' (expected one of {})",
            MEASUREMENT_TYPES.join(", ")
        )));
    };
    if !domain.compatible_with(task) {
        return Err(ConfigError::IncompatibleCombination(format!(
            "domain kind '{}' requires task sbap",
            domain.as_str()
        )));
    }
    let types: BTreeSet<String> = [measurement.to_string()].into_iter().collect();
    Ok(CurationConfig {
        task,
        name: Some(preset_identifier(task, level, measurement, domain)),
        source: None,
        save_dir: None,
        noise: NoiseSpec::Custom(crate::curation::noise_preset(level, types)),
        uncertainty: UncertaintyConfig::default(),
        threshold: ThresholdConfig::default(),
        domain: DomainSpec::with_defaults(domain),
        split: SplitConfig::default(),
    })
}

/// Parse the `task,noise,measurement,domain` flag form.
pub fn resolve_preset_flag(flag: &str) -> Result<CurationConfig, ConfigError> {
    let parts: Vec<&str> = flag.split(',').map(str::trim).collect();
    if parts.len() != 4 {
        return Err(ConfigError::Parse(format!(
            "expected task,noise,measurement,domain but got '{flag}'"
        )));
    }
    let task = Task::parse(parts[0])
        .ok_or_else(|| ConfigError::Parse(format!("unknown task '{}'", parts[0])))?;
    let level = NoiseLevel::parse(parts[1])
        .ok_or_else(|| ConfigError::Parse(format!("unknown noise level '{}'", parts[1])))?;
    let domain = DomainKind::parse(parts[3])
        .ok_or_else(|| ConfigError::Parse(format!("unknown domain kind '{}'", parts[3])))?;
    resolve_preset(task, level, parts[2], domain)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curation::Relation;

    /// The Listing-style recipe, transcribed to the canonical JSON schema.
    const EXAMPLE: &str = r#"{
        "task": "lbap",
        "source": {"path": "chembl_29.db", "kind": "relational_export"},
        "save_dir": "data/lbap_core_ec50_assay",
        "noise": {"preset": "core", "measurement_types": ["EC50"]},
        "uncertainty": {
            "average_multiple": true,
            "delta_map": {"<": -1, "<=": -1, ">": 1, ">=": 1}
        },
        "threshold": {"lower": 4.0, "upper": 6.0, "fix": 5.0},
        "domain": {"kind": "assay"},
        "split": {
            "train_fraction_ood": 0.6,
            "val_fraction_ood": 0.2,
            "iid_train_fraction": 0.6,
            "iid_val_fraction": 0.2,
            "seed": 0
        }
    }"#;

    #[test]
    fn parses_the_example_recipe() {
        let cfg = CurationConfig::parse(EXAMPLE).unwrap();
        assert_eq!(cfg.task, Task::Lbap);
        assert_eq!(cfg.split.train_fraction_ood, 0.6);
        let noise = cfg.resolved_noise();
        assert_eq!(noise.molecules_per_assay, Some((50, 3000)));
        assert!(noise.measurement_types.contains("EC50"));
        assert_eq!(
            cfg.domain.descriptor,
            crate::split::DescriptorKind::DomainCapacity
        );
        assert_eq!(cfg.dataset_name(), "lbap_core_ec50_assay");
    }

    #[test]
    fn unknown_keys_are_named() {
        let bad = r#"{"task": "lbap", "noise": "core", "domain": {"kind": "assay"}, "fracton": 0.5}"#;
        let err = CurationConfig::parse(bad).unwrap_err();
        assert!(err.to_string().contains("fracton"), "{err}");
    }

    #[test]
    fn missing_required_keys_are_named() {
        let bad = r#"{"task": "lbap", "noise": "core"}"#;
        let err = CurationConfig::parse(bad).unwrap_err();
        assert!(err.to_string().contains("domain"), "{err}");
    }

    #[test]
    fn threshold_invariant_is_enforced() {
        let bad = r#"{
            "task": "lbap", "noise": "core", "domain": {"kind": "assay"},
            "threshold": {"lower": 6.0, "upper": 4.0, "fix": 5.0}
        }"#;
        let err = CurationConfig::parse(bad).unwrap_err();
        assert!(matches!(err, ConfigError::Invariant(_)), "{err}");
    }

    #[test]
    fn admitted_relations_need_deltas() {
        let bad = r#"{
            "task": "lbap",
            "noise": "general",
            "domain": {"kind": "assay"},
            "uncertainty": {"average_multiple": true, "delta_map": {"<": -1}}
        }"#;
        let err = CurationConfig::parse(bad).unwrap_err();
        assert!(err.to_string().contains("delta"), "{err}");
    }

    #[test]
    fn preset_examples_match_the_filter_table() {
        let cfg = resolve_preset(Task::Lbap, NoiseLevel::Core, "IC50", DomainKind::Assay).unwrap();
        let noise = cfg.resolved_noise();
        assert_eq!(noise.molecules_per_assay, Some((50, 3000)));
        assert_eq!(noise.min_confidence, Some(9));
        assert_eq!(
            noise.allowed_target_types.as_ref().unwrap().iter().collect::<Vec<_>>(),
            vec!["SINGLE PROTEIN"]
        );
        assert_eq!(noise.allowed_relations.len(), 2);
        assert!(noise.allowed_relations.contains(&Relation::Eq));
        assert!(noise.allowed_relations.contains(&Relation::Approx));
        assert_eq!(noise.allowed_units.len(), 2);

        let cfg = resolve_preset(Task::Sbap, NoiseLevel::General, "Ki", DomainKind::Protein).unwrap();
        let noise = cfg.resolved_noise();
        assert_eq!(noise.molecules_per_assay, Some((10, 5000)));
        assert_eq!(noise.min_confidence, None);
        assert_eq!(noise.allowed_target_types, None);
        assert_eq!(noise.allowed_relations.len(), 6);

        assert!(matches!(
            resolve_preset(Task::Lbap, NoiseLevel::Core, "IC50", DomainKind::Protein),
            Err(ConfigError::IncompatibleCombination(_))
        ));
        assert!(resolve_preset(Task::Lbap, NoiseLevel::Core, "XC50", DomainKind::Assay).is_err());
    }

    #[test]
    fn preset_matrix_counts() {
        let presets = all_presets();
        assert_eq!(presets.len(), 96);
        let lbap = presets.iter().filter(|p| p.task == Task::Lbap).count();
        let sbap = presets.iter().filter(|p| p.task == Task::Sbap).count();
        assert_eq!(lbap, 36);
        assert_eq!(sbap, 60);
        let ids: BTreeSet<String> = presets.iter().map(|p| p.identifier()).collect();
        assert_eq!(ids.len(), 96, "identifiers must be unique");
        assert!(ids.contains("lbap-core-ic50-assay"));
        assert!(ids.contains("sbap-general-ki-protein-family"));
    }

    #[test]
    fn every_preset_round_trips() {
        for preset in all_presets() {
            let cfg =
                resolve_preset(preset.task, preset.level, preset.measurement, preset.domain)
                    .unwrap();
            let json = cfg.canonical_json();
            let reparsed = CurationConfig::parse(&json).unwrap();
            assert_eq!(reparsed, cfg, "{}", preset.identifier());
            assert_eq!(reparsed.digest(), cfg.digest());
        }
    }

    #[test]
    fn digest_ignores_deployment_fields() {
        let a = CurationConfig::parse(EXAMPLE).unwrap();
        let mut b = a.clone();
        b.source = None;
        b.save_dir = Some(PathBuf::from("elsewhere"));
        b.name = Some("renamed".to_string());
        assert_eq!(a.digest(), b.digest());
        let mut c = a.clone();
        c.split.seed = 99;
        assert_ne!(a.digest(), c.digest());
    }

    #[test]
    fn bare_preset_names_cover_all_measurement_types() {
        let cfg = r#"{"task": "lbap", "noise": "refined", "domain": {"kind": "scaffold"}}"#;
        let cfg = CurationConfig::parse(cfg).unwrap();
        let noise = cfg.resolved_noise();
        assert_eq!(noise.measurement_types.len(), 4);
        assert_eq!(noise.molecules_per_assay, Some((32, 5000)));
    }

    #[test]
    fn custom_noise_objects_parse_strictly() {
        let cfg = r#"{
            "task": "lbap",
            "noise": {
                "measurement_types": ["IC50"],
                "allowed_units": ["nM", "uM"],
                "allowed_relations": ["=", "~", ">"],
                "molecules_per_assay": [5, 100]
            },
            "uncertainty": {"delta_map": {">": 1}},
            "domain": {"kind": "size"}
        }"#;
        let cfg = CurationConfig::parse(cfg).unwrap();
        match &cfg.noise {
            NoiseSpec::Custom(noise) => {
                assert_eq!(noise.molecules_per_assay, Some((5, 100)));
                assert!(noise.require_value, "defaults to true");
            }
            other => panic!("expected custom noise, got {other:?}"),
        }
        let bad = r#"{
            "task": "lbap",
            "noise": {"measurement_types": ["IC50"], "allowed_unitz": ["nM"]},
            "domain": {"kind": "size"}
        }"#;
        let err = CurationConfig::parse(bad).unwrap_err();
        assert!(err.to_string().contains("allowed_unitz"), "{err}");
    }
}
