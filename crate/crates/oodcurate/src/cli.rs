//! Command-line front door. Diagnostics go to standard error; machine
//! output (stats tables, manifests) goes to standard output or files.
//!
//! Exit codes: 0 success, 1 internal/IO error, 2 configuration or usage
//! error, 3 source error, 4 empty dataset, 5 dataset invariant violation.

use std::path::{Path, PathBuf};

use clap::{ArgGroup, Parser, Subcommand};

use crate::config::{self, CurationConfig};
use crate::ingest::{self, SourceKind, SyntheticSpec};
use crate::report::{self, StatsFormat};
use crate::split::{self, CurateError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INTERNAL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SOURCE: i32 = 3;
pub const EXIT_EMPTY: i32 = 4;
pub const EXIT_INVARIANT: i32 = 5;

#[derive(Parser)]
#[command(
    name = "oodcurate",
    version,
    about = "Curate OOD bioactivity benchmark datasets from raw activity records"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the curation pipeline and write a dataset directory.
    #[command(group(ArgGroup::new("recipe").required(true).args(["config", "preset"])))]
    Curate {
        /// Path to a JSON curation config.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Built-in preset as task,noise,measurement,domain
        /// (e.g. lbap,core,IC50,assay).
        #[arg(long)]
        preset: Option<String>,
        /// Source file; overrides the config's source path.
        #[arg(long)]
        source: Option<PathBuf>,
        /// Source kind; defaults to the config, else file-extension sniffing.
        #[arg(long)]
        source_kind: Option<String>,
        /// Output directory (the dataset directory is created inside it).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides the config's split seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker thread cap; 0 = default. Output bytes are identical for
        /// any value.
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        /// Overwrite an existing dataset directory with a different digest.
        #[arg(long)]
        force: bool,
    },
    /// List the built-in preset identifiers.
    Presets,
    /// Recompute and print statistics for a written dataset directory.
    Stats {
        #[arg(long)]
        dir: PathBuf,
        /// json, table, or csv.
        #[arg(long, default_value = "table")]
        format: String,
    },
    /// Generate a deterministic synthetic flat dump.
    Synth {
        #[arg(long, default_value_t = 40)]
        assays: u32,
        /// Records per assay as min:max.
        #[arg(long, default_value = "10:60")]
        molecules: String,
        /// Comma-separated measurement types.
        #[arg(long, default_value = "IC50")]
        types: String,
        #[arg(long, default_value_t = 0.04)]
        missing_value_rate: f64,
        #[arg(long, default_value_t = 0.03)]
        missing_smiles_rate: f64,
        #[arg(long, default_value_t = 0.05)]
        illegal_smiles_rate: f64,
        #[arg(long, default_value_t = 0.06)]
        foreign_unit_rate: f64,
        #[arg(long, default_value_t = 0.10)]
        missing_target_rate: f64,
        #[arg(long, default_value_t = 0.25)]
        shared_molecule_rate: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-check all invariants of a written dataset directory.
    Validate {
        #[arg(long)]
        dir: PathBuf,
    },
}

/// Parse arguments and run. Returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // clap prints its own message and distinguishes --help/--version
            let code = if e.exit_code() == 0 { EXIT_OK } else { EXIT_CONFIG };
            let _ = e.print();
            return code;
        }
    };
    match cli.command {
        Command::Curate {
            config,
            preset,
            source,
            source_kind,
            out,
            seed,
            jobs,
            force,
        } => cmd_curate(CurateArgs {
            config,
            preset,
            source,
            source_kind,
            out,
            seed,
            jobs,
            force,
        }),
        Command::Presets => cmd_presets(),
        Command::Stats { dir, format } => cmd_stats(&dir, &format),
        Command::Synth {
            assays,
            molecules,
            types,
            missing_value_rate,
            missing_smiles_rate,
            illegal_smiles_rate,
            foreign_unit_rate,
            missing_target_rate,
            shared_molecule_rate,
            seed,
            out,
        } => cmd_synth(
            assays,
            &molecules,
            &types,
            [
                missing_value_rate,
                missing_smiles_rate,
                illegal_smiles_rate,
                foreign_unit_rate,
                missing_target_rate,
                shared_molecule_rate,
            ],
            seed,
            &out,
        ),
        Command::Validate { dir } => cmd_validate(&dir),
    }
}

struct CurateArgs {
    config: Option<PathBuf>,
    preset: Option<String>,
    source: Option<PathBuf>,
    source_kind: Option<String>,
    out: Option<PathBuf>,
    seed: Option<u64>,
    jobs: usize,
    force: bool,
}

fn fail(code: i32, msg: impl std::fmt::Display) -> i32 {
    eprintln!("error: {msg}");
    code
}

fn sniff_kind(path: &Path) -> SourceKind {
    match path.extension().and_then(|e| e.to_str()) {
        Some("db" | "sqlite" | "sqlite3") => SourceKind::RelationalExport,
        _ => SourceKind::FlatDump,
    }
}

fn cmd_curate(args: CurateArgs) -> i32 {
    let mut config = match (&args.config, &args.preset) {
        (Some(path), None) => match CurationConfig::parse_file(path) {
            Ok(config) => config,
            Err(e) => return fail(EXIT_CONFIG, e),
        },
        (None, Some(flag)) => match config::resolve_preset_flag(flag) {
            Ok(config) => config,
            Err(e) => return fail(EXIT_CONFIG, e),
        },
        _ => unreachable!("clap enforces exactly one of --config/--preset"),
    };
    if let Some(seed) = args.seed {
        config.split.seed = seed;
    }

    let (source_path, source_kind) = match (&args.source, &config.source) {
        (Some(path), _) => {
            let kind = match &args.source_kind {
                Some(name) => match SourceKind::parse(name) {
                    Some(kind) => kind,
                    None => return fail(EXIT_CONFIG, format!("unknown source kind '{name}'")),
                },
                None => sniff_kind(path),
            };
            (path.clone(), kind)
        }
        (None, Some(spec)) => (spec.path.clone(), spec.kind),
        (None, None) => {
            return fail(
                EXIT_CONFIG,
                "no source: pass --source or set source in the config",
            );
        }
    };
    let Some(out_dir) = args.out.clone().or_else(|| config.save_dir.clone()) else {
        return fail(
            EXIT_CONFIG,
            "no output directory: pass --out or set save_dir in the config",
        );
    };

    if let Err(e) = config.validate() {
        return fail(EXIT_CONFIG, e);
    }
    let source = match ingest::open_source(&source_path, source_kind) {
        Ok(source) => source,
        Err(e) => return fail(EXIT_SOURCE, e),
    };

    let pool = rayon::ThreadPoolBuilder::new().num_threads(args.jobs).build();
    let pool = match pool {
        Ok(pool) => pool,
        Err(e) => return fail(EXIT_INTERNAL, e),
    };
    let run = pool.install(|| split::curate(&config, &source));
    let run = match run {
        Ok(run) => run,
        Err(CurateError::EmptyDataset) => return fail(EXIT_EMPTY, CurateError::EmptyDataset),
        Err(CurateError::Ingest(e)) => return fail(EXIT_SOURCE, e),
        Err(CurateError::Config(e)) => return fail(EXIT_CONFIG, e),
        Err(e) => return fail(EXIT_INTERNAL, e),
    };

    for warning in &run.dataset.warnings {
        eprintln!("warning: {warning}");
    }
    let dataset_dir = out_dir.join(run.dataset.name.clone());
    match report::write_run(&run, &dataset_dir, args.force) {
        Ok(files) => {
            eprintln!(
                "wrote {} files to {}",
                files.len(),
                dataset_dir.display()
            );
        }
        Err(e) => return fail(EXIT_INTERNAL, e),
    }
    let stats = report::compute_stats(&run.dataset);
    print!("{}", report::render_stats(&stats, StatsFormat::TableText));
    EXIT_OK
}

fn cmd_presets() -> i32 {
    for preset in config::all_presets() {
        println!("{}\t{}", preset.identifier(), preset.flag_form());
    }
    EXIT_OK
}

fn cmd_stats(dir: &Path, format: &str) -> i32 {
    let Some(format) = StatsFormat::parse(format) else {
        return fail(EXIT_CONFIG, format!("unknown format '{format}'"));
    };
    let stats_path = dir.join("stats.json");
    if !stats_path.is_file() {
        return fail(EXIT_SOURCE, format!("{} is not a dataset directory", dir.display()));
    }
    let text = match std::fs::read_to_string(&stats_path) {
        Ok(text) => text,
        Err(e) => return fail(EXIT_SOURCE, e),
    };
    let stats = match report::parse_stats_json(&text) {
        Ok(stats) => stats,
        Err(e) => return fail(EXIT_INVARIANT, format!("stats.json does not parse: {e}")),
    };
    print!("{}", report::render_stats(&stats, format));
    EXIT_OK
}

fn cmd_synth(
    assays: u32,
    molecules: &str,
    types: &str,
    rates: [f64; 6],
    seed: u64,
    out: &Path,
) -> i32 {
    let Some((lo, hi)) = molecules.split_once(':') else {
        return fail(EXIT_CONFIG, "expected --molecules min:max");
    };
    let (Ok(lo), Ok(hi)) = (lo.parse::<u32>(), hi.parse::<u32>()) else {
        return fail(EXIT_CONFIG, "expected --molecules min:max with integers");
    };
    let spec = SyntheticSpec {
        n_assays: assays,
        molecules_per_assay: (lo, hi),
        measurement_types: types.split(',').map(|s| s.trim().to_string()).collect(),
        missing_value_rate: rates[0],
        missing_smiles_rate: rates[1],
        illegal_smiles_rate: rates[2],
        foreign_unit_rate: rates[3],
        missing_target_rate: rates[4],
        shared_molecule_rate: rates[5],
    };
    match ingest::generate_synthetic_source(&spec, seed, out) {
        Ok(manifest) => {
            println!(
                "{}",
                serde_json::to_string(&manifest).expect("manifest serialization cannot fail")
            );
            EXIT_OK
        }
        Err(e @ ingest::IngestError::InvalidSpec(_)) => fail(EXIT_CONFIG, e),
        Err(e) => fail(EXIT_INTERNAL, e),
    }
}

fn cmd_validate(dir: &Path) -> i32 {
    match report::validate_dataset_dir(dir) {
        Ok(metadata) => {
            eprintln!(
                "dataset '{}' valid: {} samples across 5 splits",
                metadata.name,
                metadata.counts.train
                    + metadata.counts.iid_val
                    + metadata.counts.iid_test
                    + metadata.counts.ood_val
                    + metadata.counts.ood_test
            );
            EXIT_OK
        }
        Err(report::ValidateError::MissingFile(path)) => {
            fail(EXIT_SOURCE, format!("missing or unreadable {}", path.display()))
        }
        Err(report::ValidateError::Io(e)) => fail(EXIT_SOURCE, e),
        Err(e @ report::ValidateError::Violation(_)) => fail(EXIT_INVARIANT, e),
    }
}
