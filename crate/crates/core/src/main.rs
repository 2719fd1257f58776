//! `sceneclass`: classify traffic environments from trajectory recordings.
//!
//! Subcommands cover the stages of the pipeline — `features` extracts the
//! per-pedestrian matrix, `cluster` fits and saves the two-group model,
//! `glm` explains the grouping from pedestrian behavior, `classify` labels
//! new recordings with a saved model, and `synth` generates seeded
//! synthetic scenes. Every run writes a `manifest.json` that pins the
//! resolved configuration, so rerunning with the same inputs reproduces the
//! outputs byte for byte.
//!
//! Exit codes: 0 success, 1 computational failure (e.g. separation in the
//! model fit), 2 configuration or input error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use sceneclass::cluster::{ClusterModel, ClusterSummary, DatasetAssignment};
use sceneclass::config::{InputKind, RunConfig};
use sceneclass::error::{Error, Result};
use sceneclass::featmat::{self, IqrScope, OutlierReport};
use sceneclass::interact;
use sceneclass::pipeline::{self, ExtractionReport};
use sceneclass::synthgen::{self, RegimeParams};
use sceneclass::trajstore::{self, DatasetBundle, SceneMeta};

#[derive(Parser)]
#[command(
    name = "sceneclass",
    version,
    about = "Classify traffic environments as structured or unstructured from trajectories"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract the feature matrix and interaction events from recordings.
    Features(AnalysisArgs),
    /// Group pedestrian rows into the two environment clusters; save the model.
    Cluster(AnalysisArgs),
    /// Fit the binomial model explaining cluster labels from pedestrian features.
    Glm(AnalysisArgs),
    /// Label recordings with a previously saved cluster model.
    Classify(ClassifyArgs),
    /// Generate synthetic scenes from a regime preset or parameter file.
    Synth(SynthArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum AdapterArg {
    /// Campus-drone annotation files (bounding boxes plus homography).
    Sdd,
    /// Arbitrary CSV described by a column map in the config.
    Generic,
}

impl AdapterArg {
    fn kind(self) -> InputKind {
        match self {
            AdapterArg::Sdd => InputKind::Sdd,
            AdapterArg::Generic => InputKind::Generic,
        }
    }
}

#[derive(Args)]
struct AnalysisArgs {
    /// Run configuration JSON (inputs, thresholds, seed, restarts).
    #[arg(long, value_name = "JSON")]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Adapter for inputs whose config entry does not name one.
    #[arg(long, value_enum)]
    adapter: Option<AdapterArg>,
    /// Override the seed from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Compute outlier fences within each dataset instead of pooled.
    #[arg(long)]
    per_dataset_iqr: bool,
}

#[derive(Args)]
struct ClassifyArgs {
    /// Saved cluster model JSON (from `cluster`).
    #[arg(long, value_name = "JSON")]
    model: PathBuf,
    /// Run configuration JSON describing the recordings to label.
    #[arg(long, value_name = "JSON")]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Adapter for inputs whose config entry does not name one.
    #[arg(long, value_enum)]
    adapter: Option<AdapterArg>,
}

#[derive(Clone, Copy, ValueEnum)]
enum PresetArg {
    /// Lane-bound walking, fast vehicles that rarely yield.
    Road,
    /// Free roaming with frequent stops, slow vehicles that usually yield.
    Campus,
}

#[derive(Args)]
struct SynthArgs {
    /// Built-in regime preset.
    #[arg(long, value_enum, conflicts_with = "config")]
    preset: Option<PresetArg>,
    /// Regime parameter JSON; alternative to --preset.
    #[arg(long, value_name = "JSON")]
    config: Option<PathBuf>,
    /// Scenes to generate; each becomes its own dataset, seeded seed+i.
    #[arg(long, default_value_t = 1)]
    scenes: usize,
    /// Override the seed from the preset or parameter file.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory, created if missing.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let Error::Separation(_) = e {
                eprintln!(
                    "hint: some candidate feature splits the cluster labels perfectly, so the \
                     coefficient is unbounded; inspect the per-subset report (glm.json lists \
                     which subsets failed this way) or add more varied recordings."
                );
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Features(args) => cmd_features(args),
        Command::Cluster(args) => cmd_cluster(args),
        Command::Glm(args) => cmd_glm(args),
        Command::Classify(args) => cmd_classify(args),
        Command::Synth(args) => cmd_synth(args),
    }
}

/// Load the config file and fold the command-line overrides into it, so the
/// manifest records exactly what the run used.
fn resolve_config(args: &AnalysisArgs) -> Result<RunConfig> {
    let mut config = RunConfig::from_file(&args.config)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if args.per_dataset_iqr {
        config.per_dataset_iqr = true;
    }
    Ok(config)
}

fn iqr_scope(config: &RunConfig) -> IqrScope {
    if config.per_dataset_iqr {
        IqrScope::PerDataset
    } else {
        IqrScope::Combined
    }
}

fn ensure_out_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Read every configured input through its adapter and merge the bundles.
fn load_bundle(config: &RunConfig, adapter: Option<AdapterArg>) -> Result<DatasetBundle> {
    if config.inputs.is_empty() {
        return Err(Error::Config("the config lists no inputs".into()));
    }
    let mut bundles = Vec::with_capacity(config.inputs.len());
    for input in &config.inputs {
        let kind = input.kind.or(adapter.map(AdapterArg::kind)).unwrap_or(InputKind::Normalized);
        let mut scenes = Vec::with_capacity(input.scenes.len());
        for scene_path in &input.scenes {
            scenes.push(SceneMeta::from_file(scene_path)?);
        }
        let one_scene = |scenes: &[SceneMeta]| -> Result<SceneMeta> {
            match scenes {
                [meta] => Ok(meta.clone()),
                other => Err(Error::Config(format!(
                    "{}: this adapter describes exactly one scene, got {}",
                    input.path.display(),
                    other.len()
                ))),
            }
        };
        let (bundle, report) = match kind {
            InputKind::Normalized => trajstore::load_normalized(&input.path, scenes)?,
            InputKind::Sdd => {
                let meta = one_scene(&scenes)?;
                let transform = input.transform.as_ref().ok_or_else(|| {
                    Error::Config(format!(
                        "{}: sdd input needs a 3x3 `transform` homography",
                        input.path.display()
                    ))
                })?;
                trajstore::adapters::adapt_sdd(&input.path, &meta, transform)?
            }
            InputKind::Generic => {
                let meta = one_scene(&scenes)?;
                let map = input.columns.as_ref().ok_or_else(|| {
                    Error::Config(format!(
                        "{}: generic input needs a `columns` map",
                        input.path.display()
                    ))
                })?;
                trajstore::adapters::adapt_generic(&input.path, map, &meta)?
            }
        };
        for warning in &report.warnings {
            eprintln!("warning: {warning}");
        }
        bundles.push(bundle);
    }
    DatasetBundle::merge(bundles)
}

fn cmd_features(args: AnalysisArgs) -> Result<()> {
    let config = resolve_config(&args)?;
    ensure_out_dir(&args.out)?;
    let bundle = load_bundle(&config, args.adapter)?;
    let extraction = pipeline::extract_features(&bundle, &config.thresholds)?;
    featmat::write_features_csv(&extraction.matrix, &args.out.join("features.csv"))?;
    interact::write_events_csv(&extraction.events, &args.out.join("events.csv"))?;
    pipeline::write_json(&extraction.report, &args.out.join("extraction.json"))?;
    pipeline::write_manifest(&args.out, "features", config.seed, &config)?;
    println!(
        "{} feature rows from {} dataset(s), {} interaction event(s) -> {}",
        extraction.report.rows,
        extraction.report.datasets.len(),
        extraction.report.interaction_events,
        args.out.display()
    );
    for excluded in &extraction.report.excluded {
        eprintln!("excluded dataset {}: {}", excluded.dataset_id, excluded.reason);
    }
    Ok(())
}

#[derive(serde::Serialize)]
struct ClusterReport<'a> {
    extraction: &'a ExtractionReport,
    outliers: &'a OutlierReport,
    inertia: f64,
    restart: u32,
    assignments: &'a [DatasetAssignment],
    summaries: &'a [ClusterSummary],
}

fn cmd_cluster(args: AnalysisArgs) -> Result<()> {
    let config = resolve_config(&args)?;
    ensure_out_dir(&args.out)?;
    let bundle = load_bundle(&config, args.adapter)?;
    let extraction = pipeline::extract_features(&bundle, &config.thresholds)?;
    let prepared = pipeline::prepare_matrix(&extraction.matrix, iqr_scope(&config))?;
    let artifacts = pipeline::run_cluster(&prepared, config.seed, config.restarts as u32)?;

    artifacts.model.save(&args.out.join("model.json"))?;
    featmat::write_features_csv(&prepared.matrix, &args.out.join("features.csv"))?;
    pipeline::write_assignments_csv(&artifacts.assignments, &args.out.join("assignments.csv"))?;
    pipeline::write_summary_csv(&artifacts.summaries, &args.out.join("cluster_summary.csv"))?;
    let report = ClusterReport {
        extraction: &extraction.report,
        outliers: &prepared.outliers,
        inertia: artifacts.fit.inertia,
        restart: artifacts.fit.restart,
        assignments: &artifacts.assignments,
        summaries: &artifacts.summaries,
    };
    pipeline::write_json(&report, &args.out.join("cluster.json"))?;
    pipeline::write_manifest(&args.out, "cluster", config.seed, &config)?;

    for a in &artifacts.assignments {
        println!(
            "dataset {}: cluster {} ({:.1}% of {} rows in A)",
            a.dataset_id,
            a.label.as_str(),
            100.0 * a.a_share,
            a.rows
        );
    }
    println!("model -> {}", args.out.join("model.json").display());
    Ok(())
}

fn cmd_glm(args: AnalysisArgs) -> Result<()> {
    let config = resolve_config(&args)?;
    ensure_out_dir(&args.out)?;
    let bundle = load_bundle(&config, args.adapter)?;
    let extraction = pipeline::extract_features(&bundle, &config.thresholds)?;
    let prepared = pipeline::prepare_matrix(&extraction.matrix, iqr_scope(&config))?;
    let artifacts = pipeline::run_cluster(&prepared, config.seed, config.restarts as u32)?;
    let selection = pipeline::run_glm(&prepared, &artifacts.fit.row_labels())?;

    let table = pipeline::format_glm_table(&selection);
    fs::write(args.out.join("glm.txt"), &table)
        .map_err(|e| Error::io(args.out.join("glm.txt"), e))?;
    pipeline::write_json(&selection, &args.out.join("glm.json"))?;
    pipeline::write_manifest(&args.out, "glm", config.seed, &config)?;
    print!("{table}");
    Ok(())
}

fn cmd_classify(args: ClassifyArgs) -> Result<()> {
    let config = RunConfig::from_file(&args.config)?;
    ensure_out_dir(&args.out)?;
    let model = ClusterModel::load(&args.model)?;
    let bundle = load_bundle(&config, args.adapter)?;
    let extraction = pipeline::extract_features(&bundle, &config.thresholds)?;
    let artifacts = pipeline::run_classify(&model, &extraction.matrix)?;

    pipeline::write_assignments_csv(&artifacts.assignments, &args.out.join("assignments.csv"))?;
    pipeline::write_json(&artifacts, &args.out.join("classification.json"))?;
    let text = pipeline::format_classification(&artifacts);
    fs::write(args.out.join("classification.txt"), &text)
        .map_err(|e| Error::io(args.out.join("classification.txt"), e))?;
    pipeline::write_manifest(&args.out, "classify", config.seed, &config)?;
    print!("{text}");
    Ok(())
}

#[derive(serde::Serialize)]
struct SynthManifestConfig<'a> {
    params: &'a RegimeParams,
    scenes: usize,
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    let mut params = match (&args.preset, &args.config) {
        (Some(PresetArg::Road), None) => RegimeParams::road(),
        (Some(PresetArg::Campus), None) => RegimeParams::campus(),
        (None, Some(path)) => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            RegimeParams::from_json(&text)?
        }
        (None, None) => {
            return Err(Error::Config("synth needs --preset or --config".into()));
        }
        (Some(_), Some(_)) => unreachable!("clap rejects the combination"),
    };
    if let Some(seed) = args.seed {
        params.seed = seed;
    }
    if args.scenes == 0 {
        return Err(Error::Config("--scenes must be at least 1".into()));
    }
    ensure_out_dir(&args.out)?;

    let bundle = if args.scenes == 1 {
        synthgen::generate(&params)?
    } else {
        synthgen::generate_batch(&params, args.scenes)?
    };
    let csv_path = args.out.join("trajectories.csv");
    trajstore::write_normalized(&bundle, &csv_path)?;
    let mut scene_paths = Vec::with_capacity(bundle.scenes.len());
    for meta in &bundle.scenes {
        let path = args.out.join(format!("scene_{}.json", meta.scene_id));
        pipeline::write_json(meta, &path)?;
        scene_paths.push(path);
    }
    // A ready-to-run config pointing at the generated files.
    let run_config = RunConfig {
        inputs: vec![sceneclass::config::InputSpec {
            kind: Some(InputKind::Normalized),
            path: csv_path.clone(),
            scenes: scene_paths,
            transform: None,
            columns: None,
        }],
        seed: params.seed,
        ..RunConfig::default()
    };
    pipeline::write_json(&run_config, &args.out.join("run_config.json"))?;
    pipeline::write_manifest(
        &args.out,
        "synth",
        params.seed,
        &SynthManifestConfig { params: &params, scenes: args.scenes },
    )?;
    println!(
        "{} scene(s), {} tracks -> {}",
        bundle.scenes.len(),
        bundle.tracks.len(),
        args.out.display()
    );
    Ok(())
}
