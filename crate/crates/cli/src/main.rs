use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use fixseg::fixpoint::{self, EmptyMaskPolicy, FixpointConfig};
use fixseg::harness::{
    self, EvalConfig, PhantomSpec, ReportFormat, RowSpec, Scale, TrainConfig, TrainedModels,
};
use fixseg::model::{Backend, ClassifierParams};
use fixseg::region::{self, MarginSpec};
use fixseg::{io, metrics};

/// Fixed-point coarse-to-fine segmentation of small targets in 3D volumes.
#[derive(Parser)]
#[command(name = "fixseg", version)]
struct Cli {
    /// JSON file supplying defaults for any flag. Keys use the long flag
    /// names; an object under the subcommand's name overrides top-level keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic phantom cases.
    GenPhantom(GenPhantomArgs),
    /// Train (or configure) per-fold model sets.
    Train(TrainArgs),
    /// Segment one volume with the fixed-point loop.
    Segment(SegmentArgs),
    /// Cross-validated evaluation over a case directory.
    Evaluate(EvaluateArgs),
    /// Summarize a per-case report CSV.
    Report(ReportArgs),
}

fn parse_json_enum<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(Value::String(s.replace('-', "_"))).map_err(|e| e.to_string())
}

#[derive(Args, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
struct GenPhantomArgs {
    /// Phantom description (JSON). Defaults to a 64^3 volume at 0.5% foreground.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Number of cases, each with a seed derived from the spec's seed.
    #[arg(long)]
    count: Option<usize>,
    /// Overrides the spec's seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
struct TrainArgs {
    /// classifier or oracle.
    #[arg(long, value_parser = parse_json_enum::<Backend>)]
    backend: Option<Backend>,
    #[arg(long)]
    cases: Option<PathBuf>,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    /// Minimum foreground pixels for a coarse training slice.
    #[arg(long)]
    min_pixels: Option<usize>,
    /// Oracle noise coefficient k.
    #[arg(long)]
    noise: Option<f64>,
    /// Oracle boundary jitter radius.
    #[arg(long)]
    jitter: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize, Deserialize, Default, Clone)]
#[serde(rename_all = "kebab-case")]
struct LoopArgs {
    /// Inter-iteration DSC threshold R.
    #[arg(long)]
    threshold: Option<f64>,
    /// Maximum refinement rounds T.
    #[arg(long)]
    max_iters: Option<usize>,
    /// Fixed frame added around each bounding box, in pixels.
    #[arg(long)]
    margins: Option<usize>,
    /// fallback-to-full-slice, fallback-to-coarse-box or terminate.
    #[arg(long, value_parser = parse_json_enum::<EmptyMaskPolicy>)]
    empty_policy: Option<EmptyMaskPolicy>,
}

impl LoopArgs {
    fn fixpoint(&self) -> FixpointConfig {
        let d = FixpointConfig::default();
        FixpointConfig {
            threshold: self.threshold.unwrap_or(d.threshold),
            max_iterations: self.max_iters.unwrap_or(d.max_iterations),
            margins: self.margins.map(MarginSpec::fixed).unwrap_or(d.margins),
            empty_mask_policy: self.empty_policy.unwrap_or_default(),
        }
    }
}

#[derive(Args, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
struct SegmentArgs {
    #[arg(long)]
    volume: Option<PathBuf>,
    /// A trained model directory or a directory with the six model files.
    #[arg(long)]
    models: Option<PathBuf>,
    /// Which fold's models to use from a trained model directory.
    #[arg(long)]
    fold: Option<usize>,
    /// Ground truth: required by the oracle backend, and reported against when given.
    #[arg(long)]
    truth: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    fixpoint: LoopArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
struct EvaluateArgs {
    #[arg(long)]
    cases: Option<PathBuf>,
    #[arg(long)]
    models: Option<PathBuf>,
    /// Comma-separated rows: coarse, iterN, threshR, best, oracle-box.
    #[arg(long)]
    rows: Option<String>,
    #[command(flatten)]
    #[serde(flatten)]
    fixpoint: LoopArgs,
    /// Per-case CSV output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
struct ReportArgs {
    #[arg(long = "in")]
    #[serde(rename = "in")]
    input: Option<PathBuf>,
    /// md or csv.
    #[arg(long)]
    format: Option<String>,
    /// Write to a file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Fills unset flags from the config file: first the subcommand's section,
/// then top-level keys.
fn with_config<T: Serialize + DeserializeOwned>(
    args: T,
    config: &Value,
    section: &str,
) -> Result<T> {
    let Value::Object(mut merged) = serde_json::to_value(&args)? else {
        unreachable!("argument structs serialize to objects");
    };
    let layers = [config.get(section), Some(config)];
    for layer in layers.into_iter().flatten() {
        let Value::Object(layer) = layer else {
            continue;
        };
        for (key, value) in layer {
            if value.is_object() && key == section {
                continue;
            }
            if merged.get(key).is_some_and(Value::is_null) {
                merged.insert(key.clone(), value.clone());
            }
        }
    }
    serde_json::from_value(Value::Object(merged))
        .with_context(|| format!("invalid `{section}` settings in config file"))
}

fn required<'a, T>(value: &'a Option<T>, flag: &str) -> Result<&'a T> {
    value
        .as_ref()
        .with_context(|| format!("missing required flag --{flag}"))
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn gen_phantom(args: GenPhantomArgs) -> Result<()> {
    let out = required(&args.out, "out")?;
    let mut spec = match &args.spec {
        Some(path) => {
            let text =
                fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&text)
                .with_context(|| format!("parsing phantom spec {}", path.display()))?
        }
        None => PhantomSpec::new([64, 64, 64], 0),
    };
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    let cases = harness::phantom_cases(&spec, args.count.unwrap_or(1))?;
    for case in &cases {
        harness::write_case(out, case)?;
        log::info!(
            "{}: {} foreground voxels",
            case.id,
            case.truth.foreground_count()
        );
    }
    println!("wrote {} cases to {}", cases.len(), out.display());
    Ok(())
}

fn train(args: TrainArgs) -> Result<()> {
    let cases_dir = required(&args.cases, "cases")?;
    let out = required(&args.out, "out")?;
    let d = TrainConfig::default();
    let config = TrainConfig {
        backend: args.backend.unwrap_or(d.backend),
        folds: args.folds.unwrap_or(d.folds),
        seed: args.seed.unwrap_or(d.seed),
        min_pixels: args.min_pixels.unwrap_or(d.min_pixels),
        classifier: ClassifierParams {
            learning_rate: args.learning_rate.unwrap_or(d.classifier.learning_rate),
            epochs: args.epochs.unwrap_or(d.classifier.epochs),
            ..d.classifier
        },
        oracle_noise: args.noise.unwrap_or(d.oracle_noise),
        oracle_jitter: args.jitter.unwrap_or(d.oracle_jitter),
        ..d
    };
    let cases = harness::load_cases(cases_dir)?;
    let trained = harness::train_models(&cases, &config)?;
    trained.save(out)?;
    println!(
        "trained {} folds over {} cases into {}",
        trained.folds.len(),
        cases.len(),
        out.display()
    );
    Ok(())
}

fn segment(args: SegmentArgs) -> Result<()> {
    let volume_path = required(&args.volume, "volume")?;
    let models = required(&args.models, "models")?;
    let out = required(&args.out, "out")?;
    let config = args.fixpoint.fixpoint();
    let volume = io::read_volume(volume_path)?;
    let truth = match &args.truth {
        Some(p) => Some(Arc::new(io::read_mask(p)?.0.binarize())),
        None => None,
    };
    let set = harness::load_model_set(models, args.fold.unwrap_or(0))?;
    let coarse = set.views(Scale::Coarse, truth.as_ref())?;
    let fine = set.views(Scale::Fine, truth.as_ref())?;
    let (mask, trace) = fixpoint::run_fixpoint(&volume, &coarse, &fine, &config)?;

    fs::create_dir_all(out)?;
    io::write_mask(&mask, volume.spacing(), out.join("mask"))?;
    write_json(&trace, &out.join("trace.json"))?;
    if mask.foreground_count() > 0 {
        let (regions, _) = region::transform_r(&volume, &mask, &config.margins)?;
        write_json(&regions, &out.join("regions.json"))?;
    }
    println!(
        "{} rounds, stopped by {:?}, last d {}",
        trace.iteration_count(),
        trace.cause,
        trace.last_d().map_or("-".into(), |d| format!("{d:.4}"))
    );
    if let Some(t) = &truth {
        println!("DSC against truth: {:.4}", metrics::mask_dsc(&mask, t)?);
    }
    Ok(())
}

fn evaluate(args: EvaluateArgs) -> Result<()> {
    let cases = harness::load_cases(required(&args.cases, "cases")?)?;
    let models = TrainedModels::load(required(&args.models, "models")?)?;
    let rows = match &args.rows {
        Some(list) => RowSpec::parse_list(list)?,
        None => EvalConfig::default().rows,
    };
    let config = EvalConfig {
        rows,
        fixpoint: args.fixpoint.fixpoint(),
    };
    let report = harness::evaluate(&cases, &models, &config)?;
    if let Some(out) = &args.out {
        harness::write_case_csv(&report, out)?;
    }
    print!("{}", harness::render(&report, ReportFormat::Markdown)?);
    Ok(())
}

fn report(args: ReportArgs) -> Result<()> {
    let input = required(&args.input, "in")?;
    let format: ReportFormat = args.format.as_deref().unwrap_or("md").parse()?;
    let report =
        harness::read_case_csv(input).with_context(|| format!("reading {}", input.display()))?;
    if report.rows.is_empty() {
        bail!("{} has no rows", input.display());
    }
    let text = harness::render(&report, format)?;
    match &args.out {
        Some(out) => fs::write(out, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let config = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            serde_json::from_str(&text)
                .with_context(|| format!("parsing config {}", path.display()))?
        }
        None => Value::Null,
    };
    match cli.command {
        Command::GenPhantom(a) => gen_phantom(with_config(a, &config, "gen-phantom")?),
        Command::Train(a) => train(with_config(a, &config, "train")?),
        Command::Segment(a) => segment(with_config(a, &config, "segment")?),
        Command::Evaluate(a) => evaluate(with_config(a, &config, "evaluate")?),
        Command::Report(a) => report(with_config(a, &config, "report")?),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
