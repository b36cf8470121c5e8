//! `libnet`: command-line stages for building library networks over hidden
//! activation patterns, training their prediction heads and scoring
//! adversarial inputs.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or format error, 3 numerical
//! divergence.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use libnet_core::analysis::confusion_index;
use libnet_core::dataio::{
    emit_csv, load_head, load_library, read_cpl_csv, read_hap_file, render_csv, save_head,
    save_library, AccuracyRow, CsvTable,
};
use libnet_core::pipeline::{
    cpl_scores, run_demo, split_degenerate, DemoConfig, LayerReadout, Scenario,
};
use libnet_core::presets::{preset, preset_names};
use libnet_core::readout::Target;
use libnet_core::vecmath::DEFAULT_TEMPERATURE;
use libnet_core::{auroc, train_head, ActivationRecord, Error, LibraryNetwork};

#[derive(Parser)]
#[command(
    name = "libnet",
    version,
    about = "Library networks over hidden activation patterns"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Serialize)]
#[serde(tag = "subcommand", rename_all = "kebab-case")]
enum Command {
    /// Build a library from a pattern file, or sweep its size over thresholds.
    Build(BuildArgs),
    /// Train a prediction head over a built library.
    TrainHead(TrainHeadArgs),
    /// Top-k accuracy of a head against model answers.
    Predict(PredictArgs),
    /// Confusion-index table of a head.
    Confusion(ConfusionArgs),
    /// Per-sample consistency of predictions across layers.
    Cpl(CplArgs),
    /// AUROC separating normal from adversarial consistency scores.
    Roc(RocArgs),
    /// End-to-end run on a built-in toy network.
    Demo(DemoArgs),
    /// List the named threshold presets.
    Presets,
}

#[derive(Args, Serialize)]
struct BuildArgs {
    #[arg(long)]
    haps: PathBuf,
    /// Single threshold; writes a library to --out.
    #[arg(long, conflicts_with_all = ["theta_grid", "preset"])]
    theta: Option<f64>,
    /// Comma-separated thresholds; emits a theta,size table.
    #[arg(long, value_delimiter = ',', conflicts_with = "preset")]
    theta_grid: Option<Vec<f64>>,
    /// Named preset whose thresholds are swept like --theta-grid.
    #[arg(long)]
    preset: Option<String>,
    /// Library file for --theta, or CSV for a sweep (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Skip zero-norm patterns instead of failing on them.
    #[arg(long)]
    skip_degenerate: bool,
}

#[derive(Args, Serialize)]
struct TrainHeadArgs {
    #[arg(long)]
    lib: PathBuf,
    #[arg(long)]
    haps: PathBuf,
    #[arg(long, default_value_t = 3)]
    top_a: usize,
    #[arg(long, default_value_t = DEFAULT_TEMPERATURE)]
    temperature: f64,
    /// Number of classes; defaults to the pattern file header.
    #[arg(long)]
    classes: Option<usize>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    skip_degenerate: bool,
}

#[derive(Args, Serialize)]
struct PredictArgs {
    #[arg(long)]
    lib: PathBuf,
    #[arg(long)]
    head: PathBuf,
    #[arg(long)]
    haps: PathBuf,
    #[arg(long, default_value_t = 1)]
    k: usize,
    /// Score against true labels instead of model answers.
    #[arg(long)]
    vs_truth: bool,
    /// Layer index written to the accuracy table.
    #[arg(long, default_value_t = 0)]
    layer: usize,
    /// Accuracy CSV path (layer,theta,k,accuracy).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    skip_degenerate: bool,
}

#[derive(Args, Serialize)]
struct ConfusionArgs {
    #[arg(long)]
    lib: PathBuf,
    #[arg(long)]
    head: PathBuf,
    #[arg(long)]
    haps: PathBuf,
    /// CSV path (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    skip_degenerate: bool,
}

#[derive(Args, Serialize)]
struct CplArgs {
    /// `LIB,HED` pairs separated by `;`, one per layer.
    #[arg(long)]
    layers: String,
    /// Pattern files separated by `;`, in the same layer order.
    #[arg(long)]
    haps_per_layer: String,
    #[arg(long, default_value_t = 20)]
    top_a: usize,
    /// CSV path (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct RocArgs {
    #[arg(long)]
    normal: PathBuf,
    #[arg(long)]
    adv: PathBuf,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum ScenarioArg {
    Synthetic,
    ToyDigits,
}

#[derive(Args, Serialize)]
struct DemoArgs {
    #[arg(long, value_enum, default_value_t = ScenarioArg::ToyDigits)]
    scenario: ScenarioArg,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

enum Failure {
    Usage(String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Core(Error::Io(e))
    }
}

type Outcome = std::result::Result<(), Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    if let Err(e) = limit_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 3 } else { 2 })
        }
    }
}

fn limit_threads() -> std::result::Result<(), String> {
    let Ok(raw) = std::env::var("LIBNET_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("LIBNET_THREADS must be a positive integer, got {raw:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn print_config(config: &impl Serialize) {
    match serde_json::to_string(config) {
        Ok(json) => eprintln!("config: {json}"),
        Err(e) => log::warn!("cannot serialize the run configuration: {e}"),
    }
}

fn run(command: Command) -> Outcome {
    if !matches!(command, Command::Demo(_)) {
        print_config(&command);
    }
    match command {
        Command::Build(a) => build(a),
        Command::TrainHead(a) => train(a),
        Command::Predict(a) => predict(a),
        Command::Confusion(a) => confusion(a),
        Command::Cpl(a) => cpl(a),
        Command::Roc(a) => roc(a),
        Command::Demo(a) => demo(a),
        Command::Presets => {
            for name in preset_names() {
                let thetas = preset(name).expect("listed preset").thetas();
                let list: Vec<String> = thetas.iter().map(f64::to_string).collect();
                println!("{name}\t{}", list.join(","));
            }
            Ok(())
        }
    }
}

fn check_theta(theta: f64) -> Outcome {
    if theta > 0.0 && theta <= 1.0 {
        Ok(())
    } else {
        Err(Failure::Usage(format!(
            "theta must lie in (0, 1], got {theta}"
        )))
    }
}

fn usable(records: Vec<ActivationRecord>, skip_degenerate: bool) -> Vec<ActivationRecord> {
    if skip_degenerate {
        split_degenerate(&records).0
    } else {
        records
    }
}

fn build_one(
    records: &[ActivationRecord],
    theta: f64,
    skip: bool,
) -> libnet_core::Result<LibraryNetwork> {
    if skip {
        LibraryNetwork::build_skipping_degenerate(records, theta).map(|(lib, _)| lib)
    } else {
        LibraryNetwork::build(records, theta)
    }
}

fn write_or_print(out: Option<&Path>, text: &str) -> Outcome {
    match out {
        Some(path) => fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn build(a: BuildArgs) -> Outcome {
    let grid: Option<Vec<f64>> = match (&a.theta_grid, &a.preset) {
        (Some(g), _) => Some(g.clone()),
        (None, Some(name)) => Some(
            preset(name)
                .ok_or_else(|| Failure::Usage(format!("unknown preset {name:?}")))?
                .thetas()
                .to_vec(),
        ),
        (None, None) => None,
    };
    let records = read_hap_file(&a.haps)?.records;
    match (a.theta, grid) {
        (Some(theta), None) => {
            check_theta(theta)?;
            let out = a
                .out
                .ok_or_else(|| Failure::Usage("--theta needs --out".into()))?;
            let lib = build_one(&records, theta, a.skip_degenerate)?;
            save_library(&out, &lib)?;
            println!("{}", lib.size());
            Ok(())
        }
        (None, Some(grid)) => {
            if grid.is_empty() {
                return Err(Failure::Usage("empty threshold grid".into()));
            }
            for &theta in &grid {
                check_theta(theta)?;
            }
            let rows = grid
                .iter()
                .map(|&theta| Ok((theta, build_one(&records, theta, a.skip_degenerate)?.size())))
                .collect::<libnet_core::Result<Vec<_>>>()?;
            write_or_print(a.out.as_deref(), &render_csv(CsvTable::Size(&rows)))
        }
        _ => Err(Failure::Usage(
            "give one of --theta, --theta-grid or --preset".into(),
        )),
    }
}

fn train(a: TrainHeadArgs) -> Outcome {
    let lib = load_library(&a.lib)?;
    let file = read_hap_file(&a.haps)?;
    let classes = a.classes.unwrap_or(file.num_classes as usize);
    let records = usable(file.records, a.skip_degenerate);
    let head = train_head(&lib, &records, classes, a.temperature, a.top_a)?;
    save_head(&a.out, &head)?;
    println!(
        "trained on {} records, {} nodes, {classes} classes",
        records.len(),
        lib.size()
    );
    Ok(())
}

fn predict(a: PredictArgs) -> Outcome {
    let lib = load_library(&a.lib)?;
    let head = load_head(&a.head)?;
    let records = usable(read_hap_file(&a.haps)?.records, a.skip_degenerate);
    let target = if a.vs_truth {
        Target::TrueLabel
    } else {
        Target::ModelAnswer
    };
    let report = head.evaluate_against(&lib, &records, a.k, target)?;
    println!(
        "top-{} accuracy {} ({}/{})",
        a.k, report.accuracy, report.correct, report.total
    );
    if let Some(out) = &a.out {
        let row = AccuracyRow {
            layer: a.layer,
            theta: lib.theta(),
            k: a.k,
            accuracy: report.accuracy,
        };
        emit_csv(out, CsvTable::Accuracy(&[row]))?;
    }
    Ok(())
}

fn confusion(a: ConfusionArgs) -> Outcome {
    let lib = load_library(&a.lib)?;
    let head = load_head(&a.head)?;
    let records = usable(read_hap_file(&a.haps)?.records, a.skip_degenerate);
    let matrix = confusion_index(&head, &lib, &records)?;
    write_or_print(a.out.as_deref(), &render_csv(CsvTable::Confusion(&matrix)))
}

fn split_list(raw: &str) -> Vec<&str> {
    raw.split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect()
}

fn cpl(a: CplArgs) -> Outcome {
    let pairs = split_list(&a.layers);
    let files = split_list(&a.haps_per_layer);
    if pairs.len() < 2 {
        return Err(Failure::Usage(
            "--layers needs at least two LIB,HED pairs".into(),
        ));
    }
    if pairs.len() != files.len() {
        return Err(Failure::Usage(format!(
            "{} layers but {} pattern files",
            pairs.len(),
            files.len()
        )));
    }
    let layers = pairs
        .iter()
        .map(|p| {
            let (lib, head) = p
                .split_once(',')
                .ok_or_else(|| Failure::Usage(format!("expected LIB,HED, got {p:?}")))?;
            Ok(LayerReadout {
                library: load_library(lib.trim())?,
                head: load_head(head.trim())?,
            })
        })
        .collect::<std::result::Result<Vec<_>, Failure>>()?;
    let per_layer = files
        .iter()
        .map(|f| read_hap_file(f).map(|h| h.records))
        .collect::<libnet_core::Result<Vec<_>>>()?;
    let scores = cpl_scores(&layers, &per_layer, a.top_a)?;
    write_or_print(a.out.as_deref(), &render_csv(CsvTable::Cpl(&scores)))
}

fn roc(a: RocArgs) -> Outcome {
    let values = |path: &Path| -> libnet_core::Result<Vec<f64>> {
        Ok(read_cpl_csv(path)?.into_iter().map(|s| s.value).collect())
    };
    let result = auroc(&values(&a.normal)?, &values(&a.adv)?)?;
    println!("{}", result.auroc);
    Ok(())
}

fn demo(a: DemoArgs) -> Outcome {
    let scenario = match a.scenario {
        ScenarioArg::Synthetic => Scenario::Synthetic,
        ScenarioArg::ToyDigits => Scenario::ToyDigits,
    };
    let cfg = DemoConfig::new(scenario, a.seed);
    #[derive(Serialize)]
    struct Resolved<'a> {
        subcommand: &'static str,
        out: &'a Path,
        #[serde(flatten)]
        config: &'a DemoConfig,
    }
    print_config(&Resolved {
        subcommand: "demo",
        out: &a.out,
        config: &cfg,
    });
    fs::create_dir_all(&a.out)?;
    let report = run_demo(&cfg, &a.out)?;
    println!(
        "toy net accuracy: train {:.4}, test {:.4}",
        report.train_accuracy, report.test_accuracy
    );
    for p in &report.accuracy {
        println!(
            "layer {} theta {}: {} nodes, top-1 {:.4}, top-3 {:.4}",
            p.layer, p.theta, p.library_size, p.top1, p.top3
        );
    }
    for r in &report.attacks {
        println!(
            "epsilon {}: model accuracy {:.4}, AUROC {:.4}",
            r.epsilon, r.model_accuracy, r.auroc
        );
    }
    println!("outputs written to {}", a.out.display());
    Ok(())
}
