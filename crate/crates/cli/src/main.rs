use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use lpr_core::config::{PipelineConfig, KEYS};
use lpr_core::dataset::load_glyph_dataset;
use lpr_core::eval::{evaluate, EvalMode, EvalOptions};
use lpr_core::exec::{map_ordered, Execution};
use lpr_core::knn::{train, KnnModel};
use lpr_core::pipeline::{PlateResult, Recognizer, Trace};
use lpr_core::synth::{generate_corpus, glyph_samples, write_glyph_dataset, CorpusSpec, ALPHABET};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// License plate localization and character recognition.
#[derive(Debug, Parser)]
#[command(name = "lpr", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Locate and read the plate in each image.
    Recognize(RecognizeArgs),
    /// Build a k-NN model from a labeled glyph directory or synthetic glyphs.
    Train(TrainArgs),
    /// Score a generated corpus.
    Evaluate(EvaluateArgs),
    /// Write a synthetic corpus with a ground-truth manifest.
    Generate(GenerateArgs),
    /// Print the effective configuration, or the documented keys.
    Config(ConfigArgs),
}

#[derive(Debug, Args)]
struct ConfigOpts {
    /// Configuration file of `key = value` lines.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Override one key, e.g. `--set threshold.mode=fixed:0.5`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigOpts {
    fn load(&self) -> Result<PipelineConfig, lpr_core::config::ConfigError> {
        let mut cfg = match &self.config {
            Some(path) => PipelineConfig::from_file(path)?,
            None => PipelineConfig::default(),
        };
        for o in &self.overrides {
            cfg.apply_override(o)?;
        }
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
struct RecognizeArgs {
    /// Input images (PPM, PGM or PNG).
    #[arg(required = true)]
    images: Vec<PathBuf>,
    /// Trained model file.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Write intermediate images for each input under DIR/<file stem>/.
    #[arg(long, value_name = "DIR")]
    debug_dir: Option<PathBuf>,
    /// Write a one-row-per-image CSV summary.
    #[arg(long, value_name = "FILE")]
    csv: Option<PathBuf>,
    #[command(flatten)]
    cfg: ConfigOpts,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Directory with one subdirectory of glyph images per label.
    #[arg(long, value_name = "DIR", conflicts_with = "synthetic")]
    glyphs: Option<PathBuf>,
    /// Harvest this many synthetic glyphs per character instead.
    #[arg(long, value_name = "PER_LABEL")]
    synthetic: Option<usize>,
    /// Seed for synthetic glyphs.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Neighbour count stored in the model.
    #[arg(short, long, default_value_t = 1)]
    k: usize,
    /// Output model file.
    #[arg(short, long)]
    out: PathBuf,
    /// Also write the synthetic glyphs to this directory.
    #[arg(long, value_name = "DIR", requires = "synthetic")]
    save_glyphs: Option<PathBuf>,
    /// Worker threads; 0 uses every CPU.
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    /// Corpus directory containing manifest.csv (and glyphs/ for `strategy`).
    corpus: PathBuf,
    #[arg(long, default_value = "localization")]
    mode: EvalMode,
    /// Trained model, required for `recognition`.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Seed for the train/test shuffles of `strategy`.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Write the report as CSV.
    #[arg(long, value_name = "FILE")]
    csv: Option<PathBuf>,
    #[command(flatten)]
    cfg: ConfigOpts,
}

#[derive(Debug, Args)]
struct GenerateArgs {
    /// Output directory.
    out: PathBuf,
    /// Corpus description, e.g. `count=50,tilt=-20:20,noise=2,brightness=all`.
    #[arg(long, default_value = "")]
    spec: String,
    /// Overrides `count` in the spec.
    #[arg(long)]
    count: Option<usize>,
    /// Overrides `seed` in the spec.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 0 uses every CPU.
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

#[derive(Debug, Args)]
struct ConfigArgs {
    /// List every key with a description.
    #[arg(long)]
    keys: bool,
    #[command(flatten)]
    cfg: ConfigOpts,
}

/// Failures that are the caller's fault exit with 2.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(e: impl std::fmt::Display) -> anyhow::Error {
    UsageError(e.to_string()).into()
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Recognize(a) => recognize(a),
        Command::Train(a) => run_train(a).map(|()| ExitCode::SUCCESS),
        Command::Evaluate(a) => run_evaluate(a).map(|()| ExitCode::SUCCESS),
        Command::Generate(a) => run_generate(a).map(|()| ExitCode::SUCCESS),
        Command::Config(a) => run_config(a).map(|()| ExitCode::SUCCESS),
    };
    match outcome {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {}", describe(&err));
            if err.is::<UsageError>() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

/// The error chain joined with `: `, skipping causes that an outer message
/// already quotes.
fn describe(err: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in err.chain() {
        let text = cause.to_string();
        if out.contains(&text) {
            continue;
        }
        if !out.is_empty() {
            out.push_str(": ");
        }
        out.push_str(&text);
    }
    out
}

fn load_model(path: Option<&Path>) -> Result<Option<KnnModel>> {
    path.map(|p| KnnModel::load(p).with_context(|| format!("loading model {}", p.display()))).transpose()
}

fn recognize(args: RecognizeArgs) -> Result<ExitCode> {
    let cfg = args.cfg.load().map_err(usage)?;
    let exec = Execution::from_workers(cfg.workers);
    let model = load_model(args.model.as_deref())?;
    if model.is_none() {
        log::warn!("no --model given; only localization will run");
    }
    let rec = Recognizer::new(cfg, model)?;
    let results = map_ordered(&args.images, exec, |path| recognize_one(&rec, path, args.debug_dir.as_deref()));
    let mut failed = 0;
    let mut rows = Vec::new();
    for (path, res) in args.images.iter().zip(results) {
        match res {
            Ok(r) => {
                print!("{}", r.to_record());
                println!();
                rows.push(r);
            }
            Err(err) => {
                failed += 1;
                let msg = describe(&err);
                let shown = path.display().to_string();
                if msg.contains(&shown) {
                    eprintln!("error: {msg}");
                } else {
                    eprintln!("error: {shown}: {msg}");
                }
            }
        }
    }
    if let Some(csv) = &args.csv {
        write_summary(csv, &rows)?;
    }
    Ok(if failed > 0 { ExitCode::from(1) } else { ExitCode::SUCCESS })
}

fn recognize_one(rec: &Recognizer, path: &Path, debug_dir: Option<&Path>) -> Result<PlateResult> {
    let mut trace = debug_dir.map(|_| Trace::default());
    let result = if rec.model().is_some() {
        rec.recognize_file(path, trace.as_mut())?
    } else {
        rec.analyze_file(path, trace.as_mut())?
    };
    if let (Some(dir), Some(trace)) = (debug_dir, trace) {
        let stem = path.file_stem().map_or_else(|| "image".into(), |s| s.to_string_lossy().into_owned());
        let out = dir.join(stem);
        trace.write_to(&out).with_context(|| format!("writing debug images to {}", out.display()))?;
    }
    Ok(result)
}

fn write_summary(path: &Path, rows: &[PlateResult]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(["source", "found", "row0", "col0", "row1", "col1", "tilt_degrees", "text", "plate_type", "total_us"])?;
    for r in rows {
        let b = r.bbox.map(|b| [b.row0, b.col0, b.row1, b.col1].map(|v| v.to_string())).unwrap_or_default();
        w.write_record([
            r.source.clone(),
            r.found.to_string(),
            b[0].clone(),
            b[1].clone(),
            b[2].clone(),
            b[3].clone(),
            format!("{:.3}", r.tilt_degrees),
            r.text.clone(),
            r.plate_type.kind.to_string(),
            r.total_us.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn run_train(args: TrainArgs) -> Result<()> {
    if args.k == 0 {
        return Err(usage("--k must be at least 1"));
    }
    let exec = Execution::from_workers(args.workers);
    let samples = match (&args.glyphs, args.synthetic) {
        (Some(dir), None) => load_glyph_dataset(dir)?,
        (None, Some(n)) if n > 0 => {
            let s = glyph_samples(ALPHABET, n, args.seed, exec)?;
            if let Some(dir) = &args.save_glyphs {
                write_glyph_dataset(dir, &s)?;
            }
            s
        }
        _ => return Err(usage("give either --glyphs DIR or --synthetic N (N > 0)")),
    };
    let model = train(&samples, args.k, exec)?;
    if !model.label_consistent() {
        log::warn!("identical feature vectors carry different labels; training-set accuracy cannot reach 100%");
    }
    model.save(&args.out).with_context(|| format!("writing {}", args.out.display()))?;
    println!("trained {} samples, {} labels, k={} -> {}", model.entries().len(), model.labels().len(), model.k(), args.out.display());
    Ok(())
}

fn run_evaluate(args: EvaluateArgs) -> Result<()> {
    let cfg = args.cfg.load().map_err(usage)?;
    if args.mode == EvalMode::Recognition && args.model.is_none() {
        return Err(usage("--mode recognition needs --model"));
    }
    let model = load_model(args.model.as_deref())?;
    let opts = EvalOptions { seed: args.seed, exec: Execution::from_workers(cfg.workers) };
    let report = evaluate(&args.corpus, &cfg, args.mode, model.as_ref(), opts)?;
    print!("{report}");
    if let Some(path) = &args.csv {
        fs::write(path, report.to_csv()).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn run_generate(args: GenerateArgs) -> Result<()> {
    let mut spec: CorpusSpec = args.spec.parse().map_err(usage)?;
    if let Some(c) = args.count {
        spec.count = c;
    }
    if let Some(s) = args.seed {
        spec.seed = s;
    }
    spec.validate().map_err(usage)?;
    let rows = generate_corpus(&spec, &args.out, Execution::from_workers(args.workers))?;
    println!("wrote {} images to {}", rows.len(), args.out.display());
    Ok(())
}

fn run_config(args: ConfigArgs) -> Result<()> {
    if args.keys {
        for (key, doc) in KEYS {
            println!("{key:<24} {doc}");
        }
        return Ok(());
    }
    print!("{}", args.cfg.load().map_err(usage)?.to_text());
    Ok(())
}
