//! Command-line entry point.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::engine::{run_stream, Engine, NullSink, PredictionSink};
use crate::error::{Error, Result};
use crate::eval::sweep::{self, SweepGrid};
use crate::eval::{knn_eval, synth_generate, SynthSpec};
use crate::io::{read_dataset, write_dataset, JsonlSink};
use crate::model::{AggregationKind, Config, Mode, StreamRecord};
use crate::projection::build_projection;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "zsadapt", version, about = "Test-time adaptation for zero-shot classification over embedding files")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Stream a .baft file through the engine.
    Run(RunArgs),
    /// Generate a synthetic .baft file.
    Synth(SynthArgs),
    /// Leave-one-out kNN accuracy on view 0 of each record.
    Knn(KnnArgs),
    /// Run a parameter grid over a .baft file.
    Sweep(SweepArgs),
    /// Print the header and norm summaries of a .baft file.
    Inspect(InspectArgs),
}

#[derive(Debug, Args)]
struct EngineFlags {
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    #[arg(long, default_value_t = 2.0)]
    beta: f64,
    #[arg(long, default_value_t = 100.0)]
    temperature: f64,
    #[arg(long = "warmup-mult", default_value_t = 10.0)]
    warmup_mult: f64,
    #[arg(long = "max-rank", default_value_t = 150)]
    max_rank: usize,
    #[arg(long, default_value = "full")]
    mode: Mode,
    #[arg(long, default_value = "renyi")]
    aggregation: AggregationKind,
    #[arg(long, default_value_t = 64)]
    views: usize,
    #[arg(long = "keep-fraction", default_value_t = 0.1)]
    keep_fraction: f64,
    #[arg(long = "prior-count", default_value_t = 0.0)]
    prior_count: f64,
}

impl EngineFlags {
    fn config(&self, seed: u64) -> Config {
        Config {
            alpha: self.alpha,
            beta: self.beta,
            temperature: self.temperature,
            warmup_multiplier: self.warmup_mult,
            max_projection_rank: self.max_rank,
            views: self.views,
            mode: self.mode,
            aggregation: self.aggregation,
            keep_fraction: self.keep_fraction,
            prior_count: self.prior_count,
            seed,
        }
    }
}

#[derive(Debug, Args)]
struct RunArgs {
    input: PathBuf,
    #[command(flatten)]
    engine: EngineFlags,
    /// Shuffle record order with this seed (loads the whole file).
    #[arg(long = "shuffle-seed")]
    shuffle_seed: Option<u64>,
    /// Write the run report here instead of stdout.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Write per-example predictions as JSON lines.
    #[arg(long)]
    predictions: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 20)]
    classes: usize,
    #[arg(long, default_value_t = 64)]
    dim: usize,
    #[arg(long, default_value_t = 2000)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 30.0)]
    kappa: f64,
    /// Text-embedding misalignment in degrees.
    #[arg(long, default_value_t = 35.0)]
    rotation: f64,
    #[arg(long, default_value_t = 8)]
    views: usize,
    #[arg(long = "view-noise", default_value_t = 0.5)]
    view_noise: f64,
    /// Log-normal spread of per-view noise scales.
    #[arg(long = "view-noise-spread", default_value_t = 0.0)]
    view_noise_spread: f64,
    #[arg(long = "label-skew", default_value_t = 0.0)]
    label_skew: f64,
    #[arg(long, default_value = "synth.baft")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct KnnArgs {
    input: PathBuf,
    #[arg(long, default_value_t = 5)]
    k: usize,
    #[arg(long, default_value_t = false, action = clap::ArgAction::Set)]
    projected: bool,
    #[arg(long = "max-rank", default_value_t = 150)]
    max_rank: usize,
}

#[derive(Debug, Args)]
struct SweepArgs {
    input: PathBuf,
    /// JSON grid file.
    #[arg(long)]
    grid: PathBuf,
    /// CSV output path (stdout when neither --csv nor --json is given).
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct InspectArgs {
    input: PathBuf,
}

enum Failure {
    Usage(String),
    Data(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Data(e)
    }
}

fn usage_on_invalid(e: Error, flag_hint: &str) -> Failure {
    match e {
        Error::InvalidConfig(m) => Failure::Usage(format!("{flag_hint}: {m}")),
        Error::InvalidAlpha(a) => Failure::Usage(format!("--alpha: must lie in (0, 1), got {a}")),
        other => Failure::Data(other),
    }
}

/// Parses `argv` (including the program name) and runs the command.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Knn(a) => cmd_knn(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Inspect(a) => cmd_inspect(a),
    };
    match outcome {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            EXIT_USAGE
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e}");
            EXIT_DATA
        }
    }
}

fn write_out(path: Option<&PathBuf>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => {
            let mut out = io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.write_all(b"\n")?;
        }
    }
    Ok(())
}

fn cmd_run(args: RunArgs) -> std::result::Result<(), Failure> {
    let config = args.engine.config(args.shuffle_seed.unwrap_or(0));
    config.validate().map_err(|e| usage_on_invalid(e, "engine flags"))?;
    let (model, reader) = read_dataset(&args.input)?;
    let mut engine = Engine::new(model, config)?;

    let mut jsonl = match &args.predictions {
        Some(p) => Some(JsonlSink::new(BufWriter::new(File::create(p).map_err(Error::from)?))),
        None => None,
    };
    let sink: &mut dyn PredictionSink = match jsonl.as_mut() {
        Some(s) => s,
        None => &mut NullSink,
    };

    let report = match args.shuffle_seed {
        Some(seed) => {
            let mut records: Vec<StreamRecord> = reader.collect::<Result<_>>()?;
            records.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            run_stream(&mut engine, records.into_iter().map(Ok), sink)?
        }
        None => run_stream(&mut engine, reader, sink)?,
    };
    if let Some(s) = jsonl {
        s.into_inner()?;
    }
    write_out(args.report.as_ref(), &report.to_json()?)?;
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> std::result::Result<(), Failure> {
    let spec = SynthSpec {
        classes: args.classes,
        dim: args.dim,
        kappa: args.kappa,
        text_rotation_deg: args.rotation,
        n_examples: args.n,
        views: args.views,
        view_noise: args.view_noise,
        view_noise_spread: args.view_noise_spread,
        label_skew: args.label_skew,
        seed: args.seed,
    };
    spec.validate().map_err(|e| usage_on_invalid(e, "synth flags"))?;
    let data = synth_generate(&spec)?;
    write_dataset(&args.out, &data.class_model, &data.records)?;
    eprintln!(
        "wrote {} records ({} classes, D={}, B={}) to {}",
        data.records.len(),
        spec.classes,
        spec.dim,
        spec.views,
        args.out.display()
    );
    Ok(())
}

fn cmd_knn(args: KnnArgs) -> std::result::Result<(), Failure> {
    if args.max_rank < 2 {
        return Err(Failure::Usage("--max-rank: must be at least 2".into()));
    }
    let (model, reader) = read_dataset(&args.input)?;
    let mut embeddings = Vec::new();
    let mut labels = Vec::new();
    for r in reader {
        let r = r?;
        let label = r.label.ok_or_else(|| {
            Failure::Data(Error::InvalidConfig(format!("record {} has no label", r.example_id)))
        })?;
        labels.push(label);
        embeddings.push(r.views.into_iter().next().expect("records have at least one view"));
    }
    let proj = if args.projected {
        Some(build_projection(&model, args.max_rank)?)
    } else {
        None
    };
    let accuracy = knn_eval(&embeddings, &labels, args.k, proj.as_ref()).map_err(|e| match e {
        Error::TooFewExamples { n, k } => Failure::Usage(format!("--k: {k} needs more than {n} examples")),
        other => Failure::Data(other),
    })?;
    let out = json!({ "n": embeddings.len(), "k": args.k, "projected": args.projected, "accuracy": accuracy });
    write_out(None, &out.to_string())?;
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> std::result::Result<(), Failure> {
    let text = std::fs::read_to_string(&args.grid).map_err(Error::from)?;
    let grid: SweepGrid =
        serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("--grid: {e}")))?;
    let (model, reader) = read_dataset(&args.input)?;
    let records: Vec<StreamRecord> = reader.collect::<Result<_>>()?;
    let rows = sweep::sweep(&grid, &model, &records)?;
    let names = grid.axis_names();
    if let Some(p) = &args.csv {
        sweep::write_csv(BufWriter::new(File::create(p).map_err(Error::from)?), &names, &rows)?;
    }
    if let Some(p) = &args.json {
        sweep::write_json(BufWriter::new(File::create(p).map_err(Error::from)?), &rows)?;
    }
    if args.csv.is_none() && args.json.is_none() {
        sweep::write_csv(io::stdout().lock(), &names, &rows)?;
    }
    for row in rows.iter().filter(|r| r.error.is_some()) {
        eprintln!("cell {:?} failed: {}", row.axes, row.error.as_deref().unwrap_or_default());
    }
    Ok(())
}

fn summary(values: impl Iterator<Item = f64>) -> serde_json::Value {
    let (mut n, mut min, mut max, mut sum) = (0u64, f64::INFINITY, f64::NEG_INFINITY, 0.0);
    for v in values {
        n += 1;
        min = min.min(v);
        max = max.max(v);
        sum += v;
    }
    if n == 0 {
        return json!(null);
    }
    json!({ "min": min, "mean": sum / n as f64, "max": max })
}

fn cmd_inspect(args: InspectArgs) -> std::result::Result<(), Failure> {
    let (model, reader) = read_dataset(&args.input)?;
    let header = *reader.header();
    let mut view_norms = Vec::new();
    let mut labeled = 0u64;
    for r in reader {
        let r = r?;
        labeled += u64::from(r.label.is_some());
        view_norms.extend(r.views.iter().map(|v| v.norm()));
    }
    let out = json!({
        "version": header.version,
        "flags": header.flags,
        "dim": header.dim,
        "classes": header.classes,
        "views": header.views,
        "records": header.records,
        "labeled": labeled,
        "class_names": model.class_names(),
        "text_norms": summary(model.text_embeddings().iter().map(|t| t.norm())),
        "view_norms": summary(view_norms.into_iter()),
    });
    write_out(None, &serde_json::to_string_pretty(&out).map_err(Error::from)?)?;
    Ok(())
}
