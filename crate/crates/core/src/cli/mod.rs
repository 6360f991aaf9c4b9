//! Command-line front end.

mod config;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::{error, info, warn};
use serde::Serialize;

pub use config::{keys_help, RunConfig, KEYS};

use crate::data::{
    atomic_write, load_stem_directory, load_track, load_tracks, read_wav, track_dirs, write_wav, DatasetManifest,
    TrackStems,
};
use crate::error::{Error, Result};
use crate::eval::{comparison_csv, evaluate_dataset, EvalReport, TrackPair, DEFAULT_FILTER_LENGTH};
use crate::model::{complete_sources, Model, ModelConfig, SourceEstimates};
use crate::train::{train, Checkpoint, EpochLosses};

#[derive(Debug, Parser)]
#[command(name = "wavesep", version, about = "Waveform source separation with a non-causal Wavenet")]
pub struct Cli {
    /// Worker threads (default: all available cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print parameter counts and receptive fields of model configurations.
    Inspect(InspectArgs),
    /// Write mixture.wav (the sum of the stems) into every track directory.
    Mix(MixArgs),
    /// Train a model and write best.wssm, last.wssm and history.csv.
    #[command(after_help = keys_help())]
    Train(TrainArgs),
    /// Separate a mixture (or a dataset split) into source WAV files.
    Separate(SeparateArgs),
    /// Score estimates against references with BSS Eval.
    Evaluate(EvaluateArgs),
    /// Merge evaluation reports into one comparison CSV.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    /// Configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Print the five reference configurations (N, k) = (1,512) .. (5,32).
    #[arg(long)]
    pub table1: bool,
    #[arg(long)]
    pub stacks: Option<usize>,
    #[arg(long)]
    pub filters: Option<usize>,
    #[arg(long)]
    pub outputs: Option<usize>,
    #[arg(long)]
    pub target_field: Option<usize>,
    /// Also write the rows as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MixArgs {
    /// Root directory containing one sub-directory per track.
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, default_value_t = 16_000)]
    pub sample_rate: u32,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides `dataset` from the configuration.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Overrides `manifest` from the configuration.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Overrides `output` from the configuration.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SeparateArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Mixture WAV file.
    #[arg(long, conflicts_with = "dataset", required_unless_present = "dataset")]
    pub input: Option<PathBuf>,
    /// Dataset root; separates every track of `--split`.
    #[arg(long, requires = "split")]
    pub dataset: Option<PathBuf>,
    /// Split manifest (defaults to <dataset>/dataset.json).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub split: Option<String>,
    /// Output directory.
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Directory of estimates, laid out like the references.
    #[arg(long)]
    pub estimates: PathBuf,
    /// Directory of reference stems (one sub-directory per track).
    #[arg(long)]
    pub references: PathBuf,
    /// Length of the distortion filters allowed on the references.
    #[arg(long, default_value_t = DEFAULT_FILTER_LENGTH)]
    pub filter_length: usize,
    /// Row label in comparison tables (default: estimates directory name).
    #[arg(long)]
    pub label: Option<String>,
    #[arg(long, default_value_t = 16_000)]
    pub sample_rate: u32,
    /// Output directory for report.json and report.csv.
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Evaluation reports (JSON).
    #[arg(required = true)]
    pub reports: Vec<PathBuf>,
    /// Comparison CSV to write.
    #[arg(long)]
    pub output: PathBuf,
}

/// Parses the process arguments, runs the command, and returns the exit code.
pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let level = if cli.verbose { "info" } else { "warn" };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            error!("{e}");
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::config("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Internal(e.to_string()))?;
    }
    match cli.command {
        Command::Inspect(a) => inspect(&a),
        Command::Mix(a) => mix(&a),
        Command::Train(a) => train_cmd(&a),
        Command::Separate(a) => separate(&a),
        Command::Evaluate(a) => evaluate(&a),
        Command::Report(a) => report(&a),
    }
}

/// One line of `inspect` output.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InspectRow {
    pub stacks: usize,
    pub filters: usize,
    pub dilation_depth: usize,
    pub num_outputs: usize,
    pub parameters: usize,
    pub receptive_field_samples: usize,
    pub receptive_field_ms: f64,
    pub target_field_samples: usize,
    pub target_field_ms: f64,
}

impl InspectRow {
    pub fn new(cfg: &ModelConfig) -> Self {
        Self {
            stacks: cfg.stacks,
            filters: cfg.filters,
            dilation_depth: cfg.dilation_depth,
            num_outputs: cfg.num_outputs,
            parameters: cfg.parameter_count(),
            receptive_field_samples: cfg.receptive_field(),
            receptive_field_ms: cfg.receptive_field_ms(),
            target_field_samples: cfg.target_field,
            target_field_ms: cfg.target_field_ms(),
        }
    }

    /// Fixed-width table line; durations are rounded to whole milliseconds.
    pub fn line(&self) -> String {
        format!(
            "{:>6} {:>7} {:>11} {:>8.2}M   {} samples / {} ms   {} samples / {} ms",
            self.stacks,
            self.filters,
            self.parameters,
            self.parameters as f64 / 1e6,
            self.receptive_field_samples,
            self.receptive_field_ms.round(),
            self.target_field_samples,
            self.target_field_ms.round(),
        )
    }
}

pub const REFERENCE_CONFIGS: [(usize, usize); 5] = [(1, 512), (2, 256), (3, 128), (4, 64), (5, 32)];

/// Rows printed by `inspect --table1`.
pub fn reference_rows() -> Vec<InspectRow> {
    REFERENCE_CONFIGS
        .iter()
        .map(|&(n, k)| InspectRow::new(&ModelConfig::new(n, k, 3)))
        .collect()
}

pub const INSPECT_HEADER: &str = "stacks filters  parameters             receptive field          target field";

fn inspect(a: &InspectArgs) -> Result<()> {
    let rows = if a.table1 {
        reference_rows()
    } else {
        let mut cfg = match &a.config {
            Some(p) => RunConfig::load(p)?.model,
            None => ModelConfig::default(),
        };
        if let Some(v) = a.stacks {
            cfg.stacks = v;
        }
        if let Some(v) = a.filters {
            cfg.filters = v;
        }
        if let Some(v) = a.outputs {
            cfg.num_outputs = v;
        }
        if let Some(v) = a.target_field {
            cfg.target_field = v;
        }
        cfg.validate()?;
        vec![InspectRow::new(&cfg)]
    };
    println!("{INSPECT_HEADER}");
    for r in &rows {
        println!("{}", r.line());
    }
    if let Some(path) = &a.json {
        let json = serde_json::to_string_pretty(&rows).map_err(|e| Error::Internal(e.to_string()))?;
        atomic_write(path, json.as_bytes())?;
    }
    Ok(())
}

fn mix(a: &MixArgs) -> Result<()> {
    let dirs = track_dirs(&a.dataset)?;
    if dirs.is_empty() {
        return Err(Error::dataset(format!("no track directories under {}", a.dataset.display())));
    }
    for dir in dirs {
        let track = load_track(&dir, a.sample_rate)?;
        let summed = TrackStems::from_sources(track.name.clone(), track.sample_rate, track.sources)?;
        write_wav(dir.join("mixture.wav"), &summed.mixture, summed.sample_rate)?;
        info!("wrote {}", dir.join("mixture.wav").display());
    }
    Ok(())
}

fn manifest_path(explicit: Option<&PathBuf>, dataset: &Path) -> PathBuf {
    explicit.cloned().unwrap_or_else(|| dataset.join("dataset.json"))
}

/// `epoch,train,validation` lines, one per completed epoch.
pub fn history_csv(history: &[EpochLosses]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::Internal(e.to_string());
    w.write_record(["epoch", "train", "validation"]).map_err(io)?;
    for (i, h) in history.iter().enumerate() {
        w.write_record([i.to_string(), format!("{:e}", h.train), format!("{:e}", h.validation)])
            .map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Internal(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Internal(e.to_string()))
}

fn train_cmd(a: &TrainArgs) -> Result<()> {
    let cfg = RunConfig::load(&a.config)?;
    let dataset = a
        .dataset
        .clone()
        .or(cfg.dataset.clone())
        .ok_or_else(|| Error::config("no dataset given (set `dataset` or pass --dataset)"))?;
    let output = a
        .output
        .clone()
        .or(cfg.output.clone())
        .ok_or_else(|| Error::config("no output directory given (set `output` or pass --output)"))?;
    let manifest = DatasetManifest::load(manifest_path(a.manifest.as_ref().or(cfg.manifest.as_ref()), &dataset))?;
    let rate = cfg.model.sample_rate;
    let train_tracks = load_tracks(&dataset, &manifest.train, rate)?;
    let validation_tracks = load_tracks(&dataset, &manifest.validation, rate)?;
    fs::create_dir_all(&output)?;

    let model = Model::new(cfg.model.clone(), cfg.train.seed)?;
    info!(
        "training {} parameters on {} tracks ({} validation)",
        model.parameter_count(),
        train_tracks.len(),
        validation_tracks.len()
    );
    match train(model, &train_tracks, &validation_tracks, &cfg.train, &cfg.loss, &cfg.sampler) {
        Ok(outcome) => {
            if outcome.sampler_fallbacks > 0 {
                warn!(
                    "{} voiced draws fell back to uniform sampling (tracks without voiced regions)",
                    outcome.sampler_fallbacks
                );
            }
            outcome.best.save(output.join("best.wssm"))?;
            outcome.last.save(output.join("last.wssm"))?;
            atomic_write(&output.join("history.csv"), history_csv(&outcome.history)?.as_bytes())?;
            println!(
                "best epoch {} of {} (validation {:.6})",
                outcome.best_epoch,
                outcome.history.len(),
                outcome.history[outcome.best_epoch].validation
            );
            Ok(())
        }
        Err(Error::Diverged {
            step,
            reason,
            last_good,
        }) => {
            if let Some(c) = &last_good {
                c.save(output.join("last_good.wssm"))?;
                atomic_write(&output.join("history.csv"), history_csv(&c.history)?.as_bytes())?;
            }
            Err(Error::Diverged {
                step,
                reason,
                last_good,
            })
        }
        Err(e) => Err(e),
    }
}

/// Separates `mixture` and appends the subtraction-completed residual.
pub fn separate_all(model: &Model<f32>, mixture: &[f32], sample_rate: u32) -> Result<SourceEstimates> {
    let estimates = model.separate_track(mixture, sample_rate)?;
    complete_sources(mixture, &estimates, model.config().residual_name())
}

fn write_sources(dir: &Path, estimates: &SourceEstimates, sample_rate: u32) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (name, wave) in estimates.iter() {
        write_wav(dir.join(format!("{name}.wav")), wave, sample_rate)?;
    }
    Ok(())
}

fn separate(a: &SeparateArgs) -> Result<()> {
    let model = Checkpoint::load(&a.checkpoint)?.model()?;
    let rate = model.config().sample_rate;
    if let Some(input) = &a.input {
        let (mixture, file_rate) = read_wav(input)?;
        let estimates = separate_all(&model, &mixture, file_rate)?;
        return write_sources(&a.output, &estimates, rate);
    }
    let dataset = a.dataset.as_ref().ok_or_else(|| Error::config("pass --input or --dataset"))?;
    let split = a.split.as_deref().ok_or_else(|| Error::config("--dataset needs --split"))?;
    let manifest = DatasetManifest::load(manifest_path(a.manifest.as_ref(), dataset))?;
    let tracks = load_tracks(dataset, manifest.split(split)?, rate)?;
    for t in &tracks {
        let estimates = separate_all(&model, &t.mixture, t.sample_rate)?;
        write_sources(&a.output.join(&t.name), &estimates, rate)?;
        info!("separated {}", t.name);
    }
    Ok(())
}

fn read_estimates(dir: &Path, names: impl Iterator<Item = String>, rate: u32) -> Result<BTreeMap<String, Vec<f32>>> {
    names
        .map(|n| {
            let path = dir.join(format!("{n}.wav"));
            if !path.is_file() {
                return Err(Error::Report(format!("missing estimate {}", path.display())));
            }
            let (samples, file_rate) = read_wav(&path)?;
            if file_rate != rate {
                return Err(Error::Report(format!(
                    "{} is sampled at {file_rate} Hz, expected {rate} Hz",
                    path.display()
                )));
            }
            Ok((n, samples))
        })
        .collect()
}

fn evaluate(a: &EvaluateArgs) -> Result<()> {
    let tracks = if track_dirs(&a.references)?.is_empty() {
        vec![load_track(&a.references, a.sample_rate)?]
    } else {
        load_stem_directory(&a.references, a.sample_rate)?
    };
    let single = tracks.len() == 1 && track_dirs(&a.references)?.is_empty();
    let pairs: Vec<TrackPair> = tracks
        .into_iter()
        .map(|t| {
            let dir = if single { a.estimates.clone() } else { a.estimates.join(&t.name) };
            let estimates = read_estimates(&dir, t.sources.keys().cloned(), a.sample_rate)?;
            Ok(TrackPair {
                name: t.name,
                references: t.sources,
                estimates,
            })
        })
        .collect::<Result<_>>()?;
    let label = a.label.clone().unwrap_or_else(|| {
        a.estimates
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "model".into())
    });
    let report = evaluate_dataset(&label, &pairs, a.filter_length)?;
    fs::create_dir_all(&a.output)?;
    report.save_json(a.output.join("report.json"))?;
    report.save_csv(a.output.join("report.csv"))?;
    for (source, m) in &report.medians {
        println!("{source:<14} SDR {:>7.2}  SIR {:>7.2}  SAR {:>7.2}", m.sdr, m.sir, m.sar);
    }
    Ok(())
}

fn report(a: &ReportArgs) -> Result<()> {
    let reports: Vec<EvalReport> = a.reports.iter().map(EvalReport::load).collect::<Result<_>>()?;
    let csv = comparison_csv(&reports)?;
    atomic_write(&a.output, csv.as_bytes())?;
    print!("{csv}");
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inspect_line_for_four_stacks() {
        let line = InspectRow::new(&ModelConfig::new(4, 64, 3)).line();
        assert!(line.contains("8191 samples / 512 ms"), "{line}");
        assert!(line.contains("3290371"), "{line}");
    }

    #[test]
    fn history_layout() {
        let csv = history_csv(&[EpochLosses {
            train: 0.5,
            validation: 0.25,
        }])
        .unwrap();
        assert_eq!(csv, "epoch,train,validation\n0,5e-1,2.5e-1\n");
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
