use std::ffi::OsString;
use std::io::Write as _;
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use super::server::{serve, AppState};
use super::session::Limits;
use super::AppError;
use crate::diagnostics::{run_suite, SUITES};
use crate::ingest::{augment, export_midi, export_musicxml, parse_melody, Corpus, VocalRanges, DEFAULT_TRAIN_FRACTION};
use crate::models::{train, Hyperparameters, ModelKind, ModelSet, DEFAULT_DELTA_T};
use crate::sampler::{generate, reharmonize, ConstraintSet, RunStats, SamplerConfig};
use crate::score::{Chorale, Encoding, MetadataSeq, NoteToken, Pitch, TICKS_PER_BAR};

#[derive(Debug, Parser)]
#[command(name = "chorale", version, about = "Four-part chorale generation by pseudo-Gibbs sampling")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Read a directory of MusicXML scores, split by source and augment by transposition.
    Ingest {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_TRAIN_FRACTION)]
        train_fraction: f64,
    },
    /// Fit per-voice conditionals on an ingested corpus.
    Train {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        model: ModelKind,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_DELTA_T)]
        delta_t: usize,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long)]
        hidden: Option<usize>,
        /// Training report path; defaults to the model path with extension `report.json`.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Sample a chorale from scratch; writes MusicXML to `--out` and MIDI beside it.
    Sample {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        length: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        iterations: Option<usize>,
        /// Fermata on the last beat of every N-th bar.
        #[arg(long)]
        fermata_every: Option<usize>,
        #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
        key_signature: i8,
    },
    /// Keep the first part of a MusicXML file as soprano and sample the other voices.
    Reharmonize {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        melody: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        iterations: Option<usize>,
    },
    /// Run the verification suite on toy networks; exits nonzero on any failure.
    Diagnose {
        #[arg(long, default_value = "all", value_parser = clap::builder::PossibleValuesParser::new(SUITES))]
        suite: String,
    },
    /// Start the HTTP session service.
    Serve {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
        #[arg(long, default_value_t = Limits::default().max_iterations)]
        max_iterations: usize,
    },
}

fn read(path: &Path) -> Result<Vec<u8>, AppError> {
    std::fs::read(path).map_err(|e| AppError::io(path, e))
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), AppError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| AppError::io(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| AppError::io(path, e))
}

fn load_model(path: &Path) -> Result<ModelSet, AppError> {
    Ok(ModelSet::load(&read(path)?)?)
}

fn midi_path(out: &Path) -> PathBuf {
    out.with_extension("mid")
}

fn write_score(out: &Path, chorale: &Chorale) -> Result<PathBuf, AppError> {
    write(out, &export_musicxml(chorale))?;
    let mid = midi_path(out);
    write(&mid, &export_midi(chorale))?;
    Ok(mid)
}

fn to_model_encoding(tokens: Vec<NoteToken>, encoding: Encoding) -> Vec<NoteToken> {
    match encoding {
        Encoding::Spelled => tokens,
        Encoding::Midi => tokens
            .into_iter()
            .map(|t| match t {
                NoteToken::Pitch(p @ Pitch::Spelled(_)) => NoteToken::Pitch(Pitch::Midi(p.midi().clamp(0, 127) as u8)),
                t => t,
            })
            .collect(),
    }
}

/// Metadata for free generation: one key signature throughout, and with
/// `fermata_every = Some(n)` a fermata on the last beat of every n-th bar.
pub fn sample_metadata(length: usize, fermata_every: Option<usize>, key_signature: i8) -> MetadataSeq {
    let mut md = MetadataSeq::neutral(length).with_key_signature(vec![key_signature; length]);
    if let Some(n) = fermata_every.filter(|n| *n > 0) {
        let span = n * TICKS_PER_BAR;
        for (t, f) in md.fermata.iter_mut().enumerate() {
            *f = t % span >= span - 4;
        }
    }
    md
}

/// Reharmonizes the first part of a MusicXML document. Fermatas and key
/// signatures come from the document; a melody without a notated key is
/// taken as key signature 0.
pub fn reharmonize_musicxml(models: &ModelSet, melody: &[u8], config: &SamplerConfig) -> Result<(Chorale, RunStats), AppError> {
    let (tokens, fermata, keys) = parse_melody(melody)?;
    let len = tokens.len();
    let keys = if keys.is_empty() { vec![0; len] } else { keys };
    let md = MetadataSeq::neutral(len).with_fermata(fermata).with_key_signature(keys);
    let tokens = to_model_encoding(tokens, models.encoding());
    Ok(reharmonize(models, &tokens, &md, config)?)
}

fn emit(out: &mut dyn std::io::Write, value: serde_json::Value) -> Result<(), AppError> {
    writeln!(out, "{value}").map_err(|e| AppError::io("<stdout>", e))
}

/// Executes a parsed command, writing results to `out`.
pub fn run(cli: Cli, out: &mut dyn std::io::Write) -> Result<(), AppError> {
    match cli.command {
        Command::Ingest {
            input,
            out: dir,
            seed,
            train_fraction,
        } => {
            if !(0.0..=1.0).contains(&train_fraction) {
                return Err(AppError::Invalid(vec![super::Violation::new("train_fraction", "must be in [0, 1]")]));
            }
            let (corpus, rejected) = Corpus::load_dir(&input)?;
            for (file, e) in &rejected {
                eprintln!("{}", json!({"warning": {"file": file, "message": e.to_string()}}));
            }
            let corpus = corpus.with_split(seed, train_fraction);
            let ranges = VocalRanges::from_corpus(&corpus)
                .ok_or_else(|| AppError::Invalid(vec![super::Violation::new("in", "no readable four-voice scores")]))?;
            let augmented = augment(&corpus, &ranges);
            augmented.write_dir(&dir)?;
            emit(
                out,
                json!({"rejected": rejected.len(), "ranges": ranges, "stats": augmented.stats(), "out": dir}),
            )
        }
        Command::Train {
            corpus,
            model,
            out: path,
            delta_t,
            epochs,
            lr,
            seed,
            batch_size,
            hidden,
            report,
        } => {
            let corpus = Corpus::read_dir(&corpus)?;
            let mut hp = Hyperparameters::defaults_for(model);
            hp.epochs = epochs.unwrap_or(hp.epochs);
            hp.learning_rate = lr.unwrap_or(hp.learning_rate);
            hp.seed = seed.unwrap_or(hp.seed);
            hp.batch_size = batch_size.unwrap_or(hp.batch_size);
            hp.hidden = hidden.unwrap_or(hp.hidden);
            let (models, rep) = train(model, &corpus, delta_t, &hp)?;
            write(&path, &models.save())?;
            let report_path = report.unwrap_or_else(|| path.with_extension("report.json"));
            write(&report_path, &serde_json::to_vec_pretty(&rep)?)?;
            let last = rep.last();
            emit(
                out,
                json!({
                    "model": path,
                    "report": report_path,
                    "epochs": last.epoch,
                    "uniform_cross_entropy": rep.uniform_cross_entropy,
                    "train_cross_entropy": last.train.cross_entropy,
                    "validation_cross_entropy": last.validation.map(|v| v.cross_entropy),
                }),
            )
        }
        Command::Sample {
            model,
            length,
            out: path,
            seed,
            iterations,
            fermata_every,
            key_signature,
        } => {
            let models = load_model(&model)?;
            let md = sample_metadata(length, fermata_every, key_signature);
            let config = SamplerConfig {
                iterations,
                ..SamplerConfig::with_seed(seed)
            };
            let (chorale, stats) = generate(&models, &md, &ConstraintSet::new(), &config, None)?;
            let mid = write_score(&path, &chorale)?;
            emit(out, json!({"musicxml": path, "midi": mid, "length": length, "seed": seed, "stats": stats}))
        }
        Command::Reharmonize {
            model,
            melody,
            out: path,
            seed,
            iterations,
        } => {
            let models = load_model(&model)?;
            let config = SamplerConfig {
                iterations,
                ..SamplerConfig::with_seed(seed)
            };
            let (chorale, stats) = reharmonize_musicxml(&models, &read(&melody)?, &config)?;
            let mid = write_score(&path, &chorale)?;
            emit(out, json!({"musicxml": path, "midi": mid, "length": chorale.len(), "seed": seed, "stats": stats}))
        }
        Command::Diagnose { suite } => {
            let records = run_suite(&suite)?;
            for r in &records {
                writeln!(out, "{r}").map_err(|e| AppError::io("<stdout>", e))?;
            }
            match records.iter().filter(|r| r.failed()).count() {
                0 => Ok(()),
                n => Err(AppError::ChecksFailed(n)),
            }
        }
        Command::Serve {
            model,
            port,
            host,
            max_iterations,
        } => {
            let models = load_model(&model)?;
            let limits = Limits {
                max_iterations,
                ..Limits::default()
            };
            let state = AppState::new(models, limits);
            let rt = tokio::runtime::Runtime::new().map_err(|e| AppError::io("<runtime>", e))?;
            rt.block_on(serve(state, SocketAddr::new(host, port)))
        }
    }
}

/// Parses `args`, runs, and reports failures as an error record on stderr.
pub fn main_with(args: impl IntoIterator<Item = impl Into<OsString> + Clone>) -> ExitCode {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let record = json!({"error": {"kind": "usage", "message": e.to_string().trim_end()}});
            eprintln!("{record}");
            return ExitCode::from(2);
        }
    };
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    let result = run(cli, &mut lock);
    let _ = lock.flush();
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", serde_json::to_string(&e.record()).unwrap_or_else(|_| e.to_string()));
            ExitCode::FAILURE
        }
    }
}

pub fn main() -> ExitCode {
    main_with(std::env::args_os())
}
