//! Command-line interface.
//!
//! Subcommands cover the whole pipeline: corpus synthesis, mixture/manifest
//! generation, training, enhancement, evaluation, and the occlusion and
//! silent-region experiment harnesses.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
//! Errors are reported as a single machine-parsable stderr line of the form
//! `avse: error: <category>: <message>`.

use crate::dsp::{self, StftConfig};
use crate::io::manifest::{Manifest, Split};
use crate::io::{checkpoint as ckpt_io, lips as lips_io, wav as wav_io};
use crate::mask::{self, MaskConfig, SilentRegionMse};
use crate::metrics::{evaluate_manifest, EvalOptions, SystemKind};
use crate::mix::{self, CleanClipEntry, NoiseEntry, SnrGrid};
use crate::model::{
    self, Checkpoint, EnhanceMode, Hyper, LipSequence, ModelConfig, PresetName, Variant,
};
use crate::synth;
use clap::{Args, Parser, Subcommand, ValueEnum};
use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Debug)]
enum CliError {
    Usage(String),
    Data(String),
    Numeric(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }

    fn category(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Data(_) => "data",
            CliError::Numeric(_) => "numeric",
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Numeric(m) => m,
        }
    }
}

fn one_line(s: impl std::fmt::Display) -> String {
    s.to_string().replace('\n', "; ")
}

impl From<crate::io::wav::WavError> for CliError {
    fn from(e: crate::io::wav::WavError) -> Self {
        CliError::Data(one_line(e))
    }
}

impl From<crate::io::lips::LipsIoError> for CliError {
    fn from(e: crate::io::lips::LipsIoError) -> Self {
        CliError::Data(one_line(e))
    }
}

impl From<crate::io::checkpoint::CheckpointError> for CliError {
    fn from(e: crate::io::checkpoint::CheckpointError) -> Self {
        CliError::Data(one_line(e))
    }
}

impl From<crate::io::manifest::ManifestError> for CliError {
    fn from(e: crate::io::manifest::ManifestError) -> Self {
        CliError::Data(one_line(e))
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(one_line(e))
    }
}

impl From<crate::mix::MixError> for CliError {
    fn from(e: crate::mix::MixError) -> Self {
        use crate::mix::MixError::*;
        match e {
            BadGrid(_) | EmptyInput(_) => CliError::Usage(one_line(e)),
            ZeroEnergy(_) => CliError::Numeric(one_line(e)),
            _ => CliError::Data(one_line(e)),
        }
    }
}

impl From<crate::model::ModelError> for CliError {
    fn from(e: crate::model::ModelError) -> Self {
        use crate::model::ModelError::*;
        match e {
            Autodiff(_) => CliError::Numeric(one_line(e)),
            StreamingNeedsCausal => CliError::Usage(one_line(e)),
            _ => CliError::Data(one_line(e)),
        }
    }
}

impl From<crate::metrics::MetricError> for CliError {
    fn from(e: crate::metrics::MetricError) -> Self {
        CliError::Numeric(one_line(e))
    }
}

impl From<crate::metrics::EvalError> for CliError {
    fn from(e: crate::metrics::EvalError) -> Self {
        use crate::metrics::EvalError::*;
        match e {
            MissingCheckpoint | UnknownSystem(_) => CliError::Usage(one_line(e)),
            Metric(m) => CliError::Numeric(one_line(m)),
            Mix(m) => m.into(),
            Model(m) => m.into(),
            Baseline(b) => CliError::Numeric(one_line(b)),
            other => CliError::Data(one_line(other)),
        }
    }
}

impl From<crate::baselines::BaselineError> for CliError {
    fn from(e: crate::baselines::BaselineError) -> Self {
        CliError::Numeric(one_line(e))
    }
}

impl From<crate::mask::MaskError> for CliError {
    fn from(e: crate::mask::MaskError) -> Self {
        CliError::Numeric(one_line(e))
    }
}

impl From<crate::dsp::DspError> for CliError {
    fn from(e: crate::dsp::DspError) -> Self {
        CliError::Data(one_line(e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PresetArg {
    /// 622-bin configuration with the large fusion stack.
    #[value(alias = "paper")]
    Full,
    /// 257-bin configuration trainable on a laptop CPU.
    Desk,
}

impl PresetArg {
    fn name(self) -> PresetName {
        match self {
            PresetArg::Full => PresetName::Full,
            PresetArg::Desk => PresetName::Desk,
        }
    }

    fn stft(self) -> StftConfig {
        match self {
            PresetArg::Full => StftConfig::preset_full(),
            PresetArg::Desk => StftConfig::preset_desk(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum VariantArg {
    /// Audio-only.
    A,
    /// Audio-visual.
    Av,
}

impl VariantArg {
    fn variant(self) -> Variant {
        match self {
            VariantArg::A => Variant::AudioOnly,
            VariantArg::Av => Variant::AudioVisual,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Whole,
    Streaming,
}

impl ModeArg {
    fn mode(self) -> EnhanceMode {
        match self {
            ModeArg::Whole => EnhanceMode::Whole,
            ModeArg::Streaming => EnhanceMode::Streaming,
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "avse",
    about = "Audio-visual speech enhancement pipeline",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic demo corpus (clean speech-like WAVs with lip
    /// tracks, plus noise WAVs).
    SynthDemo(SynthDemoArgs),
    /// Segment clean utterances into 3-second clips and build a seeded
    /// mixture manifest over an SNR grid.
    Mix(MixArgs),
    /// Train a mask estimator from a manifest.
    Train(TrainArgs),
    /// Enhance one WAV with a trained checkpoint.
    Enhance(EnhanceArgs),
    /// Evaluate a system over a manifest (SI-SDR, STOI, mask accuracy).
    Evaluate(EvaluateArgs),
    /// Materialize oracle-mask enhanced signals and their metrics.
    Oracle(OracleArgs),
    /// Evaluate the model while blanking growing fractions of lip frames.
    OcclusionSweep(OcclusionArgs),
    /// Mask error of a checkpoint against the oracle in silent regions.
    SilentMse(SilentMseArgs),
}

#[derive(Args, Debug)]
struct SynthDemoArgs {
    /// Output corpus directory (creates clean/ and noise/).
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 3)]
    speakers: usize,
    /// Utterances per speaker.
    #[arg(long, default_value_t = 4)]
    utterances: usize,
    #[arg(long, default_value_t = 4)]
    noises: usize,
    /// Utterance duration in seconds.
    #[arg(long, default_value_t = 3.0)]
    duration: f64,
    /// Noise file duration in seconds.
    #[arg(long, default_value_t = 12.0)]
    noise_duration: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct MixArgs {
    /// Directory of clean utterance WAVs (with optional `<stem>.lips`).
    #[arg(long)]
    clean_dir: PathBuf,
    /// Directory of noise WAVs.
    #[arg(long)]
    noise_dir: PathBuf,
    /// Output directory for clips and the manifest.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = -12.0)]
    snr_lo: f64,
    #[arg(long, default_value_t = 9.0)]
    snr_hi: f64,
    #[arg(long, default_value_t = 3.0)]
    snr_step: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Emit one record per grid SNR for every clip instead of one draw.
    #[arg(long)]
    replicate_all_snrs: bool,
    /// Clip length in seconds.
    #[arg(long, default_value_t = 3.0)]
    clip_s: f64,
    /// Fraction of speakers held out for validation.
    #[arg(long, default_value_t = 0.1)]
    val_frac: f64,
    /// Fraction of speakers held out for testing.
    #[arg(long, default_value_t = 0.1)]
    test_frac: f64,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, value_enum, default_value_t = PresetArg::Desk)]
    preset: PresetArg,
    #[arg(long, value_enum, default_value_t = VariantArg::Av)]
    variant: VariantArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 5)]
    patience: usize,
    #[arg(long, default_value_t = 50)]
    epochs: usize,
    #[arg(long, default_value_t = 1e-4)]
    lr: f64,
    #[arg(long, default_value_t = 1)]
    batch: usize,
    /// Stop once the epoch training BCE drops below this value.
    #[arg(long)]
    stop_bce: Option<f64>,
    /// Oracle-mask local criterion in dB for the training targets.
    #[arg(long, default_value_t = 0.0)]
    lc_db: f32,
    /// Checkpoint output path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct EnhanceArgs {
    /// Noisy input WAV.
    #[arg(long = "in")]
    input: PathBuf,
    /// Lip container for audio-visual checkpoints.
    #[arg(long)]
    lips: Option<PathBuf>,
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long, value_enum, default_value_t = ModeArg::Whole)]
    mode: ModeArg,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// One of: noisy, ss, lmmse, oracle, model.
    #[arg(long)]
    system: String,
    #[arg(long)]
    ckpt: Option<PathBuf>,
    /// Per-clip CSV output path.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Aggregate JSON output path.
    #[arg(long)]
    json: Option<PathBuf>,
    /// Directory for enhanced WAVs.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Analysis preset for the oracle mask and the baselines.
    #[arg(long, value_enum, default_value_t = PresetArg::Desk)]
    preset: PresetArg,
    /// Restrict to one split (train, val, test).
    #[arg(long)]
    split: Option<String>,
    /// Oracle local criterion in dB.
    #[arg(long, default_value_t = 0.0)]
    lc_db: f32,
}

#[derive(Args, Debug)]
struct OracleArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, default_value_t = 0.0)]
    lc_db: f32,
    #[arg(long, value_enum, default_value_t = PresetArg::Desk)]
    preset: PresetArg,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    split: Option<String>,
}

#[derive(Args, Debug)]
struct OcclusionArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    ckpt: PathBuf,
    /// Comma-separated occlusion fractions, e.g. 0,0.2,0.5,1.
    #[arg(long, default_value = "0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1")]
    fractions: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// CSV output (fraction, mean SI-SDR, mean STOI).
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    split: Option<String>,
}

#[derive(Args, Debug)]
struct SilentMseArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    ckpt: PathBuf,
    /// Silence floor below the loudest frame, in dB.
    #[arg(long, default_value_t = 40.0)]
    floor_db: f32,
    #[arg(long)]
    split: Option<String>,
}

/// Entry point used by `main`; returns the process exit code.
pub fn run() -> i32 {
    run_from(std::env::args_os())
}

/// Testable entry point.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("invalid arguments");
            eprintln!("avse: error: usage: {first}");
            return 1;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("avse: error: {}: {}", e.category(), e.message());
            e.exit_code()
        }
    }
}

fn dispatch(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::SynthDemo(a) => synth_demo(a),
        Command::Mix(a) => mix_cmd(a),
        Command::Train(a) => train_cmd(a),
        Command::Enhance(a) => enhance_cmd(a),
        Command::Evaluate(a) => evaluate_cmd(a),
        Command::Oracle(a) => oracle_cmd(a),
        Command::OcclusionSweep(a) => occlusion_cmd(a),
        Command::SilentMse(a) => silent_mse_cmd(a),
    }
}

fn parse_split(s: &Option<String>) -> Result<Option<Split>, CliError> {
    match s.as_deref() {
        None => Ok(None),
        Some("train") => Ok(Some(Split::Train)),
        Some("val") => Ok(Some(Split::Val)),
        Some("test") => Ok(Some(Split::Test)),
        Some(other) => Err(CliError::Usage(format!("unknown split {other:?}"))),
    }
}

fn synth_demo(a: SynthDemoArgs) -> Result<(), CliError> {
    let clean_dir = a.out.join("clean");
    let noise_dir = a.out.join("noise");
    fs::create_dir_all(&clean_dir)?;
    fs::create_dir_all(&noise_dir)?;
    for spk in 0..a.speakers {
        for utt in 0..a.utterances {
            let seed = a.seed ^ ((spk as u64) << 32) ^ utt as u64;
            let (wave, envelope) = synth::speech_with_envelope(seed, a.duration, 16000);
            let lips = synth::lips_for_envelope(&envelope, seed ^ 0x11ce);
            let stem = format!("spk{spk}_utt{utt:03}");
            wav_io::write_wav(&clean_dir.join(format!("{stem}.wav")), &wave)?;
            lips_io::write_lips(&clean_dir.join(format!("{stem}.lips")), &lips)?;
        }
    }
    let kinds = synth::NoiseKind::all();
    for n in 0..a.noises {
        let kind = kinds[n % kinds.len()];
        let wave = synth::noise_like(kind, a.seed ^ 0xBEEF ^ n as u64, a.noise_duration, 16000);
        wav_io::write_wav(&noise_dir.join(format!("noise{n:02}.wav")), &wave)?;
    }
    println!(
        "wrote {} clean utterances and {} noises under {}",
        a.speakers * a.utterances,
        a.noises,
        a.out.display()
    );
    Ok(())
}

fn wav_stems(dir: &Path) -> Result<Vec<(String, PathBuf)>, CliError> {
    let mut out: Vec<(String, PathBuf)> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .map(|e| e.eq_ignore_ascii_case("wav"))
                .unwrap_or(false)
        })
        .map(|p| {
            (
                p.file_stem()
                    .unwrap_or_default()
                    .to_string_lossy()
                    .into_owned(),
                p,
            )
        })
        .collect();
    out.sort();
    if out.is_empty() {
        return Err(CliError::Data(format!(
            "no .wav files found in {}",
            dir.display()
        )));
    }
    Ok(out)
}

/// Speaker label: the stem up to the first underscore.
fn speaker_of(stem: &str) -> &str {
    stem.split('_').next().unwrap_or(stem)
}

/// Deterministic speaker-disjoint split assignment: sorted speakers, the
/// tail going to test, then validation.
fn assign_splits(speakers: &[String], val_frac: f64, test_frac: f64) -> BTreeMap<String, Split> {
    let n = speakers.len();
    let n_test = if test_frac > 0.0 && n >= 3 {
        ((n as f64 * test_frac).round() as usize).max(1)
    } else {
        0
    };
    let n_val = if val_frac > 0.0 && n >= 3 {
        ((n as f64 * val_frac).round() as usize).max(1)
    } else {
        0
    };
    let mut map = BTreeMap::new();
    for (i, s) in speakers.iter().enumerate() {
        let split = if i >= n - n_test {
            Split::Test
        } else if i >= n - n_test - n_val {
            Split::Val
        } else {
            Split::Train
        };
        map.insert(s.clone(), split);
    }
    map
}

fn mix_cmd(a: MixArgs) -> Result<(), CliError> {
    let grid = SnrGrid::new(a.snr_lo, a.snr_hi, a.snr_step)?;
    let clips_dir = a.out.join("clips");
    fs::create_dir_all(&clips_dir)?;

    let utterances = wav_stems(&a.clean_dir)?;
    let mut speakers: Vec<String> = utterances
        .iter()
        .map(|(stem, _)| speaker_of(stem).to_string())
        .collect();
    speakers.sort();
    speakers.dedup();
    let split_of = assign_splits(&speakers, a.val_frac, a.test_frac);
    if speakers.len() < 3 && (a.val_frac > 0.0 || a.test_frac > 0.0) {
        eprintln!(
            "warning: only {} speaker(s); all clips assigned to the training split",
            speakers.len()
        );
    }

    let mut entries = Vec::new();
    for (stem, path) in &utterances {
        let wave = wav_io::read_wav(path)?;
        let wave = if wave.sample_rate() != 16000 {
            dsp::resample(&wave, 16000)?
        } else {
            wave
        };
        let lips_path = path.with_extension("lips");
        let has_lips = lips_path.exists();
        let lips = if has_lips {
            lips_io::read_lips(&lips_path)?
        } else {
            LipSequence::blank(wave.len().div_ceil(640))
        };
        let clips = mix::segment_clips(&wave, &lips, a.clip_s)?;
        let split = *split_of.get(speaker_of(stem)).unwrap_or(&Split::Train);
        for (k, clip) in clips.into_iter().enumerate() {
            let clip_stem = format!("{stem}_c{k:02}");
            let wav_rel = PathBuf::from("clips").join(format!("{clip_stem}.wav"));
            wav_io::write_wav(&a.out.join(&wav_rel), &clip.audio)?;
            let lips_rel = if has_lips {
                let rel = PathBuf::from("clips").join(format!("{clip_stem}.lips"));
                lips_io::write_lips(&a.out.join(&rel), &clip.lips)?;
                Some(rel)
            } else {
                None
            };
            entries.push(CleanClipEntry {
                clip_id: clip_stem,
                clean_path: wav_rel,
                lips_path: lips_rel,
                pad_samples: clip.pad_samples as u64,
                split,
            });
        }
    }

    let noise_files = wav_stems(&a.noise_dir)?;
    let mut noises = Vec::new();
    let noise_out = a.out.join("noise");
    fs::create_dir_all(&noise_out)?;
    for (stem, path) in &noise_files {
        let wave = wav_io::read_wav(path)?;
        let wave = if wave.sample_rate() != 16000 {
            dsp::resample(&wave, 16000)?
        } else {
            wave
        };
        let rel = PathBuf::from("noise").join(format!("{stem}.wav"));
        wav_io::write_wav(&a.out.join(&rel), &wave)?;
        noises.push(NoiseEntry {
            path: rel,
            len_samples: wave.len() as u64,
        });
    }
    // noise disjointness across splits when there are enough files
    let (train_noises, val_noises, test_noises) = if noises.len() >= 3 {
        let test = vec![noises[noises.len() - 1].clone()];
        let val = vec![noises[noises.len() - 2].clone()];
        let train = noises[..noises.len() - 2].to_vec();
        (train, val, test)
    } else {
        eprintln!("warning: fewer than 3 noise files; splits share noises");
        (noises.clone(), noises.clone(), noises)
    };

    let mut records = Vec::new();
    for (i, (split, pool)) in [
        (Split::Train, &train_noises),
        (Split::Val, &val_noises),
        (Split::Test, &test_noises),
    ]
    .iter()
    .enumerate()
    {
        let split_entries: Vec<CleanClipEntry> = entries
            .iter()
            .filter(|e| e.split == *split)
            .cloned()
            .collect();
        if split_entries.is_empty() {
            continue;
        }
        let m = mix::build_manifest(
            &split_entries,
            pool,
            &grid,
            a.seed.wrapping_add(i as u64),
            a.replicate_all_snrs,
        )?;
        records.extend(m.records);
    }
    let manifest = Manifest::new(records)?;
    let manifest_path = a.out.join("manifest.jsonl");
    manifest.write_file(&manifest_path)?;
    println!(
        "wrote {} manifest records to {}",
        manifest.len(),
        manifest_path.display()
    );
    Ok(())
}

/// Loads and prepares every manifest record into a training clip.
fn load_training_clips(
    manifest: &Manifest,
    base: &Path,
    cfg: &ModelConfig,
    mask_cfg: &MaskConfig,
) -> Result<Vec<model::TrainingClip>, CliError> {
    let mut cache: BTreeMap<PathBuf, crate::dsp::Waveform> = BTreeMap::new();
    let mut read = |p: PathBuf| -> Result<crate::dsp::Waveform, CliError> {
        if let Some(w) = cache.get(&p) {
            return Ok(w.clone());
        }
        let w = wav_io::read_wav(&p)?;
        cache.insert(p, w.clone());
        Ok(w)
    };
    let mut clips = Vec::new();
    for r in &manifest.records {
        let clean = read(base.join(&r.clean_path))?;
        let noise = read(base.join(&r.noise_path))?;
        let mixture = mix::mix_at_snr(&clean, &noise, r.noise_offset, r.snr_db)?;
        let lips = match &r.lips_path {
            Some(p) => Some(lips_io::read_lips(&base.join(p))?),
            None => None,
        };
        clips.push(model::train::prepare_training_clip(
            r.clip_id.clone(),
            r.split,
            &mixture,
            lips.as_ref(),
            cfg,
            mask_cfg,
        )?);
    }
    Ok(clips)
}

fn train_cmd(a: TrainArgs) -> Result<(), CliError> {
    let manifest = Manifest::read_file(&a.manifest)?;
    let base = a.manifest.parent().unwrap_or(Path::new(".")).to_path_buf();
    let cfg = ModelConfig::by_name(a.preset.name(), a.variant.variant());
    let mask_cfg = MaskConfig {
        lc_db: a.lc_db,
        ..MaskConfig::default()
    };
    let clips = load_training_clips(&manifest, &base, &cfg, &mask_cfg)?;
    let hyper = Hyper {
        lr: a.lr,
        batch: a.batch,
        max_epochs: a.epochs,
        patience: a.patience,
        seed: a.seed,
        stop_at_train_bce: a.stop_bce,
    };
    let outcome = model::train_on_clips(&cfg, &clips, &hyper, |s| {
        println!(
            "epoch {:3}  train_bce {:.5}  val_bce {:.5}",
            s.epoch, s.train_bce, s.val_bce
        );
    })?;
    for w in &outcome.warnings {
        eprintln!("warning: {w}");
    }
    ckpt_io::write_checkpoint(&a.out, &outcome.checkpoint)?;
    println!(
        "best epoch {} (val_bce {:.5}); checkpoint written to {}",
        outcome.checkpoint.meta.epoch,
        outcome.checkpoint.meta.best_val_loss.unwrap_or(f64::NAN),
        a.out.display()
    );
    Ok(())
}

fn enhance_cmd(a: EnhanceArgs) -> Result<(), CliError> {
    let ckpt = ckpt_io::read_checkpoint(&a.ckpt)?;
    let wave = wav_io::read_wav(&a.input)?;
    let wave = if wave.sample_rate() != ckpt.config.sample_rate {
        eprintln!(
            "warning: resampling input from {} Hz to {} Hz",
            wave.sample_rate(),
            ckpt.config.sample_rate
        );
        dsp::resample(&wave, ckpt.config.sample_rate)?
    } else {
        wave
    };
    let lips = match &a.lips {
        Some(p) => Some(lips_io::read_lips(p)?),
        None => None,
    };
    let out = model::enhance(&wave, lips.as_ref(), &ckpt, a.mode.mode())?;
    for w in &out.warnings {
        eprintln!("warning: {w}");
    }
    let clipped = wav_io::write_wav(&a.out, &out.audio)?;
    if clipped > 0 {
        eprintln!("warning: {clipped} output samples clipped to full scale");
    }
    println!("enhanced {} -> {}", a.input.display(), a.out.display());
    Ok(())
}

fn eval_options(
    manifest_path: &Path,
    preset: PresetArg,
    lc_db: f32,
    ckpt: Option<Checkpoint>,
    out_dir: Option<PathBuf>,
    split: Option<Split>,
) -> EvalOptions {
    let base = manifest_path
        .parent()
        .unwrap_or(Path::new("."))
        .to_path_buf();
    EvalOptions {
        stft: preset.stft(),
        mask_cfg: MaskConfig {
            lc_db,
            ..MaskConfig::default()
        },
        checkpoint: ckpt,
        base_dir: base,
        outputs_dir: out_dir,
        split,
        occlusion: None,
        mode: EnhanceMode::Whole,
    }
}

fn write_report(
    report: &crate::metrics::MetricReport,
    csv: &Option<PathBuf>,
    json: &Option<PathBuf>,
) -> Result<(), CliError> {
    if let Some(p) = csv {
        fs::write(p, report.csv())?;
    }
    if let Some(p) = json {
        fs::write(p, report.aggregate_json())?;
    }
    Ok(())
}

fn evaluate_cmd(a: EvaluateArgs) -> Result<(), CliError> {
    let manifest = Manifest::read_file(&a.manifest)?;
    let system = SystemKind::parse(&a.system).map_err(CliError::from)?;
    let ckpt = match &a.ckpt {
        Some(p) => Some(ckpt_io::read_checkpoint(p)?),
        None => None,
    };
    let opts = eval_options(
        &a.manifest,
        a.preset,
        a.lc_db,
        ckpt,
        a.out_dir.clone(),
        parse_split(&a.split)?,
    );
    let report = evaluate_manifest(&manifest, system, &opts)?;
    write_report(&report, &a.report, &a.json)?;
    print!("{}", summarize(&report));
    Ok(())
}

fn summarize(report: &crate::metrics::MetricReport) -> String {
    let mut out = String::new();
    for row in report.aggregate() {
        let _ = writeln!(
            out,
            "{:>7}  snr {:>6.1} dB  clips {:>4}  si_sdr {:>7.2} dB  stoi {:.4}",
            row.system, row.snr_db, row.count, row.mean_si_sdr_db, row.mean_stoi
        );
    }
    out
}

fn oracle_cmd(a: OracleArgs) -> Result<(), CliError> {
    let manifest = Manifest::read_file(&a.manifest)?;
    let opts = eval_options(
        &a.manifest,
        a.preset,
        a.lc_db,
        None,
        a.out_dir.clone(),
        parse_split(&a.split)?,
    );
    let report = evaluate_manifest(&manifest, SystemKind::Oracle, &opts)?;
    write_report(&report, &a.report, &None)?;
    print!("{}", summarize(&report));
    Ok(())
}

fn occlusion_cmd(a: OcclusionArgs) -> Result<(), CliError> {
    let manifest = Manifest::read_file(&a.manifest)?;
    let ckpt = ckpt_io::read_checkpoint(&a.ckpt)?;
    let fractions: Vec<f64> = a
        .fractions
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Usage(format!("bad fraction {t:?}")))
        })
        .collect::<Result<_, _>>()?;
    if fractions.iter().any(|f| !(0.0..=1.0).contains(f)) {
        return Err(CliError::Usage("fractions must lie in [0, 1]".into()));
    }

    let mut csv = String::from("fraction,clips,mean_si_sdr_db,mean_stoi,mean_mask_accuracy\n");
    for &fraction in &fractions {
        let mut opts = eval_options(
            &a.manifest,
            PresetArg::Desk,
            0.0,
            Some(ckpt.clone()),
            None,
            parse_split(&a.split)?,
        );
        opts.occlusion = Some((fraction, a.seed));
        let report = evaluate_manifest(&manifest, SystemKind::Model, &opts)?;
        let n = report.records.len().max(1);
        let si = report.records.iter().map(|r| r.si_sdr_db).sum::<f64>() / n as f64;
        let st = report.records.iter().map(|r| r.stoi).sum::<f64>() / n as f64;
        let acc = report
            .records
            .iter()
            .filter_map(|r| r.mask_accuracy)
            .sum::<f64>()
            / n as f64;
        let _ = writeln!(
            csv,
            "{fraction},{},{si:.4},{st:.6},{acc:.6}",
            report.records.len()
        );
        println!(
            "fraction {fraction:>5.2}  clips {:>4}  si_sdr {si:>7.2} dB  stoi {st:.4}",
            report.records.len()
        );
    }
    if let Some(p) = &a.report {
        fs::write(p, csv)?;
    }
    Ok(())
}

fn silent_mse_cmd(a: SilentMseArgs) -> Result<(), CliError> {
    let manifest = Manifest::read_file(&a.manifest)?;
    let base = a.manifest.parent().unwrap_or(Path::new(".")).to_path_buf();
    let ckpt = ckpt_io::read_checkpoint(&a.ckpt)?;
    let split = parse_split(&a.split)?;
    let stft = ckpt.config.stft().map_err(CliError::from)?;

    let mut total = 0.0f64;
    let mut with_silence = 0usize;
    let mut clips = 0usize;
    for r in &manifest.records {
        if split.is_some_and(|s| s != r.split) {
            continue;
        }
        clips += 1;
        let clean = wav_io::read_wav(&base.join(&r.clean_path))?;
        let noise = wav_io::read_wav(&base.join(&r.noise_path))?;
        let mixture = mix::mix_at_snr(&clean, &noise, r.noise_offset, r.snr_db)?;
        let lips = match &r.lips_path {
            Some(p) => Some(lips_io::read_lips(&base.join(p))?),
            None => None,
        };
        let out = model::estimate_mask(&mixture.mixture, lips.as_ref(), &ckpt, EnhanceMode::Whole)?;
        let frames = out.mask.dim().0;
        let clean_spec = dsp::stft(&mixture.clean, &stft, Some(frames))?;
        let noise_spec = dsp::stft(&mixture.scaled_noise, &stft, Some(frames))?;
        let ibm = mask::ideal_binary_mask(&clean_spec, &noise_spec, &MaskConfig::default())?;
        match mask::silent_region_mask_mse(&out.mask, &ibm, &clean_spec, a.floor_db)? {
            SilentRegionMse::Mse { mse, .. } => {
                total += mse;
                with_silence += 1;
            }
            SilentRegionMse::NoSilentFrames => {}
        }
    }
    if with_silence == 0 {
        println!("{{\"clips\": {clips}, \"clips_with_silence\": 0, \"mean_silent_mse\": null}}");
    } else {
        println!(
            "{{\"clips\": {clips}, \"clips_with_silence\": {with_silence}, \"mean_silent_mse\": {:.6}}}",
            total / with_silence as f64
        );
    }
    Ok(())
}
