//! Batch command-line frontend: train codebooks, encode/decode files,
//! score reference/degraded pairs, and compute reconstruction losses.
//!
//! Exit codes: 0 success, 1 validation error, 2 data/format error.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use rvqcodec::audio::{read_wav, resample, AudioBuffer, WavEncoding};
use rvqcodec::codec::{
    load_model, load_stream, save_model, save_stream, train_codec, training_report, CodecConfig,
};
use rvqcodec::losses::{multi_scale_mel_loss, time_domain_loss, NormKind, ScaleSet};
use rvqcodec::metrics::{evaluate_pair, EvalConfig, MetricId, MetricValue};
use rvqcodec::quantizer::sample_bitrate;
use rvqcodec::Sample;

const EXIT_VALIDATION: u8 = 1;
const EXIT_FORMAT: u8 = 2;
const JOBS_ENV: &str = "RVQCODEC_JOBS";

/// An error plus the process exit code it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

type CmdResult<T = ()> = Result<T, Failure>;

trait IntoFailure<T> {
    fn or_validation(self) -> CmdResult<T>;
    /// Classify by the underlying codec error kind.
    fn or_classified(self) -> CmdResult<T>;
}

fn classify(error: &rvqcodec::Error) -> u8 {
    use rvqcodec::Error::*;
    match error {
        BadMagic { .. } | UnsupportedVersion(_) | Truncated(_) | CorruptCodes(_)
        | HeaderMismatch(_) | NotWave(_) | UnsupportedEncoding(_) | TruncatedChunk(_) => {
            EXIT_FORMAT
        }
        _ => EXIT_VALIDATION,
    }
}

impl<T> IntoFailure<T> for rvqcodec::Result<T> {
    fn or_validation(self) -> CmdResult<T> {
        self.map_err(|e| Failure {
            code: EXIT_VALIDATION,
            error: e.into(),
        })
    }

    fn or_classified(self) -> CmdResult<T> {
        self.map_err(|e| Failure {
            code: classify(&e),
            error: e.into(),
        })
    }
}

fn validation(error: anyhow::Error) -> Failure {
    Failure {
        code: EXIT_VALIDATION,
        error,
    }
}

#[derive(Parser)]
#[command(
    name = "rvqcodec",
    version,
    about = "RVQ spectral codec and objective audio evaluation toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train codebooks on a corpus of WAV files
    Train(TrainArgs),
    /// Encode a WAV file to a quantized stream
    Encode(EncodeArgs),
    /// Decode a quantized stream back to a WAV file
    Decode(DecodeArgs),
    /// Score reference/degraded pairs with intrusive metrics
    Eval(EvalArgs),
    /// Compute reconstruction losses between two WAV files
    Losses(LossesArgs),
}

/// Optional JSON file mirroring flag names (underscored); flags override.
fn load_config(path: &Option<PathBuf>) -> CmdResult<serde_json::Value> {
    match path {
        None => Ok(serde_json::Value::Null),
        Some(p) => {
            let text = fs::read_to_string(p)
                .with_context(|| format!("reading config {}", p.display()))
                .map_err(validation)?;
            serde_json::from_str(&text)
                .with_context(|| format!("parsing config {}", p.display()))
                .map_err(validation)
        }
    }
}

/// flag > config file > default.
fn resolve<T: serde::de::DeserializeOwned>(
    flag: Option<T>,
    config: &serde_json::Value,
    key: &str,
    default: T,
) -> CmdResult<T> {
    if let Some(v) = flag {
        return Ok(v);
    }
    match config.get(key) {
        Some(v) => serde_json::from_value(v.clone())
            .with_context(|| format!("config key {key}"))
            .map_err(validation),
        None => Ok(default),
    }
}

fn resolve_opt<T: serde::de::DeserializeOwned>(
    flag: Option<T>,
    config: &serde_json::Value,
    key: &str,
) -> CmdResult<Option<T>> {
    if flag.is_some() {
        return Ok(flag);
    }
    match config.get(key) {
        Some(serde_json::Value::Null) | None => Ok(None),
        Some(v) => serde_json::from_value(v.clone())
            .map(Some)
            .with_context(|| format!("config key {key}"))
            .map_err(validation),
    }
}

/// Write via a temp file in the same directory so failures never leave
/// partial output behind.
fn write_atomic(path: &Path, bytes: &[u8]) -> CmdResult {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let tmp = path.with_extension(format!("tmp.{}", std::process::id()));
    let do_write = || -> std::io::Result<()> {
        if let Some(d) = dir {
            fs::create_dir_all(d)?;
        }
        fs::write(&tmp, bytes)?;
        fs::rename(&tmp, path)
    };
    do_write()
        .with_context(|| format!("writing {}", path.display()))
        .map_err(|e| {
            let _ = fs::remove_file(&tmp);
            validation(e)
        })
}

fn read_audio(path: &Path) -> CmdResult<AudioBuffer<Sample>> {
    read_wav(path).or_classified()
}

fn json_number(v: f64) -> serde_json::Value {
    serde_json::Number::from_f64(v)
        .map(serde_json::Value::Number)
        .unwrap_or(serde_json::Value::Null)
}

fn print_json(value: &serde_json::Value) {
    println!("{value}");
}

// ---------------------------------------------------------------- train

#[derive(Args)]
struct TrainArgs {
    /// Directory of training WAV files
    #[arg(long)]
    corpus: PathBuf,
    /// Output model path
    #[arg(long)]
    out: PathBuf,
    /// Cascade depth L
    #[arg(long)]
    levels: Option<usize>,
    /// Codes per codebook B
    #[arg(long)]
    codebook_size: Option<usize>,
    /// Independent dimension groups G
    #[arg(long)]
    groups: Option<usize>,
    /// EMA passes over the corpus per level
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Resample the corpus to this rate before training
    #[arg(long)]
    sample_rate: Option<u32>,
    /// Analysis window size (power of two)
    #[arg(long)]
    window: Option<usize>,
    /// Analysis hop in samples
    #[arg(long)]
    hop: Option<usize>,
    /// Mel bins per frame
    #[arg(long)]
    mels: Option<usize>,
    /// JSON config file mirroring these flags
    #[arg(long)]
    config: Option<PathBuf>,
}

fn wav_files(dir: &Path) -> CmdResult<Vec<PathBuf>> {
    let entries = fs::read_dir(dir)
        .with_context(|| format!("reading corpus dir {}", dir.display()))
        .map_err(validation)?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| {
            p.extension()
                .map(|x| x.eq_ignore_ascii_case("wav"))
                .unwrap_or(false)
        })
        .collect();
    files.sort();
    Ok(files)
}

fn cmd_train(args: TrainArgs) -> CmdResult {
    let file_cfg = load_config(&args.config)?;
    let defaults = CodecConfig::default();
    let config = CodecConfig {
        window: resolve(args.window, &file_cfg, "window", defaults.window)?,
        hop: resolve(args.hop, &file_cfg, "hop", defaults.hop)?,
        n_mels: resolve(args.mels, &file_cfg, "mels", defaults.n_mels)?,
        n_levels: resolve(args.levels, &file_cfg, "levels", defaults.n_levels)?,
        codebook_size: resolve(
            args.codebook_size,
            &file_cfg,
            "codebook_size",
            defaults.codebook_size,
        )?,
        n_groups: resolve(args.groups, &file_cfg, "groups", defaults.n_groups)?,
        epochs: resolve(args.epochs, &file_cfg, "epochs", defaults.epochs)?,
        griffin_lim_iters: defaults.griffin_lim_iters,
        seed: resolve(args.seed, &file_cfg, "seed", defaults.seed)?,
    };
    let target_rate = resolve_opt(args.sample_rate, &file_cfg, "sample_rate")?;

    // validate everything cheap before touching audio
    if config.n_levels == 0 {
        return Err(validation(anyhow!("--levels must be >= 1")));
    }
    if config.codebook_size < 2 || config.codebook_size > u16::MAX as usize + 1 {
        return Err(validation(anyhow!(
            "--codebook-size must be in 2..=65536"
        )));
    }
    if config.n_groups == 0 || config.n_mels % config.n_groups != 0 {
        return Err(validation(anyhow!(
            "--mels ({}) must be divisible by --groups ({})",
            config.n_mels,
            config.n_groups
        )));
    }
    if config.hop == 0 || config.hop > config.window / 2 {
        return Err(validation(anyhow!(
            "--hop must be in 1..={} for window {}",
            config.window / 2,
            config.window
        )));
    }
    if let Some(rate) = target_rate {
        if rate == 0 {
            return Err(validation(anyhow!("--sample-rate must be positive")));
        }
    }

    let files = wav_files(&args.corpus)?;
    if files.is_empty() {
        return Err(validation(anyhow!(
            "corpus {} contains no .wav files",
            args.corpus.display()
        )));
    }
    let mut corpus = Vec::with_capacity(files.len());
    for f in &files {
        let mut audio = read_audio(f)?;
        if let Some(rate) = target_rate {
            audio = resample(&audio, rate).or_validation()?;
        }
        corpus.push(audio);
    }
    let codec = train_codec(&corpus, &config).or_validation()?;
    write_atomic(&args.out, &save_model(&codec))?;

    let rows = training_report(&codec, &corpus, &[config.n_levels], false).or_validation()?;
    let row = &rows[0];
    let summary = serde_json::json!({
        "model": args.out.display().to_string(),
        "files": files.len(),
        "sample_rate": codec.sample_rate(),
        "window": config.window,
        "hop": config.hop,
        "mels": config.n_mels,
        "levels": codec.n_levels(),
        "codebook_size": codec.codebook_size(),
        "groups": codec.n_groups(),
        "seed": config.seed,
        "commitment_loss": json_number(row.commitment),
        "residual_energy": row.residual_energy.iter().map(|&v| json_number(v)).collect::<Vec<_>>(),
    });
    print_json(&summary);
    Ok(())
}

// --------------------------------------------------------------- encode

#[derive(Args)]
struct EncodeArgs {
    #[arg(long)]
    model: PathBuf,
    /// Input WAV
    #[arg(long = "in")]
    input: PathBuf,
    /// Output stream path
    #[arg(long)]
    out: PathBuf,
    /// Target bitrate in bits per second
    #[arg(long)]
    bitrate: Option<f64>,
    /// Comma-separated bitrate set to draw from uniformly
    #[arg(long)]
    random_bitrate: Option<String>,
    /// Seed for the random bitrate draw
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    config: Option<PathBuf>,
}

fn cmd_encode(args: EncodeArgs) -> CmdResult {
    let file_cfg = load_config(&args.config)?;
    let bitrate = resolve_opt(args.bitrate, &file_cfg, "bitrate")?;
    let random_bitrate = resolve_opt(args.random_bitrate, &file_cfg, "random_bitrate")?;
    let seed = resolve(args.seed, &file_cfg, "seed", 0u64)?;

    let target = match (bitrate, &random_bitrate) {
        (Some(_), Some(_)) => {
            return Err(validation(anyhow!(
                "--bitrate and --random-bitrate are mutually exclusive"
            )))
        }
        (None, None) => {
            return Err(validation(anyhow!(
                "one of --bitrate or --random-bitrate is required"
            )))
        }
        (Some(b), None) => {
            if b <= 0.0 {
                return Err(validation(anyhow!("--bitrate must be positive")));
            }
            b
        }
        (None, Some(spec)) => {
            let choices: Vec<u64> = spec
                .split(',')
                .map(|s| s.trim().parse::<u64>())
                .collect::<Result<_, _>>()
                .map_err(|e| validation(anyhow!("bad --random-bitrate entry: {e}")))?;
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            sample_bitrate(&choices, &mut rng)
                .ok_or_else(|| validation(anyhow!("--random-bitrate set is empty")))?
                as f64
        }
    };

    let model_bytes = fs::read(&args.model)
        .with_context(|| format!("reading model {}", args.model.display()))
        .map_err(validation)?;
    let codec = load_model::<Sample>(&model_bytes).or_classified()?;
    let mut audio = read_audio(&args.input)?;
    if audio.sample_rate() != codec.sample_rate() {
        eprintln!(
            "warning: resampling {} from {} Hz to the model's {} Hz",
            args.input.display(),
            audio.sample_rate(),
            codec.sample_rate()
        );
        audio = resample(&audio, codec.sample_rate()).or_validation()?;
    }
    let stream = codec.encode(&audio, target).or_validation()?;
    if stream.bitrate_clamped {
        eprintln!(
            "warning: bitrate {target} clamped to {} levels",
            stream.header.n_levels_used
        );
    }
    write_atomic(&args.out, &save_stream(&stream))?;

    print_json(&serde_json::json!({
        "stream": args.out.display().to_string(),
        "sample_rate": stream.header.sample_rate,
        "n_frames": stream.header.n_frames,
        "levels": stream.header.n_levels_used,
        "requested_bitrate": json_number(target),
        "achieved_bitrate": json_number(stream.achieved_bitrate()),
        "clamped": stream.bitrate_clamped,
    }));
    Ok(())
}

// --------------------------------------------------------------- decode

#[derive(Args)]
struct DecodeArgs {
    #[arg(long)]
    model: PathBuf,
    /// Input stream
    #[arg(long = "in")]
    input: PathBuf,
    /// Output WAV (float32)
    #[arg(long)]
    out: PathBuf,
}

fn cmd_decode(args: DecodeArgs) -> CmdResult {
    let model_bytes = fs::read(&args.model)
        .with_context(|| format!("reading model {}", args.model.display()))
        .map_err(validation)?;
    let codec = load_model::<Sample>(&model_bytes).or_classified()?;
    let stream_bytes = fs::read(&args.input)
        .with_context(|| format!("reading stream {}", args.input.display()))
        .map_err(validation)?;
    let stream = load_stream(&stream_bytes).or_classified()?;
    let audio = codec.decode(&stream).or_classified()?;
    let tmp_check = write_wav_bytes(&audio);
    write_atomic(&args.out, &tmp_check)?;
    print_json(&serde_json::json!({
        "wav": args.out.display().to_string(),
        "sample_rate": audio.sample_rate(),
        "samples": audio.len(),
        "duration": json_number(audio.duration()),
    }));
    Ok(())
}

fn write_wav_bytes(audio: &AudioBuffer<Sample>) -> Vec<u8> {
    rvqcodec::audio::encode_wav(audio, WavEncoding::Float32)
}

// ----------------------------------------------------------------- eval

#[derive(Args)]
struct EvalArgs {
    /// Reference WAV file or directory
    #[arg(long = "ref")]
    reference: PathBuf,
    /// Degraded WAV file or directory
    #[arg(long = "deg")]
    degraded: PathBuf,
    /// Comma-separated metric names (default: all)
    #[arg(long)]
    metrics: Option<String>,
    /// Report path (line-delimited JSON); stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
    /// Parallel workers (default: RVQCODEC_JOBS or 1)
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    config: Option<PathBuf>,
}

fn parse_metrics(spec: &Option<String>) -> CmdResult<EvalConfig> {
    match spec {
        None => Ok(EvalConfig::default()),
        Some(s) => {
            let mut ids = Vec::new();
            for name in s.split(',') {
                let name = name.trim();
                if name.is_empty() {
                    continue;
                }
                ids.push(
                    MetricId::from_str(name)
                        .map_err(|e| validation(anyhow!("{e}")))?,
                );
            }
            if ids.is_empty() {
                return Err(validation(anyhow!("--metrics selected nothing")));
            }
            Ok(EvalConfig::with_metrics(&ids))
        }
    }
}

/// One line of the report, with metrics in requested order and reasons
/// only for undefined entries.
fn report_line(
    ref_path: &Path,
    deg_path: &Path,
    report: &rvqcodec::metrics::MetricReport,
) -> String {
    let mut metrics = Vec::new();
    let mut reasons = Vec::new();
    for (id, value) in &report.entries {
        let key = serde_json::to_string(id.name()).unwrap();
        match value {
            MetricValue::Defined(v) => {
                metrics.push(format!("{key}:{}", json_number(*v)));
            }
            MetricValue::Undefined(reason) => {
                metrics.push(format!("{key}:null"));
                reasons.push(format!(
                    "{key}:{}",
                    serde_json::to_string(reason).unwrap()
                ));
            }
        }
    }
    format!(
        "{{\"ref\":{},\"deg\":{},\"sample_rate\":{},\"metrics\":{{{}}},\"reasons\":{{{}}}}}",
        serde_json::to_string(&ref_path.display().to_string()).unwrap(),
        serde_json::to_string(&deg_path.display().to_string()).unwrap(),
        report.sample_rate,
        metrics.join(","),
        reasons.join(","),
    )
}

/// Relative-path pairing of two directories; single files pair directly.
fn collect_pairs(reference: &Path, degraded: &Path) -> CmdResult<Vec<(PathBuf, PathBuf)>> {
    if reference.is_dir() != degraded.is_dir() {
        return Err(validation(anyhow!(
            "--ref and --deg must both be files or both be directories"
        )));
    }
    if !reference.is_dir() {
        return Ok(vec![(reference.to_path_buf(), degraded.to_path_buf())]);
    }
    let mut pairs = Vec::new();
    let mut unpaired = Vec::new();
    for ref_file in wav_files(reference)? {
        let rel = ref_file.strip_prefix(reference).unwrap().to_path_buf();
        let deg_file = degraded.join(&rel);
        if deg_file.is_file() {
            pairs.push((ref_file, deg_file));
        } else {
            unpaired.push(rel);
        }
    }
    for rel in &unpaired {
        eprintln!("warning: no degraded file for {}, skipped", rel.display());
    }
    Ok(pairs)
}

fn default_jobs() -> usize {
    std::env::var(JOBS_ENV)
        .ok()
        .and_then(|v| v.parse().ok())
        .filter(|&n| n > 0)
        .unwrap_or(1)
}

fn cmd_eval(args: EvalArgs) -> CmdResult {
    let file_cfg = load_config(&args.config)?;
    let metrics = resolve_opt(args.metrics, &file_cfg, "metrics")?;
    let jobs = resolve(args.jobs, &file_cfg, "jobs", default_jobs())?;
    if jobs == 0 {
        return Err(validation(anyhow!("--jobs must be >= 1")));
    }
    let eval_config = parse_metrics(&metrics)?;

    let pairs = collect_pairs(&args.reference, &args.degraded)?;
    if pairs.is_empty() {
        return Err(validation(anyhow!("no reference/degraded pairs to score")));
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| validation(anyhow!("thread pool: {e}")))?;
    // output order stays the input order regardless of worker count
    let results: Vec<Result<String, String>> = pool.install(|| {
        pairs
            .par_iter()
            .map(|(r, d)| {
                let score = || -> rvqcodec::Result<String> {
                    let reference = read_wav::<Sample>(r)?;
                    let degraded = read_wav::<Sample>(d)?;
                    let report = evaluate_pair(&reference, &degraded, &eval_config)?;
                    Ok(report_line(r, d, &report))
                };
                score().map_err(|e| format!("{}: {e}", r.display()))
            })
            .collect()
    });

    let mut lines = Vec::with_capacity(results.len());
    let mut failures = 0usize;
    for result in results {
        match result {
            Ok(line) => lines.push(line),
            Err(msg) => {
                eprintln!("warning: {msg}");
                failures += 1;
            }
        }
    }
    if lines.is_empty() {
        return Err(validation(anyhow!("all {failures} pairs failed")));
    }
    let mut body = lines.join("\n");
    body.push('\n');
    match &args.out {
        Some(path) => write_atomic(path, body.as_bytes())?,
        None => {
            std::io::stdout()
                .write_all(body.as_bytes())
                .context("writing report")
                .map_err(validation)?;
        }
    }
    Ok(())
}

// --------------------------------------------------------------- losses

#[derive(Args)]
struct LossesArgs {
    #[arg(long = "ref")]
    reference: PathBuf,
    #[arg(long = "deg")]
    degraded: PathBuf,
    /// Comma-separated mel window sizes (default: 32..2048)
    #[arg(long)]
    scales: Option<String>,
    /// l1, l2, or l1_plus_l2
    #[arg(long)]
    norm: Option<String>,
    #[arg(long)]
    config: Option<PathBuf>,
}

fn cmd_losses(args: LossesArgs) -> CmdResult {
    let file_cfg = load_config(&args.config)?;
    let norm_name = resolve(args.norm, &file_cfg, "norm", "l1".to_string())?;
    let norm =
        NormKind::from_str(&norm_name).map_err(|e| validation(anyhow!("{e}")))?;
    let scales_spec = resolve_opt(args.scales, &file_cfg, "scales")?;
    let scales = match &scales_spec {
        None => ScaleSet::default(),
        Some(s) => {
            let windows: Vec<usize> = s
                .split(',')
                .map(|x| x.trim().parse::<usize>())
                .collect::<Result<_, _>>()
                .map_err(|e| validation(anyhow!("bad --scales entry: {e}")))?;
            ScaleSet::new(windows).or_validation()?
        }
    };

    let reference = read_audio(&args.reference)?;
    let mut degraded = read_audio(&args.degraded)?;
    if degraded.sample_rate() != reference.sample_rate() {
        eprintln!(
            "warning: resampling {} from {} Hz to {} Hz",
            args.degraded.display(),
            degraded.sample_rate(),
            reference.sample_rate()
        );
        degraded = resample(&degraded, reference.sample_rate()).or_validation()?;
    }
    let n = reference.len().min(degraded.len());
    let reference =
        AudioBuffer::new(reference.samples()[..n].to_vec(), reference.sample_rate())
            .or_validation()?;
    let degraded =
        AudioBuffer::new(degraded.samples()[..n].to_vec(), degraded.sample_rate())
            .or_validation()?;

    let time = time_domain_loss(&reference, &degraded, norm).or_validation()?;
    let mel = multi_scale_mel_loss(&reference, &degraded, &scales, norm).or_validation()?;

    print_json(&serde_json::json!({
        "ref": args.reference.display().to_string(),
        "deg": args.degraded.display().to_string(),
        "norm": norm_name,
        "scales": scales.windows(),
        "time_domain": json_number(time),
        "multi_scale_mel": json_number(mel),
    }));
    Ok(())
}

// ----------------------------------------------------------------- main

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let kind = e.kind();
            let _ = e.print();
            return if matches!(kind, ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_VALIDATION)
            };
        }
    };
    let result = match cli.command {
        Command::Train(args) => cmd_train(args),
        Command::Encode(args) => cmd_encode(args),
        Command::Decode(args) => cmd_decode(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Losses(args) => cmd_losses(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
