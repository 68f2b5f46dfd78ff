use std::fmt::Write as _;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use rubsynth::timing::bench_hops;
use rubsynth::trace::load_positions;
use rubsynth::velocity::DEFAULT_SMOOTHING_WINDOW;
use rubsynth::{
    load_trace, render_offline, velocity_from_positions, write_wav, Corpus, Engine, Error,
    PrepParams, SynthParams, WavEncoding,
};
use rubsynth_service::Library;

#[derive(Parser)]
#[command(
    name = "rubsynth",
    version,
    about = "Velocity-driven material sound synthesis"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cut a recording into annotated fragments and save the corpus manifest.
    Prepare(PrepareArgs),
    /// Render a velocity trace to a 24-bit WAV file.
    Render(RenderArgs),
    /// Time per-hop synthesis and k-NN queries on a corpus.
    Bench(BenchArgs),
    /// Summarize a corpus, optionally dumping per-fragment values as CSV.
    Stats(StatsArgs),
    /// Serve the corpora in a directory over HTTP and WebSocket.
    Serve(ServeArgs),
}

#[derive(Args)]
struct PrepareArgs {
    #[arg(long)]
    audio: PathBuf,
    #[arg(long)]
    trace: PathBuf,
    /// Read the trace as pointer positions (t_s,x_mm,y_mm) instead of velocities.
    #[arg(long)]
    positions: bool,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 5.0)]
    p_lo: f64,
    #[arg(long, default_value_t = 95.0)]
    p_hi: f64,
    #[arg(long, default_value_t = 1.0)]
    v_min: f64,
    /// Minimum number of retained fragments; defaults to the synthesis k.
    #[arg(long)]
    min_retained: Option<usize>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 25)]
    k: usize,
    /// Grain length in fragments.
    #[arg(long, default_value_t = 28)]
    grain: usize,
    #[arg(long, default_value_t = 5)]
    freeze_hops: u32,
    /// Crossfade length in samples.
    #[arg(long, default_value_t = 480)]
    fade_len: usize,
    #[arg(long, default_value_t = 1.0)]
    v_silence: f64,
}

impl SynthArgs {
    fn params(&self) -> SynthParams {
        SynthParams {
            k: self.k,
            n: self.grain,
            freeze_hops: self.freeze_hops,
            fade_len: self.fade_len,
            v_silence: self.v_silence,
        }
    }
}

#[derive(Args)]
struct RenderArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    trace: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    synth: SynthArgs,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value_t = 10_000)]
    hops: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    synth: SynthArgs,
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Write |v|^2, loudness and ratio per retained fragment.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    listen: SocketAddr,
    /// Directory of `<id>.json` corpus manifests with optional `<id>.png` images.
    #[arg(long)]
    corpus_dir: PathBuf,
    /// Maximum number of concurrent sessions.
    #[arg(long, default_value_t = 64)]
    capacity: usize,
    #[command(flatten)]
    synth: SynthArgs,
}

/// An error with the process exit code it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl Failure {
    fn new(code: u8, error: impl Into<anyhow::Error>) -> Self {
        Failure {
            code,
            error: error.into(),
        }
    }
}

fn fail(error: impl Into<anyhow::Error>) -> Failure {
    Failure::new(1, error)
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Prepare(args) => prepare(args),
        Command::Render(args) => render(args),
        Command::Bench(args) => bench(args),
        Command::Stats(args) => stats(args),
        Command::Serve(args) => serve(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

/// Problems with the files or flags given, as opposed to a corpus that
/// cannot be built from valid inputs.
fn is_input_error(e: &Error) -> bool {
    !matches!(
        e,
        Error::NoFragments
            | Error::NoMovingFragments(_)
            | Error::TooFewFragments { .. }
            | Error::SilentCorpus
            | Error::EmptyCorpus
    )
}

fn classify(e: Error) -> Failure {
    let code = if is_input_error(&e) { 2 } else { 1 };
    Failure::new(code, e)
}

fn prepare(args: PrepareArgs) -> CmdResult {
    let params = PrepParams {
        p_lo: args.p_lo,
        p_hi: args.p_hi,
        v_min: args.v_min,
    };
    params.validate().map_err(classify)?;
    let trace = if args.positions {
        let events = load_positions(&args.trace).map_err(classify)?;
        velocity_from_positions(&events, DEFAULT_SMOOTHING_WINDOW).map_err(classify)?
    } else {
        load_trace(&args.trace).map_err(classify)?
    };
    let min_retained = args.min_retained.unwrap_or(SynthParams::default().k);
    let (corpus, report) =
        Corpus::build(&args.audio, &trace, params, min_retained).map_err(classify)?;
    corpus.save(&args.out).map_err(classify)?;

    println!("total: {}", report.total);
    println!("dropped_velocity: {}", report.dropped_slow);
    println!("dropped_percentile: {}", report.dropped_outliers);
    println!("retained: {}", report.retained);
    println!("mean_ratio: {}", corpus.mean_ratio());
    Ok(())
}

fn load_engine(path: &Path) -> Result<Arc<Engine>, Failure> {
    let corpus = Corpus::load(path)
        .with_context(|| format!("loading corpus {}", path.display()))
        .map_err(fail)?;
    Engine::new(corpus).map_err(fail)
}

fn render(args: RenderArgs) -> CmdResult {
    let params = args.synth.params();
    params.validate().map_err(|e| Failure::new(2, e))?;
    let engine = load_engine(&args.corpus)?;
    let trace = load_trace(&args.trace)
        .with_context(|| format!("loading trace {}", args.trace.display()))
        .map_err(fail)?;

    let start = Instant::now();
    let clip = render_offline(&engine, &trace, params, args.seed).map_err(fail)?;
    let wall = start.elapsed().as_secs_f64();
    write_wav(&args.out, &clip, WavEncoding::Pcm24).map_err(fail)?;

    println!("hops: {}", trace.len());
    println!("duration_s: {}", clip.duration_secs());
    println!(
        "realtime_factor: {:.1}",
        clip.duration_secs() / wall.max(1e-9)
    );
    Ok(())
}

fn bench(args: BenchArgs) -> CmdResult {
    let params = args.synth.params();
    params.validate().map_err(|e| Failure::new(2, e))?;
    if args.hops == 0 {
        return Err(Failure::new(2, anyhow::anyhow!("--hops must be positive")));
    }
    let engine = load_engine(&args.corpus)?;
    let report = bench_hops(&engine, params, args.hops, args.seed).map_err(fail)?;

    println!("fragments: {}", engine.corpus().len());
    println!("hops: {}", report.hops);
    println!("selections: {}", report.selections);
    println!("p50_hop_us: {:.2}", report.hop.p50_us);
    println!("p99_hop_us: {:.2}", report.hop.p99_us);
    println!("max_hop_us: {:.2}", report.hop.max_us);
    println!("p50_knn_us: {:.2}", report.knn.p50_us);
    println!("p99_knn_us: {:.2}", report.knn.p99_us);
    println!("max_knn_us: {:.2}", report.knn.max_us);
    Ok(())
}

fn stats(args: StatsArgs) -> CmdResult {
    let corpus = Corpus::load(&args.corpus)
        .with_context(|| format!("loading corpus {}", args.corpus.display()))
        .map_err(fail)?;
    let params = corpus.params();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for f in corpus.fragments() {
        lo = lo.min(f.ratio);
        hi = hi.max(f.ratio);
    }

    println!("audio: {}", corpus.audio_path().display());
    println!("audio_sha256: {}", corpus.audio_sha256());
    println!("source_fragments: {}", corpus.source_fragment_count());
    println!("retained: {}", corpus.len());
    println!("mean_ratio: {}", corpus.mean_ratio());
    println!("ratio_range: {lo} {hi}");
    println!(
        "params: p_lo={} p_hi={} v_min={}",
        params.p_lo, params.p_hi, params.v_min
    );

    if let Some(path) = args.csv {
        let mut out = String::from("v_sq,loudness,ratio\n");
        for f in corpus.fragments() {
            let _ = writeln!(out, "{},{},{}", f.velocity.norm_sq(), f.loudness, f.ratio);
        }
        std::fs::write(&path, out)
            .with_context(|| format!("writing {}", path.display()))
            .map_err(fail)?;
    }
    Ok(())
}

fn serve(args: ServeArgs) -> CmdResult {
    let params = args.synth.params();
    params.validate().map_err(|e| Failure::new(2, e))?;
    let library = Library::load_dir(&args.corpus_dir, params, args.capacity)
        .with_context(|| format!("loading corpora from {}", args.corpus_dir.display()))
        .map_err(fail)?;
    for s in library.summaries() {
        log::info!(
            "corpus {}: {} fragments, {:.1} s",
            s.id,
            s.fragments,
            s.duration_s
        );
    }
    let runtime = tokio::runtime::Runtime::new().map_err(fail)?;
    eprintln!("listening on {}", args.listen);
    runtime
        .block_on(rubsynth_service::serve(args.listen, Arc::new(library)))
        .map_err(fail)
}
