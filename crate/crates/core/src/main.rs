// SPDX-License-Identifier: Apache-2.0

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use splitzip::ablation::{self, Suite};
use splitzip::calibration::{select_codebook, CalibrationStats, CodebookMode, ExponentCodebook};
use splitzip::codec::{self, CodecConfig, PositionMode, DEFAULT_CHUNK_SIZE};
use splitzip::datagen::{self, ExponentSpec};
use splitzip::pipeline::{self, PipelineParams, StageTimes, SweepConfig};
use splitzip::{bench, container, verify, Error, ErrorClass, ElementFormat, RawTensorStream};

const EXIT_IO: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_FORMAT: u8 = 3;
const EXIT_VERIFY: u8 = 4;

#[derive(Parser)]
#[command(name = "splitzip", version, about = "Lossless exponent-split codec for BF16/FP8 tensors")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a codebook from one or more raw tensor files.
    Calibrate(CalibrateArgs),
    /// Encode a raw tensor file into a container.
    Compress(CompressArgs),
    /// Decode a container back to a raw tensor file.
    Decompress(DecompressArgs),
    /// Round-trip a raw file (or check a container against it) bit for bit.
    Verify(VerifyArgs),
    /// Verify, then time encode and decode.
    Bench(BenchArgs),
    /// Evaluate the transfer pipeline model.
    Simulate(SimulateArgs),
    /// Compare codec variants on one input.
    Ablate(AblateArgs),
    /// Write a seeded synthetic raw tensor file.
    Generate(GenerateArgs),
}

#[derive(Args, Clone)]
struct CodecFlags {
    /// Expected element format; must match the input file.
    #[arg(long)]
    format: Option<ElementFormat>,
    #[arg(long, default_value_t = 4)]
    code_bits: u32,
    /// explicit or sentinel.
    #[arg(long, default_value = "explicit")]
    mode: CodebookMode,
    #[arg(long, default_value_t = DEFAULT_CHUNK_SIZE)]
    chunk_size: usize,
    /// chunk (chunk-relative) or abs32.
    #[arg(long, default_value = "chunk")]
    positions: PositionMode,
    /// Calibrate on the input itself (the default when no codebook is given).
    #[arg(long, conflicts_with = "codebook")]
    dynamic: bool,
    /// Precalibrated codebook file; its code width and mode take precedence.
    #[arg(long)]
    codebook: Option<PathBuf>,
}

impl CodecFlags {
    fn config(&self, stream: &RawTensorStream) -> Result<CodecConfig, Error> {
        if let Some(f) = self.format {
            if f != stream.format() {
                return Err(Error::Config(format!("--format {f} but the input is {}", stream.format())));
            }
        }
        let mut cfg = CodecConfig::new(stream.format())
            .with_code_bits(self.code_bits)
            .with_mode(self.mode)
            .with_chunk_size(self.chunk_size)
            .with_positions(self.positions);
        if let Some(path) = &self.codebook {
            let book = ExponentCodebook::read_from(BufReader::new(File::open(path)?))?;
            if book.format() != stream.format() {
                return Err(Error::Config(format!(
                    "codebook is for {} but the input is {}",
                    book.format(),
                    stream.format()
                )));
            }
            cfg = cfg.with_codebook(book);
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct CalibrateArgs {
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long)]
    format: Option<ElementFormat>,
    #[arg(long, default_value_t = 4)]
    code_bits: u32,
    #[arg(long, default_value = "explicit")]
    mode: CodebookMode,
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Args)]
struct CompressArgs {
    input: PathBuf,
    #[arg(short, long)]
    out: PathBuf,
    #[command(flatten)]
    codec: CodecFlags,
    /// Use the quad-group encoder.
    #[arg(long)]
    quad: bool,
}

#[derive(Args)]
struct DecompressArgs {
    input: PathBuf,
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Args)]
struct VerifyArgs {
    input: PathBuf,
    /// Check this container instead of encoding the input.
    #[arg(long)]
    container: Option<PathBuf>,
    #[command(flatten)]
    codec: CodecFlags,
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    input: PathBuf,
    #[command(flatten)]
    codec: CodecFlags,
    #[arg(long, default_value_t = bench::DEFAULT_REPS)]
    reps: usize,
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Print the hiding bandwidth min(G_enc, G_dec) / ratio and exit.
    #[arg(long)]
    b_hide: bool,
    /// Encode throughput, GB/s over raw bytes.
    #[arg(long, default_value_t = 613.3)]
    enc_gbps: f64,
    /// Decode throughput, GB/s over raw bytes.
    #[arg(long, default_value_t = 2181.8)]
    dec_gbps: f64,
    #[arg(long, default_value_t = 1.324)]
    ratio: f64,
    /// Link bandwidth, GB/s.
    #[arg(long, default_value_t = 50.0)]
    link_gbps: f64,
    /// Raw bytes for a single breakdown.
    #[arg(long)]
    bytes: Option<f64>,
    /// Measured stage times in ms: ENC,XFER,DEC (requires --native-ms).
    #[arg(long, value_delimiter = ',', requires = "native_ms")]
    stage_ms: Option<Vec<f64>>,
    #[arg(long)]
    native_ms: Option<f64>,
    /// Fixed per-transfer overhead in ms.
    #[arg(long, default_value_t = 0.0)]
    overhead_ms: f64,
    /// KV bytes per token for a sweep.
    #[arg(long, requires_all = ["batches", "seqs"])]
    kv_bytes_per_token: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    batches: Option<Vec<u64>>,
    #[arg(long, value_delimiter = ',')]
    seqs: Option<Vec<u64>>,
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct AblateArgs {
    /// Raw tensor file; omit when using --spec.
    #[arg(required_unless_present = "spec", conflicts_with = "spec")]
    input: Option<PathBuf>,
    /// Generate the input from a spec file instead.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    suite: Suite,
    #[command(flatten)]
    codec: CodecFlags,
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(short, long)]
    out: PathBuf,
    /// Spec file (key = value); overrides the flags below.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, default_value = "bf16")]
    format: ElementFormat,
    /// Number of in-book exponents.
    #[arg(long, default_value_t = 16)]
    k: usize,
    /// Number of distinct out-of-book exponents.
    #[arg(long, default_value_t = 8)]
    escape_values: usize,
    #[arg(long, default_value_t = 0.0016)]
    escape_rate: f64,
    #[arg(long, default_value_t = 1 << 20)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Draw each element independently instead of fixing the histogram.
    #[arg(long)]
    sampled: bool,
}

enum Failure {
    Error(Error),
    Verify(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Error(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Error(Error::Io(e))
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = init_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_CONFIG);
    }
    let result = match cli.cmd {
        Command::Calibrate(a) => calibrate(a),
        Command::Compress(a) => compress(a),
        Command::Decompress(a) => decompress(a),
        Command::Verify(a) => verify_cmd(a),
        Command::Bench(a) => bench_cmd(a),
        Command::Simulate(a) => simulate(a),
        Command::Ablate(a) => ablate(a),
        Command::Generate(a) => generate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Verify(msg)) => {
            eprintln!("verify failed: {msg}");
            ExitCode::from(EXIT_VERIFY)
        }
        Err(Failure::Error(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.class() {
                ErrorClass::Io => EXIT_IO,
                ErrorClass::Input | ErrorClass::Config | ErrorClass::Domain => EXIT_CONFIG,
                ErrorClass::Format | ErrorClass::Corrupt => EXIT_FORMAT,
            })
        }
    }
}

fn init_threads() -> Result<(), Error> {
    let Ok(v) = std::env::var("SPLITZIP_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("SPLITZIP_THREADS must be a positive integer, got {v:?}")))?;
    if n == 0 {
        return Err(Error::Config("SPLITZIP_THREADS must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

fn read_raw(path: &Path) -> Result<RawTensorStream, Error> {
    datagen::ingest_raw(path)
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), Error> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::Io(e.into()))?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn calibrate(a: CalibrateArgs) -> CmdResult {
    let mut stats: Option<CalibrationStats> = None;
    for path in &a.inputs {
        let s = read_raw(path)?;
        if let Some(f) = a.format {
            if f != s.format() {
                return Err(Error::Config(format!("{}: expected {f}, found {}", path.display(), s.format())).into());
            }
        }
        let mut st = CalibrationStats::empty(s.format());
        st.accumulate(s.words());
        match &mut stats {
            Some(acc) => acc.merge(&st)?,
            None => stats = Some(st),
        }
    }
    let stats = stats.expect("at least one input");
    if stats.total() == 0 {
        return Err(Error::EmptyInput("calibration corpus has no elements").into());
    }
    let book = select_codebook(&stats, a.code_bits, a.mode)?;
    let mut w = BufWriter::new(File::create(&a.out)?);
    book.write_to(&mut w)?;
    w.flush()?;
    println!("elements    {}", stats.total());
    println!("entropy     {:.2} bits", stats.entropy_bits()?);
    println!("top8        {:.4}%", 100.0 * stats.top_k_coverage(8)?);
    println!("top16       {:.4}%", 100.0 * stats.top_k_coverage(16)?);
    println!("coverage    {:.4}%", 100.0 * stats.coverage_under(&book));
    print!("{}", book.to_text(Some(&stats)));
    Ok(())
}

fn compress(a: CompressArgs) -> CmdResult {
    let stream = read_raw(&a.input)?;
    let cfg = a.codec.config(&stream)?;
    let enc = if a.quad { codec::encode_quad(&stream, &cfg)? } else { codec::encode(&stream, &cfg)? };
    let mut w = BufWriter::new(File::create(&a.out)?);
    let written = container::write_container(&enc, &mut w)?;
    w.flush()?;
    let raw = stream.raw_bytes() as f64;
    println!("elements       {}", stream.len());
    println!("escapes        {} ({:.4}%)", enc.n_escapes(), 100.0 * enc.escape_rate());
    println!("stream ratio   {:.4}", enc.stream_ratio());
    println!("payload ratio  {:.4}", enc.payload_ratio());
    println!("file ratio     {:.4}  ({} bytes)", raw / written as f64, written);
    Ok(())
}

fn decompress(a: DecompressArgs) -> CmdResult {
    let enc = container::read_container(BufReader::new(File::open(&a.input)?))?;
    let stream = codec::decode(&enc)?;
    let mut w = BufWriter::new(File::create(&a.out)?);
    container::write_raw(&stream, &mut w)?;
    w.flush()?;
    println!("elements {}", stream.len());
    Ok(())
}

fn verify_cmd(a: VerifyArgs) -> CmdResult {
    let stream = read_raw(&a.input)?;
    let report = match &a.container {
        Some(path) => verify::verify_container_bytes(&stream, &std::fs::read(path)?),
        None => verify::verify_roundtrip(&stream, &a.codec.config(&stream)?)?,
    };
    if let Some(p) = &a.json {
        write_json(p, &report)?;
    }
    if report.ok {
        println!("verify=OK elements={} mismatches=0", report.n);
        Ok(())
    } else if let Some(e) = report.error {
        Err(Failure::Verify(e))
    } else {
        Err(Failure::Verify(format!(
            "{} mismatches, first at index {}",
            report.mismatch_count,
            report.first_mismatch_index.unwrap_or(0)
        )))
    }
}

fn bench_cmd(a: BenchArgs) -> CmdResult {
    let stream = read_raw(&a.input)?;
    let cfg = a.codec.config(&stream)?;
    let pre = verify::verify_roundtrip(&stream, &cfg)?;
    if !pre.ok {
        return Err(Failure::Verify(format!("{} mismatches; not timing", pre.mismatch_count)));
    }
    let report = bench::run(&stream, &cfg, a.reps)?;
    print!("{}", report.to_text());
    if let Some(p) = &a.json {
        write_json(p, &report)?;
    }
    Ok(())
}

fn simulate(a: SimulateArgs) -> CmdResult {
    const GB: f64 = 1e9;
    if a.b_hide {
        let b = pipeline::hiding_bandwidth(a.enc_gbps, a.dec_gbps, a.ratio)?;
        println!("B_hide = {b:.1} GB/s");
        return Ok(());
    }
    let overhead = a.overhead_ms * 1e-3;
    if let Some(kv) = a.kv_bytes_per_token {
        let cfg = SweepConfig {
            kv_bytes_per_token: kv,
            batches: a.batches.unwrap_or_default(),
            seq_lens: a.seqs.unwrap_or_default(),
            ratio: a.ratio,
            enc_throughput: a.enc_gbps * GB,
            dec_throughput: a.dec_gbps * GB,
            link_bandwidth: a.link_gbps * GB,
            overhead,
        };
        let rows = pipeline::sweep_simulation(&cfg)?;
        let csv = pipeline::sweep_csv(&rows);
        match &a.csv {
            Some(p) => std::fs::write(p, &csv)?,
            None => print!("{csv}"),
        }
        if let Some(p) = &a.json {
            write_json(p, &rows)?;
        }
        return Ok(());
    }
    let breakdown = if let Some(st) = &a.stage_ms {
        if st.len() != 3 {
            return Err(Error::Config(format!("--stage-ms takes ENC,XFER,DEC, got {} values", st.len())).into());
        }
        let native = a.native_ms.expect("clap enforces --native-ms");
        pipeline::breakdown_from_times(
            StageTimes {
                enc: st[0] * 1e-3,
                xfer: st[1] * 1e-3,
                dec: st[2] * 1e-3,
            },
            native * 1e-3,
            overhead,
        )?
    } else {
        let bytes = a
            .bytes
            .ok_or_else(|| Error::Config("simulate needs --b-hide, --bytes, --stage-ms or a sweep".into()))?;
        let p = PipelineParams {
            raw_bytes: bytes,
            ratio: a.ratio,
            enc_throughput: a.enc_gbps * GB,
            dec_throughput: a.dec_gbps * GB,
            link_bandwidth: a.link_gbps * GB,
        };
        let t = pipeline::stage_times(&p)?;
        println!("pipelined      {:.4} ms", t.max() * 1e3);
        pipeline::transfer_breakdown(&p, overhead)?
    };
    println!("encode         {:.4} ms  {:.1}%", breakdown.t_enc * 1e3, breakdown.frac_enc * 100.0);
    println!("transfer       {:.4} ms  {:.1}%", breakdown.t_xfer * 1e3, breakdown.frac_xfer * 100.0);
    println!("decode         {:.4} ms  {:.1}%", breakdown.t_dec * 1e3, breakdown.frac_dec * 100.0);
    if breakdown.overhead > 0.0 {
        println!("overhead       {:.4} ms  {:.1}%", breakdown.overhead * 1e3, breakdown.frac_overhead * 100.0);
    }
    println!("compressed     {:.4} ms", breakdown.t_total_compressed * 1e3);
    println!("native         {:.4} ms", breakdown.t_native * 1e3);
    println!("speedup        {:.4}", breakdown.speedup);
    if let Some(p) = &a.json {
        write_json(p, &breakdown)?;
    }
    Ok(())
}

fn ablate(a: AblateArgs) -> CmdResult {
    let stream = match (&a.input, &a.spec) {
        (Some(p), _) => read_raw(p)?,
        (None, Some(spec)) => datagen::generate(&ExponentSpec::load(spec)?)?,
        (None, None) => unreachable!("clap requires one"),
    };
    let cfg = a.codec.config(&stream)?;
    let book = match &cfg.calibration {
        codec::Calibration::Precalibrated(b) => Some(b.clone()),
        codec::Calibration::Dynamic => None,
    };
    let report = ablation::run_suite(&stream, a.suite, &cfg, book.as_ref())?;
    print!("{}", report.to_table());
    if let Some(p) = &a.csv {
        std::fs::write(p, report.to_csv())?;
    }
    if let Some(p) = &a.json {
        write_json(p, &report)?;
    }
    if !report.all_ok() {
        return Err(Failure::Verify("one or more variants failed to round-trip".into()));
    }
    Ok(())
}

fn generate(a: GenerateArgs) -> CmdResult {
    let spec = match &a.spec {
        Some(p) => ExponentSpec::load(p)?,
        None => {
            let mut s = ExponentSpec::geometric(a.format, a.k, a.escape_values, a.escape_rate, a.count, a.seed);
            s.exact_counts = !a.sampled;
            s
        }
    };
    let stream = datagen::generate(&spec)?;
    let mut w = BufWriter::new(File::create(&a.out)?);
    container::write_raw(&stream, &mut w)?;
    w.flush()?;
    let mut meta = a.out.clone().into_os_string();
    meta.push(".meta.toml");
    std::fs::write(&meta, datagen::metadata(&spec))?;
    println!("wrote {} {} elements (seed {}, {})", stream.len(), stream.format(), spec.seed, datagen::PRNG_ID);
    Ok(())
}
