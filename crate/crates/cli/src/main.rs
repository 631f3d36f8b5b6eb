use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use streambank::array_io;
use streambank::bank::{MemoryBank, META_FILE};
use streambank::cost::{self, CostQuery};
use streambank::incremental::{BufferPolicy, IncrementalSampler, IncrementalSamplerConfig};
use streambank::metrics;
use streambank::pipeline::{self, TrainConfig};
use streambank::rate::SampleRate;
use streambank::tables;
use streambank::{Error, Matrix, Precision, Result};

#[derive(Parser)]
#[command(
    name = "streambank",
    version,
    about = "Streaming SVD memory banks for anomaly scoring"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Reduce feature files to k dimensions.
    Reduce(ReduceArgs),
    /// Reduce and sample feature files into a memory bank.
    Train(TrainArgs),
    /// Score query vectors against a bank.
    Score(ScoreArgs),
    /// AUROC of a score table against labels.
    Eval(EvalArgs),
    /// Measure sampling comparison counts against the cost model.
    BenchSampling(BenchArgs),
    /// Describe a feature file or bank directory.
    Info(InfoArgs),
}

#[derive(Args)]
struct ReduceArgs {
    #[arg(long, num_args = 1.., required = true)]
    input: Vec<PathBuf>,
    #[arg(long)]
    output: PathBuf,
    #[arg(long)]
    k: usize,
    #[arg(long = "batch-size")]
    batch_size: usize,
    #[arg(long)]
    precision: Option<Precision>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long, num_args = 1.., required = true)]
    input: Vec<PathBuf>,
    #[arg(long)]
    output: PathBuf,
    #[arg(long)]
    k: usize,
    #[arg(long = "batch-size")]
    batch_size: usize,
    #[arg(long = "sample-rate")]
    sample_rate: String,
    /// Sampling batch size B (defaults to --batch-size).
    #[arg(long = "sample-batch")]
    sample_batch: Option<usize>,
    #[arg(long = "incremental-sampling")]
    incremental_sampling: bool,
    /// all | no | <factor>
    #[arg(long)]
    buffer: Option<String>,
    #[arg(long)]
    precision: Option<Precision>,
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long)]
    bank: PathBuf,
    #[arg(long, num_args = 1.., required = true)]
    input: Vec<PathBuf>,
    #[arg(long)]
    output: PathBuf,
    /// JSON manifest mapping image ids to [start, end) row ranges.
    #[arg(long)]
    groups: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Score table written by `score`.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Synthetic stream lengths N.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    synthetic: Vec<usize>,
    /// Use the vectors of these files instead of synthetic points.
    #[arg(long, num_args = 1.., conflicts_with = "synthetic")]
    input: Vec<PathBuf>,
    /// Dimension of synthetic points.
    #[arg(long, default_value_t = 8)]
    k: usize,
    #[arg(long = "sample-batch", value_delimiter = ',', num_args = 1.., required = true)]
    sample_batch: Vec<usize>,
    #[arg(long = "sample-rate", value_delimiter = ',', num_args = 1.., required = true)]
    sample_rate: Vec<String>,
    #[arg(long, value_delimiter = ',', num_args = 1.., default_value = "no")]
    buffer: Vec<String>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct InfoArgs {
    path: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("STREAMBANK_LOG", "warn"))
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Reduce(a) => cmd_reduce(a),
        Command::Train(a) => cmd_train(a),
        Command::Score(a) => cmd_score(a),
        Command::Eval(a) => cmd_eval(a),
        Command::BenchSampling(a) => cmd_bench(a),
        Command::Info(a) => cmd_info(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Usage(_) => 2,
        Error::Numerical { .. } => 4,
        _ => 3,
    }
}

fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn print_json(value: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(value).expect("json"));
}

/// The bare message of a configuration error, for joining with others.
fn config_message(e: Error) -> String {
    match e {
        Error::Config(msg) => msg,
        other => other.to_string(),
    }
}

fn parse_rate(s: &str) -> Result<SampleRate> {
    s.parse()
}

fn cmd_reduce(a: ReduceArgs) -> Result<()> {
    let reduced = pipeline::reduce_files(&a.input, a.k, a.batch_size, a.precision)?;
    let dtype = array_io::dtype_of(reduced.basis.precision());
    let dir = &a.output;
    let created = !dir.exists();
    fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.clone(),
        source: e,
    })?;
    let written = (|| {
        array_io::write_array2(&dir.join("basis.npy"), &reduced.basis.u, dtype)?;
        array_io::write_vector(&dir.join("svals.npy"), &reduced.basis.s, dtype)?;
        array_io::write_matrix(&dir.join("reduced.npy"), &reduced.coords, dtype)
    })();
    if let Err(e) = written {
        for name in ["basis.npy", "svals.npy", "reduced.npy"] {
            let _ = fs::remove_file(dir.join(name));
        }
        if created {
            let _ = fs::remove_dir(dir);
        }
        return Err(e);
    }
    print_json(&serde_json::json!({
        "vectors_seen": reduced.coords.cols(),
        "k_effective": reduced.basis.k_effective(),
    }));
    Ok(())
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let mut problems = Vec::new();
    let rate = parse_rate(&a.sample_rate)
        .map_err(|e| problems.push(config_message(e)))
        .ok();
    let policy = match &a.buffer {
        Some(s) => s
            .parse::<BufferPolicy>()
            .map_err(|e| problems.push(config_message(e)))
            .ok(),
        None if a.incremental_sampling => Some(BufferPolicy::EveryBatch),
        None => Some(BufferPolicy::Unbounded),
    };
    let cfg = rate.map(|rate| {
        let mut cfg = TrainConfig::new(a.k, a.batch_size, rate);
        cfg.sample_batch = a.sample_batch;
        cfg.incremental = a.incremental_sampling;
        cfg.buffer_policy = policy.unwrap_or(BufferPolicy::Unbounded);
        cfg.precision = a.precision;
        cfg
    });
    // Report every configuration problem at once, before touching data.
    let n_total = streambank::array_io::BatchStream::open(&a.input, a.batch_size.max(1))
        .map(|s| s.total_vectors())
        .ok();
    if let Some(cfg) = &cfg {
        if let Err(Error::Config(msg)) = cfg.validate(n_total) {
            problems.push(msg);
        }
    } else if a.k == 0 || a.batch_size == 0 {
        problems.push("--k and --batch-size must be at least 1".into());
    }
    if !problems.is_empty() {
        return Err(Error::Config(problems.join("; ")));
    }
    let cfg = cfg.expect("no problems implies a config");

    let out = pipeline::train_files(&a.input, &cfg)?;
    out.bank.save(&a.output)?;
    info!("bank written to {}", a.output.display());
    print_json(&serde_json::to_value(out.summary).expect("summary serializes"));
    Ok(())
}

/// `scores.tsv` → `scores.images.tsv`.
fn images_path(output: &Path) -> PathBuf {
    let stem = output
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    output.with_file_name(format!("{stem}.images.tsv"))
}

fn cmd_score(a: ScoreArgs) -> Result<()> {
    let groups = match &a.groups {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Error::Io {
                path: p.clone(),
                source: e,
            })?;
            Some(tables::parse_groups(&text)?)
        }
        None => None,
    };
    let bank = MemoryBank::load(&a.bank)?;
    let report = pipeline::score_files(&bank, &a.input)?;
    let images = match &groups {
        Some(g) => Some(tables::image_scores(g, &report.per_vector_scores)?),
        None => None,
    };
    write_file(
        &a.output,
        tables::format_vector_scores(&report, 0).as_bytes(),
    )?;
    if let Some(rows) = images {
        let path = images_path(&a.output);
        if let Err(e) = write_file(&path, tables::format_image_scores(&rows).as_bytes()) {
            let _ = fs::remove_file(&a.output);
            return Err(e);
        }
    }
    Ok(())
}

fn cmd_eval(a: EvalArgs) -> Result<()> {
    let read = |p: &PathBuf| {
        fs::read_to_string(p).map_err(|e| Error::Io {
            path: p.clone(),
            source: e,
        })
    };
    let scores = tables::parse_score_table(&read(&a.input)?)?;
    let labels = tables::parse_labels(&read(&a.labels)?)?;
    let joined = tables::join_labels(&scores, &labels)?;
    let summary = metrics::evaluate(&joined)?;
    let json = serde_json::to_string_pretty(&summary).expect("json") + "\n";
    if let Some(out) = &a.output {
        write_file(out, json.as_bytes())?;
    }
    print!("{json}");
    Ok(())
}

/// Low-discrepancy points: coordinate d of point i is frac((i+1)·α_d) for
/// irrational α_d, so all points are distinct and no RNG is involved.
fn weyl_points(dim: usize, n: usize) -> Matrix {
    const PRIMES: [f64; 16] = [
        2.0, 3.0, 5.0, 7.0, 11.0, 13.0, 17.0, 19.0, 23.0, 29.0, 31.0, 37.0, 41.0, 43.0, 47.0, 53.0,
    ];
    let alphas: Vec<f64> = (0..dim)
        .map(|d| PRIMES[d % PRIMES.len()].sqrt() * (1 + d / PRIMES.len()) as f64)
        .collect();
    let mut data = Vec::with_capacity(dim * n);
    for i in 0..n {
        for a in &alphas {
            data.push(((i + 1) as f64 * a).fract());
        }
    }
    Matrix::from_col_major(dim, n, data, Precision::Double).expect("finite points")
}

struct BenchRow {
    n: usize,
    b: usize,
    rate: SampleRate,
    policy: BufferPolicy,
    measured: Option<u64>,
    predicted: String,
    ratio: Option<f64>,
    peak: Option<usize>,
}

fn bench_one(points: &Matrix, b: usize, rate: SampleRate, policy: BufferPolicy) -> BenchRow {
    let n = points.cols();
    let mut row = BenchRow {
        n,
        b,
        rate,
        policy,
        measured: None,
        predicted: String::new(),
        ratio: None,
        peak: None,
    };
    let query = CostQuery::new(n as u64, b as u64, rate);
    row.predicted = match (&query, policy) {
        (Err(e), _) => format!("n/a ({e})"),
        (Ok(q), BufferPolicy::EveryBatch) => match cost::predict_incremental_sum(q) {
            Ok(v) => v.to_string(),
            Err(e) => format!("n/a ({e})"),
        },
        (Ok(q), BufferPolicy::Unbounded) => match cost::predict_batchless(q) {
            Ok(v) => v.to_string(),
            Err(e) => format!("n/a ({e})"),
        },
        (Ok(_), BufferPolicy::Factor(_)) => "n/a (no closed form for buffered sampling)".into(),
    };
    if b == 0 {
        return row;
    }
    let run = || -> Result<_> {
        let mut sampler = IncrementalSampler::new(IncrementalSamplerConfig {
            rate,
            batch_size: b,
            buffer_policy: policy,
        })?;
        for chunk in pipeline::chunks(points, b) {
            sampler.observe_batch_same_basis(&chunk?)?;
        }
        sampler.flush()
    };
    match run() {
        Ok(out) => {
            let measured = out.counter.greedy_comparisons;
            let batchless = n as u128 * u128::from(rate.floor_of(n as u64));
            row.measured = Some(measured);
            row.ratio = (batchless > 0).then(|| cost::ratio(u128::from(measured), batchless));
            row.peak = Some(out.peak_stored);
        }
        Err(e) => {
            row.predicted = format!("{} / run failed ({e})", row.predicted);
        }
    }
    row
}

fn cmd_bench(a: BenchArgs) -> Result<()> {
    let mut problems = Vec::new();
    let rates: Vec<SampleRate> = a
        .sample_rate
        .iter()
        .filter_map(|s| {
            parse_rate(s)
                .map_err(|e| problems.push(config_message(e)))
                .ok()
        })
        .collect();
    let policies: Vec<BufferPolicy> = a
        .buffer
        .iter()
        .filter_map(|s| {
            s.parse()
                .map_err(|e: Error| problems.push(config_message(e)))
                .ok()
        })
        .collect();
    if a.synthetic.is_empty() && a.input.is_empty() {
        problems.push("give --synthetic N[,N...] or --input files".into());
    }
    if !a.synthetic.is_empty() && a.k == 0 {
        problems.push("--k must be at least 1".into());
    }
    if !problems.is_empty() {
        return Err(Error::Config(problems.join("; ")));
    }

    let datasets: Vec<Matrix> = if a.input.is_empty() {
        a.synthetic.iter().map(|&n| weyl_points(a.k, n)).collect()
    } else {
        let mut stream = array_io::BatchStream::open(&a.input, 4096)?;
        let mut all = Matrix::zeros(stream.m(), 0, stream.precision());
        while let Some(b) = stream.next_batch()? {
            all.append_columns(&b)?;
        }
        vec![all]
    };

    let mut out = String::from(
        "N\tB\tr\tpolicy\tmeasured_comparisons\tpredicted_comparisons\tratio_vs_batchless\tpeak_stored\n",
    );
    for points in &datasets {
        for &b in &a.sample_batch {
            for &rate in &rates {
                for &policy in &policies {
                    let row = bench_one(points, b, rate, policy);
                    let opt = |v: Option<String>| v.unwrap_or_else(|| "-".into());
                    out.push_str(&format!(
                        "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                        row.n,
                        row.b,
                        row.rate,
                        row.policy,
                        opt(row.measured.map(|v| v.to_string())),
                        row.predicted,
                        opt(row.ratio.map(|v| format!("{v:.6}"))),
                        opt(row.peak.map(|v| v.to_string())),
                    ));
                }
            }
        }
    }
    match &a.output {
        Some(p) => write_file(p, out.as_bytes()),
        None => std::io::stdout()
            .write_all(out.as_bytes())
            .map_err(|e| Error::Io {
                path: PathBuf::from("<stdout>"),
                source: e,
            }),
    }
}

fn cmd_info(a: InfoArgs) -> Result<()> {
    if a.path.is_dir() {
        if !a.path.join(META_FILE).exists() {
            return Err(Error::Format(format!(
                "{} is a directory without {META_FILE}",
                a.path.display()
            )));
        }
        let bank = MemoryBank::load(&a.path)?;
        let mut v = serde_json::to_value(bank.meta()).expect("meta serializes");
        v["bank_size"] = bank.len().into();
        print_json(&v);
    } else {
        let h = array_io::read_npy_header(&a.path)?;
        print_json(&serde_json::json!({
            "dtype": h.dtype.descr(),
            "shape": h.shape,
            "data_offset": h.data_offset,
            "precision": array_io::precision_of(h.dtype).as_str(),
        }));
    }
    Ok(())
}
