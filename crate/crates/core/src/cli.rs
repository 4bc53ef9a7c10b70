//! Command-line driver: `mst`, `verify`, `bench` and `generate`.
//!
//! Exit codes: 0 success, 1 verification failure, 2 usage error (bad flags,
//! bad parameters, invalid data), 3 I/O error (unreadable or malformed
//! files). Reports go to stdout as tab-separated rows under a fixed header,
//! diagnostics to stderr.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::PathBuf;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::data::{self, DatasetKind, DatasetSpec, Format};
use crate::error::{EmstError, Result};
use crate::geometry::PointSet;
use crate::metric::Metric;
use crate::mst::{boruvka_emst, EmstOptions, MetricKind, MstResult, Pruning, WeightedEdge};
use crate::oracle::{brute_core_distances, prim_mst, DEFAULT_ORACLE_CAP};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "emst", version, about = "Euclidean minimum spanning trees via single-tree Borůvka")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compute the spanning tree of a point file.
    Mst(MstArgs),
    /// Compare the engine (or an edge file) against the dense Prim oracle.
    Verify(VerifyArgs),
    /// Time the engine over sample sizes and report per-phase rows.
    Bench(BenchArgs),
    /// Write a synthetic dataset.
    Generate(GenerateArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MetricArg {
    Euclidean,
    Mrd,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FormatArg {
    Csv,
    Bin,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Format {
        match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Bin => Format::Bin,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum KindArg {
    Uniform,
    Normal,
    Blobs,
}

#[derive(Args, Debug)]
struct InputArgs {
    /// Point file; `-` reads CSV from stdin.
    input: PathBuf,
    /// Input format; guessed from the extension when omitted (`.bin` is binary).
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
}

impl InputArgs {
    fn read(&self) -> Result<PointSet> {
        let format = self.format.map_or_else(|| Format::from_path(&self.input), Format::from);
        data::read_points(&self.input, format)
    }
}

#[derive(Args, Debug)]
struct MetricArgs {
    #[arg(long, value_enum, default_value = "euclidean")]
    metric: MetricArg,
    /// Neighbor rank for core distances (self included); required with `--metric mrd`.
    #[arg(long)]
    k_pts: Option<usize>,
}

impl MetricArgs {
    fn kind(&self) -> Result<MetricKind> {
        match (self.metric, self.k_pts) {
            (MetricArg::Euclidean, None) => Ok(MetricKind::Euclidean),
            (MetricArg::Euclidean, Some(_)) => {
                Err(EmstError::InvalidParameter("--k-pts only applies to --metric mrd".into()))
            }
            (MetricArg::Mrd, Some(k_pts)) => Ok(MetricKind::MutualReachability { k_pts }),
            (MetricArg::Mrd, None) => Err(EmstError::InvalidParameter("--metric mrd needs --k-pts".into())),
        }
    }
}

#[derive(Args, Debug)]
struct EngineArgs {
    /// Worker threads; 0 uses all available.
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Disable skipping of subtrees that lie entirely in the query's component.
    #[arg(long)]
    no_opt1: bool,
    /// Disable the Z-order upper bounds on the search radius.
    #[arg(long)]
    no_opt2: bool,
}

impl EngineArgs {
    fn options(&self) -> EmstOptions {
        EmstOptions {
            pruning: Pruning { subtree_skipping: !self.no_opt1, upper_bounds: !self.no_opt2 },
            threads: self.threads,
        }
    }
}

#[derive(Args, Debug)]
struct MstArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    metric: MetricArgs,
    #[command(flatten)]
    engine: EngineArgs,
    /// Edge file; stdout when omitted (the summary then goes to stderr).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    metric: MetricArgs,
    #[command(flatten)]
    engine: EngineArgs,
    /// Check this edge file instead of running the engine.
    #[arg(long)]
    edges: Option<PathBuf>,
    /// Largest input the oracle accepts.
    #[arg(long, default_value_t = DEFAULT_ORACLE_CAP)]
    cap: usize,
}

#[derive(Args, Debug)]
struct DatasetArgs {
    #[arg(long, value_enum, default_value = "uniform")]
    kind: KindArg,
    /// Number of points.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Blob count for `--kind blobs`.
    #[arg(long, default_value_t = 8)]
    blobs: usize,
    /// Per-axis standard deviation of each blob.
    #[arg(long, default_value_t = 0.05)]
    spread: f64,
}

impl DatasetArgs {
    fn spec(&self, n: usize) -> DatasetSpec {
        let kind = match self.kind {
            KindArg::Uniform => DatasetKind::Uniform,
            KindArg::Normal => DatasetKind::Normal,
            KindArg::Blobs => DatasetKind::ClusteredBlobs { blobs: self.blobs, spread: self.spread },
        };
        DatasetSpec { kind, n, dim: self.dim, seed: self.seed }
    }
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[command(flatten)]
    dataset: DatasetArgs,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    format: FormatArg,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// Point file to sample from; otherwise the generator flags describe the data.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    #[command(flatten)]
    dataset: DatasetArgs,
    /// Comma-separated sample sizes.
    #[arg(long, value_delimiter = ',', required = true)]
    samples: Vec<usize>,
    #[arg(long, default_value_t = 3)]
    repeats: usize,
    /// Seed for drawing the subsamples.
    #[arg(long, default_value_t = 0)]
    sample_seed: u64,
    #[command(flatten)]
    metric: MetricArgs,
    #[command(flatten)]
    engine: EngineArgs,
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    let result = match cli.command {
        Command::Mst(a) => cmd_mst(&a, out, err),
        Command::Verify(a) => cmd_verify(&a, out, err),
        Command::Bench(a) => cmd_bench(&a, out),
        Command::Generate(a) => cmd_generate(&a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn exit_code(e: &EmstError) -> i32 {
    match e {
        EmstError::Io(_) | EmstError::Parse { .. } | EmstError::InvalidBinary(_) => EXIT_IO,
        _ => EXIT_USAGE,
    }
}

/// `%.9g`: nine significant digits, trailing zeros dropped.
pub fn format_float(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific notation has an exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..9).contains(&exp) {
        let decimals = (8 - exp) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa.to_string()), exp.abs())
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn secs(d: Duration) -> String {
    format_float(d.as_secs_f64())
}

fn effective_threads(threads: usize) -> usize {
    if threads == 0 {
        rayon::current_num_threads()
    } else {
        threads
    }
}

const MST_HEADER: &str = "n\td\tmetric\tk_pts\tedges\ttotal_weight\titerations\tthreads\tt_total";

fn metric_columns(kind: MetricKind) -> (&'static str, usize) {
    match kind {
        MetricKind::Euclidean => ("euclidean", 0),
        MetricKind::MutualReachability { k_pts } => ("mrd", k_pts),
    }
}

fn cmd_mst(a: &MstArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let kind = a.metric.kind()?;
    let points = a.input.read()?;
    let options = a.engine.options();
    let result = boruvka_emst(&points, kind, &options)?;

    let summary_to: &mut dyn Write = match &a.out {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path)?);
            data::write_edges(&mut w, &result.edges)?;
            w.flush()?;
            out
        }
        None => {
            let mut w = BufWriter::new(&mut *out);
            data::write_edges(&mut w, &result.edges)?;
            w.flush()?;
            drop(w);
            err
        }
    };
    let (metric, k_pts) = metric_columns(kind);
    writeln!(summary_to, "{MST_HEADER}")?;
    writeln!(
        summary_to,
        "{}\t{}\t{metric}\t{k_pts}\t{}\t{}\t{}\t{}\t{}",
        points.len(),
        points.dim(),
        result.edges.len(),
        format_float(result.total_weight),
        result.iterations,
        effective_threads(options.threads),
        secs(result.timings.total),
    )?;
    Ok(EXIT_OK)
}

/// Differences between two spanning trees, as `(missing, extra)` relative
/// to `expected`.
fn edge_diff(expected: &[WeightedEdge], actual: &[WeightedEdge]) -> (Vec<WeightedEdge>, Vec<WeightedEdge>) {
    use std::collections::BTreeSet;
    let e: BTreeSet<(u32, u32)> = expected.iter().map(WeightedEdge::endpoints).collect();
    let a: BTreeSet<(u32, u32)> = actual.iter().map(WeightedEdge::endpoints).collect();
    let missing = expected.iter().filter(|x| !a.contains(&x.endpoints())).copied().collect();
    let extra = actual.iter().filter(|x| !e.contains(&x.endpoints())).copied().collect();
    (missing, extra)
}

fn cmd_verify(a: &VerifyArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let kind = a.metric.kind()?;
    let points = a.input.read()?;
    if points.len() > a.cap {
        return Err(EmstError::OracleCapExceeded { n: points.len(), cap: a.cap });
    }
    let metric = match kind {
        MetricKind::Euclidean => Metric::Euclidean,
        MetricKind::MutualReachability { k_pts } => Metric::MutualReachability(brute_core_distances(&points, k_pts)?),
    };
    let expected = prim_mst(&points, &metric, a.cap)?;
    let actual = match &a.edges {
        Some(path) => MstResult::from_edges(data::read_edges(BufReader::new(File::open(path)?))?),
        None => boruvka_emst(&points, kind, &a.engine.options())?,
    };

    let (missing, extra) = edge_diff(&expected.edges, &actual.edges);
    for e in &missing {
        writeln!(err, "missing\t{}\t{}\t{}", e.u, e.v, format_float(e.weight))?;
    }
    for e in &extra {
        writeln!(err, "extra\t{}\t{}\t{}", e.u, e.v, format_float(e.weight))?;
    }
    let scale = expected.total_weight.abs().max(f64::MIN_POSITIVE);
    let weight_ok = (expected.total_weight - actual.total_weight).abs() <= 1e-9 * scale;
    if !weight_ok {
        writeln!(
            err,
            "total weight {} differs from oracle {}",
            format_float(actual.total_weight),
            format_float(expected.total_weight)
        )?;
    }
    let differences = missing.len() + extra.len();
    writeln!(out, "n\td\tedges\toracle_edges\tdifferences\ttotal_weight\toracle_total_weight\tverdict")?;
    let pass = differences == 0 && weight_ok;
    writeln!(
        out,
        "{}\t{}\t{}\t{}\t{differences}\t{}\t{}\t{}",
        points.len(),
        points.dim(),
        actual.edges.len(),
        expected.edges.len(),
        format_float(actual.total_weight),
        format_float(expected.total_weight),
        if pass { "PASS" } else { "FAIL" },
    )?;
    Ok(if pass { EXIT_OK } else { EXIT_VERIFY_FAILED })
}

fn cmd_generate(a: &GenerateArgs) -> Result<i32> {
    let n = a.dataset.n.ok_or_else(|| EmstError::InvalidParameter("--n is required".into()))?;
    let points = data::generate(&a.dataset.spec(n))?;
    data::write_points(&a.out, &points, a.format.into())?;
    Ok(EXIT_OK)
}

pub const BENCH_HEADER: &str = "dataset\tn\td\tmetric\tk_pts\tthreads\trepeats\titerations\t\
t_tree\tt_core\tt_labels\tt_bounds\tt_search\tt_merge\tt_finalize\tt_mst\tt_total\trate\trate_ratio\ttime_ratio";

fn cmd_bench(a: &BenchArgs, out: &mut dyn Write) -> Result<i32> {
    let kind = a.metric.kind()?;
    if a.repeats == 0 {
        return Err(EmstError::InvalidParameter("--repeats must be at least 1".into()));
    }
    if a.samples.contains(&0) {
        return Err(EmstError::InvalidParameter("sample sizes must be positive".into()));
    }
    let largest = *a.samples.iter().max().expect("clap requires at least one sample size");
    let (base, id) = match &a.input {
        Some(path) => {
            let format = a.format.map_or_else(|| Format::from_path(path), Format::from);
            let name = path.file_stem().map_or("input".into(), |s| s.to_string_lossy().into_owned());
            (data::read_points(path, format)?, name)
        }
        None => {
            let spec = a.dataset.spec(a.dataset.n.unwrap_or(largest));
            (data::generate(&spec)?, spec.id())
        }
    };
    if largest > base.len() {
        return Err(EmstError::InvalidParameter(format!("cannot sample {largest} of {} points", base.len())));
    }
    let (metric, k_pts) = metric_columns(kind);
    let options = a.engine.options();
    let threads = effective_threads(options.threads);

    writeln!(out, "{BENCH_HEADER}")?;
    let mut previous: Option<(usize, f64, f64)> = None;
    for &size in &a.samples {
        let points =
            if size == base.len() { base.clone() } else { data::sample(&base, size, a.sample_seed)? };
        let mut runs = (0..a.repeats)
            .map(|_| boruvka_emst(&points, kind, &options))
            .collect::<Result<Vec<_>>>()?;
        runs.sort_by_key(|r| r.timings.total);
        let median = &runs[runs.len() / 2];
        let t = &median.timings;
        let sum = |f: fn(&crate::mst::IterationTimings) -> Duration| t.iterations.iter().map(f).sum::<Duration>();
        let total = t.total.as_secs_f64();
        let rate = (size * points.dim()) as f64 / total;
        let (rate_ratio, time_ratio) = match previous {
            Some((_, prev_rate, prev_total)) => (format_float(rate / prev_rate), format_float(total / prev_total)),
            None => ("-".to_string(), "-".to_string()),
        };
        writeln!(
            out,
            "{id}\t{size}\t{}\t{metric}\t{k_pts}\t{threads}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{rate_ratio}\t{time_ratio}",
            points.dim(),
            a.repeats,
            median.iterations,
            secs(t.tree),
            secs(t.core_distances),
            secs(sum(|i| i.reduce_labels)),
            secs(sum(|i| i.upper_bounds)),
            secs(sum(|i| i.find_edges)),
            secs(sum(|i| i.merge)),
            secs(t.finalize),
            secs(t.boruvka()),
            secs(t.total),
            format_float(rate),
        )?;
        previous = Some((size, rate, total));
    }
    Ok(EXIT_OK)
}

/// Reads a report written by `bench` back into header-keyed rows.
pub fn parse_report(text: &str) -> Vec<Vec<(String, String)>> {
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().map(|h| h.split('\t').collect()).unwrap_or_default();
    lines
        .map(|l| header.iter().zip(l.split('\t')).map(|(k, v)| (k.to_string(), v.to_string())).collect())
        .collect()
}
