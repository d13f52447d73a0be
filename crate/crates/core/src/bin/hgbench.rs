use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use hybridgraph::analytics::Algorithm;
use hybridgraph::bench::{
    emit_report, emit_sweep, gen_synthetic, load_snap, run_experiment, run_th1_sweep, shuffle, write_report, write_sweep,
    Format, ReportFormat, RunSpec, SyntheticKind, SWEEP_TH1,
};
use hybridgraph::config::Config;
use hybridgraph::error::{Error, Result};

/// Streaming graph update and analytics benchmark.
#[derive(Debug, Parser)]
#[command(name = "hgbench", version)]
struct Args {
    /// Whitespace-separated edge list (`src dst [weight]`, `#` comments).
    #[arg(long, conflicts_with = "synthetic", required_unless_present = "synthetic")]
    input: Option<PathBuf>,

    /// Generate a synthetic graph instead of reading one: short or heavy.
    #[arg(long, value_parser = parse::<SyntheticKind>, requires_all = ["vertices", "edges"])]
    synthetic: Option<SyntheticKind>,

    #[arg(long)]
    vertices: Option<usize>,

    #[arg(long)]
    edges: Option<usize>,

    /// tango, adlist-shared or adlist-chunked.
    #[arg(long, default_value = "tango", value_parser = parse::<Format>)]
    format: Format,

    /// Comma-separated subset of bfs,pr,sssp,cc; empty for none.
    #[arg(long, default_value = "bfs,pr,sssp,cc")]
    algorithms: String,

    #[arg(long, default_value_t = 100_000)]
    batch_size: usize,

    #[arg(long, default_value_t = 4)]
    threads: usize,

    #[arg(long, default_value_t = 1)]
    seed: u64,

    #[arg(long)]
    th1: Option<usize>,

    /// Use edge weights; inputs without weights get synthetic ones.
    #[arg(long)]
    weighted: bool,

    #[arg(long)]
    directed: bool,

    /// `key = value` file applied before the flags above.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Output path; standard output when absent.
    #[arg(long)]
    report: Option<PathBuf>,

    #[arg(long, default_value = "csv", value_parser = parse::<ReportFormat>)]
    report_format: ReportFormat,

    /// Run the hybrid format once per TH1 in 8..=512 and report each.
    #[arg(long)]
    sweep_th1: bool,
}

fn parse<T: std::str::FromStr<Err = Error>>(s: &str) -> std::result::Result<T, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn algorithms(list: &str) -> Result<Vec<Algorithm>> {
    list.split(',').filter(|s| !s.trim().is_empty()).map(str::parse).collect()
}

fn run(args: Args) -> Result<()> {
    let mut config = match &args.config {
        Some(path) => Config::default().apply_kv_file(path)?,
        None => Config::default(),
    };
    if let Some(th1) = args.th1 {
        config.th1 = th1;
    }
    config.validate()?;

    let mut list = match (&args.input, args.synthetic) {
        (Some(path), _) => load_snap(path)?,
        (None, Some(kind)) => gen_synthetic(
            kind,
            args.vertices.unwrap_or_default(),
            args.edges.unwrap_or_default(),
            args.seed,
        )?,
        (None, None) => return Err(Error::InvalidConfig("either --input or --synthetic is required".into())),
    };
    list.directed = args.directed || config.directed;
    list = if args.weighted || config.weighted {
        list.with_weights()
    } else {
        list.without_weights()
    };
    let list = shuffle(list, args.seed);

    let spec = RunSpec {
        format: args.format,
        algorithms: algorithms(&args.algorithms)?,
        batch_size: args.batch_size,
        threads: args.threads,
    };

    if args.sweep_th1 {
        let points = run_th1_sweep(&config, &list, &spec, &SWEEP_TH1)?;
        match &args.report {
            Some(path) => emit_sweep(&points, path, args.report_format)?,
            None => write_sweep(std::io::stdout().lock(), &points, args.report_format)?,
        }
    } else {
        let report = run_experiment(&config, &list, &spec)?;
        let reports = [report];
        match &args.report {
            Some(path) => emit_report(&reports, path, args.report_format)?,
            None => write_report(std::io::stdout().lock(), &reports, args.report_format)?,
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("hgbench: {e}");
            ExitCode::FAILURE
        }
    }
}
