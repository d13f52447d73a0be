//! Batched insert/delete runs with analytics after every batch.

use std::str::FromStr;
use std::time::Instant;

use rayon::{ThreadPool, ThreadPoolBuilder};

use crate::analytics::{Algorithm, AnalyticsState, BatchDelta};
use crate::baseline::{AdListChunked, AdListShared};
use crate::bench::input::EdgeList;
use crate::config::Config;
use crate::error::{Error, Result};
use crate::graph::{DynamicGraph, UpdateOp};
use crate::store::HybridStore;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Format {
    Tango,
    AdListShared,
    AdListChunked,
}

impl Format {
    pub const ALL: [Format; 3] = [Format::Tango, Format::AdListShared, Format::AdListChunked];

    pub fn name(self) -> &'static str {
        match self {
            Format::Tango => "tango",
            Format::AdListShared => "adlist-shared",
            Format::AdListChunked => "adlist-chunked",
        }
    }
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tango" => Ok(Format::Tango),
            "adlist-shared" | "adlist_shared" => Ok(Format::AdListShared),
            "adlist-chunked" | "adlist_chunked" => Ok(Format::AdListChunked),
            other => Err(Error::InvalidConfig(format!("unknown format {other:?}"))),
        }
    }
}

/// Empty graph of the given format. Sharded formats get one shard per thread.
pub fn make_graph(format: Format, config: &Config, num_vertices: usize, threads: usize) -> Result<Box<dyn DynamicGraph>> {
    Ok(match format {
        Format::Tango => Box::new(HybridStore::new(config.clone(), num_vertices, threads)?),
        Format::AdListShared => Box::new(AdListShared::new(config, num_vertices)),
        Format::AdListChunked => Box::new(AdListChunked::new(config, num_vertices, threads)?),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Insert,
    Delete,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::Insert => "insert",
            Phase::Delete => "delete",
        }
    }
}

/// Measurements for one batch.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchReport {
    pub batch: usize,
    pub phase: Phase,
    pub edges: usize,
    pub update_secs: f64,
    pub analytics_secs: f64,
    /// Seconds per algorithm in `Algorithm::ALL` order; `None` if not run.
    pub algorithm_secs: [Option<f64>; 4],
    pub algorithms_run: usize,
    pub live_edges: u64,
    pub memory_bytes: u64,
    /// Probe-distance samples of hash-index inserts in this batch. Zero for
    /// formats without a hash index.
    pub probe_samples: u64,
    pub probe_mean: f64,
    pub probe_le8_frac: f64,
}

impl BatchReport {
    pub fn update_eps(&self) -> f64 {
        self.edges as f64 / self.update_secs
    }

    /// Live edges times kernels run, per second of analytics.
    pub fn analytics_eps(&self) -> f64 {
        if self.algorithms_run == 0 {
            return f64::NAN;
        }
        (self.live_edges * self.algorithms_run as u64) as f64 / self.analytics_secs
    }

    /// `NaN` when no edge is live.
    pub fn bytes_per_edge(&self) -> f64 {
        if self.live_edges == 0 {
            f64::NAN
        } else {
            self.memory_bytes as f64 / self.live_edges as f64
        }
    }
}

/// Whole-run aggregates.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub insert_geomean_eps: f64,
    pub delete_geomean_eps: f64,
    pub analytics_geomean_eps: f64,
    pub mean_bytes_per_edge: f64,
    /// Memory with every input edge inserted.
    pub peak_memory_bytes: u64,
    pub peak_live_edges: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub format: Format,
    pub batches: Vec<BatchReport>,
    pub summary: Summary,
}

/// Geometric mean of the finite positive values; `NaN` if there are none.
pub fn geomean(values: impl IntoIterator<Item = f64>) -> f64 {
    let (mut log_sum, mut n) = (0.0, 0usize);
    for v in values {
        if v.is_finite() && v > 0.0 {
            log_sum += v.ln();
            n += 1;
        }
    }
    if n == 0 {
        f64::NAN
    } else {
        (log_sum / n as f64).exp()
    }
}

/// Run parameters besides the graph and input.
#[derive(Debug, Clone)]
pub struct RunSpec {
    pub format: Format,
    pub algorithms: Vec<Algorithm>,
    pub batch_size: usize,
    pub threads: usize,
}

pub fn build_pool(threads: usize) -> Result<ThreadPool> {
    if threads == 0 {
        return Err(Error::InvalidConfig("threads must be at least 1".into()));
    }
    Ok(ThreadPoolBuilder::new().num_threads(threads).build()?)
}

/// Inserts `list` batch by batch, then deletes it in the same order, running
/// the requested kernels after each batch.
pub fn run_experiment(config: &Config, list: &EdgeList, spec: &RunSpec) -> Result<ExperimentReport> {
    run_experiment_observed(config, list, spec, |_, _, _| {})
}

/// Like [`run_experiment`], calling `observe` after each batch's analytics.
pub fn run_experiment_observed<F>(config: &Config, list: &EdgeList, spec: &RunSpec, mut observe: F) -> Result<ExperimentReport>
where
    F: FnMut(&BatchReport, &AnalyticsState, &dyn DynamicGraph),
{
    if spec.batch_size == 0 {
        return Err(Error::InvalidConfig("batch size must be at least 1".into()));
    }
    let mut config = config.clone();
    config.directed = list.directed;
    config.weighted = list.is_weighted();
    config.validate()?;
    let pool = build_pool(spec.threads)?;
    let mut graph = make_graph(spec.format, &config, list.num_vertices, spec.threads)?;
    let mut state = AnalyticsState::new(list.edges.first().map_or(0, |e| e.src));

    let inserts: Vec<UpdateOp> = list
        .edges
        .iter()
        .map(|e| UpdateOp::Insert {
            src: e.src,
            dst: e.dst,
            prop: e.weight,
        })
        .collect();
    let deletes: Vec<UpdateOp> = list
        .edges
        .iter()
        .map(|e| UpdateOp::Delete { src: e.src, dst: e.dst })
        .collect();

    let mut batches = Vec::new();
    let mut peak = (0u64, 0u64);
    let mut index = 0;
    for (phase, ops) in [(Phase::Insert, &inserts), (Phase::Delete, &deletes)] {
        for chunk in ops.chunks(spec.batch_size) {
            reset_probes(graph.as_mut());
            let start = Instant::now();
            let outcome = graph.apply_batch(chunk, &pool)?;
            let update_secs = start.elapsed().as_secs_f64();

            let delta = BatchDelta::new(chunk, &outcome);
            let mut algorithm_secs = [None; 4];
            let mut analytics_secs = 0.0;
            for &alg in &spec.algorithms {
                let g = graph.as_ref();
                let start = Instant::now();
                pool.install(|| state.run(alg, g, &delta))?;
                let secs = start.elapsed().as_secs_f64();
                let slot = Algorithm::ALL.iter().position(|&a| a == alg).expect("known algorithm");
                algorithm_secs[slot] = Some(algorithm_secs[slot].unwrap_or(0.0) + secs);
                analytics_secs += secs;
            }

            let (probe_samples, probe_mean, probe_le8_frac) = probe_snapshot(graph.as_ref());
            let report = BatchReport {
                batch: index,
                phase,
                edges: chunk.len(),
                update_secs,
                analytics_secs,
                algorithm_secs,
                algorithms_run: spec.algorithms.len(),
                live_edges: graph.num_edges(),
                memory_bytes: graph.memory_bytes(),
                probe_samples,
                probe_mean,
                probe_le8_frac,
            };
            if phase == Phase::Insert {
                peak = (report.memory_bytes, report.live_edges);
            }
            observe(&report, &state, graph.as_ref());
            batches.push(report);
            index += 1;
        }
    }
    let summary = summarize(&batches, peak);
    Ok(ExperimentReport {
        format: spec.format,
        batches,
        summary,
    })
}

fn summarize(batches: &[BatchReport], peak: (u64, u64)) -> Summary {
    let per_phase = |p: Phase| geomean(batches.iter().filter(|b| b.phase == p).map(BatchReport::update_eps));
    let bpe: Vec<f64> = batches.iter().map(BatchReport::bytes_per_edge).filter(|x| !x.is_nan()).collect();
    Summary {
        insert_geomean_eps: per_phase(Phase::Insert),
        delete_geomean_eps: per_phase(Phase::Delete),
        analytics_geomean_eps: geomean(batches.iter().map(BatchReport::analytics_eps)),
        mean_bytes_per_edge: if bpe.is_empty() {
            f64::NAN
        } else {
            bpe.iter().sum::<f64>() / bpe.len() as f64
        },
        peak_memory_bytes: peak.0,
        peak_live_edges: peak.1,
    }
}

fn reset_probes(g: &mut dyn DynamicGraph) {
    if let Some(h) = g.as_hybrid_mut() {
        h.reset_probe_stats();
    }
}

fn probe_snapshot(g: &dyn DynamicGraph) -> (u64, f64, f64) {
    match g.as_hybrid() {
        Some(h) => {
            let hist = h.probe_stats().inserts;
            (hist.count(), hist.mean(), hist.fraction_at_most(8))
        }
        None => (0, f64::NAN, f64::NAN),
    }
}

/// One point of a TH1 sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub th1: usize,
    pub summary: Summary,
}

/// Default TH1 values swept: powers of two from 8 to 512.
pub const SWEEP_TH1: [usize; 7] = [8, 16, 32, 64, 128, 256, 512];

/// Runs the hybrid format once per TH1 value.
pub fn run_th1_sweep(config: &Config, list: &EdgeList, spec: &RunSpec, th1_values: &[usize]) -> Result<Vec<SweepPoint>> {
    th1_values
        .iter()
        .map(|&th1| {
            let cfg = Config { th1, ..config.clone() };
            let spec = RunSpec {
                format: Format::Tango,
                ..spec.clone()
            };
            Ok(SweepPoint {
                th1,
                summary: run_experiment(&cfg, list, &spec)?.summary,
            })
        })
        .collect()
}
