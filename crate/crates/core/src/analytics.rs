//! Incremental BFS, SSSP, PageRank and connected components.
//!
//! All kernels read the graph only through [`GraphView`] cursors and run on
//! the rayon pool they are called from.
//!
//! BFS, SSSP and CC values only decrease while edges are added, so an
//! insert-only batch restarts label-correcting propagation from the tails of
//! the new edges with the previous values kept. A batch that deletes edges or
//! overwrites an existing edge's weight resets the values and propagates from
//! scratch. PageRank always restarts power iteration from the previous ranks.
//!
//! PageRank uses
//! `rank(v) = (1 - d)/|V| + d * (sum over u->v of rank(u)/outdeg(u) + sink/|V|)`
//! where `sink` is the total rank of vertices without out-edges, `d = 0.85`,
//! and iteration stops once the L1 change drops below `1e-7` or after 100
//! rounds. Ranks sum to one.

use std::str::FromStr;
use std::sync::atomic::{AtomicU32, AtomicU64, Ordering};

use rayon::prelude::*;

use crate::config::{Edge, VertexId};
use crate::error::{Error, Result};
use crate::graph::{BatchOutcome, GraphView, UpdateOp};

/// Marker for unreachable vertices in BFS depths and SSSP distances.
pub const UNREACHABLE: u64 = u64::MAX;

pub const PR_DAMPING: f64 = 0.85;
pub const PR_TOLERANCE: f64 = 1e-7;
pub const PR_MAX_ITERATIONS: usize = 100;

/// Human-readable PageRank definition written into report headers.
pub const PR_FORMULA: &str = "rank(v) = (1-d)/|V| + d*(sum_{u->v} rank(u)/outdeg(u) + sink/|V|), d=0.85, L1 tol 1e-7, max 100 iterations, sink = rank mass of vertices without out-edges";

const SUM_CHUNK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    Bfs,
    PageRank,
    Sssp,
    Cc,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [Algorithm::Bfs, Algorithm::PageRank, Algorithm::Sssp, Algorithm::Cc];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Bfs => "bfs",
            Algorithm::PageRank => "pr",
            Algorithm::Sssp => "sssp",
            Algorithm::Cc => "cc",
        }
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "bfs" => Ok(Algorithm::Bfs),
            "pr" | "pagerank" => Ok(Algorithm::PageRank),
            "sssp" => Ok(Algorithm::Sssp),
            "cc" => Ok(Algorithm::Cc),
            other => Err(Error::InvalidConfig(format!("unknown algorithm {other:?}"))),
        }
    }
}

/// What the last update batch changed.
#[derive(Debug, Clone, Copy)]
pub struct BatchDelta<'a> {
    ops: &'a [UpdateOp],
    monotone: bool,
}

impl<'a> BatchDelta<'a> {
    /// `outcome` tells whether any insert overwrote an existing edge.
    pub fn new(ops: &'a [UpdateOp], outcome: &BatchOutcome) -> Self {
        let monotone = outcome.updated == 0 && outcome.deleted == 0 && !ops.iter().any(UpdateOp::is_delete);
        BatchDelta { ops, monotone }
    }

    /// A delta that forces recomputation from scratch.
    pub fn full() -> Self {
        BatchDelta {
            ops: &[],
            monotone: false,
        }
    }

    /// True when previous BFS/SSSP/CC values stay valid upper bounds.
    pub fn is_monotone(&self) -> bool {
        self.monotone
    }

    fn inserted(&self) -> impl Iterator<Item = (VertexId, VertexId)> + 'a {
        self.ops.iter().filter_map(|op| match *op {
            UpdateOp::Insert { src, dst, .. } => Some((src, dst)),
            UpdateOp::Delete { .. } => None,
        })
    }
}

/// Per-vertex values kept across batches for one monotone kernel.
#[derive(Debug, Default)]
pub struct LabelState {
    values: Vec<AtomicU64>,
    ready: bool,
}

impl LabelState {
    pub fn values(&self) -> Vec<u64> {
        self.values.iter().map(|a| a.load(Ordering::Relaxed)).collect()
    }

    fn reset(&mut self, n: usize, init: impl Fn(usize) -> u64 + Sync) {
        if self.values.len() != n {
            self.values = (0..n).map(|_| AtomicU64::new(0)).collect();
        }
        self.values.par_iter().enumerate().for_each(|(v, a)| a.store(init(v), Ordering::Relaxed));
        self.ready = true;
    }

    #[inline]
    fn get(&self, v: VertexId) -> u64 {
        self.values[v as usize].load(Ordering::Relaxed)
    }
}

#[derive(Debug, Default)]
pub struct RankState {
    ranks: Vec<f64>,
    last_iterations: usize,
}

impl RankState {
    pub fn ranks(&self) -> &[f64] {
        &self.ranks
    }

    /// Iterations used by the last run.
    pub fn last_iterations(&self) -> usize {
        self.last_iterations
    }
}

#[derive(Clone, Copy)]
enum Dirs {
    Out,
    Both,
}

/// Label-correcting propagation: repeatedly lowers `values[w]` to
/// `cand(values[u], edge)` for every traversed edge `u -> w` until nothing
/// changes. Returns the number of edges examined.
fn propagate<G, F>(g: &G, st: &LabelState, mut frontier: Vec<VertexId>, dirs: Dirs, cand: F) -> u64
where
    G: GraphView + ?Sized,
    F: Fn(u64, Edge) -> u64 + Sync,
{
    let n = g.num_vertices();
    let queued: Vec<AtomicU32> = (0..n).map(|_| AtomicU32::new(0)).collect();
    let mut round = 0u32;
    let mut examined = 0u64;
    while !frontier.is_empty() {
        round += 1;
        let relax_from = |u: VertexId, edges: crate::graph::NeighborCursor<'_>, next: &mut Vec<VertexId>| {
            let base = st.get(u);
            let mut count = 0u64;
            if base == UNREACHABLE {
                return count;
            }
            for e in edges {
                count += 1;
                let c = cand(base, e);
                let slot = &st.values[e.dst as usize];
                if c < slot.fetch_min(c, Ordering::Relaxed) && queued[e.dst as usize].swap(round, Ordering::Relaxed) != round {
                    next.push(e.dst);
                }
            }
            count
        };
        let (next, seen) = frontier
            .par_iter()
            .fold(
                || (Vec::new(), 0u64),
                |(mut next, mut seen), &u| {
                    seen += relax_from(u, g.out_neighbors(u), &mut next);
                    if let Dirs::Both = dirs {
                        seen += relax_from(u, g.in_neighbors(u), &mut next);
                    }
                    (next, seen)
                },
            )
            .reduce(
                || (Vec::new(), 0),
                |(mut a, x), (b, y)| {
                    a.extend(b);
                    (a, x + y)
                },
            );
        examined += seen;
        frontier = next;
    }
    examined
}

/// Vertices whose out-edges must be re-relaxed after an insert-only batch.
fn tails(directed: bool, delta: &BatchDelta) -> Vec<VertexId> {
    let mut out: Vec<VertexId> = delta
        .inserted()
        .flat_map(|(s, d)| if directed { [s, s] } else { [s, d] })
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}

fn check_source(g: &(impl GraphView + ?Sized), source: VertexId) -> Result<()> {
    crate::graph::check_vertex(source, g.num_vertices())
}

/// Hop distances from `source` along out-edges.
pub fn run_bfs<G: GraphView + ?Sized>(g: &G, st: &mut LabelState, source: VertexId, delta: &BatchDelta) -> Result<u64> {
    check_source(g, source)?;
    let n = g.num_vertices();
    let frontier = if st.ready && st.values.len() == n && delta.is_monotone() {
        tails(g.is_directed(), delta)
    } else {
        st.reset(n, |v| if v as u64 == source { 0 } else { UNREACHABLE });
        vec![source]
    };
    Ok(propagate(g, st, frontier, Dirs::Out, |d, _| d + 1))
}

/// Weighted shortest-path distances from `source`. Unweighted graphs use
/// unit weights.
pub fn run_sssp<G: GraphView + ?Sized>(g: &G, st: &mut LabelState, source: VertexId, delta: &BatchDelta) -> Result<u64> {
    check_source(g, source)?;
    let n = g.num_vertices();
    let frontier = if st.ready && st.values.len() == n && delta.is_monotone() {
        tails(g.is_directed(), delta)
    } else {
        st.reset(n, |v| if v as u64 == source { 0 } else { UNREACHABLE });
        vec![source]
    };
    Ok(propagate(g, st, frontier, Dirs::Out, |d, e| d.saturating_add(e.weight())))
}

/// Component labels: each vertex gets the smallest id reachable when edges
/// are followed in both directions.
pub fn run_cc<G: GraphView + ?Sized>(g: &G, st: &mut LabelState, delta: &BatchDelta) -> u64 {
    let n = g.num_vertices();
    let dirs = if g.is_directed() { Dirs::Both } else { Dirs::Out };
    let frontier = if st.ready && st.values.len() == n && delta.is_monotone() {
        let mut f: Vec<VertexId> = delta.inserted().flat_map(|(s, d)| [s, d]).collect();
        f.sort_unstable();
        f.dedup();
        f
    } else {
        st.reset(n, |v| v as u64);
        (0..n as u64).collect()
    };
    propagate(g, st, frontier, dirs, |label, _| label)
}

/// Order-fixed parallel sum, identical for every thread count.
fn det_sum(n: usize, f: impl Fn(usize) -> f64 + Sync) -> f64 {
    let chunks: Vec<f64> = (0..n.div_ceil(SUM_CHUNK))
        .into_par_iter()
        .map(|c| (c * SUM_CHUNK..((c + 1) * SUM_CHUNK).min(n)).map(&f).sum())
        .collect();
    chunks.iter().sum()
}

/// PageRank warm-started from the previous ranks. Returns edges examined.
pub fn run_pr<G: GraphView + ?Sized>(g: &G, st: &mut RankState, _delta: &BatchDelta) -> u64 {
    let n = g.num_vertices();
    if n == 0 {
        st.ranks.clear();
        st.last_iterations = 0;
        return 0;
    }
    let nf = n as f64;
    if st.ranks.len() != n {
        st.ranks = vec![1.0 / nf; n];
    }
    let out_deg: Vec<usize> = (0..n as u64).into_par_iter().map(|v| g.out_degree(v)).collect();
    let mut contrib = vec![0.0f64; n];
    let mut next = vec![0.0f64; n];
    let mut examined = 0u64;
    let mut iterations = 0;
    while iterations < PR_MAX_ITERATIONS {
        iterations += 1;
        let ranks = &st.ranks;
        contrib
            .par_iter_mut()
            .enumerate()
            .for_each(|(u, c)| *c = if out_deg[u] > 0 { ranks[u] / out_deg[u] as f64 } else { 0.0 });
        let sink = det_sum(n, |u| if out_deg[u] == 0 { ranks[u] } else { 0.0 });
        let base = (1.0 - PR_DAMPING) / nf + PR_DAMPING * sink / nf;
        let contrib_ref = &contrib;
        next.par_iter_mut().enumerate().for_each(|(v, r)| {
            let s: f64 = g.in_neighbors(v as u64).map(|e| contrib_ref[e.dst as usize]).sum();
            *r = base + PR_DAMPING * s;
        });
        examined += out_deg.iter().map(|&d| d as u64).sum::<u64>();
        let next_ref = &next;
        let diff = det_sum(n, |v| (next_ref[v] - ranks[v]).abs());
        std::mem::swap(&mut st.ranks, &mut next);
        if diff < PR_TOLERANCE {
            break;
        }
    }
    st.last_iterations = iterations;
    examined
}

/// State for every requested kernel, carried across batches.
#[derive(Debug, Default)]
pub struct AnalyticsState {
    pub bfs: LabelState,
    pub sssp: LabelState,
    pub cc: LabelState,
    pub pr: RankState,
    pub source: VertexId,
}

impl AnalyticsState {
    pub fn new(source: VertexId) -> Self {
        AnalyticsState {
            source,
            ..Default::default()
        }
    }

    /// Runs one kernel and returns the number of edges it examined.
    pub fn run<G: GraphView + ?Sized>(&mut self, alg: Algorithm, g: &G, delta: &BatchDelta) -> Result<u64> {
        match alg {
            Algorithm::Bfs => run_bfs(g, &mut self.bfs, self.source, delta),
            Algorithm::Sssp => run_sssp(g, &mut self.sssp, self.source, delta),
            Algorithm::Cc => Ok(run_cc(g, &mut self.cc, delta)),
            Algorithm::PageRank => Ok(run_pr(g, &mut self.pr, delta)),
        }
    }
}
