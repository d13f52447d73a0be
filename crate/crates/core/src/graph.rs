//! Interface shared by the hybrid store and the adjacency-list baselines.

use rayon::ThreadPool;

use crate::config::{Edge, VertexId};
use crate::error::{Error, Result};

pub use crate::cfhash::{InsertOutcome, RemoveOutcome as DeleteOutcome};

/// One streamed update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UpdateOp {
    Insert {
        src: VertexId,
        dst: VertexId,
        prop: Option<u64>,
    },
    Delete {
        src: VertexId,
        dst: VertexId,
    },
}

impl UpdateOp {
    pub fn endpoints(&self) -> (VertexId, VertexId) {
        match *self {
            UpdateOp::Insert { src, dst, .. } | UpdateOp::Delete { src, dst } => (src, dst),
        }
    }

    pub fn is_delete(&self) -> bool {
        matches!(self, UpdateOp::Delete { .. })
    }
}

/// Counts from applying one batch. Counts refer to logical edges.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BatchOutcome {
    pub inserted: u64,
    pub updated: u64,
    pub deleted: u64,
    pub absent: u64,
}

impl BatchOutcome {
    pub fn merge(&mut self, o: &BatchOutcome) {
        self.inserted += o.inserted;
        self.updated += o.updated;
        self.deleted += o.deleted;
        self.absent += o.absent;
    }

    pub(crate) fn count_insert(&mut self, o: InsertOutcome) {
        match o {
            InsertOutcome::Inserted => self.inserted += 1,
            InsertOutcome::Updated => self.updated += 1,
        }
    }

    pub(crate) fn count_delete(&mut self, o: DeleteOutcome) {
        match o {
            DeleteOutcome::Removed => self.deleted += 1,
            DeleteOutcome::Absent => self.absent += 1,
        }
    }
}

/// One side of a logical edge as stored in a single vertex's list.
///
/// A directed edge `u -> v` is stored as `(u, v)` in the out lists and
/// `(v, u)` in the in lists; an undirected edge as `(u, v)` and `(v, u)` in
/// the out lists.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Side {
    Out,
    In,
}

/// Stored halves of `op`: `(side, owner vertex, neighbor)`. The first half
/// is the one whose outcome is reported for the logical edge.
#[inline]
pub(crate) fn halves(src: VertexId, dst: VertexId, directed: bool) -> [(Side, VertexId, VertexId); 2] {
    if directed {
        [(Side::Out, src, dst), (Side::In, dst, src)]
    } else {
        [(Side::Out, src, dst), (Side::Out, dst, src)]
    }
}

/// Edges of one vertex, stored as packed `{dst}` or `{dst, prop}` words.
#[derive(Debug, Clone)]
pub struct NeighborCursor<'a> {
    words: &'a [u64],
    weighted: bool,
}

impl<'a> NeighborCursor<'a> {
    #[inline]
    pub(crate) fn new(words: &'a [u64], weighted: bool) -> Self {
        NeighborCursor { words, weighted }
    }

    pub fn empty() -> Self {
        NeighborCursor {
            words: &[],
            weighted: false,
        }
    }

    /// Edges remaining.
    #[inline]
    pub fn len(&self) -> usize {
        if self.weighted {
            self.words.len() / 2
        } else {
            self.words.len()
        }
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

impl Iterator for NeighborCursor<'_> {
    type Item = Edge;

    #[inline]
    fn next(&mut self) -> Option<Edge> {
        if self.weighted {
            match self.words {
                [dst, prop, rest @ ..] => {
                    self.words = rest;
                    Some(Edge::new(*dst, Some(*prop)))
                }
                _ => None,
            }
        } else {
            match self.words {
                [dst, rest @ ..] => {
                    self.words = rest;
                    Some(Edge::new(*dst, None))
                }
                _ => None,
            }
        }
    }

    #[inline]
    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = self.len();
        (n, Some(n))
    }
}

impl ExactSizeIterator for NeighborCursor<'_> {}

/// Read-only access used by the analytics kernels.
pub trait GraphView: Sync {
    fn num_vertices(&self) -> usize;

    fn is_directed(&self) -> bool;

    fn is_weighted(&self) -> bool;

    fn out_neighbors(&self, v: VertexId) -> NeighborCursor<'_>;

    /// For undirected graphs this is the same list as `out_neighbors`.
    fn in_neighbors(&self, v: VertexId) -> NeighborCursor<'_>;

    fn out_degree(&self, v: VertexId) -> usize {
        self.out_neighbors(v).len()
    }
}

/// A mutable streaming graph format.
pub trait DynamicGraph: GraphView + Send {
    fn insert_edge(&mut self, src: VertexId, dst: VertexId, prop: Option<u64>) -> Result<InsertOutcome>;

    fn delete_edge(&mut self, src: VertexId, dst: VertexId) -> Result<DeleteOutcome>;

    /// Applies `ops` using the workers of `pool`. Updates to one vertex are
    /// applied in batch order unless the format documents otherwise.
    fn apply_batch(&mut self, ops: &[UpdateOp], pool: &ThreadPool) -> Result<BatchOutcome>;

    /// Logical edges currently stored.
    fn num_edges(&self) -> u64;

    /// Bytes of vertex arrays plus live edge storage.
    fn memory_bytes(&self) -> u64;

    /// Short format name used in reports.
    fn format_name(&self) -> &'static str;

    /// The hybrid store behind this graph, for its extra instrumentation.
    fn as_hybrid(&self) -> Option<&crate::store::HybridStore> {
        None
    }

    fn as_hybrid_mut(&mut self) -> Option<&mut crate::store::HybridStore> {
        None
    }
}

/// One stored half of an update, addressed to its owner shard.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Routed {
    pub local: usize,
    pub nbr: VertexId,
    pub prop: u64,
    pub side: Side,
    pub delete: bool,
    /// Whether this half's outcome is the one reported for the logical edge.
    pub primary: bool,
}

/// Owner-shard addressing shared by the chunked formats.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Sharding {
    partition_size: u64,
    shards: u64,
    /// `(log2 partition_size, log2 shards)` when both are powers of two.
    shifts: Option<(u32, u32)>,
}

impl Sharding {
    pub fn new(partition_size: usize, shards: usize) -> Self {
        let shifts = (partition_size.is_power_of_two() && shards.is_power_of_two())
            .then(|| (partition_size.trailing_zeros(), shards.trailing_zeros()));
        Sharding {
            partition_size: partition_size as u64,
            shards: shards as u64,
            shifts,
        }
    }

    /// `(owner shard, index within the shard)` of `v`.
    #[inline]
    pub fn locate(&self, v: VertexId) -> (usize, usize) {
        if let Some((p, t)) = self.shifts {
            let part = v >> p;
            let offset = v & (self.partition_size - 1);
            return ((part & (self.shards - 1)) as usize, (((part >> t) << p) | offset) as usize);
        }
        let part = v / self.partition_size;
        (
            (part % self.shards) as usize,
            ((part / self.shards) * self.partition_size + v % self.partition_size) as usize,
        )
    }

    /// Buckets the halves of `ops` by owner. The result is indexed
    /// `[piece][shard]`; visiting pieces in order preserves batch order.
    pub fn route(&self, ops: &[UpdateOp], directed: bool) -> Vec<Vec<Vec<Routed>>> {
        use rayon::prelude::*;
        let shards = self.shards as usize;
        let piece = ops.len().div_ceil(shards).max(1);
        ops.par_chunks(piece)
            .map(|chunk| {
                let mut buckets: Vec<Vec<Routed>> = (0..shards).map(|_| Vec::with_capacity(2 * chunk.len() / shards + 16)).collect();
                for op in chunk {
                    let (src, dst) = op.endpoints();
                    let (prop, delete) = match *op {
                        UpdateOp::Insert { prop, .. } => (prop.unwrap_or(0), false),
                        UpdateOp::Delete { .. } => (0, true),
                    };
                    for (i, (side, owner, nbr)) in halves(src, dst, directed).into_iter().enumerate() {
                        let (t, local) = self.locate(owner);
                        buckets[t].push(Routed {
                            local,
                            nbr,
                            prop,
                            side,
                            delete,
                            primary: i == 0,
                        });
                    }
                }
                buckets
            })
            .collect()
    }
}

/// Validates ids and the weight requirement for a batch before any worker runs.
pub(crate) fn check_batch(ops: &[UpdateOp], num_vertices: usize, weighted: bool) -> Result<()> {
    for op in ops {
        let (s, d) = op.endpoints();
        check_vertex(s, num_vertices)?;
        check_vertex(d, num_vertices)?;
        if let UpdateOp::Insert { prop: None, .. } = op {
            if weighted {
                return Err(Error::MissingWeight);
            }
        }
    }
    Ok(())
}

#[inline]
pub(crate) fn check_vertex(v: VertexId, num_vertices: usize) -> Result<()> {
    if v < num_vertices as u64 {
        Ok(())
    } else {
        Err(Error::VertexOutOfRange {
            vertex: v,
            num_vertices,
        })
    }
}

/// Snapshot of every stored edge as sorted `(src, dst, prop)` triples from
/// the out lists. Used for cross-format comparisons.
pub fn edge_snapshot<G: GraphView + ?Sized>(g: &G) -> Vec<(VertexId, VertexId, Option<u64>)> {
    let mut out = Vec::new();
    for v in 0..g.num_vertices() as u64 {
        for e in g.out_neighbors(v) {
            out.push((v, e.dst, e.prop));
        }
    }
    out.sort_unstable();
    out
}
