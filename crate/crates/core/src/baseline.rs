//! Adjacency-list reference formats.
//!
//! Both keep one contiguous edge vector per vertex and find edges by linear
//! scan. Vectors start at capacity 4, double when full and never shrink.
//! Deletion moves the last edge into the hole.
//!
//! [`AdListShared`] lets any worker update any vertex after taking that
//! vertex's lock. [`AdListChunked`] partitions vertices over owner shards
//! exactly like [`crate::store::HybridStore`].

use std::cell::UnsafeCell;
use std::mem::size_of;
use std::sync::Mutex;

use rayon::prelude::*;
use rayon::ThreadPool;

use crate::config::{Config, VertexId};
use crate::error::{Error, Result};
use crate::graph::{self, halves, BatchOutcome, DeleteOutcome, DynamicGraph, GraphView, InsertOutcome, NeighborCursor, Sharding, Side, UpdateOp};

const INITIAL_CAPACITY: usize = 4;

/// Packed `{dst}` or `{dst, prop}` words of one vertex.
#[derive(Debug, Default)]
struct EdgeVec {
    words: Vec<u64>,
}

impl EdgeVec {
    #[inline]
    fn insert(&mut self, stride: usize, dst: VertexId, prop: u64) -> InsertOutcome {
        if let Some(i) = self.find(stride, dst) {
            if stride == 2 {
                self.words[i * 2 + 1] = prop;
            }
            return InsertOutcome::Updated;
        }
        if self.words.len() == self.words.capacity() {
            let edges = (self.words.capacity() / stride).max(INITIAL_CAPACITY / 2) * 2;
            self.words.reserve_exact(edges * stride - self.words.len());
        }
        self.words.push(dst);
        if stride == 2 {
            self.words.push(prop);
        }
        InsertOutcome::Inserted
    }

    #[inline]
    fn delete(&mut self, stride: usize, dst: VertexId) -> DeleteOutcome {
        let Some(i) = self.find(stride, dst) else {
            return DeleteOutcome::Absent;
        };
        let last = self.words.len() - stride;
        self.words.copy_within(last.., i * stride);
        self.words.truncate(last);
        DeleteOutcome::Removed
    }

    #[inline]
    fn find(&self, stride: usize, dst: VertexId) -> Option<usize> {
        if stride == 1 {
            self.words.iter().position(|&w| w == dst)
        } else {
            self.words.chunks_exact(2).position(|c| c[0] == dst)
        }
    }

    fn capacity_bytes(&self) -> usize {
        self.words.capacity() * 8
    }

    fn edge_capacity(&self, stride: usize) -> usize {
        self.words.capacity() / stride
    }
}

fn prop_word(weighted: bool, prop: Option<u64>) -> Result<u64> {
    match prop {
        Some(w) => Ok(w),
        None if weighted => Err(Error::MissingWeight),
        None => Ok(0),
    }
}

struct Locked {
    guard: Mutex<()>,
    edges: UnsafeCell<EdgeVec>,
}

impl Locked {
    fn new() -> Self {
        Locked {
            guard: Mutex::new(()),
            edges: UnsafeCell::new(EdgeVec::default()),
        }
    }

    /// Runs `f` on the edges while holding the vertex lock.
    #[inline]
    fn with<R>(&self, f: impl FnOnce(&mut EdgeVec) -> R) -> R {
        let _held = self.guard.lock().unwrap_or_else(|e| e.into_inner());
        // SAFETY: the lock serializes writers; readers only exist outside
        // `apply_batch`, which holds `&mut` to the whole store.
        f(unsafe { &mut *self.edges.get() })
    }

    #[inline]
    fn read(&self) -> &EdgeVec {
        // SAFETY: see `with`.
        unsafe { &*self.edges.get() }
    }
}

/// Shared adjacency list guarded by one lock per vertex.
pub struct AdListShared {
    weighted: bool,
    directed: bool,
    out: Vec<Locked>,
    inn: Vec<Locked>,
    vprop: Vec<u64>,
    num_edges: u64,
}

// SAFETY: edge vectors are only mutated under their vertex lock and only
// while no shared reader can exist (see `Locked::with`).
unsafe impl Sync for AdListShared {}

impl AdListShared {
    pub fn new(config: &Config, num_vertices: usize) -> Self {
        let make = |n: usize| (0..n).map(|_| Locked::new()).collect::<Vec<_>>();
        AdListShared {
            weighted: config.weighted,
            directed: config.directed,
            out: make(num_vertices),
            inn: make(if config.directed { num_vertices } else { 0 }),
            vprop: vec![0; num_vertices],
            num_edges: 0,
        }
    }

    fn stride(&self) -> usize {
        if self.weighted {
            2
        } else {
            1
        }
    }

    #[inline]
    fn list(&self, side: Side, v: VertexId) -> &Locked {
        match side {
            Side::Out => &self.out[v as usize],
            Side::In => &self.inn[v as usize],
        }
    }

    fn insert_halves(&self, src: VertexId, dst: VertexId, prop: u64) -> InsertOutcome {
        let s = self.stride();
        let [a, b] = halves(src, dst, self.directed);
        let r = self.list(a.0, a.1).with(|e| e.insert(s, a.2, prop));
        self.list(b.0, b.1).with(|e| e.insert(s, b.2, prop));
        r
    }

    fn delete_halves(&self, src: VertexId, dst: VertexId) -> DeleteOutcome {
        let s = self.stride();
        let [a, b] = halves(src, dst, self.directed);
        let r = self.list(a.0, a.1).with(|e| e.delete(s, a.2));
        self.list(b.0, b.1).with(|e| e.delete(s, b.2));
        r
    }

    /// Edge capacity of `v`'s out vector.
    pub fn capacity(&self, v: VertexId) -> usize {
        self.out[v as usize].read().edge_capacity(self.stride())
    }

    pub fn vprop(&self) -> &[u64] {
        &self.vprop
    }
}

impl GraphView for AdListShared {
    fn num_vertices(&self) -> usize {
        self.out.len()
    }

    fn is_directed(&self) -> bool {
        self.directed
    }

    fn is_weighted(&self) -> bool {
        self.weighted
    }

    #[inline]
    fn out_neighbors(&self, v: VertexId) -> NeighborCursor<'_> {
        NeighborCursor::new(&self.out[v as usize].read().words, self.weighted)
    }

    #[inline]
    fn in_neighbors(&self, v: VertexId) -> NeighborCursor<'_> {
        let side = if self.directed { Side::In } else { Side::Out };
        NeighborCursor::new(&self.list(side, v).read().words, self.weighted)
    }
}

impl DynamicGraph for AdListShared {
    fn insert_edge(&mut self, src: VertexId, dst: VertexId, prop: Option<u64>) -> Result<InsertOutcome> {
        graph::check_vertex(src, self.out.len())?;
        graph::check_vertex(dst, self.out.len())?;
        let prop = prop_word(self.weighted, prop)?;
        let r = self.insert_halves(src, dst, prop);
        if r == InsertOutcome::Inserted {
            self.num_edges += 1;
        }
        Ok(r)
    }

    fn delete_edge(&mut self, src: VertexId, dst: VertexId) -> Result<DeleteOutcome> {
        graph::check_vertex(src, self.out.len())?;
        graph::check_vertex(dst, self.out.len())?;
        let r = self.delete_halves(src, dst);
        if r == DeleteOutcome::Removed {
            self.num_edges -= 1;
        }
        Ok(r)
    }

    /// Operations are taken from a shared queue, so two updates of the same
    /// edge within one batch may apply in either order.
    fn apply_batch(&mut self, ops: &[UpdateOp], pool: &ThreadPool) -> Result<BatchOutcome> {
        graph::check_batch(ops, self.out.len(), self.weighted)?;
        let this = &*self;
        let total = pool.install(|| {
            ops.par_iter()
                .fold(BatchOutcome::default, |mut acc, op| {
                    match *op {
                        UpdateOp::Insert { src, dst, prop } => {
                            acc.count_insert(this.insert_halves(src, dst, prop.unwrap_or(0)))
                        }
                        UpdateOp::Delete { src, dst } => acc.count_delete(this.delete_halves(src, dst)),
                    }
                    acc
                })
                .reduce(BatchOutcome::default, |mut a, b| {
                    a.merge(&b);
                    a
                })
        });
        self.num_edges = self.num_edges + total.inserted - total.deleted;
        Ok(total)
    }

    fn num_edges(&self) -> u64 {
        self.num_edges
    }

    /// Vertex headers plus reserved edge capacity plus the property array.
    fn memory_bytes(&self) -> u64 {
        let lists = self.out.iter().chain(&self.inn);
        let headers = (self.out.len() + self.inn.len()) * size_of::<Locked>();
        let edges: usize = lists.map(|l| l.read().capacity_bytes()).sum();
        (headers + edges + self.vprop.len() * 8) as u64
    }

    fn format_name(&self) -> &'static str {
        "adlist-shared"
    }
}

struct ChunkShard {
    out: Vec<EdgeVec>,
    inn: Vec<EdgeVec>,
}

impl ChunkShard {
    #[inline]
    fn list(&mut self, side: Side, local: usize) -> &mut EdgeVec {
        match side {
            Side::Out => &mut self.out[local],
            Side::In => &mut self.inn[local],
        }
    }
}

/// Adjacency list whose vertex partitions are owned by fixed shards.
pub struct AdListChunked {
    weighted: bool,
    directed: bool,
    num_vertices: usize,
    sharding: Sharding,
    shards: Vec<ChunkShard>,
    vprop: Vec<u64>,
    num_edges: u64,
}

impl AdListChunked {
    pub fn new(config: &Config, num_vertices: usize, num_shards: usize) -> Result<Self> {
        config.validate()?;
        if num_shards == 0 {
            return Err(Error::InvalidConfig("at least one shard is required".into()));
        }
        let ps = config.partition_size;
        let partitions = num_vertices.div_ceil(ps);
        let shards = (0..num_shards)
            .map(|t| {
                let owned = if partitions > t {
                    (partitions - t).div_ceil(num_shards)
                } else {
                    0
                };
                let make = |n: usize| (0..n).map(|_| EdgeVec::default()).collect::<Vec<_>>();
                ChunkShard {
                    out: make(owned * ps),
                    inn: make(if config.directed { owned * ps } else { 0 }),
                }
            })
            .collect();
        Ok(AdListChunked {
            weighted: config.weighted,
            directed: config.directed,
            num_vertices,
            sharding: Sharding::new(ps, num_shards),
            shards,
            vprop: vec![0; num_vertices],
            num_edges: 0,
        })
    }

    fn stride(&self) -> usize {
        if self.weighted {
            2
        } else {
            1
        }
    }

    #[inline]
    fn locate(&self, v: VertexId) -> (usize, usize) {
        self.sharding.locate(v)
    }

    #[inline]
    fn list(&self, side: Side, v: VertexId) -> &EdgeVec {
        let (t, local) = self.locate(v);
        match side {
            Side::Out => &self.shards[t].out[local],
            Side::In => &self.shards[t].inn[local],
        }
    }

    pub fn capacity(&self, v: VertexId) -> usize {
        self.list(Side::Out, v).edge_capacity(self.stride())
    }

    pub fn vprop(&self) -> &[u64] {
        &self.vprop
    }
}

impl GraphView for AdListChunked {
    fn num_vertices(&self) -> usize {
        self.num_vertices
    }

    fn is_directed(&self) -> bool {
        self.directed
    }

    fn is_weighted(&self) -> bool {
        self.weighted
    }

    #[inline]
    fn out_neighbors(&self, v: VertexId) -> NeighborCursor<'_> {
        NeighborCursor::new(&self.list(Side::Out, v).words, self.weighted)
    }

    #[inline]
    fn in_neighbors(&self, v: VertexId) -> NeighborCursor<'_> {
        let side = if self.directed { Side::In } else { Side::Out };
        NeighborCursor::new(&self.list(side, v).words, self.weighted)
    }
}

impl DynamicGraph for AdListChunked {
    fn insert_edge(&mut self, src: VertexId, dst: VertexId, prop: Option<u64>) -> Result<InsertOutcome> {
        graph::check_vertex(src, self.num_vertices)?;
        graph::check_vertex(dst, self.num_vertices)?;
        let prop = prop_word(self.weighted, prop)?;
        let s = self.stride();
        let mut first = None;
        for (side, owner, nbr) in halves(src, dst, self.directed) {
            let (t, local) = self.locate(owner);
            let r = self.shards[t].list(side, local).insert(s, nbr, prop);
            first.get_or_insert(r);
        }
        let r = first.expect("two halves");
        if r == InsertOutcome::Inserted {
            self.num_edges += 1;
        }
        Ok(r)
    }

    fn delete_edge(&mut self, src: VertexId, dst: VertexId) -> Result<DeleteOutcome> {
        graph::check_vertex(src, self.num_vertices)?;
        graph::check_vertex(dst, self.num_vertices)?;
        let s = self.stride();
        let mut first = None;
        for (side, owner, nbr) in halves(src, dst, self.directed) {
            let (t, local) = self.locate(owner);
            let r = self.shards[t].list(side, local).delete(s, nbr);
            first.get_or_insert(r);
        }
        let r = first.expect("two halves");
        if r == DeleteOutcome::Removed {
            self.num_edges -= 1;
        }
        Ok(r)
    }

    fn apply_batch(&mut self, ops: &[UpdateOp], pool: &ThreadPool) -> Result<BatchOutcome> {
        graph::check_batch(ops, self.num_vertices, self.weighted)?;
        let s = self.stride();
        let directed = self.directed;
        let sharding = self.sharding;
        let shards = &mut self.shards;
        let parts: Vec<BatchOutcome> = pool.install(|| {
            let routed = sharding.route(ops, directed);
            shards
                .par_iter_mut()
                .enumerate()
                .map(|(t, shard)| {
                    let mut acc = BatchOutcome::default();
                    for r in routed.iter().flat_map(|piece| &piece[t]) {
                        let list = shard.list(r.side, r.local);
                        if r.delete {
                            let o = list.delete(s, r.nbr);
                            if r.primary {
                                acc.count_delete(o);
                            }
                        } else {
                            let o = list.insert(s, r.nbr, r.prop);
                            if r.primary {
                                acc.count_insert(o);
                            }
                        }
                    }
                    acc
                })
                .collect()
        });
        let mut total = BatchOutcome::default();
        for p in &parts {
            total.merge(p);
        }
        self.num_edges = self.num_edges + total.inserted - total.deleted;
        Ok(total)
    }

    fn num_edges(&self) -> u64 {
        self.num_edges
    }

    /// Vertex headers plus reserved edge capacity plus the property array.
    fn memory_bytes(&self) -> u64 {
        let sides = if self.directed { 2 } else { 1 };
        let headers = self.num_vertices * sides * size_of::<EdgeVec>();
        let edges: usize = self
            .shards
            .iter()
            .flat_map(|sh| sh.out.iter().chain(&sh.inn))
            .map(EdgeVec::capacity_bytes)
            .sum();
        (headers + edges + self.vprop.len() * 8) as u64
    }

    fn format_name(&self) -> &'static str {
        "adlist-chunked"
    }
}
