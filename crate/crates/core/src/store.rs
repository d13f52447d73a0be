//! Degree-adaptive hybrid adjacency store.
//!
//! Every vertex owns one cache-line-sized record. Word 0 is the degree. What
//! the remaining words hold depends on the degree:
//!
//! | kind     | degree          | record words 1..                               |
//! |----------|-----------------|------------------------------------------------|
//! | `Inline` | `deg <= th0`    | up to `th0` edges stored in place              |
//! | `Array`  | `th0 < deg <= th1` | capacity, edge array                        |
//! | `Hashed` | `deg > th1`     | capacity, edge array, hash index, tombstones   |
//!
//! Edges always occupy indices `[0, deg)` of their array. Deletions move the
//! last edge into the hole. `Hashed` vertices keep a [`RawTable`] with
//! `2 * cap` slots mapping neighbor id to array index; traversal never reads
//! it.
//!
//! Vertices are split into partitions of `partition_size` ids assigned round
//! robin to shards. A shard owns its records, arrays, tables and pool, and
//! batch updates to a vertex are only applied by the worker holding its shard.

use std::alloc::{self, Layout};
use std::ptr::NonNull;

use rayon::prelude::*;
use rayon::ThreadPool;

use crate::cfhash::{InsertOutcome, LineHasher, Probe, ProbeStats, RawTable, RemoveOutcome};
use crate::config::{partition_of, Config, VertexId};
use crate::error::{Error, Result};
use crate::graph::{self, halves, BatchOutcome, DynamicGraph, GraphView, NeighborCursor, Sharding, Side, UpdateOp};
use crate::mempool::{MemoryPool, PoolStats};
use crate::trace;

const DEG: usize = 0;
const CAP: usize = 1;
const EDGES: usize = 2;
const HASH: usize = 3;
const TOMBS: usize = 4;
const INLINE: usize = 1;

const PAGE_BYTES: usize = 4096;

/// Storage class of a vertex, implied by its degree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VertexKind {
    /// Edges live inside the vertex record.
    Inline,
    /// Edges live in a pool-allocated array; lookups scan it.
    Array,
    /// Array plus a hash index used for lookups during updates.
    Hashed,
}

/// Work done by capacity changes and kind switches.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ResizeCounters {
    pub edges_copied: u64,
    pub rehashed: u64,
    pub grows: u64,
    pub shrinks: u64,
    pub upgrades: u64,
    pub downgrades: u64,
}

impl ResizeCounters {
    fn merge(&mut self, o: &ResizeCounters) {
        self.edges_copied += o.edges_copied;
        self.rehashed += o.rehashed;
        self.grows += o.grows;
        self.shrinks += o.shrinks;
        self.upgrades += o.upgrades;
        self.downgrades += o.downgrades;
    }
}

/// Layout parameters derived once from the config.
#[derive(Debug, Clone, Copy)]
struct Params {
    line_words: usize,
    stride: usize,
    th0: usize,
    th1: usize,
    initial_cap: usize,
    max_log_n: u32,
    hasher: LineHasher,
}

impl Params {
    fn new(cfg: &Config) -> Self {
        let line_words = cfg.cache_line_bytes / 8;
        Params {
            line_words,
            stride: cfg.edge_words(),
            th0: cfg.th0(),
            th1: cfg.th1,
            initial_cap: cfg.initial_array_capacity(),
            max_log_n: line_words.trailing_zeros(),
            hasher: LineHasher::new(cfg.hash_multiplier, 64),
        }
    }

    #[inline]
    fn kind(&self, deg: usize) -> VertexKind {
        if deg <= self.th0 {
            VertexKind::Inline
        } else if deg <= self.th1 {
            VertexKind::Array
        } else {
            VertexKind::Hashed
        }
    }

    #[inline]
    fn array_bytes(&self, cap: usize) -> usize {
        cap * self.stride * 8
    }
}

/// Zeroed, page-aligned array of vertex records.
struct MetaArray {
    ptr: NonNull<u64>,
    records: usize,
    line_words: usize,
}

// SAFETY: plain owned memory.
unsafe impl Send for MetaArray {}
unsafe impl Sync for MetaArray {}

impl MetaArray {
    fn new(records: usize, line_words: usize) -> Result<Self> {
        let words = records * line_words;
        if words == 0 {
            return Ok(MetaArray {
                ptr: NonNull::dangling(),
                records: 0,
                line_words,
            });
        }
        let layout = Self::layout(words);
        // SAFETY: non-zero size.
        let raw = unsafe { alloc::alloc_zeroed(layout) } as *mut u64;
        let ptr = NonNull::new(raw).ok_or(Error::OutOfMemory {
            bytes: layout.size(),
        })?;
        Ok(MetaArray {
            ptr,
            records,
            line_words,
        })
    }

    fn layout(words: usize) -> Layout {
        Layout::from_size_align(words * 8, PAGE_BYTES).expect("record array layout")
    }

    #[inline]
    fn record(&self, i: usize) -> &[u64] {
        assert!(i < self.records);
        // SAFETY: in bounds; records never overlap.
        unsafe { std::slice::from_raw_parts(self.ptr.as_ptr().add(i * self.line_words), self.line_words) }
    }

    #[inline]
    fn record_mut(&mut self, i: usize) -> &mut [u64] {
        assert!(i < self.records);
        // SAFETY: as above, with exclusive access through `&mut self`.
        unsafe {
            std::slice::from_raw_parts_mut(self.ptr.as_ptr().add(i * self.line_words), self.line_words)
        }
    }

    fn base_addr(&self) -> usize {
        self.ptr.as_ptr() as usize
    }
}

impl Drop for MetaArray {
    fn drop(&mut self) {
        let words = self.records * self.line_words;
        if words > 0 {
            // SAFETY: allocated in `new` with this layout.
            unsafe { alloc::dealloc(self.ptr.as_ptr() as *mut u8, Self::layout(words)) };
        }
    }
}

#[inline]
unsafe fn words_mut<'a>(ptr: u64, len: usize) -> &'a mut [u64] {
    std::slice::from_raw_parts_mut(ptr as *mut u64, len)
}

#[inline]
unsafe fn words<'a>(ptr: u64, len: usize) -> &'a [u64] {
    std::slice::from_raw_parts(ptr as *const u64, len)
}

/// Index of the edge with neighbor `dst` in packed edge words.
#[inline]
fn scan(edges: &[u64], stride: usize, dst: VertexId) -> Option<usize> {
    if stride == 1 {
        edges.iter().position(|&w| w == dst)
    } else {
        edges.chunks_exact(2).position(|c| c[0] == dst)
    }
}

#[inline]
fn put_edge(edges: &mut [u64], stride: usize, at: usize, dst: VertexId, prop: u64) {
    edges[at * stride] = dst;
    if stride == 2 {
        edges[at * stride + 1] = prop;
    }
}

/// Routed updates between a record prefetch and its use. Edge arrays are
/// prefetched at half this distance, once the record is expected in cache.
const PREFETCH_DISTANCE: usize = 8;

#[inline]
fn prefetch(addr: *const u64) {
    #[cfg(target_arch = "x86_64")]
    // SAFETY: a prefetch has no architectural effect and cannot fault.
    unsafe {
        std::arch::x86_64::_mm_prefetch(addr as *const i8, std::arch::x86_64::_MM_HINT_T0)
    };
    #[cfg(not(target_arch = "x86_64"))]
    let _ = addr;
}

/// Everything a per-vertex update needs besides the record itself.
struct Ctx<'a> {
    p: &'a Params,
    pool: &'a MemoryPool,
    probes: &'a mut ProbeStats,
    counters: &'a mut ResizeCounters,
}

impl Ctx<'_> {
    fn alloc_array(&mut self, cap: usize) -> Result<u64> {
        Ok(self.pool.allocate(self.p.array_bytes(cap))?.as_ptr() as u64)
    }

    /// # Safety
    /// `ptr` must be a live array of `cap` edges from this shard's pool.
    unsafe fn free_array(&mut self, ptr: u64, cap: usize) {
        self.pool
            .deallocate(NonNull::new_unchecked(ptr as *mut u8), self.p.array_bytes(cap));
    }

    /// Copies the first `deg` edges of `old` into a fresh array of `new_cap`.
    fn copy_to_new(&mut self, old: &[u64], deg: usize, new_cap: usize) -> Result<u64> {
        let s = self.p.stride;
        let ptr = self.alloc_array(new_cap)?;
        // SAFETY: fresh array of new_cap >= deg edges.
        let dst = unsafe { words_mut(ptr, new_cap * s) };
        dst[..deg * s].copy_from_slice(&old[..deg * s]);
        self.counters.edges_copied += deg as u64;
        Ok(ptr)
    }

    /// Fresh hash index over the first `deg` edges of `edges`.
    fn build_table(&mut self, edges: &[u64], deg: usize, slots: usize) -> Result<RawTable> {
        let s = self.p.stride;
        let mut t = RawTable::allocate(self.pool, slots, self.p.max_log_n, self.p.hasher)?;
        for i in 0..deg {
            let key = edges[i * s];
            match t.probe(key).0 {
                Probe::Vacant { slot, tombstone } => t.fill(slot, tombstone, key, i as u64),
                _ => unreachable!("neighbors are distinct and the table has room"),
            }
        }
        self.counters.rehashed += deg as u64;
        Ok(t)
    }

    /// # Safety
    /// `rec` must describe a `Hashed` vertex of this shard.
    #[inline]
    unsafe fn table_of(&self, rec: &[u64]) -> RawTable {
        let cap = rec[CAP] as usize;
        RawTable::from_parts(
            NonNull::new_unchecked(rec[HASH] as *mut u64),
            2 * cap,
            rec[DEG] as usize,
            rec[TOMBS] as usize,
            self.p.max_log_n,
            self.p.hasher,
        )
    }

    fn insert(&mut self, rec: &mut [u64], dst: VertexId, prop: u64) -> Result<InsertOutcome> {
        trace::touch(rec.as_ptr());
        let p = *self.p;
        let s = p.stride;
        let deg = rec[DEG] as usize;
        match p.kind(deg) {
            VertexKind::Inline => {
                let slots = &mut rec[INLINE..INLINE + p.th0 * s];
                if let Some(i) = scan(&slots[..deg * s], s, dst) {
                    put_edge(slots, s, i, dst, prop);
                    return Ok(InsertOutcome::Updated);
                }
                if deg < p.th0 {
                    put_edge(slots, s, deg, dst, prop);
                    rec[DEG] += 1;
                    return Ok(InsertOutcome::Inserted);
                }
                // Inline -> Array: the inline slots are copied out, nothing to free.
                let cap = p.initial_cap;
                let ptr = self.copy_to_new(&rec[INLINE..INLINE + deg * s], deg, cap)?;
                self.counters.upgrades += 1;
                // SAFETY: fresh array of `cap > deg` edges.
                put_edge(unsafe { words_mut(ptr, cap * s) }, s, deg, dst, prop);
                rec[CAP] = cap as u64;
                rec[EDGES] = ptr;
                rec[HASH] = 0;
                rec[TOMBS] = 0;
                rec[DEG] = deg as u64 + 1;
                Ok(InsertOutcome::Inserted)
            }
            VertexKind::Array => {
                let cap = rec[CAP] as usize;
                let mut ptr = rec[EDGES];
                // SAFETY: Array vertices own a live array of `cap` edges.
                let edges = unsafe { words_mut(ptr, cap * s) };
                if let Some(i) = scan(&edges[..deg * s], s, dst) {
                    put_edge(edges, s, i, dst, prop);
                    return Ok(InsertOutcome::Updated);
                }
                if deg == p.th1 {
                    // Array -> Hashed
                    let mut new_cap = cap;
                    if deg == cap {
                        new_cap = cap * 2;
                        ptr = self.copy_to_new(edges, deg, new_cap)?;
                        // SAFETY: old array of `cap` edges, no longer referenced.
                        unsafe { self.free_array(rec[EDGES], cap) };
                    }
                    // SAFETY: `ptr` holds `new_cap` edges.
                    let edges = unsafe { words_mut(ptr, new_cap * s) };
                    let mut table = self.build_table(edges, deg, 2 * new_cap)?;
                    self.counters.upgrades += 1;
                    let (probe, d) = table.probe(dst);
                    self.probes.inserts.record(d);
                    match probe {
                        Probe::Vacant { slot, tombstone } => table.fill(slot, tombstone, dst, deg as u64),
                        _ => unreachable!("dst was not found by the scan"),
                    }
                    put_edge(edges, s, deg, dst, prop);
                    let (hptr, _, _, tombs) = table.into_parts();
                    rec[CAP] = new_cap as u64;
                    rec[EDGES] = ptr;
                    rec[HASH] = hptr.as_ptr() as u64;
                    rec[TOMBS] = tombs as u64;
                    rec[DEG] = deg as u64 + 1;
                    return Ok(InsertOutcome::Inserted);
                }
                let mut cap = cap;
                if deg == cap {
                    let new_cap = cap * 2;
                    ptr = self.copy_to_new(edges, deg, new_cap)?;
                    // SAFETY: old array, no longer referenced.
                    unsafe { self.free_array(rec[EDGES], cap) };
                    self.counters.grows += 1;
                    cap = new_cap;
                    rec[CAP] = cap as u64;
                    rec[EDGES] = ptr;
                }
                // SAFETY: `ptr` holds `cap > deg` edges.
                put_edge(unsafe { words_mut(ptr, cap * s) }, s, deg, dst, prop);
                rec[DEG] = deg as u64 + 1;
                Ok(InsertOutcome::Inserted)
            }
            VertexKind::Hashed => {
                let mut cap = rec[CAP] as usize;
                let mut ptr = rec[EDGES];
                // SAFETY: Hashed record.
                let mut table = unsafe { self.table_of(rec) };
                let (mut probe, mut d) = table.probe(dst);
                if let Probe::Found { value, .. } = probe {
                    self.probes.inserts.record(d);
                    // SAFETY: live array of `cap` edges; `value < deg`.
                    let edges = unsafe { words_mut(ptr, cap * s) };
                    trace::touch(&edges[value as usize * s]);
                    put_edge(edges, s, value as usize, dst, prop);
                    return Ok(InsertOutcome::Updated);
                }
                if deg == cap {
                    let new_cap = cap * 2;
                    // SAFETY: live array of `cap` edges.
                    let old = unsafe { words(ptr, cap * s) };
                    ptr = self.copy_to_new(old, deg, new_cap)?;
                    // SAFETY: old array, no longer referenced.
                    unsafe { self.free_array(rec[EDGES], cap) };
                    // SAFETY: the table lives in this shard's pool.
                    unsafe { table.rebuild(self.pool, 2 * new_cap)? };
                    self.counters.rehashed += deg as u64;
                    self.counters.grows += 1;
                    cap = new_cap;
                    (probe, d) = table.probe(dst);
                } else if table.tombstone_pressure() || probe == Probe::Exhausted {
                    // SAFETY: as above.
                    unsafe { table.rebuild(self.pool, 2 * cap)? };
                    self.counters.rehashed += deg as u64;
                    (probe, d) = table.probe(dst);
                }
                self.probes.inserts.record(d);
                match probe {
                    Probe::Vacant { slot, tombstone } => table.fill(slot, tombstone, dst, deg as u64),
                    _ => unreachable!("load factor stays at or below one half"),
                }
                // SAFETY: `ptr` holds `cap > deg` edges.
                let edges = unsafe { words_mut(ptr, cap * s) };
                trace::touch(&edges[deg * s]);
                put_edge(edges, s, deg, dst, prop);
                let (hptr, _, _, tombs) = table.into_parts();
                rec[CAP] = cap as u64;
                rec[EDGES] = ptr;
                rec[HASH] = hptr.as_ptr() as u64;
                rec[TOMBS] = tombs as u64;
                rec[DEG] = deg as u64 + 1;
                Ok(InsertOutcome::Inserted)
            }
        }
    }

    fn delete(&mut self, rec: &mut [u64], dst: VertexId) -> Result<RemoveOutcome> {
        trace::touch(rec.as_ptr());
        let p = *self.p;
        let s = p.stride;
        let deg = rec[DEG] as usize;
        match p.kind(deg) {
            VertexKind::Inline => {
                let slots = &mut rec[INLINE..INLINE + deg * s];
                let Some(i) = scan(slots, s, dst) else {
                    return Ok(RemoveOutcome::Absent);
                };
                let last = deg - 1;
                slots.copy_within(last * s..deg * s, i * s);
                rec[DEG] -= 1;
                Ok(RemoveOutcome::Removed)
            }
            VertexKind::Array => {
                let cap = rec[CAP] as usize;
                let ptr = rec[EDGES];
                // SAFETY: live array of `cap` edges.
                let edges = unsafe { words_mut(ptr, cap * s) };
                let Some(i) = scan(&edges[..deg * s], s, dst) else {
                    return Ok(RemoveOutcome::Absent);
                };
                let new_deg = deg - 1;
                edges.copy_within(new_deg * s..deg * s, i * s);
                if new_deg == p.th0 {
                    // Array -> Inline
                    rec[INLINE..INLINE + new_deg * s].copy_from_slice(&edges[..new_deg * s]);
                    self.counters.edges_copied += new_deg as u64;
                    self.counters.downgrades += 1;
                    // SAFETY: the array is no longer referenced.
                    unsafe { self.free_array(ptr, cap) };
                } else if new_deg == cap / 4 {
                    let new_cap = cap / 2;
                    let nptr = self.copy_to_new(edges, new_deg, new_cap)?;
                    // SAFETY: as above.
                    unsafe { self.free_array(ptr, cap) };
                    self.counters.shrinks += 1;
                    rec[CAP] = new_cap as u64;
                    rec[EDGES] = nptr;
                }
                rec[DEG] = new_deg as u64;
                Ok(RemoveOutcome::Removed)
            }
            VertexKind::Hashed => {
                let cap = rec[CAP] as usize;
                let ptr = rec[EDGES];
                // SAFETY: Hashed record.
                let mut table = unsafe { self.table_of(rec) };
                let (probe, d) = table.probe(dst);
                self.probes.removes.record(d);
                let Probe::Found { slot, value } = probe else {
                    return Ok(RemoveOutcome::Absent);
                };
                table.erase(slot);
                // SAFETY: live array of `cap` edges.
                let edges = unsafe { words_mut(ptr, cap * s) };
                let hole = value as usize;
                let new_deg = deg - 1;
                if hole != new_deg {
                    let moved = edges[new_deg * s];
                    edges.copy_within(new_deg * s..deg * s, hole * s);
                    let found = table.set_value(moved, hole as u64, self.probes);
                    debug_assert!(found, "moved edge must be indexed");
                }
                if new_deg == p.th1 {
                    // Hashed -> Array
                    let new_cap = cap / 2;
                    let nptr = self.copy_to_new(edges, new_deg, new_cap)?;
                    // SAFETY: array and table are no longer referenced.
                    unsafe {
                        self.free_array(ptr, cap);
                        table.release(self.pool);
                    }
                    self.counters.downgrades += 1;
                    rec[CAP] = new_cap as u64;
                    rec[EDGES] = nptr;
                    rec[HASH] = 0;
                    rec[TOMBS] = 0;
                } else {
                    if new_deg == cap / 4 {
                        let new_cap = cap / 2;
                        let nptr = self.copy_to_new(edges, new_deg, new_cap)?;
                        // SAFETY: as above; the table belongs to this pool.
                        unsafe {
                            self.free_array(ptr, cap);
                            table.rebuild(self.pool, 2 * new_cap)?;
                        }
                        self.counters.rehashed += new_deg as u64;
                        self.counters.shrinks += 1;
                        rec[CAP] = new_cap as u64;
                        rec[EDGES] = nptr;
                    }
                    let (hptr, _, _, tombs) = table.into_parts();
                    rec[HASH] = hptr.as_ptr() as u64;
                    rec[TOMBS] = tombs as u64;
                }
                rec[DEG] = new_deg as u64;
                Ok(RemoveOutcome::Removed)
            }
        }
    }
}

/// Packed edge words of a record.
#[inline]
fn record_edges<'a>(p: &Params, rec: &'a [u64]) -> &'a [u64] {
    let deg = rec[DEG] as usize;
    if deg <= p.th0 {
        &rec[INLINE..INLINE + deg * p.stride]
    } else {
        // SAFETY: Array/Hashed records own a live array of at least `deg` edges.
        unsafe { words(rec[EDGES], deg * p.stride) }
    }
}

/// Vertex records, edge storage and pool owned by one worker.
struct Shard {
    out: MetaArray,
    inn: Option<MetaArray>,
    pool: MemoryPool,
    probes: ProbeStats,
    counters: ResizeCounters,
}

// SAFETY: shared references to a shard only read records and edge arrays and
// query pool counters; every pool mutation goes through `&mut Shard`.
unsafe impl Sync for Shard {}

impl Shard {
    #[inline]
    fn apply_insert(&mut self, p: &Params, side: Side, local: usize, nbr: VertexId, prop: u64) -> Result<InsertOutcome> {
        let Shard {
            out,
            inn,
            pool,
            probes,
            counters,
        } = self;
        let meta = match side {
            Side::Out => out,
            Side::In => inn.as_mut().expect("directed store"),
        };
        let mut ctx = Ctx {
            p,
            pool,
            probes,
            counters,
        };
        ctx.insert(meta.record_mut(local), nbr, prop)
    }

    #[inline]
    fn apply_delete(&mut self, p: &Params, side: Side, local: usize, nbr: VertexId) -> Result<RemoveOutcome> {
        let Shard {
            out,
            inn,
            pool,
            probes,
            counters,
        } = self;
        let meta = match side {
            Side::Out => out,
            Side::In => inn.as_mut().expect("directed store"),
        };
        let mut ctx = Ctx {
            p,
            pool,
            probes,
            counters,
        };
        ctx.delete(meta.record_mut(local), nbr)
    }

    /// Hints the record of `local` into cache ahead of its update.
    #[inline]
    fn prefetch_record(&self, side: Side, local: usize) {
        let meta = self.meta(side);
        if local < meta.records {
            prefetch(meta.ptr.as_ptr().wrapping_add(local * meta.line_words));
        }
    }

    /// Hints the edge array of `local` into cache; its record should already be.
    #[inline]
    fn prefetch_edges(&self, p: &Params, side: Side, local: usize) {
        let meta = self.meta(side);
        if local < meta.records {
            let rec = meta.record(local);
            if rec[DEG] as usize > p.th0 {
                prefetch(rec[EDGES] as *const u64);
            }
        }
    }

    fn meta(&self, side: Side) -> &MetaArray {
        match side {
            Side::Out => &self.out,
            Side::In => self.inn.as_ref().expect("directed store"),
        }
    }
}

/// The hybrid store. See the module docs for the record layout.
pub struct HybridStore {
    config: Config,
    params: Params,
    num_vertices: usize,
    sharding: Sharding,
    shards: Vec<Shard>,
    /// Record array address of each shard, `[side][shard]`. Fixed for the
    /// life of the store; the in side is empty when undirected.
    bases: [Vec<usize>; 2],
    vprop: Vec<u64>,
    num_edges: u64,
}

impl HybridStore {
    /// Store for `num_vertices` vertices whose partitions are spread over
    /// `num_shards` owners.
    pub fn new(config: Config, num_vertices: usize, num_shards: usize) -> Result<Self> {
        config.validate()?;
        if num_shards == 0 {
            return Err(Error::InvalidConfig("at least one shard is required".into()));
        }
        let params = Params::new(&config);
        let ps = config.partition_size;
        let partitions = num_vertices.div_ceil(ps);
        let mut shards = Vec::with_capacity(num_shards);
        for t in 0..num_shards {
            let owned = if partitions > t {
                (partitions - t).div_ceil(num_shards)
            } else {
                0
            };
            let records = owned * ps;
            shards.push(Shard {
                out: MetaArray::new(records, params.line_words)?,
                inn: if config.directed {
                    Some(MetaArray::new(records, params.line_words)?)
                } else {
                    None
                },
                pool: MemoryPool::new(config.block_bytes),
                probes: ProbeStats::default(),
                counters: ResizeCounters::default(),
            });
        }
        let bases = [
            shards.iter().map(|s| s.out.base_addr()).collect(),
            shards.iter().filter_map(|s| s.inn.as_ref().map(MetaArray::base_addr)).collect(),
        ];
        Ok(HybridStore {
            config,
            params,
            num_vertices,
            sharding: Sharding::new(ps, num_shards),
            shards,
            bases,
            vprop: vec![0; num_vertices],
            num_edges: 0,
        })
    }

    pub fn config(&self) -> &Config {
        &self.config
    }

    pub fn num_shards(&self) -> usize {
        self.shards.len()
    }

    #[inline]
    fn locate(&self, v: VertexId) -> (usize, usize) {
        self.sharding.locate(v)
    }

    /// Owner shard of `v`.
    pub fn owner_of(&self, v: VertexId) -> usize {
        partition_of(v, self.shards.len(), self.config.partition_size)
    }

    #[inline]
    fn record(&self, side: Side, v: VertexId) -> &[u64] {
        assert!(v < self.num_vertices as u64, "vertex {v} out of range");
        let (t, local) = self.locate(v);
        let base = self.bases[side as usize][t] as *const u64;
        let w = self.params.line_words;
        // SAFETY: an in-range vertex maps to a record inside its shard's
        // array, which lives as long as `self`.
        unsafe { std::slice::from_raw_parts(base.add(local * w), w) }
    }

    fn side_for_in(&self) -> Side {
        if self.config.directed {
            Side::In
        } else {
            Side::Out
        }
    }

    fn prop_word(&self, prop: Option<u64>) -> Result<u64> {
        match prop {
            Some(w) => Ok(w),
            None if self.config.weighted => Err(Error::MissingWeight),
            None => Ok(0),
        }
    }

    pub fn insert_edge(&mut self, src: VertexId, dst: VertexId, prop: Option<u64>) -> Result<InsertOutcome> {
        graph::check_vertex(src, self.num_vertices)?;
        graph::check_vertex(dst, self.num_vertices)?;
        let prop = self.prop_word(prop)?;
        let params = self.params;
        let mut first = None;
        for (side, owner, nbr) in halves(src, dst, self.config.directed) {
            let (t, local) = self.locate(owner);
            let r = self.shards[t].apply_insert(&params, side, local, nbr, prop)?;
            first.get_or_insert(r);
        }
        let r = first.expect("two halves");
        if r == InsertOutcome::Inserted {
            self.num_edges += 1;
        }
        Ok(r)
    }

    pub fn delete_edge(&mut self, src: VertexId, dst: VertexId) -> Result<RemoveOutcome> {
        graph::check_vertex(src, self.num_vertices)?;
        graph::check_vertex(dst, self.num_vertices)?;
        let params = self.params;
        let mut first = None;
        for (side, owner, nbr) in halves(src, dst, self.config.directed) {
            let (t, local) = self.locate(owner);
            let r = self.shards[t].apply_delete(&params, side, local, nbr)?;
            first.get_or_insert(r);
        }
        let r = first.expect("two halves");
        if r == RemoveOutcome::Removed {
            self.num_edges -= 1;
        }
        Ok(r)
    }

    /// Out-edges of `v` in storage order.
    pub fn neighbors(&self, v: VertexId) -> NeighborCursor<'_> {
        NeighborCursor::new(record_edges(&self.params, self.record(Side::Out, v)), self.config.weighted)
    }

    pub fn degree(&self, v: VertexId) -> usize {
        self.record(Side::Out, v)[DEG] as usize
    }

    pub fn in_degree(&self, v: VertexId) -> usize {
        self.record(self.side_for_in(), v)[DEG] as usize
    }

    pub fn vertex_kind(&self, v: VertexId) -> VertexKind {
        self.params.kind(self.degree(v))
    }

    pub fn in_vertex_kind(&self, v: VertexId) -> VertexKind {
        self.params.kind(self.in_degree(v))
    }

    /// Edge-array capacity of `v`'s out list; `None` while edges are inline.
    pub fn capacity(&self, v: VertexId) -> Option<usize> {
        let rec = self.record(Side::Out, v);
        (self.params.kind(rec[DEG] as usize) != VertexKind::Inline).then_some(rec[CAP] as usize)
    }

    /// Slot count of `v`'s out hash index, if it has one.
    pub fn hash_slots(&self, v: VertexId) -> Option<usize> {
        let rec = self.record(Side::Out, v);
        (self.params.kind(rec[DEG] as usize) == VertexKind::Hashed).then_some(2 * rec[CAP] as usize)
    }

    /// Per-vertex algorithm property words.
    pub fn vprop(&self) -> &[u64] {
        &self.vprop
    }

    pub fn vprop_mut(&mut self) -> &mut [u64] {
        &mut self.vprop
    }

    /// Record arrays plus property array plus pool chunks in use.
    pub fn memory_bytes(&self) -> u64 {
        let sides = if self.config.directed { 2 } else { 1 };
        let meta = self.num_vertices * self.config.cache_line_bytes * sides;
        let vprop = self.vprop.len() * 8;
        (meta + vprop + self.pool_stats().bytes_in_use) as u64
    }

    pub fn pool_stats(&self) -> PoolStats {
        self.shards.iter().fold(PoolStats::default(), |mut acc, s| {
            let st = s.pool.stats();
            acc.bytes_in_use += st.bytes_in_use;
            acc.bytes_reserved += st.bytes_reserved;
            acc
        })
    }

    pub fn resize_counters(&self) -> ResizeCounters {
        let mut acc = ResizeCounters::default();
        for s in &self.shards {
            acc.merge(&s.counters);
        }
        acc
    }

    pub fn probe_stats(&self) -> ProbeStats {
        let mut acc = ProbeStats::default();
        for s in &self.shards {
            acc.merge(&s.probes);
        }
        acc
    }

    pub fn reset_probe_stats(&mut self) {
        for s in &mut self.shards {
            s.probes.reset();
        }
    }

    /// Base address of the out record array of `shard`.
    pub fn record_array_addr(&self, shard: usize) -> usize {
        self.shards[shard].out.base_addr()
    }

    /// Checks every structural invariant of `v`'s lists.
    pub fn validate_vertex(&self, v: VertexId) -> std::result::Result<(), String> {
        self.validate_side(Side::Out, v)?;
        if self.config.directed {
            self.validate_side(Side::In, v)?;
        }
        Ok(())
    }

    pub fn validate_all(&self) -> std::result::Result<(), String> {
        (0..self.num_vertices as u64).try_for_each(|v| self.validate_vertex(v))
    }

    fn validate_side(&self, side: Side, v: VertexId) -> std::result::Result<(), String> {
        let p = &self.params;
        let s = p.stride;
        let rec = self.record(side, v);
        let deg = rec[DEG] as usize;
        let kind = p.kind(deg);
        let edges = record_edges(p, rec);
        let mut seen = std::collections::HashSet::with_capacity(deg);
        for e in edges.chunks_exact(s) {
            if e[0] >= self.num_vertices as u64 {
                return Err(format!("{v}: neighbor {} out of range", e[0]));
            }
            if !seen.insert(e[0]) {
                return Err(format!("{v}: duplicate neighbor {}", e[0]));
            }
        }
        if kind == VertexKind::Inline {
            return Ok(());
        }
        let cap = rec[CAP] as usize;
        if !cap.is_power_of_two() || cap < p.initial_cap || cap < deg {
            return Err(format!("{v}: bad capacity {cap} for degree {deg}"));
        }
        match kind {
            VertexKind::Array if rec[HASH] != 0 => Err(format!("{v}: array vertex keeps a hash index")),
            VertexKind::Hashed => {
                if rec[HASH] == 0 {
                    return Err(format!("{v}: hashed vertex without index"));
                }
                // SAFETY: Hashed record of this store.
                let t = unsafe {
                    RawTable::from_parts(
                        NonNull::new_unchecked(rec[HASH] as *mut u64),
                        2 * cap,
                        deg,
                        rec[TOMBS] as usize,
                        p.max_log_n,
                        p.hasher,
                    )
                };
                let entries: Vec<_> = t.entries().collect();
                if entries.len() != deg {
                    return Err(format!("{v}: index holds {} entries for degree {deg}", entries.len()));
                }
                let mut scratch = ProbeStats::default();
                for (j, e) in edges.chunks_exact(s).enumerate() {
                    if t.find(e[0], &mut scratch) != Some(j as u64) {
                        return Err(format!("{v}: index disagrees for neighbor {} at {j}", e[0]));
                    }
                }
                let tombs = (0..2 * cap)
                    .filter(|&i| unsafe { *(rec[HASH] as *const u64).add(i) } == crate::cfhash::TOMBSTONE_KEY)
                    .count();
                if tombs != rec[TOMBS] as usize {
                    return Err(format!("{v}: tombstone count {} but {tombs} present", rec[TOMBS]));
                }
                if deg + tombs > cap {
                    return Err(format!("{v}: load above one half"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

impl GraphView for HybridStore {
    fn num_vertices(&self) -> usize {
        self.num_vertices
    }

    fn is_directed(&self) -> bool {
        self.config.directed
    }

    fn is_weighted(&self) -> bool {
        self.config.weighted
    }

    #[inline]
    fn out_neighbors(&self, v: VertexId) -> NeighborCursor<'_> {
        self.neighbors(v)
    }

    #[inline]
    fn in_neighbors(&self, v: VertexId) -> NeighborCursor<'_> {
        NeighborCursor::new(
            record_edges(&self.params, self.record(self.side_for_in(), v)),
            self.config.weighted,
        )
    }

    #[inline]
    fn out_degree(&self, v: VertexId) -> usize {
        self.degree(v)
    }
}

impl DynamicGraph for HybridStore {
    fn insert_edge(&mut self, src: VertexId, dst: VertexId, prop: Option<u64>) -> Result<InsertOutcome> {
        HybridStore::insert_edge(self, src, dst, prop)
    }

    fn delete_edge(&mut self, src: VertexId, dst: VertexId) -> Result<RemoveOutcome> {
        HybridStore::delete_edge(self, src, dst)
    }

    fn apply_batch(&mut self, ops: &[UpdateOp], pool: &ThreadPool) -> Result<BatchOutcome> {
        graph::check_batch(ops, self.num_vertices, self.config.weighted)?;
        let params = self.params;
        let sharding = self.sharding;
        let directed = self.config.directed;
        let shards = &mut self.shards;
        let results: Vec<Result<BatchOutcome>> = pool.install(|| {
            let routed = sharding.route(ops, directed);
            shards
                .par_iter_mut()
                .enumerate()
                .map(|(t, shard)| {
                    let mut outcome = BatchOutcome::default();
                    let mut far = routed.iter().flat_map(|piece| &piece[t]).skip(PREFETCH_DISTANCE);
                    let mut near = routed.iter().flat_map(|piece| &piece[t]).skip(PREFETCH_DISTANCE / 2);
                    for r in routed.iter().flat_map(|piece| &piece[t]) {
                        if let Some(a) = far.next() {
                            shard.prefetch_record(a.side, a.local);
                        }
                        if let Some(a) = near.next() {
                            shard.prefetch_edges(&params, a.side, a.local);
                        }
                        if r.delete {
                            let o = shard.apply_delete(&params, r.side, r.local, r.nbr)?;
                            if r.primary {
                                outcome.count_delete(o);
                            }
                        } else {
                            let o = shard.apply_insert(&params, r.side, r.local, r.nbr, r.prop)?;
                            if r.primary {
                                outcome.count_insert(o);
                            }
                        }
                    }
                    Ok(outcome)
                })
                .collect()
        });
        let mut total = BatchOutcome::default();
        for r in results {
            total.merge(&r?);
        }
        self.num_edges = self.num_edges + total.inserted - total.deleted;
        Ok(total)
    }

    fn num_edges(&self) -> u64 {
        self.num_edges
    }

    fn memory_bytes(&self) -> u64 {
        HybridStore::memory_bytes(self)
    }

    fn format_name(&self) -> &'static str {
        "tango"
    }

    fn as_hybrid(&self) -> Option<&HybridStore> {
        Some(self)
    }

    fn as_hybrid_mut(&mut self) -> Option<&mut HybridStore> {
        Some(self)
    }
}
