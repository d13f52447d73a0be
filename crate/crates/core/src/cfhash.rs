//! Open-addressing table whose probe sequence exhausts one cache line before
//! moving to the next.
//!
//! The slot index of the `i`-th probe is
//!
//! ```text
//! h(k, i)  = N * h1(k, i / N) + h2(k, i mod N)
//! h1(k, x) = (h3(k) + x * h4(k)) mod M
//! h2(k, x) = (k + x) mod N
//! h3(k)    = (A * k mod 2^w) >> (w - m)
//! h4(k)    = ((A * k mod 2^w) >> (w - 2m)) | 1
//! ```
//!
//! with `M` lines of `N` slots, both powers of two, and `m = log2(M)`. `h4`
//! is odd and therefore coprime with `M`, so `h1` cycles through every line;
//! `h2` is linear probing inside the line.
//!
//! Keys and values live in two parallel arrays inside one pool chunk: the
//! first `capacity` words are keys, the next `capacity` words are values.
//! A line of keys holds `N = cache_line_bytes / 8` slots.

use std::ptr::NonNull;

use crate::config::DEFAULT_HASH_MULTIPLIER;
use crate::error::{Error, Result};
use crate::mempool::MemoryPool;
use crate::trace;

pub const EMPTY_KEY: u64 = u64::MAX;
pub const TOMBSTONE_KEY: u64 = u64::MAX - 1;

/// Multiplicative hashing parameters: multiplier `A` and key width `w`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LineHasher {
    pub multiplier: u64,
    pub key_bits: u32,
}

impl Default for LineHasher {
    fn default() -> Self {
        LineHasher {
            multiplier: DEFAULT_HASH_MULTIPLIER,
            key_bits: 64,
        }
    }
}

impl LineHasher {
    pub fn new(multiplier: u64, key_bits: u32) -> Self {
        assert!(key_bits == 32 || key_bits == 64, "key width must be 32 or 64");
        LineHasher {
            multiplier,
            key_bits,
        }
    }

    #[inline]
    fn scrambled(&self, key: u64) -> u64 {
        let y = self.multiplier.wrapping_mul(key);
        if self.key_bits == 64 {
            y
        } else {
            y & ((1u64 << self.key_bits) - 1)
        }
    }

    /// `(h3, h4)` for a table of `2^log_m` lines.
    #[inline]
    fn line_seeds(&self, key: u64, log_m: u32) -> (u64, u64) {
        if log_m == 0 {
            return (0, 1);
        }
        let y = self.scrambled(key);
        let w = self.key_bits;
        (y >> (w - log_m), (y >> (w - 2 * log_m)) | 1)
    }
}

/// Slot visited by the `i`-th probe for `key` in a table of `2^log_m` lines
/// of `2^log_n` slots.
#[inline]
pub fn hash_probe(key: u64, i: u64, log_m: u32, log_n: u32, hasher: LineHasher) -> usize {
    let (h3, h4) = hasher.line_seeds(key, log_m);
    let m_mask = (1u64 << log_m) - 1;
    let n_mask = (1u64 << log_n) - 1;
    let h1 = h3.wrapping_add((i >> log_n).wrapping_mul(h4)) & m_mask;
    let h2 = key.wrapping_add(i) & n_mask;
    ((h1 << log_n) + h2) as usize
}

/// Outcome of an insert.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InsertOutcome {
    Inserted,
    Updated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RemoveOutcome {
    Removed,
    Absent,
}

/// Probe distances bucketed 1..=63, with everything longer in the last bucket.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Histogram {
    buckets: [u64; 64],
    count: u64,
    sum: u64,
}

impl Default for Histogram {
    fn default() -> Self {
        Histogram {
            buckets: [0; 64],
            count: 0,
            sum: 0,
        }
    }
}

impl Histogram {
    #[inline]
    pub fn record(&mut self, distance: u32) {
        let d = distance as usize;
        self.buckets[d.min(63)] += 1;
        self.count += 1;
        self.sum += distance as u64;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.sum as f64 / self.count as f64
        }
    }

    /// Samples with exactly `distance` probes (the last bucket also holds longer ones).
    pub fn at(&self, distance: usize) -> u64 {
        self.buckets[distance.min(63)]
    }

    /// Fraction of samples with at most `distance` probes; 1.0 when empty.
    pub fn fraction_at_most(&self, distance: usize) -> f64 {
        if self.count == 0 {
            return 1.0;
        }
        let hits: u64 = self.buckets[..=distance.min(62)].iter().sum();
        hits as f64 / self.count as f64
    }

    pub fn merge(&mut self, other: &Histogram) {
        for (a, b) in self.buckets.iter_mut().zip(other.buckets.iter()) {
            *a += b;
        }
        self.count += other.count;
        self.sum += other.sum;
    }
}

/// Instrumentation counters for table operations.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ProbeStats {
    pub inserts: Histogram,
    pub finds: Histogram,
    pub removes: Histogram,
}

impl ProbeStats {
    pub fn merge(&mut self, other: &ProbeStats) {
        self.inserts.merge(&other.inserts);
        self.finds.merge(&other.finds);
        self.removes.merge(&other.removes);
    }

    pub fn reset(&mut self) {
        *self = ProbeStats::default();
    }

    /// Total table operations recorded.
    pub fn operations(&self) -> u64 {
        self.inserts.count() + self.finds.count() + self.removes.count()
    }
}

/// Result of walking the probe sequence for one key.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Probe {
    Found { slot: usize, value: u64 },
    /// Key absent; `slot` is the first tombstone seen, or the terminating empty slot.
    Vacant { slot: usize, tombstone: bool },
    /// Key absent and no empty or tombstone slot anywhere.
    Exhausted,
}

/// Non-owning view of a table living in pool memory.
///
/// The store keeps the pointer and counters inside a vertex record and
/// rebuilds this view per operation; `CfhTable` wraps it with ownership.
#[derive(Debug)]
pub struct RawTable {
    slots: NonNull<u64>,
    capacity: usize,
    log_m: u32,
    log_n: u32,
    max_log_n: u32,
    live: usize,
    tombstones: usize,
    hasher: LineHasher,
}

/// `log2` of the slots per line for a table of `capacity` slots.
#[inline]
fn line_shift(capacity: usize, max_log_n: u32) -> u32 {
    capacity.trailing_zeros().min(max_log_n)
}

impl RawTable {
    /// Bytes of pool memory a table of `capacity` slots occupies.
    #[inline]
    pub fn chunk_bytes(capacity: usize) -> usize {
        capacity * 16
    }

    fn check_geometry(capacity: usize, max_log_n: u32, hasher: LineHasher) -> Result<(u32, u32)> {
        if !capacity.is_power_of_two() {
            return Err(Error::InvalidConfig(format!(
                "hash capacity must be a power of two, got {capacity}"
            )));
        }
        let log_n = line_shift(capacity, max_log_n);
        let log_m = capacity.trailing_zeros() - log_n;
        if 2 * log_m > hasher.key_bits {
            return Err(Error::InvalidConfig(format!(
                "{} lines exceed what a {}-bit hash can address",
                1u64 << log_m,
                hasher.key_bits
            )));
        }
        Ok((log_m, log_n))
    }

    /// Allocates an empty table of `capacity` slots from `pool`.
    pub fn allocate(
        pool: &MemoryPool,
        capacity: usize,
        max_log_n: u32,
        hasher: LineHasher,
    ) -> Result<RawTable> {
        let (log_m, log_n) = Self::check_geometry(capacity, max_log_n, hasher)?;
        let chunk = pool.allocate(Self::chunk_bytes(capacity))?;
        let slots = chunk.cast::<u64>();
        // SAFETY: the chunk holds at least 2 * capacity words.
        unsafe {
            std::slice::from_raw_parts_mut(slots.as_ptr(), capacity).fill(EMPTY_KEY);
        }
        Ok(RawTable {
            slots,
            capacity,
            log_m,
            log_n,
            max_log_n,
            live: 0,
            tombstones: 0,
            hasher,
        })
    }

    /// Reassembles a view from parts previously taken with [`RawTable::into_parts`].
    ///
    /// # Safety
    ///
    /// `slots` must point to a live table of `capacity` slots allocated by
    /// [`RawTable::allocate`] with the same `max_log_n` and `hasher`, and the
    /// counters must match its contents.
    #[inline]
    pub unsafe fn from_parts(
        slots: NonNull<u64>,
        capacity: usize,
        live: usize,
        tombstones: usize,
        max_log_n: u32,
        hasher: LineHasher,
    ) -> RawTable {
        let log_n = line_shift(capacity, max_log_n);
        RawTable {
            slots,
            capacity,
            log_m: capacity.trailing_zeros() - log_n,
            log_n,
            max_log_n,
            live,
            tombstones,
            hasher,
        }
    }

    /// `(slots, capacity, live, tombstones)`.
    #[inline]
    pub fn into_parts(self) -> (NonNull<u64>, usize, usize, usize) {
        (self.slots, self.capacity, self.live, self.tombstones)
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.live
    }

    pub fn is_empty(&self) -> bool {
        self.live == 0
    }

    pub fn tombstones(&self) -> usize {
        self.tombstones
    }

    pub fn lines(&self) -> usize {
        1 << self.log_m
    }

    pub fn slots_per_line(&self) -> usize {
        1 << self.log_n
    }

    pub fn slots_ptr(&self) -> NonNull<u64> {
        self.slots
    }

    #[inline]
    fn key_at(&self, slot: usize) -> u64 {
        debug_assert!(slot < self.capacity);
        // SAFETY: slot < capacity and the key array has `capacity` words.
        unsafe {
            let p = self.slots.as_ptr().add(slot);
            trace::touch(p);
            *p
        }
    }

    #[inline]
    fn value_at(&self, slot: usize) -> u64 {
        debug_assert!(slot < self.capacity);
        // SAFETY: values follow the keys inside the same chunk.
        unsafe {
            let p = self.slots.as_ptr().add(self.capacity + slot);
            trace::touch(p);
            *p
        }
    }

    #[inline]
    fn write(&mut self, slot: usize, key: u64, value: u64) {
        debug_assert!(slot < self.capacity);
        // SAFETY: as above; `&mut self` gives exclusive access.
        unsafe {
            let base = self.slots.as_ptr();
            trace::touch(base.add(slot));
            trace::touch(base.add(self.capacity + slot));
            *base.add(slot) = key;
            *base.add(self.capacity + slot) = value;
        }
    }

    #[inline]
    fn write_value(&mut self, slot: usize, value: u64) {
        // SAFETY: as above.
        unsafe {
            let p = self.slots.as_ptr().add(self.capacity + slot);
            trace::touch(p);
            *p = value;
        }
    }

    #[inline]
    fn mark_deleted(&mut self, slot: usize) {
        // SAFETY: as above.
        unsafe {
            let p = self.slots.as_ptr().add(slot);
            trace::touch(p);
            *p = TOMBSTONE_KEY;
        }
    }

    /// Walks the probe sequence for `key`. Returns the outcome and the number
    /// of slots examined.
    #[inline]
    pub(crate) fn probe(&self, key: u64) -> (Probe, u32) {
        debug_assert!(key < TOMBSTONE_KEY, "reserved key");
        let (h3, h4) = self.hasher.line_seeds(key, self.log_m);
        let m_mask = (1u64 << self.log_m) - 1;
        let n = 1u64 << self.log_n;
        let n_mask = n - 1;
        let mut first_tomb: Option<usize> = None;
        let mut distance = 0u32;
        let mut line = h3 & m_mask;
        for _ in 0..(1u64 << self.log_m) {
            let base = (line << self.log_n) as usize;
            for j in 0..n {
                let slot = base + (key.wrapping_add(j) & n_mask) as usize;
                distance += 1;
                let k = self.key_at(slot);
                if k == key {
                    return (
                        Probe::Found {
                            slot,
                            value: self.value_at(slot),
                        },
                        distance,
                    );
                }
                if k == EMPTY_KEY {
                    let vacant = match first_tomb {
                        Some(t) => Probe::Vacant {
                            slot: t,
                            tombstone: true,
                        },
                        None => Probe::Vacant {
                            slot,
                            tombstone: false,
                        },
                    };
                    return (vacant, distance);
                }
                if k == TOMBSTONE_KEY && first_tomb.is_none() {
                    first_tomb = Some(slot);
                }
            }
            line = line.wrapping_add(h4) & m_mask;
        }
        match first_tomb {
            Some(t) => (
                Probe::Vacant {
                    slot: t,
                    tombstone: true,
                },
                distance,
            ),
            None => (Probe::Exhausted, distance),
        }
    }

    /// Stores `key` in the vacant slot returned by [`RawTable::probe`].
    #[inline]
    pub(crate) fn fill(&mut self, slot: usize, tombstone: bool, key: u64, value: u64) {
        self.write(slot, key, value);
        self.live += 1;
        if tombstone {
            self.tombstones -= 1;
        }
    }

    /// True when an insert of a new key should first purge tombstones.
    #[inline]
    pub fn tombstone_pressure(&self) -> bool {
        self.tombstones > 0 && self.live + self.tombstones + 1 > self.capacity / 2
    }

    pub fn find(&self, key: u64, stats: &mut ProbeStats) -> Option<u64> {
        let (probe, d) = self.probe(key);
        stats.finds.record(d);
        match probe {
            Probe::Found { value, .. } => Some(value),
            _ => None,
        }
    }

    /// Inserts or updates. Fails when a new key would push the load factor
    /// above one half.
    pub fn insert(&mut self, key: u64, value: u64, stats: &mut ProbeStats) -> Result<InsertOutcome> {
        let (probe, d) = self.probe(key);
        stats.inserts.record(d);
        match probe {
            Probe::Found { slot, .. } => {
                self.write_value(slot, value);
                Ok(InsertOutcome::Updated)
            }
            Probe::Vacant { slot, tombstone } if 2 * (self.live + 1) <= self.capacity => {
                self.fill(slot, tombstone, key, value);
                Ok(InsertOutcome::Inserted)
            }
            _ => Err(Error::CapacityExceeded {
                live: self.live,
                slots: self.capacity,
            }),
        }
    }

    /// Overwrites the value of a key known to be present.
    #[inline]
    pub(crate) fn set_value(&mut self, key: u64, value: u64, stats: &mut ProbeStats) -> bool {
        let (probe, d) = self.probe(key);
        stats.finds.record(d);
        match probe {
            Probe::Found { slot, .. } => {
                self.write_value(slot, value);
                true
            }
            _ => false,
        }
    }

    pub fn remove(&mut self, key: u64, stats: &mut ProbeStats) -> RemoveOutcome {
        let (probe, d) = self.probe(key);
        stats.removes.record(d);
        match probe {
            Probe::Found { slot, .. } => {
                self.mark_deleted(slot);
                self.live -= 1;
                self.tombstones += 1;
                RemoveOutcome::Removed
            }
            _ => RemoveOutcome::Absent,
        }
    }

    /// Tombstones a slot returned as `Probe::Found`.
    #[inline]
    pub(crate) fn erase(&mut self, slot: usize) {
        debug_assert!(self.key_at(slot) < TOMBSTONE_KEY);
        self.mark_deleted(slot);
        self.live -= 1;
        self.tombstones += 1;
    }

    /// Live `(key, value)` pairs in slot order.
    pub fn entries(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        (0..self.capacity).filter_map(move |s| {
            let k = self.key_at(s);
            (k < TOMBSTONE_KEY).then(|| (k, self.value_at(s)))
        })
    }

    /// Moves every live pair into a fresh table of `new_capacity` slots and
    /// releases the old chunk.
    ///
    /// # Safety
    ///
    /// `self` must have been allocated from `pool`.
    pub unsafe fn rebuild(&mut self, pool: &MemoryPool, new_capacity: usize) -> Result<()> {
        if new_capacity < 2 * self.live {
            return Err(Error::CapacityExceeded {
                live: self.live,
                slots: new_capacity,
            });
        }
        let mut fresh = RawTable::allocate(pool, new_capacity, self.max_log_n, self.hasher)?;
        for s in 0..self.capacity {
            let k = self.key_at(s);
            if k < TOMBSTONE_KEY {
                let v = self.value_at(s);
                match fresh.probe(k).0 {
                    Probe::Vacant { slot, tombstone } => fresh.fill(slot, tombstone, k, v),
                    _ => unreachable!("fresh table has room for every live key"),
                }
            }
        }
        let old = std::mem::replace(self, fresh);
        old.release(pool);
        Ok(())
    }

    /// Returns the chunk to `pool`.
    ///
    /// # Safety
    ///
    /// `self` must have been allocated from `pool`.
    pub unsafe fn release(self, pool: &MemoryPool) {
        pool.deallocate(self.slots.cast(), Self::chunk_bytes(self.capacity));
    }
}

/// An owned table drawing its memory from a [`MemoryPool`].
pub struct CfhTable<'p> {
    raw: Option<RawTable>,
    pool: &'p MemoryPool,
    max_log_n: u32,
    stats: ProbeStats,
}

impl<'p> CfhTable<'p> {
    /// Empty table of `capacity` slots (a power of two) with lines of
    /// `cache_line_bytes / 8` keys.
    pub fn with_capacity(
        pool: &'p MemoryPool,
        capacity: usize,
        cache_line_bytes: usize,
        hasher: LineHasher,
    ) -> Result<Self> {
        let max_log_n = (cache_line_bytes / 8).max(1).trailing_zeros();
        let raw = RawTable::allocate(pool, capacity, max_log_n, hasher)?;
        Ok(CfhTable {
            raw: Some(raw),
            pool,
            max_log_n,
            stats: ProbeStats::default(),
        })
    }

    #[inline]
    fn raw(&self) -> &RawTable {
        self.raw.as_ref().expect("table is live")
    }

    #[inline]
    fn raw_mut(&mut self) -> &mut RawTable {
        self.raw.as_mut().expect("table is live")
    }

    pub fn len(&self) -> usize {
        self.raw().len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw().is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.raw().capacity()
    }

    pub fn tombstones(&self) -> usize {
        self.raw().tombstones()
    }

    pub fn lines(&self) -> usize {
        self.raw().lines()
    }

    pub fn slots_per_line(&self) -> usize {
        self.raw().slots_per_line()
    }

    /// Address of the key array; aligned to the cache line for tables of at
    /// least one line.
    pub fn slots_addr(&self) -> usize {
        self.raw().slots_ptr().as_ptr() as usize
    }

    pub fn load_factor(&self) -> f64 {
        self.len() as f64 / self.capacity() as f64
    }

    pub fn find(&mut self, key: u64) -> Option<u64> {
        assert!(key < TOMBSTONE_KEY, "key {key:#x} is a reserved marker");
        let raw = self.raw.as_ref().expect("table is live");
        raw.find(key, &mut self.stats)
    }

    /// Number of slots examined by an unsuccessful or successful lookup,
    /// without touching the counters.
    pub fn probe_length(&self, key: u64) -> u32 {
        self.raw().probe(key).1
    }

    pub fn insert(&mut self, key: u64, value: u64) -> Result<InsertOutcome> {
        assert!(key < TOMBSTONE_KEY, "key {key:#x} is a reserved marker");
        if self.raw().tombstone_pressure()
            && !matches!(self.raw().probe(key).0, Probe::Found { .. })
        {
            let cap = self.capacity();
            self.rebuild(cap)?;
        }
        let raw = self.raw.as_mut().expect("table is live");
        raw.insert(key, value, &mut self.stats)
    }

    pub fn remove(&mut self, key: u64) -> RemoveOutcome {
        assert!(key < TOMBSTONE_KEY, "key {key:#x} is a reserved marker");
        let raw = self.raw.as_mut().expect("table is live");
        raw.remove(key, &mut self.stats)
    }

    /// Reinserts all live pairs into a fresh array of `new_capacity` slots.
    pub fn rebuild(&mut self, new_capacity: usize) -> Result<()> {
        RawTable::check_geometry(new_capacity, self.max_log_n, self.raw().hasher)?;
        let pool = self.pool;
        // SAFETY: the table was allocated from `self.pool`.
        unsafe { self.raw_mut().rebuild(pool, new_capacity) }
    }

    pub fn entries(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        self.raw().entries()
    }

    pub fn probe_stats(&self) -> &ProbeStats {
        &self.stats
    }

    pub fn reset_probe_stats(&mut self) {
        self.stats.reset();
    }
}

impl Drop for CfhTable<'_> {
    fn drop(&mut self) {
        if let Some(raw) = self.raw.take() {
            // SAFETY: allocated from `self.pool`, which outlives `self`.
            unsafe { raw.release(self.pool) };
        }
    }
}
