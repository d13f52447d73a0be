//! Per-thread size-class allocator.
//!
//! Chunks are powers of two between 8 bytes and 2^48 bytes. Each class keeps
//! an intrusive LIFO free list: the first word of a free chunk holds the
//! address of the next free chunk of the same class. When a class runs dry a
//! page-aligned block of `max(block_bytes, chunk)` bytes is added and handed
//! out chunk by chunk in address order, after any chunks freed in the
//! meantime. Blocks are kept until the pool is dropped.
//!
//! A pool is not `Sync`; it belongs to one worker at a time.

use std::alloc::{self, Layout};
use std::cell::UnsafeCell;
use std::collections::BTreeMap;
use std::ptr::{self, NonNull};

use crate::error::{Error, Result};

pub const MIN_CLASS: u32 = 3;
pub const MAX_CLASS: u32 = 48;
const PAGE_BYTES: usize = 4096;
const CLASSES: usize = MAX_CLASS as usize + 1;

/// Size class `k` such that `2^k` is the smallest power of two `>= max(sz, 8)`.
#[inline]
pub fn size_class(sz: usize) -> u32 {
    let sz = sz.max(1 << MIN_CLASS);
    usize::BITS - (sz - 1).leading_zeros()
}

/// Bytes actually handed out for a request of `sz` bytes.
#[inline]
pub fn chunk_bytes(sz: usize) -> usize {
    1usize << size_class(sz)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PoolStats {
    /// Bytes in chunks currently handed out.
    pub bytes_in_use: usize,
    /// Bytes in all blocks owned by the pool.
    pub bytes_reserved: usize,
}

/// Violations observed by the shadow tracker.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ShadowReport {
    pub allocations: u64,
    pub frees: u64,
    pub overlaps: u64,
    pub double_frees: u64,
    pub size_mismatches: u64,
    pub foreign_frees: u64,
}

impl ShadowReport {
    pub fn is_clean(&self) -> bool {
        self.overlaps == 0
            && self.double_frees == 0
            && self.size_mismatches == 0
            && self.foreign_frees == 0
    }
}

#[derive(Default)]
struct Shadow {
    live: BTreeMap<usize, usize>,
    report: ShadowReport,
}

impl Shadow {
    fn on_alloc(&mut self, addr: usize, len: usize) {
        self.report.allocations += 1;
        let end = addr + len;
        if let Some((&prev, &plen)) = self.live.range(..=addr).next_back() {
            if prev + plen > addr {
                self.report.overlaps += 1;
            }
        }
        if let Some((&next, _)) = self.live.range(addr + 1..).next() {
            if next < end {
                self.report.overlaps += 1;
            }
        }
        self.live.insert(addr, len);
    }

    /// Returns false when the free must not touch the free lists.
    fn on_free(&mut self, addr: usize, len: usize, owned: bool) -> bool {
        self.report.frees += 1;
        if !owned {
            self.report.foreign_frees += 1;
            return false;
        }
        match self.live.get(&addr) {
            None => {
                self.report.double_frees += 1;
                false
            }
            Some(&l) if l != len => {
                self.report.size_mismatches += 1;
                false
            }
            Some(_) => {
                self.live.remove(&addr);
                true
            }
        }
    }
}

struct Block {
    ptr: NonNull<u8>,
    layout: Layout,
}

struct Inner {
    free_heads: [*mut u8; CLASSES],
    /// Unhanded tail `[cursor, end)` of the newest block of each class. It
    /// acts as the remainder of that class's free chain, so blocks are never
    /// walked up front.
    fresh: [(*mut u8, *mut u8); CLASSES],
    blocks: Vec<Block>,
    stats: PoolStats,
    shadow: Option<Shadow>,
}

pub struct MemoryPool {
    inner: UnsafeCell<Inner>,
    block_bytes: usize,
}

// SAFETY: the pool exclusively owns its blocks; moving it to another thread
// moves that ownership along. It stays !Sync.
unsafe impl Send for MemoryPool {}

impl MemoryPool {
    pub fn new(block_bytes: usize) -> Self {
        Self::build(block_bytes, false)
    }

    /// Pool with the shadow tracker enabled (double free, size mismatch and
    /// overlap detection). Invalid frees are counted and then ignored.
    pub fn with_shadow(block_bytes: usize) -> Self {
        Self::build(block_bytes, true)
    }

    fn build(block_bytes: usize, shadow: bool) -> Self {
        assert!(
            block_bytes.is_power_of_two() && block_bytes >= PAGE_BYTES,
            "block size must be a power of two of at least one page"
        );
        MemoryPool {
            inner: UnsafeCell::new(Inner {
                free_heads: [ptr::null_mut(); CLASSES],
                fresh: [(ptr::null_mut(), ptr::null_mut()); CLASSES],
                blocks: Vec::new(),
                stats: PoolStats::default(),
                shadow: shadow.then(Shadow::default),
            }),
            block_bytes,
        }
    }

    #[allow(clippy::mut_from_ref)]
    #[inline]
    fn inner(&self) -> &mut Inner {
        // SAFETY: the pool is !Sync and no method re-enters another while
        // holding this reference.
        unsafe { &mut *self.inner.get() }
    }

    #[inline]
    fn inner_ref(&self) -> &Inner {
        // SAFETY: see `inner`; readers never overlap a writer because all
        // writers go through `allocate`/`deallocate` on the owning thread.
        unsafe { &*self.inner.get() }
    }

    pub fn block_bytes(&self) -> usize {
        self.block_bytes
    }

    /// Returns a chunk of `chunk_bytes(sz)` bytes. The whole chunk is usable.
    pub fn allocate(&self, sz: usize) -> Result<NonNull<u8>> {
        if sz == 0 || sz > 1usize << MAX_CLASS {
            return Err(Error::BadChunkSize(sz));
        }
        let k = size_class(sz) as usize;
        let inner = self.inner();
        let len = 1usize << k;
        let head = inner.free_heads[k];
        let head = if !head.is_null() {
            // SAFETY: `head` is a freed chunk of this pool; its first word is
            // the next link written by `deallocate`.
            inner.free_heads[k] = unsafe { (head as *mut *mut u8).read() };
            head
        } else {
            if inner.fresh[k].0 == inner.fresh[k].1 {
                self.carve(inner, k)?;
            }
            let (cursor, _) = inner.fresh[k];
            // SAFETY: cursor < end inside the newest block of this class.
            inner.fresh[k].0 = unsafe { cursor.add(len) };
            cursor
        };
        let len = 1usize << k;
        inner.stats.bytes_in_use += len;
        if let Some(shadow) = inner.shadow.as_mut() {
            shadow.on_alloc(head as usize, len);
        }
        Ok(unsafe { NonNull::new_unchecked(head) })
    }

    /// Returns a chunk to its class list. It becomes the next chunk handed out
    /// for that class.
    ///
    /// # Safety
    ///
    /// `chunk` must come from `allocate` on this pool with a size of the same
    /// class as `sz`, must not have been freed since, and must not be used
    /// afterwards. With the shadow tracker enabled, violations are counted
    /// and the call is ignored instead.
    pub unsafe fn deallocate(&self, chunk: NonNull<u8>, sz: usize) {
        let k = size_class(sz) as usize;
        let len = 1usize << k;
        let addr = chunk.as_ptr();
        let inner = self.inner();
        if inner.shadow.is_some() {
            let owned = inner.blocks.iter().any(|b| {
                let start = b.ptr.as_ptr() as usize;
                let a = addr as usize;
                a >= start && a + len <= start + b.layout.size()
            });
            if !inner.shadow.as_mut().unwrap().on_free(addr as usize, len, owned) {
                return;
            }
        }
        (addr as *mut *mut u8).write(inner.free_heads[k]);
        inner.free_heads[k] = addr;
        inner.stats.bytes_in_use -= len;
    }

    pub fn stats(&self) -> PoolStats {
        self.inner_ref().stats
    }

    pub fn shadow_report(&self) -> Option<ShadowReport> {
        self.inner_ref().shadow.as_ref().map(|s| s.report)
    }

    /// Number of blocks owned so far.
    pub fn block_count(&self) -> usize {
        self.inner_ref().blocks.len()
    }

    fn carve(&self, inner: &mut Inner, k: usize) -> Result<()> {
        let size = self.block_bytes.max(1usize << k);
        let layout = Layout::from_size_align(size, PAGE_BYTES)
            .map_err(|_| Error::OutOfMemory { bytes: size })?;
        // SAFETY: layout has non-zero size.
        let base = unsafe { alloc::alloc(layout) };
        let base = NonNull::new(base).ok_or(Error::OutOfMemory { bytes: size })?;
        let start = base.as_ptr();
        // SAFETY: `size` bytes from `start` belong to the fresh block.
        inner.fresh[k] = (start, unsafe { start.add(size) });
        inner.blocks.push(Block { ptr: base, layout });
        inner.stats.bytes_reserved += size;
        Ok(())
    }
}

impl Drop for MemoryPool {
    fn drop(&mut self) {
        for block in self.inner.get_mut().blocks.drain(..) {
            // SAFETY: allocated in `carve` with this layout.
            unsafe { alloc::dealloc(block.ptr.as_ptr(), block.layout) };
        }
    }
}

impl std::fmt::Debug for MemoryPool {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MemoryPool")
            .field("block_bytes", &self.block_bytes)
            .field("stats", &self.stats())
            .finish()
    }
}
