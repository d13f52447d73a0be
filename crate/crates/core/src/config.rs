//! Shared vocabulary: vertex ids, edges, thresholds and the graph configuration.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Dense vertex identifier in `[0, num_vertices)`.
///
/// The two largest `u64` values are reserved as hash-table markers and are
/// never valid ids.
pub type VertexId = u64;

/// Largest id a vertex may take (exclusive bound is `u64::MAX - 1`).
pub const MAX_VERTEX_ID: VertexId = u64::MAX - 2;

/// Width of the per-vertex degree field in bytes.
pub const DEGREE_BYTES: usize = 8;

/// Multiplier used by the line-confined hash for 64-bit keys.
pub const DEFAULT_HASH_MULTIPLIER: u64 = 0x9E37_79B9_7F4A_7C15;

/// Multiplier for 32-bit keys.
pub const DEFAULT_HASH_MULTIPLIER_32: u64 = 2_654_435_761;

/// One outgoing (or incoming) edge: the neighbor id and an optional weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Edge {
    pub dst: VertexId,
    pub prop: Option<u64>,
}

impl Edge {
    pub fn new(dst: VertexId, prop: Option<u64>) -> Self {
        Edge { dst, prop }
    }

    /// Weight for shortest-path kernels; unweighted edges count as 1.
    #[inline]
    pub fn weight(&self) -> u64 {
        self.prop.unwrap_or(1)
    }
}

/// Number of edges that fit in a cache-line-sized record beside the degree field.
pub fn compute_th0(cache_line_bytes: usize, edge_bytes: usize, deg_bytes: usize) -> Result<usize> {
    if cache_line_bytes == 0 || edge_bytes == 0 || deg_bytes == 0 {
        return Err(Error::InvalidConfig(
            "cache line, edge and degree sizes must be positive".into(),
        ));
    }
    if cache_line_bytes < deg_bytes + edge_bytes {
        return Err(Error::InvalidConfig(format!(
            "a {cache_line_bytes}-byte line cannot hold a {deg_bytes}-byte degree and one {edge_bytes}-byte edge"
        )));
    }
    Ok((cache_line_bytes - deg_bytes) / edge_bytes)
}

/// Suggested hash threshold: `2^ceil(log2(3 * edges_per_cache_line))`.
pub fn th1_rule_of_thumb(edges_per_cache_line: usize) -> usize {
    (3 * edges_per_cache_line.max(1)).next_power_of_two()
}

/// Owner thread of `v` under chunked partitioning.
#[inline]
pub fn partition_of(v: VertexId, num_threads: usize, partition_size: usize) -> usize {
    ((v / partition_size as u64) % num_threads as u64) as usize
}

/// Storage configuration for a graph instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Config {
    pub cache_line_bytes: usize,
    pub weighted: bool,
    pub directed: bool,
    /// Degree above which a vertex keeps a hash index next to its edge array.
    pub th1: usize,
    /// Vertices per ownership partition.
    pub partition_size: usize,
    pub hash_multiplier: u64,
    /// Size of the blocks the memory pool carves chunks from.
    pub block_bytes: usize,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            cache_line_bytes: 64,
            weighted: false,
            directed: false,
            th1: 32,
            partition_size: 512,
            hash_multiplier: DEFAULT_HASH_MULTIPLIER,
            block_bytes: 4 << 20,
        }
    }
}

impl Config {
    pub fn new(weighted: bool, directed: bool) -> Self {
        Config {
            weighted,
            directed,
            ..Config::default()
        }
    }

    /// Bytes per stored edge: 8 for `{dst}`, 16 for `{dst, prop}`.
    pub fn edge_bytes(&self) -> usize {
        if self.weighted {
            16
        } else {
            8
        }
    }

    /// 64-bit words per stored edge.
    pub fn edge_words(&self) -> usize {
        self.edge_bytes() / 8
    }

    pub fn th0(&self) -> usize {
        compute_th0(self.cache_line_bytes, self.edge_bytes(), DEGREE_BYTES)
            .expect("config was validated")
    }

    /// Capacity of the first edge array a vertex receives when it outgrows
    /// its inline slots.
    pub fn initial_array_capacity(&self) -> usize {
        (self.th0() + 1).next_power_of_two()
    }

    pub fn validate(&self) -> Result<()> {
        let line = self.cache_line_bytes;
        if !line.is_power_of_two() || line < 32 {
            return Err(Error::InvalidConfig(format!(
                "cache_line_bytes must be a power of two >= 32, got {line}"
            )));
        }
        let th0 = compute_th0(line, self.edge_bytes(), DEGREE_BYTES)?;
        if th0 == 0 {
            return Err(Error::InvalidConfig("no edge fits inline".into()));
        }
        if !self.th1.is_power_of_two() || self.th1 <= th0 {
            return Err(Error::InvalidConfig(format!(
                "th1 must be a power of two greater than th0={th0}, got {}",
                self.th1
            )));
        }
        let per_line = line / DEGREE_BYTES;
        if self.partition_size == 0 || self.partition_size % per_line != 0 {
            return Err(Error::InvalidConfig(format!(
                "partition_size must be a positive multiple of {per_line}, got {}",
                self.partition_size
            )));
        }
        if self.block_bytes < 4096 || !self.block_bytes.is_power_of_two() {
            return Err(Error::InvalidConfig(format!(
                "block_bytes must be a power of two >= 4096, got {}",
                self.block_bytes
            )));
        }
        if self.hash_multiplier == 0 {
            return Err(Error::InvalidConfig("hash_multiplier must be non-zero".into()));
        }
        Ok(())
    }

    /// Applies `key = value` lines on top of `self`. Blank lines and lines
    /// starting with `#` are ignored.
    pub fn apply_kv_text(mut self, text: &str) -> Result<Config> {
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |msg: String| Error::InvalidConfig(format!("line {}: {msg}", idx + 1));
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| bad(format!("expected key=value, got {line:?}")))?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "cache_line_bytes" => self.cache_line_bytes = parse_usize(value).map_err(bad)?,
                "th1" => self.th1 = parse_usize(value).map_err(bad)?,
                "partition_size" => self.partition_size = parse_usize(value).map_err(bad)?,
                "block_bytes" => self.block_bytes = parse_usize(value).map_err(bad)?,
                "hash_multiplier" => self.hash_multiplier = parse_u64(value).map_err(bad)?,
                "weighted" => self.weighted = parse_bool(value).map_err(bad)?,
                "directed" => self.directed = parse_bool(value).map_err(bad)?,
                other => return Err(bad(format!("unknown key {other:?}"))),
            }
        }
        self.validate()?;
        Ok(self)
    }

    pub fn apply_kv_file(self, path: &Path) -> Result<Config> {
        let text = fs::read_to_string(path)?;
        self.apply_kv_text(&text)
    }
}

fn parse_u64(s: &str) -> std::result::Result<u64, String> {
    let parsed = match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(&hex.replace('_', ""), 16),
        None => s.replace('_', "").parse(),
    };
    parsed.map_err(|e| format!("{s:?}: {e}"))
}

fn parse_usize(s: &str) -> std::result::Result<usize, String> {
    parse_u64(s).map(|v| v as usize)
}

fn parse_bool(s: &str) -> std::result::Result<bool, String> {
    match s {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(format!("{s:?} is not a boolean")),
    }
}
