//! Edge-list ingestion, shuffling and synthetic generation.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::num::IntErrorKind;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Zipf};

use crate::config::{VertexId, MAX_VERTEX_ID};
use crate::error::{Error, Result};

/// One input edge. `weight` is present only for weighted inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct InputEdge {
    pub src: VertexId,
    pub dst: VertexId,
    pub weight: Option<u64>,
}

/// Edge sequence over dense ids `[0, num_vertices)`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EdgeList {
    pub edges: Vec<InputEdge>,
    pub num_vertices: usize,
    pub directed: bool,
    /// Original id of each dense id, in first-appearance order. Empty for
    /// generated lists.
    pub original_ids: Vec<u64>,
}

impl EdgeList {
    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn is_weighted(&self) -> bool {
        self.edges.first().is_some_and(|e| e.weight.is_some())
    }

    /// Gives every edge without a weight a deterministic synthetic one.
    pub fn with_weights(mut self) -> Self {
        for e in &mut self.edges {
            e.weight.get_or_insert_with(|| synthetic_weight(e.src, e.dst));
        }
        self
    }

    /// Drops all weights.
    pub fn without_weights(mut self) -> Self {
        for e in &mut self.edges {
            e.weight = None;
        }
        self
    }
}

/// Parses whitespace-separated `src dst [weight]` lines. Lines starting
/// with `#` or `%` and blank lines are skipped. Ids are remapped densely in
/// order of first appearance.
pub fn load_snap(path: &Path) -> Result<EdgeList> {
    let reader = BufReader::new(File::open(path)?);
    let mut ids: HashMap<u64, VertexId> = HashMap::new();
    let mut original_ids = Vec::new();
    let mut edges = Vec::new();
    let mut weighted: Option<bool> = None;
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line?;
        let text = line.trim();
        if text.is_empty() || text.starts_with('#') || text.starts_with('%') {
            continue;
        }
        let fields: Vec<&str> = text.split_whitespace().collect();
        if fields.len() < 2 || fields.len() > 3 {
            return Err(parse_err(lineno, format!("expected 2 or 3 fields, found {}", fields.len())));
        }
        let mut endpoint = |raw: &str| -> Result<VertexId> {
            let id = match u64::from_str(raw) {
                Ok(id) if id <= MAX_VERTEX_ID => id,
                Ok(_) => {
                    return Err(Error::IdOverflow {
                        path: path.to_path_buf(),
                        line: lineno,
                        raw: raw.to_string(),
                    })
                }
                Err(e) if *e.kind() == IntErrorKind::PosOverflow => {
                    return Err(Error::IdOverflow {
                        path: path.to_path_buf(),
                        line: lineno,
                        raw: raw.to_string(),
                    })
                }
                Err(_) => return Err(parse_err(lineno, format!("invalid vertex id {raw:?}"))),
            };
            let next = ids.len() as VertexId;
            Ok(*ids.entry(id).or_insert_with(|| {
                original_ids.push(id);
                next
            }))
        };
        let src = endpoint(fields[0])?;
        let dst = endpoint(fields[1])?;
        let weight = match fields.get(2) {
            None => None,
            Some(raw) if raw.starts_with('-') => {
                return Err(Error::NegativeWeight {
                    path: path.to_path_buf(),
                    line: lineno,
                    raw: raw.to_string(),
                })
            }
            Some(raw) => Some(
                u64::from_str(raw).map_err(|_| parse_err(lineno, format!("invalid weight {raw:?}")))?,
            ),
        };
        match weighted {
            None => weighted = Some(weight.is_some()),
            Some(w) if w != weight.is_some() => {
                return Err(parse_err(lineno, "mixed weighted and unweighted lines".into()));
            }
            _ => {}
        }
        edges.push(InputEdge { src, dst, weight });
    }
    Ok(EdgeList {
        edges,
        num_vertices: original_ids.len(),
        directed: false,
        original_ids,
    })
}

/// Uniform permutation of the edges, fixed by `seed`.
pub fn shuffle(mut list: EdgeList, seed: u64) -> EdgeList {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    list.edges.shuffle(&mut rng);
    list
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SyntheticKind {
    /// Both endpoints uniform.
    ShortTailed,
    /// Uniform sources, destinations drawn with Zipf rank exponent 1, which
    /// gives a degree distribution with tail exponent 2.
    HeavyTailed,
}

impl FromStr for SyntheticKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "short" | "short-tailed" | "short_tailed" => Ok(SyntheticKind::ShortTailed),
            "heavy" | "heavy-tailed" | "heavy_tailed" => Ok(SyntheticKind::HeavyTailed),
            other => Err(Error::InvalidConfig(format!("unknown synthetic kind {other:?}"))),
        }
    }
}

/// `num_edges` edges without self-loops over `num_vertices` vertices.
/// Duplicates are kept.
pub fn gen_synthetic(kind: SyntheticKind, num_vertices: usize, num_edges: usize, seed: u64) -> Result<EdgeList> {
    if num_vertices < 2 || num_edges < num_vertices {
        return Err(Error::InvalidConfig(format!(
            "synthetic graphs need edges >= vertices >= 2, got {num_vertices} vertices and {num_edges} edges"
        )));
    }
    let n = num_vertices as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::with_capacity(num_edges);
    match kind {
        SyntheticKind::ShortTailed => {
            while edges.len() < num_edges {
                let (s, d) = (rng.random_range(0..n), rng.random_range(0..n));
                if s != d {
                    edges.push(InputEdge { src: s, dst: d, weight: None });
                }
            }
        }
        SyntheticKind::HeavyTailed => {
            // rank r maps to a random vertex so hubs are scattered over the id space
            let mut hubs: Vec<VertexId> = (0..n).collect();
            hubs.shuffle(&mut rng);
            let zipf = Zipf::new(n as f64, 1.0).map_err(|e| Error::InvalidConfig(e.to_string()))?;
            while edges.len() < num_edges {
                let s = rng.random_range(0..n);
                let rank = zipf.sample(&mut rng) as usize;
                let d = hubs[rank.clamp(1, num_vertices) - 1];
                if s != d {
                    edges.push(InputEdge { src: s, dst: d, weight: None });
                }
            }
        }
    }
    Ok(EdgeList {
        edges,
        num_vertices,
        directed: false,
        original_ids: Vec::new(),
    })
}

/// Weight in `1..=100` that depends only on the unordered endpoint pair, so
/// repeated edges always carry the same weight.
pub fn synthetic_weight(a: VertexId, b: VertexId) -> u64 {
    let (lo, hi) = (a.min(b), a.max(b));
    let mut z = lo.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ hi.rotate_left(29);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    z % 100 + 1
}

/// Largest number of stored edge endpoints any single vertex receives
/// within one batch of `batch_size` consecutive edges.
pub fn max_batch_degree(list: &EdgeList, batch_size: usize) -> usize {
    let mut best = 0;
    let mut counts: HashMap<VertexId, usize> = HashMap::new();
    for batch in list.edges.chunks(batch_size.max(1)) {
        counts.clear();
        for e in batch {
            *counts.entry(e.src).or_default() += 1;
            if !list.directed {
                *counts.entry(e.dst).or_default() += 1;
            }
        }
        best = best.max(counts.values().copied().max().unwrap_or(0));
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn file(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    #[test]
    fn comments_and_counts() {
        let f = file("# c\n0 1\n1 2\n");
        let l = load_snap(f.path()).unwrap();
        assert_eq!(l.len(), 2);
        assert_eq!(l.num_vertices, 3);
        assert!(!l.is_weighted());
    }

    #[test]
    fn sparse_ids_remapped() {
        let f = file("5 900\n");
        let l = load_snap(f.path()).unwrap();
        assert_eq!(l.edges[0], InputEdge { src: 0, dst: 1, weight: None });
        assert_eq!(l.original_ids, vec![5, 900]);
    }

    #[test]
    fn duplicates_retained() {
        let f = file("1 2\n1 2\n");
        assert_eq!(load_snap(f.path()).unwrap().len(), 2);
    }

    #[test]
    fn weights_parsed() {
        let f = file("1\t2\t7\n2 3 0\n");
        let l = load_snap(f.path()).unwrap();
        assert!(l.is_weighted());
        assert_eq!(l.edges[1].weight, Some(0));
    }

    #[test]
    fn errors_carry_line_numbers() {
        let f = file("# h\n0 1\nx 2\n");
        match load_snap(f.path()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let f = file("0 1\n0 99999999999999999999\n");
        assert!(matches!(load_snap(f.path()), Err(Error::IdOverflow { line: 2, .. })));
        let f = file("0 18446744073709551615\n");
        assert!(matches!(load_snap(f.path()), Err(Error::IdOverflow { line: 1, .. })));
        let f = file("0 1 -3\n");
        assert!(matches!(load_snap(f.path()), Err(Error::NegativeWeight { line: 1, .. })));
        let f = file("0 1 2 3\n");
        assert!(matches!(load_snap(f.path()), Err(Error::Parse { line: 1, .. })));
        let f = file("0 1 2\n1 2\n");
        assert!(matches!(load_snap(f.path()), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn shuffle_is_seeded_permutation() {
        let l = gen_synthetic(SyntheticKind::ShortTailed, 100, 1000, 1).unwrap();
        let a = shuffle(l.clone(), 9);
        let b = shuffle(l.clone(), 9);
        assert_eq!(a, b);
        assert_ne!(a.edges, l.edges);
        let mut x = a.edges.clone();
        let mut y = l.edges.clone();
        x.sort();
        y.sort();
        assert_eq!(x, y);
        for n in [0, 1] {
            let small = EdgeList {
                edges: l.edges[..n].to_vec(),
                ..l.clone()
            };
            assert_eq!(shuffle(small.clone(), 3), small);
        }
    }

    #[test]
    fn synthetic_is_deterministic_and_loop_free() {
        for kind in [SyntheticKind::ShortTailed, SyntheticKind::HeavyTailed] {
            let a = gen_synthetic(kind, 1000, 5000, 4).unwrap();
            assert_eq!(a, gen_synthetic(kind, 1000, 5000, 4).unwrap());
            assert_eq!(a.len(), 5000);
            assert!(a.edges.iter().all(|e| e.src != e.dst && e.dst < 1000 && e.src < 1000));
        }
        assert!(gen_synthetic(SyntheticKind::ShortTailed, 10, 5, 0).is_err());
    }

    #[test]
    fn tails_differ_in_batch_max_degree() {
        let short = gen_synthetic(SyntheticKind::ShortTailed, 10_000, 100_000, 1).unwrap();
        let heavy = gen_synthetic(SyntheticKind::HeavyTailed, 10_000, 100_000, 1).unwrap();
        let s = max_batch_degree(&short, 100_000);
        let h = max_batch_degree(&heavy, 100_000);
        assert!(s <= 100, "short-tailed max degree {s}");
        assert!(h >= 10 * s, "heavy {h} vs short {s}");
    }

    #[test]
    fn weights_are_symmetric_and_positive() {
        for (a, b) in [(0, 1), (5, 900), (77, 3)] {
            let w = synthetic_weight(a, b);
            assert_eq!(w, synthetic_weight(b, a));
            assert!((1..=100).contains(&w));
        }
    }
}
