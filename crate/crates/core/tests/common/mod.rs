//! Reference models shared by the integration tests. Nothing here calls the
//! library's kernels; every answer is recomputed from a plain edge map.

#![allow(dead_code)]

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap, VecDeque};

use rand::Rng;

pub const INF: u64 = u64::MAX;

/// Map-of-edges model of a graph. Undirected edges are keyed by
/// `(min, max)`.
#[derive(Debug, Clone, Default)]
pub struct Model {
    pub directed: bool,
    edges: HashMap<(u64, u64), (Option<u64>, usize)>,
    keys: Vec<(u64, u64)>,
}

impl Model {
    pub fn new(directed: bool) -> Self {
        Model {
            directed,
            ..Model::default()
        }
    }

    fn key(&self, u: u64, v: u64) -> (u64, u64) {
        if self.directed || u <= v {
            (u, v)
        } else {
            (v, u)
        }
    }

    /// True if the edge is new, false if only its property changed.
    pub fn insert(&mut self, u: u64, v: u64, prop: Option<u64>) -> bool {
        let k = self.key(u, v);
        match self.edges.get_mut(&k) {
            Some(e) => {
                e.0 = prop;
                false
            }
            None => {
                self.edges.insert(k, (prop, self.keys.len()));
                self.keys.push(k);
                true
            }
        }
    }

    pub fn delete(&mut self, u: u64, v: u64) -> bool {
        let k = self.key(u, v);
        let Some((_, i)) = self.edges.remove(&k) else {
            return false;
        };
        self.keys.swap_remove(i);
        if i < self.keys.len() {
            let moved = self.keys[i];
            self.edges.get_mut(&moved).unwrap().1 = i;
        }
        true
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    /// A uniformly random stored edge.
    pub fn pick<R: Rng>(&self, rng: &mut R) -> Option<(u64, u64)> {
        if self.keys.is_empty() {
            None
        } else {
            Some(self.keys[rng.random_range(0..self.keys.len())])
        }
    }

    /// Sorted `(src, dst, prop)` for every stored direction, matching what the
    /// out lists of a graph hold.
    pub fn snapshot(&self) -> Vec<(u64, u64, Option<u64>)> {
        let mut out = Vec::with_capacity(2 * self.keys.len());
        for (&(u, v), &(p, _)) in &self.edges {
            out.push((u, v, p));
            if !self.directed && u != v {
                out.push((v, u, p));
            }
        }
        out.sort_unstable();
        out
    }

    /// Out adjacency as `(neighbor, weight)` with unit weight when absent.
    pub fn out_adj(&self, n: usize) -> Vec<Vec<(u64, u64)>> {
        let mut adj = vec![Vec::new(); n];
        for (u, v, p) in self.snapshot() {
            adj[u as usize].push((v, p.unwrap_or(1)));
        }
        adj
    }

    pub fn in_adj(&self, n: usize) -> Vec<Vec<(u64, u64)>> {
        let mut adj = vec![Vec::new(); n];
        for (u, v, p) in self.snapshot() {
            adj[v as usize].push((u, p.unwrap_or(1)));
        }
        adj
    }
}

pub fn bfs(adj: &[Vec<(u64, u64)>], source: u64) -> Vec<u64> {
    let mut dist = vec![INF; adj.len()];
    let mut queue = VecDeque::from([source]);
    dist[source as usize] = 0;
    while let Some(u) = queue.pop_front() {
        for &(v, _) in &adj[u as usize] {
            if dist[v as usize] == INF {
                dist[v as usize] = dist[u as usize] + 1;
                queue.push_back(v);
            }
        }
    }
    dist
}

pub fn dijkstra(adj: &[Vec<(u64, u64)>], source: u64) -> Vec<u64> {
    let mut dist = vec![INF; adj.len()];
    let mut heap = BinaryHeap::from([Reverse((0u64, source))]);
    dist[source as usize] = 0;
    while let Some(Reverse((d, u))) = heap.pop() {
        if d > dist[u as usize] {
            continue;
        }
        for &(v, w) in &adj[u as usize] {
            let nd = d + w;
            if nd < dist[v as usize] {
                dist[v as usize] = nd;
                heap.push(Reverse((nd, v)));
            }
        }
    }
    dist
}

/// Weakly connected components labelled by their smallest vertex.
pub fn components(n: usize, model: &Model) -> Vec<u64> {
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut parent: Vec<usize> = (0..n).collect();
    for (u, v, _) in model.snapshot() {
        let (a, b) = (find(&mut parent, u as usize), find(&mut parent, v as usize));
        // The smaller root wins, so every root is its component's minimum.
        if a < b {
            parent[b] = a;
        } else if b < a {
            parent[a] = b;
        }
    }
    (0..n).map(|v| find(&mut parent, v) as u64).collect()
}

/// Damped PageRank with uniform teleport and sink mass spread evenly,
/// iterated from the uniform vector until the L1 change is below 1e-13.
pub fn pagerank(out: &[Vec<(u64, u64)>], inn: &[Vec<(u64, u64)>]) -> Vec<f64> {
    const D: f64 = 0.85;
    let n = out.len();
    let nf = n as f64;
    let mut r = vec![1.0 / nf; n];
    for _ in 0..10_000 {
        let sink: f64 = (0..n).filter(|&u| out[u].is_empty()).map(|u| r[u]).sum();
        let next: Vec<f64> = (0..n)
            .map(|v| {
                let s: f64 = inn[v].iter().map(|&(u, _)| r[u as usize] / out[u as usize].len() as f64).sum();
                (1.0 - D) / nf + D * (s + sink / nf)
            })
            .collect();
        let diff: f64 = next.iter().zip(&r).map(|(a, b)| (a - b).abs()).sum();
        r = next;
        if diff < 1e-13 {
            break;
        }
    }
    r
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Mixed insert/delete trace over `n` vertices. A few hub sources receive a
/// large share of inserts so every degree class is visited; the second half
/// leans toward deletes of live edges so hubs shrink back down.
pub fn mixed_trace<R: Rng>(rng: &mut R, n: u64, len: usize, directed: bool, weighted: bool) -> Vec<Op> {
    let hubs = 6u64;
    let mut model = Model::new(directed);
    let mut ops = Vec::with_capacity(len);
    for i in 0..len {
        let insert_p = if i < len / 2 { 0.7 } else { 0.3 };
        if rng.random_bool(insert_p) || model.is_empty() {
            let u = if rng.random_bool(0.4) {
                rng.random_range(0..hubs)
            } else {
                rng.random_range(0..n)
            };
            let mut v = rng.random_range(0..n);
            if v == u {
                v = (v + 1) % n;
            }
            let prop = weighted.then(|| rng.random_range(1..=100));
            model.insert(u, v, prop);
            ops.push(Op::Insert(u, v, prop));
        } else if rng.random_bool(0.9) {
            let (a, b) = model.pick(rng).unwrap();
            let (u, v) = if !directed && rng.random_bool(0.5) { (b, a) } else { (a, b) };
            model.delete(u, v);
            ops.push(Op::Delete(u, v));
        } else {
            let u = rng.random_range(0..n);
            let v = rng.random_range(0..n);
            model.delete(u, v);
            ops.push(Op::Delete(u, v));
        }
    }
    ops
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    Insert(u64, u64, Option<u64>),
    Delete(u64, u64),
}

impl Op {
    pub fn to_update(self) -> hybridgraph::graph::UpdateOp {
        use hybridgraph::graph::UpdateOp;
        match self {
            Op::Insert(src, dst, prop) => UpdateOp::Insert { src, dst, prop },
            Op::Delete(src, dst) => UpdateOp::Delete { src, dst },
        }
    }

    pub fn apply(self, m: &mut Model) -> bool {
        match self {
            Op::Insert(u, v, p) => m.insert(u, v, p),
            Op::Delete(u, v) => m.delete(u, v),
        }
    }
}
