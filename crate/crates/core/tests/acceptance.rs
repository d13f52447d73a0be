//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on failure.

mod common;

use std::collections::HashSet;
use std::panic;
use std::ptr::NonNull;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hybridgraph::analytics::{Algorithm, UNREACHABLE};
use hybridgraph::baseline::{AdListChunked, AdListShared};
use hybridgraph::bench::{
    gen_synthetic, geomean, max_batch_degree, run_experiment, run_experiment_observed, run_th1_sweep, shuffle,
    EdgeList, ExperimentReport, Format, RunSpec, SyntheticKind, SWEEP_TH1,
};
use hybridgraph::cfhash::{hash_probe, CfhTable, InsertOutcome, LineHasher};
use hybridgraph::config::Config;
use hybridgraph::graph::{edge_snapshot, DeleteOutcome, DynamicGraph};
use hybridgraph::mempool::MemoryPool;
use hybridgraph::store::{HybridStore, VertexKind};

use common::{Model, Op};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn permutation() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let keys: Vec<u64> = (0..1000).map(|_| rng.random_range(0..u64::MAX - 1)).collect();
    let log_n = 3;
    let mut violations = 0u64;
    let mut checked = 0u64;
    for log_m in 1..=10u32 {
        let slots = 1usize << (log_m + log_n);
        for &k in &keys {
            let mut seen = vec![false; slots];
            for i in 0..slots as u64 {
                let s = hash_probe(k, i, log_m, log_n, LineHasher::default());
                if s >= slots || std::mem::replace(&mut seen[s], true) {
                    violations += 1;
                }
            }
            checked += 1;
        }
    }
    verdict(
        violations == 0,
        format!("{violations} violations over {checked} (M, key) sequences, M = 2..1024, N = 8"),
    )
}

fn probing_distance() -> Verdict {
    let pool = MemoryPool::new(4 << 20);
    let slots = 1usize << 21;
    let mut t = CfhTable::with_capacity(&pool, slots, 64, LineHasher::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut keys = HashSet::new();
    let mut max_load = 0.0f64;
    while keys.len() < 1_000_000 {
        let k = rng.random_range(0..u64::MAX - 1);
        if keys.insert(k) {
            assert_eq!(t.insert(k, 0).unwrap(), InsertOutcome::Inserted);
            max_load = max_load.max(t.load_factor());
        }
    }
    let hist = t.probe_stats().inserts.clone();
    let le8 = hist.fraction_at_most(8);

    let mut total = 0u64;
    let mut misses = 0u64;
    while misses < 100_000 {
        let k = rng.random_range(0..u64::MAX - 1);
        if !keys.contains(&k) {
            total += t.probe_length(k) as u64;
            misses += 1;
        }
    }
    let unsuccessful = total as f64 / misses as f64;
    verdict(
        max_load <= 0.5 && hist.count() == 1_000_000 && le8 >= 0.98 && unsuccessful <= 2.2,
        format!(
            "{} inserts, max load {max_load:.3}, {:.2}% at distance <= 8, mean unsuccessful probes at final load {unsuccessful:.3} (bound 2.2), mean insert probes over the fill {:.3}",
            hist.count(),
            100.0 * le8,
            hist.mean()
        ),
    )
}

fn differential() -> Verdict {
    const N: u64 = 1000;
    let mut failures = Vec::new();
    let mut kinds = HashSet::new();
    let mut downgrades = 0;
    for seed in 0..10u64 {
        let weighted = seed % 2 == 1;
        let directed = seed % 4 >= 2;
        let cfg = Config::new(weighted, directed);
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let trace = common::mixed_trace(&mut rng, N, 100_000, directed, weighted);
        let mut tango = HybridStore::new(cfg.clone(), N as usize, 4).unwrap();
        let mut others: Vec<Box<dyn DynamicGraph>> = vec![
            Box::new(AdListShared::new(&cfg, N as usize)),
            Box::new(AdListChunked::new(&cfg, N as usize, 4).unwrap()),
        ];
        let mut model = Model::new(directed);
        let mut fail = None;
        for (i, &op) in trace.iter().enumerate() {
            let fresh = op.apply(&mut model);
            let (u, v) = match op {
                Op::Insert(u, v, p) => {
                    let expect = if fresh { InsertOutcome::Inserted } else { InsertOutcome::Updated };
                    let got = tango.insert_edge(u, v, p).unwrap();
                    let rest: Vec<_> = others.iter_mut().map(|g| g.insert_edge(u, v, p).unwrap()).collect();
                    if got != expect || rest.iter().any(|&r| r != expect) {
                        fail.get_or_insert(format!("seed {seed} op {i}: insert outcome differs"));
                    }
                    (u, v)
                }
                Op::Delete(u, v) => {
                    let expect = if fresh { DeleteOutcome::Removed } else { DeleteOutcome::Absent };
                    let got = tango.delete_edge(u, v).unwrap();
                    let rest: Vec<_> = others.iter_mut().map(|g| g.delete_edge(u, v).unwrap()).collect();
                    if got != expect || rest.iter().any(|&r| r != expect) {
                        fail.get_or_insert(format!("seed {seed} op {i}: delete outcome differs"));
                    }
                    (u, v)
                }
            };
            for w in [u, v] {
                if let Err(e) = tango.validate_vertex(w) {
                    fail.get_or_insert(format!("seed {seed} op {i}: {e}"));
                }
                kinds.insert(tango.vertex_kind(w));
            }
            if fail.is_some() {
                break;
            }
        }
        if fail.is_none() {
            let want = model.snapshot();
            if edge_snapshot(&tango) != want {
                fail = Some(format!("seed {seed}: tango edge set differs"));
            }
            for g in &others {
                if edge_snapshot(g.as_ref()) != want {
                    fail.get_or_insert(format!("seed {seed}: {} edge set differs", g.format_name()));
                }
            }
            if let Err(e) = tango.validate_all() {
                fail.get_or_insert(format!("seed {seed}: {e}"));
            }
        }
        downgrades += tango.resize_counters().downgrades;
        failures.extend(fail);
    }
    let all_kinds = [VertexKind::Inline, VertexKind::Array, VertexKind::Hashed]
        .iter()
        .all(|k| kinds.contains(k));
    verdict(
        failures.is_empty() && all_kinds && downgrades > 0,
        if failures.is_empty() {
            format!("10 traces x 100000 ops, 3 formats equal the model; kinds seen {kinds:?}, {downgrades} downgrades")
        } else {
            failures.join("; ")
        },
    )
}

/// Expected analytics after each batch of the insert-then-delete replay.
struct Expected {
    bfs: Vec<u64>,
    sssp: Vec<u64>,
    cc: Vec<u64>,
    pr: Vec<f64>,
}

fn expected_per_batch(list: &EdgeList, batch: usize) -> Vec<Expected> {
    let n = list.num_vertices;
    let source = list.edges[0].src;
    let mut model = Model::new(list.directed);
    let mut out = Vec::new();
    for delete in [false, true] {
        for chunk in list.edges.chunks(batch) {
            for e in chunk {
                if delete {
                    model.delete(e.src, e.dst);
                } else {
                    model.insert(e.src, e.dst, e.weight);
                }
            }
            let adj = model.out_adj(n);
            let inn = model.in_adj(n);
            out.push(Expected {
                bfs: common::bfs(&adj, source),
                sssp: common::dijkstra(&adj, source),
                cc: common::components(n, &model),
                pr: common::pagerank(&adj, &inn),
            });
        }
    }
    out
}

fn analytics_oracle() -> Verdict {
    let batch = 5000;
    let mut problems = Vec::new();
    let mut checked = 0;
    let mut worst_pr = 0.0f64;
    for (kind, directed) in [(SyntheticKind::ShortTailed, false), (SyntheticKind::HeavyTailed, true)] {
        let mut list = gen_synthetic(kind, 10_000, 100_000, 7).unwrap();
        list.directed = directed;
        let list = shuffle(list.with_weights(), 7);
        let expected = expected_per_batch(&list, batch);
        assert_eq!(expected.len(), 40);
        assert_eq!(UNREACHABLE, common::INF);
        for format in Format::ALL {
            let spec = RunSpec {
                format,
                algorithms: Algorithm::ALL.to_vec(),
                batch_size: batch,
                threads: 4,
            };
            run_experiment_observed(&Config::default(), &list, &spec, |b, st, _| {
                let e = &expected[b.batch];
                let tag = format!("{} {:?} batch {}", format.name(), kind, b.batch);
                if st.bfs.values() != e.bfs {
                    problems.push(format!("{tag}: bfs"));
                }
                if st.sssp.values() != e.sssp {
                    problems.push(format!("{tag}: sssp"));
                }
                if st.cc.values() != e.cc {
                    problems.push(format!("{tag}: cc"));
                }
                let d = common::max_abs_diff(st.pr.ranks(), &e.pr);
                worst_pr = worst_pr.max(d);
                if d > 1e-4 {
                    problems.push(format!("{tag}: pr off by {d:e}"));
                }
                checked += 1;
            })
            .unwrap();
        }
    }
    verdict(
        problems.is_empty() && checked == 2 * 3 * 40,
        if problems.is_empty() {
            format!("{checked} batch snapshots match; worst PageRank max-norm error {worst_pr:.2e}")
        } else {
            problems.into_iter().take(5).collect::<Vec<_>>().join("; ")
        },
    )
}

fn amortized_growth() -> Verdict {
    let n = 100_000u64;
    let mut s = HybridStore::new(Config::new(false, true), n as usize + 1, 1).unwrap();
    for j in 1..=n {
        s.insert_edge(0, j, None).unwrap();
    }
    let c = s.resize_counters();
    verdict(
        s.degree(0) == n as usize && c.edges_copied <= 4 * n,
        format!(
            "{} edges copied for {n} inserts (bound {}), {} rehashed, {} grows",
            c.edges_copied,
            4 * n,
            c.rehashed,
            c.grows
        ),
    )
}

fn pool_behavior() -> Verdict {
    let pool = MemoryPool::new(4 << 20);
    let c = pool.allocate(32).unwrap();
    unsafe { pool.deallocate(c, 32) };
    let again = pool.allocate(32).unwrap();
    let other = pool.allocate(64).unwrap();
    let lifo = again == c && other != c;

    let pool = MemoryPool::with_shadow(1 << 16);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut live: Vec<(NonNull<u8>, usize, u8)> = Vec::new();
    let mut bad_sizes = 0u64;
    let mut corrupted = 0u64;
    let (mut allocs, mut frees) = (0u64, 0u64);
    while allocs < 100_000 || !live.is_empty() {
        if allocs < 100_000 && (live.is_empty() || rng.random_bool(0.55)) {
            let sz = 1usize << rng.random_range(0..13u32);
            let sz = rng.random_range(sz / 2 + 1..=sz);
            let want = sz.max(8).next_power_of_two();
            let before = pool.stats().bytes_in_use;
            let p = pool.allocate(sz).unwrap();
            if pool.stats().bytes_in_use - before != want || hybridgraph::mempool::chunk_bytes(sz) != want {
                bad_sizes += 1;
            }
            let tag = rng.random::<u8>();
            unsafe { std::ptr::write_bytes(p.as_ptr(), tag, want) };
            live.push((p, sz, tag));
            allocs += 1;
        } else {
            let (p, sz, tag) = live.swap_remove(rng.random_range(0..live.len()));
            let want = sz.max(8).next_power_of_two();
            let bytes = unsafe { std::slice::from_raw_parts(p.as_ptr(), want) };
            if bytes.iter().any(|&b| b != tag) {
                corrupted += 1;
            }
            unsafe { pool.deallocate(p, sz) };
            frees += 1;
        }
    }
    let r = pool.shadow_report().unwrap();
    verdict(
        lifo && r.is_clean() && r.overlaps == 0 && r.double_frees == 0 && bad_sizes == 0 && corrupted == 0,
        format!(
            "LIFO reuse {lifo}; {allocs} allocs / {frees} frees, {} overlaps, {} double frees, {bad_sizes} bad sizes, {corrupted} corrupted chunks",
            r.overlaps, r.double_frees
        ),
    )
}

const BIG_V: usize = 100_000;
const BIG_E: usize = 1_000_000;
const BIG_BATCH: usize = 100_000;

fn big_list(kind: SyntheticKind) -> EdgeList {
    shuffle(gen_synthetic(kind, BIG_V, BIG_E, 1).unwrap(), 1)
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    xs[xs.len() / 2]
}

/// Median over three runs of (update eps, analytics eps, report of the median
/// update run) for every format.
fn measure(list: &EdgeList) -> Vec<(Format, f64, f64, ExperimentReport)> {
    Format::ALL
        .iter()
        .map(|&format| {
            let spec = RunSpec {
                format,
                algorithms: Algorithm::ALL.to_vec(),
                batch_size: BIG_BATCH,
                threads: 4,
            };
            let mut runs: Vec<ExperimentReport> =
                (0..3).map(|_| run_experiment(&Config::default(), list, &spec).unwrap()).collect();
            let update = |r: &ExperimentReport| geomean(r.batches.iter().map(|b| b.update_eps()));
            let analytics = median(runs.iter().map(|r| r.summary.analytics_geomean_eps).collect());
            runs.sort_by(|a, b| update(a).total_cmp(&update(b)));
            let mid = runs.swap_remove(1);
            (format, update(&mid), analytics, mid)
        })
        .collect()
}

struct Measured {
    heavy: Vec<(Format, f64, f64, ExperimentReport)>,
    short: Vec<(Format, f64, f64, ExperimentReport)>,
    heavy_batch_degree: usize,
}

fn ratio_line(rows: &[(Format, f64, f64, ExperimentReport)]) -> (f64, f64, f64, String) {
    let get = |f: Format| rows.iter().find(|r| r.0 == f).unwrap();
    let t = get(Format::Tango);
    let s = get(Format::AdListShared);
    let c = get(Format::AdListChunked);
    let upd_s = t.1 / s.1;
    let upd_c = t.1 / c.1;
    let ana = t.2 / s.2.max(c.2);
    let text = format!(
        "update eps tango {:.3e} shared {:.3e} chunked {:.3e} (x{upd_s:.2}, x{upd_c:.2}); analytics x{ana:.2} of best baseline",
        t.1, s.1, c.1
    );
    (upd_s, upd_c, ana, text)
}

fn throughput(m: &Measured) -> Verdict {
    let (hs, hc, ha, htext) = ratio_line(&m.heavy);
    let (ss, sc, sa, stext) = ratio_line(&m.short);
    verdict(
        m.heavy_batch_degree >= 5000 && hs >= 1.5 && hc >= 1.5 && ss >= 1.0 && sc >= 1.0 && ha >= 0.9 && sa >= 0.9,
        format!(
            "heavy (max batch degree {}): {htext}; short: {stext}; 4 threads on {} cpu(s), median of 3",
            m.heavy_batch_degree,
            std::thread::available_parallelism().map_or(1, |n| n.get())
        ),
    )
}

fn memory_ratio(m: &Measured) -> Verdict {
    let bpe = |f: Format| m.short.iter().find(|r| r.0 == f).unwrap().3.summary.mean_bytes_per_edge;
    let ratio = bpe(Format::Tango) / bpe(Format::AdListShared);
    verdict(
        ratio <= 5.0,
        format!(
            "bytes per edge tango {:.2}, adlist-shared {:.2}, ratio {ratio:.2}",
            bpe(Format::Tango),
            bpe(Format::AdListShared)
        ),
    )
}

fn th1_sweep(short: &EdgeList) -> Verdict {
    let spec = RunSpec {
        format: Format::Tango,
        algorithms: Vec::new(),
        batch_size: BIG_BATCH,
        threads: 4,
    };
    let points = run_th1_sweep(&Config::default(), short, &spec, &SWEEP_TH1).unwrap();
    let peaks: Vec<u64> = points.iter().map(|p| p.summary.peak_memory_bytes).collect();
    let monotone = peaks.windows(2).all(|w| w[1] <= w[0]);
    let reduction = peaks[0] as f64 / *peaks.last().unwrap() as f64;
    let listing: Vec<String> = points
        .iter()
        .map(|p| format!("{}:{}", p.th1, p.summary.peak_memory_bytes))
        .collect();
    verdict(
        monotone && reduction >= 1.3,
        format!("peak bytes by TH1 {}; reduction x{reduction:.2}", listing.join(" ")),
    )
}

fn main() {
    let mut failed = 0;
    let mut report = |id: u32, name: &str, run: &mut dyn FnMut() -> Verdict| {
        let start = Instant::now();
        let v = panic::catch_unwind(panic::AssertUnwindSafe(&mut *run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            verdict(false, format!("panicked: {msg}"))
        });
        if !v.pass {
            failed += 1;
        }
        println!(
            "criterion {id} {name}: {} ({}; {:.1}s)",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail,
            start.elapsed().as_secs_f64()
        );
    };

    report(1, "probe permutation", &mut permutation);
    report(2, "probing distance", &mut probing_distance);
    report(3, "differential correctness", &mut differential);
    report(4, "analytics oracle", &mut analytics_oracle);
    report(5, "amortized growth", &mut amortized_growth);
    report(6, "pool behavior", &mut pool_behavior);

    let heavy = big_list(SyntheticKind::HeavyTailed);
    let short = big_list(SyntheticKind::ShortTailed);
    let measured = panic::catch_unwind(|| Measured {
        heavy_batch_degree: max_batch_degree(&heavy, BIG_BATCH),
        heavy: measure(&heavy),
        short: measure(&short),
    });
    match &measured {
        Ok(m) => {
            report(7, "throughput direction", &mut || throughput(m));
            report(8, "memory ratio", &mut || memory_ratio(m));
        }
        Err(_) => {
            report(7, "throughput direction", &mut || verdict(false, "benchmark run panicked".into()));
            report(8, "memory ratio", &mut || verdict(false, "benchmark run panicked".into()));
        }
    }
    report(9, "TH1 sweep", &mut || th1_sweep(&short));

    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
    println!("all criteria passed");
}
