#![allow(dead_code)]

use expander_flow::paths::{add_path, Path};
use expander_flow::{generators, CapGraph, FlowAssignment};
use rand::Rng;

/// Random connected graph from a proptest seed.
pub fn graph(n: usize, extra: usize, w: u64, seed: u64) -> CapGraph {
    generators::random_connected(n, extra, w, seed)
}

/// Shortest path from `s` to `t` as a [`Path`] of the given weight.
pub fn bfs_path(g: &CapGraph, s: usize, t: usize, weight: f64) -> Path {
    let n = g.n();
    let mut prev = vec![None; n];
    let mut seen = vec![false; n];
    seen[s] = true;
    let mut queue = std::collections::VecDeque::from([s]);
    while let Some(v) = queue.pop_front() {
        for &(w, id) in g.neighbors(v) {
            if !seen[w] {
                seen[w] = true;
                prev[w] = Some((v, id));
                queue.push_back(w);
            }
        }
    }
    let mut vertices = vec![t];
    let mut edges = Vec::new();
    let mut v = t;
    while let Some((u, id)) = prev[v] {
        edges.push((id, g.edge(id).u == u));
        vertices.push(u);
        v = u;
    }
    vertices.reverse();
    edges.reverse();
    Path { vertices, edges, weight }
}

/// Sum of `k` random shortest-path flows.
pub fn random_flow(g: &CapGraph, k: usize, seed: u64) -> FlowAssignment {
    let mut r = generators::rng(seed);
    let mut f = FlowAssignment::zero(g.m());
    for _ in 0..k {
        let s = r.random_range(0..g.n());
        let t = r.random_range(0..g.n());
        if s != t {
            add_path(&mut f, &bfs_path(g, s, t, r.random_range(0.1..3.0)), 1.0);
        }
    }
    f
}

pub fn terminals_of(g: &CapGraph, f: &FlowAssignment) -> (Vec<f64>, Vec<f64>) {
    let ex = f.excess(g);
    (ex.iter().map(|x| x.max(0.0)).collect(), ex.iter().map(|x| (-x).max(0.0)).collect())
}

/// Random laminar family: recursive random splits of `0..n`, with each
/// piece kept with probability 1/2.
pub fn random_laminar(n: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut r = generators::rng(seed);
    let mut out = Vec::new();
    let mut stack = vec![(0..n).collect::<Vec<usize>>()];
    while let Some(set) = stack.pop() {
        if set.len() < 2 {
            continue;
        }
        let k = r.random_range(2..=3.min(set.len()));
        let mut parts = vec![Vec::new(); k];
        for (j, &v) in set.iter().enumerate() {
            let slot = if j < k { j } else { r.random_range(0..k) };
            parts[slot].push(v);
        }
        for p in parts {
            if p.len() < n && r.random_bool(0.5) {
                out.push(p.clone());
            }
            stack.push(p);
        }
    }
    out
}

/// `max_S |b(S)|/δS` over every proper nonempty subset (the exact
/// single-commodity optimum by max-flow min-cut).
pub fn brute_cut_ratio(g: &CapGraph, b: &[f64]) -> f64 {
    let n = g.n();
    let mut best: f64 = 0.0;
    for mask in 1..(1u32 << n) - 1 {
        let side: Vec<bool> = (0..n).map(|v| mask >> v & 1 == 1).collect();
        let cut = g.cut_capacity(&side);
        let bs: f64 = (0..n).filter(|&v| side[v]).map(|v| b[v]).sum();
        if cut > 0.0 {
            best = best.max(bs.abs() / cut);
        }
    }
    best
}
