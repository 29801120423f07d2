//! Seeded graph families used by the examples, the tests and `bench`.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::graph::CapGraph;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn complete(n: usize) -> CapGraph {
    let mut e = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            e.push((u, v, 1));
        }
    }
    CapGraph::from_edges(n, &e).expect("complete graph")
}

pub fn path(n: usize) -> CapGraph {
    let e: Vec<_> = (1..n).map(|v| (v - 1, v, 1)).collect();
    CapGraph::from_edges(n, &e).expect("path graph")
}

pub fn cycle(n: usize) -> CapGraph {
    let mut e: Vec<_> = (1..n).map(|v| (v - 1, v, 1)).collect();
    if n > 2 {
        e.push((n - 1, 0, 1));
    }
    CapGraph::from_edges(n, &e).expect("cycle graph")
}

/// Two copies of `K_k` joined by one unit edge between vertex `k-1` and vertex `k`.
pub fn barbell(k: usize) -> CapGraph {
    let mut e = Vec::new();
    for side in 0..2 {
        let off = side * k;
        for u in 0..k {
            for v in u + 1..k {
                e.push((off + u, off + v, 1));
            }
        }
    }
    e.push((k - 1, k, 1));
    CapGraph::from_edges(2 * k, &e).expect("barbell")
}

/// `K_big` with a `K_small` attached by one unit edge. The small side holds
/// vertices `big..big+small`.
pub fn pendant_clique(big: usize, small: usize) -> CapGraph {
    let mut e = Vec::new();
    for u in 0..big {
        for v in u + 1..big {
            e.push((u, v, 1));
        }
    }
    for u in 0..small {
        for v in u + 1..small {
            e.push((big + u, big + v, 1));
        }
    }
    e.push((0, big, 1));
    CapGraph::from_edges(big + small, &e).expect("pendant clique")
}

/// Two-block stochastic block model on `sizes`, forced connected by one
/// extra edge between the blocks if sampling produced none.
pub fn sbm(sizes: (usize, usize), p_in: f64, p_out: f64, seed: u64) -> CapGraph {
    let mut r = rng(seed);
    let n = sizes.0 + sizes.1;
    let side = |v: usize| v >= sizes.0;
    let mut e = Vec::new();
    let mut crossing = false;
    for u in 0..n {
        for v in u + 1..n {
            let p = if side(u) == side(v) { p_in } else { p_out };
            if r.random::<f64>() < p {
                crossing |= side(u) != side(v);
                e.push((u, v, 1));
            }
        }
    }
    if !crossing && sizes.0 > 0 && sizes.1 > 0 {
        e.push((0, sizes.0, 1));
    }
    let mut g = CapGraph::from_edges(n, &e).expect("sbm");
    // keep every block internally connected with a spanning path
    let (_, comps) = g.components();
    if comps > 1 {
        for v in 1..sizes.0 {
            e.push((v - 1, v, 1));
        }
        for v in sizes.0 + 1..n {
            e.push((v - 1, v, 1));
        }
        g = CapGraph::from_edges(n, &e).expect("sbm");
    }
    g
}

/// Random connected graph: a random spanning tree plus `extra` random edges,
/// capacities uniform in `1..=w`.
pub fn random_connected(n: usize, extra: usize, w: u64, seed: u64) -> CapGraph {
    let mut r = rng(seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut r);
    let mut e = Vec::new();
    for i in 1..n {
        let j = r.random_range(0..i);
        e.push((order[i], order[j], r.random_range(1..=w)));
    }
    if n >= 2 {
        for _ in 0..extra {
            let u = r.random_range(0..n);
            let v = r.random_range(0..n);
            if u != v {
                e.push((u, v, r.random_range(1..=w)));
            }
        }
    }
    // parallel edges merge, so clamp the merged capacities back into [1, w]
    let g = CapGraph::from_edges(n, &e).expect("random graph");
    let clamped: Vec<_> = g
        .edges()
        .iter()
        .map(|ed| (ed.u, ed.v, (ed.cap as u64).min(w)))
        .collect();
    CapGraph::from_edges(n, &clamped).expect("random graph")
}

/// Random zero-sum demand with entries roughly in `[-scale, scale]`.
pub fn random_demand(n: usize, scale: f64, r: &mut impl Rng) -> Vec<f64> {
    if n < 2 {
        return vec![0.0; n];
    }
    let mut b: Vec<f64> = (0..n).map(|_| r.random_range(-scale..=scale)).collect();
    let mean = b.iter().sum::<f64>() / n as f64;
    for x in &mut b {
        *x -= mean;
    }
    b
}

/// Random zero-sum demand on `cluster` with `|b(v)| ≤ w(v)`.
pub fn cluster_demand(n: usize, cluster: &[usize], w: &[f64], r: &mut impl Rng) -> Vec<f64> {
    let mut b = vec![0.0; n];
    for &v in cluster {
        b[v] = w[v] * r.random_range(-1.0..=1.0);
    }
    let pos: f64 = cluster.iter().map(|&v| b[v].max(0.0)).sum();
    let neg: f64 = cluster.iter().map(|&v| (-b[v]).max(0.0)).sum();
    if pos <= 0.0 || neg <= 0.0 {
        return vec![0.0; n];
    }
    let (sp, sn) = if pos > neg { (neg / pos, 1.0) } else { (1.0, pos / neg) };
    for &v in cluster {
        b[v] *= if b[v] > 0.0 { sp } else { sn };
    }
    b
}

pub fn two_vertex(cap: u64) -> Result<CapGraph> {
    CapGraph::from_edges(2, &[(0, 1, cap)])
}
