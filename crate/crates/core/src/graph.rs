//! Undirected capacitated graphs, flows, cuts and vertex partitions.
//!
//! Capacities are validated as integers in `[1, W]` when a graph is built from
//! an edge list; derived graphs (scaled, augmented, residual) carry real
//! capacities. Flows are signed per-edge values, positive in the stored
//! `u -> v` direction. A flow *routes* demand `b` when the net outflow at
//! every vertex equals `b(v)`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance used by every feasibility comparison on reals.
pub const REL_TOL: f64 = 1e-9;

pub type VertexWeighting = Vec<f64>;
pub type DemandVector = Vec<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub cap: f64,
}

impl Edge {
    pub fn other(&self, x: usize) -> usize {
        if x == self.u {
            self.v
        } else {
            self.u
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CapGraph {
    n: usize,
    edges: Vec<Edge>,
    #[serde(skip)]
    adj: Vec<Vec<(usize, usize)>>,
    integral: bool,
}

impl CapGraph {
    /// Builds a graph with integer capacities, merging parallel edges.
    pub fn from_edges(n: usize, edges: &[(usize, usize, u64)]) -> Result<Self> {
        let mut merged: BTreeMap<(usize, usize), u64> = BTreeMap::new();
        for &(u, v, c) in edges {
            if u >= n || v >= n {
                return Err(Error::Structure(format!("edge ({u},{v}) outside 0..{n}")));
            }
            if u == v {
                return Err(Error::Input(format!("self-loop at {u}")));
            }
            if c == 0 {
                return Err(Error::Input(format!("edge ({u},{v}) has zero capacity")));
            }
            let key = (u.min(v), u.max(v));
            let slot = merged.entry(key).or_insert(0);
            *slot = slot
                .checked_add(c)
                .ok_or_else(|| Error::Input("capacity overflow".into()))?;
        }
        let list = merged
            .into_iter()
            .map(|((u, v), c)| Edge { u, v, cap: c as f64 })
            .collect();
        let mut g = Self::from_real(n, list)?;
        g.integral = true;
        Ok(g)
    }

    /// Builds a graph with arbitrary positive real capacities. Parallel edges are kept.
    pub fn from_real(n: usize, edges: Vec<Edge>) -> Result<Self> {
        for e in &edges {
            if e.u >= n || e.v >= n {
                return Err(Error::Structure(format!("edge ({},{}) outside 0..{n}", e.u, e.v)));
            }
            if e.u == e.v {
                return Err(Error::Input(format!("self-loop at {}", e.u)));
            }
            if !(e.cap.is_finite() && e.cap >= 0.0) {
                return Err(Error::Input(format!("bad capacity {} on ({},{})", e.cap, e.u, e.v)));
            }
        }
        let mut g = CapGraph { n, edges, adj: Vec::new(), integral: false };
        g.rebuild_adjacency();
        Ok(g)
    }

    fn rebuild_adjacency(&mut self) {
        let mut adj = vec![Vec::new(); self.n];
        for (id, e) in self.edges.iter().enumerate() {
            adj[e.u].push((e.v, id));
            adj[e.v].push((e.u, id));
        }
        self.adj = adj;
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, id: usize) -> &Edge {
        &self.edges[id]
    }

    pub fn cap(&self, id: usize) -> f64 {
        self.edges[id].cap
    }

    /// `(neighbor, edge id)` pairs incident to `v`.
    pub fn neighbors(&self, v: usize) -> &[(usize, usize)] {
        &self.adj[v]
    }

    pub fn is_integral(&self) -> bool {
        self.integral
    }

    /// Maximum capacity W (1 for an edgeless graph).
    pub fn max_cap(&self) -> f64 {
        self.edges.iter().map(|e| e.cap).fold(1.0, f64::max)
    }

    pub fn min_cap(&self) -> f64 {
        self.edges.iter().map(|e| e.cap).fold(f64::INFINITY, f64::min)
    }

    pub fn total_cap(&self) -> f64 {
        self.edges.iter().map(|e| e.cap).sum()
    }

    /// Weighted degrees `deg_G`.
    pub fn degrees(&self) -> VertexWeighting {
        let mut d = vec![0.0; self.n];
        for e in &self.edges {
            d[e.u] += e.cap;
            d[e.v] += e.cap;
        }
        d
    }

    /// `log2(n W)` clamped below at 1, the recurring parameter scale.
    pub fn log_nw(&self) -> f64 {
        ((self.n.max(2) as f64) * self.max_cap()).log2().max(1.0)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = vec![0usize; self.m()];
        for v in 0..self.n {
            for &(w, id) in &self.adj[v] {
                let e = self.edges.get(id).ok_or_else(|| Error::Structure(format!("edge id {id}")))?;
                if !((e.u == v && e.v == w) || (e.v == v && e.u == w)) {
                    return Err(Error::Structure(format!("adjacency of {v} disagrees with edge {id}")));
                }
                seen[id] += 1;
            }
        }
        if seen.iter().any(|&c| c != 2) {
            return Err(Error::Structure("adjacency index incomplete".into()));
        }
        if self.integral {
            let w = self.max_cap();
            for e in &self.edges {
                if e.cap < 1.0 || e.cap > w || e.cap.fract() != 0.0 {
                    return Err(Error::Structure(format!("capacity {} not an integer in [1,W]", e.cap)));
                }
            }
        }
        Ok(())
    }

    /// Copy with every capacity multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<CapGraph> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(Error::Input(format!("scale factor {factor} must be positive")));
        }
        let edges: Vec<Edge> = self.edges.iter().map(|e| Edge { cap: e.cap * factor, ..*e }).collect();
        if edges.iter().any(|e| !e.cap.is_finite()) {
            return Err(Error::Input("scaled capacity overflow".into()));
        }
        let mut g = CapGraph::from_real(self.n, edges)?;
        g.integral = self.integral && factor.fract() == 0.0;
        Ok(g)
    }

    /// Capacity of edges with exactly one endpoint in `mask`.
    pub fn cut_capacity(&self, mask: &[bool]) -> f64 {
        self.edges.iter().filter(|e| mask[e.u] != mask[e.v]).fold(0.0, |acc, e| acc + e.cap)
    }

    pub fn set_mask(&self, set: &[usize]) -> Vec<bool> {
        let mut mask = vec![false; self.n];
        for &v in set {
            mask[v] = true;
        }
        mask
    }

    /// Connected components as a block-of map plus the component count.
    pub fn components(&self) -> (Vec<usize>, usize) {
        let mut comp = vec![usize::MAX; self.n];
        let mut count = 0;
        let mut stack = Vec::new();
        for s in 0..self.n {
            if comp[s] != usize::MAX {
                continue;
            }
            comp[s] = count;
            stack.push(s);
            while let Some(v) = stack.pop() {
                for &(w, _) in &self.adj[v] {
                    if comp[w] == usize::MAX {
                        comp[w] = count;
                        stack.push(w);
                    }
                }
            }
            count += 1;
        }
        (comp, count)
    }
}

/// Signed flow, one value per undirected edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowAssignment {
    pub f: Vec<f64>,
}

impl FlowAssignment {
    pub fn zero(m: usize) -> Self {
        FlowAssignment { f: vec![0.0; m] }
    }

    pub fn congestion(&self, g: &CapGraph) -> f64 {
        self.f
            .iter()
            .zip(g.edges())
            .map(|(x, e)| if x.abs() == 0.0 { 0.0 } else { x.abs() / e.cap })
            .fold(0.0, f64::max)
    }

    /// Net outflow at every vertex (the demand this flow routes).
    pub fn excess(&self, g: &CapGraph) -> DemandVector {
        let mut out = vec![0.0; g.n()];
        for (x, e) in self.f.iter().zip(g.edges()) {
            out[e.u] += x;
            out[e.v] -= x;
        }
        out
    }

    pub fn add_scaled(&mut self, other: &FlowAssignment, s: f64) {
        for (a, b) in self.f.iter_mut().zip(&other.f) {
            *a += s * b;
        }
    }

    pub fn scale(&mut self, s: f64) {
        for a in &mut self.f {
            *a *= s;
        }
    }

    pub fn is_zero(&self) -> bool {
        self.f.iter().all(|x| *x == 0.0)
    }

    pub fn l1(&self) -> f64 {
        self.f.iter().map(|x| x.abs()).sum()
    }
}

/// Congestion of several commodities sharing the edges.
pub fn total_congestion(g: &CapGraph, flows: &[FlowAssignment]) -> f64 {
    let mut load = vec![0.0; g.m()];
    for fl in flows {
        for (l, x) in load.iter_mut().zip(&fl.f) {
            *l += x.abs();
        }
    }
    load.iter().zip(g.edges()).map(|(l, e)| l / e.cap).fold(0.0, f64::max)
}

/// Signed excess at `v`: inflow minus outflow, so a unit flow on `(0,1)` is `+1` at 1.
pub fn net_flow(g: &CapGraph, f: &FlowAssignment, v: usize) -> f64 {
    g.neighbors(v)
        .iter()
        .map(|&(_, id)| if g.edge(id).u == v { -f.f[id] } else { f.f[id] })
        .sum()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VertexPartition {
    pub blocks: Vec<Vec<usize>>,
    /// `usize::MAX` for vertices outside the ground set.
    pub block_of: Vec<usize>,
}

impl VertexPartition {
    pub fn new(n: usize, blocks: Vec<Vec<usize>>) -> Result<Self> {
        let mut block_of = vec![usize::MAX; n];
        for (i, b) in blocks.iter().enumerate() {
            if b.is_empty() {
                return Err(Error::Structure(format!("block {i} is empty")));
            }
            for &v in b {
                if v >= n {
                    return Err(Error::Structure(format!("vertex {v} outside 0..{n}")));
                }
                if block_of[v] != usize::MAX {
                    return Err(Error::Structure(format!("vertex {v} in two blocks")));
                }
                block_of[v] = i;
            }
        }
        Ok(VertexPartition { blocks, block_of })
    }

    pub fn singletons(n: usize) -> Self {
        VertexPartition { blocks: (0..n).map(|v| vec![v]).collect(), block_of: (0..n).collect() }
    }

    pub fn whole(n: usize) -> Self {
        if n == 0 {
            return VertexPartition { blocks: vec![], block_of: vec![] };
        }
        VertexPartition { blocks: vec![(0..n).collect()], block_of: vec![0; n] }
    }

    pub fn from_labels(labels: &[usize]) -> Self {
        let mut remap: BTreeMap<usize, usize> = BTreeMap::new();
        let mut blocks: Vec<Vec<usize>> = Vec::new();
        let mut block_of = vec![usize::MAX; labels.len()];
        for (v, &l) in labels.iter().enumerate() {
            if l == usize::MAX {
                continue;
            }
            let next = blocks.len();
            let b = *remap.entry(l).or_insert(next);
            if b == blocks.len() {
                blocks.push(Vec::new());
            }
            blocks[b].push(v);
            block_of[v] = b;
        }
        VertexPartition { blocks, block_of }
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn covers(&self, v: usize) -> bool {
        self.block_of.get(v).is_some_and(|&b| b != usize::MAX)
    }
}

/// Intercluster edges of `p` and their capacity. With `single_cut`, edges
/// leaving the ground set are included as well.
pub fn boundary(g: &CapGraph, p: &VertexPartition, single_cut: bool) -> Result<(Vec<usize>, f64)> {
    if p.block_of.len() != g.n() {
        return Err(Error::Structure(format!(
            "partition over {} vertices, graph has {}",
            p.block_of.len(),
            g.n()
        )));
    }
    let mut ids = Vec::new();
    let mut total = 0.0;
    for (id, e) in g.edges().iter().enumerate() {
        let (a, b) = (p.block_of[e.u], p.block_of[e.v]);
        let inside = a != usize::MAX && b != usize::MAX;
        let crossing = if inside { a != b } else { single_cut && (a != usize::MAX || b != usize::MAX) };
        if crossing {
            ids.push(id);
            total += e.cap;
        }
    }
    Ok((ids, total))
}

/// `deg_{∂P}(v)` for every vertex: capacity of incident edges joining different blocks.
pub fn boundary_degrees(g: &CapGraph, block_of: &[usize]) -> VertexWeighting {
    let mut d = vec![0.0; g.n()];
    for e in g.edges() {
        if block_of[e.u] != block_of[e.v] {
            d[e.u] += e.cap;
            d[e.v] += e.cap;
        }
    }
    d
}

/// Capacity of the edges in `h` incident to `v`.
pub fn induced_degree(g: &CapGraph, h: &[usize], v: usize) -> f64 {
    h.iter().map(|&id| g.edge(id)).filter(|e| e.u == v || e.v == v).map(|e| e.cap).sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Conductance {
    pub value: f64,
    pub degenerate: bool,
}

pub fn conductance(g: &CapGraph, d: &[f64], set: &[usize]) -> Result<Conductance> {
    let mask = g.set_mask(set);
    let k = mask.iter().filter(|&&b| b).count();
    if k == 0 || k == g.n() {
        return Err(Error::Input("conductance needs a nonempty proper subset".into()));
    }
    let inside: f64 = set.iter().map(|&v| d[v]).sum();
    let total: f64 = d.iter().sum();
    let denom = inside.min(total - inside);
    let cut = g.cut_capacity(&mask);
    if denom <= 0.0 {
        return Ok(Conductance { value: f64::INFINITY, degenerate: true });
    }
    Ok(Conductance { value: cut / denom, degenerate: false })
}

pub fn weight_of(d: &[f64], set: &[usize]) -> f64 {
    set.iter().map(|&v| d[v]).sum()
}
