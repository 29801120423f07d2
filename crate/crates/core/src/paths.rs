//! Weighted path decompositions of edge flows, plus the rescale and
//! truncate operations the routing code composes.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{CapGraph, FlowAssignment};

/// A walk along graph edges. `edges[i]` joins `vertices[i]` and
/// `vertices[i + 1]`; the flag is true when the walk follows the stored
/// `u -> v` orientation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Path {
    pub vertices: Vec<usize>,
    pub edges: Vec<(usize, bool)>,
    pub weight: f64,
}

impl Path {
    pub fn start(&self) -> usize {
        self.vertices[0]
    }

    pub fn end(&self) -> usize {
        *self.vertices.last().expect("path has a vertex")
    }

    pub fn trivial(v: usize, weight: f64) -> Self {
        Path { vertices: vec![v], edges: Vec::new(), weight }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PathDecomposition {
    pub paths: Vec<Path>,
    /// Edge count of the origin graph.
    pub m: usize,
}

impl PathDecomposition {
    pub fn assemble(&self) -> FlowAssignment {
        let mut f = FlowAssignment::zero(self.m);
        for p in &self.paths {
            add_path(&mut f, p, p.weight);
        }
        f
    }

    /// Total weight leaving each vertex as a path start.
    pub fn out_weight(&self, n: usize) -> Vec<f64> {
        let mut w = vec![0.0; n];
        for p in &self.paths {
            w[p.start()] += p.weight;
        }
        w
    }

    /// Total weight arriving at each vertex as a path end.
    pub fn in_weight(&self, n: usize) -> Vec<f64> {
        let mut w = vec![0.0; n];
        for p in &self.paths {
            w[p.end()] += p.weight;
        }
        w
    }
}

/// Adds `w` units along `p`.
pub fn add_path(f: &mut FlowAssignment, p: &Path, w: f64) {
    for &(id, fwd) in &p.edges {
        f.f[id] += if fwd { w } else { -w };
    }
}

fn tol_for(g: &CapGraph, f: &FlowAssignment, extra: &[&[f64]]) -> f64 {
    let mut s = f.f.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    for v in extra {
        s = v.iter().fold(s, |a, x| a.max(x.abs()));
    }
    let _ = g;
    1e-9 * s.max(1e-300)
}

/// Decomposes `f` into paths from excess vertices to deficit vertices.
///
/// Cycles are cancelled first by a depth-first walk that always takes the
/// lowest-indexed outgoing arc, so the result is a deterministic function of
/// the input. A vertex whose net outflow is not covered by `sources`
/// (positive part) or `sinks` (negative part) is a decomposition error.
pub fn path_decompose(
    g: &CapGraph,
    flow: &FlowAssignment,
    sources: &[f64],
    sinks: &[f64],
) -> Result<PathDecomposition> {
    let n = g.n();
    if flow.f.len() != g.m() || sources.len() != n || sinks.len() != n {
        return Err(Error::Structure("flow or terminal vectors do not match the graph".into()));
    }
    let tol = tol_for(g, flow, &[sources, sinks]);
    let mut f = flow.clone();
    for x in &mut f.f {
        if x.abs() <= tol {
            *x = 0.0;
        }
    }

    let excess = f.excess(g);
    for v in 0..n {
        let ex = excess[v];
        if ex > sources[v] + tol * 10.0 || -ex > sinks[v] + tol * 10.0 {
            return Err(Error::Decomposition(format!(
                "vertex {v}: net outflow {ex} outside [-{}, {}]",
                sinks[v], sources[v]
            )));
        }
    }

    cancel_cycles(g, &mut f, tol);

    let mut ex = f.excess(g);
    let mut paths = Vec::new();
    let out_arcs = |f: &FlowAssignment, v: usize| -> Option<(usize, usize, bool)> {
        g.neighbors(v).iter().find_map(|&(w, id)| {
            let e = g.edge(id);
            let fwd = e.u == v;
            let x = if fwd { f.f[id] } else { -f.f[id] };
            (x > 0.0).then_some((w, id, fwd))
        })
    };
    for s in 0..n {
        while ex[s] > tol {
            let mut verts = vec![s];
            let mut edges = Vec::new();
            let mut v = s;
            let mut bottleneck = ex[s];
            while !(ex[v] < -tol && v != s) {
                let Some((w, id, fwd)) = out_arcs(&f, v) else {
                    if ex[s] <= tol * 1e3 {
                        // rounding residue, not a real excess
                        break;
                    }
                    return Err(Error::Decomposition(format!(
                        "walk from {s} stuck at {v} with excess {}",
                        ex[v]
                    )));
                };
                bottleneck = bottleneck.min(f.f[id].abs());
                edges.push((id, fwd));
                verts.push(w);
                v = w;
                if verts.len() > n + 1 {
                    return Err(Error::Decomposition("flow not acyclic after cancellation".into()));
                }
            }
            if !(ex[v] < -tol && v != s) {
                ex[s] = 0.0;
                continue;
            }
            bottleneck = bottleneck.min(-ex[v]);
            let p = Path { vertices: verts, edges, weight: bottleneck };
            add_path(&mut f, &p, -bottleneck);
            for &(id, _) in &p.edges {
                if f.f[id].abs() <= tol {
                    f.f[id] = 0.0;
                }
            }
            ex[s] -= bottleneck;
            ex[v] += bottleneck;
            paths.push(p);
        }
    }
    if f.f.iter().any(|x| x.abs() > tol * 100.0) {
        return Err(Error::Decomposition("flow left after peeling paths".into()));
    }
    Ok(PathDecomposition { paths, m: g.m() })
}

/// Removes every directed cycle from `f` in place.
fn cancel_cycles(g: &CapGraph, f: &mut FlowAssignment, tol: f64) {
    let n = g.n();
    let mut dead = vec![false; n];
    let mut on_stack = vec![usize::MAX; n];
    for root in 0..n {
        if dead[root] {
            continue;
        }
        // stack of (vertex, arc taken to reach the next stack entry)
        let mut stack: Vec<usize> = vec![root];
        let mut arcs: Vec<(usize, bool)> = Vec::new();
        on_stack[root] = 0;
        while let Some(&v) = stack.last() {
            let next = g.neighbors(v).iter().find_map(|&(w, id)| {
                if dead[w] {
                    return None;
                }
                let fwd = g.edge(id).u == v;
                let x = if fwd { f.f[id] } else { -f.f[id] };
                (x > 0.0).then_some((w, id, fwd))
            });
            match next {
                None => {
                    dead[v] = true;
                    on_stack[v] = usize::MAX;
                    stack.pop();
                    arcs.pop();
                }
                Some((w, id, fwd)) => {
                    if on_stack[w] != usize::MAX {
                        let pos = on_stack[w];
                        let mut cyc: Vec<(usize, bool)> = arcs[pos..].to_vec();
                        cyc.push((id, fwd));
                        let amt = cyc.iter().map(|&(e, _)| f.f[e].abs()).fold(f64::INFINITY, f64::min);
                        for &(e, d) in &cyc {
                            f.f[e] += if d { -amt } else { amt };
                            if f.f[e].abs() <= tol {
                                f.f[e] = 0.0;
                            }
                        }
                        // unwind to w and continue from there
                        while stack.len() > pos + 1 {
                            let x = stack.pop().expect("stack entry");
                            on_stack[x] = usize::MAX;
                            arcs.pop();
                        }
                    } else {
                        on_stack[w] = stack.len();
                        stack.push(w);
                        arcs.push((id, fwd));
                    }
                }
            }
        }
    }
}

/// Rescales paths by their start vertex. Starts missing from `scales` keep
/// weight 1; a key that starts no path is a structural error.
pub fn rescale_paths(
    d: &PathDecomposition,
    scales: &BTreeMap<usize, f64>,
    max_scale: f64,
) -> Result<FlowAssignment> {
    let starts: std::collections::BTreeSet<usize> = d.paths.iter().map(|p| p.start()).collect();
    for (&v, &s) in scales {
        if !starts.contains(&v) {
            return Err(Error::Structure(format!("no path starts at terminal {v}")));
        }
        if !(0.0..=max_scale).contains(&s) {
            return Err(Error::Input(format!("scale {s} at {v} outside [0, {max_scale}]")));
        }
    }
    let mut f = FlowAssignment::zero(d.m);
    for p in &d.paths {
        let s = scales.get(&p.start()).copied().unwrap_or(1.0);
        add_path(&mut f, p, p.weight * s);
    }
    Ok(f)
}

/// Cuts every path at the first vertex outside its start's cluster.
pub fn truncate_at_boundary(d: &PathDecomposition, block_of: &[usize]) -> PathDecomposition {
    let paths = d
        .paths
        .iter()
        .map(|p| {
            let home = block_of[p.start()];
            let keep = p.vertices.iter().take_while(|&&v| block_of[v] == home).count();
            Path {
                vertices: p.vertices[..keep].to_vec(),
                edges: p.edges[..keep - 1].to_vec(),
                weight: p.weight,
            }
        })
        .collect();
    PathDecomposition { paths, m: d.m }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TranscriptStep {
    Decompose { sources: Vec<f64>, sinks: Vec<f64> },
    Rescale { scales: BTreeMap<usize, f64>, max_scale: f64 },
    Truncate { block_of: Vec<usize> },
}

/// Ordered record of path manipulations applied to one origin flow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutingTranscript {
    pub origin: FlowAssignment,
    pub steps: Vec<TranscriptStep>,
}

impl RoutingTranscript {
    pub fn new(origin: FlowAssignment) -> Self {
        RoutingTranscript { origin, steps: Vec::new() }
    }

    pub fn push(&mut self, step: TranscriptStep) {
        self.steps.push(step);
    }

    /// Replays the steps; a rescale step ends the path stage and becomes
    /// the new current flow.
    pub fn replay(&self, g: &CapGraph) -> Result<FlowAssignment> {
        let mut flow = self.origin.clone();
        let mut decomp: Option<PathDecomposition> = None;
        for step in &self.steps {
            match step {
                TranscriptStep::Decompose { sources, sinks } => {
                    decomp = Some(path_decompose(g, &flow, sources, sinks)?);
                }
                TranscriptStep::Rescale { scales, max_scale } => {
                    let d = decomp.take().ok_or_else(|| Error::Structure("rescale before decompose".into()))?;
                    flow = rescale_paths(&d, scales, *max_scale)?;
                }
                TranscriptStep::Truncate { block_of } => {
                    let d = decomp.take().ok_or_else(|| Error::Structure("truncate before decompose".into()))?;
                    let t = truncate_at_boundary(&d, block_of);
                    flow = t.assemble();
                    decomp = Some(t);
                }
            }
        }
        Ok(flow)
    }
}
