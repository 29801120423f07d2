//! One-sided fair cuts.
//!
//! Starting from `A = U`, each iteration prunes family sets that receive too
//! much residual capacity, contracts the outside of the pruned set `B` into a
//! star source `s`, and asks almost-route for `τ = deg_H(s)` units into `t`.
//! A cut shrinks `A`; a flow is pushed across `∂B`. Residual demand left by an
//! approximate flow is routed through the family's router at the end.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::min_congestion_route;
use crate::graph::{CapGraph, Edge, FlowAssignment};
use crate::laminar::LaminarFamily;
use crate::sherman::{AlmostRouteInput, AlmostRouteOutput, AlmostRouter, Residual};

/// Routes any demand `b` with `|b(C)| ≤ δC` on the family at congestion `q`.
pub trait DemandRouter {
    fn route(&mut self, g: &CapGraph, b: &[f64]) -> Result<FlowAssignment>;
}

/// Exact minimum-congestion routing; a near-zero demand gets the zero flow.
#[derive(Debug, Clone, Default)]
pub struct ExactDemandRouter;

impl DemandRouter for ExactDemandRouter {
    fn route(&mut self, g: &CapGraph, b: &[f64]) -> Result<FlowAssignment> {
        let scale = g.max_cap() * g.n() as f64;
        if b.iter().all(|x| x.abs() <= 1e-12 * scale) {
            return Ok(FlowAssignment::zero(g.m()));
        }
        Ok(min_congestion_route(g, b)?.1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairCutConfig {
    pub eps: f64,
    /// `ε′ = ε/(c₂⌈log₂ nW⌉)`.
    pub c2: f64,
    /// Stop once `Φ ≤ threshold`; `None` means `1/(n³W)`.
    pub threshold: Option<f64>,
}

impl FairCutConfig {
    pub fn new(eps: f64) -> Self {
        FairCutConfig { eps, c2: 4.0, threshold: None }
    }

    pub fn eps_prime(&self, g: &CapGraph) -> f64 {
        self.eps / (self.c2 * g.log_nw().ceil())
    }
}

#[derive(Debug, Clone)]
pub struct FairCutInput<'a> {
    pub graph: &'a CapGraph,
    /// Membership mask of `U`.
    pub u_set: Vec<bool>,
    pub t: usize,
    /// Laminar family of subsets of `V∖{t}`.
    pub family: &'a LaminarFamily,
    /// Congestion of the family router on demands with `|b(C)| ≤ δC`.
    pub q: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StepKind {
    Cut,
    Flow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: usize,
    /// `Φ^(k)`: residual capacity entering `A^(k)`.
    pub phi: f64,
    pub a_size: usize,
    pub b_size: usize,
    pub tau: f64,
    pub kind: StepKind,
    /// Largest pruned in-capacity over `δ_G C` (at most 4).
    pub prune_ratio: f64,
    /// Largest `δ_H(C∩B)/δ_G C` (at most 3).
    pub star_ratio: f64,
    /// Congestion of the residual-demand routing of this step.
    pub residual_congestion: f64,
    /// Flow `t` takes in through this step.
    pub t_received: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FairCutResult {
    pub a: Vec<bool>,
    pub flow: FlowAssignment,
    pub iterations: Vec<IterationRecord>,
    pub delta_u: f64,
    pub delta_a: f64,
    /// Smallest inward saturation over `∂A`.
    pub min_saturation: f64,
    /// Largest `|net flow|` over `A∖{t}`.
    pub max_imbalance: f64,
    pub t_received: f64,
}

/// Residual capacity from `u` to `w` along edge `id`.
fn res_into(g: &CapGraph, f: &FlowAssignment, id: usize, u: usize) -> f64 {
    let e = g.edge(id);
    if e.u == u {
        e.cap - f.f[id]
    } else {
        e.cap + f.f[id]
    }
}

/// Residual capacity entering each vertex of `inside` from outside it.
pub fn boundary_inflow(g: &CapGraph, f: &FlowAssignment, inside: &[bool]) -> Vec<f64> {
    let mut r = vec![0.0; g.n()];
    for v in (0..g.n()).filter(|&v| inside[v]) {
        for &(u, id) in g.neighbors(v) {
            if !inside[u] {
                r[v] += res_into(g, f, id, u);
            }
        }
    }
    r
}

/// Pruning pass: drops `C` from `B` whenever more than `2δ_G C` residual
/// capacity enters `B` at vertices of `B∩C`, scanning sets by decreasing size.
/// Returns `B` and the largest remaining ratio over `δ_G C`.
pub fn prune_candidates(g: &CapGraph, a: &[bool], f: &FlowAssignment, family: &LaminarFamily) -> Result<(Vec<bool>, f64)> {
    let mut b = a.to_vec();
    let mut inflow = boundary_inflow(g, f, &b);
    for (j, c) in family.sets.iter().enumerate() {
        let into: f64 = c.iter().filter(|&&v| b[v]).map(|&v| inflow[v]).sum();
        if into > 2.0 * family.delta[j] * (1.0 + 1e-12) {
            for &v in c {
                if !b[v] {
                    continue;
                }
                b[v] = false;
                inflow[v] = 0.0;
                for &(w, id) in g.neighbors(v) {
                    if b[w] {
                        inflow[w] += res_into(g, f, id, v);
                    }
                }
            }
        }
    }
    let mut ratio: f64 = 0.0;
    for (j, c) in family.sets.iter().enumerate() {
        let into: f64 = c.iter().filter(|&&v| b[v]).map(|&v| inflow[v]).sum();
        let tol = 1e-9 * family.delta[j].max(1.0);
        if into > 4.0 * family.delta[j] + tol {
            return Err(Error::Contract(format!("pruning left {into} entering set {j} with boundary {}", family.delta[j])));
        }
        if family.delta[j] > 0.0 {
            ratio = ratio.max(into / family.delta[j]);
        }
    }
    Ok((b, ratio))
}

/// `G[B]` plus a star source joined to each `v ∈ B` with capacity half the
/// residual entering `v` across `∂B`.
#[derive(Debug, Clone)]
pub struct StarGraph {
    pub h: CapGraph,
    pub residual: Residual,
    /// Local id of each vertex of `B` (`usize::MAX` outside).
    pub local: Vec<usize>,
    pub vertices: Vec<usize>,
    /// Global edge id of every internal edge of `H`.
    pub edge_map: Vec<usize>,
    /// Star edges: `(edge id in H, global vertex)`.
    pub star_edges: Vec<(usize, usize)>,
    pub s: usize,
    pub tau: f64,
    pub family: LaminarFamily,
    /// Largest `δ_H(C∩B)/δ_G C` (at most 3).
    pub star_ratio: f64,
}

pub fn build_star_graph(g: &CapGraph, b: &[bool], f: &FlowAssignment, family: &LaminarFamily) -> Result<StarGraph> {
    let vertices: Vec<usize> = (0..g.n()).filter(|&v| b[v]).collect();
    let mut local = vec![usize::MAX; g.n()];
    for (i, &v) in vertices.iter().enumerate() {
        local[v] = i;
    }
    let s = vertices.len();
    let mut edges = Vec::new();
    let mut upper = Vec::new();
    let mut lower = Vec::new();
    let mut edge_map = Vec::new();
    for (id, e) in g.edges().iter().enumerate() {
        if b[e.u] && b[e.v] {
            edges.push(Edge { u: local[e.u], v: local[e.v], cap: e.cap });
            upper.push(e.cap - f.f[id]);
            lower.push(e.cap + f.f[id]);
            edge_map.push(id);
        }
    }
    let inflow = boundary_inflow(g, f, b);
    let mut star_edges = Vec::new();
    let mut tau = 0.0;
    for &v in &vertices {
        if inflow[v] > 0.0 {
            star_edges.push((edges.len(), v));
            edges.push(Edge { u: s, v: local[v], cap: inflow[v] / 2.0 });
            upper.push(inflow[v]);
            lower.push(0.0);
            tau += inflow[v] / 2.0;
        }
    }
    let h = CapGraph::from_real(s + 1, edges)?;
    let mut sets: Vec<Vec<usize>> = family
        .sets
        .iter()
        .map(|c| c.iter().filter(|&&v| b[v]).map(|&v| local[v]).collect::<Vec<_>>())
        .filter(|c| !c.is_empty())
        .collect();
    sets.push(vec![s]);
    let hfam = LaminarFamily::new(&h, sets)?;
    let mut star_ratio: f64 = 0.0;
    for (j, c) in family.sets.iter().enumerate() {
        let cb: Vec<usize> = c.iter().filter(|&&v| b[v]).map(|&v| local[v]).collect();
        if cb.is_empty() {
            continue;
        }
        let dh = h.cut_capacity(&h.set_mask(&cb));
        let tol = 1e-9 * family.delta[j].max(1.0);
        if dh > 3.0 * family.delta[j] + tol {
            return Err(Error::Contract(format!("star graph boundary {dh} of set {j} exceeds 3 * {}", family.delta[j])));
        }
        if family.delta[j] > 0.0 {
            star_ratio = star_ratio.max(dh / family.delta[j]);
        }
    }
    Ok(StarGraph { h, residual: Residual { upper, lower }, local, vertices, edge_map, star_edges, s, tau, family: hfam, star_ratio })
}

/// Routes the imbalance a mapped star flow leaves inside `B`: `b` cancels
/// it on `B∖{t}`, `t` absorbs the sum. Returns the flow and what `t` takes in.
pub fn route_residual_demands(
    g: &CapGraph,
    b_set: &[bool],
    t: usize,
    excess: &[f64],
    family: &LaminarFamily,
    bound: f64,
    router: &mut dyn DemandRouter,
) -> Result<(FlowAssignment, Vec<f64>)> {
    let n = g.n();
    let mut b = vec![0.0; n];
    for v in 0..n {
        if b_set[v] && v != t {
            b[v] = -excess[v];
        }
    }
    b[t] = -b.iter().sum::<f64>();
    if let Some((j, s, delta)) = family.violation(&b, bound) {
        return Err(Error::Contract(format!("residual demand {s} on set {j} exceeds {bound} * {delta}")));
    }
    let f = router.route(g, &b)?;
    Ok((f, b))
}

/// Computes a one-sided fair cut `(A, f)` with `t ∈ A ⊆ U`.
pub fn fair_cut(inp: &FairCutInput, cfg: &FairCutConfig, almost: &mut dyn AlmostRouter, router: &mut dyn DemandRouter) -> Result<FairCutResult> {
    let g = inp.graph;
    let n = g.n();
    if inp.u_set.len() != n || inp.t >= n || !inp.u_set[inp.t] {
        return Err(Error::Input("fair cut needs t inside U".into()));
    }
    if inp.family.member_of[inp.t].iter().next().is_some() {
        return Err(Error::Input("family sets must avoid t".into()));
    }
    if !(cfg.eps > 0.0 && cfg.eps < 1.0) || !(inp.q > 0.0) {
        return Err(Error::Input("fair cut needs 0 < eps < 1 and q > 0".into()));
    }
    let eps_p = cfg.eps_prime(g);
    let threshold = cfg.threshold.unwrap_or_else(|| 1.0 / ((n.max(2) as f64).powi(3) * g.max_cap()));
    let mut a = inp.u_set.clone();
    let mut f = FlowAssignment::zero(g.m());
    let mut extra = FlowAssignment::zero(g.m());
    let mut t_received = 0.0;
    let delta_u = g.cut_capacity(&a);
    let mut phi: f64 = boundary_inflow(g, &f, &a).iter().sum();
    let max_iter = 8 + ((delta_u.max(1.0) / threshold).ln() / (4.0f64 / 3.0).ln()).ceil() as usize;
    let mut records = Vec::new();
    let mut k = 0;
    while phi > threshold {
        if k >= max_iter {
            return Err(Error::Unconverged { iterations: k });
        }
        let (b, prune_ratio) = prune_candidates(g, &a, &f, inp.family)?;
        let star = build_star_graph(g, &b, &f, inp.family)?;
        let ainp = AlmostRouteInput {
            graph: &star.h,
            residual: &star.residual,
            s: star.s,
            t: star.local[inp.t],
            eps: eps_p / inp.q,
            tau: star.tau,
            family: &star.family,
        };
        let out = almost.route(&ainp)?;
        let mut rec = IterationRecord {
            k,
            phi,
            a_size: a.iter().filter(|&&x| x).count(),
            b_size: star.vertices.len(),
            tau: star.tau,
            kind: StepKind::Cut,
            prune_ratio,
            star_ratio: star.star_ratio,
            residual_congestion: 0.0,
            t_received: 0.0,
        };
        match out {
            AlmostRouteOutput::Cut { side, .. } => {
                a = b.clone();
                for (i, &v) in star.vertices.iter().enumerate() {
                    if side[i] {
                        a[v] = false;
                    }
                }
            }
            AlmostRouteOutput::Flow { flow, .. } => {
                rec.kind = StepKind::Flow;
                let mut fp = FlowAssignment::zero(g.m());
                for (hid, &gid) in star.edge_map.iter().enumerate() {
                    fp.f[gid] += flow.f[hid];
                }
                // split each star arc over the boundary arcs it stands for
                for &(hid, v) in &star.star_edges {
                    let x = flow.f[hid];
                    if x <= 0.0 {
                        continue;
                    }
                    let total = star.residual.upper[hid];
                    for &(u, id) in g.neighbors(v) {
                        if b[u] {
                            continue;
                        }
                        let share = x * res_into(g, &f, id, u) / total;
                        fp.f[id] += if g.edge(id).u == u { share } else { -share };
                    }
                }
                let ex = fp.excess(g);
                let bound = 3.0 * eps_p / inp.q;
                let (fpp, bdem) = route_residual_demands(g, &b, inp.t, &ex, inp.family, bound, router)?;
                rec.residual_congestion = fpp.congestion(g);
                rec.t_received = -(ex[inp.t] + bdem[inp.t]);
                t_received += rec.t_received;
                f.add_scaled(&fp, 1.0);
                extra.add_scaled(&fpp, 1.0);
                a = b.clone();
            }
        }
        let next: f64 = boundary_inflow(g, &f, &a).iter().sum();
        if k >= 1 && next > 0.75 * phi + 1e-9 * delta_u.max(1.0) {
            return Err(Error::Contract(format!("potential went from {phi} to {next} at iteration {k}")));
        }
        records.push(rec);
        phi = next;
        k += 1;
    }
    f.add_scaled(&extra, 1.0);
    finish(g, inp, cfg, a, f, records, delta_u, t_received)
}

#[allow(clippy::too_many_arguments)]
fn finish(
    g: &CapGraph,
    inp: &FairCutInput,
    cfg: &FairCutConfig,
    a: Vec<bool>,
    f: FlowAssignment,
    iterations: Vec<IterationRecord>,
    delta_u: f64,
    t_received: f64,
) -> Result<FairCutResult> {
    let delta_a = g.cut_capacity(&a);
    let tol = 1e-9 * delta_u.max(1.0);
    if delta_a > 4.0 * delta_u + tol {
        return Err(Error::Contract(format!("fair cut boundary {delta_a} exceeds 4 * {delta_u}")));
    }
    let mut min_saturation: f64 = 1.0;
    for (id, e) in g.edges().iter().enumerate() {
        if a[e.u] == a[e.v] {
            continue;
        }
        let inward = if a[e.v] { f.f[id] } else { -f.f[id] };
        let sat = inward / e.cap;
        min_saturation = min_saturation.min(sat);
        if sat < 1.0 - cfg.eps - 1e-9 {
            return Err(Error::Contract(format!("fair cut edge {id} only {sat} saturated inward")));
        }
    }
    let ex = f.excess(g);
    let mut max_imbalance: f64 = 0.0;
    for v in (0..g.n()).filter(|&v| a[v] && v != inp.t) {
        max_imbalance = max_imbalance.max(ex[v].abs());
    }
    if max_imbalance > tol {
        return Err(Error::Contract(format!("fair cut leaves net flow {max_imbalance} inside A")));
    }
    Ok(FairCutResult { a, flow: f, iterations, delta_u, delta_a, min_saturation, max_imbalance, t_received })
}
