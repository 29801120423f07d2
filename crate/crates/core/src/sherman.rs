//! Almost-route, the matching oracle built on it, and approximate max flow.
//!
//! `almost_route` answers one `(s,t)` question on a residual graph: either a
//! cut of residual capacity below `τ`, or a flow whose residual demand is
//! small against every set of a laminar family. Two backends share the
//! contract: an exact max flow, and a first-order solver on a soft-max of
//! the family residuals.

use serde::{Deserialize, Serialize};

use crate::cut_matching::{ComponentOutcome, MatchingInstance, MatchingOracle, MatchingOracleResult};
use crate::error::{Error, Result};
use crate::exact::Network;
use crate::graph::{CapGraph, Edge, FlowAssignment};
use crate::hierarchy::Hierarchy;
use crate::laminar::LaminarFamily;
use crate::paths::{path_decompose, Path};

/// A residual view of an undirected graph: edge `e = (u, v)` may carry
/// flow in `[-lower[e], upper[e]]` along its stored orientation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub upper: Vec<f64>,
    pub lower: Vec<f64>,
}

impl Residual {
    /// The residual graph of the zero flow.
    pub fn full(g: &CapGraph) -> Self {
        let c: Vec<f64> = g.edges().iter().map(|e| e.cap).collect();
        Residual { upper: c.clone(), lower: c }
    }

    /// The residual graph of `f` (which must be feasible in `g`).
    pub fn of_flow(g: &CapGraph, f: &FlowAssignment) -> Self {
        let upper = g.edges().iter().zip(&f.f).map(|(e, x)| (e.cap - x).max(0.0)).collect();
        let lower = g.edges().iter().zip(&f.f).map(|(e, x)| (e.cap + x).max(0.0)).collect();
        Residual { upper, lower }
    }

    /// Residual capacity leaving `side`.
    pub fn cut_out(&self, g: &CapGraph, side: &[bool]) -> f64 {
        let mut c = 0.0;
        for (id, e) in g.edges().iter().enumerate() {
            if side[e.u] && !side[e.v] {
                c += self.upper[id];
            } else if side[e.v] && !side[e.u] {
                c += self.lower[id];
            }
        }
        c
    }
}

#[derive(Debug, Clone)]
pub struct AlmostRouteInput<'a> {
    pub graph: &'a CapGraph,
    pub residual: &'a Residual,
    pub s: usize,
    pub t: usize,
    pub eps: f64,
    pub tau: f64,
    pub family: &'a LaminarFamily,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum AlmostRouteOutput {
    /// `s`-side of a cut with residual capacity `value < τ`.
    Cut { side: Vec<bool>, value: f64 },
    /// A flow feasible in the residual graph and its residual demand
    /// `τ(1_s − 1_t) − excess(f)`.
    Flow { flow: FlowAssignment, residual_demand: Vec<f64> },
}

/// Machine check of the dichotomy.
pub fn verify_almost_route(inp: &AlmostRouteInput, out: &AlmostRouteOutput) -> Result<()> {
    let g = inp.graph;
    match out {
        AlmostRouteOutput::Cut { side, value } => {
            if side.len() != g.n() || !side[inp.s] || side[inp.t] {
                return Err(Error::Contract("almost-route cut does not separate s from t".into()));
            }
            let v = inp.residual.cut_out(g, side);
            if (v - value).abs() > 1e-9 * v.max(1.0) || v >= inp.tau {
                return Err(Error::Contract(format!("almost-route cut value {v} is not below tau = {}", inp.tau)));
            }
        }
        AlmostRouteOutput::Flow { flow, residual_demand } => {
            for (id, x) in flow.f.iter().enumerate() {
                let slack = 1e-9 * g.cap(id);
                if *x > inp.residual.upper[id] + slack || -*x > inp.residual.lower[id] + slack {
                    return Err(Error::Contract(format!("almost-route flow leaves the residual box on edge {id}")));
                }
            }
            let d = residual_of(g, inp, flow);
            let scale = inp.tau.max(1.0);
            if d.iter().zip(residual_demand).any(|(a, b)| (a - b).abs() > 1e-9 * scale) {
                return Err(Error::Contract("reported residual demand does not match the flow".into()));
            }
            if let Some((j, s, delta)) = inp.family.violation(&d, inp.eps) {
                return Err(Error::Contract(format!(
                    "almost-route residual {s} on family set {j} exceeds eps * {delta}"
                )));
            }
        }
    }
    Ok(())
}

fn residual_of(g: &CapGraph, inp: &AlmostRouteInput, f: &FlowAssignment) -> Vec<f64> {
    let mut d: Vec<f64> = f.excess(g).iter().map(|x| -x).collect();
    d[inp.s] += inp.tau;
    d[inp.t] -= inp.tau;
    d
}

fn check_input(inp: &AlmostRouteInput) -> Result<()> {
    let g = inp.graph;
    if inp.s >= g.n() || inp.t >= g.n() || inp.s == inp.t {
        return Err(Error::Input("almost-route needs distinct s and t".into()));
    }
    if !(inp.eps > 0.0) || !(inp.tau >= 0.0) || !inp.tau.is_finite() {
        return Err(Error::Input(format!("almost-route needs eps > 0 and tau >= 0, got {} and {}", inp.eps, inp.tau)));
    }
    if inp.residual.upper.len() != g.m() || inp.residual.lower.len() != g.m() {
        return Err(Error::Structure("residual does not match the graph".into()));
    }
    Ok(())
}

/// Either backend of the almost-route contract.
pub trait AlmostRouter {
    fn route(&mut self, inp: &AlmostRouteInput) -> Result<AlmostRouteOutput>;
}

/// Reference backend: exact max flow, so the residual demand is zero.
#[derive(Debug, Clone, Default)]
pub struct ExactRouter;

impl AlmostRouter for ExactRouter {
    fn route(&mut self, inp: &AlmostRouteInput) -> Result<AlmostRouteOutput> {
        check_input(inp)?;
        let g = inp.graph;
        let mut net = Network::new(g.n());
        let arcs: Vec<usize> = g
            .edges()
            .iter()
            .enumerate()
            .map(|(id, e)| net.add_arc(e.u, e.v, inp.residual.upper[id], inp.residual.lower[id]))
            .collect();
        let value = net.max_flow(inp.s, inp.t, inp.tau);
        let out = if value < inp.tau * (1.0 - 1e-12) {
            let side: Vec<bool> = net.reachable(inp.s);
            let v = inp.residual.cut_out(g, &side);
            AlmostRouteOutput::Cut { side, value: v }
        } else {
            let flow = FlowAssignment { f: arcs.iter().map(|&a| net.flow_on(a)).collect() };
            let residual_demand = residual_of(g, inp, &flow);
            AlmostRouteOutput::Flow { flow, residual_demand }
        };
        verify_almost_route(inp, &out)?;
        Ok(out)
    }
}

/// First-order backend.
///
/// Minimises `smax_β(±d̃(C)/(εδC))` over flows in the residual box with
/// accelerated projected gradient steps. The soft-max weights define vertex
/// potentials `φ(v) = Σ_{C∋v} w_C/(εδC)`; whenever their dual value
/// `τ(φ(s)−φ(t)) − Σ_e box·(drop of φ)` is positive, some level set of `φ`
/// is an `(s,t)`-cut of residual capacity below `τ`, found by a sweep.
#[derive(Debug, Clone)]
pub struct SoftmaxRouter {
    /// Iteration cap is `k_iter/ε²`.
    pub k_iter: f64,
    /// Iterations between dichotomy checks.
    pub check_every: usize,
    /// Iterations used by the last call.
    pub last_iterations: usize,
}

impl Default for SoftmaxRouter {
    fn default() -> Self {
        SoftmaxRouter { k_iter: 400.0, check_every: 25, last_iterations: 0 }
    }
}

struct SmaxModel<'a> {
    g: &'a CapGraph,
    inp: &'a AlmostRouteInput<'a>,
    /// Family sets with positive boundary, their scale `1/(εδC)`.
    sets: Vec<usize>,
    scale: Vec<f64>,
    beta: f64,
}

impl SmaxModel<'_> {
    /// Objective, vertex potentials and family maximum at `f`.
    fn eval(&self, f: &[f64]) -> (f64, Vec<f64>, f64) {
        let g = self.g;
        let mut d = vec![0.0; g.n()];
        for (id, e) in g.edges().iter().enumerate() {
            d[e.u] -= f[id];
            d[e.v] += f[id];
        }
        d[self.inp.s] += self.inp.tau;
        d[self.inp.t] -= self.inp.tau;
        let fam = self.inp.family;
        let x: Vec<f64> = self
            .sets
            .iter()
            .zip(&self.scale)
            .map(|(&j, &sc)| fam.sets[j].iter().map(|&v| d[v]).sum::<f64>() * sc)
            .collect();
        let top = x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let b = self.beta;
        let z: f64 = x.iter().map(|v| (b * (v - top)).exp() + (b * (-v - top)).exp()).sum();
        let obj = top + z.ln() / b;
        let mut phi = vec![0.0; g.n()];
        for ((&j, &sc), v) in self.sets.iter().zip(&self.scale).zip(&x) {
            let w = ((b * (v - top)).exp() - (b * (-v - top)).exp()) / z;
            for &u in &fam.sets[j] {
                phi[u] += w * sc;
            }
        }
        (obj, phi, top)
    }

    /// Dual value of the potentials.
    fn dual(&self, phi: &[f64]) -> f64 {
        let r = self.inp.residual;
        let mut support = 0.0;
        for (id, e) in self.g.edges().iter().enumerate() {
            let drop = phi[e.u] - phi[e.v];
            support += if drop > 0.0 { r.upper[id] * drop } else { -r.lower[id] * drop };
        }
        self.inp.tau * (phi[self.inp.s] - phi[self.inp.t]) - support
    }
}

/// Level-set sweep of `phi`: the `s`-side set `{φ ≥ θ}` with the smallest
/// residual capacity among those separating `s` from `t`.
pub fn sweep_cut(g: &CapGraph, r: &Residual, phi: &[f64], s: usize, t: usize) -> Option<(Vec<bool>, f64)> {
    if phi[s] <= phi[t] {
        return None;
    }
    let mut order: Vec<usize> = (0..g.n()).collect();
    order.sort_by(|&a, &b| phi[b].total_cmp(&phi[a]).then(a.cmp(&b)));
    let mut side = vec![false; g.n()];
    let mut value = 0.0;
    let mut best: Option<(Vec<bool>, f64)> = None;
    let mut i = 0;
    while i < order.len() {
        // add a whole level at once so level sets stay exact
        let level = phi[order[i]];
        while i < order.len() && phi[order[i]] == level {
            let v = order[i];
            side[v] = true;
            for &(w, id) in g.neighbors(v) {
                let e = g.edge(id);
                let (out, inn) = if e.u == v { (r.upper[id], r.lower[id]) } else { (r.lower[id], r.upper[id]) };
                if side[w] {
                    value -= inn;
                } else {
                    value += out;
                }
            }
            i += 1;
        }
        if side[s] && !side[t] && best.as_ref().is_none_or(|b| value < b.1) {
            best = Some((side.clone(), value));
        }
    }
    best
}

impl AlmostRouter for SoftmaxRouter {
    fn route(&mut self, inp: &AlmostRouteInput) -> Result<AlmostRouteOutput> {
        check_input(inp)?;
        let g = inp.graph;
        let fam = inp.family;
        let m = g.m();
        let lo: Vec<f64> = inp.residual.lower.iter().map(|x| -x).collect();
        let hi = &inp.residual.upper;
        let mut sets = Vec::new();
        let mut scale = Vec::new();
        let mut lip_row: f64 = 0.0;
        for j in 0..fam.len() {
            if fam.delta[j] > 0.0 {
                sets.push(j);
                let sc = 1.0 / (inp.eps * fam.delta[j]);
                scale.push(sc);
                let mask = g.set_mask(&fam.sets[j]);
                let cut_edges = g.edges().iter().filter(|e| mask[e.u] != mask[e.v]).count() as f64;
                lip_row = lip_row.max(cut_edges * sc * sc);
            }
        }
        let beta = 4.0 * ((2 * sets.len()).max(2) as f64).ln();
        let model = SmaxModel { g, inp, sets, scale, beta };
        let step = if lip_row > 0.0 { 1.0 / (beta * lip_row) } else { 1.0 };
        let cap = (self.k_iter / (inp.eps * inp.eps)).ceil() as usize;
        let project = |x: &mut [f64]| {
            for (id, v) in x.iter_mut().enumerate() {
                *v = v.clamp(lo[id], hi[id]);
            }
        };
        let mut f = vec![0.0; m];
        let mut y = f.clone();
        let mut momentum = 1.0f64;
        let mut prev_obj = f64::INFINITY;
        for it in 0..=cap {
            let (obj_y, phi_y, _) = model.eval(&y);
            if it % self.check_every == 0 || it == cap {
                let (_, phi_f, top) = model.eval(&f);
                if top <= 1.0 - 1e-9 {
                    let flow = FlowAssignment { f: f.clone() };
                    let residual_demand = residual_of(g, inp, &flow);
                    let out = AlmostRouteOutput::Flow { flow, residual_demand };
                    if verify_almost_route(inp, &out).is_ok() {
                        self.last_iterations = it;
                        return Ok(out);
                    }
                }
                for phi in [&phi_f, &phi_y] {
                    if model.dual(phi) > 0.0 {
                        if let Some((side, value)) = sweep_cut(g, inp.residual, phi, inp.s, inp.t) {
                            if value < inp.tau {
                                let out = AlmostRouteOutput::Cut { side, value };
                                verify_almost_route(inp, &out)?;
                                self.last_iterations = it;
                                return Ok(out);
                            }
                        }
                    }
                }
            }
            if model.sets.is_empty() {
                break;
            }
            // gradient of the objective in f_e is −(φ(u) − φ(v))
            let mut next = y.clone();
            for (id, e) in g.edges().iter().enumerate() {
                next[id] += step * (phi_y[e.u] - phi_y[e.v]);
            }
            project(&mut next);
            // adaptive restart keeps the accelerated sequence monotone enough
            let restart = obj_y > prev_obj;
            prev_obj = obj_y;
            let mom_next = (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt()) / 2.0;
            let coef = if restart { 0.0 } else { (momentum - 1.0) / mom_next };
            for id in 0..m {
                y[id] = next[id] + coef * (next[id] - f[id]);
            }
            project(&mut y);
            f = next;
            momentum = if restart { 1.0 } else { mom_next };
        }
        self.last_iterations = cap;
        Err(Error::Unconverged { iterations: cap })
    }
}

/// Which almost-route backend to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AlmostBackend {
    Exact,
    Softmax,
}

impl AlmostBackend {
    pub fn router(self) -> Box<dyn AlmostRouter> {
        match self {
            AlmostBackend::Exact => Box::new(ExactRouter),
            AlmostBackend::Softmax => Box::new(SoftmaxRouter::default()),
        }
    }
}

/// Matching oracle from almost-route on the round's flow problem, with the
/// leftover demand routed through the levels built so far.
///
/// `τ` is binary searched between a flow and a cut. The flow, its
/// spread-out `s`/`t` residual and the hierarchy routing of the rest are
/// decomposed into paths; paths that leave their component or stop short of
/// `t` are dropped and the rest is scaled by `1/(1 + ε̂/25)`. The cut gives
/// `C_A = A ∩ S`. A component stays in `A'` if its sources outside the cut
/// route within `20000 ε̂ d(A)` of their total and its cut holds less than a
/// third of its weight in sinks.
pub struct HierarchyMatchingOracle<'a> {
    pub hierarchy: &'a Hierarchy,
    pub router: Box<dyn AlmostRouter>,
    pub eps_hat: f64,
    /// Almost-route calls so far.
    pub calls: usize,
    /// Smallest extra shrink factor needed to keep paths within their
    /// terminals and the congestion within `2/φ` (1 when none was needed).
    pub min_shrink: f64,
}

impl<'a> HierarchyMatchingOracle<'a> {
    pub fn new(hierarchy: &'a Hierarchy, g: &CapGraph, almost: AlmostBackend) -> Result<Self> {
        if hierarchy.family.family.sets.iter().flatten().any(|&v| v >= g.n()) {
            return Err(Error::Structure("hierarchy does not match the graph".into()));
        }
        Ok(HierarchyMatchingOracle {
            hierarchy,
            router: almost.router(),
            eps_hat: hierarchy.config.eps_hat,
            calls: 0,
            min_shrink: 1.0,
        })
    }

    /// `ε` handed to almost-route: `ε̂/(4320 α β L²)`.
    pub fn route_eps(&self) -> f64 {
        self.eps_hat / (90.0 * self.hierarchy.quality())
    }
}

impl MatchingOracle for HierarchyMatchingOracle<'_> {
    fn solve(&mut self, g: &CapGraph, inst: &MatchingInstance) -> Result<MatchingOracleResult> {
        let n = g.n();
        let h = self.hierarchy;
        let (s, t) = (n, n + 1);
        let (base, map) = inst.global_graph(g);
        let mut edges: Vec<Edge> = base.edges().to_vec();
        let mut terminal_edges = Vec::new();
        for v in 0..n {
            if inst.source[v] > 0.0 {
                terminal_edges.push(Edge { u: s, v, cap: inst.source[v] });
            }
            if inst.sink[v] > 0.0 {
                terminal_edges.push(Edge { u: v, v: t, cap: inst.sink[v] });
            }
        }
        edges.extend(terminal_edges.iter().copied());
        let gt = CapGraph::from_real(n + 2, edges)?;
        let mut sets = h.family.family.sets.clone();
        sets.push(vec![s]);
        sets.push(vec![t]);
        let fam = LaminarFamily::new(&gt, sets)?;
        let residual = Residual::full(&gt);
        let eps = self.route_eps();
        let d_v: f64 = inst.d.iter().sum();
        let total_source: f64 = inst.source.iter().sum();
        let total_sink: f64 = inst.sink.iter().sum();
        let gap = self.eps_hat * d_v / 2.0;

        let mut lo = self.eps_hat * d_v;
        let mut hi: f64 = inst.d_prev.iter().sum();
        let mut best: Option<(FlowAssignment, Vec<f64>, f64)> = None;
        let mut cut: Option<Vec<bool>> = None;
        let mut tau = hi;
        loop {
            let out = self.router.route(&AlmostRouteInput { graph: &gt, residual: &residual, s, t, eps, tau, family: &fam })?;
            self.calls += 1;
            match out {
                AlmostRouteOutput::Flow { flow, residual_demand } => {
                    lo = tau;
                    best = Some((flow, residual_demand, tau));
                }
                AlmostRouteOutput::Cut { side, .. } => {
                    hi = tau;
                    cut = Some(side);
                }
            }
            if cut.is_none() || hi - lo <= gap {
                break;
            }
            tau = (lo + hi) / 2.0;
        }

        // the flow in G plus the terminals, inter-component edges included
        let mut hedges: Vec<Edge> = g
            .edges()
            .iter()
            .map(|e| {
                let inside = inst.comp_of[e.u] == inst.comp_of[e.v];
                Edge { cap: if inside { e.cap * 2.0 / inst.phi } else { e.cap }, ..*e }
            })
            .collect();
        hedges.extend(terminal_edges.iter().copied());
        let hg = CapGraph::from_real(n + 2, hedges)?;
        let to_h = |k: usize| if k < map.len() { map[k] } else { g.m() + (k - map.len()) };
        let mut paths = Vec::new();
        if let Some((f1, mut r, _)) = best {
            let mut f = FlowAssignment::zero(hg.m());
            for (k, &x) in f1.f.iter().enumerate() {
                f.f[to_h(k)] += x;
            }
            for (j, e) in terminal_edges.iter().enumerate() {
                let id = g.m() + j;
                if e.u == s && total_source > 0.0 {
                    let a = r[s] * e.cap / total_source;
                    f.f[id] += a;
                    r[e.v] += a;
                } else if e.v == t && total_sink > 0.0 {
                    let a = -r[t] * e.cap / total_sink;
                    f.f[id] += a;
                    r[e.u] -= a;
                }
            }
            h.balance_top(&mut r[..n], 1e-9 * total_source.max(1.0));
            let routed = h.route_scaled(g, &r[..n])?;
            for (id, &x) in routed.flow.f.iter().enumerate() {
                f.f[id] += x;
            }
            let ex = f.excess(&hg);
            let src: Vec<f64> = ex.iter().map(|x| x.max(0.0)).collect();
            let snk: Vec<f64> = ex.iter().map(|x| (-x).max(0.0)).collect();
            let dec = path_decompose(&hg, &f, &src, &snk)?;
            let shrink = 1.0 / (1.0 + self.eps_hat / 25.0);
            for p in dec.paths {
                let k = p.vertices.len();
                if p.start() != s || p.end() != t || k < 3 {
                    continue;
                }
                let inner = &p.edges[1..k - 2];
                if inner.iter().any(|&(id, _)| inst.comp_of[g.edge(id).u] != inst.comp_of[g.edge(id).v]) {
                    continue;
                }
                paths.push(Path { vertices: p.vertices[1..k - 1].to_vec(), edges: inner.to_vec(), weight: p.weight * shrink });
            }
        }

        // terminals and congestion must hold exactly
        let mut sent = vec![0.0; n];
        let mut got = vec![0.0; n];
        let mut fg = FlowAssignment::zero(g.m());
        for p in &paths {
            sent[p.start()] += p.weight;
            got[p.end()] += p.weight;
            crate::paths::add_path(&mut fg, p, p.weight);
        }
        let mut factor: f64 = 1.0;
        for v in 0..n {
            if sent[v] > inst.source[v] {
                factor = factor.min(inst.source[v] / sent[v]);
            }
            if got[v] > inst.sink[v] {
                factor = factor.min(inst.sink[v] / got[v]);
            }
        }
        let cong = fg.congestion(g);
        if cong > 2.0 / inst.phi {
            factor = factor.min(2.0 / inst.phi / cong);
        }
        if factor < 1.0 {
            self.min_shrink = self.min_shrink.min(factor);
            for p in &mut paths {
                p.weight *= factor;
            }
            sent.iter_mut().for_each(|x| *x *= factor);
        }

        let side = cut.unwrap_or_else(|| vec![false; n + 2]);
        let mut outcomes = Vec::new();
        for sub in &inst.subs {
            let ca: Vec<usize> = sub.vertices.iter().copied().filter(|&v| side[v]).collect();
            let in_c: std::collections::BTreeSet<usize> = ca.iter().copied().collect();
            let da: f64 = sub.vertices.iter().map(|&v| inst.d[v]).sum();
            let da_prev: f64 = sub.vertices.iter().map(|&v| inst.d_prev[v]).sum();
            let src_rest: f64 = sub.l.iter().filter(|v| !in_c.contains(v)).map(|&v| inst.source[v]).sum();
            let routed_rest: f64 = sub.l.iter().filter(|v| !in_c.contains(v)).map(|&v| sent[v]).sum();
            let sink_in_cut: f64 = ca.iter().map(|&v| inst.sink[v]).sum();
            let dc: f64 = ca.iter().map(|&v| inst.d_prev[v]).sum();
            // the rounded-up L side of a small component can push d(C_A) past half
            let in_prime = routed_rest >= src_rest - 20000.0 * self.eps_hat * da
                && sink_in_cut < da_prev / 3.0
                && dc <= da_prev / 2.0;
            outcomes.push(ComponentOutcome { component: sub.component, in_prime, cut: if in_prime { ca } else { Vec::new() } });
        }
        Ok(MatchingOracleResult { outcomes, paths, slack: 10000.0 * self.eps_hat, cut_slack: self.eps_hat })
    }
}

/// Result of [`approx_max_flow`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ApproxMaxFlow {
    pub value: f64,
    /// Feasible flow of `value` units from `s` to `t`.
    pub flow: FlowAssignment,
    /// Capacity of the smallest cut seen, so the max flow is at most this.
    pub upper_bound: f64,
    /// Whether `value ≥ (1 − ε)·upper_bound`.
    pub certified: bool,
    pub almost_calls: usize,
    /// `ε` of the last almost-route pass.
    pub route_eps: f64,
}

/// `(1 − ε)`-approximate `s`-`t` max flow. Almost-route searches `τ`; the
/// leftover demand of each flow is routed through a full hierarchy and the
/// sum scaled to be feasible. Passes repeat with a smaller almost-route `ε`
/// until the value is certified against the best cut.
pub fn approx_max_flow(
    g: &CapGraph,
    s: usize,
    t: usize,
    eps: f64,
    h: &Hierarchy,
    almost: &mut dyn AlmostRouter,
) -> Result<ApproxMaxFlow> {
    let n = g.n();
    if s >= n || t >= n || s == t {
        return Err(Error::Input(format!("terminals {s}, {t} must be distinct vertices of 0..{n}")));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Input(format!("eps = {eps} must lie in (0, 1)")));
    }
    if !h.is_full() {
        return Err(Error::Input("approximate max flow needs a full hierarchy".into()));
    }
    let deg = g.degrees();
    let mut upper = deg[s].min(deg[t]);
    let residual = Residual::full(g);
    let family = &h.family.family;
    let mut best_value = 0.0;
    let mut best_flow = FlowAssignment::zero(g.m());
    let mut calls = 0;
    let mut route_eps = eps / 4.0;
    for _pass in 0..8 {
        let mut lo = 0.0;
        let mut hi = upper;
        for step in 0..200 {
            if best_value >= (1.0 - eps) * upper || lo >= (1.0 - eps / 2.0) * hi {
                break;
            }
            // the degree bound itself first: it is often the answer
            let tau = if step == 0 { hi } else { (lo + hi) / 2.0 };
            let out = almost.route(&AlmostRouteInput { graph: g, residual: &residual, s, t, eps: route_eps, tau, family })?;
            calls += 1;
            match out {
                AlmostRouteOutput::Cut { value, .. } => {
                    hi = tau.min(hi);
                    upper = upper.min(value);
                }
                AlmostRouteOutput::Flow { mut flow, mut residual_demand } => {
                    lo = tau;
                    h.balance_top(&mut residual_demand, 1e-9 * tau);
                    let r = h.route_scaled(g, &residual_demand)?;
                    flow.add_scaled(&r.flow, 1.0);
                    let cong = flow.congestion(g).max(1.0);
                    if tau / cong > best_value {
                        flow.scale(1.0 / cong);
                        best_value = tau / cong;
                        best_flow = flow;
                    }
                }
            }
        }
        if best_value >= (1.0 - eps) * upper {
            break;
        }
        route_eps /= 4.0;
    }
    Ok(ApproxMaxFlow {
        value: best_value,
        flow: best_flow,
        upper_bound: upper,
        certified: best_value >= (1.0 - eps) * upper * (1.0 - 1e-12),
        almost_calls: calls,
        route_eps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators;

    fn singletons(g: &CapGraph) -> LaminarFamily {
        LaminarFamily::new(g, (0..g.n()).map(|v| vec![v]).collect()).unwrap()
    }

    #[test]
    fn zero_tau_routes_nothing() {
        let g = generators::path(3);
        let r = Residual::full(&g);
        let fam = singletons(&g);
        let inp = AlmostRouteInput { graph: &g, residual: &r, s: 0, t: 2, eps: 0.1, tau: 0.0, family: &fam };
        for out in [ExactRouter.route(&inp).unwrap(), SoftmaxRouter::default().route(&inp).unwrap()] {
            match out {
                AlmostRouteOutput::Flow { flow, .. } => assert!(flow.is_zero()),
                _ => panic!("expected a flow"),
            }
        }
    }

    #[test]
    fn single_edge_cut_below_tau() {
        let g = generators::path(2);
        let r = Residual::full(&g);
        let fam = singletons(&g);
        let inp = AlmostRouteInput { graph: &g, residual: &r, s: 0, t: 1, eps: 0.1, tau: 2.0, family: &fam };
        assert_eq!(ExactRouter.route(&inp).unwrap(), AlmostRouteOutput::Cut { side: vec![true, false], value: 1.0 });
        match SoftmaxRouter::default().route(&inp).unwrap() {
            AlmostRouteOutput::Cut { value, .. } => assert_eq!(value, 1.0),
            AlmostRouteOutput::Flow { residual_demand, .. } => assert!(residual_demand[0] <= 0.1 + 1e-9),
        }
    }

    #[test]
    fn softmax_routes_on_clique() {
        let g = generators::complete(6);
        let r = Residual::full(&g);
        let fam = singletons(&g);
        let inp = AlmostRouteInput { graph: &g, residual: &r, s: 0, t: 5, eps: 0.1, tau: 3.0, family: &fam };
        let out = SoftmaxRouter::default().route(&inp).unwrap();
        verify_almost_route(&inp, &out).unwrap();
        assert!(matches!(out, AlmostRouteOutput::Flow { .. }));
    }
}
