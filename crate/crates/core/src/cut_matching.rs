//! Warm-started cut-matching game with deletions.
//!
//! Each round projects the implicit flow matrix onto a random direction,
//! splits every active component into a light side `L` (an eighth of its
//! weight) and the rest, and asks a matching oracle to route `L` into `R`
//! inside the component. The oracle may return sparse cuts, which split
//! the component; under-matched sources are deleted. The flow matrix is
//! never materialised: projections and mixing routings replay the stored
//! matchings.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{brute_progress_set, exact_max_flow, FlowInstance, ProgressCase};
use crate::generators;
use crate::graph::{CapGraph, Edge, FlowAssignment, VertexPartition};
use crate::paths::{add_path, path_decompose, Path};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PotentialMode {
    Off,
    /// Materialise F after every round and record ψ (n ≤ 512).
    Explicit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutMatchingConfig {
    pub phi: f64,
    pub eps1: f64,
    pub rounds: usize,
    pub x_max: f64,
    pub c_conc: f64,
    pub seed: u64,
    pub potential_mode: PotentialMode,
    /// Worker threads for per-component oracle calls; 0 or 1 is serial.
    pub threads: usize,
}

impl CutMatchingConfig {
    /// Desk-scale defaults: `T = 10 log n log nW`, `x_max = 8 log n log nW`,
    /// `ε₁ = 1/(4⌈log nW⌉²)`.
    pub fn defaults(g: &CapGraph, phi: f64) -> Self {
        let l2n = (g.n().max(2) as f64).log2();
        let lnw = g.log_nw();
        CutMatchingConfig {
            phi,
            eps1: 1.0 / (4.0 * lnw.ceil().powi(2)),
            rounds: (10.0 * l2n * lnw).ceil().max(1.0) as usize,
            x_max: 8.0 * l2n * lnw,
            c_conc: 4.0,
            seed: 0,
            potential_mode: PotentialMode::Off,
            threads: 0,
        }
    }

    /// Counter threshold with the literal constant `10⁵·C`.
    pub fn strict_constants(mut self, g: &CapGraph) -> Self {
        let l2n = (g.n().max(2) as f64).log2();
        self.x_max = 1e5 * self.c_conc * l2n * g.log_nw();
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.phi > 0.0 && self.phi.is_finite()) {
            return Err(Error::Input(format!("phi = {} must be positive", self.phi)));
        }
        if !(self.eps1 > 0.0 && self.eps1 < 0.5) {
            return Err(Error::Input(format!("eps1 = {} must lie in (0, 1/2)", self.eps1)));
        }
        if self.rounds == 0 {
            return Err(Error::Input("round budget T must be at least 1".into()));
        }
        if !(self.x_max >= 0.0) {
            return Err(Error::Input("x_max must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub vertices: Vec<usize>,
    pub active: bool,
    pub counter: u64,
}

/// One oracle-certified cut inside a component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutRecord {
    pub component: Vec<usize>,
    pub cut: Vec<usize>,
    pub capacity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub t: usize,
    /// Aggregated `M_t(u, w)` with `u` the source side.
    pub matching: Vec<(usize, usize, f64)>,
    /// Flow paths in `G` that induce the matching.
    pub paths: Vec<Path>,
    pub cuts: Vec<CutRecord>,
    /// `d_{t-1}` weight of the components the oracle covered, and of all active ones.
    pub covered_weight: f64,
    pub active_weight: f64,
    /// `Σ_{A∈A'} d_{t-1}(C_A)`.
    pub charge: f64,
    pub cut_capacity: f64,
    pub slack: f64,
    /// Vertices zeroed this round, by the matching rule and by the mass rule.
    pub deleted_matching: Vec<usize>,
    pub deleted_mass: Vec<usize>,
    pub potential_before: f64,
    pub potential_after: f64,
    pub covered_half: bool,
    /// Congestion in `G` of the flow inducing `M_t`.
    pub congestion: f64,
    pub psi: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutMatchingState {
    pub t: usize,
    pub d: Vec<f64>,
    pub d_t: Vec<f64>,
    pub components: Vec<Component>,
    pub rounds: Vec<RoundRecord>,
    pub x_max: f64,
    pub psi0: Option<f64>,
}

impl CutMatchingState {
    pub fn new(d: &[f64], x_max: f64) -> Self {
        let n = d.len();
        let support = d.iter().filter(|&&x| x > 0.0).count();
        let components = if n == 0 {
            Vec::new()
        } else {
            vec![Component { vertices: (0..n).collect(), active: support >= 2, counter: 0 }]
        };
        CutMatchingState { t: 0, d: d.to_vec(), d_t: d.to_vec(), components, rounds: Vec::new(), x_max, psi0: None }
    }

    pub fn partition(&self) -> VertexPartition {
        let n = self.d.len();
        VertexPartition::new(n, self.components.iter().map(|c| c.vertices.clone()).collect())
            .expect("components partition V")
    }

    pub fn active_weight(&self) -> f64 {
        self.components.iter().filter(|c| c.active).map(|c| weight(&self.d_t, &c.vertices)).sum()
    }

    /// `Σ_{A active} (⌊x_max⌋ − x^A)·d_t(A)`.
    pub fn counter_potential(&self) -> f64 {
        let cap = self.x_max.floor();
        self.components
            .iter()
            .filter(|c| c.active)
            .map(|c| (cap - c.counter as f64).max(0.0) * weight(&self.d_t, &c.vertices))
            .sum()
    }

    pub fn deleted(&self) -> Vec<usize> {
        (0..self.d.len()).filter(|&v| self.d_t[v] == 0.0 && self.d[v] > 0.0).collect()
    }

    pub fn deleted_demand(&self) -> f64 {
        self.d.iter().sum::<f64>() - self.d_t.iter().sum::<f64>()
    }

    pub fn all_inactive(&self) -> bool {
        self.components.iter().all(|c| !c.active)
    }
}

fn weight(d: &[f64], set: &[usize]) -> f64 {
    set.iter().map(|&v| d[v]).sum()
}

/// Threshold split of one active component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutStep {
    pub component: usize,
    pub l: Vec<usize>,
    pub r: Vec<usize>,
    pub eta: f64,
    /// Vertices of `L` certifying progress, and whether the two conditions held.
    pub s: Vec<usize>,
    pub ok: bool,
    pub case: ProgressCase,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionRound {
    pub r: Vec<f64>,
    pub p: Vec<f64>,
    pub steps: Vec<CutStep>,
}

pub fn random_unit_vector(n: usize, rng: &mut impl Rng) -> Vec<f64> {
    if n == 0 {
        return Vec::new();
    }
    loop {
        let r: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let norm = r.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            return r.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// `p(u) = ⟨F_{t-1}(u)/d(u), r⟩` by replaying the recorded matchings on
/// `q = F·r`; vertices with `d(u) = 0` get 0.
pub fn compute_projections(state: &CutMatchingState, r: &[f64]) -> Vec<f64> {
    let d = &state.d;
    let mut q: Vec<f64> = d.iter().zip(r).map(|(a, b)| a * b).collect();
    for rec in &state.rounds {
        q = apply_matching(&q, d, &rec.matching);
    }
    q.iter().zip(d).map(|(x, &w)| if w > 0.0 { x / w } else { 0.0 }).collect()
}

/// One step of the row recursion applied to a vector of row functionals.
fn apply_matching(q: &[f64], d: &[f64], matching: &[(usize, usize, f64)]) -> Vec<f64> {
    let mut next = q.to_vec();
    for &(u, w, m) in matching {
        let diff = q[w] / d[w] - q[u] / d[u];
        next[u] += 0.5 * m * diff;
        next[w] -= 0.5 * m * diff;
    }
    next
}

pub fn cut_step(state: &CutMatchingState, p: &[f64], component: usize) -> Result<CutStep> {
    let comp = &state.components[component];
    let live: Vec<usize> = comp.vertices.iter().copied().filter(|&v| state.d_t[v] > 0.0).collect();
    if live.len() < 2 {
        return Err(Error::Contract(format!("component {component} has support below 2")));
    }
    let items: Vec<(f64, f64)> = live.iter().map(|&v| (p[v], state.d_t[v])).collect();
    let ps = brute_progress_set(&items)?;
    let map = |ix: &[usize]| -> Vec<usize> {
        let mut v: Vec<usize> = ix.iter().map(|&i| live[i]).collect();
        v.sort_unstable();
        v
    };
    Ok(CutStep { component, l: map(&ps.l), r: map(&ps.r), eta: ps.eta, s: map(&ps.s), ok: ps.ok, case: ps.case })
}

/// Flow problem of one active component: its induced subgraph with
/// capacities scaled by `2/φ`, sources on `L`, sinks on `R`.
#[derive(Debug, Clone)]
pub struct SubInstance {
    pub component: usize,
    pub vertices: Vec<usize>,
    pub flow: FlowInstance,
    /// Local edge id → edge id in `G`.
    pub edge_map: Vec<usize>,
    pub l: Vec<usize>,
    pub r: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct MatchingInstance {
    pub subs: Vec<SubInstance>,
    pub source: Vec<f64>,
    pub sink: Vec<f64>,
    pub d_prev: Vec<f64>,
    pub d: Vec<f64>,
    pub phi: f64,
    pub eps1: f64,
    pub comp_of: Vec<usize>,
}

impl MatchingInstance {
    /// The whole instance as one graph on V: intercomponent edges removed,
    /// the rest scaled by 2/φ. Returns the graph and its G edge ids.
    pub fn global_graph(&self, g: &CapGraph) -> (CapGraph, Vec<usize>) {
        let mut edges = Vec::new();
        let mut map = Vec::new();
        for (id, e) in g.edges().iter().enumerate() {
            if self.comp_of[e.u] == self.comp_of[e.v] {
                edges.push(Edge { cap: e.cap * 2.0 / self.phi, ..*e });
                map.push(id);
            }
        }
        (CapGraph::from_real(g.n(), edges).expect("subgraph"), map)
    }
}

/// Induced subgraph on `vertices` with capacities multiplied by `scale`.
pub fn induced(g: &CapGraph, vertices: &[usize], scale: f64) -> (CapGraph, Vec<usize>) {
    let mut local = vec![usize::MAX; g.n()];
    for (i, &v) in vertices.iter().enumerate() {
        local[v] = i;
    }
    let mut edges = Vec::new();
    let mut map = Vec::new();
    for (id, e) in g.edges().iter().enumerate() {
        if local[e.u] != usize::MAX && local[e.v] != usize::MAX {
            edges.push(Edge { u: local[e.u], v: local[e.v], cap: e.cap * scale });
            map.push(id);
        }
    }
    (CapGraph::from_real(vertices.len(), edges).expect("induced subgraph"), map)
}

pub fn build_matching_instance(
    g: &CapGraph,
    state: &CutMatchingState,
    steps: &[CutStep],
    phi: f64,
    eps1: f64,
) -> MatchingInstance {
    let n = g.n();
    let mut comp_of = vec![usize::MAX; n];
    for (i, c) in state.components.iter().enumerate() {
        for &v in &c.vertices {
            comp_of[v] = i;
        }
    }
    let mut source = vec![0.0; n];
    let mut sink = vec![0.0; n];
    let mut subs = Vec::new();
    for st in steps {
        let vertices = state.components[st.component].vertices.clone();
        let (sub, edge_map) = induced(g, &vertices, 2.0 / phi);
        let mut local = BTreeMap::new();
        for (i, &v) in vertices.iter().enumerate() {
            local.insert(v, i);
        }
        let mut s = vec![0.0; vertices.len()];
        let mut t = vec![0.0; vertices.len()];
        for &v in &st.l {
            s[local[&v]] = state.d_t[v];
            source[v] = state.d_t[v];
        }
        // The straddling vertex is a source only for its share of the
        // ⌈d(A)/8⌉ target; a whole heavy vertex could outweigh R.
        let da = weight(&state.d_t, &vertices);
        let dl = weight(&state.d_t, &st.l);
        if dl > (da / 8.0).ceil() {
            let heavy = st.l.iter().copied().max_by(|&a, &b| state.d_t[a].total_cmp(&state.d_t[b]).then(b.cmp(&a)));
            if let Some(u) = heavy {
                let share = (da / 8.0).ceil() - (dl - state.d_t[u]);
                if share > 0.0 && share < state.d_t[u] {
                    s[local[&u]] = share;
                    source[u] = share;
                }
            }
        }
        for &v in &st.r {
            t[local[&v]] = state.d_t[v];
            sink[v] = state.d_t[v];
        }
        subs.push(SubInstance {
            component: st.component,
            vertices,
            flow: FlowInstance { graph: sub, source: s, sink: t },
            edge_map,
            l: st.l.clone(),
            r: st.r.clone(),
        });
    }
    MatchingInstance { subs, source, sink, d_prev: state.d_t.clone(), d: state.d.clone(), phi, eps1, comp_of }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentOutcome {
    pub component: usize,
    /// Whether the component is in `A'`.
    pub in_prime: bool,
    pub cut: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchingOracleResult {
    pub outcomes: Vec<ComponentOutcome>,
    /// Source-to-sink paths in `G` (edge ids of `G`).
    pub paths: Vec<Path>,
    /// The ε the oracle certifies the routing clause with.
    pub slack: f64,
    /// The ε of the cut clause.
    pub cut_slack: f64,
}

pub trait MatchingOracle {
    fn solve(&mut self, g: &CapGraph, inst: &MatchingInstance) -> Result<MatchingOracleResult>;
}

/// Exact max flow per component. The cut is the minimal source side of a
/// minimum cut, and every path of the flow's decomposition is kept.
#[derive(Debug, Clone, Default)]
pub struct ExactMatchingOracle {
    pub threads: usize,
}

impl ExactMatchingOracle {
    fn solve_one(sub: &SubInstance, d_prev: &[f64]) -> Result<(ComponentOutcome, Vec<Path>)> {
        let res = exact_max_flow(&sub.flow)?;
        let dec = path_decompose(&sub.flow.graph, &res.flow, &sub.flow.source, &sub.flow.sink)?;
        let cut: Vec<usize> =
            sub.vertices.iter().enumerate().filter(|&(i, _)| res.mincut[i]).map(|(_, &v)| v).collect();
        let da = weight(d_prev, &sub.vertices);
        let dc = weight(d_prev, &cut);
        let sink_in_cut: f64 = sub.flow.sink.iter().zip(&res.mincut).filter(|(_, &m)| m).map(|(x, _)| x).sum();
        let in_prime = dc <= da / 2.0 * (1.0 + 1e-12) && sink_in_cut < da / 3.0;
        let paths = dec
            .paths
            .into_iter()
            .map(|p| Path {
                vertices: p.vertices.iter().map(|&v| sub.vertices[v]).collect(),
                edges: p.edges.iter().map(|&(e, f)| (sub.edge_map[e], f)).collect(),
                weight: p.weight,
            })
            .collect();
        Ok((ComponentOutcome { component: sub.component, in_prime, cut: if in_prime { cut } else { Vec::new() } }, paths))
    }
}

impl MatchingOracle for ExactMatchingOracle {
    fn solve(&mut self, _g: &CapGraph, inst: &MatchingInstance) -> Result<MatchingOracleResult> {
        let results: Vec<Result<(ComponentOutcome, Vec<Path>)>> = if self.threads > 1 && inst.subs.len() > 1 {
            let chunk = inst.subs.len().div_ceil(self.threads);
            std::thread::scope(|scope| {
                let handles: Vec<_> = inst
                    .subs
                    .chunks(chunk)
                    .map(|part| scope.spawn(move || part.iter().map(|s| Self::solve_one(s, &inst.d_prev)).collect::<Vec<_>>()))
                    .collect();
                handles.into_iter().flat_map(|h| h.join().expect("oracle worker panicked")).collect()
            })
        } else {
            inst.subs.iter().map(|s| Self::solve_one(s, &inst.d_prev)).collect()
        };
        let mut outcomes = Vec::new();
        let mut paths = Vec::new();
        for r in results {
            let (o, p) = r?;
            outcomes.push(o);
            paths.extend(p);
        }
        Ok(MatchingOracleResult { outcomes, paths, slack: 0.0, cut_slack: 0.0 })
    }
}

/// Checks the oracle result against the contract and applies one round of
/// the algorithm: deletions, splits, counters, the mass rule and
/// inactivation.
pub fn apply_round(
    g: &CapGraph,
    state: &mut CutMatchingState,
    inst: &MatchingInstance,
    res: &MatchingOracleResult,
    eps1: f64,
) -> Result<()> {
    let n = g.n();
    let d_total: f64 = state.d.iter().sum();
    let _ = eps1;
    let slack = res.slack.max(0.0);
    let tol = 1e-9 * d_total.max(1.0);
    let potential_before = state.counter_potential();

    let mut by_comp: BTreeMap<usize, &ComponentOutcome> = BTreeMap::new();
    for o in &res.outcomes {
        if by_comp.insert(o.component, o).is_some() {
            return Err(Error::Contract(format!("oracle returned component {} twice", o.component)));
        }
    }
    for sub in &inst.subs {
        if !by_comp.contains_key(&sub.component) {
            return Err(Error::Contract(format!("oracle skipped active component {}", sub.component)));
        }
    }

    // Paths: source to sink inside one component, along kept edges.
    let mut flow = FlowAssignment::zero(g.m());
    let mut routed = vec![0.0; n];
    let mut pairs: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for p in &res.paths {
        if p.weight < 0.0 {
            return Err(Error::Contract("negative path weight".into()));
        }
        let (u, w) = (p.start(), p.end());
        let c = inst.comp_of[u];
        if inst.source[u] <= 0.0 || inst.sink[w] <= 0.0 || inst.comp_of[w] != c {
            return Err(Error::Contract(format!("path {u} -> {w} does not join L to R in one component")));
        }
        if p.vertices.iter().any(|&v| inst.comp_of[v] != c) {
            return Err(Error::Contract(format!("path {u} -> {w} leaves its component")));
        }
        add_path(&mut flow, p, p.weight);
        routed[u] += p.weight;
        if p.weight > 0.0 {
            *pairs.entry((u, w)).or_insert(0.0) += p.weight;
        }
    }
    let congestion = flow.congestion(g);
    if congestion > 2.0 / inst.phi * (1.0 + 1e-9) {
        return Err(Error::Contract(format!(
            "matching flow has congestion {congestion} above 2/phi = {}",
            2.0 / inst.phi
        )));
    }
    for v in 0..n {
        if routed[v] > inst.source[v] + tol {
            return Err(Error::Contract(format!("vertex {v} sends {} above its source {}", routed[v], inst.source[v])));
        }
    }
    let mut received = vec![0.0; n];
    for (&(_, w), &m) in &pairs {
        received[w] += m;
    }
    for v in 0..n {
        if received[v] > inst.sink[v] + tol {
            return Err(Error::Contract(format!("vertex {v} absorbs {} above its sink {}", received[v], inst.sink[v])));
        }
    }

    // Oracle clauses.
    let mut covered = 0.0;
    let mut active_w = 0.0;
    let mut charge = 0.0;
    let mut cut_capacity = 0.0;
    let mut cuts = Vec::new();
    for sub in &inst.subs {
        let o = by_comp[&sub.component];
        let da = weight(&inst.d_prev, &sub.vertices);
        active_w += da;
        if !o.in_prime {
            if !o.cut.is_empty() {
                return Err(Error::Contract(format!("component {} outside A' carries a cut", sub.component)));
            }
            continue;
        }
        covered += da;
        let mut in_a = vec![false; n];
        for &v in &sub.vertices {
            in_a[v] = true;
        }
        let mut in_c = vec![false; n];
        for &v in &o.cut {
            if !in_a[v] {
                return Err(Error::Contract(format!("cut vertex {v} outside its component")));
            }
            in_c[v] = true;
        }
        let dc = weight(&inst.d_prev, &o.cut);
        if dc > da / 2.0 + tol {
            return Err(Error::Contract(format!(
                "clause 1: d(C_A) = {dc} exceeds d(A)/2 = {} in component {}",
                da / 2.0,
                sub.component
            )));
        }
        let cap: f64 = g
            .edges()
            .iter()
            .filter(|e| in_a[e.u] && in_a[e.v] && in_c[e.u] != in_c[e.v])
            .map(|e| e.cap)
            .sum();
        charge += dc;
        cut_capacity += cap;
        let src_rest: f64 = sub.l.iter().filter(|&&v| !in_c[v]).map(|&v| inst.source[v]).sum();
        let routed_rest: f64 = sub.l.iter().filter(|&&v| !in_c[v]).map(|&v| routed[v]).sum();
        let da_orig = weight(&inst.d, &sub.vertices);
        if routed_rest < src_rest - 2.0 * slack * da_orig - tol {
            return Err(Error::Contract(format!(
                "clause 2: routed {routed_rest} of {src_rest} source outside the cut in component {}",
                sub.component
            )));
        }
        if !o.cut.is_empty() {
            cuts.push(CutRecord { component: sub.vertices.clone(), cut: o.cut.clone(), capacity: cap });
        }
    }
    if cut_capacity > inst.phi / 2.0 * charge + 2.0 * res.cut_slack.max(0.0) * d_total + tol {
        return Err(Error::Contract(format!(
            "clause 1: cut capacity {cut_capacity} exceeds (phi/2)*{charge} + 2*eps*d(V)"
        )));
    }
    let covered_half = covered >= active_w / 2.0 - tol;
    if !covered_half {
        return Err(Error::Contract(format!("coverage {covered} below half of active weight {active_w}")));
    }

    // Deletions of under-matched sources.
    let mut deleted_matching = Vec::new();
    for sub in &inst.subs {
        let o = by_comp[&sub.component];
        if !o.in_prime {
            continue;
        }
        let in_c: std::collections::BTreeSet<usize> = o.cut.iter().copied().collect();
        for &u in &sub.l {
            if !in_c.contains(&u) && routed[u] < inst.source[u].min(state.d[u]) / 2.0 {
                state.d_t[u] = 0.0;
                deleted_matching.push(u);
            }
        }
    }

    // New components, counters, the mass rule and inactivation.
    let x_max = state.x_max;
    let mut next = Vec::new();
    let mut deleted_mass = Vec::new();
    let sub_of: BTreeMap<usize, usize> = inst.subs.iter().enumerate().map(|(i, s)| (s.component, i)).collect();
    for (ci, comp) in state.components.iter().enumerate() {
        if !comp.active {
            next.push(comp.clone());
            continue;
        }
        let o = sub_of.get(&ci).map(|&i| by_comp[&inst.subs[i].component]);
        let (in_prime, cut) = match o {
            Some(o) => (o.in_prime, o.cut.clone()),
            None => (false, Vec::new()),
        };
        let in_c: std::collections::BTreeSet<usize> = cut.iter().copied().collect();
        let rest: Vec<usize> = comp.vertices.iter().copied().filter(|v| !in_c.contains(v)).collect();
        for part in [rest, cut] {
            if part.is_empty() {
                continue;
            }
            let counter = comp.counter + u64::from(in_prime);
            let dt = weight(&state.d_t, &part);
            let dd = weight(&state.d, &part);
            if dt <= 15.0 * dd / 16.0 {
                for &u in &part {
                    if state.d_t[u] > 0.0 {
                        deleted_mass.push(u);
                    }
                    state.d_t[u] = 0.0;
                }
            }
            let dt = weight(&state.d_t, &part);
            let support = part.iter().filter(|&&u| state.d_t[u] > 0.0).count();
            let active = !(dt == 0.0 || counter as f64 > x_max || support == 1);
            next.push(Component { vertices: part, active, counter });
        }
    }
    state.components = next;
    state.t += 1;
    let potential_after = state.counter_potential();
    let mut matching: Vec<(usize, usize, f64)> = pairs.into_iter().map(|((u, w), m)| (u, w, m)).collect();
    matching.retain(|x| x.2 > 0.0);
    state.rounds.push(RoundRecord {
        t: state.t,
        matching,
        paths: res.paths.clone(),
        cuts,
        covered_weight: covered,
        active_weight: active_w,
        charge,
        cut_capacity,
        slack,
        deleted_matching,
        deleted_mass,
        potential_before,
        potential_after,
        covered_half,
        congestion,
        psi: None,
    });
    Ok(())
}

/// Final output of the game.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeakDecomposition {
    pub partition: VertexPartition,
    pub d_t: Vec<f64>,
    pub state: CutMatchingState,
    pub config: CutMatchingConfig,
    /// Cut steps where the progress conditions could not be met.
    pub progress_failures: usize,
}

impl WeakDecomposition {
    pub fn intercluster_capacity(&self, g: &CapGraph) -> f64 {
        g.edges()
            .iter()
            .filter(|e| self.partition.block_of[e.u] != self.partition.block_of[e.v])
            .fold(0.0, |acc, e| acc + e.cap)
    }
}

pub fn run_decomposition(
    g: &CapGraph,
    d: &[f64],
    config: &CutMatchingConfig,
    oracle: &mut dyn MatchingOracle,
) -> Result<WeakDecomposition> {
    config.validate()?;
    if d.len() != g.n() {
        return Err(Error::Structure("weighting length does not match graph".into()));
    }
    if d.iter().any(|x| !(*x >= 0.0 && x.is_finite())) {
        return Err(Error::Input("vertex weights must be finite and non-negative".into()));
    }
    let mut state = CutMatchingState::new(d, config.x_max);
    let explicit = config.potential_mode == PotentialMode::Explicit;
    if explicit {
        state.psi0 = Some(total_psi(&state)?);
    }
    let mut rng = generators::rng(config.seed);
    let mut failures = 0;
    for _ in 0..config.rounds {
        if state.all_inactive() {
            break;
        }
        let r = random_unit_vector(g.n(), &mut rng);
        let p = compute_projections(&state, &r);
        let mut steps = Vec::new();
        for (i, c) in state.components.iter().enumerate() {
            if c.active {
                let st = cut_step(&state, &p, i)?;
                failures += usize::from(!st.ok);
                steps.push(st);
            }
        }
        let inst = build_matching_instance(g, &state, &steps, config.phi, config.eps1);
        let res = oracle.solve(g, &inst)?;
        apply_round(g, &mut state, &inst, &res, config.eps1)?;
        if explicit {
            let psi = total_psi(&state)?;
            state.rounds.last_mut().expect("round recorded").psi = Some(psi);
        }
    }
    Ok(WeakDecomposition {
        partition: state.partition(),
        d_t: state.d_t.clone(),
        state,
        config: config.clone(),
        progress_failures: failures,
    })
}

/// Multicommodity routing, one flow per demand.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MixingRouting {
    pub flows: Vec<FlowAssignment>,
    /// Congestion of all commodities together.
    pub congestion: f64,
    /// Part of the congestion coming from the replayed matchings.
    pub matching_congestion: f64,
    /// Largest `|excess − b|` over commodities and vertices.
    pub conservation_error: f64,
}

/// Routes demands `b_i`, each supported on one final component with
/// `|b_i| ≤ d_T` and zero sum, by replaying the matchings in reverse and
/// sending the leftover over a BFS spanning forest.
pub fn route_respecting_demands(g: &CapGraph, state: &CutMatchingState, demands: &[Vec<f64>]) -> Result<MixingRouting> {
    let n = g.n();
    let d = &state.d;
    let d_total: f64 = d.iter().sum();
    let part = state.partition();
    let tol = 1e-9 * d_total.max(1.0);
    for (i, b) in demands.iter().enumerate() {
        if b.len() != n {
            return Err(Error::Structure(format!("demand {i} has the wrong length")));
        }
        let supp: Vec<usize> = (0..n).filter(|&v| b[v] != 0.0).collect();
        if let Some(&v0) = supp.first() {
            let blk = part.block_of[v0];
            if supp.iter().any(|&v| part.block_of[v] != blk) {
                return Err(Error::Input(format!("demand {i} spans several components")));
            }
            if let Some(&v) = supp.iter().find(|&&v| b[v].abs() > state.d_t[v] + tol) {
                return Err(Error::Input(format!("demand {i} exceeds d_T at vertex {v}")));
            }
            let s: f64 = b.iter().sum();
            if s.abs() > tol {
                return Err(Error::Input(format!("demand {i} sums to {s}")));
            }
        }
    }
    let tree = SpanningForest::new(g);
    let mut flows = Vec::with_capacity(demands.len());
    let mut load_match = vec![0.0; g.m()];
    let mut conservation_error: f64 = 0.0;
    for b in demands {
        let mut f = FlowAssignment::zero(g.m());
        if b.iter().all(|x| *x == 0.0) {
            flows.push(f);
            continue;
        }
        let mut z: Vec<f64> = (0..n).map(|v| if d[v] > 0.0 { b[v] / d[v] } else { 0.0 }).collect();
        for rec in state.rounds.iter().rev() {
            for p in &rec.paths {
                let (u, w) = (p.start(), p.end());
                let amt = 0.5 * p.weight * (z[u] - z[w]);
                if amt != 0.0 {
                    add_path(&mut f, p, amt);
                }
            }
            let mut next = z.clone();
            for &(u, w, m) in &rec.matching {
                next[u] += m / (2.0 * d[u]) * (z[w] - z[u]);
                next[w] += m / (2.0 * d[w]) * (z[u] - z[w]);
            }
            z = next;
        }
        for (l, x) in load_match.iter_mut().zip(&f.f) {
            *l += x.abs();
        }
        let y: Vec<f64> = (0..n).map(|v| z[v] * d[v]).collect();
        tree.route(g, &y, &mut f)?;
        let ex = f.excess(g);
        for v in 0..n {
            conservation_error = conservation_error.max((ex[v] - b[v]).abs());
        }
        flows.push(f);
    }
    let congestion = crate::graph::total_congestion(g, &flows);
    let matching_congestion = load_match.iter().zip(g.edges()).map(|(l, e)| l / e.cap).fold(0.0, f64::max);
    Ok(MixingRouting { flows, congestion, matching_congestion, conservation_error })
}

/// Deterministic BFS spanning forest rooted at the lowest vertex of each
/// connected component.
#[derive(Debug, Clone)]
pub struct SpanningForest {
    order: Vec<usize>,
    parent_edge: Vec<Option<(usize, usize)>>,
}

impl SpanningForest {
    pub fn new(g: &CapGraph) -> Self {
        let n = g.n();
        let mut seen = vec![false; n];
        let mut order = Vec::with_capacity(n);
        let mut parent_edge = vec![None; n];
        for root in 0..n {
            if seen[root] {
                continue;
            }
            seen[root] = true;
            let start = order.len();
            order.push(root);
            let mut head = start;
            while head < order.len() {
                let v = order[head];
                head += 1;
                for &(w, id) in g.neighbors(v) {
                    if !seen[w] {
                        seen[w] = true;
                        parent_edge[w] = Some((v, id));
                        order.push(w);
                    }
                }
            }
        }
        SpanningForest { order, parent_edge }
    }

    /// Adds to `f` a tree flow with net outflow `y`.
    pub fn route(&self, g: &CapGraph, y: &[f64], f: &mut FlowAssignment) -> Result<()> {
        let mut acc = y.to_vec();
        let scale = y.iter().map(|x| x.abs()).sum::<f64>().max(1e-300);
        for &v in self.order.iter().rev() {
            match self.parent_edge[v] {
                Some((p, id)) => {
                    let s = acc[v];
                    f.f[id] += if g.edge(id).u == v { s } else { -s };
                    acc[p] += s;
                }
                None => {
                    if acc[v].abs() > 1e-7 * scale.max(1.0) {
                        return Err(Error::Contract(format!(
                            "residual of {} left at root {v}: demand unbalanced on a connected piece",
                            acc[v]
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// `F_t` materialised from the recorded matchings.
pub fn explicit_flow_matrix(state: &CutMatchingState, t: usize) -> Result<Vec<Vec<f64>>> {
    let n = state.d.len();
    if n > 512 {
        return Err(Error::TooLarge(format!("{n} vertices, explicit mode allows 512")));
    }
    let d = &state.d;
    let mut f: Vec<Vec<f64>> = (0..n)
        .map(|u| {
            let mut row = vec![0.0; n];
            row[u] = d[u];
            row
        })
        .collect();
    for rec in state.rounds.iter().take(t) {
        let mut next = f.clone();
        for &(u, w, m) in &rec.matching {
            for k in 0..n {
                let diff = f[w][k] / d[w] - f[u][k] / d[u];
                next[u][k] += 0.5 * m * diff;
                next[w][k] -= 0.5 * m * diff;
            }
        }
        f = next;
    }
    Ok(f)
}

/// `d_t` after `t` rounds, rebuilt from the deletion records.
pub fn weighting_at(state: &CutMatchingState, t: usize) -> Vec<f64> {
    let mut dt = state.d.clone();
    for rec in state.rounds.iter().take(t) {
        for &v in rec.deleted_matching.iter().chain(&rec.deleted_mass) {
            dt[v] = 0.0;
        }
    }
    dt
}

/// `ψ_t(A) = d_t(A) Σ_{u∈A°} d(u) ‖F_t(u)/d(u) − μ‖²`.
pub fn potential_psi(state: &CutMatchingState, t: usize, a: &[usize]) -> Result<f64> {
    let f = explicit_flow_matrix(state, t)?;
    let dt = weighting_at(state, t);
    Ok(psi_of(&f, &state.d, &dt, a))
}

fn psi_of(f: &[Vec<f64>], d: &[f64], dt: &[f64], a: &[usize]) -> f64 {
    let n = d.len();
    let live: Vec<usize> = a.iter().copied().filter(|&u| dt[u] > 0.0).collect();
    let dta: f64 = live.iter().map(|&u| dt[u]).sum();
    if live.is_empty() || dta == 0.0 {
        return 0.0;
    }
    let mut mu = vec![0.0; n];
    for &u in &live {
        for k in 0..n {
            mu[k] += f[u][k];
        }
    }
    for x in &mut mu {
        *x /= dta;
    }
    let s: f64 = live
        .iter()
        .map(|&u| d[u] * (0..n).map(|k| (f[u][k] / d[u] - mu[k]).powi(2)).sum::<f64>())
        .sum();
    dta * s
}

fn total_psi(state: &CutMatchingState) -> Result<f64> {
    let f = explicit_flow_matrix(state, state.t)?;
    Ok(state.components.iter().map(|c| psi_of(&f, &state.d, &state.d_t, &c.vertices)).sum())
}
