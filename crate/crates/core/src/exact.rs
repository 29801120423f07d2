//! Exact max flow (Dinic), exact minimum-congestion routing, and the
//! brute-force checkers the test suite leans on.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{CapGraph, FlowAssignment, REL_TOL};

/// Directed residual network with arcs stored in pairs (`a`, `a ^ 1`).
#[derive(Debug, Clone)]
pub struct Network {
    n: usize,
    head: Vec<usize>,
    to: Vec<usize>,
    res: Vec<f64>,
    base: Vec<f64>,
    adj: Vec<Vec<usize>>,
    eps: f64,
}

impl Network {
    pub fn new(n: usize) -> Self {
        Network { n, head: Vec::new(), to: Vec::new(), res: Vec::new(), base: Vec::new(), adj: vec![Vec::new(); n], eps: 0.0 }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn add_node(&mut self) -> usize {
        self.adj.push(Vec::new());
        self.n += 1;
        self.n - 1
    }

    /// Adds `u -> v` with capacity `fwd` and `v -> u` with capacity `bwd`;
    /// returns the forward arc id.
    pub fn add_arc(&mut self, u: usize, v: usize, fwd: f64, bwd: f64) -> usize {
        let a = self.to.len();
        self.head.push(u);
        self.to.push(v);
        self.res.push(fwd);
        self.base.push(fwd);
        self.head.push(v);
        self.to.push(u);
        self.res.push(bwd);
        self.base.push(bwd);
        self.adj[u].push(a);
        self.adj[v].push(a + 1);
        self.eps = self.eps.max(1e-11 * fwd.max(bwd));
        a
    }

    /// Net flow pushed along arc `a` (positive in its direction).
    pub fn flow_on(&self, a: usize) -> f64 {
        self.base[a] - self.res[a]
    }

    pub fn residual(&self, a: usize) -> f64 {
        self.res[a]
    }

    fn bfs(&self, s: usize, t: usize, level: &mut [usize]) -> bool {
        level.iter_mut().for_each(|l| *l = usize::MAX);
        level[s] = 0;
        let mut q = VecDeque::from([s]);
        while let Some(v) = q.pop_front() {
            for &a in &self.adj[v] {
                let w = self.to[a];
                if self.res[a] > self.eps && level[w] == usize::MAX {
                    level[w] = level[v] + 1;
                    q.push_back(w);
                }
            }
        }
        level[t] != usize::MAX
    }

    fn dfs(&mut self, v: usize, t: usize, push: f64, level: &[usize], it: &mut [usize]) -> f64 {
        if v == t {
            return push;
        }
        while it[v] < self.adj[v].len() {
            let a = self.adj[v][it[v]];
            let w = self.to[a];
            if self.res[a] > self.eps && level[w] == level[v] + 1 {
                let got = self.dfs(w, t, push.min(self.res[a]), level, it);
                if got > 0.0 {
                    self.res[a] -= got;
                    self.res[a ^ 1] += got;
                    return got;
                }
            }
            it[v] += 1;
        }
        0.0
    }

    /// Pushes up to `limit` units from `s` to `t`.
    pub fn max_flow(&mut self, s: usize, t: usize, limit: f64) -> f64 {
        let mut total = 0.0;
        let mut level = vec![0; self.n];
        while total < limit && self.bfs(s, t, &mut level) {
            let mut it = vec![0; self.n];
            let before = total;
            loop {
                let got = self.dfs(s, t, limit - total, &level, &mut it);
                if got <= self.eps {
                    break;
                }
                total += got;
                if total >= limit {
                    break;
                }
            }
            // a remainder at rounding level is pushable but never counted
            if total == before {
                break;
            }
        }
        total
    }

    /// Vertices reachable from `s` in the residual network (the minimal source side).
    pub fn reachable(&self, s: usize) -> Vec<bool> {
        let mut seen = vec![false; self.n];
        seen[s] = true;
        let mut q = VecDeque::from([s]);
        while let Some(v) = q.pop_front() {
            for &a in &self.adj[v] {
                let w = self.to[a];
                if self.res[a] > self.eps && !seen[w] {
                    seen[w] = true;
                    q.push_back(w);
                }
            }
        }
        seen
    }
}

#[derive(Debug, Clone)]
pub struct FlowInstance {
    pub graph: CapGraph,
    pub source: Vec<f64>,
    pub sink: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MaxFlowResult {
    pub value: f64,
    pub flow: FlowAssignment,
    /// Minimal source side of a minimum cut, over graph vertices.
    pub mincut: Vec<bool>,
    /// Capacity of that cut, including the terminal arcs.
    pub cut_value: f64,
}

/// Loads an undirected graph into a network and returns the arc ids.
pub fn load(g: &CapGraph, extra_nodes: usize) -> (Network, Vec<usize>) {
    let mut net = Network::new(g.n() + extra_nodes);
    let arcs = g.edges().iter().map(|e| net.add_arc(e.u, e.v, e.cap, e.cap)).collect();
    (net, arcs)
}

/// Maximum Δ→∇ flow. A vertex carrying both a source and a sink serves
/// `min(Δ, ∇)` of itself; `value` counts that local part too.
pub fn exact_max_flow(inst: &FlowInstance) -> Result<MaxFlowResult> {
    let g = &inst.graph;
    let n = g.n();
    if inst.source.len() != n || inst.sink.len() != n {
        return Err(Error::Structure("terminal vectors do not match the graph".into()));
    }
    if inst.source.iter().chain(&inst.sink).any(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(Error::Input("terminal values must be finite and non-negative".into()));
    }
    let (mut net, arcs) = load(g, 2);
    let (s, t) = (n, n + 1);
    let mut local = 0.0;
    let mut supply = 0.0;
    let mut src_arcs = Vec::new();
    let mut snk_arcs = Vec::new();
    for v in 0..n {
        let (a, b) = (inst.source[v], inst.sink[v]);
        local += a.min(b);
        let net_v = a - b;
        if net_v > 0.0 {
            src_arcs.push((v, net.add_arc(s, v, net_v, 0.0)));
            supply += net_v;
        } else if net_v < 0.0 {
            snk_arcs.push((v, net.add_arc(v, t, -net_v, 0.0)));
        }
    }
    let routed = net.max_flow(s, t, f64::INFINITY);
    let reach = net.reachable(s);
    let mincut: Vec<bool> = reach[..n].to_vec();
    let mut cut_value = 0.0;
    for e in g.edges() {
        if mincut[e.u] != mincut[e.v] {
            cut_value += e.cap;
        }
    }
    for &(v, a) in &src_arcs {
        if !mincut[v] {
            cut_value += net.base[a];
        }
    }
    for &(v, a) in &snk_arcs {
        if mincut[v] {
            cut_value += net.base[a];
        }
    }
    let _ = supply;
    let flow = FlowAssignment { f: arcs.iter().map(|&a| net.flow_on(a)).collect() };
    Ok(MaxFlowResult { value: routed + local, flow, mincut, cut_value })
}

/// Minimum congestion of a single-commodity flow routing `b`, with a
/// witness flow whose net outflow is `b`.
///
/// Uses Dinkelbach iteration on the cut ratio `b(S)/δS`: each infeasible
/// max-flow test returns a min cut whose ratio is a strictly larger lower
/// bound, and the loop stops at the first feasible value, which is exact.
pub fn min_congestion_route(g: &CapGraph, b: &[f64]) -> Result<(f64, FlowAssignment)> {
    let n = g.n();
    if b.len() != n {
        return Err(Error::Structure("demand length does not match graph".into()));
    }
    let l1: f64 = b.iter().map(|x| x.abs()).sum();
    if l1 == 0.0 {
        return Ok((0.0, FlowAssignment::zero(g.m())));
    }
    let tol = 1e-9 * l1;
    let (comp, k) = g.components();
    let mut per = vec![0.0; k];
    for v in 0..n {
        per[comp[v]] += b[v];
    }
    if let Some(c) = per.iter().position(|x| x.abs() > tol) {
        return Err(Error::Infeasible(format!("demand sums to {} on component {c}", per[c])));
    }
    let supply: f64 = b.iter().filter(|x| **x > 0.0).sum();
    let deg = g.degrees();
    // singleton cuts give the starting lower bound
    let mut kappa = (0..n)
        .filter(|&v| deg[v] > 0.0)
        .map(|v| b[v].abs() / deg[v])
        .fold(0.0f64, f64::max);
    if kappa == 0.0 {
        kappa = supply / g.total_cap();
    }
    for _ in 0..10_000 {
        let scaled = g.scaled(kappa)?;
        let inst = FlowInstance {
            graph: scaled,
            source: b.iter().map(|x| x.max(0.0)).collect(),
            sink: b.iter().map(|x| (-x).max(0.0)).collect(),
        };
        let res = exact_max_flow(&inst)?;
        if res.value >= supply - tol {
            return Ok((kappa, res.flow));
        }
        let side = &res.mincut;
        let bs: f64 = (0..n).filter(|&v| side[v]).map(|v| b[v]).sum();
        let cut = g.cut_capacity(side);
        let next = if cut > 0.0 { bs / cut } else { f64::INFINITY };
        kappa = if next > kappa * (1.0 + 1e-12) && next.is_finite() { next } else { kappa * (1.0 + 1e-8) };
    }
    Err(Error::Unconverged { iterations: 10_000 })
}

/// True iff every `S ⊆ A` has `δ_G(S) ≥ φ · min(d(S), d(A∖S))`, skipping
/// subsets whose denominator vanishes.
pub fn brute_near_expander(g: &CapGraph, d: &[f64], a: &[usize], phi: f64) -> Result<bool> {
    let (ratio, _) = brute_min_ratio(g, d, a)?;
    Ok(ratio >= phi * (1.0 - REL_TOL))
}

/// Minimum of `δ_G(S)/min(d(S), d(A∖S))` over subsets of `A`, with a
/// witness. Returns `+inf` when no subset has a positive denominator.
pub fn brute_min_ratio(g: &CapGraph, d: &[f64], a: &[usize]) -> Result<(f64, Vec<usize>)> {
    let k = a.len();
    if k > 20 {
        return Err(Error::TooLarge(format!("{k} vertices, limit 20")));
    }
    if k < 2 {
        return Ok((f64::INFINITY, Vec::new()));
    }
    let mut pos = vec![usize::MAX; g.n()];
    for (i, &v) in a.iter().enumerate() {
        pos[v] = i;
    }
    let total: f64 = a.iter().map(|&v| d[v]).sum();
    let mut in_s = vec![false; g.n()];
    let mut cut = 0.0;
    let mut ds = 0.0;
    let mut best = (f64::INFINITY, 0u32);
    // Gray code walk, one vertex flip per step; only the half with the top
    // bit clear is needed since S and A∖S give the same ratio.
    let mut mask: u32 = 0;
    for step in 1u32..(1u32 << (k - 1)) {
        let bit = step.trailing_zeros() as usize;
        let v = a[bit];
        let adding = !in_s[v];
        for &(w, id) in g.neighbors(v) {
            let c = g.cap(id);
            if in_s[w] == adding {
                cut -= c;
            } else {
                cut += c;
            }
        }
        in_s[v] = adding;
        mask ^= 1 << bit;
        ds += if adding { d[v] } else { -d[v] };
        let denom = ds.min(total - ds);
        if denom > REL_TOL * total.max(1.0) {
            let r = cut / denom;
            if r < best.0 {
                best = (r, mask);
            }
        }
    }
    let witness = (0..k).filter(|i| best.1 >> i & 1 == 1).map(|i| a[i]).collect();
    Ok((best.0, witness))
}

/// Outcome of the progress-set construction on a weighted multiset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProgressSet {
    pub eta: f64,
    /// Indices into the input, in the order they were taken.
    pub l: Vec<usize>,
    pub r: Vec<usize>,
    pub s: Vec<usize>,
    /// Both conditions hold for the returned `S`.
    pub ok: bool,
    /// Which branch produced `L`.
    pub case: ProgressCase,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProgressCase {
    Pair,
    AllEqual,
    /// Mean at or above the top threshold.
    MeanHigh,
    /// Mean at or below the bottom threshold.
    MeanLow,
    /// Mean strictly between the thresholds; both sides were tried.
    Middle,
}

/// Splits weighted values `(x, w)` into `L` of weight `⌈Σw/8⌉` (the item
/// straddling the boundary goes wholly to `L`) and an `S ⊆ L` meeting the
/// two progress conditions when possible.
///
/// Ties in value are taken lowest index first. With integer weights equal
/// to 1 this is exactly the multiset construction.
pub fn brute_progress_set(items: &[(f64, f64)]) -> Result<ProgressSet> {
    let total_w: f64 = items.iter().map(|x| x.1).sum();
    if items.iter().any(|x| !(x.1 >= 0.0 && x.0.is_finite())) {
        return Err(Error::Input("weights must be non-negative and values finite".into()));
    }
    let live: Vec<usize> = (0..items.len()).filter(|&i| items[i].1 > 0.0).collect();
    if total_w < 2.0 - 1e-12 && live.len() < 2 {
        return Err(Error::Input("progress set needs at least two elements".into()));
    }
    let mu = live.iter().map(|&i| items[i].0 * items[i].1).sum::<f64>() / total_w;
    let var = |set: &[usize]| set.iter().map(|&i| items[i].1 * (items[i].0 - mu).powi(2)).sum::<f64>();
    let total_var = var(&live);
    let k = (total_w / 8.0 - 1e-9).ceil().max(1.0);

    let mut asc = live.clone();
    asc.sort_by(|&a, &b| items[a].0.total_cmp(&items[b].0).then(a.cmp(&b)));
    let mut desc = live.clone();
    desc.sort_by(|&a, &b| items[b].0.total_cmp(&items[a].0).then(a.cmp(&b)));

    let take = |order: &[usize]| -> (Vec<usize>, Vec<usize>) {
        let mut acc = 0.0;
        let mut cut = order.len();
        for (j, &i) in order.iter().enumerate() {
            if acc >= k - 1e-9 {
                cut = j;
                break;
            }
            acc += items[i].1;
        }
        let mut r: Vec<usize> = order[cut..].to_vec();
        r.sort_unstable();
        (order[..cut].to_vec(), r)
    };

    let build = |l: Vec<usize>, r: Vec<usize>, top: bool, case: ProgressCase| -> ProgressSet {
        let eta = if r.is_empty() {
            mu
        } else if top {
            r.iter().map(|&i| items[i].0).fold(f64::NEG_INFINITY, f64::max)
        } else {
            r.iter().map(|&i| items[i].0).fold(f64::INFINITY, f64::min)
        };
        let s: Vec<usize> = l
            .iter()
            .copied()
            .filter(|&i| {
                let x = items[i].0;
                9.0 * (x - eta).powi(2) >= (x - mu).powi(2) * (1.0 - 1e-12)
            })
            .collect();
        let ok = var(&s) >= total_var / 36.0 * (1.0 - 1e-12) || total_var == 0.0;
        ProgressSet { eta, l, r, s, ok, case }
    };

    // two elements by multiplicity: the lower one, with η at the mean
    if (total_w - 2.0).abs() < 1e-12 || live.len() == 1 {
        let (l, r) = take(&asc);
        let s = l.clone();
        let ok = true;
        return Ok(ProgressSet { eta: mu, l, r, s, ok, case: ProgressCase::Pair });
    }
    if total_var == 0.0 {
        let mut ids = live.clone();
        ids.sort_unstable();
        let (l, r) = take(&ids);
        return Ok(build(l, r, false, ProgressCase::AllEqual));
    }

    let kth = |order: &[usize]| -> f64 {
        let mut acc = 0.0;
        for &i in order {
            acc += items[i].1;
            if acc >= k - 1e-9 {
                return items[i].0;
            }
        }
        items[*order.last().expect("nonempty")].0
    };
    let eta_top = kth(&desc);
    let eta_bot = kth(&asc);

    let top = || {
        let (l, r) = take(&desc);
        (l, r)
    };
    let bottom = || take(&asc);

    if mu >= eta_top {
        let upper: f64 = live.iter().filter(|&&i| items[i].0 >= mu).map(|&i| items[i].1 * (items[i].0 - mu).powi(2)).sum();
        let (l, r) = if upper >= total_var / 36.0 { top() } else { bottom() };
        let is_top = upper >= total_var / 36.0;
        return Ok(build(l, r, is_top, ProgressCase::MeanHigh));
    }
    if mu <= eta_bot {
        let lower: f64 = live.iter().filter(|&&i| items[i].0 <= mu).map(|&i| items[i].1 * (items[i].0 - mu).powi(2)).sum();
        let is_bottom = lower >= total_var / 36.0;
        let (l, r) = if is_bottom { bottom() } else { top() };
        return Ok(build(l, r, !is_bottom, ProgressCase::MeanLow));
    }
    let (lt, rt) = top();
    let (lb, rb) = bottom();
    let a = build(lt, rt, true, ProgressCase::Middle);
    let b = build(lb, rb, false, ProgressCase::Middle);
    let score = |p: &ProgressSet| (p.ok, var(&p.s));
    let (sa, sb) = (score(&a), score(&b));
    if sa.0 && !sb.0 || (sa.0 == sb.0 && sa.1 > sb.1) {
        Ok(a)
    } else {
        Ok(b)
    }
}

/// Extremes of `opt(b) / estimate(b)` over random zero-sum demands, where
/// `estimate(b) = max_C |b(C)|/δC` over the family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub max_ratio: f64,
    pub min_ratio: f64,
    /// A demand had estimate 0 but positive optimum.
    pub unbounded: bool,
    pub skipped_sets: usize,
}

pub fn family_estimate(g: &CapGraph, family: &[Vec<usize>], b: &[f64]) -> (f64, usize) {
    let mut best: f64 = 0.0;
    let mut skipped = 0;
    for c in family {
        let mask = g.set_mask(c);
        let delta = g.cut_capacity(&mask);
        let bc: f64 = c.iter().map(|&v| b[v]).sum();
        if delta <= 0.0 {
            skipped += 1;
            continue;
        }
        best = best.max(bc.abs() / delta);
    }
    (best, skipped)
}

pub fn approximator_quality(g: &CapGraph, family: &[Vec<usize>], trials: usize, seed: u64) -> Result<QualityReport> {
    let mut r = crate::generators::rng(seed);
    let mut rep = QualityReport { max_ratio: 0.0, min_ratio: f64::INFINITY, unbounded: false, skipped_sets: 0 };
    let (comp, k) = g.components();
    for _ in 0..trials {
        let mut b = crate::generators::random_demand(g.n(), 1.0, &mut r);
        // keep demands feasible on disconnected graphs
        let mut sum = vec![0.0; k];
        let mut cnt = vec![0.0; k];
        for v in 0..g.n() {
            sum[comp[v]] += b[v];
            cnt[comp[v]] += 1.0;
        }
        for v in 0..g.n() {
            b[v] -= sum[comp[v]] / cnt[comp[v]];
        }
        let (est, skipped) = family_estimate(g, family, &b);
        rep.skipped_sets = rep.skipped_sets.max(skipped);
        let (opt, _) = min_congestion_route(g, &b)?;
        if est == 0.0 {
            if opt > 0.0 {
                rep.unbounded = true;
                rep.max_ratio = f64::INFINITY;
            }
            continue;
        }
        let ratio = opt / est;
        rep.max_ratio = rep.max_ratio.max(ratio);
        rep.min_ratio = rep.min_ratio.min(ratio);
    }
    Ok(rep)
}
