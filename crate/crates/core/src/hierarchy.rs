//! Expander hierarchies built bottom-up, and routing through them.
//!
//! Level `i` holds a partition `P̄_i` of `V`: the clusters `P_i` certified on
//! `V_i` plus the pieces `Q_i` of `P̄_{i-1}` left outside `V_i`. Level 1 is
//! all singletons. A new level decomposes `G` under the weighting
//! `deg_∂P̄_L` and grafts the result. The common refinements
//! `R≥i = P̄_i ∧ … ∧ P̄_L` are laminar; their union is the family `C`, and a
//! demand with `|b(C)| ≤ δC` on it is routed level by level until only a
//! remainder on `deg_∂P̄_L` is left.
//!
//! Indices in this module follow the level numbering: `level(1)` is the
//! singleton level and `level(L)` the top.

use serde::{Deserialize, Serialize};

use crate::cut_matching::{run_decomposition, CutMatchingConfig, ExactMatchingOracle, PotentialMode, WeakDecomposition};
use crate::error::{Error, Result};
use crate::fair_cut::{fair_cut, DemandRouter, FairCutConfig, FairCutInput, FairCutResult};
use crate::generators;
use crate::grafting::{
    boundary_source_routing, graft, route_grafted_demands, BoundaryRouting, ExactGraftingOracle, FinalDecomposition,
    GraftingInstance, GraftingOracle, Oracle2Result,
};
use crate::graph::{boundary_degrees, CapGraph, Edge, FlowAssignment, VertexPartition};
use crate::laminar::LaminarFamily;
use crate::paths::{add_path, path_decompose, truncate_at_boundary, Path, PathDecomposition};
use crate::sherman::{AlmostBackend, HierarchyMatchingOracle};

/// Which oracles decompose each level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    /// Exact max flow for both oracles.
    Exact,
    /// Almost-route plus the current levels for the matching oracle, fair
    /// cuts on the flow gadget for grafting.
    Sherman,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierarchyConfig {
    pub phi: f64,
    pub psi: f64,
    pub eps1: f64,
    pub eps2: f64,
    /// Round budget `T` of each cut-matching game.
    pub rounds: usize,
    pub x_max: f64,
    /// `ε̂` of the flow-based matching oracle.
    pub eps_hat: f64,
    pub seed: u64,
    pub oracle: Backend,
    pub almost: AlmostBackend,
    /// Random demands per level used to measure `α`.
    pub probes: usize,
    pub max_levels: usize,
    pub threads: usize,
}

impl HierarchyConfig {
    /// `φ = 1/(16⌈log nW⌉)`, `ψ = 1/64`, `ε₂ = 1/16`, `ε̂ = 1/(4 log² nW)` and
    /// the cut-matching defaults.
    pub fn defaults(g: &CapGraph) -> Self {
        let lnw = g.log_nw();
        let phi = 1.0 / (16.0 * lnw.ceil());
        let cm = CutMatchingConfig::defaults(g, phi);
        HierarchyConfig {
            phi,
            psi: 1.0 / 64.0,
            eps1: cm.eps1,
            eps2: 1.0 / 16.0,
            rounds: cm.rounds,
            x_max: cm.x_max,
            eps_hat: 1.0 / (4.0 * lnw * lnw),
            seed: 0,
            oracle: Backend::Exact,
            almost: AlmostBackend::Exact,
            probes: 4,
            max_levels: 64,
            threads: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.psi > 0.0 && self.psi <= 1.0 / 64.0) {
            return Err(Error::Input(format!("psi = {} must lie in (0, 1/64]", self.psi)));
        }
        if !(self.eps_hat > 0.0 && self.eps_hat < 1.0) {
            return Err(Error::Input(format!("eps_hat = {} must lie in (0, 1)", self.eps_hat)));
        }
        if self.max_levels < 2 {
            return Err(Error::Input("max_levels must be at least 2".into()));
        }
        self.matching_config(1).validate()
    }

    /// Cut-matching parameters for building level `i`.
    pub fn matching_config(&self, i: usize) -> CutMatchingConfig {
        CutMatchingConfig {
            phi: self.phi,
            eps1: self.eps1,
            rounds: self.rounds,
            x_max: self.x_max,
            c_conc: 4.0,
            seed: self.seed.wrapping_add(i as u64),
            potential_mode: PotentialMode::Off,
            threads: self.threads,
        }
    }
}

/// What building a level produced, kept for routing.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LevelBuild {
    pub weak: WeakDecomposition,
    pub fin: FinalDecomposition,
    /// Every certified vertex sending `deg_∂P̄_i` into its cluster.
    pub boundary: BoundaryRouting,
    /// Largest congestion seen routing probe demands inside the clusters.
    pub alpha: f64,
    /// Congestion of `boundary`.
    pub beta: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HierarchyLevel {
    pub index: usize,
    /// Membership in `V_i`.
    pub in_v: Vec<bool>,
    pub p: Vec<Vec<usize>>,
    pub q: Vec<Vec<usize>>,
    pub pbar: VertexPartition,
    /// `δP̄_i`.
    pub delta: f64,
    /// `deg_∂P̄_i`.
    pub boundary_deg: Vec<f64>,
    pub build: Option<Box<LevelBuild>>,
}

/// `R≥i` for every level, with their boundary degrees and the union `C`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RefinementFamily {
    pub r: Vec<VertexPartition>,
    pub r_deg: Vec<Vec<f64>>,
    pub family: LaminarFamily,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Hierarchy {
    pub config: HierarchyConfig,
    pub levels: Vec<HierarchyLevel>,
    pub family: RefinementFamily,
}

/// Output of routing one level.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LevelRouting {
    pub flow: FlowAssignment,
    /// What is left for the next level, spread on `deg_∂R≥i+1`.
    pub t: Vec<f64>,
    /// Factor the in-cluster demand was shrunk by before routing.
    pub lambda: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FullRouting {
    pub flow: FlowAssignment,
    /// Unrouted remainder `b'`, bounded by `deg_∂P̄_L`.
    pub residual: Vec<f64>,
    pub congestion: f64,
    /// Family estimate of the input demand.
    pub estimate: f64,
    pub lambdas: Vec<f64>,
}

fn cut_degrees(g: &CapGraph, inside: &[bool]) -> Vec<f64> {
    let mut d = vec![0.0; g.n()];
    for e in g.edges() {
        if inside[e.u] != inside[e.v] {
            d[e.u] += e.cap;
            d[e.v] += e.cap;
        }
    }
    d
}

fn level_of(g: &CapGraph, index: usize, in_v: Vec<bool>, p: Vec<Vec<usize>>, q: Vec<Vec<usize>>) -> Result<HierarchyLevel> {
    let mut blocks = p.clone();
    blocks.extend(q.iter().cloned());
    let pbar = VertexPartition::new(g.n(), blocks)?;
    if (0..g.n()).any(|v| !pbar.covers(v)) {
        return Err(Error::Structure(format!("level {index} does not cover every vertex")));
    }
    let boundary_deg = boundary_degrees(g, &pbar.block_of);
    let delta = boundary_deg.iter().sum::<f64>() / 2.0;
    Ok(HierarchyLevel { index, in_v, p, q, pbar, delta, boundary_deg, build: None })
}

/// `Q` and `P̄` of a new level: the certified clusters plus every block of
/// the previous partition cut down to `V ∖ V_new`.
pub fn extend_partition(
    prev: &VertexPartition,
    in_v: &[bool],
    p: &[Vec<usize>],
) -> Result<(Vec<Vec<usize>>, VertexPartition)> {
    let n = in_v.len();
    let mut q = Vec::new();
    for b in &prev.blocks {
        let rest: Vec<usize> = b.iter().copied().filter(|&v| !in_v[v]).collect();
        if !rest.is_empty() {
            q.push(rest);
        }
    }
    let mut blocks = p.to_vec();
    blocks.extend(q.iter().cloned());
    let pbar = VertexPartition::new(n, blocks)?;
    Ok((q, pbar))
}

/// Builds `R≥i` from the top down and checks that their union is laminar
/// and that each `R≥i` refines `P̄_i` and is refined by `R≥i-1`.
pub fn build_family(g: &CapGraph, levels: &[HierarchyLevel]) -> Result<RefinementFamily> {
    let l = levels.len();
    let n = g.n();
    let mut r: Vec<VertexPartition> = Vec::with_capacity(l);
    let mut current = levels[l - 1].pbar.clone();
    r.push(current.clone());
    for lv in levels[..l - 1].iter().rev() {
        let labels: Vec<usize> = (0..n).map(|v| lv.pbar.block_of[v] * n + current.block_of[v]).collect();
        current = VertexPartition::from_labels(&labels);
        r.push(current.clone());
    }
    r.reverse();
    for (i, ri) in r.iter().enumerate() {
        for b in &ri.blocks {
            let home = levels[i].pbar.block_of[b[0]];
            if b.iter().any(|&v| levels[i].pbar.block_of[v] != home) {
                return Err(Error::Structure(format!("R>={} does not refine level {}", i + 1, i + 1)));
            }
            if i + 1 < l {
                let up = r[i + 1].block_of[b[0]];
                if b.iter().any(|&v| r[i + 1].block_of[v] != up) {
                    return Err(Error::Structure(format!("R>={} does not refine R>={}", i + 1, i + 2)));
                }
            }
        }
    }
    let r_deg = r.iter().map(|p| boundary_degrees(g, &p.block_of)).collect();
    let sets = r.iter().flat_map(|p| p.blocks.iter().cloned()).collect();
    let family = LaminarFamily::new(g, sets)?;
    Ok(RefinementFamily { r, r_deg, family })
}

impl Hierarchy {
    /// The one-level hierarchy of singletons.
    pub fn singletons(g: &CapGraph, config: HierarchyConfig) -> Result<Self> {
        config.validate()?;
        let n = g.n();
        let lv = level_of(g, 1, vec![true; n], (0..n).map(|v| vec![v]).collect(), Vec::new())?;
        let family = build_family(g, std::slice::from_ref(&lv))?;
        Ok(Hierarchy { config, levels: vec![lv], family })
    }

    /// Number of levels `L`.
    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    /// Level `i`, counted from 1.
    pub fn level(&self, i: usize) -> &HierarchyLevel {
        &self.levels[i - 1]
    }

    pub fn top(&self) -> &HierarchyLevel {
        self.levels.last().expect("hierarchy has a level")
    }

    /// Whether the top partition has no boundary, which makes `C` a full
    /// congestion approximator.
    pub fn is_full(&self) -> bool {
        self.top().delta == 0.0
    }

    /// `α`: largest measured in-cluster congestion, at least 1.
    pub fn alpha(&self) -> f64 {
        self.levels.iter().filter_map(|l| l.build.as_ref()).map(|b| b.alpha).fold(1.0, f64::max)
    }

    /// `β`: largest boundary-routing congestion, at least 1.
    pub fn beta(&self) -> f64 {
        self.levels.iter().filter_map(|l| l.build.as_ref()).map(|b| b.beta).fold(1.0, f64::max)
    }

    /// Congestion bound `48αβL²` for routing demands with `|b(C)| ≤ δC`.
    pub fn quality(&self) -> f64 {
        let l = self.depth() as f64;
        48.0 * self.alpha() * self.beta() * l * l
    }

    pub fn estimate(&self, b: &[f64]) -> f64 {
        self.family.family.estimate(b)
    }

    /// Sends `s ≥ 0` from every vertex to the boundary of `P̄_i`: vertices of
    /// `V_{i+1}` through their doubled boundary paths, vertices outside over
    /// their `∂V_{i+1}` edges and then along the paths of the far endpoint.
    /// Returns where the flow ends and the flow.
    pub fn route_between_levels(&self, g: &CapGraph, i: usize, s: &[f64]) -> Result<(Vec<f64>, FlowAssignment)> {
        let n = g.n();
        let up = self.level(i + 1);
        let build = up.build.as_ref().ok_or_else(|| Error::Structure(format!("level {} has no routing", i + 1)))?;
        let dv = cut_degrees(g, &up.in_v);
        let sent = &build.boundary.sent;
        let tol = 1e-9 * (1.0 + s.iter().map(|x| x.abs()).sum::<f64>());
        let mut own: Vec<Vec<&Path>> = vec![Vec::new(); n];
        for p in &build.boundary.paths {
            own[p.start()].push(p);
        }
        let mut f = FlowAssignment::zero(g.m());
        let mut t = vec![0.0; n];
        for v in 0..n {
            if s[v] < -tol {
                return Err(Error::Input(format!("negative demand {} at {v}", s[v])));
            }
            if up.in_v[v] {
                if s[v] > 2.0 * sent[v] - dv[v] + tol {
                    return Err(Error::Contract(format!(
                        "vertex {v} sends {} but its boundary paths carry {}",
                        s[v],
                        2.0 * sent[v] - dv[v]
                    )));
                }
            } else if s[v] > dv[v] + tol {
                return Err(Error::Contract(format!("vertex {v} sends {} over {} of edges into V_{}", s[v], dv[v], i + 1)));
            }
        }
        for (id, e) in g.edges().iter().enumerate() {
            if up.in_v[e.u] == up.in_v[e.v] {
                continue;
            }
            let (v, w) = if up.in_v[e.v] { (e.u, e.v) } else { (e.v, e.u) };
            if s[v] <= 0.0 || dv[v] <= 0.0 {
                continue;
            }
            let a = e.cap * s[v] / dv[v];
            f.f[id] += if e.u == v { a } else { -a };
            if sent[w] <= 0.0 {
                return Err(Error::Contract(format!("vertex {w} has no boundary paths to forward along")));
            }
            for p in &own[w] {
                let x = a * p.weight / sent[w];
                add_path(&mut f, p, x);
                t[p.end()] += x;
            }
        }
        for u in (0..n).filter(|&u| up.in_v[u] && s[u] > 0.0) {
            if sent[u] <= 0.0 {
                if s[u] > tol {
                    return Err(Error::Contract(format!("vertex {u} has demand but no boundary paths")));
                }
                continue;
            }
            for p in &own[u] {
                let x = p.weight * s[u] / sent[u];
                add_path(&mut f, p, x);
                t[p.end()] += x;
            }
        }
        Ok((t, f))
    }

    /// Moves `0 ≤ x ≤ deg_∂R≥i` onto the boundary of `P̄_i`, one level at a
    /// time from the top; the result need not respect any cluster.
    pub fn route_propertyless(&self, g: &CapGraph, i: usize, x: &[f64]) -> Result<(Vec<f64>, FlowAssignment)> {
        let n = g.n();
        if i == self.depth() {
            return Ok((x.to_vec(), FlowAssignment::zero(g.m())));
        }
        let dr = &self.family.r_deg[i - 1];
        let dr1 = &self.family.r_deg[i];
        let xp: Vec<f64> = (0..n).map(|v| if dr[v] > 0.0 { x[v] * dr1[v] / dr[v] } else { 0.0 }).collect();
        let (yp, mut f) = self.route_propertyless(g, i + 1, &xp)?;
        let up = self.level(i + 1);
        let dv = cut_degrees(g, &up.in_v);
        let s: Vec<f64> =
            (0..n).map(|v| if up.in_v[v] { yp[v] / 2.0 } else { dv[v].min(yp[v] / 2.0) }.max(0.0)).collect();
        let (t, fb) = self.route_between_levels(g, i, &s)?;
        f.add_scaled(&fb, 2.0);
        let y = (0..n).map(|v| (x[v] - xp[v] + yp[v] - 2.0 * s[v] + 2.0 * t[v]).max(0.0)).collect();
        Ok((y, f))
    }

    /// Like [`route_propertyless`](Self::route_propertyless) for `x` on
    /// `V_{i+1}`, with every path cut at the boundary of its start's block
    /// of `P̄_{i+1}`.
    fn route_nonneg(&self, g: &CapGraph, i: usize, x: &[f64]) -> Result<(Vec<f64>, FlowAssignment)> {
        let n = g.n();
        let (y, f) = self.route_propertyless(g, i, x)?;
        let dec = path_decompose(g, &f, x, &y)?;
        let trunc = truncate_at_boundary(&dec, &self.level(i + 1).pbar.block_of);
        let starts = dec.out_weight(n);
        let mut out: Vec<f64> = (0..n).map(|v| (x[v] - starts[v]).max(0.0)).collect();
        for p in &trunc.paths {
            out[p.end()] += p.weight;
        }
        Ok((out, trunc.assemble()))
    }

    /// Signed version on both parts of `x`.
    pub fn route_r_to_p(&self, g: &CapGraph, i: usize, x: &[f64]) -> Result<(Vec<f64>, FlowAssignment)> {
        if i == self.depth() {
            return Ok((x.to_vec(), FlowAssignment::zero(g.m())));
        }
        let pos: Vec<f64> = x.iter().map(|v| v.max(0.0)).collect();
        let neg: Vec<f64> = x.iter().map(|v| (-v).max(0.0)).collect();
        let (yp, mut f) = self.route_nonneg(g, i, &pos)?;
        let (yn, fneg) = self.route_nonneg(g, i, &neg)?;
        f.add_scaled(&fneg, -1.0);
        Ok((yp.iter().zip(&yn).map(|(a, b)| a - b).collect(), f))
    }

    /// Routes `s` with `|s(C)| ≤ δC` on `R≥i` until it is spread over
    /// `deg_∂R≥i+1`.
    pub fn route_level(&self, g: &CapGraph, i: usize, s: &[f64]) -> Result<LevelRouting> {
        let n = g.n();
        let up = self.level(i + 1);
        let build = up.build.as_ref().ok_or_else(|| Error::Structure(format!("level {} has no routing", i + 1)))?;
        let r1 = &self.family.r[i];
        let dr1 = &self.family.r_deg[i];
        let scale = 1.0 + s.iter().map(|x| x.abs()).sum::<f64>();
        let tol = 1e-9 * scale;

        let mut t = vec![0.0; n];
        for c in &r1.blocks {
            if up.in_v[c[0]] {
                let sc: f64 = c.iter().map(|&v| s[v]).sum();
                let dc: f64 = c.iter().map(|&v| dr1[v]).sum();
                if dc > 0.0 {
                    for &v in c {
                        t[v] = sc * dr1[v] / dc;
                    }
                } else if sc.abs() > tol {
                    return Err(Error::Input(format!("demand {sc} on a set without boundary")));
                }
            } else {
                for &v in c {
                    t[v] = s[v];
                }
            }
        }
        let x: Vec<f64> = (0..n).map(|v| (s[v] - t[v]) / 2.0).collect();
        let (mut y, f1) = self.route_r_to_p(g, i, &x)?;

        // what is left sits inside the certified clusters of level i+1
        let d = &self.level(i).boundary_deg;
        let bd = build.fin.boundary_deg(g);
        let mut lambda: f64 = 0.0;
        for v in 0..n {
            if y[v].abs() <= tol {
                y[v] = 0.0;
                continue;
            }
            if !up.in_v[v] {
                return Err(Error::Contract(format!("level {i}: demand {} left outside V_{}", y[v], i + 1)));
            }
            let w = d[v] + bd[v];
            if w <= 0.0 {
                return Err(Error::Contract(format!("level {i}: demand {} on vertex {v} of weight 0", y[v])));
            }
            lambda = lambda.max(y[v].abs() / w);
        }
        let mut flow = f1;
        flow.scale(2.0);
        if lambda > 0.0 {
            let mut demands = Vec::new();
            for c in &up.p {
                let mut b = vec![0.0; n];
                for &v in c {
                    b[v] = y[v] / lambda;
                }
                let sum: f64 = c.iter().map(|&v| b[v]).sum();
                if sum.abs() > 1e-6 * scale / lambda {
                    return Err(Error::Contract(format!("level {i}: cluster demand sums to {sum}")));
                }
                // absorb rounding where there is the most room
                if let Some(&v) = c.iter().max_by(|&&a, &&b2| (d[a] + bd[a] - b[a].abs()).total_cmp(&(d[b2] + bd[b2] - b[b2].abs()))) {
                    b[v] -= sum;
                }
                if b.iter().any(|&x| x != 0.0) {
                    demands.push(b);
                }
            }
            if !demands.is_empty() {
                let routed = route_grafted_demands(g, &build.weak.state, &build.fin, &demands)?;
                for fl in &routed.flows {
                    flow.add_scaled(fl, 2.0 * lambda);
                }
            }
        }
        Ok(LevelRouting { flow, t, lambda })
    }

    /// Routes `b` with `|b(C)| ≤ δC` on the family, leaving a remainder on
    /// `deg_∂P̄_L` (zero once the hierarchy is full).
    pub fn route_full(&self, g: &CapGraph, b: &[f64]) -> Result<FullRouting> {
        let n = g.n();
        if b.len() != n {
            return Err(Error::Structure("demand length does not match the graph".into()));
        }
        if let Some((j, sum, delta)) = self.family.family.violation(b, 1.0 + 1e-7) {
            return Err(Error::Input(format!("demand puts {sum} on family set {j} with boundary {delta}")));
        }
        let estimate = self.estimate(b);
        let mut cur = b.to_vec();
        let mut flow = FlowAssignment::zero(g.m());
        let mut lambdas = Vec::new();
        for i in 1..self.depth() {
            let lr = self.route_level(g, i, &cur)?;
            flow.add_scaled(&lr.flow, 1.0);
            cur = lr.t;
            lambdas.push(lr.lambda);
        }
        let ex = flow.excess(g);
        let scale = 1.0 + b.iter().map(|x| x.abs()).sum::<f64>();
        for v in 0..n {
            if (ex[v] - (b[v] - cur[v])).abs() > 1e-6 * scale {
                return Err(Error::Contract(format!("routing conserves {} at {v}, expected {}", ex[v], b[v] - cur[v])));
            }
        }
        Ok(FullRouting { congestion: flow.congestion(g), flow, residual: cur, estimate, lambdas })
    }

    /// Spreads the sum of `b` over each top block evenly across the block,
    /// when that sum is below `tol`. A residual computed as a difference of
    /// large terms carries rounding at their scale, which the family estimate
    /// would read as demand on a set without boundary.
    pub fn balance_top(&self, b: &mut [f64], tol: f64) {
        for c in &self.top().pbar.blocks {
            let sum: f64 = c.iter().map(|&v| b[v]).sum();
            if sum != 0.0 && sum.abs() <= tol {
                let share = sum / c.len() as f64;
                for &v in c {
                    b[v] -= share;
                }
            }
        }
    }

    /// [`route_full`](Self::route_full) on `b/κ` scaled back by `κ`, the family
    /// estimate of `b`.
    pub fn route_scaled(&self, g: &CapGraph, b: &[f64]) -> Result<FullRouting> {
        let kappa = self.estimate(b);
        if !kappa.is_finite() {
            return Err(Error::Input("demand crosses a family set without boundary".into()));
        }
        if kappa == 0.0 {
            return Ok(FullRouting {
                flow: FlowAssignment::zero(g.m()),
                residual: b.to_vec(),
                congestion: 0.0,
                estimate: 0.0,
                lambdas: Vec::new(),
            });
        }
        let unit: Vec<f64> = b.iter().map(|x| x / kappa).collect();
        let mut r = self.route_full(g, &unit)?;
        r.flow.scale(kappa);
        r.residual.iter_mut().for_each(|x| *x *= kappa);
        r.congestion *= kappa;
        r.estimate = kappa;
        Ok(r)
    }
}

/// One cut-matching game under the weighting `d` followed by grafting, with
/// the oracles `h.config` selects. `level` only offsets the seed.
pub fn decompose(g: &CapGraph, h: &Hierarchy, d: &[f64], level: usize) -> Result<(WeakDecomposition, FinalDecomposition)> {
    let cfg = &h.config;
    let cm = cfg.matching_config(level);
    let weak = match cfg.oracle {
        Backend::Exact => run_decomposition(g, d, &cm, &mut ExactMatchingOracle { threads: cfg.threads })?,
        Backend::Sherman => run_decomposition(g, d, &cm, &mut HierarchyMatchingOracle::new(h, g, cfg.almost)?)?,
    };
    let fin = match cfg.oracle {
        Backend::Exact => graft(g, &weak, cfg.psi, cfg.eps2, &mut ExactGraftingOracle)?,
        Backend::Sherman => graft(g, &weak, cfg.psi, cfg.eps2, &mut FairCutGraftingOracle::new(h, cfg.almost))?,
    };
    Ok((weak, fin))
}

/// Adds one level on top of `h`.
pub fn build_next_level(g: &CapGraph, h: &mut Hierarchy) -> Result<()> {
    let cfg = h.config.clone();
    let top = h.top();
    let i = top.index + 1;
    let d = top.boundary_deg.clone();
    let (weak, fin) = decompose(g, h, &d, i)?;
    let boundary = boundary_source_routing(g, &fin)?;
    let alpha = probe_alpha(g, &weak, &fin, &d, cfg.probes, cfg.seed.wrapping_add(i as u64))?;
    let beta = boundary.congestion;

    let mut in_v = vec![false; g.n()];
    for &v in fin.certified.iter().flatten() {
        in_v[v] = true;
    }
    let p = fin.certified.clone();
    let (q, _) = extend_partition(&top.pbar, &in_v, &p)?;
    let mut lv = level_of(g, i, in_v, p, q)?;
    let prev = top.delta;
    if lv.delta > prev / 2.0 * (1.0 + 1e-9) {
        return Err(Error::Decomposition(format!(
            "level {i} boundary {} is more than half of {prev}; decrease phi",
            lv.delta
        )));
    }
    lv.build = Some(Box::new(LevelBuild { weak, fin, boundary, alpha, beta }));
    h.levels.push(lv);
    h.family = build_family(g, &h.levels)?;
    Ok(())
}

/// Adds levels until the top partition has no boundary.
pub fn build_hierarchy(g: &CapGraph, config: HierarchyConfig) -> Result<Hierarchy> {
    g.validate()?;
    let mut h = Hierarchy::singletons(g, config)?;
    while !h.is_full() {
        if h.depth() >= h.config.max_levels {
            return Err(Error::Decomposition(format!("no full hierarchy within {} levels", h.config.max_levels)));
        }
        build_next_level(g, &mut h)?;
    }
    Ok(h)
}

/// Largest congestion of routing sign-pattern demands inside every
/// certified cluster at once, each bounded by `d + deg_∂C`.
fn probe_alpha(
    g: &CapGraph,
    weak: &WeakDecomposition,
    fin: &FinalDecomposition,
    d: &[f64],
    probes: usize,
    seed: u64,
) -> Result<f64> {
    use rand::Rng;
    let n = g.n();
    let bd = fin.boundary_deg(g);
    let mut rng = generators::rng(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..probes {
        let mut demands = Vec::new();
        for c in &fin.certified {
            let w: Vec<f64> = c.iter().map(|&v| d[v] + bd[v]).collect();
            let wt: f64 = w.iter().sum();
            if c.len() < 2 || wt <= 0.0 {
                continue;
            }
            let sign: Vec<f64> = c.iter().map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect();
            let mean = sign.iter().zip(&w).map(|(s, x)| s * x).sum::<f64>() / wt;
            let mut b = vec![0.0; n];
            for (k, &v) in c.iter().enumerate() {
                b[v] = (sign[k] - mean) * w[k] / 2.0;
            }
            demands.push(b);
        }
        if demands.is_empty() {
            continue;
        }
        worst = worst.max(route_grafted_demands(g, &weak.state, fin, &demands)?.congestion);
    }
    Ok(worst)
}

/// Role of an edge of the flow gadget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GFlowEdge {
    /// Edge of `G` kept whole, capacity `c/ψ`.
    Internal(usize),
    /// `(u, x_e)` for `e = (u, v)` on the boundary of a grafted block.
    SplitIn(usize),
    /// `(x_e, v)`.
    SplitOut(usize),
    /// `(u, t)` for a surviving vertex of a grafted block.
    Sink(usize),
    /// `(ũ, u)` for a deleted vertex.
    LeafIn(usize),
    /// `(ũ, t)`.
    LeafSink(usize),
    /// `(v, t)` for a vertex outside the grafted blocks.
    OuterSink(usize),
}

/// The graph the fair-cut grafting oracle works on: `G` with internal
/// edges scaled by `1/ψ`, every boundary edge of a grafted block split by a
/// node, a leaf hanging off every deleted vertex, and a sink `t`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GFlowGadget {
    pub graph: CapGraph,
    pub t: usize,
    pub kind: Vec<GFlowEdge>,
    /// Gadget edge of each unsplit `G` edge.
    pub internal: Vec<Option<usize>>,
    /// `(x_e, (u, x_e), (x_e, v))` for each split `G` edge.
    pub split: Vec<Option<(usize, usize, usize)>>,
    /// `(ũ, (ũ, u), (ũ, t))` for each deleted vertex.
    pub leaf: Vec<Option<(usize, usize, usize)>>,
    /// Edge from a vertex straight to `t`.
    pub sink: Vec<Option<usize>>,
    pub u_set: Vec<bool>,
    pub family: LaminarFamily,
    pub delta_u: f64,
    /// `Δ(V)`, the total source of the grafting instance.
    pub source_total: f64,
}

pub fn build_gflow(g: &CapGraph, inst: &GraftingInstance, family: &LaminarFamily) -> Result<GFlowGadget> {
    let n = g.n();
    let t = n;
    let mut in_plus = vec![false; n];
    for b in &inst.blocks {
        for &v in &b.vertices {
            in_plus[v] = true;
        }
    }
    let mut edges = Vec::new();
    let mut kind = Vec::new();
    let push = |edges: &mut Vec<Edge>, kind: &mut Vec<GFlowEdge>, u: usize, v: usize, cap: f64, k: GFlowEdge| {
        edges.push(Edge { u, v, cap });
        kind.push(k);
        edges.len() - 1
    };
    let mut next = n + 1;
    let mut internal = vec![None; g.m()];
    let mut split = vec![None; g.m()];
    for (id, e) in g.edges().iter().enumerate() {
        let cut = inst.block_of[e.u] != inst.block_of[e.v] && (in_plus[e.u] || in_plus[e.v]);
        if cut {
            let x = next;
            next += 1;
            let a = push(&mut edges, &mut kind, e.u, x, e.cap, GFlowEdge::SplitIn(id));
            let b = push(&mut edges, &mut kind, x, e.v, e.cap, GFlowEdge::SplitOut(id));
            split[id] = Some((x, a, b));
        } else {
            internal[id] = Some(push(&mut edges, &mut kind, e.u, e.v, e.cap / inst.psi, GFlowEdge::Internal(id)));
        }
    }
    let mut leaf = vec![None; n];
    let mut sink = vec![None; n];
    for u in 0..n {
        let d = inst.d[u];
        if d <= 0.0 {
            continue;
        }
        if !in_plus[u] {
            sink[u] = Some(push(&mut edges, &mut kind, u, t, d / 5.0, GFlowEdge::OuterSink(u)));
        } else if inst.d_t[u] == d {
            sink[u] = Some(push(&mut edges, &mut kind, u, t, d / 5.0, GFlowEdge::Sink(u)));
        } else {
            let x = next;
            next += 1;
            let a = push(&mut edges, &mut kind, x, u, d - inst.d_t[u], GFlowEdge::LeafIn(u));
            let b = push(&mut edges, &mut kind, x, t, d / 5.0, GFlowEdge::LeafSink(u));
            leaf[u] = Some((x, a, b));
        }
    }
    let graph = CapGraph::from_real(next, edges)?;
    let mut u_set = vec![false; next];
    u_set[..=n].iter_mut().for_each(|x| *x = true);

    let mut sets = Vec::new();
    for s in &family.sets {
        let mut inside = vec![false; n];
        for &v in s {
            inside[v] = true;
        }
        let mut c = s.clone();
        for &v in s {
            if let Some((x, _, _)) = leaf[v] {
                c.push(x);
            }
        }
        for (id, e) in g.edges().iter().enumerate() {
            if let Some((x, _, _)) = split[id] {
                if inside[e.u] && inside[e.v] {
                    c.push(x);
                }
            }
        }
        sets.push(c);
    }
    for (x, _, _) in leaf.iter().flatten().chain(split.iter().flatten()) {
        sets.push(vec![*x]);
    }
    let family = LaminarFamily::new(&graph, sets)?;
    let delta_u = graph.cut_capacity(&u_set);
    let source_total = inst.source.iter().sum();
    Ok(GFlowGadget { graph, t, kind, internal, split, leaf, sink, u_set, family, delta_u, source_total })
}

/// Routes family-respecting demands of the gadget through the hierarchy of
/// `G`: demand on split nodes and leaves moves to a neighbour in `V`, the
/// hierarchy routes it in `G`, and the remainder drains into `t`.
pub struct GFlowRouter<'a> {
    pub hierarchy: &'a Hierarchy,
    pub g: &'a CapGraph,
    pub gadget: &'a GFlowGadget,
}

impl DemandRouter for GFlowRouter<'_> {
    fn route(&mut self, h: &CapGraph, b: &[f64]) -> Result<FlowAssignment> {
        let g = self.g;
        let gd = self.gadget;
        let n = g.n();
        if b.len() != h.n() {
            return Err(Error::Structure("demand length does not match the gadget".into()));
        }
        let mut f = FlowAssignment::zero(h.m());
        let mut bv = b[..n].to_vec();
        for (id, sp) in gd.split.iter().enumerate() {
            if let Some((x, a, _)) = *sp {
                let u = g.edge(id).u;
                f.f[a] -= b[x];
                bv[u] += b[x];
            }
        }
        for (u, lf) in gd.leaf.iter().enumerate() {
            if let Some((x, a, _)) = *lf {
                f.f[a] += b[x];
                bv[u] += b[x];
            }
        }
        let r = self.hierarchy.route_scaled(g, &bv)?;
        for (id, &x) in r.flow.f.iter().enumerate() {
            if let Some(k) = gd.internal[id] {
                f.f[k] += x;
            } else if let Some((_, a, c)) = gd.split[id] {
                f.f[a] += x;
                f.f[c] += x;
            }
        }
        let tol = 1e-9 * (1.0 + bv.iter().map(|x| x.abs()).sum::<f64>());
        for (u, &x) in r.residual.iter().enumerate() {
            if x.abs() <= tol {
                continue;
            }
            if let Some(k) = gd.sink[u] {
                f.f[k] += x;
            } else if let Some((_, a, c)) = gd.leaf[u] {
                f.f[a] -= x;
                f.f[c] += x;
            } else {
                return Err(Error::Contract(format!("remainder {x} at {u} has no way to the sink")));
            }
        }
        Ok(f)
    }
}

/// Grafting oracle from one fair cut on the flow gadget.
pub struct FairCutGraftingOracle<'a> {
    pub hierarchy: &'a Hierarchy,
    pub almost: AlmostBackend,
    /// Gadget and fair cut of the last call.
    pub last: Option<(GFlowGadget, FairCutResult)>,
}

impl<'a> FairCutGraftingOracle<'a> {
    pub fn new(hierarchy: &'a Hierarchy, almost: AlmostBackend) -> Self {
        FairCutGraftingOracle { hierarchy, almost, last: None }
    }
}

impl GraftingOracle for FairCutGraftingOracle<'_> {
    fn solve(&mut self, g: &CapGraph, inst: &GraftingInstance) -> Result<Oracle2Result> {
        let n = g.n();
        let gad = build_gflow(g, inst, &self.hierarchy.family.family)?;
        let q = 5.4 * self.hierarchy.quality() + 30.0;
        let inp = FairCutInput { graph: &gad.graph, u_set: gad.u_set.clone(), t: gad.t, family: &gad.family, q };
        let cfg = FairCutConfig::new(inst.eps2 / 2.0);
        let mut almost = self.almost.router();
        let mut router = GFlowRouter { hierarchy: self.hierarchy, g, gadget: &gad };
        let res = fair_cut(&inp, &cfg, almost.as_mut(), &mut router)?;

        let cuts = inst
            .blocks
            .iter()
            .map(|b| b.guarded.then(|| b.vertices.iter().copied().filter(|&v| !res.a[v]).collect()))
            .collect();

        // keep the part of each path after it enters A, ending at a
        // surviving vertex of a grafted block
        let ex = res.flow.excess(&gad.graph);
        let src: Vec<f64> = ex.iter().map(|x| x.max(0.0)).collect();
        let snk: Vec<f64> = ex.iter().map(|x| (-x).max(0.0)).collect();
        let dec = path_decompose(&gad.graph, &res.flow, &src, &snk)?;
        let mut paths = Vec::new();
        for p in &dec.paths {
            let Some(&(last, _)) = p.edges.last() else { continue };
            if p.end() != gad.t || !matches!(gad.kind[last], GFlowEdge::Sink(_)) {
                continue;
            }
            let Some(k) = p.vertices.iter().position(|&v| v < n && res.a[v]) else { continue };
            if k == 0 {
                continue;
            }
            let start = if p.vertices[k - 1] < n { k - 1 } else { k };
            let end = p.vertices.len() - 1;
            let mut edges = Vec::new();
            let mut ok = true;
            for &(id, fwd) in &p.edges[start..end - 1] {
                match gad.kind[id] {
                    GFlowEdge::Internal(e) => edges.push((e, fwd)),
                    _ => ok = false,
                }
            }
            if ok {
                paths.push(Path { vertices: p.vertices[start..end].to_vec(), edges, weight: p.weight });
            }
        }
        let flow = PathDecomposition { paths: paths.clone(), m: g.m() }.assemble();
        self.last = Some((gad, res));
        Ok(Oracle2Result { cuts, flow, paths: Some(paths), eps: inst.eps2 })
    }
}
