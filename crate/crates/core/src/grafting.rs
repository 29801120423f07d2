//! Grafting: route deleted and boundary demand of every surviving block
//! into its certified mass, cut off what cannot be routed, and assemble
//! the final decomposition into certified and discarded clusters.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::cut_matching::{induced, route_respecting_demands, CutMatchingState, WeakDecomposition};
use crate::error::{Error, Result};
use crate::exact::{exact_max_flow, FlowInstance};
use crate::graph::{boundary_degrees, CapGraph, FlowAssignment, VertexPartition};
use crate::paths::{add_path, path_decompose, Path};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraftBlock {
    /// Index of the block in `A_T`.
    pub index: usize,
    pub vertices: Vec<usize>,
    /// `deg_∂A_T(A) ≤ d_T(A)/8`, so the oracle owes a cut pair for it.
    pub guarded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraftingInstance {
    /// Blocks of `A_T` with positive surviving weight.
    pub blocks: Vec<GraftBlock>,
    pub source: Vec<f64>,
    pub sink: Vec<f64>,
    pub psi: f64,
    pub eps2: f64,
    pub boundary_deg: Vec<f64>,
    pub d: Vec<f64>,
    pub d_t: Vec<f64>,
    /// Block of `A_T` holding each vertex.
    pub block_of: Vec<usize>,
}

pub fn build_grafting_instance(
    g: &CapGraph,
    a_t: &VertexPartition,
    d: &[f64],
    d_t: &[f64],
    psi: f64,
    eps2: f64,
) -> Result<GraftingInstance> {
    if !(psi > 0.0 && psi.is_finite()) {
        return Err(Error::Input(format!("psi = {psi} must be positive")));
    }
    if !(eps2 > 0.0 && eps2 <= 0.1) {
        return Err(Error::Input(format!("eps2 = {eps2} must lie in (0, 1/10]")));
    }
    let n = g.n();
    if a_t.block_of.len() != n || d.len() != n || d_t.len() != n {
        return Err(Error::Structure("grafting inputs do not match the graph".into()));
    }
    let boundary_deg = boundary_degrees(g, &a_t.block_of);
    let mut source = vec![0.0; n];
    let mut sink = vec![0.0; n];
    let mut blocks = Vec::new();
    for (i, b) in a_t.blocks.iter().enumerate() {
        let dt: f64 = b.iter().map(|&v| d_t[v]).sum();
        if dt <= 0.0 {
            continue;
        }
        let bd: f64 = b.iter().map(|&v| boundary_deg[v]).sum();
        for &u in b {
            source[u] = boundary_deg[u] + d[u] - d_t[u];
            if d_t[u] == d[u] {
                sink[u] = d[u] / 5.0;
            }
        }
        blocks.push(GraftBlock { index: i, vertices: b.clone(), guarded: bd <= dt / 8.0 });
    }
    Ok(GraftingInstance {
        blocks,
        source,
        sink,
        psi,
        eps2,
        boundary_deg,
        d: d.to_vec(),
        d_t: d_t.to_vec(),
        block_of: a_t.block_of.clone(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Oracle2Result {
    /// One cut per instance block; `None` for unguarded blocks.
    pub cuts: Vec<Option<Vec<usize>>>,
    /// Flow in `G` (unscaled capacities); its congestion is at most `1/ψ`.
    pub flow: FlowAssignment,
    /// Source-to-sink paths of `flow`, with trivial paths for demand a
    /// vertex serves itself. When absent the flow is decomposed on net terminals.
    pub paths: Option<Vec<Path>>,
    pub eps: f64,
}

pub trait GraftingOracle {
    fn solve(&mut self, g: &CapGraph, inst: &GraftingInstance) -> Result<Oracle2Result>;
}

/// Exact max flow inside every block; the cut is the minimal source side.
#[derive(Debug, Clone, Default)]
pub struct ExactGraftingOracle;

impl GraftingOracle for ExactGraftingOracle {
    fn solve(&mut self, g: &CapGraph, inst: &GraftingInstance) -> Result<Oracle2Result> {
        let mut flow = FlowAssignment::zero(g.m());
        let mut cuts = Vec::new();
        for b in &inst.blocks {
            let (sub, map) = induced(g, &b.vertices, 1.0 / inst.psi);
            let source = b.vertices.iter().map(|&v| inst.source[v]).collect();
            let sink = b.vertices.iter().map(|&v| inst.sink[v]).collect();
            let res = exact_max_flow(&FlowInstance { graph: sub, source, sink })?;
            for (i, &id) in map.iter().enumerate() {
                flow.f[id] = res.flow.f[i];
            }
            if b.guarded {
                cuts.push(Some(b.vertices.iter().enumerate().filter(|&(i, _)| res.mincut[i]).map(|(_, &v)| v).collect()));
            } else {
                cuts.push(None);
            }
        }
        Ok(Oracle2Result { cuts, flow, paths: None, eps: 0.0 })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// Index of the originating block of `A_T`.
    pub block: usize,
    pub cut: Vec<usize>,
}

/// Numbers behind the Oracle 2 clauses and the final bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraftCertificate {
    /// Smallest `routed(u)/Δ(u)` over sources outside the cuts (1a).
    pub min_routed_fraction: f64,
    /// Smallest saturation of a cut edge, inward (1b).
    pub min_saturation: f64,
    /// `Σ c(E(C_A, A∖C_A))` and its cap `8ψ d(V)` (1c).
    pub cut_capacity: f64,
    pub cut_capacity_cap: f64,
    /// `d(∪C_A)` and its cap (clause 2).
    pub cut_weight: f64,
    pub cut_weight_cap: f64,
    /// `d(∪A×)`.
    pub discarded_weight: f64,
    /// Congestion in `G` of the stored grafting flow.
    pub flow_congestion: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FinalDecomposition {
    pub certified: Vec<Vec<usize>>,
    pub discarded: Vec<Vec<usize>>,
    pub provenance: Vec<Provenance>,
    /// Certified clusters first, then discarded ones.
    pub partition: VertexPartition,
    pub flow: FlowAssignment,
    pub paths: Vec<Path>,
    pub instance: GraftingInstance,
    pub certificate: GraftCertificate,
    /// Block of `A_T` for each vertex, and whether the vertex ended in a certified cluster.
    pub certified_of: Vec<Option<usize>>,
    /// Whether `paths` came from the oracle, self-service included.
    pub explicit_paths: bool,
}

impl FinalDecomposition {
    pub fn cut_capacity(&self, g: &CapGraph) -> f64 {
        g.edges()
            .iter()
            .filter(|e| self.partition.block_of[e.u] != self.partition.block_of[e.v])
            .fold(0.0, |acc, e| acc + e.cap)
    }

    /// `deg_∂A` of the final partition.
    pub fn boundary_deg(&self, g: &CapGraph) -> Vec<f64> {
        boundary_degrees(g, &self.partition.block_of)
    }
}

/// Checks the Oracle 2 clauses and splits every guarded block into its
/// certified remainder and the cut.
pub fn finalize(g: &CapGraph, inst: &GraftingInstance, res: &Oracle2Result, n_blocks: usize, a_t: &VertexPartition) -> Result<FinalDecomposition> {
    let n = g.n();
    if res.cuts.len() != inst.blocks.len() {
        return Err(Error::Contract("oracle returned the wrong number of cuts".into()));
    }
    let eps = res.eps.max(0.0);
    let d_total: f64 = inst.d.iter().sum();
    let tol = 1e-9 * d_total.max(1.0);
    let cong = res.flow.congestion(g);
    if cong > (1.0 + 1e-9) / inst.psi {
        return Err(Error::Contract(format!("grafting flow congestion {cong} above 1/psi")));
    }
    // net terminals for the decomposition; self-served demand stays local
    let src: Vec<f64> = (0..n).map(|v| (inst.source[v] - inst.sink[v]).max(0.0)).collect();
    let snk: Vec<f64> = (0..n).map(|v| (inst.sink[v] - inst.source[v]).max(0.0)).collect();
    let dec = match &res.paths {
        Some(p) => crate::paths::PathDecomposition { paths: p.clone(), m: g.m() },
        None => path_decompose(g, &res.flow, &src, &snk)?,
    };

    let mut in_cut = vec![false; n];
    let mut guarded_block = vec![usize::MAX; n];
    for (bi, b) in inst.blocks.iter().enumerate() {
        match (&res.cuts[bi], b.guarded) {
            (Some(c), true) => {
                for &v in c {
                    if inst.block_of[v] != b.index {
                        return Err(Error::Contract(format!("cut vertex {v} outside block {}", b.index)));
                    }
                    in_cut[v] = true;
                }
                for &v in &b.vertices {
                    guarded_block[v] = bi;
                }
            }
            (None, false) => {}
            _ => return Err(Error::Contract(format!("cut presence does not match the guard of block {}", b.index))),
        }
    }

    // 1a: routed source from u into A∖C_A
    let mut routed = vec![0.0; n];
    for p in &dec.paths {
        let u = p.start();
        if guarded_block[u] != usize::MAX
            && !in_cut[u]
            && p.vertices.iter().all(|&v| guarded_block[v] == guarded_block[u] && !in_cut[v])
        {
            routed[u] += p.weight;
        }
    }
    let mut min_frac: f64 = 1.0;
    for u in 0..n {
        if guarded_block[u] == usize::MAX || in_cut[u] || inst.source[u] <= 0.0 {
            continue;
        }
        let own = if res.paths.is_some() { 0.0 } else { inst.source[u].min(inst.sink[u]) };
        let got = routed[u] + own;
        let frac = got / inst.source[u];
        min_frac = min_frac.min(frac);
        if got < (1.0 - eps) * inst.source[u] - tol {
            return Err(Error::Contract(format!(
                "clause 1a: vertex {u} routes {got} of its source {}",
                inst.source[u]
            )));
        }
    }
    // 1b and 1c
    let mut min_sat: f64 = 1.0;
    let mut cut_cap = 0.0;
    for (id, e) in g.edges().iter().enumerate() {
        if guarded_block[e.u] == usize::MAX || guarded_block[e.u] != guarded_block[e.v] || in_cut[e.u] == in_cut[e.v] {
            continue;
        }
        cut_cap += e.cap;
        // flow from the cut side into the remainder
        let inward = if in_cut[e.u] { res.flow.f[id] } else { -res.flow.f[id] };
        let sat = inward * inst.psi / e.cap;
        min_sat = min_sat.min(sat);
        if sat < 1.0 - eps - 1e-9 {
            return Err(Error::Contract(format!("clause 1b: cut edge {id} saturated to {sat}")));
        }
    }
    let cut_cap_cap = 8.0 * inst.psi * d_total;
    if cut_cap > cut_cap_cap + tol {
        return Err(Error::Contract(format!("clause 1c: cut capacity {cut_cap} above 8 psi d(V) = {cut_cap_cap}")));
    }
    let cut_weight: f64 = (0..n).filter(|&v| in_cut[v]).map(|v| inst.d[v]).sum();
    let deleted: f64 = d_total - inst.d_t.iter().sum::<f64>();
    let bd_total: f64 = inst.boundary_deg.iter().sum();
    let cut_weight_cap = 30.0 * (deleted + bd_total);
    if cut_weight > cut_weight_cap + tol {
        return Err(Error::Contract(format!("clause 2: d(cuts) = {cut_weight} above {cut_weight_cap}")));
    }

    let mut certified = Vec::new();
    let mut discarded = Vec::new();
    let mut provenance = Vec::new();
    let mut certified_of = vec![None; n];
    let mut in_plus = vec![false; n_blocks];
    for (bi, b) in inst.blocks.iter().enumerate() {
        in_plus[b.index] = true;
        if !b.guarded {
            discarded.push(b.vertices.clone());
            continue;
        }
        let cut = res.cuts[bi].clone().expect("guarded block has a cut");
        let rest: Vec<usize> = b.vertices.iter().copied().filter(|&v| !in_cut[v]).collect();
        if !cut.is_empty() {
            let mut c = cut.clone();
            c.sort_unstable();
            discarded.push(c);
        }
        if !rest.is_empty() {
            for &v in &rest {
                certified_of[v] = Some(certified.len());
            }
            certified.push(rest);
            provenance.push(Provenance { block: b.index, cut });
        }
    }
    for (i, b) in a_t.blocks.iter().enumerate() {
        if !in_plus[i] {
            discarded.push(b.clone());
        }
    }
    let mut all = certified.clone();
    all.extend(discarded.iter().cloned());
    let partition = VertexPartition::new(n, all)?;
    let discarded_weight = discarded.iter().flatten().map(|&v| inst.d[v]).sum();
    let certificate = GraftCertificate {
        min_routed_fraction: min_frac,
        min_saturation: min_sat,
        cut_capacity: cut_cap,
        cut_capacity_cap: cut_cap_cap,
        cut_weight,
        cut_weight_cap,
        discarded_weight,
        flow_congestion: cong,
    };
    Ok(FinalDecomposition {
        certified,
        discarded,
        provenance,
        partition,
        flow: res.flow.clone(),
        paths: dec.paths,
        instance: inst.clone(),
        certificate,
        certified_of,
        explicit_paths: res.paths.is_some(),
    })
}

/// Cut-matching followed by grafting.
pub fn graft(g: &CapGraph, weak: &WeakDecomposition, psi: f64, eps2: f64, oracle: &mut dyn GraftingOracle) -> Result<FinalDecomposition> {
    let inst = build_grafting_instance(g, &weak.partition, &weak.state.d, &weak.d_t, psi, eps2)?;
    let res = oracle.solve(g, &inst)?;
    finalize(g, &inst, &res, weak.partition.len(), &weak.partition)
}

/// For each certified vertex, the grafting paths it may use: paths that
/// start at it and stay in its cluster, and suffixes of paths that enter
/// its cluster through a cut edge landing on it.
#[derive(Debug, Clone, Default)]
struct PathBundles {
    own: BTreeMap<usize, Vec<Path>>,
    entering: BTreeMap<usize, Vec<Path>>,
}

impl PathBundles {
    fn new(fin: &FinalDecomposition) -> Self {
        let mut b = PathBundles::default();
        let home = &fin.certified_of;
        let inst = &fin.instance;
        // demand a vertex serves itself rides a trivial path
        for u in 0..home.len() {
            let local = if fin.explicit_paths { 0.0 } else { inst.source[u].min(inst.sink[u]) };
            if home[u].is_some() && local > 0.0 {
                b.own.entry(u).or_default().push(Path::trivial(u, local));
            }
        }
        for p in &fin.paths {
            let u = p.start();
            if let Some(c) = home[u] {
                if p.vertices.iter().all(|&v| home[v] == Some(c)) {
                    b.own.entry(u).or_default().push(p.clone());
                }
                continue;
            }
            // starts in a cut: keep the suffix after the first entry into a
            // certified cluster of the same block, if it never leaves again
            if let Some(k) = p.vertices.iter().position(|v| home[*v].is_some()) {
                let c = home[p.vertices[k]];
                if k > 0
                    && fin.instance.block_of[p.vertices[k - 1]] == fin.instance.block_of[p.vertices[k]]
                    && p.vertices[k..].iter().all(|&v| home[v] == c)
                {
                    let suffix = Path { vertices: p.vertices[k..].to_vec(), edges: p.edges[k..].to_vec(), weight: p.weight };
                    b.entering.entry(p.vertices[k]).or_default().push(suffix);
                }
            }
        }
        b
    }

    /// Sends `amount` (signed) from `u` along `bundle`, scaled by at most
    /// `max_scale`; returns the amount actually sent.
    fn send(bundle: Option<&Vec<Path>>, amount: f64, max_scale: f64, f: &mut FlowAssignment, ends: &mut [f64]) -> f64 {
        Self::send_recorded(bundle, amount, max_scale, f, ends, None)
    }

    fn send_recorded(
        bundle: Option<&Vec<Path>>,
        amount: f64,
        max_scale: f64,
        f: &mut FlowAssignment,
        ends: &mut [f64],
        mut record: Option<&mut Vec<Path>>,
    ) -> f64 {
        let Some(paths) = bundle else { return 0.0 };
        let w: f64 = paths.iter().map(|p| p.weight).sum();
        if w <= 0.0 || amount == 0.0 {
            return 0.0;
        }
        let sent = amount.signum() * amount.abs().min(w * max_scale);
        let s = sent / w;
        for p in paths {
            add_path(f, p, p.weight * s);
            ends[p.end()] += p.weight * s;
            if let Some(r) = record.as_deref_mut() {
                r.push(Path { weight: p.weight * s, ..p.clone() });
            }
        }
        sent
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraftedRouting {
    pub flows: Vec<FlowAssignment>,
    pub congestion: f64,
    /// Congestion of the path-rescaling part alone.
    pub graft_congestion: f64,
    /// Factor the residual had to be shrunk by to respect `d_T`.
    pub residual_scale: f64,
    pub mixing_congestion: f64,
    pub conservation_error: f64,
}

/// Routes demands `b_i`, each supported on one certified cluster and
/// bounded by `d + deg_∂A` there.
///
/// Each `b_i(u)` is split into a boundary part (at most the new cut degree
/// of `u`) sent along paths entering at `u`, and the rest sent along `u`'s
/// own paths; the residual is routed by the mixing routing of the weak
/// decomposition after shrinking it into `d_T`.
pub fn route_grafted_demands(
    g: &CapGraph,
    weak: &CutMatchingState,
    fin: &FinalDecomposition,
    demands: &[Vec<f64>],
) -> Result<GraftedRouting> {
    let n = g.n();
    let eps = fin.instance.eps2;
    let max_scale = 1.0 / (1.0 - 2.0 * eps);
    let bd_final = fin.boundary_deg(g);
    let bd_t = &fin.instance.boundary_deg;
    let d = &fin.instance.d;
    let d_t = &fin.instance.d_t;
    let tol = 1e-9 * d.iter().sum::<f64>().max(1.0);
    let bundles = PathBundles::new(fin);
    let mut graft_flows = Vec::new();
    let mut residuals = Vec::new();
    for (i, b) in demands.iter().enumerate() {
        if b.len() != n {
            return Err(Error::Structure(format!("demand {i} has the wrong length")));
        }
        let supp: Vec<usize> = (0..n).filter(|&v| b[v] != 0.0).collect();
        if let Some(&v0) = supp.first() {
            let c = fin.certified_of[v0].ok_or_else(|| Error::Input(format!("demand {i} touches a discarded vertex")))?;
            for &v in &supp {
                if fin.certified_of[v] != Some(c) {
                    return Err(Error::Input(format!("demand {i} spans several clusters")));
                }
                if b[v].abs() > d[v] + bd_final[v] + tol {
                    return Err(Error::Input(format!("demand {i} exceeds d + deg at vertex {v}")));
                }
            }
            if b.iter().sum::<f64>().abs() > tol {
                return Err(Error::Input(format!("demand {i} does not sum to zero")));
            }
        }
        let mut f = FlowAssignment::zero(g.m());
        let mut ends = vec![0.0; n];
        let mut sent = vec![0.0; n];
        for &u in &supp {
            let new_deg = (bd_final[u] - bd_t[u]).max(0.0);
            let b2 = b[u].signum() * b[u].abs().min(new_deg);
            let b1 = b[u] - b2;
            sent[u] += PathBundles::send(bundles.entering.get(&u), b2, max_scale, &mut f, &mut ends);
            sent[u] += PathBundles::send(bundles.own.get(&u), b1, max_scale, &mut f, &mut ends);
        }
        // what the flow leaves behind: unsent demand at sources, arrivals at ends
        let r: Vec<f64> = (0..n).map(|v| b[v] - sent[v] + ends[v]).collect();
        graft_flows.push(f);
        residuals.push(r);
    }
    let graft_congestion = crate::graph::total_congestion(g, &graft_flows);

    // Shrink residuals into d_T. Mass on a vertex with d_T = 0 cannot be mixed.
    let mut scale: f64 = 1.0;
    for r in &residuals {
        for v in 0..n {
            if r[v].abs() <= tol {
                continue;
            }
            if d_t[v] <= 0.0 {
                return Err(Error::Contract(format!("residual {} left on deleted vertex {v}", r[v])));
            }
            scale = scale.max(r[v].abs() / d_t[v]);
        }
    }
    // residuals live in A_T blocks; the mixing routing wants one block per commodity
    let mut split = Vec::new();
    let mut owner = Vec::new();
    for (i, r) in residuals.iter().enumerate() {
        let mut per: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
        for v in 0..n {
            if r[v].abs() > tol {
                per.entry(fin.instance.block_of[v]).or_insert_with(|| vec![0.0; n])[v] = r[v] / scale;
            }
        }
        for (blk, mut x) in per {
            let s: f64 = x.iter().sum();
            if s.abs() > 1e-7 * x.iter().map(|y| y.abs()).sum::<f64>().max(1.0) {
                return Err(Error::Contract(format!("residual of demand {i} is unbalanced inside a block")));
            }
            // absorb rounding where d_T leaves the most room; the largest
            // entry usually sits exactly at its bound
            let room = |v: usize| d_t[v] - x[v].abs();
            if let Some(k) =
                (0..n).filter(|&v| fin.instance.block_of[v] == blk).max_by(|&a, &b| room(a).total_cmp(&room(b)))
            {
                x[k] -= s;
            }
            for v in 0..n {
                if x[v].abs() > d_t[v] {
                    x[v] = x[v].signum() * d_t[v];
                }
            }
            split.push(x);
            owner.push(i);
        }
    }
    let mix = route_respecting_demands(g, weak, &split)?;
    let mut flows = graft_flows;
    for (x, &i) in mix.flows.iter().zip(&owner) {
        flows[i].add_scaled(x, scale);
    }
    let mut conservation_error: f64 = 0.0;
    for (f, b) in flows.iter().zip(demands) {
        let ex = f.excess(g);
        for v in 0..n {
            conservation_error = conservation_error.max((ex[v] - b[v]).abs());
        }
    }
    Ok(GraftedRouting {
        congestion: crate::graph::total_congestion(g, &flows),
        flows,
        graft_congestion,
        residual_scale: scale,
        mixing_congestion: mix.congestion * scale,
        conservation_error,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundaryRouting {
    pub flow: FlowAssignment,
    pub congestion: f64,
    /// Amount each vertex sends and receives.
    pub sent: Vec<f64>,
    pub received: Vec<f64>,
    /// Largest `received(v)/d(v)` (should stay at most 1/4).
    pub max_receive_ratio: f64,
    /// The flow as weighted paths, each starting at its sender.
    pub paths: Vec<Path>,
}

/// Every certified vertex sends its final boundary degree along its
/// grafting paths; receipts are measured against `d/4`.
pub fn boundary_source_routing(g: &CapGraph, fin: &FinalDecomposition) -> Result<BoundaryRouting> {
    let n = g.n();
    let eps = fin.instance.eps2;
    let max_scale = 1.0 / (1.0 - 2.0 * eps);
    let bd_final = fin.boundary_deg(g);
    let bd_t = &fin.instance.boundary_deg;
    let bundles = PathBundles::new(fin);
    let mut f = FlowAssignment::zero(g.m());
    let mut received = vec![0.0; n];
    let mut sent = vec![0.0; n];
    let mut paths = Vec::new();
    for u in 0..n {
        if fin.certified_of[u].is_none() || bd_final[u] == 0.0 {
            continue;
        }
        let new_deg = (bd_final[u] - bd_t[u]).max(0.0);
        let old_deg = bd_final[u] - new_deg;
        sent[u] += PathBundles::send_recorded(bundles.entering.get(&u), new_deg, max_scale, &mut f, &mut received, Some(&mut paths));
        sent[u] += PathBundles::send_recorded(bundles.own.get(&u), old_deg, max_scale, &mut f, &mut received, Some(&mut paths));
        if sent[u] < bd_final[u] * (1.0 - 1e-9) {
            return Err(Error::Contract(format!("vertex {u} can send only {} of its boundary {}", sent[u], bd_final[u])));
        }
    }
    let d = &fin.instance.d;
    let max_receive_ratio = (0..n)
        .filter(|&v| received[v] > 0.0)
        .map(|v| if d[v] > 0.0 { received[v] / d[v] } else { f64::INFINITY })
        .fold(0.0, f64::max);
    Ok(BoundaryRouting { congestion: f.congestion(g), flow: f, sent, received, max_receive_ratio, paths })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cut_matching::{run_decomposition, CutMatchingConfig, ExactMatchingOracle};
    use crate::generators;

    fn decompose(g: &CapGraph, phi: f64) -> (WeakDecomposition, FinalDecomposition) {
        let cfg = CutMatchingConfig::defaults(g, phi);
        let weak = run_decomposition(g, &g.degrees(), &cfg, &mut ExactMatchingOracle::default()).unwrap();
        let fin = graft(g, &weak, 1.0 / 64.0, 1.0 / 16.0, &mut ExactGraftingOracle).unwrap();
        (weak, fin)
    }

    #[test]
    fn expander_is_certified_whole() {
        let g = generators::complete(8);
        let (_, fin) = decompose(&g, 0.1);
        assert_eq!(fin.certified, vec![(0..8).collect::<Vec<_>>()]);
        assert!(fin.discarded.is_empty());
        let br = boundary_source_routing(&g, &fin).unwrap();
        assert!(br.flow.is_zero());
    }

    #[test]
    fn whole_block_has_only_sinks() {
        let g = generators::complete(4);
        let d = g.degrees();
        let inst = build_grafting_instance(&g, &VertexPartition::whole(4), &d, &d, 0.25, 0.1).unwrap();
        assert!(inst.source.iter().all(|&x| x == 0.0));
        assert!(inst.sink.iter().zip(&d).all(|(s, x)| (s - x / 5.0).abs() < 1e-12));
        assert!(build_grafting_instance(&g, &VertexPartition::whole(4), &d, &d, 0.0, 0.1).is_err());
    }

    #[test]
    fn deleted_block_is_dropped() {
        let g = generators::barbell(4);
        let d = g.degrees();
        let mut dt = d.clone();
        for v in 0..4 {
            dt[v] = 0.0;
        }
        let p = VertexPartition::new(8, vec![(0..4).collect(), (4..8).collect()]).unwrap();
        let inst = build_grafting_instance(&g, &p, &d, &dt, 0.25, 0.1).unwrap();
        assert_eq!(inst.blocks.len(), 1);
        assert_eq!(inst.blocks[0].index, 1);
        assert_eq!(inst.source[4], 1.0);
    }

    #[test]
    fn pendant_clique_routes_boundary() {
        let g = generators::pendant_clique(8, 4);
        let (weak, fin) = decompose(&g, 0.5);
        assert_eq!(fin.certified.len(), 2);
        assert_eq!(fin.cut_capacity(&g), 1.0);
        let br = boundary_source_routing(&g, &fin).unwrap();
        assert!(br.congestion <= 2.0 * 64.0);
        assert!(br.max_receive_ratio <= 0.25 + 1e-9);
        // the bridge endpoints exchange their boundary degree
        let mut b = vec![0.0; g.n()];
        b[8] = 1.0;
        b[9] = -1.0;
        let r = route_grafted_demands(&g, &weak.state, &fin, &[vec![0.0; g.n()], b]).unwrap();
        assert!(r.flows[0].is_zero());
        assert!(r.conservation_error < 1e-9);
        assert!(r.congestion <= weak.config.rounds as f64 / 0.5 + 128.0);
    }
}
