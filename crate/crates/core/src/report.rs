//! Text input and JSON reports for the command-line driver.
//!
//! Input is a DIMACS-like format:
//!
//! ```text
//! c comment
//! p gr <n> <m>
//! a <u> <v> <cap>     (1-based endpoints, integer cap ≥ 1)
//! w <v> <d>           (optional vertex weight, default deg)
//! b <v> <val>         (optional demand, used by maxflow)
//! ```
//!
//! Reports are single JSON documents with a `"format": 1` field. Vertex ids
//! in reports are 1-based like the input. Nothing time-dependent is written
//! except by `bench`, so equal seeds and inputs give byte-identical output.

use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};

use crate::cut_matching::WeakDecomposition;
use crate::error::{Error, Result};
use crate::exact::{approximator_quality, brute_near_expander, exact_max_flow, FlowInstance};
use crate::generators;
use crate::grafting::{route_grafted_demands, FinalDecomposition};
use crate::graph::CapGraph;
use crate::hierarchy::{build_hierarchy, decompose, Backend, Hierarchy, HierarchyConfig};
use crate::sherman::{approx_max_flow, AlmostBackend};

pub const FORMAT: u32 = 1;

/// Random demands used by the quality and mixing checks.
const CHECK_TRIALS: usize = 8;
/// Largest cluster handed to the brute-force expansion check.
const BRUTE_LIMIT: usize = 16;

#[derive(Debug, Clone)]
pub struct ParsedInput {
    pub graph: CapGraph,
    pub weights: Option<Vec<f64>>,
    pub demand: Option<Vec<f64>>,
}

fn field<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T> {
    let t = tok.ok_or_else(|| Error::Input(format!("line {line}: missing {what}")))?;
    t.parse().map_err(|_| Error::Input(format!("line {line}: bad {what} '{t}'")))
}

fn vertex(tok: Option<&str>, line: usize, n: usize) -> Result<usize> {
    let v: usize = field(tok, line, "vertex")?;
    if v == 0 || v > n {
        return Err(Error::Input(format!("line {line}: vertex {v} outside 1..={n}")));
    }
    Ok(v - 1)
}

fn finite(x: f64, line: usize, what: &str) -> Result<f64> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(Error::Input(format!("line {line}: {what} must be finite")))
    }
}

pub fn parse_dimacs(text: &str) -> Result<ParsedInput> {
    let mut header: Option<(usize, usize)> = None;
    let mut edges = Vec::new();
    let mut weights: Option<Vec<f64>> = None;
    let mut demand: Option<Vec<f64>> = None;
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let mut tok = raw.split_whitespace();
        let Some(kind) = tok.next() else { continue };
        if kind == "c" {
            continue;
        }
        if kind == "p" {
            if header.is_some() {
                return Err(Error::Input(format!("line {line}: second header")));
            }
            if tok.next() != Some("gr") {
                return Err(Error::Input(format!("line {line}: header must be 'p gr n m'")));
            }
            let n: usize = field(tok.next(), line, "n")?;
            let m: usize = field(tok.next(), line, "m")?;
            if n < 2 {
                return Err(Error::Input(format!("line {line}: need at least 2 vertices")));
            }
            header = Some((n, m));
        } else {
            let (n, _) = header.ok_or_else(|| Error::Input(format!("line {line}: '{kind}' before the header")))?;
            match kind {
                "a" => {
                    let u = vertex(tok.next(), line, n)?;
                    let v = vertex(tok.next(), line, n)?;
                    let c: u64 = field(tok.next(), line, "capacity")?;
                    if c == 0 {
                        return Err(Error::Input(format!("line {line}: capacity must be at least 1")));
                    }
                    if u == v {
                        return Err(Error::Input(format!("line {line}: self-loop")));
                    }
                    edges.push((u, v, c));
                }
                "w" | "b" => {
                    let v = vertex(tok.next(), line, n)?;
                    let x = finite(field(tok.next(), line, "value")?, line, "value")?;
                    let slot = if kind == "w" { &mut weights } else { &mut demand };
                    let vec = slot.get_or_insert_with(|| vec![f64::NAN; n]);
                    if !vec[v].is_nan() {
                        return Err(Error::Input(format!("line {line}: vertex {} given twice", v + 1)));
                    }
                    if kind == "w" && x < 0.0 {
                        return Err(Error::Input(format!("line {line}: weight must be nonnegative")));
                    }
                    vec[v] = x;
                }
                _ => return Err(Error::Input(format!("line {line}: unknown line type '{kind}'"))),
            }
            if tok.next().is_some() {
                return Err(Error::Input(format!("line {line}: trailing fields")));
            }
        }
    }
    let (n, m) = header.ok_or_else(|| Error::Input("missing 'p gr n m' header".into()))?;
    if edges.len() != m {
        return Err(Error::Input(format!("header announces {m} edges, found {}", edges.len())));
    }
    let graph = CapGraph::from_edges(n, &edges)?;
    let deg = graph.degrees();
    if let Some(w) = weights.as_mut() {
        for (v, x) in w.iter_mut().enumerate() {
            if x.is_nan() {
                *x = deg[v];
            }
        }
    }
    if let Some(b) = demand.as_mut() {
        for x in b.iter_mut() {
            if x.is_nan() {
                *x = 0.0;
            }
        }
    }
    Ok(ParsedInput { graph, weights, demand })
}

/// Pretty JSON with `-0` written as `0` and a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    fn clean(v: &mut Value) {
        match v {
            Value::Number(x) => {
                if let Some(f) = x.as_f64() {
                    if x.is_f64() && f == 0.0 {
                        *v = json!(0.0);
                    }
                }
            }
            Value::Array(a) => a.iter_mut().for_each(clean),
            Value::Object(o) => o.values_mut().for_each(clean),
            _ => {}
        }
    }
    let mut v = serde_json::to_value(value).map_err(|e| Error::Structure(e.to_string()))?;
    clean(&mut v);
    let mut s = serde_json::to_string_pretty(&v).map_err(|e| Error::Structure(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Decompose,
    Hierarchy,
    Maxflow,
    Verify,
    Bench,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum VerifyLevel {
    Off,
    Invariants,
    FullOracle,
}

/// Optional overrides of the graph-dependent defaults.
#[derive(Debug, Clone, Default, Serialize)]
pub struct Overrides {
    pub phi: Option<f64>,
    pub psi: Option<f64>,
    pub eps1: Option<f64>,
    pub eps2: Option<f64>,
    pub rounds: Option<usize>,
    pub x_max: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub overrides: Overrides,
    /// Accuracy of `maxflow`.
    pub eps: f64,
    pub seed: u64,
    pub oracle: Backend,
    pub verify: VerifyLevel,
    pub threads: usize,
}

impl RunConfig {
    pub fn new(command: Command) -> Self {
        RunConfig {
            command,
            overrides: Overrides::default(),
            eps: 0.1,
            seed: 0,
            oracle: Backend::Exact,
            verify: VerifyLevel::Off,
            threads: 0,
        }
    }

    /// Defaults for `g` with the overrides applied. Level oracles always use
    /// the max-flow almost-route: their accuracy `ε̂/(90Q)` is far below what
    /// the gradient solver reaches in reasonable time.
    pub fn hierarchy_config(&self, g: &CapGraph) -> Result<HierarchyConfig> {
        let mut c = HierarchyConfig::defaults(g);
        let o = &self.overrides;
        c.phi = o.phi.unwrap_or(c.phi);
        c.psi = o.psi.unwrap_or(c.psi);
        c.eps1 = o.eps1.unwrap_or(c.eps1);
        c.eps2 = o.eps2.unwrap_or(c.eps2);
        c.rounds = o.rounds.unwrap_or(c.rounds);
        c.x_max = o.x_max.unwrap_or(c.x_max);
        c.seed = self.seed;
        c.oracle = self.oracle;
        c.almost = AlmostBackend::Exact;
        c.threads = self.threads;
        c.validate()?;
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(Error::Input(format!("eps = {} must lie in (0, 1)", self.eps)));
        }
        Ok(c)
    }
}

/// One named comparison `value ≤ bound` (or `≥` when `at_least`).
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    pub at_least: bool,
    pub ok: bool,
}

impl Check {
    fn at_most(name: &str, value: f64, bound: f64) -> Self {
        Check { name: name.into(), value, bound, at_least: false, ok: value <= bound * (1.0 + 1e-9) + 1e-9 }
    }

    fn at_least(name: &str, value: f64, bound: f64) -> Self {
        Check { name: name.into(), value, bound, at_least: true, ok: value >= bound * (1.0 - 1e-9) - 1e-9 }
    }
}

/// Report plus whether every check passed.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: Value,
    pub passed: bool,
}

fn one_based(sets: &[Vec<usize>]) -> Vec<Vec<usize>> {
    sets.iter().map(|s| s.iter().map(|v| v + 1).collect()).collect()
}

fn graph_stats(g: &CapGraph) -> Value {
    json!({
        "n": g.n(),
        "m": g.m(),
        "total_capacity": g.total_cap(),
        "max_capacity": g.max_cap(),
        "log_nw": g.log_nw(),
    })
}

fn header(cfg: &RunConfig, hc: &HierarchyConfig, g: &CapGraph) -> serde_json::Map<String, Value> {
    let mut m = serde_json::Map::new();
    m.insert("format".into(), json!(FORMAT));
    m.insert("command".into(), json!(cfg.command));
    m.insert(
        "config".into(),
        json!({
            "phi": hc.phi,
            "psi": hc.psi,
            "eps": cfg.eps,
            "eps1": hc.eps1,
            "eps2": hc.eps2,
            "rounds": hc.rounds,
            "x_max": hc.x_max,
            "eps_hat": hc.eps_hat,
            "seed": cfg.seed,
            "oracle": cfg.oracle,
            "verify": cfg.verify,
            "threads": cfg.threads,
        }),
    );
    m.insert("graph".into(), graph_stats(g));
    m
}

fn decomposition_json(g: &CapGraph, weak: &WeakDecomposition, fin: &FinalDecomposition) -> Value {
    let cert = &fin.certificate;
    let matching_congestion = weak.state.rounds.iter().map(|r| r.congestion).fold(0.0, f64::max);
    json!({
        "certified": one_based(&fin.certified),
        "discarded": one_based(&fin.discarded),
        "deleted": weak.state.deleted().iter().map(|v| v + 1).collect::<Vec<_>>(),
        "rounds_used": weak.state.t,
        "progress_failures": weak.progress_failures,
        "certificates": {
            "cut_capacity": fin.cut_capacity(g),
            "intercluster_capacity": weak.intercluster_capacity(g),
            "deleted_demand": weak.state.deleted_demand(),
            "discarded_weight": cert.discarded_weight,
            "congestions": {
                "matching": matching_congestion,
                "grafting": cert.flow_congestion,
            },
            "quality_ratio": Value::Null,
        },
    })
}

fn decompose_checks(
    g: &CapGraph,
    hc: &HierarchyConfig,
    weak: &WeakDecomposition,
    fin: &FinalDecomposition,
    level: VerifyLevel,
    seed: u64,
) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    if level == VerifyLevel::Off {
        return Ok(out);
    }
    let cert = &fin.certificate;
    let covered = (0..g.n()).filter(|&v| fin.partition.covers(v)).count();
    out.push(Check::at_least("partition_covers", covered as f64, g.n() as f64));
    out.push(Check::at_most("graft_cut_capacity", cert.cut_capacity, cert.cut_capacity_cap));
    out.push(Check::at_most("graft_cut_weight", cert.cut_weight, cert.cut_weight_cap));

    // mixing of random demands bounded by d + deg_∂A on each certified cluster
    let d = &fin.instance.d;
    let bd = fin.boundary_deg(g);
    let w: Vec<f64> = (0..g.n()).map(|v| d[v] + bd[v]).collect();
    let mut rng = generators::rng(seed);
    let mut demands = Vec::new();
    for _ in 0..CHECK_TRIALS {
        for c in fin.certified.iter().filter(|c| c.len() > 1) {
            demands.push(generators::cluster_demand(g.n(), c, &w, &mut rng));
        }
    }
    if !demands.is_empty() {
        let r = route_grafted_demands(g, &weak.state, fin, &demands)?;
        let bound = hc.rounds as f64 / hc.phi + 2.0 / hc.psi;
        out.push(Check::at_most("mixing_congestion", r.congestion, bound));
    }

    if level == VerifyLevel::FullOracle {
        let lg = (g.n() as f64).log2().max(1.0);
        let phi = hc.phi / (64.0 * lg * lg);
        let mut bad = 0;
        for c in fin.certified.iter().filter(|c| c.len() <= BRUTE_LIMIT) {
            if !brute_near_expander(g, d, c, phi)? {
                bad += 1;
            }
        }
        out.push(Check::at_most("near_expander_failures", bad as f64, 0.0));
    }
    Ok(out)
}

fn hierarchy_json(g: &CapGraph, h: &Hierarchy, quality: Option<(f64, f64)>) -> Value {
    let levels: Vec<Value> = h
        .levels
        .iter()
        .map(|l| {
            let b = l.build.as_ref();
            json!({
                "index": l.index,
                "certified": one_based(&l.p),
                "carried": one_based(&l.q),
                "boundary": l.delta,
                "alpha": b.map(|b| b.alpha),
                "beta": b.map(|b| b.beta),
                "grafting_cut_capacity": b.map(|b| b.fin.cut_capacity(g)),
                "deleted_demand": b.map(|b| b.weak.state.deleted_demand()),
            })
        })
        .collect();
    let deleted: f64 = h.levels.iter().filter_map(|l| l.build.as_ref()).map(|b| b.weak.state.deleted_demand()).sum();
    json!({
        "depth": h.depth(),
        "family_size": h.family.family.len(),
        "levels": levels,
        "certificates": {
            "cut_capacity": h.levels.get(1).map(|l| l.delta).unwrap_or(0.0),
            "deleted_demand": deleted,
            "congestions": { "alpha": h.alpha(), "beta": h.beta(), "quality_bound": h.quality() },
            "quality_ratio": quality.map(|q| q.0),
            "soundness_ratio": quality.map(|q| q.1),
        },
    })
}

/// Max and min of `opt(b)/estimate(b)` over random demands.
fn measure_quality(g: &CapGraph, h: &Hierarchy, seed: u64) -> Result<(f64, f64)> {
    let q = approximator_quality(g, &h.family.family.sets, CHECK_TRIALS, seed)?;
    let min = if q.min_ratio.is_finite() { q.min_ratio } else { 1.0 };
    Ok((q.max_ratio, min))
}

fn hierarchy_checks(h: &Hierarchy, quality: (f64, f64), level: VerifyLevel) -> Vec<Check> {
    let mut out = Vec::new();
    if level == VerifyLevel::Off {
        return out;
    }
    for w in h.levels.windows(2).skip(1) {
        out.push(Check::at_most(&format!("halving_level_{}", w[1].index), w[1].delta, w[0].delta / 2.0));
    }
    out.push(Check::at_least("top_boundary_zero", -h.top().delta, 0.0));
    out.push(Check::at_least("estimate_sound", quality.1, 1.0));
    out.push(Check::at_most("quality_within_bound", quality.0, h.quality()));
    out
}

/// `s` and `t` from a demand with one positive and one negative entry.
fn terminals(demand: &Option<Vec<f64>>, n: usize) -> Result<(usize, usize)> {
    let Some(b) = demand else { return Ok((0, n - 1)) };
    let pos: Vec<usize> = (0..n).filter(|&v| b[v] > 0.0).collect();
    let neg: Vec<usize> = (0..n).filter(|&v| b[v] < 0.0).collect();
    if pos.len() != 1 || neg.len() != 1 {
        return Err(Error::Input("maxflow demand needs exactly one positive and one negative vertex".into()));
    }
    Ok((pos[0], neg[0]))
}

fn finish(mut m: serde_json::Map<String, Value>, checks: Vec<Check>) -> RunOutcome {
    let passed = checks.iter().all(|c| c.ok);
    if !checks.is_empty() {
        m.insert("checks".into(), json!(checks));
        m.insert("passed".into(), json!(passed));
    }
    RunOutcome { report: Value::Object(m), passed }
}

fn run_decompose(cfg: &RunConfig, input: &ParsedInput, m: &mut serde_json::Map<String, Value>) -> Result<Vec<Check>> {
    let g = &input.graph;
    let hc = cfg.hierarchy_config(g)?;
    let d = input.weights.clone().unwrap_or_else(|| g.degrees());
    let h = Hierarchy::singletons(g, hc.clone())?;
    let (weak, fin) = decompose(g, &h, &d, 2)?;
    m.insert("decomposition".into(), decomposition_json(g, &weak, &fin));
    decompose_checks(g, &hc, &weak, &fin, cfg.verify, cfg.seed)
}

fn run_hierarchy(cfg: &RunConfig, g: &CapGraph, level: VerifyLevel, m: &mut serde_json::Map<String, Value>) -> Result<Vec<Check>> {
    let hc = cfg.hierarchy_config(g)?;
    let h = build_hierarchy(g, hc.clone())?;
    let quality = measure_quality(g, &h, cfg.seed)?;
    m.insert("hierarchy".into(), hierarchy_json(g, &h, Some(quality)));
    let mut checks = hierarchy_checks(&h, quality, level);
    if level != VerifyLevel::Off {
        for l in h.levels.iter().filter(|l| l.build.is_some()) {
            let b = l.build.as_ref().expect("built level");
            let sub = decompose_checks(g, &hc, &b.weak, &b.fin, level, cfg.seed.wrapping_add(l.index as u64))?;
            checks.extend(sub.into_iter().map(|mut c| {
                c.name = format!("level_{}_{}", l.index, c.name);
                c
            }));
        }
    }
    Ok(checks)
}

fn run_maxflow(cfg: &RunConfig, input: &ParsedInput, m: &mut serde_json::Map<String, Value>) -> Result<Vec<Check>> {
    let g = &input.graph;
    let hc = cfg.hierarchy_config(g)?;
    let (s, t) = terminals(&input.demand, g.n())?;
    let h = build_hierarchy(g, hc.clone())?;
    // the top-level search runs at the user's eps, where the gradient solver is practical
    let mut router = match cfg.oracle {
        Backend::Exact => AlmostBackend::Exact.router(),
        Backend::Sherman => AlmostBackend::Softmax.router(),
    };
    let r = approx_max_flow(g, s, t, cfg.eps, &h, router.as_mut())?;
    let flow: Vec<Value> = g
        .edges()
        .iter()
        .zip(&r.flow.f)
        .filter(|(_, f)| **f != 0.0)
        .map(|(e, f)| json!([e.u + 1, e.v + 1, f]))
        .collect();
    let congestion = r.flow.congestion(g);
    m.insert(
        "maxflow".into(),
        json!({
            "source": s + 1,
            "sink": t + 1,
            "value": r.value,
            "upper_bound": r.upper_bound,
            "certified": r.certified,
            "almost_route_calls": r.almost_calls,
            "route_eps": r.route_eps,
            "hierarchy_depth": h.depth(),
            "flow": flow,
            "certificates": {
                "cut_capacity": r.upper_bound,
                "deleted_demand": Value::Null,
                "congestions": { "flow": congestion },
                "quality_ratio": Value::Null,
            },
        }),
    );
    let mut checks = Vec::new();
    if cfg.verify != VerifyLevel::Off {
        checks.push(Check::at_most("flow_feasible", congestion, 1.0));
        let net = crate::graph::net_flow(g, &r.flow, t);
        checks.push(Check::at_least("flow_value", net, r.value));
        checks.push(Check::at_least("value_vs_cut", r.value, (1.0 - cfg.eps) * r.upper_bound));
    }
    if cfg.verify == VerifyLevel::FullOracle {
        let n = g.n();
        let mut source = vec![0.0; n];
        let mut sink = vec![0.0; n];
        source[s] = g.total_cap() + 1.0;
        sink[t] = g.total_cap() + 1.0;
        let exact = exact_max_flow(&FlowInstance { graph: g.clone(), source, sink })?;
        checks.push(Check::at_least("value_vs_exact", r.value, (1.0 - cfg.eps) * exact.value));
    }
    Ok(checks)
}

/// Runs `cfg.command` on `input`.
pub fn run(cfg: &RunConfig, input: &ParsedInput) -> Result<RunOutcome> {
    let g = &input.graph;
    let hc = cfg.hierarchy_config(g)?;
    let mut m = header(cfg, &hc, g);
    let checks = match cfg.command {
        Command::Decompose => run_decompose(cfg, input, &mut m)?,
        Command::Hierarchy => run_hierarchy(cfg, g, cfg.verify, &mut m)?,
        Command::Maxflow => run_maxflow(cfg, input, &mut m)?,
        Command::Verify => {
            let level = if cfg.verify == VerifyLevel::Off { VerifyLevel::Invariants } else { cfg.verify };
            let mut c = run_hierarchy(cfg, g, level, &mut m)?;
            let mut sub = cfg.clone();
            sub.verify = level;
            c.extend(run_decompose(&sub, input, &mut m)?);
            c
        }
        Command::Bench => {
            let mut timing = serde_json::Map::new();
            let mut checks = Vec::new();
            let clock = Instant::now();
            checks.extend(run_decompose(cfg, input, &mut m)?);
            timing.insert("decompose_ms".into(), json!(clock.elapsed().as_secs_f64() * 1e3));
            let clock = Instant::now();
            checks.extend(run_hierarchy(cfg, g, cfg.verify, &mut m)?);
            timing.insert("hierarchy_ms".into(), json!(clock.elapsed().as_secs_f64() * 1e3));
            let clock = Instant::now();
            checks.extend(run_maxflow(cfg, input, &mut m)?);
            timing.insert("maxflow_ms".into(), json!(clock.elapsed().as_secs_f64() * 1e3));
            m.insert("timing".into(), Value::Object(timing));
            checks
        }
    };
    Ok(finish(m, checks))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_weights_and_demand() {
        let txt = "c tiny\np gr 3 2\na 1 2 3\na 2 3 1\nw 2 7.5\nb 1 1\nb 3 -1\n";
        let p = parse_dimacs(txt).unwrap();
        assert_eq!(p.graph.n(), 3);
        assert_eq!(p.graph.m(), 2);
        assert_eq!(p.weights.unwrap(), vec![3.0, 7.5, 1.0]);
        assert_eq!(p.demand.unwrap(), vec![1.0, 0.0, -1.0]);
    }

    #[test]
    fn merges_parallel_edges() {
        let p = parse_dimacs("p gr 2 2\na 1 2 1\na 2 1 2\n").unwrap();
        assert_eq!(p.graph.m(), 1);
        assert_eq!(p.graph.cap(0), 3.0);
    }

    #[test]
    fn rejects_malformed_lines() {
        for bad in [
            "a 1 2 1\n",
            "p gr 2 1\na 1 3 1\n",
            "p gr 2 1\na 1 2 0\n",
            "p gr 2 1\na 1 1 1\n",
            "p gr 2 1\na 1 2 x\n",
            "p gr 2 2\na 1 2 1\n",
            "p gr 2 1\na 1 2 1\nq 1\n",
            "p gr 2 1\na 1 2 1 4\n",
            "p gr 2 1\na 1 2 1\nw 1 -1\n",
            "p gr 2 1\na 1 2 1\nb 1 1\nb 1 2\n",
        ] {
            assert!(matches!(parse_dimacs(bad), Err(Error::Input(_))), "{bad:?}");
        }
    }

    #[test]
    fn json_drops_negative_zero() {
        let s = to_json(&json!({ "x": -0.0, "y": [1.5, -0.0] })).unwrap();
        assert!(!s.contains("-0"));
        assert!(s.ends_with('\n'));
    }

    #[test]
    fn single_edge_maxflow_equals_capacity() {
        let p = parse_dimacs("p gr 2 1\na 1 2 5\n").unwrap();
        let mut cfg = RunConfig::new(Command::Maxflow);
        cfg.verify = VerifyLevel::FullOracle;
        let out = run(&cfg, &p).unwrap();
        assert!(out.passed);
        let v = out.report["maxflow"]["value"].as_f64().unwrap();
        assert!((v - 5.0).abs() < 1e-9, "{v}");
    }
}
