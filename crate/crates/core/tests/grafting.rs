mod common;

use expander_flow::cut_matching::{run_decomposition, CutMatchingConfig, ExactMatchingOracle, WeakDecomposition};
use expander_flow::grafting::{
    boundary_source_routing, build_grafting_instance, finalize, graft, route_grafted_demands, ExactGraftingOracle,
    FinalDecomposition, GraftingOracle,
};
use expander_flow::graph::boundary_degrees;
use expander_flow::{generators, CapGraph, VertexPartition};
use proptest::prelude::*;
use rand::Rng;

const PSI: f64 = 1.0 / 64.0;
const EPS2: f64 = 1.0 / 16.0;

fn decompose(g: &CapGraph, phi: f64, seed: u64) -> (WeakDecomposition, FinalDecomposition) {
    let mut cfg = CutMatchingConfig::defaults(g, phi);
    cfg.seed = seed;
    let weak = run_decomposition(g, &g.degrees(), &cfg, &mut ExactMatchingOracle::default()).unwrap();
    let fin = graft(g, &weak, PSI, EPS2, &mut ExactGraftingOracle).unwrap();
    (weak, fin)
}

fn two_triangles() -> (CapGraph, VertexPartition) {
    let g = generators::barbell(3);
    let p = VertexPartition::new(6, vec![vec![0, 1, 2], vec![3, 4, 5]]).unwrap();
    (g, p)
}

#[test]
fn split_barbell_sources_sit_on_the_bridge() {
    let (g, p) = two_triangles();
    let d = g.degrees();
    let inst = build_grafting_instance(&g, &p, &d, &d, PSI, EPS2).unwrap();
    let bridge: Vec<usize> = (0..6).filter(|&v| inst.source[v] > 0.0).collect();
    assert_eq!(bridge.len(), 2);
    for &v in &bridge {
        assert_eq!(inst.source[v], 1.0);
    }
    assert!(inst.blocks.iter().all(|b| b.guarded == (1.0 <= 7.0 / 8.0)));
}

#[test]
fn split_barbell_keeps_both_triangles() {
    // boundary 1 against d_T(A) = 7 is above the 1/8 guard, so build the
    // remnants on a larger barbell where the guard holds
    let g = generators::barbell(5);
    let p = VertexPartition::new(10, vec![(0..5).collect(), (5..10).collect()]).unwrap();
    let d = g.degrees();
    let inst = build_grafting_instance(&g, &p, &d, &d, PSI, EPS2).unwrap();
    assert!(inst.blocks.iter().all(|b| b.guarded));
    let res = ExactGraftingOracle.solve(&g, &inst).unwrap();
    let fin = finalize(&g, &inst, &res, 2, &p).unwrap();
    assert_eq!(fin.certified, vec![(0..5).collect::<Vec<_>>(), (5..10).collect()]);
    assert!(fin.discarded.is_empty());
    let br = boundary_source_routing(&g, &fin).unwrap();
    // each bridge endpoint has sink d/5 = 1 and absorbs its own boundary
    for v in [4, 5] {
        assert_eq!(br.sent[v], 1.0);
        assert_eq!(br.received[v], 1.0);
    }
    assert!(br.flow.is_zero());
    assert!(br.max_receive_ratio <= 0.25 + 1e-12);
    assert!(br.congestion <= 2.0 / PSI);
}

#[test]
fn boundary_heavy_blocks_are_all_discarded() {
    let g = generators::path(5);
    let p = VertexPartition::singletons(5);
    let d = g.degrees();
    let inst = build_grafting_instance(&g, &p, &d, &d, PSI, EPS2).unwrap();
    assert!(inst.blocks.iter().all(|b| !b.guarded));
    let res = ExactGraftingOracle.solve(&g, &inst).unwrap();
    let fin = finalize(&g, &inst, &res, 5, &p).unwrap();
    assert!(fin.certified.is_empty());
    assert_eq!(fin.discarded.len(), 5);
}

#[test]
fn expander_is_kept_whole() {
    let g = generators::complete(8);
    let (_, fin) = decompose(&g, 0.1, 0);
    assert_eq!(fin.certified.len(), 1);
    assert!(fin.discarded.is_empty());
    assert_eq!(fin.certificate.cut_capacity, 0.0);
}

#[test]
fn wrong_cut_count_is_rejected() {
    let (g, p) = two_triangles();
    let d = g.degrees();
    let inst = build_grafting_instance(&g, &p, &d, &d, PSI, EPS2).unwrap();
    let mut res = ExactGraftingOracle.solve(&g, &inst).unwrap();
    res.cuts.pop();
    assert!(finalize(&g, &inst, &res, 2, &p).is_err());
}

#[test]
fn pendant_clique_demands_within_bound() {
    let g = generators::pendant_clique(10, 4);
    let (weak, fin) = decompose(&g, 0.5, 0);
    assert_eq!(fin.certified.len(), 2);
    let zero = route_grafted_demands(&g, &weak.state, &fin, &[]).unwrap();
    assert!(zero.flows.is_empty());
    let bound = weak.config.rounds as f64 / weak.config.phi + 2.0 / PSI;
    let mut rng = generators::rng(9);
    let d = g.degrees();
    let bd = fin.boundary_deg(&g);
    let w: Vec<f64> = (0..g.n()).map(|v| d[v] + bd[v]).collect();
    let demands: Vec<Vec<f64>> = (0..50)
        .map(|i| generators::cluster_demand(g.n(), &fin.certified[i % 2], &w, &mut rng))
        .collect();
    let r = route_grafted_demands(&g, &weak.state, &fin, &demands).unwrap();
    assert!(r.congestion <= bound, "{} > {bound}", r.congestion);
    assert!(r.conservation_error <= 1e-6 * d.iter().sum::<f64>());
}

#[test]
fn demand_across_clusters_is_rejected() {
    let g = generators::pendant_clique(10, 4);
    let (weak, fin) = decompose(&g, 0.5, 0);
    let mut b = vec![0.0; g.n()];
    b[fin.certified[0][0]] = 1.0;
    b[fin.certified[1][0]] = -1.0;
    assert!(route_grafted_demands(&g, &weak.state, &fin, &[b]).is_err());
}

fn check(g: &CapGraph, phi: f64, seed: u64) -> Result<(), TestCaseError> {
    let (weak, fin) = decompose(g, phi, seed);
    let n = g.n();
    let d = g.degrees();
    let dv: f64 = d.iter().sum();
    let inst = &fin.instance;
    let a_t = &weak.partition;

    // instance terminals from first principles
    let bd_t = boundary_degrees(g, &a_t.block_of);
    for v in 0..n {
        let live = a_t.blocks[a_t.block_of[v]].iter().any(|&x| weak.d_t[x] > 0.0);
        let src = if live { bd_t[v] + d[v] - weak.d_t[v] } else { 0.0 };
        prop_assert!((inst.source[v] - src).abs() < 1e-12);
        let snk = if live && weak.d_t[v] == d[v] { d[v] / 5.0 } else { 0.0 };
        prop_assert!((inst.sink[v] - snk).abs() < 1e-12);
    }

    // A° ⊔ A× refines A_T, and every certified cluster lies in a guarded block
    prop_assert_eq!(fin.partition.blocks.iter().map(|b| b.len()).sum::<usize>(), n);
    for b in &fin.partition.blocks {
        prop_assert!(b.iter().all(|&v| a_t.block_of[v] == a_t.block_of[b[0]]));
    }
    for (c, prov) in fin.certified.iter().zip(&fin.provenance) {
        let block = &a_t.blocks[prov.block];
        let dt: f64 = block.iter().map(|&v| weak.d_t[v]).sum();
        let bd: f64 = block.iter().map(|&v| bd_t[v]).sum();
        prop_assert!(bd <= dt / 8.0);
        let mut rest: Vec<usize> = block.iter().copied().filter(|v| !prov.cut.contains(v)).collect();
        rest.sort_unstable();
        prop_assert_eq!(&rest, c);
    }

    // clause 1c and clause 2, recomputed
    let mut in_cut = vec![false; n];
    for p in &fin.provenance {
        for &v in &p.cut {
            in_cut[v] = true;
        }
    }
    let cut_cap: f64 = g
        .edges()
        .iter()
        .filter(|e| a_t.block_of[e.u] == a_t.block_of[e.v] && in_cut[e.u] != in_cut[e.v])
        .map(|e| e.cap)
        .sum();
    prop_assert!(cut_cap <= 8.0 * PSI * dv + 1e-9);
    let cut_w: f64 = (0..n).filter(|&v| in_cut[v]).map(|v| d[v]).sum();
    let deleted = dv - weak.d_t.iter().sum::<f64>();
    prop_assert!(cut_w <= 30.0 * (deleted + bd_t.iter().sum::<f64>()) + 1e-9);

    // every edge of the final boundary is charged to A_T or to a cut
    let total_cut = fin.cut_capacity(g);
    prop_assert!(total_cut <= weak.intercluster_capacity(g) + cut_cap + 1e-9);

    // boundary witness: paths stay inside the sender's cluster, receipts ≤ d/4
    let br = boundary_source_routing(g, &fin).unwrap();
    prop_assert!(br.congestion <= 2.0 / PSI * (1.0 + 1e-9));
    prop_assert!(br.max_receive_ratio <= 0.25 + 1e-9);
    let bd = fin.boundary_deg(g);
    for p in &br.paths {
        let c = fin.certified_of[p.start()];
        prop_assert!(c.is_some());
        prop_assert!(p.vertices.iter().all(|&v| fin.certified_of[v] == c));
    }
    for v in 0..n {
        if fin.certified_of[v].is_some() {
            prop_assert!((br.sent[v] - bd[v]).abs() <= 1e-9 * dv);
        }
    }

    // mixing of respecting demands
    if !fin.certified.is_empty() {
        let mut rng = generators::rng(seed ^ 0x5eed);
        let w: Vec<f64> = (0..n).map(|v| d[v] + bd[v]).collect();
        let demands: Vec<Vec<f64>> = (0..20)
            .map(|_| {
                let c = &fin.certified[rng.random_range(0..fin.certified.len())];
                generators::cluster_demand(n, c, &w, &mut rng)
            })
            .collect();
        let r = route_grafted_demands(g, &weak.state, &fin, &demands).unwrap();
        let bound = weak.config.rounds as f64 / phi + 2.0 / PSI;
        prop_assert!(r.congestion <= bound, "{} > {}", r.congestion, bound);
        prop_assert!(r.conservation_error <= 1e-6 * dv);
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn grafting_invariants_on_random_graphs(seed in 0u64..10_000, n in 4usize..16, phi in 0.1f64..0.9) {
        let g = common::graph(n, n / 3, 3, seed);
        check(&g, phi, seed)?;
    }

    #[test]
    fn grafting_invariants_on_planted_graphs(seed in 0u64..10_000, k in 4usize..9, phi in 0.2f64..0.9) {
        let g = generators::pendant_clique(k + 4, k);
        check(&g, phi, seed)?;
        let h = generators::sbm((k, k + 1), 0.9, 0.05, seed);
        check(&h, phi, seed)?;
    }
}
