mod common;

use expander_flow::graph::{boundary, conductance, induced_degree, net_flow};
use expander_flow::{generators, CapGraph, FlowAssignment, VertexPartition};
use proptest::prelude::*;
use rand::seq::SliceRandom;

fn four_cycle() -> CapGraph {
    generators::cycle(4)
}

#[test]
fn boundary_examples() {
    let g = four_cycle();
    let p = VertexPartition::new(4, vec![vec![0, 1], vec![2, 3]]).unwrap();
    assert_eq!(boundary(&g, &p, false).unwrap().1, 2.0);
    assert_eq!(boundary(&g, &VertexPartition::whole(4), false).unwrap().1, 0.0);
    let k4 = generators::complete(4);
    assert_eq!(boundary(&k4, &VertexPartition::singletons(4), false).unwrap().1, 6.0);
}

#[test]
fn boundary_single_cut_counts_leaving_edges() {
    let g = four_cycle();
    let p = VertexPartition::new(4, vec![vec![0, 1]]).unwrap();
    assert_eq!(boundary(&g, &p, false).unwrap().1, 0.0);
    assert_eq!(boundary(&g, &p, true).unwrap().1, 2.0);
}

#[test]
fn boundary_rejects_foreign_partition() {
    let g = four_cycle();
    assert!(boundary(&g, &VertexPartition::singletons(5), false).is_err());
}

#[test]
fn conductance_examples() {
    let g = four_cycle();
    assert_eq!(conductance(&g, &g.degrees(), &[0, 1]).unwrap().value, 0.5);
    let k2 = generators::two_vertex(1).unwrap();
    assert_eq!(conductance(&k2, &k2.degrees(), &[0]).unwrap().value, 1.0);
    let bb = generators::barbell(3);
    assert!((conductance(&bb, &bb.degrees(), &[0, 1, 2]).unwrap().value - 1.0 / 7.0).abs() < 1e-12);
}

#[test]
fn conductance_degenerate_is_flagged() {
    let g = four_cycle();
    let c = conductance(&g, &[0.0, 0.0, 1.0, 1.0], &[0, 1]).unwrap();
    assert!(c.degenerate && c.value.is_infinite());
    assert!(conductance(&g, &g.degrees(), &[]).is_err());
}

#[test]
fn induced_degree_examples() {
    let g = four_cycle();
    for v in 0..4 {
        assert_eq!(induced_degree(&g, &[], v), 0.0);
    }
    let p = VertexPartition::new(4, vec![vec![0, 1], vec![2, 3]]).unwrap();
    let (h, _) = boundary(&g, &p, false).unwrap();
    for v in 0..4 {
        assert_eq!(induced_degree(&g, &h, v), 1.0);
    }
    let all: Vec<usize> = (0..g.m()).collect();
    let deg = g.degrees();
    for v in 0..4 {
        assert_eq!(induced_degree(&g, &all, v), deg[v]);
    }
}

#[test]
fn net_flow_examples() {
    let g = generators::path(3);
    let zero = FlowAssignment::zero(g.m());
    assert_eq!(net_flow(&g, &zero, 1), 0.0);
    let mut f = FlowAssignment::zero(g.m());
    f.f[0] = 1.0;
    assert_eq!(net_flow(&g, &f, 1), 1.0);
    assert_eq!(net_flow(&g, &f, 0), -1.0);
}

#[test]
fn scale_examples() {
    let g = generators::random_connected(8, 6, 5, 1);
    assert_eq!(g.scaled(1.0).unwrap().edges(), g.edges());
    for factor in [2.0 / 0.5, 1.0 / 0.25] {
        let s = g.scaled(factor).unwrap();
        for (a, b) in s.edges().iter().zip(g.edges()) {
            assert_eq!(a.cap, 4.0 * b.cap);
        }
        assert_eq!(s.max_cap(), 4.0 * g.max_cap());
    }
    assert!(g.scaled(0.0).is_err());
    assert!(g.scaled(f64::MAX).is_err());
}

#[test]
fn construction_rejects_bad_edges() {
    assert!(CapGraph::from_edges(2, &[(0, 0, 1)]).is_err());
    assert!(CapGraph::from_edges(2, &[(0, 1, 0)]).is_err());
    assert!(CapGraph::from_edges(2, &[(0, 2, 1)]).is_err());
    let g = CapGraph::from_edges(3, &[(0, 1, 2), (1, 0, 3), (1, 2, 1)]).unwrap();
    assert_eq!(g.m(), 2);
    assert_eq!(g.max_cap(), 5.0);
    g.validate().unwrap();
}

#[test]
fn partition_rejects_overlap() {
    assert!(VertexPartition::new(3, vec![vec![0, 1], vec![1, 2]]).is_err());
}

proptest! {
    #[test]
    fn unions_of_blocks_cut_at_most_the_partition(seed in 0u64..1000, k in 2usize..6, pick in any::<u64>()) {
        let g = common::graph(14, 12, 5, seed);
        let labels: Vec<usize> = (0..14).map(|v| (v * 7 + seed as usize) % k).collect();
        let p = VertexPartition::from_labels(&labels);
        let (_, dp) = boundary(&g, &p, false).unwrap();
        let chosen: Vec<usize> = (0..p.blocks.len()).filter(|i| pick >> i & 1 == 1).collect();
        let s: Vec<usize> = chosen.iter().flat_map(|&i| p.blocks[i].clone()).collect();
        let ds = g.cut_capacity(&g.set_mask(&s));
        prop_assert!(ds <= dp + 1e-9);
    }

    #[test]
    fn conductance_ignores_labels(seed in 0u64..1000, size in 1usize..11) {
        let g = common::graph(12, 10, 6, seed);
        let mut r = generators::rng(seed);
        let mut perm: Vec<usize> = (0..12).collect();
        perm.shuffle(&mut r);
        let edges: Vec<(usize, usize, u64)> = g.edges().iter().map(|e| (perm[e.u], perm[e.v], e.cap as u64)).collect();
        let h = CapGraph::from_edges(12, &edges).unwrap();
        let set: Vec<usize> = (0..size).collect();
        let mapped: Vec<usize> = set.iter().map(|&v| perm[v]).collect();
        let a = conductance(&g, &g.degrees(), &set).unwrap();
        let b = conductance(&h, &h.degrees(), &mapped).unwrap();
        prop_assert!((a.value - b.value).abs() <= 1e-12 * a.value.max(1.0));
    }

    #[test]
    fn net_flow_sums_to_zero(seed in 0u64..1000, vals in prop::collection::vec(-5.0f64..5.0, 25)) {
        let g = common::graph(10, 15, 4, seed);
        let f = FlowAssignment { f: vals[..g.m()].to_vec() };
        let total: f64 = (0..g.n()).map(|v| net_flow(&g, &f, v)).sum();
        prop_assert!(total.abs() < 1e-9);
    }
}
