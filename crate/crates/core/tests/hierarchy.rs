mod common;

use expander_flow::exact::{approximator_quality, min_congestion_route};
use expander_flow::grafting::build_grafting_instance;
use expander_flow::hierarchy::{build_gflow, build_hierarchy, extend_partition, GFlowEdge, Hierarchy, HierarchyConfig};
use expander_flow::laminar::is_laminar;
use expander_flow::{generators, CapGraph, VertexPartition};
use proptest::prelude::*;
use rand::Rng;

fn hierarchy(g: &CapGraph) -> Hierarchy {
    build_hierarchy(g, HierarchyConfig::defaults(g)).unwrap()
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

fn tol(x: &[f64]) -> f64 {
    1e-7 * (1.0 + x.iter().map(|v| v.abs()).sum::<f64>())
}

/// Zero-sum demand with `|b(C)| ≤ δC` on every family set, by scaling a
/// random demand down to estimate 1.
fn respecting_demand(g: &CapGraph, h: &Hierarchy, rng: &mut impl Rng) -> Vec<f64> {
    let b = generators::random_demand(g.n(), 1.0, rng);
    let k = h.estimate(&b);
    if k == 0.0 {
        return b;
    }
    b.iter().map(|x| x / k).collect()
}

#[test]
fn extend_partition_examples() {
    let prev = VertexPartition::new(4, vec![vec![0, 1], vec![2, 3]]).unwrap();
    let (q, p) = extend_partition(&prev, &[true; 4], &[vec![0, 2], vec![1, 3]]).unwrap();
    assert!(q.is_empty());
    assert_eq!(p.blocks, vec![vec![0, 2], vec![1, 3]]);
    let (q, p) = extend_partition(&prev, &[false; 4], &[]).unwrap();
    assert_eq!(q, prev.blocks);
    assert_eq!(p.block_of, prev.block_of);
    // barbell(3) with the left triangle certified
    let prev = VertexPartition::new(6, vec![vec![0, 1], vec![2, 3], vec![4, 5]]).unwrap();
    let in_v = [true, true, true, false, false, false];
    let (q, p) = extend_partition(&prev, &in_v, &[vec![0, 1, 2]]).unwrap();
    assert_eq!(q, vec![vec![3], vec![4, 5]]);
    assert_eq!(p.blocks, vec![vec![0, 1, 2], vec![3], vec![4, 5]]);
    assert!(extend_partition(&prev, &in_v, &[vec![0, 1, 2], vec![2]]).is_err());
}

#[test]
fn singletons_family_and_estimate() {
    let g = generators::path(2);
    let h = Hierarchy::singletons(&g, HierarchyConfig::defaults(&g)).unwrap();
    assert_eq!(h.family.family.sets, vec![vec![0], vec![1]]);
    assert!(!h.is_full());
    assert_eq!(h.estimate(&[0.0, 0.0]), 0.0);
    assert_eq!(h.estimate(&[1.0, -1.0]), 1.0);
}

#[test]
fn two_vertices_merge_at_level_two() {
    for g in [generators::path(2), generators::two_vertex(3).unwrap()] {
        let h = hierarchy(&g);
        assert_eq!(h.depth(), 2);
        assert_eq!(h.top().pbar.blocks, vec![vec![0, 1]]);
        assert_eq!(h.top().delta, 0.0);
        let mut sets = h.family.family.sets.clone();
        sets.sort();
        assert_eq!(sets, vec![vec![0], vec![0, 1], vec![1]]);
    }
}

#[test]
fn path8_routes_a_unit_demand_exactly() {
    let g = generators::path(8);
    let h = hierarchy(&g);
    assert!(h.is_full());
    assert!(h.depth() as f64 <= (2.0 * 7.0f64).log2().ceil() + 1.0);
    let zero = h.route_full(&g, &[0.0; 8]).unwrap();
    assert!(zero.flow.is_zero());
    let mut b = vec![0.0; 8];
    b[0] = 1.0;
    b[7] = -1.0;
    let r = h.route_full(&g, &b).unwrap();
    assert!(r.residual.iter().all(|x| x.abs() <= 1e-9));
    let ex = r.flow.excess(&g);
    for v in 0..8 {
        assert!((ex[v] - b[v]).abs() <= 1e-6);
    }
    assert!(r.congestion <= h.quality());
    let q = approximator_quality(&g, &h.family.family.sets, 30, 1).unwrap();
    assert!(!q.unbounded);
    assert!(q.min_ratio >= 1.0 - 1e-9);
    assert!(q.max_ratio <= h.quality());
}

#[test]
fn barbell_hierarchy_reaches_the_whole_graph() {
    let g = generators::barbell(4);
    let h = hierarchy(&g);
    let d1 = h.level(1).delta;
    assert!(h.depth() as f64 <= d1.log2().ceil() + 1.0);
    assert_eq!(h.top().pbar.blocks.len(), 1);
    assert!(is_laminar(&h.family.family.sets));
    let json = serde_json::to_string(&h).unwrap();
    let back: Hierarchy = serde_json::from_str(&json).unwrap();
    assert_eq!(back.family.family.sets, h.family.family.sets);
}

#[test]
fn zero_demands_stay_zero() {
    let g = generators::barbell(4);
    let h = hierarchy(&g);
    let n = g.n();
    for i in 1..h.depth() {
        let (t, f) = h.route_between_levels(&g, i, &vec![0.0; n]).unwrap();
        assert!(t.iter().all(|&x| x == 0.0) && f.is_zero());
        let (y, f) = h.route_r_to_p(&g, i, &vec![0.0; n]).unwrap();
        assert!(y.iter().all(|&x| x == 0.0) && f.is_zero());
        let lr = h.route_level(&g, i, &vec![0.0; n]).unwrap();
        assert!(lr.t.iter().all(|&x| x == 0.0) && lr.flow.is_zero());
    }
    let x: Vec<f64> = (0..n).map(|v| v as f64).collect();
    assert_eq!(h.route_r_to_p(&g, h.depth(), &x).unwrap().0, x);
}

#[test]
fn gflow_gadget_examples() {
    // K8 as one block with nothing deleted: only sink edges
    let g = generators::complete(8);
    let d = g.degrees();
    let whole = VertexPartition::whole(8);
    let inst = build_grafting_instance(&g, &whole, &d, &d, 1.0 / 64.0, 1.0 / 16.0).unwrap();
    let h = Hierarchy::singletons(&g, HierarchyConfig::defaults(&g)).unwrap();
    let gd = build_gflow(&g, &inst, &h.family.family).unwrap();
    assert_eq!(gd.delta_u, 0.0);
    let sinks = gd.kind.iter().filter(|k| matches!(k, GFlowEdge::Sink(_))).count();
    let internal = gd.kind.iter().filter(|k| matches!(k, GFlowEdge::Internal(_))).count();
    assert_eq!((sinks, internal, gd.kind.len()), (8, 28, 36));
    for (k, e) in gd.kind.iter().zip(gd.graph.edges()) {
        match k {
            GFlowEdge::Sink(u) => assert_eq!(e.cap, d[*u] / 5.0),
            GFlowEdge::Internal(id) => assert_eq!(e.cap, g.cap(*id) * 64.0),
            _ => unreachable!(),
        }
    }

    // barbell(3) split at the bridge
    let g = generators::barbell(3);
    let d = g.degrees();
    let halves = VertexPartition::new(6, vec![vec![0, 1, 2], vec![3, 4, 5]]).unwrap();
    let inst = build_grafting_instance(&g, &halves, &d, &d, 1.0 / 64.0, 1.0 / 16.0).unwrap();
    let h = Hierarchy::singletons(&g, HierarchyConfig::defaults(&g)).unwrap();
    let gd = build_gflow(&g, &inst, &h.family.family).unwrap();
    let bridge = g.edges().iter().position(|e| (e.u < 3) != (e.v < 3)).unwrap();
    let (x, a, b) = gd.split[bridge].unwrap();
    assert_eq!(gd.graph.cap(a), 1.0);
    assert_eq!(gd.graph.cap(b), 1.0);
    assert!(!gd.u_set[x]);
    assert_eq!(gd.delta_u, 2.0);
    assert!(gd.delta_u <= 6.0 * gd.source_total / 5.0);
    assert!(is_laminar(&gd.family.sets));
}

fn check_structure(g: &CapGraph, h: &Hierarchy) -> Result<(), TestCaseError> {
    let n = g.n();
    prop_assert!(h.is_full());
    prop_assert!(is_laminar(&h.family.family.sets));
    for i in 1..h.depth() {
        let lo = h.level(i);
        let up = h.level(i + 1);
        // halving
        prop_assert!(up.delta <= lo.delta / 2.0 * (1.0 + 1e-9));
        // every block lies inside V_{i+1} or outside it
        for b in &up.pbar.blocks {
            prop_assert!(b.iter().all(|&v| up.in_v[v] == up.in_v[b[0]]));
        }
        // Q is the previous partition cut down to the rest
        let (q, _) = extend_partition(&lo.pbar, &up.in_v, &up.p).unwrap();
        prop_assert_eq!(&q, &up.q);
        let dr = &h.family.r_deg[i - 1];
        let dr1 = &h.family.r_deg[i];
        let dv = cut_degrees(g, &up.in_v);
        for u in (0..n).filter(|&u| !up.in_v[u]) {
            prop_assert!((dr[u] - dr1[u]).abs() <= 1e-9);
            prop_assert!(up.boundary_deg[u] - dv[u] <= lo.boundary_deg[u] + 1e-9);
        }
        // edges of ∂R≥i that leave ∂R≥i+1 are boundary edges of P̄_i
        for e in g.edges() {
            let ri = &h.family.r[i - 1].block_of;
            let ri1 = &h.family.r[i].block_of;
            if ri[e.u] != ri[e.v] && ri1[e.u] == ri1[e.v] {
                prop_assert!(lo.pbar.block_of[e.u] != lo.pbar.block_of[e.v]);
            }
        }
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn hierarchy_properties(seed in 0u64..10_000, n in 2usize..18, extra in 0usize..20, w in 1u64..6) {
        let g = common::graph(n, extra, w, seed);
        let h = hierarchy(&g);
        check_structure(&g, &h)?;
        prop_assert!(h.depth() as f64 <= g.degrees().iter().sum::<f64>().log2().ceil() + 1.0);
        let mut rng = generators::rng(seed);
        let q = h.quality();
        let beta = h.beta();
        let l = h.depth() as f64;
        for _ in 0..4 {
            // routing the whole family
            let b = respecting_demand(&g, &h, &mut rng);
            let r = h.route_full(&g, &b).unwrap();
            let ex = r.flow.excess(&g);
            for v in 0..n {
                prop_assert!((ex[v] - b[v]).abs() <= 1e-6 * tol(&b) / 1e-7);
            }
            prop_assert!(r.residual.iter().all(|x| x.abs() <= tol(&b)));
            prop_assert!(r.congestion <= q * (1.0 + 1e-9));
            // soundness: the estimate never exceeds the optimum
            let (opt, _) = min_congestion_route(&g, &b).unwrap();
            prop_assert!(h.estimate(&b) <= opt * (1.0 + 1e-7) + 1e-12);
            prop_assert!(opt <= q * h.estimate(&b) * (1.0 + 1e-7) + 1e-12);

            for i in 1..h.depth() {
                let up = h.level(i + 1);
                let lo = h.level(i);
                let dv = cut_degrees(&g, &up.in_v);

                // between levels
                let s: Vec<f64> = (0..n)
                    .map(|v| rng.random::<f64>() * if up.in_v[v] { up.boundary_deg[v] } else { dv[v] })
                    .collect();
                let (t, f) = h.route_between_levels(&g, i, &s).unwrap();
                prop_assert!(f.congestion(&g) <= 3.0 * beta * (1.0 + 1e-9));
                let fx = f.excess(&g);
                for v in 0..n {
                    prop_assert!(up.in_v[v] || t[v] == 0.0);
                    prop_assert!(t[v] <= lo.boundary_deg[v] / 2.0 + tol(&s));
                    prop_assert!((fx[v] - (s[v] - t[v])).abs() <= tol(&s));
                }

                // R to P
                let dr = &h.family.r_deg[i - 1];
                let x: Vec<f64> = (0..n)
                    .map(|v| if up.in_v[v] { (2.0 * rng.random::<f64>() - 1.0) * dr[v] } else { 0.0 })
                    .collect();
                let (y, f) = h.route_r_to_p(&g, i, &x).unwrap();
                prop_assert!(f.congestion(&g) <= 12.0 * l * beta * (1.0 + 1e-9));
                let fx = f.excess(&g);
                for v in 0..n {
                    prop_assert!((fx[v] - (x[v] - y[v])).abs() <= tol(&x));
                    prop_assert!(y[v].abs() <= 6.0 * lo.boundary_deg[v] + 6.0 * l * beta * up.boundary_deg[v] + tol(&x));
                }
                for c in &up.pbar.blocks {
                    let sum: f64 = c.iter().map(|&v| x[v] - y[v]).sum();
                    prop_assert!(sum.abs() <= tol(&x));
                }
            }
        }
    }

    #[test]
    fn level_routing_balances_every_cluster(seed in 0u64..10_000, n in 4usize..16, w in 1u64..4) {
        let g = common::graph(n, n, w, seed);
        let h = hierarchy(&g);
        let mut rng = generators::rng(seed ^ 7);
        let b = respecting_demand(&g, &h, &mut rng);
        let (alpha, beta, l) = (h.alpha(), h.beta(), h.depth() as f64);
        let mut cur = b.clone();
        for i in 1..h.depth() {
            let lr = h.route_level(&g, i, &cur).unwrap();
            prop_assert!(lr.flow.congestion(&g) <= 48.0 * l * alpha * beta * (1.0 + 1e-9));
            let ex = lr.flow.excess(&g);
            for v in 0..n {
                prop_assert!((ex[v] - (cur[v] - lr.t[v])).abs() <= 1e-6 * tol(&b) / 1e-7);
            }
            for c in &h.family.r[i].blocks {
                let sum: f64 = c.iter().map(|&v| cur[v] - lr.t[v]).sum();
                prop_assert!(sum.abs() <= tol(&b));
            }
            cur = lr.t;
        }
    }
}

#[test]
fn violating_demand_is_rejected() {
    let g = generators::path(4);
    let h = hierarchy(&g);
    assert!(h.route_full(&g, &[3.0, 0.0, 0.0, -3.0]).is_err());
    let r = h.route_scaled(&g, &[3.0, 0.0, 0.0, -3.0]).unwrap();
    let ex = r.flow.excess(&g);
    assert!((ex[0] - 3.0).abs() <= 1e-6 && (ex[3] + 3.0).abs() <= 1e-6);
}
