mod common;

use std::collections::BTreeSet;

use expander_flow::cut_matching::{
    build_matching_instance, compute_projections, cut_step, explicit_flow_matrix, potential_psi, route_respecting_demands,
    run_decomposition, weighting_at, CutMatchingConfig, CutMatchingState, ExactMatchingOracle, PotentialMode,
    WeakDecomposition,
};
use expander_flow::exact::{brute_near_expander, brute_progress_set};
use expander_flow::paths::add_path;
use expander_flow::{generators, CapGraph, FlowAssignment};
use proptest::prelude::*;
use rand::Rng;

fn run(g: &CapGraph, phi: f64, seed: u64) -> (WeakDecomposition, CutMatchingConfig) {
    let mut cfg = CutMatchingConfig::defaults(g, phi);
    cfg.seed = seed;
    let w = run_decomposition(g, &g.degrees(), &cfg, &mut ExactMatchingOracle::default()).unwrap();
    (w, cfg)
}

#[test]
fn k8_is_one_cluster_with_nothing_deleted() {
    let g = generators::complete(8);
    let (w, _) = run(&g, 0.1, 0);
    assert_eq!(w.partition.len(), 1);
    assert_eq!(w.intercluster_capacity(&g), 0.0);
    assert_eq!(w.d_t, g.degrees());
    let first = &w.state.rounds[0];
    assert!(first.cuts.is_empty());
    assert!(first.potential_after < first.potential_before);
}

#[test]
fn fully_deleted_component_is_inactive() {
    let g = generators::path(4);
    let mut d = g.degrees();
    d[0] = 0.0;
    d[1] = 0.0;
    d[2] = 0.0;
    let cfg = CutMatchingConfig::defaults(&g, 0.1);
    let w = run_decomposition(&g, &d, &cfg, &mut ExactMatchingOracle::default()).unwrap();
    assert!(w.state.components.iter().all(|c| !c.active));
    assert!(w.state.rounds.is_empty());
}

#[test]
fn projections_before_any_round_are_r() {
    let g = generators::random_connected(10, 8, 3, 4);
    let state = CutMatchingState::new(&g.degrees(), 10.0);
    let r: Vec<f64> = (0..10).map(|i| (i as f64 - 4.5) / 10.0).collect();
    let p = compute_projections(&state, &r);
    for v in 0..10 {
        assert!((p[v] - r[v]).abs() < 1e-15);
    }
}

#[test]
fn cut_step_examples() {
    let two = CutMatchingState::new(&[1.0, 1.0], 4.0);
    let s = cut_step(&two, &[0.3, -0.2], 0).unwrap();
    assert_eq!(s.l.len(), 1);
    assert_eq!(s.l.len() + s.r.len(), 2);

    let state = CutMatchingState::new(&[1.0; 8], 4.0);
    let mut p = vec![0.0; 8];
    p[5] = 10.0;
    let s = cut_step(&state, &p, 0).unwrap();
    assert_eq!(s.l, vec![5]);
    assert!(s.ok);
}

#[test]
fn k4_matching_instance_scales_by_two_over_phi() {
    let g = generators::complete(4);
    let state = CutMatchingState::new(&g.degrees(), 10.0);
    let p = [0.9, 0.1, -0.2, -0.5];
    let step = cut_step(&state, &p, 0).unwrap();
    let inst = build_matching_instance(&g, &state, &[step.clone()], 0.5, 0.1);
    assert_eq!(inst.subs.len(), 1);
    let sub = &inst.subs[0];
    assert!(sub.flow.graph.edges().iter().all(|e| e.cap == 4.0));
    // L is one whole vertex, but only its ⌈12/8⌉ = 2 share is a source
    assert_eq!(step.l.len(), 1);
    for v in 0..4 {
        assert_eq!(inst.source[v], if step.l.contains(&v) { 2.0 } else { 0.0 });
        assert_eq!(inst.sink[v], if step.r.contains(&v) { 3.0 } else { 0.0 });
    }
    let empty = build_matching_instance(&g, &state, &[], 0.5, 0.1);
    assert!(empty.subs.is_empty());
}

#[test]
fn two_components_give_two_sub_instances() {
    let g = generators::barbell(3);
    let (w, _) = run(&generators::barbell(3), 0.5, 0);
    // split by hand into the two triangles
    let mut state = w.state.clone();
    state.components = vec![
        expander_flow::cut_matching::Component { vertices: vec![0, 1, 2], active: true, counter: 0 },
        expander_flow::cut_matching::Component { vertices: vec![3, 4, 5], active: true, counter: 0 },
    ];
    state.d_t = g.degrees();
    let p = [0.5, 0.1, -0.3, 0.4, -0.1, 0.2];
    let steps = vec![cut_step(&state, &p, 0).unwrap(), cut_step(&state, &p, 1).unwrap()];
    let inst = build_matching_instance(&g, &state, &steps, 0.5, 0.1);
    assert_eq!(inst.subs.len(), 2);
    let (gg, _) = inst.global_graph(&g);
    // the bridge is gone
    assert_eq!(gg.m(), 6);
}

#[test]
fn psi_of_two_equal_vertices() {
    // F_0 = diag(d), μ = (1/2, 1/2)·d/d(V)·d ... computed by hand for d = (1, 1)
    let state = CutMatchingState::new(&[1.0, 1.0], 4.0);
    let psi = potential_psi(&state, 0, &[0, 1]).unwrap();
    // ψ₀ = d(V)·Σ_u d(u)‖e_u − μ‖² with μ = (1/2, 1/2): 2·(2·0.5) = 2
    assert!((psi - 2.0).abs() < 1e-12);
    let single = CutMatchingState::new(&[1.0, 0.0], 4.0);
    assert_eq!(potential_psi(&single, 0, &[0, 1]).unwrap(), 0.0);
}

#[test]
fn psi_median_decreases_on_k8() {
    let g = generators::complete(8);
    let rounds = 6;
    let mut per_round = vec![Vec::new(); rounds];
    for seed in 0..20 {
        let mut cfg = CutMatchingConfig::defaults(&g, 0.1);
        cfg.seed = seed;
        cfg.rounds = rounds;
        cfg.potential_mode = PotentialMode::Explicit;
        let w = run_decomposition(&g, &g.degrees(), &cfg, &mut ExactMatchingOracle::default()).unwrap();
        let mut prev = w.state.psi0.unwrap();
        for (t, r) in w.state.rounds.iter().enumerate() {
            let now = r.psi.unwrap();
            per_round[t].push(now / prev.max(1e-300));
            prev = now;
        }
    }
    for ratios in per_round.iter_mut().filter(|r| r.len() >= 10) {
        ratios.sort_by(f64::total_cmp);
        assert!(ratios[ratios.len() / 2] < 1.0, "{ratios:?}");
    }
}

#[test]
fn barbell_output_is_valid_at_phi_half() {
    // the game keeps the barbell whole: L holds an eighth of the weight and
    // always finds enough sink inside its own clique
    let g = generators::barbell(3);
    let (w, cfg) = run(&g, 0.5, 0);
    let d = g.degrees();
    let lg = (6f64).log2();
    for b in &w.partition.blocks {
        assert!(brute_near_expander(&g, &d, b, cfg.phi / (64.0 * lg * lg)).unwrap());
    }
    let dv: f64 = d.iter().sum();
    assert!(w.intercluster_capacity(&g) <= 16.0 * cfg.phi * g.log_nw() * dv);
}

#[test]
fn respecting_demands_on_k4() {
    let g = generators::complete(4);
    let (w, cfg) = run(&g, 0.5, 1);
    let mut b = vec![0.0; 4];
    b[0] = w.d_t[0];
    b[2] = -w.d_t[0].min(w.d_t[2]);
    b[0] = -b[2];
    let r = route_respecting_demands(&g, &w.state, &[b.clone()]).unwrap();
    assert!(r.congestion <= 4.0 * w.state.t as f64 / cfg.phi);
    let ex = r.flows[0].excess(&g);
    for v in 0..4 {
        assert!((ex[v] - b[v]).abs() < 1e-6 * 12.0);
    }
    let zero = route_respecting_demands(&g, &w.state, &[vec![0.0; 4]]).unwrap();
    assert!(zero.flows[0].is_zero());
    let mut bad = vec![0.0; 4];
    bad[0] = 10.0;
    bad[1] = -10.0;
    assert!(route_respecting_demands(&g, &w.state, &[bad]).is_err());
}

#[test]
fn respecting_demands_on_barbell_outputs() {
    let g = generators::barbell(4);
    let (w, cfg) = run(&g, 0.2, 3);
    let mut rng = generators::rng(3);
    let part = w.state.partition();
    let demands: Vec<Vec<f64>> = (0..50)
        .map(|_| {
            let b = &part.blocks[rng.random_range(0..part.blocks.len())];
            generators::cluster_demand(g.n(), b, &w.d_t, &mut rng)
        })
        .collect();
    let r = route_respecting_demands(&g, &w.state, &demands).unwrap();
    assert!(r.congestion <= 4.0 * w.state.t as f64 / cfg.phi);
    assert!(r.conservation_error <= 1e-6 * g.degrees().iter().sum::<f64>());
}

fn check_run(g: &CapGraph, phi: f64, seed: u64) -> Result<(), TestCaseError> {
    let (w, cfg) = run(g, phi, seed);
    let st = &w.state;
    let n = g.n();
    let d = g.degrees();
    let dv: f64 = d.iter().sum();

    // refinement: replay the recorded cuts on the round-0 partition
    let mut blocks: BTreeSet<Vec<usize>> = BTreeSet::from([(0..n).collect()]);
    let mut deleted_before: BTreeSet<usize> = BTreeSet::new();
    let mut stacked = vec![0.0; g.m()];
    for (k, rec) in st.rounds.iter().enumerate() {
        for c in &rec.cuts {
            prop_assert!(blocks.remove(&c.component), "cut inside a non-block");
            let cut: BTreeSet<usize> = c.cut.iter().copied().collect();
            prop_assert!(cut.iter().all(|v| c.component.contains(v)));
            let rest: Vec<usize> = c.component.iter().copied().filter(|v| !cut.contains(v)).collect();
            blocks.insert(c.cut.clone());
            if !rest.is_empty() {
                blocks.insert(rest);
            }
        }
        let dt = weighting_at(st, k + 1);
        let deleted: BTreeSet<usize> = (0..n).filter(|&v| dt[v] == 0.0 && d[v] > 0.0).collect();
        prop_assert!(deleted.is_superset(&deleted_before));
        prop_assert!((0..n).all(|v| dt[v] == 0.0 || dt[v] == d[v]));
        deleted_before = deleted;

        // matching flows stack to congestion 2t/φ
        let mut f = FlowAssignment::zero(g.m());
        for p in &rec.paths {
            add_path(&mut f, p, p.weight);
        }
        for (s, x) in stacked.iter_mut().zip(&f.f) {
            *s += x.abs();
        }
        let t = (k + 1) as f64;
        for (id, e) in g.edges().iter().enumerate() {
            prop_assert!(stacked[id] <= 2.0 * t / phi * e.cap * (1.0 + 1e-9));
        }
        let m_u = |u: usize| rec.matching.iter().filter(|x| x.0 == u || x.1 == u).map(|x| x.2).sum::<f64>();
        prop_assert!((0..n).all(|u| m_u(u) <= d[u] * (1.0 + 1e-9)));

        // counter potential
        prop_assert!(rec.potential_after <= rec.potential_before * (1.0 + 1e-12));
        if rec.covered_half {
            prop_assert!(rec.potential_after <= (1.0 - 1.0 / (2.0 * st.x_max)) * rec.potential_before * (1.0 + 1e-12));
        }
        // deleted demand
        let del = dv - dt.iter().sum::<f64>();
        prop_assert!(del <= 64.0 * t * cfg.eps1 * dv + 1e-9);
    }
    let final_blocks: BTreeSet<Vec<usize>> = w.partition.blocks.iter().cloned().collect();
    prop_assert_eq!(blocks, final_blocks);

    // counters never decrease along the refinement
    for c in &st.components {
        prop_assert!(c.counter as usize <= st.t);
    }

    // row sums of F_t where d_t > 0
    if n <= 64 {
        let f = explicit_flow_matrix(st, st.t).unwrap();
        for u in 0..n {
            if st.d_t[u] > 0.0 {
                let s: f64 = f[u].iter().sum();
                prop_assert!((s - d[u]).abs() <= 1e-9 * dv);
            }
        }
    }

    // cut accounting with the capacity scaling 2/φ of the matching instance
    let charges: f64 = st.rounds.iter().map(|r| r.charge).sum();
    prop_assert!(w.intercluster_capacity(g) <= phi / 2.0 * charges + 2.0 * cfg.eps1 * st.t as f64 * dv + 1e-9);
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn game_invariants_hold(seed in 0u64..10_000, n in 4usize..16, phi in 0.05f64..0.8) {
        let g = common::graph(n, n / 2, 4, seed);
        check_run(&g, phi, seed)?;
    }

    #[test]
    fn game_invariants_hold_on_planted(seed in 0u64..10_000, phi in 0.1f64..0.8) {
        let g = generators::sbm((6, 7), 0.8, 0.1, seed);
        check_run(&g, phi, seed)?;
    }

    #[test]
    fn cut_steps_meet_the_progress_conditions(seed in 0u64..10_000, n in 2usize..40) {
        let mut rng = generators::rng(seed);
        let d: Vec<f64> = (0..n).map(|_| rng.random_range(1..6) as f64).collect();
        let state = CutMatchingState::new(&d, 10.0);
        let r = expander_flow::cut_matching::random_unit_vector(n, &mut rng);
        let norm: f64 = r.iter().map(|x| x * x).sum::<f64>().sqrt();
        prop_assert!((norm - 1.0).abs() < 1e-12);
        let p = compute_projections(&state, &r);
        let s = cut_step(&state, &p, 0).unwrap();
        let items: Vec<(f64, f64)> = (0..n).map(|v| (p[v], d[v])).collect();
        let brute = brute_progress_set(&items).unwrap();
        prop_assert_eq!(s.ok, brute.ok);
        let dl: f64 = s.l.iter().map(|&v| d[v]).sum();
        let k = (d.iter().sum::<f64>() / 8.0).ceil();
        let straddle = s.l.iter().map(|&v| d[v]).fold(0.0, f64::max);
        prop_assert!(dl >= k && dl < k + straddle);
        let mut all: Vec<usize> = s.l.iter().chain(&s.r).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
    }
}

/// Best `S` over both orientations of `L` with `η` at the split, on unit
/// weights: the largest `Σ_S (s − μ)²` over `Σ (x − μ)²`.
fn best_progress_share(xs: &[f64]) -> f64 {
    let mut x = xs.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len();
    let k = n.div_ceil(8);
    let mu = x.iter().sum::<f64>() / n as f64;
    let total: f64 = x.iter().map(|v| (v - mu).powi(2)).sum();
    let share = |l: &[f64], eta: f64| -> f64 {
        l.iter().filter(|&&s| 9.0 * (s - eta).powi(2) >= (s - mu).powi(2)).map(|s| (s - mu).powi(2)).sum::<f64>()
    };
    share(&x[..k], x[k]).max(share(&x[n - k..], x[n - k - 1])) / total
}

#[test]
fn evenly_spaced_values_admit_no_progress_set() {
    let xs: Vec<f64> = (1..=16).map(f64::from).collect();
    assert_eq!(best_progress_share(&xs), 0.0);
    let items: Vec<(f64, f64)> = xs.iter().map(|&x| (x, 1.0)).collect();
    assert!(!brute_progress_set(&items).unwrap().ok);
    // two far outliers are the easy case
    let mut xs = vec![0.0; 14];
    xs.extend([100.0, 100.0]);
    assert!(best_progress_share(&xs) >= 1.0 / 36.0);
    let items: Vec<(f64, f64)> = xs.iter().map(|&x| (x, 1.0)).collect();
    assert!(brute_progress_set(&items).unwrap().ok);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn progress_set_found_whenever_one_exists(xs in prop::collection::vec(-1e3f64..1e3, 3..64)) {
        let items: Vec<(f64, f64)> = xs.iter().map(|&x| (x, 1.0)).collect();
        let share = best_progress_share(&xs);
        let ok = brute_progress_set(&items).unwrap().ok;
        prop_assert!(!ok || share >= 1.0 / 36.0 - 1e-9);
        if share >= 1.0 / 36.0 + 1e-9 {
            prop_assert!(ok, "share {share} but no set returned");
        }
    }
}
