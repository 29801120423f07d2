//! One-sided fair cut on a path of bottlenecks.
use expander_flow::fair_cut::{fair_cut, ExactDemandRouter, FairCutConfig, FairCutInput};
use expander_flow::laminar::LaminarFamily;
use expander_flow::sherman::ExactRouter;
use expander_flow::CapGraph;

fn main() -> expander_flow::Result<()> {
    // 5 units arrive at 1, only 1 unit gets past (1,2)
    let g = CapGraph::from_edges(5, &[(0, 1, 5), (1, 2, 1), (2, 3, 4), (3, 4, 4)])?;
    let family = LaminarFamily::new(&g, vec![vec![2], vec![2, 3]])?;
    let inp = FairCutInput { graph: &g, u_set: vec![false, true, true, true, true], t: 4, family: &family, q: 1.0 };
    let r = fair_cut(&inp, &FairCutConfig::new(0.1), &mut ExactRouter, &mut ExactDemandRouter)?;
    let a: Vec<usize> = (0..g.n()).filter(|&v| r.a[v]).collect();
    println!("A = {a:?}, dA = {}, dU = {}", r.delta_a, r.delta_u);
    println!("min inward saturation {:.3}, t received {}", r.min_saturation, r.t_received);
    for it in &r.iterations {
        println!("  k={} Phi={:.4} {:?}", it.k, it.phi, it.kind);
    }
    Ok(())
}
