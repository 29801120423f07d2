//! Routes random cluster demands through the recorded matchings and the grafting paths.
use expander_flow::cut_matching::{route_respecting_demands, run_decomposition, CutMatchingConfig, ExactMatchingOracle};
use expander_flow::generators;
use expander_flow::grafting::{graft, route_grafted_demands, ExactGraftingOracle};

fn main() -> expander_flow::Result<()> {
    let g = generators::pendant_clique(10, 4);
    let d = g.degrees();
    let cfg = CutMatchingConfig::defaults(&g, 0.1);
    let weak = run_decomposition(&g, &d, &cfg, &mut ExactMatchingOracle { threads: 0 })?;
    let mut rng = generators::rng(1);

    let part = weak.state.partition();
    let demands: Vec<Vec<f64>> = part
        .blocks
        .iter()
        .filter(|b| b.len() > 1)
        .map(|b| generators::cluster_demand(g.n(), b, &weak.d_t, &mut rng))
        .collect();
    let r = route_respecting_demands(&g, &weak.state, &demands)?;
    println!("mixing: {} demands, congestion {:.2} (bound 4T/phi = {:.0})", demands.len(), r.congestion, 4.0 * cfg.rounds as f64 / cfg.phi);

    let psi = 1.0 / 64.0;
    let fin = graft(&g, &weak, psi, 1.0 / 16.0, &mut ExactGraftingOracle)?;
    let bd = fin.boundary_deg(&g);
    let w: Vec<f64> = (0..g.n()).map(|v| d[v] + bd[v]).collect();
    let demands: Vec<Vec<f64>> =
        fin.certified.iter().filter(|c| c.len() > 1).map(|c| generators::cluster_demand(g.n(), c, &w, &mut rng)).collect();
    let r = route_grafted_demands(&g, &weak.state, &fin, &demands)?;
    println!("grafted: congestion {:.2} (bound T/phi + 2/psi = {:.0})", r.congestion, cfg.rounds as f64 / cfg.phi + 2.0 / psi);
    Ok(())
}
