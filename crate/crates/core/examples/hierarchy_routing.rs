//! Builds an expander hierarchy and compares its routing with the optimum.
use expander_flow::exact::min_congestion_route;
use expander_flow::generators;
use expander_flow::hierarchy::{build_hierarchy, HierarchyConfig};

fn main() -> expander_flow::Result<()> {
    let g = generators::random_connected(30, 45, 5, 2);
    let h = build_hierarchy(&g, HierarchyConfig::defaults(&g))?;
    println!("depth {}, family of {} cuts, quality bound {:.0}", h.depth(), h.family.family.len(), h.quality());
    for l in &h.levels {
        println!("level {}: {} certified, boundary {}", l.index, l.p.len(), l.delta);
    }
    let mut rng = generators::rng(3);
    for _ in 0..5 {
        let b = generators::random_demand(g.n(), 2.0, &mut rng);
        let r = h.route_scaled(&g, &b)?;
        let (opt, _) = min_congestion_route(&g, &b)?;
        println!("estimate {:.3}  optimum {:.3}  routed {:.3}", r.estimate, opt, r.congestion);
    }
    Ok(())
}
