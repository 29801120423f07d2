//! Approximate s-t max flow against exact max flow.
use expander_flow::exact::{exact_max_flow, FlowInstance};
use expander_flow::generators;
use expander_flow::hierarchy::{build_hierarchy, HierarchyConfig};
use expander_flow::sherman::{approx_max_flow, SoftmaxRouter};

fn main() -> expander_flow::Result<()> {
    let n = 40;
    let g = generators::random_connected(n, 60, 6, 0);
    let h = build_hierarchy(&g, HierarchyConfig::defaults(&g))?;
    let mut source = vec![0.0; n];
    let mut sink = vec![0.0; n];
    source[0] = g.total_cap();
    sink[n - 1] = g.total_cap();
    let exact = exact_max_flow(&FlowInstance { graph: g.clone(), source, sink })?.value;
    for eps in [0.1, 0.01] {
        let r = approx_max_flow(&g, 0, n - 1, eps, &h, &mut SoftmaxRouter::default())?;
        println!(
            "eps {eps}: value {:.4} of {exact} ({:.3}), certified {}, {} almost-route calls, congestion {:.3}",
            r.value,
            r.value / exact,
            r.certified,
            r.almost_calls,
            r.flow.congestion(&g)
        );
    }
    Ok(())
}
