//! Almost-route with the gradient solver, checked against exact max flow.
use expander_flow::generators;
use expander_flow::hierarchy::{build_hierarchy, HierarchyConfig};
use expander_flow::sherman::{verify_almost_route, AlmostRouteInput, AlmostRouteOutput, AlmostRouter, ExactRouter, Residual, SoftmaxRouter};

fn describe(out: &AlmostRouteOutput) -> String {
    match out {
        AlmostRouteOutput::Cut { value, .. } => format!("cut of value {value:.3}"),
        AlmostRouteOutput::Flow { residual_demand, .. } => {
            format!("flow, residual l1 {:.4}", residual_demand.iter().map(|x| x.abs()).sum::<f64>())
        }
    }
}

fn main() -> expander_flow::Result<()> {
    let g = generators::random_connected(20, 30, 4, 5);
    let h = build_hierarchy(&g, HierarchyConfig::defaults(&g))?;
    let residual = Residual::full(&g);
    let mut soft = SoftmaxRouter::default();
    for tau in [1.0, 3.0, 6.0, 12.0] {
        let inp = AlmostRouteInput { graph: &g, residual: &residual, s: 0, t: 19, eps: 0.1, tau, family: &h.family.family };
        let b = soft.route(&inp)?;
        verify_almost_route(&inp, &b)?;
        let a = ExactRouter.route(&inp)?;
        println!("tau {tau:>4}: gradient {} ({} iterations) | exact {}", describe(&b), soft.last_iterations, describe(&a));
    }
    Ok(())
}
