//! Splits an exact max flow into weighted paths and cuts them at a block boundary.
use expander_flow::exact::{exact_max_flow, FlowInstance};
use expander_flow::generators;
use expander_flow::paths::{path_decompose, truncate_at_boundary};

fn main() -> expander_flow::Result<()> {
    let g = generators::barbell(4);
    let n = g.n();
    let mut source = vec![0.0; n];
    let mut sink = vec![0.0; n];
    source[0] = 3.0;
    sink[n - 1] = 3.0;
    let inst = FlowInstance { graph: g.clone(), source, sink };
    let r = exact_max_flow(&inst)?;
    let (src, snk): (Vec<f64>, Vec<f64>) = r.flow.excess(&g).iter().map(|&x| (x.max(0.0), (-x).max(0.0))).unzip();
    let dec = path_decompose(&g, &r.flow, &src, &snk)?;
    println!("max flow {} as {} paths", r.value, dec.paths.len());
    for p in &dec.paths {
        println!("  {:?} weight {}", p.vertices, p.weight);
    }
    // keep each path until it leaves the clique it started in
    let block_of: Vec<usize> = (0..n).map(|v| usize::from(v >= n / 2)).collect();
    let cut = truncate_at_boundary(&dec, &block_of);
    for p in &cut.paths {
        println!("  truncated {:?}", p.vertices);
    }
    Ok(())
}
