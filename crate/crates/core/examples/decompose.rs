//! Weak decomposition with deletions, then grafting, on a clique with a small clique hanging off it.
use expander_flow::cut_matching::{run_decomposition, CutMatchingConfig, ExactMatchingOracle};
use expander_flow::generators;
use expander_flow::grafting::{graft, ExactGraftingOracle};

fn main() -> expander_flow::Result<()> {
    let g = generators::pendant_clique(10, 4);
    let d = g.degrees();
    let cfg = CutMatchingConfig::defaults(&g, 0.5);
    let weak = run_decomposition(&g, &d, &cfg, &mut ExactMatchingOracle { threads: 0 })?;
    println!(
        "weak: {} blocks after {} rounds, intercluster capacity {}, deleted demand {}",
        weak.partition.len(),
        weak.state.t,
        weak.intercluster_capacity(&g),
        weak.state.deleted_demand()
    );
    let fin = graft(&g, &weak, 1.0 / 64.0, 1.0 / 16.0, &mut ExactGraftingOracle)?;
    for (i, c) in fin.certified.iter().enumerate() {
        println!("certified {i}: {c:?}");
    }
    println!("discarded: {:?}", fin.discarded);
    println!("final cut capacity {}", fin.cut_capacity(&g));
    Ok(())
}
