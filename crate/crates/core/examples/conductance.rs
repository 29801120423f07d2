//! Conductance of the planted cut of a barbell against the brute-force minimum.
use expander_flow::exact::{brute_min_ratio, brute_near_expander};
use expander_flow::generators;
use expander_flow::graph::conductance;

fn main() -> expander_flow::Result<()> {
    let g = generators::barbell(5);
    let d = g.degrees();
    let half: Vec<usize> = (0..5).collect();
    println!("planted cut: {:.4}", conductance(&g, &d, &half)?.value);
    let all: Vec<usize> = (0..g.n()).collect();
    let (best, witness) = brute_min_ratio(&g, &d, &all)?;
    println!("minimum over all cuts: {best:.4} at {witness:?}");
    for phi in [0.01, 0.05, 0.1] {
        println!("near-expander at phi = {phi}: {}", brute_near_expander(&g, &d, &all, phi)?);
    }
    Ok(())
}
