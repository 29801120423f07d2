//! Picks the heavy end `L` of a weighted multiset and a progress set inside it.
use expander_flow::exact::brute_progress_set;
use expander_flow::generators;
use rand::Rng;

fn main() -> expander_flow::Result<()> {
    let mut rng = generators::rng(7);
    for size in [4, 12, 40] {
        let items: Vec<(f64, f64)> =
            (0..size).map(|_| (rng.random_range(-1e3..1e3), rng.random_range(1..5) as f64)).collect();
        let p = brute_progress_set(&items)?;
        println!(
            "size {size:>2}: case {:?}, eta {:.2}, |L| = {}, |S| = {}, ok = {}",
            p.case,
            p.eta,
            p.l.len(),
            p.s.len(),
            p.ok
        );
    }
    Ok(())
}
