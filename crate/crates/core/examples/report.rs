//! Parses a graph in the text format and prints the max-flow report the binary writes.
use expander_flow::hierarchy::Backend;
use expander_flow::report::{parse_dimacs, run, to_json, Command, Overrides, RunConfig, VerifyLevel};

const INPUT: &str = "c two triangles joined by two edges
p gr 6 8
a 1 2 3
a 2 3 3
a 1 3 3
a 4 5 3
a 5 6 3
a 4 6 3
a 3 4 1
a 2 5 2
b 1 1
b 6 -1
";

fn main() -> expander_flow::Result<()> {
    let input = parse_dimacs(INPUT)?;
    let cfg = RunConfig {
        command: Command::Maxflow,
        overrides: Overrides::default(),
        eps: 0.1,
        seed: 0,
        oracle: Backend::Exact,
        verify: VerifyLevel::Invariants,
        threads: 0,
    };
    let out = run(&cfg, &input)?;
    println!("{}", to_json(&out.report)?);
    println!("checks passed: {}", out.passed);
    Ok(())
}
