//! Four agents with different tastes share the cake without envy.
//!
//! Run with `cargo run --example quickstart`.

use envyfree::prelude::*;

fn main() {
    // Density per quarter of the cake. Agent 1 likes the left end, agent 2
    // the right, agent 3 the middle, agent 4 everything equally.
    let step = |d: [i64; 4]| {
        let steps: Vec<_> = d.iter().enumerate().map(|(k, &x)| (r(k as i64, 4), r(x, 1))).collect();
        ValuationSpec::steps(&steps).unwrap()
    };
    let specs = vec![step([6, 2, 1, 1]), step([1, 1, 2, 6]), step([1, 4, 4, 1]), ValuationSpec::uniform()];

    let mut engine = QueryEngine::simulated(&specs);
    let out = overall_protocol(&mut engine, &Piece::whole()).expect("protocol completes");

    for (agent, piece) in &out.allocation {
        let v = &specs[agent.index()];
        println!("agent {agent}: {piece}  worth {} of {}", v.eval_piece(piece), v.total());
    }
    let c = engine.counters();
    println!("{} queries, {} cuts, {} core rounds", c.queries, c.cuts, out.core_runs());

    let report = check_envy_free(&out.allocation, &specs).unwrap();
    assert!(report.envy_free && out.residue.is_empty());
    println!("envy-free and complete");
}
