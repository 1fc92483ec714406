//! The three-agent protocol, on a profile that needs its reallocation step.

use envyfree::prelude::*;

fn main() {
    let a = ValuationSpec::steps(&[(r(0, 1), r(1, 1)), (r(5, 6), r(4, 1))]).unwrap();
    let b = ValuationSpec::steps(&[(r(0, 1), r(1, 1)), (r(5, 6), r(3, 1))]).unwrap();
    let specs = vec![a, b, ValuationSpec::uniform()];

    let mut engine = QueryEngine::simulated(&specs);
    let out = three_agent_protocol(&mut engine, [AgentId(1), AgentId(2), AgentId(3)], &Piece::whole()).unwrap();
    for (agent, piece) in &out.allocation {
        println!("agent {agent}: {piece}");
    }
    println!(
        "rounds {}, matching exit {}, reallocated {}, divide-and-choose {}",
        out.rounds, out.matching_exit, out.permuted, out.divide_and_choose
    );
    println!("{} cuts", engine.counters().cuts);
    assert!(check_envy_free(&out.allocation, &specs).unwrap().envy_free);
}
