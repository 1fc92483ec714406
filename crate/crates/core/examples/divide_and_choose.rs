//! Two agents split a piece: one halves it by its own measure, the other picks.

use envyfree::prelude::*;

fn main() {
    let a = ValuationSpec::uniform();
    let b = ValuationSpec::steps(&[(r(0, 1), r(1, 1)), (r(3, 4), r(9, 1))]).unwrap();
    let specs = vec![a, b];
    let mut engine = QueryEngine::simulated(&specs);
    let alloc = divide_and_choose(&mut engine, AgentId(1), AgentId(2), &Piece::whole()).unwrap();
    for (agent, piece) in &alloc {
        println!("agent {agent}: {piece} worth {}", specs[agent.index()].eval_piece(piece));
    }
    println!("{} queries", engine.counters().queries);
}
