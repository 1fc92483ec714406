//! Handing out leftover cake once enough agents dominate each other.

use envyfree::prelude::*;
use envyfree::protocol::Dominance;

fn main() {
    let specs = vec![ValuationSpec::uniform(); 4];
    let ids = [AgentId(1), AgentId(2), AgentId(3), AgentId(4)];
    let residue = Piece::from_pairs([(r(1, 2), r(3, 4))]).unwrap();

    // 1 and 2 both dominate 3 and 4: those two split the residue.
    let mut graph = Dominance::default();
    for j in [1, 2] {
        for i in [3, 4] {
            graph.add(AgentId(j), AgentId(i));
        }
    }
    graph.add(AgentId(1), AgentId(2));
    let mut engine = QueryEngine::simulated(&specs);
    let (alloc, branch) = post_double_domination(&mut engine, &residue, &graph, ids).unwrap();
    println!("{branch:?}");
    for (a, p) in &alloc {
        println!("  agent {a}: {p}");
    }

    // Everyone dominates agent 3: it takes the lot.
    let mut graph = Dominance::default();
    for j in [1, 2, 4] {
        graph.add(AgentId(j), AgentId(3));
    }
    let mut engine = QueryEngine::simulated(&specs);
    let (_, branch) = post_double_domination(&mut engine, &residue, &graph, ids).unwrap();
    println!("{branch:?}");
}
