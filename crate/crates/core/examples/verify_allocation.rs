//! Checking an allocation that did not come from the protocol.

use envyfree::prelude::*;
use envyfree::verify::check_disjoint;

fn piece(l: (i64, i64), h: (i64, i64)) -> Piece {
    Piece::from_pairs([(r(l.0, l.1), r(h.0, h.1))]).unwrap()
}

fn main() {
    let left_heavy = ValuationSpec::steps(&[(r(0, 1), r(3, 1)), (r(1, 2), r(1, 1))]).unwrap();
    let specs = vec![left_heavy, ValuationSpec::uniform(), ValuationSpec::uniform()];

    // Equal thirds: agent 1 envies whoever holds the first third.
    let alloc: Allocation = [
        (AgentId(1), piece((2, 3), (1, 1))),
        (AgentId(2), piece((0, 1), (1, 3))),
        (AgentId(3), piece((1, 3), (2, 3))),
    ]
    .into_iter()
    .collect();
    check_disjoint(&alloc).unwrap();
    let report = check_envy_free(&alloc, &specs).unwrap();
    println!("envy-free: {}", report.envy_free);
    for w in &report.witnesses {
        println!("  agent {} values own {} but agent {}'s {}", w.envier, w.own_value, w.envied, w.other_value);
    }

    // Leaving [1/2, 2/3] unallocated: who would not mind anyone else getting it?
    let mut partial = alloc.clone();
    partial.insert(AgentId(1), piece((0, 1), (1, 3)));
    partial.insert(AgentId(2), piece((1, 3), (1, 2)));
    partial.insert(AgentId(3), piece((2, 3), (1, 1)));
    let residue = piece((1, 2), (2, 3));
    let graph = DominationGraph::compute(&partial, &residue, &specs).unwrap();
    for (j, i) in &graph.edges {
        println!("  agent {j} dominates agent {i}");
    }
}
