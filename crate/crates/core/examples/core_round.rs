//! One round of the four-agent core protocol with agent 4 cutting.
//!
//! Prints which case fired, who trimmed what, and what is left over.

use envyfree::harness::quarter_profile;
use envyfree::prelude::*;
use envyfree::protocol::significant_pieces;

fn main() {
    // Agents 1 and 2 both want the first quarter most; 3 wants the last.
    let specs = vec![
        quarter_profile([5, 3, 1, 1]),
        quarter_profile([5, 1, 3, 1]),
        quarter_profile([1, 1, 3, 5]),
        ValuationSpec::uniform(),
    ];
    let mut engine = QueryEngine::simulated(&specs);
    let out = core_protocol(&mut engine, AgentId(4), [AgentId(1), AgentId(2), AgentId(3)], &Piece::whole()).unwrap();

    println!("case {}", out.case.pattern());
    for (k, q) in out.quarters.iter().enumerate() {
        let slot = &out.slots[k];
        let cut = slot.cut.as_ref().map(|c| format!(" trimmed at {c}")).unwrap_or_default();
        println!("  piece {k}: {q} -> agent {}{cut}", slot.holder);
    }
    for t in &out.trims {
        println!("  agent {} trims piece {} at {} ({:?})", t.agent, t.piece_id, t.point, t.target_rank);
    }
    println!("residue {}", out.residue);
    println!("significant holders {:?}", significant_pieces(&out));

    let report = check_core_postconditions(&out, &specs).unwrap();
    let c = engine.counters();
    println!("{} queries, {} cuts; postconditions ok: {}", c.queries, c.cuts, report.ok);
    assert!(report.ok);
}
