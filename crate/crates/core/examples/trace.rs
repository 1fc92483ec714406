//! Prints the query transcript and protocol trace of one run as JSON.

use envyfree::harness::{gen_profile, TrialConfig};
use envyfree::prelude::*;

fn main() {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let specs = gen_profile(&TrialConfig { seed, ..TrialConfig::default() }, 0);
    let mut engine = QueryEngine::simulated(&specs);
    overall_protocol(&mut engine, &Piece::whole()).unwrap();

    for e in engine.transcript().entries.iter().take(8) {
        let target = e.target.as_ref().map(|t| format!(" target {t}")).unwrap_or_default();
        println!("#{} agent {} {:?} on {}{target} -> {}", e.seq, e.agent, e.kind, e.piece, e.answer);
    }
    println!("...");
    for ev in engine.trace().iter().filter(|e| e.event_kind != "query") {
        println!("{} {}", ev.phase, serde_json::json!({ "event": ev.event_kind, "payload": ev.payload }));
    }
}
