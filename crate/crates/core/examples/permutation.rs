//! Profiles on which the overall protocol reallocates a significant piece.
//!
//! For each one, prints the reallocation case, the bonus table it chose the
//! compromise round from, and confirms the final allocation.

use envyfree::harness::{adversarial_profiles, run_profile, ProtocolKind};
use envyfree::prelude::*;

fn main() {
    for (label, specs) in adversarial_profiles(ProtocolKind::FourAgent) {
        if !label.starts_with("permutation") {
            continue;
        }
        let run = run_profile(&label, ProtocolKind::FourAgent, &specs);
        let out = run.four.expect("run completes");
        for phase in &out.phases {
            let Some(p) = &phase.permutation else { continue };
            println!("{label}: cutter {} case {}", phase.cutter, p.case.label());
            println!("  piece moves from agent {} to agent {} in round {}", p.sig_holder, p.new_holder, p.row);
            for (k, row) in p.bonus_table.rows.iter().enumerate() {
                let marker = if k == p.compromise_row { "*" } else { " " };
                let cells: Vec<String> = row.iter().map(|x| x.to_string()).collect();
                println!("  {marker} [{}]", cells.join(", "));
            }
        }
        assert!(check_envy_free(&out.allocation, &specs).unwrap().envy_free);
    }
}
