//! Choosing a compromise round from a table of bonuses.
//!
//! No entry of the chosen row is the strict maximum of its column, so each
//! agent's bonus there is covered by the other rounds.

use envyfree::protocol::{select_compromise_iteration, BonusTable};
use envyfree::ratio::r;
use envyfree::verify::brute_force_compromise_rows;

fn main() {
    let table = BonusTable::new(vec![
        vec![r(1, 2), r(0, 1), r(1, 8)],
        vec![r(1, 4), r(1, 3), r(1, 8)],
        vec![r(0, 1), r(1, 5), r(1, 2)],
        vec![r(1, 4), r(1, 5), r(1, 8)],
    ]);
    let chosen = select_compromise_iteration(&table);
    println!("chosen row {chosen}");
    println!("all valid rows {:?}", brute_force_compromise_rows(&table));
    assert!(brute_force_compromise_rows(&table).contains(&chosen));
}
