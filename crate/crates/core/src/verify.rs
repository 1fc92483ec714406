//! Certification oracles.
//!
//! These read valuations directly and never go through the query layer, so
//! checking an outcome costs nothing in the protocol's accounting. They look
//! only at allocations, leftovers and valuations, never at how a protocol
//! reached them.

use std::collections::{BTreeMap, BTreeSet};
use serde::{Deserialize, Serialize};

use crate::cake::{Piece, ValuationSpec};
use crate::protocol::{Allocation, BonusTable, CoreOutcome};
use crate::query::AgentId;
use crate::ratio::Ratio;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum VerifyError {
    #[error("pieces of agents {0} and {1} overlap")]
    OverlapDetected(AgentId, AgentId),
    #[error("no valuation for agent {0}")]
    MissingSpec(AgentId),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnvyWitness {
    pub envier: AgentId,
    pub envied: AgentId,
    pub own_value: Ratio,
    pub other_value: Ratio,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnvyReport {
    pub envy_free: bool,
    pub witnesses: Vec<EnvyWitness>,
}

fn spec(specs: &[ValuationSpec], a: AgentId) -> Result<&ValuationSpec, VerifyError> {
    specs.get(a.index()).ok_or(VerifyError::MissingSpec(a))
}

/// Fails if two pieces share a set of positive measure.
pub fn check_disjoint(allocation: &Allocation) -> Result<(), VerifyError> {
    let items: Vec<(&AgentId, &Piece)> = allocation.iter().collect();
    for (x, (a, p)) in items.iter().enumerate() {
        for (b, q) in &items[x + 1..] {
            if p.overlaps(q) {
                return Err(VerifyError::OverlapDetected(**a, **b));
            }
        }
    }
    Ok(())
}

/// Exact pairwise envy check; `specs[k]` is agent `k + 1`'s valuation.
pub fn check_envy_free(allocation: &Allocation, specs: &[ValuationSpec]) -> Result<EnvyReport, VerifyError> {
    check_disjoint(allocation)?;
    let mut witnesses = Vec::new();
    for (&i, own) in allocation {
        let v = spec(specs, i)?;
        let own_value = v.eval_piece(own);
        for (&j, other) in allocation {
            if i == j {
                continue;
            }
            let other_value = v.eval_piece(other);
            if other_value > own_value {
                witnesses.push(EnvyWitness { envier: i, envied: j, own_value: own_value.clone(), other_value });
            }
        }
    }
    Ok(EnvyReport { envy_free: witnesses.is_empty(), witnesses })
}

/// Whether `j` would stay envy-free of `i` even if `i` also got all of `residue`.
pub fn check_domination(
    j: AgentId,
    i: AgentId,
    allocation: &Allocation,
    residue: &Piece,
    specs: &[ValuationSpec],
) -> Result<bool, VerifyError> {
    check_disjoint(allocation)?;
    let v = spec(specs, j)?;
    let empty = Piece::empty();
    let own = v.eval_piece(allocation.get(&j).unwrap_or(&empty));
    let theirs = v.eval_piece(allocation.get(&i).unwrap_or(&empty)) + v.eval_piece(residue);
    Ok(own >= theirs)
}

/// Every "j dominates i" relation among the agents of `allocation`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DominationGraph {
    pub edges: BTreeSet<(AgentId, AgentId)>,
}

impl DominationGraph {
    pub fn compute(
        allocation: &Allocation,
        residue: &Piece,
        specs: &[ValuationSpec],
    ) -> Result<DominationGraph, VerifyError> {
        let mut edges = BTreeSet::new();
        for &j in allocation.keys() {
            for &i in allocation.keys() {
                if i != j && check_domination(j, i, allocation, residue, specs)? {
                    edges.insert((j, i));
                }
            }
        }
        Ok(DominationGraph { edges })
    }

    pub fn out_degree(&self, j: AgentId) -> usize {
        self.edges.iter().filter(|(a, _)| *a == j).count()
    }

    /// Every listed agent dominates at least two others.
    pub fn double_domination(&self, agents: &[AgentId]) -> bool {
        agents.iter().all(|&a| self.out_degree(a) >= 2)
    }
}

/// Whether the pieces and the residue tile `cake` exactly.
pub fn check_conservation(allocation: &Allocation, residue: &Piece, cake: &Piece) -> bool {
    let mut union = residue.clone();
    let mut length = residue.length();
    for p in allocation.values() {
        union = union.union(p);
        length += p.length();
    }
    union == *cake && length == cake.length()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoreReport {
    pub envy: EnvyReport,
    pub cutter_complete: bool,
    pub non_cutter_complete: bool,
    pub partial_pieces: usize,
    pub conservation: bool,
    pub ok: bool,
}

/// Checks one core round: envy-free, the cutter and some other agent hold
/// untouched pieces, at most two pieces are trimmed, nothing lost or doubled.
pub fn check_core_postconditions(outcome: &CoreOutcome, specs: &[ValuationSpec]) -> Result<CoreReport, VerifyError> {
    let envy = check_envy_free(&outcome.allocation, specs)?;
    let complete = |p: &Piece| outcome.quarters.contains(p);
    let empty = Piece::empty();
    let cutter_complete = complete(outcome.allocation.get(&outcome.cutter).unwrap_or(&empty));
    let non_cutter_complete = outcome
        .allocation
        .iter()
        .any(|(a, p)| *a != outcome.cutter && complete(p));
    let partial_pieces = outcome.allocation.values().filter(|p| !complete(p)).count();
    let conservation = check_conservation(&outcome.allocation, &outcome.residue, &outcome.cake);
    let ok = envy.envy_free && cutter_complete && non_cutter_complete && partial_pieces <= 2 && conservation;
    Ok(CoreReport { envy, cutter_complete, non_cutter_complete, partial_pieces, conservation, ok })
}

/// Every row none of whose entries is the unique maximum of its column.
pub fn brute_force_compromise_rows<T: Ord>(table: &BonusTable<T>) -> BTreeSet<usize> {
    let rows = &table.rows;
    (0..rows.len())
        .filter(|&k| {
            (0..rows[k].len()).all(|c| rows.iter().enumerate().any(|(j, row)| j != k && row[c] >= rows[k][c]))
        })
        .collect()
}

/// Sum over several allocations of each agent's pieces.
pub fn combine(allocations: &[&Allocation]) -> Allocation {
    let mut out: BTreeMap<AgentId, Piece> = BTreeMap::new();
    for alloc in allocations {
        for (a, p) in alloc.iter() {
            let e = out.entry(*a).or_insert_with(Piece::empty);
            *e = e.union(p);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ratio::r;

    fn piece(a: (i64, i64), b: (i64, i64)) -> Piece {
        Piece::from_pairs([(r(a.0, a.1), r(b.0, b.1))]).unwrap()
    }

    fn quarters() -> Allocation {
        (0..4)
            .map(|k| (AgentId::from_index(k), piece((k as i64, 4), (k as i64 + 1, 4))))
            .collect()
    }

    #[test]
    fn quarters_are_envy_free_for_identical_agents() {
        let specs = vec![ValuationSpec::uniform(); 4];
        assert!(check_envy_free(&quarters(), &specs).unwrap().envy_free);
    }

    #[test]
    fn unequal_lengths_produce_witnesses() {
        let specs = vec![ValuationSpec::uniform(); 4];
        let alloc: Allocation = [
            (AgentId(1), piece((0, 1), (1, 2))),
            (AgentId(2), piece((1, 2), (3, 4))),
            (AgentId(3), piece((3, 4), (7, 8))),
            (AgentId(4), piece((7, 8), (1, 1))),
        ]
        .into_iter()
        .collect();
        let rep = check_envy_free(&alloc, &specs).unwrap();
        assert!(!rep.envy_free);
        assert!(rep.witnesses.iter().any(|w| w.envier == AgentId(2) && w.envied == AgentId(1)));
    }

    #[test]
    fn overlap_is_an_error() {
        let alloc: Allocation =
            [(AgentId(1), piece((0, 1), (1, 2))), (AgentId(2), piece((1, 4), (3, 4)))].into_iter().collect();
        assert_eq!(
            check_envy_free(&alloc, &[ValuationSpec::uniform(), ValuationSpec::uniform()]),
            Err(VerifyError::OverlapDetected(AgentId(1), AgentId(2)))
        );
    }

    #[test]
    fn domination_needs_room_for_the_residue() {
        let specs = vec![ValuationSpec::uniform(); 2];
        let alloc: Allocation =
            [(AgentId(1), piece((0, 1), (1, 4))), (AgentId(2), piece((1, 4), (3, 8)))].into_iter().collect();
        let residue = piece((3, 4), (1, 1));
        assert!(!check_domination(AgentId(1), AgentId(2), &alloc, &residue, &specs).unwrap());
        assert!(check_domination(AgentId(1), AgentId(2), &alloc, &Piece::empty(), &specs).unwrap());
    }

    #[test]
    fn empty_residue_domination_is_non_envy() {
        let specs = vec![ValuationSpec::uniform(); 4];
        let g = DominationGraph::compute(&quarters(), &Piece::empty(), &specs).unwrap();
        assert_eq!(g.edges.len(), 12);
        assert!(g.double_domination(&[AgentId(1), AgentId(2), AgentId(3), AgentId(4)]));
    }

    #[test]
    fn compromise_rows_by_enumeration() {
        let t = BonusTable::new(vec![vec![5, 1, 0], vec![1, 5, 0], vec![2, 2, 0], vec![0, 0, 9]]);
        assert_eq!(brute_force_compromise_rows(&t), [2].into_iter().collect());
        let same = BonusTable::new(vec![vec![1u32, 1, 1]; 4]);
        assert_eq!(brute_force_compromise_rows(&same).len(), 4);
    }

    #[test]
    fn conservation_catches_a_missing_slice() {
        let alloc = quarters();
        assert!(check_conservation(&alloc, &Piece::empty(), &Piece::whole()));
        let mut short = alloc.clone();
        short.insert(AgentId(4), piece((7, 8), (1, 1)));
        assert!(!check_conservation(&short, &Piece::empty(), &Piece::whole()));
    }
}
