//! Reallocation of one core round so that the significant piece leaves the
//! agent that kept receiving it.
//!
//! Candidates are tried in the order of the named sub-cases, then by a plain
//! search over all reassignments. A candidate is accepted only if, using
//! nothing but the answers already given, every non-cutter provably keeps its
//! trimmed-to value and stays envy-free summed over all rounds of the phase.

use serde::{Deserialize, Serialize};

use super::core::CoreOutcome;
use super::{violation, ProtocolError};
use crate::query::AgentId;
use crate::ratio::Ratio;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PermutationCase {
    /// The competitor held a trimmed piece on which the holder was the other top trimmer: swap.
    SwapTrimmed,
    /// The competitor held a trimmed piece whose other top trimmer is the third non-cutter.
    ThirdTakesTrimmed,
    /// The competitor held a complete piece the holder accepts: swap.
    SwapComplete,
    /// The cutter's piece suits the holder; the cutter moves to the competitor's piece.
    CutterPiece,
    /// The third non-cutter's complete piece suits the holder; the third agent moves.
    ThirdMoves,
    /// None of the named moves certified; found by exhaustive search.
    Search,
}

impl PermutationCase {
    pub const NAMED: [PermutationCase; 5] = [
        PermutationCase::SwapTrimmed,
        PermutationCase::ThirdTakesTrimmed,
        PermutationCase::SwapComplete,
        PermutationCase::CutterPiece,
        PermutationCase::ThirdMoves,
    ];

    pub fn label(self) -> &'static str {
        match self {
            PermutationCase::SwapTrimmed => "1a",
            PermutationCase::ThirdTakesTrimmed => "1b",
            PermutationCase::SwapComplete => "2a",
            PermutationCase::CutterPiece => "2b",
            PermutationCase::ThirdMoves => "2c",
            PermutationCase::Search => "search",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PermutationResult {
    pub outcome: CoreOutcome,
    pub case: PermutationCase,
    pub sig_holder: AgentId,
    pub new_holder: AgentId,
}

/// Certified lower bound on `a`'s value of its own piece minus `b`'s piece.
fn slack(row: &CoreOutcome, holders: &[AgentId], a: AgentId, b: AgentId) -> Ratio {
    let own = holders.iter().position(|&x| x == a).expect("every agent holds a piece");
    let theirs = holders.iter().position(|&x| x == b).expect("every agent holds a piece");
    row.lower(a, own) - row.upper(a, theirs)
}

fn holders(row: &CoreOutcome) -> Vec<AgentId> {
    row.slots.iter().map(|s| s.holder).collect()
}

/// Whether the rounds are provably envy-free in sum when round `changed` is
/// reassigned to `new`; the other rounds are known to be envy-free one by one.
fn certified(rows: &[&CoreOutcome], changed: &CoreOutcome, new: &[AgentId]) -> bool {
    let agents = changed.non_cutters();
    let mut everyone = agents.clone();
    everyone.push(changed.cutter);
    for &a in &agents {
        for &b in &everyone {
            if a == b {
                continue;
            }
            let mut total = slack(changed, new, a, b);
            for row in rows {
                let s = slack(row, &holders(row), a, b);
                if s.is_positive() {
                    total += s;
                }
            }
            if total.is_negative() {
                return false;
            }
        }
    }
    true
}

/// Cross-round check for a whole phase: every round is individually
/// certified except possibly `changed`, whose slack is summed exactly.
pub fn certify_rows(rows: &[CoreOutcome], changed: usize) -> bool {
    let others: Vec<&CoreOutcome> = rows.iter().enumerate().filter(|(k, _)| *k != changed).map(|(_, r)| r).collect();
    certified(&others, &rows[changed], &holders(&rows[changed]))
}

fn acceptable(row: &CoreOutcome, rows: &[&CoreOutcome], new: &[AgentId], sig: usize, h: AgentId) -> bool {
    let mut seen = new.to_vec();
    seen.sort();
    seen.dedup();
    if seen.len() != 4 || new[sig] == h || new[sig] == row.cutter {
        return false;
    }
    let c = new.iter().position(|&x| x == row.cutter).expect("cutter present");
    if row.is_partial(c) {
        return false;
    }
    for (q, &a) in new.iter().enumerate() {
        if a != row.cutter && row.lower(a, q) < row.tau[&a] {
            return false;
        }
    }
    certified(rows, row, new)
}

/// The two rightmost effective trimmers of piece `q`, rightmost first.
fn top_two(row: &CoreOutcome, q: usize) -> Option<(AgentId, AgentId)> {
    let mut ts: Vec<(AgentId, &Ratio)> =
        row.trims.iter().filter(|t| t.piece_id == q).map(|t| (t.agent, &t.point)).collect();
    ts.sort_by(|x, y| y.1.cmp(x.1).then(x.0.cmp(&y.0)));
    if ts.len() < 2 {
        return None;
    }
    Some((ts[0].0, ts[1].0))
}

/// Moves the significant piece held by `sig_holder` in `state` to another
/// non-cutter. `other_rows` are the remaining rounds of the same phase; their
/// surplus may pay for what agents give up here.
pub fn permutation_protocol(
    state: &CoreOutcome,
    sig_holder: AgentId,
    other_rows: &[&CoreOutcome],
) -> Result<PermutationResult, ProtocolError> {
    let h = sig_holder;
    let c = state.cutter;
    let Some(s) = state.holder_piece(h) else {
        return Err(ProtocolError::BadInput(format!("agent {h} holds nothing")));
    };
    if !state.is_partial(s) {
        return Err(ProtocolError::BadInput(format!("agent {h} holds a complete piece")));
    }
    let Some((r1, r2)) = top_two(state, s) else {
        return violation("significant piece with fewer than two trims");
    };
    let comp = if r1 == h { r2 } else if r2 == h { r1 } else {
        return violation("significant holder is not among the top trimmers");
    };
    let x = *state
        .non_cutters()
        .iter()
        .find(|&&a| a != h && a != comp)
        .expect("three non-cutters");
    let old = holders(state);
    let piece_of = |a: AgentId| old.iter().position(|&y| y == a).expect("holds a piece");
    let (pc, px, p4) = (piece_of(comp), piece_of(x), piece_of(c));

    let assign = |moves: &[(AgentId, usize)]| -> Vec<AgentId> {
        let mut new = old.clone();
        for &(a, q) in moves {
            new[q] = a;
        }
        new
    };

    let mut candidates: Vec<(PermutationCase, Vec<AgentId>)> = Vec::new();
    if state.is_partial(pc) {
        match top_two(state, pc) {
            Some((t1, t2)) if (t1 == comp && t2 == h) || (t1 == h && t2 == comp) => {
                candidates.push((PermutationCase::SwapTrimmed, assign(&[(h, pc), (comp, s)])));
            }
            Some((t1, t2)) if (t1 == comp && t2 == x) || (t1 == x && t2 == comp) => {
                for (mine, cutters) in [(px, p4), (p4, px)] {
                    candidates.push((
                        PermutationCase::ThirdTakesTrimmed,
                        assign(&[(x, pc), (comp, s), (h, mine), (c, cutters)]),
                    ));
                }
            }
            _ => {}
        }
    } else {
        candidates.push((PermutationCase::SwapComplete, assign(&[(h, pc), (comp, s)])));
        candidates.push((PermutationCase::CutterPiece, assign(&[(c, pc), (h, p4), (comp, s)])));
        if !state.is_partial(px) {
            for (xs, cutters) in [(pc, p4), (p4, pc)] {
                candidates.push((
                    PermutationCase::ThirdMoves,
                    assign(&[(h, px), (comp, s), (x, xs), (c, cutters)]),
                ));
            }
        }
    }

    let found = candidates
        .into_iter()
        .find(|(_, new)| acceptable(state, other_rows, new, s, h))
        .or_else(|| {
            let agents = [old[0], old[1], old[2], old[3]];
            permutations(&agents)
                .into_iter()
                .find(|new| acceptable(state, other_rows, new, s, h))
                .map(|new| (PermutationCase::Search, new))
        });
    let Some((case, new)) = found else {
        return violation(format!("no certified reallocation moves the significant piece away from agent {h}"));
    };

    let mut outcome = state.clone();
    for (q, &a) in new.iter().enumerate() {
        outcome.slots[q].holder = a;
    }
    outcome.refresh();
    let new_holder = new[s];
    Ok(PermutationResult { outcome, case, sig_holder: h, new_holder })
}

/// All orderings of four agents, lexicographic by position.
fn permutations(agents: &[AgentId; 4]) -> Vec<Vec<AgentId>> {
    let mut sorted = agents.to_vec();
    sorted.sort();
    let mut out = Vec::with_capacity(24);
    for a in 0..4 {
        for b in 0..4 {
            for c in 0..4 {
                for d in 0..4 {
                    let idx = [a, b, c, d];
                    let distinct = (0..4).all(|i| (0..i).all(|j| idx[i] != idx[j]));
                    if distinct {
                        out.push(idx.iter().map(|&i| sorted[i]).collect());
                    }
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twenty_four_orderings() {
        let agents = [AgentId(1), AgentId(2), AgentId(3), AgentId(4)];
        let all = permutations(&agents);
        assert_eq!(all.len(), 24);
        assert_eq!(all[0], agents.to_vec());
        let mut dedup = all.clone();
        dedup.dedup();
        assert_eq!(dedup.len(), 24);
    }
}
