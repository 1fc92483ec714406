//! The complete four-agent protocol.
//!
//! Agents 4, 3, 2, 1 take turns as cutter. Each cutter runs core rounds on the
//! leftover cake until the answers it has given prove it dominates two other
//! agents: after each round the cutter's advantage over an agent is the sum
//! of the slices it saw trimmed off that agent's pieces, and it dominates the
//! agent once that sum covers its value of the leftover. If the same agent
//! took the significant piece in each of the first four rounds, one round is
//! reallocated so another agent holds it, and a fifth round finishes the job.
//! Once every agent dominates two others the leftover is handed out by the
//! post double domination step.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::compromise::{select_compromise_iteration, BonusTable};
use super::core::{core_run, CoreOutcome};
use super::permutation::{permutation_protocol, PermutationCase};
use super::post_dd::{post_double_domination, PostDdBranch};
use super::{merge_into, violation, Allocation, Dominance, ProtocolError};
use crate::cake::Piece;
use crate::query::{AgentId, QueryEngine};
use crate::ratio::Ratio;

/// A reallocation performed in one phase.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PermutationRecord {
    /// Index of the reallocated round within the phase.
    pub row: usize,
    pub case: PermutationCase,
    pub sig_holder: AgentId,
    pub new_holder: AgentId,
    pub bonus_table: BonusTable,
    pub compromise_row: usize,
    /// The round as it stood before reallocation.
    pub before: CoreOutcome,
}

/// Everything one cutter did.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseSummary {
    pub cutter: AgentId,
    /// Core rounds in order, after any reallocation.
    pub rows: Vec<CoreOutcome>,
    pub permutation: Option<PermutationRecord>,
    pub dominated: BTreeSet<AgentId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverallOutcome {
    pub allocation: Allocation,
    pub residue: Piece,
    pub phases: Vec<PhaseSummary>,
    pub dominance: Dominance,
    pub post_dd: Option<PostDdBranch>,
}

impl OverallOutcome {
    pub fn core_runs(&self) -> usize {
        self.phases.iter().map(|p| p.rows.len()).sum()
    }

    pub fn permutations(&self) -> usize {
        self.phases.iter().filter(|p| p.permutation.is_some()).count()
    }
}

/// Agents the cutter provably dominates: its summed advantage over each
/// agent's pieces in `rows` covers its value of the leftover.
fn dominated(rows: &[CoreOutcome], leftover_value: &Ratio) -> BTreeSet<AgentId> {
    let Some(first) = rows.first() else { return BTreeSet::new() };
    first
        .non_cutters()
        .into_iter()
        .filter(|&a| {
            let lead: Ratio = rows
                .iter()
                .map(|r| r.beta[r.holder_piece(a).expect("non-cutter holds a piece")].clone())
                .sum();
            lead >= *leftover_value
        })
        .collect()
}

/// The one agent that took the only significant piece in every round, if any.
fn monopolist(rows: &[CoreOutcome]) -> Option<AgentId> {
    let mut who = None;
    for r in rows {
        if r.significant_holders.len() != 1 {
            return None;
        }
        let h = *r.significant_holders.iter().next().expect("one holder");
        match who {
            None => who = Some(h),
            Some(w) if w != h => return None,
            _ => {}
        }
    }
    who
}

/// Values each partial piece's bonus slice for its holder, where not yet known.
fn measure_bonuses(engine: &mut QueryEngine, row: &mut CoreOutcome) -> Result<(), ProtocolError> {
    for q in 0..4 {
        let a = row.slots[q].holder;
        if a == row.cutter || !row.is_partial(q) || row.known_part(a, q).is_some() {
            continue;
        }
        let (Some(c), Some(t)) = (row.slots[q].cut.clone(), row.trim_of(a, q).cloned()) else {
            return violation("partial piece held without a trim");
        };
        let v = engine.ask_eval(a, &row.quarters[q].between(&c, &t))?;
        let part = &row.tau[&a] + &v;
        row.set_known_part(a, q, part);
    }
    row.refresh();
    Ok(())
}

fn bonus_table(rows: &[CoreOutcome]) -> BonusTable {
    BonusTable::new(
        rows.iter()
            .map(|r| {
                r.non_cutters()
                    .into_iter()
                    .map(|a| {
                        let q = r.holder_piece(a).expect("holds a piece");
                        r.lower(a, q) - &r.tau[&a]
                    })
                    .collect()
            })
            .collect(),
    )
}

fn permute(
    engine: &mut QueryEngine,
    rows: &mut [CoreOutcome],
    h: AgentId,
) -> Result<PermutationRecord, ProtocolError> {
    for row in rows.iter_mut() {
        measure_bonuses(engine, row)?;
    }
    let table = bonus_table(rows);
    let k_star = select_compromise_iteration(&table);
    engine.event("bonus_table", json!({ "table": table, "compromise_row": k_star }));
    let mut order = vec![k_star];
    order.extend((0..rows.len()).filter(|&k| k != k_star));
    for k in order {
        let others: Vec<&CoreOutcome> = rows.iter().enumerate().filter(|(j, _)| *j != k).map(|(_, r)| r).collect();
        match permutation_protocol(&rows[k], h, &others) {
            Ok(res) => {
                if res.outcome.residue != rows[k].residue {
                    return violation("reallocation changed the leftover");
                }
                let before = std::mem::replace(&mut rows[k], res.outcome);
                engine.event(
                    "permutation",
                    json!({ "row": k, "case": res.case.label(), "from": h, "to": res.new_holder }),
                );
                return Ok(PermutationRecord {
                    row: k,
                    case: res.case,
                    sig_holder: h,
                    new_holder: res.new_holder,
                    bonus_table: table,
                    compromise_row: k_star,
                    before,
                });
            }
            Err(ProtocolError::InternalInvariantViolation(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    violation(format!("no round could be reallocated away from agent {h}"))
}

fn run_phase(
    engine: &mut QueryEngine,
    cutter: AgentId,
    others: [AgentId; 3],
    residue: &mut Piece,
) -> Result<PhaseSummary, ProtocolError> {
    let mut phase = PhaseSummary { cutter, rows: Vec::new(), permutation: None, dominated: BTreeSet::new() };
    engine.set_context("core", Some(cutter), Some(1));
    let mut total = engine.ask_eval(cutter, residue)?;
    for k in 1..=5u32 {
        if residue.is_empty() || total.is_zero() {
            // nothing the cutter could envy is left
            phase.dominated = others.iter().copied().collect();
            break;
        }
        engine.set_context("core", Some(cutter), Some(k));
        let out = core_run(engine, cutter, others, residue, Some(total.clone()))?;
        *residue = out.residue.clone();
        total = out.beta.iter().sum();
        phase.rows.push(out);

        phase.dominated = dominated(&phase.rows, &total);
        if residue.is_empty() || phase.dominated.len() >= 2 {
            break;
        }
        if k == 4 {
            if let Some(h) = monopolist(&phase.rows) {
                engine.set_context("permutation", Some(cutter), None);
                phase.permutation = Some(permute(engine, &mut phase.rows, h)?);
                phase.dominated = dominated(&phase.rows, &total);
                if phase.dominated.len() >= 2 {
                    break;
                }
            }
        }
        if k == 5 {
            return violation(format!("agent {cutter} dominates fewer than two agents after five rounds"));
        }
    }
    engine.event("domination", json!({ "cutter": cutter, "dominated": phase.dominated }));
    Ok(phase)
}

/// Envy-free allocation of `cake` among agents 1 to 4.
pub fn overall_protocol(engine: &mut QueryEngine, cake: &Piece) -> Result<OverallOutcome, ProtocolError> {
    let agents = [AgentId(1), AgentId(2), AgentId(3), AgentId(4)];
    if engine.agents().len() != 4 || !agents.iter().all(|a| engine.agents().contains(a)) {
        return Err(ProtocolError::BadInput("overall protocol needs agents 1 to 4".into()));
    }
    let mut residue = cake.clone();
    let mut out = OverallOutcome {
        allocation: Allocation::new(),
        residue: Piece::empty(),
        phases: Vec::new(),
        dominance: Dominance::default(),
        post_dd: None,
    };
    for &cutter in agents.iter().rev() {
        if residue.is_empty() {
            break;
        }
        if out.dominance.out_degree(cutter) >= 2 {
            continue;
        }
        let others: Vec<AgentId> = agents.iter().copied().filter(|&a| a != cutter).collect();
        let phase = run_phase(engine, cutter, [others[0], others[1], others[2]], &mut residue)?;
        for &d in &phase.dominated {
            out.dominance.add(cutter, d);
        }
        out.phases.push(phase);
    }
    for phase in &out.phases {
        for row in &phase.rows {
            for (a, p) in &row.allocation {
                merge_into(&mut out.allocation, *a, p);
            }
        }
    }
    if !residue.is_empty() {
        if agents.iter().any(|&a| out.dominance.out_degree(a) < 2) {
            return violation("leftover cake but some agent dominates fewer than two others");
        }
        engine.set_context("post_double_domination", None, None);
        let (extra, branch) = post_double_domination(engine, &residue, &out.dominance, agents)?;
        for (a, p) in &extra {
            merge_into(&mut out.allocation, *a, p);
        }
        out.post_dd = Some(branch);
        residue = Piece::empty();
    }
    for a in agents {
        out.allocation.entry(a).or_insert_with(Piece::empty);
    }
    out.residue = residue;
    engine.event("complete", json!({ "allocation": out.allocation }));
    Ok(out)
}
