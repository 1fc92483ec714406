//! Envy-free division among three agents.
//!
//! The third agent cuts into three equal pieces. If the other two want
//! different pieces they take them. Otherwise both trim their shared favourite
//! down to their second favourite, the harder trimmer takes it up to the
//! other's trim, and the leftover strip is divided the same way once more.
//! If the same agent wins both times, it gives back the round where it gained
//! least, which leaves the cutter dominating both others, and the two
//! finish with divide and choose.

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::divide_and_choose::divide_and_choose;
use super::matching::{ranking, top_piece_matching};
use super::{merge_into, violation, Allocation, ProtocolError};
use crate::cake::Piece;
use crate::query::{AgentId, QueryEngine};
use crate::ratio::Ratio;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThreeAgentOutcome {
    pub allocation: Allocation,
    pub rounds: usize,
    pub matching_exit: bool,
    pub permuted: bool,
    pub divide_and_choose: bool,
}

struct Round {
    thirds: Vec<Piece>,
    /// Holder of each third.
    holders: Vec<AgentId>,
    /// Where the contested third was cut, if it was.
    contested: Option<Contest>,
}

struct Contest {
    piece: usize,
    winner: AgentId,
    loser: AgentId,
    cut: Ratio,
    winner_trim: Ratio,
    /// Third each trimmer trimmed down to.
    second: [(AgentId, usize); 2],
}

fn round(
    engine: &mut QueryEngine,
    pair: [AgentId; 2],
    cutter: AgentId,
    cake: &Piece,
    total: Ratio,
    prefer_on_tie: AgentId,
) -> Result<Round, ProtocolError> {
    let x1 = engine.ask_cut(cutter, cake, &(&total * Ratio::new(1, 3)))?;
    let x2 = engine.ask_cut(cutter, cake, &(&total * Ratio::new(2, 3)))?;
    let thirds = vec![cake.left_of(&x1), cake.between(&x1, &x2), cake.right_of(&x2)];
    let mut prefs = Vec::with_capacity(2);
    for &a in &pair {
        let mut row = Vec::with_capacity(3);
        for p in &thirds {
            row.push(engine.ask_eval(a, p)?);
        }
        prefs.push(row);
    }
    if let Some(m) = top_piece_matching(&prefs) {
        let mut holders = vec![cutter; 3];
        holders[m[0]] = pair[0];
        holders[m[1]] = pair[1];
        engine.event("three_agent_round", json!({ "thirds": thirds, "matching": m }));
        return Ok(Round { thirds, holders, contested: None });
    }
    let order: Vec<Vec<usize>> = prefs.iter().map(|v| ranking(v)).collect();
    let x = order[0][0];
    if order[1][0] != x {
        return violation("no matching yet different favourites");
    }
    let mut trims = Vec::with_capacity(2);
    for (k, &a) in pair.iter().enumerate() {
        let target = prefs[k][order[k][1]].clone();
        trims.push(engine.ask_trim(a, &thirds[x], &target)?);
    }
    // harder trim is further right; ties go to `prefer_on_tie`
    let w = if trims[0] > trims[1] {
        0
    } else if trims[1] > trims[0] {
        1
    } else if pair[0] == prefer_on_tie {
        0
    } else {
        1
    };
    let l = 1 - w;
    let mut holders = vec![cutter; 3];
    holders[x] = pair[w];
    holders[order[l][1]] = pair[l];
    engine.event(
        "three_agent_round",
        json!({ "thirds": thirds, "contested": x, "trims": trims, "winner": pair[w] }),
    );
    Ok(Round {
        thirds,
        holders,
        contested: Some(Contest {
            piece: x,
            winner: pair[w],
            loser: pair[l],
            cut: trims[l].clone(),
            winner_trim: trims[w].clone(),
            second: [(pair[0], order[0][1]), (pair[1], order[1][1])],
        }),
    })
}

fn parts(r: &Round) -> Vec<(AgentId, Piece)> {
    (0..3)
        .map(|q| {
            let p = match &r.contested {
                Some(c) if c.piece == q => r.thirds[q].right_of(&c.cut),
                _ => r.thirds[q].clone(),
            };
            (r.holders[q], p)
        })
        .collect()
}

fn leftover(r: &Round) -> Piece {
    match &r.contested {
        Some(c) => r.thirds[c.piece].left_of(&c.cut),
        None => Piece::empty(),
    }
}

/// Envy-free allocation of `cake` among three agents; `agents[2]` cuts.
pub fn three_agent_protocol(
    engine: &mut QueryEngine,
    agents: [AgentId; 3],
    cake: &Piece,
) -> Result<ThreeAgentOutcome, ProtocolError> {
    let pair = [agents[0], agents[1]];
    let cutter = agents[2];
    let mut out = ThreeAgentOutcome {
        allocation: agents.iter().map(|&a| (a, Piece::empty())).collect(),
        rounds: 0,
        matching_exit: false,
        permuted: false,
        divide_and_choose: false,
    };
    if cake.is_empty() {
        return Ok(out);
    }
    engine.set_context("three_agent", Some(cutter), Some(1));
    let total = engine.ask_eval(cutter, cake)?;
    let mut r1 = round(engine, pair, cutter, cake, total, pair[0])?;
    out.rounds = 1;
    let Some(c1) = &r1.contested else {
        out.matching_exit = true;
        for (a, p) in parts(&r1) {
            merge_into(&mut out.allocation, a, &p);
        }
        return Ok(out);
    };
    let (i, minus_i) = (c1.winner, c1.loser);
    let gamma1 = r1.thirds[c1.piece].between(&c1.cut, &c1.winner_trim);
    let beta1 = leftover(&r1);

    let mut rest = beta1.clone();
    let mut r2: Option<Round> = None;
    if !beta1.is_empty() {
        engine.set_context("three_agent", Some(cutter), Some(2));
        let t2 = engine.ask_eval(cutter, &beta1)?;
        // a worthless strip leaves the cutter dominating both others
        if t2.is_positive() {
            let mut r = round(engine, pair, cutter, &beta1, t2, minus_i)?;
            out.rounds = 2;
            rest = leftover(&r);
            let repeat = r.contested.as_ref().filter(|c| c.winner == i);
            if let Some(c2) = repeat {
                let gamma2 = r.thirds[c2.piece].between(&c2.cut, &c2.winner_trim);
                let g1 = engine.ask_eval(i, &gamma1)?;
                let g2 = engine.ask_eval(i, &gamma2)?;
                let first = g1 <= g2;
                engine.event(
                    "three_agent_permutation",
                    json!({ "agent": i, "gamma": [g1, g2], "round": if first { 1 } else { 2 } }),
                );
                if first {
                    swap_back(&mut r1, i, minus_i, cutter)?;
                } else {
                    swap_back(&mut r, i, minus_i, cutter)?;
                }
                out.permuted = true;
            }
            r2 = Some(r);
        }
    }

    for (a, p) in parts(&r1) {
        merge_into(&mut out.allocation, a, &p);
    }
    if let Some(r) = &r2 {
        for (a, p) in parts(r) {
            merge_into(&mut out.allocation, a, &p);
        }
    }
    if !rest.is_empty() {
        engine.set_context("divide_and_choose", None, None);
        let split = divide_and_choose(engine, pair[0], pair[1], &rest)?;
        for (a, p) in split {
            merge_into(&mut out.allocation, a, &p);
        }
        out.divide_and_choose = true;
    }
    Ok(out)
}

/// The winner gives its contested piece to the loser and takes back a
/// complete third it values at its trimmed-to value.
fn swap_back(r: &mut Round, i: AgentId, minus_i: AgentId, cutter: AgentId) -> Result<(), ProtocolError> {
    let Some(c) = &r.contested else { return violation("swap on an uncontested round") };
    let own_second = c.second.iter().find(|(a, _)| *a == i).map(|&(_, q)| q).expect("winner trimmed");
    let x = c.piece;
    let loser_piece = r.holders.iter().position(|&a| a == minus_i).expect("loser holds a third");
    let prev = r.holders[own_second];
    r.holders[own_second] = i;
    r.holders[x] = minus_i;
    if prev == cutter && own_second != loser_piece {
        r.holders[loser_piece] = cutter;
    }
    Ok(())
}
