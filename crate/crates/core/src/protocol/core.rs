//! One round of the four-agent core protocol.
//!
//! The cutter splits the cake into four pieces it values equally. If every
//! non-cutter can be handed a favourite piece the round ends there. Otherwise
//! the pattern of the non-cutters' top-two pieces selects a case; the case
//! fixes which agents must trim which pieces and to what value, and which
//! agents are handed a complete piece outright. Pieces are then handed out up
//! to the second rightmost trim, and the cake left of those trims is the
//! residue.
//!
//! Trims that can never influence the outcome (a piece with a single
//! effective trimmer goes to that trimmer whole) are not requested, which
//! keeps every round within 9 cuts and 26 queries.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::matching::{ranking, top_piece_matching};
use super::{violation, Allocation, ProtocolError};
use crate::cake::Piece;
use crate::query::{AgentId, Counters, QueryEngine};
use crate::ratio::Ratio;

/// Which branch of the core protocol produced an outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoreCase {
    /// Every non-cutter got a most preferred complete piece.
    Matching,
    /// No single-trim piece; three pieces trimmed twice (`ij|jk|ik`).
    IjJkIk,
    /// No single-trim piece; two pieces trimmed by all three (`ijk|ijk`).
    IjkIjk,
    /// Exactly one single-trim piece (`i|ijk|jk`).
    IIjkJk,
    /// Two single-trim pieces with different trimmers (`jk|ik|i|j`).
    JkIkIJ,
    /// Two single-trim pieces with the same trimmer (`ij|ij|k|k`).
    IjIjKK,
    /// Three single-trim pieces (`1|2|3|123`).
    OneTwoThree,
}

impl CoreCase {
    pub const ALL: [CoreCase; 7] = [
        CoreCase::Matching,
        CoreCase::IjJkIk,
        CoreCase::IjkIjk,
        CoreCase::IIjkJk,
        CoreCase::JkIkIJ,
        CoreCase::IjIjKK,
        CoreCase::OneTwoThree,
    ];

    pub fn pattern(self) -> &'static str {
        match self {
            CoreCase::Matching => "matching",
            CoreCase::IjJkIk => "ij|jk|ik",
            CoreCase::IjkIjk => "ijk|ijk",
            CoreCase::IIjkJk => "i|ijk|jk",
            CoreCase::JkIkIJ => "jk|ik|i|j",
            CoreCase::IjIjKK => "ij|ij|k|k",
            CoreCase::OneTwoThree => "1|2|3|123",
        }
    }
}

/// The piece whose value an agent trims down to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrimRank {
    Second,
    Third,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrimRecord {
    pub piece_id: usize,
    pub agent: AgentId,
    pub point: Ratio,
    pub target_rank: TrimRank,
}

/// Who holds a piece and where it was cut; the holder gets the part right of `cut`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Slot {
    pub holder: AgentId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cut: Option<Ratio>,
}

/// What a holder receives beyond the value it trimmed to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bonus {
    /// Slice between the holder's own trim and the cut; empty for complete pieces.
    pub piece: Piece,
    /// Holder's value of its piece minus its trimmed-to value, once known.
    pub value: Option<Ratio>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnownPart {
    pub agent: AgentId,
    pub piece_id: usize,
    pub value: Ratio,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoreOutcome {
    pub cutter: AgentId,
    pub case: CoreCase,
    pub cake: Piece,
    /// Cutter's value of the cake; each quarter is worth a fourth of it.
    pub cutter_value: Ratio,
    pub quarters: Vec<Piece>,
    pub slots: Vec<Slot>,
    pub allocation: Allocation,
    pub residue: Piece,
    /// Effective trims only.
    pub trims: Vec<TrimRecord>,
    pub significant_holders: BTreeSet<AgentId>,
    pub bonus: BTreeMap<AgentId, Bonus>,
    /// Non-cutters' values of the four quarters.
    pub values: BTreeMap<AgentId, Vec<Ratio>>,
    /// Value each non-cutter is guaranteed.
    pub tau: BTreeMap<AgentId, Ratio>,
    pub tau_rank: BTreeMap<AgentId, TrimRank>,
    /// Cutter's value of the part left of each piece's cut.
    pub beta: Vec<Ratio>,
    pub known_parts: Vec<KnownPart>,
    pub counters: Counters,
}

impl CoreOutcome {
    pub fn part(&self, q: usize) -> Piece {
        match &self.slots[q].cut {
            None => self.quarters[q].clone(),
            Some(c) => self.quarters[q].right_of(c),
        }
    }

    pub fn left_slice(&self, q: usize) -> Piece {
        match &self.slots[q].cut {
            None => Piece::empty(),
            Some(c) => self.quarters[q].left_of(c),
        }
    }

    pub fn is_partial(&self, q: usize) -> bool {
        !self.left_slice(q).is_empty()
    }

    pub fn holder_piece(&self, a: AgentId) -> Option<usize> {
        self.slots.iter().position(|s| s.holder == a)
    }

    pub fn non_cutters(&self) -> Vec<AgentId> {
        self.values.keys().copied().collect()
    }

    pub fn trim_of(&self, a: AgentId, q: usize) -> Option<&Ratio> {
        self.trims.iter().find(|t| t.agent == a && t.piece_id == q).map(|t| &t.point)
    }

    pub fn known_part(&self, a: AgentId, q: usize) -> Option<&Ratio> {
        self.known_parts.iter().find(|k| k.agent == a && k.piece_id == q).map(|k| &k.value)
    }

    pub fn set_known_part(&mut self, a: AgentId, q: usize, value: Ratio) {
        if self.known_part(a, q).is_none() {
            self.known_parts.push(KnownPart { agent: a, piece_id: q, value });
        }
    }

    pub fn quarter_value(&self) -> Ratio {
        &self.cutter_value / Ratio::from_integer(4)
    }

    /// Lower bound on `a`'s value of the part of piece `q`, from query answers only.
    pub fn lower(&self, a: AgentId, q: usize) -> Ratio {
        if a == self.cutter {
            return self.quarter_value() - &self.beta[q];
        }
        if let Some(v) = self.known_part(a, q) {
            return v.clone();
        }
        if !self.is_partial(q) {
            return self.values[&a][q].clone();
        }
        match (self.trim_of(a, q), &self.slots[q].cut) {
            (Some(t), Some(c)) if t >= c => self.tau[&a].clone(),
            _ => Ratio::zero(),
        }
    }

    /// Upper bound on `a`'s value of the part of piece `q`, from query answers only.
    pub fn upper(&self, a: AgentId, q: usize) -> Ratio {
        if a == self.cutter {
            return self.quarter_value() - &self.beta[q];
        }
        if let Some(v) = self.known_part(a, q) {
            return v.clone();
        }
        if !self.is_partial(q) {
            return self.values[&a][q].clone();
        }
        match (self.trim_of(a, q), &self.slots[q].cut) {
            (Some(t), Some(c)) if t <= c => self.tau[&a].clone(),
            _ => self.values[&a][q].clone(),
        }
    }

    /// Rebuilds `allocation`, `bonus` and the significant holders from `slots`.
    pub fn refresh(&mut self) {
        self.allocation = (0..4).map(|q| (self.slots[q].holder, self.part(q))).collect();
        let mut bonus = BTreeMap::new();
        for q in 0..4 {
            let a = self.slots[q].holder;
            if a == self.cutter {
                continue;
            }
            let piece = match (&self.slots[q].cut, self.trim_of(a, q)) {
                (Some(c), Some(t)) if t > c => self.quarters[q].between(c, t),
                _ => Piece::empty(),
            };
            let value = if piece.is_empty() && self.trim_of(a, q).is_some() && self.is_partial(q) {
                Some(Ratio::zero())
            } else if !self.is_partial(q) {
                Some(&self.values[&a][q] - &self.tau[&a])
            } else {
                self.known_part(a, q).map(|v| v - &self.tau[&a])
            };
            bonus.insert(a, Bonus { piece, value });
        }
        self.bonus = bonus;
        self.significant_holders = significant_pieces(self);
    }
}

/// Holders of the partial pieces whose trimmed-away slice the cutter values
/// most; two holders when the slices tie.
pub fn significant_pieces(outcome: &CoreOutcome) -> BTreeSet<AgentId> {
    let partial: Vec<usize> = (0..4).filter(|&q| outcome.is_partial(q)).collect();
    let Some(best) = partial.iter().map(|&q| &outcome.beta[q]).max() else {
        return BTreeSet::new();
    };
    partial
        .iter()
        .filter(|&&q| outcome.beta[q] == *best)
        .map(|&q| outcome.slots[q].holder)
        .collect()
}

/// Second if the agent was asked to trim its favourite down to its second
/// favourite in this round, otherwise third.
pub fn guaranteed_rank(agent: AgentId, outcome: &CoreOutcome) -> TrimRank {
    outcome.tau_rank.get(&agent).copied().unwrap_or(TrimRank::Third)
}

/// Runs one round of the core protocol on `cake` with `cutter` cutting.
pub fn core_protocol(
    engine: &mut QueryEngine,
    cutter: AgentId,
    others: [AgentId; 3],
    cake: &Piece,
) -> Result<CoreOutcome, ProtocolError> {
    core_run(engine, cutter, others, cake, None)
}

#[derive(Debug, Clone)]
pub(crate) struct Plan {
    pub case: CoreCase,
    pub preassigned: Vec<(AgentId, usize)>,
    pub rank: BTreeMap<AgentId, TrimRank>,
    /// Effective trimmers of each piece.
    pub effective: Vec<Vec<AgentId>>,
}

/// Chooses the case from the non-cutters' values; pure, no queries.
pub(crate) fn plan(values: &BTreeMap<AgentId, Vec<Ratio>>) -> Result<Plan, ProtocolError> {
    let agents: Vec<AgentId> = values.keys().copied().collect();
    let order: BTreeMap<AgentId, Vec<usize>> = values.iter().map(|(&a, v)| (a, ranking(v))).collect();
    let top = |a: AgentId| order[&a][0];
    let top2 = |a: AgentId, q: usize| order[&a][0] == q || order[&a][1] == q;
    let trimmers = |q: usize| -> Vec<AgentId> { agents.iter().copied().filter(|&a| top2(a, q)).collect() };
    let count: Vec<usize> = (0..4).map(|q| trimmers(q).len()).collect();
    let singles: Vec<usize> = (0..4).filter(|&q| count[q] == 1).collect();

    let mut p = Plan {
        case: CoreCase::Matching,
        preassigned: Vec::new(),
        rank: agents.iter().map(|&a| (a, TrimRank::Third)).collect(),
        effective: vec![Vec::new(); 4],
    };

    match singles.len() {
        0 if count.contains(&3) => {
            p.case = CoreCase::IjkIjk;
            for q in (0..4).filter(|&q| count[q] == 3) {
                p.effective[q] = agents.clone();
            }
        }
        0 => {
            p.case = CoreCase::IjJkIk;
            // the piece two agents both rank first
            let Some(x) = (0..4).find(|&q| count[q] == 2 && trimmers(q).iter().all(|&a| top(a) == q)) else {
                return violation("ij|jk|ik pattern without a shared favourite");
            };
            let pair = trimmers(x);
            let k = *agents.iter().find(|a| !pair.contains(a)).expect("three agents");
            let y = top(k);
            let Some(&j) = trimmers(y).iter().find(|&&a| a != k) else {
                return violation("ij|jk|ik: k's favourite has no second trimmer");
            };
            let i = if pair[0] == j { pair[1] } else { pair[0] };
            p.rank.insert(i, TrimRank::Second);
            p.rank.insert(k, TrimRank::Second);
            p.effective[x] = sorted(vec![i, j]);
            p.effective[y] = sorted(vec![j, k]);
        }
        1 => {
            p.case = CoreCase::IIjkJk;
            let s = singles[0];
            let i = trimmers(s)[0];
            let t = (0..4).find(|&q| count[q] == 3).expect("3+2+1 pattern");
            let d = (0..4).find(|&q| count[q] == 2).expect("3+2+1 pattern");
            let jk = trimmers(d);
            if top(i) == s {
                p.preassigned.push((i, s));
                p.effective[t] = jk.clone();
            } else {
                p.rank.insert(i, TrimRank::Second);
                p.effective[t] = agents.clone();
            }
            p.effective[d] = jk;
        }
        2 => {
            let (s1, s2) = (singles[0], singles[1]);
            let (t1, t2) = (trimmers(s1)[0], trimmers(s2)[0]);
            let doubles: Vec<usize> = (0..4).filter(|&q| count[q] == 2).collect();
            if t1 == t2 {
                p.case = CoreCase::IjIjKK;
                p.preassigned.push((t1, top(t1)));
                for &q in &doubles {
                    p.effective[q] = trimmers(q);
                }
            } else {
                p.case = CoreCase::JkIkIJ;
                let k = *agents.iter().find(|&&a| a != t1 && a != t2).expect("three agents");
                for &q in &doubles {
                    p.effective[q].push(k);
                }
                for (s, own) in [(t1, s1), (t2, s2)] {
                    if top(s) == own {
                        p.preassigned.push((s, own));
                    } else {
                        p.rank.insert(s, TrimRank::Second);
                        p.effective[top(s)].push(s);
                    }
                }
                for e in p.effective.iter_mut() {
                    e.sort();
                }
            }
        }
        3 => {
            p.case = CoreCase::OneTwoThree;
            let a_piece = (0..4).find(|&q| count[q] == 3).expect("3+1+1+1 pattern");
            for &a in &agents {
                if top(a) == a_piece {
                    p.rank.insert(a, TrimRank::Second);
                    p.effective[a_piece].push(a);
                } else {
                    p.preassigned.push((a, top(a)));
                }
            }
        }
        _ => return violation(format!("no case for trim counts {count:?}")),
    }
    p.preassigned.sort();
    Ok(p)
}

fn sorted(mut v: Vec<AgentId>) -> Vec<AgentId> {
    v.sort();
    v
}

/// Core round; `known_total` skips the cutter's opening evaluation when the
/// caller already knows the cutter's value of `cake`.
pub(crate) fn core_run(
    engine: &mut QueryEngine,
    cutter: AgentId,
    others: [AgentId; 3],
    cake: &Piece,
    known_total: Option<Ratio>,
) -> Result<CoreOutcome, ProtocolError> {
    if cake.is_empty() {
        return Err(ProtocolError::PreconditionViolated("core protocol on an empty cake".into()));
    }
    let start = engine.counters();
    let total = match known_total {
        Some(t) => t,
        None => engine.ask_eval(cutter, cake)?,
    };
    let mut points = Vec::with_capacity(3);
    for k in 1..=3 {
        let target = &total * Ratio::new(k, 4);
        points.push(engine.ask_cut(cutter, cake, &target)?);
    }
    let quarters = vec![
        cake.left_of(&points[0]),
        cake.between(&points[0], &points[1]),
        cake.between(&points[1], &points[2]),
        cake.right_of(&points[2]),
    ];
    engine.event("quarters", json!({ "cutter_value": total, "points": points, "pieces": quarters }));

    let mut values = BTreeMap::new();
    for &a in &others {
        let mut row = Vec::with_capacity(4);
        for q in &quarters {
            row.push(engine.ask_eval(a, q)?);
        }
        values.insert(a, row);
    }
    engine.event("valuations", json!(values));

    let mut out = CoreOutcome {
        cutter,
        case: CoreCase::Matching,
        cake: cake.clone(),
        cutter_value: total,
        quarters,
        slots: Vec::new(),
        allocation: Allocation::new(),
        residue: Piece::empty(),
        trims: Vec::new(),
        significant_holders: BTreeSet::new(),
        bonus: BTreeMap::new(),
        values: values.clone(),
        tau: BTreeMap::new(),
        tau_rank: BTreeMap::new(),
        beta: vec![Ratio::zero(); 4],
        known_parts: Vec::new(),
        counters: Counters::default(),
    };

    let prefs: Vec<Vec<Ratio>> = others.iter().map(|a| values[a].clone()).collect();
    let mut holders: Vec<Option<AgentId>> = vec![None; 4];
    let mut cuts: Vec<Option<Ratio>> = vec![None; 4];

    if let Some(m) = top_piece_matching(&prefs) {
        for (idx, &a) in others.iter().enumerate() {
            holders[m[idx]] = Some(a);
            out.tau_rank.insert(a, TrimRank::Third);
            out.tau.insert(a, values[&a][ranking(&values[&a])[2]].clone());
        }
        engine.event("case", json!({ "case": CoreCase::Matching.pattern() }));
    } else {
        let p = plan(&values)?;
        out.case = p.case;
        for &a in &others {
            let rank = p.rank[&a];
            let order = ranking(&values[&a]);
            let reference = if rank == TrimRank::Second { order[1] } else { order[2] };
            out.tau_rank.insert(a, rank);
            out.tau.insert(a, values[&a][reference].clone());
        }
        engine.event(
            "case",
            json!({
                "case": p.case.pattern(),
                "preassigned": p.preassigned,
                "effective": p.effective,
                "tau": out.tau,
            }),
        );

        for &(a, q) in &p.preassigned {
            holders[q] = Some(a);
        }
        for q in 0..4 {
            if p.effective[q].len() < 2 {
                continue;
            }
            for &a in &p.effective[q] {
                let point = engine.ask_trim(a, &out.quarters[q], &out.tau[&a])?;
                out.trims.push(TrimRecord { piece_id: q, agent: a, point, target_rank: p.rank[&a] });
            }
        }
        engine.event("trims", json!(out.trims));

        // rightmost effective trimmer claims each piece
        let mut claims: BTreeMap<AgentId, Vec<(usize, Option<Ratio>)>> = BTreeMap::new();
        let mut runner_up: BTreeMap<usize, (AgentId, Ratio)> = BTreeMap::new();
        for (q, held) in holders.iter().enumerate() {
            if held.is_some() || p.effective[q].is_empty() {
                continue;
            }
            if p.effective[q].len() == 1 {
                claims.entry(p.effective[q][0]).or_default().push((q, None));
                continue;
            }
            let mut by_point: Vec<(AgentId, Ratio)> = p.effective[q]
                .iter()
                .map(|&a| (a, out.trim_of(a, q).expect("trim recorded").clone()))
                .collect();
            by_point.sort_by(|x, y| y.1.cmp(&x.1).then(x.0.cmp(&y.0)));
            claims.entry(by_point[0].0).or_default().push((q, Some(by_point[1].1.clone())));
            runner_up.insert(q, by_point[1].clone());
        }

        for (a, cl) in claims {
            match cl.len() {
                1 => {
                    let (q, c) = cl.into_iter().next().expect("one claim");
                    holders[q] = Some(a);
                    cuts[q] = c;
                }
                2 => {
                    let mut worth = Vec::with_capacity(2);
                    for (q, c) in &cl {
                        let v = match c {
                            None => values[&a][*q].clone(),
                            Some(c) if Some(c) == out.trim_of(a, *q) => out.tau[&a].clone(),
                            Some(c) => {
                                let v = engine.ask_eval(a, &out.quarters[*q].right_of(c))?;
                                out.known_parts.push(KnownPart { agent: a, piece_id: *q, value: v.clone() });
                                v
                            }
                        };
                        worth.push(v);
                    }
                    let pick = if worth[1] > worth[0] { 1 } else { 0 };
                    let (q, c) = cl[pick].clone();
                    holders[q] = Some(a);
                    cuts[q] = c;
                    let (other, _) = cl[1 - pick].clone();
                    if let Some((s, pt)) = runner_up.get(&other) {
                        if holders.contains(&Some(*s)) {
                            return violation(format!("agent {s} would receive two pieces"));
                        }
                        holders[other] = Some(*s);
                        cuts[other] = Some(pt.clone());
                    }
                    engine.event("choice", json!({ "agent": a, "piece": q, "values": worth }));
                }
                n => return violation(format!("agent {a} claimed {n} pieces")),
            }
        }

        for &a in &others {
            if holders.contains(&Some(a)) {
                continue;
            }
            let order = ranking(&values[&a]);
            let reference = if out.tau_rank[&a] == TrimRank::Second { order[1] } else { order[2] };
            let free = (0..4).filter(|&q| holders[q].is_none());
            let Some(q) = free.max_by(|&x, &y| {
                values[&a][x]
                    .cmp(&values[&a][y])
                    .then((x == reference).cmp(&(y == reference)))
                    .then(y.cmp(&x))
            }) else {
                return violation(format!("no piece left for agent {a}"));
            };
            if values[&a][q] < out.tau[&a] {
                return violation(format!("agent {a} left with less than its guarantee"));
            }
            holders[q] = Some(a);
        }
    }

    let free: Vec<usize> = (0..4).filter(|&q| holders[q].is_none()).collect();
    if free.len() != 1 {
        return violation(format!("{} pieces left for the cutter", free.len()));
    }
    holders[free[0]] = Some(cutter);

    out.slots = (0..4)
        .map(|q| Slot { holder: holders[q].expect("all pieces held"), cut: cuts[q].clone() })
        .collect();
    for q in 0..4 {
        let a = out.slots[q].holder;
        if a != cutter && out.slots[q].cut.is_some() && out.slots[q].cut.as_ref() == out.trim_of(a, q) {
            let t = out.tau[&a].clone();
            out.set_known_part(a, q, t);
        }
    }
    if !(0..4).any(|q| out.slots[q].holder != cutter && !out.is_partial(q)) {
        return violation("no non-cutter received a complete piece");
    }

    let mut residue = Piece::empty();
    for q in 0..4 {
        if out.is_partial(q) {
            let slice = out.left_slice(q);
            out.beta[q] = engine.ask_eval(cutter, &slice)?;
            residue = residue.union(&slice);
        }
    }
    out.residue = residue;
    out.refresh();
    out.counters = engine.counters() - start;
    engine.event(
        "allocation",
        json!({
            "slots": out.slots,
            "beta": out.beta,
            "significant": out.significant_holders,
            "residue": out.residue,
        }),
    );
    Ok(out)
}
