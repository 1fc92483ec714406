use serde_json::json;

use super::{Allocation, ProtocolError};
use crate::cake::Piece;
use crate::query::{AgentId, QueryEngine};

/// `a` halves `p` by its own valuation, `b` takes the half it prefers.
///
/// Costs four queries and one cut: `a` evaluates and cuts, `b` evaluates both
/// halves. On a tie `b` takes the left half.
pub fn divide_and_choose(
    engine: &mut QueryEngine,
    a: AgentId,
    b: AgentId,
    p: &Piece,
) -> Result<Allocation, ProtocolError> {
    let mut out = Allocation::new();
    if p.is_empty() {
        out.insert(a, Piece::empty());
        out.insert(b, Piece::empty());
        return Ok(out);
    }
    let total = engine.ask_eval(a, p)?;
    let half = total / crate::ratio::Ratio::from_integer(2);
    let x = engine.ask_cut(a, p, &half)?;
    let (left, right) = p.split_at(&x);
    let vl = engine.ask_eval(b, &left)?;
    let vr = engine.ask_eval(b, &right)?;
    let (mine, theirs) = if vl >= vr { (right, left) } else { (left, right) };
    engine.event("divide_and_choose", json!({ "cutter": a, "chooser": b, "point": x }));
    out.insert(a, mine);
    out.insert(b, theirs);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cake::ValuationSpec;
    use crate::ratio::r;

    #[test]
    fn symmetric_halves() {
        let mut e = QueryEngine::simulated(&[ValuationSpec::uniform(), ValuationSpec::uniform()]);
        let out = divide_and_choose(&mut e, AgentId(1), AgentId(2), &Piece::whole()).unwrap();
        assert_eq!(out[&AgentId(1)].length(), r(1, 2));
        assert_eq!(out[&AgentId(2)].length(), r(1, 2));
        assert_eq!(e.counters().queries, 4);
        assert_eq!(e.counters().cuts, 1);
    }

    #[test]
    fn chooser_takes_the_right_half_it_likes() {
        let b = ValuationSpec::steps(&[(r(0, 1), r(0, 1)), (r(1, 2), r(2, 1))]).unwrap();
        let mut e = QueryEngine::simulated(&[ValuationSpec::uniform(), b]);
        let out = divide_and_choose(&mut e, AgentId(1), AgentId(2), &Piece::whole()).unwrap();
        assert_eq!(out[&AgentId(2)], Piece::from_pairs([(r(1, 2), r(1, 1))]).unwrap());
        assert_eq!(out[&AgentId(1)], Piece::from_pairs([(r(0, 1), r(1, 2))]).unwrap());
    }

    #[test]
    fn empty_piece_costs_nothing() {
        let mut e = QueryEngine::simulated(&[ValuationSpec::uniform(), ValuationSpec::uniform()]);
        let out = divide_and_choose(&mut e, AgentId(1), AgentId(2), &Piece::empty()).unwrap();
        assert!(out.values().all(Piece::is_empty));
        assert_eq!(e.counters().queries, 0);
    }
}
