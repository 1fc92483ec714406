use serde::{Deserialize, Serialize};
use serde_json::json;

use super::divide_and_choose::divide_and_choose;
use super::matching::argmax_set;
use super::{Allocation, Dominance, ProtocolError};
use crate::cake::Piece;
use crate::query::{AgentId, QueryEngine};
use crate::ratio::Ratio;

/// How the leftover cake was handed out.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "branch", rename_all = "snake_case")]
pub enum PostDdBranch {
    Nothing,
    DivideAndChoose { cutter: AgentId, chooser: AgentId },
    GiveAll { to: AgentId },
    QuarterAndPick { cutter: AgentId, order: [AgentId; 3] },
}

fn dominated_by_all(graph: &Dominance, doms: &[AgentId], subs: &[AgentId]) -> bool {
    doms.iter().all(|&j| subs.iter().all(|&i| graph.dominates(j, i)))
}

/// Allocates `residue` among four agents given who dominates whom.
///
/// Tries, in order: two agents that both dominate the other two let those two
/// divide and choose; an agent dominated by everyone takes it all; otherwise
/// one agent quarters the residue and the other three pick in an order where
/// every later picker dominates every earlier one.
pub fn post_double_domination(
    engine: &mut QueryEngine,
    residue: &Piece,
    graph: &Dominance,
    agents: [AgentId; 4],
) -> Result<(Allocation, PostDdBranch), ProtocolError> {
    let mut agents = agents;
    agents.sort();
    if residue.is_empty() {
        return Ok((Allocation::new(), PostDdBranch::Nothing));
    }

    for a in 0..4 {
        for b in a + 1..4 {
            let pair = [agents[a], agents[b]];
            let rest: Vec<AgentId> = agents.iter().copied().filter(|x| !pair.contains(x)).collect();
            if dominated_by_all(graph, &rest, &pair) {
                let alloc = divide_and_choose(engine, pair[0], pair[1], residue)?;
                let branch = PostDdBranch::DivideAndChoose { cutter: pair[0], chooser: pair[1] };
                engine.event("post_double_domination", json!(branch));
                return Ok((alloc, branch));
            }
        }
    }

    for &w in &agents {
        let rest: Vec<AgentId> = agents.iter().copied().filter(|&x| x != w).collect();
        if dominated_by_all(graph, &rest, &[w]) {
            let branch = PostDdBranch::GiveAll { to: w };
            engine.event("post_double_domination", json!(branch));
            return Ok(([(w, residue.clone())].into_iter().collect(), branch));
        }
    }

    // the highest-numbered eligible agent cuts
    for &w in agents.iter().rev() {
        let rest: Vec<AgentId> = agents.iter().copied().filter(|&x| x != w).collect();
        for (a, b, c) in [(0, 1, 2), (0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0)] {
            let (a, b, c) = (rest[a], rest[b], rest[c]);
            if graph.dominates(b, a) && graph.dominates(c, a) && graph.dominates(c, b) {
                let alloc = quarter_and_pick(engine, w, [a, b, c], residue)?;
                let branch = PostDdBranch::QuarterAndPick { cutter: w, order: [a, b, c] };
                engine.event("post_double_domination", json!(branch));
                return Ok((alloc, branch));
            }
        }
    }

    Err(ProtocolError::PreconditionViolated(
        "domination graph admits none of divide-and-choose, give-all, quarter-and-pick".into(),
    ))
}

fn quarter_and_pick(
    engine: &mut QueryEngine,
    w: AgentId,
    order: [AgentId; 3],
    residue: &Piece,
) -> Result<Allocation, ProtocolError> {
    let total = engine.ask_eval(w, residue)?;
    let mut points = Vec::with_capacity(3);
    for k in 1..=3 {
        points.push(engine.ask_cut(w, residue, &(&total * Ratio::new(k, 4)))?);
    }
    let mut free = vec![
        residue.left_of(&points[0]),
        residue.between(&points[0], &points[1]),
        residue.between(&points[1], &points[2]),
        residue.right_of(&points[2]),
    ];
    let mut alloc = Allocation::new();
    for a in order {
        let mut vals = Vec::with_capacity(free.len());
        for p in &free {
            vals.push(engine.ask_eval(a, p)?);
        }
        let q = argmax_set(&vals)[0];
        alloc.insert(a, free.remove(q));
    }
    alloc.insert(w, free.remove(0));
    Ok(alloc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cake::ValuationSpec;

    fn ids() -> [AgentId; 4] {
        [AgentId(1), AgentId(2), AgentId(3), AgentId(4)]
    }

    fn graph(edges: &[(u8, u8)]) -> Dominance {
        let mut g = Dominance::default();
        for &(j, i) in edges {
            g.add(AgentId(j), AgentId(i));
        }
        g
    }

    fn engine() -> QueryEngine {
        QueryEngine::simulated(&vec![ValuationSpec::uniform(); 4])
    }

    #[test]
    fn empty_residue_is_a_no_op() {
        let (alloc, b) = post_double_domination(&mut engine(), &Piece::empty(), &graph(&[]), ids()).unwrap();
        assert!(alloc.is_empty());
        assert_eq!(b, PostDdBranch::Nothing);
    }

    #[test]
    fn two_dominators_leave_divide_and_choose() {
        let g = graph(&[(1, 3), (1, 4), (2, 3), (2, 4)]);
        let (_, b) = post_double_domination(&mut engine(), &Piece::whole(), &g, ids()).unwrap();
        assert_eq!(b, PostDdBranch::DivideAndChoose { cutter: AgentId(3), chooser: AgentId(4) });
    }

    #[test]
    fn final_case_graph_quarters_and_picks() {
        let g = graph(&[(1, 3), (3, 1), (2, 1), (2, 4), (1, 4), (3, 2)]);
        let mut e = engine();
        let (alloc, b) = post_double_domination(&mut e, &Piece::whole(), &g, ids()).unwrap();
        assert_eq!(
            b,
            PostDdBranch::QuarterAndPick { cutter: AgentId(4), order: [AgentId(1), AgentId(2), AgentId(3)] }
        );
        assert_eq!(alloc.len(), 4);
        assert_eq!(e.counters().queries, 1 + 3 + 4 + 3 + 2);
    }

    #[test]
    fn everyone_dominating_one_agent_gives_it_all() {
        let g = graph(&[(1, 4), (2, 4), (3, 4), (1, 2), (2, 1)]);
        let (alloc, b) = post_double_domination(&mut engine(), &Piece::whole(), &g, ids()).unwrap();
        assert_eq!(b, PostDdBranch::GiveAll { to: AgentId(4) });
        assert_eq!(alloc[&AgentId(4)], Piece::whole());
    }

    #[test]
    fn sparse_graph_is_rejected() {
        let g = graph(&[(1, 2)]);
        assert!(matches!(
            post_double_domination(&mut engine(), &Piece::whole(), &g, ids()),
            Err(ProtocolError::PreconditionViolated(_))
        ));
    }
}
