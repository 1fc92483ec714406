//! The protocols: divide and choose, the three-agent protocol, the four-agent
//! core protocol, the permutation step, the post double domination finish,
//! and the overall four-agent protocol that strings them together.
//!
//! Every protocol is a plain function over a [`QueryEngine`]. Agents are only
//! ever consulted through queries, so the same code runs against simulated
//! agents and against humans answering through the mediator.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::cake::Piece;
use crate::query::{AgentId, QueryError};

mod compromise;
mod core;
mod divide_and_choose;
mod matching;
mod overall;
mod permutation;
mod post_dd;
mod three_agent;

pub use self::compromise::{select_compromise_iteration, BonusTable};
pub use self::core::{
    core_protocol, guaranteed_rank, significant_pieces, CoreCase, CoreOutcome, Slot, TrimRank, TrimRecord,
};
pub use self::divide_and_choose::divide_and_choose;
pub use self::matching::top_piece_matching;
pub use self::overall::{overall_protocol, OverallOutcome, PermutationRecord, PhaseSummary};
pub use self::permutation::{certify_rows, permutation_protocol, PermutationCase, PermutationResult};
pub use self::post_dd::{post_double_domination, PostDdBranch};
pub use self::three_agent::{three_agent_protocol, ThreeAgentOutcome};


/// Agent to piece; agents absent from the map hold nothing.
pub type Allocation = BTreeMap<AgentId, Piece>;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProtocolError {
    #[error(transparent)]
    Query(#[from] QueryError),
    #[error("internal invariant violated: {0}")]
    InternalInvariantViolation(String),
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    #[error("bad input: {0}")]
    BadInput(String),
}

impl ProtocolError {
    /// The pending query if the protocol stopped waiting for an external agent.
    pub fn suspended(&self) -> Option<&crate::query::Query> {
        match self {
            ProtocolError::Query(QueryError::Suspended(q)) => Some(q),
            _ => None,
        }
    }
}

pub(crate) fn violation<T>(msg: impl Into<String>) -> Result<T, ProtocolError> {
    Err(ProtocolError::InternalInvariantViolation(msg.into()))
}

/// Adds `piece` to whatever `agent` already holds.
pub fn merge_into(alloc: &mut Allocation, agent: AgentId, piece: &Piece) {
    let e = alloc.entry(agent).or_insert_with(Piece::empty);
    *e = e.union(piece);
}

/// Directed "j dominates i" edges known to the protocol.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dominance {
    pub edges: std::collections::BTreeSet<(AgentId, AgentId)>,
}

impl Dominance {
    pub fn add(&mut self, j: AgentId, i: AgentId) {
        self.edges.insert((j, i));
    }

    pub fn dominates(&self, j: AgentId, i: AgentId) -> bool {
        self.edges.contains(&(j, i))
    }

    pub fn out_degree(&self, j: AgentId) -> usize {
        self.edges.iter().filter(|(a, _)| *a == j).count()
    }
}
