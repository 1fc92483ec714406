//! Resumable runs with external agents.
//!
//! A run is a pure function of the seats and the answers given so far.
//! [`replay`] re-executes the protocol from the start, feeding each external
//! agent its recorded answers in order, and stops at the first query nobody
//! has answered yet.

use serde::{Deserialize, Serialize};

use crate::cake::{Piece, ValuationSpec};
use crate::harness::ProtocolKind;
use crate::protocol::{overall_protocol, three_agent_protocol, Allocation, ProtocolError};
use crate::query::{AgentEndpoint, AgentId, Mailbox, Query, QueryEngine, QueryError, QueryKind, TraceEvent, Transcript};
use crate::ratio::Ratio;

/// Who sits in a seat.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Seat {
    Simulated { valuation: ValuationSpec },
    External,
}

/// One answer by an external agent; the log of these is the session state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerEvent {
    pub seq: u64,
    pub agent: AgentId,
    pub answer: Ratio,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Progress {
    Pending { query: Query },
    Complete { allocation: Allocation },
    Failed { reason: String },
}

#[derive(Debug, Clone)]
pub struct Replay {
    pub progress: Progress,
    pub transcript: Transcript,
    pub trace: Vec<TraceEvent>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SessionError {
    #[error("bad roster: {0}")]
    BadRoster(String),
    #[error("malformed answer: {0}")]
    MalformedAnswer(String),
    #[error("query #{0} is not pending")]
    NotPending(u64),
}

/// Checks that `seats` fits `protocol`.
pub fn check_roster(protocol: ProtocolKind, seats: &[Seat]) -> Result<(), SessionError> {
    if seats.len() != protocol.agents() {
        return Err(SessionError::BadRoster(format!(
            "{} agents given, {} needed",
            seats.len(),
            protocol.agents()
        )));
    }
    Ok(())
}

/// Runs `protocol` from scratch with the answers recorded so far.
pub fn replay(protocol: ProtocolKind, seats: &[Seat], answers: &[AnswerEvent]) -> Replay {
    let endpoints = seats
        .iter()
        .enumerate()
        .map(|(k, seat)| {
            let id = AgentId::from_index(k);
            match seat {
                Seat::Simulated { valuation } => AgentEndpoint::simulated(id, valuation.clone()),
                Seat::External => AgentEndpoint::external(
                    id,
                    Mailbox::new(answers.iter().filter(|a| a.agent == id).map(|a| a.answer.clone())),
                ),
            }
        })
        .collect();
    let mut engine = QueryEngine::new(endpoints);
    let result = match protocol {
        ProtocolKind::FourAgent => overall_protocol(&mut engine, &Piece::whole()).map(|o| o.allocation),
        ProtocolKind::ThreeAgent => {
            three_agent_protocol(&mut engine, [AgentId(1), AgentId(2), AgentId(3)], &Piece::whole())
                .map(|o| o.allocation)
        }
    };
    let progress = match result {
        Ok(allocation) => Progress::Complete { allocation },
        Err(ProtocolError::Query(QueryError::Suspended(q))) => Progress::Pending { query: *q },
        Err(e) => Progress::Failed { reason: e.to_string() },
    };
    let (transcript, trace) = engine.into_parts();
    Replay { progress, transcript, trace }
}

/// Appends `answer` to the pending query `seq` if the protocol accepts it.
/// Returns the new log; the old one is untouched on error.
pub fn submit(
    protocol: ProtocolKind,
    seats: &[Seat],
    answers: &[AnswerEvent],
    agent: AgentId,
    seq: u64,
    answer: Ratio,
) -> Result<(Vec<AnswerEvent>, Replay), SessionError> {
    let current = replay(protocol, seats, answers);
    match &current.progress {
        Progress::Pending { query } if query.seq == seq && query.agent == agent => {}
        _ => return Err(SessionError::NotPending(seq)),
    }
    let mut log = answers.to_vec();
    log.push(AnswerEvent { seq, agent, answer });
    let next = replay(protocol, seats, &log);
    if let Progress::Failed { reason } = &next.progress {
        // only the new answer can have broken a run that was fine before
        return Err(SessionError::MalformedAnswer(reason.clone()));
    }
    if next.transcript.entries.len() <= current.transcript.entries.len() {
        return Err(SessionError::MalformedAnswer("answer was not accepted".into()));
    }
    Ok((log, next))
}

/// What an agent with valuation `spec` answers to `query`.
pub fn truthful_answer(spec: &ValuationSpec, query: &Query) -> Option<Ratio> {
    let target = query.target.as_ref();
    match query.kind {
        QueryKind::Evaluate => Some(spec.eval_piece(&query.piece)),
        QueryKind::Cut => spec.cut_within(&query.piece, target?).ok().map(|c| c.point),
        QueryKind::Trim => {
            let left = spec.eval_piece(&query.piece) - target?;
            spec.cut_within(&query.piece, &left).ok().map(|c| c.point)
        }
    }
}
