//! Robertson–Webb queries, agent endpoints, and the transcript that does the
//! query and cut accounting.
//!
//! Every protocol in this crate talks to agents only through a [`QueryEngine`].
//! Simulated agents answer from a fixed [`ValuationSpec`]; external agents
//! answer from a mailbox of scripted or human-supplied answers. When an
//! external agent's mailbox runs dry the engine fails with
//! [`QueryError::Suspended`], carrying the pending query. Protocols are
//! deterministic, so re-running one against the same answers reproduces the
//! same transcript up to the suspension point; that is how sessions resume.

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::cake::{CakeError, Piece, ValuationSpec};
use crate::ratio::Ratio;

/// A participant, numbered from 1 as in the protocol descriptions.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AgentId(pub u8);

impl AgentId {
    pub fn from_index(i: usize) -> AgentId {
        AgentId(i as u8 + 1)
    }

    pub fn index(self) -> usize {
        self.0 as usize - 1
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Debug for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "agent{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryKind {
    /// Value of the piece.
    Evaluate,
    /// Point whose left part of the piece has the target value.
    Cut,
    /// Point whose right part of the piece has the target value.
    Trim,
}

impl QueryKind {
    pub fn is_cut(self) -> bool {
        matches!(self, QueryKind::Cut | QueryKind::Trim)
    }
}

/// A query addressed to one agent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query {
    pub seq: u64,
    pub agent: AgentId,
    pub kind: QueryKind,
    pub piece: Piece,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<Ratio>,
}

/// One answered query.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub seq: u64,
    pub agent: AgentId,
    pub kind: QueryKind,
    pub piece: Piece,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<Ratio>,
    /// A value for evaluations, a point for cuts and trims.
    pub answer: Ratio,
    /// Interval-level sweep length behind a simulated cut or trim; not
    /// counted as queries and not serialized, so external and simulated
    /// transcripts compare equal.
    #[serde(skip)]
    pub intervals_swept: Option<usize>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    pub queries: u64,
    pub cuts: u64,
}

impl std::ops::Sub for Counters {
    type Output = Counters;
    fn sub(self, rhs: Counters) -> Counters {
        Counters { queries: self.queries - rhs.queries, cuts: self.cuts - rhs.cuts }
    }
}

/// Ordered log of every query with running counters.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub entries: Vec<TranscriptEntry>,
    pub counters: Counters,
}

impl Transcript {
    pub fn query_count(&self) -> u64 {
        self.counters.queries
    }

    pub fn cut_count(&self) -> u64 {
        self.counters.cuts
    }

    fn push(&mut self, entry: TranscriptEntry) {
        self.counters.queries += 1;
        if entry.kind.is_cut() {
            self.counters.cuts += 1;
        }
        self.entries.push(entry);
    }

    /// JSON array of `{seq, agent, kind, piece, target?, answer}`.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(&self.entries).expect("transcript serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum QueryError {
    #[error("session is closed")]
    SessionClosed,
    #[error("unknown agent {0}")]
    UnknownAgent(AgentId),
    #[error("agent {agent}: target {target} exceeds the piece value {available}")]
    QueryInfeasible { agent: AgentId, target: Ratio, available: Ratio },
    #[error("agent {agent} gave a malformed answer: {reason}")]
    MalformedAnswer { agent: AgentId, reason: String },
    #[error("waiting for agent {} to answer query #{}", .0.agent, .0.seq)]
    Suspended(Box<Query>),
}

/// An external participant: answers arrive from outside, in order.
#[derive(Debug, Clone, Default)]
pub struct Mailbox {
    answers: VecDeque<Ratio>,
    evaluations: Vec<(Piece, Ratio)>,
    // (piece, value of the left part, point)
    cuts: Vec<(Piece, Ratio, Ratio)>,
}

impl Mailbox {
    pub fn new<I: IntoIterator<Item = Ratio>>(answers: I) -> Mailbox {
        Mailbox { answers: answers.into_iter().collect(), ..Mailbox::default() }
    }

    pub fn push(&mut self, answer: Ratio) {
        self.answers.push_back(answer);
    }

    fn known_value(&self, piece: &Piece) -> Option<&Ratio> {
        self.evaluations.iter().find(|(p, _)| p == piece).map(|(_, v)| v)
    }

    fn check_eval(&self, piece: &Piece, value: &Ratio) -> Result<(), String> {
        if value.is_negative() {
            return Err(format!("value {value} is negative"));
        }
        if piece.is_empty() && !value.is_zero() {
            return Err("an empty piece is worth 0".into());
        }
        match self.known_value(piece) {
            Some(v) if v != value => Err(format!("piece was valued {v} earlier, now {value}")),
            _ => Ok(()),
        }
    }

    fn check_point(&self, piece: &Piece, left_value: Option<&Ratio>, point: &Ratio) -> Result<(), String> {
        if !piece.is_empty() && !piece.contains_point(point) {
            return Err(format!("point {point} lies outside the queried piece"));
        }
        if piece.is_empty() && (point.is_negative() || *point > Ratio::one()) {
            return Err(format!("point {point} lies outside the cake"));
        }
        let Some(lv) = left_value else { return Ok(()) };
        for (p, v, x) in &self.cuts {
            if p != piece {
                continue;
            }
            if (v < lv && x > point) || (v > lv && x < point) {
                return Err(format!(
                    "cut at {point} for value {lv} contradicts earlier cut at {x} for value {v}"
                ));
            }
        }
        Ok(())
    }
}

/// How an endpoint produces answers.
#[derive(Debug, Clone)]
pub enum Backing {
    Simulated(ValuationSpec),
    External(Mailbox),
}

#[derive(Debug, Clone)]
pub struct AgentEndpoint {
    pub id: AgentId,
    pub backing: Backing,
}

impl AgentEndpoint {
    pub fn simulated(id: AgentId, spec: ValuationSpec) -> AgentEndpoint {
        AgentEndpoint { id, backing: Backing::Simulated(spec) }
    }

    pub fn external(id: AgentId, mailbox: Mailbox) -> AgentEndpoint {
        AgentEndpoint { id, backing: Backing::External(mailbox) }
    }
}

/// Where in a protocol the engine currently is; stamped onto trace events.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceContext {
    pub phase: String,
    pub cutter: Option<AgentId>,
    pub core_iteration: Option<u32>,
}

/// An auditable protocol event.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub phase: String,
    pub cutter: Option<AgentId>,
    pub core_iteration: Option<u32>,
    pub event_kind: String,
    pub payload: serde_json::Value,
}

/// Single-session query front end: owns the endpoints and the transcript.
#[derive(Debug, Clone)]
pub struct QueryEngine {
    endpoints: Vec<AgentEndpoint>,
    transcript: Transcript,
    trace: Vec<TraceEvent>,
    context: TraceContext,
    closed: bool,
}

impl QueryEngine {
    pub fn new(endpoints: Vec<AgentEndpoint>) -> QueryEngine {
        QueryEngine {
            endpoints,
            transcript: Transcript::default(),
            trace: Vec::new(),
            context: TraceContext::default(),
            closed: false,
        }
    }

    /// All agents simulated from the given specs, numbered 1..=n.
    pub fn simulated(specs: &[ValuationSpec]) -> QueryEngine {
        QueryEngine::new(
            specs
                .iter()
                .enumerate()
                .map(|(i, s)| AgentEndpoint::simulated(AgentId::from_index(i), s.clone()))
                .collect(),
        )
    }

    pub fn agents(&self) -> Vec<AgentId> {
        self.endpoints.iter().map(|e| e.id).collect()
    }

    pub fn transcript(&self) -> &Transcript {
        &self.transcript
    }

    pub fn counters(&self) -> Counters {
        self.transcript.counters
    }

    pub fn trace(&self) -> &[TraceEvent] {
        &self.trace
    }

    pub fn into_parts(self) -> (Transcript, Vec<TraceEvent>) {
        (self.transcript, self.trace)
    }

    pub fn close(&mut self) {
        self.closed = true;
    }

    pub fn context(&self) -> &TraceContext {
        &self.context
    }

    pub fn set_context(&mut self, phase: &str, cutter: Option<AgentId>, core_iteration: Option<u32>) {
        self.context = TraceContext { phase: phase.to_string(), cutter, core_iteration };
    }

    pub fn event(&mut self, event_kind: &str, payload: serde_json::Value) {
        self.trace.push(TraceEvent {
            phase: self.context.phase.clone(),
            cutter: self.context.cutter,
            core_iteration: self.context.core_iteration,
            event_kind: event_kind.to_string(),
            payload,
        });
    }

    fn endpoint_mut(&mut self, agent: AgentId) -> Result<&mut AgentEndpoint, QueryError> {
        self.endpoints
            .iter_mut()
            .find(|e| e.id == agent)
            .ok_or(QueryError::UnknownAgent(agent))
    }

    fn next_query(&self, agent: AgentId, kind: QueryKind, piece: &Piece, target: Option<&Ratio>) -> Query {
        Query {
            seq: self.transcript.entries.len() as u64 + 1,
            agent,
            kind,
            piece: piece.clone(),
            target: target.cloned(),
        }
    }

    fn record(&mut self, q: Query, answer: Ratio, intervals_swept: Option<usize>) {
        self.transcript.push(TranscriptEntry {
            seq: q.seq,
            agent: q.agent,
            kind: q.kind,
            piece: q.piece,
            target: q.target,
            answer,
            intervals_swept,
        });
    }

    /// Evaluate query: the agent's value of `piece`.
    pub fn ask_eval(&mut self, agent: AgentId, piece: &Piece) -> Result<Ratio, QueryError> {
        if self.closed {
            return Err(QueryError::SessionClosed);
        }
        let q = self.next_query(agent, QueryKind::Evaluate, piece, None);
        let value = match &mut self.endpoint_mut(agent)?.backing {
            Backing::Simulated(spec) => spec.eval_piece(piece),
            Backing::External(mb) => {
                let Some(v) = mb.answers.front().cloned() else {
                    return Err(QueryError::Suspended(Box::new(q)));
                };
                mb.check_eval(piece, &v)
                    .map_err(|reason| QueryError::MalformedAnswer { agent, reason })?;
                mb.answers.pop_front();
                mb.evaluations.push((piece.clone(), v.clone()));
                v
            }
        };
        self.record(q, value.clone(), None);
        Ok(value)
    }

    /// Cut query: leftmost point whose left part of `piece` is worth `target`.
    pub fn ask_cut(&mut self, agent: AgentId, piece: &Piece, target: &Ratio) -> Result<Ratio, QueryError> {
        self.cut_like(agent, QueryKind::Cut, piece, target)
    }

    /// Trim query: point whose right part of `piece` is worth `target`. When
    /// the target is the whole piece value this is the trivial trim at the
    /// piece's left edge.
    pub fn ask_trim(&mut self, agent: AgentId, piece: &Piece, target: &Ratio) -> Result<Ratio, QueryError> {
        self.cut_like(agent, QueryKind::Trim, piece, target)
    }

    fn cut_like(&mut self, agent: AgentId, kind: QueryKind, piece: &Piece, target: &Ratio) -> Result<Ratio, QueryError> {
        if self.closed {
            return Err(QueryError::SessionClosed);
        }
        if target.is_negative() {
            return Err(QueryError::QueryInfeasible {
                agent,
                target: target.clone(),
                available: Ratio::zero(),
            });
        }
        let q = self.next_query(agent, kind, piece, Some(target));
        let (point, swept) = match &mut self.endpoint_mut(agent)?.backing {
            Backing::Simulated(spec) => {
                let total = spec.eval_piece(piece);
                let left_value = match kind {
                    QueryKind::Trim => {
                        if *target > total {
                            return Err(QueryError::QueryInfeasible {
                                agent,
                                target: target.clone(),
                                available: total,
                            });
                        }
                        &total - target
                    }
                    _ => target.clone(),
                };
                let cut = spec.cut_within(piece, &left_value).map_err(|e| match e {
                    CakeError::QueryInfeasible { target, available } => {
                        QueryError::QueryInfeasible { agent, target, available }
                    }
                    other => QueryError::MalformedAnswer { agent, reason: other.to_string() },
                })?;
                (cut.point, Some(cut.intervals_swept))
            }
            Backing::External(mb) => {
                let Some(x) = mb.answers.front().cloned() else {
                    return Err(QueryError::Suspended(Box::new(q)));
                };
                let left_value = match kind {
                    QueryKind::Trim => mb.known_value(piece).map(|v| v - target),
                    _ => Some(target.clone()),
                };
                if let Some(lv) = &left_value {
                    if lv.is_negative() {
                        return Err(QueryError::QueryInfeasible {
                            agent,
                            target: target.clone(),
                            available: mb.known_value(piece).cloned().unwrap_or_default(),
                        });
                    }
                }
                mb.check_point(piece, left_value.as_ref(), &x)
                    .map_err(|reason| QueryError::MalformedAnswer { agent, reason })?;
                mb.answers.pop_front();
                if let Some(lv) = left_value {
                    mb.cuts.push((piece.clone(), lv, x.clone()));
                }
                (x, None)
            }
        };
        self.record(q, point.clone(), swept);
        Ok(point)
    }
}

/// Replays a transcript against a valuation and reports the first entry
/// whose recorded answer differs from what the valuation gives.
pub fn replay_against(spec: &ValuationSpec, agent: AgentId, transcript: &Transcript) -> Option<u64> {
    for e in transcript.entries.iter().filter(|e| e.agent == agent) {
        let expected = match e.kind {
            QueryKind::Evaluate => spec.eval_piece(&e.piece),
            QueryKind::Cut => match spec.cut_within(&e.piece, e.target.as_ref()?) {
                Ok(c) => c.point,
                Err(_) => return Some(e.seq),
            },
            QueryKind::Trim => {
                let lv = spec.eval_piece(&e.piece) - e.target.as_ref()?;
                match spec.cut_within(&e.piece, &lv) {
                    Ok(c) => c.point,
                    Err(_) => return Some(e.seq),
                }
            }
        };
        if expected != e.answer {
            return Some(e.seq);
        }
    }
    None
}
