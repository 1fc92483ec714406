//! Sessions persisted as their answer logs.
//!
//! A session file holds the roster and every accepted answer, nothing else.
//! Loading a file replays the protocol to rebuild the state, so a restarted
//! service resumes each session at the query it was waiting on.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use envyfree::harness::ProtocolKind;
use envyfree::query::{AgentId, QueryKind};
use envyfree::ratio::Ratio;
use envyfree::session::{check_roster, replay, submit, AnswerEvent, Progress, Replay, Seat, SessionError};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MediatorError {
    #[error("bad roster: {0}")]
    BadRoster(String),
    #[error("unknown or missing join token")]
    Unauthorized,
    #[error("no session {0}")]
    SessionNotFound(String),
    #[error("malformed answer: {0}")]
    MalformedAnswer(String),
    #[error("not pending: {0}")]
    NotPending(String),
    #[error("storage: {0}")]
    Storage(String),
}

impl MediatorError {
    pub fn kind(&self) -> &'static str {
        match self {
            MediatorError::BadRoster(_) => "BadRoster",
            MediatorError::Unauthorized => "Unauthorized",
            MediatorError::SessionNotFound(_) => "SessionNotFound",
            MediatorError::MalformedAnswer(_) => "MalformedAnswer",
            MediatorError::NotPending(_) => "NotPending",
            MediatorError::Storage(_) => "Storage",
        }
    }
}

impl From<SessionError> for MediatorError {
    fn from(e: SessionError) -> MediatorError {
        match e {
            SessionError::BadRoster(m) => MediatorError::BadRoster(m),
            SessionError::MalformedAnswer(m) => MediatorError::MalformedAnswer(m),
            SessionError::NotPending(seq) => MediatorError::NotPending(format!("query #{seq} is not pending")),
        }
    }
}

fn storage(e: impl std::fmt::Display) -> MediatorError {
    MediatorError::Storage(e.to_string())
}

fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
}

#[derive(Debug, Clone, Deserialize)]
pub struct CreateRequest {
    #[serde(default = "four_agents")]
    pub protocol: ProtocolKind,
    pub agents: Vec<Seat>,
}

fn four_agents() -> ProtocolKind {
    ProtocolKind::FourAgent
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeatRecord {
    pub agent: AgentId,
    pub token: String,
    pub seat: Seat,
}

/// Everything persisted about a session.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub id: String,
    pub protocol: ProtocolKind,
    pub seats: Vec<SeatRecord>,
    pub created_ms: u64,
    pub updated_ms: u64,
    pub answers: Vec<AnswerEvent>,
}

impl SessionRecord {
    fn seats(&self) -> Vec<Seat> {
        self.seats.iter().map(|s| s.seat.clone()).collect()
    }

    fn agent_for(&self, token: &str) -> Result<AgentId, MediatorError> {
        self.seats.iter().find(|s| s.token == token).map(|s| s.agent).ok_or(MediatorError::Unauthorized)
    }
}

struct Live {
    record: SessionRecord,
    state: Replay,
}

impl Live {
    fn new(record: SessionRecord) -> Live {
        let state = replay(record.protocol, &record.seats(), &record.answers);
        Live { record, state }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Created {
    pub id: String,
    pub tokens: Vec<Value>,
    pub progress: Progress,
}

/// All sessions, optionally backed by a directory of JSON files.
pub struct SessionStore {
    dir: Option<PathBuf>,
    sessions: RwLock<HashMap<String, Arc<Mutex<Live>>>>,
}

impl SessionStore {
    pub fn in_memory() -> SessionStore {
        SessionStore { dir: None, sessions: RwLock::new(HashMap::new()) }
    }

    /// Opens `dir`, creating it if needed, and resumes every session in it.
    pub fn open(dir: impl AsRef<Path>) -> Result<SessionStore, MediatorError> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(&dir).map_err(storage)?;
        let mut sessions = HashMap::new();
        for entry in fs::read_dir(&dir).map_err(storage)? {
            let path = entry.map_err(storage)?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("json") {
                continue;
            }
            let text = fs::read_to_string(&path).map_err(storage)?;
            let record: SessionRecord =
                serde_json::from_str(&text).map_err(|e| storage(format!("{}: {e}", path.display())))?;
            sessions.insert(record.id.clone(), Arc::new(Mutex::new(Live::new(record))));
        }
        Ok(SessionStore { dir: Some(dir), sessions: RwLock::new(sessions) })
    }

    fn persist(&self, record: &SessionRecord) -> Result<(), MediatorError> {
        let Some(dir) = &self.dir else { return Ok(()) };
        let tmp = dir.join(format!("{}.json.tmp", record.id));
        let text = serde_json::to_string_pretty(record).map_err(storage)?;
        fs::write(&tmp, text).map_err(storage)?;
        fs::rename(&tmp, dir.join(format!("{}.json", record.id))).map_err(storage)
    }

    fn get(&self, id: &str) -> Result<Arc<Mutex<Live>>, MediatorError> {
        let map = self.sessions.read().expect("session map lock");
        map.get(id).cloned().ok_or_else(|| MediatorError::SessionNotFound(id.to_string()))
    }

    fn with<T>(&self, id: &str, f: impl FnOnce(&mut Live) -> Result<T, MediatorError>) -> Result<T, MediatorError> {
        let live = self.get(id)?;
        let mut guard = live.lock().expect("session lock");
        f(&mut guard)
    }

    pub fn ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.sessions.read().expect("session map lock").keys().cloned().collect();
        ids.sort();
        ids
    }

    pub fn create(&self, req: CreateRequest) -> Result<Created, MediatorError> {
        check_roster(req.protocol, &req.agents)?;
        let now = now_ms();
        let record = SessionRecord {
            id: uuid::Uuid::new_v4().to_string(),
            protocol: req.protocol,
            seats: req
                .agents
                .into_iter()
                .enumerate()
                .map(|(k, seat)| SeatRecord {
                    agent: AgentId::from_index(k),
                    token: uuid::Uuid::new_v4().simple().to_string(),
                    seat,
                })
                .collect(),
            created_ms: now,
            updated_ms: now,
            answers: Vec::new(),
        };
        self.persist(&record)?;
        let live = Live::new(record);
        let created = Created {
            id: live.record.id.clone(),
            tokens: live.record.seats.iter().map(|s| json!({ "agent": s.agent, "token": s.token })).collect(),
            progress: live.state.progress.clone(),
        };
        self.sessions.write().expect("session map lock").insert(created.id.clone(), Arc::new(Mutex::new(live)));
        Ok(created)
    }

    /// What the holder of `token` should do next.
    pub fn pending(&self, id: &str, token: &str) -> Result<Value, MediatorError> {
        self.with(id, |live| {
            let me = live.record.agent_for(token)?;
            Ok(view_for(me, &live.state.progress))
        })
    }

    /// Answers the pending query; `seq` and `kind` default to the pending query's.
    pub fn answer(
        &self,
        id: &str,
        token: &str,
        seq: Option<u64>,
        kind: Option<QueryKind>,
        answer: &str,
    ) -> Result<Value, MediatorError> {
        self.with(id, |live| {
            let me = live.record.agent_for(token)?;
            let pending = match &live.state.progress {
                Progress::Pending { query } => query.clone(),
                _ => return Err(MediatorError::NotPending("the session is not waiting for answers".into())),
            };
            if pending.agent != me {
                return Err(MediatorError::NotPending(format!("waiting for agent {}, not {me}", pending.agent)));
            }
            let seq = seq.unwrap_or(pending.seq);
            if seq != pending.seq {
                return Err(MediatorError::NotPending(format!("query #{seq} is not pending")));
            }
            if kind.is_some_and(|k| k != pending.kind) {
                return Err(MediatorError::MalformedAnswer(format!("query #{seq} is a {:?} query", pending.kind)));
            }
            let value: Ratio = answer
                .trim()
                .parse()
                .map_err(|_| MediatorError::MalformedAnswer(format!("{answer:?} is not a rational p/q")))?;
            let (log, state) = submit(live.record.protocol, &live.record.seats(), &live.record.answers, me, seq, value)?;
            let mut record = live.record.clone();
            record.answers = log;
            record.updated_ms = now_ms();
            self.persist(&record)?;
            live.record = record;
            live.state = state;
            Ok(view_for(me, &live.state.progress))
        })
    }

    pub fn state(&self, id: &str) -> Result<Value, MediatorError> {
        self.with(id, |live| {
            let r = &live.record;
            Ok(json!({
                "id": r.id,
                "protocol": r.protocol,
                "created_ms": r.created_ms,
                "updated_ms": r.updated_ms,
                "agents": r.seats.iter().map(|s| json!({
                    "agent": s.agent,
                    "kind": match s.seat { Seat::External => "external", Seat::Simulated { .. } => "simulated" },
                })).collect::<Vec<_>>(),
                "answers": r.answers.len(),
                "progress": live.state.progress,
                "counters": live.state.transcript.counters,
                "trace": live.state.trace,
            }))
        })
    }

    pub fn transcript(&self, id: &str) -> Result<Value, MediatorError> {
        self.with(id, |live| {
            Ok(json!({
                "entries": live.state.transcript.to_json(),
                "counters": live.state.transcript.counters,
            }))
        })
    }
}

fn view_for(me: AgentId, progress: &Progress) -> Value {
    match progress {
        Progress::Pending { query } if query.agent == me => json!({ "status": "your_turn", "query": query }),
        Progress::Pending { query } => json!({ "status": "waiting", "waiting_for": query.agent }),
        Progress::Complete { allocation } => json!({ "status": "complete", "allocation": allocation }),
        Progress::Failed { reason } => json!({ "status": "failed", "reason": reason }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use envyfree::cake::ValuationSpec;

    fn external_four() -> CreateRequest {
        CreateRequest { protocol: ProtocolKind::FourAgent, agents: vec![Seat::External; 4] }
    }

    #[test]
    fn tokens_are_distinct_and_map_to_agents() {
        let store = SessionStore::in_memory();
        let c = store.create(external_four()).unwrap();
        let tokens: Vec<&str> = c.tokens.iter().map(|t| t["token"].as_str().unwrap()).collect();
        let mut dedup = tokens.clone();
        dedup.sort();
        dedup.dedup();
        assert_eq!(dedup.len(), 4);
        assert_eq!(c.tokens[2]["agent"], json!(3));
    }

    #[test]
    fn three_agent_rosters_need_three_seats() {
        let store = SessionStore::in_memory();
        let req = CreateRequest { protocol: ProtocolKind::ThreeAgent, agents: vec![Seat::External; 4] };
        assert!(matches!(store.create(req), Err(MediatorError::BadRoster(_))));
        let req = CreateRequest {
            protocol: ProtocolKind::ThreeAgent,
            agents: vec![Seat::Simulated { valuation: ValuationSpec::uniform() }; 3],
        };
        let c = store.create(req).unwrap();
        assert!(matches!(c.progress, Progress::Complete { .. }));
    }

    #[test]
    fn a_rejected_answer_is_not_persisted() {
        let dir = std::env::temp_dir().join(format!("envyfree-store-{}", uuid::Uuid::new_v4().simple()));
        let store = SessionStore::open(&dir).unwrap();
        let c = store.create(external_four()).unwrap();
        let Progress::Pending { query } = c.progress else { panic!("expected a pending query") };
        let token = c.tokens[query.agent.index()]["token"].as_str().unwrap().to_string();
        assert!(matches!(store.answer(&c.id, &token, None, None, "-1/2"), Err(MediatorError::MalformedAnswer(_))));
        let reopened = SessionStore::open(&dir).unwrap();
        assert_eq!(reopened.state(&c.id).unwrap()["answers"], 0);
        fs::remove_dir_all(dir).unwrap();
    }

    #[test]
    fn error_kinds_match_variant_names() {
        assert_eq!(MediatorError::from(SessionError::NotPending(3)).kind(), "NotPending");
        assert_eq!(MediatorError::Unauthorized.kind(), "Unauthorized");
    }
}
