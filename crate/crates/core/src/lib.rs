//! Exact, bounded envy-free cake cutting for three and four agents.
//!
//! The cake is `[0, 1]`. Agents are consulted only through evaluate, cut and
//! trim queries ([`query::QueryEngine`]); every answer is an exact rational.
//! Agents can be simulated from a piecewise-constant [`cake::ValuationSpec`]
//! or answer from outside, in which case a protocol stops with the pending
//! query and is resumed by running it again with the answers recorded so far.
//!
//! ```
//! use envyfree::prelude::*;
//!
//! let specs = vec![ValuationSpec::uniform(); 4];
//! let mut engine = QueryEngine::simulated(&specs);
//! let out = overall_protocol(&mut engine, &Piece::whole()).unwrap();
//! assert!(check_envy_free(&out.allocation, &specs).unwrap().envy_free);
//! assert!(out.residue.is_empty());
//! ```

// Errors carry the exact rationals involved; boxing them buys nothing here.
#![allow(clippy::result_large_err)]

pub mod cake;
pub mod harness;
pub mod protocol;
pub mod query;
pub mod ratio;
pub mod session;
pub mod verify;

pub mod prelude {
    pub use crate::cake::{Piece, ValuationSpec};
    pub use crate::protocol::{
        core_protocol, divide_and_choose, overall_protocol, permutation_protocol, post_double_domination,
        three_agent_protocol, Allocation, CoreCase, CoreOutcome, OverallOutcome, ProtocolError,
    };
    pub use crate::query::{AgentEndpoint, AgentId, Mailbox, QueryEngine, QueryKind, Transcript};
    pub use crate::ratio::{r, Ratio};
    pub use crate::verify::{check_core_postconditions, check_domination, check_envy_free, DominationGraph};
}
