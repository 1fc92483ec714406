//! Session service and command line for the envy-free protocols.
//!
//! [`store::SessionStore`] keeps each session as its log of accepted answers
//! and rebuilds state by replaying the protocol; [`api::router`] exposes it
//! over HTTP.

pub mod api;
pub mod cli;
pub mod store;
