//! Agents 1 to 3 answer queries from outside; agent 4 is simulated.
//!
//! The session state is just the log of answers. Each step replays the
//! protocol on the log, which stops at the next unanswered query.

use envyfree::harness::{gen_profile, run_profile, ProtocolKind, TrialConfig};
use envyfree::prelude::*;
use envyfree::session::{replay, submit, truthful_answer, Progress, Seat};

fn main() {
    let specs = gen_profile(&TrialConfig::default(), 3);
    let seats = vec![
        Seat::External,
        Seat::External,
        Seat::External,
        Seat::Simulated { valuation: specs[3].clone() },
    ];
    let kind = ProtocolKind::FourAgent;

    let mut log = Vec::new();
    let allocation = loop {
        match replay(kind, &seats, &log).progress {
            Progress::Pending { query } => {
                // A lie that contradicts the piece is refused and the log is unchanged.
                if query.kind != QueryKind::Evaluate && log.len() == 3 {
                    let bad = Ratio::from_integer(2);
                    let err = submit(kind, &seats, &log, query.agent, query.seq, bad).unwrap_err();
                    println!("rejected: {err}");
                }
                let answer = truthful_answer(&specs[query.agent.index()], &query).unwrap();
                log = submit(kind, &seats, &log, query.agent, query.seq, answer).unwrap().0;
            }
            Progress::Complete { allocation } => break allocation,
            Progress::Failed { reason } => panic!("{reason}"),
        }
    };
    println!("{} answers from external agents", log.len());

    let simulated = run_profile("sim", kind, &specs).four.unwrap().allocation;
    assert_eq!(allocation, simulated);
    println!("same allocation as the fully simulated run");
}
