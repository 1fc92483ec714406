use envyfree::cake::{Piece, ValuationSpec};
use envyfree::harness::{adversarial_profiles, gen_profile, quarter_profile, run_profile, ProtocolKind, TrialConfig};
use envyfree::protocol::{
    core_protocol, guaranteed_rank, overall_protocol, permutation_protocol, significant_pieces, three_agent_protocol,
    CoreCase, TrimRank,
};
use envyfree::query::{AgentId, QueryEngine, QueryKind};
use envyfree::ratio::{r, Ratio};
use envyfree::session::{replay, submit, truthful_answer, AnswerEvent, Progress, Seat, SessionError};
use envyfree::verify::{check_core_postconditions, check_envy_free, combine, DominationGraph};

fn ids() -> [AgentId; 3] {
    [AgentId(1), AgentId(2), AgentId(3)]
}

fn with_uniform_cutter(rows: [[i64; 4]; 3]) -> Vec<ValuationSpec> {
    let mut specs: Vec<ValuationSpec> = rows.iter().map(|&d| quarter_profile(d)).collect();
    specs.push(ValuationSpec::uniform());
    specs
}

#[test]
fn uniform_four_agents_finish_in_one_round() {
    let specs = vec![ValuationSpec::uniform(); 4];
    let mut e = QueryEngine::simulated(&specs);
    let out = overall_protocol(&mut e, &Piece::whole()).unwrap();
    assert_eq!(out.core_runs(), 1);
    assert!(out.residue.is_empty());
    assert!(e.counters().queries <= 26);
    assert!(check_envy_free(&out.allocation, &specs).unwrap().envy_free);
}

#[test]
fn uniform_core_round_costs_sixteen_queries() {
    let specs = vec![ValuationSpec::uniform(); 4];
    let mut e = QueryEngine::simulated(&specs);
    let out = core_protocol(&mut e, AgentId(4), ids(), &Piece::whole()).unwrap();
    assert_eq!(out.case, CoreCase::Matching);
    assert_eq!((e.counters().queries, e.counters().cuts), (16, 3));
    assert!(out.residue.is_empty());
    assert!(significant_pieces(&out).is_empty());
    for a in ids() {
        assert_eq!(guaranteed_rank(a, &out), TrimRank::Third);
    }
}

#[test]
fn every_named_core_case_is_reachable_and_sound() {
    for (label, specs) in adversarial_profiles(ProtocolKind::FourAgent) {
        let Some(pattern) = label.strip_prefix("core ") else { continue };
        let mut e = QueryEngine::simulated(&specs);
        let out = core_protocol(&mut e, AgentId(4), ids(), &Piece::whole()).unwrap();
        assert_eq!(out.case.pattern(), pattern, "{label}");
        assert!(check_core_postconditions(&out, &specs).unwrap().ok, "{label}");
        assert!(e.counters().cuts <= 11 && e.counters().queries <= 26, "{label}");
    }
}

#[test]
fn common_favourite_with_distinct_seconds_keeps_single_trimmers_whole() {
    let specs = with_uniform_cutter([[8, 6, 1, 2], [8, 1, 6, 2], [8, 1, 2, 6]]);
    let mut e = QueryEngine::simulated(&specs);
    let out = core_protocol(&mut e, AgentId(4), ids(), &Piece::whole()).unwrap();
    assert_eq!(out.case, CoreCase::OneTwoThree);
    let whole = (0..4).filter(|&q| !out.is_partial(q)).count();
    assert_eq!(whole, 3);
    // the shared favourite is cut at the second rightmost of its trims
    let mut points: Vec<&Ratio> = out.trims.iter().filter(|t| t.piece_id == 0).map(|t| &t.point).collect();
    points.sort();
    assert_eq!(out.slots[0].cut.as_ref(), Some(points[points.len() - 2]));
}

#[test]
fn significant_piece_is_the_larger_leftover() {
    let specs = with_uniform_cutter([[8, 1, 6, 2], [8, 6, 1, 2], [1, 8, 6, 2]]);
    let mut e = QueryEngine::simulated(&specs);
    let out = core_protocol(&mut e, AgentId(4), ids(), &Piece::whole()).unwrap();
    let partial: Vec<usize> = (0..4).filter(|&q| out.is_partial(q)).collect();
    assert!(!partial.is_empty());
    // the cutter's values of the leftovers, computed directly
    let cutter = &specs[3];
    let best = partial.iter().map(|&q| cutter.eval_piece(&out.left_slice(q))).max().unwrap();
    let expected: Vec<AgentId> = partial
        .iter()
        .filter(|&&q| cutter.eval_piece(&out.left_slice(q)) == best)
        .map(|&q| out.slots[q].holder)
        .collect();
    assert_eq!(significant_pieces(&out).into_iter().collect::<Vec<_>>(), expected);
}

#[test]
fn mutated_outcome_fails_conservation() {
    let specs = with_uniform_cutter([[8, 6, 1, 2], [6, 8, 1, 2], [8, 6, 2, 1]]);
    let mut e = QueryEngine::simulated(&specs);
    let mut out = core_protocol(&mut e, AgentId(4), ids(), &Piece::whole()).unwrap();
    assert!(!out.residue.is_empty());
    assert!(check_core_postconditions(&out, &specs).unwrap().ok);
    out.residue = Piece::empty();
    let rep = check_core_postconditions(&out, &specs).unwrap();
    assert!(!rep.conservation && !rep.ok);
}

#[test]
fn permutation_moves_the_significant_piece() {
    for (label, specs) in adversarial_profiles(ProtocolKind::FourAgent) {
        if !label.starts_with("permutation") {
            continue;
        }
        let run = run_profile(&label, ProtocolKind::FourAgent, &specs);
        let out = run.four.expect("run completes");
        let phase = out.phases.iter().find(|p| p.permutation.is_some()).expect("a reallocation happened");
        let p = phase.permutation.as_ref().unwrap();
        assert_eq!(format!("permutation {}", p.case.label()), label);
        assert_ne!(p.new_holder, p.sig_holder);
        let row = &phase.rows[p.row];
        for a in row.non_cutters() {
            assert!(specs[a.index()].eval_piece(&row.allocation[&a]) >= row.tau[&a], "{label}");
        }
        let allocs: Vec<_> = phase.rows.iter().map(|r| &r.allocation).collect();
        assert!(check_envy_free(&combine(&allocs), &specs).unwrap().envy_free, "{label}");
    }
}

#[test]
fn permutation_is_refused_for_a_complete_piece() {
    let specs = vec![ValuationSpec::uniform(); 4];
    let mut e = QueryEngine::simulated(&specs);
    let out = core_protocol(&mut e, AgentId(4), ids(), &Piece::whole()).unwrap();
    assert!(permutation_protocol(&out, AgentId(1), &[]).is_err());
}

#[test]
fn a_standalone_permutation_keeps_everyone_at_their_trim() {
    let config = TrialConfig::default();
    let mut tried = 0;
    for k in 0..300 {
        let specs = gen_profile(&config, k);
        let mut e = QueryEngine::simulated(&specs);
        let out = core_protocol(&mut e, AgentId(4), ids(), &Piece::whole()).unwrap();
        for h in significant_pieces(&out) {
            let Ok(res) = permutation_protocol(&out, h, &[]) else { continue };
            tried += 1;
            assert_ne!(res.new_holder, h);
            assert_eq!(res.outcome.residue, out.residue);
            for a in res.outcome.non_cutters() {
                assert!(specs[a.index()].eval_piece(&res.outcome.allocation[&a]) >= res.outcome.tau[&a]);
            }
            assert!(check_envy_free(&res.outcome.allocation, &specs).unwrap().envy_free);
        }
    }
    assert!(tried > 0);
}

#[test]
fn three_agents_with_different_favourites_stop_after_one_round() {
    let specs = vec![quarter_profile([4, 1, 1, 0]), quarter_profile([0, 1, 1, 4]), ValuationSpec::uniform()];
    let mut e = QueryEngine::simulated(&specs);
    let out = three_agent_protocol(&mut e, ids(), &Piece::whole()).unwrap();
    assert!(out.matching_exit);
    assert_eq!(e.counters().cuts, 2);
    assert!(check_envy_free(&out.allocation, &specs).unwrap().envy_free);
}

#[test]
fn three_agents_sharing_a_favourite_twice_swap() {
    // both favour the right end; agent 1 more sharply, so it trims further right both times
    let a1 = ValuationSpec::steps(&[(r(0, 1), r(1, 1)), (r(5, 6), r(4, 1))]).unwrap();
    let a2 = ValuationSpec::steps(&[(r(0, 1), r(1, 1)), (r(5, 6), r(3, 1))]).unwrap();
    let specs = vec![a1, a2, ValuationSpec::uniform()];
    let mut e = QueryEngine::simulated(&specs);
    let out = three_agent_protocol(&mut e, ids(), &Piece::whole()).unwrap();
    assert!(out.permuted);
    let rounds: Vec<_> = e.trace().iter().filter(|t| t.event_kind == "three_agent_round").collect();
    assert_eq!(rounds.len(), 2);
    assert!(rounds.iter().all(|t| t.payload["winner"] == 1));
    assert!(check_envy_free(&out.allocation, &specs).unwrap().envy_free);
    let total = out.allocation.values().fold(Piece::empty(), |a, p| a.union(p));
    assert_eq!(total, Piece::whole());
}

#[test]
fn final_allocation_leaves_everyone_dominating_everyone() {
    for k in 0..50 {
        let specs = gen_profile(&TrialConfig::default(), k);
        let mut e = QueryEngine::simulated(&specs);
        let out = overall_protocol(&mut e, &Piece::whole()).unwrap();
        let g = DominationGraph::compute(&out.allocation, &Piece::empty(), &specs).unwrap();
        assert_eq!(g.edges.len(), 12);
    }
}

#[test]
fn dominance_claimed_by_the_protocol_holds() {
    for k in 0..100 {
        let specs = gen_profile(&TrialConfig { seed: 5, ..TrialConfig::default() }, k);
        let mut e = QueryEngine::simulated(&specs);
        let out = overall_protocol(&mut e, &Piece::whole()).unwrap();
        // after each phase, the cutter's claims must hold against the leftover at that time
        let mut alloc = envyfree::protocol::Allocation::new();
        for phase in &out.phases {
            for row in &phase.rows {
                alloc = combine(&[&alloc, &row.allocation]);
            }
            let leftover = phase.rows.last().map(|r| r.residue.clone()).unwrap_or_default();
            for &d in &phase.dominated {
                let ok = envyfree::verify::check_domination(phase.cutter, d, &alloc, &leftover, &specs).unwrap();
                assert!(ok, "profile {k}: {} over {d}", phase.cutter);
            }
        }
    }
}

fn drive(specs: &[ValuationSpec], external: &[usize]) -> (Vec<AnswerEvent>, Progress, String) {
    let seats: Vec<Seat> = specs
        .iter()
        .enumerate()
        .map(|(k, s)| if external.contains(&k) { Seat::External } else { Seat::Simulated { valuation: s.clone() } })
        .collect();
    let mut log = Vec::new();
    loop {
        let state = replay(ProtocolKind::FourAgent, &seats, &log);
        match state.progress {
            Progress::Pending { query } => {
                let answer = truthful_answer(&specs[query.agent.index()], &query).unwrap();
                log = submit(ProtocolKind::FourAgent, &seats, &log, query.agent, query.seq, answer).unwrap().0;
            }
            done => return (log, done, serde_json::to_string(&state.transcript.to_json()).unwrap()),
        }
    }
}

#[test]
fn external_agents_answering_truthfully_match_the_simulation() {
    for k in [3u64, 204, 356] {
        let specs = gen_profile(&TrialConfig::default(), k);
        let sim = run_profile("sim", ProtocolKind::FourAgent, &specs);
        let (log, progress, transcript) = drive(&specs, &[0, 1, 2]);
        let Progress::Complete { allocation } = progress else { panic!("session did not finish") };
        assert_eq!(&allocation, &sim.four.unwrap().allocation);
        assert_eq!(transcript, serde_json::to_string(&sim.transcript.to_json()).unwrap());
        assert!(!log.is_empty());
    }
}

#[test]
fn a_cut_outside_the_piece_is_rejected() {
    let specs = vec![ValuationSpec::uniform(); 4];
    let seats = vec![Seat::Simulated { valuation: specs[0].clone() }, Seat::External, Seat::External, Seat::External];
    let mut log = Vec::new();
    loop {
        let Progress::Pending { query } = replay(ProtocolKind::FourAgent, &seats, &log).progress else {
            panic!("no cut was ever asked")
        };
        if query.kind == QueryKind::Evaluate {
            let a = truthful_answer(&specs[0], &query).unwrap();
            log = submit(ProtocolKind::FourAgent, &seats, &log, query.agent, query.seq, a).unwrap().0;
            continue;
        }
        let outside = query.piece.right_edge().unwrap() + Ratio::new(1, 2);
        let err = submit(ProtocolKind::FourAgent, &seats, &log, query.agent, query.seq, outside).unwrap_err();
        assert!(matches!(err, SessionError::MalformedAnswer(_)));
        break;
    }
}
