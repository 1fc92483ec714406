use envyfree::cake::{normalize_piece, piece_subtract, Interval, Piece, ValuationSpec};
use envyfree::harness::{gen_profile, ProtocolKind, TrialConfig};
use envyfree::protocol::{
    core_protocol, overall_protocol, select_compromise_iteration, three_agent_protocol, Allocation, BonusTable,
};
use envyfree::query::{replay_against, AgentId, QueryEngine};
use envyfree::ratio::Ratio;
use envyfree::verify::{brute_force_compromise_rows, check_core_postconditions, check_domination, check_envy_free};
use proptest::prelude::*;

const DEN: i64 = 64;

fn spec_strategy() -> impl Strategy<Value = ValuationSpec> {
    (prop::collection::btree_set(1..DEN, 0..6), prop::collection::vec(0i64..10, 7)).prop_map(|(cuts, ds)| {
        let mut bps = vec![Ratio::zero()];
        bps.extend(cuts.iter().map(|&c| Ratio::new(c, DEN)));
        bps.push(Ratio::one());
        let n = bps.len() - 1;
        let mut densities: Vec<Ratio> = ds[..n].iter().map(|&d| Ratio::from_integer(d)).collect();
        if densities.iter().all(Ratio::is_zero) {
            densities[0] = Ratio::one();
        }
        ValuationSpec::new(bps, densities).unwrap()
    })
}

fn intervals_strategy() -> impl Strategy<Value = Vec<(i64, i64)>> {
    prop::collection::vec((0..=DEN, 0..=DEN), 0..5)
        .prop_map(|v| v.into_iter().map(|(a, b)| (a.min(b), a.max(b))).filter(|(a, b)| a < b).collect())
}

fn piece_of(v: &[(i64, i64)]) -> Piece {
    Piece::from_pairs(v.iter().map(|&(a, b)| (Ratio::new(a, DEN), Ratio::new(b, DEN)))).unwrap()
}

/// Integrates a density over a piece by summing segment overlaps.
fn integrate(spec: &ValuationSpec, p: &Piece) -> Ratio {
    let bps = spec.breakpoints();
    let mut total = Ratio::zero();
    for iv in p.intervals() {
        for (k, d) in spec.densities().iter().enumerate() {
            let lo = std::cmp::max(&bps[k], &iv.left).clone();
            let hi = std::cmp::min(&bps[k + 1], &iv.right).clone();
            if lo < hi {
                total += (hi - lo) * d;
            }
        }
    }
    total
}

fn profile(seed: u64, protocol: ProtocolKind) -> Vec<ValuationSpec> {
    gen_profile(&TrialConfig { seed, protocol, ..TrialConfig::default() }, seed % 97)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn eval_matches_integration(v in spec_strategy(), p in intervals_strategy()) {
        let p = piece_of(&p);
        prop_assert_eq!(v.eval_piece(&p), integrate(&v, &p));
    }

    #[test]
    fn eval_is_additive(v in spec_strategy(), p in intervals_strategy(), q in intervals_strategy()) {
        let p = piece_of(&p);
        let q = piece_of(&q);
        let q = piece_subtract(&q, &q.intersection(&p)).unwrap();
        prop_assert!(!p.overlaps(&q));
        prop_assert_eq!(v.eval_piece(&p.union(&q)), v.eval_piece(&p) + v.eval_piece(&q));
    }

    #[test]
    fn cut_hits_every_fraction(v in spec_strategy(), p in intervals_strategy(), k in 0i64..=12) {
        let p = piece_of(&p);
        let target = v.eval_piece(&p) * Ratio::new(k, 12);
        let cut = v.cut_within(&p, &target).unwrap();
        prop_assert_eq!(v.eval_piece(&p.left_of(&cut.point)), target.clone());
        prop_assert_eq!(integrate(&v, &cut.left), target);
        prop_assert_eq!(cut.left.union(&cut.right), p);
    }

    #[test]
    fn normalize_is_idempotent_and_order_free(p in intervals_strategy(), rot in 0usize..5) {
        let ivs: Vec<Interval> = p
            .iter()
            .map(|&(a, b)| Interval::new(Ratio::new(a, DEN), Ratio::new(b, DEN)).unwrap())
            .collect();
        let once = normalize_piece(ivs.clone()).unwrap();
        let twice = normalize_piece(once.intervals().to_vec()).unwrap();
        prop_assert_eq!(&once, &twice);
        let mut rotated = ivs;
        if !rotated.is_empty() {
            let n = rotated.len();
            rotated.rotate_left(rot % n);
            rotated.reverse();
        }
        prop_assert_eq!(normalize_piece(rotated).unwrap(), once);
    }

    #[test]
    fn trim_is_a_cut_from_the_other_side(v in spec_strategy(), p in intervals_strategy(), k in 0i64..=8) {
        let p = piece_of(&p);
        let total = v.eval_piece(&p);
        let t = &total * Ratio::new(k, 8);
        let mut a = QueryEngine::simulated(std::slice::from_ref(&v));
        let mut b = QueryEngine::simulated(std::slice::from_ref(&v));
        let trim = a.ask_trim(AgentId(1), &p, &t).unwrap();
        let cut = b.ask_cut(AgentId(1), &p, &(&total - &t)).unwrap();
        prop_assert_eq!(trim, cut);
        prop_assert_eq!(a.counters(), b.counters());
    }

    #[test]
    fn compromise_row_is_in_the_brute_force_set(rows in prop::collection::vec(prop::collection::vec(0u32..20, 3), 4)) {
        let table = BonusTable::new(rows);
        let all = brute_force_compromise_rows(&table);
        prop_assert!(!all.is_empty());
        prop_assert!(all.contains(&select_compromise_iteration(&table)));
    }

    #[test]
    fn domination_over_nothing_is_non_envy(seed in any::<u64>()) {
        let specs = profile(seed, ProtocolKind::FourAgent);
        let mut engine = QueryEngine::simulated(&specs);
        let out = core_protocol(&mut engine, AgentId(4), [AgentId(1), AgentId(2), AgentId(3)], &Piece::whole()).unwrap();
        let rep = check_envy_free(&out.allocation, &specs).unwrap();
        for &j in out.allocation.keys() {
            for &i in out.allocation.keys() {
                if i == j {
                    continue;
                }
                let envies = rep.witnesses.iter().any(|w| w.envier == j && w.envied == i);
                prop_assert_eq!(check_domination(j, i, &out.allocation, &Piece::empty(), &specs).unwrap(), !envies);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn core_round_postconditions_and_budget(specs in prop::collection::vec(spec_strategy(), 4)) {
        let mut engine = QueryEngine::simulated(&specs);
        let out = core_protocol(&mut engine, AgentId(4), [AgentId(1), AgentId(2), AgentId(3)], &Piece::whole()).unwrap();
        let rep = check_core_postconditions(&out, &specs).unwrap();
        prop_assert!(rep.ok, "{:?}", rep);
        let c = engine.counters();
        prop_assert!(c.cuts <= 11 && c.queries <= 26);
        prop_assert!(c.cuts <= c.queries);
    }

    #[test]
    fn three_agents_get_everything_without_envy(specs in prop::collection::vec(spec_strategy(), 3)) {
        let mut engine = QueryEngine::simulated(&specs);
        let out = three_agent_protocol(&mut engine, [AgentId(1), AgentId(2), AgentId(3)], &Piece::whole()).unwrap();
        prop_assert!(check_envy_free(&out.allocation, &specs).unwrap().envy_free);
        prop_assert_eq!(union(&out.allocation), Piece::whole());
    }

    #[test]
    fn four_agents_get_everything_without_envy(specs in prop::collection::vec(spec_strategy(), 4)) {
        let mut engine = QueryEngine::simulated(&specs);
        let out = overall_protocol(&mut engine, &Piece::whole()).unwrap();
        prop_assert!(check_envy_free(&out.allocation, &specs).unwrap().envy_free);
        prop_assert_eq!(union(&out.allocation), Piece::whole());
        let c = engine.counters();
        prop_assert!(c.cuts <= 203 && c.queries <= 584);
        let transcript = engine.transcript();
        for (k, spec) in specs.iter().enumerate() {
            prop_assert_eq!(replay_against(spec, AgentId::from_index(k), transcript), None);
        }
    }

    #[test]
    fn same_profile_same_transcript(seed in any::<u64>()) {
        let specs = profile(seed, ProtocolKind::FourAgent);
        let run = || {
            let mut e = QueryEngine::simulated(&specs);
            let out = overall_protocol(&mut e, &Piece::whole()).unwrap();
            (serde_json::to_string(&e.transcript().to_json()).unwrap(), out.allocation)
        };
        prop_assert_eq!(run(), run());
    }
}

fn union(alloc: &Allocation) -> Piece {
    alloc.values().fold(Piece::empty(), |acc, p| acc.union(p))
}
