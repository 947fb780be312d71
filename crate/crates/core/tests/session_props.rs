use std::collections::BTreeSet;

use hcatd_core::{LogEvent, RequirementSpec, Session, TestState};
use hcatd_testkit::{oracle, random_model, rng, to_scenario, ScriptedTester};
use proptest::prelude::*;

fn check(session: &Session) -> Result<(), TestCaseError> {
    let e: BTreeSet<_> = session.executable().iter().cloned().collect();
    let v: BTreeSet<_> = session.validated().into_iter().collect();
    let rj: BTreeSet<_> = session.rejected().into_iter().collect();
    let u: BTreeSet<_> = session.uncertain().into_iter().collect();
    prop_assert!(v.is_disjoint(&rj) && v.is_disjoint(&u) && rj.is_disjoint(&u));
    let all: BTreeSet<_> = v.union(&rj).chain(u.iter()).cloned().collect();
    prop_assert_eq!(&all, &e);
    prop_assert_eq!(session.uncertainty(), u.len());
    prop_assert!(v.iter().all(|s| session.model().is_executable(s)));
    let first = session.next_queries(5);
    prop_assert_eq!(&first, &session.next_queries(5));
    for w in first.windows(2) {
        prop_assert!(w[0].rank_score >= w[1].rank_score);
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn scripted_sessions_keep_invariants(seed in any::<u64>()) {
        let mut r = rng(seed);
        let spec = random_model(&mut r, 4, 3, 2);
        prop_assume!(!oracle::space(&spec).is_empty());
        let t = spec.domains.len().min(2);
        let mut session = Session::open(spec.build(), RequirementSpec::Strength(t), vec![]).unwrap();
        let mut tester = ScriptedTester::new(&spec, seed);
        check(&session)?;
        for _ in 0..15 {
            if tester.drive(&mut session, 1) == 0 {
                break;
            }
            check(&session)?;
        }
        // Rejected scenarios stay rejected; nothing outside E is ever asked.
        for entry in session.log() {
            if let LogEvent::Answered { query, .. } = &entry.event {
                if let hcatd_core::QueryCandidate::Test(s) = &query.candidate {
                    prop_assert!(spec.holds(s.values()));
                }
            }
        }
        for s in oracle::product(&spec) {
            let s = to_scenario(&s);
            if !session.is_executable(&s) {
                prop_assert!(session.is_rejected_by_model(&s));
                prop_assert_eq!(session.state_of(&s), TestState::Rejected);
            }
        }
        let replayed = session.replay().unwrap();
        prop_assert_eq!(replayed.explicit_states(), session.explicit_states());
        prop_assert_eq!(replayed.model().restrictions(), session.model().restrictions());
        prop_assert_eq!(replayed.suppressed(), session.suppressed());
    }

    #[test]
    fn answered_queries_close(seed in any::<u64>()) {
        let mut r = rng(seed);
        let spec = random_model(&mut r, 4, 3, 1);
        prop_assume!(!oracle::space(&spec).is_empty());
        let t = spec.domains.len().min(2);
        let mut session = Session::open(spec.build(), RequirementSpec::Strength(t), vec![]).unwrap();
        let mut tester = ScriptedTester::new(&spec, seed);
        tester.drive(&mut session, 4);
        let answered: Vec<String> = session
            .log()
            .iter()
            .filter_map(|e| match &e.event {
                LogEvent::Answered { query, .. } => Some(query.id.clone()),
                _ => None,
            })
            .collect();
        let open: BTreeSet<String> = session.open_queries().into_iter().map(|q| q.id).collect();
        for id in answered {
            prop_assert!(!open.contains(&id));
            prop_assert!(session.answer_query(&id, hcatd_core::Answer::Accept).is_err());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn query_loop_terminates_with_shrinking_uncertainty(seed in any::<u64>()) {
        let mut r = rng(seed);
        let spec = random_model(&mut r, 4, 3, 2);
        let e = oracle::space(&spec).len();
        prop_assume!(e > 0);
        let t = spec.domains.len().min(2);
        let mut session = Session::open(spec.build(), RequirementSpec::Strength(t), vec![]).unwrap();
        let mut tester = ScriptedTester::new(&spec, seed);
        let mut uncertainty = session.uncertainty();
        let mut steps = 0;
        while tester.drive(&mut session, 1) == 1 {
            steps += 1;
            prop_assert!(session.uncertainty() <= uncertainty);
            uncertainty = session.uncertainty();
            prop_assert!(steps <= 4 * e + 64, "query loop does not terminate");
        }
        let confirms = session
            .log()
            .iter()
            .filter(|l| matches!(&l.event, LogEvent::Answered { query, .. }
                if matches!(query.candidate, hcatd_core::QueryCandidate::Test(_))))
            .count();
        prop_assert!(confirms <= e);
        prop_assert!(session.next_queries(1).is_empty());
    }
}
