use std::collections::BTreeSet;

use proptest::prelude::*;
use sealedbid_core::auction::{run_auction, AuctionConfig, BidRange, Scenario};
use sealedbid_core::chain::{replay, PhaseSchedule, ResultStatus};
use sealedbid_core::groups::MockSuite;

fn suite() -> MockSuite {
    MockSuite::new((1 << 61) - 1).unwrap()
}

fn config(seed: u64, bidders: u32, scenario: Scenario, max_bid: u64) -> AuctionConfig {
    AuctionConfig {
        auction_id: format!("prop-{seed}"),
        schedule: PhaseSchedule { t1: 1, t2: 2, t3: 3, t4: 5 },
        release_tick: 3,
        bidder_count: bidders,
        bid_range: BidRange { min: 1, max: max_bid },
        rng_seed: seed,
        scenario,
        ..AuctionConfig::default()
    }
}

fn scenario() -> impl Strategy<Value = Scenario> {
    proptest::sample::select(Scenario::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn ledger_invariants_hold_in_every_scenario(
        seed in any::<u64>(),
        bidders in 1u32..8,
        scenario in scenario(),
        max_bid in 1u64..20,
    ) {
        let s = suite();
        let run = run_auction(&s, &config(seed, bidders, scenario, max_bid)).unwrap();
        let state = run.ledger.state();

        // Replaying the log from genesis lands on the same state.
        let replayed = replay(s, run.ledger.genesis(), run.ledger.log()).unwrap();
        prop_assert_eq!(replayed, run.ledger.state_hash());
        prop_assert_eq!(hex::encode(replayed), run.outcome.state_hash.clone());

        prop_assert_eq!(state.total_money(), run.ledger.genesis().initial_state().total_money());

        // Every certificate the contracts accepted came from the CA.
        let issued: BTreeSet<u32> = run.bidders.iter().filter_map(|b| b.cert_serial).collect();
        prop_assert!(state.list1.keys().all(|serial| issued.contains(serial)));
        prop_assert!(state.list1.values().all(|e| e.bid_flag <= 1));

        let distinct: BTreeSet<_> = state.list2.iter().collect();
        prop_assert_eq!(distinct.len(), state.list2.len());

        // Bidder identities never reach the ledger.
        prop_assert!(!run.ledger.dump_jsonl().contains("bidder-"));

        let list3 = state.list3.as_ref().expect("every run ends with a result");
        prop_assert_eq!(list3.status, run.outcome.status);
        if list3.status == ResultStatus::Completed {
            let valid: Vec<_> = list3
                .all_opened
                .iter()
                .filter(|o| list3.valid_indices.contains(&o.submission_index))
                .collect();
            let min = valid.iter().map(|o| o.bid).min().unwrap();
            let first_min = valid.iter().filter(|o| o.bid == min).map(|o| o.submission_index).min();
            prop_assert_eq!(list3.winning_bid, Some(min));
            prop_assert_eq!(list3.winner_submission_index, first_min);
        }
        if scenario == Scenario::Honest {
            prop_assert_eq!(run.outcome.winning_bid, run.bidders.iter().map(|b| b.bid).min());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn same_seed_same_run(seed in any::<u64>(), scenario in scenario()) {
        let s = suite();
        let cfg = config(seed, 5, scenario, 99);
        let a = run_auction(&s, &cfg).unwrap();
        let b = run_auction(&s, &cfg).unwrap();
        prop_assert_eq!(a.ledger.dump_jsonl(), b.ledger.dump_jsonl());
        prop_assert_eq!(a.trace_jsonl(), b.trace_jsonl());
    }
}
