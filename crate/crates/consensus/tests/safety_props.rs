//! Agreement, validity and gap-free application under random fault schedules.

mod common;

use common::{action, check_safety, run, Fault, Submission};
use cyrep_consensus::{NetConfig, Partition};
use proptest::prelude::*;

const RTT: u64 = 100;

#[derive(Debug, Clone)]
struct Scenario {
    n: u32,
    net: NetConfig,
    subs: Vec<Submission>,
    faults: Vec<Fault>,
}

fn partition(n: u32) -> impl Strategy<Value = Partition> {
    (
        0..30 * RTT,
        1..20 * RTT,
        proptest::collection::vec(0..3u32, n as usize),
    )
        .prop_map(move |(start, len, side)| {
            let mut groups = vec![std::collections::BTreeSet::new(); 3];
            for (node, g) in side.into_iter().enumerate() {
                groups[g as usize].insert(node as u32);
            }
            Partition {
                start,
                end: start + len,
                groups,
            }
        })
}

fn scenario() -> impl Strategy<Value = Scenario> {
    prop_oneof![Just(3u32), Just(5u32)].prop_flat_map(|n| {
        let net = (
            any::<u64>(),
            0.0..0.3f64,
            0.0..0.2f64,
            1..RTT / 2,
            0..RTT,
            proptest::collection::vec(partition(n), 0..3),
        )
            .prop_map(|(seed, drop, dup, lo, extra, partitions)| NetConfig {
                seed,
                drop,
                dup,
                delay: (lo, lo + extra),
                partitions,
            });
        let subs = proptest::collection::vec((0..20 * RTT, 0..n), 1..8).prop_map(|v| {
            v.into_iter()
                .enumerate()
                .map(|(i, (time, node))| Submission {
                    time,
                    node,
                    action: action(&format!("a{i}")),
                })
                .collect::<Vec<_>>()
        });
        let faults =
            proptest::collection::vec((0..30 * RTT, 0..n, 1..10 * RTT), 0..2).prop_map(|v| {
                v.into_iter()
                    .flat_map(|(time, node, down)| {
                        [
                            Fault::Crash { time, node },
                            Fault::Restart {
                                time: time + down,
                                node,
                            },
                        ]
                    })
                    .collect::<Vec<_>>()
            });
        (Just(n), net, subs, faults).prop_map(|(n, net, subs, faults)| Scenario {
            n,
            net,
            subs,
            faults,
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn no_safety_violation(s in scenario()) {
        let (_, out) = run(s.n, RTT, s.net.clone(), &s.subs, &s.faults, 80 * RTT);
        if let Err(e) = check_safety(&out) {
            prop_assert!(false, "{e}");
        }
    }

    /// Once partitions heal and crashed replicas return, everything that was
    /// accepted for submission is applied everywhere.
    #[test]
    fn healed_runs_settle(s in scenario()) {
        let mut net = s.net.clone();
        net.drop = net.drop.min(0.15);
        let (_, out) = run(s.n, RTT, net, &s.subs, &s.faults, 600 * RTT);
        prop_assert!(out.settled, "stuck at {}", out.end);
        if let Err(e) = check_safety(&out) {
            prop_assert!(false, "{e}");
        }
    }
}
