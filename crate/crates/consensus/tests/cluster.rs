//! Whole-cluster runs over the simulated network.

mod common;

use std::collections::BTreeSet;

use common::{action, applied_actions, check_safety, run, Fault, Submission};
use cyrep_consensus::{NetConfig, Partition};

const RTT: u64 = 100;

fn sub(time: u64, node: u32, tag: &str) -> Submission {
    Submission {
        time,
        node,
        action: action(tag),
    }
}

#[test]
fn lossless_round_decides_within_ten_rtt() {
    let (_, out) = run(
        3,
        RTT,
        NetConfig::for_rtt(RTT, 7),
        &[sub(0, 0, "a")],
        &[],
        10 * RTT,
    );
    assert!(out.settled, "not settled by {}", out.end);
    assert!(out.end < 10 * RTT);
    check_safety(&out).unwrap();
}

#[test]
fn majority_side_of_partition_decides() {
    let mut net = NetConfig::for_rtt(RTT, 3);
    net.partitions.push(Partition {
        start: 0,
        end: u64::MAX,
        groups: vec![[0].into(), [1, 2].into()],
    });
    let (c, out) = run(3, RTT, net, &[sub(0, 1, "a")], &[], 40 * RTT);
    // Replica 0 never hears of it, so the run does not settle globally.
    assert!(!out.settled);
    assert!(out.applied[0].is_empty());
    for id in [1, 2] {
        assert_eq!(applied_actions(&out.applied[id]).count(), 1, "replica {id}");
    }
    assert!(c.replica(1).unwrap().is_leading());
    check_safety(&out).unwrap();
}

#[test]
fn same_seed_same_trace() {
    let go = || {
        let mut net = NetConfig::for_rtt(RTT, 99);
        net.drop = 0.1;
        net.dup = 0.05;
        let subs: Vec<_> = (0..10)
            .map(|i| sub(i * 37, (i % 3) as u32, &format!("a{i}")))
            .collect();
        let (mut c, out) = run(3, RTT, net, &subs, &[], 200 * RTT);
        assert!(out.settled);
        c.net_mut().take_trace();
        (out.end, format!("{:?}", out.applied), c.sends().len())
    };
    assert_eq!(go(), go());
}

#[test]
fn trace_is_reproducible() {
    use cyrep_consensus::{Event, Network};
    let trace = || {
        let mut cfg = NetConfig::for_rtt(RTT, 5);
        cfg.drop = 0.1;
        let mut net: Network<String> = Network::new(cfg).unwrap();
        net.record_trace(true);
        for i in 0..50u32 {
            net.send(i % 3, (i + 1) % 3, format!("m{i}"));
        }
        net.schedule(10, Event::Timer { node: 0, tag: 1 });
        while net.pop().is_some() {}
        net.take_trace()
    };
    let a = trace();
    assert_eq!(a, trace());
    assert!(a.iter().any(|l| l.contains(" drop ")));
}

#[test]
fn concurrent_pair_takes_slots_zero_and_one() {
    for seed in 0..100 {
        let subs = [sub(0, 1, "from1"), sub(0, 2, "from2")];
        let (_, out) = run(3, RTT, NetConfig::for_rtt(RTT, seed), &subs, &[], 50 * RTT);
        assert!(out.settled, "seed {seed}");
        check_safety(&out).unwrap();
        let first: Vec<_> = applied_actions(&out.applied[0]).collect();
        let slots: BTreeSet<u64> = first.iter().map(|(s, _)| *s).collect();
        assert_eq!(slots, BTreeSet::from([0, 1]), "seed {seed}");
        for a in &out.applied[1..] {
            assert_eq!(applied_actions(a).collect::<Vec<_>>(), first, "seed {seed}");
        }
    }
}

#[test]
fn lossy_runs_converge() {
    for seed in 0..20 {
        let mut net = NetConfig::for_rtt(RTT, seed);
        net.drop = 0.1;
        net.dup = 0.05;
        let subs: Vec<_> = (0..30)
            .map(|i| sub(i * 20, (i % 3) as u32, &format!("a{i}")))
            .collect();
        let (_, out) = run(3, RTT, net, &subs, &[], 500 * RTT);
        assert!(out.settled, "seed {seed} stuck at {}", out.end);
        check_safety(&out).unwrap();
        assert_eq!(out.submitted.len(), 30);
    }
}

#[test]
fn restarted_replica_replays_and_catches_up() {
    for k in [0u64, 3, 10] {
        // Replica 2 dies once it has applied k actions, then comes back.
        let subs: Vec<_> = (0..20)
            .map(|i| sub(3 * RTT + i * RTT, (i % 2) as u32, &format!("a{i}")))
            .collect();
        let crash_at = 3 * RTT + k * RTT + RTT / 2;
        let faults = [
            Fault::Crash {
                time: crash_at,
                node: 2,
            },
            Fault::Restart {
                time: crash_at + 5 * RTT,
                node: 2,
            },
        ];
        let (_, out) = run(
            3,
            RTT,
            NetConfig::for_rtt(RTT, k),
            &subs,
            &faults,
            400 * RTT,
        );
        assert!(out.settled, "k={k}");
        check_safety(&out).unwrap();
        let want: Vec<_> = applied_actions(&out.applied[0]).collect();
        assert_eq!(want.len(), 20);
        assert_eq!(
            applied_actions(&out.applied[2]).collect::<Vec<_>>(),
            want,
            "k={k}"
        );
    }
}

#[test]
fn leader_crash_is_survived() {
    let subs: Vec<_> = (0..10)
        .map(|i| sub(i * 50, 1 + (i % 2) as u32, &format!("a{i}")))
        .collect();
    let faults = [Fault::Crash {
        time: 4 * RTT,
        node: 0,
    }];
    let (c, out) = run(
        3,
        RTT,
        NetConfig::for_rtt(RTT, 11),
        &subs,
        &faults,
        200 * RTT,
    );
    assert!(out.settled);
    check_safety(&out).unwrap();
    assert!(c.replica(1).unwrap().is_leading());
}
