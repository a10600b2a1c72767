//! Scenario driver and invariant checks shared by the consensus tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use cyrep_consensus::{
    ActionKey, Delivery, DeliveryKind, FieldValue, NetConfig, Notice, SerializedAction, SimCluster,
    Value,
};

pub fn action(tag: &str) -> SerializedAction {
    SerializedAction {
        proto: "InfosetText".into(),
        fields: vec![FieldValue::Str(tag.into())],
    }
}

#[derive(Debug, Clone)]
pub struct Submission {
    pub time: u64,
    pub node: u32,
    pub action: SerializedAction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    Crash { time: u64, node: u32 },
    Restart { time: u64, node: u32 },
}

#[derive(Debug, Default)]
pub struct Outcome {
    pub applied: Vec<Vec<Delivery>>,
    pub submitted: BTreeMap<ActionKey, SerializedAction>,
    /// Submissions refused because the replica was down at the time.
    pub refused: usize,
    /// Submissions whose submitter crashed before applying them. They may or
    /// may not be decided.
    pub orphaned: BTreeSet<ActionKey>,
    pub end: u64,
    /// Everything submitted was applied on every live replica.
    pub settled: bool,
}

const FAULT_TAG: u64 = 1 << 62;

/// Runs the scenario until every submission has been applied on every live
/// replica or the clock passes `max_time`.
pub fn run(
    n: u32,
    rtt: u64,
    net: NetConfig,
    subs: &[Submission],
    faults: &[Fault],
    max_time: u64,
) -> (SimCluster, Outcome) {
    let (mut c, notices) = SimCluster::in_memory(rtt, net, n).unwrap();
    let mut out = Outcome {
        applied: vec![Vec::new(); n as usize],
        ..Default::default()
    };
    absorb(&mut out, notices);
    for (i, s) in subs.iter().enumerate() {
        c.schedule_external(s.time, s.node, i as u64);
    }
    for (i, f) in faults.iter().enumerate() {
        let (Fault::Crash { time, node } | Fault::Restart { time, node }) = *f;
        c.schedule_external(time, node, FAULT_TAG | i as u64);
    }
    let mut externals_left = subs.len() + faults.len();
    loop {
        if externals_left == 0 && settled(&c, &out) {
            out.settled = true;
            break;
        }
        match c.peek_time() {
            Some(t) if t <= max_time => {}
            _ => break,
        }
        let notices = c.step().unwrap();
        for notice in notices {
            match notice {
                Notice::External { node, tag } if tag & FAULT_TAG != 0 => {
                    externals_left -= 1;
                    match faults[(tag & !FAULT_TAG) as usize] {
                        Fault::Crash { .. } => {
                            if c.is_up(node) {
                                let done: BTreeSet<ActionKey> =
                                    applied_actions(&out.applied[node as usize])
                                        .map(|(_, k)| k)
                                        .collect();
                                let lost: Vec<ActionKey> = out
                                    .submitted
                                    .keys()
                                    .filter(|k| k.0 == node && !done.contains(k))
                                    .copied()
                                    .collect();
                                out.orphaned.extend(lost);
                            }
                            c.crash(node)
                        }
                        Fault::Restart { .. } => {
                            if !c.is_up(node) {
                                // A restarted replica replays its log from slot 0.
                                out.applied[node as usize].clear();
                                let ns = c.restart(node).unwrap();
                                absorb(&mut out, ns);
                            }
                        }
                    }
                }
                Notice::External { node, tag } => {
                    externals_left -= 1;
                    let a = subs[tag as usize].action.clone();
                    match c.submit(node, a.clone()) {
                        Some((key, ns)) => {
                            out.submitted.insert(key, a);
                            absorb(&mut out, ns);
                        }
                        None => out.refused += 1,
                    }
                }
                other => absorb(&mut out, vec![other]),
            }
        }
    }
    out.end = c.now();
    (c, out)
}

fn absorb(out: &mut Outcome, notices: Vec<Notice>) {
    for n in notices {
        match n {
            Notice::Applied { node, delivery } => out.applied[node as usize].push(delivery),
            Notice::Failed { node, error } => panic!("replica {node} failed: {error}"),
            Notice::External { .. } => unreachable!(),
        }
    }
}

fn settled(c: &SimCluster, out: &Outcome) -> bool {
    (0..c.len()).filter(|id| c.is_up(*id)).all(|id| {
        let keys: BTreeSet<ActionKey> = applied_actions(&out.applied[id as usize])
            .map(|(_, k)| k)
            .collect();
        out.submitted
            .keys()
            .all(|k| keys.contains(k) || out.orphaned.contains(k))
    })
}

pub fn applied_actions(ds: &[Delivery]) -> impl Iterator<Item = (u64, ActionKey)> + '_ {
    ds.iter().filter_map(|d| match &d.kind {
        DeliveryKind::Action(e) => Some((d.slot, e.key())),
        _ => None,
    })
}

fn slot_value(d: &Delivery) -> Value {
    match &d.kind {
        DeliveryKind::Noop => Value::Noop,
        DeliveryKind::Action(e) | DeliveryKind::Duplicate(e) => Value::Action(e.clone()),
    }
}

/// Agreement, validity, gap-free slot order and at-most-once application.
/// Returns a description of the first violation found.
pub fn check_safety(out: &Outcome) -> Result<(), String> {
    let mut chosen: BTreeMap<u64, Value> = BTreeMap::new();
    for (node, ds) in out.applied.iter().enumerate() {
        let mut seen = BTreeSet::new();
        for (i, d) in ds.iter().enumerate() {
            if d.slot != i as u64 {
                return Err(format!(
                    "replica {node} applied slot {} at position {i}",
                    d.slot
                ));
            }
            let v = slot_value(d);
            match chosen.get(&d.slot) {
                Some(w) if *w != v => {
                    return Err(format!("slot {} differs: {w} vs {v} at {node}", d.slot))
                }
                _ => {
                    chosen.insert(d.slot, v.clone());
                }
            }
            if let Value::Action(e) = &v {
                match out.submitted.get(&e.key()) {
                    Some(a) if *a == e.action => {}
                    _ => return Err(format!("slot {} holds unsubmitted {v}", d.slot)),
                }
                let first = seen.insert(e.key());
                let is_dup = matches!(d.kind, DeliveryKind::Duplicate(_));
                if first == is_dup {
                    return Err(format!("replica {node} mislabels repeat of {v}"));
                }
            }
        }
    }
    Ok(())
}
