//! Multi-Paxos replica: acceptor, learner and proposer in one state machine.
//!
//! A replica is driven by three inputs, `submit`, `handle` and `tick`, each
//! stamped with the current simulated time. Messages addressed to itself are
//! consumed internally, so the returned [`Outputs`] only name peers.
//! Every promise and accept is appended to storage before the reply leaves;
//! a storage error aborts the call and the replica must be treated as dead.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use crate::codec::{ActionKey, Envelope, SerializedAction};
use crate::net::NodeId;
use crate::storage::{Record, Storage, StorageError};

/// Proposal number, ordered by round and then by proposer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Ballot {
    pub round: u64,
    pub id: u32,
}

impl fmt::Display for Ballot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.round, self.id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Value {
    Noop,
    Action(Envelope),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Noop => f.write_str("noop"),
            Value::Action(e) => write!(f, "{}#{:x}", e.replica, e.seq),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Msg {
    Prepare {
        ballot: Ballot,
        from_slot: u64,
    },
    Promise {
        ballot: Ballot,
        accepted: Vec<(u64, Ballot, Value)>,
        decided: Vec<(u64, Value)>,
    },
    Nack {
        promised: Ballot,
    },
    Accept {
        ballot: Ballot,
        slot: u64,
        value: Value,
    },
    Accepted {
        ballot: Ballot,
        slot: u64,
        value: Value,
    },
    Decide {
        slot: u64,
        value: Value,
    },
    Forward(Envelope),
    Heartbeat {
        frontier: u64,
        promised: Ballot,
    },
    CatchUp {
        from: u64,
    },
}

impl fmt::Display for Msg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Msg::Prepare { ballot, from_slot } => write!(f, "prepare {ballot} from={from_slot}"),
            Msg::Promise {
                ballot,
                accepted,
                decided,
            } => write!(
                f,
                "promise {ballot} accepted={} decided={}",
                accepted.len(),
                decided.len()
            ),
            Msg::Nack { promised } => write!(f, "nack {promised}"),
            Msg::Accept {
                ballot,
                slot,
                value,
            } => write!(f, "accept {ballot} s{slot} {value}"),
            Msg::Accepted {
                ballot,
                slot,
                value,
            } => {
                write!(f, "accepted {ballot} s{slot} {value}")
            }
            Msg::Decide { slot, value } => write!(f, "decide s{slot} {value}"),
            Msg::Forward(e) => write!(f, "forward {}#{:x}", e.replica, e.seq),
            Msg::Heartbeat { frontier, promised } => write!(f, "heartbeat {frontier} {promised}"),
            Msg::CatchUp { from } => write!(f, "catchup {from}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DeliveryKind {
    Noop,
    Action(Envelope),
    /// A second decision of an already applied action; nothing to run.
    Duplicate(Envelope),
}

/// One slot handed to the state machine, in slot order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Delivery {
    pub slot: u64,
    pub kind: DeliveryKind,
}

#[derive(Debug, Default, PartialEq, Eq)]
pub struct Outputs {
    pub msgs: Vec<(NodeId, Msg)>,
    pub deliveries: Vec<Delivery>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReplicaConfig {
    pub id: NodeId,
    pub n: u32,
    /// Round-trip hint in simulated milliseconds; all timeouts derive from it.
    pub rtt: u64,
}

impl ReplicaConfig {
    pub fn quorum(&self) -> usize {
        self.n as usize / 2 + 1
    }

    pub fn tick_interval(&self) -> u64 {
        (self.rtt / 2).max(1)
    }

    fn timeout(&self) -> u64 {
        4 * self.rtt.max(1)
    }
}

/// Decided values past this many slots are sent per catch-up request.
const CATCH_UP_BATCH: u64 = 64;

#[derive(Debug)]
enum Role {
    Follower,
    Preparing {
        ballot: Ballot,
        from_slot: u64,
        started: u64,
        promises: BTreeMap<NodeId, Vec<(u64, Ballot, Value)>>,
    },
    Leading {
        ballot: Ballot,
    },
}

pub struct Replica {
    cfg: ReplicaConfig,
    storage: Box<dyn Storage>,
    incarnation: u32,
    next_counter: u32,
    started: u64,

    // acceptor
    promised: Ballot,
    accepted: BTreeMap<u64, (Ballot, Value)>,

    // learner
    votes: BTreeMap<u64, BTreeMap<Ballot, (Value, BTreeSet<NodeId>)>>,
    decided: BTreeMap<u64, Value>,
    decided_keys: BTreeSet<ActionKey>,
    next_apply: u64,
    applied_keys: BTreeSet<ActionKey>,

    // proposer
    role: Role,
    max_round: u64,
    next_slot: u64,
    proposals: BTreeMap<u64, (Value, u64)>,
    proposed_keys: BTreeSet<ActionKey>,
    queue: VecDeque<Envelope>,

    // failure detection and catch-up
    last_heard: BTreeMap<NodeId, u64>,
    last_heartbeat: Option<u64>,
    last_catch_up: Option<u64>,

    // own submissions not yet applied here
    pending: BTreeMap<ActionKey, (Envelope, u64)>,

    out: Outputs,
    inbox: VecDeque<Msg>,
}

impl fmt::Debug for Replica {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Replica")
            .field("id", &self.cfg.id)
            .field("incarnation", &self.incarnation)
            .field("role", &self.role)
            .field("next_apply", &self.next_apply)
            .finish_non_exhaustive()
    }
}

impl Replica {
    /// Rebuilds the replica from its log and starts a new session. Decided
    /// slots are delivered again, from slot 0, by [`Replica::start`].
    pub fn new(
        cfg: ReplicaConfig,
        mut storage: Box<dyn Storage>,
        now: u64,
    ) -> Result<Self, StorageError> {
        assert!(cfg.id < cfg.n, "replica id {} out of range", cfg.id);
        let records = storage.recover()?;
        let mut r = Replica {
            cfg,
            storage,
            incarnation: 0,
            next_counter: 0,
            started: now,
            promised: Ballot::default(),
            accepted: BTreeMap::new(),
            votes: BTreeMap::new(),
            decided: BTreeMap::new(),
            decided_keys: BTreeSet::new(),
            next_apply: 0,
            applied_keys: BTreeSet::new(),
            role: Role::Follower,
            max_round: 0,
            next_slot: 0,
            proposals: BTreeMap::new(),
            proposed_keys: BTreeSet::new(),
            queue: VecDeque::new(),
            last_heard: BTreeMap::new(),
            last_heartbeat: None,
            last_catch_up: None,
            pending: BTreeMap::new(),
            out: Outputs::default(),
            inbox: VecDeque::new(),
        };
        let mut sessions = None;
        for rec in records {
            match rec {
                Record::Promise(b) => r.promised = r.promised.max(b),
                Record::Accept {
                    slot,
                    ballot,
                    value,
                } => {
                    r.promised = r.promised.max(ballot);
                    match r.accepted.get(&slot) {
                        Some((old, _)) if *old > ballot => {}
                        _ => {
                            r.accepted.insert(slot, (ballot, value));
                        }
                    }
                }
                Record::Decide { slot, value } => {
                    if let Value::Action(e) = &value {
                        r.decided_keys.insert(e.key());
                    }
                    r.decided.insert(slot, value);
                }
                Record::Session(n) => sessions = Some(sessions.map_or(n, |m: u32| m.max(n))),
            }
        }
        r.max_round = r.promised.round;
        r.incarnation = sessions.map_or(0, |n| n + 1);
        r.storage.append(&Record::Session(r.incarnation))?;
        Ok(r)
    }

    pub fn id(&self) -> NodeId {
        self.cfg.id
    }

    pub fn config(&self) -> ReplicaConfig {
        self.cfg
    }

    pub fn incarnation(&self) -> u32 {
        self.incarnation
    }

    /// First slot not yet applied here.
    pub fn applied_upto(&self) -> u64 {
        self.next_apply
    }

    pub fn decided(&self) -> &BTreeMap<u64, Value> {
        &self.decided
    }

    pub fn promised(&self) -> Ballot {
        self.promised
    }

    pub fn accepted(&self) -> &BTreeMap<u64, (Ballot, Value)> {
        &self.accepted
    }

    pub fn is_leading(&self) -> bool {
        matches!(self.role, Role::Leading { .. })
    }

    /// Own submissions not yet applied locally.
    pub fn pending_submissions(&self) -> usize {
        self.pending.len()
    }

    pub fn into_storage(self) -> Box<dyn Storage> {
        self.storage
    }

    /// Replays recovered decisions and announces the replica.
    pub fn start(&mut self, now: u64) -> Result<Outputs, StorageError> {
        self.apply_ready();
        self.tick(now)
    }

    /// Submits an action; it is retried until applied here.
    pub fn submit(
        &mut self,
        now: u64,
        action: SerializedAction,
    ) -> Result<(ActionKey, Outputs), StorageError> {
        let seq = (u64::from(self.incarnation) << 32) | u64::from(self.next_counter);
        self.next_counter += 1;
        let env = Envelope {
            replica: self.cfg.id,
            seq,
            action,
        };
        let key = env.key();
        self.pending.insert(key, (env.clone(), now));
        self.route(now, env)?;
        Ok((key, self.flush(now)?))
    }

    pub fn handle(&mut self, now: u64, from: NodeId, msg: Msg) -> Result<Outputs, StorageError> {
        self.last_heard.insert(from, now);
        self.on_msg(now, from, msg)?;
        self.flush(now)
    }

    pub fn tick(&mut self, now: u64) -> Result<Outputs, StorageError> {
        if self.last_heartbeat.is_none_or(|t| now >= t + self.cfg.rtt) {
            self.last_heartbeat = Some(now);
            let frontier = self.frontier();
            let promised = self.promised;
            self.broadcast_peers(Msg::Heartbeat { frontier, promised });
        }
        let leader = self.leader(now);
        let me = self.cfg.id;
        match &self.role {
            Role::Follower => {
                if leader == me && self.grace_over(now) {
                    self.prepare(now);
                }
            }
            Role::Preparing { started, .. } => {
                if leader != me {
                    self.step_down();
                } else if now >= started + self.cfg.timeout() {
                    self.prepare(now);
                }
            }
            Role::Leading { ballot } => {
                let ballot = *ballot;
                if leader != me {
                    self.step_down();
                } else {
                    self.fill_gaps(now);
                    self.resend_stale(now, ballot);
                }
            }
        }
        if leader != me && !self.queue.is_empty() {
            for env in std::mem::take(&mut self.queue) {
                self.send(leader, Msg::Forward(env));
            }
        }
        let timeout = self.cfg.timeout();
        let stale: Vec<Envelope> = self
            .pending
            .values_mut()
            .filter(|(_, sent)| now >= *sent + timeout)
            .map(|(env, sent)| {
                *sent = now;
                env.clone()
            })
            .collect();
        for env in stale {
            log::debug!("replica {} retries {}#{:x}", me, env.replica, env.seq);
            self.route(now, env)?;
        }
        self.flush(now)
    }

    fn grace_over(&self, now: u64) -> bool {
        self.cfg.n == 1 || now >= self.started + 2 * self.cfg.rtt
    }

    /// Lowest id heard from recently, counting this replica.
    pub fn leader(&self, now: u64) -> NodeId {
        let window = self.cfg.timeout();
        self.last_heard
            .iter()
            .filter(|(_, t)| now < **t + window)
            .map(|(id, _)| *id)
            .chain([self.cfg.id])
            .min()
            .unwrap()
    }

    fn frontier(&self) -> u64 {
        self.decided
            .last_key_value()
            .map_or(0, |(s, _)| s + 1)
            .max(self.next_apply)
    }

    fn send(&mut self, to: NodeId, msg: Msg) {
        if to == self.cfg.id {
            self.inbox.push_back(msg);
        } else {
            self.out.msgs.push((to, msg));
        }
    }

    fn broadcast(&mut self, msg: Msg) {
        for to in 0..self.cfg.n {
            self.send(to, msg.clone());
        }
    }

    fn broadcast_peers(&mut self, msg: Msg) {
        for to in (0..self.cfg.n).filter(|t| *t != self.cfg.id) {
            self.out.msgs.push((to, msg.clone()));
        }
    }

    fn flush(&mut self, now: u64) -> Result<Outputs, StorageError> {
        while let Some(msg) = self.inbox.pop_front() {
            self.on_msg(now, self.cfg.id, msg)?;
        }
        Ok(std::mem::take(&mut self.out))
    }

    fn route(&mut self, now: u64, env: Envelope) -> Result<(), StorageError> {
        if let Role::Leading { ballot } = self.role {
            self.propose_request(now, ballot, env);
        } else {
            let leader = self.leader(now);
            if leader == self.cfg.id {
                if !self.queue.iter().any(|e| e.key() == env.key()) {
                    self.queue.push_back(env);
                }
            } else {
                self.send(leader, Msg::Forward(env));
            }
        }
        Ok(())
    }

    fn propose_request(&mut self, now: u64, ballot: Ballot, env: Envelope) {
        let key = env.key();
        if self.proposed_keys.contains(&key)
            || self.decided_keys.contains(&key)
            || self.applied_keys.contains(&key)
        {
            return;
        }
        self.proposed_keys.insert(key);
        let slot = self.next_slot;
        self.next_slot += 1;
        self.propose(now, ballot, slot, Value::Action(env));
    }

    fn propose(&mut self, now: u64, ballot: Ballot, slot: u64, value: Value) {
        self.proposals.insert(slot, (value.clone(), now));
        self.broadcast(Msg::Accept {
            ballot,
            slot,
            value,
        });
    }

    fn prepare(&mut self, now: u64) {
        self.max_round += 1;
        let ballot = Ballot {
            round: self.max_round,
            id: self.cfg.id,
        };
        let from_slot = self.next_apply;
        log::debug!(
            "replica {} prepares {ballot} from slot {from_slot}",
            self.cfg.id
        );
        self.role = Role::Preparing {
            ballot,
            from_slot,
            started: now,
            promises: BTreeMap::new(),
        };
        self.proposals.clear();
        self.proposed_keys.clear();
        self.broadcast(Msg::Prepare { ballot, from_slot });
    }

    fn step_down(&mut self) {
        if !matches!(self.role, Role::Follower) {
            log::debug!("replica {} steps down", self.cfg.id);
        }
        self.role = Role::Follower;
        self.proposals.clear();
        self.proposed_keys.clear();
    }

    fn observe(&mut self, b: Ballot) {
        self.max_round = self.max_round.max(b.round);
        let mine = match &self.role {
            Role::Follower => return,
            Role::Preparing { ballot, .. } | Role::Leading { ballot } => *ballot,
        };
        if b > mine {
            self.step_down();
        }
    }

    fn fill_gaps(&mut self, now: u64) {
        let Role::Leading { ballot } = self.role else {
            return;
        };
        for slot in self.next_apply..self.next_slot {
            if !self.decided.contains_key(&slot) && !self.proposals.contains_key(&slot) {
                self.propose(now, ballot, slot, Value::Noop);
            }
        }
    }

    fn resend_stale(&mut self, now: u64, ballot: Ballot) {
        let timeout = self.cfg.timeout();
        let stale: Vec<(u64, Value)> = self
            .proposals
            .iter_mut()
            .filter(|(_, (_, sent))| now >= *sent + timeout)
            .map(|(slot, (v, sent))| {
                *sent = now;
                (*slot, v.clone())
            })
            .collect();
        for (slot, value) in stale {
            self.broadcast(Msg::Accept {
                ballot,
                slot,
                value,
            });
        }
    }

    fn on_msg(&mut self, now: u64, from: NodeId, msg: Msg) -> Result<(), StorageError> {
        match msg {
            Msg::Prepare { ballot, from_slot } => {
                self.observe(ballot);
                if ballot < self.promised {
                    log::debug!("replica {} rejects prepare {ballot}", self.cfg.id);
                    self.send(
                        from,
                        Msg::Nack {
                            promised: self.promised,
                        },
                    );
                    return Ok(());
                }
                if ballot > self.promised {
                    self.storage.append(&Record::Promise(ballot))?;
                    self.promised = ballot;
                }
                let accepted = self
                    .accepted
                    .range(from_slot..)
                    .filter(|(s, _)| !self.decided.contains_key(s))
                    .map(|(s, (b, v))| (*s, *b, v.clone()))
                    .collect();
                let decided = self
                    .decided
                    .range(from_slot..)
                    .map(|(s, v)| (*s, v.clone()))
                    .collect();
                self.send(
                    from,
                    Msg::Promise {
                        ballot,
                        accepted,
                        decided,
                    },
                );
            }
            Msg::Promise {
                ballot,
                accepted,
                decided,
            } => {
                for (slot, value) in decided {
                    self.decide(slot, value)?;
                }
                let quorum = self.cfg.quorum();
                let Role::Preparing {
                    ballot: mine,
                    promises,
                    ..
                } = &mut self.role
                else {
                    return Ok(());
                };
                if *mine != ballot {
                    return Ok(());
                }
                promises.insert(from, accepted);
                if promises.len() >= quorum {
                    self.lead(now);
                }
            }
            Msg::Nack { promised } => self.observe(promised),
            Msg::Accept {
                ballot,
                slot,
                value,
            } => {
                self.observe(ballot);
                if let Some(v) = self.decided.get(&slot) {
                    let value = v.clone();
                    self.send(from, Msg::Decide { slot, value });
                    return Ok(());
                }
                if ballot < self.promised {
                    log::debug!("replica {} rejects accept {ballot} s{slot}", self.cfg.id);
                    self.send(
                        from,
                        Msg::Nack {
                            promised: self.promised,
                        },
                    );
                    return Ok(());
                }
                if self
                    .accepted
                    .get(&slot)
                    .is_none_or(|(b, v)| *b != ballot || *v != value)
                {
                    self.storage.append(&Record::Accept {
                        slot,
                        ballot,
                        value: value.clone(),
                    })?;
                    self.accepted.insert(slot, (ballot, value.clone()));
                }
                self.promised = ballot;
                self.broadcast(Msg::Accepted {
                    ballot,
                    slot,
                    value,
                });
            }
            Msg::Accepted {
                ballot,
                slot,
                value,
            } => {
                if self.decided.contains_key(&slot) {
                    return Ok(());
                }
                let quorum = self.cfg.quorum();
                let entry = self
                    .votes
                    .entry(slot)
                    .or_default()
                    .entry(ballot)
                    .or_insert_with(|| (value, BTreeSet::new()));
                entry.1.insert(from);
                if entry.1.len() >= quorum {
                    let v = entry.0.clone();
                    self.decide(slot, v)?;
                }
            }
            Msg::Decide { slot, value } => self.decide(slot, value)?,
            Msg::Forward(env) => {
                if let Role::Leading { ballot } = self.role {
                    self.propose_request(now, ballot, env);
                } else if self.leader(now) == self.cfg.id {
                    self.route(now, env)?;
                } else {
                    log::debug!("replica {} drops forwarded request", self.cfg.id);
                }
            }
            Msg::Heartbeat { frontier, promised } => {
                self.observe(promised);
                if frontier > self.next_apply
                    && self.last_catch_up.is_none_or(|t| now >= t + self.cfg.rtt)
                {
                    self.last_catch_up = Some(now);
                    self.send(
                        from,
                        Msg::CatchUp {
                            from: self.next_apply,
                        },
                    );
                }
            }
            Msg::CatchUp { from: start } => {
                let batch: Vec<(u64, Value)> = self
                    .decided
                    .range(start..start.saturating_add(CATCH_UP_BATCH))
                    .map(|(s, v)| (*s, v.clone()))
                    .collect();
                for (slot, value) in batch {
                    self.send(from, Msg::Decide { slot, value });
                }
            }
        }
        Ok(())
    }

    /// Phase 1 succeeded: re-propose what a promise quorum reported, fill
    /// holes with no-ops, then drain queued requests.
    fn lead(&mut self, now: u64) {
        let Role::Preparing {
            ballot,
            from_slot,
            promises,
            ..
        } = std::mem::replace(&mut self.role, Role::Follower)
        else {
            unreachable!()
        };
        log::debug!("replica {} leads with {ballot}", self.cfg.id);
        self.role = Role::Leading { ballot };
        let mut chosen: BTreeMap<u64, (Ballot, Value)> = BTreeMap::new();
        for (slot, b, v) in promises.into_values().flatten() {
            if chosen.get(&slot).is_none_or(|(cb, _)| b > *cb) {
                chosen.insert(slot, (b, v));
            }
        }
        let top = chosen
            .keys()
            .next_back()
            .copied()
            .into_iter()
            .chain(self.decided.keys().next_back().copied())
            .max()
            .map_or(0, |s| s + 1);
        let start = from_slot.min(self.next_apply);
        self.next_slot = top.max(self.next_apply);
        for slot in start..self.next_slot {
            if self.decided.contains_key(&slot) {
                continue;
            }
            let value = chosen.remove(&slot).map_or(Value::Noop, |(_, v)| v);
            if let Value::Action(e) = &value {
                self.proposed_keys.insert(e.key());
            }
            self.propose(now, ballot, slot, value);
        }
        for env in std::mem::take(&mut self.queue) {
            self.propose_request(now, ballot, env);
        }
    }

    fn decide(&mut self, slot: u64, value: Value) -> Result<(), StorageError> {
        if let Some(old) = self.decided.get(&slot) {
            assert_eq!(
                *old, value,
                "replica {} saw two decisions for slot {slot}",
                self.cfg.id
            );
            return Ok(());
        }
        self.storage.append(&Record::Decide {
            slot,
            value: value.clone(),
        })?;
        if let Value::Action(e) = &value {
            self.decided_keys.insert(e.key());
        }
        if let Some((mine, _)) = self.proposals.remove(&slot) {
            if mine != value {
                // Only a higher ballot can have chosen something else here.
                if let Value::Action(e) = &mine {
                    self.proposed_keys.remove(&e.key());
                }
                self.step_down();
            }
        }
        self.decided.insert(slot, value);
        self.votes.remove(&slot);
        self.apply_ready();
        Ok(())
    }

    fn apply_ready(&mut self) {
        while let Some(v) = self.decided.get(&self.next_apply) {
            let kind = match v {
                Value::Noop => DeliveryKind::Noop,
                Value::Action(e) => {
                    self.pending.remove(&e.key());
                    if self.applied_keys.insert(e.key()) {
                        DeliveryKind::Action(e.clone())
                    } else {
                        DeliveryKind::Duplicate(e.clone())
                    }
                }
            };
            self.out.deliveries.push(Delivery {
                slot: self.next_apply,
                kind,
            });
            self.next_apply += 1;
        }
        if self.next_slot < self.next_apply {
            self.next_slot = self.next_apply;
        }
    }
}
