//! Discrete-event network among replicas.
//!
//! Every event carries `(time, counter)`; the counter is assigned at insertion
//! so equal-time events pop in insertion order and a run is a pure function
//! of the configuration, the seed and the handlers.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::rng::SimRng;

pub type NodeId = u32;

/// Cuts the network into groups for `start <= t < end`. Nodes listed in no
/// group are isolated.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    pub start: u64,
    pub end: u64,
    pub groups: Vec<BTreeSet<NodeId>>,
}

impl Partition {
    pub fn separates(&self, now: u64, a: NodeId, b: NodeId) -> bool {
        if now < self.start || now >= self.end || a == b {
            return false;
        }
        let group = |n| self.groups.iter().position(|g| g.contains(&n));
        match (group(a), group(b)) {
            (Some(x), Some(y)) => x != y,
            _ => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetConfig {
    pub seed: u64,
    pub drop: f64,
    pub dup: f64,
    /// Inclusive one-way delay bounds in simulated milliseconds.
    pub delay: (u64, u64),
    pub partitions: Vec<Partition>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NetError {
    #[error("{0} probability must be within [0, 1]")]
    Probability(&'static str),
    #[error("minimum delay {0} exceeds maximum {1}")]
    Delay(u64, u64),
    #[error("partition ends ({1}) before it starts ({0})")]
    Window(u64, u64),
}

impl NetConfig {
    /// Lossless network whose one-way delay averages half the round trip.
    pub fn for_rtt(rtt: u64, seed: u64) -> Self {
        let rtt = rtt.max(2);
        NetConfig {
            seed,
            drop: 0.0,
            dup: 0.0,
            delay: (rtt / 4, rtt * 3 / 4),
            partitions: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<(), NetError> {
        if !(0.0..=1.0).contains(&self.drop) {
            return Err(NetError::Probability("drop"));
        }
        if !(0.0..=1.0).contains(&self.dup) {
            return Err(NetError::Probability("duplicate"));
        }
        if self.delay.0 > self.delay.1 {
            return Err(NetError::Delay(self.delay.0, self.delay.1));
        }
        for p in &self.partitions {
            if p.end < p.start {
                return Err(NetError::Window(p.start, p.end));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Event<M> {
    Deliver {
        src: NodeId,
        dst: NodeId,
        msg: M,
    },
    Timer {
        node: NodeId,
        tag: u64,
    },
    /// Caller-defined event (scripted input, crash, restart).
    External {
        node: NodeId,
        tag: u64,
    },
}

/// Pending events ordered by `(time, insertion counter)`.
#[derive(Debug, Clone)]
pub struct EventQueue<E> {
    events: BTreeMap<(u64, u64), E>,
    counter: u64,
}

impl<E> Default for EventQueue<E> {
    fn default() -> Self {
        EventQueue {
            events: BTreeMap::new(),
            counter: 0,
        }
    }
}

impl<E> EventQueue<E> {
    pub fn push(&mut self, time: u64, e: E) {
        self.events.insert((time, self.counter), e);
        self.counter += 1;
    }

    pub fn pop(&mut self) -> Option<(u64, E)> {
        self.events.pop_first().map(|((t, _), e)| (t, e))
    }

    pub fn peek_time(&self) -> Option<u64> {
        self.events.keys().next().map(|(t, _)| *t)
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SendOutcome {
    Dropped,
    Scheduled { copies: u8 },
}

pub struct Network<M> {
    cfg: NetConfig,
    rng: SimRng,
    queue: EventQueue<Event<M>>,
    now: u64,
    trace: Option<Vec<String>>,
}

impl<M: Clone + fmt::Display> Network<M> {
    pub fn new(cfg: NetConfig) -> Result<Self, NetError> {
        cfg.validate()?;
        Ok(Network {
            rng: SimRng::new(cfg.seed),
            cfg,
            queue: EventQueue::default(),
            now: 0,
            trace: None,
        })
    }

    pub fn record_trace(&mut self, on: bool) {
        self.trace = on.then(Vec::new);
    }

    pub fn config(&self) -> &NetConfig {
        &self.cfg
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    fn log(&mut self, time: u64, kind: &str, src: NodeId, dst: NodeId, summary: &dyn fmt::Display) {
        if let Some(t) = &mut self.trace {
            t.push(format!("{time} {kind} {src} {dst} {summary}"));
        }
    }

    /// Sends at the current time. Partitions are checked first and consume no
    /// randomness; then one draw decides the drop, one the delay, one the
    /// duplicate, and one the duplicate's delay.
    pub fn send(&mut self, src: NodeId, dst: NodeId, msg: M) -> SendOutcome {
        let now = self.now;
        if self
            .cfg
            .partitions
            .iter()
            .any(|p| p.separates(now, src, dst))
        {
            self.log(now, "cut", src, dst, &msg);
            return SendOutcome::Dropped;
        }
        if self.rng.chance(self.cfg.drop) {
            self.log(now, "drop", src, dst, &msg);
            return SendOutcome::Dropped;
        }
        let (lo, hi) = self.cfg.delay;
        let at = now + self.rng.between(lo, hi);
        self.log(now, "send", src, dst, &msg);
        self.queue.push(
            at,
            Event::Deliver {
                src,
                dst,
                msg: msg.clone(),
            },
        );
        if self.rng.chance(self.cfg.dup) {
            let at2 = now + self.rng.between(lo, hi);
            self.log(now, "dup", src, dst, &msg);
            self.queue.push(at2, Event::Deliver { src, dst, msg });
            return SendOutcome::Scheduled { copies: 2 };
        }
        SendOutcome::Scheduled { copies: 1 }
    }

    pub fn schedule(&mut self, at: u64, event: Event<M>) {
        self.queue.push(at.max(self.now), event);
    }

    /// Removes the next event and advances the clock to its time.
    pub fn pop(&mut self) -> Option<(u64, Event<M>)> {
        let (t, e) = self.queue.pop()?;
        self.now = t;
        match &e {
            Event::Deliver { src, dst, msg } => {
                let (s, d, m) = (*src, *dst, msg.clone());
                self.log(t, "deliver", s, d, &m);
            }
            Event::Timer { node, tag } => {
                let (n, tag) = (*node, *tag);
                self.log(t, "timer", n, n, &tag);
            }
            Event::External { node, tag } => {
                let (n, tag) = (*node, *tag);
                self.log(t, "ext", n, n, &tag);
            }
        }
        Some((t, e))
    }

    pub fn peek_time(&self) -> Option<u64> {
        self.queue.peek_time()
    }

    pub fn pending(&self) -> usize {
        self.queue.len()
    }

    pub fn trace(&self) -> &[String] {
        self.trace.as_deref().unwrap_or(&[])
    }

    pub fn take_trace(&mut self) -> Vec<String> {
        self.trace.as_mut().map(std::mem::take).unwrap_or_default()
    }
}

/// Consumer of network events.
pub trait Handler<M> {
    fn on_event(&mut self, net: &mut Network<M>, event: Event<M>);

    /// True once nothing further is owed (all submitted work finished).
    fn quiescent(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("liveness timeout at {time} ms with {pending} events pending")]
pub struct LivenessTimeout {
    pub time: u64,
    pub pending: usize,
}

/// Processes events until the queue drains, the handler reports quiescence,
/// or the next event would be later than `max_time`. Returns the final time.
pub fn run_until_quiescent<M, H>(
    net: &mut Network<M>,
    handler: &mut H,
    max_time: u64,
) -> Result<u64, LivenessTimeout>
where
    M: Clone + fmt::Display,
    H: Handler<M>,
{
    loop {
        if handler.quiescent() {
            return Ok(net.now());
        }
        match net.peek_time() {
            None => return Ok(net.now()),
            Some(t) if t > max_time => {
                return Err(LivenessTimeout {
                    time: net.now(),
                    pending: net.pending(),
                })
            }
            Some(_) => {
                let (_, e) = net.pop().unwrap();
                handler.on_event(net, e);
            }
        }
    }
}
