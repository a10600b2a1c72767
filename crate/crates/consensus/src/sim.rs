//! A set of replicas wired through the simulated network.

use crate::codec::{ActionKey, SerializedAction};
use crate::net::{Event, NetConfig, NetError, Network, NodeId};
use crate::paxos::{Delivery, Msg, Outputs, Replica, ReplicaConfig};
use crate::storage::{MemStorage, Storage, StorageError};

/// Something a caller of [`SimCluster::step`] must react to.
#[derive(Debug)]
pub enum Notice {
    Applied {
        node: NodeId,
        delivery: Delivery,
    },
    External {
        node: NodeId,
        tag: u64,
    },
    /// Storage failed; the replica has stopped.
    Failed {
        node: NodeId,
        error: StorageError,
    },
}

enum Slot {
    Up(Box<Replica>),
    Down(Box<dyn Storage>),
    /// Transitional while a replica is being moved between states.
    Gone,
}

pub struct SimCluster {
    n: u32,
    rtt: u64,
    net: Network<Msg>,
    nodes: Vec<Slot>,
    /// Bumped on every crash and restart so that old tick timers die out.
    epochs: Vec<u64>,
    sent: Option<Vec<Sent>>,
}

/// A message as it left its sender, whether or not the network kept it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sent {
    pub time: u64,
    pub src: NodeId,
    pub dst: NodeId,
    pub msg: Msg,
}

impl SimCluster {
    /// Starts `storages.len()` replicas, recovering each from its storage.
    pub fn new(
        rtt: u64,
        net: NetConfig,
        storages: Vec<Box<dyn Storage>>,
    ) -> Result<(Self, Vec<Notice>), SimError> {
        let n = storages.len() as u32;
        let mut c = SimCluster {
            n,
            rtt,
            net: Network::new(net)?,
            nodes: storages.into_iter().map(Slot::Down).collect(),
            epochs: vec![0; n as usize],
            sent: None,
        };
        let mut notices = Vec::new();
        for id in 0..n {
            notices.extend(c.restart(id)?);
        }
        Ok((c, notices))
    }

    /// Replicas backed by fresh in-memory logs.
    pub fn in_memory(rtt: u64, net: NetConfig, n: u32) -> Result<(Self, Vec<Notice>), SimError> {
        let storages = (0..n)
            .map(|_| Box::new(MemStorage::new()) as Box<dyn Storage>)
            .collect();
        Self::new(rtt, net, storages)
    }

    pub fn len(&self) -> u32 {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn rtt(&self) -> u64 {
        self.rtt
    }

    pub fn now(&self) -> u64 {
        self.net.now()
    }

    pub fn net(&self) -> &Network<Msg> {
        &self.net
    }

    /// Starts keeping every outgoing message.
    pub fn record_sends(&mut self) {
        self.sent.get_or_insert_with(Vec::new);
    }

    pub fn sends(&self) -> &[Sent] {
        self.sent.as_deref().unwrap_or(&[])
    }

    pub fn net_mut(&mut self) -> &mut Network<Msg> {
        &mut self.net
    }

    pub fn replica(&self, id: NodeId) -> Option<&Replica> {
        match &self.nodes[id as usize] {
            Slot::Up(r) => Some(r),
            _ => None,
        }
    }

    pub fn is_up(&self, id: NodeId) -> bool {
        self.replica(id).is_some()
    }

    fn config(&self, id: NodeId) -> ReplicaConfig {
        ReplicaConfig {
            id,
            n: self.n,
            rtt: self.rtt,
        }
    }

    fn schedule_tick(&mut self, id: NodeId, at: u64) {
        let tag = self.epochs[id as usize];
        self.net.schedule(at, Event::Timer { node: id, tag });
    }

    pub fn schedule_external(&mut self, at: u64, node: NodeId, tag: u64) {
        self.net.schedule(at, Event::External { node, tag });
    }

    /// Stops a replica. Its storage is kept for [`SimCluster::restart`].
    pub fn crash(&mut self, id: NodeId) {
        let slot = std::mem::replace(&mut self.nodes[id as usize], Slot::Gone);
        self.nodes[id as usize] = match slot {
            Slot::Up(r) => Slot::Down(r.into_storage()),
            other => other,
        };
        self.epochs[id as usize] += 1;
    }

    /// Recovers a stopped replica from its storage. Recovered decisions come
    /// back as `Applied` notices starting at slot 0.
    pub fn restart(&mut self, id: NodeId) -> Result<Vec<Notice>, StorageError> {
        let slot = std::mem::replace(&mut self.nodes[id as usize], Slot::Gone);
        let storage = match slot {
            Slot::Down(s) => s,
            other => {
                self.nodes[id as usize] = other;
                return Ok(Vec::new());
            }
        };
        let now = self.now();
        let mut r = Replica::new(self.config(id), storage, now)?;
        self.epochs[id as usize] += 1;
        let out = r.start(now);
        self.nodes[id as usize] = Slot::Up(Box::new(r));
        let tick = self.config(id).tick_interval();
        self.schedule_tick(id, now + tick);
        let mut notices = Vec::new();
        self.absorb(id, out, &mut notices);
        Ok(notices)
    }

    /// Submits an action at the current time. `None` if the replica is down.
    pub fn submit(
        &mut self,
        id: NodeId,
        action: SerializedAction,
    ) -> Option<(ActionKey, Vec<Notice>)> {
        let now = self.now();
        let Slot::Up(r) = &mut self.nodes[id as usize] else {
            return None;
        };
        let mut notices = Vec::new();
        match r.submit(now, action) {
            Ok((key, out)) => {
                self.absorb(id, Ok(out), &mut notices);
                Some((key, notices))
            }
            Err(e) => {
                self.absorb(id, Err(e), &mut notices);
                None
            }
        }
    }

    fn absorb(
        &mut self,
        id: NodeId,
        out: Result<Outputs, StorageError>,
        notices: &mut Vec<Notice>,
    ) {
        match out {
            Ok(out) => {
                for (to, msg) in out.msgs {
                    if let Some(sent) = &mut self.sent {
                        sent.push(Sent {
                            time: self.net.now(),
                            src: id,
                            dst: to,
                            msg: msg.clone(),
                        });
                    }
                    self.net.send(id, to, msg);
                }
                notices.extend(
                    out.deliveries
                        .into_iter()
                        .map(|delivery| Notice::Applied { node: id, delivery }),
                );
            }
            Err(error) => {
                log::warn!("replica {id} stops: {error}");
                self.crash(id);
                notices.push(Notice::Failed { node: id, error });
            }
        }
    }

    /// Processes the next event. `None` once the queue is empty.
    pub fn step(&mut self) -> Option<Vec<Notice>> {
        let (now, event) = self.net.pop()?;
        let mut notices = Vec::new();
        match event {
            Event::Deliver { src, dst, msg } => {
                if let Slot::Up(r) = &mut self.nodes[dst as usize] {
                    let out = r.handle(now, src, msg);
                    self.absorb(dst, out, &mut notices);
                }
            }
            Event::Timer { node, tag } => {
                if tag == self.epochs[node as usize] {
                    if let Slot::Up(r) = &mut self.nodes[node as usize] {
                        let out = r.tick(now);
                        let next = now + r.config().tick_interval();
                        self.absorb(node, out, &mut notices);
                        if self.is_up(node) {
                            self.schedule_tick(node, next);
                        }
                    }
                }
            }
            Event::External { node, tag } => notices.push(Notice::External { node, tag }),
        }
        Some(notices)
    }

    /// Time of the next pending event.
    pub fn peek_time(&self) -> Option<u64> {
        self.net.peek_time()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Storage(#[from] StorageError),
}
