//! Several interpreters, one per replica, ordered by consensus.
//!
//! Nothing runs in parallel. A replica blocked in `execute:` keeps stepping
//! the shared simulation until its own action comes back decided. While it
//! waits, other replicas may start their program or a scripted call, and
//! those may block in turn; decisions for a replica that is busy further up
//! the stack are queued until it can take them.

use std::collections::VecDeque;
use std::fmt;
use std::path::PathBuf;

use cyrep_consensus::{
    Delivery, DeliveryKind, Envelope, FileStorage, MemStorage, NetConfig, Notice, SerializedAction,
    SimCluster, SimError, Storage, StorageError,
};
use cyrep_core::lang::builtins::RUN_MACHINE;
use cyrep_core::lang::{Expr, ExprKind, Program, Stmt};
use thiserror::Error;

use crate::interp::{Backend, Interp, MachineParams, RuntimeError, Value};
use crate::script::ScriptCall;

const START: u64 = 1 << 62;

#[derive(Debug, Clone)]
pub struct ClusterConfig {
    pub replicas: u32,
    pub rtt: u64,
    pub net: NetConfig,
    /// Logs go to `<dir>/replica-<id>.log`; in memory when unset.
    pub log_dir: Option<PathBuf>,
    pub trace: bool,
    /// Simulated time allowed past the last scheduled call.
    pub budget: u64,
}

impl ClusterConfig {
    pub fn new(replicas: u32, rtt: u64, seed: u64) -> Self {
        ClusterConfig {
            replicas,
            rtt,
            net: NetConfig::for_rtt(rtt, seed),
            log_dir: None,
            trace: false,
            budget: 1000 * rtt.max(1),
        }
    }
}

/// `numberProcess:` and `rtt:` of the first `runMachine:...` send written
/// with literal arguments, as `@treplicaInit` generates it.
pub fn machine_literals(program: &Program) -> Option<(u32, u64)> {
    fn in_expr(e: &Expr) -> Option<(u32, u64)> {
        match &e.kind {
            ExprKind::Send {
                receiver,
                selector,
                args,
            } => {
                if selector.text == RUN_MACHINE {
                    if let ([_], [n], [r]) = (&args[0][..], &args[1][..], &args[2][..]) {
                        if let (ExprKind::Int(n), ExprKind::Int(r)) = (&n.kind, &r.kind) {
                            if let (Ok(n), Ok(r)) = (u32::try_from(*n), u64::try_from(*r)) {
                                return Some((n, r));
                            }
                        }
                    }
                }
                in_expr(receiver).or_else(|| args.iter().flatten().find_map(in_expr))
            }
            ExprKind::Concat(l, r) | ExprKind::Index(l, r) => in_expr(l).or_else(|| in_expr(r)),
            _ => None,
        }
    }
    program
        .prototypes()
        .flat_map(|p| p.methods())
        .flat_map(|m| &m.body)
        .find_map(|s| match s {
            Stmt::VarDecl(v) => v.init.as_ref().and_then(in_expr),
            Stmt::Assign { value, .. } => in_expr(value),
            Stmt::Return(e, _) => e.as_ref().and_then(in_expr),
            Stmt::Expr(e) => in_expr(e),
        })
}

#[derive(Debug, Error)]
pub enum ClusterError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Storage(#[from] StorageError),
    #[error("script line for replica {replica} but only {replicas} replicas run")]
    NoSuchReplica { replica: u32, replicas: u32 },
}

/// Final state of a replicated run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Report {
    /// Context dump per replica; `None` for a replica that is down or never
    /// attached a machine.
    pub dumps: Vec<Option<String>>,
    pub outputs: Vec<Vec<String>>,
    pub errors: Vec<String>,
    pub timed_out: bool,
    pub end_time: u64,
    pub trace: Vec<String>,
}

impl Report {
    /// Every replica has a context and all dumps agree, with no errors and
    /// no timeout.
    pub fn converged(&self) -> bool {
        !self.timed_out
            && self.errors.is_empty()
            && self.dumps.iter().all(Option::is_some)
            && self.dumps.windows(2).all(|w| w[0] == w[1])
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, d) in self.dumps.iter().enumerate() {
            writeln!(f, "replica {i}: {}", d.as_deref().unwrap_or("<no context>"))?;
        }
        if self.timed_out {
            writeln!(f, "liveness timeout at {} ms", self.end_time)?;
        }
        f.write_str(if self.converged() {
            "CONVERGED"
        } else {
            "DIVERGED"
        })
    }
}

pub struct Cluster<'p> {
    program: &'p Program,
    cfg: ClusterConfig,
    sim: SimCluster,
    interps: Vec<Option<Interp<'p>>>,
    up: Vec<bool>,
    busy: Vec<bool>,
    /// `Program run` has returned on this incarnation.
    ran: Vec<bool>,
    crash_requested: Vec<bool>,
    pending: Vec<VecDeque<Delivery>>,
    queued: Vec<VecDeque<usize>>,
    script: Vec<ScriptCall>,
    fired: usize,
    applied: Vec<Vec<(u64, Envelope)>>,
    machines: Vec<Option<MachineParams>>,
    errors: Vec<String>,
    timed_out: bool,
    cap: u64,
}

impl<'p> Cluster<'p> {
    pub fn new(program: &'p Program, cfg: ClusterConfig) -> Result<Self, ClusterError> {
        let n = cfg.replicas;
        let storages = (0..n)
            .map(|id| -> Result<Box<dyn Storage>, StorageError> {
                Ok(match &cfg.log_dir {
                    Some(dir) => Box::new(FileStorage::open(dir, id)?),
                    None => Box::new(MemStorage::new()),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let (mut sim, notices) = SimCluster::new(cfg.rtt, cfg.net.clone(), storages)?;
        sim.net_mut().record_trace(cfg.trace);
        let un = n as usize;
        let mut c = Cluster {
            program,
            sim,
            interps: (0..n)
                .map(|id| Some(Interp::new(program, id, cfg.net.seed)))
                .collect(),
            up: vec![true; un],
            busy: vec![false; un],
            ran: vec![false; un],
            crash_requested: vec![false; un],
            pending: vec![VecDeque::new(); un],
            queued: vec![VecDeque::new(); un],
            script: Vec::new(),
            fired: 0,
            applied: vec![Vec::new(); un],
            machines: vec![None; un],
            errors: Vec::new(),
            timed_out: false,
            cap: cfg.budget,
            cfg,
        };
        for id in 0..n {
            c.sim.schedule_external(0, id, START | u64::from(id));
        }
        c.dispatch(notices);
        Ok(c)
    }

    pub fn config(&self) -> &ClusterConfig {
        &self.cfg
    }

    pub fn now(&self) -> u64 {
        self.sim.now()
    }

    pub fn sim(&self) -> &SimCluster {
        &self.sim
    }

    pub fn interp(&self, node: u32) -> Option<&Interp<'p>> {
        self.interps[node as usize].as_ref()
    }

    pub fn is_up(&self, node: u32) -> bool {
        self.up[node as usize]
    }

    /// Actions applied by this incarnation of the replica, in slot order.
    pub fn applied(&self, node: u32) -> &[(u64, Envelope)] {
        &self.applied[node as usize]
    }

    pub fn machine(&self, node: u32) -> Option<&MachineParams> {
        self.machines[node as usize].as_ref()
    }

    pub fn errors(&self) -> &[String] {
        &self.errors
    }

    pub fn schedule(&mut self, calls: Vec<ScriptCall>) -> Result<(), ClusterError> {
        for call in calls {
            if call.replica >= self.cfg.replicas {
                return Err(ClusterError::NoSuchReplica {
                    replica: call.replica,
                    replicas: self.cfg.replicas,
                });
            }
            self.cap = self.cap.max(call.time.saturating_add(self.cfg.budget));
            self.sim
                .schedule_external(call.time, call.replica, self.script.len() as u64);
            self.script.push(call);
        }
        Ok(())
    }

    /// Stops a replica, losing its interpreter state but keeping its log. A
    /// replica in the middle of a call stops once the call returns.
    pub fn crash(&mut self, node: u32) {
        if self.busy[node as usize] {
            self.crash_requested[node as usize] = true;
        } else {
            self.stop(node);
        }
    }

    fn stop(&mut self, node: u32) {
        let i = node as usize;
        if self.up[i] {
            self.sim.crash(node);
        }
        self.up[i] = false;
        self.crash_requested[i] = false;
        self.interps[i] = None;
        self.pending[i].clear();
        self.queued[i].clear();
        self.ran[i] = false;
        self.machines[i] = None;
    }

    /// Brings a stopped replica back: recover the log, run the program again,
    /// then apply the recovered decisions.
    pub fn restart(&mut self, node: u32) -> Result<(), StorageError> {
        let i = node as usize;
        if self.up[i] {
            return Ok(());
        }
        let notices = self.sim.restart(node)?;
        self.up[i] = true;
        self.applied[i].clear();
        self.interps[i] = Some(Interp::new(self.program, node, self.cfg.net.seed));
        let now = self.now();
        self.sim
            .schedule_external(now, node, START | u64::from(node));
        self.dispatch(notices);
        Ok(())
    }

    /// Processes one simulation event. False once nothing is left before the
    /// time cap.
    pub fn step(&mut self) -> bool {
        match self.sim.peek_time() {
            Some(t) if t <= self.cap => {}
            Some(_) => {
                self.timed_out = true;
                return false;
            }
            None => return false,
        }
        let notices = self.sim.step().unwrap_or_default();
        self.dispatch(notices);
        true
    }

    /// Nothing is owed: every replica that is up has run its program, taken
    /// every scripted call and decision, and agrees on the applied prefix.
    pub fn quiescent(&self) -> bool {
        if self.fired < self.script.len() {
            return false;
        }
        let mut frontier = None;
        for i in 0..self.up.len() {
            if !self.up[i] {
                continue;
            }
            if self.busy[i]
                || !self.ran[i]
                || !self.pending[i].is_empty()
                || !self.queued[i].is_empty()
            {
                return false;
            }
            let Some(r) = self.sim.replica(i as u32) else {
                return false;
            };
            if r.pending_submissions() > 0 {
                return false;
            }
            match frontier {
                None => frontier = Some(r.applied_upto()),
                Some(f) if f != r.applied_upto() => return false,
                _ => {}
            }
        }
        true
    }

    /// Runs until quiescent or out of time.
    pub fn run(&mut self) -> Report {
        while !self.quiescent() {
            if !self.step() {
                if !self.quiescent() {
                    self.timed_out = true;
                }
                break;
            }
        }
        self.report()
    }

    pub fn report(&mut self) -> Report {
        let n = self.cfg.replicas;
        Report {
            dumps: (0..n)
                .map(|i| self.interp(i).and_then(Interp::context_dump))
                .collect(),
            outputs: (0..n)
                .map(|i| {
                    self.interp(i)
                        .map(|it| it.output().to_vec())
                        .unwrap_or_default()
                })
                .collect(),
            errors: self.errors.clone(),
            timed_out: self.timed_out,
            end_time: self.now(),
            trace: self.sim.net_mut().take_trace(),
        }
    }

    fn dispatch(&mut self, notices: Vec<Notice>) {
        for n in notices {
            match n {
                Notice::Applied { node, delivery } => {
                    if self.up[node as usize] {
                        self.pending[node as usize].push_back(delivery);
                        self.settle(node);
                    }
                }
                Notice::External { node, tag } if tag & START != 0 => self.start(node),
                Notice::External { node, tag } => {
                    self.fired += 1;
                    if self.up[node as usize] {
                        self.queued[node as usize].push_back(tag as usize);
                        self.settle(node);
                    } else {
                        log::info!(
                            "replica {node} is down; dropping `{}`",
                            self.script[tag as usize]
                        );
                    }
                }
                Notice::Failed { node, error } => {
                    self.errors.push(format!("replica {node} stopped: {error}"));
                    let i = node as usize;
                    self.up[i] = false;
                    if !self.busy[i] {
                        self.stop(node);
                    }
                }
            }
        }
    }

    /// Runs `f` on the replica's interpreter with the cluster as backend.
    fn with_interp<R>(
        &mut self,
        node: u32,
        f: impl FnOnce(&mut Interp<'p>, &mut Self) -> R,
    ) -> Option<R> {
        let i = node as usize;
        let mut it = self.interps[i].take()?;
        self.busy[i] = true;
        let r = f(&mut it, self);
        self.busy[i] = false;
        if self.up[i] {
            self.interps[i] = Some(it);
        } else {
            self.stop(node);
        }
        Some(r)
    }

    fn note(&mut self, node: u32, r: Result<(), RuntimeError>) {
        if let Err(e) = r {
            log::warn!("replica {node}: {e}");
            self.errors.push(format!("replica {node}: {e}"));
        }
    }

    fn start(&mut self, node: u32) {
        if !self.up[node as usize] || self.busy[node as usize] {
            return;
        }
        let args = vec!["cyrep".to_string(), node.to_string()];
        if let Some(r) = self.with_interp(node, |it, c| it.run_main(&args, c)) {
            self.note(node, r);
            if self.up[node as usize] {
                self.ran[node as usize] = true;
            }
        }
        self.settle(node);
    }

    /// Feeds an idle replica its queued decisions and calls.
    fn settle(&mut self, node: u32) {
        let i = node as usize;
        loop {
            if !self.up[i] || self.busy[i] {
                return;
            }
            if self.crash_requested[i] {
                self.stop(node);
                return;
            }
            let attached = self.interps[i].as_ref().is_some_and(Interp::is_attached);
            if attached && !self.pending[i].is_empty() {
                let ds: Vec<Delivery> = self.pending[i].drain(..).collect();
                self.record(node, &ds);
                if let Some(r) = self.with_interp(node, |it, c| it.apply(ds, c)) {
                    self.note(node, r);
                }
            } else if self.ran[i] && !self.queued[i].is_empty() {
                let idx = self.queued[i].pop_front().unwrap();
                let call = self.script[idx].clone();
                let args: Vec<Value> = call.args.iter().map(|a| a.to_value()).collect();
                let r = self.with_interp(node, |it, c| {
                    it.call_context(&call.proto, &call.selector, args, c)
                        .map(|_| ())
                });
                if let Some(r) = r {
                    self.note(
                        node,
                        r.map_err(|e| RuntimeError(format!("`{call}`: {}", e.0))),
                    );
                }
            } else {
                return;
            }
        }
    }

    fn record(&mut self, node: u32, ds: &[Delivery]) {
        for d in ds {
            if let DeliveryKind::Action(e) = &d.kind {
                self.applied[node as usize].push((d.slot, e.clone()));
            }
        }
    }
}

impl Backend for Cluster<'_> {
    fn now(&self) -> u64 {
        self.sim.now()
    }

    fn attach(&mut self, node: u32, params: &MachineParams) -> Result<(), String> {
        if params.processes != i64::from(self.cfg.replicas) {
            log::info!(
                "program asks for {} processes; the simulation runs {}",
                params.processes,
                self.cfg.replicas
            );
        }
        self.machines[node as usize] = Some(params.clone());
        Ok(())
    }

    fn execute(&mut self, node: u32, action: SerializedAction) -> Result<Vec<Delivery>, String> {
        let i = node as usize;
        let Some((key, notices)) = self.sim.submit(node, action) else {
            return Err(format!("replica {node} is down"));
        };
        self.dispatch(notices);
        loop {
            if !self.up[i] {
                return Err(format!(
                    "replica {node} stopped while waiting for a decision"
                ));
            }
            let mine = self.pending[i].iter().position(|d| match &d.kind {
                DeliveryKind::Action(e) | DeliveryKind::Duplicate(e) => e.key() == key,
                DeliveryKind::Noop => false,
            });
            if let Some(pos) = mine {
                let ds: Vec<Delivery> = self.pending[i].drain(..=pos).collect();
                self.record(node, &ds);
                return Ok(ds);
            }
            if !self.step() {
                self.timed_out = true;
                return Err(format!(
                    "no decision by {} ms (liveness timeout)",
                    self.now()
                ));
            }
        }
    }
}

/// Reference result: run the program once with no machine behind it, then
/// apply `actions` to the context one after the other.
pub fn replay(program: &Program, actions: &[SerializedAction]) -> Result<String, RuntimeError> {
    struct Inert;
    impl Backend for Inert {
        fn now(&self) -> u64 {
            0
        }
        fn attach(&mut self, _: u32, _: &MachineParams) -> Result<(), String> {
            Ok(())
        }
        fn execute(&mut self, _: u32, _: SerializedAction) -> Result<Vec<Delivery>, String> {
            Ok(Vec::new())
        }
    }
    let mut it = Interp::new(program, 0, 0);
    it.run_main(&["cyrep".into(), "0".into()], &mut Inert)?;
    let ds = actions
        .iter()
        .enumerate()
        .map(|(slot, a)| Delivery {
            slot: slot as u64,
            kind: DeliveryKind::Action(Envelope {
                replica: 0,
                seq: slot as u64,
                action: a.clone(),
            }),
        })
        .collect();
    it.apply(ds, &mut Inert)?;
    it.context_dump()
        .ok_or_else(|| RuntimeError("the program never started a machine".into()))
}
