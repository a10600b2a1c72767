//! Tree-walking interpreter for expanded programs.
//!
//! One [`Interp`] is one replica's address space. Prototype names evaluate
//! to per-interpreter singleton objects; `new`/`new:` allocate fresh ones.
//! Everything that leaves the address space (the machine, the clock) goes
//! through a [`Backend`].

use std::collections::BTreeMap;
use std::fmt;
use std::rc::Rc;

use cyrep_consensus::rng::SimRng;
use cyrep_consensus::{Delivery, DeliveryKind, FieldValue, SerializedAction};
use cyrep_core::lang::builtins::{self, ACTION, CONTEXT, TREPLICA};
use cyrep_core::lang::printer::quote;
use cyrep_core::lang::resolve::MethodTarget;
use cyrep_core::lang::{
    AssignTarget, Expr, ExprKind, MethodDecl, Program, Stmt, Synthesized, TypeName, Types,
};
use thiserror::Error;

/// Nesting limit for message sends.
pub const MAX_DEPTH: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ObjId(pub usize);

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Nil,
    /// `Int` and `Long` share this representation.
    Int(i64),
    Str(String),
    Array(Rc<Vec<Value>>),
    Obj(ObjId),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("runtime error: {0}")]
pub struct RuntimeError(pub String);

fn err<T>(msg: impl Into<String>) -> Result<T, RuntimeError> {
    Err(RuntimeError(msg.into()))
}

/// What `runMachine:numberProcess:rtt:path:` was given.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MachineParams {
    pub processes: i64,
    pub rtt: i64,
    pub path: String,
}

/// The world outside one interpreter.
pub trait Backend {
    /// Simulated milliseconds.
    fn now(&self) -> u64;

    fn attach(&mut self, node: u32, params: &MachineParams) -> Result<(), String>;

    /// Submits an action and blocks until it has been decided. Returns the
    /// deliveries this replica must apply, in slot order, ending with the
    /// submitted action.
    fn execute(&mut self, node: u32, action: SerializedAction) -> Result<Vec<Delivery>, String>;
}

/// Applies every action at once, in submission order. Used for plain runs
/// and as the serial reference.
#[derive(Debug, Default)]
pub struct Immediate {
    next_slot: u64,
    pub now: u64,
}

impl Backend for Immediate {
    fn now(&self) -> u64 {
        self.now
    }

    fn attach(&mut self, _node: u32, _params: &MachineParams) -> Result<(), String> {
        Ok(())
    }

    fn execute(&mut self, node: u32, action: SerializedAction) -> Result<Vec<Delivery>, String> {
        let slot = self.next_slot;
        self.next_slot += 1;
        let env = cyrep_consensus::Envelope {
            replica: node,
            seq: slot,
            action,
        };
        Ok(vec![Delivery {
            slot,
            kind: DeliveryKind::Action(env),
        }])
    }
}

#[derive(Debug, Clone)]
struct Object {
    proto: String,
    fields: Vec<(String, Value)>,
    /// `setTreplica:` slot of a context.
    treplica: Option<ObjId>,
    /// Set on a `Treplica` once `runMachine:...` ran.
    machine: Option<Machine>,
}

#[derive(Debug, Clone)]
struct Machine {
    context: ObjId,
}

/// One write to a field of the attached context.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldWrite {
    pub field: String,
    pub inside_execute_on: bool,
}

/// One message send that found a method.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Call {
    pub owner: String,
    pub selector: String,
    pub inside_execute_on: bool,
}

struct Frame {
    this: Value,
    locals: Vec<(String, Value)>,
}

enum Flow {
    Next,
    Return(Value),
}

pub struct Interp<'p> {
    types: Types<'p>,
    node: u32,
    heap: Vec<Object>,
    singletons: BTreeMap<String, ObjId>,
    context: Option<ObjId>,
    output: Vec<String>,
    writes: Vec<FieldWrite>,
    calls: Option<Vec<Call>>,
    applying: usize,
    depth: usize,
    rng: SimRng,
}

impl<'p> Interp<'p> {
    pub fn new(program: &'p Program, node: u32, seed: u64) -> Self {
        Interp {
            types: Types::new(program),
            node,
            heap: Vec::new(),
            singletons: BTreeMap::new(),
            context: None,
            output: Vec::new(),
            writes: Vec::new(),
            calls: None,
            applying: 0,
            depth: 0,
            rng: SimRng::new(seed ^ u64::from(node).wrapping_mul(0x9E37_79B9_7F4A_7C15)),
        }
    }

    pub fn node(&self) -> u32 {
        self.node
    }

    /// Lines printed so far.
    pub fn output(&self) -> &[String] {
        &self.output
    }

    pub fn writes(&self) -> &[FieldWrite] {
        &self.writes
    }

    /// Starts recording every dispatched send.
    pub fn trace_calls(&mut self) {
        self.calls.get_or_insert_with(Vec::new);
    }

    pub fn calls(&self) -> &[Call] {
        self.calls.as_deref().unwrap_or(&[])
    }

    pub fn is_attached(&self) -> bool {
        self.context.is_some()
    }

    pub fn context(&self) -> Option<Value> {
        self.context.map(Value::Obj)
    }

    /// Canonical text of the attached context, e.g. `Info text="text" number=0`.
    pub fn context_dump(&self) -> Option<String> {
        self.context.map(|c| self.dump(&Value::Obj(c)))
    }

    /// `Proto field=value ...` for objects, the display form otherwise.
    pub fn dump(&self, v: &Value) -> String {
        match v {
            Value::Obj(id) => {
                let o = &self.heap[id.0];
                let mut s = o.proto.clone();
                for (name, val) in &o.fields {
                    s.push(' ');
                    s.push_str(name);
                    s.push('=');
                    s.push_str(&self.literal(val));
                }
                s
            }
            other => self.literal(other),
        }
    }

    fn literal(&self, v: &Value) -> String {
        match v {
            Value::Str(s) => quote(s),
            Value::Array(items) => {
                let parts: Vec<String> = items.iter().map(|i| self.literal(i)).collect();
                format!("[{}]", parts.join(", "))
            }
            Value::Obj(id) => format!("<{}>", self.heap[id.0].proto),
            other => self.display(other),
        }
    }

    /// Text used by `println`, `asString` and `++`.
    pub fn display(&self, v: &Value) -> String {
        match v {
            Value::Nil => "nil".into(),
            Value::Int(n) => n.to_string(),
            Value::Str(s) => s.clone(),
            Value::Array(items) => {
                let parts: Vec<String> = items.iter().map(|i| self.display(i)).collect();
                format!("[{}]", parts.join(", "))
            }
            Value::Obj(id) => self.heap[id.0].proto.clone(),
        }
    }

    pub fn proto_of(&self, v: &Value) -> &str {
        match v {
            Value::Nil => builtins::NIL,
            Value::Int(_) => builtins::INT,
            Value::Str(_) => builtins::STRING,
            Value::Array(_) => builtins::ARRAY,
            Value::Obj(id) => &self.heap[id.0].proto,
        }
    }

    fn default_for(t: &TypeName) -> Value {
        match t.name.as_str() {
            builtins::INT | builtins::LONG => Value::Int(0),
            builtins::STRING => Value::Str(String::new()),
            _ => Value::Nil,
        }
    }

    fn allocate(&mut self, proto: &str) -> ObjId {
        let fields = self
            .types
            .all_fields(proto)
            .into_iter()
            .map(|f| (f.name.clone(), Self::default_for(&f.type_name)))
            .collect();
        self.heap.push(Object {
            proto: proto.to_string(),
            fields,
            treplica: None,
            machine: None,
        });
        ObjId(self.heap.len() - 1)
    }

    /// The object a prototype name denotes.
    pub fn singleton(&mut self, proto: &str) -> ObjId {
        if let Some(id) = self.singletons.get(proto) {
            return *id;
        }
        let id = self.allocate(proto);
        self.singletons.insert(proto.to_string(), id);
        id
    }

    fn get_field(&self, obj: ObjId, name: &str) -> Option<&Value> {
        self.heap[obj.0]
            .fields
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v)
    }

    fn set_field(&mut self, obj: ObjId, name: &str, v: Value) -> Result<(), RuntimeError> {
        if Some(obj) == self.context {
            self.writes.push(FieldWrite {
                field: name.to_string(),
                inside_execute_on: self.applying > 0,
            });
        }
        let o = &mut self.heap[obj.0];
        match o.fields.iter_mut().find(|(n, _)| n == name) {
            Some(slot) => {
                slot.1 = v;
                Ok(())
            }
            None => err(format!("`{}` has no field `{name}`", o.proto)),
        }
    }

    /// Sends `Program run:` (with `args`) or `Program run`.
    pub fn run_main(&mut self, args: &[String], b: &mut dyn Backend) -> Result<(), RuntimeError> {
        if self.types.proto("Program").is_none() {
            return err("no `Program` prototype to run");
        }
        let program = Value::Obj(self.singleton("Program"));
        if self.types.lookup_method("Program", "run:").is_some() {
            let argv = Value::Array(Rc::new(args.iter().cloned().map(Value::Str).collect()));
            self.send(program, "run:", vec![argv], b)?;
        } else if self.types.lookup_method("Program", "run").is_some() {
            self.send(program, "run", Vec::new(), b)?;
        } else {
            return err("`Program` has no `run` or `run:` method");
        }
        Ok(())
    }

    /// Sends a message to the attached context, as a script line does.
    pub fn call_context(
        &mut self,
        proto: &str,
        selector: &str,
        args: Vec<Value>,
        b: &mut dyn Backend,
    ) -> Result<Value, RuntimeError> {
        let Some(ctx) = self.context else {
            return err(format!("replica {} has no running machine", self.node));
        };
        if !self.types.is_subprototype(&self.heap[ctx.0].proto, proto) {
            return err(format!(
                "the context is a `{}`, not a `{proto}`",
                self.heap[ctx.0].proto
            ));
        }
        self.send(Value::Obj(ctx), selector, args, b)
    }

    /// Runs `executeOn:` for every action among `ds`, in order.
    pub fn apply(&mut self, ds: Vec<Delivery>, b: &mut dyn Backend) -> Result<(), RuntimeError> {
        let Some(ctx) = self.context else {
            return err(format!("replica {} has no running machine", self.node));
        };
        self.apply_to(ctx, ds, b)
    }

    fn apply_to(
        &mut self,
        ctx: ObjId,
        ds: Vec<Delivery>,
        b: &mut dyn Backend,
    ) -> Result<(), RuntimeError> {
        for d in ds {
            if let DeliveryKind::Action(env) = d.kind {
                let action = self.materialize(&env.action)?;
                self.applying += 1;
                let r = self.send(Value::Obj(action), "executeOn:", vec![Value::Obj(ctx)], b);
                self.applying -= 1;
                r?;
            }
        }
        Ok(())
    }

    /// Field values in declaration order, tagged by declared type.
    pub fn serialize(&self, action: ObjId) -> Result<SerializedAction, RuntimeError> {
        let o = &self.heap[action.0];
        let decls = self.types.all_fields(&o.proto);
        let mut fields = Vec::new();
        for (decl, (_, v)) in decls.iter().zip(&o.fields) {
            let fv = match (decl.type_name.name.as_str(), v) {
                (builtins::STRING, Value::Str(s)) => FieldValue::Str(s.clone()),
                (builtins::INT, Value::Int(n)) => FieldValue::Int(*n),
                (builtins::LONG, Value::Int(n)) => FieldValue::Long(*n),
                (t, _) => {
                    return err(format!(
                        "field `{}` of `{}` cannot be serialized (type `{t}`)",
                        decl.name, o.proto
                    ))
                }
            };
            fields.push(fv);
        }
        Ok(SerializedAction {
            proto: o.proto.clone(),
            fields,
        })
    }

    /// Rebuilds an action object from its encoding without running `init`.
    pub fn materialize(&mut self, a: &SerializedAction) -> Result<ObjId, RuntimeError> {
        if self.types.proto(&a.proto).is_none() || !self.types.is_subprototype(&a.proto, ACTION) {
            return err(format!(
                "decided action names unknown prototype `{}`",
                a.proto
            ));
        }
        let decls = self.types.all_fields(&a.proto);
        if decls.len() != a.fields.len() {
            return err(format!(
                "decided `{}` has {} fields, expected {}",
                a.proto,
                a.fields.len(),
                decls.len()
            ));
        }
        let mut values = Vec::new();
        for (decl, fv) in decls.iter().zip(&a.fields) {
            let v = match (decl.type_name.name.as_str(), fv) {
                (builtins::STRING, FieldValue::Str(s)) => Value::Str(s.clone()),
                (builtins::INT, FieldValue::Int(n)) | (builtins::LONG, FieldValue::Long(n)) => {
                    Value::Int(*n)
                }
                _ => {
                    return err(format!(
                        "decided `{}` has a mistyped field `{}`",
                        a.proto, decl.name
                    ))
                }
            };
            values.push(v);
        }
        let id = self.allocate(&a.proto);
        for (slot, v) in self.heap[id.0].fields.iter_mut().zip(values) {
            slot.1 = v;
        }
        Ok(id)
    }

    pub fn send(
        &mut self,
        recv: Value,
        selector: &str,
        args: Vec<Value>,
        b: &mut dyn Backend,
    ) -> Result<Value, RuntimeError> {
        if self.depth >= MAX_DEPTH {
            return err(format!("call depth exceeds {MAX_DEPTH} at `{selector}`"));
        }
        self.depth += 1;
        let r = self.dispatch(recv, selector, args, b);
        self.depth -= 1;
        r
    }

    fn dispatch(
        &mut self,
        recv: Value,
        selector: &str,
        args: Vec<Value>,
        b: &mut dyn Backend,
    ) -> Result<Value, RuntimeError> {
        let proto = self.proto_of(&recv).to_string();
        if selector == "cast:" {
            let [v] = <[Value; 1]>::try_from(args)
                .map_err(|_| RuntimeError("`cast:` takes one argument".into()))?;
            let actual = self.proto_of(&v);
            if !self.types.is_subprototype(actual, &proto) {
                return err(format!("cannot cast a `{actual}` to `{proto}`"));
            }
            return Ok(v);
        }
        if selector == "new" && proto == TREPLICA {
            return Ok(Value::Obj(self.allocate(TREPLICA)));
        }
        let Some(target) = self.types.lookup_method(&proto, selector) else {
            return err(format!("`{proto}` does not understand `{selector}`"));
        };
        if let Some(calls) = &mut self.calls {
            calls.push(Call {
                owner: target.owner().to_string(),
                selector: selector.to_string(),
                inside_execute_on: self.applying > 0,
            });
        }
        if target.param_count() != args.len() {
            return err(format!(
                "`{proto} {selector}` expects {} arguments, got {}",
                target.param_count(),
                args.len()
            ));
        }
        match target {
            MethodTarget::DefaultNew { owner } => Ok(Value::Obj(self.allocate(owner))),
            MethodTarget::User { owner, method } => match &method.synthesized {
                Some(Synthesized::Constructor { init }) => {
                    let obj = Value::Obj(self.allocate(owner));
                    let init_m = self
                        .types
                        .lookup_method(owner, init)
                        .and_then(|t| match t {
                            MethodTarget::User { method, .. } => Some(method),
                            _ => None,
                        })
                        .ok_or_else(|| RuntimeError(format!("`{owner}` has no `{init}`")))?;
                    self.invoke(init_m, obj.clone(), args, b)?;
                    Ok(obj)
                }
                None => self.invoke(method, recv, args, b),
            },
            MethodTarget::Builtin { owner, .. } => self.builtin(owner, selector, recv, args, b),
        }
    }

    fn invoke(
        &mut self,
        m: &'p MethodDecl,
        this: Value,
        args: Vec<Value>,
        b: &mut dyn Backend,
    ) -> Result<Value, RuntimeError> {
        let mut frame = Frame {
            this,
            locals: m.all_params().map(|p| p.name.clone()).zip(args).collect(),
        };
        for stmt in &m.body {
            if let Flow::Return(v) = self.exec(&mut frame, stmt, b)? {
                return Ok(v);
            }
        }
        Ok(Value::Nil)
    }

    fn this_obj(frame: &Frame) -> Result<ObjId, RuntimeError> {
        match frame.this {
            Value::Obj(id) => Ok(id),
            _ => err("field access on a non-object receiver"),
        }
    }

    fn exec(
        &mut self,
        frame: &mut Frame,
        stmt: &'p Stmt,
        b: &mut dyn Backend,
    ) -> Result<Flow, RuntimeError> {
        match stmt {
            Stmt::VarDecl(v) => {
                let value = match &v.init {
                    Some(e) => self.eval(frame, e, b)?,
                    None => v.type_name.as_ref().map_or(Value::Nil, Self::default_for),
                };
                frame.locals.push((v.name.clone(), value));
            }
            Stmt::Assign { target, value, .. } => {
                let value = self.eval(frame, value, b)?;
                match target {
                    AssignTarget::Name(n) => {
                        if let Some(slot) = frame.locals.iter_mut().rev().find(|(l, _)| l == n) {
                            slot.1 = value;
                        } else {
                            let obj = Self::this_obj(frame)?;
                            self.set_field(obj, n, value)?;
                        }
                    }
                    AssignTarget::SelfField(n) => {
                        let obj = Self::this_obj(frame)?;
                        self.set_field(obj, n, value)?;
                    }
                }
            }
            Stmt::Return(e, _) => {
                let v = match e {
                    Some(e) => self.eval(frame, e, b)?,
                    None => Value::Nil,
                };
                return Ok(Flow::Return(v));
            }
            Stmt::Expr(e) => {
                self.eval(frame, e, b)?;
            }
        }
        Ok(Flow::Next)
    }

    fn eval(
        &mut self,
        frame: &mut Frame,
        e: &'p Expr,
        b: &mut dyn Backend,
    ) -> Result<Value, RuntimeError> {
        match &e.kind {
            ExprKind::Int(n) => Ok(Value::Int(*n)),
            ExprKind::Str(s) => Ok(Value::Str(s.clone())),
            ExprKind::SelfRef => Ok(frame.this.clone()),
            ExprKind::SelfField(f) => {
                let obj = Self::this_obj(frame)?;
                self.get_field(obj, f)
                    .cloned()
                    .ok_or_else(|| RuntimeError(format!("no field `{f}`")))
            }
            ExprKind::Ident(name) => {
                if let Some((_, v)) = frame.locals.iter().rev().find(|(l, _)| l == name) {
                    return Ok(v.clone());
                }
                if let Value::Obj(id) = frame.this {
                    if let Some(v) = self.get_field(id, name) {
                        return Ok(v.clone());
                    }
                }
                if self.types.is_prototype_name(name) {
                    return Ok(Value::Obj(self.singleton(name)));
                }
                let this = frame.this.clone();
                self.send(this, name, Vec::new(), b)
            }
            ExprKind::Concat(l, r) => {
                let l = self.eval(frame, l, b)?;
                let r = self.eval(frame, r, b)?;
                Ok(Value::Str(self.display(&l) + &self.display(&r)))
            }
            ExprKind::Index(base, idx) => {
                let base = self.eval(frame, base, b)?;
                let idx = self.eval(frame, idx, b)?;
                match (&base, &idx) {
                    (Value::Array(items), Value::Int(i)) => usize::try_from(*i)
                        .ok()
                        .and_then(|i| items.get(i).cloned())
                        .ok_or_else(|| {
                            RuntimeError(format!(
                                "index {i} out of bounds for length {}",
                                items.len()
                            ))
                        }),
                    _ => err(format!("cannot index a `{}`", self.proto_of(&base))),
                }
            }
            ExprKind::Send {
                receiver,
                selector,
                args,
            } => {
                let recv = self.eval(frame, receiver, b)?;
                let mut vals = Vec::new();
                for a in args.iter().flatten() {
                    vals.push(self.eval(frame, a, b)?);
                }
                self.send(recv, &selector.text, vals, b)
            }
        }
    }

    fn int_arg(v: &Value, what: &str) -> Result<i64, RuntimeError> {
        match v {
            Value::Int(n) => Ok(*n),
            _ => err(format!("{what} must be an Int")),
        }
    }

    fn builtin(
        &mut self,
        owner: &str,
        selector: &str,
        recv: Value,
        args: Vec<Value>,
        b: &mut dyn Backend,
    ) -> Result<Value, RuntimeError> {
        match (owner, selector) {
            (builtins::ANY, "println") => {
                let line = self.display(&recv);
                self.output.push(line);
                Ok(Value::Nil)
            }
            (builtins::ANY, "asString") => Ok(Value::Str(self.display(&recv))),
            (builtins::INT | builtins::LONG, op) => {
                let l = Self::int_arg(&recv, "receiver")?;
                let r = Self::int_arg(&args[0], "operand")?;
                Ok(Value::Int(match op {
                    "+" => l.wrapping_add(r),
                    "-" => l.wrapping_sub(r),
                    _ => l.wrapping_mul(r),
                }))
            }
            (builtins::STRING, "size") => match &recv {
                Value::Str(s) => Ok(Value::Int(s.chars().count() as i64)),
                _ => unreachable!(),
            },
            (builtins::ARRAY, "size") => match &recv {
                Value::Array(a) => Ok(Value::Int(a.len() as i64)),
                _ => unreachable!(),
            },
            (CONTEXT, "getTreplica") => {
                let Value::Obj(ctx) = recv else {
                    unreachable!()
                };
                match self.heap[ctx.0].treplica {
                    Some(t) => Ok(Value::Obj(t)),
                    None => err(format!("`{}` has no Treplica set", self.heap[ctx.0].proto)),
                }
            }
            (CONTEXT, "setTreplica:") => {
                let Value::Obj(ctx) = recv else {
                    unreachable!()
                };
                match &args[0] {
                    Value::Obj(t) if self.heap[t.0].proto == TREPLICA => {
                        self.heap[ctx.0].treplica = Some(*t);
                        Ok(Value::Nil)
                    }
                    other => err(format!(
                        "`setTreplica:` needs a Treplica, got a `{}`",
                        self.proto_of(other)
                    )),
                }
            }
            (ACTION, "executeOn:") => err(format!(
                "`{}` does not override `executeOn:`",
                self.proto_of(&recv)
            )),
            (TREPLICA, builtins::RUN_MACHINE) => {
                let Value::Obj(t) = recv else { unreachable!() };
                let ctx = match &args[0] {
                    Value::Obj(c) if self.types.is_subprototype(&self.heap[c.0].proto, CONTEXT) => {
                        *c
                    }
                    other => {
                        return err(format!(
                            "`runMachine:` needs a Context, got a `{}`",
                            self.proto_of(other)
                        ))
                    }
                };
                let processes = Self::int_arg(&args[1], "numberProcess:")?;
                let rtt = Self::int_arg(&args[2], "rtt:")?;
                let path = match &args[3] {
                    Value::Str(s) if !s.is_empty() => s.clone(),
                    _ => return err("`path:` must be a non-empty String"),
                };
                if processes < 1 {
                    return err(format!("numberProcess: {processes} is not positive"));
                }
                if self.heap[t.0].machine.is_some() {
                    return err("this Treplica already runs a machine");
                }
                b.attach(
                    self.node,
                    &MachineParams {
                        processes,
                        rtt,
                        path,
                    },
                )
                .map_err(RuntimeError)?;
                self.heap[t.0].machine = Some(Machine { context: ctx });
                self.context = Some(ctx);
                Ok(Value::Nil)
            }
            (TREPLICA, "execute:") => {
                let Value::Obj(t) = recv else { unreachable!() };
                if self.applying > 0 {
                    return err("`execute:` called while applying an action");
                }
                let Some(Machine { context }) = self.heap[t.0].machine.clone() else {
                    return err("`execute:` before `runMachine:numberProcess:rtt:path:`");
                };
                let action = match &args[0] {
                    Value::Obj(a) if self.types.is_subprototype(&self.heap[a.0].proto, ACTION) => {
                        *a
                    }
                    other => {
                        return err(format!(
                            "`execute:` needs an Action, got a `{}`",
                            self.proto_of(other)
                        ))
                    }
                };
                let bytes = self.serialize(action)?;
                let ds = b.execute(self.node, bytes).map_err(RuntimeError)?;
                self.apply_to(context, ds, b)?;
                Ok(Value::Nil)
            }
            (builtins::SYSTEM, "currentTimeMillis") => Ok(Value::Int(b.now() as i64)),
            (builtins::RANDOM, "random") => Ok(Value::Int((self.rng.next_u64() >> 33) as i64)),
            _ => err(format!("`{owner}` does not implement `{selector}`")),
        }
    }
}

impl fmt::Debug for Interp<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Interp")
            .field("node", &self.node)
            .field("objects", &self.heap.len())
            .field("attached", &self.context.is_some())
            .finish_non_exhaustive()
    }
}
