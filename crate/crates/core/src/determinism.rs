//! Reachability of non-deterministic operations from action methods.
//!
//! The call graph is conservative: a send through static type `T` reaches the
//! method `T` resolves to and every override declared below `T`; a send whose
//! receiver type is unknown reaches every method with that selector.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::path::Path;

use crate::diag::Diagnostic;
use crate::lang::ast::*;
use crate::lang::builtins;
use crate::lang::resolve::{IdentKind, MethodTarget, Scope, Types};

/// A `(prototype, selector)` pair.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MethodRef {
    pub proto: String,
    pub selector: String,
}

impl MethodRef {
    pub fn new(proto: impl Into<String>, selector: impl Into<String>) -> Self {
        MethodRef {
            proto: proto.into(),
            selector: selector.into(),
        }
    }
}

impl fmt::Display for MethodRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.proto, self.selector)
    }
}

/// Operations the programmer declared non-deterministic.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NonDetRegistry {
    pub entries: BTreeSet<MethodRef>,
}

impl NonDetRegistry {
    /// The built-in clock and random number source.
    pub fn defaults() -> Self {
        NonDetRegistry {
            entries: builtins::DEFAULT_NONDET
                .iter()
                .map(|(p, s)| MethodRef::new(*p, *s))
                .collect(),
        }
    }

    /// Parses `Prototype selector` lines; `#` starts a comment.
    pub fn parse(text: &str, origin: &str) -> Result<Self, Diagnostic> {
        let mut entries = BTreeSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            match parts.as_slice() {
                [proto, sel] => {
                    entries.insert(MethodRef::new(*proto, *sel));
                }
                _ => {
                    return Err(Diagnostic::error(format!(
                        "malformed registry entry `{line}` (expected `Prototype selector`)"
                    ))
                    .at(origin, crate::Pos::new(i as u32 + 1, 1)))
                }
            }
        }
        Ok(NonDetRegistry { entries })
    }

    pub fn load(path: &Path) -> Result<Self, Diagnostic> {
        let origin = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|e| {
            Diagnostic::error(format!("cannot read registry: {e}")).with_origin(&origin)
        })?;
        Self::parse(&text, &origin)
    }

    pub fn merge(&mut self, other: &NonDetRegistry) {
        self.entries.extend(other.entries.iter().cloned());
    }

    /// The registry entry `node` falls under: itself, or an override of a
    /// registered method declared higher up.
    pub fn matching<'r>(&'r self, types: &Types<'_>, node: &MethodRef) -> Vec<&'r MethodRef> {
        self.entries
            .iter()
            .filter(|e| e.selector == node.selector && types.is_subprototype(&node.proto, &e.proto))
            .collect()
    }
}

/// Static call edges between methods of the frozen program.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CallGraph {
    pub edges: BTreeMap<MethodRef, BTreeSet<MethodRef>>,
}

impl CallGraph {
    pub fn callees(&self, node: &MethodRef) -> impl Iterator<Item = &MethodRef> {
        self.edges.get(node).into_iter().flatten()
    }

    fn add(&mut self, from: &MethodRef, to: MethodRef) {
        self.edges.entry(from.clone()).or_default().insert(to);
    }

    pub fn build(types: &Types<'_>) -> CallGraph {
        let mut g = CallGraph::default();
        let execute = MethodRef::new(builtins::TREPLICA, "execute:");
        for proto in types.user_prototypes() {
            for m in proto.methods() {
                let node = MethodRef::new(&proto.name, &m.selector.text);
                if let Some(Synthesized::Constructor { init }) = &m.synthesized {
                    g.add(&node, MethodRef::new(&proto.name, init));
                    continue;
                }
                let mut w = Walker {
                    types,
                    proto: &proto.name,
                    scope: Scope::for_method(m),
                    from: node,
                    graph: &mut g,
                };
                w.stmts(&m.body);
                if m.selector.text == "executeOn:"
                    && types.is_subprototype(&proto.name, builtins::ACTION)
                {
                    g.add(&execute, MethodRef::new(&proto.name, "executeOn:"));
                }
            }
        }
        g
    }
}

struct Walker<'a, 't> {
    types: &'a Types<'t>,
    proto: &'a str,
    scope: Scope,
    from: MethodRef,
    graph: &'a mut CallGraph,
}

impl Walker<'_, '_> {
    fn stmts(&mut self, body: &[Stmt]) {
        for s in body {
            match s {
                Stmt::VarDecl(v) => {
                    if let Some(e) = &v.init {
                        self.expr(e);
                    }
                    let ty = v.type_name.clone().or_else(|| {
                        v.init
                            .as_ref()
                            .and_then(|e| self.types.expr_type(&self.scope, self.proto, e))
                    });
                    self.scope.declare(&v.name, ty);
                }
                Stmt::Assign { value, .. } => self.expr(value),
                Stmt::Return(Some(e), _) | Stmt::Expr(e) => self.expr(e),
                Stmt::Return(None, _) => {}
            }
        }
    }

    fn expr(&mut self, e: &Expr) {
        match &e.kind {
            ExprKind::Ident(name) => {
                if let Some(IdentKind::SelfUnary) =
                    self.types.classify_ident(&self.scope, self.proto, name)
                {
                    let t = self.proto.to_string();
                    self.send(Some(&t), name);
                }
            }
            ExprKind::Concat(l, r) | ExprKind::Index(l, r) => {
                self.expr(l);
                self.expr(r);
            }
            ExprKind::Send {
                receiver,
                selector,
                args,
            } => {
                self.expr(receiver);
                for a in args.iter().flatten() {
                    self.expr(a);
                }
                let rt = self
                    .types
                    .expr_type(&self.scope, self.proto, receiver)
                    .map(|t| t.name);
                self.send(rt.as_ref(), &selector.text);
            }
            ExprKind::SelfRef | ExprKind::SelfField(_) | ExprKind::Str(_) | ExprKind::Int(_) => {}
        }
    }

    fn send(&mut self, static_type: Option<&String>, selector: &str) {
        let target = static_type.and_then(|t| {
            if t == builtins::TREPLICA && selector == "new" {
                return Some(MethodRef::new(builtins::TREPLICA, "new"));
            }
            self.types.lookup_method(t, selector).map(|m| match m {
                MethodTarget::User { owner, .. } | MethodTarget::DefaultNew { owner } => {
                    MethodRef::new(owner, selector)
                }
                MethodTarget::Builtin { owner, .. } => MethodRef::new(owner, selector),
            })
        });
        match (static_type, target) {
            (Some(t), Some(target)) => {
                self.graph.add(&self.from, target);
                if selector != "new" && selector != "new:" {
                    for sub in self.types.subprototypes(t) {
                        let declares = self
                            .types
                            .proto(sub)
                            .is_some_and(|p| p.method(selector).is_some());
                        if declares {
                            self.graph.add(&self.from, MethodRef::new(sub, selector));
                        }
                    }
                }
            }
            _ => {
                // unknown receiver: any method with this selector
                for p in self.types.user_prototypes() {
                    if p.method(selector).is_some() {
                        self.graph
                            .add(&self.from, MethodRef::new(&p.name, selector));
                    }
                }
                for b in builtins::METHODS.iter().filter(|b| b.selector == selector) {
                    self.graph
                        .add(&self.from, MethodRef::new(b.proto, selector));
                }
            }
        }
    }
}

/// A registered operation reachable from an action method.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Finding {
    pub entry: MethodRef,
    pub violation: MethodRef,
    /// From `entry` to a node matching `violation`, following graph edges.
    pub path: Vec<MethodRef>,
}

impl Finding {
    pub fn render_path(&self) -> String {
        let parts: Vec<String> = self.path.iter().map(ToString::to_string).collect();
        parts.join(" -> ")
    }

    pub fn to_diagnostic(&self) -> Diagnostic {
        let mut d = Diagnostic::error(format!(
            "non-deterministic call reachable from {}: {}",
            self.entry,
            self.render_path()
        ));
        d.call_path = self.path.iter().map(ToString::to_string).collect();
        d
    }
}

/// Breadth-first shortest paths from `entry` to every reachable node.
fn shortest_paths(graph: &CallGraph, entry: &MethodRef) -> BTreeMap<MethodRef, Vec<MethodRef>> {
    let mut parent: BTreeMap<MethodRef, Option<MethodRef>> = BTreeMap::new();
    let mut order = Vec::new();
    let mut queue = VecDeque::from([entry.clone()]);
    parent.insert(entry.clone(), None);
    while let Some(n) = queue.pop_front() {
        order.push(n.clone());
        for c in graph.callees(&n) {
            if !parent.contains_key(c) {
                parent.insert(c.clone(), Some(n.clone()));
                queue.push_back(c.clone());
            }
        }
    }
    order
        .into_iter()
        .map(|n| {
            let mut path = vec![n.clone()];
            let mut cur = parent[&n].clone();
            while let Some(p) = cur {
                cur = parent[&p].clone();
                path.push(p);
            }
            path.reverse();
            (n, path)
        })
        .collect()
}

/// One finding per registry entry reachable from `entry`, each with a
/// shortest witnessing path.
pub fn check_action_method(
    types: &Types<'_>,
    entry: &MethodRef,
    graph: &CallGraph,
    registry: &NonDetRegistry,
) -> Vec<Finding> {
    let paths = shortest_paths(graph, entry);
    let mut best: BTreeMap<&MethodRef, &Vec<MethodRef>> = BTreeMap::new();
    for (node, path) in &paths {
        for e in registry.matching(types, node) {
            let better = best.get(e).is_none_or(|p| path.len() < p.len());
            if better {
                best.insert(e, path);
            }
        }
    }
    best.into_iter()
        .map(|(e, p)| Finding {
            entry: entry.clone(),
            violation: e.clone(),
            path: p.clone(),
        })
        .collect()
}

/// Shortest path from `entry` to `Treplica execute:`, if an action method
/// could submit another action while being applied.
pub fn nested_action_path(graph: &CallGraph, entry: &MethodRef) -> Option<Vec<MethodRef>> {
    let execute = MethodRef::new(builtins::TREPLICA, "execute:");
    shortest_paths(graph, entry).remove(&execute)
}
