//! Nominal resolution: prototype lookup, the sub-prototype relation, method
//! lookup along the `extends` chain, and the static typing of expressions.

use std::collections::{BTreeMap, BTreeSet};

use crate::diag::Diagnostic;

use super::ast::*;
use super::builtins::{self, BuiltinMethod};
use super::constructors::has_init;

/// A whole program: every user unit plus generated ones.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Program {
    pub units: Vec<SourceUnit>,
}

impl Program {
    pub fn new(units: Vec<SourceUnit>) -> Self {
        Program { units }
    }

    pub fn prototypes(&self) -> impl Iterator<Item = &PrototypeDecl> {
        self.units.iter().flat_map(|u| u.prototypes.iter())
    }

    pub fn prototype(&self, name: &str) -> Option<&PrototypeDecl> {
        self.prototypes().find(|p| p.name == name)
    }

    pub fn prototype_mut(&mut self, name: &str) -> Option<&mut PrototypeDecl> {
        self.units
            .iter_mut()
            .flat_map(|u| u.prototypes.iter_mut())
            .find(|p| p.name == name)
    }

    pub fn unit_of(&self, proto: &str) -> Option<&SourceUnit> {
        self.units
            .iter()
            .find(|u| u.prototypes.iter().any(|p| p.name == proto))
    }
}

/// Which metaobject annotations a unit can use, given its imports.
pub trait AnnotationCatalog {
    fn is_visible(&self, imports: &[String], name: &str) -> bool;
}

/// The method a send dispatches to, found statically.
#[derive(Debug, Clone, Copy)]
pub enum MethodTarget<'p> {
    User {
        owner: &'p str,
        method: &'p MethodDecl,
    },
    Builtin {
        owner: &'static str,
        method: &'static BuiltinMethod,
    },
    /// Parameterless `new` of a prototype that declares no `init`.
    DefaultNew { owner: &'p str },
}

impl MethodTarget<'_> {
    pub fn owner(&self) -> &str {
        match self {
            MethodTarget::User { owner, .. } | MethodTarget::DefaultNew { owner } => owner,
            MethodTarget::Builtin { owner, .. } => owner,
        }
    }

    pub fn return_type(&self, receiver: &str) -> Option<TypeName> {
        match self {
            MethodTarget::User { method, .. } => method.return_type.clone(),
            MethodTarget::Builtin { method, .. } => builtins::return_type(method, receiver),
            MethodTarget::DefaultNew { owner } => Some(TypeName::simple(*owner)),
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            MethodTarget::User { method, .. } => method.param_count(),
            MethodTarget::Builtin { method, .. } => method.params,
            MethodTarget::DefaultNew { .. } => 0,
        }
    }
}

/// How a bare identifier inside a method body resolves.
#[derive(Debug, Clone, PartialEq)]
pub enum IdentKind {
    Local(Option<TypeName>),
    Field(TypeName),
    Prototype,
    /// Unary message sent to `self` with an implicit receiver.
    SelfUnary,
}

/// Parameters and locals visible at a point in a method body.
#[derive(Debug, Clone, Default)]
pub struct Scope {
    vars: Vec<(String, Option<TypeName>)>,
}

impl Scope {
    pub fn for_method(m: &MethodDecl) -> Self {
        Scope {
            vars: m
                .all_params()
                .map(|p| (p.name.clone(), Some(p.type_name.clone())))
                .collect(),
        }
    }

    pub fn declare(&mut self, name: &str, ty: Option<TypeName>) {
        self.vars.push((name.to_string(), ty));
    }

    pub fn get(&self, name: &str) -> Option<&Option<TypeName>> {
        self.vars
            .iter()
            .rev()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.get(name).is_some()
    }
}

/// Read-only type information over a program.
pub struct Types<'p> {
    program: &'p Program,
    protos: BTreeMap<&'p str, &'p PrototypeDecl>,
}

impl<'p> Types<'p> {
    pub fn new(program: &'p Program) -> Self {
        let protos = program.prototypes().map(|p| (p.name.as_str(), p)).collect();
        Types { program, protos }
    }

    pub fn program(&self) -> &'p Program {
        self.program
    }

    pub fn proto(&self, name: &str) -> Option<&'p PrototypeDecl> {
        self.protos.get(name).copied()
    }

    pub fn user_prototypes(&self) -> impl Iterator<Item = &'p PrototypeDecl> + '_ {
        self.protos.values().copied()
    }

    pub fn is_prototype_name(&self, name: &str) -> bool {
        self.protos.contains_key(name) || builtins::is_builtin(name)
    }

    pub fn is_known_type(&self, t: &TypeName) -> bool {
        self.is_prototype_name(&t.name) && t.args.iter().all(|a| self.is_known_type(a))
    }

    pub fn super_of(&self, name: &str) -> Option<&str> {
        match self.protos.get(name) {
            Some(p) => Some(p.extends.as_deref().unwrap_or(builtins::ANY)),
            None => builtins::builtin_super(name),
        }
    }

    /// Strict ancestors, nearest first. Stops on cycles.
    pub fn ancestors(&self, name: &str) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        let mut cur = self.super_of(name);
        while let Some(s) = cur {
            if s == name || out.contains(&s) {
                break;
            }
            out.push(s);
            cur = self.super_of(s);
        }
        out
    }

    /// Reflexive sub-prototype test.
    pub fn is_subprototype(&self, sub: &str, sup: &str) -> bool {
        sub == sup || self.ancestors(sub).contains(&sup)
    }

    /// User prototypes strictly below `sup`, sorted by name.
    pub fn subprototypes(&self, sup: &str) -> Vec<&'p str> {
        self.protos
            .keys()
            .copied()
            .filter(|p| *p != sup && self.is_subprototype(p, sup))
            .collect()
    }

    pub fn lookup_method(&self, proto: &str, selector: &str) -> Option<MethodTarget<'p>> {
        // constructors are not inherited
        if selector == "new" || selector == "new:" {
            let p = self.protos.get(proto)?;
            if let Some(m) = p.method(selector) {
                return Some(MethodTarget::User {
                    owner: p.name.as_str(),
                    method: m,
                });
            }
            if selector == "new" && !has_init(p) {
                return Some(MethodTarget::DefaultNew {
                    owner: p.name.as_str(),
                });
            }
            return None;
        }
        let mut chain = vec![proto];
        chain.extend(self.ancestors(proto));
        for p in chain {
            if let Some(decl) = self.protos.get(p) {
                if let Some(m) = decl.method(selector) {
                    return Some(MethodTarget::User {
                        owner: decl.name.as_str(),
                        method: m,
                    });
                }
            } else if let Some(b) = builtins::method(p, selector) {
                return Some(MethodTarget::Builtin {
                    owner: b.proto,
                    method: b,
                });
            }
        }
        None
    }

    /// True if `new`/`new:` can be sent to this prototype name.
    pub fn has_constructor(&self, proto: &str, selector: &str) -> bool {
        if builtins::is_builtin(proto) {
            return selector == "new" && proto == builtins::TREPLICA;
        }
        self.lookup_method(proto, selector).is_some()
    }

    pub fn field(&self, proto: &str, name: &str) -> Option<&'p FieldDecl> {
        let mut chain = vec![proto];
        chain.extend(self.ancestors(proto));
        chain
            .into_iter()
            .filter_map(|p| self.protos.get(p))
            .find_map(|p| p.field(name))
    }

    /// All fields including inherited ones, ancestors first.
    pub fn all_fields(&self, proto: &str) -> Vec<&'p FieldDecl> {
        let mut chain = self.ancestors(proto);
        chain.reverse();
        chain.push(proto);
        chain
            .into_iter()
            .filter_map(|p| self.protos.get(p))
            .flat_map(|p| p.fields())
            .collect()
    }

    pub fn classify_ident(&self, scope: &Scope, self_proto: &str, name: &str) -> Option<IdentKind> {
        if let Some(t) = scope.get(name) {
            return Some(IdentKind::Local(t.clone()));
        }
        if let Some(f) = self.field(self_proto, name) {
            return Some(IdentKind::Field(f.type_name.clone()));
        }
        if self.is_prototype_name(name) {
            return Some(IdentKind::Prototype);
        }
        match self.lookup_method(self_proto, name) {
            Some(t) if t.param_count() == 0 => Some(IdentKind::SelfUnary),
            _ => None,
        }
    }

    /// Static type of an expression; `None` when unknown or valueless.
    pub fn expr_type(&self, scope: &Scope, self_proto: &str, e: &Expr) -> Option<TypeName> {
        match &e.kind {
            ExprKind::Int(_) => Some(TypeName::simple(builtins::INT)),
            ExprKind::Str(_) | ExprKind::Concat(..) => Some(TypeName::simple(builtins::STRING)),
            ExprKind::SelfRef => Some(TypeName::simple(self_proto)),
            ExprKind::SelfField(f) => self.field(self_proto, f).map(|f| f.type_name.clone()),
            ExprKind::Ident(name) => match self.classify_ident(scope, self_proto, name)? {
                IdentKind::Local(t) => t,
                IdentKind::Field(t) => Some(t),
                IdentKind::Prototype => Some(TypeName::simple(name.clone())),
                IdentKind::SelfUnary => self
                    .lookup_method(self_proto, name)
                    .and_then(|t| t.return_type(self_proto)),
            },
            ExprKind::Index(base, _) => {
                let t = self.expr_type(scope, self_proto, base)?;
                (t.name == builtins::ARRAY)
                    .then(|| t.args.first().cloned())
                    .flatten()
            }
            ExprKind::Send {
                receiver, selector, ..
            } => {
                let rt = self.expr_type(scope, self_proto, receiver)?;
                if selector.text == "cast:" {
                    return Some(rt);
                }
                if rt.name == builtins::TREPLICA && selector.text == "new" {
                    return Some(rt);
                }
                let target = self.lookup_method(&rt.name, &selector.text)?;
                target.return_type(&rt.name)
            }
        }
    }

    /// True if the expression denotes a prototype object by name.
    pub fn is_prototype_expr(&self, scope: &Scope, self_proto: &str, e: &Expr) -> bool {
        matches!(&e.kind, ExprKind::Ident(n)
            if matches!(self.classify_ident(scope, self_proto, n), Some(IdentKind::Prototype)))
    }
}

/// Binds every name in the program and reports unresolved ones.
pub fn resolve(program: &Program, catalog: &dyn AnnotationCatalog) -> Vec<Diagnostic> {
    resolve_with(program, catalog, true)
}

/// Checks declarations only: prototypes, supertypes, fields, signatures and
/// annotation visibility. Method bodies may still use methods and
/// prototypes that metaobjects are going to add.
pub fn resolve_declarations(program: &Program, catalog: &dyn AnnotationCatalog) -> Vec<Diagnostic> {
    resolve_with(program, catalog, false)
}

fn resolve_with(
    program: &Program,
    catalog: &dyn AnnotationCatalog,
    bodies: bool,
) -> Vec<Diagnostic> {
    let types = Types::new(program);
    let mut diags = Vec::new();

    let mut seen: BTreeSet<&str> = BTreeSet::new();
    for unit in &program.units {
        if unit.origin != "generated" && unit.prototypes.len() > 1 {
            diags.push(
                Diagnostic::error("at most one prototype may be declared per source file")
                    .at(unit.origin.clone(), unit.prototypes[1].pos.clone()),
            );
        }
        for proto in &unit.prototypes {
            if builtins::is_builtin(&proto.name) {
                diags.push(
                    Diagnostic::error(format!("`{}` redefines a built-in prototype", proto.name))
                        .at(unit.origin.clone(), proto.pos.clone()),
                );
            }
            if !seen.insert(&proto.name) {
                diags.push(
                    Diagnostic::error(format!("duplicate prototype `{}`", proto.name))
                        .at(unit.origin.clone(), proto.pos.clone()),
                );
            }
            check_prototype(&types, unit, proto, catalog, bodies, &mut diags);
        }
    }
    diags
}

fn check_prototype(
    types: &Types<'_>,
    unit: &SourceUnit,
    proto: &PrototypeDecl,
    catalog: &dyn AnnotationCatalog,
    bodies: bool,
    diags: &mut Vec<Diagnostic>,
) {
    let origin = unit.origin.as_str();
    if let Some(sup) = &proto.extends {
        let known_user = types.proto(sup).is_some();
        if !known_user && !builtins::EXTENSIBLE.contains(&sup.as_str()) {
            diags.push(
                Diagnostic::error(format!("unknown supertype `{sup}` of `{}`", proto.name))
                    .at(origin, proto.pos.clone()),
            );
        } else if types.ancestors(&proto.name).contains(&proto.name.as_str())
            || types.ancestors(sup).contains(&proto.name.as_str())
        {
            diags.push(
                Diagnostic::error(format!("cyclic `extends` chain through `{}`", proto.name))
                    .at(origin, proto.pos.clone()),
            );
        }
    }

    let check_anns = |anns: &[AnnotationUse], diags: &mut Vec<Diagnostic>| {
        for a in anns.iter().filter(|a| !a.inert) {
            if !catalog.is_visible(&unit.imports, &a.name) {
                diags.push(
                    Diagnostic::error(format!(
                        "no metaobject `{}` is visible here (missing import?)",
                        a.name
                    ))
                    .at(origin, a.pos.clone()),
                );
            }
        }
    };
    check_anns(&proto.annotations, diags);

    let mut selectors = BTreeSet::new();
    let mut fields = BTreeSet::new();
    for member in &proto.members {
        check_anns(member.annotations(), diags);
        match member {
            Member::Field(f) => {
                if !fields.insert(f.name.as_str()) {
                    diags.push(
                        Diagnostic::error(format!(
                            "duplicate field `{}` in `{}`",
                            f.name, proto.name
                        ))
                        .at(origin, f.pos.clone()),
                    );
                }
                check_type(types, &f.type_name, origin, &f.pos, diags);
            }
            Member::Method(m) => {
                if !selectors.insert(m.selector.text.as_str()) {
                    diags.push(
                        Diagnostic::error(format!(
                            "duplicate method `{}` in `{}`",
                            m.selector, proto.name
                        ))
                        .at(origin, m.pos.clone()),
                    );
                }
                for p in m.all_params() {
                    check_type(types, &p.type_name, origin, &m.pos, diags);
                }
                if let Some(rt) = &m.return_type {
                    check_type(types, rt, origin, &m.pos, diags);
                }
                let mut scope = Scope::for_method(m);
                for stmt in &m.body {
                    if bodies {
                        check_stmt(types, proto, stmt, &mut scope, origin, &check_anns, diags);
                    } else if let Stmt::VarDecl(v) = stmt {
                        check_anns(&v.annotations, diags);
                    }
                }
            }
        }
    }
}

fn check_type(
    types: &Types<'_>,
    t: &TypeName,
    origin: &str,
    pos: &crate::diag::Pos,
    diags: &mut Vec<Diagnostic>,
) {
    if !types.is_known_type(t) {
        diags.push(Diagnostic::error(format!("unknown type `{t}`")).at(origin, pos.clone()));
    }
}

fn check_stmt(
    types: &Types<'_>,
    proto: &PrototypeDecl,
    stmt: &Stmt,
    scope: &mut Scope,
    origin: &str,
    check_anns: &dyn Fn(&[AnnotationUse], &mut Vec<Diagnostic>),
    diags: &mut Vec<Diagnostic>,
) {
    match stmt {
        Stmt::VarDecl(v) => {
            check_anns(&v.annotations, diags);
            if let Some(t) = &v.type_name {
                check_type(types, t, origin, &v.pos, diags);
            }
            if let Some(init) = &v.init {
                check_expr(types, proto, scope, init, origin, diags);
            }
            let ty = v.type_name.clone().or_else(|| {
                v.init
                    .as_ref()
                    .and_then(|e| types.expr_type(scope, &proto.name, e))
            });
            scope.declare(&v.name, ty);
        }
        Stmt::Assign { target, value, pos } => {
            match target {
                AssignTarget::Name(n) => {
                    if !scope.contains(n) && types.field(&proto.name, n).is_none() {
                        diags.push(
                            Diagnostic::error(format!("assignment to unknown variable `{n}`"))
                                .at(origin, pos.clone()),
                        );
                    }
                }
                AssignTarget::SelfField(n) => {
                    if types.field(&proto.name, n).is_none() {
                        diags.push(
                            Diagnostic::error(format!("`{}` has no field `{n}`", proto.name))
                                .at(origin, pos.clone()),
                        );
                    }
                }
            }
            check_expr(types, proto, scope, value, origin, diags);
        }
        Stmt::Return(Some(e), _) | Stmt::Expr(e) => {
            check_expr(types, proto, scope, e, origin, diags)
        }
        Stmt::Return(None, _) => {}
    }
}

fn check_expr(
    types: &Types<'_>,
    proto: &PrototypeDecl,
    scope: &Scope,
    e: &Expr,
    origin: &str,
    diags: &mut Vec<Diagnostic>,
) {
    match &e.kind {
        ExprKind::Ident(n) => {
            if types.classify_ident(scope, &proto.name, n).is_none() {
                diags.push(
                    Diagnostic::error(format!("unknown identifier `{n}`"))
                        .at(origin, e.pos.clone()),
                );
            }
        }
        ExprKind::SelfField(n) => {
            if types.field(&proto.name, n).is_none() {
                diags.push(
                    Diagnostic::error(format!("`{}` has no field `{n}`", proto.name))
                        .at(origin, e.pos.clone()),
                );
            }
        }
        ExprKind::Concat(l, r) | ExprKind::Index(l, r) => {
            check_expr(types, proto, scope, l, origin, diags);
            check_expr(types, proto, scope, r, origin, diags);
        }
        ExprKind::Send {
            receiver,
            selector,
            args,
        } => {
            check_expr(types, proto, scope, receiver, origin, diags);
            for a in args.iter().flatten() {
                check_expr(types, proto, scope, a, origin, diags);
            }
            let sel = selector.text.as_str();
            let to_prototype = types.is_prototype_expr(scope, &proto.name, receiver);
            match sel {
                "new" | "new:" | "cast:" if !to_prototype => {
                    diags.push(
                        Diagnostic::error(format!("`{sel}` may only be sent to a prototype"))
                            .at(origin, e.pos.clone()),
                    );
                }
                "new" | "new:" => {
                    let ExprKind::Ident(p) = &receiver.kind else {
                        unreachable!()
                    };
                    if !types.has_constructor(p, sel) {
                        diags.push(
                            Diagnostic::error(format!("prototype `{p}` has no `{sel}` method"))
                                .at(origin, e.pos.clone()),
                        );
                    }
                }
                "init" | "init:" => {
                    diags.push(
                        Diagnostic::error(format!(
                            "`{sel}` is a constructor and cannot be sent directly; use `new`"
                        ))
                        .at(origin, e.pos.clone()),
                    );
                }
                _ => {
                    if let Some(rt) = types.expr_type(scope, &proto.name, receiver) {
                        if types.proto(&rt.name).is_some()
                            && types.lookup_method(&rt.name, sel).is_none()
                        {
                            diags.push(
                                Diagnostic::error(format!(
                                    "`{}` does not understand `{sel}`",
                                    rt.name
                                ))
                                .at(origin, e.pos.clone()),
                            );
                        }
                    }
                }
            }
        }
        ExprKind::SelfRef | ExprKind::Str(_) | ExprKind::Int(_) => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::constructors::synthesize_constructors;
    use crate::lang::parser::parse_source;

    struct Treplica;
    impl AnnotationCatalog for Treplica {
        fn is_visible(&self, imports: &[String], name: &str) -> bool {
            name == "init"
                || (imports.iter().any(|i| i == "treplica") && name.starts_with("treplica"))
        }
    }

    fn program(srcs: &[&str]) -> Program {
        Program::new(
            srcs.iter()
                .enumerate()
                .map(|(i, s)| {
                    let mut u = parse_source(s, &format!("f{i}.cyn")).unwrap();
                    synthesize_constructors(&mut u);
                    u
                })
                .collect(),
        )
    }

    const INFO: &str = "package main\nimport treplica\nobject Info extends Context {\n var String text\n @treplicaAction\n func setText: String text { self.text = text; }\n}";

    #[test]
    fn info_resolves_as_context_subprototype() {
        let p = program(&[INFO]);
        assert!(resolve(&p, &Treplica).is_empty());
        let t = Types::new(&p);
        assert!(t.is_subprototype("Info", "Context"));
        assert!(!t.is_subprototype("Context", "Info"));
    }

    #[test]
    fn missing_import_is_reported() {
        let src = INFO.replace("import treplica\n", "");
        let p = program(&[&src]);
        let d = resolve(&p, &Treplica);
        assert_eq!(d.len(), 1);
        assert!(d[0].message.contains("treplicaAction"));
    }

    #[test]
    fn unknown_supertype() {
        let p = program(&["object A extends Unknown end"]);
        let d = resolve(&p, &Treplica);
        assert!(d[0].message.contains("unknown supertype `Unknown`"));
    }

    #[test]
    fn new_to_non_prototype_rejected() {
        let p = program(&["object A\n func f { var x = 3; x new; }\nend"]);
        let d = resolve(&p, &Treplica);
        assert!(d
            .iter()
            .any(|d| d.message.contains("may only be sent to a prototype")));
    }

    #[test]
    fn let_type_deduced_from_initializer() {
        let p = program(&[
            "object Building\n func init: String n { self.n = n; }\n func getName -> String { return n }\n var String n\nend",
            "object Program\n func run { let b = Building new: \"x\"; var String s; s = b getName; }\nend",
        ]);
        assert!(
            resolve(&p, &Treplica).is_empty(),
            "{:?}",
            resolve(&p, &Treplica)
        );
        let t = Types::new(&p);
        let run = p.prototype("Program").unwrap().method("run").unwrap();
        let Stmt::VarDecl(v) = &run.body[0] else {
            panic!()
        };
        let ty = t.expr_type(&Scope::default(), "Program", v.init.as_ref().unwrap());
        assert_eq!(ty, Some(TypeName::simple("Building")));
    }

    #[test]
    fn implicit_self_unary_send() {
        let p = program(&[
            "object Info extends Context\n var String text\n func age -> Long { return 1 }\n func set: String t { self.text = t ++ age; }\nend",
        ]);
        assert!(resolve(&p, &Treplica).is_empty());
        let t = Types::new(&p);
        assert_eq!(
            t.classify_ident(&Scope::default(), "Info", "age"),
            Some(IdentKind::SelfUnary)
        );
    }
}
