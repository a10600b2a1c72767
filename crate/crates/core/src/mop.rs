//! Compile-time metaobject protocol.
//!
//! Metaobjects are bound to `@name(...)` annotations. Compilation runs in two
//! metaobject phases:
//!
//! * **ATI** runs after field types are known. Each metaobject inspects the
//!   program through a read-only [`CompilerView`] and answers with
//!   [`SourceEdit`]s carrying source *text*. Edits are collected in annotation
//!   source order and applied together by [`apply_edits`], which re-parses the
//!   text through the front end.
//! * **DSA2** runs once the expanded program is frozen. Hooks receive a
//!   [`FrozenView`] and may only report diagnostics.

use std::cell::OnceCell;
use std::collections::BTreeMap;
use std::fmt;

use crate::determinism::CallGraph;
use crate::diag::Diagnostic;
use crate::lang::ast::*;
use crate::lang::constructors::synthesize_for;
use crate::lang::parser::{parse_member_text, parse_source, parse_statements};
use crate::lang::resolve::{AnnotationCatalog, Program, Scope, Types};

/// Package whose metaobjects every unit sees without an import.
pub const IMPLICIT_PACKAGE: &str = "cyan.lang";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DeclKind {
    MethodDec,
    VarDec,
    PrototypeDec,
}

impl fmt::Display for DeclKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DeclKind::MethodDec => "METHOD_DEC",
            DeclKind::VarDec => "VAR_DEC",
            DeclKind::PrototypeDec => "PROTOTYPE_DEC",
        })
    }
}

/// The declaration an annotation is attached to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AttachSite {
    Prototype {
        proto: String,
    },
    Method {
        proto: String,
        selector: String,
    },
    Field {
        proto: String,
        field: String,
    },
    /// A local variable declaration: statement `stmt` of the method body.
    LocalVar {
        proto: String,
        selector: String,
        stmt: usize,
    },
}

impl AttachSite {
    pub fn kind(&self) -> DeclKind {
        match self {
            AttachSite::Prototype { .. } => DeclKind::PrototypeDec,
            AttachSite::Method { .. } => DeclKind::MethodDec,
            AttachSite::Field { .. } | AttachSite::LocalVar { .. } => DeclKind::VarDec,
        }
    }

    pub fn proto(&self) -> &str {
        match self {
            AttachSite::Prototype { proto }
            | AttachSite::Method { proto, .. }
            | AttachSite::Field { proto, .. }
            | AttachSite::LocalVar { proto, .. } => proto,
        }
    }
}

/// An annotation occurrence together with its lexical attach site.
#[derive(Debug, Clone)]
pub struct AnnotationRef {
    pub annotation: AnnotationUse,
    pub site: AttachSite,
    /// True for annotations written among a prototype's members.
    pub member_position: bool,
    pub origin: String,
}

/// Where an added method is placed among the target's members.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Anchor {
    BeforeMethod(String),
    BeforeField(String),
    End,
}

/// A pending compile-time change, expressed as source text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SourceEdit {
    AddMethod {
        target: String,
        text: String,
        anchor: Anchor,
    },
    RenameMethod {
        target: String,
        from: String,
        to: String,
    },
    AddPrototype {
        package: Option<String>,
        text: String,
    },
    ReplaceVarDeclStatements {
        target: String,
        selector: String,
        stmt: usize,
        text: String,
    },
}

impl SourceEdit {
    fn order(&self) -> u8 {
        match self {
            SourceEdit::ReplaceVarDeclStatements { .. } => 0,
            SourceEdit::AddPrototype { .. } => 1,
            SourceEdit::RenameMethod { .. } => 2,
            SourceEdit::AddMethod { .. } => 3,
        }
    }
}

/// An edit tagged with the metaobject that produced it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PendingEdit {
    pub metaobject: String,
    pub edit: SourceEdit,
}

/// Read-only access to the program for ATI hooks.
pub struct CompilerView<'a> {
    types: &'a Types<'a>,
    annotation: &'a AnnotationRef,
    site: AttachSite,
}

impl<'a> CompilerView<'a> {
    pub fn new(types: &'a Types<'a>, annotation: &'a AnnotationRef, site: AttachSite) -> Self {
        CompilerView {
            types,
            annotation,
            site,
        }
    }

    pub fn types(&self) -> &Types<'a> {
        self.types
    }

    pub fn annotation(&self) -> &AnnotationUse {
        &self.annotation.annotation
    }

    pub fn site(&self) -> &AttachSite {
        &self.site
    }

    /// The declaration that lexically follows the annotation, before any
    /// floating to the enclosing prototype.
    pub fn lexical_site(&self) -> &AttachSite {
        &self.annotation.site
    }

    pub fn prototype(&self, name: &str) -> Option<&'a PrototypeDecl> {
        self.types.proto(name)
    }

    pub fn package_of(&self, proto: &str) -> Option<String> {
        self.types
            .program()
            .unit_of(proto)
            .and_then(|u| u.package.clone())
    }

    pub fn field_type(&self, proto: &str, field: &str) -> Option<&'a TypeName> {
        self.types.field(proto, field).map(|f| &f.type_name)
    }

    pub fn is_subprototype(&self, sub: &str, sup: &str) -> bool {
        self.types.is_subprototype(sub, sup)
    }

    pub fn attached_prototype(&self) -> Option<&'a PrototypeDecl> {
        self.types.proto(self.site.proto())
    }

    pub fn attached_method(&self) -> Option<&'a MethodDecl> {
        match &self.site {
            AttachSite::Method { proto, selector } => self.types.proto(proto)?.method(selector),
            _ => None,
        }
    }

    /// The annotated local declaration, its enclosing method, and the scope in
    /// effect right before it.
    pub fn attached_local(&self) -> Option<(&'a VarDecl, &'a MethodDecl, Scope)> {
        let AttachSite::LocalVar {
            proto,
            selector,
            stmt,
        } = &self.site
        else {
            return None;
        };
        let method = self.types.proto(proto)?.method(selector)?;
        let mut scope = Scope::for_method(method);
        for s in &method.body[..*stmt] {
            if let Stmt::VarDecl(v) = s {
                let ty = v.type_name.clone().or_else(|| {
                    v.init
                        .as_ref()
                        .and_then(|e| self.types.expr_type(&scope, proto, e))
                });
                scope.declare(&v.name, ty);
            }
        }
        match method.body.get(*stmt)? {
            Stmt::VarDecl(v) => Some((v, method, scope)),
            _ => None,
        }
    }

    /// Static type of a local declaration: declared, else the initializer's.
    pub fn local_type(&self) -> Option<TypeName> {
        let (v, _, scope) = self.attached_local()?;
        v.type_name.clone().or_else(|| {
            v.init
                .as_ref()
                .and_then(|e| self.types.expr_type(&scope, self.site.proto(), e))
        })
    }

    pub fn error(&self, message: impl Into<String>) -> Diagnostic {
        Diagnostic::error(message).at(
            self.annotation.origin.clone(),
            self.annotation.annotation.pos.clone(),
        )
    }
}

/// Read-only access to the frozen, expanded program for DSA2 hooks.
pub struct FrozenView<'a> {
    types: &'a Types<'a>,
    annotation: &'a AnnotationRef,
    site: AttachSite,
    graph: &'a OnceCell<CallGraph>,
}

impl<'a> FrozenView<'a> {
    pub fn types(&self) -> &Types<'a> {
        self.types
    }

    pub fn annotation(&self) -> &AnnotationUse {
        &self.annotation.annotation
    }

    pub fn site(&self) -> &AttachSite {
        &self.site
    }

    /// Call graph of the whole frozen program, built on first use.
    pub fn call_graph(&self) -> &CallGraph {
        self.graph.get_or_init(|| CallGraph::build(self.types))
    }

    pub fn error(&self, message: impl Into<String>) -> Diagnostic {
        Diagnostic::error(message).at(
            self.annotation.origin.clone(),
            self.annotation.annotation.pos.clone(),
        )
    }
}

/// A compile-time metaobject definition.
pub trait Metaobject {
    fn name(&self) -> &'static str;

    /// Declaration kinds this metaobject may be attached to; never empty.
    fn attachable_to(&self) -> &'static [DeclKind];

    /// Edit collection, after field types are known.
    fn ati(&self, view: &CompilerView<'_>) -> Result<Vec<SourceEdit>, Vec<Diagnostic>>;

    /// Checks on the expanded program. No changes are possible here.
    fn dsa2(&self, _view: &FrozenView<'_>) -> Vec<Diagnostic> {
        Vec::new()
    }
}

/// Compiled-in metaobjects, registered per package name.
#[derive(Default)]
pub struct MetaobjectSet {
    packages: BTreeMap<String, Vec<Box<dyn Metaobject>>>,
}

impl MetaobjectSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a metaobject; names must be unique per package.
    pub fn register(&mut self, package: &str, mo: Box<dyn Metaobject>) {
        let list = self.packages.entry(package.to_string()).or_default();
        assert!(
            list.iter().all(|m| m.name() != mo.name()),
            "metaobject `{}` registered twice in package `{package}`",
            mo.name()
        );
        assert!(!mo.attachable_to().is_empty());
        list.push(mo);
    }

    pub fn find(&self, imports: &[String], name: &str) -> Option<&dyn Metaobject> {
        std::iter::once(IMPLICIT_PACKAGE)
            .chain(imports.iter().map(String::as_str))
            .filter_map(|pkg| self.packages.get(pkg))
            .flatten()
            .find(|m| m.name() == name)
            .map(AsRef::as_ref)
    }
}

impl AnnotationCatalog for MetaobjectSet {
    fn is_visible(&self, imports: &[String], name: &str) -> bool {
        self.find(imports, name).is_some()
    }
}

/// Annotations in source order. With `inert` set, collects the consumed ones
/// (for DSA2); otherwise the ones still awaiting expansion.
pub fn collect_annotations(program: &Program, inert: bool) -> Vec<AnnotationRef> {
    let mut out = Vec::new();
    for unit in &program.units {
        let origin = &unit.origin;
        let mut push = |a: &AnnotationUse, site: AttachSite, member_position: bool| {
            if a.inert == inert {
                out.push(AnnotationRef {
                    annotation: a.clone(),
                    site,
                    member_position,
                    origin: origin.clone(),
                });
            }
        };
        for proto in &unit.prototypes {
            let pname = proto.name.clone();
            for a in &proto.annotations {
                push(
                    a,
                    AttachSite::Prototype {
                        proto: pname.clone(),
                    },
                    false,
                );
            }
            for member in &proto.members {
                match member {
                    Member::Field(f) => {
                        for a in &f.annotations {
                            let site = AttachSite::Field {
                                proto: pname.clone(),
                                field: f.name.clone(),
                            };
                            push(a, site, true);
                        }
                    }
                    Member::Method(m) => {
                        for a in &m.annotations {
                            let site = AttachSite::Method {
                                proto: pname.clone(),
                                selector: m.selector.text.clone(),
                            };
                            push(a, site, true);
                        }
                        for (i, stmt) in m.body.iter().enumerate() {
                            if let Stmt::VarDecl(v) = stmt {
                                for a in &v.annotations {
                                    let site = AttachSite::LocalVar {
                                        proto: pname.clone(),
                                        selector: m.selector.text.clone(),
                                        stmt: i,
                                    };
                                    push(a, site, false);
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

/// Validates the attach site against the metaobject's allowed kinds and
/// returns the effective site.
///
/// A member-position annotation whose metaobject cannot attach to that member
/// but can attach to prototypes binds to the enclosing prototype instead.
pub fn check_attachment(
    ann: &AnnotationRef,
    def: &dyn Metaobject,
) -> Result<AttachSite, Diagnostic> {
    let allowed = def.attachable_to();
    if allowed.contains(&ann.site.kind()) {
        return Ok(ann.site.clone());
    }
    if ann.member_position && allowed.contains(&DeclKind::PrototypeDec) {
        return Ok(AttachSite::Prototype {
            proto: ann.site.proto().to_string(),
        });
    }
    let names: Vec<String> = allowed.iter().map(ToString::to_string).collect();
    Err(Diagnostic::error(format!(
        "metaobject `{}` cannot be attached to a {}; allowed: {}",
        def.name(),
        ann.site.kind(),
        names.join(", ")
    ))
    .at(ann.origin.clone(), ann.annotation.pos.clone()))
}

fn unit_imports<'p>(program: &'p Program, origin: &str) -> &'p [String] {
    program
        .units
        .iter()
        .find(|u| u.origin == origin)
        .map(|u| u.imports.as_slice())
        .unwrap_or(&[])
}

/// Runs every pending annotation's ATI hook and gathers the edits in
/// annotation source order. Nothing is applied.
pub fn run_phase_ati(
    program: &Program,
    metaobjects: &MetaobjectSet,
) -> Result<Vec<PendingEdit>, Vec<Diagnostic>> {
    let types = Types::new(program);
    let mut edits = Vec::new();
    let mut diags = Vec::new();
    let anns = collect_annotations(program, false);
    for ann in &anns {
        let imports = unit_imports(program, &ann.origin);
        let Some(def) = metaobjects.find(imports, &ann.annotation.name) else {
            diags.push(
                Diagnostic::error(format!(
                    "no metaobject `{}` is visible here (missing import?)",
                    ann.annotation.name
                ))
                .at(ann.origin.clone(), ann.annotation.pos.clone()),
            );
            continue;
        };
        let site = match check_attachment(ann, def) {
            Ok(site) => site,
            Err(d) => {
                diags.push(d);
                continue;
            }
        };
        let view = CompilerView::new(&types, ann, site);
        match def.ati(&view) {
            Ok(list) => edits.extend(list.into_iter().map(|edit| PendingEdit {
                metaobject: def.name().to_string(),
                edit,
            })),
            Err(ds) => diags.extend(ds),
        }
    }
    if diags.is_empty() {
        Ok(edits)
    } else {
        Err(diags)
    }
}

fn internal(metaobject: &str, message: impl fmt::Display) -> Diagnostic {
    Diagnostic::error(format!(
        "internal error in metaobject `{metaobject}`: {message}"
    ))
    .with_origin("generated")
}

fn conflict(metaobject: &str, message: impl fmt::Display) -> Diagnostic {
    Diagnostic::error(format!(
        "edit conflict from metaobject `{metaobject}`: {message}"
    ))
    .with_origin("generated")
}

fn stmts_have_annotations(stmts: &[Stmt]) -> bool {
    stmts
        .iter()
        .any(|s| matches!(s, Stmt::VarDecl(v) if !v.annotations.is_empty()))
}

fn member_has_annotations(m: &Member) -> bool {
    !m.annotations().is_empty() || matches!(m, Member::Method(m) if stmts_have_annotations(&m.body))
}

fn mark_inert(program: &mut Program) {
    let mark = |anns: &mut Vec<AnnotationUse>| anns.iter_mut().for_each(|a| a.inert = true);
    for proto in program
        .units
        .iter_mut()
        .flat_map(|u| u.prototypes.iter_mut())
    {
        mark(&mut proto.annotations);
        for member in &mut proto.members {
            match member {
                Member::Field(f) => mark(&mut f.annotations),
                Member::Method(m) => {
                    mark(&mut m.annotations);
                    for s in &mut m.body {
                        if let Stmt::VarDecl(v) = s {
                            mark(&mut v.annotations);
                        }
                    }
                }
            }
        }
    }
}

/// Applies collected edits to a copy of the program. Inserted text is parsed
/// through the front end; constructors are re-synthesized afterwards. All
/// annotations present before the call are marked inert.
pub fn apply_edits(program: &Program, edits: &[PendingEdit]) -> Result<Program, Vec<Diagnostic>> {
    let mut out = program.clone();
    mark_inert(&mut out);
    let mut diags = Vec::new();

    let mut ordered: Vec<&PendingEdit> = edits.iter().collect();
    // stable: kind first, then collection order; statement replacements run
    // back to front so earlier indices stay valid
    ordered.sort_by(|a, b| {
        a.edit
            .order()
            .cmp(&b.edit.order())
            .then_with(|| match (&a.edit, &b.edit) {
                (
                    SourceEdit::ReplaceVarDeclStatements {
                        target: ta,
                        selector: sa,
                        stmt: ia,
                        ..
                    },
                    SourceEdit::ReplaceVarDeclStatements {
                        target: tb,
                        selector: sb,
                        stmt: ib,
                        ..
                    },
                ) if ta == tb && sa == sb => ib.cmp(ia),
                _ => std::cmp::Ordering::Equal,
            })
    });

    for pe in ordered {
        if let Err(d) = apply_one(&mut out, pe) {
            diags.push(d);
        }
    }
    if !diags.is_empty() {
        return Err(diags);
    }
    for proto in out.units.iter_mut().flat_map(|u| u.prototypes.iter_mut()) {
        synthesize_for(proto);
    }
    Ok(out)
}

fn apply_one(program: &mut Program, pe: &PendingEdit) -> Result<(), Diagnostic> {
    let by = pe.metaobject.as_str();
    match &pe.edit {
        SourceEdit::AddMethod {
            target,
            text,
            anchor,
        } => {
            let member = parse_member_text(text, "generated")
                .map_err(|d| internal(by, format!("added method does not parse: {}", d.message)))?;
            let Member::Method(method) = member else {
                return Err(internal(by, "added text is not a method"));
            };
            if member_has_annotations(&Member::Method(method.clone())) {
                return Err(internal(by, "generated code may not carry annotations"));
            }
            let proto = program
                .prototype_mut(target)
                .ok_or_else(|| internal(by, format!("no prototype `{target}`")))?;
            if proto.method(&method.selector.text).is_some() {
                return Err(conflict(
                    by,
                    format!("`{}` already has a method `{}`", target, method.selector),
                ));
            }
            let at = match anchor {
                Anchor::End => None,
                Anchor::BeforeMethod(sel) => proto
                    .members
                    .iter()
                    .position(|m| matches!(m, Member::Method(m) if &m.selector.text == sel)),
                Anchor::BeforeField(name) => proto
                    .members
                    .iter()
                    .position(|m| matches!(m, Member::Field(f) if &f.name == name)),
            };
            match (anchor, at) {
                (Anchor::End, _) => proto.members.push(Member::Method(method)),
                (_, Some(i)) => proto.members.insert(i, Member::Method(method)),
                (_, None) => {
                    return Err(internal(
                        by,
                        format!("anchor {anchor:?} not found in `{target}`"),
                    ))
                }
            }
        }
        SourceEdit::RenameMethod { target, from, to } => {
            let proto = program
                .prototype_mut(target)
                .ok_or_else(|| internal(by, format!("no prototype `{target}`")))?;
            if proto.method(to).is_some() {
                return Err(conflict(
                    by,
                    format!("`{target}` already has a method `{to}`"),
                ));
            }
            let m = proto.method_mut(from).ok_or_else(|| {
                internal(
                    by,
                    format!("cannot rename missing method `{target}.{from}`"),
                )
            })?;
            let new_sel = Selector::parse(to);
            let groups = if new_sel.kind == SelectorKind::Keyword {
                new_sel.keywords().len()
            } else {
                0
            };
            if groups != m.params.len() {
                return Err(internal(
                    by,
                    format!("rename `{from}` -> `{to}` changes the keyword count"),
                ));
            }
            m.selector = new_sel;
        }
        SourceEdit::AddPrototype { package, text } => {
            let mut unit = parse_source(text, "generated").map_err(|d| {
                internal(by, format!("added prototype does not parse: {}", d.message))
            })?;
            if unit.prototypes.len() != 1 {
                return Err(internal(
                    by,
                    "added text must declare exactly one prototype",
                ));
            }
            let p = &unit.prototypes[0];
            if !p.annotations.is_empty() || p.members.iter().any(member_has_annotations) {
                return Err(internal(by, "generated code may not carry annotations"));
            }
            if program.prototype(&p.name).is_some() {
                return Err(conflict(
                    by,
                    format!("prototype `{}` already exists", p.name),
                ));
            }
            unit.package = package.clone();
            program.units.push(unit);
        }
        SourceEdit::ReplaceVarDeclStatements {
            target,
            selector,
            stmt,
            text,
        } => {
            let mut stmts = parse_statements(text, "generated").map_err(|d| {
                internal(
                    by,
                    format!("replacement statements do not parse: {}", d.message),
                )
            })?;
            if stmts_have_annotations(&stmts) {
                return Err(internal(by, "generated code may not carry annotations"));
            }
            let method = program
                .prototype_mut(target)
                .and_then(|p| p.method_mut(selector))
                .ok_or_else(|| internal(by, format!("no method `{target}.{selector}`")))?;
            let Some(Stmt::VarDecl(old)) = method.body.get(*stmt) else {
                return Err(internal(
                    by,
                    "replacement target is not a variable declaration",
                ));
            };
            let carried = old.annotations.clone();
            let name = old.name.clone();
            if let Some(Stmt::VarDecl(v)) = stmts
                .iter_mut()
                .find(|s| matches!(s, Stmt::VarDecl(v) if v.name == name))
            {
                v.annotations = carried;
            }
            method.body.splice(*stmt..=*stmt, stmts);
        }
    }
    Ok(())
}

/// Runs every consumed annotation's DSA2 hook over the frozen program.
pub fn run_phase_dsa2(program: &Program, metaobjects: &MetaobjectSet) -> Vec<Diagnostic> {
    let types = Types::new(program);
    let graph = OnceCell::new();
    let mut diags = Vec::new();
    for ann in collect_annotations(program, true) {
        let imports = unit_imports(program, &ann.origin);
        let Some(def) = metaobjects.find(imports, &ann.annotation.name) else {
            continue;
        };
        let Ok(site) = check_attachment(&ann, def) else {
            continue;
        };
        let view = FrozenView {
            types: &types,
            annotation: &ann,
            site,
            graph: &graph,
        };
        diags.extend(def.dsa2(&view));
    }
    diags
}

/// ATI followed by edit application. Rejects annotations in generated text.
pub fn expand(program: &Program, metaobjects: &MetaobjectSet) -> Result<Program, Vec<Diagnostic>> {
    let edits = run_phase_ati(program, metaobjects)?;
    apply_edits(program, &edits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parser::parse_source;
    use crate::lang::printer::print_unit;
    use crate::lang::synthesize_constructors;

    /// Adds a fixed method to the annotated prototype.
    struct Stamp;
    impl Metaobject for Stamp {
        fn name(&self) -> &'static str {
            "stamp"
        }
        fn attachable_to(&self) -> &'static [DeclKind] {
            &[DeclKind::PrototypeDec]
        }
        fn ati(&self, view: &CompilerView<'_>) -> Result<Vec<SourceEdit>, Vec<Diagnostic>> {
            Ok(vec![SourceEdit::AddMethod {
                target: view.site().proto().to_string(),
                text: "func stamp -> Int { return 1 }".into(),
                anchor: Anchor::End,
            }])
        }
    }

    /// Emits text that carries an annotation: must be rejected.
    struct Recursive;
    impl Metaobject for Recursive {
        fn name(&self) -> &'static str {
            "recursive"
        }
        fn attachable_to(&self) -> &'static [DeclKind] {
            &[DeclKind::MethodDec]
        }
        fn ati(&self, view: &CompilerView<'_>) -> Result<Vec<SourceEdit>, Vec<Diagnostic>> {
            Ok(vec![SourceEdit::AddMethod {
                target: view.site().proto().to_string(),
                text: "@recursive func again { }".into(),
                anchor: Anchor::End,
            }])
        }
    }

    fn set() -> MetaobjectSet {
        let mut s = MetaobjectSet::new();
        s.register(IMPLICIT_PACKAGE, Box::new(Stamp));
        s.register("meta", Box::new(Recursive));
        s
    }

    fn program(src: &str) -> Program {
        let mut u = parse_source(src, "A.cyn").unwrap();
        synthesize_constructors(&mut u);
        Program::new(vec![u])
    }

    #[test]
    fn no_annotations_no_edits() {
        let p = program("object A\n func f { }\nend");
        assert!(run_phase_ati(&p, &set()).unwrap().is_empty());
        assert_eq!(apply_edits(&p, &[]).unwrap(), p);
    }

    #[test]
    fn member_position_annotation_floats_to_prototype() {
        let p = program("object A\n @stamp\n func f { }\nend");
        let edits = run_phase_ati(&p, &set()).unwrap();
        assert_eq!(edits.len(), 1);
        let out = apply_edits(&p, &edits).unwrap();
        assert!(out.prototype("A").unwrap().method("stamp").is_some());
        // consumed annotation is kept but not printed
        assert!(!print_unit(&out.units[0]).contains("@stamp"));
        assert!(out.prototype("A").unwrap().method("f").unwrap().annotations[0].inert);
    }

    #[test]
    fn wrong_site_names_allowed_kinds() {
        let p = program("import meta\n@recursive\nobject A\n func f { }\nend");
        let err = run_phase_ati(&p, &set()).unwrap_err();
        assert!(err[0]
            .message
            .contains("cannot be attached to a PROTOTYPE_DEC"));
        assert!(err[0].message.contains("METHOD_DEC"));
    }

    #[test]
    fn generated_annotations_are_rejected() {
        let p = program("import meta\nobject A\n @recursive\n func f { }\nend");
        let edits = run_phase_ati(&p, &set()).unwrap();
        let err = apply_edits(&p, &edits).unwrap_err();
        assert!(err[0].message.contains("may not carry annotations"));
        assert!(err[0].message.contains("`recursive`"));
    }

    #[test]
    fn colliding_add_method_is_an_error() {
        let p = program("object A\n func stamp -> Int { return 2 }\nend");
        let edits = vec![PendingEdit {
            metaobject: "stamp".into(),
            edit: SourceEdit::AddMethod {
                target: "A".into(),
                text: "func stamp -> Int { return 1 }".into(),
                anchor: Anchor::End,
            },
        }];
        let err = apply_edits(&p, &edits).unwrap_err();
        assert!(err[0].message.contains("conflict"));
    }

    #[test]
    fn rename_of_missing_selector_is_an_error() {
        let p = program("object A end");
        let edits = vec![PendingEdit {
            metaobject: "x".into(),
            edit: SourceEdit::RenameMethod {
                target: "A".into(),
                from: "nope".into(),
                to: "nopeX".into(),
            },
        }];
        let err = apply_edits(&p, &edits).unwrap_err();
        assert!(err[0].message.contains("missing method"));
    }

    #[test]
    fn unparsable_text_names_the_metaobject() {
        let p = program("object A end");
        let edits = vec![PendingEdit {
            metaobject: "broken".into(),
            edit: SourceEdit::AddMethod {
                target: "A".into(),
                text: "func { oops".into(),
                anchor: Anchor::End,
            },
        }];
        let err = apply_edits(&p, &edits).unwrap_err();
        assert!(err[0].message.contains("`broken`"));
    }
}
