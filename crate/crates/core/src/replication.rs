//! The built-in metaobjects: `init`, `treplicaAction` and `treplicaInit`.

use std::collections::BTreeSet;
use std::sync::Arc;

use crate::determinism::{check_action_method, nested_action_path, MethodRef, NonDetRegistry};
use crate::diag::Diagnostic;
use crate::lang::ast::*;
use crate::lang::builtins;
use crate::lang::printer::{method_header, print_stmt};
use crate::mop::{
    Anchor, AttachSite, CompilerView, DeclKind, FrozenView, Metaobject, MetaobjectSet, SourceEdit,
    IMPLICIT_PACKAGE,
};

/// Package activated by `import treplica`.
pub const TREPLICA_PACKAGE: &str = "treplica";

/// The metaobject set used by the toolchain. `registry` feeds the
/// determinism check of `treplicaAction`.
pub fn standard_metaobjects(registry: Arc<NonDetRegistry>) -> MetaobjectSet {
    let mut set = MetaobjectSet::new();
    set.register(IMPLICIT_PACKAGE, Box::new(InitMetaobject));
    set.register(TREPLICA_PACKAGE, Box::new(TreplicaAction { registry }));
    set.register(TREPLICA_PACKAGE, Box::new(TreplicaInit));
    set
}

/// Names derived from an annotated `(prototype, selector)` pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionNaming {
    pub owner: String,
    pub selector: String,
    pub action_proto: String,
    pub renamed: String,
}

impl ActionNaming {
    pub fn new(owner: &str, selector: &Selector) -> Self {
        let (action_proto, renamed) = match selector.kind {
            SelectorKind::Keyword => {
                let kws = selector.keywords();
                let bases: Vec<&str> = kws.iter().map(|k| k.trim_end_matches(':')).collect();
                let name = format!("{owner}{}", bases.concat());
                let mut renamed = format!("{}TreplicaAction:", bases[0]);
                for k in &kws[1..] {
                    renamed.push_str(k);
                }
                (name, renamed)
            }
            _ => (
                format!("{owner}{}", selector.text),
                format!("{}TreplicaAction", selector.text),
            ),
        };
        ActionNaming {
            owner: owner.to_string(),
            selector: selector.text.clone(),
            action_proto,
            renamed,
        }
    }
}

/// A name based on `base` that is not in `taken`.
fn fresh(base: &str, taken: &BTreeSet<String>) -> String {
    if !taken.contains(base) {
        return base.to_string();
    }
    (1..)
        .map(|i| format!("{base}{i}"))
        .find(|n| !taken.contains(n))
        .unwrap()
}

/// `@init(f1, f2, ...)`: a constructor storing the named fields in order.
pub struct InitMetaobject;

impl Metaobject for InitMetaobject {
    fn name(&self) -> &'static str {
        "init"
    }

    fn attachable_to(&self) -> &'static [DeclKind] {
        &[DeclKind::PrototypeDec]
    }

    fn ati(&self, view: &CompilerView<'_>) -> Result<Vec<SourceEdit>, Vec<Diagnostic>> {
        let proto = view.site().proto();
        let mut params = Vec::new();
        let mut diags = Vec::new();
        let mut seen = BTreeSet::new();
        for arg in &view.annotation().args {
            let AnnotationArg::Ident(name) = arg else {
                diags.push(view.error(format!("@init expects field names, found `{arg}`")));
                continue;
            };
            if !seen.insert(name.clone()) {
                diags.push(view.error(format!("field `{name}` listed twice in @init")));
                continue;
            }
            match view.field_type(proto, name) {
                Some(t) => params.push(format!("{t} {name}")),
                None => diags.push(view.error(format!("`{proto}` has no field `{name}`"))),
            }
        }
        if !diags.is_empty() {
            return Err(diags);
        }
        let text = if params.is_empty() {
            "func init { }".to_string()
        } else {
            let body: String = seen_in_order(&view.annotation().args)
                .map(|n| format!("self.{n} = {n}; "))
                .collect();
            format!("func init: {} {{ {body}}}", params.join(", "))
        };
        // the constructor takes the annotation's place
        let anchor = match view.lexical_site() {
            AttachSite::Method { selector, .. } => Anchor::BeforeMethod(selector.clone()),
            AttachSite::Field { field, .. } => Anchor::BeforeField(field.clone()),
            _ => match view.attached_prototype().and_then(|p| p.members.first()) {
                Some(Member::Method(m)) => Anchor::BeforeMethod(m.selector.text.clone()),
                Some(Member::Field(f)) => Anchor::BeforeField(f.name.clone()),
                None => Anchor::End,
            },
        };
        Ok(vec![SourceEdit::AddMethod {
            target: proto.to_string(),
            text,
            anchor,
        }])
    }
}

fn seen_in_order(args: &[AnnotationArg]) -> impl Iterator<Item = &str> {
    args.iter().filter_map(|a| match a {
        AnnotationArg::Ident(n) => Some(n.as_str()),
        _ => None,
    })
}

/// `@treplicaAction`: turns a method into a replicated action.
pub struct TreplicaAction {
    pub registry: Arc<NonDetRegistry>,
}

impl TreplicaAction {
    fn validate(&self, view: &CompilerView<'_>, owner: &str, m: &MethodDecl) -> Vec<Diagnostic> {
        let mut diags = Vec::new();
        let sel = &m.selector.text;
        if !view.is_subprototype(owner, builtins::CONTEXT) || view.prototype(owner).is_none() {
            diags.push(view.error(format!(
                "@treplicaAction requires `{owner}` to be a sub-prototype of Context"
            )));
        }
        if m.return_type.is_some() {
            diags.push(view.error(format!(
                "@treplicaAction method `{sel}` must not return a value: replicated execution cannot return a local result"
            )));
        }
        if matches!(sel.as_str(), "init" | "init:" | "new" | "new:") {
            diags.push(view.error("@treplicaAction cannot be attached to a constructor"));
        }
        for p in m.all_params() {
            if !p.type_name.args.is_empty()
                || !builtins::SERIALIZABLE.contains(&p.type_name.name.as_str())
            {
                diags.push(view.error(format!(
                    "parameter `{}` of `{sel}` has type {}, which cannot be serialized (allowed: String, Int, Long)",
                    p.name, p.type_name
                )));
            }
        }
        let naming = ActionNaming::new(owner, &m.selector);
        if view.prototype(&naming.action_proto).is_some()
            || builtins::is_builtin(&naming.action_proto)
        {
            diags.push(view.error(format!(
                "action prototype name `{}` for `{owner}.{sel}` collides with an existing prototype",
                naming.action_proto
            )));
        }
        if view
            .prototype(owner)
            .is_some_and(|p| p.method(&naming.renamed).is_some())
        {
            diags.push(view.error(format!(
                "renamed selector `{}` collides with an existing method of `{owner}`",
                naming.renamed
            )));
        }
        diags
    }
}

impl Metaobject for TreplicaAction {
    fn name(&self) -> &'static str {
        "treplicaAction"
    }

    fn attachable_to(&self) -> &'static [DeclKind] {
        &[DeclKind::MethodDec]
    }

    fn ati(&self, view: &CompilerView<'_>) -> Result<Vec<SourceEdit>, Vec<Diagnostic>> {
        let owner = view.site().proto().to_string();
        let m = view
            .attached_method()
            .ok_or_else(|| vec![view.error("@treplicaAction must precede a method")])?;
        let diags = self.validate(view, &owner, m);
        if !diags.is_empty() {
            return Err(diags);
        }
        let naming = ActionNaming::new(&owner, &m.selector);
        let params: Vec<&Param> = m.all_params().collect();
        let names: BTreeSet<String> = params.iter().map(|p| p.name.clone()).collect();

        // wrapper keeps the original selector
        let action_var = fresh("action", &names);
        let ctor = if params.is_empty() {
            format!("{} new", naming.action_proto)
        } else {
            let args: Vec<&str> = params.iter().map(|p| p.name.as_str()).collect();
            format!("{} new: {}", naming.action_proto, args.join(", "))
        };
        let wrapper = format!(
            "func {} {{\n    var {action_var} = {ctor};\n    self getTreplica execute: {action_var};\n}}",
            method_header(m)
        );

        let field = |p: &Param| format!("{}Var", p.name);
        let fields: BTreeSet<String> = params.iter().map(|p| field(p)).collect();
        let qualify = if names.iter().any(|n| fields.contains(n)) {
            "self."
        } else {
            ""
        };
        let mut proto = format!(
            "object {} extends {}\n",
            naming.action_proto,
            builtins::ACTION
        );
        for p in &params {
            proto.push_str(&format!("    var {} {}\n", p.type_name, field(p)));
        }
        if params.is_empty() {
            proto.push_str("    func init { }\n");
        } else {
            let decl: Vec<String> = params
                .iter()
                .map(|p| format!("{} {}", p.type_name, p.name))
                .collect();
            proto.push_str(&format!("    func init: {} {{\n", decl.join(", ")));
            for p in &params {
                proto.push_str(&format!("        {qualify}{} = {};\n", field(p), p.name));
            }
            proto.push_str("    }\n");
        }
        let call = match m.selector.kind {
            SelectorKind::Keyword => {
                let renamed = Selector::parse(&naming.renamed);
                let parts: Vec<String> = renamed
                    .keywords()
                    .into_iter()
                    .zip(&m.params)
                    .map(|(kw, group)| {
                        let args: Vec<String> = group.iter().map(field).collect();
                        format!("{kw} {}", args.join(", "))
                    })
                    .collect();
                parts.join(" ")
            }
            _ => naming.renamed.clone(),
        };
        proto.push_str(&format!(
            "    override\n    func executeOn: Context context {{\n        var obj = {owner} cast: context;\n        obj {call};\n    }}\nend\n"
        ));

        Ok(vec![
            SourceEdit::RenameMethod {
                target: owner.clone(),
                from: naming.selector.clone(),
                to: naming.renamed.clone(),
            },
            SourceEdit::AddMethod {
                target: owner.clone(),
                text: wrapper,
                anchor: Anchor::BeforeMethod(naming.renamed.clone()),
            },
            SourceEdit::AddPrototype {
                package: view.package_of(&owner),
                text: proto,
            },
        ])
    }

    fn dsa2(&self, view: &FrozenView<'_>) -> Vec<Diagnostic> {
        let AttachSite::Method { proto, selector } = view.site() else {
            return Vec::new();
        };
        let entry = MethodRef::new(proto, selector);
        let graph = view.call_graph();
        let mut out: Vec<Diagnostic> =
            check_action_method(view.types(), &entry, graph, &self.registry)
                .iter()
                .map(|f| f.to_diagnostic())
                .collect();
        if let Some(path) = nested_action_path(graph, &entry) {
            let rendered: Vec<String> = path.iter().map(ToString::to_string).collect();
            let mut d = view.error(format!(
                "action method {entry} may submit another replicated action while being applied: {}",
                rendered.join(" -> ")
            ));
            d.call_path = rendered;
            out.push(d);
        }
        out
    }
}

/// `@treplicaInit(numberProcess, rtt, path)` on a local holding a Context.
pub struct TreplicaInit;

impl Metaobject for TreplicaInit {
    fn name(&self) -> &'static str {
        "treplicaInit"
    }

    fn attachable_to(&self) -> &'static [DeclKind] {
        &[DeclKind::VarDec]
    }

    fn ati(&self, view: &CompilerView<'_>) -> Result<Vec<SourceEdit>, Vec<Diagnostic>> {
        let AttachSite::LocalVar {
            proto,
            selector,
            stmt,
        } = view.site()
        else {
            return Err(vec![view.error(
                "@treplicaInit must annotate a local variable declaration, not a field",
            )]);
        };
        let (decl, method, scope) = view
            .attached_local()
            .ok_or_else(|| vec![view.error("@treplicaInit must precede a variable declaration")])?;
        let mut diags = Vec::new();

        match view.local_type() {
            Some(t) if view.prototype(&t.name).is_some() && view.is_subprototype(&t.name, builtins::CONTEXT) => {}
            Some(t) => diags.push(view.error(format!(
                "@treplicaInit requires a variable whose type is a sub-prototype of Context; `{}` has type {t}",
                decl.name
            ))),
            None => diags.push(view.error(format!(
                "@treplicaInit: cannot determine the type of `{}`",
                decl.name
            ))),
        }

        let args = &view.annotation().args;
        if args.len() != 3 {
            diags.push(view.error(format!(
                "@treplicaInit expects 3 arguments (numberProcess, rtt, path), found {}",
                args.len()
            )));
            return Err(diags);
        }
        let positive = |a: &AnnotationArg, what: &str| match a {
            AnnotationArg::Int(n) if *n >= 1 => Ok(*n),
            other => Err(view.error(format!(
                "@treplicaInit: {what} must be a positive integer literal, found `{other}`"
            ))),
        };
        let n = positive(&args[0], "numberProcess")
            .map_err(|d| diags.push(d))
            .ok();
        let rtt = positive(&args[1], "rtt").map_err(|d| diags.push(d)).ok();
        let path = match &args[2] {
            AnnotationArg::Str(s) => Some(crate::lang::printer::quote(s)),
            AnnotationArg::Ident(name) => {
                let ty = match scope.get(name) {
                    Some(t) => t.clone(),
                    None => view.field_type(proto, name).cloned(),
                };
                match ty {
                    Some(t) if t.name == builtins::STRING && t.args.is_empty() => {
                        Some(name.clone())
                    }
                    Some(t) => {
                        diags.push(view.error(format!(
                            "@treplicaInit: path `{name}` has type {t}, expected String"
                        )));
                        None
                    }
                    None => {
                        diags.push(view.error(format!(
                            "@treplicaInit: `{name}` is not in scope at this declaration"
                        )));
                        None
                    }
                }
            }
            other => {
                diags.push(view.error(format!(
                    "@treplicaInit: path must be a String expression, found `{other}`"
                )));
                None
            }
        };
        if !diags.is_empty() {
            return Err(diags);
        }
        let (n, rtt, path) = (n.unwrap(), rtt.unwrap(), path.unwrap());

        let mut taken: BTreeSet<String> = method.all_params().map(|p| p.name.clone()).collect();
        for s in &method.body {
            if let Stmt::VarDecl(v) = s {
                taken.insert(v.name.clone());
            }
        }
        if let Some(p) = view.attached_prototype() {
            taken.extend(
                view.types()
                    .all_fields(&p.name)
                    .iter()
                    .map(|f| f.name.clone()),
            );
        }
        let tvar = fresh(&format!("treplica{}", decl.name), &taken);
        let var = &decl.name;

        let mut original = decl.clone();
        original.annotations.clear();
        let mut text = print_stmt(&Stmt::VarDecl(original), "");
        text.push_str(&format!(
            "var {tvar} = {treplica} new;\n{tvar} runMachine: {var} numberProcess: {n} rtt: {rtt} path: {path};\n{var} setTreplica: {tvar};\n",
            treplica = builtins::TREPLICA
        ));
        Ok(vec![SourceEdit::ReplaceVarDeclStatements {
            target: proto.clone(),
            selector: selector.clone(),
            stmt: *stmt,
            text,
        }])
    }
}
