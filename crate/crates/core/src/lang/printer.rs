//! Canonical source formatting. Parsing the output yields a tree equal to the
//! input (modulo positions); synthesized methods and inert annotations are
//! omitted because they only exist in the compiler's internal representation.

use std::fmt::Write;

use super::ast::*;

const INDENT: &str = "    ";

pub fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

pub fn print_unit(unit: &SourceUnit) -> String {
    let mut out = String::new();
    if let Some(pkg) = &unit.package {
        writeln!(out, "package {pkg}").unwrap();
    }
    for imp in &unit.imports {
        writeln!(out, "import {imp}").unwrap();
    }
    for (i, proto) in unit.prototypes.iter().enumerate() {
        if i > 0 || !out.is_empty() {
            out.push('\n');
        }
        out.push_str(&print_prototype(proto));
    }
    out
}

pub fn print_prototype(proto: &PrototypeDecl) -> String {
    let mut out = String::new();
    print_annotations(&mut out, &proto.annotations, "");
    write!(out, "object {}", proto.name).unwrap();
    if let Some(sup) = &proto.extends {
        write!(out, " extends {sup}").unwrap();
    }
    out.push('\n');
    let visible: Vec<&Member> = proto
        .members
        .iter()
        .filter(|m| !matches!(m, Member::Method(m) if m.synthesized.is_some()))
        .collect();
    for (i, member) in visible.iter().enumerate() {
        if i > 0
            && (matches!(member, Member::Method(_)) || matches!(visible[i - 1], Member::Method(_)))
        {
            out.push('\n');
        }
        out.push_str(&print_member(member, INDENT));
    }
    out.push_str("end\n");
    out
}

fn print_annotations(out: &mut String, anns: &[AnnotationUse], indent: &str) {
    for a in anns.iter().filter(|a| !a.inert) {
        write!(out, "{indent}@{}", a.name).unwrap();
        if !a.args.is_empty() {
            let args: Vec<String> = a.args.iter().map(ToString::to_string).collect();
            write!(out, "({})", args.join(", ")).unwrap();
        }
        out.push('\n');
    }
}

pub fn print_member(member: &Member, indent: &str) -> String {
    match member {
        Member::Field(f) => {
            let mut out = String::new();
            print_annotations(&mut out, &f.annotations, indent);
            let kw = match f.mutability {
                Mutability::Var => "var ",
                Mutability::Let => "let ",
                Mutability::Implicit => "",
            };
            writeln!(out, "{indent}{kw}{} {}", f.type_name, f.name).unwrap();
            out
        }
        Member::Method(m) => print_method(m, indent),
    }
}

pub fn print_method(m: &MethodDecl, indent: &str) -> String {
    let mut out = String::new();
    print_annotations(&mut out, &m.annotations, indent);
    if m.is_override {
        writeln!(out, "{indent}override").unwrap();
    }
    write!(out, "{indent}func {}", method_header(m)).unwrap();
    if let Some(rt) = &m.return_type {
        write!(out, " -> {rt}").unwrap();
    }
    if m.body.is_empty() {
        out.push_str(" { }\n");
        return out;
    }
    out.push_str(" {\n");
    let inner = format!("{indent}{INDENT}");
    for stmt in &m.body {
        out.push_str(&print_stmt(stmt, &inner));
    }
    writeln!(out, "{indent}}}").unwrap();
    out
}

/// Selector with typed parameters, e.g. `name: String name address: String address`.
pub fn method_header(m: &MethodDecl) -> String {
    match m.selector.kind {
        SelectorKind::Keyword => {
            let mut parts = Vec::new();
            for (kw, group) in m.selector.keywords().into_iter().zip(&m.params) {
                let ps: Vec<String> = group
                    .iter()
                    .map(|p| format!("{} {}", p.type_name, p.name))
                    .collect();
                if ps.is_empty() {
                    parts.push(kw.to_string());
                } else {
                    parts.push(format!("{kw} {}", ps.join(", ")));
                }
            }
            parts.join(" ")
        }
        _ => m.selector.text.clone(),
    }
}

pub fn print_stmt(stmt: &Stmt, indent: &str) -> String {
    let mut out = String::new();
    match stmt {
        Stmt::VarDecl(v) => {
            print_annotations(&mut out, &v.annotations, indent);
            let kw = if v.mutability == Mutability::Let {
                "let"
            } else {
                "var"
            };
            write!(out, "{indent}{kw} ").unwrap();
            if let Some(t) = &v.type_name {
                write!(out, "{t} ").unwrap();
            }
            out.push_str(&v.name);
            if let Some(init) = &v.init {
                write!(out, " = {}", print_expr(init)).unwrap();
            }
        }
        Stmt::Assign { target, value, .. } => {
            let lhs = match target {
                AssignTarget::Name(n) => n.clone(),
                AssignTarget::SelfField(n) => format!("self.{n}"),
            };
            write!(out, "{indent}{lhs} = {}", print_expr(value)).unwrap();
        }
        Stmt::Return(value, _) => match value {
            Some(v) => write!(out, "{indent}return {}", print_expr(v)).unwrap(),
            None => write!(out, "{indent}return").unwrap(),
        },
        Stmt::Expr(e) => write!(out, "{indent}{}", print_expr(e)).unwrap(),
    }
    out.push_str(";\n");
    out
}

#[derive(Clone, Copy, PartialEq, PartialOrd)]
enum Prec {
    Keyword,
    Binary,
    Unary,
    Primary,
}

fn prec_of(e: &Expr) -> Prec {
    match &e.kind {
        ExprKind::Send { selector, .. } => match selector.kind {
            SelectorKind::Keyword => Prec::Keyword,
            SelectorKind::Binary => Prec::Binary,
            SelectorKind::Unary => Prec::Unary,
        },
        ExprKind::Concat(..) => Prec::Binary,
        ExprKind::Int(n) if *n < 0 => Prec::Unary,
        _ => Prec::Primary,
    }
}

fn print_at(e: &Expr, min: Prec) -> String {
    let s = print_expr(e);
    if prec_of(e) < min {
        format!("({s})")
    } else {
        s
    }
}

pub fn print_expr(e: &Expr) -> String {
    match &e.kind {
        ExprKind::Ident(n) => n.clone(),
        ExprKind::SelfRef => "self".into(),
        ExprKind::SelfField(n) => format!("self.{n}"),
        ExprKind::Str(s) => quote(s),
        ExprKind::Int(n) => n.to_string(),
        ExprKind::Concat(l, r) => {
            format!(
                "{} ++ {}",
                print_at(l, Prec::Binary),
                print_at(r, Prec::Unary)
            )
        }
        ExprKind::Index(base, idx) => {
            format!("{}[{}]", print_at(base, Prec::Primary), print_expr(idx))
        }
        ExprKind::Send {
            receiver,
            selector,
            args,
        } => match selector.kind {
            SelectorKind::Unary => format!("{} {}", print_at(receiver, Prec::Unary), selector.text),
            SelectorKind::Binary => format!(
                "{} {} {}",
                print_at(receiver, Prec::Binary),
                selector.text,
                print_at(&args[0][0], Prec::Unary)
            ),
            SelectorKind::Keyword => {
                let mut out = print_at(receiver, Prec::Binary);
                for (kw, group) in selector.keywords().into_iter().zip(args) {
                    let parts: Vec<String> =
                        group.iter().map(|a| print_at(a, Prec::Binary)).collect();
                    write!(out, " {kw} {}", parts.join(", ")).unwrap();
                }
                out
            }
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parser::{parse_expr_text, parse_source};

    #[test]
    fn nested_keyword_argument_is_parenthesized() {
        let e = parse_expr_text("a foo: (b bar: c)", "t").unwrap();
        assert_eq!(print_expr(&e), "a foo: (b bar: c)");
        let e = parse_expr_text("(a + b) size", "t").unwrap();
        assert_eq!(print_expr(&e), "(a + b) size");
        let e = parse_expr_text("a - (b - c)", "t").unwrap();
        assert_eq!(print_expr(&e), "a - (b - c)");
    }

    #[test]
    fn empty_prototype_prints_with_end() {
        let unit = parse_source("object A { }", "A.cyn").unwrap();
        assert_eq!(print_unit(&unit), "object A\nend\n");
    }

    #[test]
    fn strings_are_escaped() {
        assert_eq!(quote("a\"b\\c\n"), r#""a\"b\\c\n""#);
    }
}
