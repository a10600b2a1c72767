//! parse(print(ast)) == ast for generated trees.

use cyrep_core::lang::*;
use cyrep_core::mop::collect_annotations;
use cyrep_core::Pos;
use proptest::prelude::*;

const RESERVED: &[&str] = &[
    "package", "import", "object", "extends", "end", "func", "var", "let", "return", "self",
    "override",
];

fn lower_ident() -> impl Strategy<Value = String> {
    "[a-z][a-zA-Z0-9]{0,5}".prop_filter("reserved", |s| !RESERVED.contains(&s.as_str()))
}

fn upper_ident() -> impl Strategy<Value = String> {
    "[A-Z][a-zA-Z0-9]{0,5}"
}

fn type_name() -> impl Strategy<Value = TypeName> {
    prop_oneof![
        upper_ident().prop_map(TypeName::simple),
        Just(TypeName {
            name: "Array".into(),
            args: vec![TypeName::simple("String")],
        }),
    ]
}

fn e(kind: ExprKind) -> Expr {
    Expr::new(kind, Pos::default())
}

fn expr() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        lower_ident().prop_map(|n| e(ExprKind::Ident(n))),
        upper_ident().prop_map(|n| e(ExprKind::Ident(n))),
        Just(e(ExprKind::SelfRef)),
        lower_ident().prop_map(|n| e(ExprKind::SelfField(n))),
        "[ -~\n\t]{0,8}".prop_map(|s| e(ExprKind::Str(s))),
        (-50i64..1000).prop_map(|n| e(ExprKind::Int(n))),
    ];
    leaf.prop_recursive(4, 24, 3, |inner| {
        prop_oneof![
            (inner.clone(), lower_ident()).prop_map(|(r, s)| e(ExprKind::Send {
                receiver: Box::new(r),
                selector: Selector::unary(s),
                args: vec![],
            })),
            (
                inner.clone(),
                prop::sample::select(vec!["+", "-", "*"]),
                inner.clone()
            )
                .prop_map(|(l, op, r)| e(ExprKind::Send {
                    receiver: Box::new(l),
                    selector: Selector::binary(op),
                    args: vec![vec![r]],
                })),
            (
                inner.clone(),
                prop::collection::vec(
                    (lower_ident(), prop::collection::vec(inner.clone(), 1..3)),
                    1..3
                )
            )
                .prop_map(|(r, parts)| {
                    let kws: Vec<String> = parts.iter().map(|(k, _)| format!("{k}:")).collect();
                    e(ExprKind::Send {
                        receiver: Box::new(r),
                        selector: Selector::keyword(&kws),
                        args: parts.into_iter().map(|(_, a)| a).collect(),
                    })
                }),
            (inner.clone(), inner.clone())
                .prop_map(|(l, r)| e(ExprKind::Concat(Box::new(l), Box::new(r)))),
            (inner.clone(), inner).prop_map(|(b, i)| e(ExprKind::Index(Box::new(b), Box::new(i)))),
        ]
    })
}

fn annotation() -> impl Strategy<Value = AnnotationUse> {
    let arg = prop_oneof![
        (-5i64..500).prop_map(AnnotationArg::Int),
        "[a-z /]{0,6}".prop_map(AnnotationArg::Str),
        lower_ident().prop_map(AnnotationArg::Ident),
    ];
    (lower_ident(), prop::collection::vec(arg, 0..3)).prop_map(|(name, args)| AnnotationUse {
        name,
        args,
        inert: false,
        pos: Pos::default(),
    })
}

fn stmt() -> impl Strategy<Value = Stmt> {
    prop_oneof![
        (
            prop::collection::vec(annotation(), 0..2),
            any::<bool>(),
            prop::option::of(type_name()),
            lower_ident(),
            prop::option::of(expr())
        )
            .prop_map(|(annotations, is_let, type_name, name, init)| {
                // `let` needs an initializer
                let mutability = if is_let && init.is_some() {
                    Mutability::Let
                } else {
                    Mutability::Var
                };
                Stmt::VarDecl(VarDecl {
                    mutability,
                    type_name,
                    name,
                    init,
                    annotations,
                    pos: Pos::default(),
                })
            }),
        (any::<bool>(), lower_ident(), expr()).prop_map(|(self_field, n, value)| Stmt::Assign {
            target: if self_field {
                AssignTarget::SelfField(n)
            } else {
                AssignTarget::Name(n)
            },
            value,
            pos: Pos::default(),
        }),
        prop::option::of(expr()).prop_map(|v| Stmt::Return(v, Pos::default())),
        expr().prop_map(Stmt::Expr),
    ]
}

fn param() -> impl Strategy<Value = Param> {
    (type_name(), lower_ident()).prop_map(|(type_name, name)| Param { type_name, name })
}

fn method() -> impl Strategy<Value = MethodDecl> {
    let header = prop_oneof![
        lower_ident().prop_map(|s| (Selector::unary(s), vec![])),
        prop::collection::vec((lower_ident(), prop::collection::vec(param(), 1..3)), 1..3)
            .prop_map(|parts| {
                let kws: Vec<String> = parts.iter().map(|(k, _)| format!("{k}:")).collect();
                (
                    Selector::keyword(&kws),
                    parts.into_iter().map(|(_, p)| p).collect(),
                )
            }),
    ];
    (
        header,
        prop::option::of(type_name()),
        prop::collection::vec(stmt(), 0..4),
        prop::collection::vec(annotation(), 0..2),
        any::<bool>(),
    )
        .prop_map(
            |((selector, params), return_type, body, annotations, is_override)| MethodDecl {
                selector,
                params,
                return_type,
                body,
                annotations,
                is_override,
                synthesized: None,
                pos: Pos::default(),
            },
        )
}

fn member() -> impl Strategy<Value = Member> {
    prop_oneof![
        method().prop_map(Member::Method),
        (
            prop::sample::select(vec![Mutability::Var, Mutability::Let, Mutability::Implicit]),
            type_name(),
            lower_ident(),
            prop::collection::vec(annotation(), 0..2)
        )
            .prop_map(|(mutability, type_name, name, annotations)| {
                Member::Field(FieldDecl {
                    mutability,
                    type_name,
                    name,
                    annotations,
                    pos: Pos::default(),
                })
            }),
    ]
}

fn unit() -> impl Strategy<Value = SourceUnit> {
    (
        prop::option::of(lower_ident()),
        prop::collection::vec(lower_ident(), 0..3),
        upper_ident(),
        prop::option::of(upper_ident()),
        prop::collection::vec(annotation(), 0..2),
        prop::collection::vec(member(), 0..5),
    )
        .prop_map(
            |(package, imports, name, extends, annotations, members)| SourceUnit {
                package,
                imports,
                prototypes: vec![PrototypeDecl {
                    name,
                    extends,
                    members,
                    annotations,
                    pos: Pos::default(),
                }],
                origin: "gen.cyn".into(),
            },
        )
}

fn count_annotations(u: &SourceUnit) -> usize {
    let p = &u.prototypes[0];
    p.annotations.len()
        + p.members
            .iter()
            .map(|m| {
                m.annotations().len()
                    + match m {
                        Member::Method(m) => m
                            .body
                            .iter()
                            .map(|s| match s {
                                Stmt::VarDecl(v) => v.annotations.len(),
                                _ => 0,
                            })
                            .sum(),
                        Member::Field(_) => 0,
                    }
            })
            .sum::<usize>()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn print_then_parse_is_identity(u in unit()) {
        let text = print_unit(&u);
        let back = parse_source(&text, "gen.cyn")
            .unwrap_or_else(|d| panic!("{d}\n---\n{text}"));
        prop_assert_eq!(back, u);
    }

    #[test]
    fn expressions_round_trip(x in expr()) {
        let text = cyrep_core::lang::printer::print_expr(&x);
        let back = cyrep_core::lang::parser::parse_expr_text(&text, "e").unwrap();
        prop_assert_eq!(back, x);
    }

    #[test]
    fn constructor_synthesis_is_idempotent(mut u in unit()) {
        synthesize_constructors(&mut u);
        let once = u.clone();
        synthesize_constructors(&mut u);
        prop_assert_eq!(u, once);
    }

    #[test]
    fn every_annotation_has_exactly_one_site(u in unit()) {
        let written = count_annotations(&u);
        let text = print_unit(&u);
        let parsed = parse_source(&text, "gen.cyn").unwrap();
        let program = Program::new(vec![parsed]);
        let found = collect_annotations(&program, false);
        prop_assert_eq!(found.len(), written);
        // collection is a pure function of the tree
        let again = collect_annotations(&program, false);
        prop_assert_eq!(
            found.iter().map(|a| a.site.clone()).collect::<Vec<_>>(),
            again.iter().map(|a| a.site.clone()).collect::<Vec<_>>()
        );
    }
}

#[test]
fn building_and_empty_round_trip() {
    for src in [
        include_str!("../../../fixtures/building/Building.cyn"),
        "object A end",
        include_str!("../../../fixtures/replicated/expected/InfosetText.cyn"),
    ] {
        let u = parse_source(src, "x.cyn").unwrap();
        assert_eq!(parse_source(&print_unit(&u), "x.cyn").unwrap(), u);
    }
}
