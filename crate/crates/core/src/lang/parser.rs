use crate::diag::{Diagnostic, Pos};

use super::ast::*;
use super::lexer::{tokenize, Token, TokenKind};

const RESERVED: &[&str] = &[
    "package", "import", "object", "extends", "end", "func", "var", "let", "return", "self",
    "override",
];

pub struct Parser {
    tokens: Vec<Token>,
    idx: usize,
    origin: String,
}

type PResult<T> = Result<T, Diagnostic>;

impl Parser {
    pub fn new(tokens: Vec<Token>, origin: impl Into<String>) -> Self {
        Parser {
            tokens,
            idx: 0,
            origin: origin.into(),
        }
    }

    fn peek(&self) -> &TokenKind {
        &self.tokens[self.idx].kind
    }

    fn peek_at(&self, n: usize) -> &TokenKind {
        let i = (self.idx + n).min(self.tokens.len() - 1);
        &self.tokens[i].kind
    }

    fn pos(&self) -> Pos {
        self.tokens[self.idx].pos.clone()
    }

    fn bump(&mut self) -> TokenKind {
        let k = self.tokens[self.idx].kind.clone();
        if self.idx + 1 < self.tokens.len() {
            self.idx += 1;
        }
        k
    }

    fn error(&self, expected: &str) -> Diagnostic {
        Diagnostic::error(format!("expected {expected}, found {}", self.peek()))
            .at(self.origin.clone(), self.pos())
    }

    fn eat(&mut self, kind: &TokenKind) -> bool {
        if self.peek() == kind {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, kind: TokenKind) -> PResult<()> {
        if self.eat(&kind) {
            Ok(())
        } else {
            Err(self.error(&kind.to_string()))
        }
    }

    fn at_word(&self, word: &str) -> bool {
        matches!(self.peek(), TokenKind::Ident(s) if s == word)
    }

    fn eat_word(&mut self, word: &str) -> bool {
        if self.at_word(word) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_word(&mut self, word: &str) -> PResult<()> {
        if self.eat_word(word) {
            Ok(())
        } else {
            Err(self.error(&format!("`{word}`")))
        }
    }

    fn ident(&mut self, what: &str) -> PResult<String> {
        match self.peek() {
            TokenKind::Ident(s) if !RESERVED.contains(&s.as_str()) => {
                let s = s.clone();
                self.bump();
                Ok(s)
            }
            _ => Err(self.error(what)),
        }
    }

    fn expect_eof(&self) -> PResult<()> {
        if *self.peek() == TokenKind::Eof {
            Ok(())
        } else {
            Err(self.error("end of input"))
        }
    }

    pub fn parse_unit(&mut self) -> PResult<SourceUnit> {
        let mut unit = SourceUnit {
            package: None,
            imports: Vec::new(),
            prototypes: Vec::new(),
            origin: self.origin.clone(),
        };
        if self.eat_word("package") {
            unit.package = Some(self.ident("package name")?);
            self.eat(&TokenKind::Semi);
        }
        while self.eat_word("import") {
            loop {
                unit.imports.push(self.ident("package name")?);
                if !self.eat(&TokenKind::Comma) {
                    break;
                }
            }
            self.eat(&TokenKind::Semi);
        }
        while *self.peek() != TokenKind::Eof {
            if self.at_word("package") {
                return Err(
                    Diagnostic::error("package declaration must precede the prototype")
                        .at(self.origin.clone(), self.pos()),
                );
            }
            unit.prototypes.push(self.parse_prototype()?);
        }
        Ok(unit)
    }

    fn parse_prototype(&mut self) -> PResult<PrototypeDecl> {
        let annotations = self.parse_annotations()?;
        let pos = self.pos();
        self.expect_word("object")?;
        let name = self.ident("prototype name")?;
        let extends = if self.eat_word("extends") {
            Some(self.ident("supertype name")?)
        } else {
            None
        };
        let braced = self.eat(&TokenKind::LBrace);
        let mut members = Vec::new();
        loop {
            if braced && self.eat(&TokenKind::RBrace) {
                break;
            }
            if !braced && self.eat_word("end") {
                break;
            }
            if *self.peek() == TokenKind::Eof {
                return Err(self.error(if braced { "`}`" } else { "`end`" }));
            }
            members.push(self.parse_member()?);
        }
        Ok(PrototypeDecl {
            name,
            extends,
            members,
            annotations,
            pos,
        })
    }

    fn parse_annotations(&mut self) -> PResult<Vec<AnnotationUse>> {
        let mut out = Vec::new();
        while *self.peek() == TokenKind::At {
            let pos = self.pos();
            self.bump();
            let name = self.ident("metaobject name")?;
            let mut args = Vec::new();
            if self.eat(&TokenKind::LParen) && !self.eat(&TokenKind::RParen) {
                loop {
                    let arg = match self.bump() {
                        TokenKind::Int(n) => AnnotationArg::Int(n),
                        TokenKind::Str(s) => AnnotationArg::Str(s),
                        TokenKind::Ident(s) => AnnotationArg::Ident(s),
                        TokenKind::Op(op) if op == "-" => match self.bump() {
                            TokenKind::Int(n) => AnnotationArg::Int(-n),
                            _ => return Err(self.error("integer literal")),
                        },
                        _ => return Err(self.error("annotation argument")),
                    };
                    args.push(arg);
                    if self.eat(&TokenKind::RParen) {
                        break;
                    }
                    self.expect(TokenKind::Comma)?;
                }
            }
            out.push(AnnotationUse {
                name,
                args,
                inert: false,
                pos,
            });
        }
        Ok(out)
    }

    pub fn parse_member(&mut self) -> PResult<Member> {
        let annotations = self.parse_annotations()?;
        let pos = self.pos();
        if self.at_word("func") || self.at_word("override") {
            let mut m = self.parse_method()?;
            m.annotations = annotations;
            return Ok(Member::Method(m));
        }
        let mutability = if self.eat_word("var") {
            Mutability::Var
        } else if self.eat_word("let") {
            Mutability::Let
        } else if matches!(self.peek(), TokenKind::Ident(_)) {
            Mutability::Implicit
        } else {
            return Err(self.error("field or method declaration"));
        };
        let type_name = self.parse_type()?;
        let name = self.ident("field name")?;
        self.eat(&TokenKind::Semi);
        Ok(Member::Field(FieldDecl {
            mutability,
            type_name,
            name,
            annotations,
            pos,
        }))
    }

    fn parse_type(&mut self) -> PResult<TypeName> {
        let name = self.ident("type name")?;
        let mut args = Vec::new();
        if self.eat(&TokenKind::Lt) {
            loop {
                args.push(self.parse_type()?);
                if self.eat(&TokenKind::Gt) {
                    break;
                }
                self.expect(TokenKind::Comma)?;
            }
        }
        Ok(TypeName { name, args })
    }

    fn parse_param(&mut self) -> PResult<Param> {
        let type_name = self.parse_type()?;
        let name = self.ident("parameter name")?;
        Ok(Param { type_name, name })
    }

    fn parse_method(&mut self) -> PResult<MethodDecl> {
        let is_override = self.eat_word("override");
        let pos = self.pos();
        self.expect_word("func")?;
        let (selector, params) = match self.peek().clone() {
            TokenKind::Keyword(_) => {
                let mut parts = Vec::new();
                let mut params = Vec::new();
                while let TokenKind::Keyword(kw) = self.peek().clone() {
                    self.bump();
                    parts.push(kw);
                    let mut group = Vec::new();
                    if matches!(self.peek(), TokenKind::Ident(_)) {
                        group.push(self.parse_param()?);
                        while self.eat(&TokenKind::Comma) {
                            group.push(self.parse_param()?);
                        }
                    }
                    params.push(group);
                }
                (Selector::keyword(&parts), params)
            }
            TokenKind::Ident(_) => (Selector::unary(self.ident("method name")?), Vec::new()),
            _ => return Err(self.error("method selector")),
        };
        let return_type = if self.eat(&TokenKind::Arrow) {
            Some(self.parse_type()?)
        } else {
            None
        };
        let body = self.parse_block()?;
        Ok(MethodDecl {
            selector,
            params,
            return_type,
            body,
            annotations: Vec::new(),
            is_override,
            synthesized: None,
            pos,
        })
    }

    fn parse_block(&mut self) -> PResult<Vec<Stmt>> {
        self.expect(TokenKind::LBrace)?;
        self.parse_statements_until(&TokenKind::RBrace)
    }

    fn parse_statements_until(&mut self, close: &TokenKind) -> PResult<Vec<Stmt>> {
        let mut body = Vec::new();
        loop {
            while self.eat(&TokenKind::Semi) {}
            if self.eat(close) {
                return Ok(body);
            }
            if *close == TokenKind::Eof && *self.peek() == TokenKind::Eof {
                return Ok(body);
            }
            body.push(self.parse_stmt()?);
            if !self.eat(&TokenKind::Semi) && self.peek() != close {
                return Err(self.error(&format!("`;` or {close}")));
            }
        }
    }

    fn parse_stmt(&mut self) -> PResult<Stmt> {
        let annotations = self.parse_annotations()?;
        let pos = self.pos();
        let mutability = if self.eat_word("var") {
            Some(Mutability::Var)
        } else if self.eat_word("let") {
            Some(Mutability::Let)
        } else {
            None
        };
        if let Some(mutability) = mutability {
            let typed = matches!(self.peek_at(1), TokenKind::Ident(_) | TokenKind::Lt);
            let type_name = if typed {
                Some(self.parse_type()?)
            } else {
                None
            };
            let name = self.ident("variable name")?;
            let init = if self.eat(&TokenKind::Assign) {
                Some(self.parse_expr()?)
            } else {
                None
            };
            if mutability == Mutability::Let && init.is_none() {
                return Err(
                    Diagnostic::error(format!("`let {name}` must be initialized"))
                        .at(self.origin.clone(), pos),
                );
            }
            return Ok(Stmt::VarDecl(VarDecl {
                mutability,
                type_name,
                name,
                init,
                annotations,
                pos,
            }));
        }
        if !annotations.is_empty() {
            return Err(Diagnostic::error(
                "annotation inside a method body must precede a variable declaration",
            )
            .at(self.origin.clone(), annotations[0].pos.clone()));
        }
        if self.eat_word("return") {
            let value = if matches!(self.peek(), TokenKind::Semi | TokenKind::RBrace) {
                None
            } else {
                Some(self.parse_expr()?)
            };
            return Ok(Stmt::Return(value, pos));
        }
        let expr = self.parse_expr()?;
        if self.eat(&TokenKind::Assign) {
            let target = match expr.kind {
                ExprKind::Ident(name) => AssignTarget::Name(name),
                ExprKind::SelfField(name) => AssignTarget::SelfField(name),
                _ => {
                    return Err(
                        Diagnostic::error("invalid assignment target").at(self.origin.clone(), pos)
                    );
                }
            };
            let value = self.parse_expr()?;
            return Ok(Stmt::Assign { target, value, pos });
        }
        Ok(Stmt::Expr(expr))
    }

    pub fn parse_expr(&mut self) -> PResult<Expr> {
        let pos = self.pos();
        let receiver = self.parse_binary()?;
        if !matches!(self.peek(), TokenKind::Keyword(_)) {
            return Ok(receiver);
        }
        let mut parts = Vec::new();
        let mut args = Vec::new();
        while let TokenKind::Keyword(kw) = self.peek().clone() {
            self.bump();
            parts.push(kw);
            let mut group = vec![self.parse_binary()?];
            while self.eat(&TokenKind::Comma) {
                group.push(self.parse_binary()?);
            }
            args.push(group);
        }
        Ok(Expr::new(
            ExprKind::Send {
                receiver: Box::new(receiver),
                selector: Selector::keyword(&parts),
                args,
            },
            pos,
        ))
    }

    fn parse_binary(&mut self) -> PResult<Expr> {
        let pos = self.pos();
        let mut lhs = self.parse_unary()?;
        while let TokenKind::Op(op) = self.peek().clone() {
            self.bump();
            let rhs = self.parse_unary()?;
            lhs = if op == "++" {
                Expr::new(ExprKind::Concat(Box::new(lhs), Box::new(rhs)), pos.clone())
            } else {
                Expr::new(
                    ExprKind::Send {
                        receiver: Box::new(lhs),
                        selector: Selector::binary(op),
                        args: vec![vec![rhs]],
                    },
                    pos.clone(),
                )
            };
        }
        Ok(lhs)
    }

    fn parse_unary(&mut self) -> PResult<Expr> {
        let pos = self.pos();
        let mut expr = self.parse_postfix()?;
        while let TokenKind::Ident(name) = self.peek().clone() {
            if RESERVED.contains(&name.as_str()) {
                break;
            }
            self.bump();
            expr = Expr::new(
                ExprKind::Send {
                    receiver: Box::new(expr),
                    selector: Selector::unary(name),
                    args: Vec::new(),
                },
                pos.clone(),
            );
        }
        Ok(expr)
    }

    fn parse_postfix(&mut self) -> PResult<Expr> {
        let pos = self.pos();
        let mut expr = self.parse_primary()?;
        while self.eat(&TokenKind::LBracket) {
            let index = self.parse_expr()?;
            self.expect(TokenKind::RBracket)?;
            expr = Expr::new(
                ExprKind::Index(Box::new(expr), Box::new(index)),
                pos.clone(),
            );
        }
        Ok(expr)
    }

    fn parse_primary(&mut self) -> PResult<Expr> {
        let pos = self.pos();
        let kind = match self.peek().clone() {
            TokenKind::Int(n) => {
                self.bump();
                ExprKind::Int(n)
            }
            TokenKind::Op(op) if op == "-" && matches!(self.peek_at(1), TokenKind::Int(_)) => {
                self.bump();
                match self.bump() {
                    TokenKind::Int(n) => ExprKind::Int(-n),
                    _ => unreachable!(),
                }
            }
            TokenKind::Str(s) => {
                self.bump();
                ExprKind::Str(s)
            }
            TokenKind::LParen => {
                self.bump();
                let inner = self.parse_expr()?;
                self.expect(TokenKind::RParen)?;
                return Ok(inner);
            }
            TokenKind::Ident(name) if name == "self" => {
                self.bump();
                if self.eat(&TokenKind::Dot) {
                    ExprKind::SelfField(self.ident("field name")?)
                } else {
                    ExprKind::SelfRef
                }
            }
            TokenKind::Ident(name) if !RESERVED.contains(&name.as_str()) => {
                self.bump();
                ExprKind::Ident(name)
            }
            _ => return Err(self.error("expression")),
        };
        Ok(Expr::new(kind, pos))
    }
}

fn parser_for(text: &str, origin: &str) -> PResult<Parser> {
    let tokens = tokenize(text).map_err(|d| d.with_origin(origin))?;
    Ok(Parser::new(tokens, origin))
}

/// Parses a whole source file.
pub fn parse_source(text: &str, origin: &str) -> PResult<SourceUnit> {
    let mut p = parser_for(text, origin)?;
    p.parse_unit()
}

/// Parses a single member declaration (method or field), as supplied by a metaobject.
pub fn parse_member_text(text: &str, origin: &str) -> PResult<Member> {
    let mut p = parser_for(text, origin)?;
    let m = p.parse_member()?;
    p.expect_eof()?;
    Ok(m)
}

/// Parses a `;`-separated statement sequence.
pub fn parse_statements(text: &str, origin: &str) -> PResult<Vec<Stmt>> {
    let mut p = parser_for(text, origin)?;
    p.parse_statements_until(&TokenKind::Eof)
}

pub fn parse_expr_text(text: &str, origin: &str) -> PResult<Expr> {
    let mut p = parser_for(text, origin)?;
    let e = p.parse_expr()?;
    p.expect_eof()?;
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    const BUILDING: &str = r#"package main
object Building
    func init: String name,
               String address {
         self.name = name;
         self.address = address
    }
    func name:    String name
         address: String address {
         self.name = name;
         self.address = address
    }
    func getName -> String { return name }
    func getAddress -> String {
        return address
    }
    var String name
    var String address
end
"#;

    #[test]
    fn building_has_four_methods_and_two_fields() {
        let unit = parse_source(BUILDING, "Building.cyn").unwrap();
        assert_eq!(unit.package.as_deref(), Some("main"));
        let b = &unit.prototypes[0];
        assert_eq!(b.name, "Building");
        let sels: Vec<_> = b.methods().map(|m| m.selector.text.as_str()).collect();
        assert_eq!(sels, ["init:", "name:address:", "getName", "getAddress"]);
        assert_eq!(b.fields().count(), 2);
        let init = b.method("init:").unwrap();
        assert_eq!(init.params.len(), 1);
        assert_eq!(init.params[0].len(), 2);
        let na = b.method("name:address:").unwrap();
        assert_eq!(na.params.len(), 2);
        assert_eq!(
            b.method("getName").unwrap().return_type,
            Some(TypeName::simple("String"))
        );
    }

    #[test]
    fn empty_prototype() {
        let unit = parse_source("object A end", "A.cyn").unwrap();
        let a = &unit.prototypes[0];
        assert_eq!(a.name, "A");
        assert_eq!(a.members.len(), 0);
    }

    #[test]
    fn annotation_binds_to_following_method() {
        let src = r#"package main
import treplica
object Info extends Context {
    var String text
    @treplicaAction
    func setText: String text {
        self.text = text;
    }
}
"#;
        let unit = parse_source(src, "Info.cyn").unwrap();
        assert_eq!(unit.imports, ["treplica"]);
        let info = &unit.prototypes[0];
        assert_eq!(info.extends.as_deref(), Some("Context"));
        assert!(info.field("text").unwrap().annotations.is_empty());
        let m = info.method("setText:").unwrap();
        assert_eq!(m.annotations.len(), 1);
        assert_eq!(m.annotations[0].name, "treplicaAction");
    }

    #[test]
    fn precedence_unary_binds_tighter_than_keyword() {
        let e = parse_expr_text("self getTreplica execute: action", "t").unwrap();
        let ExprKind::Send {
            receiver, selector, ..
        } = e.kind
        else {
            panic!()
        };
        assert_eq!(selector.text, "execute:");
        assert!(
            matches!(receiver.kind, ExprKind::Send { ref selector, .. } if selector.text == "getTreplica")
        );
    }

    #[test]
    fn comma_separated_keyword_args() {
        let e = parse_expr_text(r#"Person new: "Meg", 2"#, "t").unwrap();
        let ExprKind::Send { args, .. } = e.kind else {
            panic!()
        };
        assert_eq!(args.len(), 1);
        assert_eq!(args[0].len(), 2);
    }

    #[test]
    fn var_decl_with_annotation_and_index() {
        let stmts = parse_statements(
            r#"var local = "/var/tmp/magic" ++ args[1];
               @treplicaInit( 3, 200, local )
               var info = Info new;
               info setText: "text";"#,
            "t",
        )
        .unwrap();
        assert_eq!(stmts.len(), 3);
        let Stmt::VarDecl(v) = &stmts[1] else {
            panic!()
        };
        assert_eq!(v.name, "info");
        assert_eq!(
            v.annotations[0].args,
            vec![
                AnnotationArg::Int(3),
                AnnotationArg::Int(200),
                AnnotationArg::Ident("local".into())
            ]
        );
    }

    #[test]
    fn override_flag_and_generic_param() {
        let m = parse_member_text("override\nfunc executeOn: Context context { }", "t").unwrap();
        let Member::Method(m) = m else { panic!() };
        assert!(m.is_override);
        let m = parse_member_text("func run: Array<String> args { }", "t").unwrap();
        let Member::Method(m) = m else { panic!() };
        assert_eq!(m.params[0][0].type_name.to_string(), "Array<String>");
    }

    #[test]
    fn syntax_error_names_expected_and_found() {
        let err = parse_source("object A func { }", "A.cyn").unwrap_err();
        assert!(err.message.contains("expected"), "{}", err.message);
        assert!(err.message.contains("found"), "{}", err.message);
        assert_eq!(err.origin.as_deref(), Some("A.cyn"));
    }

    #[test]
    fn missing_semicolon_between_statements() {
        assert!(parse_statements("x = 1 y = 2", "t").is_err());
    }
}
