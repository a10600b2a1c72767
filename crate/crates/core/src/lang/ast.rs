//! Syntax tree for the prototype language.
//!
//! Every node that carries a [`Pos`] still compares structurally: positions are
//! ignored by `PartialEq`, so a tree re-parsed from pretty-printed text equals
//! the original.

use std::fmt;

use crate::diag::Pos;

#[derive(Debug, Clone, PartialEq)]
pub struct SourceUnit {
    pub package: Option<String>,
    pub imports: Vec<String>,
    pub prototypes: Vec<PrototypeDecl>,
    /// File path, or `"generated"` for metaobject output.
    pub origin: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeDecl {
    pub name: String,
    pub extends: Option<String>,
    pub members: Vec<Member>,
    /// Annotations written before the `object` keyword.
    pub annotations: Vec<AnnotationUse>,
    pub pos: Pos,
}

impl PrototypeDecl {
    pub fn fields(&self) -> impl Iterator<Item = &FieldDecl> {
        self.members.iter().filter_map(|m| match m {
            Member::Field(f) => Some(f),
            Member::Method(_) => None,
        })
    }

    pub fn methods(&self) -> impl Iterator<Item = &MethodDecl> {
        self.members.iter().filter_map(|m| match m {
            Member::Method(m) => Some(m),
            Member::Field(_) => None,
        })
    }

    pub fn method(&self, selector: &str) -> Option<&MethodDecl> {
        self.methods().find(|m| m.selector.text == selector)
    }

    pub fn method_mut(&mut self, selector: &str) -> Option<&mut MethodDecl> {
        self.members.iter_mut().find_map(|m| match m {
            Member::Method(m) if m.selector.text == selector => Some(m),
            _ => None,
        })
    }

    pub fn field(&self, name: &str) -> Option<&FieldDecl> {
        self.fields().find(|f| f.name == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Member {
    Field(FieldDecl),
    Method(MethodDecl),
}

impl Member {
    pub fn annotations(&self) -> &[AnnotationUse] {
        match self {
            Member::Field(f) => &f.annotations,
            Member::Method(m) => &m.annotations,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mutability {
    Var,
    Let,
    /// No keyword; read-only like `let`.
    Implicit,
}

impl Mutability {
    pub fn is_mutable(self) -> bool {
        self == Mutability::Var
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TypeName {
    pub name: String,
    pub args: Vec<TypeName>,
}

impl TypeName {
    pub fn simple(name: impl Into<String>) -> Self {
        TypeName {
            name: name.into(),
            args: Vec::new(),
        }
    }
}

impl fmt::Display for TypeName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)?;
        if !self.args.is_empty() {
            f.write_str("<")?;
            for (i, a) in self.args.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write!(f, "{a}")?;
            }
            f.write_str(">")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldDecl {
    pub mutability: Mutability,
    pub type_name: TypeName,
    pub name: String,
    pub annotations: Vec<AnnotationUse>,
    pub pos: Pos,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SelectorKind {
    Unary,
    Binary,
    Keyword,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Selector {
    pub kind: SelectorKind,
    /// Canonical text: `getName`, `+`, `name:address:`.
    pub text: String,
}

impl Selector {
    pub fn unary(text: impl Into<String>) -> Self {
        Selector {
            kind: SelectorKind::Unary,
            text: text.into(),
        }
    }

    pub fn binary(text: impl Into<String>) -> Self {
        Selector {
            kind: SelectorKind::Binary,
            text: text.into(),
        }
    }

    pub fn keyword<S: AsRef<str>>(parts: &[S]) -> Self {
        Selector {
            kind: SelectorKind::Keyword,
            text: parts.iter().map(AsRef::as_ref).collect(),
        }
    }

    /// Builds a selector from canonical text, classifying it by shape.
    pub fn parse(text: &str) -> Self {
        if text.ends_with(':') {
            Selector {
                kind: SelectorKind::Keyword,
                text: text.to_string(),
            }
        } else if text.chars().all(|c| "+-*/<>=!%&|".contains(c)) {
            Selector::binary(text)
        } else {
            Selector::unary(text)
        }
    }

    /// The keyword parts (`["name:", "address:"]`); empty for non-keyword selectors.
    pub fn keywords(&self) -> Vec<&str> {
        if self.kind != SelectorKind::Keyword {
            return Vec::new();
        }
        let mut out = Vec::new();
        let mut start = 0;
        for (i, c) in self.text.char_indices() {
            if c == ':' {
                out.push(&self.text[start..=i]);
                start = i + 1;
            }
        }
        out
    }
}

impl fmt::Display for Selector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub type_name: TypeName,
    pub name: String,
}

/// How a compiler-added method behaves when executed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Synthesized {
    /// `new`/`new:` allocating an object and forwarding to the named `init` selector.
    Constructor { init: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodDecl {
    pub selector: Selector,
    /// One parameter group per keyword; empty for unary methods.
    pub params: Vec<Vec<Param>>,
    pub return_type: Option<TypeName>,
    pub body: Vec<Stmt>,
    pub annotations: Vec<AnnotationUse>,
    pub is_override: bool,
    /// Set for methods the compiler adds to its internal representation only.
    pub synthesized: Option<Synthesized>,
    pub pos: Pos,
}

impl MethodDecl {
    pub fn all_params(&self) -> impl Iterator<Item = &Param> {
        self.params.iter().flatten()
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(Vec::len).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Stmt {
    VarDecl(VarDecl),
    Assign {
        target: AssignTarget,
        value: Expr,
        pos: Pos,
    },
    Return(Option<Expr>, Pos),
    Expr(Expr),
}

impl Stmt {
    pub fn pos(&self) -> &Pos {
        match self {
            Stmt::VarDecl(v) => &v.pos,
            Stmt::Assign { pos, .. } | Stmt::Return(_, pos) => pos,
            Stmt::Expr(e) => &e.pos,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarDecl {
    pub mutability: Mutability,
    pub type_name: Option<TypeName>,
    pub name: String,
    pub init: Option<Expr>,
    pub annotations: Vec<AnnotationUse>,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AssignTarget {
    /// Bare name: a local, a parameter, or a field of `self`.
    Name(String),
    /// `self.name`
    SelfField(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    pub kind: ExprKind,
    pub pos: Pos,
}

impl Expr {
    pub fn new(kind: ExprKind, pos: Pos) -> Self {
        Expr { kind, pos }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprKind {
    Send {
        receiver: Box<Expr>,
        selector: Selector,
        /// One argument group per keyword; `[[rhs]]` for binary sends.
        args: Vec<Vec<Expr>>,
    },
    Ident(String),
    SelfRef,
    SelfField(String),
    Str(String),
    Int(i64),
    Concat(Box<Expr>, Box<Expr>),
    Index(Box<Expr>, Box<Expr>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AnnotationArg {
    Int(i64),
    Str(String),
    Ident(String),
}

impl fmt::Display for AnnotationArg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AnnotationArg::Int(n) => write!(f, "{n}"),
            AnnotationArg::Str(s) => write!(f, "{}", super::printer::quote(s)),
            AnnotationArg::Ident(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationUse {
    pub name: String,
    pub args: Vec<AnnotationArg>,
    /// Set once the annotation's metaobject has run; inert annotations stay
    /// in the tree but are neither printed nor expanded again.
    pub inert: bool,
    pub pos: Pos,
}
