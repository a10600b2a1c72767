//! Lexing, parsing, resolution and printing of the prototype language.

pub mod ast;
pub mod builtins;
pub mod constructors;
pub mod lexer;
pub mod parser;
pub mod printer;
pub mod resolve;

pub use ast::*;
pub use constructors::synthesize_constructors;
pub use lexer::tokenize;
pub use parser::{parse_source, parse_statements};
pub use printer::{print_prototype, print_unit};
pub use resolve::{resolve, resolve_declarations, Program, Types};
