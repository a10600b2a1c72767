//! Prototypes and methods provided by the runtime rather than by source files.

use super::ast::TypeName;

/// Root of every prototype hierarchy.
pub const ANY: &str = "Any";
pub const CONTEXT: &str = "Context";
pub const ACTION: &str = "Action";
pub const TREPLICA: &str = "Treplica";
pub const STRING: &str = "String";
pub const INT: &str = "Int";
pub const LONG: &str = "Long";
pub const ARRAY: &str = "Array";
pub const SYSTEM: &str = "System";
pub const RANDOM: &str = "Random";
pub const NIL: &str = "Nil";

pub const RUN_MACHINE: &str = "runMachine:numberProcess:rtt:path:";

pub const ALL: &[&str] = &[
    ANY, CONTEXT, ACTION, TREPLICA, STRING, INT, LONG, ARRAY, SYSTEM, RANDOM, NIL,
];

/// Built-ins a user prototype may extend.
pub const EXTENSIBLE: &[&str] = &[ANY, CONTEXT, ACTION];

/// Field types an action may capture.
pub const SERIALIZABLE: &[&str] = &[STRING, INT, LONG];

pub fn is_builtin(name: &str) -> bool {
    ALL.contains(&name)
}

pub fn builtin_super(name: &str) -> Option<&'static str> {
    match name {
        ANY => None,
        _ if is_builtin(name) => Some(ANY),
        _ => None,
    }
}

#[derive(Debug)]
pub struct BuiltinMethod {
    pub proto: &'static str,
    pub selector: &'static str,
    pub params: usize,
    /// `None`: returns nothing useful. `Some("$self")`: returns the receiver's type.
    pub returns: Option<&'static str>,
}

const SELF_TYPE: &str = "$self";

macro_rules! builtin {
    ($proto:expr, $sel:expr, $params:expr, $ret:expr) => {
        BuiltinMethod {
            proto: $proto,
            selector: $sel,
            params: $params,
            returns: $ret,
        }
    };
}

pub const METHODS: &[BuiltinMethod] = &[
    builtin!(ANY, "println", 0, None),
    builtin!(ANY, "asString", 0, Some(STRING)),
    builtin!(ANY, "cast:", 1, Some(SELF_TYPE)),
    builtin!(INT, "+", 1, Some(INT)),
    builtin!(INT, "-", 1, Some(INT)),
    builtin!(INT, "*", 1, Some(INT)),
    builtin!(LONG, "+", 1, Some(LONG)),
    builtin!(LONG, "-", 1, Some(LONG)),
    builtin!(LONG, "*", 1, Some(LONG)),
    builtin!(STRING, "size", 0, Some(INT)),
    builtin!(ARRAY, "size", 0, Some(INT)),
    builtin!(CONTEXT, "getTreplica", 0, Some(TREPLICA)),
    builtin!(CONTEXT, "setTreplica:", 1, None),
    builtin!(ACTION, "executeOn:", 1, None),
    builtin!(TREPLICA, RUN_MACHINE, 4, None),
    builtin!(TREPLICA, "execute:", 1, None),
    builtin!(SYSTEM, "currentTimeMillis", 0, Some(LONG)),
    builtin!(RANDOM, "random", 0, Some(INT)),
];

/// Looks up a method declared directly on a built-in prototype.
pub fn method(proto: &str, selector: &str) -> Option<&'static BuiltinMethod> {
    METHODS
        .iter()
        .find(|m| m.proto == proto && m.selector == selector)
}

/// Resolves the declared return type of a built-in method for a receiver of
/// static type `receiver`.
pub fn return_type(m: &BuiltinMethod, receiver: &str) -> Option<TypeName> {
    match m.returns {
        Some(SELF_TYPE) => Some(TypeName::simple(receiver)),
        Some(t) => Some(TypeName::simple(t)),
        None => None,
    }
}

/// Non-deterministic built-in operations, shipped as the default registry.
pub const DEFAULT_NONDET: &[(&str, &str)] = &[(SYSTEM, "currentTimeMillis"), (RANDOM, "random")];
