//! Compiler front end for a small prototype-based language with replication
//! annotations.
//!
//! The pipeline parses source units, synthesizes constructors, resolves names,
//! lets metaobjects contribute source-text edits, re-parses and merges those
//! edits, and finally runs post-expansion checks such as the determinism
//! analysis in [`determinism`].

pub mod determinism;
pub mod diag;
pub mod lang;
pub mod mop;
pub mod pipeline;
pub mod replication;

pub use diag::{Diagnostic, Pos, Severity};
pub use pipeline::{compile, SourceFile};
pub use replication::standard_metaobjects;
