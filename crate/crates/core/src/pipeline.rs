//! Source files in, expanded and checked program out.

use std::collections::BTreeMap;
use std::path::Path;

use crate::diag::{has_errors, Diagnostic};
use crate::lang::{
    parse_source, print_prototype, resolve, resolve_declarations, synthesize_constructors, Program,
    SourceUnit,
};
use crate::mop::{expand, run_phase_dsa2, MetaobjectSet};

/// One input file.
#[derive(Debug, Clone)]
pub struct SourceFile {
    pub origin: String,
    pub text: String,
}

impl SourceFile {
    pub fn new(origin: impl Into<String>, text: impl Into<String>) -> Self {
        SourceFile {
            origin: origin.into(),
            text: text.into(),
        }
    }
}

/// Parses every file, synthesizes constructors and checks declarations.
/// Method bodies are resolved only after expansion.
pub fn load(
    sources: &[SourceFile],
    metaobjects: &MetaobjectSet,
) -> Result<Program, Vec<Diagnostic>> {
    let mut units = Vec::new();
    let mut diags = Vec::new();
    for src in sources {
        match parse_source(&src.text, &src.origin) {
            Ok(mut u) => {
                check_file_name(&u, &mut diags);
                synthesize_constructors(&mut u);
                units.push(u);
            }
            Err(d) => diags.push(d),
        }
    }
    if !diags.is_empty() {
        return Err(diags);
    }
    let program = Program::new(units);
    let diags = resolve_declarations(&program, metaobjects);
    if has_errors(&diags) {
        return Err(diags);
    }
    Ok(program)
}

/// A `.cyn` file is named after the prototype it declares.
fn check_file_name(unit: &SourceUnit, diags: &mut Vec<Diagnostic>) {
    let path = Path::new(&unit.origin);
    if path.extension().and_then(|e| e.to_str()) != Some("cyn") {
        return;
    }
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("");
    if let Some(p) = unit.prototypes.first() {
        if p.name != stem {
            diags.push(
                Diagnostic::error(format!(
                    "prototype `{}` must be declared in a file named `{}.cyn`",
                    p.name, p.name
                ))
                .at(unit.origin.clone(), p.pos.clone()),
            );
        }
    }
}

/// Parse, resolve, expand, re-resolve, then the post-freeze checks.
pub fn compile(
    sources: &[SourceFile],
    metaobjects: &MetaobjectSet,
) -> Result<Program, Vec<Diagnostic>> {
    let program = load(sources, metaobjects)?;
    let expanded = expand(&program, metaobjects)?;
    let diags = resolve(&expanded, metaobjects);
    if has_errors(&diags) {
        return Err(diags);
    }
    let diags = run_phase_dsa2(&expanded, metaobjects);
    if has_errors(&diags) {
        return Err(diags);
    }
    Ok(expanded)
}

/// One `<Prototype>.cyn` text per prototype, keyed by file name.
pub fn expanded_files(program: &Program) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    for unit in &program.units {
        for proto in &unit.prototypes {
            let mut text = String::new();
            if let Some(pkg) = &unit.package {
                text.push_str(&format!("package {pkg}\n"));
            }
            for imp in &unit.imports {
                text.push_str(&format!("import {imp}\n"));
            }
            if !text.is_empty() {
                text.push('\n');
            }
            text.push_str(&print_prototype(proto));
            out.insert(format!("{}.cyn", proto.name), text);
        }
    }
    out
}
