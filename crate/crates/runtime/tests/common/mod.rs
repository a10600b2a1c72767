#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::Arc;

use cyrep_core::determinism::NonDetRegistry;
use cyrep_core::lang::Program;
use cyrep_core::mop::MetaobjectSet;
use cyrep_core::pipeline::{compile, SourceFile};
use cyrep_core::standard_metaobjects;

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn metaobjects() -> MetaobjectSet {
    standard_metaobjects(Arc::new(NonDetRegistry::defaults()))
}

pub fn fixture_sources(dir: &str) -> Vec<SourceFile> {
    let dir = fixtures().join(dir);
    let mut paths: Vec<PathBuf> = std::fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "cyn"))
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|p| {
            SourceFile::new(
                p.display().to_string(),
                std::fs::read_to_string(&p).unwrap(),
            )
        })
        .collect()
}

pub fn fixture(dir: &str) -> Program {
    compile(&fixture_sources(dir), &metaobjects()).unwrap_or_else(|d| panic!("{d:?}"))
}

/// `(prototype name, text)` pairs, each written to `<name>.cyn`.
pub fn program(files: &[(&str, &str)]) -> Program {
    let sources: Vec<SourceFile> = files
        .iter()
        .map(|(name, text)| SourceFile::new(format!("{name}.cyn"), *text))
        .collect();
    compile(&sources, &metaobjects()).unwrap_or_else(|d| panic!("{d:?}"))
}

pub const LOG: &str = r#"package main
import treplica
object Log extends Context {
    var String entries
    var Int count

    @treplicaAction
    func append: String s {
        self.entries = self.entries ++ s ++ ";";
        self.count = self.count + 1;
    }

    @treplicaAction
    func put: String s at: Int n {
        self.entries = self.entries ++ n asString ++ "=" ++ s ++ ";";
    }
}
"#;

pub fn log_program(replicas: u32) -> String {
    format!(
        "import treplica\nobject Program {{\n    func run: Array<String> args {{\n        var local = \"/tmp/cyrep-log\" ++ args[1];\n        @treplicaInit( {replicas}, 200, local )\n        var log = Log new;\n    }}\n}}\n"
    )
}

use cyrep_consensus::rng::SimRng;
use cyrep_consensus::{FieldValue, SerializedAction};
use cyrep_runtime::script::Literal;
use cyrep_runtime::ScriptCall;

/// `count` calls to `Log`, spread over replicas and time.
pub fn workload(seed: u64, replicas: u32, count: usize, span: u64) -> Vec<ScriptCall> {
    let mut rng = SimRng::new(seed);
    (0..count)
        .map(|i| {
            let time = rng.between(0, span);
            let replica = rng.between(0, u64::from(replicas) - 1) as u32;
            let word = format!("w{i}");
            if rng.chance(0.3) {
                ScriptCall {
                    time,
                    replica,
                    proto: "Log".into(),
                    selector: "put:at:".into(),
                    args: vec![Literal::Str(word), Literal::Int(rng.between(0, 99) as i64)],
                }
            } else {
                ScriptCall {
                    time,
                    replica,
                    proto: "Log".into(),
                    selector: "append:".into(),
                    args: vec![Literal::Str(word)],
                }
            }
        })
        .collect()
}

/// The action a scripted `Log` call turns into.
pub fn action_of(call: &ScriptCall) -> SerializedAction {
    let fields = call
        .args
        .iter()
        .map(|a| match a {
            Literal::Str(s) => FieldValue::Str(s.clone()),
            Literal::Int(n) => FieldValue::Int(*n),
        })
        .collect();
    let name = call
        .selector
        .split(':')
        .filter(|k| !k.is_empty())
        .collect::<String>();
    SerializedAction {
        proto: format!("{}{}", call.proto, name),
        fields,
    }
}

/// What `Log` looks like after applying `actions` in order, computed without
/// the interpreter.
pub fn log_model(actions: &[SerializedAction]) -> String {
    let mut entries = String::new();
    let mut count = 0;
    for a in actions {
        match (a.proto.as_str(), a.fields.as_slice()) {
            ("Logappend", [FieldValue::Str(s)]) => {
                entries.push_str(&format!("{s};"));
                count += 1;
            }
            ("Logputat", [FieldValue::Str(s), FieldValue::Int(n)]) => {
                entries.push_str(&format!("{n}={s};"));
            }
            _ => panic!("unexpected action {a}"),
        }
    }
    format!("Log entries=\"{entries}\" count={count}")
}

use cyrep_core::lang::resolve;
use cyrep_core::mop::expand;
use cyrep_core::pipeline::load;
use cyrep_core::replication::ActionNaming;
use cyrep_runtime::{Immediate, Interp, Value};

/// Expansion without the post-expansion checks, so that programs the
/// determinism check rejects can still be run.
pub fn expand_unchecked(sources: &[SourceFile]) -> Program {
    let mo = metaobjects();
    let loaded = load(sources, &mo).unwrap_or_else(|d| panic!("{d:?}"));
    let expanded = expand(&loaded, &mo).unwrap_or_else(|d| panic!("{d:?}"));
    let diags = resolve(&expanded, &mo);
    assert!(diags.is_empty(), "{diags:?}");
    expanded
}

/// An annotated method and the arguments to call it with.
#[derive(Debug, Clone)]
pub struct ActionSite {
    pub naming: ActionNaming,
    pub args: Vec<Value>,
}

pub fn action_sites(sources: &[SourceFile]) -> Vec<ActionSite> {
    let loaded = load(sources, &metaobjects()).unwrap_or_else(|d| panic!("{d:?}"));
    let mut out = Vec::new();
    for p in loaded.prototypes() {
        for m in p.methods() {
            if m.annotations.iter().any(|a| a.name == "treplicaAction") {
                let args = m
                    .all_params()
                    .enumerate()
                    .map(|(i, prm)| match prm.type_name.name.as_str() {
                        "String" => Value::Str(format!("arg{i}")),
                        _ => Value::Int(i as i64 + 7),
                    })
                    .collect();
                out.push(ActionSite {
                    naming: ActionNaming::new(&p.name, &m.selector),
                    args,
                });
            }
        }
    }
    out
}

/// Runs the program on one machine, then sends `selector` to the context.
/// Returns the context dump and the printed lines.
pub fn call_after_run(
    p: &Program,
    proto: &str,
    selector: &str,
    args: Vec<Value>,
) -> (String, Vec<String>) {
    let mut it = Interp::new(p, 0, 1);
    let mut b = Immediate::default();
    it.run_main(&["cyrep".into(), "0".into()], &mut b).unwrap();
    it.call_context(proto, selector, args, &mut b).unwrap();
    (it.context_dump().unwrap(), it.output().to_vec())
}

/// Every fixture directory holding an annotated method.
pub const ACTION_FIXTURES: &[&str] = &["replicated", "validate"];
