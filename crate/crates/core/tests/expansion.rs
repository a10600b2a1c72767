//! Expansion of the annotated fixture programs against hand-written goldens.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use cyrep_core::determinism::NonDetRegistry;
use cyrep_core::lang::{parse_source, synthesize_constructors, SourceUnit};
use cyrep_core::mop::{run_phase_ati, SourceEdit};
use cyrep_core::pipeline::{compile, expanded_files, load, SourceFile};
use cyrep_core::{standard_metaobjects, Diagnostic};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn read_dir(dir: &Path) -> Vec<SourceFile> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
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

fn defaults() -> cyrep_core::mop::MetaobjectSet {
    standard_metaobjects(Arc::new(NonDetRegistry::defaults()))
}

fn with_registry(text: &str) -> cyrep_core::mop::MetaobjectSet {
    standard_metaobjects(Arc::new(NonDetRegistry::parse(text, "registry").unwrap()))
}

fn src(name: &str, text: &str) -> SourceFile {
    SourceFile::new(format!("{name}.cyn"), text)
}

fn structural(text: &str) -> SourceUnit {
    let mut u = parse_source(text, "cmp").unwrap();
    synthesize_constructors(&mut u);
    u
}

fn assert_golden(dir: &str, expected: &[&str]) {
    let program = compile(&read_dir(&fixtures().join(dir)), &defaults()).unwrap();
    let files = expanded_files(&program);
    for name in expected {
        let want =
            std::fs::read_to_string(fixtures().join(dir).join("expected").join(name)).unwrap();
        let got = files
            .get(*name)
            .unwrap_or_else(|| panic!("{name} not generated"));
        assert_eq!(structural(got), structural(&want), "{name}:\n{got}");
    }
}

fn errors(sources: &[SourceFile], set: &cyrep_core::mop::MetaobjectSet) -> Vec<Diagnostic> {
    compile(sources, set).expect_err("expected diagnostics")
}

const INFO_HEAD: &str = "package main\nimport treplica\nobject Info extends Context\n var String text\n var Int number\n";

#[test]
fn init_metaobject_matches_generated_person() {
    assert_golden("person", &["Person.cyn"]);
}

#[test]
fn init_metaobject_emits_one_add_method() {
    let program = load(&read_dir(&fixtures().join("person")), &defaults()).unwrap();
    let edits = run_phase_ati(&program, &defaults()).unwrap();
    assert_eq!(edits.len(), 1);
    let SourceEdit::AddMethod { text, .. } = &edits[0].edit else {
        panic!("{edits:?}")
    };
    assert!(text.starts_with("func init: String name, Int age"));
}

#[test]
fn init_argument_order_decides_parameter_order() {
    let p = compile(
        &[src(
            "P",
            "object P\n @init(age, name)\n String name\n Int age\nend",
        )],
        &defaults(),
    )
    .unwrap();
    let init = p.prototype("P").unwrap().method("init:").unwrap();
    let names: Vec<&str> = init.all_params().map(|p| p.name.as_str()).collect();
    assert_eq!(names, ["age", "name"]);
}

#[test]
fn init_without_arguments() {
    let p = compile(
        &[src("P", "object P\n @init()\n func f { }\nend")],
        &defaults(),
    )
    .unwrap();
    let init = p.prototype("P").unwrap().method("init").unwrap();
    assert!(init.body.is_empty() && init.params.is_empty());
    assert!(p.prototype("P").unwrap().method("new").is_some());
}

#[test]
fn init_unknown_field() {
    let d = errors(
        &[src("P", "object P\n @init(nope)\n Int age\nend")],
        &defaults(),
    );
    assert!(d[0].message.contains("no field `nope`"), "{d:?}");
}

#[test]
fn treplica_fixtures_expand_to_goldens() {
    assert_golden(
        "replicated",
        &["Info.cyn", "InfosetText.cyn", "Program.cyn"],
    );
}

#[test]
fn treplica_fixtures_produce_four_edits() {
    let program = load(&read_dir(&fixtures().join("replicated")), &defaults()).unwrap();
    let edits = run_phase_ati(&program, &defaults()).unwrap();
    let mut kinds: Vec<&str> = edits
        .iter()
        .map(|e| match e.edit {
            SourceEdit::AddMethod { .. } => "AddMethod",
            SourceEdit::RenameMethod { .. } => "RenameMethod",
            SourceEdit::AddPrototype { .. } => "AddPrototype",
            SourceEdit::ReplaceVarDeclStatements { .. } => "ReplaceVarDeclStatements",
        })
        .collect();
    kinds.sort();
    assert_eq!(
        kinds,
        [
            "AddMethod",
            "AddPrototype",
            "RenameMethod",
            "ReplaceVarDeclStatements"
        ]
    );
}

#[test]
fn expanded_files_are_deterministic_and_stable() {
    let sources = read_dir(&fixtures().join("replicated"));
    let a = expanded_files(&compile(&sources, &defaults()).unwrap());
    let b = expanded_files(&compile(&sources, &defaults()).unwrap());
    assert_eq!(a, b);
    let names: Vec<&String> = a.keys().collect();
    assert_eq!(names, ["Info.cyn", "InfosetText.cyn", "Program.cyn"]);
    // the expanded program is a fixed point
    let again: Vec<SourceFile> = a
        .iter()
        .map(|(n, t)| SourceFile::new(n.clone(), t.clone()))
        .collect();
    assert_eq!(expanded_files(&compile(&again, &defaults()).unwrap()), a);
}

#[test]
fn annotation_free_input_is_printed_unchanged() {
    let sources = read_dir(&fixtures().join("building"));
    let files = expanded_files(&compile(&sources, &defaults()).unwrap());
    for s in &sources {
        let name = Path::new(&s.origin).file_name().unwrap().to_str().unwrap();
        assert_eq!(structural(&files[name]), structural(&s.text));
    }
}

#[test]
fn missing_import_is_rejected() {
    let text = std::fs::read_to_string(fixtures().join("replicated/Info.cyn"))
        .unwrap()
        .replace("import treplica\n", "");
    let d = errors(&[src("Info", &text)], &defaults());
    assert!(
        d.iter().any(|d| d.message.contains("treplicaAction")),
        "{d:?}"
    );
}

#[test]
fn treplica_action_on_prototype_is_rejected() {
    let d = errors(
        &[src(
            "Info",
            "import treplica\n@treplicaAction\nobject Info extends Context\n func f { }\nend",
        )],
        &defaults(),
    );
    assert!(
        d[0].message
            .contains("cannot be attached to a PROTOTYPE_DEC"),
        "{d:?}"
    );
    assert!(d[0].message.contains("METHOD_DEC"));
}

#[test]
fn zero_parameter_action() {
    let p = compile(
        &[src(
            "Info",
            &format!("{INFO_HEAD} @treplicaAction\n func clear {{ self.text = \"\"; }}\nend"),
        )],
        &defaults(),
    )
    .unwrap();
    let info = p.prototype("Info").unwrap();
    assert!(info.method("clear").is_some());
    assert!(info.method("clearTreplicaAction").is_some());
    let act = p.prototype("Infoclear").unwrap();
    assert_eq!(act.fields().count(), 0);
    assert!(act.method("init").unwrap().body.is_empty());
    let files = expanded_files(&p);
    assert!(files["Infoclear.cyn"].contains("obj clearTreplicaAction;"));
}

#[test]
fn two_keyword_action() {
    let p = compile(
        &[src(
            "Info",
            &format!("{INFO_HEAD} @treplicaAction\n func name: String n address: Int a {{ self.text = n; self.number = a; }}\nend"),
        )],
        &defaults(),
    )
    .unwrap();
    let act = p.prototype("Infonameaddress").unwrap();
    let fields: Vec<&str> = act.fields().map(|f| f.name.as_str()).collect();
    assert_eq!(fields, ["nVar", "aVar"]);
    let files = expanded_files(&p);
    assert!(files["Infonameaddress.cyn"].contains("obj nameTreplicaAction: nVar address: aVar;"));
    assert!(files["Info.cyn"].contains("var action = Infonameaddress new: n, a;"));
    assert!(p
        .prototype("Info")
        .unwrap()
        .method("nameTreplicaAction:address:")
        .is_some());
}

#[test]
fn wrapper_local_avoids_parameter_names() {
    let p = compile(
        &[src("Info", &format!("{INFO_HEAD} @treplicaAction\n func setText: String action {{ self.text = action; }}\nend"))],
        &defaults(),
    )
    .unwrap();
    assert!(expanded_files(&p)["Info.cyn"].contains("var action1 = InfosetText new: action;"));
}

#[test]
fn action_rules() {
    let cases = [
        (
            "object Info\n @treplicaAction\n func f { }\nend",
            "sub-prototype of Context",
        ),
        (
            "object Info extends Context\n @treplicaAction\n func f -> Int { return 1 }\nend",
            "must not return a value",
        ),
        (
            "object Info extends Context\n @treplicaAction\n func f: Array<String> xs { }\nend",
            "cannot be serialized",
        ),
    ];
    for (body, msg) in cases {
        let d = errors(
            &[src("Info", &format!("import treplica\n{body}"))],
            &defaults(),
        );
        assert!(d.iter().any(|d| d.message.contains(msg)), "{msg}: {d:?}");
    }
}

#[test]
fn colliding_action_names_are_rejected() {
    let d = errors(
        &[src(
            "Info",
            &format!("{INFO_HEAD} @treplicaAction\n func setText: String t {{ }}\n @treplicaAction\n func set: String a Text: String b {{ }}\nend"),
        )],
        &defaults(),
    );
    assert!(
        d.iter()
            .any(|d| d.message.contains("conflict") && d.message.contains("InfosetText")),
        "{d:?}"
    );
}

#[test]
fn treplica_init_rules() {
    let info = src("Info", &format!("{INFO_HEAD}end"));
    let prog = |body: &str| {
        src(
            "Program",
            &format!("import treplica\nobject Program\n func run {{\n{body}\n }}\nend"),
        )
    };
    let cases = [
        (
            "@treplicaInit(3, 200, \"/p\")\nvar Int x = 1;",
            "sub-prototype of Context",
        ),
        (
            "@treplicaInit(3, 200)\nvar info = Info new;",
            "expects 3 arguments",
        ),
        (
            "@treplicaInit(0, 200, \"/p\")\nvar info = Info new;",
            "positive integer",
        ),
        (
            "@treplicaInit(3, 200, later)\nvar info = Info new;\nvar later = \"x\";",
            "not in scope",
        ),
        (
            "var n = 4;\n@treplicaInit(3, 200, n)\nvar info = Info new;",
            "expected String",
        ),
    ];
    for (body, msg) in cases {
        let d = errors(&[info.clone(), prog(body)], &defaults());
        assert!(d.iter().any(|d| d.message.contains(msg)), "{msg}: {d:?}");
    }
    let d = errors(
        &[src(
            "Info",
            &format!("{INFO_HEAD} @treplicaInit(1, 2, \"p\")\n var Info other\nend"),
        )],
        &defaults(),
    );
    assert!(d[0].message.contains("local variable"), "{d:?}");
}

#[test]
fn treplica_init_fresh_variable() {
    let info = src("Info", &format!("{INFO_HEAD}end"));
    let prog = src(
        "Program",
        "import treplica\nobject Program\n func run {\n var treplicainfo = 1;\n @treplicaInit(1, 50, \"/tmp/t\")\n var info = Info new;\n }\nend",
    );
    let p = compile(&[info, prog], &defaults()).unwrap();
    let text = &expanded_files(&p)["Program.cyn"];
    assert!(text.contains("var treplicainfo1 = Treplica new;"), "{text}");
    assert!(
        text.contains("treplicainfo1 runMachine: info numberProcess: 1 rtt: 50 path: \"/tmp/t\";")
    );
}

#[test]
fn validation_fixture_reports_one_finding() {
    let sources = read_dir(&fixtures().join("validate"));
    let registry = std::fs::read_to_string(fixtures().join("validate/nondet.registry")).unwrap();
    let d = errors(&sources, &with_registry(&registry));
    assert_eq!(d.len(), 1, "{d:?}");
    assert_eq!(
        d[0].to_string(),
        "error: non-deterministic call reachable from Info.setTreplicaAction:: Info.setTreplicaAction: -> Info.ageInSeconds"
    );
    assert_eq!(
        d[0].call_path,
        ["Info.setTreplicaAction:", "Info.ageInSeconds"]
    );
}

#[test]
fn validation_fixture_under_default_registry() {
    let d = errors(&read_dir(&fixtures().join("validate")), &defaults());
    assert_eq!(d.len(), 1);
    assert_eq!(
        d[0].call_path,
        [
            "Info.setTreplicaAction:",
            "Info.ageInSeconds",
            "System.currentTimeMillis"
        ]
    );
}

#[test]
fn pure_setter_passes() {
    assert!(compile(&read_dir(&fixtures().join("replicated")), &defaults()).is_ok());
}

#[test]
fn two_actions_two_findings() {
    let d = errors(
        &[src(
            "Info",
            &format!("{INFO_HEAD} func stamp -> Int {{ return Random random }}\n @treplicaAction\n func a {{ self.number = stamp; }}\n @treplicaAction\n func b: Int x {{ self.number = x + stamp; }}\nend"),
        )],
        &defaults(),
    );
    assert_eq!(d.len(), 2, "{d:?}");
    assert_ne!(d[0].call_path, d[1].call_path);
}

#[test]
fn nested_action_is_rejected() {
    let d = errors(
        &[src(
            "Info",
            &format!("{INFO_HEAD} @treplicaAction\n func setNumber: Int n {{ self.number = n; }}\n @treplicaAction\n func setText: String t {{ self.text = t; self setNumber: 1; }}\nend"),
        )],
        &defaults(),
    );
    assert_eq!(d.len(), 1, "{d:?}");
    assert!(d[0].message.contains("another replicated action"), "{d:?}");
    assert!(d[0].message.contains("Info.setTextTreplicaAction:"));
}

#[test]
fn file_name_must_match_prototype() {
    let d = errors(&[src("Other", "object P end")], &defaults());
    assert!(d[0].message.contains("`P.cyn`"));
}
