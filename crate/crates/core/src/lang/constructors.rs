use super::ast::*;

/// Adds a `new`/`new:` method beside every `init`/`init:` method. The added
/// methods are marked synthesized: they exist only in memory and are never
/// printed. Running this twice adds nothing new.
pub fn synthesize_constructors(unit: &mut SourceUnit) {
    for proto in &mut unit.prototypes {
        synthesize_for(proto);
    }
}

pub fn synthesize_for(proto: &mut PrototypeDecl) {
    let mut added = Vec::new();
    for m in proto.methods() {
        let new_sel = match m.selector.text.as_str() {
            "init" => Selector::unary("new"),
            "init:" => Selector::keyword(&["new:"]),
            _ => continue,
        };
        if proto.method(&new_sel.text).is_some() {
            continue;
        }
        added.push(MethodDecl {
            selector: new_sel,
            params: m.params.clone(),
            return_type: Some(TypeName::simple(proto.name.clone())),
            body: Vec::new(),
            annotations: Vec::new(),
            is_override: false,
            synthesized: Some(Synthesized::Constructor {
                init: m.selector.text.clone(),
            }),
            pos: m.pos.clone(),
        });
    }
    proto.members.extend(added.into_iter().map(Member::Method));
}

/// True if the prototype declares any `init`/`init:`. Prototypes without one
/// get a default, parameterless `new` from the runtime.
pub fn has_init(proto: &PrototypeDecl) -> bool {
    proto
        .methods()
        .any(|m| m.selector.text == "init" || m.selector.text == "init:")
}
