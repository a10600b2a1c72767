//! The context after applying a decided sequence depends on that sequence
//! alone.

mod common;

use common::{log_model, log_program, program, LOG};
use cyrep_consensus::{FieldValue, SerializedAction};
use cyrep_runtime::replay;
use proptest::prelude::*;

fn log_action() -> impl Strategy<Value = SerializedAction> {
    prop_oneof![
        "[a-z0-9 ]{0,6}".prop_map(|s| SerializedAction {
            proto: "Logappend".into(),
            fields: vec![FieldValue::Str(s)],
        }),
        ("[a-z]{1,4}", -50i64..50).prop_map(|(s, n)| SerializedAction {
            proto: "Logputat".into(),
            fields: vec![FieldValue::Str(s), FieldValue::Int(n)],
        }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn replay_matches_model(seq in prop::collection::vec(log_action(), 0..30)) {
        let p = program(&[("Log", LOG), ("Program", &log_program(3))]);
        let a = replay(&p, &seq).unwrap();
        prop_assert_eq!(&a, &log_model(&seq));
        prop_assert_eq!(a, replay(&p, &seq).unwrap());
    }
}
