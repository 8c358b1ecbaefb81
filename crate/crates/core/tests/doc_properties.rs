//! Property tests for the document substrate: diff/patch round trips, patch
//! purity, and pointer escape round trips on randomly generated inputs.

use proptest::prelude::*;
use tandem_core::doc::{apply_patch, deep_diff, patch_from_diff, DocValue, PatchOp, Pointer};

fn scalar() -> impl Strategy<Value = DocValue> {
    prop_oneof![
        Just(DocValue::Null),
        any::<bool>().prop_map(DocValue::Bool),
        (-1000i64..1000).prop_map(|n| DocValue::Num(n as f64)),
        (-10.0f64..10.0).prop_map(DocValue::Num),
        "[a-z]{0,6}".prop_map(DocValue::Text),
    ]
}

fn document() -> impl Strategy<Value = DocValue> {
    scalar().prop_recursive(4, 64, 6, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 0..6).prop_map(DocValue::Seq),
            prop::collection::btree_map("[a-z~/]{1,4}", inner, 0..6).prop_map(DocValue::Map),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn diff_of_identical_documents_is_empty(a in document()) {
        prop_assert!(deep_diff(&a, &a).is_empty());
    }

    #[test]
    fn diff_patch_round_trip(a in document(), b in document()) {
        let patch = patch_from_diff(&deep_diff(&a, &b));
        let rebuilt = apply_patch(&a, &patch).expect("synthesized patch applies");
        prop_assert_eq!(rebuilt, b);
    }

    #[test]
    fn apply_patch_leaves_input_untouched(a in document(), b in document()) {
        let snapshot = a.clone();
        let _ = apply_patch(&a, &patch_from_diff(&deep_diff(&a, &b)));
        prop_assert_eq!(a, snapshot);
    }

    #[test]
    fn pointer_escape_round_trip(segments in prop::collection::vec("[a-z~/0-9]{0,5}", 0..5)) {
        let ptr = Pointer::from_segments(segments.clone());
        let parsed = Pointer::parse(&ptr.to_string()).expect("serialized pointer parses");
        prop_assert_eq!(parsed.segments(), &segments[..]);
    }

    #[test]
    fn successful_add_is_resolvable(doc_ in document(), v in scalar(), key in "[a-z]{1,4}") {
        prop_assume!(doc_.as_map().is_some());
        let path = Pointer::from_segments([key]);
        if let Ok(after) = apply_patch(&doc_, &[PatchOp::Add { path: path.clone(), value: v.clone() }]) {
            prop_assert_eq!(path.resolve(&after).unwrap(), &v);
        }
    }

    #[test]
    fn diff_output_is_path_sorted(a in document(), b in document()) {
        let d = deep_diff(&a, &b);
        let paths: Vec<String> = d.iter().map(|e| e.path.to_string()).collect();
        let mut sorted = paths.clone();
        sorted.sort();
        prop_assert_eq!(paths, sorted);
    }
}
