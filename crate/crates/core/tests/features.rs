use pdfsift::features::{extract_from_bytes, FeatureCategory, FEATURES, FEATURE_COUNT};
use proptest::prelude::*;

const MINIMAL: &[u8] = include_bytes!("fixtures/minimal.pdf");
const MINIMAL_JS: &[u8] = include_bytes!("fixtures/minimal_js.pdf");

fn in_range(values: &[f64]) -> bool {
    values
        .iter()
        .zip(FEATURES.iter())
        .all(|(v, spec)| v.is_finite() && *v >= 0.0 && spec.max.is_none_or(|m| *v <= m))
}

#[test]
fn minimal_fixture_features() {
    let fv = extract_from_bytes(MINIMAL);
    assert_eq!(fv.get("F_OBJC"), Some(4.0));
    assert_eq!(fv.get("F_PGC"), Some(1.0));
    assert_eq!(fv.get("F_XREFOK"), Some(1.0));
    assert_eq!(fv.get("F_EOFN"), Some(1.0));
    assert_eq!(fv.get("F_JS"), Some(0.0));
    assert_eq!(fv.get("F_SIZE"), Some(MINIMAL.len() as f64));
    assert_eq!(fv.get("F_HDRVER"), Some(1.4));
    assert_eq!(fv.get("F_STRMN"), Some(1.0));
    assert_eq!(fv.get("F_BADOFF"), Some(0.0));
    assert_eq!(fv.get("F_UPDN"), Some(1.0));
    assert_eq!(fv.get("F_TRLSZ"), Some(2.0));
    assert_eq!(fv.get("F_REFN"), Some(4.0));
    assert!(in_range(&fv.values));
}

#[test]
fn javascript_and_open_action() {
    let fv = extract_from_bytes(MINIMAL_JS);
    assert_eq!(fv.get("F_JS"), Some(1.0));
    assert!(fv.get("F_JSN").unwrap() >= 1.0);
    assert_eq!(fv.get("F_OPENA"), Some(1.0));
    assert_eq!(fv.get("F_OBJC"), Some(5.0));
}

#[test]
fn obfuscated_javascript_name_still_counts() {
    let text = String::from_utf8_lossy(MINIMAL_JS)
        .replace("/S /JavaScript", "/S /J#61vaScript /J#61vaScript 1");
    let fv = extract_from_bytes(text.as_bytes());
    assert_eq!(fv.get("F_JS"), Some(1.0));
    assert!(fv.get("F_KWOBFN").unwrap() >= 2.0);
}

#[test]
fn appending_eof_marker() {
    let before = extract_from_bytes(MINIMAL);
    let mut bytes = MINIMAL.to_vec();
    bytes.extend_from_slice(b"%%EOF\n");
    let after = extract_from_bytes(&bytes);
    assert_eq!(
        after.get("F_EOFN").unwrap(),
        before.get("F_EOFN").unwrap() + 1.0
    );
    for (i, spec) in FEATURES.iter().enumerate() {
        if spec.category == FeatureCategory::Objects {
            assert_eq!(before.values[i], after.values[i], "{}", spec.name);
        }
    }
}

#[test]
fn deterministic() {
    assert_eq!(
        extract_from_bytes(MINIMAL_JS),
        extract_from_bytes(MINIMAL_JS)
    );
}

proptest! {
    #[test]
    fn finite_and_in_range(bytes in proptest::collection::vec(any::<u8>(), 0..1024)) {
        let fv = extract_from_bytes(&bytes);
        prop_assert_eq!(fv.values.len(), FEATURE_COUNT);
        prop_assert!(in_range(&fv.values));
    }

    #[test]
    fn mutated_fixture_in_range(pos in 0usize..457, byte in any::<u8>()) {
        let mut bytes = MINIMAL.to_vec();
        bytes[pos] = byte;
        prop_assert!(in_range(&extract_from_bytes(&bytes).values));
    }
}
