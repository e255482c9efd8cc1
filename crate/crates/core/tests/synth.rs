use pdfsift::features::{extract_from_bytes, feature_index};
use pdfsift::pdf::parse_document;
use pdfsift::synth::{
    generate_corpus, generate_in_memory, malicious_pdf, CorpusSpec, MaliciousTraits, MANIFEST,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn f(bytes: &[u8], name: &str) -> f64 {
    extract_from_bytes(bytes).values[feature_index(name).unwrap()]
}

#[test]
fn same_spec_same_bytes() {
    let spec = CorpusSpec::new(10, 10, 7);
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    let a = generate_corpus(&spec, dir_a.path()).unwrap();
    let b = generate_corpus(&spec, dir_b.path()).unwrap();
    assert_eq!(a.len(), 20);
    for ((pa, la), (pb, lb)) in a.iter().zip(&b) {
        assert_eq!(la, lb);
        assert_eq!(std::fs::read(pa).unwrap(), std::fs::read(pb).unwrap());
    }
    let manifest = std::fs::read_to_string(dir_a.path().join(MANIFEST)).unwrap();
    let lines: Vec<&str> = manifest.lines().collect();
    assert_eq!(lines[0], "path,label");
    assert_eq!(lines[1], "benign_00000.pdf,0");
    assert_eq!(lines[20], "malicious_00009.pdf,1");
    assert_ne!(
        generate_in_memory(&CorpusSpec::new(2, 2, 8)).unwrap(),
        generate_in_memory(&CorpusSpec::new(2, 2, 7)).unwrap()
    );
}

#[test]
fn benign_files_are_clean_and_valid() {
    for file in generate_in_memory(&CorpusSpec::new(200, 1, 3)).unwrap() {
        if file.label == 1 {
            continue;
        }
        let doc = parse_document(&file.bytes);
        assert!(doc.xref_ok, "{} {:?}", file.name, doc.parse_warnings);
        // Image streams use DCTDecode, which is recognised but not decoded;
        // incremental updates redefine the Info object.
        use pdfsift::pdf::ParseWarning::{DuplicateObject, UnsupportedFilter};
        assert!(
            doc.parse_warnings
                .iter()
                .all(|w| *w == UnsupportedFilter
                    || (*w == DuplicateObject && doc.eof_marker_count == 2)),
            "{} {:?}",
            file.name,
            doc.parse_warnings
        );
        for name in ["F_JS", "F_OPENA", "F_LAUNCH", "F_AA"] {
            assert_eq!(f(&file.bytes, name), 0.0, "{} {name}", file.name);
        }
        assert!(f(&file.bytes, "F_PGC") >= 2.0);
    }
}

#[test]
fn every_file_parses_totally() {
    let spec = CorpusSpec::new(50, 150, 11).with_overlap(0.3);
    for file in generate_in_memory(&spec).unwrap() {
        let doc = parse_document(&file.bytes);
        assert!(doc.objects.len() >= 5);
        assert!(pdfsift::pdf::count_pages(&doc) >= 1, "{}", file.name);
        assert!(extract_from_bytes(&file.bytes)
            .values
            .iter()
            .all(|v| v.is_finite()));
    }
}

#[test]
fn planted_traits_show_up_in_features() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let bytes = malicious_pdf(&mut rng, &MaliciousTraits::all());
    assert_eq!(f(&bytes, "F_JS"), 1.0);
    assert_eq!(f(&bytes, "F_OPENA"), 1.0);
    assert!(f(&bytes, "F_LAUNCH") >= 1.0);
    assert!(f(&bytes, "F_ENTRPMAX") > 7.5);
    assert!(f(&bytes, "F_KWOBFN") > 0.0);
    assert_eq!(f(&bytes, "F_XREFOK"), 0.0);
    assert!(f(&bytes, "F_PGC") >= 1.0);

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let bytes = malicious_pdf(&mut rng, &MaliciousTraits::default());
    assert_eq!(f(&bytes, "F_JS"), 0.0);
    assert_eq!(f(&bytes, "F_OPENA"), 0.0);
    assert_eq!(f(&bytes, "F_XREFOK"), 1.0);
    assert_eq!(f(&bytes, "F_KWOBFN"), 0.0);
}

fn js_rule_accuracy(overlap: f64) -> f64 {
    let spec = CorpusSpec::new(400, 400, 5).with_overlap(overlap);
    let files = generate_in_memory(&spec).unwrap();
    let hits = files
        .iter()
        .filter(|file| (f(&file.bytes, "F_JS") >= 0.5) == (file.label == 1))
        .count();
    hits as f64 / files.len() as f64
}

#[test]
fn overlap_controls_separability() {
    assert_eq!(js_rule_accuracy(0.0), 1.0);
    let acc = js_rule_accuracy(0.5);
    assert!(acc <= 0.80, "{acc}");
}

#[test]
fn class_ratio_follows_spec() {
    let spec = CorpusSpec::new(1000, 150, 1).with_overlap(0.1);
    let files = generate_in_memory(&spec).unwrap();
    let malicious = files.iter().filter(|f| f.label == 1).count() as f64;
    let ratio = malicious / files.len() as f64;
    // 11316 of 90000 training files in the reference corpus are malicious.
    assert!((ratio - 0.126).abs() < 0.005, "{ratio}");
    assert!((11316.0f64 / 90000.0 - 0.126).abs() < 0.001);
}

#[test]
fn rejects_bad_specs() {
    assert_eq!(
        generate_in_memory(&CorpusSpec::new(1, 1, 0).with_overlap(-0.1))
            .unwrap_err()
            .code(),
        "INVALID_FRACTION"
    );
    let dir = tempfile::tempdir().unwrap();
    let blocked = dir.path().join("file");
    std::fs::write(&blocked, b"x").unwrap();
    let err = generate_corpus(&CorpusSpec::new(1, 1, 0), &blocked.join("sub")).unwrap_err();
    assert_eq!(err.code(), "IO_ERROR");
    assert!(err.to_string().contains("sub"));
}
