use pdfsift::pdf::{
    count_pages, parse_document, parse_document_with, ObjectSource, ParseOptions, ParseWarning,
    PdfDocument,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const MINIMAL: &[u8] = include_bytes!("fixtures/minimal.pdf");
const MINIMAL_BAD_XREF: &[u8] = include_bytes!("fixtures/minimal_bad_xref.pdf");
const MINIMAL_NO_XREF: &[u8] = include_bytes!("fixtures/minimal_no_xref.pdf");
const PAGE_CYCLE: &[u8] = include_bytes!("fixtures/page_cycle.pdf");

fn check_invariants(doc: &PdfDocument, len: usize) {
    assert_eq!(doc.raw_size_bytes, len);
    for pair in doc.objects.windows(2) {
        assert!(pair[0].id < pair[1].id, "ids sorted and unique");
    }
    for obj in &doc.objects {
        let (s, e) = obj.byte_span;
        assert!(s < e && e <= len, "span {s}..{e} of {len}");
    }
}

#[test]
fn empty_input() {
    let doc = parse_document(b"");
    assert!(doc.objects.is_empty());
    assert_eq!(doc.header_version, None);
    assert!(!doc.xref_ok);
    assert_eq!(doc.eof_marker_count, 0);
    assert_eq!(doc.raw_size_bytes, 0);
    assert_eq!(
        doc.parse_warnings,
        vec![ParseWarning::NoHeader, ParseWarning::NoEof]
    );
}

#[test]
fn minimal_fixture() {
    let doc = parse_document(MINIMAL);
    check_invariants(&doc, MINIMAL.len());
    assert_eq!(doc.objects.len(), 4);
    assert!(doc.xref_ok);
    assert_eq!(doc.eof_marker_count, 1);
    assert_eq!(doc.header_version.as_deref(), Some("1.4"));
    assert!(doc.objects.iter().all(|o| o.source == ObjectSource::Xref));
    assert!(doc.parse_warnings.is_empty(), "{:?}", doc.parse_warnings);
    assert_eq!(count_pages(&doc), 1);
    let stream = doc.streams().next().unwrap();
    assert_eq!(
        stream.decoded_bytes.as_deref(),
        Some(&b"BT /F1 12 Tf 72 712 Td (Hello) Tj ET"[..])
    );
}

#[test]
fn corrupted_xref_recovers_by_scan() {
    let doc = parse_document(MINIMAL_BAD_XREF);
    check_invariants(&doc, MINIMAL_BAD_XREF.len());
    assert_eq!(doc.objects.len(), 4);
    assert!(!doc.xref_ok);
    assert!(doc.parse_warnings.contains(&ParseWarning::XrefBroken));
    assert!(doc.objects.iter().all(|o| o.source == ObjectSource::Scan));
    assert_eq!(count_pages(&doc), 1);
}

#[test]
fn removing_xref_keeps_object_multiset() {
    let with = parse_document(MINIMAL);
    let without = parse_document(MINIMAL_NO_XREF);
    assert!(!without.xref_ok);
    let ids = |d: &PdfDocument| {
        d.objects
            .iter()
            .map(|o| (o.id, o.value.clone()))
            .collect::<Vec<_>>()
    };
    assert_eq!(ids(&with), ids(&without));
}

#[test]
fn page_tree_cycle_is_guarded() {
    let doc = parse_document(PAGE_CYCLE);
    assert_eq!(count_pages(&doc), 1);
    assert!(doc.parse_warnings.contains(&ParseWarning::PageTreeCycle));
}

#[test]
fn zero_objects_zero_pages() {
    assert_eq!(count_pages(&parse_document(b"%PDF-1.7\n%%EOF\n")), 0);
}

#[test]
fn page_fallback_without_root() {
    let bytes =
        b"%PDF-1.3\n1 0 obj << /Type /Page >> endobj\n2 0 obj << /Type /Page >> endobj\n%%EOF";
    let doc = parse_document(bytes);
    assert_eq!(count_pages(&doc), 2);
}

#[test]
fn page_node_cap_trips() {
    let mut body = String::from("%PDF-1.4\n1 0 obj << /Type /Catalog /Pages 2 0 R >> endobj\n");
    body.push_str("2 0 obj << /Type /Pages /Kids [");
    for i in 3..50 {
        body.push_str(&format!("{i} 0 R "));
    }
    body.push_str("] >> endobj\n");
    for i in 3..50 {
        body.push_str(&format!("{i} 0 obj << /Type /Page >> endobj\n"));
    }
    body.push_str("trailer << /Root 1 0 R >>\n%%EOF");
    let opts = ParseOptions {
        max_page_nodes: 10,
        ..ParseOptions::default()
    };
    let doc = parse_document_with(body.as_bytes(), &opts);
    assert!(doc
        .parse_warnings
        .contains(&ParseWarning::PageTreeCapReached));
    assert_eq!(count_pages(&parse_document(body.as_bytes())), 47);
}

#[test]
fn duplicate_objects_resolve_to_last() {
    let bytes = b"%PDF-1.4\n1 0 obj (first) endobj\n1 0 obj (second) endobj\n%%EOF";
    let doc = parse_document(bytes);
    assert_eq!(doc.objects.len(), 1);
    assert_eq!(
        doc.objects[0].value,
        pdfsift::pdf::PdfValue::String(b"second".to_vec())
    );
    assert!(doc.parse_warnings.contains(&ParseWarning::DuplicateObject));
}

#[test]
fn incremental_update_trailers_merge_last_wins() {
    let mut bytes = MINIMAL.to_vec();
    bytes.extend_from_slice(
        b"5 0 obj << /Title (x) >> endobj\ntrailer\n<< /Size 6 /Root 1 0 R /Info 5 0 R >>\n%%EOF\n",
    );
    let doc = parse_document(&bytes);
    assert_eq!(doc.trailer_count, 2);
    let trailer = doc.trailer.as_ref().unwrap();
    assert_eq!(trailer.get("Size").and_then(|v| v.as_integer()), Some(6));
    assert!(doc.info_dict().is_some());
    assert_eq!(doc.eof_marker_count, 2);
}

#[test]
fn object_stream_is_expanded() {
    use flate2::write::ZlibEncoder;
    use flate2::Compression;
    use std::io::Write;
    let header = b"10 0 11 14 ";
    let body = b"<< /A 1 >>    << /JS (x) >>";
    let mut payload = header.to_vec();
    payload.extend_from_slice(body);
    let mut enc = ZlibEncoder::new(Vec::new(), Compression::default());
    enc.write_all(&payload).unwrap();
    let compressed = enc.finish().unwrap();
    let mut bytes = b"%PDF-1.5\n".to_vec();
    bytes.extend_from_slice(
        format!(
            "3 0 obj\n<< /Type /ObjStm /N 2 /First {} /Filter /FlateDecode /Length {} >>\nstream\n",
            header.len(),
            compressed.len()
        )
        .as_bytes(),
    );
    bytes.extend_from_slice(&compressed);
    bytes.extend_from_slice(b"\nendstream\nendobj\n%%EOF\n");
    let doc = parse_document(&bytes);
    let ids: Vec<u32> = doc.objects.iter().map(|o| o.id.number).collect();
    assert_eq!(ids, vec![3, 10, 11]);
    assert_eq!(doc.objects[1].source, ObjectSource::ObjectStream);

    // Undecodable container stays a single object with a warning.
    let broken = String::from_utf8_lossy(&bytes)
        .replace("/FlateDecode", "/LZWDecode")
        .into_bytes();
    let doc = parse_document(&broken);
    assert!(doc.parse_warnings.contains(&ParseWarning::ObjStmUnexpanded));
}

#[test]
fn xref_stream_is_followed() {
    use flate2::write::ZlibEncoder;
    use flate2::Compression;
    use std::io::Write;
    let mut bytes = b"%PDF-1.5\n".to_vec();
    let o1 = bytes.len();
    bytes.extend_from_slice(b"1 0 obj << /Type /Catalog /Pages 2 0 R >> endobj\n");
    let o2 = bytes.len();
    bytes.extend_from_slice(b"2 0 obj << /Type /Pages /Kids [] /Count 0 >> endobj\n");
    let o3 = bytes.len();
    let mut rows = Vec::new();
    for (kind, off, gen) in [
        (0u8, 0u32, 255u8),
        (1, o1 as u32, 0),
        (1, o2 as u32, 0),
        (1, o3 as u32, 0),
    ] {
        rows.push(kind);
        rows.extend_from_slice(&(off as u16).to_be_bytes());
        rows.push(gen);
    }
    let mut enc = ZlibEncoder::new(Vec::new(), Compression::default());
    enc.write_all(&rows).unwrap();
    let data = enc.finish().unwrap();
    bytes.extend_from_slice(
        format!(
            "3 0 obj << /Type /XRef /Size 4 /W [1 2 1] /Root 1 0 R /Filter /FlateDecode /Length {} >>\nstream\n",
            data.len()
        )
        .as_bytes(),
    );
    bytes.extend_from_slice(&data);
    bytes.extend_from_slice(format!("\nendstream\nendobj\nstartxref\n{o3}\n%%EOF\n").as_bytes());
    let doc = parse_document(&bytes);
    assert!(doc.xref_ok, "{:?}", doc.parse_warnings);
    assert_eq!(doc.objects.len(), 3);
    assert_eq!(doc.trailer_count, 1);
    let trailer = doc.trailer.as_ref().unwrap();
    assert!(trailer.contains_key("Root"));
    assert!(!trailer.contains_key("W"));
}

#[test]
fn encrypted_flag() {
    let bytes =
        b"%PDF-1.4\n1 0 obj << /Filter /Standard >> endobj\ntrailer << /Encrypt 1 0 R >>\n%%EOF";
    assert!(parse_document(bytes).is_encrypted());
    assert!(!parse_document(MINIMAL).is_encrypted());
}

#[test]
fn fuzz_totality_seeded() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let tokens: [&[u8]; 12] = [
        b"obj",
        b"endobj",
        b"stream\n",
        b"endstream",
        b"<<",
        b">>",
        b"[",
        b"]",
        b"/Type",
        b"1 0 R",
        b"startxref\n",
        b"xref\n0 1\n",
    ];
    for _ in 0..2_000 {
        let len = rng.gen_range(0..512);
        let mut bytes = Vec::with_capacity(len);
        while bytes.len() < len {
            if rng.gen_bool(0.3) {
                bytes.extend_from_slice(tokens[rng.gen_range(0..tokens.len())]);
            } else {
                bytes.push(rng.gen());
            }
        }
        let doc = parse_document(&bytes);
        check_invariants(&doc, bytes.len());
    }
}

proptest! {
    #[test]
    fn parse_is_total_and_idempotent(bytes in proptest::collection::vec(any::<u8>(), 0..1024)) {
        let a = parse_document(&bytes);
        let b = parse_document(&bytes);
        check_invariants(&a, bytes.len());
        prop_assert_eq!(a, b);
    }

    #[test]
    fn truncations_of_valid_fixture_are_total(cut in 0usize..457) {
        let doc = parse_document(&MINIMAL[..cut]);
        check_invariants(&doc, cut);
    }
}
