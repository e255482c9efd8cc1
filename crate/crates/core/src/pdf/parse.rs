use std::collections::{BTreeMap, HashSet};

use super::filters::decode_stream_with_limit;
use super::lexer::{find, is_regular, is_whitespace, rfind, Lexer};
use super::pages::walk_page_tree;
use super::{
    DecodeStatus, Dictionary, ObjectId, ObjectSource, ParseOptions, ParseWarning, PdfDocument,
    PdfObject, PdfValue, StreamData,
};

const HEADER_WINDOW: usize = 1024;
const TRAILER_KEYS: [&str; 7] = ["Size", "Prev", "Root", "Encrypt", "Info", "ID", "XRefStm"];

/// Parse with default resource limits.
pub fn parse_document(bytes: &[u8]) -> PdfDocument {
    parse_document_with(bytes, &ParseOptions::default())
}

pub fn parse_document_with(bytes: &[u8], opts: &ParseOptions) -> PdfDocument {
    let mut warnings = Vec::new();

    let header_version = read_header(bytes);
    if header_version.is_none() {
        warnings.push(ParseWarning::NoHeader);
    }
    let eof_marker_count = count_occurrences(bytes, b"%%EOF");
    if eof_marker_count == 0 {
        warnings.push(ParseWarning::NoEof);
    }

    let xref = read_xref(bytes, opts);
    let scanned = scan_objects(bytes, opts, &mut warnings);

    let mut merged: BTreeMap<ObjectId, PdfObject> = BTreeMap::new();
    for obj in scanned {
        if merged.insert(obj.id, obj).is_some() {
            warnings.push(ParseWarning::DuplicateObject);
        }
    }
    for obj in xref.objects {
        merged.insert(obj.id, obj);
    }

    let xref_ok = match xref.state {
        XrefState::Missing => {
            if !merged.is_empty() {
                warnings.push(ParseWarning::XrefMissing);
            }
            false
        }
        XrefState::Broken => {
            warnings.push(ParseWarning::XrefBroken);
            false
        }
        XrefState::Ok => true,
    };

    expand_object_streams(&mut merged, &mut warnings);

    let (trailer, trailer_count) = merge_trailers(bytes, &merged);

    let mut doc = PdfDocument {
        objects: merged.into_values().collect(),
        trailer,
        header_version,
        xref_ok,
        eof_marker_count,
        raw_size_bytes: bytes.len(),
        parse_warnings: Vec::new(),
        trailer_count,
    };

    for obj in &doc.objects {
        if let PdfValue::Stream(s) = &obj.value {
            match s.status {
                DecodeStatus::Unsupported => warnings.push(ParseWarning::UnsupportedFilter),
                DecodeStatus::Failed => warnings.push(ParseWarning::DecodeFailed),
                DecodeStatus::Truncated => warnings.push(ParseWarning::DecodeTruncated),
                DecodeStatus::Decoded | DecodeStatus::NotAttempted => {}
            }
        }
    }
    warnings.extend(walk_page_tree(&doc, opts.max_page_nodes).warnings);
    doc.parse_warnings = warnings;
    doc
}

fn read_header(bytes: &[u8]) -> Option<String> {
    let window = &bytes[..bytes.len().min(HEADER_WINDOW)];
    let at = find(window, b"%PDF-", 0)? + 5;
    let version: String = bytes[at..]
        .iter()
        .take(8)
        .take_while(|b| b.is_ascii_digit() || **b == b'.')
        .map(|b| *b as char)
        .collect();
    Some(version)
}

fn count_occurrences(bytes: &[u8], needle: &[u8]) -> usize {
    let mut count = 0;
    let mut from = 0;
    while let Some(at) = find(bytes, needle, from) {
        count += 1;
        from = at + needle.len();
    }
    count
}

/// Token boundary check for keyword matches found by substring search.
fn bounded(bytes: &[u8], start: usize, len: usize) -> bool {
    let before_ok = start == 0 || !is_regular(bytes[start - 1]);
    let after_ok = bytes.get(start + len).is_none_or(|b| !is_regular(*b));
    before_ok && after_ok
}

/// Parse `N G obj <value> [stream ... endstream] endobj` starting at `start`.
/// `start` must point at the object number (leading whitespace is allowed).
pub(crate) fn parse_indirect_at(
    bytes: &[u8],
    start: usize,
    opts: &ParseOptions,
    warnings: &mut Vec<ParseWarning>,
) -> Option<PdfObject> {
    let mut lx = Lexer::new(bytes, start);
    lx.skip_ws();
    let header_start = lx.pos;
    let number = lx.read_unsigned()?;
    let generation = lx.read_unsigned()?;
    if number > u64::from(u32::MAX) || generation > u64::from(u16::MAX) {
        return None;
    }
    if !lx.eat_keyword(b"obj") {
        return None;
    }
    let id = ObjectId::new(number as u32, generation as u16);
    let mut value = lx.parse_value().unwrap_or(PdfValue::Null);

    if let PdfValue::Dictionary(dict) = &value {
        let mut probe = Lexer::new(bytes, lx.pos);
        if probe.eat_keyword(b"stream") {
            let mut data_start = probe.pos;
            if bytes.get(data_start) == Some(&b'\r') {
                data_start += 1;
            }
            if bytes.get(data_start) == Some(&b'\n') {
                data_start += 1;
            }
            let (raw_end, after) = locate_stream_end(bytes, data_start, dict, warnings);
            let stream = StreamData::new(dict.clone(), bytes[data_start..raw_end].to_vec());
            value = PdfValue::Stream(decode_stream_with_limit(stream, opts.max_decoded_bytes));
            lx.pos = after;
        }
    }

    if !lx.eat_keyword(b"endobj") {
        warnings.push(ParseWarning::MissingEndobj);
    }
    let end = lx.pos.max(header_start + 1).min(bytes.len());
    Some(PdfObject {
        id,
        value,
        byte_span: (header_start, end),
        source: ObjectSource::Scan,
    })
}

/// Returns (end of raw data, position after `endstream`).
fn locate_stream_end(
    bytes: &[u8],
    data_start: usize,
    dict: &Dictionary,
    warnings: &mut Vec<ParseWarning>,
) -> (usize, usize) {
    if let Some(len) = dict.get("Length").and_then(PdfValue::as_integer) {
        if len >= 0 {
            if let Some(end) = data_start.checked_add(len as usize) {
                if end <= bytes.len() {
                    let mut lx = Lexer::new(bytes, end);
                    if lx.eat_keyword(b"endstream") {
                        return (end, lx.pos);
                    }
                }
            }
        }
    }
    match find(bytes, b"endstream", data_start) {
        Some(at) => {
            let mut end = at;
            if end > data_start && bytes[end - 1] == b'\n' {
                end -= 1;
            }
            if end > data_start && bytes[end - 1] == b'\r' {
                end -= 1;
            }
            (end, at + b"endstream".len())
        }
        None => {
            warnings.push(ParseWarning::UnterminatedStream);
            (bytes.len(), bytes.len())
        }
    }
}

/// Find the start of an `N G obj` header whose `obj` keyword is at `obj_at`.
fn header_start_before(bytes: &[u8], obj_at: usize) -> Option<usize> {
    let mut i = obj_at;
    let skip_ws = |i: &mut usize| {
        let from = *i;
        while *i > 0 && is_whitespace(bytes[*i - 1]) {
            *i -= 1;
        }
        *i < from
    };
    let skip_digits = |i: &mut usize| {
        let from = *i;
        while *i > 0 && bytes[*i - 1].is_ascii_digit() {
            *i -= 1;
        }
        *i < from
    };
    if !skip_ws(&mut i) || !skip_digits(&mut i) || !skip_ws(&mut i) || !skip_digits(&mut i) {
        return None;
    }
    (i == 0 || !is_regular(bytes[i - 1])).then_some(i)
}

fn scan_objects(
    bytes: &[u8],
    opts: &ParseOptions,
    warnings: &mut Vec<ParseWarning>,
) -> Vec<PdfObject> {
    let mut out = Vec::new();
    let mut from = 0;
    while let Some(at) = find(bytes, b"obj", from) {
        from = at + 3;
        if !bounded(bytes, at, 3) {
            continue;
        }
        let Some(start) = header_start_before(bytes, at) else {
            continue;
        };
        if let Some(obj) = parse_indirect_at(bytes, start, opts, warnings) {
            from = from.max(obj.byte_span.1);
            out.push(obj);
        }
    }
    out
}

enum XrefState {
    Missing,
    Broken,
    Ok,
}

struct XrefResult {
    state: XrefState,
    objects: Vec<PdfObject>,
}

enum Entry {
    InUse { offset: u64, generation: u16 },
    Compressed,
    Free,
}

fn read_xref(bytes: &[u8], opts: &ParseOptions) -> XrefResult {
    let missing = XrefResult {
        state: XrefState::Missing,
        objects: Vec::new(),
    };
    let Some(sx) = rfind(bytes, b"startxref") else {
        return missing;
    };
    let mut lx = Lexer::new(bytes, sx + b"startxref".len());
    let broken = |objects| XrefResult {
        state: XrefState::Broken,
        objects,
    };
    let Some(first) = lx.read_unsigned() else {
        return broken(Vec::new());
    };

    let mut entries: BTreeMap<u32, Entry> = BTreeMap::new();
    let mut visited = HashSet::new();
    let mut next = Some(first);
    let mut consistent = true;
    let mut scratch = Vec::new();
    while let Some(offset) = next.take() {
        if !visited.insert(offset) || visited.len() > 1024 {
            consistent = false;
            break;
        }
        let Ok(offset) = usize::try_from(offset) else {
            consistent = false;
            break;
        };
        if offset >= bytes.len() {
            consistent = false;
            break;
        }
        let section = read_table(bytes, offset, &mut entries)
            .or_else(|| read_xref_stream(bytes, offset, opts, &mut entries, &mut scratch));
        match section {
            Some(prev) => next = prev,
            None => {
                consistent = false;
                break;
            }
        }
    }

    let mut objects = Vec::new();
    for (number, entry) in entries {
        if let Entry::InUse { offset, generation } = entry {
            let found = usize::try_from(offset)
                .ok()
                .filter(|o| *o > 0 && *o < bytes.len())
                .and_then(|o| parse_indirect_at(bytes, o, opts, &mut scratch));
            match found {
                Some(mut obj) if obj.id == ObjectId::new(number, generation) => {
                    obj.source = ObjectSource::Xref;
                    objects.push(obj);
                }
                _ => consistent = false,
            }
        }
    }
    if consistent {
        XrefResult {
            state: XrefState::Ok,
            objects,
        }
    } else {
        broken(objects)
    }
}

/// Classic `xref` table. Returns `Some(prev)` on success.
fn read_table(
    bytes: &[u8],
    offset: usize,
    entries: &mut BTreeMap<u32, Entry>,
) -> Option<Option<u64>> {
    let mut lx = Lexer::new(bytes, offset);
    if !lx.eat_keyword(b"xref") {
        return None;
    }
    loop {
        if lx.eat_keyword(b"trailer") {
            let trailer = lx.parse_value()?;
            let prev = trailer
                .as_dict()?
                .get("Prev")
                .and_then(PdfValue::as_integer)
                .and_then(|p| u64::try_from(p).ok());
            return Some(prev);
        }
        let start = lx.read_unsigned()?;
        let count = lx.read_unsigned()?;
        for i in 0..count {
            let off = lx.read_unsigned()?;
            let generation = lx.read_unsigned()?;
            lx.skip_ws();
            let kind = lx.peek_keyword();
            let entry = match kind {
                b"n" => Entry::InUse {
                    offset: off,
                    generation: u16::try_from(generation).ok()?,
                },
                b"f" => Entry::Free,
                _ => return None,
            };
            lx.pos += 1;
            let number = u32::try_from(start.checked_add(i)?).ok()?;
            entries.entry(number).or_insert(entry);
        }
    }
}

/// Cross-reference stream (`/Type /XRef`). Returns `Some(prev)` on success.
fn read_xref_stream(
    bytes: &[u8],
    offset: usize,
    opts: &ParseOptions,
    entries: &mut BTreeMap<u32, Entry>,
    scratch: &mut Vec<ParseWarning>,
) -> Option<Option<u64>> {
    let obj = parse_indirect_at(bytes, offset, opts, scratch)?;
    let stream = obj.value.as_stream()?;
    if !stream.dict.name_is("Type", "XRef") {
        return None;
    }
    let data = stream.decoded_bytes.as_ref()?;
    let widths: Vec<usize> = match stream.dict.get("W")? {
        PdfValue::Array(w) => w
            .iter()
            .map(|v| v.as_integer().and_then(|i| usize::try_from(i).ok()))
            .collect::<Option<_>>()?,
        _ => return None,
    };
    if widths.len() != 3 || widths.iter().any(|w| *w > 8) {
        return None;
    }
    let size = stream.dict.get("Size").and_then(PdfValue::as_integer)?;
    let index: Vec<i64> = match stream.dict.get("Index") {
        Some(PdfValue::Array(a)) => a.iter().map(PdfValue::as_integer).collect::<Option<_>>()?,
        _ => vec![0, size],
    };
    let row_len: usize = widths.iter().sum();
    if row_len == 0 || !index.len().is_multiple_of(2) {
        return None;
    }
    let field = |row: &[u8], from: usize, width: usize| -> u64 {
        row[from..from + width]
            .iter()
            .fold(0u64, |acc, b| acc << 8 | u64::from(*b))
    };
    let mut rows = data.chunks_exact(row_len);
    for pair in index.chunks(2) {
        let (start, count) = (u64::try_from(pair[0]).ok()?, u64::try_from(pair[1]).ok()?);
        for i in 0..count {
            let row = rows.next()?;
            let kind = if widths[0] == 0 {
                1
            } else {
                field(row, 0, widths[0])
            };
            let f2 = field(row, widths[0], widths[1]);
            let f3 = field(row, widths[0] + widths[1], widths[2]);
            let entry = match kind {
                0 => Entry::Free,
                1 => Entry::InUse {
                    offset: f2,
                    generation: u16::try_from(f3).ok()?,
                },
                2 => Entry::Compressed,
                _ => continue,
            };
            let number = u32::try_from(start.checked_add(i)?).ok()?;
            entries.entry(number).or_insert(entry);
        }
    }
    Some(
        stream
            .dict
            .get("Prev")
            .and_then(PdfValue::as_integer)
            .and_then(|p| u64::try_from(p).ok()),
    )
}

fn expand_object_streams(
    objects: &mut BTreeMap<ObjectId, PdfObject>,
    warnings: &mut Vec<ParseWarning>,
) {
    let containers: Vec<ObjectId> = objects
        .values()
        .filter(|o| {
            o.value
                .as_stream()
                .is_some_and(|s| s.dict.name_is("Type", "ObjStm"))
        })
        .map(|o| o.id)
        .collect();
    let mut expanded = Vec::new();
    for cid in containers {
        let container = &objects[&cid];
        let stream = container.value.as_stream().expect("filtered to streams");
        let Some(data) = stream.decoded_bytes.as_ref() else {
            warnings.push(ParseWarning::ObjStmUnexpanded);
            continue;
        };
        let n = stream
            .dict
            .get("N")
            .and_then(PdfValue::as_integer)
            .unwrap_or(0);
        let first = stream
            .dict
            .get("First")
            .and_then(PdfValue::as_integer)
            .unwrap_or(-1);
        let (Ok(n), Ok(first)) = (usize::try_from(n), usize::try_from(first)) else {
            warnings.push(ParseWarning::ObjStmUnexpanded);
            continue;
        };
        if first > data.len() {
            warnings.push(ParseWarning::ObjStmUnexpanded);
            continue;
        }
        let mut header = Lexer::new(&data[..first], 0);
        for _ in 0..n.min(data.len()) {
            let (Some(number), Some(rel)) = (header.read_unsigned(), header.read_unsigned()) else {
                break;
            };
            let (Ok(number), Ok(rel)) = (u32::try_from(number), usize::try_from(rel)) else {
                break;
            };
            let Some(at) = first.checked_add(rel).filter(|a| *a < data.len()) else {
                continue;
            };
            let Some(value) = Lexer::new(data, at).parse_value() else {
                continue;
            };
            expanded.push(PdfObject {
                id: ObjectId::new(number, 0),
                value,
                byte_span: container.byte_span,
                source: ObjectSource::ObjectStream,
            });
        }
    }
    for obj in expanded {
        objects.entry(obj.id).or_insert(obj);
    }
}

/// Merge every trailer dictionary in file order; later keys win.
fn merge_trailers(
    bytes: &[u8],
    objects: &BTreeMap<ObjectId, PdfObject>,
) -> (Option<Dictionary>, usize) {
    let mut found: Vec<(usize, Dictionary)> = Vec::new();
    let mut from = 0;
    while let Some(at) = find(bytes, b"trailer", from) {
        from = at + 7;
        if !bounded(bytes, at, 7) {
            continue;
        }
        if let Some(PdfValue::Dictionary(d)) = Lexer::new(bytes, from).parse_value() {
            found.push((at, d));
        }
    }
    for obj in objects.values() {
        if obj.source == ObjectSource::ObjectStream {
            continue;
        }
        if let Some(s) = obj.value.as_stream() {
            if s.dict.name_is("Type", "XRef") {
                let mut d = Dictionary::new();
                for (k, v) in s.dict.iter() {
                    if TRAILER_KEYS.iter().any(|t| k.is(t)) {
                        d.insert(k.clone(), v.clone());
                    }
                }
                found.push((obj.byte_span.0, d));
            }
        }
    }
    if found.is_empty() {
        return (None, 0);
    }
    found.sort_by_key(|(at, _)| *at);
    let count = found.len();
    let mut merged = Dictionary::new();
    for (_, d) in found {
        for (k, v) in d.iter() {
            merged.insert(k.clone(), v.clone());
        }
    }
    (Some(merged), count)
}
