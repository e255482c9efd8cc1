//! The fixed 48-feature dictionary and its extractor.
//!
//! Feature order is part of the feature-CSV and model-bundle formats and
//! must not change within a format version.

use std::collections::BTreeSet;

use crate::entropy::shannon_entropy;
use crate::pdf::{
    count_pages, Dictionary, FilterKind, ObjectSource, ParseWarning, PdfDocument, PdfValue,
};

pub const FEATURE_COUNT: usize = 48;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureCategory {
    Structure,
    Metadata,
    Objects,
    ContentStats,
}

#[derive(Debug, Clone, Copy)]
pub struct FeatureSpec {
    pub name: &'static str,
    pub category: FeatureCategory,
    pub description: &'static str,
    /// Inclusive upper bound, if the feature is a ratio, flag or entropy.
    pub max: Option<f64>,
}

const fn spec(
    name: &'static str,
    category: FeatureCategory,
    description: &'static str,
    max: Option<f64>,
) -> FeatureSpec {
    FeatureSpec {
        name,
        category,
        description,
        max,
    }
}

use FeatureCategory::{ContentStats, Metadata, Objects, Structure};

const FLAG: Option<f64> = Some(1.0);
const RATIO: Option<f64> = Some(1.0);
const BITS: Option<f64> = Some(8.0);

pub const FEATURES: [FeatureSpec; FEATURE_COUNT] = [
    spec("F_SIZE", Structure, "file size in bytes", None),
    spec("F_PGC", Structure, "page count", None),
    spec(
        "F_HDRVER",
        Structure,
        "numeric header version, 0 if absent",
        None,
    ),
    spec("F_EOFN", Structure, "number of %%EOF markers", None),
    spec(
        "F_XREFOK",
        Structure,
        "cross-reference data parsed and consistent",
        FLAG,
    ),
    spec(
        "F_UPDN",
        Structure,
        "number of trailers (incremental updates)",
        None,
    ),
    spec(
        "F_OBJGAP",
        Structure,
        "fraction of object numbers missing from 1..max",
        RATIO,
    ),
    spec(
        "F_BADOFF",
        Structure,
        "objects recovered only by the linear scan",
        None,
    ),
    spec("F_TRLSZ", Structure, "trailer entry count", None),
    spec("F_LINEAR", Structure, "linearized", FLAG),
    spec("F_ENCR", Structure, "encrypted (/Encrypt in trailer)", FLAG),
    spec("F_WARNN", Structure, "parse warning count", None),
    spec("F_INFON", Metadata, "Info dictionary entry count", None),
    spec("F_TITLELEN", Metadata, "Title length in bytes", None),
    spec("F_AUTHLEN", Metadata, "Author length in bytes", None),
    spec("F_PRODLEN", Metadata, "Producer length in bytes", None),
    spec("F_XMP", Metadata, "XMP metadata stream present", FLAG),
    spec("F_DATEOK", Metadata, "CreationDate well-formed", FLAG),
    spec("F_OBJC", Objects, "indirect object count", None),
    spec("F_STRMN", Objects, "stream count", None),
    spec("F_FILT", Objects, "total filter applications", None),
    spec("F_FILTMAX", Objects, "longest filter chain", None),
    spec("F_FLATEN", Objects, "FlateDecode applications", None),
    spec("F_HEXN", Objects, "ASCIIHexDecode applications", None),
    spec("F_A85N", Objects, "ASCII85Decode applications", None),
    spec("F_OTHFILTN", Objects, "other filter applications", None),
    spec("F_JS", Objects, "any /JavaScript or /JS key", FLAG),
    spec("F_JSN", Objects, "count of /JavaScript and /JS keys", None),
    spec("F_OPENA", Objects, "/OpenAction present", FLAG),
    spec("F_AA", Objects, "/AA additional actions present", FLAG),
    spec("F_LAUNCH", Objects, "/Launch actions", None),
    spec("F_URIN", Objects, "/URI actions", None),
    spec("F_EMBFN", Objects, "/EmbeddedFile streams", None),
    spec("F_ACRON", Objects, "/AcroForm present", FLAG),
    spec("F_OBJSTMN", Objects, "/ObjStm containers", None),
    spec("F_REFN", Objects, "indirect references", None),
    spec("F_ENTRP1", ContentStats, "entropy of the whole file", BITS),
    spec(
        "F_ENTRP2",
        ContentStats,
        "mean entropy of decoded streams",
        BITS,
    ),
    spec(
        "F_ENTRPMAX",
        ContentStats,
        "max entropy of decoded streams",
        BITS,
    ),
    spec("F_STRMSZMEAN", ContentStats, "mean raw stream size", None),
    spec("F_STRMSZMAX", ContentStats, "max raw stream size", None),
    spec(
        "F_STRMRATIO",
        ContentStats,
        "raw stream bytes / file size",
        RATIO,
    ),
    spec(
        "F_ASCIIR",
        ContentStats,
        "printable ASCII byte fraction",
        RATIO,
    ),
    spec("F_NULLR", ContentStats, "NUL byte fraction", RATIO),
    spec(
        "F_KWOBFN",
        ContentStats,
        "#xx escapes inside name tokens",
        None,
    ),
    spec("F_STRLMAX", ContentStats, "longest string literal", None),
    spec("F_STRLN", ContentStats, "string literal count", None),
    spec(
        "F_DECFAILN",
        ContentStats,
        "failed or truncated stream decodes",
        None,
    ),
];

pub fn feature_names() -> impl ExactSizeIterator<Item = &'static str> {
    FEATURES.iter().map(|f| f.name)
}

pub fn feature_index(name: &str) -> Option<usize> {
    FEATURES.iter().position(|f| f.name == name)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: [f64; FEATURE_COUNT],
}

impl FeatureVector {
    pub fn get(&self, name: &str) -> Option<f64> {
        feature_index(name).map(|i| self.values[i])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }
}

/// Tallies gathered by walking every value of every object.
#[derive(Default)]
struct ValueStats {
    js_keys: usize,
    open_action: bool,
    additional_actions: bool,
    acroform: bool,
    launch: usize,
    uri: usize,
    embedded_files: usize,
    references: usize,
    strings: usize,
    longest_string: usize,
}

impl ValueStats {
    fn visit(&mut self, value: &PdfValue) {
        match value {
            PdfValue::String(s) => {
                self.strings += 1;
                self.longest_string = self.longest_string.max(s.len());
            }
            PdfValue::Reference(_) => self.references += 1,
            PdfValue::Array(items) => items.iter().for_each(|v| self.visit(v)),
            PdfValue::Dictionary(d) => self.visit_dict(d),
            PdfValue::Stream(s) => self.visit_dict(&s.dict),
            PdfValue::Null
            | PdfValue::Boolean(_)
            | PdfValue::Integer(_)
            | PdfValue::Real(_)
            | PdfValue::Name(_) => {}
        }
    }

    fn visit_dict(&mut self, d: &Dictionary) {
        for (key, value) in d.iter() {
            match key.as_bytes() {
                b"JavaScript" | b"JS" => self.js_keys += 1,
                b"OpenAction" => self.open_action = true,
                b"AA" => self.additional_actions = true,
                b"AcroForm" => self.acroform = true,
                _ => {}
            }
            self.visit(value);
        }
        if d.name_is("S", "Launch") {
            self.launch += 1;
        }
        if d.name_is("S", "URI") {
            self.uri += 1;
        }
        if d.name_is("Type", "EmbeddedFile") {
            self.embedded_files += 1;
        }
    }
}

fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        (num as f64 / den as f64).clamp(0.0, 1.0)
    }
}

/// Fraction of object numbers in `1..=max` with no object.
fn object_gap(doc: &PdfDocument) -> f64 {
    let numbers: BTreeSet<u32> = doc
        .objects
        .iter()
        .map(|o| o.id.number)
        .filter(|n| *n > 0)
        .collect();
    let Some(&max) = numbers.last() else {
        return 0.0;
    };
    let missing = max as usize - numbers.len();
    ratio(missing, max as usize)
}

/// Count `#xx` escapes inside name tokens of the raw file.
pub fn count_name_hex_escapes(bytes: &[u8]) -> usize {
    let regular = |b: u8| {
        !matches!(b, 0x00 | 0x09 | 0x0A | 0x0C | 0x0D | 0x20)
            && !matches!(
                b,
                b'(' | b')' | b'<' | b'>' | b'[' | b']' | b'{' | b'}' | b'/' | b'%'
            )
    };
    let mut count = 0;
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] != b'/' {
            i += 1;
            continue;
        }
        i += 1;
        while i < bytes.len() && regular(bytes[i]) {
            if bytes[i] == b'#'
                && bytes.get(i + 1).is_some_and(u8::is_ascii_hexdigit)
                && bytes.get(i + 2).is_some_and(u8::is_ascii_hexdigit)
            {
                count += 1;
                i += 3;
            } else {
                i += 1;
            }
        }
    }
    count
}

/// `D:YYYY[MM[DD[HH[mm[SS[tz]]]]]]` with each present field in range.
pub fn is_well_formed_pdf_date(s: &[u8]) -> bool {
    let s = s.strip_prefix(b"D:").unwrap_or(s);
    let digits = |slice: &[u8]| -> Option<u32> {
        if slice.iter().all(u8::is_ascii_digit) {
            std::str::from_utf8(slice).ok()?.parse().ok()
        } else {
            None
        }
    };
    if s.len() < 4 || digits(&s[..4]).is_none() {
        return false;
    }
    let ranges: [(u32, u32); 5] = [(1, 12), (1, 31), (0, 23), (0, 59), (0, 59)];
    let mut rest = &s[4..];
    for (lo, hi) in ranges {
        if rest.len() < 2 || !rest[0].is_ascii_digit() {
            break;
        }
        match digits(&rest[..2]) {
            Some(v) if (lo..=hi).contains(&v) => rest = &rest[2..],
            _ => return false,
        }
    }
    match rest.first() {
        None => true,
        Some(b'Z') => rest[1..].iter().all(|b| *b == b'\''),
        Some(b'+' | b'-') => {
            let tz = &rest[1..];
            let parts: Vec<&[u8]> = tz
                .split(|b| *b == b'\'')
                .filter(|p| !p.is_empty())
                .collect();
            match parts.as_slice() {
                [hh] => digits(hh).is_some_and(|h| h <= 23) && hh.len() == 2,
                [hh, mm] => {
                    hh.len() == 2
                        && mm.len() == 2
                        && digits(hh).is_some_and(|h| h <= 23)
                        && digits(mm).is_some_and(|m| m <= 59)
                }
                _ => false,
            }
        }
        _ => false,
    }
}

fn string_len(doc: &PdfDocument, info: Option<&Dictionary>, key: &str) -> f64 {
    match info.and_then(|d| d.get(key)).and_then(|v| doc.resolve(v)) {
        Some(PdfValue::String(s)) => s.len() as f64,
        _ => 0.0,
    }
}

/// Map a parsed document and its raw bytes to the 48 features. Total: every
/// document, including the empty one, yields finite values.
pub fn extract_features(doc: &PdfDocument, bytes: &[u8]) -> FeatureVector {
    let mut stats = ValueStats::default();
    for obj in &doc.objects {
        stats.visit(&obj.value);
    }

    let mut stream_count = 0usize;
    let mut filter_total = 0usize;
    let mut filter_max = 0usize;
    let mut per_filter = [0usize; 4];
    let mut raw_total = 0usize;
    let mut raw_max = 0usize;
    let mut decoded_entropies = Vec::new();
    let mut objstm = 0usize;
    let mut xmp = false;
    for s in doc.streams() {
        stream_count += 1;
        filter_total += s.filters.len();
        filter_max = filter_max.max(s.filters.len());
        for f in &s.filters {
            let slot = match FilterKind::of(f) {
                FilterKind::Flate => 0,
                FilterKind::AsciiHex => 1,
                FilterKind::Ascii85 => 2,
                FilterKind::Other => 3,
            };
            per_filter[slot] += 1;
        }
        raw_total += s.raw_bytes.len();
        raw_max = raw_max.max(s.raw_bytes.len());
        if let Some(d) = &s.decoded_bytes {
            decoded_entropies.push(shannon_entropy(d));
        }
        if s.dict.name_is("Type", "ObjStm") {
            objstm += 1;
        }
        if s.dict.name_is("Type", "Metadata") {
            xmp = true;
        }
    }
    let (entropy_mean, entropy_max) = if decoded_entropies.is_empty() {
        (0.0, 0.0)
    } else {
        let sum: f64 = decoded_entropies.iter().sum();
        let max = decoded_entropies.iter().copied().fold(0.0, f64::max);
        (sum / decoded_entropies.len() as f64, max)
    };

    let info = doc.info_dict();
    let date_ok = match info
        .and_then(|d| d.get("CreationDate"))
        .and_then(|v| doc.resolve(v))
    {
        Some(PdfValue::String(s)) => is_well_formed_pdf_date(s),
        _ => false,
    };
    let header_version = doc
        .header_version
        .as_deref()
        .and_then(|v| v.parse::<f64>().ok())
        .filter(|v| v.is_finite())
        .map_or(0.0, |v| v.clamp(0.0, 100.0));

    let printable = bytes
        .iter()
        .filter(|b| matches!(**b, 0x20..=0x7E | b'\t' | b'\n' | b'\r'))
        .count();
    let nulls = bytes.iter().filter(|b| **b == 0).count();
    let scan_only = doc
        .objects
        .iter()
        .filter(|o| o.source == ObjectSource::Scan)
        .count();
    let decode_failures = doc.warning_count(ParseWarning::DecodeFailed)
        + doc.warning_count(ParseWarning::DecodeTruncated);

    let values = [
        bytes.len() as f64,
        count_pages(doc) as f64,
        header_version,
        doc.eof_marker_count as f64,
        flag(doc.xref_ok),
        doc.trailer_count as f64,
        object_gap(doc),
        scan_only as f64,
        doc.trailer.as_ref().map_or(0, Dictionary::len) as f64,
        flag(doc.is_linearized()),
        flag(doc.is_encrypted()),
        doc.parse_warnings.len() as f64,
        info.map_or(0, Dictionary::len) as f64,
        string_len(doc, info, "Title"),
        string_len(doc, info, "Author"),
        string_len(doc, info, "Producer"),
        flag(xmp),
        flag(date_ok),
        doc.objects.len() as f64,
        stream_count as f64,
        filter_total as f64,
        filter_max as f64,
        per_filter[0] as f64,
        per_filter[1] as f64,
        per_filter[2] as f64,
        per_filter[3] as f64,
        flag(stats.js_keys > 0),
        stats.js_keys as f64,
        flag(stats.open_action),
        flag(stats.additional_actions),
        stats.launch as f64,
        stats.uri as f64,
        stats.embedded_files as f64,
        flag(stats.acroform),
        objstm as f64,
        stats.references as f64,
        shannon_entropy(bytes),
        entropy_mean,
        entropy_max,
        if stream_count == 0 {
            0.0
        } else {
            raw_total as f64 / stream_count as f64
        },
        raw_max as f64,
        ratio(raw_total, bytes.len()),
        ratio(printable, bytes.len()),
        ratio(nulls, bytes.len()),
        count_name_hex_escapes(bytes) as f64,
        stats.longest_string as f64,
        stats.strings as f64,
        decode_failures as f64,
    ];
    FeatureVector {
        values: values.map(|v| if v.is_finite() { v } else { f64::MAX }),
    }
}

/// Parse and extract in one step.
pub fn extract_from_bytes(bytes: &[u8]) -> FeatureVector {
    let doc = crate::pdf::parse_document(bytes);
    extract_features(&doc, bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dictionary_is_well_formed() {
        let names: BTreeSet<_> = feature_names().collect();
        assert_eq!(names.len(), FEATURE_COUNT);
        for required in [
            "F_SIZE", "F_JS", "F_PGC", "F_OBJC", "F_FILT", "F_ENTRP1", "F_ENTRP2",
        ] {
            assert!(names.contains(required), "{required}");
        }
        let per = |c| FEATURES.iter().filter(|f| f.category == c).count();
        assert_eq!(per(Structure), 12);
        assert_eq!(per(Metadata), 6);
        assert_eq!(per(Objects), 18);
        assert_eq!(per(ContentStats), 12);
    }

    #[test]
    fn empty_file_is_all_zero_where_stated() {
        let fv = extract_from_bytes(b"");
        for name in [
            "F_SIZE",
            "F_PGC",
            "F_OBJC",
            "F_JS",
            "F_ENTRP1",
            "F_STRMRATIO",
            "F_ASCIIR",
            "F_NULLR",
            "F_OBJGAP",
        ] {
            assert_eq!(fv.get(name), Some(0.0), "{name}");
        }
    }

    #[test]
    fn hex_escapes_in_names() {
        assert_eq!(count_name_hex_escapes(b"/J#61vaScript /JS /#4A#53"), 3);
        assert_eq!(count_name_hex_escapes(b"(#41) /A#4"), 0);
    }

    #[test]
    fn pdf_dates() {
        assert!(is_well_formed_pdf_date(b"D:20180301120000+01'00'"));
        assert!(is_well_formed_pdf_date(b"D:2018"));
        assert!(is_well_formed_pdf_date(b"20180301"));
        assert!(is_well_formed_pdf_date(b"D:20180301120000Z"));
        assert!(!is_well_formed_pdf_date(b"D:20181301"));
        assert!(!is_well_formed_pdf_date(b"yesterday"));
        assert!(!is_well_formed_pdf_date(b""));
    }
}
