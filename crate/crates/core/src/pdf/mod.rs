//! Tolerant PDF structure parser.
//!
//! Malware samples are routinely malformed on purpose, so nothing in this
//! module returns an error for bad input: every anomaly is recorded as a
//! [`ParseWarning`] and parsing carries on with whatever could be recovered.
//! Objects are discovered twice, once through the cross-reference data and
//! once by a linear scan for `N G obj` headers, and the two sets are merged
//! with the cross-reference copy winning on conflict.

mod filters;
mod lexer;
mod pages;
mod parse;

use std::fmt;

pub use filters::{decode_stream, decode_stream_with_limit, DecodeStatus, FilterKind};
pub use pages::{count_pages, walk_page_tree, PageTreeWalk};
pub use parse::{parse_document, parse_document_with};

/// Default cap on decoded bytes per stream.
pub const DEFAULT_DECODE_LIMIT: usize = 16 * 1024 * 1024;
/// Default cap on page-tree nodes visited.
pub const DEFAULT_PAGE_NODE_LIMIT: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParseOptions {
    pub max_decoded_bytes: usize,
    pub max_page_nodes: usize,
}

impl Default for ParseOptions {
    fn default() -> Self {
        ParseOptions {
            max_decoded_bytes: DEFAULT_DECODE_LIMIT,
            max_page_nodes: DEFAULT_PAGE_NODE_LIMIT,
        }
    }
}

/// Recoverable anomalies found while parsing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ParseWarning {
    NoHeader,
    NoEof,
    XrefMissing,
    XrefBroken,
    DuplicateObject,
    MissingEndobj,
    UnterminatedStream,
    UnsupportedFilter,
    DecodeFailed,
    DecodeTruncated,
    ObjStmUnexpanded,
    PageTreeCycle,
    PageTreeBroken,
    PageTreeCapReached,
}

impl ParseWarning {
    pub fn code(self) -> &'static str {
        match self {
            ParseWarning::NoHeader => "NO_HEADER",
            ParseWarning::NoEof => "NO_EOF",
            ParseWarning::XrefMissing => "XREF_MISSING",
            ParseWarning::XrefBroken => "XREF_BROKEN",
            ParseWarning::DuplicateObject => "DUPLICATE_OBJECT",
            ParseWarning::MissingEndobj => "MISSING_ENDOBJ",
            ParseWarning::UnterminatedStream => "UNTERMINATED_STREAM",
            ParseWarning::UnsupportedFilter => "UNSUPPORTED_FILTER",
            ParseWarning::DecodeFailed => "DECODE_FAILED",
            ParseWarning::DecodeTruncated => "DECODE_TRUNCATED",
            ParseWarning::ObjStmUnexpanded => "OBJSTM_UNEXPANDED",
            ParseWarning::PageTreeCycle => "PAGE_TREE_CYCLE",
            ParseWarning::PageTreeBroken => "PAGE_TREE_BROKEN",
            ParseWarning::PageTreeCapReached => "PAGE_TREE_CAP_REACHED",
        }
    }
}

impl fmt::Display for ParseWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ObjectId {
    pub number: u32,
    pub generation: u16,
}

impl ObjectId {
    pub fn new(number: u32, generation: u16) -> Self {
        ObjectId { number, generation }
    }
}

impl fmt::Display for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} R", self.number, self.generation)
    }
}

/// A PDF name with `#xx` escapes already resolved.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Name(pub Vec<u8>);

impl Name {
    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn is(&self, s: &str) -> bool {
        self.0 == s.as_bytes()
    }
}

impl From<&str> for Name {
    fn from(s: &str) -> Self {
        Name(s.as_bytes().to_vec())
    }
}

impl fmt::Display for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "/{}", String::from_utf8_lossy(&self.0))
    }
}

/// Ordered dictionary; a repeated key replaces the earlier value in place.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dictionary {
    entries: Vec<(Name, PdfValue)>,
}

impl Dictionary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, key: Name, value: PdfValue) {
        match self.entries.iter_mut().find(|(k, _)| *k == key) {
            Some(slot) => slot.1 = value,
            None => self.entries.push((key, value)),
        }
    }

    pub fn get(&self, key: &str) -> Option<&PdfValue> {
        self.entries.iter().find(|(k, _)| k.is(key)).map(|(_, v)| v)
    }

    pub fn contains_key(&self, key: &str) -> bool {
        self.get(key).is_some()
    }

    /// True when `/Type` (or `/S` for `key = "S"`) is the given name.
    pub fn name_is(&self, key: &str, expected: &str) -> bool {
        matches!(self.get(key), Some(PdfValue::Name(n)) if n.is(expected))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Name, &PdfValue)> {
        self.entries.iter().map(|(k, v)| (k, v))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreamData {
    pub dict: Dictionary,
    /// Bytes between `stream` and `endstream`, undecoded.
    pub raw_bytes: Vec<u8>,
    /// `/Filter` names in declaration order.
    pub filters: Vec<Name>,
    /// Present only if every filter in the chain decoded successfully.
    pub decoded_bytes: Option<Vec<u8>>,
    pub status: DecodeStatus,
}

impl StreamData {
    /// Build a stream from its dictionary and raw payload. `filters` is read
    /// from the dictionary; nothing is decoded yet.
    pub fn new(dict: Dictionary, raw_bytes: Vec<u8>) -> Self {
        let filters = filters::filter_names(&dict);
        StreamData {
            dict,
            raw_bytes,
            filters,
            decoded_bytes: None,
            status: DecodeStatus::NotAttempted,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PdfValue {
    Null,
    Boolean(bool),
    Integer(i64),
    Real(f64),
    String(Vec<u8>),
    Name(Name),
    Array(Vec<PdfValue>),
    Dictionary(Dictionary),
    Stream(StreamData),
    Reference(ObjectId),
}

impl PdfValue {
    pub fn as_dict(&self) -> Option<&Dictionary> {
        match self {
            PdfValue::Dictionary(d) => Some(d),
            PdfValue::Stream(s) => Some(&s.dict),
            _ => None,
        }
    }

    pub fn as_stream(&self) -> Option<&StreamData> {
        match self {
            PdfValue::Stream(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_integer(&self) -> Option<i64> {
        match self {
            PdfValue::Integer(i) => Some(*i),
            _ => None,
        }
    }

    pub fn as_name(&self) -> Option<&Name> {
        match self {
            PdfValue::Name(n) => Some(n),
            _ => None,
        }
    }
}

/// How an object was located.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectSource {
    /// Found at the offset the cross-reference data gave for it.
    Xref,
    /// Recovered by the linear `N G obj` scan only.
    Scan,
    /// Expanded from a decoded `/Type /ObjStm` container.
    ObjectStream,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PdfObject {
    pub id: ObjectId,
    pub value: PdfValue,
    /// Half-open byte range in the raw file. For objects expanded from an
    /// object stream this is the span of the containing stream object.
    pub byte_span: (usize, usize),
    pub source: ObjectSource,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PdfDocument {
    /// Sorted by id; ids are unique.
    pub objects: Vec<PdfObject>,
    pub trailer: Option<Dictionary>,
    pub header_version: Option<String>,
    pub xref_ok: bool,
    pub eof_marker_count: usize,
    pub raw_size_bytes: usize,
    pub parse_warnings: Vec<ParseWarning>,
    /// Number of trailer dictionaries (classic or cross-reference stream).
    pub trailer_count: usize,
}

impl PdfDocument {
    pub fn get(&self, id: ObjectId) -> Option<&PdfObject> {
        self.objects
            .binary_search_by(|o| o.id.cmp(&id))
            .ok()
            .map(|i| &self.objects[i])
    }

    /// Follow references (bounded) until a direct value is reached.
    pub fn resolve<'a>(&'a self, value: &'a PdfValue) -> Option<&'a PdfValue> {
        let mut current = value;
        for _ in 0..32 {
            match current {
                PdfValue::Reference(id) => current = &self.get(*id)?.value,
                other => return Some(other),
            }
        }
        None
    }

    pub fn resolve_dict<'a>(&'a self, value: &'a PdfValue) -> Option<&'a Dictionary> {
        self.resolve(value).and_then(PdfValue::as_dict)
    }

    pub fn is_encrypted(&self) -> bool {
        self.trailer
            .as_ref()
            .is_some_and(|t| t.contains_key("Encrypt"))
    }

    pub fn is_linearized(&self) -> bool {
        self.objects.iter().any(|o| {
            o.value
                .as_dict()
                .is_some_and(|d| d.contains_key("Linearized"))
        })
    }

    pub fn info_dict(&self) -> Option<&Dictionary> {
        let info = self.trailer.as_ref()?.get("Info")?;
        self.resolve_dict(info)
    }

    pub fn streams(&self) -> impl Iterator<Item = &StreamData> {
        self.objects.iter().filter_map(|o| o.value.as_stream())
    }

    pub fn warning_count(&self, w: ParseWarning) -> usize {
        self.parse_warnings.iter().filter(|x| **x == w).count()
    }
}
