//! Stream filter decoding: FlateDecode (with PNG predictors), ASCIIHexDecode
//! and ASCII85Decode. Everything else is reported as unsupported.

use std::io::Read;

use flate2::read::ZlibDecoder;

use super::{Dictionary, Name, PdfValue, StreamData, DEFAULT_DECODE_LIMIT};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecodeStatus {
    NotAttempted,
    Decoded,
    Unsupported,
    Failed,
    Truncated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FilterKind {
    Flate,
    AsciiHex,
    Ascii85,
    Other,
}

impl FilterKind {
    pub fn of(name: &Name) -> FilterKind {
        match name.as_bytes() {
            b"FlateDecode" | b"Fl" => FilterKind::Flate,
            b"ASCIIHexDecode" | b"AHx" => FilterKind::AsciiHex,
            b"ASCII85Decode" | b"A85" => FilterKind::Ascii85,
            _ => FilterKind::Other,
        }
    }
}

pub(crate) fn filter_names(dict: &Dictionary) -> Vec<Name> {
    match dict.get("Filter") {
        Some(PdfValue::Name(n)) => vec![n.clone()],
        Some(PdfValue::Array(items)) => items.iter().filter_map(|v| v.as_name().cloned()).collect(),
        _ => Vec::new(),
    }
}

fn decode_parms(dict: &Dictionary, index: usize) -> Option<&Dictionary> {
    match dict.get("DecodeParms").or_else(|| dict.get("DP"))? {
        PdfValue::Dictionary(d) => (index == 0).then_some(d),
        PdfValue::Array(items) => items.get(index).and_then(|v| match v {
            PdfValue::Dictionary(d) => Some(d),
            _ => None,
        }),
        _ => None,
    }
}

/// Decode with the default 16 MiB per-stream cap.
pub fn decode_stream(stream: StreamData) -> StreamData {
    decode_stream_with_limit(stream, DEFAULT_DECODE_LIMIT)
}

/// Decode `raw_bytes` through the filter chain. Decoding always starts from
/// the raw bytes, so applying this twice gives the same result as once.
pub fn decode_stream_with_limit(mut stream: StreamData, limit: usize) -> StreamData {
    stream.filters = filter_names(&stream.dict);
    let (decoded, status) = run_chain(&stream, limit);
    stream.decoded_bytes = decoded;
    stream.status = status;
    stream
}

enum StageError {
    Failed,
    Truncated,
    Unsupported,
}

fn run_chain(stream: &StreamData, limit: usize) -> (Option<Vec<u8>>, DecodeStatus) {
    if stream
        .filters
        .iter()
        .any(|f| FilterKind::of(f) == FilterKind::Other)
    {
        return (None, DecodeStatus::Unsupported);
    }
    if stream.raw_bytes.len() > limit && stream.filters.is_empty() {
        return (None, DecodeStatus::Truncated);
    }
    let mut data = stream.raw_bytes.clone();
    for (i, filter) in stream.filters.iter().enumerate() {
        let parms = decode_parms(&stream.dict, i);
        let result = match FilterKind::of(filter) {
            FilterKind::Flate => inflate(&data, limit).and_then(|d| apply_predictor(d, parms)),
            FilterKind::AsciiHex => ascii_hex(&data),
            FilterKind::Ascii85 => ascii85(&data),
            FilterKind::Other => Err(StageError::Unsupported),
        };
        data = match result {
            Ok(d) if d.len() > limit => return (None, DecodeStatus::Truncated),
            Ok(d) => d,
            Err(StageError::Failed) => return (None, DecodeStatus::Failed),
            Err(StageError::Truncated) => return (None, DecodeStatus::Truncated),
            Err(StageError::Unsupported) => return (None, DecodeStatus::Unsupported),
        };
    }
    (Some(data), DecodeStatus::Decoded)
}

fn inflate(data: &[u8], limit: usize) -> Result<Vec<u8>, StageError> {
    let mut out = Vec::new();
    let reader = ZlibDecoder::new(data);
    reader
        .take(limit as u64 + 1)
        .read_to_end(&mut out)
        .map_err(|_| StageError::Failed)?;
    if out.len() > limit {
        return Err(StageError::Truncated);
    }
    Ok(out)
}

fn int_parm(parms: Option<&Dictionary>, key: &str, default: i64) -> i64 {
    parms
        .and_then(|p| p.get(key))
        .and_then(PdfValue::as_integer)
        .unwrap_or(default)
}

fn apply_predictor(data: Vec<u8>, parms: Option<&Dictionary>) -> Result<Vec<u8>, StageError> {
    let predictor = int_parm(parms, "Predictor", 1);
    match predictor {
        1 => Ok(data),
        10..=15 => {
            let colors = int_parm(parms, "Colors", 1);
            let bpc = int_parm(parms, "BitsPerComponent", 8);
            let columns = int_parm(parms, "Columns", 1);
            if !(1..=32).contains(&colors)
                || !matches!(bpc, 1 | 2 | 4 | 8 | 16)
                || !(1..=1 << 20).contains(&columns)
            {
                return Err(StageError::Failed);
            }
            let bpp = ((colors * bpc + 7) / 8) as usize;
            let row_len = ((colors * bpc * columns + 7) / 8) as usize;
            png_unpredict(&data, row_len, bpp)
        }
        _ => Err(StageError::Unsupported),
    }
}

fn png_unpredict(data: &[u8], row_len: usize, bpp: usize) -> Result<Vec<u8>, StageError> {
    let mut out = Vec::with_capacity(data.len());
    let mut prev = vec![0u8; row_len];
    for chunk in data.chunks(row_len + 1) {
        if chunk.len() < 2 {
            break;
        }
        let kind = chunk[0];
        let mut row = chunk[1..].to_vec();
        row.resize(row_len, 0);
        for i in 0..row_len {
            let left = if i >= bpp { row[i - bpp] } else { 0 };
            let up = prev[i];
            let up_left = if i >= bpp { prev[i - bpp] } else { 0 };
            let add = match kind {
                0 => 0,
                1 => left,
                2 => up,
                3 => ((u16::from(left) + u16::from(up)) / 2) as u8,
                4 => paeth(left, up, up_left),
                _ => return Err(StageError::Failed),
            };
            row[i] = row[i].wrapping_add(add);
        }
        out.extend_from_slice(&row);
        prev = row;
    }
    Ok(out)
}

fn paeth(a: u8, b: u8, c: u8) -> u8 {
    let p = i16::from(a) + i16::from(b) - i16::from(c);
    let pa = (p - i16::from(a)).abs();
    let pb = (p - i16::from(b)).abs();
    let pc = (p - i16::from(c)).abs();
    if pa <= pb && pa <= pc {
        a
    } else if pb <= pc {
        b
    } else {
        c
    }
}

fn ascii_hex(data: &[u8]) -> Result<Vec<u8>, StageError> {
    let mut out = Vec::with_capacity(data.len() / 2);
    let mut high: Option<u8> = None;
    for &b in data {
        if b == b'>' {
            break;
        }
        if super::lexer::is_whitespace(b) {
            continue;
        }
        let v = match b {
            b'0'..=b'9' => b - b'0',
            b'a'..=b'f' => b - b'a' + 10,
            b'A'..=b'F' => b - b'A' + 10,
            _ => return Err(StageError::Failed),
        };
        match high.take() {
            Some(h) => out.push(h << 4 | v),
            None => high = Some(v),
        }
    }
    if let Some(h) = high {
        out.push(h << 4);
    }
    Ok(out)
}

fn ascii85(data: &[u8]) -> Result<Vec<u8>, StageError> {
    let mut out = Vec::with_capacity(data.len() * 4 / 5);
    let mut group = [0u8; 5];
    let mut n = 0usize;
    let body = data.strip_prefix(b"<~").unwrap_or(data);
    let mut i = 0;
    while i < body.len() {
        let b = body[i];
        i += 1;
        match b {
            b'~' => break,
            b'z' if n == 0 => out.extend_from_slice(&[0, 0, 0, 0]),
            b'!'..=b'u' => {
                group[n] = b - b'!';
                n += 1;
                if n == 5 {
                    let v = group
                        .iter()
                        .try_fold(0u32, |acc, &d| {
                            acc.checked_mul(85)?.checked_add(u32::from(d))
                        })
                        .ok_or(StageError::Failed)?;
                    out.extend_from_slice(&v.to_be_bytes());
                    n = 0;
                }
            }
            _ if super::lexer::is_whitespace(b) => {}
            _ => return Err(StageError::Failed),
        }
    }
    if n == 1 {
        return Err(StageError::Failed);
    }
    if n > 1 {
        for slot in group.iter_mut().skip(n) {
            *slot = 84;
        }
        let v = group
            .iter()
            .try_fold(0u32, |acc, &d| {
                acc.checked_mul(85)?.checked_add(u32::from(d))
            })
            .ok_or(StageError::Failed)?;
        out.extend_from_slice(&v.to_be_bytes()[..n - 1]);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stream_with(filters: &[&str], raw: &[u8]) -> StreamData {
        let mut dict = Dictionary::new();
        match filters {
            [] => {}
            [one] => dict.insert("Filter".into(), PdfValue::Name((*one).into())),
            many => dict.insert(
                "Filter".into(),
                PdfValue::Array(many.iter().map(|f| PdfValue::Name((*f).into())).collect()),
            ),
        }
        StreamData::new(dict, raw.to_vec())
    }

    #[test]
    fn identity_chain() {
        let s = decode_stream(stream_with(&[], b"hello"));
        assert_eq!(s.decoded_bytes.as_deref(), Some(&b"hello"[..]));
        assert_eq!(s.status, DecodeStatus::Decoded);
    }

    #[test]
    fn ascii_hex_decodes() {
        let s = decode_stream(stream_with(&["ASCIIHexDecode"], b"48656C6C6F>"));
        assert_eq!(s.decoded_bytes.as_deref(), Some(&b"Hello"[..]));
    }

    #[test]
    fn flate_decodes_reference_zlib_fixture() {
        // zlib.compress(b"AAAA") from CPython's zlib module (level 6).
        let raw = [
            0x78, 0x9c, 0x73, 0x74, 0x74, 0x74, 0x04, 0x00, 0x02, 0x8e, 0x01, 0x05,
        ];
        let s = decode_stream(stream_with(&["FlateDecode"], &raw));
        assert_eq!(s.decoded_bytes.as_deref(), Some(&b"AAAA"[..]));
    }

    #[test]
    fn ascii85_decodes() {
        // base64.a85encode(b"Hello, world") == b"87cURD_*#TDfTZ)"
        let s = decode_stream(stream_with(&["ASCII85Decode"], b"87cURD_*#TDfTZ)~>"));
        assert_eq!(s.decoded_bytes.as_deref(), Some(&b"Hello, world"[..]));
        let s = decode_stream(stream_with(&["A85"], b"z~>"));
        assert_eq!(s.decoded_bytes.as_deref(), Some(&[0u8, 0, 0, 0][..]));
    }

    #[test]
    fn chain_preserves_declaration_order() {
        // ASCIIHex of the zlib fixture above, then Flate.
        let hex = b"789c737474740400028e01 05>";
        let s = decode_stream(stream_with(&["ASCIIHexDecode", "FlateDecode"], hex));
        assert_eq!(s.filters[0].as_bytes(), b"ASCIIHexDecode");
        assert_eq!(s.decoded_bytes.as_deref(), Some(&b"AAAA"[..]));
    }

    #[test]
    fn unsupported_filter_leaves_bytes_absent() {
        let s = decode_stream(stream_with(&["DCTDecode"], b"\xff\xd8"));
        assert_eq!(s.status, DecodeStatus::Unsupported);
        assert!(s.decoded_bytes.is_none());
    }

    #[test]
    fn malformed_flate_fails_softly() {
        let s = decode_stream(stream_with(&["FlateDecode"], b"not zlib at all"));
        assert_eq!(s.status, DecodeStatus::Failed);
        assert!(s.decoded_bytes.is_none());
    }

    #[test]
    fn decompression_cap_truncates() {
        use flate2::write::ZlibEncoder;
        use flate2::Compression;
        use std::io::Write;
        let mut enc = ZlibEncoder::new(Vec::new(), Compression::best());
        enc.write_all(&vec![0u8; 100_000]).unwrap();
        let raw = enc.finish().unwrap();
        let s = decode_stream_with_limit(stream_with(&["FlateDecode"], &raw), 1000);
        assert_eq!(s.status, DecodeStatus::Truncated);
        assert!(s.decoded_bytes.is_none());
        let s = decode_stream_with_limit(stream_with(&["FlateDecode"], &raw), 100_000);
        assert_eq!(s.decoded_bytes.map(|d| d.len()), Some(100_000));
    }

    #[test]
    fn png_up_predictor() {
        use flate2::write::ZlibEncoder;
        use flate2::Compression;
        use std::io::Write;
        // two rows of 3 columns, filter type 2 (Up) on the second row
        let rows = [0u8, 1, 2, 3, 2, 1, 1, 1];
        let mut enc = ZlibEncoder::new(Vec::new(), Compression::default());
        enc.write_all(&rows).unwrap();
        let mut s = stream_with(&["FlateDecode"], &enc.finish().unwrap());
        let mut parms = Dictionary::new();
        parms.insert("Predictor".into(), PdfValue::Integer(12));
        parms.insert("Columns".into(), PdfValue::Integer(3));
        s.dict
            .insert("DecodeParms".into(), PdfValue::Dictionary(parms));
        let s = decode_stream(s);
        assert_eq!(s.decoded_bytes.as_deref(), Some(&[1u8, 2, 3, 2, 3, 4][..]));
    }

    #[test]
    fn decoding_is_idempotent() {
        let once = decode_stream(stream_with(&["ASCIIHexDecode"], b"41 42>"));
        let twice = decode_stream(once.clone());
        assert_eq!(once, twice);
    }
}
