//! Object-syntax reader over a byte slice. It never fails: malformed input
//! yields `None` or a best-effort partial value.

use super::{Dictionary, Name, ObjectId, PdfValue};

const MAX_DEPTH: usize = 64;

pub(crate) fn is_whitespace(b: u8) -> bool {
    matches!(b, 0x00 | 0x09 | 0x0A | 0x0C | 0x0D | 0x20)
}

pub(crate) fn is_delimiter(b: u8) -> bool {
    matches!(
        b,
        b'(' | b')' | b'<' | b'>' | b'[' | b']' | b'{' | b'}' | b'/' | b'%'
    )
}

pub(crate) fn is_regular(b: u8) -> bool {
    !is_whitespace(b) && !is_delimiter(b)
}

fn hex_value(b: u8) -> Option<u8> {
    match b {
        b'0'..=b'9' => Some(b - b'0'),
        b'a'..=b'f' => Some(b - b'a' + 10),
        b'A'..=b'F' => Some(b - b'A' + 10),
        _ => None,
    }
}

/// Find `needle` in `haystack` starting at `from`.
pub(crate) fn find(haystack: &[u8], needle: &[u8], from: usize) -> Option<usize> {
    if needle.is_empty() || from >= haystack.len() {
        return None;
    }
    haystack[from..]
        .windows(needle.len())
        .position(|w| w == needle)
        .map(|p| p + from)
}

pub(crate) fn rfind(haystack: &[u8], needle: &[u8]) -> Option<usize> {
    if needle.is_empty() || needle.len() > haystack.len() {
        return None;
    }
    haystack.windows(needle.len()).rposition(|w| w == needle)
}

pub(crate) struct Lexer<'a> {
    buf: &'a [u8],
    pub(crate) pos: usize,
}

impl<'a> Lexer<'a> {
    pub(crate) fn new(buf: &'a [u8], pos: usize) -> Self {
        Lexer {
            buf,
            pos: pos.min(buf.len()),
        }
    }

    pub(crate) fn at_end(&self) -> bool {
        self.pos >= self.buf.len()
    }

    fn peek(&self) -> Option<u8> {
        self.buf.get(self.pos).copied()
    }

    fn peek_at(&self, offset: usize) -> Option<u8> {
        self.buf.get(self.pos + offset).copied()
    }

    pub(crate) fn skip_ws(&mut self) {
        while let Some(b) = self.peek() {
            if is_whitespace(b) {
                self.pos += 1;
            } else if b == b'%' {
                while let Some(c) = self.peek() {
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                    self.pos += 1;
                }
            } else {
                break;
            }
        }
    }

    /// The run of regular characters at the cursor, without consuming it.
    pub(crate) fn peek_keyword(&self) -> &'a [u8] {
        let start = self.pos;
        let mut end = start;
        while end < self.buf.len() && is_regular(self.buf[end]) {
            end += 1;
        }
        &self.buf[start..end]
    }

    /// Consume `kw` if it is the next token.
    pub(crate) fn eat_keyword(&mut self, kw: &[u8]) -> bool {
        self.skip_ws();
        if self.peek_keyword() == kw {
            self.pos += kw.len();
            true
        } else {
            false
        }
    }

    pub(crate) fn read_unsigned(&mut self) -> Option<u64> {
        self.skip_ws();
        let start = self.pos;
        let mut value: u64 = 0;
        while let Some(b) = self.peek() {
            if !b.is_ascii_digit() {
                break;
            }
            value = value.checked_mul(10)?.checked_add(u64::from(b - b'0'))?;
            self.pos += 1;
        }
        if self.pos == start || self.peek().is_some_and(is_regular) {
            self.pos = start;
            return None;
        }
        Some(value)
    }

    /// Skip one token of any kind; always makes progress unless at the end.
    pub(crate) fn skip_token(&mut self) {
        self.skip_ws();
        let kw = self.peek_keyword();
        if kw.is_empty() {
            if !self.at_end() {
                self.pos += 1;
            }
        } else {
            self.pos += kw.len();
        }
    }

    pub(crate) fn parse_value(&mut self) -> Option<PdfValue> {
        self.parse_value_at_depth(0)
    }

    fn parse_value_at_depth(&mut self, depth: usize) -> Option<PdfValue> {
        self.skip_ws();
        let b = self.peek()?;
        if depth > MAX_DEPTH && matches!(b, b'[' | b'<') {
            return None;
        }
        match b {
            b'<' if self.peek_at(1) == Some(b'<') => {
                self.pos += 2;
                Some(PdfValue::Dictionary(self.parse_dict_body(depth)))
            }
            b'<' => {
                self.pos += 1;
                Some(PdfValue::String(self.parse_hex_string()))
            }
            b'(' => {
                self.pos += 1;
                Some(PdfValue::String(self.parse_literal_string()))
            }
            b'[' => {
                self.pos += 1;
                Some(PdfValue::Array(self.parse_array_body(depth)))
            }
            b'/' => {
                self.pos += 1;
                Some(PdfValue::Name(self.parse_name()))
            }
            b'+' | b'-' | b'.' | b'0'..=b'9' => Some(self.parse_number_or_reference()),
            _ => {
                let kw = self.peek_keyword();
                let value = match kw {
                    b"true" => PdfValue::Boolean(true),
                    b"false" => PdfValue::Boolean(false),
                    b"null" => PdfValue::Null,
                    _ => return None,
                };
                self.pos += kw.len();
                Some(value)
            }
        }
    }

    fn is_terminating_keyword(&self) -> bool {
        matches!(
            self.peek_keyword(),
            b"endobj" | b"stream" | b"endstream" | b"obj" | b"xref" | b"trailer" | b"startxref"
        )
    }

    fn parse_dict_body(&mut self, depth: usize) -> Dictionary {
        let mut dict = Dictionary::new();
        loop {
            self.skip_ws();
            match self.peek() {
                None => break,
                Some(b'>') if self.peek_at(1) == Some(b'>') => {
                    self.pos += 2;
                    break;
                }
                Some(b'/') => {
                    self.pos += 1;
                    let key = self.parse_name();
                    self.skip_ws();
                    if self.peek() == Some(b'>') && self.peek_at(1) == Some(b'>') {
                        dict.insert(key, PdfValue::Null);
                        continue;
                    }
                    match self.parse_value_at_depth(depth + 1) {
                        Some(v) => dict.insert(key, v),
                        None => {
                            dict.insert(key, PdfValue::Null);
                            if self.is_terminating_keyword() {
                                break;
                            }
                            self.skip_token();
                        }
                    }
                }
                Some(_) => {
                    if self.is_terminating_keyword() {
                        break;
                    }
                    if self.parse_value_at_depth(depth + 1).is_none() {
                        self.skip_token();
                    }
                }
            }
        }
        dict
    }

    fn parse_array_body(&mut self, depth: usize) -> Vec<PdfValue> {
        let mut items = Vec::new();
        loop {
            self.skip_ws();
            match self.peek() {
                None => break,
                Some(b']') => {
                    self.pos += 1;
                    break;
                }
                Some(_) => match self.parse_value_at_depth(depth + 1) {
                    Some(v) => items.push(v),
                    None => {
                        if self.is_terminating_keyword() {
                            break;
                        }
                        self.skip_token();
                    }
                },
            }
        }
        items
    }

    fn parse_name(&mut self) -> Name {
        let mut out = Vec::new();
        while let Some(b) = self.peek() {
            if !is_regular(b) {
                break;
            }
            if b == b'#' {
                if let (Some(h), Some(l)) = (
                    self.peek_at(1).and_then(hex_value),
                    self.peek_at(2).and_then(hex_value),
                ) {
                    out.push(h << 4 | l);
                    self.pos += 3;
                    continue;
                }
            }
            out.push(b);
            self.pos += 1;
        }
        Name(out)
    }

    fn parse_hex_string(&mut self) -> Vec<u8> {
        let mut out = Vec::new();
        let mut high: Option<u8> = None;
        while let Some(b) = self.peek() {
            self.pos += 1;
            if b == b'>' {
                break;
            }
            if let Some(v) = hex_value(b) {
                match high.take() {
                    Some(h) => out.push(h << 4 | v),
                    None => high = Some(v),
                }
            }
        }
        if let Some(h) = high {
            out.push(h << 4);
        }
        out
    }

    fn parse_literal_string(&mut self) -> Vec<u8> {
        let mut out = Vec::new();
        let mut nesting = 1usize;
        while let Some(b) = self.peek() {
            self.pos += 1;
            match b {
                b'(' => {
                    nesting += 1;
                    out.push(b);
                }
                b')' => {
                    nesting -= 1;
                    if nesting == 0 {
                        break;
                    }
                    out.push(b);
                }
                b'\\' => {
                    let Some(e) = self.peek() else { break };
                    self.pos += 1;
                    match e {
                        b'n' => out.push(b'\n'),
                        b'r' => out.push(b'\r'),
                        b't' => out.push(b'\t'),
                        b'b' => out.push(0x08),
                        b'f' => out.push(0x0C),
                        b'0'..=b'7' => {
                            let mut v = u32::from(e - b'0');
                            for _ in 0..2 {
                                match self.peek() {
                                    Some(d @ b'0'..=b'7') => {
                                        v = v * 8 + u32::from(d - b'0');
                                        self.pos += 1;
                                    }
                                    _ => break,
                                }
                            }
                            out.push((v & 0xFF) as u8);
                        }
                        b'\r' => {
                            if self.peek() == Some(b'\n') {
                                self.pos += 1;
                            }
                        }
                        b'\n' => {}
                        other => out.push(other),
                    }
                }
                _ => out.push(b),
            }
        }
        out
    }

    fn parse_number_or_reference(&mut self) -> PdfValue {
        let start = self.pos;
        let number = self.parse_number();
        if let PdfValue::Integer(n) = number {
            let is_plain = self.buf[start].is_ascii_digit();
            if is_plain && n >= 0 && n <= i64::from(u32::MAX) {
                let save = self.pos;
                if let Some(generation) = self.read_unsigned() {
                    if generation <= u64::from(u16::MAX) && self.eat_keyword(b"R") {
                        return PdfValue::Reference(ObjectId::new(n as u32, generation as u16));
                    }
                }
                self.pos = save;
            }
        }
        number
    }

    fn parse_number(&mut self) -> PdfValue {
        let start = self.pos;
        let mut negative = false;
        if let Some(s @ (b'+' | b'-')) = self.peek() {
            negative = s == b'-';
            self.pos += 1;
            // Tolerate doubled signs such as "--5".
            while matches!(self.peek(), Some(b'+' | b'-')) {
                self.pos += 1;
            }
        }
        let digits_start = self.pos;
        let mut seen_dot = false;
        while let Some(b) = self.peek() {
            if b.is_ascii_digit() {
                self.pos += 1;
            } else if b == b'.' && !seen_dot {
                seen_dot = true;
                self.pos += 1;
            } else {
                break;
            }
        }
        let text = &self.buf[digits_start..self.pos];
        // Skip any trailing junk glued to the number ("12.3.4", "5abc").
        while self.peek().is_some_and(is_regular) {
            self.pos += 1;
        }
        if self.pos == start {
            self.pos += 1;
        }
        let digits: Vec<u8> = text.iter().copied().filter(|b| *b != b'.').collect();
        if digits.is_empty() {
            return PdfValue::Integer(0);
        }
        let sign = if negative { -1.0 } else { 1.0 };
        let as_str = std::str::from_utf8(text).unwrap_or("0");
        if !seen_dot {
            if let Ok(v) = as_str.parse::<i64>() {
                return PdfValue::Integer(if negative { -v } else { v });
            }
        }
        let padded = if as_str.starts_with('.') {
            format!("0{as_str}")
        } else if as_str.ends_with('.') {
            format!("{as_str}0")
        } else {
            as_str.to_string()
        };
        let v = padded.parse::<f64>().unwrap_or(0.0);
        let v = if v.is_finite() { v } else { f64::MAX };
        PdfValue::Real(sign * v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Option<PdfValue> {
        Lexer::new(s.as_bytes(), 0).parse_value()
    }

    #[test]
    fn scalars() {
        assert_eq!(parse("42"), Some(PdfValue::Integer(42)));
        assert_eq!(parse("-3.5"), Some(PdfValue::Real(-3.5)));
        assert_eq!(parse(".5"), Some(PdfValue::Real(0.5)));
        assert_eq!(parse("true"), Some(PdfValue::Boolean(true)));
        assert_eq!(parse("null"), Some(PdfValue::Null));
        assert_eq!(parse("endobj"), None);
        assert_eq!(parse(""), None);
    }

    #[test]
    fn reference_and_plain_ints() {
        assert_eq!(
            parse("12 0 R"),
            Some(PdfValue::Reference(ObjectId::new(12, 0)))
        );
        match parse("[1 2 3]") {
            Some(PdfValue::Array(a)) => assert_eq!(a.len(), 3),
            other => panic!("{other:?}"),
        }
        match parse("[1 0 R 5]") {
            Some(PdfValue::Array(a)) => assert_eq!(a.len(), 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn strings() {
        assert_eq!(
            parse("(a\\(b\\) (nested) \\101)"),
            Some(PdfValue::String(b"a(b) (nested) A".to_vec()))
        );
        assert_eq!(
            parse("<48656C6C6F>"),
            Some(PdfValue::String(b"Hello".to_vec()))
        );
        assert_eq!(parse("<7>"), Some(PdfValue::String(vec![0x70])));
    }

    #[test]
    fn names_decode_hex_escapes() {
        match parse("/J#61vaScript") {
            Some(PdfValue::Name(n)) => assert!(n.is("JavaScript")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn dictionary_with_junk_recovers() {
        let v = parse("<< /Type /Page junk /Count 3 /Kids [4 0 R] >>").unwrap();
        let d = v.as_dict().unwrap();
        assert!(d.name_is("Type", "Page"));
        assert_eq!(d.get("Count"), Some(&PdfValue::Integer(3)));
        assert!(d.contains_key("Kids"));
    }

    #[test]
    fn unterminated_dict_stops_at_endobj() {
        let mut lx = Lexer::new(b"<< /A 1 endobj", 0);
        let v = lx.parse_value().unwrap();
        assert_eq!(v.as_dict().unwrap().len(), 1);
        assert!(lx.eat_keyword(b"endobj"));
    }

    #[test]
    fn deep_nesting_terminates() {
        let s = "[".repeat(10_000);
        let _ = parse(&s);
        let s = "<<".repeat(10_000);
        let _ = parse(&s);
    }
}
