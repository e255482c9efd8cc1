//! Seeded generator for labelled synthetic PDF corpora.
//!
//! Benign files are multi-page text documents with ordinary metadata, fonts,
//! links and images. Malicious files are smaller host documents carrying
//! independently sampled traits: JavaScript, `/OpenAction`, `/Launch`, a
//! high-entropy Flate stream, `#xx`-obfuscated names and a broken xref.
//! Each trait is omitted with probability `trait_overlap`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use flate2::write::ZlibEncoder;
use flate2::Compression;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const MANIFEST: &str = "manifest.csv";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorpusSpec {
    pub n_benign: usize,
    pub n_malicious: usize,
    pub seed: u64,
    pub trait_overlap: f64,
}

impl CorpusSpec {
    pub fn new(n_benign: usize, n_malicious: usize, seed: u64) -> Self {
        CorpusSpec {
            n_benign,
            n_malicious,
            seed,
            trait_overlap: 0.0,
        }
    }

    pub fn with_overlap(mut self, overlap: f64) -> Self {
        self.trait_overlap = overlap;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_benign == 0 || self.n_malicious == 0 {
            return Err(Error::InvalidConfig(format!(
                "corpus needs at least one file per class, got {} benign and {} malicious",
                self.n_benign, self.n_malicious
            )));
        }
        if !(0.0..=1.0).contains(&self.trait_overlap) {
            return Err(Error::InvalidFraction(self.trait_overlap));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.n_benign + self.n_malicious
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MaliciousTraits {
    pub javascript: bool,
    pub open_action: bool,
    pub launch: bool,
    pub high_entropy_stream: bool,
    pub obfuscated_names: bool,
    pub broken_xref: bool,
}

impl MaliciousTraits {
    pub fn all() -> Self {
        MaliciousTraits {
            javascript: true,
            open_action: true,
            launch: true,
            high_entropy_stream: true,
            obfuscated_names: true,
            broken_xref: true,
        }
    }

    /// Each trait present with probability `1 - overlap`.
    pub fn sample<R: Rng>(rng: &mut R, overlap: f64) -> Self {
        let mut keep = || rng.gen::<f64>() >= overlap;
        MaliciousTraits {
            javascript: keep(),
            open_action: keep(),
            launch: keep(),
            high_entropy_stream: keep(),
            obfuscated_names: keep(),
            broken_xref: keep(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticFile {
    pub name: String,
    pub label: u8,
    pub bytes: Vec<u8>,
}

/// Files are numbered benign first, then malicious; each draws from its own
/// ChaCha stream so any file can be produced independently.
pub fn generate_file(spec: &CorpusSpec, index: usize) -> SyntheticFile {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(index as u64);
    if index < spec.n_benign {
        SyntheticFile {
            name: format!("benign_{index:05}.pdf"),
            label: 0,
            bytes: benign_pdf(&mut rng),
        }
    } else {
        let traits = MaliciousTraits::sample(&mut rng, spec.trait_overlap);
        SyntheticFile {
            name: format!("malicious_{:05}.pdf", index - spec.n_benign),
            label: 1,
            bytes: malicious_pdf(&mut rng, &traits),
        }
    }
}

pub fn generate_in_memory(spec: &CorpusSpec) -> Result<Vec<SyntheticFile>> {
    spec.validate()?;
    Ok((0..spec.len()).map(|i| generate_file(spec, i)).collect())
}

/// Write every file plus `manifest.csv` (`path,label`, paths relative to
/// `dir`) and return the manifest with full paths.
pub fn generate_corpus(spec: &CorpusSpec, dir: &Path) -> Result<Vec<(PathBuf, u8)>> {
    spec.validate()?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut manifest = Vec::with_capacity(spec.len());
    let mut listing = String::from("path,label\n");
    for i in 0..spec.len() {
        let file = generate_file(spec, i);
        let path = dir.join(&file.name);
        std::fs::write(&path, &file.bytes).map_err(|e| Error::io(&path, e))?;
        let _ = writeln!(listing, "{},{}", file.name, file.label);
        manifest.push((path, file.label));
    }
    let mpath = dir.join(MANIFEST);
    crate::pipeline::write_atomic(&mpath, listing.as_bytes())?;
    Ok(manifest)
}

const WORDS: &[&str] = &[
    "annual", "report", "summary", "revenue", "quarter", "customer", "service", "policy",
    "network", "update", "schedule", "meeting", "project", "budget", "review", "design", "invoice",
    "contract", "delivery", "support", "training", "results", "analysis", "market", "product",
    "system", "security", "office", "account", "balance", "notes", "draft",
];

const FIRST_NAMES: &[&str] = &[
    "Alex", "Sam", "Jordan", "Riley", "Morgan", "Casey", "Taylor",
];
const PRODUCERS: &[&str] = &[
    "Acrobat Distiller 10.0",
    "Microsoft Word 2016",
    "LibreOffice 6.4",
    "pdfTeX-1.40.20",
    "Quartz PDFContext",
    "Ghostscript 9.50",
];

fn sentence<R: Rng>(rng: &mut R, words: usize) -> String {
    (0..words)
        .map(|_| WORDS[rng.gen_range(0..WORDS.len())])
        .collect::<Vec<_>>()
        .join(" ")
}

fn page_text<R: Rng>(rng: &mut R, lines: usize) -> Vec<u8> {
    let mut s = String::from("BT /F1 11 Tf 14 TL 72 740 Td\n");
    for _ in 0..lines {
        let n = rng.gen_range(6..14);
        let _ = writeln!(s, "({}) '", sentence(rng, n));
    }
    s.push_str("ET\n");
    s.into_bytes()
}

fn deflate(data: &[u8]) -> Vec<u8> {
    let mut enc = ZlibEncoder::new(Vec::new(), Compression::default());
    enc.write_all(data).expect("writing to a Vec cannot fail");
    enc.finish().expect("writing to a Vec cannot fail")
}

fn pdf_date<R: Rng>(rng: &mut R) -> String {
    format!(
        "D:{:04}{:02}{:02}{:02}{:02}{:02}Z",
        rng.gen_range(2005..2019),
        rng.gen_range(1..=12),
        rng.gen_range(1..=28),
        rng.gen_range(0..24),
        rng.gen_range(0..60),
        rng.gen_range(0..60)
    )
}

/// Spell `name` with some characters as `#xx` escapes.
fn obfuscate<R: Rng>(rng: &mut R, name: &str) -> String {
    let mut out = String::new();
    for (i, c) in name.chars().enumerate() {
        if i == 0 || rng.gen_bool(0.4) {
            let _ = write!(out, "#{:02X}", c as u32);
        } else {
            out.push(c);
        }
    }
    out
}

/// Minimal object writer with a classic xref table.
struct PdfWriter {
    buf: Vec<u8>,
    offsets: BTreeMap<u32, usize>,
    next: u32,
}

impl PdfWriter {
    fn new(version: &str) -> Self {
        let mut buf = format!("%PDF-{version}\n").into_bytes();
        buf.extend_from_slice(b"%\xE2\xE3\xCF\xD3\n");
        PdfWriter {
            buf,
            offsets: BTreeMap::new(),
            next: 1,
        }
    }

    fn reserve(&mut self) -> u32 {
        let n = self.next;
        self.next += 1;
        n
    }

    fn object(&mut self, num: u32, body: &str) {
        self.offsets.insert(num, self.buf.len());
        self.buf
            .extend_from_slice(format!("{num} 0 obj\n{body}\nendobj\n").as_bytes());
    }

    fn stream(&mut self, num: u32, dict: &str, data: &[u8]) {
        self.offsets.insert(num, self.buf.len());
        self.buf.extend_from_slice(
            format!("{num} 0 obj\n<< {dict} /Length {} >>\nstream\n", data.len()).as_bytes(),
        );
        self.buf.extend_from_slice(data);
        self.buf.extend_from_slice(b"\nendstream\nendobj\n");
    }

    /// Write the xref for objects added since the last section, then the
    /// trailer and `%%EOF`. `corrupt` shifts every recorded offset.
    fn finish_section<R: Rng>(
        &mut self,
        trailer: &str,
        prev: Option<usize>,
        corrupt: Option<&mut R>,
    ) -> usize {
        let xref_at = self.buf.len();
        let shift = corrupt.map(|r| r.gen_range(3..40)).unwrap_or(0);
        let mut s = String::from("xref\n");
        if prev.is_none() {
            s.push_str("0 1\n0000000000 65535 f \n");
        }
        let nums: Vec<u32> = self.offsets.keys().copied().collect();
        let mut i = 0;
        while i < nums.len() {
            let mut j = i;
            while j + 1 < nums.len() && nums[j + 1] == nums[j] + 1 {
                j += 1;
            }
            let _ = writeln!(s, "{} {}", nums[i], j - i + 1);
            for n in &nums[i..=j] {
                let _ = writeln!(s, "{:010} 00000 n ", self.offsets[n] + shift);
            }
            i = j + 1;
        }
        let prev = prev.map(|p| format!(" /Prev {p}")).unwrap_or_default();
        let _ = write!(
            s,
            "trailer\n<< /Size {}{prev} {trailer} >>\nstartxref\n{xref_at}\n%%EOF\n",
            self.next
        );
        self.buf.extend_from_slice(s.as_bytes());
        self.offsets.clear();
        xref_at
    }
}

struct Names {
    type_: String,
    page: String,
    pages: String,
    font: String,
    javascript: String,
}

impl Names {
    fn plain() -> Self {
        Names {
            type_: "Type".into(),
            page: "Page".into(),
            pages: "Pages".into(),
            font: "Font".into(),
            javascript: "JavaScript".into(),
        }
    }

    fn obfuscated<R: Rng>(rng: &mut R) -> Self {
        Names {
            type_: obfuscate(rng, "Type"),
            page: obfuscate(rng, "Page"),
            pages: obfuscate(rng, "Pages"),
            font: obfuscate(rng, "Font"),
            javascript: obfuscate(rng, "JavaScript"),
        }
    }
}

/// Object numbers reserved by [`write_pages`]; the caller writes the
/// catalog and Info bodies.
struct Skeleton {
    catalog: u32,
    info: u32,
    page_tree: u32,
    pages: Vec<u32>,
}

fn write_pages<R: Rng>(
    w: &mut PdfWriter,
    rng: &mut R,
    names: &Names,
    n_pages: usize,
    compress_p: f64,
    page_extra: &mut dyn FnMut(&mut PdfWriter, &mut R, usize) -> String,
) -> Skeleton {
    let catalog = w.reserve();
    let pages_id = w.reserve();
    let font = w.reserve();
    let info = w.reserve();
    let base_font = if rng.gen_bool(0.1) {
        "Times#20Roman"
    } else {
        "Helvetica"
    };
    w.object(
        font,
        &format!(
            "<< /{} /{} /Subtype /Type1 /BaseFont /{base_font} >>",
            names.type_, names.font
        ),
    );
    let mut kids = Vec::new();
    for p in 0..n_pages {
        let page = w.reserve();
        let content = w.reserve();
        let lines = rng.gen_range(8..40);
        let text = page_text(rng, lines);
        if rng.gen_bool(compress_p) {
            w.stream(content, "/Filter /FlateDecode", &deflate(&text));
        } else {
            w.stream(content, "", &text);
        }
        let extra = page_extra(w, rng, p);
        w.object(
            page,
            &format!(
                "<< /{} /{} /Parent {pages_id} 0 R /MediaBox [0 0 612 792] /Resources << /Font << /F1 {font} 0 R >> >> /Contents {content} 0 R{extra} >>",
                names.type_, names.page
            ),
        );
        kids.push(page);
    }
    let kid_refs: Vec<String> = kids.iter().map(|k| format!("{k} 0 R")).collect();
    w.object(
        pages_id,
        &format!(
            "<< /{} /{} /Kids [{}] /Count {} >>",
            names.type_,
            names.pages,
            kid_refs.join(" "),
            kids.len()
        ),
    );
    Skeleton {
        catalog,
        info,
        page_tree: pages_id,
        pages: kids,
    }
}

fn info_body<R: Rng>(rng: &mut R, good_date: bool) -> String {
    let mut s = String::from("<<");
    if rng.gen_bool(0.85) {
        let n = rng.gen_range(1..8);
        let _ = write!(s, " /Title ({})", sentence(rng, n));
    }
    if rng.gen_bool(0.7) {
        let _ = write!(
            s,
            " /Author ({})",
            FIRST_NAMES[rng.gen_range(0..FIRST_NAMES.len())]
        );
    }
    if rng.gen_bool(0.9) {
        let _ = write!(
            s,
            " /Producer ({})",
            PRODUCERS[rng.gen_range(0..PRODUCERS.len())]
        );
    }
    if good_date {
        let _ = write!(s, " /CreationDate ({})", pdf_date(rng));
    } else if rng.gen_bool(0.5) {
        s.push_str(" /CreationDate (yesterday)");
    }
    s.push_str(" >>");
    s
}

/// Ordinary multi-page document; never carries action keys.
pub fn benign_pdf<R: Rng>(rng: &mut R) -> Vec<u8> {
    let version = ["1.3", "1.4", "1.5", "1.6", "1.7"][rng.gen_range(0..5)];
    let mut w = PdfWriter::new(version);
    let names = Names::plain();
    let n_pages = rng.gen_range(2..=12);
    let links = rng.gen_bool(0.15);
    let image_page = if rng.gen_bool(0.3) {
        Some(rng.gen_range(0..n_pages))
    } else {
        None
    };
    let mut extra = |w: &mut PdfWriter, rng: &mut R, p: usize| {
        let mut s = String::new();
        if links && rng.gen_bool(0.5) {
            let annot = w.reserve();
            w.object(
                annot,
                &format!(
                    "<< /Type /Annot /Subtype /Link /Rect [72 72 200 90] /A << /S /URI /URI (https://www.example.com/{}) >> >>",
                    WORDS[rng.gen_range(0..WORDS.len())]
                ),
            );
            let _ = write!(s, " /Annots [{annot} 0 R]");
        }
        if image_page == Some(p) {
            let img = w.reserve();
            let len = rng.gen_range(2_000..20_000);
            let mut data = vec![0xFF, 0xD8, 0xFF, 0xE0];
            data.extend((0..len).map(|_| rng.gen::<u8>()));
            w.stream(
                img,
                "/Type /XObject /Subtype /Image /Width 64 /Height 64 /ColorSpace /DeviceRGB /BitsPerComponent 8 /Filter /DCTDecode",
                &data,
            );
            let _ = write!(s, " /Thumb {img} 0 R");
        }
        s
    };
    let sk = write_pages(&mut w, rng, &names, n_pages, 0.5, &mut extra);
    let good_date = rng.gen_bool(0.9);
    let body = info_body(rng, good_date);
    w.object(sk.info, &body);
    let mut catalog = format!("<< /Type /Catalog /Pages {} 0 R", sk.page_tree);
    if rng.gen_bool(0.2) {
        let meta = w.reserve();
        let xmp = format!(
            "<?xpacket begin=\"\" id=\"W5M0MpCehiHzreSzNTczkc9d\"?><x:xmpmeta xmlns:x=\"adobe:ns:meta/\"><dc:title>{}</dc:title></x:xmpmeta><?xpacket end=\"w\"?>",
            sentence(rng, 3)
        );
        w.stream(meta, "/Type /Metadata /Subtype /XML", xmp.as_bytes());
        let _ = write!(catalog, " /Metadata {meta} 0 R");
    }
    if rng.gen_bool(0.1) {
        let field = w.reserve();
        w.object(
            field,
            &format!(
                "<< /FT /Tx /T (name) /V ({}) /P {} 0 R >>",
                FIRST_NAMES[rng.gen_range(0..FIRST_NAMES.len())],
                sk.pages[0]
            ),
        );
        let _ = write!(catalog, " /AcroForm << /Fields [{field} 0 R] >>");
    }
    catalog.push_str(" >>");
    w.object(sk.catalog, &catalog);
    let trailer = format!("/Root {} 0 R /Info {} 0 R", sk.catalog, sk.info);
    let first = w.finish_section::<R>(&trailer, None, None);
    if rng.gen_bool(0.1) {
        let body = info_body(rng, true);
        w.object(sk.info, &body);
        w.finish_section::<R>(&trailer, Some(first), None);
    }
    w.buf
}

fn js_payload<R: Rng>(rng: &mut R) -> String {
    let var = (0..6)
        .map(|_| rng.gen_range(b'a'..=b'z') as char)
        .collect::<String>();
    let hex: String = (0..rng.gen_range(40..200))
        .map(|_| format!("%u{:04x}", rng.gen::<u16>()))
        .collect();
    format!(
        "var {var} = unescape('{hex}'); while ({var}.length < 0x40000) {var} += {var}; app.alert(eval(String.fromCharCode(104,105)));"
    )
}

/// Small host document carrying the given traits.
pub fn malicious_pdf<R: Rng>(rng: &mut R, traits: &MaliciousTraits) -> Vec<u8> {
    let version = ["1.3", "1.4", "1.5", "1.6", "1.7"][rng.gen_range(0..5)];
    let mut w = PdfWriter::new(version);
    let names = if traits.obfuscated_names {
        Names::obfuscated(rng)
    } else {
        Names::plain()
    };
    let n_pages = rng.gen_range(1..=3);
    let launch = traits.launch;
    let mut extra = |w: &mut PdfWriter, rng: &mut R, p: usize| {
        if launch && p == 0 {
            let annot = w.reserve();
            let target = ["cmd.exe", "powershell.exe", "/bin/sh", "calc.exe"][rng.gen_range(0..4)];
            w.object(
                annot,
                &format!(
                    "<< /Type /Annot /Subtype /Link /Rect [0 0 612 792] /A << /S /Launch /F ({target}) /NewWindow true >> >>"
                ),
            );
            format!(" /Annots [{annot} 0 R]")
        } else {
            String::new()
        }
    };
    let sk = write_pages(&mut w, rng, &names, n_pages, 0.5, &mut extra);
    let good_date = rng.gen_bool(0.6);
    let body = info_body(rng, good_date);
    w.object(sk.info, &body);

    let mut catalog = format!(
        "<< /{} /Catalog /{} {} 0 R",
        names.type_, names.pages, sk.page_tree
    );
    let js = if traits.javascript {
        let action = w.reserve();
        let code = w.reserve();
        let payload = js_payload(rng);
        if rng.gen_bool(0.5) {
            w.stream(code, "/Filter /FlateDecode", &deflate(payload.as_bytes()));
        } else {
            w.stream(code, "", payload.as_bytes());
        }
        w.object(
            action,
            &format!(
                "<< /{} /Action /S /{} /JS {code} 0 R >>",
                names.type_, names.javascript
            ),
        );
        let tree = w.reserve();
        w.object(tree, &format!("<< /Names [(init) {action} 0 R] >>"));
        let _ = write!(catalog, " /Names << /{} {tree} 0 R >>", names.javascript);
        Some(action)
    } else {
        None
    };
    if traits.open_action {
        match js {
            Some(action) => {
                let _ = write!(catalog, " /OpenAction {action} 0 R");
            }
            None => {
                let _ = write!(catalog, " /OpenAction [{} 0 R /Fit]", sk.pages[0]);
            }
        }
    }
    if traits.high_entropy_stream {
        let blob = w.reserve();
        let len = rng.gen_range(4_000..40_000);
        let data: Vec<u8> = (0..len).map(|_| rng.gen()).collect();
        w.stream(blob, "/Filter /FlateDecode", &deflate(&data));
        let _ = write!(catalog, " /PieceInfo << /Data {blob} 0 R >>");
    }
    catalog.push_str(" >>");
    w.object(sk.catalog, &catalog);
    let trailer = format!("/Root {} 0 R /Info {} 0 R", sk.catalog, sk.info);
    if traits.broken_xref {
        w.finish_section(&trailer, None, Some(rng));
    } else {
        w.finish_section::<R>(&trailer, None, None);
    }
    w.buf
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn obfuscation_keeps_meaning() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = obfuscate(&mut rng, "JavaScript");
        assert!(s.starts_with("#4A"));
        let doc = crate::pdf::parse_document(
            format!("%PDF-1.4\n1 0 obj << /{s} 1 >> endobj\n").as_bytes(),
        );
        assert!(doc.objects[0]
            .value
            .as_dict()
            .unwrap()
            .contains_key("JavaScript"));
    }

    #[test]
    fn spec_validation() {
        assert!(CorpusSpec::new(0, 1, 0).validate().is_err());
        assert!(CorpusSpec::new(1, 1, 0)
            .with_overlap(1.5)
            .validate()
            .is_err());
        assert!(CorpusSpec::new(1, 1, 0)
            .with_overlap(1.0)
            .validate()
            .is_ok());
    }
}
