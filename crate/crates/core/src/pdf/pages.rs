use std::collections::HashSet;

use super::{ObjectId, ParseWarning, PdfDocument, PdfValue, DEFAULT_PAGE_NODE_LIMIT};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PageTreeWalk {
    pub pages: usize,
    /// True when the count came from the `/Type /Page` object fallback.
    pub used_fallback: bool,
    pub warnings: Vec<ParseWarning>,
}

/// Page count with the default node cap.
pub fn count_pages(doc: &PdfDocument) -> usize {
    walk_page_tree(doc, DEFAULT_PAGE_NODE_LIMIT).pages
}

/// Walk `/Root -> /Pages` counting leaf pages. Falls back to counting
/// `/Type /Page` objects when the tree is missing or yields nothing.
pub fn walk_page_tree(doc: &PdfDocument, node_cap: usize) -> PageTreeWalk {
    let mut warnings = Vec::new();
    let root_pages = doc
        .trailer
        .as_ref()
        .and_then(|t| t.get("Root"))
        .and_then(|r| doc.resolve_dict(r))
        .and_then(|catalog| catalog.get("Pages"));

    let mut pages = 0usize;
    if let Some(start) = root_pages {
        let mut visited: HashSet<ObjectId> = HashSet::new();
        let mut stack: Vec<&PdfValue> = vec![start];
        let mut nodes = 0usize;
        let mut cycle = false;
        while let Some(node) = stack.pop() {
            nodes += 1;
            if nodes > node_cap {
                warnings.push(ParseWarning::PageTreeCapReached);
                break;
            }
            let value = match node {
                PdfValue::Reference(id) => {
                    if !visited.insert(*id) {
                        cycle = true;
                        continue;
                    }
                    match doc.get(*id) {
                        Some(obj) => &obj.value,
                        None => continue,
                    }
                }
                direct => direct,
            };
            let Some(dict) = value.as_dict() else {
                continue;
            };
            if dict.name_is("Type", "Page") {
                pages += 1;
            } else if let Some(PdfValue::Array(kids)) = dict.get("Kids") {
                stack.extend(kids.iter().rev());
            }
        }
        if cycle {
            warnings.push(ParseWarning::PageTreeCycle);
        }
    }

    let mut used_fallback = false;
    if pages == 0 {
        let fallback = doc
            .objects
            .iter()
            .filter(|o| o.value.as_dict().is_some_and(|d| d.name_is("Type", "Page")))
            .count();
        if fallback > 0 {
            used_fallback = true;
            if root_pages.is_some() {
                warnings.push(ParseWarning::PageTreeBroken);
            }
        }
        pages = fallback;
    }
    PageTreeWalk {
        pages,
        used_fallback,
        warnings,
    }
}
