//! Conversion of raw uploaded bytes into normalized plain text.
//!
//! Two formats are understood: UTF-8 plain text and HTML. Both paths are lossy
//! rather than failing: undecodable bytes become U+FFFD, so one bad file never
//! blocks a batch.

use std::collections::HashSet;
use std::fmt;
use std::ops::Deref;
use std::path::Path;

use scraper::{Html, Node, Selector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIME_PLAIN: &str = "text/plain";
pub const MIME_HTML: &str = "text/html";

/// Tags whose text is separated from its neighbours by a blank line.
pub const BLOCK_TAGS: &[&str] = &[
    "p", "div", "li", "ul", "ol", "h1", "h2", "h3", "h4", "h5", "h6", "table", "tr", "td", "th",
    "blockquote", "pre", "br", "hr",
];

/// Tags whose whole subtree is dropped.
const SKIPPED_TAGS: &[&str] = &["script", "style", "head", "noscript", "template"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawContent {
    pub bytes: Vec<u8>,
    pub mime_type: String,
    pub name: String,
}

impl RawContent {
    pub fn new(bytes: impl Into<Vec<u8>>, mime_type: impl Into<String>, name: impl Into<String>) -> Self {
        Self {
            bytes: bytes.into(),
            mime_type: mime_type.into(),
            name: name.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MediaType {
    #[serde(alias = "txt")]
    Text,
    Html,
}

impl MediaType {
    /// Parses a MIME type, ignoring parameters such as `charset`.
    pub fn from_mime(mime: &str) -> Option<Self> {
        let essence = mime.split(';').next().unwrap_or("").trim().to_ascii_lowercase();
        match essence.as_str() {
            MIME_PLAIN => Some(MediaType::Text),
            MIME_HTML | "application/xhtml+xml" => Some(MediaType::Html),
            _ => None,
        }
    }

    pub fn from_path(path: &Path) -> Option<Self> {
        let ext = path.extension()?.to_str()?.to_ascii_lowercase();
        match ext.as_str() {
            "txt" => Some(MediaType::Text),
            "html" | "htm" => Some(MediaType::Html),
            _ => None,
        }
    }

    pub fn mime(self) -> &'static str {
        match self {
            MediaType::Text => MIME_PLAIN,
            MediaType::Html => MIME_HTML,
        }
    }
}

impl std::str::FromStr for MediaType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "txt" | "text" | "plain" => Ok(MediaType::Text),
            "html" | "htm" => Ok(MediaType::Html),
            other => MediaType::from_mime(other).ok_or_else(|| Error::UnsupportedMedia(s.to_string())),
        }
    }
}

/// UTF-8 text with LF line endings and no C0 control characters other than
/// LF and TAB.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PlainText(String);

impl PlainText {
    /// Normalizes `text` so that it satisfies the plain-text invariants.
    pub fn new(text: &str) -> Self {
        PlainText(sanitize(text))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn into_string(self) -> String {
        self.0
    }

    /// Number of Unicode scalar values.
    pub fn char_count(&self) -> u64 {
        self.0.chars().count() as u64
    }
}

impl Deref for PlainText {
    type Target = str;

    fn deref(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for PlainText {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for PlainText {
    fn from(s: &str) -> Self {
        PlainText::new(s)
    }
}

fn is_disallowed_control(c: char) -> bool {
    (c as u32) < 0x20 && c != '\n' && c != '\t'
}

fn sanitize(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        if c == '\r' {
            out.push('\n');
            if chars.peek() == Some(&'\n') {
                chars.next();
            }
        } else if !is_disallowed_control(c) {
            out.push(c);
        }
    }
    // Stripped last so a BOM hidden behind removed control characters still goes.
    let body = out.trim_start_matches('\u{feff}');
    if body.len() == out.len() {
        out
    } else {
        body.to_string()
    }
}

/// Decodes plain-text bytes: lossy UTF-8, BOM stripped, CR/CRLF to LF, and
/// control characters other than LF and TAB removed.
pub fn normalize_plain_text(raw: &RawContent) -> PlainText {
    PlainText(sanitize(&String::from_utf8_lossy(&raw.bytes)))
}

/// HTML to plain text with a configurable exclusion list for page chrome.
#[derive(Debug, Clone, Default)]
pub struct HtmlExtractor {
    exclude: Vec<Selector>,
}

impl HtmlExtractor {
    /// `exclude` holds CSS selectors (e.g. `nav`, `#footer`, `.breadcrumb`)
    /// whose matching subtrees are dropped.
    pub fn new<S: AsRef<str>>(exclude: &[S]) -> Result<Self> {
        let exclude = exclude
            .iter()
            .map(|s| {
                Selector::parse(s.as_ref())
                    .map_err(|e| Error::Config(format!("invalid selector {:?}: {e}", s.as_ref())))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { exclude })
    }

    pub fn extract(&self, raw: &RawContent) -> PlainText {
        let source = String::from_utf8_lossy(&raw.bytes);
        let doc = Html::parse_document(&source);

        let excluded: HashSet<_> = self
            .exclude
            .iter()
            .flat_map(|sel| doc.select(sel).map(|el| el.id()))
            .collect();

        let mut blocks: Vec<String> = Vec::new();
        let mut current = String::new();
        let mut skipping = None;

        for edge in doc.tree.root().traverse() {
            match edge {
                ego_tree::iter::Edge::Open(node) => {
                    if skipping.is_some() {
                        continue;
                    }
                    match node.value() {
                        Node::Element(el) => {
                            let name = el.name();
                            if SKIPPED_TAGS.contains(&name) || excluded.contains(&node.id()) {
                                skipping = Some(node.id());
                            } else if BLOCK_TAGS.contains(&name) {
                                flush_block(&mut current, &mut blocks);
                            }
                        }
                        Node::Text(text) => current.push_str(text),
                        _ => {}
                    }
                }
                ego_tree::iter::Edge::Close(node) => {
                    if let Some(id) = skipping {
                        if id == node.id() {
                            skipping = None;
                        }
                        continue;
                    }
                    if let Node::Element(el) = node.value() {
                        if BLOCK_TAGS.contains(&el.name()) {
                            flush_block(&mut current, &mut blocks);
                        }
                    }
                }
            }
        }
        flush_block(&mut current, &mut blocks);

        PlainText::new(&blocks.join("\n\n"))
    }
}

fn flush_block(current: &mut String, blocks: &mut Vec<String>) {
    let mut collapsed = String::with_capacity(current.len());
    for word in current.split_whitespace() {
        if !collapsed.is_empty() {
            collapsed.push(' ');
        }
        collapsed.push_str(word);
    }
    if !collapsed.is_empty() {
        blocks.push(collapsed);
    }
    current.clear();
}

/// Extracts HTML with no exclusion list.
pub fn extract_html(raw: &RawContent) -> PlainText {
    HtmlExtractor::default().extract(raw)
}

/// Dispatches on the MIME type of `raw`.
pub fn extract(raw: &RawContent, html: &HtmlExtractor) -> Result<PlainText> {
    match MediaType::from_mime(&raw.mime_type) {
        Some(MediaType::Text) => Ok(normalize_plain_text(raw)),
        Some(MediaType::Html) => Ok(html.extract(raw)),
        None => Err(Error::UnsupportedMedia(raw.mime_type.clone())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn text(bytes: &[u8]) -> String {
        normalize_plain_text(&RawContent::new(bytes, MIME_PLAIN, "t")).into_string()
    }

    fn html(src: &str) -> String {
        extract_html(&RawContent::new(src, MIME_HTML, "h")).into_string()
    }

    fn satisfies_invariants(s: &str) -> bool {
        !s.starts_with('\u{feff}') && !s.chars().any(|c| c == '\r' || is_disallowed_control(c))
    }

    /// Decodes UTF-8 by walking `from_utf8` errors, one U+FFFD per invalid
    /// maximal subpart.
    fn oracle_decode(mut bytes: &[u8]) -> String {
        let mut out = String::new();
        loop {
            match std::str::from_utf8(bytes) {
                Ok(s) => {
                    out.push_str(s);
                    return out;
                }
                Err(e) => {
                    let (good, rest) = bytes.split_at(e.valid_up_to());
                    out.push_str(std::str::from_utf8(good).unwrap());
                    out.push('\u{fffd}');
                    match e.error_len() {
                        Some(n) => bytes = &rest[n..],
                        None => return out,
                    }
                }
            }
        }
    }

    #[test]
    fn crlf_becomes_lf() {
        assert_eq!(text(b"A.\r\nB."), "A.\nB.");
        assert_eq!(text(b"A.\rB."), "A.\nB.");
    }

    #[test]
    fn empty_is_identity() {
        assert_eq!(text(b""), "");
    }

    #[test]
    fn invalid_byte_replaced() {
        let bytes = [0x41, 0x2E, 0xFF, 0x42, 0x2E];
        assert_eq!(oracle_decode(&bytes), "A.\u{FFFD}B.");
        assert_eq!(text(&bytes), "A.\u{FFFD}B.");
    }

    #[test]
    fn bom_and_controls_removed() {
        assert_eq!(text(b"\xEF\xBB\xBFHi\x00 there\x07.\tOk"), "Hi there.\tOk");
    }

    #[test]
    fn paragraphs_separate_blocks() {
        assert_eq!(html("<p>A.</p><p>B.</p>"), "A.\n\nB.");
    }

    #[test]
    fn inline_tags_do_not_break() {
        assert_eq!(html("<b>A</b> B."), "A B.");
        assert_eq!(html("<p>Hello <em>big</em> world.</p>"), "Hello big world.");
    }

    #[test]
    fn entities_decoded() {
        assert_eq!(html("<p>x &amp; y.</p>"), "x & y.");
        assert_eq!(html("<p>&lt;tag&gt; &quot;q&quot; &#233;</p>"), "<tag> \"q\" é");
    }

    #[test]
    fn script_style_and_head_dropped() {
        let src = "<html><head><title>T</title><style>p{}</style></head>\
                   <body><script>var x = 1;</script><p>Kept.</p></body></html>";
        assert_eq!(html(src), "Kept.");
    }

    #[test]
    fn br_and_list_items_break() {
        assert_eq!(html("One.<br>Two."), "One.\n\nTwo.");
        assert_eq!(html("<ul><li>a</li><li>b</li></ul>"), "a\n\nb");
    }

    #[test]
    fn malformed_markup_tolerated() {
        assert_eq!(html("<p>Open <b>bold</p><p>Next."), "Open bold\n\nNext.");
        assert_eq!(html("<div><p>unterminated"), "unterminated");
    }

    #[test]
    fn exclusion_list_drops_chrome() {
        let ex = HtmlExtractor::new(&["nav", ".footer"]).unwrap();
        let raw = RawContent::new(
            "<nav><a>Home</a></nav><p>Body text.</p><div class=\"footer\">Legal.</div>",
            MIME_HTML,
            "x",
        );
        assert_eq!(ex.extract(&raw).as_str(), "Body text.");
        assert!(HtmlExtractor::new(&["[[bad"]).is_err());
    }

    #[test]
    fn media_type_detection() {
        assert_eq!(MediaType::from_path(Path::new("a/b.TXT")), Some(MediaType::Text));
        assert_eq!(MediaType::from_path(Path::new("x.htm")), Some(MediaType::Html));
        assert_eq!(MediaType::from_path(Path::new("x.pdf")), None);
        assert_eq!(MediaType::from_mime("text/plain; charset=utf-8"), Some(MediaType::Text));
        let raw = RawContent::new("x", "application/pdf", "x.pdf");
        assert!(matches!(extract(&raw, &HtmlExtractor::default()), Err(Error::UnsupportedMedia(_))));
    }

    proptest! {
        #[test]
        fn plain_output_satisfies_invariants(bytes in proptest::collection::vec(any::<u8>(), 0..256)) {
            let once = text(&bytes);
            prop_assert!(satisfies_invariants(&once));
            prop_assert_eq!(text(once.as_bytes()), once.clone());
        }

        #[test]
        fn plain_matches_decode_oracle_on_clean_bytes(bytes in proptest::collection::vec(0x20u8..0xff, 0..256)) {
            let expected: String = oracle_decode(&bytes).chars().filter(|c| !is_disallowed_control(*c) && *c != '\r').collect();
            prop_assert_eq!(text(&bytes), expected.trim_start_matches('\u{feff}'));
        }

        #[test]
        fn html_output_satisfies_invariants(bytes in proptest::collection::vec(any::<u8>(), 0..256)) {
            let out = extract_html(&RawContent::new(bytes, MIME_HTML, "f"));
            prop_assert!(satisfies_invariants(&out));
        }

        #[test]
        fn html_blocks_never_merge(parts in proptest::collection::vec("[a-z]{1,8}( [a-z]{1,8}){0,3}\\.", 1..6),
                                   tags in proptest::collection::vec(prop::sample::select(vec!["p", "div", "li", "h2", "blockquote"]), 6)) {
            let src: String = parts.iter().zip(&tags).map(|(p, t)| format!("<{t}>{p}</{t}>")).collect();
            let out = html(&src);
            let blocks: Vec<&str> = out.split("\n\n").collect();
            prop_assert_eq!(blocks, parts.iter().map(String::as_str).collect::<Vec<_>>());
        }
    }
}
