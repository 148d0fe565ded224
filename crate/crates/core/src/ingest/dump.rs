//! Streaming dump reader.
//!
//! Two input formats are accepted and detected from the first visible byte:
//!
//! * XML: `<page><title>…</title><id>…</id><text>…</text></page>` records,
//!   optionally wrapped in a root element. Only the first `<id>` outside a
//!   `<revision>` is used.
//! * JSON lines: `{"id":…, "title":…, "text":…, "anchors":[{"target":…,
//!   "start":…, "end":…}]}`, one object per line.
//!
//! Records are yielded one at a time; memory does not grow with the number of
//! records read.

use std::io::BufRead;

use quick_xml::events::Event;
use quick_xml::Reader;
use serde::Deserialize;

use super::{RawAnchor, RawArticle, RawBody};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ParseMode {
    /// Skip malformed records and count them.
    #[default]
    Lenient,
    /// Abort on the first malformed record.
    Strict,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DumpFormat {
    Xml,
    Jsonl,
    Empty,
}

pub struct DumpReader<R: BufRead> {
    inner: Inner<R>,
    mode: ParseMode,
    skipped: usize,
    records: usize,
    failed: bool,
}

enum Inner<R: BufRead> {
    Xml { reader: Reader<R>, buf: Vec<u8> },
    Jsonl { reader: R, line: String },
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Field {
    None,
    Title,
    Id,
    Text,
}

#[derive(Debug, Default)]
struct Page {
    title: Option<String>,
    id: Option<String>,
    text: Option<String>,
    in_revision: bool,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum JsonId {
    Num(u64),
    Str(String),
}

#[derive(Deserialize)]
struct JsonRecord {
    id: JsonId,
    title: String,
    text: String,
    #[serde(default)]
    anchors: Vec<RawAnchor>,
}

impl<R: BufRead> DumpReader<R> {
    pub fn new(mut reader: R, mode: ParseMode) -> Result<Self> {
        let format = detect(&mut reader)?;
        let inner = match format {
            DumpFormat::Xml => {
                let mut reader = Reader::from_reader(reader);
                let config = reader.config_mut();
                config.trim_text(false);
                config.check_end_names = false;
                Inner::Xml { reader, buf: Vec::with_capacity(64 * 1024) }
            }
            DumpFormat::Jsonl => Inner::Jsonl { reader, line: String::new() },
            DumpFormat::Empty => Inner::Empty,
        };
        Ok(Self { inner, mode, skipped: 0, records: 0, failed: false })
    }

    pub fn format(&self) -> DumpFormat {
        match self.inner {
            Inner::Xml { .. } => DumpFormat::Xml,
            Inner::Jsonl { .. } => DumpFormat::Jsonl,
            Inner::Empty => DumpFormat::Empty,
        }
    }

    /// Malformed records skipped so far (lenient mode).
    pub fn skipped(&self) -> usize {
        self.skipped
    }

    /// Handles a malformed record; `Some(err)` when the caller must surface it.
    fn malformed(&mut self, reason: impl Into<String>) -> Option<Error> {
        match self.mode {
            ParseMode::Lenient => {
                self.skipped += 1;
                log::debug!("skipping malformed record {}", self.records);
                None
            }
            ParseMode::Strict => {
                self.failed = true;
                Some(Error::MalformedRecord { record: self.records, reason: reason.into() })
            }
        }
    }

    fn next_xml(&mut self) -> Option<Result<RawArticle>> {
        let mut page: Option<Page> = None;
        let mut field = Field::None;
        loop {
            let Inner::Xml { reader, buf } = &mut self.inner else { unreachable!() };
            buf.clear();
            let before = reader.buffer_position();
            let event = reader.read_event_into(buf);
            let event = match event {
                Ok(ev) => ev.into_owned(),
                Err(e) => {
                    let stalled = reader.buffer_position() == before;
                    page = None;
                    field = Field::None;
                    self.records += 1;
                    if let Some(err) = self.malformed(format!("xml error: {e}")) {
                        return Some(Err(err));
                    }
                    if stalled {
                        return None;
                    }
                    continue;
                }
            };
            match event {
                Event::Start(e) => match e.local_name().as_ref() {
                    b"page" => {
                        if page.is_some() {
                            if let Some(err) = self.malformed("page opened before previous page closed") {
                                return Some(Err(err));
                            }
                        }
                        self.records += 1;
                        page = Some(Page::default());
                        field = Field::None;
                    }
                    b"revision" => {
                        if let Some(p) = page.as_mut() {
                            p.in_revision = true;
                        }
                    }
                    b"title" if page.is_some() => {
                        field = Field::Title;
                        page.as_mut().unwrap().title.get_or_insert_with(String::new);
                    }
                    b"id" if page.as_ref().is_some_and(|p| !p.in_revision && p.id.is_none()) => {
                        field = Field::Id;
                        page.as_mut().unwrap().id = Some(String::new());
                    }
                    b"text" if page.as_ref().is_some_and(|p| p.text.is_none()) => {
                        field = Field::Text;
                        page.as_mut().unwrap().text = Some(String::new());
                    }
                    _ => {}
                },
                Event::Empty(e) => {
                    if e.local_name().as_ref() == b"text" {
                        if let Some(p) = page.as_mut() {
                            p.text.get_or_insert_with(String::new);
                        }
                    }
                }
                Event::Text(t) => {
                    if let Some(p) = page.as_mut() {
                        let s = match t.unescape() {
                            Ok(s) => s.into_owned(),
                            Err(_) => String::from_utf8_lossy(&t).into_owned(),
                        };
                        append(p, field, &s);
                    }
                }
                Event::CData(t) => {
                    if let Some(p) = page.as_mut() {
                        append(p, field, &String::from_utf8_lossy(&t));
                    }
                }
                Event::End(e) => match e.local_name().as_ref() {
                    b"page" => {
                        let Some(p) = page.take() else { continue };
                        field = Field::None;
                        match finish_page(p) {
                            Ok(article) => return Some(Ok(article)),
                            Err(reason) => {
                                if let Some(err) = self.malformed(reason) {
                                    return Some(Err(err));
                                }
                            }
                        }
                    }
                    b"revision" => {
                        if let Some(p) = page.as_mut() {
                            p.in_revision = false;
                        }
                    }
                    b"title" | b"id" | b"text" => field = Field::None,
                    _ => {}
                },
                Event::Eof => {
                    if page.is_some() {
                        if let Some(err) = self.malformed("truncated page at end of input") {
                            return Some(Err(err));
                        }
                    }
                    return None;
                }
                _ => {}
            }
        }
    }

    fn next_jsonl(&mut self) -> Option<Result<RawArticle>> {
        loop {
            let Inner::Jsonl { reader, line } = &mut self.inner else { unreachable!() };
            line.clear();
            match reader.read_line(line) {
                Ok(0) => return None,
                Ok(_) => {}
                Err(e) => {
                    self.failed = true;
                    return Some(Err(e.into()));
                }
            }
            if line.trim().is_empty() {
                continue;
            }
            self.records += 1;
            let parsed = serde_json::from_str::<JsonRecord>(line).map_err(|e| e.to_string()).and_then(|rec| {
                let id = match rec.id {
                    JsonId::Num(n) => n,
                    JsonId::Str(s) => s.trim().parse().map_err(|_| format!("non-numeric id {s:?}"))?,
                };
                if rec.title.trim().is_empty() {
                    return Err("empty title".to_string());
                }
                Ok(RawArticle {
                    id,
                    title: rec.title,
                    body: RawBody::Extracted { text: rec.text, anchors: rec.anchors },
                })
            });
            match parsed {
                Ok(a) => return Some(Ok(a)),
                Err(reason) => {
                    if let Some(err) = self.malformed(reason) {
                        return Some(Err(err));
                    }
                }
            }
        }
    }
}

fn append(page: &mut Page, field: Field, s: &str) {
    let target = match field {
        Field::Title => page.title.as_mut(),
        Field::Id => page.id.as_mut(),
        Field::Text => page.text.as_mut(),
        Field::None => None,
    };
    if let Some(t) = target {
        t.push_str(s);
    }
}

fn finish_page(p: Page) -> std::result::Result<RawArticle, String> {
    let title = p.title.map(|t| t.trim().to_string()).filter(|t| !t.is_empty()).ok_or("missing title")?;
    let id = p.id.ok_or("missing id")?;
    let id = id.trim().parse::<u64>().map_err(|_| format!("non-numeric id {id:?}"))?;
    let text = p.text.ok_or("missing text")?;
    Ok(RawArticle { id, title, body: RawBody::Markup(text) })
}

fn detect<R: BufRead>(reader: &mut R) -> Result<DumpFormat> {
    loop {
        let buf = reader.fill_buf()?;
        if buf.is_empty() {
            return Ok(DumpFormat::Empty);
        }
        let skip = buf.iter().take_while(|b| b.is_ascii_whitespace() || matches!(b, 0xEF | 0xBB | 0xBF)).count();
        if skip < buf.len() {
            let first = buf[skip];
            reader.consume(skip);
            return match first {
                b'<' => Ok(DumpFormat::Xml),
                b'{' => Ok(DumpFormat::Jsonl),
                other => Err(Error::InvalidInput(format!("unrecognised dump format (first byte {:?})", other as char))),
            };
        }
        let n = buf.len();
        reader.consume(n);
    }
}

impl<R: BufRead> Iterator for DumpReader<R> {
    type Item = Result<RawArticle>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        match self.inner {
            Inner::Xml { .. } => self.next_xml(),
            Inner::Jsonl { .. } => self.next_jsonl(),
            Inner::Empty => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const THREE: &str = r#"<mediawiki>
  <page><title>Alpha</title><id>1</id><text>About [[Beta]] &amp; more.</text></page>
  <page><title>Beta</title><ns>0</ns><id>2</id><revision><id>99</id><text xml:space="preserve">Beta text.</text></revision></page>
  <page><title>Gamma</title><id>3</id><text/></page>
</mediawiki>"#;

    fn read(input: &str, mode: ParseMode) -> (Vec<Result<RawArticle>>, usize) {
        let mut r = DumpReader::new(input.as_bytes(), mode).unwrap();
        let items: Vec<_> = r.by_ref().collect();
        (items, r.skipped())
    }

    #[test]
    fn empty_stream() {
        let (items, skipped) = read("", ParseMode::Strict);
        assert!(items.is_empty());
        assert_eq!(skipped, 0);
        let (items, _) = read("  \n ", ParseMode::Strict);
        assert!(items.is_empty());
    }

    #[test]
    fn three_pages() {
        let (items, skipped) = read(THREE, ParseMode::Strict);
        let arts: Vec<_> = items.into_iter().map(|r| r.unwrap()).collect();
        let titles: Vec<_> = arts.iter().map(|a| a.title.as_str()).collect();
        assert_eq!(titles, ["Alpha", "Beta", "Gamma"]);
        assert_eq!(arts[1].id, 2);
        assert_eq!(arts[0].body, RawBody::Markup("About [[Beta]] & more.".into()));
        assert_eq!(arts[2].body, RawBody::Markup(String::new()));
        assert_eq!(skipped, 0);
    }

    const TRUNCATED: &str = r#"<page><title>Alpha</title><id>1</id><text>a</text></page>
<page><title>Bravo</title><id>2</id><text>cut off here
<page><title>Charlie</title><id>3</id><text>c</text></page>"#;

    #[test]
    fn truncated_page_lenient() {
        let (items, skipped) = read(TRUNCATED, ParseMode::Lenient);
        let titles: Vec<_> = items.into_iter().map(|r| r.unwrap().title).collect();
        assert_eq!(titles, ["Alpha", "Charlie"]);
        assert_eq!(skipped, 1);
    }

    #[test]
    fn truncated_page_strict() {
        let (items, _) = read(TRUNCATED, ParseMode::Strict);
        assert_eq!(items.len(), 2);
        assert!(items[0].is_ok());
        assert!(matches!(items[1], Err(Error::MalformedRecord { record: 2, .. })));
    }

    #[test]
    fn truncated_at_eof() {
        let input = "<page><title>A</title><id>1</id><text>x</text></page><page><title>B</title><id>2</id><text>y";
        let (items, skipped) = read(input, ParseMode::Lenient);
        assert_eq!(items.len(), 1);
        assert_eq!(skipped, 1);
    }

    #[test]
    fn jsonl_records() {
        let input = concat!(
            r#"{"id": 7, "title": "Silicon", "text": "Si is [x].", "anchors": [{"target": "X", "start": 7, "end": 8}]}"#,
            "\n\n",
            r#"{"id": "8", "title": "Other", "text": ""}"#,
            "\n",
            r#"{"id": "eight", "title": "Bad", "text": ""}"#,
            "\n",
            "not json\n",
        );
        let (items, skipped) = read(input, ParseMode::Lenient);
        let arts: Vec<_> = items.into_iter().map(|r| r.unwrap()).collect();
        assert_eq!(arts.len(), 2);
        assert_eq!(arts[1].id, 8);
        assert_eq!(skipped, 2);
        match &arts[0].body {
            RawBody::Extracted { anchors, .. } => assert_eq!(anchors[0].target, "X"),
            other => panic!("unexpected body {other:?}"),
        }
    }

    #[test]
    fn unknown_format_is_an_error() {
        assert!(DumpReader::new("hello".as_bytes(), ParseMode::Lenient).is_err());
    }
}
