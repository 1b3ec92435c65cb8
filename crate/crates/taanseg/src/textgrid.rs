//! Long-form Praat TextGrid files (UTF-8, or UTF-16 with a byte-order mark).
//!
//! Only interval tiers are kept. Point tiers are skipped with a warning and
//! the short ("chronological"/compact) form is rejected.

use std::fmt::Write as _;
use std::path::Path;

use taanseg_core::segment::{Label, Section, SectionTimeline};

use crate::error::{IoError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Interval {
    pub xmin: f64,
    pub xmax: f64,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntervalTier {
    pub name: String,
    pub xmin: f64,
    pub xmax: f64,
    pub intervals: Vec<Interval>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TextGridDoc {
    pub xmin: f64,
    pub xmax: f64,
    pub tiers: Vec<IntervalTier>,
}

/// A parsed document plus anything skipped along the way.
#[derive(Debug, Clone, PartialEq)]
pub struct Parsed {
    pub doc: TextGridDoc,
    pub warnings: Vec<String>,
}

impl TextGridDoc {
    /// Checks that every interval has positive length, lies within its tier,
    /// and that intervals are sorted without overlap.
    pub fn validate(&self) -> std::result::Result<(), String> {
        if !(self.xmax > self.xmin) {
            return Err(format!("document xmax {} not after xmin {}", self.xmax, self.xmin));
        }
        for tier in &self.tiers {
            if tier.xmin < self.xmin || tier.xmax > self.xmax || !(tier.xmax > tier.xmin) {
                return Err(format!("tier {:?} bounds [{}, {}] invalid", tier.name, tier.xmin, tier.xmax));
            }
            for (i, iv) in tier.intervals.iter().enumerate() {
                if !(iv.xmax > iv.xmin) {
                    return Err(format!("tier {:?} interval {}: empty or reversed", tier.name, i + 1));
                }
                if iv.xmin < tier.xmin || iv.xmax > tier.xmax {
                    return Err(format!("tier {:?} interval {}: outside tier bounds", tier.name, i + 1));
                }
                if i > 0 && iv.xmin < tier.intervals[i - 1].xmax {
                    return Err(format!(
                        "tier {:?} interval {} starting at {} overlaps the previous interval ending at {}",
                        tier.name,
                        i + 1,
                        iv.xmin,
                        tier.intervals[i - 1].xmax
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Section label for an interval text; empty text means unlabeled.
pub fn label_for_text(text: &str) -> Option<Label> {
    let t = text.trim().to_lowercase();
    match t.as_str() {
        "" => None,
        "taan" | "akar taan" => Some(Label::Taan),
        "instrumental" => Some(Label::Instrumental),
        _ => Some(Label::NonTaan),
    }
}

/// Sections from the named tier, or from the first interval tier.
pub fn timeline_from_doc(doc: &TextGridDoc, tier: Option<&str>) -> std::result::Result<SectionTimeline, String> {
    let t = match tier {
        Some(name) => doc.tiers.iter().find(|t| t.name == name),
        None => doc.tiers.first(),
    }
    .ok_or_else(|| match tier {
        Some(name) => format!("no interval tier named {name:?}"),
        None => "document has no interval tier".to_string(),
    })?;
    let sections = t
        .intervals
        .iter()
        .filter_map(|iv| label_for_text(&iv.text).map(|l| Section::new(iv.xmin, iv.xmax, l)))
        .collect();
    SectionTimeline::new(sections).map_err(|e| e.to_string())
}

/// A one-tier document; gaps between sections become empty intervals so the
/// tier tiles `[0, xmax]` as Praat expects.
pub fn doc_from_timeline(tl: &SectionTimeline, tier_name: &str, xmax: Option<f64>) -> TextGridDoc {
    let end = tl.span().map_or(0.0, |s| s.1);
    let xmax = xmax.unwrap_or(end).max(end);
    let xmax = if xmax > 0.0 { xmax } else { 1.0 };
    let mut intervals = Vec::new();
    let mut t = 0.0;
    for s in tl.sections() {
        if s.start_s > t {
            intervals.push(Interval {
                xmin: t,
                xmax: s.start_s,
                text: String::new(),
            });
        }
        intervals.push(Interval {
            xmin: s.start_s,
            xmax: s.end_s,
            text: s.label.to_string(),
        });
        t = s.end_s;
    }
    if xmax > t {
        intervals.push(Interval {
            xmin: t,
            xmax,
            text: String::new(),
        });
    }
    TextGridDoc {
        xmin: 0.0,
        xmax,
        tiers: vec![IntervalTier {
            name: tier_name.to_string(),
            xmin: 0.0,
            xmax,
            intervals,
        }],
    }
}

/// Decodes UTF-8 (BOM optional) or UTF-16 LE/BE with BOM.
pub fn decode_text(bytes: &[u8]) -> std::result::Result<String, String> {
    let utf16 = |be: bool| {
        let body = &bytes[2..];
        if !body.len().is_multiple_of(2) {
            return Err("odd byte count in UTF-16 text".to_string());
        }
        let units = body.chunks_exact(2).map(|c| {
            if be {
                u16::from_be_bytes([c[0], c[1]])
            } else {
                u16::from_le_bytes([c[0], c[1]])
            }
        });
        char::decode_utf16(units)
            .collect::<std::result::Result<String, _>>()
            .map_err(|e| format!("invalid UTF-16: {e}"))
    };
    match bytes {
        [0xFF, 0xFE, ..] => utf16(false),
        [0xFE, 0xFF, ..] => utf16(true),
        [0xEF, 0xBB, 0xBF, rest @ ..] => String::from_utf8(rest.to_vec()).map_err(|e| format!("invalid UTF-8: {e}")),
        _ => String::from_utf8(bytes.to_vec()).map_err(|e| format!("invalid UTF-8: {e}")),
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Value {
    Num(f64),
    Str(String),
    /// `<exists>`-style flags.
    Flag(String),
    /// Block headers such as `item [2]:`.
    None,
}

#[derive(Debug)]
struct Entry {
    line: usize,
    key: String,
    value: Value,
}

/// Splits the text into `key = value` / `key:` entries. Quoted strings may
/// span lines and use `""` for a literal quote.
fn entries(text: &str) -> std::result::Result<Vec<Entry>, (usize, String)> {
    let mut out = Vec::new();
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    while let Some((line, raw)) = lines.next() {
        let l = raw.trim();
        if l.is_empty() {
            continue;
        }
        let Some(eq) = l.find('=') else {
            if let Some(key) = l.strip_suffix(':') {
                out.push(Entry {
                    line,
                    key: key.trim().to_string(),
                    value: Value::None,
                });
                continue;
            }
            if let Some(rest) = l.strip_suffix("<exists>") {
                out.push(Entry {
                    line,
                    key: rest.trim().to_string(),
                    value: Value::Flag("exists".into()),
                });
                continue;
            }
            return Err((line, format!("expected `key = value`, found {l:?}")));
        };
        let key = l[..eq].trim().to_string();
        let raw_eq = raw.find('=').unwrap_or(0);
        let rhs = raw[raw_eq + 1..].trim_start();
        let value = if let Some(body) = rhs.strip_prefix('"') {
            let mut acc = String::new();
            let mut rest = body.to_string();
            loop {
                if let Some(s) = take_quoted(&rest, &mut acc) {
                    if !s.trim().is_empty() {
                        return Err((line, format!("trailing text after string: {s:?}")));
                    }
                    break;
                }
                match lines.next() {
                    Some((_, next)) => {
                        acc.push('\n');
                        rest = next.to_string();
                    }
                    None => return Err((line, "unterminated string".into())),
                }
            }
            Value::Str(acc)
        } else if let Some(flag) = rhs.trim_end().strip_prefix('<').and_then(|r| r.strip_suffix('>')) {
            Value::Flag(flag.to_string())
        } else {
            let rhs = rhs.trim_end();
            let n: f64 = rhs
                .parse()
                .map_err(|_| (line, format!("malformed number {rhs:?} for {key:?}")))?;
            Value::Num(n)
        };
        out.push(Entry { line, key, value });
    }
    Ok(out)
}

/// Consumes string content up to the closing quote, returning what follows
/// it, or `None` if the string continues on the next line.
fn take_quoted<'a>(s: &'a str, acc: &mut String) -> Option<&'a str> {
    let mut chars = s.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        if c == '"' {
            if chars.peek().map(|&(_, c)| c) == Some('"') {
                chars.next();
                acc.push('"');
            } else {
                return Some(&s[i + 1..]);
            }
        } else {
            acc.push(c);
        }
    }
    None
}

struct Cursor<'a> {
    path: &'a Path,
    entries: Vec<Entry>,
    pos: usize,
}

impl Cursor<'_> {
    fn err(&self, msg: impl Into<String>) -> IoError {
        let line = self
            .entries
            .get(self.pos)
            .or(self.entries.last())
            .map_or(1, |e| e.line);
        IoError::parse(self.path, line, msg)
    }

    fn next(&mut self, key: &str) -> Result<Value> {
        match self.entries.get(self.pos) {
            Some(e) if e.key == key => {
                self.pos += 1;
                Ok(e.value.clone())
            }
            Some(e) => Err(self.err(format!("expected {key:?}, found {:?}", e.key))),
            None => Err(self.err(format!("unexpected end of file, expected {key:?}"))),
        }
    }

    fn num(&mut self, key: &str) -> Result<f64> {
        match self.next(key)? {
            Value::Num(n) if n.is_finite() => Ok(n),
            _ => {
                self.pos -= 1;
                Err(self.err(format!("{key:?} must be a finite number")))
            }
        }
    }

    fn count(&mut self, key: &str) -> Result<usize> {
        let n = self.num(key)?;
        if n < 0.0 || n.fract() != 0.0 {
            self.pos -= 1;
            return Err(self.err(format!("{key:?} must be a non-negative integer")));
        }
        Ok(n as usize)
    }

    fn string(&mut self, key: &str) -> Result<String> {
        match self.next(key)? {
            Value::Str(s) => Ok(s),
            _ => {
                self.pos -= 1;
                Err(self.err(format!("{key:?} must be a quoted string")))
            }
        }
    }

    fn header(&mut self, key: &str) -> Result<()> {
        match self.next(key)? {
            Value::None => Ok(()),
            _ => {
                self.pos -= 1;
                Err(self.err(format!("expected block header {key}:")))
            }
        }
    }
}

pub fn parse_textgrid_str(text: &str, path: &Path) -> Result<Parsed> {
    let entries = entries(text).map_err(|(line, msg)| {
        if line <= 4 && !text.contains("xmin =") {
            IoError::format(path, "short-form TextGrid is not supported; save as a long text file")
        } else {
            IoError::parse(path, line, msg)
        }
    })?;
    let mut c = Cursor { path, entries, pos: 0 };
    if c.string("File type")? != "ooTextFile" {
        return Err(IoError::format(path, "not a Praat text file"));
    }
    if c.string("Object class")? != "TextGrid" {
        return Err(IoError::format(path, "not a TextGrid object"));
    }
    if c.entries.get(c.pos).is_some_and(|e| e.key != "xmin") {
        return Err(IoError::format(path, "short-form TextGrid is not supported; save as a long text file"));
    }
    let xmin = c.num("xmin")?;
    let xmax = c.num("xmax")?;
    let mut tiers = Vec::new();
    let mut warnings = Vec::new();
    if let Value::Flag(f) = c.next("tiers?")? {
        if f != "exists" {
            return finish(path, xmin, xmax, tiers, warnings);
        }
    } else {
        return Err(c.err("expected `tiers? <exists>`"));
    }
    let n = c.count("size")?;
    c.header("item []")?;
    for i in 1..=n {
        c.header(&format!("item [{i}]"))?;
        let class = c.string("class")?;
        let name = c.string("name")?;
        let txmin = c.num("xmin")?;
        let txmax = c.num("xmax")?;
        match class.as_str() {
            "IntervalTier" => {
                let m = c.count("intervals: size")?;
                let mut intervals = Vec::with_capacity(m);
                for j in 1..=m {
                    c.header(&format!("intervals [{j}]"))?;
                    let a = c.num("xmin")?;
                    let b = c.num("xmax")?;
                    let text = c.string("text")?;
                    intervals.push(Interval { xmin: a, xmax: b, text });
                }
                tiers.push(IntervalTier {
                    name,
                    xmin: txmin,
                    xmax: txmax,
                    intervals,
                });
            }
            "TextTier" => {
                let m = c.count("points: size")?;
                for j in 1..=m {
                    c.header(&format!("points [{j}]"))?;
                    let key = if c.entries.get(c.pos).is_some_and(|e| e.key == "time") {
                        "time"
                    } else {
                        "number"
                    };
                    c.num(key)?;
                    c.string("mark")?;
                }
                warnings.push(format!("tier {i} ({name:?}): point tier skipped (unsupported tier type)"));
            }
            other => return Err(c.err(format!("unknown tier class {other:?}"))),
        }
    }
    if c.pos != c.entries.len() {
        return Err(c.err("unexpected content after the last tier"));
    }
    finish(path, xmin, xmax, tiers, warnings)
}

fn finish(path: &Path, xmin: f64, xmax: f64, tiers: Vec<IntervalTier>, warnings: Vec<String>) -> Result<Parsed> {
    let doc = TextGridDoc { xmin, xmax, tiers };
    doc.validate().map_err(|m| IoError::format(path, m))?;
    Ok(Parsed { doc, warnings })
}

pub fn parse_textgrid(path: &Path) -> Result<Parsed> {
    let bytes = std::fs::read(path).map_err(|e| IoError::io(path, e))?;
    let text = decode_text(&bytes).map_err(|m| IoError::format(path, m))?;
    parse_textgrid_str(&text, path)
}

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('"', "\"\""))
}

pub fn emit_textgrid_string(doc: &TextGridDoc) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "File type = \"ooTextFile\"");
    let _ = writeln!(s, "Object class = \"TextGrid\"");
    let _ = writeln!(s);
    let _ = writeln!(s, "xmin = {} ", doc.xmin);
    let _ = writeln!(s, "xmax = {} ", doc.xmax);
    let _ = writeln!(s, "tiers? <exists> ");
    let _ = writeln!(s, "size = {} ", doc.tiers.len());
    let _ = writeln!(s, "item []: ");
    for (i, t) in doc.tiers.iter().enumerate() {
        let _ = writeln!(s, "    item [{}]:", i + 1);
        let _ = writeln!(s, "        class = \"IntervalTier\" ");
        let _ = writeln!(s, "        name = {} ", quote(&t.name));
        let _ = writeln!(s, "        xmin = {} ", t.xmin);
        let _ = writeln!(s, "        xmax = {} ", t.xmax);
        let _ = writeln!(s, "        intervals: size = {} ", t.intervals.len());
        for (j, iv) in t.intervals.iter().enumerate() {
            let _ = writeln!(s, "        intervals [{}]:", j + 1);
            let _ = writeln!(s, "            xmin = {} ", iv.xmin);
            let _ = writeln!(s, "            xmax = {} ", iv.xmax);
            let _ = writeln!(s, "            text = {} ", quote(&iv.text));
        }
    }
    s
}

/// Writes UTF-8 without a byte-order mark.
pub fn emit_textgrid(doc: &TextGridDoc, path: &Path) -> Result<()> {
    doc.validate().map_err(|m| IoError::format(path, m))?;
    std::fs::write(path, emit_textgrid_string(doc)).map_err(|e| IoError::io(path, e))
}
