//! The fenced key/value block every agent reply must contain.
//!
//! ```text
//! === QUICK ===
//! SQ1: What drug class is propranolol?
//! SA1: A non-selective beta blocker.
//! QUERIES_P1:
//! 1. beta blocker heart rate
//! 2. propranolol mechanism
//! ANSWER: B
//! === END ===
//! ```
//!
//! Fence lines are recognised only when they make up an entire line, so text
//! on a value line can never open or close a block. Keys are uppercase
//! identifiers. A key with an empty value followed by numbered items holds a
//! list. Any other line continues the previous value.

use std::fmt::Write as _;

use super::ParseError;

pub const END_TAG: &str = "END";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Value {
    Text(String),
    List(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StructuredBlock {
    pub tag: String,
    pub entries: Vec<(String, Value)>,
}

/// `=== TAG ===` on a line of its own; returns the tag.
pub fn fence_tag(line: &str) -> Option<&str> {
    let inner = line.trim().strip_prefix("===")?.strip_suffix("===")?.trim();
    if !inner.is_empty()
        && inner
            .bytes()
            .all(|b| b.is_ascii_uppercase() || b.is_ascii_digit() || b == b'_')
    {
        Some(inner)
    } else {
        None
    }
}

pub fn fence(tag: &str) -> String {
    format!("=== {tag} ===")
}

fn key_line(line: &str) -> Option<(&str, &str)> {
    let (key, rest) = line.split_once(':')?;
    let mut bytes = key.bytes();
    let first = bytes.next()?;
    if !first.is_ascii_uppercase()
        || !bytes.all(|b| b.is_ascii_uppercase() || b.is_ascii_digit() || b == b'_')
    {
        return None;
    }
    Some((key, rest.trim()))
}

fn list_item(line: &str) -> Option<&str> {
    let digits = line.bytes().take_while(|b| b.is_ascii_digit()).count();
    if digits == 0 {
        return None;
    }
    let rest = &line[digits..];
    let rest = rest.strip_prefix('.').or_else(|| rest.strip_prefix(')'))?;
    if rest.is_empty() {
        return Some("");
    }
    if !rest.starts_with(char::is_whitespace) {
        return None;
    }
    Some(rest.trim())
}

impl StructuredBlock {
    pub fn new(tag: impl Into<String>) -> Self {
        StructuredBlock {
            tag: tag.into(),
            entries: Vec::new(),
        }
    }

    /// Extracts the single block tagged `tag` from a completion. Prose outside
    /// blocks and blocks with other tags are ignored.
    pub fn extract(raw: &str, tag: &str) -> Result<Self, ParseError> {
        let mut found: Option<StructuredBlock> = None;
        let mut current: Option<(String, Vec<&str>)> = None;
        for line in raw.lines() {
            match (fence_tag(line), current.as_mut()) {
                (Some(END_TAG), Some(_)) => {
                    let (t, body) = current.take().expect("open block");
                    if t == tag {
                        if found.is_some() {
                            return Err(ParseError::new(format!(
                                "more than one {} block",
                                fence(tag)
                            )));
                        }
                        found = Some(Self::parse_body(&t, &body)?);
                    }
                }
                (Some(END_TAG), None) => {}
                (Some(t), Some((open, _))) => {
                    return Err(ParseError::new(format!(
                        "{} opened before {} was closed with {}",
                        fence(t),
                        fence(open),
                        fence(END_TAG)
                    )));
                }
                (Some(t), None) => current = Some((t.to_string(), Vec::new())),
                (None, Some((_, body))) => body.push(line),
                (None, None) => {}
            }
        }
        if let Some((t, _)) = current {
            if t == tag {
                return Err(ParseError::new(format!(
                    "{} block is not closed with {}",
                    fence(tag),
                    fence(END_TAG)
                )));
            }
        }
        found.ok_or_else(|| ParseError::new(format!("no {} block found", fence(tag))))
    }

    fn parse_body(tag: &str, lines: &[&str]) -> Result<Self, ParseError> {
        let mut block = StructuredBlock::new(tag);
        for raw_line in lines {
            let line = raw_line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some((key, value)) = key_line(line) {
                if block.get(key).is_some() {
                    return Err(ParseError::new(format!("duplicate key {key}")));
                }
                block.entries.push((key.to_string(), Value::Text(value.to_string())));
                continue;
            }
            let Some((key, last)) = block.entries.last_mut() else {
                return Err(ParseError::new(format!(
                    "line before the first key in {} block",
                    fence(tag)
                )));
            };
            match (list_item(line), &mut *last) {
                (Some(item), Value::Text(t)) if t.is_empty() => {
                    *last = Value::List(vec![item.to_string()]);
                }
                (Some(item), Value::List(items)) => items.push(item.to_string()),
                (_, Value::Text(t)) => {
                    if !t.is_empty() {
                        t.push(' ');
                    }
                    t.push_str(line);
                }
                (None, Value::List(items)) => {
                    let tail = items
                        .last_mut()
                        .ok_or_else(|| ParseError::new(format!("empty list under {key}")))?;
                    if !tail.is_empty() {
                        tail.push(' ');
                    }
                    tail.push_str(line);
                }
            }
        }
        Ok(block)
    }

    pub fn get(&self, key: &str) -> Option<&Value> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(k, _)| k.as_str())
    }

    pub fn text(&self, key: &str) -> Option<&str> {
        match self.get(key)? {
            Value::Text(t) => Some(t.as_str()),
            Value::List(_) => None,
        }
    }

    pub fn require_text(&self, key: &str) -> Result<&str, ParseError> {
        match self.get(key) {
            Some(Value::Text(t)) if !t.is_empty() => Ok(t),
            Some(Value::Text(_)) => Err(ParseError::new(format!("{key} is empty"))),
            Some(Value::List(_)) => Err(ParseError::new(format!("{key} must be a single value, not a list"))),
            None => Err(ParseError::new(format!("missing {key}"))),
        }
    }

    /// A list value; an absent key, an empty value or `none` all read as empty.
    pub fn list(&self, key: &str) -> Result<Vec<String>, ParseError> {
        match self.get(key) {
            None => Ok(Vec::new()),
            Some(Value::List(items)) => {
                if items.iter().any(|i| i.is_empty()) {
                    return Err(ParseError::new(format!("{key} has an empty list item")));
                }
                Ok(items.clone())
            }
            Some(Value::Text(t)) if t.is_empty() || t.eq_ignore_ascii_case("none") => Ok(Vec::new()),
            Some(Value::Text(_)) => Err(ParseError::new(format!(
                "{key} must be a numbered list on the following lines"
            ))),
        }
    }

    /// Comma-separated identifiers; `none` or empty reads as no ids.
    pub fn ids(&self, key: &str) -> Result<Vec<String>, ParseError> {
        match self.get(key) {
            None => Ok(Vec::new()),
            Some(Value::List(items)) => Ok(items.iter().map(|s| s.trim().to_string()).collect()),
            Some(Value::Text(t)) => {
                let t = t.trim();
                if t.is_empty() || t.eq_ignore_ascii_case("none") {
                    return Ok(Vec::new());
                }
                let ids: Vec<String> = t.split(',').map(|s| s.trim().to_string()).collect();
                if ids.iter().any(|s| s.is_empty()) {
                    return Err(ParseError::new(format!("{key} has an empty entry")));
                }
                Ok(ids)
            }
        }
    }

    pub fn push_text(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.entries.push((key.into(), Value::Text(value.into())));
    }

    pub fn push_list(&mut self, key: impl Into<String>, items: Vec<String>) {
        self.entries.push((key.into(), Value::List(items)));
    }

    pub fn push_ids(&mut self, key: impl Into<String>, ids: &[String]) {
        let v = if ids.is_empty() {
            "none".to_string()
        } else {
            ids.join(", ")
        };
        self.push_text(key, v);
    }

    /// Renders the block. Values are expected to be single-line; embedded
    /// line breaks are folded into spaces.
    pub fn render(&self) -> String {
        let mut out = fence(&self.tag);
        out.push('\n');
        for (key, value) in &self.entries {
            match value {
                Value::Text(t) => {
                    let _ = writeln!(out, "{key}: {}", single_line(t));
                }
                Value::List(items) if items.is_empty() => {
                    let _ = writeln!(out, "{key}: none");
                }
                Value::List(items) => {
                    let _ = writeln!(out, "{key}:");
                    for (i, item) in items.iter().enumerate() {
                        let _ = writeln!(out, "{}. {}", i + 1, single_line(item));
                    }
                }
            }
        }
        out.push_str(&fence(END_TAG));
        out.push('\n');
        out
    }
}

/// Collapses all whitespace runs (including line breaks) into single spaces.
pub fn single_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_text_and_lists() {
        let raw = "Some preamble.\n=== SEARCH ===\nRETRIEVE_P1: yes\nQUERIES_P1:\n1. beta blockers\n2) heart rate\nRETRIEVE_P2: no\n=== END ===\ntrailing prose";
        let b = StructuredBlock::extract(raw, "SEARCH").unwrap();
        assert_eq!(b.text("RETRIEVE_P1"), Some("yes"));
        assert_eq!(b.list("QUERIES_P1").unwrap(), vec!["beta blockers", "heart rate"]);
        assert!(b.list("QUERIES_P2").unwrap().is_empty());
    }

    #[test]
    fn continuation_lines_join() {
        let raw = "=== QUICK ===\nSQ1: first part\nsecond part\nSA1: ok\n=== END ===";
        let b = StructuredBlock::extract(raw, "QUICK").unwrap();
        assert_eq!(b.text("SQ1"), Some("first part second part"));
    }

    #[test]
    fn rejects_two_blocks() {
        let raw = "=== QUICK ===\nA: 1\n=== END ===\n=== QUICK ===\nA: 2\n=== END ===";
        let err = StructuredBlock::extract(raw, "QUICK").unwrap_err();
        assert!(err.reason.contains("more than one"));
    }

    #[test]
    fn rejects_missing_and_unclosed() {
        assert!(StructuredBlock::extract("no block here", "QUICK").is_err());
        assert!(StructuredBlock::extract("=== QUICK ===\nA: 1\n", "QUICK").is_err());
        assert!(StructuredBlock::extract("=== QUICK ===\nA: 1\n=== PLAN ===\n", "QUICK").is_err());
    }

    #[test]
    fn other_tags_are_ignored() {
        let raw = "=== PLAN ===\nP1: x\n=== END ===\n=== QUICK ===\nA: 1\n=== END ===";
        let b = StructuredBlock::extract(raw, "QUICK").unwrap();
        assert_eq!(b.text("A"), Some("1"));
    }

    #[test]
    fn duplicate_key_rejected() {
        let raw = "=== QUICK ===\nA: 1\nA: 2\n=== END ===";
        assert!(StructuredBlock::extract(raw, "QUICK").is_err());
    }

    #[test]
    fn inline_fences_are_plain_text() {
        let raw = "=== QUICK ===\nA: see === END === here\n=== END ===";
        let b = StructuredBlock::extract(raw, "QUICK").unwrap();
        assert_eq!(b.text("A"), Some("see === END === here"));
    }

    #[test]
    fn render_round_trips() {
        let mut b = StructuredBlock::new("PLAN");
        b.push_text("P1", "what is x");
        b.push_list("Q", vec!["a, b".into(), "1. nested".into()]);
        b.push_ids("IDS", &["K1".into(), "K2".into()]);
        let back = StructuredBlock::extract(&b.render(), "PLAN").unwrap();
        assert_eq!(back.text("P1"), Some("what is x"));
        assert_eq!(back.list("Q").unwrap(), vec!["a, b", "1. nested"]);
        assert_eq!(back.ids("IDS").unwrap(), vec!["K1", "K2"]);
    }
}
