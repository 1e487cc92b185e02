use std::collections::HashSet;
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::IngestError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusDoc {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
    pub text: String,
}

impl CorpusDoc {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        CorpusDoc {
            id: id.into(),
            title: None,
            text: text.into(),
        }
    }

    /// Title and body, as indexed.
    pub fn indexed_text(&self) -> String {
        match &self.title {
            Some(t) if !t.is_empty() => format!("{t}\n{}", self.text),
            _ => self.text.clone(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    pub docs: Vec<CorpusDoc>,
}

impl Corpus {
    pub fn new(docs: Vec<CorpusDoc>) -> Result<Self, IngestError> {
        let corpus = Corpus { docs };
        corpus.validate()?;
        Ok(corpus)
    }

    pub fn validate(&self) -> Result<(), IngestError> {
        let mut seen = HashSet::with_capacity(self.docs.len());
        for (i, d) in self.docs.iter().enumerate() {
            if d.id.is_empty() {
                return Err(IngestError::EmptyId(i + 1));
            }
            if d.text.trim().is_empty() {
                return Err(IngestError::EmptyText(d.id.clone()));
            }
            if !seen.insert(d.id.as_str()) {
                return Err(IngestError::DuplicateId(d.id.clone()));
            }
        }
        Ok(())
    }

    /// Reads `corpus.jsonl`: one `{"id", "title"?, "text"}` object per line.
    /// Blank lines are skipped.
    pub fn load_jsonl(path: &Path) -> Result<Self, IngestError> {
        let file = std::fs::File::open(path)?;
        let mut docs = Vec::new();
        for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let doc: CorpusDoc = serde_json::from_str(&line).map_err(|e| IngestError::Format {
                line: i + 1,
                reason: e.to_string(),
            })?;
            docs.push(doc);
        }
        Corpus::new(docs)
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn rejects_duplicates_and_empty_text() {
        let dup = Corpus::new(vec![CorpusDoc::new("a", "x"), CorpusDoc::new("a", "y")]);
        assert!(matches!(dup, Err(IngestError::DuplicateId(id)) if id == "a"));
        let empty = Corpus::new(vec![CorpusDoc::new("a", "  ")]);
        assert!(matches!(empty, Err(IngestError::EmptyText(_))));
    }

    #[test]
    fn jsonl_with_line_numbers() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, r#"{{"id": "d1", "title": "Heart", "text": "beta blockers"}}"#).unwrap();
        writeln!(f).unwrap();
        writeln!(f, r#"{{"id": "d2", "text": "kidney"}}"#).unwrap();
        let c = Corpus::load_jsonl(f.path()).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.docs[0].indexed_text(), "Heart\nbeta blockers");

        let mut bad = tempfile::NamedTempFile::new().unwrap();
        writeln!(bad, r#"{{"id": "d1", "text": "ok"}}"#).unwrap();
        writeln!(bad, "not json").unwrap();
        assert!(matches!(Corpus::load_jsonl(bad.path()), Err(IngestError::Format { line: 2, .. })));
    }
}
