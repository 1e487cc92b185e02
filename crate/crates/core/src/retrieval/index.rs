use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{tokenize, Corpus, CorpusDoc, IngestError};
use crate::exec;
use crate::model::RetrievedDoc;

pub const INDEX_FORMAT_VERSION: u32 = 1;

/// Anything the search stage can query.
pub trait Retriever: Send + Sync {
    /// Top-`k` documents for `query`, best first.
    fn search(&self, query: &str, k: usize) -> Vec<RetrievedDoc>;
}

impl<R: Retriever + ?Sized> Retriever for std::sync::Arc<R> {
    fn search(&self, query: &str, k: usize) -> Vec<RetrievedDoc> {
        (**self).search(query, k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params { k1: 1.2, b: 0.75 }
    }
}

/// Immutable BM25 inverted index. Document text is the title (if any)
/// followed by the body.
#[derive(Debug, Clone, PartialEq)]
pub struct Bm25Index {
    params: Bm25Params,
    docs: Vec<CorpusDoc>,
    /// term -> (doc index, term frequency), ascending by doc index.
    postings: BTreeMap<String, Vec<(u32, u32)>>,
    doc_lengths: Vec<u32>,
    avgdl: f64,
}

#[derive(Serialize, Deserialize)]
struct Snapshot {
    format_version: u32,
    params: Bm25Params,
    docs: Vec<CorpusDoc>,
    doc_lengths: Vec<u32>,
    postings: BTreeMap<String, Vec<(u32, u32)>>,
}

fn mean_length(lengths: &[u32]) -> f64 {
    if lengths.is_empty() {
        return 0.0;
    }
    lengths.iter().map(|&l| l as u64).sum::<u64>() as f64 / lengths.len() as f64
}

impl Bm25Index {
    pub fn build(corpus: Corpus, params: Bm25Params) -> Result<Self, IngestError> {
        corpus.validate()?;
        let per_doc: Vec<(u32, BTreeMap<String, u32>)> = exec::map(&corpus.docs, |d| {
            let tokens = tokenize(&d.indexed_text());
            let mut tf = BTreeMap::new();
            for t in &tokens {
                *tf.entry(t.clone()).or_insert(0u32) += 1;
            }
            (tokens.len() as u32, tf)
        });
        let mut postings: BTreeMap<String, Vec<(u32, u32)>> = BTreeMap::new();
        let mut doc_lengths = Vec::with_capacity(per_doc.len());
        for (i, (len, tf)) in per_doc.into_iter().enumerate() {
            doc_lengths.push(len);
            for (term, count) in tf {
                postings.entry(term).or_default().push((i as u32, count));
            }
        }
        let avgdl = mean_length(&doc_lengths);
        Ok(Bm25Index {
            params,
            docs: corpus.docs,
            postings,
            doc_lengths,
            avgdl,
        })
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn avgdl(&self) -> f64 {
        self.avgdl
    }

    pub fn params(&self) -> Bm25Params {
        self.params
    }

    pub fn doc_lengths(&self) -> &[u32] {
        &self.doc_lengths
    }

    pub fn docs(&self) -> &[CorpusDoc] {
        &self.docs
    }

    pub fn postings(&self, term: &str) -> &[(u32, u32)] {
        self.postings.get(term).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn idf(&self, term: &str) -> f64 {
        let n = self.docs.len() as f64;
        let df = self.postings(term).len() as f64;
        ((n - df + 0.5) / (df + 0.5) + 1.0).ln()
    }

    /// Scores every matching document. Each query token contributes once per
    /// occurrence in the query.
    pub fn scores(&self, query: &str) -> HashMap<u32, f64> {
        let Bm25Params { k1, b } = self.params;
        let mut scores: HashMap<u32, f64> = HashMap::new();
        for term in tokenize(query) {
            let postings = self.postings(&term);
            if postings.is_empty() {
                continue;
            }
            let idf = self.idf(&term);
            for &(doc, tf) in postings {
                let tf = tf as f64;
                let dl = self.doc_lengths[doc as usize] as f64;
                let norm = tf + k1 * (1.0 - b + b * dl / self.avgdl);
                *scores.entry(doc).or_insert(0.0) += idf * tf * (k1 + 1.0) / norm;
            }
        }
        scores
    }

    /// Top-`k` by score, ties broken by ascending doc id; zero scores omitted.
    pub fn top_k(&self, query: &str, k: usize) -> Vec<RetrievedDoc> {
        if k == 0 {
            return Vec::new();
        }
        let mut hits: Vec<(u32, f64)> = self.scores(query).into_iter().filter(|&(_, s)| s > 0.0).collect();
        hits.sort_by(|a, b| {
            b.1.total_cmp(&a.1)
                .then_with(|| self.docs[a.0 as usize].id.cmp(&self.docs[b.0 as usize].id))
        });
        hits.truncate(k);
        hits.into_iter()
            .enumerate()
            .map(|(i, (doc, score))| {
                let d = &self.docs[doc as usize];
                RetrievedDoc {
                    doc_id: d.id.clone(),
                    text: d.text.clone(),
                    score,
                    rank: i as u32 + 1,
                    query: query.to_string(),
                }
            })
            .collect()
    }

    pub fn to_json(&self) -> String {
        let snap = Snapshot {
            format_version: INDEX_FORMAT_VERSION,
            params: self.params,
            docs: self.docs.clone(),
            doc_lengths: self.doc_lengths.clone(),
            postings: self.postings.clone(),
        };
        serde_json::to_string(&snap).expect("index serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, IngestError> {
        let snap: Snapshot = serde_json::from_str(text).map_err(|e| IngestError::Snapshot(e.to_string()))?;
        if snap.format_version != INDEX_FORMAT_VERSION {
            return Err(IngestError::Snapshot(format!(
                "unsupported format_version {} (expected {INDEX_FORMAT_VERSION})",
                snap.format_version
            )));
        }
        if snap.doc_lengths.len() != snap.docs.len() {
            return Err(IngestError::Snapshot("doc_lengths and docs differ in length".into()));
        }
        let n = snap.docs.len() as u32;
        for (term, list) in &snap.postings {
            if list.iter().any(|&(d, tf)| d >= n || tf == 0) {
                return Err(IngestError::Snapshot(format!("invalid posting for term `{term}`")));
            }
        }
        Corpus {
            docs: snap.docs.clone(),
        }
        .validate()?;
        Ok(Bm25Index {
            params: snap.params,
            avgdl: mean_length(&snap.doc_lengths),
            docs: snap.docs,
            postings: snap.postings,
            doc_lengths: snap.doc_lengths,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), IngestError> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, IngestError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

impl Retriever for Bm25Index {
    fn search(&self, query: &str, k: usize) -> Vec<RetrievedDoc> {
        self.top_k(query, k)
    }
}
