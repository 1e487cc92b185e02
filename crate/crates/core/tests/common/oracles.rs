//! Reference implementations written straight from the formulas, plus
//! seeded generators for round-trip and fuzz inputs. Nothing here calls the
//! code under test except where a check needs its output.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use twofold_core::agents::*;
use twofold_core::*;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---- metrics ---------------------------------------------------------------

pub fn normalize_oracle(s: &str) -> String {
    let mut words = Vec::new();
    for w in s.to_lowercase().split_whitespace() {
        let core: String = w.chars().skip_while(|c| !c.is_alphanumeric()).collect();
        let core: String = core.chars().rev().skip_while(|c| !c.is_alphanumeric()).collect::<String>().chars().rev().collect();
        if core == "a" || core == "an" || core == "the" {
            continue;
        }
        let mut cur = String::new();
        for c in w.chars() {
            if c.is_alphanumeric() {
                cur.push(c);
            } else if !cur.is_empty() {
                words.push(std::mem::take(&mut cur));
            }
        }
        if !cur.is_empty() {
            words.push(cur);
        }
    }
    words.join(" ")
}

pub fn em_oracle(pred: &str, golds: &[String]) -> bool {
    let p = normalize_oracle(pred);
    golds.iter().any(|g| normalize_oracle(g) == p)
}

pub fn f1_oracle(pred: &str, golds: &[String]) -> f64 {
    let mut best = 0.0f64;
    for g in golds {
        let p = normalize_oracle(pred);
        let g = normalize_oracle(g);
        let mut pt: Vec<&str> = p.split(' ').filter(|t| !t.is_empty()).collect();
        let mut gt: Vec<&str> = g.split(' ').filter(|t| !t.is_empty()).collect();
        let v = if pt.is_empty() && gt.is_empty() {
            1.0
        } else if pt.is_empty() || gt.is_empty() {
            0.0
        } else {
            // Multiset intersection by sorting both bags.
            pt.sort();
            gt.sort();
            let (mut i, mut j, mut common) = (0, 0, 0usize);
            while i < pt.len() && j < gt.len() {
                match pt[i].cmp(gt[j]) {
                    std::cmp::Ordering::Less => i += 1,
                    std::cmp::Ordering::Greater => j += 1,
                    std::cmp::Ordering::Equal => {
                        common += 1;
                        i += 1;
                        j += 1;
                    }
                }
            }
            if common == 0 {
                0.0
            } else {
                let p = common as f64 / pt.len() as f64;
                let r = common as f64 / gt.len() as f64;
                2.0 * p * r / (p + r)
            }
        };
        best = best.max(v);
    }
    best
}

const WORDS: &[&str] = &[
    "the", "a", "an", "paris", "Paris", "france", "heart", "rate", "beta", "blocker", "New", "York", "city", "1999",
    "obama", "barack", "x", "A&B", "U.S.", "rock-n-roll", "école", "THE",
];
const PUNCT: &[&str] = &["", "", "", ".", ",", "!", "?", "'s", "\"", "(", ")", "-", ":"];

pub fn random_phrase(r: &mut ChaCha8Rng, max_words: usize) -> String {
    let n = r.gen_range(0..=max_words);
    let mut s = String::new();
    for i in 0..n {
        if i > 0 {
            s.push_str(if r.gen_bool(0.1) { "  " } else { " " });
        }
        s.push_str(PUNCT[r.gen_range(0..PUNCT.len())]);
        s.push_str(WORDS[r.gen_range(0..WORDS.len())]);
        s.push_str(PUNCT[r.gen_range(0..PUNCT.len())]);
    }
    s
}

pub fn random_answer_pair(r: &mut ChaCha8Rng) -> (String, Vec<String>) {
    let pred = random_phrase(r, 5);
    let n = r.gen_range(1..=3);
    let mut golds: Vec<String> = (0..n).map(|_| random_phrase(r, 4)).collect();
    if r.gen_bool(0.3) {
        // Same tokens, different surface form.
        golds.push(format!("The {}!", pred.to_uppercase()));
    }
    (pred, golds)
}

// ---- BM25 ------------------------------------------------------------------

pub fn tokenize_oracle(s: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for c in s.chars() {
        if c.is_alphanumeric() {
            cur.extend(c.to_lowercase());
        } else if !cur.is_empty() {
            out.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

/// Brute force: rescans every document for every query term.
pub fn bm25_oracle(docs: &[CorpusDoc], query: &str, k: usize, k1: f64, b: f64) -> Vec<(String, f64)> {
    let toks: Vec<Vec<String>> = docs
        .iter()
        .map(|d| {
            let text = match &d.title {
                Some(t) => format!("{t}\n{}", d.text),
                None => d.text.clone(),
            };
            tokenize_oracle(&text)
        })
        .collect();
    let n = docs.len() as f64;
    let avgdl = toks.iter().map(|t| t.len()).sum::<usize>() as f64 / n;
    let mut scored = Vec::new();
    for (i, dt) in toks.iter().enumerate() {
        let mut s = 0.0;
        for q in tokenize_oracle(query) {
            let df = toks.iter().filter(|t| t.contains(&q)).count() as f64;
            let tf = dt.iter().filter(|t| **t == q).count() as f64;
            if tf == 0.0 {
                continue;
            }
            let idf = ((n - df + 0.5) / (df + 0.5) + 1.0).ln();
            s += idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * dt.len() as f64 / avgdl));
        }
        if s > 0.0 {
            scored.push((docs[i].id.clone(), s));
        }
    }
    scored.sort_by(|x, y| y.1.partial_cmp(&x.1).unwrap().then_with(|| x.0.cmp(&y.0)));
    scored.truncate(k);
    scored
}

const VOCAB: &[&str] = &["alpha", "beta", "gamma", "delta", "heart", "kidney", "sodium", "rate", "drug", "dose"];

pub fn random_corpus(r: &mut ChaCha8Rng) -> (Vec<CorpusDoc>, Vec<String>) {
    let n = r.gen_range(1..=20);
    let mut ids: Vec<usize> = (0..40).collect();
    ids.shuffle(r);
    let docs = (0..n)
        .map(|i| {
            let len = r.gen_range(1..=15);
            let words: Vec<&str> = (0..len).map(|_| VOCAB[r.gen_range(0..VOCAB.len())]).collect();
            let mut d = CorpusDoc::new(format!("doc{:02}", ids[i]), words.join(if r.gen_bool(0.2) { ", " } else { " " }));
            if r.gen_bool(0.3) {
                d.title = Some(VOCAB[r.gen_range(0..VOCAB.len())].to_uppercase());
            }
            d
        })
        .collect();
    let queries = (0..4)
        .map(|_| {
            let len = r.gen_range(1..=4);
            let mut q: Vec<String> = (0..len).map(|_| VOCAB[r.gen_range(0..VOCAB.len())].to_string()).collect();
            if r.gen_bool(0.2) {
                q.push("unseen".into());
            }
            q.join(" ")
        })
        .collect();
    (docs, queries)
}

/// Compares the index against the oracle on every query; returns the worst
/// absolute score difference.
pub fn bm25_check(docs: &[CorpusDoc], queries: &[String]) -> Result<f64, String> {
    let idx = Bm25Index::build(Corpus::new(docs.to_vec()).map_err(|e| e.to_string())?, Bm25Params::default())
        .map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for q in queries {
        for k in [1usize, 3, 50] {
            let got = idx.top_k(q, k);
            let want = bm25_oracle(docs, q, k, 1.2, 0.75);
            if got.len() != want.len() {
                return Err(format!("query `{q}` k={k}: {} hits vs oracle {}", got.len(), want.len()));
            }
            for (g, (id, s)) in got.iter().zip(&want) {
                // Scores within 1e-9 may legitimately swap order only if equal;
                // ids must agree whenever scores are distinguishable.
                if &g.doc_id != id && (g.score - s).abs() > 1e-9 {
                    return Err(format!("query `{q}` k={k}: {} vs oracle {id}", g.doc_id));
                }
                worst = worst.max((g.score - s).abs());
            }
        }
    }
    Ok(worst)
}

// ---- block round trips -----------------------------------------------------

const TEXT_WORDS: &[&str] = &[
    "why", "does", "the", "beta", "blocker", "lower", "rate?", "1.", "2)", "===", "END", "none", "K1", "H2:",
    "yes", "(see", "R3)", "drug,", "-", "ACCEPT", "\"quoted\"", "über",
];

pub fn safe_text(r: &mut ChaCha8Rng) -> String {
    let n = r.gen_range(1..=8);
    let words: Vec<&str> = (0..n).map(|_| TEXT_WORDS[r.gen_range(0..TEXT_WORDS.len())]).collect();
    let s = words.join(" ");
    assert!(is_block_safe(&s));
    s
}

fn options(r: &mut ChaCha8Rng) -> Vec<McqOption> {
    let n = r.gen_range(0..=5);
    ["A", "B", "C", "D", "E"][..n]
        .iter()
        .map(|l| McqOption {
            label: l.to_string(),
            text: format!("option {l}"),
        })
        .collect()
}

fn answer_for(r: &mut ChaCha8Rng, opts: &[McqOption]) -> String {
    if opts.is_empty() {
        safe_text(r)
    } else {
        opts[r.gen_range(0..opts.len())].label.clone()
    }
}

fn quick(r: &mut ChaCha8Rng, opts: &[McqOption]) -> QuickAnswer {
    let n = r.gen_range(1..=5);
    QuickAnswer {
        steps: (1..=n)
            .map(|i| SubStep {
                index: i,
                subquestion: safe_text(r),
                subanswer: safe_text(r),
            })
            .collect(),
        final_answer: answer_for(r, opts),
        raw: String::new(),
    }
}

fn plan(r: &mut ChaCha8Rng) -> Plan {
    let n = r.gen_range(1..=5);
    Plan {
        subquestions: (1..=n)
            .map(|i| PlannedSubquestion {
                id: format!("P{i}"),
                text: safe_text(r),
            })
            .collect(),
    }
}

fn subset<T: Clone>(r: &mut ChaCha8Rng, items: &[T]) -> Vec<T> {
    items.iter().filter(|_| r.gen_bool(0.5)).cloned().collect()
}

fn hypotheses(r: &mut ChaCha8Rng, opts: &[McqOption]) -> Vec<Hypothesis> {
    if opts.is_empty() {
        let n = r.gen_range(1..=4);
        (1..=n)
            .map(|i| Hypothesis {
                id: format!("H{i}"),
                option_label: None,
                statement: safe_text(r),
            })
            .collect()
    } else {
        let mut labels: Vec<String> = opts.iter().map(|o| o.label.clone()).collect();
        labels.shuffle(r);
        labels
            .into_iter()
            .enumerate()
            .map(|(i, l)| Hypothesis {
                id: format!("H{}", i + 1),
                option_label: Some(l),
                statement: safe_text(r),
            })
            .collect()
    }
}

pub const PAYLOADS: [&str; 8] = [
    "quick",
    "reflection",
    "plan",
    "search",
    "reading",
    "hypotheses",
    "integration",
    "decision",
];

/// Generates one payload of the given type from `seed`, renders it, parses
/// it back, and compares.
pub fn round_trip(kind: &str, seed: u64) -> Result<(), String> {
    let r = &mut rng(seed);
    let e = |e: ParseError| e.reason;
    macro_rules! same {
        ($got:expr, $want:expr) => {
            let (got, want) = (&$got, &$want);
            if got != want {
                return Err(format!("{kind} seed {seed}: {:?} != {:?}", got, want));
            }
        };
    }
    match kind {
        "quick" => {
            let opts = options(r);
            let q = quick(r, &opts);
            let back = parse_quick(&render_quick(&q), &opts).map_err(e)?;
            same!((back.steps, back.final_answer), (q.steps, q.final_answer));
        }
        "reflection" => {
            let q = quick(r, &[]);
            let idx: Vec<u32> = q.steps.iter().map(|s| s.index).collect();
            let v = ReflectionVerdict {
                decision: if r.gen_bool(0.5) {
                    ReflectionDecision::Accept
                } else {
                    ReflectionDecision::Escalate
                },
                rationale: if r.gen_bool(0.3) { String::new() } else { safe_text(r) },
                flagged_steps: subset(r, &idx),
            };
            same!(parse_reflection(&render_reflection(&v), &q).map_err(e)?, v);
        }
        "plan" => {
            let p = plan(r);
            same!(parse_plan(&render_plan(&p), p.subquestions.len()).map_err(e)?, p);
        }
        "search" => {
            let p = plan(r);
            let ds: Vec<SearchDecision> = p
                .subquestions
                .iter()
                .map(|sq| {
                    let yes = r.gen_bool(0.5);
                    let queries = if yes { (0..r.gen_range(1..=3)).map(|_| safe_text(r)).collect() } else { vec![] };
                    SearchDecision {
                        subquestion_id: sq.id.clone(),
                        needs_retrieval: yes,
                        queries,
                    }
                })
                .collect();
            same!(parse_search(&render_search(&ds), &p).map_err(e)?, ds);
        }
        "reading" => {
            let p = plan(r);
            let n_docs = r.gen_range(0..=6);
            let docs: Vec<EvidenceDoc> = (1..=n_docs)
                .map(|i| EvidenceDoc {
                    label: format!("R{i}"),
                    subquestion_id: p.subquestions[r.gen_range(0..p.subquestions.len())].id.clone(),
                    doc: RetrievedDoc {
                        doc_id: format!("d{i}"),
                        text: safe_text(r),
                        score: 1.0,
                        rank: 1,
                        query: "q".into(),
                    },
                })
                .collect();
            let n = r.gen_range(1..=5);
            let ks: Vec<KeyInsight> = (1..=n)
                .map(|i| {
                    let sq = p.subquestions[r.gen_range(0..p.subquestions.len())].id.clone();
                    let mine: Vec<String> =
                        docs.iter().filter(|d| d.subquestion_id == sq).map(|d| d.doc.doc_id.clone()).collect();
                    KeyInsight {
                        id: format!("K{i}"),
                        subquestion_id: sq,
                        text: safe_text(r),
                        source_doc_ids: subset(r, &mine),
                    }
                })
                .collect();
            same!(parse_reading(&render_reading(&ks, &docs), &p, &docs).map_err(e)?, ks);
        }
        "hypotheses" => {
            let opts = options(r);
            let hs = hypotheses(r, &opts);
            let mut back = parse_hypotheses(&render_hypotheses(&hs), &opts, 4).map_err(e)?;
            back.sort_by_key(|h| h.id[1..].parse::<u32>().unwrap());
            same!(back, hs);
        }
        "integration" => {
            let hs = hypotheses(r, &[]);
            let ev: Vec<String> = (1..=r.gen_range(0..=5)).map(|i| format!("{}{i}", if r.gen_bool(0.5) { "K" } else { "R" })).collect();
            let ev: Vec<String> = ev.into_iter().collect::<HashSet<_>>().into_iter().collect();
            let verdicts: Vec<HypothesisVerdict> = hs
                .iter()
                .map(|h| {
                    let cited = subset(r, &ev);
                    let status = match (cited.is_empty(), r.gen_range(0..3)) {
                        (true, _) | (false, 0) => VerdictStatus::Inconclusive,
                        (false, 1) => VerdictStatus::Supported,
                        _ => VerdictStatus::Refuted,
                    };
                    HypothesisVerdict {
                        hypothesis_id: h.id.clone(),
                        status,
                        cited_insights: cited,
                        justification: safe_text(r),
                    }
                })
                .collect();
            let supported: Vec<String> = verdicts
                .iter()
                .filter(|v| v.status == VerdictStatus::Supported)
                .map(|v| v.hypothesis_id.clone())
                .collect();
            let integrated = IntegratedHypothesis {
                text: safe_text(r),
                supporting_hypothesis_ids: subset(r, &supported),
            };
            let back = parse_integration(&render_integration(&verdicts, &integrated), &hs, &ev).map_err(e)?;
            same!(back, (verdicts, integrated));
        }
        "decision" => {
            let opts = options(r);
            let hs = if r.gen_bool(0.2) { vec![] } else { hypotheses(r, &opts) };
            let mut ranking: Vec<String> = hs.iter().map(|h| h.id.clone()).collect();
            ranking.shuffle(r);
            let answer = answer_for(r, &opts);
            let d = Decision {
                chosen_option: (!opts.is_empty()).then(|| answer.clone()),
                answer,
                ranking,
                justification: safe_text(r),
            };
            same!(parse_decision(&render_decision(&d), &hs, &opts).map_err(e)?, d);
        }
        other => return Err(format!("unknown payload {other}")),
    }
    Ok(())
}

// ---- fuzzing ---------------------------------------------------------------

const FRAGMENTS: &[&str] = &[
    "=== QUICK ===", "=== REFLECTION ===", "=== PLAN ===", "=== SEARCH ===", "=== READING ===",
    "=== HYPOTHESES ===", "=== INTEGRATION ===", "=== DECISION ===", "=== END ===", "===END===", "== END ==",
    "SQ1: why", "SA1: because", "SQ2:", "SA3: x", "ANSWER: B", "ANSWER: E", "ANSWER:", "DECISION: ACCEPT",
    "DECISION: maybe", "FLAGGED_STEPS: 1, 9", "FLAGGED_STEPS: none", "P1: what", "P2:", "RETRIEVE_P1: yes",
    "RETRIEVE_P1: no", "RETRIEVE_P9: yes", "QUERIES_P1:", "1. beta", "2) heart", "3.", "K1: fact", "K1_FOR: P1",
    "K1_SOURCES: R1", "K1_SOURCES: R9", "H1: idea", "H1_OPTION: A", "H2_OPTION: A", "H1_STATUS: SUPPORTED",
    "H1_EVIDENCE: K1", "H1_EVIDENCE: none", "INTEGRATED: x", "INTEGRATED_FROM: H1", "RANKING: H1, H1",
    "RANKING: H1, H2", "RANKING: none", "JUSTIFICATION: ok", "lower case: value", "\u{0}", "\u{feff}", "🙂",
    "   ", "\t", "\r", "KEY_WITH_ÜMLAUT: x", "999999999999999999999999: y", "SQ99999999999: z",
];

pub fn fuzz_input(r: &mut ChaCha8Rng) -> String {
    let n = r.gen_range(0..40);
    let mut s = String::new();
    for _ in 0..n {
        if r.gen_bool(0.15) {
            let len = r.gen_range(0..12);
            s.extend((0..len).map(|_| char::from_u32(r.gen_range(0..0x3000)).unwrap_or('?')));
        } else {
            s.push_str(FRAGMENTS[r.gen_range(0..FRAGMENTS.len())]);
        }
        s.push_str(match r.gen_range(0..4) {
            0 => "",
            1 => " ",
            _ => "\n",
        });
    }
    s
}

/// Runs every parser on `raw`; any accepted payload must satisfy its
/// invariants. Panics propagate to the caller.
pub fn fuzz_check(raw: &str) -> Result<(), String> {
    let opts: Vec<McqOption> = ["A", "B", "C", "D"]
        .iter()
        .map(|l| McqOption {
            label: l.to_string(),
            text: String::new(),
        })
        .collect();
    let labels: HashSet<&str> = ["A", "B", "C", "D"].into_iter().collect();
    if let Ok(q) = parse_quick(raw, &opts) {
        if !labels.contains(q.final_answer.as_str()) || q.steps.is_empty() {
            return Err(format!("quick accepted bad payload {q:?}"));
        }
    }
    let q = QuickAnswer {
        steps: vec![SubStep {
            index: 1,
            subquestion: "x".into(),
            subanswer: "y".into(),
        }],
        final_answer: "A".into(),
        raw: String::new(),
    };
    if let Ok(v) = parse_reflection(raw, &q) {
        if v.flagged_steps.iter().any(|s| *s != 1) {
            return Err(format!("reflection flagged unknown step {v:?}"));
        }
    }
    let p = Plan {
        subquestions: vec![PlannedSubquestion {
            id: "P1".into(),
            text: "x".into(),
        }],
    };
    if let Ok(pl) = parse_plan(raw, 3) {
        if pl.subquestions.is_empty() || pl.subquestions.len() > 3 {
            return Err("plan size out of range".into());
        }
    }
    if let Ok(ds) = parse_search(raw, &p) {
        if ds.len() != 1 || ds[0].needs_retrieval == ds[0].queries.is_empty() {
            return Err(format!("search decision inconsistent {ds:?}"));
        }
    }
    let docs = vec![EvidenceDoc {
        label: "R1".into(),
        subquestion_id: "P1".into(),
        doc: RetrievedDoc {
            doc_id: "d1".into(),
            text: String::new(),
            score: 1.0,
            rank: 1,
            query: String::new(),
        },
    }];
    if let Ok(ks) = parse_reading(raw, &p, &docs) {
        if ks.iter().any(|k| k.subquestion_id != "P1" || k.source_doc_ids.iter().any(|d| d != "d1")) {
            return Err("reading references unknown ids".into());
        }
    }
    if let Ok(hs) = parse_hypotheses(raw, &opts, 4) {
        let got: HashSet<&str> = hs.iter().filter_map(|h| h.option_label.as_deref()).collect();
        if got != labels || hs.len() != 4 {
            return Err("hypotheses do not cover the options exactly".into());
        }
    }
    let hs = vec![Hypothesis {
        id: "H1".into(),
        option_label: None,
        statement: "x".into(),
    }];
    if let Ok((vs, ih)) = parse_integration(raw, &hs, &["K1".to_string()]) {
        let supported: HashSet<&str> = vs
            .iter()
            .filter(|v| v.status == VerdictStatus::Supported)
            .map(|v| v.hypothesis_id.as_str())
            .collect();
        if vs.len() != 1
            || vs.iter().any(|v| v.cited_insights.iter().any(|c| c != "K1"))
            || ih.supporting_hypothesis_ids.iter().any(|h| !supported.contains(h.as_str()))
        {
            return Err("integration payload inconsistent".into());
        }
    }
    if let Ok(d) = parse_decision(raw, &hs, &opts) {
        if !labels.contains(d.answer.as_str()) || d.ranking != vec!["H1".to_string()] {
            return Err(format!("decision accepted bad payload {d:?}"));
        }
    }
    Ok(())
}
