//! Per-agent reply parsers and their inverse renderers.
//!
//! Each parser pulls its block out of the raw completion, then checks the
//! payload against the ids it must agree with (option labels, step indices,
//! plan ids, retrieved documents, hypothesis ids).

use std::collections::{BTreeMap, HashMap, HashSet};

use super::block::{single_line, StructuredBlock};
use super::ParseError;
use crate::model::{
    Decision, EvidenceDoc, Hypothesis, HypothesisVerdict, IntegratedHypothesis, KeyInsight,
    McqOption, Plan, PlannedSubquestion, QuickAnswer, ReflectionDecision, ReflectionVerdict,
    SearchDecision, SubStep, VerdictStatus,
};

pub const QUICK_TAG: &str = "QUICK";
pub const REFLECTION_TAG: &str = "REFLECTION";
pub const PLAN_TAG: &str = "PLAN";
pub const SEARCH_TAG: &str = "SEARCH";
pub const READING_TAG: &str = "READING";
pub const HYPOTHESES_TAG: &str = "HYPOTHESES";
pub const INTEGRATION_TAG: &str = "INTEGRATION";
pub const DECISION_TAG: &str = "DECISION";

fn err<T>(reason: impl Into<String>) -> Result<T, ParseError> {
    Err(ParseError::new(reason))
}

/// Keys of the form `<prefix><n>` (exactly; no suffix), keyed by `n`.
fn numbered<'a>(block: &'a StructuredBlock, prefix: &str) -> BTreeMap<u32, &'a str> {
    block
        .keys()
        .filter_map(|k| {
            let digits = k.strip_prefix(prefix)?;
            if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
                return None;
            }
            Some((digits.parse().ok()?, k))
        })
        .collect()
}

fn mcq_label<'a>(value: &'a str, options: &[McqOption]) -> Result<&'a str, ParseError> {
    let label = value.trim();
    if options.iter().any(|o| o.label == label) {
        Ok(label)
    } else {
        let labels: Vec<&str> = options.iter().map(|o| o.label.as_str()).collect();
        err(format!(
            "ANSWER `{label}` is not one of the option labels [{}]",
            labels.join(", ")
        ))
    }
}

// ---- Quick ---------------------------------------------------------------

pub fn parse_quick(raw: &str, options: &[McqOption]) -> Result<QuickAnswer, ParseError> {
    let block = StructuredBlock::extract(raw, QUICK_TAG)?;
    let sqs = numbered(&block, "SQ");
    let sas = numbered(&block, "SA");
    if sqs.is_empty() {
        return err("no subquestions (SQ1, SQ2, ...) found");
    }
    for n in sas.keys() {
        if !sqs.contains_key(n) {
            return err(format!("SA{n} has no matching SQ{n}"));
        }
    }
    let mut steps = Vec::with_capacity(sqs.len());
    for (&n, key) in &sqs {
        let subquestion = block.require_text(key)?.to_string();
        if !sas.contains_key(&n) {
            return err(format!("SQ{n} has no matching SA{n}"));
        }
        let subanswer = block.require_text(&format!("SA{n}"))?.to_string();
        steps.push(SubStep {
            index: n,
            subquestion,
            subanswer,
        });
    }
    let answer = block.require_text("ANSWER")?;
    let final_answer = if options.is_empty() {
        answer.to_string()
    } else {
        mcq_label(answer, options)?.to_string()
    };
    Ok(QuickAnswer {
        steps,
        final_answer,
        raw: raw.to_string(),
    })
}

pub fn render_quick(quick: &QuickAnswer) -> String {
    let mut b = StructuredBlock::new(QUICK_TAG);
    for s in &quick.steps {
        b.push_text(format!("SQ{}", s.index), &s.subquestion);
        b.push_text(format!("SA{}", s.index), &s.subanswer);
    }
    b.push_text("ANSWER", &quick.final_answer);
    b.render()
}

// ---- Reflection ----------------------------------------------------------

pub fn parse_reflection(raw: &str, quick: &QuickAnswer) -> Result<ReflectionVerdict, ParseError> {
    let block = StructuredBlock::extract(raw, REFLECTION_TAG)?;
    let decision = match block.require_text("DECISION")?.trim().to_ascii_uppercase().as_str() {
        "ACCEPT" => ReflectionDecision::Accept,
        "ESCALATE" => ReflectionDecision::Escalate,
        other => return err(format!("DECISION must be ACCEPT or ESCALATE, got `{other}`")),
    };
    let known: HashSet<u32> = quick.steps.iter().map(|s| s.index).collect();
    let mut flagged_steps = Vec::new();
    for id in block.ids("FLAGGED_STEPS")? {
        let digits = id.trim_start_matches(['S', 'Q', 's', 'q']);
        let n: u32 = digits
            .parse()
            .map_err(|_| ParseError::new(format!("FLAGGED_STEPS entry `{id}` is not a step number")))?;
        if !known.contains(&n) {
            return err(format!("FLAGGED_STEPS references step {n}, which does not exist"));
        }
        if flagged_steps.contains(&n) {
            return err(format!("FLAGGED_STEPS lists step {n} twice"));
        }
        flagged_steps.push(n);
    }
    let rationale = block.text("RATIONALE").unwrap_or_default().to_string();
    Ok(ReflectionVerdict {
        decision,
        rationale,
        flagged_steps,
    })
}

pub fn render_reflection(verdict: &ReflectionVerdict) -> String {
    let mut b = StructuredBlock::new(REFLECTION_TAG);
    b.push_text(
        "DECISION",
        match verdict.decision {
            ReflectionDecision::Accept => "ACCEPT",
            ReflectionDecision::Escalate => "ESCALATE",
        },
    );
    let ids: Vec<String> = verdict.flagged_steps.iter().map(u32::to_string).collect();
    b.push_ids("FLAGGED_STEPS", &ids);
    b.push_text("RATIONALE", &verdict.rationale);
    b.render()
}

// ---- Planning ------------------------------------------------------------

pub fn parse_plan(raw: &str, max_subquestions: usize) -> Result<Plan, ParseError> {
    let block = StructuredBlock::extract(raw, PLAN_TAG)?;
    let keys = numbered(&block, "P");
    if keys.is_empty() {
        return err("no subquestions (P1, P2, ...) found");
    }
    if keys.len() > max_subquestions {
        return err(format!(
            "{} subquestions given, at most {max_subquestions} allowed",
            keys.len()
        ));
    }
    let subquestions = keys
        .values()
        .map(|key| {
            Ok(PlannedSubquestion {
                id: key.to_string(),
                text: block.require_text(key)?.to_string(),
            })
        })
        .collect::<Result<_, ParseError>>()?;
    Ok(Plan { subquestions })
}

pub fn render_plan(plan: &Plan) -> String {
    let mut b = StructuredBlock::new(PLAN_TAG);
    for sq in &plan.subquestions {
        b.push_text(&sq.id, &sq.text);
    }
    b.render()
}

// ---- Search --------------------------------------------------------------

pub fn parse_search(raw: &str, plan: &Plan) -> Result<Vec<SearchDecision>, ParseError> {
    let block = StructuredBlock::extract(raw, SEARCH_TAG)?;
    let ids: HashSet<&str> = plan.subquestions.iter().map(|s| s.id.as_str()).collect();
    for key in block.keys() {
        for prefix in ["RETRIEVE_", "QUERIES_"] {
            if let Some(id) = key.strip_prefix(prefix) {
                if !ids.contains(id) {
                    return err(format!("{key} refers to unknown subquestion {id}"));
                }
            }
        }
    }
    plan.subquestions
        .iter()
        .map(|sq| {
            let flag = block.require_text(&format!("RETRIEVE_{}", sq.id))?;
            let needs_retrieval = match flag.trim().to_ascii_lowercase().as_str() {
                "yes" | "true" => true,
                "no" | "false" => false,
                other => return err(format!("RETRIEVE_{} must be yes or no, got `{other}`", sq.id)),
            };
            let queries = block.list(&format!("QUERIES_{}", sq.id))?;
            match (needs_retrieval, queries.is_empty()) {
                (true, true) => err(format!(
                    "RETRIEVE_{id} is yes but QUERIES_{id} lists no queries",
                    id = sq.id
                )),
                (false, false) => err(format!(
                    "RETRIEVE_{id} is no but QUERIES_{id} lists queries",
                    id = sq.id
                )),
                _ => Ok(SearchDecision {
                    subquestion_id: sq.id.clone(),
                    needs_retrieval,
                    queries,
                }),
            }
        })
        .collect()
}

pub fn render_search(decisions: &[SearchDecision]) -> String {
    let mut b = StructuredBlock::new(SEARCH_TAG);
    for d in decisions {
        b.push_text(
            format!("RETRIEVE_{}", d.subquestion_id),
            if d.needs_retrieval { "yes" } else { "no" },
        );
        if d.needs_retrieval {
            b.push_list(format!("QUERIES_{}", d.subquestion_id), d.queries.clone());
        }
    }
    b.render()
}

// ---- Reading -------------------------------------------------------------

pub fn parse_reading(
    raw: &str,
    plan: &Plan,
    docs: &[EvidenceDoc],
) -> Result<Vec<KeyInsight>, ParseError> {
    let block = StructuredBlock::extract(raw, READING_TAG)?;
    let keys = numbered(&block, "K");
    if keys.is_empty() {
        return err("no insights (K1, K2, ...) found");
    }
    let plan_ids: HashSet<&str> = plan.subquestions.iter().map(|s| s.id.as_str()).collect();
    let by_label: HashMap<&str, &EvidenceDoc> = docs.iter().map(|d| (d.label.as_str(), d)).collect();
    keys.values()
        .map(|key| {
            let text = block.require_text(key)?.to_string();
            let for_key = format!("{key}_FOR");
            let subquestion_id = block.require_text(&for_key)?.trim().to_string();
            if !plan_ids.contains(subquestion_id.as_str()) {
                return err(format!("{for_key} refers to unknown subquestion {subquestion_id}"));
            }
            let mut source_doc_ids = Vec::new();
            for label in block.ids(&format!("{key}_SOURCES"))? {
                let Some(doc) = by_label.get(label.as_str()) else {
                    return err(format!("{key}_SOURCES cites unknown document {label}"));
                };
                if doc.subquestion_id != subquestion_id {
                    return err(format!(
                        "{key}_SOURCES cites {label}, which was retrieved for {} not {subquestion_id}",
                        doc.subquestion_id
                    ));
                }
                if !source_doc_ids.contains(&doc.doc.doc_id) {
                    source_doc_ids.push(doc.doc.doc_id.clone());
                }
            }
            Ok(KeyInsight {
                id: key.to_string(),
                subquestion_id,
                text,
                source_doc_ids,
            })
        })
        .collect()
}

pub fn render_reading(insights: &[KeyInsight], docs: &[EvidenceDoc]) -> String {
    let mut b = StructuredBlock::new(READING_TAG);
    for k in insights {
        b.push_text(&k.id, &k.text);
        b.push_text(format!("{}_FOR", k.id), &k.subquestion_id);
        let labels: Vec<String> = k
            .source_doc_ids
            .iter()
            .filter_map(|id| {
                docs.iter()
                    .find(|d| d.subquestion_id == k.subquestion_id && &d.doc.doc_id == id)
                    .map(|d| d.label.clone())
            })
            .collect();
        b.push_ids(format!("{}_SOURCES", k.id), &labels);
    }
    b.render()
}

// ---- Hypothesis ----------------------------------------------------------

pub fn parse_hypotheses(
    raw: &str,
    options: &[McqOption],
    max_hypotheses: usize,
) -> Result<Vec<Hypothesis>, ParseError> {
    let block = StructuredBlock::extract(raw, HYPOTHESES_TAG)?;
    let keys = numbered(&block, "H");
    if keys.is_empty() {
        return err("no hypotheses (H1, H2, ...) found");
    }
    let mut out = Vec::with_capacity(keys.len());
    let mut covered = HashSet::new();
    for key in keys.values() {
        let statement = block.require_text(key)?.to_string();
        let option_key = format!("{key}_OPTION");
        let option_label = match (options.is_empty(), block.text(&option_key)) {
            (true, None) => None,
            (true, Some(_)) => {
                return err(format!("{option_key} given but the question has no options"))
            }
            (false, None) => return err(format!("missing {option_key}")),
            (false, Some(v)) => {
                let label = mcq_label(v, options)
                    .map_err(|_| ParseError::new(format!("{option_key} `{}` is not an option label", v.trim())))?;
                if !covered.insert(label.to_string()) {
                    return err(format!("option {label} has more than one hypothesis"));
                }
                Some(label.to_string())
            }
        };
        out.push(Hypothesis {
            id: key.to_string(),
            option_label,
            statement,
        });
    }
    if options.is_empty() {
        if out.len() > max_hypotheses {
            return err(format!(
                "{} hypotheses given, at most {max_hypotheses} allowed",
                out.len()
            ));
        }
    } else if let Some(missing) = options.iter().find(|o| !covered.contains(&o.label)) {
        return err(format!("option {} has no hypothesis", missing.label));
    }
    Ok(out)
}

pub fn render_hypotheses(hypotheses: &[Hypothesis]) -> String {
    let mut b = StructuredBlock::new(HYPOTHESES_TAG);
    for h in hypotheses {
        b.push_text(&h.id, &h.statement);
        if let Some(label) = &h.option_label {
            b.push_text(format!("{}_OPTION", h.id), label);
        }
    }
    b.render()
}

// ---- Integration ---------------------------------------------------------

fn status_word(s: VerdictStatus) -> &'static str {
    match s {
        VerdictStatus::Supported => "SUPPORTED",
        VerdictStatus::Refuted => "REFUTED",
        VerdictStatus::Inconclusive => "INCONCLUSIVE",
    }
}

/// `evidence_ids` are the ids shown to the agent: insight ids, or document
/// labels when no reading stage ran.
pub fn parse_integration(
    raw: &str,
    hypotheses: &[Hypothesis],
    evidence_ids: &[String],
) -> Result<(Vec<HypothesisVerdict>, IntegratedHypothesis), ParseError> {
    let block = StructuredBlock::extract(raw, INTEGRATION_TAG)?;
    let evidence: HashSet<&str> = evidence_ids.iter().map(String::as_str).collect();
    let known: HashSet<&str> = hypotheses.iter().map(|h| h.id.as_str()).collect();
    for key in block.keys() {
        if let Some(id) = key.strip_suffix("_STATUS") {
            if !known.contains(id) {
                return err(format!("{key} refers to unknown hypothesis {id}"));
            }
        }
    }
    let mut verdicts = Vec::with_capacity(hypotheses.len());
    for h in hypotheses {
        let status_key = format!("{}_STATUS", h.id);
        let status = match block.require_text(&status_key)?.trim().to_ascii_uppercase().as_str() {
            "SUPPORTED" => VerdictStatus::Supported,
            "REFUTED" => VerdictStatus::Refuted,
            "INCONCLUSIVE" => VerdictStatus::Inconclusive,
            other => {
                return err(format!(
                    "{status_key} must be SUPPORTED, REFUTED or INCONCLUSIVE, got `{other}`"
                ))
            }
        };
        let ev_key = format!("{}_EVIDENCE", h.id);
        let cited = block.ids(&ev_key)?;
        for c in &cited {
            if !evidence.contains(c.as_str()) {
                return err(format!("{ev_key} cites unknown evidence {c}"));
            }
        }
        if status != VerdictStatus::Inconclusive && cited.is_empty() {
            return err(format!(
                "{} is {} but {ev_key} cites no evidence",
                h.id,
                status_word(status)
            ));
        }
        verdicts.push(HypothesisVerdict {
            hypothesis_id: h.id.clone(),
            status,
            cited_insights: cited,
            justification: block.text(&format!("{}_REASON", h.id)).unwrap_or_default().to_string(),
        });
    }
    let text = block.require_text("INTEGRATED")?.to_string();
    let supporting = block.ids("INTEGRATED_FROM")?;
    for id in &supporting {
        match verdicts.iter().find(|v| &v.hypothesis_id == id) {
            Some(v) if v.status == VerdictStatus::Supported => {}
            Some(_) => return err(format!("INTEGRATED_FROM lists {id}, which is not SUPPORTED")),
            None => return err(format!("INTEGRATED_FROM lists unknown hypothesis {id}")),
        }
    }
    Ok((
        verdicts,
        IntegratedHypothesis {
            text,
            supporting_hypothesis_ids: supporting,
        },
    ))
}

pub fn render_integration(verdicts: &[HypothesisVerdict], integrated: &IntegratedHypothesis) -> String {
    let mut b = StructuredBlock::new(INTEGRATION_TAG);
    for v in verdicts {
        b.push_text(format!("{}_STATUS", v.hypothesis_id), status_word(v.status));
        b.push_ids(format!("{}_EVIDENCE", v.hypothesis_id), &v.cited_insights);
        b.push_text(format!("{}_REASON", v.hypothesis_id), &v.justification);
    }
    b.push_text("INTEGRATED", &integrated.text);
    b.push_ids("INTEGRATED_FROM", &integrated.supporting_hypothesis_ids);
    b.render()
}

// ---- Decision ------------------------------------------------------------

pub fn parse_decision(
    raw: &str,
    hypotheses: &[Hypothesis],
    options: &[McqOption],
) -> Result<Decision, ParseError> {
    let block = StructuredBlock::extract(raw, DECISION_TAG)?;
    let answer = block.require_text("ANSWER")?;
    let (answer, chosen_option) = if options.is_empty() {
        (answer.to_string(), None)
    } else {
        let label = mcq_label(answer, options)?;
        (label.to_string(), Some(label.to_string()))
    };
    let ranking = block.ids("RANKING")?;
    if hypotheses.is_empty() {
        if !ranking.is_empty() {
            return err("RANKING must be none when there are no hypotheses");
        }
    } else {
        let expected: HashSet<&str> = hypotheses.iter().map(|h| h.id.as_str()).collect();
        let got: HashSet<&str> = ranking.iter().map(String::as_str).collect();
        if got.len() != ranking.len() {
            return err("RANKING lists a hypothesis more than once");
        }
        if got != expected {
            let mut want: Vec<&str> = expected.into_iter().collect();
            want.sort_unstable();
            return err(format!(
                "RANKING must order every hypothesis exactly once: {}",
                want.join(", ")
            ));
        }
    }
    Ok(Decision {
        answer,
        chosen_option,
        ranking,
        justification: block.text("JUSTIFICATION").unwrap_or_default().to_string(),
    })
}

pub fn render_decision(decision: &Decision) -> String {
    let mut b = StructuredBlock::new(DECISION_TAG);
    b.push_ids("RANKING", &decision.ranking);
    b.push_text("ANSWER", &decision.answer);
    b.push_text("JUSTIFICATION", &decision.justification);
    b.render()
}

/// True when `s` survives a render/parse cycle unchanged as a block value.
pub fn is_block_safe(s: &str) -> bool {
    single_line(s) == s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts(labels: &[&str]) -> Vec<McqOption> {
        labels
            .iter()
            .map(|l| McqOption {
                label: l.to_string(),
                text: format!("option {l}"),
            })
            .collect()
    }

    #[test]
    fn quick_with_two_pairs() {
        let raw = "Thinking...\n=== QUICK ===\nSQ1: What is X?\nSA1: X is a drug.\nSQ2: So which option?\nSA2: Option B.\nANSWER: B\n=== END ===\n";
        let q = parse_quick(raw, &opts(&["A", "B", "C", "D"])).unwrap();
        assert_eq!(q.steps.len(), 2);
        assert_eq!(q.steps[1].index, 2);
        assert_eq!(q.final_answer, "B");
    }

    #[test]
    fn quick_unpaired_is_rejected() {
        let raw = "=== QUICK ===\nSQ1: What is X?\nANSWER: B\n=== END ===";
        let e = parse_quick(raw, &[]).unwrap_err();
        assert!(e.reason.contains("SQ1 has no matching SA1"), "{e}");
    }

    #[test]
    fn quick_missing_answer() {
        let raw = "=== QUICK ===\nSQ1: a\nSA1: b\n=== END ===";
        assert_eq!(parse_quick(raw, &[]).unwrap_err().reason, "missing ANSWER");
    }

    #[test]
    fn quick_label_outside_options() {
        let raw = "=== QUICK ===\nSQ1: a\nSA1: b\nANSWER: E\n=== END ===";
        assert!(parse_quick(raw, &opts(&["A", "B"])).is_err());
    }

    #[test]
    fn reflection_forms() {
        let quick = parse_quick("=== QUICK ===\nSQ1: a\nSA1: b\nSQ2: c\nSA2: d\nANSWER: x\n=== END ===", &[]).unwrap();
        let v = parse_reflection("=== REFLECTION ===\nDECISION: ACCEPT\n=== END ===", &quick).unwrap();
        assert_eq!(v.decision, ReflectionDecision::Accept);
        assert!(v.flagged_steps.is_empty());
        let v = parse_reflection(
            "=== REFLECTION ===\nDECISION: ESCALATE\nFLAGGED_STEPS: 2\nRATIONALE: unsupported\n=== END ===",
            &quick,
        )
        .unwrap();
        assert_eq!(v.decision, ReflectionDecision::Escalate);
        assert_eq!(v.flagged_steps, vec![2]);
        assert!(parse_reflection("=== REFLECTION ===\nDECISION: ESCALATE\nFLAGGED_STEPS: 7\n=== END ===", &quick).is_err());
        assert!(parse_reflection("=== REFLECTION ===\nDECISION: MAYBE\n=== END ===", &quick).is_err());
    }

    #[test]
    fn plan_bounds() {
        let raw = "=== PLAN ===\nP1: a\nP2: b\nP3: c\n=== END ===";
        assert_eq!(parse_plan(raw, 3).unwrap().subquestions.len(), 3);
        assert!(parse_plan(raw, 2).is_err());
        assert!(parse_plan("=== PLAN ===\n=== END ===", 3).is_err());
    }

    #[test]
    fn search_consistency() {
        let plan = parse_plan("=== PLAN ===\nP1: a\nP2: b\n=== END ===", 5).unwrap();
        let ok = "=== SEARCH ===\nRETRIEVE_P1: yes\nQUERIES_P1:\n1. q one\nRETRIEVE_P2: no\n=== END ===";
        let d = parse_search(ok, &plan).unwrap();
        assert_eq!(d[0].queries, vec!["q one"]);
        assert!(!d[1].needs_retrieval);
        let missing = "=== SEARCH ===\nRETRIEVE_P1: yes\n=== END ===";
        assert!(parse_search(missing, &plan).is_err());
        let stray = "=== SEARCH ===\nRETRIEVE_P1: no\nRETRIEVE_P2: no\nRETRIEVE_P9: no\n=== END ===";
        assert!(parse_search(stray, &plan).is_err());
    }

    #[test]
    fn four_hypotheses_for_four_options() {
        let raw = "=== HYPOTHESES ===\nH1: a\nH1_OPTION: A\nH2: b\nH2_OPTION: B\nH3: c\nH3_OPTION: C\nH4: d\nH4_OPTION: D\n=== END ===";
        let hs = parse_hypotheses(raw, &opts(&["A", "B", "C", "D"]), 4).unwrap();
        assert_eq!(hs.len(), 4);
        let labels: Vec<_> = hs.iter().map(|h| h.option_label.clone().unwrap()).collect();
        assert_eq!(labels, vec!["A", "B", "C", "D"]);
        let short = "=== HYPOTHESES ===\nH1: a\nH1_OPTION: A\n=== END ===";
        assert!(parse_hypotheses(short, &opts(&["A", "B"]), 4).is_err());
    }

    #[test]
    fn integration_citations() {
        let hs = vec![
            Hypothesis { id: "H1".into(), option_label: None, statement: "a".into() },
            Hypothesis { id: "H2".into(), option_label: None, statement: "b".into() },
        ];
        let ev = vec!["K1".to_string()];
        let raw = "=== INTEGRATION ===\nH1_STATUS: INCONCLUSIVE\nH2_STATUS: SUPPORTED\nH2_EVIDENCE: K1\nINTEGRATED: b holds\nINTEGRATED_FROM: H2\n=== END ===";
        let (v, i) = parse_integration(raw, &hs, &ev).unwrap();
        assert_eq!(v[1].status, VerdictStatus::Supported);
        assert_eq!(v[1].cited_insights, vec!["K1"]);
        assert_eq!(i.supporting_hypothesis_ids, vec!["H2"]);
        let uncited = "=== INTEGRATION ===\nH1_STATUS: INCONCLUSIVE\nH2_STATUS: SUPPORTED\nINTEGRATED: b\n=== END ===";
        assert!(parse_integration(uncited, &hs, &ev).is_err());
        let bad_from = "=== INTEGRATION ===\nH1_STATUS: INCONCLUSIVE\nH2_STATUS: REFUTED\nH2_EVIDENCE: K1\nINTEGRATED: b\nINTEGRATED_FROM: H2\n=== END ===";
        assert!(parse_integration(bad_from, &hs, &ev).is_err());
    }

    #[test]
    fn decision_closure() {
        let o = opts(&["A", "B", "C", "D"]);
        let e = parse_decision("=== DECISION ===\nANSWER: E\n=== END ===", &[], &o).unwrap_err();
        assert!(e.reason.contains("not one of the option labels"));
        let d = parse_decision("=== DECISION ===\nANSWER: C\n=== END ===", &[], &o).unwrap();
        assert_eq!(d.chosen_option.as_deref(), Some("C"));
        let hs = vec![Hypothesis { id: "H1".into(), option_label: None, statement: "a".into() }];
        assert!(parse_decision("=== DECISION ===\nANSWER: C\n=== END ===", &hs, &o).is_err());
        assert!(parse_decision("=== DECISION ===\nANSWER: B or C\nRANKING: H1\n=== END ===", &hs, &o).is_err());
    }
}
