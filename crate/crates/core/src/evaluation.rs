//! Multi-answer retrieval metrics and the quality-only baseline ranker.
//!
//! A question with `n` distinct answers succeeds at cutoff `k` under MRECALL
//! when the top-`k` passages cover at least `min(n, k)` answers. Recall@k
//! only asks for one covered answer.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{normalize_quality, CandidateSet};
use crate::map_inference::{Ranking, Selection, StopReason};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldEntry {
    qid: String,
    answer_sets: Vec<Vec<String>>,
}

impl GoldEntry {
    pub fn new(qid: impl Into<String>, answer_sets: Vec<Vec<String>>) -> Result<Self> {
        let qid = qid.into();
        if answer_sets.is_empty() {
            return Err(Error::InvalidGold {
                qid,
                reason: "no answers".into(),
            });
        }
        for (g, group) in answer_sets.iter().enumerate() {
            if group.is_empty() {
                return Err(Error::InvalidGold {
                    qid,
                    reason: format!("answer group {g} is empty"),
                });
            }
            if let Some(a) = group.iter().find(|a| normalize_text(a).is_empty()) {
                return Err(Error::InvalidGold {
                    qid,
                    reason: format!("alias {a:?} in group {g} is empty after normalization"),
                });
            }
        }
        Ok(Self { qid, answer_sets })
    }

    pub fn qid(&self) -> &str {
        &self.qid
    }

    pub fn answer_sets(&self) -> &[Vec<String>] {
        &self.answer_sets
    }

    /// Number of distinct answers.
    pub fn n(&self) -> usize {
        self.answer_sets.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MatchMode {
    #[default]
    Substring,
    /// Alias must match a whole run of tokens.
    WordBoundary,
}

const ARTICLES: [&str; 3] = ["a", "an", "the"];

/// Lowercase, strip punctuation, drop the articles `a`/`an`/`the`, collapse
/// whitespace.
pub fn normalize_text(s: &str) -> String {
    let lowered: String = s
        .to_lowercase()
        .chars()
        .filter(|c| !c.is_ascii_punctuation() && !is_unicode_punct(*c))
        .collect();
    lowered
        .split_whitespace()
        .filter(|w| !ARTICLES.contains(w))
        .collect::<Vec<_>>()
        .join(" ")
}

fn is_unicode_punct(c: char) -> bool {
    matches!(
        c,
        '\u{2010}'..='\u{2027}' | '\u{3001}' | '\u{3002}' | '\u{00A1}' | '\u{00BF}' | '\u{00AB}' | '\u{00BB}'
    )
}

fn contains(passage: &str, alias: &str, mode: MatchMode) -> bool {
    match mode {
        MatchMode::Substring => passage.contains(alias),
        MatchMode::WordBoundary => format!(" {passage} ").contains(&format!(" {alias} ")),
    }
}

/// True iff some normalized alias occurs in some normalized passage.
pub fn answer_covered(aliases: &[String], passages: &[&str], mode: MatchMode) -> bool {
    let passages: Vec<String> = passages.iter().map(|p| normalize_text(p)).collect();
    covered_normalized(aliases, &passages, mode)
}

fn covered_normalized(aliases: &[String], passages: &[String], mode: MatchMode) -> bool {
    aliases
        .iter()
        .map(|a| normalize_text(a))
        .filter(|a| !a.is_empty())
        .any(|a| passages.iter().any(|p| contains(p, &a, mode)))
}

/// Number of answer groups covered by `passages`.
pub fn covered_count(gold: &GoldEntry, passages: &[&str], mode: MatchMode) -> usize {
    let passages: Vec<String> = passages.iter().map(|p| normalize_text(p)).collect();
    gold.answer_sets
        .iter()
        .filter(|aliases| covered_normalized(aliases, &passages, mode))
        .count()
}

/// Texts of the selected passages; a passage without text is an error.
pub fn selection_texts<'a, T>(set: &'a CandidateSet<T>, ranking: &Ranking<T>) -> Result<Vec<&'a str>>
where
    T: Scalar,
{
    ranking
        .selected
        .iter()
        .map(|s| {
            let c = &set.candidates()[s.index];
            c.text.as_deref().ok_or_else(|| Error::MissingText { pid: c.pid.clone() })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CutoffResult {
    pub covered: usize,
    pub success: bool,
}

/// MRECALL@k: success iff `covered >= min(n, k)`.
pub fn mrecall_at_k(gold: &GoldEntry, selected: &[&str], k: usize, mode: MatchMode) -> CutoffResult {
    let covered = covered_count(gold, &selected[..selected.len().min(k)], mode);
    CutoffResult {
        covered,
        success: mrecall_success(gold.n(), covered, k),
    }
}

pub fn mrecall_success(n: usize, covered: usize, k: usize) -> bool {
    covered >= n.min(k)
}

/// Recall@k: at least one answer covered.
pub fn recall_at_k(gold: &GoldEntry, selected: &[&str], k: usize, mode: MatchMode) -> bool {
    covered_count(gold, &selected[..selected.len().min(k)], mode) >= 1
}

/// Top-`k` candidates by descending normalized quality (lowest index on
/// ties). Gains carry the quality scores.
pub fn qrr_rank<T: Scalar>(set: &CandidateSet<T>, k: usize, floor: T) -> Result<Ranking<T>> {
    let n = set.len();
    if k < 1 || k > n {
        return Err(Error::InvalidK { k, n });
    }
    let q = normalize_quality(set, floor)?;
    let q = q.values();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        q[b].partial_cmp(&q[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let selected = order
        .into_iter()
        .take(k)
        .map(|i| Selection {
            index: i,
            pid: set.candidates()[i].pid.clone(),
            gain: q[i],
        })
        .collect();
    Ok(Ranking {
        qid: set.qid().to_string(),
        selected,
        stop_reason: StopReason::ReachedK,
    })
}

/// Coverage of one question at each evaluated cutoff. A cutoff with no entry
/// counts as zero coverage (question absent from the run).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuestionEval {
    pub qid: String,
    pub n: usize,
    pub covered_at: BTreeMap<usize, usize>,
}

impl QuestionEval {
    pub fn missing(qid: impl Into<String>, n: usize) -> Self {
        Self {
            qid: qid.into(),
            n,
            covered_at: BTreeMap::new(),
        }
    }

    /// Evaluates the ranked passage texts at every cutoff.
    pub fn from_texts(gold: &GoldEntry, ranked: &[&str], cutoffs: &[usize], mode: MatchMode) -> Self {
        let covered_at = cutoffs
            .iter()
            .map(|&k| (k, mrecall_at_k(gold, ranked, k, mode).covered))
            .collect();
        Self {
            qid: gold.qid().to_string(),
            n: gold.n(),
            covered_at,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutoffSummary {
    pub k: usize,
    pub mrecall: f64,
    pub recall: f64,
    pub question_count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionDetail {
    pub qid: String,
    pub k: usize,
    pub n: usize,
    pub covered: usize,
    pub success: bool,
    pub recall_hit: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub question_count: usize,
    pub cutoffs: Vec<CutoffSummary>,
    pub details: Vec<QuestionDetail>,
}

impl EvalReport {
    pub fn cutoff(&self, k: usize) -> Option<&CutoffSummary> {
        self.cutoffs.iter().find(|c| c.k == k)
    }

    /// Fixed-width table, one row per cutoff.
    pub fn table(&self) -> String {
        let mut out = format!("{:>6}  {:>10}  {:>10}  {:>9}\n", "k", "MRECALL@k", "Recall@k", "questions");
        for c in &self.cutoffs {
            out.push_str(&format!(
                "{:>6}  {:>10.4}  {:>10.4}  {:>9}\n",
                c.k, c.mrecall, c.recall, c.question_count
            ));
        }
        out
    }
}

/// Fraction of questions succeeding at every cutoff. Details are ordered by
/// qid, then cutoff.
pub fn aggregate(entries: &[QuestionEval], cutoffs: &[usize]) -> EvalReport {
    let mut sorted: Vec<&QuestionEval> = entries.iter().collect();
    sorted.sort_by(|a, b| a.qid.cmp(&b.qid));
    let total = entries.len();
    let mut details = Vec::with_capacity(total * cutoffs.len());
    let mut summaries = Vec::with_capacity(cutoffs.len());
    for &k in cutoffs {
        let (mut hits, mut any) = (0usize, 0usize);
        for e in &sorted {
            let covered = e.covered_at.get(&k).copied().unwrap_or(0);
            let success = mrecall_success(e.n, covered, k);
            let recall_hit = covered >= 1;
            hits += success as usize;
            any += recall_hit as usize;
            details.push(QuestionDetail {
                qid: e.qid.clone(),
                k,
                n: e.n,
                covered,
                success,
                recall_hit,
            });
        }
        let frac = |x: usize| if total == 0 { 0.0 } else { x as f64 / total as f64 };
        summaries.push(CutoffSummary {
            k,
            mrecall: frac(hits),
            recall: frac(any),
            question_count: total,
        });
    }
    details.sort_by(|a, b| a.qid.cmp(&b.qid).then(a.k.cmp(&b.k)));
    EvalReport {
        question_count: total,
        cutoffs: summaries,
        details,
    }
}
