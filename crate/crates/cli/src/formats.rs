//! Line-delimited file formats.
//!
//! * candidates: one JSON object per line,
//!   `{"qid", "query", "passages": [{"pid", "text"?, "embedding", "score"}]}`
//! * gold: one JSON object per line, `{"qid", "answers": [[alias, ...], ...]}`
//! * run: whitespace separated `qid Q0 pid rank score tag`
//!
//! Blank lines and lines starting with `#` are ignored in the JSON formats.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use dpp_rerank::{Candidate, CandidateSet64, GoldEntry};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// A parsed value together with the warnings produced while reading it.
#[derive(Debug, Clone, PartialEq)]
pub struct Parsed<T> {
    pub value: T,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassageRecord {
    pub pid: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    pub embedding: Vec<f64>,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidatesRecord {
    pub qid: String,
    pub query: String,
    pub passages: Vec<PassageRecord>,
}

impl CandidatesRecord {
    pub fn from_set(set: &CandidateSet64) -> Self {
        Self {
            qid: set.qid().to_string(),
            query: set.query().to_string(),
            passages: set
                .candidates()
                .iter()
                .map(|c| PassageRecord {
                    pid: c.pid.clone(),
                    text: c.text.clone(),
                    embedding: c.embedding.clone(),
                    score: c.raw_score,
                })
                .collect(),
        }
    }

    pub fn into_set(self) -> dpp_rerank::Result<CandidateSet64> {
        let cands = self
            .passages
            .into_iter()
            .map(|p| Candidate {
                pid: p.pid,
                text: p.text,
                embedding: p.embedding,
                raw_score: p.score,
            })
            .collect();
        CandidateSet64::new(self.qid, self.query, cands)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldRecord {
    pub qid: String,
    pub answers: Vec<Vec<String>>,
}

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn records(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

pub fn parse_candidates(path: &Path) -> CliResult<Parsed<Vec<CandidateSet64>>> {
    parse_candidates_str(&read(path)?, path)
}

pub fn parse_candidates_str(text: &str, path: &Path) -> CliResult<Parsed<Vec<CandidateSet64>>> {
    let mut sets: Vec<CandidateSet64> = Vec::new();
    let mut seen = HashSet::new();
    let mut warnings = Vec::new();
    for (line, raw) in records(text) {
        let parse_err = |message: String| CliError::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let rec: CandidatesRecord = serde_json::from_str(raw).map_err(|e| parse_err(e.to_string()))?;
        let qid = rec.qid.clone();
        let set = rec.into_set().map_err(|e| parse_err(format!("query `{qid}`: {e}")))?;
        if let Some(first) = sets.first() {
            if first.dim() != set.dim() {
                return Err(CliError::DimensionDrift {
                    path: path.to_path_buf(),
                    line,
                    first_qid: first.qid().to_string(),
                    qid,
                    expected: first.dim(),
                    found: set.dim(),
                });
            }
        }
        if !seen.insert(qid.clone()) {
            return Err(CliError::DuplicateQid {
                path: path.to_path_buf(),
                line,
                qid,
            });
        }
        sets.push(set);
    }
    if sets.is_empty() {
        warnings.push(format!("{}: no queries found", path.display()));
    }
    Ok(Parsed { value: sets, warnings })
}

pub fn format_candidates(sets: &[CandidateSet64]) -> String {
    let mut out = String::new();
    for set in sets {
        let line = serde_json::to_string(&CandidatesRecord::from_set(set)).expect("serializable record");
        out.push_str(&line);
        out.push('\n');
    }
    out
}

pub fn parse_gold(path: &Path) -> CliResult<Parsed<Vec<GoldEntry>>> {
    parse_gold_str(&read(path)?, path)
}

pub fn parse_gold_str(text: &str, path: &Path) -> CliResult<Parsed<Vec<GoldEntry>>> {
    let mut entries = Vec::new();
    let mut seen = HashSet::new();
    for (line, raw) in records(text) {
        let parse_err = |message: String| CliError::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let rec: GoldRecord = serde_json::from_str(raw).map_err(|e| parse_err(e.to_string()))?;
        if !seen.insert(rec.qid.clone()) {
            return Err(CliError::DuplicateQid {
                path: path.to_path_buf(),
                line,
                qid: rec.qid,
            });
        }
        entries.push(GoldEntry::new(rec.qid, rec.answers).map_err(|e| parse_err(e.to_string()))?);
    }
    let mut warnings = Vec::new();
    if entries.is_empty() {
        warnings.push(format!("{}: no gold entries found", path.display()));
    }
    Ok(Parsed {
        value: entries,
        warnings,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunEntry {
    pub qid: String,
    pub pid: String,
    pub rank: usize,
    pub score: f64,
    pub tag: String,
}

/// Formats a score with 6 significant digits, like C's `%g`.
pub fn format_score(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    const PRECISION: i32 = 6;
    let sci = format!("{:.*e}", (PRECISION - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..PRECISION).contains(&exp) {
        let decimals = (PRECISION - 1 - exp) as usize;
        trim_zeros(format!("{:.*}", decimals, x))
    } else {
        format!("{}e{}", trim_zeros(mantissa.to_string()), exp)
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

pub fn format_run(entries: &[RunEntry]) -> String {
    let mut out = String::new();
    for e in entries {
        writeln!(out, "{} Q0 {} {} {} {}", e.qid, e.pid, e.rank, format_score(e.score), e.tag)
            .expect("write to string");
    }
    out
}

pub fn parse_run(path: &Path) -> CliResult<Vec<RunEntry>> {
    parse_run_str(&read(path)?, path)
}

pub fn parse_run_str(text: &str, path: &Path) -> CliResult<Vec<RunEntry>> {
    let mut entries = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| CliError::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let fields: Vec<&str> = raw.split_whitespace().collect();
        let [qid, q0, pid, rank, score, tag] = fields[..] else {
            return Err(parse_err(format!("expected 6 fields, found {}", fields.len())));
        };
        if q0 != "Q0" {
            return Err(parse_err(format!("second field must be `Q0`, found `{q0}`")));
        }
        let rank: usize = rank.parse().map_err(|_| parse_err(format!("invalid rank `{rank}`")))?;
        let score: f64 = score.parse().map_err(|_| parse_err(format!("invalid score `{score}`")))?;
        entries.push(RunEntry {
            qid: qid.to_string(),
            pid: pid.to_string(),
            rank,
            score,
            tag: tag.to_string(),
        });
    }
    validate_run(&entries).map_err(|message| CliError::InvalidRun {
        path: path.to_path_buf(),
        message,
    })?;
    Ok(entries)
}

/// Ranks contiguous from 1 within each qid and `(qid, pid)` pairs unique.
pub fn validate_run(entries: &[RunEntry]) -> Result<(), String> {
    let mut ranks: HashMap<&str, Vec<usize>> = HashMap::new();
    let mut pairs = HashSet::new();
    for e in entries {
        if !pairs.insert((e.qid.as_str(), e.pid.as_str())) {
            return Err(format!("duplicate entry for query `{}` passage `{}`", e.qid, e.pid));
        }
        ranks.entry(&e.qid).or_default().push(e.rank);
    }
    for (qid, mut r) in ranks {
        r.sort_unstable();
        if r.iter().enumerate().any(|(i, &rank)| rank != i + 1) {
            return Err(format!("ranks for query `{qid}` are not contiguous from 1"));
        }
    }
    Ok(())
}

/// Run entries grouped by qid, each group sorted by rank.
pub fn group_run(entries: &[RunEntry]) -> HashMap<String, Vec<&RunEntry>> {
    let mut groups: HashMap<String, Vec<&RunEntry>> = HashMap::new();
    for e in entries {
        groups.entry(e.qid.clone()).or_default().push(e);
    }
    for group in groups.values_mut() {
        group.sort_by_key(|e| e.rank);
    }
    groups
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::path::PathBuf;

    fn p() -> PathBuf {
        PathBuf::from("mem")
    }

    #[test]
    fn two_passage_line() {
        let text = r#"{"qid":"q","query":"x","passages":[{"pid":"a","embedding":[1,0,0,0],"score":1.0},{"pid":"b","text":"t","embedding":[0,1,0,0],"score":0.5}]}"#;
        let parsed = parse_candidates_str(text, &p()).unwrap();
        assert_eq!(parsed.value.len(), 1);
        assert_eq!(parsed.value[0].len(), 2);
        assert_eq!(parsed.value[0].dim(), 4);
        assert!(parsed.warnings.is_empty());
    }

    #[test]
    fn missing_embedding_reports_line() {
        let text = r#"{"qid":"q","query":"x","passages":[{"pid":"a","score":1.0}]}"#;
        match parse_candidates_str(text, &p()) {
            Err(CliError::Parse { line: 1, message, .. }) => assert!(message.contains("embedding")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_file_warns() {
        let parsed = parse_candidates_str("", &p()).unwrap();
        assert!(parsed.value.is_empty());
        assert_eq!(parsed.warnings.len(), 1);
    }

    #[test]
    fn comment_lines_are_skipped() {
        let text = "# model=foo pooling=mean\n{\"qid\":\"q\",\"query\":\"\",\"passages\":[{\"pid\":\"a\",\"embedding\":[1],\"score\":0}]}\n";
        let parsed = parse_candidates_str(text, &p()).unwrap();
        assert_eq!(parsed.value.len(), 1);
        assert!(parsed.warnings.is_empty());
    }

    #[test]
    fn dimension_drift_names_both_queries() {
        let text = concat!(
            r#"{"qid":"q1","query":"","passages":[{"pid":"a","embedding":[1,0],"score":0}]}"#,
            "\n",
            r#"{"qid":"q2","query":"","passages":[{"pid":"a","embedding":[1,0,0],"score":0}]}"#
        );
        match parse_candidates_str(text, &p()) {
            Err(e @ CliError::DimensionDrift { line: 2, .. }) => {
                let msg = e.to_string();
                assert!(msg.contains("q1") && msg.contains("q2"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_qid_rejected() {
        let line = r#"{"qid":"q1","query":"","passages":[{"pid":"a","embedding":[1],"score":0}]}"#;
        let text = format!("{line}\n{line}\n");
        assert!(matches!(
            parse_candidates_str(&text, &p()),
            Err(CliError::DuplicateQid { line: 2, .. })
        ));
    }

    #[test]
    fn invalid_candidate_reports_pid() {
        let text = r#"{"qid":"q","query":"","passages":[{"pid":"zero","embedding":[0,0],"score":0}]}"#;
        match parse_candidates_str(text, &p()) {
            Err(CliError::Parse { message, .. }) => assert!(message.contains("zero")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn gold_parsing() {
        let text = "{\"qid\":\"q\",\"answers\":[[\"a1\",\"alias\"],[\"b\"]]}\n";
        let g = parse_gold_str(text, &p()).unwrap();
        assert_eq!(g.value[0].n(), 2);
        let bad = "{\"qid\":\"q\",\"answers\":[[]]}\n";
        assert!(matches!(parse_gold_str(bad, &p()), Err(CliError::Parse { line: 1, .. })));
    }

    #[test]
    fn score_formatting() {
        assert_eq!(format_score(0.0), "0");
        assert_eq!(format_score(1.0), "1");
        assert_eq!(format_score(-0.733969), "-0.733969");
        assert_eq!(format_score(0.1234567), "0.123457");
        assert_eq!(format_score(123456.7), "123457");
        assert_eq!(format_score(1234567.0), "1.23457e6");
        assert_eq!(format_score(0.0001234), "0.0001234");
        assert_eq!(format_score(0.00001234), "1.234e-5");
        assert_eq!(format_score(999999.5), "1e6");
        assert_eq!(format_score(f64::NEG_INFINITY), "-inf");
    }

    #[test]
    fn run_validation() {
        let e = |qid: &str, pid: &str, rank| RunEntry {
            qid: qid.into(),
            pid: pid.into(),
            rank,
            score: 0.0,
            tag: "t".into(),
        };
        assert!(validate_run(&[e("q", "a", 1), e("q", "b", 2)]).is_ok());
        assert!(validate_run(&[e("q", "a", 1), e("q", "b", 3)]).is_err());
        assert!(validate_run(&[e("q", "a", 1), e("q", "a", 2)]).is_err());
        assert!(parse_run_str("q Q0 a 1 0.5\n", &p()).is_err());
        assert!(parse_run_str("q Q1 a 1 0.5 t\n", &p()).is_err());
    }

    prop_compose! {
        fn arb_set(dim: usize)(qid in "[a-z]{1,6}", query in ".{0,12}",
            rows in prop::collection::vec(
                (prop::option::of("[ -~]{0,20}"),
                 prop::collection::vec(-1e3f64..1e3, dim),
                 -1e6f64..1e6), 1..6)) -> Option<CandidateSet64> {
            let cands = rows.into_iter().enumerate().map(|(i, (text, emb, s))| Candidate {
                pid: format!("p{i}"), text, embedding: emb, raw_score: s,
            }).collect();
            CandidateSet64::new(qid, query, cands).ok()
        }
    }

    proptest! {
        #[test]
        fn candidates_round_trip(sets in prop::collection::vec(arb_set(3), 0..4)) {
            let mut sets: Vec<_> = sets.into_iter().flatten().collect();
            let mut seen = HashSet::new();
            sets.retain(|s| seen.insert(s.qid().to_string()));
            let text = format_candidates(&sets);
            let parsed = parse_candidates_str(&text, &p()).unwrap().value;
            prop_assert_eq!(&parsed, &sets);
            prop_assert_eq!(format_candidates(&parsed), text);
        }

        #[test]
        fn run_round_trip(scores in prop::collection::vec(prop::num::f64::NORMAL, 1..10)) {
            let entries: Vec<RunEntry> = scores.iter().enumerate().map(|(i, &s)| RunEntry {
                qid: "q".into(), pid: format!("p{i}"), rank: i + 1, score: s, tag: "dpp".into(),
            }).collect();
            let text = format_run(&entries);
            let parsed = parse_run_str(&text, &p()).unwrap();
            prop_assert_eq!(format_run(&parsed), text);
            for (a, b) in parsed.iter().zip(&entries) {
                prop_assert_eq!(&a.pid, &b.pid);
                prop_assert_eq!(a.rank, b.rank);
                prop_assert!(((a.score - b.score) / b.score).abs() < 1e-5);
            }
        }
    }
}
