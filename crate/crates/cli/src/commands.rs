//! End-to-end `rerank` and `evaluate` pipelines.

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use dpp_rerank::evaluation::selection_texts;
use dpp_rerank::{
    aggregate, greedy_map, kernel_for, qrr_rank, CandidateSet64, EvalReport, MatchMode, QuestionEval, Ranking64,
    SimTransform,
};
use rayon::prelude::*;

use crate::error::{CliError, CliResult};
use crate::formats::{self, RunEntry};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Dpp,
    Qrr,
}

impl Mode {
    pub fn tag(self) -> &'static str {
        match self {
            Mode::Dpp => "dpp",
            Mode::Qrr => "qrr",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "dpp" => Ok(Mode::Dpp),
            "qrr" => Ok(Mode::Qrr),
            other => Err(format!("unknown mode `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RerankConfig {
    pub mode: Mode,
    pub k: usize,
    pub transform: SimTransform,
    pub floor: f64,
    /// `None` picks the transform's default ridge.
    pub ridge: Option<f64>,
}

impl RerankConfig {
    pub fn new(mode: Mode, k: usize) -> Self {
        Self {
            mode,
            k,
            transform: SimTransform::Affine,
            floor: dpp_rerank::kernel::DEFAULT_QUALITY_FLOOR,
            ridge: None,
        }
    }

    pub fn ridge(&self) -> f64 {
        self.ridge.unwrap_or_else(|| self.transform.default_ridge())
    }
}

/// Re-ranks one query. `k` larger than the candidate count is truncated and
/// reported as a warning.
pub fn rerank_set(set: &CandidateSet64, config: &RerankConfig) -> CliResult<(Ranking64, Option<String>)> {
    if config.k == 0 {
        return Err(CliError::Argument("k must be at least 1".into()));
    }
    let n = set.len();
    let (k, warning) = if config.k > n {
        (
            n,
            Some(format!(
                "query `{}` has {n} candidates; truncating k = {} to {n}",
                set.qid(),
                config.k
            )),
        )
    } else {
        (config.k, None)
    };
    let wrap = |source| CliError::Query {
        qid: set.qid().to_string(),
        source,
    };
    let ranking = match config.mode {
        Mode::Dpp => {
            let kernel = kernel_for(set, config.transform, config.floor, config.ridge()).map_err(wrap)?;
            greedy_map(&kernel, &set.pids(), k).map_err(wrap)?
        }
        Mode::Qrr => qrr_rank(set, k, config.floor).map_err(wrap)?,
    };
    Ok((ranking.with_qid(set.qid()), warning))
}

pub fn run_entries(ranking: &Ranking64, mode: Mode) -> Vec<RunEntry> {
    ranking
        .selected
        .iter()
        .enumerate()
        .map(|(i, s)| RunEntry {
            qid: ranking.qid.clone(),
            pid: s.pid.clone(),
            rank: i + 1,
            score: s.gain,
            tag: mode.tag().to_string(),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RerankOutput {
    pub entries: Vec<RunEntry>,
    pub warnings: Vec<String>,
}

/// Re-ranks every query in parallel; output keeps input order.
pub fn rerank_sets(sets: &[CandidateSet64], config: &RerankConfig) -> CliResult<RerankOutput> {
    let results: Vec<_> = sets.par_iter().map(|s| rerank_set(s, config)).collect();
    let mut out = RerankOutput {
        entries: Vec::new(),
        warnings: Vec::new(),
    };
    for r in results {
        let (ranking, warning) = r?;
        out.entries.extend(run_entries(&ranking, config.mode));
        out.warnings.extend(warning);
    }
    Ok(out)
}

/// Reads candidates, re-ranks, writes the run file. Returns the warnings.
pub fn rerank_command(input: &Path, config: &RerankConfig, output: &Path) -> CliResult<Vec<String>> {
    let parsed = formats::parse_candidates(input)?;
    let mut out = rerank_sets(&parsed.value, config)?;
    formats::write_file(output, &formats::format_run(&out.entries))?;
    let mut warnings = parsed.warnings;
    warnings.append(&mut out.warnings);
    Ok(warnings)
}

#[derive(Debug, Clone)]
pub struct EvaluateArgs {
    pub run: PathBuf,
    pub gold: PathBuf,
    pub passages: PathBuf,
    pub cutoffs: Vec<usize>,
    pub mode: MatchMode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluateOutput {
    pub report: EvalReport,
    pub warnings: Vec<String>,
}

pub fn evaluate_command(args: &EvaluateArgs) -> CliResult<EvaluateOutput> {
    let run = formats::parse_run(&args.run)?;
    let gold = formats::parse_gold(&args.gold)?;
    let cands = formats::parse_candidates(&args.passages)?;
    let mut warnings = gold.warnings;
    warnings.extend(cands.warnings);
    let mut out = evaluate_entries(&run, &gold.value, &cands.value, &args.cutoffs, args.mode)?;
    warnings.append(&mut out.warnings);
    out.warnings = warnings;
    Ok(out)
}

/// Scores a run against gold answers. Gold questions absent from the run are
/// failures at every cutoff; run queries without gold are ignored.
pub fn evaluate_entries(
    run: &[RunEntry],
    gold: &[dpp_rerank::GoldEntry],
    sets: &[CandidateSet64],
    cutoffs: &[usize],
    mode: MatchMode,
) -> CliResult<EvaluateOutput> {
    let by_qid: HashMap<&str, &CandidateSet64> = sets.iter().map(|s| (s.qid(), s)).collect();
    let groups = formats::group_run(run);
    let depth = cutoffs.iter().copied().max().unwrap_or(0);
    let mut warnings = Vec::new();
    let mut evals = Vec::with_capacity(gold.len());

    for g in gold {
        let Some(lines) = groups.get(g.qid()) else {
            warnings.push(format!("question `{}` is missing from the run; counted as a failure", g.qid()));
            evals.push(QuestionEval::missing(g.qid(), g.n()));
            continue;
        };
        let unknown = |pid: &str| CliError::UnknownPassage {
            qid: g.qid().to_string(),
            pid: pid.to_string(),
        };
        let set = by_qid.get(g.qid()).ok_or_else(|| unknown(&lines[0].pid))?;
        let index: HashMap<&str, usize> = set
            .candidates()
            .iter()
            .enumerate()
            .map(|(i, c)| (c.pid.as_str(), i))
            .collect();
        let mut selected = Vec::with_capacity(depth.min(lines.len()));
        for line in lines.iter().take(depth) {
            let &i = index.get(line.pid.as_str()).ok_or_else(|| unknown(&line.pid))?;
            selected.push(dpp_rerank::Selection {
                index: i,
                pid: line.pid.clone(),
                gain: line.score,
            });
        }
        let ranking = Ranking64 {
            qid: g.qid().to_string(),
            selected,
            stop_reason: dpp_rerank::StopReason::ReachedK,
        };
        let texts = selection_texts(set, &ranking).map_err(|source| CliError::Query {
            qid: g.qid().to_string(),
            source,
        })?;
        evals.push(QuestionEval::from_texts(g, &texts, cutoffs, mode));
    }

    let gold_qids: std::collections::HashSet<&str> = gold.iter().map(|g| g.qid()).collect();
    let mut extra: Vec<&String> = groups.keys().filter(|q| !gold_qids.contains(q.as_str())).collect();
    extra.sort();
    for q in extra {
        warnings.push(format!("run query `{q}` has no gold answers; ignored"));
    }

    Ok(EvaluateOutput {
        report: aggregate(&evals, cutoffs),
        warnings,
    })
}

pub fn parse_cutoffs(s: &str) -> Result<Vec<usize>, String> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let k: usize = part.parse().map_err(|_| format!("invalid cutoff `{part}`"))?;
        if k == 0 {
            return Err("cutoffs must be positive".into());
        }
        if !out.contains(&k) {
            out.push(k);
        }
    }
    Ok(out)
}
