//! Greedy MAP inference for `f(Y) = log det(L_Y)`.
//!
//! [`greedy_map`] maintains an incremental Cholesky factorization of the
//! selected submatrix: for every unselected candidate `i` it keeps the row
//! `c_i` and the residual `d2_i = L_ii - |c_i|^2`, which equals
//! `det(L_{Y ∪ {i}}) / det(L_Y)`. The marginal gain of `i` is `log d2_i`.
//!
//! [`naive_greedy_oracle`] and [`exhaustive_map_oracle`] evaluate the same
//! objective by full determinant computation and exist for verification.

use std::fmt;

use crate::error::{Error, Result};
use crate::kernel::LEnsemble;
use crate::linalg::{cholesky_log_det, lu_determinant, SquareMatrix};
use crate::scalar::Scalar;

pub const DEFAULT_GAIN_EPSILON: f64 = 1e-12;
/// Residuals below `-PSD_TOLERANCE` reject the kernel.
pub const PSD_TOLERANCE: f64 = 1e-6;
pub const NAIVE_ORACLE_MAX_N: usize = 64;
pub const EXHAUSTIVE_ORACLE_MAX_N: usize = 15;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    ReachedK,
    /// Every remaining candidate had residual volume below the gain epsilon;
    /// the rest of the ranking was filled by descending `L_ii`.
    GainExhausted,
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StopReason::ReachedK => "reached_k",
            StopReason::GainExhausted => "gain_exhausted",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection<T> {
    pub index: usize,
    pub pid: String,
    /// Log-det marginal gain for greedy picks (`-inf` for fill-in slots after
    /// exhaustion); the quality score for QRR rankings.
    pub gain: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ranking<T> {
    pub qid: String,
    pub selected: Vec<Selection<T>>,
    pub stop_reason: StopReason,
}

impl<T: Scalar> Ranking<T> {
    pub fn with_qid(mut self, qid: impl Into<String>) -> Self {
        self.qid = qid.into();
        self
    }

    pub fn indices(&self) -> Vec<usize> {
        self.selected.iter().map(|s| s.index).collect()
    }

    pub fn gains(&self) -> Vec<T> {
        self.selected.iter().map(|s| s.gain).collect()
    }

    pub fn len(&self) -> usize {
        self.selected.len()
    }

    pub fn is_empty(&self) -> bool {
        self.selected.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreedyOptions<T> {
    pub gain_epsilon: T,
}

impl<T: Scalar> Default for GreedyOptions<T> {
    fn default() -> Self {
        Self {
            gain_epsilon: T::lit(DEFAULT_GAIN_EPSILON),
        }
    }
}

/// Incremental Cholesky state of one greedy run.
#[derive(Debug, Clone)]
pub struct GreedyState<'a, T> {
    kernel: &'a LEnsemble<T>,
    rows: Vec<Vec<T>>,
    residuals: Vec<T>,
    selected: Vec<usize>,
    is_selected: Vec<bool>,
}

impl<'a, T: Scalar> GreedyState<'a, T> {
    pub fn new(kernel: &'a LEnsemble<T>) -> Result<Self> {
        let n = kernel.n();
        let residuals = kernel.diagonal();
        if let Some((index, &d)) = residuals
            .iter()
            .enumerate()
            .find(|(_, &d)| d < -T::lit(PSD_TOLERANCE) || !d.is_finite())
        {
            return Err(Error::NotPsd {
                index,
                step: 0,
                residual: d.to_f64_lossy(),
            });
        }
        Ok(Self {
            kernel,
            rows: vec![Vec::new(); n],
            residuals,
            selected: Vec::new(),
            is_selected: vec![false; n],
        })
    }

    pub fn selected(&self) -> &[usize] {
        &self.selected
    }

    pub fn is_selected(&self, i: usize) -> bool {
        self.is_selected[i]
    }

    /// `d2_i`: for an unselected `i`, `det(L_{Y ∪ {i}}) / det(L_Y)`.
    pub fn residual(&self, i: usize) -> T {
        self.residuals[i]
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.rows[i]
    }

    /// Unselected candidate with the largest residual, lowest index on ties.
    pub fn best(&self) -> Option<(usize, T)> {
        let mut best: Option<(usize, T)> = None;
        for (i, &d) in self.residuals.iter().enumerate() {
            if self.is_selected[i] {
                continue;
            }
            match best {
                Some((_, b)) if !(d > b) => {}
                _ => best = Some((i, d)),
            }
        }
        best
    }

    /// Adds `j` to the selection and updates every unselected candidate's
    /// Cholesky row and residual in `O(|Y|)` each.
    pub fn select(&mut self, j: usize) -> Result<()> {
        let dj = self.residuals[j];
        if !(dj > T::zero()) {
            return Err(Error::NotPsd {
                index: j,
                step: self.selected.len(),
                residual: dj.to_f64_lossy(),
            });
        }
        let sqrt_dj = dj.sqrt();
        let row_j = std::mem::take(&mut self.rows[j]);
        let step = self.selected.len() + 1;
        for i in 0..self.kernel.n() {
            if i == j || self.is_selected[i] {
                continue;
            }
            let dot: T = row_j
                .iter()
                .zip(&self.rows[i])
                .map(|(&a, &b)| a * b)
                .sum();
            let e = (self.kernel.get(j, i) - dot) / sqrt_dj;
            self.rows[i].push(e);
            self.residuals[i] -= e * e;
            if self.residuals[i] < -T::lit(PSD_TOLERANCE) {
                return Err(Error::NotPsd {
                    index: i,
                    step,
                    residual: self.residuals[i].to_f64_lossy(),
                });
            }
        }
        self.rows[j] = row_j;
        self.rows[j].push(sqrt_dj);
        self.selected.push(j);
        self.is_selected[j] = true;
        Ok(())
    }
}

fn check_inputs<T: Scalar>(kernel: &LEnsemble<T>, pids: &[String], k: usize) -> Result<()> {
    if pids.len() != kernel.n() {
        return Err(Error::SizeMismatch {
            what: "pid list",
            expected: kernel.n(),
            found: pids.len(),
        });
    }
    if k < 1 || k > kernel.n() {
        return Err(Error::InvalidK { k, n: kernel.n() });
    }
    Ok(())
}

/// Unselected indices in descending `L_ii`, lowest index on ties.
fn fill_order<T: Scalar>(kernel: &LEnsemble<T>, is_selected: &[bool]) -> Vec<usize> {
    let diag = kernel.diagonal();
    let mut rest: Vec<usize> = (0..kernel.n()).filter(|&i| !is_selected[i]).collect();
    rest.sort_by(|&a, &b| {
        diag[b]
            .partial_cmp(&diag[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    rest
}

fn finish<T: Scalar>(
    kernel: &LEnsemble<T>,
    pids: &[String],
    k: usize,
    mut picks: Vec<(usize, T)>,
    is_selected: &[bool],
) -> Ranking<T> {
    let stop_reason = if picks.len() < k {
        let missing = k - picks.len();
        picks.extend(
            fill_order(kernel, is_selected)
                .into_iter()
                .take(missing)
                .map(|i| (i, T::neg_infinity())),
        );
        StopReason::GainExhausted
    } else {
        StopReason::ReachedK
    };
    Ranking {
        qid: String::new(),
        selected: picks
            .into_iter()
            .map(|(index, gain)| Selection {
                index,
                pid: pids[index].clone(),
                gain,
            })
            .collect(),
        stop_reason,
    }
}

/// Greedy log-det maximization with default options.
pub fn greedy_map<T: Scalar>(kernel: &LEnsemble<T>, pids: &[String], k: usize) -> Result<Ranking<T>> {
    greedy_map_with(kernel, pids, k, GreedyOptions::default())
}

pub fn greedy_map_with<T: Scalar>(
    kernel: &LEnsemble<T>,
    pids: &[String],
    k: usize,
    opts: GreedyOptions<T>,
) -> Result<Ranking<T>> {
    check_inputs(kernel, pids, k)?;
    let mut state = GreedyState::new(kernel)?;
    let mut picks = Vec::with_capacity(k);
    while picks.len() < k {
        let Some((j, d)) = state.best() else { break };
        if !(d >= opts.gain_epsilon) {
            break;
        }
        picks.push((j, d.ln()));
        if picks.len() < k {
            state.select(j)?;
        } else {
            state.is_selected[j] = true;
        }
    }
    let is_selected = state.is_selected.clone();
    Ok(finish(kernel, pids, k, picks, &is_selected))
}

fn det_of<T: Scalar>(m: &SquareMatrix<T>, idx: &[usize]) -> T {
    if idx.is_empty() {
        T::one()
    } else {
        lu_determinant(&m.principal(idx))
    }
}

/// Same objective, tie-breaking and stopping rule as [`greedy_map`], but every
/// candidate's gain is recomputed from two full determinants at every step.
pub fn naive_greedy_oracle<T: Scalar>(
    kernel: &LEnsemble<T>,
    pids: &[String],
    k: usize,
) -> Result<Ranking<T>> {
    if kernel.n() > NAIVE_ORACLE_MAX_N {
        return Err(Error::OracleTooLarge {
            n: kernel.n(),
            max: NAIVE_ORACLE_MAX_N,
        });
    }
    check_inputs(kernel, pids, k)?;
    let m = kernel.matrix();
    let n = kernel.n();
    let eps = T::lit(DEFAULT_GAIN_EPSILON);
    let mut chosen: Vec<usize> = Vec::with_capacity(k);
    let mut is_selected = vec![false; n];
    let mut picks = Vec::with_capacity(k);
    while picks.len() < k {
        let base = det_of(m, &chosen);
        let mut best: Option<(usize, T)> = None;
        let mut trial = chosen.clone();
        trial.push(0);
        for i in (0..n).filter(|&i| !is_selected[i]) {
            *trial.last_mut().unwrap() = i;
            let ratio = det_of(m, &trial) / base;
            if ratio < -T::lit(PSD_TOLERANCE) || ratio.is_nan() {
                return Err(Error::NotPsd {
                    index: i,
                    step: chosen.len(),
                    residual: ratio.to_f64_lossy(),
                });
            }
            match best {
                Some((_, b)) if !(ratio > b) => {}
                _ => best = Some((i, ratio)),
            }
        }
        let Some((j, ratio)) = best else { break };
        if !(ratio >= eps) {
            break;
        }
        picks.push((j, ratio.ln()));
        chosen.push(j);
        is_selected[j] = true;
    }
    Ok(finish(kernel, pids, k, picks, &is_selected))
}

/// Global maximizer of `det(L_Y)` over all `|Y| = k`, by enumeration.
/// Returns the lexicographically first optimal subset and its log-determinant
/// (`-inf` if every subset is singular).
pub fn exhaustive_map_oracle<T: Scalar>(kernel: &LEnsemble<T>, k: usize) -> Result<(Vec<usize>, T)> {
    let n = kernel.n();
    if n > EXHAUSTIVE_ORACLE_MAX_N {
        return Err(Error::OracleTooLarge {
            n,
            max: EXHAUSTIVE_ORACLE_MAX_N,
        });
    }
    if k < 1 || k > n {
        return Err(Error::InvalidK { k, n });
    }
    let m = kernel.matrix();
    let mut best: Option<(Vec<usize>, T)> = None;
    // combinations in lexicographic order
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        let det = det_of(m, &idx);
        match &best {
            Some((_, b)) if !(det > *b) => {}
            _ => best = Some((idx.clone(), det)),
        }
        let mut pos = k;
        while pos > 0 && idx[pos - 1] == n - k + pos - 1 {
            pos -= 1;
        }
        if pos == 0 {
            break;
        }
        idx[pos - 1] += 1;
        for p in pos..k {
            idx[p] = idx[p - 1] + 1;
        }
    }
    let (subset, det) = best.expect("at least one subset");
    let log_det = if det > T::zero() { det.ln() } else { T::neg_infinity() };
    Ok((subset, log_det))
}

/// `log det(L_Y) - log det(L + I)` with `det(L_∅) = 1`. A numerically
/// singular `L_Y` yields `-inf`.
pub fn subset_log_prob<T: Scalar>(kernel: &LEnsemble<T>, subset: &[usize]) -> Result<T> {
    let n = kernel.n();
    let mut seen = vec![false; n];
    for &i in subset {
        if i >= n || seen[i] {
            return Err(Error::InvalidSubset { index: i, n });
        }
        seen[i] = true;
    }
    let m = kernel.matrix();
    let mut shifted = m.clone();
    for i in 0..n {
        shifted.set(i, i, m.get(i, i) + T::one());
    }
    let normalizer = cholesky_log_det(&shifted).ok_or(Error::NotPsd {
        index: 0,
        step: 0,
        residual: f64::NAN,
    })?;
    match cholesky_log_det(&m.principal(subset)) {
        Some(ld) => Ok(ld - normalizer),
        None => Ok(T::neg_infinity()),
    }
}
