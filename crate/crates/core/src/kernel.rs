//! Kernel construction for one query's candidate set.
//!
//! The L-ensemble is `L = diag(q) · S · diag(q) + ridge · I`, where `S` holds
//! passage-passage cosine similarities mapped into `[0, 1]` and `q` holds the
//! per-query normalized relevance of each passage.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::SquareMatrix;
use crate::scalar::Scalar;

pub const DEFAULT_QUALITY_FLOOR: f64 = 1e-3;
pub const DEFAULT_RIDGE: f64 = 1e-10;
/// Default ridge when similarities are clamped; clamped cosine matrices are
/// not guaranteed PSD.
pub const DEFAULT_CLAMP_RIDGE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate<T> {
    pub pid: String,
    pub text: Option<String>,
    pub embedding: Vec<T>,
    pub raw_score: T,
}

impl<T: Scalar> Candidate<T> {
    pub fn new(pid: impl Into<String>, embedding: Vec<T>, raw_score: T) -> Self {
        Self {
            pid: pid.into(),
            text: None,
            embedding,
            raw_score,
        }
    }

    pub fn with_text(mut self, text: impl Into<String>) -> Self {
        self.text = Some(text.into());
        self
    }

    fn norm(&self) -> T {
        self.embedding.iter().map(|&x| x * x).sum::<T>().sqrt()
    }
}

/// A query and its retrieved passages: the ground set for re-ranking.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet<T> {
    qid: String,
    query: String,
    candidates: Vec<Candidate<T>>,
    dim: usize,
}

impl<T: Scalar> CandidateSet<T> {
    /// Validates that the set is non-empty, pids are unique, embeddings share
    /// one dimension, contain finite values and are non-zero, and scores are
    /// finite.
    pub fn new(
        qid: impl Into<String>,
        query: impl Into<String>,
        candidates: Vec<Candidate<T>>,
    ) -> Result<Self> {
        let first = candidates.first().ok_or(Error::EmptyCandidateSet)?;
        let dim = first.embedding.len();
        let mut seen = HashSet::with_capacity(candidates.len());
        for c in &candidates {
            if !seen.insert(c.pid.as_str()) {
                return Err(Error::DuplicatePid { pid: c.pid.clone() });
            }
            if c.embedding.len() != dim {
                return Err(Error::DimensionMismatch {
                    pid: c.pid.clone(),
                    expected: dim,
                    found: c.embedding.len(),
                });
            }
            if c.embedding.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFiniteEmbedding { pid: c.pid.clone() });
            }
            if !(c.norm() > T::zero()) {
                return Err(Error::ZeroNormEmbedding { pid: c.pid.clone() });
            }
            if !c.raw_score.is_finite() {
                return Err(Error::NonFiniteScore { pid: c.pid.clone() });
            }
        }
        Ok(Self {
            qid: qid.into(),
            query: query.into(),
            candidates,
            dim,
        })
    }

    pub fn qid(&self) -> &str {
        &self.qid
    }

    pub fn query(&self) -> &str {
        &self.query
    }

    pub fn candidates(&self) -> &[Candidate<T>] {
        &self.candidates
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn pids(&self) -> Vec<String> {
        self.candidates.iter().map(|c| c.pid.clone()).collect()
    }
}

/// How raw cosine values in `[-1, 1]` are mapped into `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SimTransform {
    /// `(1 + cos) / 2`, keeps `S` positive semi-definite.
    #[default]
    Affine,
    /// `max(0, cos)`.
    Clamp,
}

impl SimTransform {
    pub fn default_ridge(self) -> f64 {
        match self {
            SimTransform::Affine => DEFAULT_RIDGE,
            SimTransform::Clamp => DEFAULT_CLAMP_RIDGE,
        }
    }

    fn apply<T: Scalar>(self, cos: T) -> T {
        match self {
            SimTransform::Affine => (T::one() + cos) / T::lit(2.0),
            SimTransform::Clamp => cos.max(T::zero()),
        }
    }
}

impl fmt::Display for SimTransform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SimTransform::Affine => "affine",
            SimTransform::Clamp => "clamp",
        })
    }
}

impl FromStr for SimTransform {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "affine" => Ok(SimTransform::Affine),
            "clamp" => Ok(SimTransform::Clamp),
            other => Err(format!("unknown similarity transform `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix<T> {
    values: SquareMatrix<T>,
}

impl<T: Scalar> SimilarityMatrix<T> {
    pub fn n(&self) -> usize {
        self.values.n()
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.values.get(i, j)
    }

    pub fn matrix(&self) -> &SquareMatrix<T> {
        &self.values
    }

    /// Wraps an externally supplied similarity matrix. It must be symmetric
    /// with unit diagonal and entries in `[0, 1]`.
    pub fn from_matrix(values: SquareMatrix<T>) -> Result<Self> {
        if let Some((row, col)) = values.asymmetry() {
            return Err(Error::NotSymmetric { row, col });
        }
        for i in 0..values.n() {
            for j in 0..values.n() {
                let v = values.get(i, j);
                let ok = if i == j {
                    v == T::one()
                } else {
                    v >= T::zero() && v <= T::one()
                };
                if !ok {
                    return Err(Error::NotSymmetric { row: i, col: j });
                }
            }
        }
        Ok(Self { values })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            values: SquareMatrix::identity(n),
        }
    }
}

/// Cosine similarity of every passage pair, mapped into `[0, 1]` by
/// `transform`. The diagonal is exactly 1 and the matrix exactly symmetric.
pub fn similarity_matrix<T: Scalar>(
    set: &CandidateSet<T>,
    transform: SimTransform,
) -> Result<SimilarityMatrix<T>> {
    let cands = set.candidates();
    let n = cands.len();
    let mut unit: Vec<Vec<T>> = Vec::with_capacity(n);
    for c in cands {
        if c.embedding.len() != set.dim() {
            return Err(Error::DimensionMismatch {
                pid: c.pid.clone(),
                expected: set.dim(),
                found: c.embedding.len(),
            });
        }
        let norm = c.norm();
        if !(norm > T::zero()) || !norm.is_finite() {
            return Err(Error::ZeroNormEmbedding { pid: c.pid.clone() });
        }
        unit.push(c.embedding.iter().map(|&x| x / norm).collect());
    }

    let mut values = SquareMatrix::identity(n);
    for i in 0..n {
        for j in (i + 1)..n {
            let cos: T = unit[i]
                .iter()
                .zip(&unit[j])
                .map(|(&a, &b)| a * b)
                .sum::<T>()
                .max(-T::one())
                .min(T::one());
            let s = transform.apply(cos);
            values.set(i, j, s);
            values.set(j, i, s);
        }
    }
    Ok(SimilarityMatrix { values })
}

#[derive(Debug, Clone, PartialEq)]
pub struct QualityVector<T> {
    values: Vec<T>,
}

impl<T: Scalar> QualityVector<T> {
    /// Wraps precomputed quality scores; each must be finite and positive.
    pub fn from_values(values: Vec<T>) -> Result<Self> {
        if let Some(i) = values.iter().position(|&v| !(v > T::zero()) || !v.is_finite()) {
            return Err(Error::NonFiniteScore {
                pid: format!("#{i}"),
            });
        }
        Ok(Self { values })
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn scaled(&self, c: T) -> Self {
        Self {
            values: self.values.iter().map(|&v| v * c).collect(),
        }
    }
}

/// Per-query min-max normalization of raw relevance scores, floored at
/// `floor`. All-equal scores (including a single passage) map to 1.
pub fn normalize_quality<T: Scalar>(set: &CandidateSet<T>, floor: T) -> Result<QualityVector<T>> {
    if !(floor > T::zero() && floor < T::one()) {
        return Err(Error::InvalidFloor(floor.to_f64_lossy()));
    }
    if let Some(c) = set.candidates().iter().find(|c| !c.raw_score.is_finite()) {
        return Err(Error::NonFiniteScore { pid: c.pid.clone() });
    }
    let scores = set.candidates().iter().map(|c| c.raw_score);
    let (min, max) = scores.fold((T::infinity(), T::neg_infinity()), |(lo, hi), s| {
        (lo.min(s), hi.max(s))
    });
    let range = max - min;
    let values = if !(range > T::zero()) {
        vec![T::one(); set.len()]
    } else {
        set.candidates()
            .iter()
            .map(|c| ((c.raw_score - min) / range).max(floor).min(T::one()))
            .collect()
    };
    Ok(QualityVector { values })
}

/// The DPP kernel `L`.
#[derive(Debug, Clone, PartialEq)]
pub struct LEnsemble<T> {
    values: SquareMatrix<T>,
    ridge: T,
}

impl<T: Scalar> LEnsemble<T> {
    /// Wraps an arbitrary symmetric matrix as a kernel (ridge 0). Positive
    /// semi-definiteness is not checked here; inference reports violations.
    pub fn from_matrix(values: SquareMatrix<T>) -> Result<Self> {
        if let Some((row, col)) = values.asymmetry() {
            return Err(Error::NotSymmetric { row, col });
        }
        Ok(Self {
            values,
            ridge: T::zero(),
        })
    }

    pub fn n(&self) -> usize {
        self.values.n()
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.values.get(i, j)
    }

    pub fn ridge(&self) -> T {
        self.ridge
    }

    pub fn matrix(&self) -> &SquareMatrix<T> {
        &self.values
    }

    pub fn diagonal(&self) -> Vec<T> {
        self.values.diagonal()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.values.min_eigenvalue()
    }
}

/// `L_ij = q_i · S_ij · q_j`, plus `ridge` on the diagonal.
pub fn build_l_ensemble<T: Scalar>(
    sim: &SimilarityMatrix<T>,
    quality: &QualityVector<T>,
    ridge: T,
) -> Result<LEnsemble<T>> {
    if sim.n() != quality.n() {
        return Err(Error::SizeMismatch {
            what: "quality vector",
            expected: sim.n(),
            found: quality.n(),
        });
    }
    if !(ridge >= T::zero()) || !ridge.is_finite() {
        return Err(Error::InvalidRidge(ridge.to_f64_lossy()));
    }
    let q = quality.values();
    let n = sim.n();
    let mut values = SquareMatrix::zeros(n);
    for i in 0..n {
        values.set(i, i, q[i] * sim.get(i, i) * q[i] + ridge);
        for j in (i + 1)..n {
            let v = q[i] * sim.get(i, j) * q[j];
            values.set(i, j, v);
            values.set(j, i, v);
        }
    }
    Ok(LEnsemble { values, ridge })
}

/// Similarity, quality and kernel for one candidate set in one call.
pub fn kernel_for<T: Scalar>(
    set: &CandidateSet<T>,
    transform: SimTransform,
    floor: T,
    ridge: T,
) -> Result<LEnsemble<T>> {
    let s = similarity_matrix(set, transform)?;
    let q = normalize_quality(set, floor)?;
    build_l_ensemble(&s, &q, ridge)
}
