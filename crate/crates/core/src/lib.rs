//! Determinantal point process re-ranking of retrieved passages.
//!
//! A candidate set (one query, `N` passages with embeddings and relevance
//! scores) is turned into an L-ensemble kernel `L = diag(q) S diag(q)`, and
//! `k` passages are chosen by greedily maximizing `log det(L_Y)`. The
//! [`evaluation`] module scores selections with MRECALL@k and Recall@k.
//!
//! All numerical types are generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the scalar for the common cases.
//!
//! ```
//! use dpp_rerank::*;
//!
//! let set = CandidateSet64::new("q1", "who walked on the moon", vec![
//!     Candidate::new("a", vec![1.0, 0.0], 3.0),
//!     Candidate::new("b", vec![0.99, 0.1], 2.9),
//!     Candidate::new("c", vec![0.0, 1.0], 2.8),
//!     Candidate::new("d", vec![-1.0, -1.0], 0.0),
//! ])?;
//! let l = kernel_for(&set, SimTransform::Affine, 1e-3, 1e-10)?;
//! let ranking = greedy_map(&l, &set.pids(), 2)?;
//! assert_eq!(ranking.indices(), vec![0, 2]);
//! # Ok::<(), dpp_rerank::Error>(())
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0)` also rejects NaN

pub mod error;
pub mod evaluation;
pub mod kernel;
pub mod linalg;
pub mod map_inference;
pub mod scalar;

pub use error::{Error, Result};
pub use evaluation::{
    aggregate, answer_covered, mrecall_at_k, normalize_text, qrr_rank, recall_at_k, EvalReport, GoldEntry,
    MatchMode, QuestionEval,
};
pub use kernel::{
    build_l_ensemble, kernel_for, normalize_quality, similarity_matrix, Candidate, CandidateSet, LEnsemble,
    QualityVector, SimTransform, SimilarityMatrix,
};
pub use linalg::SquareMatrix;
pub use map_inference::{
    exhaustive_map_oracle, greedy_map, greedy_map_with, naive_greedy_oracle, subset_log_prob, GreedyOptions,
    GreedyState, Ranking, Selection, StopReason,
};
pub use scalar::Scalar;

pub type Candidate64 = Candidate<f64>;
pub type CandidateSet64 = CandidateSet<f64>;
pub type SimilarityMatrix64 = SimilarityMatrix<f64>;
pub type QualityVector64 = QualityVector<f64>;
pub type LEnsemble64 = LEnsemble<f64>;
pub type Ranking64 = Ranking<f64>;
pub type Matrix64 = SquareMatrix<f64>;

pub type Candidate32 = Candidate<f32>;
pub type CandidateSet32 = CandidateSet<f32>;
pub type SimilarityMatrix32 = SimilarityMatrix<f32>;
pub type QualityVector32 = QualityVector<f32>;
pub type LEnsemble32 = LEnsemble<f32>;
pub type Ranking32 = Ranking<f32>;
pub type Matrix32 = SquareMatrix<f32>;
