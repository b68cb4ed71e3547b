//! Seeded property harness: random kernels and candidate sets, and the
//! checks run by `selfcheck`.

use dpp_rerank::{
    greedy_map, kernel_for, naive_greedy_oracle, qrr_rank, subset_log_prob, Candidate, CandidateSet64, LEnsemble64,
    Matrix64, Ranking64, SimTransform,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub const GAIN_TOLERANCE: f64 = 1e-8;
pub const PROBABILITY_TOLERANCE: f64 = 1e-9;
pub const MONOTONICITY_TOLERANCE: f64 = 1e-9;
pub const PSD_TOLERANCE: f64 = 1e-8;

pub type GreedyFn = dyn Fn(&LEnsemble64, &[String], usize) -> dpp_rerank::Result<Ranking64> + Sync;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn pids(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("p{i}")).collect()
}

/// `B Bᵀ / r` with `B` an `n × r` standard normal matrix, symmetric by
/// construction.
pub fn random_psd_kernel(rng: &mut impl Rng, n: usize, rank: usize) -> LEnsemble64 {
    let b: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..rank).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
        .collect();
    let mut m = Matrix64::zeros(n);
    for i in 0..n {
        for j in i..n {
            let v = b[i].iter().zip(&b[j]).map(|(x, y)| x * y).sum::<f64>() / rank as f64;
            m.set(i, j, v);
            m.set(j, i, v);
        }
    }
    LEnsemble64::from_matrix(m).expect("symmetric")
}

/// Random full-rank kernel rescaled to unit diagonal, so every first-step
/// gain ties at `log 1 = 0`.
pub fn random_unit_diagonal_kernel(rng: &mut impl Rng, n: usize) -> LEnsemble64 {
    let l = random_psd_kernel(rng, n, n + 2);
    let d = l.diagonal();
    let m = Matrix64::from_fn(n, |i, j| {
        if i == j {
            1.0
        } else {
            l.get(i, j) / (d[i].sqrt() * d[j].sqrt())
        }
    });
    let m = Matrix64::from_fn(n, |i, j| if i <= j { m.get(i, j) } else { m.get(j, i) });
    LEnsemble64::from_matrix(m).expect("symmetric")
}

/// Kernel for the `trial`-th oracle instance: mostly full-rank random
/// kernels, every fourth one with unit diagonal (exact first-step ties).
pub fn oracle_instance(rng: &mut impl Rng, trial: usize, max_n: usize) -> LEnsemble64 {
    let n = rng.random_range(1..=max_n);
    if trial % 4 == 3 {
        random_unit_diagonal_kernel(rng, n)
    } else {
        let rank = n + 2 + rng.random_range(0..=3);
        random_psd_kernel(rng, n, rank)
    }
}

/// Candidate set with Gaussian embeddings and scores (with text).
pub fn random_candidate_set(rng: &mut impl Rng, qid: &str, n: usize, dim: usize) -> CandidateSet64 {
    let cands = (0..n)
        .map(|i| {
            let emb: Vec<f64> = loop {
                let e: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
                if e.iter().any(|&x| x != 0.0) {
                    break e;
                }
            };
            let score: f64 = rng.sample::<f64, _>(StandardNormal) * 3.0;
            Candidate::new(format!("p{i}"), emb, score).with_text(format!("passage {i}"))
        })
        .collect();
    CandidateSet64::new(qid, "random query", cands).expect("valid random set")
}

/// One-hot embeddings (so `S = I` under the clamp transform) with distinct
/// random scores.
pub fn orthogonal_candidate_set(rng: &mut impl Rng, qid: &str, n: usize) -> CandidateSet64 {
    let mut scores: Vec<f64> = Vec::with_capacity(n);
    while scores.len() < n {
        let s: f64 = rng.random_range(-5.0..5.0);
        if scores.iter().all(|&t| (t - s).abs() > 1e-6) {
            scores.push(s);
        }
    }
    let cands = scores
        .into_iter()
        .enumerate()
        .map(|(i, s)| {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            Candidate::new(format!("p{i}"), e, s).with_text(format!("passage {i}"))
        })
        .collect();
    CandidateSet64::new(qid, "orthogonal query", cands).expect("valid set")
}

/// Compares two rankings index by index, with gains within `tol`
/// (infinite gains must match exactly).
pub fn compare_rankings(a: &Ranking64, b: &Ranking64, tol: f64) -> Result<(), String> {
    if a.indices() != b.indices() {
        return Err(format!("selections differ: {:?} vs {:?}", a.indices(), b.indices()));
    }
    if a.stop_reason != b.stop_reason {
        return Err(format!("stop reasons differ: {} vs {}", a.stop_reason, b.stop_reason));
    }
    for (step, (x, y)) in a.gains().iter().zip(b.gains()).enumerate() {
        let same = if x.is_finite() || y.is_finite() {
            (x - y).abs() <= tol
        } else {
            x == &y
        };
        if !same {
            return Err(format!("gain at step {step} differs: {x} vs {y}"));
        }
    }
    Ok(())
}

pub fn check_monotone(r: &Ranking64, tol: f64) -> Result<(), String> {
    let g = r.gains();
    for w in 1..g.len() {
        if g[w] > g[w - 1] + tol {
            return Err(format!("gain rose from {} to {} at step {w}", g[w - 1], g[w]));
        }
    }
    Ok(())
}

/// Greedy against the naive oracle at every `k`.
/// The oracle is prefix-consistent, so its `k = N` run supplies every prefix.
pub fn check_oracle_equivalence(kernel: &LEnsemble64, greedy: &GreedyFn) -> Result<(), String> {
    let n = kernel.n();
    let ids = pids(n);
    let full = naive_greedy_oracle(kernel, &ids, n).map_err(|e| e.to_string())?;
    for k in 1..=n {
        let g = greedy(kernel, &ids, k).map_err(|e| e.to_string())?;
        let mut expected = full.clone();
        expected.selected.truncate(k);
        if k < n && expected.stop_reason == dpp_rerank::StopReason::GainExhausted {
            // exhaustion may first occur past position k
            let exhausted_at = full.gains().iter().position(|g| g.is_infinite()).unwrap_or(n);
            if exhausted_at >= k {
                expected.stop_reason = dpp_rerank::StopReason::ReachedK;
            }
        }
        compare_rankings(&g, &expected, GAIN_TOLERANCE).map_err(|e| format!("N = {n}, k = {k}: {e}"))?;
    }
    Ok(())
}

pub fn check_monotonicity(kernel: &LEnsemble64, greedy: &GreedyFn) -> Result<(), String> {
    let n = kernel.n();
    let r = greedy(kernel, &pids(n), n).map_err(|e| e.to_string())?;
    check_monotone(&r, MONOTONICITY_TOLERANCE)
}

/// `Σ_Y exp(log P(Y))` over all `2^N` subsets.
pub fn total_probability(kernel: &LEnsemble64) -> Result<f64, String> {
    let n = kernel.n();
    let mut total = 0.0;
    for mask in 0u32..(1u32 << n) {
        let subset: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        total += subset_log_prob(kernel, &subset).map_err(|e| e.to_string())?.exp();
    }
    Ok(total)
}

pub fn check_normalization(kernel: &LEnsemble64) -> Result<(), String> {
    let total = total_probability(kernel)?;
    if (total - 1.0).abs() > PROBABILITY_TOLERANCE {
        return Err(format!("N = {}: probabilities sum to {total:.15}", kernel.n()));
    }
    Ok(())
}

pub fn check_psd_construction(set: &CandidateSet64) -> Result<(), String> {
    let s = dpp_rerank::similarity_matrix(set, SimTransform::Affine).map_err(|e| e.to_string())?;
    let q = dpp_rerank::normalize_quality(set, 1e-3).map_err(|e| e.to_string())?;
    let s_min = s.matrix().min_eigenvalue();
    if s_min < -PSD_TOLERANCE {
        return Err(format!("S has eigenvalue {s_min:e}"));
    }
    for ridge in [0.0, 1e-10] {
        let l = dpp_rerank::build_l_ensemble(&s, &q, ridge).map_err(|e| e.to_string())?;
        let l_min = l.min_eigenvalue();
        if l_min < -PSD_TOLERANCE {
            return Err(format!("L (ridge {ridge:e}) has eigenvalue {l_min:e}"));
        }
    }
    Ok(())
}

pub fn check_quality_scaling(set: &CandidateSet64, greedy: &GreedyFn) -> Result<(), String> {
    let s = dpp_rerank::similarity_matrix(set, SimTransform::Affine).map_err(|e| e.to_string())?;
    let q = dpp_rerank::normalize_quality(set, 1e-3).map_err(|e| e.to_string())?;
    let n = set.len();
    let ids = set.pids();
    let base = greedy(&dpp_rerank::build_l_ensemble(&s, &q, 0.0).map_err(|e| e.to_string())?, &ids, n)
        .map_err(|e| e.to_string())?;
    for c in [0.1, 10.0] {
        let l = dpp_rerank::build_l_ensemble(&s, &q.scaled(c), 0.0).map_err(|e| e.to_string())?;
        let r = greedy(&l, &ids, n).map_err(|e| e.to_string())?;
        if r.indices() != base.indices() {
            return Err(format!("c = {c}: {:?} vs {:?}", r.indices(), base.indices()));
        }
    }
    Ok(())
}

pub fn check_qrr_reduction(set: &CandidateSet64, greedy: &GreedyFn) -> Result<(), String> {
    let n = set.len();
    let k = n.div_ceil(2).max(1);
    let l = kernel_for(set, SimTransform::Clamp, 1e-3, SimTransform::Clamp.default_ridge()).map_err(|e| e.to_string())?;
    let dpp = greedy(&l, &set.pids(), k).map_err(|e| e.to_string())?;
    let qrr = qrr_rank(set, k, 1e-3).map_err(|e| e.to_string())?;
    if dpp.indices() != qrr.indices() {
        return Err(format!("dpp {:?} vs qrr {:?}", dpp.indices(), qrr.indices()));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyResult {
    pub name: &'static str,
    pub trials: usize,
    pub failures: usize,
    pub first_failure: Option<String>,
}

impl PropertyResult {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelfCheckReport {
    pub seed: u64,
    pub trials: usize,
    pub properties: Vec<PropertyResult>,
    pub warnings: Vec<String>,
}

impl SelfCheckReport {
    pub fn passed(&self) -> bool {
        self.properties.iter().all(PropertyResult::passed)
    }

    pub fn failed_properties(&self) -> Vec<&'static str> {
        self.properties.iter().filter(|p| !p.passed()).map(|p| p.name).collect()
    }

    pub fn summary(&self) -> String {
        let mut out = String::new();
        for p in &self.properties {
            let status = if p.passed() { "PASS" } else { "FAIL" };
            out.push_str(&format!("{status} {:<28} {}/{} trials ok", p.name, p.trials - p.failures, p.trials));
            if let Some(f) = &p.first_failure {
                out.push_str(&format!("  first failure: {f}"));
            }
            out.push('\n');
        }
        out
    }
}

fn run_property(
    name: &'static str,
    trials: usize,
    seed: u64,
    mut check: impl FnMut(&mut ChaCha8Rng, usize) -> Result<(), String>,
) -> PropertyResult {
    let mut r = rng(seed);
    let mut failures = 0;
    let mut first_failure = None;
    for t in 0..trials {
        if let Err(msg) = check(&mut r, t) {
            failures += 1;
            first_failure.get_or_insert_with(|| format!("trial {t}: {msg}"));
        }
    }
    PropertyResult {
        name,
        trials,
        failures,
        first_failure,
    }
}

pub fn run_selfcheck(seed: u64, trials: usize) -> SelfCheckReport {
    run_selfcheck_with(seed, trials, &|l, p, k| greedy_map(l, p, k))
}

/// Runs the suite against an arbitrary greedy implementation.
pub fn run_selfcheck_with(seed: u64, trials: usize, greedy: &GreedyFn) -> SelfCheckReport {
    let mut warnings = Vec::new();
    if trials == 0 {
        warnings.push("0 trials requested; every property passes vacuously".to_string());
    }
    // per-property seeds keep properties independent of each other's draws
    let sub = |i: u64| seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(i);
    let properties = vec![
        run_property("oracle_equivalence", trials, sub(1), |r, t| {
            check_oracle_equivalence(&oracle_instance(r, t, 12), greedy)
        }),
        run_property("gain_monotonicity", trials, sub(2), |r, t| {
            check_monotonicity(&oracle_instance(r, t, 12), greedy)
        }),
        run_property("probability_normalization", trials, sub(3), |r, _| {
            let n = r.random_range(1..=10);
            let rank = n + r.random_range(0..=2);
            check_normalization(&random_psd_kernel(r, n, rank))
        }),
        run_property("psd_construction", trials, sub(4), |r, _| {
            let n = r.random_range(1..=30);
            let d = r.random_range(1..=16);
            check_psd_construction(&random_candidate_set(r, "q", n, d))
        }),
        run_property("quality_scaling_invariance", trials, sub(5), |r, _| {
            let n = r.random_range(1..=12);
            check_quality_scaling(&random_candidate_set(r, "q", n, 16), greedy)
        }),
        run_property("qrr_reduction", trials, sub(6), |r, _| {
            let n = r.random_range(1..=20);
            check_qrr_reduction(&orthogonal_candidate_set(r, "q", n), greedy)
        }),
    ];
    SelfCheckReport {
        seed,
        trials,
        properties,
        warnings,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use dpp_rerank::{greedy_map_with, GreedyOptions, GreedyState, Selection, StopReason};

    #[test]
    fn seed_zero_passes() {
        let report = run_selfcheck(0, 40);
        assert!(report.passed(), "{}", report.summary());
        assert!(report.warnings.is_empty());
    }

    #[test]
    fn zero_trials_is_vacuous_with_warning() {
        let report = run_selfcheck(0, 0);
        assert!(report.passed());
        assert_eq!(report.warnings.len(), 1);
    }

    /// Greedy that breaks ties toward the highest index.
    fn broken_tie_break(l: &LEnsemble64, pids: &[String], k: usize) -> dpp_rerank::Result<Ranking64> {
        let mut state = GreedyState::new(l)?;
        let mut selected = Vec::new();
        for _ in 0..k {
            let best = (0..l.n())
                .filter(|&i| !state.is_selected(i))
                .fold(None::<(usize, f64)>, |acc, i| match acc {
                    Some((_, b)) if state.residual(i) < b => acc,
                    _ => Some((i, state.residual(i))),
                });
            let (j, d) = best.expect("candidate");
            selected.push(Selection {
                index: j,
                pid: pids[j].clone(),
                gain: d.ln(),
            });
            state.select(j)?;
        }
        Ok(Ranking64 {
            qid: String::new(),
            selected,
            stop_reason: StopReason::ReachedK,
        })
    }

    #[test]
    fn broken_tie_break_is_caught() {
        let report = run_selfcheck_with(0, 20, &broken_tie_break);
        assert!(!report.passed());
        assert!(report.failed_properties().contains(&"oracle_equivalence"));
        assert!(report.summary().contains("FAIL oracle_equivalence"));
    }

    #[test]
    fn custom_epsilon_still_matches_default_on_full_rank() {
        let mut r = rng(7);
        let l = random_psd_kernel(&mut r, 8, 10);
        let a = greedy_map(&l, &pids(8), 8).unwrap();
        let b = greedy_map_with(&l, &pids(8), 8, GreedyOptions { gain_epsilon: 1e-14 }).unwrap();
        assert_eq!(a, b);
    }
}
