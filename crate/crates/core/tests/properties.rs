use dpp_rerank::evaluation::covered_count;
use dpp_rerank::*;
use proptest::prelude::*;

fn candidate_set(embs: Vec<Vec<f64>>, scores: Vec<f64>) -> Option<CandidateSet64> {
    let cands = embs
        .into_iter()
        .zip(scores)
        .enumerate()
        .map(|(i, (e, s))| Candidate::new(format!("p{i}"), e, s))
        .collect();
    CandidateSet64::new("q", "query", cands).ok()
}

prop_compose! {
    fn arb_set(max_n: usize, max_d: usize)(n in 1..=max_n, d in 1..=max_d)
        (embs in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, d), n),
         scores in prop::collection::vec(-10.0f64..10.0, n)) -> Option<CandidateSet64> {
        candidate_set(embs, scores)
    }
}

prop_compose! {
    /// `B Bᵀ` for a random `n × (n + 2)` matrix `B`.
    fn arb_kernel(max_n: usize)(n in 1..=max_n)
        (b in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, n + 2), n)) -> LEnsemble64 {
        let n = b.len();
        let m = Matrix64::from_fn(n, |i, j| {
            let (a, c) = if i <= j { (i, j) } else { (j, i) };
            b[a].iter().zip(&b[c]).map(|(x, y)| x * y).sum()
        });
        LEnsemble64::from_matrix(m).unwrap()
    }
}

fn ids(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("p{i}")).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn affine_kernel_is_psd(set in arb_set(30, 16), ridge in 0.0f64..1e-3) {
        let Some(set) = set else { return Ok(()) };
        let s = similarity_matrix(&set, SimTransform::Affine).unwrap();
        let q = normalize_quality(&set, 1e-3).unwrap();
        let l = build_l_ensemble(&s, &q, ridge).unwrap();
        prop_assert!(s.matrix().min_eigenvalue() >= -1e-8);
        prop_assert!(l.min_eigenvalue() >= -1e-8);
        prop_assert!(s.matrix().asymmetry().is_none());
        prop_assert!(l.matrix().asymmetry().is_none());
        for i in 0..set.len() {
            prop_assert_eq!(s.get(i, i), 1.0);
            let qi = q.values()[i];
            prop_assert!((l.get(i, i) - (qi * qi + ridge)).abs() <= 1e-12);
            for j in 0..set.len() {
                prop_assert!((0.0..=1.0).contains(&s.get(i, j)));
                let expect = qi * s.get(i, j) * q.values()[j] + if i == j { ridge } else { 0.0 };
                prop_assert!((l.get(i, j) - expect).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn quality_bounds(set in arb_set(20, 3), floor in 1e-4f64..0.5) {
        let Some(set) = set else { return Ok(()) };
        let q = normalize_quality(&set, floor).unwrap();
        prop_assert!(q.values().iter().all(|&v| v >= floor && v <= 1.0));
        let scores: Vec<f64> = set.candidates().iter().map(|c| c.raw_score).collect();
        if scores.iter().any(|&s| s != scores[0]) {
            prop_assert_eq!(q.values().iter().cloned().fold(0.0, f64::max), 1.0);
        }
    }

    #[test]
    fn similarity_is_permutation_equivariant(
        set in arb_set(12, 6),
        seed in any::<u64>(),
        transform in prop_oneof![Just(SimTransform::Affine), Just(SimTransform::Clamp)],
    ) {
        let Some(set) = set else { return Ok(()) };
        let n = set.len();
        let mut perm: Vec<usize> = (0..n).collect();
        // Fisher-Yates driven by a simple LCG
        let mut state = seed;
        for i in (1..n).rev() {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            perm.swap(i, (state >> 33) as usize % (i + 1));
        }
        let permuted = CandidateSet64::new(
            "q", "query",
            perm.iter().map(|&i| set.candidates()[i].clone()).collect(),
        ).unwrap();
        let s = similarity_matrix(&set, transform).unwrap();
        let sp = similarity_matrix(&permuted, transform).unwrap();
        for a in 0..n {
            for b in 0..n {
                prop_assert_eq!(sp.get(a, b), s.get(perm[a], perm[b]));
            }
        }
    }

    #[test]
    fn quality_affine_invariance(set in arb_set(12, 2), a in 0.01f64..100.0, b in -50.0f64..50.0) {
        let Some(set) = set else { return Ok(()) };
        let shifted = CandidateSet64::new(
            "q", "query",
            set.candidates().iter().map(|c| Candidate { raw_score: a * c.raw_score + b, ..c.clone() }).collect(),
        ).unwrap();
        let q0 = normalize_quality(&set, 1e-3).unwrap();
        let q1 = normalize_quality(&shifted, 1e-3).unwrap();
        for (x, y) in q0.values().iter().zip(q1.values()) {
            prop_assert!((x - y).abs() <= 1e-12, "{} vs {}", x, y);
        }
    }

    #[test]
    fn greedy_matches_naive_oracle(l in arb_kernel(12), k_frac in 0.0f64..1.0) {
        let n = l.n();
        let k = 1 + ((n - 1) as f64 * k_frac) as usize;
        let fast = greedy_map(&l, &ids(n), k).unwrap();
        let naive = naive_greedy_oracle(&l, &ids(n), k).unwrap();
        prop_assert_eq!(fast.indices(), naive.indices());
        for (x, y) in fast.gains().iter().zip(naive.gains()) {
            prop_assert!((x - y).abs() <= 1e-8);
        }
        for w in fast.gains().windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-9);
        }
    }

    #[test]
    fn greedy_never_beats_exhaustive_optimum(l in arb_kernel(9), k_frac in 0.0f64..1.0) {
        let n = l.n();
        let k = 1 + ((n - 1) as f64 * k_frac) as usize;
        let greedy = greedy_map(&l, &ids(n), k).unwrap();
        let greedy_log_det: f64 = greedy.gains().iter().sum();
        let (subset, best) = exhaustive_map_oracle(&l, k).unwrap();
        prop_assert_eq!(subset.len(), k);
        prop_assert!(greedy_log_det <= best + 1e-9);
        if k == 1 {
            prop_assert_eq!(greedy.indices(), subset);
        }
    }

    #[test]
    fn subset_probabilities_normalize(l in arb_kernel(8)) {
        let n = l.n();
        let total: f64 = (0u32..(1 << n))
            .map(|mask| {
                let s: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
                subset_log_prob(&l, &s).unwrap().exp()
            })
            .sum();
        prop_assert!((total - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn identity_similarity_reduces_to_qrr(scores in prop::collection::hash_set(-1000i32..1000, 1..15)) {
        let scores: Vec<f64> = scores.into_iter().map(|s| s as f64 / 10.0).collect();
        let n = scores.len();
        let embs = (0..n).map(|i| { let mut e = vec![0.0; n]; e[i] = 1.0; e }).collect();
        let set = candidate_set(embs, scores).unwrap();
        let q = normalize_quality(&set, 1e-3).unwrap();
        let l = build_l_ensemble(&SimilarityMatrix::identity(n), &q, 1e-10).unwrap();
        let dpp = greedy_map(&l, &set.pids(), n).unwrap();
        let qrr = qrr_rank(&set, n, 1e-3).unwrap();
        prop_assert_eq!(dpp.indices(), qrr.indices());
    }

    #[test]
    fn qrr_order_survives_positive_affine_maps(scores in prop::collection::vec(-100i32..100, 1..12), k_frac in 0.0f64..1.0) {
        let n = scores.len();
        let k = 1 + ((n - 1) as f64 * k_frac) as usize;
        let base: Vec<f64> = scores.iter().map(|&s| s as f64).collect();
        let shifted: Vec<f64> = base.iter().map(|s| 4.0 * s - 16.0).collect();
        let a = candidate_set(vec![vec![1.0]; n], base).unwrap();
        let b = candidate_set(vec![vec![1.0]; n], shifted).unwrap();
        prop_assert_eq!(qrr_rank(&a, k, 1e-3).unwrap().indices(), qrr_rank(&b, k, 1e-3).unwrap().indices());
    }

    #[test]
    fn coverage_is_monotone_and_metrics_nest(
        groups in prop::collection::vec(prop::collection::vec("[a-d]{1,3}", 1..3), 1..5),
        passages in prop::collection::vec("[a-d ]{0,12}", 0..8),
        k in 1usize..8,
    ) {
        let gold = match GoldEntry::new("q", groups) { Ok(g) => g, Err(_) => return Ok(()) };
        let refs: Vec<&str> = passages.iter().map(String::as_str).collect();
        let mut prev = 0;
        for m in 0..=refs.len() {
            let c = covered_count(&gold, &refs[..m], MatchMode::Substring);
            prop_assert!(c >= prev);
            prev = c;
        }
        let m = mrecall_at_k(&gold, &refs, k, MatchMode::Substring);
        let r = recall_at_k(&gold, &refs, k, MatchMode::Substring);
        prop_assert!(!m.success || r);
        if gold.n() == 1 {
            prop_assert_eq!(m.success, r);
        }
        let report = aggregate(&[QuestionEval::from_texts(&gold, &refs, &[k], MatchMode::Substring)], &[k]);
        let c = report.cutoff(k).unwrap();
        prop_assert!(0.0 <= c.mrecall && c.mrecall <= c.recall && c.recall <= 1.0);
    }
}

#[test]
fn quality_scaling_shifts_gains_uniformly() {
    let set = candidate_set(
        vec![vec![1.0, 0.2, 0.0], vec![0.9, 0.3, 0.1], vec![0.0, 1.0, 0.2], vec![0.1, 0.0, 1.0]],
        vec![3.0, 2.5, 1.0, 0.5],
    )
    .unwrap();
    let s = similarity_matrix(&set, SimTransform::Affine).unwrap();
    let q = normalize_quality(&set, 1e-3).unwrap();
    let base = greedy_map(&build_l_ensemble(&s, &q, 0.0).unwrap(), &set.pids(), 4).unwrap();
    for c in [0.1f64, 10.0] {
        let r = greedy_map(&build_l_ensemble(&s, &q.scaled(c), 0.0).unwrap(), &set.pids(), 4).unwrap();
        assert_eq!(r.indices(), base.indices());
        for (x, y) in r.gains().iter().zip(base.gains()) {
            assert!((x - y - 2.0 * c.ln()).abs() < 1e-9);
        }
    }
}

#[test]
fn queries_rerank_concurrently() {
    fn assert_send_sync<T: Send + Sync>() {}
    assert_send_sync::<CandidateSet64>();
    assert_send_sync::<LEnsemble64>();
    assert_send_sync::<Ranking64>();

    let sets: Vec<CandidateSet64> = (0..8)
        .map(|q| {
            let embs = (0..6).map(|i| vec![1.0, (i * q) as f64 * 0.1, (i % 3) as f64]).collect();
            candidate_set(embs, (0..6).map(|i| ((i * 7 + q) % 5) as f64).collect()).unwrap()
        })
        .collect();
    let run = |s: &CandidateSet64| {
        let l = kernel_for(s, SimTransform::Affine, 1e-3, 1e-10).unwrap();
        greedy_map(&l, &s.pids(), 4).unwrap()
    };
    let serial: Vec<_> = sets.iter().map(run).collect();
    let parallel: Vec<_> = std::thread::scope(|scope| {
        let handles: Vec<_> = sets.iter().map(|s| scope.spawn(move || run(s))).collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    assert_eq!(serial, parallel);
}
