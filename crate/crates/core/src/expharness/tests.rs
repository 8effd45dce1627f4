use super::fixtures::*;
use super::*;
use crate::embeddings::cosine;
use crate::linalg::sub;

fn small(counts: &[usize]) -> TrialConfig {
    TrialConfig {
        dict_sizes: vec![120],
        counts: counts.to_vec(),
        trials: 20,
        dimension: 100,
        seed: 11,
        ..TrialConfig::default()
    }
}

fn csv_bytes(r: &TrialReport) -> Vec<u8> {
    let mut out = Vec::new();
    r.write_csv(&mut out).unwrap();
    out
}

#[test]
fn seeds_differ_per_coordinate() {
    let a = derive_seed(&[1, 1, 1000, 2, 0]);
    assert_ne!(a, derive_seed(&[1, 1, 1000, 2, 1]));
    assert_ne!(a, derive_seed(&[1, 1, 1000, 3, 0]));
    assert_ne!(a, derive_seed(&[2, 1, 1000, 2, 0]));
    assert_eq!(a, derive_seed(&[1, 1, 1000, 2, 0]));
}

#[test]
fn exp1_is_reproducible_and_shaped() {
    let cfg = small(&[2, 3]);
    let a = exp1_term_recovery(&cfg).unwrap();
    let b = exp1_term_recovery(&cfg).unwrap();
    assert_eq!(csv_bytes(&a), csv_bytes(&b));
    let text = String::from_utf8(csv_bytes(&a)).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "dict_size,k,successes,trials,metric");
    assert_eq!(lines.len(), 5);
    assert!(lines[1].ends_with(",nearest") && lines[2].ends_with(",lasso"));
    assert!(a.cells.iter().all(|c| c.successes <= c.trials && c.trials == 20));
    let other = exp1_term_recovery(&TrialConfig { seed: 12, ..cfg }).unwrap();
    assert_eq!(other.cells.len(), a.cells.len());
}

#[test]
fn exp1_single_term_always_recovered() {
    let r = exp1_term_recovery(&small(&[1])).unwrap();
    assert_eq!(r.successes(120, 1, Metric::Nearest), Some(20));
    assert_eq!(r.successes(120, 1, Metric::Solver(Method::Lasso)), Some(20));
}

fn assert_monotone(report: &TrialReport, size: usize, metric: Metric) {
    let ks: BTreeSet<usize> = report.cells.iter().map(|c| c.k).collect();
    let row: Vec<usize> = ks.iter().map(|&k| report.successes(size, k, metric).unwrap()).collect();
    let inversions: Vec<usize> = row.windows(2).filter(|w| w[1] > w[0]).map(|w| w[1] - w[0]).collect();
    assert!(inversions.len() <= 1 && inversions.iter().all(|&d| d <= 5), "{metric} row {row:?}");
}

#[test]
fn exp1_lasso_dominates_and_degrades_monotonically() {
    let cfg = TrialConfig { dict_sizes: vec![300], ..small(&[1, 2, 4, 6, 8]) };
    let r = exp1_term_recovery(&cfg).unwrap();
    for &k in &cfg.counts {
        let nn = r.successes(300, k, Metric::Nearest).unwrap();
        let lasso = r.successes(300, k, Metric::Solver(Method::Lasso)).unwrap();
        assert!(lasso >= nn, "k={k}: lasso {lasso} < nearest {nn}");
    }
    assert_monotone(&r, 300, Metric::Nearest);
    assert_monotone(&r, 300, Metric::Solver(Method::Lasso));
}

#[test]
fn exp1_rejects_small_dictionary() {
    let cfg = TrialConfig { dict_sizes: vec![21], ..small(&[2]) };
    assert!(matches!(exp1_term_recovery(&cfg), Err(Error::InvalidArgument(_))));
    assert!(matches!(exp2_fact_recovery(&cfg), Err(Error::InvalidArgument(_))));
    assert!(TrialConfig { trials: 0, ..small(&[1]) }.validate().is_err());
}

#[test]
fn exp1_over_a_loaded_vocabulary() {
    let base = synth_embeddings(400, 50, 3).unwrap();
    let cfg = TrialConfig { dimension: 50, ..small(&[1]) };
    let r = exp1_term_recovery_with(&cfg, &base).unwrap();
    assert_eq!(r.successes(120, 1, Metric::Nearest), Some(20));
    let too_big = TrialConfig { dict_sizes: vec![500], ..cfg };
    assert!(exp1_term_recovery_with(&too_big, &base).is_err());
}

#[test]
fn exp2_single_fact_always_recovered_and_degrades() {
    let r = exp2_fact_recovery(&small(&[1, 2, 3, 4])).unwrap();
    let m = Metric::Solver(Method::Lasso);
    assert_eq!(r.successes(120, 1, m), Some(20));
    assert_monotone(&r, 120, m);
    let omp = exp2_fact_recovery(&TrialConfig { solver: SolverConfig::omp(), ..small(&[1]) }).unwrap();
    assert_eq!(omp.successes(120, 1, Metric::Solver(Method::Omp)), Some(20));
}

#[test]
fn permuted_endpoints_count_as_recovered() {
    let store = synth_embeddings(4, 20, 1).unwrap();
    let triples = [("t0", "t1"), ("t2", "t3"), ("t0", "t3"), ("t2", "t1")]
        .map(|(h, t)| Triple::new(h, "r", t).unwrap());
    let dict = build_dictionary(&store, &triples, None).unwrap();
    // columns equal a permutation-equivalent pair
    let lhs = add_cols(&dict, 0, 1);
    let rhs = add_cols(&dict, 2, 3);
    assert!(norm(&sub(&lhs, &rhs)) < 1e-12);
    let planted = [0, 1];
    assert!(recovers_planted(&dict, &BTreeSet::from([0, 1]), &planted));
    assert!(recovers_planted(&dict, &BTreeSet::from([2, 3]), &planted));
    assert!(recovers_planted(&dict, &BTreeSet::from([0, 1, 2]), &planted));
    assert!(!recovers_planted(&dict, &BTreeSet::from([0, 2]), &planted));
    assert!(!recovers_planted(&dict, &BTreeSet::from([1]), &planted));
}

fn add_cols(dict: &FactDictionary, a: usize, b: usize) -> Vec<f64> {
    crate::linalg::add(dict.atoms().column(a), dict.atoms().column(b))
}

use crate::linalg::norm;

fn chain_kb() -> FactDictionary {
    let store = synth_embeddings(6, 10, 2).unwrap();
    let triples = [("t0", "t1"), ("t1", "t2"), ("t2", "t3"), ("t0", "t2"), ("t4", "t5")]
        .map(|(h, t)| Triple::new(h, "r", t).unwrap());
    build_dictionary(&store, &triples, None).unwrap()
}

#[test]
fn brute_force_path_cases() {
    let kb = chain_kb();
    let one = brute_force_path(&kb, "t0", "t1", 3).unwrap().unwrap();
    assert_eq!(one, vec![Triple::new("t0", "r", "t1").unwrap()]);
    let short = brute_force_path(&kb, "t0", "t3", 3).unwrap().unwrap();
    assert_eq!(short.len(), 2, "shortcut through (t0, r, t2)");
    assert_eq!(short[0].tail, short[1].head);
    assert!(brute_force_path(&kb, "t0", "t3", 1).unwrap().is_none());
    assert_eq!(brute_force_path(&kb, "t2", "t2", 1).unwrap(), Some(vec![]));
    assert!(brute_force_path(&kb, "t0", "t5", 10).unwrap().is_none());
    assert!(brute_force_path(&kb, "t3", "t0", 10).unwrap().is_none(), "edges are directed");
    assert!(matches!(brute_force_path(&kb, "t0", "t1", 11), Err(Error::Guard(_))));
}

#[test]
fn random_paths_are_simple_walks() {
    let (_, kb) = synthetic_kb(600, 200, 20, 5).unwrap();
    let outgoing = outgoing_index(&kb);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for k in 1..=6 {
        let path = random_path(&kb, &outgoing, k, &mut rng).unwrap();
        assert_eq!(path.len(), k);
        let mut seen = HashSet::from([kb.fact(path[0]).head.as_str()]);
        for w in path.windows(2) {
            assert_eq!(kb.fact(w[0]).tail, kb.fact(w[1]).head);
        }
        for &j in &path {
            assert!(seen.insert(kb.fact(j).tail.as_str()), "entity revisited");
        }
    }
    // a lone edge admits no walk of length 2
    let lone = build_dictionary(&synth_embeddings(2, 5, 0).unwrap(), &[Triple::new("t0", "r", "t1").unwrap()], None).unwrap();
    assert!(random_path(&lone, &outgoing_index(&lone), 2, &mut rng).is_none());
}

#[test]
fn synthetic_kb_has_distinct_facts() {
    let (store, kb) = synthetic_kb(500, 100, 30, 9).unwrap();
    assert_eq!(store.len(), 100);
    assert_eq!(kb.len(), 500);
    assert!(synthetic_kb(10, 3, 30, 9).is_err(), "only 6 ordered pairs exist");
}

#[test]
fn exp3_single_fact_paths_are_deductive() {
    let cfg = TrialConfig { dict_sizes: vec![400], entities: Some(150), ..small(&[1, 2]) };
    let r = exp3_synthetic(&cfg).unwrap();
    assert_eq!(r.successes(400, 1, Metric::Deductive), Some(20));
    assert_eq!(r.successes(400, 1, Metric::Gapped), Some(0));
    let two = r.get(400, 2, Metric::Deductive).unwrap();
    assert!(two.successes <= two.trials);
    assert_eq!(csv_bytes(&r), csv_bytes(&exp3_synthetic(&cfg).unwrap()));
}

#[test]
fn summary_lists_each_metric() {
    let r = exp1_term_recovery(&small(&[1])).unwrap();
    let s = r.summary();
    assert!(s.contains("nearest\n") && s.contains("lasso\n") && s.contains("20/20"));
}

#[test]
fn planted_analogy_offsets_match() {
    let store = planted_analogy(10, 50, 3).unwrap();
    let off = |h: &str, t: &str| sub(store.vector_of(t).unwrap(), store.vector_of(h).unwrap());
    assert!(norm(&sub(&off("bear", "hiker"), &off("shark", "snorkeler"))) < 1e-12);
    assert!((cosine(store.vector_of("bear").unwrap(), store.vector_of("snorkeler").unwrap()).unwrap()).abs() < 1e-12);
    let top = store.analogy("bear", "hiker", "shark", 1).unwrap();
    assert_eq!(top[0].term, "snorkeler");
}

#[test]
fn orthonormal_basis() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let b = orthonormal(&mut rng, 5, 8);
    for i in 0..5 {
        for j in 0..5 {
            let expect = if i == j { 1.0 } else { 0.0 };
            assert!((crate::linalg::dot(&b[i], &b[j]) - expect).abs() < 1e-12);
        }
    }
}

#[test]
fn apple_fixture_shape() {
    let (store, dict) = apple_colours(500, 100, 4).unwrap();
    assert_eq!(dict.len(), 503);
    for c in COLOURS {
        let sim = cosine(store.vector_of(c).unwrap(), store.vector_of("red").unwrap()).unwrap();
        assert!(sim > 0.4, "{c} too far from red: {sim}");
    }
    assert!(dict.facts().iter().skip(3).all(|f| f.head.starts_with('e') && f.tail.starts_with('e')));
}

#[test]
fn chain_fixture_shape() {
    let (store, dict) = planted_chain(3, 20, 40, 30, 1).unwrap();
    assert_eq!(store.len(), 24);
    assert_eq!(dict.len(), 43);
    assert_eq!(brute_force_path(&dict, "c0", "c3", 3).unwrap().unwrap().len(), 3);
}
