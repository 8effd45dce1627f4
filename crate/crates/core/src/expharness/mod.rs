//! Recovery experiments at configurable scale.
//!
//! - Experiment 1: are the summands of a sum of `k` term vectors among its
//!   nearest neighbours, and in the solver support over the term dictionary?
//! - Experiment 2: is a sum of `k` fact vectors decomposed back into its facts?
//! - Experiment 3: does `prove` return a fully deductive chain for a pair of
//!   entities joined by a random `k`-step walk through the knowledge base?
//!
//! Every trial draws from its own generator seeded by
//! `(seed, experiment, dict_size, k, trial)`, so reports do not depend on how
//! trials are scheduled across threads.

pub mod fixtures;

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt;
use std::io::Write;
use std::time::{Duration, Instant};

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::embeddings::{synth_embeddings, EmbeddingStore, StoreBuilder};
use crate::kb::{build_dictionary, FactDictionary, Triple};
use crate::linalg::{axpy, AtomMatrix};
use crate::reasoner::{prove, ReasonerConfig, ReasoningChain, DEFAULT_EPSILON, DEFAULT_PAIR_TOL};
use crate::solver::{solve, Method, SolverConfig};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialConfig {
    pub dict_sizes: Vec<usize>,
    /// Terms or facts per sum (experiments 1 and 2), path length (experiment 3).
    pub counts: Vec<usize>,
    pub trials: usize,
    pub dimension: usize,
    pub seed: u64,
    pub solver: SolverConfig,
    pub neighbor_k: usize,
    /// Entity count for synthetic knowledge bases. Defaults to `dict_size`
    /// in experiment 2 and `3 * dict_size / 10` in experiment 3.
    pub entities: Option<usize>,
    pub epsilon: f64,
    pub pair_tol: f64,
    /// Log one line per finished cell to standard error.
    pub progress: bool,
}

impl Default for TrialConfig {
    fn default() -> Self {
        Self {
            dict_sizes: vec![1000],
            counts: vec![1, 2, 3, 4, 5],
            trials: 100,
            dimension: 300,
            seed: 0,
            solver: SolverConfig::default(),
            neighbor_k: 20,
            entities: None,
            epsilon: DEFAULT_EPSILON,
            pair_tol: DEFAULT_PAIR_TOL,
            progress: false,
        }
    }
}

impl TrialConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_owned()));
        if self.dict_sizes.is_empty() || self.dict_sizes.contains(&0) {
            return bad("dictionary sizes must be positive");
        }
        if self.counts.is_empty() || self.counts.contains(&0) {
            return bad("counts must be positive");
        }
        if self.trials == 0 || self.neighbor_k == 0 {
            return bad("trials and neighbor_k must be positive");
        }
        if self.dimension < 2 {
            return bad("dimension must be at least 2");
        }
        if self.entities == Some(0) {
            return bad("entity count must be positive");
        }
        self.solver.validate()
    }

    fn reasoner(&self) -> ReasonerConfig {
        ReasonerConfig { solver: self.solver, epsilon: self.epsilon, pair_tol: self.pair_tol }
    }

    fn max_count(&self) -> usize {
        self.counts.iter().copied().max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Metric {
    /// All summands among the `neighbor_k` nearest neighbours of the sum.
    Nearest,
    /// All planted atoms in the solver support.
    Solver(Method),
    /// Returned chain fully deductive, with an exact-path witness.
    Deductive,
    /// Returned chain contains at least one associational or analogical step.
    Gapped,
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Metric::Nearest => f.write_str("nearest"),
            Metric::Solver(Method::Omp) => f.write_str("omp"),
            Metric::Solver(Method::Lasso) => f.write_str("lasso"),
            Metric::Solver(Method::Exhaustive) => f.write_str("exhaustive"),
            Metric::Deductive => f.write_str("deductive"),
            Metric::Gapped => f.write_str("gapped"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub dict_size: usize,
    pub k: usize,
    pub metric: Metric,
    pub successes: usize,
    /// Trials actually run; below the configured count when sampling failed.
    pub trials: usize,
    pub elapsed: Duration,
}

#[derive(Debug, Clone)]
pub struct TrialReport {
    pub cells: Vec<Cell>,
    pub config: TrialConfig,
}

impl TrialReport {
    pub fn get(&self, dict_size: usize, k: usize, metric: Metric) -> Option<&Cell> {
        self.cells.iter().find(|c| c.dict_size == dict_size && c.k == k && c.metric == metric)
    }

    pub fn successes(&self, dict_size: usize, k: usize, metric: Metric) -> Option<usize> {
        self.get(dict_size, k, metric).map(|c| c.successes)
    }

    /// `dict_size,k,successes,trials,metric`, one row per cell and metric.
    /// Contains nothing time-dependent, so reruns are byte-identical.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["dict_size", "k", "successes", "trials", "metric"])?;
        for c in &self.cells {
            w.write_record([
                c.dict_size.to_string(),
                c.k.to_string(),
                c.successes.to_string(),
                c.trials.to_string(),
                c.metric.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// One table per metric: rows are dictionary sizes, columns counts.
    pub fn summary(&self) -> String {
        let metrics: BTreeSet<Metric> = self.cells.iter().map(|c| c.metric).collect();
        let sizes: BTreeSet<usize> = self.cells.iter().map(|c| c.dict_size).collect();
        let ks: BTreeSet<usize> = self.cells.iter().map(|c| c.k).collect();
        let mut out = String::new();
        for m in metrics {
            out.push_str(&format!("{m}\n{:>10}", "size \\ k"));
            for k in &ks {
                out.push_str(&format!("{k:>9}"));
            }
            out.push('\n');
            for &s in &sizes {
                out.push_str(&format!("{s:>10}"));
                for &k in &ks {
                    let cell = self.get(s, k, m).map_or("-".into(), |c| format!("{}/{}", c.successes, c.trials));
                    out.push_str(&format!("{cell:>9}"));
                }
                out.push('\n');
            }
        }
        out
    }
}

/// Seed for one stream, mixed from its coordinates with SplitMix64.
pub fn derive_seed(parts: &[u64]) -> u64 {
    let mut z: u64 = 0x9E37_79B9_7F4A_7C15;
    for &p in parts {
        z ^= p;
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
    }
    z
}

fn trial_rng(cfg: &TrialConfig, exp: u64, dict_size: usize, k: usize, trial: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(&[cfg.seed, exp, dict_size as u64, k as u64, trial as u64]))
}

fn log_cell(cfg: &TrialConfig, exp: u8, cell: &Cell) {
    if cfg.progress {
        eprintln!(
            "exp{exp} size={} k={} {}: {}/{} ({:.2?})",
            cell.dict_size, cell.k, cell.metric, cell.successes, cell.trials, cell.elapsed
        );
    }
}

/// A store of `size` terms: synthetic, or a seeded sample of `base`'s vocabulary.
fn term_store(cfg: &TrialConfig, exp: u64, size: usize, base: Option<&EmbeddingStore>) -> Result<EmbeddingStore> {
    let seed = derive_seed(&[cfg.seed, exp, size as u64]);
    match base {
        None => synth_embeddings(size, cfg.dimension, seed),
        Some(base) => {
            if size > base.len() {
                return Err(Error::InvalidArgument(format!(
                    "dictionary size {size} exceeds the {} loaded terms",
                    base.len()
                )));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut idx = sample(&mut rng, base.len(), size).into_vec();
            idx.sort_unstable();
            let mut b = StoreBuilder::with_capacity(base.dimension(), false, size);
            for i in idx {
                b.push(base.term(i), base.vector(i))?;
            }
            Ok(b.build())
        }
    }
}

fn sum_columns(atoms: &AtomMatrix, idx: &[usize]) -> Vec<f64> {
    let mut goal = vec![0.0; atoms.dim()];
    for &j in idx {
        axpy(1.0, atoms.column(j), &mut goal);
    }
    goal
}

/// Experiment 1 on synthetic isotropic embeddings.
pub fn exp1_term_recovery(cfg: &TrialConfig) -> Result<TrialReport> {
    exp1_run(cfg, None)
}

/// Experiment 1 over dictionaries sampled from a loaded vocabulary.
pub fn exp1_term_recovery_with(cfg: &TrialConfig, base: &EmbeddingStore) -> Result<TrialReport> {
    exp1_run(cfg, Some(base))
}

fn exp1_run(cfg: &TrialConfig, base: Option<&EmbeddingStore>) -> Result<TrialReport> {
    cfg.validate()?;
    let mut cells = Vec::new();
    for &size in &cfg.dict_sizes {
        if size < cfg.max_count() + cfg.neighbor_k {
            return Err(Error::InvalidArgument(format!(
                "dictionary size {size} is below max k + neighbor_k = {}",
                cfg.max_count() + cfg.neighbor_k
            )));
        }
        let store = term_store(cfg, 1, size, base)?;
        let atoms = AtomMatrix::from_columns(store.dimension(), (0..store.len()).map(|i| store.vector(i)))?;
        for &k in &cfg.counts {
            let start = Instant::now();
            let outcomes: Vec<(bool, bool)> = (0..cfg.trials)
                .into_par_iter()
                .map(|t| -> Result<(bool, bool)> {
                    let mut rng = trial_rng(cfg, 1, size, k, t);
                    let idx = sample(&mut rng, size, k).into_vec();
                    let goal = sum_columns(&atoms, &idx);
                    let near = store.nearest(&goal, cfg.neighbor_k)?;
                    let near_ok = idx.iter().all(|&i| near.iter().any(|n| n.term == store.term(i)));
                    let sol = solve(&atoms, &goal, &cfg.solver)?;
                    let solver_ok = idx.iter().all(|i| sol.weights.contains_key(i));
                    Ok((near_ok, solver_ok))
                })
                .collect::<Result<_>>()?;
            let elapsed = start.elapsed();
            for (metric, hits) in [
                (Metric::Nearest, outcomes.iter().filter(|o| o.0).count()),
                (Metric::Solver(cfg.solver.method), outcomes.iter().filter(|o| o.1).count()),
            ] {
                let cell = Cell { dict_size: size, k, metric, successes: hits, trials: outcomes.len(), elapsed };
                log_cell(cfg, 1, &cell);
                cells.push(cell);
            }
        }
    }
    Ok(TrialReport { cells, config: cfg.clone() })
}

/// `count` distinct ordered entity pairs over `store`, no self-loops, in
/// draw order.
fn random_facts(store: &EmbeddingStore, count: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Triple>> {
    let n = store.len();
    if n < 2 || count as u128 > (n as u128) * (n as u128 - 1) {
        return Err(Error::InvalidArgument(format!("cannot draw {count} distinct facts over {n} entities")));
    }
    let mut seen = HashSet::with_capacity(count);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let h = rng.random_range(0..n);
        let t = rng.random_range(0..n);
        if h != t && seen.insert((h, t)) {
            out.push(Triple::new(store.term(h), "rel", store.term(t))?);
        }
    }
    Ok(out)
}

/// Synthetic knowledge base: `entities` isotropic vectors and `facts`
/// distinct random edges between them.
pub fn synthetic_kb(facts: usize, entities: usize, dimension: usize, seed: u64) -> Result<(EmbeddingStore, FactDictionary)> {
    let store = synth_embeddings(entities, dimension, derive_seed(&[seed, 0xE]))?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&[seed, 0xF]));
    let triples = random_facts(&store, facts, &mut rng)?;
    let dict = build_dictionary(&store, &triples, None)?;
    Ok((store, dict))
}

/// Whether `support` contains `k` facts using each planted head once and each
/// planted tail once. Such a set sums to exactly the planted goal, so supports
/// that swap tails between planted facts count as recovered.
pub fn recovers_planted(dict: &FactDictionary, support: &BTreeSet<usize>, planted: &[usize]) -> bool {
    let heads: Vec<&str> = planted.iter().map(|&j| dict.fact(j).head.as_str()).collect();
    let tails: Vec<&str> = planted.iter().map(|&j| dict.fact(j).tail.as_str()).collect();
    let k = planted.len();
    // adjacency head slot -> tail slots available in the support
    let adj: Vec<Vec<usize>> = heads
        .iter()
        .map(|h| (0..k).filter(|&b| dict.column_of(h, tails[b]).is_some_and(|j| support.contains(&j))).collect())
        .collect();
    let mut tail_owner: Vec<Option<usize>> = vec![None; k];
    fn augment(a: usize, adj: &[Vec<usize>], seen: &mut [bool], owner: &mut [Option<usize>]) -> bool {
        for &b in &adj[a] {
            if !seen[b] {
                seen[b] = true;
                if owner[b].is_none_or(|o| augment(o, adj, seen, owner)) {
                    owner[b] = Some(a);
                    return true;
                }
            }
        }
        false
    }
    (0..k).all(|a| augment(a, &adj, &mut vec![false; k], &mut tail_owner))
}

/// `k` facts with pairwise-disjoint entities, by rejection sampling.
fn disjoint_facts(dict: &FactDictionary, k: usize, rng: &mut ChaCha8Rng) -> Option<Vec<usize>> {
    'attempt: for _ in 0..100 {
        let mut used: HashSet<&str> = HashSet::new();
        let mut chosen = Vec::with_capacity(k);
        while chosen.len() < k {
            let mut placed = false;
            for _ in 0..1000 {
                let j = rng.random_range(0..dict.len());
                let f = dict.fact(j);
                if !used.contains(f.head.as_str()) && !used.contains(f.tail.as_str()) {
                    used.insert(&f.head);
                    used.insert(&f.tail);
                    chosen.push(j);
                    placed = true;
                    break;
                }
            }
            if !placed {
                continue 'attempt;
            }
        }
        return Some(chosen);
    }
    None
}

/// Experiment 2 on a synthetic fact dictionary per size.
pub fn exp2_fact_recovery(cfg: &TrialConfig) -> Result<TrialReport> {
    exp2_run(cfg, None)
}

/// Experiment 2 with entities sampled from a loaded vocabulary.
pub fn exp2_fact_recovery_with(cfg: &TrialConfig, base: &EmbeddingStore) -> Result<TrialReport> {
    exp2_run(cfg, Some(base))
}

fn exp2_run(cfg: &TrialConfig, base: Option<&EmbeddingStore>) -> Result<TrialReport> {
    cfg.validate()?;
    let mut cells = Vec::new();
    for &size in &cfg.dict_sizes {
        if size < cfg.max_count() + cfg.neighbor_k {
            return Err(Error::InvalidArgument(format!(
                "dictionary size {size} is below max k + neighbor_k = {}",
                cfg.max_count() + cfg.neighbor_k
            )));
        }
        let entities = cfg.entities.unwrap_or(size);
        if entities < 2 * cfg.max_count() {
            return Err(Error::InvalidArgument(format!("{entities} entities cannot host {} disjoint facts", cfg.max_count())));
        }
        let store = term_store(cfg, 2, entities, base)?;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&[cfg.seed, 2, size as u64, u64::MAX]));
        let dict = build_dictionary(&store, &random_facts(&store, size, &mut rng)?, None)?;
        for &k in &cfg.counts {
            let start = Instant::now();
            let outcomes: Vec<Option<bool>> = (0..cfg.trials)
                .into_par_iter()
                .map(|t| -> Result<Option<bool>> {
                    let mut rng = trial_rng(cfg, 2, size, k, t);
                    let Some(planted) = disjoint_facts(&dict, k, &mut rng) else { return Ok(None) };
                    let goal = sum_columns(dict.atoms(), &planted);
                    let sol = solve(dict.atoms(), &goal, &cfg.solver)?;
                    let support: BTreeSet<usize> = sol.support().collect();
                    Ok(Some(recovers_planted(&dict, &support, &planted)))
                })
                .collect::<Result<_>>()?;
            let ran: Vec<bool> = outcomes.into_iter().flatten().collect();
            let cell = Cell {
                dict_size: size,
                k,
                metric: Metric::Solver(cfg.solver.method),
                successes: ran.iter().filter(|&&ok| ok).count(),
                trials: ran.len(),
                elapsed: start.elapsed(),
            };
            log_cell(cfg, 2, &cell);
            cells.push(cell);
        }
    }
    Ok(TrialReport { cells, config: cfg.clone() })
}

/// A random walk of exactly `k` facts through distinct entities, as fact
/// indices. `None` after 100 failed restarts.
pub fn random_path(dict: &FactDictionary, outgoing: &HashMap<&str, Vec<usize>>, k: usize, rng: &mut ChaCha8Rng) -> Option<Vec<usize>> {
    'restart: for _ in 0..100 {
        let first = rng.random_range(0..dict.len());
        let f = dict.fact(first);
        let mut visited: HashSet<&str> = HashSet::from([f.head.as_str(), f.tail.as_str()]);
        let mut path = vec![first];
        let mut cur = f.tail.as_str();
        while path.len() < k {
            let next: Vec<usize> = outgoing
                .get(cur)
                .map(|v| v.iter().copied().filter(|&j| !visited.contains(dict.fact(j).tail.as_str())).collect())
                .unwrap_or_default();
            if next.is_empty() {
                continue 'restart;
            }
            let j = next[rng.random_range(0..next.len())];
            cur = dict.fact(j).tail.as_str();
            visited.insert(cur);
            path.push(j);
        }
        return Some(path);
    }
    None
}

pub const MAX_PATH_LEN: usize = 10;

/// Shortest fact path from `given` to `target` by breadth-first search over
/// exact entity matches, or `None` if none within `max_len` facts.
pub fn brute_force_path(dict: &FactDictionary, given: &str, target: &str, max_len: usize) -> Result<Option<Vec<Triple>>> {
    if max_len > MAX_PATH_LEN {
        return Err(Error::Guard(format!("path search limited to {MAX_PATH_LEN} steps, got {max_len}")));
    }
    if given == target {
        return Ok(Some(Vec::new()));
    }
    let outgoing = outgoing_index(dict);
    let mut parent: HashMap<&str, usize> = HashMap::new();
    let mut depth: HashMap<&str, usize> = HashMap::from([(given, 0)]);
    let mut queue = VecDeque::from([given]);
    while let Some(v) = queue.pop_front() {
        let d = depth[v];
        if d == max_len {
            continue;
        }
        for &j in outgoing.get(v).into_iter().flatten() {
            let t = dict.fact(j).tail.as_str();
            if depth.contains_key(t) {
                continue;
            }
            depth.insert(t, d + 1);
            parent.insert(t, j);
            if t == target {
                let mut path = Vec::new();
                let mut cur = target;
                while cur != given {
                    let j = parent[cur];
                    let f = dict.fact(j);
                    path.push(Triple::new(&f.head, &f.predicates[0], &f.tail)?);
                    cur = f.head.as_str();
                }
                path.reverse();
                return Ok(Some(path));
            }
            queue.push_back(t);
        }
    }
    Ok(None)
}

/// One Exp 3 trial: the sampled walk and what `prove` returned for its
/// endpoints.
#[derive(Debug, Clone)]
pub struct PathTrial {
    pub walk: Vec<usize>,
    pub head: String,
    pub tail: String,
    pub chain: ReasoningChain,
    /// Chain fully deductive and an exact path of at most `k` facts exists.
    pub success: bool,
}

/// Index of facts by head entity, for [`exp3_trial`].
pub fn outgoing_index(dict: &FactDictionary) -> HashMap<&str, Vec<usize>> {
    let mut out: HashMap<&str, Vec<usize>> = HashMap::new();
    for (j, f) in dict.facts().iter().enumerate() {
        out.entry(f.head.as_str()).or_default().push(j);
    }
    out
}

/// Runs trial `trial` of the path-length-`k` cell, or `None` when no walk of
/// length `k` could be sampled.
pub fn exp3_trial(
    cfg: &TrialConfig,
    store: &EmbeddingStore,
    kb: &FactDictionary,
    outgoing: &HashMap<&str, Vec<usize>>,
    k: usize,
    trial: usize,
) -> Result<Option<PathTrial>> {
    let mut rng = trial_rng(cfg, 3, kb.len(), k, trial);
    let Some(walk) = random_path(kb, outgoing, k, &mut rng) else { return Ok(None) };
    let head = kb.fact(walk[0]).head.clone();
    let tail = kb.fact(walk[k - 1]).tail.clone();
    let chain = prove(store, kb, &head, &tail, &cfg.reasoner())?;
    let success = chain.is_fully_deductive() && brute_force_path(kb, &head, &tail, k)?.is_some_and(|w| w.len() <= k);
    Ok(Some(PathTrial { walk, head, tail, chain, success }))
}

/// Experiment 3 over a given knowledge base; `counts` are path lengths and
/// cells are keyed by the dictionary size.
pub fn exp3_path_recovery(cfg: &TrialConfig, store: &EmbeddingStore, kb: &FactDictionary) -> Result<TrialReport> {
    cfg.validate()?;
    if kb.is_empty() {
        return Err(Error::EmptyDictionary);
    }
    if cfg.max_count() > MAX_PATH_LEN {
        return Err(Error::InvalidArgument(format!("path lengths are limited to {MAX_PATH_LEN}")));
    }
    let outgoing = outgoing_index(kb);
    let size = kb.len();
    let mut cells = Vec::new();
    for &k in &cfg.counts {
        let start = Instant::now();
        let outcomes: Vec<Option<PathTrial>> = (0..cfg.trials)
            .into_par_iter()
            .map(|t| exp3_trial(cfg, store, kb, &outgoing, k, t))
            .collect::<Result<_>>()?;
        let ran: Vec<PathTrial> = outcomes.into_iter().flatten().collect();
        let elapsed = start.elapsed();
        for (metric, hits) in [
            (Metric::Deductive, ran.iter().filter(|t| t.success).count()),
            (Metric::Gapped, ran.iter().filter(|t| !t.chain.is_fully_deductive()).count()),
        ] {
            let cell = Cell { dict_size: size, k, metric, successes: hits, trials: ran.len(), elapsed };
            log_cell(cfg, 3, &cell);
            cells.push(cell);
        }
    }
    Ok(TrialReport { cells, config: cfg.clone() })
}

/// Experiment 3 on a synthetic knowledge base per dictionary size.
pub fn exp3_synthetic(cfg: &TrialConfig) -> Result<TrialReport> {
    cfg.validate()?;
    let mut cells = Vec::new();
    for &size in &cfg.dict_sizes {
        let entities = cfg.entities.unwrap_or((3 * size / 10).max(2));
        let (store, kb) = synthetic_kb(size, entities, cfg.dimension, derive_seed(&[cfg.seed, 3, size as u64]))?;
        cells.extend(exp3_path_recovery(cfg, &store, &kb)?.cells);
    }
    Ok(TrialReport { cells, config: cfg.clone() })
}

#[cfg(test)]
mod tests;
