//! End-to-end queries over the embedded knowledge base.
//!
//! `prove` solves for the facts whose vectors sum to the goal, then orders
//! them into a chain by a least-cost path search over a complete digraph on
//! the entities involved. Edges backed by a selected fact cost `epsilon`;
//! every other edge costs the cosine distance between its endpoints, which
//! makes those steps associational leaps. A leap whose offset matches the
//! offset of a selected fact left out of the path is relabelled analogical.

use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;
use serde_json::json;

use crate::embeddings::{cosine, EmbeddingStore};
use crate::kb::{disjunctive_goal, goal_vector, Fact, FactDictionary};
use crate::linalg::{norm, sub};
use crate::solver::{solve, solve_lasso, Method, SolverConfig, SparseSolution};
use crate::{Error, Result};

pub const DEFAULT_EPSILON: f64 = 1e-4;
pub const DEFAULT_PAIR_TOL: f64 = 0.35;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReasonerConfig {
    pub solver: SolverConfig,
    /// Cost of an edge backed by a selected fact.
    pub epsilon: f64,
    /// Largest offset mismatch at which a gap is explained by a donor fact.
    pub pair_tol: f64,
}

impl Default for ReasonerConfig {
    fn default() -> Self {
        Self { solver: SolverConfig::default(), epsilon: DEFAULT_EPSILON, pair_tol: DEFAULT_PAIR_TOL }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkKind {
    Deductive,
    Associational,
    Analogical,
}

/// A dictionary fact referenced from a chain step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepFact {
    pub index: usize,
    #[serde(flatten)]
    pub fact: Fact,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainStep {
    pub from: String,
    pub to: String,
    pub kind: LinkKind,
    /// The supporting fact for deductive steps, the donor for analogical ones.
    pub fact: Option<StepFact>,
    pub cost: f64,
    pub weight: Option<f64>,
}

impl ChainStep {
    fn label(&self) -> String {
        match (&self.kind, &self.fact) {
            (LinkKind::Deductive, Some(f)) => f.fact.predicate_label(),
            (LinkKind::Analogical, Some(f)) => format!("ANALOGY:{}", f.fact),
            _ => "GAP".to_owned(),
        }
    }
}

impl fmt::Display for ChainStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let weight = self.weight.map_or_else(|| "-".to_owned(), |w| format!("{w:.2}"));
        write!(f, "{} --[{}]--> {} ({:.4}, {})", self.from, self.label(), self.to, self.cost, weight)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReasoningChain {
    pub steps: Vec<ChainStep>,
    pub total_cost: f64,
    pub residual_norm: f64,
    /// Selected facts that appear nowhere in the chain, by dictionary index.
    pub unplaced: Vec<usize>,
}

impl ReasoningChain {
    pub fn is_fully_deductive(&self) -> bool {
        self.steps.iter().all(|s| s.kind == LinkKind::Deductive)
    }

    /// Fact indices of deductive steps, in chain order.
    pub fn deductive_facts(&self) -> impl Iterator<Item = usize> + '_ {
        self.steps
            .iter()
            .filter(|s| s.kind == LinkKind::Deductive)
            .filter_map(|s| s.fact.as_ref().map(|f| f.index))
    }

    /// Structured export with fixed field names.
    pub fn to_json(&self, dict: &FactDictionary) -> serde_json::Value {
        let steps: Vec<_> = self
            .steps
            .iter()
            .map(|s| {
                let mut v = json!({
                    "kind": s.kind,
                    "from": s.from,
                    "to": s.to,
                    "predicate": match (&s.kind, &s.fact) {
                        (LinkKind::Deductive, Some(f)) => json!(f.fact.predicate_label()),
                        _ => serde_json::Value::Null,
                    },
                    "cost": s.cost,
                    "weight": s.weight,
                });
                if let (LinkKind::Analogical, Some(f)) = (&s.kind, &s.fact) {
                    v["donor"] = json!(f);
                }
                v
            })
            .collect();
        let unplaced: Vec<_> =
            self.unplaced.iter().map(|&j| json!(StepFact { index: j, fact: dict.fact(j).clone() })).collect();
        json!({
            "steps": steps,
            "residual_norm": self.residual_norm,
            "total_cost": self.total_cost,
            "unplaced": unplaced,
        })
    }
}

impl fmt::Display for ReasoningChain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.steps {
            writeln!(f, "{s}")?;
        }
        Ok(())
    }
}

/// Cosine distance `1 - cos`, clamped to `[0, 2]`. Zero vectors sit at distance 1.
pub fn semantic_distance(a: &[f64], b: &[f64]) -> f64 {
    (1.0 - cosine(a, b).unwrap_or(0.0)).clamp(0.0, 2.0)
}

/// The complete digraph over the query terms and the entities of the selected
/// facts. Nodes are sorted by term so node order is term order.
#[derive(Debug, Clone)]
pub struct ChainGraph {
    pub nodes: Vec<String>,
    /// Row-major `n x n` edge costs.
    pub costs: Vec<f64>,
    /// Selected fact behind each edge, if any.
    pub facts: Vec<Option<usize>>,
}

impl ChainGraph {
    pub fn build(
        solution: &SparseSolution,
        dict: &FactDictionary,
        store: &EmbeddingStore,
        given: &str,
        target: &str,
        epsilon: f64,
    ) -> Result<Self> {
        store.vector_of(given)?;
        store.vector_of(target)?;
        let mut names: BTreeSet<&str> = BTreeSet::from([given, target]);
        for j in solution.support() {
            let f = dict.fact(j);
            names.insert(&f.head);
            names.insert(&f.tail);
        }
        let nodes: Vec<String> = names.into_iter().map(str::to_owned).collect();
        let vecs: Vec<&[f64]> = nodes.iter().map(|n| store.vector_of(n)).collect::<Result<_>>()?;
        let n = nodes.len();
        let mut costs = vec![0.0; n * n];
        let mut facts = vec![None; n * n];
        for a in 0..n {
            for b in 0..n {
                if a != b {
                    costs[a * n + b] = semantic_distance(vecs[a], vecs[b]);
                }
            }
        }
        let pos = |t: &str| nodes.binary_search_by(|x| x.as_str().cmp(t)).expect("node present");
        for j in solution.support() {
            let f = dict.fact(j);
            let e = pos(&f.head) * n + pos(&f.tail);
            costs[e] = epsilon;
            facts[e] = Some(j);
        }
        Ok(Self { nodes, costs, facts })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn cost(&self, a: usize, b: usize) -> f64 {
        self.costs[a * self.len() + b]
    }

    pub fn node(&self, term: &str) -> Option<usize> {
        self.nodes.binary_search_by(|x| x.as_str().cmp(term)).ok()
    }

    /// Least-cost simple path from `src` to `dst` (Dijkstra). Among paths of
    /// equal cost the lexicographically smallest node sequence wins. Costs
    /// accumulate left to right along the path.
    pub fn least_cost_path(&self, src: usize, dst: usize) -> (f64, Vec<usize>) {
        let n = self.len();
        let mut best: Vec<Option<(f64, Vec<usize>)>> = vec![None; n];
        let mut done = vec![false; n];
        best[src] = Some((0.0, vec![src]));
        loop {
            let mut pick: Option<usize> = None;
            for v in 0..n {
                if done[v] {
                    continue;
                }
                let Some((c, p)) = &best[v] else { continue };
                let better = match pick.and_then(|u| best[u].as_ref()) {
                    None => true,
                    Some((cu, pu)) => c < cu || (c == cu && p < pu),
                };
                if better {
                    pick = Some(v);
                }
            }
            let Some(v) = pick else { break };
            done[v] = true;
            if v == dst {
                break;
            }
            let (cv, pv) = best[v].clone().expect("picked node has a label");
            for u in 0..n {
                if done[u] || u == v {
                    continue;
                }
                let c = cv + self.cost(v, u);
                let replace = match &best[u] {
                    None => true,
                    Some((cu, pu)) => c < *cu || (c == *cu && path_lt_extended(&pv, u, pu)),
                };
                if replace {
                    let mut p = pv.clone();
                    p.push(u);
                    best[u] = Some((c, p));
                }
            }
        }
        best[dst].clone().expect("complete graph always reaches the target")
    }
}

/// `prefix ++ [last] < other`, without allocating.
fn path_lt_extended(prefix: &[usize], last: usize, other: &[usize]) -> bool {
    prefix.iter().copied().chain(std::iter::once(last)).lt(other.iter().copied())
}

fn step_fact(dict: &FactDictionary, j: usize) -> StepFact {
    StepFact { index: j, fact: dict.fact(j).clone() }
}

/// Orders the selected facts into a chain from `given` to `target`.
pub fn order_chain(
    solution: &SparseSolution,
    dict: &FactDictionary,
    store: &EmbeddingStore,
    given: &str,
    target: &str,
    epsilon: f64,
) -> Result<ReasoningChain> {
    if given == target {
        return Err(Error::DegenerateGoal(given.to_owned()));
    }
    let graph = ChainGraph::build(solution, dict, store, given, target, epsilon)?;
    let src = graph.node(given).expect("given is a node");
    let dst = graph.node(target).expect("target is a node");
    let (_, path) = graph.least_cost_path(src, dst);
    let n = graph.len();

    let mut steps = Vec::with_capacity(path.len() - 1);
    let mut placed = BTreeSet::new();
    for pair in path.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let cost = graph.cost(a, b);
        let step = match graph.facts[a * n + b] {
            Some(j) => {
                placed.insert(j);
                ChainStep {
                    from: graph.nodes[a].clone(),
                    to: graph.nodes[b].clone(),
                    kind: LinkKind::Deductive,
                    fact: Some(step_fact(dict, j)),
                    cost,
                    weight: solution.weight(j),
                }
            }
            None => ChainStep {
                from: graph.nodes[a].clone(),
                to: graph.nodes[b].clone(),
                kind: LinkKind::Associational,
                fact: None,
                cost,
                weight: None,
            },
        };
        steps.push(step);
    }
    let total_cost = steps.iter().fold(0.0, |acc, s| acc + s.cost);
    let unplaced = solution.support().filter(|j| !placed.contains(j)).collect();
    Ok(ReasoningChain { steps, total_cost, residual_norm: solution.residual_norm, unplaced })
}

/// Relabels associational steps as analogical when an unplaced selected fact
/// has nearly the same offset: `|(b - a) - (tail - head)| <= pair_tol`. Each
/// donor explains at most one gap; the closest donor wins, ties to the lower
/// fact index.
pub fn classify_links(
    mut chain: ReasoningChain,
    solution: &SparseSolution,
    dict: &FactDictionary,
    store: &EmbeddingStore,
    pair_tol: f64,
) -> Result<ReasoningChain> {
    let mut available: Vec<usize> = chain.unplaced.clone();
    for step in chain.steps.iter_mut().filter(|s| s.kind == LinkKind::Associational) {
        let gap = sub(store.vector_of(&step.to)?, store.vector_of(&step.from)?);
        let mut best: Option<(f64, usize)> = None;
        for (slot, &j) in available.iter().enumerate() {
            let mismatch = norm(&sub(&gap, dict.atoms().column(j)));
            if mismatch <= pair_tol && best.is_none_or(|(m, _)| mismatch < m) {
                best = Some((mismatch, slot));
            }
        }
        if let Some((_, slot)) = best {
            let j = available.remove(slot);
            step.kind = LinkKind::Analogical;
            step.fact = Some(step_fact(dict, j));
            step.weight = solution.weight(j);
        }
    }
    chain.unplaced = available;
    Ok(chain)
}

/// Finds a chain `given => ... => target`: goal vector, sparse solve, ordering,
/// link classification.
pub fn prove(
    store: &EmbeddingStore,
    dict: &FactDictionary,
    given: &str,
    target: &str,
    config: &ReasonerConfig,
) -> Result<ReasoningChain> {
    Ok(prove_with_solution(store, dict, given, target, config)?.0)
}

/// [`prove`], also returning the raw solver output.
pub fn prove_with_solution(
    store: &EmbeddingStore,
    dict: &FactDictionary,
    given: &str,
    target: &str,
    config: &ReasonerConfig,
) -> Result<(ReasoningChain, SparseSolution)> {
    let goal = goal_vector(store, given, target)?;
    let solution = solve(dict.atoms(), &goal.vector, &config.solver)?;
    let chain = order_chain(&solution, dict, store, given, target, config.epsilon)?;
    let chain = classify_links(chain, &solution, dict, store, config.pair_tol)?;
    Ok((chain, solution))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedFact {
    pub index: usize,
    pub fact: Fact,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct AnswerRanking {
    /// Descending by weight, ties by fact index.
    pub entries: Vec<RankedFact>,
}

impl AnswerRanking {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    /// `weight<TAB>head<TAB>predicate<TAB>tail`, one line per predicate.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            for p in &e.fact.predicates {
                out.push_str(&format!("{:.2}\t{}\t{}\t{}\n", e.weight, e.fact.head, p, e.fact.tail));
            }
        }
        out
    }
}

/// Ranks the facts that explain `given => (one of candidates)`. The goal is
/// `sum(candidates) - given`, always solved with LASSO.
pub fn ask<S: AsRef<str>>(
    store: &EmbeddingStore,
    dict: &FactDictionary,
    given: &str,
    candidates: &[S],
    config: &SolverConfig,
) -> Result<AnswerRanking> {
    let goal = disjunctive_goal(store, given, candidates)?;
    let config = SolverConfig { method: Method::Lasso, ..*config };
    let solution = solve_lasso(dict.atoms(), &goal.vector, &config)?;
    Ok(rank(&solution, dict))
}

pub(crate) fn rank(solution: &SparseSolution, dict: &FactDictionary) -> AnswerRanking {
    let mut entries: Vec<RankedFact> = solution
        .weights
        .iter()
        .map(|(&index, &weight)| RankedFact { index, fact: dict.fact(index).clone(), weight })
        .collect();
    entries.sort_by(|a, b| b.weight.total_cmp(&a.weight).then(a.index.cmp(&b.index)));
    AnswerRanking { entries }
}
