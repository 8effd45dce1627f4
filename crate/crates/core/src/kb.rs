//! Knowledge-base facts and their vector images.
//!
//! A triple `(head, predicate, tail)` is read as the implication
//! `head => tail` and embedded as `vec(tail) - vec(head)`. Predicates do not
//! enter the vector calculation; they are carried along for reporting and for
//! restricting which facts a query may use.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::io::{BufRead, Write};

use serde::Serialize;

use crate::embeddings::EmbeddingStore;
use crate::linalg::{add, sub, AtomMatrix};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Triple {
    pub head: String,
    pub predicate: String,
    pub tail: String,
}

impl Triple {
    pub fn new(head: impl Into<String>, predicate: impl Into<String>, tail: impl Into<String>) -> Result<Self> {
        let t = Self { head: head.into(), predicate: predicate.into(), tail: tail.into() };
        if t.head.is_empty() || t.predicate.is_empty() || t.tail.is_empty() {
            return Err(Error::InvalidArgument(format!("triple has an empty field: {t}")));
        }
        if t.head == t.tail {
            return Err(Error::SelfLoop(t.head));
        }
        Ok(t)
    }
}

impl std::fmt::Display for Triple {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {}, {})", self.head, self.predicate, self.tail)
    }
}

/// One dictionary column: an ordered entity pair and every predicate the
/// knowledge base states between them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Fact {
    pub head: String,
    pub tail: String,
    pub predicates: Vec<String>,
}

impl Fact {
    pub fn predicate_label(&self) -> String {
        self.predicates.join(",")
    }
}

impl std::fmt::Display for Fact {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {}, {})", self.head, self.predicate_label(), self.tail)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MissingPolicy {
    #[default]
    Skip,
    Error,
}

#[derive(Debug, Clone, Default)]
pub struct Ingested {
    pub triples: Vec<Triple>,
    /// Triples dropped under [`MissingPolicy::Skip`] because a term was not in the store.
    pub skipped: usize,
}

/// Reads `head<TAB>predicate<TAB>tail` lines. Blank lines and lines starting
/// with `#` are ignored.
pub fn ingest_triples<R: BufRead>(source: R, store: &EmbeddingStore, on_missing: MissingPolicy) -> Result<Ingested> {
    let mut out = Ingested::default();
    for (i, line) in source.lines().enumerate() {
        let lineno = i + 1;
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(Error::Parse {
                line: lineno,
                message: format!("expected 3 tab-separated fields, found {}", fields.len()),
            });
        }
        let triple = Triple::new(fields[0], fields[1], fields[2]).map_err(|e| Error::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        let missing = [&triple.head, &triple.tail].into_iter().find(|t| !store.contains(t));
        match (missing, on_missing) {
            (None, _) => out.triples.push(triple),
            (Some(_), MissingPolicy::Skip) => out.skipped += 1,
            (Some(term), MissingPolicy::Error) => {
                return Err(Error::Unresolved { line: lineno, term: term.clone() });
            }
        }
    }
    Ok(out)
}

/// `vec(tail) - vec(head)`.
pub fn fact_vector(store: &EmbeddingStore, t: &Triple) -> Result<Vec<f64>> {
    pair_vector(store, &t.head, &t.tail)
}

pub(crate) fn pair_vector(store: &EmbeddingStore, head: &str, tail: &str) -> Result<Vec<f64>> {
    Ok(sub(store.vector_of(tail)?, store.vector_of(head)?))
}

/// The solver dictionary. Column `j` is `vec(tail_j) - vec(head_j)`; columns
/// are unnormalized so that weight-one chains telescope exactly.
#[derive(Debug, Clone)]
pub struct FactDictionary {
    facts: Vec<Fact>,
    triples: Vec<Triple>,
    atoms: AtomMatrix,
    by_pair: HashMap<(String, String), usize>,
    predicate_filter: Option<BTreeSet<String>>,
}

impl FactDictionary {
    pub fn len(&self) -> usize {
        self.facts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facts.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.atoms.dim()
    }

    pub fn atoms(&self) -> &AtomMatrix {
        &self.atoms
    }

    pub fn facts(&self) -> &[Fact] {
        &self.facts
    }

    pub fn fact(&self, j: usize) -> &Fact {
        &self.facts[j]
    }

    /// Deduplicated triples in ingestion order, all predicates retained.
    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn predicate_filter(&self) -> Option<&BTreeSet<String>> {
        self.predicate_filter.as_ref()
    }

    pub fn column_of(&self, head: &str, tail: &str) -> Option<usize> {
        self.by_pair.get(&(head.to_owned(), tail.to_owned())).copied()
    }

    /// Diagnostic export: one row per (column, predicate).
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["fact", "head", "predicate", "tail"])?;
        for (j, f) in self.facts.iter().enumerate() {
            for p in &f.predicates {
                w.write_record([j.to_string().as_str(), &f.head, p, &f.tail])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Builds the dictionary from resolvable triples, keeping only predicates in
/// `predicate_filter` when one is given. Exact duplicates are dropped and
/// triples sharing an entity pair share one column.
pub fn build_dictionary(
    store: &EmbeddingStore,
    triples: &[Triple],
    predicate_filter: Option<&BTreeSet<String>>,
) -> Result<FactDictionary> {
    let mut seen: HashSet<&Triple> = HashSet::new();
    let mut dict = FactDictionary {
        facts: Vec::new(),
        triples: Vec::new(),
        atoms: AtomMatrix::new(store.dimension()),
        by_pair: HashMap::new(),
        predicate_filter: predicate_filter.cloned(),
    };
    for t in triples {
        if predicate_filter.is_some_and(|f| !f.contains(&t.predicate)) {
            continue;
        }
        if !seen.insert(t) {
            continue;
        }
        if t.head == t.tail {
            return Err(Error::SelfLoop(t.head.clone()));
        }
        let key = (t.head.clone(), t.tail.clone());
        match dict.by_pair.get(&key) {
            Some(&j) => dict.facts[j].predicates.push(t.predicate.clone()),
            None => {
                let v = fact_vector(store, t)?;
                dict.atoms.push(&v)?;
                dict.by_pair.insert(key, dict.facts.len());
                dict.facts.push(Fact {
                    head: t.head.clone(),
                    tail: t.tail.clone(),
                    predicates: vec![t.predicate.clone()],
                });
            }
        }
        dict.triples.push(t.clone());
    }
    if dict.is_empty() {
        return Err(Error::EmptyDictionary);
    }
    Ok(dict)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum GoalTarget {
    Single(String),
    Candidates(Vec<String>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Goal {
    pub given: String,
    pub target: GoalTarget,
    pub vector: Vec<f64>,
}

/// `vec(target) - vec(given)`: the vector a chain `given => ... => target` sums to.
pub fn goal_vector(store: &EmbeddingStore, given: &str, target: &str) -> Result<Goal> {
    let vg = store.vector_of(given)?;
    let vp = store.vector_of(target)?;
    if given == target {
        return Err(Error::DegenerateGoal(given.to_owned()));
    }
    Ok(Goal { given: given.to_owned(), target: GoalTarget::Single(target.to_owned()), vector: sub(vp, vg) })
}

/// `sum_i vec(candidate_i) - vec(given)`: asks which of the candidates follow from `given`.
pub fn disjunctive_goal<S: AsRef<str>>(store: &EmbeddingStore, given: &str, candidates: &[S]) -> Result<Goal> {
    if candidates.is_empty() {
        return Err(Error::InvalidArgument("candidate list is empty".into()));
    }
    let vg = store.vector_of(given)?;
    let mut sum = vec![0.0; store.dimension()];
    for c in candidates {
        let c = c.as_ref();
        if c == given {
            return Err(Error::InvalidArgument(format!("`{given}` is both given and a candidate")));
        }
        sum = add(&sum, store.vector_of(c)?);
    }
    let vector = sub(&sum, vg);
    let target = GoalTarget::Candidates(candidates.iter().map(|c| c.as_ref().to_owned()).collect());
    Ok(Goal { given: given.to_owned(), target, vector })
}
