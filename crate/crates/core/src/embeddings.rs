//! The semantic vector space: word-vector loading, synthetic spaces, cosine
//! similarity, nearest neighbours, category vectors and analogy offsets.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::io::{BufRead, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::linalg::{add, dot, norm, scale, sub};
use crate::{Error, Result};

/// Vocabulary of terms mapped to fixed-dimension vectors. Immutable once built.
#[derive(Debug, Clone)]
pub struct EmbeddingStore {
    dimension: usize,
    terms: Vec<String>,
    index: HashMap<String, usize>,
    data: Vec<f64>,
    norms: Vec<f64>,
    normalized: bool,
}

/// A term and its cosine similarity to a query.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Neighbor {
    pub term: String,
    pub similarity: f64,
}

/// Accumulates terms one at a time, enforcing the store invariants.
#[derive(Debug)]
pub struct StoreBuilder {
    store: EmbeddingStore,
}

impl StoreBuilder {
    pub fn new(dimension: usize, normalize: bool) -> Self {
        Self {
            store: EmbeddingStore {
                dimension,
                terms: Vec::new(),
                index: HashMap::new(),
                data: Vec::new(),
                norms: Vec::new(),
                normalized: normalize,
            },
        }
    }

    pub fn with_capacity(dimension: usize, normalize: bool, count: usize) -> Self {
        let mut b = Self::new(dimension, normalize);
        b.store.terms.reserve(count);
        b.store.index.reserve(count);
        b.store.data.reserve(count * dimension);
        b.store.norms.reserve(count);
        b
    }

    pub fn push(&mut self, term: impl Into<String>, vector: &[f64]) -> Result<()> {
        let term = term.into();
        let s = &mut self.store;
        if vector.len() != s.dimension {
            return Err(Error::DimensionMismatch { expected: s.dimension, found: vector.len() });
        }
        if s.index.contains_key(&term) {
            return Err(Error::DuplicateTerm(term));
        }
        let n = norm(vector);
        if s.normalized {
            if n == 0.0 || !n.is_finite() {
                return Err(Error::ZeroVector(term));
            }
            let start = s.data.len();
            s.data.extend(vector.iter().map(|x| x / n));
            s.norms.push(norm(&s.data[start..]));
        } else {
            s.data.extend_from_slice(vector);
            s.norms.push(n);
        }
        s.index.insert(term.clone(), s.terms.len());
        s.terms.push(term);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.store.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.store.terms.is_empty()
    }

    pub fn build(self) -> EmbeddingStore {
        self.store
    }
}

impl EmbeddingStore {
    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Terms in insertion order.
    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn contains(&self, term: &str) -> bool {
        self.index.contains_key(term)
    }

    pub fn index_of(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    pub fn term(&self, i: usize) -> &str {
        &self.terms[i]
    }

    pub fn vector(&self, i: usize) -> &[f64] {
        &self.data[i * self.dimension..(i + 1) * self.dimension]
    }

    pub fn vector_of(&self, term: &str) -> Result<&[f64]> {
        self.index_of(term)
            .map(|i| self.vector(i))
            .ok_or_else(|| Error::UnknownTerm(term.to_owned()))
    }

    /// Returns a new store with `term` appended. Used to register category
    /// vectors for concepts that have no single vocabulary term.
    pub fn with_term(self, term: impl Into<String>, vector: &[f64]) -> Result<Self> {
        let mut b = StoreBuilder { store: self };
        b.push(term, vector)?;
        Ok(b.build())
    }

    /// The `k` terms most similar to `query`, by descending cosine, ties
    /// broken by lexicographic term order.
    pub fn nearest(&self, query: &[f64], k: usize) -> Result<Vec<Neighbor>> {
        self.nearest_excluding(query, k, &[])
    }

    pub fn nearest_excluding(&self, query: &[f64], k: usize, exclude: &[&str]) -> Result<Vec<Neighbor>> {
        if query.len() != self.dimension {
            return Err(Error::DimensionMismatch { expected: self.dimension, found: query.len() });
        }
        let qn = norm(query);
        if qn == 0.0 {
            return Err(Error::Domain("query vector is zero".into()));
        }
        let mut scored: Vec<(f64, usize)> = (0..self.len())
            .filter(|&i| !exclude.contains(&self.terms[i].as_str()))
            .map(|i| {
                let vn = self.norms[i];
                let sim = if vn == 0.0 { 0.0 } else { dot(query, self.vector(i)) / (qn * vn) };
                (sim.clamp(-1.0, 1.0), i)
            })
            .collect();
        let order = |a: &(f64, usize), b: &(f64, usize)| -> Ordering {
            b.0.total_cmp(&a.0).then_with(|| self.terms[a.1].cmp(&self.terms[b.1]))
        };
        let k = k.min(scored.len());
        if k < scored.len() && k > 0 {
            scored.select_nth_unstable_by(k - 1, order);
            scored.truncate(k);
        }
        scored.sort_by(order);
        scored.truncate(k);
        Ok(scored
            .into_iter()
            .map(|(similarity, i)| Neighbor { term: self.terms[i].clone(), similarity })
            .collect())
    }

    /// Unit-normalized mean of the member vectors.
    pub fn category_vector<S: AsRef<str>>(&self, members: &[S]) -> Result<Vec<f64>> {
        if members.is_empty() {
            return Err(Error::InvalidArgument("category needs at least one member".into()));
        }
        let mut sum = vec![0.0; self.dimension];
        for m in members {
            sum = add(&sum, self.vector_of(m.as_ref())?);
        }
        let mean = scale(&sum, 1.0 / members.len() as f64);
        let n = norm(&mean);
        if n == 0.0 {
            return Err(Error::Domain("category members cancel to a zero mean".into()));
        }
        Ok(scale(&mean, 1.0 / n))
    }

    /// Solves `a : b :: c : ?` by ranking neighbours of `b - a + c`, with the
    /// three inputs excluded.
    pub fn analogy(&self, a: &str, b: &str, c: &str, k: usize) -> Result<Vec<Neighbor>> {
        let va = self.vector_of(a)?;
        let vb = self.vector_of(b)?;
        let vc = self.vector_of(c)?;
        let query = add(&sub(vb, va), vc);
        self.nearest_excluding(&query, k, &[a, b, c])
    }

    /// Writes the store in word-vector text format.
    pub fn write_text<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{} {}", self.len(), self.dimension)?;
        for (i, term) in self.terms.iter().enumerate() {
            write!(out, "{term}")?;
            for x in self.vector(i) {
                write!(out, " {x}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Cosine similarity. Errors on zero vectors or mismatched dimensions.
pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), found: b.len() });
    }
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(Error::Domain("cosine of a zero vector".into()));
    }
    Ok((dot(a, b) / (na * nb)).clamp(-1.0, 1.0))
}

/// Parses the word-vector text format: a `<count> <dimension>` header, then
/// one `<term> <floats...>` line per entry.
pub fn load_embeddings<R: BufRead>(source: R, normalize: bool) -> Result<EmbeddingStore> {
    let mut lines = source.lines().enumerate();
    let (count, dimension) = loop {
        let Some((i, line)) = lines.next() else {
            return Err(Error::Parse { line: 1, message: "missing header".into() });
        };
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = || Error::Parse {
            line: i + 1,
            message: format!("expected header `<count> <dimension>`, got `{line}`"),
        };
        let mut parts = line.split_whitespace();
        let count: usize = parts.next().and_then(|s| s.parse().ok()).ok_or_else(parse_err)?;
        let dim: usize = parts.next().and_then(|s| s.parse().ok()).ok_or_else(parse_err)?;
        if parts.next().is_some() || dim == 0 {
            return Err(parse_err());
        }
        break (count, dim);
    };

    let mut builder = StoreBuilder::with_capacity(dimension, normalize, count);
    let mut vector = Vec::with_capacity(dimension);
    let mut last_line = 1;
    for (i, line) in lines {
        let lineno = i + 1;
        last_line = lineno;
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let term = parts.next().expect("nonempty line has a first token");
        vector.clear();
        for tok in parts {
            let v: f64 = tok.parse().map_err(|_| Error::Parse {
                line: lineno,
                message: format!("`{tok}` is not a number"),
            })?;
            vector.push(v);
        }
        if vector.len() != dimension {
            return Err(Error::Parse {
                line: lineno,
                message: format!("expected {dimension} components for `{term}`, found {}", vector.len()),
            });
        }
        builder.push(term, &vector)?;
    }
    if builder.len() != count {
        return Err(Error::Parse {
            line: last_line,
            message: format!("header declares {count} entries, found {}", builder.len()),
        });
    }
    Ok(builder.build())
}

/// Deterministic isotropic store: terms `t0..t{count-1}`, each a standard
/// normal draw scaled to unit norm.
pub fn synth_embeddings(count: usize, dimension: usize, seed: u64) -> Result<EmbeddingStore> {
    if count == 0 {
        return Err(Error::InvalidArgument("count must be at least 1".into()));
    }
    if dimension < 2 {
        return Err(Error::InvalidArgument("dimension must be at least 2".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut builder = StoreBuilder::with_capacity(dimension, true, count);
    for i in 0..count {
        let v = random_unit(&mut rng, dimension);
        builder.push(format!("t{i}"), &v)?;
    }
    Ok(builder.build())
}

/// A standard-normal draw scaled to unit norm.
pub fn random_unit<R: rand::Rng + ?Sized>(rng: &mut R, dimension: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dimension).map(|_| StandardNormal.sample(&mut *rng)).collect();
        let n = norm(&v);
        if n > 0.0 {
            return scale(&v, 1.0 / n);
        }
    }
}
