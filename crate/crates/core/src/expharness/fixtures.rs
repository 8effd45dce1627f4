//! Planted instances shared by tests, the acceptance suite and the CLI demos.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::embeddings::{random_unit, EmbeddingStore, StoreBuilder};
use crate::kb::{build_dictionary, FactDictionary, Triple};
use crate::linalg::{add, axpy, dot, norm, scale};
use crate::Result;

/// `count` orthonormal vectors by Gram–Schmidt over Gaussian draws.
pub fn orthonormal<R: Rng + ?Sized>(rng: &mut R, count: usize, dimension: usize) -> Vec<Vec<f64>> {
    assert!(count <= dimension, "cannot fit {count} orthonormal vectors in {dimension} dimensions");
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(count);
    while basis.len() < count {
        let mut v = random_unit(rng, dimension);
        for b in &basis {
            let c = dot(&v, b);
            axpy(-c, b, &mut v);
        }
        let n = norm(&v);
        if n > 1e-8 {
            basis.push(scale(&v, 1.0 / n));
        }
    }
    basis
}

/// Store with `bear = w + pr`, `hiker = w + t`, `shark = s + pr`,
/// `snorkeler = s + t` over orthonormal `w, s, pr, t`, plus `distractors`
/// random unit vectors `d0..`. Kept unnormalized so the offsets stay exact.
pub fn planted_analogy(distractors: usize, dimension: usize, seed: u64) -> Result<EmbeddingStore> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let [w, s, pr, t]: [Vec<f64>; 4] = orthonormal(&mut rng, 4, dimension).try_into().expect("four vectors");
    let mut b = StoreBuilder::with_capacity(dimension, false, distractors + 4);
    b.push("bear", &add(&w, &pr))?;
    b.push("hiker", &add(&w, &t))?;
    b.push("shark", &add(&s, &pr))?;
    b.push("snorkeler", &add(&s, &t))?;
    for i in 0..distractors {
        b.push(format!("d{i}"), &random_unit(&mut rng, dimension))?;
    }
    Ok(b.build())
}

pub const COLOURS: [&str; 6] = ["red", "green", "yellow", "blue", "purple", "orange"];
pub const APPLE_COLOURS: [&str; 3] = ["red", "green", "yellow"];

/// `apple` with three `hasColor` facts among six clustered colour terms,
/// plus `distractor_facts` random facts over entities `e0..` that touch
/// neither apple nor any colour. Colours are `center + spread * noise`.
pub fn apple_colours(distractor_facts: usize, dimension: usize, seed: u64) -> Result<(EmbeddingStore, FactDictionary)> {
    const SPREAD: f64 = 0.8;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let entities = (distractor_facts / 2).max(10);
    let mut b = StoreBuilder::with_capacity(dimension, true, entities + 7);
    b.push("apple", &random_unit(&mut rng, dimension))?;
    let center = random_unit(&mut rng, dimension);
    for c in COLOURS {
        let noise = random_unit(&mut rng, dimension);
        b.push(c, &add(&center, &scale(&noise, SPREAD)))?;
    }
    for i in 0..entities {
        b.push(format!("e{i}"), &random_unit(&mut rng, dimension))?;
    }
    let store = b.build();

    let mut triples: Vec<Triple> = APPLE_COLOURS.iter().map(|c| Triple::new("apple", "hasColor", *c)).collect::<Result<_>>()?;
    let wanted = distractor_facts.min(entities * (entities - 1));
    let mut seen = std::collections::HashSet::new();
    while seen.len() < wanted {
        let pair = sample(&mut rng, entities, 2);
        let (h, t) = (pair.index(0), pair.index(1));
        if seen.insert((h, t)) {
            triples.push(Triple::new(format!("e{h}"), "rel", format!("e{t}"))?);
        }
    }
    let dict = build_dictionary(&store, &triples, None)?;
    Ok((store, dict))
}

/// Entities `c0..c{len}` joined by a chain of `len` facts `(c{i}, next, c{i+1})`,
/// embedded among `distractors` random entities and `distractor_facts` random
/// facts between them.
pub fn planted_chain(
    len: usize,
    distractors: usize,
    distractor_facts: usize,
    dimension: usize,
    seed: u64,
) -> Result<(EmbeddingStore, FactDictionary)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = StoreBuilder::with_capacity(dimension, true, len + 1 + distractors);
    for i in 0..=len {
        b.push(format!("c{i}"), &random_unit(&mut rng, dimension))?;
    }
    for i in 0..distractors {
        b.push(format!("x{i}"), &random_unit(&mut rng, dimension))?;
    }
    let store = b.build();
    let mut triples: Vec<Triple> =
        (0..len).map(|i| Triple::new(format!("c{i}"), "next", format!("c{}", i + 1))).collect::<Result<_>>()?;
    let mut seen = std::collections::HashSet::new();
    if distractors >= 2 {
        let wanted = distractor_facts.min(distractors * (distractors - 1));
        while seen.len() < wanted {
            let pair = sample(&mut rng, distractors, 2);
            if seen.insert((pair.index(0), pair.index(1))) {
                triples.push(Triple::new(format!("x{}", pair.index(0)), "rel", format!("x{}", pair.index(1)))?);
            }
        }
    }
    let dict = build_dictionary(&store, &triples, None)?;
    Ok((store, dict))
}
