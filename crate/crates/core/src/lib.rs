//! Chain finding over a knowledge graph embedded in a semantic vector space.
//!
//! Facts `(head, predicate, tail)` become vectors `tail - head`. A query
//! `given => target` becomes the goal `target - given`, and a sparse
//! decomposition of the goal over the fact vectors picks out the facts of a
//! connecting chain: interior entities cancel when the chain is summed. The
//! selected facts are then ordered by a least-cost path search in which
//! fact-backed edges are nearly free and missing links are paid for by
//! semantic distance.
//!
//! Modules:
//! - [`embeddings`]: the vector space (loading, synthesis, similarity, analogy)
//! - [`kb`]: triples, fact vectors, the solver dictionary, goal vectors
//! - [`solver`]: OMP, coordinate-descent LASSO and an exhaustive oracle
//! - [`reasoner`]: `prove` and `ask`, chain ordering and link classification
//! - [`expharness`]: recovery experiments and the exact path oracle

pub mod embeddings;
mod error;
pub mod expharness;
pub mod kb;
pub mod linalg;
pub mod reasoner;
pub mod solver;

pub use error::{Error, Result};
