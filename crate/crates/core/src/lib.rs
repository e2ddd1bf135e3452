//! Translation between quantum circuits and one-way measurement patterns.
//!
//! - [`circuit`]: gate-list circuits over H, T, T†, J(θ), CZ, ZZ and |+⟩.
//! - [`pattern`]: the command language, geometries and well-formedness.
//! - [`rewrite`]: standardization, Pauli simplification, signal shifting.
//! - [`stable_index`]: the stable-index circuit representation.
//! - [`construct`]: circuits to patterns.
//! - [`flow`]: modified-flow search by star decomposition.
//! - [`deps`]: GF(2) dependency checking.
//! - [`extract`]: patterns back to circuits.
//! - [`sim`]: a dense simulator used as a semantic oracle.
//! - [`text`]: the pattern and circuit text formats.
//! - [`gen`]: seeded random instances for tests and the CLI.
//! - [`fixtures`]: the shipped pattern and circuit corpus.
//! - [`cli`]: the `oneway` command-line front end.

pub mod circuit;
pub mod cli;
pub mod construct;
pub mod deps;
pub mod extract;
pub mod fixtures;
pub mod flow;
pub mod gen;
pub mod pattern;
pub mod rewrite;
pub mod sim;
pub mod stable_index;
pub mod text;
