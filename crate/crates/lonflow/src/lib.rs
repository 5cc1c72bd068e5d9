//! Local optima networks (LONs) for the quadratic assignment problem, and
//! information-flow analysis of their dynamics.
//!
//! The crate covers the full pipeline:
//!
//! * [`qap`]: instance parsing (plain-text QAPLIB layout), full and
//!   incremental objective evaluation.
//! * [`search`]: iterated local search and robust tabu search, instrumented
//!   so that every accepted transition between local optima is recorded.
//! * [`lon`]: the network itself. Nodes are local optima, directed edges are
//!   monotonic (non-worsening) transitions observed during sampling, edge
//!   weights count occurrences.
//! * [`laplacian`]: random-walk Laplacian of a LON, its asymptotic flow
//!   projection, and the influence/defluence metrics derived from it.
//! * [`metrics`]: classical network features of a LON (pagerank, strongly
//!   connected component summaries, flow toward the best optima).
//! * [`analysis`]: correlation of features against search performance, and
//!   tabular aggregation across instance collections.
//! * [`viz`]: Graphviz export of the condensed flow structure.
//!
//! Everything is deterministic given explicit seeds: sampling uses
//! counter-derived ChaCha8 streams and all collection orders are fixed, so
//! repeated runs produce byte-identical artifacts.

pub mod analysis;
pub mod laplacian;
pub mod lon;
pub mod metrics;
pub mod qap;
pub mod search;
pub mod viz;

#[doc(hidden)]
pub mod testing;
