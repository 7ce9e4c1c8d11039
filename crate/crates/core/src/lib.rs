//! Proof checking for the isosceles base-angles theorem and its converse in
//! neutral geometry.
//!
//! - [`geom`]: canonical points, segments, angles and facts.
//! - [`rules`] and [`kernel`]: the inference rules and the proof checker.
//! - [`proofscript`]: the text format, its parser, and the bundled corpus.
//! - [`depgraph`]: theorem dependencies, cycles, axiom bases.
//! - [`models`]: numeric semantics in the Euclidean plane, the Poincaré disk
//!   and the sphere, with a model checker.
//! - [`soundness`]: per-rule numeric soundness harness.

pub mod geom;
pub mod kernel;
pub mod models;
pub mod rules;
pub mod soundness;
pub mod depgraph;
pub mod oracles;
pub mod pipeline;
pub mod proofscript;
