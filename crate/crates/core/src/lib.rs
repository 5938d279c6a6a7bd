//! Pattern Builder workbench.
//!
//! A 10×10 binary-grid DSL, bottom-up enumerative synthesis with
//! observational-equivalence pruning, online library-learning strategies
//! scored by compression utility, curriculum encoding and validation, a
//! symmetry-biased explorer, a harness for language-model synthesis and the
//! metrics pipeline that compares all of them.

pub mod analysis;
pub mod curriculum;
pub mod error;
pub mod explore;
pub mod export;
pub mod grid;
pub mod hardness;
pub mod learn;
pub mod llm;
pub mod models;
pub mod program;
pub mod synth;

pub use error::{Error, Result};
pub use grid::{Axis, AxisSet, BinaryOp, Grid, Operator, Primitive, UnaryOp};
pub use program::{
    canonical_key, evaluate, expand, size, subprogram_occurrences, HelperEntry, HelperId, Library,
    MatchMode, Path, Program, SizeReport,
};
pub use synth::{
    enumerate_counts, solve, trace_of, DerivationTrace, Outcome, SynthesisBudget,
    SynthesisResult, TraceMode,
};
pub use learn::{
    abstract_gl, abstract_pl, abstract_prospective, abstract_rc, compression_utility,
    oracle_helpers, AbstractionConfig, HelperCandidateScore, Strategy,
};
