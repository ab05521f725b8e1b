//! Shift-invariant finitely-additive measures on an infinite-dimensional
//! Hilbert space, Weyl operators acting on block indicators, and quantum
//! random walks whose Chernoff limits are diffusion and oscillator semigroups.
//!
//! Every quantity is reduced to an infinite product of one-dimensional
//! closed-form kernels evaluated with a certified tail enclosure.

pub mod blocks;
pub mod error;
pub mod experiments;
pub mod kernels;
pub mod operators;
pub mod seq;
pub mod walks;

pub use blocks::{inner, norm_sq, pair_modulated, pair_plain, Block, BlockSpec, CertifiedValue, ModulatedBlock, SimpleFn};
pub use error::{Error, Result};
pub use experiments::{persist, run_scenario, RunRecord, Scenario, Summary, SCENARIO_NAMES};
pub use kernels::Interval1D;
pub use operators::{DiagLabel, DiagOp, FourierNorm, HypothesisReport};
pub use seq::{pow_seq, ratio_seq, Divergence, ParamSeq, SeqCombo, SeqKind, TailSum};
pub use walks::{Estimate, IncrementDist, IncrementKind, WalkMode, WalkSpec};
