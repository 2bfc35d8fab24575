//! Exact experiments on pair correlations of dilated integer sequences
//! `<alpha a(x)>`: sequence generation, pair-correlation sweeps, additive
//! energy, Fourier and GCD-sum diagnostics, Monte Carlo estimates over
//! `alpha`, and random sets whose pair correlations blow up.

pub mod arith;
pub mod bourgain;
pub mod cli;
pub mod energy;
pub mod error;
pub mod fourier;
pub mod metric;
pub mod paircorr;
pub mod report;
pub mod seqgen;

pub use arith::{parse_alpha, Alpha, AlphaSpec, FixedFrac, Ratio, UnitPoint};
pub use error::{Error, Result};
pub use seqgen::{generate, materialize, Sequence, SequenceSpec};
