//! Viscosity solution, singular set, and candidate split loci.

pub mod locus;
pub mod solution;
pub mod split;

pub use locus::{CandidateLocus, Chain, Partner, Provenance};
pub use solution::{singular_set, singular_set_with, Evaluation, Lift, Minimizer, SourceKey};
pub use split::{
    audit_grid, Arrival, BalancedReport, BalancedWitness, CoverageWitness, HValue, LimitSet, LimitVector, PreimageSet,
    RhoSample, SplitContext, SplitLocusReport, SplitReport,
};
