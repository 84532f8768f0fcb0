//! Characteristics, singular sets and balanced split loci of
//! Hamilton-Jacobi equations `H(x, du) = 1`, `u = g` on the boundary, on
//! two-dimensional charts.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, the command-line
//! front end and parallel drivers live in the companion `splitlocus` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod analysis;
pub mod boundary;
pub mod characteristics;
pub mod exec;
pub mod family;
pub mod geometry;
pub mod math;
pub mod scenario;
pub mod splitlocus;

pub use boundary::{BoundaryData, BoundaryMesh, BoundarySample, Profile};
pub use characteristics::{CharState, CharacteristicVector, ConjugatePoint, ConjugateRecord, LipschitzEstimate, Ray, Trajectory};
pub use geometry::{BoundaryCurve, Chart, CurveFrame, Hamiltonian};
pub use math::{vec2, Mat2, Vec2};
pub use scenario::{Problem, Scenario, Tolerances};

/// Errors raised by the numerical routines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(&'static str),
    #[error("degenerate (zero) vector")]
    DegenerateVector,
    #[error("invalid chart parameters")]
    InvalidChart,
    #[error("boundary data incompatible at component {component}, sample {sample} (theta = {theta}): no inward unit characteristic")]
    IncompatibleBoundary { component: usize, sample: usize, theta: f64 },
    #[error("boundary data incompatible between samples {from:?} and {to:?} (excess {excess:e})")]
    IncompatiblePair { from: (usize, usize), to: (usize, usize), excess: f64 },
    #[error("time exceeds the exit time {exit} of the characteristic")]
    BeyondExit { exit: f64 },
    #[error("point lies outside the domain")]
    OutsideDomain,
    #[error("no admissible characteristic reaches the point")]
    NoPreimage,
    #[error("{count} admissible characteristics reach a point off the locus")]
    AmbiguousPreimage { count: usize },
    #[error("offsets incompatible: component {component} sample {sample} is reached more cheaply from another component (excess {excess:e})")]
    IncompatibleOffset { component: usize, sample: usize, excess: f64 },
    #[error("every representative path of generator {generator} crosses the locus at a non-cleave point")]
    ObstructedPath { generator: usize },
}
