//! Stokes data of twisted irregular classes for general linear groups, and the
//! twisted fission spaces built from them.
//!
//! The combinatorial side ([`exponent`], [`stokes`]) works with exact
//! cyclotomic coefficients so that Galois orbits, singular directions and
//! Stokes-group dimensions are computed exactly. The geometric side
//! ([`twisted`], [`fission`], [`fusion`]) realises the fission space
//! `A(Q) = G x H(del) x prod Sto_d` as an explicit complex matrix manifold and
//! verifies the twisted quasi-Hamiltonian axioms numerically.

pub mod cyclo;
pub mod diagram;
pub mod exponent;
pub mod fission;
pub mod fusion;
pub mod linalg;
pub mod presets;
pub mod qh;
pub mod report;
pub mod stokes;
pub mod twisted;

pub use exponent::{Angle, CircleClass, Coeff, Direction, Exponent, Rat};
pub use stokes::{BranchSystem, IrregularClass, StokesStructure, UntwistReport};

/// Tolerances and step sizes used across the numerical layer. Every threshold
/// the verification suite relies on is pinned here, not at call sites.
pub mod tol {
    /// Coefficient / direction equality in numeric (non-cyclotomic) mode.
    pub const NUMERIC_EQ: f64 = 1e-9;
    /// Quasi-Hamiltonian axiom residuals (QH1, QH2).
    pub const QH_AXIOM: f64 = 1e-6;
    /// Moment-map equivariance and two-form invariance residuals.
    pub const EQUIVARIANCE: f64 = 1e-9;
    /// Closure checks on twist cosets.
    pub const COSET: f64 = 1e-10;
    /// Exact-by-construction matrix identities (nilpotent exp/log round trips).
    pub const EXACT_MATRIX: f64 = 1e-12;
    /// Relative rank cutoff for kernel computations: sigma < RANK * sigma_max.
    pub const RANK: f64 = 1e-8;
    /// Central-difference step for first derivatives.
    pub const FD_STEP: f64 = 1e-5;
    /// Central-difference step for moment-map derivative checks.
    pub const FD_STEP_MOMENT: f64 = 1e-6;
    /// Step for the fourth-order directional derivatives inside the exterior
    /// derivative of the two-form (the two-form itself is evaluated
    /// analytically, so these are plain first derivatives).
    pub const FD_STEP_DOMEGA: f64 = 1e-3;
    /// Condition-number cap when sampling invertible matrices. The axiom
    /// residual thresholds are absolute, so sampled frames must stay well
    /// conditioned for the identities to be measurable above roundoff.
    pub const MAX_CONDITION: f64 = 20.0;
}
