//! Exact regularization paths for piecewise-linear convex penalties on
//! linear state space models.
//!
//! This crate computes, *exactly*, the solution path σ² ↦ û(σ²) (or
//! σ² ↦ ŷ(σ²)) of
//!
//! ```text
//!   minimize   quadratic(x₀, u)  +  2σ² · Σₙ κₙ(vₙ)
//! ```
//!
//! where the quadratic part comes from a linear state space model
//! xₙ = A xₙ₋₁ + bₙ uₙ, yₙ = cₙᵀ xₙ (with optional quadratic end terms),
//! each κₙ is a piecewise-linear convex cost (absolute value, hinge,
//! Vapnik ε-insensitive, …), and vₙ is either the input uₙ
//! ("input-regularized", e.g. LASSO, trend filtering) or the output yₙ
//! ("output-regularized", e.g. support-vector regression, robust
//! median-style smoothing).
//!
//! The path is piecewise linear in σ² with finitely many knots. The
//! engine finds every knot exactly by running *parametric* Gaussian
//! message passing: for a fixed assignment of each cost to one of its
//! linear pieces (or kinks), all messages are low-degree polynomials in
//! σ², so the solution on the current piece and the exact σ² where a
//! coordinate leaves its piece follow in closed form.
//!
//! Module map:
//! - [`gaussmp`]: degenerate-aware Gaussian message primitives,
//! - [`plcost`]: piecewise-linear convex costs and the per-coordinate
//!   decision rules,
//! - [`ssm`]: the state space model container and standard presets,
//! - [`solvers`]: fixed-assignment MAP solvers (backward/forward and
//!   forward/backward sweeps, plus matrix specializations),
//! - [`parametric`]: the same sweeps with σ²-polynomial coefficients,
//! - [`path`]: knot-to-knot path construction and evaluation,
//! - [`oracle`]: an independent first-order solver and optimality
//!   checker used to validate everything else.

pub mod gaussmp;
pub mod oracle;
pub mod parametric;
pub mod path;
pub mod plcost;
pub mod solvers;
pub mod ssm;
pub mod tol;

/// Re-export of the linear-algebra backend so downstream users can build
/// the matrix arguments of [`ssm::StateSpaceModel`] constructors against
/// the exact version this crate was compiled with.
pub use nalgebra;

use thiserror::Error;

/// Unified error type for the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// A matrix that must be invertible is singular or too ill-conditioned.
    #[error("matrix not invertible (condition estimate {cond:.3e} exceeds limit)")]
    NotInvertible {
        /// ∞-norm condition estimate (or ∞ when exactly singular).
        cond: f64,
    },

    /// An operation received messages whose degeneracy pattern it does not
    /// support (e.g. both sides nondegenerate where one must be a point
    /// mass or flat).
    #[error("unsupported degeneracy pattern: {context}")]
    DegenerateMismatch {
        /// What was being combined.
        context: String,
    },

    /// A coordinate's subproblem is unbounded below: it sits on a sloped
    /// linear piece but the quadratic part carries no curvature along it.
    #[error("coordinate {index} is unidentifiable (no curvature along a sloped piece)")]
    Unidentifiable {
        /// Time index n of the offending coordinate (0-based).
        index: usize,
    },

    /// The conjunction of a segment's validity conditions is empty on
    /// σ² ≥ 0: the claimed active segment is wrong for every σ².
    #[error("active segment infeasible for every sigma2 >= 0 at coordinate {index}")]
    Infeasible {
        /// Time index n of the offending coordinate (0-based).
        index: usize,
    },

    /// Internal consistency failure: a segment's feasible σ²-interval ends
    /// before the knot it was entered at.
    #[error("bookkeeping bug: coordinate {index} exits at {exit:.6e} before current knot {knot:.6e}")]
    BookkeepingBug {
        /// Time index n of the offending coordinate (0-based).
        index: usize,
        /// Computed exit value.
        exit: f64,
        /// Knot the piece was entered at.
        knot: f64,
    },

    /// The path loop exceeded its iteration budget (10 × total segment
    /// count); indicates cycling, which the tie rules should prevent.
    #[error("path iteration cap reached after {iterations} events")]
    IterationCap {
        /// Number of events processed before giving up.
        iterations: usize,
    },

    /// A model failed validation.
    #[error("invalid model: {reason}")]
    InvalidModel {
        /// Human-readable description of the failed check.
        reason: String,
    },

    /// Invalid argument to a constructor or routine.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter {
        /// Which argument.
        name: &'static str,
        /// Why it was rejected.
        reason: String,
    },

    /// Two parametric quantities were combined in a way that would leave
    /// the closed family of degrees (e.g. a σ⁴ term).
    #[error("parameter degree violation: {context}")]
    DegreeViolation {
        /// What operation was attempted.
        context: String,
    },

    /// The startup minimization over the least-squares face is unbounded
    /// below (a sloped direction with no opposing slope).
    #[error("startup cost minimization unbounded along the least-squares face")]
    UnboundedStart,

    /// An iterative oracle failed to reach its required tolerance.
    #[error("oracle did not converge: residual {residual:.3e} after {iterations} iterations")]
    OracleDidNotConverge {
        /// Final stationarity residual.
        residual: f64,
        /// Iterations spent.
        iterations: usize,
    },

    /// Two boundary conditions of a kink became active simultaneously, so
    /// the next segment is ambiguous.
    #[error("ambiguous segment transition at coordinate {index} (both boundaries active)")]
    AmbiguousTransition {
        /// Time index n of the offending coordinate (0-based).
        index: usize,
    },

    /// Serialized path/cost data failed to parse.
    #[error("malformed data: {reason}")]
    Malformed {
        /// What was wrong.
        reason: String,
    },
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
