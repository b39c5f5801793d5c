//! Centralized numerical tolerances.
//!
//! Every tolerance used by the crate lives here with a justification, so
//! that reviewing numerical robustness means reading one file. All
//! comparisons are *relative* where a natural scale exists; helper
//! functions compute the scaled thresholds so call sites stay uniform.

/// Relative tolerance for positive-semidefiniteness checks.
///
/// Eigenvalues (or pivots) of a matrix M are allowed to be as negative as
/// `-PSD_REL * (1 + ‖M‖∞)`: symmetric rank-k updates lose a few ulps per
/// step, and paths over thousands of steps accumulate roughly √steps of
/// them; 1e−8 is ~1e8 ulps of headroom, far above anything a correct
/// update sequence produces while far below any genuine indefiniteness a
/// wrong formula produces.
pub const PSD_REL: f64 = 1e-8;

/// General relative agreement tolerance for redundant computations of the
/// same quantity (two algebraically equal formulas, parametric vs
/// concrete evaluation, …). Both sides are O(1)-conditioned sweeps, so
/// everything beyond ~1e2 ulps of disagreement indicates a wrong formula
/// rather than roundoff; 1e−9 sits two decades above f64 roundoff and
/// well below any formula error.
pub const NUM_REL: f64 = 1e-9;

/// Condition-number ceiling for explicit matrix inversions (moment ↔
/// canonical conversions). Beyond 1e12 an inverse has fewer than 4
/// correct digits in f64, which downstream exact-path logic cannot
/// survive; such conversions are refused instead.
pub const COND_MAX: f64 = 1e12;

/// Relative threshold below which a *scalar* curvature (a value like
/// bᵀW̆b that gets inverted) is treated as structurally zero. The scale
/// passed by callers is an upper bound on the magnitudes multiplied into
/// the scalar; 1e−12 of that scale is ~1e4 ulps — generous for a sum of
/// a few thousand products, yet 8 decades below any genuine curvature in
/// a sanely scaled model.
pub const SCALAR_ZERO_REL: f64 = 1e-12;

/// Relative tolerance for knot bookkeeping: two σ² values closer than
/// `KNOT_REL * (1 + σ²)` are the same knot (zero-length interval). Knot
/// locations are computed by one division from O(1)-conditioned affine
/// coefficients, so they carry ~1 ulp of intrinsic error; 1e−9 relative
/// merges only genuinely coincident events.
pub const KNOT_REL: f64 = 1e-9;

/// Tolerance for membership of a value at a kink location when
/// classifying subgradients, relative to `1 + |location|`.
pub const KINK_REL: f64 = 1e-9;

/// Scaled PSD threshold: how negative an eigenvalue/pivot of a matrix
/// with ∞-norm `norm` may be.
#[inline]
pub fn psd_floor(norm: f64) -> f64 {
    -PSD_REL * (1.0 + norm)
}

/// Scaled structural-zero threshold for a scalar curvature given the
/// natural magnitude `scale` of its ingredients.
#[inline]
pub fn scalar_zero(scale: f64) -> f64 {
    SCALAR_ZERO_REL * (1.0 + scale.abs())
}

/// Scaled knot-coincidence threshold at parameter value `sigma2`.
#[inline]
pub fn knot_eps(sigma2: f64) -> f64 {
    KNOT_REL * (1.0 + sigma2.abs())
}

/// Relative error |a−b| / max(1, |a|, |b|).
#[inline]
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / 1.0_f64.max(a.abs()).max(b.abs())
}
