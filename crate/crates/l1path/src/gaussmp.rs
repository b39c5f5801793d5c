//! Degeneracy-aware Gaussian message primitives.
//!
//! Messages carry either moment parameters (m, V) or canonical
//! parameters (ξ, W). Degeneracy is *structural*, never inferred from
//! near-zero numbers: a point mass is a moment message whose V is the
//! exact zero matrix, a flat (uninformative, possibly tilted) message is
//! a canonical message whose W is the exact zero matrix with ξ carrying
//! the tilt. The two degenerate classes are closed under the operations
//! the sweeps need, which is what makes exact path computation possible —
//! no near-singular inversions ever happen silently.
//!
//! The scalar messages produced by cost segments
//! ([`crate::plcost::SegmentMsg`]) convert losslessly into 1-dimensional
//! messages here.

use nalgebra::{DMatrix, DVector};

use crate::plcost::SegmentMsg;
use crate::tol;
use crate::{Error, Result};

/// A Gaussian message in one of its two parameterizations.
#[derive(Debug, Clone, PartialEq)]
pub enum GaussianMsg {
    /// Moment parameterization; `v == 0` encodes a point mass at `m`.
    Moment {
        /// Mean.
        m: DVector<f64>,
        /// Covariance (positive semidefinite).
        v: DMatrix<f64>,
    },
    /// Canonical parameterization; `w == 0` encodes a flat message whose
    /// density is proportional to exp(ξᵀx).
    Canonical {
        /// Canonical mean W·m (tilt when flat).
        xi: DVector<f64>,
        /// Precision (positive semidefinite).
        w: DMatrix<f64>,
    },
}

/// Posterior moments of a variable.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorPair {
    /// Posterior mean.
    pub m: DVector<f64>,
    /// Posterior covariance.
    pub v: DMatrix<f64>,
}

/// Dual (tilde) parameters of a variable: the gradient-like quantities
/// the backward sweeps propagate.
#[derive(Debug, Clone, PartialEq)]
pub struct DualPair {
    /// Dual mean ξ̃.
    pub xi: DVector<f64>,
    /// Dual precision W̃ (computed for completeness; the sweeps only
    /// need ξ̃).
    pub w: DMatrix<f64>,
}

/// Outcome of absorbing a scalar observation through a row vector.
#[derive(Debug, Clone)]
pub struct ObserveOutcome {
    /// Updated moment message.
    pub msg: GaussianMsg,
    /// The scalar gain G (0 for a flat observation message).
    pub gain: f64,
    /// The scalar correction g, so the mean update is m + Vc·g.
    pub correction: f64,
}

/// Outcome of absorbing a scalar input through a column vector.
#[derive(Debug, Clone)]
pub struct InputOutcome {
    /// Updated canonical message.
    pub msg: GaussianMsg,
    /// The scalar gain H (0 for a point-mass input message).
    pub gain: f64,
    /// The shift vector h, so ξ ← ξ − W h.
    pub shift: DVector<f64>,
}

impl GaussianMsg {
    /// Moment-form message.
    pub fn moment(m: DVector<f64>, v: DMatrix<f64>) -> Self {
        assert_eq!(v.nrows(), m.len());
        assert_eq!(v.ncols(), m.len());
        GaussianMsg::Moment { m, v }
    }

    /// Canonical-form message.
    pub fn canonical(xi: DVector<f64>, w: DMatrix<f64>) -> Self {
        assert_eq!(w.nrows(), xi.len());
        assert_eq!(w.ncols(), xi.len());
        GaussianMsg::Canonical { xi, w }
    }

    /// Point mass at `m` (zero covariance, structural).
    pub fn point_mass(m: DVector<f64>) -> Self {
        let d = m.len();
        GaussianMsg::Moment { m, v: DMatrix::zeros(d, d) }
    }

    /// Flat message with tilt ξ (zero precision, structural).
    pub fn flat(xi: DVector<f64>) -> Self {
        let d = xi.len();
        GaussianMsg::Canonical { xi, w: DMatrix::zeros(d, d) }
    }

    /// Dimension of the variable.
    pub fn dim(&self) -> usize {
        match self {
            GaussianMsg::Moment { m, .. } => m.len(),
            GaussianMsg::Canonical { xi, .. } => xi.len(),
        }
    }

    /// Structural point-mass test: moment form with exactly zero V.
    pub fn is_point_mass(&self) -> bool {
        matches!(self, GaussianMsg::Moment { v, .. } if v.iter().all(|&x| x == 0.0))
    }

    /// Structural flat test: canonical form with exactly zero W.
    pub fn is_flat(&self) -> bool {
        matches!(self, GaussianMsg::Canonical { w, .. } if w.iter().all(|&x| x == 0.0))
    }

    /// Convert to canonical form, inverting V.
    ///
    /// # Errors
    /// [`Error::NotInvertible`] if V is singular or its condition
    /// estimate exceeds the conversion ceiling.
    pub fn to_canonical(&self) -> Result<GaussianMsg> {
        match self {
            GaussianMsg::Canonical { .. } => Ok(self.clone()),
            GaussianMsg::Moment { m, v } => {
                let w = invert_checked(v)?;
                let xi = &w * m;
                Ok(GaussianMsg::Canonical { xi, w })
            }
        }
    }

    /// Convert to moment form, inverting W.
    ///
    /// # Errors
    /// [`Error::NotInvertible`] if W is singular or its condition
    /// estimate exceeds the conversion ceiling.
    pub fn to_moment(&self) -> Result<GaussianMsg> {
        match self {
            GaussianMsg::Moment { .. } => Ok(self.clone()),
            GaussianMsg::Canonical { xi, w } => {
                let v = invert_checked(w)?;
                let m = &v * xi;
                Ok(GaussianMsg::Moment { m, v })
            }
        }
    }
}

impl From<&SegmentMsg> for GaussianMsg {
    fn from(s: &SegmentMsg) -> Self {
        match *s {
            SegmentMsg::Point { mean } => {
                GaussianMsg::point_mass(DVector::from_element(1, mean))
            }
            SegmentMsg::Flat { xi } => GaussianMsg::flat(DVector::from_element(1, xi)),
        }
    }
}

/// Invert with an ∞-norm condition estimate guard.
fn invert_checked(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let norm = a.amax();
    let inv = a.clone().try_inverse().ok_or(Error::NotInvertible { cond: f64::INFINITY })?;
    let cond = if norm == 0.0 { f64::INFINITY } else { norm * inv.amax() * a.nrows() as f64 };
    if cond > tol::COND_MAX {
        return Err(Error::NotInvertible { cond });
    }
    Ok(inv)
}

/// Fuse two canonical messages at an equality node: W₃ = W₁ + W₂,
/// ξ₃ = ξ₁ + ξ₂.
///
/// # Errors
/// [`Error::DegenerateMismatch`] unless both inputs are canonical.
pub fn equality_fwd(a: &GaussianMsg, b: &GaussianMsg) -> Result<GaussianMsg> {
    match (a, b) {
        (GaussianMsg::Canonical { xi: xa, w: wa }, GaussianMsg::Canonical { xi: xb, w: wb }) => {
            Ok(GaussianMsg::Canonical { xi: xa + xb, w: symmetrize(&(wa + wb)) })
        }
        _ => Err(Error::DegenerateMismatch {
            context: "equality_fwd requires canonical-form messages".to_string(),
        }),
    }
}

/// Propagate two moment messages through an addition node: m₃ = m₁ + m₂,
/// V₃ = V₁ + V₂.
///
/// # Errors
/// [`Error::DegenerateMismatch`] unless both inputs are moment-form.
pub fn addition_fwd(a: &GaussianMsg, b: &GaussianMsg) -> Result<GaussianMsg> {
    match (a, b) {
        (GaussianMsg::Moment { m: ma, v: va }, GaussianMsg::Moment { m: mb, v: vb }) => {
            Ok(GaussianMsg::Moment { m: ma + mb, v: symmetrize(&(va + vb)) })
        }
        _ => Err(Error::DegenerateMismatch {
            context: "addition_fwd requires moment-form messages".to_string(),
        }),
    }
}

/// Push a moment message forward through x ↦ A x: m ← A m, V ← A V Aᵀ.
///
/// # Errors
/// [`Error::DegenerateMismatch`] unless the input is moment-form.
pub fn linear_fwd(a: &DMatrix<f64>, msg: &GaussianMsg) -> Result<GaussianMsg> {
    match msg {
        GaussianMsg::Moment { m, v } => Ok(GaussianMsg::Moment {
            m: a * m,
            v: symmetrize(&(a * v * a.transpose())),
        }),
        _ => Err(Error::DegenerateMismatch {
            context: "linear_fwd requires a moment-form message".to_string(),
        }),
    }
}

/// Pull a canonical message backward through x ↦ A x: ξ ← Aᵀ ξ,
/// W ← Aᵀ W A.
///
/// # Errors
/// [`Error::DegenerateMismatch`] unless the input is canonical.
pub fn linear_bwd(a: &DMatrix<f64>, msg: &GaussianMsg) -> Result<GaussianMsg> {
    match msg {
        GaussianMsg::Canonical { xi, w } => Ok(GaussianMsg::Canonical {
            xi: a.transpose() * xi,
            w: symmetrize(&(a.transpose() * w * a)),
        }),
        _ => Err(Error::DegenerateMismatch {
            context: "linear_bwd requires a canonical-form message".to_string(),
        }),
    }
}

/// Absorb a degenerate scalar message arriving at y = cᵀx into a
/// moment-form state message.
///
/// Flat y-message (tilt ξ): G = 0, m ← m + (Vc)·ξ, V unchanged.
/// Point y-message at value t: G = (cᵀVc)⁻¹, g = G·(t − cᵀm),
/// m ← m + (Vc)g, V ← V − (Vc) G (Vc)ᵀ.
///
/// # Errors
/// [`Error::DegenerateMismatch`] if the state message is not moment-form
/// or the y-message is neither structurally flat nor a point mass (the
/// general fused case is intentionally not implemented).
/// [`Error::NotInvertible`] for a point observation when cᵀVc is
/// (numerically) zero — the state already pins y.
pub fn observe_through_row(
    state: &GaussianMsg,
    c: &DVector<f64>,
    y_msg: &GaussianMsg,
) -> Result<ObserveOutcome> {
    let GaussianMsg::Moment { m, v } = state else {
        return Err(Error::DegenerateMismatch {
            context: "observe_through_row requires a moment-form state message".to_string(),
        });
    };
    if y_msg.dim() != 1 {
        return Err(Error::DegenerateMismatch {
            context: "observation messages are scalar".to_string(),
        });
    }
    let vc = v * c;
    if y_msg.is_flat() {
        let GaussianMsg::Canonical { xi, .. } = y_msg else { unreachable!() };
        let g = xi[0];
        return Ok(ObserveOutcome {
            msg: GaussianMsg::Moment { m: m + &vc * g, v: v.clone() },
            gain: 0.0,
            correction: g,
        });
    }
    if y_msg.is_point_mass() {
        let GaussianMsg::Moment { m: my, .. } = y_msg else { unreachable!() };
        let cvc = c.dot(&vc);
        let scale = v.amax() * c.amax() * c.amax();
        if cvc <= tol::scalar_zero(scale) {
            return Err(Error::NotInvertible { cond: f64::INFINITY });
        }
        let gain = 1.0 / cvc;
        let g = gain * (my[0] - c.dot(m));
        let v_new = symmetrize(&(v - &vc * gain * vc.transpose()));
        return Ok(ObserveOutcome {
            msg: GaussianMsg::Moment { m: m + &vc * g, v: v_new },
            gain,
            correction: g,
        });
    }
    Err(Error::DegenerateMismatch {
        context: "observation message must be structurally flat or a point mass; \
                  the general fused case is not implemented"
            .to_string(),
    })
}

/// Absorb a degenerate scalar input message entering through x ← x + b·u
/// into a canonical-form state message.
///
/// Point u-message at value t: H = 0, h = b·t, ξ ← ξ − W h, W unchanged.
/// Flat u-message (tilt ξᵤ): H = (bᵀWb)⁻¹, h = b·H·(ξᵤ + bᵀξ),
/// ξ ← ξ − W h, W ← W − (Wb) H (Wb)ᵀ.
///
/// # Errors
/// [`Error::DegenerateMismatch`] if the state message is not canonical or
/// the input message is neither structurally flat nor a point mass.
/// [`Error::NotInvertible`] for a flat input when bᵀWb is (numerically)
/// zero — the input is unidentifiable here; callers decide whether that
/// is benign.
pub fn input_through_column(
    state: &GaussianMsg,
    b: &DVector<f64>,
    u_msg: &GaussianMsg,
) -> Result<InputOutcome> {
    let GaussianMsg::Canonical { xi, w } = state else {
        return Err(Error::DegenerateMismatch {
            context: "input_through_column requires a canonical-form state message".to_string(),
        });
    };
    if u_msg.dim() != 1 {
        return Err(Error::DegenerateMismatch {
            context: "input messages are scalar".to_string(),
        });
    }
    if u_msg.is_point_mass() {
        let GaussianMsg::Moment { m, .. } = u_msg else { unreachable!() };
        let h = b * m[0];
        return Ok(InputOutcome {
            msg: GaussianMsg::Canonical { xi: xi - w * &h, w: w.clone() },
            gain: 0.0,
            shift: h,
        });
    }
    if u_msg.is_flat() {
        let GaussianMsg::Canonical { xi: xiu, .. } = u_msg else { unreachable!() };
        let wb = w * b;
        let bwb = b.dot(&wb);
        let scale = w.amax() * b.amax() * b.amax();
        if bwb <= tol::scalar_zero(scale) {
            return Err(Error::NotInvertible { cond: f64::INFINITY });
        }
        let gain = 1.0 / bwb;
        let h = b * (gain * (xiu[0] + b.dot(xi)));
        let w_new = symmetrize(&(w - &wb * gain * wb.transpose()));
        return Ok(InputOutcome {
            msg: GaussianMsg::Canonical { xi: xi - w * &h, w: w_new },
            gain,
            shift: h,
        });
    }
    Err(Error::DegenerateMismatch {
        context: "input message must be structurally flat or a point mass; \
                  the general fused case is not implemented"
            .to_string(),
    })
}

/// Dual parameters at a variable from its forward and backward moment
/// messages: (V̆f + V̆b) ξ̃ = m̆f − m̆b, W̃ = (V̆f + V̆b)⁻¹.
///
/// # Errors
/// [`Error::DegenerateMismatch`] unless both messages are moment-form;
/// [`Error::NotInvertible`] if the covariance sum is singular.
pub fn dual_mean(fwd: &GaussianMsg, bwd: &GaussianMsg) -> Result<DualPair> {
    match (fwd, bwd) {
        (GaussianMsg::Moment { m: mf, v: vf }, GaussianMsg::Moment { m: mb, v: vb }) => {
            let sum = symmetrize(&(vf + vb));
            let w = invert_checked(&sum)?;
            let xi = &w * (mf - mb);
            Ok(DualPair { xi, w })
        }
        _ => Err(Error::DegenerateMismatch {
            context: "dual_mean requires moment-form messages".to_string(),
        }),
    }
}

/// Posterior moments from a forward moment message and the dual pair:
/// m̂ = m̆f − V̆f ξ̃, V̂ = V̆f − V̆f W̃ V̆f.
///
/// # Errors
/// [`Error::DegenerateMismatch`] unless the forward message is
/// moment-form.
pub fn posterior(fwd: &GaussianMsg, dual: &DualPair) -> Result<PosteriorPair> {
    let GaussianMsg::Moment { m, v } = fwd else {
        return Err(Error::DegenerateMismatch {
            context: "posterior requires a moment-form forward message".to_string(),
        });
    };
    Ok(PosteriorPair {
        m: m - v * &dual.xi,
        v: symmetrize(&(v - v * &dual.w * v)),
    })
}

/// Average a near-symmetric matrix with its transpose (applied after
/// every rank-1 update to stop asymmetry from accumulating).
pub fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}
