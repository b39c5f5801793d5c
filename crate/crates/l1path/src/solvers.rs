//! Concrete MAP sweeps at a fixed σ² under a fixed segment assignment.
//!
//! With one segment chosen per cost, the objective becomes smooth
//! (points clamp their variable, lines contribute an affine term) and a
//! single backward–forward (input-regularized models, [`bffd`]) or
//! forward–backward (output-regularized models, [`ffbdd`]) Gaussian
//! sweep produces the exact stationary point. These solvers are the
//! concrete counterparts of the σ²-parametric sweeps in
//! [`crate::parametric`]; the path machinery uses the parametric form,
//! while these are used for validation and as the numerical ground truth
//! at a single σ².
//!
//! Matrix specializations ([`bffd_matrix`], [`ffbdd_matrix`]) avoid the
//! state-transition plumbing when A = I and the model is a plain design
//! matrix.

use nalgebra::{DMatrix, DVector};

use crate::gaussmp::{
    addition_fwd, equality_fwd, input_through_column, linear_bwd, linear_fwd, observe_through_row,
    GaussianMsg,
};
use crate::plcost::{SegmentMsg, SegmentedCost};
use crate::ssm::{RegSide, StateSpaceModel};
use crate::tol;
use crate::{Error, Result};

/// Result of a backward-filtering, forward-deciding sweep.
#[derive(Debug, Clone)]
pub struct BffdOutput {
    /// Initial state estimate x̂₀.
    pub x0: DVector<f64>,
    /// State estimates x̂₀ … x̂_N (N+1 entries).
    pub states: Vec<DVector<f64>>,
    /// Input estimates û₁ … û_N.
    pub u: Vec<f64>,
    /// Output estimates ŷ₁ … ŷ_N.
    pub y: Vec<f64>,
    /// Backward means m̆b at each input (NaN where the backward message
    /// is flat).
    pub mb_u: Vec<f64>,
    /// Backward variances V̆b at each input (+∞ where flat).
    pub vb_u: Vec<f64>,
    /// Whether the backward message at each input was flat (no
    /// curvature along bₙ).
    pub backward_flat: Vec<bool>,
    /// Whether the initial-state system was rank deficient and x̂₀ is
    /// the minimum-norm solution.
    pub initial_state_rank_deficient: bool,
}

/// Result of a forward-filtering, backward dual-deciding sweep.
#[derive(Debug, Clone)]
pub struct FfbddOutput {
    /// Posterior initial state x̂₀.
    pub x0_posterior: DVector<f64>,
    /// Input estimates û₁ … û_N.
    pub u: Vec<f64>,
    /// Output estimates ŷ₁ … ŷ_N.
    pub y: Vec<f64>,
    /// Dual means ξ̃ at X₀ … X_N (entry n carries the costs of steps
    /// n+1 … N plus the end term).
    pub xi_x: Vec<DVector<f64>>,
    /// Cavity means m̆f at each output (the forward prediction of yₙ
    /// from everything except step n's own cost).
    pub mf_y: Vec<f64>,
    /// Cavity variances V̆f at each output.
    pub vf_y: Vec<f64>,
}

/// Agreement report from [`gaussian_map_crosscheck`].
#[derive(Debug, Clone)]
pub struct CrosscheckReport {
    /// max |ûᴮ − ûᶠ| between the two sweeps.
    pub u_gap: f64,
    /// max |ŷᴮ − ŷᶠ| between the two sweeps.
    pub y_gap: f64,
    /// max |x̂₀ᴮ − x̂₀ᶠ|.
    pub x0_gap: f64,
    /// Outputs from the forward–backward sweep (the clamp locations).
    pub y_ffbdd: Vec<f64>,
    /// Outputs re-simulated by the backward–forward sweep.
    pub y_bffd: Vec<f64>,
}

pub(crate) fn check_sigma2(sigma2: f64) -> Result<()> {
    if !(sigma2 > 0.0) || !sigma2.is_finite() {
        return Err(Error::InvalidParameter {
            name: "sigma2",
            reason: format!("must be positive and finite, got {sigma2}"),
        });
    }
    Ok(())
}

pub(crate) fn check_active(costs: &[SegmentedCost], active: &[usize]) -> Result<()> {
    if active.len() != costs.len() {
        return Err(Error::InvalidParameter {
            name: "active",
            reason: format!("need {} segment choices, got {}", costs.len(), active.len()),
        });
    }
    for (n, (&idx, cost)) in active.iter().zip(costs).enumerate() {
        if idx >= cost.num_segments() {
            return Err(Error::InvalidParameter {
                name: "active",
                reason: format!(
                    "segment {idx} out of range at step {n} ({} segments)",
                    cost.num_segments()
                ),
            });
        }
    }
    Ok(())
}

/// Per-step quantities the backward pass stores for the forward pass:
/// the projection of the post-observation backward message onto the
/// input column (an M-vector and two scalars — nothing else is kept).
struct BwdStep {
    wb: DVector<f64>,
    bxi: f64,
    bwb: f64,
    curv_scale: f64,
}

/// Backward-filtering, forward-deciding sweep for an input-regularized
/// model under a fixed segment assignment.
///
/// The backward pass folds the quadratic observations and the chosen
/// input segments into canonical messages; the forward pass recovers
/// x̂₀ (exactly x̆₀ when fixed, otherwise from the initial-state
/// normal equations) and decides each ûₙ from its backward message.
///
/// # Errors
/// - [`Error::InvalidModel`] / [`Error::InvalidParameter`] on a
///   malformed call (wrong side, bad σ², bad assignment).
/// - [`Error::Unidentifiable`] when a step with a line segment active
///   has no curvature along its input column (bᵀW̆b = 0), so the sweep
///   cannot decide that input. Path construction deals with this case
///   separately; here it is an error.
pub fn bffd(model: &StateSpaceModel, sigma2: f64, active: &[usize]) -> Result<BffdOutput> {
    model.validate()?;
    check_sigma2(sigma2)?;
    check_active(&model.costs, active)?;
    if model.side != RegSide::Input {
        return Err(Error::InvalidModel {
            reason: "bffd applies to input-regularized models; use ffbdd".to_string(),
        });
    }
    let n_steps = model.steps;
    let m = model.state_dim;
    let inv_s2 = 1.0 / sigma2;

    // Backward pass: canonical message at X_N from the end term.
    let mut msg = GaussianMsg::canonical(&model.qn * &model.xn_bar * inv_s2, &model.qn * inv_s2);
    // Flatness must be judged against the largest curvature the pass has
    // seen, not the current one: once line segments have marginalized
    // directions spanning the state, the remaining W is rounding noise,
    // and a locally scaled threshold would mistake that noise for
    // genuine curvature.
    let mut w_scale = model.qn.amax() * inv_s2;
    let mut cache: Vec<BwdStep> = Vec::with_capacity(n_steps);
    for n in (0..n_steps).rev() {
        let c = &model.c[n];
        let b = &model.b[n];
        // Fold the quadratic observation (a zero c row contributes
        // nothing and keeps the message unchanged).
        let obs = GaussianMsg::canonical(c * (inv_s2 * model.y[n]), c * c.transpose() * inv_s2);
        msg = equality_fwd(&msg, &obs)?;
        let GaussianMsg::Canonical { xi, w } = &msg else { unreachable!() };
        w_scale = w_scale.max(w.amax());
        let wb = w * b;
        let bwb = b.dot(&wb);
        let curv_scale = w_scale * b.amax() * b.amax();
        cache.push(BwdStep { bxi: b.dot(xi), bwb, curv_scale, wb });
        // Fold the chosen input segment; reject a line segment whose
        // curvature is structurally zero before the fold divides by it.
        let seg = model.costs[n].segment_params(active[n]);
        if matches!(seg, SegmentMsg::Flat { .. }) && bwb <= tol::scalar_zero(curv_scale) {
            return Err(Error::Unidentifiable { index: n });
        }
        let u_msg = GaussianMsg::from(&seg);
        msg = match input_through_column(&msg, b, &u_msg) {
            Ok(out) => out.msg,
            Err(Error::NotInvertible { .. }) => return Err(Error::Unidentifiable { index: n }),
            Err(e) => return Err(e),
        };
        msg = linear_bwd(&model.a, &msg)?;
    }
    cache.reverse();
    let GaussianMsg::Canonical { xi: xi0, w: w0 } = &msg else { unreachable!() };

    // Initial state: clamp, or solve the normal equations
    // (Q₀/σ² + W̆)x̂₀ = Q₀x̆₀/σ² + ξ̆, minimum-norm if rank deficient.
    let mut rank_deficient = false;
    let x0 = if model.fixed_initial_state {
        model.x0_bar.clone()
    } else {
        let s = &model.q0 * inv_s2 + w0;
        let rhs = &model.q0 * &model.x0_bar * inv_s2 + xi0;
        let svd = s.clone().svd(true, true);
        let smax = svd.singular_values.max();
        let floor = tol::SCALAR_ZERO_REL * (1.0 + smax) * m as f64;
        let rank = svd.singular_values.iter().filter(|&&sv| sv > floor).count();
        rank_deficient = rank < m;
        svd.solve(&rhs, floor).map_err(|e| Error::InvalidModel {
            reason: format!("initial-state solve failed: {e}"),
        })?
    };

    // Forward pass: decide each input from its backward message.
    let mut states = Vec::with_capacity(n_steps + 1);
    let mut u = Vec::with_capacity(n_steps);
    let mut y = Vec::with_capacity(n_steps);
    let mut mb_u = Vec::with_capacity(n_steps);
    let mut vb_u = Vec::with_capacity(n_steps);
    let mut backward_flat = Vec::with_capacity(n_steps);
    states.push(x0.clone());
    for n in 0..n_steps {
        let x_pred = &model.a * states.last().expect("nonempty");
        let step = &cache[n];
        let flat = step.bwb <= tol::scalar_zero(step.curv_scale);
        let (vb, mb) = if flat {
            (f64::INFINITY, f64::NAN)
        } else {
            let vb = 1.0 / step.bwb;
            (vb, vb * (step.bxi - step.wb.dot(&x_pred)))
        };
        let un = match model.costs[n].segment_params(active[n]) {
            SegmentMsg::Point { mean } => mean,
            SegmentMsg::Flat { xi } => {
                // A flat backward message would already have errored in
                // the backward pass for a line segment.
                debug_assert!(!flat);
                vb * xi + mb
            }
        };
        let x_next = x_pred + &model.b[n] * un;
        y.push(model.c[n].dot(&x_next));
        u.push(un);
        mb_u.push(mb);
        vb_u.push(vb);
        backward_flat.push(flat);
        states.push(x_next);
    }
    Ok(BffdOutput {
        x0,
        states,
        u,
        y,
        mb_u,
        vb_u,
        backward_flat,
        initial_state_rank_deficient: rank_deficient,
    })
}

/// Per-step quantities the forward pass stores for the backward pass:
/// the projection of the pre-observation forward message onto the
/// output row (an M-vector and two scalars).
struct FwdStep {
    vc: DVector<f64>,
    cm: f64,
    cvc: f64,
}

/// Forward-filtering, backward dual-deciding sweep for an
/// output-regularized model under a fixed segment assignment.
///
/// The forward pass propagates moment messages through the quadratic
/// input penalties and folds the chosen output segments; the backward
/// pass propagates dual means, decides each ŷₙ against its cavity, and
/// reads off ûₙ and the posterior initial state.
///
/// # Errors
/// - [`Error::InvalidModel`] / [`Error::InvalidParameter`] on a
///   malformed call (wrong side, bad σ², bad assignment, singular Q₀ or
///   nonzero-singular Q_N).
/// - [`Error::Unidentifiable`] when a point segment is active at a step
///   whose cavity variance is zero (the output is already pinned by the
///   rest of the model).
pub fn ffbdd(model: &StateSpaceModel, sigma2: f64, active: &[usize]) -> Result<FfbddOutput> {
    let report = model.validate()?;
    check_sigma2(sigma2)?;
    check_active(&model.costs, active)?;
    if model.side != RegSide::Output {
        return Err(Error::InvalidModel {
            reason: "ffbdd applies to output-regularized models; use bffd".to_string(),
        });
    }
    let n_steps = model.steps;
    let m = model.state_dim;
    let q0_inv = model.q0.clone().try_inverse().ok_or_else(|| Error::InvalidModel {
        reason: "output-regularized sweep needs an invertible initial-state weight Q₀".to_string(),
    })?;

    // Forward pass: moment message from the initial-state prior.
    let mut msg = GaussianMsg::moment(model.x0_bar.clone(), &q0_inv * sigma2);
    // Degeneracy must be judged against the largest variance the pass has
    // seen, not the current one: once point clamps have absorbed
    // directions spanning the state, the remaining V is rounding noise —
    // possibly negative — and a locally scaled threshold would mistake
    // that noise for genuine slack.
    let mut v_scale = q0_inv.amax() * sigma2;
    let mut cache: Vec<FwdStep> = Vec::with_capacity(n_steps);
    for n in 0..n_steps {
        let b = &model.b[n];
        let c = &model.c[n];
        msg = linear_fwd(&model.a, &msg)?;
        // Quadratic input penalty: zero-mean, covariance σ²bbᵀ.
        let add = GaussianMsg::moment(DVector::zeros(m), b * b.transpose() * sigma2);
        msg = addition_fwd(&msg, &add)?;
        let GaussianMsg::Moment { m: mean, v } = &msg else { unreachable!() };
        v_scale = v_scale.max(v.amax());
        let vc = v * c;
        // Snap a noise-level cavity variance to an exact zero so the
        // decisions see a pinned coordinate instead of a rounding residue.
        let cvc_raw = c.dot(&vc);
        let cvc = if cvc_raw <= tol::scalar_zero(v_scale * c.amax() * c.amax()) {
            0.0
        } else {
            cvc_raw
        };
        cache.push(FwdStep { cm: c.dot(mean), cvc, vc });
        // Fold the chosen output segment; reject a point segment at a
        // coordinate the rest of the model already pins before the fold
        // divides by its zero cavity variance.
        let seg = model.costs[n].segment_params(active[n]);
        if matches!(seg, SegmentMsg::Point { .. }) && cvc == 0.0 {
            return Err(Error::Unidentifiable { index: n });
        }
        let y_msg = GaussianMsg::from(&seg);
        msg = match observe_through_row(&msg, c, &y_msg) {
            Ok(out) => out.msg,
            Err(Error::NotInvertible { .. }) => return Err(Error::Unidentifiable { index: n }),
            Err(e) => return Err(e),
        };
    }
    let GaussianMsg::Moment { m: mf_n, v: vf_n } = &msg else { unreachable!() };

    // End term → dual mean at X_N.
    let xi_terminal = if report.qn_zero {
        DVector::zeros(m)
    } else {
        let qn_inv = model.qn.clone().try_inverse().ok_or_else(|| Error::InvalidModel {
            reason: "nonzero end weight Q_N must be invertible for the output sweep".to_string(),
        })?;
        let s = vf_n + qn_inv * sigma2;
        s.lu().solve(&(mf_n - &model.xn_bar)).ok_or(Error::NotInvertible {
            cond: f64::INFINITY,
        })?
    };

    // Backward pass: dual means, output decisions, inputs.
    let mut xi_x = vec![DVector::zeros(m); n_steps + 1];
    xi_x[n_steps] = xi_terminal;
    let mut u = vec![0.0; n_steps];
    let mut y = vec![0.0; n_steps];
    let mut mf_y = vec![0.0; n_steps];
    let mut vf_y = vec![0.0; n_steps];
    let mut xi = xi_x[n_steps].clone();
    for n in (0..n_steps).rev() {
        let step = &cache[n];
        let my = step.cm - step.vc.dot(&xi);
        let (xi_y, yn) = match model.costs[n].segment_params(active[n]) {
            SegmentMsg::Point { mean } => {
                // cvc > 0 is guaranteed: the forward fold would have
                // errored otherwise.
                ((my - mean) / step.cvc, mean)
            }
            SegmentMsg::Flat { xi: xi_f } => (-xi_f, my + step.cvc * xi_f),
        };
        let xi_mid = &xi + &model.c[n] * xi_y;
        u[n] = -sigma2 * model.b[n].dot(&xi_mid);
        y[n] = yn;
        mf_y[n] = my;
        vf_y[n] = step.cvc;
        xi = model.a.transpose() * xi_mid;
        xi_x[n] = xi.clone();
    }
    let x0_posterior = &model.x0_bar - &q0_inv * &xi_x[0] * sigma2;
    Ok(FfbddOutput { x0_posterior, u, y, xi_x, mf_y, vf_y })
}

/// [`bffd`] specialized to a plain design matrix F (L×K): A = I, no
/// observation rows, x₀ = 0 fixed, end term ‖x_K − y̆‖². `costs[k]`
/// applies to input k. Produces the same estimates as running [`bffd`]
/// on [`StateSpaceModel::input_matrix_model`].
///
/// # Errors
/// As for [`bffd`].
pub fn bffd_matrix(
    f: &DMatrix<f64>,
    y: &[f64],
    costs: &[SegmentedCost],
    sigma2: f64,
    active: &[usize],
) -> Result<BffdOutput> {
    check_sigma2(sigma2)?;
    check_active(costs, active)?;
    let (l, k) = f.shape();
    if y.len() != l || costs.len() != k {
        return Err(Error::InvalidParameter {
            name: "y",
            reason: format!(
                "shape mismatch: F is {l}×{k}, y has {}, costs have {}",
                y.len(),
                costs.len()
            ),
        });
    }
    let inv_s2 = 1.0 / sigma2;
    let mut w = DMatrix::identity(l, l) * inv_s2;
    let mut xi = DVector::from_column_slice(y) * inv_s2;
    // Scale flatness thresholds by the largest curvature seen: W only
    // loses mass to line-segment marginalizations here, and judging a
    // later column against the marginalized (possibly pure-noise) W
    // would mistake rounding residue for genuine curvature.
    let mut w_scale = inv_s2;
    let mut cache: Vec<BwdStep> = Vec::with_capacity(k);
    for n in (0..k).rev() {
        let b = f.column(n);
        w_scale = w_scale.max(w.amax());
        let wb = &w * b;
        let bxi = b.dot(&xi);
        let bwb = b.dot(&wb);
        let curv_scale = w_scale * b.amax() * b.amax();
        match costs[n].segment_params(active[n]) {
            SegmentMsg::Point { mean } => {
                xi -= &wb * mean;
            }
            SegmentMsg::Flat { xi: xi_f } => {
                if bwb <= tol::scalar_zero(curv_scale) {
                    return Err(Error::Unidentifiable { index: n });
                }
                let h = (xi_f + bxi) / bwb;
                xi -= &wb * h;
                let update = &wb * wb.transpose() / bwb;
                w -= update;
                w = (&w + w.transpose()) * 0.5;
            }
        }
        cache.push(BwdStep { wb, bxi, bwb, curv_scale });
    }
    cache.reverse();

    let x0 = DVector::zeros(l);
    let mut states = Vec::with_capacity(k + 1);
    let mut u = Vec::with_capacity(k);
    let mut mb_u = Vec::with_capacity(k);
    let mut vb_u = Vec::with_capacity(k);
    let mut backward_flat = Vec::with_capacity(k);
    states.push(x0.clone());
    for n in 0..k {
        let x_pred = states.last().expect("nonempty").clone();
        let step = &cache[n];
        let flat = step.bwb <= tol::scalar_zero(step.curv_scale);
        let (vb, mb) = if flat {
            (f64::INFINITY, f64::NAN)
        } else {
            let vb = 1.0 / step.bwb;
            (vb, vb * (step.bxi - step.wb.dot(&x_pred)))
        };
        let un = match costs[n].segment_params(active[n]) {
            SegmentMsg::Point { mean } => mean,
            SegmentMsg::Flat { xi } => {
                debug_assert!(!flat);
                vb * xi + mb
            }
        };
        let x_next = x_pred + f.column(n) * un;
        u.push(un);
        mb_u.push(mb);
        vb_u.push(vb);
        backward_flat.push(flat);
        states.push(x_next);
    }
    Ok(BffdOutput {
        x0,
        states,
        u,
        y: vec![0.0; k],
        mb_u,
        vb_u,
        backward_flat,
        initial_state_rank_deficient: false,
    })
}

/// [`ffbdd`] specialized to a plain design matrix F (L×K): the state is
/// the K coefficients with prior ‖x₀‖², A = I, no inputs, and row n of F
/// observed through `costs[n]` (given in output units, i.e. already
/// centered on the data). Produces the same estimates as running
/// [`ffbdd`] on [`StateSpaceModel::output_matrix_model`]; the
/// coefficient vector is `x0_posterior`.
///
/// # Errors
/// As for [`ffbdd`].
pub fn ffbdd_matrix(
    f: &DMatrix<f64>,
    costs: &[SegmentedCost],
    sigma2: f64,
    active: &[usize],
) -> Result<FfbddOutput> {
    check_sigma2(sigma2)?;
    check_active(costs, active)?;
    let (l, k) = f.shape();
    if costs.len() != l {
        return Err(Error::InvalidParameter {
            name: "costs",
            reason: format!("need one cost per row ({l}), got {}", costs.len()),
        });
    }
    let mut mean = DVector::zeros(k);
    let mut v = DMatrix::identity(k, k) * sigma2;
    // Scale degeneracy thresholds by the largest variance seen: V only
    // loses mass to point-clamp folds here, and judging a later row
    // against the clamped (possibly pure-noise) V would mistake rounding
    // residue — possibly negative — for genuine slack.
    let mut v_scale = sigma2;
    let mut cache: Vec<FwdStep> = Vec::with_capacity(l);
    for n in 0..l {
        let c = f.row(n).transpose();
        v_scale = v_scale.max(v.amax());
        let vc = &v * &c;
        let cm = c.dot(&mean);
        // Snap a noise-level cavity variance to an exact zero so the
        // decisions see a pinned coordinate instead of a rounding residue.
        let cvc_raw = c.dot(&vc);
        let cvc = if cvc_raw <= tol::scalar_zero(v_scale * c.amax() * c.amax()) {
            0.0
        } else {
            cvc_raw
        };
        match costs[n].segment_params(active[n]) {
            SegmentMsg::Point { mean: loc } => {
                if cvc == 0.0 {
                    return Err(Error::Unidentifiable { index: n });
                }
                let g = (loc - cm) / cvc;
                mean += &vc * g;
                let update = &vc * vc.transpose() / cvc;
                v -= update;
                v = (&v + v.transpose()) * 0.5;
            }
            SegmentMsg::Flat { xi } => {
                mean += &vc * xi;
            }
        }
        cache.push(FwdStep { vc, cm, cvc });
    }

    let mut xi_x = vec![DVector::zeros(k); l + 1];
    let u = vec![0.0; l];
    let mut y = vec![0.0; l];
    let mut mf_y = vec![0.0; l];
    let mut vf_y = vec![0.0; l];
    let mut xi = DVector::zeros(k);
    for n in (0..l).rev() {
        let step = &cache[n];
        let my = step.cm - step.vc.dot(&xi);
        let (xi_y, yn) = match costs[n].segment_params(active[n]) {
            SegmentMsg::Point { mean: loc } => ((my - loc) / step.cvc, loc),
            SegmentMsg::Flat { xi: xi_f } => (-xi_f, my + step.cvc * xi_f),
        };
        xi += f.row(n).transpose() * xi_y;
        y[n] = yn;
        mf_y[n] = my;
        vf_y[n] = step.cvc;
        xi_x[n] = xi.clone();
    }
    let x0_posterior = -&xi_x[0] * sigma2;
    Ok(FfbddOutput { x0_posterior, u, y, xi_x, mf_y, vf_y })
}

/// Exact agreement check between the two sweeps.
///
/// Takes an output-regularized model and an assignment in which every
/// chosen segment is a point (so the outputs are clamped). The
/// forward–backward sweep solves the resulting
/// equality-constrained quadratic program for (x̂₀, û, ŷ). An
/// input-regularized twin is then built around that solution — same
/// dynamics, x₀ fixed at x̂₀, data set to ŷ, every input point-clamped
/// at ûₙ — and the backward–forward sweep re-simulates it. The two
/// trajectories agree exactly in exact arithmetic, so the reported gaps
/// measure the numerical quality of two very different message
/// recursions against each other.
///
/// # Errors
/// [`Error::InvalidParameter`] if some chosen segment is not a point;
/// otherwise as for [`ffbdd`] / [`bffd`].
pub fn gaussian_map_crosscheck(
    model: &StateSpaceModel,
    sigma2: f64,
    active: &[usize],
) -> Result<CrosscheckReport> {
    check_active(&model.costs, active)?;
    for (n, (&idx, cost)) in active.iter().zip(&model.costs).enumerate() {
        if idx % 2 == 0 {
            return Err(Error::InvalidParameter {
                name: "active",
                reason: format!(
                    "cross-check needs point segments everywhere; step {n} chose a line \
                     (segment {idx} of {})",
                    cost.num_segments()
                ),
            });
        }
    }
    let fwd = ffbdd(model, sigma2, active)?;

    let twin = StateSpaceModel {
        state_dim: model.state_dim,
        steps: model.steps,
        a: model.a.clone(),
        b: model.b.clone(),
        c: model.c.clone(),
        side: RegSide::Input,
        y: fwd.y.clone(),
        q0: DMatrix::zeros(model.state_dim, model.state_dim),
        x0_bar: fwd.x0_posterior.clone(),
        fixed_initial_state: true,
        qn: DMatrix::zeros(model.state_dim, model.state_dim),
        xn_bar: DVector::zeros(model.state_dim),
        costs: fwd.u.iter().map(|&un| SegmentedCost::make_l1().shifted(un)).collect(),
    };
    let twin_active = vec![1; model.steps];
    let bwd = bffd(&twin, sigma2, &twin_active)?;

    let gap = |a: &[f64], b: &[f64]| {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0_f64, f64::max)
    };
    Ok(CrosscheckReport {
        u_gap: gap(&bwd.u, &fwd.u),
        y_gap: gap(&bwd.y, &fwd.y),
        x0_gap: (&bwd.x0 - &fwd.x0_posterior).amax(),
        y_ffbdd: fwd.y,
        y_bffd: bwd.y,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::solve_fixed_assignment;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// (2u − 4)² + 2σ²|u| at σ² = 1 on the right line: û = 7/4,
    /// x̂₁ = 2û = 7/2, backward pair m̆b = 2, V̆b = 1/4.
    #[test]
    fn bffd_scalar_frozen() {
        let f = DMatrix::from_row_slice(1, 1, &[2.0]);
        let model = StateSpaceModel::lasso_model(&f, &[4.0]).unwrap();
        let out = bffd(&model, 1.0, &[2]).unwrap();
        assert!((out.u[0] - 1.75).abs() < 1e-12);
        assert!((out.states[1][0] - 3.5).abs() < 1e-12);
        assert!((out.mb_u[0] - 2.0).abs() < 1e-12);
        assert!((out.vb_u[0] - 0.25).abs() < 1e-12);
        assert!(!out.backward_flat[0]);
        assert!(!out.initial_state_rank_deficient);

        // The point segment clamps to the breakpoint.
        let clamped = bffd(&model, 1.0, &[1]).unwrap();
        assert_eq!(clamped.u[0], 0.0);
    }

    /// min x₀² + 2σ²|x₀ − 3|: left line gives x₀ = ŷ = 1 at σ² = 1;
    /// right line gives x₀ = ŷ = −σ².
    #[test]
    fn ffbdd_scalar_frozen() {
        let f = DMatrix::from_row_slice(1, 1, &[1.0]);
        let model = StateSpaceModel::output_model(&f, &[3.0]).unwrap();
        let left = ffbdd(&model, 1.0, &[0]).unwrap();
        assert!((left.x0_posterior[0] - 1.0).abs() < 1e-12);
        assert!((left.y[0] - 1.0).abs() < 1e-12);
        assert!((left.mf_y[0] - 0.0).abs() < 1e-12);
        assert!((left.vf_y[0] - 1.0).abs() < 1e-12);

        for &s2 in &[1.0, 0.5, 0.125] {
            let right = ffbdd(&model, s2, &[2]).unwrap();
            assert!((right.x0_posterior[0] + s2).abs() < 1e-12, "sigma2 {s2}");
            assert!((right.y[0] + s2).abs() < 1e-12, "sigma2 {s2}");
        }

        // The point segment interpolates the datum exactly.
        let interp = ffbdd(&model, 1.0, &[1]).unwrap();
        assert!((interp.x0_posterior[0] - 3.0).abs() < 1e-12);
        assert!((interp.y[0] - 3.0).abs() < 1e-12);
    }

    fn random_input_model(rng: &mut ChaCha8Rng) -> StateSpaceModel {
        let m = rng.gen_range(2..=4);
        let n = rng.gen_range(3..=6);
        let a = DMatrix::from_fn(m, m, |_, _| rng.gen_range(-0.8..0.8))
            + DMatrix::identity(m, m) * 0.5;
        let b = (0..n)
            .map(|_| DVector::from_fn(m, |_, _| rng.gen_range(-1.0..1.0) + 0.1))
            .collect();
        let c = (0..n)
            .map(|_| DVector::from_fn(m, |_, _| rng.gen_range(-1.0..1.0) + 0.1))
            .collect();
        let r = DMatrix::from_fn(m, m, |_, _| rng.gen_range(-0.5..0.5));
        let q0 = &r * r.transpose() + DMatrix::identity(m, m) * 0.4;
        let r2 = DMatrix::from_fn(m, m, |_, _| rng.gen_range(-0.5..0.5));
        let qn = &r2 * r2.transpose() + DMatrix::identity(m, m) * 0.2;
        let costs = (0..n)
            .map(|i| {
                if i % 2 == 0 {
                    SegmentedCost::make_l1()
                } else {
                    SegmentedCost::make_vapnik(-0.7, 0.9).unwrap()
                }
            })
            .collect();
        StateSpaceModel {
            state_dim: m,
            steps: n,
            a,
            b,
            c,
            side: RegSide::Input,
            y: (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect(),
            q0,
            x0_bar: DVector::from_fn(m, |_, _| rng.gen_range(-1.0..1.0)),
            fixed_initial_state: rng.gen_bool(0.3),
            qn,
            xn_bar: DVector::from_fn(m, |_, _| rng.gen_range(-1.0..1.0)),
            costs,
        }
    }

    fn random_output_model(rng: &mut ChaCha8Rng) -> StateSpaceModel {
        let mut model = random_input_model(rng);
        model.side = RegSide::Output;
        model.fixed_initial_state = false;
        if rng.gen_bool(0.5) {
            let m = model.state_dim;
            model.qn = DMatrix::zeros(m, m);
            model.xn_bar = DVector::zeros(m);
        }
        model
    }

    fn random_assignment(rng: &mut ChaCha8Rng, model: &StateSpaceModel) -> Vec<usize> {
        model.costs.iter().map(|c| rng.gen_range(0..c.num_segments())).collect()
    }

    /// The backward–forward sweep reproduces the dense
    /// fixed-assignment optimum on random input-regularized models.
    #[test]
    fn bffd_matches_dense_fixed_assignment() {
        let mut rng = ChaCha8Rng::seed_from_u64(0xbffd);
        let mut checked = 0;
        for _ in 0..60 {
            let model = random_input_model(&mut rng);
            let active = random_assignment(&mut rng, &model);
            let sigma2 = rng.gen_range(0.05..4.0);
            let sweep = match bffd(&model, sigma2, &active) {
                Ok(s) => s,
                Err(Error::Unidentifiable { .. }) => continue,
                Err(e) => panic!("unexpected error: {e}"),
            };
            let dense = solve_fixed_assignment(&model, sigma2, &active).unwrap();
            let scale = 1.0 + dense.u.iter().fold(0.0_f64, |a, &x| a.max(x.abs()));
            for k in 0..model.steps {
                assert!(
                    (sweep.u[k] - dense.u[k]).abs() < 1e-7 * scale,
                    "u mismatch at {k}: {} vs {}",
                    sweep.u[k],
                    dense.u[k]
                );
            }
            assert!((&sweep.x0 - &dense.x0).amax() < 1e-7 * (1.0 + dense.x0.amax()));
            checked += 1;
        }
        assert!(checked >= 50, "only {checked} trials were identifiable");
    }

    /// The forward–backward sweep reproduces the dense
    /// fixed-assignment optimum on random output-regularized models.
    #[test]
    fn ffbdd_matches_dense_fixed_assignment() {
        let mut rng = ChaCha8Rng::seed_from_u64(0xffbd);
        let mut checked = 0;
        for _ in 0..60 {
            let model = random_output_model(&mut rng);
            let active = random_assignment(&mut rng, &model);
            let sigma2 = rng.gen_range(0.05..4.0);
            let sweep = match ffbdd(&model, sigma2, &active) {
                Ok(s) => s,
                Err(Error::Unidentifiable { .. }) => continue,
                Err(e) => panic!("unexpected error: {e}"),
            };
            let dense = solve_fixed_assignment(&model, sigma2, &active).unwrap();
            let scale = 1.0 + dense.u.iter().fold(0.0_f64, |a, &x| a.max(x.abs()));
            for k in 0..model.steps {
                assert!(
                    (sweep.u[k] - dense.u[k]).abs() < 1e-7 * scale,
                    "u mismatch at {k}: {} vs {}",
                    sweep.u[k],
                    dense.u[k]
                );
                assert!(
                    (sweep.y[k] - dense.values[k]).abs() < 1e-7 * (1.0 + dense.values[k].abs()),
                    "y mismatch at {k}: {} vs {}",
                    sweep.y[k],
                    dense.values[k]
                );
            }
            assert!(
                (&sweep.x0_posterior - &dense.x0).amax() < 1e-7 * (1.0 + dense.x0.amax()),
                "x0 mismatch: {:?} vs {:?}",
                sweep.x0_posterior,
                dense.x0
            );
            checked += 1;
        }
        assert!(checked >= 50, "only {checked} trials were identifiable");
    }

    /// Matrix specializations agree with the general sweeps on the
    /// corresponding matrix models.
    #[test]
    fn matrix_variants_match_general() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x3a7);
        for trial in 0..40 {
            let l = rng.gen_range(1..=5);
            let k = rng.gen_range(1..=5);
            let f = DMatrix::from_fn(l, k, |_, _| rng.gen_range(-2.0..2.0));
            let sigma2 = rng.gen_range(0.1..3.0);

            // Input side.
            let y: Vec<f64> = (0..l).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let costs: Vec<_> = (0..k).map(|_| SegmentedCost::make_l1()).collect();
            let model = StateSpaceModel::input_matrix_model(&f, &y, costs.clone()).unwrap();
            let active = random_assignment(&mut rng, &model);
            match (
                bffd_matrix(&f, &y, &costs, sigma2, &active),
                bffd(&model, sigma2, &active),
            ) {
                (Ok(mat), Ok(gen)) => {
                    for i in 0..k {
                        assert!(
                            (mat.u[i] - gen.u[i]).abs() < 1e-9 * (1.0 + gen.u[i].abs()),
                            "trial {trial}: input {i}"
                        );
                    }
                    let xm = mat.states.last().unwrap();
                    let xg = gen.states.last().unwrap();
                    assert!((xm - xg).amax() < 1e-9 * (1.0 + xg.amax()));
                }
                (Err(Error::Unidentifiable { .. }), Err(Error::Unidentifiable { .. })) => {}
                (a, b) => panic!("trial {trial}: divergent outcomes {a:?} vs {b:?}"),
            }

            // Output side.
            let yc: Vec<f64> = (0..l).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let raw_costs: Vec<_> = (0..l).map(|_| SegmentedCost::make_l1()).collect();
            let omodel = StateSpaceModel::output_matrix_model(&f, &yc, raw_costs).unwrap();
            let oactive = random_assignment(&mut rng, &omodel);
            match (
                ffbdd_matrix(&f, &omodel.costs, sigma2, &oactive),
                ffbdd(&omodel, sigma2, &oactive),
            ) {
                (Ok(mat), Ok(gen)) => {
                    assert!(
                        (&mat.x0_posterior - &gen.x0_posterior).amax()
                            < 1e-9 * (1.0 + gen.x0_posterior.amax()),
                        "trial {trial}: coefficients"
                    );
                    for i in 0..l {
                        assert!(
                            (mat.y[i] - gen.y[i]).abs() < 1e-9 * (1.0 + gen.y[i].abs()),
                            "trial {trial}: output {i}"
                        );
                    }
                }
                (Err(Error::Unidentifiable { .. }), Err(Error::Unidentifiable { .. })) => {}
                (a, b) => panic!("trial {trial}: divergent outcomes {a:?} vs {b:?}"),
            }
        }
    }

    /// Interpolating assignments round-trip exactly between the sweeps.
    #[test]
    fn crosscheck_agrees_on_interpolation() {
        let y = [0.4, -1.2, 2.0, 0.3, -0.7];
        let model = StateSpaceModel::median_smoother_model(&y, 1e-3).unwrap();
        let active = vec![1; y.len()];
        for &s2 in &[0.05, 1.0, 20.0] {
            let report = gaussian_map_crosscheck(&model, s2, &active).unwrap();
            assert!(report.u_gap < 1e-9, "u gap {}", report.u_gap);
            assert!(report.y_gap < 1e-8, "y gap {}", report.y_gap);
            assert!(report.x0_gap < 1e-9, "x0 gap {}", report.x0_gap);
            for (a, b) in report.y_ffbdd.iter().zip(&y) {
                assert!((a - b).abs() < 1e-8, "interpolation should clamp to the data");
            }
        }
        // Line segments are rejected.
        assert!(matches!(
            gaussian_map_crosscheck(&model, 1.0, &vec![0; y.len()]),
            Err(Error::InvalidParameter { .. })
        ));
    }

    /// Buffer lengths follow the sweep contracts: one stored projection
    /// per step, states at every node.
    #[test]
    fn output_buffer_contracts() {
        let f = DMatrix::from_row_slice(2, 3, &[1.0, 0.5, -0.25, 0.0, 1.0, 0.75]);
        let model = StateSpaceModel::lasso_model(&f, &[1.0, -2.0]).unwrap();
        let out = bffd(&model, 0.7, &[1, 1, 2]).unwrap();
        assert_eq!(out.states.len(), 4);
        assert_eq!(out.u.len(), 3);
        assert_eq!(out.y.len(), 3);
        assert_eq!(out.mb_u.len(), 3);
        assert_eq!(out.vb_u.len(), 3);
        assert_eq!(out.backward_flat.len(), 3);

        let omodel = StateSpaceModel::output_model(&f.transpose(), &[1.0, 0.0, -1.0]).unwrap();
        let fout = ffbdd(&omodel, 0.7, &[1, 0, 2]).unwrap();
        assert_eq!(fout.xi_x.len(), 4);
        assert_eq!(fout.u.len(), 3);
        assert_eq!(fout.y.len(), 3);
        assert_eq!(fout.mf_y.len(), 3);
        assert_eq!(fout.vf_y.len(), 3);
        assert_eq!(fout.x0_posterior.len(), 2);
    }

    /// The final input of the second-difference chain has no curvature
    /// when a line is active there: the sweep refuses rather than
    /// guessing.
    #[test]
    fn trend_filter_terminal_line_is_unidentifiable() {
        let model = StateSpaceModel::trend_filter_model(&[0.0, 1.0, 0.5, 2.0]).unwrap();
        let mut active = vec![1; 4];
        *active.last_mut().unwrap() = 2;
        match bffd(&model, 1.0, &active) {
            Err(Error::Unidentifiable { index }) => assert_eq!(index, 3),
            other => panic!("expected unidentifiable, got {other:?}"),
        }
        // With a point clamped at the end the sweep goes through.
        *active.last_mut().unwrap() = 1;
        bffd(&model, 1.0, &active).unwrap();
    }
}
