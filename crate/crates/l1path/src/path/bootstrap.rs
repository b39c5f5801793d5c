//! Computing the path's σ² = 0 endpoint.
//!
//! The σ² → 0⁺ limit of the regularized solution is the point of the
//! quadratic part's minimizer set (the "least-squares face") with the
//! smallest total cost Σκₙ. For input-regularized models that face can
//! be a genuine polytope face (wide designs, free initial states,
//! cost-invisible inputs), so the start is found in two tiers:
//!
//! 1. a parametric sweep with every cost replaced by a slope-zero line
//!    reads one least-squares point off the constant coefficients,
//!    clamping any coordinate the quadratic cannot see to a kink of its
//!    own cost;
//! 2. if tier 1 had to clamp, or the initial-state system was rank
//!    deficient, the face's free directions are extracted by homogeneous
//!    response sweeps and the total cost is minimized over them exactly
//!    with a small simplex program restricted to the coordinates those
//!    directions touch.
//!
//! Output-regularized models have a strictly convex quadratic part
//! (positive-definite initial-state weight, identity input weight), so
//! their start is simply the free response of the model.

use nalgebra::DVector;

use super::simplex::{solve_standard_form, LpOutcome};
use crate::parametric::param_bffd;
use crate::plcost::SegmentedCost;
use crate::ssm::StateSpaceModel;
use crate::{Error, Result};

/// A single line with slope zero: the cost that constrains nothing.
fn zero_line() -> SegmentedCost {
    SegmentedCost::make_custom(&[], &[0.0]).expect("a single zero slope is a valid cost")
}

/// A symmetric kink at `loc`, used to pin one coordinate exactly there.
fn kink_at(loc: f64) -> SegmentedCost {
    SegmentedCost::make_custom(&[loc], &[-1.0, 1.0]).expect("a symmetric kink is a valid cost")
}

/// Location of the leftmost kink where the cost's slope changes from
/// nonpositive to nonnegative (a minimizer of κ), if any kink qualifies.
fn penalty_min_kink(cost: &SegmentedCost) -> Option<f64> {
    let slopes = cost.slopes();
    let bps = cost.breakpoints();
    (0..bps.len()).find(|&j| slopes[j] <= 0.0 && slopes[j + 1] >= 0.0).map(|j| bps[j])
}

/// The σ² = 0 estimate vector û(0) for an input-regularized model: the
/// minimizer of Σκₙ(uₙ) over the least-squares face.
///
/// # Errors
/// [`Error::UnboundedStart`] when the total cost is unbounded below on
/// the face; sweep and model-validation errors pass through.
pub(super) fn input_start_values(model: &StateSpaceModel) -> Result<Vec<f64>> {
    let n = model.steps;

    // Tier 1: slope-zero probe. Clamping loop: every failure names a new
    // line coordinate (clamped ones are kinks and cannot fail again), so
    // this terminates within n rounds.
    let mut probe = model.clone();
    probe.costs = vec![zero_line(); n];
    let mut active = vec![0usize; n];
    let mut clamped: Vec<usize> = Vec::new();
    let base = loop {
        match param_bffd(&probe, &active) {
            Ok(p) => break p,
            Err(Error::Unidentifiable { index }) => {
                debug_assert!(!clamped.contains(&index), "a kink coordinate cannot fail");
                let loc = penalty_min_kink(&model.costs[index]).unwrap_or(0.0);
                probe.costs[index] = kink_at(loc);
                active[index] = 1;
                clamped.push(index);
            }
            Err(e) => return Err(e),
        }
    };
    let u_base: Vec<f64> = base.u.iter().map(|a| a.c0).collect();
    if clamped.is_empty() && !base.initial_state_rank_deficient {
        // The quadratic minimizer is unique; nothing to optimize over.
        return Ok(u_base);
    }

    // Tier 2: homogeneous response sweeps give one face direction per
    // clamped coordinate and one per null vector of the initial-state
    // system. All data centers are zeroed and every clamp moves to 0 so
    // the sweeps read pure differences.
    let mut hom = probe.clone();
    hom.y = vec![0.0; n];
    hom.xn_bar = DVector::zeros(model.state_dim);
    hom.x0_bar = DVector::zeros(model.state_dim);
    for &k in &clamped {
        hom.costs[k] = kink_at(0.0);
    }
    let mut dirs: Vec<Vec<f64>> = Vec::new();
    for &k in &clamped {
        let mut pass = hom.clone();
        pass.costs[k] = kink_at(1.0);
        let p = param_bffd(&pass, &active)?;
        dirs.push(p.u.iter().map(|a| a.c0).collect());
    }
    if base.initial_state_rank_deficient && !model.fixed_initial_state {
        for nu in &base.initial_state_null {
            let mut pass = hom.clone();
            pass.fixed_initial_state = true;
            pass.x0_bar = nu.clone();
            let p = param_bffd(&pass, &active)?;
            dirs.push(p.u.iter().map(|a| a.c0).collect());
        }
    }

    // Round response roundoff down to exact zeros so the touched set
    // stays as small as the face's true geometry.
    for d in dirs.iter_mut() {
        let scale = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let cut = 1e-12 * (1.0 + scale);
        for v in d.iter_mut() {
            if v.abs() <= cut {
                *v = 0.0;
            }
        }
    }
    dirs.retain(|d| d.iter().any(|&v| v != 0.0));
    if dirs.is_empty() {
        // The ambiguity lives entirely in the initial state; the costs
        // cannot see it, so any least-squares point works.
        return Ok(u_base);
    }

    let alpha = minimize_over_face(&model.costs, &u_base, &dirs)?;
    let mut u0 = u_base;
    for (j, d) in dirs.iter().enumerate() {
        if alpha[j] != 0.0 {
            for (ui, di) in u0.iter_mut().zip(d.iter()) {
                *ui += alpha[j] * di;
            }
        }
    }
    Ok(u0)
}

/// Exact minimization of Σκₙ(u_base[n] + Σⱼ αⱼ·dirs[j][n]) over α via an
/// epigraph linear program over the costs' line-piece extensions,
/// restricted to the coordinates the directions touch.
fn minimize_over_face(
    costs: &[SegmentedCost],
    u_base: &[f64],
    dirs: &[Vec<f64>],
) -> Result<Vec<f64>> {
    let n = u_base.len();
    let d2 = dirs.len();
    let touched: Vec<usize> = (0..n).filter(|&i| dirs.iter().any(|d| d[i] != 0.0)).collect();
    let t_count = touched.len();

    // One row per line piece: t_i ≥ s·(u_base[i] + Σⱼ αⱼ d_j[i]) + q,
    // where s·z + q is the piece's affine extension.
    struct RowSpec {
        coeff_alpha: Vec<f64>,
        t_index: usize,
        rhs: f64,
    }
    let mut specs: Vec<RowSpec> = Vec::new();
    for (ti, &i) in touched.iter().enumerate() {
        let cost = &costs[i];
        let bps = cost.breakpoints();
        for (j, &s) in cost.slopes().iter().enumerate() {
            let q = if bps.is_empty() {
                0.0
            } else if j == 0 {
                cost.eval(bps[0]) - s * bps[0]
            } else {
                cost.eval(bps[j - 1]) - s * bps[j - 1]
            };
            specs.push(RowSpec {
                coeff_alpha: dirs.iter().map(|d| -s * d[i]).collect(),
                t_index: ti,
                rhs: s * u_base[i] + q,
            });
        }
    }

    // Standard form with split signs: [α⁺ | α⁻ | t⁺ | t⁻ | surplus].
    let rows = specs.len();
    let cols = 2 * d2 + 2 * t_count + rows;
    let mut a = vec![0.0; rows * cols];
    let mut b = vec![0.0; rows];
    for (r, spec) in specs.iter().enumerate() {
        let mut scale = spec.rhs.abs();
        for &v in &spec.coeff_alpha {
            scale = scale.max(v.abs());
        }
        let scale = scale.max(1.0);
        let row = &mut a[r * cols..(r + 1) * cols];
        for (j, &v) in spec.coeff_alpha.iter().enumerate() {
            row[j] = v / scale;
            row[d2 + j] = -v / scale;
        }
        row[2 * d2 + spec.t_index] = 1.0 / scale;
        row[2 * d2 + t_count + spec.t_index] = -1.0 / scale;
        row[2 * d2 + 2 * t_count + r] = -1.0;
        b[r] = spec.rhs / scale;
    }
    let mut c = vec![0.0; cols];
    for ti in 0..t_count {
        c[2 * d2 + ti] = 1.0;
        c[2 * d2 + t_count + ti] = -1.0;
    }

    match solve_standard_form(rows, cols, &a, &b, &c) {
        LpOutcome::Optimal(x) => Ok((0..d2).map(|j| x[j] - x[d2 + j]).collect()),
        LpOutcome::Unbounded => Err(Error::UnboundedStart),
        LpOutcome::Infeasible => Err(Error::DegenerateMismatch {
            context: "startup face program reported infeasible".to_string(),
        }),
        LpOutcome::Stalled => Err(Error::DegenerateMismatch {
            context: "startup face program stalled".to_string(),
        }),
    }
}

/// The σ² = 0 estimate vector ŷ(0) for an output-regularized model: its
/// free response (zero inputs, initial state at the center x̆₀).
pub(super) fn output_start_values(model: &StateSpaceModel) -> Vec<f64> {
    model.simulate(&model.x0_bar, &vec![0.0; model.steps]).outputs
}
