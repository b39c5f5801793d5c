//! Exact regularization paths in the weight σ².
//!
//! With every penalized coordinate assigned to one segment of its
//! piecewise-linear convex cost, the regularized estimate is affine in σ²
//! and the assignment stays optimal on an interval of σ² values. At the
//! right end of that interval one coordinate's validity condition binds and
//! that coordinate hops to a neighboring segment. Sweeping σ² upward from 0
//! and chaining the intervals produces the complete piecewise-linear path
//! û(σ²) (input regularization, [`path_bffd`]) or ŷ(σ²) (output
//! regularization, [`path_ffbdd`]).

mod bootstrap;
mod simplex;

use serde::{Deserialize, Serialize};

use crate::parametric::{param_bffd, param_ffbdd, Basis, ParamAffine};
use crate::plcost::{Segment, SegmentedCost};
use crate::ssm::{RegSide, StateSpaceModel};
use crate::tol;
use crate::{Error, Result};

/// Segment assignment: one segment index per penalized coordinate.
pub type ActiveState = Vec<usize>;

/// One maximal interval `[lo, hi)` on which a single segment assignment is
/// optimal.
#[derive(Debug, Clone, PartialEq)]
pub struct PathPiece {
    /// Left end of the interval (a knot).
    pub lo: f64,
    /// Right end of the interval (the next knot; ∞ on the terminal piece).
    pub hi: f64,
    /// The assignment that is optimal on the interval.
    pub active: ActiveState,
    /// Closed-form estimates on the interval, affine in σ²: û for
    /// input-regularized models, ŷ for output-regularized ones.
    pub coeffs: Vec<ParamAffine>,
}

/// One segment change: at `sigma2`, coordinate `step` leaves `from_segment`
/// and enters `to_segment`.
///
/// Several events may share one σ² (simultaneous boundary hits). When a
/// chain of events fires at a single σ², the intermediate assignments are
/// optimal only at that point and get no piece of their own; the events
/// alone record the crossing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathEvent {
    /// Where the change happens.
    pub sigma2: f64,
    /// Penalized coordinate that moves (0-based).
    pub step: usize,
    /// Segment index it leaves.
    pub from_segment: usize,
    /// Segment index it enters.
    pub to_segment: usize,
}

/// A complete solution path over σ² ∈ [0, ∞).
///
/// Invariants (checked by [`RegPath::validate`]): knots start at 0, strictly
/// increase, and end at ∞ unless `truncated`; piece `i` spans
/// `[knots[i], knots[i+1])`; estimates are continuous across knots; the
/// event list turns each piece's assignment into the next one's.
#[derive(Debug, Clone, PartialEq)]
pub struct RegPath {
    /// Which variables the path describes (inputs or outputs).
    pub side: RegSide,
    /// Number of penalized coordinates N.
    pub steps: usize,
    /// Interval endpoints: `0 = knots[0] < knots[1] < …`.
    pub knots: Vec<f64>,
    /// One piece per consecutive knot pair.
    pub pieces: Vec<PathPiece>,
    /// All segment changes, in sweep order (σ² non-decreasing).
    pub events: Vec<PathEvent>,
    /// True when a knot budget stopped the sweep before the terminal piece.
    pub truncated: bool,
}

/// One validity requirement of an active segment, affine in σ²:
/// φ(σ²) = g·σ² + h ≥ 0, entering `to_segment` when it binds.
#[derive(Debug, Clone, Copy)]
struct Cond {
    g: f64,
    h: f64,
    to_segment: usize,
    /// Magnitude scale for deciding when `g` counts as zero.
    gscale: f64,
    /// Magnitude scale for deciding when `h` counts as zero.
    hscale: f64,
}

/// Validity conditions of segment `index` of `cost` for a coordinate whose
/// backed-off mean is `mb` (affine in σ²) and whose backed-off variance is
/// `v`·σ².
///
/// For a line piece the estimate `mb − slope·v·σ²` must stay inside the
/// subdomain; each finite end contributes one condition. For a kink the
/// slope reached inside the quadratic part, (mb − location)/(v·σ²), must
/// stay between the neighboring slopes; multiplying through by v·σ² ≥ 0
/// makes both conditions affine in σ².
fn segment_conditions(cost: &SegmentedCost, index: usize, mb: ParamAffine, v: f64) -> Vec<Cond> {
    let mut conds = Vec::with_capacity(2);
    match cost.segment(index) {
        Segment::Line { slope, lo, hi } => {
            let est_c1 = mb.c1 - slope * v;
            let gscale = 1.0 + mb.c1.abs() + slope.abs() * v;
            if lo.is_finite() {
                conds.push(Cond {
                    g: est_c1,
                    h: mb.c0 - lo,
                    to_segment: index - 1,
                    gscale,
                    hscale: 1.0 + mb.c0.abs() + lo.abs(),
                });
            }
            if hi.is_finite() {
                conds.push(Cond {
                    g: -est_c1,
                    h: hi - mb.c0,
                    to_segment: index + 1,
                    gscale,
                    hscale: 1.0 + mb.c0.abs() + hi.abs(),
                });
            }
        }
        Segment::Point { location } => {
            let (sl, sr) = cost.point_neighbor_slopes(index);
            let hscale = 1.0 + mb.c0.abs() + location.abs();
            conds.push(Cond {
                g: mb.c1 - sl * v,
                h: mb.c0 - location,
                to_segment: index - 1,
                gscale: 1.0 + mb.c1.abs() + sl.abs() * v,
                hscale,
            });
            conds.push(Cond {
                g: sr * v - mb.c1,
                h: location - mb.c0,
                to_segment: index + 1,
                gscale: 1.0 + mb.c1.abs() + sr.abs() * v,
                hscale,
            });
        }
    }
    conds
}

/// Validate the (mean, variance) pair handed to [`exit_sigma2`] /
/// [`next_segment`] and extract the variance slope.
fn check_pair(mb: ParamAffine, vb: ParamAffine) -> Result<f64> {
    if mb.basis != Basis::Sigma2 && !mb.is_constant() {
        return Err(Error::InvalidParameter {
            name: "mb",
            reason: "the backed-off mean must be affine in σ², not 1/σ²".to_string(),
        });
    }
    if vb.basis != Basis::Sigma2 && !vb.is_constant() {
        return Err(Error::InvalidParameter {
            name: "vb",
            reason: "the backed-off variance must be linear in σ², not 1/σ²".to_string(),
        });
    }
    if vb.c0 != 0.0 {
        return Err(Error::InvalidParameter {
            name: "vb",
            reason: format!(
                "the backed-off variance must vanish at σ² = 0 (constant part {})",
                vb.c0
            ),
        });
    }
    if !(vb.c1 >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "vb",
            reason: format!("the backed-off variance slope must be nonnegative, got {}", vb.c1),
        });
    }
    Ok(vb.c1)
}

/// Largest σ² (at or after `prev_knot`) for which `index` is still the valid
/// segment of `cost`, given the coordinate's closed-form pair: backed-off
/// mean `mb` affine in σ² and backed-off variance `vb` purely linear in σ².
///
/// Every validity condition of a segment is affine in σ², so the valid set
/// is an interval; this returns its right end (possibly ∞).
///
/// # Errors
/// - [`Error::InvalidParameter`] if `vb` has a constant part or a negative
///   slope, or either argument uses the 1/σ² basis.
/// - [`Error::Infeasible`] if the valid interval is empty (carries the
///   segment index).
/// - [`Error::BookkeepingBug`] if the interval ends before `prev_knot`, i.e.
///   the caller believed the segment was still active past its exit.
pub fn exit_sigma2(
    cost: &SegmentedCost,
    index: usize,
    mb: ParamAffine,
    vb: ParamAffine,
    prev_knot: f64,
) -> Result<f64> {
    let v = check_pair(mb, vb)?;
    let mut lo = 0.0_f64;
    let mut hi = f64::INFINITY;
    for c in segment_conditions(cost, index, mb, v) {
        if c.g.abs() <= tol::scalar_zero(c.gscale) {
            // Constant condition: either always satisfied or never.
            if c.h < -tol::knot_eps(0.0) * c.hscale {
                return Err(Error::Infeasible { index });
            }
            continue;
        }
        let bound = -c.h / c.g;
        if c.g > 0.0 {
            lo = lo.max(bound);
        } else {
            hi = hi.min(bound);
        }
    }
    if lo > hi + tol::knot_eps(hi.max(0.0)) {
        return Err(Error::Infeasible { index });
    }
    if hi < prev_knot - tol::knot_eps(prev_knot) {
        return Err(Error::BookkeepingBug {
            index,
            exit: hi,
            knot: prev_knot,
        });
    }
    Ok(hi)
}

/// Neighbor segment entered when the validity of `index` expires at `knot`.
///
/// Scans the segment's conditions for one that is decreasing in σ² and
/// numerically zero at `knot`.
///
/// # Errors
/// - [`Error::AmbiguousTransition`] if two conditions with distinct targets
///   bind at once.
/// - [`Error::DegenerateMismatch`] if nothing binds at `knot` (the claimed
///   exit is inconsistent with the conditions).
/// - [`Error::InvalidParameter`] as for [`exit_sigma2`].
pub fn next_segment(
    cost: &SegmentedCost,
    index: usize,
    mb: ParamAffine,
    vb: ParamAffine,
    knot: f64,
) -> Result<usize> {
    let v = check_pair(mb, vb)?;
    let mut binding: Option<usize> = None;
    for c in segment_conditions(cost, index, mb, v) {
        if c.g >= 0.0 {
            continue; // non-decreasing conditions never expire
        }
        let phi = c.g * knot + c.h;
        if phi.abs() <= tol::knot_eps(knot) * (1.0 + c.g.abs()) {
            match binding {
                Some(to) if to != c.to_segment => {
                    return Err(Error::AmbiguousTransition { index });
                }
                _ => binding = Some(c.to_segment),
            }
        }
    }
    binding.ok_or_else(|| Error::DegenerateMismatch {
        context: format!("no boundary of segment {index} binds at σ² = {knot}"),
    })
}

/// Per-coordinate closed forms for one assignment: the estimates (affine in
/// σ²) and, where defined, the (backed-off mean, variance slope) pair that
/// feeds the validity conditions. `None` marks a clamped coordinate with no
/// information flowing against the sweep direction; such a coordinate stays
/// clamped for all σ².
type CoordData = (Vec<ParamAffine>, Vec<Option<(ParamAffine, f64)>>);

/// Map an error raised with a segment index to the coordinate that owns it.
fn relabel(err: Error, step: usize) -> Error {
    match err {
        Error::Infeasible { .. } => Error::Infeasible { index: step },
        Error::BookkeepingBug { exit, knot, .. } => Error::BookkeepingBug {
            index: step,
            exit,
            knot,
        },
        Error::AmbiguousTransition { .. } => Error::AmbiguousTransition { index: step },
        other => other,
    }
}

/// Choose the kink a just-unidentifiable line coordinate snaps to.
///
/// A line coordinate loses identifiability exactly when the quadratic part
/// is flat along it, so the cost decides alone: move toward decreasing cost
/// (left kink for positive slope, right kink for negative slope); from a
/// flat piece take the kink nearest the last known value. A missing kink on
/// the chosen side means the objective decreases without bound.
fn snap_to_kink(cost: &SegmentedCost, seg: usize, hint: f64) -> Result<usize> {
    let slope = cost.slopes()[seg / 2];
    let last = cost.num_segments() - 1;
    let target = if slope > 0.0 {
        (seg > 0).then(|| seg - 1)
    } else if slope < 0.0 {
        (seg < last).then(|| seg + 1)
    } else {
        let left = (seg > 0).then(|| seg - 1);
        let right = (seg < last).then(|| seg + 1);
        match (left, right) {
            (Some(l), Some(r)) => {
                let bl = cost.breakpoints()[l / 2];
                let br = cost.breakpoints()[r / 2];
                Some(if (hint - bl).abs() <= (hint - br).abs() { l } else { r })
            }
            (l, r) => l.or(r),
        }
    };
    target.ok_or(Error::UnboundedStart)
}

/// First coordinate whose assigned segment is invalid in the limit σ² → 0⁺,
/// together with the segment its violated condition points to.
fn first_invalid_at_zero(
    costs: &[SegmentedCost],
    assignment: &[usize],
    pairs: &[Option<(ParamAffine, f64)>],
) -> Option<(usize, usize)> {
    for (n, pair) in pairs.iter().enumerate() {
        let Some((mb, v)) = *pair else { continue };
        for c in segment_conditions(&costs[n], assignment[n], mb, v) {
            let th = tol::knot_eps(0.0) * c.hscale;
            let ok = if c.h > th {
                true
            } else if c.h < -th {
                false
            } else {
                // On the boundary at σ² = 0: the condition must not move
                // into the forbidden side as σ² grows.
                c.g >= -tol::scalar_zero(c.gscale)
            };
            if !ok {
                return Some((n, c.to_segment));
            }
        }
    }
    None
}

/// Settle a candidate start assignment into one that is optimal in the
/// limit σ² → 0⁺, relocating coordinates one at a time.
fn settle_start<F>(
    model: &StateSpaceModel,
    mut assignment: ActiveState,
    mut hint: Vec<f64>,
    recompute: &F,
    total_segments: usize,
) -> Result<ActiveState>
where
    F: Fn(&ActiveState) -> Result<CoordData>,
{
    let cap = 4 * total_segments + 16;
    for _ in 0..cap {
        match recompute(&assignment) {
            Err(Error::Unidentifiable { index }) => {
                if assignment[index] % 2 == 1 {
                    // A clamped coordinate with no usable observation
                    // cannot be repaired by moving it.
                    return Err(Error::Unidentifiable { index });
                }
                let to = snap_to_kink(&model.costs[index], assignment[index], hint[index])?;
                assignment[index] = to;
                hint[index] = model.costs[index].breakpoints()[to / 2];
            }
            Err(e) => return Err(e),
            Ok((_, pairs)) => {
                match first_invalid_at_zero(&model.costs, &assignment, &pairs) {
                    None => return Ok(assignment),
                    Some((n, to)) => {
                        assignment[n] = to;
                        if to % 2 == 1 {
                            hint[n] = model.costs[n].breakpoints()[to / 2];
                        }
                    }
                }
            }
        }
    }
    Err(Error::IterationCap { iterations: cap })
}

/// Sweep σ² upward from 0, chaining optimal intervals until the terminal
/// piece (or the knot budget) is reached.
fn drive_path<F>(
    model: &StateSpaceModel,
    mut assignment: ActiveState,
    recompute: &F,
    budget: Option<usize>,
    total_segments: usize,
) -> Result<RegPath>
where
    F: Fn(&ActiveState) -> Result<CoordData>,
{
    let steps = model.steps;
    let cap = 10 * total_segments;
    let (mut est, mut pairs) = recompute(&assignment)?;
    let mut knots = vec![0.0_f64];
    let mut pieces: Vec<PathPiece> = Vec::new();
    let mut events: Vec<PathEvent> = Vec::new();
    let mut prev = 0.0_f64;
    let mut exits = vec![f64::INFINITY; steps];
    for _ in 0..cap {
        for n in 0..steps {
            exits[n] = match pairs[n] {
                None => f64::INFINITY,
                Some((mb, v)) => {
                    exit_sigma2(&model.costs[n], assignment[n], mb, ParamAffine::in_sigma2(v, 0.0), prev)
                        .map_err(|e| relabel(e, n))?
                }
            };
        }
        let kmin = exits.iter().copied().fold(f64::INFINITY, f64::min);
        if kmin == f64::INFINITY {
            pieces.push(PathPiece {
                lo: prev,
                hi: f64::INFINITY,
                active: assignment.clone(),
                coeffs: est.clone(),
            });
            knots.push(f64::INFINITY);
            return Ok(RegPath {
                side: model.side,
                steps,
                knots,
                pieces,
                events,
                truncated: false,
            });
        }
        let n = (0..steps)
            .find(|&i| exits[i] <= kmin + tol::knot_eps(kmin))
            .expect("the minimum exit is attained");
        let k = exits[n];
        if k > prev + tol::knot_eps(prev) {
            pieces.push(PathPiece {
                lo: prev,
                hi: k,
                active: assignment.clone(),
                coeffs: est.clone(),
            });
            knots.push(k);
            prev = k;
            if let Some(b) = budget {
                if knots.len() - 1 >= b {
                    return Ok(RegPath {
                        side: model.side,
                        steps,
                        knots,
                        pieces,
                        events,
                        truncated: true,
                    });
                }
            }
        }
        let (mb, v) = pairs[n].expect("a finite exit comes from a condition pair");
        let to = next_segment(&model.costs[n], assignment[n], mb, ParamAffine::in_sigma2(v, 0.0), k)
            .map_err(|e| relabel(e, n))?;
        events.push(PathEvent {
            sigma2: prev,
            step: n,
            from_segment: assignment[n],
            to_segment: to,
        });
        assignment[n] = to;
        let next = recompute(&assignment)?;
        est = next.0;
        pairs = next.1;
    }
    Err(Error::IterationCap { iterations: cap })
}

/// Closed forms for an input-regularized assignment.
fn recompute_input(model: &StateSpaceModel, active: &ActiveState) -> Result<CoordData> {
    let p = param_bffd(model, active)?;
    let pairs = p
        .mb_u
        .iter()
        .zip(p.vb_u.iter())
        .map(|(mb, v)| mb.and_then(|m| v.map(|vv| (m, vv))))
        .collect();
    Ok((p.u, pairs))
}

/// Closed forms for an output-regularized assignment.
fn recompute_output(model: &StateSpaceModel, active: &ActiveState) -> Result<CoordData> {
    let p = param_ffbdd(model, active)?;
    let pairs = p
        .mf_y
        .iter()
        .zip(p.vf_y.iter())
        .map(|(&m, &v)| Some((m, v)))
        .collect();
    Ok((p.y, pairs))
}

fn path_bffd_inner(model: &StateSpaceModel, budget: Option<usize>) -> Result<RegPath> {
    let report = model.validate()?;
    if model.side != RegSide::Input {
        return Err(Error::InvalidModel {
            reason: "input-side path requested for an output-regularized model".to_string(),
        });
    }
    let recompute = |active: &ActiveState| recompute_input(model, active);
    let u0 = bootstrap::input_start_values(model)?;
    let assignment: ActiveState = u0
        .iter()
        .zip(model.costs.iter())
        .map(|(&u, cost)| cost.locate_snapped(u, tol::KINK_REL))
        .collect();
    let assignment = settle_start(model, assignment, u0, &recompute, report.total_segments)?;
    drive_path(model, assignment, &recompute, budget, report.total_segments)
}

fn path_ffbdd_inner(model: &StateSpaceModel, budget: Option<usize>) -> Result<RegPath> {
    let report = model.validate()?;
    if model.side != RegSide::Output {
        return Err(Error::InvalidModel {
            reason: "output-side path requested for an input-regularized model".to_string(),
        });
    }
    let recompute = |active: &ActiveState| recompute_output(model, active);
    let y0 = bootstrap::output_start_values(model);
    let assignment: ActiveState = y0
        .iter()
        .zip(model.costs.iter())
        .map(|(&y, cost)| cost.locate_snapped(y, tol::KINK_REL))
        .collect();
    let assignment = settle_start(model, assignment, y0, &recompute, report.total_segments)?;
    drive_path(model, assignment, &recompute, budget, report.total_segments)
}

/// Complete input-regularization path û(σ²) of an input-side model.
///
/// Starts at the σ² → 0⁺ optimum (the least-squares face point of minimal
/// penalty) and sweeps upward until every coordinate's assignment is valid
/// for all remaining σ².
pub fn path_bffd(model: &StateSpaceModel) -> Result<RegPath> {
    path_bffd_inner(model, None)
}

/// Like [`path_bffd`], but stops after `max_knots` finite knots and marks
/// the result truncated. Transitions at the final knot are not expanded.
pub fn path_bffd_limited(model: &StateSpaceModel, max_knots: usize) -> Result<RegPath> {
    if max_knots == 0 {
        return Err(Error::InvalidParameter {
            name: "max_knots",
            reason: "the knot budget must be at least 1".to_string(),
        });
    }
    path_bffd_inner(model, Some(max_knots))
}

/// Complete output-regularization path ŷ(σ²) of an output-side model.
///
/// Starts at the free response (the σ² → 0⁺ optimum, where the quadratic
/// part fully dominates) and sweeps upward.
pub fn path_ffbdd(model: &StateSpaceModel) -> Result<RegPath> {
    path_ffbdd_inner(model, None)
}

/// Like [`path_ffbdd`], but stops after `max_knots` finite knots and marks
/// the result truncated. Transitions at the final knot are not expanded.
pub fn path_ffbdd_limited(model: &StateSpaceModel, max_knots: usize) -> Result<RegPath> {
    if max_knots == 0 {
        return Err(Error::InvalidParameter {
            name: "max_knots",
            reason: "the knot budget must be at least 1".to_string(),
        });
    }
    path_ffbdd_inner(model, Some(max_knots))
}

/// Evaluate a path at one σ² ≥ 0 (∞ allowed).
///
/// Intervals are closed on the left: at a knot the piece to the right wins.
/// Beyond the last knot of a truncated path the final piece extrapolates.
///
/// # Panics
/// If `sigma2` is negative or NaN, or the path has no pieces.
pub fn eval_path(path: &RegPath, sigma2: f64) -> Vec<f64> {
    assert!(sigma2 >= 0.0, "sigma2 must be nonnegative, got {sigma2}");
    assert!(!path.pieces.is_empty(), "path has no pieces");
    let mut idx = path.pieces.partition_point(|p| p.hi <= sigma2);
    if idx == path.pieces.len() {
        idx -= 1;
    }
    let piece = &path.pieces[idx];
    if sigma2.is_finite() {
        piece.coeffs.iter().map(|a| a.eval(sigma2)).collect()
    } else {
        piece
            .coeffs
            .iter()
            .map(|a| if a.c1 == 0.0 { a.c0 } else { f64::INFINITY * a.c1.signum() })
            .collect()
    }
}

impl RegPath {
    /// Check the structural invariants: knot ordering, piece/knot alignment,
    /// continuity of the estimates across knots, and consistency of the
    /// event list with the per-piece assignments.
    pub fn validate(&self) -> Result<()> {
        let bad = |reason: String| -> Result<()> { Err(Error::Malformed { reason }) };
        if self.steps == 0 {
            return bad("path has zero coordinates".to_string());
        }
        if self.pieces.is_empty() || self.knots.len() != self.pieces.len() + 1 {
            return bad(format!(
                "{} knots do not delimit {} pieces",
                self.knots.len(),
                self.pieces.len()
            ));
        }
        if self.knots[0] != 0.0 {
            return bad(format!("first knot is {}, not 0", self.knots[0]));
        }
        for w in self.knots.windows(2) {
            if !(w[0] < w[1]) {
                return bad(format!("knots {} and {} are not increasing", w[0], w[1]));
            }
        }
        let last = *self.knots.last().expect("nonempty");
        if self.truncated {
            if !last.is_finite() {
                return bad("truncated path ends at an infinite knot".to_string());
            }
        } else if last != f64::INFINITY {
            return bad(format!("complete path ends at finite knot {last}"));
        }
        for (i, piece) in self.pieces.iter().enumerate() {
            if piece.lo != self.knots[i] || piece.hi != self.knots[i + 1] {
                return bad(format!("piece {i} does not span its knots"));
            }
            if piece.active.len() != self.steps || piece.coeffs.len() != self.steps {
                return bad(format!("piece {i} has the wrong width"));
            }
            for a in &piece.coeffs {
                if a.basis != Basis::Sigma2 || !a.c1.is_finite() || !a.c0.is_finite() {
                    return bad(format!("piece {i} has a malformed coefficient"));
                }
            }
        }
        for i in 0..self.pieces.len() - 1 {
            let k = self.knots[i + 1];
            for (n, (a, b)) in self.pieces[i]
                .coeffs
                .iter()
                .zip(self.pieces[i + 1].coeffs.iter())
                .enumerate()
            {
                let va = a.eval(k);
                let vb = b.eval(k);
                let cap = tol::knot_eps(k) * (1.0 + va.abs().max(vb.abs()));
                if !((va - vb).abs() <= cap) {
                    return bad(format!(
                        "coordinate {n} jumps from {va} to {vb} at knot {k}"
                    ));
                }
            }
        }
        for e in &self.events {
            if e.step >= self.steps {
                return bad(format!("event names coordinate {} of {}", e.step, self.steps));
            }
            if e.from_segment == e.to_segment {
                return bad(format!("event at σ² = {} goes nowhere", e.sigma2));
            }
            if !self.knots.contains(&e.sigma2) {
                return bad(format!("event at σ² = {} is not anchored at a knot", e.sigma2));
            }
        }
        for i in 1..self.pieces.len() {
            let k = self.knots[i];
            let mut active = self.pieces[i - 1].active.clone();
            let mut any = false;
            for e in self.events.iter().filter(|e| e.sigma2 == k) {
                any = true;
                if active[e.step] != e.from_segment {
                    return bad(format!("event chain at knot {k} leaves the wrong segment"));
                }
                active[e.step] = e.to_segment;
            }
            if !any {
                return bad(format!("no event explains the knot at {k}"));
            }
            if active != self.pieces[i].active {
                return bad(format!(
                    "events at knot {k} do not produce the next assignment"
                ));
            }
        }
        Ok(())
    }

    /// Serialize to JSON. Infinite interval ends are written as the string
    /// `"inf"`; all finite numbers round-trip bit-exactly.
    pub fn to_json(&self) -> String {
        let mirror = RegPathJson {
            side: match self.side {
                RegSide::Input => "input",
                RegSide::Output => "output",
            }
            .to_string(),
            steps: self.steps,
            knots: self.knots.iter().map(|&k| JsonReal::pack(k)).collect(),
            pieces: self
                .pieces
                .iter()
                .map(|p| PieceJson {
                    interval: [JsonReal::pack(p.lo), JsonReal::pack(p.hi)],
                    active: p.active.clone(),
                    coeffs: p.coeffs.iter().map(|a| [a.c1, a.c0]).collect(),
                })
                .collect(),
            events: self
                .events
                .iter()
                .map(|e| EventJson {
                    sigma2: e.sigma2,
                    step: e.step,
                    from_segment: e.from_segment,
                    to_segment: e.to_segment,
                })
                .collect(),
            truncated: self.truncated,
        };
        serde_json::to_string_pretty(&mirror).expect("path serialization cannot fail")
    }

    /// Parse a path serialized by [`RegPath::to_json`] and re-check its
    /// invariants.
    pub fn from_json(text: &str) -> Result<RegPath> {
        let mirror: RegPathJson = serde_json::from_str(text).map_err(|e| Error::Malformed {
            reason: format!("path JSON parse error: {e}"),
        })?;
        let side = match mirror.side.as_str() {
            "input" => RegSide::Input,
            "output" => RegSide::Output,
            other => {
                return Err(Error::Malformed {
                    reason: format!("unknown side {other:?}"),
                })
            }
        };
        let mut knots = Vec::with_capacity(mirror.knots.len());
        for k in &mirror.knots {
            knots.push(k.unpack()?);
        }
        let mut pieces = Vec::with_capacity(mirror.pieces.len());
        for p in &mirror.pieces {
            pieces.push(PathPiece {
                lo: p.interval[0].unpack()?,
                hi: p.interval[1].unpack()?,
                active: p.active.clone(),
                coeffs: p
                    .coeffs
                    .iter()
                    .map(|c| ParamAffine::in_sigma2(c[0], c[1]))
                    .collect(),
            });
        }
        let events = mirror
            .events
            .iter()
            .map(|e| PathEvent {
                sigma2: e.sigma2,
                step: e.step,
                from_segment: e.from_segment,
                to_segment: e.to_segment,
            })
            .collect();
        let path = RegPath {
            side,
            steps: mirror.steps,
            knots,
            pieces,
            events,
            truncated: mirror.truncated,
        };
        path.validate()?;
        Ok(path)
    }
}

/// A real number in JSON: a finite literal, or the string `"inf"`.
#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum JsonReal {
    Num(f64),
    Word(String),
}

impl JsonReal {
    fn pack(v: f64) -> Self {
        if v.is_finite() {
            JsonReal::Num(v)
        } else {
            JsonReal::Word("inf".to_string())
        }
    }

    fn unpack(&self) -> Result<f64> {
        match self {
            JsonReal::Num(v) if v.is_finite() => Ok(*v),
            JsonReal::Num(v) => Err(Error::Malformed {
                reason: format!("non-finite numeric literal {v}"),
            }),
            JsonReal::Word(w) if w == "inf" => Ok(f64::INFINITY),
            JsonReal::Word(w) => Err(Error::Malformed {
                reason: format!("unrecognized numeric word {w:?}"),
            }),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct PieceJson {
    interval: [JsonReal; 2],
    active: Vec<usize>,
    /// One `[c1, c0]` pair per coordinate: the estimate is `c1·σ² + c0`.
    coeffs: Vec<[f64; 2]>,
}

#[derive(Serialize, Deserialize)]
struct EventJson {
    sigma2: f64,
    step: usize,
    from_segment: usize,
    to_segment: usize,
}

#[derive(Serialize, Deserialize)]
struct RegPathJson {
    side: String,
    steps: usize,
    knots: Vec<JsonReal>,
    pieces: Vec<PieceJson>,
    events: Vec<EventJson>,
    truncated: bool,
}
