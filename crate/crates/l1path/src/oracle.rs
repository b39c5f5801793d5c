//! Independent optimality oracle.
//!
//! Everything in this module exists to *check* the message-passing
//! machinery, so it deliberately shares no numerical routines with it:
//! the problems are flattened to dense quadratics assembled from the
//! model's recursion, solved by this module's own LU factorization,
//! power iteration, and first-order methods (FISTA for input-regularized
//! problems, ADMM for output-regularized ones), and judged by explicit
//! subgradient stationarity residuals. Only the model definition
//! ([`crate::ssm`]) and the cost evaluation/decision rules
//! ([`crate::plcost`]) are shared — they are the problem statement.
//!
//! The methods are first-order proximal schemes with exact
//! piecewise-linear proximal maps; each solve reports a verified KKT
//! residual rather than trusting an iteration count.

use nalgebra::DVector;

use crate::plcost::Segment;
use crate::ssm::{RegSide, StateSpaceModel};
use crate::tol;
use crate::{Error, Result};

/// Outcome of an oracle solve.
#[derive(Debug, Clone, PartialEq)]
pub struct OptReport {
    /// Objective value at the returned point.
    pub objective: f64,
    /// Verified stationarity residual (∞-norm distance of the negative
    /// quadratic gradient to the scaled subdifferential).
    pub kkt_residual: f64,
    /// Iterations spent.
    pub iterations: usize,
    /// Whether the residual target was met within the iteration budget.
    pub converged: bool,
}

/// A solution produced by the oracle.
#[derive(Debug, Clone)]
pub struct OracleSolution {
    /// Initial-state estimate.
    pub x0: DVector<f64>,
    /// Input estimates.
    pub u: Vec<f64>,
    /// Solve diagnostics.
    pub report: OptReport,
}

/// Result of a fixed-assignment restricted solve.
#[derive(Debug, Clone)]
pub struct FixedAssignmentSolve {
    /// Initial-state estimate.
    pub x0: DVector<f64>,
    /// Input estimates.
    pub u: Vec<f64>,
    /// Regularized-variable values (inputs or outputs depending on side).
    pub values: Vec<f64>,
    /// True objective (quadratic + 2σ²·Σκ) at the point.
    pub objective: f64,
    /// Whether every line-assigned coordinate's value lies inside its
    /// piece's subdomain.
    pub feasible: bool,
}

/// Result of exhaustive active-set enumeration.
#[derive(Debug, Clone)]
pub struct BruteForceResult {
    /// Winning segment index per coordinate.
    pub assignment: Vec<usize>,
    /// Initial-state estimate.
    pub x0: DVector<f64>,
    /// Input estimates.
    pub u: Vec<f64>,
    /// Global minimum objective.
    pub objective: f64,
}

// ---------------------------------------------------------------------
// Dense flattening of the model
// ---------------------------------------------------------------------

/// Dense form of the quadratic part and the regularized-variable map.
///
/// Variables z stack the free initial state (when present) before the
/// inputs. The quadratic part is q(z) = zᵀHz − 2gᵀz + r; the regularized
/// variable (inputs or outputs) is v(z) = Jv·z + v0.
struct DenseProblem {
    dim: usize,
    m_free: usize,
    h: Vec<f64>,
    g: Vec<f64>,
    r: f64,
    jv: Vec<f64>,
    v0: Vec<f64>,
}

impl DenseProblem {
    fn assemble(model: &StateSpaceModel) -> Self {
        let m = model.state_dim;
        let n = model.steps;
        let m_free = if model.fixed_initial_state { 0 } else { m };
        let dim = m_free + n;

        // Linear responses: column i of every residual map, from the
        // model recursion applied to unit excursions.
        let base_x0 =
            if model.fixed_initial_state { model.x0_bar.clone() } else { DVector::zeros(m) };
        let base = model.simulate(&base_x0, &vec![0.0; n]);

        // Per column: output responses (N) and end-state response (M).
        let mut out_resp = vec![0.0; n * dim];
        let mut end_resp = vec![0.0; m * dim];
        for i in 0..dim {
            let (dx0, mut du) = (DVector::zeros(m), vec![0.0; n]);
            let mut dx0 = dx0;
            if i < m_free {
                dx0[i] = 1.0;
            } else {
                du[i - m_free] = 1.0;
            }
            let resp = model.simulate(&dx0, &du);
            for s in 0..n {
                out_resp[s * dim + i] = resp.outputs[s];
            }
            let xe = &resp.states[n];
            for rr in 0..m {
                end_resp[rr * dim + i] = xe[rr];
            }
        }

        // Offsets at z = 0.
        let out0: Vec<f64> =
            base.outputs.iter().zip(&model.y).map(|(yb, &yd)| yb - yd).collect();
        let end0: Vec<f64> =
            (0..m).map(|rr| base.states[n][rr] - model.xn_bar[rr]).collect();
        let x00: Vec<f64> = (0..m).map(|rr| base_x0[rr] - model.x0_bar[rr]).collect();

        let mut h = vec![0.0; dim * dim];
        let mut g = vec![0.0; dim];
        let mut r = 0.0;

        // End term (x_N − x̆_N)ᵀ Q_N (x_N − x̆_N), and for the input side
        // the observation residuals Σ (yₙ − y̆ₙ)².
        // Generic accumulation of (Sz + s0)ᵀ W (Sz + s0):
        let add_quad = |s: &[f64], s0: &[f64], w: Option<&nalgebra::DMatrix<f64>>,
                            h: &mut [f64], g: &mut [f64], r: &mut f64| {
            let rows = s0.len();
            // Ws0 and WS.
            let mut ws0 = vec![0.0; rows];
            let mut ws = vec![0.0; rows * dim];
            for a in 0..rows {
                match w {
                    None => {
                        ws0[a] = s0[a];
                        ws[a * dim..(a + 1) * dim]
                            .copy_from_slice(&s[a * dim..(a + 1) * dim]);
                    }
                    Some(wm) => {
                        for bidx in 0..rows {
                            ws0[a] += wm[(a, bidx)] * s0[bidx];
                            for j in 0..dim {
                                ws[a * dim + j] += wm[(a, bidx)] * s[bidx * dim + j];
                            }
                        }
                    }
                }
            }
            for a in 0..rows {
                *r += s0[a] * ws0[a];
                for j in 0..dim {
                    g[j] -= s[a * dim + j] * ws0[a];
                }
                for i in 0..dim {
                    let sai = s[a * dim + i];
                    if sai == 0.0 {
                        continue;
                    }
                    for j in 0..dim {
                        h[i * dim + j] += sai * ws[a * dim + j];
                    }
                }
            }
        };

        if model.side == RegSide::Input {
            add_quad(&out_resp, &out0, None, &mut h, &mut g, &mut r);
        } else {
            // Quadratic input penalty Σ uₙ²: selector rows for u coords.
            let mut sel = vec![0.0; n * dim];
            for s in 0..n {
                sel[s * dim + m_free + s] = 1.0;
            }
            add_quad(&sel, &vec![0.0; n], None, &mut h, &mut g, &mut r);
        }
        add_quad(&end_resp, &end0, Some(&model.qn), &mut h, &mut g, &mut r);
        if m_free > 0 {
            // Initial-state prior rows: identity on the x0 block.
            let mut s0rows = vec![0.0; m * dim];
            for a in 0..m {
                s0rows[a * dim + a] = 1.0;
            }
            add_quad(&s0rows, &x00, Some(&model.q0), &mut h, &mut g, &mut r);
        }
        // The accumulation produces g with a sign such that q(z) =
        // zᵀHz − 2gᵀz + r; `add_quad` already subtracts Sᵀ(W s0) into g.

        let (jv, v0) = match model.side {
            RegSide::Input => {
                let mut sel = vec![0.0; n * dim];
                for s in 0..n {
                    sel[s * dim + m_free + s] = 1.0;
                }
                (sel, vec![0.0; n])
            }
            RegSide::Output => (out_resp.clone(), base.outputs.clone()),
        };

        DenseProblem { dim, m_free, h, g, r, jv, v0 }
    }

    fn quad(&self, z: &[f64]) -> f64 {
        let hz = matvec(&self.h, z, self.dim, self.dim);
        let mut val = self.r;
        for i in 0..self.dim {
            val += z[i] * hz[i] - 2.0 * self.g[i] * z[i];
        }
        val
    }

    /// ∇q(z) = 2(Hz − g).
    fn grad(&self, z: &[f64]) -> Vec<f64> {
        let mut hz = matvec(&self.h, z, self.dim, self.dim);
        for i in 0..self.dim {
            hz[i] = 2.0 * (hz[i] - self.g[i]);
        }
        hz
    }

    fn values(&self, z: &[f64]) -> Vec<f64> {
        let mut v = matvec(&self.jv, z, self.v0.len(), self.dim);
        for (vi, v0i) in v.iter_mut().zip(&self.v0) {
            *vi += v0i;
        }
        v
    }

    fn split(&self, model: &StateSpaceModel, z: &[f64]) -> (DVector<f64>, Vec<f64>) {
        let x0 = if model.fixed_initial_state {
            model.x0_bar.clone()
        } else {
            DVector::from_column_slice(&z[..self.m_free])
        };
        (x0, z[self.m_free..].to_vec())
    }
}

// ---------------------------------------------------------------------
// Local dense linear algebra (this module's own)
// ---------------------------------------------------------------------

fn matvec(a: &[f64], x: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut y = vec![0.0; rows];
    for i in 0..rows {
        let mut acc = 0.0;
        for j in 0..cols {
            acc += a[i * cols + j] * x[j];
        }
        y[i] = acc;
    }
    y
}

/// LU factorization with partial pivoting of a square matrix (row-major,
/// modified in place). Returns the pivot row order.
fn lu_factor(a: &mut [f64], n: usize) -> Result<Vec<usize>> {
    let scale = a.iter().fold(0.0_f64, |m, &v| m.max(v.abs()));
    let mut piv: Vec<usize> = (0..n).collect();
    for k in 0..n {
        let mut best = k;
        let mut best_abs = a[piv[k] * n + k].abs();
        for r in (k + 1)..n {
            let v = a[piv[r] * n + k].abs();
            if v > best_abs {
                best = r;
                best_abs = v;
            }
        }
        piv.swap(k, best);
        let pk = piv[k];
        let pivot = a[pk * n + k];
        if pivot.abs() <= 1e-13 * (1.0 + scale) {
            return Err(Error::NotInvertible { cond: f64::INFINITY });
        }
        for r in (k + 1)..n {
            let pr = piv[r];
            let factor = a[pr * n + k] / pivot;
            a[pr * n + k] = factor;
            for j in (k + 1)..n {
                a[pr * n + j] -= factor * a[pk * n + j];
            }
        }
    }
    Ok(piv)
}

fn lu_solve(a: &[f64], piv: &[usize], n: usize, b: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; n];
    for k in 0..n {
        let mut acc = b[piv[k]];
        for j in 0..k {
            acc -= a[piv[k] * n + j] * y[j];
        }
        y[k] = acc;
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let mut acc = y[k];
        for j in (k + 1)..n {
            acc -= a[piv[k] * n + j] * x[j];
        }
        x[k] = acc / a[piv[k] * n + k];
    }
    x
}

fn solve_dense(a: &[f64], n: usize, b: &[f64]) -> Result<Vec<f64>> {
    let mut lu = a.to_vec();
    let piv = lu_factor(&mut lu, n)?;
    Ok(lu_solve(&lu, &piv, n, b))
}

/// Largest eigenvalue estimate of a symmetric PSD matrix by power
/// iteration (deterministic start).
fn lambda_max(a: &[f64], n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.01 * (i as f64 + 1.0)).collect();
    let mut lam = 0.0;
    for _ in 0..300 {
        let w = matvec(a, &v, n, n);
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        lam = v.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>()
            / v.iter().map(|x| x * x).sum::<f64>();
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / norm;
        }
    }
    lam.abs()
}

// ---------------------------------------------------------------------
// Stationarity residuals
// ---------------------------------------------------------------------

/// Stationarity residual of an input-regularized problem at `u`.
///
/// The free initial state (when present) is first minimized out exactly;
/// the residual is then the ∞-norm over coordinates of the distance from
/// −∂q/∂uₙ to 2σ²·∂κₙ(uₙ), plus any leftover initial-state gradient.
pub fn kkt_residual_input(model: &StateSpaceModel, sigma2: f64, u: &[f64]) -> Result<f64> {
    if model.side != RegSide::Input {
        return Err(Error::InvalidParameter {
            name: "model",
            reason: "kkt_residual_input requires an input-regularized model".to_string(),
        });
    }
    let p = DenseProblem::assemble(model);
    let z = complete_initial_state(&p, u)?;
    let grad = p.grad(&z);
    let mut res = 0.0_f64;
    for i in 0..p.m_free {
        res = res.max(grad[i].abs());
    }
    for ncoord in 0..model.steps {
        let gi = grad[p.m_free + ncoord];
        let (lo, hi) = model.costs[ncoord].subgradient(u[ncoord], tol::KINK_REL);
        let (blo, bhi) = (2.0 * sigma2 * lo, 2.0 * sigma2 * hi);
        let target = -gi;
        let d = if target < blo {
            blo - target
        } else if target > bhi {
            target - bhi
        } else {
            0.0
        };
        res = res.max(d);
    }
    Ok(res)
}

/// Exactly minimize the quadratic over the free initial state given `u`.
fn complete_initial_state(p: &DenseProblem, u: &[f64]) -> Result<Vec<f64>> {
    let mut z = vec![0.0; p.dim];
    z[p.m_free..].copy_from_slice(u);
    if p.m_free == 0 {
        return Ok(z);
    }
    // Solve H₀₀ x0 = g₀ − H₀ᵤ u.
    let mf = p.m_free;
    let mut a = vec![0.0; mf * mf];
    let mut rhs = vec![0.0; mf];
    for i in 0..mf {
        for j in 0..mf {
            a[i * mf + j] = p.h[i * p.dim + j];
        }
        let mut acc = p.g[i];
        for j in mf..p.dim {
            acc -= p.h[i * p.dim + j] * z[j];
        }
        rhs[i] = acc;
    }
    // A singular initial-state block means flat directions; use a
    // ridge-regularized solve (the residual is unaffected along flat
    // directions, so any minimizer works; regularize minutely).
    let x0 = match solve_dense(&a, mf, &rhs) {
        Ok(x) => x,
        Err(_) => {
            let scale = a.iter().fold(0.0_f64, |m, &v| m.max(v.abs())) + 1.0;
            for i in 0..mf {
                a[i * mf + i] += 1e-10 * scale;
            }
            solve_dense(&a, mf, &rhs)?
        }
    };
    z[..mf].copy_from_slice(&x0);
    Ok(z)
}

/// Exact bounded-variable least squares: minimize ‖r₀ + Σᵢ aᵢγᵢ‖₂ over
/// lo ≤ γ ≤ hi by an active-set sweep: release the most violating pinned
/// coordinate, re-solve on the free set (rank-revealing, so collinear
/// columns are fine), and pin blocking coordinates along the way. Row i of
/// `a` (length `dim`) is the column multiplying γᵢ.
fn box_least_squares(
    a: &[f64],
    n: usize,
    dim: usize,
    r0: &[f64],
    lo: &[f64],
    hi: &[f64],
) -> Vec<f64> {
    #[derive(Clone, Copy, PartialEq)]
    enum Pin {
        AtLo,
        AtHi,
        Free,
    }
    if n == 0 {
        return Vec::new();
    }
    let mut pin = vec![Pin::AtLo; n];
    let mut gam: Vec<f64> = lo.to_vec();
    let mut banned = vec![false; n];
    let residual = |gam: &[f64]| -> Vec<f64> {
        let mut r = r0.to_vec();
        for i in 0..n {
            if gam[i] != 0.0 {
                for k in 0..dim {
                    r[k] += a[i * dim + k] * gam[i];
                }
            }
        }
        r
    };
    let col_norm: Vec<f64> = (0..n)
        .map(|i| (0..dim).map(|k| a[i * dim + k].powi(2)).sum::<f64>().sqrt())
        .collect();
    let mut r = residual(&gam);
    for _ in 0..(10 * n + 50) {
        // Optimality over pinned coordinates: the objective derivative
        // aᵢ·r must point out of the box.
        let rnorm = r.iter().map(|x| x * x).sum::<f64>().sqrt();
        let mut release: Option<(usize, f64)> = None;
        for i in 0..n {
            if lo[i] == hi[i] || pin[i] == Pin::Free || banned[i] {
                continue;
            }
            let d: f64 = (0..dim).map(|k| a[i * dim + k] * r[k]).sum();
            let viol = match pin[i] {
                Pin::AtLo => -d,
                Pin::AtHi => d,
                Pin::Free => unreachable!(),
            };
            if viol > 1e-12 * (1.0 + col_norm[i] * rnorm)
                && release.is_none_or(|(_, best)| viol > best)
            {
                release = Some((i, viol));
            }
        }
        let Some((rel, _)) = release else { break };
        pin[rel] = Pin::Free;
        let before = gam[rel];
        for _ in 0..=n {
            let free: Vec<usize> = (0..n).filter(|&i| pin[i] == Pin::Free).collect();
            if free.is_empty() {
                break;
            }
            // Least squares over the free set with the rest at bounds.
            let mut rhs = r0.to_vec();
            for i in 0..n {
                if pin[i] != Pin::Free && gam[i] != 0.0 {
                    for k in 0..dim {
                        rhs[k] += a[i * dim + k] * gam[i];
                    }
                }
            }
            let amat = nalgebra::DMatrix::from_fn(dim, free.len(), |k, j| a[free[j] * dim + k]);
            let bvec = DVector::from_fn(dim, |k, _| -rhs[k]);
            let svd = amat.svd(true, true);
            let smax = svd.singular_values.iter().fold(0.0_f64, |m, &s| m.max(s));
            let sol = match svd.solve(&bvec, 1e-12 * (1.0 + smax)) {
                Ok(s) => s,
                Err(_) => break,
            };
            // Step from the current point toward the free solution until a
            // bound blocks.
            let mut t = 1.0_f64;
            let mut blocker: Option<(usize, Pin)> = None;
            for (j, &i) in free.iter().enumerate() {
                let target = sol[j];
                let cur = gam[i];
                let (bound, side) = if target < lo[i] {
                    (lo[i], Pin::AtLo)
                } else if target > hi[i] {
                    (hi[i], Pin::AtHi)
                } else {
                    continue;
                };
                let denom = target - cur;
                if denom == 0.0 {
                    continue;
                }
                let tj = ((bound - cur) / denom).clamp(0.0, 1.0);
                if tj < t {
                    t = tj;
                    blocker = Some((i, side));
                }
            }
            match blocker {
                None => {
                    for (j, &i) in free.iter().enumerate() {
                        gam[i] = sol[j].clamp(lo[i], hi[i]);
                    }
                    break;
                }
                Some((bi, side)) => {
                    for (j, &i) in free.iter().enumerate() {
                        gam[i] += t * (sol[j] - gam[i]);
                    }
                    gam[bi] = match side {
                        Pin::AtLo => lo[bi],
                        Pin::AtHi => hi[bi],
                        Pin::Free => unreachable!(),
                    };
                    pin[bi] = side;
                }
            }
        }
        // A release that went nowhere (immediately re-pinned at the same
        // value) must not be retried forever.
        if pin[rel] != Pin::Free && gam[rel] == before {
            banned[rel] = true;
        } else {
            banned.iter_mut().for_each(|b| *b = false);
        }
        r = residual(&gam);
    }
    gam
}

/// Stationarity residual of an output-regularized problem at (x₀, u).
///
/// Measures min over subgradient selections γₙ ∈ ∂κₙ(yₙ) of
/// ‖∇q(z) + 2σ²·Jᵀγ‖∞, where J is the output map; the inner
/// minimization is a small box-constrained least squares solved exactly
/// by an active-set method.
pub fn kkt_residual_output(
    model: &StateSpaceModel,
    sigma2: f64,
    x0: &DVector<f64>,
    u: &[f64],
) -> Result<f64> {
    if model.side != RegSide::Output {
        return Err(Error::InvalidParameter {
            name: "model",
            reason: "kkt_residual_output requires an output-regularized model".to_string(),
        });
    }
    let p = DenseProblem::assemble(model);
    let mut z = vec![0.0; p.dim];
    for i in 0..p.m_free {
        z[i] = x0[i];
    }
    z[p.m_free..].copy_from_slice(u);
    let grad = p.grad(&z);
    let v = p.values(&z);
    let nsteps = model.steps;

    // Box bounds per coordinate, scaled by 2σ².
    let mut lo = vec![0.0; nsteps];
    let mut hi = vec![0.0; nsteps];
    for i in 0..nsteps {
        let (a, b) = model.costs[i].subgradient(v[i], tol::KINK_REL);
        lo[i] = 2.0 * sigma2 * a;
        hi[i] = 2.0 * sigma2 * b;
    }

    // minimize_γ ½‖grad + Jᵀγ‖² over the box; J is nsteps×dim
    // (row-major in p.jv).
    let dim = p.dim;
    let gam = box_least_squares(&p.jv, nsteps, dim, &grad, &lo, &hi);
    let mut r = grad.clone();
    for i in 0..nsteps {
        for k in 0..dim {
            r[k] += p.jv[i * dim + k] * gam[i];
        }
    }
    Ok(r.iter().fold(0.0_f64, |m, &v| m.max(v.abs())))
}

// ---------------------------------------------------------------------
// Solvers
// ---------------------------------------------------------------------

/// Solve an input-regularized problem by FISTA with exact
/// piecewise-linear proximal maps and adaptive restart.
pub fn solve_input_reg(model: &StateSpaceModel, sigma2: f64) -> Result<OracleSolution> {
    if model.side != RegSide::Input {
        return Err(Error::InvalidParameter {
            name: "model",
            reason: "solve_input_reg requires an input-regularized model".to_string(),
        });
    }
    model.validate()?;
    let p = DenseProblem::assemble(model);
    let lip = (2.0 * lambda_max(&p.h, p.dim)).max(1e-12);
    let step = 1.0 / (1.02 * lip);
    let eta = step * 2.0 * sigma2;

    let objective = |z: &[f64]| -> f64 {
        let mut val = p.quad(z);
        for i in 0..model.steps {
            val += 2.0 * sigma2 * model.costs[i].eval(z[p.m_free + i]);
        }
        val
    };

    let mut z = vec![0.0; p.dim];
    let mut z_prev = z.clone();
    let mut theta = 1.0_f64;
    let mut best_obj = objective(&z);
    let mut iterations = 0;
    let target = 1e-8;
    let max_iter = 300_000;

    while iterations < max_iter {
        iterations += 1;
        let theta_next = 0.5 * (1.0 + (1.0 + 4.0 * theta * theta).sqrt());
        let beta = (theta - 1.0) / theta_next;
        let y: Vec<f64> =
            z.iter().zip(&z_prev).map(|(a, b)| a + beta * (a - b)).collect();
        let gy = p.grad(&y);
        let mut znew = vec![0.0; p.dim];
        for i in 0..p.m_free {
            znew[i] = y[i] - step * gy[i];
        }
        for i in 0..model.steps {
            let w = y[p.m_free + i] - step * gy[p.m_free + i];
            znew[p.m_free + i] = if eta > 0.0 {
                model.costs[i].decide_map(w, eta).1
            } else {
                w
            };
        }
        let obj_new = objective(&znew);
        if obj_new > best_obj + 1e-15 * (1.0 + best_obj.abs()) {
            // Function restart: drop momentum.
            theta = 1.0;
            z_prev = z.clone();
            continue;
        }
        best_obj = obj_new;
        z_prev = std::mem::replace(&mut z, znew);
        theta = theta_next;

        if iterations % 64 == 0 || iterations == max_iter {
            let (_, u) = p.split(model, &z);
            if kkt_residual_input(model, sigma2, &u)? <= target {
                break;
            }
        }
    }
    // Polish the initial state exactly and re-verify.
    let (_, u) = p.split(model, &z);
    let zc = complete_initial_state(&p, &u)?;
    let (x0, u) = p.split(model, &zc);
    let residual = kkt_residual_input(model, sigma2, &u)?;
    let obj = model.objective(sigma2, &x0, &u);
    Ok(OracleSolution {
        x0,
        u,
        report: OptReport {
            objective: obj,
            kkt_residual: residual,
            iterations,
            converged: residual <= 1e-7,
        },
    })
}

/// Solve an output-regularized problem by ADMM with an exact quadratic
/// step (cached LU) and exact per-coordinate proximal maps, with
/// residual-balancing penalty adaptation.
pub fn solve_output_reg(model: &StateSpaceModel, sigma2: f64) -> Result<OracleSolution> {
    if model.side != RegSide::Output {
        return Err(Error::InvalidParameter {
            name: "model",
            reason: "solve_output_reg requires an output-regularized model".to_string(),
        });
    }
    model.validate()?;
    let p = DenseProblem::assemble(model);
    let dim = p.dim;
    let nsteps = model.steps;

    let mut rho = (2.0 * sigma2).max(1e-2);
    let factorize = |rho: f64| -> Result<(Vec<f64>, Vec<usize>)> {
        // M = 2H + ρ JᵀJ.
        let mut mmat = vec![0.0; dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                mmat[i * dim + j] = 2.0 * p.h[i * dim + j];
            }
        }
        for s in 0..nsteps {
            for i in 0..dim {
                let js_i = p.jv[s * dim + i];
                if js_i == 0.0 {
                    continue;
                }
                for j in 0..dim {
                    mmat[i * dim + j] += rho * js_i * p.jv[s * dim + j];
                }
            }
        }
        let piv = lu_factor(&mut mmat, dim)?;
        Ok((mmat, piv))
    };
    let (mut lu, mut piv) = factorize(rho)?;

    let mut z = vec![0.0; dim];
    let mut yv = p.values(&z);
    let mut w = vec![0.0; nsteps];
    let mut iterations = 0;
    let target = 1e-8;
    let max_iter = 60_000;

    while iterations < max_iter {
        iterations += 1;
        // z-step: (2H + ρJᵀJ) z = 2g + ρ Jᵀ(y − v0 − w).
        let mut rhs = vec![0.0; dim];
        for i in 0..dim {
            rhs[i] = 2.0 * p.g[i];
        }
        for s in 0..nsteps {
            let coeff = rho * (yv[s] - p.v0[s] - w[s]);
            for i in 0..dim {
                rhs[i] += coeff * p.jv[s * dim + i];
            }
        }
        z = lu_solve(&lu, &piv, dim, &rhs);
        let v = p.values(&z);
        // y-step: exact prox with weight 2σ²/ρ.
        let eta = 2.0 * sigma2 / rho;
        let mut primal = 0.0_f64;
        let y_old = yv.clone();
        for s in 0..nsteps {
            let arg = v[s] + w[s];
            yv[s] = if eta > 0.0 { model.costs[s].decide_map(arg, eta).1 } else { arg };
            w[s] += v[s] - yv[s];
            primal = primal.max((v[s] - yv[s]).abs());
        }
        let dual = yv
            .iter()
            .zip(&y_old)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0_f64, f64::max)
            * rho;

        if iterations % 32 == 0 {
            let (x0, u) = p.split(model, &z);
            let residual = kkt_residual_output(model, sigma2, &x0, &u)?;
            if residual <= target
                && primal <= 1e-10 * (1.0 + yv.iter().fold(0.0_f64, |m, &v| m.max(v.abs())))
            {
                break;
            }
            // Residual balancing.
            if primal > 10.0 * dual && rho < 1e8 {
                rho *= 2.0;
                for wi in w.iter_mut() {
                    *wi *= 0.5;
                }
                let f = factorize(rho)?;
                lu = f.0;
                piv = f.1;
            } else if dual > 10.0 * primal && rho > 1e-8 {
                rho *= 0.5;
                for wi in w.iter_mut() {
                    *wi *= 2.0;
                }
                let f = factorize(rho)?;
                lu = f.0;
                piv = f.1;
            }
        }
    }
    let (x0, u) = p.split(model, &z);
    let residual = kkt_residual_output(model, sigma2, &x0, &u)?;
    let obj = model.objective(sigma2, &x0, &u);
    Ok(OracleSolution {
        x0,
        u,
        report: OptReport {
            objective: obj,
            kkt_residual: residual,
            iterations,
            converged: residual <= 1e-7,
        },
    })
}

// ---------------------------------------------------------------------
// Fixed assignments and exhaustive enumeration
// ---------------------------------------------------------------------

/// Solve the problem restricted to a fixed segment assignment: each
/// kink-assigned coordinate is clamped to its location; each
/// line-assigned coordinate contributes the linear extension
/// 2σ²·slope·value of its piece. The restricted problem is an equality-
/// constrained quadratic program solved densely.
pub fn solve_fixed_assignment(
    model: &StateSpaceModel,
    sigma2: f64,
    assignment: &[usize],
) -> Result<FixedAssignmentSolve> {
    if assignment.len() != model.steps {
        return Err(Error::InvalidParameter {
            name: "assignment",
            reason: format!("need one segment per step, got {}", assignment.len()),
        });
    }
    let p = DenseProblem::assemble(model);
    let dim = p.dim;
    let nsteps = model.steps;

    // Gather constraints (point coords) and linear terms (line coords).
    // v(z) = Jv z + v0; point s: Jv_s z = loc − v0_s; line s with slope σs
    // adds 2σ²·σs·(Jv_s z) (+ const) to the objective.
    let mut con_rows: Vec<usize> = Vec::new();
    let mut con_rhs: Vec<f64> = Vec::new();
    let mut lin = vec![0.0; dim];
    for s in 0..nsteps {
        match model.costs[s].segment(assignment[s]) {
            Segment::Point { location } => {
                con_rows.push(s);
                con_rhs.push(location - p.v0[s]);
            }
            Segment::Line { slope, .. } => {
                for i in 0..dim {
                    lin[i] += 2.0 * sigma2 * slope * p.jv[s * dim + i];
                }
            }
        }
    }

    // KKT system: [2H  Aᵀ][z]   [2g − lin]
    //             [A   0 ][λ] = [rhs     ]
    let ncon = con_rows.len();
    let nsys = dim + ncon;
    let mut sys = vec![0.0; nsys * nsys];
    let mut rhs = vec![0.0; nsys];
    for i in 0..dim {
        for j in 0..dim {
            sys[i * nsys + j] = 2.0 * p.h[i * dim + j];
        }
        rhs[i] = 2.0 * p.g[i] - lin[i];
    }
    for (k, &s) in con_rows.iter().enumerate() {
        for j in 0..dim {
            sys[(dim + k) * nsys + j] = p.jv[s * dim + j];
            sys[j * nsys + dim + k] = p.jv[s * dim + j];
        }
        rhs[dim + k] = con_rhs[k];
    }
    let sol = solve_dense(&sys, nsys, &rhs)?;
    let z = &sol[..dim];
    let (x0, u) = p.split(model, z);
    let values = model.regularized_values(&x0, &u);

    let mut feasible = true;
    for s in 0..nsteps {
        if let Segment::Line { lo, hi, .. } = model.costs[s].segment(assignment[s]) {
            let v = values[s];
            // Boundary values count as feasible; the kink assignment
            // produces the same point there, so no optimum is lost.
            let slack = 1e-10 * (1.0 + v.abs());
            if !(v >= lo - slack && v <= hi + slack) {
                feasible = false;
            }
        }
    }
    let objective = model.objective(sigma2, &x0, &u);
    Ok(FixedAssignmentSolve { x0, u, values, objective, feasible })
}

/// Exhaustively enumerate segment assignments (≤ `MAX_ASSIGNMENTS`
/// combinations) and return the global minimizer. Singular assignments
/// are skipped: the global optimum's own assignment always yields a
/// solvable system when the restricted problem is strictly convex.
pub fn brute_force_active_sets(
    model: &StateSpaceModel,
    sigma2: f64,
) -> Result<BruteForceResult> {
    const MAX_ASSIGNMENTS: usize = 200_000;
    let nsteps = model.steps;
    let sizes: Vec<usize> = model.costs.iter().map(|c| c.num_segments()).collect();
    let total: usize = sizes.iter().try_fold(1_usize, |acc, &s| {
        acc.checked_mul(s).filter(|&t| t <= MAX_ASSIGNMENTS)
    })
    .ok_or_else(|| Error::InvalidParameter {
        name: "model",
        reason: format!("assignment count exceeds {MAX_ASSIGNMENTS}; reduce N or segments"),
    })?;

    let mut best: Option<BruteForceResult> = None;
    let mut assignment = vec![0usize; nsteps];
    for flat in 0..total {
        let mut rem = flat;
        for s in 0..nsteps {
            assignment[s] = rem % sizes[s];
            rem /= sizes[s];
        }
        let Ok(solve) = solve_fixed_assignment(model, sigma2, &assignment) else {
            continue;
        };
        if !solve.objective.is_finite() {
            continue;
        }
        if best.as_ref().is_none_or(|b| solve.objective < b.objective) {
            best = Some(BruteForceResult {
                assignment: assignment.clone(),
                x0: solve.x0,
                u: solve.u,
                objective: solve.objective,
            });
        }
    }
    best.ok_or_else(|| Error::InvalidModel {
        reason: "no assignment produced a solvable restricted problem".to_string(),
    })
}
