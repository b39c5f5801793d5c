//! Linear state space models with piecewise-linear convex regularization.
//!
//! The model is
//!
//! ```text
//!   xₙ = A xₙ₋₁ + bₙ uₙ,     yₙ = cₙᵀ xₙ,      n = 1..N,
//! ```
//!
//! with scalar inputs uₙ and outputs yₙ, an initial state that is either
//! fixed (x₀ = x̆₀) or carries a quadratic prior (x₀ − x̆₀)ᵀQ₀(x₀ − x̆₀),
//! and an optional quadratic end term (x_N − x̆_N)ᵀQ_N(x_N − x̆_N).
//!
//! Two regularization sides are supported:
//! - [`RegSide::Input`]: minimize quadratic data/end terms plus
//!   2σ²·Σ κₙ(uₙ) — each observation contributes (yₙ − y̆ₙ)²,
//! - [`RegSide::Output`]: minimize the x₀ prior plus Σ uₙ² plus
//!   2σ²·Σ κₙ(yₙ) — the cost κₙ is stored already shifted so it attaches
//!   directly to yₙ (constructors take costs in z = yₙ − y̆ₙ coordinates
//!   and shift them by y̆ₙ once).
//!
//! Presets: LASSO and general matrix input models, matrix output models
//! (support-vector regression shapes), second-difference trend filtering,
//! and the robust median-style smoother.

use nalgebra::{DMatrix, DVector};

use crate::plcost::SegmentedCost;
use crate::tol;
use crate::{Error, Result};

/// Which variable the piecewise-linear costs attach to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegSide {
    /// Costs on the inputs uₙ; quadratic observation terms (yₙ − y̆ₙ)².
    Input,
    /// Costs on the outputs yₙ; quadratic input penalty Σ uₙ².
    Output,
}

/// A linear state space model with per-step costs.
#[derive(Debug, Clone)]
pub struct StateSpaceModel {
    /// State dimension M.
    pub state_dim: usize,
    /// Number of steps N.
    pub steps: usize,
    /// State transition A (M×M).
    pub a: DMatrix<f64>,
    /// Input vectors bₙ (one per step).
    pub b: Vec<DVector<f64>>,
    /// Output vectors cₙ (one per step).
    pub c: Vec<DVector<f64>>,
    /// Regularization side.
    pub side: RegSide,
    /// Observation data y̆ₙ. On the input side these are the quadratic
    /// observation targets; on the output side they are the centers the
    /// costs were shifted by (kept for reporting).
    pub y: Vec<f64>,
    /// Initial-state precision weight Q₀ (ignored when
    /// `fixed_initial_state`).
    pub q0: DMatrix<f64>,
    /// Initial-state center x̆₀.
    pub x0_bar: DVector<f64>,
    /// When true, x₀ = x̆₀ exactly.
    pub fixed_initial_state: bool,
    /// End weight Q_N (zero matrix disables the end term).
    pub qn: DMatrix<f64>,
    /// End center x̆_N.
    pub xn_bar: DVector<f64>,
    /// Per-step cost κₙ in its native variable (uₙ or yₙ).
    pub costs: Vec<SegmentedCost>,
}

/// Summary produced by [`StateSpaceModel::validate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelReport {
    /// State dimension M.
    pub state_dim: usize,
    /// Number of steps N.
    pub steps: usize,
    /// Regularization side.
    pub side: RegSide,
    /// Whether the initial state is fixed.
    pub fixed_initial_state: bool,
    /// Whether Q₀ is (numerically) invertible.
    pub q0_invertible: bool,
    /// Whether Q_N is exactly the zero matrix.
    pub qn_zero: bool,
    /// Total segment count across all costs (knot-budget unit).
    pub total_segments: usize,
}

/// A simulated trajectory.
#[derive(Debug, Clone)]
pub struct Trajectory {
    /// States x₀..x_N (N+1 entries).
    pub states: Vec<DVector<f64>>,
    /// Outputs y₁..y_N.
    pub outputs: Vec<f64>,
}

impl StateSpaceModel {
    /// Input-regularized matrix model for minimize ‖Fu − y̆‖² + 2σ²Σκₙ(uₙ)
    /// with F of shape L×K: state dimension L, K steps, A = I,
    /// bₙ = column n of F, no observation rows, fixed x₀ = 0, and the end
    /// term ‖x_K − y̆‖² (Q_N = I) carrying the data.
    pub fn input_matrix_model(
        f: &DMatrix<f64>,
        y: &[f64],
        costs: Vec<SegmentedCost>,
    ) -> Result<Self> {
        let (l, k) = f.shape();
        if l == 0 || k == 0 {
            return Err(Error::InvalidParameter {
                name: "f",
                reason: "matrix must be nonempty".to_string(),
            });
        }
        if y.len() != l {
            return Err(Error::InvalidParameter {
                name: "y",
                reason: format!("need {l} responses for an {l}×{k} matrix, got {}", y.len()),
            });
        }
        if costs.len() != k {
            return Err(Error::InvalidParameter {
                name: "costs",
                reason: format!("need one cost per column ({k}), got {}", costs.len()),
            });
        }
        let model = Self {
            state_dim: l,
            steps: k,
            a: DMatrix::identity(l, l),
            b: (0..k).map(|n| f.column(n).into_owned()).collect(),
            c: vec![DVector::zeros(l); k],
            side: RegSide::Input,
            y: vec![0.0; k],
            q0: DMatrix::zeros(l, l),
            x0_bar: DVector::zeros(l),
            fixed_initial_state: true,
            qn: DMatrix::identity(l, l),
            xn_bar: DVector::from_column_slice(y),
            costs,
        };
        model.validate()?;
        Ok(model)
    }

    /// LASSO: [`input_matrix_model`](Self::input_matrix_model) with |uₙ|
    /// costs on every coordinate.
    pub fn lasso_model(f: &DMatrix<f64>, y: &[f64]) -> Result<Self> {
        let costs = vec![SegmentedCost::make_l1(); f.ncols()];
        Self::input_matrix_model(f, y, costs)
    }

    /// Output-regularized matrix model for
    /// minimize ‖x₀‖² + 2σ²Σκₙ(fₙᵀx₀ − y̆ₙ) with F of shape L×K:
    /// state dimension K, L steps, A = I, bₙ = 0, cₙ = row n of F,
    /// Q₀ = I centered at 0, no end term. `costs[n]` is given in
    /// z = yₙ − y̆ₙ coordinates and is shifted by y̆ₙ internally.
    pub fn output_matrix_model(
        f: &DMatrix<f64>,
        y: &[f64],
        costs: Vec<SegmentedCost>,
    ) -> Result<Self> {
        let (l, k) = f.shape();
        if l == 0 || k == 0 {
            return Err(Error::InvalidParameter {
                name: "f",
                reason: "matrix must be nonempty".to_string(),
            });
        }
        if y.len() != l {
            return Err(Error::InvalidParameter {
                name: "y",
                reason: format!("need {l} responses for an {l}×{k} matrix, got {}", y.len()),
            });
        }
        if costs.len() != l {
            return Err(Error::InvalidParameter {
                name: "costs",
                reason: format!("need one cost per row ({l}), got {}", costs.len()),
            });
        }
        let shifted = costs.iter().zip(y).map(|(c, &yn)| c.shifted(yn)).collect();
        let model = Self {
            state_dim: k,
            steps: l,
            a: DMatrix::identity(k, k),
            b: vec![DVector::zeros(k); l],
            c: (0..l).map(|n| f.row(n).transpose()).collect(),
            side: RegSide::Output,
            y: y.to_vec(),
            q0: DMatrix::identity(k, k),
            x0_bar: DVector::zeros(k),
            fixed_initial_state: false,
            qn: DMatrix::zeros(k, k),
            xn_bar: DVector::zeros(k),
            costs: shifted,
        };
        model.validate()?;
        Ok(model)
    }

    /// Output matrix model with |z| costs (robust L1 regression shape).
    pub fn output_model(f: &DMatrix<f64>, y: &[f64]) -> Result<Self> {
        let costs = vec![SegmentedCost::make_l1(); f.nrows()];
        Self::output_matrix_model(f, y, costs)
    }

    /// Second-difference trend filter: position/velocity state (M = 2)
    /// with A = [[1,1],[0,1]], b = (0,1)ᵀ, c = (1,0)ᵀ, free unweighted
    /// initial state, no end term, |uₙ| input costs, quadratic data fit
    /// to `y`.
    pub fn trend_filter_model(y: &[f64]) -> Result<Self> {
        let n = y.len();
        if n < 2 {
            return Err(Error::InvalidParameter {
                name: "y",
                reason: format!("need at least 2 samples, got {n}"),
            });
        }
        let model = Self {
            state_dim: 2,
            steps: n,
            a: DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]),
            b: vec![DVector::from_column_slice(&[0.0, 1.0]); n],
            c: vec![DVector::from_column_slice(&[1.0, 0.0]); n],
            side: RegSide::Input,
            y: y.to_vec(),
            q0: DMatrix::zeros(2, 2),
            x0_bar: DVector::zeros(2),
            fixed_initial_state: false,
            qn: DMatrix::zeros(2, 2),
            xn_bar: DVector::zeros(2),
            costs: vec![SegmentedCost::make_l1(); n],
        };
        model.validate()?;
        Ok(model)
    }

    /// Median-style robust smoother: the same position/velocity chain with
    /// the costs moved to the outputs, |yₙ − y̆ₙ| per step, quadratic
    /// input penalty, and a weak initial-state prior q₀·I centered at 0
    /// (q₀ > 0 required so the prior is invertible).
    pub fn median_smoother_model(y: &[f64], q0: f64) -> Result<Self> {
        let n = y.len();
        if n < 2 {
            return Err(Error::InvalidParameter {
                name: "y",
                reason: format!("need at least 2 samples, got {n}"),
            });
        }
        if !(q0 > 0.0) || !q0.is_finite() {
            return Err(Error::InvalidParameter {
                name: "q0",
                reason: format!("initial-state weight must be positive and finite, got {q0}"),
            });
        }
        let costs = y.iter().map(|&yn| SegmentedCost::make_l1().shifted(yn)).collect();
        let model = Self {
            state_dim: 2,
            steps: n,
            a: DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]),
            b: vec![DVector::from_column_slice(&[0.0, 1.0]); n],
            c: vec![DVector::from_column_slice(&[1.0, 0.0]); n],
            side: RegSide::Output,
            y: y.to_vec(),
            q0: DMatrix::identity(2, 2) * q0,
            x0_bar: DVector::zeros(2),
            fixed_initial_state: false,
            qn: DMatrix::zeros(2, 2),
            xn_bar: DVector::zeros(2),
            costs,
        };
        model.validate()?;
        Ok(model)
    }

    /// Check internal consistency and side requirements.
    ///
    /// # Errors
    /// [`Error::InvalidModel`] on dimension mismatches, non-finite
    /// entries, non-PSD weights, or an output-side model whose initial
    /// state is fixed or whose Q₀ is singular (the output sweep requires
    /// an invertible prior).
    pub fn validate(&self) -> Result<ModelReport> {
        let m = self.state_dim;
        let n = self.steps;
        let fail = |reason: String| Err(Error::InvalidModel { reason });
        if m == 0 || n == 0 {
            return fail("state dimension and step count must be positive".into());
        }
        if self.a.shape() != (m, m) {
            return fail(format!("A must be {m}×{m}, got {:?}", self.a.shape()));
        }
        for (name, mat) in [("Q0", &self.q0), ("QN", &self.qn)] {
            if mat.shape() != (m, m) {
                return fail(format!("{name} must be {m}×{m}, got {:?}", mat.shape()));
            }
        }
        if self.b.len() != n || self.c.len() != n || self.costs.len() != n || self.y.len() != n {
            return fail(format!(
                "per-step lengths must all equal N = {n}: b {}, c {}, costs {}, y {}",
                self.b.len(),
                self.c.len(),
                self.costs.len(),
                self.y.len()
            ));
        }
        if self.x0_bar.len() != m || self.xn_bar.len() != m {
            return fail("state centers must have length M".into());
        }
        for v in self.b.iter().chain(self.c.iter()) {
            if v.len() != m {
                return fail("every b and c vector must have length M".into());
            }
            if v.iter().any(|x| !x.is_finite()) {
                return fail("non-finite entry in b or c".into());
            }
        }
        if self.a.iter().chain(self.q0.iter()).chain(self.qn.iter()).any(|x| !x.is_finite())
            || self.x0_bar.iter().chain(self.xn_bar.iter()).any(|x| !x.is_finite())
            || self.y.iter().any(|x| !x.is_finite())
        {
            return fail("non-finite entry in model data".into());
        }
        for (name, mat) in [("Q0", &self.q0), ("QN", &self.qn)] {
            if !is_psd(mat) {
                return fail(format!("{name} must be symmetric positive semidefinite"));
            }
        }
        let q0_invertible = !self.fixed_initial_state && is_pd(&self.q0);
        if self.side == RegSide::Output {
            if self.fixed_initial_state {
                return fail("output-side models require a free initial state".into());
            }
            if !q0_invertible {
                return fail("output-side models require an invertible Q0".into());
            }
        }
        let qn_zero = self.qn.iter().all(|&x| x == 0.0);
        if self.side == RegSide::Output && !qn_zero && !is_pd(&self.qn) {
            return fail("output-side end terms require Q_N invertible or exactly zero".into());
        }
        Ok(ModelReport {
            state_dim: m,
            steps: n,
            side: self.side,
            fixed_initial_state: self.fixed_initial_state,
            q0_invertible,
            qn_zero,
            total_segments: self.costs.iter().map(|c| c.num_segments()).sum(),
        })
    }

    /// Run the recursion xₙ = A xₙ₋₁ + bₙ uₙ, yₙ = cₙᵀ xₙ.
    ///
    /// # Panics
    /// If `u.len() != self.steps` or `x0.len() != self.state_dim`.
    pub fn simulate(&self, x0: &DVector<f64>, u: &[f64]) -> Trajectory {
        assert_eq!(u.len(), self.steps, "one input per step");
        assert_eq!(x0.len(), self.state_dim, "initial state dimension");
        let mut states = Vec::with_capacity(self.steps + 1);
        let mut outputs = Vec::with_capacity(self.steps);
        states.push(x0.clone());
        for n in 0..self.steps {
            let x = &self.a * states.last().expect("nonempty") + &self.b[n] * u[n];
            outputs.push(self.c[n].dot(&x));
            states.push(x);
        }
        Trajectory { states, outputs }
    }

    /// The quadratic part of the objective at (x₀, u).
    pub fn quadratic_objective(&self, x0: &DVector<f64>, u: &[f64]) -> f64 {
        let traj = self.simulate(x0, u);
        let mut total = 0.0;
        if !self.fixed_initial_state {
            let d = x0 - &self.x0_bar;
            total += (&self.q0 * &d).dot(&d);
        }
        match self.side {
            RegSide::Input => {
                for (yn, &data) in traj.outputs.iter().zip(&self.y) {
                    total += (yn - data) * (yn - data);
                }
            }
            RegSide::Output => {
                for &un in u {
                    total += un * un;
                }
            }
        }
        let dn = traj.states.last().expect("nonempty") - &self.xn_bar;
        total += (&self.qn * &dn).dot(&dn);
        total
    }

    /// The regularized variable per step: uₙ on the input side, yₙ on the
    /// output side.
    pub fn regularized_values(&self, x0: &DVector<f64>, u: &[f64]) -> Vec<f64> {
        match self.side {
            RegSide::Input => u.to_vec(),
            RegSide::Output => self.simulate(x0, u).outputs,
        }
    }

    /// Σₙ κₙ(vₙ) for the regularized variable v.
    pub fn penalty(&self, v: &[f64]) -> f64 {
        self.costs.iter().zip(v).map(|(c, &z)| c.eval(z)).sum()
    }

    /// Full objective quadratic + 2σ²·penalty at (x₀, u).
    pub fn objective(&self, sigma2: f64, x0: &DVector<f64>, u: &[f64]) -> f64 {
        self.quadratic_objective(x0, u)
            + 2.0 * sigma2 * self.penalty(&self.regularized_values(x0, u))
    }
}

/// Symmetric positive-semidefinite check with a scaled eigenvalue floor.
pub fn is_psd(mat: &DMatrix<f64>) -> bool {
    if mat.nrows() != mat.ncols() {
        return false;
    }
    let norm = mat.amax();
    if (mat - mat.transpose()).amax() > tol::PSD_REL * (1.0 + norm) {
        return false;
    }
    let sym = (mat + mat.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    eig.eigenvalues.iter().all(|&l| l >= tol::psd_floor(norm))
}

/// Symmetric positive-definite check (PSD with a strictly positive floor).
pub fn is_pd(mat: &DMatrix<f64>) -> bool {
    if !is_psd(mat) {
        return false;
    }
    let norm = mat.amax();
    let sym = (mat + mat.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    eig.eigenvalues.iter().all(|&l| l > tol::SCALAR_ZERO_REL * (1.0 + norm))
}
