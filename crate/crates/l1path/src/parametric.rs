//! σ²-parametric sweeps: the fixed-assignment solution as an exact
//! affine function of the regularization weight.
//!
//! Under a fixed segment assignment, every quantity the concrete sweeps
//! in [`crate::solvers`] compute is an affine function of either σ² or
//! σ⁻²: backward precisions scale as σ⁻², forward covariances as σ²,
//! and means/estimates are affine in σ². One parametric sweep therefore
//! replaces infinitely many concrete sweeps — it returns the
//! coefficient pairs, valid until the assignment itself has to change.
//! That closure property is what makes exact path tracking possible,
//! and this module's sweeps are its workhorses.
//!
//! [`ParamAffine`] is the checked scalar carrier: operations that would
//! leave the affine class (a σ⁴ term, or mixing σ² and σ⁻² terms)
//! return [`Error::DegreeViolation`] instead of silently computing
//! something wrong.

use nalgebra::DVector;

use crate::plcost::SegmentMsg;
use crate::solvers::{check_active, BffdOutput, FfbddOutput};
use crate::ssm::{RegSide, StateSpaceModel};
use crate::tol;
use crate::{Error, Result};

/// Which power of σ² multiplies the linear coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Basis {
    /// value = c₁·σ² + c₀
    Sigma2,
    /// value = c₁·σ⁻² + c₀
    InvSigma2,
}

/// A scalar affine in σ² or σ⁻², with closure-checked arithmetic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamAffine {
    /// Interpretation of `c1`.
    pub basis: Basis,
    /// Coefficient of the parameter.
    pub c1: f64,
    /// Constant part.
    pub c0: f64,
}

impl ParamAffine {
    /// Affine value in the σ² basis.
    pub fn in_sigma2(c1: f64, c0: f64) -> Self {
        ParamAffine { basis: Basis::Sigma2, c1, c0 }
    }

    /// Affine value in the σ⁻² basis.
    pub fn in_inv_sigma2(c1: f64, c0: f64) -> Self {
        ParamAffine { basis: Basis::InvSigma2, c1, c0 }
    }

    /// A constant (basis-free; stored in the σ² basis).
    pub fn constant(c0: f64) -> Self {
        ParamAffine { basis: Basis::Sigma2, c1: 0.0, c0 }
    }

    /// Whether the value does not actually depend on the parameter.
    pub fn is_constant(&self) -> bool {
        self.c1 == 0.0
    }

    /// Evaluate at a positive σ².
    pub fn eval(&self, sigma2: f64) -> f64 {
        match self.basis {
            Basis::Sigma2 => self.c1 * sigma2 + self.c0,
            Basis::InvSigma2 => self.c1 / sigma2 + self.c0,
        }
    }

    /// Checked addition: both operands must live in the same basis, or
    /// at least one must be constant.
    ///
    /// # Errors
    /// [`Error::DegreeViolation`] when σ² and σ⁻² terms would mix.
    pub fn add(self, other: Self) -> Result<Self> {
        let basis = match (self.is_constant(), other.is_constant()) {
            (true, _) => other.basis,
            (false, true) => self.basis,
            (false, false) if self.basis == other.basis => self.basis,
            _ => {
                return Err(Error::DegreeViolation {
                    context: "sum would mix σ² and σ⁻² terms".to_string(),
                })
            }
        };
        Ok(ParamAffine { basis, c1: self.c1 + other.c1, c0: self.c0 + other.c0 })
    }

    /// Checked subtraction (see [`add`](Self::add)).
    ///
    /// # Errors
    /// [`Error::DegreeViolation`] when σ² and σ⁻² terms would mix.
    pub fn sub(self, other: Self) -> Result<Self> {
        self.add(other.scale(-1.0))
    }

    /// Multiply by a plain scalar.
    pub fn scale(self, k: f64) -> Self {
        ParamAffine { basis: self.basis, c1: self.c1 * k, c0: self.c0 * k }
    }

    /// Checked product.
    ///
    /// Same-basis factors must not both carry a parameter term (that
    /// would create a quadratic term); opposite-basis factors cancel
    /// degree by degree, and at most one of the two cross terms may be
    /// present.
    ///
    /// # Errors
    /// [`Error::DegreeViolation`] when the product leaves the affine
    /// class.
    pub fn mul(self, other: Self) -> Result<Self> {
        if self.basis == other.basis || self.is_constant() || other.is_constant() {
            if self.c1 * other.c1 != 0.0 {
                return Err(Error::DegreeViolation {
                    context: "product has a quadratic parameter term".to_string(),
                });
            }
            let basis = if self.is_constant() { other.basis } else { self.basis };
            return Ok(ParamAffine {
                basis,
                c1: self.c1 * other.c0 + self.c0 * other.c1,
                c0: self.c0 * other.c0,
            });
        }
        // Opposite bases: (a₁p + a₀)(b₁p⁻¹ + b₀)
        //   = a₁b₀·p + a₀b₁·p⁻¹ + (a₁b₁ + a₀b₀).
        let (a, b) = if self.basis == Basis::Sigma2 { (self, other) } else { (other, self) };
        let plus = a.c1 * b.c0;
        let minus = a.c0 * b.c1;
        let c0 = a.c1 * b.c1 + a.c0 * b.c0;
        match (plus != 0.0, minus != 0.0) {
            (true, true) => Err(Error::DegreeViolation {
                context: "product keeps both σ² and σ⁻² terms".to_string(),
            }),
            (_, true) => Ok(ParamAffine { basis: Basis::InvSigma2, c1: minus, c0 }),
            _ => Ok(ParamAffine { basis: Basis::Sigma2, c1: plus, c0 }),
        }
    }

    /// Exact division by the parameter: (c₁p + c₀)/p swaps basis and
    /// coefficients.
    pub fn div_param(self) -> Self {
        let basis = match self.basis {
            Basis::Sigma2 => Basis::InvSigma2,
            Basis::InvSigma2 => Basis::Sigma2,
        };
        ParamAffine { basis, c1: self.c0, c0: self.c1 }
    }

    /// Exact multiplication by the parameter (inverse of
    /// [`div_param`](Self::div_param)).
    pub fn mul_param(self) -> Self {
        self.div_param()
    }
}

/// A state-space vector affine in the parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineVector {
    /// Interpretation of `c1`.
    pub basis: Basis,
    /// Coefficient of the parameter.
    pub c1: DVector<f64>,
    /// Constant part.
    pub c0: DVector<f64>,
}

impl AffineVector {
    fn zero(basis: Basis, dim: usize) -> Self {
        AffineVector { basis, c1: DVector::zeros(dim), c0: DVector::zeros(dim) }
    }

    /// Evaluate at a positive σ².
    pub fn eval(&self, sigma2: f64) -> DVector<f64> {
        match self.basis {
            Basis::Sigma2 => &self.c1 * sigma2 + &self.c0,
            Basis::InvSigma2 => &self.c1 / sigma2 + &self.c0,
        }
    }
}

/// Parametric form of [`crate::solvers::bffd`]: every estimate as an
/// affine function of σ².
#[derive(Debug, Clone)]
pub struct ParamBffd {
    /// Initial state x̂₀(σ²) (σ² basis).
    pub x0: AffineVector,
    /// States x̂₀ … x̂_N (σ² basis).
    pub states: Vec<AffineVector>,
    /// Inputs û₁ … û_N (σ² basis).
    pub u: Vec<ParamAffine>,
    /// Outputs ŷ₁ … ŷ_N (σ² basis).
    pub y: Vec<ParamAffine>,
    /// Backward means at each input, None where the backward message is
    /// flat along bₙ (σ² basis).
    pub mb_u: Vec<Option<ParamAffine>>,
    /// Backward variance coefficients: V̆b = σ²·vb_u[n]; None where
    /// flat.
    pub vb_u: Vec<Option<f64>>,
    /// Whether the initial-state system was rank deficient (x̂₀
    /// coefficients are then the minimum-norm solutions).
    pub initial_state_rank_deficient: bool,
    /// Orthonormal basis of the initial-state system's null space
    /// (empty when the system has full rank or x₀ is fixed). Moving x̂₀
    /// along these directions leaves every quadratic term unchanged.
    pub initial_state_null: Vec<DVector<f64>>,
}

impl ParamBffd {
    /// Evaluate the whole parametric solution at one σ².
    pub fn eval(&self, sigma2: f64) -> BffdOutput {
        let n = self.u.len();
        BffdOutput {
            x0: self.x0.eval(sigma2),
            states: self.states.iter().map(|s| s.eval(sigma2)).collect(),
            u: self.u.iter().map(|v| v.eval(sigma2)).collect(),
            y: self.y.iter().map(|v| v.eval(sigma2)).collect(),
            mb_u: self
                .mb_u
                .iter()
                .map(|m| m.map(|v| v.eval(sigma2)).unwrap_or(f64::NAN))
                .collect(),
            vb_u: self
                .vb_u
                .iter()
                .map(|v| v.map(|c| c * sigma2).unwrap_or(f64::INFINITY))
                .collect(),
            backward_flat: (0..n).map(|i| self.vb_u[i].is_none()).collect(),
            initial_state_rank_deficient: self.initial_state_rank_deficient,
        }
    }
}

/// Parametric form of [`crate::solvers::ffbdd`].
#[derive(Debug, Clone)]
pub struct ParamFfbdd {
    /// Posterior initial state (σ² basis).
    pub x0_posterior: AffineVector,
    /// Inputs û₁ … û_N (σ² basis).
    pub u: Vec<ParamAffine>,
    /// Outputs ŷ₁ … ŷ_N (σ² basis).
    pub y: Vec<ParamAffine>,
    /// Cavity means at each output (σ² basis).
    pub mf_y: Vec<ParamAffine>,
    /// Cavity variance coefficients: V̆f_Y = σ²·vf_y[n].
    pub vf_y: Vec<f64>,
    /// Dual means ξ̃ at X₀ … X_N (σ⁻² basis).
    pub xi_x: Vec<AffineVector>,
}

impl ParamFfbdd {
    /// Evaluate the whole parametric solution at one σ².
    pub fn eval(&self, sigma2: f64) -> FfbddOutput {
        FfbddOutput {
            x0_posterior: self.x0_posterior.eval(sigma2),
            u: self.u.iter().map(|v| v.eval(sigma2)).collect(),
            y: self.y.iter().map(|v| v.eval(sigma2)).collect(),
            xi_x: self.xi_x.iter().map(|v| v.eval(sigma2)).collect(),
            mf_y: self.mf_y.iter().map(|v| v.eval(sigma2)).collect(),
            vf_y: self.vf_y.iter().map(|c| c * sigma2).collect(),
        }
    }
}

struct ParamBwdStep {
    wb1: DVector<f64>,
    bxi1: f64,
    bxi0: f64,
    bwb1: f64,
    curv_scale: f64,
}

/// σ²-parametric backward–forward sweep for an input-regularized model
/// under a fixed segment assignment.
///
/// The backward precision is exactly σ⁻²·W⁽¹⁾ and the backward
/// canonical mean exactly σ⁻²·ξ⁽¹⁾ + ξ⁽⁰⁾ (data terms feed ξ⁽¹⁾, line
/// tilts feed ξ⁽⁰⁾), so one pass over the σ²-free coefficients
/// reproduces [`crate::solvers::bffd`] at every σ² simultaneously.
///
/// # Errors
/// As for [`crate::solvers::bffd`]; identifiability is σ²-independent
/// here, which is why a single check per step suffices.
pub fn param_bffd(model: &StateSpaceModel, active: &[usize]) -> Result<ParamBffd> {
    model.validate()?;
    check_active(&model.costs, active)?;
    if model.side != RegSide::Input {
        return Err(Error::InvalidModel {
            reason: "param_bffd applies to input-regularized models; use param_ffbdd".to_string(),
        });
    }
    let n_steps = model.steps;
    let m = model.state_dim;

    // Backward pass over σ²-free coefficients:
    //   W̆ = σ⁻²·w1, ξ̆ = σ⁻²·xi1 + xi0.
    let mut w1 = model.qn.clone();
    let mut xi1 = &model.qn * &model.xn_bar;
    let mut xi0 = DVector::zeros(m);
    // Flatness must be judged against the largest curvature the pass has
    // seen, not the current one: once line segments have marginalized
    // directions spanning the state, the remaining W⁽¹⁾ is rounding
    // noise, and a locally scaled threshold would mistake that noise for
    // genuine curvature.
    let mut w1_scale = w1.amax();
    let mut cache: Vec<ParamBwdStep> = Vec::with_capacity(n_steps);
    for n in (0..n_steps).rev() {
        let b = &model.b[n];
        let c = &model.c[n];
        // Quadratic observation: both parts scale as σ⁻².
        w1 += c * c.transpose();
        xi1 += c * model.y[n];
        w1_scale = w1_scale.max(w1.amax());
        let wb1 = &w1 * b;
        let step = ParamBwdStep {
            bxi1: b.dot(&xi1),
            bxi0: b.dot(&xi0),
            bwb1: b.dot(&wb1),
            curv_scale: w1_scale * b.amax() * b.amax(),
            wb1,
        };
        match model.costs[n].segment_params(active[n]) {
            SegmentMsg::Point { mean } => {
                // h = b·mean has no σ² dependence; W̆h lands in ξ⁽¹⁾.
                xi1 -= &step.wb1 * mean;
            }
            SegmentMsg::Flat { xi: xi_f } => {
                if step.bwb1 <= tol::scalar_zero(step.curv_scale) {
                    return Err(Error::Unidentifiable { index: n });
                }
                let h1inv = 1.0 / step.bwb1;
                // h = h⁽⁰⁾ + σ²·h⁽¹⁾ cross-couples the two mean parts:
                //   ξ⁽¹⁾ ← ξ⁽¹⁾ − W⁽¹⁾h⁽⁰⁾, ξ⁽⁰⁾ ← ξ⁽⁰⁾ − W⁽¹⁾h⁽¹⁾.
                let h0 = b * (h1inv * step.bxi1);
                let h1 = b * (h1inv * (xi_f + step.bxi0));
                xi1 -= &w1 * h0;
                xi0 -= &w1 * h1;
                let update = &step.wb1 * step.wb1.transpose() * h1inv;
                w1 -= update;
                w1 = (&w1 + w1.transpose()) * 0.5;
            }
        }
        cache.push(step);
        xi1 = model.a.transpose() * xi1;
        xi0 = model.a.transpose() * xi0;
        w1 = model.a.transpose() * &w1 * &model.a;
    }
    cache.reverse();

    // Initial state: (Q₀ + W⁽¹⁾)x̂₀ = (Q₀x̆₀ + ξ⁽¹⁾) + σ²·ξ⁽⁰⁾.
    let mut rank_deficient = false;
    let mut null_basis: Vec<DVector<f64>> = Vec::new();
    let x0 = if model.fixed_initial_state {
        AffineVector { basis: Basis::Sigma2, c1: DVector::zeros(m), c0: model.x0_bar.clone() }
    } else {
        let s = &model.q0 + &w1;
        let rhs0 = &model.q0 * &model.x0_bar + &xi1;
        let svd = s.svd(true, true);
        let smax = svd.singular_values.max();
        let floor = tol::SCALAR_ZERO_REL * (1.0 + smax) * m as f64;
        let rank = svd.singular_values.iter().filter(|&&sv| sv > floor).count();
        rank_deficient = rank < m;
        if rank_deficient {
            let v_t = svd.v_t.as_ref().expect("requested right singular vectors");
            for (i, &sv) in svd.singular_values.iter().enumerate() {
                if sv <= floor {
                    null_basis.push(v_t.row(i).transpose());
                }
            }
        }
        let solve = |rhs: &DVector<f64>| {
            svd.solve(rhs, floor).map_err(|e| Error::InvalidModel {
                reason: format!("initial-state solve failed: {e}"),
            })
        };
        AffineVector { basis: Basis::Sigma2, c1: solve(&xi0)?, c0: solve(&rhs0)? }
    };

    // Forward pass, all quantities affine in σ².
    let mut states = Vec::with_capacity(n_steps + 1);
    let mut u = Vec::with_capacity(n_steps);
    let mut y = Vec::with_capacity(n_steps);
    let mut mb_u = Vec::with_capacity(n_steps);
    let mut vb_u = Vec::with_capacity(n_steps);
    states.push(x0.clone());
    for n in 0..n_steps {
        let prev = states.last().expect("nonempty");
        let pred1 = &model.a * &prev.c1;
        let pred0 = &model.a * &prev.c0;
        let step = &cache[n];
        let flat = step.bwb1 <= tol::scalar_zero(step.curv_scale);
        let (mb, vb) = if flat {
            (None, None)
        } else {
            let v1 = 1.0 / step.bwb1;
            // m̆b = V̆b(bᵀξ̆ − bᵀW̆x̂′) with V̆b = σ²·v1 and the σ⁻²
            // parts of ξ̆ and W̆: the σ² cancels degree by degree.
            let mb0 = v1 * (step.bxi1 - step.wb1.dot(&pred0));
            let mb1 = v1 * (step.bxi0 - step.wb1.dot(&pred1));
            (Some(ParamAffine::in_sigma2(mb1, mb0)), Some(v1))
        };
        let un = match model.costs[n].segment_params(active[n]) {
            SegmentMsg::Point { mean } => ParamAffine::constant(mean),
            SegmentMsg::Flat { xi } => {
                debug_assert!(!flat);
                let v1 = vb.expect("line segments need curvature");
                mb.expect("line segments need a backward mean")
                    .add(ParamAffine::in_sigma2(v1 * xi, 0.0))?
            }
        };
        let next = AffineVector {
            basis: Basis::Sigma2,
            c1: pred1 + &model.b[n] * un.c1,
            c0: pred0 + &model.b[n] * un.c0,
        };
        y.push(ParamAffine::in_sigma2(model.c[n].dot(&next.c1), model.c[n].dot(&next.c0)));
        u.push(un);
        mb_u.push(mb);
        vb_u.push(vb);
        states.push(next);
    }
    Ok(ParamBffd {
        x0,
        states,
        u,
        y,
        mb_u,
        vb_u,
        initial_state_rank_deficient: rank_deficient,
        initial_state_null: null_basis,
    })
}

struct ParamFwdStep {
    vc1: DVector<f64>,
    cm0: f64,
    cm1: f64,
    cvc1: f64,
}

/// σ²-parametric forward–backward sweep for an output-regularized model
/// under a fixed segment assignment.
///
/// The forward covariance is exactly σ²·V⁽¹⁾ and the forward mean
/// exactly m⁽⁰⁾ + σ²·m⁽¹⁾; dual means are affine in σ⁻², and the final
/// estimates affine in σ² again.
///
/// # Errors
/// As for [`crate::solvers::ffbdd`].
pub fn param_ffbdd(model: &StateSpaceModel, active: &[usize]) -> Result<ParamFfbdd> {
    let report = model.validate()?;
    check_active(&model.costs, active)?;
    if model.side != RegSide::Output {
        return Err(Error::InvalidModel {
            reason: "param_ffbdd applies to output-regularized models; use param_bffd".to_string(),
        });
    }
    let n_steps = model.steps;
    let m = model.state_dim;
    let q0_inv = model.q0.clone().try_inverse().ok_or_else(|| Error::InvalidModel {
        reason: "output-regularized sweep needs an invertible initial-state weight Q₀".to_string(),
    })?;

    // Forward pass: V̆f = σ²·v1, m̆f = m0 + σ²·m1.
    let mut v1 = q0_inv.clone();
    let mut m0 = model.x0_bar.clone();
    let mut m1 = DVector::zeros(m);
    // Degeneracy must be judged against the largest variance the pass has
    // seen, not the current one: once point clamps have absorbed
    // directions spanning the state, the remaining V⁽¹⁾ is rounding
    // noise — possibly negative — and a locally scaled threshold would
    // mistake that noise for genuine slack.
    let mut v1_scale = v1.amax();
    let mut cache: Vec<ParamFwdStep> = Vec::with_capacity(n_steps);
    for n in 0..n_steps {
        let b = &model.b[n];
        let c = &model.c[n];
        m0 = &model.a * m0;
        m1 = &model.a * m1;
        v1 = &model.a * &v1 * model.a.transpose();
        // Quadratic input penalty: covariance σ²bbᵀ.
        v1 += b * b.transpose();
        v1_scale = v1_scale.max(v1.amax());
        let vc1 = &v1 * c;
        // Snap a noise-level cavity variance slope to an exact zero so
        // downstream validity conditions see a pinned coordinate instead
        // of dividing by (or rejecting) a rounding residue.
        let cvc1_raw = c.dot(&vc1);
        let cvc1 = if cvc1_raw <= tol::scalar_zero(v1_scale * c.amax() * c.amax()) {
            0.0
        } else {
            cvc1_raw
        };
        let step = ParamFwdStep { cm0: c.dot(&m0), cm1: c.dot(&m1), cvc1, vc1 };
        match model.costs[n].segment_params(active[n]) {
            SegmentMsg::Point { mean: loc } => {
                if step.cvc1 == 0.0 {
                    return Err(Error::Unidentifiable { index: n });
                }
                let g1 = 1.0 / step.cvc1;
                // G = σ⁻²·g1: the mean correction splits into a constant
                // part pulling m⁽⁰⁾ to the clamp and a deflation of m⁽¹⁾.
                m0 += &step.vc1 * (g1 * (loc - step.cm0));
                m1 -= &step.vc1 * (g1 * step.cm1);
                let update = &step.vc1 * step.vc1.transpose() * g1;
                v1 -= update;
                v1 = (&v1 + v1.transpose()) * 0.5;
            }
            SegmentMsg::Flat { xi } => {
                m1 += &step.vc1 * xi;
            }
        }
        cache.push(step);
    }

    // End term → dual mean at X_N in the σ⁻² basis.
    let (mut z1, mut z0) = if report.qn_zero {
        (DVector::zeros(m), DVector::zeros(m))
    } else {
        let qn_inv = model.qn.clone().try_inverse().ok_or_else(|| Error::InvalidModel {
            reason: "nonzero end weight Q_N must be invertible for the output sweep".to_string(),
        })?;
        let s = (&v1 + &qn_inv).lu();
        let z1 = s.solve(&(&m0 - &model.xn_bar)).ok_or(Error::NotInvertible {
            cond: f64::INFINITY,
        })?;
        let z0 = s.solve(&m1).ok_or(Error::NotInvertible { cond: f64::INFINITY })?;
        (z1, z0)
    };

    // Backward pass: ξ̃ = σ⁻²·z1 + z0.
    let mut xi_x = vec![AffineVector::zero(Basis::InvSigma2, m); n_steps + 1];
    xi_x[n_steps] = AffineVector { basis: Basis::InvSigma2, c1: z1.clone(), c0: z0.clone() };
    let mut u = vec![ParamAffine::constant(0.0); n_steps];
    let mut y = vec![ParamAffine::constant(0.0); n_steps];
    let mut mf_y = vec![ParamAffine::constant(0.0); n_steps];
    let mut vf_y = vec![0.0; n_steps];
    for n in (0..n_steps).rev() {
        let step = &cache[n];
        // Cavity mean: the σ² in V̆f·ξ̃ cancels degree by degree.
        let my = ParamAffine::in_sigma2(
            step.cm1 - step.vc1.dot(&z0),
            step.cm0 - step.vc1.dot(&z1),
        );
        let (zy, yn) = match model.costs[n].segment_params(active[n]) {
            SegmentMsg::Point { mean: loc } => {
                // ξ̃_Y = (m̆f_Y − loc)/V̆f_Y: dividing an affine-in-σ²
                // numerator by σ²·cvc1 swaps the basis.
                let num = my.sub(ParamAffine::constant(loc))?.scale(1.0 / step.cvc1);
                (num.div_param(), ParamAffine::constant(loc))
            }
            SegmentMsg::Flat { xi } => (
                ParamAffine::constant(-xi),
                my.add(ParamAffine::in_sigma2(step.cvc1 * xi, 0.0))?,
            ),
        };
        // ξ̃ at X″ and the input decision û = −σ²·bᵀξ̃.
        let zy = if zy.basis == Basis::InvSigma2 {
            zy
        } else {
            ParamAffine::in_inv_sigma2(0.0, zy.c0)
        };
        let c = &model.c[n];
        let z1_mid = &z1 + c * zy.c1;
        let z0_mid = &z0 + c * zy.c0;
        let b = &model.b[n];
        u[n] = ParamAffine::in_sigma2(-b.dot(&z0_mid), -b.dot(&z1_mid));
        y[n] = yn;
        mf_y[n] = my;
        vf_y[n] = step.cvc1;
        z1 = model.a.transpose() * z1_mid;
        z0 = model.a.transpose() * z0_mid;
        xi_x[n] = AffineVector { basis: Basis::InvSigma2, c1: z1.clone(), c0: z0.clone() };
    }
    let x0_posterior = AffineVector {
        basis: Basis::Sigma2,
        c1: -(&q0_inv * &xi_x[0].c0),
        c0: &model.x0_bar - &q0_inv * &xi_x[0].c1,
    };
    Ok(ParamFfbdd { x0_posterior, u, y, mf_y, vf_y, xi_x })
}
