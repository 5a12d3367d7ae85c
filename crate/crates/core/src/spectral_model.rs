//! The heat/ODE cascade in the cosine eigenbasis of the Neumann Laplacian.
//!
//! The PDE state is stored as modal coefficients `a_n = ⟨x₁, f_n⟩` with
//! `f₀ = 1`, `f_n = √2 cos(nπξ)`, so the Euclidean norm of `(a, x2)` is the
//! norm of the state space. Flattened vectors put the `N + 1` modes first and
//! the ODE block after them.

use std::f64::consts::{PI, SQRT_2};
use std::ops::{Add, Mul, Sub};

use nalgebra::{DMatrix, DVector, RowDVector};

use crate::error::{Error, Result};
use crate::linalg::{exp_with_integrals, expm, CoreColumnOperator};

/// Piecewise-linear actuator efficiency `ψ`, odd-extended.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonlinearitySpec {
    pub r1: f64,
    pub r2: f64,
    pub theta: f64,
}

impl NonlinearitySpec {
    /// `ψ(x) = x`.
    pub const LINEAR: Self = Self {
        r1: 0.0,
        r2: 0.0,
        theta: 1.0,
    };

    pub fn new(r1: f64, r2: f64, theta: f64) -> Result<Self> {
        let spec = Self { r1, r2, theta };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<()> {
        let in_unit = |r: f64| (0.0..1.0).contains(&r);
        if !in_unit(self.r1) || !in_unit(self.r2) {
            return Err(Error::InvalidModel(format!(
                "nonlinearity slopes must lie in [0, 1), got r1 = {}, r2 = {}",
                self.r1, self.r2
            )));
        }
        if !(self.theta > 0.0 && self.theta.is_finite()) {
            return Err(Error::InvalidModel(format!(
                "breakpoint theta must be positive, got {}",
                self.theta
            )));
        }
        Ok(())
    }

    pub fn r(&self) -> f64 {
        self.r1.max(self.r2)
    }

    pub fn is_linear(&self) -> bool {
        self.r1 == 0.0 && self.r2 == 0.0
    }

    pub fn psi(&self, x: f64) -> f64 {
        let y = x.abs();
        let v = if y < self.theta {
            (1.0 + self.r1) * y
        } else {
            (1.0 - self.r2) * y + (self.r1 + self.r2) * self.theta
        };
        if x < 0.0 {
            -v
        } else {
            v
        }
    }

    /// `ψ(x) − x`, the part of the actuator response that the linear model misses.
    pub fn psi0(&self, x: f64) -> f64 {
        self.psi(x) - x
    }
}

/// Spatial profile of the actuator `b` acting on the PDE.
#[derive(Debug, Clone, PartialEq)]
pub enum Influence {
    /// `gain · 1_[a₁, a₂]`, identical for every ODE component.
    Indicator { support: (f64, f64), gain: f64 },
    /// Explicit modal coefficients, `(N + 1) × p`.
    Table(DMatrix<f64>),
}

/// User-facing parameter record; `build` validates it and caches the modal data.
#[derive(Debug, Clone, PartialEq)]
pub struct CascadeParams {
    pub influence: Influence,
    pub g: DMatrix<f64>,
    pub h: DMatrix<f64>,
    pub f1: DVector<f64>,
    pub f2: DMatrix<f64>,
    pub n_modes: usize,
    pub nonlin: NonlinearitySpec,
}

impl CascadeParams {
    /// The scalar example: `b = 5·1_[0.4, 0.6]`, `G = 1`, `H = 1`,
    /// `F₁ = −4`, `F₂ = −5`, 200 modes, linear actuator.
    pub fn example() -> Self {
        Self {
            influence: Influence::Indicator {
                support: (0.4, 0.6),
                gain: 5.0,
            },
            g: DMatrix::from_element(1, 1, 1.0),
            h: DMatrix::from_element(1, 1, 1.0),
            f1: DVector::from_element(1, -4.0),
            f2: DMatrix::from_element(1, 1, -5.0),
            n_modes: 200,
            nonlin: NonlinearitySpec::LINEAR,
        }
    }

    pub fn with_g(mut self, g: f64) -> Self {
        self.g = DMatrix::from_element(1, 1, g);
        self
    }

    pub fn with_nonlinearity(mut self, nonlin: NonlinearitySpec) -> Self {
        self.nonlin = nonlin;
        self
    }

    pub fn with_modes(mut self, n_modes: usize) -> Self {
        self.n_modes = n_modes;
        self
    }

    pub fn build(self) -> Result<CascadeModel> {
        CascadeModel::new(self)
    }
}

/// Eigenvalues of the Neumann Laplacian and the modal coefficients of `b`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeData {
    pub lambda: DVector<f64>,
    pub bcoef: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CascadeModel {
    params: CascadeParams,
    modes: ModeData,
    /// Closed-loop dynamics restricted to `(a₀, x2)`.
    core_closed_loop: DMatrix<f64>,
}

impl CascadeModel {
    pub fn new(params: CascadeParams) -> Result<Self> {
        let p = params.g.nrows();
        let m = params.h.ncols();
        if p == 0 || m == 0 {
            return Err(Error::InvalidModel("p and m must be positive".into()));
        }
        if params.g.ncols() != p {
            return Err(Error::InvalidModel(format!(
                "G must be square, got {}x{}",
                p,
                params.g.ncols()
            )));
        }
        if params.h.nrows() != p {
            return Err(Error::InvalidModel(format!(
                "H must be {}x{}, got {}x{}",
                p,
                m,
                params.h.nrows(),
                m
            )));
        }
        if params.f1.len() != m {
            return Err(Error::InvalidModel(format!(
                "F1 must have length {}, got {}",
                m,
                params.f1.len()
            )));
        }
        if params.f2.shape() != (m, p) {
            let (r, c) = params.f2.shape();
            return Err(Error::InvalidModel(format!("F2 must be {}x{}, got {}x{}", m, p, r, c)));
        }
        if params.n_modes < 1 {
            return Err(Error::InvalidModel("N must be at least 1".into()));
        }
        params.nonlin.validate()?;
        let finite = params
            .g
            .iter()
            .chain(params.h.iter())
            .chain(params.f1.iter())
            .chain(params.f2.iter());
        if finite.into_iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("model matrices"));
        }

        let n = params.n_modes;
        let lambda = DVector::from_fn(n + 1, |k, _| -((k as f64) * PI).powi(2));
        let bcoef = match &params.influence {
            Influence::Indicator {
                support: (a1, a2),
                gain,
            } => {
                let (a1, a2, gain) = (*a1, *a2, *gain);
                if !(0.0 <= a1 && a1 < a2 && a2 <= 1.0) {
                    return Err(Error::InvalidModel(format!(
                        "influence support must satisfy 0 <= a1 < a2 <= 1, got [{}, {}]",
                        a1, a2
                    )));
                }
                if !gain.is_finite() {
                    return Err(Error::NonFinite("influence gain"));
                }
                DMatrix::from_fn(n + 1, p, |k, _| indicator_coefficient(k, a1, a2, gain))
            }
            Influence::Table(t) => {
                if t.shape() != (n + 1, p) {
                    return Err(Error::InvalidModel(format!(
                        "coefficient table must be {}x{}, got {}x{}",
                        n + 1,
                        p,
                        t.nrows(),
                        t.ncols()
                    )));
                }
                if t.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite("coefficient table"));
                }
                t.clone()
            }
        };

        let mut core = DMatrix::zeros(1 + p, 1 + p);
        core.view_mut((0, 1), (1, p)).copy_from(&bcoef.row(0));
        core.view_mut((1, 0), (p, 1)).copy_from(&(&params.h * &params.f1));
        core.view_mut((1, 1), (p, p))
            .copy_from(&(&params.g + &params.h * &params.f2));

        Ok(Self {
            params,
            modes: ModeData { lambda, bcoef },
            core_closed_loop: core,
        })
    }

    pub fn params(&self) -> &CascadeParams {
        &self.params
    }

    pub fn modes(&self) -> &ModeData {
        &self.modes
    }

    pub fn n_modes(&self) -> usize {
        self.params.n_modes
    }

    pub fn p(&self) -> usize {
        self.params.g.nrows()
    }

    pub fn m(&self) -> usize {
        self.params.h.ncols()
    }

    pub fn g(&self) -> &DMatrix<f64> {
        &self.params.g
    }

    pub fn h(&self) -> &DMatrix<f64> {
        &self.params.h
    }

    pub fn f1(&self) -> &DVector<f64> {
        &self.params.f1
    }

    pub fn f2(&self) -> &DMatrix<f64> {
        &self.params.f2
    }

    pub fn nonlinearity(&self) -> &NonlinearitySpec {
        &self.params.nonlin
    }

    /// Length of the flattened state.
    pub fn dim(&self) -> usize {
        self.n_modes() + 1 + self.p()
    }

    /// Flattened indices of `a₀` and the ODE block: the only columns of any
    /// operator built here that are not diagonal.
    pub fn core_indices(&self) -> Vec<usize> {
        std::iter::once(0).chain(self.n_modes() + 1..self.dim()).collect()
    }

    /// `[F₁, F₂]`, the feedback acting on `(a₀, x2)`.
    pub fn feedback_row(&self) -> DMatrix<f64> {
        let (m, p) = (self.m(), self.p());
        let mut row = DMatrix::zeros(m, 1 + p);
        row.column_mut(0).copy_from(&self.params.f1);
        row.view_mut((0, 1), (m, p)).copy_from(&self.params.f2);
        row
    }

    /// Closed-loop generator restricted to `(a₀, x2)`.
    pub fn core_closed_loop(&self) -> &DMatrix<f64> {
        &self.core_closed_loop
    }

    /// `‖b‖` in L², i.e. the norm of the input map of the perturbation.
    pub fn influence_norm(&self) -> f64 {
        match &self.params.influence {
            Influence::Indicator {
                support: (a1, a2),
                gain,
            } => gain.abs() * (a2 - a1).sqrt(),
            Influence::Table(t) => crate::linalg::spectral_norm(t),
        }
    }

    /// Global Lipschitz constant `r‖b‖` of the perturbation.
    pub fn lipschitz_constant(&self) -> f64 {
        self.params.nonlin.r() * self.influence_norm()
    }

    /// ℓ² mass of the coefficients of `b` beyond the truncation (per column).
    pub fn influence_tail(&self) -> f64 {
        match &self.params.influence {
            Influence::Indicator {
                support: (a1, a2),
                gain,
            } => {
                let total = gain * gain * (a2 - a1);
                let kept = self.modes.bcoef.column(0).norm_squared();
                (total - kept).max(0.0).sqrt()
            }
            Influence::Table(_) => 0.0,
        }
    }

    /// Dense generator `A` of the truncated open loop.
    pub fn generator_matrix(&self) -> DMatrix<f64> {
        let (n, p, dim) = (self.n_modes(), self.p(), self.dim());
        let mut a = DMatrix::zeros(dim, dim);
        for k in 0..=n {
            a[(k, k)] = self.modes.lambda[k];
        }
        a.view_mut((0, n + 1), (n + 1, p)).copy_from(&self.modes.bcoef);
        a.view_mut((n + 1, n + 1), (p, p)).copy_from(&self.params.g);
        a
    }

    /// Dense `B`, `dim × m`.
    pub fn input_matrix(&self) -> DMatrix<f64> {
        let (n, p) = (self.n_modes(), self.p());
        let mut b = DMatrix::zeros(self.dim(), self.m());
        b.view_mut((n + 1, 0), (p, self.m())).copy_from(&self.params.h);
        b
    }

    /// Dense `F`, `m × dim`.
    pub fn feedback_matrix(&self) -> DMatrix<f64> {
        let n = self.n_modes();
        let mut f = DMatrix::zeros(self.m(), self.dim());
        f.column_mut(0).copy_from(&self.params.f1);
        f.view_mut((0, n + 1), (self.m(), self.p())).copy_from(&self.params.f2);
        f
    }

    /// Dense closed-loop generator `A + BF`.
    pub fn closed_loop_matrix(&self) -> DMatrix<f64> {
        self.generator_matrix() + self.input_matrix() * self.feedback_matrix()
    }

    pub fn zero_state(&self) -> SpectralState {
        SpectralState::zeros(self.n_modes(), self.p())
    }

    /// `z(ξ, 0) ≡ 2`, `x2(0) = −2`: only mode 0 is excited.
    pub fn example_initial_state(&self) -> SpectralState {
        let mut s = self.zero_state();
        s.a[0] = 2.0;
        s.x2.fill(-2.0);
        s
    }

    pub(crate) fn check_state(&self, s: &SpectralState) -> Result<()> {
        if s.a.len() != self.n_modes() + 1 || s.x2.len() != self.p() {
            return Err(Error::InvalidArgument(format!(
                "state has {} modes and {} ODE entries, model expects {} and {}",
                s.a.len(),
                s.x2.len(),
                self.n_modes() + 1,
                self.p()
            )));
        }
        if !s.is_finite() {
            return Err(Error::NonFinite("state"));
        }
        Ok(())
    }
}

fn indicator_coefficient(k: usize, a1: f64, a2: f64, gain: f64) -> f64 {
    if k == 0 {
        return gain * (a2 - a1);
    }
    let w = k as f64 * PI;
    gain * SQRT_2 * ((w * a2).sin() - (w * a1).sin()) / w
}

/// Modal PDE coefficients plus the ODE state.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralState {
    pub a: DVector<f64>,
    pub x2: DVector<f64>,
}

impl SpectralState {
    pub fn new(a: DVector<f64>, x2: DVector<f64>) -> Self {
        Self { a, x2 }
    }

    pub fn zeros(n_modes: usize, p: usize) -> Self {
        Self {
            a: DVector::zeros(n_modes + 1),
            x2: DVector::zeros(p),
        }
    }

    pub fn norm(&self) -> f64 {
        (self.a.norm_squared() + self.x2.norm_squared()).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.a.iter().chain(self.x2.iter()).all(|v| v.is_finite())
    }

    pub fn is_zero(&self) -> bool {
        self.a.iter().chain(self.x2.iter()).all(|&v| v == 0.0)
    }

    /// `(a₀, x2)`, the coordinates every finite-rank operator sees.
    pub fn core(&self) -> DVector<f64> {
        let p = self.x2.len();
        DVector::from_fn(1 + p, |i, _| if i == 0 { self.a[0] } else { self.x2[i - 1] })
    }

    pub fn to_vector(&self) -> DVector<f64> {
        let n = self.a.len();
        DVector::from_fn(n + self.x2.len(), |i, _| if i < n { self.a[i] } else { self.x2[i - n] })
    }

    pub fn from_vector(v: &DVector<f64>, n_modes: usize) -> Self {
        Self {
            a: v.rows(0, n_modes + 1).into_owned(),
            x2: v.rows(n_modes + 1, v.len() - n_modes - 1).into_owned(),
        }
    }
}

impl Add for &SpectralState {
    type Output = SpectralState;
    fn add(self, o: &SpectralState) -> SpectralState {
        SpectralState::new(&self.a + &o.a, &self.x2 + &o.x2)
    }
}

impl Sub for &SpectralState {
    type Output = SpectralState;
    fn sub(self, o: &SpectralState) -> SpectralState {
        SpectralState::new(&self.a - &o.a, &self.x2 - &o.x2)
    }
}

impl Mul<f64> for &SpectralState {
    type Output = SpectralState;
    fn mul(self, c: f64) -> SpectralState {
        SpectralState::new(&self.a * c, &self.x2 * c)
    }
}

/// `∫₀ᵗ e^{xs} ds`.
pub(crate) fn phi1(x: f64, t: f64) -> f64 {
    if x == 0.0 {
        t
    } else {
        (x * t).exp_m1() / x
    }
}

/// `e^{Mt}` and `∫₀ᵗ e^{Ms} ds` for the block a heat mode is driven by.
#[derive(Debug, Clone)]
pub(crate) struct DrivingBlock {
    m: DMatrix<f64>,
    t: f64,
    pub exp: DMatrix<f64>,
    pub int1: DMatrix<f64>,
}

impl DrivingBlock {
    pub fn new(m: &DMatrix<f64>, t: f64) -> Self {
        let e = exp_with_integrals(m, t);
        Self {
            m: m.clone(),
            t,
            exp: e.exp,
            int1: e.int1,
        }
    }

    /// For a mode `a' = λa + r·y`, `y' = My`: returns `r ∫₀ᵗ e^{λ(t−s)} e^{Ms} ds`
    /// and its integral over `[0, t]`.
    ///
    /// The resolvent closed form loses digits when `(M − λ)t` is small, so that
    /// regime goes through one augmented exponential instead.
    pub fn coupling(&self, lam: f64, r: &RowDVector<f64>) -> (RowDVector<f64>, RowDVector<f64>) {
        let q = self.m.nrows();
        let t = self.t;
        if q == 1 {
            let (conv, int) = scalar_coupling(lam, self.m[(0, 0)], t);
            return (r * conv, r * int);
        }
        let d = &self.m - DMatrix::identity(q, q) * lam;
        let smin = d.singular_values().min();
        if smin * t >= 0.5 {
            if let Some(y) = d.transpose().lu().solve(&r.transpose()) {
                let y = y.transpose();
                let id = DMatrix::<f64>::identity(q, q);
                let conv = &y * (&self.exp - &id * (lam * t).exp());
                let int = &y * (&self.int1 - &id * phi1(lam, t));
                return (conv, int);
            }
        }
        let mut aug = DMatrix::zeros(1 + q, 1 + q);
        aug[(0, 0)] = lam;
        aug.view_mut((0, 1), (1, q)).copy_from(r);
        aug.view_mut((1, 1), (q, q)).copy_from(&self.m);
        let e = exp_with_integrals(&aug, t);
        (
            e.exp.fixed_rows::<1>(0).columns(1, q).into_owned(),
            e.int1.fixed_rows::<1>(0).columns(1, q).into_owned(),
        )
    }
}

/// Scalar version of [`DrivingBlock::coupling`] without the row factor.
fn scalar_coupling(lam: f64, g: f64, t: f64) -> (f64, f64) {
    let d = g - lam;
    let z = d.abs() * t;
    let conv = (g.max(lam) * t).exp() * t * if z == 0.0 { 1.0 } else { -(-z).exp_m1() / z };
    let int = if z >= 0.5 {
        (phi1(g, t) - phi1(lam, t)) / d
    } else {
        // Second divided difference of x ↦ e^{xt} at (λ, g, 0).
        let mut a = DMatrix::zeros(3, 3);
        a[(0, 0)] = lam * t;
        a[(0, 1)] = t;
        a[(1, 1)] = g * t;
        a[(1, 2)] = t;
        expm(&a)[(0, 2)]
    };
    (conv, int)
}

/// Everything needed to advance the open loop by a fixed `t`: `T(t)` and
/// the map `v ↦ ∫₀ᵗ T(s) v ds`.
#[derive(Debug, Clone)]
pub struct Propagator {
    t: f64,
    decay: DVector<f64>,
    phi1: DVector<f64>,
    coupling: DMatrix<f64>,
    coupling_int: DMatrix<f64>,
    exp_g: DMatrix<f64>,
    int_exp_g: DMatrix<f64>,
}

impl Propagator {
    pub fn new(model: &CascadeModel, t: f64) -> Result<Self> {
        if !t.is_finite() || t < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "propagation time must be finite and >= 0, got {t}"
            )));
        }
        let n = model.n_modes();
        let p = model.p();
        let modes = model.modes();
        let block = DrivingBlock::new(model.g(), t);
        let mut coupling = DMatrix::zeros(n + 1, p);
        let mut coupling_int = DMatrix::zeros(n + 1, p);
        for k in 0..=n {
            let row = modes.bcoef.row(k).into_owned();
            if row.iter().all(|&v| v == 0.0) {
                continue;
            }
            let (c, ci) = block.coupling(modes.lambda[k], &row);
            coupling.row_mut(k).copy_from(&c);
            coupling_int.row_mut(k).copy_from(&ci);
        }
        Ok(Self {
            t,
            decay: modes.lambda.map(|l| (l * t).exp()),
            phi1: modes.lambda.map(|l| phi1(l, t)),
            coupling,
            coupling_int,
            exp_g: block.exp,
            int_exp_g: block.int1,
        })
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    /// `T(t)x`.
    pub fn apply(&self, x: &SpectralState) -> SpectralState {
        SpectralState::new(
            self.decay.component_mul(&x.a) + &self.coupling * &x.x2,
            &self.exp_g * &x.x2,
        )
    }

    /// `∫₀ᵗ T(s)v ds`.
    pub fn integrate(&self, v: &SpectralState) -> SpectralState {
        SpectralState::new(
            self.phi1.component_mul(&v.a) + &self.coupling_int * &v.x2,
            &self.int_exp_g * &v.x2,
        )
    }

    /// `T(t)x + ∫₀ᵗ T(s)v ds`, the mild solution under a constant forcing `v`.
    pub fn propagate(&self, x: &SpectralState, v: &SpectralState) -> SpectralState {
        let mut out = self.apply(x);
        out.a += self.phi1.component_mul(&v.a) + &self.coupling_int * &v.x2;
        out.x2 += &self.int_exp_g * &v.x2;
        out
    }

    /// `T(t)` as a structured operator.
    pub fn semigroup_operator(&self, model: &CascadeModel) -> CoreColumnOperator {
        let n = model.n_modes();
        let p = model.p();
        let mut op = CoreColumnOperator::zeros(model.dim(), model.core_indices());
        for k in 1..=n {
            op.set_diag(k, self.decay[k]);
        }
        let cols = op.core_columns_mut();
        cols[(0, 0)] = 1.0;
        cols.view_mut((0, 1), (n + 1, p)).copy_from(&self.coupling);
        cols.view_mut((n + 1, 1), (p, p)).copy_from(&self.exp_g);
        op
    }

    /// `S_t = ∫₀ᵗ T(s)B ds`, `dim × m`.
    pub fn input_integral(&self, model: &CascadeModel) -> DMatrix<f64> {
        let n = model.n_modes();
        let p = model.p();
        let mut s = DMatrix::zeros(model.dim(), model.m());
        s.view_mut((0, 0), (n + 1, model.m()))
            .copy_from(&(&self.coupling_int * model.h()));
        s.view_mut((n + 1, 0), (p, model.m()))
            .copy_from(&(&self.int_exp_g * model.h()));
        s
    }

    /// `T(t)B`, `dim × m`.
    pub fn input_response(&self, model: &CascadeModel) -> DMatrix<f64> {
        let n = model.n_modes();
        let p = model.p();
        let mut s = DMatrix::zeros(model.dim(), model.m());
        s.view_mut((0, 0), (n + 1, model.m()))
            .copy_from(&(&self.coupling * model.h()));
        s.view_mut((n + 1, 0), (p, model.m()))
            .copy_from(&(&self.exp_g * model.h()));
        s
    }
}

/// Modal data of the model: `λ_n = −n²π²` and `⟨b, f_n⟩`.
pub fn mode_coefficients(model: &CascadeModel) -> &ModeData {
    model.modes()
}

/// `T(t)x` for the open-loop cascade.
pub fn semigroup_apply(model: &CascadeModel, state: &SpectralState, t: f64) -> Result<SpectralState> {
    model.check_state(state)?;
    Ok(Propagator::new(model, t)?.apply(state))
}

/// `∫₀ᵗ T(s)v ds`.
pub fn forced_step(model: &CascadeModel, v: &SpectralState, t: f64) -> Result<SpectralState> {
    model.check_state(v)?;
    Ok(Propagator::new(model, t)?.integrate(v))
}

/// `F x = F₁a₀ + F₂x2`.
pub fn feedback_apply(model: &CascadeModel, state: &SpectralState) -> DVector<f64> {
    model.f1() * state.a[0] + model.f2() * &state.x2
}

/// `φ(x) = (b·(ψ(x2) − x2), 0)`.
pub fn perturbation(model: &CascadeModel, state: &SpectralState) -> Result<SpectralState> {
    let nl = model.nonlinearity();
    let mut out = model.zero_state();
    if nl.is_linear() {
        return Ok(out);
    }
    if model.p() != 1 {
        return Err(Error::UnsupportedNonlinearity { p: model.p() });
    }
    let w = nl.psi0(state.x2[0]);
    if w != 0.0 {
        out.a.copy_from(&(model.modes().bcoef.column(0) * w));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn example() -> CascadeModel {
        CascadeParams::example().build().unwrap()
    }

    #[test]
    fn indicator_coefficients() {
        let m = example();
        let b = &m.modes().bcoef;
        assert_relative_eq!(b[(0, 0)], 1.0, max_relative = 1e-15);
        assert!(b[(1, 0)].abs() < 1e-15);
        let b2 = 5.0 * SQRT_2 * ((1.2 * PI).sin() - (0.8 * PI).sin()) / (2.0 * PI);
        assert_relative_eq!(b[(2, 0)], b2, max_relative = 1e-14);
        assert_relative_eq!(b[(2, 0)], -1.3229, epsilon = 1e-4);
        assert_eq!(m.modes().lambda[0], 0.0);
    }

    #[test]
    fn mode_one_decays() {
        let m = example();
        let mut x = m.zero_state();
        x.a[1] = 1.0;
        let y = semigroup_apply(&m, &x, 0.1).unwrap();
        assert_relative_eq!(y.a[1], (-PI * PI * 0.1).exp(), max_relative = 1e-14);
        assert_relative_eq!(y.a[1], 0.372708, epsilon = 1e-6);
        assert_eq!(y.norm(), y.a[1].abs());
    }

    #[test]
    fn zero_time_is_identity_and_zero_integral() {
        let m = example();
        let x = m.example_initial_state();
        assert_eq!(semigroup_apply(&m, &x, 0.0).unwrap(), x);
        assert!(forced_step(&m, &x, 0.0).unwrap().is_zero());
    }

    #[test]
    fn mode_zero_integrates_linearly() {
        let m = example();
        let mut v = m.zero_state();
        v.a[0] = 1.5;
        let y = forced_step(&m, &v, 0.3).unwrap();
        assert_relative_eq!(y.a[0], 0.45, max_relative = 1e-15);
    }

    #[test]
    fn feedback_examples() {
        let m = example();
        let mut s = m.zero_state();
        assert_eq!(feedback_apply(&m, &s)[0], 0.0);
        s.a[0] = 1.0;
        assert_eq!(feedback_apply(&m, &s)[0], -4.0);
        assert_eq!(feedback_apply(&m, &m.example_initial_state())[0], 2.0);
    }

    #[test]
    fn psi_below_and_above_breakpoint() {
        let nl = NonlinearitySpec::new(0.1, 0.0, 0.5).unwrap();
        assert_relative_eq!(nl.psi(0.25), 0.275, max_relative = 1e-15);
        assert_relative_eq!(nl.psi0(0.25), 0.025, max_relative = 1e-12);
        assert_relative_eq!(nl.psi(-0.25), -0.275, max_relative = 1e-15);
        let nl = NonlinearitySpec::new(0.1, 0.2, 0.5).unwrap();
        assert_relative_eq!(nl.psi(1.0), 0.8 + 0.15, max_relative = 1e-15);
        assert_eq!(nl.psi(0.0), 0.0);
    }

    #[test]
    fn lipschitz_constant_of_example_model() {
        let m = CascadeParams::example()
            .with_nonlinearity(NonlinearitySpec::new(0.1, 0.1, 0.5).unwrap())
            .build()
            .unwrap();
        assert_relative_eq!(m.lipschitz_constant(), 5f64.sqrt() * 0.1, max_relative = 1e-15);
        assert!(perturbation(&m, &m.zero_state()).unwrap().is_zero());
    }

    #[test]
    fn rejects_bad_models() {
        let bad = CascadeParams {
            influence: Influence::Indicator {
                support: (0.6, 0.4),
                gain: 5.0,
            },
            ..CascadeParams::example()
        };
        assert!(matches!(bad.build(), Err(Error::InvalidModel(_))));
        assert!(CascadeParams::example().with_modes(0).build().is_err());
        let mut p = CascadeParams::example();
        p.f2 = DMatrix::zeros(2, 1);
        assert!(p.build().is_err());
        assert!(NonlinearitySpec::new(1.0, 0.0, 0.5).is_err());
        assert!(NonlinearitySpec::new(0.1, 0.0, 0.0).is_err());
    }

    #[test]
    fn vector_perturbation_is_rejected() {
        let mut p = CascadeParams::example().with_nonlinearity(NonlinearitySpec::new(0.1, 0.1, 0.5).unwrap());
        p.g = DMatrix::identity(2, 2);
        p.h = DMatrix::from_element(2, 1, 1.0);
        p.f2 = DMatrix::from_element(1, 2, -1.0);
        let m = p.build().unwrap();
        assert_eq!(
            perturbation(&m, &m.zero_state()),
            Err(Error::UnsupportedNonlinearity { p: 2 })
        );
    }

    #[test]
    fn matrix_coupling_matches_dense_exponential() {
        let mut p = CascadeParams::example().with_modes(12);
        p.g = DMatrix::from_row_slice(2, 2, &[0.5, 1.0, -2.0, -0.3]);
        p.h = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        p.f2 = DMatrix::from_row_slice(1, 2, &[-1.0, -2.0]);
        let m = p.build().unwrap();
        let x = SpectralState::new(
            DVector::from_fn(13, |i, _| 1.0 / (1.0 + i as f64)),
            DVector::from_row_slice(&[0.7, -1.1]),
        );
        for &t in &[1e-4, 0.03, 0.4, 2.0] {
            let dense = expm(&(m.generator_matrix() * t)) * x.to_vector();
            let y = semigroup_apply(&m, &x, t).unwrap().to_vector();
            assert_relative_eq!(y, dense, max_relative = 1e-11, epsilon = 1e-13);
        }
    }

    #[test]
    fn scalar_coupling_both_branches_agree() {
        // At z = 0.5 the two branches meet; each must match the augmented exponential.
        for &(lam, g, t) in &[(-9.0, 1.0, 0.05), (-9.0, 1.0, 0.049), (0.0, 1.0, 0.7), (1.0, 1.0, 0.3)] {
            let (conv, int) = scalar_coupling(lam, g, t);
            let mut a = DMatrix::zeros(3, 3);
            a[(0, 0)] = lam * t;
            a[(0, 1)] = t;
            a[(1, 1)] = g * t;
            a[(1, 2)] = t;
            let e = expm(&a);
            assert_relative_eq!(conv, e[(0, 1)], max_relative = 1e-13);
            assert_relative_eq!(int, e[(0, 2)], max_relative = 1e-12);
        }
    }
}
