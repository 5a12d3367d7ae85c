//! Operator-valued quantities the stability conditions and triggering rules
//! are built from.
//!
//! `F`, `B` and every operator composed with them factor through the core
//! coordinates `(a₀, x2)`, so their norms reduce to small dense matrices.
//! Operators that act on the full truncated state (`T(t)`, `Δ_t`, `e^{(A+BF)t}`)
//! keep diagonal columns off the core and go through [`CoreColumnOperator`].

use nalgebra::{Complex, DMatrix, DVector, RowDVector};

use crate::error::{Error, Result};
use crate::linalg::{exp_with_integrals, expm, spectral_norm, sym_max_eigenvalue, CoreColumnOperator};
use crate::numerics::{adaptive_simpson, golden_max, grid_sup};
use crate::spectral_model::{CascadeModel, DrivingBlock, Propagator, SpectralState};

/// Default node count for sup-over-interval grids.
pub const DEFAULT_GRID_POINTS: usize = 2001;

/// Absolute tolerance of every adaptive quadrature.
pub const QUAD_TOL: f64 = 1e-10;

/// `‖T_BF(t)‖ ≤ Γ e^{−γt}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayEnvelope {
    pub gamma: f64,
    pub big_gamma: f64,
    /// Last time sampled while estimating `Γ`; zero when `Γ` was supplied.
    pub t_grid_max: f64,
    /// True when `Γ` was computed from the truncated closed loop. Heat modes
    /// beyond the truncation decay at rate ≥ π² and never feed back.
    pub certified_on_truncation: bool,
}

impl DecayEnvelope {
    /// An envelope taken on trust, e.g. constants computed elsewhere.
    pub fn new(gamma: f64, big_gamma: f64) -> Result<Self> {
        let env = Self {
            gamma,
            big_gamma,
            t_grid_max: 0.0,
            certified_on_truncation: false,
        };
        env.validate()?;
        Ok(env)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "gamma must be positive, got {}",
                self.gamma
            )));
        }
        if !(self.big_gamma >= 1.0 && self.big_gamma.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "Gamma must be >= 1, got {}",
                self.big_gamma
            )));
        }
        Ok(())
    }
}

/// Grid used by [`gamma_estimate`]: march with `step` until the peak lies a
/// full decade behind, never stopping before `min_horizon` or after `max_horizon`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeGrid {
    pub step: f64,
    pub min_horizon: f64,
    pub max_horizon: f64,
}

impl Default for EnvelopeGrid {
    fn default() -> Self {
        Self {
            step: 0.01,
            min_horizon: 1.0,
            max_horizon: 200.0,
        }
    }
}

/// `‖B‖ = ‖H‖`: `B` injects into the ODE block only.
pub fn norm_b(model: &CascadeModel) -> f64 {
    spectral_norm(model.h())
}

/// `‖BF‖ = ‖H[F₁, F₂]‖`.
pub fn norm_bf(model: &CascadeModel) -> f64 {
    spectral_norm(&(model.h() * model.feedback_row()))
}

/// `F·T(t)`, `F·S_t F` and friends reduced to matrices on `(a₀, x2)`.
#[derive(Debug, Clone)]
pub struct ReducedMaps {
    /// `Q(t)`, `m × p`.
    pub q: DMatrix<f64>,
    /// `∫₀ᵗ Q(s) ds`, `m × p`.
    pub q_int: DMatrix<f64>,
    /// `[F₁, Q(t)]`, the matrix of `F T(t)`.
    pub ft_row: DMatrix<f64>,
    /// `∫₀ᵗ Q(s) H ds · [F₁, F₂]`, the matrix of `F S_t F`.
    pub fsf_row: DMatrix<f64>,
}

impl ReducedMaps {
    pub fn new(model: &CascadeModel, t: f64) -> Self {
        let e = exp_with_integrals(model.g(), t);
        let f1b0 = model.f1() * model.modes().bcoef.row(0);
        let q = &f1b0 * &e.int1 + model.f2() * &e.exp;
        let q_int = &f1b0 * &e.int2 + model.f2() * &e.int1;
        let mut ft_row = DMatrix::zeros(model.m(), 1 + model.p());
        ft_row.column_mut(0).copy_from(model.f1());
        ft_row.view_mut((0, 1), (model.m(), model.p())).copy_from(&q);
        let fsf_row = &q_int * model.h() * model.feedback_row();
        Self {
            q,
            q_int,
            ft_row,
            fsf_row,
        }
    }

    /// Matrix of `F(I − Δ_t)`.
    pub fn f_i_minus_delta(&self, model: &CascadeModel) -> DMatrix<f64> {
        model.feedback_row() - &self.ft_row - &self.fsf_row
    }
}

/// `Q(t) = F₁⟨b, f₀⟩ ∫₀ᵗ e^{Gs} ds + F₂ e^{Gt}`.
pub fn q_matrix(model: &CascadeModel, t: f64) -> DMatrix<f64> {
    ReducedMaps::new(model, t).q
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FiniteRankKind {
    /// `F(I − Δ_t)`
    FIMinusDelta,
    /// `F T(t)`
    FT,
    /// `BF(I − Δ_t)`
    BFIMinusDelta,
}

/// Matrix representative of a finite-rank operator on `(a₀, x2)`.
pub fn finite_rank_matrix(model: &CascadeModel, kind: FiniteRankKind, t: f64) -> DMatrix<f64> {
    let r = ReducedMaps::new(model, t);
    match kind {
        FiniteRankKind::FIMinusDelta => r.f_i_minus_delta(model),
        FiniteRankKind::FT => r.ft_row,
        FiniteRankKind::BFIMinusDelta => model.h() * r.f_i_minus_delta(model),
    }
}

pub fn finite_rank_norm(model: &CascadeModel, kind: FiniteRankKind, t: f64) -> f64 {
    spectral_norm(&finite_rank_matrix(model, kind, t))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TruncatedKind {
    /// `T(t)`
    T,
    /// `Δ_t = T(t) + S_t F`
    Delta,
    /// `S_t F`
    SF,
}

/// Norm on the truncated space, with bounds on what the discarded modes could add.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedNorm {
    pub value: f64,
    /// Largest diagonal entry of a discarded mode, `e^{λ_{N+1} t}`.
    pub tail_diagonal: f64,
    /// Bound on the coupling from the ODE block into discarded modes.
    pub tail_coupling: f64,
}

pub fn truncated_operator(model: &CascadeModel, kind: TruncatedKind, t: f64) -> Result<CoreColumnOperator> {
    let prop = Propagator::new(model, t)?;
    let mut op = match kind {
        TruncatedKind::T | TruncatedKind::Delta => prop.semigroup_operator(model),
        TruncatedKind::SF => CoreColumnOperator::zeros(model.dim(), model.core_indices()),
    };
    if kind != TruncatedKind::T {
        // S_t F only has core columns: S_t · [F₁, F₂].
        let sf = prop.input_integral(model) * model.feedback_row();
        *op.core_columns_mut() += sf;
    }
    Ok(op)
}

pub fn truncated_norm(model: &CascadeModel, kind: TruncatedKind, t: f64) -> Result<TruncatedNorm> {
    let value = truncated_operator(model, kind, t)?.norm();
    let lam_next = -((model.n_modes() + 1) as f64 * std::f64::consts::PI).powi(2);
    let tail_diagonal = (lam_next * t).exp();
    let growth = (spectral_norm(model.g()) * t).exp();
    let tail_coupling = model.influence_tail() * growth * (-(lam_next * t).exp_m1()) / -lam_next;
    Ok(TruncatedNorm {
        value,
        tail_diagonal,
        tail_coupling,
    })
}

/// `η(τ) = Γe^{ΓLτ}[(1 − ε‖B‖/γ)e^{−γτ} + ε‖B‖/γ]`, the growth factor of the
/// state between two self-triggered updates.
pub fn eta(env: &DecayEnvelope, norm_b: f64, l: f64, eps: f64, tau: f64) -> f64 {
    let k = eps * norm_b / env.gamma;
    env.big_gamma * (env.big_gamma * l * tau).exp() * ((1.0 - k) * (-env.gamma * tau).exp() + k)
}

/// `∫₀^τ ‖F T(τ − s)‖ η(s) ds`, the state-independent factor in `α`.
pub fn alpha_integral(model: &CascadeModel, env: &DecayEnvelope, l: f64, eps: f64, tau: f64) -> f64 {
    if tau <= 0.0 {
        return 0.0;
    }
    let nb = norm_b(model);
    let integrand = |s: f64| finite_rank_norm(model, FiniteRankKind::FT, tau - s) * eta(env, nb, l, eps, s);
    adaptive_simpson(integrand, 0.0, tau, QUAD_TOL)
}

/// `α(ξ, τ) = ‖F(I − Δ_τ)ξ‖ + L ∫₀^τ ‖F T(τ − s)‖ η(s) ds ‖ξ‖`.
pub fn alpha(model: &CascadeModel, env: &DecayEnvelope, l: f64, eps: f64, xi: &SpectralState, tau: f64) -> Result<f64> {
    model.check_state(xi)?;
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "tau must be finite and >= 0, got {tau}"
        )));
    }
    let direct = (finite_rank_matrix(model, FiniteRankKind::FIMinusDelta, tau) * xi.core()).norm();
    if l == 0.0 {
        return Ok(direct);
    }
    Ok(direct + l * alpha_integral(model, env, l, eps, tau) * xi.norm())
}

/// `e^{(A+BF)t}` on the truncation.
pub fn closed_loop_operator(model: &CascadeModel, t: f64) -> CoreColumnOperator {
    let n = model.n_modes();
    let p = model.p();
    let q = 1 + p;
    let modes = model.modes();
    let block = DrivingBlock::new(model.core_closed_loop(), t);
    let mut op = CoreColumnOperator::zeros(model.dim(), model.core_indices());
    for k in 1..=n {
        op.set_diag(k, (modes.lambda[k] * t).exp());
    }
    let cols = op.core_columns_mut();
    // Core rows: a₀ is row 0, the ODE block sits at the end.
    cols.row_mut(0).copy_from(&block.exp.row(0));
    cols.view_mut((n + 1, 0), (p, q)).copy_from(&block.exp.rows(1, p));
    for k in 1..=n {
        let b = modes.bcoef.row(k);
        if b.iter().all(|&v| v == 0.0) {
            continue;
        }
        let mut r = RowDVector::zeros(q);
        r.columns_mut(1, p).copy_from(&b);
        let (conv, _) = block.coupling(modes.lambda[k], &r);
        cols.row_mut(k).copy_from(&conv);
    }
    op
}

fn check_abscissa(abscissa: f64, gamma: f64) -> Result<()> {
    if !gamma.is_finite() || gamma <= 0.0 {
        return Err(Error::InvalidArgument(format!("gamma must be positive, got {gamma}")));
    }
    if abscissa >= -gamma {
        return Err(Error::SpectralAbscissaTooLarge {
            abscissa,
            neg_gamma: -gamma,
        });
    }
    Ok(())
}

fn max_real_part(m: &DMatrix<f64>) -> f64 {
    let eig: DVector<Complex<f64>> = m.complex_eigenvalues();
    eig.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
}

/// Spectral abscissa of the truncated `A + BF`.
pub fn closed_loop_abscissa(model: &CascadeModel) -> f64 {
    max_real_part(model.core_closed_loop()).max(model.modes().lambda[1])
}

/// Marches `f` on `grid`, stops a decade past the running argmax, then refines.
fn envelope_sup<F: Fn(f64) -> f64>(f: F, grid: &EnvelopeGrid) -> Result<(f64, f64, f64)> {
    if !(grid.step > 0.0 && grid.min_horizon > 0.0 && grid.max_horizon >= grid.min_horizon) {
        return Err(Error::InvalidArgument(
            "envelope grid must have positive step and horizons".into(),
        ));
    }
    let mut best = (0.0, f(0.0));
    let mut i = 0usize;
    let mut t;
    loop {
        i += 1;
        t = grid.step * i as f64;
        let v = f(t);
        if !v.is_finite() {
            return Err(Error::NonFinite("closed-loop envelope"));
        }
        if v > best.1 {
            best = (t, v);
        }
        if t >= grid.min_horizon.max(10.0 * best.0) || t >= grid.max_horizon {
            break;
        }
    }
    let lo = (best.0 - grid.step).max(0.0);
    let hi = best.0 + grid.step;
    let (tr, vr) = golden_max(&f, lo, hi, 1e-9);
    let peak = if vr > best.1 { (tr, vr) } else { best };
    Ok((peak.0, peak.1, t))
}

/// Smallest `Γ` with `‖e^{(A+BF)t}‖ ≤ Γe^{−γt}` on the sampled grid.
pub fn gamma_estimate(model: &CascadeModel, gamma: f64, grid: &EnvelopeGrid) -> Result<DecayEnvelope> {
    check_abscissa(closed_loop_abscissa(model), gamma)?;
    let f = |t: f64| (gamma * t).exp() * closed_loop_operator(model, t).norm();
    let (_, peak, t_max) = envelope_sup(f, grid)?;
    Ok(DecayEnvelope {
        gamma,
        big_gamma: peak.max(1.0),
        t_grid_max: t_max,
        certified_on_truncation: true,
    })
}

/// Dense counterpart of [`gamma_estimate`] for an arbitrary generator.
pub fn overshoot_of_matrix(m: &DMatrix<f64>, gamma: f64, grid: &EnvelopeGrid) -> Result<f64> {
    check_abscissa(max_real_part(m), gamma)?;
    let f = |t: f64| (gamma * t).exp() * expm(&(m * t)).singular_values().max();
    Ok(envelope_sup(f, grid)?.1.max(1.0))
}

/// `‖T(s)B · F(I − T_BF(t))‖`.
fn w_integrand(model: &CascadeModel, s: f64, t: f64) -> Result<f64> {
    let tb = Propagator::new(model, s)?.input_response(model);
    let q = model.core_closed_loop().nrows();
    let y = model.feedback_row() * (DMatrix::identity(q, q) - expm(&(model.core_closed_loop() * t)));
    // ‖XY‖² = λ_max(Yᵀ XᵀX Y) with X = T(s)B of rank at most m.
    let gram = tb.transpose() * &tb;
    Ok(sym_max_eigenvalue(&(y.transpose() * gram * &y)).max(0.0).sqrt())
}

/// `W(h) = Γe^{γh} sup_{0≤t≤h} ‖T(h − t) BF [I − T_BF(t)]‖`.
pub fn w_of_h(model: &CascadeModel, env: &DecayEnvelope, h: f64, points: usize) -> Result<f64> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidArgument(format!("h must be positive, got {h}")));
    }
    let f = |t: f64| w_integrand(model, h - t, t).unwrap_or(f64::NAN);
    let (_, sup) = grid_sup(f, 0.0, h, points);
    if !sup.is_finite() {
        return Err(Error::NonFinite("W(h)"));
    }
    Ok(env.big_gamma * (env.gamma * h).exp() * sup)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral_model::CascadeParams;
    use approx::assert_relative_eq;

    fn example(g: f64) -> CascadeModel {
        CascadeParams::example().with_g(g).build().unwrap()
    }

    #[test]
    fn q_examples() {
        let m = example(1.0);
        assert_eq!(q_matrix(&m, 0.0)[(0, 0)], -5.0);
        let e = std::f64::consts::E;
        assert_relative_eq!(
            q_matrix(&m, 1.0)[(0, 0)],
            -4.0 * (e - 1.0) - 5.0 * e,
            max_relative = 1e-13
        );
        assert_relative_eq!(q_matrix(&m, 1.0)[(0, 0)], -20.464, epsilon = 1e-3);
        let m2 = example(2.0);
        let e2 = e * e;
        assert_relative_eq!(
            q_matrix(&m2, 1.0)[(0, 0)],
            -4.0 * (e2 - 1.0) / 2.0 - 5.0 * e2,
            max_relative = 1e-13
        );
        assert_relative_eq!(q_matrix(&m2, 1.0)[(0, 0)], -49.723, epsilon = 1e-3);
    }

    #[test]
    fn finite_rank_at_zero() {
        let m = example(1.0);
        assert_eq!(finite_rank_norm(&m, FiniteRankKind::FIMinusDelta, 0.0), 0.0);
        assert_relative_eq!(
            finite_rank_norm(&m, FiniteRankKind::FT, 0.0),
            41f64.sqrt(),
            max_relative = 1e-15
        );
        let r = ReducedMaps::new(&m, 0.0);
        assert!(r.fsf_row.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn f_i_minus_delta_vanishes_monotonically() {
        let m = example(1.0);
        let vals: Vec<f64> = (1..=8)
            .map(|k| finite_rank_norm(&m, FiniteRankKind::FIMinusDelta, 10f64.powi(-k)))
            .collect();
        assert!(vals.windows(2).all(|w| w[1] < w[0]));
        assert!(vals[7] < 1e-6);
    }

    #[test]
    fn truncated_norm_examples() {
        let m = example(1.0);
        assert_relative_eq!(
            truncated_norm(&m, TruncatedKind::Delta, 0.0).unwrap().value,
            1.0,
            max_relative = 1e-14
        );
        assert_eq!(truncated_norm(&m, TruncatedKind::SF, 0.0).unwrap().value, 0.0);
        let t = truncated_norm(&m, TruncatedKind::T, 0.2).unwrap();
        assert!(t.value >= 0.2f64.exp());
        let dense = truncated_operator(&m, TruncatedKind::T, 0.2).unwrap().to_dense();
        assert_relative_eq!(t.value, dense.singular_values().max(), max_relative = 1e-10);
        assert!(t.tail_diagonal < 1e-300 && t.tail_coupling >= 0.0);
    }

    #[test]
    fn eta_examples() {
        let env = DecayEnvelope::new(1.0, 1.92).unwrap();
        assert_eq!(eta(&env, 1.0, 0.3, 0.2, 0.0), 1.92);
        assert_relative_eq!(
            eta(&env, 1.0, 0.0, 0.0, 0.7),
            1.92 * (-0.7f64).exp(),
            max_relative = 1e-15
        );
        let l = 5f64.sqrt() * 0.1;
        let direct = 1.92 * (1.92 * l * 0.5f64).exp() * (0.71 * (-0.5f64).exp() + 0.29);
        assert_relative_eq!(eta(&env, 1.0, l, 0.29, 0.5), direct, max_relative = 1e-14);
        assert_relative_eq!(eta(&env, 1.0, l, 0.29, 0.5), 1.71492, epsilon = 1e-5);
    }

    #[test]
    fn alpha_limits() {
        let m = example(1.0);
        let env = DecayEnvelope::new(1.0, 1.92).unwrap();
        let x = m.example_initial_state();
        assert_eq!(alpha(&m, &env, 0.2, 0.3, &x, 0.0).unwrap(), 0.0);
        let direct = (finite_rank_matrix(&m, FiniteRankKind::FIMinusDelta, 0.05) * x.core()).norm();
        assert_eq!(alpha(&m, &env, 0.0, 0.3, &x, 0.05).unwrap(), direct);
    }

    #[test]
    fn diagonal_generator_has_no_overshoot() {
        let d = DMatrix::from_diagonal(&DVector::from_row_slice(&[-2.0, -3.0, -5.0]));
        let g = overshoot_of_matrix(&d, 1.0, &EnvelopeGrid::default()).unwrap();
        assert_eq!(g, 1.0);
        assert!(matches!(
            overshoot_of_matrix(&d, 2.5, &EnvelopeGrid::default()),
            Err(Error::SpectralAbscissaTooLarge { .. })
        ));
    }

    #[test]
    fn closed_loop_operator_matches_dense() {
        let m = CascadeParams::example().with_modes(30).build().unwrap();
        for &t in &[1e-4, 0.05, 0.9, 4.0] {
            let op = closed_loop_operator(&m, t);
            let dense = expm(&(m.closed_loop_matrix() * t));
            assert_relative_eq!(op.to_dense(), dense, max_relative = 1e-10, epsilon = 1e-12);
        }
    }

    #[test]
    fn w_vanishes_for_small_h() {
        let m = example(1.0);
        let env = DecayEnvelope::new(1.0, 1.92).unwrap();
        let w1 = w_of_h(&m, &env, 1e-4, 201).unwrap();
        let w2 = w_of_h(&m, &env, 1e-3, 201).unwrap();
        assert!(w1 < w2 && w1 < 1e-2);
        assert!(w_of_h(&m, &env, 0.0, 11).is_err());
    }
}
