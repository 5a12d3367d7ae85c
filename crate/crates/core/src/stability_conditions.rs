//! Sufficient conditions for exponential stability of the sampled closed loop,
//! each evaluated with its intermediate quantities and a signed margin.

use std::fmt;

use crate::error::{Error, Result};
use crate::numerics::{bisect_bracket, grid_sup, uniform_grid};
use crate::operator_calculus::{
    alpha_integral, finite_rank_matrix, finite_rank_norm, gamma_estimate, norm_b, norm_bf, truncated_norm, w_of_h,
    DecayEnvelope, EnvelopeGrid, FiniteRankKind, TruncatedKind, DEFAULT_GRID_POINTS,
};
use crate::spectral_model::{phi1, CascadeModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConditionId {
    /// Self-triggering with a Lipschitz perturbation.
    SelfTriggered,
    /// Dwell-time event triggering with a Lipschitz perturbation.
    EventTriggeredPerturbed,
    /// Dwell-time event triggering without perturbation.
    EventTriggeredLinear,
    /// Periodic event triggering given power-stability constants `(Ω, ω)`.
    PeriodicEventPowerStable,
    /// Periodic event triggering with a bounded control operator.
    PeriodicEventBounded,
    /// Plain periodic sampling.
    Periodic,
}

impl ConditionId {
    pub fn as_str(&self) -> &'static str {
        match self {
            ConditionId::SelfTriggered => "self_triggered",
            ConditionId::EventTriggeredPerturbed => "event_triggered_perturbed",
            ConditionId::EventTriggeredLinear => "event_triggered_linear",
            ConditionId::PeriodicEventPowerStable => "periodic_event_power_stable",
            ConditionId::PeriodicEventBounded => "periodic_event_bounded",
            ConditionId::Periodic => "periodic",
        }
    }
}

/// Outcome of a condition check. `satisfied` is exactly `margin > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub condition: ConditionId,
    pub inputs: Vec<(&'static str, f64)>,
    pub intermediates: Vec<(&'static str, f64)>,
    pub satisfied: bool,
    pub margin: f64,
}

impl StabilityReport {
    fn new(
        condition: ConditionId,
        inputs: Vec<(&'static str, f64)>,
        intermediates: Vec<(&'static str, f64)>,
        margin: f64,
    ) -> Self {
        Self {
            condition,
            inputs,
            intermediates,
            satisfied: margin > 0.0,
            margin,
        }
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.inputs
            .iter()
            .chain(self.intermediates.iter())
            .find(|(k, _)| *k == name)
            .map(|&(_, v)| v)
    }
}

impl fmt::Display for StabilityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "condition = {}", self.condition.as_str())?;
        writeln!(f, "satisfied = {}", self.satisfied)?;
        writeln!(f, "margin = {:.16e}", self.margin)?;
        for (k, v) in &self.inputs {
            writeln!(f, "input.{k} = {v:.16e}")?;
        }
        for (k, v) in &self.intermediates {
            writeln!(f, "value.{k} = {v:.16e}")?;
        }
        Ok(())
    }
}

fn require(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidArgument(msg()))
    }
}

fn nonneg(name: &str, v: f64) -> Result<()> {
    require(v >= 0.0 && v.is_finite(), || {
        format!("{name} must be finite and >= 0, got {v}")
    })
}

/// Sup of `f` over `[0, t]` on the standard grid.
fn sup_on<F: Fn(f64) -> f64>(f: F, t: f64, points: usize) -> f64 {
    if t == 0.0 {
        return f(0.0);
    }
    grid_sup(f, 0.0, t, points).1
}

/// `ϖ(L, ε, τ)`: the sup over `(0, τ]` of the perturbation growth in the
/// self-triggered estimate, which is attained at an endpoint.
pub fn varpi(env: &DecayEnvelope, norm_b: f64, l: f64, eps: f64, tau: f64) -> Result<f64> {
    require(tau > 0.0 && tau.is_finite(), || {
        format!("tau must be positive, got {tau}")
    })?;
    nonneg("L", l)?;
    nonneg("eps", eps)?;
    let (big, g) = (env.big_gamma, env.gamma);
    let gl = big * l;
    let bs = eps * big * norm_b / g;
    let num = (1.0 - bs) * (gl * tau).exp_m1() + bs * gl * phi1(gl + g, tau);
    Ok(num / (g * tau).exp_m1())
}

/// `max{ΓL/γ, ϖ(τ_max)} + Γ‖B‖ε/γ < 1`.
pub fn check_stm(env: &DecayEnvelope, norm_b: f64, l: f64, eps: f64, tau_max: f64) -> Result<StabilityReport> {
    env.validate()?;
    nonneg("norm_b", norm_b)?;
    let vp = varpi(env, norm_b, l, eps, tau_max)?;
    let limit = env.big_gamma * l / env.gamma;
    let vs = limit.max(vp);
    let input_term = env.big_gamma * norm_b * eps / env.gamma;
    Ok(StabilityReport::new(
        ConditionId::SelfTriggered,
        vec![
            ("Gamma", env.big_gamma),
            ("gamma", env.gamma),
            ("norm_b", norm_b),
            ("L", l),
            ("eps", eps),
            ("tau_max", tau_max),
        ],
        vec![
            ("varpi", vp),
            ("varpi_limit", limit),
            ("varpi_s", vs),
            ("input_term", input_term),
        ],
        1.0 - (vs + input_term),
    ))
}

/// `sup_{0≤τ≤τ_min} ‖BF(I − Δ_τ)‖`.
pub fn sup_bf_i_minus_delta(model: &CascadeModel, tau_min: f64, points: usize) -> f64 {
    sup_on(
        |t| finite_rank_norm(model, FiniteRankKind::BFIMinusDelta, t),
        tau_min,
        points,
    )
}

/// Largest `ε` allowed by the linear event-triggering condition; may be negative.
pub fn etc_linear_bound(model: &CascadeModel, env: &DecayEnvelope, tau_min: f64, points: usize) -> f64 {
    let sup = sup_bf_i_minus_delta(model, tau_min, points);
    let (big, g) = (env.big_gamma, env.gamma);
    (g * (-g * tau_min).exp() - big * sup) / ((g * tau_min).exp() * big * norm_bf(model))
}

/// `ε < [γe^{−γτ_min} − Γ sup‖BF(I − Δ_τ)‖] / [e^{γτ_min} Γ‖BF‖]`.
pub fn check_etc_linear(
    model: &CascadeModel,
    env: &DecayEnvelope,
    eps: f64,
    tau_min: f64,
    points: usize,
) -> Result<StabilityReport> {
    env.validate()?;
    nonneg("eps", eps)?;
    require(tau_min > 0.0 && tau_min.is_finite(), || {
        format!("tau_min must be positive, got {tau_min}")
    })?;
    let sup = sup_bf_i_minus_delta(model, tau_min, points);
    let nbf = norm_bf(model);
    let (big, g) = (env.big_gamma, env.gamma);
    let numerator = g * (-g * tau_min).exp() - big * sup;
    let bound = numerator / ((g * tau_min).exp() * big * nbf);
    Ok(StabilityReport::new(
        ConditionId::EventTriggeredLinear,
        vec![("Gamma", big), ("gamma", g), ("eps", eps), ("tau_min", tau_min)],
        vec![
            ("sup_bf_i_minus_delta", sup),
            ("norm_bf", nbf),
            ("numerator", numerator),
            ("eps_bound", bound),
        ],
        bound - eps,
    ))
}

/// State bound between events under dwell-time triggering, normalized by
/// `‖x(t_k)‖`: growth by Gronwall up to the dwell `τ'`, envelope decay after it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Upsilon {
    pub big_gamma: f64,
    pub gamma: f64,
    pub l: f64,
    pub c1: f64,
    pub c2: f64,
    pub dwell: f64,
    /// `εΓ‖BF‖/γ`.
    pub k: f64,
}

impl Upsilon {
    pub fn value(&self, s: f64) -> f64 {
        let gl = self.big_gamma * self.l;
        if s <= self.dwell {
            self.c1 * (self.c2 * self.l * s).exp()
        } else {
            let u = s - self.dwell;
            let a = self.c1 * self.big_gamma * (self.c2 * self.l * self.dwell).exp();
            a * ((gl - self.gamma) * u).exp() + self.k * ((gl * u).exp() - ((gl - self.gamma) * u).exp())
        }
    }

    /// `∫₀^τ e^{−γ(τ−s)} Υ(s) ds` in closed form, for `τ ≥ dwell`.
    pub fn weighted_integral(&self, tau: f64) -> f64 {
        let g = self.gamma;
        let gl = self.big_gamma * self.l;
        let head = self.c1 * (-g * tau).exp() * phi1(g + self.c2 * self.l, self.dwell);
        let d = (tau - self.dwell).max(0.0);
        let a = self.c1 * self.big_gamma * (self.c2 * self.l * self.dwell).exp();
        let tail = (-g * d).exp() * ((a - self.k) * phi1(gl, d) + self.k * phi1(gl + g, d));
        head + tail
    }

    /// The expression under the sup defining `β_e`.
    pub fn beta_term(&self, tau: f64) -> f64 {
        self.big_gamma * self.l / -(-self.gamma * tau).exp_m1() * self.weighted_integral(tau)
    }
}

/// Precomputed pieces of the perturbed event-triggering condition that do
/// not depend on `ε`.
#[derive(Debug, Clone)]
pub struct EtcPerturbedEvaluator {
    env: DecayEnvelope,
    l: f64,
    tau_min: f64,
    tau_max: f64,
    points: usize,
    norm_bf: f64,
    /// Grid on `[0, τ_min]` with running sups `c₁(τ')`, `c₂(τ')`.
    dwell_grid: Vec<(f64, f64, f64)>,
    varsigma1: f64,
}

impl EtcPerturbedEvaluator {
    pub fn new(
        model: &CascadeModel,
        env: &DecayEnvelope,
        l: f64,
        tau_min: f64,
        tau_max: f64,
        points: usize,
    ) -> Result<Self> {
        env.validate()?;
        nonneg("L", l)?;
        require(tau_min > 0.0 && tau_min < tau_max && tau_max.is_finite(), || {
            format!("need 0 < tau_min < tau_max, got tau_min = {tau_min}, tau_max = {tau_max}")
        })?;
        let nbf = norm_bf(model);
        let mut dwell_grid = Vec::with_capacity(points);
        let (mut c1, mut c2) = (0.0f64, 0.0f64);
        let mut bf = Vec::with_capacity(points);
        for t in uniform_grid(0.0, tau_min, points) {
            c1 = c1.max(truncated_norm(model, TruncatedKind::Delta, t)?.value);
            c2 = c2.max(truncated_norm(model, TruncatedKind::T, t)?.value);
            dwell_grid.push((t, c1, c2));
            bf.push(finite_rank_norm(model, FiniteRankKind::BFIMinusDelta, t));
        }
        let (big, g) = (env.big_gamma, env.gamma);
        let sup = dwell_grid
            .iter()
            .zip(&bf)
            .map(|(&(t, _, _), &b)| b + c1 * nbf * (c2 * l * t).exp_m1())
            .fold(0.0, f64::max);
        let varsigma1 = g * (-g * tau_min).exp() - big * sup;
        Ok(Self {
            env: *env,
            l,
            tau_min,
            tau_max,
            points,
            norm_bf: nbf,
            dwell_grid,
            varsigma1,
        })
    }

    pub fn c1(&self) -> f64 {
        self.dwell_grid.last().map_or(1.0, |d| d.1)
    }

    pub fn c2(&self) -> f64 {
        self.dwell_grid.last().map_or(1.0, |d| d.2)
    }

    pub fn varsigma1(&self) -> f64 {
        self.varsigma1
    }

    fn upsilon(&self, eps: f64, dwell: f64, c1: f64, c2: f64) -> Upsilon {
        Upsilon {
            big_gamma: self.env.big_gamma,
            gamma: self.env.gamma,
            l: self.l,
            c1,
            c2,
            dwell,
            k: eps * self.env.big_gamma * self.norm_bf / self.env.gamma,
        }
    }

    /// `β_e(L, ε, τ', τ_max)`.
    pub fn beta_e(&self, eps: f64, dwell: f64, c1: f64, c2: f64) -> f64 {
        if self.l == 0.0 {
            return 0.0;
        }
        let u = self.upsilon(eps, dwell, c1, c2);
        grid_sup(|t| u.beta_term(t), dwell, self.tau_max, self.points).1
    }

    /// `sup_{0<τ'≤τ_min} (β_e(τ') + εe^{γτ'}Γ‖BF‖/γ)` and the `β_e` at the maximizer.
    pub fn second_lhs(&self, eps: f64) -> (f64, f64) {
        let (big, g) = (self.env.big_gamma, self.env.gamma);
        let term = |i: usize| {
            let (t, c1, c2) = self.dwell_grid[i];
            let b = self.beta_e(eps, t, c1, c2);
            (b, b + eps * (g * t).exp() * big * self.norm_bf / g)
        };
        let mut best = (0.0, f64::NEG_INFINITY);
        for i in 1..self.dwell_grid.len() {
            let v = term(i);
            if v.1 > best.1 {
                best = v;
            }
        }
        best
    }

    pub fn report(&self, eps: f64, sigma: f64) -> Result<StabilityReport> {
        nonneg("eps", eps)?;
        require(sigma > 0.0 && sigma < self.env.gamma, || {
            format!("sigma must lie in (0, gamma), got {sigma}")
        })?;
        let (beta, lhs) = self.second_lhs(eps);
        let rhs = self.varsigma1 / self.env.gamma;
        Ok(StabilityReport::new(
            ConditionId::EventTriggeredPerturbed,
            vec![
                ("Gamma", self.env.big_gamma),
                ("gamma", self.env.gamma),
                ("L", self.l),
                ("eps", eps),
                ("tau_min", self.tau_min),
                ("tau_max", self.tau_max),
                ("sigma", sigma),
            ],
            vec![
                ("c1", self.c1()),
                ("c2", self.c2()),
                ("norm_bf", self.norm_bf),
                ("varsigma1", self.varsigma1),
                ("beta_e", beta),
                ("second_lhs", lhs),
                ("second_rhs", rhs),
            ],
            rhs - lhs,
        ))
    }
}

/// Both inequalities of the perturbed dwell-time condition. `sigma` is the
/// free decay-rate parameter in `(0, γ)`; it does not enter the inequalities.
#[allow(clippy::too_many_arguments)]
pub fn check_etc_nonlinear(
    model: &CascadeModel,
    env: &DecayEnvelope,
    l: f64,
    eps: f64,
    tau_min: f64,
    tau_max: f64,
    sigma: f64,
    points: usize,
) -> Result<StabilityReport> {
    EtcPerturbedEvaluator::new(model, env, l, tau_min, tau_max, points)?.report(eps, sigma)
}

/// Constants of the periodic event-triggering condition on `[0, h]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PetcConstants {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub norm_sf: f64,
}

impl PetcConstants {
    pub fn compute(model: &CascadeModel, h: f64, points: usize) -> Result<Self> {
        require(h > 0.0 && h.is_finite(), || format!("h must be positive, got {h}"))?;
        let norm = |kind, t| truncated_norm(model, kind, t).map(|n| n.value).unwrap_or(f64::NAN);
        let c1 = sup_on(|t| norm(TruncatedKind::Delta, t), h, points);
        let c2 = sup_on(|t| norm(TruncatedKind::T, t), h, points);
        let c3 = sup_on(|t| norm(TruncatedKind::SF, t), h, points);
        let norm_sf = truncated_norm(model, TruncatedKind::SF, h)?.value;
        if ![c1, c2, c3, norm_sf].iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("periodic event-triggering constants"));
        }
        Ok(Self { c1, c2, c3, norm_sf })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PetcVariant {
    /// `‖Δ_h^k‖ ≤ Ωω^k` with user-supplied constants.
    PowerStable {
        big_omega: f64,
        omega: f64,
        constants: PetcConstants,
    },
    /// Bounded control: everything is derived from the envelope and the model.
    Bounded(DecayEnvelope),
}

/// `Ω = Γ`, `ω = 1 − [γ − W(h)]e^{−γh}h`: power-stability constants implied
/// by the envelope when `W(h) < γ`.
pub fn bounded_power_stability(model: &CascadeModel, env: &DecayEnvelope, h: f64, points: usize) -> Result<(f64, f64)> {
    let w = w_of_h(model, env, h, points)?;
    Ok((env.big_gamma, 1.0 - (env.gamma - w) * (-env.gamma * h).exp() * h))
}

/// Periodic event-triggering condition.
pub fn check_petc(
    model: &CascadeModel,
    variant: &PetcVariant,
    l: f64,
    eps: f64,
    h: f64,
    points: usize,
) -> Result<StabilityReport> {
    nonneg("L", l)?;
    nonneg("eps", eps)?;
    require(h > 0.0 && h.is_finite(), || format!("h must be positive, got {h}"))?;
    match *variant {
        PetcVariant::PowerStable {
            big_omega,
            omega,
            constants: c,
        } => {
            require(big_omega >= 1.0, || format!("Omega must be >= 1, got {big_omega}"))?;
            require(omega > 0.0 && omega < 1.0, || {
                format!("omega must lie in (0, 1), got {omega}")
            })?;
            let growth = (c.c2 * l * h).exp_m1();
            let delta1 = eps * big_omega * (c.norm_sf + c.c3 * growth);
            let omega1 = omega + c.c1 * big_omega * growth;
            let delta2 = delta1 / (1.0 - omega1);
            Ok(StabilityReport::new(
                ConditionId::PeriodicEventPowerStable,
                vec![("Omega", big_omega), ("omega", omega), ("L", l), ("eps", eps), ("h", h)],
                vec![
                    ("c1", c.c1),
                    ("c2", c.c2),
                    ("c3", c.c3),
                    ("norm_sf", c.norm_sf),
                    ("delta1", delta1),
                    ("omega1", omega1),
                    ("delta2", delta2),
                ],
                1.0 - omega1 - delta1,
            ))
        }
        PetcVariant::Bounded(env) => {
            env.validate()?;
            let c = PetcConstants::compute(model, h, points)?;
            if c.norm_sf == 0.0 {
                return Err(Error::DegenerateFeedback { h });
            }
            let w = w_of_h(model, &env, h, points)?;
            let (big, g) = (env.big_gamma, env.gamma);
            let growth = (c.c2 * l * h).exp_m1();
            let numerator = (g - w) * (-g * h).exp() * h - c.c1 * big * growth;
            let bound = numerator / (big * (c.norm_sf + c.c3 * growth));
            let omega = 1.0 - (g - w) * (-g * h).exp() * h;
            let omega1 = omega + c.c1 * big * growth;
            let delta1 = eps * big * (c.norm_sf + c.c3 * growth);
            Ok(StabilityReport::new(
                ConditionId::PeriodicEventBounded,
                vec![("Gamma", big), ("gamma", g), ("L", l), ("eps", eps), ("h", h)],
                vec![
                    ("c1", c.c1),
                    ("c2", c.c2),
                    ("c3", c.c3),
                    ("norm_sf", c.norm_sf),
                    ("W", w),
                    ("omega", omega),
                    ("omega1", omega1),
                    ("delta1", delta1),
                    ("delta2", delta1 / (1.0 - omega1)),
                    ("eps_bound", bound),
                ],
                bound - eps,
            ))
        }
    }
}

/// `W(h) < γ` or `Γe^{γh} sup_{0≤t≤h} ‖BF(I − Δ_t)‖ < γ`. Each inequality
/// alone certifies periodic sampling, so the margin is the larger of the two.
pub fn check_periodic(model: &CascadeModel, env: &DecayEnvelope, h: f64, points: usize) -> Result<StabilityReport> {
    env.validate()?;
    require(h > 0.0 && h.is_finite(), || format!("h must be positive, got {h}"))?;
    let w = w_of_h(model, env, h, points)?;
    let sup = sup_bf_i_minus_delta(model, h, points);
    let second = env.big_gamma * (env.gamma * h).exp() * sup;
    let m1 = env.gamma - w;
    let m2 = env.gamma - second;
    Ok(StabilityReport::new(
        ConditionId::Periodic,
        vec![("Gamma", env.big_gamma), ("gamma", env.gamma), ("h", h)],
        vec![
            ("W", w),
            ("margin_w", m1),
            ("sup_bf_i_minus_delta", sup),
            ("sampled_gain", second),
            ("margin_sampled_gain", m2),
        ],
        m1.max(m2),
    ))
}

/// `inf{τ ≥ 0 : ‖F(I − Δ_τ)‖ + L ∫₀^τ ‖FT(τ − s)‖η(s) ds ≥ ε}`, a lower bound
/// on every self-triggered inter-event time.
pub fn theta_bound(model: &CascadeModel, env: &DecayEnvelope, l: f64, eps: f64) -> Result<f64> {
    env.validate()?;
    nonneg("L", l)?;
    require(eps > 0.0 && eps.is_finite(), || {
        format!("eps must be positive, got {eps}")
    })?;
    const HORIZON: f64 = 10.0;
    let lhs = |tau: f64| {
        finite_rank_norm(model, FiniteRankKind::FIMinusDelta, tau)
            + if l == 0.0 {
                0.0
            } else {
                l * alpha_integral(model, env, l, eps, tau)
            }
    };
    let mut lo = 0.0;
    let mut hi = 1e-6;
    while lhs(hi) < eps {
        lo = hi;
        if hi >= HORIZON {
            return Err(Error::NoCrossing { horizon: HORIZON });
        }
        hi = (2.0 * hi).min(HORIZON);
    }
    let (_, hi) = bisect_bracket(|t| lhs(t) < eps, lo, hi, 1e-8);
    Ok(hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrontierTarget {
    /// Largest `ε` versus `τ_min` for dwell-time event triggering.
    EpsVsTauMin,
    /// Largest `τ_max` versus `ε` for self-triggering.
    MaxTauMaxStm,
    /// Largest `h` with `W(h) < γ` versus `γ`.
    MaxHPeriodic,
    /// Largest `ε` versus `h` for periodic event triggering (bounded control).
    EpsVsHPetc,
}

impl FrontierTarget {
    pub fn abscissa_name(&self) -> &'static str {
        match self {
            FrontierTarget::EpsVsTauMin => "tau_min",
            FrontierTarget::MaxTauMaxStm => "eps",
            FrontierTarget::MaxHPeriodic => "gamma",
            FrontierTarget::EpsVsHPetc => "h",
        }
    }

    pub fn bound_name(&self) -> &'static str {
        match self {
            FrontierTarget::EpsVsTauMin | FrontierTarget::EpsVsHPetc => "eps",
            FrontierTarget::MaxTauMaxStm => "tau_max",
            FrontierTarget::MaxHPeriodic => "h",
        }
    }
}

/// Parameters held fixed along a frontier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrontierFixed {
    pub l: f64,
    /// Used by the self-triggered target only as a fallback; its abscissa is `ε`.
    pub tau_max: f64,
    pub points: usize,
    pub tol: f64,
}

impl Default for FrontierFixed {
    fn default() -> Self {
        Self {
            l: 0.0,
            tau_max: 0.5,
            points: DEFAULT_GRID_POINTS,
            tol: 1e-6,
        }
    }
}

/// One row of a frontier: the feasible parameter lies below `bound`, the
/// infeasible one above `upper` (equal when the bound is explicit).
/// `bound` is `None` when no nonnegative parameter is feasible.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrontierPoint {
    pub abscissa: f64,
    pub bound: Option<f64>,
    pub upper: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrontierTable {
    pub target: FrontierTarget,
    pub points: Vec<FrontierPoint>,
    /// Bounds are nonincreasing in the abscissa.
    pub monotone: bool,
}

/// Largest `ε` for the perturbed dwell-time condition, by bisection.
fn etc_perturbed_eps(
    model: &CascadeModel,
    env: &DecayEnvelope,
    fixed: &FrontierFixed,
    tau_min: f64,
) -> Result<FrontierPoint> {
    let ev = EtcPerturbedEvaluator::new(model, env, fixed.l, tau_min, fixed.tau_max, fixed.points)?;
    let ok = |eps: f64| ev.second_lhs(eps).1 < ev.varsigma1() / env.gamma;
    if !ok(0.0) {
        return Ok(FrontierPoint {
            abscissa: tau_min,
            bound: None,
            upper: None,
        });
    }
    let mut hi = 1e-3;
    while ok(hi) {
        hi *= 2.0;
    }
    let (lo, hi) = bisect_bracket(ok, 0.0, hi, fixed.tol);
    Ok(FrontierPoint {
        abscissa: tau_min,
        bound: Some(lo),
        upper: Some(hi),
    })
}

/// Largest `τ_max` accepted by [`check_stm`] for a given `ε`.
fn stm_tau_max(env: &DecayEnvelope, norm_b: f64, l: f64, eps: f64, tol: f64) -> Result<FrontierPoint> {
    let ok = |t: f64| check_stm(env, norm_b, l, eps, t).map(|r| r.satisfied).unwrap_or(false);
    let point = |bound, upper| FrontierPoint {
        abscissa: eps,
        bound,
        upper,
    };
    let mut lo = tol;
    if !ok(lo) {
        return Ok(point(None, None));
    }
    let mut hi = 2.0 * lo;
    while ok(hi) {
        lo = hi;
        hi *= 2.0;
        if hi > 1e6 {
            return Ok(point(Some(f64::INFINITY), None));
        }
    }
    let (lo, hi) = bisect_bracket(ok, lo, hi, tol);
    Ok(point(Some(lo), Some(hi)))
}

/// Largest `h` with `W(h) < γ`.
fn periodic_h(model: &CascadeModel, env: &DecayEnvelope, points: usize, tol: f64) -> Result<FrontierPoint> {
    let ok = |h: f64| w_of_h(model, env, h, points).map(|w| w < env.gamma).unwrap_or(false);
    let point = |bound, upper| FrontierPoint {
        abscissa: env.gamma,
        bound,
        upper,
    };
    let mut lo = tol;
    if !ok(lo) {
        return Ok(point(None, None));
    }
    let mut hi = 2.0 * lo;
    while ok(hi) {
        lo = hi;
        hi *= 2.0;
        if hi > 1e3 {
            return Ok(point(Some(f64::INFINITY), None));
        }
    }
    let (lo, hi) = bisect_bracket(ok, lo, hi, tol);
    Ok(point(Some(lo), Some(hi)))
}

fn frontier_point(
    model: &CascadeModel,
    env: &DecayEnvelope,
    target: FrontierTarget,
    fixed: &FrontierFixed,
    x: f64,
) -> Result<FrontierPoint> {
    let explicit = |bound: f64| FrontierPoint {
        abscissa: x,
        bound: (bound >= 0.0).then_some(bound),
        upper: (bound >= 0.0).then_some(bound),
    };
    match target {
        FrontierTarget::EpsVsTauMin => {
            if fixed.l == 0.0 {
                Ok(explicit(etc_linear_bound(model, env, x, fixed.points)))
            } else {
                etc_perturbed_eps(model, env, fixed, x)
            }
        }
        FrontierTarget::MaxTauMaxStm => stm_tau_max(env, norm_b(model), fixed.l, x, fixed.tol),
        FrontierTarget::MaxHPeriodic => {
            let env = if x == env.gamma {
                *env
            } else {
                gamma_estimate(model, x, &EnvelopeGrid::default())?
            };
            periodic_h(model, &env, fixed.points, fixed.tol)
        }
        FrontierTarget::EpsVsHPetc => {
            let r = check_petc(model, &PetcVariant::Bounded(*env), fixed.l, 0.0, x, fixed.points)?;
            Ok(explicit(r.get("eps_bound").unwrap_or(f64::NAN)))
        }
    }
}

/// Feasibility frontier of `target` over the given abscissae.
pub fn frontier(
    model: &CascadeModel,
    env: &DecayEnvelope,
    target: FrontierTarget,
    fixed: &FrontierFixed,
    abscissae: &[f64],
) -> Result<FrontierTable> {
    env.validate()?;
    if abscissae.is_empty() {
        return Err(Error::InvalidArgument("frontier needs at least one abscissa".into()));
    }
    require(fixed.tol > 0.0, || "frontier tolerance must be positive".into())?;
    #[cfg(feature = "parallel")]
    let points: Vec<Result<FrontierPoint>> = {
        use rayon::prelude::*;
        abscissae
            .par_iter()
            .map(|&x| frontier_point(model, env, target, fixed, x))
            .collect()
    };
    #[cfg(not(feature = "parallel"))]
    let points: Vec<Result<FrontierPoint>> = abscissae
        .iter()
        .map(|&x| frontier_point(model, env, target, fixed, x))
        .collect();
    let points = points.into_iter().collect::<Result<Vec<_>>>()?;
    if points.iter().all(|p| p.bound.is_none()) {
        return Err(Error::EmptyFrontier);
    }
    let mut order: Vec<&FrontierPoint> = points.iter().collect();
    order.sort_by(|a, b| a.abscissa.total_cmp(&b.abscissa));
    let bound = |p: &FrontierPoint| p.bound.unwrap_or(f64::NEG_INFINITY);
    let monotone = order.windows(2).all(|w| bound(w[1]) <= bound(w[0]));
    Ok(FrontierTable {
        target,
        points,
        monotone,
    })
}

/// Right singular vector of `F(I − Δ_τ)` for its largest singular value: the
/// core direction `(a₀, x2)` that reaches the triggering threshold first.
pub fn worst_case_direction(model: &CascadeModel, tau: f64) -> nalgebra::DVector<f64> {
    let m = finite_rank_matrix(model, FiniteRankKind::FIMinusDelta, tau);
    let gram = m.transpose() * &m;
    let eig = nalgebra::SymmetricEigen::new(gram);
    let i = eig.eigenvalues.imax();
    eig.eigenvectors.column(i).into_owned()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::adaptive_simpson;
    use crate::spectral_model::CascadeParams;
    use approx::assert_relative_eq;

    fn env() -> DecayEnvelope {
        DecayEnvelope::new(1.0, 1.92).unwrap()
    }

    #[test]
    fn varpi_examples() {
        let e = env();
        assert_eq!(varpi(&e, 1.0, 0.0, 0.3, 0.5).unwrap(), 0.0);
        let l = 5f64.sqrt() * 0.1;
        assert_relative_eq!(varpi(&e, 1.0, l, 0.29, 0.5).unwrap(), 0.4327, epsilon = 1e-4);
        let l = 5f64.sqrt() * 0.05;
        assert_relative_eq!(varpi(&e, 1.0, l, 0.40, 0.5).unwrap(), 0.2153, epsilon = 1e-4);
        assert!(varpi(&e, 1.0, l, 0.4, 0.0).is_err());
    }

    #[test]
    fn stm_examples() {
        let e = env();
        let s5 = 5f64.sqrt();
        assert!(check_stm(&e, 1.0, s5 * 0.1, 0.29, 0.5).unwrap().satisfied);
        assert!(check_stm(&e, 1.0, s5 * 0.05, 0.40, 0.5).unwrap().satisfied);
        let r = check_stm(&e, 1.0, s5 * 0.1, 0.29, 1.0).unwrap();
        assert!(!r.satisfied && r.margin <= 0.0);
    }

    #[test]
    fn upsilon_integral_matches_quadrature() {
        let u = Upsilon {
            big_gamma: 1.92,
            gamma: 1.0,
            l: 0.3,
            c1: 1.4,
            c2: 1.1,
            dwell: 0.01,
            k: 0.2,
        };
        for &tau in &[0.01, 0.05, 0.5, 2.0] {
            let q = adaptive_simpson(|s| (-(tau - s)).exp() * u.value(s), 0.0, u.dwell, 1e-12)
                + adaptive_simpson(|s| (-(tau - s)).exp() * u.value(s), u.dwell, tau, 1e-12);
            assert_relative_eq!(u.weighted_integral(tau), q, max_relative = 1e-10);
        }
    }

    #[test]
    fn etc_linear_examples() {
        let m1 = CascadeParams::example().build().unwrap();
        assert!(check_etc_linear(&m1, &env(), 0.07, 0.001, 2001).unwrap().satisfied);
        let m2 = CascadeParams::example().with_g(2.0).build().unwrap();
        let e2 = DecayEnvelope::new(1.0, 2.101).unwrap();
        assert!(check_etc_linear(&m2, &e2, 0.07, 0.001, 2001).unwrap().satisfied);
        let r = check_etc_linear(&m1, &env(), 0.0, 1e-9, 11).unwrap();
        assert_relative_eq!(
            r.get("eps_bound").unwrap(),
            1.0 / (1.92 * 41f64.sqrt()),
            max_relative = 1e-6
        );
    }

    #[test]
    fn theta_doubles_with_eps() {
        let m = CascadeParams::example().build().unwrap();
        let l = 5f64.sqrt() * 0.05;
        let a = theta_bound(&m, &env(), l, 0.2).unwrap();
        let b = theta_bound(&m, &env(), l, 0.4).unwrap();
        assert!(b > a);
    }

    #[test]
    fn report_display_lists_everything() {
        let r = check_stm(&env(), 1.0, 0.2, 0.29, 0.5).unwrap();
        let s = r.to_string();
        assert!(s.starts_with("condition = self_triggered\nsatisfied = true\n"));
        assert!(s.contains("value.varpi_s = "));
    }
}
