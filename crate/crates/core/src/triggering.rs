//! Transmission rules: self-triggered next-time prediction and the two
//! event predicates.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::numerics::bisect_bracket;
use crate::operator_calculus::{alpha_integral, DecayEnvelope, ReducedMaps};
use crate::spectral_model::{CascadeModel, SpectralState};

/// Coarse steps used to bracket the first crossing of `α`.
pub const DEFAULT_MARCH_STEPS: usize = 1000;

/// Bracket width at which the crossing search stops.
pub const CROSSING_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TriggerPolicy {
    /// Next time from `α_{L,ε}` and the last transmitted state.
    SelfTriggered {
        eps: f64,
        tau_max: f64,
        l: f64,
    },
    /// Continuous monitoring of `‖x(t_k) − x(t)‖ > ε‖x(t_k)‖` after a dwell `τ_min`.
    EventTriggered {
        eps: f64,
        tau_min: f64,
        tau_max: f64,
    },
    /// The same predicate checked at multiples of `h`, forced after `ℓ_max` periods.
    PeriodicEvent {
        eps: f64,
        h: f64,
        l_max: u32,
    },
    Periodic {
        h: f64,
    },
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidArgument(msg()))
    }
}

fn positive(v: f64) -> bool {
    v > 0.0 && v.is_finite()
}

impl TriggerPolicy {
    pub fn validate(&self) -> Result<()> {
        match *self {
            TriggerPolicy::SelfTriggered { eps, tau_max, l } => {
                check(positive(eps), || format!("eps must be > 0, got {eps}"))?;
                check(positive(tau_max), || format!("tau_max must be > 0, got {tau_max}"))?;
                check(l >= 0.0 && l.is_finite(), || format!("L must be >= 0, got {l}"))
            }
            TriggerPolicy::EventTriggered { eps, tau_min, tau_max } => {
                check(eps >= 0.0 && eps.is_finite(), || format!("eps must be >= 0, got {eps}"))?;
                check(positive(tau_min), || format!("tau_min must be > 0, got {tau_min}"))?;
                check(tau_max.is_finite() && tau_max > tau_min, || {
                    format!("tau_min < tau_max required, got tau_min = {tau_min}, tau_max = {tau_max}")
                })
            }
            TriggerPolicy::PeriodicEvent { eps, h, l_max } => {
                check(eps >= 0.0 && eps.is_finite(), || format!("eps must be >= 0, got {eps}"))?;
                check(positive(h), || format!("h must be > 0, got {h}"))?;
                check(l_max >= 1, || "l_max must be >= 1".to_string())
            }
            TriggerPolicy::Periodic { h } => check(positive(h), || format!("h must be > 0, got {h}")),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            TriggerPolicy::SelfTriggered { .. } => "self_triggered",
            TriggerPolicy::EventTriggered { .. } => "event_triggered",
            TriggerPolicy::PeriodicEvent { .. } => "periodic_event",
            TriggerPolicy::Periodic { .. } => "periodic",
        }
    }

    /// `ε`, or `None` for plain periodic sampling.
    pub fn eps(&self) -> Option<f64> {
        match *self {
            TriggerPolicy::SelfTriggered { eps, .. }
            | TriggerPolicy::EventTriggered { eps, .. }
            | TriggerPolicy::PeriodicEvent { eps, .. } => Some(eps),
            TriggerPolicy::Periodic { .. } => None,
        }
    }

    /// Longest admissible gap between two transmissions.
    pub fn max_interval(&self) -> f64 {
        match *self {
            TriggerPolicy::SelfTriggered { tau_max, .. } | TriggerPolicy::EventTriggered { tau_max, .. } => tau_max,
            TriggerPolicy::PeriodicEvent { h, l_max, .. } => h * l_max as f64,
            TriggerPolicy::Periodic { h } => h,
        }
    }
}

/// `‖x(t_k) − x(t)‖ > ε‖x(t_k)‖`. Always false for the self-triggered and
/// periodic policies, which never test the state.
pub fn trigger_fired(policy: &TriggerPolicy, x_tk: &SpectralState, x_now: &SpectralState, _elapsed: f64) -> bool {
    match *policy {
        TriggerPolicy::EventTriggered { eps, .. } | TriggerPolicy::PeriodicEvent { eps, .. } => {
            (x_tk - x_now).norm() > eps * x_tk.norm()
        }
        _ => false,
    }
}

/// Precomputed `α_{L,ε}(·, τ)` on a uniform grid of `(0, τ_max]`.
///
/// `α(ξ, τ) = ‖M(τ)ξ_core‖ + L I(τ)‖ξ‖`; both `M(τ)` and `I(τ)` are
/// independent of `ξ`, so one table serves every transmission.
#[derive(Debug, Clone)]
pub struct StmPredictor<'a> {
    model: &'a CascadeModel,
    env: DecayEnvelope,
    eps: f64,
    tau_max: f64,
    l: f64,
    taus: Vec<f64>,
    maps: Vec<DMatrix<f64>>,
    integrals: Vec<f64>,
}

impl<'a> StmPredictor<'a> {
    pub fn new(model: &'a CascadeModel, env: &DecayEnvelope, policy: &TriggerPolicy) -> Result<Self> {
        Self::with_steps(model, env, policy, DEFAULT_MARCH_STEPS)
    }

    pub fn with_steps(
        model: &'a CascadeModel,
        env: &DecayEnvelope,
        policy: &TriggerPolicy,
        steps: usize,
    ) -> Result<Self> {
        policy.validate()?;
        env.validate()?;
        let TriggerPolicy::SelfTriggered { eps, tau_max, l } = *policy else {
            return Err(Error::InvalidArgument(format!(
                "self-triggered policy required, got {}",
                policy.kind()
            )));
        };
        check(steps >= 1, || "march steps must be >= 1".to_string())?;
        let taus: Vec<f64> = (1..=steps)
            .map(|j| {
                if j == steps {
                    tau_max
                } else {
                    tau_max * j as f64 / steps as f64
                }
            })
            .collect();
        let maps = taus
            .iter()
            .map(|&t| ReducedMaps::new(model, t).f_i_minus_delta(model))
            .collect();
        let integrals = if l == 0.0 {
            vec![0.0; steps]
        } else {
            taus.iter().map(|&t| alpha_integral(model, env, l, eps, t)).collect()
        };
        Ok(Self {
            model,
            env: *env,
            eps,
            tau_max,
            l,
            taus,
            maps,
            integrals,
        })
    }

    pub fn tau_max(&self) -> f64 {
        self.tau_max
    }

    /// `α(ξ, τ)` at an arbitrary `τ`.
    pub fn alpha_at(&self, xi: &SpectralState, tau: f64) -> f64 {
        let direct = (ReducedMaps::new(self.model, tau).f_i_minus_delta(self.model) * xi.core()).norm();
        if self.l == 0.0 {
            direct
        } else {
            direct + self.l * alpha_integral(self.model, &self.env, self.l, self.eps, tau) * xi.norm()
        }
    }

    /// `min{τ_max, inf{τ > 0 : α(ξ, τ) ≥ ε‖ξ‖}}`. The returned time is the
    /// lower end of the final bracket, so `α < ε‖ξ‖` holds on the whole interval.
    pub fn next_interval(&self, xi: &SpectralState) -> f64 {
        let nx = xi.norm();
        if nx == 0.0 || !nx.is_finite() {
            return self.tau_max;
        }
        let thr = self.eps * nx;
        let core = xi.core();
        let crossing =
            (0..self.taus.len()).find(|&j| (&self.maps[j] * &core).norm() + self.l * self.integrals[j] * nx >= thr);
        let Some(j) = crossing else {
            return self.tau_max;
        };
        let lo = if j == 0 { 0.0 } else { self.taus[j - 1] };
        let (lo, _) = bisect_bracket(|t| self.alpha_at(xi, t) < thr, lo, self.taus[j], CROSSING_TOL);
        lo
    }
}

/// Next self-triggered interval for the transmitted state `x_tk`.
pub fn stm_next_interval(
    model: &CascadeModel,
    env: &DecayEnvelope,
    policy: &TriggerPolicy,
    x_tk: &SpectralState,
) -> Result<f64> {
    model.check_state(x_tk)?;
    if !x_tk.is_finite() {
        return Err(Error::NonFinite("x_tk"));
    }
    Ok(StmPredictor::new(model, env, policy)?.next_interval(x_tk))
}
