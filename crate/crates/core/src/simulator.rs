//! Closed-loop simulation under a transmission policy.
//!
//! Between transmissions the input is held, so the linear part is propagated
//! exactly by the modal semigroup. Substeps exist only for the perturbation,
//! which is handled by a two-stage exponential integrator.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::operator_calculus::DecayEnvelope;
use crate::spectral_model::{feedback_apply, perturbation, CascadeModel, Propagator, SpectralState};
use crate::triggering::{trigger_fired, StmPredictor, TriggerPolicy};

/// State norm beyond which a run is declared divergent.
pub const DIVERGENCE_NORM: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub dt: f64,
    /// Width of the bisection bracket around an event-triggered crossing.
    pub event_tol: f64,
    pub t_end: f64,
}

impl IntegratorConfig {
    pub fn new(t_end: f64) -> Self {
        Self {
            dt: 1e-4,
            event_tol: 1e-9,
            t_end,
        }
    }

    pub fn validate(&self, policy: &TriggerPolicy) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be > 0, got {}", self.dt));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return bad(format!("t_end must be > 0, got {}", self.t_end));
        }
        if !(self.event_tol > 0.0 && self.event_tol < self.dt) {
            return bad(format!("event_tol must lie in (0, dt), got {}", self.event_tol));
        }
        let (name, limit) = match *policy {
            TriggerPolicy::EventTriggered { tau_min, .. } => ("tau_min", tau_min),
            TriggerPolicy::PeriodicEvent { h, .. } | TriggerPolicy::Periodic { h } => ("h", h),
            TriggerPolicy::SelfTriggered { tau_max, .. } => ("tau_max", tau_max),
        };
        if self.dt > limit {
            return bad(format!("dt = {} exceeds {name} = {limit}", self.dt));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationTrace {
    pub policy: TriggerPolicy,
    pub event_tol: f64,
    pub sample_times: Vec<f64>,
    pub state_norms: Vec<f64>,
    /// Input held from each sample onwards; at an event this is the new input.
    pub inputs: Vec<DVector<f64>>,
    pub is_event: Vec<bool>,
    /// `‖Fx(t_k) − Fx(t)‖` against the transmission in force just before the sample.
    pub input_errors: Vec<f64>,
    /// `‖x(t_k) − x(t)‖`, same convention.
    pub deviations: Vec<f64>,
    /// `‖x(t_k)‖` of the transmission in force just before the sample.
    pub reference_norms: Vec<f64>,
    pub event_times: Vec<f64>,
    pub inter_event_times: Vec<f64>,
    pub final_state: SpectralState,
}

impl SimulationTrace {
    pub fn len(&self) -> usize {
        self.sample_times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sample_times.is_empty()
    }

    pub fn event_count(&self) -> usize {
        self.event_times.len()
    }
}

/// `(0, Hu)`: the held input enters the ODE only.
fn input_forcing(model: &CascadeModel, u: &DVector<f64>) -> SpectralState {
    let mut v = model.zero_state();
    v.x2 = model.h() * u;
    v
}

fn step_with(
    model: &CascadeModel,
    prop: &Propagator,
    state: &SpectralState,
    bu: &SpectralState,
) -> Result<SpectralState> {
    if model.nonlinearity().is_linear() {
        return Ok(prop.propagate(state, bu));
    }
    let pred = prop.propagate(state, &(bu + &perturbation(model, state)?));
    let mid = &(state + &pred) * 0.5;
    Ok(prop.propagate(state, &(bu + &perturbation(model, &mid)?)))
}

/// One substep of the mild solution with the input held at `held_u`. Exact for
/// the linear part; the perturbation is evaluated at the midpoint of an
/// exponential-Euler predictor.
pub fn step(model: &CascadeModel, state: &SpectralState, held_u: &DVector<f64>, dt: f64) -> Result<SpectralState> {
    model.check_state(state)?;
    if held_u.len() != model.m() {
        return Err(Error::InvalidArgument(format!(
            "input has {} entries, model has m = {}",
            held_u.len(),
            model.m()
        )));
    }
    if dt.is_nan() || dt <= 0.0 {
        return Err(Error::InvalidArgument(format!("dt must be > 0, got {dt}")));
    }
    if !state.is_finite() {
        return Err(Error::NonFinite("state"));
    }
    if held_u.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("input"));
    }
    let prop = Propagator::new(model, dt)?;
    step_with(model, &prop, state, &input_forcing(model, held_u))
}

struct Recorder {
    trace: SimulationTrace,
    x_tk: SpectralState,
    u: DVector<f64>,
    fx_tk: DVector<f64>,
    t_k: f64,
}

impl Recorder {
    fn sample(&mut self, model: &CascadeModel, t: f64, x: &SpectralState) -> Result<()> {
        let n = x.norm();
        if !n.is_finite() || n > DIVERGENCE_NORM {
            return Err(Error::DivergenceDetected { t, norm: n });
        }
        let tr = &mut self.trace;
        tr.sample_times.push(t);
        tr.state_norms.push(n);
        tr.inputs.push(self.u.clone());
        tr.is_event.push(false);
        tr.input_errors.push((&self.fx_tk - feedback_apply(model, x)).norm());
        tr.deviations.push((&self.x_tk - x).norm());
        tr.reference_norms.push(self.x_tk.norm());
        Ok(())
    }

    /// Marks the last sample as a transmission of `x`.
    fn transmit(&mut self, model: &CascadeModel, t: f64, interval: Option<f64>, x: &SpectralState) {
        self.x_tk = x.clone();
        self.fx_tk = feedback_apply(model, x);
        self.u = self.fx_tk.clone();
        self.t_k = t;
        let tr = &mut self.trace;
        *tr.inputs.last_mut().unwrap() = self.u.clone();
        *tr.is_event.last_mut().unwrap() = true;
        tr.event_times.push(t);
        if let Some(tau) = interval {
            tr.inter_event_times.push(tau);
        }
    }
}

/// Propagators for substeps of one length, rebuilt only when the length changes.
struct PropagatorCache {
    dt: f64,
    prop: Option<Propagator>,
}

impl PropagatorCache {
    fn get(&mut self, model: &CascadeModel, dt: f64) -> Result<&Propagator> {
        if self.prop.is_none() || self.dt != dt {
            self.prop = Some(Propagator::new(model, dt)?);
            self.dt = dt;
        }
        Ok(self.prop.as_ref().unwrap())
    }
}

/// Integrates an interval of length `len` ending at time `t1` in
/// `ceil(len/dt)` equal substeps, recording every substep end.
#[allow(clippy::too_many_arguments)]
fn integrate_interval(
    model: &CascadeModel,
    cache: &mut PropagatorCache,
    rec: &mut Recorder,
    x: &SpectralState,
    t0: f64,
    len: f64,
    t1: f64,
    dt: f64,
) -> Result<SpectralState> {
    let n = (len / dt).ceil().max(1.0) as usize;
    let h = len / n as f64;
    let bu = input_forcing(model, &rec.u);
    let mut x = x.clone();
    for j in 1..=n {
        let prop = cache.get(model, h)?;
        x = step_with(model, prop, &x, &bu)?;
        let t = if j == n { t1 } else { t0 + h * j as f64 };
        rec.sample(model, t, &x)?;
    }
    Ok(x)
}

/// True when `t` is within rounding of the end of the horizon or before it.
fn within(t: f64, t_end: f64) -> bool {
    t <= t_end + 1e-12 * t_end.max(1.0)
}

/// Simulates the closed loop on `[0, t_end]` starting with a transmission at 0.
pub fn run(
    model: &CascadeModel,
    env: &DecayEnvelope,
    policy: &TriggerPolicy,
    x0: &SpectralState,
    cfg: &IntegratorConfig,
) -> Result<SimulationTrace> {
    policy.validate()?;
    cfg.validate(policy)?;
    model.check_state(x0)?;
    if !x0.is_finite() {
        return Err(Error::NonFinite("x0"));
    }
    let predictor = match policy {
        TriggerPolicy::SelfTriggered { .. } => Some(StmPredictor::new(model, env, policy)?),
        _ => None,
    };
    let fx0 = feedback_apply(model, x0);
    let mut rec = Recorder {
        trace: SimulationTrace {
            policy: *policy,
            event_tol: cfg.event_tol,
            sample_times: vec![],
            state_norms: vec![],
            inputs: vec![],
            is_event: vec![],
            input_errors: vec![],
            deviations: vec![],
            reference_norms: vec![],
            event_times: vec![],
            inter_event_times: vec![],
            final_state: x0.clone(),
        },
        x_tk: x0.clone(),
        u: fx0.clone(),
        fx_tk: fx0,
        t_k: 0.0,
    };
    rec.sample(model, 0.0, x0)?;
    rec.transmit(model, 0.0, None, x0);

    let mut cache = PropagatorCache { dt: 0.0, prop: None };
    let mut x = x0.clone();
    let t_end = cfg.t_end;
    // Periodic schedules count whole periods so that event times stay exact multiples of h.
    let mut periods: u64 = 0;
    while rec.t_k < t_end && !within(t_end, rec.t_k) {
        let t_k = rec.t_k;
        // `Some(τ)` when the interval ends in a transmission.
        let (next, tau) = match *policy {
            TriggerPolicy::SelfTriggered { .. } => {
                let tau = predictor.as_ref().unwrap().next_interval(&rec.x_tk);
                if tau <= 0.0 {
                    return Err(Error::Numerical(format!(
                        "self-triggered interval collapsed at t = {t_k}"
                    )));
                }
                if within(t_k + tau, t_end) {
                    let next = integrate_interval(model, &mut cache, &mut rec, &x, t_k, tau, t_k + tau, cfg.dt)?;
                    (next, Some(tau))
                } else {
                    let next = integrate_interval(model, &mut cache, &mut rec, &x, t_k, t_end - t_k, t_end, cfg.dt)?;
                    (next, None)
                }
            }
            TriggerPolicy::Periodic { h } => {
                let t1 = h * (periods + 1) as f64;
                if within(t1, t_end) {
                    periods += 1;
                    (
                        integrate_interval(model, &mut cache, &mut rec, &x, t_k, h, t1, cfg.dt)?,
                        Some(h),
                    )
                } else {
                    (
                        integrate_interval(model, &mut cache, &mut rec, &x, t_k, t_end - t_k, t_end, cfg.dt)?,
                        None,
                    )
                }
            }
            TriggerPolicy::PeriodicEvent { h, l_max, .. } => {
                let mut y = x.clone();
                let mut fired = None;
                for j in 1..=l_max {
                    let start = h * periods as f64;
                    let t1 = h * (periods + 1) as f64;
                    if !within(t1, t_end) {
                        if !within(t_end, start) {
                            y = integrate_interval(
                                model,
                                &mut cache,
                                &mut rec,
                                &y,
                                start,
                                t_end - start,
                                t_end,
                                cfg.dt,
                            )?;
                        }
                        break;
                    }
                    y = integrate_interval(model, &mut cache, &mut rec, &y, start, h, t1, cfg.dt)?;
                    periods += 1;
                    let elapsed = h * j as f64;
                    if j == l_max || trigger_fired(policy, &rec.x_tk, &y, elapsed) {
                        fired = Some(elapsed);
                        break;
                    }
                }
                (y, fired)
            }
            TriggerPolicy::EventTriggered { tau_min, tau_max, .. } => event_triggered_interval(
                model, &mut cache, &mut rec, policy, &x, t_k, tau_min, tau_max, t_end, cfg,
            )?,
        };
        x = next;
        match tau {
            Some(tau) => {
                let t = *rec.trace.sample_times.last().unwrap();
                rec.transmit(model, t, Some(tau), &x);
            }
            None => break,
        }
    }
    rec.trace.final_state = x;
    Ok(rec.trace)
}

/// Dwell, then check the predicate after every substep; a flip inside a
/// substep is localised by bisection and recorded as its own sample.
#[allow(clippy::too_many_arguments)]
fn event_triggered_interval(
    model: &CascadeModel,
    cache: &mut PropagatorCache,
    rec: &mut Recorder,
    policy: &TriggerPolicy,
    x: &SpectralState,
    t_k: f64,
    tau_min: f64,
    tau_max: f64,
    t_end: f64,
    cfg: &IntegratorConfig,
) -> Result<(SpectralState, Option<f64>)> {
    if !within(t_k + tau_min, t_end) {
        let y = integrate_interval(model, cache, rec, x, t_k, t_end - t_k, t_end, cfg.dt)?;
        return Ok((y, None));
    }
    let mut y = integrate_interval(model, cache, rec, x, t_k, tau_min, t_k + tau_min, cfg.dt)?;
    if trigger_fired(policy, &rec.x_tk, &y, tau_min) {
        return Ok((y, Some(tau_min)));
    }
    let span = tau_max - tau_min;
    let n = (span / cfg.dt).ceil().max(1.0) as usize;
    let h = span / n as f64;
    let bu = input_forcing(model, &rec.u);
    let mut elapsed = tau_min;
    for j in 1..=n {
        let next_elapsed = if j == n { tau_max } else { tau_min + h * j as f64 };
        if !within(t_k + next_elapsed, t_end) {
            let len = t_end - (t_k + elapsed);
            if len > 0.0 {
                y = step_with(model, &Propagator::new(model, len)?, &y, &bu)?;
                rec.sample(model, t_end, &y)?;
            }
            return Ok((y, None));
        }
        let len = next_elapsed - elapsed;
        let z = step_with(model, cache.get(model, len)?, &y, &bu)?;
        if j == n {
            rec.sample(model, t_k + tau_max, &z)?;
            return Ok((z, Some(tau_max)));
        }
        if trigger_fired(policy, &rec.x_tk, &z, next_elapsed) {
            let (mut lo, mut hi) = (0.0, len);
            let mut at_hi = z;
            while hi - lo > cfg.event_tol {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                let w = step_with(model, &Propagator::new(model, mid)?, &y, &bu)?;
                if trigger_fired(policy, &rec.x_tk, &w, elapsed + mid) {
                    hi = mid;
                    at_hi = w;
                } else {
                    lo = mid;
                }
            }
            let tau = elapsed + hi;
            rec.sample(model, t_k + tau, &at_hi)?;
            return Ok((at_hi, Some(tau)));
        }
        rec.sample(model, t_k + next_elapsed, &z)?;
        y = z;
        elapsed = next_elapsed;
    }
    unreachable!("the last substep always lands on tau_max")
}

/// Least-squares fit of `log‖x(t)‖ ≈ log Γ − γt` over samples with `t ≥ t_start`.
/// Returns `(Γ_fit, γ_fit)`.
pub fn decay_fit(trace: &SimulationTrace, t_start: f64) -> Result<(f64, f64)> {
    if !(t_start >= 0.0 && t_start.is_finite()) {
        return Err(Error::InvalidArgument(format!("t_start must be >= 0, got {t_start}")));
    }
    let pts: Vec<(f64, f64)> = trace
        .sample_times
        .iter()
        .zip(&trace.state_norms)
        .filter(|(&t, &n)| t >= t_start && n > f64::MIN_POSITIVE)
        .map(|(&t, &n)| (t, n.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::AllZeroTail);
    }
    let k = pts.len() as f64;
    let tm = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let ym = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let (sxy, sxx) = pts.iter().fold((0.0, 0.0), |(sxy, sxx), &(t, y)| {
        (sxy + (t - tm) * (y - ym), sxx + (t - tm) * (t - tm))
    });
    if sxx == 0.0 {
        return Err(Error::InvalidArgument(
            "decay fit needs at least two distinct times".into(),
        ));
    }
    let slope = sxy / sxx;
    let intercept = ym - slope * tm;
    Ok((intercept.exp(), -slope))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral_model::{CascadeParams, NonlinearitySpec};
    use approx::assert_abs_diff_eq;

    fn env() -> DecayEnvelope {
        DecayEnvelope::new(1.0, 1.92).unwrap()
    }

    #[test]
    fn step_without_perturbation_is_delta() {
        let model = CascadeParams::example().with_modes(20).build().unwrap();
        let x = model.example_initial_state();
        let u = feedback_apply(&model, &x);
        let y = step(&model, &x, &u, 0.01).unwrap();
        let prop = Propagator::new(&model, 0.01).unwrap();
        let expect = &prop.apply(&x) + &prop.integrate(&input_forcing(&model, &u));
        assert!((&y - &expect).norm() < 1e-14);
        let z = step(&model, &model.zero_state(), &DVector::zeros(1), 0.01).unwrap();
        assert!(z.is_zero());
        assert!(step(&model, &x, &u, 0.0).is_err());
    }

    #[test]
    fn zero_initial_state() {
        let model = CascadeParams::example().build().unwrap();
        let policy = TriggerPolicy::EventTriggered {
            eps: 0.07,
            tau_min: 0.001,
            tau_max: 0.5,
        };
        let tr = run(
            &model,
            &env(),
            &policy,
            &model.zero_state(),
            &IntegratorConfig::new(2.0),
        )
        .unwrap();
        assert!(tr.state_norms.iter().all(|&n| n == 0.0));
        assert_eq!(tr.event_times.len(), 5);
        assert!(tr.inter_event_times.iter().all(|&t| t == 0.5));
    }

    #[test]
    fn periodic_event_times_are_multiples() {
        let model = CascadeParams::example().with_modes(40).build().unwrap();
        let h = 0.01;
        let policy = TriggerPolicy::PeriodicEvent {
            eps: 0.07,
            h,
            l_max: 20,
        };
        let tr = run(
            &model,
            &env(),
            &policy,
            &model.example_initial_state(),
            &IntegratorConfig::new(2.0),
        )
        .unwrap();
        for &tau in &tr.inter_event_times {
            let j = (tau / h).round();
            assert!((1.0..=20.0).contains(&j));
            assert_eq!(tau, h * j);
        }
        assert!(tr.event_times.len() < 200);
    }

    #[test]
    fn event_triggered_semantics() {
        let model = CascadeParams::example().with_modes(40).build().unwrap();
        let policy = TriggerPolicy::EventTriggered {
            eps: 0.07,
            tau_min: 0.001,
            tau_max: 0.5,
        };
        let tr = run(
            &model,
            &env(),
            &policy,
            &model.example_initial_state(),
            &IntegratorConfig::new(3.0),
        )
        .unwrap();
        assert!(tr.inter_event_times.iter().all(|&t| (0.001..=0.5).contains(&t)));
        let mut k = 0;
        for i in 1..tr.len() {
            let thr = 0.07 * tr.reference_norms[i];
            if tr.is_event[i] {
                k += 1;
                let tau = tr.inter_event_times[k - 1];
                if tau < 0.5 && tau > 0.001 {
                    assert!(tr.deviations[i] > thr);
                    assert!(tr.deviations[i] - thr < 1e-6 * tr.reference_norms[i]);
                }
            } else if tr.sample_times[i] - tr.event_times[k] > 0.001 {
                assert!(tr.deviations[i] <= thr);
            }
        }
    }

    #[test]
    fn decay_fit_examples() {
        let model = CascadeParams::example().with_modes(10).build().unwrap();
        let mut x = model.zero_state();
        x.a[1] = 1.0;
        let mut tr = run(
            &model,
            &env(),
            &TriggerPolicy::Periodic { h: 0.01 },
            &x,
            &IntegratorConfig::new(0.5),
        )
        .unwrap();
        let (_, g) = decay_fit(&tr, 0.0).unwrap();
        assert!((g - std::f64::consts::PI.powi(2)).abs() < 0.01 * g, "{g}");
        tr.state_norms.iter_mut().for_each(|n| *n = 3.0);
        let (big, g) = decay_fit(&tr, 0.1).unwrap();
        assert_abs_diff_eq!(g, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(big, 3.0, epsilon = 1e-12);
        tr.state_norms.iter_mut().for_each(|n| *n = 0.0);
        assert!(matches!(decay_fit(&tr, 0.0), Err(Error::AllZeroTail)));
    }

    #[test]
    fn nonlinear_step_is_second_order() {
        let model = CascadeParams::example()
            .with_modes(30)
            .with_nonlinearity(NonlinearitySpec::new(0.1, 0.1, 0.5).unwrap())
            .build()
            .unwrap();
        let x0 = model.example_initial_state();
        let u = DVector::from_element(1, 1.0);
        let solve = |n: usize| {
            let dt = 0.2 / n as f64;
            (0..n).fold(x0.clone(), |x, _| step(&model, &x, &u, dt).unwrap())
        };
        let reference = solve(1600);
        let e1 = (&solve(50) - &reference).norm();
        let e2 = (&solve(100) - &reference).norm();
        let order = (e1 / e2).log2();
        assert!(order > 1.8, "order {order}");
    }
}
