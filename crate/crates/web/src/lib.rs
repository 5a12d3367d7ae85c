//! Browser bindings: a closed-loop simulation, the event-triggering frontier
//! and the self-triggering margin, all on the scalar example.

use triggerkit::operator_calculus::{gamma_estimate, norm_b, DecayEnvelope, EnvelopeGrid};
use triggerkit::stability_conditions::{check_stm, etc_linear_bound, varpi};
use triggerkit::{run, CascadeModel, CascadeParams, IntegratorConfig, NonlinearitySpec, TriggerPolicy};
use wasm_bindgen::prelude::*;

/// Fewer modes and a coarser step than the CLI defaults keep the page responsive.
pub const DEMO_MODES: usize = 60;
pub const DEMO_DT: f64 = 1e-3;
const MAX_PLOT_POINTS: usize = 2000;
const SUP_POINTS: usize = 401;

fn model(g: f64, r: f64) -> triggerkit::Result<CascadeModel> {
    let mut params = CascadeParams::example().with_g(g).with_modes(DEMO_MODES);
    if r > 0.0 {
        params = params.with_nonlinearity(NonlinearitySpec::new(r, r, 0.5)?);
    }
    params.build()
}

fn envelope(model: &CascadeModel) -> triggerkit::Result<DecayEnvelope> {
    gamma_estimate(model, 1.0, &EnvelopeGrid::default())
}

/// Thinned state-norm curve plus the full list of transmission times.
#[wasm_bindgen]
#[derive(Debug, Clone)]
pub struct SimulationView {
    times: Vec<f64>,
    norms: Vec<f64>,
    events: Vec<f64>,
}

#[wasm_bindgen]
impl SimulationView {
    #[wasm_bindgen(getter)]
    pub fn times(&self) -> Vec<f64> {
        self.times.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn norms(&self) -> Vec<f64> {
        self.norms.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn events(&self) -> Vec<f64> {
        self.events.clone()
    }
}

/// `kind` is `"stm"`, `"etc"` or `"periodic"`; `param` is `τ_max`, `τ_min`
/// or `h` respectively. The event-triggered scheme uses `τ_max = 0.5`.
pub fn simulate_native(
    kind: &str,
    g: f64,
    r: f64,
    eps: f64,
    param: f64,
    t_end: f64,
) -> triggerkit::Result<SimulationView> {
    let model = model(g, r)?;
    let policy = match kind {
        "stm" => TriggerPolicy::SelfTriggered {
            eps,
            tau_max: param,
            l: model.lipschitz_constant(),
        },
        "etc" => TriggerPolicy::EventTriggered {
            eps,
            tau_min: param,
            tau_max: 0.5,
        },
        "periodic" => TriggerPolicy::Periodic { h: param },
        other => return Err(triggerkit::Error::InvalidArgument(format!("unknown scheme {other:?}"))),
    };
    let env = match policy {
        TriggerPolicy::SelfTriggered { .. } => envelope(&model)?,
        _ => DecayEnvelope::new(1.0, 1.0)?,
    };
    let mut cfg = IntegratorConfig::new(t_end);
    cfg.dt = DEMO_DT.min(param);
    cfg.event_tol = 1e-2 * cfg.dt;
    let trace = run(&model, &env, &policy, &model.example_initial_state(), &cfg)?;
    let stride = trace.len().div_ceil(MAX_PLOT_POINTS).max(1);
    let keep = |i: usize| i.is_multiple_of(stride) || i + 1 == trace.len();
    Ok(SimulationView {
        times: (0..trace.len())
            .filter(|&i| keep(i))
            .map(|i| trace.sample_times[i])
            .collect(),
        norms: (0..trace.len())
            .filter(|&i| keep(i))
            .map(|i| trace.state_norms[i])
            .collect(),
        events: trace.event_times,
    })
}

/// Largest admissible `ε` at each `τ_min` of `taus`, linear plant.
pub fn etc_frontier_native(g: f64, taus: &[f64]) -> triggerkit::Result<Vec<f64>> {
    let model = model(g, 0.0)?;
    let env = envelope(&model)?;
    Ok(taus
        .iter()
        .map(|&t| etc_linear_bound(&model, &env, t, SUP_POINTS))
        .collect())
}

/// `ϖ(τ)` on `taus`, followed by the margin of the self-triggering condition
/// at `τ_max` as the last entry.
pub fn stm_curve_native(r: f64, eps: f64, tau_max: f64, taus: &[f64]) -> triggerkit::Result<Vec<f64>> {
    let env = DecayEnvelope::new(1.0, 1.92)?;
    let model = model(1.0, r)?;
    let (nb, l) = (norm_b(&model), model.lipschitz_constant());
    let mut out = taus
        .iter()
        .map(|&t| varpi(&env, nb, l, eps, t))
        .collect::<triggerkit::Result<Vec<_>>>()?;
    out.push(check_stm(&env, nb, l, eps, tau_max)?.margin);
    Ok(out)
}

fn js(e: triggerkit::Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen]
pub fn simulate(kind: &str, g: f64, r: f64, eps: f64, param: f64, t_end: f64) -> Result<SimulationView, JsError> {
    simulate_native(kind, g, r, eps, param, t_end).map_err(js)
}

#[wasm_bindgen(js_name = etcFrontier)]
pub fn etc_frontier(g: f64, taus: Vec<f64>) -> Result<Vec<f64>, JsError> {
    etc_frontier_native(g, &taus).map_err(js)
}

#[wasm_bindgen(js_name = stmCurve)]
pub fn stm_curve(r: f64, eps: f64, tau_max: f64, taus: Vec<f64>) -> Result<Vec<f64>, JsError> {
    stm_curve_native(r, eps, tau_max, &taus).map_err(js)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simulation_decays_and_is_thinned() {
        let v = simulate_native("etc", 1.0, 0.0, 0.07, 0.001, 5.0).unwrap();
        assert!(v.times.len() <= MAX_PLOT_POINTS + 1);
        assert_eq!(v.times.len(), v.norms.len());
        assert_eq!(v.events[0], 0.0);
        assert!(v.norms.last().unwrap() < &(0.1 * v.norms[0]));
        assert_eq!(*v.times.last().unwrap(), 5.0);
    }

    #[test]
    fn stm_and_periodic_run() {
        let stm = simulate_native("stm", 1.0, 0.1, 0.29, 0.5, 2.0).unwrap();
        let per = simulate_native("periodic", 1.0, 0.0, 0.0, 0.02, 2.0).unwrap();
        assert!(stm.events.windows(2).all(|w| w[1] - w[0] >= 0.0101));
        assert_eq!(per.events.len(), 101);
        assert!(simulate_native("bogus", 1.0, 0.0, 0.0, 0.02, 2.0).is_err());
    }

    #[test]
    fn frontier_decreases_in_dwell_time() {
        let taus = [0.001, 0.003, 0.005];
        let f = etc_frontier_native(1.0, &taus).unwrap();
        assert!((f[0] - 0.0773).abs() < 2e-3, "{f:?}");
        assert!(f.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn stm_margin_sign_flips_past_threshold() {
        let ok = stm_curve_native(0.1, 0.29, 0.5, &[0.1, 0.5]).unwrap();
        let bad = stm_curve_native(0.1, 0.29, 1.0, &[]).unwrap();
        assert!(*ok.last().unwrap() > 0.0);
        assert!(bad[0] < 0.0);
        assert!(ok[0] < ok[1]);
    }
}
