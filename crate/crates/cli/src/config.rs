//! Run configuration: TOML with flat dotted keys (`model.G = 1.0`,
//! `policy.kind = "self_triggered"`, ...). Unknown keys are rejected.

use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::Deserialize;
use triggerkit::operator_calculus::DEFAULT_GRID_POINTS;
use triggerkit::stability_conditions::FrontierTarget;
use triggerkit::{
    CascadeModel, CascadeParams, Influence, IntegratorConfig, NonlinearitySpec, SpectralState, TriggerPolicy,
};

use crate::error::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum Num {
    Scalar(f64),
    Vector(Vec<f64>),
    Matrix(Vec<Vec<f64>>),
}

impl Num {
    fn matrix(&self, key: &str) -> Result<DMatrix<f64>, CliError> {
        match self {
            Num::Scalar(v) => Ok(DMatrix::from_element(1, 1, *v)),
            Num::Vector(v) => Ok(DMatrix::from_row_slice(1, v.len(), v)),
            Num::Matrix(rows) => {
                let n = rows.first().map_or(0, Vec::len);
                if rows.iter().any(|r| r.len() != n) {
                    return Err(CliError::Validation(format!("{key}: rows must have equal length")));
                }
                Ok(DMatrix::from_row_iterator(
                    rows.len(),
                    n,
                    rows.iter().flatten().copied(),
                ))
            }
        }
    }

    fn vector(&self, key: &str) -> Result<DVector<f64>, CliError> {
        match self {
            Num::Scalar(v) => Ok(DVector::from_element(1, *v)),
            Num::Vector(v) => Ok(DVector::from_column_slice(v)),
            Num::Matrix(_) => Err(CliError::Validation(format!("{key} must be a scalar or a list"))),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    #[serde(rename = "G")]
    g: Option<Num>,
    #[serde(rename = "H")]
    h: Option<Num>,
    #[serde(rename = "F1")]
    f1: Option<Num>,
    #[serde(rename = "F2")]
    f2: Option<Num>,
    modes: Option<usize>,
    support: Option<[f64; 2]>,
    gain: Option<f64>,
    r1: Option<f64>,
    r2: Option<f64>,
    breakpoint: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEnvelope {
    gamma: Option<f64>,
    #[serde(rename = "Gamma")]
    big_gamma: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPolicy {
    kind: String,
    eps: Option<f64>,
    tau_min: Option<f64>,
    tau_max: Option<f64>,
    h: Option<f64>,
    l_max: Option<u32>,
    #[serde(rename = "L")]
    l: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawIntegrator {
    dt: Option<f64>,
    event_tol: Option<f64>,
    t_end: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInitial {
    a: Option<Num>,
    x2: Option<Num>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCheck {
    points: Option<usize>,
    sigma: Option<f64>,
    #[serde(rename = "L")]
    l: Option<f64>,
    #[serde(rename = "Omega")]
    big_omega: Option<f64>,
    omega: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFrontier {
    target: String,
    values: Option<Vec<f64>>,
    from: Option<f64>,
    to: Option<f64>,
    count: Option<usize>,
    #[serde(rename = "L")]
    l: Option<f64>,
    tol: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutputs {
    trace_csv: Option<PathBuf>,
    events_csv: Option<PathBuf>,
    svg: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    model: Option<RawModel>,
    envelope: Option<RawEnvelope>,
    policy: Option<RawPolicy>,
    #[serde(default)]
    integrator: RawIntegrator,
    #[serde(default)]
    initial: RawInitial,
    #[serde(default)]
    check: RawCheck,
    frontier: Option<RawFrontier>,
    #[serde(default)]
    outputs: RawOutputs,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeSpec {
    pub gamma: f64,
    /// Estimated from the model when absent.
    pub big_gamma: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckSpec {
    pub points: usize,
    pub sigma: Option<f64>,
    pub l: Option<f64>,
    pub power_stable: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrontierSpec {
    pub target: FrontierTarget,
    pub abscissae: Vec<f64>,
    pub l: Option<f64>,
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outputs {
    pub trace_csv: PathBuf,
    pub events_csv: PathBuf,
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub model: CascadeModel,
    pub envelope: EnvelopeSpec,
    pub policy: Option<TriggerPolicy>,
    pub integrator: IntegratorConfig,
    pub initial: SpectralState,
    pub check: CheckSpec,
    pub frontier: Option<FrontierSpec>,
    pub outputs: Outputs,
}

impl RunConfig {
    pub fn policy(&self) -> Result<&TriggerPolicy, CliError> {
        self.policy
            .as_ref()
            .ok_or_else(|| CliError::Validation("policy.kind is required for this command".into()))
    }

    pub fn frontier(&self) -> Result<&FrontierSpec, CliError> {
        self.frontier
            .as_ref()
            .ok_or_else(|| CliError::Validation("frontier.target is required for this command".into()))
    }

    /// `L` from the policy, else the model's own Lipschitz constant.
    pub fn lipschitz(&self) -> f64 {
        match self.policy {
            Some(TriggerPolicy::SelfTriggered { l, .. }) => l,
            _ => self.model.lipschitz_constant(),
        }
    }
}

pub fn target_from_name(name: &str) -> Option<FrontierTarget> {
    Some(match name {
        "eps_vs_taumin" => FrontierTarget::EpsVsTauMin,
        "max_taumax_stm" => FrontierTarget::MaxTauMaxStm,
        "max_h_periodic" => FrontierTarget::MaxHPeriodic,
        "eps_vs_h_petc" => FrontierTarget::EpsVsHPetc,
        _ => return None,
    })
}

pub fn target_name(target: FrontierTarget) -> &'static str {
    match target {
        FrontierTarget::EpsVsTauMin => "eps_vs_taumin",
        FrontierTarget::MaxTauMaxStm => "max_taumax_stm",
        FrontierTarget::MaxHPeriodic => "max_h_periodic",
        FrontierTarget::EpsVsHPetc => "eps_vs_h_petc",
    }
}

pub fn linear_grid(from: f64, to: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![from];
    }
    (0..count)
        .map(|i| {
            if i + 1 == count {
                to
            } else {
                from + (to - from) * i as f64 / (count - 1) as f64
            }
        })
        .collect()
}

fn need<T>(v: Option<T>, key: &str) -> Result<T, CliError> {
    v.ok_or_else(|| CliError::Validation(format!("{key} is required")))
}

fn build_model(raw: Option<RawModel>) -> Result<CascadeModel, CliError> {
    let mut params = CascadeParams::example();
    let Some(raw) = raw else {
        return params.build().map_err(CliError::from_model);
    };
    if let Some(g) = &raw.g {
        params.g = g.matrix("model.G")?;
    }
    let p = params.g.nrows();
    if let Some(h) = &raw.h {
        params.h = h.matrix("model.H")?;
        if params.h.nrows() == 1 && p > 1 && matches!(h, Num::Vector(_)) {
            params.h = params.h.transpose();
        }
    }
    if let Some(f1) = &raw.f1 {
        params.f1 = f1.vector("model.F1")?;
    }
    if let Some(f2) = &raw.f2 {
        params.f2 = f2.matrix("model.F2")?;
    }
    if let Some(n) = raw.modes {
        params.n_modes = n;
    }
    let (support, gain) = match params.influence {
        Influence::Indicator { support, gain } => (support, gain),
        Influence::Table(_) => unreachable!("default influence is an indicator"),
    };
    params.influence = Influence::Indicator {
        support: raw.support.map_or(support, |s| (s[0], s[1])),
        gain: raw.gain.unwrap_or(gain),
    };
    let r1 = raw.r1.unwrap_or(0.0);
    let r2 = raw.r2.unwrap_or(0.0);
    let breakpoint = raw.breakpoint.unwrap_or(0.5);
    if r1 != 0.0 || r2 != 0.0 {
        params.nonlin = NonlinearitySpec::new(r1, r2, breakpoint).map_err(CliError::from_model)?;
    }
    params.build().map_err(CliError::from_model)
}

fn build_policy(raw: RawPolicy, model: &CascadeModel) -> Result<TriggerPolicy, CliError> {
    let policy = match raw.kind.as_str() {
        "self_triggered" => TriggerPolicy::SelfTriggered {
            eps: need(raw.eps, "policy.eps")?,
            tau_max: need(raw.tau_max, "policy.tau_max")?,
            l: raw.l.unwrap_or_else(|| model.lipschitz_constant()),
        },
        "event_triggered" => TriggerPolicy::EventTriggered {
            eps: need(raw.eps, "policy.eps")?,
            tau_min: need(raw.tau_min, "policy.tau_min")?,
            tau_max: need(raw.tau_max, "policy.tau_max")?,
        },
        "periodic_event" => TriggerPolicy::PeriodicEvent {
            eps: need(raw.eps, "policy.eps")?,
            h: need(raw.h, "policy.h")?,
            l_max: need(raw.l_max, "policy.l_max")?,
        },
        "periodic" => TriggerPolicy::Periodic {
            h: need(raw.h, "policy.h")?,
        },
        other => {
            return Err(CliError::Validation(format!(
                "policy.kind must be one of self_triggered, event_triggered, periodic_event, periodic; got {other:?}"
            )))
        }
    };
    let given = [
        ("policy.eps", raw.eps.is_some()),
        ("policy.tau_min", raw.tau_min.is_some()),
        ("policy.tau_max", raw.tau_max.is_some()),
        ("policy.h", raw.h.is_some()),
        ("policy.l_max", raw.l_max.is_some()),
        ("policy.L", raw.l.is_some()),
    ];
    let allowed: &[&str] = match policy {
        TriggerPolicy::SelfTriggered { .. } => &["policy.eps", "policy.tau_max", "policy.L"],
        TriggerPolicy::EventTriggered { .. } => &["policy.eps", "policy.tau_min", "policy.tau_max"],
        TriggerPolicy::PeriodicEvent { .. } => &["policy.eps", "policy.h", "policy.l_max"],
        TriggerPolicy::Periodic { .. } => &["policy.h"],
    };
    if let Some((key, _)) = given.iter().find(|(k, set)| *set && !allowed.contains(k)) {
        return Err(CliError::Validation(format!(
            "{key} does not apply to policy.kind = {}",
            raw.kind
        )));
    }
    policy
        .validate()
        .map_err(|e| CliError::Validation(strip_prefix(&e.to_string())))?;
    Ok(policy)
}

fn strip_prefix(msg: &str) -> String {
    msg.strip_prefix("invalid argument: ").unwrap_or(msg).to_string()
}

fn build_initial(raw: RawInitial, model: &CascadeModel) -> Result<SpectralState, CliError> {
    let mut x = model.example_initial_state();
    if let Some(a) = raw.a {
        let a = a.vector("initial.a")?;
        if a.len() > model.n_modes() + 1 {
            return Err(CliError::Validation(format!(
                "initial.a has {} entries but the model keeps {} modes",
                a.len(),
                model.n_modes() + 1
            )));
        }
        x.a.fill(0.0);
        x.a.rows_mut(0, a.len()).copy_from(&a);
    }
    if let Some(x2) = raw.x2 {
        let x2 = x2.vector("initial.x2")?;
        x.x2 = match x2.len() {
            1 => DVector::from_element(model.p(), x2[0]),
            n if n == model.p() => x2,
            n => {
                return Err(CliError::Validation(format!(
                    "initial.x2 has {n} entries, model has p = {}",
                    model.p()
                )))
            }
        };
    }
    if !x.is_finite() {
        return Err(CliError::Validation("initial state must be finite".into()));
    }
    Ok(x)
}

fn build_frontier(raw: RawFrontier, gamma: f64) -> Result<FrontierSpec, CliError> {
    let target = target_from_name(&raw.target).ok_or_else(|| {
        CliError::Validation(format!(
            "frontier.target must be one of eps_vs_taumin, max_taumax_stm, max_h_periodic, eps_vs_h_petc; got {:?}",
            raw.target
        ))
    })?;
    let abscissae = match (raw.values, raw.from, raw.to) {
        (Some(v), None, None) => v,
        (None, Some(a), Some(b)) => {
            let count = raw.count.unwrap_or(10);
            if count == 0 || a.is_nan() || b.is_nan() || a > b {
                return Err(CliError::Validation(
                    "frontier grid needs from <= to and count >= 1".into(),
                ));
            }
            linear_grid(a, b, count)
        }
        (None, None, None) if target == FrontierTarget::MaxHPeriodic => vec![gamma],
        _ => {
            return Err(CliError::Validation(
                "frontier needs either frontier.values or both frontier.from and frontier.to".into(),
            ))
        }
    };
    if abscissae.is_empty() || abscissae.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(CliError::Validation(
            "frontier abscissae must be positive and finite".into(),
        ));
    }
    let tol = raw.tol.unwrap_or(1e-6);
    if tol.is_nan() || tol <= 0.0 {
        return Err(CliError::Validation("frontier.tol must be > 0".into()));
    }
    Ok(FrontierSpec {
        target,
        abscissae,
        l: raw.l,
        tol,
    })
}

pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| {
        let line = e.span().map(|s| text[..s.start].matches('\n').count() + 1);
        CliError::Parse {
            line,
            message: e.message().trim().to_string(),
        }
    })?;
    let model = build_model(raw.model)?;
    let env = need(raw.envelope, "envelope.gamma")?;
    let gamma = need(env.gamma, "envelope.gamma")?;
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(CliError::Validation(format!("envelope.gamma must be > 0, got {gamma}")));
    }
    if let Some(g) = env.big_gamma {
        if !(g >= 1.0 && g.is_finite()) {
            return Err(CliError::Validation(format!("envelope.Gamma must be >= 1, got {g}")));
        }
    }
    let policy = raw.policy.map(|p| build_policy(p, &model)).transpose()?;
    let integrator = IntegratorConfig {
        dt: raw.integrator.dt.unwrap_or(1e-4),
        event_tol: raw.integrator.event_tol.unwrap_or(1e-9),
        t_end: raw.integrator.t_end.unwrap_or(10.0),
    };
    if let Some(p) = &policy {
        integrator
            .validate(p)
            .map_err(|e| CliError::Validation(strip_prefix(&e.to_string())))?;
    }
    let initial = build_initial(raw.initial, &model)?;
    let check = CheckSpec {
        points: raw.check.points.unwrap_or(DEFAULT_GRID_POINTS),
        sigma: raw.check.sigma,
        l: raw.check.l,
        power_stable: match (raw.check.big_omega, raw.check.omega) {
            (Some(a), Some(b)) => Some((a, b)),
            (None, None) => None,
            _ => {
                return Err(CliError::Validation(
                    "check.Omega and check.omega must be given together".into(),
                ))
            }
        },
    };
    if check.points < 2 {
        return Err(CliError::Validation("check.points must be >= 2".into()));
    }
    let frontier = raw.frontier.map(|f| build_frontier(f, gamma)).transpose()?;
    Ok(RunConfig {
        model,
        envelope: EnvelopeSpec {
            gamma,
            big_gamma: env.big_gamma,
        },
        policy,
        integrator,
        initial,
        check,
        frontier,
        outputs: Outputs {
            trace_csv: raw.outputs.trace_csv.unwrap_or_else(|| "trace.csv".into()),
            events_csv: raw.outputs.events_csv.unwrap_or_else(|| "events.csv".into()),
            svg: raw.outputs.svg,
        },
    })
}

pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    parse_config(&text)
}
