//! Subcommands. Each returns the process exit code on success and writes
//! its report to `out`.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use triggerkit::operator_calculus::{gamma_estimate, norm_b, DecayEnvelope, EnvelopeGrid};
use triggerkit::stability_conditions::{
    check_etc_linear, check_etc_nonlinear, check_periodic, check_petc, check_stm, frontier, theta_bound,
    worst_case_direction, FrontierFixed, PetcConstants, PetcVariant, StabilityReport,
};
use triggerkit::{decay_fit, run, stm_next_interval, TriggerPolicy};

use crate::config::{target_name, RunConfig};
use crate::csv_io::{fmt_f64, write_events, write_frontier, write_trace};
use crate::error::CliError;
use crate::plot::trace_svg;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Check,
    Frontier,
    Bounds,
    GammaEstimate,
}

impl Command {
    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "simulate" => Command::Simulate,
            "check" => Command::Check,
            "frontier" => Command::Frontier,
            "bounds" => Command::Bounds,
            "gamma-estimate" => Command::GammaEstimate,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Default)]
pub struct Options {
    pub out_dir: Option<PathBuf>,
    /// Overrides the number of grid nodes used for every sup over an interval.
    pub seed_grid: Option<usize>,
    pub svg: bool,
}

/// Exit code for a satisfied condition or a successful run.
pub const EXIT_OK: i32 = 0;
/// Exit code for a condition that does not hold.
pub const EXIT_VIOLATED: i32 = 1;

/// `(Γ, γ)` from the config, estimating `Γ` when it is not given.
pub fn envelope(cfg: &RunConfig) -> Result<DecayEnvelope, CliError> {
    let gamma = cfg.envelope.gamma;
    Ok(match cfg.envelope.big_gamma {
        Some(g) => DecayEnvelope::new(gamma, g)?,
        None => gamma_estimate(&cfg.model, gamma, &EnvelopeGrid::default())?,
    })
}

fn points(cfg: &RunConfig, opts: &Options) -> usize {
    opts.seed_grid.unwrap_or(cfg.check.points)
}

fn resolve(dir: &Option<PathBuf>, file: &Path) -> PathBuf {
    match dir {
        Some(d) if file.is_relative() => d.join(file),
        _ => file.to_path_buf(),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| CliError::Io(format!("{}: {e}", parent.display())))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn dispatch(command: Command, cfg: &RunConfig, opts: &Options, out: &mut dyn Write) -> Result<i32, CliError> {
    if let Some(n) = opts.seed_grid {
        if n < 2 {
            return Err(CliError::Usage("--seed-grid must be at least 2".into()));
        }
    }
    match command {
        Command::Simulate => simulate(cfg, opts, out),
        Command::Check => check(cfg, opts, out),
        Command::Frontier => frontier_cmd(cfg, opts, out),
        Command::Bounds => bounds(cfg, out),
        Command::GammaEstimate => gamma_cmd(cfg, out),
    }
}

pub fn simulate(cfg: &RunConfig, opts: &Options, out: &mut dyn Write) -> Result<i32, CliError> {
    let policy = cfg.policy()?;
    // Only the self-triggered predictor reads the envelope.
    let env = match policy {
        TriggerPolicy::SelfTriggered { .. } => envelope(cfg)?,
        _ => DecayEnvelope::new(cfg.envelope.gamma, cfg.envelope.big_gamma.unwrap_or(1.0))?,
    };
    let trace = run(&cfg.model, &env, policy, &cfg.initial, &cfg.integrator)?;

    let trace_path = resolve(&opts.out_dir, &cfg.outputs.trace_csv);
    let events_path = resolve(&opts.out_dir, &cfg.outputs.events_csv);
    write_trace(create(&trace_path)?, &trace)?;
    write_events(create(&events_path)?, &trace)?;
    let svg_path = match (&cfg.outputs.svg, opts.svg) {
        (Some(p), _) => Some(resolve(&opts.out_dir, p)),
        (None, true) => Some(resolve(&opts.out_dir, Path::new("trace.svg"))),
        (None, false) => None,
    };
    if let Some(p) = &svg_path {
        let mut w = create(p)?;
        w.write_all(trace_svg(&trace).as_bytes())?;
        w.flush()?;
    }

    writeln!(out, "policy = {}", policy.kind())?;
    writeln!(out, "samples = {}", trace.len())?;
    writeln!(out, "events = {}", trace.event_count())?;
    let min_gap = trace.inter_event_times.iter().copied().fold(f64::INFINITY, f64::min);
    if min_gap.is_finite() {
        writeln!(out, "min_inter_event_time = {}", fmt_f64(min_gap))?;
    }
    writeln!(out, "final_state_norm = {}", fmt_f64(trace.final_state.norm()))?;
    match decay_fit(&trace, 0.0) {
        Ok((g, r)) => {
            writeln!(out, "Gamma_fit = {}", fmt_f64(g))?;
            writeln!(out, "gamma_fit = {}", fmt_f64(r))?;
        }
        Err(e) => writeln!(out, "decay_fit = unavailable ({e})")?,
    }
    writeln!(out, "trace_csv = {}", trace_path.display())?;
    writeln!(out, "events_csv = {}", events_path.display())?;
    if let Some(p) = svg_path {
        writeln!(out, "svg = {}", p.display())?;
    }
    Ok(EXIT_OK)
}

/// The condition matching the configured policy.
pub fn check_report(cfg: &RunConfig, points: usize) -> Result<StabilityReport, CliError> {
    let model = &cfg.model;
    let l = cfg.check.l.unwrap_or_else(|| cfg.lipschitz());
    let report = match *cfg.policy()? {
        TriggerPolicy::SelfTriggered { eps, tau_max, l } => check_stm(&envelope(cfg)?, norm_b(model), l, eps, tau_max)?,
        TriggerPolicy::EventTriggered { eps, tau_min, tau_max } => {
            let env = envelope(cfg)?;
            if l == 0.0 {
                check_etc_linear(model, &env, eps, tau_min, points)?
            } else {
                let sigma = cfg.check.sigma.unwrap_or(0.5 * env.gamma);
                check_etc_nonlinear(model, &env, l, eps, tau_min, tau_max, sigma, points)?
            }
        }
        TriggerPolicy::PeriodicEvent { eps, h, .. } => {
            let variant = match cfg.check.power_stable {
                Some((big_omega, omega)) => PetcVariant::PowerStable {
                    big_omega,
                    omega,
                    constants: PetcConstants::compute(model, h, points)?,
                },
                None => PetcVariant::Bounded(envelope(cfg)?),
            };
            check_petc(model, &variant, l, eps, h, points)?
        }
        TriggerPolicy::Periodic { h } => check_periodic(model, &envelope(cfg)?, h, points)?,
    };
    Ok(report)
}

pub fn check(cfg: &RunConfig, opts: &Options, out: &mut dyn Write) -> Result<i32, CliError> {
    let report = check_report(cfg, points(cfg, opts))?;
    write!(out, "{report}")?;
    Ok(if report.satisfied { EXIT_OK } else { EXIT_VIOLATED })
}

pub fn frontier_cmd(cfg: &RunConfig, opts: &Options, out: &mut dyn Write) -> Result<i32, CliError> {
    let spec = cfg.frontier()?;
    let env = envelope(cfg)?;
    let tau_max = match cfg.policy {
        Some(TriggerPolicy::EventTriggered { tau_max, .. } | TriggerPolicy::SelfTriggered { tau_max, .. }) => tau_max,
        _ => FrontierFixed::default().tau_max,
    };
    let fixed = FrontierFixed {
        l: spec.l.unwrap_or_else(|| cfg.lipschitz()),
        tau_max,
        points: points(cfg, opts),
        tol: spec.tol,
    };
    let table = frontier(&cfg.model, &env, spec.target, &fixed, &spec.abscissae)?;
    let path = resolve(&opts.out_dir, Path::new("frontier.csv"));
    let mut w = create(&path)?;
    write_frontier(&mut w, &table)?;
    w.flush()?;
    writeln!(out, "target = {}", target_name(spec.target))?;
    writeln!(out, "rows = {}", table.points.len())?;
    writeln!(out, "monotone = {}", table.monotone)?;
    writeln!(out, "frontier_csv = {}", path.display())?;
    Ok(EXIT_OK)
}

pub fn bounds(cfg: &RunConfig, out: &mut dyn Write) -> Result<i32, CliError> {
    let policy = cfg.policy()?;
    let TriggerPolicy::SelfTriggered { eps, tau_max, l } = *policy else {
        return Err(CliError::Validation(
            "bounds needs policy.kind = \"self_triggered\"".into(),
        ));
    };
    let model = &cfg.model;
    let env = envelope(cfg)?;
    let theta = theta_bound(model, &env, l, eps)?;
    // Unit state along the direction that reaches the threshold first.
    let dir = worst_case_direction(model, theta);
    let mut worst = model.zero_state();
    worst.a[0] = dir[0];
    worst.x2 = DVector::from_iterator(model.p(), dir.iter().skip(1).copied());
    let worst_tau = stm_next_interval(model, &env, policy, &worst)?;
    let init_tau = stm_next_interval(model, &env, policy, &cfg.initial)?;
    writeln!(out, "Gamma = {}", fmt_f64(env.big_gamma))?;
    writeln!(out, "gamma = {}", fmt_f64(env.gamma))?;
    writeln!(out, "L = {}", fmt_f64(l))?;
    writeln!(out, "eps = {}", fmt_f64(eps))?;
    writeln!(out, "tau_max = {}", fmt_f64(tau_max))?;
    writeln!(out, "theta = {}", fmt_f64(theta))?;
    writeln!(out, "worst_case_next_interval = {}", fmt_f64(worst_tau))?;
    writeln!(out, "initial_next_interval = {}", fmt_f64(init_tau))?;
    Ok(EXIT_OK)
}

pub fn gamma_cmd(cfg: &RunConfig, out: &mut dyn Write) -> Result<i32, CliError> {
    let env = gamma_estimate(&cfg.model, cfg.envelope.gamma, &EnvelopeGrid::default())?;
    writeln!(out, "gamma = {}", fmt_f64(env.gamma))?;
    writeln!(out, "Gamma = {}", fmt_f64(env.big_gamma))?;
    writeln!(out, "t_grid_max = {}", fmt_f64(env.t_grid_max))?;
    writeln!(out, "certified_on_truncation = {}", env.certified_on_truncation)?;
    writeln!(out, "modes = {}", cfg.model.n_modes())?;
    Ok(EXIT_OK)
}
