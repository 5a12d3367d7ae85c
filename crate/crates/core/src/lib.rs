//! Simulation and stability certification for sampled, event-triggered and
//! self-triggered feedback of a heat equation in cascade with an ODE.

pub mod error;
pub mod linalg;
pub mod numerics;
pub mod operator_calculus;
pub mod simulator;
pub mod spectral_model;
pub mod stability_conditions;
pub mod triggering;

pub use error::{Error, Result};
pub use simulator::{decay_fit, run, step, IntegratorConfig, SimulationTrace};
pub use spectral_model::{
    feedback_apply, forced_step, mode_coefficients, perturbation, semigroup_apply, CascadeModel, CascadeParams,
    Influence, ModeData, NonlinearitySpec, Propagator, SpectralState,
};
pub use triggering::{stm_next_interval, trigger_fired, StmPredictor, TriggerPolicy};
