//! Closed-form propagation and reduced norms against dense truncated oracles.

mod common;

use common::*;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use triggerkit::linalg::spectral_norm;
use triggerkit::operator_calculus::{finite_rank_norm, FiniteRankKind, ReducedMaps};
use triggerkit::{
    forced_step, run, semigroup_apply, CascadeParams, IntegratorConfig, NonlinearitySpec, SpectralState, TriggerPolicy,
};

#[test]
fn semigroup_and_forced_step_match_rk4() {
    let model = CascadeParams::example().build().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let states: Vec<SpectralState> = (0..20).map(|_| random_state(&model, &mut rng)).collect();
    let x0 = DMatrix::from_columns(&states.iter().map(|s| s.to_vector()).collect::<Vec<_>>());
    let a = model.generator_matrix();
    let t = 0.01;
    // Stiffest mode is −200²π²; RK4 needs |λ|h well inside its stability region.
    let steps = 10_000;
    let free = rk4(&a, &x0, &DMatrix::zeros(model.dim(), 20), t, steps);
    let zero = DMatrix::zeros(model.dim(), 1);
    for (j, s) in states.iter().enumerate() {
        let ours = semigroup_apply(&model, s, t).unwrap().to_vector();
        let e = rel_err(&ours, &free.column(j).into_owned());
        assert!(e < 1e-6, "state {j}: {e}");
        let forced = rk4(
            &a,
            &zero,
            &DMatrix::from_column_slice(model.dim(), 1, s.to_vector().as_slice()),
            t,
            steps,
        );
        let ours = forced_step(&model, s, t).unwrap().to_vector();
        let e = rel_err(&ours, &forced.column(0).into_owned());
        assert!(e < 1e-6, "forced {j}: {e}");
    }
}

#[test]
fn semigroup_at_half_matches_dense_exponential() {
    let model = CascadeParams::example().build().unwrap();
    let mut s = model.zero_state();
    s.x2[0] = 1.0;
    let (tt, _) = dense_t_s(&model, 0.5);
    let ours = semigroup_apply(&model, &s, 0.5).unwrap().to_vector();
    let e = rel_err(&ours, &(tt * s.to_vector()));
    assert!(e < 1e-6, "{e}");
}

#[test]
fn periodic_linear_samples_match_dense_delta_powers() {
    let model = CascadeParams::example().build().unwrap();
    let env = triggerkit::operator_calculus::DecayEnvelope::new(1.0, 1.92).unwrap();
    let h = 0.01;
    let delta = dense_delta(&model, h);
    let fm = model.feedback_matrix();
    let x0 = model.example_initial_state();
    let tr = run(
        &model,
        &env,
        &TriggerPolicy::Periodic { h },
        &x0,
        &IntegratorConfig::new(1.0),
    )
    .unwrap();
    let mut x = x0.to_vector();
    let scale = x.norm();
    let mut k = 0;
    for i in 0..tr.len() {
        if !tr.is_event[i] {
            continue;
        }
        assert!((tr.state_norms[i] - x.norm()).abs() < 1e-8 * scale, "k = {k}");
        assert!((&tr.inputs[i] - &fm * &x).norm() < 1e-8 * scale, "k = {k}");
        x = &delta * x;
        k += 1;
    }
    assert_eq!(k, 101);
    let x_end = (0..100).fold(x0.to_vector(), |x, _| &delta * x);
    assert!((tr.final_state.to_vector() - x_end).norm() < 1e-8 * scale);
}

#[test]
fn integrator_self_convergence_is_second_order() {
    let model = CascadeParams::example()
        .with_nonlinearity(NonlinearitySpec::new(0.1, 0.1, 0.5).unwrap())
        .build()
        .unwrap();
    let env = triggerkit::operator_calculus::DecayEnvelope::new(1.0, 1.92).unwrap();
    let x0 = model.example_initial_state();
    let final_at = |dt: f64| {
        let cfg = IntegratorConfig {
            dt,
            event_tol: 1e-9,
            t_end: 1.0,
        };
        run(&model, &env, &TriggerPolicy::Periodic { h: 0.02 }, &x0, &cfg)
            .unwrap()
            .final_state
    };
    let (c, m, f) = (final_at(4e-4), final_at(2e-4), final_at(1e-4));
    let order = ((&c - &m).norm() / (&m - &f).norm()).log2();
    assert!(order >= 1.9, "order {order}");
}

#[test]
fn reduced_norms_match_dense_truncation() {
    let model = CascadeParams::example().build().unwrap();
    let b = model.input_matrix();
    let f = model.feedback_matrix();
    let id = DMatrix::identity(model.dim(), model.dim());
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let t = rng.gen_range(0.0..1.0);
        let (tt, _) = dense_t_s(&model, t);
        let fid = &f * (&id - dense_delta(&model, t));
        for (kind, dense) in [
            (FiniteRankKind::FIMinusDelta, fid.clone()),
            (FiniteRankKind::FT, &f * &tt),
            (FiniteRankKind::BFIMinusDelta, &b * &fid),
        ] {
            let ours = finite_rank_norm(&model, kind, t);
            let full = spectral_norm(&dense);
            assert!(
                (ours - full).abs() <= 1e-9 * full.max(1.0),
                "{kind:?} t={t}: {ours} vs {full}"
            );
        }
        let xi = random_state(&model, &mut rng);
        let ours = (ReducedMaps::new(&model, t).f_i_minus_delta(&model) * xi.core()).norm();
        let full = (&fid * xi.to_vector()).norm();
        assert!((ours - full).abs() <= 1e-9 * full.max(1.0));
    }
}

#[test]
fn ft_row_reproduces_feedback_of_propagated_state() {
    let model = CascadeParams::example().build().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..100 {
        let s = random_state(&model, &mut rng);
        for t in [0.01, 0.1, 0.5] {
            let reduced = ReducedMaps::new(&model, t).ft_row * s.core();
            let full = triggerkit::feedback_apply(&model, &semigroup_apply(&model, &s, t).unwrap());
            assert!((reduced - &full).norm() <= 1e-10 * full.norm().max(1.0));
        }
    }
}
