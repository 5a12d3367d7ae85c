mod common;

use common::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use triggerkit::operator_calculus::{
    alpha, closed_loop_operator, eta, finite_rank_norm, gamma_estimate, norm_b, DecayEnvelope, EnvelopeGrid,
    FiniteRankKind,
};
use triggerkit::stability_conditions::{
    check_etc_linear, check_etc_nonlinear, check_stm, frontier, varpi, FrontierFixed, FrontierTarget,
};
use triggerkit::*;

fn example() -> CascadeModel {
    CascadeParams::example().build().unwrap()
}

fn small() -> CascadeModel {
    CascadeParams::example().with_modes(30).build().unwrap()
}

#[test]
fn semigroup_property() {
    let model = example();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..10 {
        let x = random_state(&model, &mut rng);
        for t in [0.01, 0.1, 1.0] {
            for s in [0.01, 0.1, 1.0] {
                let once = semigroup_apply(&model, &x, t + s).unwrap().to_vector();
                let twice = semigroup_apply(&model, &semigroup_apply(&model, &x, t).unwrap(), s)
                    .unwrap()
                    .to_vector();
                assert!(rel_err(&twice, &once) < 1e-10, "t={t} s={s}");
            }
        }
    }
}

#[test]
fn heat_block_norm_is_nonincreasing() {
    let model = example();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut x = random_state(&model, &mut rng);
    x.a[0] = 0.0;
    x.x2.fill(0.0);
    let mut last = x.norm();
    for j in 1..=200 {
        let n = semigroup_apply(&model, &x, 0.005 * j as f64).unwrap().norm();
        assert!(n <= last);
        last = n;
    }
}

#[test]
fn forced_step_derivative_is_semigroup() {
    let model = example();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let d = 1e-6;
    for _ in 0..10 {
        let v = random_state(&model, &mut rng);
        let t = rng.gen_range(0.05..1.0);
        let diff = &(&forced_step(&model, &v, t + d).unwrap() - &forced_step(&model, &v, t - d).unwrap()) * (0.5 / d);
        let exact = semigroup_apply(&model, &v, t).unwrap();
        assert!((&diff - &exact).norm() < 1e-6 * exact.norm().max(1.0));
    }
}

#[test]
fn perturbation_is_globally_lipschitz() {
    let model = CascadeParams::example()
        .with_nonlinearity(NonlinearitySpec::new(0.1, 0.1, 0.5).unwrap())
        .build()
        .unwrap();
    let l = 5f64.sqrt() * 0.1;
    assert!((model.lipschitz_constant() - l).abs() < 1e-12);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..10_000 {
        let mut a = model.zero_state();
        let mut b = model.zero_state();
        a.x2[0] = rng.gen_range(-3.0..3.0);
        b.x2[0] = rng.gen_range(-3.0..3.0);
        a.a[0] = rng.gen_range(-1.0..1.0);
        let gap = (&perturbation(&model, &a).unwrap() - &perturbation(&model, &b).unwrap()).norm();
        assert!(gap <= l * (&a - &b).norm() + 1e-12);
    }
}

#[test]
fn feedback_ignores_heat_modes() {
    let model = example();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x = random_state(&model, &mut rng);
    let mut y = x.clone();
    for k in 1..=model.n_modes() {
        y.a[k] += rng.gen_range(-5.0..5.0);
    }
    assert_eq!(feedback_apply(&model, &x), feedback_apply(&model, &y));
}

#[test]
fn finite_rank_norms_are_continuous() {
    let model = example();
    for kind in [FiniteRankKind::FIMinusDelta, FiniteRankKind::BFIMinusDelta] {
        let mut prev = finite_rank_norm(&model, kind, 0.0);
        for j in 1..=10_000 {
            let v = finite_rank_norm(&model, kind, 1e-4 * j as f64);
            // The open loop is unstable, so the norm reaches ~50 near t = 1 and
            // steps are compared relative to its size there.
            assert!((v - prev).abs() < 1e-2 * v.max(1.0), "t = {}", 1e-4 * j as f64);
            prev = v;
        }
    }
}

#[test]
fn eta_is_monotone_in_l_and_eps() {
    let env = DecayEnvelope::new(1.0, 1.92).unwrap();
    for tau in [0.01, 0.1, 0.5, 1.0] {
        for i in 0..20 {
            for j in 0..20 {
                let (l, e) = (0.05 * i as f64, 0.025 * j as f64);
                let base = eta(&env, 1.0, l, e, tau);
                assert!(eta(&env, 1.0, l + 0.05, e, tau) >= base);
                assert!(eta(&env, 1.0, l, e + 0.025, tau) >= base);
            }
        }
    }
}

#[test]
fn alpha_is_nondecreasing_in_tau() {
    let model = CascadeParams::example()
        .with_nonlinearity(NonlinearitySpec::new(0.1, 0.1, 0.5).unwrap())
        .build()
        .unwrap();
    let env = DecayEnvelope::new(1.0, 1.92).unwrap();
    let l = model.lipschitz_constant();
    let x = model.example_initial_state();
    let mut prev = 0.0;
    for j in 0..=200 {
        let v = alpha(&model, &env, l, 0.29, &x, 0.0025 * j as f64).unwrap();
        assert!(v >= prev - 1e-12, "tau = {}", 0.0025 * j as f64);
        prev = v;
    }
}

#[test]
fn gamma_estimate_bounds_a_finer_grid() {
    let model = example();
    let env = gamma_estimate(&model, 1.0, &EnvelopeGrid::default()).unwrap();
    assert!(env.big_gamma >= 1.0);
    let steps = (env.t_grid_max / 0.001).round() as usize;
    for j in 0..=steps {
        let t = 0.001 * j as f64;
        let v = t.exp() * closed_loop_operator(&model, t).norm();
        assert!(v <= env.big_gamma * (1.0 + 1e-9), "t = {t}: {v} > {}", env.big_gamma);
    }
}

#[test]
fn perturbed_check_reduces_to_linear_numerator() {
    let model = example();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..50 {
        let tau_min = rng.gen_range(0.0005..0.02);
        let env = DecayEnvelope::new(rng.gen_range(0.2..1.5), rng.gen_range(1.0..3.0)).unwrap();
        let lin = check_etc_linear(&model, &env, 0.0, tau_min, 101).unwrap();
        let nl = check_etc_nonlinear(&model, &env, 0.0, 0.0, tau_min, 0.5, 0.5 * env.gamma, 101).unwrap();
        let numerator_positive = lin.get("numerator").unwrap() > 0.0;
        assert_eq!(nl.satisfied, numerator_positive, "tau_min={tau_min} env={env:?}");
    }
}

#[test]
fn varpi_tends_to_its_limit_linearly() {
    let env = DecayEnvelope::new(1.0, 1.92).unwrap();
    let l = 5f64.sqrt() * 0.1;
    let limit = env.big_gamma * l / env.gamma;
    let errs: Vec<f64> = (2..=6)
        .map(|k| (varpi(&env, 1.0, l, 0.29, 10f64.powi(-k)).unwrap() - limit).abs())
        .collect();
    for w in errs.windows(2) {
        assert!((w[0] / w[1]).log10() > 0.97, "{errs:?}");
    }
}

#[test]
fn eps_frontier_is_monotone_in_tau_min() {
    let model = example();
    let env = DecayEnvelope::new(1.0, 1.92).unwrap();
    let taus: Vec<f64> = (1..=20).map(|j| 0.0005 * j as f64).collect();
    let fixed = FrontierFixed {
        points: 501,
        ..Default::default()
    };
    let table = frontier(&model, &env, FrontierTarget::EpsVsTauMin, &fixed, &taus).unwrap();
    assert!(table.monotone);
    assert_eq!(table.points.len(), 20);
}

#[test]
fn stm_check_is_monotone() {
    let env = DecayEnvelope::new(1.0, 1.92).unwrap();
    let sat = |l: f64, e: f64, t: f64| check_stm(&env, 1.0, l, e, t).unwrap().satisfied;
    for i in 0..10 {
        for j in 0..10 {
            for k in 1..10 {
                let (l, e, t) = (0.03 * i as f64, 0.05 * j as f64, 0.2 * k as f64);
                if !sat(l, e, t) {
                    assert!(!sat(l + 0.03, e, t) && !sat(l, e + 0.05, t) && !sat(l, e, t + 0.2));
                }
            }
        }
    }
}

#[test]
fn stm_intervals_respect_theta_for_random_states() {
    let model = CascadeParams::example()
        .with_nonlinearity(NonlinearitySpec::new(0.1, 0.1, 0.5).unwrap())
        .build()
        .unwrap();
    let env = DecayEnvelope::new(1.0, 1.92).unwrap();
    let l = model.lipschitz_constant();
    let theta = stability_conditions::theta_bound(&model, &env, l, 0.29).unwrap();
    let policy = TriggerPolicy::SelfTriggered {
        eps: 0.29,
        tau_max: 0.5,
        l,
    };
    let pred = StmPredictor::new(&model, &env, &policy).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..50 {
        let tau = pred.next_interval(&random_state(&model, &mut rng));
        assert!(tau >= theta - 1e-6 && tau <= 0.5);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn report_flag_matches_margin(l in 0.0..0.5f64, eps in 0.0..0.6f64, tau in 0.01..2.0f64) {
        let env = DecayEnvelope::new(1.0, 1.92).unwrap();
        let r = check_stm(&env, 1.0, l, eps, tau).unwrap();
        prop_assert_eq!(r.satisfied, r.margin > 0.0);
    }

    #[test]
    fn etc_linear_flag_matches_margin(eps in 0.0..0.2f64, tau_min in 0.0001..0.05f64) {
        let model = small();
        let env = DecayEnvelope::new(1.0, 1.92).unwrap();
        let r = check_etc_linear(&model, &env, eps, tau_min, 51).unwrap();
        prop_assert_eq!(r.satisfied, r.margin > 0.0);
    }

    #[test]
    fn predicate_never_fires_on_zero_error(seed in any::<u64>(), eps in 0.0..1.0f64) {
        let model = small();
        let x = random_state(&model, &mut ChaCha8Rng::seed_from_u64(seed));
        let etm = TriggerPolicy::EventTriggered { eps, tau_min: 0.001, tau_max: 0.5 };
        prop_assert!(!trigger_fired(&etm, &x, &x, 0.01));
        let mut y = x.clone();
        y.a[1] += 1e-3;
        let zero = TriggerPolicy::PeriodicEvent { eps: 0.0, h: 0.01, l_max: 3 };
        prop_assert!(trigger_fired(&zero, &x, &y, 0.01));
    }

    #[test]
    fn propagation_is_linear(seed in any::<u64>(), t in 0.0..1.0f64, c in -3.0..3.0f64) {
        let model = small();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_state(&model, &mut rng);
        let y = random_state(&model, &mut rng);
        let lhs = semigroup_apply(&model, &(&x + &(&y * c)), t).unwrap();
        let rhs = &semigroup_apply(&model, &x, t).unwrap() + &(&semigroup_apply(&model, &y, t).unwrap() * c);
        prop_assert!((&lhs - &rhs).norm() <= 1e-12 * (1.0 + rhs.norm()));
    }

    #[test]
    fn decay_fit_recovers_exponentials(big in 0.1..10.0f64, rate in -1.0..5.0f64) {
        let model = small();
        let env = DecayEnvelope::new(1.0, 1.92).unwrap();
        let mut tr = run(&model, &env, &TriggerPolicy::Periodic { h: 0.01 }, &model.zero_state(), &IntegratorConfig::new(0.1)).unwrap();
        tr.state_norms = tr.sample_times.iter().map(|t| big * (-rate * t).exp()).collect();
        let (g_fit, r_fit) = decay_fit(&tr, 0.0).unwrap();
        prop_assert!((g_fit - big).abs() < 1e-9 * big);
        prop_assert!((r_fit - rate).abs() < 1e-8);
    }
}

#[test]
fn norm_b_of_example_model() {
    assert_eq!(norm_b(&example()), 1.0);
}
