#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use triggerkit::{CascadeModel, SpectralState};

/// `(T(t), S_t)` of the truncated model from one dense exponential of
/// `[[A, B], [0, 0]]`.
pub fn dense_t_s(model: &CascadeModel, t: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let d = model.dim();
    let m = model.m();
    let mut aug = DMatrix::zeros(d + m, d + m);
    aug.view_mut((0, 0), (d, d)).copy_from(&model.generator_matrix());
    aug.view_mut((0, d), (d, m)).copy_from(&model.input_matrix());
    let e = (aug * t).exp();
    (e.view((0, 0), (d, d)).into_owned(), e.view((0, d), (d, m)).into_owned())
}

/// Dense `Δ_t = T(t) + S_t F`.
pub fn dense_delta(model: &CascadeModel, t: f64) -> DMatrix<f64> {
    let (tt, s) = dense_t_s(model, t);
    tt + s * model.feedback_matrix()
}

/// Classical RK4 for `x' = Ax + v` on every column of `x0`.
pub fn rk4(a: &DMatrix<f64>, x0: &DMatrix<f64>, v: &DMatrix<f64>, t: f64, steps: usize) -> DMatrix<f64> {
    let h = t / steps as f64;
    let f = |x: &DMatrix<f64>| a * x + v;
    let mut x = x0.clone();
    for _ in 0..steps {
        let k1 = f(&x);
        let k2 = f(&(&x + &k1 * (0.5 * h)));
        let k3 = f(&(&x + &k2 * (0.5 * h)));
        let k4 = f(&(&x + &k3 * h));
        x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    }
    x
}

/// Random state with modal amplitudes falling off like `1/(1+n)`.
pub fn random_state(model: &CascadeModel, rng: &mut ChaCha8Rng) -> SpectralState {
    let n = model.n_modes();
    let a = DVector::from_fn(n + 1, |k, _| rng.gen_range(-1.0..1.0) / (1.0 + k as f64));
    let x2 = DVector::from_fn(model.p(), |_, _| rng.gen_range(-2.0..2.0));
    SpectralState::new(a, x2)
}

pub fn rel_err(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}
