//! Scalar quadrature, maximization and root bracketing.

const GOLDEN: f64 = 0.618_033_988_749_894_9;

/// Adaptive Simpson quadrature with absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_rec(&f, a, b, fa, fm, fb, whole, tol, 48)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol || m <= a || m >= b {
        return left + right + delta / 15.0;
    }
    simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Golden-section search for a local maximum on `[a, b]`.
pub fn golden_max<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let mut c = b - GOLDEN * (b - a);
    let mut d = a + GOLDEN * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - GOLDEN * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + GOLDEN * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    let fx = f(x);
    [(c, fc), (d, fd), (x, fx)]
        .into_iter()
        .fold((x, fx), |best, cand| if cand.1 > best.1 { cand } else { best })
}

/// Supremum of `f` on `[a, b]` from a uniform grid of `points` nodes plus one
/// golden-section pass around the best node. Returns `(argmax, max)`.
pub fn grid_sup<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, points: usize) -> (f64, f64) {
    let values = uniform_grid(a, b, points).map(|t| (t, f(t))).collect::<Vec<_>>();
    refine_sup(&f, &values, a, b)
}

/// Golden-section refinement around the best sample of an already evaluated grid.
pub fn refine_sup<F: Fn(f64) -> f64>(f: &F, values: &[(f64, f64)], a: f64, b: f64) -> (f64, f64) {
    let (i, &(tx, fx)) = values
        .iter()
        .enumerate()
        .max_by(|x, y| x.1 .1.total_cmp(&y.1 .1))
        .expect("grid must be nonempty");
    if values.len() < 3 {
        return (tx, fx);
    }
    let lo = if i == 0 { a } else { values[i - 1].0 };
    let hi = if i + 1 == values.len() { b } else { values[i + 1].0 };
    let tol = (hi - lo) * 1e-6;
    let (tr, fr) = golden_max(f, lo, hi, tol.max(f64::EPSILON * hi.abs()));
    if fr > fx {
        (tr, fr)
    } else {
        (tx, fx)
    }
}

pub fn uniform_grid(a: f64, b: f64, points: usize) -> impl Iterator<Item = f64> + Clone {
    let n = points.max(2);
    let h = (b - a) / (n - 1) as f64;
    (0..n).map(move |i| if i + 1 == n { b } else { a + h * i as f64 })
}

/// Bisects a predicate that is true at `lo` and false at `hi` until the bracket
/// is narrower than `tol`. Returns the final `(lo, hi)`.
pub fn bisect_bracket<P: FnMut(f64) -> bool>(mut pred: P, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if pred(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn simpson_integrates_exp() {
        let v = adaptive_simpson(f64::exp, 0.0, 2.0, 1e-12);
        assert_abs_diff_eq!(v, 2f64.exp() - 1.0, epsilon = 1e-11);
        assert_eq!(adaptive_simpson(f64::exp, 1.0, 1.0, 1e-12), 0.0);
    }

    #[test]
    fn grid_sup_finds_interior_peak() {
        let f = |t: f64| -(t - 0.3137).powi(2);
        let (x, v) = grid_sup(f, 0.0, 1.0, 11);
        assert_abs_diff_eq!(x, 0.3137, epsilon = 1e-6);
        assert!(v <= 0.0 && v > -1e-12);
    }

    #[test]
    fn grid_sup_at_endpoint() {
        let (x, v) = grid_sup(|t| t, 0.0, 2.0, 5);
        assert_eq!(x, 2.0);
        assert_eq!(v, 2.0);
    }

    #[test]
    fn bisection_brackets_threshold() {
        let (lo, hi) = bisect_bracket(|x| x * x < 2.0, 0.0, 2.0, 1e-10);
        assert!(lo * lo < 2.0 && hi * hi >= 2.0);
        assert!(hi - lo <= 1e-10);
    }
}
