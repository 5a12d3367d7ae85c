//! Small dense kernels plus the structured operator norm used on the
//! truncated modal space.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Matrix exponential (scaling and squaring with Padé approximants).
pub fn expm(m: &DMatrix<f64>) -> DMatrix<f64> {
    match m.nrows() {
        0 => DMatrix::zeros(0, 0),
        1 => DMatrix::from_element(1, 1, m[(0, 0)].exp()),
        _ => m.exp(),
    }
}

/// `e^{At}` together with its first two iterated integrals
/// `∫₀ᵗ e^{As} ds` and `∫₀ᵗ ∫₀ˢ e^{Ar} dr ds`, read off one block exponential.
#[derive(Debug, Clone)]
pub struct ExpIntegrals {
    pub exp: DMatrix<f64>,
    pub int1: DMatrix<f64>,
    pub int2: DMatrix<f64>,
}

pub fn exp_with_integrals(a: &DMatrix<f64>, t: f64) -> ExpIntegrals {
    let p = a.nrows();
    let mut big = DMatrix::zeros(3 * p, 3 * p);
    big.view_mut((0, 0), (p, p)).copy_from(&(a * t));
    for i in 0..p {
        big[(i, p + i)] = t;
        big[(p + i, 2 * p + i)] = t;
    }
    let e = expm(&big);
    ExpIntegrals {
        exp: e.view((0, 0), (p, p)).into_owned(),
        int1: e.view((0, p), (p, p)).into_owned(),
        int2: e.view((0, 2 * p), (p, p)).into_owned(),
    }
}

/// Largest singular value of a dense matrix.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    if m.nrows() == 1 || m.ncols() == 1 {
        return m.norm();
    }
    if m.nrows() * m.ncols() <= 64 {
        // Gram route is exact enough for tiny blocks and much cheaper than an SVD.
        let gram = if m.nrows() <= m.ncols() {
            m * m.transpose()
        } else {
            m.transpose() * m
        };
        return sym_max_eigenvalue(&gram).max(0.0).sqrt();
    }
    m.singular_values().max()
}

/// Largest eigenvalue of a symmetric matrix.
pub fn sym_max_eigenvalue(s: &DMatrix<f64>) -> f64 {
    match s.nrows() {
        0 => 0.0,
        1 => s[(0, 0)],
        2 => {
            let (a, b, d) = (s[(0, 0)], 0.5 * (s[(0, 1)] + s[(1, 0)]), s[(1, 1)]);
            let mean = 0.5 * (a + d);
            let half_gap = (0.5 * (a - d)).hypot(b);
            mean + half_gap
        }
        _ => SymmetricEigen::new(s.clone()).eigenvalues.max(),
    }
}

/// Square operator whose columns outside a small `core` index set carry only
/// a diagonal entry, while the core columns are dense.
///
/// Every operator the conditions need on the truncated cascade has this shape:
/// heat modes n ≥ 1 never feed back, so their columns are diagonal, and all
/// coupling lives in the columns of mode 0 and the ODE block.
#[derive(Debug, Clone)]
pub struct CoreColumnOperator {
    core: Vec<usize>,
    is_core: Vec<bool>,
    dense: DMatrix<f64>,
    diag: Vec<f64>,
}

impl CoreColumnOperator {
    pub fn zeros(dim: usize, core: Vec<usize>) -> Self {
        let mut is_core = vec![false; dim];
        for &c in &core {
            assert!(c < dim, "core index out of range");
            is_core[c] = true;
        }
        let dense = DMatrix::zeros(dim, core.len());
        Self {
            core,
            is_core,
            dense,
            diag: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn core(&self) -> &[usize] {
        &self.core
    }

    /// Diagonal entry of a non-core column.
    pub fn set_diag(&mut self, k: usize, value: f64) {
        debug_assert!(!self.is_core[k]);
        self.diag[k] = value;
    }

    /// Dense core columns, `dim × core.len()`, in the order of `core()`.
    pub fn core_columns_mut(&mut self) -> &mut DMatrix<f64> {
        &mut self.dense
    }

    pub fn core_columns(&self) -> &DMatrix<f64> {
        &self.dense
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut out = DMatrix::zeros(n, n);
        for k in 0..n {
            if !self.is_core[k] {
                out[(k, k)] = self.diag[k];
            }
        }
        for (j, &c) in self.core.iter().enumerate() {
            out.column_mut(c).copy_from(&self.dense.column(j));
        }
        out
    }

    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut y = DVector::zeros(self.dim());
        for k in 0..self.dim() {
            if !self.is_core[k] {
                y[k] = self.diag[k] * x[k];
            }
        }
        for (j, &c) in self.core.iter().enumerate() {
            y.axpy(x[c], &self.dense.column(j), 1.0);
        }
        y
    }

    /// Spectral norm without forming the dense matrix.
    ///
    /// `XᵀX` is an arrowhead matrix: diagonal on the non-core block, dense on
    /// the core block. Eliminating the diagonal block turns the top eigenvalue
    /// into the root of a secular equation in a core-sized matrix, which is
    /// monotone and bracketed, so plain bisection suffices.
    pub fn norm(&self) -> f64 {
        let c = self.core.len();
        let gram_core = self.dense.transpose() * &self.dense;
        let mut diag_max2: f64 = 0.0;
        let mut pole: f64 = f64::NEG_INFINITY;
        // (d_k², z_kᵀ z_k) for non-core rows with a coupling entry.
        let mut spikes: Vec<(f64, DMatrix<f64>)> = Vec::new();
        let mut frob2 = self.dense.norm_squared();
        for k in 0..self.dim() {
            if self.is_core[k] {
                continue;
            }
            let d = self.diag[k];
            let d2 = d * d;
            frob2 += d2;
            diag_max2 = diag_max2.max(d2);
            if d == 0.0 {
                continue;
            }
            let row = self.dense.row(k);
            if row.iter().all(|&v| v == 0.0) {
                continue;
            }
            let z = row * d;
            pole = pole.max(d2);
            spikes.push((d2, z.transpose() * z));
        }
        if spikes.is_empty() {
            return sym_max_eigenvalue(&gram_core).max(diag_max2).max(0.0).sqrt();
        }

        let secular = |mu: f64| -> f64 {
            let mut s = gram_core.clone();
            for (d2, outer) in &spikes {
                s += outer * (1.0 / (mu - d2));
            }
            sym_max_eigenvalue(&s) - mu
        };
        let (mut lo, mut hi) = (pole, frob2.max(pole) * (1.0 + 1e-12) + f64::MIN_POSITIVE);
        debug_assert!(c > 0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if secular(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi.max(diag_max2).sqrt()
    }
}
